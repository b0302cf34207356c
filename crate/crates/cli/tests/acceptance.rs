//! Acceptance suite. Prints one `[PASS]`/`[FAIL]` line per criterion and
//! exits non-zero when any criterion fails.
//!
//! Runs without the libtest harness so the report is always printed.

use std::time::{Duration, Instant};

use locprec::channel::{ChannelMatrix, Propagation};
use locprec::constants::SPEED_OF_LIGHT;
use locprec::geometry::{
    compute_delay_budget, local_tangent, move_user, ArchitectureMode, MobilityScenario, TerminalClass,
    PUBLIC_SAFETY_SPEED_MPS,
};
use locprec::precoding::{mb_precoder, mmse_precoder, normalize};
use locprec::simulation::{frame_metrics, RunOptions, SystemModel};
use locprec::{
    CampaignConfig, CampaignOutput, CellKey, Complex64, DMatrix, DelayBudget, Normalization, PrecodingMatrix,
    RegularizationVector, Scheme, Simulator, Space, UserTerminal,
};
use locprec_cli::{execute, RunRequest};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOTAL_POWER_W: f64 = 30.0;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome {
            pass,
            detail: detail.into(),
        }
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> Complex64 {
    // Box-Muller is plenty for test matrices
    let u1: f64 = rng.random_range(f64::EPSILON..1.0);
    let u2: f64 = rng.random();
    let r = (-2.0 * u1.ln()).sqrt();
    let t = std::f64::consts::TAU * u2;
    Complex64::new(r * t.cos(), r * t.sin()) / 2f64.sqrt()
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

fn raw(entries: DMatrix<Complex64>, space: Space) -> PrecodingMatrix {
    PrecodingMatrix {
        entries,
        space,
        scheme: Scheme::Mmse,
        normalization: Normalization::Raw,
    }
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn c1_mb_normalization_equivalence() -> Outcome {
    let model = SystemModel::new(&CampaignConfig::default()).expect("default model");
    let schedule: Vec<usize> = (0..model.lattice.n_beams()).collect();
    let w = mb_precoder(&model.beamforming, &schedule).unwrap();
    let [spc, pac, mpc] = Normalization::ALL.map(|n| normalize(&w, n, TOTAL_POWER_W).unwrap().entries);
    let scale = spc.norm();
    let worst = [(&spc, &pac), (&spc, &mpc), (&pac, &mpc)]
        .iter()
        .map(|(a, b)| (*a - *b).norm() / scale)
        .fold(0.0, f64::max);
    Outcome::new(
        schedule.len() == 91 && worst <= 1e-12,
        format!(
            "{} beams, max relative Frobenius distance {worst:.2e} (<= 1e-12)",
            schedule.len()
        ),
    )
}

fn c3_normalization_contracts() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    let mut mpc_over = 0usize;
    for _ in 0..1000 {
        let n = rng.random_range(1..=64);
        let k = rng.random_range(1..=16);
        let p = 10f64.powf(rng.random_range(-2.0..3.0));
        let w = raw(random_matrix(&mut rng, n, k), Space::Feed);
        let target_row = p / n as f64;

        let spc = normalize(&w, Normalization::Spc, p).unwrap();
        worst = worst.max(rel(spc.total_power(), p));

        let pac = normalize(&w, Normalization::Pac, p).unwrap();
        for r in pac.row_powers() {
            worst = worst.max(rel(r.sqrt(), target_row.sqrt()));
        }

        let mpc = normalize(&w, Normalization::Mpc, p).unwrap();
        let max_row = mpc.row_powers().into_iter().fold(0.0, f64::max);
        worst = worst.max(rel(max_row, target_row));
        if mpc.total_power() > p * (1.0 + 1e-9) {
            mpc_over += 1;
        }
    }
    Outcome::new(
        worst <= 1e-9 && mpc_over == 0,
        format!("1000 matrices, worst relative error {worst:.2e} (<= 1e-9), MPC traces above P_t: {mpc_over}"),
    )
}

fn condition(h: &DMatrix<Complex64>) -> f64 {
    let s = h.clone().singular_values();
    s.max() / s.min()
}

fn c4_zero_forcing_limit() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut tested = 0;
    let mut worst: f64 = 0.0;
    while tested < 100 {
        let k = rng.random_range(2..=8);
        let n = rng.random_range(2 * k..=32);
        let h = random_matrix(&mut rng, k, n);
        if condition(&h) >= 10.0 {
            continue;
        }
        tested += 1;
        let channel = ChannelMatrix {
            entries: h.clone(),
            space: Space::Feed,
            epoch: 0.0,
            noise_normalized: true,
        };
        let alpha = RegularizationVector::new(vec![1e-9; k]).unwrap();
        let w = mmse_precoder(&channel, &alpha).unwrap();
        let g = &h * &w.entries;
        for i in 0..k {
            for j in 0..k {
                if i != j {
                    worst = worst.max(g[(i, j)].norm() / g[(i, i)].norm());
                }
            }
        }
    }
    Outcome::new(
        worst <= 1e-6,
        format!("{tested} matrices with condition < 10, worst |G_ij|/|G_ii| = {worst:.2e} (<= 1e-6)"),
    )
}

fn c5_sinr_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    let mut mismatched_inf = 0;
    for _ in 0..100 {
        let k = rng.random_range(1..=8);
        let n = rng.random_range(1..=16);
        let scale = 10f64.powf(rng.random_range(-1.0..1.0));
        let h = random_matrix(&mut rng, k, n) * Complex64::new(scale, 0.0);
        let w = random_matrix(&mut rng, n, k);
        let channel = ChannelMatrix {
            entries: h.clone(),
            space: Space::Feed,
            epoch: 0.0,
            noise_normalized: true,
        };
        let got = frame_metrics(&channel, &raw(w.clone(), Space::Feed)).unwrap();
        for (user, m) in got.iter().enumerate() {
            let mut signal = 0.0;
            let mut interference = 0.0;
            for col in 0..k {
                let mut acc = Complex64::new(0.0, 0.0);
                for ant in 0..n {
                    acc += h[(user, ant)] * w[(ant, col)];
                }
                if col == user {
                    signal = acc.norm_sqr();
                } else {
                    interference += acc.norm_sqr();
                }
            }
            worst = worst.max(rel(m.sinr, signal / (1.0 + interference)));
            if interference == 0.0 {
                mismatched_inf += usize::from(m.sir != f64::INFINITY);
            } else {
                worst = worst.max(rel(m.sir, signal / interference));
            }
        }
    }
    Outcome::new(
        worst <= 1e-12 && mismatched_inf == 0,
        format!("100 pairs, worst relative error {worst:.2e} (<= 1e-12)"),
    )
}

fn c6_mobility_displacement() -> Outcome {
    let model = SystemModel::new(&CampaignConfig::default()).expect("default model");
    let position = model.sat.sub_satellite_point();
    let mut user = UserTerminal::fixed(0, position, TerminalClass::Handheld, 290.0, &model.sat);
    let (east, north) = local_tangent(&position);
    let heading = (east + north).normalize();
    user.scenario = MobilityScenario::PublicSafety;
    user.velocity = heading * PUBLIC_SAFETY_SPEED_MPS;
    let moved = move_user(&user, 16.6464e-3).unwrap();
    let d = (moved.position - user.position).norm();
    Outcome::new(
        (d - 1.156).abs() <= 1e-3,
        format!("displacement {d:.6} m (1.156 +/- 0.001)"),
    )
}

fn c7_delay_budget() -> Outcome {
    let model = SystemModel::new(&CampaignConfig::default()).expect("default model");
    let sat = &model.sat;
    let nadir = sat.sub_satellite_point();
    let users: Vec<UserTerminal> = (0..5)
        .map(|i| UserTerminal::fixed(i, nadir, TerminalClass::Vsat, 290.0, sat))
        .collect();
    let d = (sat.position - nadir).norm();
    let expected = 3.0 * d / SPEED_OF_LIGHT;
    let mut worst: f64 = 0.0;
    for mode in [ArchitectureMode::Centralised, ArchitectureMode::Distributed] {
        let budget = compute_delay_budget(sat, &users, &nadir, 0.0, 0.0, mode, 10f64.to_radians()).unwrap();
        worst = worst.max(rel(budget.delta_t, expected));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut compose_worst: f64 = 0.0;
    for _ in 0..1000 {
        let [ut, feeder, tp, tad]: [f64; 4] = std::array::from_fn(|_| rng.random_range(0.0..0.05));
        let b = DelayBudget::new(ut, feeder, tp, tad, ArchitectureMode::Centralised).unwrap();
        compose_worst = compose_worst.max(rel(b.delta_t, ut + 2.0 * feeder + tp + tad));
        // adding processing time shifts the budget by exactly that amount
        let shifted = DelayBudget::new(ut, feeder, tp + 1e-3, tad, ArchitectureMode::Centralised).unwrap();
        compose_worst = compose_worst.max(((shifted.delta_t - b.delta_t) - 1e-3).abs() / shifted.delta_t);
    }
    Outcome::new(
        worst <= 1e-12 && compose_worst <= 1e-12,
        format!(
            "d = {:.3} km, dt = {:.6} ms, relative error {worst:.2e}; composition error {compose_worst:.2e} (<= 1e-12)",
            d / 1e3,
            expected * 1e3
        ),
    )
}

/// Desk-scale campaign shared by the statistical criteria: 7-beam lattice,
/// 20 iterations, every cell of the default matrix.
fn desk_config() -> CampaignConfig {
    let mut cfg = CampaignConfig::default();
    cfg.lattice.n_rings = 1;
    cfg.user_density_per_km2 = 0.05;
    cfg.iterations = 20;
    cfg.seed = 2024;
    cfg
}

struct Desk {
    cells: Vec<CellKey>,
    output: CampaignOutput,
    elapsed: Duration,
}

impl Desk {
    fn run() -> Self {
        let cfg = desk_config();
        let cells = cfg.cells();
        let start = Instant::now();
        let output = Simulator::new(cfg).unwrap().run_campaign(&cells, RunOptions::default());
        Desk {
            cells,
            output,
            elapsed: start.elapsed(),
        }
    }

    fn sibling(&self, cell: &CellKey, change: impl Fn(&mut CellKey)) -> &CellKey {
        let mut want = *cell;
        change(&mut want);
        self.cells
            .iter()
            .find(|c| CellKey { cell_id: 0, ..**c } == CellKey { cell_id: 0, ..want })
            .expect("sibling cell in the matrix")
    }

    fn mean_se(&self, cell: &CellKey) -> f64 {
        self.output.summary(cell.cell_id).expect("cell completed").mean_se
    }
}

fn c2_sir_overlap(desk: &Desk) -> Outcome {
    let mut compared = 0usize;
    let mut worst: f64 = 0.0;
    let mut mismatched = 0usize;
    for spc in desk.cells.iter().filter(|c| c.normalization == Normalization::Spc) {
        let mpc = desk.sibling(spc, |c| c.normalization = Normalization::Mpc);
        let a = desk.output.records_for(spc.cell_id);
        let b = desk.output.records_for(mpc.cell_id);
        if a.len() != b.len() || a.is_empty() {
            mismatched += 1;
            continue;
        }
        for (x, y) in a.iter().zip(b) {
            if (x.iteration, x.frame, x.user_id) != (y.iteration, y.frame, y.user_id) {
                mismatched += 1;
            } else if x.sir.is_infinite() || y.sir.is_infinite() {
                mismatched += usize::from(x.sir != y.sir);
            } else {
                worst = worst.max(rel(x.sir, y.sir));
            }
            compared += 1;
        }
    }
    Outcome::new(
        mismatched == 0 && worst <= 1e-9,
        format!("{compared} SIR samples over all schemes, worst relative difference {worst:.2e} (<= 1e-9)"),
    )
}

fn c8_scheme_ordering(desk: &Desk) -> Outcome {
    let mut checked = 0;
    let mut violations = Vec::new();
    for mmse in desk.cells.iter().filter(|c| {
        c.scheme == Scheme::Mmse
            && c.propagation == Propagation::PureLos
            && c.scenario == MobilityScenario::Fixed
            && c.normalization == Normalization::Spc
    }) {
        let se = |s: Scheme| desk.mean_se(desk.sibling(mmse, |c| c.scheme = s));
        let (m, ss, none) = (se(Scheme::Mmse), se(Scheme::SsMmse), se(Scheme::None));
        checked += 1;
        if !(m >= ss && ss >= none) {
            violations.push(format!("{} ({m:.3}/{ss:.3}/{none:.3})", mmse.label()));
        }
    }
    Outcome::new(
        checked > 0 && violations.is_empty() && desk.elapsed < Duration::from_secs(600),
        format!(
            "{checked} (space, terminal, power) groups, violations: {}; campaign {:.1} s",
            if violations.is_empty() {
                "none".to_string()
            } else {
                violations.join(", ")
            },
            desk.elapsed.as_secs_f64()
        ),
    )
}

fn c9_nlos_degradation(desk: &Desk) -> Outcome {
    let mut checked = 0;
    let mut not_lower = Vec::new();
    let mut gaps = Vec::new();
    for plos in desk.cells.iter().filter(|c| c.propagation == Propagation::PureLos) {
        let nlos = desk.sibling(plos, |c| c.propagation = Propagation::Nlos);
        let gap = desk.mean_se(plos) - desk.mean_se(nlos);
        checked += 1;
        if gap.is_nan() || gap <= 0.0 {
            not_lower.push(plos.label());
        }
        if plos.scheme == Scheme::Mmse
            && plos.normalization == Normalization::Spc
            && plos.terminal == TerminalClass::Vsat
        {
            gaps.push((plos.label(), gap));
        }
    }
    let small: Vec<_> = gaps.iter().filter(|(_, g)| g.is_nan() || *g <= 0.5).collect();
    let (lo, hi) = gaps
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, g)| {
            (lo.min(*g), hi.max(*g))
        });
    Outcome::new(
        checked > 0 && not_lower.is_empty() && small.is_empty() && !gaps.is_empty(),
        format!(
            "{checked} pLOS/NLOS pairs, not lower: {}; MMSE/SPC/VSAT gap {lo:.2}..{hi:.2} bit/s/Hz (> 0.5)",
            not_lower.len()
        ),
    )
}

fn c10_fixed_vs_public_safety(desk: &Desk) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for fixed in desk.cells.iter().filter(|c| c.scenario == MobilityScenario::Fixed) {
        let moving = desk.sibling(fixed, |c| c.scenario = MobilityScenario::PublicSafety);
        worst = worst.max((desk.mean_se(fixed) - desk.mean_se(moving)).abs());
        checked += 1;
    }
    Outcome::new(
        checked > 0 && worst <= 1e-2,
        format!("{checked} matched pairs, max |mean SE difference| {worst:.2e} bit/s/Hz (<= 1e-2)"),
    )
}

fn c11_determinism() -> Outcome {
    let mut cfg = CampaignConfig::default();
    cfg.lattice.n_rings = 1;
    cfg.user_density_per_km2 = 0.02;
    cfg.iterations = 3;
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, threads: usize| {
        let mut req = RunRequest::new(cfg.clone(), dir.path().join(name));
        req.threads = Some(threads);
        let report = execute(&req).unwrap();
        let read = |p: &std::path::Path| std::fs::read(p).unwrap();
        (
            read(report.records_path.as_ref().unwrap()),
            read(&report.summary_path),
            read(&report.manifest_path),
        )
    };
    let serial = run("serial", 1);
    let serial_again = run("serial-again", 1);
    let parallel = run("parallel", 4);
    let same = serial == serial_again && serial == parallel;
    Outcome::new(
        same && !serial.0.is_empty(),
        format!(
            "records.csv {} bytes, identical across 1, 1 and 4 threads: {same}",
            serial.0.len()
        ),
    )
}

fn main() {
    let mut failed = 0;
    let mut report = |id: &str, title: &str, limit: Duration, f: &dyn Fn() -> Outcome| {
        let start = Instant::now();
        let o = f();
        let elapsed = start.elapsed();
        let pass = o.pass && elapsed <= limit;
        failed += usize::from(!pass);
        println!(
            "[{}] {id} {title}: {} [{:.2} s, limit {} s]",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
    };
    let secs = Duration::from_secs;

    report(
        "C1",
        "MB normalization equivalence",
        secs(1),
        &c1_mb_normalization_equivalence,
    );
    report("C3", "normalization contracts", secs(10), &c3_normalization_contracts);
    report("C4", "MMSE zero-forcing limit", secs(5), &c4_zero_forcing_limit);
    report("C5", "SINR oracle equivalence", secs(5), &c5_sinr_oracle);
    report("C6", "mobility displacement", secs(1), &c6_mobility_displacement);
    report("C7", "delay budget", secs(1), &c7_delay_budget);

    let desk = Desk::run();
    report("C2", "SPC/MPC SIR overlap", secs(60), &|| c2_sir_overlap(&desk));
    report("C8", "scheme ordering", secs(600), &|| c8_scheme_ordering(&desk));
    report("C9", "pLOS vs NLOS degradation", secs(600), &|| {
        c9_nlos_degradation(&desk)
    });
    report("C10", "fixed vs public-safety gap", secs(600), &|| {
        c10_fixed_vs_public_safety(&desk)
    });
    report("C11", "end-to-end determinism", secs(300), &c11_determinism);

    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}

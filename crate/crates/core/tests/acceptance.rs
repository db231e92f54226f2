//! Acceptance criteria, one pass/fail line each. Exits nonzero on any failure.

use std::process::Command;
use std::time::Instant;

use vlasov_stokes::coupling::Trajectory;
use vlasov_stokes::diagnostics::{check_conservation, check_energy_identity, InequalityRecord};
use vlasov_stokes::fluid::{leray_project, relative_divergence};
use vlasov_stokes::harness::{canonical_config, drag_only_error, simulate, verify_suite, Check};

const DRAG_T: f64 = 0.5;
const DRAG_LADDER: [(usize, f64); 3] = [(16, 4e-3), (32, 2e-3), (64, 1e-3)];
const DRAG_L1_MAX: f64 = 1e-3;
const DRAG_RATIO_MIN: f64 = 3.5;
const DRAG_SECONDS_MAX: f64 = 120.0;
const MASS_MAX: f64 = 1e-6;
const MASS_CORRECTED_MAX: f64 = 1e-12;
const MOMENTUM_MAX: f64 = 5e-6;
/// "Halving with dt" and "order ≥ 1" both read as a drift ratio near 2 on one dt halving.
const DT_RATIO_MIN: f64 = 1.8;
const ENERGY_MAX: f64 = 1e-3;
const MONOTONE_MAX: f64 = 1e-10;
const PICARD_ITER_MAX: f64 = 10.0;
const STOKES_MODE_MAX: f64 = 1e-12;
const LERAY_MAX: f64 = 1e-12;
const DIVERGENCE_MAX: f64 = 1e-10;
const SMOKE_RELAX: f64 = 10.0;
const SMOKE_STEPS: usize = 10;
const SMOKE_SECONDS_MAX: f64 = 300.0;

struct Report {
    failed: usize,
}

impl Report {
    fn line(&mut self, id: &str, pass: bool, detail: String) {
        if !pass {
            self.failed += 1;
        }
        println!("{} {id:<4} {detail}", if pass { "PASS" } else { "FAIL" });
    }
}

fn records<'a>(checks: &'a [Check], suite: &str, pred: impl Fn(&str) -> bool) -> Vec<&'a InequalityRecord> {
    checks.iter().filter(|c| c.suite == suite && pred(&c.record.name)).map(|c| &c.record).collect()
}

fn one<'a>(checks: &'a [Check], suite: &str, name: &str) -> &'a InequalityRecord {
    let found = records(checks, suite, |n| n == name);
    assert_eq!(found.len(), 1, "{suite}/{name}");
    found[0]
}

fn drag_only(rep: &mut Report) {
    let mut fine_seconds = 0.0;
    let mut ok = true;
    let mut parts = Vec::new();
    for d in [1, 2] {
        let mut errs = Vec::new();
        for &(n, dt) in &DRAG_LADDER {
            let started = Instant::now();
            let e = drag_only_error(d, n, dt, DRAG_T).expect("drag-only run");
            if n == 64 {
                fine_seconds += started.elapsed().as_secs_f64();
            }
            errs.push(e);
        }
        let r1 = errs[0] / errs[1];
        let r2 = errs[1] / errs[2];
        ok &= errs[2] < DRAG_L1_MAX && r1 >= DRAG_RATIO_MIN && r2 >= DRAG_RATIO_MIN;
        parts.push(format!("d={d} L1(64)={:.3e} ratios {r1:.2},{r2:.2}", errs[2]));
    }
    rep.line("1", ok, format!("drag-only oracle: {}", parts.join("; ")));
    rep.line(
        "1t",
        fine_seconds < DRAG_SECONDS_MAX,
        format!("drag-only 64^(2d) runtime {fine_seconds:.1}s (limit {DRAG_SECONDS_MAX}s)"),
    );
}

fn from_suites(rep: &mut Report, checks: &[Check]) {
    let mass = one(checks, "conservation", "mass_drift").lhs;
    let corrected = one(checks, "conservation", "mass_drift_corrected").lhs;
    rep.line(
        "2",
        mass < MASS_MAX && corrected < MASS_CORRECTED_MAX,
        format!("mass drift {mass:.3e}, corrected {corrected:.3e}"),
    );

    let mom = one(checks, "conservation", "momentum_drift").lhs;
    let mom_ratio = one(checks, "conservation", "momentum_drift_dt_ratio").rhs;
    let coef2 = one(checks, "conservation", "momentum_drift_coef2").lhs;
    rep.line(
        "3",
        mom < MOMENTUM_MAX && mom_ratio >= DT_RATIO_MIN,
        format!("momentum drift {mom:.3e}, dt ratio {mom_ratio:.3} (coefficient-2 variant {coef2:.3e})"),
    );

    let res = one(checks, "conservation", "energy_identity_residual").lhs;
    let e_ratio = one(checks, "conservation", "energy_residual_dt_ratio").rhs;
    let rise = one(checks, "conservation", "energy_monotone_rise").lhs;
    rep.line(
        "4",
        res < ENERGY_MAX && e_ratio >= DT_RATIO_MIN && rise <= MONOTONE_MAX,
        format!("energy residual {res:.3e}, dt ratio {e_ratio:.3}, largest per-step rise {rise:.3e}"),
    );

    let interp = records(checks, "inequalities", |n| n.ends_with("_worst_snapshot"));
    let families = ["indicator", "maxwellian", "two_stream"];
    let covered = families.iter().all(|f| interp.iter().any(|r| r.name.contains(f)));
    let recurrence: Vec<_> = (1..=6).map(|k| one(checks, "inequalities", &format!("moment_recurrence_k{k}"))).collect();
    let bits = one(checks, "inequalities", "records_bit_reproducible");
    let again = verify_suite("inequalities").expect("inequality suite");
    let first = records(checks, "inequalities", |_| true);
    let identical = first.len() == again.len()
        && first
            .iter()
            .zip(&again)
            .all(|(a, b)| a.name == b.record.name && a.margin.to_bits() == b.record.margin.to_bits());
    let min_interp = interp.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min);
    let min_rec = recurrence.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min);
    rep.line(
        "5",
        covered && interp.iter().all(|r| r.pass) && recurrence.iter().all(|r| r.pass) && bits.pass && identical,
        format!(
            "moment inequalities: {} interpolation records (min margin {min_interp:.3e}), \
             recurrence k=1..6 (min margin {min_rec:.3e}), margins bit-identical across runs: {identical}",
            interp.len()
        ),
    );

    let sup = one(checks, "inequalities", "density_sup_bound_drag_only_min_margin");
    rep.line("6", sup.margin > 0.0, format!("density sup bound with r = h_v: min margin {:.3e}", sup.margin));

    let conv = records(checks, "contraction", |n| n == "picard_converged");
    let iters = records(checks, "contraction", |n| n == "picard_iterates");
    let alphas = records(checks, "contraction", |n| n == "picard_alpha_est");
    let halving: Vec<_> =
        ["alpha_halving_1", "alpha_halving_2"].iter().map(|n| one(checks, "contraction", n)).collect();
    let uniq = one(checks, "contraction", "picard_uniqueness_x_diff");
    let ok = !conv.is_empty()
        && conv.iter().all(|r| r.pass)
        && iters.iter().all(|r| r.lhs <= PICARD_ITER_MAX)
        && alphas.iter().all(|r| r.lhs < 1.0)
        && halving.iter().all(|r| r.pass)
        && uniq.pass;
    let alpha_list: Vec<String> =
        [halving[0].rhs, halving[0].lhs, halving[1].lhs].iter().map(|a| format!("{a:.2e}")).collect();
    let iter_max = iters.iter().map(|r| r.lhs).fold(0.0, f64::max);
    rep.line(
        "7",
        ok,
        format!(
            "contraction: alpha_est [{}] over T_w, T_w/2, T_w/4, at most {iter_max} iterates, uniqueness diff {:.3e} <= {:.1e}",
            alpha_list.join(", "),
            uniq.lhs,
            uniq.rhs
        ),
    );

    let growth: Vec<_> =
        [0, 2, 4].iter().map(|k| one(checks, "inequalities", &format!("gradient_moment_growth_k{k}"))).collect();
    let margins: Vec<String> = growth.iter().map(|r| format!("{:.3e}", r.margin)).collect();
    rep.line(
        "8",
        growth.iter().all(|r| r.pass && r.lhs.is_finite() && r.rhs.is_finite()),
        format!("gradient moments k=0,2,4 margins [{}]", margins.join(", ")),
    );

    let modes = records(checks, "oracles", |n| n.starts_with("stokes_mode_decay"));
    let mode_err = modes.iter().map(|r| r.lhs).fold(0.0, f64::max);
    let leray = one(checks, "oracles", "leray_idempotence").lhs;
    let div = one(checks, "oracles", "stokes_divergence_max").lhs;
    rep.line(
        "9",
        !modes.is_empty() && mode_err < STOKES_MODE_MAX && leray < LERAY_MAX && div < DIVERGENCE_MAX,
        format!("Stokes: mode decay {mode_err:.3e}, Leray idempotence {leray:.3e}, divergence {div:.3e}"),
    );
}

fn determinism(rep: &mut Report) {
    let root = tempfile::tempdir().expect("tempdir");
    let mut csvs = Vec::new();
    for k in 0..2 {
        let dir = root.path().join(format!("run{k}"));
        let status = Command::new(env!("CARGO_BIN_EXE_vstokes"))
            .args(["verify", "--suite", "all", "--out"])
            .arg(&dir)
            .stdout(std::process::Stdio::null())
            .status()
            .expect("spawn vstokes");
        let bytes = std::fs::read(dir.join("verify_all.csv")).unwrap_or_default();
        csvs.push((status.success(), bytes));
    }
    let same = !csvs[0].1.is_empty() && csvs[0].1 == csvs[1].1;
    rep.line(
        "10",
        same && csvs.iter().all(|c| c.0),
        format!("verify --suite all twice: {} bytes, identical: {same}", csvs[0].1.len()),
    );
}

fn smoke(rep: &mut Report) {
    let mut cfg = canonical_config();
    cfg.grid.d = 3;
    cfg.grid.n_x = 16;
    cfg.grid.n_v = 16;
    cfg.time.t_final = SMOKE_STEPS as f64 * cfg.time.dt;
    cfg.output.stride = 1;
    let started = Instant::now();
    let traj: Trajectory = simulate(&cfg).expect("3-D run").trajectory;
    let secs = started.elapsed().as_secs_f64();
    let steps = traj.samples.len() - 1;

    let cons = check_conservation(&traj.samples, SMOKE_RELAX * cfg.diag.tol_mass, SMOKE_RELAX * cfg.diag.tol_momentum);
    let energy = check_energy_identity(&traj.samples, SMOKE_RELAX * cfg.diag.tol_energy, SMOKE_RELAX * MONOTONE_MAX);
    let div = traj.snapshots.iter().map(|(_, s)| relative_divergence(&s.fluid.grid, &s.fluid.u)).fold(0.0, f64::max);
    let (_, last) = traj.snapshots.last().expect("snapshot");
    let p1 = leray_project(&last.fluid.grid, &last.fluid.u);
    let p2 = leray_project(&last.fluid.grid, &p1);
    let scale = p1.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    let idem = p1.iter().flatten().zip(p2.iter().flatten()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / scale;

    let ok = secs < SMOKE_SECONDS_MAX
        && steps == SMOKE_STEPS
        && traj.snapshots.len() == SMOKE_STEPS + 1
        && cons[0].pass
        && energy.residual.pass
        && energy.monotone.pass
        && div < SMOKE_RELAX * DIVERGENCE_MAX
        && idem < SMOKE_RELAX * LERAY_MAX;
    rep.line(
        "3d",
        ok,
        format!(
            "16^6 smoke, {steps} steps in {secs:.1}s: mass {:.3e}, energy residual {:.3e}, rise {:.3e}, \
             divergence {div:.3e}, Leray {idem:.3e}",
            cons[0].lhs, energy.residual.lhs, energy.monotone.lhs
        ),
    );
}

fn main() {
    let mut rep = Report { failed: 0 };
    drag_only(&mut rep);
    let checks = verify_suite("all").expect("verify suites");
    from_suites(&mut rep, &checks);
    determinism(&mut rep);
    smoke(&mut rep);
    println!("{} criteria failed", rep.failed);
    if rep.failed > 0 {
        std::process::exit(1);
    }
}

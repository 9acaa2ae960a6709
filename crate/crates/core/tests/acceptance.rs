//! Acceptance suite. Each test prints one PASS/FAIL line per criterion with
//! the measured values, then asserts. Tests share a lock so that runtime
//! bounds are measured without contention.

use std::sync::Mutex;
use std::time::{Duration, Instant};

use dynsolow::dynamics::{jacobian_reduced, rhs_reduced};
use dynsolow::equilibria::{
    bifurcation_scan, equilibria, probe_limit_cycle, PointKind, Stability, SCAN_HORIZON,
};
use dynsolow::params::UNIT_DIFFUSION_SIGMA;
use dynsolow::reproduce::{
    boundary_layer_deviation, coherence_growth_runs, cycle_histogram_run, general_runs,
    limit_cycle_stagnation_run, micro_oracle_run, stagnation_cycle, summarize_reports, supply_growth_run,
    BOUNDARY_LAYER_EPSILONS, HISTOGRAM_YEARS,
};
use dynsolow::stochastic::NoiseProcess;
use dynsolow::{ModelParams, ReducedState};
use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

static SERIAL: Mutex<()> = Mutex::new(());

const R: f64 = 3.75e-5;
const EPSILON: f64 = 2.5e-5;

struct Criterion {
    id: u32,
    lines: Vec<(bool, String)>,
    started: Instant,
}

impl Criterion {
    fn start(id: u32) -> Self {
        Criterion {
            id,
            lines: Vec::new(),
            started: Instant::now(),
        }
    }

    fn check(&mut self, ok: bool, what: impl Into<String>) {
        self.lines.push((ok, what.into()));
    }

    fn runtime(&mut self, limit: Duration) {
        let took = self.started.elapsed();
        self.check(took < limit, format!("runtime {took:.2?} < {limit:?}"));
    }

    fn finish(self) {
        let mut failed = Vec::new();
        for (ok, what) in &self.lines {
            let tag = if *ok { "PASS" } else { "FAIL" };
            println!("{tag} criterion {}: {what}", self.id);
            if !ok {
                failed.push(what.clone());
            }
        }
        assert!(failed.is_empty(), "criterion {} failed: {failed:?}", self.id);
    }
}

fn lock() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[test]
fn criterion_01_supply_regime_grows_at_solow_rate() {
    let _g = lock();
    let mut c = Criterion::start(1);
    let m = supply_growth_run(&ModelParams::BASE, 0, 1.0).expect("run");
    c.runtime(Duration::from_secs(5));
    let ey = (m.y / R - 1.0).abs();
    let eks = (m.k_s / R - 1.0).abs();
    let ekd = (m.k_d / R).abs();
    c.check(ey < 0.02, format!("y slope {:.6e}, rel error {ey:.4} < 0.02", m.y));
    c.check(eks < 0.02, format!("k_s slope {:.6e}, rel error {eks:.4} < 0.02", m.k_s));
    c.check(ekd < 0.1, format!("|k_d slope|/R = {ekd:.4} < 0.1 (mean s {:.4})", m.mean_sentiment));
    c.finish();
}

#[test]
fn criterion_02_boundary_layer_accuracy() {
    let _g = lock();
    let mut c = Criterion::start(2);
    let devs: Vec<f64> = BOUNDARY_LAYER_EPSILONS
        .iter()
        .map(|&e| boundary_layer_deviation(e).expect("ode").0)
        .collect();
    c.runtime(Duration::from_secs(5));
    assert_eq!(BOUNDARY_LAYER_EPSILONS[0], 1e-5);
    c.check(devs[0] < 0.05, format!("max rel deviation at eps=1e-5: {:.4} < 0.05", devs[0]));
    c.check(
        devs[1] < devs[0] && devs[2] < devs[1],
        format!("deviation shrinks with eps: {devs:.4?}"),
    );
    c.finish();
}

#[test]
fn criterion_03_limit_cycle_stagnation() {
    let _g = lock();
    let mut c = Criterion::start(3);
    let runs = [
        ("xi off", limit_cycle_stagnation_run(false, 0).expect("run")),
        ("xi on", limit_cycle_stagnation_run(true, 0).expect("run")),
    ];
    let cycle = stagnation_cycle().expect("detector");
    c.runtime(Duration::from_secs(10));
    for (tag, r) in &runs {
        let kd = (r.k_d.slope / R).abs();
        let y = r.y.slope / EPSILON;
        c.check(kd < 0.1, format!("{tag}: |k_d slope|/R = {kd:.4} < 0.1"));
        c.check((0.5..=1.5).contains(&y), format!("{tag}: y slope/eps = {y:.4} in [0.5, 1.5]"));
    }
    match cycle {
        Some(lc) => c.check(
            lc.spread < 0.01,
            format!("periodic cycle period {:.1} d, spread {:.2e} < 0.01", lc.period, lc.spread),
        ),
        None => c.check(false, "periodic cycle detected"),
    }
    c.finish();
}

#[test]
fn criterion_04_coherence_resonance_growth() {
    let _g = lock();
    let mut c = Criterion::start(4);
    let runs = coherence_growth_runs();
    c.runtime(Duration::from_secs(60));
    let (summary, failures) = summarize_reports(&runs);
    c.check(
        failures.is_empty(),
        format!("{}/{} runs completed {failures:?}", runs.len() - failures.len(), runs.len()),
    );
    match summary {
        Some([s_bar, y0, ks0, kd0, _]) => {
            // Relation recomputed from the ensemble slopes.
            let rel = (y0 - (R + (1.0 / 3.0) * (kd0 - R))).abs() / R;
            c.check(s_bar > 0.05, format!("ensemble mean s = {s_bar:.4} > 0.05"));
            c.check(y0 > R, format!("y0/R = {:.4} > 1", y0 / R));
            c.check(
                ((y0 - ks0) / R).abs() < 0.1,
                format!("|y0 - k_s0|/R = {:.4} < 0.1", ((y0 - ks0) / R).abs()),
            );
            c.check(kd0 > y0, format!("k_d0/R = {:.4} > y0/R = {:.4}", kd0 / R, y0 / R));
            c.check(rel < 0.1, format!("|y0 - (R + rho (k_d0 - R))|/R = {rel:.4} < 0.1"));
        }
        None => c.check(false, "no completed runs"),
    }
    c.finish();
}

#[test]
fn criteria_05_06_general_case() {
    let _g = lock();
    let mut five = Criterion::start(5);
    let runs = general_runs();
    five.runtime(Duration::from_secs(60));
    let ok: Vec<_> = runs.iter().filter_map(|(_, r)| r.as_ref().ok()).collect();
    five.check(ok.len() == runs.len(), format!("{}/{} runs completed", ok.len(), runs.len()));
    let mut six = Criterion::start(6);
    if !ok.is_empty() {
        for (name, slopes) in [
            ("y", ok.iter().map(|g| g.report.y.slope).collect::<Vec<_>>()),
            ("k_s", ok.iter().map(|g| g.report.k_s.slope).collect()),
            ("k_d", ok.iter().map(|g| g.report.k_d.slope).collect()),
        ] {
            let e = (mean(&slopes) / R - 1.0).abs();
            five.check(e < 0.15, format!("ensemble {name} slope rel error {e:.4} < 0.15"));
        }
        let mid = mean(&ok.iter().map(|g| g.gap_mid).collect::<Vec<_>>());
        let last = mean(&ok.iter().map(|g| g.gap_last).collect::<Vec<_>>());
        five.check(
            last.is_finite() && last <= mid,
            format!("max|k_s - k_d| last 100 y {last:.4} <= mid-run {mid:.4}"),
        );
        let f = mean(&ok.iter().map(|g| g.regime_fraction).collect::<Vec<_>>());
        six.check((0.60..=0.80).contains(&f), format!("demand-driven fraction {f:.4} in [0.60, 0.80]"));
    } else {
        six.check(false, "no completed runs");
    }
    let r5 = std::panic::catch_unwind(|| five.finish());
    six.finish();
    if let Err(e) = r5 {
        std::panic::resume_unwind(e);
    }
}

#[test]
fn criterion_07_cycle_histograms() {
    let _g = lock();
    let mut c = Criterion::start(7);
    let h = cycle_histogram_run(0, HISTOGRAM_YEARS).expect("runs");
    c.runtime(Duration::from_secs(300));
    let in_band = |m: Option<(f64, f64)>| m.is_some_and(|(a, b)| a >= 40.0 && b <= 70.0);
    c.check(
        in_band(h.output.modal_bin),
        format!("output modal bin {:?} within [40, 70] years", h.output.modal_bin),
    );
    c.check(
        h.output.band_fraction >= 0.40,
        format!("output band fraction {:.4} >= 0.40", h.output.band_fraction),
    );
    c.check(
        in_band(h.sentiment.modal_bin),
        format!("sentiment modal bin {:?} within [40, 70] years", h.sentiment.modal_bin),
    );
    c.finish();
}

fn residual(st: ReducedState, p: &ModelParams) -> f64 {
    rhs_reduced(&st, p, 0.0).unwrap().to_array().iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[test]
fn criterion_08_equilibrium_structure() {
    let _g = lock();
    let mut c = Criterion::start(8);
    let p = ModelParams::BASE;
    let pts = equilibria(&p).expect("equilibria");
    let q = p.with_gamma_c2(4000.0, 1e-4);
    let single = equilibria(&q).expect("equilibria");
    let cycle = probe_limit_cycle(&q, SCAN_HORIZON).expect("probe");
    c.runtime(Duration::from_secs(1));
    c.check(pts.len() == 3, format!("base case has {} fixed points", pts.len()));
    if pts.len() == 3 {
        c.check(pts[0].s < 0.0 && pts[0].is_stable_focus(), format!("s = {:.4} stable focus", pts[0].s));
        c.check(pts[1].kind == PointKind::Saddle, format!("s = {:.4} saddle", pts[1].s));
        c.check(pts[2].s > 0.0 && pts[2].is_stable_focus(), format!("s = {:.4} stable focus", pts[2].s));
    }
    for e in &pts {
        let r = residual(e.state(), &p);
        c.check(r < 1e-10, format!("|rhs| at s = {:.4}: {r:.2e} < 1e-10", e.s));
    }
    c.check(
        single.len() == 1 && single[0].kind == PointKind::Focus && single[0].stability == Stability::Unstable,
        format!("gamma=4000 c2=1e-4: {} point(s), single unstable focus", single.len()),
    );
    c.check(cycle.is_some(), format!("gamma=4000 c2=1e-4 limit cycle {cycle:?}"));
    c.finish();
}

#[test]
fn criterion_09_bifurcation_sequence() {
    let _g = lock();
    let mut c = Criterion::start(9);
    let recs = bifurcation_scan(&ModelParams::BASE, &[350.0, 1000.0, 4000.0, 15000.0], &[1e-4]);
    c.runtime(Duration::from_secs(30));
    let cycles: Vec<bool> = recs.iter().map(|r| r.limit_cycle().is_some()).collect();
    let counts: Vec<Option<usize>> = recs.iter().map(|r| r.equilibria().map(<[_]>::len)).collect();
    c.check(cycles == [false, true, true, false], format!("cycle pattern {cycles:?}"));
    c.check(
        counts == [Some(3), Some(3), Some(1), Some(1)],
        format!("equilibrium counts {counts:?} = [3, 3, 1, 1]"),
    );
    c.finish();
}

#[test]
fn criterion_10_micro_oracle() {
    let _g = lock();
    let mut c = Criterion::start(10);
    let m = micro_oracle_run(0).expect("ensemble");
    c.runtime(Duration::from_secs(30));
    c.check(m.path_deviation < 0.02, format!("sup deviation {:.4} < 0.02", m.path_deviation));
    // The tanh law is recomputed here rather than taken from the run.
    let z = (m.stationary_mean - 0.4f64.tanh()).abs() / m.standard_error;
    c.check(z < 3.0, format!("stationary mean {:.5}, {z:.2} standard errors < 3", m.stationary_mean));
    c.finish();
}

fn central_difference(st: ReducedState, p: &ModelParams) -> Matrix3<f64> {
    let h = 1e-6;
    let x = st.to_array();
    Matrix3::from_fn(|row, col| {
        let mut up = x;
        let mut dn = x;
        up[col] += h;
        dn[col] -= h;
        let fu = rhs_reduced(&ReducedState::from_array(up), p, 0.0).unwrap().to_array();
        let fd = rhs_reduced(&ReducedState::from_array(dn), p, 0.0).unwrap().to_array();
        (fu[row] - fd[row]) / (2.0 * h)
    })
}

#[test]
fn criterion_11_numerical_hygiene() {
    let _g = lock();
    let mut c = Criterion::start(11);
    let p = ModelParams::BASE;

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let st = ReducedState::new(
            rng.random_range(-0.95..0.95),
            rng.random_range(-0.95..0.95),
            rng.random_range(-0.5..0.5),
        );
        let a = jacobian_reduced(&st, &p).unwrap();
        let fd = central_difference(st, &p);
        worst = worst.max((a - fd).abs().max() / a.abs().max().max(1e-12));
    }
    c.check(worst < 1e-6, format!("Jacobian vs central differences, worst rel {worst:.2e} < 1e-6"));

    let n = 1_000_000;
    let sigma = UNIT_DIFFUSION_SIGMA;
    let mut ou = NoiseProcess::new(p.tau_xi, sigma, 0.0, 99);
    let xs: Vec<f64> = (0..n).map(|_| ou.step(1.0)).collect();
    let m = mean(&xs);
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n as f64;
    let std_err = (var.sqrt() / sigma - 1.0).abs();
    c.check(std_err < 0.01, format!("OU std {:.5} vs {sigma:.5}, rel {std_err:.4} < 0.01", var.sqrt()));
    let mut acf_worst: f64 = 0.0;
    for lag in 1..=25 {
        let cov = xs.iter().zip(&xs[lag..]).map(|(a, b)| (a - m) * (b - m)).sum::<f64>() / (n - lag) as f64;
        acf_worst = acf_worst.max((cov / var - (-(lag as f64) / p.tau_xi).exp()).abs());
    }
    c.check(acf_worst < 0.05, format!("OU autocorrelation lags 1..25, worst abs {acf_worst:.4} < 0.05"));

    let full = supply_growth_run(&p, 0, 1.0).expect("dt = 1");
    let half = supply_growth_run(&p, 0, 0.5).expect("dt = 0.5");
    for (name, a, b) in [("y", full.y, half.y), ("k_s", full.k_s, half.k_s)] {
        let rel = (a / b - 1.0).abs();
        c.check(rel < 0.01, format!("dt halving changes {name} slope by {rel:.2e} < 0.01"));
    }
    c.finish();
}

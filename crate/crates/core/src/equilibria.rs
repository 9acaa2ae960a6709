//! Fixed points of the noise-free reduced system, their stability, and
//! limit-cycle detection over `(gamma, c2)` grids.
//!
//! Setting `s' = h' = z' = 0` gives
//! `omega_y (e^z - 1) = rho c2 s + eps`, `h = tanh(gamma (rho c2 s + eps))`
//! and the scalar sentiment condition
//! `atanh(s) - beta1 s = beta2 tanh(gamma (rho c2 s + eps))`.
//! A variant of the condition without the factor `rho` in front of `c2`
//! ([`ConditionForm::Unscaled`]) is kept for comparison.

use std::fmt;
use std::io::{self, Write};

use nalgebra::{Complex, Vector3};
use rayon::prelude::*;

use crate::dynamics::{jacobian_reduced, rhs_reduced, ReducedState};
use crate::error::{Error, Result};
use crate::integrator::integrate_deterministic;
use crate::params::{fmt_f64, ModelParams};

const GRID_POINTS: usize = 10_000;
const EDGE: f64 = 1e-6;
const BISECTION_TOL: f64 = 1e-12;
/// Residual (sup norm, per day) every reported equilibrium satisfies.
pub const RESIDUAL_TOL: f64 = 1e-12;
/// Imaginary part above which an eigenvalue counts as complex.
pub const COMPLEX_TOL: f64 = 1e-9;
/// Real part below which an eigenvalue counts as zero.
pub const ZERO_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConditionForm {
    /// Obtained by zeroing the reduced system: argument `gamma (rho c2 s + eps)`.
    Derived,
    /// Argument `gamma c2 s + gamma eps`.
    Unscaled,
}

fn condition(p: &ModelParams, form: ConditionForm) -> impl Fn(f64) -> f64 + '_ {
    move |s: f64| {
        let arg = match form {
            ConditionForm::Derived => p.gamma * (p.rho * p.c2 * s + p.epsilon),
            ConditionForm::Unscaled => p.gamma * p.c2 * s + p.gamma * p.epsilon,
        };
        s.atanh() - p.beta1 * s - p.beta2 * arg.tanh()
    }
}

fn bracket_roots(f: impl Fn(f64) -> f64) -> Vec<f64> {
    let (lo, hi) = (-1.0 + EDGE, 1.0 - EDGE);
    let step = (hi - lo) / (GRID_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..GRID_POINTS).map(|i| lo + i as f64 * step).collect();
    let values: Vec<f64> = grid.iter().map(|&s| f(s)).collect();
    let mut roots = Vec::new();
    for i in 0..GRID_POINTS - 1 {
        let (fa, fb) = (values[i], values[i + 1]);
        if fa == 0.0 {
            roots.push(grid[i]);
        } else if fa * fb < 0.0 {
            let (mut a, mut b, mut fa) = (grid[i], grid[i + 1], fa);
            while b - a > BISECTION_TOL {
                let m = 0.5 * (a + b);
                let fm = f(m);
                if fm == 0.0 {
                    a = m;
                    b = m;
                    break;
                }
                if fa * fm < 0.0 {
                    b = m;
                } else {
                    a = m;
                    fa = fm;
                }
            }
            roots.push(0.5 * (a + b));
        }
    }
    if values[GRID_POINTS - 1] == 0.0 {
        roots.push(grid[GRID_POINTS - 1]);
    }
    roots
}

/// Sentiment values of all equilibria, ascending.
pub fn sentiment_equilibrium_roots(p: &ModelParams) -> Vec<f64> {
    sentiment_roots_with(p, ConditionForm::Derived)
}

pub fn sentiment_roots_with(p: &ModelParams, form: ConditionForm) -> Vec<f64> {
    bracket_roots(condition(p, form))
}

/// `Some((derived_count, unscaled_count))` when the two forms of the
/// condition disagree on the number of equilibria.
pub fn condition_forms_disagree(p: &ModelParams) -> Option<(usize, usize)> {
    let a = sentiment_roots_with(p, ConditionForm::Derived).len();
    let b = sentiment_roots_with(p, ConditionForm::Unscaled).len();
    (a != b).then_some((a, b))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointKind {
    Node,
    Focus,
    Saddle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    Stable,
    Unstable,
    /// An eigenvalue has zero real part; linearisation is inconclusive.
    Marginal,
}

impl fmt::Display for PointKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PointKind::Node => "node",
            PointKind::Focus => "focus",
            PointKind::Saddle => "saddle",
        })
    }
}

impl fmt::Display for Stability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stability::Stable => "stable",
            Stability::Unstable => "unstable",
            Stability::Marginal => "marginal",
        })
    }
}

/// Node: three real eigenvalues of one sign. Focus: a complex pair, stable
/// when every real part is negative. Saddle: real eigenvalues of mixed sign,
/// always unstable.
pub fn classify(eigenvalues: &[Complex<f64>; 3]) -> (PointKind, Stability) {
    let complex = eigenvalues.iter().any(|l| l.im.abs() > COMPLEX_TOL);
    let zero = eigenvalues.iter().any(|l| l.re.abs() <= ZERO_TOL);
    let pos = eigenvalues.iter().filter(|l| l.re > ZERO_TOL).count();
    let neg = eigenvalues.iter().filter(|l| l.re < -ZERO_TOL).count();

    if complex {
        let stability = if pos > 0 {
            Stability::Unstable
        } else if zero {
            Stability::Marginal
        } else {
            Stability::Stable
        };
        return (PointKind::Focus, stability);
    }
    if pos > 0 && neg > 0 {
        return (PointKind::Saddle, Stability::Unstable);
    }
    let stability = if zero {
        Stability::Marginal
    } else if pos == 3 {
        Stability::Unstable
    } else {
        Stability::Stable
    };
    (PointKind::Node, stability)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumPoint {
    pub s: f64,
    pub h: f64,
    pub z: f64,
    /// Per-day eigenvalues, sorted by real then imaginary part.
    pub eigenvalues: [Complex<f64>; 3],
    pub kind: PointKind,
    pub stability: Stability,
    /// Sup norm of the right-hand side at the point.
    pub residual: f64,
}

impl EquilibriumPoint {
    pub fn state(&self) -> ReducedState {
        ReducedState::new(self.s, self.h, self.z)
    }

    pub fn is_stable_focus(&self) -> bool {
        self.kind == PointKind::Focus && self.stability == Stability::Stable
    }
}

fn residual(p: &ModelParams, st: &ReducedState) -> Result<(Vector3<f64>, f64)> {
    let d = rhs_reduced(st, p, 0.0)?;
    Ok((Vector3::new(d.s, d.h, d.z), d.max_abs()))
}

fn newton_refine(p: &ModelParams, guess: ReducedState, root: f64) -> Result<(ReducedState, f64)> {
    let diverged = || Error::NewtonDivergence { root };
    let mut x = guess;
    let (mut f, mut norm) = residual(p, &x).map_err(|_| diverged())?;
    for _ in 0..100 {
        if norm < 1e-16 {
            break;
        }
        let j = jacobian_reduced(&x, p).map_err(|_| diverged())?;
        let Some(delta) = j.lu().solve(&(-f)) else {
            break;
        };
        let mut lambda = 1.0;
        let mut improved = false;
        for _ in 0..40 {
            let trial = ReducedState::new(
                x.s + lambda * delta[0],
                x.h + lambda * delta[1],
                x.z + lambda * delta[2],
            );
            if trial.s.abs() < 1.0 && trial.h.abs() < 1.0 {
                if let Ok((ft, nt)) = residual(p, &trial) {
                    if nt < norm {
                        x = trial;
                        f = ft;
                        norm = nt;
                        improved = true;
                        break;
                    }
                }
            }
            lambda *= 0.5;
        }
        if !improved {
            break;
        }
    }
    if norm < RESIDUAL_TOL {
        Ok((x, norm))
    } else {
        Err(diverged())
    }
}

/// Eigenvalues of a 3x3 matrix, sorted.
pub fn eigenvalues3(m: &nalgebra::Matrix3<f64>) -> [Complex<f64>; 3] {
    let ev = m.complex_eigenvalues();
    let mut out = [ev[0], ev[1], ev[2]];
    out.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    out
}

/// All equilibria, ordered by sentiment.
pub fn equilibria(p: &ModelParams) -> Result<Vec<EquilibriumPoint>> {
    let mut out = Vec::new();
    for root in sentiment_equilibrium_roots(p) {
        let drive = p.rho * p.c2 * root + p.epsilon;
        let ratio = 1.0 + p.tau_y * drive;
        if !(ratio > 0.0) {
            return Err(Error::NewtonDivergence { root });
        }
        let guess = ReducedState::new(root, (p.gamma * drive).tanh(), ratio.ln());
        let (x, res) = newton_refine(p, guess, root)?;
        let j = jacobian_reduced(&x, p)?;
        let eigenvalues = eigenvalues3(&j);
        let (kind, stability) = classify(&eigenvalues);
        out.push(EquilibriumPoint {
            s: x.s,
            h: x.h,
            z: x.z,
            eigenvalues,
            kind,
            stability,
            residual: res,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitCycle {
    /// Mean interval between successive upward crossings (days).
    pub period: f64,
    /// `max |s - mean(s)|` over the analysed half.
    pub amplitude: f64,
    /// `(max - min) / mean` of the crossing intervals.
    pub spread: f64,
    pub cycles: usize,
}

/// Minimum number of crossing intervals required to declare a cycle.
pub const MIN_CYCLES: usize = 5;
/// Maximum relative spread of crossing intervals.
pub const MAX_SPREAD: f64 = 0.01;
const MIN_AMPLITUDE: f64 = 1e-6;

fn upward_crossings(times: &[f64], values: &[f64], level: f64) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 1..values.len() {
        let (a, b) = (values[i - 1] - level, values[i] - level);
        if a < 0.0 && b >= 0.0 {
            let frac = a / (a - b);
            out.push(times[i - 1] + frac * (times[i] - times[i - 1]));
        }
    }
    out
}

/// Integrates without noise from `probe`, drops the first half, and looks for
/// a periodic orbit in the sentiment series.
pub fn detect_limit_cycle(p: &ModelParams, probe: ReducedState, t_end: f64) -> Result<Option<LimitCycle>> {
    let traj = match integrate_deterministic(p, probe, t_end, 1.0, 1) {
        Ok(t) => t,
        Err(Error::NonFiniteState { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    let s_all = traj.sentiment();
    let half = s_all.len() / 2;
    let times = &traj.times[half..];
    let s = &s_all[half..];
    if s.len() < 3 {
        return Ok(None);
    }
    let mean = s.iter().sum::<f64>() / s.len() as f64;
    let level = if s.iter().any(|&v| v < 0.0) && s.iter().any(|&v| v >= 0.0) {
        0.0
    } else {
        mean
    };
    let crossings = upward_crossings(times, s, level);
    if crossings.len() < MIN_CYCLES + 1 {
        return Ok(None);
    }
    let intervals: Vec<f64> = crossings.windows(2).map(|w| w[1] - w[0]).collect();
    let lo = intervals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = intervals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let period = intervals.iter().sum::<f64>() / intervals.len() as f64;
    let spread = (hi - lo) / period;

    // A spiral into a focus also has regular crossings; require the swing of
    // the last cycle to match the first one.
    let swing = |t0: f64, t1: f64| {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (t, v) in times.iter().zip(s) {
            if *t >= t0 && *t <= t1 {
                lo = lo.min(*v);
                hi = hi.max(*v);
            }
        }
        hi - lo
    };
    let n = crossings.len();
    let first = swing(crossings[0], crossings[1]);
    let last = swing(crossings[n - 2], crossings[n - 1]);
    let sustained = first > MIN_AMPLITUDE && ((last - first) / first).abs() < MAX_SPREAD;

    if spread < MAX_SPREAD && sustained {
        let amplitude = s.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
        Ok(Some(LimitCycle {
            period,
            amplitude,
            spread,
            cycles: intervals.len(),
        }))
    } else {
        Ok(None)
    }
}

/// Initial states used to probe for cycles in scans.
pub const STANDARD_PROBES: [ReducedState; 4] = [
    ReducedState { s: 0.5, h: 0.5, z: 0.05 },
    ReducedState { s: -0.5, h: -0.5, z: -0.05 },
    ReducedState { s: 0.05, h: -0.3, z: 0.0 },
    ReducedState { s: -0.8, h: 0.6, z: 0.1 },
];

/// Deterministic horizon used by scans (days).
pub const SCAN_HORIZON: f64 = 250.0 * 2000.0;

/// First cycle found from the standard probes.
pub fn probe_limit_cycle(p: &ModelParams, t_end: f64) -> Result<Option<LimitCycle>> {
    for probe in STANDARD_PROBES {
        if let Some(c) = detect_limit_cycle(p, probe, t_end)? {
            return Ok(Some(c));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BifurcationRecord {
    pub gamma: f64,
    pub c2: f64,
    pub outcome: Result<(Vec<EquilibriumPoint>, Option<LimitCycle>)>,
}

impl BifurcationRecord {
    pub fn equilibria(&self) -> Option<&[EquilibriumPoint]> {
        self.outcome.as_ref().ok().map(|(e, _)| e.as_slice())
    }

    pub fn limit_cycle(&self) -> Option<LimitCycle> {
        self.outcome.as_ref().ok().and_then(|(_, c)| *c)
    }
}

/// Equilibria and cycle detection for every `(gamma, c2)` pair, gamma
/// varying fastest. Points run in parallel; output order is fixed.
pub fn bifurcation_scan(p: &ModelParams, gammas: &[f64], c2s: &[f64]) -> Vec<BifurcationRecord> {
    bifurcation_scan_with(p, gammas, c2s, SCAN_HORIZON)
}

pub fn bifurcation_scan_with(p: &ModelParams, gammas: &[f64], c2s: &[f64], t_end: f64) -> Vec<BifurcationRecord> {
    let grid: Vec<(f64, f64)> = c2s
        .iter()
        .flat_map(|&c2| gammas.iter().map(move |&g| (g, c2)))
        .collect();
    grid.par_iter()
        .map(|&(gamma, c2)| {
            let q = p.with_gamma_c2(gamma, c2);
            let outcome = equilibria(&q).and_then(|e| Ok((e, probe_limit_cycle(&q, t_end)?)));
            BifurcationRecord { gamma, c2, outcome }
        })
        .collect()
}

pub const SCAN_CSV_HEADER: &str =
    "gamma,c2,n_equilibria,kinds,stabilities,cycle_period_days,cycle_amplitude";

pub fn write_scan_csv<W: Write>(records: &[BifurcationRecord], mut out: W) -> io::Result<()> {
    writeln!(out, "{SCAN_CSV_HEADER}")?;
    for r in records {
        match &r.outcome {
            Ok((points, cycle)) => {
                let kinds: Vec<String> = points.iter().map(|e| e.kind.to_string()).collect();
                let stab: Vec<String> = points.iter().map(|e| e.stability.to_string()).collect();
                let (period, amp) = match cycle {
                    Some(c) => (fmt_f64(c.period), fmt_f64(c.amplitude)),
                    None => (String::new(), String::new()),
                };
                writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    fmt_f64(r.gamma),
                    fmt_f64(r.c2),
                    points.len(),
                    kinds.join(";"),
                    stab.join(";"),
                    period,
                    amp
                )?;
            }
            Err(e) => {
                let msg = e.to_string().replace(',', ";");
                writeln!(out, "{},{},,error,{},,", fmt_f64(r.gamma), fmt_f64(r.c2), msg)?;
            }
        }
    }
    Ok(())
}

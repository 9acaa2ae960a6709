//! Time stepping and trajectory recording.
//!
//! Deterministic right-hand sides are advanced with explicit Euler steps. The
//! news noise is held constant over a step and moved forward between steps
//! by the exact OU transition.

use std::io::{self, Write};

use crate::dynamics::{rhs_full, rhs_reduced, FullState, ReducedState};
use crate::equilibria::{self, EquilibriumPoint};
use crate::error::{Error, Result};
use crate::params::{fmt_f64, ModelParams, RegimeMode, SimConfig};
use crate::stochastic::NoiseProcess;

/// Everything needed to rerun a trajectory bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct RunInfo {
    pub params: ModelParams,
    pub sim: SimConfig,
    /// Interval at which the noise was advanced (equal to `dt` unless the
    /// noise was generated on a coarser grid).
    pub noise_dt: f64,
    pub noise_on: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FullColumns {
    pub y: Vec<f64>,
    pub k_s: Vec<f64>,
    pub k_d: Vec<f64>,
    pub k: Vec<f64>,
    pub s: Vec<f64>,
    pub h: Vec<f64>,
    pub xi: Vec<f64>,
    /// `true` where `k_d <= k_s`.
    pub demand_driven: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReducedColumns {
    pub s: Vec<f64>,
    pub h: Vec<f64>,
    pub z: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Columns {
    Full(FullColumns),
    Reduced(ReducedColumns),
}

/// Decimated time series of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub columns: Columns,
    pub info: RunInfo,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn mode(&self) -> RegimeMode {
        self.info.sim.regime_mode
    }

    pub fn full(&self) -> Option<&FullColumns> {
        match &self.columns {
            Columns::Full(c) => Some(c),
            Columns::Reduced(_) => None,
        }
    }

    pub fn reduced(&self) -> Option<&ReducedColumns> {
        match &self.columns {
            Columns::Reduced(c) => Some(c),
            Columns::Full(_) => None,
        }
    }

    pub fn sentiment(&self) -> &[f64] {
        match &self.columns {
            Columns::Full(c) => &c.s,
            Columns::Reduced(c) => &c.s,
        }
    }

    /// Growth indicator `rho k_d + eps t - y`, computed from the recorded
    /// columns in full mode.
    pub fn z(&self) -> Vec<f64> {
        match &self.columns {
            Columns::Reduced(c) => c.z.clone(),
            Columns::Full(c) => {
                let p = &self.info.params;
                self.times
                    .iter()
                    .zip(c.k_d.iter().zip(&c.y))
                    .map(|(t, (kd, y))| p.rho * kd + p.epsilon * t - y)
                    .collect()
            }
        }
    }

    pub fn last_reduced(&self) -> Option<ReducedState> {
        let c = self.reduced()?;
        let i = c.s.len().checked_sub(1)?;
        Some(ReducedState::new(c.s[i], c.h[i], c.z[i]))
    }

    pub fn csv_header(&self) -> &'static str {
        match self.columns {
            Columns::Full(_) => "t,y,k_s,k_d,k,s,h,xi,regime",
            Columns::Reduced(_) => "t,s,h,z",
        }
    }

    /// Writes the CSV export; floats carry 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{}", self.csv_header())?;
        match &self.columns {
            Columns::Full(c) => {
                for (i, t) in self.times.iter().enumerate() {
                    writeln!(
                        out,
                        "{},{},{},{},{},{},{},{},{}",
                        fmt_f64(*t),
                        fmt_f64(c.y[i]),
                        fmt_f64(c.k_s[i]),
                        fmt_f64(c.k_d[i]),
                        fmt_f64(c.k[i]),
                        fmt_f64(c.s[i]),
                        fmt_f64(c.h[i]),
                        fmt_f64(c.xi[i]),
                        if c.demand_driven[i] { "demand" } else { "supply" }
                    )?;
                }
            }
            Columns::Reduced(c) => {
                for (i, t) in self.times.iter().enumerate() {
                    writeln!(
                        out,
                        "{},{},{},{}",
                        fmt_f64(*t),
                        fmt_f64(c.s[i]),
                        fmt_f64(c.h[i]),
                        fmt_f64(c.z[i])
                    )?;
                }
            }
        }
        Ok(())
    }
}

fn should_record(step: u64, cfg: &SimConfig) -> bool {
    step.is_multiple_of(cfg.record_stride) && step as f64 * cfg.dt >= cfg.burn_in
}

fn noise_hold(cfg: &SimConfig, noise_dt: f64) -> Result<u64> {
    let hold = (noise_dt / cfg.dt).round();
    if !(hold >= 1.0) || ((hold * cfg.dt) - noise_dt).abs() > 1e-9 * noise_dt {
        return Err(Error::InvalidConfig {
            field: "noise_dt",
            reason: format!("must be a positive multiple of dt = {}", cfg.dt),
        });
    }
    Ok(hold as u64)
}

/// Integrates the full system in `cfg.regime_mode`. The reduced
/// deterministic mode is delegated to [`simulate_reduced`].
pub fn simulate(p: &ModelParams, cfg: &SimConfig) -> Result<Trajectory> {
    simulate_with_noise_step(p, cfg, cfg.dt)
}

/// As [`simulate`], but the noise is advanced only every `noise_dt` days
/// (a multiple of `dt`) and held in between. Lets runs at different `dt`
/// share one noise path.
pub fn simulate_with_noise_step(p: &ModelParams, cfg: &SimConfig, noise_dt: f64) -> Result<Trajectory> {
    cfg.validate()?;
    if cfg.regime_mode == RegimeMode::ReducedDeterministic {
        return simulate_reduced(p, cfg, false);
    }
    let hold = noise_hold(cfg, noise_dt)?;
    let mode = cfg.regime_mode;
    let n = cfg.steps();
    let init = cfg.initial;
    let mut st = FullState {
        t: 0.0,
        y: init.y0,
        k_s: init.ks0,
        k_d: init.kd0,
        s: init.s0,
        h: init.h0,
        xi: init.xi0,
    };
    let mut noise = NoiseProcess::new(p.tau_xi, p.sigma_xi, init.xi0, cfg.seed);
    let capacity = (n / cfg.record_stride + 1) as usize;
    let mut times = Vec::with_capacity(capacity);
    let mut c = FullColumns::default();

    for step in 0..=n {
        if should_record(step, cfg) {
            let k = match mode {
                RegimeMode::General => st.k_s.min(st.k_d),
                RegimeMode::ForcedSupply => st.k_s,
                _ => st.k_d,
            };
            times.push(st.t);
            c.y.push(st.y);
            c.k_s.push(st.k_s);
            c.k_d.push(st.k_d);
            c.k.push(k);
            c.s.push(st.s);
            c.h.push(st.h);
            c.xi.push(st.xi);
            c.demand_driven.push(st.k_d <= st.k_s);
        }
        if step == n {
            break;
        }
        let d = rhs_full(&st, p, mode).map_err(|e| match e {
            Error::NonFiniteState { t, .. } => Error::NonFiniteState { step, t },
            other => other,
        })?;
        st.y += cfg.dt * d.y;
        st.k_s += cfg.dt * d.k_s;
        st.k_d += cfg.dt * d.k_d;
        st.s += cfg.dt * d.s;
        st.h += cfg.dt * d.h;
        st.t = (step + 1) as f64 * cfg.dt;
        if (step + 1) % hold == 0 {
            st.xi = noise.step(noise_dt);
        }
        if !st.is_finite() {
            return Err(Error::NonFiniteState {
                step: step + 1,
                t: st.t,
            });
        }
    }

    Ok(Trajectory {
        times,
        columns: Columns::Full(c),
        info: RunInfo {
            params: *p,
            sim: *cfg,
            noise_dt,
            noise_on: p.sigma_xi > 0.0,
        },
    })
}

/// Integrates the demand-driven `(s, h, z)` system. With `xi_on = false`
/// the system is autonomous.
pub fn simulate_reduced(p: &ModelParams, cfg: &SimConfig, xi_on: bool) -> Result<Trajectory> {
    cfg.validate()?;
    if !matches!(
        cfg.regime_mode,
        RegimeMode::ForcedDemand | RegimeMode::ReducedDeterministic
    ) {
        return Err(Error::WrongMode {
            expected: "forced_demand or reduced_deterministic",
        });
    }
    let init = cfg.initial;
    let start = ReducedState::new(init.s0, init.h0, init.z0(p));
    let mut sim = *cfg;
    sim.regime_mode = if xi_on {
        RegimeMode::ForcedDemand
    } else {
        RegimeMode::ReducedDeterministic
    };
    integrate_reduced(p, &sim, start, xi_on)
}

fn integrate_reduced(p: &ModelParams, cfg: &SimConfig, start: ReducedState, xi_on: bool) -> Result<Trajectory> {
    let n = cfg.steps();
    let mut st = start;
    let mut xi = if xi_on { cfg.initial.xi0 } else { 0.0 };
    let mut noise = NoiseProcess::new(p.tau_xi, p.sigma_xi, xi, cfg.seed);
    let mut times = Vec::with_capacity((n / cfg.record_stride + 1) as usize);
    let mut c = ReducedColumns::default();

    for step in 0..=n {
        if should_record(step, cfg) {
            times.push(step as f64 * cfg.dt);
            c.s.push(st.s);
            c.h.push(st.h);
            c.z.push(st.z);
        }
        if step == n {
            break;
        }
        let t = step as f64 * cfg.dt;
        let d = rhs_reduced(&st, p, xi).map_err(|_| Error::NonFiniteState { step, t })?;
        st.s += cfg.dt * d.s;
        st.h += cfg.dt * d.h;
        st.z += cfg.dt * d.z;
        if xi_on {
            xi = noise.step(cfg.dt);
        }
        if !st.is_finite() {
            return Err(Error::NonFiniteState {
                step: step + 1,
                t: t + cfg.dt,
            });
        }
    }

    Ok(Trajectory {
        times,
        columns: Columns::Reduced(c),
        info: RunInfo {
            params: *p,
            sim: *cfg,
            noise_dt: cfg.dt,
            noise_on: xi_on && p.sigma_xi > 0.0,
        },
    })
}

/// Noise-free integration of the reduced system from an arbitrary state.
pub fn integrate_deterministic(
    p: &ModelParams,
    start: ReducedState,
    t_end: f64,
    dt: f64,
    stride: u64,
) -> Result<Trajectory> {
    let mut cfg = SimConfig::new(p, RegimeMode::ReducedDeterministic, t_end, 0)
        .with_dt(dt)
        .with_stride(stride);
    cfg.initial.s0 = start.s;
    cfg.initial.h0 = start.h;
    cfg.validate()?;
    integrate_reduced(p, &cfg, start, false)
}

/// Where a phase-portrait trajectory ended up.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttractorLabel {
    /// Index into the equilibrium list.
    Equilibrium(usize),
    Cycle,
    Unresolved,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PortraitTrajectory {
    pub start: ReducedState,
    pub trajectory: Trajectory,
    pub label: AttractorLabel,
}

/// Distance (sup norm in `(s, h, z)`) within which a trajectory counts as
/// having reached an equilibrium.
pub const ATTRACTOR_TOLERANCE: f64 = 1e-3;

/// Deterministic trajectories from each grid point, labelled by their
/// terminal attractor.
pub fn phase_portrait(
    p: &ModelParams,
    grid: &[ReducedState],
    t_end: f64,
) -> Result<(Vec<EquilibriumPoint>, Vec<PortraitTrajectory>)> {
    let points = equilibria::equilibria(p)?;
    let stride = ((t_end / 2000.0).round() as u64).max(1);
    let mut out = Vec::with_capacity(grid.len());
    for start in grid {
        let trajectory = integrate_deterministic(p, *start, t_end, 1.0, stride)?;
        let label = label_terminal(&trajectory, &points);
        out.push(PortraitTrajectory {
            start: *start,
            trajectory,
            label,
        });
    }
    Ok((points, out))
}

fn label_terminal(traj: &Trajectory, points: &[EquilibriumPoint]) -> AttractorLabel {
    let Some(end) = traj.last_reduced() else {
        return AttractorLabel::Unresolved;
    };
    let hit = points.iter().position(|e| {
        (e.s - end.s)
            .abs()
            .max((e.h - end.h).abs())
            .max((e.z - end.z).abs())
            < ATTRACTOR_TOLERANCE
    });
    if let Some(i) = hit {
        return AttractorLabel::Equilibrium(i);
    }
    let c = traj.reduced().expect("reduced trajectory");
    let tail = &c.s[c.s.len() / 2..];
    let bounded = c.z[c.z.len() / 2..].iter().all(|z| z.abs() < 10.0);
    let mean = tail.iter().sum::<f64>() / tail.len() as f64;
    let crossings = tail
        .windows(2)
        .filter(|w| w[0] < mean && w[1] >= mean)
        .count();
    if bounded && crossings >= 2 {
        AttractorLabel::Cycle
    } else {
        AttractorLabel::Unresolved
    }
}

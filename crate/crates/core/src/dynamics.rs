//! Right-hand sides of the full and reduced systems.
//!
//! Full system, per business day:
//!
//! ```text
//! tau_y y'  = exp(rho k + eps t - y) - 1
//!       k_s' = lambda exp(y - k_s) - delta exp(k - k_s)
//! tau_s s'  = -s + tanh(beta1 s + beta2 h)
//!       k_d' = c1 s' + c2 s
//! tau_h h'  = -h + tanh(gamma y' H + xi)
//! ```
//!
//! with `k = min(k_s, k_d)` and `H = 1` when `k_d <= k_s`. The reduced
//! demand-driven system replaces `y` and `k_d` by `z = rho k_d + eps t - y`.

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::params::{ModelParams, RegimeMode};

/// Largest exponent accepted before a state is declared divergent.
pub const EXP_LIMIT: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FullState {
    pub t: f64,
    pub y: f64,
    pub k_s: f64,
    pub k_d: f64,
    pub s: f64,
    pub h: f64,
    pub xi: f64,
}

impl FullState {
    pub fn is_finite(&self) -> bool {
        [self.t, self.y, self.k_s, self.k_d, self.s, self.h, self.xi]
            .iter()
            .all(|v| v.is_finite())
    }

    /// Growth indicator `rho k_d + eps t - y`.
    pub fn z(&self, p: &ModelParams) -> f64 {
        p.rho * self.k_d + p.epsilon * self.t - self.y
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FullDerivatives {
    pub y: f64,
    pub k_s: f64,
    pub k_d: f64,
    pub s: f64,
    pub h: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ReducedState {
    pub s: f64,
    pub h: f64,
    pub z: f64,
}

impl ReducedState {
    pub fn new(s: f64, h: f64, z: f64) -> Self {
        ReducedState { s, h, z }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.s, self.h, self.z]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        ReducedState::new(a[0], a[1], a[2])
    }

    pub fn is_finite(&self) -> bool {
        self.s.is_finite() && self.h.is_finite() && self.z.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedDerivatives {
    pub s: f64,
    pub h: f64,
    pub z: f64,
}

impl ReducedDerivatives {
    pub fn to_array(self) -> [f64; 3] {
        [self.s, self.h, self.z]
    }

    pub fn max_abs(&self) -> f64 {
        self.s.abs().max(self.h.abs()).max(self.z.abs())
    }
}

/// Inelastic market clearing: invested log capital is the smaller of supply and demand.
pub fn clearing(k_s: f64, k_d: f64) -> f64 {
    k_s.min(k_d)
}

/// 1 in the demand-driven regime (`k_d <= k_s`), 0 otherwise.
pub fn feedback_gate(k_s: f64, k_d: f64) -> f64 {
    if k_d <= k_s {
        1.0
    } else {
        0.0
    }
}

fn guarded_exp(x: f64) -> Option<f64> {
    (x <= EXP_LIMIT).then(|| x.exp())
}

/// Sentiment derivative; shared by both systems.
#[inline]
pub fn sentiment_rate(s: f64, h: f64, p: &ModelParams) -> f64 {
    (-s + (p.beta1 * s + p.beta2 * h).tanh()) / p.tau_s
}

/// Time derivatives of the full system. `state.xi` is the noise value held
/// over the current step.
pub fn rhs_full(state: &FullState, p: &ModelParams, mode: RegimeMode) -> Result<FullDerivatives> {
    let diverged = || Error::NonFiniteState {
        step: 0,
        t: state.t,
    };
    if !state.is_finite() {
        return Err(diverged());
    }
    let (k, gate) = match mode {
        RegimeMode::General => (
            clearing(state.k_s, state.k_d),
            feedback_gate(state.k_s, state.k_d),
        ),
        RegimeMode::ForcedSupply => (state.k_s, 0.0),
        RegimeMode::ForcedDemand | RegimeMode::ReducedDeterministic => (state.k_d, 1.0),
    };

    let production = guarded_exp(p.rho * k + p.epsilon * state.t - state.y).ok_or_else(diverged)?;
    let y_dot = (production - 1.0) / p.tau_y;
    let savings = guarded_exp(state.y - state.k_s).ok_or_else(diverged)?;
    let wear = guarded_exp(k - state.k_s).ok_or_else(diverged)?;
    let k_s_dot = p.lambda * savings - p.delta * wear;
    let s_dot = sentiment_rate(state.s, state.h, p);
    let k_d_dot = p.c1 * s_dot + p.c2 * state.s;
    let h_dot = (-state.h + (p.gamma * y_dot * gate + state.xi).tanh()) / p.tau_h;

    Ok(FullDerivatives {
        y: y_dot,
        k_s: k_s_dot,
        k_d: k_d_dot,
        s: s_dot,
        h: h_dot,
    })
}

/// Time derivatives of the reduced `(s, h, z)` system under noise value `xi`.
pub fn rhs_reduced(state: &ReducedState, p: &ModelParams, xi: f64) -> Result<ReducedDerivatives> {
    let diverged = || Error::NonFiniteState { step: 0, t: f64::NAN };
    if !state.is_finite() || !xi.is_finite() {
        return Err(diverged());
    }
    let growth = (guarded_exp(state.z).ok_or_else(diverged)? - 1.0) / p.tau_y;
    let s_dot = sentiment_rate(state.s, state.h, p);
    let z_dot = p.rho * p.c1 * s_dot + p.rho * p.c2 * state.s - growth + p.epsilon;
    let h_dot = (-state.h + (p.gamma * growth + xi).tanh()) / p.tau_h;
    Ok(ReducedDerivatives {
        s: s_dot,
        h: h_dot,
        z: z_dot,
    })
}

/// Analytic Jacobian of the noise-free reduced system; rows are
/// `(s', h', z')`, columns `(s, h, z)`.
pub fn jacobian_reduced(state: &ReducedState, p: &ModelParams) -> Result<Matrix3<f64>> {
    if !state.is_finite() {
        return Err(Error::NonFiniteState { step: 0, t: f64::NAN });
    }
    let ez = guarded_exp(state.z).ok_or(Error::NonFiniteState { step: 0, t: f64::NAN })?;
    let omega = 1.0 / p.tau_y;

    let sech2_s = 1.0 - (p.beta1 * state.s + p.beta2 * state.h).tanh().powi(2);
    let ds_ds = (p.beta1 * sech2_s - 1.0) / p.tau_s;
    let ds_dh = p.beta2 * sech2_s / p.tau_s;

    let sech2_h = 1.0 - (p.gamma * omega * (ez - 1.0)).tanh().powi(2);
    let dh_dh = -1.0 / p.tau_h;
    let dh_dz = sech2_h * p.gamma * omega * ez / p.tau_h;

    let rc1 = p.rho * p.c1;
    Ok(Matrix3::new(
        ds_ds,
        ds_dh,
        0.0,
        0.0,
        dh_dh,
        dh_dz,
        rc1 * ds_ds + p.rho * p.c2,
        rc1 * ds_dh,
        -omega * ez,
    ))
}

/// Closed-form supply-driven output path, valid for `t` of order `tau_y`
/// and beyond; `b` is the integration constant.
pub fn analytic_supply_path(t: f64, p: &ModelParams, b: f64) -> f64 {
    let one_minus_rho = 1.0 - p.rho;
    let scale = (p.lambda / p.delta).powf(p.rho / one_minus_rho);
    let relaxation = (b * (-(one_minus_rho / p.tau_y) * t).exp() + 1.0).powf(1.0 / one_minus_rho);
    let growth = ((p.epsilon / one_minus_rho) * t).exp();
    scale * (relaxation + growth - 1.0)
}

/// Second derivative of capital in the supply-driven regime:
/// `tau_y K'' + (1 + tau_y delta) K' + delta K = lambda K^rho e^(eps t)`.
pub fn supply_ode_rhs(k: f64, k_dot: f64, t: f64, p: &ModelParams) -> Result<f64> {
    if !(k > 0.0) {
        return Err(Error::NonPositiveCapital(k));
    }
    Ok(
        (p.lambda * k.powf(p.rho) * (p.epsilon * t).exp()
            - (1.0 + p.tau_y * p.delta) * k_dot
            - p.delta * k)
            / p.tau_y,
    )
}

/// Output implied by supply-regime capital: `Y = (K' + delta K) / lambda`.
pub fn supply_output(k: f64, k_dot: f64, p: &ModelParams) -> f64 {
    (k_dot + p.delta * k) / p.lambda
}

/// Capital on the approximate supply path (the form whose output is
/// [`analytic_supply_path`] once `K'` is neglected against `delta K`).
pub fn analytic_supply_capital(t: f64, p: &ModelParams, b: f64) -> f64 {
    // K_m / Y_m = lambda / delta
    p.lambda / p.delta * analytic_supply_path(t, p, b)
}

/// Classic RK4 on `(K, K')` for the second-order supply equation, started
/// on the approximate path at `t = 0`. Returns `(t, Y)` every `stride` steps.
pub fn solve_supply_ode(p: &ModelParams, b: f64, t_end: f64, dt: f64, stride: usize) -> Result<Vec<(f64, f64)>> {
    let h = 1e-3 * dt;
    let mut k = analytic_supply_capital(0.0, p, b);
    let mut v = (analytic_supply_capital(h, p, b) - analytic_supply_capital(-h, p, b)) / (2.0 * h);
    let steps = (t_end / dt).round() as usize;
    let mut out = Vec::with_capacity(steps / stride.max(1) + 1);
    out.push((0.0, supply_output(k, v, p)));
    for i in 0..steps {
        let t = i as f64 * dt;
        let f = |t: f64, k: f64, v: f64| -> Result<(f64, f64)> { Ok((v, supply_ode_rhs(k, v, t, p)?)) };
        let (k1, v1) = f(t, k, v)?;
        let (k2, v2) = f(t + 0.5 * dt, k + 0.5 * dt * k1, v + 0.5 * dt * v1)?;
        let (k3, v3) = f(t + 0.5 * dt, k + 0.5 * dt * k2, v + 0.5 * dt * v2)?;
        let (k4, v4) = f(t + dt, k + dt * k3, v + dt * v3)?;
        k += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        v += dt / 6.0 * (v1 + 2.0 * v2 + 2.0 * v3 + v4);
        if (i + 1) % stride.max(1) == 0 {
            out.push(((i + 1) as f64 * dt, supply_output(k, v, p)));
        }
    }
    Ok(out)
}

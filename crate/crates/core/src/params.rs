//! Model constants, simulation settings, and the plain-text configuration format.
//!
//! A configuration document is a list of `key = value` lines. Blank lines and
//! everything after `#` are ignored. Keys not present fall back to the base
//! case. Keys starting with `meta.` are informational (run manifests carry
//! them) and are skipped by the loader.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Business days per year.
pub const DAYS_PER_YEAR: f64 = 250.0;

/// Stationary deviation of news noise driven by unit-intensity white noise,
/// `tau_xi xi' = -xi + tau_xi eta`, with `tau_xi = 5`: `sqrt(tau_xi / 2)`.
pub const UNIT_DIFFUSION_SIGMA: f64 = 1.581_138_830_084_189_8;

/// All constants of the model plus the news-noise settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Capital share in production.
    pub rho: f64,
    /// Technology growth rate per business day.
    pub epsilon: f64,
    /// Production adjustment timescale (days).
    pub tau_y: f64,
    /// Savings rate.
    pub lambda: f64,
    /// Depreciation rate per business day.
    pub delta: f64,
    /// Capital demand sensitivity to the change of sentiment.
    pub c1: f64,
    /// Capital demand sensitivity to the sentiment level (per day).
    pub c2: f64,
    /// Sentiment herding factor.
    pub beta1: f64,
    /// Sentiment sensitivity to information.
    pub beta2: f64,
    /// Feedback strength (days).
    pub gamma: f64,
    pub tau_s: f64,
    pub tau_h: f64,
    pub tau_xi: f64,
    /// Stationary standard deviation of the news noise.
    pub sigma_xi: f64,
}

impl ModelParams {
    /// Base-case values.
    pub const BASE: ModelParams = ModelParams {
        rho: 1.0 / 3.0,
        epsilon: 2.5e-5,
        tau_y: 1000.0,
        lambda: 0.15,
        delta: 2e-4,
        c1: 3.0,
        c2: 7e-4,
        beta1: 1.1,
        beta2: 1.0,
        gamma: 2000.0,
        tau_s: 250.0,
        tau_h: 25.0,
        tau_xi: 5.0,
        sigma_xi: UNIT_DIFFUSION_SIGMA,
    };

    pub fn base() -> Self {
        Self::BASE
    }

    pub fn with_gamma_c2(mut self, gamma: f64, c2: f64) -> Self {
        self.gamma = gamma;
        self.c2 = c2;
        self
    }
}

impl Default for ModelParams {
    fn default() -> Self {
        Self::BASE
    }
}

/// Parameters that passed [`validate`]. Dereferences to [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedParams {
    params: ModelParams,
    warnings: Vec<String>,
}

impl ValidatedParams {
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// Non-fatal findings, e.g. timescale ordering violations.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn into_inner(self) -> ModelParams {
        self.params
    }
}

impl std::ops::Deref for ValidatedParams {
    type Target = ModelParams;

    fn deref(&self) -> &ModelParams {
        &self.params
    }
}

/// Checks hard invariants and collects ordering warnings.
pub fn validate(raw: ModelParams) -> Result<ValidatedParams> {
    for (field, value) in [
        ("tau_y", raw.tau_y),
        ("tau_s", raw.tau_s),
        ("tau_h", raw.tau_h),
        ("tau_xi", raw.tau_xi),
    ] {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::NonPositiveTimescale { field, value });
        }
    }
    for (field, value) in [("rho", raw.rho), ("lambda", raw.lambda)] {
        if !(value > 0.0 && value < 1.0) {
            return Err(Error::ShareOutOfRange { field, value });
        }
    }
    if !(raw.delta > 0.0 && raw.delta.is_finite()) {
        return Err(Error::NegativeRate {
            field: "delta",
            value: raw.delta,
        });
    }
    for (field, value) in [
        ("epsilon", raw.epsilon),
        ("c1", raw.c1),
        ("c2", raw.c2),
        ("beta1", raw.beta1),
        ("beta2", raw.beta2),
        ("gamma", raw.gamma),
        ("sigma_xi", raw.sigma_xi),
    ] {
        if !(value >= 0.0 && value.is_finite()) {
            return Err(Error::NegativeRate { field, value });
        }
    }

    let mut warnings = Vec::new();
    let chain = [
        ("tau_xi", raw.tau_xi),
        ("tau_h", raw.tau_h),
        ("tau_s", raw.tau_s),
        ("tau_y", raw.tau_y),
    ];
    for pair in chain.windows(2) {
        let ((a, va), (b, vb)) = (pair[0], pair[1]);
        if va >= vb {
            warnings.push(format!(
                "timescale ordering violated: {a} = {va} is not below {b} = {vb}"
            ));
        }
    }
    if raw.epsilon > 0.0 && raw.tau_y >= 1.0 / raw.epsilon {
        warnings.push(format!(
            "timescale ordering violated: tau_y = {} is not below 1/epsilon = {}",
            raw.tau_y,
            1.0 / raw.epsilon
        ));
    }

    Ok(ValidatedParams {
        params: raw,
        warnings,
    })
}

/// Quantities that follow from the constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derived {
    /// Classic Solow growth rate `epsilon / (1 - rho)` per day.
    pub r: f64,
    /// `1 / tau_y` per day.
    pub omega_y: f64,
    /// `1 / epsilon` in days; infinite when there is no technology growth.
    pub tech_timescale: f64,
}

pub fn derived_quantities(p: &ValidatedParams) -> Derived {
    Derived {
        r: p.epsilon / (1.0 - p.rho),
        omega_y: 1.0 / p.tau_y,
        tech_timescale: if p.epsilon > 0.0 {
            1.0 / p.epsilon
        } else {
            f64::INFINITY
        },
    }
}

/// Which capital level enters production and how the feedback gate behaves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegimeMode {
    /// `k = min(k_s, k_d)` with the feedback gate active.
    General,
    /// `k = k_s`, feedback switched off.
    ForcedSupply,
    /// `k = k_d`, feedback always on.
    ForcedDemand,
    /// Noise-free reduced `(s, h, z)` system.
    ReducedDeterministic,
}

impl RegimeMode {
    pub const ALL: [RegimeMode; 4] = [
        RegimeMode::General,
        RegimeMode::ForcedSupply,
        RegimeMode::ForcedDemand,
        RegimeMode::ReducedDeterministic,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RegimeMode::General => "general",
            RegimeMode::ForcedSupply => "forced_supply",
            RegimeMode::ForcedDemand => "forced_demand",
            RegimeMode::ReducedDeterministic => "reduced_deterministic",
        }
    }
}

impl fmt::Display for RegimeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RegimeMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "general" => Ok(RegimeMode::General),
            "forced_supply" | "supply" => Ok(RegimeMode::ForcedSupply),
            "forced_demand" | "demand" => Ok(RegimeMode::ForcedDemand),
            "reduced_deterministic" | "reduced" => Ok(RegimeMode::ReducedDeterministic),
            other => Err(format!(
                "unknown regime mode `{other}` (expected general, forced_supply, forced_demand or reduced)"
            )),
        }
    }
}

/// Initial values of log output, log supply, log demand, sentiment,
/// information and noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialState {
    pub y0: f64,
    pub ks0: f64,
    pub kd0: f64,
    pub s0: f64,
    pub h0: f64,
    pub xi0: f64,
}

impl InitialState {
    /// Starts on the Solow balanced path: `K_s = K_d = (lambda/delta)^(1/(1-rho))`,
    /// `y = rho k` so that `z = 0`, and neutral expectations.
    pub fn balanced(p: &ModelParams) -> Self {
        let k = (p.lambda / p.delta).ln() / (1.0 - p.rho);
        InitialState {
            y0: p.rho * k,
            ks0: k,
            kd0: k,
            s0: 0.0,
            h0: 0.0,
            xi0: 0.0,
        }
    }

    /// Unit capital on both sides, `y = rho`, neutral expectations.
    pub fn neutral(p: &ModelParams) -> Self {
        InitialState {
            y0: p.rho,
            ks0: 1.0,
            kd0: 1.0,
            s0: 0.0,
            h0: 0.0,
            xi0: 0.0,
        }
    }

    /// General-mode runs start balanced so that demand does not have to
    /// spend centuries catching up with supply. Forced runs start neutral:
    /// with demand forced, supply capital starting on the balanced path
    /// collapses as soon as `k_d - y` exceeds `ln(lambda / delta)`.
    pub fn default_for(p: &ModelParams, mode: RegimeMode) -> Self {
        match mode {
            RegimeMode::General => Self::balanced(p),
            _ => Self::neutral(p),
        }
    }

    /// Initial growth indicator `z = rho k_d - y` at `t = 0`.
    pub fn z0(&self, p: &ModelParams) -> f64 {
        p.rho * self.kd0 - self.y0
    }
}

/// Horizon, step size, recording and seeding of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub t_end: f64,
    pub dt: f64,
    pub record_stride: u64,
    pub regime_mode: RegimeMode,
    pub initial: InitialState,
    pub seed: u64,
    pub burn_in: f64,
}

impl SimConfig {
    pub fn new(p: &ModelParams, mode: RegimeMode, t_end: f64, seed: u64) -> Self {
        SimConfig {
            t_end,
            dt: 1.0,
            record_stride: 25,
            regime_mode: mode,
            initial: InitialState::default_for(p, mode),
            seed,
            burn_in: 0.0,
        }
    }

    pub fn years(p: &ModelParams, mode: RegimeMode, years: f64, seed: u64) -> Self {
        Self::new(p, mode, years * DAYS_PER_YEAR, seed)
    }

    pub fn with_burn_in(mut self, burn_in: f64) -> Self {
        self.burn_in = burn_in;
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_stride(mut self, stride: u64) -> Self {
        self.record_stride = stride;
        self
    }

    pub fn with_initial(mut self, initial: InitialState) -> Self {
        self.initial = initial;
        self
    }

    pub fn steps(&self) -> u64 {
        (self.t_end / self.dt).round() as u64
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field, reason: &str| {
            Err(Error::InvalidConfig {
                field,
                reason: reason.to_string(),
            })
        };
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt", "must be positive");
        }
        if !(self.t_end >= self.dt && self.t_end.is_finite()) {
            return bad("t_end", "must be at least dt");
        }
        if self.record_stride < 1 {
            return bad("record_stride", "must be at least 1");
        }
        if !(self.burn_in >= 0.0 && self.burn_in < self.t_end) {
            return bad("burn_in", "must be non-negative and below t_end");
        }
        let i = &self.initial;
        if !(i.s0 > -1.0 && i.s0 < 1.0) {
            return bad("initial_s", "must lie in (-1, 1)");
        }
        if !(i.h0 > -1.0 && i.h0 < 1.0) {
            return bad("initial_h", "must lie in (-1, 1)");
        }
        for (field, v) in [
            ("initial_y", i.y0),
            ("initial_ks", i.ks0),
            ("initial_kd", i.kd0),
            ("initial_xi", i.xi0),
        ] {
            if !v.is_finite() {
                return bad(field, "must be finite");
            }
        }
        Ok(())
    }
}

/// Result of [`load_config`].
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedConfig {
    pub params: ValidatedParams,
    pub sim: SimConfig,
    /// Keys that were set explicitly, in document order.
    pub overrides: Vec<String>,
}

const PARAM_KEYS: [&str; 14] = [
    "rho", "epsilon", "tau_y", "lambda", "delta", "c1", "c2", "beta1", "beta2", "gamma", "tau_s",
    "tau_h", "tau_xi", "sigma_xi",
];

fn param_slot<'a>(p: &'a mut ModelParams, key: &str) -> Option<&'a mut f64> {
    Some(match key {
        "rho" => &mut p.rho,
        "epsilon" => &mut p.epsilon,
        "tau_y" => &mut p.tau_y,
        "lambda" => &mut p.lambda,
        "delta" => &mut p.delta,
        "c1" => &mut p.c1,
        "c2" => &mut p.c2,
        "beta1" => &mut p.beta1,
        "beta2" => &mut p.beta2,
        "gamma" => &mut p.gamma,
        "tau_s" => &mut p.tau_s,
        "tau_h" => &mut p.tau_h,
        "tau_xi" => &mut p.tau_xi,
        "sigma_xi" => &mut p.sigma_xi,
        _ => return None,
    })
}

/// Sets one named model parameter; used by parameter sweeps.
pub fn set_param(p: &mut ModelParams, key: &str, value: f64) -> Option<()> {
    *param_slot(p, key)? = value;
    Some(())
}

pub fn is_param_key(key: &str) -> bool {
    PARAM_KEYS.contains(&key)
}

/// Parses a configuration document; see the module docs for the format.
pub fn load_config(text: &str) -> Result<LoadedConfig> {
    let mut params = ModelParams::BASE;
    let mut overrides = Vec::new();
    let mut t_end = 400.0 * DAYS_PER_YEAR;
    let mut dt = 1.0;
    let mut stride = 25u64;
    let mut mode = RegimeMode::General;
    let mut seed = 0u64;
    let mut burn_in = 0.0;
    let mut init: [Option<f64>; 6] = [None; 6];

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::MalformedValue {
                line: line_no,
                key: line.to_string(),
                reason: "expected `key = value`".into(),
            });
        };
        let (key, value) = (key.trim(), value.trim());
        if key.starts_with("meta.") {
            continue;
        }
        let malformed = |reason: String| Error::MalformedValue {
            line: line_no,
            key: key.to_string(),
            reason,
        };
        let float = || value.parse::<f64>().map_err(|e| malformed(e.to_string()));
        let integer = || value.parse::<u64>().map_err(|e| malformed(e.to_string()));

        if let Some(slot) = param_slot(&mut params, key) {
            *slot = float()?;
        } else {
            match key {
                "t_end" => t_end = float()?,
                "dt" => dt = float()?,
                "record_stride" => stride = integer()?,
                "seed" => seed = integer()?,
                "burn_in" => burn_in = float()?,
                "regime_mode" => mode = value.parse().map_err(malformed)?,
                "initial_y" => init[0] = Some(float()?),
                "initial_ks" => init[1] = Some(float()?),
                "initial_kd" => init[2] = Some(float()?),
                "initial_s" => init[3] = Some(float()?),
                "initial_h" => init[4] = Some(float()?),
                "initial_xi" => init[5] = Some(float()?),
                _ => {
                    return Err(Error::UnknownKey {
                        line: line_no,
                        key: key.to_string(),
                    })
                }
            }
        }
        overrides.push(key.to_string());
    }

    let params = validate(params)?;
    let base_init = InitialState::default_for(&params, mode);
    let initial = InitialState {
        y0: init[0].unwrap_or(base_init.y0),
        ks0: init[1].unwrap_or(base_init.ks0),
        kd0: init[2].unwrap_or(base_init.kd0),
        s0: init[3].unwrap_or(base_init.s0),
        h0: init[4].unwrap_or(base_init.h0),
        xi0: init[5].unwrap_or(base_init.xi0),
    };
    let sim = SimConfig {
        t_end,
        dt,
        record_stride: stride,
        regime_mode: mode,
        initial,
        seed,
        burn_in,
    };
    sim.validate()?;
    Ok(LoadedConfig {
        params,
        sim,
        overrides,
    })
}

/// Formats a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes every key explicitly; [`load_config`] reads the result back to the
/// same values.
pub fn to_config_text(p: &ModelParams, sim: &SimConfig) -> String {
    let mut out = String::new();
    let mut put = |k: &str, v: String| {
        out.push_str(k);
        out.push_str(" = ");
        out.push_str(&v);
        out.push('\n');
    };
    let mut copy = *p;
    for key in PARAM_KEYS {
        let v = *param_slot(&mut copy, key).expect("known key");
        put(key, fmt_f64(v));
    }
    put("t_end", fmt_f64(sim.t_end));
    put("dt", fmt_f64(sim.dt));
    put("record_stride", sim.record_stride.to_string());
    put("regime_mode", sim.regime_mode.to_string());
    put("seed", sim.seed.to_string());
    put("burn_in", fmt_f64(sim.burn_in));
    let i = &sim.initial;
    put("initial_y", fmt_f64(i.y0));
    put("initial_ks", fmt_f64(i.ks0));
    put("initial_kd", fmt_f64(i.kd0));
    put("initial_s", fmt_f64(i.s0));
    put("initial_h", fmt_f64(i.h0));
    put("initial_xi", fmt_f64(i.xi0));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn unit_diffusion_sigma_closed_form() {
        assert_eq!(UNIT_DIFFUSION_SIGMA, (ModelParams::BASE.tau_xi / 2.0).sqrt());
        assert_eq!(ModelParams::BASE.sigma_xi, UNIT_DIFFUSION_SIGMA);
    }

    #[test]
    fn base_case_is_accepted_without_warnings() {
        let v = validate(ModelParams::BASE).unwrap();
        assert!(v.warnings().is_empty(), "{:?}", v.warnings());
    }

    #[test]
    fn capital_share_above_one_is_rejected() {
        let p = ModelParams {
            rho: 1.5,
            ..ModelParams::BASE
        };
        assert_eq!(
            validate(p),
            Err(Error::ShareOutOfRange {
                field: "rho",
                value: 1.5
            })
        );
    }

    #[test]
    fn ordering_violation_only_warns() {
        let p = ModelParams {
            tau_h: 300.0,
            tau_s: 250.0,
            ..ModelParams::BASE
        };
        let v = validate(p).unwrap();
        assert_eq!(v.warnings().len(), 1);
        assert!(v.warnings()[0].contains("tau_h"));
    }

    #[test]
    fn hard_errors_name_the_field() {
        let p = ModelParams {
            tau_xi: 0.0,
            ..ModelParams::BASE
        };
        assert!(matches!(
            validate(p),
            Err(Error::NonPositiveTimescale { field: "tau_xi", .. })
        ));
        let p = ModelParams {
            delta: -1.0,
            ..ModelParams::BASE
        };
        assert!(matches!(
            validate(p),
            Err(Error::NegativeRate { field: "delta", .. })
        ));
        let p = ModelParams {
            epsilon: -1e-5,
            ..ModelParams::BASE
        };
        assert!(matches!(
            validate(p),
            Err(Error::NegativeRate { field: "epsilon", .. })
        ));
    }

    #[test]
    fn derived_values_match_base_table() {
        let d = derived_quantities(&validate(ModelParams::BASE).unwrap());
        assert!((d.r - 3.75e-5).abs() < 1e-18);
        assert!((d.omega_y - 1e-3).abs() < 1e-18);
        assert!((d.tech_timescale - 4e4).abs() < 1e-9);

        let p = ModelParams {
            epsilon: 0.0,
            ..ModelParams::BASE
        };
        let d = derived_quantities(&validate(p).unwrap());
        assert_eq!(d.r, 0.0);
        assert!(d.tech_timescale.is_infinite());
    }

    #[test]
    fn empty_document_gives_base_case() {
        let loaded = load_config("").unwrap();
        assert_eq!(*loaded.params.params(), ModelParams::BASE);
        assert!(loaded.overrides.is_empty());
        assert_eq!(loaded.sim.regime_mode, RegimeMode::General);
    }

    #[test]
    fn overrides_are_applied_and_recorded() {
        let loaded = load_config("# limit cycle\ngamma = 4000\nc2=1e-4   # low\n").unwrap();
        assert_eq!(loaded.params.gamma, 4000.0);
        assert_eq!(loaded.params.c2, 1e-4);
        assert_eq!(loaded.params.rho, ModelParams::BASE.rho);
        assert_eq!(loaded.overrides, vec!["gamma", "c2"]);
    }

    #[test]
    fn unknown_and_malformed_keys_fail() {
        assert_eq!(
            load_config("foo=1"),
            Err(Error::UnknownKey {
                line: 1,
                key: "foo".into()
            })
        );
        assert!(matches!(
            load_config("\nrho = abc"),
            Err(Error::MalformedValue { line: 2, .. })
        ));
        assert!(matches!(
            load_config("rho 0.3"),
            Err(Error::MalformedValue { line: 1, .. })
        ));
        assert!(matches!(
            load_config("rho = 1.5"),
            Err(Error::ShareOutOfRange { .. })
        ));
        assert!(matches!(
            load_config("regime_mode = sideways"),
            Err(Error::MalformedValue { .. })
        ));
    }

    #[test]
    fn meta_keys_are_skipped() {
        let loaded = load_config("meta.code_version = 0.1.0\nseed = 9").unwrap();
        assert_eq!(loaded.sim.seed, 9);
    }

    #[test]
    fn sim_config_bounds() {
        let p = ModelParams::BASE;
        let ok = SimConfig::new(&p, RegimeMode::General, 100.0, 1);
        assert!(ok.validate().is_ok());
        assert!(ok.with_dt(0.0).validate().is_err());
        assert!(ok.with_stride(0).validate().is_err());
        assert!(ok.with_burn_in(100.0).validate().is_err());
        let mut bad = ok;
        bad.initial.s0 = 1.0;
        assert!(bad.validate().is_err());
    }

    fn arb_params() -> impl Strategy<Value = ModelParams> {
        (
            0.01f64..0.99,
            0.0f64..1e-3,
            1.0f64..1e4,
            0.01f64..0.99,
            1e-6f64..1.0,
            (0.0f64..10.0, 0.0f64..1e-2, 0.0f64..3.0, 0.0f64..3.0),
            0.0f64..1e5,
            (0.1f64..1e3, 0.1f64..1e3, 0.1f64..1e3, 0.0f64..3.0),
        )
            .prop_map(
                |(rho, epsilon, tau_y, lambda, delta, (c1, c2, beta1, beta2), gamma, t)| {
                    ModelParams {
                        rho,
                        epsilon,
                        tau_y,
                        lambda,
                        delta,
                        c1,
                        c2,
                        beta1,
                        beta2,
                        gamma,
                        tau_s: t.0,
                        tau_h: t.1,
                        tau_xi: t.2,
                        sigma_xi: t.3,
                    }
                },
            )
    }

    proptest! {
        #[test]
        fn config_text_round_trips(p in arb_params(), seed in any::<u64>(), stride in 1u64..1000) {
            let sim = SimConfig::new(&p, RegimeMode::ForcedDemand, 5000.0, seed).with_stride(stride);
            let text = to_config_text(&p, &sim);
            let loaded = load_config(&text).unwrap();
            prop_assert_eq!(*loaded.params.params(), p);
            prop_assert_eq!(loaded.sim, sim);
        }

        #[test]
        fn solow_rate_increases_in_epsilon_and_rho(
            eps in 1e-7f64..1e-3, d_eps in 1e-8f64..1e-4,
            rho in 0.01f64..0.9, d_rho in 1e-3f64..0.09,
        ) {
            let r = |epsilon, rho| derived_quantities(&validate(ModelParams { epsilon, rho, ..ModelParams::BASE }).unwrap()).r;
            prop_assert!(r(eps + d_eps, rho) > r(eps, rho));
            prop_assert!(r(eps, rho + d_rho) > r(eps, rho));
        }
    }
}

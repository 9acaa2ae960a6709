//! Growth rates, detrending, cycle statistics and smoothing of trajectories.

use std::fmt::Write as _;
use std::io::{self, Write};

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::integrator::{simulate, Trajectory};
use crate::params::{fmt_f64, ModelParams, RegimeMode, SimConfig, DAYS_PER_YEAR};

/// Minimum number of samples for fits and averages.
pub const MIN_SAMPLES: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthEstimate {
    pub variable: String,
    /// Per-day rate.
    pub slope: f64,
    pub intercept: f64,
    /// Fit window in days.
    pub window: (f64, f64),
    pub residual_rms: f64,
}

fn ols(t: &[f64], v: &[f64]) -> (f64, f64) {
    let n = t.len() as f64;
    let tm = t.iter().sum::<f64>() / n;
    let vm = v.iter().sum::<f64>() / n;
    let (mut stt, mut stv) = (0.0, 0.0);
    for (a, b) in t.iter().zip(v) {
        stt += (a - tm) * (a - tm);
        stv += (a - tm) * (b - vm);
    }
    let slope = if stt > 0.0 { stv / stt } else { 0.0 };
    (slope, vm - slope * tm)
}

/// Least-squares line through the samples with `t` in `window` (inclusive).
pub fn growth_rate(variable: &str, times: &[f64], values: &[f64], window: (f64, f64)) -> Result<GrowthEstimate> {
    let (t, v): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(values)
        .filter(|(t, _)| **t >= window.0 && **t <= window.1)
        .map(|(t, v)| (*t, *v))
        .unzip();
    if t.len() < MIN_SAMPLES {
        return Err(Error::WindowTooSmall {
            got: t.len(),
            need: MIN_SAMPLES,
        });
    }
    let (slope, intercept) = ols(&t, &v);
    let ss: f64 = t.iter().zip(&v).map(|(t, v)| (v - slope * t - intercept).powi(2)).sum();
    Ok(GrowthEstimate {
        variable: variable.to_string(),
        slope,
        intercept,
        window,
        residual_rms: (ss / t.len() as f64).sqrt(),
    })
}

/// Residuals about the full-sample least-squares line.
pub fn detrend(times: &[f64], values: &[f64]) -> Result<Vec<f64>> {
    if times.len() < MIN_SAMPLES {
        return Err(Error::WindowTooSmall {
            got: times.len(),
            need: MIN_SAMPLES,
        });
    }
    let (slope, intercept) = ols(times, values);
    Ok(times.iter().zip(values).map(|(t, v)| v - slope * t - intercept).collect())
}

/// Linearly interpolated times where the series goes from negative to
/// non-negative.
pub fn upward_crossings(times: &[f64], values: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 1..values.len().min(times.len()) {
        let (a, b) = (values[i - 1], values[i]);
        if a < 0.0 && b >= 0.0 {
            let frac = a / (a - b);
            out.push(times[i - 1] + frac * (times[i] - times[i - 1]));
        }
    }
    out
}

/// Intervals (days) between successive upward zero crossings.
pub fn cycle_durations(times: &[f64], values: &[f64]) -> Result<Vec<f64>> {
    let c = upward_crossings(times, values);
    if c.len() < 2 {
        return Err(Error::InsufficientCrossings(c.len()));
    }
    Ok(c.windows(2).map(|w| w[1] - w[0]).collect())
}

pub const HIST_MIN_YEARS: f64 = 10.0;
pub const HIST_MAX_YEARS: f64 = 150.0;
pub const HIST_BIN_YEARS: f64 = 5.0;
/// Band whose share of binned durations is reported.
pub const BAND_YEARS: (f64, f64) = (40.0, 70.0);

#[derive(Debug, Clone, PartialEq)]
pub struct DurationHistogram {
    /// Bin edges in years; `counts[i]` covers `[edges[i], edges[i + 1])`.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    /// Every duration seen, binned or not.
    pub total: usize,
    pub binned: usize,
    pub modal_bin: Option<(f64, f64)>,
    /// Share of binned durations in [40, 70) years.
    pub band_fraction: f64,
}

impl DurationHistogram {
    pub fn modal_in_band(&self) -> bool {
        self.modal_bin
            .is_some_and(|(lo, hi)| lo >= BAND_YEARS.0 && hi <= BAND_YEARS.1)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "bin_start_years,bin_end_years,count")?;
        for (i, c) in self.counts.iter().enumerate() {
            writeln!(out, "{},{},{}", fmt_f64(self.edges[i]), fmt_f64(self.edges[i + 1]), c)?;
        }
        Ok(())
    }
}

/// 5-year bins over [10, 150] years. Ties for the mode go to the shorter bin.
pub fn duration_histogram(durations_days: &[f64]) -> DurationHistogram {
    let nbins = ((HIST_MAX_YEARS - HIST_MIN_YEARS) / HIST_BIN_YEARS).round() as usize;
    let edges: Vec<f64> = (0..=nbins)
        .map(|i| HIST_MIN_YEARS + i as f64 * HIST_BIN_YEARS)
        .collect();
    let mut counts = vec![0u64; nbins];
    let mut in_band = 0usize;
    let mut binned = 0usize;
    for &d in durations_days {
        let years = d / DAYS_PER_YEAR;
        if !(HIST_MIN_YEARS..=HIST_MAX_YEARS).contains(&years) {
            continue;
        }
        let idx = (((years - HIST_MIN_YEARS) / HIST_BIN_YEARS).floor() as usize).min(nbins - 1);
        counts[idx] += 1;
        binned += 1;
        if years >= BAND_YEARS.0 && years < BAND_YEARS.1 {
            in_band += 1;
        }
    }
    let mut modal_bin = None;
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > best {
            best = c;
            modal_bin = Some((edges[i], edges[i + 1]));
        }
    }
    DurationHistogram {
        edges,
        counts,
        total: durations_days.len(),
        binned,
        modal_bin,
        band_fraction: if binned > 0 {
            in_band as f64 / binned as f64
        } else {
            0.0
        },
    }
}

/// Time-weighted share of samples with `k_d <= k_s`; each sample owns half
/// of the interval to each neighbour.
pub fn regime_fraction(traj: &Trajectory) -> Result<f64> {
    let cols = match (traj.mode(), traj.full()) {
        (RegimeMode::General, Some(c)) => c,
        _ => return Err(Error::WrongMode { expected: "general" }),
    };
    let t = &traj.times;
    let n = t.len();
    if n == 0 {
        return Err(Error::WindowTooSmall { got: 0, need: 1 });
    }
    if n == 1 {
        return Ok(if cols.demand_driven[0] { 1.0 } else { 0.0 });
    }
    let (mut demand, mut total) = (0.0, 0.0);
    for i in 0..n {
        let left = if i > 0 { t[i] - t[i - 1] } else { 0.0 };
        let right = if i + 1 < n { t[i + 1] - t[i] } else { 0.0 };
        let w = 0.5 * (left + right);
        total += w;
        if cols.demand_driven[i] {
            demand += w;
        }
    }
    Ok(demand / total)
}

/// Average sentiment over samples with `t >= burn_in`.
pub fn mean_sentiment(traj: &Trajectory, burn_in: f64) -> Result<f64> {
    let s: Vec<f64> = traj
        .times
        .iter()
        .zip(traj.sentiment())
        .filter(|(t, _)| **t >= burn_in)
        .map(|(_, s)| *s)
        .collect();
    if s.len() < MIN_SAMPLES {
        return Err(Error::WindowTooSmall {
            got: s.len(),
            need: MIN_SAMPLES,
        });
    }
    Ok(s.iter().sum::<f64>() / s.len() as f64)
}

/// Removes every Fourier component with period shorter than `cutoff_period`
/// (days). The series is mirrored before the transform so the ends do not
/// wrap into each other.
pub fn fourier_lowpass(times: &[f64], values: &[f64], cutoff_period: f64) -> Result<Vec<f64>> {
    let n = values.len();
    if n < 2 {
        return Ok(values.to_vec());
    }
    let dt = times[1] - times[0];
    let tol = 1e-9 * dt.abs().max(1e-300);
    if !(dt > 0.0) || times.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > tol) {
        return Err(Error::NonUniformSampling);
    }
    let m = 2 * n;
    let mut buf: Vec<Complex<f64>> = values
        .iter()
        .chain(values.iter().rev())
        .map(|&v| Complex::new(v, 0.0))
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(m).process(&mut buf);
    let span = m as f64 * dt;
    for (k, c) in buf.iter_mut().enumerate() {
        let harmonic = k.min(m - k);
        if harmonic > 0 && span / (harmonic as f64) < cutoff_period {
            *c = Complex::new(0.0, 0.0);
        }
    }
    planner.plan_fft_inverse(m).process(&mut buf);
    Ok(buf[..n].iter().map(|c| c.re / m as f64).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticReport {
    pub mode: RegimeMode,
    pub horizon_years: f64,
    pub seed: u64,
    pub burn_in: f64,
    pub solow_rate: f64,
    pub y: GrowthEstimate,
    pub k_s: GrowthEstimate,
    pub k_d: GrowthEstimate,
    pub mean_sentiment: f64,
    /// `y0 - (R + rho (k_d0 - R))` in demand mode, `y0 - R` otherwise.
    pub relation_residual: f64,
    /// `y0 - k_s0`.
    pub supply_gap: f64,
}

impl AsymptoticReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k}: {v}");
        };
        kv("mode", self.mode.to_string());
        kv("horizon_years", fmt_f64(self.horizon_years));
        kv("seed", self.seed.to_string());
        kv("burn_in_days", fmt_f64(self.burn_in));
        kv("window_start_days", fmt_f64(self.y.window.0));
        kv("window_end_days", fmt_f64(self.y.window.1));
        kv("solow_rate", fmt_f64(self.solow_rate));
        for g in [&self.y, &self.k_s, &self.k_d] {
            kv(&format!("slope_{}", g.variable), fmt_f64(g.slope));
            kv(&format!("residual_rms_{}", g.variable), fmt_f64(g.residual_rms));
        }
        kv("fitted_minus_solow_y", fmt_f64(self.y.slope - self.solow_rate));
        kv("mean_sentiment", fmt_f64(self.mean_sentiment));
        kv("relation_residual", fmt_f64(self.relation_residual));
        kv("supply_gap", fmt_f64(self.supply_gap));
        s
    }
}

/// Growth rates over the second half of a run.
pub fn analyze_trajectory(p: &ModelParams, traj: &Trajectory) -> Result<AsymptoticReport> {
    let cols = traj.full().ok_or(Error::WrongMode {
        expected: "general, forced_supply or forced_demand",
    })?;
    let info = &traj.info;
    let t_end = info.sim.t_end;
    let window = (0.5 * t_end, t_end);
    let y = growth_rate("y", &traj.times, &cols.y, window)?;
    let k_s = growth_rate("k_s", &traj.times, &cols.k_s, window)?;
    let k_d = growth_rate("k_d", &traj.times, &cols.k_d, window)?;
    let r = p.epsilon / (1.0 - p.rho);
    let relation_residual = match info.sim.regime_mode {
        RegimeMode::ForcedDemand => y.slope - (r + p.rho * (k_d.slope - r)),
        _ => y.slope - r,
    };
    Ok(AsymptoticReport {
        mode: info.sim.regime_mode,
        horizon_years: t_end / DAYS_PER_YEAR,
        seed: info.sim.seed,
        burn_in: info.sim.burn_in,
        solow_rate: r,
        mean_sentiment: mean_sentiment(traj, window.0)?,
        supply_gap: y.slope - k_s.slope,
        relation_residual,
        y,
        k_s,
        k_d,
    })
}

/// Runs `simulate` and reports growth over the last half of the horizon.
pub fn asymptotic_report(p: &ModelParams, mode: RegimeMode, horizon_years: f64, seed: u64) -> Result<AsymptoticReport> {
    if !(horizon_years >= 200.0) {
        return Err(Error::InvalidConfig {
            field: "horizon_years",
            reason: "must be at least 200".into(),
        });
    }
    let cfg = SimConfig::years(p, mode, horizon_years, seed);
    let traj = simulate(p, &cfg)?;
    analyze_trajectory(p, &traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::{Columns, FullColumns, RunInfo};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn grid(n: usize, dt: f64) -> Vec<f64> {
        (0..n).map(|i| i as f64 * dt).collect()
    }

    fn rms(x: &[f64]) -> f64 {
        (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
    }

    #[test]
    fn exact_line_slope() {
        let r = 3.75e-5;
        let t = grid(1000, 1.0);
        let v: Vec<f64> = t.iter().map(|t| r * t).collect();
        let g = growth_rate("y", &t, &v, (0.0, 1e9)).unwrap();
        assert!((g.slope - r).abs() < 1e-18);
        assert!(g.residual_rms < 1e-15);
    }

    #[test]
    fn short_window_rejected() {
        let t = grid(1000, 1.0);
        let err = growth_rate("y", &t, &t, (0.0, 50.0)).unwrap_err();
        assert_eq!(err, Error::WindowTooSmall { got: 51, need: 100 });
    }

    #[test]
    fn detrend_line_and_sine() {
        let t = grid(5000, 1.0);
        let line: Vec<f64> = t.iter().map(|t| 2.0 + 0.01 * t).collect();
        assert!(detrend(&t, &line).unwrap().iter().all(|r| r.abs() < 1e-9));
        // Whole number of periods: the sine is orthogonal to any line only
        // approximately, so compare against the sine's own detrended form.
        let sine: Vec<f64> = t.iter().map(|t| (2.0 * PI * t / 500.0).sin()).collect();
        let both: Vec<f64> = line.iter().zip(&sine).map(|(a, b)| a + b).collect();
        let ds = detrend(&t, &sine).unwrap();
        let db = detrend(&t, &both).unwrap();
        for (a, b) in ds.iter().zip(&db) {
            assert!((a - b).abs() < 1e-9);
        }
        let mean = db.iter().sum::<f64>() / db.len() as f64;
        assert!(mean.abs() < 1e-12);
    }

    #[test]
    fn durations_of_sine() {
        let period = 137.0;
        let t = grid(5000, 0.5);
        let v: Vec<f64> = t.iter().map(|t| (2.0 * PI * t / period).sin()).collect();
        let d = cycle_durations(&t, &v).unwrap();
        assert!(d.len() > 10);
        assert!(d.iter().all(|d| (d - period).abs() < 1e-3));
    }

    #[test]
    fn constant_sign_has_no_cycles() {
        let t = grid(200, 1.0);
        let v = vec![1.0; 200];
        assert_eq!(cycle_durations(&t, &v), Err(Error::InsufficientCrossings(0)));
    }

    #[test]
    fn point_mass_histogram() {
        let h = duration_histogram(&[50.0 * DAYS_PER_YEAR; 7]);
        assert_eq!(h.total, 7);
        assert_eq!(h.binned, 7);
        assert_eq!(h.modal_bin, Some((50.0, 55.0)));
        assert_eq!(h.band_fraction, 1.0);
        assert_eq!(h.counts.iter().filter(|&&c| c > 0).count(), 1);
        assert!(h.modal_in_band());
    }

    #[test]
    fn out_of_range_durations_counted_not_binned() {
        let h = duration_histogram(&[5.0 * 250.0, 200.0 * 250.0, 12.0 * 250.0]);
        assert_eq!(h.total, 3);
        assert_eq!(h.binned, 1);
        assert_eq!(h.modal_bin, Some((10.0, 15.0)));
        assert_eq!(h.band_fraction, 0.0);
        assert_eq!(h.edges.len(), 29);
    }

    fn general_traj(flags: Vec<bool>) -> Trajectory {
        let n = flags.len();
        let zeros = vec![0.0; n];
        Trajectory {
            times: grid(n, 1.0),
            columns: Columns::Full(FullColumns {
                y: zeros.clone(),
                k_s: zeros.clone(),
                k_d: zeros.clone(),
                k: zeros.clone(),
                s: zeros.clone(),
                h: zeros.clone(),
                xi: zeros,
                demand_driven: flags,
            }),
            info: RunInfo {
                params: ModelParams::BASE,
                sim: SimConfig::new(&ModelParams::BASE, RegimeMode::General, n as f64, 0),
                noise_dt: 1.0,
                noise_on: true,
            },
        }
    }

    #[test]
    fn regime_fraction_cases() {
        assert_eq!(regime_fraction(&general_traj(vec![true; 10])).unwrap(), 1.0);
        let halves: Vec<bool> = (0..10).map(|i| i < 5).collect();
        assert!((regime_fraction(&general_traj(halves)).unwrap() - 0.5).abs() < 1e-15);
        let mut t = general_traj(vec![true; 10]);
        t.info.sim.regime_mode = RegimeMode::ForcedSupply;
        assert!(matches!(regime_fraction(&t), Err(Error::WrongMode { .. })));
    }

    /// Cosine centred on the mirror axis `t = -1/2`; periodic on the
    /// mirrored grid whenever `2 n` is a multiple of the period.
    fn aligned_cos(t: f64, period: f64) -> f64 {
        (2.0 * PI * (t + 0.5) / period).cos()
    }

    #[test]
    fn lowpass_constant_and_short_sine() {
        let t = grid(4000, 1.0);
        let c = vec![3.5; 4000];
        let out = fourier_lowpass(&t, &c, 500.0).unwrap();
        assert!(out.iter().all(|v| (v - 3.5).abs() < 1e-12));

        let s: Vec<f64> = t.iter().map(|&t| aligned_cos(t, 100.0)).collect();
        let out = fourier_lowpass(&t, &s, 500.0).unwrap();
        assert!(rms(&out) < 0.01 * rms(&s), "{}", rms(&out) / rms(&s));
    }

    #[test]
    fn lowpass_keeps_long_component() {
        let t = grid(10_000, 1.0);
        let slow: Vec<f64> = t.iter().map(|&t| aligned_cos(t, 1000.0)).collect();
        let mixed: Vec<f64> = t
            .iter()
            .zip(&slow)
            .map(|(&t, s)| s + 0.7 * aligned_cos(t, 100.0))
            .collect();
        let out = fourier_lowpass(&t, &mixed, 500.0).unwrap();
        let err: Vec<f64> = out.iter().zip(&slow).map(|(a, b)| a - b).collect();
        assert!(rms(&err) < 0.02 * rms(&slow), "{}", rms(&err) / rms(&slow));
    }

    #[test]
    fn lowpass_edge_leakage_is_bounded() {
        // Arbitrary phase: the mirror leaves a slope kink at each end, and
        // the leakage stays within a few cutoff periods of the ends.
        let t = grid(50_000, 1.0);
        let s: Vec<f64> = t.iter().map(|t| (2.0 * PI * t / 100.0 + 0.3).sin()).collect();
        let out = fourier_lowpass(&t, &s, 500.0).unwrap();
        assert!(rms(&out) < 0.02 * rms(&s), "{}", rms(&out) / rms(&s));
        let interior = &out[5000..45_000];
        assert!(rms(interior) < 0.01 * rms(&s));
    }

    #[test]
    fn lowpass_rejects_irregular_grid() {
        let t = vec![0.0, 1.0, 2.5, 3.0];
        assert_eq!(
            fourier_lowpass(&t, &[0.0; 4], 10.0),
            Err(Error::NonUniformSampling)
        );
    }

    #[test]
    fn short_horizon_rejected() {
        assert!(matches!(
            asymptotic_report(&ModelParams::BASE, RegimeMode::ForcedSupply, 100.0, 1),
            Err(Error::InvalidConfig { .. })
        ));
    }

    proptest! {
        #[test]
        fn detrend_is_idempotent(
            a in -5.0f64..5.0, b in -1e-3f64..1e-3, amp in 0.0f64..2.0, per in 50.0f64..900.0,
        ) {
            let t = grid(400, 1.0);
            let v: Vec<f64> = t.iter().map(|t| a + b * t + amp * (t / per).sin()).collect();
            let once = detrend(&t, &v).unwrap();
            let twice = detrend(&t, &once).unwrap();
            for (x, y) in once.iter().zip(&twice) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }

        #[test]
        fn lowpass_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, seed in 0u64..1000) {
            let t = grid(512, 1.0);
            let x: Vec<f64> = t.iter().map(|t| ((t + seed as f64) * 0.37).sin()).collect();
            let y: Vec<f64> = t.iter().map(|t| (t * 0.013).cos() + (seed as f64) * 1e-3).collect();
            let comb: Vec<f64> = x.iter().zip(&y).map(|(x, y)| a * x + b * y).collect();
            let fx = fourier_lowpass(&t, &x, 40.0).unwrap();
            let fy = fourier_lowpass(&t, &y, 40.0).unwrap();
            let fc = fourier_lowpass(&t, &comb, 40.0).unwrap();
            for i in 0..t.len() {
                prop_assert!((fc[i] - (a * fx[i] + b * fy[i])).abs() < 1e-9);
            }
        }
    }
}

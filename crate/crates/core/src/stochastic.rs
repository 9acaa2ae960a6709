//! News noise and the agent-level sentiment ensemble.
//!
//! Every run owns one master seed. Noise draws and micro-ensemble draws come
//! from disjoint ChaCha streams of that seed, so the order in which the two
//! are consumed never changes either sequence.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};

use crate::error::{Error, Result};

pub const NOISE_STREAM: u64 = 1;
pub const MICRO_STREAM: u64 = 2;

/// Deterministic generator for one substream of a master seed.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// SplitMix64 finaliser. Used to derive per-grid-point seeds so that adding
/// grid points leaves existing streams untouched.
pub fn mix_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Ornstein-Uhlenbeck news noise with stationary law `N(0, sigma^2)` and
/// autocorrelation `exp(-lag / tau_xi)`.
#[derive(Debug, Clone)]
pub struct NoiseProcess {
    xi: f64,
    tau_xi: f64,
    sigma: f64,
    rng: ChaCha8Rng,
    cached: Option<(f64, f64, f64)>,
}

impl NoiseProcess {
    pub fn new(tau_xi: f64, sigma: f64, xi0: f64, seed: u64) -> Self {
        NoiseProcess {
            xi: xi0,
            tau_xi,
            sigma,
            rng: substream(seed, NOISE_STREAM),
            cached: None,
        }
    }

    pub fn value(&self) -> f64 {
        self.xi
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Exact transition over `dt`:
    /// `xi' = xi e^(-dt/tau) + sigma sqrt(1 - e^(-2 dt/tau)) eta`.
    pub fn step(&mut self, dt: f64) -> f64 {
        let (decay, spread) = match self.cached {
            Some((cdt, decay, spread)) if cdt == dt => (decay, spread),
            _ => {
                let decay = (-dt / self.tau_xi).exp();
                let spread = self.sigma * (1.0 - decay * decay).sqrt();
                self.cached = Some((dt, decay, spread));
                (decay, spread)
            }
        };
        let eta: f64 = self.rng.sample(StandardNormal);
        self.xi = self.xi * decay + spread * eta;
        self.xi
    }
}

/// Per-day flip rates `(pessimist -> optimist, optimist -> pessimist)` under
/// peer-influence force `f_s`. They always sum to `1 / tau`.
pub fn micro_transition_rates(f_s: f64, tau: f64, alpha: f64) -> (f64, f64) {
    let up = 1.0 / (tau * (1.0 + (-alpha * f_s).exp()));
    let down = 1.0 / (tau * (1.0 + (alpha * f_s).exp()));
    (up, down)
}

/// Default opinion sensitivity; with `alpha / 2 = 1` the ensemble mean obeys
/// `tau s' = -s + tanh(F_s)`.
pub const DEFAULT_ALPHA: f64 = 2.0;

/// Finite population of managers holding opinions `+1` or `-1`. Agents are
/// exchangeable, so only the optimist count is stored.
#[derive(Debug, Clone)]
pub struct MicroEnsemble {
    n: u64,
    n_plus: u64,
    tau: f64,
    alpha: f64,
    rng: ChaCha8Rng,
}

impl MicroEnsemble {
    /// `n` agents with aggregate sentiment as close to `s0` as `n` allows.
    pub fn new(n: usize, s0: f64, tau: f64, alpha: f64, seed: u64) -> Self {
        let n_plus = ((n as f64) * (1.0 + s0.clamp(-1.0, 1.0)) / 2.0).round() as u64;
        MicroEnsemble {
            n: n as u64,
            n_plus,
            tau,
            alpha,
            rng: substream(seed, MICRO_STREAM),
        }
    }

    pub fn len(&self) -> usize {
        self.n as usize
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Aggregate sentiment `(N+ - N-) / N`.
    pub fn sentiment(&self) -> f64 {
        let n = self.n as f64;
        (2.0 * self.n_plus as f64 - n) / n
    }

    /// Each agent flips independently with probability `rate * dt`; the
    /// flip counts in each group are binomial.
    pub fn step(&mut self, f_s: f64, dt: f64) -> Result<()> {
        let (up, down) = micro_transition_rates(f_s, self.tau, self.alpha);
        let worst = dt * up.max(down);
        if worst >= 1.0 {
            return Err(Error::StepTooLarge(worst));
        }
        let n_minus = self.n - self.n_plus;
        let to_plus = self.draw(n_minus, up * dt);
        let to_minus = self.draw(self.n_plus, down * dt);
        self.n_plus = self.n_plus + to_plus - to_minus;
        Ok(())
    }

    fn draw(&mut self, n: u64, prob: f64) -> u64 {
        match Binomial::new(n, prob) {
            Ok(b) => b.sample(&mut self.rng),
            Err(_) => 0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_process_decays() {
        let mut p = NoiseProcess::new(5.0, 0.0, 2.0, 7);
        let x = p.step(1.0);
        assert!((x - 2.0 * (-0.2f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn one_step_moments_from_zero() {
        // Var = sigma^2 (1 - e^(-2 dt / tau)) starting from 0.
        let (tau, sigma, dt) = (5.0, 1.3, 1.0);
        let n = 200_000;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        let mut p = NoiseProcess::new(tau, sigma, 0.0, 11);
        for _ in 0..n {
            p.xi = 0.0;
            let x = p.step(dt);
            sum += x;
            sum2 += x * x;
        }
        let mean = sum / n as f64;
        let var = sum2 / n as f64 - mean * mean;
        let expected = sigma * sigma * (1.0 - (-2.0 * dt / tau).exp());
        assert!(mean.abs() < 4.0 * (expected / n as f64).sqrt());
        assert!((var / expected - 1.0).abs() < 0.02);
    }

    #[test]
    fn same_seed_same_path() {
        let mut a = NoiseProcess::new(5.0, 1.0, 0.0, 42);
        let mut b = NoiseProcess::new(5.0, 1.0, 0.0, 42);
        let mut c = NoiseProcess::new(5.0, 1.0, 0.0, 43);
        let pa: Vec<f64> = (0..100).map(|_| a.step(1.0)).collect();
        let pb: Vec<f64> = (0..100).map(|_| b.step(1.0)).collect();
        let pc: Vec<f64> = (0..100).map(|_| c.step(1.0)).collect();
        assert_eq!(pa, pb);
        assert_ne!(pa, pc);
    }

    #[test]
    fn substreams_are_disjoint() {
        let mut a = substream(5, NOISE_STREAM);
        let mut b = substream(5, MICRO_STREAM);
        let xa: u64 = a.random();
        let xb: u64 = b.random();
        assert_ne!(xa, xb);
    }

    #[test]
    fn seed_mixing_is_stable_and_spreads() {
        assert_eq!(mix_seed(1, 0), mix_seed(1, 0));
        assert_ne!(mix_seed(1, 0), mix_seed(1, 1));
        assert_ne!(mix_seed(1, 0), mix_seed(2, 0));
    }

    #[test]
    fn transition_rates() {
        let (up, down) = micro_transition_rates(0.0, 250.0, 2.0);
        assert_eq!(up, down);
        assert!((up - 1.0 / 500.0).abs() < 1e-18);
        let (up, down) = micro_transition_rates(0.4, 250.0, 2.0);
        assert!(up > down);
        for f in [-3.0, -0.2, 0.0, 0.9, 5.0] {
            let (up, down) = micro_transition_rates(f, 250.0, 2.0);
            assert!(((up + down) * 250.0 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ensemble_init_and_step_guard() {
        let mut e = MicroEnsemble::new(1000, 0.5, 250.0, 2.0, 1);
        assert!((e.sentiment() - 0.5).abs() < 1e-12);
        assert!(matches!(e.step(0.0, 600.0), Err(Error::StepTooLarge(_))));
        e.step(0.0, 1.0).unwrap();
        let s = e.sentiment();
        assert!((-1.0..=1.0).contains(&s));
    }

    #[test]
    fn symmetric_rates_average_to_zero() {
        let (n, tau, dt) = (100_000, 250.0, 5.0);
        let mut e = MicroEnsemble::new(n, 0.0, tau, 2.0, 3);
        let steps = 2000;
        let mut samples = Vec::with_capacity(steps);
        for _ in 0..steps {
            e.step(0.0, dt).unwrap();
            samples.push(e.sentiment());
        }
        let mean = samples.iter().sum::<f64>() / steps as f64;
        // Stationary variance 1/N, correlation time tau.
        let se = (1.0 / n as f64 * 2.0 * tau / (steps as f64 * dt)).sqrt();
        assert!(mean.abs() < 3.0 * se, "mean {mean} se {se}");
    }
}

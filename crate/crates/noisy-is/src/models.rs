//! Target densities, integrand functions, and noise models.
//!
//! A noise model describes how evaluating an unnormalized target `p(x)`
//! really behaves: instead of `p(x)` we get a strictly positive random
//! realization with mean `m(x)` and variance `s(x)^2`. The four concrete
//! models here cover the usual mechanisms (acceptance-style Bernoulli
//! thinning, additive Gaussian error folded to stay positive, multiplicative
//! lognormal error, and the lognormal limit of averaging `R` auxiliary
//! estimates inside a latent-variable likelihood).

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::Rng;
use rand_chacha::rand_core::RngCore;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Positive floor substituted for an exact zero realization. Weights stay
/// well-defined and the moment error is far below measurement precision.
pub const DELTA_POS: f64 = 1e-300;

/// Unnormalized one-dimensional target density on a finite interval.
#[derive(Clone)]
pub struct TargetFunction {
    eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    support: (f64, f64),
}

impl TargetFunction {
    pub fn new(
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
        support: (f64, f64),
    ) -> Result<Self> {
        let (lo, hi) = support;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Models(format!(
                "target support [{lo}, {hi}] must be a finite interval with lo < hi"
            )));
        }
        Ok(Self {
            eval: Arc::new(eval),
            support,
        })
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }
}

impl std::fmt::Debug for TargetFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TargetFunction")
            .field("support", &self.support)
            .finish_non_exhaustive()
    }
}

/// Vector-valued integrand `f(x)` with a fixed output length.
pub struct VectorFunction {
    eval: Box<dyn Fn(f64) -> Vec<f64> + Send + Sync>,
    dim: usize,
}

impl VectorFunction {
    pub fn new(dim: usize, eval: impl Fn(f64) -> Vec<f64> + Send + Sync + 'static) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Models("integrand dimension must be >= 1".into()));
        }
        Ok(Self {
            eval: Box::new(eval),
            dim,
        })
    }

    /// Convenience constructor for the common scalar case.
    pub fn scalar(eval: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            eval: Box::new(move |x| vec![eval(x)]),
            dim: 1,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, x: f64) -> Vec<f64> {
        let out = (self.eval)(x);
        assert_eq!(
            out.len(),
            self.dim,
            "integrand returned {} components, declared {}",
            out.len(),
            self.dim
        );
        out
    }

    /// Evaluates component `p` only.
    pub fn eval_component(&self, x: f64, p: usize) -> f64 {
        self.eval(x)[p]
    }
}

impl std::fmt::Debug for VectorFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VectorFunction")
            .field("dim", &self.dim)
            .finish_non_exhaustive()
    }
}

/// Weighted samples {x_n, w_n} from one importance sampling run, tagged with
/// the proposal that produced them and the stream seed that replays them.
#[derive(Clone, Debug)]
pub struct WeightedEnsemble {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub proposal_id: String,
    pub seed: u64,
}

/// A noisy evaluation mechanism for a target density.
///
/// `mean` and `variance` are the exact first two moments of `draw` at a fixed
/// point. Draws are strictly positive; the Bernoulli model substitutes
/// [`DELTA_POS`] for its zero outcome and counts how often that happened.
pub trait NoiseModel: Send + Sync {
    /// Mean function `m(x)` of the noisy realization.
    fn mean(&self, x: f64) -> f64;

    /// Variance function `s(x)^2` of the noisy realization.
    fn variance(&self, x: f64) -> f64;

    /// One realization at `x`, using the caller's RNG stream.
    fn draw(&self, x: f64, rng: &mut dyn RngCore) -> Result<f64>;
}

/// Draws `p_max` with probability `p(x)/p_max`, else the positive floor.
pub struct BernoulliNoise {
    target: TargetFunction,
    p_max: f64,
    floor_hits: AtomicU64,
}

/// Builds the Bernoulli (acceptance-style) noise model.
///
/// `p_max` must dominate the target on its support; the bound is checked at
/// every draw since the target is an arbitrary closure.
pub fn make_bernoulli_noise(target: TargetFunction, p_max: f64) -> Result<BernoulliNoise> {
    if !(p_max > 0.0) || !p_max.is_finite() {
        return Err(Error::Models(format!("p_max = {p_max} must be > 0")));
    }
    Ok(BernoulliNoise {
        target,
        p_max,
        floor_hits: AtomicU64::new(0),
    })
}

impl BernoulliNoise {
    fn checked_p(&self, x: f64) -> Result<f64> {
        let p = self.target.eval(x);
        if !(0.0..=self.p_max).contains(&p) {
            return Err(Error::Models(format!(
                "target value p({x}) = {p} outside [0, p_max = {}]",
                self.p_max
            )));
        }
        Ok(p)
    }

    /// Number of draws that returned the positive floor instead of zero.
    pub fn floor_hits(&self) -> u64 {
        self.floor_hits.load(Ordering::Relaxed)
    }
}

impl NoiseModel for BernoulliNoise {
    fn mean(&self, x: f64) -> f64 {
        self.target.eval(x)
    }

    fn variance(&self, x: f64) -> f64 {
        let p = self.target.eval(x);
        p * (self.p_max - p)
    }

    fn draw(&self, x: f64, rng: &mut dyn RngCore) -> Result<f64> {
        let p = self.checked_p(x)?;
        if rng.random::<f64>() < p / self.p_max {
            Ok(self.p_max)
        } else {
            self.floor_hits.fetch_add(1, Ordering::Relaxed);
            Ok(DELTA_POS)
        }
    }
}

/// Realizations `|p(x) + e|` with `e ~ Normal(0, sigma^2)`.
pub struct FoldedGaussianNoise {
    target: TargetFunction,
    sigma: f64,
}

pub fn make_folded_gaussian_noise(target: TargetFunction, sigma: f64) -> Result<FoldedGaussianNoise> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::Models(format!("sigma = {sigma} must be > 0")));
    }
    Ok(FoldedGaussianNoise { target, sigma })
}

/// Standard normal CDF.
fn phi_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

impl NoiseModel for FoldedGaussianNoise {
    fn mean(&self, x: f64) -> f64 {
        let p = self.target.eval(x);
        let s = self.sigma;
        s * (2.0 / std::f64::consts::PI).sqrt() * (-p * p / (2.0 * s * s)).exp()
            + p * (1.0 - 2.0 * phi_cdf(-p / s))
    }

    fn variance(&self, x: f64) -> f64 {
        let p = self.target.eval(x);
        let m = self.mean(x);
        p * p + self.sigma * self.sigma - m * m
    }

    fn draw(&self, x: f64, rng: &mut dyn RngCore) -> Result<f64> {
        let p = self.target.eval(x);
        if p < 0.0 {
            return Err(Error::Models(format!("target value p({x}) = {p} < 0")));
        }
        let z: f64 = rng.sample(StandardNormal);
        let v = (p + self.sigma * z).abs();
        // |p + e| is zero only on a null set, but keep the positivity contract
        Ok(if v > 0.0 { v } else { DELTA_POS })
    }
}

/// Realizations `p(x) * exp(e)` with `e ~ Normal(-sigma(x)^2/2, sigma(x)^2)`,
/// so the mean is exactly `p(x)`.
pub struct MultiplicativeLogNormalNoise {
    target: TargetFunction,
    sigma_fn: Box<dyn Fn(f64) -> f64 + Send + Sync>,
}

pub fn make_multiplicative_lognormal_noise(
    target: TargetFunction,
    sigma_fn: impl Fn(f64) -> f64 + Send + Sync + 'static,
) -> MultiplicativeLogNormalNoise {
    MultiplicativeLogNormalNoise {
        target,
        sigma_fn: Box::new(sigma_fn),
    }
}

impl MultiplicativeLogNormalNoise {
    fn checked_sigma(&self, x: f64) -> Result<f64> {
        let s = (self.sigma_fn)(x);
        if !s.is_finite() || s < 0.0 {
            return Err(Error::Models(format!("sigma({x}) = {s} must be finite and >= 0")));
        }
        Ok(s)
    }
}

impl NoiseModel for MultiplicativeLogNormalNoise {
    fn mean(&self, x: f64) -> f64 {
        self.target.eval(x)
    }

    fn variance(&self, x: f64) -> f64 {
        let p = self.target.eval(x);
        let s = (self.sigma_fn)(x);
        if s < 0.0 || !s.is_finite() {
            return f64::NAN; // surfaces as a named-node quadrature error
        }
        p * p * (s * s).exp_m1()
    }

    fn draw(&self, x: f64, rng: &mut dyn RngCore) -> Result<f64> {
        let p = self.target.eval(x);
        if p < 0.0 {
            return Err(Error::Models(format!("target value p({x}) = {p} < 0")));
        }
        let s = self.checked_sigma(x)?;
        let z: f64 = rng.sample(StandardNormal);
        // sigma = 0 reduces to an exact evaluation while consuming the same
        // number of random values, which keeps paired runs aligned
        let v = p * (-0.5 * s * s + s * z).exp();
        Ok(if v > 0.0 { v } else { DELTA_POS })
    }
}

/// Lognormal realizations with mean exactly `p(x)`: the large-data limit of a
/// likelihood estimated from `R` auxiliary samples per evaluation.
pub struct LatentVariableNoise {
    target: TargetFunction,
    gamma_sq_fn: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    r: u32,
}

pub fn make_latent_variable_noise(
    target: TargetFunction,
    gamma_sq_fn: impl Fn(f64) -> f64 + Send + Sync + 'static,
    r: u32,
) -> Result<LatentVariableNoise> {
    if r < 1 {
        return Err(Error::Models("auxiliary sample count R must be >= 1".into()));
    }
    Ok(LatentVariableNoise {
        target,
        gamma_sq_fn: Box::new(gamma_sq_fn),
        r,
    })
}

impl LatentVariableNoise {
    fn checked_gamma_sq(&self, x: f64) -> Result<f64> {
        let g = (self.gamma_sq_fn)(x);
        if !g.is_finite() || g < 0.0 {
            return Err(Error::Models(format!(
                "gamma_sq({x}) = {g} must be finite and >= 0"
            )));
        }
        Ok(g)
    }
}

impl NoiseModel for LatentVariableNoise {
    fn mean(&self, x: f64) -> f64 {
        self.target.eval(x)
    }

    fn variance(&self, x: f64) -> f64 {
        let p = self.target.eval(x);
        if p == 0.0 {
            // degenerate zero distribution in the p -> 0 limit
            return 0.0;
        }
        let g = (self.gamma_sq_fn)(x);
        if !g.is_finite() || g < 0.0 {
            return f64::NAN;
        }
        (g / self.r as f64).exp_m1() * p * p
    }

    fn draw(&self, x: f64, rng: &mut dyn RngCore) -> Result<f64> {
        let p = self.target.eval(x);
        if p < 0.0 {
            return Err(Error::Models(format!("target value p({x}) = {p} < 0")));
        }
        let g = self.checked_gamma_sq(x)?;
        let z: f64 = rng.sample(StandardNormal);
        if p == 0.0 {
            // log p is undefined; the limiting distribution is a point mass
            // at zero, floored to keep draws positive
            return Ok(DELTA_POS);
        }
        let var = g / self.r as f64;
        // LogNormal(log p - var/2, var), i.e. mean exactly p
        let v = p * (-0.5 * var + var.sqrt() * z).exp();
        Ok(if v > 0.0 { v } else { DELTA_POS })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use approx::assert_relative_eq;

    fn unit_uniform_target() -> TargetFunction {
        TargetFunction::new(|_| 1.0, (0.0, 1.0)).unwrap()
    }

    struct McMoments {
        mean: f64,
        var: f64,
        se_mean: f64,
        se_var: f64,
    }

    /// Sample mean and variance of `n` draws, with standard errors estimated
    /// from the sample itself (fourth moment for the variance).
    fn mc_moments(model: &dyn NoiseModel, x: f64, n: usize, seed: u64) -> McMoments {
        let mut rng = RngStream::from_seed(seed);
        let draws: Vec<f64> = (0..n).map(|_| model.draw(x, &mut rng).unwrap()).collect();
        let nf = n as f64;
        let mean = draws.iter().sum::<f64>() / nf;
        let var = draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0);
        let mu4 = draws.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / nf;
        let se_var = ((mu4 - var * var * (nf - 3.0) / (nf - 1.0)).max(0.0) / nf).sqrt();
        McMoments {
            mean,
            var,
            se_mean: (var / nf).sqrt(),
            se_var,
        }
    }

    #[test]
    fn bernoulli_rejects_bad_p_max() {
        assert!(make_bernoulli_noise(unit_uniform_target(), 0.0).is_err());
        assert!(make_bernoulli_noise(unit_uniform_target(), -1.0).is_err());
    }

    #[test]
    fn bernoulli_rejects_target_above_bound() {
        let t = TargetFunction::new(|_| 2.0, (0.0, 1.0)).unwrap();
        let noise = make_bernoulli_noise(t, 1.0).unwrap();
        let mut rng = RngStream::from_seed(0);
        assert!(noise.draw(0.5, &mut rng).is_err());
    }

    #[test]
    fn bernoulli_moments_degenerate_and_midpoint() {
        let t = TargetFunction::new(|x| if x < 0.5 { 1.0 } else { 0.5 }, (0.0, 1.0)).unwrap();
        let noise = make_bernoulli_noise(t, 1.0).unwrap();
        // p = p_max: a sure draw
        assert_eq!(noise.mean(0.1), 1.0);
        assert_eq!(noise.variance(0.1), 0.0);
        // p = 0.5, p_max = 1
        assert_eq!(noise.mean(0.9), 0.5);
        assert_eq!(noise.variance(0.9), 0.25);
    }

    #[test]
    fn bernoulli_monte_carlo_moments() {
        let t = TargetFunction::new(|_| 0.2, (0.0, 1.0)).unwrap();
        let noise = make_bernoulli_noise(t, 1.0).unwrap();
        let m = mc_moments(&noise, 0.5, 1_000_000, 11);
        // exact moments 0.2 and 0.16; allow 3 standard errors
        assert!((m.mean - 0.2).abs() < 3.0 * m.se_mean, "mean {}", m.mean);
        assert!((m.var - 0.16).abs() < 3.0 * m.se_var, "var {}", m.var);
        assert!(noise.floor_hits() > 0);
    }

    #[test]
    fn bernoulli_draws_stay_positive() {
        let t = TargetFunction::new(|_| 0.01, (0.0, 1.0)).unwrap();
        let noise = make_bernoulli_noise(t, 1.0).unwrap();
        let mut rng = RngStream::from_seed(3);
        for _ in 0..1000 {
            assert!(noise.draw(0.5, &mut rng).unwrap() > 0.0);
        }
    }

    #[test]
    fn folded_gaussian_rejects_bad_sigma() {
        assert!(make_folded_gaussian_noise(unit_uniform_target(), 0.0).is_err());
        assert!(make_folded_gaussian_noise(unit_uniform_target(), -0.1).is_err());
    }

    #[test]
    fn folded_gaussian_half_normal_case() {
        // p = 0 reduces to a half normal: mean sqrt(2/pi), variance 1 - 2/pi
        let t = TargetFunction::new(|_| 0.0, (0.0, 1.0)).unwrap();
        let noise = make_folded_gaussian_noise(t, 1.0).unwrap();
        assert_relative_eq!(
            noise.mean(0.5),
            (2.0 / std::f64::consts::PI).sqrt(),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            noise.variance(0.5),
            1.0 - 2.0 / std::f64::consts::PI,
            max_relative = 1e-12
        );
    }

    #[test]
    fn folded_gaussian_negligible_folding() {
        // p >> sigma: folding is invisible, moments are (p, sigma^2)
        let t = TargetFunction::new(|_| 10.0, (0.0, 1.0)).unwrap();
        let noise = make_folded_gaussian_noise(t, 0.01).unwrap();
        assert_relative_eq!(noise.mean(0.5), 10.0, max_relative = 1e-12);
        assert_relative_eq!(noise.variance(0.5), 1e-4, max_relative = 1e-9);
    }

    #[test]
    fn folded_gaussian_second_moment_identity() {
        // m^2 + s^2 = p^2 + sigma^2 exactly, for any p
        for &p in &[0.0, 0.3, 1.0, 2.5] {
            let t = TargetFunction::new(move |_| p, (0.0, 1.0)).unwrap();
            let noise = make_folded_gaussian_noise(t, 0.7).unwrap();
            let m = noise.mean(0.5);
            let s2 = noise.variance(0.5);
            assert_relative_eq!(m * m + s2, p * p + 0.49, max_relative = 1e-12);
        }
    }

    #[test]
    fn folded_gaussian_monte_carlo_moments() {
        let t = TargetFunction::new(|_| 1.0, (0.0, 1.0)).unwrap();
        let noise = make_folded_gaussian_noise(t, 1.0).unwrap();
        let want_mean = noise.mean(0.5);
        let want_var = noise.variance(0.5);
        let m = mc_moments(&noise, 0.5, 1_000_000, 13);
        assert!(
            (m.mean - want_mean).abs() < 3.0 * m.se_mean,
            "mean {} vs {want_mean}",
            m.mean
        );
        assert!(
            (m.var - want_var).abs() < 3.0 * m.se_var,
            "var {} vs {want_var}",
            m.var
        );
    }

    #[test]
    fn multiplicative_zero_sigma_is_exact() {
        let t = TargetFunction::new(|x| 1.0 + x, (0.0, 1.0)).unwrap();
        let noise = make_multiplicative_lognormal_noise(t, |_| 0.0);
        let mut rng = RngStream::from_seed(5);
        assert_eq!(noise.draw(0.25, &mut rng).unwrap(), 1.25);
        assert_eq!(noise.mean(0.25), 1.25);
        assert_eq!(noise.variance(0.25), 0.0);
    }

    #[test]
    fn multiplicative_log_amplitude_variance() {
        // uniform target on [a, b] with sigma(x) = A |log x|:
        // variance is (exp(A^2 log^2 x) - 1) / (b - a)^2
        let (a, b) = (0.1, 10.0);
        let t = TargetFunction::new(move |_| 1.0 / (b - a), (a, b)).unwrap();
        let amp = 0.6;
        let noise = make_multiplicative_lognormal_noise(t, move |x: f64| amp * x.ln().abs());
        for &x in &[0.1f64, 0.5, 2.0, 10.0] {
            let s2 = amp * amp * x.ln().powi(2);
            let want = s2.exp_m1() / ((b - a) * (b - a));
            assert_relative_eq!(noise.variance(x), want, max_relative = 1e-12);
        }
        // the noise vanishes where log x = 0
        assert_eq!(noise.variance(1.0), 0.0);
    }

    #[test]
    fn multiplicative_rejects_negative_sigma() {
        let noise = make_multiplicative_lognormal_noise(unit_uniform_target(), |_| -1.0);
        let mut rng = RngStream::from_seed(0);
        assert!(noise.draw(0.5, &mut rng).is_err());
        assert!(noise.variance(0.5).is_nan());
    }

    #[test]
    fn multiplicative_monte_carlo_moments() {
        let t = TargetFunction::new(|_| 2.0, (0.0, 1.0)).unwrap();
        let noise = make_multiplicative_lognormal_noise(t, |_| 0.8);
        let want_var = noise.variance(0.5);
        let m = mc_moments(&noise, 0.5, 1_000_000, 17);
        assert!((m.mean - 2.0).abs() < 3.0 * m.se_mean, "mean {}", m.mean);
        assert!(
            (m.var - want_var).abs() < 3.0 * m.se_var,
            "var {} vs {want_var}",
            m.var
        );
    }

    #[test]
    fn latent_variable_validation() {
        assert!(make_latent_variable_noise(unit_uniform_target(), |_| 1.0, 0).is_err());
        assert!(make_latent_variable_noise(unit_uniform_target(), |_| 1.0, 1).is_ok());
    }

    #[test]
    fn latent_variable_small_noise_limit() {
        // large R: variance ~ gamma^2 p^2 / R
        let t = TargetFunction::new(|_| 3.0, (0.0, 1.0)).unwrap();
        let noise = make_latent_variable_noise(t, |_| 1.0, 1_000_000).unwrap();
        assert_relative_eq!(noise.variance(0.5), 9.0 / 1e6, max_relative = 1e-6);
    }

    #[test]
    fn latent_variable_doubling_level() {
        // gamma^2 = R ln 2 makes the variance exactly p^2
        let t = TargetFunction::new(|_| 1.5, (0.0, 1.0)).unwrap();
        let noise = make_latent_variable_noise(t, |_| 4.0 * std::f64::consts::LN_2, 4).unwrap();
        assert_relative_eq!(noise.variance(0.5), 1.5 * 1.5, max_relative = 1e-12);
    }

    #[test]
    fn latent_variable_zero_target() {
        let t = TargetFunction::new(|_| 0.0, (0.0, 1.0)).unwrap();
        let noise = make_latent_variable_noise(t, |_| 1.0, 1).unwrap();
        let mut rng = RngStream::from_seed(0);
        assert_eq!(noise.draw(0.5, &mut rng).unwrap(), DELTA_POS);
        assert_eq!(noise.mean(0.5), 0.0);
        assert_eq!(noise.variance(0.5), 0.0);
    }

    #[test]
    fn latent_variable_monte_carlo_mean() {
        let t = TargetFunction::new(|_| 2.0, (0.0, 1.0)).unwrap();
        let noise = make_latent_variable_noise(t, |_| 1.0, 1).unwrap();
        let m = mc_moments(&noise, 0.5, 1_000_000, 19);
        assert!((m.mean - 2.0).abs() < 3.0 * m.se_mean, "mean {}", m.mean);
    }

    #[test]
    fn vector_function_checks_dimension() {
        let f = VectorFunction::new(2, |x| vec![1.0, x]).unwrap();
        assert_eq!(f.dim(), 2);
        assert_eq!(f.eval(3.0), vec![1.0, 3.0]);
        assert_eq!(f.eval_component(3.0, 1), 3.0);
        assert!(VectorFunction::new(0, |_| vec![]).is_err());
    }

    #[test]
    #[should_panic(expected = "integrand returned")]
    fn vector_function_length_mismatch_panics() {
        let f = VectorFunction::new(2, |x| vec![x]).unwrap();
        let _ = f.eval(1.0);
    }
}

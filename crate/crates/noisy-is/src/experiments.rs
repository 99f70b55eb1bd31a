//! End-to-end variance-ratio experiments on two benchmark targets.
//!
//! Both experiments use the multiplicative lognormal noise model with an
//! x-dependent noise power:
//!
//! * uniform target 1/(b - a) on [a, b] with sigma(x) = A |log x|,
//! * standard normal target truncated to [-c, c] with sigma(x) = A sqrt(|x|).
//!
//! For each noise level A the runner computes the theoretical variance of
//! Z_hat under the optimal proposal and under q = p, then measures both
//! empirically with common random numbers across the two arms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{map_indexed, replicate_with_twin};
use crate::models::{
    make_multiplicative_lognormal_noise, MultiplicativeLogNormalNoise, NoiseModel, TargetFunction,
};
use crate::proposals::{build_proposal_from_shape, optimal_proposal_for_z, Proposal};
use crate::rng::substream_seed;
use crate::variance_analytics::{quadrature, v_min, v_sub_opt, QuadratureSpec};

pub const DEFAULT_A_GRID: [f64; 6] = [0.2, 0.4, 0.6, 0.8, 1.0, 1.2];
pub const DEFAULT_GRID_NODES: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Uniform,
    Gaussian,
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ExperimentKind::Uniform => write!(f, "uniform"),
            ExperimentKind::Gaussian => write!(f, "gaussian"),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// Interval bounds for the uniform kind.
    pub a: f64,
    pub b: f64,
    /// Truncation half-width for the gaussian kind.
    pub trunc: f64,
    pub a_grid: Vec<f64>,
    /// Samples per run.
    pub n: usize,
    /// Replications per arm.
    pub m: usize,
    pub base_seed: u64,
    pub grid_nodes: usize,
    pub quad_nodes: usize,
    /// Build the optimal arm from the printed closed-form shape p e^{sigma^2}
    /// instead of the generic sqrt(m^2 + s^2) pipeline.
    pub paper_closed_form: bool,
}

impl ExperimentConfig {
    pub fn uniform() -> Self {
        Self {
            kind: ExperimentKind::Uniform,
            a: 0.1,
            b: 10.0,
            trunc: 12.0,
            a_grid: DEFAULT_A_GRID.to_vec(),
            n: 100,
            m: 5000,
            base_seed: 1,
            grid_nodes: DEFAULT_GRID_NODES,
            quad_nodes: crate::variance_analytics::DEFAULT_QUAD_NODES,
            paper_closed_form: false,
        }
    }

    pub fn gaussian() -> Self {
        Self {
            kind: ExperimentKind::Gaussian,
            ..Self::uniform()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a.is_finite() && self.b.is_finite() && self.a < self.b) {
            return Err(Error::Experiments(format!(
                "interval bounds a = {}, b = {} must be finite with a < b",
                self.a, self.b
            )));
        }
        if self.kind == ExperimentKind::Uniform && self.a <= 0.0 {
            return Err(Error::Experiments(format!(
                "uniform experiment needs a > 0 (sigma uses |log x|), got a = {}",
                self.a
            )));
        }
        if self.kind == ExperimentKind::Gaussian && !(self.trunc.is_finite() && self.trunc > 0.0)
        {
            return Err(Error::Experiments(format!(
                "truncation half-width {} must be finite and > 0",
                self.trunc
            )));
        }
        if self.a_grid.is_empty() {
            return Err(Error::Experiments("noise grid must be nonempty".into()));
        }
        for &a in &self.a_grid {
            if !(a.is_finite() && a > 0.0) {
                return Err(Error::Experiments(format!(
                    "noise level A must be > 0, got {a}"
                )));
            }
        }
        if self.n < 2 {
            return Err(Error::Experiments(format!(
                "samples per run N = {} must be >= 2",
                self.n
            )));
        }
        if self.m < 2 {
            return Err(Error::Experiments(format!(
                "replication count M = {} must be >= 2",
                self.m
            )));
        }
        Ok(())
    }

    /// Sampling and integration interval for this experiment.
    pub fn support(&self) -> (f64, f64) {
        match self.kind {
            ExperimentKind::Uniform => (self.a, self.b),
            ExperimentKind::Gaussian => (-self.trunc, self.trunc),
        }
    }

    /// The unnormalized target density.
    pub fn target(&self) -> Result<TargetFunction> {
        let support = self.support();
        match self.kind {
            ExperimentKind::Uniform => {
                let density = 1.0 / (self.b - self.a);
                TargetFunction::new(move |_| density, support)
            }
            ExperimentKind::Gaussian => TargetFunction::new(
                |x| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt(),
                support,
            ),
        }
    }

    /// Noise power profile sigma(x) at level A.
    pub fn sigma_profile(&self, a_level: f64) -> impl Fn(f64) -> f64 + Send + Sync + 'static {
        let kind = self.kind;
        move |x: f64| match kind {
            ExperimentKind::Uniform => a_level * x.ln().abs(),
            ExperimentKind::Gaussian => a_level * x.abs().sqrt(),
        }
    }

    /// The experiment's noise model at level A.
    pub fn noise_for(&self, a_level: f64) -> Result<MultiplicativeLogNormalNoise> {
        if !(a_level.is_finite() && a_level > 0.0) {
            return Err(Error::Experiments(format!(
                "noise level A must be > 0, got {a_level}"
            )));
        }
        Ok(make_multiplicative_lognormal_noise(
            self.target()?,
            self.sigma_profile(a_level),
        ))
    }

    fn quad_spec(&self) -> QuadratureSpec {
        let (lo, hi) = self.support();
        QuadratureSpec::simpson(lo, hi).with_nodes(self.quad_nodes)
    }

    /// Proposal with the shape of the target itself (q = p up to
    /// normalization).
    pub fn target_proposal(&self) -> Result<Proposal> {
        let target = self.target()?;
        Ok(
            build_proposal_from_shape(move |x| target.eval(x), self.support(), self.grid_nodes)?
                .with_label("target"),
        )
    }

    /// The optimal-variance arm: generic sqrt(m^2 + s^2) by default, or the
    /// printed closed-form shape p e^{sigma^2} when `paper_closed_form` is
    /// set.
    pub fn optimal_arm(&self, noise: &dyn NoiseModel, a_level: f64) -> Result<Proposal> {
        if self.paper_closed_form {
            let target = self.target()?;
            let sigma = self.sigma_profile(a_level);
            let shape = move |x: f64| {
                let s = sigma(x);
                target.eval(x) * (s * s).exp()
            };
            Ok(
                build_proposal_from_shape(shape, self.support(), self.grid_nodes)?
                    .with_label("printed-closed-form"),
            )
        } else {
            optimal_proposal_for_z(noise, self.support(), self.grid_nodes)
        }
    }
}

/// One row of the variance-ratio curve.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct RatioPoint {
    #[serde(rename = "A")]
    pub a_level: f64,
    pub v_opt_theory: f64,
    pub v_subopt_theory: f64,
    pub ratio_theory: f64,
    pub v_opt_emp: f64,
    pub v_subopt_emp: f64,
    pub ratio_emp: f64,
    pub stderr_ratio_emp: f64,
}

/// Theoretical and empirical variance ratios over the noise grid.
#[derive(Clone, Debug, Serialize)]
pub struct RatioCurve {
    pub config: ExperimentConfig,
    pub points: Vec<RatioPoint>,
    /// Target mass lying outside the truncated support, relative to the mass
    /// on a doubled interval (gaussian kind only).
    pub truncation_mass_error: Option<f64>,
}

fn with_a_context<T>(a_level: f64, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Experiments(format!("A = {a_level}: {e}")))
}

fn ratio_point(cfg: &ExperimentConfig, idx: usize) -> Result<RatioPoint> {
    let a_level = cfg.a_grid[idx];
    let spec = cfg.quad_spec();
    let noise = cfg.noise_for(a_level)?;
    let v_opt_theory = with_a_context(a_level, v_min(&noise, cfg.n, &spec))?;
    let v_subopt_theory = with_a_context(a_level, v_sub_opt(&noise, cfg.n, &spec))?;
    let q_opt = with_a_context(a_level, cfg.optimal_arm(&noise, a_level))?;
    let q_target = with_a_context(a_level, cfg.target_proposal())?;
    // one seed per grid point, shared by both arms for common random numbers
    let arm_seed = substream_seed(cfg.base_seed, idx as u64);
    let (sum_opt, sum_sub) = with_a_context(
        a_level,
        replicate_with_twin(
            &noise, &q_opt, &q_target, None, None, cfg.n, cfg.m, arm_seed,
        ),
    )?;
    let ratio_emp = sum_sub.var_z / sum_opt.var_z;
    let rel_opt = sum_opt.stderr_var_z / sum_opt.var_z;
    let rel_sub = sum_sub.stderr_var_z / sum_sub.var_z;
    let stderr_ratio_emp = ratio_emp * (rel_opt * rel_opt + rel_sub * rel_sub).sqrt();
    Ok(RatioPoint {
        a_level,
        v_opt_theory,
        v_subopt_theory,
        ratio_theory: v_subopt_theory / v_opt_theory,
        v_opt_emp: sum_opt.var_z,
        v_subopt_emp: sum_sub.var_z,
        ratio_emp,
        stderr_ratio_emp,
    })
}

fn truncation_mass_error(cfg: &ExperimentConfig) -> Result<Option<f64>> {
    if cfg.kind != ExperimentKind::Gaussian {
        return Ok(None);
    }
    let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let near = quadrature(phi, &cfg.quad_spec())?;
    let wide_spec = QuadratureSpec::simpson(-2.0 * cfg.trunc, 2.0 * cfg.trunc)
        .with_nodes(cfg.quad_nodes);
    let wide = quadrature(phi, &wide_spec)?;
    Ok(Some(((wide - near) / wide).abs()))
}

fn run_experiment(cfg: &ExperimentConfig) -> Result<RatioCurve> {
    cfg.validate()?;
    let points = map_indexed(cfg.a_grid.len(), |idx| ratio_point(cfg, idx))?;
    Ok(RatioCurve {
        config: cfg.clone(),
        points,
        truncation_mass_error: truncation_mass_error(cfg)?,
    })
}

pub fn run_uniform_experiment(cfg: &ExperimentConfig) -> Result<RatioCurve> {
    if cfg.kind != ExperimentKind::Uniform {
        return Err(Error::Experiments(format!(
            "run_uniform_experiment got a {} config",
            cfg.kind
        )));
    }
    run_experiment(cfg)
}

pub fn run_gaussian_experiment(cfg: &ExperimentConfig) -> Result<RatioCurve> {
    if cfg.kind != ExperimentKind::Gaussian {
        return Err(Error::Experiments(format!(
            "run_gaussian_experiment got a {} config",
            cfg.kind
        )));
    }
    run_experiment(cfg)
}

/// Plot-ready curves: normalized target, optimal proposal density and noise
/// standard deviation per requested noise level, on a fixed plotting grid.
#[derive(Clone, Debug, Serialize)]
pub struct ProposalCurves {
    pub config: ExperimentConfig,
    pub a_levels: Vec<f64>,
    pub xs: Vec<f64>,
    /// Normalized target density at each x.
    pub p: Vec<f64>,
    /// One density column per noise level.
    pub q_opt: Vec<Vec<f64>>,
    /// One noise standard deviation column per noise level.
    pub s: Vec<Vec<f64>>,
}

pub const PLOT_POINTS: usize = 1000;

pub fn emit_proposal_curves(cfg: &ExperimentConfig, a_levels: &[f64]) -> Result<ProposalCurves> {
    cfg.validate()?;
    if a_levels.is_empty() {
        return Err(Error::Experiments("noise grid must be nonempty".into()));
    }
    for &a in a_levels {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::Experiments(format!(
                "noise level A must be > 0, got {a}"
            )));
        }
    }
    let (lo, hi) = cfg.support();
    let step = (hi - lo) / (PLOT_POINTS - 1) as f64;
    let xs: Vec<f64> = (0..PLOT_POINTS)
        .map(|j| if j == PLOT_POINTS - 1 { hi } else { lo + j as f64 * step })
        .collect();
    let target = cfg.target()?;
    let z = {
        let t = target.clone();
        quadrature(move |x| t.eval(x), &cfg.quad_spec())?
    };
    let p: Vec<f64> = xs.iter().map(|&x| target.eval(x) / z).collect();
    let mut q_opt = Vec::with_capacity(a_levels.len());
    let mut s = Vec::with_capacity(a_levels.len());
    for &a_level in a_levels {
        let noise = cfg.noise_for(a_level)?;
        let proposal = with_a_context(a_level, cfg.optimal_arm(&noise, a_level))?;
        q_opt.push(xs.iter().map(|&x| proposal.density(x)).collect());
        s.push(xs.iter().map(|&x| noise.variance(x).sqrt()).collect());
    }
    Ok(ProposalCurves {
        config: cfg.clone(),
        a_levels: a_levels.to_vec(),
        xs,
        p,
        q_opt,
        s,
    })
}

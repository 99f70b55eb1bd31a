//! Importance sampling estimators driven by noisy target evaluations.
//!
//! One run draws `n` points from a proposal, evaluates the noisy target once
//! per point, and forms weights w = d / q(x). Sampling is lane-indexed: the
//! k-th sample always consumes the k-th dedicated RNG lane, first one uniform
//! for the location, then whatever the noise model needs. Two runs that share
//! a stream seed therefore see identical underlying randomness even if their
//! proposals or noise models differ, which is what makes common-random-number
//! variance comparisons exact.
//!
//! Replication repeats the run over seeds `base_seed + i`. Reps are mutually
//! independent, so the parallel and sequential drivers produce bitwise
//! identical summaries.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::{NoiseModel, VectorFunction, WeightedEnsemble};
use crate::proposals::Proposal;
use crate::rng::RngStream;

/// Draws `n` weighted samples. Consumes one lane of `stream` per sample, so
/// re-running with the same stream seed replays the same randomness.
pub fn run_noisy_is(
    noise: &dyn NoiseModel,
    proposal: &Proposal,
    n: usize,
    stream: &mut RngStream,
) -> Result<WeightedEnsemble> {
    if n == 0 {
        return Err(Error::Estimators("sample count n must be >= 1".into()));
    }
    let mut points = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for lane in 0..n {
        stream.select_lane(lane as u64);
        let u: f64 = rand::Rng::random(stream);
        let x = proposal.inverse_cdf(u)?;
        let q = proposal.density(x);
        if q <= 0.0 {
            return Err(Error::Estimators(format!(
                "proposal density is zero at sampled point x = {x}"
            )));
        }
        let d = noise.draw(x, stream)?;
        let w = d / q;
        if !w.is_finite() {
            return Err(Error::Estimators(format!(
                "non-finite weight {w} at x = {x} (evaluation {d}, proposal density {q})"
            )));
        }
        points.push(x);
        weights.push(w);
    }
    Ok(WeightedEnsemble {
        points,
        weights,
        proposal_id: proposal.label().to_string(),
        seed: stream.seed(),
    })
}

/// Unbiased estimate of the normalizing constant: mean of the weights.
pub fn estimate_z(ens: &WeightedEnsemble) -> f64 {
    ens.weights.iter().sum::<f64>() / ens.weights.len() as f64
}

/// Effective-sample-size proxy (sum w)^2 / sum w^2.
pub fn ess_proxy(ens: &WeightedEnsemble) -> f64 {
    let sum: f64 = ens.weights.iter().sum();
    let sum_sq: f64 = ens.weights.iter().map(|w| w * w).sum();
    if sum_sq == 0.0 {
        0.0
    } else {
        sum * sum / sum_sq
    }
}

/// Standard estimator of the integrals: (1 / (n z_bar)) sum w f(x).
/// Needs the true normalizing constant.
pub fn estimate_i_std(ens: &WeightedEnsemble, f: &VectorFunction, z_bar: f64) -> Result<Vec<f64>> {
    if !(z_bar.is_finite() && z_bar > 0.0) {
        return Err(Error::Estimators(format!(
            "normalizing constant z_bar = {z_bar} must be finite and > 0"
        )));
    }
    let mut acc = vec![0.0; f.dim()];
    for (&x, &w) in ens.points.iter().zip(&ens.weights) {
        for (a, v) in acc.iter_mut().zip(f.eval(x)) {
            *a += w * v;
        }
    }
    let scale = 1.0 / (ens.points.len() as f64 * z_bar);
    Ok(acc.into_iter().map(|a| a * scale).collect())
}

/// Self-normalized estimator: sum w f(x) / sum w.
pub fn estimate_i_self(ens: &WeightedEnsemble, f: &VectorFunction) -> Result<Vec<f64>> {
    let total: f64 = ens.weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::Estimators(format!(
            "self-normalized estimate undefined: total weight is {total}"
        )));
    }
    let mut acc = vec![0.0; f.dim()];
    for (&x, &w) in ens.points.iter().zip(&ens.weights) {
        for (a, v) in acc.iter_mut().zip(f.eval(x)) {
            *a += w * v;
        }
    }
    Ok(acc.into_iter().map(|a| a / total).collect())
}

/// Point estimates from a single run.
#[derive(Clone, Debug, Serialize)]
pub struct EstimatorReport {
    pub z_hat: f64,
    /// Standard estimates; present when the true normalizer was supplied.
    pub i_std: Option<Vec<f64>>,
    /// Self-normalized estimates; present when an integrand was supplied.
    pub i_self: Option<Vec<f64>>,
    pub ess_proxy: f64,
    pub n: usize,
}

impl EstimatorReport {
    pub fn from_ensemble(
        ens: &WeightedEnsemble,
        f: Option<&VectorFunction>,
        z_bar: Option<f64>,
    ) -> Result<Self> {
        let i_std = match (f, z_bar) {
            (Some(f), Some(z)) => Some(estimate_i_std(ens, f, z)?),
            _ => None,
        };
        let i_self = f.map(|f| estimate_i_self(ens, f)).transpose()?;
        Ok(Self {
            z_hat: estimate_z(ens),
            i_std,
            i_self,
            ess_proxy: ess_proxy(ens),
            n: ens.points.len(),
        })
    }
}

pub(crate) fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let m = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / m;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

/// Sample variance plus its own standard error, estimated from the fourth
/// central moment: se^2 = (mu4 - var^2 (m - 3) / (m - 1)) / m.
pub(crate) fn var_and_se(xs: &[f64]) -> (f64, f64) {
    let m = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / m;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (m - 1.0);
    let mu4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / m;
    let se_sq = (mu4 - var * var * (m - 3.0) / (m - 1.0)) / m;
    (var, se_sq.max(0.0).sqrt())
}

/// Cross-replication summary of repeated runs.
#[derive(Clone, Debug, Serialize)]
pub struct ReplicationSummary {
    /// Per-replication reports, in seed order. Omitted from serialized output.
    #[serde(skip)]
    pub per_rep: Vec<EstimatorReport>,
    pub reps: usize,
    pub n: usize,
    pub base_seed: u64,
    pub mean_z: f64,
    pub se_mean_z: f64,
    /// Sample variance of z_hat across reps, with its standard error.
    pub var_z: f64,
    pub stderr_var_z: f64,
    pub mean_i_std: Option<Vec<f64>>,
    pub se_mean_i_std: Option<Vec<f64>>,
    pub mean_i_self: Option<Vec<f64>>,
    pub se_mean_i_self: Option<Vec<f64>>,
}

fn summarize(per_rep: Vec<EstimatorReport>, n: usize, base_seed: u64) -> ReplicationSummary {
    let zs: Vec<f64> = per_rep.iter().map(|r| r.z_hat).collect();
    let (mean_z, se_mean_z) = mean_and_se(&zs);
    let (var_z, stderr_var_z) = var_and_se(&zs);
    let component_stats = |pick: &dyn Fn(&EstimatorReport) -> Option<&Vec<f64>>| {
        let first = pick(&per_rep[0])?;
        let dim = first.len();
        let mut means = Vec::with_capacity(dim);
        let mut ses = Vec::with_capacity(dim);
        for p in 0..dim {
            let vals: Vec<f64> = per_rep.iter().map(|r| pick(r).unwrap()[p]).collect();
            let (m, se) = mean_and_se(&vals);
            means.push(m);
            ses.push(se);
        }
        Some((means, ses))
    };
    let std_stats = component_stats(&|r| r.i_std.as_ref());
    let self_stats = component_stats(&|r| r.i_self.as_ref());
    let (mean_i_std, se_mean_i_std) = match std_stats {
        Some((m, s)) => (Some(m), Some(s)),
        None => (None, None),
    };
    let (mean_i_self, se_mean_i_self) = match self_stats {
        Some((m, s)) => (Some(m), Some(s)),
        None => (None, None),
    };
    ReplicationSummary {
        per_rep,
        reps: zs.len(),
        n,
        base_seed,
        mean_z,
        se_mean_z,
        var_z,
        stderr_var_z,
        mean_i_std,
        se_mean_i_std,
        mean_i_self,
        se_mean_i_self,
    }
}

fn validate_rep_args(n: usize, reps: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Estimators("sample count n must be >= 1".into()));
    }
    if reps < 2 {
        return Err(Error::Estimators(format!(
            "replication count {reps} must be >= 2 to estimate a variance"
        )));
    }
    Ok(())
}

fn one_rep(
    noise: &dyn NoiseModel,
    proposal: &Proposal,
    f: Option<&VectorFunction>,
    z_bar: Option<f64>,
    n: usize,
    seed: u64,
) -> Result<EstimatorReport> {
    let mut stream = RngStream::from_seed(seed);
    let ens = run_noisy_is(noise, proposal, n, &mut stream)?;
    EstimatorReport::from_ensemble(&ens, f, z_bar)
}

/// Runs `job(0..count)` and collects results in index order, on the rayon
/// pool when the `parallel` feature is enabled.
pub(crate) fn map_indexed<T: Send>(
    count: usize,
    job: impl Fn(usize) -> Result<T> + Sync + Send,
) -> Result<Vec<T>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..count).into_par_iter().map(job).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..count).map(job).collect()
    }
}

/// Sequential replication driver: rep `i` uses seed `base_seed + i`.
pub fn replicate_seq(
    noise: &dyn NoiseModel,
    proposal: &Proposal,
    f: Option<&VectorFunction>,
    z_bar: Option<f64>,
    n: usize,
    reps: usize,
    base_seed: u64,
) -> Result<ReplicationSummary> {
    validate_rep_args(n, reps)?;
    let per_rep = (0..reps)
        .map(|i| one_rep(noise, proposal, f, z_bar, n, base_seed.wrapping_add(i as u64)))
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(per_rep, n, base_seed))
}

/// Replication driver. With the `parallel` feature the reps run on the rayon
/// pool; results are identical to [`replicate_seq`] because each rep is
/// seeded independently and collected in seed order.
pub fn replicate(
    noise: &dyn NoiseModel,
    proposal: &Proposal,
    f: Option<&VectorFunction>,
    z_bar: Option<f64>,
    n: usize,
    reps: usize,
    base_seed: u64,
) -> Result<ReplicationSummary> {
    validate_rep_args(n, reps)?;
    let per_rep = map_indexed(reps, |i| {
        one_rep(noise, proposal, f, z_bar, n, base_seed.wrapping_add(i as u64))
    })?;
    Ok(summarize(per_rep, n, base_seed))
}

/// Runs the same replication under two proposals with shared randomness:
/// rep `i` of both arms uses seed `base_seed + i`, so the arms see the same
/// uniforms and the same noise draws at matched sample indices.
pub fn replicate_with_twin(
    noise: &dyn NoiseModel,
    proposal_a: &Proposal,
    proposal_b: &Proposal,
    f: Option<&VectorFunction>,
    z_bar: Option<f64>,
    n: usize,
    reps: usize,
    base_seed: u64,
) -> Result<(ReplicationSummary, ReplicationSummary)> {
    let a = replicate(noise, proposal_a, f, z_bar, n, reps, base_seed)?;
    let b = replicate(noise, proposal_b, f, z_bar, n, reps, base_seed)?;
    Ok((a, b))
}

/// Replicates a noisy run alongside its noiseless twin: the twin reuses the
/// exact same sample locations but replaces each noisy evaluation with the
/// mean function, giving weights m(x_n)/q(x_n) on common random numbers.
pub fn replicate_with_noiseless_twin(
    noise: &dyn NoiseModel,
    proposal: &Proposal,
    n: usize,
    reps: usize,
    base_seed: u64,
) -> Result<(ReplicationSummary, ReplicationSummary)> {
    validate_rep_args(n, reps)?;
    let pairs = map_indexed(reps, |i| {
        let seed = base_seed.wrapping_add(i as u64);
        let mut stream = RngStream::from_seed(seed);
        let ens = run_noisy_is(noise, proposal, n, &mut stream)?;
        let twin = WeightedEnsemble {
            points: ens.points.clone(),
            weights: ens
                .points
                .iter()
                .map(|&x| noise.mean(x) / proposal.density(x))
                .collect(),
            proposal_id: ens.proposal_id.clone(),
            seed,
        };
        Ok((
            EstimatorReport::from_ensemble(&ens, None, None)?,
            EstimatorReport::from_ensemble(&twin, None, None)?,
        ))
    })?;
    let (noisy, noiseless): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    Ok((
        summarize(noisy, n, base_seed),
        summarize(noiseless, n, base_seed),
    ))
}

/// Cheap pilot estimate of the integrals for seeding the self-normalized
/// optimal proposal: a short run under the normalizing-constant-optimal
/// proposal, self-normalized.
pub fn pilot_i_estimate(
    noise: &dyn NoiseModel,
    f: &VectorFunction,
    support: (f64, f64),
    g: usize,
    n_pilot: usize,
    stream: &mut RngStream,
) -> Result<Vec<f64>> {
    let proposal = crate::proposals::optimal_proposal_for_z(noise, support, g)?;
    let ens = run_noisy_is(noise, &proposal, n_pilot, stream)?;
    estimate_i_self(&ens, f)
}

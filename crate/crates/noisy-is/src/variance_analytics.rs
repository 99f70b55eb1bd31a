//! Deterministic quadrature evaluation of the theoretical variance and
//! covariance formulas for noisy importance sampling.
//!
//! Every expectation under the proposal is simplified analytically first
//! (E_q[(m^2 + s^2)/q^2] = int (m^2 + s^2)/q dx and so on), so q is never
//! squared and then divided back out. All quantities scale as 1/N; N is
//! stored alongside the values so ratios are N-free.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::{NoiseModel, VectorFunction};
use crate::proposals::Proposal;

pub use crate::quad::{
    node_positions, quadrature, QuadRule, QuadratureSpec, DEFAULT_QUAD_NODES,
};

/// How far below machine range a proposal density may sit before a positive
/// integrand over it is treated as a support mismatch.
const Q_FLOOR: f64 = 1e-300;

fn with_quantity(quantity: &str, r: Result<f64>) -> Result<f64> {
    r.map_err(|e| match e {
        Error::Quadrature(msg) => Error::Quadrature(format!("{quantity}: {msg}")),
        other => other,
    })
}

fn check_n(n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::Variance(
            "sample count N for the 1/N prefactor must be >= 1".into(),
        ));
    }
    Ok(n as f64)
}

/// Integrates numer(x) / q(x), erroring when q vanishes under a nonzero
/// numerator instead of silently producing infinity.
fn ratio_integral(
    quantity: &str,
    numer: impl Fn(f64) -> f64,
    q: &Proposal,
    spec: &QuadratureSpec,
) -> Result<f64> {
    for &x in &node_positions(spec)? {
        if numer(x) != 0.0 && q.density(x) < Q_FLOOR {
            return Err(Error::Variance(format!(
                "{quantity}: proposal support mismatch: density ~ 0 at x = {x} where the integrand is nonzero"
            )));
        }
    }
    with_quantity(
        quantity,
        quadrature(
            |x| {
                let v = numer(x);
                if v == 0.0 {
                    0.0
                } else {
                    v / q.density(x)
                }
            },
            spec,
        ),
    )
}

/// Normalizing constant of the target mean: Z = int m dx.
pub fn z_bar_quadrature(noise: &dyn NoiseModel, spec: &QuadratureSpec) -> Result<f64> {
    with_quantity("z_bar", quadrature(|x| noise.mean(x), spec))
}

/// Integral of the p-th integrand against the mean: E_p = int f_p m dx.
pub fn e_p_quadrature(
    noise: &dyn NoiseModel,
    f: &VectorFunction,
    p_index: usize,
    spec: &QuadratureSpec,
) -> Result<f64> {
    check_component(f, p_index)?;
    with_quantity(
        "e_p",
        quadrature(|x| f.eval_component(x, p_index) * noise.mean(x), spec),
    )
}

fn check_component(f: &VectorFunction, p_index: usize) -> Result<()> {
    if p_index >= f.dim() {
        return Err(Error::Variance(format!(
            "component index {p_index} out of range for a {}-dimensional integrand",
            f.dim()
        )));
    }
    Ok(())
}

/// Theoretical Var[Z_hat] under proposal q:
/// (1/N) int (m^2 + s^2)/q dx - Z^2/N.
pub fn var_z_theoretical(
    noise: &dyn NoiseModel,
    q: &Proposal,
    n: usize,
    spec: &QuadratureSpec,
) -> Result<f64> {
    let nf = check_n(n)?;
    let second = ratio_integral(
        "var_z",
        |x| noise.mean(x).powi(2) + noise.variance(x),
        q,
        spec,
    )?;
    let z = z_bar_quadrature(noise, spec)?;
    Ok((second - z * z) / nf)
}

/// Minimum attainable Var[Z_hat] over all proposals:
/// (1/N) [ (int sqrt(m^2 + s^2) dx)^2 - Z^2 ].
pub fn v_min(noise: &dyn NoiseModel, n: usize, spec: &QuadratureSpec) -> Result<f64> {
    let nf = check_n(n)?;
    let c = with_quantity(
        "v_min",
        quadrature(
            |x| (noise.mean(x).powi(2) + noise.variance(x)).sqrt(),
            spec,
        ),
    )?;
    let z = z_bar_quadrature(noise, spec)?;
    Ok((c * c - z * z) / nf)
}

/// Var[Z_hat] under the noise-blind proposal q = m/Z: (Z/N) int s^2/m dx.
/// Undefined when the noise variance is positive somewhere the mean is zero.
pub fn v_sub_opt(noise: &dyn NoiseModel, n: usize, spec: &QuadratureSpec) -> Result<f64> {
    let nf = check_n(n)?;
    for &x in &node_positions(spec)? {
        if noise.mean(x) <= 0.0 && noise.variance(x) > 0.0 {
            return Err(Error::Variance(format!(
                "v_sub_opt undefined: noise variance {} is positive at x = {x} where the mean is zero",
                noise.variance(x)
            )));
        }
    }
    let integral = with_quantity(
        "v_sub_opt",
        quadrature(
            |x| {
                let s2 = noise.variance(x);
                if s2 == 0.0 {
                    0.0
                } else {
                    s2 / noise.mean(x)
                }
            },
            spec,
        ),
    )?;
    let z = z_bar_quadrature(noise, spec)?;
    Ok(z * integral / nf)
}

/// Variance of the p-th standard estimate (known normalizer):
/// (1/(N Z^2)) int f_p^2 (m^2 + s^2)/q dx - I_p^2/N.
///
/// The second term is E_p^2/(N Z^2) = I_p^2/N. Writing it with any other
/// normalization breaks the f_p = 1 reduction to Var[Z_hat]/Z^2 whenever
/// Z differs from 1.
pub fn var_i_std_component(
    noise: &dyn NoiseModel,
    q: &Proposal,
    f: &VectorFunction,
    p_index: usize,
    z_bar: f64,
    i_p: f64,
    n: usize,
    spec: &QuadratureSpec,
) -> Result<f64> {
    let nf = check_n(n)?;
    check_component(f, p_index)?;
    if !(z_bar.is_finite() && z_bar > 0.0) {
        return Err(Error::Variance(format!(
            "normalizing constant z_bar = {z_bar} must be finite and > 0"
        )));
    }
    let second = ratio_integral(
        "var_i_std",
        |x| {
            let fp = f.eval_component(x, p_index);
            fp * fp * (noise.mean(x).powi(2) + noise.variance(x))
        },
        q,
        spec,
    )?;
    Ok(second / (nf * z_bar * z_bar) - i_p * i_p / nf)
}

/// Covariance of the unnormalized p-th estimate with Z_hat:
/// (1/N) [ int f_p (m^2 + s^2)/q dx - E_p Z ].
pub fn cov_e_z(
    noise: &dyn NoiseModel,
    q: &Proposal,
    f: &VectorFunction,
    p_index: usize,
    e_p: f64,
    z_bar: f64,
    n: usize,
    spec: &QuadratureSpec,
) -> Result<f64> {
    let nf = check_n(n)?;
    check_component(f, p_index)?;
    let first = ratio_integral(
        "cov_e_z",
        |x| f.eval_component(x, p_index) * (noise.mean(x).powi(2) + noise.variance(x)),
        q,
        spec,
    )?;
    Ok((first - e_p * z_bar) / nf)
}

/// Delta-method variance of the p-th self-normalized estimate, in both
/// algebraically equivalent forms.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SelfNormalizedVariance {
    /// (1/Z^2) Var[E_hat_p] - 2 (E_p/Z^3) Cov[E_hat_p, Z_hat]
    /// + (E_p^2/Z^4) Var[Z_hat].
    pub three_term: f64,
    /// (1/(N Z^2)) int (m^2 + s^2) (f_p - I_p)^2 / q dx.
    pub consolidated: f64,
}

pub fn var_i_self_component(
    noise: &dyn NoiseModel,
    q: &Proposal,
    f: &VectorFunction,
    p_index: usize,
    n: usize,
    spec: &QuadratureSpec,
) -> Result<SelfNormalizedVariance> {
    let nf = check_n(n)?;
    check_component(f, p_index)?;
    let z = z_bar_quadrature(noise, spec)?;
    if z <= 0.0 {
        return Err(Error::Variance(format!(
            "normalizing constant z_bar = {z} must be positive"
        )));
    }
    let e_p = e_p_quadrature(noise, f, p_index, spec)?;
    let i_p = e_p / z;
    let second_f2 = ratio_integral(
        "var_i_self",
        |x| {
            let fp = f.eval_component(x, p_index);
            fp * fp * (noise.mean(x).powi(2) + noise.variance(x))
        },
        q,
        spec,
    )?;
    let var_e_p = (second_f2 - e_p * e_p) / nf;
    let cov = cov_e_z(noise, q, f, p_index, e_p, z, n, spec)?;
    let var_z = var_z_theoretical(noise, q, n, spec)?;
    let three_term = var_e_p / (z * z) - 2.0 * (e_p / (z * z * z)) * cov
        + (e_p * e_p / (z * z * z * z)) * var_z;
    let consolidated = ratio_integral(
        "var_i_self",
        |x| {
            let d = f.eval_component(x, p_index) - i_p;
            d * d * (noise.mean(x).powi(2) + noise.variance(x))
        },
        q,
        spec,
    )? / (nf * z * z);
    Ok(SelfNormalizedVariance {
        three_term,
        consolidated,
    })
}

/// Theoretical variance summary for one (noise, proposal, N) configuration.
/// `ratio` compares the two canonical proposals and is independent of `q`.
#[derive(Clone, Debug, Serialize)]
pub struct VarianceReport {
    /// Var[Z_hat] under the supplied proposal.
    pub v_q: f64,
    /// Variance floor over all proposals.
    pub v_min: f64,
    /// Variance under the noise-blind proposal q = m/Z.
    pub v_sub_opt: f64,
    /// v_sub_opt / v_min.
    pub ratio: f64,
    pub n: usize,
    pub z_bar: f64,
}

pub fn variance_report(
    noise: &dyn NoiseModel,
    q: &Proposal,
    n: usize,
    spec: &QuadratureSpec,
) -> Result<VarianceReport> {
    let z_bar = z_bar_quadrature(noise, spec)?;
    if z_bar <= 0.0 {
        return Err(Error::Variance(format!(
            "normalizing constant z_bar = {z_bar} must be positive"
        )));
    }
    let v_q = var_z_theoretical(noise, q, n, spec)?;
    let v_min_val = v_min(noise, n, spec)?;
    let v_sub = v_sub_opt(noise, n, spec)?;
    Ok(VarianceReport {
        v_q,
        v_min: v_min_val,
        v_sub_opt: v_sub,
        ratio: v_sub / v_min_val,
        n,
        z_bar,
    })
}

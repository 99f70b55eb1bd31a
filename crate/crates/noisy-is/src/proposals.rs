//! Grid-backed proposal densities with exact inverse-CDF sampling.
//!
//! A proposal is stored as a piecewise-linear density on a uniform grid.
//! The CDF of a piecewise-linear density is piecewise quadratic, so the
//! inverse CDF can be evaluated in closed form per cell. That makes
//! sampling exact for the tabulated density (no rejection step), which in
//! turn lets different proposals share one stream of uniforms for
//! common-random-number comparisons.

use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::models::{NoiseModel, VectorFunction};

/// Piecewise-linear density table on a uniform grid.
#[derive(Clone, Debug)]
pub struct GridTable {
    nodes: Vec<f64>,
    /// Unnormalized shape values at the nodes.
    unnorm_values: Vec<f64>,
    /// Trapezoid CDF of the normalized density; cdf[0] = 0, cdf[G] = 1.
    cdf: Vec<f64>,
    norm_const: f64,
}

impl GridTable {
    /// Tabulates `shape` on `g` cells (`g + 1` nodes) over `support` and
    /// normalizes it into a density.
    pub fn build(shape: impl Fn(f64) -> f64, support: (f64, f64), g: usize) -> Result<Self> {
        let (lo, hi) = support;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Proposals(format!(
                "support [{lo}, {hi}] must be finite with lo < hi"
            )));
        }
        if g < 1 {
            return Err(Error::Proposals("grid needs at least one cell".into()));
        }
        let h = (hi - lo) / g as f64;
        let mut nodes = Vec::with_capacity(g + 1);
        let mut unnorm_values = Vec::with_capacity(g + 1);
        for i in 0..=g {
            let x = if i == g { hi } else { lo + i as f64 * h };
            let v = shape(x);
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Proposals(format!(
                    "shape value {v} at node x = {x} must be finite and >= 0"
                )));
            }
            nodes.push(x);
            unnorm_values.push(v);
        }
        // trapezoid mass of the unnormalized shape
        let mut mass = 0.0;
        for k in 0..g {
            mass += 0.5 * h * (unnorm_values[k] + unnorm_values[k + 1]);
        }
        if mass <= 0.0 {
            return Err(Error::Proposals("shape has zero total mass".into()));
        }
        let mut cdf = Vec::with_capacity(g + 1);
        cdf.push(0.0);
        let mut acc = 0.0;
        for k in 0..g {
            acc += 0.5 * h * (unnorm_values[k] + unnorm_values[k + 1]) / mass;
            cdf.push(acc.min(1.0));
        }
        cdf[g] = 1.0;
        Ok(Self {
            nodes,
            unnorm_values,
            cdf,
            norm_const: mass,
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Unnormalized shape values at the nodes.
    pub fn values(&self) -> &[f64] {
        &self.unnorm_values
    }

    pub fn norm_const(&self) -> f64 {
        self.norm_const
    }

    pub fn support(&self) -> (f64, f64) {
        (self.nodes[0], *self.nodes.last().unwrap())
    }

    fn cell_width(&self) -> f64 {
        let (lo, hi) = self.support();
        (hi - lo) / (self.nodes.len() - 1) as f64
    }

    /// Locates the cell containing `x`, clamped to the grid.
    fn cell_of(&self, x: f64) -> usize {
        let (lo, _) = self.support();
        let g = self.nodes.len() - 1;
        let k = ((x - lo) / self.cell_width()).floor();
        (k.max(0.0) as usize).min(g - 1)
    }

    /// Normalized density at `x` (0 outside the support).
    pub fn density(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if !(lo..=hi).contains(&x) {
            return 0.0;
        }
        let k = self.cell_of(x);
        let t = (x - self.nodes[k]) / self.cell_width();
        let v = self.unnorm_values[k] + t * (self.unnorm_values[k + 1] - self.unnorm_values[k]);
        v / self.norm_const
    }

    /// CDF at `x`, exact for the piecewise-linear density.
    pub fn cdf_at(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x <= lo {
            return 0.0;
        }
        if x >= hi {
            return 1.0;
        }
        let k = self.cell_of(x);
        let h = self.cell_width();
        let t = (x - self.nodes[k]) / h;
        let d0 = self.unnorm_values[k] / self.norm_const;
        let d1 = self.unnorm_values[k + 1] / self.norm_const;
        (self.cdf[k] + h * (t * d0 + 0.5 * t * t * (d1 - d0))).min(1.0)
    }

    /// Inverse CDF. Within a cell the CDF is quadratic, so the inversion is
    /// closed form; ties at cell boundaries resolve to the leftmost node.
    pub fn inverse_cdf(&self, u: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::Proposals(format!(
                "inverse CDF argument {u} must lie in [0, 1]"
            )));
        }
        // first index with cdf >= u
        let idx = self.cdf.partition_point(|&c| c < u);
        if idx == 0 {
            return Ok(self.nodes[0]);
        }
        let k = idx - 1;
        let h = self.cell_width();
        let d0 = self.unnorm_values[k] / self.norm_const;
        let d1 = self.unnorm_values[k + 1] / self.norm_const;
        let s = d1 - d0;
        // solve (s/2) t^2 + d0 t = delta for t in [0, 1]
        let delta = (u - self.cdf[k]) / h;
        let disc = (d0 * d0 + 2.0 * s * delta).max(0.0);
        let denom = d0 + disc.sqrt();
        let t = if denom > 0.0 { 2.0 * delta / denom } else { 0.0 };
        Ok(self.nodes[k] + t.clamp(0.0, 1.0) * h)
    }
}

/// A labelled sampling distribution backed by a [`GridTable`].
#[derive(Clone, Debug)]
pub struct Proposal {
    label: String,
    grid: GridTable,
}

impl Proposal {
    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn grid(&self) -> &GridTable {
        &self.grid
    }

    pub fn support(&self) -> (f64, f64) {
        self.grid.support()
    }

    pub fn density(&self, x: f64) -> f64 {
        self.grid.density(x)
    }

    pub fn inverse_cdf(&self, u: f64) -> Result<f64> {
        self.grid.inverse_cdf(u)
    }

    /// Draws one sample, consuming exactly one uniform from `rng`.
    pub fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        let u: f64 = rng.random();
        // u is in [0, 1) so the inversion cannot fail
        self.grid.inverse_cdf(u).expect("uniform draw out of range")
    }
}

/// Builds a proposal from an arbitrary nonnegative shape function.
pub fn build_proposal_from_shape(
    shape: impl Fn(f64) -> f64,
    support: (f64, f64),
    g: usize,
) -> Result<Proposal> {
    Ok(Proposal {
        label: "shape".into(),
        grid: GridTable::build(shape, support, g)?,
    })
}

/// Minimum-variance proposal for the normalizing-constant estimate:
/// shape sqrt(m(x)^2 + s(x)^2).
pub fn optimal_proposal_for_z(
    noise: &dyn NoiseModel,
    support: (f64, f64),
    g: usize,
) -> Result<Proposal> {
    let grid = GridTable::build(
        |x| (noise.mean(x).powi(2) + noise.variance(x)).sqrt(),
        support,
        g,
    )?;
    Ok(Proposal {
        label: "optimal-z".into(),
        grid,
    })
}

/// Minimum-variance proposal for the standard (normalized-weight) estimator
/// of a vector of integrands: shape ||f(x)|| sqrt(m(x)^2 + s(x)^2).
pub fn optimal_proposal_for_std(
    noise: &dyn NoiseModel,
    f: &VectorFunction,
    support: (f64, f64),
    g: usize,
) -> Result<Proposal> {
    let grid = GridTable::build(
        |x| {
            let fx = f.eval(x);
            let norm = fx.iter().map(|v| v * v).sum::<f64>().sqrt();
            norm * (noise.mean(x).powi(2) + noise.variance(x)).sqrt()
        },
        support,
        g,
    )?;
    Ok(Proposal {
        label: "optimal-std".into(),
        grid,
    })
}

/// Minimum-variance proposal for the self-normalized estimator, centred on a
/// pilot estimate of the integrals: shape ||f(x) - i_pilot|| sqrt(m^2 + s^2).
pub fn optimal_proposal_for_self(
    noise: &dyn NoiseModel,
    f: &VectorFunction,
    i_pilot: &[f64],
    support: (f64, f64),
    g: usize,
) -> Result<Proposal> {
    if i_pilot.len() != f.dim() {
        return Err(Error::Proposals(format!(
            "pilot estimate has {} components but the integrand has {}",
            i_pilot.len(),
            f.dim()
        )));
    }
    let grid = GridTable::build(
        |x| {
            let fx = f.eval(x);
            let norm = fx
                .iter()
                .zip(i_pilot)
                .map(|(v, i)| (v - i) * (v - i))
                .sum::<f64>()
                .sqrt();
            norm * (noise.mean(x).powi(2) + noise.variance(x)).sqrt()
        },
        support,
        g,
    )?;
    Ok(Proposal {
        label: "optimal-self".into(),
        grid,
    })
}

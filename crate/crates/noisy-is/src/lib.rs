//! Importance sampling with noisy integrand evaluations.
//!
//! The integrands of interest can only be queried through a stochastic
//! simulator: each evaluation returns an unbiased draw around the true value
//! with a known, position-dependent noise power. This crate provides
//!
//! * noise models describing the simulator's mean and variance ([`models`]),
//! * grid-backed proposal densities, including the variance-optimal choices
//!   that account for the noise ([`proposals`]),
//! * the estimators themselves with replication drivers ([`estimators`]),
//! * closed-form variance and covariance formulas evaluated by quadrature
//!   ([`variance_analytics`]),
//! * two end-to-end benchmark experiments comparing optimal against
//!   noise-blind proposals ([`experiments`]), and
//! * CSV rendering of every report type ([`io`]).
//!
//! Replications and experiment grid points run on a rayon pool when the
//! default `parallel` feature is enabled; disabling it yields a fully
//! sequential build with bit-identical results.

mod quad;

pub mod error;
pub mod estimators;
pub mod experiments;
pub mod io;
pub mod models;
pub mod proposals;
pub mod rng;
pub mod variance_analytics;

/// Runs `job` on a dedicated pool of `threads` workers, or inherit the global
/// pool when `threads` is `None`. With the `parallel` feature disabled the
/// job simply runs inline.
#[cfg(feature = "parallel")]
pub fn with_thread_limit<T: Send>(
    threads: Option<usize>,
    job: impl FnOnce() -> T + Send,
) -> error::Result<T> {
    match threads {
        None => Ok(job()),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| error::Error::Experiments(format!("thread pool: {e}")))?;
            Ok(pool.install(job))
        }
    }
}

#[cfg(not(feature = "parallel"))]
pub fn with_thread_limit<T: Send>(
    threads: Option<usize>,
    job: impl FnOnce() -> T + Send,
) -> error::Result<T> {
    let _ = threads;
    Ok(job())
}

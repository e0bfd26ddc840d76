//! Probabilistic Latent Component Analysis.
//!
//! A non-negative `M x N` table (events by groups) is normalized into an
//! empirical distribution `pi(e, g)` and approximated by the latent class
//! model
//!
//! ```text
//! P(e, g) = P(g) * sum_z P(e|z) P(z|g)
//! ```
//!
//! by minimizing `KL(pi | P)`. The group prior is fixed to the empirical
//! group marginal and the remaining parameters are fitted by EM.
//!
//! Modules:
//! - [`model`]: the parameter triple and pointwise probabilities.
//! - [`objective`]: empirical distributions, KL divergence, `fobj`, the
//!   sample log-likelihood and the EM auxiliary function.
//! - [`em`]: initialization, the EM update and the fitting loop.
//! - [`sampler`]: the generative process and corpora.
//! - [`reference`]: brute-force oracles (grid search, naive loops).
//! - [`io`]: CSV matrices, model JSON, corpus and trace files.
//! - [`cli`]: the `plca` command line front end.

pub mod cli;
pub mod em;
mod error;
pub mod io;
pub mod model;
pub mod objective;
pub mod reference;
pub mod rng;
pub mod sampler;
mod sum;

pub use em::{em_step, fit, init_model, FitConfig, FitTrace, Init, IterationRecord, Termination};
pub use error::{PlcaError, Result};
pub use model::{PlcaModel, PosteriorTable};
pub use objective::{build_empirical, fobj, kld, q_function, sample_loglik, EmpiricalDistribution};
pub use sampler::{corpus_to_counts, sample_corpus, sample_pair, SampleCorpus};

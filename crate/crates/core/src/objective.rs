//! Empirical distributions and the quantities EM optimizes.
//!
//! All sums run group-major (`g` outer, `e` inner, `z` innermost) through a
//! compensated accumulator, so values are reproducible run to run. Terms
//! with zero empirical mass contribute exactly zero; a positive mass on a
//! cell the model gives zero probability yields an infinite value rather
//! than an error.

use ndarray::{Array1, Array2};

use crate::error::{PlcaError, Result};
use crate::model::{PlcaModel, PosteriorTable};
use crate::sampler::SampleCorpus;
use crate::sum::{compensated, CompensatedSum};

/// A normalized non-negative `M x N` table `pi(e, g)` with its cached group
/// marginal `pi(g)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    table: Array2<f64>,
    group_marginal: Array1<f64>,
}

impl EmpiricalDistribution {
    pub fn table(&self) -> &Array2<f64> {
        &self.table
    }

    pub fn group_marginal(&self) -> &Array1<f64> {
        &self.group_marginal
    }

    /// `pi(e) = sum_g pi(e, g)`
    pub fn event_marginal(&self) -> Array1<f64> {
        Array1::from_shape_fn(self.n_events(), |e| {
            let mut s = 0.0;
            for g in 0..self.n_groups() {
                s += self.table[[e, g]];
            }
            s
        })
    }

    pub fn n_events(&self) -> usize {
        self.table.nrows()
    }

    pub fn n_groups(&self) -> usize {
        self.table.ncols()
    }

    pub fn get(&self, e: usize, g: usize) -> f64 {
        self.table[[e, g]]
    }

    /// `sum pi log pi`, with `0 log 0 = 0`.
    pub fn neg_entropy(&self) -> f64 {
        let mut acc = CompensatedSum::new();
        for g in 0..self.n_groups() {
            for e in 0..self.n_events() {
                let p = self.table[[e, g]];
                if p > 0.0 {
                    acc.add(p * p.ln());
                }
            }
        }
        acc.value()
    }

    pub(crate) fn check_dims(&self, model: &PlcaModel) -> Result<()> {
        if model.n_events() != self.n_events() || model.n_groups() != self.n_groups() {
            return Err(PlcaError::Shape(format!(
                "empirical distribution is {}x{}, model is {}x{}",
                self.n_events(),
                self.n_groups(),
                model.n_events(),
                model.n_groups()
            )));
        }
        Ok(())
    }
}

/// Normalizes a non-negative matrix (rows are events, columns groups) to
/// total mass one.
pub fn build_empirical(raw: &Array2<f64>) -> Result<EmpiricalDistribution> {
    let (m, n) = raw.dim();
    if m == 0 || n == 0 {
        return Err(PlcaError::Validation("matrix has no cells".into()));
    }
    for ((row, col), &v) in raw.indexed_iter() {
        if !v.is_finite() {
            return Err(PlcaError::NonFinite { row, col });
        }
        if v < 0.0 {
            return Err(PlcaError::NegativeValue { row, col, value: v });
        }
    }
    let total = compensated((0..n).flat_map(|g| (0..m).map(move |e| raw[[e, g]])));
    if total <= 0.0 {
        return Err(PlcaError::Validation("matrix has zero total mass".into()));
    }
    let table = raw.mapv(|v| v / total);
    let group_marginal = Array1::from_shape_fn(n, |g| {
        let mut s = 0.0;
        for e in 0..m {
            s += table[[e, g]];
        }
        s
    });
    Ok(EmpiricalDistribution {
        table,
        group_marginal,
    })
}

/// `KL(pi | P) = sum pi(e,g) log(pi(e,g) / P(e,g))`
pub fn kld(pi: &EmpiricalDistribution, model: &PlcaModel) -> Result<f64> {
    pi.check_dims(model)?;
    let prior = model.group_prior();
    let mut acc = CompensatedSum::new();
    for g in 0..pi.n_groups() {
        for e in 0..pi.n_events() {
            let p = pi.get(e, g);
            if p == 0.0 {
                continue;
            }
            let q = prior[g] * model.mix(e, g);
            if q == 0.0 {
                return Ok(f64::INFINITY);
            }
            acc.add(p * (p / q).ln());
        }
    }
    Ok(acc.value())
}

/// `fobj = -sum pi(e,g) log sum_z P(e|z) P(z|g)`
pub fn fobj(pi: &EmpiricalDistribution, model: &PlcaModel) -> Result<f64> {
    pi.check_dims(model)?;
    let mut acc = CompensatedSum::new();
    for g in 0..pi.n_groups() {
        for e in 0..pi.n_events() {
            let p = pi.get(e, g);
            if p == 0.0 {
                continue;
            }
            let c = model.mix(e, g);
            if c == 0.0 {
                return Ok(f64::INFINITY);
            }
            acc.add(-p * c.ln());
        }
    }
    Ok(acc.value())
}

/// Average log conditional likelihood `(1/n) sum_i log P(e_i | g_i)` of a
/// corpus. `-inf` when some observation is impossible under the model.
pub fn sample_loglik(corpus: &SampleCorpus, model: &PlcaModel) -> Result<f64> {
    if corpus.is_empty() {
        return Err(PlcaError::Domain("sample log-likelihood of an empty corpus".into()));
    }
    let mut acc = CompensatedSum::new();
    for &(e, g) in corpus.pairs() {
        let c = model.conditional_e_given_g(e, g)?;
        if c == 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        acc.add(c.ln());
    }
    Ok(acc.value() / corpus.len() as f64)
}

/// The EM auxiliary function
/// `Q = sum pi(e,g) sum_z post[z,e,g] log(P(e|z) P(z|g))`.
pub fn q_function(
    pi: &EmpiricalDistribution,
    post: &PosteriorTable,
    model: &PlcaModel,
) -> Result<f64> {
    pi.check_dims(model)?;
    let (k, m, n) = post.dim();
    if (k, m, n) != (model.n_classes(), model.n_events(), model.n_groups()) {
        return Err(PlcaError::Shape(format!(
            "posterior is {k}x{m}x{n}, model is {}x{}x{}",
            model.n_classes(),
            model.n_events(),
            model.n_groups()
        )));
    }
    let comp = model.components();
    let mix = model.mixture();
    let mut acc = CompensatedSum::new();
    for g in 0..n {
        for e in 0..m {
            let p = pi.get(e, g);
            if p == 0.0 {
                continue;
            }
            for z in 0..k {
                let r = post.get(z, e, g);
                if r == 0.0 {
                    continue;
                }
                let joint = comp[[e, z]] * mix[[z, g]];
                if joint == 0.0 {
                    return Ok(f64::NEG_INFINITY);
                }
                acc.add(p * r * joint.ln());
            }
        }
    }
    Ok(acc.value())
}

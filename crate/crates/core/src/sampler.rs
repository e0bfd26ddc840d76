//! The generative process: pick a group `g ~ P(g)`, a latent class
//! `z ~ P(z|g)`, then an event `e ~ P(e|z)`.
//!
//! Categorical draws use the inverse CDF with cumulative sums taken in
//! ascending index order: the first index `i` with `u < sum_{j<=i} p_j` is
//! returned. If round-off leaves `u` above the final cumulative sum, the
//! last index with positive probability is used.

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{PlcaError, Result};
use crate::model::PlcaModel;
use crate::rng::PlcaRng;

/// Observed `(event, group)` pairs; the latent class is not kept.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleCorpus {
    pairs: Vec<(usize, usize)>,
    seed: u64,
}

impl SampleCorpus {
    pub fn new(pairs: Vec<(usize, usize)>, seed: u64) -> Self {
        Self { pairs, seed }
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

fn categorical(u: f64, probs: ArrayView1<'_, f64>) -> usize {
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if p > 0.0 {
            last_positive = i;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}

/// One draw `(e, g, z)` from the generative process.
///
/// Consumes exactly three uniforms, in the order group, class, event.
pub fn sample_pair(model: &PlcaModel, rng: &mut PlcaRng) -> (usize, usize, usize) {
    let g = categorical(rng.uniform(), model.group_prior().view());
    let z = categorical(rng.uniform(), model.mixture().column(g));
    let e = categorical(rng.uniform(), model.components().column(z));
    (e, g, z)
}

/// Cumulative tables for repeated draws. Produces exactly the same indices
/// as [`sample_pair`] for the same uniforms.
struct CdfTables {
    group: Array1<f64>,
    // [g][z]
    mixture: Array2<f64>,
    // [z][e]
    components: Array2<f64>,
    group_last: usize,
    mixture_last: Vec<usize>,
    components_last: Vec<usize>,
}

fn cdf_of(probs: ArrayView1<'_, f64>) -> (Array1<f64>, usize) {
    let mut acc = 0.0;
    let mut last = 0;
    let mut cdf = Array1::zeros(probs.len());
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if p > 0.0 {
            last = i;
            cdf[i] = acc;
        } else {
            // zero-probability entries can never be selected
            cdf[i] = f64::NEG_INFINITY;
        }
    }
    (cdf, last)
}

fn pick(u: f64, cdf: ArrayView1<'_, f64>, last: usize) -> usize {
    cdf.iter().position(|&c| u < c).unwrap_or(last)
}

impl CdfTables {
    fn new(model: &PlcaModel) -> Self {
        let (m, n, k) = model.dims();
        let (group, group_last) = cdf_of(model.group_prior().view());
        let mut mixture = Array2::zeros((n, k));
        let mut mixture_last = Vec::with_capacity(n);
        for g in 0..n {
            let (c, l) = cdf_of(model.mixture().column(g));
            mixture.row_mut(g).assign(&c);
            mixture_last.push(l);
        }
        let mut components = Array2::zeros((k, m));
        let mut components_last = Vec::with_capacity(k);
        for z in 0..k {
            let (c, l) = cdf_of(model.components().column(z));
            components.row_mut(z).assign(&c);
            components_last.push(l);
        }
        Self {
            group,
            mixture,
            components,
            group_last,
            mixture_last,
            components_last,
        }
    }

    fn draw(&self, rng: &mut PlcaRng) -> (usize, usize, usize) {
        let g = pick(rng.uniform(), self.group.view(), self.group_last);
        let z = pick(rng.uniform(), self.mixture.row(g), self.mixture_last[g]);
        let e = pick(rng.uniform(), self.components.row(z), self.components_last[z]);
        (e, g, z)
    }
}

/// `n` independent draws from a generator seeded with `seed`.
pub fn sample_corpus(model: &PlcaModel, n: usize, seed: u64) -> Result<SampleCorpus> {
    if n == 0 {
        return Err(PlcaError::Domain("corpus size must be at least 1".into()));
    }
    let tables = CdfTables::new(model);
    let mut rng = PlcaRng::new(seed);
    let pairs = (0..n)
        .map(|_| {
            let (e, g, _) = tables.draw(&mut rng);
            (e, g)
        })
        .collect();
    Ok(SampleCorpus::new(pairs, seed))
}

/// Like [`sample_corpus`] but keeps the latent class of every draw.
pub fn sample_triples(model: &PlcaModel, n: usize, seed: u64) -> Vec<(usize, usize, usize)> {
    let tables = CdfTables::new(model);
    let mut rng = PlcaRng::new(seed);
    (0..n).map(|_| tables.draw(&mut rng)).collect()
}

/// Counts of each `(e, g)` pair as an `M x N` matrix.
pub fn corpus_to_counts(corpus: &SampleCorpus, dims: (usize, usize)) -> Result<Array2<f64>> {
    let (m, n) = dims;
    let mut counts = Array2::<f64>::zeros((m, n));
    for &(e, g) in corpus.pairs() {
        if e >= m {
            return Err(PlcaError::Validation(format!(
                "corpus event index {e} out of range for M={m}"
            )));
        }
        if g >= n {
            return Err(PlcaError::Validation(format!(
                "corpus group index {g} out of range for N={n}"
            )));
        }
        counts[[e, g]] += 1.0;
    }
    Ok(counts)
}

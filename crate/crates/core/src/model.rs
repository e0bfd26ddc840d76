//! The PLCA parameter triple and pointwise probability evaluations.

use ndarray::{Array1, Array2, Array3, ArrayView1};

use crate::error::{PlcaError, Result};

/// Tolerance accepted on column sums before renormalizing at construction.
pub const CONSTRUCTION_TOL: f64 = 1e-9;

/// Parameters of a latent class model over `M` events, `N` groups and `K`
/// latent classes.
///
/// - `group_prior[g] = P(g)`
/// - `mixture[[z, g]] = P(z|g)`, each column a distribution over classes
/// - `components[[e, z]] = P(e|z)`, each column a distribution over events
///
/// Immutable once built; every constructor enforces the stochastic
/// constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct PlcaModel {
    group_prior: Array1<f64>,
    mixture: Array2<f64>,
    components: Array2<f64>,
}

impl PlcaModel {
    /// Builds a model, checking every probability vector sums to one within
    /// [`CONSTRUCTION_TOL`] and then dividing each by its sum.
    pub fn new(
        group_prior: Array1<f64>,
        mixture: Array2<f64>,
        components: Array2<f64>,
    ) -> Result<Self> {
        let n = group_prior.len();
        let (k, n_mix) = mixture.dim();
        let (m, k_comp) = components.dim();
        if n == 0 || m == 0 || k == 0 {
            return Err(PlcaError::InvariantViolation(format!(
                "dimensions must be positive, got M={m} N={n} K={k}"
            )));
        }
        if n_mix != n {
            return Err(PlcaError::Shape(format!(
                "mixture has {n_mix} columns but group_prior has length {n}"
            )));
        }
        if k_comp != k {
            return Err(PlcaError::Shape(format!(
                "components has {k_comp} columns but mixture has {k} rows"
            )));
        }

        let mut model = Self {
            group_prior,
            mixture,
            components,
        };
        let prior_sum = check_distribution(model.group_prior.view(), "group_prior")?;
        model.group_prior /= prior_sum;
        for g in 0..n {
            let s = check_distribution(model.mixture.column(g), &format!("mixture column {g}"))?;
            model.mixture.column_mut(g).mapv_inplace(|x| x / s);
        }
        for z in 0..k {
            let s = check_distribution(
                model.components.column(z),
                &format!("components column {z}"),
            )?;
            model.components.column_mut(z).mapv_inplace(|x| x / s);
        }
        Ok(model)
    }

    /// Internal constructor for parameters that are stochastic by
    /// construction (EM updates, permutations).
    pub(crate) fn from_parts(
        group_prior: Array1<f64>,
        mixture: Array2<f64>,
        components: Array2<f64>,
    ) -> Self {
        debug_assert_eq!(group_prior.len(), mixture.ncols());
        debug_assert_eq!(mixture.nrows(), components.ncols());
        Self {
            group_prior,
            mixture,
            components,
        }
    }

    /// Number of events `M`.
    pub fn n_events(&self) -> usize {
        self.components.nrows()
    }

    /// Number of groups `N`.
    pub fn n_groups(&self) -> usize {
        self.group_prior.len()
    }

    /// Number of latent classes `K`.
    pub fn n_classes(&self) -> usize {
        self.mixture.nrows()
    }

    /// `(M, N, K)`
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.n_events(), self.n_groups(), self.n_classes())
    }

    pub fn group_prior(&self) -> &Array1<f64> {
        &self.group_prior
    }

    /// `K x N`, entry `[z, g]` is `P(z|g)`.
    pub fn mixture(&self) -> &Array2<f64> {
        &self.mixture
    }

    /// `M x K`, entry `[e, z]` is `P(e|z)`.
    pub fn components(&self) -> &Array2<f64> {
        &self.components
    }

    /// Same mixture and components with a different group prior.
    pub fn with_group_prior(&self, group_prior: Array1<f64>) -> Result<Self> {
        Self::new(group_prior, self.mixture.clone(), self.components.clone())
    }

    /// Relabels latent classes: class `z` of the result is class `perm[z]`
    /// of `self`.
    pub fn permute_classes(&self, perm: &[usize]) -> Result<Self> {
        let k = self.n_classes();
        let mut seen = vec![false; k];
        if perm.len() != k {
            return Err(PlcaError::Shape(format!(
                "permutation has length {}, expected {k}",
                perm.len()
            )));
        }
        for &p in perm {
            if p >= k || seen[p] {
                return Err(PlcaError::Validation(format!("{perm:?} is not a permutation")));
            }
            seen[p] = true;
        }
        let mixture = Array2::from_shape_fn(self.mixture.dim(), |(z, g)| self.mixture[[perm[z], g]]);
        let components =
            Array2::from_shape_fn(self.components.dim(), |(e, z)| self.components[[e, perm[z]]]);
        Ok(Self::from_parts(self.group_prior.clone(), mixture, components))
    }

    fn check_indices(&self, e: usize, g: usize) -> Result<()> {
        if e >= self.n_events() {
            return Err(PlcaError::Index {
                what: "event",
                index: e,
                size: self.n_events(),
            });
        }
        if g >= self.n_groups() {
            return Err(PlcaError::Index {
                what: "group",
                index: g,
                size: self.n_groups(),
            });
        }
        Ok(())
    }

    /// `sum_z P(e|z) P(z|g)` summed in ascending class order. Callers check
    /// indices.
    pub(crate) fn mix(&self, e: usize, g: usize) -> f64 {
        let mut acc = 0.0;
        for z in 0..self.n_classes() {
            acc += self.components[[e, z]] * self.mixture[[z, g]];
        }
        acc
    }

    /// `P(e, g) = P(g) * sum_z P(e|z) P(z|g)`
    pub fn joint_prob(&self, e: usize, g: usize) -> Result<f64> {
        self.check_indices(e, g)?;
        Ok(self.group_prior[g] * self.mix(e, g))
    }

    /// `P(e|g) = sum_z P(e|z) P(z|g)`
    pub fn conditional_e_given_g(&self, e: usize, g: usize) -> Result<f64> {
        self.check_indices(e, g)?;
        Ok(self.mix(e, g))
    }

    /// The full `M x N` joint table.
    pub fn joint_table(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.n_events(), self.n_groups()), |(e, g)| {
            self.group_prior[g] * self.mix(e, g)
        })
    }

    /// The full `M x N` table of `P(e|g)`.
    pub fn conditional_table(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.n_events(), self.n_groups()), |(e, g)| self.mix(e, g))
    }

    /// Responsibilities `P(z|e,g)` for every cell.
    ///
    /// A cell whose denominator `sum_z P(e|z) P(z|g)` is zero gets the
    /// uniform posterior `1/K` and is flagged degenerate.
    pub fn posterior(&self) -> PosteriorTable {
        let (m, n, k) = self.dims();
        let mut values = Array3::<f64>::zeros((k, m, n));
        let mut degenerate = Array2::from_elem((m, n), false);
        let mut num = vec![0.0; k];
        for g in 0..n {
            for e in 0..m {
                let mut denom = 0.0;
                for z in 0..k {
                    num[z] = self.components[[e, z]] * self.mixture[[z, g]];
                    denom += num[z];
                }
                if denom > 0.0 {
                    for z in 0..k {
                        values[[z, e, g]] = num[z] / denom;
                    }
                } else {
                    degenerate[[e, g]] = true;
                    for z in 0..k {
                        values[[z, e, g]] = 1.0 / k as f64;
                    }
                }
            }
        }
        PosteriorTable { values, degenerate }
    }
}

fn check_distribution(v: ArrayView1<'_, f64>, name: &str) -> Result<f64> {
    for (i, &x) in v.iter().enumerate() {
        if !x.is_finite() || x < 0.0 {
            return Err(PlcaError::InvariantViolation(format!(
                "{name}[{i}] = {x} is not a finite non-negative probability"
            )));
        }
    }
    let s: f64 = v.sum();
    if (s - 1.0).abs() > CONSTRUCTION_TOL {
        return Err(PlcaError::InvariantViolation(format!(
            "{name} sums to {s}, expected 1"
        )));
    }
    Ok(s)
}

/// Responsibilities `P_old(z|e,g)` stored as a `K x M x N` tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorTable {
    values: Array3<f64>,
    degenerate: Array2<bool>,
}

impl PosteriorTable {
    /// Wraps an externally computed tensor. Every `(e, g)` fibre must sum to
    /// one within `1e-10` and lie in `[0, 1]`.
    pub fn from_values(values: Array3<f64>) -> Result<Self> {
        let (k, m, n) = values.dim();
        for g in 0..n {
            for e in 0..m {
                let mut s = 0.0;
                for z in 0..k {
                    let v = values[[z, e, g]];
                    if !(0.0..=1.0).contains(&v) {
                        return Err(PlcaError::InvariantViolation(format!(
                            "posterior[{z}][{e}][{g}] = {v} outside [0, 1]"
                        )));
                    }
                    s += v;
                }
                if (s - 1.0).abs() > 1e-10 {
                    return Err(PlcaError::InvariantViolation(format!(
                        "posterior at ({e}, {g}) sums to {s}"
                    )));
                }
            }
        }
        Ok(Self {
            values,
            degenerate: Array2::from_elem((m, n), false),
        })
    }

    /// `values[[z, e, g]] = P(z|e,g)`
    pub fn values(&self) -> &Array3<f64> {
        &self.values
    }

    pub fn get(&self, z: usize, e: usize, g: usize) -> f64 {
        self.values[[z, e, g]]
    }

    pub fn is_degenerate(&self, e: usize, g: usize) -> bool {
        self.degenerate[[e, g]]
    }

    pub fn degenerate_count(&self) -> usize {
        self.degenerate.iter().filter(|&&d| d).count()
    }

    /// `(K, M, N)`
    pub fn dim(&self) -> (usize, usize, usize) {
        self.values.dim()
    }
}

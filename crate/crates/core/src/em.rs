//! EM fitting.
//!
//! The group prior is fixed to the empirical group marginal `pi(g)`; it is
//! the exact minimizer of the divergence in `P(g)` and never changes during
//! fitting. Each iteration computes responsibilities from the current
//! parameters and re-estimates
//!
//! ```text
//! P(e|z) = sum_g pi(e,g) post(z|e,g) / sum_{e',g} pi(e',g) post(z|e',g)
//! P(z|g) = sum_e pi(e,g) post(z|e,g) / sum_{z',e} pi(e,g) post(z'|e,g)
//! ```
//!
//! The loop stops once the objective changes by at most
//! `rel_tol * max(1, |fobj_prev|)` or after `max_iters` updates.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, Array3};

use crate::error::{PlcaError, Result};
use crate::model::PlcaModel;
use crate::objective::{fobj, kld, EmpiricalDistribution};
use crate::rng::PlcaRng;

/// Where the starting parameters come from.
#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    /// Columns of `P(e|z)` then columns of `P(z|g)` drawn from a symmetric
    /// Dirichlet(1) using the seeded stream.
    RandomDirichlet,
    /// Start from the given mixture and components. Its group prior is
    /// replaced by `pi(g)`.
    Provided(PlcaModel),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub k: usize,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub seed: u64,
    pub init: Init,
    /// Keep every iteration in the trace. When false only the last
    /// iteration is kept.
    pub record_trace: bool,
}

impl FitConfig {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            max_iters: 500,
            rel_tol: 1e-8,
            seed: 0,
            init: Init::RandomDirichlet,
            record_trace: true,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn with_init(mut self, init: Init) -> Self {
        self.init = init;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(PlcaError::Validation("k must be at least 1".into()));
        }
        if self.max_iters == 0 {
            return Err(PlcaError::Validation("max_iters must be at least 1".into()));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return Err(PlcaError::Validation(format!(
                "rel_tol must be positive and finite, got {}",
                self.rel_tol
            )));
        }
        if let Init::Provided(m) = &self.init {
            if m.n_classes() != self.k {
                return Err(PlcaError::Validation(format!(
                    "initial model has K={} but k={}",
                    m.n_classes(),
                    self.k
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIters,
    /// Every latent class lost all responsibility mass.
    Degenerate,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::MaxIters => "max-iters",
            Termination::Degenerate => "degenerate",
        }
    }
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Termination {
    type Err = PlcaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "converged" => Ok(Termination::Converged),
            "max-iters" => Ok(Termination::MaxIters),
            "degenerate" => Ok(Termination::Degenerate),
            other => Err(PlcaError::Schema(format!("unknown termination reason {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// 1-based count of EM updates applied.
    pub iter: usize,
    pub fobj: f64,
    pub kld: f64,
    /// Largest absolute change over `P(e|z)` and the `P(z|g)` columns of
    /// groups with positive mass.
    pub max_param_delta: f64,
    /// Milliseconds since the fit started.
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitTrace {
    /// `fobj` of the initial model, before any update.
    pub initial_fobj: f64,
    pub records: Vec<IterationRecord>,
    pub termination: Termination,
    /// `(iteration, class)` for every class whose responsibility mass hit
    /// zero and was reset.
    pub degenerate_events: Vec<(usize, usize)>,
}

impl FitTrace {
    pub fn iterations(&self) -> usize {
        self.records.last().map_or(0, |r| r.iter)
    }

    pub fn final_fobj(&self) -> f64 {
        self.records.last().map_or(self.initial_fobj, |r| r.fobj)
    }

    pub fn final_kld(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.kld)
    }
}

/// Starting parameters for [`fit`]. The group prior is `pi(g)` exactly.
pub fn init_model(pi: &EmpiricalDistribution, cfg: &FitConfig) -> Result<PlcaModel> {
    cfg.validate()?;
    let (m, n, k) = (pi.n_events(), pi.n_groups(), cfg.k);
    let prior = pi.group_marginal().clone();
    match &cfg.init {
        Init::RandomDirichlet => {
            let mut rng = PlcaRng::new(cfg.seed);
            let mut components = Array2::zeros((m, k));
            let mut buf = vec![0.0; m];
            for z in 0..k {
                rng.dirichlet_uniform(&mut buf);
                for e in 0..m {
                    components[[e, z]] = buf[e];
                }
            }
            let mut mixture = Array2::zeros((k, n));
            let mut buf = vec![0.0; k];
            for g in 0..n {
                rng.dirichlet_uniform(&mut buf);
                for z in 0..k {
                    mixture[[z, g]] = buf[z];
                }
            }
            Ok(PlcaModel::from_parts(prior, mixture, components))
        }
        Init::Provided(model) => {
            if model.n_events() != m || model.n_groups() != n {
                return Err(PlcaError::Shape(format!(
                    "initial model is {}x{}, data is {m}x{n}",
                    model.n_events(),
                    model.n_groups()
                )));
            }
            Ok(PlcaModel::from_parts(
                prior,
                model.mixture().clone(),
                model.components().clone(),
            ))
        }
    }
}

struct StepOutcome {
    model: PlcaModel,
    dead_classes: Vec<usize>,
}

fn update(pi: &EmpiricalDistribution, model: &PlcaModel) -> StepOutcome {
    let (m, n, k) = model.dims();
    let post = model.posterior();

    // weighted[z, e, g] = pi(e,g) * post(z|e,g)
    let weighted = Array3::from_shape_fn((k, m, n), |(z, e, g)| pi.get(e, g) * post.get(z, e, g));

    let mut comp_num = Array2::<f64>::zeros((m, k));
    let mut mix_num = Array2::<f64>::zeros((k, n));
    for z in 0..k {
        for e in 0..m {
            let mut s = 0.0;
            for g in 0..n {
                s += weighted[[z, e, g]];
            }
            comp_num[[e, z]] = s;
        }
        for g in 0..n {
            let mut s = 0.0;
            for e in 0..m {
                s += weighted[[z, e, g]];
            }
            mix_num[[z, g]] = s;
        }
    }

    let mut dead_classes = Vec::new();
    let mut components = Array2::<f64>::zeros((m, k));
    for z in 0..k {
        let mut mass = 0.0;
        for e in 0..m {
            mass += comp_num[[e, z]];
        }
        if mass > 0.0 {
            for e in 0..m {
                components[[e, z]] = comp_num[[e, z]] / mass;
            }
        } else {
            dead_classes.push(z);
            components.column_mut(z).fill(1.0 / m as f64);
        }
    }

    let mut mixture = Array2::<f64>::zeros((k, n));
    for g in 0..n {
        let mut mass = 0.0;
        for z in 0..k {
            mass += mix_num[[z, g]];
        }
        if mass > 0.0 {
            for z in 0..k {
                mixture[[z, g]] = mix_num[[z, g]] / mass;
            }
        } else {
            // empty group: 0/0 update, keep the previous column
            mixture.column_mut(g).assign(&model.mixture().column(g));
            if !dead_classes.is_empty() {
                for &z in &dead_classes {
                    mixture[[z, g]] = 0.0;
                }
                let s: f64 = mixture.column(g).sum();
                if s > 0.0 {
                    mixture.column_mut(g).mapv_inplace(|x| x / s);
                } else {
                    mixture.column_mut(g).fill(1.0 / k as f64);
                }
            }
        }
    }

    StepOutcome {
        model: PlcaModel::from_parts(model.group_prior().clone(), mixture, components),
        dead_classes,
    }
}

/// One EM update. The group prior is carried over unchanged.
pub fn em_step(pi: &EmpiricalDistribution, model: &PlcaModel) -> Result<PlcaModel> {
    pi.check_dims(model)?;
    Ok(update(pi, model).model)
}

/// Largest absolute parameter change, ignoring mixture columns of groups
/// with no empirical mass.
pub fn max_param_delta(pi: &EmpiricalDistribution, old: &PlcaModel, new: &PlcaModel) -> f64 {
    let mut delta: f64 = 0.0;
    for (a, b) in old.components().iter().zip(new.components().iter()) {
        delta = delta.max((a - b).abs());
    }
    for g in 0..pi.n_groups() {
        if pi.group_marginal()[g] == 0.0 {
            continue;
        }
        for z in 0..old.n_classes() {
            delta = delta.max((old.mixture()[[z, g]] - new.mixture()[[z, g]]).abs());
        }
    }
    delta
}

#[cfg(not(target_arch = "wasm32"))]
struct Stopwatch(std::time::Instant);

#[cfg(not(target_arch = "wasm32"))]
impl Stopwatch {
    fn start() -> Self {
        Self(std::time::Instant::now())
    }

    fn elapsed_ms(&self) -> f64 {
        self.0.elapsed().as_secs_f64() * 1e3
    }
}

// no monotonic clock on wasm32-unknown-unknown
#[cfg(target_arch = "wasm32")]
struct Stopwatch;

#[cfg(target_arch = "wasm32")]
impl Stopwatch {
    fn start() -> Self {
        Stopwatch
    }

    fn elapsed_ms(&self) -> f64 {
        0.0
    }
}

/// Runs EM from [`init_model`] until the relative objective change drops
/// below `cfg.rel_tol` or `cfg.max_iters` updates were applied.
pub fn fit(pi: &EmpiricalDistribution, cfg: &FitConfig) -> Result<(PlcaModel, FitTrace)> {
    let clock = Stopwatch::start();
    let mut model = init_model(pi, cfg)?;
    let initial_fobj = fobj(pi, &model)?;
    let mut prev = initial_fobj;
    let mut records = Vec::new();
    let mut degenerate_events = Vec::new();
    let mut termination = Termination::MaxIters;

    for iter in 1..=cfg.max_iters {
        let outcome = update(pi, &model);
        let f = fobj(pi, &outcome.model)?;
        let record = IterationRecord {
            iter,
            fobj: f,
            kld: kld(pi, &outcome.model)?,
            max_param_delta: max_param_delta(pi, &model, &outcome.model),
            wall_ms: clock.elapsed_ms(),
        };
        if !cfg.record_trace {
            records.clear();
        }
        records.push(record);
        let all_dead = outcome.dead_classes.len() == cfg.k;
        degenerate_events.extend(outcome.dead_classes.into_iter().map(|z| (iter, z)));
        model = outcome.model;

        if all_dead {
            termination = Termination::Degenerate;
            break;
        }
        if (f - prev).abs() <= cfg.rel_tol * prev.abs().max(1.0) {
            termination = Termination::Converged;
            break;
        }
        prev = f;
    }

    Ok((
        model,
        FitTrace {
            initial_fobj,
            records,
            termination,
            degenerate_events,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::build_empirical;
    use ndarray::array;

    fn pi_2x3() -> EmpiricalDistribution {
        build_empirical(&array![[1.0, 0.0, 2.0], [3.0, 1.0, 1.0]]).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(FitConfig::new(0).validate().is_err());
        assert!(FitConfig::new(2).with_max_iters(0).validate().is_err());
        assert!(FitConfig::new(2).with_rel_tol(0.0).validate().is_err());
        assert!(FitConfig::new(2).with_rel_tol(f64::NAN).validate().is_err());
        assert!(FitConfig::new(2).validate().is_ok());
    }

    #[test]
    fn init_is_seeded_and_uses_group_marginal() {
        let pi = pi_2x3();
        let cfg = FitConfig::new(2).with_seed(17);
        let a = init_model(&pi, &cfg).unwrap();
        let b = init_model(&pi, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.group_prior(), pi.group_marginal());
        assert_ne!(a, init_model(&pi, &cfg.clone().with_seed(18)).unwrap());
    }

    #[test]
    fn init_single_class() {
        let pi = pi_2x3();
        let m = init_model(&pi, &FitConfig::new(1)).unwrap();
        assert!(m.mixture().iter().all(|&x| x == 1.0));
        assert!((m.components().sum() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn provided_init_checks_shape() {
        let pi = pi_2x3();
        let wrong = PlcaModel::new(array![1.0], array![[1.0]], array![[0.5], [0.5]]).unwrap();
        let cfg = FitConfig::new(1).with_init(Init::Provided(wrong));
        assert!(matches!(init_model(&pi, &cfg), Err(PlcaError::Shape(_))));
    }

    #[test]
    fn single_class_step_gives_event_marginal() {
        let pi = pi_2x3();
        let m0 = init_model(&pi, &FitConfig::new(1).with_seed(3)).unwrap();
        let m1 = em_step(&pi, &m0).unwrap();
        let marginal = pi.event_marginal();
        for e in 0..2 {
            assert!((m1.components()[[e, 0]] - marginal[e]).abs() < 1e-15);
        }
        assert!(m1.mixture().iter().all(|&x| x == 1.0));
        let m2 = em_step(&pi, &m1).unwrap();
        assert!(max_param_delta(&pi, &m1, &m2) < 1e-15);
    }

    #[test]
    fn exact_model_is_fixed_point() {
        let pi = build_empirical(&array![[0.5, 0.0], [0.0, 0.5]]).unwrap();
        let m = PlcaModel::new(
            array![0.5, 0.5],
            array![[1.0, 0.0], [0.0, 1.0]],
            array![[1.0, 0.0], [0.0, 1.0]],
        )
        .unwrap();
        let next = em_step(&pi, &m).unwrap();
        assert!(max_param_delta(&pi, &m, &next) < 1e-12);
    }

    #[test]
    fn dead_class_is_reset() {
        // class 1 puts all its mass on an event with no empirical mass and
        // has zero weight where that event is impossible otherwise
        let pi = build_empirical(&array![[1.0, 1.0], [0.0, 0.0]]).unwrap();
        let m = PlcaModel::new(
            array![0.5, 0.5],
            array![[1.0, 1.0], [0.0, 0.0]],
            array![[1.0, 0.0], [0.0, 1.0]],
        )
        .unwrap();
        let outcome = update(&pi, &m);
        assert_eq!(outcome.dead_classes, vec![1]);
        let next = outcome.model;
        assert_eq!(next.components().column(1).to_vec(), vec![0.5, 0.5]);
        assert_eq!(next.mixture().row(1).to_vec(), vec![0.0, 0.0]);

        let cfg = FitConfig::new(2).with_init(Init::Provided(m));
        let (_, trace) = fit(&pi, &cfg).unwrap();
        assert_eq!(trace.degenerate_events.first(), Some(&(1, 1)));
        assert_eq!(trace.termination, Termination::Converged);
    }

    #[test]
    fn empty_group_column_is_kept() {
        let pi = build_empirical(&array![[1.0, 0.0, 2.0], [3.0, 0.0, 1.0]]).unwrap();
        let m0 = init_model(&pi, &FitConfig::new(2).with_seed(1)).unwrap();
        let m1 = em_step(&pi, &m0).unwrap();
        assert_eq!(m1.mixture().column(1), m0.mixture().column(1));
    }

    #[test]
    fn shape_mismatch() {
        let pi = pi_2x3();
        let m = PlcaModel::new(array![1.0], array![[1.0]], array![[0.5], [0.5]]).unwrap();
        assert!(matches!(em_step(&pi, &m), Err(PlcaError::Shape(_))));
    }

    #[test]
    fn trace_bookkeeping() {
        let pi = pi_2x3();
        let (_, full) = fit(&pi, &FitConfig::new(2).with_seed(4)).unwrap();
        assert!(!full.records.is_empty());
        for (i, r) in full.records.iter().enumerate() {
            assert_eq!(r.iter, i + 1);
        }
        let mut cfg = FitConfig::new(2).with_seed(4);
        cfg.record_trace = false;
        let (_, last) = fit(&pi, &cfg).unwrap();
        assert_eq!(last.records.len(), 1);
        assert_eq!(last.records[0].fobj, full.final_fobj());

        let (_, one) = fit(&pi, &FitConfig::new(2).with_max_iters(1)).unwrap();
        assert_eq!(one.records.len(), 1);
        assert_eq!(one.termination, Termination::MaxIters);
    }

    #[test]
    fn termination_strings_round_trip() {
        for t in [Termination::Converged, Termination::MaxIters, Termination::Degenerate] {
            assert_eq!(t.as_str().parse::<Termination>().unwrap(), t);
        }
        assert!("stopped".parse::<Termination>().is_err());
    }
}

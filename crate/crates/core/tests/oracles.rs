//! Frozen hand-computed values and statistical oracles.

use ndarray::{array, Array1, Array2};
use plca::em::max_param_delta;
use plca::rng::PlcaRng;
use plca::sampler::sample_triples;
use plca::*;

// pi, P(z|g) and P(e|z) of the 2x2, K=2 hand instance
fn hand_instance() -> (EmpiricalDistribution, PlcaModel) {
    let pi = build_empirical(&array![[0.1, 0.2], [0.3, 0.4]]).unwrap();
    let model = PlcaModel::new(
        array![0.4, 0.6],
        array![[0.3, 0.6], [0.7, 0.4]],
        array![[0.25, 0.8], [0.75, 0.2]],
    )
    .unwrap();
    (pi, model)
}

// Values computed with exact rational arithmetic in a standalone script.
const POSTERIOR: [((usize, usize, usize), f64); 8] = [
    ((0, 0, 0), 0.11811023622047244),
    ((1, 0, 0), 0.8818897637795275),
    ((0, 0, 1), 0.3191489361702128),
    ((1, 0, 1), 0.6808510638297872),
    ((0, 1, 0), 0.6164383561643836),
    ((1, 1, 0), 0.3835616438356164),
    ((0, 1, 1), 0.8490566037735849),
    ((1, 1, 1), 0.1509433962264151),
];
const NEW_COMPONENTS: [[f64; 2]; 2] = [
    [0.12602706786315127, 0.5611714867408879],
    [0.8739729321368488, 0.43882851325911215],
];
const NEW_MIXTURE: [[f64; 2]; 2] = [
    [0.4918563261784058, 0.6724207145724609],
    [0.5081436738215942, 0.32757928542753917],
];
const Q_AT_SELF: f64 = -1.2837568246981839;
const FOBJ_OLD: f64 = 0.7527262314588326;
const FOBJ_NEW: f64 = 0.6217509594844741;

#[test]
fn hand_posterior() {
    let (_, model) = hand_instance();
    let post = model.posterior();
    for ((z, e, g), want) in POSTERIOR {
        assert!((post.get(z, e, g) - want).abs() < 1e-15, "post[{z}][{e}][{g}]");
    }
}

#[test]
fn hand_em_step() {
    let (pi, model) = hand_instance();
    let next = em_step(&pi, &model).unwrap();
    for e in 0..2 {
        for z in 0..2 {
            assert!((next.components()[[e, z]] - NEW_COMPONENTS[e][z]).abs() < 1e-12);
        }
    }
    for z in 0..2 {
        for g in 0..2 {
            assert!((next.mixture()[[z, g]] - NEW_MIXTURE[z][g]).abs() < 1e-12);
        }
    }
    assert_eq!(next.group_prior(), model.group_prior());
    assert!((fobj(&pi, &model).unwrap() - FOBJ_OLD).abs() < 1e-12);
    assert!((fobj(&pi, &next).unwrap() - FOBJ_NEW).abs() < 1e-12);
}

#[test]
fn hand_q_function() {
    let (pi, model) = hand_instance();
    let q = q_function(&pi, &model.posterior(), &model).unwrap();
    assert!((q - Q_AT_SELF).abs() < 1e-12);

    // cell-by-cell brute force
    let post = model.posterior();
    let mut brute = 0.0;
    for e in 0..2 {
        for g in 0..2 {
            for z in 0..2 {
                let joint = model.components()[[e, z]] * model.mixture()[[z, g]];
                brute += pi.get(e, g) * post.get(z, e, g) * joint.ln();
            }
        }
    }
    assert!((q - brute).abs() < 1e-12);
}

#[test]
fn planted_disjoint_model_is_recovered() {
    // two classes with disjoint event supports; groups 0 and 3 are pure so
    // the factorization is identifiable
    let components = array![[0.5, 0.0], [0.3, 0.0], [0.2, 0.0], [0.0, 0.6], [0.0, 0.4]];
    let mixture = array![[1.0, 0.5, 0.2, 0.0], [0.0, 0.5, 0.8, 1.0]];
    let planted = PlcaModel::new(Array1::from_elem(4, 0.25), mixture, components).unwrap();
    let pi = build_empirical(&planted.joint_table()).unwrap();

    let cfg = FitConfig::new(2).with_rel_tol(1e-14).with_max_iters(5000);
    let (fitted, _, _) = plca::cli::fit_restarts(&pi, &cfg, 5).unwrap();
    assert!(kld(&pi, &fitted).unwrap() <= 1e-8);

    let direct = max_abs(fitted.components(), planted.components());
    let swapped = max_abs(
        fitted.permute_classes(&[1, 0]).unwrap().components(),
        planted.components(),
    );
    assert!(direct.min(swapped) < 1e-4);
}

fn max_abs(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn single_class_closed_form() {
    let pi = build_empirical(&array![[1.0, 5.0, 2.0], [0.0, 3.0, 1.0], [4.0, 1.0, 1.0]]).unwrap();
    let (model, trace) = fit(&pi, &FitConfig::new(1).with_seed(8)).unwrap();
    assert!(trace.iterations() <= 2);
    assert_eq!(trace.termination, Termination::Converged);
    let marginal = pi.event_marginal();
    for e in 0..3 {
        assert!((model.components()[[e, 0]] - marginal[e]).abs() < 1e-12);
    }
    assert!(model.mixture().iter().all(|&x| x == 1.0));
}

#[test]
fn fit_is_deterministic() {
    let pi = build_empirical(&array![[1.0, 5.0, 2.0], [0.0, 3.0, 1.0], [4.0, 1.0, 1.0]]).unwrap();
    let cfg = FitConfig::new(2).with_seed(99);
    let (m1, t1) = fit(&pi, &cfg).unwrap();
    let (m2, t2) = fit(&pi, &cfg).unwrap();
    assert_eq!(m1, m2);
    let strip = |t: &FitTrace| {
        t.records
            .iter()
            .map(|r| (r.iter, r.fobj.to_bits(), r.kld.to_bits(), r.max_param_delta.to_bits()))
            .collect::<Vec<_>>()
    };
    assert_eq!(strip(&t1), strip(&t2));
}

#[test]
fn stationary_model_stays_put() {
    // a model whose joint equals pi exactly
    let model = PlcaModel::new(
        array![0.3, 0.7],
        array![[0.2, 0.9], [0.8, 0.1]],
        array![[0.6, 0.1], [0.4, 0.3], [0.0, 0.6]],
    )
    .unwrap();
    let pi = build_empirical(&model.joint_table()).unwrap();
    let start = model.with_group_prior(pi.group_marginal().clone()).unwrap();
    let next = em_step(&pi, &start).unwrap();
    assert!(max_param_delta(&pi, &start, &next) < 1e-12);
}

fn hand_model() -> PlcaModel {
    PlcaModel::new(
        array![0.5, 0.5],
        array![[1.0, 0.0], [0.0, 1.0]],
        array![[0.9, 0.2], [0.1, 0.8]],
    )
    .unwrap()
}

#[test]
fn sampler_reproduces_joint() {
    let model = hand_model();
    let n = 1_000_000;
    let corpus = sample_corpus(&model, n, 2718).unwrap();
    let counts = corpus_to_counts(&corpus, (2, 2)).unwrap();
    for e in 0..2 {
        for g in 0..2 {
            let p = model.joint_prob(e, g).unwrap();
            let freq = counts[[e, g]] / n as f64;
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((freq - p).abs() <= 4.0 * se, "cell ({e},{g}): {freq} vs {p}");
        }
    }
}

#[test]
fn sampler_group_marginal() {
    let model = PlcaModel::new(
        array![0.1, 0.3, 0.6],
        array![[0.5, 0.2, 1.0], [0.5, 0.8, 0.0]],
        array![[0.7, 0.1], [0.3, 0.9]],
    )
    .unwrap();
    let n = 200_000;
    let corpus = sample_corpus(&model, n, 77).unwrap();
    let mut groups = [0usize; 3];
    for &(_, g) in corpus.pairs() {
        groups[g] += 1;
    }
    for g in 0..3 {
        let p = model.group_prior()[g];
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((groups[g] as f64 / n as f64 - p).abs() <= 4.0 * se);
    }
}

#[test]
fn latent_index_follows_mixture() {
    let model = PlcaModel::new(
        array![0.4, 0.6],
        array![[0.7, 0.2], [0.3, 0.8]],
        array![[0.9, 0.2], [0.1, 0.8]],
    )
    .unwrap();
    let n = 200_000;
    let draws = sample_triples(&model, n, 5);
    let mut zg = [[0usize; 2]; 2];
    let mut per_g = [0usize; 2];
    for &(_, g, z) in &draws {
        zg[z][g] += 1;
        per_g[g] += 1;
    }
    for g in 0..2 {
        for z in 0..2 {
            let p = model.mixture()[[z, g]];
            let ng = per_g[g] as f64;
            let se = (p * (1.0 - p) / ng).sqrt();
            assert!((zg[z][g] as f64 / ng - p).abs() <= 4.0 * se);
        }
    }
}

#[test]
fn empirical_converges_to_model_joint() {
    let model = PlcaModel::new(
        array![0.2, 0.3, 0.5],
        array![[0.6, 0.1, 0.4], [0.4, 0.9, 0.6]],
        array![[0.5, 0.1], [0.3, 0.2], [0.2, 0.7]],
    )
    .unwrap();
    let mut prev = f64::INFINITY;
    for (n, seed) in [(100, 1), (10_000, 2), (1_000_000, 3)] {
        let corpus = sample_corpus(&model, n, seed).unwrap();
        let pi = build_empirical(&corpus_to_counts(&corpus, (3, 3)).unwrap()).unwrap();
        let d = kld(&pi, &model).unwrap();
        assert!(d < prev, "kld did not decrease at n={n}: {d} >= {prev}");
        prev = d;
    }
}

#[test]
fn fitting_sampled_data_from_truth_improves_divergence() {
    let truth = PlcaModel::new(
        array![0.25, 0.25, 0.5],
        array![[0.8, 0.3, 0.1], [0.2, 0.7, 0.9]],
        array![[0.5, 0.05], [0.3, 0.15], [0.15, 0.3], [0.05, 0.5]],
    )
    .unwrap();
    let corpus = sample_corpus(&truth, 1_000_000, 31).unwrap();
    let pi = build_empirical(&corpus_to_counts(&corpus, (4, 3)).unwrap()).unwrap();
    let cfg = FitConfig::new(2).with_init(Init::Provided(truth.clone()));
    let (fitted, _) = fit(&pi, &cfg).unwrap();
    assert!(kld(&pi, &fitted).unwrap() <= kld(&pi, &truth).unwrap() + 1e-10);
}

#[test]
fn grid_oracle_bounds_fit_on_tiny_instances() {
    let mut rng = PlcaRng::new(606);
    for _ in 0..4 {
        let raw = Array2::from_shape_fn((2, 2), |_| rng.uniform() + 0.01);
        let pi = build_empirical(&raw).unwrap();
        for k in 1..=2 {
            let (_, trace) = fit(&pi, &FitConfig::new(k).with_seed(k as u64)).unwrap();
            let (_, grid) = plca::reference::grid_search_fobj(&pi, k, 200).unwrap();
            assert!(trace.final_fobj() <= grid + 1e-4, "k={k}: {} vs {grid}", trace.final_fobj());
        }
    }
}

//! Brute-force oracles.
//!
//! These deliberately avoid the code paths in [`crate::objective`] and
//! [`crate::em`] so they can cross-check them: plain nested loops with
//! naive summation, and exhaustive search over simplex lattices.

use ndarray::{Array1, Array2};

use crate::error::{PlcaError, Result};
use crate::model::PlcaModel;
use crate::objective::EmpiricalDistribution;

/// Upper bound on the number of lattice evaluations [`grid_search_fobj`]
/// will attempt.
pub const GRID_LIMIT: u128 = 10_000_000;

/// `fobj` by triple nested loops (events, groups, classes) with naive
/// summation.
pub fn naive_fobj(pi: &EmpiricalDistribution, model: &PlcaModel) -> Result<f64> {
    let (m, n, k) = model.dims();
    if pi.n_events() != m || pi.n_groups() != n {
        return Err(PlcaError::Shape(format!(
            "empirical distribution is {}x{}, model is {m}x{n}",
            pi.n_events(),
            pi.n_groups()
        )));
    }
    let mut total = 0.0;
    for e in 0..m {
        for g in 0..n {
            let p = pi.get(e, g);
            if p == 0.0 {
                continue;
            }
            let mut s = 0.0;
            for z in 0..k {
                s += model.components()[[e, z]] * model.mixture()[[z, g]];
            }
            total -= p * s.ln();
        }
    }
    Ok(total)
}

/// All points `c / resolution` with non-negative integer `c` summing to
/// `resolution`, in lexicographic order of `c`.
pub fn simplex_lattice(dim: usize, resolution: usize) -> Vec<Vec<f64>> {
    fn rec(dim: usize, left: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() + 1 == dim {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for c in 0..=left {
            prefix.push(c);
            rec(dim, left - c, prefix, out);
            prefix.pop();
        }
    }
    if dim == 0 {
        return Vec::new();
    }
    let mut counts = Vec::new();
    rec(dim, resolution, &mut Vec::with_capacity(dim), &mut counts);
    let r = resolution as f64;
    counts
        .into_iter()
        .map(|c| c.into_iter().map(|x| x as f64 / r).collect())
        .collect()
}

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n.saturating_sub(k));
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul(n - i) {
            Some(v) => v / (i + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Number of simplex lattice points in `dim` coordinates.
fn lattice_size(dim: usize, resolution: usize) -> u128 {
    binomial((resolution + dim - 1) as u128, (dim - 1) as u128)
}

/// Objective evaluations performed by [`grid_search_fobj`]: unordered
/// `K`-tuples of component columns times, per group, every mixture column.
pub fn grid_evaluations(m: usize, n: usize, k: usize, resolution: usize) -> u128 {
    let comp = lattice_size(m, resolution);
    let tuples = binomial(comp.saturating_add(k as u128 - 1), k as u128);
    let per_group = lattice_size(k, resolution);
    tuples
        .saturating_mul(n as u128)
        .saturating_mul(per_group)
}

/// Exhaustive minimization of `fobj` over column-stochastic parameters on
/// the simplex lattice with step `1 / resolution`.
///
/// Two reductions keep this exact while shrinking the search: `fobj`
/// separates over groups once the components are fixed, so each mixture
/// column is minimized on its own; and relabelling classes leaves `fobj`
/// unchanged, so only non-decreasing tuples of component lattice indices
/// are visited. Ties resolve to the first point in lexicographic order.
pub fn grid_search_fobj(
    pi: &EmpiricalDistribution,
    k: usize,
    resolution: usize,
) -> Result<(PlcaModel, f64)> {
    if k == 0 {
        return Err(PlcaError::Domain("k must be at least 1".into()));
    }
    if resolution == 0 {
        return Err(PlcaError::Domain("resolution must be at least 1".into()));
    }
    let (m, n) = (pi.n_events(), pi.n_groups());
    let points = grid_evaluations(m, n, k, resolution);
    if points > GRID_LIMIT {
        return Err(PlcaError::SearchSpaceTooLarge {
            points,
            limit: GRID_LIMIT,
        });
    }

    let comp_lattice = simplex_lattice(m, resolution);
    let mix_lattice = simplex_lattice(k, resolution);

    let mut tuple = vec![0usize; k];
    let mut best_total = f64::INFINITY;
    let mut best: Option<(Vec<usize>, Vec<usize>)> = None;
    let mut mix_choice = vec![0usize; n];
    let mut mixed = vec![0.0; m];

    loop {
        let mut total = 0.0;
        for g in 0..n {
            let mut best_g = f64::INFINITY;
            let mut arg_g = 0;
            for (w, weights) in mix_lattice.iter().enumerate() {
                for e in 0..m {
                    let mut s = 0.0;
                    for z in 0..k {
                        s += comp_lattice[tuple[z]][e] * weights[z];
                    }
                    mixed[e] = s;
                }
                let mut val = 0.0;
                for e in 0..m {
                    let p = pi.get(e, g);
                    if p > 0.0 {
                        val -= p * mixed[e].ln();
                    }
                }
                if val < best_g {
                    best_g = val;
                    arg_g = w;
                }
            }
            mix_choice[g] = arg_g;
            total += best_g;
        }
        if best.is_none() || total < best_total {
            best_total = total;
            best = Some((tuple.clone(), mix_choice.clone()));
        }

        // next non-decreasing tuple in lexicographic order
        let mut pos = k;
        while pos > 0 && tuple[pos - 1] == comp_lattice.len() - 1 {
            pos -= 1;
        }
        if pos == 0 {
            break;
        }
        tuple[pos - 1] += 1;
        let v = tuple[pos - 1];
        for t in tuple.iter_mut().skip(pos) {
            *t = v;
        }
    }

    let (tuple, choice) = best.expect("lattice is never empty");
    let components = Array2::from_shape_fn((m, k), |(e, z)| comp_lattice[tuple[z]][e]);
    let mixture = Array2::from_shape_fn((k, n), |(z, g)| mix_lattice[choice[g]][z]);
    let prior: Array1<f64> = pi.group_marginal().clone();
    let model = PlcaModel::new(prior, mixture, components)?;
    let value = naive_fobj(pi, &model)?;
    Ok((model, value))
}

#![allow(dead_code)]

use ndarray::{array, Array2};
use plca::PlcaModel;

/// 8 events x 8 groups, two classes with disjoint event supports (events
/// 0-3 and 4-7). Groups 0 and 7 are pure, which makes the factorization
/// identifiable.
pub fn planted_8x8() -> PlcaModel {
    let comp0 = [0.4, 0.3, 0.2, 0.1, 0.0, 0.0, 0.0, 0.0];
    let comp1 = [0.0, 0.0, 0.0, 0.0, 0.1, 0.2, 0.3, 0.4];
    let w0 = [1.0, 0.8, 0.6, 0.5, 0.4, 0.3, 0.1, 0.0];
    let components = Array2::from_shape_fn((8, 2), |(e, z)| if z == 0 { comp0[e] } else { comp1[e] });
    let mixture = Array2::from_shape_fn((2, 8), |(z, g)| if z == 0 { w0[g] } else { 1.0 - w0[g] });
    let prior = array![0.1, 0.15, 0.1, 0.15, 0.1, 0.15, 0.1, 0.15];
    PlcaModel::new(prior, mixture, components).unwrap()
}

/// The planted joint scaled to a count-like total of 1000.
pub fn planted_raw() -> Array2<f64> {
    planted_8x8().joint_table() * 1000.0
}

pub fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Smallest max-abs difference between `fitted` components and `planted`
/// components over the two labelings of a K=2 model.
pub fn component_error_k2(fitted: &PlcaModel, planted: &PlcaModel) -> f64 {
    let direct = max_abs_diff(fitted.components(), planted.components());
    let swapped = max_abs_diff(
        fitted.permute_classes(&[1, 0]).unwrap().components(),
        planted.components(),
    );
    direct.min(swapped)
}

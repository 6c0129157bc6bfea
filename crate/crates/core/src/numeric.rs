/// Pairwise (cascade) summation with a fixed reduction tree, so results do
/// not depend on how callers partition work.
pub(crate) fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// `sum_i w_i * y_i`, reusing `scratch` for the products.
pub(crate) fn weighted_sum(weights: &[f64], ys: &[f64], scratch: &mut Vec<f64>) -> f64 {
    scratch.clear();
    scratch.extend(weights.iter().zip(ys).map(|(w, y)| w * y));
    pairwise_sum(scratch)
}

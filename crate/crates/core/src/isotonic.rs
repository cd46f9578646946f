//! Weighted pool-adjacent-violators.

/// Projects `values` onto the cone of non-decreasing sequences under the
/// weighted squared norm `sum_j weights[j] * (v_j - values[j])^2`.
///
/// Weights must be strictly positive. The output is exactly non-decreasing in
/// floating point: adjacent blocks are merged until their means are ordered.
pub fn isotonic_projection(values: &[f64], weights: &[f64]) -> Vec<f64> {
    assert_eq!(values.len(), weights.len(), "values/weights length mismatch");
    // (weighted mean, total weight, count)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (&v, &w) in values.iter().zip(weights) {
        let mut cur = (v, w, 1usize);
        while let Some(&(prev_mean, prev_w, prev_n)) = blocks.last() {
            if prev_mean <= cur.0 {
                break;
            }
            blocks.pop();
            let total = prev_w + cur.1;
            cur = ((prev_mean * prev_w + cur.0 * cur.1) / total, total, prev_n + cur.2);
        }
        blocks.push(cur);
    }
    let mut out = Vec::with_capacity(values.len());
    for (mean, _, n) in blocks {
        out.extend(std::iter::repeat_n(mean, n));
    }
    out
}

/// Euclidean projection onto `{w >= 0, sum(w) = total}` by sorting and
/// thresholding. The output is renormalized last so its sum is `total` up
/// to one rounding.
pub fn project_scaled_simplex(v: &[f64], total: f64) -> Vec<f64> {
    if v.is_empty() {
        return Vec::new();
    }
    if total <= 0.0 {
        return vec![0.0; v.len()];
    }
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - total) / (j + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    let mut w: Vec<f64> = v.iter().map(|&x| (x - theta).max(0.0)).collect();
    let s: f64 = w.iter().sum();
    if s > 0.0 {
        w.iter_mut().for_each(|x| *x *= total / s);
    } else {
        // All mass rounded away: fall back to the largest coordinate.
        let best = v
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i)
            .unwrap_or(0);
        w[best] = total;
    }
    w
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    project_scaled_simplex(v, 1.0)
}

/// Componentwise clamp onto `[a_l, b_l]`.
pub fn project_box(v: &[f64], bounds: &[(f64, f64)]) -> Vec<f64> {
    assert_eq!(v.len(), bounds.len(), "box dimension mismatch");
    v.iter().zip(bounds).map(|(&x, &(a, b))| x.clamp(a, b)).collect()
}

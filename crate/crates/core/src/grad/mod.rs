//! Reverse-mode differentiation, projections and first-order optimizers.

mod optim;
mod projection;
mod tape;

pub use optim::{Method, OptimizerState};
pub use projection::{project_box, project_scaled_simplex, project_simplex};
pub use tape::{Gradients, Tape, Tensor, Var};

/// Central differences of `f` at `point` with step `h`.
pub fn central_differences(f: impl Fn(&[f64]) -> f64, point: &[f64], h: f64) -> Vec<f64> {
    let mut x = point.to_vec();
    (0..point.len())
        .map(|i| {
            x[i] = point[i] + h;
            let up = f(&x);
            x[i] = point[i] - h;
            let down = f(&x);
            x[i] = point[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `max_i |ad_i - fd_i| / max(1, |fd_i|)`.
pub fn max_relative_error(ad: &[f64], fd: &[f64]) -> f64 {
    assert_eq!(ad.len(), fd.len());
    ad.iter()
        .zip(fd)
        .map(|(a, f)| (a - f).abs() / f.abs().max(1.0))
        .fold(0.0, f64::max)
}

/// Compares the tape gradient of `f` against central differences.
///
/// `f` records a scalar function of one `n x 1` leaf on the given tape.
/// Returns the maximum relative error over coordinates.
pub fn finite_diff_check<F>(f: F, point: &[f64], h: f64) -> f64
where
    F: Fn(&mut Tape, Var) -> Var,
{
    let mut tape = Tape::new();
    let x = tape.leaf(Tensor::column(point.to_vec()));
    let y = f(&mut tape, x);
    let ad = tape
        .backward(y)
        .expect("finite_diff_check needs a scalar function")
        .wrt(&tape, x)
        .into_data();
    let value = |p: &[f64]| {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::column(p.to_vec()));
        let y = f(&mut t, x);
        t.value(y).item()
    };
    let fd = central_differences(value, point, h);
    max_relative_error(&ad, &fd)
}

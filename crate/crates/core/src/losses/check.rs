use ndarray::Array3;

use super::Objective;
use crate::embedspace::{EmbeddingSet, Labeling};
use crate::error::Result;

/// Central differences `(L(z + h·e) − L(z − h·e)) / 2h` for every coordinate.
pub fn central_difference_gradient(
    objective: &Objective,
    set: &EmbeddingSet,
    labeling: Option<&Labeling>,
    h: f64,
) -> Result<Array3<f64>> {
    let mut data = set.data().clone();
    let mut out = Array3::<f64>::zeros(data.dim());
    for (idx, g) in out.indexed_iter_mut() {
        let x = data[idx];
        data[idx] = x + h;
        let up = objective.value(&set.with_data(data.clone())?, labeling)?;
        data[idx] = x - h;
        let down = objective.value(&set.with_data(data.clone())?, labeling)?;
        data[idx] = x;
        *g = (up - down) / (2.0 * h);
    }
    Ok(out)
}

/// `max |a − f| / max(|a|, |f|, floor)` with `floor = 1e-2·max|f|`.
///
/// The floor keeps coordinates whose true derivative is near zero from
/// turning round-off into a large relative error.
pub fn max_relative_error(analytic: &Array3<f64>, numeric: &Array3<f64>) -> f64 {
    let scale = numeric.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let floor = (1e-2 * scale).max(f64::MIN_POSITIVE);
    analytic
        .iter()
        .zip(numeric.iter())
        .map(|(a, f)| (a - f).abs() / a.abs().max(f.abs()).max(floor))
        .fold(0.0, f64::max)
}

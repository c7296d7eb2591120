use ndarray::{Array2, ArrayView2, Axis};

use crate::embedspace::EmbeddingSet;
use crate::error::{Error, Result};

fn check_pair(a: &EmbeddingSet, b: &EmbeddingSet) -> Result<()> {
    if a.n_samples() != b.n_samples() || a.n_augs() != b.n_augs() {
        return Err(Error::InvalidShape(format!(
            "similarity needs matching N and K; got ({}, {}) vs ({}, {})",
            a.n_samples(),
            a.n_augs(),
            b.n_samples(),
            b.n_augs()
        )));
    }
    Ok(())
}

fn centered(x: ArrayView2<f64>) -> Array2<f64> {
    let mean = x.mean_axis(Axis(0)).expect("non-empty rows");
    &x - &mean
}

/// Linear CKA over the `N·K` flattened rows:
/// `‖XᵀY‖²_F / (‖XᵀX‖_F ‖YᵀY‖_F)` after column centering.
pub fn cka(a: &EmbeddingSet, b: &EmbeddingSet) -> Result<f64> {
    check_pair(a, b)?;
    let x = centered(a.flat());
    let y = centered(b.flat());
    let fro2 = |m: Array2<f64>| m.iter().map(|v| v * v).sum::<f64>();
    let xy = fro2(x.t().dot(&y));
    let xx = fro2(x.t().dot(&x)).sqrt();
    let yy = fro2(y.t().dot(&y)).sqrt();
    if xx == 0.0 || yy == 0.0 {
        return Err(Error::UndefinedSimilarity(
            "representation has zero variance".into(),
        ));
    }
    Ok((xy / (xx * yy)).clamp(0.0, 1.0))
}

fn upper_distances(x: ArrayView2<f64>) -> Vec<f64> {
    let m = x.nrows();
    let mut out = Vec::with_capacity(m * (m - 1) / 2);
    for i in 0..m {
        for j in i + 1..m {
            let d2: f64 = x
                .row(i)
                .iter()
                .zip(x.row(j))
                .map(|(p, q)| (p - q) * (p - q))
                .sum();
            out.push(d2.sqrt());
        }
    }
    out
}

/// Ranks starting at 1, ties sharing their average rank.
fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&p, &q| v[p].total_cmp(&v[q]));
    let mut ranks = vec![0.0; v.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && v[idx[end]] == v[idx[start]] {
            end += 1;
        }
        let r = (start + end + 1) as f64 / 2.0;
        for &p in &idx[start..end] {
            ranks[p] = r;
        }
        start = end;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    (sxx > 0.0 && syy > 0.0).then(|| (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman correlation between the upper triangles of the two Euclidean
/// distance matrices.
pub fn rsa(a: &EmbeddingSet, b: &EmbeddingSet) -> Result<f64> {
    check_pair(a, b)?;
    let da = upper_distances(a.flat());
    let db = upper_distances(b.flat());
    if da.len() < 2 {
        return Err(Error::UndefinedSimilarity(
            "need at least three rows for a rank correlation".into(),
        ));
    }
    pearson(&average_ranks(&da), &average_ranks(&db))
        .ok_or_else(|| Error::UndefinedSimilarity("distance matrix has zero variance".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedspace::generate_random_unit;
    use ndarray::Array3;

    #[test]
    fn ranks_average_ties() {
        assert_eq!(
            average_ranks(&[3.0, 1.0, 3.0, 2.0]),
            vec![3.5, 1.0, 3.5, 2.0]
        );
    }

    #[test]
    fn self_similarity() {
        let a = generate_random_unit(20, 2, 6, 3).unwrap();
        assert!((cka(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        assert!((rsa(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_representation_is_undefined() {
        let a = generate_random_unit(5, 1, 3, 3).unwrap();
        let b = EmbeddingSet::new(Array3::from_elem((5, 1, 3), 1.0)).unwrap();
        assert!(matches!(cka(&a, &b), Err(Error::UndefinedSimilarity(_))));
        assert!(matches!(rsa(&a, &b), Err(Error::UndefinedSimilarity(_))));
    }

    #[test]
    fn shape_mismatch() {
        let a = generate_random_unit(5, 1, 3, 3).unwrap();
        let b = generate_random_unit(5, 2, 3, 3).unwrap();
        assert!(matches!(cka(&a, &b), Err(Error::InvalidShape(_))));
    }
}

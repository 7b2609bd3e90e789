use numcore::Tensor;
use scenegen::DensityMap;

use crate::error::{invalid, EvalError, Result};

/// Integral of `map` over `roi` (a 0/1 tensor of the map's shape), or over
/// the whole image when `roi` is `None`.
pub fn count_from_density(map: &DensityMap, roi: Option<&Tensor>) -> Result<f64> {
    let Some(roi) = roi else {
        return Ok(map.count());
    };
    if roi.shape() != map.values().shape() {
        return invalid(format!(
            "roi shape {:?} does not match density shape {:?}",
            roi.shape(),
            map.values().shape()
        ));
    }
    if roi.data().iter().any(|&v| v != 0.0 && v != 1.0) {
        return invalid("roi must be binary");
    }
    Ok(map
        .values()
        .data()
        .iter()
        .zip(roi.data())
        .filter(|(_, &r)| r == 1.0)
        .map(|(v, _)| v)
        .sum())
}

/// Mean absolute error over `(true, estimated)` count pairs.
pub fn mae(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.is_empty() {
        return invalid("mae of an empty list");
    }
    Ok(pairs.iter().map(|(z, e)| (z - e).abs()).sum::<f64>() / pairs.len() as f64)
}

/// Root mean squared error over `(true, estimated)` count pairs.
pub fn rmse(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.is_empty() {
        return invalid("rmse of an empty list");
    }
    let ms = pairs.iter().map(|(z, e)| (z - e).powi(2)).sum::<f64>() / pairs.len() as f64;
    Ok(ms.sqrt())
}

fn is_constant(v: &[f64]) -> bool {
    v.iter().all(|&x| x == v[0])
}

/// Pearson correlation coefficient of two equally long samples.
pub fn pearson_r(a: &[f64], u: &[f64]) -> Result<f64> {
    if a.len() != u.len() {
        return invalid(format!("sample lengths differ: {} vs {}", a.len(), u.len()));
    }
    if a.len() < 2 {
        return invalid("pearson_r needs at least two samples");
    }
    if a.iter().chain(u).any(|v| !v.is_finite()) {
        return invalid("pearson_r on non-finite samples");
    }
    if is_constant(a) || is_constant(u) {
        return Err(EvalError::UndefinedCorrelation("constant sample".into()));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mu = u.iter().sum::<f64>() / n;
    let (mut cov, mut va, mut vu) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(u) {
        let (dx, dy) = (x - ma, y - mu);
        cov += dx * dy;
        va += dx * dx;
        vu += dy * dy;
    }
    let denom = va.sqrt() * vu.sqrt();
    if denom == 0.0 {
        return Err(EvalError::UndefinedCorrelation("zero variance".into()));
    }
    // Rounding can push |r| a hair past 1 for perfectly correlated samples.
    Ok((cov / denom).clamp(-1.0, 1.0))
}

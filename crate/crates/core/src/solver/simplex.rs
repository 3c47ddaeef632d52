use crate::error::{Error, Result};
use crate::metrics::WeightVector;

/// Euclidean projection onto the probability simplex (sorted-threshold method).
pub fn simplex_repair(raw: &[f64]) -> Result<WeightVector> {
    Ok(WeightVector::new(project(raw)?).expect("projection lands on the simplex"))
}

pub(crate) fn project(raw: &[f64]) -> Result<Vec<f64>> {
    if raw.is_empty() {
        return Err(Error::InvalidWeights("empty vector".into()));
    }
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    let mut sorted = raw.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let candidate = (cumulative - 1.0) / (j + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        }
    }
    let mut out: Vec<f64> = raw.iter().map(|v| (v - theta).max(0.0)).collect();
    let sum: f64 = out.iter().sum();
    if (sum - 1.0).abs() > 1e-15 {
        out.iter_mut().for_each(|v| *v /= sum);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_point() {
        let w = [0.1, 0.6, 0.3];
        let p = simplex_repair(&w).unwrap();
        for (a, b) in p.as_slice().iter().zip(w) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn vertex() {
        assert_eq!(simplex_repair(&[2.0, 0.0]).unwrap().as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn shift_invariance() {
        let a = simplex_repair(&[0.3, -1.0, 2.0, 0.5]).unwrap();
        let b = simplex_repair(&[10.3, 9.0, 12.0, 10.5]).unwrap();
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn non_finite() {
        assert!(matches!(simplex_repair(&[f64::NAN, 1.0]), Err(Error::NonFiniteInput)));
    }
}

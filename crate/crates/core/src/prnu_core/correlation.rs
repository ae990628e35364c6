//! Normalized (Pearson) correlation between equally shaped matrices.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::image::check_same_dims;

/// Mean-removed dot product over the product of mean-removed norms.
pub fn normalized_correlation(a: &Array2<f64>, b: &Array2<f64>) -> Result<f64> {
    check_same_dims(a.dim(), b.dim(), "normalized_correlation")?;
    let n = a.len() as f64;
    let ma = a.sum() / n;
    let mb = b.sum() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b.iter()) {
        let (x, y) = (x - ma, y - mb);
        sab += x * y;
        saa += x * x;
        sbb += y * y;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::degenerate("correlation with a constant matrix"));
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// A matrix reduced to its mean-removed, unit-norm direction.
///
/// Correlating two of these is a single dot product, which is how the triangle
/// test evaluates thousands of residual pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitVector {
    dims: (usize, usize),
    values: Vec<f64>,
}

impl UnitVector {
    pub fn new(m: &Array2<f64>) -> Result<Self> {
        let n = m.len() as f64;
        let mean = m.sum() / n;
        let mut values: Vec<f64> = m.iter().map(|v| v - mean).collect();
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::degenerate("constant matrix has no direction"));
        }
        values.iter_mut().for_each(|v| *v /= norm);
        Ok(UnitVector { dims: m.dim(), values })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.dims
    }

    pub fn correlate(&self, other: &UnitVector) -> Result<f64> {
        check_same_dims(self.dims, other.dims, "correlate")?;
        let dot: f64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum();
        Ok(dot.clamp(-1.0, 1.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    #[test]
    fn self_and_anti_correlation() {
        let x = arr2(&[[1.0, 5.0, 2.0], [0.5, -3.0, 9.0]]);
        assert_eq!(normalized_correlation(&x, &x).unwrap(), 1.0);
        let r = normalized_correlation(&arr2(&[[1.0, 2.0]]), &arr2(&[[2.0, 1.0]])).unwrap();
        assert_eq!(r, -1.0);
    }

    #[test]
    fn degenerate_and_mismatch() {
        let c = Array2::from_elem((2, 2), 3.0);
        let x = arr2(&[[1.0, 2.0], [3.0, 4.0]]);
        assert!(matches!(normalized_correlation(&c, &c), Err(Error::Degenerate(_))));
        assert!(matches!(normalized_correlation(&x, &c), Err(Error::Degenerate(_))));
        assert!(normalized_correlation(&x, &arr2(&[[1.0, 2.0]])).is_err());
        assert!(UnitVector::new(&c).is_err());
    }

    #[test]
    fn unit_vector_path_agrees() {
        let a = arr2(&[[1.0, 5.0, 2.0], [0.5, -3.0, 9.0]]);
        let b = arr2(&[[2.0, 1.0, 0.0], [4.0, 4.5, -1.0]]);
        let direct = normalized_correlation(&a, &b).unwrap();
        let fast = UnitVector::new(&a)
            .unwrap()
            .correlate(&UnitVector::new(&b).unwrap())
            .unwrap();
        assert!((direct - fast).abs() < 1e-14);
    }
}

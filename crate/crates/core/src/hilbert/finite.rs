//! Finite-dimensional state vectors.

use ndarray::Array1;
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::real::Real;

/// Hard cap on finite-dimensional state vectors (tensor products included).
pub const KET_DIM_CAP: usize = 1 << 21;

/// A complex state vector with optional basis labels.
#[derive(Debug, Clone)]
pub struct FiniteKet<R: Real> {
    amplitudes: Array1<Complex<R>>,
    labels: Option<Vec<String>>,
}

impl<R: Real> FiniteKet<R> {
    pub fn new(amplitudes: Array1<Complex<R>>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::InvalidParameter {
                name: "amplitudes",
                reason: "state vector is empty".into(),
            });
        }
        if amplitudes.len() > KET_DIM_CAP {
            return Err(Error::SizeCap {
                requested: amplitudes.len(),
                cap: KET_DIM_CAP,
            });
        }
        if amplitudes.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::InvalidParameter {
                name: "amplitudes",
                reason: "non-finite amplitude".into(),
            });
        }
        Ok(Self {
            amplitudes,
            labels: None,
        })
    }

    pub fn from_slice(amplitudes: &[Complex<R>]) -> Result<Self> {
        Self::new(Array1::from_vec(amplitudes.to_vec()))
    }

    /// Real-amplitude convenience constructor.
    pub fn from_reals(amplitudes: &[R]) -> Result<Self> {
        Self::new(Array1::from_iter(
            amplitudes.iter().map(|&x| Complex::new(x, R::zero())),
        ))
    }

    pub fn basis_state(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::InvalidParameter {
                name: "index",
                reason: format!("basis index {index} out of range for dim {dim}"),
            });
        }
        let mut amplitudes = Array1::<Complex<R>>::zeros(dim);
        amplitudes[index] = Complex::new(R::one(), R::zero());
        Self::new(amplitudes)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                left: labels.len(),
                right: self.dim(),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &Array1<Complex<R>> {
        &self.amplitudes
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Euclidean norm.
    pub fn norm(&self) -> R {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<R>().sqrt()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if !(n.is_finite() && n > R::zero()) {
            return Err(Error::NotNormalized { norm: n.as_f64() });
        }
        let inv = Complex::new(R::one() / n, R::zero());
        Ok(Self {
            amplitudes: self.amplitudes.mapv(|z| z * inv),
            labels: self.labels.clone(),
        })
    }

    pub fn require_unit(&self) -> Result<()> {
        let n = self.norm();
        if (n - R::one()).abs() > R::strict_tol() {
            return Err(Error::NotNormalized { norm: n.as_f64() });
        }
        Ok(())
    }

    /// Inner product <self|other> (conjugate-linear in self).
    pub fn inner(&self, other: &Self) -> Result<Complex<R>> {
        self.check_dim(other)?;
        let mut acc = Complex::new(R::zero(), R::zero());
        for (a, b) in self.amplitudes.iter().zip(other.amplitudes.iter()) {
            acc = acc + a.conj() * *b;
        }
        Ok(acc)
    }

    /// Vector distance ||self - other||; in [0, 2] for unit vectors.
    pub fn distance(&self, other: &Self) -> Result<R> {
        self.check_dim(other)?;
        Ok(self
            .amplitudes
            .iter()
            .zip(other.amplitudes.iter())
            .map(|(a, b)| (*a - *b).norm_sqr())
            .sum::<R>()
            .sqrt())
    }

    /// Kronecker product self (x) other.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let dim = self
            .dim()
            .checked_mul(other.dim())
            .ok_or(Error::SizeCap {
                requested: usize::MAX,
                cap: KET_DIM_CAP,
            })?;
        if dim > KET_DIM_CAP {
            return Err(Error::SizeCap {
                requested: dim,
                cap: KET_DIM_CAP,
            });
        }
        let mut amplitudes = Array1::<Complex<R>>::zeros(dim);
        for (i, a) in self.amplitudes.iter().enumerate() {
            for (j, b) in other.amplitudes.iter().enumerate() {
                amplitudes[i * other.dim() + j] = *a * *b;
            }
        }
        Self::new(amplitudes)
    }

    /// Linear combination sum_k c_k |psi_k> (not normalized).
    pub fn superpose(parts: &[(Complex<R>, &Self)]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or(Error::InvalidParameter {
                name: "parts",
                reason: "superposition needs at least one term".into(),
            })?
            .1;
        let mut amplitudes = Array1::<Complex<R>>::zeros(first.dim());
        for (coeff, ket) in parts {
            first.check_dim(ket)?;
            for (dst, src) in amplitudes.iter_mut().zip(ket.amplitudes.iter()) {
                *dst = *dst + *coeff * *src;
            }
        }
        Self::new(amplitudes)
    }

    pub fn scaled(&self, c: Complex<R>) -> Self {
        Self {
            amplitudes: self.amplitudes.mapv(|z| z * c),
            labels: self.labels.clone(),
        }
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64;

    fn ket(xs: &[f64]) -> FiniteKet<f64> {
        FiniteKet::from_reals(xs).unwrap()
    }

    #[test]
    fn norm_examples() {
        assert_abs_diff_eq!(ket(&[1.0, 0.0]).norm(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(ket(&[1.0, 1.0]).norm(), 2f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn distance_examples() {
        let u = ket(&[1.0, 0.0]);
        let d = ket(&[0.0, 1.0]);
        assert_abs_diff_eq!(u.distance(&u).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(u.distance(&d).unwrap(), 2f64.sqrt(), epsilon = 1e-15);
        // ||(u+d)/sqrt(2) - d|| = sqrt(1/2 + (1 - 1/sqrt(2))^2)
        let s = ket(&[1.0, 1.0]).normalized().unwrap();
        let expected = (0.5 + (1.0 - 1.0 / 2f64.sqrt()).powi(2)).sqrt();
        assert_abs_diff_eq!(s.distance(&d).unwrap(), expected, epsilon = 1e-12);
        assert_abs_diff_eq!(expected, 0.765_366_86, epsilon = 1e-8);
    }

    #[test]
    fn distance_rejects_dimension_mismatch() {
        assert!(ket(&[1.0, 0.0]).distance(&ket(&[1.0, 0.0, 0.0])).is_err());
    }

    #[test]
    fn tensor_examples() {
        let a = ket(&[1.0, 0.0]);
        let b = ket(&[0.0, 1.0]);
        let t = a.tensor(&b).unwrap();
        let expected = [0.0, 1.0, 0.0, 0.0];
        for (z, &e) in t.amplitudes().iter().zip(expected.iter()) {
            assert_abs_diff_eq!(z.re, e, epsilon = 1e-15);
            assert_abs_diff_eq!(z.im, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn tensor_norm_is_multiplicative() {
        let a = ket(&[1.0, 2.0]);
        let b = ket(&[0.5, -0.25, 1.0]);
        let t = a.tensor(&b).unwrap();
        assert_abs_diff_eq!(t.norm(), a.norm() * b.norm(), epsilon = 1e-13);
    }

    #[test]
    fn tensor_distributes_over_superpositions() {
        // (u + d)/sqrt(2) (x) A = (uA + dA)/sqrt(2)
        let u = ket(&[1.0, 0.0]);
        let d = ket(&[0.0, 1.0]);
        let a = ket(&[0.6, 0.8]);
        let half = Complex64::new(1.0 / 2f64.sqrt(), 0.0);
        let s = FiniteKet::superpose(&[(half, &u), (half, &d)]).unwrap();
        let lhs = s.tensor(&a).unwrap();
        let ua = u.tensor(&a).unwrap();
        let da = d.tensor(&a).unwrap();
        let rhs = FiniteKet::superpose(&[(half, &ua), (half, &da)]).unwrap();
        assert_abs_diff_eq!(lhs.distance(&rhs).unwrap(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn tensor_respects_cap() {
        let big = FiniteKet::<f64>::basis_state(1 << 11, 0).unwrap();
        let bigger = FiniteKet::<f64>::basis_state(1 << 11, 0).unwrap();
        assert!(big.tensor(&bigger).is_err());
    }
}

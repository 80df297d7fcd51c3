//! Wavefunctions on a uniform configuration-space grid.
//!
//! States are value-semantic snapshots: every operation returns a new state,
//! which keeps Monte Carlo ensembles trivially parallel.

use ndarray::{ArrayD, IxDyn};
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::real::Real;

/// Hard cap on the total number of configuration-space grid points.
pub const GRID_POINT_CAP: usize = 1 << 24;

/// Geometry of the n-particle configuration grid: one axis per particle
/// (1D particles), a shared power-of-two point count, and per-particle
/// masses in internal units.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec<R: Real> {
    extents: Vec<(R, R)>,
    points: usize,
    masses: Vec<R>,
}

impl<R: Real> GridSpec<R> {
    pub fn new(extents: Vec<(R, R)>, points: usize, masses: Vec<R>) -> Result<Self> {
        if extents.is_empty() || extents.len() != masses.len() {
            return Err(Error::InvalidParameter {
                name: "extents",
                reason: format!(
                    "need one extent per particle, got {} extents for {} masses",
                    extents.len(),
                    masses.len()
                ),
            });
        }
        for &(lo, hi) in &extents {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidParameter {
                    name: "extents",
                    reason: "axis extents must be finite and ordered".into(),
                });
            }
        }
        if points < 16 || !points.is_power_of_two() {
            return Err(Error::InvalidParameter {
                name: "points",
                reason: format!("points per axis must be a power of two >= 16, got {points}"),
            });
        }
        let total = points.checked_pow(extents.len() as u32).unwrap_or(usize::MAX);
        if total > GRID_POINT_CAP {
            return Err(Error::SizeCap {
                requested: total,
                cap: GRID_POINT_CAP,
            });
        }
        for &m in &masses {
            if !(m.is_finite() && m > R::zero()) {
                return Err(Error::InvalidParameter {
                    name: "masses",
                    reason: "particle masses must be positive and finite".into(),
                });
            }
        }
        Ok(Self {
            extents,
            points,
            masses,
        })
    }

    /// Single-particle 1D grid.
    pub fn line(x_min: R, x_max: R, points: usize, mass: R) -> Result<Self> {
        Self::new(vec![(x_min, x_max)], points, vec![mass])
    }

    pub fn n_axes(&self) -> usize {
        self.extents.len()
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn extents(&self) -> &[(R, R)] {
        &self.extents
    }

    pub fn masses(&self) -> &[R] {
        &self.masses
    }

    pub fn axis_length(&self, axis: usize) -> R {
        let (lo, hi) = self.extents[axis];
        hi - lo
    }

    pub fn dx(&self, axis: usize) -> R {
        self.axis_length(axis) / R::of(self.points as f64)
    }

    /// Volume of one configuration-space cell.
    pub fn cell_volume(&self) -> R {
        (0..self.n_axes()).map(|a| self.dx(a)).fold(R::one(), |p, d| p * d)
    }

    /// Coordinate of cell `j` on `axis` (cell centers).
    pub fn coord(&self, axis: usize, j: usize) -> R {
        let (lo, _) = self.extents[axis];
        lo + self.dx(axis) * (R::of(j as f64) + R::of(0.5))
    }

    pub fn coords(&self, axis: usize) -> Vec<R> {
        (0..self.points).map(|j| self.coord(axis, j)).collect()
    }

    pub fn shape(&self) -> Vec<usize> {
        vec![self.points; self.n_axes()]
    }

    pub fn total_points(&self) -> usize {
        self.points.pow(self.n_axes() as u32)
    }

    /// Angular wavenumber of FFT bin `j` on `axis`.
    pub fn wavenumber(&self, axis: usize, j: usize) -> R {
        let n = self.points as i64;
        let f = if (j as i64) <= n / 2 - 1 {
            j as i64
        } else {
            j as i64 - n
        };
        R::of(2.0) * R::PI() * R::of(f as f64) / self.axis_length(axis)
    }
}

/// Complex amplitudes over an n-particle configuration grid.
#[derive(Debug, Clone)]
pub struct GridWavefunction<R: Real> {
    spec: GridSpec<R>,
    amplitudes: ArrayD<Complex<R>>,
}

impl<R: Real> GridWavefunction<R> {
    /// Wraps raw amplitudes; the caller normalizes separately if desired.
    pub fn from_amplitudes(spec: GridSpec<R>, amplitudes: ArrayD<Complex<R>>) -> Result<Self> {
        if amplitudes.shape() != spec.shape().as_slice() {
            return Err(Error::DimensionMismatch {
                left: amplitudes.len(),
                right: spec.total_points(),
            });
        }
        if amplitudes.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::InvalidParameter {
                name: "amplitudes",
                reason: "non-finite amplitude".into(),
            });
        }
        Ok(Self { spec, amplitudes })
    }

    /// Normalized product of per-axis Gaussian packets
    /// exp(-(x-c)^2 / (4 w^2) + i k (x-c)), giving position variance w^2.
    pub fn gaussian_packet(spec: GridSpec<R>, shape: &GaussianSpec<R>) -> Result<Self> {
        Self::superposition(spec, &[(Complex::new(R::one(), R::zero()), shape.clone())])
    }

    /// Normalized superposition of weighted Gaussian packets.
    pub fn superposition(
        spec: GridSpec<R>,
        parts: &[(Complex<R>, GaussianSpec<R>)],
    ) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::InvalidParameter {
                name: "parts",
                reason: "superposition needs at least one packet".into(),
            });
        }
        for (_, g) in parts {
            g.validate(&spec)?;
        }
        let axes = spec.n_axes();
        let coords: Vec<Vec<R>> = (0..axes).map(|a| spec.coords(a)).collect();
        let mut amplitudes = ArrayD::<Complex<R>>::zeros(IxDyn(&spec.shape()));
        let quarter = R::of(0.25);
        for (idx, amp) in amplitudes.indexed_iter_mut() {
            let mut total = Complex::new(R::zero(), R::zero());
            for (coeff, g) in parts {
                // Per-packet analytic amplitude normalization keeps the
                // stated coefficients meaningful before global renorm.
                let mut phase = R::zero();
                let mut log_mag = R::zero();
                for a in 0..axes {
                    let x = coords[a][idx[a]] - g.centers[a];
                    let w2 = g.widths[a] * g.widths[a];
                    log_mag = log_mag - x * x * quarter / w2
                        - R::of(0.25) * (R::of(2.0) * R::PI() * w2).ln();
                    phase = phase + g.momenta[a] * x;
                }
                total = total
                    + *coeff * Complex::new(log_mag.exp(), R::zero()) * Complex::from_polar(R::one(), phase);
            }
            *amp = total;
        }
        Self::from_amplitudes(spec, amplitudes)?.normalized()
    }

    /// Normalized plane wave with the given integer mode per axis (exactly
    /// periodic on the grid).
    pub fn plane_wave(spec: GridSpec<R>, modes: &[i64]) -> Result<Self> {
        if modes.len() != spec.n_axes() {
            return Err(Error::DimensionMismatch {
                left: modes.len(),
                right: spec.n_axes(),
            });
        }
        let axes = spec.n_axes();
        let coords: Vec<Vec<R>> = (0..axes).map(|a| spec.coords(a)).collect();
        let ks: Vec<R> = (0..axes)
            .map(|a| R::of(2.0) * R::PI() * R::of(modes[a] as f64) / spec.axis_length(a))
            .collect();
        let mut amplitudes = ArrayD::<Complex<R>>::zeros(IxDyn(&spec.shape()));
        for (idx, amp) in amplitudes.indexed_iter_mut() {
            let mut phase = R::zero();
            for a in 0..axes {
                phase = phase + ks[a] * coords[a][idx[a]];
            }
            *amp = Complex::from_polar(R::one(), phase);
        }
        Self::from_amplitudes(spec, amplitudes)?.normalized()
    }

    /// Delta-like state: all probability in a single cell.
    pub fn one_hot(spec: GridSpec<R>, cell: &[usize]) -> Result<Self> {
        if cell.len() != spec.n_axes() || cell.iter().any(|&j| j >= spec.points()) {
            return Err(Error::InvalidParameter {
                name: "cell",
                reason: "cell index out of range".into(),
            });
        }
        let mut amplitudes = ArrayD::<Complex<R>>::zeros(IxDyn(&spec.shape()));
        amplitudes[IxDyn(cell)] = Complex::new(R::one() / spec.cell_volume().sqrt(), R::zero());
        Self::from_amplitudes(spec, amplitudes)
    }

    pub fn spec(&self) -> &GridSpec<R> {
        &self.spec
    }

    pub fn amplitudes(&self) -> &ArrayD<Complex<R>> {
        &self.amplitudes
    }

    pub(crate) fn map_amplitudes<F>(&self, f: F) -> Self
    where
        F: Fn(&ArrayD<Complex<R>>) -> ArrayD<Complex<R>>,
    {
        Self {
            spec: self.spec.clone(),
            amplitudes: f(&self.amplitudes),
        }
    }

    /// L2 norm including the grid-cell volume weight.
    pub fn norm(&self) -> R {
        (self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<R>() * self.spec.cell_volume()).sqrt()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if !(n.is_finite() && n > R::zero()) {
            return Err(Error::NotNormalized { norm: n.as_f64() });
        }
        let inv = Complex::new(R::one() / n, R::zero());
        Ok(self.map_amplitudes(|a| a.mapv(|z| z * inv)))
    }

    pub fn require_unit(&self) -> Result<()> {
        let n = self.norm();
        if (n - R::one()).abs() > R::grid_tol() {
            return Err(Error::NotNormalized { norm: n.as_f64() });
        }
        Ok(())
    }

    /// Volume-weighted inner product <self|other>.
    pub fn inner(&self, other: &Self) -> Result<Complex<R>> {
        self.check_same_grid(other)?;
        let mut acc = Complex::new(R::zero(), R::zero());
        for (a, b) in self.amplitudes.iter().zip(other.amplitudes.iter()) {
            acc = acc + a.conj() * *b;
        }
        Ok(acc * Complex::new(self.spec.cell_volume(), R::zero()))
    }

    /// L2 distance ||self - other||.
    pub fn distance(&self, other: &Self) -> Result<R> {
        self.check_same_grid(other)?;
        let sum: R = self
            .amplitudes
            .iter()
            .zip(other.amplitudes.iter())
            .map(|(a, b)| (*a - *b).norm_sqr())
            .sum();
        Ok((sum * self.spec.cell_volume()).sqrt())
    }

    fn check_same_grid(&self, other: &Self) -> Result<()> {
        if self.spec != other.spec {
            return Err(Error::DimensionMismatch {
                left: self.spec.total_points(),
                right: other.spec.total_points(),
            });
        }
        Ok(())
    }

    /// |psi|^2 on the grid.
    pub fn density(&self) -> ArrayD<R> {
        self.amplitudes.mapv(|z| z.norm_sqr())
    }

    pub fn peak_density(&self) -> R {
        self.amplitudes
            .iter()
            .map(|z| z.norm_sqr())
            .fold(R::zero(), |m, d| m.max(d))
    }

    /// Probability mass per cell along `axis`, marginalized over the rest;
    /// sums to 1 for a normalized state.
    pub fn marginal_masses(&self, axis: usize) -> Vec<R> {
        let n = self.spec.points();
        let mut out = vec![R::zero(); n];
        let vol = self.spec.cell_volume();
        for (idx, z) in self.amplitudes.indexed_iter() {
            out[idx[axis]] = out[idx[axis]] + z.norm_sqr() * vol;
        }
        out
    }

    /// Mean position along `axis`.
    pub fn mean(&self, axis: usize) -> R {
        let masses = self.marginal_masses(axis);
        masses
            .iter()
            .enumerate()
            .map(|(j, &m)| self.spec.coord(axis, j) * m)
            .sum()
    }

    /// Position variance along `axis`.
    pub fn variance(&self, axis: usize) -> R {
        let masses = self.marginal_masses(axis);
        let mean = self.mean(axis);
        masses
            .iter()
            .enumerate()
            .map(|(j, &m)| {
                let d = self.spec.coord(axis, j) - mean;
                d * d * m
            })
            .sum()
    }
}

/// One Gaussian packet: per-axis center, width (position std dev) and
/// momentum.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSpec<R: Real> {
    pub centers: Vec<R>,
    pub widths: Vec<R>,
    pub momenta: Vec<R>,
}

impl<R: Real> GaussianSpec<R> {
    pub fn line(center: R, width: R, momentum: R) -> Self {
        Self {
            centers: vec![center],
            widths: vec![width],
            momenta: vec![momentum],
        }
    }

    fn validate(&self, spec: &GridSpec<R>) -> Result<()> {
        let n = spec.n_axes();
        if self.centers.len() != n || self.widths.len() != n || self.momenta.len() != n {
            return Err(Error::DimensionMismatch {
                left: self.centers.len(),
                right: n,
            });
        }
        if self.widths.iter().any(|&w| !(w.is_finite() && w > R::zero())) {
            return Err(Error::InvalidParameter {
                name: "widths",
                reason: "packet widths must be positive".into(),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn line64() -> GridSpec<f64> {
        GridSpec::line(-16.0, 16.0, 256, 1.0).unwrap()
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(GridSpec::line(-1.0, 1.0, 8, 1.0).is_err());
        assert!(GridSpec::line(-1.0, 1.0, 100, 1.0).is_err());
        assert!(GridSpec::line(1.0, -1.0, 64, 1.0).is_err());
        assert!(GridSpec::line(-1.0, 1.0, 64, -2.0).is_err());
        assert!(GridSpec::new(vec![(-1.0, 1.0); 4], 256, vec![1.0; 4]).is_err());
    }

    #[test]
    fn gaussian_packet_is_normalized() {
        let psi =
            GridWavefunction::gaussian_packet(line64(), &GaussianSpec::line(0.0, 1.0, 0.5)).unwrap();
        assert_abs_diff_eq!(psi.norm(), 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(psi.mean(0), 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(psi.variance(0), 1.0, epsilon = 1e-6);
    }

    #[test]
    fn norm_of_scaled_state() {
        let psi =
            GridWavefunction::gaussian_packet(line64(), &GaussianSpec::line(0.0, 1.0, 0.0)).unwrap();
        let doubled = psi.map_amplitudes(|a| a.mapv(|z| z * Complex::new(2.0, 0.0)));
        assert_abs_diff_eq!(doubled.norm(), 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(doubled.normalized().unwrap().norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn distance_of_identical_states_is_zero() {
        let psi =
            GridWavefunction::gaussian_packet(line64(), &GaussianSpec::line(1.0, 0.8, 0.0)).unwrap();
        assert_abs_diff_eq!(psi.distance(&psi).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn distance_rejects_mismatched_grids() {
        let a =
            GridWavefunction::gaussian_packet(line64(), &GaussianSpec::line(0.0, 1.0, 0.0)).unwrap();
        let other = GridSpec::line(-16.0, 16.0, 128, 1.0).unwrap();
        let b =
            GridWavefunction::gaussian_packet(other, &GaussianSpec::line(0.0, 1.0, 0.0)).unwrap();
        assert!(a.distance(&b).is_err());
    }

    #[test]
    fn marginals_of_product_state_factorize() {
        let spec = GridSpec::new(vec![(-8.0, 8.0), (-8.0, 8.0)], 64, vec![1.0, 2.0]).unwrap();
        let g = GaussianSpec {
            centers: vec![1.0, -2.0],
            widths: vec![0.7, 0.5],
            momenta: vec![0.0, 0.0],
        };
        let psi = GridWavefunction::gaussian_packet(spec, &g).unwrap();
        let m0: f64 = psi.marginal_masses(0).iter().sum();
        let m1: f64 = psi.marginal_masses(1).iter().sum();
        assert_abs_diff_eq!(m0, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(m1, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(psi.mean(0), 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(psi.mean(1), -2.0, epsilon = 1e-8);
        assert_abs_diff_eq!(psi.variance(1), 0.25, epsilon = 1e-6);
    }

    #[test]
    fn one_hot_concentrates_all_mass() {
        let psi = GridWavefunction::one_hot(line64(), &[40]).unwrap();
        assert_abs_diff_eq!(psi.norm(), 1.0, epsilon = 1e-12);
        let masses = psi.marginal_masses(0);
        assert_abs_diff_eq!(masses[40], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn plane_wave_has_flat_density() {
        let psi = GridWavefunction::plane_wave(line64(), &[3]).unwrap();
        assert_abs_diff_eq!(psi.norm(), 1.0, epsilon = 1e-12);
        let d = psi.density();
        let first = d.iter().next().copied().unwrap();
        assert!(d.iter().all(|&x| (x - first).abs() < 1e-12));
    }
}

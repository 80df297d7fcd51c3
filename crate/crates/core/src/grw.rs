//! Spontaneous-localization dynamics: Poisson collapse scheduling, Gaussian
//! localization operators, collapse-center sampling, full stochastic
//! trajectories, the mass-density field, trigger-mechanism reports, and the
//! quantum-dynamical-semigroup master equation as an independent
//! deterministic cross-check of the stochastic unraveling.
//!
//! Localization operators are normalized so that the integral of Lambda^2
//! over collapse centers is the identity; with that convention the center
//! distribution ||Lambda_i(x) psi||^2 is a probability density.

use ndarray::Array2;
use num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::evolver::{PotentialSpec, SplitOperator};
use crate::hilbert::{DensityOperator, GridSpec, GridWavefunction};
use crate::linalg;
use crate::real::Real;
use crate::rng::{self, StreamTag};
use crate::stats::CellDistribution;

/// Localization parameters in internal units.
#[derive(Debug, Clone, PartialEq)]
pub struct GrwParams<R: Real> {
    /// Collapse rate per nucleon (inverse internal time).
    pub lambda_per_nucleon: R,
    /// Localization width (internal length).
    pub sigma: R,
    /// Scale each particle's rate by its mass in nucleon units.
    pub mass_proportional: bool,
}

impl<R: Real> GrwParams<R> {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_per_nucleon.is_finite() && self.lambda_per_nucleon >= R::zero()) {
            return Err(Error::InvalidParameter {
                name: "lambda",
                reason: "collapse rate must be nonnegative and finite".into(),
            });
        }
        if !(self.sigma.is_finite() && self.sigma > R::zero()) {
            return Err(Error::InvalidParameter {
                name: "sigma",
                reason: "localization width must be positive".into(),
            });
        }
        Ok(())
    }

    /// Per-particle collapse rates for the given masses (nucleon units).
    pub fn rates(&self, masses: &[R]) -> Vec<R> {
        masses
            .iter()
            .map(|&m| {
                if self.mass_proportional {
                    self.lambda_per_nucleon * m
                } else {
                    self.lambda_per_nucleon
                }
            })
            .collect()
    }

    /// Gaussian amplitude factor g(y) = (pi sigma^2)^(-1/4) exp(-y^2/(2 sigma^2)).
    fn amplitude_factor(&self, y: R) -> R {
        let s2 = self.sigma * self.sigma;
        let norm = (R::PI() * s2).powf(-R::of(0.25));
        norm * (-y * y / (R::of(2.0) * s2)).exp()
    }

    /// g(y)^2, the density kernel integrating to 1 over centers.
    fn density_factor(&self, y: R) -> R {
        let s2 = self.sigma * self.sigma;
        let norm = R::one() / (R::PI() * s2).sqrt();
        norm * (-y * y / s2).exp()
    }
}

/// A scheduled hit: which particle localizes when.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduledCollapse<R: Real> {
    pub t: R,
    pub particle: usize,
}

/// A realized localization event ("flash"): time, particle, center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollapseEvent<R: Real> {
    pub t: R,
    pub particle: usize,
    pub center: R,
}

/// Merged per-particle homogeneous Poisson schedules over `[0, horizon)`,
/// time-sorted. Deterministic per seed and independent of particle count
/// (each particle draws from its own stream).
pub fn sample_collapse_schedule<R: Real>(
    params: &GrwParams<R>,
    masses: &[R],
    horizon: R,
    seed: u64,
) -> Result<Vec<ScheduledCollapse<R>>> {
    params.validate()?;
    if !(horizon.is_finite() && horizon > R::zero()) {
        return Err(Error::InvalidParameter {
            name: "horizon",
            reason: "horizon must be positive".into(),
        });
    }
    let mut events = Vec::new();
    for (i, &rate) in params.rates(masses).iter().enumerate() {
        if rate <= R::zero() {
            continue;
        }
        let mut rng = rng::stream(seed, StreamTag::CollapseSchedule, i as u64);
        let mut t = rng::exponential(&mut rng, rate);
        while t < horizon {
            events.push(ScheduledCollapse { t, particle: i });
            t = t + rng::exponential(&mut rng, rate);
        }
    }
    events.sort_by(|a, b| {
        a.t.partial_cmp(&b.t)
            .unwrap()
            .then(a.particle.cmp(&b.particle))
    });
    Ok(events)
}

/// Multiplies the state by the localization operator for particle `i`
/// centered at `x` (result unnormalized).
pub fn localization_weight<R: Real>(
    psi: &GridWavefunction<R>,
    params: &GrwParams<R>,
    particle: usize,
    x: R,
) -> Result<GridWavefunction<R>> {
    params.validate()?;
    let spec = psi.spec();
    check_particle(spec, particle)?;
    let (lo, hi) = spec.extents()[particle];
    if !(x >= lo && x <= hi) {
        return Err(Error::InvalidParameter {
            name: "x",
            reason: format!(
                "collapse center {} outside axis extents [{}, {}]",
                x.as_f64(),
                lo.as_f64(),
                hi.as_f64()
            ),
        });
    }
    let factors: Vec<R> = (0..spec.points())
        .map(|j| params.amplitude_factor(spec.coord(particle, j) - x))
        .collect();
    let mut amplitudes = psi.amplitudes().clone();
    for (idx, z) in amplitudes.indexed_iter_mut() {
        *z = *z * Complex::new(factors[idx[particle]], R::zero());
    }
    GridWavefunction::from_amplitudes(spec.clone(), amplitudes)
}

/// The collapse-center probability density p(x) = ||Lambda_i(x) psi||^2,
/// evaluated at the cell centers of the particle's axis.
pub fn collapse_center_distribution<R: Real>(
    psi: &GridWavefunction<R>,
    params: &GrwParams<R>,
    particle: usize,
) -> Result<Vec<R>> {
    params.validate()?;
    psi.require_unit()?;
    check_particle(psi.spec(), particle)?;
    let spec = psi.spec();
    let masses = psi.marginal_masses(particle);
    let coords = spec.coords(particle);
    Ok(coords
        .iter()
        .map(|&x| {
            masses
                .iter()
                .enumerate()
                .map(|(k, &m)| m * params.density_factor(coords[k] - x))
                .sum()
        })
        .collect())
}

/// Draws one collapse center from p(x): inverse CDF over cells with uniform
/// within-cell jitter.
pub fn sample_collapse_center<R: Real>(
    psi: &GridWavefunction<R>,
    params: &GrwParams<R>,
    particle: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<R> {
    let density = collapse_center_distribution(psi, params, particle)?;
    let spec = psi.spec();
    let dx = spec.dx(particle);
    let masses: Vec<R> = density.iter().map(|&p| p * dx).collect();
    let (lo, _) = spec.extents()[particle];
    let dist = CellDistribution::from_masses(&masses, lo, dx);
    Ok(dist.sample(rng))
}

/// Normalized post-collapse state for particle `i` localized at `x`.
pub fn apply_collapse<R: Real>(
    psi: &GridWavefunction<R>,
    params: &GrwParams<R>,
    particle: usize,
    x: R,
) -> Result<GridWavefunction<R>> {
    let weighted = localization_weight(psi, params, particle, x)?;
    let n = weighted.norm();
    if !(n.is_finite() && n > R::zero()) {
        return Err(Error::ZeroNormCollapse);
    }
    weighted.normalized()
}

/// One stochastic GRW realization.
#[derive(Debug, Clone)]
pub struct GrwRun<R: Real> {
    pub final_state: GridWavefunction<R>,
    pub events: Vec<CollapseEvent<R>>,
    /// Events whose first sampled center hit a numerically dead region and
    /// had to be redrawn.
    pub resampled_events: usize,
}

/// Interleaves split-operator propagation with scheduled localizations over
/// `[0, horizon)`. Between events the state advances in steps no longer than
/// `dt`; centers are drawn from the collapse-center distribution of the
/// pre-collapse state.
pub fn run_grw_trajectory<R: Real>(
    psi0: &GridWavefunction<R>,
    potential: &PotentialSpec<R>,
    params: &GrwParams<R>,
    horizon: R,
    dt: R,
    seed: u64,
) -> Result<GrwRun<R>> {
    psi0.require_unit()?;
    params.validate()?;
    if !(dt.is_finite() && dt > R::zero()) {
        return Err(Error::InvalidParameter {
            name: "dt",
            reason: "propagation step must be positive".into(),
        });
    }
    let schedule = sample_collapse_schedule(params, psi0.spec().masses(), horizon, seed)?;
    let mut center_rng = rng::stream(seed, StreamTag::CollapseCenter, 0);
    let mut planner = FftPlanner::new();
    let spec = psi0.spec().clone();

    let mut psi = psi0.clone();
    let mut t = R::zero();
    let mut events = Vec::with_capacity(schedule.len());
    let mut resampled = 0usize;

    let mut propagate = |psi: &GridWavefunction<R>,
                         span: R,
                         planner: &mut FftPlanner<R>|
     -> Result<GridWavefunction<R>> {
        if span <= R::zero() {
            return Ok(psi.clone());
        }
        let steps = (span / dt).as_f64().ceil().max(1.0) as usize;
        let h = span / R::of(steps as f64);
        let op = SplitOperator::new(planner, &spec, potential, h)?;
        let mut amplitudes = psi.amplitudes().clone();
        for _ in 0..steps {
            op.step(&mut amplitudes);
        }
        GridWavefunction::from_amplitudes(spec.clone(), amplitudes)
    };

    for hit in &schedule {
        psi = propagate(&psi, hit.t - t, &mut planner)?;
        t = hit.t;
        let mut applied = false;
        for attempt in 0..16 {
            let x = sample_collapse_center(&psi, params, hit.particle, &mut center_rng)?;
            match apply_collapse(&psi, params, hit.particle, x) {
                Ok(next) => {
                    if attempt > 0 {
                        resampled += 1;
                    }
                    psi = next;
                    events.push(CollapseEvent {
                        t: hit.t,
                        particle: hit.particle,
                        center: x,
                    });
                    applied = true;
                    break;
                }
                Err(Error::ZeroNormCollapse) => continue,
                Err(e) => return Err(e),
            }
        }
        if !applied {
            return Err(Error::ZeroNormCollapse);
        }
    }
    psi = propagate(&psi, horizon - t, &mut planner)?;
    Ok(GrwRun {
        final_state: psi,
        events,
        resampled_events: resampled,
    })
}

/// The mass density in ordinary space: sum over particles of the marginal
/// position density, optionally weighted by the particle masses.
#[derive(Debug, Clone)]
pub struct MassDensityField<R: Real> {
    pub values: Vec<R>,
    pub coords: Vec<R>,
    pub time: R,
}

impl<R: Real> MassDensityField<R> {
    /// Integral over space (particle count, or total mass when weighted).
    pub fn integral(&self) -> R {
        if self.coords.len() < 2 {
            return R::zero();
        }
        let dx = self.coords[1] - self.coords[0];
        self.values.iter().copied().sum::<R>() * dx
    }
}

pub fn mass_density<R: Real>(
    psi: &GridWavefunction<R>,
    time: R,
    mass_weighted: bool,
) -> Result<MassDensityField<R>> {
    psi.require_unit()?;
    let spec = psi.spec();
    let first = spec.extents()[0];
    if spec.extents().iter().any(|&e| e != first) {
        return Err(Error::InvalidParameter {
            name: "psi",
            reason: "mass density needs identical extents on every particle axis".into(),
        });
    }
    let dx = spec.dx(0);
    let mut values = vec![R::zero(); spec.points()];
    for particle in 0..spec.n_axes() {
        let weight = if mass_weighted {
            spec.masses()[particle]
        } else {
            R::one()
        };
        for (j, &m) in psi.marginal_masses(particle).iter().enumerate() {
            values[j] = values[j] + weight * m / dx;
        }
    }
    Ok(MassDensityField {
        values,
        coords: spec.coords(0),
        time,
    })
}

/// Empirical amplification of the collapse rate with particle number.
#[derive(Debug, Clone, Copy)]
pub struct TriggerReport<R: Real> {
    pub n_events: usize,
    pub n_particles: usize,
    pub empirical_rate: R,
    pub expected_rate: R,
    pub relative_error: R,
    /// Poisson standard error of the empirical rate.
    pub rate_se: R,
}

/// Report from explicit event records of a single run.
pub fn trigger_report<R: Real>(
    events: &[ScheduledCollapse<R>],
    n_particles: usize,
    params: &GrwParams<R>,
    horizon: R,
) -> TriggerReport<R> {
    trigger_report_from_counts(events.len(), n_particles, params, horizon)
}

/// Report from an aggregated event count over `total_time` of observation
/// (for example `runs * horizon`).
pub fn trigger_report_from_counts<R: Real>(
    n_events: usize,
    n_particles: usize,
    params: &GrwParams<R>,
    total_time: R,
) -> TriggerReport<R> {
    let expected_rate = params.lambda_per_nucleon * R::of(n_particles as f64);
    let empirical_rate = R::of(n_events as f64) / total_time;
    let relative_error = if expected_rate > R::zero() {
        (empirical_rate - expected_rate) / expected_rate
    } else {
        R::zero()
    };
    let rate_se = R::of(n_events.max(1) as f64).sqrt() / total_time;
    TriggerReport {
        n_events,
        n_particles,
        empirical_rate,
        expected_rate,
        relative_error,
        rate_se,
    }
}

/// Deterministic master-equation stepper for single-particle grids:
/// d rho/dt = -i [H, rho] + lambda (integral of Lambda(x) rho Lambda(x) dx - rho).
///
/// One step applies exp(-i H dt/2), the exact dissipator action over dt
/// (an elementwise decay toward the diagonal through the localization
/// kernel), and exp(-i H dt/2) again. The scheme preserves trace exactly
/// and positivity up to rounding: the decay matrix is a Hadamard product
/// with an elementwise exponential of a positive semi-definite kernel.
pub struct MasterStepper<R: Real> {
    u_half: Array2<Complex<R>>,
    decay: Array2<R>,
    dt: R,
}

impl<R: Real> MasterStepper<R> {
    /// `hamiltonian` must act on the same grid the kernel is built from.
    /// The dissipator integral is discretized on the grid cells, matching
    /// the sampling grid of the stochastic unraveling.
    pub fn new(
        spec: &GridSpec<R>,
        hamiltonian: &Array2<Complex<R>>,
        params: &GrwParams<R>,
        dt: R,
    ) -> Result<Self> {
        params.validate()?;
        if spec.n_axes() != 1 {
            return Err(Error::InvalidParameter {
                name: "spec",
                reason: "the dense master equation is built for one particle".into(),
            });
        }
        if spec.points() > 64 {
            return Err(Error::SizeCap {
                requested: spec.points(),
                cap: 64,
            });
        }
        if hamiltonian.nrows() != spec.points() {
            return Err(Error::DimensionMismatch {
                left: hamiltonian.nrows(),
                right: spec.points(),
            });
        }
        if !(dt.is_finite() && dt > R::zero()) {
            return Err(Error::InvalidParameter {
                name: "dt",
                reason: "step must be positive".into(),
            });
        }
        let n = spec.points();
        let coords = spec.coords(0);
        let dx = spec.dx(0);
        let rate = params.rates(spec.masses())[0];

        // Grid-discretized sandwich kernel S(q,q') = sum_j dx g(q-x_j) g(q'-x_j),
        // diagonal-normalized so the discrete family satisfies
        // sum_j Lambda_j(q)^2 = 1 exactly (trace preservation).
        let mut raw = Array2::<R>::zeros((n, n));
        for i in 0..n {
            for j in i..n {
                let mut acc = R::zero();
                for &xc in &coords {
                    acc = acc
                        + params.amplitude_factor(coords[i] - xc)
                            * params.amplitude_factor(coords[j] - xc);
                }
                raw[(i, j)] = acc * dx;
                raw[(j, i)] = raw[(i, j)];
            }
        }
        let mut decay = Array2::<R>::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                let k = raw[(i, j)] / (raw[(i, i)] * raw[(j, j)]).sqrt();
                decay[(i, j)] = (rate * dt * (k - R::one())).exp();
            }
        }

        // Half-step unitary from the eigendecomposition of H.
        let (w, v) = linalg::hermitian_eigen(hamiltonian)?;
        let mut u_half = Array2::<Complex<R>>::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                let mut acc = Complex::new(R::zero(), R::zero());
                for k in 0..n {
                    acc = acc
                        + v[(i, k)]
                            * Complex::from_polar(R::one(), -w[k] * dt / R::of(2.0))
                            * v[(j, k)].conj();
                }
                u_half[(i, j)] = acc;
            }
        }
        Ok(Self { u_half, decay, dt })
    }

    pub fn dt(&self) -> R {
        self.dt
    }

    /// One step; enforces trace preservation within 1e-10 and positivity
    /// within 1e-8 as per the evolution contract.
    pub fn step(&self, rho: &DensityOperator<R>) -> Result<DensityOperator<R>> {
        let n = self.decay.nrows();
        if rho.dim() != n {
            return Err(Error::DimensionMismatch {
                left: rho.dim(),
                right: n,
            });
        }
        let m = sandwich(&self.u_half, rho.matrix());
        let mut damped = Array2::<Complex<R>>::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                damped[(i, j)] = m[(i, j)] * Complex::new(self.decay[(i, j)], R::zero());
            }
        }
        let out = sandwich(&self.u_half, &damped);

        let tr = linalg::trace(&out);
        let drift = (tr.re - R::one()).abs().max(tr.im.abs());
        if drift > R::of(1e-10).max(R::strict_tol()) {
            return Err(Error::TraceDrift {
                drift: drift.as_f64(),
            });
        }
        let min = linalg::min_eigenvalue(&out)?;
        if min < R::of(-1e-8) {
            return Err(Error::NotPositive {
                min_eigenvalue: min.as_f64(),
            });
        }
        DensityOperator::new_unvalidated(out)
    }
}

/// One explicit master-equation step (convenience wrapper building the
/// stepper; use [`MasterStepper`] directly inside loops).
pub fn grw_master_step<R: Real>(
    rho: &DensityOperator<R>,
    spec: &GridSpec<R>,
    hamiltonian: &Array2<Complex<R>>,
    params: &GrwParams<R>,
    dt: R,
) -> Result<DensityOperator<R>> {
    MasterStepper::new(spec, hamiltonian, params, dt)?.step(rho)
}

/// U m U^H for the half-step unitary.
fn sandwich<R: Real>(u: &Array2<Complex<R>>, m: &Array2<Complex<R>>) -> Array2<Complex<R>> {
    let n = u.nrows();
    let mut um = Array2::<Complex<R>>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let mut acc = Complex::new(R::zero(), R::zero());
            for k in 0..n {
                acc = acc + u[(i, k)] * m[(k, j)];
            }
            um[(i, j)] = acc;
        }
    }
    let mut out = Array2::<Complex<R>>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let mut acc = Complex::new(R::zero(), R::zero());
            for k in 0..n {
                acc = acc + um[(i, k)] * u[(j, k)].conj();
            }
            out[(i, j)] = acc;
        }
    }
    out
}

fn check_particle<R: Real>(spec: &GridSpec<R>, particle: usize) -> Result<()> {
    if particle >= spec.n_axes() {
        return Err(Error::InvalidParameter {
            name: "particle",
            reason: format!(
                "particle {particle} out of range for {} axes",
                spec.n_axes()
            ),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::GaussianSpec;
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64;

    fn params(lambda: f64, sigma: f64) -> GrwParams<f64> {
        GrwParams {
            lambda_per_nucleon: lambda,
            sigma,
            mass_proportional: false,
        }
    }

    fn line(points: usize, half_width: f64) -> GridSpec<f64> {
        GridSpec::line(-half_width, half_width, points, 1.0).unwrap()
    }

    fn packet(spec: GridSpec<f64>, center: f64, width: f64) -> GridWavefunction<f64> {
        GridWavefunction::gaussian_packet(spec, &GaussianSpec::line(center, width, 0.0)).unwrap()
    }

    #[test]
    fn zero_rate_schedule_is_empty() {
        let events = sample_collapse_schedule(&params(0.0, 1.0), &[1.0, 1.0], 100.0, 7).unwrap();
        assert!(events.is_empty());
    }

    #[test]
    fn schedule_count_matches_poisson_mean() {
        let p = params(0.8, 1.0);
        let horizon = 5.0;
        let runs = 10_000usize;
        let total: usize = (0..runs)
            .map(|k| {
                sample_collapse_schedule(&p, &[1.0], horizon, k as u64)
                    .unwrap()
                    .len()
            })
            .sum();
        let mean = total as f64 / runs as f64;
        let expected = 0.8 * horizon;
        let se = (expected / runs as f64).sqrt();
        assert!(
            (mean - expected).abs() < 3.0 * se,
            "mean {mean} vs {expected} (se {se})"
        );
    }

    #[test]
    fn five_equal_particles_merge_to_five_times_the_rate() {
        let p = params(0.5, 1.0);
        let horizon = 4.0;
        let runs = 4_000usize;
        let total: usize = (0..runs)
            .map(|k| {
                sample_collapse_schedule(&p, &[1.0; 5], horizon, k as u64)
                    .unwrap()
                    .len()
            })
            .sum();
        let mean = total as f64 / runs as f64;
        let expected = 5.0 * 0.5 * horizon;
        let se = (expected / runs as f64).sqrt();
        assert!((mean - expected).abs() < 3.0 * se, "mean {mean} vs {expected}");
    }

    #[test]
    fn mass_proportional_rates_scale_with_mass() {
        let p = GrwParams {
            lambda_per_nucleon: 2.0,
            sigma: 1.0,
            mass_proportional: true,
        };
        assert_eq!(p.rates(&[1.0, 3.0]), vec![2.0, 6.0]);
        let q = params(2.0, 1.0);
        assert_eq!(q.rates(&[1.0, 3.0]), vec![2.0, 2.0]);
    }

    #[test]
    fn broad_localization_leaves_state_unchanged_up_to_scale() {
        // sigma much wider than the support: Lambda is a constant factor.
        let psi = packet(line(256, 8.0), 0.0, 0.5);
        let p = params(1.0, 1e4);
        let weighted = localization_weight(&psi, &p, 0, 0.0).unwrap();
        let rescaled = weighted.normalized().unwrap();
        assert!(psi.distance(&rescaled).unwrap() < 1e-9);
    }

    #[test]
    fn delta_state_collapse_centers_follow_gaussian_of_width_sigma_over_sqrt2() {
        let spec = line(512, 16.0);
        let q0 = spec.coord(0, 300);
        let psi = GridWavefunction::one_hot(spec.clone(), &[300]).unwrap();
        let p = params(1.0, 2.0);
        let density = collapse_center_distribution(&psi, &p, 0).unwrap();
        let dx = spec.dx(0);
        let total: f64 = density.iter().sum::<f64>() * dx;
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-9);
        // Mean = q0, variance = sigma^2 / 2.
        let mean: f64 = density
            .iter()
            .enumerate()
            .map(|(j, &d)| spec.coord(0, j) * d * dx)
            .sum();
        let var: f64 = density
            .iter()
            .enumerate()
            .map(|(j, &d)| (spec.coord(0, j) - mean).powi(2) * d * dx)
            .sum();
        assert_abs_diff_eq!(mean, q0, epsilon = 1e-9);
        assert_abs_diff_eq!(var, 2.0, epsilon = 1e-6);
    }

    #[test]
    fn narrow_packet_centers_have_convolved_width() {
        // packet width s << sigma: center density ~ Gaussian of variance
        // s^2 + sigma^2/2.
        let spec = line(512, 16.0);
        let s = 0.4;
        let sigma = 1.5;
        let psi = packet(spec.clone(), -1.0, s);
        let p = params(1.0, sigma);
        let density = collapse_center_distribution(&psi, &p, 0).unwrap();
        let dx = spec.dx(0);
        let mean: f64 = density
            .iter()
            .enumerate()
            .map(|(j, &d)| spec.coord(0, j) * d * dx)
            .sum();
        let var: f64 = density
            .iter()
            .enumerate()
            .map(|(j, &d)| (spec.coord(0, j) - mean).powi(2) * d * dx)
            .sum();
        let expected = s * s + sigma * sigma / 2.0;
        assert_abs_diff_eq!(mean, -1.0, epsilon = 1e-6);
        assert!(
            (var - expected).abs() / expected < 1e-3,
            "var {var} vs {expected}"
        );
    }

    #[test]
    fn center_distribution_is_normalized_for_random_states() {
        let spec = line(256, 12.0);
        let one = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        let psi = GridWavefunction::superposition(
            spec.clone(),
            &[
                (one, GaussianSpec::line(-4.0, 0.8, 1.0)),
                (i, GaussianSpec::line(3.0, 1.4, -0.5)),
            ],
        )
        .unwrap();
        let p = params(1.0, 1.0);
        let density = collapse_center_distribution(&psi, &p, 0).unwrap();
        let total: f64 = density.iter().sum::<f64>() * spec.dx(0);
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn two_packet_collapse_suppresses_the_far_packet() {
        let spec = line(1024, 20.0);
        let sigma = 1.0;
        let d = 3.0 * sigma;
        let one = Complex64::new(1.0, 0.0);
        let psi = GridWavefunction::superposition(
            spec.clone(),
            &[
                (one, GaussianSpec::line(-d, sigma / 3.0, 0.0)),
                (one, GaussianSpec::line(d, sigma / 3.0, 0.0)),
            ],
        )
        .unwrap();
        let p = params(1.0, sigma);
        let post = apply_collapse(&psi, &p, 0, d).unwrap();
        let left_mass: f64 = post
            .marginal_masses(0)
            .iter()
            .enumerate()
            .filter(|(j, _)| spec.coord(0, *j) < 0.0)
            .map(|(_, &m)| m)
            .sum();
        let bound = 10.0 * (-(d * d) / (sigma * sigma)).exp();
        assert!(left_mass < bound, "left mass {left_mass} vs bound {bound}");
    }

    #[test]
    fn collapse_onto_one_mode_overlaps_that_packet() {
        let spec = line(1024, 20.0);
        let sigma = 1.0;
        let d = 10.0 * sigma;
        let s = sigma / 3.0;
        let one = Complex64::new(1.0, 0.0);
        let psi = GridWavefunction::superposition(
            spec.clone(),
            &[
                (one, GaussianSpec::line(-d, s, 0.0)),
                (one, GaussianSpec::line(d, s, 0.0)),
            ],
        )
        .unwrap();
        let p = params(1.0, sigma);
        let post = apply_collapse(&psi, &p, 0, d).unwrap();
        assert_abs_diff_eq!(post.norm(), 1.0, epsilon = 1e-12);
        let right = packet(spec, d, s);
        let overlap = post.inner(&right).unwrap().norm();
        assert!(overlap > 0.99, "overlap {overlap}");
    }

    #[test]
    fn repeated_collapse_shrinks_width_by_gaussian_product_rule() {
        // Broad state: first collapse leaves density std sigma/sqrt(2),
        // second at the same center leaves sigma/2.
        let spec = line(1024, 24.0);
        let sigma = 1.5;
        let psi = packet(spec, 0.0, 8.0);
        let p = params(1.0, sigma);
        let once = apply_collapse(&psi, &p, 0, 0.0).unwrap();
        let twice = apply_collapse(&once, &p, 0, 0.0).unwrap();
        let tol = 0.02;
        let s1 = once.variance(0).sqrt();
        let s2 = twice.variance(0).sqrt();
        assert!((s1 - sigma / 2f64.sqrt()).abs() < tol * sigma, "s1 = {s1}");
        assert!((s2 - sigma / 2.0).abs() < tol * sigma, "s2 = {s2}");
        assert_abs_diff_eq!(twice.mean(0), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn zero_rate_trajectory_reduces_to_unitary_evolution() {
        let psi = packet(line(256, 16.0), 0.0, 1.0);
        let run = run_grw_trajectory(&psi, &PotentialSpec::Free, &params(0.0, 1.0), 1.0, 0.01, 3)
            .unwrap();
        assert!(run.events.is_empty());
        let unitary = crate::evolver::evolve_grid(&psi, &PotentialSpec::Free, 0.01, 100).unwrap();
        assert!(run.final_state.distance(&unitary).unwrap() < 1e-12);
    }

    #[test]
    fn trajectory_event_times_match_the_schedule() {
        let psi = packet(line(128, 16.0), 0.0, 1.0);
        let p = params(2.0, 1.0);
        let seed = 11;
        let run = run_grw_trajectory(&psi, &PotentialSpec::Free, &p, 3.0, 0.05, seed).unwrap();
        let schedule = sample_collapse_schedule(&p, &[1.0], 3.0, seed).unwrap();
        assert_eq!(run.events.len(), schedule.len());
        for (e, s) in run.events.iter().zip(schedule.iter()) {
            assert_abs_diff_eq!(e.t, s.t, epsilon = 1e-15);
            assert_eq!(e.particle, s.particle);
        }
        assert_abs_diff_eq!(run.final_state.norm(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn mass_density_examples() {
        // Single particle: m(x) = |psi(x)|^2, integral 1.
        let psi = packet(line(256, 12.0), 1.0, 0.8);
        let field = mass_density(&psi, 0.0, false).unwrap();
        assert_abs_diff_eq!(field.integral(), 1.0, epsilon = 1e-9);

        // Two independent particles: sum of marginals, integral 2.
        let spec = GridSpec::new(vec![(-12.0, 12.0), (-12.0, 12.0)], 64, vec![1.0, 1.0]).unwrap();
        let g = GaussianSpec {
            centers: vec![-3.0, 3.0],
            widths: vec![0.8, 0.8],
            momenta: vec![0.0, 0.0],
        };
        let psi2 = GridWavefunction::gaussian_packet(spec.clone(), &g).unwrap();
        let field2 = mass_density(&psi2, 0.0, false).unwrap();
        assert_abs_diff_eq!(field2.integral(), 2.0, epsilon = 1e-9);
        // Mass-weighted variant integrates to the total mass.
        let spec3 = GridSpec::new(vec![(-12.0, 12.0), (-12.0, 12.0)], 64, vec![2.0, 3.0]).unwrap();
        let psi3 = GridWavefunction::gaussian_packet(spec3, &g).unwrap();
        let field3 = mass_density(&psi3, 0.0, true).unwrap();
        assert_abs_diff_eq!(field3.integral(), 5.0, epsilon = 1e-9);
    }

    #[test]
    fn post_collapse_mass_concentrates_near_the_center() {
        let spec = line(512, 16.0);
        let sigma = 0.8;
        let psi = packet(spec.clone(), 0.0, 5.0);
        let p = params(1.0, sigma);
        let x0 = 2.0;
        let post = apply_collapse(&psi, &p, 0, x0).unwrap();
        let field = mass_density(&post, 0.0, false).unwrap();
        let dx = spec.dx(0);
        let near: f64 = field
            .values
            .iter()
            .zip(field.coords.iter())
            .filter(|(_, &x)| (x - x0).abs() <= 3.0 * sigma)
            .map(|(&v, _)| v * dx)
            .sum();
        assert!(near > 0.99, "mass near center {near}");
    }

    #[test]
    fn trigger_report_single_particle() {
        let p = params(1.5, 1.0);
        let horizon = 50.0;
        let events = sample_collapse_schedule(&p, &[1.0], horizon, 21).unwrap();
        let report = trigger_report(&events, 1, &p, horizon);
        assert!(report.relative_error.abs() * report.expected_rate < 3.0 * report.rate_se);
    }

    #[test]
    fn master_step_with_zero_rate_is_unitary() {
        let spec = line(32, 8.0);
        let h = crate::evolver::grid_hamiltonian(&spec, &PotentialSpec::Free).unwrap();
        let psi = packet(spec.clone(), 0.0, 1.5);
        let flat = crate::hilbert::FiniteKet::from_slice(psi.amplitudes().as_slice().unwrap())
            .unwrap()
            .normalized()
            .unwrap();
        let rho = DensityOperator::from_pure(&flat).unwrap();
        let p = params(0.0, 2.0);
        let dt = 0.05;
        let stepper = MasterStepper::new(&spec, &h, &p, dt).unwrap();
        let mut evolved = rho.clone();
        for _ in 0..20 {
            evolved = stepper.step(&evolved).unwrap();
        }
        // Compare against the exactly evolved pure state.
        let ket = crate::evolver::evolve_finite(&flat, &h, 1.0).unwrap();
        let expected = DensityOperator::from_pure(&ket).unwrap();
        assert!(evolved.distance(&expected).unwrap() < 1e-9);
    }

    #[test]
    fn coherence_decays_at_the_kernel_rate_and_diagonal_survives() {
        // H = 0: |rho(q,q')| decays exactly at lambda (1 - K(q,q')).
        let spec = line(32, 8.0);
        let h = Array2::<Complex64>::zeros((32, 32));
        let p = params(0.7, 1.0);
        let dt = 0.05;
        let stepper = MasterStepper::new(&spec, &h, &p, dt).unwrap();
        // Superposition of two cells far apart compared to sigma.
        let mut amps = vec![Complex64::new(0.0, 0.0); 32];
        amps[6] = Complex64::new(1.0 / 2f64.sqrt(), 0.0);
        amps[26] = Complex64::new(1.0 / 2f64.sqrt(), 0.0);
        let ket = crate::hilbert::FiniteKet::from_slice(&amps).unwrap();
        let rho0 = DensityOperator::from_pure(&ket).unwrap();
        let mut rho = rho0.clone();
        let steps = 40;
        for _ in 0..steps {
            rho = stepper.step(&rho).unwrap();
        }
        let t = dt * steps as f64;
        let sep = spec.coord(0, 26) - spec.coord(0, 6);
        let analytic_rate = 0.7 * (1.0 - (-(sep * sep) / 4.0).exp());
        let got = rho.element(6, 26).norm();
        let start = rho0.element(6, 26).norm();
        let measured_rate = -(got / start).ln() / t;
        assert!(
            (measured_rate - analytic_rate).abs() / analytic_rate < 0.02,
            "rate {measured_rate} vs {analytic_rate}"
        );
        // Diagonal untouched for H = 0.
        assert_abs_diff_eq!(rho.element(6, 6).re, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(rho.element(26, 26).re, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn nearby_coherences_survive() {
        // |q - q'| -> 0: decay rate -> 0.
        let spec = line(32, 8.0);
        let h = Array2::<Complex64>::zeros((32, 32));
        let p = params(0.7, 2.0);
        let stepper = MasterStepper::new(&spec, &h, &p, 0.05).unwrap();
        let mut amps = vec![Complex64::new(0.0, 0.0); 32];
        amps[15] = Complex64::new(1.0 / 2f64.sqrt(), 0.0);
        amps[16] = Complex64::new(1.0 / 2f64.sqrt(), 0.0);
        let rho0 =
            DensityOperator::from_pure(&crate::hilbert::FiniteKet::from_slice(&amps).unwrap())
                .unwrap();
        let mut rho = rho0.clone();
        for _ in 0..40 {
            rho = stepper.step(&rho).unwrap();
        }
        let t: f64 = 2.0;
        let sep = spec.dx(0);
        let analytic_rate = 0.7 * (1.0 - (-(sep * sep) / (4.0 * 4.0)).exp());
        let measured_rate = -(rho.element(15, 16).norm() / 0.5).ln() / t;
        // Both rates are tiny; they still agree.
        assert!(analytic_rate < 0.02 * 0.7);
        assert!((measured_rate - analytic_rate).abs() < 1e-3);
    }
}

//! Bohmian trajectories: the guidance velocity field, |psi|^2 position
//! sampling, co-evolved trajectory ensembles, and equivariance statistics.
//!
//! Velocities are v_k = Im[psi* grad_k psi] / (m_k |psi|^2). Gradients are
//! evaluated spectrally on the grid and interpolated multilinearly to the
//! trajectory positions together with psi itself, so exact phase gradients
//! (plane waves, free packets) survive interpolation.

use ndarray::{Array2, ArrayD};
use num_complex::Complex;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::evolver::{fft_axis, PotentialSpec, SplitOperator};
use crate::hilbert::{GridSpec, GridWavefunction};
use crate::real::Real;
use crate::rng::{self, StreamTag};
use crate::stats::{ks_statistic, CellDistribution};

/// Velocities are undefined at wavefunction nodes; densities below this
/// fraction of the grid peak fall back to the nearest live grid node.
pub const NODE_FLOOR_REL: f64 = 1e-12;

/// Search radius (in cells, max-norm) for the node fallback.
const FALLBACK_RADIUS: isize = 3;

/// M Bohmian configuration points co-evolving with a wavefunction.
#[derive(Debug, Clone)]
pub struct TrajectoryEnsemble<R: Real> {
    positions: Array2<R>,
    time: R,
    seed: u64,
}

impl<R: Real> TrajectoryEnsemble<R> {
    pub fn new(positions: Array2<R>, time: R, seed: u64) -> Result<Self> {
        if positions.nrows() == 0 {
            return Err(Error::InvalidParameter {
                name: "positions",
                reason: "ensemble needs at least one trajectory".into(),
            });
        }
        Ok(Self {
            positions,
            time,
            seed,
        })
    }

    /// M x n matrix of configuration points.
    pub fn positions(&self) -> &Array2<R> {
        &self.positions
    }

    pub fn time(&self) -> R {
        self.time
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.positions.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.nrows() == 0
    }

    pub fn n_particles(&self) -> usize {
        self.positions.ncols()
    }

    /// Positions of one particle across the ensemble.
    pub fn particle_positions(&self, particle: usize) -> Vec<R> {
        self.positions.column(particle).to_vec()
    }
}

/// Wavefunction snapshot with cached spectral gradients and node floor.
pub struct FlowSnapshot<R: Real> {
    psi: GridWavefunction<R>,
    gradients: Vec<ArrayD<Complex<R>>>,
    node_floor: R,
}

impl<R: Real> FlowSnapshot<R> {
    pub fn new(psi: GridWavefunction<R>, planner: &mut FftPlanner<R>) -> Self {
        let spec = psi.spec().clone();
        let n = spec.points();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let gradients = (0..spec.n_axes())
            .map(|axis| {
                let mut data = psi.amplitudes().clone();
                fft_axis(&forward, &mut data, axis, false);
                for (idx, z) in data.indexed_iter_mut() {
                    let k = spec.wavenumber(axis, idx[axis]);
                    *z = *z * Complex::new(R::zero(), k);
                }
                fft_axis(&inverse, &mut data, axis, true);
                data
            })
            .collect();
        let node_floor = psi.peak_density() * R::of(NODE_FLOOR_REL);
        Self {
            psi,
            gradients,
            node_floor,
        }
    }

    pub fn psi(&self) -> &GridWavefunction<R> {
        &self.psi
    }

    /// Guidance velocity at configuration point `q`; `true` in the second
    /// slot means the node fallback was used.
    pub fn velocity(&self, q: &[R]) -> (Vec<R>, bool) {
        let spec = self.psi.spec();
        let axes = spec.n_axes();
        debug_assert_eq!(q.len(), axes);
        let n = spec.points() as isize;
        let wrap = |i: isize| -> usize { (((i % n) + n) % n) as usize };

        // Multilinear interpolation over the 2^n surrounding cell centers,
        // with periodic wrap.
        let mut base = vec![0isize; axes];
        let mut frac = vec![R::zero(); axes];
        for a in 0..axes {
            let (lo, _) = spec.extents()[a];
            let u = (q[a] - lo) / spec.dx(a) - R::of(0.5);
            let fl = u.floor();
            base[a] = fl.as_f64() as isize;
            frac[a] = u - fl;
        }

        let mut psi_at = Complex::new(R::zero(), R::zero());
        let mut grad_at = vec![Complex::new(R::zero(), R::zero()); axes];
        let mut idx = vec![0usize; axes];
        for corner in 0..(1usize << axes) {
            let mut w = R::one();
            for a in 0..axes {
                let hi = (corner >> a) & 1 == 1;
                idx[a] = wrap(base[a] + if hi { 1 } else { 0 });
                w = w * if hi { frac[a] } else { R::one() - frac[a] };
            }
            let ix = ndarray::IxDyn(&idx);
            let wz = Complex::new(w, R::zero());
            psi_at = psi_at + wz * self.psi.amplitudes()[&ix];
            for a in 0..axes {
                grad_at[a] = grad_at[a] + wz * self.gradients[a][&ix];
            }
        }

        let dens = psi_at.norm_sqr();
        if dens >= self.node_floor {
            let v = (0..axes)
                .map(|a| (psi_at.conj() * grad_at[a]).im / (dens * spec.masses()[a]))
                .collect();
            return (v, false);
        }

        // Node fallback: densest live grid node in expanding shells around q.
        let center: Vec<isize> = (0..axes)
            .map(|a| {
                let (lo, _) = spec.extents()[a];
                ((q[a] - lo) / spec.dx(a) - R::of(0.5)).round().as_f64() as isize
            })
            .collect();
        for radius in 0..=FALLBACK_RADIUS {
            let mut best: Option<(R, Vec<usize>)> = None;
            let side = (2 * radius + 1) as usize;
            for code in 0..side.pow(axes as u32) {
                let mut rem = code;
                let mut chebyshev = 0isize;
                let mut node = vec![0usize; axes];
                for (a, slot) in node.iter_mut().enumerate() {
                    let o = (rem % side) as isize - radius;
                    rem /= side;
                    chebyshev = chebyshev.max(o.abs());
                    *slot = wrap(center[a] + o);
                }
                if chebyshev != radius {
                    continue;
                }
                let d = self.psi.amplitudes()[&ndarray::IxDyn(&node)].norm_sqr();
                if d >= self.node_floor {
                    match &best {
                        Some((bd, _)) if *bd >= d => {}
                        _ => best = Some((d, node)),
                    }
                }
            }
            if let Some((_, node)) = best {
                let ix = ndarray::IxDyn(&node);
                let p = self.psi.amplitudes()[&ix];
                let dens = p.norm_sqr();
                let v = (0..axes)
                    .map(|a| (p.conj() * self.gradients[a][&ix]).im / (dens * spec.masses()[a]))
                    .collect();
                return (v, true);
            }
        }
        (vec![R::zero(); axes], true)
    }
}

/// Guidance velocity of the wavefunction at one configuration point.
pub fn velocity_field<R: Real>(psi: &GridWavefunction<R>, q: &[R]) -> Result<(Vec<R>, bool)> {
    if q.len() != psi.spec().n_axes() {
        return Err(Error::DimensionMismatch {
            left: q.len(),
            right: psi.spec().n_axes(),
        });
    }
    let mut planner = FftPlanner::new();
    let snapshot = FlowSnapshot::new(psi.clone(), &mut planner);
    Ok(snapshot.velocity(q))
}

/// Per-axis conditional inverse-CDF sampler for |psi|^2 on the grid.
struct ConditionalSampler<R: Real> {
    // levels[a] holds one CellDistribution per prefix-cell combination of
    // axes 0..a.
    levels: Vec<Vec<CellDistribution<R>>>,
    dxs: Vec<R>,
    points: usize,
}

impl<R: Real> ConditionalSampler<R> {
    fn new(psi: &GridWavefunction<R>) -> Self {
        let spec = psi.spec();
        let axes = spec.n_axes();
        let n = spec.points();
        let density = psi.density();
        let mut levels = Vec::with_capacity(axes);
        for a in 0..axes {
            let rows = n.pow(a as u32);
            let mut masses = vec![vec![R::zero(); n]; rows];
            for (idx, d) in density.indexed_iter() {
                let mut prefix = 0usize;
                for b in 0..a {
                    prefix = prefix * n + idx[b];
                }
                masses[prefix][idx[a]] = masses[prefix][idx[a]] + *d;
            }
            let (lo, _) = spec.extents()[a];
            let dx = spec.dx(a);
            levels.push(
                masses
                    .into_iter()
                    .map(|m| CellDistribution::from_masses(&m, lo, dx))
                    .collect(),
            );
        }
        Self {
            levels,
            dxs: (0..axes).map(|a| spec.dx(a)).collect(),
            points: n,
        }
    }

    fn sample(&self, rng: &mut rand_chacha::ChaCha8Rng) -> Vec<R> {
        let axes = self.levels.len();
        let mut out = Vec::with_capacity(axes);
        let mut prefix = 0usize;
        for a in 0..axes {
            let dist = &self.levels[a][prefix];
            let cell = dist.sample_cell(rng);
            let jitter = rng::uniform::<R>(rng);
            out.push(dist.cell_center(cell) + (jitter - R::of(0.5)) * self.dxs[a]);
            prefix = prefix * self.points + cell;
        }
        out
    }
}

/// Draws `m` i.i.d. configuration points from |psi|^2 (inverse CDF per axis,
/// conditioned on the cells already chosen). Deterministic per seed.
pub fn sample_initial_positions<R: Real>(
    psi: &GridWavefunction<R>,
    m: usize,
    seed: u64,
) -> Result<TrajectoryEnsemble<R>> {
    psi.require_unit()?;
    if m == 0 {
        return Err(Error::InvalidParameter {
            name: "m",
            reason: "need at least one trajectory".into(),
        });
    }
    let axes = psi.spec().n_axes();
    let sampler = ConditionalSampler::new(psi);
    let mut rng = rng::stream(seed, StreamTag::InitialPositions, 0);
    let mut positions = Array2::<R>::zeros((m, axes));
    for i in 0..m {
        let q = sampler.sample(&mut rng);
        for (a, &x) in q.iter().enumerate() {
            positions[(i, a)] = x;
        }
    }
    TrajectoryEnsemble::new(positions, R::zero(), seed)
}

/// KS distance between the ensemble's empirical positions and |psi|^2,
/// maximized over particle axes.
pub fn equivariance_statistic<R: Real>(
    ens: &TrajectoryEnsemble<R>,
    psi: &GridWavefunction<R>,
) -> Result<R> {
    let spec = psi.spec();
    if ens.n_particles() != spec.n_axes() {
        return Err(Error::DimensionMismatch {
            left: ens.n_particles(),
            right: spec.n_axes(),
        });
    }
    let mut worst = R::zero();
    for a in 0..spec.n_axes() {
        let (lo, _) = spec.extents()[a];
        let dist = CellDistribution::from_masses(&psi.marginal_masses(a), lo, spec.dx(a));
        let xs = ens.particle_positions(a);
        let d = ks_statistic(&xs, |x| dist.cdf(x));
        worst = worst.max(d);
    }
    Ok(worst)
}

/// Integration diagnostics for a trajectory advance.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FlowStats {
    /// RK4 velocity evaluations that used the node fallback.
    pub node_stalls: usize,
    /// Total RK4 velocity evaluations.
    pub velocity_evaluations: usize,
    /// Positions clamped at the grid extents.
    pub clamps: usize,
}

impl FlowStats {
    pub fn stall_fraction(&self) -> f64 {
        if self.velocity_evaluations == 0 {
            0.0
        } else {
            self.node_stalls as f64 / self.velocity_evaluations as f64
        }
    }

    fn merge(self, other: FlowStats) -> FlowStats {
        FlowStats {
            node_stalls: self.node_stalls + other.node_stalls,
            velocity_evaluations: self.velocity_evaluations + other.velocity_evaluations,
            clamps: self.clamps + other.clamps,
        }
    }
}

/// Co-evolution of the wavefunction and a trajectory ensemble. The PDE is
/// stepped at dt/2 resolution so RK4 sees snapshots at t, t + dt/2 and
/// t + dt.
pub struct CoEvolution<R: Real> {
    spec: GridSpec<R>,
    half_step: SplitOperator<R>,
    planner: FftPlanner<R>,
    current: FlowSnapshot<R>,
    dt: R,
    time: R,
}

impl<R: Real> CoEvolution<R> {
    pub fn new(psi0: &GridWavefunction<R>, potential: &PotentialSpec<R>, dt: R) -> Result<Self> {
        psi0.require_unit()?;
        if !(dt.is_finite() && dt > R::zero()) {
            return Err(Error::InvalidParameter {
                name: "dt",
                reason: "trajectory step must be positive".into(),
            });
        }
        let mut planner = FftPlanner::new();
        let half_step = SplitOperator::new(&mut planner, psi0.spec(), potential, dt / R::of(2.0))?;
        let current = FlowSnapshot::new(psi0.clone(), &mut planner);
        Ok(Self {
            spec: psi0.spec().clone(),
            half_step,
            planner,
            current,
            dt,
            time: R::zero(),
        })
    }

    pub fn psi(&self) -> &GridWavefunction<R> {
        self.current.psi()
    }

    pub fn time(&self) -> R {
        self.time
    }

    pub fn dt(&self) -> R {
        self.dt
    }

    fn half_advanced(&mut self, amplitudes: &ArrayD<Complex<R>>) -> FlowSnapshot<R> {
        let mut amps = amplitudes.clone();
        self.half_step.step(&mut amps);
        let psi = GridWavefunction::from_amplitudes(self.spec.clone(), amps)
            .expect("propagation preserves the grid shape");
        FlowSnapshot::new(psi, &mut self.planner)
    }

    /// Advances wavefunction and ensemble together by one dt.
    pub fn step_ensemble(&mut self, ens: &mut TrajectoryEnsemble<R>) -> FlowStats {
        let cur_amps = self.current.psi().amplitudes().clone();
        let half = self.half_advanced(&cur_amps);
        let full = {
            let amps = half.psi().amplitudes().clone();
            self.half_advanced(&amps)
        };

        let stats = rk4_step(&self.current, &half, &full, ens, self.dt, &self.spec);
        self.current = full;
        self.time = self.time + self.dt;
        ens.time = self.time;
        stats
    }
}

fn rk4_step<R: Real>(
    s0: &FlowSnapshot<R>,
    s_half: &FlowSnapshot<R>,
    s_full: &FlowSnapshot<R>,
    ens: &mut TrajectoryEnsemble<R>,
    dt: R,
    spec: &GridSpec<R>,
) -> FlowStats {
    let axes = ens.n_particles();
    let half = dt / R::of(2.0);
    let sixth = dt / R::of(6.0);
    let extents: Vec<(R, R)> = spec.extents().to_vec();
    let rows = ens
        .positions
        .as_slice_mut()
        .expect("trajectory matrix is contiguous");
    rows.par_chunks_mut(axes)
        .map(|row| {
            let mut stats = FlowStats {
                velocity_evaluations: 4,
                ..FlowStats::default()
            };
            let q0: Vec<R> = row.to_vec();
            let (k1, f1) = s0.velocity(&q0);
            let q1: Vec<R> = (0..axes).map(|a| q0[a] + half * k1[a]).collect();
            let (k2, f2) = s_half.velocity(&q1);
            let q2: Vec<R> = (0..axes).map(|a| q0[a] + half * k2[a]).collect();
            let (k3, f3) = s_half.velocity(&q2);
            let q3: Vec<R> = (0..axes).map(|a| q0[a] + dt * k3[a]).collect();
            let (k4, f4) = s_full.velocity(&q3);
            stats.node_stalls = usize::from(f1) + usize::from(f2) + usize::from(f3) + usize::from(f4);
            for a in 0..axes {
                let mut x = q0[a]
                    + sixth * (k1[a] + R::of(2.0) * k2[a] + R::of(2.0) * k3[a] + k4[a]);
                let (lo, hi) = extents[a];
                if x < lo {
                    x = lo;
                    stats.clamps += 1;
                } else if x > hi {
                    x = hi;
                    stats.clamps += 1;
                }
                row[a] = x;
            }
            stats
        })
        .reduce(FlowStats::default, FlowStats::merge)
}

/// Advances the ensemble `steps` RK4 steps through the co-evolving flow and
/// returns the new ensemble plus integration diagnostics.
pub fn advance_trajectories<R: Real>(
    ens: &TrajectoryEnsemble<R>,
    flow: &mut CoEvolution<R>,
    steps: usize,
) -> Result<(TrajectoryEnsemble<R>, FlowStats)> {
    if ens.n_particles() != flow.spec.n_axes() {
        return Err(Error::DimensionMismatch {
            left: ens.n_particles(),
            right: flow.spec.n_axes(),
        });
    }
    if (ens.time() - flow.time()).abs() > R::of(1e-9) {
        return Err(Error::InvalidParameter {
            name: "ens",
            reason: format!(
                "ensemble time {} does not match flow time {}",
                ens.time().as_f64(),
                flow.time().as_f64()
            ),
        });
    }
    let mut out = ens.clone();
    let mut stats = FlowStats::default();
    for _ in 0..steps {
        stats = stats.merge(flow.step_ensemble(&mut out));
    }
    Ok((out, stats))
}

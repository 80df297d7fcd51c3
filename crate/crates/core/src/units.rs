//! Unit conversions between SI and the internal dimensionless system
//! (hbar = 1, user-chosen length and time scales).
//!
//! Physical GRW parameters put collapse events hundreds of millions of years
//! apart for a single nucleon, so simulations always run with rescaled
//! parameters. This module carries the exact arithmetic connecting the two
//! regimes, including the headline localization intervals.

/// Physical per-nucleon collapse rate, in 1/s.
pub const GRW_LAMBDA_PER_S: f64 = 1e-16;

/// Physical localization width, in cm.
pub const GRW_SIGMA_CM: f64 = 1e-5;

/// Julian year in seconds.
pub const SECONDS_PER_YEAR: f64 = 3.155_76e7;

/// Avogadro-scale nucleon count used for the macroscopic interval estimate.
pub const MACROSCOPIC_NUCLEONS: f64 = 1e23;

/// Choice of internal scales: one internal length unit equals `length_cm`,
/// one internal time unit equals `time_s`.
#[derive(Debug, Clone, Copy)]
pub struct UnitScales {
    pub length_cm: f64,
    pub time_s: f64,
}

impl UnitScales {
    pub fn new(length_cm: f64, time_s: f64) -> Self {
        assert!(length_cm > 0.0 && length_cm.is_finite());
        assert!(time_s > 0.0 && time_s.is_finite());
        Self { length_cm, time_s }
    }

    /// Localization width in internal length units.
    pub fn sigma_internal(&self, sigma_cm: f64) -> f64 {
        sigma_cm / self.length_cm
    }

    /// Collapse rate in internal inverse-time units.
    pub fn lambda_internal(&self, lambda_per_s: f64) -> f64 {
        lambda_per_s * self.time_s
    }

    pub fn length_to_cm(&self, x_internal: f64) -> f64 {
        x_internal * self.length_cm
    }

    pub fn time_to_s(&self, t_internal: f64) -> f64 {
        t_internal * self.time_s
    }
}

/// Mean waiting time between collapses for `n_nucleons` particles hit at
/// `lambda_per_s` each, in seconds.
pub fn mean_collapse_interval_s(lambda_per_s: f64, n_nucleons: f64) -> f64 {
    1.0 / (lambda_per_s * n_nucleons)
}

pub fn seconds_to_years(t_s: f64) -> f64 {
    t_s / SECONDS_PER_YEAR
}

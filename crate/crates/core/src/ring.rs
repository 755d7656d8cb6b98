use serde::Serialize;

use crate::error::{config_err, Result};
use crate::force::ForceSpec;
use crate::scalar::Real;

/// One experiment: `N` equally spaced particles at rest on a circle of
/// length `L`, driven by `force`, expanded up to order `j_max`.
///
/// Particle `i` (zero-based) starts at `x_i(0) = i·L/N`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct RingConfig<T = f64> {
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "L")]
    length: T,
    force: ForceSpec<T>,
    #[serde(rename = "J_max")]
    j_max: usize,
    scale: T,
}

impl<T: Real> RingConfig<T> {
    /// Uses the default time scale `N^(-5/6)`.
    pub fn new(n: usize, force: ForceSpec<T>, j_max: usize) -> Result<Self> {
        let scale = Self::default_scale(n);
        Self::with_scale(n, force, j_max, scale)
    }

    pub fn with_scale(n: usize, force: ForceSpec<T>, j_max: usize, scale: T) -> Result<Self> {
        if n < 2 {
            return config_err(format!("ring.N must be at least 2, got {n}"));
        }
        if j_max < 1 {
            return config_err("ring.J_max must be at least 1");
        }
        if !(scale.is_finite() && scale > T::zero()) {
            return config_err(format!(
                "ring.scale must be finite and positive, got {scale}"
            ));
        }
        Ok(Self {
            n,
            length: force.period(),
            force,
            j_max,
            scale,
        })
    }

    pub fn default_scale(n: usize) -> T {
        T::from_count(n).powf(T::lit(-5.0 / 6.0))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> T {
        self.length
    }

    pub fn force(&self) -> &ForceSpec<T> {
        &self.force
    }

    pub fn j_max(&self) -> usize {
        self.j_max
    }

    pub fn scale(&self) -> T {
        self.scale
    }

    /// Initial spacing `Δ = L/N`.
    pub fn spacing(&self) -> T {
        self.length / T::from_count(self.n)
    }

    pub fn initial_position(&self, i: usize) -> T {
        T::from_count(i) * self.spacing()
    }

    pub fn with_j_max(&self, j_max: usize) -> Result<Self> {
        Self::with_scale(self.n, self.force.clone(), j_max, self.scale)
    }

    pub fn rescaled(&self, scale: T) -> Result<Self> {
        Self::with_scale(self.n, self.force.clone(), self.j_max, scale)
    }

    pub fn with_force(&self, force: ForceSpec<T>) -> Result<Self> {
        Self::with_scale(self.n, force, self.j_max, self.scale)
    }
}

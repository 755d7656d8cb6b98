//! External force on the circle, represented as a finite trigonometric series
//!
//! ```text
//! F(x) = a0 + Σ_k [ a_k cos(2πkx/L) + b_k sin(2πkx/L) ]
//! ```
//!
//! Trigonometric polynomials are entire and periodic, so every derivative is
//! available in closed form and the growth constant `C_F` with
//! `|F^(k)(x)| ≤ C_F^(k+1)` is computable from the coefficients alone.

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::scalar::Real;

/// One harmonic `a cos(2πkx/L) + b sin(2πkx/L)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Harmonic<T = f64> {
    pub k: u32,
    pub a: T,
    pub b: T,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Real", deny_unknown_fields)]
struct ForceRepr<T> {
    #[serde(rename = "L")]
    period: T,
    #[serde(default)]
    a0: T,
    #[serde(default)]
    harmonics: Vec<Harmonic<T>>,
}

/// Analytic periodic force. Immutable once constructed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", try_from = "ForceRepr<T>", into = "ForceRepr<T>")]
pub struct ForceSpec<T = f64> {
    period: T,
    mean: T,
    harmonics: Vec<Harmonic<T>>,
}

impl<T: Real> TryFrom<ForceRepr<T>> for ForceSpec<T> {
    type Error = Error;

    fn try_from(repr: ForceRepr<T>) -> Result<Self> {
        ForceSpec::new(repr.period, repr.a0, repr.harmonics)
    }
}

impl<T: Real> From<ForceSpec<T>> for ForceRepr<T> {
    fn from(spec: ForceSpec<T>) -> Self {
        ForceRepr {
            period: spec.period,
            a0: spec.mean,
            harmonics: spec.harmonics,
        }
    }
}

impl<T: Real> ForceSpec<T> {
    pub fn new(period: T, mean: T, harmonics: Vec<Harmonic<T>>) -> Result<Self> {
        if !(period.is_finite() && period > T::zero()) {
            return config_err(format!("force.L must be finite and positive, got {period}"));
        }
        if !mean.is_finite() {
            return config_err("force.a0 must be finite");
        }
        for (idx, h) in harmonics.iter().enumerate() {
            if h.k == 0 {
                return config_err(format!(
                    "force.harmonics[{idx}].k must be a positive integer"
                ));
            }
            if !(h.a.is_finite() && h.b.is_finite()) {
                return config_err(format!(
                    "force.harmonics[{idx}]: coefficients must be finite"
                ));
            }
            if harmonics[..idx].iter().any(|other| other.k == h.k) {
                return config_err(format!("force.harmonics[{idx}].k = {} is duplicated", h.k));
            }
        }
        Ok(Self {
            period,
            mean,
            harmonics,
        })
    }

    pub fn constant(period: T, value: T) -> Result<Self> {
        Self::new(period, value, Vec::new())
    }

    /// `amplitude · sin(2π·k·x/L)`.
    pub fn sine(period: T, k: u32, amplitude: T) -> Result<Self> {
        Self::new(
            period,
            T::zero(),
            vec![Harmonic {
                k,
                a: T::zero(),
                b: amplitude,
            }],
        )
    }

    pub fn period(&self) -> T {
        self.period
    }

    pub fn mean(&self) -> T {
        self.mean
    }

    pub fn harmonics(&self) -> &[Harmonic<T>] {
        &self.harmonics
    }

    fn angular(&self, k: u32) -> T {
        T::TAU() * T::from_u32(k).unwrap() / self.period
    }

    fn reduce(&self, x: T) -> T {
        x - self.period * (x / self.period).floor()
    }

    pub fn eval(&self, x: T) -> T {
        self.derivative(0, x)
    }

    /// Exact `k`-th derivative at `x`.
    pub fn derivative(&self, k: u32, x: T) -> T {
        let x = self.reduce(x);
        let mut acc = if k == 0 { self.mean } else { T::zero() };
        for h in &self.harmonics {
            let omega = self.angular(h.k);
            let (sin, cos) = (omega * x).sin_cos();
            // d^k/dx^k of cos and sin cycle with period four.
            let (dcos, dsin) = match k % 4 {
                0 => (cos, sin),
                1 => (-sin, cos),
                2 => (-cos, -sin),
                _ => (sin, -cos),
            };
            acc = acc + omega.powi(k as i32) * (h.a * dcos + h.b * dsin);
        }
        acc
    }

    /// Taylor coefficients `F^(k)(x)/k!` for `k = 0..=order`.
    pub fn taylor_coefficients(&self, x: T, order: usize) -> Vec<T> {
        let mut out = Vec::with_capacity(order + 1);
        let mut factorial = T::one();
        for k in 0..=order {
            if k > 0 {
                factorial = factorial * T::from_count(k);
            }
            out.push(self.derivative(k as u32, x) / factorial);
        }
        out
    }

    /// Sum of absolute coefficients; bounds `sup |F|`.
    pub fn amplitude_sum(&self) -> T {
        self.harmonics
            .iter()
            .fold(self.mean.abs(), |acc, h| acc + h.a.abs() + h.b.abs())
    }

    /// Highest angular frequency `2π k_max / L` (zero for a constant force).
    pub fn max_frequency(&self) -> T {
        self.harmonics
            .iter()
            .map(|h| self.angular(h.k))
            .fold(T::zero(), T::max)
    }

    /// Growth constant `C_F = max(1, M, ω)` with `M` the amplitude sum and
    /// `ω` the highest angular frequency. Then `sup|F^(k)| ≤ M ω^k ≤ C_F^(k+1)`.
    pub fn c_f_bound(&self) -> T {
        T::one().max(self.amplitude_sum()).max(self.max_frequency())
    }

    /// Periodic potential `Φ` with `F = -Φ'`. Only exists for zero mean.
    pub fn potential(&self, x: T) -> Result<T> {
        if self.mean != T::zero() {
            return config_err("force.a0 must be zero for the potential to be periodic");
        }
        let x = self.reduce(x);
        Ok(self.harmonics.iter().fold(T::zero(), |acc, h| {
            let omega = self.angular(h.k);
            let (sin, cos) = (omega * x).sin_cos();
            acc + (h.b * cos - h.a * sin) / omega
        }))
    }

    /// The force translated by `shift`: `x ↦ F(x - shift)`.
    pub fn shifted(&self, shift: T) -> Self {
        let harmonics = self
            .harmonics
            .iter()
            .map(|h| {
                let (sin, cos) = (self.angular(h.k) * shift).sin_cos();
                Harmonic {
                    k: h.k,
                    a: h.a * cos - h.b * sin,
                    b: h.a * sin + h.b * cos,
                }
            })
            .collect();
        Self {
            period: self.period,
            mean: self.mean,
            harmonics,
        }
    }

    /// Converts the coefficients to another scalar type.
    pub fn cast<U: Real>(&self) -> ForceSpec<U> {
        let conv = |v: T| U::lit(v.as_f64());
        ForceSpec {
            period: conv(self.period),
            mean: conv(self.mean),
            harmonics: self
                .harmonics
                .iter()
                .map(|h| Harmonic {
                    k: h.k,
                    a: conv(h.a),
                    b: conv(h.b),
                })
                .collect(),
        }
    }
}

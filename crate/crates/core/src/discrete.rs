//! Periodic grid functions over particle indices and the lattice difference
//! operators acting on them.
//!
//! Indices are zero-based and taken modulo `N`:
//!
//! ```text
//! (∇⁺g)(i) = g(i+1) - g(i)      (∇⁻g)(i) = g(i) - g(i-1)      (Sg)(i) = g(i+1)
//! ```

use std::ops::{Add, Index, Mul, Sub};

use serde::Serialize;

use crate::error::{config_err, Result};
use crate::ring::RingConfig;
use crate::scalar::Real;

/// A length-`N` real array interpreted periodically in its index.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Real", transparent)]
pub struct GridFunction<T = f64> {
    values: Vec<T>,
}

impl<T: Real> GridFunction<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.len() < 2 {
            return config_err(format!(
                "grid length must be at least 2, got {}",
                values.len()
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return config_err(format!("grid entry {i} is not finite"));
        }
        Ok(Self { values })
    }

    /// Builds `g(i) = f(i)` for `i = 0..n`. Panics if `n < 2`.
    pub fn from_fn(n: usize, f: impl FnMut(usize) -> T) -> Self {
        assert!(n >= 2, "grid length must be at least 2");
        Self {
            values: (0..n).map(f).collect(),
        }
    }

    pub fn constant(n: usize, value: T) -> Self {
        Self::from_fn(n, |_| value)
    }

    pub fn zeros(n: usize) -> Self {
        Self::constant(n, T::zero())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    /// Periodic access `g(i mod N)` for any integer `i`.
    pub fn at(&self, i: isize) -> T {
        let n = self.values.len() as isize;
        self.values[i.rem_euclid(n) as usize]
    }

    fn next(&self, i: usize) -> T {
        self.values[(i + 1) % self.values.len()]
    }

    fn prev(&self, i: usize) -> T {
        let n = self.values.len();
        self.values[(i + n - 1) % n]
    }

    pub fn nabla_plus(&self) -> Self {
        Self::from_fn(self.len(), |i| self.next(i) - self.values[i])
    }

    pub fn nabla_minus(&self) -> Self {
        Self::from_fn(self.len(), |i| self.values[i] - self.prev(i))
    }

    /// `(Sg)(i) = g(i+1)`.
    pub fn shift(&self) -> Self {
        Self::from_fn(self.len(), |i| self.next(i))
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        assert_eq!(self.len(), other.len(), "grid length mismatch");
        Self {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn scaled(&self, factor: T) -> Self {
        self.map(|v| v * factor)
    }

    pub fn sum(&self) -> T {
        self.values.iter().copied().sum()
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }
}

impl<T: Real> Index<usize> for GridFunction<T> {
    type Output = T;

    fn index(&self, i: usize) -> &T {
        &self.values[i]
    }
}

impl<T: Real> Add for &GridFunction<T> {
    type Output = GridFunction<T>;

    fn add(self, rhs: Self) -> GridFunction<T> {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl<T: Real> Sub for &GridFunction<T> {
    type Output = GridFunction<T>;

    fn sub(self, rhs: Self) -> GridFunction<T> {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl<T: Real> Mul for &GridFunction<T> {
    type Output = GridFunction<T>;

    fn mul(self, rhs: Self) -> GridFunction<T> {
        self.zip_with(rhs, |a, b| a * b)
    }
}

/// `F^(k)(x_i(0))` sampled at the initial lattice.
pub fn force_grid<T: Real>(config: &RingConfig<T>, k: u32) -> GridFunction<T> {
    let force = config.force();
    GridFunction::from_fn(config.n(), |i| {
        force.derivative(k, config.initial_position(i))
    })
}

/// `(∇⁺)^q F^(k)(x_i(0))`. Only forward differences are used; any other
/// sign pattern is a pure index shift of this one.
pub fn iterated_derivative<T: Real>(config: &RingConfig<T>, k: u32, q: usize) -> GridFunction<T> {
    (0..q).fold(force_grid(config, k), |g, _| g.nabla_plus())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::force::ForceSpec;
    use proptest::collection::vec;
    use proptest::prelude::*;
    use std::f64::consts::TAU;

    fn grid(v: &[f64]) -> GridFunction {
        GridFunction::new(v.to_vec()).unwrap()
    }

    #[test]
    fn nabla_examples() {
        assert_eq!(grid(&[3.0; 4]).nabla_plus(), GridFunction::zeros(4));
        assert_eq!(
            grid(&[1.0, 4.0, 9.0]).nabla_plus().values(),
            &[3.0, 5.0, -8.0]
        );
        assert_eq!(grid(&[1.5, -2.0]).nabla_plus().values(), &[-3.5, 3.5]);

        assert_eq!(grid(&[3.0; 4]).nabla_minus(), GridFunction::zeros(4));
        assert_eq!(
            grid(&[1.0, 4.0, 9.0]).nabla_minus().values(),
            &[-8.0, 3.0, 5.0]
        );
    }

    #[test]
    fn second_difference() {
        let g = grid(&[1.0, 4.0, 9.0, 16.0, 2.0]);
        let d2 = g.nabla_plus().nabla_minus();
        for i in 0..5isize {
            assert_eq!(d2[i as usize], g.at(i + 1) - 2.0 * g.at(i) + g.at(i - 1));
        }
    }

    #[test]
    fn nabla_minus_is_shifted_nabla_plus() {
        let g = grid(&[0.3, -1.0, 2.5, 7.0]);
        let plus = g.nabla_plus();
        let minus = g.nabla_minus();
        for i in 0..4isize {
            assert_eq!(minus.at(i), plus.at(i - 1));
        }
    }

    #[test]
    fn rejects_invalid_grids() {
        assert!(GridFunction::new(vec![1.0]).is_err());
        assert!(GridFunction::new(vec![1.0, f64::NAN]).is_err());
    }

    fn sine_ring(n: usize) -> RingConfig {
        RingConfig::new(n, ForceSpec::sine(1.0, 1, 1.0).unwrap(), 8).unwrap()
    }

    #[test]
    fn force_grid_examples() {
        let c = RingConfig::new(5, ForceSpec::constant(1.0, 0.7).unwrap(), 8).unwrap();
        assert_eq!(force_grid(&c, 1), GridFunction::zeros(5));
        assert_eq!(force_grid(&c, 0), GridFunction::constant(5, 0.7));

        let ring = sine_ring(4);
        let f0 = force_grid(&ring, 0);
        let f1 = force_grid(&ring, 1);
        let expect0 = [0.0, 1.0, 0.0, -1.0];
        let expect1 = [TAU, 0.0, -TAU, 0.0];
        for i in 0..4 {
            assert!((f0[i] - expect0[i]).abs() < 1e-15);
            assert!((f1[i] - expect1[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn iterated_derivative_bounds() {
        let force: ForceSpec = ForceSpec::new(
            1.0,
            0.1,
            vec![
                crate::force::Harmonic {
                    k: 1,
                    a: 0.2,
                    b: 0.5,
                },
                crate::force::Harmonic {
                    k: 2,
                    a: -0.3,
                    b: 0.0,
                },
            ],
        )
        .unwrap();
        let cf = force.c_f_bound();
        for &n in &[8usize, 64, 512] {
            let ring = RingConfig::new(n, force.clone(), 8).unwrap();
            let delta = ring.spacing();
            assert_eq!(iterated_derivative(&ring, 2, 0), force_grid(&ring, 2));
            for k in 0..=3u32 {
                for q in 0..=4usize {
                    let m = iterated_derivative(&ring, k, q).max_abs();
                    assert!(
                        m <= cf.powi((k as usize + q + 1) as i32) * delta.powi(q as i32),
                        "k={k} q={q} n={n}"
                    );
                }
            }
            let cf2 = cf * cf;
            assert!(iterated_derivative(&ring, 0, 1).max_abs() <= cf2 * delta);
            assert!(iterated_derivative(&ring, 0, 2).max_abs() <= cf2 * cf * delta * delta);
        }
    }

    fn sized_grid() -> impl Strategy<Value = GridFunction> {
        prop_oneof![Just(2usize), Just(3), Just(8), Just(101)]
            .prop_flat_map(|n| vec(-100.0f64..100.0, n))
            .prop_map(|v| GridFunction::new(v).unwrap())
    }

    proptest! {
        #[test]
        fn operators_commute(g in sized_grid()) {
            prop_assert_eq!(g.nabla_minus().nabla_plus(), g.nabla_plus().nabla_minus());
        }

        #[test]
        fn leibniz_rule(pair in (2usize..40).prop_flat_map(|n| (vec(-10.0f64..10.0, n), vec(-10.0f64..10.0, n)))) {
            let g = GridFunction::new(pair.0).unwrap();
            let f = GridFunction::new(pair.1).unwrap();
            let lhs = (&g * &f).nabla_plus();
            let rhs = &(&f.shift() * &g.nabla_plus()) + &(&g * &f.nabla_plus());
            let scale = g.max_abs() * f.max_abs() + 1.0;
            for i in 0..g.len() {
                prop_assert!((lhs[i] - rhs[i]).abs() <= 1e-13 * scale);
            }
        }

        #[test]
        fn telescoping(g in sized_grid()) {
            let s = g.nabla_plus().sum();
            prop_assert!(s.abs() <= 1e-12 * (g.max_abs() + 1.0) * g.len() as f64);
        }
    }
}

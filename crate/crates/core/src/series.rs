//! Taylor coefficients of the particle velocities.
//!
//! With `v_i(t) = Σ_j c_ij t^j`, the velocities satisfy
//!
//! ```text
//! dv_i/dt = (Δ + R_{i-1})^(-2) - (Δ + R_i)^(-2) + F(x_i(0) + ∫v_i),   R_i = ∫(v_{i+1} - v_i)
//! ```
//!
//! Matching powers of `t` gives `c_ij = (1/j)[rhs]_{j-1}`. Because `R_i` and
//! `∫v_i` start at order two, `[rhs]_{j-1}` only involves `c_{·,k}` with
//! `k ≤ j-2`, so the coefficients are produced order by order.
//!
//! [`compute_coefficients`] evaluates the right-hand side with truncated
//! power-series arithmetic (one new coefficient per series per order).
//! [`oracle_coefficients`] expands the same right-hand side into explicit sums
//! over compositions and is only practical for low orders; it exists to
//! check the fast path.
//!
//! When every harmonic of `F` has index at most `K`, order `j` is exactly a
//! discrete trigonometric polynomial in `i` of degree at most `K⌈j/2⌉`.
//! Rounding errors land in all `N` modes, and the stiff short-wavelength
//! modes of the chain amplify them from one order to the next until they
//! swamp the true coefficients (already around `j ≈ 10` at `N = 256`).
//! [`compute_coefficients`] therefore projects each new order onto its
//! admissible modes; [`compute_coefficients_unfiltered`] skips this.
//!
//! Tables store `ĉ_ij = c_ij s^j`, the coefficients of `v_i(sτ)` in `τ`. A
//! time scale `s ~ N^(-5/6)` keeps the stored values in floating range.

use rayon::prelude::*;
use serde_json::json;

use crate::discrete::{force_grid, GridFunction};
use crate::error::{config_err, Error, Result};
use crate::ring::RingConfig;
use crate::scalar::Real;

/// Highest order accepted by [`oracle_coefficients`].
pub const ORACLE_MAX_ORDER: usize = 9;

/// Scaled Taylor coefficients `ĉ_ij = c_ij s^j` for `i < N`, `1 ≤ j ≤ J_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTable<T = f64> {
    n: usize,
    j_max: usize,
    scale: T,
    length: T,
    // i-major: data[i * j_max + (j - 1)]
    data: Vec<T>,
}

impl<T: Real> CoefficientTable<T> {
    /// Builds a table from row-major scaled values. Used for synthetic input
    /// to the analysis routines and for reloading exported tables.
    pub fn from_scaled(n: usize, j_max: usize, scale: T, length: T, data: Vec<T>) -> Result<Self> {
        if n < 2 || j_max < 1 {
            return config_err(format!("table shape {n}x{j_max} is too small"));
        }
        if data.len() != n * j_max {
            return config_err(format!(
                "table has {} entries, expected {}",
                data.len(),
                n * j_max
            ));
        }
        if !(scale.is_finite() && scale > T::zero() && length > T::zero()) {
            return config_err("table scale and length must be positive");
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Overflow(
                "table contains non-finite coefficients".into(),
            ));
        }
        Ok(Self {
            n,
            j_max,
            scale,
            length,
            data,
        })
    }

    fn from_orders(config: &RingConfig<T>, orders: &[Vec<T>]) -> Self {
        let (n, j_max) = (config.n(), orders.len());
        let mut data = vec![T::zero(); n * j_max];
        for (jm1, order) in orders.iter().enumerate() {
            for (i, &c) in order.iter().enumerate() {
                data[i * j_max + jm1] = c;
            }
        }
        Self {
            n,
            j_max,
            scale: config.scale(),
            length: config.length(),
            data,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn j_max(&self) -> usize {
        self.j_max
    }

    pub fn scale(&self) -> T {
        self.scale
    }

    pub fn length(&self) -> T {
        self.length
    }

    pub fn spacing(&self) -> T {
        self.length / T::from_count(self.n)
    }

    /// `ĉ_ij`, for `1 ≤ j ≤ J_max`.
    pub fn scaled(&self, i: usize, j: usize) -> T {
        assert!(
            (1..=self.j_max).contains(&j),
            "order {j} outside 1..={}",
            self.j_max
        );
        self.data[i * self.j_max + j - 1]
    }

    /// `c_ij = ĉ_ij / s^j`. May overflow to infinity for large `j`; use
    /// [`Self::log_max_abs`] for growth diagnostics.
    pub fn unscaled(&self, i: usize, j: usize) -> T {
        self.scaled(i, j) / self.scale.powi(j as i32)
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.j_max..(i + 1) * self.j_max]
    }

    pub fn scaled_order(&self, j: usize) -> GridFunction<T> {
        GridFunction::from_fn(self.n, |i| self.scaled(i, j))
    }

    pub fn unscaled_order(&self, j: usize) -> GridFunction<T> {
        GridFunction::from_fn(self.n, |i| self.unscaled(i, j))
    }

    /// `ln max_i |c_ij|` computed in log space, `None` when the order vanishes.
    pub fn log_max_abs(&self, j: usize) -> Option<f64> {
        let m = (0..self.n)
            .map(|i| self.scaled(i, j).abs())
            .fold(T::zero(), T::max)
            .as_f64();
        (m > 0.0).then(|| m.ln() - j as f64 * self.scale.as_f64().ln())
    }

    /// Same coefficients expressed with another time scale.
    pub fn rescaled(&self, scale: T) -> Self {
        let ratio = scale / self.scale;
        let mut data = self.data.clone();
        for row in data.chunks_mut(self.j_max) {
            for (jm1, c) in row.iter_mut().enumerate() {
                *c = *c * ratio.powi(jm1 as i32 + 1);
            }
        }
        Self {
            scale,
            data,
            ..self.clone()
        }
    }

    /// CSV export: header `i,j,c_scaled,scale,N,L,J_max`, one row per
    /// `(i, j)` in i-major order, floats with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,j,c_scaled,scale,N,L,J_max\n");
        let scale = fmt_float(self.scale.as_f64());
        let length = fmt_float(self.length.as_f64());
        for i in 0..self.n {
            for j in 1..=self.j_max {
                out.push_str(&format!(
                    "{i},{j},{},{scale},{},{length},{}\n",
                    fmt_float(self.scaled(i, j).as_f64()),
                    self.n,
                    self.j_max
                ));
            }
        }
        out
    }

    /// JSON envelope `{"config": …, "scale": s, "coefficients": [[ĉ_i1, …], …]}`.
    pub fn to_json(&self, config: &RingConfig<T>) -> serde_json::Value {
        let rows: Vec<Vec<f64>> = (0..self.n)
            .map(|i| self.row(i).iter().map(|c| c.as_f64()).collect())
            .collect();
        json!({
            "config": config,
            "scale": self.scale.as_f64(),
            "coefficients": rows,
        })
    }
}

/// `%.16e`: 17 significant digits, enough to round-trip an `f64`.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Per-particle truncated series, extended by one coefficient per order.
struct ParticleJet<T> {
    /// `F^(k)(x_i(0)) / k!`
    taylor: Vec<T>,
    /// `R_i`, the change of the gap to the right neighbour.
    gap: Vec<T>,
    /// `1 / (Δ + R_i)`
    recip: Vec<T>,
    /// `(Δ + R_i)^(-2)`
    inv_sq: Vec<T>,
    /// `x_i - x_i(0)`
    disp: Vec<T>,
    /// `powers[k - 1]` holds `disp^k`.
    powers: Vec<Vec<T>>,
    /// `F(x_i(0) + disp)`
    drive: Vec<T>,
}

impl<T: Real> ParticleJet<T> {
    fn new(taylor: Vec<T>, capacity: usize) -> Self {
        let series = || Vec::with_capacity(capacity);
        let k_cap = taylor.len().saturating_sub(1);
        Self {
            taylor,
            gap: series(),
            recip: series(),
            inv_sq: series(),
            disp: series(),
            powers: (0..k_cap).map(|_| series()).collect(),
            drive: series(),
        }
    }

    /// Appends order `n` given the order-`n` coefficients of `R_i` and the
    /// displacement.
    fn extend(&mut self, gap_n: T, disp_n: T, delta: T) {
        let n = self.gap.len();
        self.gap.push(gap_n);
        self.disp.push(disp_n);

        let recip_n = if n == 0 {
            delta.recip()
        } else {
            let conv: T = (1..=n).map(|k| self.gap[k] * self.recip[n - k]).sum();
            -conv / delta
        };
        self.recip.push(recip_n);
        let sq: T = (0..=n).map(|k| self.recip[k] * self.recip[n - k]).sum();
        self.inv_sq.push(sq);

        // disp has no constant term, so disp^k only needs disp^(k-1) below order n.
        for k in 0..self.powers.len() {
            let value = if k == 0 {
                disp_n
            } else {
                let (lower, upper) = self.powers.split_at(k);
                let prev = &lower[k - 1];
                debug_assert_eq!(upper[0].len(), n);
                (1..n).map(|l| self.disp[l] * prev[n - l]).sum()
            };
            self.powers[k].push(value);
        }

        let mut drive = if n == 0 { self.taylor[0] } else { T::zero() };
        for (k, power) in self.powers.iter().enumerate() {
            drive = drive + self.taylor[k + 1] * power[n];
        }
        self.drive.push(drive);
    }
}

/// Finished orders, with reads restricted to `order ≤ computing - 2`.
struct OrderHistory<'a, T> {
    orders: Vec<Vec<T>>,
    trace: Option<&'a mut Vec<(usize, usize)>>,
}

impl<T> OrderHistory<'_, T> {
    fn read(&mut self, order: usize, computing: usize) -> &[T] {
        assert!(
            order + 2 <= computing,
            "order {computing} must not depend on order {order}"
        );
        if let Some(trace) = self.trace.as_deref_mut() {
            trace.push((computing, order));
        }
        &self.orders[order - 1]
    }
}

/// Projection onto the discrete Fourier modes `|m| ≤ degree` of a periodic
/// grid of length `N`.
struct ModeFilter<T> {
    cos: Vec<T>,
    sin: Vec<T>,
    max_harmonic: usize,
}

impl<T: Real> ModeFilter<T> {
    fn new(config: &RingConfig<T>) -> Self {
        let n = config.n();
        let max_harmonic = config
            .force()
            .harmonics()
            .iter()
            .map(|h| h.k as usize)
            .max()
            .unwrap_or(0);
        let theta = T::TAU() / T::from_count(n);
        Self {
            cos: (0..n).map(|k| (theta * T::from_count(k)).cos()).collect(),
            sin: (0..n).map(|k| (theta * T::from_count(k)).sin()).collect(),
            max_harmonic,
        }
    }

    /// Highest mode present in order `j`.
    fn degree(&self, j: usize) -> usize {
        self.max_harmonic * j.div_ceil(2)
    }

    fn apply(&self, values: &mut [T], j: usize) {
        let n = values.len();
        let degree = self.degree(j);
        // Orders 1 and 2 come straight from the force and carry no noise.
        if j <= 2 || 2 * degree + 1 >= n {
            return;
        }
        let inv_n = T::from_count(n).recip();
        let two = T::lit(2.0);
        let modes: Vec<(T, T)> = (0..=degree)
            .into_par_iter()
            .map(|m| {
                let (mut a, mut b) = (T::zero(), T::zero());
                for (i, &g) in values.iter().enumerate() {
                    let k = (m * i) % n;
                    a = a + g * self.cos[k];
                    b = b + g * self.sin[k];
                }
                let w = if m == 0 { inv_n } else { two * inv_n };
                (a * w, b * w)
            })
            .collect();
        values.par_iter_mut().enumerate().for_each(|(i, g)| {
            *g = modes
                .iter()
                .enumerate()
                .map(|(m, &(a, b))| {
                    let k = (m * i) % n;
                    a * self.cos[k] + b * self.sin[k]
                })
                .sum();
        });
    }
}

/// Computes `ĉ_ij` for all particles up to `config.j_max()`, discarding the
/// Fourier modes each order cannot contain.
pub fn compute_coefficients<T: Real>(config: &RingConfig<T>) -> Result<CoefficientTable<T>> {
    compute_with_trace(config, Some(ModeFilter::new(config)), None)
}

/// Plain recursion without mode filtering. Exact in exact arithmetic, but
/// high orders at large `N` are dominated by amplified rounding noise.
pub fn compute_coefficients_unfiltered<T: Real>(
    config: &RingConfig<T>,
) -> Result<CoefficientTable<T>> {
    compute_with_trace(config, None, None)
}

fn compute_with_trace<T: Real>(
    config: &RingConfig<T>,
    filter: Option<ModeFilter<T>>,
    trace: Option<&mut Vec<(usize, usize)>>,
) -> Result<CoefficientTable<T>> {
    let n = config.n();
    let j_max = config.j_max();
    if j_max < 1 {
        return config_err("ring.J_max must be at least 1");
    }
    let s = config.scale();
    let delta = config.spacing();
    // disp^k first contributes at order 2k, which enters c_{·,2k+1}.
    let k_cap = (j_max - 1) / 2;
    let mut jets: Vec<ParticleJet<T>> = (0..n)
        .map(|i| {
            let taylor = config
                .force()
                .taylor_coefficients(config.initial_position(i), k_cap);
            ParticleJet::new(taylor, j_max)
        })
        .collect();
    let mut history = OrderHistory {
        orders: Vec::with_capacity(j_max),
        trace,
    };

    for j in 1..=j_max {
        let order = j - 1;
        if order == 0 {
            jets.par_iter_mut()
                .for_each(|jet| jet.extend(T::zero(), T::zero(), delta));
        } else {
            // v_i(0) = 0: the order-0 velocity coefficient is zero and never stored.
            let prev: Option<&[T]> = (order >= 2).then(|| history.read(order - 1, j));
            let factor = s / T::from_count(order);
            jets.par_iter_mut().enumerate().for_each(|(i, jet)| {
                let (gap, disp) = match prev {
                    Some(c) => (factor * (c[(i + 1) % n] - c[i]), factor * c[i]),
                    None => (T::zero(), T::zero()),
                };
                jet.extend(gap, disp, delta);
            });
        }

        let factor = s / T::from_count(j);
        let jets_ref = &jets;
        let mut coeffs: Vec<T> = (0..n)
            .into_par_iter()
            .map(|i| {
                let left = &jets_ref[(i + n - 1) % n];
                let me = &jets_ref[i];
                factor * (left.inv_sq[order] - me.inv_sq[order] + me.drive[order])
            })
            .collect();
        if let Some(filter) = &filter {
            filter.apply(&mut coeffs, j);
        }
        if let Some(i) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(Error::Overflow(format!(
                "coefficient of particle {i} at order {j} is not finite (N = {n}, scale = {s}); reduce the time scale"
            )));
        }
        history.orders.push(coeffs);
    }

    Ok(CoefficientTable::from_orders(config, &history.orders))
}

/// Ordered tuples `(j_1, …, j_parts)` with every `j_p ≥ 1` and
/// `(j_1 + 1) + … + (j_parts + 1) = total`.
pub fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    fn walk(remaining: usize, parts: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 0 {
            if remaining == 0 {
                out.push(current.clone());
            }
            return;
        }
        // each remaining part consumes at least 2
        if remaining < 2 * parts {
            return;
        }
        for part in 1..=remaining - 2 * parts + 1 {
            current.push(part);
            walk(remaining - part - 1, parts - 1, current, out);
            current.pop();
        }
    }
    let mut out = Vec::new();
    walk(total, parts, &mut Vec::with_capacity(parts), &mut out);
    out
}

/// `d_m = (-1)^m (m + 1)`, the coefficients of `(1 + r)^(-2)`.
fn binomial_inverse_square<T: Real>(m: usize) -> T {
    let mag = T::from_count(m + 1);
    if m.is_multiple_of(2) {
        mag
    } else {
        -mag
    }
}

/// Literal composition-sum evaluation of the coefficient recursion:
///
/// ```text
/// c_ij = -Σ_m Σ_(j_1..j_m) (1/j) d_m Δ^(-2-m) ∇⁻ Π_p ∇⁺c_{i,j_p}/(j_p+1)
///        +Σ_k Σ_(j_1..j_k) (1/j) F^(k)(x_i(0))/k! Π_p c_{i,j_p}/(j_p+1)
/// ```
///
/// with `m, k ≤ ⌊(j-1)/2⌋`. Cost grows like the number of compositions of
/// `j - 1`, so `j_cap` is limited to [`ORACLE_MAX_ORDER`].
pub fn oracle_coefficients<T: Real>(
    config: &RingConfig<T>,
    j_cap: usize,
) -> Result<CoefficientTable<T>> {
    if j_cap > ORACLE_MAX_ORDER {
        return config_err(format!(
            "oracle order cap {j_cap} exceeds {ORACLE_MAX_ORDER}"
        ));
    }
    if j_cap < 1 {
        return config_err("oracle order cap must be at least 1");
    }
    let top = j_cap.min(config.j_max());
    let n = config.n();
    let delta = config.spacing();
    let k_cap = (top.max(1) - 1) / 2;
    let taylor: Vec<GridFunction<T>> = (0..=k_cap)
        .map(|k| {
            let fact: T = (1..=k).map(T::from_count).fold(T::one(), |a, b| a * b);
            force_grid(config, k as u32).scaled(fact.recip())
        })
        .collect();

    // unscaled c_{·,j}, index j - 1
    let mut c: Vec<GridFunction<T>> = Vec::with_capacity(top);
    for j in 1..=top {
        let value = match j {
            1 => taylor[0].clone(),
            2 => GridFunction::zeros(n),
            _ => {
                let inv_j = T::from_count(j).recip();
                let mut acc = GridFunction::zeros(n);
                for m in 1..=(j - 1) / 2 {
                    let weight =
                        inv_j * binomial_inverse_square::<T>(m) * delta.powi(-2 - m as i32);
                    for comp in compositions(j - 1, m) {
                        let product =
                            comp.iter()
                                .fold(GridFunction::constant(n, T::one()), |p, &jp| {
                                    let factor = c[jp - 1]
                                        .nabla_plus()
                                        .scaled(T::from_count(jp + 1).recip());
                                    &p * &factor
                                });
                        acc = &acc - &product.nabla_minus().scaled(weight);
                    }
                }
                for (k, fk) in taylor.iter().enumerate().take((j - 1) / 2 + 1).skip(1) {
                    for comp in compositions(j - 1, k) {
                        let product = comp.iter().fold(fk.scaled(inv_j), |p, &jp| {
                            &p * &c[jp - 1].scaled(T::from_count(jp + 1).recip())
                        });
                        acc = &acc + &product;
                    }
                }
                acc
            }
        };
        c.push(value);
    }

    let s = config.scale();
    let orders: Vec<Vec<T>> = c
        .iter()
        .enumerate()
        .map(|(jm1, g)| g.scaled(s.powi(jm1 as i32 + 1)).into_values())
        .collect();
    if orders.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Overflow("oracle coefficients are not finite".into()));
    }
    Ok(CoefficientTable::from_orders(config, &orders))
}

/// Closed form of the third coefficient (unscaled):
///
/// ```text
/// c_i3 = (1/6) ( -d_1 Δ^(-3) ∇⁻∇⁺F(x_i(0)) + F(x_i(0)) F'(x_i(0)) ),   d_1 = -2
/// ```
pub fn explicit_c3<T: Real>(config: &RingConfig<T>) -> GridFunction<T> {
    let f0 = force_grid(config, 0);
    let f1 = force_grid(config, 1);
    let d1: T = binomial_inverse_square(1);
    let curvature = f0
        .nabla_plus()
        .nabla_minus()
        .scaled(-d1 / config.spacing().powi(3));
    (&curvature + &(&f0 * &f1)).scaled(T::lit(1.0 / 6.0))
}

/// Fourth coefficient from the `m = k = 1` terms, the only ones allowed at
/// `j = 4`. Both read `c_i2 = 0`, so the result vanishes identically, in
/// line with `v_i` being odd in `t`.
pub fn explicit_c4<T: Real>(config: &RingConfig<T>) -> GridFunction<T> {
    let n = config.n();
    let c2 = GridFunction::zeros(n);
    let third = T::lit(1.0 / 3.0);
    let quarter = T::lit(0.25);
    let d1: T = binomial_inverse_square(1);
    let interaction = c2
        .nabla_plus()
        .scaled(third)
        .nabla_minus()
        .scaled(-quarter * d1 / config.spacing().powi(3));
    let drive = &force_grid(config, 1) * &c2.scaled(third * quarter);
    &interaction + &drive
}

/// Partial sum `Σ_{j ≤ order} ĉ_ij τ^j` at `τ = t/s`, by Horner's rule.
pub fn evaluate_velocity_partial<T: Real>(
    table: &CoefficientTable<T>,
    t: T,
    order: usize,
) -> GridFunction<T> {
    let order = order.min(table.j_max());
    let tau = t / table.scale();
    GridFunction::from_fn(table.n(), |i| {
        let row = &table.row(i)[..order];
        row.iter().rev().fold(T::zero(), |acc, &c| (acc + c) * tau)
    })
}

pub fn evaluate_velocity<T: Real>(table: &CoefficientTable<T>, t: T) -> GridFunction<T> {
    evaluate_velocity_partial(table, t, table.j_max())
}

/// `x_i(t) = x_i(0) + s Σ_j ĉ_ij τ^(j+1)/(j+1)`, optionally reduced into `[0, L)`.
pub fn evaluate_position<T: Real>(
    table: &CoefficientTable<T>,
    t: T,
    wrap: bool,
) -> GridFunction<T> {
    let tau = t / table.scale();
    let delta = table.spacing();
    let length = table.length();
    GridFunction::from_fn(table.n(), |i| {
        let integral = table
            .row(i)
            .iter()
            .enumerate()
            .rev()
            .fold(T::zero(), |acc, (jm1, &c)| {
                (acc + c / T::from_count(jm1 + 2)) * tau
            });
        let x = T::from_count(i) * delta + table.scale() * integral * tau;
        if wrap {
            x - length * (x / length).floor()
        } else {
            x
        }
    })
}

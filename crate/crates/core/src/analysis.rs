//! Growth diagnostics for coefficient tables: convergence-radius estimates,
//! log-log exponent fits across `N`, bound checks, and the one-particle
//! majorant series `(1 - at)^(-1/2)`.
//!
//! Everything here works in `f64` log space, whatever the table's scalar.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{config_err, Error, Result};
use crate::scalar::Real;
use crate::series::CoefficientTable;

/// Orders whose largest coefficient falls below this are treated as zero.
pub const NEGLIGIBLE: f64 = 1e-300;
/// Slack allowed on the growth-exponent cap.
pub const SLOPE_TOLERANCE: f64 = 0.1;
/// Relative noise tolerated in monotone radius trends.
pub const RADIUS_TREND_NOISE: f64 = 0.05;
/// Relative noise tolerated in the `χ` trend.
pub const CHI_TREND_NOISE: f64 = 0.10;
/// Largest order accepted by [`majorant_lemma_check`].
pub const LEMMA_MAX_ORDER: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RadiusMethod {
    #[serde(rename = "root-test")]
    RootTest,
    #[serde(rename = "ratio-test")]
    RatioTest,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadiusEstimate {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "J_max")]
    pub j_max: usize,
    pub method: RadiusMethod,
    /// Estimated radius in time units; infinite when `degenerate`.
    pub r_hat: f64,
    /// Inclusive order window `[j_lo, j_hi]` used by the fit.
    pub window: [usize; 2],
    pub usable_orders: usize,
    /// RMS residual of the fit in log space (spread of the ratios for the ratio test).
    pub residual: f64,
    pub degenerate: bool,
}

/// Least-squares line through `(x, y)` points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_std_err: f64,
    pub rms_residual: f64,
}

pub fn linear_fit(points: &[(f64, f64)]) -> Option<LinearFit> {
    let n = points.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = points
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let slope_std_err = if n > 2 {
        (ssr / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Some(LinearFit {
        slope,
        intercept,
        slope_std_err,
        rms_residual: (ssr / nf).sqrt(),
    })
}

/// 95% two-sided Student-t half-width for a slope fitted through `points` points.
fn half_width(fit: &LinearFit, points: usize) -> f64 {
    if points <= 2 {
        return f64::INFINITY;
    }
    let quantile = StudentsT::new(0.0, 1.0, (points - 2) as f64)
        .map(|t| t.inverse_cdf(0.975))
        .unwrap_or(f64::INFINITY);
    quantile * fit.slope_std_err
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}

/// Root-test estimate over the upper half of the available orders.
pub fn estimate_radius<T: Real>(table: &CoefficientTable<T>) -> Result<RadiusEstimate> {
    estimate_radius_with(table, RadiusMethod::RootTest, 0.5)
}

/// Estimates the convergence radius from `a_j = max_i |c_ij|` over the
/// orders `j ∈ [⌈J_max (1 - tail_fraction)⌉, J_max]`.
///
/// The root test fits `ln a_j ≈ j ln(1/R) + const`; the ratio test takes
/// the median per-order growth between consecutive non-vanishing orders,
/// which also handles series whose odd or even orders vanish.
pub fn estimate_radius_with<T: Real>(
    table: &CoefficientTable<T>,
    method: RadiusMethod,
    tail_fraction: f64,
) -> Result<RadiusEstimate> {
    let j_max = table.j_max();
    if j_max < 8 {
        return config_err(format!("radius estimation needs J_max >= 8, got {j_max}"));
    }
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return config_err(format!(
            "analysis.tail_fraction must lie in (0, 1], got {tail_fraction}"
        ));
    }
    let j_lo = ((j_max as f64 * (1.0 - tail_fraction)).ceil() as usize).max(1);
    let points: Vec<(f64, f64)> = (j_lo..=j_max)
        .filter_map(|j| {
            table
                .log_max_abs(j)
                .filter(|&l| l >= NEGLIGIBLE.ln())
                .map(|l| (j as f64, l))
        })
        .collect();
    let mut estimate = RadiusEstimate {
        n: table.n(),
        j_max,
        method,
        r_hat: f64::INFINITY,
        window: [j_lo, j_max],
        usable_orders: points.len(),
        residual: 0.0,
        degenerate: true,
    };
    if points.len() < 3 {
        return Ok(estimate);
    }
    let log_inverse_radius = match method {
        RadiusMethod::RootTest => {
            let fit = linear_fit(&points).expect("distinct orders");
            estimate.residual = fit.rms_residual;
            fit.slope
        }
        RadiusMethod::RatioTest => {
            let mut rates: Vec<f64> = points
                .windows(2)
                .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
                .collect();
            let mid = median(&mut rates);
            estimate.residual =
                (rates.iter().map(|r| (r - mid).powi(2)).sum::<f64>() / rates.len() as f64).sqrt();
            mid
        }
    };
    estimate.r_hat = (-log_inverse_radius).exp();
    estimate.degenerate = false;
    Ok(estimate)
}

/// Growth of `max_i |c_ij|` with `N` at one order `j`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentEntry {
    pub j: usize,
    #[serde(rename = "N")]
    pub n_grid: Vec<usize>,
    /// `ln max_i |c_ij|` per grid point; `None` where the order vanishes.
    pub log_max: Vec<Option<f64>>,
    /// Fitted exponent; `None` if the order vanishes somewhere on the grid.
    pub slope: Option<f64>,
    /// 95% confidence half-width of the slope.
    pub half_width: Option<f64>,
    /// `exp(intercept)`: the fitted `b_j` in `max_i |c_ij| ≈ b_j N^slope`.
    pub prefactor: Option<f64>,
    /// `(j - 1)/2`
    pub cap_part1: f64,
    /// `(5/6) j - 3/2`
    pub cap_part2: f64,
    /// `slope ≤ cap_part1 + SLOPE_TOLERANCE`; vacuous when the order vanishes.
    pub within_cap: bool,
}

fn validate_grid<T: Real>(tables: &[CoefficientTable<T>]) -> Result<Vec<usize>> {
    if tables.len() < 4 {
        return config_err(format!(
            "an N-grid needs at least 4 points, got {}",
            tables.len()
        ));
    }
    let ns: Vec<usize> = tables.iter().map(|t| t.n()).collect();
    if ns.windows(2).any(|w| w[1] <= w[0]) {
        return config_err("N-grid entries must be strictly increasing");
    }
    let steps: Vec<f64> = ns
        .windows(2)
        .map(|w| (w[1] as f64 / w[0] as f64).ln())
        .collect();
    let mean = steps.iter().sum::<f64>() / steps.len() as f64;
    if steps.iter().any(|s| (s - mean).abs() > 0.05 * mean) {
        return config_err("N-grid must be geometrically spaced");
    }
    let length = tables[0].length().as_f64();
    if tables
        .iter()
        .any(|t| (t.length().as_f64() - length).abs() > 1e-12 * length)
    {
        return config_err("all tables in an N-grid must share L");
    }
    Ok(ns)
}

/// Log-log slope of `max_i |c_ij|` against `N` over a geometric `N`-grid.
pub fn exponent_fit<T: Real>(tables: &[CoefficientTable<T>], j: usize) -> Result<ExponentEntry> {
    let ns = validate_grid(tables)?;
    if j == 0 || tables.iter().any(|t| t.j_max() < j) {
        return config_err(format!("order {j} is not available in every table"));
    }
    let log_max: Vec<Option<f64>> = tables
        .iter()
        .map(|t| t.log_max_abs(j).filter(|&l| l >= NEGLIGIBLE.ln()))
        .collect();
    let cap_part1 = (j as f64 - 1.0) / 2.0;
    let cap_part2 = 5.0 * j as f64 / 6.0 - 1.5;
    let fit = if log_max.iter().all(Option::is_some) {
        let points: Vec<(f64, f64)> = ns
            .iter()
            .zip(&log_max)
            .map(|(&n, l)| ((n as f64).ln(), l.unwrap()))
            .collect();
        linear_fit(&points).map(|f| (f, half_width(&f, points.len())))
    } else {
        None
    };
    Ok(ExponentEntry {
        j,
        n_grid: ns,
        slope: fit.map(|f| f.0.slope),
        half_width: fit.map(|f| f.1),
        prefactor: fit.map(|f| f.0.intercept.exp()),
        cap_part1,
        cap_part2,
        within_cap: fit.is_none_or(|f| f.0.slope <= cap_part1 + SLOPE_TOLERANCE),
        log_max,
    })
}

/// The two closed-form low-order bounds, for one table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowOrderBounds {
    #[serde(rename = "N")]
    pub n: usize,
    pub c3_max: f64,
    /// `(1/3) C_F³ (N/L + 1/2)`
    pub c3_cap: f64,
    pub c4_max: f64,
    /// `(1/4) C_F⁵ + (1/16) C_F⁴`
    pub c4_cap: f64,
    pub holds: bool,
}

pub fn low_order_bounds<T: Real>(table: &CoefficientTable<T>, c_f: f64) -> Result<LowOrderBounds> {
    if table.j_max() < 4 {
        return config_err("low-order bounds need J_max >= 4");
    }
    let max_abs = |j| table.log_max_abs(j).map_or(0.0, f64::exp);
    let inv_spacing = 1.0 / table.spacing().as_f64();
    let c3_max = max_abs(3);
    let c4_max = max_abs(4);
    let c3_cap = c_f.powi(3) * (inv_spacing + 0.5) / 3.0;
    let c4_cap = c_f.powi(5) / 4.0 + c_f.powi(4) / 16.0;
    Ok(LowOrderBounds {
        n: table.n(),
        c3_max,
        c3_cap,
        c4_max,
        c4_cap,
        holds: c3_max <= c3_cap && c4_max <= c4_cap,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChiRow {
    pub j: usize,
    /// `(max_i |c_ij| / N^((5/6)j - 3/2))^(1/j)` per grid point.
    pub chi: Vec<f64>,
    /// `(max_i |c_ij| / N^(j/2))^(1/j)` per grid point.
    pub chi_half_power: Vec<f64>,
    /// No grid step increases `chi` by more than the noise allowance.
    pub non_increasing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    #[serde(rename = "N")]
    pub n_grid: Vec<usize>,
    pub c_f: f64,
    pub rows: Vec<ChiRow>,
    /// Smallest `χ` with `max_i |c_ij| ≤ χ^j N^((5/6)j - 3/2)` on the whole grid.
    pub chi: f64,
    /// Same for the `N^(j/2)` form.
    pub chi_half_power: f64,
    pub chi_bounded: bool,
    pub low_order: Vec<LowOrderBounds>,
    pub low_order_holds: bool,
    pub pass: bool,
}

/// Fits the constant of the `χ^j N^((5/6)j - 3/2)` growth bound on an
/// `N`-grid and checks the two low-order bounds on every table.
pub fn bound_check<T: Real>(tables: &[CoefficientTable<T>], c_f: f64) -> Result<BoundReport> {
    let ns = validate_grid(tables)?;
    let top = tables.iter().map(|t| t.j_max()).min().unwrap_or(0);
    if top < 4 {
        return config_err("bound check needs J_max >= 4");
    }
    let chi_of = |log_max: Option<f64>, j: usize, exponent: f64, n: usize| match log_max {
        Some(l) => ((l - exponent * (n as f64).ln()) / j as f64).exp(),
        None => 0.0,
    };
    let rows: Vec<ChiRow> = (3..=top)
        .map(|j| {
            let part2 = 5.0 * j as f64 / 6.0 - 1.5;
            let half = j as f64 / 2.0;
            let logs: Vec<Option<f64>> = tables.iter().map(|t| t.log_max_abs(j)).collect();
            let chi: Vec<f64> = logs
                .iter()
                .zip(&ns)
                .map(|(&l, &n)| chi_of(l, j, part2, n))
                .collect();
            let chi_half_power = logs
                .iter()
                .zip(&ns)
                .map(|(&l, &n)| chi_of(l, j, half, n))
                .collect();
            let non_increasing = chi
                .windows(2)
                .all(|w| w[1] <= w[0] * (1.0 + CHI_TREND_NOISE));
            ChiRow {
                j,
                chi,
                chi_half_power,
                non_increasing,
            }
        })
        .collect();
    let chi = rows
        .iter()
        .flat_map(|r| r.chi.iter().copied())
        .fold(0.0, f64::max);
    let chi_half_power = rows
        .iter()
        .flat_map(|r| r.chi_half_power.iter().copied())
        .fold(0.0, f64::max);
    let chi_bounded = rows.iter().all(|r| r.non_increasing);
    let low_order = tables
        .iter()
        .map(|t| low_order_bounds(t, c_f))
        .collect::<Result<Vec<_>>>()?;
    let low_order_holds = low_order.iter().all(|b| b.holds);
    Ok(BoundReport {
        n_grid: ns,
        c_f,
        rows,
        chi,
        chi_half_power,
        chi_bounded,
        low_order,
        low_order_holds,
        pass: chi_bounded && low_order_holds,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadiusTrend {
    #[serde(rename = "N")]
    pub n_grid: Vec<usize>,
    pub r_hat: Vec<f64>,
    /// Fitted `α` in `R̂ ∝ N^(-α)`.
    pub alpha: f64,
    pub alpha_half_width: f64,
    /// `R̂` never grows by more than the noise allowance along the grid.
    pub non_increasing: bool,
    /// `α ≤ 5/6 + SLOPE_TOLERANCE`.
    pub alpha_within_lower_bound: bool,
}

pub fn radius_trend(estimates: &[RadiusEstimate]) -> Result<RadiusTrend> {
    if estimates.len() < 2 {
        return config_err("radius trend needs at least two estimates");
    }
    if let Some(e) = estimates.iter().find(|e| e.degenerate) {
        return config_err(format!(
            "radius estimate for N = {} is degenerate; no trend exists",
            e.n
        ));
    }
    let points: Vec<(f64, f64)> = estimates
        .iter()
        .map(|e| ((e.n as f64).ln(), e.r_hat.ln()))
        .collect();
    let fit =
        linear_fit(&points).ok_or_else(|| Error::Config("radius trend needs distinct N".into()))?;
    let alpha = -fit.slope;
    Ok(RadiusTrend {
        n_grid: estimates.iter().map(|e| e.n).collect(),
        r_hat: estimates.iter().map(|e| e.r_hat).collect(),
        alpha,
        alpha_half_width: half_width(&fit, points.len()),
        non_increasing: estimates
            .windows(2)
            .all(|w| w[1].r_hat <= w[0].r_hat * (1.0 + RADIUS_TREND_NOISE)),
        alpha_within_lower_bound: alpha <= 5.0 / 6.0 + SLOPE_TOLERANCE,
    })
}

/// Coefficients `g_j` of `(1 - at)^(-1/2) = Σ g_j t^j`,
/// `g_j = (a/2)^j (2j)! / (2^j j! j!)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MajorantSeries {
    pub a: f64,
    pub coefficients: Vec<f64>,
}

impl MajorantSeries {
    pub fn eval(&self, t: f64) -> f64 {
        self.coefficients
            .iter()
            .rev()
            .fold(0.0, |acc, &g| acc * t + g)
    }

    pub fn closed_form(&self, t: f64) -> f64 {
        (1.0 - self.a * t).powf(-0.5)
    }
}

pub fn majorant(a: f64, order: usize) -> Result<MajorantSeries> {
    if !(a > 0.0 && a.is_finite()) {
        return config_err(format!("majorant parameter a must be positive, got {a}"));
    }
    if order < 1 {
        return config_err("majorant order must be at least 1");
    }
    let mut coefficients = Vec::with_capacity(order + 1);
    let mut g = 1.0f64;
    coefficients.push(g);
    for j in 0..order {
        g *= a * (2 * j + 1) as f64 / (2 * j + 2) as f64;
        if !g.is_finite() {
            return Err(Error::Overflow(format!(
                "majorant coefficient g_{} overflows for a = {a}",
                j + 1
            )));
        }
        coefficients.push(g);
    }
    Ok(MajorantSeries { a, coefficients })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaRow {
    pub j: usize,
    pub g: f64,
    pub rhs: f64,
    /// Numbers of factors `k` that contributed at least one composition.
    pub parts: Vec<usize>,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaReport {
    pub a: f64,
    pub rows: Vec<LemmaRow>,
    pub holds: bool,
}

/// Checks, for `j = 5..=order`,
///
/// ```text
/// g_j ≥ (1/j) Σ_{k=1}^{⌊(j-1)/2⌋} (a/2)^(k+1) (k+1)(k+2)/2 Σ_{j_1..j_k} Π_p g_{j_p}/(j_p+1)
/// ```
///
/// where the inner sum runs over ordered tuples with `j_p ≥ 1` and
/// `Σ (j_p + 1) = j - 1`, enumerated one by one.
pub fn majorant_lemma_check(a: f64, order: usize) -> Result<LemmaReport> {
    if order > LEMMA_MAX_ORDER {
        return config_err(format!(
            "lemma check order {order} exceeds {LEMMA_MAX_ORDER}"
        ));
    }
    if order < 5 {
        return config_err("lemma check needs order >= 5");
    }
    let series = majorant(a, order)?;
    let weights: Vec<f64> = series
        .coefficients
        .iter()
        .enumerate()
        .map(|(j, g)| g / (j + 1) as f64)
        .collect();

    // Sum over compositions of `remaining` into `parts` pieces (j_p + 1), j_p ≥ 1.
    fn composition_sum(remaining: usize, parts: usize, weights: &[f64], count: &mut u64) -> f64 {
        if parts == 0 {
            if remaining == 0 {
                *count += 1;
                return 1.0;
            }
            return 0.0;
        }
        if remaining < 2 * parts {
            return 0.0;
        }
        let mut total = 0.0;
        for jp in 1..=remaining - 2 * parts + 1 {
            total += weights[jp] * composition_sum(remaining - jp - 1, parts - 1, weights, count);
        }
        total
    }

    let half = a / 2.0;
    let rows: Vec<LemmaRow> = (5..=order)
        .map(|j| {
            let mut rhs = 0.0;
            let mut parts = Vec::new();
            for k in 1..=(j - 1) / 2 {
                let mut count = 0u64;
                let inner = composition_sum(j - 1, k, &weights, &mut count);
                if count > 0 {
                    parts.push(k);
                }
                rhs += half.powi(k as i32 + 1) * ((k + 1) * (k + 2)) as f64 / 2.0 * inner;
            }
            rhs /= j as f64;
            let g = series.coefficients[j];
            LemmaRow {
                j,
                g,
                rhs,
                parts,
                holds: g >= rhs,
            }
        })
        .collect();
    let holds = rows.iter().all(|r| r.holds);
    Ok(LemmaReport { a, rows, holds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::force::ForceSpec;
    use crate::ring::RingConfig;
    use crate::series::compute_coefficients;
    use proptest::prelude::*;

    fn geometric_table(n: usize, rho: f64, j_max: usize) -> CoefficientTable {
        let data = (0..n)
            .flat_map(|i| (1..=j_max).map(move |j| (1.0 + 0.1 * i as f64) * rho.powi(-(j as i32))))
            .collect();
        CoefficientTable::from_scaled(n, j_max, 1.0, 1.0, data).unwrap()
    }

    #[test]
    fn geometric_radius_recovered() {
        for &rho in &[0.1, 2.0, 10.0] {
            let table = geometric_table(4, rho, 24);
            for method in [RadiusMethod::RootTest, RadiusMethod::RatioTest] {
                let est = estimate_radius_with(&table, method, 0.5).unwrap();
                assert!(!est.degenerate);
                assert!(
                    (est.r_hat / rho - 1.0).abs() < 0.01,
                    "{method:?} {rho}: {}",
                    est.r_hat
                );
                assert_eq!(est.window, [12, 24]);
            }
        }
    }

    #[test]
    fn sparse_tables_never_nan() {
        // even orders zero, as in the physical tables
        let n = 3;
        let j_max = 20;
        let data = (0..n)
            .flat_map(|_| (1..=j_max).map(|j| if j % 2 == 0 { 0.0 } else { 3f64.powi(j as i32) }))
            .collect();
        let table = CoefficientTable::from_scaled(n, j_max, 1.0, 1.0, data).unwrap();
        for method in [RadiusMethod::RootTest, RadiusMethod::RatioTest] {
            let est = estimate_radius_with(&table, method, 0.5).unwrap();
            assert!(est.r_hat.is_finite());
            assert!((est.r_hat * 3.0 - 1.0).abs() < 0.01, "{method:?}");
        }
    }

    #[test]
    fn constant_force_is_degenerate() {
        let ring = RingConfig::new(8, ForceSpec::constant(1.0, 0.4).unwrap(), 16).unwrap();
        let table = compute_coefficients(&ring).unwrap();
        let est = estimate_radius(&table).unwrap();
        assert!(est.degenerate);
        assert!(est.r_hat.is_infinite());
        assert_eq!(
            serde_json::to_value(&est).unwrap()["r_hat"],
            serde_json::Value::Null
        );
    }

    #[test]
    fn radius_needs_enough_orders() {
        let table = geometric_table(3, 2.0, 6);
        assert!(estimate_radius(&table).is_err());
    }

    #[test]
    fn linear_fit_exact_line() {
        let pts: Vec<(f64, f64)> = (0..5).map(|x| (x as f64, 2.0 - 0.5 * x as f64)).collect();
        let fit = linear_fit(&pts).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-14);
        assert!((fit.intercept - 2.0).abs() < 1e-14);
        assert!(fit.rms_residual < 1e-14);
        assert!(linear_fit(&[(1.0, 1.0)]).is_none());
    }

    fn sine_tables(ns: &[usize], j_max: usize) -> Vec<CoefficientTable> {
        ns.iter()
            .map(|&n| {
                let ring =
                    RingConfig::new(n, ForceSpec::sine(1.0, 1, 0.5).unwrap(), j_max).unwrap();
                compute_coefficients(&ring).unwrap()
            })
            .collect()
    }

    #[test]
    fn exponent_examples() {
        let tables = sine_tables(&[16, 32, 64, 128, 256], 9);
        let first = exponent_fit(&tables, 1).unwrap();
        assert!(first.slope.unwrap().abs() < 0.05);
        let third = exponent_fit(&tables, 3).unwrap();
        let slope = third.slope.unwrap();
        assert!((0.9..=1.1).contains(&slope), "slope {slope}");
        let fifth = exponent_fit(&tables, 5).unwrap();
        assert!(fifth.slope.unwrap() <= 2.1);
        assert!(fifth.within_cap);
        let even = exponent_fit(&tables, 4).unwrap();
        assert_eq!(even.slope, None);
        assert!(even.within_cap);
    }

    #[test]
    fn grid_validation() {
        let tables = sine_tables(&[16, 32, 64], 5);
        assert!(exponent_fit(&tables, 3).is_err());
        let uneven = sine_tables(&[16, 32, 64, 200], 5);
        assert!(exponent_fit(&uneven, 3).is_err());
        let ok = sine_tables(&[16, 32, 64, 128], 5);
        assert!(exponent_fit(&ok, 6).is_err());
    }

    #[test]
    fn bound_check_reports() {
        let tables = sine_tables(&[16, 32, 64, 128], 12);
        let cf = ForceSpec::sine(1.0, 1, 0.5).unwrap().c_f_bound();
        let report = bound_check(&tables, cf).unwrap();
        assert!(report.low_order_holds);
        assert!(report.chi > 0.0);
        assert_eq!(report.rows.len(), 10);
        assert!(report
            .rows
            .iter()
            .filter(|r| r.j % 2 == 0)
            .all(|r| r.chi.iter().all(|&c| c == 0.0)));
    }

    #[test]
    fn constant_force_chi_zero() {
        let tables: Vec<CoefficientTable> = [8usize, 16, 32, 64]
            .iter()
            .map(|&n| {
                let ring = RingConfig::new(n, ForceSpec::constant(1.0, 0.3).unwrap(), 8).unwrap();
                compute_coefficients(&ring).unwrap()
            })
            .collect();
        let report = bound_check(&tables, 1.0).unwrap();
        assert_eq!(report.chi, 0.0);
        assert!(report.pass);
    }

    #[test]
    fn radius_trend_fit() {
        let estimates: Vec<RadiusEstimate> = [16usize, 32, 64, 128]
            .iter()
            .map(|&n| RadiusEstimate {
                n,
                j_max: 16,
                method: RadiusMethod::RootTest,
                r_hat: 3.0 * (n as f64).powf(-0.5),
                window: [8, 16],
                usable_orders: 4,
                residual: 0.0,
                degenerate: false,
            })
            .collect();
        let trend = radius_trend(&estimates).unwrap();
        assert!((trend.alpha - 0.5).abs() < 1e-12);
        assert!(trend.non_increasing);
        assert!(trend.alpha_within_lower_bound);
    }

    #[test]
    fn majorant_values() {
        let m = majorant(2.0, 3).unwrap();
        assert_eq!(m.coefficients, vec![1.0, 1.0, 1.5, 2.5]);
        let m = majorant(2.0, 60).unwrap();
        let t = 0.1 / 2.0;
        assert!((m.eval(t) - m.closed_form(t)).abs() < 1e-12);
        assert!(majorant(0.0, 5).is_err());
        assert!(matches!(majorant(1e300, 10), Err(Error::Overflow(_))));
    }

    #[test]
    fn majorant_asymptotics() {
        // g_j ~ a^j / sqrt(πj)
        for &a in &[0.5, 2.0] {
            let m = majorant(a, 100).unwrap();
            let ratio = m.coefficients[100] / (a.powi(100) / (std::f64::consts::PI * 100.0).sqrt());
            assert!((ratio - 1.0).abs() < 0.02, "ratio {ratio}");
        }
    }

    #[test]
    fn lemma_examples() {
        let report = majorant_lemma_check(2.0, 5).unwrap();
        assert!(report.holds);
        assert_eq!(report.rows[0].parts, vec![1, 2]);
        assert!(majorant_lemma_check(0.1, 20).unwrap().holds);
        assert!(majorant_lemma_check(2.0, 41).is_err());
        assert!(majorant_lemma_check(2.0, 4).is_err());
    }

    #[test]
    fn lemma_rhs_by_hand_at_five() {
        // j = 5: k = 1 uses (3); k = 2 uses (1, 1)
        let a: f64 = 2.0;
        let g = majorant(a, 5).unwrap().coefficients;
        let h = a / 2.0;
        let expect = (h.powi(2) * 3.0 * g[3] / 4.0 + h.powi(3) * 6.0 * (g[1] / 2.0).powi(2)) / 5.0;
        let report = majorant_lemma_check(a, 5).unwrap();
        assert!((report.rows[0].rhs - expect).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn majorant_positive_and_log_convex(a in 0.01f64..10.0) {
            let g = majorant(a, 80).unwrap().coefficients;
            prop_assert!(g.iter().all(|&v| v > 0.0));
            for j in 1..80 {
                let curvature = g[j + 1].ln() - 2.0 * g[j].ln() + g[j - 1].ln();
                prop_assert!(curvature >= -1e-12);
            }
        }
    }
}

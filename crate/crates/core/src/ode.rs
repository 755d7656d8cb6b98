//! Direct integration of the equations of motion
//!
//! ```text
//! x_i'' = Δ_{i-1}^(-2) - Δ_i^(-2) + F(x_i),    Δ_i = x_{i+1} - x_i  (cyclic, x_N = x_0 + L)
//! ```
//!
//! with the Dormand–Prince 5(4) embedded pair and standard step-size control.
//! The integrator works on displacements from the initial lattice, so gaps
//! are formed as `Δ + (u_{i+1} - u_i)` without cancellation against the
//! absolute positions.

use serde::Serialize;

use crate::error::{config_err, Error, Result};
use crate::ring::RingConfig;
use crate::scalar::Real;
use crate::series::fmt_float;

/// Relative gap floor: a gap below `GAP_FLOOR · L/N` is a collision.
pub const GAP_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct TrajectoryState<T = f64> {
    pub t: T,
    /// Unwrapped positions.
    pub x: Vec<T>,
    pub v: Vec<T>,
}

impl<T: Real> TrajectoryState<T> {
    /// Equally spaced particles at rest.
    pub fn initial(config: &RingConfig<T>) -> Self {
        let n = config.n();
        Self {
            t: T::zero(),
            x: (0..n).map(|i| config.initial_position(i)).collect(),
            v: vec![T::zero(); n],
        }
    }

    /// Cyclic gaps `x_{i+1} - x_i`, closing the ring with `x_0 + L`.
    pub fn gaps(&self, length: T) -> Vec<T> {
        let n = self.x.len();
        (0..n)
            .map(|i| {
                if i + 1 < n {
                    self.x[i + 1] - self.x[i]
                } else {
                    self.x[0] + length - self.x[i]
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct Tolerances<T = f64> {
    pub rel: T,
    pub abs: T,
}

impl<T: Real> Tolerances<T> {
    pub fn new(rel: T, abs: T) -> Result<Self> {
        let limit = T::lit(1e-2);
        if !(rel > T::zero() && rel <= limit) {
            return config_err(format!("ode.rel_tol must lie in (0, 1e-2], got {rel}"));
        }
        if !(abs > T::zero() && abs <= limit) {
            return config_err(format!("ode.abs_tol must lie in (0, 1e-2], got {abs}"));
        }
        Ok(Self { rel, abs })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
    pub min_step: f64,
    pub max_step: f64,
}

#[derive(Debug, Clone, Serialize)]
#[serde(bound = "T: Real")]
pub struct OdeSolution<T = f64> {
    /// The initial state followed by one state per requested sample time.
    pub states: Vec<TrajectoryState<T>>,
    /// Largest weighted local error estimate among accepted steps (≤ 1).
    pub max_local_error: f64,
    pub stats: StepStats,
    /// `max |E(t) - E(0)| / |E(0)|` over accepted steps, when the force has
    /// zero mean.
    pub max_energy_drift: Option<f64>,
}

impl<T: Real> OdeSolution<T> {
    pub fn times(&self) -> Vec<T> {
        self.states.iter().map(|s| s.t).collect()
    }

    pub fn last(&self) -> &TrajectoryState<T> {
        self.states
            .last()
            .expect("solution holds the initial state")
    }

    /// `t,i,x,v`, one row per sample and particle.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,i,x,v\n");
        for s in &self.states {
            let t = fmt_float(s.t.as_f64());
            for (i, (x, v)) in s.x.iter().zip(&s.v).enumerate() {
                out.push_str(&format!(
                    "{t},{i},{},{}\n",
                    fmt_float(x.as_f64()),
                    fmt_float(v.as_f64())
                ));
            }
        }
        out
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "samples": self.states.len(),
            "t_end": self.last().t.as_f64(),
            "stats": self.stats,
            "max_local_error": self.max_local_error,
            "max_energy_drift": self.max_energy_drift,
        })
    }
}

fn check_gaps<T: Real>(gaps: &[T], floor: T, t: T) -> Result<()> {
    match gaps
        .iter()
        .position(|&g| g.partial_cmp(&floor) != Some(std::cmp::Ordering::Greater))
    {
        Some(index) => Err(Error::Collision {
            index,
            gap: gaps[index].as_f64(),
            floor: floor.as_f64(),
            t: t.as_f64(),
        }),
        None => Ok(()),
    }
}

fn accelerations_from_gaps<T: Real>(
    config: &RingConfig<T>,
    x: impl Fn(usize) -> T,
    gaps: &[T],
) -> Vec<T> {
    let n = gaps.len();
    let force = config.force();
    (0..n)
        .map(|i| {
            let left = gaps[(i + n - 1) % n];
            let right = gaps[i];
            (left * left).recip() - (right * right).recip() + force.eval(x(i))
        })
        .collect()
}

fn gap_floor<T: Real>(config: &RingConfig<T>) -> T {
    T::lit(GAP_FLOOR) * config.spacing()
}

/// Right-hand side `a_i` of the equations of motion at `state`.
pub fn acceleration<T: Real>(config: &RingConfig<T>, state: &TrajectoryState<T>) -> Result<Vec<T>> {
    if state.x.len() != config.n() {
        return config_err("state size does not match ring.N");
    }
    let gaps = state.gaps(config.length());
    check_gaps(&gaps, gap_floor(config), state.t)?;
    Ok(accelerations_from_gaps(config, |i| state.x[i], &gaps))
}

/// `E = Σ v²/2 + Σ 1/Δ_i + Σ Φ(x_i)` with `F = -Φ'`; requires `a0 = 0`.
pub fn energy<T: Real>(config: &RingConfig<T>, state: &TrajectoryState<T>) -> Result<T> {
    let force = config.force();
    let kinetic: T = state.v.iter().map(|&v| v * v * T::lit(0.5)).sum();
    let interaction: T = state.gaps(config.length()).iter().map(|g| g.recip()).sum();
    let mut external = T::zero();
    for &x in &state.x {
        external = external + force.potential(x)?;
    }
    Ok(kinetic + interaction + external)
}

/// Internal state: displacements from the lattice, then velocities.
struct System<'a, T> {
    config: &'a RingConfig<T>,
    lattice: Vec<T>,
    floor: T,
}

impl<T: Real> System<'_, T> {
    fn n(&self) -> usize {
        self.lattice.len()
    }

    fn gaps(&self, u: &[T]) -> Vec<T> {
        let n = self.n();
        let delta = self.config.spacing();
        (0..n).map(|i| delta + (u[(i + 1) % n] - u[i])).collect()
    }

    fn rhs(&self, t: T, y: &[T], out: &mut [T]) -> Result<()> {
        let n = self.n();
        let (u, v) = y.split_at(n);
        let gaps = self.gaps(u);
        check_gaps(&gaps, self.floor, t)?;
        let acc = accelerations_from_gaps(self.config, |i| self.lattice[i] + u[i], &gaps);
        out[..n].copy_from_slice(v);
        out[n..].copy_from_slice(&acc);
        Ok(())
    }

    fn state(&self, t: T, y: &[T]) -> TrajectoryState<T> {
        let n = self.n();
        TrajectoryState {
            t,
            x: (0..n).map(|i| self.lattice[i] + y[i]).collect(),
            v: y[n..].to_vec(),
        }
    }
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// Fifth-order weights minus embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;
const MAX_STEPS: usize = 50_000_000;

/// Integrates from the lattice at rest up to `t_end`, reporting the state at
/// each of `sample_times` (strictly increasing, in `(0, t_end]`) and at `t_end`.
pub fn integrate<T: Real>(
    config: &RingConfig<T>,
    t_end: T,
    tol: Tolerances<T>,
    sample_times: &[T],
) -> Result<OdeSolution<T>> {
    integrate_from(
        config,
        &TrajectoryState::initial(config),
        t_end,
        tol,
        sample_times,
    )
}

/// Like [`integrate`], from an arbitrary state; `t_end` and the sample times
/// are measured from `initial.t`.
pub fn integrate_from<T: Real>(
    config: &RingConfig<T>,
    initial: &TrajectoryState<T>,
    t_end: T,
    tol: Tolerances<T>,
    sample_times: &[T],
) -> Result<OdeSolution<T>> {
    let n = config.n();
    if initial.x.len() != n || initial.v.len() != n {
        return config_err("initial state size does not match ring.N");
    }
    if !(t_end > T::zero() && t_end.is_finite()) {
        return config_err(format!("ode.t_end must be positive, got {t_end}"));
    }
    let mut targets: Vec<T> = Vec::with_capacity(sample_times.len() + 1);
    for &s in sample_times {
        if !(s > T::zero() && s <= t_end) {
            return config_err(format!("sample time {s} outside (0, t_end]"));
        }
        if targets.last().is_some_and(|&last| s <= last) {
            return config_err("sample times must be strictly increasing");
        }
        targets.push(s);
    }
    if targets.last() != Some(&t_end) {
        targets.push(t_end);
    }

    let system = System {
        config,
        lattice: (0..n).map(|i| config.initial_position(i)).collect(),
        floor: gap_floor(config),
    };
    let t0 = initial.t;
    let mut y: Vec<T> = initial
        .x
        .iter()
        .zip(&system.lattice)
        .map(|(&x, &x0)| x - x0)
        .chain(initial.v.iter().copied())
        .collect();
    let dim = y.len();
    check_gaps(&system.gaps(&y[..n]), system.floor, t0)?;

    let track_energy = config.force().mean() == T::zero();
    let e0 = if track_energy {
        Some(energy(config, initial)?.as_f64())
    } else {
        None
    };
    let mut max_drift: f64 = 0.0;

    let mut k: Vec<Vec<T>> = vec![vec![T::zero(); dim]; 7];
    let mut stage = vec![T::zero(); dim];
    let mut y_new = vec![T::zero(); dim];
    let mut stats = StepStats {
        min_step: f64::INFINITY,
        ..StepStats::default()
    };
    let mut max_local_error: f64 = 0.0;

    system.rhs(t0, &y, &mut k[0])?;
    stats.evaluations += 1;

    let weight = |a: T, b: T| tol.abs.as_f64() + tol.rel.as_f64() * a.abs().max(b.abs()).as_f64();
    let norm = |vals: &[T], scale_from: &[T]| -> f64 {
        let sum: f64 = vals
            .iter()
            .zip(scale_from)
            .map(|(&v, &s)| {
                let r = v.as_f64() / weight(s, s);
                r * r
            })
            .sum();
        (sum / vals.len() as f64).sqrt()
    };

    // initial step guess
    let mut h = {
        let d0 = norm(&y, &y);
        let d1 = norm(&k[0], &y);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        let h0 = h0.min(t_end.as_f64());
        for (s, (&yi, &fi)) in stage.iter_mut().zip(y.iter().zip(&k[0])) {
            *s = yi + T::lit(h0) * fi;
        }
        let mut f1 = vec![T::zero(); dim];
        let h1 = match system.rhs(t0 + T::lit(h0), &stage, &mut f1) {
            Ok(()) => {
                stats.evaluations += 1;
                let diff: Vec<T> = f1.iter().zip(&k[0]).map(|(&a, &b)| a - b).collect();
                let d2 = norm(&diff, &y) / h0;
                let dmax = d1.max(d2);
                if dmax <= 1e-15 {
                    (h0 * 1e-3).max(1e-6)
                } else {
                    (0.01 / dmax).powf(0.2)
                }
            }
            Err(_) => h0 * 0.1,
        };
        (100.0 * h0).min(h1).min(t_end.as_f64())
    };

    let mut states = vec![initial.clone()];
    let mut t_rel = 0.0f64;
    let t_end_f = t_end.as_f64();
    let min_step = 1e-15 * t_end_f;
    let mut target_idx = 0;
    let mut last_rejected = false;
    let mut last_collision: Option<Error> = None;

    while target_idx < targets.len() {
        if stats.accepted + stats.rejected > MAX_STEPS {
            return Err(Error::Stiffness {
                t: (t0.as_f64() + t_rel),
                step: h,
            });
        }
        if h < min_step {
            return Err(last_collision.unwrap_or(Error::Stiffness {
                t: t0.as_f64() + t_rel,
                step: h,
            }));
        }
        let target = targets[target_idx].as_f64();
        let mut hits_target = false;
        let mut step = h;
        if t_rel + step >= target * (1.0 - 1e-14) {
            step = target - t_rel;
            hits_target = true;
        }
        let hs = T::lit(step);

        // stages 2..7
        let mut failed = None;
        for s in 1..7 {
            for d in 0..dim {
                let mut acc = y[d];
                for (r, kr) in k.iter().enumerate().take(s) {
                    let a = A[s][r];
                    if a != 0.0 {
                        acc = acc + hs * T::lit(a) * kr[d];
                    }
                }
                stage[d] = acc;
            }
            let ts = t0 + T::lit(t_rel + C[s] * step);
            if let Err(e) = system.rhs(ts, &stage, &mut k[s]) {
                failed = Some(e);
                break;
            }
            stats.evaluations += 1;
            if s == 6 {
                y_new.copy_from_slice(&stage);
            }
        }
        if let Some(e) = failed {
            // a trial stage crossed particles: shrink and retry
            last_collision = Some(e);
            stats.rejected += 1;
            last_rejected = true;
            h = step * 0.25;
            continue;
        }

        let err: Vec<T> = (0..dim)
            .map(|d| {
                let mut e = T::zero();
                for (r, kr) in k.iter().enumerate() {
                    if E[r] != 0.0 {
                        e = e + T::lit(E[r]) * kr[d];
                    }
                }
                hs * e
            })
            .collect();
        let err_norm = {
            let sum: f64 = (0..dim)
                .map(|d| {
                    let r = err[d].as_f64() / weight(y[d], y_new[d]);
                    r * r
                })
                .sum();
            (sum / dim as f64).sqrt()
        };

        if err_norm <= 1.0 {
            stats.accepted += 1;
            stats.min_step = stats.min_step.min(step);
            stats.max_step = stats.max_step.max(step);
            max_local_error = max_local_error.max(err_norm);
            t_rel = if hits_target { target } else { t_rel + step };
            std::mem::swap(&mut y, &mut y_new);
            // FSAL: the last stage is the derivative at the new point
            let (first, rest) = k.split_at_mut(6);
            first[0].copy_from_slice(&rest[0]);
            check_gaps(&system.gaps(&y[..n]), system.floor, t0 + T::lit(t_rel))?;
            last_collision = None;

            if let Some(e0) = e0 {
                let state = system.state(t0 + T::lit(t_rel), &y);
                let e = energy(config, &state)?.as_f64();
                max_drift = max_drift.max(((e - e0) / e0).abs());
            }
            if hits_target {
                let t_abs = t0 + targets[target_idx];
                states.push(system.state(t_abs, &y));
                target_idx += 1;
            }
            let mut factor = if err_norm == 0.0 {
                MAX_FACTOR
            } else {
                (SAFETY * err_norm.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
            };
            if last_rejected {
                factor = factor.min(1.0);
            }
            last_rejected = false;
            let proposed = step * factor;
            // a step clipped to a sample time says little about the natural size
            h = if hits_target && step < h && factor >= 1.0 {
                h
            } else if hits_target && step < h {
                proposed.min(h)
            } else {
                proposed
            };
        } else {
            stats.rejected += 1;
            last_rejected = true;
            h = step * (SAFETY * err_norm.powf(-0.2)).max(MIN_FACTOR);
        }
    }

    if stats.accepted == 0 {
        stats.min_step = 0.0;
    }
    Ok(OdeSolution {
        states,
        max_local_error,
        stats,
        max_energy_drift: e0.map(|_| max_drift),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::force::ForceSpec;

    fn ring(n: usize, force: ForceSpec) -> RingConfig {
        RingConfig::new(n, force, 8).unwrap()
    }

    fn tol(rel: f64) -> Tolerances {
        Tolerances::new(rel, rel * 1e-3).unwrap()
    }

    #[test]
    fn acceleration_examples() {
        let zero = ring(6, ForceSpec::constant(1.0, 0.0).unwrap());
        let a = acceleration(&zero, &TrajectoryState::initial(&zero)).unwrap();
        assert!(a.iter().all(|v| v.abs() < 1e-9));

        let c = ring(5, ForceSpec::constant(1.0, 0.6).unwrap());
        let a = acceleration(&c, &TrajectoryState::initial(&c)).unwrap();
        assert!(a.iter().all(|v| (v - 0.6).abs() < 1e-9));

        let two = ring(2, ForceSpec::constant(1.0, 0.0).unwrap());
        let state = TrajectoryState {
            t: 0.0,
            x: vec![0.0, 0.4],
            v: vec![0.0; 2],
        };
        let a = acceleration(&two, &state).unwrap();
        let expect = 0.6f64.powi(-2) - 0.4f64.powi(-2);
        assert!((a[0] - expect).abs() < 1e-12);
        assert!((a[1] + expect).abs() < 1e-12);
        assert!((expect + 3.472_222_222_222_222).abs() < 1e-12);
    }

    #[test]
    fn collision_detected() {
        let two = ring(2, ForceSpec::constant(1.0, 0.0).unwrap());
        let state = TrajectoryState {
            t: 0.0,
            x: vec![0.0, 1e-12],
            v: vec![0.0; 2],
        };
        assert!(matches!(
            acceleration(&two, &state),
            Err(Error::Collision { index: 0, .. })
        ));
    }

    #[test]
    fn energy_examples() {
        let zero = ring(5, ForceSpec::constant(2.0, 0.0).unwrap());
        let e = energy(&zero, &TrajectoryState::initial(&zero)).unwrap();
        assert!((e - 25.0 / 2.0).abs() < 1e-12);

        let two = ring(2, ForceSpec::constant(1.0, 0.0).unwrap());
        let state = TrajectoryState {
            t: 0.0,
            x: vec![0.0, 0.4],
            v: vec![0.0; 2],
        };
        let e = energy(&two, &state).unwrap();
        assert!((e - (1.0 / 0.4 + 1.0 / 0.6)).abs() < 1e-12);

        let biased = ring(3, ForceSpec::constant(1.0, 0.3).unwrap());
        assert!(matches!(
            energy(&biased, &TrajectoryState::initial(&biased)),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn rest_stays_at_rest() {
        let zero = ring(7, ForceSpec::constant(1.0, 0.0).unwrap());
        let sol = integrate(&zero, 0.5, tol(1e-10), &[0.1, 0.25]).unwrap();
        assert_eq!(sol.states.len(), 4);
        let init = TrajectoryState::initial(&zero);
        for s in &sol.states {
            for i in 0..7 {
                assert!((s.x[i] - init.x[i]).abs() < 1e-14);
                assert!(s.v[i].abs() < 1e-14);
            }
        }
    }

    #[test]
    fn constant_force_is_uniform_acceleration() {
        let c = ring(6, ForceSpec::constant(1.0, 0.8).unwrap());
        let samples = [0.05, 0.1, 0.3];
        let sol = integrate(&c, 0.3, tol(1e-11), &samples).unwrap();
        for s in &sol.states[1..] {
            for i in 0..6 {
                assert!((s.v[i] - 0.8 * s.t).abs() <= 1e-12);
                let x0 = i as f64 / 6.0;
                assert!((s.x[i] - x0 - 0.4 * s.t * s.t).abs() <= 1e-12);
            }
        }
        assert_eq!(sol.max_energy_drift, None);
    }

    #[test]
    fn rejects_bad_inputs() {
        let c = ring(4, ForceSpec::sine(1.0, 1, 0.5).unwrap());
        assert!(integrate(&c, -1.0, tol(1e-8), &[]).is_err());
        assert!(integrate(&c, 1.0, tol(1e-8), &[0.5, 0.2]).is_err());
        assert!(integrate(&c, 1.0, tol(1e-8), &[2.0]).is_err());
        assert!(Tolerances::new(0.5, 1e-9).is_err());
        assert!(Tolerances::new(1e-9, 0.0).is_err());
    }

    #[test]
    fn tighter_tolerance_converges() {
        let c = ring(8, ForceSpec::sine(1.0, 1, 0.5).unwrap());
        let reference = integrate(&c, 0.2, tol(1e-13), &[]).unwrap();
        let diff = |rel: f64| {
            let sol = integrate(&c, 0.2, tol(rel), &[]).unwrap();
            sol.last()
                .v
                .iter()
                .zip(&reference.last().v)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        };
        let coarse = diff(1e-6);
        let fine = diff(1e-9);
        assert!(fine < coarse, "fine {fine} coarse {coarse}");
    }

    #[test]
    fn order_is_preserved() {
        let c = ring(16, ForceSpec::sine(1.0, 1, 2.0).unwrap());
        let samples: Vec<f64> = (1..=20).map(|k| k as f64 * 0.01).collect();
        let sol = integrate(&c, 0.2, tol(1e-9), &samples).unwrap();
        for s in &sol.states {
            assert!(s.gaps(1.0).iter().all(|&g| g > 0.0));
            let total: f64 = s.gaps(1.0).iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_and_summary() {
        let c = ring(3, ForceSpec::sine(1.0, 1, 0.5).unwrap());
        let sol = integrate(&c, 0.01, tol(1e-9), &[0.005]).unwrap();
        let csv = sol.to_csv();
        assert!(csv.starts_with("t,i,x,v\n"));
        assert_eq!(csv.lines().count(), 1 + 3 * 3);
        let summary = sol.summary_json();
        assert_eq!(summary["samples"], 3);
        assert!(summary["max_energy_drift"].as_f64().is_some());
    }
}

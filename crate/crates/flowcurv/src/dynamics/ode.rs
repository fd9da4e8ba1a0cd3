//! Adaptive fifth-order Runge–Kutta integration (Dormand–Prince pair) with
//! dense output, resampled onto a uniform grid.

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::field_dsl::BoundField;

/// States whose norm exceeds this are treated as numerically divergent; the
/// trajectory is truncated and flagged rather than reported as an error.
pub const DIVERGENCE_NORM: f64 = 1e6;

// Dormand–Prince 5(4) tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
// Difference between the 5th- and 4th-order weights (error estimator).
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// Weights of the quartic interpolant used for dense output.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

/// Integration settings.
#[derive(Debug, Clone)]
pub struct IntegrateOptions {
    /// Final integration time (the solve always starts at t = 0).
    pub t_end: f64,
    /// Spacing of the uniform output grid.
    pub dt_output: f64,
    /// Samples earlier than this are discarded.
    pub transient: f64,
    /// Absolute local error tolerance.
    pub abs_tol: f64,
    /// Relative local error tolerance.
    pub rel_tol: f64,
    /// Hard cap on attempted steps, guarding against runaway loops.
    pub max_steps: u64,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions {
            t_end: 100.0,
            dt_output: 0.01,
            transient: 0.0,
            abs_tol: 1e-10,
            rel_tol: 1e-9,
            max_steps: 500_000_000,
        }
    }
}

/// A solution curve sampled on the uniform grid `t_k = t0 + k·dt_output`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    t0: f64,
    dt_output: f64,
    states: Vec<Vector3<f64>>,
    diverged: bool,
    abs_tol: f64,
    rel_tol: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Time of the first retained sample.
    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt_output(&self) -> f64 {
        self.dt_output
    }

    /// True when the solve left the trusted region (see [`DIVERGENCE_NORM`])
    /// and the tail of the requested grid is missing.
    pub fn diverged(&self) -> bool {
        self.diverged
    }

    pub fn method(&self) -> &'static str {
        "dopri5"
    }

    /// (absolute, relative) local error tolerances used by the solve.
    pub fn tolerances(&self) -> (f64, f64) {
        (self.abs_tol, self.rel_tol)
    }

    pub fn time(&self, index: usize) -> f64 {
        self.t0 + index as f64 * self.dt_output
    }

    pub fn states(&self) -> &[Vector3<f64>] {
        &self.states
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &Vector3<f64>)> {
        self.states
            .iter()
            .enumerate()
            .map(|(i, s)| (self.time(i), s))
    }

    /// Component-wise extent of the sampled states.
    pub fn bounding_box(&self) -> Option<(Vector3<f64>, Vector3<f64>)> {
        let first = *self.states.first()?;
        let (mut lo, mut hi) = (first, first);
        for s in &self.states {
            for i in 0..3 {
                lo[i] = lo[i].min(s[i]);
                hi[i] = hi[i].max(s[i]);
            }
        }
        Some((lo, hi))
    }

    pub fn centroid(&self) -> Option<Vector3<f64>> {
        if self.states.is_empty() {
            return None;
        }
        let sum: Vector3<f64> = self.states.iter().sum();
        Some(sum / self.states.len() as f64)
    }

    pub fn max_norm(&self) -> f64 {
        self.states.iter().map(|s| s.norm()).fold(0.0, f64::max)
    }
}

/// Computes the trial initial step from the scaled norms of the state, the
/// slope, and an Euler probe of the slope's rate of change.
fn initial_step(
    field: &BoundField,
    y0: &Vector3<f64>,
    f0: &Vector3<f64>,
    t_end: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> f64 {
    let scale = |i: usize| abs_tol + rel_tol * y0[i].abs();
    let rms = |v: &Vector3<f64>| {
        ((0..3).map(|i| (v[i] / scale(i)).powi(2)).sum::<f64>() / 3.0).sqrt()
    };
    let d0 = rms(y0);
    let d1 = rms(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * (d0 / d1)
    }
    .min(t_end);
    let y1 = y0 + f0 * h0;
    let f1 = field.f(&y1);
    let d2 = rms(&(f1 - f0)) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(t_end)
}

/// Integrates `field` from `ic` over `[0, t_end]`, resampling the dense
/// output on the uniform grid and discarding the transient.
///
/// Divergence (‖X‖ > [`DIVERGENCE_NORM`]) truncates the trajectory and sets
/// its flag; a step size collapsing toward zero is an error.
pub fn integrate(
    field: &BoundField,
    ic: &Vector3<f64>,
    opts: &IntegrateOptions,
) -> Result<Trajectory> {
    if !(opts.transient >= 0.0 && opts.t_end > opts.transient) {
        return Err(Error::InvalidInput(format!(
            "need t_end > transient >= 0 (got t_end = {}, transient = {})",
            opts.t_end, opts.transient
        )));
    }
    if !(opts.dt_output > 0.0) {
        return Err(Error::InvalidInput(format!(
            "output spacing must be positive (got {})",
            opts.dt_output
        )));
    }
    if !(opts.abs_tol > 0.0 && opts.rel_tol > 0.0) {
        return Err(Error::InvalidInput(
            "error tolerances must be positive".into(),
        ));
    }
    if !ic.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidInput(
            "initial condition must be finite".into(),
        ));
    }

    let n_samples = ((opts.t_end - opts.transient) / opts.dt_output + 1e-9).floor() as usize + 1;
    let sample_time = |k: usize| opts.transient + k as f64 * opts.dt_output;

    let mut states: Vec<Vector3<f64>> = Vec::with_capacity(n_samples);
    let mut next_sample = 0usize;
    if opts.transient == 0.0 {
        states.push(*ic);
        next_sample = 1;
    }

    let mut t = 0.0_f64;
    let mut y = *ic;
    let mut k1 = field.f(&y);
    let mut h = initial_step(field, &y, &k1, opts.t_end, opts.abs_tol, opts.rel_tol);
    let mut rejected = false;
    let mut diverged = false;
    let mut steps = 0u64;

    while t < opts.t_end && next_sample < n_samples {
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::InvalidInput(format!(
                "step budget of {} exhausted at t = {t:.6}",
                opts.max_steps
            )));
        }
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(Error::StepSizeUnderflow(t));
        }
        if t + 1.0001 * h >= opts.t_end {
            h = opts.t_end - t;
        }

        let k2 = field.f(&(y + k1 * (h * A21)));
        let k3 = field.f(&(y + (k1 * A31 + k2 * A32) * h));
        let k4 = field.f(&(y + (k1 * A41 + k2 * A42 + k3 * A43) * h));
        let k5 = field.f(&(y + (k1 * A51 + k2 * A52 + k3 * A53 + k4 * A54) * h));
        let k6 = field.f(&(y + (k1 * A61 + k2 * A62 + k3 * A63 + k4 * A64 + k5 * A65) * h));
        let y_new = y + (k1 * A71 + k3 * A73 + k4 * A74 + k5 * A75 + k6 * A76) * h;
        let k7 = field.f(&y_new);

        let err_vec = (k1 * E1 + k3 * E3 + k4 * E4 + k5 * E5 + k6 * E6 + k7 * E7) * h;
        let err = ((0..3)
            .map(|i| {
                let sc = opts.abs_tol + opts.rel_tol * y[i].abs().max(y_new[i].abs());
                (err_vec[i] / sc).powi(2)
            })
            .sum::<f64>()
            / 3.0)
            .sqrt();

        if !err.is_finite() || !y_new.iter().all(|v| v.is_finite()) {
            // Overflow inside the stages: either the solution is genuinely
            // running away (truncate and flag) or the step was far too
            // optimistic (retry smaller).
            if y.norm() > 1e3 {
                diverged = true;
                break;
            }
            rejected = true;
            h *= FAC_MIN;
            continue;
        }

        if err <= 1.0 {
            let t_new = t + h;
            if next_sample < n_samples {
                let ydiff = y_new - y;
                let cont3 = k1 * h - ydiff;
                let cont4 = ydiff - k7 * h - cont3;
                let cont5 =
                    (k1 * D1 + k3 * D3 + k4 * D4 + k5 * D5 + k6 * D6 + k7 * D7) * h;
                while next_sample < n_samples {
                    let ts = sample_time(next_sample);
                    if ts > t_new + 1e-12 * t_new.abs().max(1.0) {
                        break;
                    }
                    let theta = ((ts - t) / h).clamp(0.0, 1.0);
                    let interp = y
                        + (cont3 + (cont4 + cont5 * (1.0 - theta)) * theta) * (1.0 - theta)
                            * theta
                        + ydiff * theta;
                    states.push(interp);
                    next_sample += 1;
                }
            }
            if y_new.norm() > DIVERGENCE_NORM {
                diverged = true;
                break;
            }
            t = t_new;
            y = y_new;
            k1 = k7;
            let limit = if rejected { 1.0 } else { FAC_MAX };
            h *= (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, limit);
            rejected = false;
        } else {
            rejected = true;
            h *= (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, 1.0);
        }
    }

    Ok(Trajectory {
        t0: opts.transient,
        dt_output: opts.dt_output,
        states,
        diverged,
        abs_tol: opts.abs_tol,
        rel_tol: opts.rel_tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field_dsl::parse_field;
    use approx::assert_relative_eq;
    use std::f64::consts::TAU;

    fn bound(src: &str) -> BoundField {
        parse_field(src).unwrap().bind(&[]).unwrap()
    }

    #[test]
    fn harmonic_oscillator_closes_after_one_period() {
        let f = bound("dx = y\ndy = -x\ndz = 0\n");
        let opts = IntegrateOptions {
            t_end: TAU,
            dt_output: TAU / 100.0,
            ..IntegrateOptions::default()
        };
        let traj = integrate(&f, &Vector3::new(1.0, 0.0, 0.0), &opts).unwrap();
        assert_eq!(traj.len(), 101);
        assert!(!traj.diverged());
        let last = traj.states()[100];
        assert!((last - Vector3::new(1.0, 0.0, 0.0)).norm() < 1e-7);
    }

    #[test]
    fn linear_decay_matches_exponential() {
        let f = bound("dx = -x\ndy = -y\ndz = -z\n");
        let opts = IntegrateOptions {
            t_end: 1.0,
            dt_output: 0.05,
            ..IntegrateOptions::default()
        };
        let traj = integrate(&f, &Vector3::new(1.0, 1.0, 1.0), &opts).unwrap();
        let want = (-1.0_f64).exp();
        let got = traj.states()[traj.len() - 1];
        for i in 0..3 {
            assert_relative_eq!(got[i], want, epsilon = 1e-8);
        }
    }

    #[test]
    fn transient_is_discarded_and_grid_is_uniform() {
        let f = bound("dx = y\ndy = -x\ndz = 0\n");
        let opts = IntegrateOptions {
            t_end: 2.0,
            dt_output: 0.25,
            transient: 1.0,
            ..IntegrateOptions::default()
        };
        let traj = integrate(&f, &Vector3::new(1.0, 0.0, 0.0), &opts).unwrap();
        assert_eq!(traj.len(), 5);
        assert_relative_eq!(traj.t0(), 1.0);
        assert_relative_eq!(traj.time(4), 2.0);
        // Samples sit on the exact solution (cos t, −sin t, 0).
        for (t, s) in traj.iter() {
            assert_relative_eq!(s[0], t.cos(), epsilon = 1e-8);
            assert_relative_eq!(s[1], -t.sin(), epsilon = 1e-8);
        }
    }

    #[test]
    fn finite_time_blowup_is_flagged_not_fatal() {
        // ẋ = x² from x = 1 blows up at t = 1.
        let f = bound("dx = x^2\ndy = 0\ndz = 0\n");
        let opts = IntegrateOptions {
            t_end: 2.0,
            dt_output: 0.01,
            ..IntegrateOptions::default()
        };
        let traj = integrate(&f, &Vector3::new(1.0, 0.0, 0.0), &opts).unwrap();
        assert!(traj.diverged());
        assert!(traj.len() < 201);
        assert!(traj.max_norm() <= DIVERGENCE_NORM);
    }

    #[test]
    fn step_budget_is_enforced() {
        let f = bound("dx = y\ndy = -x\ndz = 0\n");
        let opts = IntegrateOptions {
            t_end: 100.0,
            dt_output: 0.1,
            max_steps: 5,
            ..IntegrateOptions::default()
        };
        assert!(integrate(&f, &Vector3::new(1.0, 0.0, 0.0), &opts).is_err());
    }

    #[test]
    fn option_preconditions_are_checked() {
        let f = bound("dx = -x\ndy = -y\ndz = -z\n");
        let bad_window = IntegrateOptions {
            t_end: 1.0,
            transient: 2.0,
            ..IntegrateOptions::default()
        };
        assert!(integrate(&f, &Vector3::zeros(), &bad_window).is_err());
        let bad_grid = IntegrateOptions {
            dt_output: 0.0,
            ..IntegrateOptions::default()
        };
        assert!(integrate(&f, &Vector3::zeros(), &bad_grid).is_err());
    }

    /// Classical fixed-step fourth-order Runge–Kutta, used only to verify
    /// convergence order against an independent scheme.
    fn rk4_final_state(
        field: &BoundField,
        ic: Vector3<f64>,
        t_end: f64,
        n_steps: usize,
    ) -> Vector3<f64> {
        let h = t_end / n_steps as f64;
        let mut y = ic;
        for _ in 0..n_steps {
            let k1 = field.f(&y);
            let k2 = field.f(&(y + k1 * (h / 2.0)));
            let k3 = field.f(&(y + k2 * (h / 2.0)));
            let k4 = field.f(&(y + k3 * h));
            y += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        }
        y
    }

    #[test]
    fn rk4_reference_shows_fourth_order_convergence() {
        let f = bound("dx = y\ndy = -x\ndz = 0\n");
        let exact = Vector3::new(TAU.cos(), -TAU.sin(), 0.0);
        let coarse = (rk4_final_state(&f, Vector3::new(1.0, 0.0, 0.0), TAU, 64) - exact).norm();
        let fine = (rk4_final_state(&f, Vector3::new(1.0, 0.0, 0.0), TAU, 128) - exact).norm();
        let ratio = coarse / fine;
        assert!(
            (12.0..22.0).contains(&ratio),
            "halving dt changed the error by {ratio:.2}x, expected ~16x"
        );
    }

    #[test]
    fn bounding_box_and_centroid_cover_the_samples() {
        let f = bound("dx = y\ndy = -x\ndz = 0\n");
        let opts = IntegrateOptions {
            t_end: TAU,
            dt_output: TAU / 400.0,
            ..IntegrateOptions::default()
        };
        let traj = integrate(&f, &Vector3::new(1.0, 0.0, 0.0), &opts).unwrap();
        let (lo, hi) = traj.bounding_box().unwrap();
        assert_relative_eq!(lo[0], -1.0, epsilon = 1e-4);
        assert_relative_eq!(hi[0], 1.0, epsilon = 1e-6);
        let c = traj.centroid().unwrap();
        assert!(c.norm() < 0.01);
    }
}

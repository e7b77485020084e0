//! Time integration: an adaptive embedded Runge-Kutta 5(4) pair with dense
//! output (the default), and a fixed-step implicit midpoint rule whose
//! symplecticity keeps long conservative runs free of secular energy drift.
//!
//! Both steppers accept a guard predicate evaluated after every accepted
//! step; a guard violation ends the run with a structured status instead of
//! an error, so callers can inspect the partial trajectory.

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Hard floor on the step size relative to the current time scale; below
/// this the run stops with [`RunStatus::StepUnderflow`].
const STEP_FLOOR: f64 = 1e-14;

/// Fixed-point tolerance of the implicit midpoint solve, relative to the
/// slope magnitude.
const MIDPOINT_TOL: f64 = 1e-13;

/// Iteration cap for the implicit midpoint solve.
const MIDPOINT_MAX_ITERS: usize = 60;

/// Integration method selector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    /// Embedded Dormand-Prince 5(4) pair, adaptive step, dense output.
    DormandPrince { rtol: f64, atol: f64 },
    /// Implicit midpoint rule with a fixed step (symplectic, second order).
    ImplicitMidpoint { dt: f64 },
}

/// How an integration run ended.
#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    /// Reached the requested end time.
    Completed,
    /// The guard predicate fired: the state approached the edge of the
    /// coordinate chart (or another caller-defined admissibility boundary).
    ChartProximity { t: f64, detail: String },
    /// The adaptive controller drove the step below the representable
    /// floor, which signals a singularity or unresolvable stiffness.
    StepUnderflow { t: f64, h: f64 },
}

/// Counters and final status of a run.
#[derive(Debug, Clone)]
pub struct Integration {
    pub status: RunStatus,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
}

/// Right-hand side of the first-order system du/dt = f(t, u).
pub type Rhs<'a> = &'a dyn Fn(f64, &DVector<f64>) -> Result<DVector<f64>>;

/// Admissibility guard: `Some(detail)` stops the run after the current step.
pub type Guard<'a> = &'a dyn Fn(f64, &DVector<f64>) -> Option<String>;

/// Integrate du/dt = f(t, u) from `t0` to `t_end`, invoking `record` at
/// t0, at every multiple of `record_interval` (via dense output), and at the
/// final time. A nonpositive `record_interval` records every accepted step.
#[allow(clippy::too_many_arguments)]
pub fn integrate(
    rhs: Rhs,
    u0: &DVector<f64>,
    t0: f64,
    t_end: f64,
    method: Method,
    guard: Option<Guard>,
    record_interval: f64,
    record: &mut dyn FnMut(f64, &DVector<f64>),
) -> Result<Integration> {
    if !(t_end > t0) {
        return Err(Error::Config(format!(
            "end time {t_end} must exceed start time {t0}"
        )));
    }
    if let Some(g) = guard {
        if let Some(detail) = g(t0, u0) {
            record(t0, u0);
            return Ok(Integration {
                status: RunStatus::ChartProximity { t: t0, detail },
                steps_accepted: 0,
                steps_rejected: 0,
            });
        }
    }
    match method {
        Method::DormandPrince { rtol, atol } => {
            if !(rtol > 0.0) || !(atol > 0.0) {
                return Err(Error::Config(format!(
                    "tolerances must be positive (rtol {rtol}, atol {atol})"
                )));
            }
            dormand_prince(rhs, u0, t0, t_end, rtol, atol, guard, record_interval, record)
        }
        Method::ImplicitMidpoint { dt } => {
            if !(dt > 0.0) {
                return Err(Error::Config(format!("step size must be positive, got {dt}")));
            }
            implicit_midpoint(rhs, u0, t0, t_end, dt, guard, record_interval, record)
        }
    }
}

// Butcher tableau of the Dormand-Prince 5(4) pair.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A2: [f64; 1] = [0.2];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [
    19372.0 / 6561.0,
    -25360.0 / 2187.0,
    64448.0 / 6561.0,
    -212.0 / 729.0,
];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const A7: [f64; 6] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
];
// Fourth-order weights of the embedded solution.
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];
// Coefficients of the fourth-order continuous extension.
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// Weighted RMS norm used by the error controller.
fn error_norm(err: &DVector<f64>, u: &DVector<f64>, unew: &DVector<f64>, rtol: f64, atol: f64) -> f64 {
    let n = err.len();
    let mut acc = 0.0;
    for i in 0..n {
        let sc = atol + rtol * u[i].abs().max(unew[i].abs());
        let r = err[i] / sc;
        acc += r * r;
    }
    (acc / n as f64).sqrt()
}

/// Starting step heuristic based on the scale of u, f, and an Euler probe of
/// the second derivative.
fn initial_step(
    rhs: Rhs,
    t0: f64,
    u0: &DVector<f64>,
    f0: &DVector<f64>,
    t_end: f64,
    rtol: f64,
    atol: f64,
) -> Result<f64> {
    let n = u0.len() as f64;
    let scaled_norm = |v: &DVector<f64>, reference: &DVector<f64>| -> f64 {
        let mut acc = 0.0;
        for i in 0..v.len() {
            let sc = atol + rtol * reference[i].abs();
            acc += (v[i] / sc).powi(2);
        }
        (acc / n).sqrt()
    };
    let d0 = scaled_norm(u0, u0);
    let d1 = scaled_norm(f0, u0);
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    h0 = h0.min(t_end - t0);
    let u1 = u0 + h0 * f0;
    // If the Euler probe leaves the admissible domain, fall back to a small
    // fraction of the probe step rather than failing the whole run.
    let f1 = match rhs(t0 + h0, &u1) {
        Ok(f1) => f1,
        Err(_) => {
            return Ok((h0 * 1e-3).max(STEP_FLOOR * (1.0 + t0.abs())));
        }
    };
    let d2 = scaled_norm(&(&f1 - f0), u0) / h0;
    let d_max = d1.max(d2);
    let h1 = if d_max <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d_max).powf(0.2)
    };
    Ok(h0.min(h1).min(t_end - t0).max(STEP_FLOOR * (1.0 + t0.abs())))
}

#[allow(clippy::too_many_arguments)]
fn dormand_prince(
    rhs: Rhs,
    u0: &DVector<f64>,
    t0: f64,
    t_end: f64,
    rtol: f64,
    atol: f64,
    guard: Option<Guard>,
    record_interval: f64,
    record: &mut dyn FnMut(f64, &DVector<f64>),
) -> Result<Integration> {
    let mut t = t0;
    let mut u = u0.clone();
    let mut k1 = rhs(t, &u)?;
    let mut h = initial_step(rhs, t0, &u, &k1, t_end, rtol, atol)?;
    let mut accepted = 0usize;
    let mut rejected = 0usize;
    let mut just_rejected = false;

    record(t0, u0);
    let mut next_record = if record_interval > 0.0 {
        t0 + record_interval
    } else {
        f64::INFINITY
    };

    loop {
        if t >= t_end {
            return Ok(Integration {
                status: RunStatus::Completed,
                steps_accepted: accepted,
                steps_rejected: rejected,
            });
        }
        if h < STEP_FLOOR * (1.0 + t.abs()) {
            return Ok(Integration {
                status: RunStatus::StepUnderflow { t, h },
                steps_accepted: accepted,
                steps_rejected: rejected,
            });
        }
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }

        // A failed stage evaluation means the trial point left the admissible
        // domain (for instance a sign change of the orbital distance inside a
        // too-long step); reject the step and retry with a shorter one.
        // Persistent failure drives h to the floor and surfaces as
        // StepUnderflow rather than a hard error.
        macro_rules! stage {
            ($eval:expr) => {
                match $eval {
                    Ok(k) => k,
                    Err(_) => {
                        rejected += 1;
                        just_rejected = true;
                        h *= 0.25;
                        continue;
                    }
                }
            };
        }

        let k2 = stage!(rhs(t + C[1] * h, &(&u + h * (A2[0] * &k1))));
        let k3 = stage!(rhs(t + C[2] * h, &(&u + h * (A3[0] * &k1 + A3[1] * &k2))));
        let k4 = stage!(rhs(
            t + C[3] * h,
            &(&u + h * (A4[0] * &k1 + A4[1] * &k2 + A4[2] * &k3)),
        ));
        let k5 = stage!(rhs(
            t + C[4] * h,
            &(&u + h * (A5[0] * &k1 + A5[1] * &k2 + A5[2] * &k3 + A5[3] * &k4)),
        ));
        let k6 = stage!(rhs(
            t + C[5] * h,
            &(&u + h * (A6[0] * &k1 + A6[1] * &k2 + A6[2] * &k3 + A6[3] * &k4 + A6[4] * &k5)),
        ));
        let unew = &u
            + h * (A7[0] * &k1 + A7[2] * &k3 + A7[3] * &k4 + A7[4] * &k5 + A7[5] * &k6);
        let k7 = stage!(rhs(t + h, &unew));

        let u4 = &u
            + h * (B4[0] * &k1
                + B4[2] * &k3
                + B4[3] * &k4
                + B4[4] * &k5
                + B4[5] * &k6
                + B4[6] * &k7);
        let err = error_norm(&(&unew - &u4), &u, &unew, rtol, atol);

        if err <= 1.0 {
            // Dense-output coefficients for this step.
            let dy = &unew - &u;
            let r3 = h * &k1 - &dy;
            let r4 = &dy - h * &k7 - &r3;
            let r5 = h * (D[0] * &k1 + D[2] * &k3 + D[3] * &k4 + D[4] * &k5 + D[5] * &k6 + D[6] * &k7);
            let dense = |theta: f64| -> DVector<f64> {
                &u + theta * (&dy + (1.0 - theta) * (&r3 + theta * (&r4 + (1.0 - theta) * &r5)))
            };
            if record_interval > 0.0 {
                while next_record <= t + h + 1e-12 * h && next_record < t_end {
                    let theta = ((next_record - t) / h).clamp(0.0, 1.0);
                    record(next_record, &dense(theta));
                    next_record += record_interval;
                }
            }
            t += h;
            u = unew;
            k1 = k7;
            accepted += 1;
            if record_interval <= 0.0 || last {
                record(t, &u);
            }
            if let Some(g) = guard {
                if let Some(detail) = g(t, &u) {
                    return Ok(Integration {
                        status: RunStatus::ChartProximity { t, detail },
                        steps_accepted: accepted,
                        steps_rejected: rejected,
                    });
                }
            }
            let fac = (0.9 * err.powf(-0.2)).clamp(0.2, if just_rejected { 1.0 } else { 5.0 });
            h *= fac;
            just_rejected = false;
        } else {
            rejected += 1;
            just_rejected = true;
            h *= (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn implicit_midpoint(
    rhs: Rhs,
    u0: &DVector<f64>,
    t0: f64,
    t_end: f64,
    dt: f64,
    guard: Option<Guard>,
    record_interval: f64,
    record: &mut dyn FnMut(f64, &DVector<f64>),
) -> Result<Integration> {
    let mut t = t0;
    let mut u = u0.clone();
    let mut slope = rhs(t0, &u)?;
    let mut accepted = 0usize;

    record(t0, u0);
    let mut next_record = if record_interval > 0.0 {
        t0 + record_interval
    } else {
        f64::INFINITY
    };

    while t < t_end {
        let h = dt.min(t_end - t);
        let t_mid = t + 0.5 * h;
        // Solve s = f(t_mid, u + (h/2) s) by fixed-point iteration, warm
        // started from the previous step's slope.
        let mut converged = false;
        for _ in 0..MIDPOINT_MAX_ITERS {
            let next = rhs(t_mid, &(&u + (0.5 * h) * &slope))?;
            let delta = (&next - &slope).amax();
            let scale = 1.0 + slope.amax();
            slope = next;
            if delta <= MIDPOINT_TOL * scale {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NewtonDiverged(format!(
                "implicit midpoint fixed-point iteration stalled at t = {t_mid:.6e} \
                 (step {h:.3e} too large for the stiffness)"
            )));
        }
        let unew = &u + h * &slope;
        if record_interval > 0.0 {
            while next_record <= t + h + 1e-12 * h && next_record < t_end {
                let theta = ((next_record - t) / h).clamp(0.0, 1.0);
                record(next_record, &(&u + theta * h * &slope));
                next_record += record_interval;
            }
        }
        t += h;
        u = unew;
        accepted += 1;
        if record_interval <= 0.0 || t >= t_end {
            record(t, &u);
        }
        if let Some(g) = guard {
            if let Some(detail) = g(t, &u) {
                return Ok(Integration {
                    status: RunStatus::ChartProximity { t, detail },
                    steps_accepted: accepted,
                    steps_rejected: 0,
                });
            }
        }
    }
    Ok(Integration {
        status: RunStatus::Completed,
        steps_accepted: accepted,
        steps_rejected: 0,
    })
}

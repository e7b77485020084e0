//! Unreduced cross-check dynamics in the full coordinates (R, ψ, χ, β, J, z).
//!
//! The reduced module eliminates the orbital angle ψ at fixed total angular
//! momentum p. This module integrates the same mechanical system without the
//! reduction, directly from the full Lagrangian
//!   L = ½ q̇ᵀA(q)q̇ − V(R, γ, J, z),
//! where the kinetic matrix couples ψ̇ to the rotational block through the
//! same a₁₁ = I₀+J₃ and a₁₂ = κ(J₁−J₂) coefficients. It exists to verify,
//! by an independent route, that the reduction preserves the physics: the
//! total angular momentum p = ∂L/∂ψ̇ must be a first integral of these
//! equations, and trajectories must match the reduced flow plus the
//! quadrature reconstruction of ψ.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::dynamics::{ModelParams, ReducedState, IDX_BETA, IDX_CHI, IDX_R};
use crate::error::{Error, Result};
use crate::integrate::{self, Method, RunStatus};
use crate::potentials::grad_effective_potential;

/// Slot of R in the unreduced configuration.
pub const U_R: usize = 0;
/// Slot of the orbital angle ψ.
pub const U_PSI: usize = 1;
/// Slot of the rotation angle χ.
pub const U_CHI: usize = 2;
/// Slot of the internal offset β.
pub const U_BETA: usize = 3;
/// Slot of J₁; J₂, J₃ and the z modes follow contiguously.
pub const U_J1: usize = 4;

/// Samples of an unreduced run.
#[derive(Debug, Clone)]
pub struct UnreducedRun {
    pub times: Vec<f64>,
    pub qs: Vec<DVector<f64>>,
    pub qdots: Vec<DVector<f64>>,
    pub status: RunStatus,
}

/// Lift a reduced state to the full coordinates, reconstructing ψ̇ from the
/// conserved angular momentum stored in the model.
pub fn embed(params: &ModelParams, state: &ReducedState) -> Result<(DVector<f64>, DVector<f64>)> {
    let nn = params.dim();
    if state.dim() != nn {
        return Err(Error::Config(format!(
            "state has {} slots but the model has {nn}",
            state.dim()
        )));
    }
    let psidot = params.psi_dot(state)?;
    let mut q = DVector::zeros(nn + 1);
    let mut qdot = DVector::zeros(nn + 1);
    q[U_R] = state.y[IDX_R];
    q[U_PSI] = state.psi;
    q[U_CHI] = state.y[IDX_CHI];
    q[U_BETA] = state.y[IDX_BETA];
    qdot[U_R] = state.v[IDX_R];
    qdot[U_PSI] = psidot;
    qdot[U_CHI] = state.v[IDX_CHI];
    qdot[U_BETA] = state.v[IDX_BETA];
    for k in 3..nn {
        q[k + 1] = state.y[k];
        qdot[k + 1] = state.v[k];
    }
    Ok((q, qdot))
}

fn scalars(params: &ModelParams, q: &DVector<f64>) -> (f64, f64, f64) {
    let a11 = params.gravity.i0 + q[U_J1 + 2];
    let a12 = params.kinetic.kappa * (q[U_J1] - q[U_J1 + 1]);
    let r = q[U_R];
    (a11, a12, params.gravity.m * r * r + a11)
}

/// Kinetic matrix A(q) of the unreduced Lagrangian.
pub fn kinetic_matrix(params: &ModelParams, q: &DVector<f64>) -> DMatrix<f64> {
    let nq = params.dim() + 1;
    let (a11, a12, mu) = scalars(params, q);
    let mut a = DMatrix::zeros(nq, nq);
    a[(U_R, U_R)] = params.gravity.m;
    a[(U_PSI, U_PSI)] = mu;
    a[(U_PSI, U_CHI)] = a11;
    a[(U_CHI, U_PSI)] = a11;
    a[(U_PSI, U_BETA)] = a12;
    a[(U_BETA, U_PSI)] = a12;
    a[(U_CHI, U_CHI)] = a11;
    a[(U_CHI, U_BETA)] = a12;
    a[(U_BETA, U_CHI)] = a12;
    a[(U_BETA, U_BETA)] = params.kinetic.mass_beta;
    for i in 0..3 {
        a[(U_J1 + i, U_J1 + i)] = params.kinetic.mass_j[i];
    }
    for j in 0..params.n() {
        a[(U_J1 + 3 + j, U_J1 + 3 + j)] = params.kinetic.mass_z[j];
    }
    a
}

/// Total angular momentum p = ∂L/∂ψ̇ = (mR²+I₀+J₃)ψ̇ + (I₀+J₃)χ̇ + a₁₂β̇.
pub fn angular_momentum(params: &ModelParams, q: &DVector<f64>, qdot: &DVector<f64>) -> f64 {
    let (a11, a12, mu) = scalars(params, q);
    mu * qdot[U_PSI] + a11 * qdot[U_CHI] + a12 * qdot[U_BETA]
}

/// Total mechanical energy T + V of the unreduced system.
pub fn energy(params: &ModelParams, q: &DVector<f64>, qdot: &DVector<f64>) -> Result<f64> {
    let a = kinetic_matrix(params, q);
    let t = 0.5 * qdot.dot(&(&a * qdot));
    Ok(t + potential(params, q)?)
}

/// Potential of the unreduced system: gravity plus elasticity, no
/// centrifugal term. Evaluated by reusing the reduced effective potential at
/// zero angular momentum.
fn potential(params: &ModelParams, q: &DVector<f64>) -> Result<f64> {
    let y = reduced_config(params, q);
    let mut no_p = params.clone();
    no_p.p = 0.0;
    no_p.effective_potential_at(&y)
}

fn reduced_config(params: &ModelParams, q: &DVector<f64>) -> DVector<f64> {
    let nn = params.dim();
    let mut y = DVector::zeros(nn);
    y[IDX_R] = q[U_R];
    y[IDX_CHI] = q[U_CHI];
    y[IDX_BETA] = q[U_BETA];
    for k in 3..nn {
        y[k] = q[k + 1];
    }
    y
}

/// Accelerations of the unreduced system: solve A(q)q̈ = f(q, q̇) with the
/// Euler–Lagrange force assembled from the sparse partials of A and the
/// potential gradient; friction acts on (β̇, J̇, ż) exactly as in the
/// reduced flow.
pub fn accelerations(
    params: &ModelParams,
    q: &DVector<f64>,
    qdot: &DVector<f64>,
) -> Result<DVector<f64>> {
    let nq = params.dim() + 1;
    if q.len() != nq || qdot.len() != nq {
        return Err(Error::Config(format!(
            "unreduced state has {} slots but the model needs {nq}",
            q.len()
        )));
    }
    let m = params.gravity.m;
    let r = q[U_R];
    if !(r > 0.0) {
        return Err(Error::Domain(format!(
            "orbital distance must be positive, got {r}"
        )));
    }
    let kap = params.kinetic.kappa;
    let y = reduced_config(params, q);
    let shape = params.shape_of(&y);
    // Gradient of V over (R, χ, β, J, z): the reduced effective gradient at
    // zero angular momentum has no centrifugal part.
    let g = grad_effective_potential(
        r,
        q[U_CHI],
        q[U_BETA],
        &shape,
        &params.gravity,
        &params.elastic,
        0.0,
        params
            .cubic
            .as_ref()
            .map(|c| c.as_ref() as &dyn crate::potentials::CubicShapeTerm),
    )?;

    let psidot = qdot[U_PSI];
    let chidot = qdot[U_CHI];
    let betadot = qdot[U_BETA];
    let rot = psidot + chidot;
    let jdot12 = qdot[U_J1] - qdot[U_J1 + 1];
    let jdot3 = qdot[U_J1 + 2];

    let mut f = DVector::zeros(nq);
    // ½ q̇ᵀ(∂A/∂q_k)q̇ for the state-dependent entries of A.
    f[U_R] += m * r * psidot * psidot;
    f[U_J1] += kap * rot * betadot;
    f[U_J1 + 1] -= kap * rot * betadot;
    f[U_J1 + 2] += 0.5 * rot * rot;
    // −(dA/dt)q̇.
    f[U_PSI] -= 2.0 * m * r * qdot[U_R] * psidot + jdot3 * rot + kap * jdot12 * betadot;
    f[U_CHI] -= jdot3 * rot + kap * jdot12 * betadot;
    f[U_BETA] -= kap * jdot12 * rot;
    // −∇V: the potential does not depend on ψ.
    f[U_R] -= g[IDX_R];
    f[U_CHI] -= g[IDX_CHI];
    f[U_BETA] -= g[IDX_BETA];
    for k in 3..params.dim() {
        f[k + 1] -= g[k];
    }
    // Friction on the shape block (β̇, J̇, ż).
    if let Some(ds) = &params.dissipation {
        let mut w = DVector::zeros(4 + params.n());
        w[0] = betadot;
        for i in 0..(3 + params.n()) {
            w[1 + i] = qdot[U_J1 + i];
        }
        let fd = ds.force(&w);
        f[U_BETA] -= fd[0];
        for i in 0..(3 + params.n()) {
            f[U_J1 + i] -= fd[1 + i];
        }
    }

    let a = kinetic_matrix(params, q);
    match Cholesky::new(a.clone()) {
        Some(ch) => Ok(ch.solve(&f)),
        None => {
            let sv = a.singular_values();
            let smin = sv.min();
            let cond = if smin > 0.0 {
                sv.max() / smin
            } else {
                f64::INFINITY
            };
            Err(Error::SingularMass { cond })
        }
    }
}

/// Integrate the unreduced system, recording samples at the given interval.
pub fn simulate_unreduced(
    params: &ModelParams,
    q0: &DVector<f64>,
    qdot0: &DVector<f64>,
    t0: f64,
    t_end: f64,
    method: Method,
    record_interval: f64,
) -> Result<UnreducedRun> {
    params.validate()?;
    let nq = params.dim() + 1;
    let mut u0 = DVector::zeros(2 * nq);
    u0.rows_mut(0, nq).copy_from(q0);
    u0.rows_mut(nq, nq).copy_from(qdot0);

    let rhs = |_t: f64, u: &DVector<f64>| -> Result<DVector<f64>> {
        let q = u.rows(0, nq).clone_owned();
        let qd = u.rows(nq, nq).clone_owned();
        let acc = accelerations(params, &q, &qd)?;
        let mut du = DVector::zeros(2 * nq);
        du.rows_mut(0, nq).copy_from(&qd);
        du.rows_mut(nq, nq).copy_from(&acc);
        Ok(du)
    };

    let mut run = UnreducedRun {
        times: Vec::new(),
        qs: Vec::new(),
        qdots: Vec::new(),
        status: RunStatus::Completed,
    };
    {
        let mut record = |t: f64, u: &DVector<f64>| {
            run.times.push(t);
            run.qs.push(u.rows(0, nq).clone_owned());
            run.qdots.push(u.rows(nq, nq).clone_owned());
        };
        let res = integrate::integrate(
            &rhs,
            &u0,
            t0,
            t_end,
            method,
            None,
            record_interval,
            &mut record,
        )?;
        run.status = res.status;
    }
    Ok(run)
}

//! Relative equilibria of the reduced system and convergence experiments.
//!
//! The synchronous-rotation states form a one-parameter manifold: a circular
//! orbit of radius R̄ with the long axis pointing at the attracting center
//! (γ = 0), a deformed shape (J̄, z̄) at rest, and the whole figure rotating
//! at the orbital rate. This module locates that manifold as the critical
//! set of the effective potential, checks its nondegeneracy transversally to
//! the symmetry direction, and runs the dissipative relaxation experiment
//! that exhibits it as an attractor.

use nalgebra::{Complex, DMatrix, DVector};

use crate::dynamics::{
    self, ModelParams, ReducedState, ReferenceOrbit, SimOptions, TrajectoryRecord, IDX_BETA,
    IDX_CHI, IDX_J1, IDX_R,
};
use crate::error::{Error, Result};
use crate::integrate::RunStatus;
use crate::potentials::GravityParams;

/// Convergence tolerance for the equilibrium Newton iteration, relative to
/// the radial force scale GM·m/R₀².
const NEWTON_TOL: f64 = 1e-12;
/// Iteration cap for the equilibrium Newton solver.
const NEWTON_MAX_ITERS: usize = 60;
/// Smallest damping factor tried by the backtracking line search.
const LINE_SEARCH_MIN: f64 = 1e-6;
/// Relative step for finite differences of the analytic gradient.
const FD_STEP: f64 = 1e-6;
/// Relative tolerance on the circular-orbit radius root.
const RADIUS_TOL: f64 = 1e-14;
/// Iteration cap for the radius root search.
const RADIUS_MAX_ITERS: usize = 200;
/// Spin budget ι = I₀/(m R_K²) above which the rigid radial potential has
/// no interior minimum: in the scaled variable r = R/R_K the stationarity
/// condition reads (r² + ι)² = r³, which has real roots only for ι ≤ 27/256.
const IOTA_CRITICAL: f64 = 27.0 / 256.0;

/// First and second radial derivatives of the rigid circular-orbit
/// potential V₀(R) = −GM·m/R + p²/(2(mR² + I₀)).
fn rigid_radial_derivatives(r: f64, p: f64, gravity: &GravityParams) -> (f64, f64) {
    let m = gravity.m;
    let mu0 = m * r * r + gravity.i0;
    let d1 = gravity.gm * m / (r * r) - p * p * m * r / (mu0 * mu0);
    let d2 = -2.0 * gravity.gm * m / (r * r * r) - p * p * m / (mu0 * mu0)
        + 4.0 * p * p * m * m * r * r / (mu0 * mu0 * mu0);
    (d1, d2)
}

/// Radius of the rigid circular orbit with angular momentum `p`: the
/// nondegenerate minimizer of V₀(R) = −GM·m/R + p²/(2(mR² + I₀)), located
/// by safeguarded Newton on V₀′ inside an analytic bracket.
///
/// For I₀ = 0 this is the point-mass circular-orbit radius p²/(GM·m²).
/// With I₀ > 0 the minimum sits below that value and exists only while the
/// spin budget ι = I₀·(GM·m²/p²)²/m stays at or below 27/256; past the
/// threshold the centrifugal term wins at every radius and the search
/// reports [`Error::NoMinimum`].
pub fn kepler_radius(p: f64, gravity: &GravityParams) -> Result<f64> {
    // Validated inline rather than through the full parameter check: the
    // rigid-orbit potential is well defined for a point mass (I₀ = 0),
    // which the elastic chart itself excludes.
    if !(gravity.gm > 0.0 && gravity.m > 0.0 && gravity.i0 >= 0.0)
        || !(gravity.gm.is_finite() && gravity.m.is_finite() && gravity.i0.is_finite())
    {
        return Err(Error::Config(format!(
            "need GM > 0, m > 0, I0 >= 0; got GM = {}, m = {}, I0 = {}",
            gravity.gm, gravity.m, gravity.i0
        )));
    }
    if !(p != 0.0 && p.is_finite()) {
        return Err(Error::Config(format!(
            "angular momentum must be nonzero and finite, got {p}"
        )));
    }
    let r_kepler = p * p / (gravity.gm * gravity.m * gravity.m);
    let iota = gravity.i0 / (gravity.m * r_kepler * r_kepler);
    if iota == 0.0 {
        return Ok(r_kepler);
    }
    if iota >= IOTA_CRITICAL {
        return Err(Error::NoMinimum(format!(
            "rigid radial potential has no interior minimum: \
             I0/(m R_K^2) = {iota:.6e} is at or above 27/256"
        )));
    }
    // The slope is negative at 9/16 of the point-mass radius (the location
    // of the degenerate double root at the critical spin budget) and
    // positive back at the point-mass radius itself, so the minimum is
    // bracketed between the two.
    let mut lo = 0.5625 * r_kepler;
    let mut hi = r_kepler;
    let mut r = hi;
    for _ in 0..RADIUS_MAX_ITERS {
        let (d1, d2) = rigid_radial_derivatives(r, p, gravity);
        let newton = r - d1 / d2;
        let r_next = if d2 > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let (d1_next, _) = rigid_radial_derivatives(r_next, p, gravity);
        if d1_next < 0.0 {
            lo = r_next;
        } else {
            hi = r_next;
        }
        let converged = (r_next - r).abs() <= RADIUS_TOL * r_next;
        r = r_next;
        if converged {
            let (_, d2_final) = rigid_radial_derivatives(r, p, gravity);
            if d2_final <= 0.0 {
                return Err(Error::NoMinimum(format!(
                    "stationary radius {r:.6e} is not a minimum (V'' = {d2_final:.3e})"
                )));
            }
            return Ok(r);
        }
    }
    Err(Error::NewtonDiverged(format!(
        "radius search did not converge within {RADIUS_MAX_ITERS} iterations"
    )))
}

/// A solved relative equilibrium: the base point of the synchronous-rotation
/// manifold together with its nondegeneracy diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    /// Orbital radius R̄ of the circular motion.
    pub r_bar: f64,
    /// Moment increments (J̄₁, J̄₂, J̄₃), strictly increasing.
    pub j_bar: [f64; 3],
    /// Auxiliary shape coordinates z̄.
    pub z_bar: DVector<f64>,
    /// Total angular momentum the equilibrium was solved at.
    pub p: f64,
    /// Elastic rigidity scale the equilibrium was solved at.
    pub epsilon: f64,
    /// Effective-potential gradient norm at the solution.
    pub residual_norm: f64,
    /// Eigenvalues (ascending) of the Hessian of the effective potential in
    /// the directions (R, γ, J, z) transversal to the manifold; all
    /// positive at a valid equilibrium.
    pub transversal_hessian_eigs: Vec<f64>,
}

impl Equilibrium {
    /// Number of shape modes n.
    pub fn n(&self) -> usize {
        self.z_bar.len()
    }

    /// Number of configuration slots, 6 + n.
    pub fn dim(&self) -> usize {
        6 + self.z_bar.len()
    }

    /// Chart configuration (R̄, 0, 0, J̄, z̄) on the manifold, with both
    /// angles at zero.
    pub fn configuration(&self) -> DVector<f64> {
        let mut y = DVector::zeros(self.dim());
        y[IDX_R] = self.r_bar;
        for k in 0..3 {
            y[IDX_J1 + k] = self.j_bar[k];
        }
        for k in 0..self.z_bar.len() {
            y[6 + k] = self.z_bar[k];
        }
        y
    }

    /// Resting state on the manifold at time `t`.
    pub fn state(&self, t: f64) -> Result<ReducedState> {
        let dim = self.dim();
        ReducedState::new(t, self.configuration(), DVector::zeros(dim), 0.0)
    }

    /// Rotation rate ψ̄̇ = p/(mR̄² + I₀ + J̄₃) of the synchronous motion.
    pub fn mean_motion(&self, gravity: &GravityParams) -> f64 {
        let mu = gravity.m * self.r_bar * self.r_bar + gravity.i0 + self.j_bar[2];
        self.p / mu
    }

    /// Reference orbit for trajectory diagnostics. Its gravitational
    /// parameter ψ̄̇²R̄³ is calibrated so the osculating eccentricity
    /// vanishes identically on the manifold rather than only to O(J/mR²).
    pub fn reference_orbit(&self, gravity: &GravityParams) -> ReferenceOrbit {
        let psi_dot = self.mean_motion(gravity);
        ReferenceOrbit {
            y_bar: self.configuration(),
            gm_ref: psi_dot * psi_dot * self.r_bar.powi(3),
        }
    }

    /// Distance of a phase point from the manifold; see
    /// [`dynamics::manifold_distance`].
    pub fn manifold_distance(&self, y: &DVector<f64>, v: &DVector<f64>) -> f64 {
        dynamics::manifold_distance(&self.configuration(), y, v)
    }
}

/// Embed the solver unknowns (R, J, z) into a chart configuration with both
/// angles at zero.
fn chart_of(x: &DVector<f64>, dim: usize) -> DVector<f64> {
    let mut y = DVector::zeros(dim);
    y[IDX_R] = x[0];
    for k in 0..dim - 3 {
        y[IDX_J1 + k] = x[1 + k];
    }
    y
}

/// Effective-potential gradient restricted to the slice γ = 0, in the
/// solver unknowns (R, J, z). The two angle components vanish identically
/// on the slice by symmetry, so nothing is lost.
fn reduced_gradient(params: &ModelParams, x: &DVector<f64>) -> Result<DVector<f64>> {
    let g = params.grad_effective_potential_at(&chart_of(x, params.dim()))?;
    let mut out = DVector::zeros(x.len());
    out[0] = g[IDX_R];
    for k in 0..x.len() - 1 {
        out[1 + k] = g[IDX_J1 + k];
    }
    Ok(out)
}

/// Central finite-difference Jacobian of [`reduced_gradient`].
fn reduced_jacobian(params: &ModelParams, x: &DVector<f64>) -> Result<DMatrix<f64>> {
    let m = x.len();
    let mut jac = DMatrix::zeros(m, m);
    for j in 0..m {
        let h = FD_STEP * (1.0 + x[j].abs());
        let mut xp = x.clone();
        xp[j] += h;
        let mut xm = x.clone();
        xm[j] -= h;
        let column = (reduced_gradient(params, &xp)? - reduced_gradient(params, &xm)?)
            / (2.0 * h);
        jac.set_column(j, &column);
    }
    Ok(jac)
}

/// Eigenvalues (ascending) of the effective-potential Hessian in the
/// coordinates (R, γ, J, z) transversal to the manifold. The symmetry
/// direction χ − β is quotiented out by differentiating along χ at β = 0,
/// which probes γ because the potential depends on the angles only through
/// their sum.
fn transversal_hessian_eigenvalues(
    params: &ModelParams,
    y_bar: &DVector<f64>,
) -> Result<Vec<f64>> {
    let dim = params.dim();
    let m = dim - 1;
    let slot = |j: usize| -> usize {
        match j {
            0 => IDX_R,
            1 => IDX_CHI,
            _ => j + 1,
        }
    };
    let trans_grad = |y: &DVector<f64>| -> Result<DVector<f64>> {
        let g = params.grad_effective_potential_at(y)?;
        let mut out = DVector::zeros(m);
        for j in 0..m {
            out[j] = g[slot(j)];
        }
        Ok(out)
    };
    let mut hess = DMatrix::zeros(m, m);
    for j in 0..m {
        let s = slot(j);
        let h = FD_STEP * (1.0 + y_bar[s].abs());
        let mut yp = y_bar.clone();
        yp[s] += h;
        let mut ym = y_bar.clone();
        ym[s] -= h;
        let column = (trans_grad(&yp)? - trans_grad(&ym)?) / (2.0 * h);
        hess.set_column(j, &column);
    }
    let sym = (&hess + hess.transpose()) * 0.5;
    let mut eigs: Vec<f64> = sym.symmetric_eigen().eigenvalues.iter().copied().collect();
    eigs.sort_by(|a, b| a.partial_cmp(b).expect("eigenvalues are finite"));
    Ok(eigs)
}

/// Locate the relative equilibrium by damped Newton iteration on the
/// effective-potential gradient over (R, J, z) at γ = 0, seeded from the
/// rigid circular orbit (R₀, 0, 0).
///
/// On success the returned [`Equilibrium`] carries the residual norm and
/// the transversal Hessian spectrum. Failures are reported as distinct
/// errors: [`Error::NewtonDiverged`] when the iteration stalls,
/// [`Error::OrderingViolation`] when the solved moments are not strictly
/// increasing, and [`Error::IndefiniteHessian`] when the equilibrium is not
/// a transversally nondegenerate minimum.
pub fn find_equilibrium(params: &ModelParams) -> Result<Equilibrium> {
    params.validate()?;
    let n = params.n();
    let r0 = kepler_radius(params.p, &params.gravity)?;
    let force_scale = (params.gravity.gm * params.gravity.m / (r0 * r0)).max(1.0);
    let tol = NEWTON_TOL * force_scale;

    let mut x = DVector::zeros(4 + n);
    x[0] = r0;
    let mut grad = reduced_gradient(params, &x)?;
    let mut converged = false;
    for iter in 0..NEWTON_MAX_ITERS {
        let gnorm = grad.norm();
        if gnorm <= tol {
            converged = true;
            break;
        }
        let jac = reduced_jacobian(params, &x)?;
        let step = jac.lu().solve(&(-&grad)).ok_or_else(|| {
            Error::NewtonDiverged(format!(
                "singular Jacobian at iteration {iter} (residual {gnorm:.3e})"
            ))
        })?;
        let mut damping = 1.0;
        let mut accepted = false;
        while damping >= LINE_SEARCH_MIN {
            let xt = &x + &step * damping;
            if xt[0] > 0.0 {
                if let Ok(gt) = reduced_gradient(params, &xt) {
                    let gtnorm = gt.norm();
                    if gtnorm < gnorm * (1.0 - 1e-4 * damping) || gtnorm <= tol {
                        x = xt;
                        grad = gt;
                        accepted = true;
                        break;
                    }
                }
            }
            damping *= 0.5;
        }
        if !accepted {
            return Err(Error::NewtonDiverged(format!(
                "line search stalled at iteration {iter} (residual {gnorm:.3e})"
            )));
        }
    }
    if !converged {
        return Err(Error::NewtonDiverged(format!(
            "no convergence within {NEWTON_MAX_ITERS} iterations (residual {:.3e})",
            grad.norm()
        )));
    }

    let j_bar = [x[1], x[2], x[3]];
    if !(j_bar[0] < j_bar[1] && j_bar[1] < j_bar[2]) {
        return Err(Error::OrderingViolation(format!(
            "expected J1 < J2 < J3 at the equilibrium, got ({:.6e}, {:.6e}, {:.6e})",
            j_bar[0], j_bar[1], j_bar[2]
        )));
    }

    let y_bar = chart_of(&x, params.dim());
    let residual_norm = params.grad_effective_potential_at(&y_bar)?.norm();
    let eigs = transversal_hessian_eigenvalues(params, &y_bar)?;
    if eigs[0] <= 0.0 {
        return Err(Error::IndefiniteHessian(format!(
            "minimum transversal eigenvalue {:.6e}",
            eigs[0]
        )));
    }

    Ok(Equilibrium {
        r_bar: x[0],
        j_bar,
        z_bar: DVector::from_iterator(n, (0..n).map(|k| x[4 + k])),
        p: params.p,
        epsilon: params.elastic.epsilon(),
        residual_norm,
        transversal_hessian_eigs: eigs,
    })
}

/// Eigenvalues of the dynamics linearized at the equilibrium, computed by
/// central finite differences of the first-order vector field on
/// (y, ẏ). The spectrum carries one zero eigenvalue from the symmetry
/// direction along the manifold; without friction the rest sit on the
/// imaginary axis, with friction they move into the left half plane.
pub fn linearized_spectrum(
    params: &ModelParams,
    eq: &Equilibrium,
) -> Result<Vec<Complex<f64>>> {
    let dim = params.dim();
    let y_bar = eq.configuration();
    let field = |u: &DVector<f64>| -> Result<DVector<f64>> {
        let y = DVector::from_iterator(dim, (0..dim).map(|k| u[k]));
        let v = DVector::from_iterator(dim, (0..dim).map(|k| u[dim + k]));
        let acc = params.accelerations(&y, &v, None)?;
        let mut out = DVector::zeros(2 * dim);
        for k in 0..dim {
            out[k] = v[k];
            out[dim + k] = acc[k];
        }
        Ok(out)
    };
    let mut u0 = DVector::zeros(2 * dim);
    for k in 0..dim {
        u0[k] = y_bar[k];
    }
    let mut jac = DMatrix::zeros(2 * dim, 2 * dim);
    for j in 0..2 * dim {
        let h = FD_STEP * (1.0 + u0[j].abs());
        let mut up = u0.clone();
        up[j] += h;
        let mut um = u0.clone();
        um[j] -= h;
        let column = (field(&up)? - field(&um)?) / (2.0 * h);
        jac.set_column(j, &column);
    }
    let mut eigs: Vec<Complex<f64>> = jac.complex_eigenvalues().iter().copied().collect();
    eigs.sort_by(|a, b| {
        (a.re, a.im)
            .partial_cmp(&(b.re, b.im))
            .expect("eigenvalues are finite")
    });
    Ok(eigs)
}

/// Initial offset applied to the resting equilibrium state in the
/// relaxation experiment: radial, orientation (through χ at β = 0), and
/// their velocities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationSpec {
    pub delta_r: f64,
    pub delta_gamma: f64,
    pub delta_r_dot: f64,
    pub delta_chi_dot: f64,
}

impl PerturbationSpec {
    /// Equal offset in all four perturbed slots.
    pub fn uniform(size: f64) -> Self {
        PerturbationSpec {
            delta_r: size,
            delta_gamma: size,
            delta_r_dot: size,
            delta_chi_dot: size,
        }
    }

    /// No perturbation.
    pub fn zero() -> Self {
        PerturbationSpec::uniform(0.0)
    }

    /// Euclidean size of the offset.
    pub fn size(&self) -> f64 {
        (self.delta_r * self.delta_r
            + self.delta_gamma * self.delta_gamma
            + self.delta_r_dot * self.delta_r_dot
            + self.delta_chi_dot * self.delta_chi_dot)
            .sqrt()
    }
}

/// Acceptance thresholds for the relaxation verdict.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LasalleThresholds {
    /// Allowed per-sample energy increase, relative to max(1, |E(0)|).
    pub energy_step: f64,
    /// Bound on the final manifold distance.
    pub manifold_distance: f64,
    /// Bound on the final orientation angle |γ|.
    pub gamma: f64,
    /// Bound on the final osculating eccentricity.
    pub eccentricity: f64,
    /// Bound on the final internal speeds |β̇|, |J̇|, |ż|.
    pub internal_speed: f64,
}

impl Default for LasalleThresholds {
    fn default() -> Self {
        LasalleThresholds {
            energy_step: 1e-9,
            manifold_distance: 1e-6,
            gamma: 1e-6,
            eccentricity: 1e-5,
            internal_speed: 1e-6,
        }
    }
}

/// Outcome of the relaxation experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// Energy decayed monotonically and the trajectory converged to the
    /// manifold within every threshold.
    Pass,
    /// The run completed but at least one criterion failed.
    Fail,
    /// The run halted before the end time (chart boundary or step
    /// underflow), so the criteria could not be evaluated.
    Inconclusive,
}

/// Measured outcome of [`lasalle_experiment`]: the verdict, the per-flag
/// diagnostics behind it, and the full sampled trajectory (time grid with
/// energy, orientation, eccentricity, and manifold-distance series).
#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub verdict: Verdict,
    pub perturbation: PerturbationSpec,
    pub thresholds: LasalleThresholds,
    /// Manifold distance at the initial sample.
    pub initial_manifold_distance: f64,
    /// Largest energy increase between consecutive samples (0 when the
    /// series is perfectly monotone).
    pub max_energy_increase: f64,
    pub energy_monotone: bool,
    pub final_manifold_distance: f64,
    pub manifold_converged: bool,
    pub final_gamma: f64,
    pub gamma_converged: bool,
    pub final_eccentricity: f64,
    pub eccentricity_converged: bool,
    pub final_internal_speed: f64,
    pub internal_speeds_converged: bool,
    /// Full sampled trajectory behind the diagnostics.
    pub record: TrajectoryRecord,
}

/// Relax a perturbed synchronous state and judge whether it converges back
/// to the manifold.
///
/// The initial state is the resting equilibrium offset by `perturbation`;
/// the run uses `opts` for the integrator, end time, and sampling interval,
/// with the reference orbit forced to the equilibrium so the manifold
/// distance and eccentricity diagnostics are measured against it. The
/// verdict is `Pass` when the sampled energy is monotone nonincreasing up
/// to the per-step allowance and the final sample meets the manifold
/// distance, orientation, eccentricity, and internal-speed thresholds;
/// `Fail` when the run completes but a criterion fails; `Inconclusive` when
/// the run halts early (for example near the chart boundary).
pub fn lasalle_experiment(
    params: &ModelParams,
    eq: &Equilibrium,
    perturbation: &PerturbationSpec,
    opts: &SimOptions,
    thresholds: &LasalleThresholds,
) -> Result<ConvergenceReport> {
    let dim = eq.dim();
    if dim != params.dim() {
        return Err(Error::Config(format!(
            "equilibrium has {} slots but the model has {}",
            dim,
            params.dim()
        )));
    }
    let mut y = eq.configuration();
    y[IDX_R] += perturbation.delta_r;
    y[IDX_CHI] += perturbation.delta_gamma;
    let mut v = DVector::zeros(dim);
    v[IDX_R] += perturbation.delta_r_dot;
    v[IDX_CHI] += perturbation.delta_chi_dot;
    let initial = ReducedState::new(0.0, y, v, 0.0)?;

    let mut opts = opts.clone();
    opts.reference = Some(eq.reference_orbit(&params.gravity));
    let record = dynamics::simulate(params, &initial, &opts)?;

    let e_scale = record.energies.first().map_or(1.0, |e| e.abs().max(1.0));
    let max_energy_increase = record
        .energies
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(0.0_f64, f64::max)
        .max(0.0);
    let energy_monotone = max_energy_increase <= thresholds.energy_step * e_scale;

    let initial_manifold_distance = record.manifold_distances.first().copied().unwrap_or(0.0);
    let final_manifold_distance = record.manifold_distances.last().copied().unwrap_or(0.0);
    let final_gamma = record.gammas.last().copied().unwrap_or(0.0);
    let final_eccentricity = record.eccentricities.last().copied().unwrap_or(0.0);
    let final_internal_speed = record
        .velocities
        .last()
        .map_or(0.0, |v| (IDX_BETA..dim).fold(0.0_f64, |acc, k| acc.max(v[k].abs())));

    let manifold_converged = final_manifold_distance < thresholds.manifold_distance;
    let gamma_converged = final_gamma.abs() < thresholds.gamma;
    let eccentricity_converged = final_eccentricity < thresholds.eccentricity;
    let internal_speeds_converged = final_internal_speed < thresholds.internal_speed;

    let verdict = if record.status != RunStatus::Completed {
        Verdict::Inconclusive
    } else if energy_monotone
        && manifold_converged
        && gamma_converged
        && eccentricity_converged
        && internal_speeds_converged
    {
        Verdict::Pass
    } else {
        Verdict::Fail
    };

    Ok(ConvergenceReport {
        verdict,
        perturbation: *perturbation,
        thresholds: *thresholds,
        initial_manifold_distance,
        max_energy_increase,
        energy_monotone,
        final_manifold_distance,
        manifold_converged,
        final_gamma,
        gamma_converged,
        final_eccentricity,
        eccentricity_converged,
        final_internal_speed,
        internal_speeds_converged,
        record,
    })
}

/// Value of the combined rotational identity on frozen-shape states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NdResidual {
    /// The χ-equation specialized to frozen shape, scaled by
    /// a₁₂/(I₀+J₃), minus the specialized β-equation.
    pub residual: f64,
    /// The closed-form value (1 − a₁₂/(I₀+J₃))·∂V_eff/∂γ the combination
    /// must equal.
    pub expected: f64,
    /// Largest mismatch between each specialized equation and the matching
    /// row of the general mass-matrix assembly at the same state.
    pub assembly_mismatch: f64,
}

/// Evaluate the combined rotational identity on a frozen-shape state
/// (β̇ = J̇ = ż = 0, with Ṙ and χ̇ free).
///
/// Restricted to such states, the χ-row and β-row of the equations of
/// motion collapse to a common form that differs only by a single factor,
/// I₀+J₃ versus a₁₂. Scaling the first by a₁₂/(I₀+J₃) and subtracting the
/// second cancels every acceleration and velocity term, leaving
/// (1 − a₁₂/(I₀+J₃))·∂V_eff/∂γ. The returned [`NdResidual`] carries the
/// combination assembled from the two specialized equations, its closed
/// form, and a row-by-row cross-check against the general assembly; for
/// a₁₂ = 0 the residual equals ∂V_eff/∂γ itself. The identity is what
/// forces frozen-shape invariant orbits onto the synchronous manifold:
/// away from points where a₁₂ = I₀+J₃, it pins ∂V_eff/∂γ to zero.
pub fn nd_residual_check(params: &ModelParams, state: &ReducedState) -> Result<NdResidual> {
    params.validate()?;
    let dim = params.dim();
    if state.dim() != dim {
        return Err(Error::Config(format!(
            "state has {} slots but the model has {dim}",
            state.dim()
        )));
    }
    for k in IDX_BETA..dim {
        if state.v[k] != 0.0 {
            return Err(Error::Config(format!(
                "state is not frozen-shape: velocity slot {k} is {}",
                state.v[k]
            )));
        }
    }

    let y = &state.y;
    let s = params.reduction_scalars(y)?;
    let m = params.gravity.m;
    let r = y[IDX_R];
    let rdot = state.v[IDX_R];
    let chidot = state.v[IDX_CHI];
    let v_gamma = params.grad_effective_potential_at(y)?[IDX_CHI];

    // Acceleration of χ under the full dynamics at this state. Any value
    // cancels out of the combination; using the true one ties the
    // row-by-row cross-check to the assembled equations.
    let chiddot = params.equations_of_motion(state)?[IDX_CHI];

    // Left-hand side of the specialized rotational equation, with the
    // single distinguishing factor passed in: I₀+J₃ for the χ-row, a₁₂ for
    // the β-row.
    let mu2 = s.mu * s.mu;
    let lhs = |a1k: f64| -> f64 {
        -a1k * s.a11 * chiddot / s.mu + 2.0 * m * r * a1k * s.a11 * chidot * rdot / mu2
            + a1k * chiddot
            - 2.0 * params.p * m * r * a1k * rdot / mu2
    };
    let lhs1 = lhs(s.a11);
    let lhs2 = lhs(s.a12);
    // Equation forms: right side −∂V_eff/∂γ minus left side.
    let eq1 = -v_gamma - lhs1;
    let eq2 = -v_gamma - lhs2;
    let ratio = s.a12 / s.a11;
    let residual = ratio * eq1 - eq2;
    let expected = (1.0 - ratio) * v_gamma;

    // With the shape velocities and accelerations zero and the mass matrix
    // uncoupled between R and the angles, row i of M ÿ = F reduces to
    // M[i, χ]·χ̈ = F_i, so F_i − M[i, χ]·χ̈ must reproduce each
    // specialized equation form.
    let mass = params.mass_matrix(y)?;
    let force = params.force_vector(&s, y, &state.v)?;
    let asm1 = force[IDX_CHI] - mass[(IDX_CHI, IDX_CHI)] * chiddot;
    let asm2 = force[IDX_BETA] - mass[(IDX_BETA, IDX_CHI)] * chiddot;
    let assembly_mismatch = (eq1 - asm1).abs().max((eq2 - asm2).abs());

    Ok(NdResidual {
        residual,
        expected,
        assembly_mismatch,
    })
}

//! Reduced dynamics of the orbiting deformable body.
//!
//! The configuration vector is y = (R, χ, β, J₁, J₂, J₃, z₁, …, z_n): orbital
//! distance, rigid rotation angle relative to the orbital direction, internal
//! rotation offset, the three moment increments, and the auxiliary shape
//! modes. The orbital angle ψ has been reduced away at fixed total angular
//! momentum p; it is reconstructed along trajectories by quadrature.
//!
//! The reduced Lagrangian is ℒ(y, ẏ) = ½ ẏᵀM(y)ẏ + b(y)ᵀẏ − V_eff(y) with
//!   M(y) = B₀(y) − d(y)d(y)ᵀ/μ(y),    b(y) = (p/μ(y)) d(y),
//! where B₀ is the block kinetic form (orbital mass m, rotational block with
//! a₁₁ = I₀+J₃ and cross coupling a₁₂ = κ(J₁−J₂), shape masses), d(y) is the
//! rotational coupling direction (a₁₁ in the χ slot, a₁₂ in the β slot), and
//! μ = mR² + I₀ + J₃. The equations of motion are assembled from the exact
//! partial derivatives of M and b, so energy behaves exactly as the model
//! demands: conserved without friction, monotonically dissipated with it.

use std::fmt;
use std::io::Write as IoWrite;
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::integrate::{self, Method, RunStatus};
use crate::potentials::{
    effective_potential, grad_effective_potential, CubicShapeTerm, ElasticCoeffs, GravityParams,
    ShapeCoords,
};

/// Slot of the orbital distance R in the configuration vector.
pub const IDX_R: usize = 0;
/// Slot of the rigid rotation angle χ.
pub const IDX_CHI: usize = 1;
/// Slot of the internal rotation offset β.
pub const IDX_BETA: usize = 2;
/// Slot of the first moment increment J₁.
pub const IDX_J1: usize = 3;
/// Slot of the second moment increment J₂.
pub const IDX_J2: usize = 4;
/// Slot of the third moment increment J₃.
pub const IDX_J3: usize = 5;
/// Slot of the first auxiliary shape mode z₁.
pub const IDX_Z0: usize = 6;

/// Default relative threshold (times I₀) below which a pairwise moment gap
/// |J_i − J_j| counts as approaching the degenerate set of the shape chart.
pub const DEFAULT_CHART_GAP: f64 = 1e-12;

/// Wrap an angle to the interval (−π, π].
pub fn wrap_angle(x: f64) -> f64 {
    let mut w = x.rem_euclid(std::f64::consts::TAU);
    if w > std::f64::consts::PI {
        w -= std::f64::consts::TAU;
    }
    w
}

/// Eccentricity of the osculating two-body orbit through (R, Ṙ, ψ̇) for a
/// point mass around a center of attraction with gravitational parameter
/// `gm` (per unit satellite mass). Diagnostic only: shape corrections of
/// order J/mR² are deliberately ignored.
pub fn osculating_eccentricity(r: f64, rdot: f64, psidot: f64, gm: f64) -> f64 {
    let h = r * r * psidot;
    let energy = 0.5 * (rdot * rdot + (r * psidot) * (r * psidot)) - gm / r;
    let e2 = 1.0 + 2.0 * energy * h * h / (gm * gm);
    e2.max(0.0).sqrt()
}

/// Masses of the rotational and shape kinetic block.
///
/// The assembled kinetic form on (χ̇, β̇, J̇, ż) is
///   a₁₁ χ̇² /2 + a₁₂ χ̇ β̇ + m_β β̇²/2 + Σ μ_J J̇²/2 + Σ μ_z ż²/2
/// with a₁₁ = I₀ + J₃ and a₁₂ = κ (J₁ − J₂); all other cross terms vanish.
/// I₀ itself lives in [`GravityParams`] so that the kinetic and potential
/// sides cannot disagree about it.
#[derive(Debug, Clone, PartialEq)]
pub struct KineticSpec {
    /// Inertia of the internal rotation offset β.
    pub mass_beta: f64,
    /// Inertias of the three moment increments.
    pub mass_j: [f64; 3],
    /// Inertias of the auxiliary shape modes (length n).
    pub mass_z: Vec<f64>,
    /// Coupling coefficient of the χ̇ β̇ cross term: a₁₂ = κ (J₁ − J₂),
    /// which vanishes with the shape as the model requires.
    pub kappa: f64,
}

impl KineticSpec {
    /// Check positivity and the expected number of shape modes.
    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.mass_beta > 0.0) {
            return Err(Error::Config(format!(
                "mass_beta must be positive, got {}",
                self.mass_beta
            )));
        }
        for (i, mj) in self.mass_j.iter().enumerate() {
            if !(*mj > 0.0) {
                return Err(Error::Config(format!(
                    "mass_J[{i}] must be positive, got {mj}"
                )));
            }
        }
        if self.mass_z.len() != n {
            return Err(Error::Config(format!(
                "mass_z has {} entries but the elastic model has {n} shape modes",
                self.mass_z.len()
            )));
        }
        for (j, mz) in self.mass_z.iter().enumerate() {
            if !(*mz > 0.0) {
                return Err(Error::Config(format!(
                    "mass_z[{j}] must be positive, got {mz}"
                )));
            }
        }
        if !self.kappa.is_finite() {
            return Err(Error::Config(format!(
                "kappa must be finite, got {}",
                self.kappa
            )));
        }
        Ok(())
    }
}

/// Optional cubic part F₃ of the Rayleigh function, as a callback on the
/// shape-block velocity w = (β̇, J̇₁, J̇₂, J̇₃, ż₁, …, ż_n).
pub trait CubicDissipation {
    /// Value F₃(w).
    fn value(&self, w: &[f64]) -> f64;
    /// Gradient ∇F₃(w), same layout and length as w.
    fn gradient(&self, w: &[f64]) -> Vec<f64>;
}

/// Rayleigh dissipation: F(w) = ½ wᵀ η w + F₃(w) on the shape-block
/// velocity w = (β̇, J̇, ż). F is independent of (R, χ, Ṙ, χ̇) by
/// construction, and η must be symmetric positive definite so that F has a
/// nondegenerate minimum at w = 0.
#[derive(Clone)]
pub struct DissipationSpec {
    eta: DMatrix<f64>,
    cubic: Option<Arc<dyn CubicDissipation + Send + Sync>>,
}

impl fmt::Debug for DissipationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DissipationSpec")
            .field("eta", &self.eta)
            .field("cubic", &self.cubic.as_ref().map(|_| "<callback>"))
            .finish()
    }
}

/// Symmetry tolerance for a user-supplied friction matrix.
const ETA_SYMMETRY_TOL: f64 = 1e-12;

impl DissipationSpec {
    /// Isotropic friction η = strength · Id on the (4+n)-dimensional shape
    /// velocity block.
    pub fn isotropic(strength: f64, n: usize) -> Result<Self> {
        if !(strength > 0.0) {
            return Err(Error::Config(format!(
                "friction strength must be positive, got {strength}"
            )));
        }
        Ok(DissipationSpec {
            eta: DMatrix::identity(4 + n, 4 + n) * strength,
            cubic: None,
        })
    }

    /// General symmetric positive definite friction matrix on (β̇, J̇, ż).
    pub fn new(eta: DMatrix<f64>) -> Result<Self> {
        if eta.nrows() != eta.ncols() || eta.nrows() < 4 {
            return Err(Error::Config(format!(
                "friction matrix must be square of size 4+n, got {}x{}",
                eta.nrows(),
                eta.ncols()
            )));
        }
        let scale = eta.amax().max(1.0);
        for i in 0..eta.nrows() {
            for j in 0..i {
                if (eta[(i, j)] - eta[(j, i)]).abs() > ETA_SYMMETRY_TOL * scale {
                    return Err(Error::Config(format!(
                        "friction matrix is not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        let sym = (&eta + eta.transpose()) * 0.5;
        if Cholesky::new(sym.clone()).is_none() {
            return Err(Error::Config(
                "friction matrix must be positive definite".into(),
            ));
        }
        Ok(DissipationSpec {
            eta: sym,
            cubic: None,
        })
    }

    /// Attach a cubic Rayleigh term.
    pub fn with_cubic(mut self, cubic: Arc<dyn CubicDissipation + Send + Sync>) -> Self {
        self.cubic = Some(cubic);
        self
    }

    /// The friction matrix.
    pub fn eta(&self) -> &DMatrix<f64> {
        &self.eta
    }

    /// Number of auxiliary shape modes the matrix is sized for.
    pub fn n(&self) -> usize {
        self.eta.nrows() - 4
    }

    /// Generalized friction force ∇_w F = η w + ∇F₃(w).
    pub fn force(&self, w: &DVector<f64>) -> DVector<f64> {
        let mut f = &self.eta * w;
        if let Some(cb) = &self.cubic {
            let g3 = cb.gradient(w.as_slice());
            for (i, gi) in g3.iter().enumerate() {
                f[i] += gi;
            }
        }
        f
    }

    /// Instantaneous dissipated power w · ∇_w F = wᵀηw + w·∇F₃(w), which
    /// equals −dE/dt along exact solutions.
    pub fn power(&self, w: &DVector<f64>) -> f64 {
        let mut p = w.dot(&(&self.eta * w));
        if let Some(cb) = &self.cubic {
            let g3 = cb.gradient(w.as_slice());
            for (i, gi) in g3.iter().enumerate() {
                p += w[i] * gi;
            }
        }
        p
    }
}

/// Complete model: gravity and reduction constants, elastic energy, kinetic
/// masses, optional friction, the conserved total angular momentum p, and an
/// optional cubic shape correction to the elastic energy.
#[derive(Clone)]
pub struct ModelParams {
    pub gravity: GravityParams,
    pub elastic: ElasticCoeffs,
    pub kinetic: KineticSpec,
    pub dissipation: Option<DissipationSpec>,
    /// Total angular momentum of the reduced system (conserved).
    pub p: f64,
    /// Optional cubic shape term added to the elastic energy.
    pub cubic: Option<Arc<dyn CubicShapeTerm + Send + Sync>>,
}

impl fmt::Debug for ModelParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelParams")
            .field("gravity", &self.gravity)
            .field("elastic", &self.elastic)
            .field("kinetic", &self.kinetic)
            .field("dissipation", &self.dissipation)
            .field("p", &self.p)
            .field("cubic", &self.cubic.as_ref().map(|_| "<callback>"))
            .finish()
    }
}

/// Snapshot of the reduced phase state, together with the reconstructed
/// orbital angle ψ carried along for bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedState {
    pub t: f64,
    /// Configuration y = (R, χ, β, J₁, J₂, J₃, z…).
    pub y: DVector<f64>,
    /// Velocities ẏ, same layout.
    pub v: DVector<f64>,
    /// Reconstructed orbital angle.
    pub psi: f64,
}

impl ReducedState {
    /// Build a state snapshot, checking layout and finiteness.
    pub fn new(t: f64, y: DVector<f64>, v: DVector<f64>, psi: f64) -> Result<Self> {
        if y.len() < 6 {
            return Err(Error::Config(format!(
                "configuration must have at least 6 slots (R, χ, β, J), got {}",
                y.len()
            )));
        }
        if v.len() != y.len() {
            return Err(Error::Config(format!(
                "velocity has {} slots but configuration has {}",
                v.len(),
                y.len()
            )));
        }
        if !(t.is_finite() && psi.is_finite()) || y.iter().chain(v.iter()).any(|x| !x.is_finite())
        {
            return Err(Error::Config("state contains non-finite entries".into()));
        }
        Ok(ReducedState { t, y, v, psi })
    }

    /// Number of configuration slots, 6 + n.
    pub fn dim(&self) -> usize {
        self.y.len()
    }

    /// Orientation angle γ = χ + β of the long axis relative to the
    /// direction of the attracting center, wrapped to (−π, π].
    pub fn gamma(&self) -> f64 {
        wrap_angle(self.y[IDX_CHI] + self.y[IDX_BETA])
    }
}

/// Reference relative equilibrium used for trajectory diagnostics: the
/// configuration (R̄, 0, 0, J̄, z̄) and the gravitational parameter of the
/// osculating circular orbit through it.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceOrbit {
    /// Equilibrium configuration (angles zero).
    pub y_bar: DVector<f64>,
    /// Gravitational parameter ψ̄̇²R̄³ of the matching circular orbit, used
    /// for the osculating-eccentricity diagnostic so that the eccentricity
    /// vanishes identically on the equilibrium manifold.
    pub gm_ref: f64,
}

/// Distance from the manifold of relative equilibria through `y_bar`:
/// Euclidean length of (R − R̄, γ wrapped to (−π, π], J − J̄, z − z̄, ẏ).
/// The individual angles χ and β enter only through γ, so the distance is
/// invariant under (χ, β) → (χ+δ, β−δ), the symmetry direction along the
/// manifold.
pub fn manifold_distance(y_bar: &DVector<f64>, y: &DVector<f64>, v: &DVector<f64>) -> f64 {
    let mut acc = 0.0;
    let dr = y[IDX_R] - y_bar[IDX_R];
    acc += dr * dr;
    let gamma = wrap_angle(y[IDX_CHI] + y[IDX_BETA] - y_bar[IDX_CHI] - y_bar[IDX_BETA]);
    acc += gamma * gamma;
    for k in IDX_J1..y.len() {
        let d = y[k] - y_bar[k];
        acc += d * d;
    }
    acc += v.norm_squared();
    acc.sqrt()
}

impl ReferenceOrbit {
    /// Distance from the equilibrium manifold through this reference
    /// configuration; see [`manifold_distance`].
    pub fn manifold_distance(&self, y: &DVector<f64>, v: &DVector<f64>) -> f64 {
        manifold_distance(&self.y_bar, y, v)
    }
}

/// Options for [`simulate`].
#[derive(Debug, Clone)]
pub struct SimOptions {
    pub method: Method,
    /// End time of the run (start time comes from the initial state).
    pub t_end: f64,
    /// Sampling interval for the trajectory record; nonpositive records
    /// every accepted step.
    pub record_interval: f64,
    /// Reference equilibrium for the manifold-distance and eccentricity
    /// diagnostics; without it those columns are NaN and the eccentricity
    /// uses the raw gravitational parameter.
    pub reference: Option<ReferenceOrbit>,
    /// Per-slot freeze mask (true = hold the coordinate fixed with zero
    /// velocity). Used for restricted cross-checks such as rigid two-body
    /// runs or single-mode oscillations.
    pub freeze: Option<Vec<bool>>,
    /// Relative threshold (times I₀) for the pairwise moment-gap guard.
    pub chart_gap: f64,
}

impl SimOptions {
    pub fn new(method: Method, t_end: f64) -> Self {
        SimOptions {
            method,
            t_end,
            record_interval: 0.0,
            reference: None,
            freeze: None,
            chart_gap: DEFAULT_CHART_GAP,
        }
    }
}

/// Sampled trajectory with physical diagnostics, stored column-wise.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    /// Configuration samples y(t).
    pub states: Vec<DVector<f64>>,
    /// Velocity samples ẏ(t).
    pub velocities: Vec<DVector<f64>>,
    /// Reconstructed orbital angle ψ(t).
    pub psis: Vec<f64>,
    /// Reduced energy E(t).
    pub energies: Vec<f64>,
    /// Instantaneous dissipated power (so dE/dt = −power along solutions).
    pub powers: Vec<f64>,
    /// Accumulated dissipated work ∫ power dt, integrated with the flow.
    pub works: Vec<f64>,
    /// Orientation angle γ(t) wrapped to (−π, π].
    pub gammas: Vec<f64>,
    /// Osculating-eccentricity diagnostic.
    pub eccentricities: Vec<f64>,
    /// Distance from the reference equilibrium manifold (NaN without a
    /// reference).
    pub manifold_distances: Vec<f64>,
    pub status: RunStatus,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
}

impl TrajectoryRecord {
    /// Number of samples.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Write the record as CSV with a header row and 17 significant digits:
    /// t, y, ẏ, E, dE/dt, ψ, γ, osculating eccentricity, manifold distance.
    pub fn write_csv<W: IoWrite>(&self, out: &mut W) -> Result<()> {
        let n = match self.states.first() {
            Some(y) => y.len() - 6,
            None => 0,
        };
        let mut header: Vec<String> = vec!["t".into()];
        let coord_names = |suffix: &str| -> Vec<String> {
            let mut names = vec![
                format!("R{suffix}"),
                format!("chi{suffix}"),
                format!("beta{suffix}"),
                format!("J1{suffix}"),
                format!("J2{suffix}"),
                format!("J3{suffix}"),
            ];
            for j in 0..n {
                names.push(format!("z{}{suffix}", j + 1));
            }
            names
        };
        header.extend(coord_names(""));
        header.extend(coord_names("dot"));
        header.extend(
            ["E", "dEdt", "psi", "gamma", "ecc", "manifold_dist"]
                .iter()
                .map(|s| s.to_string()),
        );
        writeln!(out, "{}", header.join(","))?;
        for k in 0..self.len() {
            let mut row: Vec<String> = Vec::with_capacity(header.len());
            row.push(format!("{:.16e}", self.times[k]));
            for x in self.states[k].iter() {
                row.push(format!("{x:.16e}"));
            }
            for x in self.velocities[k].iter() {
                row.push(format!("{x:.16e}"));
            }
            row.push(format!("{:.16e}", self.energies[k]));
            row.push(format!("{:.16e}", -self.powers[k]));
            row.push(format!("{:.16e}", self.psis[k]));
            row.push(format!("{:.16e}", self.gammas[k]));
            row.push(format!("{:.16e}", self.eccentricities[k]));
            row.push(format!("{:.16e}", self.manifold_distances[k]));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// Final state snapshot, if any samples were recorded.
    pub fn last_state(&self) -> Option<ReducedState> {
        let k = self.len().checked_sub(1)?;
        Some(ReducedState {
            t: self.times[k],
            y: self.states[k].clone(),
            v: self.velocities[k].clone(),
            psi: self.psis[k],
        })
    }
}

/// Scalars of the reduction at a configuration: (a₁₁, a₁₂, μ).
pub(crate) struct ReductionScalars {
    pub(crate) a11: f64,
    pub(crate) a12: f64,
    pub(crate) mu: f64,
}

impl ModelParams {
    /// Number of auxiliary shape modes.
    pub fn n(&self) -> usize {
        self.elastic.n()
    }

    /// Number of configuration slots, 6 + n.
    pub fn dim(&self) -> usize {
        6 + self.n()
    }

    /// Validate cross-field consistency.
    pub fn validate(&self) -> Result<()> {
        self.gravity.validate()?;
        let n = self.n();
        self.kinetic.validate(n)?;
        if let Some(ds) = &self.dissipation {
            if ds.n() != n {
                return Err(Error::Config(format!(
                    "friction matrix is sized for {} shape modes but the model has {n}",
                    ds.n()
                )));
            }
        }
        if !self.p.is_finite() {
            return Err(Error::Config(format!(
                "angular momentum must be finite, got {}",
                self.p
            )));
        }
        Ok(())
    }

    /// Shape coordinates stored in a configuration vector.
    pub fn shape_of(&self, y: &DVector<f64>) -> ShapeCoords {
        ShapeCoords {
            j: [y[IDX_J1], y[IDX_J2], y[IDX_J3]],
            z: y.iter().skip(IDX_Z0).copied().collect(),
        }
    }

    fn cubic_ref(&self) -> Option<&dyn CubicShapeTerm> {
        self.cubic.as_ref().map(|c| c.as_ref() as &dyn CubicShapeTerm)
    }

    /// Compute (a₁₁, a₁₂, μ) and check the state is inside the admissible
    /// region: R > 0, positive moments I₀+J_i, positive reduced inertia μ,
    /// and a positive definite kinetic block.
    pub(crate) fn reduction_scalars(&self, y: &DVector<f64>) -> Result<ReductionScalars> {
        let r = y[IDX_R];
        if !(r > 0.0) {
            return Err(Error::Domain(format!(
                "orbital distance must be positive, got {r}"
            )));
        }
        let i0 = self.gravity.i0;
        for (i, idx) in [IDX_J1, IDX_J2, IDX_J3].iter().enumerate() {
            if !(i0 + y[*idx] > 0.0) {
                return Err(Error::KineticDegenerate(format!(
                    "moment I0+J{} = {} is not positive",
                    i + 1,
                    i0 + y[*idx]
                )));
            }
        }
        let a11 = i0 + y[IDX_J3];
        let a12 = self.kinetic.kappa * (y[IDX_J1] - y[IDX_J2]);
        let mu = self.gravity.m * r * r + a11;
        if !(mu > 0.0) {
            return Err(Error::KineticDegenerate(format!(
                "reduced inertia mR²+I₀+J₃ = {mu} is not positive"
            )));
        }
        // The rotational 2x2 block (a₁₁, a₁₂; a₁₂, m_β) must stay positive
        // definite; the remaining kinetic block is diagonal with validated
        // positive masses.
        if !(a11 > 0.0) || !(self.kinetic.mass_beta * a11 - a12 * a12 > 0.0) {
            return Err(Error::KineticDegenerate(format!(
                "rotational kinetic block lost definiteness (a11 {a11}, a12 {a12})"
            )));
        }
        Ok(ReductionScalars { a11, a12, mu })
    }

    /// Kinetic energy of the rotational and shape block,
    /// T_r = ½ a₁₁ χ̇² + a₁₂ χ̇ β̇ + ½ m_β β̇² + ½ Σ μ_J J̇² + ½ Σ μ_z ż².
    /// The radial term m Ṙ²/2 and the reduced orbital terms are accounted
    /// for separately in [`ModelParams::reduced_energy`].
    pub fn kinetic_energy(&self, state: &ReducedState) -> Result<f64> {
        let s = self.reduction_scalars(&state.y)?;
        let v = &state.v;
        let mut t = 0.5 * s.a11 * v[IDX_CHI] * v[IDX_CHI]
            + s.a12 * v[IDX_CHI] * v[IDX_BETA]
            + 0.5 * self.kinetic.mass_beta * v[IDX_BETA] * v[IDX_BETA];
        for i in 0..3 {
            t += 0.5 * self.kinetic.mass_j[i] * v[IDX_J1 + i] * v[IDX_J1 + i];
        }
        for j in 0..self.n() {
            t += 0.5 * self.kinetic.mass_z[j] * v[IDX_Z0 + j] * v[IDX_Z0 + j];
        }
        Ok(t)
    }

    /// Total angular momentum of the unreduced system at the given state and
    /// orbital rate: p = mR²ψ̇ + (I₀+J₃)(χ̇+ψ̇) + a₁₂ β̇.
    pub fn angular_momentum(&self, state: &ReducedState, psi_dot: f64) -> Result<f64> {
        let s = self.reduction_scalars(&state.y)?;
        Ok(s.mu * psi_dot + s.a11 * state.v[IDX_CHI] + s.a12 * state.v[IDX_BETA])
    }

    /// Orbital rate recovered from the conserved angular momentum:
    /// ψ̇ = (p − (I₀+J₃)χ̇ − a₁₂β̇)/(mR² + I₀ + J₃).
    pub fn psi_dot(&self, state: &ReducedState) -> Result<f64> {
        let s = self.reduction_scalars(&state.y)?;
        Ok(self.psi_dot_raw(&s, &state.v))
    }

    fn psi_dot_raw(&self, s: &ReductionScalars, v: &DVector<f64>) -> f64 {
        (self.p - s.a11 * v[IDX_CHI] - s.a12 * v[IDX_BETA]) / s.mu
    }

    /// Effective potential at a configuration.
    pub fn effective_potential_at(&self, y: &DVector<f64>) -> Result<f64> {
        let shape = self.shape_of(y);
        effective_potential(
            y[IDX_R],
            y[IDX_CHI],
            y[IDX_BETA],
            &shape,
            &self.gravity,
            &self.elastic,
            self.p,
            self.cubic_ref(),
        )
    }

    /// Gradient of the effective potential with respect to y.
    pub fn grad_effective_potential_at(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        let shape = self.shape_of(y);
        grad_effective_potential(
            y[IDX_R],
            y[IDX_CHI],
            y[IDX_BETA],
            &shape,
            &self.gravity,
            &self.elastic,
            self.p,
            self.cubic_ref(),
        )
    }

    /// Reduced energy E = ½ ẏᵀM(y)ẏ + V_eff(y), conserved along
    /// conservative trajectories and nonincreasing along dissipative ones.
    pub fn reduced_energy(&self, state: &ReducedState) -> Result<f64> {
        let s = self.reduction_scalars(&state.y)?;
        self.energy_raw(&s, &state.y, &state.v)
    }

    fn energy_raw(&self, s: &ReductionScalars, y: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
        // ½ vᵀMv = ½ m Ṙ² + T_r(v) − (a₁₁χ̇ + a₁₂β̇)²/(2μ).
        let coupling = s.a11 * v[IDX_CHI] + s.a12 * v[IDX_BETA];
        let mut t2 = 0.5 * self.gravity.m * v[IDX_R] * v[IDX_R]
            + 0.5 * s.a11 * v[IDX_CHI] * v[IDX_CHI]
            + s.a12 * v[IDX_CHI] * v[IDX_BETA]
            + 0.5 * self.kinetic.mass_beta * v[IDX_BETA] * v[IDX_BETA]
            - coupling * coupling / (2.0 * s.mu);
        for i in 0..3 {
            t2 += 0.5 * self.kinetic.mass_j[i] * v[IDX_J1 + i] * v[IDX_J1 + i];
        }
        for j in 0..self.n() {
            t2 += 0.5 * self.kinetic.mass_z[j] * v[IDX_Z0 + j] * v[IDX_Z0 + j];
        }
        Ok(t2 + self.effective_potential_at(y)?)
    }

    /// Instantaneous dissipated power ẏ·∇_ẏF at a state (zero without
    /// friction); equals −dE/dt along exact solutions.
    pub fn rayleigh_power(&self, state: &ReducedState) -> f64 {
        self.power_raw(&state.v)
    }

    fn power_raw(&self, v: &DVector<f64>) -> f64 {
        match &self.dissipation {
            Some(ds) => {
                let w = v.rows(IDX_BETA, 4 + self.n()).clone_owned();
                ds.power(&w)
            }
            None => 0.0,
        }
    }

    /// Generalized mass matrix M(y) = B₀(y) − d(y)d(y)ᵀ/μ(y) of the reduced
    /// Lagrangian. Always symmetric; positive definiteness is checked where
    /// the matrix is factored.
    pub fn mass_matrix(&self, y: &DVector<f64>) -> Result<DMatrix<f64>> {
        let s = self.reduction_scalars(y)?;
        let nn = self.dim();
        let mut m = DMatrix::zeros(nn, nn);
        m[(IDX_R, IDX_R)] = self.gravity.m;
        m[(IDX_CHI, IDX_CHI)] = s.a11 - s.a11 * s.a11 / s.mu;
        let cross = s.a12 - s.a11 * s.a12 / s.mu;
        m[(IDX_CHI, IDX_BETA)] = cross;
        m[(IDX_BETA, IDX_CHI)] = cross;
        m[(IDX_BETA, IDX_BETA)] = self.kinetic.mass_beta - s.a12 * s.a12 / s.mu;
        for i in 0..3 {
            m[(IDX_J1 + i, IDX_J1 + i)] = self.kinetic.mass_j[i];
        }
        for j in 0..self.n() {
            m[(IDX_Z0 + j, IDX_Z0 + j)] = self.kinetic.mass_z[j];
        }
        Ok(m)
    }

    /// Generalized force of the reduced Lagrangian at (y, ẏ): everything in
    /// M(y)ÿ = f except the inertia term, assembled from the exact partial
    /// derivatives of M and b. Includes the friction force when present.
    pub(crate) fn force_vector(
        &self,
        s: &ReductionScalars,
        y: &DVector<f64>,
        v: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        let nn = self.dim();
        let m = self.gravity.m;
        let r = y[IDX_R];
        let p = self.p;
        let kap = self.kinetic.kappa;
        let mu = s.mu;
        let (a11, a12) = (s.a11, s.a12);

        let g = self.grad_effective_potential_at(y)?;

        // Coupling direction d (a₁₁ in the χ slot, a₁₂ in the β slot) and
        // its contraction with the velocity.
        let dv = a11 * v[IDX_CHI] + a12 * v[IDX_BETA];
        let jdot12 = v[IDX_J1] - v[IDX_J2];

        let mut f = DVector::zeros(nn);

        // ½ vᵀ(∂M/∂y_k)v, nonzero only for k ∈ {R, J₁, J₂, J₃}.
        f[IDX_R] += m * r * dv * dv / (mu * mu);
        let q_j1 = kap * v[IDX_CHI] * v[IDX_BETA] - kap * v[IDX_BETA] * dv / mu;
        f[IDX_J1] += q_j1;
        f[IDX_J2] -= q_j1;
        f[IDX_J3] += 0.5 * v[IDX_CHI] * v[IDX_CHI] - v[IDX_CHI] * dv / mu
            + dv * dv / (2.0 * mu * mu);

        // −(dM/dt)v, with dM/dt = Σ_j (∂M/∂y_j) ẏ_j. Contributions along
        // the sparse direction d are accumulated in coef_d.
        let mut coef_d = -v[IDX_R] * 2.0 * m * r * dv / (mu * mu);
        f[IDX_CHI] -= jdot12 * kap * v[IDX_BETA];
        f[IDX_BETA] -= jdot12 * kap * (v[IDX_CHI] - dv / mu);
        coef_d += jdot12 * kap * v[IDX_BETA] / mu;
        f[IDX_CHI] -= v[IDX_J3] * (v[IDX_CHI] - dv / mu);
        coef_d += v[IDX_J3] * (v[IDX_CHI] / mu - dv / (mu * mu));

        // Gyroscopic force (∇bᵀ − ∇b)v from the linear-in-velocity term
        // b(y)ᵀẏ of the reduced Lagrangian, b = (p/μ)d.
        f[IDX_R] -= 2.0 * m * r * p * dv / (mu * mu);
        f[IDX_J1] += p * kap * v[IDX_BETA] / mu;
        f[IDX_J2] -= p * kap * v[IDX_BETA] / mu;
        f[IDX_J3] += p * v[IDX_CHI] / mu - p * dv / (mu * mu);
        coef_d += 2.0 * m * r * p * v[IDX_R] / (mu * mu);
        f[IDX_BETA] -= jdot12 * p * kap / mu;
        f[IDX_CHI] -= v[IDX_J3] * p / mu;
        coef_d += v[IDX_J3] * p / (mu * mu);

        // Scatter the accumulated multiples of d = (0, a₁₁, a₁₂, 0, …).
        f[IDX_CHI] += coef_d * a11;
        f[IDX_BETA] += coef_d * a12;

        f -= &g;

        if let Some(ds) = &self.dissipation {
            let w = v.rows(IDX_BETA, 4 + self.n()).clone_owned();
            let fd = ds.force(&w);
            for (i, fi) in fd.iter().enumerate() {
                f[IDX_BETA + i] -= fi;
            }
        }
        Ok(f)
    }

    /// Accelerations ÿ solving M(y)ÿ = f(y, ẏ). Slots marked true in
    /// `frozen` are held fixed (the corresponding velocities must be zero):
    /// the system is solved on the active block and frozen slots report zero
    /// acceleration.
    pub fn accelerations(
        &self,
        y: &DVector<f64>,
        v: &DVector<f64>,
        frozen: Option<&[bool]>,
    ) -> Result<DVector<f64>> {
        let nn = self.dim();
        if y.len() != nn || v.len() != nn {
            return Err(Error::Config(format!(
                "state has {} slots but the model has {nn}",
                y.len()
            )));
        }
        if let Some(mask) = frozen {
            if mask.len() != nn {
                return Err(Error::Config(format!(
                    "freeze mask has {} slots but the model has {nn}",
                    mask.len()
                )));
            }
        }
        let s = self.reduction_scalars(y)?;
        let f = self.force_vector(&s, y, v)?;
        let mm = self.mass_matrix(y)?;

        let active: Vec<usize> = match frozen {
            Some(mask) => (0..nn).filter(|k| !mask[*k]).collect(),
            None => (0..nn).collect(),
        };
        if active.is_empty() {
            return Ok(DVector::zeros(nn));
        }
        let na = active.len();
        let m_sub = DMatrix::from_fn(na, na, |i, j| mm[(active[i], active[j])]);
        let f_sub = DVector::from_fn(na, |i, _| f[active[i]]);
        let solved = match Cholesky::new(m_sub.clone()) {
            Some(ch) => ch.solve(&f_sub),
            None => {
                let sv = m_sub.singular_values();
                let smin = sv.min();
                let cond = if smin > 0.0 { sv.max() / smin } else { f64::INFINITY };
                return Err(Error::SingularMass { cond });
            }
        };
        let mut acc = DVector::zeros(nn);
        for (i, k) in active.iter().enumerate() {
            acc[*k] = solved[i];
        }
        Ok(acc)
    }

    /// Accelerations of the full reduced system at a state.
    pub fn equations_of_motion(&self, state: &ReducedState) -> Result<DVector<f64>> {
        self.accelerations(&state.y, &state.v, None)
    }
}

/// Integrate the reduced equations of motion from an initial state.
///
/// The augmented integration variable is u = (y, ẏ, ψ, W): configuration,
/// velocity, the orbital angle reconstructed by quadrature of ψ̇(y, ẏ), and
/// the accumulated dissipated work. The chart guard halts the run with a
/// [`RunStatus::ChartProximity`] status when the state approaches the edge
/// of the shape chart: nonpositive R or reduced inertia, nonpositive moments
/// I₀+J_i, a degenerate kinetic block, a mass matrix that loses positive
/// definiteness, or (when the moment coordinates are evolving) a pairwise
/// moment gap |J_i − J_j| below `chart_gap`·I₀. The guard runs at the start
/// and after every accepted step; transversal crossings strictly inside a
/// step are not detected, which is harmless because every assembled quantity
/// stays smooth across the guard surface.
pub fn simulate(
    params: &ModelParams,
    initial: &ReducedState,
    opts: &SimOptions,
) -> Result<TrajectoryRecord> {
    params.validate()?;
    let nn = params.dim();
    if initial.dim() != nn {
        return Err(Error::Config(format!(
            "initial state has {} slots but the model has {nn}",
            initial.dim()
        )));
    }
    if let Some(mask) = &opts.freeze {
        if mask.len() != nn {
            return Err(Error::Config(format!(
                "freeze mask has {} slots but the model has {nn}",
                mask.len()
            )));
        }
        for (k, frozen) in mask.iter().enumerate() {
            if *frozen && initial.v[k] != 0.0 {
                return Err(Error::Config(format!(
                    "slot {k} is frozen but starts with nonzero velocity {}",
                    initial.v[k]
                )));
            }
        }
    }
    if let Some(rb) = &opts.reference {
        if rb.y_bar.len() != nn {
            return Err(Error::Config(format!(
                "reference configuration has {} slots but the model has {nn}",
                rb.y_bar.len()
            )));
        }
    }
    if !(opts.chart_gap >= 0.0) {
        return Err(Error::Config(format!(
            "chart gap threshold must be nonnegative, got {}",
            opts.chart_gap
        )));
    }

    let frozen_mask = opts.freeze.clone();
    let moments_active = match &frozen_mask {
        Some(mask) => !(mask[IDX_J1] && mask[IDX_J2] && mask[IDX_J3]),
        None => true,
    };
    let gap_threshold = opts.chart_gap * params.gravity.i0;

    // Augmented initial condition.
    let mut u0 = DVector::zeros(2 * nn + 2);
    u0.rows_mut(0, nn).copy_from(&initial.y);
    u0.rows_mut(nn, nn).copy_from(&initial.v);
    u0[2 * nn] = initial.psi;
    u0[2 * nn + 1] = 0.0;

    let rhs = |_t: f64, u: &DVector<f64>| -> Result<DVector<f64>> {
        let y = u.rows(0, nn).clone_owned();
        let v = u.rows(nn, nn).clone_owned();
        let acc = params.accelerations(&y, &v, frozen_mask.as_deref())?;
        let s = params.reduction_scalars(&y)?;
        let mut du = DVector::zeros(2 * nn + 2);
        du.rows_mut(0, nn).copy_from(&v);
        du.rows_mut(nn, nn).copy_from(&acc);
        du[2 * nn] = params.psi_dot_raw(&s, &v);
        du[2 * nn + 1] = params.power_raw(&v);
        Ok(du)
    };

    let guard = |_t: f64, u: &DVector<f64>| -> Option<String> {
        let y = u.rows(0, nn).clone_owned();
        if let Err(e) = params.reduction_scalars(&y) {
            return Some(e.to_string());
        }
        if moments_active {
            let j = [y[IDX_J1], y[IDX_J2], y[IDX_J3]];
            for (i, k) in [(0usize, 1usize), (0, 2), (1, 2)] {
                if (j[i] - j[k]).abs() <= gap_threshold {
                    return Some(format!(
                        "moment gap |J{}−J{}| = {:.3e} at the degeneracy threshold {:.3e}",
                        i + 1,
                        k + 1,
                        (j[i] - j[k]).abs(),
                        gap_threshold
                    ));
                }
            }
        }
        match params.mass_matrix(&y) {
            Ok(mm) => {
                if Cholesky::new(mm).is_none() {
                    return Some("mass matrix lost positive definiteness".into());
                }
            }
            Err(e) => return Some(e.to_string()),
        }
        None
    };

    let mut rec = TrajectoryRecord {
        times: Vec::new(),
        states: Vec::new(),
        velocities: Vec::new(),
        psis: Vec::new(),
        energies: Vec::new(),
        powers: Vec::new(),
        works: Vec::new(),
        gammas: Vec::new(),
        eccentricities: Vec::new(),
        manifold_distances: Vec::new(),
        status: RunStatus::Completed,
        steps_accepted: 0,
        steps_rejected: 0,
    };

    {
        let mut record = |t: f64, u: &DVector<f64>| {
            let y = u.rows(0, nn).clone_owned();
            let v = u.rows(nn, nn).clone_owned();
            let (energy, psidot) = match params.reduction_scalars(&y) {
                Ok(s) => {
                    let e = params.energy_raw(&s, &y, &v).unwrap_or(f64::NAN);
                    (e, params.psi_dot_raw(&s, &v))
                }
                Err(_) => (f64::NAN, f64::NAN),
            };
            let gm_e = opts
                .reference
                .as_ref()
                .map(|rb| rb.gm_ref)
                .unwrap_or(params.gravity.gm);
            rec.times.push(t);
            rec.psis.push(u[2 * nn]);
            rec.works.push(u[2 * nn + 1]);
            rec.energies.push(energy);
            rec.powers.push(params.power_raw(&v));
            rec.gammas.push(wrap_angle(y[IDX_CHI] + y[IDX_BETA]));
            rec.eccentricities
                .push(osculating_eccentricity(y[IDX_R], v[IDX_R], psidot, gm_e));
            rec.manifold_distances.push(
                opts.reference
                    .as_ref()
                    .map(|rb| rb.manifold_distance(&y, &v))
                    .unwrap_or(f64::NAN),
            );
            rec.states.push(y);
            rec.velocities.push(v);
        };

        let run = integrate::integrate(
            &rhs,
            &u0,
            initial.t,
            opts.t_end,
            opts.method,
            Some(&guard),
            opts.record_interval,
            &mut record,
        )?;
        rec.status = run.status;
        rec.steps_accepted = run.steps_accepted;
        rec.steps_rejected = run.steps_rejected;
    }
    Ok(rec)
}

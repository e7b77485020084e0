//! Potential energies of the reduced model: the stiff elastic energy of the
//! shape coordinates, the quadrupole gravitational energy, the Newtonian
//! direct-sum oracle that validates the quadrupole truncation, and the
//! effective potential of the reduced system with its analytic gradient.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kinematics::{principal_axes, inertia_from_body, PointMassBody, DEFAULT_GAP_TOL};

/// Optional correction of third (or higher) order to the elastic energy.
///
/// The correction must vanish to third order at the undeformed shape so the
/// quadratic part keeps its meaning; implementations supply the value and
/// the exact gradient with respect to (J, z).
pub trait CubicShapeTerm {
    fn value(&self, j: &[f64; 3], z: &[f64]) -> f64;
    fn gradient(&self, j: &[f64; 3], z: &[f64]) -> ([f64; 3], Vec<f64>);
}

/// Coefficients of the quadratic elastic energy
/// Q(J, z) = (A/2)|J|² + B(J₁J₂ + J₁J₃ + J₂J₃) + Σⱼ Cⱼ zⱼ (J₁+J₂+J₃)
///          + ½ Σⱼₖ Dⱼₖ zⱼ zₖ,
/// together with the stiffness parameter ε in V_e = (1/ε)(Q + V₃).
///
/// Construction validates that Q is positive definite as a quadratic form in
/// (J₁, J₂, J₃, z₁, …, z_n), which in particular forces A > B.
#[derive(Debug, Clone)]
pub struct ElasticCoeffs {
    a: f64,
    b: f64,
    c: DVector<f64>,
    d: DMatrix<f64>,
    epsilon: f64,
}

impl ElasticCoeffs {
    /// Validate and wrap the coefficient set.
    pub fn new(a: f64, b: f64, c: Vec<f64>, d: DMatrix<f64>, epsilon: f64) -> Result<Self> {
        let n = c.len();
        if d.nrows() != n || d.ncols() != n {
            return Err(Error::Config(format!(
                "coupling matrix is {}x{} but there are {} shape modes",
                d.nrows(),
                d.ncols(),
                n
            )));
        }
        let skew = (&d - d.transpose()).amax();
        if skew > 1e-12 * d.amax().max(1.0) {
            return Err(Error::Config(format!(
                "coupling matrix is not symmetric (defect {skew:.3e})"
            )));
        }
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::Config(format!(
                "stiffness parameter must be positive, got {epsilon}"
            )));
        }
        if a <= b {
            return Err(Error::Config(format!(
                "elastic quadratic form cannot be positive definite with A = {a} <= B = {b}"
            )));
        }
        let co = ElasticCoeffs {
            a,
            b,
            c: DVector::from_vec(c),
            d,
            epsilon,
        };
        if co.quadratic_matrix().cholesky().is_none() {
            return Err(Error::Config(
                "elastic quadratic form is not positive definite".into(),
            ));
        }
        Ok(co)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn c(&self) -> &DVector<f64> {
        &self.c
    }

    pub fn d(&self) -> &DMatrix<f64> {
        &self.d
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Number of auxiliary shape modes.
    pub fn n(&self) -> usize {
        self.c.len()
    }

    /// Copy with a different stiffness parameter.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::Config(format!(
                "stiffness parameter must be positive, got {epsilon}"
            )));
        }
        let mut co = self.clone();
        co.epsilon = epsilon;
        Ok(co)
    }

    /// The symmetric matrix M with Q(x) = ½ xᵀ M x on x = (J₁, J₂, J₃, z).
    pub fn quadratic_matrix(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut m = DMatrix::zeros(3 + n, 3 + n);
        for i in 0..3 {
            for k in 0..3 {
                m[(i, k)] = if i == k { self.a } else { self.b };
            }
            for j in 0..n {
                m[(i, 3 + j)] = self.c[j];
                m[(3 + j, i)] = self.c[j];
            }
        }
        for j in 0..n {
            for k in 0..n {
                m[(3 + j, 3 + k)] = self.d[(j, k)];
            }
        }
        m
    }
}

/// Gravitational parameters of the attracting center and the satellite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GravityParams {
    /// Gravitational parameter GM of the attracting center.
    pub gm: f64,
    /// Total satellite mass.
    pub m: f64,
    /// Moment of inertia of the undeformed (spherical) satellite.
    pub i0: f64,
}

impl GravityParams {
    pub fn new(gm: f64, m: f64, i0: f64) -> Result<Self> {
        let gp = GravityParams { gm, m, i0 };
        gp.validate()?;
        Ok(gp)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("GM", self.gm), ("m", self.m), ("I0", self.i0)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Shape coordinates of the deformable satellite: the three moment
/// increments J and the auxiliary modes z.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeCoords {
    pub j: [f64; 3],
    pub z: Vec<f64>,
}

impl ShapeCoords {
    pub fn zero(n: usize) -> Self {
        ShapeCoords {
            j: [0.0; 3],
            z: vec![0.0; n],
        }
    }

    pub fn sum_j(&self) -> f64 {
        self.j.iter().sum()
    }
}

/// Shape coordinates of a discrete body, plus the isotropic reference moment,
/// in the bookkeeping used by the quadrupole energy.
///
/// In the body's principal axes let K_i = ½ Σ m x_i² be the half second
/// moments; the moment variables are the pair sums I_i = K_j + K_k (half the
/// physical principal moments of inertia) and the returned increments are
/// J_i = I_i − I₀ with I₀ their isotropic mean. This is the normalization
/// under which [`gravitational_potential`] reproduces the Newtonian direct
/// sum of [`quadrature_oracle`] through quadrupole order; extracting J from
/// the physical moments instead would overstate the tidal energy by a factor
/// of two.
pub fn shape_from_body(body: &PointMassBody) -> Result<(ShapeCoords, f64)> {
    let tensor = inertia_from_body(body);
    let (frame, _) = principal_axes(&tensor, DEFAULT_GAP_TOL)?;
    // Half second moments along the principal axes.
    let mut k = [0.0f64; 3];
    for p in body.points() {
        let q = frame.inverse().apply(&p.position);
        for i in 0..3 {
            k[i] += 0.5 * p.mass * q[i] * q[i];
        }
    }
    let moments = [k[1] + k[2], k[0] + k[2], k[0] + k[1]];
    let i0 = (moments[0] + moments[1] + moments[2]) / 3.0;
    Ok((
        ShapeCoords {
            j: [moments[0] - i0, moments[1] - i0, moments[2] - i0],
            z: Vec::new(),
        },
        i0,
    ))
}

/// Stiff elastic energy V_e = (1/ε)[Q(J, z) + V₃(J, z)].
pub fn elastic_potential(
    shape: &ShapeCoords,
    co: &ElasticCoeffs,
    cubic: Option<&dyn CubicShapeTerm>,
) -> Result<f64> {
    if shape.z.len() != co.n() {
        return Err(Error::Config(format!(
            "shape has {} modes but coefficients expect {}",
            shape.z.len(),
            co.n()
        )));
    }
    let [j1, j2, j3] = shape.j;
    let mut q = 0.5 * co.a * (j1 * j1 + j2 * j2 + j3 * j3)
        + co.b * (j1 * j2 + j1 * j3 + j2 * j3);
    let sum_j = shape.sum_j();
    for j in 0..co.n() {
        q += co.c[j] * shape.z[j] * sum_j;
        for k in 0..co.n() {
            q += 0.5 * co.d[(j, k)] * shape.z[j] * shape.z[k];
        }
    }
    let v3 = cubic.map_or(0.0, |t| t.value(&shape.j, &shape.z));
    Ok((q + v3) / co.epsilon)
}

/// Gradient of the elastic energy with respect to (J₁, J₂, J₃, z₁, …, z_n).
pub fn grad_elastic_potential(
    shape: &ShapeCoords,
    co: &ElasticCoeffs,
    cubic: Option<&dyn CubicShapeTerm>,
) -> Result<DVector<f64>> {
    if shape.z.len() != co.n() {
        return Err(Error::Config(format!(
            "shape has {} modes but coefficients expect {}",
            shape.z.len(),
            co.n()
        )));
    }
    let n = co.n();
    let sum_j = shape.sum_j();
    let cz: f64 = (0..n).map(|j| co.c[j] * shape.z[j]).sum();
    let mut g = DVector::zeros(3 + n);
    for i in 0..3 {
        let ji = shape.j[i];
        g[i] = co.a * ji + co.b * (sum_j - ji) + cz;
    }
    for j in 0..n {
        let mut gz = co.c[j] * sum_j;
        for k in 0..n {
            gz += co.d[(j, k)] * shape.z[k];
        }
        g[3 + j] = gz;
    }
    if let Some(t) = cubic {
        let (gj, gz) = t.gradient(&shape.j, &shape.z);
        for i in 0..3 {
            g[i] += gj[i];
        }
        for j in 0..n {
            g[3 + j] += gz[j];
        }
    }
    Ok(g / co.epsilon)
}

/// Quadrupole gravitational energy of the satellite at distance `rdist` from
/// the attracting center, with `gamma` the angle between the first principal
/// axis and the line of centers:
/// −GMm/R + (GM/R³)[−J₁ + 2J₂ − J₃ + 3(J₁−J₂)cos²γ].
pub fn gravitational_potential(
    rdist: f64,
    shape: &ShapeCoords,
    gamma: f64,
    gp: &GravityParams,
) -> Result<f64> {
    if !(rdist > 0.0) {
        return Err(Error::Domain(format!(
            "orbital distance must be positive, got {rdist}"
        )));
    }
    let [j1, j2, j3] = shape.j;
    let c2 = gamma.cos().powi(2);
    let tidal = (gp.gm / rdist.powi(3)) * (-j1 + 2.0 * j2 - j3 + 3.0 * (j1 - j2) * c2);
    Ok(-gp.gm * gp.m / rdist + tidal)
}

/// The tidal part of [`gravitational_potential`] alone (monopole removed).
pub fn tidal_potential(rdist: f64, shape: &ShapeCoords, gamma: f64, gp: &GravityParams) -> f64 {
    let [j1, j2, j3] = shape.j;
    let c2 = gamma.cos().powi(2);
    (gp.gm / rdist.powi(3)) * (-j1 + 2.0 * j2 - j3 + 3.0 * (j1 - j2) * c2)
}

/// Exact Newtonian energy of a point cloud in the field of the attracting
/// center: −GM Σ_p m_p / |R û − x_p|, with the center at distance `rdist`
/// along û = (cos γ, −sin γ, 0).
///
/// This is the integral the quadrupole formula truncates; it serves as the
/// independent oracle for [`gravitational_potential`]. Summation is
/// compensated and strictly sequential, so the result is deterministic.
pub fn quadrature_oracle(
    body: &PointMassBody,
    rdist: f64,
    gamma: f64,
    gp: &GravityParams,
) -> Result<f64> {
    if !(rdist > body.radius()) {
        return Err(Error::Domain(format!(
            "attracting center at distance {rdist} lies inside the body (radius {})",
            body.radius()
        )));
    }
    let u = nalgebra::Vector3::new(gamma.cos(), -gamma.sin(), 0.0);
    let center = rdist * u;
    // Neumaier compensated summation keeps the 1e6-point sums reproducible
    // to the last bit regardless of optimization level.
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for p in body.points() {
        let term = p.mass / (center - p.position).norm();
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
    }
    Ok(-gp.gm * (sum + comp))
}

/// Effective potential of the reduced system at angular momentum `p`:
/// p²/(2(mR²+I₀+J₃)) − GMm/R − (GM/R³)[J₁ − 2J₂ + J₃ + 3(J₂−J₁)cos²γ]
/// + V_e(J, z), with γ = χ + β.
#[allow(clippy::too_many_arguments)]
pub fn effective_potential(
    rdist: f64,
    chi: f64,
    beta: f64,
    shape: &ShapeCoords,
    gp: &GravityParams,
    co: &ElasticCoeffs,
    p: f64,
    cubic: Option<&dyn CubicShapeTerm>,
) -> Result<f64> {
    if !(rdist > 0.0) {
        return Err(Error::Domain(format!(
            "orbital distance must be positive, got {rdist}"
        )));
    }
    let mu = gp.m * rdist * rdist + gp.i0 + shape.j[2];
    if !(mu > 0.0) {
        return Err(Error::KineticDegenerate(format!(
            "effective inertia mR²+I₀+J₃ = {mu} is not positive"
        )));
    }
    let gamma = chi + beta;
    let centrifugal = p * p / (2.0 * mu);
    let vg = gravitational_potential(rdist, shape, gamma, gp)?;
    let ve = elastic_potential(shape, co, cubic)?;
    Ok(centrifugal + vg + ve)
}

/// Analytic gradient of [`effective_potential`] with respect to
/// (R, χ, β, J₁, J₂, J₃, z₁, …, z_n), in that order.
#[allow(clippy::too_many_arguments)]
pub fn grad_effective_potential(
    rdist: f64,
    chi: f64,
    beta: f64,
    shape: &ShapeCoords,
    gp: &GravityParams,
    co: &ElasticCoeffs,
    p: f64,
    cubic: Option<&dyn CubicShapeTerm>,
) -> Result<DVector<f64>> {
    if !(rdist > 0.0) {
        return Err(Error::Domain(format!(
            "orbital distance must be positive, got {rdist}"
        )));
    }
    let mu = gp.m * rdist * rdist + gp.i0 + shape.j[2];
    if !(mu > 0.0) {
        return Err(Error::KineticDegenerate(format!(
            "effective inertia mR²+I₀+J₃ = {mu} is not positive"
        )));
    }
    let n = co.n();
    let gamma = chi + beta;
    let c2 = gamma.cos().powi(2);
    let [j1, j2, j3] = shape.j;
    let tilde = gp.gm / rdist.powi(3);
    let bracket = -j1 + 2.0 * j2 - j3 + 3.0 * (j1 - j2) * c2;
    let ge = grad_elastic_potential(shape, co, cubic)?;

    let mut g = DVector::zeros(6 + n);
    // d/dR of p²/(2μ) − GMm/R + (GM/R³)·bracket.
    g[0] = -p * p * gp.m * rdist / (mu * mu) + gp.gm * gp.m / (rdist * rdist)
        - 3.0 * tilde / rdist * bracket;
    // d/dγ, entering identically through χ and β.
    let dgamma = 3.0 * tilde * (j2 - j1) * (2.0 * gamma).sin();
    g[1] = dgamma;
    g[2] = dgamma;
    // d/dJ: tidal bracket derivative plus the elastic gradient.
    g[3] = tilde * (-1.0 + 3.0 * c2) + ge[0];
    g[4] = tilde * (2.0 - 3.0 * c2) + ge[1];
    g[5] = -p * p / (2.0 * mu * mu) - tilde + ge[2];
    for j in 0..n {
        g[6 + j] = ge[3 + j];
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::body::{ellipsoid_grid_cloud, ellipsoid_rejection_cloud};
    use crate::testutil::seeded_rng;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn default_coeffs(n: usize, epsilon: f64) -> ElasticCoeffs {
        ElasticCoeffs::new(2.0, 0.5, vec![0.1; n], DMatrix::identity(n, n), epsilon).unwrap()
    }

    fn random_shape<R: Rng>(rng: &mut R, n: usize, scale: f64) -> ShapeCoords {
        ShapeCoords {
            j: [
                rng.gen_range(-scale..scale),
                rng.gen_range(-scale..scale),
                rng.gen_range(-scale..scale),
            ],
            z: (0..n).map(|_| rng.gen_range(-scale..scale)).collect(),
        }
    }

    #[test]
    fn elastic_zero_shape_is_zero() {
        let co = default_coeffs(2, 0.37);
        let v = elastic_potential(&ShapeCoords::zero(2), &co, None).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn elastic_direct_evaluation() {
        // A=2, B=1, C=0, D=Id, eps=1, J=(1,1,1), z=0: (2/2)*3 + 1*3 = 6.
        let co = ElasticCoeffs::new(2.0, 1.0, vec![0.0], DMatrix::identity(1, 1), 1.0).unwrap();
        let shape = ShapeCoords {
            j: [1.0, 1.0, 1.0],
            z: vec![0.0],
        };
        let v = elastic_potential(&shape, &co, None).unwrap();
        assert_relative_eq!(v, 6.0, max_relative = 1e-15);
    }

    #[test]
    fn elastic_is_symmetric_under_moment_permutations() {
        let co = default_coeffs(2, 0.1);
        let mut rng = seeded_rng(0xE1A5);
        let perms: [[usize; 3]; 6] = [
            [0, 1, 2],
            [0, 2, 1],
            [1, 0, 2],
            [1, 2, 0],
            [2, 0, 1],
            [2, 1, 0],
        ];
        for _ in 0..100 {
            let shape = random_shape(&mut rng, 2, 1.0);
            let v0 = elastic_potential(&shape, &co, None).unwrap();
            for perm in perms {
                let permuted = ShapeCoords {
                    j: [shape.j[perm[0]], shape.j[perm[1]], shape.j[perm[2]]],
                    z: shape.z.clone(),
                };
                let v = elastic_potential(&permuted, &co, None).unwrap();
                assert!(
                    (v - v0).abs() <= 1e-12 * v0.abs().max(1.0),
                    "permutation symmetry violated: {v0} vs {v}"
                );
            }
        }
    }

    #[test]
    fn elastic_matches_assembled_quadratic_form() {
        // Cross-check the closed-form evaluation against ½ xᵀ M x.
        let mut rng = seeded_rng(0x0F0F);
        let d = {
            let mut d = DMatrix::identity(2, 2) * 2.0;
            d[(0, 1)] = 0.3;
            d[(1, 0)] = 0.3;
            d
        };
        let co = ElasticCoeffs::new(3.0, 0.7, vec![0.2, -0.1], d, 0.5).unwrap();
        let m = co.quadratic_matrix();
        for _ in 0..50 {
            let shape = random_shape(&mut rng, 2, 2.0);
            let x = DVector::from_vec(vec![
                shape.j[0], shape.j[1], shape.j[2], shape.z[0], shape.z[1],
            ]);
            let want = 0.5 * (x.transpose() * &m * &x)[(0, 0)] / co.epsilon();
            let got = elastic_potential(&shape, &co, None).unwrap();
            assert_relative_eq!(got, want, max_relative = 1e-12, epsilon = 1e-14);
        }
    }

    #[test]
    fn coefficient_validation_rejects_bad_inputs() {
        // A <= B can never be positive definite.
        assert!(ElasticCoeffs::new(1.0, 1.0, vec![0.0], DMatrix::identity(1, 1), 1.0).is_err());
        assert!(ElasticCoeffs::new(0.5, 2.0, vec![0.0], DMatrix::identity(1, 1), 1.0).is_err());
        // Oversized coupling makes the full form indefinite even with A > B.
        assert!(ElasticCoeffs::new(
            2.0,
            0.5,
            vec![10.0],
            DMatrix::identity(1, 1),
            1.0
        )
        .is_err());
        // Nonpositive stiffness parameter.
        assert!(ElasticCoeffs::new(2.0, 0.5, vec![0.1], DMatrix::identity(1, 1), 0.0).is_err());
        // Dimension mismatch and asymmetric coupling.
        assert!(ElasticCoeffs::new(2.0, 0.5, vec![0.1], DMatrix::identity(2, 2), 1.0).is_err());
        let mut d = DMatrix::identity(2, 2);
        d[(0, 1)] = 0.5;
        assert!(ElasticCoeffs::new(2.0, 0.5, vec![0.1, 0.1], d, 1.0).is_err());
        // A healthy default passes.
        assert!(ElasticCoeffs::new(2.0, 0.5, vec![0.1], DMatrix::identity(1, 1), 1e-3).is_ok());
    }

    #[test]
    fn grad_elastic_matches_finite_differences() {
        let co = default_coeffs(2, 0.2);
        let mut rng = seeded_rng(0x6E1A);
        for _ in 0..50 {
            let shape = random_shape(&mut rng, 2, 0.5);
            let g = grad_elastic_potential(&shape, &co, None).unwrap();
            for idx in 0..5 {
                let h = 1e-6;
                let mut plus = shape.clone();
                let mut minus = shape.clone();
                if idx < 3 {
                    plus.j[idx] += h;
                    minus.j[idx] -= h;
                } else {
                    plus.z[idx - 3] += h;
                    minus.z[idx - 3] -= h;
                }
                let fd = (elastic_potential(&plus, &co, None).unwrap()
                    - elastic_potential(&minus, &co, None).unwrap())
                    / (2.0 * h);
                assert_relative_eq!(g[idx], fd, max_relative = 1e-6, epsilon = 1e-9);
            }
        }
    }

    struct TestCubic;

    impl CubicShapeTerm for TestCubic {
        fn value(&self, j: &[f64; 3], z: &[f64]) -> f64 {
            j[0].powi(3) + j[1] * j[2] * z[0]
        }
        fn gradient(&self, j: &[f64; 3], z: &[f64]) -> ([f64; 3], Vec<f64>) {
            (
                [3.0 * j[0] * j[0], j[2] * z[0], j[1] * z[0]],
                vec![j[1] * j[2]],
            )
        }
    }

    #[test]
    fn cubic_term_enters_value_and_gradient() {
        let co = default_coeffs(1, 1.0);
        let shape = ShapeCoords {
            j: [0.2, -0.1, 0.3],
            z: vec![0.4],
        };
        let base = elastic_potential(&shape, &co, None).unwrap();
        let with = elastic_potential(&shape, &co, Some(&TestCubic)).unwrap();
        let expected = 0.2f64.powi(3) + (-0.1) * 0.3 * 0.4;
        assert_relative_eq!(with - base, expected, max_relative = 1e-12);
        let g0 = grad_elastic_potential(&shape, &co, None).unwrap();
        let g1 = grad_elastic_potential(&shape, &co, Some(&TestCubic)).unwrap();
        assert_relative_eq!(g1[0] - g0[0], 3.0 * 0.04, max_relative = 1e-12);
        assert_relative_eq!(g1[3] - g0[3], -0.1 * 0.3, max_relative = 1e-12);
    }

    #[test]
    fn spherical_body_sees_only_the_monopole() {
        let gp = GravityParams::new(5.0, 90.0, 4.5).unwrap();
        for gamma in [0.0, 0.4, 1.3, 3.0] {
            let v = gravitational_potential(2.0, &ShapeCoords::zero(0), gamma, &gp);
            let v = v.unwrap();
            assert_relative_eq!(v, -5.0 * 90.0 / 2.0, max_relative = 1e-15);
        }
    }

    #[test]
    fn equal_leading_moments_remove_attitude_dependence() {
        let gp = GravityParams::new(1.0, 1.0, 1.0).unwrap();
        let shape = ShapeCoords {
            j: [0.03, 0.03, -0.01],
            z: vec![],
        };
        let v0 = gravitational_potential(1.7, &shape, 0.0, &gp).unwrap();
        for gamma in [std::f64::consts::FRAC_PI_4, std::f64::consts::FRAC_PI_2] {
            let v = gravitational_potential(1.7, &shape, gamma, &gp).unwrap();
            assert_relative_eq!(v, v0, max_relative = 1e-14);
        }
    }

    #[test]
    fn nonpositive_distance_is_rejected() {
        let gp = GravityParams::new(1.0, 1.0, 1.0).unwrap();
        assert!(gravitational_potential(0.0, &ShapeCoords::zero(0), 0.0, &gp).is_err());
        assert!(gravitational_potential(-1.0, &ShapeCoords::zero(0), 0.0, &gp).is_err());
    }

    #[test]
    fn oracle_single_point_is_exact_monopole() {
        let body = PointMassBody::new(vec![crate::kinematics::PointMass {
            position: nalgebra::Vector3::zeros(),
            mass: 3.0,
        }])
        .unwrap();
        let gp = GravityParams::new(2.0, 3.0, 1.0).unwrap();
        let v = quadrature_oracle(&body, 7.0, 0.3, &gp).unwrap();
        assert_eq!(v, -2.0 * 3.0 / 7.0);
    }

    #[test]
    fn oracle_rejects_center_inside_body() {
        let body = ellipsoid_rejection_cloud(1.0, 1.0, 1.0, 1.0, 100, 3);
        let gp = GravityParams::new(1.0, 1.0, 1.0).unwrap();
        assert!(quadrature_oracle(&body, 0.5, 0.0, &gp).is_err());
    }

    #[test]
    fn oracle_residual_after_monopole_scales_as_tidal_order() {
        // A centered body has no dipole, so the residual beyond the monopole
        // is quadrupolar: relative residual falls by ~4 when R doubles.
        let body = ellipsoid_grid_cloud(1.2, 1.0, 0.9, 2.0, 40);
        let gp = GravityParams::new(1.0, 2.0, 1.0).unwrap();
        let rel_residual = |r: f64| {
            let v = quadrature_oracle(&body, r, 0.7, &gp).unwrap();
            let mono = -gp.gm * gp.m / r;
            ((v - mono) / mono).abs()
        };
        let ratio = rel_residual(30.0) / rel_residual(60.0);
        assert!(
            (3.4..=8.6).contains(&ratio),
            "expected tidal-order falloff, got ratio {ratio:.3}"
        );
    }

    #[test]
    fn quadrupole_matches_oracle_for_ellipsoid_cloud() {
        let body = ellipsoid_grid_cloud(1.2, 1.0, 0.9, 2.0, 64);
        let (shape, i0) = shape_from_body(&body).unwrap();
        let gp = GravityParams::new(1.0, body.total_mass(), i0).unwrap();
        let rdist = 50.0;
        let gamma = 0.3;
        let formula = gravitational_potential(rdist, &shape, gamma, &gp).unwrap();
        let oracle = quadrature_oracle(&body, rdist, gamma, &gp).unwrap();
        // Full-value agreement.
        assert_relative_eq!(formula, oracle, max_relative = 1e-4);
        // The sharp check: tidal parts agree to the next multipole order.
        let tidal_oracle = oracle + gp.gm * gp.m / rdist;
        let tidal_formula = tidal_potential(rdist, &shape, gamma, &gp);
        let rel = ((tidal_formula - tidal_oracle) / tidal_oracle).abs();
        assert!(rel < 1e-3, "tidal mismatch {rel:.3e}");
    }

    #[test]
    fn quadrupole_error_drops_at_next_multipole_rate() {
        let body = ellipsoid_grid_cloud(1.2, 1.0, 0.9, 2.0, 64);
        let (shape, i0) = shape_from_body(&body).unwrap();
        let gp = GravityParams::new(1.0, body.total_mass(), i0).unwrap();
        let err = |r: f64| {
            let formula = gravitational_potential(r, &shape, 0.3, &gp).unwrap();
            let oracle = quadrature_oracle(&body, r, 0.3, &gp).unwrap();
            (formula - oracle).abs()
        };
        let ratio = err(50.0) / err(100.0);
        assert!(ratio >= 12.0, "expected >= 12x drop, got {ratio:.2}");
    }

    #[test]
    fn effective_potential_reduces_to_rigid_radial_form_at_zero_shape() {
        let gp = GravityParams::new(5.0, 90.0, 4.5).unwrap();
        let co = default_coeffs(1, 1e-3);
        let p = 211.0;
        for rdist in [0.5, 1.0, 2.3] {
            let v = effective_potential(rdist, 0.7, -0.2, &ShapeCoords::zero(1), &gp, &co, p, None)
                .unwrap();
            let vg0 = -gp.gm * gp.m / rdist + p * p / (2.0 * (gp.m * rdist * rdist + gp.i0));
            assert_relative_eq!(v, vg0, max_relative = 1e-14);
        }
    }

    #[test]
    fn effective_potential_depends_on_angles_through_their_sum() {
        let gp = GravityParams::new(5.0, 90.0, 4.5).unwrap();
        let co = default_coeffs(1, 1e-2);
        let shape = ShapeCoords {
            j: [0.01, -0.02, 0.015],
            z: vec![0.003],
        };
        let mut rng = seeded_rng(0xAB);
        for _ in 0..20 {
            let (chi, beta, delta) = (
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
            );
            let v0 = effective_potential(1.1, chi, beta, &shape, &gp, &co, 211.0, None).unwrap();
            let v1 = effective_potential(1.1, chi + delta, beta - delta, &shape, &gp, &co, 211.0, None)
                .unwrap();
            assert_relative_eq!(v0, v1, max_relative = 1e-13);
        }
    }

    #[test]
    fn nonpositive_effective_inertia_is_rejected() {
        let gp = GravityParams::new(1.0, 1.0, 0.5).unwrap();
        let co = default_coeffs(0, 1.0);
        let shape = ShapeCoords {
            j: [0.0, 0.0, -2.0],
            z: vec![],
        };
        assert!(matches!(
            effective_potential(1.0, 0.0, 0.0, &shape, &gp, &co, 1.0, None),
            Err(Error::KineticDegenerate(_))
        ));
    }

    /// The finite-difference oracle for the analytic gradient: central
    /// differences with relative step 1e-6 at random chart points.
    #[test]
    fn gradient_matches_central_differences() {
        let gp = GravityParams::new(5.0, 90.0, 4.5).unwrap();
        let co = default_coeffs(2, 1e-2);
        let mut rng = seeded_rng(0x6AAD);
        for _ in 0..100 {
            let rdist = rng.gen_range(0.5..3.0);
            let chi = rng.gen_range(-3.0..3.0);
            let beta = rng.gen_range(-3.0..3.0);
            let shape = random_shape(&mut rng, 2, 0.2);
            let p = rng.gen_range(50.0..300.0);
            let g =
                grad_effective_potential(rdist, chi, beta, &shape, &gp, &co, p, None).unwrap();
            let eval = |r: f64, c: f64, b: f64, s: &ShapeCoords| {
                effective_potential(r, c, b, s, &gp, &co, p, None).unwrap()
            };
            let mut vec_err: f64 = 0.0;
            for idx in 0..(6 + 2) {
                let base = match idx {
                    0 => rdist,
                    1 => chi,
                    2 => beta,
                    3..=5 => shape.j[idx - 3],
                    _ => shape.z[idx - 6],
                };
                let h = 1e-6 * base.abs().max(1.0);
                let perturbed = |delta: f64| -> f64 {
                    let mut r = rdist;
                    let mut c = chi;
                    let mut b = beta;
                    let mut s = shape.clone();
                    match idx {
                        0 => r += delta,
                        1 => c += delta,
                        2 => b += delta,
                        3..=5 => s.j[idx - 3] += delta,
                        _ => s.z[idx - 6] += delta,
                    }
                    eval(r, c, b, &s)
                };
                let (vp, vm) = (perturbed(h), perturbed(-h));
                let fd = (vp - vm) / (2.0 * h);
                let err = (g[idx] - fd).abs();
                // The difference quotient cannot resolve below its own
                // roundoff, about eps*|V|/h; allow a 20x margin there.
                let noise = 20.0 * f64::EPSILON * vp.abs().max(vm.abs()) / h;
                assert!(
                    err <= (1e-6 * g[idx].abs().max(fd.abs())).max(noise),
                    "component {idx}: analytic {:.12e} vs fd {:.12e}",
                    g[idx],
                    fd
                );
                vec_err = vec_err.max(err);
            }
            assert!(
                vec_err <= 1e-6 * g.amax(),
                "gradient-norm relative error {:.3e}",
                vec_err / g.amax()
            );
        }
    }

    #[test]
    fn angle_partials_coincide() {
        let gp = GravityParams::new(5.0, 90.0, 4.5).unwrap();
        let co = default_coeffs(1, 1e-3);
        let mut rng = seeded_rng(0xC01);
        for _ in 0..50 {
            let shape = random_shape(&mut rng, 1, 0.05);
            let g = grad_effective_potential(
                rng.gen_range(0.7..2.0),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
                &shape,
                &gp,
                &co,
                211.0,
                None,
            )
            .unwrap();
            assert_eq!(g[1], g[2]);
        }
    }

    #[test]
    fn moment_partial_at_zero_shape_is_twice_tidal_scale() {
        let gp = GravityParams::new(5.0, 90.0, 4.5).unwrap();
        let co = default_coeffs(1, 1e-3);
        let rdist = 1.3;
        let g = grad_effective_potential(
            rdist,
            0.0,
            0.0,
            &ShapeCoords::zero(1),
            &gp,
            &co,
            211.0,
            None,
        )
        .unwrap();
        assert_relative_eq!(g[3], 2.0 * gp.gm / rdist.powi(3), max_relative = 1e-13);
    }

    #[test]
    fn gamma_partial_vanishes_at_aligned_attitude() {
        let gp = GravityParams::new(5.0, 90.0, 4.5).unwrap();
        let co = default_coeffs(1, 1e-2);
        let mut rng = seeded_rng(0x9A);
        for _ in 0..20 {
            let shape = random_shape(&mut rng, 1, 0.1);
            let chi = rng.gen_range(-2.0..2.0);
            let g = grad_effective_potential(
                rng.gen_range(0.7..2.0),
                chi,
                -chi,
                &shape,
                &gp,
                &co,
                150.0,
                None,
            )
            .unwrap();
            assert!(g[1].abs() < 1e-12, "gamma partial {:.3e} at gamma=0", g[1]);
        }
    }
}

//! Rigid-body kinematics: inertia tensors of point clouds, principal-axis
//! frames, and the chiral octahedral symmetry group under which a principal
//! frame is defined.
//!
//! The frame map (frame, moments) -> frame * diag(moments) * frame^T is a
//! 24-fold covering wherever the moments are pairwise distinct: composing the
//! frame with any rotation that permutes coordinate axes (the chiral
//! octahedral group) and permuting the moments accordingly produces the same
//! tensor. [`principal_axes`] therefore picks one deterministic sheet, and
//! [`covering_fiber`] enumerates all 24.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// Orthonormality tolerance when validating a rotation matrix.
const ROTATION_TOL: f64 = 1e-9;

/// Default relative spectral-gap threshold below which two principal moments
/// are treated as numerically equal (units of the largest eigenvalue
/// magnitude).
pub const DEFAULT_GAP_TOL: f64 = 1e-9;

/// Relative tolerance on the center of mass of a validated body.
const COM_TOL: f64 = 1e-9;

/// A validated member of the rotation group: orthonormal with determinant +1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation3 {
    mat: Matrix3<f64>,
}

impl Rotation3 {
    /// Wrap a matrix after checking orthonormality and orientation.
    pub fn try_new(mat: Matrix3<f64>) -> Result<Self> {
        let gram = mat.transpose() * mat;
        let defect = (gram - Matrix3::identity()).norm();
        if defect > ROTATION_TOL {
            return Err(Error::Domain(format!(
                "matrix is not orthonormal (defect {defect:.3e})"
            )));
        }
        if mat.determinant() < 0.0 {
            return Err(Error::Domain(
                "matrix is orientation-reversing (det < 0)".into(),
            ));
        }
        Ok(Rotation3 { mat })
    }

    pub fn identity() -> Self {
        Rotation3 {
            mat: Matrix3::identity(),
        }
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.mat
    }

    /// Group product `self * other` (apply `other` first).
    pub fn compose(&self, other: &Rotation3) -> Self {
        Rotation3 {
            mat: self.mat * other.mat,
        }
    }

    /// Group inverse; for rotations this is the transpose.
    pub fn inverse(&self) -> Self {
        Rotation3 {
            mat: self.mat.transpose(),
        }
    }

    pub fn apply(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.mat * v
    }

    /// Largest absolute entry difference to another rotation.
    pub fn distance(&self, other: &Rotation3) -> f64 {
        (self.mat - other.mat).amax()
    }
}

/// A symmetric moment-of-inertia tensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InertiaTensor {
    mat: Matrix3<f64>,
}

impl InertiaTensor {
    /// Wrap a matrix after checking symmetry.
    pub fn try_new(mat: Matrix3<f64>) -> Result<Self> {
        let skew = (mat - mat.transpose()).amax();
        let scale = mat.amax().max(1.0);
        if skew > 1e-12 * scale {
            return Err(Error::Domain(format!(
                "inertia tensor is not symmetric (defect {skew:.3e})"
            )));
        }
        // Store the exactly symmetric part so later spectral work is clean.
        let sym = (mat + mat.transpose()) * 0.5;
        Ok(InertiaTensor { mat: sym })
    }

    pub fn from_diagonal(d: &[f64; 3]) -> Self {
        InertiaTensor {
            mat: Matrix3::from_diagonal(&Vector3::new(d[0], d[1], d[2])),
        }
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.mat
    }

    /// Conjugate by a rotation: `R * I * R^T`, the tensor of the rotated body.
    pub fn conjugated(&self, r: &Rotation3) -> Self {
        InertiaTensor {
            mat: r.mat * self.mat * r.mat.transpose(),
        }
    }

    /// Eigenvalues in ascending order.
    pub fn sorted_moments(&self) -> [f64; 3] {
        let mut ev: Vec<f64> = self
            .mat
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(|a, b| a.partial_cmp(b).expect("non-NaN eigenvalues"));
        [ev[0], ev[1], ev[2]]
    }

    /// Whether the moments satisfy the triangle property I_i <= I_j + I_k
    /// shared by every mass distribution (equivalently, the associated
    /// quadrupole coefficients K_i are all nonnegative).
    pub fn satisfies_triangle(&self, tol: f64) -> bool {
        let [a, b, c] = self.sorted_moments();
        c <= a + b + tol * c.abs().max(1.0)
    }
}

/// One mass point of a discrete body.
#[derive(Debug, Clone, Copy)]
pub struct PointMass {
    pub position: Vector3<f64>,
    pub mass: f64,
}

/// A finite cloud of mass points whose center of mass sits at the origin.
///
/// The center-of-mass constraint is what kills the dipole term of the
/// far-field gravitational expansion, so it is enforced at construction.
#[derive(Debug, Clone)]
pub struct PointMassBody {
    points: Vec<PointMass>,
    total_mass: f64,
}

impl PointMassBody {
    /// Validate a cloud: nonempty, positive masses, center of mass at the
    /// origin within a relative tolerance.
    pub fn new(points: Vec<PointMass>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::DegenerateBody("empty point cloud".into()));
        }
        let mut total_mass = 0.0;
        let mut com = Vector3::zeros();
        let mut extent: f64 = 0.0;
        for p in &points {
            if !(p.mass > 0.0) || !p.mass.is_finite() {
                return Err(Error::DegenerateBody(format!(
                    "nonpositive or nonfinite mass {}",
                    p.mass
                )));
            }
            total_mass += p.mass;
            com += p.mass * p.position;
            extent = extent.max(p.position.amax());
        }
        com /= total_mass;
        if com.amax() > COM_TOL * extent.max(1.0) {
            return Err(Error::DegenerateBody(format!(
                "center of mass off origin by {:.3e}",
                com.norm()
            )));
        }
        Ok(PointMassBody { points, total_mass })
    }

    /// Build a body by translating the cloud so its center of mass is
    /// exactly at the origin.
    pub fn recentered(points: Vec<PointMass>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::DegenerateBody("empty point cloud".into()));
        }
        let total: f64 = points.iter().map(|p| p.mass).sum();
        if !(total > 0.0) {
            return Err(Error::DegenerateBody("nonpositive total mass".into()));
        }
        let com: Vector3<f64> =
            points.iter().map(|p| p.mass * p.position).sum::<Vector3<f64>>() / total;
        let shifted = points
            .into_iter()
            .map(|p| PointMass {
                position: p.position - com,
                mass: p.mass,
            })
            .collect();
        Self::new(shifted)
    }

    pub fn points(&self) -> &[PointMass] {
        &self.points
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    /// Radius of the smallest origin-centered ball containing the body.
    pub fn radius(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p.position.norm())
            .fold(0.0, f64::max)
    }

    /// Rotate every point by `r`.
    pub fn rotated(&self, r: &Rotation3) -> Self {
        PointMassBody {
            points: self
                .points
                .iter()
                .map(|p| PointMass {
                    position: r.apply(&p.position),
                    mass: p.mass,
                })
                .collect(),
            total_mass: self.total_mass,
        }
    }
}

/// Moment-of-inertia tensor of a point cloud:
/// sum of m_p (|r_p|^2 Id - r_p r_p^T).
pub fn inertia_from_body(body: &PointMassBody) -> InertiaTensor {
    let mut mat = Matrix3::zeros();
    for p in body.points() {
        let r2 = p.position.norm_squared();
        mat += p.mass * (r2 * Matrix3::identity() - p.position * p.position.transpose());
    }
    InertiaTensor { mat }
}

// Generators of the chiral octahedral group: quarter turns about the three
// coordinate axes. Integer entries keep the generated set exact.
const GEN_X: [[i32; 3]; 3] = [[1, 0, 0], [0, 0, -1], [0, 1, 0]];
const GEN_Y: [[i32; 3]; 3] = [[0, 0, 1], [0, 1, 0], [-1, 0, 0]];
const GEN_Z: [[i32; 3]; 3] = [[0, -1, 0], [1, 0, 0], [0, 0, 1]];

fn imat_mul(a: &[[i32; 3]; 3], b: &[[i32; 3]; 3]) -> [[i32; 3]; 3] {
    let mut c = [[0i32; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

fn imat_to_rotation(m: &[[i32; 3]; 3]) -> Rotation3 {
    Rotation3 {
        mat: Matrix3::new(
            m[0][0] as f64,
            m[0][1] as f64,
            m[0][2] as f64,
            m[1][0] as f64,
            m[1][1] as f64,
            m[1][2] as f64,
            m[2][0] as f64,
            m[2][1] as f64,
            m[2][2] as f64,
        ),
    }
}

/// The chiral octahedral group: the 24 rotations mapping the coordinate-axis
/// octahedron to itself, generated by quarter turns about the axes.
///
/// Deterministic order: breadth-first closure from the identity, multiplying
/// by the generators on the right in a fixed order.
pub fn chiral_octahedral_group() -> Vec<Rotation3> {
    let gens = [GEN_X, GEN_Y, GEN_Z];
    let id = [[1, 0, 0], [0, 1, 0], [0, 0, 1]];
    let mut seen: Vec<[[i32; 3]; 3]> = vec![id];
    let mut frontier: Vec<[[i32; 3]; 3]> = vec![id];
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for g in &frontier {
            for gen in &gens {
                let prod = imat_mul(g, gen);
                if !seen.contains(&prod) {
                    seen.push(prod);
                    next.push(prod);
                }
            }
        }
        frontier = next;
    }
    seen.iter().map(imat_to_rotation).collect()
}

/// All 24 equivalent principal-frame descriptions of the same tensor.
///
/// For each group element S the pair (frame * S, diag(S^T D S)) reconstructs
/// frame * D * frame^T. When the moments are pairwise distinct these pairs
/// are pairwise distinct, so the fiber of the frame map has exactly 24
/// points.
pub fn covering_fiber(frame: &Rotation3, moments: &[f64; 3]) -> Vec<(Rotation3, [f64; 3])> {
    let d = Matrix3::from_diagonal(&Vector3::new(moments[0], moments[1], moments[2]));
    chiral_octahedral_group()
        .iter()
        .map(|s| {
            let new_frame = frame.compose(s);
            let nd = s.mat.transpose() * d * s.mat;
            (new_frame, [nd[(0, 0)], nd[(1, 1)], nd[(2, 2)]])
        })
        .collect()
}

/// Principal-axis decomposition `tensor = frame * diag(moments) * frame^T`
/// with a deterministic choice among the 24 equivalent frames.
///
/// `gap_tol` is the relative spectral-gap threshold (units of the largest
/// eigenvalue magnitude); pass [`DEFAULT_GAP_TOL`] unless the caller needs a
/// looser or tighter notion of degeneracy. Eigenvalue ties are reported as
/// errors rather than resolved arbitrarily, because no continuous frame
/// choice exists across a degeneracy.
///
/// The deterministic representative maximizes the trace of the frame over
/// the fiber, with a lexicographic tie-break on the matrix entries.
pub fn principal_axes(
    tensor: &InertiaTensor,
    gap_tol: f64,
) -> Result<(Rotation3, [f64; 3])> {
    let eig = tensor.mat.symmetric_eigen();
    let ev = &eig.eigenvalues;
    let scale = ev.amax();
    for i in 0..3 {
        for j in (i + 1)..3 {
            if (ev[i] - ev[j]).abs() <= gap_tol * scale {
                return Err(Error::Degenerate(format!(
                    "principal moments {:.6e} and {:.6e} coincide within {:.1e} of the spectral scale",
                    ev[i], ev[j], gap_tol
                )));
            }
        }
    }
    let mut frame = eig.eigenvectors;
    if frame.determinant() < 0.0 {
        frame.column_mut(0).neg_mut();
    }
    let base = Rotation3::try_new(frame)?;
    let candidates = covering_fiber(&base, &[ev[0], ev[1], ev[2]]);
    let mut best: Option<&(Rotation3, [f64; 3])> = None;
    for cand in &candidates {
        let better = match best {
            None => true,
            Some(b) => {
                let (tb, tc) = (b.0.mat.trace(), cand.0.mat.trace());
                tc > tb + 1e-14 || ((tc - tb).abs() <= 1e-14 && lex_less(&cand.0, &b.0))
            }
        };
        if better {
            best = Some(cand);
        }
    }
    let (frame, moments) = best.expect("fiber is nonempty").clone();
    Ok((frame, moments))
}

fn lex_less(a: &Rotation3, b: &Rotation3) -> bool {
    for i in 0..3 {
        for j in 0..3 {
            let (x, y) = (a.mat[(i, j)], b.mat[(i, j)]);
            if x < y - 1e-14 {
                return true;
            }
            if x > y + 1e-14 {
                return false;
            }
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::body::ellipsoid_grid_cloud;
    use crate::testutil::{random_rotation, seeded_rng};
    use approx::assert_relative_eq;
    use rand::Rng;

    fn tensor_distance(a: &InertiaTensor, b: &InertiaTensor) -> f64 {
        (a.matrix() - b.matrix()).amax()
    }

    #[test]
    fn two_unit_masses_on_x_axis() {
        let body = PointMassBody::new(vec![
            PointMass {
                position: Vector3::new(1.0, 0.0, 0.0),
                mass: 1.0,
            },
            PointMass {
                position: Vector3::new(-1.0, 0.0, 0.0),
                mass: 1.0,
            },
        ])
        .unwrap();
        let t = inertia_from_body(&body);
        let expected = InertiaTensor::from_diagonal(&[0.0, 2.0, 2.0]);
        assert!(tensor_distance(&t, &expected) < 1e-15);
    }

    #[test]
    fn empty_body_is_rejected() {
        assert!(matches!(
            PointMassBody::new(vec![]),
            Err(Error::DegenerateBody(_))
        ));
    }

    #[test]
    fn off_center_body_is_rejected_but_recenterable() {
        let points = vec![PointMass {
            position: Vector3::new(1.0, 0.0, 0.0),
            mass: 2.0,
        }];
        assert!(PointMassBody::new(points.clone()).is_err());
        let body = PointMassBody::recentered(points).unwrap();
        assert!(body.points()[0].position.norm() < 1e-15);
    }

    #[test]
    fn inertia_conjugates_with_rotations() {
        let mut rng = seeded_rng(0x11CE);
        for _ in 0..100 {
            let points: Vec<PointMass> = (0..12)
                .map(|_| PointMass {
                    position: Vector3::new(
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                    ),
                    mass: rng.gen_range(0.1..2.0),
                })
                .collect();
            let body = PointMassBody::recentered(points).unwrap();
            let r = random_rotation(&mut rng);
            let direct = inertia_from_body(&body.rotated(&r));
            let conjugated = inertia_from_body(&body).conjugated(&r);
            assert!(
                tensor_distance(&direct, &conjugated) < 1e-10,
                "conjugation covariance violated"
            );
        }
    }

    #[test]
    fn random_bodies_satisfy_triangle_property() {
        let mut rng = seeded_rng(0xA11CE);
        for _ in 0..200 {
            let points: Vec<PointMass> = (0..8)
                .map(|_| PointMass {
                    position: Vector3::new(
                        rng.gen_range(-3.0..3.0),
                        rng.gen_range(-3.0..3.0),
                        rng.gen_range(-3.0..3.0),
                    ),
                    mass: rng.gen_range(0.01..5.0),
                })
                .collect();
            let body = PointMassBody::recentered(points).unwrap();
            assert!(inertia_from_body(&body).satisfies_triangle(1e-12));
        }
    }

    /// Independent oracle: analytic moments of a homogeneous ellipsoid.
    #[test]
    fn ellipsoid_cloud_matches_analytic_moments() {
        let (a, b, c, mass) = (1.2, 1.0, 0.9, 3.0);
        let body = ellipsoid_grid_cloud(a, b, c, mass, 124);
        assert!(body.points().len() > 100_000, "cloud too sparse");
        let t = inertia_from_body(&body);
        let expected = InertiaTensor::from_diagonal(&[
            mass / 5.0 * (b * b + c * c),
            mass / 5.0 * (a * a + c * c),
            mass / 5.0 * (a * a + b * b),
        ]);
        let scale = expected.matrix().amax();
        assert!(
            tensor_distance(&t, &expected) / scale < 1e-3,
            "relative deviation {:.3e}",
            tensor_distance(&t, &expected) / scale
        );
    }

    #[test]
    fn group_has_order_24_and_closes() {
        let group = chiral_octahedral_group();
        assert_eq!(group.len(), 24);
        for g in &group {
            for h in &group {
                let prod = g.compose(h);
                assert!(
                    group.iter().any(|k| k.distance(&prod) < 1e-12),
                    "closure violated"
                );
            }
            let inv = g.inverse();
            assert!(group.iter().any(|k| k.distance(&inv) < 1e-12));
        }
    }

    #[test]
    fn quarter_turn_generator_has_order_four() {
        let r = imat_to_rotation(&GEN_Z);
        let mut acc = Rotation3::identity();
        for _ in 0..4 {
            acc = acc.compose(&r);
        }
        assert!(acc.distance(&Rotation3::identity()) < 1e-15);
        let mut acc2 = Rotation3::identity();
        for _ in 0..2 {
            acc2 = acc2.compose(&r);
        }
        assert!(acc2.distance(&Rotation3::identity()) > 0.5);
    }

    /// Independent oracle: enumerate every signed permutation matrix and keep
    /// the orientation-preserving ones; the generated group must equal that
    /// set exactly.
    #[test]
    fn group_equals_proper_signed_permutations() {
        let mut oracle: Vec<Matrix3<f64>> = Vec::new();
        let perms = [
            [0, 1, 2],
            [0, 2, 1],
            [1, 0, 2],
            [1, 2, 0],
            [2, 0, 1],
            [2, 1, 0],
        ];
        for perm in perms {
            for signs in 0..8u32 {
                let mut m = Matrix3::zeros();
                for (row, &col) in perm.iter().enumerate() {
                    let s = if signs & (1 << row) == 0 { 1.0 } else { -1.0 };
                    m[(row, col)] = s;
                }
                if m.determinant() > 0.0 {
                    oracle.push(m);
                }
            }
        }
        assert_eq!(oracle.len(), 24);
        let group = chiral_octahedral_group();
        for m in &oracle {
            assert!(
                group.iter().any(|g| (g.matrix() - m).amax() < 1e-15),
                "oracle element missing from generated group"
            );
        }
    }

    #[test]
    fn fiber_over_distinct_moments_has_24_sheets() {
        let frame = Rotation3::identity();
        let moments = [1.0, 2.0, 3.0];
        let fiber = covering_fiber(&frame, &moments);
        assert_eq!(fiber.len(), 24);
        let reference = InertiaTensor::from_diagonal(&moments);
        for (f, d) in &fiber {
            let rebuilt = InertiaTensor::from_diagonal(d).conjugated(f);
            assert!(tensor_distance(&rebuilt, &reference) < 1e-10);
        }
        // Pairwise distinct sheets.
        for i in 0..fiber.len() {
            for j in (i + 1)..fiber.len() {
                let same_frame = fiber[i].0.distance(&fiber[j].0) < 1e-12;
                let same_moments = fiber[i]
                    .1
                    .iter()
                    .zip(fiber[j].1.iter())
                    .all(|(a, b)| (a - b).abs() < 1e-12);
                assert!(!(same_frame && same_moments), "fiber sheets collide");
            }
        }
        // The diagonal parts realize each of the 6 permutations of the
        // moments, four times each (one per orientation choice).
        let mut perm_counts = std::collections::HashMap::new();
        for (_, d) in &fiber {
            let key: Vec<i64> = d.iter().map(|x| x.round() as i64).collect();
            *perm_counts.entry(key).or_insert(0) += 1;
        }
        assert_eq!(perm_counts.len(), 6);
        assert!(perm_counts.values().all(|&c| c == 4));
    }

    #[test]
    fn principal_axes_of_sorted_diagonal_is_identity() {
        let t = InertiaTensor::from_diagonal(&[1.0, 2.0, 3.0]);
        let (frame, moments) = principal_axes(&t, DEFAULT_GAP_TOL).unwrap();
        assert!(frame.distance(&Rotation3::identity()) < 1e-12);
        assert_relative_eq!(moments[0], 1.0, max_relative = 1e-12);
        assert_relative_eq!(moments[1], 2.0, max_relative = 1e-12);
        assert_relative_eq!(moments[2], 3.0, max_relative = 1e-12);
    }

    #[test]
    fn principal_axes_reconstructs_and_lands_in_fiber() {
        let mut rng = seeded_rng(0xF1BE5);
        for _ in 0..100 {
            let gamma = random_rotation(&mut rng);
            let d = [1.0, 2.0, 3.0];
            let t = InertiaTensor::from_diagonal(&d).conjugated(&gamma);
            let (frame, moments) = principal_axes(&t, DEFAULT_GAP_TOL).unwrap();
            let rebuilt = InertiaTensor::from_diagonal(&moments).conjugated(&frame);
            assert!(tensor_distance(&rebuilt, &t) < 1e-10);
            // The returned frame differs from gamma by a group element.
            let rel = gamma.inverse().compose(&frame);
            let group = chiral_octahedral_group();
            assert!(
                group.iter().any(|s| s.distance(&rel) < 1e-8),
                "frame not on the covering fiber of the input frame"
            );
        }
    }

    #[test]
    fn principal_axes_is_deterministic_across_fiber_inputs() {
        // Feeding any equivalent (frame, moments) description of the same
        // tensor must return the identical canonical sheet.
        let mut rng = seeded_rng(0xDE7);
        let gamma = random_rotation(&mut rng);
        let t = InertiaTensor::from_diagonal(&[1.0, 2.0, 3.0]).conjugated(&gamma);
        let (frame0, moments0) = principal_axes(&t, DEFAULT_GAP_TOL).unwrap();
        for (f, d) in covering_fiber(&frame0, &moments0) {
            let rebuilt = InertiaTensor::from_diagonal(&d).conjugated(&f);
            let (frame1, moments1) = principal_axes(&rebuilt, DEFAULT_GAP_TOL).unwrap();
            assert!(frame0.distance(&frame1) < 1e-9);
            for k in 0..3 {
                assert_relative_eq!(moments0[k], moments1[k], max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn degenerate_moments_are_rejected() {
        let t = InertiaTensor::from_diagonal(&[1.0, 1.0, 3.0]);
        assert!(matches!(
            principal_axes(&t, DEFAULT_GAP_TOL),
            Err(Error::Degenerate(_))
        ));
        let t2 = InertiaTensor::from_diagonal(&[1.0, 1.0 + 1e-12, 3.0]);
        assert!(principal_axes(&t2, DEFAULT_GAP_TOL).is_err());
        // A looser explicit tolerance accepts a clear gap.
        let t3 = InertiaTensor::from_diagonal(&[1.0, 1.1, 3.0]);
        assert!(principal_axes(&t3, 1e-3).is_ok());
    }

    #[test]
    fn permuting_identical_masses_leaves_inertia_unchanged() {
        // Relabeling invariance: the tensor depends on the cloud as a set.
        let mut rng = seeded_rng(0x5E7);
        let mut points: Vec<PointMass> = (0..10)
            .map(|_| PointMass {
                position: Vector3::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                ),
                mass: 0.7,
            })
            .collect();
        let body = PointMassBody::recentered(points.clone()).unwrap();
        let t0 = inertia_from_body(&body);
        points.reverse();
        points.swap(2, 6);
        let body2 = PointMassBody::recentered(points).unwrap();
        let t1 = inertia_from_body(&body2);
        assert!(tensor_distance(&t0, &t1) < 1e-12);
    }
}

//! Builders for discrete satellite bodies: homogeneous ellipsoid clouds on a
//! grid, randomized rejection-sampled clouds, and a plain-text loader.

use std::path::Path;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::kinematics::{PointMass, PointMassBody};

/// Homogeneous ellipsoid with semi-axes (a, b, c) sampled on a regular grid.
///
/// `cells_per_axis` grid cells span each full axis; every cell center inside
/// the ellipsoid becomes one point carrying an equal share of `total_mass`.
/// The cloud is recentered so parity asymmetries of the grid cannot leave a
/// residual dipole.
pub fn ellipsoid_grid_cloud(
    a: f64,
    b: f64,
    c: f64,
    total_mass: f64,
    cells_per_axis: usize,
) -> PointMassBody {
    assert!(a > 0.0 && b > 0.0 && c > 0.0 && total_mass > 0.0);
    assert!(cells_per_axis >= 2);
    let n = cells_per_axis;
    let (hx, hy, hz) = (2.0 * a / n as f64, 2.0 * b / n as f64, 2.0 * c / n as f64);
    let mut points = Vec::new();
    for i in 0..n {
        let x = -a + (i as f64 + 0.5) * hx;
        for j in 0..n {
            let y = -b + (j as f64 + 0.5) * hy;
            for k in 0..n {
                let z = -c + (k as f64 + 0.5) * hz;
                let q = (x / a).powi(2) + (y / b).powi(2) + (z / c).powi(2);
                if q <= 1.0 {
                    points.push(PointMass {
                        position: Vector3::new(x, y, z),
                        mass: 1.0,
                    });
                }
            }
        }
    }
    let share = total_mass / points.len() as f64;
    for p in &mut points {
        p.mass = share;
    }
    PointMassBody::recentered(points).expect("grid cloud is nonempty with positive masses")
}

/// Homogeneous ellipsoid sampled by seeded rejection from the bounding box.
///
/// Deterministic for a fixed `(count, seed)` pair.
pub fn ellipsoid_rejection_cloud(
    a: f64,
    b: f64,
    c: f64,
    total_mass: f64,
    count: usize,
    seed: u64,
) -> PointMassBody {
    assert!(a > 0.0 && b > 0.0 && c > 0.0 && total_mass > 0.0 && count > 0);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let share = total_mass / count as f64;
    let mut points = Vec::with_capacity(count);
    while points.len() < count {
        let x = rng.gen_range(-a..a);
        let y = rng.gen_range(-b..b);
        let z = rng.gen_range(-c..c);
        if (x / a).powi(2) + (y / b).powi(2) + (z / c).powi(2) <= 1.0 {
            points.push(PointMass {
                position: Vector3::new(x, y, z),
                mass: share,
            });
        }
    }
    PointMassBody::recentered(points).expect("rejection cloud is nonempty with positive masses")
}

/// Load a point cloud from a plain-text file: one `x y z m` row per point,
/// whitespace-separated, `#` comment lines and blank lines skipped. The cloud
/// is recentered onto its center of mass.
pub fn load_point_cloud(path: &Path) -> Result<PointMassBody> {
    let text = std::fs::read_to_string(path)?;
    let mut points = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::Config(format!(
                "{}:{}: expected 4 fields `x y z m`, found {}",
                path.display(),
                lineno + 1,
                fields.len()
            )));
        }
        let mut vals = [0.0f64; 4];
        for (slot, field) in vals.iter_mut().zip(&fields) {
            *slot = field.parse().map_err(|_| {
                Error::Config(format!(
                    "{}:{}: cannot parse `{}` as a number",
                    path.display(),
                    lineno + 1,
                    field
                ))
            })?;
        }
        points.push(PointMass {
            position: Vector3::new(vals[0], vals[1], vals[2]),
            mass: vals[3],
        });
    }
    PointMassBody::recentered(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::inertia_from_body;
    use approx::assert_relative_eq;
    use std::io::Write;

    #[test]
    fn grid_cloud_mass_and_center() {
        let body = ellipsoid_grid_cloud(1.0, 1.0, 1.0, 2.5, 20);
        assert_relative_eq!(body.total_mass(), 2.5, max_relative = 1e-12);
        let com: Vector3<f64> = body
            .points()
            .iter()
            .map(|p| p.mass * p.position)
            .sum::<Vector3<f64>>()
            / body.total_mass();
        assert!(com.norm() < 1e-12);
    }

    #[test]
    fn rejection_cloud_is_deterministic_per_seed() {
        let b1 = ellipsoid_rejection_cloud(1.2, 1.0, 0.9, 1.0, 500, 7);
        let b2 = ellipsoid_rejection_cloud(1.2, 1.0, 0.9, 1.0, 500, 7);
        let b3 = ellipsoid_rejection_cloud(1.2, 1.0, 0.9, 1.0, 500, 8);
        for (p, q) in b1.points().iter().zip(b2.points()) {
            assert_eq!(p.position, q.position);
        }
        let differs = b1
            .points()
            .iter()
            .zip(b3.points())
            .any(|(p, q)| p.position != q.position);
        assert!(differs, "different seeds should give different clouds");
    }

    #[test]
    fn rejection_cloud_moments_approach_analytic_values() {
        let (a, b, c, m) = (1.3, 1.0, 0.8, 2.0);
        let body = ellipsoid_rejection_cloud(a, b, c, m, 200_000, 42);
        let moments = inertia_from_body(&body).sorted_moments();
        let mut expected = [
            m / 5.0 * (b * b + c * c),
            m / 5.0 * (a * a + c * c),
            m / 5.0 * (a * a + b * b),
        ];
        expected.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for (got, want) in moments.iter().zip(&expected) {
            assert_relative_eq!(got, want, max_relative = 2e-2);
        }
    }

    #[test]
    fn loads_and_recenters_text_cloud() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cloud.txt");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "# a two-point body, deliberately off-center").unwrap();
        writeln!(f, "2.0 0.0 0.0 1.0").unwrap();
        writeln!(f).unwrap();
        writeln!(f, "0.0 0.0 0.0 1.0").unwrap();
        drop(f);
        let body = load_point_cloud(&path).unwrap();
        assert_eq!(body.points().len(), 2);
        assert_relative_eq!(body.points()[0].position.x, 1.0, max_relative = 1e-14);
        assert_relative_eq!(body.points()[1].position.x, -1.0, max_relative = 1e-14);
    }

    #[test]
    fn rejects_malformed_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.txt");
        std::fs::write(&path, "1.0 2.0 3.0\n").unwrap();
        assert!(matches!(load_point_cloud(&path), Err(Error::Config(_))));
        std::fs::write(&path, "1.0 2.0 3.0 oops\n").unwrap();
        assert!(matches!(load_point_cloud(&path), Err(Error::Config(_))));
    }
}

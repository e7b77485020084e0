//! JSON model configuration.
//!
//! A configuration file is a JSON object with the sections `gravity`,
//! `elastic`, `kinetic`, `friction`, and the scalar `p`. Every section is
//! optional and falls back to the built-in reference model, but a section
//! that is present must be complete; unknown keys are rejected so typos
//! cannot silently fall back to defaults. `friction` is either a single
//! positive number (isotropic strength on the internal velocity block) or a
//! full symmetric positive definite matrix of size 4+n; `null` or omission
//! yields the conservative model.
//!
//! ```json
//! {
//!   "gravity": { "gm": 10.0, "m": 20.0, "i0": 2.0 },
//!   "elastic": { "a": 0.4, "b": 0.2, "c": [0.1], "d": [[1.0]], "epsilon": 1e-3 },
//!   "kinetic": { "mass_beta": 0.2, "mass_j": [2.0, 2.0, 2.0], "mass_z": [2.0], "kappa": 0.05 },
//!   "friction": 0.1,
//!   "p": 92.0
//! }
//! ```

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dynamics::{DissipationSpec, KineticSpec, ModelParams};
use crate::error::{Error, Result};
use crate::potentials::{ElasticCoeffs, GravityParams};

/// Gravity section: attracting-center parameter, satellite mass, spherical
/// moment of inertia.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GravitySection {
    pub gm: f64,
    pub m: f64,
    pub i0: f64,
}

impl Default for GravitySection {
    fn default() -> Self {
        GravitySection {
            gm: 10.0,
            m: 20.0,
            i0: 2.0,
        }
    }
}

/// Elastic section: quadratic form coefficients and the stiffness scale.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElasticSection {
    pub a: f64,
    pub b: f64,
    /// Coupling of the moment sum to each auxiliary mode (length n).
    pub c: Vec<f64>,
    /// Quadratic form on the auxiliary modes (n x n, symmetric).
    pub d: Vec<Vec<f64>>,
    /// Stiffness parameter: elastic energy is the quadratic form divided
    /// by this value, so smaller means stiffer.
    pub epsilon: f64,
}

impl Default for ElasticSection {
    fn default() -> Self {
        ElasticSection {
            a: 0.4,
            b: 0.2,
            c: vec![0.1],
            d: vec![vec![1.0]],
            epsilon: 1e-3,
        }
    }
}

/// Kinetic section: inertias of the internal coordinates.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KineticSection {
    pub mass_beta: f64,
    pub mass_j: [f64; 3],
    pub mass_z: Vec<f64>,
    /// Coefficient of the twist-rotation cross inertia kappa (J1 - J2).
    pub kappa: f64,
}

impl Default for KineticSection {
    fn default() -> Self {
        KineticSection {
            mass_beta: 0.2,
            mass_j: [2.0, 2.0, 2.0],
            mass_z: vec![2.0],
            kappa: 0.05,
        }
    }
}

/// Friction: isotropic strength or a full matrix on (beta', J', z').
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FrictionSection {
    Isotropic(f64),
    Matrix(Vec<Vec<f64>>),
}

/// Complete raw configuration as read from JSON, before validation.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RawConfig {
    pub gravity: GravitySection,
    pub elastic: ElasticSection,
    pub kinetic: KineticSection,
    /// Omit (or `null`) for the conservative model.
    pub friction: Option<FrictionSection>,
    /// Total angular momentum of the reduced system.
    pub p: Option<f64>,
}

/// Default angular momentum, chosen so the synchronous orbit of the default
/// model sits near R = 2.
const DEFAULT_P: f64 = 92.0;

fn dense_from_rows(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Config(format!("{what} rows have unequal lengths")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

impl RawConfig {
    /// Validate the raw sections and assemble the model.
    pub fn into_params(self) -> Result<ModelParams> {
        let gravity = GravityParams::new(self.gravity.gm, self.gravity.m, self.gravity.i0)?;
        let d = dense_from_rows(&self.elastic.d, "elastic coupling matrix")?;
        let elastic = ElasticCoeffs::new(
            self.elastic.a,
            self.elastic.b,
            self.elastic.c,
            d,
            self.elastic.epsilon,
        )?;
        let n = elastic.n();
        let kinetic = KineticSpec {
            mass_beta: self.kinetic.mass_beta,
            mass_j: self.kinetic.mass_j,
            mass_z: self.kinetic.mass_z,
            kappa: self.kinetic.kappa,
        };
        let dissipation = match self.friction {
            None => None,
            Some(FrictionSection::Isotropic(strength)) => {
                Some(DissipationSpec::isotropic(strength, n)?)
            }
            Some(FrictionSection::Matrix(rows)) => {
                let eta = dense_from_rows(&rows, "friction matrix")?;
                if eta.nrows() != 4 + n {
                    return Err(Error::Config(format!(
                        "friction matrix must be {}x{} for {n} shape modes, got {}x{}",
                        4 + n,
                        4 + n,
                        eta.nrows(),
                        eta.ncols()
                    )));
                }
                Some(DissipationSpec::new(eta)?)
            }
        };
        let p = self.p.unwrap_or(DEFAULT_P);
        if !p.is_finite() || p == 0.0 {
            return Err(Error::Config(format!(
                "angular momentum must be finite and nonzero, got {p}"
            )));
        }
        let params = ModelParams {
            gravity,
            elastic,
            kinetic,
            dissipation,
            p,
            cubic: None,
        };
        params.validate()?;
        Ok(params)
    }

    /// Parse a JSON string.
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("bad configuration: {e}")))
    }

    /// Read a JSON file.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Pretty-printed JSON of this configuration (the default one serves as
    /// a template for new files).
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }
}

/// Load a model: from the JSON file when a path is given, otherwise the
/// built-in reference model. `epsilon` and `eta` override the corresponding
/// file entries when present; `eta = Some(0.0)` removes friction.
pub fn load_model(path: Option<&Path>, epsilon: Option<f64>, eta: Option<f64>) -> Result<ModelParams> {
    let mut raw = match path {
        Some(p) => RawConfig::from_file(p)?,
        None => RawConfig::default(),
    };
    if let Some(eps) = epsilon {
        raw.elastic.epsilon = eps;
    }
    match eta {
        Some(strength) if strength == 0.0 => raw.friction = None,
        Some(strength) => raw.friction = Some(FrictionSection::Isotropic(strength)),
        None => {}
    }
    raw.into_params()
}

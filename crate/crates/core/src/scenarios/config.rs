//! JSON scenario configuration: schema, validation, and emission.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::ScenarioError;
use crate::hilbert::{Operator, StateVector, HERMITIAN_TOL, UNITARY_TOL};
use crate::pointer::{GridSpec, PointerState};
use crate::projective::validate_projector_set;
use crate::weak::PointerSpec;

/// Input norm deviations above this are reported as warnings.
const RESCALE_WARNING: f64 = 1e-6;
/// States closer than this to unit norm are stored as given.
const RESCALE_THRESHOLD: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Abl,
    Weak,
    Projective,
    Classical,
    Current,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointerConfig {
    #[serde(default = "default_n_points")]
    pub n_points: usize,
    #[serde(default = "default_extent")]
    pub extent: f64,
    #[serde(default)]
    pub x0: f64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
}

fn default_n_points() -> usize {
    1024
}
fn default_extent() -> f64 {
    40.0
}
fn default_sigma() -> f64 {
    1.0
}

impl Default for PointerConfig {
    fn default() -> Self {
        Self {
            n_points: default_n_points(),
            extent: default_extent(),
            x0: 0.0,
            sigma: default_sigma(),
        }
    }
}

impl PointerConfig {
    pub fn spec(&self) -> crate::Result<PointerSpec> {
        Ok(PointerSpec {
            grid: GridSpec::new(self.n_points, self.extent)?,
            x0: self.x0,
            sigma: self.sigma,
        })
    }
}

/// How the final measurement is given.
#[derive(Debug, Clone, PartialEq)]
pub enum PostSpec {
    /// Outcome `outcome` (ascending eigenvalue order) of the Hermitian `B`.
    Basis { observable: Operator, outcome: usize },
    State(StateVector),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectorSet {
    pub label: String,
    pub projectors: Vec<(String, Operator)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassicalObservable {
    /// `A(q) = q`.
    Position,
    /// `A(q) = c`.
    Constant(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassicalFilter {
    All,
    Above(f64),
    Below(f64),
}

impl ClassicalFilter {
    pub fn accepts(&self, q: f64) -> bool {
        match *self {
            ClassicalFilter::All => true,
            ClassicalFilter::Above(t) => q > t,
            ClassicalFilter::Below(t) => q < t,
        }
    }
}

/// Gaussian configuration-space ensemble with a filter on `q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassicalConfig {
    #[serde(default)]
    pub mean: f64,
    #[serde(default = "default_sigma")]
    pub std_dev: f64,
    pub observable: ClassicalObservable,
    pub filter: ClassicalFilter,
    pub n_samples: usize,
}

/// Boosted Gaussian pointer probed for the local momentum weak value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurrentConfig {
    pub k0: f64,
    #[serde(default = "default_mass")]
    pub mass: f64,
    /// Evaluation point; defaults to the pointer centre.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
}

fn default_mass() -> f64 {
    1.0
}

/// Validated scenario description.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub mode: Mode,
    /// System dimension; zero for modes without a finite-dimensional system.
    pub dimension: usize,
    pub pre: Option<StateVector>,
    pub observable: Option<Operator>,
    pub post: Option<PostSpec>,
    pub u_wi: Option<Operator>,
    pub u_fw: Option<Operator>,
    pub g: Vec<f64>,
    pub pointer: PointerConfig,
    pub projector_sets: Vec<ProjectorSet>,
    pub classical: Option<ClassicalConfig>,
    pub current: Option<CurrentConfig>,
    pub seed: u64,
    pub format: OutputFormat,
    /// Duration of the coupling. Metadata only: the interaction is impulsive.
    pub tau: Option<f64>,
}

/// A problem found while validating a config, located by field path.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

/// Result of a successful load: the config plus non-fatal notices.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedConfig {
    pub config: ScenarioConfig,
    pub warnings: Vec<String>,
}

type Pair = [f64; 2];
type Matrix = Vec<Vec<Pair>>;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigDocument {
    name: String,
    mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dimension: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pre: Option<Vec<Pair>>,
    #[serde(default, rename = "A", alias = "a", skip_serializing_if = "Option::is_none")]
    observable: Option<Matrix>,
    #[serde(default, rename = "B", alias = "b", skip_serializing_if = "Option::is_none")]
    b: Option<Matrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    outcome: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    post: Option<Vec<Pair>>,
    #[serde(default, rename = "U_wi", alias = "u_wi", skip_serializing_if = "Option::is_none")]
    u_wi: Option<Matrix>,
    #[serde(default, rename = "U_fw", alias = "u_fw", skip_serializing_if = "Option::is_none")]
    u_fw: Option<Matrix>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    g: Vec<f64>,
    #[serde(default)]
    pointer: PointerConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    projector_sets: Vec<ProjectorSetDocument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    classical: Option<ClassicalConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    current: Option<CurrentConfig>,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    format: OutputFormat,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tau: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProjectorSetDocument {
    label: String,
    projectors: Vec<NamedProjectorDocument>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NamedProjectorDocument {
    name: String,
    matrix: Matrix,
}

fn state_to_doc(s: &StateVector) -> Vec<Pair> {
    s.amplitudes().iter().map(|z| [z.re, z.im]).collect()
}

fn matrix_to_doc(m: &Operator) -> Matrix {
    m.rows()
        .map(|row| row.iter().map(|z| [z.re, z.im]).collect())
        .collect()
}

/// Serializes a config to the JSON schema accepted by [`load_config`].
pub fn emit_config(config: &ScenarioConfig) -> String {
    let (b, outcome, post) = match &config.post {
        Some(PostSpec::Basis { observable, outcome }) => {
            (Some(matrix_to_doc(observable)), Some(*outcome), None)
        }
        Some(PostSpec::State(s)) => (None, None, Some(state_to_doc(s))),
        None => (None, None, None),
    };
    let doc = ConfigDocument {
        name: config.name.clone(),
        mode: config.mode,
        dimension: (config.dimension > 0).then_some(config.dimension),
        pre: config.pre.as_ref().map(state_to_doc),
        observable: config.observable.as_ref().map(matrix_to_doc),
        b,
        outcome,
        post,
        u_wi: config.u_wi.as_ref().map(matrix_to_doc),
        u_fw: config.u_fw.as_ref().map(matrix_to_doc),
        g: config.g.clone(),
        pointer: config.pointer,
        projector_sets: config
            .projector_sets
            .iter()
            .map(|set| ProjectorSetDocument {
                label: set.label.clone(),
                projectors: set
                    .projectors
                    .iter()
                    .map(|(name, m)| NamedProjectorDocument {
                        name: name.clone(),
                        matrix: matrix_to_doc(m),
                    })
                    .collect(),
            })
            .collect(),
        classical: config.classical,
        current: config.current,
        seed: config.seed,
        format: config.format,
        tau: config.tau,
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("config documents always serialize");
    text.push('\n');
    text
}

/// Parses and validates a JSON config document.
pub fn load_config(text: &str) -> Result<LoadedConfig, ScenarioError> {
    let doc: ConfigDocument = serde_json::from_str(text).map_err(|e| ScenarioError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    Validator::default().validate(doc)
}

#[derive(Default)]
struct Validator {
    violations: Vec<Violation>,
    warnings: Vec<String>,
}

impl Validator {
    fn fail(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            path: path.into(),
            message: message.into(),
        });
    }

    fn state(&mut self, path: &str, amps: &[Pair], dim: usize) -> Option<StateVector> {
        if amps.len() != dim {
            self.fail(path, format!("expected {dim} amplitudes, found {}", amps.len()));
            return None;
        }
        let v = match StateVector::new(amps.iter().map(|p| Complex64::new(p[0], p[1])).collect()) {
            Ok(v) => v,
            Err(e) => {
                self.fail(path, e.to_string());
                return None;
            }
        };
        let norm = v.norm();
        if norm == 0.0 {
            self.fail(path, "state has zero norm");
            return None;
        }
        if (norm - 1.0).abs() <= RESCALE_THRESHOLD {
            return Some(v);
        }
        let factor = 1.0 / norm;
        if (norm - 1.0).abs() > RESCALE_WARNING {
            self.warnings.push(format!(
                "{path}: input norm {norm} rescaled by factor {factor}"
            ));
        }
        Some(v.scale(Complex64::new(factor, 0.0)))
    }

    fn matrix(&mut self, path: &str, rows: &Matrix, dim: usize) -> Option<Operator> {
        if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
            self.fail(path, format!("expected a {dim}x{dim} matrix"));
            return None;
        }
        let data = rows
            .iter()
            .flatten()
            .map(|p| Complex64::new(p[0], p[1]))
            .collect();
        match Operator::new(dim, data) {
            Ok(m) => Some(m),
            Err(e) => {
                self.fail(path, e.to_string());
                None
            }
        }
    }

    fn hermitian(&mut self, path: &str, rows: &Matrix, dim: usize) -> Option<Operator> {
        let m = self.matrix(path, rows, dim)?;
        let r = m.hermiticity_residual();
        if r > HERMITIAN_TOL {
            self.fail(
                path,
                format!("not Hermitian: max |M - M^dagger| = {r:e} exceeds {HERMITIAN_TOL:e}"),
            );
            return None;
        }
        Some(m)
    }

    fn unitary(&mut self, path: &str, rows: &Matrix, dim: usize) -> Option<Operator> {
        let m = self.matrix(path, rows, dim)?;
        let r = m.unitarity_residual();
        if r > UNITARY_TOL {
            self.fail(
                path,
                format!("not unitary: max |U^dagger U - I| = {r:e} exceeds {UNITARY_TOL:e}"),
            );
            return None;
        }
        Some(m)
    }

    fn validate(mut self, doc: ConfigDocument) -> Result<LoadedConfig, ScenarioError> {
        if doc.name.trim().is_empty() {
            self.fail("name", "must not be empty");
        }
        let needs_system = matches!(doc.mode, Mode::Abl | Mode::Weak | Mode::Projective);
        let dim = doc
            .dimension
            .or_else(|| doc.pre.as_ref().map(|p| p.len()))
            .unwrap_or(0);
        if needs_system && dim == 0 {
            self.fail("dimension", "a positive system dimension is required for this mode");
        }

        let pre = match (&doc.pre, needs_system) {
            (Some(p), _) if dim > 0 => self.state("pre", p, dim),
            (None, true) => {
                self.fail("pre", "required for this mode");
                None
            }
            _ => None,
        };
        let observable = match &doc.observable {
            Some(m) if dim > 0 => self.hermitian("A", m, dim),
            _ => None,
        };
        if doc.observable.is_none()
            && (matches!(doc.mode, Mode::Weak | Mode::Projective)
                || (doc.mode == Mode::Abl && doc.projector_sets.is_empty()))
        {
            self.fail("A", "required for this mode");
        }

        let post = match (&doc.b, &doc.post) {
            (Some(_), Some(_)) => {
                self.fail("post", "give either B with an outcome or an explicit post state, not both");
                None
            }
            (Some(b), None) if dim > 0 => {
                let outcome = doc.outcome.unwrap_or_else(|| {
                    self.fail("outcome", "required when B is given");
                    0
                });
                if outcome >= dim {
                    self.fail("outcome", format!("index {outcome} out of range for dimension {dim}"));
                }
                self.hermitian("B", b, dim)
                    .map(|observable| PostSpec::Basis { observable, outcome })
            }
            (None, Some(p)) if dim > 0 => self.state("post", p, dim).map(PostSpec::State),
            _ => None,
        };
        if post.is_none() && doc.b.is_none() && doc.post.is_none() && matches!(doc.mode, Mode::Abl | Mode::Weak) {
            self.fail("post", "a post-selection (B and outcome, or post) is required for this mode");
        }

        let u_wi = match &doc.u_wi {
            Some(m) if dim > 0 => self.unitary("U_wi", m, dim),
            _ => None,
        };
        let u_fw = match &doc.u_fw {
            Some(m) if dim > 0 => self.unitary("U_fw", m, dim),
            _ => None,
        };

        for (i, g) in doc.g.iter().enumerate() {
            if !g.is_finite() {
                self.fail(format!("g[{i}]"), "coupling must be finite");
            } else if *g == 0.0 && doc.mode == Mode::Weak {
                self.fail(format!("g[{i}]"), "weak sweeps need nonzero couplings");
            }
        }
        if doc.g.is_empty() && matches!(doc.mode, Mode::Weak | Mode::Projective) {
            self.fail("g", "at least one coupling is required for this mode");
        }

        match GridSpec::new(doc.pointer.n_points, doc.pointer.extent) {
            Ok(grid) => {
                if let Err(e) = PointerState::gaussian(grid, doc.pointer.x0, doc.pointer.sigma) {
                    self.fail("pointer", e.to_string());
                }
            }
            Err(e) => self.fail("pointer", e.to_string()),
        }

        let mut projector_sets = Vec::new();
        for (i, set) in doc.projector_sets.iter().enumerate() {
            if dim == 0 {
                break;
            }
            let mut projectors = Vec::new();
            for (j, p) in set.projectors.iter().enumerate() {
                let path = format!("projector_sets[{i}].projectors[{j}]");
                if let Some(m) = self.hermitian(&path, &p.matrix, dim) {
                    projectors.push((p.name.clone(), m));
                }
            }
            if projectors.len() == set.projectors.len() {
                let ops: Vec<Operator> = projectors.iter().map(|(_, m)| m.clone()).collect();
                if let Err(e) = validate_projector_set(&ops, dim) {
                    self.fail(format!("projector_sets[{i}]"), e.to_string());
                }
            }
            projector_sets.push(ProjectorSet {
                label: set.label.clone(),
                projectors,
            });
        }

        if doc.mode == Mode::Classical {
            match &doc.classical {
                None => self.fail("classical", "required for classical mode"),
                Some(c) => {
                    if !(c.std_dev.is_finite() && c.std_dev > 0.0) {
                        self.fail("classical.std_dev", "must be positive");
                    }
                    if c.n_samples < 10 {
                        self.fail("classical.n_samples", "need at least 10 samples");
                    }
                }
            }
        }
        if doc.mode == Mode::Current {
            match &doc.current {
                None => self.fail("current", "required for current mode"),
                Some(c) => {
                    if !(c.mass.is_finite() && c.mass > 0.0) {
                        self.fail("current.mass", "must be positive");
                    }
                    if !c.k0.is_finite() {
                        self.fail("current.k0", "must be finite");
                    }
                }
            }
        }
        if let Some(tau) = doc.tau {
            if !(tau.is_finite() && tau >= 0.0) {
                self.fail("tau", "must be a non-negative duration");
            }
        }

        if !self.violations.is_empty() {
            return Err(ScenarioError::Invalid(self.violations));
        }
        Ok(LoadedConfig {
            config: ScenarioConfig {
                name: doc.name,
                mode: doc.mode,
                dimension: dim,
                pre,
                observable,
                post,
                u_wi,
                u_fw,
                g: doc.g,
                pointer: doc.pointer,
                projector_sets,
                classical: doc.classical,
                current: doc.current,
                seed: doc.seed,
                format: doc.format,
                tau: doc.tau,
            },
            warnings: self.warnings,
        })
    }
}

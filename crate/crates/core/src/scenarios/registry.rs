//! Built-in scenarios. The JSON files under `presets/` are generated from
//! these definitions.

use std::f64::consts::FRAC_1_SQRT_2;
use std::str::FromStr;

use num_complex::Complex64;

use super::config::{
    ClassicalConfig, ClassicalFilter, ClassicalObservable, CurrentConfig, Mode, OutputFormat,
    PointerConfig, PostSpec, ProjectorSet, ScenarioConfig,
};
use super::ScenarioError;
use crate::hilbert::{Operator, StateVector};

/// Three-box coupling sweep, `g` in units of the pointer width.
pub const THREE_BOX_SWEEP: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];

/// `(psi_1 + psi_2 + psi_3) / sqrt 3`.
pub fn three_box_pre() -> StateVector {
    let s = 1.0 / 3f64.sqrt();
    StateVector::from_real(&[s, s, s]).expect("nonempty")
}

/// `(psi_1 - psi_2 + psi_3) / sqrt 3`.
pub fn three_box_post() -> StateVector {
    let s = 1.0 / 3f64.sqrt();
    StateVector::from_real(&[s, -s, s]).expect("nonempty")
}

/// Projector onto the span of the given paths (0-based).
fn paths(on: &[usize]) -> Operator {
    let mut d = [0.0; 3];
    for &k in on {
        d[k] = 1.0;
    }
    Operator::diag(&d)
}

fn set(label: &str, members: &[(&str, &[usize])]) -> ProjectorSet {
    ProjectorSet {
        label: label.to_string(),
        projectors: members
            .iter()
            .map(|(name, on)| (name.to_string(), paths(on)))
            .collect(),
    }
}

/// Which three-box experiment to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThreeBoxMode {
    /// ABL with one projector per path.
    PerPath,
    /// ABL for path 1 against paths 2 and 3 joined.
    Path1VsRest,
    /// ABL for path 3 against paths 1 and 2 joined.
    Path3VsRest,
    /// Weak values of the three path projectors, with pointer sweeps.
    WeakProjectors,
}

impl ThreeBoxMode {
    pub const ALL: [ThreeBoxMode; 4] = [
        ThreeBoxMode::PerPath,
        ThreeBoxMode::Path1VsRest,
        ThreeBoxMode::Path3VsRest,
        ThreeBoxMode::WeakProjectors,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ThreeBoxMode::PerPath => "per_path",
            ThreeBoxMode::Path1VsRest => "path1_vs_rest",
            ThreeBoxMode::Path3VsRest => "path3_vs_rest",
            ThreeBoxMode::WeakProjectors => "weak_projectors",
        }
    }
}

impl FromStr for ThreeBoxMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Self::ALL.iter().map(|m| m.name()).collect();
                format!("unknown three-box mode '{s}' (expected one of {})", names.join(", "))
            })
    }
}

/// Projector sets of the three ABL experiments, labelled by mode name.
pub(crate) fn three_box_projector_sets() -> Vec<ProjectorSet> {
    vec![
        set(
            ThreeBoxMode::PerPath.name(),
            &[("path1", &[0]), ("path2", &[1]), ("path3", &[2])],
        ),
        set(
            ThreeBoxMode::Path1VsRest.name(),
            &[("path1", &[0]), ("path2+3", &[1, 2])],
        ),
        set(
            ThreeBoxMode::Path3VsRest.name(),
            &[("path3", &[2]), ("path1+2", &[0, 1])],
        ),
    ]
}

/// The three path projectors with their labels.
pub(crate) fn three_box_path_projectors() -> Vec<(String, Operator)> {
    (0..3).map(|k| (format!("Pi_{}", k + 1), paths(&[k]))).collect()
}

fn base(name: &str, mode: Mode) -> ScenarioConfig {
    ScenarioConfig {
        name: name.to_string(),
        mode,
        dimension: 0,
        pre: None,
        observable: None,
        post: None,
        u_wi: None,
        u_fw: None,
        g: Vec::new(),
        pointer: PointerConfig::default(),
        projector_sets: Vec::new(),
        classical: None,
        current: None,
        seed: 0,
        format: OutputFormat::Json,
        tau: None,
    }
}

fn three_box(name: &str, mode: Mode) -> ScenarioConfig {
    ScenarioConfig {
        dimension: 3,
        pre: Some(three_box_pre()),
        post: Some(PostSpec::State(three_box_post())),
        ..base(name, mode)
    }
}

fn three_box_abl() -> ScenarioConfig {
    ScenarioConfig {
        projector_sets: three_box_projector_sets(),
        ..three_box("three_box_abl", Mode::Abl)
    }
}

fn three_box_weak() -> ScenarioConfig {
    ScenarioConfig {
        observable: Some(paths(&[1])),
        g: THREE_BOX_SWEEP.to_vec(),
        ..three_box("three_box_weak", Mode::Weak)
    }
}

/// Coupling to the projector onto `(psi_2 + psi_3)/sqrt 2`, whose weak value
/// vanishes for the three-box pre- and post-selection.
fn three_box_null() -> ScenarioConfig {
    let v = StateVector::from_real(&[0.0, FRAC_1_SQRT_2, FRAC_1_SQRT_2]).expect("nonempty");
    ScenarioConfig {
        observable: Some(Operator::projector(&v).expect("nonzero")),
        g: THREE_BOX_SWEEP.to_vec(),
        ..three_box("three_box_null", Mode::Weak)
    }
}

/// Coupling to `Pi_1 - Pi_3`: the two path weak values cancel although
/// neither boundary state is an eigenstate.
fn three_box_null_difference() -> ScenarioConfig {
    ScenarioConfig {
        observable: Some(Operator::diag(&[1.0, 0.0, -1.0])),
        g: THREE_BOX_SWEEP.to_vec(),
        ..three_box("three_box_null_difference", Mode::Weak)
    }
}

fn qubit_prepost_equal() -> ScenarioConfig {
    let (c, s) = (0.3f64.cos(), 0.3f64.sin());
    let psi = StateVector::new(vec![
        Complex64::new(c, 0.0),
        Complex64::from_polar(s, 0.7),
    ])
    .expect("nonempty");
    ScenarioConfig {
        dimension: 2,
        pre: Some(psi.clone()),
        observable: Some(Operator::from_real_rows(&[vec![1.0, 0.5], vec![0.5, -1.0]]).expect("square")),
        post: Some(PostSpec::State(psi)),
        g: THREE_BOX_SWEEP.to_vec(),
        ..base("qubit_prepost_equal", Mode::Weak)
    }
}

/// Pre-selected in the `+1` eigenstate of the flip operator; the pointer is
/// translated exactly at every coupling.
fn qubit_eigenstate() -> ScenarioConfig {
    let flip = Operator::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).expect("square");
    ScenarioConfig {
        dimension: 2,
        pre: Some(StateVector::from_real(&[FRAC_1_SQRT_2, FRAC_1_SQRT_2]).expect("nonempty")),
        observable: Some(flip),
        post: Some(PostSpec::Basis {
            observable: Operator::diag(&[1.0, -1.0]),
            outcome: 1,
        }),
        g: vec![1e-3, 1e-2, 1e-1, 1.0, 3.0],
        ..base("qubit_eigenstate", Mode::Weak)
    }
}

/// Strong coupling resolves the two branches of an equal superposition.
fn qubit_projective() -> ScenarioConfig {
    ScenarioConfig {
        dimension: 2,
        pre: Some(StateVector::from_real(&[FRAC_1_SQRT_2, FRAC_1_SQRT_2]).expect("nonempty")),
        observable: Some(Operator::diag(&[1.0, -1.0])),
        g: vec![0.1, 1.0, 8.0],
        ..base("qubit_projective", Mode::Projective)
    }
}

fn classical_filtered_gaussian() -> ScenarioConfig {
    ScenarioConfig {
        classical: Some(ClassicalConfig {
            mean: 0.0,
            std_dev: 1.0,
            observable: ClassicalObservable::Position,
            filter: ClassicalFilter::Above(0.0),
            n_samples: 1_000_000,
        }),
        seed: 20_250_101,
        ..base("classical_filtered_gaussian", Mode::Classical)
    }
}

fn boosted_gaussian_current() -> ScenarioConfig {
    ScenarioConfig {
        current: Some(CurrentConfig {
            k0: 1.5,
            mass: 1.0,
            x: None,
        }),
        ..base("boosted_gaussian_current", Mode::Current)
    }
}

/// Every built-in scenario, in a fixed order.
pub fn presets() -> Vec<ScenarioConfig> {
    vec![
        three_box_abl(),
        three_box_weak(),
        three_box_null(),
        three_box_null_difference(),
        qubit_prepost_equal(),
        qubit_eigenstate(),
        qubit_projective(),
        classical_filtered_gaussian(),
        boosted_gaussian_current(),
    ]
}

pub fn preset_names() -> Vec<String> {
    presets().into_iter().map(|p| p.name).collect()
}

pub fn preset(name: &str) -> Result<ScenarioConfig, ScenarioError> {
    presets()
        .into_iter()
        .find(|p| p.name == name)
        .ok_or_else(|| ScenarioError::UnknownPreset(name.to_string()))
}

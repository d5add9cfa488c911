//! Machine-readable run reports.

use serde::{Deserialize, Serialize};

use super::config::Mode;
use super::ScenarioError;
use crate::pointer::format_f64;
use crate::projective::{write_abl_csv, AblTable};
use crate::weak::ClassicalEstimate;

/// Stable assertion identifiers.
pub mod ids {
    pub const ABL_SUM_TO_ONE: &str = "abl.sum_to_one";
    pub const ABL_THREE_BOX_VALUE: &str = "abl.three_box_value";
    pub const WEAK_RATIO_VS_CONDITIONAL: &str = "weak.ratio_vs_conditional_forms";
    pub const WEAK_EQUAL_PREPOST: &str = "weak.equal_prepost_expectation";
    pub const WEAK_EIGENSTATE_VALUE: &str = "weak.eigenstate_value";
    pub const WEAK_EIGENSTATE_TRANSLATION: &str = "weak.eigenstate_translation";
    pub const WEAK_PROJECTOR_COMPLETENESS: &str = "weak.projector_completeness";
    pub const WEAK_THREE_BOX_VALUES: &str = "weak.three_box_values";
    pub const WEAK_ANOMALOUS_VALUE: &str = "weak.anomalous_value";
    pub const WEAK_READOUT_CONVERGENCE: &str = "weak.readout_convergence";
    pub const WEAK_READOUT_SHIFT_SLOPE: &str = "weak.readout_shift_slope";
    pub const WEAK_PREDICTION_FIDELITY: &str = "weak.prediction_fidelity";
    pub const WEAK_DISTURBANCE_DECAY: &str = "weak.disturbance_decay";
    pub const WEAK_NULL_VALUE: &str = "weak.null_value";
    pub const WEAK_EXPECTATION_DECOMPOSITION: &str = "weak.expectation_decomposition";
    pub const PROJECTIVE_NORM_PRESERVED: &str = "projective.norm_preserved";
    pub const PROJECTIVE_BORN_COMPLETENESS: &str = "projective.born_completeness";
    pub const PROJECTIVE_PEAK_MASSES: &str = "projective.peak_masses";
    pub const CLASSICAL_ANALYTIC_MEAN: &str = "classical.analytic_mean";
    pub const CURRENT_IDENTITY: &str = "current.identity";
    pub const CURRENT_BOOST_VALUE: &str = "current.boost_value";
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub id: String,
    pub pass: bool,
    pub residual: f64,
    pub tolerance: f64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub skipped: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Assertion {
    /// Passes when `residual <= tolerance`.
    pub fn check(id: &str, residual: f64, tolerance: f64) -> Self {
        Self {
            id: id.to_string(),
            pass: residual <= tolerance,
            residual,
            tolerance,
            skipped: false,
            note: None,
        }
    }

    pub fn skip(id: &str, reason: impl Into<String>) -> Self {
        Self {
            id: id.to_string(),
            pass: true,
            residual: 0.0,
            tolerance: 0.0,
            skipped: true,
            note: Some(reason.into()),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

/// Weak value of one observable with its conditional-form parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakValueEntry {
    pub observable: String,
    pub weak_value: [f64; 2],
    pub re_conditional: f64,
    pub im_conditional: f64,
    pub ps_probability: f64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub divergence_warning: bool,
}

/// One coupling of a weak sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub observable: String,
    pub g: f64,
    pub weak_value: [f64; 2],
    pub re_est: f64,
    pub im_est: f64,
    /// Post-selection probability at this coupling.
    pub ps_prob: f64,
    /// Deficit of the exact pointer against the first-order prediction;
    /// absent outside the weak regime.
    pub fidelity_deficit: Option<f64>,
    /// Deficit of the exact pointer against the unshifted pointer.
    pub baseline_deficit: f64,
    /// Mean position shift relative to the unshifted pointer.
    pub shift: f64,
}

/// Log-log slope of one residual against `g`, or the reason it was not fitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: Option<f64>,
    pub points: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
}

impl SlopeFit {
    pub fn skipped(points: usize, reason: impl Into<String>) -> Self {
        Self {
            slope: None,
            points,
            skipped: Some(reason.into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepFits {
    pub observable: String,
    /// `|re_est - Re A^w|` against `g`.
    pub shift_error: SlopeFit,
    /// Prediction fidelity deficit against `g`.
    pub fidelity_deficit: SlopeFit,
    /// `|ps_prob(g) - ps_prob(0)|` against `g`.
    pub disturbance: SlopeFit,
}

/// Born weight and resolved pointer peak of one eigenvalue at coupling `g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectiveRecord {
    pub g: f64,
    pub eigenvalue: f64,
    pub born_probability: f64,
    /// Pointer mass in the window around `x0 + g a_k`; present only when
    /// neighbouring peaks are resolved.
    pub peak_mass: Option<f64>,
    pub peak_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurrentReadout {
    pub x: f64,
    pub k0: f64,
    pub mass: f64,
    pub re_wv: f64,
    pub current_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub scenario: String,
    pub mode: Mode,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub weak_values: Vec<WeakValueEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub records: Vec<SweepRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fits: Vec<SweepFits>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub abl_tables: Vec<AblTable>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub projective: Vec<ProjectiveRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classical: Option<ClassicalEstimate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub current: Option<CurrentReadout>,
    #[serde(default)]
    pub warnings: Vec<String>,
    pub assertions: Vec<Assertion>,
}

impl Report {
    pub fn new(scenario: &str, mode: Mode, seed: u64) -> Self {
        Self {
            scenario: scenario.to_string(),
            mode,
            seed,
            weak_values: Vec::new(),
            records: Vec::new(),
            fits: Vec::new(),
            abl_tables: Vec::new(),
            projective: Vec::new(),
            classical: None,
            current: None,
            warnings: Vec::new(),
            assertions: Vec::new(),
        }
    }

    pub fn all_passed(&self) -> bool {
        self.assertions.iter().all(|a| a.pass)
    }

    pub fn failed(&self) -> impl Iterator<Item = &Assertion> {
        self.assertions.iter().filter(|a| !a.pass)
    }

    pub fn assertion(&self, id: &str) -> Option<&Assertion> {
        self.assertions.iter().find(|a| a.id == id)
    }

    pub fn to_json(&self) -> Result<String, ScenarioError> {
        if let Some(field) = self.first_non_finite() {
            return Err(ScenarioError::Output(format!("non-finite value in {field}")));
        }
        let mut text =
            serde_json::to_string_pretty(self).map_err(|e| ScenarioError::Output(e.to_string()))?;
        text.push('\n');
        Ok(text)
    }

    /// CSV table for the report's mode: sweep records for weak runs, ABL
    /// tables, per-eigenvalue projective rows, or a single classical or
    /// current row.
    pub fn to_csv(&self) -> Result<String, ScenarioError> {
        let mut buf = Vec::new();
        let out = |e: csv::Error| ScenarioError::Output(e.to_string());
        match self.mode {
            Mode::Abl => {
                write_abl_csv(&self.abl_tables, &mut buf)
                    .map_err(|e| ScenarioError::Output(e.to_string()))?;
            }
            Mode::Weak => {
                let mut w = csv::Writer::from_writer(&mut buf);
                w.write_record([
                    "observable",
                    "g",
                    "weak_value_re",
                    "weak_value_im",
                    "re_est",
                    "im_est",
                    "ps_prob",
                    "fidelity_deficit",
                ])
                .map_err(out)?;
                for r in &self.records {
                    w.write_record([
                        r.observable.clone(),
                        format_f64(r.g),
                        format_f64(r.weak_value[0]),
                        format_f64(r.weak_value[1]),
                        format_f64(r.re_est),
                        format_f64(r.im_est),
                        format_f64(r.ps_prob),
                        r.fidelity_deficit.map(format_f64).unwrap_or_default(),
                    ])
                    .map_err(out)?;
                }
                w.flush().map_err(|e| ScenarioError::Output(e.to_string()))?;
            }
            Mode::Projective => {
                let mut w = csv::Writer::from_writer(&mut buf);
                w.write_record(["g", "eigenvalue", "born_probability", "peak_mass", "peak_mean"])
                    .map_err(out)?;
                for r in &self.projective {
                    w.write_record([
                        format_f64(r.g),
                        format_f64(r.eigenvalue),
                        format_f64(r.born_probability),
                        r.peak_mass.map(format_f64).unwrap_or_default(),
                        r.peak_mean.map(format_f64).unwrap_or_default(),
                    ])
                    .map_err(out)?;
                }
                w.flush().map_err(|e| ScenarioError::Output(e.to_string()))?;
            }
            Mode::Classical => {
                let mut w = csv::Writer::from_writer(&mut buf);
                w.write_record(["estimate", "std_error", "accepted", "samples"])
                    .map_err(out)?;
                if let Some(c) = &self.classical {
                    w.write_record([
                        format_f64(c.estimate),
                        format_f64(c.std_error),
                        c.accepted.to_string(),
                        c.samples.to_string(),
                    ])
                    .map_err(out)?;
                }
                w.flush().map_err(|e| ScenarioError::Output(e.to_string()))?;
            }
            Mode::Current => {
                let mut w = csv::Writer::from_writer(&mut buf);
                w.write_record(["x", "k0", "mass", "re_wv", "current_ratio"])
                    .map_err(out)?;
                if let Some(c) = &self.current {
                    w.write_record([c.x, c.k0, c.mass, c.re_wv, c.current_ratio].map(format_f64))
                        .map_err(out)?;
                }
                w.flush().map_err(|e| ScenarioError::Output(e.to_string()))?;
            }
        }
        String::from_utf8(buf).map_err(|e| ScenarioError::Output(e.to_string()))
    }

    fn first_non_finite(&self) -> Option<String> {
        let bad = |v: f64| !v.is_finite();
        for w in &self.weak_values {
            if w.weak_value.iter().any(|v| bad(*v))
                || bad(w.re_conditional)
                || bad(w.im_conditional)
                || bad(w.ps_probability)
            {
                return Some(format!("weak value of {}", w.observable));
            }
        }
        for r in &self.records {
            let opt = r.fidelity_deficit.unwrap_or(0.0);
            if [r.g, r.re_est, r.im_est, r.ps_prob, opt, r.baseline_deficit, r.shift]
                .into_iter()
                .chain(r.weak_value)
                .any(bad)
            {
                return Some(format!("record {} at g = {}", r.observable, r.g));
            }
        }
        for t in &self.abl_tables {
            if t.outcomes.iter().any(|o| bad(o.probability)) {
                return Some(format!("ABL table {}", t.label));
            }
        }
        for a in &self.assertions {
            if bad(a.residual) || bad(a.tolerance) {
                return Some(format!("assertion {}", a.id));
            }
        }
        None
    }
}

//! Von Neumann impulsive measurement, Born-rule collapse, post-selection of
//! the joint system-pointer state, and the ABL conditional rule.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::hilbert::{check_dim, eig_hermitian, EigenProjector, Operator, SpectralDecomposition, StateVector};
use crate::pointer::{format_f64, GridSpec, NormTag, PointerState, POINTER_NORM_TOL};
use crate::{Error, Result, EPS_POST_SELECTION};

/// Tolerance for projector-set completeness and orthogonality.
pub const PROJECTOR_SET_TOL: f64 = 1e-10;

/// Entangled system ⊗ pointer amplitudes, system-major: row `j` is the
/// pointer wavefunction attached to system basis state `|j>`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    sys_dim: usize,
    grid: GridSpec,
    amplitudes: Vec<Complex64>,
    tag: NormTag,
}

impl JointState {
    fn from_amplitudes(sys_dim: usize, grid: GridSpec, amplitudes: Vec<Complex64>) -> Self {
        let squared_norm =
            amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>() * grid.dx();
        let tag = if (squared_norm - 1.0).abs() <= POINTER_NORM_TOL {
            NormTag::Normalized
        } else {
            NormTag::Unnormalized { squared_norm }
        };
        Self {
            sys_dim,
            grid,
            amplitudes,
            tag,
        }
    }

    /// Uncoupled product `|psi> ⊗ |phi>`.
    pub fn product(psi: &StateVector, phi: &PointerState) -> Self {
        let amplitudes = psi
            .amplitudes()
            .iter()
            .flat_map(|c| phi.values().iter().map(move |v| c * v))
            .collect();
        Self::from_amplitudes(psi.dim(), *phi.grid(), amplitudes)
    }

    pub fn sys_dim(&self) -> usize {
        self.sys_dim
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn tag(&self) -> NormTag {
        self.tag
    }

    /// Pointer wavefunction correlated with system basis state `|j>`.
    pub fn branch(&self, j: usize) -> &[Complex64] {
        let n = self.grid.n_points();
        &self.amplitudes[j * n..(j + 1) * n]
    }

    pub fn squared_norm(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.dx()
    }

    /// `sum_j |psi_j(x)|^2`, the pointer density with the system traced out.
    pub fn reduced_pointer_density(&self) -> Vec<f64> {
        let n = self.grid.n_points();
        let mut rho = vec![0.0; n];
        for j in 0..self.sys_dim {
            for (r, z) in rho.iter_mut().zip(self.branch(j)) {
                *r += z.norm_sqr();
            }
        }
        rho
    }

    /// Partial trace over the pointer: `rho_jk = sum_x psi_j(x) conj(psi_k(x)) dx`.
    pub fn reduced_system_matrix(&self) -> Operator {
        let d = self.sys_dim;
        let dx = self.grid.dx();
        let mut data = vec![Complex64::new(0.0, 0.0); d * d];
        for j in 0..d {
            for k in 0..d {
                data[j * d + k] = self
                    .branch(j)
                    .iter()
                    .zip(self.branch(k))
                    .map(|(a, b)| a * b.conj())
                    .sum::<Complex64>()
                    * dx;
            }
        }
        Operator::new(d, data).expect("square by construction")
    }

    /// Checks that the reduced system matrix has no eigenvalue below `-1e-10`.
    pub fn check_positive(&self) -> Result<f64> {
        let decomposition = eig_hermitian(&self.reduced_system_matrix())?;
        let smallest = decomposition.eigenvalues()[0];
        if smallest < -1e-10 {
            return Err(Error::Contract(format!(
                "reduced system matrix has negative eigenvalue {smallest:e}"
            )));
        }
        Ok(smallest)
    }

    /// `(U ⊗ 1) |Psi>`.
    pub fn apply_system(&self, u: &Operator) -> Result<Self> {
        check_dim(self.sys_dim, u.dim())?;
        let n = self.grid.n_points();
        let mut out = vec![Complex64::new(0.0, 0.0); self.amplitudes.len()];
        for i in 0..self.sys_dim {
            for j in 0..self.sys_dim {
                let uij = u.get(i, j);
                if uij == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for (o, a) in out[i * n..(i + 1) * n].iter_mut().zip(self.branch(j)) {
                    *o += uij * a;
                }
            }
        }
        Ok(Self::from_amplitudes(self.sys_dim, self.grid, out))
    }

    /// Projects the system onto `<post|` and returns the resulting
    /// (unnormalized) pointer wavefunction `sum_j conj(post_j) psi_j(x)`.
    pub fn project_system(&self, post: &StateVector) -> Result<PointerState> {
        check_dim(self.sys_dim, post.dim())?;
        let n = self.grid.n_points();
        let mut values = vec![Complex64::new(0.0, 0.0); n];
        for (j, b) in post.amplitudes().iter().enumerate() {
            let w = b.conj();
            for (v, a) in values.iter_mut().zip(self.branch(j)) {
                *v += w * a;
            }
        }
        PointerState::unnormalized(self.grid, values)
    }
}

/// Builds `sum_k (Pi_k psi) ⊗ exp(-i g a_k P) phi` from eigenprojector
/// components.
fn couple_components(
    psi: &StateVector,
    components: &[(f64, StateVector)],
    phi: &PointerState,
    g: f64,
) -> Result<JointState> {
    let d = psi.dim();
    let n = phi.grid().n_points();
    let mut amplitudes = vec![Complex64::new(0.0, 0.0); d * n];
    for (eigenvalue, projected) in components {
        if projected.norm_sqr() == 0.0 {
            continue;
        }
        let shifted = phi.translate(g * eigenvalue)?;
        for (j, c) in projected.amplitudes().iter().enumerate() {
            if *c == Complex64::new(0.0, 0.0) {
                continue;
            }
            for (a, v) in amplitudes[j * n..(j + 1) * n].iter_mut().zip(shifted.values()) {
                *a += c * v;
            }
        }
    }
    Ok(JointState::from_amplitudes(d, *phi.grid(), amplitudes))
}

/// Exact impulsive coupling `exp(-i g A P)` applied to `|psi> ⊗ |phi>`:
/// `sum_k <a_k|psi> |a_k> ⊗ phi(x - g a_k)`.
///
/// Requires a non-degenerate spectrum; degenerate observables go through
/// [`von_neumann_couple_projectors`].
pub fn von_neumann_couple(
    psi: &StateVector,
    observable: &SpectralDecomposition,
    phi: &PointerState,
    g: f64,
) -> Result<JointState> {
    check_dim(observable.dim(), psi.dim())?;
    if observable.is_degenerate() {
        return Err(Error::DegenerateObservable);
    }
    psi.require_normalized("pre-measurement state")?;
    let components: Vec<(f64, StateVector)> = observable
        .eigenvalues()
        .iter()
        .zip(observable.eigenvectors())
        .map(|(a, v)| Ok((*a, v.scale(v.inner(psi)?))))
        .collect::<Result<_>>()?;
    couple_components(psi, &components, phi, g)
}

/// Projector-set form of the coupling: `sum_k (Pi_k psi) ⊗ phi(x - g a_k)`.
pub fn von_neumann_couple_projectors(
    psi: &StateVector,
    projectors: &[EigenProjector],
    phi: &PointerState,
    g: f64,
) -> Result<JointState> {
    psi.require_normalized("pre-measurement state")?;
    let components: Vec<(f64, StateVector)> = projectors
        .iter()
        .map(|p| Ok((p.eigenvalue, p.projector.apply(psi)?)))
        .collect::<Result<_>>()?;
    let ops: Vec<Operator> = projectors.iter().map(|p| p.projector.clone()).collect();
    validate_projector_set(&ops, psi.dim())?;
    couple_components(psi, &components, phi, g)
}

/// Born-rule measurement of `B` with outcome `f`: returns `|<b_f|psi>|^2` and
/// the collapsed state `|b_f>`.
pub fn born_measure(
    psi: &StateVector,
    observable: &SpectralDecomposition,
    outcome: usize,
) -> Result<(f64, StateVector)> {
    check_dim(observable.dim(), psi.dim())?;
    if observable.is_degenerate() {
        return Err(Error::DegenerateObservable);
    }
    psi.require_normalized("measured state")?;
    let b = observable.eigenvector(outcome)?;
    let probability = b.inner(psi)?.norm_sqr();
    require_possible(probability)?;
    Ok((probability, b.clone()))
}

/// Born-rule measurement against a projector: returns `<psi|Pi|psi>` and the
/// renormalized projection `Pi|psi> / ||Pi|psi>||`.
pub fn born_measure_projector(psi: &StateVector, projector: &Operator) -> Result<(f64, StateVector)> {
    check_dim(projector.dim(), psi.dim())?;
    psi.require_normalized("measured state")?;
    let projected = projector.apply(psi)?;
    let probability = projected.norm_sqr();
    require_possible(probability)?;
    Ok((probability, projected.normalized()?))
}

/// Filters the joint state on outcome `f` of `B` measured after `U_fw`.
///
/// The returned pointer keeps the complex prefactor
/// `<b_f(t_w)|a_k><a_k|psi(t_w)>` on each branch; its squared norm is the
/// post-selection probability.
pub fn post_select(
    joint: &JointState,
    observable: &SpectralDecomposition,
    outcome: usize,
    u_fw: &Operator,
) -> Result<(PointerState, f64)> {
    check_dim(observable.dim(), joint.sys_dim())?;
    post_select_state(joint, observable.eigenvector(outcome)?, u_fw)
}

/// Like [`post_select`] with an explicit final state `|b_f>`.
pub fn post_select_state(
    joint: &JointState,
    post: &StateVector,
    u_fw: &Operator,
) -> Result<(PointerState, f64)> {
    check_dim(joint.sys_dim(), post.dim())?;
    check_dim(joint.sys_dim(), u_fw.dim())?;
    u_fw.require_unitary("U(t_f, t_w)")?;
    // <b_f(t_w)| = <b_f| U_fw  <=>  |b_f(t_w)> = U_fw^dagger |b_f>
    let back = u_fw.adjoint().apply(post)?;
    let pointer = joint.project_system(&back)?;
    let probability = pointer.squared_norm();
    require_possible(probability)?;
    Ok((pointer, probability))
}

pub(crate) fn require_possible(probability: f64) -> Result<()> {
    if probability < EPS_POST_SELECTION {
        Err(Error::PostSelectionImpossible {
            probability,
            threshold: EPS_POST_SELECTION,
        })
    } else {
        Ok(())
    }
}

/// Checks `sum Pi_k = 1` and `Pi_j Pi_k = delta_jk Pi_k` entrywise to
/// [`PROJECTOR_SET_TOL`].
pub fn validate_projector_set(projectors: &[Operator], dim: usize) -> Result<()> {
    if projectors.is_empty() {
        return Err(Error::Contract("empty projector set".into()));
    }
    for p in projectors {
        check_dim(dim, p.dim())?;
    }
    let mut sum = Operator::zeros(dim);
    for p in projectors {
        sum = sum.add(p)?;
    }
    let completeness = sum.max_abs_diff(&Operator::identity(dim));
    if completeness > PROJECTOR_SET_TOL {
        return Err(Error::Contract(format!(
            "projectors do not sum to the identity (residual {completeness:e})"
        )));
    }
    for (j, pj) in projectors.iter().enumerate() {
        for (k, pk) in projectors.iter().enumerate() {
            let prod = pj.matmul(pk)?;
            let target = if j == k { pk.clone() } else { Operator::zeros(dim) };
            let r = prod.max_abs_diff(&target);
            if r > PROJECTOR_SET_TOL {
                return Err(Error::Contract(format!(
                    "projectors {j} and {k} are not orthogonal idempotents (residual {r:e})"
                )));
            }
        }
    }
    Ok(())
}

/// ABL conditional probabilities for every projector in the set:
/// `|<b_f|Pi_n|psi>|^2 / sum_k |<b_f|Pi_k|psi>|^2`.
pub fn abl_distribution(
    pre: &StateVector,
    post: &StateVector,
    projectors: &[Operator],
) -> Result<Vec<f64>> {
    check_dim(pre.dim(), post.dim())?;
    pre.require_normalized("pre-selected state")?;
    post.require_normalized("post-selected state")?;
    validate_projector_set(projectors, pre.dim())?;
    let weights: Vec<f64> = projectors
        .iter()
        .map(|p| Ok(p.sandwich(post, pre)?.norm_sqr()))
        .collect::<Result<_>>()?;
    let denominator: f64 = weights.iter().sum();
    if denominator < EPS_POST_SELECTION {
        return Err(Error::UndefinedConditional { denominator });
    }
    Ok(weights.into_iter().map(|w| w / denominator).collect())
}

/// ABL probability of outcome `n` of the projector set.
pub fn abl_probability(
    pre: &StateVector,
    post: &StateVector,
    projectors: &[Operator],
    n: usize,
) -> Result<f64> {
    if n >= projectors.len() {
        return Err(Error::OutcomeIndex {
            index: n,
            count: projectors.len(),
        });
    }
    Ok(abl_distribution(pre, post, projectors)?[n])
}

/// One labelled projector set and its ABL probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblTable {
    pub label: String,
    pub outcomes: Vec<AblOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblOutcome {
    pub outcome: String,
    pub probability: f64,
}

impl AblTable {
    pub fn compute(
        label: &str,
        pre: &StateVector,
        post: &StateVector,
        projectors: &[(String, Operator)],
    ) -> Result<Self> {
        let ops: Vec<Operator> = projectors.iter().map(|(_, p)| p.clone()).collect();
        let probabilities = abl_distribution(pre, post, &ops)?;
        Ok(Self {
            label: label.to_string(),
            outcomes: projectors
                .iter()
                .zip(probabilities)
                .map(|((name, _), probability)| AblOutcome {
                    outcome: name.clone(),
                    probability,
                })
                .collect(),
        })
    }

    pub fn probability(&self, outcome: &str) -> Option<f64> {
        self.outcomes
            .iter()
            .find(|o| o.outcome == outcome)
            .map(|o| o.probability)
    }
}

/// Writes `projector_set, outcome, probability` rows.
pub fn write_abl_csv<W: Write>(tables: &[AblTable], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Configuration(format!("csv write failed: {e}"));
    w.write_record(["projector_set", "outcome", "probability"])
        .map_err(io)?;
    for t in tables {
        for o in &t.outcomes {
            w.write_record([t.label.as_str(), o.outcome.as_str(), &format_f64(o.probability)])
                .map_err(io)?;
        }
    }
    w.flush()
        .map_err(|e| Error::Configuration(format!("csv flush failed: {e}")))?;
    Ok(())
}

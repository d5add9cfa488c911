//! Weak measurements with pre- and post-selection.
//!
//! The system is prepared in `|psi(t_i)>`, evolves with `U_wi` to the
//! interaction time, couples impulsively to the pointer through
//! `exp(-i g A P)`, evolves with `U_fw` and is post-selected on `|b_f>`.
//! The interaction duration is carried as metadata only: the coupling acts
//! at a single instant.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::hilbert::{check_dim, eig_hermitian, Operator, SpectralDecomposition, StateVector};
use crate::pointer::{GridSpec, PointerState};
use crate::projective::{post_select_state, require_possible, von_neumann_couple_projectors};
use crate::{Error, Result, DIVERGENCE_WARNING, EPS_POST_SELECTION};

/// `g * max|a_k| <= WEAK_REGIME_FRACTION * sigma` marks the weak regime.
pub const WEAK_REGIME_FRACTION: f64 = 0.1;

/// How the final measurement is specified.
#[derive(Debug, Clone, PartialEq)]
pub enum PostSelection {
    /// Outcome `outcome` of the observable `B`.
    Basis {
        observable: SpectralDecomposition,
        outcome: usize,
    },
    /// An explicit post-selected state `|b_f>`.
    State(StateVector),
}

impl PostSelection {
    pub fn state(&self) -> Result<&StateVector> {
        match self {
            PostSelection::Basis {
                observable,
                outcome,
            } => observable.eigenvector(*outcome),
            PostSelection::State(s) => Ok(s),
        }
    }
}

/// Initial pointer preparation: a Gaussian on `grid`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointerSpec {
    pub grid: GridSpec,
    pub x0: f64,
    pub sigma: f64,
}

impl Default for PointerSpec {
    fn default() -> Self {
        Self {
            grid: GridSpec::default(),
            x0: 0.0,
            sigma: 1.0,
        }
    }
}

impl PointerSpec {
    pub fn prepare(&self) -> Result<PointerState> {
        PointerState::gaussian(self.grid, self.x0, self.sigma)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeakScenario {
    /// `|psi(t_i)>`.
    pub pre: StateVector,
    /// `U(t_w, t_i)`.
    pub u_wi: Operator,
    /// Weakly coupled observable `A`.
    pub observable: Operator,
    /// Integrated coupling `g`.
    pub g: f64,
    /// `U(t_f, t_w)`.
    pub u_fw: Operator,
    pub post: PostSelection,
    pub pointer: PointerSpec,
    /// Interaction duration; recorded, never used dynamically.
    pub tau: Option<f64>,
}

impl WeakScenario {
    /// Scenario with trivial evolutions, zero coupling and the default pointer.
    pub fn new(pre: StateVector, observable: Operator, post: PostSelection) -> Self {
        let dim = pre.dim();
        Self {
            pre,
            u_wi: Operator::identity(dim),
            observable,
            g: 0.0,
            u_fw: Operator::identity(dim),
            post,
            pointer: PointerSpec::default(),
            tau: None,
        }
    }

    pub fn with_g(mut self, g: f64) -> Self {
        self.g = g;
        self
    }

    pub fn with_unitaries(mut self, u_wi: Operator, u_fw: Operator) -> Self {
        self.u_wi = u_wi;
        self.u_fw = u_fw;
        self
    }

    pub fn with_pointer(mut self, pointer: PointerSpec) -> Self {
        self.pointer = pointer;
        self
    }

    pub fn dim(&self) -> usize {
        self.pre.dim()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        check_dim(d, self.u_wi.dim())?;
        check_dim(d, self.u_fw.dim())?;
        check_dim(d, self.observable.dim())?;
        let post = self.post.state()?;
        check_dim(d, post.dim())?;
        self.pre.require_normalized("pre-selected state")?;
        post.require_normalized("post-selected state")?;
        self.observable.require_hermitian("weakly coupled observable")?;
        self.u_wi.require_unitary("U(t_w, t_i)")?;
        self.u_fw.require_unitary("U(t_f, t_w)")?;
        if !self.g.is_finite() {
            return Err(Error::Contract(format!("coupling {} is not finite", self.g)));
        }
        Ok(())
    }

    /// `|psi(t_w)> = U_wi |psi(t_i)>`.
    pub fn pre_at_interaction(&self) -> Result<StateVector> {
        self.u_wi.apply(&self.pre)
    }

    /// `|b_f(t_w)> = U_fw^dagger |b_f>`.
    pub fn post_at_interaction(&self) -> Result<StateVector> {
        self.u_fw.adjoint().apply(self.post.state()?)
    }

    pub fn observable_spectrum(&self) -> Result<SpectralDecomposition> {
        eig_hermitian(&self.observable)
    }

    /// `g * max|a_k| <= 0.1 * sigma`.
    pub fn is_weak_regime(&self) -> Result<bool> {
        let spread = self.observable_spectrum()?.max_abs_eigenvalue();
        Ok(self.g.abs() * spread <= WEAK_REGIME_FRACTION * self.pointer.sigma)
    }
}

/// Complex weak value with its post-selection probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakValue {
    pub value: Complex64,
    pub re: f64,
    pub im: f64,
    /// `|<b_f(t_w)|psi(t_w)>|^2`.
    pub ps_probability: f64,
    /// Set when the post-selection probability is below `1e-6`.
    pub divergence_warning: bool,
}

impl WeakValue {
    fn from_ratio(numerator: Complex64, overlap: Complex64) -> Result<Self> {
        let ps_probability = overlap.norm_sqr();
        require_possible(ps_probability)?;
        let value = numerator / overlap;
        Ok(Self {
            value,
            re: value.re,
            im: value.im,
            ps_probability,
            divergence_warning: ps_probability < DIVERGENCE_WARNING,
        })
    }
}

/// `<post|A|pre> / <post|pre>` for states already at the interaction time.
pub fn weak_value_of(pre: &StateVector, post: &StateVector, a: &Operator) -> Result<WeakValue> {
    check_dim(pre.dim(), post.dim())?;
    let overlap = post.inner(pre)?;
    let numerator = a.sandwich(post, pre)?;
    WeakValue::from_ratio(numerator, overlap)
}

/// `A^w = <b_f(t_w)|A|psi(t_w)> / <b_f(t_w)|psi(t_w)>`.
pub fn weak_value(s: &WeakScenario) -> Result<WeakValue> {
    s.validate()?;
    weak_value_of(&s.pre_at_interaction()?, &s.post_at_interaction()?, &s.observable)
}

/// Real and imaginary parts of the weak value from the conditional forms:
/// `Re = <psi|(Pi A + A Pi)/2|psi> / <psi|Pi|psi>` and
/// `Im = <psi|(Pi A - A Pi)/(2i)|psi> / <psi|Pi|psi>`, with `Pi` the
/// projector onto the back-evolved post-selected state.
pub fn weak_value_parts(s: &WeakScenario) -> Result<(f64, f64)> {
    s.validate()?;
    let psi = s.pre_at_interaction()?;
    let pi = Operator::projector(&s.post_at_interaction()?)?;
    let a = &s.observable;
    let pa = pi.matmul(a)?;
    let ap = a.matmul(&pi)?;
    let symmetric = pa.add(&ap)?.scale(Complex64::new(0.5, 0.0));
    // 1/(2i) = -i/2
    let commutator = pa.sub(&ap)?.scale(Complex64::new(0.0, -0.5));
    let denominator = pi.sandwich(&psi, &psi)?.re;
    require_possible(denominator)?;
    let re = symmetric.sandwich(&psi, &psi)?.re / denominator;
    let im = commutator.sandwich(&psi, &psi)?.re / denominator;
    Ok((re, im))
}

/// Exact post-selected pointer: couple `exp(-i g A P)` at `t_w`, evolve with
/// `U_fw`, project on `|b_f>`. No small-`g` expansion. Returns the
/// unnormalized pointer and its squared norm (the post-selection
/// probability at this coupling).
pub fn weak_protocol_exact(s: &WeakScenario) -> Result<(PointerState, f64)> {
    s.validate()?;
    let psi_w = s.pre_at_interaction()?;
    let spectrum = s.observable_spectrum()?;
    let phi = s.pointer.prepare()?;
    let joint = von_neumann_couple_projectors(&psi_w, &spectrum.eigen_projectors(), &phi, s.g)?;
    post_select_state(&joint, s.post.state()?, &s.u_fw)
}

/// First-order pointer prediction
/// `<b_f(t_w)|psi(t_w)> exp(g Im A^w P) phi(x - g Re A^w)`.
pub fn weak_pointer_prediction(s: &WeakScenario) -> Result<PointerState> {
    if !s.is_weak_regime()? {
        return Err(Error::Contract(format!(
            "coupling {} is outside the weak regime g*max|a| <= {} sigma",
            s.g, WEAK_REGIME_FRACTION
        )));
    }
    let wv = weak_value(s)?;
    let overlap = s.post_at_interaction()?.inner(&s.pre_at_interaction()?)?;
    let phi = s.pointer.prepare()?;
    let shifted = phi.translate(s.g * wv.re)?;
    Ok(shifted
        .apply_exp_cp(Complex64::new(s.g * wv.im, 0.0))?
        .scale(overlap))
}

/// Reads the weak value off a post-selected pointer against the unshifted
/// baseline: the position shift gives `Re`, and the momentum shift divided
/// by `2 g Var(P)` gives `Im`. The momentum rule inverts the `exp(g Im P)`
/// factor for Gaussian pointers.
pub fn extract_weak_value_from_pointer(
    exact: &PointerState,
    baseline: &PointerState,
    g: f64,
) -> Result<(f64, f64)> {
    if g == 0.0 || !g.is_finite() {
        return Err(Error::Contract(format!(
            "pointer readout needs a nonzero finite coupling, got {g}"
        )));
    }
    exact.check_same_grid(baseline)?;
    let m = exact.moments()?;
    let m0 = baseline.moments()?;
    let re = (m.mean_x - m0.mean_x) / g;
    let im = (m.mean_p - m0.mean_p) / (2.0 * g * m0.var_p);
    Ok((re, im))
}

/// One term of the decomposition of `<psi|A|psi>` over post-selections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionTerm {
    pub outcome: usize,
    pub probability: f64,
    pub weak_value: WeakValue,
}

/// Weak values of `A` for every outcome of `B` with nonvanishing
/// probability. `sum_f p_f Re A_f^w = <psi|A|psi>` and
/// `sum_f p_f Im A_f^w = 0`.
pub fn expectation_decomposition(
    psi: &StateVector,
    a: &Operator,
    b: &SpectralDecomposition,
) -> Result<Vec<DecompositionTerm>> {
    check_dim(psi.dim(), a.dim())?;
    check_dim(psi.dim(), b.dim())?;
    psi.require_normalized("state")?;
    a.require_hermitian("observable")?;
    let mut terms = Vec::with_capacity(b.dim());
    for (outcome, bf) in b.eigenvectors().iter().enumerate() {
        let probability = bf.inner(psi)?.norm_sqr();
        if probability < EPS_POST_SELECTION {
            continue;
        }
        terms.push(DecompositionTerm {
            outcome,
            probability,
            weak_value: weak_value_of(psi, bf, a)?,
        });
    }
    Ok(terms)
}

/// Pointer after a weak measurement whose post-selected state equals the
/// pre-selected one: `sum_k p_k phi(x - g a_k)` with `p_k = <psi|Pi_k|psi>`.
pub fn identical_prepost_pointer(
    psi: &StateVector,
    a: &SpectralDecomposition,
    g: f64,
    phi: &PointerState,
) -> Result<PointerState> {
    check_dim(psi.dim(), a.dim())?;
    psi.require_normalized("state")?;
    let mut values = vec![Complex64::new(0.0, 0.0); phi.grid().n_points()];
    for level in a.eigen_projectors() {
        let p = level.projector.sandwich(psi, psi)?.re;
        if p == 0.0 {
            continue;
        }
        let shifted = phi.translate(g * level.eigenvalue)?;
        for (v, z) in values.iter_mut().zip(shifted.values()) {
            *v += z * p;
        }
    }
    PointerState::unnormalized(*phi.grid(), values)
}

/// Monte Carlo estimate of a filtered classical average.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub accepted: usize,
    pub samples: usize,
}

/// Random generator handed to classical ensemble samplers.
pub type SamplerRng = ChaCha8Rng;

/// Minimum number of accepted samples for a classical estimate.
pub const MIN_ACCEPTED: usize = 10;

/// Filtered ensemble average `int_B A rho dq / int_B rho dq`, estimated by
/// drawing `n_samples` phase-space points and keeping those that pass
/// `filter`. Deterministic for a fixed seed.
pub fn classical_weak_analogue<Q, S, A, F>(
    mut sampler: S,
    observable: A,
    filter: F,
    n_samples: usize,
    seed: u64,
) -> Result<ClassicalEstimate>
where
    S: FnMut(&mut SamplerRng) -> Q,
    A: Fn(&Q) -> f64,
    F: Fn(&Q) -> bool,
{
    let mut rng = SamplerRng::seed_from_u64(seed);
    // Welford running moments
    let mut accepted = 0usize;
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for _ in 0..n_samples {
        let q = sampler(&mut rng);
        if !filter(&q) {
            continue;
        }
        accepted += 1;
        let x = observable(&q);
        let delta = x - mean;
        mean += delta / accepted as f64;
        m2 += delta * (x - mean);
    }
    if accepted < MIN_ACCEPTED {
        return Err(Error::EmptyFilter {
            accepted,
            samples: n_samples,
            required: MIN_ACCEPTED,
        });
    }
    let variance = m2 / (accepted - 1) as f64;
    Ok(ClassicalEstimate {
        estimate: mean,
        std_error: (variance / accepted as f64).sqrt(),
        accepted,
        samples: n_samples,
    })
}

/// Eighth-order central first-derivative stencil, offsets 1..=4.
const FD8: [f64; 4] = [4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];

/// Local momentum weak value at grid point `x_index` by two routes:
/// `Re <x|P|psi> / <x|psi>` with `P` applied spectrally, and `m j / rho`
/// with the probability current `j = Im(conj(psi) d psi/dx) / m` from an
/// eighth-order periodic finite difference.
pub fn current_density_weak_value(
    psi: &PointerState,
    x_index: usize,
    mass: f64,
) -> Result<(f64, f64)> {
    let n = psi.grid().n_points();
    if x_index >= n {
        return Err(Error::OutcomeIndex {
            index: x_index,
            count: n,
        });
    }
    if !(mass.is_finite() && mass > 0.0) {
        return Err(Error::Contract(format!("mass {mass} must be positive")));
    }
    let values = psi.values();
    let peak = values.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
    let rho = values[x_index].norm_sqr();
    if peak.is_nan() || peak <= 0.0 || rho < 1e-10 * peak {
        return Err(Error::UndefinedRatio {
            density: if peak > 0.0 { rho / peak } else { 0.0 },
        });
    }
    let p_psi = psi.apply_momentum();
    let re_wv = (p_psi[x_index] / values[x_index]).re;

    let dx = psi.grid().dx();
    let at = |offset: isize| values[(x_index as isize + offset).rem_euclid(n as isize) as usize];
    let derivative: Complex64 = FD8
        .iter()
        .enumerate()
        .map(|(k, c)| (at(k as isize + 1) - at(-(k as isize) - 1)) * *c)
        .sum::<Complex64>()
        / dx;
    let current = (values[x_index].conj() * derivative).im / mass;
    Ok((re_wv, mass * current / rho))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{expectation, random};
    use crate::pointer::fidelity_deficit;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn three_box(a: Operator) -> WeakScenario {
        let s = 1.0 / 3f64.sqrt();
        WeakScenario::new(
            StateVector::from_real(&[s, s, s]).unwrap(),
            a,
            PostSelection::State(StateVector::from_real(&[s, -s, s]).unwrap()),
        )
    }

    fn path(k: usize) -> Operator {
        let mut d = [0.0; 3];
        d[k] = 1.0;
        Operator::diag(&d)
    }

    #[test]
    fn equal_pre_and_post_give_the_expectation_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10 {
            let psi = random::state(&mut rng, 3);
            let a = random::hermitian(&mut rng, 3);
            let s = WeakScenario::new(psi.clone(), a.clone(), PostSelection::State(psi.clone()));
            let wv = weak_value(&s).unwrap();
            let ev = expectation(&a, &psi).unwrap();
            assert!((wv.re - ev).abs() < 1e-12);
            assert!(wv.im.abs() < 1e-12);
            let (re, im) = weak_value_parts(&s).unwrap();
            assert!((re - ev).abs() < 1e-12);
            assert!(im.abs() < 1e-12);
        }
    }

    #[test]
    fn eigenstate_pre_or_post_gives_the_eigenvalue() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let a = random::hermitian(&mut rng, 4);
        let spectrum = eig_hermitian(&a).unwrap();
        let other = random::state(&mut rng, 4);
        for k in 0..4 {
            let v = spectrum.eigenvectors()[k].clone();
            let ak = spectrum.eigenvalues()[k];
            let s = WeakScenario::new(v.clone(), a.clone(), PostSelection::State(other.clone()));
            let wv = weak_value(&s).unwrap();
            assert!((wv.re - ak).abs() < 1e-12 && wv.im.abs() < 1e-12);
            let s = WeakScenario::new(other.clone(), a.clone(), PostSelection::State(v));
            let wv = weak_value(&s).unwrap();
            assert!((wv.re - ak).abs() < 1e-12 && wv.im.abs() < 1e-12);
            assert_eq!(wv.re, wv.value.re);
            assert_eq!(wv.im, wv.value.im);
        }
    }

    #[test]
    fn three_box_middle_projector_is_minus_one() {
        // <b|Pi_2|psi> = -1/3, <b|psi> = 1/3
        let wv = weak_value(&three_box(path(1))).unwrap();
        assert!((wv.value - Complex64::new(-1.0, 0.0)).norm() < 1e-12);
        assert!((wv.ps_probability - 1.0 / 9.0).abs() < 1e-15);
        assert!(!wv.divergence_warning);
    }

    #[test]
    fn parts_agree_with_ratio_on_random_qubits() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..50 {
            let s = WeakScenario::new(
                random::state(&mut rng, 2),
                random::hermitian(&mut rng, 2),
                PostSelection::State(random::state(&mut rng, 2)),
            )
            .with_unitaries(random::unitary(&mut rng, 2), random::unitary(&mut rng, 2));
            let wv = weak_value(&s).unwrap();
            let (re, im) = weak_value_parts(&s).unwrap();
            assert!((re - wv.re).abs() < 1e-12, "{re} vs {}", wv.re);
            assert!((im - wv.im).abs() < 1e-12, "{im} vs {}", wv.im);
        }
    }

    #[test]
    fn orthogonal_and_nearly_orthogonal_post_selection() {
        let s = WeakScenario::new(
            StateVector::basis(2, 0).unwrap(),
            Operator::diag(&[1.0, -1.0]),
            PostSelection::State(StateVector::basis(2, 1).unwrap()),
        );
        assert!(matches!(weak_value(&s), Err(Error::PostSelectionImpossible { .. })));
        assert!(matches!(weak_value_parts(&s), Err(Error::PostSelectionImpossible { .. })));

        let eps: f64 = 1e-4;
        let pre = StateVector::from_real(&[(1.0 - eps * eps).sqrt(), eps]).unwrap();
        let x = Operator::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let s = WeakScenario::new(pre, x, PostSelection::State(StateVector::basis(2, 1).unwrap()));
        let wv = weak_value(&s).unwrap();
        assert!(wv.divergence_warning);
        assert!(wv.re > 1e3);
    }

    #[test]
    fn basis_post_selection_uses_the_requested_outcome() {
        let b = eig_hermitian(&Operator::diag(&[2.0, -1.0])).unwrap();
        let post = PostSelection::Basis {
            observable: b,
            outcome: 1,
        };
        // ascending order: outcome 1 is eigenvalue 2, i.e. |0>
        assert_eq!(post.state().unwrap(), &StateVector::basis(2, 0).unwrap());
        let bad = PostSelection::Basis {
            observable: SpectralDecomposition::computational(2),
            outcome: 5,
        };
        assert!(matches!(bad.state(), Err(Error::OutcomeIndex { .. })));
    }

    #[test]
    fn exact_protocol_at_zero_coupling() {
        let s = three_box(path(1));
        let (pointer, p) = weak_protocol_exact(&s).unwrap();
        assert!((p - 1.0 / 9.0).abs() < 1e-12);
        let phi = s.pointer.prepare().unwrap();
        assert!(pointer.max_abs_diff(&phi.scale(Complex64::new(1.0 / 3.0, 0.0))) < 1e-12);
    }

    #[test]
    fn exact_protocol_with_eigenstate_pre_is_a_translation() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let a = Operator::diag(&[-0.4, 0.3, 1.1]);
        let post = random::state(&mut rng, 3);
        for g in [0.05, 0.9, 4.0] {
            let s = WeakScenario::new(StateVector::basis(3, 2).unwrap(), a.clone(), PostSelection::State(post.clone()))
                .with_g(g);
            let (pointer, p) = weak_protocol_exact(&s).unwrap();
            let overlap = post.amplitudes()[2].conj();
            let expected = s.pointer.prepare().unwrap().translate(g * 1.1).unwrap().scale(overlap);
            assert!(pointer.max_abs_diff(&expected) < 1e-10);
            assert!((p - overlap.norm_sqr()).abs() < 1e-12);
        }
    }

    #[test]
    fn three_box_pointer_shift_is_minus_g() {
        let g = 0.01;
        let s = three_box(path(1)).with_g(g);
        let (pointer, _) = weak_protocol_exact(&s).unwrap();
        let m = pointer.moments().unwrap();
        assert!((m.mean_x + g).abs() < 5.0 * g * g);
        let baseline = s.pointer.prepare().unwrap();
        let (re, im) = extract_weak_value_from_pointer(&pointer, &baseline, g).unwrap();
        assert!((re + 1.0).abs() < 0.05);
        assert!(im.abs() < 1e-8);
    }

    #[test]
    fn prediction_for_real_weak_value_is_a_translation() {
        let g = 0.02;
        let s = three_box(path(1)).with_g(g);
        let pred = weak_pointer_prediction(&s).unwrap();
        let phi = s.pointer.prepare().unwrap();
        let expected = phi.translate(-g).unwrap().scale(Complex64::new(1.0 / 3.0, 0.0));
        assert!(pred.max_abs_diff(&expected) < 1e-12);
        let zero = weak_pointer_prediction(&three_box(path(1))).unwrap();
        assert!(zero.max_abs_diff(&phi.scale(Complex64::new(1.0 / 3.0, 0.0))) < 1e-12);
    }

    #[test]
    fn prediction_requires_weak_regime() {
        let s = three_box(path(1)).with_g(0.5);
        assert!(matches!(weak_pointer_prediction(&s), Err(Error::Contract(_))));
    }

    #[test]
    fn prediction_fidelity_bound_over_sweep() {
        // complex weak value: qubit with a relative phase between pre and post
        let pre = StateVector::new(vec![
            Complex64::new(0.8, 0.0),
            Complex64::new(0.0, 0.6),
        ])
        .unwrap();
        let post = StateVector::new(vec![
            Complex64::new(0.6, 0.0),
            Complex64::new(0.8, 0.0),
        ])
        .unwrap();
        let a = Operator::diag(&[1.0, -1.0]);
        let gs = [0.1, 0.05, 0.02, 0.01, 0.005];
        let deficits: Vec<f64> = gs
            .iter()
            .map(|&g| {
                let s = WeakScenario::new(pre.clone(), a.clone(), PostSelection::State(post.clone()))
                    .with_g(g);
                let (exact, _) = weak_protocol_exact(&s).unwrap();
                let pred = weak_pointer_prediction(&s).unwrap();
                fidelity_deficit(&pred, &exact).unwrap()
            })
            .collect();
        let c = deficits[0] / (gs[0] * gs[0]);
        let c = c.max(deficits[1] / (gs[1] * gs[1]));
        for (g, d) in gs.iter().zip(&deficits) {
            assert!(*d <= c * g * g * (1.0 + 1e-9), "g={g} deficit={d}");
        }
    }

    #[test]
    fn readout_of_an_eigenstate() {
        let g = 0.05;
        let a = Operator::diag(&[0.7, -0.2]);
        let s = WeakScenario::new(
            StateVector::basis(2, 0).unwrap(),
            a,
            PostSelection::State(StateVector::from_real(&[0.6, 0.8]).unwrap()),
        )
        .with_g(g);
        let (pointer, _) = weak_protocol_exact(&s).unwrap();
        let baseline = s.pointer.prepare().unwrap();
        let (re, im) = extract_weak_value_from_pointer(&pointer, &baseline, g).unwrap();
        let dx = s.pointer.grid.dx();
        assert!((re - 0.7).abs() < dx / (10.0 * g));
        assert!(im.abs() < 1e-8);
    }

    #[test]
    fn readout_of_identical_states_and_zero_coupling() {
        let phi = PointerSpec::default().prepare().unwrap();
        let (re, im) = extract_weak_value_from_pointer(&phi, &phi, 0.01).unwrap();
        assert_eq!((re, im), (0.0, 0.0));
        assert!(matches!(
            extract_weak_value_from_pointer(&phi, &phi, 0.0),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn imaginary_readout_tracks_im_weak_value() {
        let pre = StateVector::new(vec![Complex64::new(0.8, 0.0), Complex64::new(0.0, 0.6)]).unwrap();
        let post = StateVector::from_real(&[0.6, 0.8]).unwrap();
        let s0 = WeakScenario::new(pre, Operator::diag(&[1.0, -1.0]), PostSelection::State(post));
        let wv = weak_value(&s0).unwrap();
        assert!(wv.im.abs() > 0.1);
        let g = 1e-3;
        let s = s0.with_g(g);
        let (pointer, _) = weak_protocol_exact(&s).unwrap();
        let baseline = s.pointer.prepare().unwrap();
        let (re, im) = extract_weak_value_from_pointer(&pointer, &baseline, g).unwrap();
        assert!((re - wv.re).abs() < 1e-2);
        assert!((im - wv.im).abs() < 1e-2);
    }

    #[test]
    fn decomposition_with_b_equal_a() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let a = random::hermitian(&mut rng, 3);
        let spectrum = eig_hermitian(&a).unwrap();
        let psi = random::state(&mut rng, 3);
        let terms = expectation_decomposition(&psi, &a, &spectrum).unwrap();
        assert_eq!(terms.len(), 3);
        for t in &terms {
            assert!((t.weak_value.re - spectrum.eigenvalues()[t.outcome]).abs() < 1e-12);
            assert!(t.weak_value.im.abs() < 1e-12);
        }
    }

    #[test]
    fn decomposition_on_a_qubit() {
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        let a = Operator::diag(&[1.0, -1.0]);
        let x = eig_hermitian(&Operator::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()).unwrap();
        for _ in 0..20 {
            let psi = random::state(&mut rng, 2);
            let terms = expectation_decomposition(&psi, &a, &x).unwrap();
            let re: f64 = terms.iter().map(|t| t.probability * t.weak_value.re).sum();
            let im: f64 = terms.iter().map(|t| t.probability * t.weak_value.im).sum();
            assert!((re - expectation(&a, &psi).unwrap()).abs() < 1e-12);
            assert!(im.abs() < 1e-12);
        }
    }

    #[test]
    fn decomposition_skips_impossible_outcomes() {
        let psi = StateVector::basis(3, 0).unwrap();
        let terms =
            expectation_decomposition(&psi, &Operator::diag(&[1.0, 2.0, 3.0]), &SpectralDecomposition::computational(3))
                .unwrap();
        assert_eq!(terms.len(), 1);
        assert_eq!(terms[0].outcome, 0);
    }

    #[test]
    fn identical_prepost_pointer_cases() {
        let phi = PointerSpec::default().prepare().unwrap();
        let g = 0.02;
        let a = eig_hermitian(&Operator::diag(&[1.0, -1.0])).unwrap();
        let eigen = identical_prepost_pointer(&StateVector::basis(2, 1).unwrap(), &a, g, &phi).unwrap();
        // basis(2,1) has eigenvalue -1
        assert!(eigen.max_abs_diff(&phi.translate(-g).unwrap()) < 1e-12);

        let s = std::f64::consts::FRAC_1_SQRT_2;
        let plus = StateVector::from_real(&[s, s]).unwrap();
        let sym = identical_prepost_pointer(&plus, &a, g, &phi).unwrap();
        assert!(sym.moments().unwrap().mean_x.abs() < 5.0 * g * g);

        let mut rng = ChaCha8Rng::seed_from_u64(27);
        for _ in 0..5 {
            let psi = random::state(&mut rng, 3);
            let op = random::hermitian(&mut rng, 3);
            let spectrum = eig_hermitian(&op).unwrap();
            let g = 0.05 / spectrum.max_abs_eigenvalue();
            let out = identical_prepost_pointer(&psi, &spectrum, g, &phi).unwrap();
            let shift = out.moments().unwrap().mean_x;
            let ev = expectation(&op, &psi).unwrap();
            assert!((shift - g * ev).abs() < 5.0 * g * g);
        }
    }

    #[test]
    fn identical_prepost_matches_exact_protocol() {
        let mut rng = ChaCha8Rng::seed_from_u64(28);
        let psi = random::state(&mut rng, 3);
        let op = random::hermitian(&mut rng, 3);
        let g = 0.03;
        let s = WeakScenario::new(psi.clone(), op.clone(), PostSelection::State(psi.clone())).with_g(g);
        let (exact, _) = weak_protocol_exact(&s).unwrap();
        let direct = identical_prepost_pointer(
            &psi,
            &eig_hermitian(&op).unwrap(),
            g,
            &s.pointer.prepare().unwrap(),
        )
        .unwrap();
        assert!(exact.max_abs_diff(&direct) < 1e-12);
    }

    #[test]
    fn classical_analogue_cases() {
        let sampler = |rng: &mut SamplerRng| -> f64 { rng.sample(StandardNormal) };
        let all = classical_weak_analogue(sampler, |q| *q, |_| true, 20_000, 7).unwrap();
        assert_eq!(all.accepted, 20_000);
        // plain ensemble mean: independently recompute from the same stream
        let mut rng = SamplerRng::seed_from_u64(7);
        let direct: f64 = (0..20_000).map(|_| rng.sample::<f64, _>(StandardNormal)).sum::<f64>() / 20_000.0;
        assert!((all.estimate - direct).abs() < 1e-12);

        let constant = classical_weak_analogue(sampler, |_| 2.5, |q| *q > 0.3, 10_000, 8).unwrap();
        assert_eq!(constant.estimate, 2.5);
        assert_eq!(constant.std_error, 0.0);

        let again = classical_weak_analogue(sampler, |q| q * q, |q| *q < 0.0, 5_000, 9).unwrap();
        let again2 = classical_weak_analogue(sampler, |q| q * q, |q| *q < 0.0, 5_000, 9).unwrap();
        assert_eq!(again, again2);
    }

    #[test]
    fn classical_analogue_truncated_gaussian() {
        let sampler = |rng: &mut SamplerRng| -> f64 { rng.sample(StandardNormal) };
        let est = classical_weak_analogue(sampler, |q| *q, |q| *q > 0.0, 200_000, 11).unwrap();
        let oracle = (2.0 / std::f64::consts::PI).sqrt();
        assert!((est.estimate - oracle).abs() < 3.0 * est.std_error);
    }

    #[test]
    fn classical_analogue_empty_filter() {
        let sampler = |rng: &mut SamplerRng| -> f64 { rng.sample(StandardNormal) };
        assert!(matches!(
            classical_weak_analogue(sampler, |q| *q, |q| *q > 100.0, 1000, 1),
            Err(Error::EmptyFilter { accepted: 0, .. })
        ));
    }

    #[test]
    fn current_of_real_wavefunction_vanishes() {
        let phi = PointerSpec::default().prepare().unwrap();
        for i in [400, 512, 600] {
            let (re, ratio) = current_density_weak_value(&phi, i, 1.0).unwrap();
            assert!(re.abs() < 1e-10 && ratio.abs() < 1e-10);
        }
    }

    #[test]
    fn current_of_plane_wave() {
        let grid = GridSpec::default();
        for mode in [1i64, 3, -5] {
            let k = 2.0 * std::f64::consts::PI * mode as f64 / grid.extent();
            let wave = PointerState::plane_wave(grid, mode);
            for i in [0, 317, 1023] {
                let (re, ratio) = current_density_weak_value(&wave, i, 1.0).unwrap();
                assert!((re - k).abs() < 1e-8, "{re} vs {k}");
                assert!((ratio - k).abs() < 1e-8, "{ratio} vs {k}");
            }
        }
    }

    #[test]
    fn current_is_mass_independent_ratio() {
        let phi = PointerSpec::default().prepare().unwrap().boost(0.8);
        let (a1, b1) = current_density_weak_value(&phi, 530, 1.0).unwrap();
        let (a2, b2) = current_density_weak_value(&phi, 530, 7.0).unwrap();
        assert_eq!(a1, a2);
        assert!((b1 - b2).abs() < 1e-12);
    }

    #[test]
    fn current_at_a_node_is_undefined() {
        let phi = PointerSpec::default().prepare().unwrap();
        assert!(matches!(
            current_density_weak_value(&phi, 0, 1.0),
            Err(Error::UndefinedRatio { .. })
        ));
    }
}

//! Dense finite-dimensional complex linear algebra.
//!
//! States are column vectors of `Complex64`; operators are square row-major
//! matrices. Everything here is a value type: operations return new values
//! and never mutate their inputs.

use std::fmt;

use num_complex::Complex64;

use crate::{Error, Result};

/// Entrywise tolerance for `max |M - M^dagger|` on operators used as observables.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Entrywise tolerance for `max |U^dagger U - I|` on evolution operators.
pub const UNITARY_TOL: f64 = 1e-10;
/// Tolerance for `| <psi|psi> - 1 |` on states that must be normalized.
pub const NORMALIZED_TOL: f64 = 1e-12;
/// Two eigenvalues closer than this are treated as one degenerate level.
pub const DEGENERACY_TOL: f64 = 1e-10;
/// Default cap on the dimension of a tensor product.
pub const DEFAULT_MAX_JOINT_DIM: usize = 1 << 20;

const JACOBI_REL_TOL: f64 = 1e-14;
const JACOBI_MAX_SWEEPS: usize = 64;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Complex amplitude vector over a finite-dimensional Hilbert space.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amps: Vec<Complex64>,
}

impl StateVector {
    pub fn new(amps: Vec<Complex64>) -> Result<Self> {
        if amps.is_empty() {
            return Err(Error::Contract("state vector must have dimension >= 1".into()));
        }
        if amps.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Contract("state vector has non-finite amplitudes".into()));
        }
        Ok(Self { amps })
    }

    pub fn from_real(amps: &[f64]) -> Result<Self> {
        Self::new(amps.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    /// Computational basis vector `|k>`.
    pub fn basis(dim: usize, k: usize) -> Result<Self> {
        if k >= dim {
            return Err(Error::OutcomeIndex { index: k, count: dim });
        }
        let mut amps = vec![ZERO; dim];
        amps[k] = ONE;
        Self::new(amps)
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= NORMALIZED_TOL
    }

    pub(crate) fn require_normalized(&self, what: &str) -> Result<()> {
        if self.is_normalized() {
            Ok(())
        } else {
            Err(Error::Contract(format!(
                "{what} must be normalized (squared norm {})",
                self.norm_sqr()
            )))
        }
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::DegenerateState);
        }
        Ok(self.scale(Complex64::new(1.0 / n, 0.0)))
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            amps: self.amps.iter().map(|z| z * c).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        check_dim(self.dim(), other.dim())?;
        Ok(Self {
            amps: self.amps.iter().zip(&other.amps).map(|(a, b)| a + b).collect(),
        })
    }

    /// Hermitian inner product `<self|other>`, conjugate-linear in `self`.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        check_dim(self.dim(), other.dim())?;
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Tensor product `self ⊗ other`, with `self` as the slow (major) index.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        self.tensor_with_capacity(other, DEFAULT_MAX_JOINT_DIM)
    }

    pub fn tensor_with_capacity(&self, other: &Self, max_dim: usize) -> Result<Self> {
        let requested = self
            .dim()
            .checked_mul(other.dim())
            .ok_or(Error::Capacity { requested: usize::MAX, max: max_dim })?;
        if requested > max_dim {
            return Err(Error::Capacity { requested, max: max_dim });
        }
        let amps = self
            .amps
            .iter()
            .flat_map(|a| other.amps.iter().map(move |b| a * b))
            .collect();
        Ok(Self { amps })
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim(), other.dim(), "max_abs_diff on mismatched dims");
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

impl fmt::Display for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, z) in self.amps.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{:.6}{:+.6}i", z.re, z.im)?;
        }
        write!(f, "]")
    }
}

/// Square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    dim: usize,
    data: Vec<Complex64>,
}

impl Operator {
    pub fn new(dim: usize, data: Vec<Complex64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Contract("operator must have dimension >= 1".into()));
        }
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: data.len(),
            });
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Contract("operator has non-finite entries".into()));
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows(rows: Vec<Vec<Complex64>>) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            check_dim(dim, row.len())?;
            data.extend(row);
        }
        Self::new(dim, data)
    }

    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|&x| Complex64::new(x, 0.0)).collect())
                .collect(),
        )
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = ONE;
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let dim = values.len();
        let mut m = Self::zeros(dim);
        for (i, &v) in values.iter().enumerate() {
            m.data[i * dim + i] = Complex64::new(v, 0.0);
        }
        m
    }

    /// `|a><b|`.
    pub fn outer(a: &StateVector, b: &StateVector) -> Result<Self> {
        check_dim(a.dim(), b.dim())?;
        let dim = a.dim();
        let mut data = Vec::with_capacity(dim * dim);
        for x in a.amplitudes() {
            for y in b.amplitudes() {
                data.push(x * y.conj());
            }
        }
        Self::new(dim, data)
    }

    /// Rank-one projector onto the ray of `v` (normalizes `v` internally).
    pub fn projector(v: &StateVector) -> Result<Self> {
        let u = v.normalized()?;
        Self::outer(&u, &u)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.dim + col]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[Complex64]> {
        self.data.chunks(self.dim)
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        let mut data = vec![ZERO; n * n];
        for i in 0..n {
            for j in 0..n {
                data[j * n + i] = self.data[i * n + j].conj();
            }
        }
        Self { dim: n, data }
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        check_dim(self.dim, other.dim)?;
        let n = self.dim;
        let mut data = vec![ZERO; n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == ZERO {
                    continue;
                }
                for j in 0..n {
                    data[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        Ok(Self { dim: n, data })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        check_dim(self.dim, other.dim)?;
        Ok(Self {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        check_dim(self.dim, other.dim)?;
        Ok(Self {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|z| z * c).collect(),
        }
    }

    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        check_dim(self.dim, psi.dim())?;
        let amps = self
            .rows()
            .map(|row| row.iter().zip(psi.amplitudes()).map(|(m, v)| m * v).sum())
            .collect();
        Ok(StateVector { amps })
    }

    /// Matrix element `<a|M|b>`.
    pub fn sandwich(&self, a: &StateVector, b: &StateVector) -> Result<Complex64> {
        a.inner(&self.apply(b)?)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim, "max_abs_diff on mismatched dims");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `max |M - M^dagger|` entrywise.
    pub fn hermiticity_residual(&self) -> f64 {
        let n = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.data[i * n + j] - self.data[j * n + i].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermiticity_residual() <= HERMITIAN_TOL
    }

    /// `max |M^dagger M - I|` entrywise.
    pub fn unitarity_residual(&self) -> f64 {
        let n = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let mut acc = ZERO;
                for k in 0..n {
                    acc += self.data[k * n + i].conj() * self.data[k * n + j];
                }
                if i == j {
                    acc -= ONE;
                }
                worst = worst.max(acc.norm());
            }
        }
        worst
    }

    pub fn is_unitary(&self) -> bool {
        self.unitarity_residual() <= UNITARY_TOL
    }

    pub(crate) fn require_hermitian(&self, what: &str) -> Result<()> {
        let r = self.hermiticity_residual();
        if r <= HERMITIAN_TOL {
            Ok(())
        } else {
            Err(Error::Contract(format!("{what} is not Hermitian (residual {r:e})")))
        }
    }

    pub(crate) fn require_unitary(&self, what: &str) -> Result<()> {
        let r = self.unitarity_residual();
        if r <= UNITARY_TOL {
            Ok(())
        } else {
            Err(Error::Contract(format!("{what} is not unitary (residual {r:e})")))
        }
    }
}

/// Eigenvalues (ascending) and orthonormal eigenvectors of a Hermitian operator.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    eigenvectors: Vec<StateVector>,
    degenerate: bool,
}

/// One distinct eigenvalue together with the projector onto its eigenspace.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenProjector {
    pub eigenvalue: f64,
    pub projector: Operator,
    /// Indices into the eigenvector list spanning this eigenspace.
    pub members: Vec<usize>,
}

impl SpectralDecomposition {
    /// Builds a decomposition from a known orthonormal basis and eigenvalues.
    /// The pairs are sorted by eigenvalue (stable).
    pub fn from_basis(eigenvalues: Vec<f64>, eigenvectors: Vec<StateVector>) -> Result<Self> {
        if eigenvalues.is_empty() || eigenvalues.len() != eigenvectors.len() {
            return Err(Error::Contract(
                "need one eigenvector per eigenvalue and at least one pair".into(),
            ));
        }
        let dim = eigenvectors[0].dim();
        check_dim(dim, eigenvalues.len())?;
        for v in &eigenvectors {
            check_dim(dim, v.dim())?;
        }
        let mut pairs: Vec<(f64, StateVector)> = eigenvalues.into_iter().zip(eigenvectors).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (eigenvalues, eigenvectors): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        let out = Self {
            degenerate: has_degeneracy(&eigenvalues),
            eigenvalues,
            eigenvectors,
        };
        let r = out.orthonormality_residual();
        if r > 1e-10 {
            return Err(Error::Contract(format!(
                "basis is not orthonormal (residual {r:e})"
            )));
        }
        Ok(out)
    }

    /// The computational basis `|0>, |1>, ...` labelled by eigenvalues `0, 1, ...`.
    pub fn computational(dim: usize) -> Self {
        Self {
            eigenvalues: (0..dim).map(|k| k as f64).collect(),
            eigenvectors: (0..dim)
                .map(|k| StateVector::basis(dim, k).expect("k < dim"))
                .collect(),
            degenerate: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &[StateVector] {
        &self.eigenvectors
    }

    pub fn eigenvector(&self, k: usize) -> Result<&StateVector> {
        self.eigenvectors.get(k).ok_or(Error::OutcomeIndex {
            index: k,
            count: self.eigenvectors.len(),
        })
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn max_abs_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().map(|a| a.abs()).fold(0.0, f64::max)
    }

    /// `sum_k a_k |a_k><a_k|`.
    pub fn reconstruct(&self) -> Operator {
        let n = self.dim();
        let mut m = Operator::zeros(n);
        for (a, v) in self.eigenvalues.iter().zip(&self.eigenvectors) {
            let amps = v.amplitudes();
            for i in 0..n {
                for j in 0..n {
                    m.data[i * n + j] += amps[i] * amps[j].conj() * *a;
                }
            }
        }
        m
    }

    /// `max_{j,k} |<a_j|a_k> - delta_jk|`.
    pub fn orthonormality_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (j, a) in self.eigenvectors.iter().enumerate() {
            for (k, b) in self.eigenvectors.iter().enumerate() {
                let ip = a.inner(b).expect("same dim");
                let target = if j == k { ONE } else { ZERO };
                worst = worst.max((ip - target).norm());
            }
        }
        worst
    }

    /// Groups eigenvectors into eigenspaces; consecutive eigenvalues closer
    /// than [`DEGENERACY_TOL`] share a projector. The reported eigenvalue is
    /// the cluster mean.
    pub fn eigen_projectors(&self) -> Vec<EigenProjector> {
        let n = self.dim();
        let mut out: Vec<EigenProjector> = Vec::new();
        let mut start = 0;
        for k in 1..=n {
            if k == n || self.eigenvalues[k] - self.eigenvalues[k - 1] > DEGENERACY_TOL {
                let members: Vec<usize> = (start..k).collect();
                let mut projector = Operator::zeros(n);
                for &m in &members {
                    let p = Operator::outer(&self.eigenvectors[m], &self.eigenvectors[m])
                        .expect("same dim");
                    projector = projector.add(&p).expect("same dim");
                }
                let eigenvalue =
                    members.iter().map(|&m| self.eigenvalues[m]).sum::<f64>() / members.len() as f64;
                out.push(EigenProjector {
                    eigenvalue,
                    projector,
                    members,
                });
                start = k;
            }
        }
        out
    }
}

fn has_degeneracy(sorted: &[f64]) -> bool {
    sorted.windows(2).any(|w| (w[1] - w[0]).abs() <= DEGENERACY_TOL)
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// `a ⊗ b` in system-major order (`a`'s index varies slowest).
pub fn tensor(a: &StateVector, b: &StateVector) -> Result<StateVector> {
    a.tensor(b)
}

/// `<a|b>`.
pub fn inner(a: &StateVector, b: &StateVector) -> Result<Complex64> {
    a.inner(b)
}

/// `M |psi>`.
pub fn apply(m: &Operator, psi: &StateVector) -> Result<StateVector> {
    m.apply(psi)
}

/// `<psi|A|psi>` for Hermitian `A` and normalized `psi`.
pub fn expectation(a: &Operator, psi: &StateVector) -> Result<f64> {
    check_dim(a.dim(), psi.dim())?;
    a.require_hermitian("observable")?;
    psi.require_normalized("state")?;
    let z = a.sandwich(psi, psi)?;
    let tol = NORMALIZED_TOL * a.frobenius_norm().max(1.0);
    if z.im.abs() > tol {
        return Err(Error::Contract(format!(
            "expectation value has imaginary residue {:e}",
            z.im
        )));
    }
    Ok(z.re)
}

/// Eigendecomposition of a Hermitian operator by cyclic complex Jacobi
/// rotations.
///
/// Each rotation first removes the phase of the pivot `a_pq`, then applies the
/// real symmetric Jacobi rotation to the resulting real 2x2 block. Sweeps run
/// over `p < q` in row order until the off-diagonal Frobenius norm drops below
/// `1e-14 * ||M||_F`.
///
/// Eigenvalues come out ascending. Each eigenvector is rephased so that its
/// first non-negligible component is real and positive; eigenvectors within a
/// degenerate cluster are ordered by the index of that component.
pub fn eig_hermitian(m: &Operator) -> Result<SpectralDecomposition> {
    m.require_hermitian("operator passed to eig_hermitian")?;
    let n = m.dim();
    // exact Hermitian working copy
    let herm = m.add(&m.adjoint())?.scale(Complex64::new(0.5, 0.0));
    let mut a = herm.data;
    let mut v = Operator::identity(n).data;
    let scale = m.frobenius_norm();
    let threshold = JACOBI_REL_TOL * scale;

    let off_norm = |a: &[Complex64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[i * n + j].norm_sqr();
                }
            }
        }
        s.sqrt()
    };

    let mut sweeps = 0;
    loop {
        let off = off_norm(&a);
        if off <= threshold {
            break;
        }
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::NoConvergence {
                sweeps,
                residual: off,
            });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                let r = apq.norm();
                if r == 0.0 {
                    continue;
                }
                let phase = apq / r;
                let alpha = a[p * n + p].re;
                let gamma = a[q * n + q].re;
                let theta = (gamma - alpha) / (2.0 * r);
                let t = if theta == 0.0 {
                    1.0
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // G = diag(1, conj(phase)) * [[c, s], [-s, c]]
                let g_pp = Complex64::new(c, 0.0);
                let g_pq = Complex64::new(s, 0.0);
                let g_qp = phase.conj() * (-s);
                let g_qq = phase.conj() * c;

                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = akp * g_pp + akq * g_qp;
                    a[k * n + q] = akp * g_pq + akq * g_qq;
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = vkp * g_pp + vkq * g_qp;
                    v[k * n + q] = vkp * g_pq + vkq * g_qq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = g_pp.conj() * apk + g_qp.conj() * aqk;
                    a[q * n + k] = g_pq.conj() * apk + g_qq.conj() * aqk;
                }
                a[p * n + q] = ZERO;
                a[q * n + p] = ZERO;
                a[p * n + p].im = 0.0;
                a[q * n + q].im = 0.0;
            }
        }
    }

    let mut pairs: Vec<(f64, usize, StateVector)> = (0..n)
        .map(|k| {
            let col: Vec<Complex64> = (0..n).map(|i| v[i * n + k]).collect();
            let (lead, col) = canonical_phase(col);
            (a[k * n + k].re, lead, StateVector { amps: col })
        })
        .collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    // within degenerate clusters order by leading component index
    let mut start = 0;
    for k in 1..=n {
        if k == n || pairs[k].0 - pairs[k - 1].0 > DEGENERACY_TOL {
            pairs[start..k].sort_by_key(|p| p.1);
            start = k;
        }
    }
    let eigenvalues: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let degenerate = has_degeneracy(&eigenvalues);
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors: pairs.into_iter().map(|p| p.2).collect(),
        degenerate,
    })
}

/// Rotates the global phase so the first component with modulus above
/// `1e-10 * max` is real positive. Returns that component's index.
fn canonical_phase(mut col: Vec<Complex64>) -> (usize, Vec<Complex64>) {
    let max = col.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let lead = col
        .iter()
        .position(|z| z.norm() > 1e-10 * max)
        .unwrap_or(0);
    let z = col[lead];
    if z.norm() > 0.0 {
        let rot = z.conj() / z.norm();
        for c in &mut col {
            *c *= rot;
        }
        col[lead] = Complex64::new(col[lead].re, 0.0);
    }
    (lead, col)
}

/// Random states and operators for tests and property suites.
pub mod random {
    use num_complex::Complex64;
    use rand::Rng;
    use rand_distr::StandardNormal;

    use super::{Operator, StateVector};

    fn gaussian_complex<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    }

    /// Haar-distributed normalized state.
    pub fn state<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> StateVector {
        let v = StateVector::new((0..dim).map(|_| gaussian_complex(rng)).collect())
            .expect("dim >= 1");
        v.normalized().expect("nonzero with probability one")
    }

    /// Hermitian matrix with Gaussian entries (GUE-like).
    pub fn hermitian<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Operator {
        let g = Operator::new(dim, (0..dim * dim).map(|_| gaussian_complex(rng)).collect())
            .expect("square");
        g.add(&g.adjoint())
            .expect("same dim")
            .scale(Complex64::new(0.5, 0.0))
    }

    /// Unitary from modified Gram-Schmidt on Gaussian columns.
    pub fn unitary<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Operator {
        let mut cols: Vec<Vec<Complex64>> = Vec::with_capacity(dim);
        while cols.len() < dim {
            let mut v: Vec<Complex64> = (0..dim).map(|_| gaussian_complex(rng)).collect();
            for u in &cols {
                let ip: Complex64 = u.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                for (vi, ui) in v.iter_mut().zip(u) {
                    *vi -= ip * ui;
                }
            }
            let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if n < 1e-8 {
                continue;
            }
            cols.push(v.into_iter().map(|z| z / n).collect());
        }
        let mut data = vec![Complex64::new(0.0, 0.0); dim * dim];
        for (j, col) in cols.iter().enumerate() {
            for (i, z) in col.iter().enumerate() {
                data[i * dim + j] = *z;
            }
        }
        Operator::new(dim, data).expect("square")
    }
}

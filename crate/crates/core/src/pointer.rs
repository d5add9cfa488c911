//! One-dimensional quantum pointer on a periodic grid.
//!
//! The pointer coordinate is sampled at `x_i = -L/2 + i*dx`. Momentum-space
//! kernels (translation `exp(-isP)` and the general `exp(cP)`) are applied by
//! multiplying the discrete Fourier transform, so translations are exact on
//! the grid up to rounding. Wraparound is prevented by range guards instead.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::{Error, Result};

/// Maximum fraction of `|phi|^2` allowed within two grid points of an edge.
pub const LEAKAGE_TOL: f64 = 1e-12;
/// Tolerance on the squared norm of a state tagged normalized.
pub const POINTER_NORM_TOL: f64 = 1e-10;
/// Bound on `|Re c| * max|p|` for `exp(cP)`.
pub const EXP_WEIGHT_LIMIT: f64 = 30.0;

/// Periodic position grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    n_points: usize,
    extent: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            n_points: 1024,
            extent: 40.0,
        }
    }
}

impl GridSpec {
    pub fn new(n_points: usize, extent: f64) -> Result<Self> {
        if n_points < 8 || !n_points.is_power_of_two() {
            return Err(Error::Configuration(format!(
                "grid size {n_points} must be a power of two >= 8"
            )));
        }
        if !(extent.is_finite() && extent > 0.0) {
            return Err(Error::Configuration(format!(
                "grid extent {extent} must be positive and finite"
            )));
        }
        Ok(Self { n_points, extent })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn dx(&self) -> f64 {
        self.extent / self.n_points as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        -0.5 * self.extent + i as f64 * self.dx()
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.x(i)).collect()
    }

    /// Grid index nearest to `x` (clamped to the grid).
    pub fn index_of(&self, x: f64) -> usize {
        let i = ((x + 0.5 * self.extent) / self.dx()).round();
        (i.max(0.0) as usize).min(self.n_points - 1)
    }

    /// Momentum of DFT bin `j`, with the bin number wrapped to `(-n/2, n/2]`.
    pub fn momentum(&self, j: usize) -> f64 {
        let n = self.n_points;
        let wrapped = if j <= n / 2 {
            j as f64
        } else {
            j as f64 - n as f64
        };
        2.0 * PI * wrapped / self.extent
    }

    pub fn momenta(&self) -> Vec<f64> {
        (0..self.n_points).map(|j| self.momentum(j)).collect()
    }

    pub fn max_momentum(&self) -> f64 {
        PI * self.n_points as f64 / self.extent
    }
}

/// Whether a pointer state carries unit norm or an explicit weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormTag {
    Normalized,
    /// Squared norm `sum |phi|^2 dx`; for post-selected pointers this is the
    /// post-selection probability.
    Unnormalized { squared_norm: f64 },
}

/// Sampled pointer wavefunction.
#[derive(Debug, Clone, PartialEq)]
pub struct PointerState {
    grid: GridSpec,
    values: Vec<Complex64>,
    tag: NormTag,
}

/// Position and momentum moments of the renormalized density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean_x: f64,
    pub var_x: f64,
    pub mean_p: f64,
    pub var_p: f64,
}

impl PointerState {
    /// Wraps samples, tagging them normalized when the squared norm is within
    /// [`POINTER_NORM_TOL`] of one.
    pub fn new(grid: GridSpec, values: Vec<Complex64>) -> Result<Self> {
        let state = Self::unnormalized(grid, values)?;
        if (state.squared_norm() - 1.0).abs() <= POINTER_NORM_TOL {
            Ok(Self {
                tag: NormTag::Normalized,
                ..state
            })
        } else {
            Ok(state)
        }
    }

    /// Wraps samples that carry a physical weight; always tagged unnormalized.
    pub fn unnormalized(grid: GridSpec, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.n_points {
            return Err(Error::DimensionMismatch {
                expected: grid.n_points,
                found: values.len(),
            });
        }
        if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Range("pointer state has non-finite samples".into()));
        }
        let squared_norm = squared_norm_of(&values, grid.dx());
        Ok(Self {
            grid,
            values,
            tag: NormTag::Unnormalized { squared_norm },
        })
    }

    /// Keeps the kind of tag of `like`, refreshing the recorded weight.
    fn with_tag_of(like: &Self, values: Vec<Complex64>) -> Self {
        let tag = match like.tag {
            NormTag::Normalized => NormTag::Normalized,
            NormTag::Unnormalized { .. } => NormTag::Unnormalized {
                squared_norm: squared_norm_of(&values, like.grid.dx()),
            },
        };
        Self {
            grid: like.grid,
            values,
            tag,
        }
    }

    /// Normalized Gaussian `exp(-(x-x0)^2 / (4 sigma^2))`, so that the
    /// position variance is `sigma^2`.
    pub fn gaussian(grid: GridSpec, x0: f64, sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma >= 4.0 * grid.dx()) {
            return Err(Error::Configuration(format!(
                "pointer width {sigma} is below the resolution guard 4*dx = {}",
                4.0 * grid.dx()
            )));
        }
        if !(x0.is_finite() && x0.abs() <= 0.25 * grid.extent) {
            return Err(Error::Configuration(format!(
                "pointer centre {x0} lies outside the central half of the grid"
            )));
        }
        let raw: Vec<Complex64> = grid
            .positions()
            .into_iter()
            .map(|x| Complex64::new((-(x - x0).powi(2) / (4.0 * sigma * sigma)).exp(), 0.0))
            .collect();
        let n = squared_norm_of(&raw, grid.dx()).sqrt();
        let values = raw.into_iter().map(|z| z / n).collect();
        let state = Self {
            grid,
            values,
            tag: NormTag::Normalized,
        };
        let leak = state.boundary_leakage();
        if leak > LEAKAGE_TOL {
            return Err(Error::Configuration(format!(
                "Gaussian of width {sigma} leaks {leak:e} of its mass to the grid edges"
            )));
        }
        Ok(state)
    }

    /// Normalized plane wave `exp(i k x)` with `k = 2 pi mode / L`.
    pub fn plane_wave(grid: GridSpec, mode: i64) -> Self {
        let k = 2.0 * PI * mode as f64 / grid.extent;
        let amp = 1.0 / grid.extent.sqrt();
        let values = grid
            .positions()
            .into_iter()
            .map(|x| Complex64::from_polar(amp, k * x))
            .collect();
        Self {
            grid,
            values,
            tag: NormTag::Normalized,
        }
    }

    /// Multiplies by `exp(i k x)` (a momentum boost by `k`).
    pub fn boost(&self, k: f64) -> Self {
        let values = self
            .values
            .iter()
            .zip(self.grid.positions())
            .map(|(z, x)| z * Complex64::from_polar(1.0, k * x))
            .collect();
        Self::with_tag_of(self, values)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn tag(&self) -> NormTag {
        self.tag
    }

    pub fn squared_norm(&self) -> f64 {
        squared_norm_of(&self.values, self.grid.dx())
    }

    /// Multiplies every sample by `c`; the result is always tagged
    /// unnormalized.
    pub fn scale(&self, c: Complex64) -> Self {
        let values: Vec<Complex64> = self.values.iter().map(|z| z * c).collect();
        Self {
            grid: self.grid,
            tag: NormTag::Unnormalized {
                squared_norm: squared_norm_of(&values, self.grid.dx()),
            },
            values,
        }
    }

    pub fn renormalized(&self) -> Result<Self> {
        let n = self.squared_norm().sqrt();
        if n.is_nan() || n <= 0.0 {
            return Err(Error::DegenerateState);
        }
        Ok(Self {
            grid: self.grid,
            values: self.values.iter().map(|z| z / n).collect(),
            tag: NormTag::Normalized,
        })
    }

    /// Fraction of `|phi|^2` within two grid points of either edge.
    pub fn boundary_leakage(&self) -> f64 {
        let total: f64 = self.values.iter().map(|z| z.norm_sqr()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let n = self.values.len();
        let edge: f64 = self.values[..2]
            .iter()
            .chain(&self.values[n - 2..])
            .map(|z| z.norm_sqr())
            .sum();
        edge / total
    }

    /// `<self|other> = sum conj(self) * other * dx`.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        self.check_same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            * self.grid.dx())
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub(crate) fn check_same_grid(&self, other: &Self) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::Contract("pointer states live on different grids".into()))
        }
    }

    /// Raw DFT of the samples (bin `j` carries momentum `grid.momentum(j)`).
    pub fn momentum_amplitudes(&self) -> Vec<Complex64> {
        let mut buf = self.values.clone();
        let mut planner = FftPlanner::new();
        planner.plan_fft_forward(buf.len()).process(&mut buf);
        buf
    }

    /// Applies a diagonal momentum-space kernel `f(p)`.
    fn spectral_multiply(&self, f: impl Fn(f64) -> Complex64) -> Vec<Complex64> {
        let n = self.values.len();
        let mut planner = FftPlanner::new();
        let mut buf = self.values.clone();
        planner.plan_fft_forward(n).process(&mut buf);
        for (j, z) in buf.iter_mut().enumerate() {
            *z *= f(self.grid.momentum(j));
        }
        planner.plan_fft_inverse(n).process(&mut buf);
        let inv = 1.0 / n as f64;
        buf.iter_mut().for_each(|z| *z *= inv);
        buf
    }

    /// `P phi` evaluated spectrally.
    pub fn apply_momentum(&self) -> Vec<Complex64> {
        self.spectral_multiply(|p| Complex64::new(p, 0.0))
    }

    /// `exp(-i s P) phi`: shifts the wavefunction by `+s`.
    pub fn translate(&self, s: f64) -> Result<Self> {
        if !(s.is_finite() && s.abs() < 0.25 * self.grid.extent) {
            return Err(Error::Range(format!(
                "translation {s} violates the wraparound guard |s| < L/4 = {}",
                0.25 * self.grid.extent
            )));
        }
        if s == 0.0 {
            return Ok(self.clone());
        }
        let values = self.spectral_multiply(|p| Complex64::from_polar(1.0, -s * p));
        let out = Self::with_tag_of(self, values);
        let leak = out.boundary_leakage();
        if leak > LEAKAGE_TOL {
            return Err(Error::Range(format!(
                "translation by {s} pushes {leak:e} of the mass onto the grid edges"
            )));
        }
        Ok(out)
    }

    /// `exp(c P) phi` for complex `c`. A nonzero real part reweights momentum
    /// components, so the result is tagged unnormalized.
    pub fn apply_exp_cp(&self, c: Complex64) -> Result<Self> {
        let weight = c.re.abs() * self.grid.max_momentum();
        if weight.is_nan() || weight > EXP_WEIGHT_LIMIT {
            return Err(Error::Range(format!(
                "exp(cP) weight |Re c|*max|p| = {weight} exceeds {EXP_WEIGHT_LIMIT}"
            )));
        }
        if c == Complex64::new(0.0, 0.0) {
            return Ok(self.clone());
        }
        let values = self.spectral_multiply(|p| (c * p).exp());
        if c.re != 0.0 {
            Self::unnormalized(self.grid, values)
        } else {
            Ok(Self::with_tag_of(self, values))
        }
    }

    pub fn moments(&self) -> Result<Moments> {
        let dx = self.grid.dx();
        let weights: Vec<f64> = self.values.iter().map(|z| z.norm_sqr() * dx).collect();
        let total: f64 = weights.iter().sum();
        if total.is_nan() || total <= 0.0 {
            return Err(Error::DegenerateState);
        }
        let xs = self.grid.positions();
        let (mean_x, var_x) = weighted_mean_var(&xs, &weights, total);

        let spectrum = self.momentum_amplitudes();
        let pweights: Vec<f64> = spectrum.iter().map(|z| z.norm_sqr()).collect();
        let ptotal: f64 = pweights.iter().sum();
        let (mean_p, var_p) = weighted_mean_var(&self.grid.momenta(), &pweights, ptotal);
        Ok(Moments {
            mean_x,
            var_x,
            mean_p,
            var_p,
        })
    }

    /// Writes `x, re, im, abs2` rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| Error::Configuration(format!("csv write failed: {e}"));
        w.write_record(["x", "re", "im", "abs2"]).map_err(io)?;
        for (x, z) in self.grid.positions().into_iter().zip(&self.values) {
            w.write_record([
                format_f64(x),
                format_f64(z.re),
                format_f64(z.im),
                format_f64(z.norm_sqr()),
            ])
            .map_err(io)?;
        }
        w.flush()
            .map_err(|e| Error::Configuration(format!("csv flush failed: {e}")))?;
        Ok(())
    }
}

fn squared_norm_of(values: &[Complex64], dx: f64) -> f64 {
    values.iter().map(|z| z.norm_sqr()).sum::<f64>() * dx
}

fn weighted_mean_var(xs: &[f64], w: &[f64], total: f64) -> (f64, f64) {
    let mean = xs.iter().zip(w).map(|(x, w)| x * w).sum::<f64>() / total;
    let var = xs
        .iter()
        .zip(w)
        .map(|(x, w)| (x - mean).powi(2) * w)
        .sum::<f64>()
        / total;
    (mean, var)
}

/// 17 significant digits in scientific notation.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// `|<a|b>|^2 / (||a||^2 ||b||^2)`.
pub fn fidelity(a: &PointerState, b: &PointerState) -> Result<f64> {
    let na = a.squared_norm();
    let nb = b.squared_norm();
    if !(na > 0.0 && nb > 0.0) {
        return Err(Error::DegenerateState);
    }
    Ok(a.inner(b)?.norm_sqr() / (na * nb))
}

/// `1 - fidelity(a, b)`, evaluated as the squared norm of the component of
/// the normalized `b` orthogonal to the normalized `a`. This stays accurate
/// far below the `1e-16` floor of the naive subtraction.
pub fn fidelity_deficit(a: &PointerState, b: &PointerState) -> Result<f64> {
    a.check_same_grid(b)?;
    let a = a.renormalized()?;
    let b = b.renormalized()?;
    let overlap = a.inner(&b)?;
    let dx = a.grid.dx();
    Ok(a.values
        .iter()
        .zip(&b.values)
        .map(|(u, v)| (v - overlap * u).norm_sqr())
        .sum::<f64>()
        * dx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> GridSpec {
        GridSpec::default()
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(1000, 40.0).is_err());
        assert!(GridSpec::new(1024, 0.0).is_err());
        let g = GridSpec::new(16, 8.0).unwrap();
        assert_eq!(g.dx(), 0.5);
        assert_eq!(g.x(0), -4.0);
        // bin n/2 carries +n/2, bin n/2+1 carries -(n/2-1)
        assert!((g.momentum(8) - 2.0 * PI * 8.0 / 8.0).abs() < 1e-15);
        assert!((g.momentum(9) + 2.0 * PI * 7.0 / 8.0).abs() < 1e-15);
        assert_eq!(g.max_momentum(), g.momentum(8));
    }

    #[test]
    fn default_gaussian_moments() {
        let g = grid();
        let phi = PointerState::gaussian(g, 0.0, 1.0).unwrap();
        assert_eq!(phi.tag(), NormTag::Normalized);
        let m = phi.moments().unwrap();
        assert!(m.mean_x.abs() < g.dx() / 10.0);
        assert!((m.var_x - 1.0).abs() < 0.01);
        // analytic Fourier pair: var_p = 1/(4 sigma^2)
        assert!((m.var_p - 0.25).abs() < 0.0025);
        assert!(m.mean_p.abs() < 1e-10);
    }

    #[test]
    fn gaussian_centre_follows_x0() {
        let g = grid();
        for x0 in [2.0, 3.0, -4.5] {
            let m = PointerState::gaussian(g, x0, 1.0).unwrap().moments().unwrap();
            assert!((m.mean_x - x0).abs() < g.dx() / 10.0);
        }
        let m = PointerState::gaussian(g, 0.0, 1.5).unwrap().moments().unwrap();
        assert!((m.var_p - 1.0 / (4.0 * 2.25)).abs() < 0.01 / (4.0 * 2.25));
    }

    #[test]
    fn gaussian_guards() {
        let g = grid();
        assert!(matches!(
            PointerState::gaussian(g, 0.0, 0.1),
            Err(Error::Configuration(_))
        ));
        assert!(matches!(
            PointerState::gaussian(g, 10.5, 1.0),
            Err(Error::Configuration(_))
        ));
        // too wide: mass reaches the edges
        assert!(matches!(
            PointerState::gaussian(g, 0.0, 5.0),
            Err(Error::Configuration(_))
        ));
    }

    #[test]
    fn dft_round_trip() {
        let phi = PointerState::gaussian(grid(), 1.0, 1.0).unwrap().boost(0.7);
        let back = phi.spectral_multiply(|_| Complex64::new(1.0, 0.0));
        let worst = back
            .iter()
            .zip(phi.values())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(worst < 1e-13, "{worst}");
    }

    #[test]
    fn zero_translation_is_identity() {
        let phi = PointerState::gaussian(grid(), 0.5, 1.0).unwrap();
        assert!(phi.translate(0.0).unwrap().max_abs_diff(&phi) <= 1e-14);
    }

    #[test]
    fn translation_composes_and_moves_mean() {
        let g = grid();
        let phi = PointerState::gaussian(g, 0.0, 1.0).unwrap();
        let a = phi.translate(1.3).unwrap().translate(-0.45).unwrap();
        let b = phi.translate(0.85).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-12);

        let m0 = phi.moments().unwrap();
        let s = 2.345;
        let t = phi.translate(s).unwrap();
        let m1 = t.moments().unwrap();
        assert!((m1.mean_x - m0.mean_x - s).abs() < g.dx() / 10.0);
        assert!((m1.var_x - m0.var_x).abs() < 1e-10);
        assert!((t.squared_norm() - 1.0).abs() < 1e-12);
        assert_eq!(t.tag(), NormTag::Normalized);
    }

    #[test]
    fn translation_guards() {
        let phi = PointerState::gaussian(grid(), 0.0, 1.0).unwrap();
        assert!(matches!(phi.translate(10.0), Err(Error::Range(_))));
        // a legal shift that still drives the packet into the edge
        let edge = PointerState::gaussian(grid(), 10.0, 1.0).unwrap();
        assert!(matches!(edge.translate(9.5), Err(Error::Range(_))));
    }

    #[test]
    fn exp_cp_special_cases() {
        let phi = PointerState::gaussian(grid(), 0.0, 1.0).unwrap();
        assert_eq!(phi.apply_exp_cp(Complex64::new(0.0, 0.0)).unwrap(), phi);
        let s = 0.731;
        let via_exp = phi.apply_exp_cp(Complex64::new(0.0, -s)).unwrap();
        assert!(via_exp.max_abs_diff(&phi.translate(s).unwrap()) < 1e-12);
    }

    #[test]
    fn real_exp_cp_shifts_momentum() {
        let phi = PointerState::gaussian(grid(), 0.0, 1.0).unwrap();
        let base = phi.moments().unwrap();
        for c in [0.05, -0.2, 0.3] {
            let out = phi.apply_exp_cp(Complex64::new(c, 0.0)).unwrap();
            assert!(matches!(out.tag(), NormTag::Unnormalized { .. }));
            let m = out.moments().unwrap();
            let expected = 2.0 * c * base.var_p;
            assert!(((m.mean_p - base.mean_p) - expected).abs() < 0.01 * expected.abs());
        }
    }

    #[test]
    fn exp_cp_inverse_and_guard() {
        let phi = PointerState::gaussian(grid(), 0.5, 1.0).unwrap();
        // |Re c| * max|p| = 8: the inverse amplifies rounding by exp(8)
        let c = Complex64::new(0.1, -0.4);
        let round = phi.apply_exp_cp(c).unwrap().apply_exp_cp(-c).unwrap();
        assert!(round.max_abs_diff(&phi) < 1e-10);
        assert!(matches!(
            phi.apply_exp_cp(Complex64::new(1.0, 0.0)),
            Err(Error::Range(_))
        ));
    }

    #[test]
    fn moments_of_degenerate_state() {
        let zero = PointerState::new(grid(), vec![Complex64::new(0.0, 0.0); 1024]).unwrap();
        assert_eq!(zero.moments(), Err(Error::DegenerateState));
    }

    #[test]
    fn fidelity_deficit_matches_naive_at_large_separation() {
        let phi = PointerState::gaussian(grid(), 0.0, 1.0).unwrap();
        let shifted = phi.translate(0.5).unwrap();
        let naive = 1.0 - fidelity(&phi, &shifted).unwrap();
        let robust = fidelity_deficit(&phi, &shifted).unwrap();
        assert!((naive - robust).abs() < 1e-14);
        // analytic: 1 - exp(-s^2 / (4 sigma^2))
        assert!((robust - (1.0 - (-0.0625f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn csv_export_has_header_and_rows() {
        let phi = PointerState::gaussian(GridSpec::new(64, 16.0).unwrap(), 0.0, 1.0).unwrap();
        let mut out = Vec::new();
        phi.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("x,re,im,abs2"));
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first.len(), 4);
        assert_eq!(first[0], "-8.0000000000000000e0");
        assert_eq!(text.lines().count(), 65);
    }
}

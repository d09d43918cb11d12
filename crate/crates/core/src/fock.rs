//! Truncated-Fock-space linear algebra: state construction, beam-splitter
//! unitaries, partial traces and von Neumann entropies.
//!
//! Everything here works on a per-mode photon-number cutoff. States whose
//! discarded tail mass exceeds the cutoff tolerance are rejected with
//! [`Error::CutoffInsufficient`] instead of being silently truncated.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Default maximum discarded probability mass for truncated constructions.
pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-6;

/// Density matrices must be Hermitian within this elementwise bound.
pub const HERMITICITY_TOL: f64 = 1e-12;
/// Eigenvalues below this are an error (the matrix is not positive enough).
pub const EIGENVALUE_NEG_TOL: f64 = 1e-10;
/// Eigenvalues in `[-EIGENVALUE_NEG_TOL, EIGENVALUE_CLAMP]` are treated as 0.
pub const EIGENVALUE_CLAMP: f64 = 1e-12;

const LOG2: f64 = std::f64::consts::LN_2;

/// Per-mode truncation: Fock levels `0..dim` with a bound on discarded mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FockCutoff {
    dim: usize,
    tail_tolerance: f64,
}

impl FockCutoff {
    pub fn new(dim: usize, tail_tolerance: f64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Domain(format!("cutoff dim must be >= 2, got {dim}")));
        }
        if !(tail_tolerance > 0.0 && tail_tolerance < 1.0) {
            return Err(Error::Domain(format!(
                "tail tolerance must lie in (0, 1), got {tail_tolerance}"
            )));
        }
        Ok(Self { dim, tail_tolerance })
    }

    pub fn with_dim(dim: usize) -> Result<Self> {
        Self::new(dim, DEFAULT_TAIL_TOLERANCE)
    }

    /// Default dimension policy for a protocol point with constellation radius
    /// `z` and channel thermal photons `nbar`:
    /// `max(ceil(2 z^2) + 6, ceil(10 (nbar + 1)), 10)`, topped up where the
    /// heuristic would leave more than 1% of the tail tolerance in the
    /// discarded Poisson / geometric mass (the heuristic under-provisions for
    /// mean photon numbers around 1.5-6).
    pub fn for_protocol(z: f64, nbar: f64) -> Self {
        let from_radius = (2.0 * z * z).ceil() as usize + 6;
        let from_thermal = (10.0 * (nbar + 1.0)).ceil() as usize;
        let tol = DEFAULT_TAIL_TOLERANCE * 1e-2;
        let from_coherent_tail = required_coherent_dim(z * z, tol);
        let from_tmsv_tail = required_tmsv_dim(nbar, tol);
        let dim = from_radius
            .max(from_thermal)
            .max(from_coherent_tail)
            .max(from_tmsv_tail)
            .max(10);
        Self {
            dim,
            tail_tolerance: DEFAULT_TAIL_TOLERANCE,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tail_tolerance(&self) -> f64 {
        self.tail_tolerance
    }

    /// Same tolerance, `extra` additional Fock levels. Used by the automatic
    /// convergence guard on top-level rates.
    pub fn widened(&self, extra: usize) -> Self {
        Self {
            dim: self.dim + extra,
            tail_tolerance: self.tail_tolerance,
        }
    }
}

/// A pure state over one or more truncated modes, row-major over modes.
#[derive(Debug, Clone)]
pub struct StateVector {
    mode_dims: Vec<usize>,
    amps: CVector,
}

impl StateVector {
    pub fn new(mode_dims: Vec<usize>, amps: CVector) -> Result<Self> {
        let total: usize = mode_dims.iter().product();
        if mode_dims.is_empty() || mode_dims.contains(&0) {
            return Err(Error::Usage("mode dims must be nonempty positive".into()));
        }
        if amps.len() != total {
            return Err(Error::Usage(format!(
                "amplitude length {} does not match mode dims product {total}",
                amps.len()
            )));
        }
        Ok(Self { mode_dims, amps })
    }

    pub fn mode_dims(&self) -> &[usize] {
        &self.mode_dims
    }

    pub fn n_modes(&self) -> usize {
        self.mode_dims.len()
    }

    pub fn total_dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.norm()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amps.dotc(&other.amps)
    }

    /// Tensor product; `self`'s modes come first.
    pub fn tensor(&self, other: &StateVector) -> StateVector {
        let mut dims = self.mode_dims.clone();
        dims.extend_from_slice(&other.mode_dims);
        let mut amps = CVector::zeros(self.total_dim() * other.total_dim());
        for (i, a) in self.amps.iter().enumerate() {
            for (j, b) in other.amps.iter().enumerate() {
                amps[i * other.total_dim() + j] = a * b;
            }
        }
        StateVector { mode_dims: dims, amps }
    }

    /// Expectation of the number operator on one mode.
    pub fn mean_photons(&self, mode: usize) -> f64 {
        assert!(mode < self.n_modes());
        let strides = strides(&self.mode_dims);
        self.amps
            .iter()
            .enumerate()
            .map(|(g, a)| {
                let digit = (g / strides[mode]) % self.mode_dims[mode];
                digit as f64 * a.norm_sqr()
            })
            .sum()
    }
}

/// A (generally mixed) state over one or more truncated modes.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    mode_dims: Vec<usize>,
    mat: CMatrix,
}

impl DensityMatrix {
    pub fn new(mode_dims: Vec<usize>, mat: CMatrix) -> Result<Self> {
        let total: usize = mode_dims.iter().product();
        if mat.nrows() != total || mat.ncols() != total {
            return Err(Error::Usage(format!(
                "matrix is {}x{}, mode dims require {total}x{total}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        Ok(Self { mode_dims, mat })
    }

    pub fn from_pure(psi: &StateVector) -> Self {
        let n = psi.total_dim();
        let mat = CMatrix::from_fn(n, n, |i, j| psi.amps[i] * psi.amps[j].conj());
        Self {
            mode_dims: psi.mode_dims.clone(),
            mat,
        }
    }

    /// `rho = sum_k w_k |k><k|` from weighted kets (kets need not be orthogonal).
    pub fn from_mixture(weights: &[f64], kets: &[CVector], mode_dims: Vec<usize>) -> Result<Self> {
        if weights.len() != kets.len() || kets.is_empty() {
            return Err(Error::Usage("mixture needs matching nonempty weights/kets".into()));
        }
        let n = kets[0].len();
        let mut mat = CMatrix::zeros(n, n);
        for (w, k) in weights.iter().zip(kets) {
            for i in 0..n {
                for j in 0..n {
                    mat[(i, j)] += C64::from(*w) * k[i] * k[j].conj();
                }
            }
        }
        Self::new(mode_dims, mat)
    }

    pub fn mode_dims(&self) -> &[usize] {
        &self.mode_dims
    }

    pub fn total_dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn trace(&self) -> C64 {
        self.mat.trace()
    }

    /// Max elementwise deviation from Hermiticity.
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.mat.nrows();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                let d = (self.mat[(i, j)] - self.mat[(j, i)].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    pub fn mean_photons(&self, mode: usize) -> f64 {
        assert!(mode < self.mode_dims.len());
        let strides = strides(&self.mode_dims);
        (0..self.total_dim())
            .map(|g| {
                let digit = (g / strides[mode]) % self.mode_dims[mode];
                digit as f64 * self.mat[(g, g)].re
            })
            .sum()
    }
}

/// A two-mode unitary in the truncated number basis.
#[derive(Debug, Clone)]
pub struct UnitaryMatrix {
    mode_dims: [usize; 2],
    mat: CMatrix,
}

impl UnitaryMatrix {
    pub fn mode_dims(&self) -> [usize; 2] {
        self.mode_dims
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    /// `max |(U^dag U - I)_{ij}|`.
    pub fn unitarity_error(&self) -> f64 {
        let n = self.mat.nrows();
        let p = self.mat.adjoint() * &self.mat;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { C64::from(1.0) } else { C64::from(0.0) };
                worst = worst.max((p[(i, j)] - target).norm());
            }
        }
        worst
    }

    /// Apply to the two leading modes of `psi` (identity on the rest).
    pub fn apply_to_leading(&self, psi: &StateVector) -> Result<StateVector> {
        if psi.n_modes() < 2
            || psi.mode_dims[0] != self.mode_dims[0]
            || psi.mode_dims[1] != self.mode_dims[1]
        {
            return Err(Error::Usage(
                "state's leading two mode dims must match the unitary".into(),
            ));
        }
        let front = self.mode_dims[0] * self.mode_dims[1];
        let rest = psi.total_dim() / front;
        // View amplitudes as a (front x rest) matrix, row-major.
        let m = CMatrix::from_fn(front, rest, |i, r| psi.amps[i * rest + r]);
        let out = &self.mat * m;
        let mut amps = CVector::zeros(psi.total_dim());
        for i in 0..front {
            for r in 0..rest {
                amps[i * rest + r] = out[(i, r)];
            }
        }
        Ok(StateVector {
            mode_dims: psi.mode_dims.clone(),
            amps,
        })
    }
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; dims.len()];
    for m in (0..dims.len().saturating_sub(1)).rev() {
        s[m] = s[m + 1] * dims[m + 1];
    }
    s
}

/// Smallest Fock dimension holding a coherent state of `|a|^2 = abs2` photons
/// with Poisson tail mass at most `tol`.
pub fn required_coherent_dim(abs2: f64, tol: f64) -> usize {
    if abs2 <= 0.0 {
        return 2;
    }
    let mut pmf = (-abs2).exp();
    let mut tail = 1.0 - pmf;
    let mut dim = 1usize;
    while tail > tol && dim < 100_000 {
        pmf *= abs2 / dim as f64;
        tail -= pmf;
        dim += 1;
    }
    dim.max(2)
}

/// Smallest Fock dimension holding a TMSV arm of `nbar` thermal photons with
/// geometric tail mass at most `tol`.
pub fn required_tmsv_dim(nbar: f64, tol: f64) -> usize {
    let lambda = tmsv_lambda(nbar);
    if lambda <= 0.0 {
        return 2;
    }
    ((tol.ln() / (2.0 * lambda.ln())).ceil() as usize).max(2)
}

/// Raw (unnormalised) truncated coherent coefficients `e^{-|a|^2/2} a^n / sqrt(n!)`.
///
/// These are the exact first `dim` components of the infinite Fock expansion;
/// no renormalisation is applied. Heterodyne projections must use this form.
pub fn coherent_amplitudes_raw(a: C64, dim: usize) -> CVector {
    let mut v = CVector::zeros(dim);
    let mut c = C64::from((-a.norm_sqr() / 2.0).exp());
    for n in 0..dim {
        if n > 0 {
            c *= a / C64::from((n as f64).sqrt());
        }
        v[n] = c;
    }
    v
}

/// Truncated coherent state `|a>`, renormalised to unit norm.
///
/// Returns the state and the raw pre-normalisation norm. Errors when the
/// discarded Poisson tail exceeds the cutoff tolerance.
pub fn coherent_vector(a: C64, cutoff: &FockCutoff) -> Result<(StateVector, f64)> {
    let raw = coherent_amplitudes_raw(a, cutoff.dim());
    let raw_norm = raw.norm();
    let discarded = 1.0 - raw_norm * raw_norm;
    if discarded > cutoff.tail_tolerance() {
        return Err(Error::CutoffInsufficient {
            dim: cutoff.dim(),
            required_dim: required_coherent_dim(a.norm_sqr(), cutoff.tail_tolerance()),
            discarded,
            tolerance: cutoff.tail_tolerance(),
        });
    }
    let amps = raw / C64::from(raw_norm);
    Ok((
        StateVector {
            mode_dims: vec![cutoff.dim()],
            amps,
        },
        raw_norm,
    ))
}

/// Two-mode squeezed vacuum with `nbar` thermal photons per arm:
/// `sqrt(1 - lambda^2) sum_n lambda^n |n,n>`, `lambda = tanh(arcosh(2 nbar + 1)/2)`.
///
/// The `+lambda` phase convention is used; the alternating-sign variant differs
/// by a local phase rotation and has identical spectra everywhere downstream.
pub fn tmsv_vector(nbar: f64, cutoff: &FockCutoff) -> Result<StateVector> {
    if nbar < 0.0 {
        return Err(Error::Domain(format!("nbar must be >= 0, got {nbar}")));
    }
    let lambda = tmsv_lambda(nbar);
    let d = cutoff.dim();
    // Geometric tail beyond the cutoff.
    let discarded = lambda.powi(2 * d as i32);
    if discarded > cutoff.tail_tolerance() {
        return Err(Error::CutoffInsufficient {
            dim: d,
            required_dim: required_tmsv_dim(nbar, cutoff.tail_tolerance()),
            discarded,
            tolerance: cutoff.tail_tolerance(),
        });
    }
    let mut amps = CVector::zeros(d * d);
    let scale = (1.0 - lambda * lambda).sqrt();
    for n in 0..d {
        amps[n * d + n] = C64::from(scale * lambda.powi(n as i32));
    }
    let norm = amps.norm();
    amps /= C64::from(norm);
    Ok(StateVector {
        mode_dims: vec![d, d],
        amps,
    })
}

/// `lambda = tanh(arcosh(2 nbar + 1)/2) = sqrt(nbar / (nbar + 1))`.
pub fn tmsv_lambda(nbar: f64) -> f64 {
    if nbar <= 0.0 {
        0.0
    } else {
        (0.5 * (2.0 * nbar + 1.0).acosh()).tanh()
    }
}

/// Beam splitter `U = exp[theta (a_A^dag a_E - a_A a_E^dag)]`, `theta = arccos(sqrt(tau))`,
/// acting on two modes of equal dimension.
///
/// Built block-by-block over total photon number, so `[U, n_A + n_E] = 0`
/// exactly and unitarity holds on the whole truncated space. With this
/// generator sign, `U |a>|0> = |sqrt(tau) a> |-sqrt(1-tau) a>`.
pub fn beam_splitter_unitary(tau: f64, cutoff: &FockCutoff) -> Result<UnitaryMatrix> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::Domain(format!(
            "transmissivity must lie in (0, 1], got {tau}"
        )));
    }
    let d = cutoff.dim();
    let theta = tau.sqrt().min(1.0).acos();
    let mut mat = CMatrix::zeros(d * d, d * d);
    for s in 0..=(2 * (d - 1)) {
        // Basis |k, s-k> with k in [lo, hi].
        let lo = s.saturating_sub(d - 1);
        let hi = s.min(d - 1);
        let m = hi - lo + 1;
        if m == 1 {
            mat[(lo * d + (s - lo), lo * d + (s - lo))] = C64::from(1.0);
            continue;
        }
        // Antisymmetric generator block; exponentiate via the Hermitian i*G.
        let mut h = CMatrix::zeros(m, m);
        for i in 0..m - 1 {
            let k = lo + i;
            let g = theta * (((k + 1) * (s - k)) as f64).sqrt();
            h[(i + 1, i)] = C64::new(0.0, g);
            h[(i, i + 1)] = C64::new(0.0, -g);
        }
        let eig = nalgebra::SymmetricEigen::new(h);
        let phases = CVector::from_iterator(
            m,
            eig.eigenvalues.iter().map(|&l| C64::new(0.0, -l).exp()),
        );
        let block =
            &eig.eigenvectors * CMatrix::from_diagonal(&phases) * eig.eigenvectors.adjoint();
        for i in 0..m {
            for j in 0..m {
                let ki = lo + i;
                let kj = lo + j;
                mat[(ki * d + (s - ki), kj * d + (s - kj))] = block[(i, j)];
            }
        }
    }
    Ok(UnitaryMatrix {
        mode_dims: [d, d],
        mat,
    })
}

fn keep_complement(n_modes: usize, keep: &[usize]) -> Result<Vec<usize>> {
    if keep.is_empty() {
        return Err(Error::Usage("partial trace: keep set is empty".into()));
    }
    if keep.windows(2).any(|w| w[1] <= w[0]) || keep.iter().any(|&m| m >= n_modes) {
        return Err(Error::Usage(
            "partial trace: keep must be strictly increasing valid mode indices".into(),
        ));
    }
    let traced: Vec<usize> = (0..n_modes).filter(|m| !keep.contains(m)).collect();
    if traced.is_empty() {
        return Err(Error::Usage("partial trace: keep set is the full set".into()));
    }
    Ok(traced)
}

/// Reduced state of a pure state on the kept modes, computed by reshaping the
/// vector and contracting; the global density matrix is never materialised.
pub fn partial_trace_pure(psi: &StateVector, keep: &[usize]) -> Result<DensityMatrix> {
    let traced = keep_complement(psi.n_modes(), keep)?;
    let dims = psi.mode_dims();
    let st = strides(dims);
    let keep_total: usize = keep.iter().map(|&m| dims[m]).product();
    let trace_total: usize = traced.iter().map(|&m| dims[m]).product();

    let global_index = |mut k: usize, mut t: usize| -> usize {
        let mut g = 0usize;
        for (pos, &m) in keep.iter().enumerate().rev() {
            let _ = pos;
            g += (k % dims[m]) * st[m];
            k /= dims[m];
        }
        for &m in traced.iter().rev() {
            g += (t % dims[m]) * st[m];
            t /= dims[m];
        }
        g
    };

    // rho = M M^dag with M[k, t] = psi[(k, t)].
    let m = CMatrix::from_fn(keep_total, trace_total, |k, t| psi.amps[global_index(k, t)]);
    let rho = &m * m.adjoint();
    DensityMatrix::new(keep.iter().map(|&m| dims[m]).collect(), rho)
}

/// Partial trace of a density matrix over the modes not in `keep`.
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    let traced = keep_complement(rho.mode_dims().len(), keep)?;
    let dims = rho.mode_dims();
    let st = strides(dims);
    let keep_total: usize = keep.iter().map(|&m| dims[m]).product();
    let trace_total: usize = traced.iter().map(|&m| dims[m]).product();

    let global_index = |mut k: usize, mut t: usize| -> usize {
        let mut g = 0usize;
        for &m in keep.iter().rev() {
            g += (k % dims[m]) * st[m];
            k /= dims[m];
        }
        for &m in traced.iter().rev() {
            g += (t % dims[m]) * st[m];
            t /= dims[m];
        }
        g
    };

    let mut out = CMatrix::zeros(keep_total, keep_total);
    for i in 0..keep_total {
        for j in 0..keep_total {
            let mut acc = C64::from(0.0);
            for t in 0..trace_total {
                acc += rho.mat[(global_index(i, t), global_index(j, t))];
            }
            out[(i, j)] = acc;
        }
    }
    DensityMatrix::new(keep.iter().map(|&m| dims[m]).collect(), out)
}

/// Eigenvalues of a (nearly) Hermitian matrix; the input is symmetrised first.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let h = (m + m.adjoint()).scale(0.5);
    let eig = nalgebra::SymmetricEigen::new(h);
    eig.eigenvalues.iter().copied().collect()
}

/// `-sum n_j log2 n_j` with the clamping policy: eigenvalues below
/// [`EIGENVALUE_CLAMP`] count as zero, below `-`[`EIGENVALUE_NEG_TOL`] are an error.
pub fn entropy_from_eigenvalues(eigs: &[f64]) -> Result<f64> {
    let mut acc = 0.0f64;
    for &l in eigs {
        if l < -EIGENVALUE_NEG_TOL {
            return Err(Error::InvalidState(format!(
                "eigenvalue {l:.3e} below negativity tolerance"
            )));
        }
        if l > EIGENVALUE_CLAMP {
            acc -= l * l.ln() / LOG2;
        }
    }
    // Round-off on near-pure spectra can leave a tiny negative residue.
    Ok(if acc < 0.0 { 0.0 } else { acc })
}

/// Von Neumann entropy in bits.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> Result<f64> {
    let herm = rho.hermiticity_error();
    if herm > HERMITICITY_TOL {
        return Err(Error::InvalidState(format!(
            "matrix deviates from Hermiticity by {herm:.3e}"
        )));
    }
    entropy_from_eigenvalues(&hermitian_eigenvalues(&rho.mat))
}

/// Entropy of `rho = sum_j c_j c_j^dag` computed from the spectrum of the
/// component Gram matrix `H_ij = c_i^dag c_j`, which shares the nonzero
/// eigenvalues of `rho`. Weights are folded into the component scaling.
pub fn mixture_entropy_from_components(cols: &[CVector]) -> Result<f64> {
    let m = cols.len();
    let h = CMatrix::from_fn(m, m, |i, j| cols[i].dotc(&cols[j]));
    entropy_from_eigenvalues(&hermitian_eigenvalues(&h))
}

/// Bosonic entropy function `g(x) = (x+1) log2(x+1) - x log2 x`; the entropy
/// of a thermal state with mean photon number `x`.
pub fn bosonic_entropy(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        (x + 1.0) * (x + 1.0).log2() - x * x.log2()
    }
}

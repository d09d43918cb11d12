//! The alphabet `C(z, N)`: N coherent states of radius `z` at uniform phases
//! `2 pi k / N` with uniform priors, its overlap (Gram) matrices, the
//! Gram-Schmidt orthonormal basis spanned by the states, average states and
//! their entropies, and the `N -> infinity` continuous limit.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fock::{
    coherent_vector, required_coherent_dim, von_neumann_entropy, CMatrix, CVector,
    DensityMatrix, FockCutoff, C64,
};

/// Below this pivot the Gram-Schmidt recursion is treated as numerically
/// singular and entropy computation falls back to the Fock representation.
const SINGULAR_PIVOT: f64 = 1e-7;

/// Alphabet size: a finite constellation or the continuous ring limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlphabetSize {
    Finite(usize),
    Infinite,
}

impl std::fmt::Display for AlphabetSize {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AlphabetSize::Finite(n) => write!(f, "{n}"),
            AlphabetSize::Infinite => write!(f, "inf"),
        }
    }
}

/// A finite constellation: radius `z` (square root of the mean photon
/// number), `N` letters, uniform priors `1/N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    z: f64,
    n: usize,
}

impl Constellation {
    pub fn new(z: f64, n: usize) -> Result<Self> {
        if z < 0.0 {
            return Err(Error::Domain(format!("radius must be >= 0, got {z}")));
        }
        if n == 0 {
            return Err(Error::Domain("alphabet size must be >= 1".into()));
        }
        Ok(Self { z, n })
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn prior(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// `a_k = z e^{i 2 pi k / N}`.
    pub fn amplitude(&self, k: usize) -> C64 {
        assert!(k < self.n);
        let phi = 2.0 * std::f64::consts::PI * k as f64 / self.n as f64;
        C64::from_polar(self.z, phi)
    }

    pub fn amplitudes(&self) -> Vec<C64> {
        (0..self.n).map(|k| self.amplitude(k)).collect()
    }
}

/// Build a constellation; `size` must be finite here (the continuous limit is
/// served by [`continuous_limit_state`] / [`source_entropy`]).
pub fn build_constellation(z: f64, size: AlphabetSize) -> Result<Constellation> {
    match size {
        AlphabetSize::Finite(n) => Constellation::new(z, n),
        AlphabetSize::Infinite => Err(Error::Usage(
            "infinite alphabets have no explicit amplitude list; use the continuous-limit state".into(),
        )),
    }
}

/// Overlap matrix `V_ij = <s a_i | s a_j>` of the constellation scaled by `s`.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    n: usize,
    scale: f64,
    mat: CMatrix,
}

impl GramMatrix {
    pub fn order(&self) -> usize {
        self.n
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }
}

/// `V_ij = exp[s^2 z^2 (e^{i 2 pi (j - i)/N} - 1)]`.
pub fn overlap_matrix(c: &Constellation, scale: f64) -> GramMatrix {
    let n = c.n();
    let w = scale * scale * c.z() * c.z();
    let mat = CMatrix::from_fn(n, n, |i, j| {
        let phi = 2.0 * std::f64::consts::PI * (j as f64 - i as f64) / n as f64;
        (C64::from_polar(1.0, phi) - C64::from(1.0)).scale(w).exp()
    });
    GramMatrix { n, scale, mat }
}

/// Row `k` holds the expansion `|a_k> = sum_i M_ki |i>` in the orthonormal
/// basis produced by Gram-Schmidt over `|a_0>, |a_1>, ...`, so
/// `M_ki = <i | a_k>` and `M M^dag` reproduces the transposed Gram matrix.
#[derive(Debug, Clone)]
pub struct GramSchmidtBasis {
    mat: CMatrix,
}

impl GramSchmidtBasis {
    pub fn order(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }
}

/// Gram-Schmidt recursion on the overlap matrix:
/// `M_k0 = V_0k`, `M_ki = (V_ik - sum_{j<i} M_ij^* M_kj) / M_ii`,
/// `M_kk = sqrt(1 - sum_{i<k} |M_ki|^2)`.
pub fn gram_schmidt_coefficients(v: &GramMatrix) -> Result<GramSchmidtBasis> {
    let n = v.n;
    let vm = &v.mat;
    let mut m = CMatrix::zeros(n, n);
    m[(0, 0)] = C64::from(1.0);
    for k in 1..n {
        m[(k, 0)] = vm[(0, k)];
        for i in 1..k {
            let mut acc = vm[(i, k)];
            for j in 0..i {
                acc -= m[(i, j)].conj() * m[(k, j)];
            }
            m[(k, i)] = acc / m[(i, i)];
        }
        let used: f64 = (0..k).map(|i| m[(k, i)].norm_sqr()).sum();
        let residual = 1.0 - used;
        if residual < -1e-10 {
            return Err(Error::InconsistentGram(format!(
                "row {k} residual norm^2 = {residual:.3e}"
            )));
        }
        let pivot = residual.max(0.0).sqrt();
        // Dividing by a vanishing pivot later would amplify round-off; callers
        // fall back to the Fock representation in that regime.
        if k + 1 < n && pivot < SINGULAR_PIVOT {
            return Err(Error::SingularGram { pivot: k, value: pivot });
        }
        m[(k, k)] = C64::from(pivot);
    }
    Ok(GramSchmidtBasis { mat: m })
}

/// Average state `(1/N) sum_k |a_k><a_k|` of the scaled constellation,
/// expressed in the Gram-Schmidt basis (order-N matrix).
pub fn average_state(c: &Constellation, scale: f64) -> Result<DensityMatrix> {
    let v = overlap_matrix(c, scale);
    let gs = gram_schmidt_coefficients(&v)?;
    let n = c.n();
    let m = gs.matrix();
    let w = 1.0 / n as f64;
    let rho = CMatrix::from_fn(n, n, |i, j| {
        let mut acc = C64::from(0.0);
        for k in 0..n {
            acc += m[(k, i)] * m[(k, j)].conj();
        }
        acc.scale(w)
    });
    DensityMatrix::new(vec![n], rho)
}

/// Average state of the scaled constellation built directly in the truncated
/// Fock basis. Independent of the Gram-Schmidt route; also the fallback when
/// the Gram matrix is numerically singular (small `s z`).
pub fn average_state_fock(
    c: &Constellation,
    scale: f64,
    cutoff: &FockCutoff,
) -> Result<DensityMatrix> {
    let n = c.n();
    let kets: Vec<CVector> = (0..n)
        .map(|k| {
            let (v, _) = coherent_vector(c.amplitude(k).scale(scale), cutoff)?;
            Ok(v.amplitudes().clone())
        })
        .collect::<Result<_>>()?;
    let weights = vec![c.prior(); n];
    DensityMatrix::from_mixture(&weights, &kets, vec![cutoff.dim()])
}

/// `N -> infinity` ring state: diagonal with Poisson(z^2) weights
/// `e^{-z^2} z^{2n} / n!`, renormalised over the cutoff.
pub fn continuous_limit_state(z: f64, cutoff: &FockCutoff) -> Result<DensityMatrix> {
    if z < 0.0 {
        return Err(Error::Domain(format!("radius must be >= 0, got {z}")));
    }
    let lam = z * z;
    let d = cutoff.dim();
    let mut weights = vec![0.0f64; d];
    let mut pmf = (-lam).exp();
    let mut captured = 0.0;
    for (n, w) in weights.iter_mut().enumerate() {
        if n > 0 {
            pmf *= lam / n as f64;
        }
        *w = pmf;
        captured += pmf;
    }
    let discarded = 1.0 - captured;
    if discarded > cutoff.tail_tolerance() {
        return Err(Error::CutoffInsufficient {
            dim: d,
            required_dim: required_coherent_dim(lam, cutoff.tail_tolerance()),
            discarded,
            tolerance: cutoff.tail_tolerance(),
        });
    }
    let diag = CVector::from_iterator(d, weights.iter().map(|&w| C64::from(w / captured)));
    DensityMatrix::new(vec![d], DMatrix::from_diagonal(&diag))
}

/// Entropy of the average state of the constellation scaled by `s`, in bits.
///
/// Uses the Gram-Schmidt route; when that is numerically singular (nearly
/// coincident states at small `s z`) it recomputes in the truncated Fock basis.
pub fn scaled_mixture_entropy(c: &Constellation, scale: f64) -> Result<f64> {
    if c.n() == 1 {
        return Ok(0.0);
    }
    match average_state(c, scale) {
        Ok(rho) => von_neumann_entropy(&rho),
        Err(Error::SingularGram { .. }) => {
            let sz = (scale * c.z()).abs();
            let cutoff = FockCutoff::for_protocol(sz, 0.0);
            let rho = average_state_fock(c, scale, &cutoff)?;
            von_neumann_entropy(&rho)
        }
        Err(e) => Err(e),
    }
}

/// `S(rho_A)` of the source: Gram-Schmidt route for finite alphabets, the
/// Poisson-diagonal ring state for the continuous limit.
pub fn source_entropy(z: f64, size: AlphabetSize) -> Result<f64> {
    match size {
        AlphabetSize::Finite(n) => scaled_mixture_entropy(&Constellation::new(z, n)?, 1.0),
        AlphabetSize::Infinite => {
            let dim = (required_coherent_dim(z * z, 1e-10) + 4).max(10);
            let cutoff = FockCutoff::new(dim, 1e-9)?;
            let rho = continuous_limit_state(z, &cutoff)?;
            von_neumann_entropy(&rho)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::hermitian_eigenvalues;
    use num_complex::Complex64;

    #[test]
    fn constellation_amplitudes_and_priors() {
        let c = Constellation::new(1.0, 4).unwrap();
        let expect = [
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(0.0, -1.0),
        ];
        for (k, e) in expect.iter().enumerate() {
            assert!((c.amplitude(k) - e).norm() < 1e-14);
        }
        assert_eq!(c.prior(), 0.25);

        let z0 = Constellation::new(0.0, 4).unwrap();
        assert!(z0.amplitudes().iter().all(|a| a.norm() == 0.0));

        assert!(Constellation::new(-0.1, 4).is_err());
        assert!(Constellation::new(1.0, 0).is_err());
        assert!(build_constellation(1.0, AlphabetSize::Infinite).is_err());
    }

    #[test]
    fn overlap_matrix_matches_first_principles() {
        // General formula <a|b> = exp[-(|a|^2 + |b|^2 - 2 a^* b)/2] on raw
        // amplitudes, including a global phase that must not matter.
        let c = Constellation::new(0.8, 5).unwrap();
        let scale = 0.9;
        let v = overlap_matrix(&c, scale);
        let phase = Complex64::from_polar(1.0, 0.37);
        for i in 0..5 {
            for j in 0..5 {
                let ai = c.amplitude(i).scale(scale) * phase;
                let aj = c.amplitude(j).scale(scale) * phase;
                let direct = (-(ai.norm_sqr() + aj.norm_sqr()) / 2.0
                    + ai.conj() * aj)
                    .exp();
                assert!((v.matrix()[(i, j)] - direct).norm() < 1e-14);
            }
        }
        for i in 0..5 {
            assert!((v.matrix()[(i, i)] - Complex64::from(1.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn overlap_two_letter_value() {
        // z = 0.5, N = 2: V_01 = exp(2 * 0.25 * (cos(pi) - 1)/2) = e^{-0.5}.
        let c = Constellation::new(0.5, 2).unwrap();
        let v = overlap_matrix(&c, 1.0);
        assert!((v.matrix()[(0, 1)].re - (-0.5f64).exp()).abs() < 1e-14);
        assert!(v.matrix()[(0, 1)].im.abs() < 1e-14);
    }

    #[test]
    fn overlap_scaled_for_bob() {
        // scale sqrt(0.5) puts tau z^2 = 0.5 in the exponent.
        let c = Constellation::new(1.0, 4).unwrap();
        let v = overlap_matrix(&c, 0.5f64.sqrt());
        let expect = (Complex64::new(0.0, 1.0) - Complex64::from(1.0)).scale(0.5).exp();
        assert!((v.matrix()[(0, 1)] - expect).norm() < 1e-14);
    }

    #[test]
    fn circulance() {
        for (z, n, s) in [(0.4, 3, 1.0), (1.3, 6, 0.7), (2.0, 8, 0.3)] {
            let c = Constellation::new(z, n).unwrap();
            let v = overlap_matrix(&c, s);
            for i in 0..n {
                for j in 0..n {
                    let shifted = v.matrix()[(0, (j + n - i) % n)];
                    assert!((v.matrix()[(i, j)] - shifted).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn gram_schmidt_identity_for_orthogonal_states() {
        // Widely separated letters: V is numerically the identity.
        let c = Constellation::new(40.0, 3).unwrap();
        let v = overlap_matrix(&c, 1.0);
        let m = gram_schmidt_coefficients(&v).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((m.matrix()[(i, j)] - Complex64::from(target)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn gram_schmidt_reconstruction() {
        // (M M^dag)_{ki} = <a_i|a_k> = V_ik, i.e. M M^dag = V^T.
        let c = Constellation::new(0.8, 5).unwrap();
        let v = overlap_matrix(&c, 0.9);
        let gs = gram_schmidt_coefficients(&v).unwrap();
        let rec = gs.matrix() * gs.matrix().adjoint();
        let diff = (&rec - v.matrix().transpose()).norm();
        assert!(diff < 1e-10, "reconstruction error {diff}");
        assert!((gs.matrix()[(0, 0)] - Complex64::from(1.0)).norm() < 1e-14);
        // Lower-triangular with real nonnegative diagonal and unit row norms.
        for k in 0..5 {
            for i in (k + 1)..5 {
                assert_eq!(gs.matrix()[(k, i)], Complex64::from(0.0));
            }
            assert!(gs.matrix()[(k, k)].im == 0.0 && gs.matrix()[(k, k)].re >= 0.0);
            let row: f64 = (0..5).map(|i| gs.matrix()[(k, i)].norm_sqr()).sum();
            assert!((row - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn gram_schmidt_singular_at_tiny_radius() {
        let c = Constellation::new(1e-9, 4).unwrap();
        let v = overlap_matrix(&c, 1.0);
        match gram_schmidt_coefficients(&v) {
            Err(Error::SingularGram { .. }) => {}
            other => panic!("expected singular Gram, got {other:?}"),
        }
    }

    #[test]
    fn average_state_trace_and_saturation() {
        let c = Constellation::new(3.0, 4).unwrap();
        let rho = average_state(&c, 1.0).unwrap();
        assert!((rho.trace().re - 1.0).abs() < 1e-12);
        assert!(rho.trace().im.abs() < 1e-14);
        let s = von_neumann_entropy(&rho).unwrap();
        assert!((s - 2.0).abs() < 1e-2, "entropy {s}");
    }

    #[test]
    fn gs_entropy_matches_fock_oracle() {
        let c = Constellation::new(0.5, 4).unwrap();
        let s_gs = von_neumann_entropy(&average_state(&c, 1.0).unwrap()).unwrap();
        let cutoff = FockCutoff::for_protocol(0.5, 0.0);
        let s_fock =
            von_neumann_entropy(&average_state_fock(&c, 1.0, &cutoff).unwrap()).unwrap();
        assert!((s_gs - s_fock).abs() < 1e-6, "{s_gs} vs {s_fock}");
    }

    #[test]
    fn fock_selection_rule() {
        // <n|rho|m> = 0 unless n = m (mod N).
        let c = Constellation::new(0.7, 3).unwrap();
        let cutoff = FockCutoff::with_dim(12).unwrap();
        let rho = average_state_fock(&c, 1.0, &cutoff).unwrap();
        for n in 0..12 {
            for m in 0..12 {
                if n % 3 != m % 3 {
                    assert!(rho.matrix()[(n, m)].norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn continuous_limit_basics() {
        let cutoff = FockCutoff::with_dim(10).unwrap();
        let vac = continuous_limit_state(0.0, &cutoff).unwrap();
        assert!((vac.matrix()[(0, 0)].re - 1.0).abs() < 1e-14);

        // Eigenvalues are the Poisson weights up to tail renormalisation.
        let cutoff = FockCutoff::new(24, 1e-9).unwrap();
        let rho = continuous_limit_state(1.0, &cutoff).unwrap();
        let mut pmf = (-1.0f64).exp();
        for n in 0..6 {
            if n > 0 {
                pmf /= n as f64;
            }
            assert!((rho.matrix()[(n, n)].re - pmf).abs() < 1e-8);
        }

        // Entropy equals the Poisson Shannon entropy (direct sum oracle).
        let s = von_neumann_entropy(&rho).unwrap();
        let mut oracle = 0.0;
        let mut p = (-1.0f64).exp();
        for n in 0..40 {
            if n > 0 {
                p /= n as f64;
            }
            if p > 0.0 {
                oracle -= p * p.log2();
            }
        }
        assert!((s - oracle).abs() < 1e-6, "{s} vs {oracle}");
        assert!((s - 1.88).abs() < 0.05);

        let tiny = FockCutoff::new(3, 1e-10).unwrap();
        assert!(continuous_limit_state(2.0, &tiny).is_err());
    }

    #[test]
    fn source_entropy_routes_and_limits() {
        assert_eq!(source_entropy(0.0, AlphabetSize::Finite(4)).unwrap(), 0.0);
        let s4 = source_entropy(5.0, AlphabetSize::Finite(4)).unwrap();
        assert!((s4 - 2.0).abs() < 1e-3);
        let s2 = source_entropy(5.0, AlphabetSize::Finite(2)).unwrap();
        assert!((s2 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn source_entropy_monotone_and_bounded_by_limit() {
        for &n in &[2usize, 4, 8] {
            let mut last = -1.0;
            let mut z = 0.0;
            while z <= 1.5 + 1e-9 {
                let s = source_entropy(z, AlphabetSize::Finite(n)).unwrap();
                let s_inf = source_entropy(z, AlphabetSize::Infinite).unwrap();
                assert!(s >= last - 1e-9, "N={n} z={z}: {s} < {last}");
                assert!(s <= s_inf + 1e-6, "N={n} z={z}: {s} > {s_inf}");
                assert!(s <= (n as f64).log2() + 1e-9);
                last = s;
                z += 0.25;
            }
        }
    }

    #[test]
    fn average_state_spectrum_equals_gram_spectrum() {
        // Independent route: eigenvalues of rho_A equal those of V/N.
        let c = Constellation::new(1.2, 4).unwrap();
        let rho = average_state(&c, 1.0).unwrap();
        let mut a = hermitian_eigenvalues(rho.matrix());
        let v = overlap_matrix(&c, 1.0);
        let mut b = hermitian_eigenvalues(&v.matrix().scale(0.25));
        a.sort_by(|x, y| x.partial_cmp(y).unwrap());
        b.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-10);
        }
    }
}

//! Entangling-cloner channel simulation and measurement statistics.
//!
//! A letter `|a_k>` on mode A is mixed on a beam splitter of transmissivity
//! `tau` with one arm of Eve's TMSV (modes E, e); the output modes are
//! `(B, E', e)`. Everything downstream works with the purified tripartite
//! vector: Eve's reduced and outcome-conditioned states are obtained by
//! contracting it, never by forming the d^3-dimensional global density matrix.

use crate::constellation::Constellation;
use crate::error::{Error, Result};
use crate::fock::{
    beam_splitter_unitary, coherent_amplitudes_raw, coherent_vector, entropy_from_eigenvalues,
    hermitian_eigenvalues, partial_trace_pure, tmsv_lambda, tmsv_vector, CMatrix, CVector,
    DensityMatrix, FockCutoff, StateVector, C64,
};

const PI: f64 = std::f64::consts::PI;

/// How excess noise `epsilon` (shot-noise units) maps to the cloner's mean
/// thermal photon number.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpsilonConvention {
    /// `nbar = tau epsilon / (2 (1 - tau))`: noise referred to the channel input.
    InputReferred,
    /// `nbar = epsilon / (2 (1 - tau))`: noise referred to the channel output.
    OutputReferred,
}

/// Thermal-loss channel parameters and derived quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    tau: f64,
    nbar: f64,
}

impl ChannelParams {
    pub fn new(tau: f64, nbar: f64) -> Result<Self> {
        if !(tau > 0.0 && tau <= 1.0) {
            return Err(Error::Domain(format!(
                "transmissivity must lie in (0, 1], got {tau}"
            )));
        }
        if !nbar.is_finite() || nbar < 0.0 {
            return Err(Error::Domain(format!("nbar must be >= 0, got {nbar}")));
        }
        Ok(Self { tau, nbar })
    }

    pub fn pure_loss(tau: f64) -> Result<Self> {
        Self::new(tau, 0.0)
    }

    /// Build from excess noise in shot-noise units. The entangling-cloner
    /// dilation needs `tau < 1` whenever `epsilon > 0` (the required thermal
    /// occupation diverges at unit transmissivity).
    pub fn from_epsilon(tau: f64, epsilon: f64, convention: EpsilonConvention) -> Result<Self> {
        if epsilon < 0.0 {
            return Err(Error::Domain(format!("epsilon must be >= 0, got {epsilon}")));
        }
        if epsilon == 0.0 {
            return Self::new(tau, 0.0);
        }
        if tau >= 1.0 {
            return Err(Error::Domain(
                "epsilon > 0 requires tau < 1 (cloner thermal occupation diverges)".into(),
            ));
        }
        let nbar = match convention {
            EpsilonConvention::InputReferred => tau * epsilon / (2.0 * (1.0 - tau)),
            EpsilonConvention::OutputReferred => epsilon / (2.0 * (1.0 - tau)),
        };
        Self::new(tau, nbar)
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn nbar(&self) -> f64 {
        self.nbar
    }

    /// TMSV quadrature variance `omega = 2 nbar + 1`.
    pub fn omega(&self) -> f64 {
        2.0 * self.nbar + 1.0
    }

    /// TMSV squeezing parameter.
    pub fn lambda(&self) -> f64 {
        tmsv_lambda(self.nbar)
    }

    /// Beam-splitter angle `theta = arccos(sqrt(tau))`.
    pub fn theta(&self) -> f64 {
        self.tau.sqrt().min(1.0).acos()
    }

    pub fn is_pure_loss(&self) -> bool {
        self.nbar == 0.0
    }

    /// Variance of the heterodyne outcome around `sqrt(tau) a_k`:
    /// `1 + (1 - tau) nbar`.
    pub fn heterodyne_variance(&self) -> f64 {
        1.0 + (1.0 - self.tau) * self.nbar
    }
}

/// Which conditioning rule produces Eve's state given Bob's outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConditioningMode {
    /// Project mode B of the purified output onto the heterodyne outcome;
    /// Eve's per-letter states are updated by the measurement back-action.
    Exact,
    /// Mix the unconditioned per-letter Eve states with posterior weights.
    StrictPaper,
}

impl std::fmt::Display for ConditioningMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConditioningMode::Exact => write!(f, "exact"),
            ConditioningMode::StrictPaper => write!(f, "strict-paper"),
        }
    }
}

/// Purified channel output for one letter, modes ordered `(B, E', e)`.
#[derive(Debug, Clone)]
pub struct TripartiteOutput {
    letter: usize,
    state: StateVector,
}

impl TripartiteOutput {
    pub fn letter(&self) -> usize {
        self.letter
    }

    pub fn state(&self) -> &StateVector {
        &self.state
    }
}

/// `|Psi_k> = (U(theta) ⊗ I_e)(|a_k>_A ⊗ |TMSV>_{E e})`.
pub fn propagate(
    c: &Constellation,
    k: usize,
    ch: &ChannelParams,
    cutoff: &FockCutoff,
) -> Result<TripartiteOutput> {
    if k >= c.n() {
        return Err(Error::Usage(format!(
            "letter index {k} out of range for N = {}",
            c.n()
        )));
    }
    let u = beam_splitter_unitary(ch.tau(), cutoff)?;
    propagate_with_unitary(c, k, ch, cutoff, &u)
}

fn propagate_with_unitary(
    c: &Constellation,
    k: usize,
    ch: &ChannelParams,
    cutoff: &FockCutoff,
    u: &crate::fock::UnitaryMatrix,
) -> Result<TripartiteOutput> {
    let (alpha, _) = coherent_vector(c.amplitude(k), cutoff)?;
    let tmsv = tmsv_vector(ch.nbar(), cutoff)?;
    let state = u.apply_to_leading(&alpha.tensor(&tmsv))?;
    Ok(TripartiteOutput { letter: k, state })
}

/// `rho_{Eve|k} = Tr_B |Psi_k><Psi_k|` on modes `(E', e)`.
pub fn eve_conditional_state(out: &TripartiteOutput) -> Result<DensityMatrix> {
    partial_trace_pure(&out.state, &[1, 2])
}

/// `rho_Eve = (1/N) sum_{k=0}^{N-1} rho_{Eve|k}`.
pub fn eve_average_state(
    c: &Constellation,
    ch: &ChannelParams,
    cutoff: &FockCutoff,
) -> Result<DensityMatrix> {
    let ensemble = ChannelEnsemble::new(c, ch, cutoff)?;
    let n = c.n();
    let d2 = ensemble.dim() * ensemble.dim();
    let mut acc = CMatrix::zeros(d2, d2);
    for k in 0..n {
        let rho_k = eve_conditional_state(&ensemble.outputs[k])?;
        acc += rho_k.matrix();
    }
    DensityMatrix::new(
        vec![ensemble.dim(), ensemble.dim()],
        acc.scale(1.0 / n as f64),
    )
}

/// Heterodyne density `p(b | a_k) = exp[-|b - sqrt(tau) a_k|^2 / v] / (pi v)`
/// with `v = 1 + (1 - tau) nbar`. Reduces to `(1/pi) e^{-|b - sqrt(tau) a_k|^2}`
/// over a pure-loss channel.
pub fn heterodyne_likelihood(b: C64, a_k: C64, ch: &ChannelParams) -> f64 {
    let v = ch.heterodyne_variance();
    let d = b - a_k.scale(ch.tau().sqrt());
    (-d.norm_sqr() / v).exp() / (PI * v)
}

/// `p(b) = (1/N) sum_k p(b | a_k)`.
pub fn outcome_density(b: C64, c: &Constellation, ch: &ChannelParams) -> f64 {
    let n = c.n();
    (0..n)
        .map(|k| heterodyne_likelihood(b, c.amplitude(k), ch))
        .sum::<f64>()
        / n as f64
}

/// Bayes posterior `p(a_k | b) = p(b | a_k) / (N p(b))`, evaluated with a
/// shared exponent shift so it stays normalised for far-out outcomes.
pub fn posterior(b: C64, c: &Constellation, ch: &ChannelParams) -> Vec<f64> {
    let v = ch.heterodyne_variance();
    let root_tau = ch.tau().sqrt();
    let exps: Vec<f64> = (0..c.n())
        .map(|k| -(b - c.amplitude(k).scale(root_tau)).norm_sqr() / v)
        .collect();
    let m = exps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = exps.iter().map(|e| (e - m).exp()).collect();
    let total: f64 = w.iter().sum();
    for x in &mut w {
        *x /= total;
    }
    w
}

/// Channel outputs for the whole alphabet at one protocol point, with the
/// projection machinery used by the rate integrals.
pub struct ChannelEnsemble {
    c: Constellation,
    ch: ChannelParams,
    dim: usize,
    outputs: Vec<TripartiteOutput>,
    /// Gram matrix of the `N*d` contraction columns `Psi_k[n_B, .]`; block
    /// `(k, l)` holds `B_k^dag B_l`. Shared by the average-state entropy and
    /// the strict-paper conditional entropies.
    cross_gram: CMatrix,
}

impl ChannelEnsemble {
    pub fn new(c: &Constellation, ch: &ChannelParams, cutoff: &FockCutoff) -> Result<Self> {
        let u = beam_splitter_unitary(ch.tau(), cutoff)?;
        let outputs: Vec<TripartiteOutput> = (0..c.n())
            .map(|k| propagate_with_unitary(c, k, ch, cutoff, &u))
            .collect::<Result<_>>()?;
        let d = cutoff.dim();
        let d2 = d * d;
        let n = c.n();
        let nd = n * d;
        // Column (k, nB) is the (E', e) slice of Psi_k at Bob photon number nB.
        let col = |flat: usize, ee: usize| -> C64 {
            let (k, nb) = (flat / d, flat % d);
            outputs[k].state.amplitudes()[nb * d2 + ee]
        };
        let cross_gram = CMatrix::from_fn(nd, nd, |x, y| {
            let mut acc = C64::from(0.0);
            for ee in 0..d2 {
                acc += col(x, ee).conj() * col(y, ee);
            }
            acc
        });
        Ok(Self {
            c: c.clone(),
            ch: *ch,
            dim: d,
            outputs,
            cross_gram,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.c.n()
    }

    pub fn output(&self, k: usize) -> &TripartiteOutput {
        &self.outputs[k]
    }

    /// `S(rho_Eve)` from the nonzero spectrum of the stacked column Gram
    /// matrix scaled by the uniform prior.
    pub fn average_entropy(&self) -> Result<f64> {
        let g = self.cross_gram.scale(1.0 / self.n() as f64);
        entropy_from_eigenvalues(&hermitian_eigenvalues(&g))
    }

    /// `S(rho_{Eve|k})`; independent of `k`, computed at `k = 0` through the
    /// Schmidt dual `S(rho_B)` of the pure tripartite output.
    pub fn conditional_entropy(&self) -> Result<f64> {
        let rho_b = partial_trace_pure(self.outputs[0].state(), &[0])?;
        entropy_from_eigenvalues(&hermitian_eigenvalues(rho_b.matrix()))
    }

    /// Contract `<b|` (raw truncated coherent coefficients) on mode B of every
    /// `|Psi_k>`, giving unnormalised `(E', e)` vectors. The squared norm of
    /// each, divided by pi, is the heterodyne likelihood.
    pub fn projected_kets(&self, b: C64) -> Vec<CVector> {
        let d = self.dim;
        let d2 = d * d;
        let bra = coherent_amplitudes_raw(b, d);
        self.outputs
            .iter()
            .map(|out| {
                let amps = out.state.amplitudes();
                CVector::from_fn(d2, |ee, _| {
                    let mut acc = C64::from(0.0);
                    for nb in 0..d {
                        acc += bra[nb].conj() * amps[nb * d2 + ee];
                    }
                    acc
                })
            })
            .collect()
    }

    /// Exact-conditioning node: returns `(p(b), S(rho_{E'e|b}))` from the
    /// projected vectors, with weights `p_k / (pi p(b))` folded into the
    /// component Gram matrix.
    pub fn conditional_entropy_exact(&self, kets: &[CVector]) -> Result<(f64, f64)> {
        let n = kets.len();
        let prior = 1.0 / n as f64;
        let pb: f64 = kets.iter().map(|v| v.norm_squared()).sum::<f64>() * prior / PI;
        if pb <= f64::MIN_POSITIVE {
            return Ok((0.0, 0.0));
        }
        let w = prior / (PI * pb);
        let h = CMatrix::from_fn(n, n, |i, j| kets[i].dotc(&kets[j]).scale(w));
        let s = entropy_from_eigenvalues(&hermitian_eigenvalues(&h))?;
        Ok((pb, s))
    }

    /// Strict-paper node: entropy of `sum_k w_k rho_{Eve|k}` for posterior
    /// weights `w`, via the precomputed cross Gram blocks.
    pub fn conditional_entropy_strict(&self, weights: &[f64]) -> Result<f64> {
        let d = self.dim;
        let nd = self.n() * d;
        let h = CMatrix::from_fn(nd, nd, |x, y| {
            let scale = (weights[x / d] * weights[y / d]).sqrt();
            self.cross_gram[(x, y)].scale(scale)
        });
        entropy_from_eigenvalues(&hermitian_eigenvalues(&h))
    }

    pub fn channel(&self) -> &ChannelParams {
        &self.ch
    }

    pub fn constellation(&self) -> &Constellation {
        &self.c
    }
}

/// Eve's state conditioned on Bob's heterodyne outcome, on modes `(E', e)`.
///
/// `Exact` projects mode B of each purified output onto the outcome and mixes
/// the per-letter post-measurement states; `StrictPaper` mixes the
/// unconditioned `rho_{Eve|k}` with posterior weights. Both coincide over a
/// pure-loss channel.
pub fn eve_state_given_outcome(
    b: C64,
    c: &Constellation,
    ch: &ChannelParams,
    cutoff: &FockCutoff,
    mode: ConditioningMode,
) -> Result<DensityMatrix> {
    let ensemble = ChannelEnsemble::new(c, ch, cutoff)?;
    let d = ensemble.dim();
    match mode {
        ConditioningMode::Exact => {
            let kets: Vec<CVector> = ensemble.projected_kets(b);
            let prior = c.prior();
            let pb: f64 = kets.iter().map(|v| v.norm_squared()).sum::<f64>() * prior / PI;
            if pb <= f64::MIN_POSITIVE {
                return Err(Error::Domain(
                    "outcome density underflows; outcome too far from the constellation".into(),
                ));
            }
            let weights = vec![prior / (PI * pb); c.n()];
            DensityMatrix::from_mixture(&weights, &kets, vec![d, d])
        }
        ConditioningMode::StrictPaper => {
            let weights = posterior(b, c, ch);
            let d2 = d * d;
            let mut acc = CMatrix::zeros(d2, d2);
            for (k, w) in weights.iter().enumerate() {
                let rho_k = eve_conditional_state(ensemble.output(k))?;
                acc += rho_k.matrix().scale(*w);
            }
            DensityMatrix::new(vec![d, d], acc)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::von_neumann_entropy;

    fn c64(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn params_derived_quantities() {
        let ch = ChannelParams::new(0.5, 1.0).unwrap();
        assert_eq!(ch.omega(), 3.0);
        assert!((ch.lambda() - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((ch.theta() - 0.5f64.sqrt().acos()).abs() < 1e-15);
        assert!(ChannelParams::new(0.0, 0.1).is_err());
        assert!(ChannelParams::new(1.1, 0.1).is_err());
        assert!(ChannelParams::new(0.5, -0.1).is_err());
        assert!(ChannelParams::pure_loss(0.7).unwrap().is_pure_loss());
    }

    #[test]
    fn epsilon_conventions() {
        let tau = 0.25;
        let eps = 0.01;
        let inp = ChannelParams::from_epsilon(tau, eps, EpsilonConvention::InputReferred).unwrap();
        assert!((inp.nbar() - tau * eps / (2.0 * (1.0 - tau))).abs() < 1e-15);
        let out = ChannelParams::from_epsilon(tau, eps, EpsilonConvention::OutputReferred).unwrap();
        assert!((out.nbar() - eps / (2.0 * (1.0 - tau))).abs() < 1e-15);
        assert!(ChannelParams::from_epsilon(1.0, eps, EpsilonConvention::InputReferred).is_err());
        let zero = ChannelParams::from_epsilon(1.0, 0.0, EpsilonConvention::InputReferred).unwrap();
        assert!(zero.is_pure_loss());
    }

    #[test]
    fn pure_loss_output_is_product_of_attenuated_coherent_states() {
        let c = Constellation::new(0.6, 4).unwrap();
        let tau = 0.7;
        let ch = ChannelParams::pure_loss(tau).unwrap();
        let cutoff = FockCutoff::new(12, 1e-9).unwrap();
        for k in 0..4 {
            let out = propagate(&c, k, &ch, &cutoff).unwrap();
            let a = c.amplitude(k);
            let (b_mode, _) = coherent_vector(a.scale(tau.sqrt()), &cutoff).unwrap();
            let (e_mode, _) = coherent_vector(a.scale(-((1.0 - tau).sqrt())), &cutoff).unwrap();
            let (vac, _) = coherent_vector(c64(0.0, 0.0), &cutoff).unwrap();
            let expected = b_mode.tensor(&e_mode).tensor(&vac);
            let fid = expected.inner(out.state()).norm_sqr();
            assert!(fid > 1.0 - 1e-8, "letter {k}: fidelity {fid}");
        }
    }

    #[test]
    fn lossless_channel_leaves_tmsv_untouched() {
        let c = Constellation::new(0.5, 4).unwrap();
        let ch = ChannelParams::new(1.0, 0.2).unwrap();
        let cutoff = FockCutoff::new(14, 1e-9).unwrap();
        let out = propagate(&c, 1, &ch, &cutoff).unwrap();
        let (alpha, _) = coherent_vector(c.amplitude(1), &cutoff).unwrap();
        let tmsv = tmsv_vector(0.2, &cutoff).unwrap();
        let fid = alpha.tensor(&tmsv).inner(out.state()).norm_sqr();
        assert!(fid > 1.0 - 1e-10);
        // rho_{Eve|k} is the pure TMSV: zero entropy.
        let s = von_neumann_entropy(&eve_conditional_state(&out).unwrap()).unwrap();
        assert!(s < 1e-9);
    }

    #[test]
    fn bob_mean_photon_number() {
        let c = Constellation::new(0.8, 4).unwrap();
        let ch = ChannelParams::new(0.6, 0.15).unwrap();
        let cutoff = FockCutoff::new(14, 1e-8).unwrap();
        let out = propagate(&c, 2, &ch, &cutoff).unwrap();
        let rho_b = partial_trace_pure(out.state(), &[0]).unwrap();
        let expected = 0.6 * 0.64 + 0.4 * 0.15;
        assert!(
            (rho_b.mean_photons(0) - expected).abs() < 1e-6,
            "got {}, want {expected}",
            rho_b.mean_photons(0)
        );
    }

    #[test]
    fn eve_entropy_independent_of_letter() {
        let c = Constellation::new(0.7, 4).unwrap();
        let ch = ChannelParams::new(0.55, 0.05).unwrap();
        let cutoff = FockCutoff::with_dim(12).unwrap();
        let ensemble = ChannelEnsemble::new(&c, &ch, &cutoff).unwrap();
        let entropies: Vec<f64> = (0..4)
            .map(|k| von_neumann_entropy(&eve_conditional_state(ensemble.output(k)).unwrap()).unwrap())
            .collect();
        for s in &entropies[1..] {
            assert!((s - entropies[0]).abs() < 1e-9, "{entropies:?}");
        }
        // The Schmidt-dual fast path agrees with the dense route.
        let fast = ensemble.conditional_entropy().unwrap();
        assert!((fast - entropies[0]).abs() < 1e-9);
    }

    #[test]
    fn eve_average_state_sanity() {
        let c = Constellation::new(0.1, 4).unwrap();
        let ch = ChannelParams::new(0.9, 0.01).unwrap();
        let cutoff = FockCutoff::with_dim(11).unwrap();
        let rho = eve_average_state(&c, &ch, &cutoff).unwrap();
        assert!((rho.trace().re - 1.0).abs() < 1e-10);
        assert!(rho.hermiticity_error() < 1e-12);
        // Stacked-Gram entropy equals the dense-route entropy.
        let ensemble = ChannelEnsemble::new(&c, &ch, &cutoff).unwrap();
        let s_fast = ensemble.average_entropy().unwrap();
        let s_dense = von_neumann_entropy(&rho).unwrap();
        assert!((s_fast - s_dense).abs() < 1e-9, "{s_fast} vs {s_dense}");

        // z = 0: conditional equals average (zero Holevo gap).
        let c0 = Constellation::new(0.0, 4).unwrap();
        let e0 = ChannelEnsemble::new(&c0, &ch, &cutoff).unwrap();
        let gap = e0.average_entropy().unwrap() - e0.conditional_entropy().unwrap();
        assert!(gap.abs() < 1e-10);

        // tau = 1: average is the TMSV projector.
        let ch1 = ChannelParams::new(1.0, 0.05).unwrap();
        let e1 = ChannelEnsemble::new(&c, &ch1, &cutoff).unwrap();
        assert!(e1.average_entropy().unwrap() < 1e-9);
    }

    #[test]
    fn likelihood_forms() {
        let ch = ChannelParams::pure_loss(0.8).unwrap();
        let a = c64(0.5, 0.0);
        let b = c64(0.3, -0.2);
        let expect = (-(b - a.scale(0.8f64.sqrt())).norm_sqr()).exp() / PI;
        assert!((heterodyne_likelihood(b, a, &ch) - expect).abs() < 1e-15);

        let cht = ChannelParams::new(0.8, 0.5).unwrap();
        let peak = heterodyne_likelihood(a.scale(0.8f64.sqrt()), a, &cht);
        assert!((peak - 1.0 / (PI * (1.0 + 0.2 * 0.5))).abs() < 1e-15);
    }

    #[test]
    fn likelihood_matches_fock_trace_oracle() {
        // Tr[ Pi(b) rho_B Pi(b)^dag ] / pi with rho_B from the simulated channel.
        let c = Constellation::new(0.8, 4).unwrap();
        let cutoff = FockCutoff::new(16, 1e-9).unwrap();
        for &(tau, nbar) in &[(0.6, 0.0), (0.6, 0.3), (0.9, 0.1)] {
            let ch = ChannelParams::new(tau, nbar).unwrap();
            let out = propagate(&c, 0, &ch, &cutoff).unwrap();
            let rho_b = partial_trace_pure(out.state(), &[0]).unwrap();
            for &(x, y) in &[(0.0, 0.0), (0.7, 0.1), (-0.4, 0.9), (1.5, -1.0)] {
                let b = c64(x, y);
                let bra = coherent_amplitudes_raw(b, 16);
                let mut num = C64::from(0.0);
                for i in 0..16 {
                    for j in 0..16 {
                        num += bra[i].conj() * rho_b.matrix()[(i, j)] * bra[j];
                    }
                }
                let closed = heterodyne_likelihood(b, c.amplitude(0), &ch);
                assert!(
                    (num.re / PI - closed).abs() < 1e-6,
                    "tau={tau} nbar={nbar} b=({x},{y}): {} vs {closed}",
                    num.re / PI
                );
            }
        }
    }

    #[test]
    fn posterior_properties() {
        let c = Constellation::new(1.0, 4).unwrap();
        let ch = ChannelParams::pure_loss(0.8).unwrap();
        // b = 0 is equidistant: uniform posterior.
        let p0 = posterior(c64(0.0, 0.0), &c, &ch);
        for p in &p0 {
            assert!((p - 0.25).abs() < 1e-12);
        }
        // Always normalised.
        for &(x, y) in &[(0.3, 0.1), (-2.0, 1.0), (8.0, -3.0)] {
            let p = posterior(c64(x, y), &c, &ch);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        // Far along a_0 the posterior collapses onto letter 0.
        let b = c.amplitude(0).scale(10.0 * 0.8f64.sqrt());
        let p = posterior(b, &c, &ch);
        assert!(p[0] > 1.0 - 1e-6, "{p:?}");
    }

    #[test]
    fn conditional_state_pure_loss_structure() {
        // At nbar = 0 the exact conditional state is the posterior-weighted
        // mixture of coherent states at -sqrt(1-tau) a_k on E' (vacuum on e).
        let c = Constellation::new(0.5, 4).unwrap();
        let tau = 0.6;
        let ch = ChannelParams::pure_loss(tau).unwrap();
        let cutoff = FockCutoff::new(10, 1e-7).unwrap();
        let b = c64(0.4, -0.1);
        let rho = eve_state_given_outcome(b, &c, &ch, &cutoff, ConditioningMode::Exact).unwrap();
        assert!((rho.trace().re - 1.0).abs() < 1e-9);

        let w = posterior(b, &c, &ch);
        let kets: Vec<CVector> = (0..4)
            .map(|k| {
                let (e_mode, _) =
                    coherent_vector(c.amplitude(k).scale(-((1.0 - tau).sqrt())), &cutoff).unwrap();
                let (vac, _) = coherent_vector(c64(0.0, 0.0), &cutoff).unwrap();
                e_mode.tensor(&vac).amplitudes().clone()
            })
            .collect();
        let expected = DensityMatrix::from_mixture(&w, &kets, vec![10, 10]).unwrap();
        let diff = (rho.matrix() - expected.matrix()).norm();
        assert!(diff < 1e-7, "matrix deviation {diff}");

        // Strict-paper mode coincides at nbar = 0.
        let strict =
            eve_state_given_outcome(b, &c, &ch, &cutoff, ConditioningMode::StrictPaper).unwrap();
        let diff2 = (rho.matrix() - strict.matrix()).norm();
        assert!(diff2 < 1e-8, "mode deviation {diff2}");
    }

    #[test]
    fn conditional_state_trace_one_thermal() {
        let c = Constellation::new(0.3, 4).unwrap();
        let ch = ChannelParams::new(0.7, 0.08).unwrap();
        let cutoff = FockCutoff::with_dim(11).unwrap();
        for &(x, y) in &[(0.2, 0.3), (-0.5, 0.0), (1.0, 1.0)] {
            for mode in [ConditioningMode::Exact, ConditioningMode::StrictPaper] {
                let rho = eve_state_given_outcome(c64(x, y), &c, &ch, &cutoff, mode).unwrap();
                assert!((rho.trace().re - 1.0).abs() < 1e-10, "mode {mode} b=({x},{y})");
                assert!(rho.hermiticity_error() < 1e-12);
            }
        }
    }

    #[test]
    fn single_letter_limit_far_outcome() {
        // Far along a_0 the conditional state collapses to the (pure)
        // post-measurement state of letter 0. The cutoff must also hold the
        // projector's truncated overlap faithfully at this |b|.
        let c = Constellation::new(1.0, 4).unwrap();
        let ch = ChannelParams::new(0.9, 0.05).unwrap();
        let cutoff = FockCutoff::with_dim(32).unwrap();
        let ensemble = ChannelEnsemble::new(&c, &ch, &cutoff).unwrap();
        let b = c.amplitude(0).scale(12.0);
        let kets = ensemble.projected_kets(b);
        let (_, s) = ensemble.conditional_entropy_exact(&kets).unwrap();
        assert!(s < 1e-6, "entropy {s}");
    }

    #[test]
    fn rotational_covariance() {
        let c = Constellation::new(0.6, 4).unwrap();
        let ch = ChannelParams::new(0.65, 0.04).unwrap();
        let cutoff = FockCutoff::with_dim(11).unwrap();
        let ensemble = ChannelEnsemble::new(&c, &ch, &cutoff).unwrap();
        let rot = C64::from_polar(1.0, 2.0 * PI / 4.0);
        for &(x, y) in &[(0.45, 0.1), (-0.2, 0.8)] {
            let b = c64(x, y);
            let p1 = outcome_density(b, &c, &ch);
            let p2 = outcome_density(b * rot, &c, &ch);
            assert!((p1 - p2).abs() < 1e-12 * p1.max(1.0));

            let (pb1, s1) = ensemble
                .conditional_entropy_exact(&ensemble.projected_kets(b))
                .unwrap();
            let (pb2, s2) = ensemble
                .conditional_entropy_exact(&ensemble.projected_kets(b * rot))
                .unwrap();
            assert!((pb1 - pb2).abs() < 1e-10);
            assert!((s1 - s2).abs() < 1e-8, "{s1} vs {s2}");
        }
    }

    #[test]
    fn projected_likelihood_matches_closed_form() {
        let c = Constellation::new(0.5, 4).unwrap();
        let ch = ChannelParams::new(0.75, 0.06).unwrap();
        let cutoff = FockCutoff::with_dim(11).unwrap();
        let ensemble = ChannelEnsemble::new(&c, &ch, &cutoff).unwrap();
        for &(x, y) in &[(0.0, 0.0), (0.5, 0.2), (-1.1, 0.4)] {
            let b = c64(x, y);
            let kets = ensemble.projected_kets(b);
            for k in 0..4 {
                let from_kets = kets[k].norm_squared() / PI;
                let closed = heterodyne_likelihood(b, c.amplitude(k), &ch);
                assert!(
                    (from_kets - closed).abs() < 1e-6,
                    "k={k} b=({x},{y}): {from_kets} vs {closed}"
                );
            }
        }
    }
}

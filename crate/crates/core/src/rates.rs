//! Key-rate assembly: Shannon mutual information over heterodyne outcomes,
//! Holevo terms, the direct-reconciliation upper bound, realistic DR and RR
//! Devetak-Winter rates, and the Gaussian-modulation baseline.
//!
//! All outcome integrals run on a polar grid restricted to one wedge of angle
//! `2 pi / N`, exploiting the constellation's rotational covariance; node
//! evaluations are independent and run in parallel, with a fixed summation
//! order at the reduce step so results do not depend on thread count.

use rayon::prelude::*;

use crate::channel::{
    outcome_density, posterior, ChannelEnsemble, ChannelParams,
    ConditioningMode,
};
use crate::constellation::{
    overlap_matrix, scaled_mixture_entropy, source_entropy, AlphabetSize, Constellation,
};
use crate::error::{Error, Result};
use crate::fock::{
    bosonic_entropy, entropy_from_eigenvalues, hermitian_eigenvalues, CMatrix, FockCutoff, C64,
};

const PI: f64 = std::f64::consts::PI;

/// Rates must move by less than this (bits) under the convergence re-runs.
pub const CONVERGENCE_TOL: f64 = 1e-5;
/// The quadrature must reproduce `\int p(b) d^2 b = 1` to this accuracy.
pub const NORMALISATION_TOL: f64 = 1e-6;

/// Gauss-Legendre nodes and weights on `[a, b]`.
///
/// Nodes are found by Newton iteration on the Legendre recurrence; this is
/// exact for polynomials of degree `2n - 1` and spectrally accurate for the
/// smooth Gaussian-mixture integrands used here.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    assert!(n >= 1 && b > a);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        // Initial guess (Chebyshev-like), then Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        let half = 0.5 * (b - a);
        out.push((a + half * (1.0 + x), half * w));
    }
    out.sort_by(|l, r| l.0.partial_cmp(&r.0).unwrap());
    out
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Polar quadrature over heterodyne outcomes: Gauss-Legendre radial nodes on
/// `[0, r_max]` times uniform angular midpoints on one wedge of angle
/// `2 pi / wedge`; node weights carry `r dr dphi` and the wedge multiplicity.
#[derive(Debug, Clone)]
pub struct QuadratureGrid {
    radial: Vec<(f64, f64)>,
    n_angular: usize,
    wedge: usize,
    r_max: f64,
}

impl QuadratureGrid {
    pub fn new(n_radial: usize, n_angular: usize, wedge: usize, r_max: f64) -> Self {
        assert!(wedge >= 1 && n_angular >= 1 && n_radial >= 1);
        Self {
            radial: gauss_legendre(n_radial, 0.0, r_max),
            n_angular,
            wedge,
            r_max,
        }
    }

    /// Radius covering the outcome distribution:
    /// `sqrt(tau) z + 6 sqrt(1 + (1 - tau) nbar)`.
    pub fn default_r_max(c: &Constellation, ch: &ChannelParams) -> f64 {
        ch.tau().sqrt() * c.z() + 6.0 * ch.heterodyne_variance().sqrt()
    }

    /// Default grid for a protocol point: 80 x 32 nodes per wedge.
    pub fn for_protocol(c: &Constellation, ch: &ChannelParams) -> Self {
        Self::new(80, 32, c.n(), Self::default_r_max(c, ch))
    }

    pub fn n_radial(&self) -> usize {
        self.radial.len()
    }

    pub fn n_angular(&self) -> usize {
        self.n_angular
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    /// Same extent, twice the node count in each direction.
    pub fn doubled(&self) -> Self {
        Self::new(
            2 * self.radial.len(),
            2 * self.n_angular,
            self.wedge,
            self.r_max,
        )
    }

    /// All nodes `(b, w)`; summing `w f(b)` approximates `\int f d^2 b` for
    /// any `f` with the wedge's rotational symmetry.
    pub fn nodes(&self) -> Vec<(C64, f64)> {
        let dphi = 2.0 * PI / (self.wedge as f64 * self.n_angular as f64);
        let mut nodes = Vec::with_capacity(self.radial.len() * self.n_angular);
        for &(r, wr) in &self.radial {
            for j in 0..self.n_angular {
                let phi = (j as f64 + 0.5) * dphi;
                let w = wr * r * dphi * self.wedge as f64;
                nodes.push((C64::from_polar(r, phi), w));
            }
        }
        nodes
    }
}

/// Reconciliation direction / rate family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Dr,
    Rr,
    DrUpper,
    Gaussian,
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Direction::Dr => write!(f, "dr"),
            Direction::Rr => write!(f, "rr"),
            Direction::DrUpper => write!(f, "dr-upper"),
            Direction::Gaussian => write!(f, "gaussian"),
        }
    }
}

/// Numerical health of one evaluated rate.
#[derive(Debug, Clone, Copy)]
pub struct Diagnostics {
    /// Fock levels per mode; 0 when the point was computed in closed form.
    pub cutoff_dim: usize,
    pub grid_radial: usize,
    pub grid_angular: usize,
    /// Rate shift when the quadrature grid is doubled in both directions.
    pub grid_delta: f64,
    /// Rate shift when the Fock cutoff is widened by 4 levels.
    pub cutoff_delta: f64,
    /// `|1 - \int p(b) d^2 b|` on the grid actually used.
    pub pb_norm_error: f64,
    pub converged: bool,
}

impl Diagnostics {
    fn closed_form() -> Self {
        Diagnostics {
            cutoff_dim: 0,
            grid_radial: 0,
            grid_angular: 0,
            grid_delta: 0.0,
            cutoff_delta: 0.0,
            pb_norm_error: 0.0,
            converged: true,
        }
    }
}

/// One evaluated protocol point. `rate = beta * i_ab - holevo`, where
/// `holevo` is `chi(Eve : X_A)` in DR and `chi(Eve : X_B)` in RR.
#[derive(Debug, Clone)]
pub struct RatePoint {
    pub direction: Direction,
    pub alphabet: Option<AlphabetSize>,
    pub z: f64,
    /// Gaussian modulation variance (`2 z^2`); set for the Gaussian baseline.
    pub vm: Option<f64>,
    pub tau: f64,
    pub nbar: f64,
    pub beta: f64,
    pub mode: Option<ConditioningMode>,
    pub i_ab: f64,
    pub holevo: f64,
    pub rate: f64,
    pub diagnostics: Diagnostics,
}

/// Knobs shared by the realistic-rate assemblies.
#[derive(Debug, Clone)]
pub struct RateOptions {
    /// Reconciliation efficiency multiplying `I(X_A : X_B)`.
    pub beta: f64,
    pub mode: ConditioningMode,
    /// Run the Fock pipeline even at `nbar = 0` (used to cross-check the
    /// dedicated pure-loss formulas).
    pub force_fock: bool,
    /// Re-run with a doubled grid (and widened cutoff) to fill diagnostics.
    pub guard: bool,
    pub cutoff: Option<FockCutoff>,
    pub grid: Option<QuadratureGrid>,
}

impl Default for RateOptions {
    fn default() -> Self {
        Self {
            beta: 1.0,
            mode: ConditioningMode::Exact,
            force_fock: false,
            guard: true,
            cutoff: None,
            grid: None,
        }
    }
}

/// `I(X_A : X_B) = log2 N - \int p(b) H({p(a_k | b)}) d^2 b` in bits, from the
/// closed-form heterodyne likelihoods. Clamped into `[0, log2 N]`.
pub fn mutual_information(c: &Constellation, ch: &ChannelParams, grid: &QuadratureGrid) -> f64 {
    let h_a = (c.n() as f64).log2();
    let nodes = grid.nodes();
    let terms: Vec<f64> = nodes
        .par_iter()
        .map(|&(b, w)| {
            let pb = outcome_density(b, c, ch);
            w * pb * shannon_entropy(&posterior(b, c, ch))
        })
        .collect();
    let conditional: f64 = terms.iter().sum();
    (h_a - conditional).clamp(0.0, h_a)
}

fn shannon_entropy(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x * x.log2())
        .sum::<f64>()
}

/// `chi(Eve : X_A) = S(rho_Eve) - S(rho_{Eve|k})` through the Fock pipeline.
pub fn holevo_dr(c: &Constellation, ch: &ChannelParams, cutoff: &FockCutoff) -> Result<f64> {
    let ensemble = ChannelEnsemble::new(c, ch, cutoff)?;
    holevo_dr_from_ensemble(&ensemble)
}

fn holevo_dr_from_ensemble(ensemble: &ChannelEnsemble) -> Result<f64> {
    let chi = ensemble.average_entropy()? - ensemble.conditional_entropy()?;
    if chi < -1e-9 {
        return Err(Error::InvalidState(format!(
            "Holevo difference {chi:.3e} is negative beyond tolerance"
        )));
    }
    Ok(chi.max(0.0))
}

/// Optimal (quantum-memory) DR rate over a pure-loss channel:
/// `S(rho_B) - S(rho_E')` from the Gram-Schmidt average states at scales
/// `sqrt(tau)` and `sqrt(1 - tau)`. May be negative.
pub fn rate_dr_upper(z: f64, size: AlphabetSize, tau: f64) -> Result<f64> {
    Ok(dr_upper_point(z, size, tau)?.rate)
}

/// [`rate_dr_upper`] with the two entropies exposed
/// (`i_ab = S(rho_B)`, `holevo = S(rho_E')`).
pub fn dr_upper_point(z: f64, size: AlphabetSize, tau: f64) -> Result<RatePoint> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::Domain(format!(
            "transmissivity must lie in (0, 1], got {tau}"
        )));
    }
    let (s_bob, s_eve) = match size {
        AlphabetSize::Finite(n) => {
            let c = Constellation::new(z, n)?;
            (
                scaled_mixture_entropy(&c, tau.sqrt())?,
                scaled_mixture_entropy(&c, (1.0 - tau).sqrt())?,
            )
        }
        AlphabetSize::Infinite => (
            source_entropy(tau.sqrt() * z, AlphabetSize::Infinite)?,
            source_entropy((1.0 - tau).sqrt() * z, AlphabetSize::Infinite)?,
        ),
    };
    Ok(RatePoint {
        direction: Direction::DrUpper,
        alphabet: Some(size),
        z,
        vm: None,
        tau,
        nbar: 0.0,
        beta: 1.0,
        mode: None,
        i_ab: s_bob,
        holevo: s_eve,
        rate: s_bob - s_eve,
        diagnostics: Diagnostics::closed_form(),
    })
}

struct Parts {
    i_ab: f64,
    holevo: f64,
    pb_norm_error: f64,
}

/// One full pass of the DR assembly on a fixed grid/cutoff.
fn dr_parts(
    c: &Constellation,
    ch: &ChannelParams,
    grid: &QuadratureGrid,
    cutoff: Option<&FockCutoff>,
) -> Result<Parts> {
    let i_ab = mutual_information(c, ch, grid);
    let (holevo, norm_err) = match cutoff {
        None => {
            // Pure loss: chi(Eve : X_A) = S(rho_E') via the Gram-Schmidt route.
            (scaled_mixture_entropy(c, (1.0 - ch.tau()).sqrt())?, quadrature_norm_error(c, ch, grid))
        }
        Some(cut) => {
            let ensemble = ChannelEnsemble::new(c, ch, cut)?;
            (holevo_dr_from_ensemble(&ensemble)?, quadrature_norm_error(c, ch, grid))
        }
    };
    Ok(Parts {
        i_ab,
        holevo,
        pb_norm_error: norm_err,
    })
}

fn quadrature_norm_error(c: &Constellation, ch: &ChannelParams, grid: &QuadratureGrid) -> f64 {
    let total: f64 = grid
        .nodes()
        .par_iter()
        .map(|&(b, w)| w * outcome_density(b, c, ch))
        .collect::<Vec<_>>()
        .iter()
        .sum();
    (1.0 - total).abs()
}

/// One full pass of the RR assembly: returns `I`, `chi(Eve : X_B) =
/// S(rho_Eve) - \int p(b) S(rho_{E'e|b}) d^2 b`, and the grid normalisation.
fn rr_parts(
    c: &Constellation,
    ch: &ChannelParams,
    grid: &QuadratureGrid,
    cutoff: Option<&FockCutoff>,
    mode: ConditioningMode,
) -> Result<Parts> {
    let h_a = (c.n() as f64).log2();
    match cutoff {
        None => {
            // Pure loss, single-mode E' in closed form: conditional states are
            // posterior-weighted mixtures of coherent states at scale
            // sqrt(1 - tau), whose spectra come from the weighted Gram matrix.
            let overlaps = overlap_matrix(c, (1.0 - ch.tau()).sqrt());
            let nodes = grid.nodes();
            let terms: Vec<Result<(f64, f64, f64)>> = nodes
                .par_iter()
                .map(|&(b, w)| {
                    let pb = outcome_density(b, c, ch);
                    let post = posterior(b, c, ch);
                    let h = CMatrix::from_fn(c.n(), c.n(), |i, j| {
                        overlaps.matrix()[(i, j)].scale((post[i] * post[j]).sqrt())
                    });
                    let s = entropy_from_eigenvalues(&hermitian_eigenvalues(&h))?;
                    Ok((w * pb, w * pb * shannon_entropy(&post), w * pb * s))
                })
                .collect();
            let mut norm = 0.0;
            let mut cond_h = 0.0;
            let mut cond_s = 0.0;
            for t in terms {
                let (a, b, c) = t?;
                norm += a;
                cond_h += b;
                cond_s += c;
            }
            let s_avg = scaled_mixture_entropy(c, (1.0 - ch.tau()).sqrt())?;
            Ok(Parts {
                i_ab: (h_a - cond_h).clamp(0.0, h_a),
                holevo: s_avg - cond_s,
                pb_norm_error: (1.0 - norm).abs(),
            })
        }
        Some(cut) => {
            let ensemble = ChannelEnsemble::new(c, ch, cut)?;
            let s_avg = ensemble.average_entropy()?;
            let nodes = grid.nodes();
            let terms: Vec<Result<(f64, f64, f64)>> = nodes
                .par_iter()
                .map(|&(b, w)| {
                    let post = posterior(b, c, ch);
                    let (pb, s) = match mode {
                        ConditioningMode::Exact => {
                            let kets = ensemble.projected_kets(b);
                            ensemble.conditional_entropy_exact(&kets)?
                        }
                        ConditioningMode::StrictPaper => {
                            let pb = outcome_density(b, c, ch);
                            (pb, ensemble.conditional_entropy_strict(&post)?)
                        }
                    };
                    let pb_closed = outcome_density(b, c, ch);
                    Ok((w * pb, w * pb_closed * shannon_entropy(&post), w * pb * s))
                })
                .collect();
            let mut norm = 0.0;
            let mut cond_h = 0.0;
            let mut cond_s = 0.0;
            for t in terms {
                let (a, b, c) = t?;
                norm += a;
                cond_h += b;
                cond_s += c;
            }
            Ok(Parts {
                i_ab: (h_a - cond_h).clamp(0.0, h_a),
                holevo: s_avg - cond_s,
                pb_norm_error: (1.0 - norm).abs(),
            })
        }
    }
}

fn assemble(
    direction: Direction,
    c: &Constellation,
    ch: &ChannelParams,
    opts: &RateOptions,
    parts_of: impl Fn(&QuadratureGrid, Option<&FockCutoff>) -> Result<Parts>,
) -> Result<RatePoint> {
    let grid = opts
        .grid
        .clone()
        .unwrap_or_else(|| QuadratureGrid::for_protocol(c, ch));
    let use_fock = !ch.is_pure_loss() || opts.force_fock;
    let cutoff = if use_fock {
        Some(
            opts.cutoff
                .unwrap_or_else(|| FockCutoff::for_protocol(c.z(), ch.nbar())),
        )
    } else {
        None
    };

    let base = parts_of(&grid, cutoff.as_ref())?;
    let rate = opts.beta * base.i_ab - base.holevo;

    let (grid_delta, cutoff_delta) = if opts.guard {
        let finer = parts_of(&grid.doubled(), cutoff.as_ref())?;
        let gd = (opts.beta * finer.i_ab - finer.holevo - rate).abs();
        let cd = match &cutoff {
            Some(cut) => {
                let wide = parts_of(&grid, Some(&cut.widened(4)))?;
                (opts.beta * wide.i_ab - wide.holevo - rate).abs()
            }
            None => 0.0,
        };
        (gd, cd)
    } else {
        (0.0, 0.0)
    };

    let converged = grid_delta < CONVERGENCE_TOL
        && cutoff_delta < CONVERGENCE_TOL
        && base.pb_norm_error <= NORMALISATION_TOL;

    Ok(RatePoint {
        direction,
        alphabet: Some(AlphabetSize::Finite(c.n())),
        z: c.z(),
        vm: None,
        tau: ch.tau(),
        nbar: ch.nbar(),
        beta: opts.beta,
        mode: match direction {
            Direction::Rr => Some(opts.mode),
            _ => None,
        },
        i_ab: base.i_ab,
        holevo: base.holevo,
        rate,
        diagnostics: Diagnostics {
            cutoff_dim: cutoff.map_or(0, |c| c.dim()),
            grid_radial: grid.n_radial(),
            grid_angular: grid.n_angular(),
            grid_delta,
            cutoff_delta,
            pb_norm_error: base.pb_norm_error,
            converged,
        },
    })
}

/// Realistic direct-reconciliation rate `beta I(X_A : X_B) - chi(Eve : X_A)`.
pub fn rate_dr(c: &Constellation, ch: &ChannelParams, opts: &RateOptions) -> Result<RatePoint> {
    assemble(Direction::Dr, c, ch, opts, |grid, cutoff| {
        dr_parts(c, ch, grid, cutoff)
    })
}

/// Realistic reverse-reconciliation rate
/// `beta I(X_A : X_B) - S(rho_Eve) + \int p(b) S(rho_{E'e|b}) d^2 b`.
pub fn rate_rr(c: &Constellation, ch: &ChannelParams, opts: &RateOptions) -> Result<RatePoint> {
    assemble(Direction::Rr, c, ch, opts, |grid, cutoff| {
        rr_parts(c, ch, grid, cutoff, opts.mode)
    })
}

/// Reverse-reconciliation rate of the Gaussian-modulated coherent-state
/// protocol with heterodyne detection over the same channel, from covariance
/// matrices and symplectic eigenvalues. `vm` is the modulation variance in
/// shot-noise units (`vm = 2 z^2` matches a constellation of radius `z`).
pub fn gaussian_rr_rate(vm: f64, ch: &ChannelParams) -> f64 {
    let p = gaussian_rr_point(vm, ch, 1.0);
    p.rate
}

/// [`gaussian_rr_rate`] with `I` and `chi` exposed.
pub fn gaussian_rr_point(vm: f64, ch: &ChannelParams, beta: f64) -> RatePoint {
    let tau = ch.tau();
    let omega = ch.omega();
    let v = vm + 1.0; // EB TMSV variance
    let c2 = vm * (vm + 2.0); // v^2 - 1
    let vb = tau * v + (1.0 - tau) * omega;
    let vb_cond = tau + (1.0 - tau) * omega;

    let i_ab = ((vb + 1.0) / (vb_cond + 1.0)).log2();

    // S(E) = S(AB) for the pure global state; nu are the symplectic
    // eigenvalues of the (A, B) covariance matrix.
    let delta = v * v + vb * vb - 2.0 * tau * c2;
    let det = v * vb - tau * c2;
    let disc = (delta * delta - 4.0 * det * det).max(0.0).sqrt();
    let nu1 = ((delta + disc) / 2.0).sqrt();
    let nu2 = ((delta - disc).max(0.0) / 2.0).sqrt();
    // S(E|b) = S(A|b): Bob's heterodyne leaves A Gaussian with variance
    // v - tau c^2 / (vb + 1) in both quadratures.
    let nu3 = v - tau * c2 / (vb + 1.0);

    let g = |nu: f64| bosonic_entropy((nu - 1.0) / 2.0);
    let holevo = g(nu1) + g(nu2) - g(nu3);

    RatePoint {
        direction: Direction::Gaussian,
        alphabet: None,
        z: (vm / 2.0).sqrt(),
        vm: Some(vm),
        tau,
        nbar: ch.nbar(),
        beta,
        mode: None,
        i_ab,
        holevo,
        rate: beta * i_ab - holevo,
        diagnostics: Diagnostics::closed_form(),
    }
}

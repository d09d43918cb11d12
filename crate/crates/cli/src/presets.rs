//! Figure presets: fixed parameter grids reproducing the library's headline
//! curves. Grids not pinned by the protocol parameters themselves (step sizes,
//! z lists for the bound plots) are chosen for smooth curves and documented in
//! the README.

use anyhow::{anyhow, bail, Result};
use rayon::prelude::*;

use cvqkd::channel::{ChannelParams, EpsilonConvention};
use cvqkd::constellation::{source_entropy, AlphabetSize, Constellation};
use cvqkd::rates::{dr_upper_point, gaussian_rr_point, rate_dr, rate_rr, RateOptions};

use crate::config::db_to_tau;
use crate::output::Row;

#[derive(Debug, Clone, Copy)]
enum Job {
    Entropy { n: AlphabetSize, z: f64 },
    DrUpper { n: AlphabetSize, z: f64, tau: f64 },
    Dr { z: f64, db: f64, nbar: f64 },
    Rr { z: f64, db: f64, epsilon: f64 },
    Gaussian { vm: f64, db: f64, epsilon: f64 },
}

pub const PRESET_NAMES: [&str; 6] = ["fig2", "fig3", "fig4", "fig5", "fig6", "fig7"];

pub fn figure_preset(name: &str) -> Result<Vec<Row>> {
    let jobs = match name {
        "fig2" => entropy_jobs(),
        "fig3" => upper_bound_jobs(&[0.1, 0.3, 0.6, 1.0, 2.0, 1e6], false),
        "fig4" => upper_bound_jobs(&[0.1, 0.3, 0.6, 1.0, 2.0], true),
        "fig5" => dr_jobs(),
        "fig6" => rr_jobs(0.1, 0.001, 0.02),
        "fig7" => rr_jobs(1.0, 0.01, 2.0),
        other => bail!(
            "unknown figure preset {other:?}; valid presets: {}",
            PRESET_NAMES.join(", ")
        ),
    };
    jobs.par_iter().map(|&job| evaluate(job)).collect()
}

/// Source entropy over z in [0, 5] (step 0.05) for N in {1,...,8, inf}.
fn entropy_jobs() -> Vec<Job> {
    let mut jobs = Vec::new();
    for n in [
        AlphabetSize::Finite(1),
        AlphabetSize::Finite(2),
        AlphabetSize::Finite(3),
        AlphabetSize::Finite(4),
        AlphabetSize::Finite(5),
        AlphabetSize::Finite(6),
        AlphabetSize::Finite(8),
        AlphabetSize::Infinite,
    ] {
        for i in 0..=100 {
            jobs.push(Job::Entropy { n, z: i as f64 * 0.05 });
        }
    }
    jobs
}

/// DR upper bound over tau in [0.05, 1] (step 0.05); optionally with the
/// matching continuous-alphabet curves.
fn upper_bound_jobs(z_values: &[f64], with_infinite: bool) -> Vec<Job> {
    let mut jobs = Vec::new();
    let mut sizes = vec![AlphabetSize::Finite(4)];
    if with_infinite {
        sizes.push(AlphabetSize::Infinite);
    }
    for n in sizes {
        for &z in z_values {
            for i in 1..=20 {
                jobs.push(Job::DrUpper { n, z, tau: i as f64 * 0.05 });
            }
        }
    }
    jobs
}

/// Realistic DR at N = 4, z = 0.1 over 0..5 dB for nbar in {0, 0.01, 0.1}.
fn dr_jobs() -> Vec<Job> {
    let mut jobs = Vec::new();
    for nbar in [0.0, 0.01, 0.1] {
        for i in 0..=20 {
            jobs.push(Job::Dr { z: 0.1, db: i as f64 * 0.25, nbar });
        }
    }
    jobs
}

/// Realistic RR four-state curves (pure loss and excess noise epsilon) plus
/// the Gaussian baseline at modulation variance vm, over 0.5..20 dB. The
/// noisy curves start above 0 dB: the entangling-cloner dilation of a noisy
/// channel needs tau < 1.
fn rr_jobs(z: f64, epsilon: f64, vm: f64) -> Vec<Job> {
    let dbs: Vec<f64> = (1..=40).map(|i| i as f64 * 0.5).collect();
    let mut jobs = Vec::new();
    for &db in &dbs {
        jobs.push(Job::Rr { z, db, epsilon: 0.0 });
    }
    for &db in &dbs {
        jobs.push(Job::Rr { z, db, epsilon });
    }
    for &db in &dbs {
        jobs.push(Job::Gaussian { vm, db, epsilon: 0.0 });
    }
    for &db in &dbs {
        jobs.push(Job::Gaussian { vm, db, epsilon });
    }
    jobs
}

fn evaluate(job: Job) -> Result<Row> {
    match job {
        Job::Entropy { n, z } => {
            let bits = source_entropy(z, n).map_err(|e| anyhow!("{e}"))?;
            Ok(Row::entropy(n, z, bits))
        }
        Job::DrUpper { n, z, tau } => {
            let p = dr_upper_point(z, n, tau).map_err(|e| anyhow!("{e}"))?;
            Ok(Row::from_rate_point(-10.0 * tau.log10(), None, &p))
        }
        Job::Dr { z, db, nbar } => {
            let c = Constellation::new(z, 4).map_err(|e| anyhow!("{e}"))?;
            let ch = ChannelParams::new(db_to_tau(db), nbar).map_err(|e| anyhow!("{e}"))?;
            let p = rate_dr(&c, &ch, &RateOptions::default()).map_err(|e| anyhow!("{e}"))?;
            Ok(Row::from_rate_point(db, None, &p))
        }
        Job::Rr { z, db, epsilon } => {
            let c = Constellation::new(z, 4).map_err(|e| anyhow!("{e}"))?;
            let ch =
                ChannelParams::from_epsilon(db_to_tau(db), epsilon, EpsilonConvention::InputReferred)
                    .map_err(|e| anyhow!("{e}"))?;
            let p = rate_rr(&c, &ch, &RateOptions::default()).map_err(|e| anyhow!("{e}"))?;
            Ok(Row::from_rate_point(db, Some(epsilon), &p))
        }
        Job::Gaussian { vm, db, epsilon } => {
            let ch =
                ChannelParams::from_epsilon(db_to_tau(db), epsilon, EpsilonConvention::InputReferred)
                    .map_err(|e| anyhow!("{e}"))?;
            let p = gaussian_rr_point(vm, &ch, 1.0);
            Ok(Row::from_rate_point(db, Some(epsilon), &p))
        }
    }
}

//! Sweep execution: expand the resolved config into jobs, evaluate them in
//! parallel, and keep the output rows in deterministic Cartesian order
//! (amplitude-outer, channel-inner).

use anyhow::{anyhow, bail, Result};
use rayon::prelude::*;

use cvqkd::channel::ChannelParams;
use cvqkd::constellation::{AlphabetSize, Constellation};
use cvqkd::fock::FockCutoff;
use cvqkd::rates::{
    dr_upper_point, gaussian_rr_point, rate_dr, rate_rr, QuadratureGrid, RateOptions,
};

use crate::config::{ChannelPoint, DirectionArg, ResolvedSweep};
use crate::output::Row;

pub fn run_sweep(cfg: &ResolvedSweep) -> Result<Vec<Row>> {
    let jobs: Vec<(f64, ChannelPoint)> = cfg
        .amplitudes
        .iter()
        .flat_map(|&a| cfg.channels.iter().map(move |&p| (a, p)))
        .collect();

    jobs.par_iter()
        .map(|&(amplitude, point)| evaluate(cfg, amplitude, point))
        .collect()
}

fn evaluate(cfg: &ResolvedSweep, amplitude: f64, point: ChannelPoint) -> Result<Row> {
    let ch = ChannelParams::new(point.tau, point.nbar).map_err(|e| anyhow!("{e}"))?;
    match cfg.direction {
        DirectionArg::Gaussian => {
            let p = gaussian_rr_point(amplitude, &ch, cfg.beta);
            Ok(Row::from_rate_point(point.db, point.epsilon, &p))
        }
        DirectionArg::DrUpper => {
            let p = dr_upper_point(amplitude, cfg.n, point.tau).map_err(|e| anyhow!("{e}"))?;
            Ok(Row::from_rate_point(point.db, point.epsilon, &p))
        }
        DirectionArg::Dr | DirectionArg::Rr => {
            let n = match cfg.n {
                AlphabetSize::Finite(n) => n,
                AlphabetSize::Infinite => bail!("realistic rates need a finite alphabet"),
            };
            let c = Constellation::new(amplitude, n).map_err(|e| anyhow!("{e}"))?;
            let opts = rate_options(cfg, &c, &ch)?;
            let p = match cfg.direction {
                DirectionArg::Dr => rate_dr(&c, &ch, &opts),
                DirectionArg::Rr => rate_rr(&c, &ch, &opts),
                _ => unreachable!(),
            }
            .map_err(|e| anyhow!("{e}"))?;
            Ok(Row::from_rate_point(point.db, point.epsilon, &p))
        }
    }
}

fn rate_options(cfg: &ResolvedSweep, c: &Constellation, ch: &ChannelParams) -> Result<RateOptions> {
    let cutoff = cfg
        .cutoff
        .map(FockCutoff::with_dim)
        .transpose()
        .map_err(|e| anyhow!("numerics.cutoff: {e}"))?;
    let grid = match (cfg.grid_radial, cfg.grid_angular) {
        (None, None) => None,
        (radial, angular) => Some(QuadratureGrid::new(
            radial.unwrap_or(80),
            angular.unwrap_or(32),
            c.n(),
            QuadratureGrid::default_r_max(c, ch),
        )),
    };
    Ok(RateOptions {
        beta: cfg.beta,
        mode: cfg.mode.to_mode(),
        cutoff,
        grid,
        ..RateOptions::default()
    })
}

//! Sweep configuration: JSON document model, flag overrides and resolution
//! into a flat, validated job description.

use anyhow::{anyhow, bail, Result};
use serde::Deserialize;

use cvqkd::channel::{ChannelParams, ConditioningMode, EpsilonConvention};
use cvqkd::constellation::AlphabetSize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum DirectionArg {
    Dr,
    Rr,
    #[value(name = "dr-upper")]
    DrUpper,
    Gaussian,
}

impl DirectionArg {

    fn parse(s: &str) -> Result<Self> {
        match s {
            "dr" => Ok(DirectionArg::Dr),
            "rr" => Ok(DirectionArg::Rr),
            "dr-upper" => Ok(DirectionArg::DrUpper),
            "gaussian" => Ok(DirectionArg::Gaussian),
            other => bail!("reconciliation.direction: unknown value {other:?}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ModeArg {
    Exact,
    #[value(name = "strict-paper")]
    StrictPaper,
}

impl ModeArg {
    pub fn to_mode(self) -> ConditioningMode {
        match self {
            ModeArg::Exact => ConditioningMode::Exact,
            ModeArg::StrictPaper => ConditioningMode::StrictPaper,
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(ModeArg::Exact),
            "strict-paper" => Ok(ModeArg::StrictPaper),
            other => bail!("reconciliation.mode: unknown value {other:?}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ConventionArg {
    Input,
    Output,
}

impl ConventionArg {
    pub fn to_convention(self) -> EpsilonConvention {
        match self {
            ConventionArg::Input => EpsilonConvention::InputReferred,
            ConventionArg::Output => EpsilonConvention::OutputReferred,
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "input" => Ok(ConventionArg::Input),
            "output" => Ok(ConventionArg::Output),
            other => bail!("channel.convention: unknown value {other:?}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

impl FormatArg {
    fn parse(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(FormatArg::Csv),
            "json" => Ok(FormatArg::Json),
            other => bail!("output.format: unknown value {other:?}"),
        }
    }
}

/// The JSON sweep document. Flags mirror every field and take precedence.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepDocument {
    #[serde(default)]
    pub protocol: ProtocolSection,
    #[serde(default)]
    pub channel: ChannelSection,
    #[serde(default)]
    pub reconciliation: ReconciliationSection,
    #[serde(default)]
    pub numerics: NumericsSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSection {
    /// Alphabet size: a positive integer or the string "inf".
    pub n: Option<serde_json::Value>,
    pub z: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    pub db: Option<Vec<f64>>,
    pub tau: Option<Vec<f64>>,
    pub nbar: Option<f64>,
    pub epsilon: Option<f64>,
    /// "input" (default) or "output".
    pub convention: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconciliationSection {
    pub direction: Option<String>,
    pub mode: Option<String>,
    pub beta: Option<f64>,
    pub vm: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsSection {
    pub cutoff: Option<usize>,
    pub grid_radial: Option<usize>,
    pub grid_angular: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub path: Option<String>,
    pub format: Option<String>,
}

/// Flag-level overrides collected from the command line (all optional).
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub n: Option<String>,
    pub z: Option<String>,
    pub db: Option<String>,
    pub tau: Option<String>,
    pub nbar: Option<f64>,
    pub epsilon: Option<f64>,
    pub convention: Option<ConventionArg>,
    pub direction: Option<DirectionArg>,
    pub mode: Option<ModeArg>,
    pub beta: Option<f64>,
    pub vm: Option<String>,
    pub cutoff: Option<usize>,
    pub grid_radial: Option<usize>,
    pub grid_angular: Option<usize>,
    pub out: Option<String>,
    pub format: Option<FormatArg>,
}

/// One resolved channel point of the sweep.
#[derive(Debug, Clone, Copy)]
pub struct ChannelPoint {
    pub db: f64,
    pub tau: f64,
    pub nbar: f64,
    pub epsilon: Option<f64>,
}

/// A fully validated sweep: Cartesian order is amplitude-outer (z or vm),
/// channel-inner.
#[derive(Debug, Clone)]
pub struct ResolvedSweep {
    pub direction: DirectionArg,
    pub n: AlphabetSize,
    pub amplitudes: Vec<f64>, // z values, or vm values for the Gaussian baseline
    pub channels: Vec<ChannelPoint>,
    pub mode: ModeArg,
    pub beta: f64,
    pub cutoff: Option<usize>,
    pub grid_radial: Option<usize>,
    pub grid_angular: Option<usize>,
    pub out: Option<String>,
    pub format: FormatArg,
}

pub fn db_to_tau(db: f64) -> f64 {
    10f64.powf(-db / 10.0)
}

pub fn tau_to_db(tau: f64) -> f64 {
    -10.0 * tau.log10()
}

/// Parse a comma-separated list of numbers, where each element may also be a
/// `start:step:end` range (inclusive end within half a step).
pub fn parse_f64_list(s: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for item in s.split(',') {
        let item = item.trim();
        if item.is_empty() {
            continue;
        }
        if let Some((a, rest)) = item.split_once(':') {
            let (step, end) = rest
                .split_once(':')
                .ok_or_else(|| anyhow!("range {item:?} must be start:step:end"))?;
            let a: f64 = a.trim().parse()?;
            let step: f64 = step.trim().parse()?;
            let end: f64 = end.trim().parse()?;
            if step <= 0.0 || end < a {
                bail!("range {item:?} must have a positive step and end >= start");
            }
            let count = ((end - a) / step + 0.5).floor() as usize;
            for i in 0..=count {
                out.push(a + step * i as f64);
            }
        } else {
            out.push(item.parse()?);
        }
    }
    if out.is_empty() {
        bail!("empty number list");
    }
    Ok(out)
}

pub fn parse_alphabet(s: &str) -> Result<AlphabetSize> {
    let s = s.trim();
    if s.eq_ignore_ascii_case("inf") || s == "∞" {
        return Ok(AlphabetSize::Infinite);
    }
    let n: usize = s
        .parse()
        .map_err(|_| anyhow!("protocol.n: expected a positive integer or \"inf\", got {s:?}"))?;
    if n == 0 {
        bail!("protocol.n: must be >= 1");
    }
    Ok(AlphabetSize::Finite(n))
}

fn alphabet_from_json(v: &serde_json::Value) -> Result<AlphabetSize> {
    match v {
        serde_json::Value::Number(n) => {
            let i = n
                .as_u64()
                .ok_or_else(|| anyhow!("protocol.n: expected a positive integer, got {n}"))?;
            parse_alphabet(&i.to_string())
        }
        serde_json::Value::String(s) => parse_alphabet(s),
        other => bail!("protocol.n: expected an integer or \"inf\", got {other}"),
    }
}

/// Merge a config document with flag overrides and validate everything.
pub fn resolve(doc: SweepDocument, ov: &Overrides) -> Result<ResolvedSweep> {
    let direction = match (&ov.direction, &doc.reconciliation.direction) {
        (Some(d), _) => *d,
        (None, Some(s)) => DirectionArg::parse(s)?,
        (None, None) => bail!("reconciliation.direction: required (dr | rr | dr-upper | gaussian)"),
    };

    let n = match (&ov.n, &doc.protocol.n) {
        (Some(s), _) => parse_alphabet(s)?,
        (None, Some(v)) => alphabet_from_json(v)?,
        (None, None) => AlphabetSize::Finite(4),
    };
    if matches!(n, AlphabetSize::Infinite)
        && !matches!(direction, DirectionArg::DrUpper | DirectionArg::Gaussian)
    {
        bail!("protocol.n: the realistic dr/rr rates need a finite alphabet");
    }

    let amplitudes = if direction == DirectionArg::Gaussian {
        match (&ov.vm, &doc.reconciliation.vm) {
            (Some(s), _) => parse_f64_list(s).map_err(|e| anyhow!("reconciliation.vm: {e}"))?,
            (None, Some(v)) => v.clone(),
            (None, None) => bail!("reconciliation.vm: required for the gaussian direction"),
        }
    } else {
        match (&ov.z, &doc.protocol.z) {
            (Some(s), _) => parse_f64_list(s).map_err(|e| anyhow!("protocol.z: {e}"))?,
            (None, Some(v)) => v.clone(),
            (None, None) => bail!("protocol.z: required"),
        }
    };
    if amplitudes.is_empty() {
        bail!("protocol.z / reconciliation.vm: list must be nonempty");
    }
    if amplitudes.iter().any(|v| !v.is_finite() || *v < 0.0) {
        bail!("protocol.z / reconciliation.vm: values must be finite and >= 0");
    }

    // Exactly one of the attenuation forms.
    let db_list = match (&ov.db, &doc.channel.db) {
        (Some(s), _) => Some(parse_f64_list(s).map_err(|e| anyhow!("channel.db: {e}"))?),
        (None, Some(v)) => Some(v.clone()),
        (None, None) => None,
    };
    let tau_list = match (&ov.tau, &doc.channel.tau) {
        (Some(s), _) => Some(parse_f64_list(s).map_err(|e| anyhow!("channel.tau: {e}"))?),
        (None, Some(v)) => Some(v.clone()),
        (None, None) => None,
    };
    let (db_vals, tau_vals) = match (db_list, tau_list) {
        (Some(d), None) => {
            let taus: Vec<f64> = d.iter().map(|&x| db_to_tau(x)).collect();
            (d, taus)
        }
        (None, Some(t)) => {
            if t.iter().any(|&x| !(x > 0.0 && x <= 1.0)) {
                bail!("channel.tau: values must lie in (0, 1]");
            }
            let dbs: Vec<f64> = t.iter().map(|&x| tau_to_db(x)).collect();
            (dbs, t)
        }
        (Some(_), Some(_)) => bail!("channel: give exactly one of db or tau, not both"),
        (None, None) => bail!("channel: give exactly one of db or tau"),
    };

    // Exactly one of the noise forms (nbar defaults to 0 when neither given).
    let nbar = ov.nbar.or(doc.channel.nbar);
    let epsilon = ov.epsilon.or(doc.channel.epsilon);
    let convention = match (&ov.convention, &doc.channel.convention) {
        (Some(c), _) => *c,
        (None, Some(s)) => ConventionArg::parse(s)?,
        (None, None) => ConventionArg::Input,
    };
    if nbar.is_some() && epsilon.is_some() {
        bail!("channel: give exactly one of nbar or epsilon, not both");
    }
    if let Some(x) = nbar {
        if !x.is_finite() || x < 0.0 {
            bail!("channel.nbar: must be >= 0");
        }
    }
    if let Some(x) = epsilon {
        if !x.is_finite() || x < 0.0 {
            bail!("channel.epsilon: must be >= 0");
        }
    }

    let mut channels = Vec::with_capacity(db_vals.len());
    for (&db, &tau) in db_vals.iter().zip(&tau_vals) {
        let point_nbar = match (nbar, epsilon) {
            (Some(x), None) => x,
            (None, Some(e)) => {
                ChannelParams::from_epsilon(tau, e, convention.to_convention())
                    .map_err(|err| anyhow!("channel.epsilon at {db} dB: {err}"))?
                    .nbar()
            }
            (None, None) => 0.0,
            (Some(_), Some(_)) => unreachable!(),
        };
        channels.push(ChannelPoint {
            db,
            tau,
            nbar: point_nbar,
            epsilon,
        });
    }

    if direction == DirectionArg::DrUpper {
        if let Some(p) = channels.iter().find(|p| p.nbar > 0.0) {
            bail!(
                "channel.nbar: dr-upper is a pure-loss bound; got nbar = {} at {} dB",
                p.nbar,
                p.db
            );
        }
    }

    let mode = match (&ov.mode, &doc.reconciliation.mode) {
        (Some(m), _) => *m,
        (None, Some(s)) => ModeArg::parse(s)?,
        (None, None) => ModeArg::Exact,
    };
    let beta = ov.beta.or(doc.reconciliation.beta).unwrap_or(1.0);
    if !(beta > 0.0 && beta <= 1.0) {
        bail!("reconciliation.beta: must lie in (0, 1]");
    }
    let cutoff = ov.cutoff.or(doc.numerics.cutoff);
    if let Some(d) = cutoff {
        if d < 2 {
            bail!("numerics.cutoff: must be >= 2");
        }
    }
    let grid_radial = ov.grid_radial.or(doc.numerics.grid_radial);
    let grid_angular = ov.grid_angular.or(doc.numerics.grid_angular);
    if grid_radial == Some(0) || grid_angular == Some(0) {
        bail!("numerics.grid_radial / grid_angular: must be >= 1");
    }

    let out = ov.out.clone().or(doc.output.path);
    let format = match (&ov.format, &doc.output.format) {
        (Some(f), _) => *f,
        (None, Some(s)) => FormatArg::parse(s)?,
        (None, None) => FormatArg::Csv,
    };

    Ok(ResolvedSweep {
        direction,
        n,
        amplitudes,
        channels,
        mode,
        beta,
        cutoff,
        grid_radial,
        grid_angular,
        out,
        format,
    })
}

//! Result rows and their CSV / JSON serialisations.
//!
//! CSV columns are fixed: attenuation_db, tau, nbar, epsilon, N, z,
//! direction, i_ab_bits, holevo_bits, rate_bits, cutoff_dim, converged.
//! Floats carry 9 significant digits; inapplicable cells are left empty
//! (epsilon when nbar was given directly, N for the Gaussian baseline,
//! i_ab/holevo for entropy rows).

use serde::Serialize;

use cvqkd::constellation::AlphabetSize;
use cvqkd::rates::RatePoint;

pub const CSV_HEADER: &str =
    "attenuation_db,tau,nbar,epsilon,N,z,direction,i_ab_bits,holevo_bits,rate_bits,cutoff_dim,converged";

#[derive(Debug, Clone, Serialize)]
pub struct Row {
    pub attenuation_db: f64,
    pub tau: f64,
    pub nbar: f64,
    pub epsilon: Option<f64>,
    /// Alphabet size as a string ("4", "inf"); absent for the Gaussian rows.
    pub n: Option<String>,
    pub z: f64,
    pub direction: String,
    pub i_ab_bits: Option<f64>,
    pub holevo_bits: Option<f64>,
    pub rate_bits: f64,
    pub cutoff_dim: usize,
    pub converged: bool,
}

impl Row {
    pub fn from_rate_point(db: f64, epsilon: Option<f64>, p: &RatePoint) -> Self {
        Row {
            attenuation_db: db,
            tau: p.tau,
            nbar: p.nbar,
            epsilon,
            n: p.alphabet.map(|a| a.to_string()),
            z: p.z,
            direction: p.direction.to_string(),
            i_ab_bits: Some(p.i_ab),
            holevo_bits: Some(p.holevo),
            rate_bits: p.rate,
            cutoff_dim: p.diagnostics.cutoff_dim,
            converged: p.diagnostics.converged,
        }
    }

    pub fn entropy(n: AlphabetSize, z: f64, bits: f64) -> Self {
        Row {
            attenuation_db: 0.0,
            tau: 1.0,
            nbar: 0.0,
            epsilon: None,
            n: Some(n.to_string()),
            z,
            direction: "entropy".into(),
            i_ab_bits: None,
            holevo_bits: None,
            rate_bits: bits,
            cutoff_dim: 0,
            converged: true,
        }
    }
}

/// 9 significant digits, scientific notation; stable across platforms.
pub fn fmt9(x: f64) -> String {
    format!("{x:.8e}")
}

fn fmt9_opt(x: Option<f64>) -> String {
    x.map(fmt9).unwrap_or_default()
}

pub fn to_csv(rows: &[Row]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            fmt9(r.attenuation_db),
            fmt9(r.tau),
            fmt9(r.nbar),
            fmt9_opt(r.epsilon),
            r.n.as_deref().unwrap_or(""),
            fmt9(r.z),
            r.direction,
            fmt9_opt(r.i_ab_bits),
            fmt9_opt(r.holevo_bits),
            fmt9(r.rate_bits),
            r.cutoff_dim,
            r.converged,
        ));
    }
    out
}

pub fn to_json(rows: &[Row]) -> String {
    let mut s = serde_json::to_string_pretty(rows).expect("row serialisation cannot fail");
    s.push('\n');
    s
}

//! Output records and their CSV/JSON encodings.
//!
//! Floats are written in the shortest form that parses back to the same
//! value. Non-finite values become `inf`, `-inf` or `NaN` (strings in JSON).

use std::io::Write;

use gt_core::bounds::{BoundMode, BoundReport};
use gt_core::harness::{DecoderKind, ExperimentConfig, SweepRow, TrialStats};
use gt_core::model::resolve_alpha;
use serde::{Deserialize, Serialize};

pub mod float {
    use serde::de::{self, Visitor};
    use serde::{Deserializer, Serializer};
    use std::fmt;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("NaN")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    struct FloatVisitor;

    impl Visitor<'_> for FloatVisitor {
        type Value = f64;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a number or one of \"inf\", \"-inf\", \"NaN\"")
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
            Ok(v)
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
            v.parse().map_err(|_| E::invalid_value(de::Unexpected::Str(v), &self))
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        d.deserialize_any(FloatVisitor)
    }

    pub mod option {
        use serde::{Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
            match v {
                Some(x) => super::serialize(x, s),
                None => s.serialize_none(),
            }
        }

        #[derive(Deserialize)]
        struct Wrapped(#[serde(with = "super")] f64);

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
            Ok(Option::<Wrapped>::deserialize(d)?.map(|w| w.0))
        }
    }
}

pub type WriteResult = Result<(), Box<dyn std::error::Error + Send + Sync>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

fn decoder_name(kind: DecoderKind) -> &'static str {
    match kind {
        DecoderKind::Ncomp { .. } => "ncomp",
        DecoderKind::Ml => "ml",
    }
}

pub fn mode_name(mode: BoundMode) -> &'static str {
    match mode {
        BoundMode::ExactFiniteN => "exact",
        BoundMode::Asymptotic => "asymptotic",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub n: usize,
    pub d: usize,
    #[serde(with = "float")]
    pub q: f64,
    #[serde(with = "float")]
    pub alpha: f64,
    #[serde(rename = "N")]
    pub tests: usize,
    /// NCOMP slack Δ; empty for ML.
    #[serde(with = "float::option")]
    pub delta: Option<f64>,
}

/// One simulation result. CSV flattens `params` into the leading columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateRecord {
    pub params: SimParams,
    pub decoder: String,
    pub trials: u64,
    pub failures: u64,
    pub fn_events: u64,
    pub fp_events: u64,
    #[serde(with = "float")]
    pub p_e_hat: f64,
    #[serde(with = "float")]
    pub ci_low: f64,
    #[serde(with = "float")]
    pub ci_high: f64,
    pub seed: u64,
}

impl SimulateRecord {
    pub fn new(config: &ExperimentConfig, delta: Option<f64>, stats: &TrialStats) -> gt_core::Result<Self> {
        let p = &config.params;
        Ok(Self {
            params: SimParams { n: p.n, d: p.d, q: p.q, alpha: resolve_alpha(p)?, tests: p.tests, delta },
            decoder: decoder_name(config.decoder).to_string(),
            trials: stats.trials,
            failures: stats.failures,
            fn_events: stats.fn_events,
            fp_events: stats.fp_events,
            p_e_hat: stats.p_e_hat,
            ci_low: stats.ci_low,
            ci_high: stats.ci_high,
            seed: config.master_seed,
        })
    }

    pub fn flat(&self) -> SimulateRow {
        let p = &self.params;
        SimulateRow {
            n: p.n,
            d: p.d,
            q: p.q,
            alpha: p.alpha,
            tests: p.tests,
            delta: p.delta,
            decoder: self.decoder.clone(),
            trials: self.trials,
            failures: self.failures,
            fn_events: self.fn_events,
            fp_events: self.fp_events,
            p_e_hat: self.p_e_hat,
            ci_low: self.ci_low,
            ci_high: self.ci_high,
            seed: self.seed,
        }
    }
}

/// Flat CSV layout of [`SimulateRecord`]; also used for the oracle table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateRow {
    pub n: usize,
    pub d: usize,
    #[serde(with = "float")]
    pub q: f64,
    #[serde(with = "float")]
    pub alpha: f64,
    #[serde(rename = "N")]
    pub tests: usize,
    #[serde(with = "float::option")]
    pub delta: Option<f64>,
    pub decoder: String,
    pub trials: u64,
    pub failures: u64,
    pub fn_events: u64,
    pub fp_events: u64,
    #[serde(with = "float")]
    pub p_e_hat: f64,
    #[serde(with = "float")]
    pub ci_low: f64,
    #[serde(with = "float")]
    pub ci_high: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsRow {
    pub n: usize,
    pub d: usize,
    #[serde(with = "float")]
    pub q: f64,
    #[serde(with = "float")]
    pub alpha: f64,
    #[serde(with = "float")]
    pub theta: f64,
    pub mode: String,
    #[serde(with = "float")]
    pub eta: f64,
    #[serde(with = "float")]
    pub psi: f64,
    #[serde(with = "float")]
    pub delta_star: f64,
    #[serde(rename = "N_fn", with = "float")]
    pub n_fn: f64,
    #[serde(rename = "N_fp", with = "float")]
    pub n_fp: f64,
    #[serde(rename = "N_ach", with = "float")]
    pub n_ach: f64,
    #[serde(rename = "N_log_n", with = "float")]
    pub n_log_n: f64,
    #[serde(with = "float")]
    pub prefactor: f64,
    #[serde(rename = "N_conv", with = "float")]
    pub n_conv: f64,
    #[serde(with = "float")]
    pub rate_ncomp: f64,
    #[serde(with = "float")]
    pub rate_it: f64,
}

impl From<&BoundReport> for BoundsRow {
    fn from(r: &BoundReport) -> Self {
        Self {
            n: r.n,
            d: r.d,
            q: r.q,
            alpha: r.alpha,
            theta: r.theta,
            mode: mode_name(r.mode).to_string(),
            eta: r.eta,
            psi: r.psi,
            delta_star: r.delta_star,
            n_fn: r.n_false_neg,
            n_fp: r.n_false_pos,
            n_ach: r.n_achievability,
            n_log_n: r.n_log_n,
            prefactor: r.prefactor,
            n_conv: r.n_converse,
            rate_ncomp: r.rate_ncomp,
            rate_it: r.rate_it,
        }
    }
}

/// Sweep output; column order is part of the interface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCsvRow {
    pub n: usize,
    pub d: usize,
    #[serde(with = "float")]
    pub q: f64,
    #[serde(with = "float")]
    pub alpha: f64,
    #[serde(rename = "N")]
    pub tests: usize,
    #[serde(with = "float::option")]
    pub delta: Option<f64>,
    pub decoder: String,
    pub trials: u64,
    pub failures: u64,
    pub fn_events: u64,
    pub fp_events: u64,
    #[serde(with = "float")]
    pub p_e_hat: f64,
    #[serde(with = "float")]
    pub ci_low: f64,
    #[serde(with = "float")]
    pub ci_high: f64,
    #[serde(with = "float")]
    pub eta: f64,
    #[serde(with = "float")]
    pub psi: f64,
    #[serde(with = "float")]
    pub delta_star: f64,
    #[serde(rename = "N_fn", with = "float")]
    pub n_fn: f64,
    #[serde(rename = "N_fp", with = "float")]
    pub n_fp: f64,
    #[serde(rename = "N_ach", with = "float")]
    pub n_ach: f64,
    #[serde(rename = "N_conv", with = "float")]
    pub n_conv: f64,
    #[serde(with = "float")]
    pub rate_ncomp: f64,
    #[serde(with = "float")]
    pub rate_it: f64,
    pub seed: u64,
}

pub const SWEEP_COLUMNS: [&str; 24] = [
    "n", "d", "q", "alpha", "N", "delta", "decoder", "trials", "failures", "fn_events", "fp_events", "p_e_hat",
    "ci_low", "ci_high", "eta", "psi", "delta_star", "N_fn", "N_fp", "N_ach", "N_conv", "rate_ncomp", "rate_it",
    "seed",
];

impl From<&SweepRow> for SweepCsvRow {
    fn from(row: &SweepRow) -> Self {
        let p = &row.config.params;
        let b = &row.bounds;
        Self {
            n: p.n,
            d: p.d,
            q: p.q,
            alpha: b.alpha,
            tests: p.tests,
            delta: row.delta,
            decoder: decoder_name(row.config.decoder).to_string(),
            trials: row.stats.trials,
            failures: row.stats.failures,
            fn_events: row.stats.fn_events,
            fp_events: row.stats.fp_events,
            p_e_hat: row.stats.p_e_hat,
            ci_low: row.stats.ci_low,
            ci_high: row.stats.ci_high,
            eta: b.eta,
            psi: b.psi,
            delta_star: b.delta_star,
            n_fn: b.n_false_neg,
            n_fp: b.n_false_pos,
            n_ach: b.n_achievability,
            n_conv: b.n_converse,
            rate_ncomp: b.rate_ncomp,
            rate_it: b.rate_it,
            seed: row.config.master_seed,
        }
    }
}

/// Writes rows as CSV (header + LF-terminated records) or a JSON array.
pub fn write_rows<T: Serialize, W: Write>(rows: &[T], format: Format, mut out: W) -> WriteResult {
    match format {
        Format::Csv => {
            let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
            for row in rows {
                w.serialize(row)?;
            }
            w.flush()?;
        }
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, rows)?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}

pub fn write_object<T: Serialize, W: Write>(value: &T, mut out: W) -> WriteResult {
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}

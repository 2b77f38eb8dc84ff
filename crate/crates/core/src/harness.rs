//! Seeded Monte Carlo estimation of the exact-recovery error probability.
//!
//! Trial `t` of an experiment draws everything it needs from
//! `SeedSpec { master_seed, stream_id: t }`: the defective set, the design
//! (unless a fixed design is requested) and the dilution draws. Counters are
//! summed, so the worker count never changes a result.

use std::ops::Add;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{bound_report, BoundMode, BoundReport};
use crate::decode::{ml_guard, ml_oracle_decode, ncomp_decode, optimal_delta, DeltaForm};
use crate::error::{Error, Result};
use crate::model::{dilute_outcomes, gen_design, resolve_alpha, DefectiveSet, DesignMatrix, ProblemParams, SeedSpec};

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// Stream reserved for the shared design in fixed-design mode; trial streams
/// count up from zero.
const FIXED_DESIGN_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DeltaMode {
    /// Δ̃ from the finite-n closed form.
    Explicit,
    /// Δ̃ from the θ form.
    Asymptotic,
    Manual(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DecoderKind {
    Ncomp { delta: DeltaMode },
    Ml,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub params: ProblemParams,
    pub decoder: DecoderKind,
    pub trials: u64,
    pub master_seed: u64,
    /// Worker count; `None` uses the global rayon pool. Never affects results.
    pub parallelism: Option<usize>,
    /// Reuse one design for every trial instead of drawing a fresh one.
    pub fixed_design: bool,
}

impl ExperimentConfig {
    pub fn new(params: ProblemParams, decoder: DecoderKind, trials: u64, master_seed: u64) -> Self {
        Self { params, decoder, trials, master_seed, parallelism: None, fixed_design: false }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.trials == 0 {
            return Err(Error::invalid("need at least one trial"));
        }
        if self.decoder == DecoderKind::Ml {
            ml_guard(self.params.n, self.params.d)?;
        }
        self.resolved_delta().map(|_| ())
    }

    /// The NCOMP slack Δ actually used, `None` for ML.
    pub fn resolved_delta(&self) -> Result<Option<f64>> {
        let DecoderKind::Ncomp { delta } = self.decoder else {
            return Ok(None);
        };
        let form = match delta {
            DeltaMode::Manual(v) => {
                if !v.is_finite() {
                    return Err(Error::invalid(format!("slack must be finite, got {v}")));
                }
                return Ok(Some(v));
            }
            DeltaMode::Explicit => DeltaForm::ExplicitFiniteN,
            DeltaMode::Asymptotic => DeltaForm::Asymptotic,
        };
        let p = &self.params;
        let alpha = resolve_alpha(p)?;
        Ok(Some(optimal_delta(p.n, p.d, p.q, alpha, form)? - 1.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialStats {
    pub trials: u64,
    /// Trials whose estimate differs from the true set.
    pub failures: u64,
    /// Trials with at least one missed defective.
    pub fn_events: u64,
    /// Trials with at least one non-defective flagged.
    pub fp_events: u64,
    pub p_e_hat: f64,
    /// 95% Wilson score interval.
    pub ci_low: f64,
    pub ci_high: f64,
}

impl TrialStats {
    pub fn from_counts(trials: u64, failures: u64, fn_events: u64, fp_events: u64) -> Self {
        let p_e_hat = if trials == 0 { 0.0 } else { failures as f64 / trials as f64 };
        let (ci_low, ci_high) = wilson_interval(failures, trials, Z_95);
        Self { trials, failures, fn_events, fp_events, p_e_hat, ci_low, ci_high }
    }

    /// Binomial standard error of `p_e_hat`.
    pub fn standard_error(&self) -> f64 {
        (self.p_e_hat * (1.0 - self.p_e_hat) / self.trials as f64).sqrt()
    }
}

/// `sqrt(se_a² + se_b²)` for two independent rate estimates.
pub fn pooled_standard_error(a: &TrialStats, b: &TrialStats) -> f64 {
    a.standard_error().hypot(b.standard_error())
}

/// Wilson score interval for `successes` out of `trials`, clamped to [0, 1]
/// and to contain the point estimate.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).clamp(0.0, p), (centre + half).clamp(p, 1.0))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Tally {
    trials: u64,
    failures: u64,
    fn_events: u64,
    fp_events: u64,
}

impl Add for Tally {
    type Output = Tally;

    fn add(self, o: Tally) -> Tally {
        Tally {
            trials: self.trials + o.trials,
            failures: self.failures + o.failures,
            fn_events: self.fn_events + o.fn_events,
            fp_events: self.fp_events + o.fp_events,
        }
    }
}

fn score(truth: &DefectiveSet, estimate: &[usize]) -> Tally {
    let missed = truth.indices().iter().any(|i| estimate.binary_search(i).is_err());
    let false_alarm = estimate.iter().any(|&i| !truth.contains(i));
    Tally {
        trials: 1,
        failures: (truth.indices() != estimate) as u64,
        fn_events: missed as u64,
        fp_events: false_alarm as u64,
    }
}

struct Prepared {
    params: ProblemParams,
    decoder: DecoderKind,
    delta: Option<f64>,
    master_seed: u64,
    fixed: Option<DesignMatrix>,
}

impl Prepared {
    fn trial(&self, t: u64) -> Result<Tally> {
        let p = &self.params;
        let seed = SeedSpec::new(self.master_seed, t);
        let truth = DefectiveSet::random(p.n, p.d, seed)?;
        let fresh;
        let design = match &self.fixed {
            Some(m) => m,
            None => {
                fresh = gen_design(p, seed)?;
                &fresh
            }
        };
        let y = dilute_outcomes(design, &truth, p.q, seed)?;
        let estimate = match (self.decoder, self.delta) {
            (DecoderKind::Ncomp { .. }, Some(delta)) => ncomp_decode(design, &y, p.q, delta)?.estimate,
            (DecoderKind::Ml, _) => match ml_oracle_decode(design, &y, p.q, p.d) {
                Ok(r) => r.estimate,
                // only reachable at q = 0 when a positive test covers no candidate
                Err(Error::InconsistentOutcomes) => Vec::new(),
                Err(e) => return Err(e),
            },
            (DecoderKind::Ncomp { .. }, None) => unreachable!("slack resolved before running"),
        };
        Ok(score(&truth, &estimate))
    }
}

/// Runs `config.trials` independent trials and tallies recovery failures.
pub fn run_experiment(config: &ExperimentConfig) -> Result<TrialStats> {
    config.validate()?;
    let prepared = Prepared {
        params: config.params,
        decoder: config.decoder,
        delta: config.resolved_delta()?,
        master_seed: config.master_seed,
        fixed: if config.fixed_design {
            Some(gen_design(&config.params, SeedSpec::new(config.master_seed, FIXED_DESIGN_STREAM))?)
        } else {
            None
        },
    };
    let run = || {
        (0..config.trials)
            .into_par_iter()
            .map(|t| prepared.trial(t))
            .try_reduce(Tally::default, |a, b| Ok(a + b))
    };
    let tally = match config.parallelism {
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build()
            .map_err(|e| Error::invalid(format!("cannot build worker pool: {e}")))?
            .install(run)?,
        None => run()?,
    };
    Ok(TrialStats::from_counts(tally.trials, tally.failures, tally.fn_events, tally.fp_events))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub config: ExperimentConfig,
    /// Resolved NCOMP slack Δ, `None` for ML.
    pub delta: Option<f64>,
    pub stats: TrialStats,
    pub bounds: BoundReport,
}

/// Runs every configuration and pairs it with its bound report, in order.
/// The first failing point aborts the sweep with its index attached.
pub fn sweep(configs: &[ExperimentConfig], mode: BoundMode) -> Result<Vec<SweepRow>> {
    if configs.is_empty() {
        return Err(Error::invalid("sweep needs at least one point"));
    }
    configs
        .iter()
        .enumerate()
        .map(|(index, config)| {
            let point = || -> Result<SweepRow> {
                let stats = run_experiment(config)?;
                let p = &config.params;
                let bounds = bound_report(p.n, p.d, p.q, p.alpha, mode)?;
                Ok(SweepRow { config: config.clone(), delta: config.resolved_delta()?, stats, bounds })
            };
            point().map_err(|e| Error::SweepPoint { index, source: Box::new(e) })
        })
        .collect()
}

/// Smallest test count in `[lo, hi]` whose estimated error rate is at most
/// `epsilon`, found by bisection; `None` if even `hi` tests fall short.
///
/// Every probe reuses the master seed. The estimate is noisy, so the result
/// is only as monotone as the sampled error curve.
pub fn critical_tests(base: &ExperimentConfig, epsilon: f64, lo: usize, hi: usize) -> Result<Option<usize>> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::invalid(format!("epsilon must lie in [0, 1], got {epsilon}")));
    }
    if lo > hi {
        return Err(Error::invalid(format!("empty search range [{lo}, {hi}]")));
    }
    let rate_at = |tests: usize| -> Result<f64> {
        let mut config = base.clone();
        config.params.tests = tests;
        Ok(run_experiment(&config)?.p_e_hat)
    };
    if rate_at(hi)? > epsilon {
        return Ok(None);
    }
    let (mut lo, mut hi) = (lo, hi);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if rate_at(mid)? <= epsilon {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(Some(lo))
}

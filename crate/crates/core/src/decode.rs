//! Decoders mapping a design and its outcomes to an estimated defective set.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DesignMatrix, OutcomeVector};

/// Largest number of candidate sets the exhaustive decoder will score.
pub const ML_CANDIDATE_LIMIT: u64 = 1_000_000;

/// Per-item test counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemEvidence {
    pub item: usize,
    /// Number of tests the item was pooled in.
    pub tests_containing: u32,
    /// Number of those tests that came out positive.
    pub positive_tests_containing: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecoderId {
    Ncomp,
    Ml,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    /// Ascending item indices declared defective.
    pub estimate: Vec<usize>,
    pub evidence: Vec<ItemEvidence>,
    pub decoder: DecoderId,
}

fn check_dims(m: &DesignMatrix, y: &OutcomeVector) -> Result<()> {
    if m.rows() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "design has {} rows but {} outcomes were given",
            m.rows(),
            y.len()
        )));
    }
    Ok(())
}

/// Tallies, for every item, how many tests contain it and how many of those
/// are positive.
pub fn item_evidence(m: &DesignMatrix, y: &OutcomeVector) -> Result<Vec<ItemEvidence>> {
    check_dims(m, y)?;
    let mut evidence: Vec<ItemEvidence> = (0..m.cols())
        .map(|item| ItemEvidence { item, tests_containing: 0, positive_tests_containing: 0 })
        .collect();
    for r in 0..m.rows() {
        let positive = y.get(r) as u32;
        for c in m.row_ones(r) {
            evidence[c].tests_containing += 1;
            evidence[c].positive_tests_containing += positive;
        }
    }
    Ok(evidence)
}

/// Noisy column matching. Item `i` is declared defective iff it was tested at
/// least once and `P_i >= G_i * (1 - q (1 + delta))`.
///
/// Untested items (`G_i = 0`) are declared non-defective: they carry no
/// evidence, although the bare inequality would hold vacuously.
pub fn ncomp_decode(m: &DesignMatrix, y: &OutcomeVector, q: f64, delta: f64) -> Result<DecodeResult> {
    if !(0.0..1.0).contains(&q) {
        return Err(Error::invalid(format!("NCOMP needs 0 <= q < 1, got {q}")));
    }
    let fraction = 1.0 - q * (1.0 + delta);
    if !fraction.is_finite() {
        return Err(Error::invalid(format!("threshold 1 - q(1 + delta) is not finite for delta = {delta}")));
    }
    let evidence = item_evidence(m, y)?;
    let estimate = evidence
        .iter()
        .filter(|e| {
            e.tests_containing > 0
                && e.positive_tests_containing as f64 >= e.tests_containing as f64 * fraction
        })
        .map(|e| e.item)
        .collect();
    Ok(DecodeResult { estimate, evidence, decoder: DecoderId::Ncomp })
}

/// Which closed form to use for the NCOMP slack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DeltaForm {
    /// Finite-n expression in log d and log(n − d).
    ExplicitFiniteN,
    /// Limit form in θ = log d / log n.
    Asymptotic,
}

/// Returns `1 + Δ̃`, the slack at which the false-negative and false-positive
/// test-count branches intersect.
///
/// With `a = exp(-α(1-q))`, the value lies strictly between `a` and `a/q`.
/// For `d = 1` the explicit form degenerates (log d = 0) and the θ form is
/// used instead.
pub fn optimal_delta(n: usize, d: usize, q: f64, alpha: f64, form: DeltaForm) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::invalid(format!(
            "the feasible slack interval is empty unless 0 < q < 1, got q = {q}"
        )));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::invalid(format!("alpha must be positive, got {alpha}")));
    }
    if d == 0 || d + 1 >= n {
        return Err(Error::invalid(format!("need 0 < d < n - 1, got n = {n}, d = {d}")));
    }
    let a = (-alpha * (1.0 - q)).exp();
    let form = if d == 1 && form == DeltaForm::ExplicitFiniteN {
        log::warn!("d = 1 collapses the explicit slack formula; using the asymptotic form");
        DeltaForm::Asymptotic
    } else {
        form
    };
    let value = match form {
        DeltaForm::ExplicitFiniteN => {
            let ln_d = (d as f64).ln();
            let ln_rest = ((n - d) as f64).ln();
            let denom = ln_rest - ln_d;
            if denom == 0.0 {
                // n = 2d: same intersection written as a weighted mean of the asymptotes
                let (wd, wr) = (ln_d.sqrt(), ln_rest.sqrt());
                (wd * a / q + wr * a) / (wd + wr)
            } else {
                a / q * ((ln_d * ln_rest).sqrt() * (1.0 - q) + q * ln_rest - ln_d) / denom
            }
        }
        DeltaForm::Asymptotic => {
            let theta = crate::model::theta(n, d);
            a / q * (theta.sqrt() * (1.0 - q) + q - theta) / (1.0 - theta)
        }
    };
    Ok(value)
}

/// Number of `d`-subsets of `n` items, saturating at `u64::MAX`.
pub fn binomial_count(n: usize, d: usize) -> u64 {
    if d > n {
        return 0;
    }
    let d = d.min(n - d) as u128;
    let mut acc: u128 = 1;
    for i in 0..d {
        acc = acc * (n as u128 - i) / (i + 1);
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

/// Errors with [`Error::TooLarge`] when exhaustive search over `C(n, d)` sets
/// exceeds [`ML_CANDIDATE_LIMIT`].
pub fn ml_guard(n: usize, d: usize) -> Result<()> {
    if binomial_count(n, d) > ML_CANDIDATE_LIMIT {
        return Err(Error::TooLarge { n, d, limit: ML_CANDIDATE_LIMIT });
    }
    Ok(())
}

/// Exhaustive maximum-likelihood decoding over all size-`d` sets.
///
/// Under the dilution channel a test with `k` defective entries is negative
/// with probability `q^k`, so a candidate `S` scores
/// `sum_i y_i log(1 - q^k_i) + (1 - y_i) k_i log q`. Ties go to the
/// lexicographically smallest index sequence.
pub fn ml_oracle_decode(m: &DesignMatrix, y: &OutcomeVector, q: f64, d: usize) -> Result<DecodeResult> {
    check_dims(m, y)?;
    if !(0.0..1.0).contains(&q) {
        return Err(Error::invalid(format!("ML decoding needs 0 <= q < 1, got {q}")));
    }
    let n = m.cols();
    if d == 0 || d > n {
        return Err(Error::invalid(format!("need 0 < d <= n, got n = {n}, d = {d}")));
    }
    ml_guard(n, d)?;

    // Column-major copy: bit r of columns[c] is m[r][c].
    let words = m.rows().div_ceil(64);
    let mut columns = vec![0u64; n * words];
    for r in 0..m.rows() {
        for c in m.row_ones(r) {
            columns[c * words + r / 64] |= 1 << (r % 64);
        }
    }
    let mut positive_mask = vec![0u64; words];
    for r in (0..m.rows()).filter(|&r| y.get(r)) {
        positive_mask[r / 64] |= 1 << (r % 64);
    }

    let log_q = q.ln();
    // log P(positive | k defective entries); k = 0 is impossible
    let log_pos: Vec<f64> = (0..=d).map(|k| (1.0 - q.powi(k as i32)).ln()).collect();

    let mut candidate: Vec<usize> = (0..d).collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut positive_hist = vec![0u64; d + 1];
    loop {
        positive_hist.iter_mut().for_each(|h| *h = 0);
        let mut negative_entries = 0u64;
        for r in 0..m.rows() {
            let (w, b) = (r / 64, r % 64);
            let k = candidate.iter().filter(|&&c| columns[c * words + w] >> b & 1 == 1).count();
            if positive_mask[w] >> b & 1 == 1 {
                positive_hist[k] += 1;
            } else {
                negative_entries += k as u64;
            }
        }
        let mut score = 0.0;
        for (k, &count) in positive_hist.iter().enumerate() {
            if count > 0 {
                score += count as f64 * log_pos[k];
            }
        }
        if negative_entries > 0 {
            score += negative_entries as f64 * log_q;
        }
        if score > f64::NEG_INFINITY && best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, candidate.clone()));
        }
        if !next_combination(&mut candidate, n) {
            break;
        }
    }

    let (_, estimate) = best.ok_or(Error::InconsistentOutcomes)?;
    Ok(DecodeResult { estimate, evidence: item_evidence(m, y)?, decoder: DecoderId::Ml })
}

/// Advances to the next size-k subset of `[0, n)` in lexicographic order.
fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

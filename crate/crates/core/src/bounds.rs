//! Closed-form test-count bounds, rates and the supporting inequalities.
//!
//! All `(1 + o(1))` factors of the asymptotic statements are taken as 1.
//! Logarithms are natural unless a function says bits.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::decode::{optimal_delta, DeltaForm};
use crate::error::{Error, Result};
use crate::model::{self, AlphaMode, ProblemParams};

/// `1 - e^{-2}`, the constant from bounding `1 - e^{-2x}` below by `(1 - e^{-2}) x`.
pub const ONE_MINUS_E_NEG2: f64 = 0.864_664_716_763_387_3;

/// Truncation tolerance used for the Poisson entropy expectation inside
/// reports and rates.
pub const DEFAULT_SERIES_TOL: f64 = 1e-12;

/// Selects finite-d product forms or their limits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundMode {
    ExactFiniteN,
    Asymptotic,
}

impl BoundMode {
    fn delta_form(self) -> DeltaForm {
        match self {
            BoundMode::ExactFiniteN => DeltaForm::ExplicitFiniteN,
            BoundMode::Asymptotic => DeltaForm::Asymptotic,
        }
    }
}

/// Binary entropy in bits.
pub fn binary_entropy(rho: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::invalid(format!("binary entropy needs rho in [0, 1], got {rho}")));
    }
    Ok(entropy_bits(rho))
}

#[inline]
fn entropy_bits(rho: f64) -> f64 {
    let term = |x: f64| if x <= 0.0 { 0.0 } else { -x * x.log2() };
    term(rho) + term(1.0 - rho)
}

fn check_q_alpha_d(q: f64, alpha: f64, d: usize) -> Result<()> {
    if !(0.0..1.0).contains(&q) {
        return Err(Error::invalid(format!("need 0 <= q < 1, got {q}")));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::invalid(format!("alpha must be positive, got {alpha}")));
    }
    if d == 0 || alpha > d as f64 {
        return Err(Error::invalid(format!("need d >= 1 and alpha/d <= 1, got alpha = {alpha}, d = {d}")));
    }
    Ok(())
}

/// Probability that a test containing a given defective comes out negative:
/// every defective in the pool, that one included, is diluted.
pub fn eta(q: f64, alpha: f64, d: usize, mode: BoundMode) -> Result<f64> {
    check_q_alpha_d(q, alpha, d)?;
    Ok(match mode {
        BoundMode::ExactFiniteN => q * (1.0 - alpha / d as f64 * (1.0 - q)).powi(d as i32 - 1),
        BoundMode::Asymptotic => q * (-alpha * (1.0 - q)).exp(),
    })
}

/// Probability that a test containing a given non-defective is positive
/// because some defective joins the pool and survives dilution.
pub fn psi(q: f64, alpha: f64, d: usize, mode: BoundMode) -> Result<f64> {
    check_q_alpha_d(q, alpha, d)?;
    Ok(match mode {
        BoundMode::ExactFiniteN => 1.0 - (1.0 - alpha / d as f64 * (1.0 - q)).powi(d as i32),
        BoundMode::Asymptotic => 1.0 - (-alpha * (1.0 - q)).exp(),
    })
}

/// The two sufficient test counts of the NCOMP analysis at a given slack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchTests {
    /// Tests sufficient for false negatives to vanish.
    pub false_negative: f64,
    /// Tests sufficient for false positives to vanish.
    pub false_positive: f64,
    /// False when `1 + Δ` is outside `(e^{-α(1-q)}, e^{-α(1-q)}/q)`; the
    /// offending branch is then `+∞`.
    pub feasible: bool,
}

impl BranchTests {
    pub fn sufficient(&self) -> f64 {
        self.false_negative.max(self.false_positive)
    }
}

/// Evaluates both branches of the NCOMP achievability bound at slack
/// `one_plus_delta`:
///
/// `N_fn = d log d / (α q² (1-e⁻²) ((1+Δ) - e^{-α(1-q)})²)` and
/// `N_fp = d log(n-d) / (α q² (1-e⁻²) ((1+Δ) - e^{-α(1-q)}/q)²)`.
pub fn achievability_tests(n: usize, d: usize, q: f64, alpha: f64, one_plus_delta: f64) -> Result<BranchTests> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::invalid(format!("achievability bound needs 0 < q < 1, got {q}")));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::invalid(format!("alpha must be positive, got {alpha}")));
    }
    if d == 0 || d >= n {
        return Err(Error::invalid(format!("need 0 < d < n, got n = {n}, d = {d}")));
    }
    if !one_plus_delta.is_finite() {
        return Err(Error::invalid("slack must be finite"));
    }
    let lower = (-alpha * (1.0 - q)).exp();
    let upper = lower / q;
    let scale = d as f64 / (alpha * q * q * ONE_MINUS_E_NEG2);
    let feasible = one_plus_delta > lower && one_plus_delta < upper;
    let branch = |log_count: f64, gap: f64, ok: bool| {
        if ok {
            scale * log_count / (gap * gap)
        } else {
            f64::INFINITY
        }
    };
    Ok(BranchTests {
        false_negative: branch((d as f64).ln(), one_plus_delta - lower, one_plus_delta > lower),
        false_positive: branch(((n - d) as f64).ln(), one_plus_delta - upper, one_plus_delta < upper),
        feasible,
    })
}

/// `E_{Z ~ Poisson(α)}[H_b(q^Z)]` in bits, with absolute error below `tol`.
///
/// Terms are summed up to the first index `K` past the mode whose Poisson
/// tail `P(Z > K)` is certified below `tol` by the geometric bound
/// `pmf(K+1) / (1 - α/(K+2))`; since `H_b <= 1` that tail bounds the error.
pub fn poisson_entropy_expectation(alpha: f64, q: f64, tol: f64) -> Result<f64> {
    Ok(poisson_entropy_series(alpha, q, tol, 0)?.value)
}

/// Truncated series with diagnostic fields; `extra_terms` appends terms past
/// the certified cutoff.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue {
    pub value: f64,
    /// Index of the last term included.
    pub last_index: u64,
}

pub fn poisson_entropy_series(alpha: f64, q: f64, tol: f64, extra_terms: u64) -> Result<SeriesValue> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::invalid(format!("tolerance must be positive, got {tol}")));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::invalid(format!("alpha must be positive, got {alpha}")));
    }
    if !(0.0..1.0).contains(&q) {
        return Err(Error::invalid(format!("need 0 <= q < 1, got {q}")));
    }
    let ln_alpha = alpha.ln();
    let ln_q = q.ln();
    let ln_pmf = |z: u64| z as f64 * ln_alpha - alpha - ln_gamma(z as f64 + 1.0);
    let mut value = 0.0;
    let mut z: u64 = 0;
    let mut cutoff: Option<u64> = None;
    loop {
        // q^0 = 1 even at q = 0
        let q_pow = if z == 0 { 1.0 } else { (z as f64 * ln_q).exp() };
        value += entropy_bits(q_pow) * ln_pmf(z).exp();
        match cutoff {
            Some(k) if z >= k => break,
            Some(_) => {}
            None => {
                let next = z as f64 + 2.0;
                if next > alpha + 1.0 {
                    let tail = ln_pmf(z + 1).exp() / (1.0 - alpha / next);
                    if tail < tol {
                        cutoff = Some(z + extra_terms);
                        if extra_terms == 0 {
                            break;
                        }
                    }
                }
            }
        }
        z += 1;
    }
    Ok(SeriesValue { value, last_index: z })
}

/// `log2 C(n, d)` through log-gamma.
pub fn log2_binomial(n: usize, d: usize) -> Result<f64> {
    if d > n {
        return Err(Error::invalid(format!("C({n}, {d}) is zero")));
    }
    let (n, d) = (n as f64, d as f64);
    Ok((ln_gamma(n + 1.0) - ln_gamma(d + 1.0) - ln_gamma(n - d + 1.0)) / LN_2)
}

/// Converse rate `1 - E_{Z~Poisson(α)}[H_b(q^Z)]` in bits per test.
pub fn rate_it(q: f64, alpha: f64) -> Result<f64> {
    let expectation = poisson_entropy_expectation(alpha, q, DEFAULT_SERIES_TOL)?;
    Ok((1.0 - expectation).clamp(0.0, 1.0))
}

/// Fano lower bound on the number of tests for any decoder, with the
/// noise-adaptive design `α = log 2 / (1 - q)`.
pub fn converse_tests(n: usize, d: usize, q: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&q) {
        return Err(Error::invalid(format!("need 0 <= q < 1, got {q}")));
    }
    if d == 0 || d >= n {
        return Err(Error::invalid(format!("need 0 < d < n, got n = {n}, d = {d}")));
    }
    let denom = rate_it(q, LN_2 / (1.0 - q))?;
    assert!(denom > 0.0, "converse denominator vanished at q = {q}");
    Ok(log2_binomial(n, d)? / denom)
}

/// NCOMP achievable rate `4 (1-θ)(1-q) / ((1-e⁻²) log 2)` in bits per test.
pub fn rate_ncomp(theta: f64, q: f64) -> Result<f64> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::invalid(format!("need 0 < theta < 1, got {theta}")));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::invalid(format!("need 0 < q < 1, got {q}")));
    }
    Ok(4.0 * (1.0 - theta) * (1.0 - q) / (ONE_MINUS_E_NEG2 * LN_2))
}

/// `(k, k · R_IT(1 - 1/k))` with the noise-adaptive `α = k log 2`. Bounded
/// values mean the converse rate decays like `1 - q`.
pub fn rate_decay_profile(ks: &[u64]) -> Result<Vec<(u64, f64)>> {
    ks.iter()
        .map(|&k| {
            if k < 2 {
                return Err(Error::invalid(format!("rate decay profile needs k >= 2, got {k}")));
            }
            let kf = k as f64;
            Ok((k, kf * rate_it(1.0 - 1.0 / kf, kf * LN_2)?))
        })
        .collect()
}

fn check_tail_args(trials: u64, p: f64, delta: f64) -> Result<f64> {
    if trials == 0 {
        return Err(Error::invalid("tail bound needs at least one trial"));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!("need 0 < p < 1, got {p}")));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::invalid(format!("need delta > 0, got {delta}")));
    }
    Ok(trials as f64 * p)
}

/// Bound on `P[X >= (1+δ)μ]` for `X ~ Bin(K, p)`: `exp(-2δ²μ²/K)`.
pub fn chernoff_upper(trials: u64, p: f64, delta: f64) -> Result<f64> {
    let mu = check_tail_args(trials, p, delta)?;
    Ok((-2.0 * delta * delta * mu * mu / trials as f64).exp())
}

/// Bound on `P[X <= (1-δ)μ]` for `X ~ Bin(K, p)`: `exp(-δ²μ²/K)`.
pub fn chernoff_lower(trials: u64, p: f64, delta: f64) -> Result<f64> {
    let mu = check_tail_args(trials, p, delta)?;
    Ok((-delta * delta * mu * mu / trials as f64).exp())
}

/// Every bound and rate for one parameter point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub n: usize,
    pub d: usize,
    pub q: f64,
    pub alpha: f64,
    pub theta: f64,
    pub mode: BoundMode,
    pub eta: f64,
    pub psi: f64,
    /// `1 + Δ̃`.
    pub delta_star: f64,
    pub n_false_neg: f64,
    pub n_false_pos: f64,
    /// Larger of the two branches at `1 + Δ̃`.
    pub n_achievability: f64,
    /// Combined form with `log n` in place of `log d` / `log(n-d)`.
    pub n_log_n: f64,
    /// `(1-q) / (α q² (1-e⁻²) ((1+Δ̃) - e^{-α(1-q)})²)`: multiplies
    /// `d log n / (1-q)` to give `n_log_n`.
    pub prefactor: f64,
    pub n_converse: f64,
    pub rate_ncomp: f64,
    /// Converse rate at the noise-adaptive α, the design the converse holds for.
    pub rate_it: f64,
}

pub fn bound_report(n: usize, d: usize, q: f64, alpha_mode: AlphaMode, mode: BoundMode) -> Result<BoundReport> {
    let params = ProblemParams::new(n, d, q, alpha_mode, 0)?;
    if q <= 0.0 {
        return Err(Error::invalid("bounds need 0 < q < 1"));
    }
    let alpha = model::resolve_alpha(&params)?;
    let theta = params.theta();
    let delta_star = optimal_delta(n, d, q, alpha, mode.delta_form())?;
    let branches = achievability_tests(n, d, q, alpha, delta_star)?;
    let gap = delta_star - (-alpha * (1.0 - q)).exp();
    let prefactor = (1.0 - q) / (alpha * q * q * ONE_MINUS_E_NEG2 * gap * gap);
    let n_log_n = if gap > 0.0 {
        prefactor * d as f64 * (n as f64).ln() / (1.0 - q)
    } else {
        f64::INFINITY
    };
    let rate_ncomp = if theta > 0.0 { rate_ncomp(theta, q)? } else { f64::NAN };
    Ok(BoundReport {
        n,
        d,
        q,
        alpha,
        theta,
        mode,
        eta: eta(q, alpha, d, mode)?,
        psi: psi(q, alpha, d, mode)?,
        delta_star,
        n_false_neg: branches.false_negative,
        n_false_pos: branches.false_positive,
        n_achievability: branches.sufficient(),
        n_log_n,
        prefactor,
        n_converse: converse_tests(n, d, q)?,
        rate_ncomp,
        rate_it: rate_it(q, LN_2 / (1.0 - q))?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Poisson};

    #[test]
    fn constant_matches_definition() {
        assert_relative_eq!(ONE_MINUS_E_NEG2, 1.0 - (-2.0f64).exp(), epsilon = 1e-16);
    }

    #[test]
    fn entropy_values() {
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert_relative_eq!(binary_entropy(0.11).unwrap(), 0.499916, epsilon = 1e-6);
        assert!(binary_entropy(-0.1).is_err());
        assert!(binary_entropy(1.1).is_err());
        assert!(binary_entropy(f64::NAN).is_err());
    }

    #[test]
    fn eta_psi_examples() {
        for mode in [BoundMode::ExactFiniteN, BoundMode::Asymptotic] {
            assert_eq!(eta(0.0, 0.7, 10, mode).unwrap(), 0.0);
        }
        let a = 2.0 * LN_2;
        assert_relative_eq!(eta(0.5, a, 10, BoundMode::Asymptotic).unwrap(), 0.25, epsilon = 1e-15);
        assert_relative_eq!(psi(0.5, a, 10, BoundMode::Asymptotic).unwrap(), 0.5, epsilon = 1e-15);
        for d in [10_000, 100_000] {
            for f in [eta, psi] {
                let gap = f(0.5, a, d, BoundMode::ExactFiniteN).unwrap() - f(0.5, a, d, BoundMode::Asymptotic).unwrap();
                assert!(gap.abs() <= 1e-3);
            }
        }
        assert!(eta(0.5, 3.0, 2, BoundMode::Asymptotic).is_err());
    }

    #[test]
    fn branches_meet_at_explicit_slack() {
        let (n, d, q) = (10_000, 30, 0.4);
        let alpha = LN_2 / (1.0 - q);
        let x = optimal_delta(n, d, q, alpha, DeltaForm::ExplicitFiniteN).unwrap();
        let b = achievability_tests(n, d, q, alpha, x).unwrap();
        assert!(b.feasible);
        assert!((b.false_negative - b.false_positive).abs() / b.sufficient() <= 1e-9);
    }

    #[test]
    fn branches_blow_up_at_asymptotes() {
        let (q, alpha) = (0.5, 2.0 * LN_2);
        let lower = 0.5;
        let near = achievability_tests(1000, 10, q, alpha, lower + 1e-6).unwrap();
        let far = achievability_tests(1000, 10, q, alpha, lower + 1e-2).unwrap();
        assert!(near.false_negative > 1e3 * far.false_negative);
        let at = achievability_tests(1000, 10, q, alpha, lower).unwrap();
        assert!(!at.feasible);
        assert_eq!(at.false_negative, f64::INFINITY);
        assert!(at.false_positive.is_finite());
        let above = achievability_tests(1000, 10, q, alpha, 1.0).unwrap();
        assert_eq!(above.false_positive, f64::INFINITY);
    }

    #[test]
    fn combined_form_bookkeeping() {
        // d = 32 ≈ n^0.25 at n = 10^6
        let r = bound_report(1_000_000, 32, 0.5, AlphaMode::NoiseAdaptive, BoundMode::ExactFiniteN).unwrap();
        // both branches equal at Δ̃; the log n form shares the false-negative gap
        let ratio = r.n_log_n / r.n_false_neg;
        assert_relative_eq!(ratio, (1e6f64).ln() / 32f64.ln(), epsilon = 1e-9);
        let ratio_fp = r.n_log_n / r.n_false_pos;
        assert_relative_eq!(ratio_fp, ratio, epsilon = 1e-9);
        assert!(r.n_achievability.is_finite());
    }

    #[test]
    fn poisson_expectation_values() {
        let v = poisson_entropy_expectation(2.0 * LN_2, 0.5, 1e-8).unwrap();
        assert_relative_eq!(v, 0.617242376588565, epsilon = 1e-8);
        // q = 0: every term is H_b(0) or H_b(1)
        assert_eq!(poisson_entropy_expectation(1.3, 0.0, 1e-10).unwrap(), 0.0);
        assert!(poisson_entropy_expectation(1.0, 0.5, 0.0).is_err());
        assert!(poisson_entropy_expectation(1.0, 0.5, -1.0).is_err());
        // large α stays finite where e^{-α} underflows in the plain recurrence
        let big = poisson_entropy_expectation(1024.0 * LN_2, 1.0 - 1.0 / 1024.0, 1e-12).unwrap();
        assert!(big > 0.99 && big < 1.0);
    }

    #[test]
    fn poisson_truncation_levels_agree() {
        for (alpha, q) in [(0.5, 0.2), (2.0 * LN_2, 0.5), (12.0, 0.9), (300.0, 0.995)] {
            let tol = 1e-9;
            let base = poisson_entropy_series(alpha, q, tol, 0).unwrap();
            let longer = poisson_entropy_series(alpha, q, tol, 20).unwrap();
            assert_eq!(longer.last_index, base.last_index + 20);
            assert!((longer.value - base.value).abs() < tol);
            assert!(longer.value >= base.value);
        }
    }

    #[test]
    fn partial_sums_non_decreasing() {
        let mut prev = 0.0;
        for extra in 0..15 {
            let v = poisson_entropy_series(3.0, 0.6, 1e-3, extra).unwrap().value;
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn poisson_expectation_against_sampling() {
        let alpha = 2.0 * LN_2;
        let poisson = Poisson::new(alpha).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
        let samples = 2_000_000;
        let mut acc = 0.0;
        for _ in 0..samples {
            let z: f64 = poisson.sample(&mut rng);
            acc += entropy_bits(0.5f64.powf(z));
        }
        let mc = acc / samples as f64;
        // H_b ∈ [0, 1] so the standard error is at most 0.5 / sqrt(samples)
        assert!((mc - poisson_entropy_expectation(alpha, 0.5, 1e-10).unwrap()).abs() < 4.0 * 0.5 / (samples as f64).sqrt());
    }

    /// `log2 C(n, d)` by exact integer product for small n.
    fn exact_log2_binomial(n: u64, d: u64) -> f64 {
        let mut c: u128 = 1;
        for i in 0..d {
            c = c * (n - i) as u128 / (i + 1) as u128;
        }
        (c as f64).log2()
    }

    #[test]
    fn log_binomial_matches_integers() {
        for n in 1..=60u64 {
            for d in 0..=n {
                let got = log2_binomial(n as usize, d as usize).unwrap();
                assert!((got - exact_log2_binomial(n, d)).abs() < 1e-9, "C({n},{d})");
            }
        }
        assert_relative_eq!(log2_binomial(20, 3).unwrap(), 1140f64.log2(), epsilon = 1e-12);
        assert_relative_eq!(log2_binomial(20, 3).unwrap(), 10.155, epsilon = 1e-3);
    }

    #[test]
    fn converse_examples() {
        // q → 0: denominator → 1, counting bound
        let low = converse_tests(20, 3, 1e-9).unwrap();
        assert_relative_eq!(low, 1140f64.log2(), epsilon = 1e-6);
        let mid = converse_tests(1000, 10, 0.5).unwrap();
        assert!((mid - 203.0).abs() < 1.0, "{mid}");
        assert_relative_eq!(mid, 203.266111849601, epsilon = 1e-6);
    }

    #[test]
    fn converse_non_decreasing_in_q() {
        let values: Vec<f64> = (1..=9).map(|i| converse_tests(500, 8, i as f64 / 10.0).unwrap()).collect();
        assert!(values.windows(2).all(|w| w[0] <= w[1]), "{values:?}");
    }

    #[test]
    fn rate_examples() {
        assert_relative_eq!(rate_ncomp(0.5, 0.5).unwrap(), 1.668502, epsilon = 1e-6);
        assert_relative_eq!(rate_it(0.5, 2.0 * LN_2).unwrap(), 0.382757623, epsilon = 1e-8);
        assert!(rate_ncomp(0.0, 0.5).is_err());
        assert!(rate_ncomp(0.5, 1.0).is_err());
        let profile = rate_decay_profile(&[2]).unwrap();
        assert_relative_eq!(profile[0].1, 0.765515, epsilon = 1e-6);
        assert!(rate_decay_profile(&[1]).is_err());
    }

    /// Exact `P[X >= x]` and `P[X <= x]` for `X ~ Bin(K, p)` from the pmf.
    fn binomial_tails(k: u64, p: f64, upper_from: f64, lower_to: f64) -> (f64, f64) {
        let mut up = 0.0;
        let mut low = 0.0;
        for x in 0..=k {
            let ln_pmf = ln_gamma(k as f64 + 1.0) - ln_gamma(x as f64 + 1.0) - ln_gamma((k - x) as f64 + 1.0)
                + x as f64 * p.ln()
                + (k - x) as f64 * (1.0 - p).ln();
            let pmf = ln_pmf.exp();
            if x as f64 >= upper_from {
                up += pmf;
            }
            if x as f64 <= lower_to {
                low += pmf;
            }
        }
        (up, low)
    }

    #[test]
    fn chernoff_example() {
        let b = chernoff_upper(100, 0.5, 0.2).unwrap();
        assert_relative_eq!(b, (-2.0f64).exp(), epsilon = 1e-15);
        let (tail, _) = binomial_tails(100, 0.5, 60.0, -1.0);
        assert!(tail < b);
        assert!(chernoff_upper(100, 0.5, 1e-9).unwrap() > 0.999_999);
        assert!(chernoff_lower(0, 0.5, 0.1).is_err());
        assert!(chernoff_lower(10, 1.0, 0.1).is_err());
        assert!(chernoff_lower(10, 0.5, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn tail_bounds_dominate_exact_tails(k in 1u64..=200, p in 0.01f64..0.99, delta in 0.01f64..2.0) {
            let mu = k as f64 * p;
            let (up, low) = binomial_tails(k, p, (1.0 + delta) * mu, (1.0 - delta) * mu);
            prop_assert!(up <= chernoff_upper(k, p, delta).unwrap() + 1e-12);
            prop_assert!(low <= chernoff_lower(k, p, delta).unwrap() + 1e-12);
        }

        #[test]
        fn tail_bounds_decrease_in_delta(k in 1u64..500, p in 0.01f64..0.99, d1 in 0.01f64..3.0, step in 0.001f64..1.0) {
            prop_assert!(chernoff_upper(k, p, d1 + step).unwrap() <= chernoff_upper(k, p, d1).unwrap());
            prop_assert!(chernoff_lower(k, p, d1 + step).unwrap() <= chernoff_lower(k, p, d1).unwrap());
        }

        #[test]
        fn explicit_slack_is_feasible(q in 0.05f64..0.95, theta in 0.1f64..0.9, big in any::<bool>()) {
            let n: usize = if big { 1_000_000 } else { 1000 };
            let d = ((n as f64).powf(theta).round() as usize).max(2);
            let alpha = LN_2 / (1.0 - q);
            let lower = (-alpha * (1.0 - q)).exp();
            for form in [DeltaForm::ExplicitFiniteN, DeltaForm::Asymptotic] {
                let x = optimal_delta(n, d, q, alpha, form).unwrap();
                prop_assert!(x > lower && x < lower / q, "{:?}: {} not in ({}, {})", form, x, lower, lower / q);
            }
        }

        #[test]
        fn rate_it_in_unit_interval(q in 0.0f64..0.999, alpha in 0.01f64..50.0) {
            let r = rate_it(q, alpha).unwrap();
            prop_assert!((0.0..=1.0).contains(&r));
        }
    }
}

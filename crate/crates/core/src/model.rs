//! Problem parameters, Bernoulli pooling designs and the test channels.

use std::f64::consts::LN_2;

use rand::distr::{Bernoulli, Distribution};
use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, AddressedUniforms, Purpose};

/// How the design parameter α (inclusion probability α/d) is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AlphaMode {
    Fixed(f64),
    /// α = log 2 / (1 − q): keeps the noisy test outcome at entropy one bit.
    NoiseAdaptive,
}

/// Full parameterization of one group testing instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    /// Number of items.
    pub n: usize,
    /// Number of defectives.
    pub d: usize,
    /// Dilution probability of each defective entry.
    pub q: f64,
    pub alpha: AlphaMode,
    /// Number of tests.
    pub tests: usize,
}

impl ProblemParams {
    pub fn new(n: usize, d: usize, q: f64, alpha: AlphaMode, tests: usize) -> Result<Self> {
        let params = Self { n, d, q, alpha, tests };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.d >= self.n {
            return Err(Error::invalid(format!(
                "need 0 < d < n, got n = {}, d = {}",
                self.n, self.d
            )));
        }
        if !(0.0..1.0).contains(&self.q) {
            return Err(Error::invalid(format!("need 0 <= q < 1, got q = {}", self.q)));
        }
        resolve_alpha(self).map(|_| ())
    }

    /// Sparsity exponent log d / log n; zero when d = 1.
    pub fn theta(&self) -> f64 {
        theta(self.n, self.d)
    }

    pub fn inclusion_probability(&self) -> Result<f64> {
        Ok(resolve_alpha(self)? / self.d as f64)
    }
}

pub fn theta(n: usize, d: usize) -> f64 {
    (d as f64).ln() / (n as f64).ln()
}

/// Effective α for the given parameters.
pub fn resolve_alpha(params: &ProblemParams) -> Result<f64> {
    let alpha = match params.alpha {
        AlphaMode::Fixed(a) => a,
        AlphaMode::NoiseAdaptive => {
            if params.q.is_nan() || params.q >= 1.0 {
                return Err(Error::invalid("noise-adaptive alpha needs q < 1"));
            }
            LN_2 / (1.0 - params.q)
        }
    };
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::invalid(format!("alpha must be positive and finite, got {alpha}")));
    }
    if params.d == 0 || alpha / params.d as f64 > 1.0 {
        return Err(Error::invalid(format!(
            "inclusion probability alpha/d = {alpha}/{} exceeds 1",
            params.d
        )));
    }
    Ok(alpha)
}

/// Identifies a random stream: every draw is a function of these two words.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl SeedSpec {
    pub const fn new(master_seed: u64, stream_id: u64) -> Self {
        Self { master_seed, stream_id }
    }
}

/// Sorted, distinct item indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DefectiveSet {
    indices: Vec<usize>,
}

impl DefectiveSet {
    /// Builds a set from arbitrary-order indices; duplicates and indices
    /// outside `[0, n)` are rejected.
    pub fn new(mut indices: Vec<usize>, n: usize) -> Result<Self> {
        indices.sort_unstable();
        if let Some(&index) = indices.iter().find(|&&i| i >= n) {
            return Err(Error::IndexOutOfRange { index, n });
        }
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("duplicate defective index"));
        }
        Ok(Self { indices })
    }

    /// Draws a uniformly random subset of size `d` from `[0, n)`.
    pub fn random(n: usize, d: usize, seed: SeedSpec) -> Result<Self> {
        if d > n {
            return Err(Error::invalid(format!("cannot pick {d} of {n} items")));
        }
        let mut rng = rng::stream(seed, Purpose::Defectives);
        let mut indices = index::sample(&mut rng, n, d).into_vec();
        indices.sort_unstable();
        Ok(Self { indices })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, item: usize) -> bool {
        self.indices.binary_search(&item).is_ok()
    }

    fn check_within(&self, n: usize) -> Result<()> {
        match self.indices.last() {
            Some(&index) if index >= n => Err(Error::IndexOutOfRange { index, n }),
            _ => Ok(()),
        }
    }
}

/// Row-major packed bit matrix; row `i` marks the items pooled in test `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    rows: usize,
    cols: usize,
    words_per_row: usize,
    bits: Vec<u64>,
    p: f64,
}

impl DesignMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let words_per_row = cols.div_ceil(64);
        Self { rows, cols, words_per_row, bits: vec![0; rows * words_per_row], p: 0.0 }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut m = Self::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                if f(r, c) {
                    m.set(r, c);
                }
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Inclusion probability the matrix was drawn with (0 for hand-built ones).
    pub fn inclusion_probability(&self) -> f64 {
        self.p
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        debug_assert!(row < self.rows && col < self.cols);
        self.bits[row * self.words_per_row + col / 64] >> (col % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize) {
        assert!(row < self.rows && col < self.cols, "entry ({row}, {col}) out of range");
        self.bits[row * self.words_per_row + col / 64] |= 1 << (col % 64);
    }

    pub fn row_words(&self, row: usize) -> &[u64] {
        &self.bits[row * self.words_per_row..(row + 1) * self.words_per_row]
    }

    /// Column indices of the set bits in `row`, ascending.
    pub fn row_ones(&self, row: usize) -> impl Iterator<Item = usize> + '_ {
        self.row_words(row).iter().enumerate().flat_map(|(w, &word)| {
            let mut rest = word;
            std::iter::from_fn(move || {
                (rest != 0).then(|| {
                    let bit = rest.trailing_zeros() as usize;
                    rest &= rest - 1;
                    w * 64 + bit
                })
            })
        })
    }

    pub fn popcount(&self) -> u64 {
        self.bits.iter().map(|w| w.count_ones() as u64).sum()
    }
}

/// Test results, one flag per row of the design.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeVector {
    bits: Vec<bool>,
}

impl OutcomeVector {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.bits
    }

    pub fn positives(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// Draws an `N × n` Bernoulli(α/d) design.
pub fn gen_design(params: &ProblemParams, seed: SeedSpec) -> Result<DesignMatrix> {
    params.validate()?;
    let p = params.inclusion_probability()?;
    let bernoulli = Bernoulli::new(p).map_err(|e| Error::invalid(format!("p = {p}: {e}")))?;
    let mut rng = rng::stream(seed, Purpose::Design);
    let mut m = DesignMatrix::zeros(params.tests, params.n);
    m.p = p;
    for r in 0..params.tests {
        let row = &mut m.bits[r * m.words_per_row..(r + 1) * m.words_per_row];
        for c in 0..params.n {
            if bernoulli.sample(&mut rng) {
                row[c / 64] |= 1 << (c % 64);
            }
        }
    }
    Ok(m)
}

/// `y_i = OR_{j in D} m_ij`.
pub fn noiseless_outcomes(m: &DesignMatrix, defectives: &DefectiveSet) -> Result<OutcomeVector> {
    defectives.check_within(m.cols)?;
    let bits = (0..m.rows)
        .map(|r| defectives.indices().iter().any(|&j| m.get(r, j)))
        .collect();
    Ok(OutcomeVector::new(bits))
}

/// Retention uniforms of the dilution channel. The draw for entry `(row, col)`
/// is fixed by the seed alone; the entry survives dilution at level `q` iff the
/// draw exceeds `q`. Sharing one stream across several `q` couples the channels.
pub struct RetentionDraws(AddressedUniforms);

impl RetentionDraws {
    pub fn new(seed: SeedSpec, cols: usize) -> Self {
        Self(AddressedUniforms::new(seed, Purpose::Dilution, cols))
    }

    /// Uniform in (0, 1].
    pub fn uniform(&mut self, row: usize, col: usize) -> f64 {
        self.0.at(row, col)
    }
}

/// Dilution channel: every defective 1-entry is independently erased with
/// probability `q` before the OR. Only defective columns are sampled; other
/// entries cannot change the outcome.
pub fn dilute_outcomes(
    m: &DesignMatrix,
    defectives: &DefectiveSet,
    q: f64,
    seed: SeedSpec,
) -> Result<OutcomeVector> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::invalid(format!("dilution probability must lie in [0, 1], got {q}")));
    }
    defectives.check_within(m.cols)?;
    let mut draws = RetentionDraws::new(seed, m.cols);
    let bits = (0..m.rows)
        .map(|r| {
            defectives
                .indices()
                .iter()
                .any(|&j| m.get(r, j) && draws.uniform(r, j) > q)
        })
        .collect();
    Ok(OutcomeVector::new(bits))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn params(n: usize, d: usize, q: f64, alpha: AlphaMode, tests: usize) -> ProblemParams {
        ProblemParams::new(n, d, q, alpha, tests).unwrap()
    }

    #[test]
    fn resolve_alpha_examples() {
        let p = params(100, 10, 0.0, AlphaMode::NoiseAdaptive, 1);
        assert_relative_eq!(resolve_alpha(&p).unwrap(), 2f64.ln(), epsilon = 1e-15);
        let p = params(100, 10, 0.5, AlphaMode::NoiseAdaptive, 1);
        assert_relative_eq!(resolve_alpha(&p).unwrap(), 1.386294, epsilon = 1e-6);
        for q in [0.0, 0.3, 0.9] {
            let p = params(100, 10, q, AlphaMode::Fixed(0.7), 1);
            assert_eq!(resolve_alpha(&p).unwrap(), 0.7);
        }
    }

    #[test]
    fn resolve_alpha_rejects_bad_inputs() {
        let bad_q = ProblemParams { n: 10, d: 2, q: 1.0, alpha: AlphaMode::NoiseAdaptive, tests: 1 };
        assert!(resolve_alpha(&bad_q).is_err());
        assert!(ProblemParams::new(10, 2, 0.1, AlphaMode::Fixed(2.5), 1).is_err());
        assert!(ProblemParams::new(10, 2, 0.1, AlphaMode::Fixed(0.0), 1).is_err());
        // q = 0.9 with d = 1 needs alpha = 6.9 > d
        assert!(ProblemParams::new(10, 1, 0.9, AlphaMode::NoiseAdaptive, 1).is_err());
        assert!(ProblemParams::new(10, 0, 0.1, AlphaMode::NoiseAdaptive, 1).is_err());
        assert!(ProblemParams::new(10, 10, 0.1, AlphaMode::NoiseAdaptive, 1).is_err());
    }

    #[test]
    fn theta_is_log_ratio() {
        assert_relative_eq!(theta(10_000, 100), 0.5, epsilon = 1e-12);
        assert_eq!(theta(50, 1), 0.0);
    }

    #[test]
    fn empty_design() {
        let m = gen_design(&params(10, 2, 0.0, AlphaMode::NoiseAdaptive, 0), SeedSpec::new(1, 0)).unwrap();
        assert_eq!(m.rows(), 0);
        assert_eq!(m.popcount(), 0);
    }

    #[test]
    fn inclusion_probability_one_gives_all_ones() {
        let m = gen_design(&params(70, 3, 0.2, AlphaMode::Fixed(3.0), 9), SeedSpec::new(5, 2)).unwrap();
        assert_eq!(m.popcount(), 70 * 9);
    }

    #[test]
    fn design_density_concentrates() {
        let p = params(1000, 10, 0.0, AlphaMode::NoiseAdaptive, 500);
        let prob = p.inclusion_probability().unwrap();
        assert_relative_eq!(prob, 0.0693147, epsilon = 1e-7);
        let cells = (500 * 1000) as f64;
        let tol = 3.0 * (prob * (1.0 - prob) / cells).sqrt();
        for seed in [0, 1, 2, 3, 99] {
            let m = gen_design(&p, SeedSpec::new(seed, 0)).unwrap();
            let density = m.popcount() as f64 / cells;
            assert!((density - prob).abs() <= tol, "seed {seed}: {density} vs {prob} ± {tol}");
        }
    }

    #[test]
    fn design_is_deterministic() {
        let p = params(130, 4, 0.3, AlphaMode::NoiseAdaptive, 40);
        let a = gen_design(&p, SeedSpec::new(7, 3)).unwrap();
        assert_eq!(a, gen_design(&p, SeedSpec::new(7, 3)).unwrap());
        assert_ne!(a, gen_design(&p, SeedSpec::new(7, 4)).unwrap());
    }

    #[test]
    fn row_ones_lists_set_bits() {
        let m = DesignMatrix::from_fn(2, 130, |r, c| (r + c) % 63 == 0);
        assert_eq!(m.row_ones(0).collect::<Vec<_>>(), vec![0, 63, 126]);
        assert_eq!(m.row_ones(1).collect::<Vec<_>>(), vec![62, 125]);
    }

    #[test]
    fn defective_set_validation() {
        assert_eq!(DefectiveSet::new(vec![3, 1], 5).unwrap().indices(), &[1, 3]);
        assert!(matches!(DefectiveSet::new(vec![5], 5), Err(Error::IndexOutOfRange { index: 5, n: 5 })));
        assert!(DefectiveSet::new(vec![2, 2], 5).is_err());
        let r = DefectiveSet::random(50, 7, SeedSpec::new(1, 1)).unwrap();
        assert_eq!(r.len(), 7);
        assert!(r.indices().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn noiseless_on_trivial_matrices() {
        let d = DefectiveSet::new(vec![0, 3], 5).unwrap();
        let y = noiseless_outcomes(&DesignMatrix::zeros(4, 5), &d).unwrap();
        assert_eq!(y.positives(), 0);
        let m = DesignMatrix::from_fn(6, 5, |_, c| c == 0);
        let y = noiseless_outcomes(&m, &DefectiveSet::new(vec![0], 5).unwrap()).unwrap();
        assert_eq!(y.positives(), 6);
    }

    #[test]
    fn noiseless_matches_brute_force_row_or() {
        let p = params(5, 2, 0.0, AlphaMode::Fixed(0.8), 6);
        for seed in 0..20 {
            let m = gen_design(&p, SeedSpec::new(seed, 0)).unwrap();
            let d = DefectiveSet::random(5, 2, SeedSpec::new(seed, 1)).unwrap();
            let y = noiseless_outcomes(&m, &d).unwrap();
            for r in 0..6 {
                let mut or = false;
                for c in 0..5 {
                    if d.indices().contains(&c) && m.get(r, c) {
                        or = true;
                    }
                }
                assert_eq!(y.get(r), or);
            }
        }
    }

    #[test]
    fn channel_rejects_out_of_range_defective() {
        let m = DesignMatrix::zeros(3, 4);
        let d = DefectiveSet::new(vec![6], 10).unwrap();
        assert!(noiseless_outcomes(&m, &d).is_err());
        assert!(dilute_outcomes(&m, &d, 0.5, SeedSpec::new(0, 0)).is_err());
        let ok = DefectiveSet::new(vec![1], 4).unwrap();
        assert!(dilute_outcomes(&m, &ok, 1.5, SeedSpec::new(0, 0)).is_err());
    }

    #[test]
    fn dilution_endpoints() {
        let p = params(60, 4, 0.0, AlphaMode::Fixed(1.5), 80);
        let m = gen_design(&p, SeedSpec::new(3, 0)).unwrap();
        let d = DefectiveSet::random(60, 4, SeedSpec::new(3, 0)).unwrap();
        let clean = noiseless_outcomes(&m, &d).unwrap();
        assert!(clean.positives() > 0);
        assert_eq!(dilute_outcomes(&m, &d, 0.0, SeedSpec::new(3, 9)).unwrap(), clean);
        assert_eq!(dilute_outcomes(&m, &d, 1.0, SeedSpec::new(3, 9)).unwrap().positives(), 0);
    }

    /// P(y = 1) for d = 2 by enumerating both inclusion bits and both
    /// retention outcomes.
    fn enumerated_positivity_d2(p: f64, q: f64) -> f64 {
        let mut total = 0.0;
        for inc in 0..4u32 {
            for keep in 0..4u32 {
                let mut prob = 1.0;
                let mut positive = false;
                for j in 0..2 {
                    let included = inc >> j & 1 == 1;
                    let kept = keep >> j & 1 == 1;
                    prob *= if included { p } else { 1.0 - p };
                    if included {
                        prob *= if kept { 1.0 - q } else { q };
                        positive |= kept;
                    } else if kept {
                        prob = 0.0;
                    }
                }
                if positive {
                    total += prob;
                }
            }
        }
        total
    }

    #[test]
    fn positivity_closed_form_matches_enumeration() {
        for (p, q) in [(0.1f64, 0.5f64), (0.4, 0.2), (0.9, 0.95), (0.3, 0.0)] {
            let closed = 1.0 - (1.0 - p * (1.0 - q)).powi(2);
            assert_relative_eq!(closed, enumerated_positivity_d2(p, q), epsilon = 1e-14);
        }
    }

    #[test]
    fn empirical_positivity_rate() {
        let p = params(100, 10, 0.5, AlphaMode::NoiseAdaptive, 100_000);
        let prob = p.inclusion_probability().unwrap();
        assert_relative_eq!(prob, 0.138629, epsilon = 1e-6);
        let expected = 1.0 - (1.0 - prob * 0.5).powi(10);
        assert_relative_eq!(expected, 0.5124, epsilon = 1e-4);
        let m = gen_design(&p, SeedSpec::new(42, 0)).unwrap();
        let d = DefectiveSet::random(100, 10, SeedSpec::new(42, 0)).unwrap();
        let y = dilute_outcomes(&m, &d, 0.5, SeedSpec::new(42, 0)).unwrap();
        let rate = y.positives() as f64 / 100_000.0;
        let se = (expected * (1.0 - expected) / 100_000.0).sqrt();
        assert!((rate - expected).abs() <= 3.0 * se, "{rate} vs {expected}");
    }

    #[test]
    fn coupled_positives_decrease_with_q() {
        let p = params(200, 8, 0.0, AlphaMode::Fixed(1.0), 400);
        for seed in 0..10 {
            let m = gen_design(&p, SeedSpec::new(seed, 0)).unwrap();
            let d = DefectiveSet::random(200, 8, SeedSpec::new(seed, 0)).unwrap();
            let counts: Vec<usize> = [0.0, 0.1, 0.3, 0.5, 0.8, 0.95, 1.0]
                .iter()
                .map(|&q| dilute_outcomes(&m, &d, q, SeedSpec::new(seed, 1)).unwrap().positives())
                .collect();
            assert!(counts.windows(2).all(|w| w[0] >= w[1]), "{counts:?}");
        }
    }

    proptest! {
        #[test]
        fn dilution_degenerates_to_noiseless(seed in any::<u64>(), n in 3usize..80, tests in 0usize..40) {
            let d = 1 + (seed as usize % (n - 1)).min(4);
            let p = params(n, d, 0.0, AlphaMode::Fixed(d as f64 * 0.5), tests);
            let m = gen_design(&p, SeedSpec::new(seed, 0)).unwrap();
            let set = DefectiveSet::random(n, d, SeedSpec::new(seed, 1)).unwrap();
            prop_assert_eq!(
                dilute_outcomes(&m, &set, 0.0, SeedSpec::new(seed, 2)).unwrap(),
                noiseless_outcomes(&m, &set).unwrap()
            );
        }

        #[test]
        fn non_defective_columns_have_no_effect(seed in any::<u64>(), q in 0.0f64..1.0) {
            let (n, d) = (40, 3);
            let p = params(n, d, q, AlphaMode::Fixed(1.2), 30);
            let m = gen_design(&p, SeedSpec::new(seed, 0)).unwrap();
            let set = DefectiveSet::random(n, d, SeedSpec::new(seed, 1)).unwrap();
            // zero every non-defective column, keep defective columns as they are
            let stripped = DesignMatrix::from_fn(m.rows(), n, |r, c| set.contains(c) && m.get(r, c));
            // fill every non-defective column with ones
            let filled = DesignMatrix::from_fn(m.rows(), n, |r, c| !set.contains(c) || m.get(r, c));
            let s = SeedSpec::new(seed, 2);
            let y = dilute_outcomes(&m, &set, q, s).unwrap();
            prop_assert_eq!(&y, &dilute_outcomes(&stripped, &set, q, s).unwrap());
            prop_assert_eq!(&y, &dilute_outcomes(&filled, &set, q, s).unwrap());
        }
    }
}

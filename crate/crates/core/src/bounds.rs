//! Exact evaluators for the static-filter space bound and the counting argument
//! behind it: false-negative sets, the magic seed, and the injective encoding of
//! good datasets as `(state, rank of FN set)` pairs.
//!
//! Every holds/fails decision except the log-scale binomial estimate is made in
//! exact integer or rational arithmetic.

use std::collections::HashSet;
use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::combinatorics::binom_exact;
use crate::combinatorics::{binom_prefix_sum, combinations, graded_rank, graded_unrank, log2_big};
use crate::dataset::{Dataset, Elem};
use crate::filters::{Seed, StaticFilter};
use crate::rational::{big_str, big_to_string, biguint_str, floor_nonneg};
use crate::sequence::UniverseParams;
use crate::witness::{check_enumeration_budget, WitnessError};

/// Tolerance of the floating-point log comparison in [`claim8_check`].
pub const LOG_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BoundsError {
    #[error("parameters out of range: {0}")]
    ParamsOutOfRange(String),
    #[error("enumeration over C({u},{n}) datasets exceeds the budget")]
    EnumerationTooLarge { u: u32, n: u32 },
    #[error("static filter failed on dataset {0}")]
    FailState(Dataset),
    #[error("dataset {0} is not good for this seed (failed or too many false negatives)")]
    NotGoodPair(Dataset),
    #[error("the filter answers 1 outside dataset {0}; the encoding needs a filter without false positives")]
    FalsePositives(Dataset),
    #[error("code does not decode to a dataset of n elements")]
    InvalidCode,
    #[error("no seeds to search")]
    NoSeeds,
}

impl From<WitnessError> for BoundsError {
    fn from(e: WitnessError) -> Self {
        match e {
            WitnessError::EnumerationTooLarge { u, n } => BoundsError::EnumerationTooLarge { u, n },
            other => BoundsError::ParamsOutOfRange(other.to_string()),
        }
    }
}

fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Parameters of the static-filter bound.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundsParams {
    pub u: u32,
    pub n: u32,
    #[serde(with = "big_str")]
    pub eps_plus: BigRational,
    #[serde(with = "big_str")]
    pub eps_minus: BigRational,
    #[serde(with = "big_str")]
    pub p_fail: BigRational,
    #[serde(with = "big_str")]
    pub alpha: BigRational,
    #[serde(with = "big_str")]
    pub beta: BigRational,
}

impl BoundsParams {
    /// Params with `eps_plus = eps_minus = p_fail = 0`, `beta = 1` and the given `alpha`.
    pub fn new(u: u32, n: u32, alpha: BigRational) -> Self {
        BoundsParams {
            u,
            n,
            eps_plus: BigRational::zero(),
            eps_minus: BigRational::zero(),
            p_fail: BigRational::zero(),
            alpha,
            beta: BigRational::one(),
        }
    }

    pub fn validate(&self) -> Result<(), BoundsError> {
        let unit = |name: &str, v: &BigRational| {
            if *v < BigRational::zero() || *v > BigRational::one() {
                Err(BoundsError::ParamsOutOfRange(format!("{name} = {} is not in [0, 1]", big_to_string(v))))
            } else {
                Ok(())
            }
        };
        if self.alpha <= BigRational::one() {
            return Err(BoundsError::ParamsOutOfRange(format!("alpha = {} must exceed 1", big_to_string(&self.alpha))));
        }
        unit("beta", &self.beta)?;
        unit("eps_plus", &self.eps_plus)?;
        unit("eps_minus", &self.eps_minus)?;
        unit("p_fail", &self.p_fail)
    }

    /// `floor(alpha * n * eps_minus)`: the largest FN-set size a good pair may have.
    pub fn fn_threshold(&self) -> u64 {
        let v = &self.alpha * BigRational::from_integer(BigInt::from(self.n)) * &self.eps_minus;
        floor_nonneg(&v).to_u64().unwrap_or(u64::MAX)
    }

    /// `(1 - 1/alpha - p_fail) * C(u, n)`.
    pub fn required_good(&self) -> BigRational {
        let c = BigRational::from_integer(BigInt::from(binom_exact(self.u.into(), self.n.into())));
        (BigRational::one() - self.alpha.recip() - &self.p_fail) * c
    }
}

/// Result of the necessary condition `2^fspace * sum_{k<=floor(alpha n eps-)} C(u,k) >= (1 - 1/alpha - p_fail) C(u,n)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Thm7Result {
    pub fspace_bits: u64,
    pub sum_limit: u64,
    #[serde(with = "biguint_str")]
    pub lhs: BigUint,
    #[serde(with = "big_str")]
    pub rhs: BigRational,
    pub holds: bool,
}

pub fn thm7_check(fspace_bits: u64, p: &BoundsParams) -> Thm7Result {
    let sum_limit = p.fn_threshold();
    let lhs = (BigUint::one() << fspace_bits) * binom_prefix_sum(p.u.into(), sum_limit.min(p.u.into()));
    let rhs = p.required_good();
    let holds = BigRational::from_integer(BigInt::from(lhs.clone())) >= rhs;
    Thm7Result { fspace_bits, sum_limit, lhs, rhs, holds }
}

/// `log2 C(u, floor(beta n)) <= beta log2 C(u, n) + n log2(e / beta^beta)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Claim8Result {
    pub u: u32,
    pub n: u32,
    #[serde(with = "big_str")]
    pub beta: BigRational,
    pub k: u64,
    pub lhs_bits: f64,
    pub rhs_bits: f64,
    pub holds: bool,
}

/// `log2(e / beta^beta) = log2(e) - beta log2(beta)`, with `0^0 = 1`.
fn log2_e_over_beta_pow_beta(beta: f64) -> f64 {
    let b_log_b = if beta == 0.0 { 0.0 } else { beta * beta.log2() };
    std::f64::consts::LOG2_E - b_log_b
}

pub fn claim8_check(u: u32, n: u32, beta: &BigRational) -> Result<Claim8Result, BoundsError> {
    if *beta < BigRational::zero() || *beta > BigRational::one() {
        return Err(BoundsError::ParamsOutOfRange(format!("beta = {} is not in [0, 1]", big_to_string(beta))));
    }
    let k = floor_nonneg(&(beta * BigRational::from_integer(BigInt::from(n)))).to_u64().unwrap_or(0);
    let b = beta.to_f64().unwrap_or(0.0);
    let lhs_bits = log2_big(&binom_exact(u.into(), k));
    let rhs_bits = b * log2_big(&binom_exact(u.into(), n.into())) + f64::from(n) * log2_e_over_beta_pow_beta(b);
    Ok(Claim8Result { u, n, beta: beta.clone(), k, lhs_bits, rhs_bits, holds: lhs_bits <= rhs_bits + LOG_TOLERANCE })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterClass {
    /// Static filter with false negatives but no false positives.
    NStatic,
    /// Dynamic filter correct on `(u, n)`-sequences.
    Dynamic,
}

/// Space lower bound `leading_bits - constant_bits`, with the leading term and
/// the proof-derived additive constant reported separately.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpaceBound {
    pub kind: FilterClass,
    pub u: u64,
    pub n: u64,
    #[serde(with = "big_str")]
    pub eps: BigRational,
    /// Exact coefficient of `log2 C(u, n)` in the leading term.
    #[serde(with = "big_str")]
    pub coefficient: BigRational,
    pub log2_binom: f64,
    pub leading_bits: f64,
    /// Implementation-derived constant `K`; see [`space_lower_bound`].
    pub constant_bits: f64,
    pub bound_bits: f64,
}

/// Lower bound on the state length of a filter with error rate `eps` (false-negative
/// rate for [`FilterClass::NStatic`], false-positive rate for [`FilterClass::Dynamic`]).
///
/// NStatic: `(1 - eps - 1/n) log2 C(u,n) - K` with
/// `K = n log2(e / beta^beta) + log2(n eps + 2) + n` and `beta = eps + 1/n`.
/// The three terms come from the binomial estimate at `beta n` false negatives,
/// from bounding the sum of binomials by its largest term times the number of terms,
/// and from `log2(1 / (1 - 1/alpha - p_fail))` with `alpha = 1 + 1/(n eps)`.
/// Dynamic halves both the leading term and `K`.
pub fn space_lower_bound(kind: FilterClass, u: u64, n: u64, eps: &BigRational) -> Result<SpaceBound, BoundsError> {
    if n == 0 || u < 2 * n {
        return Err(BoundsError::ParamsOutOfRange(format!("need n >= 1 and u >= 2n (u={u}, n={n})")));
    }
    let n_big = BigRational::from_integer(BigInt::from(n));
    let one_over_n = n_big.recip();
    if *eps < BigRational::zero() || *eps > BigRational::one() - &one_over_n {
        return Err(BoundsError::ParamsOutOfRange(format!("eps = {} must lie in [0, 1 - 1/n]", big_to_string(eps))));
    }
    let mut coefficient = BigRational::one() - eps - &one_over_n;
    let log2_binom = log2_big(&binom_exact(u, n));
    let e = eps.to_f64().unwrap_or(0.0);
    let nf = n as f64;
    let beta = e + 1.0 / nf;
    let mut constant_bits = nf * log2_e_over_beta_pow_beta(beta) + (nf * e + 2.0).log2() + nf;
    if kind == FilterClass::Dynamic {
        coefficient *= ratio(1, 2);
        constant_bits /= 2.0;
    }
    let leading_bits = coefficient.to_f64().unwrap_or(0.0) * log2_binom;
    Ok(SpaceBound {
        kind,
        u,
        n,
        eps: eps.clone(),
        coefficient,
        log2_binom,
        leading_bits,
        constant_bits,
        bound_bits: leading_bits - constant_bits,
    })
}

/// `FN(r, S) = {x in S : query(r, M(r, S), x) = 0}`.
pub fn fn_set<F: StaticFilter + ?Sized>(f: &F, r: &Seed, s: &Dataset) -> Result<Dataset, BoundsError> {
    let state = f.init(r, s);
    if f.is_fail(&state) {
        return Err(BoundsError::FailState(s.clone()));
    }
    Ok(s.iter().filter(|&x| !f.query(r, &state, x)).collect())
}

/// `C(r, S) = 1`: init does not fail and `|FN(r, S)| <= floor(alpha n eps-)`.
pub fn is_good<F: StaticFilter + ?Sized>(f: &F, r: &Seed, s: &Dataset, threshold: u64) -> bool {
    fn_set(f, r, s).is_ok_and(|fns| fns.len() as u64 <= threshold)
}

fn check_params<F: StaticFilter + ?Sized>(f: &F, p: &BoundsParams) -> Result<UniverseParams, BoundsError> {
    p.validate()?;
    let fp = f.params();
    if fp.u != p.u || fp.n != p.n {
        return Err(BoundsError::ParamsOutOfRange(format!(
            "filter is over u={}, n={} but params say u={}, n={}",
            fp.u, fp.n, p.u, p.n
        )));
    }
    check_enumeration_budget(fp)?;
    Ok(fp)
}

/// Seed with the most good datasets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MagicSeed {
    pub r_star: Seed,
    #[serde(with = "biguint_str")]
    pub good_count: BigUint,
    pub total: u64,
    pub fn_threshold: u64,
    #[serde(with = "big_str")]
    pub required: BigRational,
    /// `good_count >= (1 - 1/alpha - p_fail) C(u, n)`.
    pub meets_bound: bool,
}

/// Direct maximization of `|{S : C(r, S) = 1}|` over `seeds`; ties go to the
/// earliest seed.
pub fn find_magic_r<F: StaticFilter + ?Sized>(
    f: &F,
    p: &BoundsParams,
    seeds: &[Seed],
) -> Result<MagicSeed, BoundsError> {
    let fp = check_params(f, p)?;
    if seeds.is_empty() {
        return Err(BoundsError::NoSeeds);
    }
    let datasets: Vec<Dataset> = combinations(fp.u, fp.n).collect();
    let threshold = p.fn_threshold();
    let counts: Vec<u64> =
        seeds.par_iter().map(|r| datasets.iter().filter(|s| is_good(f, r, s, threshold)).count() as u64).collect();
    let (best, &count) = counts.iter().enumerate().max_by(|(i, a), (j, b)| a.cmp(b).then(j.cmp(i))).expect("nonempty");
    let required = p.required_good();
    let good_count = BigUint::from(count);
    let meets_bound = BigRational::from_integer(BigInt::from(good_count.clone())) >= required;
    Ok(MagicSeed {
        r_star: seeds[best],
        good_count,
        total: datasets.len() as u64,
        fn_threshold: threshold,
        required,
        meets_bound,
    })
}

/// Per-dataset check of the averaging step: among non-failing seeds, the fraction
/// with `|FN| > floor(alpha n eps-)` is at most `1/alpha`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MarkovReport {
    #[serde(with = "big_str")]
    pub worst_fraction: BigRational,
    pub worst_dataset: Option<Dataset>,
    #[serde(with = "big_str")]
    pub bound: BigRational,
    pub holds: bool,
}

pub fn markov_check<F: StaticFilter + ?Sized>(
    f: &F,
    p: &BoundsParams,
    seeds: &[Seed],
) -> Result<MarkovReport, BoundsError> {
    let fp = check_params(f, p)?;
    let threshold = p.fn_threshold();
    let datasets: Vec<Dataset> = combinations(fp.u, fp.n).collect();
    let fractions: Vec<BigRational> = datasets
        .par_iter()
        .map(|s| {
            let (mut alive, mut heavy) = (0i64, 0i64);
            for r in seeds {
                if let Ok(fns) = fn_set(f, r, s) {
                    alive += 1;
                    heavy += i64::from(fns.len() as u64 > threshold);
                }
            }
            if alive == 0 {
                BigRational::zero()
            } else {
                ratio(heavy, alive)
            }
        })
        .collect();
    let mut worst = BigRational::zero();
    let mut worst_dataset = None;
    for (s, q) in datasets.iter().zip(fractions) {
        if worst_dataset.is_none() || q > worst {
            worst = q;
            worst_dataset = Some(s.clone());
        }
    }
    let bound = p.alpha.recip();
    Ok(MarkovReport { holds: worst <= bound, worst_fraction: worst, worst_dataset, bound })
}

/// `pi(S) = (M(r*, S), rank of FN(r*, S) among subsets of [u] \ Y of size <= floor(alpha n eps-))`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PiCode<St> {
    pub state: St,
    #[serde(with = "biguint_str")]
    pub index: BigUint,
}

impl<St: fmt::Debug> fmt::Display for PiCode<St> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:?}, {})", self.state, self.index)
    }
}

/// Elements of `[u] \ y` in ascending order; position in this list is the dense index.
fn complement(u: u32, y: &Dataset) -> Vec<Elem> {
    (0..u).filter(|&x| !y.contains(x)).collect()
}

pub fn pi_encode<F: StaticFilter + ?Sized>(
    f: &F,
    r_star: &Seed,
    s: &Dataset,
    p: &BoundsParams,
) -> Result<PiCode<F::State>, BoundsError> {
    let threshold = p.fn_threshold();
    if s.len() != f.params().n as usize || !is_good(f, r_star, s, threshold) {
        return Err(BoundsError::NotGoodPair(s.clone()));
    }
    let state = f.init(r_star, s);
    let y = f.yes_set(r_star, &state);
    if !y.is_subset(s) {
        return Err(BoundsError::FalsePositives(s.clone()));
    }
    let ambient = complement(f.params().u, &y);
    let dense: Vec<u64> =
        s.difference(&y).iter().map(|x| ambient.binary_search(&x).expect("FN lies outside Y") as u64).collect();
    let index = graded_rank(ambient.len() as u64, &dense);
    Ok(PiCode { state, index })
}

pub fn pi_decode<F: StaticFilter + ?Sized>(
    f: &F,
    r_star: &Seed,
    code: &PiCode<F::State>,
    p: &BoundsParams,
) -> Result<Dataset, BoundsError> {
    if f.is_fail(&code.state) {
        return Err(BoundsError::InvalidCode);
    }
    let y = f.yes_set(r_star, &code.state);
    let ambient = complement(f.params().u, &y);
    let dense = graded_unrank(ambient.len() as u64, p.fn_threshold(), &code.index).ok_or(BoundsError::InvalidCode)?;
    let s = y.union(&dense.iter().map(|&i| ambient[i as usize]).collect());
    if s.len() != f.params().n as usize {
        return Err(BoundsError::InvalidCode);
    }
    Ok(s)
}

/// Exhaustive check that `pi` is injective on good datasets and `pi_decode` inverts it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PiReport {
    pub r_star: Seed,
    pub good_count: u64,
    pub round_trip_failures: u64,
    pub distinct_codes: u64,
    #[serde(with = "biguint_str")]
    pub max_index: BigUint,
    /// `sum_{k <= floor(alpha n eps-)} C(u, k)`.
    #[serde(with = "biguint_str")]
    pub index_bound: BigUint,
    pub holds: bool,
}

pub fn check_pi<F: StaticFilter + ?Sized>(f: &F, r_star: &Seed, p: &BoundsParams) -> Result<PiReport, BoundsError> {
    let fp = check_params(f, p)?;
    let threshold = p.fn_threshold();
    let good: Vec<Dataset> = combinations(fp.u, fp.n).filter(|s| is_good(f, r_star, s, threshold)).collect();
    type Encoded<St> = Result<(PiCode<St>, bool), BoundsError>;
    let results: Vec<Encoded<F::State>> = good
        .par_iter()
        .map(|s| {
            let code = pi_encode(f, r_star, s, p)?;
            let ok = pi_decode(f, r_star, &code, p).as_ref() == Ok(s);
            Ok((code, ok))
        })
        .collect();
    let mut codes = HashSet::new();
    let mut round_trip_failures = 0;
    let mut max_index = BigUint::zero();
    for res in results {
        let (code, ok) = res?;
        round_trip_failures += u64::from(!ok);
        max_index = max_index.max(code.index.clone());
        codes.insert(code);
    }
    let index_bound = binom_prefix_sum(fp.u.into(), threshold.min(fp.u.into()));
    let distinct_codes = codes.len() as u64;
    let holds =
        round_trip_failures == 0 && distinct_codes == good.len() as u64 && (good.is_empty() || max_index < index_bound);
    Ok(PiReport {
        r_star: *r_star,
        good_count: good.len() as u64,
        round_trip_failures,
        distinct_codes,
        max_index,
        index_bound,
        holds,
    })
}

/// One entry of a bounds report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCheck {
    pub name: String,
    pub params: serde_json::Value,
    pub lhs: String,
    pub rhs: String,
    pub holds: bool,
}

impl BoundCheck {
    pub fn thm7(label: &str, p: &BoundsParams, r: &Thm7Result) -> Self {
        BoundCheck {
            name: format!("thm7:{label}"),
            params: serde_json::json!({ "bounds": p, "fspace_bits": r.fspace_bits, "sum_limit": r.sum_limit }),
            lhs: r.lhs.to_string(),
            rhs: big_to_string(&r.rhs),
            holds: r.holds,
        }
    }

    pub fn claim8(r: &Claim8Result) -> Self {
        BoundCheck {
            name: "claim8".into(),
            params: serde_json::json!({ "u": r.u, "n": r.n, "beta": big_to_string(&r.beta), "k": r.k }),
            lhs: format!("{:.9}", r.lhs_bits),
            rhs: format!("{:.9}", r.rhs_bits),
            holds: r.holds,
        }
    }
}

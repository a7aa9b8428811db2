//! The static filter `sigma(F)` built from a dynamic filter `F`.
//!
//! `sigma(F)` stores the pair `(M(+S), M(+S,-S))` and answers `b1 && !b2`, where
//! `b1` / `b2` say whether `x` is in the yes-set of the first / second state. When
//! `F` is witness-based and correct under deletions of nonelements, the false
//! positives of `M(+S)` survive in `M(+S,-S)`, so `sigma(F)` has no false positives
//! and its false negatives are exactly the false positives of `F` after deleting `S`.

use bitvec::prelude::*;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::combinatorics::combinations;
use crate::dataset::{Dataset, Elem};
use crate::filters::{state_after, DynamicFilter, FilterState, Seed, StateBits, StaticFilter};
use crate::rational::{fraction, prob_str, Prob};
use crate::sequence::UniverseParams;
use crate::witness::{check_enumeration_budget, WitnessError};

/// State of `sigma(F)`: `Fail` if either component failed.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaState {
    Fail,
    Pair { m_plus: FilterState, m_plusminus: FilterState },
}

impl SigmaState {
    /// `|m_plus| + |m_plusminus|`; the fail sentinel counts one bit.
    pub fn space_bits(&self) -> u64 {
        match self {
            SigmaState::Fail => 1,
            SigmaState::Pair { m_plus, m_plusminus } => m_plus.len_bits() + m_plusminus.len_bits(),
        }
    }

    /// Self-delimiting serialization: a 32-bit little-endian length of `m_plus`,
    /// then `m_plus`, then `m_plusminus`. The prefix is framing, not state, and is
    /// not counted by [`SigmaState::space_bits`].
    pub fn to_framed_bits(&self) -> Option<StateBits> {
        let SigmaState::Pair { m_plus: FilterState::Bits(a), m_plusminus: FilterState::Bits(b) } = self else {
            return None;
        };
        let mut out = StateBits::new();
        let len = a.len() as u32;
        for i in 0..32 {
            out.push(len >> i & 1 == 1);
        }
        out.extend_from_bitslice(a);
        out.extend_from_bitslice(b);
        Some(out)
    }

    pub fn from_framed_bits(bits: &BitSlice<u64, Lsb0>) -> Option<SigmaState> {
        if bits.len() < 32 {
            return None;
        }
        let (prefix, rest) = bits.split_at(32);
        let len = prefix.iter().enumerate().fold(0usize, |acc, (i, b)| acc | (usize::from(*b) << i));
        if len > rest.len() {
            return None;
        }
        let (a, b) = rest.split_at(len);
        Some(SigmaState::Pair {
            m_plus: FilterState::Bits(a.to_bitvec()),
            m_plusminus: FilterState::Bits(b.to_bitvec()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReductionError {
    #[error("sigma(F) is only defined on datasets of exactly n elements, got {0}")]
    WrongCardinality(Dataset),
    #[error(transparent)]
    Witness(#[from] WitnessError),
}

/// `sigma(F)` as a [`StaticFilter`].
#[derive(Debug, Clone)]
pub struct Sigma<F> {
    inner: F,
}

impl<F: DynamicFilter> Sigma<F> {
    pub fn new(inner: F) -> Self {
        Sigma { inner }
    }

    pub fn inner(&self) -> &F {
        &self.inner
    }
}

/// Builds `(M(+S), M(+S,-S))` by `n` ascending insertions from `init` followed by
/// `n` ascending deletions.
pub fn sigma_init<F: DynamicFilter + ?Sized>(f: &F, r: &Seed, s: &Dataset) -> Result<SigmaState, ReductionError> {
    if s.len() != f.params().n as usize {
        return Err(ReductionError::WrongCardinality(s.clone()));
    }
    let m_plus = state_after(f, r, s, &Dataset::new());
    if m_plus.is_fail() {
        return Ok(SigmaState::Fail);
    }
    let m_plusminus = state_after(f, r, s, s);
    if m_plusminus.is_fail() {
        return Ok(SigmaState::Fail);
    }
    Ok(SigmaState::Pair { m_plus, m_plusminus })
}

/// `b1 && !b2`; 0 on a failed state.
pub fn sigma_query<F: DynamicFilter + ?Sized>(f: &F, r: &Seed, st: &SigmaState, x: Elem) -> bool {
    let SigmaState::Pair { m_plus, m_plusminus } = st else {
        return false;
    };
    combine(answer(f, r, m_plus, x), answer(f, r, m_plusminus, x))
}

/// The answer rule of `sigma(F)`.
pub fn combine(b1: bool, b2: bool) -> bool {
    b1 && !b2
}

fn answer<F: DynamicFilter + ?Sized>(f: &F, r: &Seed, st: &FilterState, x: Elem) -> bool {
    match st {
        FilterState::Fail => true,
        FilterState::Bits(b) => f.query(r, b, x).0,
    }
}

/// Yes-set of `sigma(F)`: `Y(M(+S)) \ Y(M(+S,-S))`.
pub fn sigma_yes_set<F: DynamicFilter + ?Sized>(f: &F, r: &Seed, st: &SigmaState) -> Dataset {
    match st {
        SigmaState::Fail => Dataset::new(),
        SigmaState::Pair { m_plus, m_plusminus } => f.yes_set(r, m_plus).difference(&f.yes_set(r, m_plusminus)),
    }
}

impl<F: DynamicFilter> StaticFilter for Sigma<F> {
    type State = SigmaState;

    fn params(&self) -> UniverseParams {
        self.inner.params()
    }

    fn label(&self) -> String {
        format!("sigma({})", self.inner.label())
    }

    fn init(&self, r: &Seed, s: &Dataset) -> SigmaState {
        sigma_init(&self.inner, r, s).expect("static filters are initialized with size-n datasets")
    }

    fn is_fail(&self, state: &SigmaState) -> bool {
        matches!(state, SigmaState::Fail)
    }

    fn query(&self, r: &Seed, state: &SigmaState, x: Elem) -> bool {
        sigma_query(&self.inner, r, state, x)
    }

    fn state_bits(&self, state: &SigmaState) -> u64 {
        state.space_bits()
    }

    fn yes_set(&self, r: &Seed, state: &SigmaState) -> Dataset {
        sigma_yes_set(&self.inner, r, state)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Instance {
    pub u: u32,
    pub n: u32,
    pub model: String,
    pub seed_bits: u8,
}

/// Worst `(S, x in S)` cell for the false-negative rate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FalseNegativeCell {
    pub dataset: Dataset,
    pub element: Elem,
    #[serde(with = "prob_str")]
    pub rate: Prob,
}

/// Exact results of running `sigma(F)` over every seed and every size-`n` dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReductionReport {
    pub instance: Instance,
    /// Number of `(r, S, x not in S)` cells answered 1.
    pub false_positive_count: u64,
    pub false_positive_cells: u64,
    /// Max over `(S, x in S)` of `Pr_r[answer 0 | init did not fail]`.
    #[serde(with = "prob_str")]
    pub max_false_negative_rate: Prob,
    pub worst_false_negative: Option<FalseNegativeCell>,
    /// Max over `(S, x in S)` of `Pr_r[x in Y(M(+S,-S)) | init did not fail]`.
    #[serde(with = "prob_str")]
    pub max_deleted_state_false_positive_rate: Prob,
    /// For every `(S, x in S)`, the false-negative seeds are exactly the seeds with `b2 = 1`.
    pub false_negatives_match_b2: bool,
    /// Declared false-positive bound of `F`.
    #[serde(with = "prob_str")]
    pub eps_plus: Prob,
    pub false_negative_bound_holds: bool,
    /// Longest observed `|M(+S)| + |M(+S,-S)|`.
    pub space_pair_bits: u64,
    /// `2 * fspace(F)`.
    pub space_bound_bits: u64,
    pub space_bound_holds: bool,
    /// Max over `S` of `Pr_r[sigma init fails]`.
    #[serde(with = "prob_str")]
    pub fail_fraction: Prob,
    /// `2 n p_fail(F)`.
    #[serde(with = "prob_str")]
    pub fail_bound: Prob,
    pub fail_bound_holds: bool,
    pub holds: bool,
}

#[derive(Default)]
struct SeedTally {
    false_positives: u64,
    nonelement_cells: u64,
    max_bits: u64,
    /// Per dataset: `None` if init failed, else one cell per element of `S`.
    per_dataset: Vec<Option<Vec<ElementCell>>>,
}

/// Answers of `sigma(F)` and its two components on one `x` in `S`.
#[derive(Clone, Copy)]
struct ElementCell {
    missed: bool,
    b1: bool,
    b2: bool,
}

/// Exhaustive check of `sigma(F)` over `seeds` and every size-`n` dataset.
pub fn check_reduction<F: DynamicFilter + ?Sized>(f: &F, seeds: &[Seed]) -> Result<ReductionReport, ReductionError> {
    let p = f.params();
    check_enumeration_budget(p)?;
    let datasets: Vec<Dataset> = combinations(p.u, p.n).collect();
    let universe = Dataset::universe(p.u);

    let tallies: Vec<SeedTally> = seeds
        .par_iter()
        .map(|r| {
            let mut t = SeedTally::default();
            for s in &datasets {
                let st = sigma_init(f, r, s).expect("size-n dataset");
                let SigmaState::Pair { m_plus, m_plusminus } = &st else {
                    t.per_dataset.push(None);
                    continue;
                };
                t.max_bits = t.max_bits.max(st.space_bits());
                let y1 = f.yes_set(r, m_plus);
                let y2 = f.yes_set(r, m_plusminus);
                let yes = y1.difference(&y2);
                t.false_positives += yes.difference(s).len() as u64;
                t.nonelement_cells += universe.difference(s).len() as u64;
                let cells = s
                    .iter()
                    .map(|x| ElementCell { missed: !yes.contains(x), b1: y1.contains(x), b2: y2.contains(x) })
                    .collect();
                t.per_dataset.push(Some(cells));
            }
            t
        })
        .collect();

    let mut false_positive_count = 0;
    let mut false_positive_cells = 0;
    let mut space_pair_bits = 0;
    for t in &tallies {
        false_positive_count += t.false_positives;
        false_positive_cells += t.nonelement_cells;
        space_pair_bits = space_pair_bits.max(t.max_bits);
    }

    let mut max_fn = Prob::from_integer(0);
    let mut worst = None;
    let mut max_b2 = Prob::from_integer(0);
    let mut fail_fraction = Prob::from_integer(0);
    let mut matches_b2 = true;
    for (i, s) in datasets.iter().enumerate() {
        let alive_cells: Vec<&Vec<ElementCell>> = tallies.iter().filter_map(|t| t.per_dataset[i].as_ref()).collect();
        let fails = (tallies.len() - alive_cells.len()) as u64;
        fail_fraction = fail_fraction.max(fraction(fails, seeds.len() as u64));
        let alive = seeds.len() as u64 - fails;
        for (j, x) in s.iter().enumerate() {
            let mut fn_count = 0;
            let mut b2_count = 0;
            for cells in &alive_cells {
                let c = cells[j];
                fn_count += u64::from(c.missed);
                b2_count += u64::from(c.b2);
                // With b1 = 1 the answer is 0 exactly when b2 = 1; with b1 = 0 it is always 0.
                matches_b2 &= if c.b1 { c.missed == c.b2 } else { c.missed };
            }
            let rate = fraction(fn_count, alive);
            if rate > max_fn || worst.is_none() {
                max_fn = max_fn.max(rate);
                worst = Some(FalseNegativeCell { dataset: s.clone(), element: x, rate });
            }
            max_b2 = max_b2.max(fraction(b2_count, alive));
        }
    }

    let eps_plus = f.eps_plus();
    let space_bound_bits = 2 * f.space_bits();
    let fail_bound = f.p_fail() * Prob::from_integer(2 * u64::from(p.n));
    let false_negative_bound_holds = max_fn <= eps_plus;
    let space_bound_holds = space_pair_bits <= space_bound_bits;
    let fail_bound_holds = fail_fraction <= fail_bound;
    let holds = false_positive_count == 0 && false_negative_bound_holds && space_bound_holds && fail_bound_holds;
    Ok(ReductionReport {
        instance: Instance { u: p.u, n: p.n, model: f.label(), seed_bits: seeds.first().map_or(0, |r| r.bits) },
        false_positive_count,
        false_positive_cells,
        max_false_negative_rate: max_fn,
        worst_false_negative: worst,
        max_deleted_state_false_positive_rate: max_b2,
        false_negatives_match_b2: matches_b2,
        eps_plus,
        false_negative_bound_holds,
        space_pair_bits,
        space_bound_bits,
        space_bound_holds,
        fail_fraction,
        fail_bound,
        fail_bound_holds,
        holds,
    })
}

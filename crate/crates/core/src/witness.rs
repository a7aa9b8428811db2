//! Yes-sets, the witness-based transform and the sticky false-positive check.
//!
//! A witness-based filter answers `query(x)` at state `M` with 1 exactly when some
//! dataset `S` with `|S| = n` and `x` in `S` produces `M` by ascending insertion
//! from `init`. Any dynamic filter becomes witness-based by replacing its query
//! algorithm with that exhaustive search; updates and space stay the same.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::combinatorics::{binom_u128, combinations};
use crate::dataset::{Dataset, Elem};
use crate::filters::{state_after, DynamicFilter, FilterState, Seed, StateBits};
use crate::rational::Prob;
use crate::sequence::UniverseParams;

/// Largest `C(u, n)` the exhaustive witness search will enumerate.
pub const MAX_WITNESS_DATASETS: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WitnessError {
    #[error("witness search over C({u},{n}) datasets exceeds the enumeration budget of {MAX_WITNESS_DATASETS}")]
    EnumerationTooLarge { u: u32, n: u32 },
    #[error("dataset {0} does not have exactly n elements")]
    WrongCardinality(Dataset),
    #[error("filter reached the fail state while building M(+S) or M(+S,-S) for S = {0}")]
    Fail(Dataset),
}

pub fn check_enumeration_budget(params: UniverseParams) -> Result<(), WitnessError> {
    match binom_u128(u64::from(params.u), u64::from(params.n)) {
        Some(c) if c <= MAX_WITNESS_DATASETS => Ok(()),
        _ => Err(WitnessError::EnumerationTooLarge { u: params.u, n: params.n }),
    }
}

/// `Y(F, r, M)`.
pub fn yes_set<F: DynamicFilter + ?Sized>(filter: &F, r: &Seed, state: &FilterState) -> Dataset {
    filter.yes_set(r, state)
}

/// The witness-based version `F*` of a dynamic filter `F`.
#[derive(Debug, Clone)]
pub struct WitnessModel<F> {
    base: F,
}

/// Wraps `base` so that queries search for witnesses. Fails if the number of
/// candidate witnesses `C(u, n)` is over budget.
pub fn witness_transform<F: DynamicFilter>(base: F) -> Result<WitnessModel<F>, WitnessError> {
    check_enumeration_budget(base.params())?;
    Ok(WitnessModel { base })
}

/// For one seed: every state `M(+S)` reached by a size-`n` dataset, mapped to the
/// union of all its witnesses.
#[derive(Debug, Clone, Default)]
pub struct WitnessIndex {
    by_state: HashMap<StateBits, Dataset>,
}

impl WitnessIndex {
    pub fn yes_set(&self, state: &FilterState) -> Option<Dataset> {
        state.bits().map(|b| self.by_state.get(b).cloned().unwrap_or_default())
    }

    /// Number of distinct states produced by size-`n` datasets.
    pub fn distinct_states(&self) -> usize {
        self.by_state.len()
    }
}

impl<F: DynamicFilter> WitnessModel<F> {
    pub fn base(&self) -> &F {
        &self.base
    }

    pub fn witness_cardinality(&self) -> u32 {
        self.base.params().n
    }

    fn candidates(&self) -> Vec<Dataset> {
        let p = self.base.params();
        combinations(p.u, p.n).collect()
    }

    /// All witnesses for `x` at `state`, in colex order of the datasets.
    pub fn witnesses(&self, r: &Seed, state: &StateBits, x: Elem) -> Vec<Dataset> {
        self.candidates()
            .into_par_iter()
            .filter(|s| s.contains(x))
            .filter(|s| state_after(&self.base, r, s, &Dataset::new()).bits() == Some(state))
            .collect()
    }

    pub fn index(&self, r: &Seed) -> WitnessIndex {
        let pairs: Vec<(FilterState, Dataset)> =
            self.candidates().into_par_iter().map(|s| (state_after(&self.base, r, &s, &Dataset::new()), s)).collect();
        let mut by_state: HashMap<StateBits, Dataset> = HashMap::new();
        for (state, s) in pairs {
            if let FilterState::Bits(b) = state {
                let e = by_state.entry(b).or_default();
                *e = e.union(&s);
            }
        }
        WitnessIndex { by_state }
    }
}

impl<F: DynamicFilter> DynamicFilter for WitnessModel<F> {
    fn params(&self) -> UniverseParams {
        self.base.params()
    }

    fn label(&self) -> String {
        format!("witness({})", self.base.label())
    }

    fn init_state(&self, r: &Seed) -> StateBits {
        self.base.init_state(r)
    }

    fn insert(&self, r: &Seed, state: &StateBits, x: Elem) -> FilterState {
        self.base.insert(r, state, x)
    }

    fn delete(&self, r: &Seed, state: &StateBits, x: Elem) -> FilterState {
        self.base.delete(r, state, x)
    }

    fn query(&self, r: &Seed, state: &StateBits, x: Elem) -> (bool, Option<StateBits>) {
        let found = self
            .candidates()
            .into_par_iter()
            .filter(|s| s.contains(x))
            .any(|s| state_after(&self.base, r, &s, &Dataset::new()).bits() == Some(state));
        // The next state is whatever the base filter moves to on this query.
        let (_, next) = self.base.query(r, state, x);
        (found, next)
    }

    fn space_bits(&self) -> u64 {
        self.base.space_bits()
    }

    fn p_fail(&self) -> Prob {
        self.base.p_fail()
    }

    fn eps_plus(&self) -> Prob {
        self.base.eps_plus()
    }

    fn yes_set(&self, r: &Seed, state: &FilterState) -> Dataset {
        match state {
            FilterState::Fail => Dataset::universe(self.params().u),
            FilterState::Bits(_) => self.index(r).yes_set(state).unwrap_or_default(),
        }
    }
}

/// Elements of `Y(M(+S)) \ S` missing from `Y(M(+S,-S))`. Empty means the sticky
/// inclusion holds for this `(r, S)`.
pub fn check_sticky<F: DynamicFilter + ?Sized>(filter: &F, r: &Seed, s: &Dataset) -> Result<Vec<Elem>, WitnessError> {
    if s.len() != filter.params().n as usize {
        return Err(WitnessError::WrongCardinality(s.clone()));
    }
    let plus = state_after(filter, r, s, &Dataset::new());
    let plus_minus = state_after(filter, r, s, s);
    if plus.is_fail() || plus_minus.is_fail() {
        return Err(WitnessError::Fail(s.clone()));
    }
    let before = filter.yes_set(r, &plus).difference(s);
    let after = filter.yes_set(r, &plus_minus);
    Ok(before.difference(&after).iter().collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StickyViolation {
    pub seed: u64,
    pub dataset: Dataset,
    pub element: Elem,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StickyReport {
    pub model: String,
    pub seeds: u64,
    pub datasets: u64,
    /// `(r, S)` pairs where either state was `Fail` and the check could not run.
    pub failed_cells: u64,
    pub violation_count: u64,
    /// The first few violations, for diagnostics.
    pub violations: Vec<StickyViolation>,
}

/// Runs [`check_sticky`] over every seed and every size-`n` dataset.
pub fn sticky_sweep<F: DynamicFilter>(filter: &F, seeds: &[Seed]) -> Result<StickyReport, WitnessError> {
    check_enumeration_budget(filter.params())?;
    let p = filter.params();
    let datasets: Vec<Dataset> = combinations(p.u, p.n).collect();
    let per_seed: Vec<(u64, Vec<StickyViolation>)> = seeds
        .par_iter()
        .map(|r| {
            let mut failed = 0;
            let mut found = Vec::new();
            for s in &datasets {
                match check_sticky(filter, r, s) {
                    Ok(v) => found.extend(v.into_iter().map(|x| StickyViolation {
                        seed: r.value,
                        dataset: s.clone(),
                        element: x,
                    })),
                    Err(WitnessError::Fail(_)) => failed += 1,
                    Err(e) => unreachable!("size-n dataset rejected: {e}"),
                }
            }
            (failed, found)
        })
        .collect();
    let failed_cells = per_seed.iter().map(|(f, _)| f).sum();
    let violation_count = per_seed.iter().map(|(_, v)| v.len() as u64).sum();
    let violations = per_seed.into_iter().flat_map(|(_, v)| v).take(16).collect();
    Ok(StickyReport {
        model: filter.label(),
        seeds: seeds.len() as u64,
        datasets: datasets.len() as u64,
        failed_cells,
        violation_count,
        violations,
    })
}

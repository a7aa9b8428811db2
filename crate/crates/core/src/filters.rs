//! Dynamic filter models driven by a shared random string.
//!
//! A filter state is an opaque bit string (or the sink value `Fail`); its length in
//! bits is the unit of space. Every model decodes its state, applies an operation
//! and re-encodes, so two states are equal exactly when their encodings are.
//!
//! Canonical encodings, bit 0 first:
//!
//! * `ExactSet` / `NoisyExact`: the dataset `S` (|S| <= n) written as its graded
//!   rank (all subsets of size 0, then size 1, ..., colex within a size) in exactly
//!   `ceil(log2(sum_{k<=n} C(u,k)))` bits, least significant bit first.
//! * `FingerprintMultiset`: one slot per distinct stored fingerprint, slots sorted by
//!   fingerprint. A slot is the `l`-bit fingerprint followed by `count - 1` in
//!   `ceil(log2 n)` bits; counts saturate at `n`. The state length is
//!   `slots * (l + ceil(log2 n))`, so the empty multiset is the empty string.

use std::collections::BTreeMap;
use std::fmt;

use bitvec::prelude::*;
use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::combinatorics::{binom_prefix_sum, binom_u128, bits_for_count, colex_unrank, graded_rank, graded_unrank};
use crate::dataset::{Dataset, Elem};
use crate::rational::Prob;
use crate::sequence::{Op, OpSequence, UniverseParams};

/// Stream identifiers for seed expansion.
const STREAM_FINGERPRINT: u64 = 1;
const STREAM_NOISE: u64 = 2;

/// The shared random string `r`, drawn from a seed space of `2^bits` strings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Seed {
    pub value: u64,
    pub bits: u8,
}

impl Seed {
    pub fn new(value: u64, bits: u8) -> Self {
        assert!((1..=64).contains(&bits), "seed width must be 1..=64 bits");
        assert!(bits == 64 || value < 1u64 << bits, "seed value {value} does not fit in {bits} bits");
        Seed { value, bits }
    }

    /// A full-width seed for Monte-Carlo use.
    pub fn wide(value: u64) -> Self {
        Seed { value, bits: 64 }
    }

    /// Size of the seed space this seed was drawn from.
    pub fn space_size(&self) -> u128 {
        1u128 << self.bits
    }

    /// Deterministic expansion of `r` into a pseudorandom stream for one purpose.
    pub fn expand(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.value);
        rng.set_stream(stream);
        rng
    }
}

/// Every seed of a `2^bits` space, in increasing order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedSpace {
    pub bits: u8,
}

impl SeedSpace {
    pub fn new(bits: u8) -> Self {
        assert!((1..=20).contains(&bits), "enumerable seed spaces hold at most 2^20 seeds");
        SeedSpace { bits }
    }

    pub fn len(&self) -> u64 {
        1u64 << self.bits
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn iter(&self) -> impl Iterator<Item = Seed> + Clone {
        let bits = self.bits;
        (0..self.len()).map(move |v| Seed { value: v, bits })
    }

    pub fn seeds(&self) -> Vec<Seed> {
        self.iter().collect()
    }
}

pub type StateBits = BitVec<u64, Lsb0>;

/// A filter state: a bit string, or the sink `Fail`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FilterState {
    Fail,
    Bits(StateBits),
}

impl FilterState {
    pub fn is_fail(&self) -> bool {
        matches!(self, FilterState::Fail)
    }

    pub fn bits(&self) -> Option<&StateBits> {
        match self {
            FilterState::Fail => None,
            FilterState::Bits(b) => Some(b),
        }
    }

    /// Length in bits; `Fail` is a one-bit sentinel.
    pub fn len_bits(&self) -> u64 {
        match self {
            FilterState::Fail => 1,
            FilterState::Bits(b) => b.len() as u64,
        }
    }

    /// `'0'`/`'1'` characters, bit 0 first; `"fail"` for the sink.
    pub fn to_text(&self) -> String {
        match self {
            FilterState::Fail => "fail".to_string(),
            FilterState::Bits(b) => b.iter().map(|bit| if *bit { '1' } else { '0' }).collect(),
        }
    }

    pub fn from_text(s: &str) -> Result<FilterState, String> {
        if s == "fail" {
            return Ok(FilterState::Fail);
        }
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(format!("invalid state character `{c}`")),
            })
            .collect::<Result<StateBits, _>>()
            .map(FilterState::Bits)
    }
}

impl fmt::Display for FilterState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FilterState::Bits(b) if b.is_empty() => f.write_str("<empty>"),
            other => f.write_str(&other.to_text()),
        }
    }
}

impl Serialize for FilterState {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_text())
    }
}

impl<'de> Deserialize<'de> for FilterState {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        FilterState::from_text(&s).map_err(serde::de::Error::custom)
    }
}

fn push_uint(out: &mut StateBits, value: u64, width: u32) {
    for i in 0..width {
        out.push(value >> i & 1 == 1);
    }
}

fn read_uint(bits: &BitSlice<u64, Lsb0>) -> u64 {
    bits.iter().enumerate().fold(0u64, |acc, (i, b)| acc | (u64::from(*b) << i))
}

fn push_big(out: &mut StateBits, value: &BigUint, width: u64) {
    for i in 0..width {
        out.push(value.bit(i));
    }
}

fn read_big(bits: &BitSlice<u64, Lsb0>) -> BigUint {
    let mut v = BigUint::zero();
    for (i, b) in bits.iter().enumerate() {
        if *b {
            v.set_bit(i as u64, true);
        }
    }
    v
}

/// Result of one step: the next state and, for queries, the answer bit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    pub state: FilterState,
    pub answer: Option<bool>,
}

/// A dynamic filter `{A_init, A_ins, A_del, A_query}` with shared randomness `r`.
///
/// Implementors only see non-`Fail` states; [`step`] handles `init` and the sink.
pub trait DynamicFilter: Sync {
    fn params(&self) -> UniverseParams;

    fn label(&self) -> String;

    /// `A_init(r)`. Never fails.
    fn init_state(&self, r: &Seed) -> StateBits;

    fn insert(&self, r: &Seed, state: &StateBits, x: Elem) -> FilterState;

    fn delete(&self, r: &Seed, state: &StateBits, x: Elem) -> FilterState;

    /// `A_query(r, M, x)`: the answer, and a replacement state if the model keeps an
    /// unsteady representation (`None` leaves the state unchanged).
    fn query(&self, r: &Seed, state: &StateBits, x: Elem) -> (bool, Option<StateBits>);

    /// Maximum state length of the canonical encoding over all `(u,n)`-sequences.
    fn space_bits(&self) -> u64;

    /// Declared per-insert/delete failure probability.
    fn p_fail(&self) -> Prob;

    /// Declared false-positive bound.
    fn eps_plus(&self) -> Prob;

    /// `Y(F, r, M)`: the elements answered 1 at state `M`. `Fail` answers 1 everywhere.
    fn yes_set(&self, r: &Seed, state: &FilterState) -> Dataset {
        match state {
            FilterState::Fail => Dataset::universe(self.params().u),
            FilterState::Bits(b) => (0..self.params().u).filter(|&x| self.query(r, b, x).0).collect(),
        }
    }
}

/// `M_t <- A_f(r, M_{t-1}, x_t)` with the sink and initialization rules applied.
pub fn step<F: DynamicFilter + ?Sized>(filter: &F, r: &Seed, state: &FilterState, op: Op) -> Step {
    if let Some(x) = op.arg() {
        assert!(x < filter.params().u, "operation argument {x} outside the universe");
    }
    match (op, state) {
        (Op::Init, _) => Step { state: FilterState::Bits(filter.init_state(r)), answer: None },
        (Op::Query(_), FilterState::Fail) => Step { state: FilterState::Fail, answer: Some(true) },
        (_, FilterState::Fail) => Step { state: FilterState::Fail, answer: None },
        (Op::Ins(x), FilterState::Bits(b)) => Step { state: filter.insert(r, b, x), answer: None },
        (Op::Del(x), FilterState::Bits(b)) => Step { state: filter.delete(r, b, x), answer: None },
        (Op::Query(x), FilterState::Bits(b)) => {
            let (answer, next) = filter.query(r, b, x);
            let state = next.map_or_else(|| state.clone(), FilterState::Bits);
            Step { state, answer: Some(answer) }
        }
    }
}

/// Runs a whole sequence; `steps[t]` is the result of operation `t`.
pub fn run<F: DynamicFilter + ?Sized>(filter: &F, r: &Seed, seq: &OpSequence) -> Vec<Step> {
    let mut state = FilterState::Fail;
    seq.ops()
        .iter()
        .map(|&op| {
            let s = step(filter, r, &state, op);
            state = s.state.clone();
            s
        })
        .collect()
}

/// `M(F, r, +S, -T)`: init, insert `S` ascending, then delete `T` ascending.
pub fn state_after<F: DynamicFilter + ?Sized>(filter: &F, r: &Seed, s: &Dataset, t: &Dataset) -> FilterState {
    let mut state = step(filter, r, &FilterState::Fail, Op::Init).state;
    for x in s.iter() {
        state = step(filter, r, &state, Op::Ins(x)).state;
    }
    for x in t.iter() {
        state = step(filter, r, &state, Op::Del(x)).state;
    }
    state
}

/// Maximum non-`Fail` state length reached by any sequence under any seed; 0 if
/// nothing is run.
pub fn measure_space<F: DynamicFilter + ?Sized>(filter: &F, seqs: &[OpSequence], seeds: &[Seed]) -> u64 {
    let mut best = 0;
    for r in seeds {
        for seq in seqs {
            for s in run(filter, r, seq) {
                if let FilterState::Bits(b) = &s.state {
                    best = best.max(b.len() as u64);
                }
            }
        }
    }
    best
}

/// A static filter `{A_init, A_query}` with shared randomness: built once from a
/// dataset, then only queried. Queries on a failed state answer 0.
pub trait StaticFilter: Sync {
    type State: Clone + Eq + std::hash::Hash + Send + Sync + fmt::Debug;

    fn params(&self) -> UniverseParams;

    fn label(&self) -> String;

    /// `M(r, S)`.
    fn init(&self, r: &Seed, s: &Dataset) -> Self::State;

    fn is_fail(&self, state: &Self::State) -> bool;

    fn query(&self, r: &Seed, state: &Self::State, x: Elem) -> bool;

    /// Length of the state in bits.
    fn state_bits(&self, state: &Self::State) -> u64;

    /// All elements answered 1.
    fn yes_set(&self, r: &Seed, state: &Self::State) -> Dataset {
        (0..self.params().u).filter(|&x| self.query(r, state, x)).collect()
    }
}

/// Smallest prime strictly greater than `u`.
pub fn next_prime_above(u: u64) -> u64 {
    let is_prime = |p: u64| p >= 2 && (2..).take_while(|d| d * d <= p).all(|d| !p.is_multiple_of(d));
    (u + 1..).find(|&p| is_prime(p)).expect("primes are unbounded")
}

/// `h(x) = ((a x + c) mod p) mod 2^l` with `p` the smallest prime above `u`
/// and `a != 0`, `c` drawn from the seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FingerprintHash {
    pub a: u64,
    pub c: u64,
    pub p: u64,
    pub bits: u32,
}

impl FingerprintHash {
    pub fn from_seed(r: &Seed, u: u32, bits: u32) -> Self {
        let p = next_prime_above(u64::from(u));
        let mut rng = r.expand(STREAM_FINGERPRINT);
        let a = rng.gen_range(1..p);
        let c = rng.gen_range(0..p);
        FingerprintHash { a, c, p, bits }
    }

    pub fn apply(&self, x: Elem) -> u64 {
        let v = (u128::from(self.a) * u128::from(x) + u128::from(self.c)) % u128::from(self.p);
        (v as u64) & mask(self.bits)
    }
}

fn mask(bits: u32) -> u64 {
    if bits >= 64 {
        u64::MAX
    } else {
        (1u64 << bits) - 1
    }
}

/// The `bits`-bit fingerprint of `x` under seed `r` for universe size `u`.
pub fn fingerprint(x: Elem, u: u32, r: &Seed, bits: u32) -> u64 {
    FingerprintHash::from_seed(r, u, bits).apply(x)
}

/// `ceil(log2(n / eps))`: the smallest `l` with `2^l * eps >= n`.
pub fn fingerprint_len(n: u32, eps_plus: Prob) -> u32 {
    assert!(!eps_plus.is_zero(), "fingerprint length needs eps_plus > 0");
    let (p, q) = (u128::from(*eps_plus.numer()), u128::from(*eps_plus.denom()));
    let target = u128::from(n) * q;
    (0..=127u32).find(|&l| (p << l) >= target).expect("l <= 127 always suffices")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    FingerprintMultiset,
    ExactSet,
    NoisyExact,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::FingerprintMultiset => "fingerprint_multiset",
            ModelKind::ExactSet => "exact_set",
            ModelKind::NoisyExact => "noisy_exact",
        })
    }
}

/// Optional per-kind settings for [`make_model`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ModelOptions {
    /// Overrides `ceil(log2(n/eps))` for `FingerprintMultiset`.
    pub fingerprint_bits: Option<u32>,
    /// Noise-set size `m` for `NoisyExact`.
    pub noise_m: Option<u32>,
    /// Forced fingerprints, overriding the hash for the listed elements.
    pub collision_table: BTreeMap<Elem, u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Layout {
    /// Graded rank of the stored set in `width` bits.
    Ranked {
        width: u64,
    },
    Slots {
        fp_bits: u32,
        count_bits: u32,
        table: BTreeMap<Elem, u64>,
    },
}

/// One of the built-in dynamic filter models.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilterModel {
    kind: ModelKind,
    params: UniverseParams,
    eps_plus: Prob,
    noise_m: u32,
    layout: Layout,
}

/// Validates parameters and builds a model.
///
/// `ExactSet` accepts any `eps_plus` in `[0, 1]`; `FingerprintMultiset` needs
/// `eps_plus > 0`; `NoisyExact` needs `m <= floor(eps_plus * u)`.
pub fn make_model(
    kind: ModelKind,
    params: UniverseParams,
    eps_plus: Prob,
    options: ModelOptions,
) -> Result<FilterModel, ModelError> {
    let invalid = |msg: String| Err(ModelError::InvalidParams(msg));
    if eps_plus > Prob::from_integer(1) {
        return invalid(format!("eps_plus = {eps_plus} exceeds 1"));
    }
    if params.n > params.u {
        return invalid(format!("n = {} exceeds u = {}", params.n, params.u));
    }
    let ranked = || -> Result<Layout, ModelError> {
        let count = binom_prefix_sum(u64::from(params.u), u64::from(params.n));
        Ok(Layout::Ranked { width: bits_for_count(&count) })
    };
    let (layout, noise_m) = match kind {
        ModelKind::ExactSet => (ranked()?, 0),
        ModelKind::NoisyExact => {
            let m = options.noise_m.unwrap_or(0);
            let cap = (u128::from(*eps_plus.numer()) * u128::from(params.u)) / u128::from(*eps_plus.denom());
            if u128::from(m) > cap {
                return invalid(format!("noise_m = {m} exceeds floor(eps_plus * u) = {cap}"));
            }
            if binom_u128(u64::from(params.u), u64::from(m)).is_none() {
                return invalid(format!("C({}, {m}) noise sets are too many to index", params.u));
            }
            (ranked()?, m)
        }
        ModelKind::FingerprintMultiset => {
            if eps_plus.is_zero() && options.fingerprint_bits.is_none() {
                return invalid("fingerprint_multiset needs eps_plus > 0".into());
            }
            let fp_bits = options.fingerprint_bits.unwrap_or_else(|| fingerprint_len(params.n, eps_plus));
            if fp_bits > 63 {
                return invalid(format!("fingerprint length {fp_bits} exceeds 63 bits"));
            }
            let count_bits = bits_for_count(&BigUint::from(params.n)) as u32;
            if fp_bits + count_bits == 0 {
                return invalid("fingerprint slots would be zero bits wide".into());
            }
            for (&x, &fp) in &options.collision_table {
                if x >= params.u || fp > mask(fp_bits) {
                    return invalid(format!("collision entry {x}:{fp} outside universe or fingerprint range"));
                }
            }
            (Layout::Slots { fp_bits, count_bits, table: options.collision_table }, 0)
        }
    };
    Ok(FilterModel { kind, params, eps_plus, noise_m, layout })
}

impl FilterModel {
    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    /// Fingerprint length `l` (FingerprintMultiset only).
    pub fn fingerprint_bits(&self) -> Option<u32> {
        match &self.layout {
            Layout::Slots { fp_bits, .. } => Some(*fp_bits),
            Layout::Ranked { .. } => None,
        }
    }

    pub fn noise_m(&self) -> u32 {
        self.noise_m
    }

    /// The fingerprint this model stores for `x` under `r`.
    pub fn fingerprint_of(&self, r: &Seed, x: Elem) -> Option<u64> {
        match &self.layout {
            Layout::Slots { fp_bits, table, .. } => {
                Some(table.get(&x).copied().unwrap_or_else(|| fingerprint(x, self.params.u, r, *fp_bits)))
            }
            Layout::Ranked { .. } => None,
        }
    }

    /// The seed-chosen noise set `R` of a `NoisyExact` model.
    ///
    /// With `K = C(u, m)` and a seed space of `2^b` strings, seeds below
    /// `floor(2^b / K) * K` map onto the `K` noise sets equally often and the rest
    /// get `R = {}`, so `Pr_r[x in R] <= m/u` holds exactly over the seed space.
    pub fn noise_set(&self, r: &Seed) -> Dataset {
        if self.kind != ModelKind::NoisyExact || self.noise_m == 0 {
            return Dataset::new();
        }
        let (u, m) = (u64::from(self.params.u), u64::from(self.noise_m));
        let k = binom_u128(u, m).expect("checked at construction");
        let space = r.space_size();
        let q = space / k;
        if q == 0 {
            let mut rng = r.expand(STREAM_NOISE);
            return rand::seq::index::sample(&mut rng, u as usize, m as usize).into_iter().map(|x| x as Elem).collect();
        }
        let v = u128::from(r.value);
        if v >= q * k {
            return Dataset::new();
        }
        colex_unrank(BigUint::from(v % k), m).into_iter().map(|x| x as Elem).collect()
    }

    fn decode_set(&self, bits: &StateBits) -> Dataset {
        let rank = read_big(bits);
        let (u, n) = (u64::from(self.params.u), u64::from(self.params.n));
        graded_unrank(u, n, &rank).expect("state holds a valid rank").into_iter().map(|x| x as Elem).collect()
    }

    fn encode_set(&self, set: &Dataset, width: u64) -> StateBits {
        let v: Vec<u64> = set.iter().map(u64::from).collect();
        let rank = graded_rank(u64::from(self.params.u), &v);
        let mut out = StateBits::with_capacity(width as usize);
        push_big(&mut out, &rank, width);
        out
    }

    fn decode_slots(&self, bits: &StateBits, fp_bits: u32, count_bits: u32) -> BTreeMap<u64, u32> {
        let w = (fp_bits + count_bits) as usize;
        bits.chunks(w)
            .map(|slot| {
                let (fp, c) = slot.split_at(fp_bits as usize);
                (read_uint(fp), read_uint(c) as u32 + 1)
            })
            .collect()
    }

    fn encode_slots(slots: &BTreeMap<u64, u32>, fp_bits: u32, count_bits: u32) -> StateBits {
        let mut out = StateBits::with_capacity(slots.len() * (fp_bits + count_bits) as usize);
        for (&fp, &count) in slots {
            push_uint(&mut out, fp, fp_bits);
            push_uint(&mut out, u64::from(count - 1), count_bits);
        }
        out
    }

    fn update(&self, r: &Seed, bits: &StateBits, x: Elem, insert: bool) -> FilterState {
        let n = self.params.n;
        match &self.layout {
            Layout::Ranked { width } => {
                let mut set = self.decode_set(bits);
                if insert {
                    set.insert(x);
                } else {
                    set.remove(x);
                }
                if set.len() > n as usize {
                    return FilterState::Fail;
                }
                FilterState::Bits(self.encode_set(&set, *width))
            }
            Layout::Slots { fp_bits, count_bits, .. } => {
                let mut slots = self.decode_slots(bits, *fp_bits, *count_bits);
                let fp = self.fingerprint_of(r, x).expect("slot layout");
                if insert {
                    let full = slots.len() == n as usize;
                    match slots.get_mut(&fp) {
                        Some(c) => *c = (*c + 1).min(n),
                        None if full => return FilterState::Fail,
                        None => {
                            slots.insert(fp, 1);
                        }
                    }
                } else if let Some(c) = slots.get_mut(&fp) {
                    *c -= 1;
                    if *c == 0 {
                        slots.remove(&fp);
                    }
                }
                FilterState::Bits(Self::encode_slots(&slots, *fp_bits, *count_bits))
            }
        }
    }
}

impl DynamicFilter for FilterModel {
    fn params(&self) -> UniverseParams {
        self.params
    }

    fn label(&self) -> String {
        match self.kind {
            ModelKind::NoisyExact => format!("noisy_exact(m={})", self.noise_m),
            ModelKind::FingerprintMultiset => {
                format!("fingerprint_multiset(l={})", self.fingerprint_bits().unwrap_or_default())
            }
            ModelKind::ExactSet => "exact_set".to_string(),
        }
    }

    fn init_state(&self, _r: &Seed) -> StateBits {
        match &self.layout {
            Layout::Ranked { width } => self.encode_set(&Dataset::new(), *width),
            Layout::Slots { .. } => StateBits::new(),
        }
    }

    fn insert(&self, r: &Seed, state: &StateBits, x: Elem) -> FilterState {
        self.update(r, state, x, true)
    }

    fn delete(&self, r: &Seed, state: &StateBits, x: Elem) -> FilterState {
        self.update(r, state, x, false)
    }

    fn query(&self, r: &Seed, state: &StateBits, x: Elem) -> (bool, Option<StateBits>) {
        let answer = match (&self.layout, self.kind) {
            (Layout::Ranked { .. }, ModelKind::NoisyExact) => {
                self.decode_set(state).contains(x) || self.noise_set(r).contains(x)
            }
            (Layout::Ranked { .. }, _) => self.decode_set(state).contains(x),
            (Layout::Slots { fp_bits, count_bits, .. }, _) => {
                let fp = self.fingerprint_of(r, x).expect("slot layout");
                self.decode_slots(state, *fp_bits, *count_bits).contains_key(&fp)
            }
        };
        (answer, None)
    }

    fn space_bits(&self) -> u64 {
        match &self.layout {
            Layout::Ranked { width } => *width,
            Layout::Slots { fp_bits, count_bits, .. } => u64::from(self.params.n) * u64::from(fp_bits + count_bits),
        }
    }

    fn p_fail(&self) -> Prob {
        Prob::zero()
    }

    fn eps_plus(&self) -> Prob {
        self.eps_plus
    }

    fn yes_set(&self, r: &Seed, state: &FilterState) -> Dataset {
        let Some(bits) = state.bits() else {
            return Dataset::universe(self.params.u);
        };
        match (&self.layout, self.kind) {
            (Layout::Ranked { .. }, ModelKind::NoisyExact) => self.decode_set(bits).union(&self.noise_set(r)),
            (Layout::Ranked { .. }, _) => self.decode_set(bits),
            (Layout::Slots { fp_bits, count_bits, .. }, _) => {
                let slots = self.decode_slots(bits, *fp_bits, *count_bits);
                (0..self.params.u)
                    .filter(|&x| slots.contains_key(&self.fingerprint_of(r, x).expect("slot layout")))
                    .collect()
            }
        }
    }
}

/// Fingerprints stored by a `FingerprintMultiset` state, with multiplicities.
pub fn multiset_contents(model: &FilterModel, state: &FilterState) -> Option<BTreeMap<u64, u32>> {
    match (&model.layout, state) {
        (Layout::Slots { fp_bits, count_bits, .. }, FilterState::Bits(b)) => {
            Some(model.decode_slots(b, *fp_bits, *count_bits))
        }
        _ => None,
    }
}

/// Reads a state's rank back as a dataset (ExactSet / NoisyExact only).
pub fn stored_set(model: &FilterModel, state: &FilterState) -> Option<Dataset> {
    match (&model.layout, state) {
        (Layout::Ranked { .. }, FilterState::Bits(b)) => Some(model.decode_set(b)),
        _ => None,
    }
}

impl FilterModel {
    /// Number of bits of the rank encoding (ExactSet / NoisyExact).
    pub fn rank_width(&self) -> Option<u64> {
        match self.layout {
            Layout::Ranked { width } => Some(width),
            Layout::Slots { .. } => None,
        }
    }

    /// Integer value of a ranked state, for diagnostics.
    pub fn rank_of(&self, state: &FilterState) -> Option<u64> {
        match (&self.layout, state) {
            (Layout::Ranked { .. }, FilterState::Bits(b)) => read_big(b).to_u64(),
            _ => None,
        }
    }
}

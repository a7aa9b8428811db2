//! Operation sequences over a universe `[u]` with a dataset-cardinality bound `n`.
//!
//! A sequence starts with `init`, every argument lies in `[u]`, and the induced
//! dataset never holds more than `n` elements. Duplicate insertions and deletions of
//! nonelements are allowed; they leave the dataset unchanged.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, Elem};

/// Universe size `u` and dataset-cardinality bound `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct UniverseParams {
    pub u: u32,
    pub n: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("universe parameters must satisfy u >= 1 and n >= 1 (got u={u}, n={n})")]
pub struct InvalidUniverse {
    pub u: u32,
    pub n: u32,
}

impl UniverseParams {
    pub fn new(u: u32, n: u32) -> Result<Self, InvalidUniverse> {
        if u == 0 || n == 0 {
            return Err(InvalidUniverse { u, n });
        }
        Ok(UniverseParams { u, n })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Op {
    Init,
    Ins(Elem),
    Del(Elem),
    Query(Elem),
}

impl Op {
    pub fn arg(self) -> Option<Elem> {
        match self {
            Op::Init => None,
            Op::Ins(x) | Op::Del(x) | Op::Query(x) => Some(x),
        }
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Op::Init => f.write_str("init"),
            Op::Ins(x) => write!(f, "ins {x}"),
            Op::Del(x) => write!(f, "del {x}"),
            Op::Query(x) => write!(f, "query {x}"),
        }
    }
}

impl FromStr for Op {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, ParseError> {
        let mut parts = s.split_whitespace();
        let bad = || ParseError::BadOp(s.trim().to_string());
        let word = parts.next().ok_or_else(bad)?;
        let arg = parts.next();
        if parts.next().is_some() {
            return Err(bad());
        }
        let elem = || -> Result<Elem, ParseError> { arg.ok_or_else(bad)?.parse().map_err(|_| bad()) };
        match word {
            "init" if arg.is_none() => Ok(Op::Init),
            "ins" => Ok(Op::Ins(elem()?)),
            "del" => Ok(Op::Del(elem()?)),
            "query" => Ok(Op::Query(elem()?)),
            _ => Err(bad()),
        }
    }
}

/// The first violated condition of a candidate sequence.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("operation sequence is empty")]
    Empty,
    #[error("first operation is not init")]
    FirstOpNotInit,
    #[error("argument of operation {0} is outside the universe")]
    ArgOutOfUniverse(usize),
    #[error("dataset cardinality exceeds n at operation {0}")]
    CardinalityExceeded(usize),
}

/// A validated `(u, n)`-sequence.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct OpSequence {
    params: UniverseParams,
    ops: Vec<Op>,
}

impl OpSequence {
    pub fn params(&self) -> UniverseParams {
        self.params
    }

    pub fn ops(&self) -> &[Op] {
        &self.ops
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }
}

/// Checks the three `(u, n)`-sequence conditions in time order and reports the first failure.
pub fn validate_sequence(ops: Vec<Op>, params: UniverseParams) -> Result<OpSequence, ValidationError> {
    if ops.is_empty() {
        return Err(ValidationError::Empty);
    }
    if ops[0] != Op::Init {
        return Err(ValidationError::FirstOpNotInit);
    }
    let mut set = Dataset::new();
    for (t, &op) in ops.iter().enumerate() {
        if op.arg().is_some_and(|x| x >= params.u) {
            return Err(ValidationError::ArgOutOfUniverse(t));
        }
        apply(&mut set, op);
        if set.len() > params.n as usize {
            return Err(ValidationError::CardinalityExceeded(t));
        }
    }
    Ok(OpSequence { params, ops })
}

fn apply(set: &mut Dataset, op: Op) {
    match op {
        Op::Init => *set = Dataset::new(),
        Op::Ins(x) => {
            set.insert(x);
        }
        Op::Del(x) => {
            set.remove(x);
        }
        Op::Query(_) => {}
    }
}

/// `sets[t]` is the dataset after operation `t`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DatasetTrace {
    pub sets: Vec<Dataset>,
}

impl DatasetTrace {
    pub fn max_cardinality(&self) -> usize {
        self.sets.iter().map(Dataset::len).max().unwrap_or(0)
    }

    pub fn last(&self) -> Option<&Dataset> {
        self.sets.last()
    }
}

pub fn dataset_trace(seq: &OpSequence) -> DatasetTrace {
    let mut set = Dataset::new();
    let sets = seq
        .ops
        .iter()
        .map(|&op| {
            apply(&mut set, op);
            set.clone()
        })
        .collect();
    DatasetTrace { sets }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OpClass {
    Normal,
    DuplicateInsertion,
    DeletionOfNonelement,
}

pub fn classify_ops(seq: &OpSequence) -> Vec<OpClass> {
    let mut before = Dataset::new();
    seq.ops
        .iter()
        .map(|&op| {
            let class = match op {
                Op::Ins(x) if before.contains(x) => OpClass::DuplicateInsertion,
                Op::Del(x) if !before.contains(x) => OpClass::DeletionOfNonelement,
                _ => OpClass::Normal,
            };
            apply(&mut before, op);
            class
        })
        .collect()
}

/// Which operations a rewriter should treat as *potential* duplicate insertions
/// (or potential deletions of nonelements).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub enum PotentialMask {
    /// Every `ins` (resp. `del`) is potential.
    #[default]
    All,
    /// Per-operation flags, indexed by time. Missing entries count as `false`.
    Flags(Vec<bool>),
}

impl PotentialMask {
    fn is_potential(&self, t: usize) -> bool {
        match self {
            PotentialMask::All => true,
            PotentialMask::Flags(f) => f.get(t).copied().unwrap_or(false),
        }
    }
}

/// Output of a rewriter: the new sequence and, for every original index `t`,
/// the index `index_map[t]` of its image in the new sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rewrite {
    pub seq: OpSequence,
    pub index_map: Vec<usize>,
}

/// Puts a `del(x)` immediately before every potential duplicate insertion `ins(x)`.
/// The cardinality bound is unchanged.
pub fn rewrite_dup_to_del(seq: &OpSequence, potential: &PotentialMask) -> Rewrite {
    rewrite(seq, seq.params, |t, op| match op {
        Op::Ins(x) if potential.is_potential(t) => Some(Op::Del(x)),
        _ => None,
    })
}

/// Puts an `ins(x)` immediately before every potential deletion of a nonelement
/// `del(x)`. The extra insertion can push the dataset to `n + 1` elements, so the
/// output is a `(u, n + 1)`-sequence.
pub fn rewrite_del_to_dup(seq: &OpSequence, potential: &PotentialMask) -> Rewrite {
    let params = UniverseParams { u: seq.params.u, n: seq.params.n + 1 };
    rewrite(seq, params, |t, op| match op {
        Op::Del(x) if potential.is_potential(t) => Some(Op::Ins(x)),
        _ => None,
    })
}

fn rewrite(seq: &OpSequence, params: UniverseParams, prefix: impl Fn(usize, Op) -> Option<Op>) -> Rewrite {
    let mut ops = Vec::with_capacity(seq.ops.len() * 2);
    let mut index_map = Vec::with_capacity(seq.ops.len());
    for (t, &op) in seq.ops.iter().enumerate() {
        if let Some(extra) = prefix(t, op) {
            ops.push(extra);
        }
        index_map.push(ops.len());
        ops.push(op);
    }
    let seq = validate_sequence(ops, params).expect("rewriting preserves the (u, n+1)-sequence conditions");
    Rewrite { seq, index_map }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("missing header line `u=<u> n=<n>`")]
    MissingHeader,
    #[error("malformed header `{0}`")]
    BadHeader(String),
    #[error("malformed operation `{0}`")]
    BadOp(String),
    #[error(transparent)]
    Universe(#[from] InvalidUniverse),
    #[error(transparent)]
    Invalid(#[from] ValidationError),
}

/// Parses the text literal format: a header `u=<u> n=<n>` followed by one operation
/// per line (`init`, `ins <x>`, `del <x>`, `query <x>`). Blank lines and `#` comments
/// are ignored.
pub fn parse_sequence(text: &str) -> Result<OpSequence, ParseError> {
    let mut lines = text.lines().map(|l| l.split('#').next().unwrap_or("").trim()).filter(|l| !l.is_empty());
    let header = lines.next().ok_or(ParseError::MissingHeader)?;
    let params = parse_header(header)?;
    let ops = lines.map(str::parse).collect::<Result<Vec<Op>, _>>()?;
    Ok(validate_sequence(ops, params)?)
}

fn parse_header(line: &str) -> Result<UniverseParams, ParseError> {
    let bad = || ParseError::BadHeader(line.to_string());
    let (mut u, mut n) = (None, None);
    for part in line.split_whitespace() {
        let (key, value) = part.split_once('=').ok_or_else(bad)?;
        let value: u32 = value.parse().map_err(|_| bad())?;
        match key {
            "u" => u = Some(value),
            "n" => n = Some(value),
            _ => return Err(bad()),
        }
    }
    match (u, n) {
        (Some(u), Some(n)) => Ok(UniverseParams::new(u, n)?),
        _ => Err(bad()),
    }
}

impl fmt::Display for OpSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "u={} n={}", self.params.u, self.params.n)?;
        for op in &self.ops {
            writeln!(f, "{op}")?;
        }
        Ok(())
    }
}

/// Every valid sequence of length `1..=max_len` that starts with the only `init`
/// and draws its remaining operations from `ins/del/query` over `[u]`.
pub fn enumerate_sequences(params: UniverseParams, max_len: usize) -> Vec<OpSequence> {
    let alphabet: Vec<Op> = (0..params.u).flat_map(|x| [Op::Ins(x), Op::Del(x), Op::Query(x)]).collect();
    let mut out = Vec::new();
    let mut frontier = vec![(vec![Op::Init], Dataset::new())];
    for len in 1..=max_len {
        let mut next = Vec::new();
        for (ops, set) in frontier {
            out.push(OpSequence { params, ops: ops.clone() });
            if len == max_len {
                continue;
            }
            for &op in &alphabet {
                let mut s = set.clone();
                apply(&mut s, op);
                if s.len() <= params.n as usize {
                    let mut o = ops.clone();
                    o.push(op);
                    next.push((o, s));
                }
            }
        }
        frontier = next;
    }
    out
}

//! Experiment configuration and the three batch runs behind the CLI: the
//! Monte-Carlo false-positive experiment, the violation demonstrations and the
//! exhaustive verification suite.
//!
//! Every run is a pure function of its [`ExperimentConfig`]; all randomness is
//! derived from `config.seed`, and reports embed the SHA-256 of the resolved
//! config so two reports can be matched to the exact settings that produced them.

use std::fs;
use std::path::{Path, PathBuf};

use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bounds::{
    check_pi, claim8_check, find_magic_r, markov_check, pi_decode, pi_encode, space_lower_bound, thm7_check,
    BoundCheck, BoundsError, BoundsParams, FilterClass, PiCode, SpaceBound,
};
use crate::dataset::{Dataset, Elem};
use crate::filters::{
    make_model, run, state_after, DynamicFilter, FilterModel, FilterState, ModelKind, ModelOptions, Seed, SeedSpace,
    StateBits,
};
use crate::rational::{fraction, prob_str, prob_to_big, Fraction, Prob};
use crate::reduction::{check_reduction, ReductionError, ReductionReport, Sigma, SigmaState};
use crate::sequence::{validate_sequence, Op, OpSequence, UniverseParams};
use crate::witness::{check_enumeration_budget, sticky_sweep, witness_transform, WitnessError, WitnessModel};

/// Largest seed space the exhaustive commands will enumerate.
pub const MAX_EXHAUSTIVE_SEED_BITS: u8 = 20;

/// z-score of a two-sided 95% interval.
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("cannot read config {path}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Enumeration(#[from] WitnessError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
}

impl From<ReductionError> for HarnessError {
    fn from(e: ReductionError) -> Self {
        match e {
            ReductionError::Witness(w) => HarnessError::Enumeration(w),
            other => HarnessError::Config(other.to_string()),
        }
    }
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, HarnessError> {
    Err(HarnessError::Config(msg.into()))
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// One dynamic filter model as written in a config file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    #[serde(with = "prob_str", default = "zero_prob")]
    pub eps_plus: Prob,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_m: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fingerprint_bits: Option<u32>,
    /// Forced fingerprints as `[element, fingerprint]` pairs.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub collisions: Vec<(Elem, u64)>,
}

fn zero_prob() -> Prob {
    Prob::zero()
}

impl ModelSpec {
    pub fn exact_set() -> Self {
        ModelSpec {
            kind: ModelKind::ExactSet,
            eps_plus: Prob::zero(),
            noise_m: None,
            fingerprint_bits: None,
            collisions: vec![],
        }
    }

    pub fn noisy_exact(m: u32, eps_plus: Prob) -> Self {
        ModelSpec { kind: ModelKind::NoisyExact, eps_plus, noise_m: Some(m), ..Self::exact_set() }
    }

    pub fn fingerprint_multiset(eps_plus: Prob, fingerprint_bits: Option<u32>) -> Self {
        ModelSpec { kind: ModelKind::FingerprintMultiset, eps_plus, fingerprint_bits, ..Self::exact_set() }
    }

    pub fn build(&self, params: UniverseParams) -> Result<FilterModel, HarnessError> {
        let opts = ModelOptions {
            fingerprint_bits: self.fingerprint_bits,
            noise_m: self.noise_m,
            collision_table: self.collisions.iter().copied().collect(),
        };
        make_model(self.kind, params, self.eps_plus, opts).map_err(|e| HarnessError::Config(e.to_string()))
    }
}

/// A base model or its witness-based transform, behind one type.
#[derive(Debug, Clone)]
pub enum ModelVariant {
    Base(FilterModel),
    Witness(WitnessModel<FilterModel>),
}

macro_rules! delegate {
    ($self:ident, $m:ident => $e:expr) => {
        match $self {
            ModelVariant::Base($m) => $e,
            ModelVariant::Witness($m) => $e,
        }
    };
}

impl DynamicFilter for ModelVariant {
    fn params(&self) -> UniverseParams {
        delegate!(self, m => m.params())
    }

    fn label(&self) -> String {
        delegate!(self, m => m.label())
    }

    fn init_state(&self, r: &Seed) -> StateBits {
        delegate!(self, m => m.init_state(r))
    }

    fn insert(&self, r: &Seed, state: &StateBits, x: Elem) -> FilterState {
        delegate!(self, m => m.insert(r, state, x))
    }

    fn delete(&self, r: &Seed, state: &StateBits, x: Elem) -> FilterState {
        delegate!(self, m => m.delete(r, state, x))
    }

    fn query(&self, r: &Seed, state: &StateBits, x: Elem) -> (bool, Option<StateBits>) {
        delegate!(self, m => m.query(r, state, x))
    }

    fn space_bits(&self) -> u64 {
        delegate!(self, m => m.space_bits())
    }

    fn p_fail(&self) -> Prob {
        delegate!(self, m => m.p_fail())
    }

    fn eps_plus(&self) -> Prob {
        delegate!(self, m => m.eps_plus())
    }

    fn yes_set(&self, r: &Seed, state: &FilterState) -> Dataset {
        delegate!(self, m => m.yes_set(r, state))
    }
}

impl ModelVariant {
    pub fn new(spec: &ModelSpec, params: UniverseParams, witness: bool) -> Result<Self, HarnessError> {
        let base = spec.build(params)?;
        Ok(if witness { ModelVariant::Witness(witness_transform(base)?) } else { ModelVariant::Base(base) })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Claim8Grid {
    pub u: Vec<u32>,
    pub n: Vec<u32>,
    pub beta: Vec<Fraction>,
}

impl Default for Claim8Grid {
    fn default() -> Self {
        Claim8Grid {
            u: vec![16, 32, 64, 128],
            n: vec![4, 8, 16],
            beta: vec![Fraction::new(1, 4), Fraction::new(1, 2), Fraction::new(3, 4), Fraction::new(1, 1)],
        }
    }
}

/// Settings of the exhaustive verification suite.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub u: u32,
    pub n: u32,
    pub seed_bits: u8,
    pub models: Vec<ModelSpec>,
    /// Run each check on the witness-based transform of every model.
    pub witness: bool,
    /// Run each check on the untransformed model as well.
    pub base: bool,
    /// Values of alpha for the space-bound certification.
    pub alphas: Vec<Fraction>,
    /// Alpha used for the magic-seed search and the encoding checks.
    pub magic_alpha: Fraction,
    pub claim8: Claim8Grid,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            u: 6,
            n: 2,
            seed_bits: 8,
            models: vec![ModelSpec::exact_set(), ModelSpec::noisy_exact(1, Prob::new(1, 6))],
            witness: true,
            base: true,
            alphas: vec![Fraction::new(3, 2), Fraction::new(2, 1), Fraction::new(4, 1)],
            magic_alpha: Fraction::new(2, 1),
            claim8: Claim8Grid::default(),
        }
    }
}

/// How the Monte-Carlo experiment picks datasets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingPolicy {
    /// A fresh uniform dataset per trial.
    Fresh,
    /// One uniform dataset shared by every trial.
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FpRateConfig {
    pub u: u32,
    pub n: u32,
    #[serde(with = "prob_str")]
    pub eps_plus: Prob,
    pub trials: u64,
    pub fingerprint_bits: Option<u32>,
    pub dataset: SamplingPolicy,
}

impl Default for FpRateConfig {
    fn default() -> Self {
        FpRateConfig {
            u: 65536,
            n: 16,
            eps_plus: Prob::new(1, 8),
            trials: 100_000,
            fingerprint_bits: None,
            dataset: SamplingPolicy::Fresh,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DemoConfig {
    pub u: u32,
    pub n: u32,
    pub seed_bits: u8,
    #[serde(with = "prob_str")]
    pub eps_plus: Prob,
    /// The element deleted without being present / inserted twice.
    pub x: Elem,
    /// The element whose fingerprint `x` collides with.
    pub y: Elem,
    /// Shared fingerprint forced on `x` and `y`.
    pub fingerprint: u64,
}

impl Default for DemoConfig {
    fn default() -> Self {
        DemoConfig { u: 8, n: 2, seed_bits: 8, eps_plus: Prob::new(1, 4), x: 1, y: 2, fingerprint: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thm7Case {
    pub label: String,
    pub u: u32,
    pub n: u32,
    pub fspace_bits: u64,
    pub alpha: Fraction,
    #[serde(default = "zero_fraction")]
    pub eps_minus: Fraction,
    #[serde(default = "zero_fraction")]
    pub p_fail: Fraction,
    /// Whether the necessary condition is expected to hold.
    #[serde(default = "yes")]
    pub expect_holds: bool,
}

fn zero_fraction() -> Fraction {
    Fraction::new(0, 1)
}

fn yes() -> bool {
    true
}

impl Thm7Case {
    fn params(&self) -> BoundsParams {
        BoundsParams {
            eps_minus: self.eps_minus.to_big(),
            p_fail: self.p_fail.to_big(),
            ..BoundsParams::new(self.u, self.n, self.alpha.to_big())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceCase {
    pub kind: FilterClass,
    pub u: u64,
    pub n: u64,
    pub eps: Fraction,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundsConfig {
    pub thm7: Vec<Thm7Case>,
    pub claim8: Claim8Grid,
    pub space: Vec<SpaceCase>,
}

/// The fixed instance with 3-bit states at `u = 8, n = 2` that no valid filter can have.
pub fn synthetic_negative_case() -> Thm7Case {
    Thm7Case {
        label: "synthetic_negative".into(),
        u: 8,
        n: 2,
        fspace_bits: 3,
        alpha: Fraction::new(2, 1),
        eps_minus: zero_fraction(),
        p_fail: zero_fraction(),
        expect_holds: false,
    }
}

impl Default for BoundsConfig {
    fn default() -> Self {
        let holds = Thm7Case {
            label: "five_bit_states".into(),
            fspace_bits: 5,
            expect_holds: true,
            ..synthetic_negative_case()
        };
        let vacuous = Thm7Case {
            label: "vacuous".into(),
            fspace_bits: 0,
            p_fail: Fraction::new(1, 2),
            expect_holds: true,
            ..synthetic_negative_case()
        };
        let space = [FilterClass::NStatic, FilterClass::Dynamic]
            .into_iter()
            .map(|kind| SpaceCase { kind, u: 65536, n: 16, eps: Fraction::new(1, 8) })
            .collect();
        BoundsConfig { thm7: vec![holds, synthetic_negative_case(), vacuous], claim8: Claim8Grid::default(), space }
    }
}

/// Complete, resolved experiment configuration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Root of all pseudorandomness.
    pub seed: u64,
    /// Where reports are written; standard output when absent. Not part of the config hash.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub verify: VerifyConfig,
    pub fp_rate: FpRateConfig,
    pub demo: DemoConfig,
    pub bounds: BoundsConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 20_240_601,
            out: None,
            verify: VerifyConfig::default(),
            fp_rate: FpRateConfig::default(),
            demo: DemoConfig::default(),
            bounds: BoundsConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path).map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable in TOML")
    }

    /// SHA-256 of the canonical JSON form, with the output path cleared.
    pub fn hash(&self) -> String {
        let canonical = ExperimentConfig { out: None, ..self.clone() };
        let bytes = serde_json::to_vec(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    fn verify_params(&self) -> Result<UniverseParams, HarnessError> {
        let v = &self.verify;
        check_seed_bits(v.seed_bits)?;
        let params = universe(v.u, v.n)?;
        if v.alphas.iter().chain([&v.magic_alpha]).any(|a| a.0 <= Prob::from_integer(1)) {
            return invalid("every alpha must exceed 1");
        }
        for b in &v.claim8.beta {
            if b.0 > Prob::from_integer(1) {
                return invalid(format!("claim8 beta {b} exceeds 1"));
            }
        }
        Ok(params)
    }
}

fn universe(u: u32, n: u32) -> Result<UniverseParams, HarnessError> {
    let p = UniverseParams::new(u, n).map_err(|e| HarnessError::Config(e.to_string()))?;
    if n > u {
        return invalid(format!("n = {n} exceeds u = {u}"));
    }
    Ok(p)
}

fn check_seed_bits(bits: u8) -> Result<(), HarnessError> {
    if !(1..=MAX_EXHAUSTIVE_SEED_BITS).contains(&bits) {
        return invalid(format!("seed_bits = {bits} must be in 1..={MAX_EXHAUSTIVE_SEED_BITS} for exhaustive runs"));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Randomness
// ---------------------------------------------------------------------------

/// Independent generator for one purpose and one index, keyed by `SHA-256(purpose || seed)`.
fn purpose_rng(seed: u64, purpose: &str, index: u64) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(purpose.as_bytes());
    h.update(seed.to_le_bytes());
    let key: [u8; 32] = h.finalize().into();
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

const WORKLOAD: &str = "workload";
const FILTER_SEED: &str = "filter-seed";

fn sample_dataset(rng: &mut impl Rng, u: u32, n: u32) -> Dataset {
    rand::seq::index::sample(rng, u as usize, n as usize).into_iter().map(|x| x as Elem).collect()
}

fn sample_nonelement(rng: &mut impl Rng, u: u32, s: &Dataset) -> Elem {
    loop {
        let x = rng.gen_range(0..u);
        if !s.contains(x) {
            return x;
        }
    }
}

// ---------------------------------------------------------------------------
// Monte-Carlo false-positive experiment
// ---------------------------------------------------------------------------

/// Wilson score interval at 95% for `successes` out of `trials`.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// One CSV row of the false-positive experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FpCsvRow {
    pub u: u32,
    pub n: u32,
    pub eps_plus: f64,
    pub ell: u32,
    pub trials: u64,
    pub fp_rate: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FpReport {
    pub suite: String,
    pub config_hash: String,
    pub seed: u64,
    pub model: String,
    pub dataset_policy: SamplingPolicy,
    pub u: u32,
    pub n: u32,
    #[serde(with = "prob_str")]
    pub eps_plus: Prob,
    pub ell: u32,
    pub trials: u64,
    pub false_positives: u64,
    pub fp_rate: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
    /// `eps_plus + 3 sqrt(eps_plus (1 - eps_plus) / trials)`.
    pub fp_rate_limit: f64,
    pub completeness_queries: u64,
    pub completeness_hits: u64,
    #[serde(with = "prob_str")]
    pub completeness_rate: Prob,
    /// Wilson lower bound at most `eps_plus`, rate within the three-sigma limit,
    /// and every element query answered 1.
    pub passed: bool,
}

impl FpReport {
    pub fn csv_row(&self) -> FpCsvRow {
        FpCsvRow {
            u: self.u,
            n: self.n,
            eps_plus: self.eps_plus.to_f64().unwrap_or(f64::NAN),
            ell: self.ell,
            trials: self.trials,
            fp_rate: self.fp_rate,
            ci95_low: self.ci95_low,
            ci95_high: self.ci95_high,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.serialize(self.csv_row()).expect("in-memory CSV write");
        String::from_utf8(w.into_inner().expect("in-memory CSV flush")).expect("CSV is UTF-8")
    }
}

/// Estimates `Pr[query(x) = 1]` for `x` outside the dataset over fresh filter seeds.
///
/// For each trial the workload (dataset and query) is drawn first from a stream
/// keyed only by the config seed and the trial index; the filter seed comes from a
/// separate stream, so queries never depend on the filter's randomness.
pub fn run_fp_experiment(cfg: &ExperimentConfig) -> Result<FpReport, HarnessError> {
    let c = &cfg.fp_rate;
    if c.trials == 0 {
        return invalid("fp_rate.trials must be at least 1");
    }
    let params = universe(c.u, c.n)?;
    if c.n >= c.u {
        return invalid("fp_rate needs n < u so that nonelements exist");
    }
    let model = ModelSpec::fingerprint_multiset(c.eps_plus, c.fingerprint_bits).build(params)?;
    let ell = model.fingerprint_bits().expect("fingerprint model");
    let fixed = (c.dataset == SamplingPolicy::Fixed)
        .then(|| sample_dataset(&mut purpose_rng(cfg.seed, WORKLOAD, u64::MAX), c.u, c.n));

    let (false_positives, hits) = (0..c.trials)
        .into_par_iter()
        .map(|i| {
            let mut w = purpose_rng(cfg.seed, WORKLOAD, i);
            let s = fixed.clone().unwrap_or_else(|| sample_dataset(&mut w, c.u, c.n));
            let x = sample_nonelement(&mut w, c.u, &s);
            let r = Seed::wide(purpose_rng(cfg.seed, FILTER_SEED, i).gen());
            let state = state_after(&model, &r, &s, &Dataset::new());
            let bits = state.bits().expect("fingerprint multiset never fails on n insertions");
            let fp = u64::from(model.query(&r, bits, x).0);
            let hit = s.iter().filter(|&y| model.query(&r, bits, y).0).count() as u64;
            (fp, hit)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));

    let trials = c.trials;
    let fp_rate = false_positives as f64 / trials as f64;
    let (ci95_low, ci95_high) = wilson_interval(false_positives, trials);
    let eps = c.eps_plus.to_f64().unwrap_or(f64::NAN);
    let fp_rate_limit = eps + 3.0 * (eps * (1.0 - eps) / trials as f64).sqrt();
    let completeness_queries = trials * u64::from(c.n);
    let completeness_rate = fraction(hits, completeness_queries);
    let passed = ci95_low <= eps && fp_rate <= fp_rate_limit && hits == completeness_queries;
    Ok(FpReport {
        suite: "fp-rate".into(),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        model: model.label(),
        dataset_policy: c.dataset,
        u: c.u,
        n: c.n,
        eps_plus: c.eps_plus,
        ell,
        trials,
        false_positives,
        fp_rate,
        ci95_low,
        ci95_high,
        fp_rate_limit,
        completeness_queries,
        completeness_hits: hits,
        completeness_rate,
        passed,
    })
}

// ---------------------------------------------------------------------------
// Violation demonstrations
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    FalseNegative,
    FalsePositive,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DemoCase {
    pub model: String,
    pub name: String,
    pub sequence: Vec<String>,
    pub error: ErrorKind,
    pub query: Elem,
    pub violations: u64,
    pub seeds: u64,
    #[serde(with = "prob_str")]
    pub frequency: Prob,
    #[serde(with = "prob_str")]
    pub expected: Prob,
    pub as_expected: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DemoReport {
    pub suite: String,
    pub config_hash: String,
    pub seed_bits: u8,
    pub fingerprint_bits: u32,
    pub collision: serde_json::Value,
    pub cases: Vec<DemoCase>,
    pub passed: bool,
}

/// The two canonical sequences: a deletion of a colliding nonelement, and a
/// duplicate insertion followed by one deletion.
pub fn violation_sequences(
    params: UniverseParams,
    x: Elem,
    y: Elem,
) -> Result<[(String, OpSequence, ErrorKind, Elem); 2], HarnessError> {
    let seq = |ops: Vec<Op>| validate_sequence(ops, params).map_err(|e| HarnessError::Config(e.to_string()));
    Ok([
        (
            "delete_nonelement_with_collision".into(),
            seq(vec![Op::Init, Op::Ins(y), Op::Del(x), Op::Query(y)])?,
            ErrorKind::FalseNegative,
            y,
        ),
        (
            "duplicate_insert_then_delete".into(),
            seq(vec![Op::Init, Op::Ins(x), Op::Ins(x), Op::Del(x), Op::Query(x)])?,
            ErrorKind::FalsePositive,
            x,
        ),
    ])
}

fn demo_case<F: DynamicFilter>(
    f: &F,
    name: &str,
    seq: &OpSequence,
    error: ErrorKind,
    query: Elem,
    seeds: &[Seed],
    expected: Prob,
) -> DemoCase {
    let violations = seeds
        .par_iter()
        .filter(|r| {
            let answer = run(f, r, seq).last().and_then(|s| s.answer).expect("sequence ends with a query");
            match error {
                ErrorKind::FalseNegative => !answer,
                ErrorKind::FalsePositive => answer,
            }
        })
        .count() as u64;
    let frequency = fraction(violations, seeds.len() as u64);
    DemoCase {
        model: f.label(),
        name: name.to_string(),
        sequence: seq.ops().iter().map(ToString::to_string).collect(),
        error,
        query,
        violations,
        seeds: seeds.len() as u64,
        frequency,
        expected,
        as_expected: frequency == expected,
    }
}

/// Runs both sequences on the fingerprint multiset with `FP(x) = FP(y)` forced,
/// and on the exact set, over every seed of the configured space.
pub fn run_violation_demo(cfg: &ExperimentConfig) -> Result<DemoReport, HarnessError> {
    let d = &cfg.demo;
    check_seed_bits(d.seed_bits)?;
    let params = universe(d.u, d.n)?;
    if d.x == d.y || d.x >= d.u || d.y >= d.u {
        return invalid("demo.x and demo.y must be distinct elements of the universe");
    }
    let mut fm_spec = ModelSpec::fingerprint_multiset(d.eps_plus, None);
    fm_spec.collisions = vec![(d.x, d.fingerprint), (d.y, d.fingerprint)];
    let fm = fm_spec.build(params)?;
    let exact = ModelSpec::exact_set().build(params)?;
    let seeds = SeedSpace::new(d.seed_bits).seeds();

    let mut cases = Vec::new();
    for (name, seq, error, query) in violation_sequences(params, d.x, d.y)? {
        cases.push(demo_case(&fm, &name, &seq, error, query, &seeds, Prob::from_integer(1)));
        cases.push(demo_case(&exact, &name, &seq, error, query, &seeds, Prob::zero()));
    }
    Ok(DemoReport {
        suite: "demo-violations".into(),
        config_hash: cfg.hash(),
        seed_bits: d.seed_bits,
        fingerprint_bits: fm.fingerprint_bits().expect("fingerprint model"),
        collision: json!({ "x": d.x, "y": d.y, "fingerprint": d.fingerprint }),
        passed: cases.iter().all(|c| c.as_expected),
        cases,
    })
}

// ---------------------------------------------------------------------------
// Verification suite
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    pub passed: bool,
    pub detail: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub suite: String,
    pub config_hash: String,
    pub seed: u64,
    pub instance: serde_json::Value,
    pub warnings: Vec<String>,
    pub checks: Vec<CheckResult>,
    pub failed: usize,
    pub passed: bool,
}

impl VerificationReport {
    fn new(
        suite: &str,
        cfg: &ExperimentConfig,
        instance: serde_json::Value,
        warnings: Vec<String>,
        checks: Vec<CheckResult>,
    ) -> Self {
        let failed = checks.iter().filter(|c| !c.passed).count();
        VerificationReport {
            suite: suite.into(),
            config_hash: cfg.hash(),
            seed: cfg.seed,
            instance,
            warnings,
            checks,
            failed,
            passed: failed == 0,
        }
    }

    /// 0 when every check passed, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        i32::from(!self.passed)
    }
}

fn to_json<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn check(name: &str, model: Option<&str>, passed: bool, detail: serde_json::Value) -> CheckResult {
    CheckResult { name: name.into(), model: model.map(str::to_string), passed, detail }
}

/// Per-model results, grouped by phase so the report lists phases in order.
#[derive(Default)]
struct Phases {
    sticky: Vec<CheckResult>,
    reduction: Vec<CheckResult>,
    encoding: Vec<CheckResult>,
    thm7: Vec<CheckResult>,
}

fn verify_model(f: &ModelVariant, cfg: &VerifyConfig, seeds: &[Seed]) -> Result<Phases, HarnessError> {
    let label = f.label();
    let model = Some(label.as_str());
    let mut out = Phases::default();

    let sticky = sticky_sweep(f, seeds)?;
    out.sticky.push(check("sticky", model, sticky.violation_count == 0, to_json(&sticky)));

    let red: ReductionReport = check_reduction(f, seeds)?;
    out.reduction.push(check("reduction", model, red.holds, to_json(&red)));

    let sigma = Sigma::new(f.clone());
    let measured = |alpha: &BigRational| BoundsParams {
        eps_plus: prob_to_big(f.eps_plus()),
        eps_minus: prob_to_big(red.max_false_negative_rate),
        p_fail: prob_to_big(red.fail_fraction),
        ..BoundsParams::new(cfg.u, cfg.n, alpha.clone())
    };

    let p = measured(&cfg.magic_alpha.to_big());
    let magic = find_magic_r(&sigma, &p, seeds)?;
    out.encoding.push(check("magic_seed", model, magic.meets_bound, json!({ "params": p, "result": magic })));
    let markov = markov_check(&sigma, &p, seeds)?;
    out.encoding.push(check("markov", model, markov.holds, to_json(&markov)));
    match check_pi(&sigma, &magic.r_star, &p) {
        Ok(pi) => out.encoding.push(check("pi_injectivity", model, pi.holds, to_json(&pi))),
        Err(e @ (BoundsError::FalsePositives(_) | BoundsError::NotGoodPair(_) | BoundsError::InvalidCode)) => {
            out.encoding.push(check("pi_injectivity", model, false, json!({ "error": e.to_string() })))
        }
        Err(e) => return Err(e.into()),
    }

    for alpha in &cfg.alphas {
        let p = measured(&alpha.to_big());
        let r = thm7_check(red.space_pair_bits, &p);
        let mut c = BoundCheck::thm7(&label, &p, &r);
        c.name = format!("thm7:alpha={alpha}");
        out.thm7.push(check(&c.name.clone(), model, r.holds, to_json(&c)));
    }
    Ok(out)
}

/// Runs, in order: the sticky sweep, the reduction check, magic seed / Markov /
/// encoding checks, the space-bound certification at every configured alpha (plus
/// the synthetic negative case, which must be reported as violated), and the
/// binomial-estimate grid.
///
/// Every configured model is checked under the witness transform and/or as is,
/// per `verify.witness` / `verify.base`. An empty model list runs nothing.
pub fn run_verification_suite(cfg: &ExperimentConfig) -> Result<VerificationReport, HarnessError> {
    let v = &cfg.verify;
    let params = cfg.verify_params()?;
    let instance = json!({ "u": v.u, "n": v.n, "seed_bits": v.seed_bits });
    let mut warnings = Vec::new();
    if v.models.is_empty() {
        warnings.push("model list is empty; no checks were run".to_string());
        return Ok(VerificationReport::new("verify", cfg, instance, warnings, Vec::new()));
    }
    check_enumeration_budget(params)?;
    if !v.witness && !v.base {
        return invalid("verify.witness and verify.base are both false");
    }

    let seeds = SeedSpace::new(v.seed_bits).seeds();
    let mut variants = Vec::new();
    for spec in &v.models {
        if v.witness {
            variants.push(ModelVariant::new(spec, params, true)?);
        }
        if v.base {
            variants.push(ModelVariant::new(spec, params, false)?);
        }
    }
    let phases = variants.iter().map(|f| verify_model(f, v, &seeds)).collect::<Result<Vec<_>, _>>()?;

    let mut checks = Vec::new();
    checks.extend(phases.iter().flat_map(|p| p.sticky.iter().cloned()));
    checks.extend(phases.iter().flat_map(|p| p.reduction.iter().cloned()));
    checks.extend(phases.iter().flat_map(|p| p.encoding.iter().cloned()));
    checks.extend(phases.iter().flat_map(|p| p.thm7.iter().cloned()));
    checks.push(thm7_case_check(&synthetic_negative_case()));
    checks.extend(claim8_checks(&v.claim8)?);
    Ok(VerificationReport::new("verify", cfg, instance, warnings, checks))
}

fn thm7_case_check(case: &Thm7Case) -> CheckResult {
    let p = case.params();
    let r = thm7_check(case.fspace_bits, &p);
    let mut detail = to_json(&BoundCheck::thm7(&case.label, &p, &r));
    detail["expect_holds"] = json!(case.expect_holds);
    check(&format!("thm7:{}", case.label), None, r.holds == case.expect_holds, detail)
}

fn claim8_checks(grid: &Claim8Grid) -> Result<Vec<CheckResult>, HarnessError> {
    let mut out = Vec::new();
    for &u in &grid.u {
        for &n in &grid.n {
            for beta in &grid.beta {
                let r = claim8_check(u, n, &beta.to_big())?;
                out.push(check(
                    &format!("claim8:u={u},n={n},beta={beta}"),
                    None,
                    r.holds,
                    to_json(&BoundCheck::claim8(&r)),
                ));
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsReport {
    pub suite: String,
    pub config_hash: String,
    pub checks: Vec<CheckResult>,
    pub space: Vec<SpaceBound>,
    pub failed: usize,
    pub passed: bool,
}

impl BoundsReport {
    pub fn exit_code(&self) -> i32 {
        i32::from(!self.passed)
    }
}

/// Evaluates the configured bound formulas without touching any filter model.
pub fn run_bounds(cfg: &ExperimentConfig) -> Result<BoundsReport, HarnessError> {
    let b = &cfg.bounds;
    let mut checks = Vec::new();
    for case in &b.thm7 {
        case.params().validate()?;
        checks.push(thm7_case_check(case));
    }
    checks.extend(claim8_checks(&b.claim8)?);
    let space =
        b.space.iter().map(|s| space_lower_bound(s.kind, s.u, s.n, &s.eps.to_big())).collect::<Result<Vec<_>, _>>()?;
    let failed = checks.iter().filter(|c| !c.passed).count();
    Ok(BoundsReport { suite: "bounds".into(), config_hash: cfg.hash(), checks, space, failed, passed: failed == 0 })
}

// ---------------------------------------------------------------------------
// Encoding round trip on explicit inputs
// ---------------------------------------------------------------------------

/// Everything needed to encode a dataset with the static filter built from a model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiSetup {
    pub model: ModelSpec,
    pub u: u32,
    pub n: u32,
    pub seed_bits: u8,
    pub witness: bool,
    pub alpha: Fraction,
    /// False-negative rate used for the FN-set threshold; measured exhaustively when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_minus: Option<Fraction>,
    /// The seed `r*`; the magic seed is searched for when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// A self-contained code: the setup with resolved `eps_minus` and `seed`, plus `pi(S)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiEnvelope {
    pub setup: PiSetup,
    pub code: PiCode<SigmaState>,
}

struct ResolvedPi {
    sigma: Sigma<ModelVariant>,
    params: BoundsParams,
    r_star: Seed,
    setup: PiSetup,
}

fn resolve_pi(setup: &PiSetup) -> Result<ResolvedPi, HarnessError> {
    check_seed_bits(setup.seed_bits)?;
    let up = universe(setup.u, setup.n)?;
    check_enumeration_budget(up)?;
    let f = ModelVariant::new(&setup.model, up, setup.witness)?;
    let seeds = SeedSpace::new(setup.seed_bits).seeds();
    let eps_minus = match setup.eps_minus {
        Some(e) => e,
        None => Fraction(check_reduction(&f, &seeds)?.max_false_negative_rate),
    };
    let params = BoundsParams {
        eps_plus: prob_to_big(f.eps_plus()),
        eps_minus: eps_minus.to_big(),
        ..BoundsParams::new(setup.u, setup.n, setup.alpha.to_big())
    };
    params.validate()?;
    let sigma = Sigma::new(f);
    let r_star = match setup.seed {
        Some(value) => {
            if setup.seed_bits < 64 && value >> setup.seed_bits != 0 {
                return invalid(format!("seed {value} does not fit in {} bits", setup.seed_bits));
            }
            Seed::new(value, setup.seed_bits)
        }
        None => find_magic_r(&sigma, &params, &seeds)?.r_star,
    };
    let setup = PiSetup { eps_minus: Some(eps_minus), seed: Some(r_star.value), ..setup.clone() };
    Ok(ResolvedPi { sigma, params, r_star, setup })
}

pub fn encode_dataset(setup: &PiSetup, s: &Dataset) -> Result<PiEnvelope, HarnessError> {
    let rp = resolve_pi(setup)?;
    if s.iter().any(|x| x >= setup.u) || s.len() != setup.n as usize {
        return invalid(format!("dataset {s} must have exactly n = {} elements of [{}]", setup.n, setup.u));
    }
    let code = pi_encode(&rp.sigma, &rp.r_star, s, &rp.params)?;
    Ok(PiEnvelope { setup: rp.setup, code })
}

pub fn decode_envelope(env: &PiEnvelope) -> Result<Dataset, HarnessError> {
    if env.setup.eps_minus.is_none() || env.setup.seed.is_none() {
        return invalid("a code must carry its eps_minus and seed");
    }
    let rp = resolve_pi(&env.setup)?;
    Ok(pi_decode(&rp.sigma, &rp.r_star, &env.code, &rp.params)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigUint;

    fn quick(mut cfg: ExperimentConfig) -> ExperimentConfig {
        cfg.verify.seed_bits = 4;
        cfg.fp_rate.trials = 2_000;
        cfg
    }

    #[test]
    fn default_config_round_trips_through_toml() {
        let cfg = ExperimentConfig::default();
        let text = cfg.to_toml();
        let back = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn partial_config_fills_defaults() {
        let cfg = ExperimentConfig::from_toml("seed = 7\n[fp_rate]\ntrials = 10\n").unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.fp_rate.trials, 10);
        assert_eq!(cfg.fp_rate.n, 16);
        assert_eq!(cfg.verify, VerifyConfig::default());
        assert!(ExperimentConfig::from_toml("sede = 7").is_err());
    }

    #[test]
    fn models_parse_from_toml() {
        let text = r#"
[verify]
models = [
  { kind = "noisy_exact", eps_plus = "1/6", noise_m = 1 },
  { kind = "fingerprint_multiset", eps_plus = "1/2", fingerprint_bits = 1, collisions = [[1, 0], [2, 0]] },
]
"#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(cfg.verify.models[0], ModelSpec::noisy_exact(1, Prob::new(1, 6)));
        assert_eq!(cfg.verify.models[1].collisions, vec![(1, 0), (2, 0)]);
    }

    #[test]
    fn hash_ignores_output_path_only() {
        let a = ExperimentConfig::default();
        let b = ExperimentConfig { out: Some("report.json".into()), ..a.clone() };
        let c = ExperimentConfig { seed: a.seed + 1, ..a.clone() };
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn wilson_interval_brackets_rate() {
        let (lo, hi) = wilson_interval(125, 1000);
        assert!(lo < 0.125 && 0.125 < hi);
        assert!((lo - 0.1058).abs() < 1e-3 && (hi - 0.1472).abs() < 1e-3);
        assert_eq!(wilson_interval(0, 10).0, 0.0);
        assert!((wilson_interval(10, 10).1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn purpose_streams_are_independent_and_stable() {
        let a: u64 = purpose_rng(1, WORKLOAD, 0).gen();
        let b: u64 = purpose_rng(1, FILTER_SEED, 0).gen();
        let c: u64 = purpose_rng(1, WORKLOAD, 1).gen();
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, purpose_rng(1, WORKLOAD, 0).gen::<u64>());
    }

    #[test]
    fn fp_experiment_is_deterministic() {
        let cfg = quick(ExperimentConfig::default());
        let a = run_fp_experiment(&cfg).unwrap();
        let b = run_fp_experiment(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.ell, 7);
        assert_eq!(a.completeness_rate, Prob::from_integer(1));
        let csv = a.to_csv();
        assert!(csv.starts_with("u,n,eps_plus,ell,trials,fp_rate,ci95_low,ci95_high\n"));
        assert!(csv.contains("65536,16,0.125,7,2000,"));
    }

    #[test]
    fn fp_experiment_degenerate_eps() {
        let mut cfg = quick(ExperimentConfig::default());
        cfg.fp_rate.eps_plus = Prob::from_integer(1);
        let r = run_fp_experiment(&cfg).unwrap();
        assert_eq!(r.ell, 4);
        assert!(r.fp_rate <= 1.0);
        cfg.fp_rate.trials = 0;
        assert!(matches!(run_fp_experiment(&cfg), Err(HarnessError::Config(_))));
    }

    #[test]
    fn fixed_dataset_policy_runs() {
        let mut cfg = quick(ExperimentConfig::default());
        cfg.fp_rate.dataset = SamplingPolicy::Fixed;
        assert!(run_fp_experiment(&cfg).unwrap().passed);
    }

    #[test]
    fn violation_demo_frequencies() {
        let rep = run_violation_demo(&ExperimentConfig::default()).unwrap();
        assert!(rep.passed);
        assert_eq!(rep.cases.len(), 4);
        for c in &rep.cases {
            let expected = if c.model.starts_with("fingerprint") { Prob::from_integer(1) } else { Prob::zero() };
            assert_eq!(c.frequency, expected, "{c:?}");
        }
        assert_eq!(rep.cases[0].sequence, vec!["init", "ins 2", "del 1", "query 2"]);
    }

    #[test]
    fn verification_suite_passes_on_defaults() {
        let rep = run_verification_suite(&quick(ExperimentConfig::default())).unwrap();
        assert!(rep.passed, "{:#?}", rep.checks.iter().filter(|c| !c.passed).collect::<Vec<_>>());
        let names: Vec<&str> = rep.checks.iter().map(|c| c.name.as_str()).collect();
        let first = |n: &str| names.iter().position(|x| x.starts_with(n)).unwrap();
        assert!(first("sticky") < first("reduction"));
        assert!(first("reduction") < first("magic_seed"));
        assert!(first("pi_injectivity") < first("thm7"));
        assert!(first("thm7:synthetic_negative") < first("claim8"));
        assert_eq!(rep.exit_code(), 0);
    }

    #[test]
    fn verification_suite_fails_on_broken_model() {
        let mut cfg = quick(ExperimentConfig::default());
        cfg.verify.models = vec![ModelSpec::fingerprint_multiset(Prob::new(1, 2), Some(1))];
        let rep = run_verification_suite(&cfg).unwrap();
        assert!(!rep.passed);
        assert_eq!(rep.exit_code(), 1);
        assert!(rep.checks.iter().any(|c| c.name == "sticky" && !c.passed));
    }

    #[test]
    fn empty_model_list_runs_nothing() {
        let mut cfg = quick(ExperimentConfig::default());
        cfg.verify.models.clear();
        let rep = run_verification_suite(&cfg).unwrap();
        assert!(rep.checks.is_empty());
        assert_eq!(rep.warnings.len(), 1);
        assert_eq!(rep.exit_code(), 0);
    }

    #[test]
    fn oversized_instances_are_rejected() {
        let mut cfg = ExperimentConfig::default();
        cfg.verify.u = 200;
        cfg.verify.n = 10;
        assert!(matches!(run_verification_suite(&cfg), Err(HarnessError::Enumeration(_))));
        cfg.verify.u = 6;
        cfg.verify.n = 2;
        cfg.verify.seed_bits = 21;
        assert!(matches!(run_verification_suite(&cfg), Err(HarnessError::Config(_))));
    }

    #[test]
    fn bounds_defaults() {
        let rep = run_bounds(&ExperimentConfig::default()).unwrap();
        assert!(rep.passed);
        let neg = rep.checks.iter().find(|c| c.name == "thm7:synthetic_negative").unwrap();
        assert_eq!(neg.detail["holds"], false);
        assert_eq!(neg.detail["lhs"], "8");
        assert_eq!(rep.space.len(), 2);
    }

    #[test]
    fn encode_decode_round_trip() {
        let setup = PiSetup {
            model: ModelSpec::noisy_exact(1, Prob::new(1, 6)),
            u: 6,
            n: 2,
            seed_bits: 8,
            witness: false,
            alpha: Fraction::new(2, 1),
            eps_minus: None,
            seed: None,
        };
        let env = encode_dataset(&setup, &Dataset::from([1, 3])).unwrap();
        assert_eq!(env.setup.eps_minus, Some(Fraction::new(21, 128)));
        let text = serde_json::to_string(&env).unwrap();
        let back: PiEnvelope = serde_json::from_str(&text).unwrap();
        assert_eq!(decode_envelope(&back).unwrap(), Dataset::from([1, 3]));

        let bad = PiEnvelope { code: PiCode { index: BigUint::from(10_000u32), ..env.code.clone() }, ..env };
        assert!(matches!(decode_envelope(&bad), Err(HarnessError::Bounds(BoundsError::InvalidCode))));
    }
}

//! Completeness and soundness of the built-in models, checked over every
//! reachable (state, dataset) pair of short sequences and every seed.

use std::collections::HashSet;

use dynfilter::filters::{make_model, measure_space, step, ModelOptions};
use dynfilter::rational::Prob;
use dynfilter::sequence::enumerate_sequences;
use dynfilter::{Dataset, DynamicFilter, FilterModel, FilterState, ModelKind, Op, Seed, SeedSpace, UniverseParams};

fn model(kind: ModelKind, u: u32, n: u32, eps: Prob, opts: ModelOptions) -> FilterModel {
    make_model(kind, UniverseParams::new(u, n).unwrap(), eps, opts).unwrap()
}

/// Every (state, dataset) pair reachable from `init` in at most `depth` updates,
/// skipping deletions of nonelements when `allow_nonelement_deletes` is false.
fn reachable(
    f: &FilterModel,
    r: &Seed,
    depth: usize,
    allow_nonelement_deletes: bool,
) -> HashSet<(FilterState, Dataset)> {
    let p = f.params();
    let start = (step(f, r, &FilterState::Fail, Op::Init).state, Dataset::new());
    let mut seen = HashSet::from([start.clone()]);
    let mut frontier = vec![start];
    for _ in 0..depth {
        let mut next = Vec::new();
        for (state, set) in &frontier {
            for x in 0..p.u {
                let mut moves = Vec::new();
                if set.len() < p.n as usize || set.contains(x) {
                    let mut s = set.clone();
                    s.insert(x);
                    moves.push((Op::Ins(x), s));
                }
                if allow_nonelement_deletes || set.contains(x) {
                    let mut s = set.clone();
                    s.remove(x);
                    moves.push((Op::Del(x), s));
                }
                for (op, s) in moves {
                    let pair = (step(f, r, state, op).state, s);
                    if seen.insert(pair.clone()) {
                        next.push(pair);
                    }
                }
            }
        }
        frontier = next;
    }
    seen
}

fn assert_complete(f: &FilterModel, seeds: &[Seed], depth: usize, allow_nonelement_deletes: bool) {
    for r in seeds {
        for (state, set) in reachable(f, r, depth, allow_nonelement_deletes) {
            for x in set.iter() {
                let answer = step(f, r, &state, Op::Query(x)).answer;
                assert_eq!(answer, Some(true), "{}: false negative on {x} in {set} with seed {r:?}", f.label());
            }
        }
    }
}

#[test]
fn exact_and_noisy_models_are_complete_on_all_sequences() {
    let seeds = SeedSpace::new(8).seeds();
    assert_complete(&model(ModelKind::ExactSet, 8, 2, Prob::new(0, 1), ModelOptions::default()), &seeds, 4, true);
    let noisy = ModelOptions { noise_m: Some(1), ..Default::default() };
    assert_complete(&model(ModelKind::NoisyExact, 8, 2, Prob::new(1, 8), noisy), &seeds, 4, true);
}

#[test]
fn multiset_is_complete_without_nonelement_deletions() {
    let seeds = SeedSpace::new(8).seeds();
    let fm = model(ModelKind::FingerprintMultiset, 8, 2, Prob::new(1, 2), ModelOptions::default());
    assert_complete(&fm, &seeds, 4, false);
}

#[test]
fn multiset_loses_completeness_with_nonelement_deletions() {
    let fm = model(
        ModelKind::FingerprintMultiset,
        8,
        2,
        Prob::new(1, 2),
        ModelOptions { fingerprint_bits: Some(1), ..Default::default() },
    );
    let r = Seed::new(0, 8);
    let broken = reachable(&fm, &r, 3, true)
        .into_iter()
        .any(|(state, set)| set.iter().any(|x| step(&fm, &r, &state, Op::Query(x)).answer == Some(false)));
    assert!(broken);
}

#[test]
fn exact_set_yes_set_is_the_dataset() {
    let f = model(ModelKind::ExactSet, 8, 2, Prob::new(0, 1), ModelOptions::default());
    let r = Seed::new(3, 8);
    for (state, set) in reachable(&f, &r, 4, true) {
        assert_eq!(f.yes_set(&r, &state), set);
    }
}

#[test]
fn noisy_exact_soundness_is_exact_at_u16_m2() {
    // C(16, 2) = 120 noise sets over 2^10 seeds: 8 full rounds, 64 noise-free seeds.
    let opts = ModelOptions { noise_m: Some(2), ..Default::default() };
    let f = model(ModelKind::NoisyExact, 16, 3, Prob::new(1, 8), opts);
    let seeds = SeedSpace::new(10).seeds();
    let mut hits = [0u64; 16];
    for r in &seeds {
        let noise = f.noise_set(r);
        assert!(noise.is_empty() || noise.len() == 2);
        for x in noise.iter() {
            hits[x as usize] += 1;
        }
        let s = Dataset::from([0, 5, 9]);
        let state = dynfilter::filters::state_after(&f, r, &s, &Dataset::new());
        assert_eq!(f.yes_set(r, &state), s.union(&noise));
    }
    for (x, &h) in hits.iter().enumerate() {
        assert_eq!(h, 8 * 15, "element {x}");
        assert!(Prob::new(h, 1024) <= Prob::new(2, 16));
    }
}

#[test]
fn measured_space_never_exceeds_declared_space() {
    let params = UniverseParams::new(6, 2).unwrap();
    let seqs = enumerate_sequences(params, 4);
    let seeds = SeedSpace::new(4).seeds();
    let zoo = [
        model(ModelKind::ExactSet, 6, 2, Prob::new(0, 1), ModelOptions::default()),
        model(ModelKind::NoisyExact, 6, 2, Prob::new(1, 6), ModelOptions { noise_m: Some(1), ..Default::default() }),
        model(ModelKind::FingerprintMultiset, 6, 2, Prob::new(1, 4), ModelOptions::default()),
    ];
    for f in &zoo {
        let used = measure_space(f, &seqs, &seeds);
        assert!(used > 0 && used <= f.space_bits(), "{}: {used} > {}", f.label(), f.space_bits());
    }
}

//! Exhaustive and randomized checks of the two sequence rewriters.

use dynfilter::sequence::{
    classify_ops, dataset_trace, enumerate_sequences, rewrite_del_to_dup, rewrite_dup_to_del, validate_sequence,
    OpClass, PotentialMask, Rewrite,
};
use dynfilter::{Op, OpSequence, UniverseParams};
use proptest::prelude::*;

/// The rewritten sequence keeps every original op at `index_map[t]`, agrees with
/// the original dataset trace there, and only adds one op in front of rewritten ones.
fn assert_faithful(orig: &OpSequence, rw: &Rewrite) {
    let before = dataset_trace(orig);
    let after = dataset_trace(&rw.seq);
    assert_eq!(rw.index_map.len(), orig.len());
    for (t, &i) in rw.index_map.iter().enumerate() {
        assert_eq!(rw.seq.ops()[i], orig.ops()[t], "op moved: {orig}");
        assert_eq!(after.sets[i], before.sets[t], "trace differs at t={t}: {orig} -> {}", rw.seq);
    }
    assert!(rw.index_map.windows(2).all(|w| w[0] < w[1]));
    for i in 0..rw.seq.len() {
        if rw.index_map.contains(&i) {
            continue;
        }
        // An added op sits immediately before the original op it protects, on the same element.
        assert!(rw.index_map.contains(&(i + 1)), "stray op at {i}: {}", rw.seq);
        assert_eq!(rw.seq.ops()[i].arg(), rw.seq.ops()[i + 1].arg());
    }
}

fn exhaustive(u: u32, n: u32, max_len: usize) -> usize {
    let params = UniverseParams::new(u, n).unwrap();
    let seqs = enumerate_sequences(params, max_len);
    for seq in &seqs {
        let dup = rewrite_dup_to_del(seq, &PotentialMask::All);
        assert!(!classify_ops(&dup.seq).contains(&OpClass::DuplicateInsertion), "{seq} -> {}", dup.seq);
        assert_eq!(dup.seq.params().n, n);
        assert_faithful(seq, &dup);

        let del = rewrite_del_to_dup(seq, &PotentialMask::All);
        assert!(!classify_ops(&del.seq).contains(&OpClass::DeletionOfNonelement), "{seq} -> {}", del.seq);
        assert_eq!(del.seq.params().n, n + 1);
        assert_faithful(seq, &del);
    }
    seqs.len()
}

#[test]
fn exhaustive_u4_n2_up_to_length_5() {
    assert_eq!(exhaustive(4, 2, 5), count_valid(4, 2, 5));
    assert_eq!(count_valid(4, 2, 5), 21733);
}

/// Number of valid sequences, counted by dataset size alone: from a set of `k`
/// elements there are `u - k` fresh insertions (if `k < n`), `k` duplicate
/// insertions, `k` real deletions, `u - k` deletions of nonelements and `u` queries.
fn count_valid(u: u64, n: u64, max_len: usize) -> usize {
    let mut by_size = vec![0u64; n as usize + 1];
    by_size[0] = 1;
    let mut total = 1;
    for _ in 1..max_len {
        let mut next = vec![0u64; n as usize + 1];
        for (k, &c) in by_size.iter().enumerate() {
            let k64 = k as u64;
            if k64 < n {
                next[k + 1] += c * (u - k64);
            }
            if k > 0 {
                next[k - 1] += c * k64;
            }
            next[k] += c * (k64 + (u - k64) + u);
        }
        by_size = next;
        total += by_size.iter().sum::<u64>();
    }
    total as usize
}

#[test]
fn exhaustive_u8_n2_up_to_length_4() {
    assert_eq!(exhaustive(8, 2, 4), count_valid(8, 2, 4));
}

#[test]
fn only_flagged_ops_are_rewritten() {
    let params = UniverseParams::new(4, 2).unwrap();
    let seq = validate_sequence(vec![Op::Init, Op::Ins(1), Op::Ins(1), Op::Del(2), Op::Del(1)], params).unwrap();
    let rw = rewrite_dup_to_del(&seq, &PotentialMask::Flags(vec![false, false, true]));
    assert_eq!(rw.seq.ops(), &[Op::Init, Op::Ins(1), Op::Del(1), Op::Ins(1), Op::Del(2), Op::Del(1)]);
    let rw = rewrite_del_to_dup(&seq, &PotentialMask::Flags(vec![false, false, false, true]));
    assert_eq!(rw.seq.ops(), &[Op::Init, Op::Ins(1), Op::Ins(1), Op::Ins(2), Op::Del(2), Op::Del(1)]);
    assert_eq!(rw.index_map, vec![0, 1, 2, 4, 5]);
}

fn arb_sequence(u: u32, n: u32, max_len: usize) -> impl Strategy<Value = OpSequence> {
    let op = (0..3u8, 0..u).prop_map(|(k, x)| match k {
        0 => Op::Ins(x),
        1 => Op::Del(x),
        _ => Op::Query(x),
    });
    proptest::collection::vec(op, 0..max_len).prop_map(move |body| {
        // Drop insertions that would exceed n, keeping the sequence valid.
        let params = UniverseParams::new(u, n).unwrap();
        let mut ops = vec![Op::Init];
        for op in body {
            ops.push(op);
            if validate_sequence(ops.clone(), params).is_err() {
                ops.pop();
            }
        }
        validate_sequence(ops, params).unwrap()
    })
}

proptest! {
    #[test]
    fn rewriters_are_faithful_on_random_sequences(
        seq in arb_sequence(40, 5, 60),
        flags in proptest::collection::vec(any::<bool>(), 60),
    ) {
        let mask = PotentialMask::Flags(flags.clone());
        let dup = rewrite_dup_to_del(&seq, &mask);
        assert_faithful(&seq, &dup);
        let del = rewrite_del_to_dup(&seq, &mask);
        assert_faithful(&seq, &del);

        // With every op flagged the targeted class disappears entirely.
        prop_assert!(!classify_ops(&rewrite_dup_to_del(&seq, &PotentialMask::All).seq).contains(&OpClass::DuplicateInsertion));
        prop_assert!(!classify_ops(&rewrite_del_to_dup(&seq, &PotentialMask::All).seq).contains(&OpClass::DeletionOfNonelement));

        // The trace never grows past n + 1 after the del-to-dup rewrite.
        prop_assert!(dataset_trace(&del.seq).max_cardinality() <= 6);
    }
}

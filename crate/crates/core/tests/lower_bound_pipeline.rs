//! End-to-end: dynamic model -> static filter sigma(F) -> exact error rates ->
//! space-bound certification and the FN-set encoding.

use dynfilter::bounds::{check_pi, find_magic_r, markov_check, pi_decode, pi_encode, thm7_check, BoundsParams};
use dynfilter::combinatorics::combinations;
use dynfilter::filters::{make_model, ModelOptions};
use dynfilter::rational::{parse_big, prob_to_big, Prob};
use dynfilter::reduction::{check_reduction, Sigma};
use dynfilter::witness::{sticky_sweep, witness_transform};
use dynfilter::{DynamicFilter, FilterModel, ModelKind, Seed, SeedSpace, UniverseParams};
use num_rational::BigRational;
use proptest::prelude::*;

fn zoo(u: u32) -> Vec<FilterModel> {
    let p = UniverseParams::new(u, 2).unwrap();
    vec![
        make_model(ModelKind::ExactSet, p, Prob::new(0, 1), ModelOptions::default()).unwrap(),
        make_model(
            ModelKind::NoisyExact,
            p,
            Prob::new(1, u64::from(u)),
            ModelOptions { noise_m: Some(1), ..Default::default() },
        )
        .unwrap(),
    ]
}

fn certify<F: DynamicFilter + Clone>(f: &F, seeds: &[Seed]) {
    let sticky = sticky_sweep(f, seeds).unwrap();
    assert_eq!(sticky.violation_count, 0, "{}", f.label());
    let red = check_reduction(f, seeds).unwrap();
    assert!(red.holds, "{}: {red:?}", f.label());
    assert!(red.false_negatives_match_b2);
    let p = f.params();
    for alpha in ["3/2", "2", "4"] {
        let params = BoundsParams {
            eps_minus: prob_to_big(red.max_false_negative_rate),
            p_fail: prob_to_big(red.fail_fraction),
            ..BoundsParams::new(p.u, p.n, parse_big(alpha).unwrap())
        };
        assert!(thm7_check(red.space_pair_bits, &params).holds, "{} alpha={alpha}", f.label());
        let sigma = Sigma::new(f.clone());
        let magic = find_magic_r(&sigma, &params, seeds).unwrap();
        assert!(magic.meets_bound, "{} alpha={alpha}: {magic:?}", f.label());
        assert!(markov_check(&sigma, &params, seeds).unwrap().holds);
        assert!(check_pi(&sigma, &magic.r_star, &params).unwrap().holds);
    }
}

#[test]
fn zoo_is_certified_for_u_up_to_8() {
    let seeds = SeedSpace::new(6).seeds();
    for u in [4, 6, 8] {
        for m in zoo(u) {
            certify(&witness_transform(m.clone()).unwrap(), &seeds);
            certify(&m, &seeds);
        }
    }
}

#[test]
fn witness_sigma_of_noisy_model_has_no_errors() {
    // The witness transform only answers 1 on elements of full witnesses, so the
    // noise never shows up and sigma(F) decodes every dataset at threshold zero.
    let m = witness_transform(zoo(6).remove(1)).unwrap();
    let red = check_reduction(&m, &SeedSpace::new(8).seeds()).unwrap();
    assert_eq!(red.max_false_negative_rate, Prob::new(0, 1));
}

#[test]
fn good_count_meets_bound_at_alpha_2() {
    // (1 - 1/2 - 0) * C(6, 2) = 15/2, so at least 8 good datasets.
    let m = zoo(6).remove(1);
    let seeds = SeedSpace::new(8).seeds();
    let red = check_reduction(&m, &seeds).unwrap();
    let params = BoundsParams {
        eps_minus: prob_to_big(red.max_false_negative_rate),
        ..BoundsParams::new(6, 2, parse_big("2").unwrap())
    };
    let magic = find_magic_r(&Sigma::new(m), &params, &seeds).unwrap();
    assert!(BigRational::from_integer(magic.good_count.clone().into()) >= parse_big("15/2").unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn encoding_round_trips_for_any_seed(value in 0u64..256, eps_minus in 0u64..=2, u in 5u32..9) {
        let m = make_model(
            ModelKind::NoisyExact,
            UniverseParams::new(u, 2).unwrap(),
            Prob::new(2, u64::from(u)),
            ModelOptions { noise_m: Some(2), ..Default::default() },
        )
        .unwrap();
        let sigma = Sigma::new(m);
        let r = Seed::new(value, 8);
        // Threshold floor(2 * 2 * eps_minus / 2) = eps_minus.
        let params = BoundsParams {
            eps_minus: BigRational::new(eps_minus.into(), 2u32.into()),
            ..BoundsParams::new(u, 2, parse_big("2").unwrap())
        };
        for s in combinations(u, 2) {
            match pi_encode(&sigma, &r, &s, &params) {
                Ok(code) => prop_assert_eq!(pi_decode(&sigma, &r, &code, &params).unwrap(), s),
                Err(_) => prop_assert!(dynfilter::bounds::fn_set(&sigma, &r, &s).unwrap().len() as u64 > eps_minus),
            }
        }
    }
}

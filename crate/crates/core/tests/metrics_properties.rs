mod common;

use botnet_ids::metrics::confusion;
use common::props;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn worked_examples() {
    props::worked_examples().unwrap()
}

#[test]
fn confusion_counts_match_tally() {
    let mut r = ChaCha8Rng::seed_from_u64(3);
    let t: Vec<usize> = (0..10_000).map(|_| r.gen_range(0..10)).collect();
    let p: Vec<usize> = (0..10_000).map(|_| r.gen_range(0..10)).collect();
    let cm = confusion(&t, &p, 10).unwrap();
    let mut tally = std::collections::HashMap::new();
    for pair in t.iter().zip(&p) {
        *tally.entry(pair).or_insert(0u64) += 1;
    }
    for i in 0..10 {
        for j in 0..10 {
            assert_eq!(cm.get(i, j), tally.get(&(&i, &j)).copied().unwrap_or(0));
        }
    }
}

#[test]
fn kappa_is_one_iff_diagonal() {
    props::kappa_one_iff_diagonal().unwrap()
}

#[test]
fn binary_mcc_flips_sign_under_inversion() {
    props::mcc_sign_flip().unwrap()
}

#[test]
fn auc_is_invariant_under_increasing_transforms() {
    props::auc_transform_invariance().unwrap()
}

#[test]
fn relabelling_permutes_class_scores() {
    props::permutation_invariance().unwrap()
}

#[test]
fn report_averages_agree() {
    props::report_consistency().unwrap()
}

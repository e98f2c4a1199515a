//! Metric formulas against hand computations, and randomized invariants run
//! through a deterministic property runner.

use botnet_ids::metrics::*;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const TRIALS: u32 = 1000;

fn ulps_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= 4.0 * f64::EPSILON * a.abs().max(b.abs())
}

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

/// Row = truth, column = prediction, class 0 positive.
pub fn binary(tp: u64, fp: u64, fn_: u64, tn: u64) -> ConfusionMatrix {
    ConfusionMatrix::from_counts(2, vec![tp, fn_, fp, tn]).unwrap()
}

/// The hand-worked values for Eqs. 7-10, kappa, MCC and AUC.
pub fn worked_examples() -> Result<(), String> {
    let m = eq_metrics(&binary(50, 10, 5, 35), 0).map_err(|e| e.to_string())?;
    let (p, r) = (5.0 / 6.0, 10.0 / 11.0);
    ensure!(ulps_eq(m.precision, p), "precision {}", m.precision);
    ensure!(ulps_eq(m.recall, r), "recall {}", m.recall);
    ensure!(ulps_eq(m.f1, 2.0 * p * r / (p + r)) && ulps_eq(m.f1, 20.0 / 23.0), "f1 {}", m.f1);
    ensure!(ulps_eq(m.accuracy, 0.85), "accuracy {}", m.accuracy);
    ensure!(format!("{:.4} {:.4} {:.4}", m.precision, m.recall, m.f1) == "0.8333 0.9091 0.8696", "rounding");

    let cm = ConfusionMatrix::from_counts(2, vec![45, 5, 10, 40]).unwrap();
    let p_e = (50.0 * 55.0 + 50.0 * 45.0) / 10_000.0;
    let kappa = cohen_kappa(&cm).unwrap();
    ensure!(p_e == 0.5 && ulps_eq(kappa, (0.85 - p_e) / (1.0 - p_e)) && ulps_eq(kappa, 0.7), "kappa {kappa}");
    let chance = ConfusionMatrix::from_counts(2, vec![25, 25, 25, 25]).unwrap();
    ensure!(cohen_kappa(&chance).unwrap() == 0.0, "chance kappa");

    let want = (90.0 * 80.0 - 20.0 * 10.0) / (110.0f64 * 100.0 * 100.0 * 90.0).sqrt();
    let b = binary(90, 20, 10, 80);
    let got = mcc(&b).unwrap();
    ensure!(ulps_eq(got, want) && ulps_eq(mcc_binary(b.binary_counts(0).unwrap()), want), "mcc {got}");
    ensure!(format!("{want:.4}") == "0.7035", "mcc rounding");
    ensure!(mcc(&binary(30, 0, 0, 70)).unwrap() == 1.0, "perfect mcc");
    ensure!(mcc(&binary(0, 70, 30, 0)).unwrap() == -1.0, "inverted mcc");

    let sep = roc_curve(&[0.9, 0.8, 0.3, 0.1], &[true, true, false, false]).unwrap();
    ensure!(sep.auc == 1.0 && sep.fpr.iter().zip(&sep.tpr).any(|p| p == (&0.0, &1.0)), "separating curve");
    let flat = roc_curve(&[0.5; 6], &[true, false, true, false, false, true]).unwrap();
    ensure!(flat.auc == 0.5 && flat.fpr.len() == 2, "tied curve {:?}", flat.fpr);

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let scores: Vec<f64> = (0..10_000).map(|_| rng.gen()).collect();
    let truths: Vec<bool> = (0..10_000).map(|_| rng.gen()).collect();
    let a = roc_curve(&scores, &truths).unwrap().auc;
    ensure!((0.48..=0.52).contains(&a), "random auc {a}");
    Ok(())
}

/// Probability that a random positive outscores a random negative, ties
/// counted as one half.
pub fn mann_whitney(scores: &[f64], truths: &[bool]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (s, &t) in scores.iter().zip(truths) {
        for (u, &v) in scores.iter().zip(truths) {
            if t && !v {
                pairs += 1.0;
                wins += if s > u { 1.0 } else if s == u { 0.5 } else { 0.0 };
            }
        }
    }
    wins / pairs
}

fn runner() -> TestRunner {
    let config = Config { cases: TRIALS, failure_persistence: None, ..Config::default() };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn run<S: Strategy>(strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String>
where
    S::Value: std::fmt::Debug,
{
    runner().run(&strategy, test).map_err(|e| e.to_string())
}

fn matrix(c: usize) -> impl Strategy<Value = ConfusionMatrix> {
    prop_oneof![
        prop::collection::vec(0u64..40, c * c),
        prop::collection::vec(0u64..40, c).prop_map(move |d| {
            let mut v = vec![0; c * c];
            (0..c).for_each(|i| v[i * c + i] = d[i]);
            v
        }),
    ]
    .prop_filter("non-empty", |v| v.iter().sum::<u64>() > 0)
    .prop_map(move |v| ConfusionMatrix::from_counts(c, v).unwrap())
}

fn matrices() -> impl Strategy<Value = ConfusionMatrix> {
    (2usize..6).prop_flat_map(matrix)
}

pub fn kappa_one_iff_diagonal() -> Result<(), String> {
    run(matrices(), |cm| {
        let k = cohen_kappa(&cm).unwrap();
        prop_assert_eq!(k == 1.0, cm.is_diagonal(), "kappa {} for {:?}", k, cm.counts());
        prop_assert!((-1.0..=1.0).contains(&k));
        Ok(())
    })
}

pub fn mcc_sign_flip() -> Result<(), String> {
    run((0u64..50, 0u64..50, 0u64..50, 0u64..50), |(tp, fp, fn_, tn)| {
        prop_assume!(tp + fp + fn_ + tn > 0);
        let m = mcc(&binary(tp, fp, fn_, tn)).unwrap();
        // every prediction flipped: TP<->FN, FP<->TN
        let inverted = mcc(&binary(fn_, tn, tp, fp)).unwrap();
        prop_assert!((m + inverted).abs() < 1e-12, "{} vs {}", m, inverted);
        // positive and negative swapped in both truth and prediction
        let swapped = mcc(&binary(tn, fn_, fp, tp)).unwrap();
        prop_assert!((m - swapped).abs() < 1e-12);
        Ok(())
    })
}

/// Integer-valued scores so that ties survive every transform.
fn scored() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    (2usize..60)
        .prop_flat_map(|n| (prop::collection::vec(0i32..30, n), prop::collection::vec(any::<bool>(), n)))
        .prop_filter("both classes", |(_, t)| t.iter().any(|&b| b) && t.iter().any(|&b| !b))
        .prop_map(|(s, t)| (s.into_iter().map(f64::from).collect(), t))
}

pub fn auc_transform_invariance() -> Result<(), String> {
    let transforms: [fn(f64) -> f64; 4] =
        [|v| 3.0 * v - 7.0, |v| (v / 4.0).exp(), |v| v.powi(3), |v| 1.0 / (1.0 + (-v).exp())];
    run(scored(), |(scores, truths)| {
        let a = roc_curve(&scores, &truths).unwrap().auc;
        prop_assert!((a - mann_whitney(&scores, &truths)).abs() < 1e-12);
        for f in transforms {
            let t: Vec<f64> = scores.iter().map(|&v| f(v)).collect();
            prop_assert!((roc_curve(&t, &truths).unwrap().auc - a).abs() < 1e-12);
        }
        Ok(())
    })
}

pub fn permutation_invariance() -> Result<(), String> {
    run((matrices(), any::<u64>()), |(cm, seed)| {
        use rand::seq::SliceRandom;
        let c = cm.n_classes();
        let mut perm: Vec<usize> = (0..c).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let p = cm.permuted(&perm).unwrap();
        prop_assert!((cohen_kappa(&cm).unwrap() - cohen_kappa(&p).unwrap()).abs() < 1e-12);
        prop_assert!((mcc(&cm).unwrap() - mcc(&p).unwrap()).abs() < 1e-12);
        for i in 0..c {
            prop_assert_eq!(eq_metrics(&cm, i).unwrap(), eq_metrics(&p, perm[i]).unwrap());
        }
        Ok(())
    })
}

pub fn report_consistency() -> Result<(), String> {
    run(matrices(), |cm| {
        let report = classification_report(&cm).unwrap();
        let n = cm.total() as f64;
        let c = cm.n_classes() as f64;
        let (mut macro_f1, mut weighted_f1) = (0.0, 0.0);
        for (i, row) in report.classes.iter().enumerate() {
            let m = eq_metrics(&cm, i).unwrap();
            if m.precision + m.recall > 0.0 {
                prop_assert!((m.f1 - 2.0 * m.precision * m.recall / (m.precision + m.recall)).abs() < 1e-12);
            } else {
                prop_assert_eq!(m.f1, 0.0);
            }
            prop_assert_eq!(row.support, cm.row_sum(i));
            macro_f1 += row.f1 / c;
            weighted_f1 += row.f1 * row.support as f64 / n;
        }
        prop_assert!((report.macro_avg.f1 - macro_f1).abs() < 1e-12);
        prop_assert!((report.weighted_avg.f1 - weighted_f1).abs() < 1e-12);
        prop_assert!((report.accuracy - cm.trace() as f64 / n).abs() < 1e-15);
        // pure: same matrix, same report
        prop_assert_eq!(report, classification_report(&cm).unwrap());
        Ok(())
    })
}

pub type Property = fn() -> Result<(), String>;

pub const PROPERTIES: [(&str, Property); 5] = [
    ("kappa = 1 iff diagonal", kappa_one_iff_diagonal),
    ("MCC sign flip under inversion", mcc_sign_flip),
    ("AUC invariant under increasing transforms", auc_transform_invariance),
    ("relabelling permutes class scores", permutation_invariance),
    ("f1 and report averages", report_consistency),
];

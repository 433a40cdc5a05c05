use latefuse::eval::{
    micro_f1, pair_counts, per_class_counts, threshold_predictions, top_misclassified, ClassCounts,
};
use latefuse::fusion::PredictionMatrix;
use latefuse::MultiHot;
use proptest::prelude::*;

fn rows(n: usize, l: usize) -> impl Strategy<Value = Vec<MultiHot>> {
    prop::collection::vec(prop::collection::vec(any::<bool>(), l).prop_map(MultiHot::from), n)
}

fn pair() -> impl Strategy<Value = (Vec<MultiHot>, Vec<MultiHot>)> {
    (1usize..30, 1usize..12).prop_flat_map(|(n, l)| (rows(n, l), rows(n, l)))
}

/// Pair counting over explicit (row, class) indices.
fn oracle(pred: &[MultiHot], truth: &[MultiHot]) -> f64 {
    let (mut tp, mut fp, mut fn_) = (0u32, 0u32, 0u32);
    for i in 0..pred.len() {
        for c in 0..pred[i].len() {
            match (pred[i].get(c), truth[i].get(c)) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                _ => {}
            }
        }
    }
    if tp + fp + fn_ == 0 {
        1.0
    } else {
        f64::from(2 * tp) / f64::from(2 * tp + fp + fn_)
    }
}

proptest! {
    #[test]
    fn micro_f1_matches_pair_counting((pred, truth) in pair()) {
        let f1 = micro_f1(&pred, &truth).unwrap();
        prop_assert_eq!(f1, oracle(&pred, &truth));
        prop_assert!((0.0..=1.0).contains(&f1));
    }

    #[test]
    fn micro_f1_ignores_row_order((pred, truth) in pair(), shift in 0usize..30) {
        let k = shift % pred.len();
        let mut p = pred.clone();
        let mut t = truth.clone();
        p.rotate_left(k);
        t.rotate_left(k);
        p.reverse();
        t.reverse();
        prop_assert_eq!(micro_f1(&p, &t).unwrap(), micro_f1(&pred, &truth).unwrap());
    }

    #[test]
    fn class_counts_add_up((pred, truth) in pair()) {
        let labels: Vec<String> = (0..truth[0].len()).map(|c| format!("c{c}")).collect();
        let counts = per_class_counts(&pred, &truth, &labels).unwrap();
        let total: usize = truth.iter().map(MultiHot::count_ones).sum();
        let tp: u64 = counts.iter().map(|c| c.tp).sum();
        let fn_: u64 = counts.iter().map(|c| c.fn_).sum();
        prop_assert_eq!((tp + fn_) as usize, total);
        prop_assert!(counts.iter().all(|c| c.fn_ <= c.support && c.tp + c.fn_ == c.support));
        let pooled = pair_counts(&pred, &truth).unwrap();
        prop_assert_eq!(pooled.tp, tp);
        prop_assert_eq!(pooled.fp, counts.iter().map(|c| c.fp).sum::<u64>());
    }

    #[test]
    fn raising_tau_is_monotone(
        probs in prop::collection::vec(0.0f64..=1.0, 24),
        truth in rows(6, 4),
        a in 0.01f64..0.99,
        b in 0.01f64..0.99,
    ) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let ids: Vec<String> = (0..6).map(|i| format!("p{i}")).collect();
        let m = PredictionMatrix::new("m", ids, 4, probs).unwrap();
        let c_lo = pair_counts(&threshold_predictions(&m, lo), &truth).unwrap();
        let c_hi = pair_counts(&threshold_predictions(&m, hi), &truth).unwrap();
        prop_assert!(c_hi.fp <= c_lo.fp);
        prop_assert!(c_hi.fn_ >= c_lo.fn_);
    }

    #[test]
    fn ranking_is_total_and_order_free(
        raw in prop::collection::vec((0u64..6, 0u64..6), 1..15),
        k in 1usize..20,
    ) {
        let counts: Vec<ClassCounts> = raw
            .iter()
            .enumerate()
            .map(|(i, &(a, b))| {
                let support = a.max(b);
                ClassCounts { label: format!("l{i:02}"), tp: support - a.min(b), fp: 0, fn_: a.min(b), support }
            })
            .collect();
        let mut reversed = counts.clone();
        reversed.reverse();
        let top = top_misclassified(&counts, k);
        prop_assert_eq!(&top, &top_misclassified(&reversed, k));
        prop_assert!(top.len() <= k);
        prop_assert!(top.iter().all(|r| r.support > 0));
        for w in top.windows(2) {
            let (x, y) = (&w[0], &w[1]);
            let lhs = x.fn_ * y.support;
            let rhs = y.fn_ * x.support;
            prop_assert!(lhs > rhs || (lhs == rhs && x.label <= y.label));
        }
    }
}

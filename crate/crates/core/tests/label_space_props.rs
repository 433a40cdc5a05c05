use std::collections::BTreeSet;

use latefuse::label_space::{
    build_vocabulary, encode_labels, filter_records, read_vocabulary, split_train_test, write_vocabulary,
};
use latefuse::ProductRecord;
use proptest::prelude::*;

fn corpus() -> impl Strategy<Value = Vec<ProductRecord>> {
    prop::collection::vec(prop::collection::btree_set("[a-f]", 0..4), 1..40).prop_map(|sets| {
        sets.into_iter()
            .enumerate()
            .map(|(i, labels)| ProductRecord::new(format!("p{i}"), labels))
            .collect()
    })
}

proptest! {
    #[test]
    fn vocabulary_is_order_independent(records in corpus(), min_count in 0usize..4, seed in any::<u64>()) {
        let mut shuffled = records.clone();
        // Deterministic permutation driven by the seed.
        let n = shuffled.len();
        for i in 0..n {
            let j = (seed.wrapping_mul(6364136223846793005).wrapping_add(i as u64) % n as u64) as usize;
            shuffled.swap(i, j);
        }
        let a = build_vocabulary(&records, min_count);
        let b = build_vocabulary(&shuffled, min_count);
        match (a, b) {
            (Ok(a), Ok(b)) => {
                prop_assert_eq!(a.labels(), b.labels());
                prop_assert_eq!(a.counts(), b.counts());
                prop_assert!(a.counts().iter().all(|&c| c >= min_count));
                prop_assert!(a.labels().windows(2).all(|w| w[0] < w[1]));
            }
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "order changed the outcome"),
        }
    }

    #[test]
    fn filtered_records_encode_to_their_intersection(records in corpus(), min_count in 1usize..4) {
        let Ok(vocab) = build_vocabulary(&records, min_count) else { return Ok(()) };
        let kept = filter_records(&records, &vocab);
        for r in &kept {
            prop_assert!(!r.labels.is_empty());
            let original = records.iter().find(|o| o.id == r.id).unwrap();
            let inter: BTreeSet<&String> = original.labels.iter().filter(|l| vocab.contains(l)).collect();
            let bits = encode_labels(&r.labels, &vocab, true).unwrap();
            prop_assert_eq!(bits.count_ones(), inter.len());
            for i in bits.ones() {
                prop_assert!(r.labels.contains(&vocab.labels()[i]));
            }
        }
        let dropped = records.iter().filter(|o| o.labels.iter().all(|l| !vocab.contains(l))).count();
        prop_assert_eq!(kept.len() + dropped, records.len());
    }

    #[test]
    fn split_concatenation_is_identity(records in corpus(), frac in 0.0f64..=1.0) {
        let n_train = (frac * records.len() as f64).round() as usize;
        let (train, test) = split_train_test(&records, n_train).unwrap();
        prop_assert_eq!(train.len(), n_train);
        let joined: Vec<ProductRecord> = train.into_iter().chain(test).collect();
        prop_assert_eq!(joined, records.clone());
        prop_assert!(split_train_test(&records, records.len() + 1).is_err());
    }

    #[test]
    fn vocabulary_file_round_trip(records in corpus(), min_count in 0usize..3) {
        let Ok(vocab) = build_vocabulary(&records, min_count) else { return Ok(()) };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.tsv");
        write_vocabulary(&path, &vocab).unwrap();
        let back = read_vocabulary(&path).unwrap();
        prop_assert_eq!(back.labels_hash(), vocab.labels_hash());
        prop_assert_eq!(back, vocab);
    }
}

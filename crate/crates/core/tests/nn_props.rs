use latefuse::nn::ops::{conv1d_forward, global_max_pool};
use latefuse::nn::{
    network_from_container, network_to_container, text_cnn_arch, train_text_cnn, Activation, Input, InputShape,
    LayerSpec, ModelContainer, Network, Tensor, TextCnnShape, TrainConfig,
};
use latefuse::text_prep::{build_token_vocab, encode_sequence, init_embedding_table, PretrainedVectors, PAD};
use latefuse::MultiHot;
use proptest::prelude::*;

fn small_shape() -> TextCnnShape {
    TextCnnShape {
        kernel: 3,
        filters: 8,
        hidden: 6,
        dropout: 0.5,
    }
}

fn corpus() -> (Vec<Vec<usize>>, Vec<MultiHot>, latefuse::EmbeddingTable) {
    let docs: Vec<Vec<String>> = (0..24)
        .map(|i| {
            let mut d = vec![format!("w{}", i % 5), format!("w{}", (i * 3) % 7)];
            if i % 2 == 0 {
                d.push("even".into());
            }
            d
        })
        .collect();
    let vocab = build_token_vocab(&docs, 1);
    let seqs = docs.iter().map(|d| encode_sequence(d, &vocab, 6)).collect();
    let targets = (0..24).map(|i| MultiHot::from_bits(&[(i % 2 == 0) as u8, (i % 3 == 0) as u8])).collect();
    let table = init_embedding_table(&vocab, &PretrainedVectors::default(), 4, 1).unwrap();
    (seqs, targets, table)
}

#[test]
fn padding_row_stays_zero_through_training() {
    let (seqs, targets, table) = corpus();
    let arch = text_cnn_arch(table.rows(), 4, 2, small_shape());
    let cfg = TrainConfig {
        epochs: 15,
        batch_size: 5,
        lr: 0.05,
        seed: 3,
        ..TrainConfig::default()
    };
    assert!(seqs.iter().any(|s| s.contains(&PAD)));
    let (model, history) = train_text_cnn(&table, &arch, &seqs, &targets, &cfg, |_| {}).unwrap();
    let emb = model.embedding();
    assert!(emb[..4].iter().all(|&v| v == 0.0));
    assert_ne!(&emb[4..], &table.values[4..], "other rows should have moved");
    assert!(history.iter().all(|h| h.loss.is_finite()));
    for row in model.predict(&seqs).unwrap() {
        assert!(row.iter().all(|&p| p > 0.0 && p < 1.0));
    }
}

#[test]
fn training_is_bit_identical_per_seed() {
    let (seqs, targets, table) = corpus();
    let arch = text_cnn_arch(table.rows(), 4, 2, small_shape());
    let cfg = TrainConfig {
        epochs: 4,
        batch_size: 4,
        seed: 12,
        ..TrainConfig::default()
    };
    let (a, ha) = train_text_cnn(&table, &arch, &seqs, &targets, &cfg, |_| {}).unwrap();
    let (b, hb) = train_text_cnn(&table, &arch, &seqs, &targets, &cfg, |_| {}).unwrap();
    let bytes = |m: &latefuse::TextCnnModel| network_to_container(&m.network, "text_cnn").to_bytes().unwrap();
    assert_eq!(bytes(&a), bytes(&b));
    assert_eq!(ha, hb);
    let other = TrainConfig { seed: 13, ..cfg };
    let (c, _) = train_text_cnn(&table, &arch, &seqs, &targets, &other, |_| {}).unwrap();
    assert_ne!(bytes(&a), bytes(&c));
}

fn dense_net() -> impl Strategy<Value = (Network, Vec<f64>)> {
    (1usize..6, 1usize..6, 1usize..4, any::<u64>()).prop_flat_map(|(dim, hidden, out, seed)| {
        let net = Network::new(
            InputShape::Features { dim },
            &[
                LayerSpec::Dense { units: hidden, activation: Activation::Tanh },
                LayerSpec::Dense { units: out, activation: Activation::Sigmoid },
            ],
            seed,
        )
        .unwrap();
        (Just(net), prop::collection::vec(-50.0f64..50.0, dim))
    })
}

proptest! {
    #[test]
    fn sigmoid_outputs_stay_inside_the_unit_interval((net, x) in dense_net()) {
        let out = net.predict(Input::Features(&x)).unwrap();
        prop_assert!(out.iter().all(|&p| p > 0.0 && p < 1.0));
    }

    #[test]
    fn containers_round_trip_bit_exactly((net, _) in dense_net()) {
        let bytes = network_to_container(&net, "policy_network").to_bytes().unwrap();
        let back = network_from_container(&ModelContainer::from_bytes(&bytes).unwrap()).unwrap();
        prop_assert_eq!(back, net);
    }

    #[test]
    fn conv_and_pool_shapes(steps in 1usize..12, dim in 1usize..4, kernel in 1usize..5, filters in 1usize..4,
                            seed in any::<u64>()) {
        prop_assume!(kernel <= steps);
        let mut state = seed;
        let mut next = || { state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407); (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5 };
        let x = Tensor::matrix(steps, dim, (0..steps * dim).map(|_| next()).collect()).unwrap();
        let w: Vec<f64> = (0..filters * kernel * dim).map(|_| next()).collect();
        let b: Vec<f64> = (0..filters).map(|_| next()).collect();
        let y = conv1d_forward(&x, kernel, filters, &w, &b).unwrap();
        prop_assert_eq!(y.shape(), &[steps - kernel + 1, filters][..]);
        let (vals, arg) = global_max_pool(&y);
        prop_assert_eq!(vals.len(), filters);
        for f in 0..filters {
            let col_max = (0..y.rows()).map(|t| y.row(t)[f]).fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!(vals[f], col_max);
            prop_assert_eq!(y.row(arg[f])[f], col_max);
        }
    }
}

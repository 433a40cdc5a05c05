use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use latefuse::fusion::PredictionMatrix;
use latefuse::nn::ModelContainer;
use nalgebra::DMatrix;
use tempfile::TempDir;

fn latefuse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_latefuse"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = latefuse(args);
    assert!(
        out.status.success(),
        "latefuse {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn fails(args: &[&str]) -> String {
    let out = latefuse(args);
    assert!(!out.status.success(), "latefuse {args:?} unexpectedly succeeded");
    String::from_utf8(out.stderr).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Record<'a> {
    id: String,
    title: String,
    labels: Vec<&'a str>,
}

fn write_dataset(path: &Path, records: &[Record]) {
    let lines: Vec<String> = records
        .iter()
        .map(|r| {
            let labels: Vec<String> = r.labels.iter().map(|l| format!("\"{l}\"")).collect();
            format!(
                "{{\"id\":\"{}\",\"title\":\"{}\",\"description\":\"{}\",\"labels\":[{}]}}",
                r.id,
                r.title,
                r.title,
                labels.join(",")
            )
        })
        .collect();
    std::fs::write(path, lines.join("\n") + "\n").unwrap();
}

/// Eight records over labels {a: 5, b: 2, c: 1}.
fn tally_corpus(dir: &Path) -> PathBuf {
    let labels = ["a", "b", "a", "c", "a", "b", "a", "a"];
    let records: Vec<Record> = labels
        .iter()
        .enumerate()
        .map(|(i, l)| Record { id: format!("p{i}"), title: format!("item {i}"), labels: vec![*l] })
        .collect();
    let path = dir.join("tally.jsonl");
    write_dataset(&path, &records);
    path
}

/// Letters only: cleaning turns digits into separators.
fn word(prefix: &str, n: u64) -> String {
    format!("{prefix}{}", (b'a' + n as u8) as char)
}

/// Products whose title contains the i-th marker word carry label `l<i>`.
fn marker_corpus(dir: &Path, n: usize) -> PathBuf {
    let mut state = 12345u64;
    let mut next = move |m: u64| {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 33) % m
    };
    let records: Vec<Record> = (0..n)
        .map(|i| {
            let mut words: Vec<String> = (0..3).map(|_| word("filler", next(20))).collect();
            let mut labels = Vec::new();
            for (c, name) in ["l0", "l1", "l2"].iter().enumerate() {
                if next(3) == 0 || (labels.is_empty() && c == 2) {
                    words.insert(next(words.len() as u64 + 1) as usize, word("marker", c as u64));
                    labels.push(*name);
                }
            }
            Record { id: format!("p{i}"), title: words.join(" "), labels }
        })
        .collect();
    let path = dir.join("markers.jsonl");
    write_dataset(&path, &records);
    path
}

fn vocab_for(dir: &Path, dataset: &Path, min_count: &str) -> PathBuf {
    let out = dir.join("vocab");
    ok(&["vocab", "--dataset", s(dataset), "--min-count", min_count, "--out", s(&out)]);
    out.join("labels.vocab")
}

#[test]
fn vocab_keeps_frequent_labels() {
    let dir = TempDir::new().unwrap();
    let data = tally_corpus(dir.path());
    let vocab = vocab_for(dir.path(), &data, "2");
    let text = std::fs::read_to_string(&vocab).unwrap();
    assert_eq!(text, "#min_count=2\n5\ta\n2\tb\n");
    let summary = std::fs::read_to_string(dir.path().join("vocab/vocab_summary.tsv")).unwrap();
    assert!(summary.contains("classes_kept\t2\n"));
    assert!(summary.contains("classes_total\t3\n"));
    assert!(summary.contains("products_dropped\t1\n"));
    assert!(dir.path().join("vocab/vocab.config").exists());

    let all = vocab_for(&dir.path().join("all"), &data, "0");
    assert_eq!(std::fs::read_to_string(all).unwrap().lines().count(), 4);
}

#[test]
fn missing_dataset_is_reported() {
    let err = fails(&["vocab", "--dataset", "/no/such/records.jsonl"]);
    assert!(err.contains("/no/such/records.jsonl"), "{err}");
}

#[test]
fn unknown_modality_is_a_usage_error() {
    let out = latefuse(&["train-text", "--modality", "image"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn text_pipeline_trains_predicts_and_evaluates() {
    let dir = TempDir::new().unwrap();
    let data = marker_corpus(dir.path(), 120);
    let vocab = vocab_for(dir.path(), &data, "1");
    let cfg = dir.path().join("small.cfg");
    std::fs::write(
        &cfg,
        "# tiny network for a separable corpus\nembedding_dim = 8\nkernel = 1\nfilters = 16\nhidden = 16\n\
         max_len = 6\nepochs = 40\nbatch_size = 8\nlr = 0.01\nn_train = 100\n",
    )
    .unwrap();
    let models = dir.path().join("models");
    let train = |seed: &str| {
        ok(&[
            "train-text", "--config", s(&cfg), "--seed", seed, "--dataset", s(&data), "--vocab", s(&vocab),
            "--modality", "title", "--out", s(&models),
        ])
    };
    let stdout = train("5");
    assert!(stdout.contains("pretrained coverage 0.0%"), "{stdout}");
    let model_bytes = std::fs::read(models.join("title.model")).unwrap();
    let log = std::fs::read_to_string(models.join("title.log.tsv")).unwrap();
    assert_eq!(log.lines().count(), 40);
    assert!(log.lines().all(|l| l.split('\t').count() == 3));
    train("5");
    assert_eq!(std::fs::read(models.join("title.model")).unwrap(), model_bytes, "same seed, same bytes");

    let c = ModelContainer::from_bytes(&model_bytes).unwrap();
    assert_eq!(c.get("max_len").unwrap(), "6");
    assert_eq!(c.get("modality").unwrap(), "title");

    let preds = dir.path().join("preds");
    let predict = |split: &str| {
        ok(&[
            "predict", "--config", s(&cfg), "--dataset", s(&data), "--vocab", s(&vocab), "--model",
            s(&models.join("title.model")), "--tokens", s(&models.join("title.tokens.tsv")), "--split", split,
            "--out", s(&preds),
        ])
    };
    predict("train");
    predict("test");
    let test = PredictionMatrix::read(&preds.join("title.test.csv")).unwrap();
    assert_eq!(test.num_rows(), 20);
    assert_eq!(test.num_labels(), 3);

    let reports = dir.path().join("reports");
    let stdout = ok(&[
        "eval", "--config", s(&cfg), "--dataset", s(&data), "--vocab", s(&vocab), "--matrix",
        s(&preds.join("title.train.csv")), "--out", s(&reports),
    ]);
    let f1: f64 = stdout.lines().next().unwrap().rsplit('\t').next().unwrap().parse().unwrap();
    assert!(f1 >= 0.95, "self micro-F1 {f1}");
    assert!(reports.join("title.train.report.tsv").exists());
    assert!(reports.join("title.train.report.md").exists());
}

#[test]
fn title_profile_pads_to_57_tokens() {
    let dir = TempDir::new().unwrap();
    let data = marker_corpus(dir.path(), 20);
    let vocab = vocab_for(dir.path(), &data, "1");
    let out = dir.path().join("m");
    ok(&[
        "train-text", "--dataset", s(&data), "--vocab", s(&vocab), "--modality", "title", "--epochs", "0",
        "--set", "embedding_dim=4", "--set", "filters=2", "--set", "hidden=2", "--out", s(&out),
    ]);
    let c = ModelContainer::read(&out.join("title.model")).unwrap();
    assert_eq!(c.get("max_len").unwrap(), "57");
    assert_eq!(c.get("remove_stopwords").unwrap(), "false");
    assert!(c.get("input").unwrap().contains("57"));
}

#[test]
fn stale_artifacts_are_refused() {
    let dir = TempDir::new().unwrap();
    let data = marker_corpus(dir.path(), 30);
    let vocab = vocab_for(dir.path(), &data, "1");
    let out = dir.path().join("m");
    ok(&[
        "train-text", "--dataset", s(&data), "--vocab", s(&vocab), "--modality", "description", "--epochs", "1",
        "--set", "embedding_dim=4", "--set", "filters=2", "--set", "hidden=2", "--set", "kernel=1", "--out", s(&out),
    ]);
    let model = out.join("description.model");
    let tokens = out.join("description.tokens.tsv");

    let other = dir.path().join("other.vocab");
    std::fs::write(&other, "#min_count=1\n10\tl0\n10\tl1\n").unwrap();
    let err = fails(&[
        "predict", "--dataset", s(&data), "--vocab", s(&other), "--model", s(&model), "--tokens", s(&tokens),
    ]);
    assert!(err.contains("labels hash"), "{err}");

    let bad_tokens = dir.path().join("bad.tokens.tsv");
    std::fs::write(&bad_tokens, "0\t<pad>\n1\t<unk>\n2\tzzz\n").unwrap();
    let err = fails(&[
        "predict", "--dataset", s(&data), "--vocab", s(&vocab), "--model", s(&model), "--tokens", s(&bad_tokens),
    ]);
    assert!(err.contains("token vocabulary"), "{err}");

    // All records in the training split: the test split is empty.
    let preds = dir.path().join("p");
    ok(&[
        "predict", "--dataset", s(&data), "--vocab", s(&vocab), "--model", s(&model), "--tokens", s(&tokens),
        "--n-train", "30", "--out", s(&preds),
    ]);
    let text = std::fs::read_to_string(preds.join("description.test.csv")).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("#modality=description,"));
}

#[test]
fn imported_scores_are_validated() {
    let dir = TempDir::new().unwrap();
    let data = tally_corpus(dir.path());
    let vocab = vocab_for(dir.path(), &data, "2");
    let scores = dir.path().join("image.csv");
    let mut rows: Vec<String> = (0..8).map(|i| format!("p{i},0.25,0.5")).collect();
    rows[3] = "p3,1.3,0.5".into();
    rows.push("ghost,0.1,0.1".into());
    std::fs::write(&scores, rows.join("\n")).unwrap();
    let out = dir.path().join("o");
    let stdout = ok(&[
        "import-scores", "--dataset", s(&data), "--vocab", s(&vocab), "--scores", s(&scores), "--modality",
        "image", "--out", s(&out),
    ]);
    assert!(stdout.contains("unknown_ids\t1\nclamped\t1\n"), "{stdout}");
    let m = PredictionMatrix::read(&out.join("image.csv")).unwrap();
    assert_eq!(m.num_rows(), 8);
    assert_eq!(m.row(3), [1.0, 0.5]);

    std::fs::write(&scores, "p0,0.1,0.2\np1,0.3\n").unwrap();
    let err = fails(&[
        "import-scores", "--dataset", s(&data), "--vocab", s(&vocab), "--scores", s(&scores), "--modality", "image",
        "--out", s(&out),
    ]);
    assert!(err.contains(":2:"), "{err}");
}

/// Four products over three labels with every label used.
fn small_labelled(dir: &Path) -> (PathBuf, PathBuf) {
    let labels: [&[&str]; 4] = [&["x", "y"], &["z"], &["x"], &["y", "z"]];
    let records: Vec<Record> = labels
        .iter()
        .enumerate()
        .map(|(i, l)| Record { id: format!("p{i}"), title: String::new(), labels: l.to_vec() })
        .collect();
    let data = dir.join("small.jsonl");
    write_dataset(&data, &records);
    let vocab = vocab_for(dir, &data, "1");
    (data, vocab)
}

#[test]
fn saturated_synthetic_modality_is_perfect_and_reproducible() {
    let dir = TempDir::new().unwrap();
    let (data, vocab) = small_labelled(dir.path());
    let profile = dir.path().join("skills.tsv");
    std::fs::write(&profile, "*\t1.0\n").unwrap();
    let run = |out: &str| {
        let out = dir.path().join(out);
        ok(&[
            "synth", "--dataset", s(&data), "--vocab", s(&vocab), "--skill-profile", s(&profile), "--modality",
            "oracle", "--split", "all", "--seed", "9", "--out", s(&out),
        ]);
        out.join("oracle.all.csv")
    };
    let (a, b) = (run("a"), run("b"));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let stdout = ok(&["eval", "--dataset", s(&data), "--vocab", s(&vocab), "--matrix", s(&a), "--out", s(&dir.path().join("r"))]);
    assert!(stdout.starts_with("oracle\tmicro_f1\t1.0000"), "{stdout}");

    std::fs::write(&profile, "*\t0.5\nw\t0.9\n").unwrap();
    let err = fails(&[
        "synth", "--dataset", s(&data), "--vocab", s(&vocab), "--skill-profile", s(&profile), "--modality", "m",
    ]);
    assert!(err.contains("`w`"), "{err}");
}

fn write_matrix(path: &Path, modality: &str, hash: u64, rows: &[Vec<f64>]) {
    let ids = (0..rows.len()).map(|i| format!("p{i}")).collect();
    PredictionMatrix::from_rows(modality, ids, rows).unwrap().with_labels_hash(hash).write(path).unwrap();
}

fn vocab_hash(vocab: &Path) -> u64 {
    latefuse::label_space::read_vocabulary(vocab).unwrap().labels_hash()
}

#[test]
fn eval_matches_hand_counts() {
    let dir = TempDir::new().unwrap();
    let records = [Record { id: "p0".into(), title: String::new(), labels: vec!["x", "y"] }, Record {
        id: "p1".into(),
        title: String::new(),
        labels: vec!["z"],
    }];
    let data = dir.path().join("toy.jsonl");
    write_dataset(&data, &records);
    let vocab = vocab_for(dir.path(), &data, "1");
    let pred = dir.path().join("toy.csv");
    write_matrix(&pred, "toy", vocab_hash(&vocab), &[vec![0.9, 0.1, 0.2], vec![0.3, 0.8, 0.7]]);
    let out = dir.path().join("r");
    let stdout = ok(&["eval", "--dataset", s(&data), "--vocab", s(&vocab), "--matrix", s(&pred), "--out", s(&out)]);
    assert!(stdout.starts_with("toy\tmicro_f1\t0.6667\n"), "{stdout}");
    let md = std::fs::read_to_string(out.join("toy.report.md")).unwrap();
    assert!(md.contains("| 1 | y (1/1) |"), "{md}");

    let stranger = dir.path().join("stranger.csv");
    PredictionMatrix::from_rows("toy", vec!["p9".into()], &[vec![0.5; 3]])
        .unwrap()
        .with_labels_hash(vocab_hash(&vocab))
        .write(&stranger)
        .unwrap();
    let err = fails(&["eval", "--dataset", s(&data), "--vocab", s(&vocab), "--matrix", s(&stranger)]);
    assert!(err.contains("`p9`"), "{err}");
}

#[test]
fn static_fusion_of_the_trivial_triple() {
    let dir = TempDir::new().unwrap();
    let paths: Vec<PathBuf> = [[0.2, 0.9], [0.7, 0.1], [0.5, 0.5]]
        .iter()
        .enumerate()
        .map(|(m, r)| {
            let p = dir.path().join(format!("m{m}.csv"));
            write_matrix(&p, &format!("m{m}"), 7, &[r.to_vec()]);
            p
        })
        .collect();
    let out = dir.path().join("f");
    let mut args = vec!["fuse", "--policy", "max", "--out", s(&out)];
    args.extend(paths.iter().map(|p| s(p)));
    ok(&args);
    let fused = PredictionMatrix::read(&out.join("max.csv")).unwrap();
    assert_eq!(fused.values(), [0.7, 0.9]);
    assert_eq!(fused.params["policy"], "max");
    assert_eq!(fused.labels_hash, 7);
    assert!(!out.join("max.model").exists());

    let err = fails(&["fuse", "--policy", "mean", s(&paths[0])]);
    assert!(err.contains("required") || err.contains("2"), "{err}");

    write_matrix(&paths[2], "m2", 8, &[vec![0.5, 0.5]]);
    let mut args = vec!["fuse", "--policy", "mean", "--out", s(&out)];
    args.extend(paths.iter().map(|p| s(p)));
    assert!(fails(&args).contains("hash"));
}

/// Deterministic pseudo-random probabilities.
fn lcg(seed: u64) -> impl FnMut() -> f64 {
    let mut state = seed;
    move || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64
    }
}

/// Twenty labelled products and two 3-label modalities scored on them.
fn fusion_fixture(dir: &Path) -> (PathBuf, PathBuf, Vec<PathBuf>, DMatrix<f64>, DMatrix<f64>) {
    let mut rnd = lcg(77);
    let names = ["x", "y", "z"];
    let records: Vec<Record> = (0..20)
        .map(|i| {
            let mut labels: Vec<&str> = names.iter().copied().filter(|_| rnd() < 0.4).collect();
            if labels.is_empty() {
                labels.push(names[i % 3]);
            }
            Record { id: format!("p{i}"), title: String::new(), labels }
        })
        .collect();
    let y = DMatrix::from_fn(20, 3, |i, c| f64::from(u8::from(records[i].labels.contains(&names[c]))));
    let data = dir.join("fusion.jsonl");
    write_dataset(&data, &records);
    let vocab = vocab_for(dir, &data, "1");
    let hash = vocab_hash(&vocab);
    let mut x = DMatrix::zeros(20, 6);
    let paths = ["text", "image"]
        .iter()
        .enumerate()
        .map(|(m, name)| {
            let rows: Vec<Vec<f64>> = (0..20).map(|_| (0..3).map(|_| rnd()).collect()).collect();
            for (i, r) in rows.iter().enumerate() {
                for c in 0..3 {
                    x[(i, m * 3 + c)] = r[c];
                }
            }
            let p = dir.join(format!("{name}.csv"));
            write_matrix(&p, name, hash, &rows);
            p
        })
        .collect();
    (data, vocab, paths, x, y)
}

#[test]
fn ridge_fusion_solves_the_normal_equations() {
    let dir = TempDir::new().unwrap();
    let (data, vocab, inputs, x, y) = fusion_fixture(dir.path());
    let out = dir.path().join("f");
    ok(&[
        "fuse", "--policy", "ridge", "--alpha", "0.1", "--dataset", s(&data), "--vocab", s(&vocab), "--out", s(&out),
        s(&inputs[0]), s(&inputs[1]),
    ]);
    let c = ModelContainer::read(&out.join("ridge.model")).unwrap();
    let w = &c.array("weights").unwrap().data;
    let a = x.transpose() * &x + DMatrix::<f64>::identity(6, 6) * 0.1;
    let oracle = a.lu().solve(&(x.transpose() * &y)).unwrap();
    for f in 0..6 {
        for l in 0..3 {
            assert!((w[f * 3 + l] - oracle[(f, l)]).abs() < 1e-8);
        }
    }
    let fused = PredictionMatrix::read(&out.join("ridge.csv")).unwrap();
    assert_eq!(fused.params["alpha"], "0.1");

    // The saved model applies to new matrices with the same inputs.
    let again = dir.path().join("g");
    ok(&["fuse", "--model", s(&out.join("ridge.model")), "--out", s(&again), s(&inputs[0]), s(&inputs[1])]);
    assert_eq!(
        std::fs::read(again.join("ridge.csv")).unwrap(),
        std::fs::read(out.join("ridge.csv")).unwrap()
    );
    let err = fails(&["fuse", "--model", s(&out.join("ridge.model")), s(&inputs[1]), s(&inputs[0])]);
    assert!(err.contains("expects inputs"), "{err}");
}

#[test]
fn trimodal_policy_network_is_recorded_and_reproducible() {
    let dir = TempDir::new().unwrap();
    let (data, vocab, mut inputs, _, _) = fusion_fixture(dir.path());
    let hash = vocab_hash(&vocab);
    let mut rnd = lcg(5);
    let third = dir.path().join("audio.csv");
    write_matrix(&third, "audio", hash, &(0..20).map(|_| (0..3).map(|_| rnd()).collect()).collect::<Vec<_>>());
    inputs.push(third);
    let run = |out: &str| {
        let out = dir.path().join(out);
        let mut args = vec![
            "fuse", "--policy", "mlp", "--epochs", "3", "--seed", "4", "--set", "mlp_hidden=8,6", "--dataset", s(&data),
            "--vocab", s(&vocab), "--out", s(&out),
        ];
        args.extend(inputs.iter().map(|p| s(p)));
        ok(&args);
        out
    };
    let (a, b) = (run("a"), run("b"));
    let fused = PredictionMatrix::read(&a.join("mlp.csv")).unwrap();
    assert_eq!(fused.params["activations"], "sigmoid/tanh/sigmoid");
    assert_eq!(fused.params["inputs"], "text+image+audio");
    for f in ["mlp.csv", "mlp.model"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let config = std::fs::read_to_string(a.join("fuse.config")).unwrap();
    assert!(config.contains("mlp_hidden = 8,6\n") && config.contains("seed = 4\n"), "{config}");
}

#[test]
fn echoed_config_reproduces_a_run() {
    let dir = TempDir::new().unwrap();
    let (data, vocab) = small_labelled(dir.path());
    let profile = dir.path().join("skills.tsv");
    std::fs::write(&profile, "*\t0.7\n").unwrap();
    let first = dir.path().join("first");
    ok(&[
        "synth", "--dataset", s(&data), "--vocab", s(&vocab), "--skill-profile", s(&profile), "--modality", "m",
        "--split", "all", "--seed", "31", "--out", s(&first),
    ]);
    let second = dir.path().join("second");
    ok(&["synth", "--config", s(&first.join("synth.config")), "--out", s(&second)]);
    assert_eq!(
        std::fs::read(first.join("m.all.csv")).unwrap(),
        std::fs::read(second.join("m.all.csv")).unwrap()
    );
}

#[test]
fn gradcheck_passes_and_detects_corruption() {
    let stdout = ok(&["gradcheck", "--configs", "5"]);
    let kinds: Vec<&str> = stdout.lines().skip(1).map(|l| l.split('\t').next().unwrap()).collect();
    assert_eq!(kinds, latefuse::nn::gradcheck::KINDS);
    assert!(stdout.lines().skip(1).all(|l| l.ends_with("\tok")));
    let out = latefuse(&["gradcheck", "--configs", "2", "--corrupt"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}

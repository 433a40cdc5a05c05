use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use latefuse::eval::{emit_report, EvalReport, ReportFormat, SkillProfile};
use latefuse::fusion::{
    align, import_scores, train_policy_network, train_ridge, FusionModel, Policy, PolicyNetworkSpec, PredictionMatrix,
    RidgeConfig,
};
use latefuse::hash::{fnv1a, from_hex, to_hex};
use latefuse::label_space::{
    build_vocabulary, encode_labels, filter_records, read_dataset, read_vocabulary, split_train_test,
    write_vocabulary, LabelVocabulary, MultiHot, ProductRecord,
};
use latefuse::nn::gradcheck::{run_suite, GradcheckOptions, TOLERANCE};
use latefuse::nn::{
    network_from_container, network_to_container, text_cnn_arch, train_text_cnn, Activation, ModelContainer,
    TextCnnModel, TextCnnShape, TrainConfig,
};
use latefuse::text_prep::{
    build_token_vocab, clean_text_with, coverage_ratio, encode_sequence, init_embedding_table, load_pretrained_vectors,
    PrepProfile, PretrainedVectors, StopWords, TokenVocab,
};
use log::{info, warn};

use crate::config::RunConfig;

/// Size of the reference corpus and of its training prefix; when `n_train` is
/// unset the same proportion of the filtered records is used for training.
const REFERENCE_RECORDS: usize = 119_073;
const REFERENCE_TRAIN: usize = 90_000;

fn default_n_train(len: usize) -> usize {
    ((len as u128 * REFERENCE_TRAIN as u128 + REFERENCE_RECORDS as u128 / 2) / REFERENCE_RECORDS as u128) as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Split {
    Train,
    Test,
    All,
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            "all" => Ok(Split::All),
            other => Err(format!("unknown split `{other}` (train, test or all)")),
        }
    }
}

impl Split {
    fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
            Split::All => "all",
        }
    }
}

/// The dataset restricted to the vocabulary, plus the vocabulary itself.
struct Corpus {
    vocab: LabelVocabulary,
    records: Vec<ProductRecord>,
    n_train: usize,
}

impl Corpus {
    fn load(cfg: &RunConfig) -> Result<Self> {
        let vocab = read_vocabulary(&cfg.require_path("vocab")?)?;
        let all = read_dataset(&cfg.require_path("dataset")?)?;
        let records = filter_records(&all, &vocab);
        if records.len() < all.len() {
            info!("{} records have no label in the vocabulary and are ignored", all.len() - records.len());
        }
        let n_train = cfg.opt("n_train")?.unwrap_or_else(|| default_n_train(records.len()));
        Ok(Corpus { vocab, records, n_train })
    }

    fn hash(&self) -> u64 {
        self.vocab.labels_hash()
    }

    fn split(&self, split: Split) -> Result<Vec<ProductRecord>> {
        let (train, test) = split_train_test(&self.records, self.n_train)?;
        Ok(match split {
            Split::Train => train,
            Split::Test => test,
            Split::All => self.records.clone(),
        })
    }

    fn targets(&self, records: &[ProductRecord]) -> Result<Vec<MultiHot>> {
        records
            .iter()
            .map(|r| Ok(encode_labels(&r.labels, &self.vocab, false)?))
            .collect()
    }

    /// Targets for `ids`; every id must be a record of the filtered dataset.
    fn targets_for(&self, ids: &[String]) -> Result<Vec<MultiHot>> {
        let by_id: HashMap<&str, &ProductRecord> = self.records.iter().map(|r| (r.id.as_str(), r)).collect();
        let unknown: Vec<&String> = ids.iter().filter(|id| !by_id.contains_key(id.as_str())).collect();
        if let Some(first) = unknown.first() {
            bail!("{} ids are not in the labelled dataset (first: `{first}`)", unknown.len());
        }
        ids.iter()
            .map(|id| Ok(encode_labels(&by_id[id.as_str()].labels, &self.vocab, false)?))
            .collect()
    }

    fn check_hash(&self, found: u64, what: &str) -> Result<()> {
        ensure!(
            found == self.hash(),
            "{what} was built for labels hash {}, but the vocabulary hashes to {}; regenerate it from this vocabulary",
            to_hex(found),
            to_hex(self.hash())
        );
        Ok(())
    }
}

fn train_config(cfg: &RunConfig) -> Result<TrainConfig> {
    Ok(TrainConfig {
        lr: cfg.get("lr")?,
        batch_size: cfg.get("batch_size")?,
        epochs: cfg.get("epochs")?,
        seed: cfg.get("seed")?,
        ..TrainConfig::default()
    })
}

fn write_matrix(matrix: &PredictionMatrix, path: &Path) -> Result<()> {
    matrix.write(path)?;
    println!("wrote {} ({} rows)", path.display(), matrix.num_rows());
    Ok(())
}

fn write_container(c: &ModelContainer, path: &Path) -> Result<()> {
    c.write(path)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn meta_hash(c: &ModelContainer, key: &str) -> Result<u64> {
    let raw = c.get(key)?;
    from_hex(raw).with_context(|| format!("model meta `{key}` is not a hash: `{raw}`"))
}

pub fn vocab(cfg: &RunConfig) -> Result<()> {
    let records = read_dataset(&cfg.require_path("dataset")?)?;
    let min_count = cfg.get("min_count")?;
    let vocab = build_vocabulary(&records, min_count)?;
    let kept = filter_records(&records, &vocab);
    let total_labels: HashSet<&str> = records.iter().flat_map(|r| r.labels.iter().map(String::as_str)).collect();

    let dir = cfg.echo("vocab")?;
    write_vocabulary(&dir.join("labels.vocab"), &vocab)?;
    let summary = format!(
        "classes_total\t{}\nclasses_kept\t{}\nproducts_total\t{}\nproducts_dropped\t{}\nlabels_hash\t{}\n",
        total_labels.len(),
        vocab.len(),
        records.len(),
        records.len() - kept.len(),
        to_hex(vocab.labels_hash())
    );
    std::fs::write(dir.join("vocab_summary.tsv"), &summary)?;
    print!("{summary}");
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TextModality {
    Title,
    Description,
}

impl TextModality {
    fn parse(s: &str) -> Result<Self> {
        match s {
            "title" => Ok(TextModality::Title),
            "description" => Ok(TextModality::Description),
            other => bail!("unknown text modality `{other}` (title or description)"),
        }
    }

    fn name(self) -> &'static str {
        match self {
            TextModality::Title => "title",
            TextModality::Description => "description",
        }
    }

    fn text(self, r: &ProductRecord) -> &str {
        match self {
            TextModality::Title => &r.title,
            TextModality::Description => &r.description,
        }
    }
}

/// The modality's profile with any overrides from the config applied.
fn prep_profile(cfg: &RunConfig, modality: TextModality) -> Result<PrepProfile> {
    let mut p = match modality {
        TextModality::Title => PrepProfile::title(),
        TextModality::Description => PrepProfile::description(),
    };
    p.max_len = cfg.opt("max_len")?.unwrap_or(p.max_len);
    p.max_word_len = cfg.opt("max_word_len")?.unwrap_or(p.max_word_len);
    p.remove_stopwords = cfg.opt("remove_stopwords")?.unwrap_or(p.remove_stopwords);
    p.strip_digits = cfg.opt("strip_digits")?.unwrap_or(p.strip_digits);
    p.strip_punct = cfg.opt("strip_punct")?.unwrap_or(p.strip_punct);
    p.validate()?;
    Ok(p)
}

fn store_profile(c: &mut ModelContainer, p: &PrepProfile) {
    c.set("max_len", p.max_len)
        .set("max_word_len", p.max_word_len)
        .set("remove_stopwords", p.remove_stopwords)
        .set("strip_digits", p.strip_digits)
        .set("strip_punct", p.strip_punct);
}

fn load_profile(c: &ModelContainer) -> Result<PrepProfile> {
    Ok(PrepProfile {
        max_len: c.get_parsed("max_len")?,
        max_word_len: c.get_parsed("max_word_len")?,
        remove_stopwords: c.get_parsed("remove_stopwords")?,
        strip_digits: c.get_parsed("strip_digits")?,
        strip_punct: c.get_parsed("strip_punct")?,
    })
}

/// The stop-word list and an identifier for it: `builtin` or the hash of the
/// file's bytes.
fn stopwords(cfg: &RunConfig) -> Result<(StopWords, String)> {
    match cfg.path("stopwords") {
        None => Ok((StopWords::builtin().clone(), "builtin".into())),
        Some(path) => {
            let bytes = std::fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
            Ok((StopWords::from_file(&path)?, to_hex(fnv1a(&bytes))))
        }
    }
}

fn sequences(
    records: &[ProductRecord],
    modality: TextModality,
    profile: &PrepProfile,
    stop: &StopWords,
    tokens: &TokenVocab,
) -> Vec<Vec<usize>> {
    records
        .iter()
        .map(|r| encode_sequence(&clean_text_with(modality.text(r), profile, stop), tokens, profile.max_len))
        .collect()
}

pub fn train_text(cfg: &RunConfig) -> Result<()> {
    let modality = TextModality::parse(&cfg.get::<String>("modality")?)?;
    let profile = prep_profile(cfg, modality)?;
    let (stop, stop_id) = stopwords(cfg)?;
    let corpus = Corpus::load(cfg)?;
    let train = corpus.split(Split::Train)?;
    ensure!(!train.is_empty(), "the training split is empty (n_train = {})", corpus.n_train);

    let docs: Vec<Vec<String>> = train
        .iter()
        .map(|r| clean_text_with(modality.text(r), &profile, &stop))
        .collect();
    let tokens = build_token_vocab(&docs, cfg.get("min_freq")?);
    let dim: usize = cfg.get("embedding_dim")?;
    let pretrained = match cfg.path("embeddings") {
        Some(path) => load_pretrained_vectors(&path, dim)?,
        None => PretrainedVectors { dim, ..Default::default() },
    };
    let coverage = coverage_ratio(&tokens, &pretrained);
    println!("{} vocabulary: {} tokens, pretrained coverage {:.1}%", modality.name(), tokens.real_len(), coverage * 100.0);

    let seed: u64 = cfg.get("seed")?;
    let table = init_embedding_table(&tokens, &pretrained, dim, seed)?;
    let shape = TextCnnShape {
        kernel: cfg.get("kernel")?,
        filters: cfg.get("filters")?,
        hidden: cfg.get("hidden")?,
        dropout: cfg.get("dropout")?,
    };
    let arch = text_cnn_arch(table.rows(), dim, corpus.vocab.len(), shape);
    let seqs: Vec<Vec<usize>> = docs.iter().map(|d| encode_sequence(d, &tokens, profile.max_len)).collect();
    let targets = corpus.targets(&train)?;
    let (model, history) = train_text_cnn(&table, &arch, &seqs, &targets, &train_config(cfg)?, |e| {
        info!("epoch {}: loss {:.5}, train micro-F1 {:.4}", e.epoch, e.loss, e.train_micro_f1)
    })?;

    let dir = cfg.echo("train-text")?;
    let name = modality.name();
    let mut c = network_to_container(&model.network, "text_cnn");
    c.set("modality", name)
        .set("labels_hash", to_hex(corpus.hash()))
        .set("tokens_hash", to_hex(tokens.tokens_hash()))
        .set("stopwords", stop_id)
        .set("seed", seed);
    store_profile(&mut c, &profile);
    write_container(&c, &dir.join(format!("{name}.model")))?;
    tokens.write(&dir.join(format!("{name}.tokens.tsv")))?;
    let log: String = history.iter().map(|e| e.log_line() + "\n").collect();
    std::fs::write(dir.join(format!("{name}.log.tsv")), log)?;
    Ok(())
}

pub fn predict(cfg: &RunConfig) -> Result<()> {
    let c = ModelContainer::read(&cfg.require_path("model")?)?;
    ensure!(c.kind == "text_cnn", "expected a text classifier, found a `{}` model", c.kind);
    let corpus = Corpus::load(cfg)?;
    corpus.check_hash(meta_hash(&c, "labels_hash")?, "the model")?;
    let tokens = TokenVocab::read(&cfg.require_path("tokens")?)?;
    ensure!(
        meta_hash(&c, "tokens_hash")? == tokens.tokens_hash(),
        "the token vocabulary does not belong to this model (hash {} vs {})",
        to_hex(tokens.tokens_hash()),
        c.get("tokens_hash")?
    );
    let (stop, stop_id) = stopwords(cfg)?;
    ensure!(
        c.get("stopwords")? == stop_id,
        "the model was trained with stop words `{}`, not `{stop_id}`",
        c.get("stopwords")?
    );
    let modality = TextModality::parse(c.get("modality")?)?;
    let profile = load_profile(&c)?;
    let model = TextCnnModel::from_network(network_from_container(&c)?)?;
    ensure!(model.max_len() == profile.max_len, "model length and profile disagree");

    let split: Split = cfg.get("split")?;
    let records = corpus.split(split)?;
    let probs = model.predict(&sequences(&records, modality, &profile, &stop, &tokens))?;
    let ids = records.iter().map(|r| r.id.clone()).collect();
    let matrix = PredictionMatrix::new(modality.name(), ids, model.num_labels(), probs.concat())?
        .with_labels_hash(corpus.hash());

    let dir = cfg.echo("predict")?;
    write_matrix(&matrix, &dir.join(format!("{}.{}.csv", modality.name(), split.name())))
}

pub fn import(cfg: &RunConfig) -> Result<()> {
    let modality: String = cfg.get("modality")?;
    let vocab = read_vocabulary(&cfg.require_path("vocab")?)?;
    let records = read_dataset(&cfg.require_path("dataset")?)?;
    let known: HashSet<&str> = records.iter().map(|r| r.id.as_str()).collect();
    let imported = import_scores(&cfg.require_path("scores")?, &modality, vocab.len(), &known)?;
    if imported.unknown_ids > 0 {
        warn!("skipped {} rows with unknown ids", imported.unknown_ids);
    }
    if imported.clamped > 0 {
        warn!("clamped {} values into [0, 1]", imported.clamped);
    }
    let matrix = imported.matrix.with_labels_hash(vocab.labels_hash());
    let dir = cfg.echo("import-scores")?;
    write_matrix(&matrix, &dir.join(format!("{modality}.csv")))?;
    println!("unknown_ids\t{}\nclamped\t{}", imported.unknown_ids, imported.clamped);
    Ok(())
}

pub fn synth(cfg: &RunConfig) -> Result<()> {
    let modality: String = cfg.get("modality")?;
    let corpus = Corpus::load(cfg)?;
    let path = cfg.require_path("skill_profile")?;
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let profile = SkillProfile::parse(&text, corpus.vocab.labels(), cfg.get("temperature")?)
        .with_context(|| format!("in skill profile {}", path.display()))?;
    let split: Split = cfg.get("split")?;
    let records = corpus.split(split)?;
    let ids: Vec<String> = records.iter().map(|r| r.id.clone()).collect();
    let truth = corpus.targets(&records)?;
    let matrix = latefuse::eval::generate_synthetic_modality(&modality, &ids, &truth, &profile, cfg.get("seed")?)?
        .with_labels_hash(corpus.hash());
    let dir = cfg.echo("synth")?;
    write_matrix(&matrix, &dir.join(format!("{modality}.{}.csv", split.name())))
}

fn read_matrices(paths: &[PathBuf]) -> Result<Vec<PredictionMatrix>> {
    paths.iter().map(|p| Ok(PredictionMatrix::read(p)?)).collect()
}

fn aligned(paths: &[PathBuf]) -> Result<Vec<PredictionMatrix>> {
    let a = align(&read_matrices(paths)?)?;
    for (path, dropped) in paths.iter().zip(&a.dropped) {
        if !dropped.is_empty() {
            warn!("{}: {} rows have no counterpart in every input and are dropped", path.display(), dropped.len());
        }
    }
    Ok(a.matrices)
}

fn policy_spec(cfg: &RunConfig, arity: usize, labels: usize) -> Result<PolicyNetworkSpec> {
    let mut spec = match arity {
        3 => PolicyNetworkSpec::trimodal(labels),
        _ => PolicyNetworkSpec { arity, ..PolicyNetworkSpec::bimodal(labels) },
    };
    let hidden: Vec<usize> = cfg.list("mlp_hidden")?;
    if !hidden.is_empty() {
        spec.sizes = hidden.into_iter().chain([labels]).collect();
    }
    let activations: Vec<Activation> = cfg.list("mlp_activations")?;
    if !activations.is_empty() {
        spec.activations = activations;
    } else if spec.activations.len() != spec.sizes.len() {
        spec.activations = vec![Activation::Sigmoid; spec.sizes.len()];
    }
    spec.validate()?;
    Ok(spec)
}

fn train_fusion(cfg: &RunConfig, policy: Policy, inputs: &[PredictionMatrix], train: &[PathBuf]) -> Result<FusionModel> {
    match policy {
        Policy::Max => return Ok(FusionModel::Max),
        Policy::Mean => return Ok(FusionModel::Mean),
        _ => {}
    }
    let matrices = if train.is_empty() {
        warn!("no --train matrices given; fitting the {policy} policy on the inputs themselves");
        inputs.to_vec()
    } else {
        ensure!(
            train.len() == inputs.len(),
            "{} training matrices for {} inputs; give one per modality in the same order",
            train.len(),
            inputs.len()
        );
        aligned(train)?
    };
    for (t, i) in matrices.iter().zip(inputs) {
        ensure!(t.modality == i.modality, "training matrix `{}` is paired with input `{}`", t.modality, i.modality);
    }
    let corpus = Corpus::load(cfg)?;
    corpus.check_hash(matrices[0].labels_hash, "the training matrices")?;
    let targets = corpus.targets_for(matrices[0].ids())?;
    Ok(match policy {
        Policy::Ridge => FusionModel::Ridge(train_ridge(
            &matrices,
            &targets,
            &RidgeConfig {
                alpha: cfg.get("alpha")?,
                fit_intercept: cfg.get("fit_intercept")?,
            },
        )?),
        _ => {
            let spec = policy_spec(cfg, matrices.len(), matrices[0].num_labels())?;
            let (net, _) = train_policy_network(&spec, &matrices, &targets, &train_config(cfg)?, |e| {
                info!("epoch {}: loss {:.5}, train micro-F1 {:.4}", e.epoch, e.loss, e.train_micro_f1)
            })?;
            FusionModel::Policy(net)
        }
    })
}

pub fn fuse(cfg: &RunConfig, inputs: &[PathBuf], train: &[PathBuf], name: Option<&str>) -> Result<()> {
    let matrices = aligned(inputs)?;
    let hash = matrices[0].labels_hash;
    let model = match cfg.path("model") {
        Some(path) => {
            let c = ModelContainer::read(&path)?;
            ensure!(
                meta_hash(&c, "labels_hash")? == hash,
                "fusion model {} was trained for labels hash {}, inputs have {}",
                path.display(),
                c.get("labels_hash")?,
                to_hex(hash)
            );
            let inputs_meta = c.get("inputs")?;
            let names = matrices.iter().map(|m| m.modality.as_str()).collect::<Vec<_>>().join("+");
            ensure!(inputs_meta == names, "fusion model expects inputs `{inputs_meta}`, got `{names}`");
            FusionModel::from_container(&c)?
        }
        None => {
            let policy: Policy = cfg.get("policy")?;
            train_fusion(cfg, policy, &matrices, train)?
        }
    };
    let fused = model.apply(&matrices)?;
    let name = name.map_or_else(|| model.policy().name().to_string(), str::to_string);

    let dir = cfg.echo("fuse")?;
    write_matrix(&fused, &dir.join(format!("{name}.csv")))?;
    if model.policy().trainable() && cfg.path("model").is_none() {
        let mut c = model.to_container();
        c.set("labels_hash", to_hex(hash))
            .set("inputs", matrices.iter().map(|m| m.modality.as_str()).collect::<Vec<_>>().join("+"))
            .set("seed", cfg.get::<u64>("seed")?);
        write_container(&c, &dir.join(format!("{name}.model")))?;
    }
    Ok(())
}

pub fn eval(cfg: &RunConfig, matrix_path: &Path) -> Result<()> {
    let matrix = PredictionMatrix::read(matrix_path)?;
    let corpus = Corpus::load(cfg)?;
    corpus.check_hash(matrix.labels_hash, "the prediction matrix")?;
    let truth = corpus.targets_for(matrix.ids())?;
    let report = EvalReport::evaluate(&matrix, &truth, corpus.vocab.labels(), cfg.get("tau")?, cfg.get("k")?)?;

    let dir = cfg.echo("eval")?;
    let stem = matrix_path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or(&matrix.modality)
        .to_string();
    for format in [ReportFormat::Tsv, ReportFormat::Markdown] {
        let path = dir.join(format!("{stem}.report.{}", format.extension()));
        std::fs::write(&path, emit_report(&report, format))?;
    }
    println!("{}\tmicro_f1\t{:.4}", report.name, report.micro_f1);
    for row in &report.ranked {
        println!("  {row}\t{:.4}", row.ratio());
    }
    Ok(())
}

/// Runs the finite-difference suite; `Ok(false)` when any kind fails.
pub fn gradcheck(cfg: &RunConfig, corrupt: bool) -> Result<bool> {
    let opts = GradcheckOptions {
        seed: cfg.get("seed")?,
        configs: cfg.get("configs")?,
        corrupt,
    };
    let reports = run_suite(&opts);
    println!("kind\tconfigs\tchecked\tworst_rel_err\tstatus");
    for r in &reports {
        let status = if r.passed() { "ok" } else { "FAIL" };
        println!("{}\t{}\t{}\t{:.3e}\t{status}", r.kind, r.configs, r.checked, r.worst);
    }
    let failed = reports.iter().filter(|r| !r.passed()).count();
    if failed > 0 {
        eprintln!("{failed} layer kinds exceed relative error {TOLERANCE:e}");
    }
    Ok(failed == 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_proportion() {
        assert_eq!(default_n_train(REFERENCE_RECORDS), REFERENCE_TRAIN);
        assert_eq!(default_n_train(0), 0);
        assert_eq!(default_n_train(100), 76);
    }
}

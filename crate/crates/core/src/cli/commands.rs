use std::io::Write;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::align::{monotonic_viterbi, AttentionMap};
use crate::analysis::{
    embeddings_tsv, mean_frame, report_to_tsv, similarity_curve, speaker_probe, zero_shot_report, AcousticEncoder,
    PhonemeEncoder, ZeroShotReport,
};
use crate::artic::{featurize_utterance_with, FeatureTable, SegmentOptions, WORD_BOUNDARY};
use crate::checkpoint::{Checkpoint, Tensor};
use crate::embedding::{
    synthetic_gold, teacher, train_embedding, EmbeddingConfig, EmbeddingParams, GoldEmbeddingSet, TrainOptions,
};
use crate::error::{Error, Result};
use crate::meta_learn::{
    finetune, load_corpus, meta_train, random_inventory, AcousticModel, FinetuneOptions, MetaTrainConfig, TaskBatch,
    TaskFamily, TaskPool, TaskSpec,
};
use crate::optim::AdamConfig;

use super::config::{RunConfig, SyntheticConfig};
use super::Command;

/// Output directory that remembers what was written, for the manifest.
pub struct OutDir {
    root: PathBuf,
    files: Vec<String>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        Ok(OutDir { root: root.to_path_buf(), files: Vec::new() })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(name);
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        Ok(())
    }

    /// Echoes the config and writes `manifest.tsv` (`sha256<TAB>file`,
    /// sorted by file name).
    pub fn finish(mut self, config: &RunConfig) -> Result<()> {
        self.write("config.toml", config.to_toml().as_bytes())?;
        self.files.sort();
        let mut manifest = String::new();
        for name in &self.files {
            let path = self.root.join(name);
            let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
            manifest.push_str(&format!("{}\t{name}\n", hex::encode(Sha256::digest(&bytes))));
        }
        let path = self.root.join("manifest.tsv");
        std::fs::write(&path, manifest).map_err(|e| Error::io(&path, e))
    }
}

fn require_out(config: &RunConfig) -> Result<OutDir> {
    let out = config.out.as_ref().ok_or_else(|| Error::InvalidArgument("--out is required for this command".into()))?;
    OutDir::create(out)
}

fn load_table(config: &RunConfig) -> Result<FeatureTable> {
    match &config.table {
        Some(path) => FeatureTable::load(path),
        None => Ok(FeatureTable::bundled()),
    }
}

fn numbers(values: &[f64]) -> String {
    values.iter().map(f64::to_string).collect::<Vec<_>>().join("\t")
}

/// Task specs for the synthetic family: `cfg.tasks` training tasks whose
/// inventories avoid the held-out symbols, then one unseen task that always
/// contains them.
pub fn synthetic_tasks(table: &FeatureTable, cfg: &SyntheticConfig) -> Result<Vec<TaskSpec>> {
    for s in &cfg.heldout {
        if table.row_of(s).is_none() {
            return Err(Error::HeldoutNotInTable(s.clone()));
        }
    }
    let family = TaskFamily::new(cfg.frame_dim, cfg.offset_scale, cfg.family_seed);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.family_seed);
    rng.set_stream(2);
    (0..=cfg.tasks)
        .map(|id| {
            let unseen = id == cfg.tasks;
            let exclude: &[String] = if unseen { &[] } else { &cfg.heldout };
            let mut inventory = random_inventory(table, cfg.inventory_size, exclude, &mut rng);
            if unseen {
                for s in &cfg.heldout {
                    let canonical = table.symbol(table.row_of(s).expect("checked above")).to_string();
                    if !inventory.contains(&canonical) {
                        inventory.push(canonical);
                    }
                }
                inventory.sort_by_key(|s| table.row_of(s));
            }
            let spec = family.task(id, inventory, cfg.noise, cfg.family_seed.wrapping_add(1000 + id as u64));
            if spec.inventory.is_empty() {
                return Err(Error::InvalidConfig("synthetic inventory is empty".into()));
            }
            Ok(spec)
        })
        .collect()
}

pub(super) fn execute(command: &Command, config: &RunConfig) -> Result<()> {
    match command {
        Command::Featurize(a) => featurize(config, a.text.as_deref(), a.file.as_deref()),
        Command::EmbedTrain(_) => embed_train(config),
        Command::MetaTrain(_) => meta_train_cmd(config),
        Command::Finetune(_) => finetune_cmd(config),
        Command::Align(_) => align(config),
        Command::Analyze(_) => analyze(config),
    }
}

fn featurize(config: &RunConfig, text: Option<&str>, file: Option<&Path>) -> Result<()> {
    let table = load_table(config)?;
    let input = match (text, file) {
        (Some(t), _) => t.to_string(),
        (None, Some(path)) => std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?,
        (None, None) => return Err(Error::InvalidArgument("give an IPA string or --file".into())),
    };
    let mut opts = SegmentOptions::default();
    if config.featurize.word_boundary {
        opts = opts.with_word_boundary(WORD_BOUNDARY);
    }
    let mut tsv = String::new();
    for line in input.lines() {
        for v in featurize_utterance_with(line, &table, &opts)? {
            tsv.push_str(&numbers(v.as_slice()));
            tsv.push('\n');
        }
    }
    print!("{tsv}");
    if config.out.is_some() {
        let mut out = require_out(config)?;
        out.write("features.tsv", tsv.as_bytes())?;
        out.finish(config)?;
    }
    Ok(())
}

fn embed_train(config: &RunConfig) -> Result<()> {
    let table = load_table(config)?;
    let e = &config.embed_train;
    let gold = match &e.gold {
        Some(path) => GoldEmbeddingSet::load(path, &table, e.block)?,
        None => {
            let t = teacher(e.teacher_hidden, e.output_dim, e.teacher_gain, e.teacher_seed);
            synthetic_gold(&table, table.symbols(), e.block, &t)?
        }
    };
    let model = EmbeddingConfig {
        architecture: e.architecture,
        input_dim: e.block.dim(),
        hidden_dim: e.hidden_dim,
        output_dim: gold.output_dim(),
        seed: config.seed,
    };
    let options = TrainOptions { epochs: e.epochs, batch_size: e.batch_size, adam: AdamConfig::with_lr(e.lr) };
    let mut out = require_out(config)?;
    let run = train_embedding(&model, &gold, &options)?;

    let mut ck = Checkpoint::new();
    for t in run.params.to_tensors("embedding.") {
        ck.push(t);
    }
    ck.push(Tensor::scalar("embedding.final_avg_distance", run.final_avg_distance));
    out.write("embedding.ckpt", &ck.to_bytes())?;
    let mut history = String::from("epoch\tavg_distance\n");
    for (epoch, d) in run.history.iter().enumerate() {
        history.push_str(&format!("{epoch}\t{d}\n"));
    }
    out.write("history.tsv", history.as_bytes())?;
    out.write("final_distance.txt", format!("{}\n", run.final_avg_distance).as_bytes())?;
    out.finish(config)?;
    println!("{}", run.final_avg_distance);
    Ok(())
}

/// Training pools from the corpus file, or from the synthetic family.
fn training_pools(config: &RunConfig, table: &FeatureTable) -> Result<Vec<TaskPool>> {
    match &config.meta_train.corpus {
        Some(path) => {
            let records = load_corpus(path)?;
            Ok(TaskPool::from_corpus(&records, table)?.into_iter().map(|(_, p)| p).collect())
        }
        None => {
            let specs = synthetic_tasks(table, &config.synthetic)?;
            specs[..config.synthetic.tasks].iter().map(|s| s.pool(table)).collect()
        }
    }
}

fn meta_train_cmd(config: &RunConfig) -> Result<()> {
    let table = load_table(config)?;
    let m = &config.meta_train;
    let pools = training_pools(config, &table)?;
    let mt = MetaTrainConfig {
        hidden: m.hidden,
        batch_size: m.batch_size,
        outer: AdamConfig::with_lr(m.lr),
        inner_steps: m.inner_steps,
        inner_lr: m.inner_lr,
        procedure: m.procedure,
        seed: config.seed,
    };
    let mut out = require_out(config)?;
    let run = meta_train(&mt, &pools, m.steps)?;

    let mut ck = Checkpoint::new();
    for t in run.model.params_to_tensors(&run.state.params, "model.") {
        ck.push(t);
    }
    for t in run.state.optimizer_tensors() {
        ck.push(t);
    }
    out.write("meta.ckpt", &ck.to_bytes())?;
    let mut log = String::from("step\tloss\n");
    for (i, l) in run.losses.iter().enumerate() {
        log.push_str(&format!("{}\t{l}\n", i + 1));
    }
    out.write("loss.tsv", log.as_bytes())?;
    out.finish(config)?;
    if let Some(last) = run.losses.last() {
        println!("{last}");
    }
    Ok(())
}

/// Fine-tuning batches: one per corpus utterance, or the unseen synthetic
/// task's whole inventory as a single batch.
fn finetune_batches(config: &RunConfig, table: &FeatureTable) -> Result<Vec<TaskBatch>> {
    match &config.finetune.corpus {
        Some(path) => {
            let records = load_corpus(path)?;
            let mut batches = Vec::with_capacity(records.len());
            for (i, r) in records.iter().enumerate() {
                let pools = TaskPool::from_corpus(std::slice::from_ref(r), table).map_err(|e| match e {
                    Error::MalformedRow { reason, .. } => Error::MalformedRow { line: i + 1, reason },
                    other => other,
                })?;
                if let Some((_, pool)) = pools.into_iter().next() {
                    if !pool.inputs.is_empty() {
                        batches.push(pool.as_batch());
                    }
                }
            }
            Ok(batches)
        }
        None => {
            let specs = synthetic_tasks(table, &config.synthetic)?;
            Ok(vec![specs[config.synthetic.tasks].full_batch(table)?])
        }
    }
}

fn finetune_cmd(config: &RunConfig) -> Result<()> {
    let table = load_table(config)?;
    let f = &config.finetune;
    let meta_path = f.meta.as_ref().ok_or_else(|| Error::InvalidArgument("--meta checkpoint is required".into()))?;
    let ck = Checkpoint::load(meta_path)?;
    let (model, init) = AcousticModel::params_from_checkpoint(&ck, "model.")?;
    let corpus = finetune_batches(config, &table)?;
    let options = FinetuneOptions { steps: f.steps, adam: AdamConfig::with_lr(f.lr), snapshot_every: f.snapshot_every };
    let mut out = require_out(config)?;
    let run = finetune(&model, &init, &corpus, &options)?;

    let mut adapted = Checkpoint::new();
    for t in model.params_to_tensors(&run.params, "model.") {
        adapted.push(t);
    }
    out.write("adapted.ckpt", &adapted.to_bytes())?;
    let mut log = String::from("step\tloss\n");
    for (i, l) in run.losses.iter().enumerate() {
        log.push_str(&format!("{i}\t{l}\n"));
    }
    out.write("loss.tsv", log.as_bytes())?;

    // speaker proxy over every input seen in the corpus
    let battery: Vec<Vec<f64>> = corpus.iter().flat_map(|b| b.inputs.iter().cloned()).collect();
    let targets: Vec<Vec<f64>> = corpus.iter().flat_map(|b| b.targets.iter().cloned()).collect();
    let reference = mean_frame(&targets)?;
    let snapshots = if run.snapshots.is_empty() { vec![(f.steps, run.params.clone())] } else { run.snapshots };
    let curve = similarity_curve(&snapshots, |p| speaker_probe(&model, p, &battery), &reference)?;
    out.write("similarity.tsv", curve.to_tsv().as_bytes())?;
    out.finish(config)?;
    println!("{}", run.losses.last().expect("initial loss is always logged"));
    Ok(())
}

fn align(config: &RunConfig) -> Result<()> {
    let path =
        config.align.attention.as_ref().ok_or_else(|| Error::InvalidArgument("attention file is required".into()))?;
    let att = AttentionMap::load_tsv(path)?;
    let durations = monotonic_viterbi(&att)?;
    println!("{durations}");
    if config.out.is_some() {
        let mut out = require_out(config)?;
        out.write("durations.txt", format!("{durations}\n").as_bytes())?;
        out.finish(config)?;
    }
    Ok(())
}

fn analyze(config: &RunConfig) -> Result<()> {
    let table = load_table(config)?;
    let a = &config.analyze;
    let path = a.checkpoint.as_ref().ok_or_else(|| Error::InvalidArgument("--checkpoint is required".into()))?;
    let ck = Checkpoint::load(path)?;
    let heldout = if a.heldout.is_empty() { &config.synthetic.heldout } else { &a.heldout };
    let mut out = require_out(config)?;

    let (reports, export) = if ck.get("model.w1").is_some() {
        let (model, params) = AcousticModel::params_from_checkpoint(&ck, "model.")?;
        let enc = AcousticEncoder { model: &model, params: &params };
        report_and_export(&table, heldout, &enc, a.k, a.collapse_tolerance)?
    } else {
        let params = EmbeddingParams::from_checkpoint(&ck, "embedding.")?;
        report_and_export(&table, heldout, &params, a.k, a.collapse_tolerance)?
    };
    out.write("zero_shot.tsv", report_to_tsv(&reports).as_bytes())?;
    out.write("embeddings.tsv", export.as_bytes())?;
    out.finish(config)?;

    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    for r in &reports {
        let nearest = r.encoded.first().map_or("-", |n| n.symbol.as_str());
        let _ = writeln!(lock, "{}\tnearest={nearest}\tcollapsed={}", r.symbol, r.collapsed);
    }
    Ok(())
}

fn report_and_export(
    table: &FeatureTable,
    heldout: &[String],
    encoder: &impl PhonemeEncoder,
    k: usize,
    tolerance: f64,
) -> Result<(Vec<ZeroShotReport>, String)> {
    Ok((zero_shot_report(table, heldout, encoder, k, tolerance)?, embeddings_tsv(table, heldout, encoder)?))
}

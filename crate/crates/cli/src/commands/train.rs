use std::collections::HashSet;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use emokit::corpus::{load_labels, PredictionRecord};
use emokit::evaluation::{binarize, macro_f1, MultiHot};
use emokit::partitioning::PartitionPlan;
use emokit::trainer::optim::AdamWConfig;
use emokit::trainer::{build_examples, load_feature_dir, predict_examples, train, Checkpoint, Example, TrainConfig};

use super::{load_taxonomy, write_jsonl_file, Ctx};
use crate::manifest::RunManifest;

#[derive(Debug, clap::Args, Serialize)]
pub struct Args {
    /// Directory of feature files (<stem>.bin + <stem>.json)
    #[arg(long)]
    pub features: PathBuf,
    /// Label JSONL (dropped labels are skipped)
    #[arg(long)]
    pub labels: PathBuf,
    /// Built-in taxonomy name or taxonomy JSON file
    #[arg(long, default_value = "pod-primary")]
    pub taxonomy: String,
    /// Fold plan; train/dev/test come from --fold
    #[arg(long, requires = "fold")]
    pub plan: Option<PathBuf>,
    /// 1-based fold of --plan
    #[arg(long, requires = "plan")]
    pub fold: Option<usize>,
    /// Class-balance beta
    #[arg(long, default_value_t = 0.9999)]
    pub beta: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.01)]
    pub weight_decay: f64,
    /// Maximum epochs; the epoch with the lowest dev loss is kept
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    /// Hidden width of the head
    #[arg(long, default_value_t = 256)]
    pub hidden: usize,
    /// Share of labeled utterances held out for dev when no plan is given
    #[arg(long, default_value_t = 0.2)]
    pub dev_fraction: f64,
    /// Checkpoint JSON to write
    #[arg(long)]
    pub out: PathBuf,
    /// Write predicted distributions for the test split (dev split without a plan)
    #[arg(long)]
    pub predictions: Option<PathBuf>,
}

struct Splits {
    train: Vec<Example>,
    dev: Vec<Example>,
    test: Vec<Example>,
}

fn select(examples: &[Example], ids: &[String]) -> Vec<Example> {
    let keep: HashSet<&str> = ids.iter().map(String::as_str).collect();
    examples.iter().filter(|e| keep.contains(e.utterance_id.as_str())).cloned().collect()
}

fn split(examples: Vec<Example>, args: &Args, seed: u64) -> Result<Splits> {
    if let (Some(plan), Some(fold)) = (&args.plan, args.fold) {
        let plan = PartitionPlan::from_json_file(plan)?;
        let f = plan
            .fold(fold)
            .with_context(|| format!("plan {} has {} folds, not {fold}", plan.scheme, plan.folds.len()))?;
        return Ok(Splits {
            train: select(&examples, &f.train),
            dev: select(&examples, &f.dev),
            test: select(&examples, &f.test),
        });
    }
    if !(args.dev_fraction > 0.0 && args.dev_fraction < 1.0) {
        bail!("--dev-fraction must be in (0, 1), got {}", args.dev_fraction);
    }
    let mut shuffled = examples;
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_dev = ((shuffled.len() as f64 * args.dev_fraction).round() as usize).max(1);
    let train = shuffled.split_off(n_dev.min(shuffled.len()));
    Ok(Splits {
        train,
        test: shuffled.clone(),
        dev: shuffled,
    })
}

pub fn run(ctx: &Ctx, args: Args) -> Result<()> {
    let taxonomy = load_taxonomy(&args.taxonomy)?;
    let stacks = load_feature_dir(&args.features)?;
    let labels = load_labels(&args.labels, &taxonomy)?;
    let examples = build_examples(&stacks, &labels, &taxonomy)?;
    let splits = split(examples, &args, ctx.seed)?;

    let config = TrainConfig {
        hidden: args.hidden,
        batch_size: args.batch_size,
        max_epochs: args.epochs,
        beta: args.beta,
        optimizer: AdamWConfig {
            lr: args.lr,
            weight_decay: args.weight_decay,
            ..AdamWConfig::default()
        },
        seed: ctx.seed,
    };
    log::info!(
        "train {} / dev {} / test {} examples",
        splits.train.len(),
        splits.dev.len(),
        splits.test.len()
    );
    let outcome = train(&splits.train, &splits.dev, &config)?;
    let checkpoint = Checkpoint::new(&outcome, &config, &taxonomy);
    checkpoint.save(&args.out)?;

    let probs = predict_examples(&outcome.params, &splits.test)?;
    let preds: Vec<MultiHot> = probs.iter().map(|p| binarize(p)).collect();
    let golds: Vec<MultiHot> = splits.test.iter().map(|e| binarize(&e.target)).collect();
    let score = macro_f1(&preds, &golds)?;
    println!(
        "best epoch {} (dev loss {:.6}), held-out macro-F1 {:.4} over {} samples",
        outcome.best_epoch, outcome.best_dev_loss, score.macro_f1, score.n_samples
    );
    let weights = outcome.params.layer_weights();
    let shown: Vec<String> = weights.normalized().iter().map(|w| format!("{w:.4}")).collect();
    println!("layer weights [{}]", shown.join(", "));

    let mut manifest = RunManifest::new("train", ctx.seed, &args)?;
    manifest.input(&args.features)?;
    manifest.input(&args.labels)?;
    if let Some(p) = &args.plan {
        manifest.input(p)?;
    }
    manifest.output(&args.out)?;
    if let Some(path) = &args.predictions {
        let records: Vec<PredictionRecord> = splits
            .test
            .iter()
            .zip(probs)
            .map(|(e, distribution)| PredictionRecord {
                utterance_id: e.utterance_id.clone(),
                distribution,
            })
            .collect();
        write_jsonl_file(path, &records)?;
        manifest.output(path)?;
    }
    ctx.finish(&manifest, Some(&args.out))
}

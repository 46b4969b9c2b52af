//! Command implementations behind the `pal` binary.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use pal_core::data::{generate_synthetic, Dataset, Split};
use pal_core::trainer::{meta_train, pretrain, EpochLog, EvalSettings, PalModel};

use crate::ablation::{ablation_csv, run_seed, summarize, AblationData};
use crate::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
use crate::config::{fingerprint, RunConfig};
use crate::error::{PalError, Result};
use crate::features::{load_features, save_features};
use crate::parallel::{evaluate_parallel, threads_from_env};
use crate::records::{
    fingerprint_hex, now, training_log_csv, write_json, write_text, Completion, Decisions, EvalRecord, RunManifest,
};

#[derive(Debug, Parser)]
#[command(name = "pal", version, about = "Few-shot action classification with prototype-centred attentive learning")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML run configuration; built-in synthetic defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the three synthetic feature splits.
    GenData {
        #[command(flatten)]
        common: Common,
    },
    /// Supervised pretraining on the meta-train split.
    Pretrain {
        #[command(flatten)]
        common: Common,
        /// Directory holding the split feature files.
        #[arg(long)]
        data: PathBuf,
    },
    /// Episodic training from a pretrained checkpoint.
    MetaTrain {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, required_unless_present = "from_scratch", conflicts_with = "from_scratch")]
        checkpoint: Option<PathBuf>,
        /// Start from a freshly initialised model instead of a checkpoint.
        #[arg(long)]
        from_scratch: bool,
        /// Override the number of meta-training epochs.
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Evaluate a checkpoint on meta-test episodes.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        shots: Option<u64>,
        #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
        ways: Option<u64>,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        episodes: Option<u64>,
    },
    /// Pretrained-only, +attention, +prototype loss and both, per shot count.
    Ablate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        /// Shared pretrained model; each seed pretrains its own when omitted.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Override the number of seeds.
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        seeds: Option<u64>,
    },
}

/// Feature file of `split` inside a data directory.
pub fn split_path(dir: &Path, split: Split) -> PathBuf {
    dir.join(format!("{}.fsfe", split.name()))
}

fn load_split(dir: &Path, split: Split) -> Result<Dataset> {
    let ds = load_features(&split_path(dir, split))?;
    Ok(ds)
}

fn load_optional_split(dir: &Path, split: Split) -> Result<Option<Dataset>> {
    let p = split_path(dir, split);
    if p.exists() {
        load_split(dir, split).map(Some)
    } else {
        Ok(None)
    }
}

struct Run {
    out: PathBuf,
    name: &'static str,
}

impl Run {
    /// Create the output directory and write the manifest.
    fn start(
        name: &'static str,
        common: &Common,
        cfg: &RunConfig,
        seeds: Vec<u64>,
        inputs: Vec<PathBuf>,
        outputs: &[&str],
    ) -> Result<Run> {
        fs::create_dir_all(&common.out).map_err(|e| PalError::io(&common.out, e))?;
        let manifest = RunManifest {
            command: name.into(),
            code_version: env!("CARGO_PKG_VERSION").into(),
            started_at: now(),
            seeds,
            config: cfg.clone(),
            config_fingerprint: fingerprint_hex(fingerprint(&cfg.train())),
            inputs,
            outputs: outputs.iter().map(|o| common.out.join(o)).collect(),
            decisions: Decisions::from_config(cfg),
        };
        write_json(&common.out.join(format!("{name}.manifest.json")), &manifest)?;
        Ok(Run {
            out: common.out.clone(),
            name,
        })
    }

    fn path(&self, file: &str) -> PathBuf {
        self.out.join(file)
    }

    fn finish(self) -> Result<()> {
        write_json(
            &self.out.join(format!("{}.completion.json", self.name)),
            &Completion {
                finished_at: now(),
                status: "ok".into(),
            },
        )
    }
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let cfg = RunConfig::load(common.config.as_deref())?;
    cfg.validate()?;
    Ok(cfg)
}

fn report_epochs(stage: &str, logs: &[EpochLog]) {
    for l in logs {
        let val = l.val_acc.map(|v| format!(" val_acc {v:.4}")).unwrap_or_default();
        let acc = l.train_acc.map(|v| format!(" train_acc {v:.4}")).unwrap_or_default();
        eprintln!("{stage} epoch {} lr {:.3e} loss {:.5}{acc}{val}", l.epoch, l.lr, l.loss_total);
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData { common } => gen_data(&common),
        Command::Pretrain { common, data } => cmd_pretrain(&common, &data),
        Command::MetaTrain {
            common,
            data,
            checkpoint,
            from_scratch,
            epochs,
        } => cmd_meta_train(&common, &data, checkpoint.as_deref(), from_scratch, epochs),
        Command::Eval {
            common,
            data,
            checkpoint,
            shots,
            ways,
            episodes,
        } => cmd_eval(&common, &data, &checkpoint, shots, ways, episodes),
        Command::Ablate {
            common,
            data,
            checkpoint,
            seeds,
        } => cmd_ablate(&common, &data, checkpoint.as_deref(), seeds),
    }
}

fn gen_data(common: &Common) -> Result<()> {
    let cfg = load_config(common)?;
    let specs = cfg.data.specs();
    let files: Vec<String> = specs
        .iter()
        .filter(|s| s.classes > 0)
        .map(|s| format!("{}.fsfe", s.split.name()))
        .collect();
    let names: Vec<&str> = files.iter().map(String::as_str).collect();
    let run = Run::start("gen-data", common, &cfg, vec![common.seed], vec![], &names)?;
    for spec in specs.iter().filter(|s| s.classes > 0) {
        let mut rng = pal_core::rng_stream(common.seed, u64::from(spec.split.tag()));
        let synth = generate_synthetic(spec, &mut rng)?;
        let source = format!("synthetic gaussian clusters, seed {}", common.seed);
        save_features(&synth.dataset, &split_path(&common.out, spec.split), &source)?;
        eprintln!(
            "{}: {} classes, {} videos, {} outliers",
            spec.split.name(),
            spec.classes,
            synth.dataset.len(),
            synth.outlier_ids.len()
        );
    }
    run.finish()
}

fn cmd_pretrain(common: &Common, data: &Path) -> Result<()> {
    let cfg = load_config(common)?;
    let train = load_split(data, Split::MetaTrain)?;
    let run = Run::start(
        "pretrain",
        common,
        &cfg,
        vec![common.seed],
        vec![split_path(data, Split::MetaTrain)],
        &["pretrained.fsck", "pretrain_log.csv"],
    )?;
    let tc = cfg.train();
    let mut rng = pal_core::rng_from_seed(common.seed);
    let init = PalModel::init(train.d_raw(), train.classes().len(), &tc.model, &mut rng);
    let (model, logs) = pretrain(&init, &train, &tc, &mut rng)?;
    report_epochs("pretrain", &logs);
    write_text(&run.path("pretrain_log.csv"), &training_log_csv(&logs))?;
    save_checkpoint(
        &Checkpoint {
            model,
            fingerprint: fingerprint(&tc),
        },
        &run.path("pretrained.fsck"),
    )?;
    run.finish()
}

fn cmd_meta_train(
    common: &Common,
    data: &Path,
    checkpoint: Option<&Path>,
    from_scratch: bool,
    epochs: Option<usize>,
) -> Result<()> {
    let mut cfg = RunConfig::load(common.config.as_deref())?;
    if let Some(e) = epochs {
        cfg.meta.epochs = e;
        cfg.meta.schedule.milestones.retain(|&m| m < e);
    }
    cfg.meta.from_scratch = from_scratch;
    cfg.validate()?;
    let train = load_split(data, Split::MetaTrain)?;
    let val = load_optional_split(data, Split::MetaVal)?;
    let mut inputs = vec![split_path(data, Split::MetaTrain)];
    inputs.extend(checkpoint.map(Path::to_path_buf));
    let run = Run::start("meta-train", common, &cfg, vec![common.seed], inputs, &["meta.fsck", "meta_log.csv"])?;
    let tc = cfg.train();
    let start = match checkpoint {
        Some(p) => load_checkpoint(p)?,
        None => Checkpoint {
            model: PalModel::init(train.d_raw(), 0, &tc.model, &mut pal_core::rng_stream(common.seed, 1)),
            fingerprint: fingerprint(&tc),
        },
    };
    let mut rng = pal_core::rng_from_seed(common.seed);
    let (model, logs) = meta_train(&start.model, &train, val.as_ref(), &tc, &mut rng)?;
    report_epochs("meta-train", &logs);
    write_text(&run.path("meta_log.csv"), &training_log_csv(&logs))?;
    // nothing trained: keep the input checkpoint byte for byte
    let out = if logs.is_empty() {
        start
    } else {
        Checkpoint {
            model,
            fingerprint: fingerprint(&tc),
        }
    };
    save_checkpoint(&out, &run.path("meta.fsck"))?;
    run.finish()
}

fn cmd_eval(
    common: &Common,
    data: &Path,
    checkpoint: &Path,
    shots: Option<u64>,
    ways: Option<u64>,
    episodes: Option<u64>,
) -> Result<()> {
    let mut cfg = load_config(common)?;
    if let Some(k) = shots {
        cfg.episode.shot = k as usize;
    }
    if let Some(n) = ways {
        cfg.episode.way = n as usize;
    }
    if let Some(e) = episodes {
        cfg.eval.episodes = e as usize;
    }
    let threads = threads_from_env()?;
    let test = load_split(data, Split::MetaTest)?;
    let ck = load_checkpoint(checkpoint)?;
    let run = Run::start(
        "eval",
        common,
        &cfg,
        vec![common.seed],
        vec![split_path(data, Split::MetaTest), checkpoint.to_path_buf()],
        &["eval.json"],
    )?;
    let settings = EvalSettings::from_config(&cfg.train(), cfg.eval.episodes, common.seed);
    let report = evaluate_parallel(&ck.model, &test, &settings, threads)?;
    let record = EvalRecord {
        way: cfg.episode.way,
        shot: cfg.episode.shot,
        query: cfg.episode.query,
        seed: common.seed,
        checkpoint_fingerprint: fingerprint_hex(ck.fingerprint),
        report,
    };
    write_json(&run.path("eval.json"), &record)?;
    println!(
        "{}-way {}-shot over {} episodes: accuracy {:.4} ± {:.4}",
        record.way, record.shot, report.episodes, report.mean_accuracy, report.ci95
    );
    run.finish()
}

fn cmd_ablate(common: &Common, data: &Path, checkpoint: Option<&Path>, seeds: Option<u64>) -> Result<()> {
    let mut cfg = load_config(common)?;
    if let Some(s) = seeds {
        cfg.ablation.seeds = s as usize;
    }
    let threads = threads_from_env()?;
    let train = load_split(data, Split::MetaTrain)?;
    let val = load_optional_split(data, Split::MetaVal)?;
    let test = load_split(data, Split::MetaTest)?;
    let shared = checkpoint.map(load_checkpoint).transpose()?;
    let seed_list: Vec<u64> = (0..cfg.ablation.seeds as u64).map(|i| common.seed + i).collect();
    let mut inputs = vec![split_path(data, Split::MetaTrain), split_path(data, Split::MetaTest)];
    inputs.extend(checkpoint.map(Path::to_path_buf));
    let run = Run::start("ablate", common, &cfg, seed_list.clone(), inputs, &["ablation.csv", "ablation.json"])?;
    let ad = AblationData {
        train: &train,
        val: val.as_ref(),
        test: &test,
    };
    let mut results = Vec::new();
    for &seed in &seed_list {
        let r = run_seed(&cfg, &ad, seed, shared.as_ref().map(|c| &c.model), threads)?;
        for x in &r {
            eprintln!("seed {seed} {}-shot {:<10} {:.4}", x.shot, x.variant.name(), x.accuracy);
        }
        results.extend(r);
    }
    let cells = summarize(&results);
    let table = ablation_csv(&cells);
    write_text(&run.path("ablation.csv"), &table)?;
    write_json(
        &run.path("ablation.json"),
        &serde_json::json!({ "cells": cells, "runs": results }),
    )?;
    print!("{table}");
    run.finish()
}

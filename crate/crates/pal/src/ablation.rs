//! Component ablation: the pretrained model alone, and meta-trained with
//! attention, with the prototype-centred loss, or with both.

use pal_core::data::Dataset;
use pal_core::trainer::{meta_train, pretrain, EvalSettings, PalModel, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::Result;
use crate::parallel::evaluate_parallel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Pretrained head, no attention, no episodic training.
    Baseline,
    /// Meta-trained with attention and `lambda = 0`.
    Hal,
    /// Meta-trained without attention, prototype-centred loss on.
    Pcl,
    HalPcl,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Baseline, Variant::Hal, Variant::Pcl, Variant::HalPcl];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Baseline => "pretrained",
            Variant::Hal => "hal",
            Variant::Pcl => "pcl",
            Variant::HalPcl => "hal+pcl",
        }
    }

    /// Meta-training settings for this variant, `None` for the baseline.
    /// The enabled `lambda` is the configured one.
    pub fn configure(self, base: &TrainConfig) -> Option<TrainConfig> {
        let (hal, pcl) = match self {
            Variant::Baseline => return None,
            Variant::Hal => (true, false),
            Variant::Pcl => (false, true),
            Variant::HalPcl => (true, true),
        };
        let mut c = base.clone();
        c.meta.hal = hal;
        if !pcl {
            c.meta.lambda = 0.0;
        }
        Some(c)
    }
}

/// Accuracy of one variant on one seed and shot count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub shot: usize,
    pub variant: Variant,
    pub accuracy: f64,
    pub ci95: f64,
}

/// Datasets shared by every variant of one seed.
pub struct AblationData<'a> {
    pub train: &'a Dataset,
    pub val: Option<&'a Dataset>,
    pub test: &'a Dataset,
}

/// All variants for one seed. Without `pretrained` the model is pretrained
/// here from `seed`; every variant starts from the same pretrained model
/// and meta-trains from the same random stream.
pub fn run_seed(
    cfg: &RunConfig,
    data: &AblationData<'_>,
    seed: u64,
    pretrained: Option<&PalModel>,
    threads: Option<usize>,
) -> Result<Vec<SeedResult>> {
    let train_cfg = cfg.train();
    let base = match pretrained {
        Some(m) => m.clone(),
        None => {
            let mut rng = pal_core::rng_from_seed(seed);
            let init = PalModel::init(
                data.train.d_raw(),
                data.train.classes().len(),
                &train_cfg.model,
                &mut rng,
            );
            pretrain(&init, data.train, &train_cfg, &mut rng)?.0
        }
    };
    let mut out = Vec::new();
    for &shot in &cfg.ablation.shots {
        let mut shot_cfg = train_cfg.clone();
        shot_cfg.episode.shot = shot;
        let settings = EvalSettings::from_config(&shot_cfg, cfg.ablation.eval_episodes, seed ^ 0xe7a1);
        for variant in Variant::ALL {
            let model = match variant.configure(&shot_cfg) {
                None => {
                    let mut m = base.clone();
                    m.hal = None;
                    m
                }
                Some(vc) => {
                    let mut rng = pal_core::rng_stream(seed, 1 + shot as u64);
                    meta_train(&base, data.train, data.val, &vc, &mut rng)?.0
                }
            };
            let report = evaluate_parallel(&model, data.test, &settings, threads)?;
            out.push(SeedResult {
                seed,
                shot,
                variant,
                accuracy: report.mean_accuracy,
                ci95: report.ci95,
            });
        }
    }
    Ok(out)
}

/// One table cell: a variant at one shot count over all seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub variant: Variant,
    pub shot: usize,
    pub seeds: usize,
    pub mean_accuracy: f64,
    /// Across-seed 95% half-width; the episode-level one for a single seed.
    pub ci95: f64,
    pub per_seed: Vec<f64>,
}

pub fn summarize(results: &[SeedResult]) -> Vec<Cell> {
    let mut keys: Vec<(usize, Variant)> = results.iter().map(|r| (r.shot, r.variant)).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .map(|(shot, variant)| {
            let rows: Vec<&SeedResult> = results.iter().filter(|r| r.shot == shot && r.variant == variant).collect();
            let n = rows.len() as f64;
            let per_seed: Vec<f64> = rows.iter().map(|r| r.accuracy).collect();
            let mean = per_seed.iter().sum::<f64>() / n;
            let ci95 = if rows.len() > 1 {
                let var = per_seed.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0);
                1.959_963_984_540_054 * (var / n).sqrt()
            } else {
                rows[0].ci95
            };
            Cell {
                variant,
                shot,
                seeds: rows.len(),
                mean_accuracy: mean,
                ci95,
                per_seed,
            }
        })
        .collect()
}

pub const ABLATION_HEADER: [&str; 5] = ["variant", "shot", "seeds", "mean_accuracy", "ci95"];

pub fn ablation_csv(cells: &[Cell]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(ABLATION_HEADER).expect("in-memory write");
    for c in cells {
        w.write_record([
            c.variant.name().to_string(),
            c.shot.to_string(),
            c.seeds.to_string(),
            format!("{:.6}", c.mean_accuracy),
            format!("{:.6}", c.ci95),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is UTF-8")
}

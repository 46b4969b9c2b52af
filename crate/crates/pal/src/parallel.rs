//! Multi-threaded evaluation with results identical to the sequential
//! evaluator: every episode owns its random stream and outcomes are merged
//! in episode order.

use pal_core::data::Dataset;
use pal_core::trainer::{evaluate_episode, EvalReport, EvalSettings, PalModel};
use rayon::prelude::*;

use crate::error::{PalError, Result};

/// Environment variable capping evaluation threads.
pub const THREADS_ENV: &str = "PAL_THREADS";

/// Thread cap from `PAL_THREADS`; unset means all available cores.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(PalError::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        },
    }
}

pub fn evaluate_parallel(
    model: &PalModel,
    ds: &Dataset,
    settings: &EvalSettings,
    threads: Option<usize>,
) -> Result<EvalReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| PalError::Config(format!("thread pool: {e}")))?;
    let outcomes = pool.install(|| {
        (0..settings.episodes as u64)
            .into_par_iter()
            .map(|i| evaluate_episode(model, ds, settings, i))
            .collect::<pal_core::Result<Vec<_>>>()
    })?;
    Ok(EvalReport::from_outcomes(&outcomes, settings.objective.lambda))
}

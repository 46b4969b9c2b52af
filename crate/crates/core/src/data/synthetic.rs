use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec::Vec;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Dataset, Split, VideoSample};
use crate::{Error, Matrix, Result};

/// Parameters of the Gaussian-cluster video benchmark.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct SyntheticSpec {
    pub classes: usize,
    pub per_class: usize,
    pub d_raw: usize,
    pub frames: usize,
    /// Standard deviation of class centres around the origin.
    pub sigma_between: f64,
    /// Per-dimension standard deviation of video latents around their centre.
    pub sigma_within: f64,
    /// Fraction of each class turned into outliers.
    pub outlier_fraction: f64,
    /// Outlier displacement in units of the within-class radius.
    pub outlier_scale: f64,
    /// Added to class indices when naming classes and building ids, so that
    /// several generated splits stay disjoint.
    pub class_offset: usize,
    pub split: Split,
}

impl SyntheticSpec {
    /// Default benchmark split: 40 videos of 8 frames per class in 64
    /// dimensions, unit centre spread, 0.4 within-class spread and a fifth
    /// of each class displaced by six radii.
    pub fn benchmark(classes: usize, class_offset: usize, split: Split) -> Self {
        SyntheticSpec {
            classes,
            per_class: 40,
            d_raw: 64,
            frames: 8,
            sigma_between: 1.0,
            sigma_within: 0.4,
            outlier_fraction: 0.2,
            outlier_scale: 6.0,
            class_offset,
            split,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Precondition(format!("synthetic spec: {msg}")));
        if !(self.sigma_between > 0.0 && self.sigma_within > 0.0) {
            return bad("sigma_between and sigma_within must be > 0");
        }
        if !(0.0..1.0).contains(&self.outlier_fraction) {
            return bad("outlier_fraction must lie in [0, 1)");
        }
        if !(self.outlier_scale >= 1.0) {
            return bad("outlier_scale must be >= 1");
        }
        if self.d_raw == 0 || self.frames == 0 {
            return bad("d_raw and frames must be >= 1");
        }
        if !self.sigma_between.is_finite() || !self.sigma_within.is_finite() || !self.outlier_scale.is_finite() {
            return bad("parameters must be finite");
        }
        Ok(())
    }

    /// Outlier videos injected per class.
    pub fn outliers_per_class(&self) -> usize {
        libm::round(self.outlier_fraction * self.per_class as f64) as usize
    }
}

/// Generated dataset plus the ground truth used to build it.
#[derive(Debug, Clone, PartialEq)]
pub struct Synthetic {
    pub dataset: Dataset,
    /// `classes x d_raw` class centres.
    pub centers: Matrix,
    /// Ids of videos whose latent was displaced.
    pub outlier_ids: BTreeSet<u64>,
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Gaussian class clusters of videos with per-frame jitter and radial
/// outliers.
///
/// Class centres are drawn from `N(0, sigma_between^2 I)`, video latents from
/// `N(centre, sigma_within^2 I)`, and each frame adds `N(0, (sigma_within/4)^2 I)`.
/// `round(outlier_fraction * per_class)` videos per class get their latent
/// pushed by `outlier_scale * sigma_within * sqrt(d_raw)` along a uniformly
/// random direction. Stored values are rounded to `f32` precision so the
/// feature file format round-trips them exactly.
pub fn generate_synthetic<R: Rng + ?Sized>(spec: &SyntheticSpec, rng: &mut R) -> Result<Synthetic> {
    spec.validate()?;
    let d = spec.d_raw;
    let radius = spec.sigma_within * libm::sqrt(d as f64);
    let jitter = spec.sigma_within / 4.0;
    let n_out = spec.outliers_per_class();

    let mut centers = Matrix::zeros(spec.classes, d);
    let mut samples = Vec::with_capacity(spec.classes * spec.per_class);
    let mut outlier_ids = BTreeSet::new();
    let mut classes = Vec::with_capacity(spec.classes);

    for c in 0..spec.classes {
        let global = spec.class_offset + c;
        classes.push(format!("class_{global:03}"));
        for v in centers.row_mut(c) {
            *v = spec.sigma_between * gaussian(rng);
        }
        let outliers: BTreeSet<usize> = if n_out > 0 {
            index::sample(rng, spec.per_class, n_out).into_iter().collect()
        } else {
            BTreeSet::new()
        };
        for j in 0..spec.per_class {
            let id = ((global as u64) << 32) | j as u64;
            let mut latent: Vec<f64> = centers
                .row(c)
                .iter()
                .map(|&m| m + spec.sigma_within * gaussian(rng))
                .collect();
            if outliers.contains(&j) {
                let dir: Vec<f64> = (0..d).map(|_| gaussian(rng)).collect();
                let norm = libm::sqrt(dir.iter().map(|x| x * x).sum());
                let step = spec.outlier_scale * radius / norm;
                for (l, u) in latent.iter_mut().zip(&dir) {
                    *l += step * u;
                }
                outlier_ids.insert(id);
            }
            let mut frames = Matrix::zeros(spec.frames, d);
            for f in 0..spec.frames {
                for (o, &l) in frames.row_mut(f).iter_mut().zip(&latent) {
                    *o = (l + jitter * gaussian(rng)) as f32 as f64;
                }
            }
            samples.push(VideoSample {
                id,
                label: c as u32,
                frames,
            });
        }
    }
    let dataset = Dataset::new(classes, spec.split, d, samples)?;
    Ok(Synthetic {
        dataset,
        centers,
        outlier_ids,
    })
}

use alloc::format;
use alloc::vec::Vec;

use rand::seq::index;
use rand::Rng;

use super::Dataset;
use crate::{Error, Result};

/// A sample reference inside an episode with its episode-local label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EpisodeItem {
    /// Index into [`Dataset::samples`].
    pub sample: usize,
    /// Episode-local class in `0..way`.
    pub label: usize,
}

/// One N-way K-shot task. Support and query are stored class-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Episode {
    pub way: usize,
    pub shot: usize,
    pub query_count: usize,
    /// Dataset label of each episode-local class.
    pub classes: Vec<usize>,
    pub support: Vec<EpisodeItem>,
    pub query: Vec<EpisodeItem>,
}

impl Episode {
    /// Support row indices of each episode-local class.
    pub fn support_groups(&self) -> Vec<Vec<usize>> {
        groups(&self.support, self.way)
    }

    /// Query row indices of each episode-local class.
    pub fn query_groups(&self) -> Vec<Vec<usize>> {
        groups(&self.query, self.way)
    }

    pub fn support_labels(&self) -> Vec<usize> {
        self.support.iter().map(|i| i.label).collect()
    }

    pub fn query_labels(&self) -> Vec<usize> {
        self.query.iter().map(|i| i.label).collect()
    }
}

fn groups(items: &[EpisodeItem], way: usize) -> Vec<Vec<usize>> {
    let mut out = alloc::vec![Vec::new(); way];
    for (row, it) in items.iter().enumerate() {
        out[it.label].push(row);
    }
    out
}

/// Draw `way` distinct classes uniformly among those with at least
/// `shot + query` samples, then `shot + query` distinct samples per class.
pub fn sample_episode<R: Rng + ?Sized>(
    ds: &Dataset,
    way: usize,
    shot: usize,
    query: usize,
    rng: &mut R,
) -> Result<Episode> {
    if way == 0 || shot == 0 || query == 0 {
        return Err(Error::Precondition(format!(
            "episode shape must be positive, got {way}-way {shot}-shot {query}-query"
        )));
    }
    let per_class = shot + query;
    let eligible: Vec<usize> = (0..ds.classes().len())
        .filter(|&c| ds.class_members(c).len() >= per_class)
        .collect();
    if eligible.len() < way {
        return Err(Error::Capacity {
            what: format!(
                "classes with >= {per_class} samples in {} split",
                ds.split().name()
            ),
            needed: way,
            available: eligible.len(),
        });
    }

    let chosen: Vec<usize> = index::sample(rng, eligible.len(), way)
        .into_iter()
        .map(|i| eligible[i])
        .collect();
    let mut support = Vec::with_capacity(way * shot);
    let mut queries = Vec::with_capacity(way * query);
    for (label, &class) in chosen.iter().enumerate() {
        let members = ds.class_members(class);
        let picks = index::sample(rng, members.len(), per_class).into_vec();
        support.extend(picks[..shot].iter().map(|&i| EpisodeItem { sample: members[i], label }));
        queries.extend(picks[shot..].iter().map(|&i| EpisodeItem { sample: members[i], label }));
    }
    Ok(Episode {
        way,
        shot,
        query_count: query,
        classes: chosen,
        support,
        query: queries,
    })
}

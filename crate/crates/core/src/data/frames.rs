use alloc::vec::Vec;
use core::ops::RangeInclusive;

use rand::Rng;

use super::VideoSample;
use crate::{Error, Matrix, Result};

/// Frame-index ranges of the `segments` temporal segments of a video with
/// `frame_count` frames.
///
/// With at least as many frames as segments the index range is partitioned
/// into contiguous near-equal pieces, the first `frame_count % segments` one
/// frame longer. Shorter videos use overlapping ranges
/// `floor(iF/T) ..= ceil((i+1)F/T) - 1`, each nonempty.
pub fn segment_ranges(frame_count: usize, segments: usize) -> Result<Vec<RangeInclusive<usize>>> {
    if segments == 0 {
        return Err(Error::Precondition("segment count must be at least 1".into()));
    }
    if frame_count == 0 {
        return Err(Error::Precondition("video has no frames".into()));
    }
    let (f, t) = (frame_count, segments);
    let mut out = Vec::with_capacity(t);
    if f >= t {
        let (base, extra) = (f / t, f % t);
        let mut start = 0;
        for i in 0..t {
            let len = base + usize::from(i < extra);
            out.push(start..=start + len - 1);
            start += len;
        }
    } else {
        for i in 0..t {
            let lo = i * f / t;
            let hi = ((i + 1) * f).div_ceil(t) - 1;
            out.push(lo..=hi);
        }
    }
    Ok(out)
}

/// One uniformly drawn frame index per segment.
pub fn sample_frame_indices<R: Rng + ?Sized>(
    frame_count: usize,
    segments: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    Ok(segment_ranges(frame_count, segments)?
        .into_iter()
        .map(|r| rng.random_range(r))
        .collect())
}

/// Sparse segment sampling: a `segments x d_raw` matrix of selected frames.
pub fn sample_frames<R: Rng + ?Sized>(
    video: &VideoSample,
    segments: usize,
    rng: &mut R,
) -> Result<Matrix> {
    let idx = sample_frame_indices(video.frames.rows(), segments, rng)?;
    video.frames.select_rows(&idx)
}

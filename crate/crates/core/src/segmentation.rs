//! Speaker segments and change points.
//!
//! Per-window cluster labels become maximal same-speaker segments, and each
//! segment boundary is then refined inside a 2 s chroma frame: the frame's
//! chroma columns are merged bottom-up until two segments remain, and their
//! boundary, mapped back to clip time, is the refined change point.

use rayon::prelude::*;
use serde::Serialize;

use crate::audio::AudioClip;
use crate::clustering::{agglomerate, cosine_distance, cut, estimate_speaker_count, CutTarget};
use crate::embedding::embed_clip;
use crate::error::{Error, Result};
use crate::features::{chroma, ChromaGram, CHROMA_STFT, PITCH_CLASSES};
use crate::nn::{CnnModel, Real};
use crate::CANONICAL_SAMPLE_RATE;

/// Half-width in seconds of the chroma frame around a coarse change point.
pub const REFINE_HALF_WINDOW: f64 = 1.0;

/// Cosine distance the two final chroma segments must reach for a boundary
/// to count as a real change; below it refinement falls back to the coarse
/// time.
pub const MIN_BOUNDARY_CONTRAST: f64 = 0.02;

/// Margin in seconds kept between a refined boundary and its neighbors so
/// refinement can never reorder or collapse segments.
const BOUNDARY_CLAMP_MARGIN: f64 = 1e-3;

/// One speaker's uninterrupted span within a clip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiarizationSegment {
    /// Start in seconds, inclusive.
    pub start: f64,
    /// End in seconds, exclusive; always greater than `start`.
    pub end: f64,
    /// Cluster id of the speaker.
    pub speaker: usize,
}

/// A speaker change, before and after chroma refinement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChangePoint {
    /// Window-resolution boundary from the coarse labels.
    pub coarse_time: f64,
    /// Chroma-refined boundary; within 1 s of `coarse_time`.
    pub refined_time: f64,
    /// Speaker ids left and right of the boundary.
    pub speakers: (usize, usize),
    /// True when the 2 s chroma frame stuck out past a clip edge and was
    /// clamped.
    pub clamped: bool,
    /// True when refinement fell back to the coarse time (silent frame or
    /// no chroma contrast).
    pub fallback: bool,
}

/// Outcome of refining one boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryRefinement {
    pub refined_time: f64,
    pub clamped: bool,
    pub fallback: bool,
}

/// Full diarization of one clip.
#[derive(Debug, Clone, Serialize)]
pub struct DiarizationResult {
    /// Non-overlapping segments covering the clip exactly, in time order,
    /// with distinct speakers on either side of every boundary.
    pub segments: Vec<DiarizationSegment>,
    /// One entry per interior segment boundary, in time order.
    pub change_points: Vec<ChangePoint>,
    pub num_speakers: usize,
    /// True when the speaker-count estimate degenerated to a single cluster.
    pub degenerate_estimate: bool,
}

/// Collapses per-window labels into maximal same-speaker segments.
///
/// Each maximal run of equal labels becomes one segment starting at its
/// first window time; a segment ends where the next run starts, and the
/// last one ends at `clip_end`. Empty input yields an empty list.
pub fn labels_to_segments(
    window_times: &[f64],
    labels: &[usize],
    clip_end: f64,
) -> Result<Vec<DiarizationSegment>> {
    if window_times.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} window times vs {} labels",
            window_times.len(),
            labels.len()
        )));
    }
    if window_times.is_empty() {
        return Ok(Vec::new());
    }
    if window_times.iter().any(|t| !t.is_finite()) || !clip_end.is_finite() {
        return Err(Error::Config("window times must be finite".into()));
    }
    if window_times.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(
            "window times must be strictly increasing".into(),
        ));
    }
    let last = *window_times.last().expect("non-empty");
    if clip_end <= last {
        return Err(Error::Config(format!(
            "clip end {clip_end} s does not reach past the last window at {last} s"
        )));
    }

    let mut segments = Vec::new();
    let mut run_start = 0;
    for i in 1..=labels.len() {
        if i == labels.len() || labels[i] != labels[run_start] {
            segments.push(DiarizationSegment {
                start: window_times[run_start],
                end: if i == labels.len() {
                    clip_end
                } else {
                    window_times[i]
                },
                speaker: labels[run_start],
            });
            run_start = i;
        }
    }
    Ok(segments)
}

/// Refines a coarse change point inside a 2 s chroma frame.
///
/// The frame `[coarse_time − 1, coarse_time + 1]` is clamped to the clip
/// (setting `clamped` when it stuck out). Its chroma columns start as
/// one-frame segments that repeatedly merge the adjacent pair with the
/// smallest mean-chroma cosine distance, leftmost pair on ties, until two
/// segments remain; their boundary is the refined time. A silent frame, a
/// frame too short for two chroma columns, or a final contrast below
/// [`MIN_BOUNDARY_CONTRAST`] falls back to the coarse time with `fallback`
/// set.
pub fn refine_boundary(clip: &AudioClip, coarse_time: f64) -> Result<BoundaryRefinement> {
    let end = clip.seconds();
    if !coarse_time.is_finite() || coarse_time <= 0.0 || coarse_time >= end {
        return Err(Error::Config(format!(
            "change point {coarse_time} s outside clip of {end} s"
        )));
    }
    let lo = (coarse_time - REFINE_HALF_WINDOW).max(0.0);
    let hi = (coarse_time + REFINE_HALF_WINDOW).min(end);
    let clamped = coarse_time - REFINE_HALF_WINDOW < 0.0 || coarse_time + REFINE_HALF_WINDOW > end;
    let fallback = |refined_time| {
        Ok(BoundaryRefinement {
            refined_time,
            clamped,
            fallback: true,
        })
    };

    let gram = chroma(clip, lo, hi - lo)?;
    if gram.num_frames < 2 {
        return fallback(coarse_time);
    }
    if (0..gram.num_frames).all(|f| gram.column(f).iter().all(|&v| v == 0.0)) {
        return fallback(coarse_time);
    }

    let boundary = match split_frame(&gram) {
        Some(b) => b,
        None => return fallback(coarse_time),
    };
    // Chroma frame f is centered at f*hop + window/2 within the span; the
    // change lies between the centers of frames boundary-1 and boundary.
    let window_center = CHROMA_STFT.window_len as f64 / (2.0 * CANONICAL_SAMPLE_RATE as f64);
    let refined_time = lo + (boundary as f64 - 0.5) * gram.frame_hop + window_center;
    Ok(BoundaryRefinement {
        refined_time,
        clamped,
        fallback: false,
    })
}

/// Bottom-up merge of chroma columns down to two segments; returns the
/// first frame of the right segment, or `None` when the final segments'
/// contrast stays under [`MIN_BOUNDARY_CONTRAST`].
fn split_frame(gram: &ChromaGram) -> Option<usize> {
    // Cosine distance is scale-free, so comparing column sums equals
    // comparing the mean columns.
    struct Seg {
        start: usize,
        sum: [f64; PITCH_CLASSES],
    }
    let mut segs: Vec<Seg> = (0..gram.num_frames)
        .map(|f| Seg {
            start: f,
            sum: gram.column(f),
        })
        .collect();
    while segs.len() > 2 {
        let mut best = (f64::INFINITY, 0);
        for k in 0..segs.len() - 1 {
            let d = cosine_distance(&segs[k].sum, &segs[k + 1].sum);
            if d < best.0 {
                best = (d, k);
            }
        }
        let k = best.1;
        let absorbed = segs.remove(k + 1);
        for (acc, v) in segs[k].sum.iter_mut().zip(absorbed.sum) {
            *acc += v;
        }
    }
    let contrast = cosine_distance(&segs[0].sum, &segs[1].sum);
    (contrast >= MIN_BOUNDARY_CONTRAST).then(|| segs[1].start)
}

/// Runs the whole pipeline on one clip: embed 1 s windows, cluster, cut at
/// the estimated (or forced) speaker count, build segments, and refine each
/// interior boundary with [`refine_boundary`].
///
/// Refined boundaries are clamped between their neighboring boundaries so
/// the segment list always covers the clip exactly, in order, with distinct
/// speakers at every boundary. Requires at least 2 s of audio.
pub fn diarize<T: Real>(
    model: &CnnModel<T>,
    clip: &AudioClip,
    forced_speakers: Option<usize>,
) -> Result<DiarizationResult> {
    if clip.seconds() < 2.0 {
        return Err(Error::ClipTooShort {
            seconds: clip.seconds(),
            required: 2.0,
        });
    }
    let set = embed_clip(model, clip, 1.0)?;
    let dendro = agglomerate(&set)?;
    let estimate = estimate_speaker_count(&dendro);
    let (k, degenerate_estimate) = match forced_speakers {
        Some(k) => (k, false),
        None => (estimate.count, estimate.degenerate),
    };
    let assignment = cut(&dendro, CutTarget::Count(k))?;
    let mut segments = labels_to_segments(set.window_times(), &assignment.labels, clip.seconds())?;

    let coarse_bounds: Vec<f64> = segments.iter().skip(1).map(|s| s.start).collect();
    let refinements: Vec<BoundaryRefinement> = coarse_bounds
        .par_iter()
        .map(|&t| refine_boundary(clip, t))
        .collect::<Result<_>>()?;

    let mut change_points = Vec::with_capacity(coarse_bounds.len());
    let mut prev = segments[0].start;
    for (i, r) in refinements.iter().enumerate() {
        let coarse = coarse_bounds[i];
        let next = coarse_bounds.get(i + 1).copied().unwrap_or(clip.seconds());
        let refined = if r.fallback {
            coarse
        } else {
            r.refined_time
                .clamp(prev + BOUNDARY_CLAMP_MARGIN, next - BOUNDARY_CLAMP_MARGIN)
        };
        segments[i].end = refined;
        segments[i + 1].start = refined;
        change_points.push(ChangePoint {
            coarse_time: coarse,
            refined_time: refined,
            speakers: (segments[i].speaker, segments[i + 1].speaker),
            clamped: r.clamped,
            fallback: r.fallback,
        });
        prev = refined;
    }

    Ok(DiarizationResult {
        segments,
        change_points,
        num_speakers: k,
        degenerate_estimate,
    })
}

impl DiarizationResult {
    /// RTTM speaker lines, one per segment, times with millisecond
    /// precision. Whitespace in `clip_id` becomes `_` to keep the
    /// space-separated fields parseable.
    pub fn to_rttm(&self, clip_id: &str) -> String {
        let clip_id = clip_id.replace(char::is_whitespace, "_");
        let mut out = String::new();
        for seg in &self.segments {
            out.push_str(&format!(
                "SPEAKER {clip_id} 1 {:.3} {:.3} <NA> <NA> spk{} <NA> <NA>\n",
                seg.start,
                seg.end - seg.start,
                seg.speaker
            ));
        }
        out
    }

    /// Pretty-printed JSON with segments, change points, and flags.
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::Internal(format!("diarization JSON encode failed: {e}")))
    }
}

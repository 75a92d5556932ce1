//! Per-video feature bundles and video-to-video distances.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::flow::{sequence_flows, FlowField, FlowProvider};
use super::histogram::{bhattacharyya, flux, BinGeometry, Histogram};
use super::hoof::{h2d_counts, h2d_range, hoof_counts, tile_windows};
use super::hvs::{percentile, HvsParams, Perception};
use super::tracker::{track, tracklet_histogram, TrackerParams, Tracklet};
use super::FeatureError;
use crate::media::FrameSequence;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureParams {
    pub window_size: usize,
    pub hoof_bins: usize,
    pub h2d_bins: usize,
    pub hvs: HvsParams,
    pub tracker: TrackerParams,
    /// Weights of the HOOF, H2D and tracklet distances in the combination.
    pub weights: [f64; 3],
}

impl Default for FeatureParams {
    fn default() -> Self {
        Self {
            window_size: 64,
            hoof_bins: 32,
            h2d_bins: 16,
            hvs: HvsParams::default(),
            tracker: TrackerParams::default(),
            weights: [1.0, 1.0, 1.0],
        }
    }
}

impl FeatureParams {
    pub fn validate(&self) -> Result<(), FeatureError> {
        let bad = |m: String| Err(FeatureError::InvalidParams(m));
        if self.window_size == 0 {
            return bad("window size must be positive".into());
        }
        if self.hoof_bins < 4 || !self.hoof_bins.is_multiple_of(2) {
            return bad(format!("HOOF bins must be even and >= 4, got {}", self.hoof_bins));
        }
        if self.h2d_bins == 0 {
            return bad("H2D bins must be positive".into());
        }
        if self.weights.iter().any(|w| !(*w >= 0.0)) || self.weights.iter().sum::<f64>() <= 0.0 {
            return bad("weights must be non-negative with a positive sum".into());
        }
        self.hvs.validate().map_err(FeatureError::InvalidParams)
    }
}

/// The three feature sets of one video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureBundle {
    /// Window flux of HOOF, one per frame pair.
    pub hoof_per_frame: Vec<Histogram>,
    /// Window and time flux of H2D.
    pub h2d_flux: Histogram,
    pub tracklet_flux: Histogram,
    pub window_size: usize,
    pub perception: Perception,
    pub tracklets: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Distances {
    pub d_hoof: f64,
    pub d_h2d: f64,
    pub d_track: f64,
    pub d_combined: f64,
}

/// Lower clamp on an automatically chosen `v_max`, px/frame.
pub const MIN_AUTO_V_MAX: f64 = 0.5;

/// 99th percentile of the flow magnitudes, at least [`MIN_AUTO_V_MAX`].
pub fn auto_v_max(flows: &[FlowField]) -> f64 {
    let mut mags: Vec<f64> = flows.iter().flat_map(|f| f.magnitudes()).collect();
    percentile(&mut mags, 0.99).unwrap_or(0.0).max(MIN_AUTO_V_MAX)
}

pub fn perception_for(params: &FeatureParams, source_flows: &[FlowField]) -> Perception {
    let v_max = params.hvs.v_max.unwrap_or_else(|| auto_v_max(source_flows));
    Perception::resolve(&params.hvs, v_max)
}

/// Builds the feature bundle of `seq` from precomputed flows.
pub fn extract_features(
    seq: &FrameSequence,
    flows: &[FlowField],
    params: &FeatureParams,
    perception: &Perception,
) -> Result<FeatureBundle, FeatureError> {
    let tracks = track(seq, flows, &params.tracker)?;
    extract_features_with_tracks(seq, flows, &tracks, params, perception)
}

pub fn extract_features_with_tracks(
    seq: &FrameSequence,
    flows: &[FlowField],
    tracks: &[Tracklet],
    params: &FeatureParams,
    perception: &Perception,
) -> Result<FeatureBundle, FeatureError> {
    let (w, h) = seq.dims();
    let (w, h) = (w as usize, h as usize);
    let windows = tile_windows(w, h, params.window_size);
    let per_frame: Vec<(Histogram, Histogram)> = flows
        .par_iter()
        .map(|f| {
            let hoofs: Vec<Histogram> =
                windows.iter().map(|win| hoof_counts(f, *win, params.hoof_bins, perception)).collect();
            let mut h2d = h2d_counts(f, windows[0], params.h2d_bins, perception);
            for win in &windows[1..] {
                h2d.add_assign(&h2d_counts(f, *win, params.h2d_bins, perception)).expect("same geometry");
            }
            (flux(&hoofs).expect("at least one window"), h2d)
        })
        .collect();
    let h2d_flux = match per_frame.first() {
        Some(_) => flux(per_frame.iter().map(|(_, h)| h))?,
        None => {
            let range = h2d_range(perception);
            Histogram::zeros(BinGeometry::Motion { bins_x: params.h2d_bins, bins_y: params.h2d_bins, range })
        }
    };
    Ok(FeatureBundle {
        hoof_per_frame: per_frame.into_iter().map(|(h, _)| h).collect(),
        h2d_flux,
        tracklet_flux: tracklet_histogram(tracks, w, h, params.window_size),
        window_size: params.window_size,
        perception: *perception,
        tracklets: tracks.len(),
    })
}

/// Bhattacharyya distances between two bundles.
pub fn feature_distances(a: &FeatureBundle, b: &FeatureBundle, weights: [f64; 3]) -> Result<Distances, FeatureError> {
    if a.hoof_per_frame.len() != b.hoof_per_frame.len() {
        return Err(FeatureError::ShapeMismatch(format!(
            "{} vs {} frame pairs",
            a.hoof_per_frame.len(),
            b.hoof_per_frame.len()
        )));
    }
    let mut d_hoof = 0.0;
    for (p, q) in a.hoof_per_frame.iter().zip(&b.hoof_per_frame) {
        d_hoof += bhattacharyya(p, q)?;
    }
    if !a.hoof_per_frame.is_empty() {
        d_hoof /= a.hoof_per_frame.len() as f64;
    }
    let d_h2d = bhattacharyya(&a.h2d_flux, &b.h2d_flux)?;
    let d_track = bhattacharyya(&a.tracklet_flux, &b.tracklet_flux)?;
    let total: f64 = weights.iter().sum();
    let d_combined = (weights[0] * d_hoof + weights[1] * d_h2d + weights[2] * d_track) / total;
    Ok(Distances { d_hoof, d_h2d, d_track, d_combined })
}

/// Features of a reference video, reused across many comparisons.
#[derive(Debug, Clone)]
pub struct Reference {
    pub bundle: FeatureBundle,
    pub frames: usize,
    pub dims: (u32, u32),
}

impl Reference {
    pub fn new(
        source: &FrameSequence,
        provider: &dyn FlowProvider,
        params: &FeatureParams,
    ) -> Result<Self, FeatureError> {
        params.validate()?;
        let flows = sequence_flows(source, provider)?;
        let perception = perception_for(params, &flows);
        let bundle = extract_features(source, &flows, params, &perception)?;
        Ok(Self { bundle, frames: source.len(), dims: source.dims() })
    }

    /// Features of `other` under this reference's perception settings.
    pub fn features_of(
        &self,
        other: &FrameSequence,
        provider: &dyn FlowProvider,
        params: &FeatureParams,
    ) -> Result<FeatureBundle, FeatureError> {
        if other.len() != self.frames || other.dims() != self.dims {
            return Err(FeatureError::ShapeMismatch(format!(
                "{} frames of {:?} vs {} frames of {:?}",
                self.frames,
                self.dims,
                other.len(),
                other.dims()
            )));
        }
        let flows = sequence_flows(other, provider)?;
        extract_features(other, &flows, params, &self.bundle.perception)
    }

    pub fn compare(
        &self,
        other: &FrameSequence,
        provider: &dyn FlowProvider,
        params: &FeatureParams,
    ) -> Result<Distances, FeatureError> {
        let bundle = self.features_of(other, provider, params)?;
        feature_distances(&self.bundle, &bundle, params.weights)
    }
}

/// Scores `simulated` against `source`. Both must have the same resolution
/// and frame count.
pub fn compare_videos(
    source: &FrameSequence,
    simulated: &FrameSequence,
    provider: &dyn FlowProvider,
    params: &FeatureParams,
) -> Result<Distances, FeatureError> {
    if source.len() != simulated.len() || source.dims() != simulated.dims() {
        return Err(FeatureError::ShapeMismatch(format!(
            "{} frames of {:?} vs {} frames of {:?}",
            source.len(),
            source.dims(),
            simulated.len(),
            simulated.dims()
        )));
    }
    Reference::new(source, provider, params)?.compare(simulated, provider, params)
}

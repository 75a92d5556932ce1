//! Motion features: dense flow, perceived-motion transform, HOOF, H2D and
//! tracklet histograms, flux and Bhattacharyya distances.

mod compare;
mod flow;
mod histogram;
mod hoof;
mod hvs;
mod stats;
mod tracker;

use thiserror::Error;

pub use compare::{
    auto_v_max, compare_videos, extract_features, extract_features_with_tracks, feature_distances, perception_for,
    Distances, FeatureBundle, FeatureParams, Reference, MIN_AUTO_V_MAX,
};
pub use flow::{sequence_flows, FlowField, FlowProvider, HornSchunck, Plane};
pub use histogram::{bhattacharyya, flux, max_distance, BinGeometry, Histogram, BC_EPSILON};
pub use hoof::{h2d, h2d_counts, h2d_range, hoof, hoof_bin, hoof_counts, tile_windows, Window};
pub use hvs::{fechner_transform, percentile, HvsParams, Perception, DEFAULT_V_FLOOR};
pub use stats::pearson;
pub use tracker::{
    detect, track, track_with_background, tracklet_counts, tracklet_histogram, Detection, TrackSample, TrackerParams,
    Tracklet,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeatureError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("{frames} frames need {} flow fields, got {flows}", frames.saturating_sub(1))]
    LengthMismatch { frames: usize, flows: usize },
    #[error("histograms have different bin geometry")]
    GeometryMismatch,
    #[error("videos differ in shape: {0}")]
    ShapeMismatch(String),
    #[error("zero variance")]
    DegenerateVariance,
    #[error("no input")]
    EmptyInput,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

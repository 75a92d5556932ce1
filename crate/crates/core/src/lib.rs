#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Crowd simulation evaluation through composition.
//!
//! Simulated agents are composited onto the static background of a source
//! video and the result is scored against the source with motion-based
//! similarity features.

pub mod compositor;
pub mod features;
pub mod geometry;
pub mod media;
pub mod sim;
pub mod synth;

pub use geometry::{CalibrationInput, CellLabel, GeometryError, PerspectiveGrid, Point2, SceneSpec, Vec2};
pub use media::{FrameSequence, Image, MediaError};
pub use sim::{run_simulation, SimParams, SimulationTrace, SimulatorKind};

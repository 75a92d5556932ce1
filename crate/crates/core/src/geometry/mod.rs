//! Ground-plane calibration, the perspective grid and scene files.

mod calibration;
mod grid;
mod point;
mod scene;

use thiserror::Error;

pub use calibration::{CalibrationInput, PreparedCalibration, ScaleLadder, ON_LINE_TOLERANCE_PX};
pub use grid::{CellLabel, CellSize, GridOptions, PerspectiveGrid};
pub use point::{distance_to_line, line_intersect, project_onto_line, Point2, Rect, Vec2, PARALLEL_EPS};
pub use scene::{CrowdEstimate, SceneIssue, SceneSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("lines are parallel")]
    ParallelLines,
    #[error("degenerate calibration: {0}")]
    DegenerateCalibration(String),
    #[error("world point ({x:.3}, {y:.3}) is outside the grid")]
    OutOfBounds { x: f64, y: f64 },
    #[error("invalid scene: {0}")]
    InvalidScene(String),
}

impl GeometryError {
    /// Stable identifier used in machine-readable error responses.
    pub fn code(&self) -> &'static str {
        match self {
            GeometryError::ParallelLines => "ParallelLines",
            GeometryError::DegenerateCalibration(_) => "DegenerateCalibration",
            GeometryError::OutOfBounds { .. } => "OutOfBounds",
            GeometryError::InvalidScene(_) => "InvalidScene",
        }
    }
}

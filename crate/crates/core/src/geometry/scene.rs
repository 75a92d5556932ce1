use std::path::Path;

use serde::{Deserialize, Serialize};

use super::calibration::CalibrationInput;
use super::grid::{CellLabel, CellSize, GridOptions, PerspectiveGrid};
use super::GeometryError;

/// User-estimated crowd parameters of the source video; sweeps scale them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrowdEstimate {
    /// Number of pedestrians typically visible.
    pub agents: u32,
    /// Typical walking speed in world units per second.
    #[serde(default = "default_speed")]
    pub speed: f64,
}

fn default_speed() -> f64 {
    crate::sim::BASE_DESIRED_SPEED
}

impl Default for CrowdEstimate {
    fn default() -> Self {
        Self { agents: 10, speed: default_speed() }
    }
}

/// The serialized result of scene annotation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub calibration: CalibrationInput,
    /// `rows x cols` labels; row 0 is the camera-side row of the grid.
    pub labels: Vec<Vec<CellLabel>>,
    pub agent_height_world: f64,
    pub source_fps: f64,
    /// Relative paths resolve against the scene file's directory.
    pub background_path: String,
    /// World size of one grid cell; both units default to 1.
    #[serde(default)]
    pub cell_size: CellSize,
    #[serde(default)]
    pub crowd: CrowdEstimate,
}

/// One validation failure with a machine-readable code.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneIssue {
    pub code: String,
    pub message: String,
}

impl SceneIssue {
    fn new(code: &str, message: impl Into<String>) -> Self {
        Self { code: code.to_string(), message: message.into() }
    }
}

impl SceneSpec {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serializes")
    }

    pub fn from_file(path: &Path) -> Result<Self, GeometryError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GeometryError::InvalidScene(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| GeometryError::InvalidScene(format!("{}: {e}", path.display())))
    }

    /// Grid for this scene's calibration with its labels applied.
    pub fn build_grid(&self) -> Result<PerspectiveGrid, GeometryError> {
        let mut grid = PerspectiveGrid::build_with(&self.calibration, self.cell_size, GridOptions::default())?;
        grid.set_labels(&self.labels)?;
        Ok(grid)
    }

    /// Grid with all-walkable labels, for annotating a fresh scene.
    pub fn unlabeled_grid(calibration: &CalibrationInput) -> Result<PerspectiveGrid, GeometryError> {
        PerspectiveGrid::build(calibration)
    }

    /// Every problem that would stop the scene from being simulated.
    pub fn validate(&self) -> Vec<SceneIssue> {
        let mut issues = Vec::new();
        if !(self.source_fps > 0.0 && self.source_fps.is_finite()) {
            issues.push(SceneIssue::new("InvalidFps", format!("source_fps must be positive, got {}", self.source_fps)));
        }
        if !(self.agent_height_world > 0.0 && self.agent_height_world.is_finite()) {
            issues.push(SceneIssue::new("InvalidAgentHeight", "agent_height_world must be positive"));
        }
        if !(self.crowd.speed > 0.0 && self.crowd.speed.is_finite()) {
            issues.push(SceneIssue::new("InvalidCrowd", "crowd.speed must be positive"));
        }
        match self.build_grid() {
            Ok(grid) => {
                if grid.count_label(CellLabel::Walkable) == 0 {
                    issues.push(SceneIssue::new("NoWalkableCell", "grid has no walkable cell"));
                }
                if grid.count_label(CellLabel::Entrance) == 0 {
                    issues.push(SceneIssue::new("NoEntranceCell", "grid has no entrance cell"));
                }
            }
            Err(e) => issues.push(SceneIssue::new(e.code(), e.to_string())),
        }
        issues
    }

    pub fn resolve_background(&self, scene_dir: &Path) -> std::path::PathBuf {
        let p = Path::new(&self.background_path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            scene_dir.join(p)
        }
    }
}

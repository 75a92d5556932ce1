//! Self-contained synthetic scene: a textured walkway seen by a tilted
//! camera, with a source video composited by one of the simulators.

use std::path::Path;

use csec_core::geometry::{CellSize, CrowdEstimate};
use csec_core::media::save_sequence;
use csec_core::synth::{label_plaza, textured_background, GroundCamera, PlazaLayout};
use csec_core::{FrameSequence, Image, PerspectiveGrid, Point2, SceneSpec, SimulatorKind};

use crate::error::CliError;
use crate::sweep::{AgentLevel, SceneContext, SpeedLevel, SweepSpec};

pub const BACKGROUND_FILE: &str = "background.png";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixtureOptions {
    pub width: u32,
    pub height: u32,
    pub fps: f64,
    pub agents: u32,
    /// Seed of the background texture.
    pub texture_seed: u64,
    pub obstacle: bool,
}

impl Default for FixtureOptions {
    fn default() -> Self {
        Self { width: 320, height: 240, fps: 10.0, agents: 24, texture_seed: 11, obstacle: true }
    }
}

/// Camera 10 units up, pitched 35 degrees, looking at a ground patch some
/// 12 units ahead.
pub fn walkway_camera(width: u32, height: u32) -> GroundCamera {
    let focal = 300.0 * width as f64 / 320.0;
    GroundCamera::new(width, height, focal, 10.0, 35f64.to_radians(), 0.0, Point2::new(-4.0, 12.0))
}

/// Scene description and background of a walkway with entrances at both
/// ends. The background path is relative, so the scene works wherever the
/// pair is written.
pub fn walkway_scene(opts: &FixtureOptions) -> Result<(SceneSpec, Image), CliError> {
    let cam = walkway_camera(opts.width, opts.height);
    let calibration = cam.calibration();
    let mut grid =
        PerspectiveGrid::build(&calibration).map_err(|e| CliError::runtime(format!("fixture calibration: {e}")))?;
    let obstacle = opts.obstacle.then_some((3, -1, 2, 2));
    label_plaza(&mut grid, PlazaLayout { depth_rows: 10, obstacle, far_entrance: false });
    let scene = SceneSpec {
        calibration,
        labels: grid.labels(),
        agent_height_world: 1.7,
        source_fps: opts.fps,
        background_path: BACKGROUND_FILE.to_string(),
        cell_size: CellSize::default(),
        crowd: CrowdEstimate { agents: opts.agents, ..Default::default() },
    };
    Ok((scene, textured_background(opts.width, opts.height, opts.texture_seed)))
}

/// Composites `kind` at (Same, Same) with `seed` as a stand-in source video.
pub fn synthetic_source(
    ctx: &SceneContext,
    kind: SimulatorKind,
    seed: u64,
    n_frames: usize,
) -> Result<FrameSequence, CliError> {
    let spec = SweepSpec::standard(seed);
    ctx.composite(&spec, kind, AgentLevel::Same, SpeedLevel::Same, seed, n_frames)
}

/// Writes `scene.json`, `background.png` and `frames/` under `dir`.
pub fn write_fixture(dir: &Path, opts: &FixtureOptions, seed: u64, n_frames: usize) -> Result<(), CliError> {
    let (scene, background) = walkway_scene(opts)?;
    let ctx = SceneContext::new(scene, background)?;
    let source = synthetic_source(&ctx, SimulatorKind::Csec, seed, n_frames)?;
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("scene.json"), ctx.scene.to_json_pretty())?;
    ctx.background.save_png(&dir.join(BACKGROUND_FILE))?;
    save_sequence(&source, &dir.join("frames"))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use csec_core::CellLabel;

    #[test]
    fn walkway_scene_is_valid() {
        let (scene, bg) = walkway_scene(&FixtureOptions::default()).unwrap();
        assert!(scene.validate().is_empty(), "{:?}", scene.validate());
        let grid = scene.build_grid().unwrap();
        assert_eq!(grid.count_label(CellLabel::Obstacle), 4);
        assert_eq!(csec_core::sim::entrance_regions(&grid).len(), 2);
        assert_eq!(bg.dims(), (320, 240));
    }
}

use csec_core::compositor::{render_sequence, RenderConfig};
use csec_core::features::{compare_videos, FeatureParams, HornSchunck};
use csec_core::media::{load_sequence, save_sequence};
use csec_core::synth::{label_plaza, textured_background, GroundCamera, PlazaLayout};
use csec_core::{run_simulation, PerspectiveGrid, Point2, SceneSpec, SimParams, SimulatorKind};

fn scene() -> (SceneSpec, csec_core::Image) {
    let cam = GroundCamera::new(160, 120, 150.0, 10.0, 35f64.to_radians(), 0.0, Point2::new(-4.0, 12.0));
    let calibration = cam.calibration();
    let mut grid = PerspectiveGrid::build(&calibration).unwrap();
    label_plaza(&mut grid, PlazaLayout { depth_rows: 8, obstacle: None, far_entrance: false });
    let scene = SceneSpec {
        calibration,
        labels: grid.labels(),
        agent_height_world: 1.7,
        source_fps: 10.0,
        background_path: "background.png".into(),
        cell_size: Default::default(),
        crowd: Default::default(),
    };
    (scene, textured_background(160, 120, 5))
}

#[test]
fn scene_file_to_scores() {
    let (scene, background) = scene();
    let scene = SceneSpec::from_json(&scene.to_json_pretty()).unwrap();
    assert!(scene.validate().is_empty());
    let grid = scene.build_grid().unwrap();

    let params = SimParams { n_agents: 8, seed: 4, ..Default::default() };
    let cfg = RenderConfig::default();
    let trace = run_simulation(&grid, &params, 30, scene.source_fps, SimulatorKind::Csec).unwrap();
    let source = render_sequence(&background, &grid, &trace, &cfg, 30).unwrap().sequence;

    // frames survive a trip through disk
    let dir = tempfile::tempdir().unwrap();
    save_sequence(&source, dir.path()).unwrap();
    let loaded = load_sequence(dir.path(), scene.source_fps).unwrap();
    assert_eq!(loaded, source);

    let hs = HornSchunck::default();
    let fp = FeatureParams::default();
    let same = compare_videos(&loaded, &source, &hs, &fp).unwrap();
    assert!(same.d_combined.abs() < 1e-9);

    let empty = SimParams { n_agents: 0, ..params };
    let trace = run_simulation(&grid, &empty, 30, scene.source_fps, SimulatorKind::Csec).unwrap();
    let still = render_sequence(&background, &grid, &trace, &cfg, 30).unwrap().sequence;
    let d = compare_videos(&source, &still, &hs, &fp).unwrap();
    assert!(d.d_combined > 0.05, "{d:?}");
}

use std::path::{Path, PathBuf};

use csec_core::media::{extract_background, load_sequence};
use csec_core::{Image, SceneSpec};

use crate::correlate::{correlate_files, Correlations};
use crate::error::CliError;
use crate::report::write_results;
use crate::serve::SceneStore;
use crate::sweep::{run_sweep, FlowMethod, ResultsTable, SceneContext, SweepSpec};

pub fn cmd_prepare(frames_dir: &Path, fps: f64, out: &Path) -> Result<Image, CliError> {
    if !(fps > 0.0) {
        return Err(CliError::validation("fps must be positive"));
    }
    let seq = load_sequence(frames_dir, fps).map_err(|e| CliError::validation(e.to_string()))?;
    let bg = extract_background(&seq).ok_or_else(|| CliError::validation("no frames"))?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    bg.save_png(out)?;
    Ok(bg)
}

/// Command-line settings that take precedence over `sweep.json`.
#[derive(Debug, Clone, Default)]
pub struct EvalOverrides {
    pub seed: Option<u64>,
    pub weber: Option<bool>,
    pub window: Option<usize>,
    pub flow: Option<FlowMethod>,
}

impl EvalOverrides {
    pub fn apply(&self, spec: &mut SweepSpec) {
        if let Some(seed) = self.seed {
            spec.seed = seed;
        }
        if let Some(on) = self.weber {
            spec.features.hvs.weber_enabled = on;
        }
        if let Some(w) = self.window {
            spec.features.window_size = w;
        }
        if let Some(f) = self.flow {
            spec.flow = f;
        }
    }
}

pub fn load_sweep(path: Option<&Path>, overrides: &EvalOverrides) -> Result<SweepSpec, CliError> {
    let mut spec = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::validation(format!("cannot read {}: {e}", p.display())))?;
            SweepSpec::from_json(&text)?
        }
        None => SweepSpec::standard(0),
    };
    overrides.apply(&mut spec);
    spec.validate()?;
    Ok(spec)
}

/// Loads the scene and its background. A missing background file is
/// replaced by the mean of the source frames.
pub fn load_scene(scene_path: &Path, frames_dir: &Path) -> Result<(SceneContext, csec_core::FrameSequence), CliError> {
    let scene = SceneSpec::from_file(scene_path).map_err(|e| CliError::validation(e.to_string()))?;
    if !(scene.source_fps > 0.0) {
        return Err(CliError::validation("scene source_fps must be positive"));
    }
    let source = load_sequence(frames_dir, scene.source_fps).map_err(|e| CliError::validation(e.to_string()))?;
    let bg_path = scene.resolve_background(scene_path.parent().unwrap_or(Path::new(".")));
    let background = if bg_path.is_file() {
        Image::load_png(&bg_path).map_err(|e| CliError::validation(e.to_string()))?
    } else {
        eprintln!("{} not found, using the mean of the source frames", bg_path.display());
        extract_background(&source).ok_or_else(|| CliError::validation("no source frames"))?
    };
    Ok((SceneContext::new(scene, background)?, source))
}

pub fn cmd_evaluate(
    scene_path: &Path,
    frames_dir: &Path,
    sweep_path: Option<&Path>,
    out_dir: &Path,
    overrides: &EvalOverrides,
) -> Result<(ResultsTable, Vec<PathBuf>), CliError> {
    let spec = load_sweep(sweep_path, overrides)?;
    let (ctx, source) = load_scene(scene_path, frames_dir)?;
    let table = run_sweep(&ctx, &source, &spec)?;
    let written = write_results(&table, out_dir)?;
    Ok((table, written))
}

pub fn cmd_correlate(results: &Path, ratings: &Path, out: Option<&Path>) -> Result<Correlations, CliError> {
    let c = correlate_files(results, ratings)?;
    if let Some(out) = out {
        let json = serde_json::to_string_pretty(&c).map_err(|e| CliError::runtime(e.to_string()))?;
        std::fs::write(out, json + "\n")?;
    }
    Ok(c)
}

pub fn cmd_serve(port: u16, scenes_dir: Option<&Path>) -> Result<(), CliError> {
    let store = match scenes_dir {
        Some(dir) => {
            let (store, skipped) = SceneStore::load_dir(dir)?;
            for s in skipped {
                eprintln!("skipping scene {s}");
            }
            store
        }
        None => SceneStore::default(),
    };
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
        eprintln!("listening on {}", listener.local_addr()?);
        crate::serve::serve(listener, store).await
    })?;
    Ok(())
}

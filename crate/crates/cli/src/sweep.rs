//! Parameter sweeps: simulate, composite and score every cell of a
//! simulator × population × speed grid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use csec_core::compositor::{render_sequence, RenderConfig};
use csec_core::features::{FeatureParams, HornSchunck, Reference};
use csec_core::{run_simulation, FrameSequence, Image, PerspectiveGrid, SceneSpec, SimParams, SimulatorKind};

use crate::error::CliError;

/// Population level relative to the scene's estimated agent count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AgentLevel {
    /// No agents at all; a degenerate baseline.
    Empty,
    Few,
    Same,
    Many,
}

impl AgentLevel {
    pub const STANDARD: [AgentLevel; 3] = [AgentLevel::Few, AgentLevel::Same, AgentLevel::Many];

    pub fn multiplier(self) -> f64 {
        match self {
            AgentLevel::Empty => 0.0,
            AgentLevel::Few => 0.5,
            AgentLevel::Same => 1.0,
            AgentLevel::Many => 2.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AgentLevel::Empty => "Empty",
            AgentLevel::Few => "Few",
            AgentLevel::Same => "Same",
            AgentLevel::Many => "Many",
        }
    }

    pub fn agents(self, estimate: u32) -> u32 {
        (estimate as f64 * self.multiplier()).round() as u32
    }
}

/// Walking speed relative to the scene's estimated speed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpeedLevel {
    VerySlow,
    Slow,
    Same,
    Fast,
}

impl SpeedLevel {
    pub const STANDARD: [SpeedLevel; 4] = [SpeedLevel::VerySlow, SpeedLevel::Slow, SpeedLevel::Same, SpeedLevel::Fast];

    pub fn multiplier(self) -> f64 {
        match self {
            SpeedLevel::VerySlow => 0.25,
            SpeedLevel::Slow => 0.5,
            SpeedLevel::Same => 1.0,
            SpeedLevel::Fast => 1.5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SpeedLevel::VerySlow => "VerySlow",
            SpeedLevel::Slow => "Slow",
            SpeedLevel::Same => "Same",
            SpeedLevel::Fast => "Fast",
        }
    }
}

/// Optical-flow method; Horn–Schunck is the only one available.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum FlowMethod {
    HornSchunck(HornSchunck),
}

impl Default for FlowMethod {
    fn default() -> Self {
        FlowMethod::HornSchunck(HornSchunck::default())
    }
}

impl FlowMethod {
    pub fn parse(name: &str) -> Result<Self, CliError> {
        match name {
            "horn-schunck" | "hs" => Ok(FlowMethod::default()),
            other => Err(CliError::validation(format!("unknown flow method {other:?}"))),
        }
    }

    fn provider(&self) -> &HornSchunck {
        match self {
            FlowMethod::HornSchunck(hs) => hs,
        }
    }
}

fn default_simulators() -> Vec<SimulatorKind> {
    vec![SimulatorKind::Csec, SimulatorKind::Boids]
}

fn default_agent_levels() -> Vec<AgentLevel> {
    AgentLevel::STANDARD.to_vec()
}

fn default_speed_levels() -> Vec<SpeedLevel> {
    SpeedLevel::STANDARD.to_vec()
}

/// Contents of `sweep.json`. Everything except the seed has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    #[serde(default = "default_agent_levels")]
    pub agent_levels: Vec<AgentLevel>,
    #[serde(default = "default_speed_levels")]
    pub speed_levels: Vec<SpeedLevel>,
    #[serde(default = "default_simulators")]
    pub simulators: Vec<SimulatorKind>,
    pub seed: u64,
    /// Simulation settings; agent count, speeds and seed are set per cell.
    #[serde(default)]
    pub sim: SimParams,
    /// Agent height comes from the scene.
    #[serde(default)]
    pub render: RenderConfig,
    #[serde(default)]
    pub features: FeatureParams,
    #[serde(default)]
    pub flow: FlowMethod,
}

impl SweepSpec {
    pub fn standard(seed: u64) -> Self {
        Self {
            agent_levels: default_agent_levels(),
            speed_levels: default_speed_levels(),
            simulators: default_simulators(),
            seed,
            sim: SimParams::default(),
            render: RenderConfig::default(),
            features: FeatureParams::default(),
            flow: FlowMethod::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let spec: Self = serde_json::from_str(text).map_err(|e| CliError::validation(format!("sweep: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.agent_levels.is_empty() || self.speed_levels.is_empty() || self.simulators.is_empty() {
            return Err(CliError::validation("sweep level and simulator lists must be non-empty"));
        }
        self.render.validate().map_err(|e| CliError::validation(format!("render: {e}")))?;
        self.features.validate().map_err(|e| CliError::validation(format!("features: {e}")))?;
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        self.simulators.len() * self.agent_levels.len() * self.speed_levels.len()
    }
}

/// Everything a sweep needs from the scene, loaded once.
pub struct SceneContext {
    pub scene: SceneSpec,
    pub grid: PerspectiveGrid,
    pub background: Image,
}

impl SceneContext {
    pub fn new(scene: SceneSpec, background: Image) -> Result<Self, CliError> {
        let issues = scene.validate();
        if !issues.is_empty() {
            let list: Vec<String> = issues.iter().map(|i| format!("{}: {}", i.code, i.message)).collect();
            return Err(CliError::validation(format!("scene: {}", list.join("; "))));
        }
        let grid = scene.build_grid().map_err(|e| CliError::validation(format!("scene: {e}")))?;
        if background.dims() != grid.image_size() {
            return Err(CliError::validation(format!(
                "background is {:?} but the calibration is for {:?}",
                background.dims(),
                grid.image_size()
            )));
        }
        Ok(Self { scene, grid, background })
    }

    /// Simulates and composites one parameter combination.
    pub fn composite(
        &self,
        spec: &SweepSpec,
        kind: SimulatorKind,
        agents: AgentLevel,
        speed: SpeedLevel,
        seed: u64,
        n_frames: usize,
    ) -> Result<FrameSequence, CliError> {
        let params = SimParams {
            n_agents: agents.agents(self.scene.crowd.agents),
            speed_scale: speed.multiplier(),
            base_speed: self.scene.crowd.speed,
            seed,
            ..spec.sim
        };
        let ctx = |e: &dyn std::fmt::Display| {
            CliError::runtime(format!("cell {}/{}/{}: {e}", kind.name(), agents.name(), speed.name()))
        };
        let trace = run_simulation(&self.grid, &params, n_frames, self.scene.source_fps, kind).map_err(|e| ctx(&e))?;
        let render = RenderConfig { agent_height_world: self.scene.agent_height_world, ..spec.render };
        let rendered = render_sequence(&self.background, &self.grid, &trace, &render, n_frames).map_err(|e| ctx(&e))?;
        Ok(rendered.sequence)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub simulator: SimulatorKind,
    pub agent_level: AgentLevel,
    pub speed_level: SpeedLevel,
    pub n_agents: u32,
    pub speed_scale: f64,
    pub d_hoof: f64,
    pub d_h2d: f64,
    pub d_track: f64,
    pub d_combined: f64,
    /// 1 is the lowest combined distance within this simulator's cells.
    pub rank: usize,
}

/// Scores of a full sweep in simulator, agent level, speed level order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsTable {
    pub seed: u64,
    pub simulators: Vec<SimulatorKind>,
    pub agent_levels: Vec<AgentLevel>,
    pub speed_levels: Vec<SpeedLevel>,
    pub v_max: f64,
    pub cells: Vec<CellResult>,
}

impl ResultsTable {
    pub fn get(&self, kind: SimulatorKind, agents: AgentLevel, speed: SpeedLevel) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.simulator == kind && c.agent_level == agents && c.speed_level == speed)
    }

    pub fn is_complete(&self) -> bool {
        self.cells.len() == self.simulators.len() * self.agent_levels.len() * self.speed_levels.len()
            && self.simulators.iter().all(|&k| {
                self.agent_levels.iter().all(|&a| self.speed_levels.iter().all(|&s| self.get(k, a, s).is_some()))
            })
    }

    /// Cell with the smallest combined distance over all simulators.
    pub fn argmin(&self) -> Option<&CellResult> {
        self.cells.iter().min_by(|a, b| a.d_combined.total_cmp(&b.d_combined))
    }

    pub fn mean_combined(&self, kind: SimulatorKind) -> Option<f64> {
        let vals: Vec<f64> = self.cells.iter().filter(|c| c.simulator == kind).map(|c| c.d_combined).collect();
        if vals.is_empty() {
            None
        } else {
            Some(vals.iter().sum::<f64>() / vals.len() as f64)
        }
    }
}

fn assign_ranks(cells: &mut [CellResult]) {
    let kinds: Vec<SimulatorKind> = cells.iter().map(|c| c.simulator).collect();
    for kind in kinds {
        let mut idx: Vec<usize> = (0..cells.len()).filter(|&i| cells[i].simulator == kind).collect();
        idx.sort_by(|&a, &b| cells[a].d_combined.total_cmp(&cells[b].d_combined).then(a.cmp(&b)));
        for (r, i) in idx.into_iter().enumerate() {
            cells[i].rank = r + 1;
        }
    }
}

/// Runs every cell of `spec` against `source`. Cells are processed in
/// parallel; the result order is fixed by the spec.
pub fn run_sweep(ctx: &SceneContext, source: &FrameSequence, spec: &SweepSpec) -> Result<ResultsTable, CliError> {
    spec.validate()?;
    if source.len() < 2 {
        return Err(CliError::validation("source needs at least two frames"));
    }
    if source.dims() != ctx.grid.image_size() {
        return Err(CliError::validation(format!(
            "source frames are {:?} but the scene is {:?}",
            source.dims(),
            ctx.grid.image_size()
        )));
    }
    let provider = spec.flow.provider();
    let reference =
        Reference::new(source, provider, &spec.features).map_err(|e| CliError::runtime(format!("source: {e}")))?;
    let mut jobs = Vec::with_capacity(spec.cell_count());
    for &kind in &spec.simulators {
        for &a in &spec.agent_levels {
            for &s in &spec.speed_levels {
                jobs.push((kind, a, s));
            }
        }
    }
    let mut cells = jobs
        .par_iter()
        .map(|&(kind, agents, speed)| {
            let video = ctx.composite(spec, kind, agents, speed, spec.seed, source.len())?;
            let d = reference.compare(&video, provider, &spec.features).map_err(|e| {
                CliError::runtime(format!("cell {}/{}/{}: {e}", kind.name(), agents.name(), speed.name()))
            })?;
            Ok(CellResult {
                simulator: kind,
                agent_level: agents,
                speed_level: speed,
                n_agents: agents.agents(ctx.scene.crowd.agents),
                speed_scale: speed.multiplier(),
                d_hoof: d.d_hoof,
                d_h2d: d.d_h2d,
                d_track: d.d_track,
                d_combined: d.d_combined,
                rank: 0,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    assign_ranks(&mut cells);
    Ok(ResultsTable {
        seed: spec.seed,
        simulators: spec.simulators.clone(),
        agent_levels: spec.agent_levels.clone(),
        speed_levels: spec.speed_levels.clone(),
        v_max: reference.bundle.perception.v_max,
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_multipliers() {
        assert_eq!(AgentLevel::Few.agents(10), 5);
        assert_eq!(AgentLevel::Many.agents(7), 14);
        assert_eq!(AgentLevel::Empty.agents(7), 0);
        let speeds: Vec<f64> = SpeedLevel::STANDARD.iter().map(|s| s.multiplier()).collect();
        assert_eq!(speeds, vec![0.25, 0.5, 1.0, 1.5]);
    }

    #[test]
    fn sweep_json_defaults() {
        let spec = SweepSpec::from_json(r#"{"seed": 3}"#).unwrap();
        assert_eq!(spec, SweepSpec::standard(3));
        assert_eq!(spec.cell_count(), 24);
        let spec = SweepSpec::from_json(r#"{"seed": 3, "simulators": ["boids"], "agent_levels": ["Same"]}"#).unwrap();
        assert_eq!(spec.cell_count(), 4);
    }

    #[test]
    fn empty_level_list_rejected() {
        let e = SweepSpec::from_json(r#"{"seed": 1, "speed_levels": []}"#).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(SweepSpec::from_json(r#"{"seed": 1, "simulators": ["dijkstra"]}"#).is_err());
    }

    #[test]
    fn ranks_are_per_simulator() {
        let cell = |simulator, d| CellResult {
            simulator,
            agent_level: AgentLevel::Same,
            speed_level: SpeedLevel::Same,
            n_agents: 1,
            speed_scale: 1.0,
            d_hoof: d,
            d_h2d: d,
            d_track: d,
            d_combined: d,
            rank: 0,
        };
        let mut cells =
            vec![cell(SimulatorKind::Csec, 0.3), cell(SimulatorKind::Csec, 0.1), cell(SimulatorKind::Boids, 0.2)];
        assign_ranks(&mut cells);
        let ranks: Vec<usize> = cells.iter().map(|c| c.rank).collect();
        assert_eq!(ranks, vec![2, 1, 1]);
    }
}

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceAgent {
    pub id: u32,
    pub x: f64,
    pub y: f64,
    /// Direction of travel in world coordinates, radians.
    pub heading: f64,
}

/// One output frame: time in seconds since recording started.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceFrame {
    pub t: f64,
    pub agents: Vec<TraceAgent>,
}

/// Counters gathered while recording.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TraceStats {
    pub agent_frames: u64,
    /// Agent-frames whose position fell inside an obstacle cell.
    pub obstacle_violations: u64,
    /// Largest observed `|velocity| / desired_speed`.
    pub max_speed_ratio: f64,
    pub spawned: u64,
    pub arrived: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    pub frames: Vec<TraceFrame>,
    pub output_fps: f64,
    pub stats: TraceStats,
}

impl SimulationTrace {
    pub fn duration_frames(&self) -> usize {
        self.frames.len()
    }

    /// One JSON object per line, `{t, agents:[{id, x, y, heading}]}`.
    pub fn write_jsonl(&self, mut out: impl Write) -> std::io::Result<()> {
        for f in &self.frames {
            serde_json::to_writer(&mut out, f)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl(input: impl BufRead, output_fps: f64) -> std::io::Result<Self> {
        let mut frames = Vec::new();
        for line in input.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let frame: TraceFrame =
                serde_json::from_str(&line).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
            frames.push(frame);
        }
        Ok(Self { frames, output_fps, stats: TraceStats::default() })
    }
}

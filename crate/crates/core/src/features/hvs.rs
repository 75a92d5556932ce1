//! Weber–Fechner perceived-motion transform.

use serde::{Deserialize, Serialize};

/// Motion below this magnitude (px/frame) is perceived as none.
pub const DEFAULT_V_FLOOR: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HvsParams {
    /// Weber constant.
    pub l: f64,
    /// Upper perception threshold, px/frame. `None` takes the 99th
    /// percentile of the source video's flow magnitudes.
    pub v_max: Option<f64>,
    pub v_floor: f64,
    pub weber_enabled: bool,
    pub weber_hoof: bool,
    pub weber_h2d: bool,
}

impl Default for HvsParams {
    fn default() -> Self {
        Self { l: 1.0, v_max: None, v_floor: DEFAULT_V_FLOOR, weber_enabled: true, weber_hoof: true, weber_h2d: true }
    }
}

impl HvsParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.l > 0.0) {
            return Err("Weber constant must be positive".into());
        }
        if !(self.v_floor > 0.0) {
            return Err("v_floor must be positive".into());
        }
        if let Some(v) = self.v_max {
            if !(v > self.v_floor) {
                return Err("v_max must exceed v_floor".into());
            }
        }
        Ok(())
    }

    /// `v_max`, or `fallback` when unset.
    pub fn v_max_or(&self, fallback: f64) -> f64 {
        self.v_max.unwrap_or(fallback)
    }
}

/// HVS parameters with `v_max` fixed and the per-feature toggles folded in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Perception {
    pub l: f64,
    pub v_floor: f64,
    pub v_max: f64,
    pub hoof: bool,
    pub h2d: bool,
}

impl Perception {
    pub fn resolve(params: &HvsParams, v_max: f64) -> Self {
        Self {
            l: params.l,
            v_floor: params.v_floor,
            v_max,
            hoof: params.weber_enabled && params.weber_hoof,
            h2d: params.weber_enabled && params.weber_h2d,
        }
    }

    /// No transform anywhere.
    pub fn raw(v_max: f64) -> Self {
        Self { l: 1.0, v_floor: DEFAULT_V_FLOOR, v_max, hoof: false, h2d: false }
    }

    pub fn perceive(&self, v: f64) -> f64 {
        fechner_transform(v, self.l, self.v_floor, self.v_max)
    }
}

/// `L * ln(clamp(v, v_floor, v_max) / v_floor)`: zero at the floor,
/// increasing, saturating at `v_max`.
pub fn fechner_transform(v: f64, l: f64, v_floor: f64, v_max: f64) -> f64 {
    let v = v.max(v_floor).min(v_max.max(v_floor));
    l * (v / v_floor).ln()
}

/// Fraction-`q` percentile (nearest rank) of `values`; `None` when empty.
pub fn percentile(values: &mut [f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let rank = ((q * values.len() as f64).ceil() as usize).clamp(1, values.len());
    Some(values[rank - 1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_at_floor() {
        assert_eq!(fechner_transform(0.05, 1.0, 0.05, 3.0), 0.0);
        assert_eq!(fechner_transform(0.0, 1.0, 0.05, 3.0), 0.0);
    }

    #[test]
    fn one_at_v_max_one_e_above_floor() {
        let v_max = 2.0;
        let floor = v_max / std::f64::consts::E;
        assert!((fechner_transform(v_max, 1.0, floor, v_max) - 1.0).abs() < 1e-12);
        // capped beyond v_max
        assert_eq!(fechner_transform(10.0, 1.0, floor, v_max), fechner_transform(v_max, 1.0, floor, v_max));
    }

    #[test]
    fn percentile_nearest_rank() {
        let mut v: Vec<f64> = (1..=100).map(|x| x as f64).collect();
        assert_eq!(percentile(&mut v, 0.99), Some(99.0));
        assert_eq!(percentile(&mut [], 0.5), None);
    }

    proptest! {
        #[test]
        fn monotone(a in 0.0f64..20.0, b in 0.0f64..20.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(fechner_transform(lo, 1.3, 0.05, 8.0) <= fechner_transform(hi, 1.3, 0.05, 8.0));
        }
    }
}

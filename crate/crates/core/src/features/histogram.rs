//! Feature histograms, flux accumulation and the Bhattacharyya distance.

use serde::{Deserialize, Serialize};

use super::FeatureError;

/// Lower clamp of the Bhattacharyya coefficient.
pub const BC_EPSILON: f64 = 1e-12;

/// Distance returned for histograms with no common support.
pub fn max_distance() -> f64 {
    -BC_EPSILON.ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BinGeometry {
    /// Folded flow orientation over [-pi/2, pi/2].
    Angular { bins: usize },
    /// Motion levels over [-range, range]^2.
    Motion { bins_x: usize, bins_y: usize, range: f64 },
    /// Image-position cells of `cell` pixels.
    Spatial { cols: usize, rows: usize, cell: usize },
}

impl BinGeometry {
    pub fn len(&self) -> usize {
        match *self {
            BinGeometry::Angular { bins } => bins,
            BinGeometry::Motion { bins_x, bins_y, .. } => bins_x * bins_y,
            BinGeometry::Spatial { cols, rows, .. } => cols * rows,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub geometry: BinGeometry,
    pub bins: Vec<f64>,
}

impl Histogram {
    pub fn zeros(geometry: BinGeometry) -> Self {
        Self { geometry, bins: vec![0.0; geometry.len()] }
    }

    pub fn total(&self) -> f64 {
        self.bins.iter().sum()
    }

    /// True when no mass has been recorded.
    pub fn is_empty(&self) -> bool {
        self.bins.iter().all(|&b| b == 0.0)
    }

    /// L1-normalized copy; empty histograms stay all zero.
    pub fn normalized(&self) -> Self {
        let total = self.total();
        if total <= 0.0 {
            return Self::zeros(self.geometry);
        }
        Self { geometry: self.geometry, bins: self.bins.iter().map(|b| b / total).collect() }
    }

    pub fn add_assign(&mut self, other: &Histogram) -> Result<(), FeatureError> {
        if self.geometry != other.geometry {
            return Err(FeatureError::GeometryMismatch);
        }
        for (a, b) in self.bins.iter_mut().zip(&other.bins) {
            *a += b;
        }
        Ok(())
    }
}

/// Element-wise sum of unnormalized histograms, then L1-normalized.
pub fn flux<'a>(parts: impl IntoIterator<Item = &'a Histogram>) -> Result<Histogram, FeatureError> {
    let mut iter = parts.into_iter();
    let first = iter.next().ok_or(FeatureError::EmptyInput)?;
    let mut sum = first.clone();
    for h in iter {
        sum.add_assign(h)?;
    }
    Ok(sum.normalized())
}

/// `-ln sum(sqrt(p q))` with the coefficient clamped to `[BC_EPSILON, 1]`.
/// Two empty histograms are at distance 0; empty against non-empty gives
/// the maximum.
pub fn bhattacharyya(p: &Histogram, q: &Histogram) -> Result<f64, FeatureError> {
    if p.geometry != q.geometry {
        return Err(FeatureError::GeometryMismatch);
    }
    match (p.is_empty(), q.is_empty()) {
        (true, true) => return Ok(0.0),
        (true, false) | (false, true) => return Ok(max_distance()),
        _ => {}
    }
    let bc: f64 = p.bins.iter().zip(&q.bins).map(|(a, b)| (a * b).sqrt()).sum();
    Ok(-bc.clamp(BC_EPSILON, 1.0).ln())
}

//! Histograms of oriented optical flow and 2D motion-level histograms.

use std::f64::consts::{FRAC_PI_2, PI};

use super::flow::FlowField;
use super::histogram::{BinGeometry, Histogram};
use super::hvs::Perception;

/// Axis-aligned pixel region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl Window {
    pub fn full(width: usize, height: usize) -> Self {
        Self { x: 0, y: 0, width, height }
    }
}

/// Tiles of `size` pixels covering the image; edge tiles are cropped.
pub fn tile_windows(width: usize, height: usize, size: usize) -> Vec<Window> {
    let size = size.max(1);
    let mut out = Vec::new();
    for y in (0..height).step_by(size) {
        for x in (0..width).step_by(size) {
            out.push(Window { x, y, width: size.min(width - x), height: size.min(height - y) });
        }
    }
    out
}

/// Angle bin of a flow vector after folding `vx` to be non-negative.
pub fn hoof_bin(vx: f64, vy: f64, bins: usize) -> usize {
    let theta = vy.atan2(vx.abs());
    (((theta + FRAC_PI_2) / PI * bins as f64).floor() as usize).min(bins - 1)
}

/// Unnormalized HOOF: each vector adds its (perceived) magnitude to its
/// folded-angle bin. `bins` must be even and at least 4.
pub fn hoof_counts(flow: &FlowField, window: Window, bins: usize, perception: &Perception) -> Histogram {
    assert!(bins >= 4 && bins.is_multiple_of(2), "HOOF needs an even bin count of at least 4");
    let mut h = Histogram::zeros(BinGeometry::Angular { bins });
    for y in window.y..window.y + window.height {
        for x in window.x..window.x + window.width {
            let (vx, vy) = flow.at(x, y);
            let (vx, vy) = (vx as f64, vy as f64);
            let m = vx.hypot(vy);
            let w = if perception.hoof { perception.perceive(m) } else { m };
            if w > 0.0 {
                h.bins[hoof_bin(vx, vy, bins)] += w;
            }
        }
    }
    h
}

pub fn hoof(flow: &FlowField, window: Window, bins: usize, perception: &Perception) -> Histogram {
    hoof_counts(flow, window, bins, perception).normalized()
}

/// H2D level range: `v_max`, perceived when the transform is on.
pub fn h2d_range(perception: &Perception) -> f64 {
    if perception.h2d {
        perception.perceive(perception.v_max)
    } else {
        perception.v_max
    }
}

fn level(x: f64, range: f64, bins: usize) -> usize {
    let t = ((x + range) / (2.0 * range) * bins as f64).floor();
    t.clamp(0.0, (bins - 1) as f64) as usize
}

/// Unnormalized H2D: pixel counts per `(vx, vy)` level cell over
/// `[-range, range]^2`, clipped at the edges. With the transform on, each
/// vector keeps its direction and takes its perceived magnitude.
pub fn h2d_counts(flow: &FlowField, window: Window, bins: usize, perception: &Perception) -> Histogram {
    let range = h2d_range(perception);
    let mut h = Histogram::zeros(BinGeometry::Motion { bins_x: bins, bins_y: bins, range });
    for y in window.y..window.y + window.height {
        for x in window.x..window.x + window.width {
            let (vx, vy) = flow.at(x, y);
            let (mut vx, mut vy) = (vx as f64, vy as f64);
            if perception.h2d {
                let m = vx.hypot(vy);
                let scale = if m > 0.0 { perception.perceive(m) / m } else { 0.0 };
                vx *= scale;
                vy *= scale;
            }
            h.bins[level(vy, range, bins) * bins + level(vx, range, bins)] += 1.0;
        }
    }
    h
}

pub fn h2d(flow: &FlowField, window: Window, bins: usize, perception: &Perception) -> Histogram {
    h2d_counts(flow, window, bins, perception).normalized()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::hvs::HvsParams;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_flow(seed: u64, w: usize, h: usize) -> FlowField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = (0..w * h).map(|_| rng.random_range(-4.0f32..4.0)).collect();
        let v = (0..w * h).map(|_| rng.random_range(-4.0f32..4.0)).collect();
        FlowField::from_components(w, h, u, v).unwrap()
    }

    #[test]
    fn rightward_vector_lands_in_the_zero_angle_bin() {
        let f = FlowField::uniform(1, 1, 1.0, 0.0);
        let h = hoof(&f, Window::full(1, 1), 32, &Perception::raw(4.0));
        assert_eq!(h.bins[16], 1.0);
        assert_eq!(h.total(), 1.0);
    }

    #[test]
    fn opposite_horizontal_fields_match() {
        let p = Perception::raw(4.0);
        let a = hoof(&FlowField::uniform(8, 8, 1.0, 0.0), Window::full(8, 8), 32, &p);
        let b = hoof(&FlowField::uniform(8, 8, -1.0, 0.0), Window::full(8, 8), 32, &p);
        assert_eq!(a, b);
    }

    #[test]
    fn hoof_matches_per_vector_oracle() {
        let f = random_flow(5, 12, 9);
        let p = Perception::raw(4.0);
        let win = Window { x: 2, y: 1, width: 7, height: 6 };
        let got = hoof_counts(&f, win, 16, &p);
        let mut oracle = vec![0.0; 16];
        for y in 1..7 {
            for x in 2..9 {
                let (vx, vy) = f.at(x, y);
                let (vx, vy) = (vx as f64, vy as f64);
                // fold onto the right half-plane
                let ang = (vy / vx.hypot(vy)).asin();
                let bin = (((ang + FRAC_PI_2) / PI) * 16.0).floor().min(15.0) as usize;
                oracle[bin] += vx.hypot(vy);
            }
        }
        for (a, b) in got.bins.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_flow_fills_the_centre_level() {
        let p = Perception::raw(4.0);
        let h = h2d(&FlowField::zeros(6, 5), Window::full(6, 5), 16, &p);
        assert_eq!(h.bins[8 * 16 + 8], 1.0);
        let h = h2d(&FlowField::uniform(6, 5, 2.0, 0.0), Window::full(6, 5), 16, &p);
        // (2 + 4) / 8 * 16 = 12
        assert_eq!(h.bins[8 * 16 + 12], 1.0);
    }

    #[test]
    fn h2d_matches_double_loop_oracle() {
        let f = random_flow(8, 10, 10);
        let p = Perception::raw(3.0);
        let got = h2d_counts(&f, Window::full(10, 10), 16, &p);
        let mut oracle = vec![0.0; 256];
        for y in 0..10 {
            for x in 0..10 {
                let (vx, vy) = f.at(x, y);
                let mut ix = 0;
                let mut iy = 0;
                for k in 0..16 {
                    let lo = -3.0 + k as f64 * 6.0 / 16.0;
                    if vx as f64 >= lo {
                        ix = k;
                    }
                    if vy as f64 >= lo {
                        iy = k;
                    }
                }
                oracle[iy * 16 + ix] += 1.0;
            }
        }
        assert_eq!(got.bins, oracle);
    }

    #[test]
    fn tiles_cover_the_image() {
        let t = tile_windows(320, 240, 64);
        assert_eq!(t.len(), 20);
        assert_eq!(t.iter().map(|w| w.width * w.height).sum::<usize>(), 320 * 240);
        assert_eq!(t.last().unwrap().height, 48);
    }

    #[test]
    fn weber_off_equals_raw_magnitudes() {
        let f = random_flow(9, 16, 16);
        let off = Perception::resolve(&HvsParams { weber_enabled: false, l: 3.0, ..Default::default() }, 2.5);
        let raw = Perception::raw(2.5);
        let w = Window::full(16, 16);
        assert_eq!(hoof(&f, w, 32, &off), hoof(&f, w, 32, &raw));
        assert_eq!(h2d(&f, w, 16, &off), h2d(&f, w, 16, &raw));
        let on = Perception::resolve(&HvsParams::default(), 2.5);
        assert_ne!(hoof(&f, w, 32, &on), hoof(&f, w, 32, &raw));
    }

    proptest! {
        #[test]
        fn hoof_is_mirror_invariant(seed in 0u64..1000) {
            let f = random_flow(seed, 9, 7);
            for p in [Perception::raw(4.0), Perception::resolve(&HvsParams::default(), 4.0)] {
                let a = hoof(&f, Window::full(9, 7), 32, &p);
                let b = hoof(&f.mirrored(), Window::full(9, 7), 32, &p);
                for (x, y) in a.bins.iter().zip(&b.bins) {
                    prop_assert!((x - y).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn normalized_histograms_sum_to_one(seed in 0u64..1000) {
            let f = random_flow(seed, 8, 8);
            let p = Perception::resolve(&HvsParams::default(), 3.0);
            for h in [hoof(&f, Window::full(8, 8), 32, &p), h2d(&f, Window::full(8, 8), 16, &p)] {
                prop_assert!(h.is_empty() || (h.total() - 1.0).abs() < 1e-9);
            }
        }
    }
}

//! Blob detection against the mean background and constant-velocity Kalman
//! tracking.

use nalgebra::{Matrix2, Matrix2x4, Matrix4, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use super::flow::FlowField;
use super::histogram::{BinGeometry, Histogram};
use super::FeatureError;
use crate::geometry::Point2;
use crate::media::{extract_background, FrameSequence, Image};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackerParams {
    /// Gray-level difference from the background marking foreground.
    pub fg_threshold: u8,
    pub min_area: usize,
    pub gate_radius: f64,
    pub max_missed: usize,
    pub min_track_len: usize,
    pub process_noise: f64,
    pub measurement_noise: f64,
}

impl Default for TrackerParams {
    fn default() -> Self {
        Self {
            fg_threshold: 25,
            min_area: 30,
            gate_radius: 30.0,
            max_missed: 5,
            min_track_len: 5,
            process_noise: 0.05,
            measurement_noise: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackSample {
    pub t: usize,
    pub u: Point2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tracklet {
    pub id: usize,
    pub samples: Vec<TrackSample>,
}

/// Connected foreground region.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub centroid: Point2,
    pub area: usize,
    pub pixels: Vec<usize>,
}

fn foreground_mask(frame: &Image, background: &Image, threshold: u8) -> Vec<bool> {
    let a = frame.luma_plane();
    let b = background.luma_plane();
    a.iter().zip(&b).map(|(x, y)| (x - y).abs() > threshold as f32).collect()
}

fn morph(mask: &[bool], w: usize, h: usize, erode: bool) -> Vec<bool> {
    let mut out = vec![false; mask.len()];
    for y in 0..h {
        for x in 0..w {
            let mut acc = erode;
            'n: for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                    let v = nx >= 0
                        && ny >= 0
                        && (nx as usize) < w
                        && (ny as usize) < h
                        && mask[ny as usize * w + nx as usize];
                    if erode && !v {
                        acc = false;
                        break 'n;
                    }
                    if !erode && v {
                        acc = true;
                        break 'n;
                    }
                }
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// Foreground blobs of one frame: threshold, 3x3 opening, 8-connected
/// components of at least `min_area` pixels.
pub fn detect(frame: &Image, background: &Image, params: &TrackerParams) -> Vec<Detection> {
    let (w, h) = (frame.width() as usize, frame.height() as usize);
    let mask = foreground_mask(frame, background, params.fg_threshold);
    let mask = morph(&morph(&mask, w, h, true), w, h, false);
    let mut seen = vec![false; mask.len()];
    let mut out = Vec::new();
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        let mut stack = vec![start];
        let mut pixels = Vec::new();
        while let Some(i) = stack.pop() {
            pixels.push(i);
            let (x, y) = ((i % w) as i64, (i / w) as i64);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx as usize >= w || ny as usize >= h {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if mask[j] && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        if pixels.len() < params.min_area {
            continue;
        }
        pixels.sort_unstable();
        let (sx, sy) =
            pixels.iter().fold((0.0, 0.0), |(a, b), &i| (a + (i % w) as f64 + 0.5, b + (i / w) as f64 + 0.5));
        let n = pixels.len() as f64;
        out.push(Detection { centroid: Point2::new(sx / n, sy / n), area: pixels.len(), pixels });
    }
    out
}

struct Track {
    id: usize,
    x: Vector4<f64>,
    p: Matrix4<f64>,
    missed: usize,
    samples: Vec<TrackSample>,
}

struct Kalman {
    f: Matrix4<f64>,
    q: Matrix4<f64>,
    h: Matrix2x4<f64>,
    r: Matrix2<f64>,
}

impl Kalman {
    fn new(params: &TrackerParams) -> Self {
        let mut f = Matrix4::identity();
        f[(0, 2)] = 1.0;
        f[(1, 3)] = 1.0;
        // discrete white-acceleration model, unit time step
        let q = params.process_noise;
        let mut qm = Matrix4::zeros();
        for (a, b) in [(0, 2), (1, 3)] {
            qm[(a, a)] = q / 4.0;
            qm[(a, b)] = q / 2.0;
            qm[(b, a)] = q / 2.0;
            qm[(b, b)] = q;
        }
        let h = Matrix2x4::new(1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0);
        Self { f, q: qm, h, r: Matrix2::identity() * params.measurement_noise }
    }

    fn predict(&self, t: &mut Track) {
        t.x = self.f * t.x;
        t.p = self.f * t.p * self.f.transpose() + self.q;
    }

    fn update(&self, t: &mut Track, z: Point2) {
        let y = Vector2::new(z.x, z.y) - self.h * t.x;
        let s = self.h * t.p * self.h.transpose() + self.r;
        let Some(s_inv) = s.try_inverse() else { return };
        let k = t.p * self.h.transpose() * s_inv;
        t.x += k * y;
        t.p = (Matrix4::identity() - k * self.h) * t.p;
    }
}

fn mean_flow(flow: Option<&FlowField>, pixels: &[usize]) -> (f64, f64) {
    let Some(f) = flow else { return (0.0, 0.0) };
    let (su, sv) = pixels.iter().fold((0.0, 0.0), |(a, b), &i| (a + f.u()[i] as f64, b + f.v()[i] as f64));
    (su / pixels.len() as f64, sv / pixels.len() as f64)
}

/// Tracks foreground blobs through `seq`. `flows[t]` is the flow from frame
/// `t` to `t + 1` and seeds the velocity of tracks born at frame `t`.
pub fn track(seq: &FrameSequence, flows: &[FlowField], params: &TrackerParams) -> Result<Vec<Tracklet>, FeatureError> {
    if seq.is_empty() {
        return Ok(Vec::new());
    }
    let background = extract_background(seq).expect("non-empty sequence");
    track_with_background(seq, &background, flows, params)
}

pub fn track_with_background(
    seq: &FrameSequence,
    background: &Image,
    flows: &[FlowField],
    params: &TrackerParams,
) -> Result<Vec<Tracklet>, FeatureError> {
    if flows.len() + 1 != seq.len() && !(seq.is_empty() && flows.is_empty()) {
        return Err(FeatureError::LengthMismatch { frames: seq.len(), flows: flows.len() });
    }
    use rayon::prelude::*;
    let detections: Vec<Vec<Detection>> = seq.frames().par_iter().map(|f| detect(f, background, params)).collect();
    let kf = Kalman::new(params);
    let mut live: Vec<Track> = Vec::new();
    let mut done: Vec<Track> = Vec::new();
    let mut next_id = 0;
    for (t, dets) in detections.iter().enumerate() {
        for tr in live.iter_mut() {
            kf.predict(tr);
        }
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for (ti, tr) in live.iter().enumerate() {
            let pred = Point2::new(tr.x[0], tr.x[1]);
            for (di, d) in dets.iter().enumerate() {
                let dist = pred.distance(d.centroid);
                if dist <= params.gate_radius {
                    pairs.push((dist, ti, di));
                }
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut track_used = vec![false; live.len()];
        let mut det_used = vec![false; dets.len()];
        for (_, ti, di) in pairs {
            if track_used[ti] || det_used[di] {
                continue;
            }
            track_used[ti] = true;
            det_used[di] = true;
            let tr = &mut live[ti];
            kf.update(tr, dets[di].centroid);
            tr.missed = 0;
            tr.samples.push(TrackSample { t, u: Point2::new(tr.x[0], tr.x[1]) });
        }
        for (ti, tr) in live.iter_mut().enumerate() {
            if !track_used[ti] {
                tr.missed += 1;
            }
        }
        let (keep, dead): (Vec<Track>, Vec<Track>) = live.into_iter().partition(|tr| tr.missed <= params.max_missed);
        live = keep;
        done.extend(dead);
        for (di, d) in dets.iter().enumerate() {
            if det_used[di] {
                continue;
            }
            let flow = flows.get(t).or_else(|| t.checked_sub(1).and_then(|p| flows.get(p)));
            let (vx, vy) = mean_flow(flow, &d.pixels);
            let mut p = Matrix4::identity() * params.measurement_noise;
            p[(2, 2)] = 4.0;
            p[(3, 3)] = 4.0;
            live.push(Track {
                id: next_id,
                x: Vector4::new(d.centroid.x, d.centroid.y, vx, vy),
                p,
                missed: 0,
                samples: vec![TrackSample { t, u: d.centroid }],
            });
            next_id += 1;
        }
    }
    done.extend(live);
    done.sort_by_key(|t| t.id);
    Ok(done
        .into_iter()
        .filter(|t| t.samples.len() >= params.min_track_len)
        .map(|t| Tracklet { id: t.id, samples: t.samples })
        .collect())
}

/// Time-collapsed spatial histogram of tracklet samples over `cell`-pixel
/// image cells, L1-normalized.
pub fn tracklet_histogram(tracks: &[Tracklet], width: usize, height: usize, cell: usize) -> Histogram {
    tracklet_counts(tracks, width, height, cell).normalized()
}

pub fn tracklet_counts(tracks: &[Tracklet], width: usize, height: usize, cell: usize) -> Histogram {
    let cell = cell.max(1);
    let (cols, rows) = (width.div_ceil(cell), height.div_ceil(cell));
    let mut h = Histogram::zeros(BinGeometry::Spatial { cols, rows, cell });
    for s in tracks.iter().flat_map(|t| &t.samples) {
        if !(s.u.x >= 0.0 && s.u.y >= 0.0 && s.u.x < width as f64 && s.u.y < height as f64) {
            continue;
        }
        let (c, r) = ((s.u.x as usize / cell).min(cols - 1), (s.u.y as usize / cell).min(rows - 1));
        h.bins[r * cols + c] += 1.0;
    }
    h
}

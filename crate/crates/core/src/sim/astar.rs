//! A* route planning over grid cells.
//!
//! Moves are 8-connected with cost 1 for orthogonal and sqrt(2) for diagonal
//! steps. A diagonal step is only allowed when both orthogonally adjacent
//! cells are passable, so routes never squeeze between two obstacle corners.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::SQRT_2;

use crate::geometry::PerspectiveGrid;

use super::SimError;

/// `(row, col)`
pub type Cell = (usize, usize);

/// A planned route, including both end cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridPath {
    pub cells: Vec<Cell>,
    pub straight_steps: u32,
    pub diagonal_steps: u32,
}

impl GridPath {
    pub fn cost(&self) -> f64 {
        self.straight_steps as f64 + self.diagonal_steps as f64 * SQRT_2
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Open {
    f: f64,
    h: f64,
    idx: usize,
}

impl Eq for Open {}

impl Ord for Open {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on f, then h, then index for determinism
        other.f.total_cmp(&self.f).then_with(|| other.h.total_cmp(&self.h)).then_with(|| other.idx.cmp(&self.idx))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn octile(a: Cell, b: Cell) -> f64 {
    let dr = a.0.abs_diff(b.0) as f64;
    let dc = a.1.abs_diff(b.1) as f64;
    let (lo, hi) = if dr < dc { (dr, dc) } else { (dc, dr) };
    hi - lo + lo * SQRT_2
}

const STEPS: [(isize, isize); 8] = [(-1, 0), (1, 0), (0, -1), (0, 1), (-1, -1), (-1, 1), (1, -1), (1, 1)];

/// Plans on the grid's labels; obstacle cells are impassable.
pub fn plan_path(grid: &PerspectiveGrid, start: Cell, goal: Cell) -> Result<GridPath, SimError> {
    plan_path_on(grid.rows(), grid.cols(), |(r, c)| grid.label(r, c).is_passable(), start, goal)
}

/// A* over an arbitrary `rows x cols` passability map.
pub fn plan_path_on(
    rows: usize,
    cols: usize,
    passable: impl Fn(Cell) -> bool,
    start: Cell,
    goal: Cell,
) -> Result<GridPath, SimError> {
    let inside = |c: Cell| c.0 < rows && c.1 < cols;
    if !inside(start) || !inside(goal) || !passable(start) || !passable(goal) {
        return Err(SimError::NoPath { start, goal });
    }
    let n = rows * cols;
    let index = |c: Cell| c.0 * cols + c.1;
    let mut g = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut heap = BinaryHeap::new();
    g[index(start)] = 0.0;
    let h0 = octile(start, goal);
    heap.push(Open { f: h0, h: h0, idx: index(start) });

    while let Some(Open { idx, .. }) = heap.pop() {
        if closed[idx] {
            continue;
        }
        closed[idx] = true;
        let cell = (idx / cols, idx % cols);
        if cell == goal {
            return Ok(reconstruct(&parent, idx, cols));
        }
        for (dr, dc) in STEPS {
            let (nr, nc) = (cell.0 as isize + dr, cell.1 as isize + dc);
            if nr < 0 || nc < 0 || nr as usize >= rows || nc as usize >= cols {
                continue;
            }
            let next = (nr as usize, nc as usize);
            if !passable(next) {
                continue;
            }
            let diagonal = dr != 0 && dc != 0;
            if diagonal && !(passable((cell.0, next.1)) && passable((next.0, cell.1))) {
                continue;
            }
            let nidx = index(next);
            if closed[nidx] {
                continue;
            }
            let tentative = g[idx] + if diagonal { SQRT_2 } else { 1.0 };
            if tentative < g[nidx] {
                g[nidx] = tentative;
                parent[nidx] = idx;
                let h = octile(next, goal);
                heap.push(Open { f: tentative + h, h, idx: nidx });
            }
        }
    }
    Err(SimError::NoPath { start, goal })
}

fn reconstruct(parent: &[usize], goal_idx: usize, cols: usize) -> GridPath {
    let mut cells = vec![(goal_idx / cols, goal_idx % cols)];
    let mut cur = goal_idx;
    while parent[cur] != usize::MAX {
        cur = parent[cur];
        cells.push((cur / cols, cur % cols));
    }
    cells.reverse();
    let (mut straight_steps, mut diagonal_steps) = (0, 0);
    for w in cells.windows(2) {
        if w[0].0 != w[1].0 && w[0].1 != w[1].1 {
            diagonal_steps += 1;
        } else {
            straight_steps += 1;
        }
    }
    GridPath { cells, straight_steps, diagonal_steps }
}

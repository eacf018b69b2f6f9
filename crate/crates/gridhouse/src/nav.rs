//! Wavefront path planning on the inflated obstacle map, waypoint-to-action
//! conversion, and frontier selection for exploration.
//!
//! The arrival-time field solves |grad T| = 1 at unit speed with a quadratic
//! axis update plus a one-sided diagonal update (gated so wavefronts cannot
//! slip through sealed corners). A Gauss-Seidel polish pass runs the solution
//! down to a fixed point, which keeps every accepted value consistent with
//! the update recomputed from its final neighbors.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::grid::{Cell, Heading};
use crate::memory::SemanticMap;
use crate::world::{Action, AgentPose};

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Obstacle view used for planning: `blocked` cells are impassable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObstacleGrid {
    pub width: i32,
    pub height: i32,
    pub blocked: Vec<bool>,
}

impl ObstacleGrid {
    pub fn new(width: i32, height: i32) -> Self {
        ObstacleGrid {
            width,
            height,
            blocked: vec![false; (width * height) as usize],
        }
    }

    pub fn idx(&self, c: Cell) -> usize {
        (c.y * self.width + c.x) as usize
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.x >= 0 && c.y >= 0 && c.x < self.width && c.y < self.height
    }

    pub fn is_blocked(&self, c: Cell) -> bool {
        !self.in_bounds(c) || self.blocked[self.idx(c)]
    }

    pub fn set_blocked(&mut self, c: Cell, v: bool) {
        let i = self.idx(c);
        self.blocked[i] = v;
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NavError {
    #[error("empty goal set")]
    EmptyGoals,
    #[error("path does not start at the agent cell")]
    DiscontinuousPath,
}

/// Arrival-time field: T = 0 exactly on goal cells, infinity on blocked or
/// unreachable cells.
#[derive(Debug, Clone, PartialEq)]
pub struct CostField {
    pub width: i32,
    pub height: i32,
    t: Vec<f64>,
    pub goals: Vec<Cell>,
}

impl CostField {
    pub fn t(&self, c: Cell) -> f64 {
        if c.x < 0 || c.y < 0 || c.x >= self.width || c.y >= self.height {
            f64::INFINITY
        } else {
            self.t[(c.y * self.width + c.x) as usize]
        }
    }

    pub fn reachable(&self, c: Cell) -> bool {
        self.t(c).is_finite()
    }

    /// Max |update(c) - T(c)| over free finite cells: the discrete eikonal
    /// consistency residual.
    pub fn residual(&self, grid: &ObstacleGrid) -> f64 {
        let mut worst: f64 = 0.0;
        for y in 0..self.height {
            for x in 0..self.width {
                let c = Cell::new(x, y);
                if grid.is_blocked(c) || self.goals.contains(&c) || !self.t(c).is_finite() {
                    continue;
                }
                let u = eikonal_update(grid, &self.t, c);
                worst = worst.max((u - self.t(c)).abs());
            }
        }
        worst
    }

    /// Grid of fixed-precision arrival times for golden-file comparisons.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for y in 0..self.height {
            let row: Vec<String> = (0..self.width)
                .map(|x| {
                    let t = self.t(Cell::new(x, y));
                    if t.is_finite() {
                        format!("{t:7.3}")
                    } else {
                        "    inf".to_string()
                    }
                })
                .collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }
}

fn eikonal_update(grid: &ObstacleGrid, t: &[f64], c: Cell) -> f64 {
    let get = |cell: Cell| -> f64 {
        if grid.is_blocked(cell) {
            f64::INFINITY
        } else {
            t[grid.idx(cell)]
        }
    };
    // axis stencil: standard two-neighbor quadratic update
    let a = get(Cell::new(c.x - 1, c.y)).min(get(Cell::new(c.x + 1, c.y)));
    let b = get(Cell::new(c.x, c.y - 1)).min(get(Cell::new(c.x, c.y + 1)));
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    let axis = if lo.is_infinite() {
        f64::INFINITY
    } else if hi - lo >= 1.0 {
        lo + 1.0
    } else {
        (lo + hi + (2.0 - (hi - lo) * (hi - lo)).sqrt()) / 2.0
    };
    // one-sided diagonal stencil, usable only when both shared axis cells
    // are free so the front cannot cut a sealed corner
    let mut diag = f64::INFINITY;
    for (dx, dy) in [(-1, -1), (1, -1), (-1, 1), (1, 1)] {
        let d = Cell::new(c.x + dx, c.y + dy);
        if grid.is_blocked(d)
            || grid.is_blocked(Cell::new(c.x + dx, c.y))
            || grid.is_blocked(Cell::new(c.x, c.y + dy))
        {
            continue;
        }
        diag = diag.min(t[grid.idx(d)] + SQRT2);
    }
    axis.min(diag)
}

#[derive(PartialEq)]
struct HeapEntry {
    t: f64,
    cell: Cell,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap with a total deterministic order
        other
            .t
            .total_cmp(&self.t)
            .then_with(|| other.cell.cmp(&self.cell))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Solves the arrival-time field for a goal set: accepted-set wavefront
/// expansion followed by sweeps to the exact fixed point.
pub fn fmm_distance(grid: &ObstacleGrid, goals: &[Cell]) -> Result<CostField, NavError> {
    if goals.is_empty() {
        return Err(NavError::EmptyGoals);
    }
    let n = (grid.width * grid.height) as usize;
    let mut t = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    let mut kept_goals = Vec::new();
    for &g in goals {
        if grid.is_blocked(g) {
            continue;
        }
        t[grid.idx(g)] = 0.0;
        kept_goals.push(g);
        heap.push(HeapEntry { t: 0.0, cell: g });
    }
    while let Some(HeapEntry { cell, .. }) = heap.pop() {
        let i = grid.idx(cell);
        if done[i] {
            continue;
        }
        done[i] = true;
        for dy in -1..=1 {
            for dx in -1..=1 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let nb = Cell::new(cell.x + dx, cell.y + dy);
                if grid.is_blocked(nb) || done[grid.idx(nb)] {
                    continue;
                }
                let nt = eikonal_update(grid, &t, nb);
                if nt < t[grid.idx(nb)] {
                    t[grid.idx(nb)] = nt;
                    heap.push(HeapEntry { t: nt, cell: nb });
                }
            }
        }
    }
    // polish to a fixed point so the field is self-consistent everywhere
    let goalset: Vec<usize> = kept_goals.iter().map(|g| grid.idx(*g)).collect();
    for sweep in 0..500 {
        let mut changed: f64 = 0.0;
        let xs: Vec<i32> = if sweep % 2 == 0 {
            (0..grid.width).collect()
        } else {
            (0..grid.width).rev().collect()
        };
        let ys: Vec<i32> = if (sweep / 2) % 2 == 0 {
            (0..grid.height).collect()
        } else {
            (0..grid.height).rev().collect()
        };
        for &y in &ys {
            for &x in &xs {
                let c = Cell::new(x, y);
                let i = grid.idx(c);
                if grid.is_blocked(c) || goalset.contains(&i) {
                    continue;
                }
                let nt = eikonal_update(grid, &t, c);
                if nt < t[i] - 1e-15 {
                    changed = changed.max(t[i] - nt);
                    t[i] = nt;
                }
            }
        }
        if changed < 1e-13 {
            break;
        }
    }
    Ok(CostField {
        width: grid.width,
        height: grid.height,
        t,
        goals: kept_goals,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PathResult {
    /// Ordered cells from the start to a goal cell, start included.
    Path(Vec<Cell>),
    Unreachable,
}

/// Greedy steepest descent over 4-neighbors; ties broken by the fixed
/// N, E, S, W order. Unreachable iff T(start) is infinite.
pub fn extract_path(field: &CostField, start: Cell) -> PathResult {
    if !field.t(start).is_finite() {
        return PathResult::Unreachable;
    }
    let mut path = vec![start];
    let mut cur = start;
    while field.t(cur) > 0.0 {
        let mut best: Option<(f64, Cell)> = None;
        for nb in cur.neighbors4() {
            let t = field.t(nb);
            if t < field.t(cur) - 1e-12 {
                let better = match best {
                    None => true,
                    Some((bt, _)) => t < bt - 1e-12,
                };
                if better {
                    best = Some((t, nb));
                }
            }
        }
        match best {
            Some((_, nb)) => {
                cur = nb;
                path.push(cur);
            }
            None => return PathResult::Unreachable,
        }
        if path.len() as i32 > field.width * field.height {
            return PathResult::Unreachable;
        }
    }
    PathResult::Path(path)
}

/// Compiles a cell path into the action alphabet: a minimal rotation
/// sequence (at most two turns, single RotateRight for 90 degrees clockwise)
/// before each MoveAhead.
pub fn path_to_actions(path: &[Cell], pose: &AgentPose) -> Result<Vec<Action>, NavError> {
    let Some(&first) = path.first() else {
        return Ok(vec![]);
    };
    if first != pose.cell {
        return Err(NavError::DiscontinuousPath);
    }
    let mut actions = Vec::new();
    let mut heading = pose.heading;
    for w in path.windows(2) {
        let (from, to) = (w[0], w[1]);
        if from.manhattan(to) != 1 {
            return Err(NavError::DiscontinuousPath);
        }
        let need = Heading::toward(from, to, heading);
        for turn in heading.turns_to(need) {
            actions.push(match turn {
                crate::grid::Turn::Right => Action::RotateRight,
                crate::grid::Turn::Left => Action::RotateLeft,
            });
        }
        heading = need;
        actions.push(Action::MoveAhead);
    }
    Ok(actions)
}

/// Nearest free explored cell adjacent to unexplored space, by arrival-time
/// distance from the pose. `None` once the map holds no reachable frontier.
pub fn next_frontier(map: &SemanticMap, pose: &AgentPose) -> Option<Cell> {
    let grid = map.planning_grid(&[pose.cell]);
    let field = fmm_distance(&grid, &[pose.cell]).ok()?;
    let mut best: Option<(f64, Cell)> = None;
    for y in 0..map.height() {
        for x in 0..map.width() {
            let c = Cell::new(x, y);
            if !map.explored(c) || grid.is_blocked(c) {
                continue;
            }
            if !c.neighbors4().iter().any(|n| map.in_bounds(*n) && !map.explored(*n)) {
                continue;
            }
            let t = field.t(c);
            if !t.is_finite() {
                continue;
            }
            let better = match best {
                None => true,
                Some((bt, bc)) => t < bt - 1e-12 || (t < bt + 1e-12 && c < bc),
            };
            if better {
                best = Some((t, c));
            }
        }
    }
    best.map(|(_, c)| c)
}

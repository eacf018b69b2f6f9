//! The agent's belief stores: a semantic spatial map built from observations,
//! plus three caches keyed to interaction history — latest interaction
//! handles per category, destinations of relocated objects, and sites of
//! caused state changes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::grid::Cell;
use crate::nav::{fmm_distance, ObstacleGrid};
use crate::world::{AgentPose, InteractionHandle, ObjectCategory, Observation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sighting {
    pub cell: Cell,
    pub last_seen: u64,
}

/// Explored/obstacle occupancy with per-category evidence and sightings.
/// Explored and obstacle sets only ever grow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticMap {
    width: i32,
    height: i32,
    explored: Vec<bool>,
    obstacle: Vec<bool>,
    inflated: Vec<bool>,
    inflation_radius: i32,
    evidence: BTreeMap<ObjectCategory, BTreeMap<Cell, u32>>,
    sightings: BTreeMap<ObjectCategory, Vec<Sighting>>,
}

impl SemanticMap {
    pub fn new(width: i32, height: i32, inflation_radius: i32) -> Self {
        let n = (width * height) as usize;
        SemanticMap {
            width,
            height,
            explored: vec![false; n],
            obstacle: vec![false; n],
            inflated: vec![false; n],
            inflation_radius,
            evidence: BTreeMap::new(),
            sightings: BTreeMap::new(),
        }
    }

    pub fn width(&self) -> i32 {
        self.width
    }

    pub fn height(&self) -> i32 {
        self.height
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.x >= 0 && c.y >= 0 && c.x < self.width && c.y < self.height
    }

    fn idx(&self, c: Cell) -> usize {
        (c.y * self.width + c.x) as usize
    }

    pub fn explored(&self, c: Cell) -> bool {
        self.in_bounds(c) && self.explored[self.idx(c)]
    }

    pub fn obstacle(&self, c: Cell) -> bool {
        !self.in_bounds(c) || self.obstacle[self.idx(c)]
    }

    pub fn inflated(&self, c: Cell) -> bool {
        !self.in_bounds(c) || self.inflated[self.idx(c)]
    }

    pub fn explored_count(&self) -> usize {
        self.explored.iter().filter(|b| **b).count()
    }

    pub fn evidence_count(&self, category: ObjectCategory, cell: Cell) -> u32 {
        self.evidence
            .get(&category)
            .and_then(|m| m.get(&cell))
            .copied()
            .unwrap_or(0)
    }

    pub fn sightings(&self, category: ObjectCategory) -> &[Sighting] {
        self.sightings
            .get(&category)
            .map(|v| v.as_slice())
            .unwrap_or(&[])
    }

    pub fn evidence_cells(&self, category: ObjectCategory) -> Vec<Cell> {
        self.evidence
            .get(&category)
            .map(|m| m.keys().copied().collect())
            .unwrap_or_default()
    }

    /// Projects one observation into the map: cells along each ray become
    /// explored, ray-terminal walls become obstacles, detections add
    /// category evidence and refresh sightings. Monotone: nothing un-marks.
    pub fn integrate_observation(&mut self, obs: &Observation, pose: &AgentPose) {
        debug_assert_eq!(obs.pose.cell, pose.cell);
        for ray in &obs.depth {
            for &c in &ray.cells {
                if self.in_bounds(c) {
                    let i = self.idx(c);
                    self.explored[i] = true;
                }
            }
            if let Some(w) = ray.wall {
                if self.in_bounds(w) {
                    let i = self.idx(w);
                    self.explored[i] = true;
                    self.obstacle[i] = true;
                }
            }
        }
        for det in &obs.detections {
            *self
                .evidence
                .entry(det.category)
                .or_default()
                .entry(det.cell)
                .or_insert(0) += 1;
            // the sighting channels track whole objects; slices read as a
            // different class and are carried by the state-location cache
            if det.sliced {
                continue;
            }
            let list = self.sightings.entry(det.category).or_default();
            match list.iter_mut().find(|s| s.cell == det.cell) {
                Some(s) => s.last_seen = det.handle.observed_step,
                None => list.push(Sighting {
                    cell: det.cell,
                    last_seen: det.handle.observed_step,
                }),
            }
        }
        self.recompute_inflation();
    }

    /// Drops a sighting the agent knows to be gone (it picked the object up
    /// or sliced it away at that cell). Evidence counts are left as history.
    pub fn drop_sighting(&mut self, category: ObjectCategory, cell: Cell) {
        if let Some(list) = self.sightings.get_mut(&category) {
            list.retain(|s| s.cell != cell);
        }
    }

    /// Marks every cell within Chebyshev `radius` of an obstacle as inflated.
    /// Original obstacle flags are untouched.
    pub fn inflate_obstacles(&mut self, radius: i32) {
        self.inflation_radius = radius.max(0);
        self.recompute_inflation();
    }

    pub fn inflation_radius(&self) -> i32 {
        self.inflation_radius
    }

    fn recompute_inflation(&mut self) {
        let r = self.inflation_radius;
        let mut inflated = vec![false; self.explored.len()];
        for y in 0..self.height {
            for x in 0..self.width {
                let c = Cell::new(x, y);
                if !self.obstacle[self.idx(c)] {
                    continue;
                }
                for dy in -r..=r {
                    for dx in -r..=r {
                        let n = Cell::new(x + dx, y + dy);
                        if self.in_bounds(n) {
                            inflated[(n.y * self.width + n.x) as usize] = true;
                        }
                    }
                }
            }
        }
        self.inflated = inflated;
    }

    /// Records a wall the agent bumped into: a blocked move is itself an
    /// observation of an obstacle.
    pub fn note_blocked(&mut self, cell: Cell) {
        if self.in_bounds(cell) {
            let i = self.idx(cell);
            self.explored[i] = true;
            self.obstacle[i] = true;
            self.recompute_inflation();
        }
    }

    /// Planning view: blocked = inflated obstacle, with the listed cells
    /// force-cleared (the agent's own cell may sit inside an inflation band).
    pub fn planning_grid(&self, clear: &[Cell]) -> ObstacleGrid {
        let mut g = ObstacleGrid::new(self.width, self.height);
        g.blocked.copy_from_slice(&self.inflated);
        for &c in clear {
            if self.in_bounds(c) && !self.obstacle(c) {
                g.set_blocked(c, false);
            }
        }
        g
    }
}

/// Nearest eligible sighting of `category` by arrival-time distance from the
/// pose, skipping cells recorded as relocation destinations for that
/// category. `None` means the caller must explore.
pub fn select_target(
    map: &SemanticMap,
    category: ObjectCategory,
    log: &RelocationLog,
    pose: &AgentPose,
) -> Option<Cell> {
    select_target_with(map, category, log, pose, &std::collections::BTreeSet::new())
}

/// `select_target` with additional transient exclusions (cells the agent
/// already tried and failed this sub-goal).
pub fn select_target_with(
    map: &SemanticMap,
    category: ObjectCategory,
    log: &RelocationLog,
    pose: &AgentPose,
    extra_excluded: &std::collections::BTreeSet<Cell>,
) -> Option<Cell> {
    let eligible: Vec<Cell> = map
        .sightings(category)
        .iter()
        .map(|s| s.cell)
        .filter(|c| !log.excluded(category, *c) && !extra_excluded.contains(c))
        .collect();
    if eligible.is_empty() {
        return None;
    }
    let grid = map.planning_grid(&[pose.cell]);
    let field = fmm_distance(&grid, &[pose.cell]).ok()?;
    let mut best: Option<(f64, Cell)> = None;
    for cell in eligible {
        // approach distance: best over the cell itself and its ring
        let mut d = f64::INFINITY;
        for dy in -1..=1 {
            for dx in -1..=1 {
                let r = Cell::new(cell.x + dx, cell.y + dy);
                if map.in_bounds(r) {
                    d = d.min(field.t(r));
                }
            }
        }
        if !d.is_finite() {
            continue;
        }
        let better = match best {
            None => true,
            Some((bd, bc)) => d < bd - 1e-12 || (d < bd + 1e-12 && cell < bc),
        };
        if better {
            best = Some((d, cell));
        }
    }
    best.map(|(_, c)| c)
}

/// Latest interaction handle per category ("latest" overwrite semantics).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MaskCache {
    handles: BTreeMap<ObjectCategory, InteractionHandle>,
}

impl MaskCache {
    /// Stores `handle` unless a fresher one is already cached.
    pub fn remember(&mut self, category: ObjectCategory, handle: InteractionHandle) {
        match self.handles.get(&category) {
            Some(existing) if existing.observed_step > handle.observed_step => {}
            _ => {
                self.handles.insert(category, handle);
            }
        }
    }

    pub fn recall(&self, category: ObjectCategory) -> Option<InteractionHandle> {
        self.handles.get(&category).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelocationRecord {
    pub category: ObjectCategory,
    pub cell: Cell,
    pub step: u64,
}

/// Append-only within an episode; one record per successful put.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RelocationLog {
    records: Vec<RelocationRecord>,
}

impl RelocationLog {
    /// Appends a record; identical triples are recorded once.
    pub fn record(&mut self, category: ObjectCategory, cell: Cell, step: u64) {
        let rec = RelocationRecord {
            category,
            cell,
            step,
        };
        if !self.records.contains(&rec) {
            self.records.push(rec);
        }
    }

    /// Exact-cell match: a sighting one cell away from a destination stays
    /// eligible.
    pub fn excluded(&self, category: ObjectCategory, cell: Cell) -> bool {
        self.records
            .iter()
            .any(|r| r.category == category && r.cell == cell)
    }

    pub fn records(&self) -> &[RelocationRecord] {
        &self.records
    }
}

/// State signature for locations cached at agent-caused state changes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StateSig {
    Sliced,
    Clean,
    Hot,
    Cold,
}

impl StateSig {
    pub fn name(self) -> &'static str {
        match self {
            StateSig::Sliced => "sliced",
            StateSig::Clean => "clean",
            StateSig::Hot => "hot",
            StateSig::Cold => "cold",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StateLocationCache {
    entries: BTreeMap<(ObjectCategory, StateSig), (Cell, InteractionHandle)>,
}

impl StateLocationCache {
    pub fn cache(
        &mut self,
        category: ObjectCategory,
        sig: StateSig,
        cell: Cell,
        handle: InteractionHandle,
    ) {
        self.entries.insert((category, sig), (cell, handle));
    }

    pub fn lookup(
        &self,
        category: ObjectCategory,
        sig: StateSig,
    ) -> Option<(Cell, InteractionHandle)> {
        self.entries.get(&(category, sig)).copied()
    }
}

//! Seeded world generation: walls, furniture, small objects.

use std::collections::{BTreeMap, BTreeSet};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Cell, Heading};

use super::{
    AgentPose, GridWorld, InstanceId, ObjectCategory, ObjectInstance, ObjectState, WorldRules,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldParams {
    pub width: i32,
    pub height: i32,
    /// Fraction of interior cells converted to wall segments.
    pub wall_density: f64,
    pub object_counts: BTreeMap<ObjectCategory, u32>,
    /// Categories whose instances start dirty.
    pub dirty_categories: BTreeSet<ObjectCategory>,
    /// Categories guaranteed to spawn in plain view (floor or open surface).
    pub open_spawn: BTreeSet<ObjectCategory>,
    pub rules: WorldRules,
}

impl Default for WorldParams {
    fn default() -> Self {
        use ObjectCategory::*;
        let mut counts = BTreeMap::new();
        for (cat, n) in [
            (CounterTop, 2),
            (Table, 1),
            (Shelf, 1),
            (Cabinet, 2),
            (Drawer, 2),
            (Fridge, 1),
            (Microwave, 1),
            (SinkBasin, 1),
            (GarbageCan, 1),
            (Lamp, 1),
            (Apple, 2),
            (Knife, 1),
            (Plate, 1),
            (Bowl, 1),
            (Mug, 1),
            (Cup, 1),
            (Fork, 1),
            (Spoon, 1),
            (SoapBar, 2),
            (SoapBottle, 1),
            (TissueBox, 2),
            (Watch, 1),
            (Egg, 1),
            (Potato, 1),
            (Bread, 1),
            (Ladle, 1),
            (Pan, 1),
            (Tomato, 1),
            (Lettuce, 1),
        ] {
            counts.insert(cat, n);
        }
        WorldParams {
            width: 25,
            height: 25,
            wall_density: 0.06,
            object_counts: counts,
            dirty_categories: BTreeSet::new(),
            open_spawn: BTreeSet::new(),
            rules: WorldRules::default(),
        }
    }
}

impl WorldParams {
    pub fn ensure_count(&mut self, category: ObjectCategory, at_least: u32) {
        let e = self.object_counts.entry(category).or_insert(0);
        if *e < at_least {
            *e = at_least;
        }
    }
}

#[derive(Debug, Error)]
pub enum GenError {
    #[error("grid has no floor cells")]
    NoFloor,
    #[error("no reachable planning space after wall placement")]
    NoPlanningSpace,
    #[error("could not place {0}")]
    Placement(ObjectCategory),
    #[error("unsatisfiable parameters: {0}")]
    Unsatisfiable(String),
}

struct Layout {
    width: i32,
    height: i32,
    walls: Vec<bool>,
}

impl Layout {
    fn idx(&self, c: Cell) -> usize {
        (c.y * self.width + c.x) as usize
    }

    fn in_bounds(&self, c: Cell) -> bool {
        c.x >= 0 && c.y >= 0 && c.x < self.width && c.y < self.height
    }

    fn is_wall(&self, c: Cell) -> bool {
        !self.in_bounds(c) || self.walls[self.idx(c)]
    }

    fn floor_cells(&self) -> Vec<Cell> {
        (0..self.height)
            .flat_map(|y| (0..self.width).map(move |x| Cell::new(x, y)))
            .filter(|c| !self.is_wall(*c))
            .collect()
    }

    /// Cells that remain free after inflating walls by one cell; the space
    /// paths are planned through.
    fn planable(&self, c: Cell) -> bool {
        if self.is_wall(c) {
            return false;
        }
        for dy in -1..=1 {
            for dx in -1..=1 {
                if self.is_wall(Cell::new(c.x + dx, c.y + dy)) {
                    return false;
                }
            }
        }
        true
    }

    fn connected(&self, cells: &[Cell], member: impl Fn(Cell) -> bool) -> bool {
        let Some(&start) = cells.first() else {
            return true;
        };
        let mut seen = BTreeSet::new();
        let mut stack = vec![start];
        seen.insert(start);
        while let Some(c) = stack.pop() {
            for n in c.neighbors4() {
                if member(n) && seen.insert(n) {
                    stack.push(n);
                }
            }
        }
        cells.iter().all(|c| seen.contains(c))
    }
}

/// Builds a deterministic world for `(seed, params)`. The floor stays fully
/// connected and enough un-inflated space is kept for path planning around
/// every placed object.
pub fn generate_world(seed: u64, params: &WorldParams) -> Result<GridWorld, GenError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if params.width < 5 || params.height < 5 {
        return Err(GenError::NoFloor);
    }
    let mut layout = Layout {
        width: params.width,
        height: params.height,
        walls: vec![false; (params.width * params.height) as usize],
    };
    for y in 0..params.height {
        for x in 0..params.width {
            if x == 0 || y == 0 || x == params.width - 1 || y == params.height - 1 {
                let c = Cell::new(x, y);
                let i = layout.idx(c);
                layout.walls[i] = true;
            }
        }
    }
    if layout.floor_cells().is_empty() {
        return Err(GenError::NoFloor);
    }

    // interior wall segments, added only while floor and planning space stay connected
    let interior = ((params.width - 2) * (params.height - 2)) as f64;
    let target_walls = (interior * params.wall_density) as usize;
    let mut placed = 0;
    let mut attempts = 0;
    while placed < target_walls && attempts < target_walls * 30 + 30 {
        attempts += 1;
        let x = rng.gen_range(2..params.width - 2);
        let y = rng.gen_range(2..params.height - 2);
        let len = rng.gen_range(2..=4);
        let dir = if rng.gen_bool(0.5) {
            Heading::East
        } else {
            Heading::South
        };
        let (dx, dy) = dir.delta();
        let mut cells = Vec::new();
        for k in 0..len {
            let c = Cell::new(x + dx * k, y + dy * k);
            if !layout.in_bounds(c) || c.x == 0 || c.y == 0 || c.x == params.width - 1
                || c.y == params.height - 1
            {
                break;
            }
            cells.push(c);
        }
        if cells.is_empty() {
            continue;
        }
        let saved = layout.walls.clone();
        for &c in &cells {
            let i = layout.idx(c);
            layout.walls[i] = true;
        }
        let floor = layout.floor_cells();
        let plan: Vec<Cell> = floor.iter().copied().filter(|c| layout.planable(*c)).collect();
        let ok = !floor.is_empty()
            && layout.connected(&floor, |c| !layout.is_wall(c))
            && plan.len() * 2 >= floor.len()
            && layout.connected(&plan, |c| layout.planable(c));
        if ok {
            placed += cells.len();
        } else {
            layout.walls = saved;
        }
    }

    let plan_cells: Vec<Cell> = layout
        .floor_cells()
        .into_iter()
        .filter(|c| layout.planable(*c))
        .collect();
    if plan_cells.is_empty() {
        return Err(GenError::NoPlanningSpace);
    }

    // an object cell is usable if something can stand next to it to interact
    let reachable = |c: Cell, layout: &Layout| -> bool {
        for dy in -1..=1 {
            for dx in -1..=1 {
                let r = Cell::new(c.x + dx, c.y + dy);
                if layout.in_bounds(r) && layout.planable(r) {
                    return true;
                }
            }
        }
        false
    };

    let start = *plan_cells
        .iter()
        .nth(rng.gen_range(0..plan_cells.len()))
        .unwrap();

    let mut instances: Vec<ObjectInstance> = Vec::new();
    let mut next_id = 0u32;
    let mut used_cells: BTreeSet<Cell> = BTreeSet::new();
    used_cells.insert(start);

    let mut alloc = |instances: &mut Vec<ObjectInstance>,
                     category: ObjectCategory,
                     cell: Option<Cell>,
                     parent: Option<InstanceId>| {
        let id = InstanceId(next_id);
        next_id += 1;
        instances.push(ObjectInstance {
            id,
            category,
            cell,
            state: ObjectState::default(),
            parent,
            contents: Vec::new(),
        });
        id
    };

    // furniture first, each on its own floor cell with a reachable ring
    let furniture: Vec<(ObjectCategory, u32)> = params
        .object_counts
        .iter()
        .filter(|(c, _)| !c.pickupable() && **c != ObjectCategory::Faucet)
        .map(|(c, n)| (*c, *n))
        .collect();
    let floor = layout.floor_cells();
    for (cat, n) in furniture {
        for _ in 0..n {
            let mut done = false;
            for _ in 0..400 {
                let c = floor[rng.gen_range(0..floor.len())];
                if used_cells.contains(&c) || !reachable(c, &layout) {
                    continue;
                }
                used_cells.insert(c);
                let id = alloc(&mut instances, cat, Some(c), None);
                if cat == ObjectCategory::SinkBasin {
                    // faucet shares the basin cell
                    alloc(&mut instances, ObjectCategory::Faucet, Some(c), None);
                }
                let _ = id;
                done = true;
                break;
            }
            if !done {
                return Err(GenError::Placement(cat));
            }
        }
    }

    // small objects: in the open for task-relevant categories, sometimes
    // stashed inside cabinets/drawers otherwise
    let surfaces: Vec<(InstanceId, Cell)> = instances
        .iter()
        .filter(|i| {
            matches!(
                i.category,
                ObjectCategory::CounterTop | ObjectCategory::Table | ObjectCategory::Shelf
            )
        })
        .map(|i| (i.id, i.cell.unwrap()))
        .collect();
    let stashes: Vec<(InstanceId, Cell)> = instances
        .iter()
        .filter(|i| matches!(i.category, ObjectCategory::Cabinet | ObjectCategory::Drawer))
        .map(|i| (i.id, i.cell.unwrap()))
        .collect();

    let smalls: Vec<(ObjectCategory, u32)> = params
        .object_counts
        .iter()
        .filter(|(c, _)| c.pickupable())
        .map(|(c, n)| (*c, *n))
        .collect();
    for (cat, n) in smalls {
        for _ in 0..n {
            // task-relevant categories spawn on the open floor so no goal
            // condition starts satisfied and nothing hides in a cabinet
            let open_only = params.open_spawn.contains(&cat);
            let stash_roll = !open_only && !stashes.is_empty() && rng.gen_bool(0.25);
            if stash_roll {
                let (pid, pcell) = stashes[rng.gen_range(0..stashes.len())];
                let id = alloc(&mut instances, cat, Some(pcell), Some(pid));
                let idx = instances.iter().position(|i| i.id == pid).unwrap();
                instances[idx].contents.push(id);
                continue;
            }
            let on_surface = !open_only && !surfaces.is_empty() && rng.gen_bool(0.5);
            if on_surface {
                let (pid, pcell) = surfaces[rng.gen_range(0..surfaces.len())];
                let id = alloc(&mut instances, cat, Some(pcell), Some(pid));
                let idx = instances.iter().position(|i| i.id == pid).unwrap();
                instances[idx].contents.push(id);
                continue;
            }
            let mut done = false;
            for _ in 0..400 {
                let c = floor[rng.gen_range(0..floor.len())];
                if used_cells.contains(&c) || !reachable(c, &layout) {
                    continue;
                }
                used_cells.insert(c);
                alloc(&mut instances, cat, Some(c), None);
                done = true;
                break;
            }
            if !done {
                return Err(GenError::Placement(cat));
            }
        }
    }

    for inst in &mut instances {
        if params.dirty_categories.contains(&inst.category) {
            inst.state.dirty = true;
        }
    }

    let heading = match rng.gen_range(0..4) {
        0 => Heading::North,
        1 => Heading::East,
        2 => Heading::South,
        _ => Heading::West,
    };
    let pose = AgentPose {
        cell: start,
        heading,
        pitch: 0,
        held: None,
    };
    Ok(GridWorld::from_parts(
        params.width,
        params.height,
        layout.walls,
        instances,
        pose,
        params.rules,
    ))
}

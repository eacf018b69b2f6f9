//! Grid geometry: cells, headings, line of sight.

use serde::{Deserialize, Serialize};

/// A 2D grid coordinate. `x` grows east (columns), `y` grows south (rows).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub x: i32,
    pub y: i32,
}

impl Cell {
    pub const fn new(x: i32, y: i32) -> Self {
        Cell { x, y }
    }

    pub fn chebyshev(self, other: Cell) -> i32 {
        (self.x - other.x).abs().max((self.y - other.y).abs())
    }

    pub fn manhattan(self, other: Cell) -> i32 {
        (self.x - other.x).abs() + (self.y - other.y).abs()
    }

    pub fn euclid(self, other: Cell) -> f64 {
        let dx = (self.x - other.x) as f64;
        let dy = (self.y - other.y) as f64;
        (dx * dx + dy * dy).sqrt()
    }

    pub fn step(self, heading: Heading) -> Cell {
        let (dx, dy) = heading.delta();
        Cell::new(self.x + dx, self.y + dy)
    }

    /// 4-neighbors in fixed N, E, S, W order.
    pub fn neighbors4(self) -> [Cell; 4] {
        [
            Cell::new(self.x, self.y - 1),
            Cell::new(self.x + 1, self.y),
            Cell::new(self.x, self.y + 1),
            Cell::new(self.x - 1, self.y),
        ]
    }
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

/// Cardinal heading. North points toward decreasing `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Heading {
    North,
    East,
    South,
    West,
}

impl Heading {
    pub const ALL: [Heading; 4] = [Heading::North, Heading::East, Heading::South, Heading::West];

    pub fn delta(self) -> (i32, i32) {
        match self {
            Heading::North => (0, -1),
            Heading::East => (1, 0),
            Heading::South => (0, 1),
            Heading::West => (-1, 0),
        }
    }

    pub fn right(self) -> Heading {
        match self {
            Heading::North => Heading::East,
            Heading::East => Heading::South,
            Heading::South => Heading::West,
            Heading::West => Heading::North,
        }
    }

    pub fn left(self) -> Heading {
        self.right().right().right()
    }

    /// Axis-dominant heading from `from` toward `to`. Horizontal wins ties.
    /// Falls back to the current heading when the cells coincide.
    pub fn toward(from: Cell, to: Cell, current: Heading) -> Heading {
        let dx = to.x - from.x;
        let dy = to.y - from.y;
        if dx == 0 && dy == 0 {
            return current;
        }
        if dx.abs() >= dy.abs() {
            if dx > 0 {
                Heading::East
            } else {
                Heading::West
            }
        } else if dy > 0 {
            Heading::South
        } else {
            Heading::North
        }
    }

    /// Number of 90-degree turns (0..=2) and the rotation sequence to face `target`.
    pub fn turns_to(self, target: Heading) -> Vec<Turn> {
        if self == target {
            vec![]
        } else if self.right() == target {
            vec![Turn::Right]
        } else if self.left() == target {
            vec![Turn::Left]
        } else {
            // 180 degrees: two right turns by convention
            vec![Turn::Right, Turn::Right]
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Turn {
    Right,
    Left,
}

/// Supercover line-of-sight test between cell centers. `blocked` answers
/// whether a cell obstructs vision; endpoints are not tested.
pub fn line_of_sight(from: Cell, to: Cell, blocked: impl Fn(Cell) -> bool) -> bool {
    for cell in supercover_line(from, to) {
        if cell != from && cell != to && blocked(cell) {
            return false;
        }
    }
    true
}

/// Cells traversed by the segment between two cell centers (supercover:
/// includes every cell the segment touches, so diagonal gaps do not leak).
pub fn supercover_line(from: Cell, to: Cell) -> Vec<Cell> {
    let mut cells = Vec::new();
    let dx = (to.x - from.x).abs();
    let dy = (to.y - from.y).abs();
    let sx = if to.x > from.x { 1 } else { -1 };
    let sy = if to.y > from.y { 1 } else { -1 };
    let (mut x, mut y) = (from.x, from.y);
    cells.push(Cell::new(x, y));
    // tracks twice the fractional progress to keep integer arithmetic
    let mut ix = 0;
    let mut iy = 0;
    while ix < dx || iy < dy {
        let decision = (1 + 2 * ix) * dy - (1 + 2 * iy) * dx;
        match decision.cmp(&0) {
            std::cmp::Ordering::Equal => {
                // passes exactly through a corner: step both, covering both side cells
                cells.push(Cell::new(x + sx, y));
                cells.push(Cell::new(x, y + sy));
                x += sx;
                y += sy;
                ix += 1;
                iy += 1;
            }
            std::cmp::Ordering::Less => {
                x += sx;
                ix += 1;
            }
            std::cmp::Ordering::Greater => {
                y += sy;
                iy += 1;
            }
        }
        cells.push(Cell::new(x, y));
    }
    cells
}

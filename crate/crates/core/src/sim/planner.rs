use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::geometry::Point2;
use crate::world::{Cell, OccupancyGrid};

/// Goals on occupied cells snap to the nearest free cell within this radius.
pub const GOAL_SNAP_RADIUS_M: f64 = 0.5;
/// How far the planner will search to leave an inflated start cell.
const START_ESCAPE_RADIUS_M: f64 = 1.0;

/// Exact path cost as counts of straight and diagonal steps, so that two
/// planners agree bit-for-bit on [`StepCost::value`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct StepCost {
    pub straight: u32,
    pub diagonal: u32,
}

impl StepCost {
    pub fn value(self) -> f64 {
        self.straight as f64 + self.diagonal as f64 * std::f64::consts::SQRT_2
    }

    fn plus(self, diagonal: bool) -> Self {
        if diagonal {
            Self { diagonal: self.diagonal + 1, ..self }
        } else {
            Self { straight: self.straight + 1, ..self }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    /// Every traversed cell, start and goal included.
    pub cells: Vec<Cell>,
    /// Turning points in world coordinates, ending at the destination.
    pub waypoints: Vec<Point2>,
    pub cost: StepCost,
    /// Set when the goal fell on an occupied cell and was moved.
    pub snapped_goal: Option<Point2>,
}

impl Path {
    pub fn length_m(&self, resolution: f64) -> f64 {
        self.cost.value() * resolution
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlanError {
    #[error("start position is not on a free cell")]
    StartBlocked,
    #[error("destination is outside the map")]
    OutOfBounds,
    #[error("no free path to the destination")]
    Unreachable,
}

const NEIGHBORS: [(i64, i64); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];

/// Successors of `cell` under 8-connectivity. Diagonal moves require both
/// adjacent orthogonal cells to be free (no corner cutting).
pub fn successors(grid: &OccupancyGrid, (cx, cy): Cell) -> impl Iterator<Item = (Cell, bool)> + '_ {
    let (cx, cy) = (cx as i64, cy as i64);
    NEIGHBORS.iter().filter_map(move |&(dx, dy)| {
        let (nx, ny) = (cx + dx, cy + dy);
        if grid.is_occupied_signed(nx, ny) {
            return None;
        }
        let diagonal = dx != 0 && dy != 0;
        if diagonal && (grid.is_occupied_signed(cx + dx, cy) || grid.is_occupied_signed(cx, cy + dy)) {
            return None;
        }
        Some(((nx as usize, ny as usize), diagonal))
    })
}

fn octile(a: Cell, b: Cell) -> f64 {
    let dx = (a.0 as f64 - b.0 as f64).abs();
    let dy = (a.1 as f64 - b.1 as f64).abs();
    let (lo, hi) = if dx < dy { (dx, dy) } else { (dy, dx) };
    (hi - lo) + lo * std::f64::consts::SQRT_2
}

#[derive(PartialEq)]
struct Open {
    f: f64,
    g: f64,
    seq: u64,
    idx: usize,
}

impl Eq for Open {}

impl Ord for Open {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on f, then prefer deeper nodes, then FIFO
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| self.g.total_cmp(&other.g))
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A* over free cells with the octile heuristic. `start` is treated as free.
pub fn astar(grid: &OccupancyGrid, start: Cell, goal: Cell) -> Option<(Vec<Cell>, StepCost)> {
    if grid.is_occupied(goal) {
        return None;
    }
    let w = grid.width();
    let idx = |(x, y): Cell| y * w + x;
    let n = w * grid.height();
    let mut best: Vec<Option<StepCost>> = vec![None; n];
    let mut parent: Vec<usize> = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;

    best[idx(start)] = Some(StepCost::default());
    heap.push(Open { f: octile(start, goal), g: 0.0, seq, idx: idx(start) });

    while let Some(Open { idx: cur, .. }) = heap.pop() {
        if closed[cur] {
            continue;
        }
        closed[cur] = true;
        let cell = (cur % w, cur / w);
        let g = best[cur].expect("opened cells have a cost");
        if cell == goal {
            let mut cells = vec![cell];
            let mut at = cur;
            while parent[at] != usize::MAX {
                at = parent[at];
                cells.push((at % w, at / w));
            }
            cells.reverse();
            return Some((cells, g));
        }
        for (next, diagonal) in successors(grid, cell) {
            let ni = idx(next);
            if closed[ni] {
                continue;
            }
            let ng = g.plus(diagonal);
            if best[ni].is_none_or(|b| ng.value() < b.value()) {
                best[ni] = Some(ng);
                parent[ni] = cur;
                seq += 1;
                heap.push(Open { f: ng.value() + octile(next, goal), g: ng.value(), seq, idx: ni });
            }
        }
    }
    None
}

/// Nearest cell (by center distance) satisfying `ok` within `radius` of `p`.
fn nearest_cell(grid: &OccupancyGrid, p: Point2, radius: f64, ok: impl Fn(Cell) -> bool) -> Option<Cell> {
    let reach = (radius / grid.resolution()).ceil() as i64 + 1;
    let g = grid.world_to_grid(p);
    let (gx, gy) = (g.x.floor() as i64, g.y.floor() as i64);
    let mut found: Option<(f64, Cell)> = None;
    for dy in -reach..=reach {
        for dx in -reach..=reach {
            let (cx, cy) = (gx + dx, gy + dy);
            if !grid.in_bounds(cx, cy) {
                continue;
            }
            let c = (cx as usize, cy as usize);
            let d = grid.cell_center(c).distance(p);
            if d <= radius && ok(c) && found.is_none_or(|(bd, _)| d < bd) {
                found = Some((d, c));
            }
        }
    }
    found.map(|(_, c)| c)
}

/// Plans from `from` to `to` on `grid` inflated by `inflation` meters.
///
/// When the start lies inside the inflated margin the path first leaves it
/// through raw-free cells. Goals on blocked cells snap to the nearest free
/// cell within [`GOAL_SNAP_RADIUS_M`].
pub fn plan_path(grid: &OccupancyGrid, from: Point2, to: Point2, inflation: f64) -> Result<Path, PlanError> {
    let start = grid.world_to_cell(from).ok_or(PlanError::StartBlocked)?;
    if grid.is_occupied(start) {
        return Err(PlanError::StartBlocked);
    }
    if !grid.contains_point(to) {
        return Err(PlanError::OutOfBounds);
    }
    let inflated = grid.inflate(inflation);

    let (goal, snapped_goal) = match grid.world_to_cell(to) {
        Some(c) if !inflated.is_occupied(c) => (c, None),
        _ => {
            let c = nearest_cell(&inflated, to, GOAL_SNAP_RADIUS_M, |c| !inflated.is_occupied(c))
                .ok_or(PlanError::Unreachable)?;
            (c, Some(inflated.cell_center(c)))
        }
    };

    let mut prefix: Vec<Cell> = Vec::new();
    let mut prefix_cost = StepCost::default();
    let mut search_start = start;
    if inflated.is_occupied(start) {
        let (cells, cost) = escape_inflation(grid, &inflated, start).ok_or(PlanError::Unreachable)?;
        search_start = *cells.last().expect("escape path is non-empty");
        prefix = cells[..cells.len() - 1].to_vec();
        prefix_cost = cost;
    }

    let (mut cells, cost) = astar(&inflated, search_start, goal).ok_or(PlanError::Unreachable)?;
    if !prefix.is_empty() {
        prefix.append(&mut cells);
        cells = prefix;
    }
    let cost = StepCost {
        straight: cost.straight + prefix_cost.straight,
        diagonal: cost.diagonal + prefix_cost.diagonal,
    };

    let end = snapped_goal.unwrap_or(to);
    let waypoints = turning_points(grid, &cells, end);
    Ok(Path { cells, waypoints, cost, snapped_goal })
}

/// Breadth-first walk over raw-free cells to the closest cell outside the
/// inflated margin.
fn escape_inflation(raw: &OccupancyGrid, inflated: &OccupancyGrid, start: Cell) -> Option<(Vec<Cell>, StepCost)> {
    let max_steps = (START_ESCAPE_RADIUS_M / raw.resolution()).ceil() as usize;
    let w = raw.width();
    let mut prev = vec![usize::MAX; w * raw.height()];
    let mut seen = vec![false; w * raw.height()];
    let mut queue = VecDeque::from([(start, 0usize)]);
    seen[start.1 * w + start.0] = true;
    while let Some((cell, depth)) = queue.pop_front() {
        if !inflated.is_occupied(cell) {
            let mut cells = vec![cell];
            let mut cost = StepCost::default();
            let mut at = cell.1 * w + cell.0;
            while prev[at] != usize::MAX {
                let p = prev[at];
                let (a, b) = ((at % w, at / w), (p % w, p / w));
                cost = cost.plus(a.0 != b.0 && a.1 != b.1);
                at = p;
                cells.push((at % w, at / w));
            }
            cells.reverse();
            return Some((cells, cost));
        }
        if depth >= max_steps {
            continue;
        }
        for (next, _) in successors(raw, cell) {
            let ni = next.1 * w + next.0;
            if !seen[ni] {
                seen[ni] = true;
                prev[ni] = cell.1 * w + cell.0;
                queue.push_back((next, depth + 1));
            }
        }
    }
    None
}

/// Cell centers where the path changes direction, followed by `end`.
fn turning_points(grid: &OccupancyGrid, cells: &[Cell], end: Point2) -> Vec<Point2> {
    let mut out = Vec::new();
    for w in cells.windows(3) {
        let d1 = (w[1].0 as i64 - w[0].0 as i64, w[1].1 as i64 - w[0].1 as i64);
        let d2 = (w[2].0 as i64 - w[1].0 as i64, w[2].1 as i64 - w[1].1 as i64);
        if d1 != d2 {
            out.push(grid.cell_center(w[1]));
        }
    }
    out.push(end);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn open(n: usize) -> OccupancyGrid {
        OccupancyGrid::new(n, n, 1.0, Point2::default()).unwrap()
    }

    #[test]
    fn straight_line_on_empty_grid() {
        let g = open(10);
        let p = plan_path(&g, Point2::new(1.0, 1.0), Point2::new(1.0, 8.0), 0.0).unwrap();
        assert_eq!(p.cost, StepCost { straight: 7, diagonal: 0 });
        assert_eq!(p.cells.len(), 8);
        assert_eq!(p.waypoints, vec![Point2::new(1.0, 8.0)]);
    }

    #[test]
    fn walled_off_goal_unreachable() {
        let mut g = open(10);
        for i in 0..10 {
            g.set((5, i), true);
        }
        let err = plan_path(&g, Point2::new(1.5, 1.5), Point2::new(8.5, 8.5), 0.0).unwrap_err();
        assert_eq!(err, PlanError::Unreachable);
    }

    #[test]
    fn wall_gap_is_used() {
        let mut g = open(10);
        for i in 0..10 {
            if i != 7 {
                g.set((5, i), true);
            }
        }
        let p = plan_path(&g, Point2::new(1.5, 1.5), Point2::new(8.5, 1.5), 0.0).unwrap();
        assert!(p.cells.contains(&(5, 7)));
        assert!(p.cells.iter().all(|&c| !g.is_occupied(c)));
    }

    #[test]
    fn no_corner_cutting() {
        let mut g = open(3);
        g.set((1, 0), true);
        g.set((0, 1), true);
        assert!(astar(&g, (0, 0), (1, 1)).is_none());
    }

    #[test]
    fn goal_on_wall_snaps_or_fails() {
        let mut g = OccupancyGrid::new(40, 40, 0.1, Point2::default()).unwrap();
        g.set((20, 20), true);
        let p = plan_path(&g, Point2::new(0.5, 0.5), Point2::new(2.05, 2.05), 0.0).unwrap();
        let snapped = p.snapped_goal.unwrap();
        assert!(snapped.distance(Point2::new(2.05, 2.05)) <= GOAL_SNAP_RADIUS_M);

        g.fill_rect(Point2::new(1.0, 1.0), Point2::new(3.0, 3.0), true);
        assert_eq!(
            plan_path(&g, Point2::new(0.5, 0.5), Point2::new(2.05, 2.05), 0.0).unwrap_err(),
            PlanError::Unreachable
        );
    }

    #[test]
    fn escapes_inflated_start() {
        let mut g = OccupancyGrid::new(50, 50, 0.1, Point2::default()).unwrap();
        g.fill_rect(Point2::new(0.0, 0.0), Point2::new(5.0, 0.5), true);
        // 0.15 m above the wall, inside the 0.35 m inflation margin
        let p = plan_path(&g, Point2::new(2.5, 0.65), Point2::new(2.5, 4.0), 0.35).unwrap();
        assert!(p.cells.iter().all(|&c| !g.is_occupied(c)));
    }
}

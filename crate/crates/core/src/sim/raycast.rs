use crate::geometry::Point2;
use crate::world::OccupancyGrid;

/// Cells crossed by a ray, in order, with the distance (meters) at which
/// the ray enters each. The starting cell is not yielded.
struct Traversal {
    cell: (i64, i64),
    step: (i64, i64),
    t_max: (f64, f64),
    t_delta: (f64, f64),
    resolution: f64,
}

impl Traversal {
    fn new(grid: &OccupancyGrid, origin: Point2, dir: Point2) -> Self {
        let g = grid.world_to_grid(origin);
        let cell = (g.x.floor() as i64, g.y.floor() as i64);
        let axis = |pos: f64, cell: i64, d: f64| -> (i64, f64, f64) {
            if d > 0.0 {
                (1, ((cell + 1) as f64 - pos) / d, 1.0 / d)
            } else if d < 0.0 {
                (-1, (pos - cell as f64) / -d, -1.0 / d)
            } else {
                (0, f64::INFINITY, f64::INFINITY)
            }
        };
        let (sx, tx, dx) = axis(g.x, cell.0, dir.x);
        let (sy, ty, dy) = axis(g.y, cell.1, dir.y);
        Self {
            cell,
            step: (sx, sy),
            t_max: (tx, ty),
            t_delta: (dx, dy),
            resolution: grid.resolution(),
        }
    }
}

impl Iterator for Traversal {
    type Item = ((i64, i64), f64);

    fn next(&mut self) -> Option<Self::Item> {
        let t = if self.t_max.0 < self.t_max.1 {
            self.cell.0 += self.step.0;
            let t = self.t_max.0;
            self.t_max.0 += self.t_delta.0;
            t
        } else {
            self.cell.1 += self.step.1;
            let t = self.t_max.1;
            self.t_max.1 += self.t_delta.1;
            t
        };
        t.is_finite().then_some((self.cell, t * self.resolution))
    }
}

/// Distance from `origin` along `dir` to the first occupied cell (or the
/// grid edge), capped at `max_range`. Amanatides–Woo grid traversal; cells
/// outside the grid count as occupied.
pub fn cast_ray(grid: &OccupancyGrid, origin: Point2, dir: Point2, max_range: f64) -> f64 {
    let len = dir.norm();
    if len == 0.0 || max_range <= 0.0 {
        return 0.0;
    }
    let g = grid.world_to_grid(origin);
    if grid.is_occupied_signed(g.x.floor() as i64, g.y.floor() as i64) {
        return 0.0;
    }
    for ((cx, cy), t) in Traversal::new(grid, origin, dir * (1.0 / len)) {
        if t >= max_range {
            return max_range;
        }
        if grid.is_occupied_signed(cx, cy) {
            return t;
        }
    }
    max_range
}

/// True when no occupied cell lies on the segment between `a` and `b`,
/// excluding the cells containing the endpoints themselves.
pub fn line_of_sight(grid: &OccupancyGrid, a: Point2, b: Point2) -> bool {
    let dist = a.distance(b);
    if dist == 0.0 {
        return true;
    }
    let end = grid.world_to_grid(b);
    let end = (end.x.floor() as i64, end.y.floor() as i64);
    for (cell, t) in Traversal::new(grid, a, (b - a) * (1.0 / dist)) {
        if t >= dist || cell == end {
            return true;
        }
        if grid.is_occupied_signed(cell.0, cell.1) {
            return false;
        }
    }
    true
}

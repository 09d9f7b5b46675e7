use serde::{Deserialize, Serialize};

use crate::geometry::Point2;
use crate::world::WorldError;

/// Integer cell index `(column, row)`; row 0 is the lowest `y`.
pub type Cell = (usize, usize);

/// Binary occupancy raster. Cell `(0, 0)` covers
/// `[origin.x, origin.x + resolution) × [origin.y, origin.y + resolution)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyGrid {
    width: usize,
    height: usize,
    resolution: f64,
    origin: Point2,
    occupied: Vec<bool>,
}

impl OccupancyGrid {
    /// An all-free grid.
    pub fn new(width: usize, height: usize, resolution: f64, origin: Point2) -> Result<Self, WorldError> {
        if width == 0 || height == 0 {
            return Err(WorldError::Validation("grid must have at least one cell".into()));
        }
        if !(resolution > 0.0) || !resolution.is_finite() {
            return Err(WorldError::Validation(format!("grid resolution must be > 0, got {resolution}")));
        }
        Ok(Self {
            width,
            height,
            resolution,
            origin,
            occupied: vec![false; width * height],
        })
    }

    /// Builds a grid from text rows of `.` (free) and `#` (occupied).
    /// The first row is the top of the map, i.e. the highest `y`.
    pub fn from_rows<S: AsRef<str>>(rows: &[S], resolution: f64, origin: Point2) -> Result<Self, WorldError> {
        let height = rows.len();
        let width = rows.first().map(|r| r.as_ref().chars().count()).unwrap_or(0);
        let mut grid = Self::new(width, height, resolution, origin)?;
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.chars().count() != width {
                return Err(WorldError::Validation(format!(
                    "grid row {i} has {} cells, expected {width}",
                    row.chars().count()
                )));
            }
            let cy = height - 1 - i;
            for (cx, ch) in row.chars().enumerate() {
                match ch {
                    '.' => {}
                    '#' => grid.set((cx, cy), true),
                    other => {
                        return Err(WorldError::Validation(format!(
                            "grid row {i} column {cx}: unexpected cell character {other:?}"
                        )))
                    }
                }
            }
        }
        Ok(grid)
    }

    /// Text rows in the same layout [`from_rows`](Self::from_rows) accepts.
    pub fn to_rows(&self) -> Vec<String> {
        (0..self.height)
            .rev()
            .map(|cy| {
                (0..self.width)
                    .map(|cx| if self.is_occupied((cx, cy)) { '#' } else { '.' })
                    .collect()
            })
            .collect()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> Point2 {
        self.origin
    }

    /// World-space bounding box `(min, max)`.
    pub fn bounds(&self) -> (Point2, Point2) {
        let max = Point2::new(
            self.origin.x + self.width as f64 * self.resolution,
            self.origin.y + self.height as f64 * self.resolution,
        );
        (self.origin, max)
    }

    pub fn contains_point(&self, p: Point2) -> bool {
        let (min, max) = self.bounds();
        p.x >= min.x && p.y >= min.y && p.x < max.x && p.y < max.y
    }

    fn index(&self, (cx, cy): Cell) -> usize {
        debug_assert!(cx < self.width && cy < self.height);
        cy * self.width + cx
    }

    pub fn in_bounds(&self, cx: i64, cy: i64) -> bool {
        cx >= 0 && cy >= 0 && (cx as usize) < self.width && (cy as usize) < self.height
    }

    pub fn is_occupied(&self, cell: Cell) -> bool {
        self.occupied[self.index(cell)]
    }

    /// Out-of-bounds indices count as occupied.
    pub fn is_occupied_signed(&self, cx: i64, cy: i64) -> bool {
        !self.in_bounds(cx, cy) || self.is_occupied((cx as usize, cy as usize))
    }

    pub fn set(&mut self, cell: Cell, occupied: bool) {
        let i = self.index(cell);
        self.occupied[i] = occupied;
    }

    /// Fractional cell coordinates of a world point (may be out of range).
    pub fn world_to_grid(&self, p: Point2) -> Point2 {
        Point2::new(
            (p.x - self.origin.x) / self.resolution,
            (p.y - self.origin.y) / self.resolution,
        )
    }

    pub fn world_to_cell(&self, p: Point2) -> Option<Cell> {
        let g = self.world_to_grid(p);
        let (cx, cy) = (g.x.floor() as i64, g.y.floor() as i64);
        self.in_bounds(cx, cy).then_some((cx as usize, cy as usize))
    }

    pub fn cell_center(&self, (cx, cy): Cell) -> Point2 {
        Point2::new(
            self.origin.x + (cx as f64 + 0.5) * self.resolution,
            self.origin.y + (cy as f64 + 0.5) * self.resolution,
        )
    }

    /// True when `p` lies inside the grid on a free cell.
    pub fn is_free_at(&self, p: Point2) -> bool {
        self.world_to_cell(p).is_some_and(|c| !self.is_occupied(c))
    }

    /// Marks every cell whose center lies in the axis-aligned box.
    pub fn fill_rect(&mut self, min: Point2, max: Point2, occupied: bool) {
        for cy in 0..self.height {
            for cx in 0..self.width {
                let c = self.cell_center((cx, cy));
                if c.x >= min.x && c.x <= max.x && c.y >= min.y && c.y <= max.y {
                    self.set((cx, cy), occupied);
                }
            }
        }
    }

    /// Marks every cell whose center lies within `radius` of `center`,
    /// always including the cell containing `center`.
    pub fn fill_disc(&mut self, center: Point2, radius: f64) {
        if let Some(c) = self.world_to_cell(center) {
            self.set(c, true);
        }
        let reach = (radius / self.resolution).ceil() as i64 + 1;
        let g = self.world_to_grid(center);
        let (gx, gy) = (g.x.floor() as i64, g.y.floor() as i64);
        for dy in -reach..=reach {
            for dx in -reach..=reach {
                let (cx, cy) = (gx + dx, gy + dy);
                if self.in_bounds(cx, cy) {
                    let cell = (cx as usize, cy as usize);
                    if self.cell_center(cell).distance(center) <= radius {
                        self.set(cell, true);
                    }
                }
            }
        }
    }

    /// Copy of the grid where every free cell whose center lies within
    /// `radius` of an occupied cell center becomes occupied.
    pub fn inflate(&self, radius: f64) -> OccupancyGrid {
        if radius <= 0.0 {
            return self.clone();
        }
        let reach = (radius / self.resolution).floor() as i64;
        let r2 = (radius / self.resolution).powi(2) + 1e-9;
        let offsets: Vec<(i64, i64)> = (-reach..=reach)
            .flat_map(|dy| (-reach..=reach).map(move |dx| (dx, dy)))
            .filter(|&(dx, dy)| (dx * dx + dy * dy) as f64 <= r2)
            .collect();
        let mut out = self.clone();
        for cy in 0..self.height {
            for cx in 0..self.width {
                if !self.is_occupied((cx, cy)) {
                    continue;
                }
                for &(dx, dy) in &offsets {
                    let (nx, ny) = (cx as i64 + dx, cy as i64 + dy);
                    if self.in_bounds(nx, ny) {
                        out.set((nx as usize, ny as usize), true);
                    }
                }
            }
        }
        out
    }

    pub fn occupied_count(&self) -> usize {
        self.occupied.iter().filter(|&&o| o).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_top_is_highest_y() {
        let g = OccupancyGrid::from_rows(&["#..", "..."], 1.0, Point2::default()).unwrap();
        assert!(g.is_occupied((0, 1)));
        assert!(!g.is_occupied((0, 0)));
        assert_eq!(g.to_rows(), vec!["#..".to_string(), "...".to_string()]);
    }

    #[test]
    fn rejects_ragged_and_bad_chars() {
        assert!(OccupancyGrid::from_rows(&["..", "."], 1.0, Point2::default()).is_err());
        assert!(OccupancyGrid::from_rows(&[".x"], 1.0, Point2::default()).is_err());
        assert!(OccupancyGrid::from_rows::<&str>(&[], 1.0, Point2::default()).is_err());
        assert!(OccupancyGrid::new(2, 2, 0.0, Point2::default()).is_err());
    }

    #[test]
    fn world_cell_mapping_respects_origin() {
        let g = OccupancyGrid::new(10, 10, 0.5, Point2::new(-1.0, 2.0)).unwrap();
        assert_eq!(g.world_to_cell(Point2::new(-1.0, 2.0)), Some((0, 0)));
        assert_eq!(g.world_to_cell(Point2::new(0.26, 2.9)), Some((2, 1)));
        assert_eq!(g.world_to_cell(Point2::new(-1.1, 2.0)), None);
        assert_eq!(g.cell_center((0, 0)), Point2::new(-0.75, 2.25));
    }

    #[test]
    fn inflation_grows_obstacles() {
        let mut g = OccupancyGrid::new(9, 9, 0.1, Point2::default()).unwrap();
        g.set((4, 4), true);
        let inf = g.inflate(0.2);
        assert!(inf.is_occupied((6, 4)));
        assert!(inf.is_occupied((4, 2)));
        assert!(!inf.is_occupied((7, 4)));
        assert!(!inf.is_occupied((6, 6)));
    }
}

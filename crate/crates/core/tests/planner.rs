use proptest::prelude::*;

use taskpos_core::geometry::Point2;
use taskpos_core::sim::{astar, cast_ray, line_of_sight};
use taskpos_core::world::OccupancyGrid;

const N: usize = 24;

fn grid_from(bits: &[bool]) -> OccupancyGrid {
    let mut g = OccupancyGrid::new(N, N, 1.0, Point2::new(0.0, 0.0)).unwrap();
    for (i, &occ) in bits.iter().enumerate() {
        g.set((i % N, i / N), occ);
    }
    g
}

fn first_free(bits: &[bool], from: usize) -> Option<(usize, usize)> {
    (0..bits.len()).map(|k| (from + k) % bits.len()).find(|&i| !bits[i]).map(|i| (i % N, i / N))
}

fn grid_and_ends() -> impl Strategy<Value = (Vec<bool>, usize, usize)> {
    (prop::collection::vec(prop::bool::weighted(0.25), N * N), 0..N * N, 0..N * N)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn paths_are_free_connected_and_priced((bits, a, b) in grid_and_ends()) {
        let g = grid_from(&bits);
        let (Some(s), Some(t)) = (first_free(&bits, a), first_free(&bits, b)) else { return Ok(()) };
        let Some((cells, cost)) = astar(&g, s, t) else { return Ok(()) };
        prop_assert_eq!(cells.first().copied(), Some(s));
        prop_assert_eq!(cells.last().copied(), Some(t));
        let (mut straight, mut diag) = (0, 0);
        for w in cells.windows(2) {
            let (p, q) = (w[0], w[1]);
            prop_assert!(!g.is_occupied(q));
            let dx = q.0 as i64 - p.0 as i64;
            let dy = q.1 as i64 - p.1 as i64;
            prop_assert!(dx.abs() <= 1 && dy.abs() <= 1 && (dx, dy) != (0, 0));
            if dx != 0 && dy != 0 {
                // no squeezing past a corner
                prop_assert!(!g.is_occupied_signed(p.0 as i64 + dx, p.1 as i64));
                prop_assert!(!g.is_occupied_signed(p.0 as i64, p.1 as i64 + dy));
                diag += 1;
            } else {
                straight += 1;
            }
        }
        prop_assert_eq!((cost.straight, cost.diagonal), (straight, diag));
    }

    #[test]
    fn cost_is_symmetric((bits, a, b) in grid_and_ends()) {
        let g = grid_from(&bits);
        let (Some(s), Some(t)) = (first_free(&bits, a), first_free(&bits, b)) else { return Ok(()) };
        let there = astar(&g, s, t).map(|(_, c)| c.value());
        let back = astar(&g, t, s).map(|(_, c)| c.value());
        match (there, back) {
            (Some(x), Some(y)) => prop_assert!((x - y).abs() < 1e-9),
            (x, y) => prop_assert_eq!(x.is_some(), y.is_some()),
        }
    }

    #[test]
    fn rays_stop_before_obstacles(bits in prop::collection::vec(prop::bool::weighted(0.15), N * N),
                                  ox in 1.0f64..23.0, oy in 1.0f64..23.0, ang in 0.0f64..360.0) {
        let g = grid_from(&bits);
        let o = Point2::new(ox, oy);
        prop_assume!(g.is_free_at(o));
        let dir = Point2::new(ang.to_radians().cos(), ang.to_radians().sin());
        let r = cast_ray(&g, o, dir, 10.0);
        prop_assert!((0.0..=10.0).contains(&r));
        // everything strictly short of the hit is free
        let mut t = 0.0;
        while t < r - 0.02 {
            prop_assert!(g.is_free_at(o + dir * t));
            t += 0.01;
        }
    }

    #[test]
    fn line_of_sight_is_symmetric(bits in prop::collection::vec(prop::bool::weighted(0.2), N * N),
                                  a in (0.5f64..23.5, 0.5f64..23.5), b in (0.5f64..23.5, 0.5f64..23.5)) {
        let g = grid_from(&bits);
        let (p, q) = (Point2::new(a.0, a.1), Point2::new(b.0, b.1));
        prop_assert_eq!(line_of_sight(&g, p, q), line_of_sight(&g, q, p));
    }
}

#[test]
fn walled_off_goal_has_no_path() {
    let rows = [".....", ".###.", ".#.#.", ".###.", "....."];
    let g = OccupancyGrid::from_rows(&rows, 1.0, Point2::new(0.0, 0.0)).unwrap();
    assert!(astar(&g, (0, 0), (2, 2)).is_none());
}

#[test]
fn diagonal_blocked_by_one_corner() {
    // (0,0) -> (1,1) must go around the occupied (1,0)
    let mut g = OccupancyGrid::new(2, 2, 1.0, Point2::new(0.0, 0.0)).unwrap();
    g.set((1, 0), true);
    let (cells, cost) = astar(&g, (0, 0), (1, 1)).unwrap();
    assert_eq!(cost.diagonal, 0);
    assert_eq!(cells.len(), 3);
}

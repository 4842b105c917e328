use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::{Cell, Scene};
use crate::error::{Error, Result};
use crate::geometry::{Heading, Point, TURN_STEP_DEG};

#[derive(PartialEq)]
struct Dist(f64);

impl Eq for Dist {}

impl PartialOrd for Dist {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dist {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Grid geodesic between two free points: 8-connected Dijkstra, diagonal
/// moves cost `sqrt(2) * resolution` and may not cut blocked corners.
pub fn shortest_path_distance(scene: &Scene, a: Point, b: Point) -> Result<f64> {
    let (ca, cb) = (scene.cell_of(a), scene.cell_of(b));
    if scene.is_blocked(ca) || scene.is_blocked(cb) {
        return Err(Error::contract("shortest_path_distance endpoints must be free"));
    }
    if ca == cb {
        return Ok(0.0);
    }
    let w = scene.width;
    let idx = |c: Cell| c.row as usize * w + c.col as usize;
    let mut dist = vec![f64::INFINITY; scene.width * scene.height];
    let mut heap = BinaryHeap::new();
    dist[idx(ca)] = 0.0;
    heap.push(Reverse((Dist(0.0), idx(ca))));
    let diag = std::f64::consts::SQRT_2;
    while let Some(Reverse((Dist(d), i))) = heap.pop() {
        if d > dist[i] {
            continue;
        }
        let c = Cell::new((i % w) as i64, (i / w) as i64);
        if c == cb {
            return Ok(d * scene.resolution);
        }
        for dc in -1i64..=1 {
            for dr in -1i64..=1 {
                if dc == 0 && dr == 0 {
                    continue;
                }
                let n = Cell::new(c.col + dc, c.row + dr);
                if scene.is_blocked(n) {
                    continue;
                }
                let step = if dc != 0 && dr != 0 {
                    if scene.is_blocked(Cell::new(c.col + dc, c.row)) || scene.is_blocked(Cell::new(c.col, c.row + dr)) {
                        continue;
                    }
                    diag
                } else {
                    1.0
                };
                let nd = d + step;
                let j = idx(n);
                if nd < dist[j] {
                    dist[j] = nd;
                    heap.push(Reverse((Dist(nd), j)));
                }
            }
        }
    }
    Err(Error::Unreachable { from: (a.x, a.y), to: (b.x, b.y) })
}

const DIRS: [(i64, i64); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];

fn turn_steps(from: Heading, to_dir: usize) -> i64 {
    let target = Heading::from_degrees(to_dir as f64 * 90.0);
    (from.delta_to(target).abs() / TURN_STEP_DEG - 1e-9).ceil().max(0.0) as i64
}

/// 4-connected path from `from` to `to` minimizing the number of agent
/// actions (one per cell moved, one per 15° of turning). Returns the cell
/// sequence including both endpoints.
pub fn action_optimal_path(scene: &Scene, from: Cell, heading: Option<Heading>, to: Cell) -> Option<Vec<Cell>> {
    if scene.is_blocked(from) || scene.is_blocked(to) {
        return None;
    }
    if from == to {
        return Some(vec![from]);
    }
    let w = scene.width;
    let n = scene.width * scene.height;
    let state = |c: Cell, d: usize| (c.row as usize * w + c.col as usize) * 4 + d;
    let mut cost = vec![i64::MAX; n * 4];
    let mut parent = vec![usize::MAX; n * 4];
    let mut heap = BinaryHeap::new();
    for d in 0..4 {
        let c0 = heading.map_or(0, |h| turn_steps(h, d));
        let s = state(from, d);
        cost[s] = c0;
        heap.push(Reverse((c0, s)));
    }
    while let Some(Reverse((c, s))) = heap.pop() {
        if c > cost[s] {
            continue;
        }
        let (cell_i, d) = (s / 4, s % 4);
        let cell = Cell::new((cell_i % w) as i64, (cell_i / w) as i64);
        if cell == to {
            let mut cells = vec![cell];
            let mut cur = s;
            while parent[cur] != usize::MAX {
                cur = parent[cur];
                let ci = cur / 4;
                let pc = Cell::new((ci % w) as i64, (ci / w) as i64);
                if *cells.last().unwrap() != pc {
                    cells.push(pc);
                }
            }
            cells.reverse();
            return Some(cells);
        }
        let (dc, dr) = DIRS[d];
        let ahead = Cell::new(cell.col + dc, cell.row + dr);
        let mut relax = |ns: usize, nc: i64, heap: &mut BinaryHeap<Reverse<(i64, usize)>>| {
            if nc < cost[ns] {
                cost[ns] = nc;
                parent[ns] = s;
                heap.push(Reverse((nc, ns)));
            }
        };
        if scene.is_free(ahead) {
            relax(state(ahead, d), c + 1, &mut heap);
        }
        for nd in [(d + 1) % 4, (d + 3) % 4] {
            relax(state(cell, nd), c + 6, &mut heap);
        }
    }
    None
}

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::EnrouteError;
use crate::geo::{GeoPoint, GridCell, GridFrame};
use crate::population::Commuter;

pub const DEFAULT_ROUTE_CELL_KM: f64 = 0.5;

/// Synthetic road network: every unblocked cell of a frame, joined to its
/// four neighbours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteGrid {
    pub frame: GridFrame,
    pub blocked: BTreeSet<GridCell>,
}

impl RouteGrid {
    pub fn new(frame: GridFrame, blocked: BTreeSet<GridCell>) -> Self {
        Self { frame, blocked }
    }

    /// Obstacle-free grid covering every home and work location.
    pub fn covering(commuters: &[Commuter], cell_km: f64) -> Result<Self, EnrouteError> {
        let frame = GridFrame::covering(commuters.iter().flat_map(|c| [c.home, c.work]), cell_km)?;
        Ok(Self::new(frame, BTreeSet::new()))
    }

    pub fn is_open(&self, cell: GridCell) -> bool {
        self.frame.contains_cell(cell) && !self.blocked.contains(&cell)
    }

    /// Open cell containing `p`.
    pub fn locate(&self, p: GeoPoint) -> Result<GridCell, EnrouteError> {
        let cell = self.frame.to_cell(p)?;
        if self.blocked.contains(&cell) {
            return Err(EnrouteError::BlockedEndpoint { cell });
        }
        Ok(cell)
    }

    /// Checks that every home and work cell lies inside the grid and is open.
    pub fn check_population(&self, commuters: &[Commuter]) -> Result<(), EnrouteError> {
        for c in commuters {
            self.locate(c.home)?;
            self.locate(c.work)?;
        }
        Ok(())
    }

    /// Open 4-neighbours of `cell` in ascending cell order.
    fn neighbors(&self, cell: GridCell) -> impl Iterator<Item = GridCell> + '_ {
        let GridCell { row, col } = cell;
        let up = row.checked_sub(1).map(|r| GridCell::new(r, col));
        let left = col.checked_sub(1).map(|c| GridCell::new(row, c));
        let right = Some(GridCell::new(row, col + 1));
        let down = Some(GridCell::new(row + 1, col));
        [up, left, right, down].into_iter().flatten().filter(|&n| self.is_open(n))
    }
}

/// Cell path of one car from its driver's home to their workplace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub cells: Vec<GridCell>,
    pub length_km: f64,
}

impl Route {
    pub fn as_pairs(&self) -> Vec<[usize; 2]> {
        self.cells.iter().map(|c| [c.row, c.col]).collect()
    }
}

/// Shortest 4-neighbour path between the cells of `home` and `work`.
///
/// Among equally short paths the lexicographically smallest cell sequence is
/// returned.
pub fn compute_route(home: GeoPoint, work: GeoPoint, grid: &RouteGrid) -> Result<Route, EnrouteError> {
    let from = grid.locate(home)?;
    let to = grid.locate(work)?;
    let cells = if grid.blocked.is_empty() { open_path(from, to) } else { bfs_path(from, to, grid)? };
    let length_km = (cells.len() - 1) as f64 * grid.frame.cell_km;
    Ok(Route { cells, length_km })
}

fn manhattan(a: GridCell, b: GridCell) -> usize {
    a.row.abs_diff(b.row) + a.col.abs_diff(b.col)
}

/// Without obstacles every step towards the target is on a shortest path, so
/// the smallest such step is the lexicographic choice.
fn open_path(from: GridCell, to: GridCell) -> Vec<GridCell> {
    let mut cells = vec![from];
    let mut at = from;
    while at != to {
        at = if to.row < at.row {
            GridCell::new(at.row - 1, at.col)
        } else if to.col < at.col {
            GridCell::new(at.row, at.col - 1)
        } else if to.col > at.col {
            GridCell::new(at.row, at.col + 1)
        } else {
            GridCell::new(at.row + 1, at.col)
        };
        cells.push(at);
    }
    debug_assert_eq!(cells.len(), manhattan(from, to) + 1);
    cells
}

/// Breadth-first distances from the target, then a greedy walk from the
/// source always taking the smallest neighbour one step closer.
fn bfs_path(from: GridCell, to: GridCell, grid: &RouteGrid) -> Result<Vec<GridCell>, EnrouteError> {
    let cols = grid.frame.cols;
    let idx = |c: GridCell| c.row * cols + c.col;
    let mut dist = vec![u32::MAX; grid.frame.rows * cols];
    dist[idx(to)] = 0;
    let mut queue = VecDeque::from([to]);
    while let Some(c) = queue.pop_front() {
        if c == from {
            break;
        }
        let d = dist[idx(c)];
        for n in grid.neighbors(c) {
            if dist[idx(n)] == u32::MAX {
                dist[idx(n)] = d + 1;
                queue.push_back(n);
            }
        }
    }
    if dist[idx(from)] == u32::MAX {
        return Err(EnrouteError::Unreachable { from, to });
    }
    let mut cells = vec![from];
    let mut at = from;
    while at != to {
        let want = dist[idx(at)] - 1;
        at = grid.neighbors(at).find(|&n| dist[idx(n)] == want).expect("a closer neighbour exists");
        cells.push(at);
    }
    Ok(cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(rows: usize, cols: usize, blocked: &[(usize, usize)]) -> RouteGrid {
        let frame = GridFrame::new(GeoPoint { lat: 40.0, lon: -3.0 }, 0.5, rows, cols).unwrap();
        RouteGrid::new(frame, blocked.iter().map(|&(r, c)| GridCell::new(r, c)).collect())
    }

    fn route(g: &RouteGrid, a: (usize, usize), b: (usize, usize)) -> Result<Route, EnrouteError> {
        let p = |(r, c)| g.frame.cell_center(GridCell::new(r, c));
        compute_route(p(a), p(b), g)
    }

    /// Independent shortest-path length: repeated relaxation until stable.
    fn relaxation_length(g: &RouteGrid, a: GridCell, b: GridCell) -> Option<usize> {
        let (rows, cols) = (g.frame.rows, g.frame.cols);
        let mut d = vec![vec![usize::MAX; cols]; rows];
        d[a.row][a.col] = 0;
        loop {
            let mut changed = false;
            for r in 0..rows {
                for c in 0..cols {
                    if !g.is_open(GridCell::new(r, c)) || d[r][c] == usize::MAX {
                        continue;
                    }
                    let here = d[r][c];
                    let steps = [(r.wrapping_sub(1), c), (r + 1, c), (r, c.wrapping_sub(1)), (r, c + 1)];
                    for (nr, nc) in steps {
                        if nr < rows && nc < cols && g.is_open(GridCell::new(nr, nc)) && d[nr][nc] > here + 1 {
                            d[nr][nc] = here + 1;
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
        (d[b.row][b.col] != usize::MAX).then(|| d[b.row][b.col])
    }

    fn assert_well_formed(g: &RouteGrid, r: &Route, a: GridCell, b: GridCell) {
        assert_eq!(r.cells.first(), Some(&a));
        assert_eq!(r.cells.last(), Some(&b));
        for w in r.cells.windows(2) {
            assert_eq!(manhattan(w[0], w[1]), 1);
        }
        let distinct: BTreeSet<_> = r.cells.iter().collect();
        assert_eq!(distinct.len(), r.cells.len());
        assert!(r.cells.iter().all(|&c| g.is_open(c)));
    }

    #[test]
    fn same_cell_is_single_cell_route() {
        let g = grid(5, 5, &[]);
        let r = route(&g, (2, 2), (2, 2)).unwrap();
        assert_eq!(r.cells, vec![GridCell::new(2, 2)]);
        assert_eq!(r.length_km, 0.0);
    }

    #[test]
    fn straight_row() {
        let g = grid(5, 5, &[]);
        let r = route(&g, (0, 0), (0, 3)).unwrap();
        assert_eq!(r.cells, (0..4).map(|c| GridCell::new(0, c)).collect::<Vec<_>>());
        assert!((r.length_km - 1.5).abs() < 1e-12);
    }

    #[test]
    fn wall_forces_detour() {
        // Column 2 blocked except at the bottom row.
        let g = grid(5, 5, &[(0, 2), (1, 2), (2, 2), (3, 2)]);
        let r = route(&g, (0, 0), (0, 4)).unwrap();
        assert_eq!(r.cells.len() - 1, relaxation_length(&g, GridCell::new(0, 0), GridCell::new(0, 4)).unwrap());
        assert_eq!(r.cells.len(), 13);
        assert_well_formed(&g, &r, GridCell::new(0, 0), GridCell::new(0, 4));
    }

    #[test]
    fn sealed_target_is_unreachable() {
        let g = grid(4, 4, &[(2, 3), (3, 2)]);
        assert!(matches!(route(&g, (0, 0), (3, 3)), Err(EnrouteError::Unreachable { .. })));
    }

    #[test]
    fn blocked_endpoint_rejected() {
        let g = grid(4, 4, &[(1, 1)]);
        assert!(matches!(route(&g, (1, 1), (3, 3)), Err(EnrouteError::BlockedEndpoint { .. })));
    }

    #[test]
    fn prefers_smaller_cells_on_ties() {
        // Going south-east: the smallest next cell is to the east (same row).
        let g = grid(3, 3, &[]);
        let r = route(&g, (0, 0), (2, 2)).unwrap();
        let expected = [(0, 0), (0, 1), (0, 2), (1, 2), (2, 2)];
        assert_eq!(r.cells, expected.iter().map(|&(a, b)| GridCell::new(a, b)).collect::<Vec<_>>());
    }

    proptest! {
        #[test]
        fn open_grid_fast_path_matches_bfs(a in (0usize..8, 0usize..8), b in (0usize..8, 0usize..8)) {
            let g = grid(8, 8, &[]);
            let (a, b) = (GridCell::new(a.0, a.1), GridCell::new(b.0, b.1));
            prop_assert_eq!(open_path(a, b), bfs_path(a, b, &g).unwrap());
        }

        #[test]
        fn bfs_is_shortest(
            blocked in proptest::collection::vec((0usize..9, 0usize..9), 0..30),
            a in (0usize..9, 0usize..9),
            b in (0usize..9, 0usize..9),
        ) {
            prop_assume!(!blocked.contains(&a) && !blocked.contains(&b));
            let g = grid(9, 9, &blocked);
            let (ca, cb) = (GridCell::new(a.0, a.1), GridCell::new(b.0, b.1));
            match (route(&g, a, b), relaxation_length(&g, ca, cb)) {
                (Ok(r), Some(len)) => {
                    prop_assert_eq!(r.cells.len() - 1, len);
                    assert_well_formed(&g, &r, ca, cb);
                }
                (Err(EnrouteError::Unreachable { .. }), None) => {}
                (got, want) => prop_assert!(false, "route {:?} vs oracle {:?}", got, want),
            }
        }
    }
}

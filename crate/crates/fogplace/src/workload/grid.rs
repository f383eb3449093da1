//! Grid geometry and grid-to-station mapping.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::Point;
use crate::topology::BaseStation;

/// Regular rectangular grid of square cells, row-major ids starting at
/// `id_base`. The default mirrors the common 100 x 100 layout of 235 m cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub cols: u32,
    pub rows: u32,
    pub cell_size_m: f64,
    /// Lower-left corner of cell (0, 0).
    pub origin_x: f64,
    pub origin_y: f64,
    pub id_base: u32,
}

impl Default for GridGeometry {
    fn default() -> Self {
        GridGeometry {
            cols: 100,
            rows: 100,
            cell_size_m: 235.0,
            origin_x: 0.0,
            origin_y: 0.0,
            id_base: 0,
        }
    }
}

impl GridGeometry {
    pub fn cell_count(&self) -> u32 {
        self.cols * self.rows
    }

    /// Center of the cell with the given id, if it lies on the grid.
    pub fn center(&self, grid_id: u32) -> Option<Point> {
        let idx = grid_id.checked_sub(self.id_base)?;
        if idx >= self.cell_count() {
            return None;
        }
        let row = idx / self.cols;
        let col = idx % self.cols;
        Some(Point::new(
            self.origin_x + (col as f64 + 0.5) * self.cell_size_m,
            self.origin_y + (row as f64 + 0.5) * self.cell_size_m,
        ))
    }

    pub fn ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.id_base..self.id_base + self.cell_count()
    }
}

/// Map every grid cell to a station: the nearest station whose coverage
/// circle contains the cell center, or the nearest station outright when no
/// circle covers it. Ties break toward the lower station id.
pub fn map_grids_to_stations(
    geometry: &GridGeometry,
    stations: &[BaseStation],
) -> Result<BTreeMap<u32, u32>> {
    if stations.is_empty() {
        return Err(Error::InvalidInput("no stations to map grids onto".into()));
    }
    let mut out = BTreeMap::new();
    for grid_id in geometry.ids() {
        let center = geometry.center(grid_id).expect("id from ids() is valid");
        let mut covering: Option<(f64, u32)> = None;
        let mut nearest: Option<(f64, u32)> = None;
        for s in stations {
            let d = s.position().distance(&center);
            let better = |cur: &Option<(f64, u32)>| match cur {
                None => true,
                Some((bd, bid)) => d < *bd - 1e-12 || ((d - bd).abs() <= 1e-12 && s.id < *bid),
            };
            if d <= s.coverage_radius && better(&covering) {
                covering = Some((d, s.id));
            }
            if better(&nearest) {
                nearest = Some((d, s.id));
            }
        }
        let station = covering.or(nearest).expect("stations nonempty").1;
        out.insert(grid_id, station);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn station(id: u32, x: f64, y: f64, r: f64) -> BaseStation {
        BaseStation {
            id,
            x,
            y,
            coverage_radius: r,
        }
    }

    fn tiny_grid() -> GridGeometry {
        GridGeometry {
            cols: 2,
            rows: 2,
            cell_size_m: 100.0,
            ..GridGeometry::default()
        }
    }

    #[test]
    fn center_positions() {
        let g = tiny_grid();
        assert_eq!(g.center(0).unwrap(), Point::new(50.0, 50.0));
        assert_eq!(g.center(3).unwrap(), Point::new(150.0, 150.0));
        assert!(g.center(4).is_none());
    }

    #[test]
    fn covered_center_maps_to_covering_station() {
        let g = tiny_grid();
        let stations = vec![
            station(0, 50.0, 50.0, 10.0),
            station(1, 1_000.0, 1_000.0, 2_000.0),
        ];
        let map = map_grids_to_stations(&g, &stations).unwrap();
        // Cell 0's center is inside station 0's circle only.
        assert_eq!(map[&0], 0);
    }

    #[test]
    fn two_covering_stations_nearest_wins() {
        let g = tiny_grid();
        let stations = vec![
            station(0, 150.0, 50.0, 500.0), // 100 m from cell 0 center
            station(1, 250.0, 50.0, 500.0), // 200 m
        ];
        let map = map_grids_to_stations(&g, &stations).unwrap();
        assert_eq!(map[&0], 0);
    }

    #[test]
    fn uncovered_center_maps_to_nearest() {
        let g = tiny_grid();
        let stations = vec![
            station(3, 5_000.0, 5_000.0, 10.0),
            station(7, 400.0, 50.0, 10.0),
        ];
        let map = map_grids_to_stations(&g, &stations).unwrap();
        assert_eq!(map[&0], 7);
    }

    #[test]
    fn no_stations_is_invalid() {
        assert!(matches!(
            map_grids_to_stations(&tiny_grid(), &[]),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn mapping_matches_brute_force_on_seeded_layout() {
        use crate::topology::random_stations;
        let g = GridGeometry {
            cols: 10,
            rows: 10,
            cell_size_m: 235.0,
            ..GridGeometry::default()
        };
        let stations = random_stations(12, 2_350.0, 2_350.0, 600.0, 42);
        let map = map_grids_to_stations(&g, &stations).unwrap();
        for grid_id in g.ids() {
            let c = g.center(grid_id).unwrap();
            // independent scan: covering stations first, else global nearest
            let mut best: Option<(bool, f64, u32)> = None;
            for s in &stations {
                let d = s.position().distance(&c);
                let covered = d <= s.coverage_radius;
                let cand = (covered, d, s.id);
                best = Some(match best {
                    None => cand,
                    Some(cur) => {
                        let pick_cand = match (cand.0, cur.0) {
                            (true, false) => true,
                            (false, true) => false,
                            _ => cand.1 < cur.1 || (cand.1 == cur.1 && cand.2 < cur.2),
                        };
                        if pick_cand {
                            cand
                        } else {
                            cur
                        }
                    }
                });
            }
            assert_eq!(map[&grid_id], best.unwrap().2, "grid {grid_id}");
        }
    }
}

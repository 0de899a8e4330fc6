//! Geographic primitives: great-circle distance and a uniform kilometre grid.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Mean Earth radius used by every distance computation in the crate.
pub const EARTH_RADIUS_KM: f64 = 6371.0;

// Points sitting on a cell boundary up to this slack (in cell units) go to the
// higher-index cell. Absorbs rounding in the forward/inverse projections.
const BOUNDARY_SLACK: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeoError {
    #[error("latitude {0} outside [-90, 90]")]
    Latitude(f64),
    #[error("longitude {0} outside [-180, 180]")]
    Longitude(f64),
    #[error("cell size must be positive, got {0} km")]
    CellSize(f64),
    #[error("point ({lat:.7}, {lon:.7}) lies outside the grid")]
    OutOfBounds { lat: f64, lon: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self, GeoError> {
        if !(-90.0..=90.0).contains(&lat) {
            return Err(GeoError::Latitude(lat));
        }
        if !(-180.0..=180.0).contains(&lon) {
            return Err(GeoError::Longitude(lon));
        }
        Ok(Self { lat, lon })
    }

    pub fn is_valid(&self) -> bool {
        (-90.0..=90.0).contains(&self.lat) && (-180.0..=180.0).contains(&self.lon)
    }

    /// Point displaced by the given kilometres north and east of `self`.
    ///
    /// The east offset is measured along the parallel of the destination.
    pub fn offset_km(&self, north_km: f64, east_km: f64) -> GeoPoint {
        let lat = self.lat + (north_km / EARTH_RADIUS_KM).to_degrees();
        let lon = self.lon + (east_km / (EARTH_RADIUS_KM * lat.to_radians().cos())).to_degrees();
        GeoPoint { lat, lon }
    }
}

/// Haversine great-circle distance in kilometres.
pub fn distance_km(a: GeoPoint, b: GeoPoint) -> f64 {
    let (phi1, phi2) = (a.lat.to_radians(), b.lat.to_radians());
    let dphi = phi2 - phi1;
    let dlambda = (b.lon - a.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridCell {
    pub row: usize,
    pub col: usize,
}

impl GridCell {
    pub fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

/// Latitude/longitude box covered by one grid cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellBounds {
    pub south: f64,
    pub north: f64,
    pub west: f64,
    pub east: f64,
}

impl CellBounds {
    pub fn contains(&self, p: GeoPoint) -> bool {
        p.lat >= self.south && p.lat <= self.north && p.lon >= self.west && p.lon <= self.east
    }

    /// Great-circle distance from `p` to the nearest point of the box (0 inside).
    pub fn distance_km(&self, p: GeoPoint) -> f64 {
        let q = GeoPoint {
            lat: p.lat.clamp(self.south, self.north),
            lon: p.lon.clamp(self.west, self.east),
        };
        distance_km(p, q)
    }
}

/// A row-major grid of square `cell_km` cells anchored at its south-west corner.
///
/// Rows run north and columns east. Row bands are exact in latitude; each row
/// measures its columns along the parallel through the row's centre, so cell
/// centres stay within half a diagonal of every point they own.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFrame {
    pub origin: GeoPoint,
    pub cell_km: f64,
    pub rows: usize,
    pub cols: usize,
}

impl GridFrame {
    pub fn new(origin: GeoPoint, cell_km: f64, rows: usize, cols: usize) -> Result<Self, GeoError> {
        if !(cell_km > 0.0 && cell_km.is_finite()) {
            return Err(GeoError::CellSize(cell_km));
        }
        Ok(Self { origin, cell_km, rows, cols })
    }

    /// Smallest frame with the given cell size that covers every point.
    pub fn covering<I>(points: I, cell_km: f64) -> Result<Self, GeoError>
    where
        I: IntoIterator<Item = GeoPoint>,
    {
        let (mut south, mut west) = (f64::INFINITY, f64::INFINITY);
        let (mut north, mut east) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in points {
            south = south.min(p.lat);
            north = north.max(p.lat);
            west = west.min(p.lon);
            east = east.max(p.lon);
        }
        if !south.is_finite() {
            return GridFrame::new(GeoPoint { lat: 0.0, lon: 0.0 }, cell_km, 1, 1);
        }
        let mut frame = GridFrame::new(GeoPoint { lat: south, lon: west }, cell_km, 1, 1)?;
        frame.rows = (frame.row_coord(north).floor() as usize) + 1;
        // Columns are narrowest (in degrees) on the row furthest from the equator.
        let mut cols = 1;
        for row in 0..frame.rows {
            let c = (frame.col_coord(row, east).floor() as usize) + 1;
            cols = cols.max(c);
        }
        frame.cols = cols;
        Ok(frame)
    }

    fn deg_per_cell_lat(&self) -> f64 {
        (self.cell_km / EARTH_RADIUS_KM).to_degrees()
    }

    fn row_center_lat(&self, row: usize) -> f64 {
        self.origin.lat + (row as f64 + 0.5) * self.deg_per_cell_lat()
    }

    fn deg_per_cell_lon(&self, row: usize) -> f64 {
        (self.cell_km / (EARTH_RADIUS_KM * self.row_center_lat(row).to_radians().cos())).to_degrees()
    }

    fn row_coord(&self, lat: f64) -> f64 {
        (lat - self.origin.lat) / self.deg_per_cell_lat() + BOUNDARY_SLACK
    }

    fn col_coord(&self, row: usize, lon: f64) -> f64 {
        (lon - self.origin.lon) / self.deg_per_cell_lon(row) + BOUNDARY_SLACK
    }

    pub fn to_cell(&self, p: GeoPoint) -> Result<GridCell, GeoError> {
        let oob = || GeoError::OutOfBounds { lat: p.lat, lon: p.lon };
        let r = self.row_coord(p.lat);
        if !(0.0..self.rows as f64).contains(&r) {
            return Err(oob());
        }
        let row = r.floor() as usize;
        let c = self.col_coord(row, p.lon);
        if !(0.0..self.cols as f64).contains(&c) {
            return Err(oob());
        }
        Ok(GridCell { row, col: c.floor() as usize })
    }

    pub fn contains_cell(&self, cell: GridCell) -> bool {
        cell.row < self.rows && cell.col < self.cols
    }

    pub fn cell_center(&self, cell: GridCell) -> GeoPoint {
        GeoPoint {
            lat: self.row_center_lat(cell.row),
            lon: self.origin.lon + (cell.col as f64 + 0.5) * self.deg_per_cell_lon(cell.row),
        }
    }

    pub fn cell_bounds(&self, cell: GridCell) -> CellBounds {
        let dlat = self.deg_per_cell_lat();
        let dlon = self.deg_per_cell_lon(cell.row);
        CellBounds {
            south: self.origin.lat + cell.row as f64 * dlat,
            north: self.origin.lat + (cell.row + 1) as f64 * dlat,
            west: self.origin.lon + cell.col as f64 * dlon,
            east: self.origin.lon + (cell.col + 1) as f64 * dlon,
        }
    }
}

/// Free-standing form of [`GridFrame::to_cell`] for an unbounded north-east quadrant.
pub fn to_cell(p: GeoPoint, origin: GeoPoint, cell_km: f64) -> Result<GridCell, GeoError> {
    GridFrame::new(origin, cell_km, usize::MAX / 2, usize::MAX / 2)?.to_cell(p)
}

/// Equirectangular projection used for hash bucketing.
///
/// East distances are scaled by the smallest cosine over the population so that
/// projected separations never exceed the great-circle ones by more than rounding.
#[derive(Debug, Clone, Copy)]
pub(crate) struct BucketProjection {
    origin: GeoPoint,
    cos_ref: f64,
    cell_km: f64,
}

impl BucketProjection {
    pub(crate) fn new<I>(points: I, cell_km: f64) -> Self
    where
        I: IntoIterator<Item = GeoPoint>,
    {
        let mut origin = GeoPoint { lat: 0.0, lon: 0.0 };
        let mut max_abs_lat: f64 = 0.0;
        let mut first = true;
        for p in points {
            if first {
                origin = p;
                first = false;
            }
            max_abs_lat = max_abs_lat.max(p.lat.abs());
        }
        let cos_ref = max_abs_lat.min(89.0).to_radians().cos();
        Self { origin, cos_ref, cell_km }
    }

    pub(crate) fn key(&self, p: GeoPoint) -> (i32, i32) {
        let north = (p.lat - self.origin.lat).to_radians() * EARTH_RADIUS_KM;
        let east = (p.lon - self.origin.lon).to_radians() * EARTH_RADIUS_KM * self.cos_ref;
        ((north / self.cell_km).floor() as i32, (east / self.cell_km).floor() as i32)
    }
}

//! Pre-synthesis geographic coarsening: geocodes floored to square grids.

use crate::data::{Column, Dataset, GeoPoint};
use crate::error::{Error, Result};
use crate::utility::RegionMap;

/// Largest integer `q` with `q * g <= x`, robust against the rounding of
/// `x / g`. Guarantees `grid_index(q * g, g) == q`, which makes flooring
/// idempotent.
pub fn grid_index(x: f64, g: f64) -> i64 {
    debug_assert!(g > 0.0);
    let mut q = (x / g).floor() as i64;
    while (q + 1) as f64 * g <= x {
        q += 1;
    }
    while q as f64 * g > x {
        q -= 1;
    }
    q
}

/// Floors a point to the corner of its `g`-meter grid cell.
pub fn floor_to_grid(p: &GeoPoint, g: f64) -> GeoPoint {
    GeoPoint::new(grid_index(p.x, g) as f64 * g, grid_index(p.y, g) as f64 * g)
}

/// Replaces every geocode by the floored corner point of its grid cell.
/// `g` is the cell side in meters.
pub fn aggregate_geocodes(ds: &Dataset, g: f64) -> Result<Dataset> {
    if !(g > 0.0) {
        return Err(Error::invalid("aggregation level must be positive"));
    }
    let geo_idx = ds
        .schema()
        .geocode_index()
        .ok_or_else(|| Error::invalid("dataset has no geocode column to aggregate"))?;
    let points = ds.geocode_points()?;
    let coarse: Vec<GeoPoint> = points.iter().map(|p| floor_to_grid(p, g)).collect();
    ds.with_column(geo_idx, Column::Geocode(coarse))
}

/// Region of a released grid-cell corner point: the region of its nearest
/// original geocode.
pub fn region_for_cell(cell_corner: &GeoPoint, regions: &RegionMap) -> u32 {
    regions.region_of(cell_corner)
}

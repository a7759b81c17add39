//! Grid-bucketed spatial index over 2-D points.
//!
//! Accelerates nearest-neighbour queries and fixed-radius pair counting.
//! Both query paths use the same squared-distance comparisons and the same
//! lowest-index tie rule as an exhaustive scan, so results are bit-identical
//! to brute force.

use crate::data::GeoPoint;

/// Uniform grid over the bounding box of an immutable point set.
#[derive(Debug, Clone)]
pub struct GridIndex {
    points: Vec<GeoPoint>,
    cell: f64,
    min_x: f64,
    min_y: f64,
    nx: usize,
    ny: usize,
    /// Point ids per cell, each bucket in ascending id order.
    buckets: Vec<Vec<u32>>,
}

impl GridIndex {
    /// Builds an index sized for roughly `target_per_cell` points per cell.
    pub fn build(points: &[GeoPoint], target_per_cell: usize) -> GridIndex {
        assert!(!points.is_empty(), "GridIndex on empty point set");
        let (mut min_x, mut min_y) = (f64::INFINITY, f64::INFINITY);
        let (mut max_x, mut max_y) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in points {
            min_x = min_x.min(p.x);
            min_y = min_y.min(p.y);
            max_x = max_x.max(p.x);
            max_y = max_y.max(p.y);
        }
        let width = (max_x - min_x).max(1e-9);
        let height = (max_y - min_y).max(1e-9);
        let cells_wanted = (points.len() as f64 / target_per_cell.max(1) as f64).max(1.0);
        // Square-ish cells: solve (w/c)*(h/c) = cells_wanted for the side c.
        let cell = ((width * height) / cells_wanted).sqrt().max(1e-9);
        let nx = ((width / cell).ceil() as usize + 1).max(1);
        let ny = ((height / cell).ceil() as usize + 1).max(1);

        let mut buckets = vec![Vec::new(); nx * ny];
        let index = GridIndex {
            points: points.to_vec(),
            cell,
            min_x,
            min_y,
            nx,
            ny,
            buckets: Vec::new(),
        };
        for (i, p) in points.iter().enumerate() {
            let (cx, cy) = index.cell_of(p);
            buckets[cy * nx + cx].push(i as u32);
        }
        GridIndex { buckets, ..index }
    }

    fn cell_of(&self, p: &GeoPoint) -> (usize, usize) {
        let cx = ((p.x - self.min_x) / self.cell).floor();
        let cy = ((p.y - self.min_y) / self.cell).floor();
        let cx = (cx.max(0.0) as usize).min(self.nx - 1);
        let cy = (cy.max(0.0) as usize).min(self.ny - 1);
        (cx, cy)
    }

    /// Index of the point nearest to `q`; equidistant points resolve to the
    /// lowest index. Identical to an exhaustive scan.
    pub fn nearest(&self, q: &GeoPoint) -> u32 {
        let (qx, qy) = self.cell_of(q);
        let mut best: Option<(f64, u32)> = None;
        let max_ring = self.nx.max(self.ny);

        for ring in 0..=max_ring {
            // Any point in a cell at Chebyshev ring distance `ring` is at
            // least (ring-1) * cell away from q, so once that bound exceeds
            // the best hit the search is complete.
            if let Some((best_d2, _)) = best {
                let lower = (ring as f64 - 1.0).max(0.0) * self.cell;
                if lower * lower > best_d2 {
                    break;
                }
            }
            let mut any_cell = false;
            self.for_ring_cells(qx, qy, ring, |bucket| {
                any_cell = true;
                for &i in bucket {
                    let d2 = self.points[i as usize].dist_sq(q);
                    let better = match best {
                        None => true,
                        Some((bd2, bi)) => d2 < bd2 || (d2 == bd2 && i < bi),
                    };
                    if better {
                        best = Some((d2, i));
                    }
                }
            });
            if !any_cell && best.is_some() {
                break;
            }
        }
        best.expect("nonempty index").1
    }

    fn for_ring_cells(&self, qx: usize, qy: usize, ring: usize, mut visit: impl FnMut(&[u32])) {
        let (qx, qy, ring) = (qx as isize, qy as isize, ring as isize);
        let visit_cell = |cx: isize, cy: isize, visit: &mut dyn FnMut(&[u32])| {
            if cx >= 0 && cy >= 0 && (cx as usize) < self.nx && (cy as usize) < self.ny {
                visit(&self.buckets[cy as usize * self.nx + cx as usize]);
            }
        };
        if ring == 0 {
            visit_cell(qx, qy, &mut visit);
            return;
        }
        for cx in (qx - ring)..=(qx + ring) {
            visit_cell(cx, qy - ring, &mut visit);
            visit_cell(cx, qy + ring, &mut visit);
        }
        for cy in (qy - ring + 1)..(qy + ring) {
            visit_cell(qx - ring, cy, &mut visit);
            visit_cell(qx + ring, cy, &mut visit);
        }
    }
}

/// Exhaustive nearest neighbour with the same tie rule as [`GridIndex`].
pub fn nearest_brute(points: &[GeoPoint], q: &GeoPoint) -> u32 {
    assert!(!points.is_empty());
    let mut best = 0u32;
    let mut best_d2 = points[0].dist_sq(q);
    for (i, p) in points.iter().enumerate().skip(1) {
        let d2 = p.dist_sq(q);
        if d2 < best_d2 {
            best_d2 = d2;
            best = i as u32;
        }
    }
    best
}

//! Fixed-size spatial clustering with the MDAV (maximum distance to average
//! record) heuristic.
//!
//! Clustering is a scalability device: synthesis models run independently,
//! and in parallel, on each cluster. All clusters contain exactly `k`
//! records except the last, which absorbs the remainder and holds between
//! `k` and `2k-1`.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use crate::data::{Column, Dataset, GeoPoint};
use crate::error::{Error, Result};

/// Assignment of every record to one of `cluster_count` spatial clusters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterPartition {
    assignments: Vec<u32>,
    k: usize,
    cluster_count: usize,
}

impl ClusterPartition {
    /// Per-record cluster ids in `0..cluster_count`.
    pub fn assignments(&self) -> &[u32] {
        &self.assignments
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn cluster_count(&self) -> usize {
        self.cluster_count
    }

    pub fn n(&self) -> usize {
        self.assignments.len()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.cluster_count];
        for &c in &self.assignments {
            sizes[c as usize] += 1;
        }
        sizes
    }

    /// Record indices of one cluster, in ascending order.
    pub fn members(&self, cluster: u32) -> Vec<usize> {
        self.assignments
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == cluster)
            .map(|(i, _)| i)
            .collect()
    }

    /// Writes the partition as `record_index,cluster_id` CSV.
    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = String::with_capacity(self.assignments.len() * 8 + 32);
        out.push_str("record_index,cluster_id\n");
        for (i, &c) in self.assignments.iter().enumerate() {
            out.push_str(&format!("{i},{c}\n"));
        }
        let mut file = fs::File::create(path.as_ref())?;
        file.write_all(out.as_bytes())?;
        Ok(())
    }

    /// Reads a partition written by [`ClusterPartition::save_csv`]. `k` is
    /// not stored in the file and must be supplied by the caller's config.
    pub fn load_csv(path: impl AsRef<Path>, k: usize) -> Result<ClusterPartition> {
        let text = fs::read_to_string(path.as_ref())?;
        let mut lines = text.lines();
        match lines.next() {
            Some("record_index,cluster_id") => {}
            other => {
                return Err(Error::Csv {
                    row: 0,
                    msg: format!("unexpected partition header {other:?}"),
                })
            }
        }
        let mut assignments = Vec::new();
        for (i, line) in lines.enumerate() {
            let row = i + 1;
            let (idx, cluster) = line.split_once(',').ok_or_else(|| Error::Csv {
                row,
                msg: "expected two fields".into(),
            })?;
            let idx: usize = idx.parse().map_err(|_| Error::Csv {
                row,
                msg: format!("bad record index `{idx}`"),
            })?;
            if idx != i {
                return Err(Error::Csv {
                    row,
                    msg: format!("record index {idx} out of order, expected {i}"),
                });
            }
            let cluster: u32 = cluster.parse().map_err(|_| Error::Csv {
                row,
                msg: format!("bad cluster id `{cluster}`"),
            })?;
            assignments.push(cluster);
        }
        let cluster_count = assignments.iter().map(|&c| c as usize + 1).max().unwrap_or(0);
        for c in 0..cluster_count {
            if !assignments.iter().any(|&a| a as usize == c) {
                return Err(Error::Csv {
                    row: 0,
                    msg: format!("cluster {c} has no members"),
                });
            }
        }
        Ok(ClusterPartition {
            assignments,
            k,
            cluster_count,
        })
    }
}

/// Partitions `points` into fixed-size clusters of `k` records.
///
/// While at least `3k` points are unassigned: find the point `r` farthest
/// from the centroid of the unassigned points and group it with its `k-1`
/// nearest unassigned neighbours; then find the point `s` farthest from `r`
/// and group it likewise. With `2k <= remaining < 3k`, one more cluster of
/// `k` is seeded at the point farthest from the centroid and the remainder
/// becomes the final cluster. With fewer than `2k` remaining, all remaining
/// points form the final cluster. Distances are Euclidean in meters; every
/// tie (equidistant candidates) is broken toward the lowest record index,
/// so the partition is deterministic given input order.
pub fn mdav_partition(points: &[GeoPoint], k: usize) -> Result<ClusterPartition> {
    let n = points.len();
    if n == 0 {
        return Err(Error::invalid("mdav_partition on empty point set"));
    }
    if k == 0 {
        return Err(Error::invalid("mdav_partition requires k >= 1"));
    }

    let mut assignments = vec![u32::MAX; n];
    let mut unassigned: Vec<u32> = (0..n as u32).collect();
    let mut next_cluster: u32 = 0;

    while unassigned.len() >= 3 * k {
        let centroid = centroid_of(points, &unassigned);
        let r = farthest_from(points, &unassigned, &centroid);
        carve_cluster(points, &mut unassigned, &mut assignments, r, k, next_cluster);
        next_cluster += 1;

        let s = farthest_from(points, &unassigned, &points[r as usize]);
        carve_cluster(points, &mut unassigned, &mut assignments, s, k, next_cluster);
        next_cluster += 1;
    }

    if unassigned.len() >= 2 * k {
        let centroid = centroid_of(points, &unassigned);
        let r = farthest_from(points, &unassigned, &centroid);
        carve_cluster(points, &mut unassigned, &mut assignments, r, k, next_cluster);
        next_cluster += 1;
    }
    // Whatever remains (between k and 2k-1 when n >= k) is the final cluster.
    for &i in &unassigned {
        assignments[i as usize] = next_cluster;
    }
    let cluster_count = (next_cluster + 1) as usize;

    debug_assert!(assignments.iter().all(|&c| c != u32::MAX));
    Ok(ClusterPartition {
        assignments,
        k,
        cluster_count,
    })
}

fn centroid_of(points: &[GeoPoint], ids: &[u32]) -> GeoPoint {
    let mut sx = 0.0;
    let mut sy = 0.0;
    for &i in ids {
        sx += points[i as usize].x;
        sy += points[i as usize].y;
    }
    let n = ids.len() as f64;
    GeoPoint::new(sx / n, sy / n)
}

/// Index of the point farthest from `from`; equidistant candidates resolve
/// to the lowest record index because `ids` is scanned in ascending order
/// with a strict comparison.
fn farthest_from(points: &[GeoPoint], ids: &[u32], from: &GeoPoint) -> u32 {
    let mut best = ids[0];
    let mut best_d = points[best as usize].dist_sq(from);
    for &i in &ids[1..] {
        let d = points[i as usize].dist_sq(from);
        if d > best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

/// Forms one cluster of `seed` plus its `k-1` nearest unassigned points and
/// removes them from `unassigned`.
fn carve_cluster(
    points: &[GeoPoint],
    unassigned: &mut Vec<u32>,
    assignments: &mut [u32],
    seed: u32,
    k: usize,
    cluster: u32,
) {
    let seed_point = points[seed as usize];
    let mut others: Vec<(f64, u32)> = unassigned
        .iter()
        .filter(|&&i| i != seed)
        .map(|&i| (points[i as usize].dist_sq(&seed_point), i))
        .collect();

    let take = k - 1;
    if take > 0 && take < others.len() {
        // Total order on (distance, index); ties go to the lower index.
        others.select_nth_unstable_by(take - 1, |a, b| {
            a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1))
        });
    }
    assignments[seed as usize] = cluster;
    for &(_, i) in others.iter().take(take) {
        assignments[i as usize] = cluster;
    }
    unassigned.retain(|&i| assignments[i as usize] == u32::MAX);
}

/// Splits a dataset into per-cluster datasets, preserving within-cluster
/// record order. Each split keeps the parent's source-row provenance so a
/// later [`reassemble`] can restore the original order.
pub fn split_dataset(ds: &Dataset, part: &ClusterPartition) -> Result<Vec<Dataset>> {
    if part.assignments.len() != ds.n() {
        return Err(Error::invalid(format!(
            "partition covers {} records, dataset has {}",
            part.assignments.len(),
            ds.n()
        )));
    }
    let mut rows_per_cluster: Vec<Vec<usize>> = vec![Vec::new(); part.cluster_count];
    for (row, &c) in part.assignments.iter().enumerate() {
        rows_per_cluster[c as usize].push(row);
    }

    let schema = ds.schema_arc();
    let mut out = Vec::with_capacity(part.cluster_count);
    for rows in &rows_per_cluster {
        let columns: Vec<Column> = ds
            .columns()
            .iter()
            .map(|col| match col {
                Column::Categorical(codes) => {
                    Column::Categorical(rows.iter().map(|&r| codes[r]).collect())
                }
                Column::Geocode(points) => {
                    Column::Geocode(rows.iter().map(|&r| points[r]).collect())
                }
            })
            .collect();
        let source_rows: Vec<usize> = rows.iter().map(|&r| ds.source_rows()[r]).collect();
        out.push(Dataset::with_source_rows(Arc::clone(&schema), columns, source_rows)?);
    }
    Ok(out)
}

/// Reassembles cluster datasets into a single dataset ordered by source-row
/// provenance. The parts must jointly cover a set of distinct source rows.
pub fn reassemble(parts: &[Dataset]) -> Result<Dataset> {
    let first = parts
        .first()
        .ok_or_else(|| Error::invalid("reassemble on empty part list"))?;
    let schema = first.schema_arc();

    let mut order: Vec<(usize, usize, usize)> = Vec::new(); // (source_row, part, row)
    for (p, part) in parts.iter().enumerate() {
        if part.schema() != schema.as_ref() {
            return Err(Error::invalid("reassemble: parts disagree on schema"));
        }
        for (row, &src) in part.source_rows().iter().enumerate() {
            order.push((src, p, row));
        }
    }
    order.sort_unstable();
    if order.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::invalid("reassemble: duplicate source rows"));
    }

    let n = order.len();
    let n_cols = first.columns().len();
    let mut columns: Vec<Column> = (0..n_cols)
        .map(|c| match first.column(c) {
            Column::Categorical(_) => Column::Categorical(Vec::with_capacity(n)),
            Column::Geocode(_) => Column::Geocode(Vec::with_capacity(n)),
        })
        .collect();
    let mut source_rows = Vec::with_capacity(n);
    for &(src, p, row) in &order {
        source_rows.push(src);
        for (c, col) in columns.iter_mut().enumerate() {
            match (col, parts[p].column(c)) {
                (Column::Categorical(dst), Column::Categorical(srcv)) => dst.push(srcv[row]),
                (Column::Geocode(dst), Column::Geocode(srcv)) => dst.push(srcv[row]),
                _ => return Err(Error::invalid("reassemble: column kind mismatch")),
            }
        }
    }
    Dataset::with_source_rows(schema, columns, source_rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Schema, Variable};
    use proptest::prelude::*;

    fn grid_points(n: usize) -> Vec<GeoPoint> {
        // Deterministic scatter, no duplicates.
        (0..n)
            .map(|i| {
                let x = (i as f64 * 97.0) % 1009.0;
                let y = (i as f64 * 53.0) % 887.0 + (i as f64) * 1e-3;
                GeoPoint::new(x, y)
            })
            .collect()
    }

    #[test]
    fn n_equals_k_single_cluster() {
        let points = grid_points(5);
        let part = mdav_partition(&points, 5).unwrap();
        assert_eq!(part.cluster_count(), 1);
        assert_eq!(part.cluster_sizes(), vec![5]);
    }

    #[test]
    fn k_larger_than_n_single_cluster() {
        let points = grid_points(3);
        let part = mdav_partition(&points, 10).unwrap();
        assert_eq!(part.cluster_count(), 1);
        assert_eq!(part.cluster_sizes(), vec![3]);
    }

    #[test]
    fn seven_collinear_points_split_three_four() {
        // Hand execution: centroid x=3, farthest (tie 0 vs 6) -> index 0.
        // Cluster {0,1,2}; remaining {3,4,5,6} is the final cluster.
        let points: Vec<GeoPoint> = (0..7).map(|i| GeoPoint::new(i as f64, 0.0)).collect();
        let part = mdav_partition(&points, 3).unwrap();
        assert_eq!(part.cluster_count(), 2);
        assert_eq!(part.cluster_sizes(), vec![3, 4]);
        assert_eq!(part.members(0), vec![0, 1, 2]);
        assert_eq!(part.members(1), vec![3, 4, 5, 6]);
    }

    #[test]
    fn desk_scale_cluster_arithmetic() {
        // floor(3340/15) = 222 clusters, last of size 3340 - 221*15 = 25.
        let points = grid_points(3340);
        let part = mdav_partition(&points, 15).unwrap();
        assert_eq!(part.cluster_count(), 222);
        let sizes = part.cluster_sizes();
        assert!(sizes[..221].iter().all(|&s| s == 15));
        assert_eq!(sizes[221], 25);
    }

    #[test]
    fn deterministic_given_input_order() {
        let points = grid_points(400);
        let a = mdav_partition(&points, 30).unwrap();
        let b = mdav_partition(&points, 30).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn partition_csv_roundtrip() {
        let points = grid_points(40);
        let part = mdav_partition(&points, 7).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("partition.csv");
        part.save_csv(&path).unwrap();
        let loaded = ClusterPartition::load_csv(&path, 7).unwrap();
        assert_eq!(part, loaded);
    }

    fn split_fixture() -> (Dataset, ClusterPartition) {
        let schema = std::sync::Arc::new(
            Schema::new(
                vec![
                    Variable::categorical("a", vec!["u".into(), "v".into(), "w".into()]),
                    Variable::geocode("geo"),
                ],
                vec![],
                vec![],
            )
            .unwrap(),
        );
        let points = grid_points(25);
        let codes: Vec<u32> = (0..25).map(|i| (i % 3) as u32 + 1).collect();
        let ds = Dataset::new(
            schema,
            vec![Column::Categorical(codes), Column::Geocode(points.clone())],
        )
        .unwrap();
        let part = mdav_partition(&points, 8).unwrap();
        (ds, part)
    }

    #[test]
    fn split_sizes_match_cluster_sizes() {
        let (ds, part) = split_fixture();
        let splits = split_dataset(&ds, &part).unwrap();
        let sizes: Vec<usize> = splits.iter().map(Dataset::n).collect();
        assert_eq!(sizes, part.cluster_sizes());
    }

    #[test]
    fn split_then_reassemble_is_identity() {
        let (ds, part) = split_fixture();
        let splits = split_dataset(&ds, &part).unwrap();
        let back = reassemble(&splits).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn single_cluster_split_equals_dataset() {
        let (ds, _) = split_fixture();
        let part = mdav_partition(ds.geocode_points().unwrap(), 25).unwrap();
        let splits = split_dataset(&ds, &part).unwrap();
        assert_eq!(splits.len(), 1);
        assert_eq!(splits[0], ds);
    }

    proptest! {
        #[test]
        fn cluster_size_invariant(n in 1usize..600, k in 1usize..40, seed in 0u64..50) {
            let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(1);
            let points: Vec<GeoPoint> = (0..n).map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let x = ((state >> 11) % 10_000) as f64 / 10.0;
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let y = ((state >> 11) % 10_000) as f64 / 10.0;
                GeoPoint::new(x, y)
            }).collect();
            let part = mdav_partition(&points, k).unwrap();
            let sizes = part.cluster_sizes();

            if n >= k {
                prop_assert_eq!(part.cluster_count(), n / k);
                let (last, head) = sizes.split_last().unwrap();
                prop_assert!(head.iter().all(|&s| s == k));
                prop_assert!(*last >= k && *last <= 2 * k - 1);
            } else {
                prop_assert_eq!(part.cluster_count(), 1);
                prop_assert_eq!(sizes[0], n);
            }
        }
    }
}

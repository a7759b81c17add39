//! Analytical-validity evaluation: region transfer by nearest geocode,
//! per-region shares, interaction-table differences (the UL measure), and
//! multitype K/L spatial functions.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;

use serde::Serialize;

use crate::data::{Dataset, GeoPoint, SyntheticRelease};
use crate::error::{Error, Result};
use crate::grid::{nearest_brute, GridIndex};

/// Region lookup: a synthetic geocode inherits the region of its
/// Euclidean-nearest original geocode (ties toward the lowest original
/// record index).
#[derive(Debug, Clone)]
pub struct RegionMap {
    points: Vec<GeoPoint>,
    region_ids: Vec<u32>,
    index: Option<GridIndex>,
}

/// Below this many reference points an exhaustive scan beats the grid.
const GRID_THRESHOLD: usize = 512;

impl RegionMap {
    pub fn build(points: Vec<GeoPoint>, region_ids: Vec<u32>) -> Result<RegionMap> {
        if points.is_empty() || points.len() != region_ids.len() {
            return Err(Error::invalid(
                "region map needs one region id per reference point",
            ));
        }
        let index = if points.len() >= GRID_THRESHOLD {
            Some(GridIndex::build(&points, 8))
        } else {
            None
        };
        Ok(RegionMap {
            points,
            region_ids,
            index,
        })
    }

    /// Builds the map from a dataset's geocodes and one of its categorical
    /// variables; the region id is the variable's 1-based level code.
    pub fn from_dataset(ds: &Dataset, region_var: &str) -> Result<RegionMap> {
        let idx = ds
            .schema()
            .var_index(region_var)
            .ok_or_else(|| Error::invalid(format!("unknown region variable `{region_var}`")))?;
        let region_ids = ds.cat_codes(idx)?.to_vec();
        Self::build(ds.geocode_points()?.to_vec(), region_ids)
    }

    pub fn region_of(&self, p: &GeoPoint) -> u32 {
        let hit = match &self.index {
            Some(index) => index.nearest(p),
            None => nearest_brute(&self.points, p),
        };
        self.region_ids[hit as usize]
    }

    /// Sorted distinct region ids, the table universe for this map.
    pub fn region_universe(&self) -> Vec<u32> {
        let mut ids = self.region_ids.to_vec();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub fn region_ids(&self) -> &[u32] {
        &self.region_ids
    }
}

/// Region id for every record of `ds` via nearest-original-geocode transfer.
pub fn assign_regions(ds: &Dataset, regions: &RegionMap) -> Result<Vec<u32>> {
    Ok(ds
        .geocode_points()?
        .iter()
        .map(|p| regions.region_of(p))
        .collect())
}

/// Per-region fraction of records satisfying the predicate flags. Regions
/// without records are absent from the result.
pub fn region_shares(region_ids: &[u32], satisfies: &[bool]) -> BTreeMap<u32, f64> {
    assert_eq!(region_ids.len(), satisfies.len());
    let mut hits: BTreeMap<u32, (u64, u64)> = BTreeMap::new();
    for (&r, &s) in region_ids.iter().zip(satisfies) {
        let e = hits.entry(r).or_insert((0, 0));
        e.1 += 1;
        if s {
            e.0 += 1;
        }
    }
    hits.into_iter()
        .map(|(r, (hit, total))| (r, hit as f64 / total as f64))
        .collect()
}

/// Relative-frequency tables for every size-`level` subset of `vars`,
/// computed per region over a fixed region universe. Regions with no
/// records yield all-zero tables so layouts stay comparable.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionTables {
    pub level: usize,
    pub regions: Vec<u32>,
    /// Variable-index subsets in ascending combination order.
    pub subsets: Vec<Vec<usize>>,
    /// `freqs[region][subset][cell]`, cells in row-major order over the
    /// subset's category ranges.
    pub freqs: Vec<Vec<Vec<f64>>>,
}

fn combinations(vars: &[usize], level: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(level);
    fn rec(vars: &[usize], level: usize, start: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == level {
            out.push(current.clone());
            return;
        }
        for i in start..vars.len() {
            current.push(vars[i]);
            rec(vars, level, i + 1, current, out);
            current.pop();
        }
    }
    rec(vars, level, 0, &mut current, &mut out);
    out
}

pub fn interaction_tables(
    ds: &Dataset,
    region_ids: &[u32],
    region_universe: &[u32],
    vars: &[usize],
    level: usize,
) -> Result<InteractionTables> {
    if level == 0 || level > vars.len() {
        return Err(Error::invalid(format!(
            "interaction level {level} with {} variables",
            vars.len()
        )));
    }
    if region_ids.len() != ds.n() {
        return Err(Error::invalid("one region id per record required"));
    }
    let arities: Vec<usize> = vars
        .iter()
        .map(|&v| {
            ds.schema().variables()[v]
                .arity()
                .ok_or_else(|| Error::invalid("interaction variables must be categorical"))
        })
        .collect::<Result<_>>()?;
    let codes: Vec<&[u32]> = vars.iter().map(|&v| ds.cat_codes(v)).collect::<Result<_>>()?;

    let region_slot: HashMap<u32, usize> = region_universe
        .iter()
        .enumerate()
        .map(|(i, &r)| (r, i))
        .collect();
    let subsets = combinations(&(0..vars.len()).collect::<Vec<_>>(), level);

    let mut counts: Vec<Vec<Vec<u64>>> = region_universe
        .iter()
        .map(|_| {
            subsets
                .iter()
                .map(|s| vec![0u64; s.iter().map(|&j| arities[j]).product()])
                .collect()
        })
        .collect();
    let mut region_totals = vec![0u64; region_universe.len()];

    for row in 0..ds.n() {
        let slot = *region_slot
            .get(&region_ids[row])
            .ok_or_else(|| Error::invalid(format!("region {} outside universe", region_ids[row])))?;
        region_totals[slot] += 1;
        for (s, subset) in subsets.iter().enumerate() {
            let mut cell = 0usize;
            for &j in subset {
                cell = cell * arities[j] + (codes[j][row] - 1) as usize;
            }
            counts[slot][s][cell] += 1;
        }
    }

    let freqs = counts
        .into_iter()
        .zip(&region_totals)
        .map(|(tables, &total)| {
            tables
                .into_iter()
                .map(|t| {
                    t.into_iter()
                        .map(|c| if total == 0 { 0.0 } else { c as f64 / total as f64 })
                        .collect()
                })
                .collect()
        })
        .collect();

    Ok(InteractionTables {
        level,
        regions: region_universe.to_vec(),
        subsets: subsets
            .iter()
            .map(|s| s.iter().map(|&j| vars[j]).collect())
            .collect(),
        freqs,
    })
}

/// Cell-wise mean of identically laid out tables (one per replicate).
pub fn average_tables(tables: &[InteractionTables]) -> Result<InteractionTables> {
    let first = tables
        .first()
        .ok_or_else(|| Error::invalid("average_tables on empty list"))?;
    let mut out = first.clone();
    for t in &tables[1..] {
        if t.level != first.level || t.regions != first.regions || t.subsets != first.subsets {
            return Err(Error::invalid("average_tables: mismatched layouts"));
        }
        for (acc_r, t_r) in out.freqs.iter_mut().zip(&t.freqs) {
            for (acc_s, t_s) in acc_r.iter_mut().zip(t_r) {
                if acc_s.len() != t_s.len() {
                    return Err(Error::invalid("average_tables: mismatched layouts"));
                }
                for (a, b) in acc_s.iter_mut().zip(t_s) {
                    *a += b;
                }
            }
        }
    }
    let m = tables.len() as f64;
    for r in &mut out.freqs {
        for s in r {
            for c in s {
                *c /= m;
            }
        }
    }
    Ok(out)
}

/// The UL value for one interaction level plus the full per-cell difference
/// distribution (synthetic minus original) retained for histogram export.
#[derive(Debug, Clone, Serialize)]
pub struct UlResult {
    pub level: usize,
    /// Mean absolute difference of relative frequencies over all cells,
    /// regions and tables of the level.
    pub ul: f64,
    pub differences: Vec<f64>,
}

/// Compares original tables against synthetic tables already averaged
/// across replicates.
pub fn ul_measure(orig: &InteractionTables, syn_avg: &InteractionTables) -> Result<UlResult> {
    if orig.level != syn_avg.level
        || orig.regions != syn_avg.regions
        || orig.subsets != syn_avg.subsets
    {
        return Err(Error::invalid("ul_measure: mismatched table layouts"));
    }
    let mut differences = Vec::new();
    for (o_r, s_r) in orig.freqs.iter().zip(&syn_avg.freqs) {
        for (o_s, s_s) in o_r.iter().zip(s_r) {
            if o_s.len() != s_s.len() {
                return Err(Error::invalid("ul_measure: mismatched table layouts"));
            }
            for (o, s) in o_s.iter().zip(s_s) {
                differences.push(s - o);
            }
        }
    }
    let ul = if differences.is_empty() {
        0.0
    } else {
        differences.iter().map(|d| d.abs()).sum::<f64>() / differences.len() as f64
    };
    Ok(UlResult {
        level: orig.level,
        ul,
        differences,
    })
}

/// Multitype K function: expected number of other points within distance
/// `r` of a type-i point, scaled by the domain area:
/// `K_i(r) = |D| * sum over ordered pairs (a of type i, b != a) of
/// I(dist(a,b) <= r) / (n * n_i)`.
pub fn multitype_k(
    points: &[GeoPoint],
    is_type: &[bool],
    r: f64,
    domain_area: f64,
) -> Result<f64> {
    let counts = k_preconditions(points, is_type, r, domain_area)?;
    let r2 = r * r;
    let mut pairs = 0u64;
    for (a, p) in points.iter().enumerate() {
        if !is_type[a] {
            continue;
        }
        for (b, q) in points.iter().enumerate() {
            if b != a && p.dist_sq(q) <= r2 {
                pairs += 1;
            }
        }
    }
    Ok(scale_k(pairs, points.len(), counts, domain_area))
}

/// Grid-bucketed evaluation of the same pair count; cell side `r` means all
/// qualifying partners sit in the 3x3 neighbourhood. Agrees exactly with
/// [`multitype_k`] because the indicator uses the identical squared-distance
/// comparison.
pub fn multitype_k_grid(
    points: &[GeoPoint],
    is_type: &[bool],
    r: f64,
    domain_area: f64,
) -> Result<f64> {
    let counts = k_preconditions(points, is_type, r, domain_area)?;
    if r == 0.0 {
        return multitype_k(points, is_type, r, domain_area);
    }
    let r2 = r * r;
    let cell = |p: &GeoPoint| ((p.x / r).floor() as i64, (p.y / r).floor() as i64);
    let mut buckets: HashMap<(i64, i64), Vec<u32>> = HashMap::new();
    for (i, p) in points.iter().enumerate() {
        buckets.entry(cell(p)).or_default().push(i as u32);
    }
    let mut pairs = 0u64;
    for (a, p) in points.iter().enumerate() {
        if !is_type[a] {
            continue;
        }
        let (cx, cy) = cell(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(bucket) = buckets.get(&(cx + dx, cy + dy)) {
                    for &b in bucket {
                        if b as usize != a && p.dist_sq(&points[b as usize]) <= r2 {
                            pairs += 1;
                        }
                    }
                }
            }
        }
    }
    Ok(scale_k(pairs, points.len(), counts, domain_area))
}

fn k_preconditions(points: &[GeoPoint], is_type: &[bool], r: f64, domain_area: f64) -> Result<usize> {
    if points.len() != is_type.len() {
        return Err(Error::invalid("one type flag per point required"));
    }
    if !(domain_area > 0.0) {
        return Err(Error::invalid("domain area must be positive"));
    }
    if !(r >= 0.0) {
        return Err(Error::invalid("radius must be non-negative"));
    }
    let n_i = is_type.iter().filter(|&&t| t).count();
    if n_i == 0 {
        return Err(Error::invalid("no points of the requested type"));
    }
    Ok(n_i)
}

fn scale_k(pairs: u64, n: usize, n_i: usize, domain_area: f64) -> f64 {
    domain_area * pairs as f64 / (n as f64 * n_i as f64)
}

/// Variance-stabilized transform `L(r) = sqrt(K(r)/pi) - r`; positive values
/// indicate spatial clustering.
pub fn l_function(k_value: f64, r: f64) -> f64 {
    (k_value / PI).sqrt() - r
}

/// Area of the axis-aligned bounding box of a point set, the default
/// domain area.
pub fn bounding_box_area(points: &[GeoPoint]) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let (mut min_x, mut min_y) = (f64::INFINITY, f64::INFINITY);
    let (mut max_x, mut max_y) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in points {
        min_x = min_x.min(p.x);
        min_y = min_y.min(p.y);
        max_x = max_x.max(p.x);
        max_y = max_y.max(p.y);
    }
    (max_x - min_x) * (max_y - min_y)
}

/// Evenly spaced radii from 0 to one quarter of the bounding box's shorter
/// side.
pub fn default_r_grid(points: &[GeoPoint], count: usize) -> Vec<f64> {
    let (mut min_x, mut min_y) = (f64::INFINITY, f64::INFINITY);
    let (mut max_x, mut max_y) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in points {
        min_x = min_x.min(p.x);
        min_y = min_y.min(p.y);
        max_x = max_x.max(p.x);
        max_y = max_y.max(p.y);
    }
    let shorter = (max_x - min_x).min(max_y - min_y).max(0.0);
    let hi = shorter / 4.0;
    (0..count)
        .map(|i| hi * i as f64 / (count - 1).max(1) as f64)
        .collect()
}

/// An original L curve next to the replicate-averaged synthetic curve.
#[derive(Debug, Clone, Serialize)]
pub struct LCurves {
    pub r: Vec<f64>,
    pub original: Vec<f64>,
    pub synthetic_mean: Vec<f64>,
}

/// Use the bucketed pair counter above this point count.
const K_GRID_THRESHOLD: usize = 1500;

fn l_at(points: &[GeoPoint], is_type: &[bool], r: f64, domain_area: f64) -> Result<f64> {
    let k = if points.len() >= K_GRID_THRESHOLD && r > 0.0 {
        multitype_k_grid(points, is_type, r, domain_area)?
    } else {
        multitype_k(points, is_type, r, domain_area)?
    };
    Ok(l_function(k, r))
}

/// L curves over `r_grid` for the original data and the mean across the
/// release's replicates. `flags_of` marks the type-i points of a dataset;
/// it is evaluated against each replicate, so a synthesized type variable
/// changes the synthetic point marking.
pub fn l_curves(
    orig: &Dataset,
    release: &SyntheticRelease,
    flags_of: impl Fn(&Dataset) -> Result<Vec<bool>>,
    r_grid: &[f64],
    domain_area: f64,
) -> Result<LCurves> {
    let orig_points = orig.geocode_points()?;
    let orig_flags = flags_of(orig)?;

    let mut original = Vec::with_capacity(r_grid.len());
    for &r in r_grid {
        original.push(l_at(orig_points, &orig_flags, r, domain_area)?);
    }

    let mut synthetic_mean = vec![0.0f64; r_grid.len()];
    for rep in &release.replicates {
        let points = rep.geocode_points()?;
        let flags = flags_of(rep)?;
        for (i, &r) in r_grid.iter().enumerate() {
            synthetic_mean[i] += l_at(points, &flags, r, domain_area)?;
        }
    }
    let m = release.m() as f64;
    for v in &mut synthetic_mean {
        *v /= m;
    }

    Ok(LCurves {
        r: r_grid.to_vec(),
        original,
        synthetic_mean,
    })
}

/// The three utility outputs in one report.
#[derive(Debug, Clone, Serialize)]
pub struct UtilityReport {
    pub ul_by_level: BTreeMap<usize, f64>,
    pub shares: Vec<ShareComparison>,
    pub l_curves: Vec<NamedLCurves>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ShareComparison {
    pub name: String,
    pub regions: Vec<u32>,
    pub original: Vec<f64>,
    pub synthetic_mean: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct NamedLCurves {
    pub name: String,
    #[serde(flatten)]
    pub curves: LCurves,
}

/// Averages per-replicate share maps over a fixed region universe; regions
/// a replicate never hits contribute zero for that replicate.
pub fn mean_shares(universe: &[u32], per_replicate: &[BTreeMap<u32, f64>]) -> Vec<f64> {
    let m = per_replicate.len().max(1) as f64;
    universe
        .iter()
        .map(|r| per_replicate.iter().map(|s| s.get(r).copied().unwrap_or(0.0)).sum::<f64>() / m)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Column, Schema, Variable};
    use std::sync::Arc;

    fn pts(coords: &[(f64, f64)]) -> Vec<GeoPoint> {
        coords.iter().map(|&(x, y)| GeoPoint::new(x, y)).collect()
    }

    #[test]
    fn region_of_coincident_point_is_that_region() {
        let map = RegionMap::build(pts(&[(0.0, 0.0), (10.0, 0.0), (0.0, 10.0)]), vec![7, 8, 9]).unwrap();
        assert_eq!(map.region_of(&GeoPoint::new(10.0, 0.0)), 8);
    }

    #[test]
    fn nearest_region_matches_exhaustive_oracle() {
        let points = pts(&[(0.0, 0.0), (5.0, 5.0), (9.0, 1.0), (2.0, 8.0), (7.0, 7.0)]);
        let regions = vec![1, 2, 3, 4, 5];
        let map = RegionMap::build(points.clone(), regions.clone()).unwrap();
        for qx in 0..12 {
            for qy in 0..12 {
                let q = GeoPoint::new(qx as f64 - 1.0, qy as f64 - 0.5);
                let mut best = 0usize;
                for i in 1..points.len() {
                    if points[i].dist_sq(&q) < points[best].dist_sq(&q) {
                        best = i;
                    }
                }
                assert_eq!(map.region_of(&q), regions[best]);
            }
        }
    }

    #[test]
    fn assignment_exact_when_support_is_subset() {
        // Distinct original points: every record keeps its own region.
        let points = pts(&[(0.0, 0.0), (5.0, 5.0), (9.0, 1.0), (2.0, 8.0)]);
        let map = RegionMap::build(points.clone(), vec![1, 2, 3, 4]).unwrap();
        for (i, p) in points.iter().enumerate() {
            assert_eq!(map.region_of(p), (i + 1) as u32);
        }
    }

    #[test]
    fn shares_examples() {
        let regions = vec![1u32; 10];
        let mut flags = vec![false; 10];
        flags[0] = true;
        flags[4] = true;
        flags[9] = true;
        let shares = region_shares(&regions, &flags);
        assert_eq!(shares[&1], 0.3);

        let all = region_shares(&[1, 1, 2, 3], &[true, true, true, true]);
        assert!(all.values().all(|&s| s == 1.0));
    }

    fn cat_ds(columns: Vec<(usize, Vec<u32>)>) -> Dataset {
        let vars: Vec<Variable> = columns
            .iter()
            .enumerate()
            .map(|(i, (d, _))| {
                Variable::categorical(format!("v{i}"), (1..=*d).map(|l| format!("c{l}")).collect())
            })
            .collect();
        let cols: Vec<Column> = columns.into_iter().map(|(_, c)| Column::Categorical(c)).collect();
        Dataset::new(
            Arc::new(Schema::categorical(vars, vec![], vec![]).unwrap()),
            cols,
        )
        .unwrap()
    }

    #[test]
    fn marginal_table_hand_case() {
        let ds = cat_ds(vec![(2, vec![1, 1, 1, 2])]);
        let t = interaction_tables(&ds, &[5, 5, 5, 5], &[5], &[0], 1).unwrap();
        assert_eq!(t.freqs[0][0], vec![0.75, 0.25]);
    }

    #[test]
    fn tables_sum_to_one_per_region() {
        let ds = cat_ds(vec![
            (2, vec![1, 2, 1, 2, 1, 2]),
            (3, vec![1, 2, 3, 1, 2, 3]),
        ]);
        let regions = [1u32, 1, 2, 2, 2, 1];
        for level in 1..=2 {
            let t = interaction_tables(&ds, &regions, &[1, 2], &[0, 1], level).unwrap();
            for r in &t.freqs {
                for s in r {
                    assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn three_way_tables_match_crosstab_oracle() {
        let n = 48;
        let c1: Vec<u32> = (0..n).map(|i| (i % 2) as u32 + 1).collect();
        let c2: Vec<u32> = (0..n).map(|i| (i % 3) as u32 + 1).collect();
        let c3: Vec<u32> = (0..n).map(|i| ((i / 5) % 2) as u32 + 1).collect();
        let c4: Vec<u32> = (0..n).map(|i| ((i / 7) % 3) as u32 + 1).collect();
        let ds = cat_ds(vec![(2, c1.clone()), (3, c2.clone()), (2, c3.clone()), (3, c4.clone())]);
        let regions: Vec<u32> = (0..n).map(|i| (i % 2) as u32).collect();
        let t = interaction_tables(&ds, &regions, &[0, 1], &[0, 1, 2, 3], 3).unwrap();
        assert_eq!(t.subsets.len(), 4); // C(4,3)

        // Oracle: direct cross-classification of subset (v0, v1, v3).
        let s = t.subsets.iter().position(|s| s == &vec![0, 1, 3]).unwrap();
        let mut counts = vec![0u64; 2 * 3 * 3];
        let mut total = 0u64;
        for i in 0..n {
            if regions[i] != 0 {
                continue;
            }
            total += 1;
            let cell = ((c1[i] - 1) as usize * 3 + (c2[i] - 1) as usize) * 3 + (c4[i] - 1) as usize;
            counts[cell] += 1;
        }
        let expect: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
        assert_eq!(t.freqs[0][s], expect);
    }

    #[test]
    fn ul_zero_on_identity_and_hand_case() {
        let ds = cat_ds(vec![(2, vec![1, 1, 1, 2]), (3, vec![1, 2, 3, 1])]);
        let regions = vec![1u32; 4];
        for level in 1..=2 {
            let t = interaction_tables(&ds, &regions, &[1], &[0, 1], level).unwrap();
            let ul = ul_measure(&t, &t).unwrap();
            assert_eq!(ul.ul, 0.0);
            assert!(ul.differences.iter().all(|&d| d == 0.0));
        }

        // (0.75, 0.25) vs (0.5, 0.5): mean |diff| = 0.25.
        let orig = cat_ds(vec![(2, vec![1, 1, 1, 2])]);
        let syn = cat_ds(vec![(2, vec![1, 1, 2, 2])]);
        let to = interaction_tables(&orig, &[1, 1, 1, 1], &[1], &[0], 1).unwrap();
        let ts = interaction_tables(&syn, &[1, 1, 1, 1], &[1], &[0], 1).unwrap();
        let ul = ul_measure(&to, &ts).unwrap();
        assert!((ul.ul - 0.25).abs() < 1e-15);
    }

    #[test]
    fn ul_rejects_mismatched_layouts() {
        let a = cat_ds(vec![(2, vec![1, 2])]);
        let ta = interaction_tables(&a, &[1, 1], &[1], &[0], 1).unwrap();
        let tb = interaction_tables(&a, &[1, 2], &[1, 2], &[0], 1).unwrap();
        assert!(ul_measure(&ta, &tb).is_err());
    }

    #[test]
    fn k_function_hand_example() {
        // Points A(0,0), A(3,0), B(1,0); type A, r = 1.5, |D| = 100.
        // One qualifying ordered pair: K = 100 * 1 / (3*2) = 50/3.
        let points = pts(&[(0.0, 0.0), (3.0, 0.0), (1.0, 0.0)]);
        let flags = [true, true, false];
        let k = multitype_k(&points, &flags, 1.5, 100.0).unwrap();
        assert!((k - 50.0 / 3.0).abs() < 1e-12);
        let l = l_function(k, 1.5);
        assert!((l - ((50.0 / (3.0 * PI)).sqrt() - 1.5)).abs() < 1e-12);
    }

    #[test]
    fn k_zero_when_isolated() {
        let points = pts(&[(0.0, 0.0), (100.0, 100.0)]);
        let k = multitype_k(&points, &[true, false], 1.0, 10.0).unwrap();
        assert_eq!(k, 0.0);
        assert!(multitype_k(&points, &[false, false], 1.0, 10.0).is_err());
    }

    #[test]
    fn l_function_csr_and_empty_cases() {
        for r in [0.5, 1.0, 7.3] {
            assert!(l_function(PI * r * r, r).abs() < 1e-12);
        }
        assert_eq!(l_function(0.0, 2.0), -2.0);
    }

    #[test]
    fn k_monotone_and_grid_agrees_with_brute() {
        let mut state = 42u64;
        for pattern in 0..8 {
            let n = 40 + pattern * 17;
            let points: Vec<GeoPoint> = (0..n)
                .map(|_| {
                    state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    let x = ((state >> 20) % 1000) as f64 / 10.0;
                    state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    let y = ((state >> 20) % 1000) as f64 / 10.0;
                    GeoPoint::new(x, y)
                })
                .collect();
            let flags: Vec<bool> = (0..n).map(|i| i % 3 == 0).collect();
            let area = bounding_box_area(&points).max(1.0);
            let mut last = 0.0;
            for i in 0..12 {
                let r = i as f64 * 2.5;
                let brute = multitype_k(&points, &flags, r, area).unwrap();
                let grid = multitype_k_grid(&points, &flags, r, area).unwrap();
                assert_eq!(brute, grid, "exact agreement required");
                assert!(brute >= last, "monotone in r");
                last = brute;
            }
        }
    }

    #[test]
    fn l_curves_identity_on_exact_copies() {
        let schema = Arc::new(
            Schema::new(
                vec![
                    Variable::categorical("t", vec!["a".into(), "b".into()]),
                    Variable::geocode("geo"),
                ],
                vec![],
                vec![],
            )
            .unwrap(),
        );
        let ds = Dataset::new(
            schema,
            vec![
                Column::Categorical(vec![1, 2, 1, 2, 1]),
                Column::Geocode(pts(&[(0.0, 0.0), (2.0, 1.0), (5.0, 5.0), (8.0, 3.0), (9.0, 9.0)])),
            ],
        )
        .unwrap();
        let release = SyntheticRelease {
            replicates: vec![ds.clone(), ds.clone(), ds.clone()],
            synthesized_variables: vec![],
        };
        let grid = [0.0, 1.0, 2.0, 4.0, 8.0];
        let curves = l_curves(
            &ds,
            &release,
            |d| Ok(d.cat_codes(0)?.iter().map(|&c| c == 1).collect()),
            &grid,
            bounding_box_area(ds.geocode_points().unwrap()),
        )
        .unwrap();
        for (o, s) in curves.original.iter().zip(&curves.synthetic_mean) {
            assert!((o - s).abs() < 1e-12);
        }
        // r = 0 with no coincident points: K(0)=0, L(0)=0.
        assert_eq!(curves.original[0], 0.0);
    }

    #[test]
    fn l_curves_mean_is_compositional() {
        let schema = Arc::new(
            Schema::new(
                vec![
                    Variable::categorical("t", vec!["a".into(), "b".into()]),
                    Variable::geocode("geo"),
                ],
                vec![],
                vec![],
            )
            .unwrap(),
        );
        let mk = |coords: &[(f64, f64)]| {
            Dataset::new(
                Arc::clone(&schema),
                vec![
                    Column::Categorical(vec![1, 1, 2, 2]),
                    Column::Geocode(pts(coords)),
                ],
            )
            .unwrap()
        };
        let orig = mk(&[(0.0, 0.0), (1.0, 0.0), (4.0, 4.0), (6.0, 2.0)]);
        let rep1 = mk(&[(0.0, 0.0), (2.0, 2.0), (4.0, 4.0), (6.0, 2.0)]);
        let rep2 = mk(&[(1.0, 1.0), (1.0, 0.0), (5.0, 4.0), (6.0, 2.0)]);
        let release = SyntheticRelease {
            replicates: vec![rep1.clone(), rep2.clone()],
            synthesized_variables: vec![],
        };
        let grid = [0.5, 1.5, 3.0];
        let area = 36.0;
        let is_a =
            |d: &Dataset| -> Result<Vec<bool>> { Ok(d.cat_codes(0)?.iter().map(|&c| c == 1).collect()) };
        let curves = l_curves(&orig, &release, is_a, &grid, area).unwrap();
        for (i, &r) in grid.iter().enumerate() {
            let l1 = l_function(
                multitype_k(rep1.geocode_points().unwrap(), &[true, true, false, false], r, area).unwrap(),
                r,
            );
            let l2 = l_function(
                multitype_k(rep2.geocode_points().unwrap(), &[true, true, false, false], r, area).unwrap(),
                r,
            );
            assert!((curves.synthetic_mean[i] - (l1 + l2) / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn mean_shares_fills_missing_regions_with_zero() {
        let universe = [1u32, 2, 3];
        let rep1: BTreeMap<u32, f64> = [(1, 0.5), (2, 1.0)].into_iter().collect();
        let rep2: BTreeMap<u32, f64> = [(1, 0.25), (3, 0.5)].into_iter().collect();
        let means = mean_shares(&universe, &[rep1, rep2]);
        assert_eq!(means, vec![0.375, 0.5, 0.25]);
    }
}

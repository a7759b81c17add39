//! Re-identification risk: identification probabilities from exact matching
//! against the released replicates, and their three summaries.
//!
//! An intruder holds a target's quasi-identifier values and (optionally) its
//! exact or grid-coarsened geocode. Within each replicate, every record
//! agreeing exactly on that information is an equally likely candidate; the
//! per-record match probability is the candidate weight averaged over the
//! `m` replicates. Weights are kept as exact rationals (numerators over a
//! common product denominator), so argmax ties are detected without
//! floating-point artifacts.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::aggregation::grid_index;
use crate::data::{Dataset, GeoPoint, SyntheticRelease};
use crate::error::{Error, Result};
use crate::mdav::ClusterPartition;

/// What the intruder is assumed to know and how matching is performed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntruderScenario {
    /// Categorical variables known to the intruder.
    pub quasi_identifiers: Vec<String>,
    /// Geocode matching: `None` means the geocode is not used at all;
    /// `Some(0.0)` matches on the exact geocode; `Some(g)` with `g > 0`
    /// matches on `g x g` meter grid cells.
    pub grid_size: Option<f64>,
    pub targets_per_cluster: usize,
    /// Restrict candidate sets to the target's synthesis cluster. This is
    /// conservative: the intruder could not reconstruct the clusters.
    pub block_on_cluster: bool,
}

impl IntruderScenario {
    pub fn validate(&self, ds: &Dataset) -> Result<()> {
        if let Some(g) = self.grid_size {
            if g < 0.0 {
                return Err(Error::Config("risk: grid_size must be >= 0".into()));
            }
        }
        for q in &self.quasi_identifiers {
            let idx = ds
                .schema()
                .var_index(q)
                .ok_or_else(|| Error::Config(format!("risk: unknown quasi-identifier `{q}`")))?;
            if ds.schema().variables()[idx].is_geocode() {
                return Err(Error::Config(
                    "risk: the geocode enters matching via grid_size, not the quasi-identifier list"
                        .into(),
                ));
            }
        }
        Ok(())
    }
}

/// A target record the intruder tries to find in the release.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Target {
    pub record_index: usize,
    pub cluster: u32,
}

/// Uniform per-cluster sample (without replacement) of target records.
pub fn sample_targets(
    ds: &Dataset,
    part: &ClusterPartition,
    per_cluster: usize,
    rng: &mut impl Rng,
) -> Result<Vec<Target>> {
    if part.assignments().len() != ds.n() {
        return Err(Error::invalid("partition does not cover the dataset"));
    }
    let mut targets = Vec::with_capacity(per_cluster * part.cluster_count());
    for cluster in 0..part.cluster_count() as u32 {
        let mut members = part.members(cluster);
        if per_cluster > members.len() {
            return Err(Error::invalid(format!(
                "cluster {cluster} has {} records, cannot sample {per_cluster}",
                members.len()
            )));
        }
        for i in 0..per_cluster {
            let j = i + rng.random_range(0..members.len() - i);
            members.swap(i, j);
        }
        let mut chosen = members[..per_cluster].to_vec();
        chosen.sort_unstable();
        targets.extend(chosen.into_iter().map(|record_index| Target {
            record_index,
            cluster,
        }));
    }
    Ok(targets)
}

/// Grid cell of a point: `(floor(x/g), floor(y/g))`.
pub fn coarsen_geocode(p: &GeoPoint, g: f64) -> Result<(i64, i64)> {
    if !(g > 0.0) {
        return Err(Error::invalid("grid size must be positive"));
    }
    Ok((grid_index(p.x, g), grid_index(p.y, g)))
}

/// Exact identification probabilities for one target: numerators over the
/// common denominator `m * prod(candidate counts of non-empty replicates)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchProbabilities {
    pub weights: BTreeMap<u32, u128>,
    pub denom: u128,
    pub replicates_with_candidates: usize,
    pub m: usize,
}

impl MatchProbabilities {
    pub fn prob(&self, record: usize) -> f64 {
        self.weights
            .get(&(record as u32))
            .map_or(0.0, |&num| num as f64 / self.denom as f64)
    }

    /// Total probability mass as an exact fraction; equals 1 iff every
    /// replicate produced a non-empty candidate set.
    pub fn total_mass(&self) -> (u128, u128) {
        (self.weights.values().sum(), self.denom)
    }
}

fn geo_key(p: &GeoPoint, grid: f64, key: &mut Vec<u64>) -> Result<()> {
    if grid == 0.0 {
        let (bx, by) = p.bits();
        key.push(bx);
        key.push(by);
    } else {
        let (cx, cy) = coarsen_geocode(p, grid)?;
        key.push(cx as u64);
        key.push(cy as u64);
    }
    Ok(())
}

/// Exact-matching evaluator: per-replicate hash indexes over the
/// quasi-identifier values (plus cluster block and geocode cell).
pub struct RiskEvaluator<'a> {
    orig: &'a Dataset,
    scenario: &'a IntruderScenario,
    cluster_of: Option<&'a [u32]>,
    qi_idx: Vec<usize>,
    m: usize,
    indexes: Vec<HashMap<Vec<u64>, Vec<u32>>>,
}

impl<'a> RiskEvaluator<'a> {
    pub fn new(
        orig: &'a Dataset,
        release: &'a SyntheticRelease,
        scenario: &'a IntruderScenario,
        partition: Option<&'a ClusterPartition>,
    ) -> Result<RiskEvaluator<'a>> {
        scenario.validate(orig)?;
        let cluster_of = if scenario.block_on_cluster {
            let part = partition.ok_or_else(|| {
                Error::invalid("block_on_cluster requires the cluster partition")
            })?;
            if part.assignments().len() != orig.n() {
                return Err(Error::invalid("partition does not cover the dataset"));
            }
            Some(part.assignments())
        } else {
            None
        };
        let qi_idx: Vec<usize> = scenario
            .quasi_identifiers
            .iter()
            .map(|q| orig.schema().var_index(q).expect("validated"))
            .collect();

        let mut indexes = Vec::with_capacity(release.m());
        for rep in &release.replicates {
            if rep.n() != orig.n() {
                return Err(Error::invalid(
                    "release replicates must cover the full original record set",
                ));
            }
            let mut index: HashMap<Vec<u64>, Vec<u32>> = HashMap::new();
            let qi_cols: Vec<&[u32]> =
                qi_idx.iter().map(|&i| rep.cat_codes(i)).collect::<Result<_>>()?;
            let geo = match scenario.grid_size {
                Some(_) => Some(rep.geocode_points()?),
                None => None,
            };
            for row in 0..rep.n() {
                let mut key = Vec::with_capacity(qi_idx.len() + 3);
                if let Some(clusters) = cluster_of {
                    key.push(clusters[row] as u64);
                }
                for col in &qi_cols {
                    key.push(col[row] as u64);
                }
                if let (Some(points), Some(g)) = (geo, scenario.grid_size) {
                    geo_key(&points[row], g, &mut key)?;
                }
                index.entry(key).or_default().push(row as u32);
            }
            indexes.push(index);
        }
        Ok(RiskEvaluator {
            orig,
            scenario,
            cluster_of,
            qi_idx,
            m: release.m(),
            indexes,
        })
    }

    fn target_key(&self, target: &Target) -> Result<Vec<u64>> {
        let row = target.record_index;
        let mut key = Vec::with_capacity(self.qi_idx.len() + 3);
        if self.cluster_of.is_some() {
            key.push(target.cluster as u64);
        }
        for &i in &self.qi_idx {
            key.push(self.orig.cat_codes(i)?[row] as u64);
        }
        if let Some(g) = self.scenario.grid_size {
            // The intruder knows the target's original geocode and compares
            // it against the synthetic geocodes in the release.
            let p = &self.orig.geocode_points()?[row];
            geo_key(p, g, &mut key)?;
        }
        Ok(key)
    }

    /// Identification probabilities of every release record for one target:
    /// candidates of replicate `l` share weight `1/|candidates_l|`, averaged
    /// over replicates.
    pub fn match_probabilities(&self, target: &Target) -> Result<MatchProbabilities> {
        let key = self.target_key(target)?;
        let candidate_sets: Vec<&[u32]> = self
            .indexes
            .iter()
            .filter_map(|index| index.get(&key).map(Vec::as_slice))
            .collect();

        let product: u128 = candidate_sets.iter().map(|c| c.len() as u128).product();
        let mut weights: BTreeMap<u32, u128> = BTreeMap::new();
        for cands in &candidate_sets {
            let share = product / cands.len() as u128;
            for &row in *cands {
                *weights.entry(row).or_insert(0) += share;
            }
        }
        Ok(MatchProbabilities {
            weights,
            denom: self.m as u128 * product,
            replicates_with_candidates: candidate_sets.len(),
            m: self.m,
        })
    }
}

/// Outcome for one target in the summaries.
#[derive(Debug, Clone, Serialize)]
pub struct TargetOutcome {
    pub record_index: usize,
    /// Size of the argmax tie set; `None` when every probability is zero.
    pub c: Option<usize>,
    /// Whether the true record is in the argmax set.
    pub true_match_in_argmax: bool,
    /// The declared (unique-maximum) match, when one exists.
    pub declared_match: Option<usize>,
}

/// The three risk summaries over a target set.
#[derive(Debug, Clone, Serialize)]
pub struct RiskReport {
    pub n_targets: usize,
    /// Expected number of correctly declared matches, `sum I_i / c_i`.
    pub expected_match_risk: f64,
    /// Percentage of correct unique matches among all targets.
    pub true_match_rate: f64,
    /// Percentage of wrong matches among unique-match declarations;
    /// undefined (`None`) when no target produced a unique match.
    pub false_match_rate: Option<f64>,
    /// Number of targets with a unique maximum (`s`).
    pub unique_declarations: usize,
    pub per_target: Vec<TargetOutcome>,
}

/// Summarizes per-target probabilities into the expected match risk, true
/// match rate and false match rate. Targets whose probabilities are all
/// zero count toward `N` but contribute nothing else.
pub fn risk_summaries(targets: &[Target], probs: &[MatchProbabilities]) -> Result<RiskReport> {
    if targets.len() != probs.len() {
        return Err(Error::invalid("one probability set per target required"));
    }
    let n = targets.len();
    let mut expected = 0.0f64;
    let mut true_unique = 0usize;
    let mut false_unique = 0usize;
    let mut unique = 0usize;
    let mut per_target = Vec::with_capacity(n);

    for (target, p) in targets.iter().zip(probs) {
        let max = p.weights.values().copied().max().unwrap_or(0);
        if max == 0 {
            per_target.push(TargetOutcome {
                record_index: target.record_index,
                c: None,
                true_match_in_argmax: false,
                declared_match: None,
            });
            continue;
        }
        let argmax: Vec<u32> = p
            .weights
            .iter()
            .filter(|(_, &num)| num == max)
            .map(|(&row, _)| row)
            .collect();
        let c = argmax.len();
        let hit = argmax.contains(&(target.record_index as u32));
        if hit {
            expected += 1.0 / c as f64;
        }
        if c == 1 {
            unique += 1;
            if hit {
                true_unique += 1;
            } else {
                false_unique += 1;
            }
        }
        per_target.push(TargetOutcome {
            record_index: target.record_index,
            c: Some(c),
            true_match_in_argmax: hit,
            declared_match: if c == 1 { Some(argmax[0] as usize) } else { None },
        });
    }

    Ok(RiskReport {
        n_targets: n,
        expected_match_risk: expected,
        true_match_rate: 100.0 * true_unique as f64 / n as f64,
        false_match_rate: if unique == 0 {
            None
        } else {
            Some(100.0 * false_unique as f64 / unique as f64)
        },
        unique_declarations: unique,
        per_target,
    })
}

/// Evaluates one scenario end to end over a shared target set.
pub fn evaluate_scenario(
    orig: &Dataset,
    release: &SyntheticRelease,
    scenario: &IntruderScenario,
    partition: Option<&ClusterPartition>,
    targets: &[Target],
) -> Result<RiskReport> {
    let evaluator = RiskEvaluator::new(orig, release, scenario, partition)?;
    let probs: Vec<MatchProbabilities> = targets
        .iter()
        .map(|t| evaluator.match_probabilities(t))
        .collect::<Result<_>>()?;
    risk_summaries(targets, &probs)
}

/// One report per scenario (typically the exact-geocode row plus one row
/// per grid size), all over the same target sample.
pub fn risk_grid_sweep(
    orig: &Dataset,
    release: &SyntheticRelease,
    scenarios: &[IntruderScenario],
    partition: Option<&ClusterPartition>,
    targets: &[Target],
) -> Result<Vec<RiskReport>> {
    scenarios
        .iter()
        .map(|s| evaluate_scenario(orig, release, s, partition, targets))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Column, Schema, Variable};
    use crate::mdav::mdav_partition;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use std::sync::Arc;

    fn rng(seed: u64) -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(seed)
    }

    fn schema(d_qi: usize) -> Arc<Schema> {
        Arc::new(
            Schema::new(
                vec![
                    Variable::categorical("qi", (1..=d_qi).map(|i| format!("v{i}")).collect()),
                    Variable::geocode("geo"),
                ],
                vec!["geo".into()],
                vec!["qi".into()],
            )
            .unwrap(),
        )
    }

    fn dataset(qi: Vec<u32>, points: Vec<GeoPoint>) -> Dataset {
        let d = *qi.iter().max().unwrap() as usize;
        Dataset::new(
            schema(d.max(2)),
            vec![Column::Categorical(qi), Column::Geocode(points)],
        )
        .unwrap()
    }

    fn copies(ds: &Dataset, m: usize) -> SyntheticRelease {
        SyntheticRelease {
            replicates: vec![ds.clone(); m],
            synthesized_variables: vec!["geo".into()],
        }
    }

    fn no_geo_scenario() -> IntruderScenario {
        IntruderScenario {
            quasi_identifiers: vec!["qi".into()],
            grid_size: None,
            targets_per_cluster: 1,
            block_on_cluster: false,
        }
    }

    #[test]
    fn coarsen_hand_values() {
        assert_eq!(coarsen_geocode(&GeoPoint::new(12345.0, 678.0), 1000.0).unwrap(), (12, 0));
        assert_eq!(coarsen_geocode(&GeoPoint::new(-1.0, 5.0), 10.0).unwrap(), (-1, 0));
        assert!(coarsen_geocode(&GeoPoint::new(0.0, 0.0), 0.0).is_err());
    }

    #[test]
    fn unit_grid_bijects_integer_points() {
        let points: Vec<GeoPoint> = (0..100)
            .map(|i| GeoPoint::new((i % 13) as f64, (i % 7) as f64))
            .collect();
        let mut cells: Vec<(i64, i64)> =
            points.iter().map(|p| coarsen_geocode(p, 1.0).unwrap()).collect();
        let mut bits: Vec<(u64, u64)> = points.iter().map(GeoPoint::bits).collect();
        cells.sort_unstable();
        cells.dedup();
        bits.sort_unstable();
        bits.dedup();
        assert_eq!(cells.len(), bits.len());
    }

    #[test]
    fn hand_worked_weight_average() {
        // Replicate 1: records 0 and 1 match; replicate 2: only record 0.
        // p(0) = (1/2 + 1)/2 = 0.75, p(1) = (1/2)/2 = 0.25.
        let orig = dataset(vec![1, 1, 2], vec![GeoPoint::new(0.0, 0.0); 3]);
        let rep1 = dataset(vec![1, 1, 2], vec![GeoPoint::new(0.0, 0.0); 3]);
        let rep2 = dataset(vec![1, 2, 2], vec![GeoPoint::new(0.0, 0.0); 3]);
        let release = SyntheticRelease {
            replicates: vec![rep1, rep2],
            synthesized_variables: vec!["qi".into()],
        };
        let scenario = no_geo_scenario();
        let eval = RiskEvaluator::new(&orig, &release, &scenario, None).unwrap();
        let p = eval
            .match_probabilities(&Target { record_index: 0, cluster: 0 })
            .unwrap();
        assert_eq!(p.prob(0), 0.75);
        assert_eq!(p.prob(1), 0.25);
        assert_eq!(p.prob(2), 0.0);
        assert_eq!(p.total_mass(), (4, 4));
    }

    #[test]
    fn unique_keys_give_certain_match() {
        let orig = dataset(vec![1, 2, 3, 4], vec![GeoPoint::new(0.0, 0.0); 4]);
        let release = copies(&orig, 3);
        let scenario = no_geo_scenario();
        let eval = RiskEvaluator::new(&orig, &release, &scenario, None).unwrap();
        for i in 0..4 {
            let p = eval
                .match_probabilities(&Target { record_index: i, cluster: 0 })
                .unwrap();
            assert_eq!(p.prob(i), 1.0);
            assert_eq!(p.weights.len(), 1);
        }
    }

    #[test]
    fn no_candidates_means_zero_mass() {
        let orig = dataset(vec![1, 1], vec![GeoPoint::new(0.0, 0.0); 2]);
        let rep = dataset(vec![2, 2], vec![GeoPoint::new(0.0, 0.0); 2]);
        let release = SyntheticRelease {
            replicates: vec![rep],
            synthesized_variables: vec!["qi".into()],
        };
        let scenario = no_geo_scenario();
        let eval = RiskEvaluator::new(&orig, &release, &scenario, None).unwrap();
        let p = eval
            .match_probabilities(&Target { record_index: 0, cluster: 0 })
            .unwrap();
        assert!(p.weights.is_empty());
        assert_eq!(p.replicates_with_candidates, 0);
    }

    #[test]
    fn summaries_hand_example() {
        // T1 ties records {0, 1} with the true record 0; T2 matches record 2
        // uniquely and correctly: ER = 1/2 + 1 = 1.5, TR = 50%, FR = 0%.
        let orig = dataset(vec![1, 1, 2], vec![GeoPoint::new(0.0, 0.0); 3]);
        let release = copies(&orig, 2);
        let scenario = no_geo_scenario();
        let targets = vec![
            Target { record_index: 0, cluster: 0 },
            Target { record_index: 2, cluster: 0 },
        ];
        let report = evaluate_scenario(&orig, &release, &scenario, None, &targets).unwrap();
        assert_eq!(report.expected_match_risk, 1.5);
        assert_eq!(report.true_match_rate, 50.0);
        assert_eq!(report.false_match_rate, Some(0.0));
        assert_eq!(report.unique_declarations, 1);
        assert_eq!(report.per_target[0].c, Some(2));
        assert!(report.per_target[0].true_match_in_argmax);
        assert_eq!(report.per_target[1].declared_match, Some(2));
    }

    #[test]
    fn exact_copies_with_unique_keys_reach_full_risk() {
        let n = 6;
        let orig = dataset(
            (1..=n as u32).collect(),
            (0..n).map(|i| GeoPoint::new(i as f64, 0.0)).collect(),
        );
        let release = copies(&orig, 5);
        let scenario = IntruderScenario {
            quasi_identifiers: vec!["qi".into()],
            grid_size: Some(0.0),
            targets_per_cluster: n,
            block_on_cluster: false,
        };
        let targets: Vec<Target> = (0..n).map(|i| Target { record_index: i, cluster: 0 }).collect();
        let report = evaluate_scenario(&orig, &release, &scenario, None, &targets).unwrap();
        assert_eq!(report.expected_match_risk, n as f64);
        assert_eq!(report.true_match_rate, 100.0);
        assert_eq!(report.false_match_rate, Some(0.0));
    }

    #[test]
    fn all_zero_targets_state_undefined_outcomes() {
        let orig = dataset(vec![1, 2], vec![GeoPoint::new(0.0, 0.0); 2]);
        let rep = dataset(vec![2, 1], vec![GeoPoint::new(0.0, 0.0); 2]);
        let release = SyntheticRelease {
            replicates: vec![rep],
            synthesized_variables: vec!["qi".into()],
        };
        // Quasi-identifier disagrees everywhere once geocode cells differ.
        let scenario = IntruderScenario {
            quasi_identifiers: vec!["qi".into()],
            grid_size: None,
            targets_per_cluster: 1,
            block_on_cluster: false,
        };
        // With the swapped release, target 0 still matches record 1.
        let targets = vec![Target { record_index: 0, cluster: 0 }];
        let report = evaluate_scenario(&orig, &release, &scenario, None, &targets).unwrap();
        assert_eq!(report.per_target[0].c, Some(1));
        assert!(!report.per_target[0].true_match_in_argmax);
        assert_eq!(report.false_match_rate, Some(100.0));
        assert_eq!(report.expected_match_risk, 0.0);
    }

    #[test]
    fn sampling_targets_is_reproducible_and_complete() {
        let points: Vec<GeoPoint> = (0..40).map(|i| GeoPoint::new(i as f64, 0.0)).collect();
        let qi: Vec<u32> = (0..40).map(|i| (i % 4) as u32 + 1).collect();
        let ds = dataset(qi, points.clone());
        let part = mdav_partition(&points, 10).unwrap();

        let t1 = sample_targets(&ds, &part, 3, &mut rng(9)).unwrap();
        let t2 = sample_targets(&ds, &part, 3, &mut rng(9)).unwrap();
        assert_eq!(t1, t2);
        assert_eq!(t1.len(), 3 * part.cluster_count());

        let all = sample_targets(&ds, &part, 10, &mut rng(1)).unwrap();
        assert_eq!(all.len(), 40);
        let mut rows: Vec<usize> = all.iter().map(|t| t.record_index).collect();
        rows.sort_unstable();
        assert_eq!(rows, (0..40).collect::<Vec<_>>());

        assert!(sample_targets(&ds, &part, 11, &mut rng(2)).is_err());
    }

    #[test]
    fn blocking_never_reduces_true_record_mass() {
        let mut r = rng(13);
        for _ in 0..20 {
            let n = 24;
            let qi: Vec<u32> = (0..n).map(|_| r.random_range(1..=3)).collect();
            let points: Vec<GeoPoint> = (0..n)
                .map(|_| GeoPoint::new(r.random_range(0..40) as f64, r.random_range(0..40) as f64))
                .collect();
            let orig = dataset(qi.clone(), points.clone());
            let part = mdav_partition(&points, 8).unwrap();
            let syn_qi: Vec<u32> = qi.iter().map(|&q| if r.random::<f64>() < 0.3 { r.random_range(1..=3) } else { q }).collect();
            let release = SyntheticRelease {
                replicates: vec![dataset(syn_qi, points.clone())],
                synthesized_variables: vec!["qi".into()],
            };
            let targets = sample_targets(&orig, &part, 2, &mut r).unwrap();

            let blocked = IntruderScenario { block_on_cluster: true, ..no_geo_scenario() };
            let open = no_geo_scenario();
            let be = RiskEvaluator::new(&orig, &release, &blocked, Some(&part)).unwrap();
            let oe = RiskEvaluator::new(&orig, &release, &open, None).unwrap();
            for t in &targets {
                let pb = be.match_probabilities(t).unwrap().prob(t.record_index);
                let po = oe.match_probabilities(t).unwrap().prob(t.record_index);
                assert!(pb >= po - 1e-15, "blocked {pb} < open {po}");
            }
        }
    }

    #[test]
    fn sweep_rows_match_individual_calls() {
        let orig = dataset(vec![1, 2, 1, 2], vec![
            GeoPoint::new(0.0, 0.0),
            GeoPoint::new(10.0, 0.0),
            GeoPoint::new(0.0, 10.0),
            GeoPoint::new(10.0, 10.0),
        ]);
        let release = copies(&orig, 2);
        let targets = vec![
            Target { record_index: 0, cluster: 0 },
            Target { record_index: 3, cluster: 0 },
        ];
        let scenarios = vec![
            IntruderScenario { grid_size: Some(0.0), ..no_geo_scenario() },
            IntruderScenario { grid_size: Some(100.0), ..no_geo_scenario() },
            IntruderScenario { grid_size: Some(100.0), ..no_geo_scenario() },
        ];
        let rows = risk_grid_sweep(&orig, &release, &scenarios, None, &targets).unwrap();
        for (row, s) in rows.iter().zip(&scenarios) {
            let single = evaluate_scenario(&orig, &release, s, None, &targets).unwrap();
            assert_eq!(row.expected_match_risk, single.expected_match_risk);
            assert_eq!(row.true_match_rate, single.true_match_rate);
            assert_eq!(row.false_match_rate, single.false_match_rate);
        }
        // Identical scenarios give identical rows.
        assert_eq!(rows[1].expected_match_risk, rows[2].expected_match_risk);
        assert_eq!(rows[1].true_match_rate, rows[2].true_match_rate);
    }

    #[test]
    fn total_mass_reaches_one_only_with_full_candidate_coverage() {
        let orig = dataset(vec![1, 1, 2], vec![GeoPoint::new(0.0, 0.0); 3]);
        let rep_match = dataset(vec![1, 2, 2], vec![GeoPoint::new(0.0, 0.0); 3]);
        let rep_miss = dataset(vec![2, 2, 2], vec![GeoPoint::new(0.0, 0.0); 3]);
        let release = SyntheticRelease {
            replicates: vec![rep_match, rep_miss],
            synthesized_variables: vec!["qi".into()],
        };
        let scenario = no_geo_scenario();
        let eval = RiskEvaluator::new(&orig, &release, &scenario, None).unwrap();
        let p = eval
            .match_probabilities(&Target { record_index: 0, cluster: 0 })
            .unwrap();
        let (num, den) = p.total_mass();
        assert!(num * 2 == den, "half the mass with one empty replicate");
    }
}

//! Split search.
//!
//! Candidate splits are compared by the decrease in total risk. For
//! categorical targets the comparison is exact integer arithmetic on
//! squared class counts (score = sum_L^2/n_L + sum_R^2/n_R over a common
//! denominator), so argmax ties resolve deterministically by canonical
//! candidate rank rather than by floating-point noise. Continuous targets
//! are centered per node before scanning to keep the sum-of-squares
//! comparisons well conditioned.

use std::cmp::Ordering;

use super::{CartConfig, ColumnView, Split, SplitRule};

/// Node-level target summary used by the stopping rules.
pub(crate) struct NodeStats {
    pub n: u64,
    /// Total risk `n * impurity`: Gini risk for categorical targets,
    /// within-node sum of squares for continuous ones.
    pub risk: f64,
    parent_score_f: f64,
    cat_sum_sq: Option<u128>,
    pure_node: bool,
}

impl NodeStats {
    pub fn compute(target: &ColumnView, rows: &[u32]) -> NodeStats {
        let n = rows.len() as u64;
        match target {
            ColumnView::Categorical { codes, arity } => {
                let mut counts = vec![0u64; *arity];
                for &r in rows {
                    counts[(codes[r as usize] - 1) as usize] += 1;
                }
                let sum_sq: u128 = counts.iter().map(|&c| (c as u128) * (c as u128)).sum();
                let distinct = counts.iter().filter(|&&c| c > 0).count();
                let parent_score_f = sum_sq as f64 / n as f64;
                NodeStats {
                    n,
                    risk: n as f64 - parent_score_f,
                    parent_score_f,
                    cat_sum_sq: Some(sum_sq),
                    pure_node: distinct <= 1,
                }
            }
            ColumnView::Continuous(values) => {
                let nf = n as f64;
                let mean = rows.iter().map(|&r| values[r as usize]).sum::<f64>() / nf;
                let ss: f64 = rows
                    .iter()
                    .map(|&r| {
                        let d = values[r as usize] - mean;
                        d * d
                    })
                    .sum();
                // Scores are computed on centered values, where the parent
                // contribution (sum of deviations)^2 / n is zero.
                NodeStats {
                    n,
                    risk: ss,
                    parent_score_f: 0.0,
                    cat_sum_sq: None,
                    pure_node: ss <= 0.0,
                }
            }
        }
    }

    pub fn is_pure(&self) -> bool {
        self.pure_node
    }
}

/// Winning candidate of a node's split search.
pub(crate) struct Candidate {
    pub split: Split,
    /// Risk decrease achieved by the split; exactly 0.0 when the exact
    /// comparison says the split does not strictly improve.
    pub gain: f64,
}

#[derive(Clone, Copy, Debug)]
enum Score {
    Exact { num: u128, den: u128 },
    Float(f64),
}

fn score_cmp(a: &Score, b: &Score) -> Ordering {
    match (a, b) {
        (Score::Exact { num: n1, den: d1 }, Score::Exact { num: n2, den: d2 }) => {
            (n1 * d2).cmp(&(n2 * d1))
        }
        (Score::Float(x), Score::Float(y)) => x.partial_cmp(y).expect("finite scores"),
        _ => unreachable!("score kinds never mix within one tree"),
    }
}

/// Target data re-expressed for the node: compact class ids for categorical
/// targets, centered values for continuous ones, both aligned with `rows`.
enum TargetInfo {
    Cat {
        row_class: Vec<u32>,
        class_counts: Vec<u64>,
        sum_sq: u128,
    },
    Num {
        row_value: Vec<f64>,
    },
}

impl TargetInfo {
    fn build(target: &ColumnView, rows: &[u32]) -> TargetInfo {
        match target {
            ColumnView::Categorical { codes, arity } => {
                // Compact the codes present in this node to 0..d_node.
                let mut remap = vec![u32::MAX; *arity];
                let mut present: Vec<u32> = rows.iter().map(|&r| codes[r as usize]).collect();
                present.sort_unstable();
                present.dedup();
                for (i, &code) in present.iter().enumerate() {
                    remap[(code - 1) as usize] = i as u32;
                }
                let row_class: Vec<u32> = rows
                    .iter()
                    .map(|&r| remap[(codes[r as usize] - 1) as usize])
                    .collect();
                let mut class_counts = vec![0u64; present.len()];
                for &c in &row_class {
                    class_counts[c as usize] += 1;
                }
                let sum_sq = class_counts.iter().map(|&c| (c as u128) * (c as u128)).sum();
                TargetInfo::Cat {
                    row_class,
                    class_counts,
                    sum_sq,
                }
            }
            ColumnView::Continuous(values) => {
                let mean =
                    rows.iter().map(|&r| values[r as usize]).sum::<f64>() / rows.len() as f64;
                TargetInfo::Num {
                    row_value: rows.iter().map(|&r| values[r as usize] - mean).collect(),
                }
            }
        }
    }
}

/// Incremental left/right aggregates; items start on the right.
enum Sides {
    Cat {
        c_left: Vec<u64>,
        c_right: Vec<u64>,
        ss_left: u128,
        ss_right: u128,
        n_left: u64,
        n_right: u64,
    },
    Num {
        sum_left: f64,
        sum_right: f64,
        n_left: u64,
        n_right: u64,
    },
}

impl Sides {
    fn new(info: &TargetInfo, n: u64) -> Sides {
        match info {
            TargetInfo::Cat { class_counts, sum_sq, .. } => Sides::Cat {
                c_left: vec![0; class_counts.len()],
                c_right: class_counts.clone(),
                ss_left: 0,
                ss_right: *sum_sq,
                n_left: 0,
                n_right: n,
            },
            TargetInfo::Num { .. } => Sides::Num {
                sum_left: 0.0,
                sum_right: 0.0, // centered: node total is ~0; track exact partial
                n_left: 0,
                n_right: n,
            },
        }
    }

    /// Moves `count` items of one class (or a value mass) from right to left,
    /// or back. `to_left = false` undoes a previous move exactly.
    fn move_class(&mut self, class: u32, count: u64, to_left: bool) {
        match self {
            Sides::Cat { c_left, c_right, ss_left, ss_right, n_left, n_right } => {
                let (src_c, dst_c, src_ss, dst_ss, src_n, dst_n) = if to_left {
                    (c_right, c_left, ss_right, ss_left, n_right, n_left)
                } else {
                    (c_left, c_right, ss_left, ss_right, n_left, n_right)
                };
                let u = count as u128;
                let j = class as usize;
                // (dst + u)^2 = dst^2 + 2*dst*u + u^2
                *dst_ss += 2 * (dst_c[j] as u128) * u + u * u;
                dst_c[j] += count;
                // (src - u)^2 = src^2 - 2*src*u + u^2; add before subtracting
                // so the unsigned intermediate never underflows.
                *src_ss += u * u;
                *src_ss -= 2 * (src_c[j] as u128) * u;
                src_c[j] -= count;
                *src_n -= count;
                *dst_n += count;
            }
            Sides::Num { .. } => unreachable!("move_class on continuous target"),
        }
    }

    fn move_value(&mut self, sum: f64, count: u64, to_left: bool) {
        match self {
            Sides::Num { sum_left, sum_right, n_left, n_right } => {
                if to_left {
                    *sum_left += sum;
                    *sum_right -= sum;
                    *n_left += count;
                    *n_right -= count;
                } else {
                    *sum_left -= sum;
                    *sum_right += sum;
                    *n_left -= count;
                    *n_right += count;
                }
            }
            Sides::Cat { .. } => unreachable!("move_value on categorical target"),
        }
    }

    fn sizes(&self) -> (u64, u64) {
        match self {
            Sides::Cat { n_left, n_right, .. } => (*n_left, *n_right),
            Sides::Num { n_left, n_right, .. } => (*n_left, *n_right),
        }
    }

    fn score(&self) -> Score {
        match self {
            Sides::Cat { ss_left, ss_right, n_left, n_right, .. } => Score::Exact {
                num: ss_left * (*n_right as u128) + ss_right * (*n_left as u128),
                den: (*n_left as u128) * (*n_right as u128),
            },
            Sides::Num { sum_left, sum_right, n_left, n_right } => Score::Float(
                sum_left * sum_left / *n_left as f64 + sum_right * sum_right / *n_right as f64,
            ),
        }
    }
}

/// Per-level aggregates of a categorical predictor within the node.
struct LevelAgg {
    code: u32,
    n: u64,
    /// (compact class, count) for categorical targets.
    classes: Vec<(u32, u64)>,
    /// Sum of centered target values for continuous targets.
    sum: f64,
}

enum PendingRule {
    Subset { left_codes: Vec<u32>, arity: usize },
    Threshold(f64),
}

struct Tracker {
    best: Option<(Score, usize, u64, PendingRule, f64)>, // score, predictor, rank, rule, gain
}

impl Tracker {
    fn offer(&mut self, score: Score, predictor: usize, rank: u64, rule: impl FnOnce() -> PendingRule, gain: f64) {
        let better = match &self.best {
            None => true,
            Some((bs, bp, br, _, _)) => match score_cmp(&score, bs) {
                Ordering::Greater => true,
                Ordering::Equal => (predictor, rank) < (*bp, *br),
                Ordering::Less => false,
            },
        };
        if better {
            self.best = Some((score, predictor, rank, rule(), gain));
        }
    }
}

/// Finds the risk-minimizing split over all predictors, or `None` when no
/// candidate satisfies the `minbucket` feasibility constraint or none
/// strictly improves on the parent.
pub(crate) fn find_best_split(
    target: &ColumnView,
    predictors: &[ColumnView],
    rows: &[u32],
    stats: &NodeStats,
    cfg: &CartConfig,
) -> Option<Candidate> {
    let info = TargetInfo::build(target, rows);
    let mut tracker = Tracker { best: None };

    for (p, pred) in predictors.iter().enumerate() {
        match pred {
            ColumnView::Categorical { codes, arity } => {
                let levels = build_level_aggs(codes, *arity, rows, &info);
                if levels.len() < 2 {
                    continue;
                }
                if levels.len() <= cfg.max_exhaustive_levels {
                    exhaustive_subsets(&levels, &info, stats, cfg, p, *arity, &mut tracker);
                } else {
                    ordered_scan(levels, &info, stats, cfg, p, *arity, &mut tracker);
                }
            }
            ColumnView::Continuous(values) => {
                scan_continuous(values, rows, &info, stats, cfg, p, &mut tracker);
            }
        }
    }

    tracker.best.map(|(_, predictor, _, pending, gain)| {
        let rule = match pending {
            PendingRule::Threshold(t) => SplitRule::Threshold(t),
            PendingRule::Subset { left_codes, arity } => {
                let mut in_left = vec![false; arity];
                for code in left_codes {
                    in_left[(code - 1) as usize] = true;
                }
                SplitRule::Subset { in_left }
            }
        };
        Candidate {
            split: Split { predictor, rule },
            gain,
        }
    })
}

/// Gain in risk units. For categorical targets the strict-improvement test
/// runs on exact integers; a non-improving split reports gain 0.0 so the
/// caller's `gain > 0` filter rejects it regardless of float rounding.
fn gain_of(score: &Score, stats: &NodeStats) -> f64 {
    match score {
        Score::Exact { num, den } => {
            let parent = stats.cat_sum_sq.expect("categorical parent");
            if !exact_improves(*num, *den, parent, stats.n) {
                return 0.0;
            }
            *num as f64 / *den as f64 - stats.parent_score_f
        }
        Score::Float(s) => s - stats.parent_score_f,
    }
}

/// Exact test of `num/den > parent_sum_sq / n`.
fn exact_improves(num: u128, den: u128, parent_sum_sq: u128, n: u64) -> bool {
    num * (n as u128) > parent_sum_sq * den
}

fn build_level_aggs(codes: &[u32], arity: usize, rows: &[u32], info: &TargetInfo) -> Vec<LevelAgg> {
    let mut slot = vec![u32::MAX; arity];
    let mut levels: Vec<LevelAgg> = Vec::new();
    for (i, &r) in rows.iter().enumerate() {
        let code = codes[r as usize];
        let s = &mut slot[(code - 1) as usize];
        if *s == u32::MAX {
            *s = levels.len() as u32;
            levels.push(LevelAgg {
                code,
                n: 0,
                classes: Vec::new(),
                sum: 0.0,
            });
        }
        let agg = &mut levels[*s as usize];
        agg.n += 1;
        match info {
            TargetInfo::Cat { row_class, .. } => agg.classes.push((row_class[i], 1)),
            TargetInfo::Num { row_value } => agg.sum += row_value[i],
        }
    }
    levels.sort_by_key(|l| l.code);
    // Collapse per-row class entries into (class, count) runs.
    for agg in &mut levels {
        if !agg.classes.is_empty() {
            agg.classes.sort_unstable_by_key(|&(c, _)| c);
            let mut merged: Vec<(u32, u64)> = Vec::new();
            for (c, k) in agg.classes.drain(..) {
                match merged.last_mut() {
                    Some((lc, lk)) if *lc == c => *lk += k,
                    _ => merged.push((c, k)),
                }
            }
            agg.classes = merged;
        }
    }
    levels
}

fn move_level(sides: &mut Sides, agg: &LevelAgg, to_left: bool) {
    match sides {
        Sides::Cat { .. } => {
            for &(class, count) in &agg.classes {
                sides.move_class(class, count, to_left);
            }
        }
        Sides::Num { .. } => sides.move_value(agg.sum, agg.n, to_left),
    }
}

/// All binary partitions of the present levels, with the lowest level fixed
/// to the left side. States are visited in Gray-code order for O(1 level)
/// updates; the canonical rank used for tie-breaking is the subset bitmask
/// itself, so the winner is independent of visit order.
fn exhaustive_subsets(
    levels: &[LevelAgg],
    info: &TargetInfo,
    stats: &NodeStats,
    cfg: &CartConfig,
    predictor: usize,
    arity: usize,
    tracker: &mut Tracker,
) {
    let bits = levels.len() - 1;
    let full: u64 = (1u64 << bits) - 1;
    let n = stats.n;
    let mut sides = Sides::new(info, n);
    move_level(&mut sides, &levels[0], true);

    let offer = |sides: &Sides, mask: u64, tracker: &mut Tracker| {
        if mask == full {
            return; // right side would hold no present level
        }
        let (n_l, n_r) = sides.sizes();
        if n_l < cfg.minbucket as u64 || n_r < cfg.minbucket as u64 {
            return;
        }
        let score = sides.score();
        let gain = gain_of(&score, stats);
        tracker.offer(score, predictor, mask, || {
            let mut left_codes = vec![levels[0].code];
            for j in 0..bits {
                if mask >> j & 1 == 1 {
                    left_codes.push(levels[j + 1].code);
                }
            }
            PendingRule::Subset { left_codes, arity }
        }, gain);
    };

    let mut gray: u64 = 0;
    offer(&sides, gray, tracker);
    for step in 1u64..(1 << bits) {
        let j = step.trailing_zeros() as usize;
        gray ^= 1 << j;
        let now_left = gray >> j & 1 == 1;
        move_level(&mut sides, &levels[j + 1], now_left);
        offer(&sides, gray, tracker);
    }
}

/// Splits scanned along an ordering of the levels: by level mean for
/// continuous targets, by first principal coordinate of the
/// level-conditional class distributions for multiclass targets.
fn ordered_scan(
    levels: Vec<LevelAgg>,
    info: &TargetInfo,
    stats: &NodeStats,
    cfg: &CartConfig,
    predictor: usize,
    arity: usize,
    tracker: &mut Tracker,
) {
    let keys: Vec<f64> = match info {
        TargetInfo::Num { .. } => levels.iter().map(|l| l.sum / l.n as f64).collect(),
        TargetInfo::Cat { class_counts, .. } => pc1_scores(&levels, class_counts.len())
            .unwrap_or_else(|| levels.iter().map(|l| l.code as f64).collect()),
    };
    let mut order: Vec<usize> = (0..levels.len()).collect();
    order.sort_by(|&a, &b| {
        keys[a]
            .partial_cmp(&keys[b])
            .unwrap_or(Ordering::Equal)
            .then(levels[a].code.cmp(&levels[b].code))
    });
    let mut slots: Vec<Option<LevelAgg>> = levels.into_iter().map(Some).collect();
    let reordered: Vec<LevelAgg> = order.iter().map(|&i| slots[i].take().unwrap()).collect();

    let mut sides = Sides::new(info, stats.n);
    for i in 0..reordered.len() - 1 {
        move_level(&mut sides, &reordered[i], true);
        let (n_l, n_r) = sides.sizes();
        if n_l < cfg.minbucket as u64 || n_r < cfg.minbucket as u64 {
            continue;
        }
        let score = sides.score();
        let gain = gain_of(&score, stats);
        let prefix = &reordered[..=i];
        tracker.offer(score, predictor, i as u64, || PendingRule::Subset {
            left_codes: prefix.iter().map(|l| l.code).collect(),
            arity,
        }, gain);
    }
}

/// Projection of each level's conditional class distribution onto the first
/// principal component, computed by power iteration. Returns `None` when
/// the distributions are (numerically) identical.
fn pc1_scores(levels: &[LevelAgg], d: usize) -> Option<Vec<f64>> {
    let q = levels.len();
    // Level-conditional distributions, sparse rows.
    let rows: Vec<Vec<(u32, f64)>> = levels
        .iter()
        .map(|l| {
            l.classes
                .iter()
                .map(|&(c, k)| (c, k as f64 / l.n as f64))
                .collect()
        })
        .collect();
    let mut mean = vec![0.0f64; d];
    for row in &rows {
        for &(c, p) in row {
            mean[c as usize] += p;
        }
    }
    for m in &mut mean {
        *m /= q as f64;
    }

    let mut w = vec![1.0 / (d as f64).sqrt(); d];
    let mut proj = vec![0.0f64; q];
    for _ in 0..50 {
        let mw: f64 = mean.iter().zip(&w).map(|(m, w)| m * w).sum();
        for (v, row) in rows.iter().enumerate() {
            proj[v] = row.iter().map(|&(c, p)| p * w[c as usize]).sum::<f64>() - mw;
        }
        let mut next = vec![0.0f64; d];
        let proj_sum: f64 = proj.iter().sum();
        for (v, row) in rows.iter().enumerate() {
            for &(c, p) in row {
                next[c as usize] += proj[v] * p;
            }
        }
        for (j, m) in mean.iter().enumerate() {
            next[j] -= proj_sum * m;
        }
        let norm = next.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-12 {
            return None;
        }
        for x in &mut next {
            *x /= norm;
        }
        w = next;
    }
    // Canonical sign: the largest-magnitude component (lowest index on
    // ties) is made positive, so the ordering is reproducible.
    let mut pivot = 0;
    for j in 1..d {
        if w[j].abs() > w[pivot].abs() {
            pivot = j;
        }
    }
    let flip = if w[pivot] < 0.0 { -1.0 } else { 1.0 };
    let mw: f64 = mean.iter().zip(&w).map(|(m, w)| m * w).sum();
    Some(
        rows.iter()
            .map(|row| {
                flip * (row.iter().map(|&(c, p)| p * w[c as usize]).sum::<f64>() - mw)
            })
            .collect(),
    )
}

/// Threshold candidates at midpoints between adjacent distinct predictor
/// values, scanned in ascending order.
fn scan_continuous(
    values: &[f64],
    rows: &[u32],
    info: &TargetInfo,
    stats: &NodeStats,
    cfg: &CartConfig,
    predictor: usize,
    tracker: &mut Tracker,
) {
    let n = rows.len();
    let mut order: Vec<u32> = (0..n as u32).collect(); // positions into `rows`
    order.sort_by(|&a, &b| {
        let va = values[rows[a as usize] as usize];
        let vb = values[rows[b as usize] as usize];
        va.partial_cmp(&vb).expect("finite predictor").then(a.cmp(&b))
    });

    let mut sides = Sides::new(info, stats.n);
    for i in 0..n - 1 {
        let pos = order[i] as usize;
        match info {
            TargetInfo::Cat { row_class, .. } => sides.move_class(row_class[pos], 1, true),
            TargetInfo::Num { row_value } => sides.move_value(row_value[pos], 1, true),
        }
        let lo = values[rows[pos] as usize];
        let hi = values[rows[order[i + 1] as usize] as usize];
        if lo == hi {
            continue;
        }
        let (n_l, n_r) = sides.sizes();
        if n_l < cfg.minbucket as u64 || n_r < cfg.minbucket as u64 {
            continue;
        }
        let mut t = lo + (hi - lo) / 2.0;
        // With adjacent floats the midpoint can round up to `hi`; fall back
        // to the left value so `x <= t` still separates lo from hi.
        if t >= hi {
            t = lo;
        }
        let score = sides.score();
        let gain = gain_of(&score, stats);
        tracker.offer(score, predictor, i as u64, || PendingRule::Threshold(t), gain);
    }
}

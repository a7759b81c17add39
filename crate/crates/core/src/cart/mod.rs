//! CART synthesizers: recursive binary partitions fitted on original data,
//! with synthetic values drawn from terminal-leaf value stores via the
//! Bayesian bootstrap, and sequential (SRMI) chaining for multiple targets.
//!
//! Splitting follows the rpart conventions: Gini impurity for categorical
//! targets, within-node variance for continuous ones, and a complexity
//! parameter `cp` scaled by the root-node risk. A split is accepted only if
//! the node holds at least `minsplit` records, both children hold at least
//! `minbucket`, and the split reduces the total risk by at least
//! `cp * R(root)`.

mod split;
mod synth;

pub use synth::{
    bayesian_bootstrap_draw, bayesian_bootstrap_weights, cart_categorical_release, srmi_synthesize,
    synthesize_geocode_categorical, synthesize_geocode_continuous, synthesize_variable, GeocodeOrder,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use split::{find_best_split, NodeStats};

/// Tree-growth tuning parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CartConfig {
    /// Minimum proportional decrease of the overall lack of fit for a split
    /// to be attempted, scaled by the root-node risk.
    pub cp: f64,
    /// Minimum node size for a split to be attempted.
    pub minsplit: usize,
    /// Minimum number of records in any terminal leaf.
    pub minbucket: usize,
    /// Categorical predictors with at most this many levels present in a
    /// node are split by exhaustive subset search; above it, levels are
    /// ordered (first principal coordinate of the level-conditional target
    /// distribution for multiclass targets, level means for continuous ones)
    /// and only the ordered binary splits are scanned.
    pub max_exhaustive_levels: usize,
}

impl Default for CartConfig {
    fn default() -> Self {
        CartConfig {
            cp: 1e-5,
            minsplit: 20,
            minbucket: 7,
            max_exhaustive_levels: 12,
        }
    }
}

impl CartConfig {
    pub fn validate(&self) -> Result<()> {
        if self.minbucket < 1 {
            return Err(Error::Config("cart: minbucket must be >= 1".into()));
        }
        if !(self.cp >= 0.0) {
            return Err(Error::Config("cart: cp must be >= 0".into()));
        }
        if self.max_exhaustive_levels < 1 {
            return Err(Error::Config("cart: max_exhaustive_levels must be >= 1".into()));
        }
        Ok(())
    }
}

/// Borrowed view of one data column used for fitting and routing.
#[derive(Debug, Clone, Copy)]
pub enum ColumnView<'a> {
    /// 1-based level codes plus the declared category count.
    Categorical { codes: &'a [u32], arity: usize },
    Continuous(&'a [f64]),
}

impl ColumnView<'_> {
    pub fn len(&self) -> usize {
        match self {
            ColumnView::Categorical { codes, .. } => codes.len(),
            ColumnView::Continuous(values) => values.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Target values stored in a terminal leaf, in training-row order.
#[derive(Debug, Clone, PartialEq)]
pub enum LeafValues {
    Cat(Vec<u32>),
    Num(Vec<f64>),
}

impl LeafValues {
    pub fn len(&self) -> usize {
        match self {
            LeafValues::Cat(v) => v.len(),
            LeafValues::Num(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Routing rule of an internal node.
#[derive(Debug, Clone, PartialEq)]
pub enum SplitRule {
    /// Go left if the record's 1-based code is flagged. Levels that never
    /// reached the node during training are unflagged and route right.
    Subset { in_left: Vec<bool> },
    /// Go left if the value is `<=` the threshold (a midpoint between two
    /// adjacent observed values).
    Threshold(f64),
}

/// A split: predictor column index plus rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub predictor: usize,
    pub rule: SplitRule,
}

#[derive(Debug, Clone)]
enum Node {
    Internal { split: Split, n: u32, left: u32, right: u32 },
    Leaf { leaf: u32 },
}

/// Fitted binary recursive partition with leaf value stores.
#[derive(Debug, Clone)]
pub struct CartTree {
    nodes: Vec<Node>,
    leaves: Vec<LeafValues>,
    training_leaves: Vec<u32>,
    minbucket: usize,
}

impl CartTree {
    pub fn leaf_count(&self) -> usize {
        self.leaves.len()
    }

    pub fn leaf_values(&self, leaf: u32) -> &LeafValues {
        &self.leaves[leaf as usize]
    }

    /// Leaf id each training record was routed to during fitting.
    pub fn training_leaves(&self) -> &[u32] {
        &self.training_leaves
    }

    pub fn minbucket(&self) -> usize {
        self.minbucket
    }

    /// Routes one record through the tree. The predictor views must be in
    /// the same order as at fitting time but may hold different (for
    /// example, synthesized) values.
    pub fn leaf_for_row(&self, predictors: &[ColumnView], row: usize) -> u32 {
        let mut node = 0usize;
        loop {
            match &self.nodes[node] {
                Node::Leaf { leaf } => return *leaf,
                Node::Internal { split, left, right, .. } => {
                    let goes_left = match (&split.rule, &predictors[split.predictor]) {
                        (SplitRule::Subset { in_left }, ColumnView::Categorical { codes, .. }) => {
                            in_left[(codes[row] - 1) as usize]
                        }
                        (SplitRule::Threshold(t), ColumnView::Continuous(values)) => {
                            values[row] <= *t
                        }
                        _ => unreachable!("rule/predictor kind mismatch"),
                    };
                    node = if goes_left { *left as usize } else { *right as usize };
                }
            }
        }
    }

    /// Root split, if the tree has one.
    pub fn root_split(&self) -> Option<&Split> {
        match &self.nodes[0] {
            Node::Internal { split, .. } => Some(split),
            Node::Leaf { .. } => None,
        }
    }

    /// Indented text dump for audit. `names[i]` labels predictor column `i`.
    pub fn dump_text(&self, names: &[String]) -> String {
        let mut out = String::new();
        self.dump_node(0, 0, names, &mut out);
        out
    }

    fn dump_node(&self, node: usize, depth: usize, names: &[String], out: &mut String) {
        let pad = "  ".repeat(depth);
        match &self.nodes[node] {
            Node::Leaf { leaf } => {
                out.push_str(&format!(
                    "{pad}leaf {} (n={})\n",
                    leaf,
                    self.leaves[*leaf as usize].len()
                ));
            }
            Node::Internal { split, n, left, right } => {
                let name = names
                    .get(split.predictor)
                    .cloned()
                    .unwrap_or_else(|| format!("x{}", split.predictor));
                let rule = match &split.rule {
                    SplitRule::Threshold(t) => format!("{name} <= {t}"),
                    SplitRule::Subset { in_left } => {
                        let levels: Vec<String> = in_left
                            .iter()
                            .enumerate()
                            .filter(|(_, &b)| b)
                            .map(|(i, _)| (i + 1).to_string())
                            .collect();
                        format!("{name} in {{{}}}", levels.join(","))
                    }
                };
                out.push_str(&format!("{pad}split {rule} (n={n})\n"));
                self.dump_node(*left as usize, depth + 1, names, out);
                self.dump_node(*right as usize, depth + 1, names, out);
            }
        }
    }

    /// `record_index,leaf_id` CSV of the training-leaf membership.
    pub fn leaf_membership_csv(&self) -> String {
        let mut out = String::from("record_index,leaf_id\n");
        for (i, leaf) in self.training_leaves.iter().enumerate() {
            out.push_str(&format!("{i},{leaf}\n"));
        }
        out
    }
}

/// Gini impurity `1 - sum_c (count_c / total)^2`.
pub fn gini_impurity(counts: &[u64]) -> Result<f64> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::invalid("gini_impurity of an empty count vector"));
    }
    let t = total as f64;
    let sum_sq: f64 = counts.iter().map(|&c| (c as f64 / t).powi(2)).sum();
    Ok(1.0 - sum_sq)
}

/// Population variance (mean squared deviation from the mean).
pub fn variance_impurity(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::invalid("variance_impurity of an empty value list"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    Ok(values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n)
}

/// Fits a tree of `target` on `predictors` by greedy recursive splitting.
///
/// With no usable predictor, or when every candidate split is blocked by
/// the stopping rules, the root itself is the only leaf.
pub fn fit_tree(target: &ColumnView, predictors: &[ColumnView], cfg: &CartConfig) -> Result<CartTree> {
    cfg.validate()?;
    let n = target.len();
    if n == 0 {
        return Err(Error::invalid("fit_tree on an empty dataset"));
    }
    for (i, p) in predictors.iter().enumerate() {
        if p.len() != n {
            return Err(Error::invalid(format!(
                "predictor {i} has {} rows, target has {n}",
                p.len()
            )));
        }
    }

    let rows: Vec<u32> = (0..n as u32).collect();
    let root_stats = NodeStats::compute(target, &rows);
    // rpart scaling: a split must reduce total risk by cp * R(root).
    let min_gain = cfg.cp * root_stats.risk;

    let mut tree = CartTree {
        nodes: Vec::new(),
        leaves: Vec::new(),
        training_leaves: vec![0; n],
        minbucket: cfg.minbucket,
    };
    grow(target, predictors, cfg, min_gain, rows, &mut tree);

    debug_assert!(tree.leaves.iter().all(|l| l.len() >= cfg.minbucket || n < cfg.minbucket));
    Ok(tree)
}

/// Recursively grows the subtree for `rows`, returning its node index.
fn grow(
    target: &ColumnView,
    predictors: &[ColumnView],
    cfg: &CartConfig,
    min_gain: f64,
    rows: Vec<u32>,
    tree: &mut CartTree,
) -> u32 {
    let node_idx = tree.nodes.len() as u32;
    tree.nodes.push(Node::Leaf { leaf: u32::MAX }); // placeholder

    let stats = NodeStats::compute(target, &rows);
    let accepted = if rows.len() >= cfg.minsplit && !stats.is_pure() {
        find_best_split(target, predictors, &rows, &stats, cfg).filter(|best| {
            best.gain > 0.0 && best.gain >= min_gain
        })
    } else {
        None
    };

    match accepted {
        Some(best) => {
            let (left_rows, right_rows) = partition_rows(&best.split, predictors, &rows);
            debug_assert!(left_rows.len() >= cfg.minbucket && right_rows.len() >= cfg.minbucket);
            let n = rows.len() as u32;
            drop(rows);
            let left = grow(target, predictors, cfg, min_gain, left_rows, tree);
            let right = grow(target, predictors, cfg, min_gain, right_rows, tree);
            tree.nodes[node_idx as usize] = Node::Internal {
                split: best.split,
                n,
                left,
                right,
            };
        }
        None => {
            let leaf = tree.leaves.len() as u32;
            let values = match target {
                ColumnView::Categorical { codes, .. } => {
                    LeafValues::Cat(rows.iter().map(|&r| codes[r as usize]).collect())
                }
                ColumnView::Continuous(values) => {
                    LeafValues::Num(rows.iter().map(|&r| values[r as usize]).collect())
                }
            };
            for &r in &rows {
                tree.training_leaves[r as usize] = leaf;
            }
            tree.leaves.push(values);
            tree.nodes[node_idx as usize] = Node::Leaf { leaf };
        }
    }
    node_idx
}

/// Splits `rows` by the rule, preserving relative (ascending) order.
fn partition_rows(split: &Split, predictors: &[ColumnView], rows: &[u32]) -> (Vec<u32>, Vec<u32>) {
    let mut left = Vec::new();
    let mut right = Vec::new();
    for &r in rows {
        let goes_left = match (&split.rule, &predictors[split.predictor]) {
            (SplitRule::Subset { in_left }, ColumnView::Categorical { codes, .. }) => {
                in_left[(codes[r as usize] - 1) as usize]
            }
            (SplitRule::Threshold(t), ColumnView::Continuous(values)) => values[r as usize] <= *t,
            _ => unreachable!("rule/predictor kind mismatch"),
        };
        if goes_left {
            left.push(r);
        } else {
            right.push(r);
        }
    }
    (left, right)
}

//! Drawing synthetic values from fitted trees.
//!
//! Replacement values come from the terminal-leaf value stores via the
//! Bayesian bootstrap (Rubin, 1981): one Dirichlet(1,..,1) weight vector per
//! leaf and replicate, realized as the gaps of sorted uniforms. Multiple
//! targets are chained sequentially (SRMI): each tree is fitted once on
//! original values and reused across replicates, while records are routed
//! with the previously synthesized values of earlier targets.

use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{fit_tree, CartConfig, CartTree, ColumnView, LeafValues};
use crate::data::{
    concat_geocode_as_categorical, decode_geocode_column, Column, Dataset, GeoPoint,
    SyntheticRelease,
};
use crate::error::{Error, Result};

/// Dirichlet(1,...,1) weights over `n` support points: the gaps between
/// `n-1` sorted uniforms (and the interval ends).
pub fn bayesian_bootstrap_weights(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    assert!(n >= 1, "weights over an empty support");
    let mut cuts: Vec<f64> = (0..n - 1).map(|_| rng.random::<f64>()).collect();
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut weights = Vec::with_capacity(n);
    let mut prev = 0.0;
    for &c in &cuts {
        weights.push(c - prev);
        prev = c;
    }
    weights.push(1.0 - prev);
    weights
}

/// Weighted sampler over leaf positions for one (leaf, replicate) pair.
struct LeafSampler {
    cum: Vec<f64>,
}

impl LeafSampler {
    fn new(n: usize, rng: &mut impl Rng) -> LeafSampler {
        let weights = bayesian_bootstrap_weights(n, rng);
        let mut cum = Vec::with_capacity(n);
        let mut acc = 0.0;
        for w in weights {
            acc += w;
            cum.push(acc);
        }
        LeafSampler { cum }
    }

    fn draw(&self, rng: &mut impl Rng) -> usize {
        let u: f64 = rng.random();
        let idx = self.cum.partition_point(|&c| c <= u);
        idx.min(self.cum.len() - 1)
    }
}

/// Draws `count` values from a leaf store under one fresh Bayesian-bootstrap
/// weighting. Drawn values are always a subset of the leaf values.
pub fn bayesian_bootstrap_draw<T: Copy>(
    values: &[T],
    count: usize,
    rng: &mut impl Rng,
) -> Result<Vec<T>> {
    if values.is_empty() {
        return Err(Error::invalid("bayesian_bootstrap_draw from an empty leaf"));
    }
    let sampler = LeafSampler::new(values.len(), rng);
    Ok((0..count).map(|_| values[sampler.draw(rng)]).collect())
}

fn cat_view<'a>(ds: &'a Dataset, idx: usize) -> Result<ColumnView<'a>> {
    match ds.column(idx) {
        Column::Categorical(codes) => Ok(ColumnView::Categorical {
            codes,
            arity: ds.schema().variables()[idx].arity().expect("categorical arity"),
        }),
        Column::Geocode(_) => Err(Error::invalid(format!(
            "variable `{}` is a geocode; encode it before using it in a tree",
            ds.schema().variables()[idx].name
        ))),
    }
}

fn resolve(ds: &Dataset, name: &str) -> Result<usize> {
    ds.schema()
        .var_index(name)
        .ok_or_else(|| Error::invalid(format!("unknown variable `{name}`")))
}

/// Groups rows by leaf id; rows stay in ascending order inside each group.
fn rows_by_leaf(leaves: &[u32], leaf_count: usize) -> Vec<Vec<u32>> {
    let mut groups = vec![Vec::new(); leaf_count];
    for (row, &leaf) in leaves.iter().enumerate() {
        groups[leaf as usize].push(row as u32);
    }
    groups
}

/// One replicate's replacement column: per occupied leaf (ascending id) a
/// fresh weight vector, then one draw per record in row order.
fn draw_replacement_cat(
    tree: &CartTree,
    leaf_rows: &[Vec<u32>],
    n: usize,
    rng: &mut impl Rng,
) -> Vec<u32> {
    let mut out = vec![0u32; n];
    for (leaf, rows) in leaf_rows.iter().enumerate() {
        if rows.is_empty() {
            continue;
        }
        let values = match tree.leaf_values(leaf as u32) {
            LeafValues::Cat(v) => v,
            LeafValues::Num(_) => unreachable!("categorical synthesis on numeric tree"),
        };
        let sampler = LeafSampler::new(values.len(), rng);
        for &r in rows {
            out[r as usize] = values[sampler.draw(rng)];
        }
    }
    out
}

fn draw_replacement_num(
    tree: &CartTree,
    leaf_rows: &[Vec<u32>],
    n: usize,
    rng: &mut impl Rng,
) -> Vec<f64> {
    let mut out = vec![0.0f64; n];
    for (leaf, rows) in leaf_rows.iter().enumerate() {
        if rows.is_empty() {
            continue;
        }
        let values = match tree.leaf_values(leaf as u32) {
            LeafValues::Num(v) => v,
            LeafValues::Cat(_) => unreachable!("numeric synthesis on categorical tree"),
        };
        let sampler = LeafSampler::new(values.len(), rng);
        for &r in rows {
            out[r as usize] = values[sampler.draw(rng)];
        }
    }
    out
}

/// Fits one tree of `target` on `predictors` and draws `m` replacement
/// columns, each under replicate-specific Bayesian-bootstrap weightings.
pub fn synthesize_variable(
    ds: &Dataset,
    target: &str,
    predictors: &[String],
    cfg: &CartConfig,
    m: usize,
    rng: &mut impl Rng,
) -> Result<Vec<Column>> {
    let target_idx = resolve(ds, target)?;
    let mut pred_views = Vec::with_capacity(predictors.len());
    for p in predictors {
        let idx = resolve(ds, p)?;
        if idx == target_idx {
            return Err(Error::invalid(format!("`{p}` is both target and predictor")));
        }
        pred_views.push(cat_view(ds, idx)?);
    }
    let target_view = cat_view(ds, target_idx)?;
    let tree = fit_tree(&target_view, &pred_views, cfg)?;
    let leaf_rows = rows_by_leaf(tree.training_leaves(), tree.leaf_count());

    let n = ds.n();
    Ok((0..m)
        .map(|_| Column::Categorical(draw_replacement_cat(&tree, &leaf_rows, n, rng)))
        .collect())
}

/// Sequentially synthesizes `ordered_targets` on a fully categorical
/// dataset. The tree for target `l` is fitted once on original values of
/// the unaltered variables plus targets `1..l`; during replication, records
/// are routed with the replicate's already-synthesized values.
pub fn srmi_synthesize(
    ds: &Dataset,
    ordered_targets: &[String],
    cfg: &CartConfig,
    m: usize,
    rng: &mut impl Rng,
) -> Result<SyntheticRelease> {
    if ordered_targets.is_empty() {
        return Err(Error::invalid("srmi_synthesize with no targets"));
    }
    let mut target_idx = Vec::with_capacity(ordered_targets.len());
    for t in ordered_targets {
        let idx = resolve(ds, t)?;
        if target_idx.contains(&idx) {
            return Err(Error::invalid(format!("duplicate synthesis target `{t}`")));
        }
        target_idx.push(idx);
    }
    for (i, var) in ds.schema().variables().iter().enumerate() {
        if var.is_geocode() && !target_idx.contains(&i) {
            return Err(Error::invalid(
                "dataset still contains a raw geocode column; encode it first",
            ));
        }
    }

    let unaltered: Vec<usize> = (0..ds.schema().variables().len())
        .filter(|i| !target_idx.contains(i))
        .collect();

    // Predictor column order for target l: unaltered variables (ascending),
    // then earlier targets in synthesis order.
    let pred_cols: Vec<Vec<usize>> = (0..target_idx.len())
        .map(|l| {
            let mut cols = unaltered.clone();
            cols.extend_from_slice(&target_idx[..l]);
            cols
        })
        .collect();

    let mut trees = Vec::with_capacity(target_idx.len());
    for (l, &t_idx) in target_idx.iter().enumerate() {
        let views: Vec<ColumnView> = pred_cols[l]
            .iter()
            .map(|&c| cat_view(ds, c))
            .collect::<Result<_>>()?;
        let target_view = cat_view(ds, t_idx)?;
        trees.push(fit_tree(&target_view, &views, cfg)?);
    }

    let n = ds.n();
    let mut replicates = Vec::with_capacity(m);
    for _ in 0..m {
        let mut synthesized: HashMap<usize, Vec<u32>> = HashMap::new();
        for (l, &t_idx) in target_idx.iter().enumerate() {
            let views: Vec<ColumnView> = pred_cols[l]
                .iter()
                .map(|&c| match synthesized.get(&c) {
                    Some(codes) => Ok(ColumnView::Categorical {
                        codes,
                        arity: ds.schema().variables()[c].arity().expect("categorical"),
                    }),
                    None => cat_view(ds, c),
                })
                .collect::<Result<_>>()?;
            let tree = &trees[l];
            let routed: Vec<u32> = (0..n).map(|row| tree.leaf_for_row(&views, row)).collect();
            let leaf_rows = rows_by_leaf(&routed, tree.leaf_count());
            synthesized.insert(t_idx, draw_replacement_cat(tree, &leaf_rows, n, rng));
        }

        let columns: Vec<Column> = ds
            .columns()
            .iter()
            .enumerate()
            .map(|(i, col)| match synthesized.remove(&i) {
                Some(codes) => Column::Categorical(codes),
                None => col.clone(),
            })
            .collect();
        replicates.push(Dataset::with_source_rows(
            ds.schema_arc(),
            columns,
            ds.source_rows().to_vec(),
        )?);
    }

    Ok(SyntheticRelease {
        replicates,
        synthesized_variables: ordered_targets.to_vec(),
    })
}

/// Categorical-geocode synthesis: dictionary-encode the geocode, synthesize
/// the encoded variable from `predictors`, decode back to points. Synthetic
/// geocodes are therefore always a subset of the original support.
pub fn synthesize_geocode_categorical(
    ds: &Dataset,
    predictors: &[String],
    cfg: &CartConfig,
    m: usize,
    rng: &mut impl Rng,
) -> Result<SyntheticRelease> {
    let geo_idx = ds
        .schema()
        .geocode_index()
        .ok_or_else(|| Error::invalid("dataset has no geocode variable"))?;
    let geo_name = ds.schema().variables()[geo_idx].name.clone();
    let (encoded, codebook) = concat_geocode_as_categorical(ds)?;
    let columns = synthesize_variable(&encoded, &geo_name, predictors, cfg, m, rng)?;

    let schema = ds.schema_arc();
    let mut replicates = Vec::with_capacity(m);
    for col in columns {
        let encoded_rep = encoded.with_column(geo_idx, col)?;
        replicates.push(decode_geocode_column(
            &encoded_rep,
            &codebook,
            Arc::clone(&schema),
            &geo_name,
        )?);
    }
    Ok(SyntheticRelease {
        replicates,
        synthesized_variables: vec![geo_name],
    })
}

/// SRMI over an arbitrary ordered target list (which may include the
/// geocode variable) with the geocode handled as a dictionary-encoded
/// categorical variable throughout.
pub fn cart_categorical_release(
    ds: &Dataset,
    ordered_targets: &[String],
    cfg: &CartConfig,
    m: usize,
    rng: &mut impl Rng,
) -> Result<SyntheticRelease> {
    let geo_idx = ds
        .schema()
        .geocode_index()
        .ok_or_else(|| Error::invalid("dataset has no geocode variable"))?;
    let geo_name = ds.schema().variables()[geo_idx].name.clone();
    let (encoded, codebook) = concat_geocode_as_categorical(ds)?;
    let release = srmi_synthesize(&encoded, ordered_targets, cfg, m, rng)?;

    let schema = ds.schema_arc();
    let mut replicates = Vec::with_capacity(m);
    for rep in release.replicates {
        replicates.push(decode_geocode_column(
            &rep,
            &codebook,
            Arc::clone(&schema),
            &geo_name,
        )?);
    }
    Ok(SyntheticRelease {
        replicates,
        synthesized_variables: ordered_targets.to_vec(),
    })
}

/// Which coordinate the continuous synthesizer draws first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GeocodeOrder {
    /// East coordinate first, then north conditional on the synthesized east.
    #[default]
    XThenY,
    YThenX,
}

/// Continuous-geocode synthesis: two chained regression trees. The first
/// coordinate is synthesized from the categorical predictors; the second
/// tree is fitted with the original first coordinate as an extra predictor
/// and routed with the synthesized one, so coordinate pairs can be novel
/// even though each marginal stays within the observed values.
pub fn synthesize_geocode_continuous(
    ds: &Dataset,
    predictors: &[String],
    cfg: &CartConfig,
    m: usize,
    order: GeocodeOrder,
    rng: &mut impl Rng,
) -> Result<SyntheticRelease> {
    let geo_idx = ds
        .schema()
        .geocode_index()
        .ok_or_else(|| Error::invalid("dataset has no geocode variable"))?;
    let points = ds.geocode_points()?;
    let xs: Vec<f64> = points.iter().map(|p| p.x).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.y).collect();
    let (first, second) = match order {
        GeocodeOrder::XThenY => (&xs, &ys),
        GeocodeOrder::YThenX => (&ys, &xs),
    };

    let mut base_views = Vec::with_capacity(predictors.len());
    for p in predictors {
        base_views.push(cat_view(ds, resolve(ds, p)?)?);
    }

    let tree_first = fit_tree(&ColumnView::Continuous(first), &base_views, cfg)?;
    let mut second_pred_views = base_views.clone();
    second_pred_views.push(ColumnView::Continuous(first));
    let tree_second = fit_tree(&ColumnView::Continuous(second), &second_pred_views, cfg)?;

    let n = ds.n();
    let first_leaf_rows = rows_by_leaf(tree_first.training_leaves(), tree_first.leaf_count());

    let mut replicates = Vec::with_capacity(m);
    for _ in 0..m {
        let first_star = draw_replacement_num(&tree_first, &first_leaf_rows, n, rng);

        let mut views = base_views.clone();
        views.push(ColumnView::Continuous(&first_star));
        let routed: Vec<u32> = (0..n)
            .map(|row| tree_second.leaf_for_row(&views, row))
            .collect();
        let second_leaf_rows = rows_by_leaf(&routed, tree_second.leaf_count());
        let second_star = draw_replacement_num(&tree_second, &second_leaf_rows, n, rng);

        let geo: Vec<GeoPoint> = match order {
            GeocodeOrder::XThenY => first_star
                .iter()
                .zip(&second_star)
                .map(|(&x, &y)| GeoPoint::new(x, y))
                .collect(),
            GeocodeOrder::YThenX => first_star
                .iter()
                .zip(&second_star)
                .map(|(&y, &x)| GeoPoint::new(x, y))
                .collect(),
        };
        replicates.push(ds.with_column(geo_idx, Column::Geocode(geo))?);
    }

    let geo_name = ds.schema().variables()[geo_idx].name.clone();
    Ok(SyntheticRelease {
        replicates,
        synthesized_variables: vec![geo_name],
    })
}

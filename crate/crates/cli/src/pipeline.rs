//! The end-to-end pipeline and its four independently runnable stages.
//!
//! Every stage reads its inputs from the prior stage's on-disk artifacts,
//! so `pipeline` is literally the four stages chained and produces
//! byte-identical files. All randomness flows through streams derived from
//! the master seed and a label path, which makes outputs independent of
//! worker count and scheduling.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use geosynth::aggregation::aggregate_geocodes;
use geosynth::cart::{
    cart_categorical_release, synthesize_geocode_continuous,
};
use geosynth::data::{concat_geocode_as_categorical, decode_geocode_column};
use geosynth::dpmpm::{self, diag, ChainTrace};
use geosynth::error::{Error, Result};
use geosynth::mdav::{mdav_partition, reassemble, split_dataset, ClusterPartition};
use geosynth::risk::{risk_grid_sweep, sample_targets, IntruderScenario, RiskReport, Target};
use geosynth::seed::{derive_rng, derive_seed};
use geosynth::utility::{
    assign_regions, average_tables, bounding_box_area, default_r_grid, interaction_tables,
    l_curves, mean_shares, region_shares, ul_measure, LCurves, NamedLCurves, RegionMap,
    ShareComparison, UlResult, UtilityReport,
};
use geosynth::{Dataset, Schema, SyntheticRelease};

use crate::config::{OutcomeSpec, PipelineConfig, Synthesizer};

// Label tags for deriving independent RNG streams.
const TAG_SYNTH: u64 = 1;
const TAG_CHAIN: u64 = 2;
const TAG_RISK: u64 = 3;

fn require_artifact(path: &Path, produced_by: &str) -> Result<()> {
    if !path.exists() {
        return Err(Error::Config(format!(
            "missing artifact {}; run `geosynth {produced_by}` first",
            path.display()
        )));
    }
    Ok(())
}

pub fn partition_path(cfg: &PipelineConfig) -> PathBuf {
    cfg.output_dir.join("partition.csv")
}

pub fn synthetic_path(cfg: &PipelineConfig, replicate: usize) -> PathBuf {
    cfg.output_dir.join(format!("synthetic_{}.csv", replicate + 1))
}

fn load_schema(cfg: &PipelineConfig) -> Result<Arc<Schema>> {
    Ok(Arc::new(Schema::load(&cfg.schema)?))
}

/// The dataset every synthesis/risk stage works on: the input file with the
/// configured aggregation (if any) already applied. With aggregation, the
/// coarsened file is what gets protected and released, so it also defines
/// the target geocodes for the risk evaluation.
fn load_working(cfg: &PipelineConfig) -> Result<(Arc<Schema>, Dataset)> {
    let schema = load_schema(cfg)?;
    let ds = Dataset::load_csv(&cfg.input, Arc::clone(&schema))?;
    let ds = match cfg.aggregation {
        Some(g) => aggregate_geocodes(&ds, g)?,
        None => ds,
    };
    Ok((schema, ds))
}

/// The untouched input, used as the reference side of the utility
/// evaluation.
fn load_original(cfg: &PipelineConfig) -> Result<(Arc<Schema>, Dataset)> {
    let schema = load_schema(cfg)?;
    let ds = Dataset::load_csv(&cfg.input, Arc::clone(&schema))?;
    Ok((schema, ds))
}

fn load_release(cfg: &PipelineConfig, schema: &Arc<Schema>) -> Result<SyntheticRelease> {
    let mut replicates = Vec::with_capacity(cfg.m);
    for j in 0..cfg.m {
        let path = synthetic_path(cfg, j);
        require_artifact(&path, "synthesize")?;
        replicates.push(Dataset::load_csv(&path, Arc::clone(schema))?);
    }
    let synthesized_variables = cfg.targets(schema)?;
    Ok(SyntheticRelease {
        replicates,
        synthesized_variables,
    })
}

fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    if threads == 0 {
        f()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("thread pool")
            .install(f)
    }
}

/// Stage 1: MDAV partition of the working dataset, written as
/// `partition.csv`.
pub fn stage_cluster(cfg: &PipelineConfig) -> Result<ClusterPartition> {
    let (_, working) = load_working(cfg)?;
    let part = mdav_partition(working.geocode_points()?, cfg.mdav_k)?;
    fs::create_dir_all(&cfg.output_dir)?;
    part.save_csv(partition_path(cfg))?;
    Ok(part)
}

/// Per-cluster sampler diagnostics (DPMPM only).
#[derive(Debug, Clone, Serialize)]
pub struct ClusterDiagnostics {
    pub cluster: u32,
    pub geweke_z: Option<f64>,
    pub hw_pass: Option<bool>,
    pub hw_start_index: Option<usize>,
    pub acf1: Option<f64>,
    pub escalated: bool,
    pub occupied_mean: f64,
    #[serde(skip)]
    pub trace: ChainTrace,
}

fn dpmpm_diagnostics(cluster: u32, trace: &ChainTrace, escalated: bool) -> ClusterDiagnostics {
    let alpha = &trace.alpha_draws;
    let occupied_mean = if trace.occupied_classes.is_empty() {
        0.0
    } else {
        trace.occupied_classes.iter().sum::<usize>() as f64 / trace.occupied_classes.len() as f64
    };
    let hw = diag::heidelberger_welch(alpha).ok();
    ClusterDiagnostics {
        cluster,
        geweke_z: diag::geweke_z(alpha, 0.1, 0.5).ok(),
        hw_pass: hw.map(|r| r.pass),
        hw_start_index: hw.map(|r| r.start_index),
        acf1: diag::autocorrelation(alpha, 1).ok().map(|a| a[1]),
        escalated,
        occupied_mean,
        trace: trace.clone(),
    }
}

fn synthesize_one_cluster(
    cfg: &PipelineConfig,
    cluster_ds: &Dataset,
    cluster: u32,
    targets: &[String],
) -> Result<(SyntheticRelease, Option<ClusterDiagnostics>)> {
    let stage = |e: Error| Error::Invalid(format!("cluster {cluster}, stage synthesize: {e}"));
    match cfg.synthesizer {
        Synthesizer::CartCategorical => {
            let mut rng = derive_rng(cfg.seed, &[TAG_SYNTH, cluster as u64]);
            let release =
                cart_categorical_release(cluster_ds, targets, &cfg.cart.params, cfg.m, &mut rng)
                    .map_err(stage)?;
            Ok((release, None))
        }
        Synthesizer::CartContinuous => {
            let geo_idx = cluster_ds
                .schema()
                .geocode_index()
                .ok_or_else(|| stage(Error::Invalid("no geocode variable".into())))?;
            let geo_name = &cluster_ds.schema().variables()[geo_idx].name;
            if targets != [geo_name.clone()] {
                return Err(Error::Config(
                    "the continuous synthesizer only synthesizes the geocode; set synthesis_targets to the geocode variable"
                        .into(),
                ));
            }
            let predictors: Vec<String> = cluster_ds
                .schema()
                .variables()
                .iter()
                .filter(|v| !v.is_geocode())
                .map(|v| v.name.clone())
                .collect();
            let mut rng = derive_rng(cfg.seed, &[TAG_SYNTH, cluster as u64]);
            let release = synthesize_geocode_continuous(
                cluster_ds,
                &predictors,
                &cfg.cart.params,
                cfg.m,
                cfg.cart.geocode_order,
                &mut rng,
            )
            .map_err(stage)?;
            Ok((release, None))
        }
        Synthesizer::Dpmpm => {
            let geo_idx = cluster_ds.schema().geocode_index();
            let (encoded, codebook) = match geo_idx {
                Some(_) => concat_geocode_as_categorical(cluster_ds).map_err(stage)?,
                None => return Err(stage(Error::Invalid("no geocode variable".into()))),
            };
            let mut chain_rng = derive_rng(cfg.seed, &[TAG_CHAIN, cluster as u64]);
            let (snapshots, trace, escalated) =
                dpmpm::run_chain_with_escalation(&encoded, &cfg.dpmpm, &mut chain_rng)
                    .map_err(stage)?;
            let mut syn_rng = derive_rng(cfg.seed, &[TAG_SYNTH, cluster as u64]);
            let release_enc = dpmpm::synthesize(&encoded, targets, &snapshots, cfg.m, &mut syn_rng)
                .map_err(stage)?;

            let geo_name = cluster_ds.schema().variables()[geo_idx.unwrap()].name.clone();
            let schema = cluster_ds.schema_arc();
            let mut replicates = Vec::with_capacity(cfg.m);
            for rep in release_enc.replicates {
                replicates.push(
                    decode_geocode_column(&rep, &codebook, Arc::clone(&schema), &geo_name)
                        .map_err(stage)?,
                );
            }
            let release = SyntheticRelease {
                replicates,
                synthesized_variables: targets.to_vec(),
            };
            Ok((release, Some(dpmpm_diagnostics(cluster, &trace, escalated))))
        }
    }
}

/// Stage 2: per-cluster synthesis (parallel over clusters), reassembly into
/// `m` full releases, manifest and diagnostics emission.
pub fn stage_synthesize(cfg: &PipelineConfig) -> Result<SyntheticRelease> {
    let (schema, working) = load_working(cfg)?;
    let part_path = partition_path(cfg);
    require_artifact(&part_path, "cluster")?;
    let part = ClusterPartition::load_csv(&part_path, cfg.mdav_k)?;
    if part.n() != working.n() {
        return Err(Error::Config(format!(
            "partition covers {} records, input has {}; rerun `geosynth cluster`",
            part.n(),
            working.n()
        )));
    }
    let targets = cfg.targets(&schema)?;
    let splits = split_dataset(&working, &part)?;

    let results: Vec<(SyntheticRelease, Option<ClusterDiagnostics>)> =
        with_pool(cfg.threads, || {
            splits
                .par_iter()
                .enumerate()
                .map(|(cid, cluster_ds)| {
                    synthesize_one_cluster(cfg, cluster_ds, cid as u32, &targets)
                })
                .collect::<Result<Vec<_>>>()
        })?;

    let mut replicates = Vec::with_capacity(cfg.m);
    for j in 0..cfg.m {
        let parts: Vec<Dataset> = results
            .iter()
            .map(|(release, _)| release.replicates[j].clone())
            .collect();
        replicates.push(reassemble(&parts)?);
    }

    fs::create_dir_all(&cfg.output_dir)?;
    for (j, rep) in replicates.iter().enumerate() {
        rep.save_csv(synthetic_path(cfg, j))?;
    }

    let diagnostics: Vec<&ClusterDiagnostics> =
        results.iter().filter_map(|(_, d)| d.as_ref()).collect();
    if !diagnostics.is_empty() {
        let traces_dir = cfg.output_dir.join("traces");
        fs::create_dir_all(&traces_dir)?;
        for d in &diagnostics {
            fs::write(
                traces_dir.join(format!("cluster_{}.csv", d.cluster)),
                d.trace.to_csv(),
            )?;
        }
        fs::write(
            cfg.output_dir.join("diagnostics.json"),
            serde_json::to_string_pretty(&diagnostics).expect("serializable"),
        )?;
    }

    write_manifest(cfg, part.cluster_count())?;
    Ok(SyntheticRelease {
        replicates,
        synthesized_variables: targets,
    })
}

#[derive(Serialize)]
struct Manifest<'a> {
    config: &'a PipelineConfig,
    cluster_count: usize,
    /// Hex seeds of the per-cluster synthesis streams, derived from
    /// (master seed, stage tag, cluster id).
    cluster_seeds: Vec<String>,
    chain_seeds: Option<Vec<String>>,
}

fn hex(bytes: &[u8; 32]) -> String {
    let mut s = String::with_capacity(64);
    for b in bytes {
        write!(s, "{b:02x}").unwrap();
    }
    s
}

fn write_manifest(cfg: &PipelineConfig, cluster_count: usize) -> Result<()> {
    let cluster_seeds = (0..cluster_count)
        .map(|c| hex(&derive_seed(cfg.seed, &[TAG_SYNTH, c as u64])))
        .collect();
    let chain_seeds = match cfg.synthesizer {
        Synthesizer::Dpmpm => Some(
            (0..cluster_count)
                .map(|c| hex(&derive_seed(cfg.seed, &[TAG_CHAIN, c as u64])))
                .collect(),
        ),
        _ => None,
    };
    let manifest = Manifest {
        config: cfg,
        cluster_count,
        cluster_seeds,
        chain_seeds,
    };
    fs::write(
        cfg.output_dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).expect("serializable"),
    )?;
    Ok(())
}

/// One labelled row of the risk table.
#[derive(Debug, Clone, Serialize)]
pub struct RiskRow {
    pub scenario: String,
    pub grid_size: Option<f64>,
    #[serde(flatten)]
    pub report: RiskReport,
}

fn scenario_label(grid: Option<f64>) -> String {
    match grid {
        None => "no_geocode".into(),
        Some(g) if g == 0.0 => "exact".into(),
        Some(g) => format!("{g}"),
    }
}

/// Stage 3: samples targets, evaluates every configured matching scenario
/// over the released replicates, and writes the risk report (JSON) plus the
/// per-grid summary table (CSV).
pub fn stage_evaluate_risk(cfg: &PipelineConfig) -> Result<Vec<RiskRow>> {
    let (schema, working) = load_working(cfg)?;
    let part_path = partition_path(cfg);
    require_artifact(&part_path, "cluster")?;
    let part = ClusterPartition::load_csv(&part_path, cfg.mdav_k)?;
    let release = load_release(cfg, &schema)?;
    let qis = cfg.quasi_identifiers(&schema)?;

    let mut grids: Vec<Option<f64>> = Vec::new();
    if cfg.risk.include_no_geocode {
        grids.push(None);
    }
    grids.extend(cfg.risk.grid_sizes.iter().map(|&g| Some(g)));
    let scenarios: Vec<IntruderScenario> = grids
        .iter()
        .map(|&grid_size| IntruderScenario {
            quasi_identifiers: qis.clone(),
            grid_size,
            targets_per_cluster: cfg.risk.targets_per_cluster,
            block_on_cluster: cfg.risk.block_on_cluster,
        })
        .collect();

    let mut rng = derive_rng(cfg.seed, &[TAG_RISK]);
    let targets: Vec<Target> =
        sample_targets(&working, &part, cfg.risk.targets_per_cluster, &mut rng)?;
    let reports = risk_grid_sweep(&working, &release, &scenarios, Some(&part), &targets)?;

    let rows: Vec<RiskRow> = grids
        .iter()
        .zip(reports)
        .map(|(&grid_size, report)| RiskRow {
            scenario: scenario_label(grid_size),
            grid_size,
            report,
        })
        .collect();

    fs::create_dir_all(&cfg.output_dir)?;
    fs::write(
        cfg.output_dir.join("risk_report.json"),
        serde_json::to_string_pretty(&rows).expect("serializable"),
    )?;

    let mut table = String::from("grid,expected_match_risk,true_match_rate,false_match_rate\n");
    for row in &rows {
        let fr = row
            .report
            .false_match_rate
            .map_or(String::new(), |v| format!("{v}"));
        writeln!(
            table,
            "{},{},{},{fr}",
            row.scenario, row.report.expected_match_risk, row.report.true_match_rate
        )
        .unwrap();
    }
    fs::write(cfg.output_dir.join("risk_table.csv"), table)?;
    Ok(rows)
}

fn outcome_flags(ds: &Dataset, spec: &OutcomeSpec) -> Result<Vec<bool>> {
    let idx = ds
        .schema()
        .var_index(&spec.variable)
        .ok_or_else(|| Error::Config(format!("unknown outcome variable `{}`", spec.variable)))?;
    let var = &ds.schema().variables()[idx];
    let levels = match &var.kind {
        geosynth::VarKind::Categorical { levels } => levels,
        geosynth::VarKind::Geocode => {
            return Err(Error::Config(format!(
                "outcome variable `{}` must be categorical",
                spec.variable
            )))
        }
    };
    let mut codes = Vec::with_capacity(spec.levels.len());
    for l in &spec.levels {
        let code = levels
            .iter()
            .position(|x| x == l)
            .ok_or_else(|| Error::Config(format!("unknown level `{l}` of `{}`", spec.variable)))?;
        codes.push(code as u32 + 1);
    }
    let col = ds.cat_codes(idx)?;
    Ok(col.iter().map(|c| codes.contains(c)).collect())
}

/// Stage 4: compares the release to the untouched original: UL measures per
/// interaction level, per-region outcome shares, and L curves.
pub fn stage_evaluate_utility(cfg: &PipelineConfig) -> Result<UtilityReport> {
    let (schema, original) = load_original(cfg)?;
    let release = load_release(cfg, &schema)?;

    let region_var = &cfg.utility.region_variable;
    if region_var.is_empty() {
        return Err(Error::Config("utility.region_variable must be set".into()));
    }
    let region_idx = schema
        .var_index(region_var)
        .ok_or_else(|| Error::Config(format!("unknown region variable `{region_var}`")))?;
    let region_map = RegionMap::from_dataset(&original, region_var)?;
    let universe = region_map.region_universe();
    let orig_regions = original.cat_codes(region_idx)?.to_vec();
    let syn_regions: Vec<Vec<u32>> = release
        .replicates
        .iter()
        .map(|rep| assign_regions(rep, &region_map))
        .collect::<Result<_>>()?;

    let table_vars: Vec<usize> = if cfg.utility.table_variables.is_empty() {
        schema
            .variables()
            .iter()
            .enumerate()
            .filter(|(i, v)| !v.is_geocode() && *i != region_idx)
            .map(|(i, _)| i)
            .collect()
    } else {
        cfg.utility
            .table_variables
            .iter()
            .map(|name| {
                schema
                    .var_index(name)
                    .ok_or_else(|| Error::Config(format!("unknown table variable `{name}`")))
            })
            .collect::<Result<_>>()?
    };

    let mut ul_by_level = std::collections::BTreeMap::new();
    let mut ul_results: Vec<UlResult> = Vec::new();
    for &level in &cfg.utility.levels {
        let orig_tables = interaction_tables(&original, &orig_regions, &universe, &table_vars, level)?;
        let rep_tables: Vec<_> = release
            .replicates
            .iter()
            .zip(&syn_regions)
            .map(|(rep, regions)| interaction_tables(rep, regions, &universe, &table_vars, level))
            .collect::<Result<_>>()?;
        let averaged = average_tables(&rep_tables)?;
        let ul = ul_measure(&orig_tables, &averaged)?;
        ul_by_level.insert(level, ul.ul);
        ul_results.push(ul);
    }

    let mut shares = Vec::new();
    for spec in &cfg.utility.share {
        let orig_share_map = region_shares(&orig_regions, &outcome_flags(&original, spec)?);
        let original_shares: Vec<f64> = universe
            .iter()
            .map(|r| orig_share_map.get(r).copied().unwrap_or(0.0))
            .collect();
        let per_rep: Vec<_> = release
            .replicates
            .iter()
            .zip(&syn_regions)
            .map(|(rep, regions)| Ok(region_shares(regions, &outcome_flags(rep, spec)?)))
            .collect::<Result<_>>()?;
        shares.push(ShareComparison {
            name: spec.name.clone(),
            regions: universe.clone(),
            original: original_shares,
            synthetic_mean: mean_shares(&universe, &per_rep),
        });
    }

    let orig_points = original.geocode_points()?;
    let r_grid = default_r_grid(orig_points, cfg.utility.r_count.max(2));
    let domain_area = cfg
        .utility
        .domain_area
        .unwrap_or_else(|| bounding_box_area(orig_points));
    let mut curves = Vec::new();
    for spec in &cfg.utility.l_function {
        let curve: LCurves = l_curves(
            &original,
            &release,
            |ds| outcome_flags(ds, spec),
            &r_grid,
            domain_area,
        )?;
        curves.push(NamedLCurves {
            name: spec.name.clone(),
            curves: curve,
        });
    }

    let report = UtilityReport {
        ul_by_level,
        shares,
        l_curves: curves,
    };

    fs::create_dir_all(&cfg.output_dir)?;
    fs::write(
        cfg.output_dir.join("utility_report.json"),
        serde_json::to_string_pretty(&report).expect("serializable"),
    )?;

    let mut diff_csv = String::from("level,difference\n");
    for ul in &ul_results {
        for d in &ul.differences {
            writeln!(diff_csv, "{},{}", ul.level, d).unwrap();
        }
    }
    fs::write(cfg.output_dir.join("ul_differences.csv"), diff_csv)?;

    let mut shares_csv = String::from("name,region,original,synthetic_mean\n");
    for s in &report.shares {
        for ((region, orig), syn) in s.regions.iter().zip(&s.original).zip(&s.synthetic_mean) {
            writeln!(shares_csv, "{},{region},{orig},{syn}", s.name).unwrap();
        }
    }
    fs::write(cfg.output_dir.join("shares.csv"), shares_csv)?;

    let mut l_csv = String::from("name,r,original,synthetic_mean\n");
    for c in &report.l_curves {
        for ((r, orig), syn) in c.curves.r.iter().zip(&c.curves.original).zip(&c.curves.synthetic_mean) {
            writeln!(l_csv, "{},{r},{orig},{syn}", c.name).unwrap();
        }
    }
    fs::write(cfg.output_dir.join("l_curves.csv"), l_csv)?;

    Ok(report)
}

/// All four stages in order, on one config.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<()> {
    stage_cluster(cfg)?;
    stage_synthesize(cfg)?;
    stage_evaluate_risk(cfg)?;
    stage_evaluate_utility(cfg)?;
    Ok(())
}

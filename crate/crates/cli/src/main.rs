use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use geosynth::error::Result;
use geosynth::seed::derive_rng;
use geosynth_cli::config::PipelineConfig;
use geosynth_cli::pipeline;

/// Partially synthetic geocodes: clustering, synthesis, and risk/utility
/// evaluation for microdata with exact point locations.
#[derive(Parser)]
#[command(name = "geosynth", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Partition the input into fixed-size spatial clusters (MDAV)
    Cluster(StageArgs),
    /// Fit the configured synthesizer per cluster and write the m releases
    Synthesize(StageArgs),
    /// Match-based re-identification risk of an existing release
    EvaluateRisk(StageArgs),
    /// Analytical validity (UL measure, shares, L functions) of a release
    EvaluateUtility(StageArgs),
    /// All four stages in order
    Pipeline(StageArgs),
    /// Generate a toy population with schema and ready-to-run config
    GenToy(GenToyArgs),
}

#[derive(Args)]
struct StageArgs {
    /// Pipeline configuration file (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Override the master seed from the config
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = rayon default)
    #[arg(long)]
    threads: Option<usize>,
    /// Override the output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override any config value by path, e.g. --set cart.cp=0.001
    #[arg(long = "set", value_name = "PATH=VALUE")]
    set: Vec<String>,
}

impl StageArgs {
    fn load(&self) -> Result<PipelineConfig> {
        let mut cfg = PipelineConfig::load(&self.config, &self.set)?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(threads) = self.threads {
            cfg.threads = threads;
        }
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct GenToyArgs {
    /// Number of records
    #[arg(long, default_value_t = 3_000)]
    records: usize,
    /// Number of spatial neighbourhoods
    #[arg(long, default_value_t = 30)]
    neighborhoods: usize,
    /// Addresses per neighbourhood (finite pool, so geocodes repeat)
    #[arg(long, default_value_t = 40)]
    addresses: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Directory for toy_population.csv, toy_schema.toml, toy_config.toml
    #[arg(long, default_value = "data")]
    out: PathBuf,
}

fn gen_toy(args: &GenToyArgs) -> Result<()> {
    use geosynth::simulate;
    std::fs::create_dir_all(&args.out)?;
    let mut rng = derive_rng(args.seed, &[0xDA7A]);
    let ds = simulate::toy_population(args.records, args.neighborhoods, args.addresses, &mut rng)?;
    ds.save_csv(args.out.join("toy_population.csv"))?;
    std::fs::write(
        args.out.join("toy_schema.toml"),
        ds.schema().to_toml_string(),
    )?;

    let config_text = format!(
        r#"input = "{input}"
schema = "{schema}"
synthesizer = "cart_categorical"
synthesis_targets = ["geo"]
m = 5
mdav_k = 100
seed = 20240601
output_dir = "{out}"

[cart]
cp = 0.00001
minsplit = 20
minbucket = 7

[dpmpm]
truncation = 40
iterations = 3500
burn_in = 1000
thin = 10
rerun_thin = 50

[risk]
targets_per_cluster = 50
block_on_cluster = true
grid_sizes = [0.0, 100.0, 1000.0, 10000.0, 20000.0]

[utility]
region_variable = "zip"
levels = [1, 2, 3]

[[utility.share]]
name = "high_wage"
variable = "wage"
levels = ["w8", "w9", "w10"]

[[utility.share]]
name = "foreign"
variable = "foreign"
levels = ["yes"]

[[utility.l_function]]
name = "foreign"
variable = "foreign"
levels = ["yes"]

[[utility.l_function]]
name = "age_60_plus"
variable = "age"
levels = ["a6"]
"#,
        input = args.out.join("toy_population.csv").display(),
        schema = args.out.join("toy_schema.toml").display(),
        out = args.out.join("run").display(),
    );
    std::fs::write(args.out.join("toy_config.toml"), config_text)?;
    eprintln!(
        "wrote {}, toy_schema.toml, toy_config.toml",
        args.out.join("toy_population.csv").display()
    );
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Cluster(args) => {
            let cfg = args.load()?;
            let part = pipeline::stage_cluster(&cfg)?;
            eprintln!(
                "partitioned {} records into {} clusters (k = {})",
                part.n(),
                part.cluster_count(),
                cfg.mdav_k
            );
        }
        Command::Synthesize(args) => {
            let cfg = args.load()?;
            let release = pipeline::stage_synthesize(&cfg)?;
            eprintln!(
                "wrote {} synthetic replicates of {} records to {}",
                release.m(),
                release.replicates[0].n(),
                cfg.output_dir.display()
            );
        }
        Command::EvaluateRisk(args) => {
            let cfg = args.load()?;
            let rows = pipeline::stage_evaluate_risk(&cfg)?;
            for row in &rows {
                eprintln!(
                    "{:>12}: ER {:.2}, TR {:.2}%, FR {}",
                    row.scenario,
                    row.report.expected_match_risk,
                    row.report.true_match_rate,
                    row.report
                        .false_match_rate
                        .map_or("n/a".into(), |v| format!("{v:.2}%")),
                );
            }
        }
        Command::EvaluateUtility(args) => {
            let cfg = args.load()?;
            let report = pipeline::stage_evaluate_utility(&cfg)?;
            for (level, ul) in &report.ul_by_level {
                eprintln!("UL level {level}: {ul:.6}");
            }
        }
        Command::Pipeline(args) => {
            let cfg = args.load()?;
            pipeline::run_pipeline(&cfg)?;
            eprintln!("pipeline artifacts in {}", cfg.output_dir.display());
        }
        Command::GenToy(args) => gen_toy(args)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match catch_unwind(AssertUnwindSafe(|| run(&cli))) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(_) => {
            eprintln!("internal error");
            ExitCode::from(2)
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use race_stream::compression::Variant;
use race_stream::data_io::SynthConfig;
use race_stream::harness::{
    default_k_range, run_prequential, sweep_k, write_output, DataSource, ExperimentConfig, Method,
    OutputFormat, Report,
};
use race_stream::Result;

#[derive(Parser)]
#[command(name = "race", version, about = "Prequential multi-label stream experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replay a stream test-then-train and report aggregated metrics.
    Run(Common),
    /// Repeat the experiment for every reduced label count in a range.
    SweepK {
        #[command(flatten)]
        common: Common,
        /// Smallest k (default ceil(log2 l)).
        #[arg(long)]
        k_min: Option<usize>,
        /// Largest k (default ceil(log2 l)^2, capped at l).
        #[arg(long)]
        k_max: Option<usize>,
    },
}

#[derive(Args)]
struct Common {
    /// ARFF file with features and label attributes.
    #[arg(long, requires = "labels", conflicts_with = "synth")]
    data: Option<PathBuf>,
    /// Mulan label XML naming the label attributes.
    #[arg(long, requires = "data")]
    labels: Option<PathBuf>,
    /// Synthetic stream, e.g. `m=20,l=16,n=5000,density=0.2,dep=0.6[,seed=N]`.
    #[arg(long)]
    synth: Option<String>,
    /// race | obr | oecc | majority | negative (repeatable).
    #[arg(long = "method", default_value = "race")]
    methods: Vec<String>,
    /// RACE variant(s): cls-fixed | cls-adaptive | reg-fixed | reg-adaptive.
    #[arg(long = "variant", default_value = "cls-adaptive")]
    variants: Vec<String>,
    #[arg(long, default_value_t = 50)]
    window: usize,
    /// Reduced label count (default ceil(log2 l)).
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 10)]
    runs: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Training presentations per batch.
    #[arg(long, default_value_t = 1)]
    iter: usize,
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: String,
}

impl Common {
    fn experiment(&self) -> Result<(ExperimentConfig, OutputFormat)> {
        let source = match (&self.data, &self.labels, &self.synth) {
            (Some(arff), Some(labels), None) => DataSource::Files {
                arff: arff.clone(),
                labels: labels.clone(),
            },
            (None, None, Some(desc)) => {
                let mut cfg: SynthConfig = desc.parse()?;
                // an explicit seed= inside --synth wins over --seed
                if !desc.contains("seed=") {
                    cfg.seed = self.seed;
                }
                DataSource::Synthetic(cfg)
            }
            _ => {
                return Err(race_stream::Error::InvalidArgument(
                    "give either --data with --labels, or --synth".into(),
                ))
            }
        };
        let variants = self
            .variants
            .iter()
            .map(|v| v.parse::<Variant>())
            .collect::<Result<Vec<_>>>()?;
        let mut methods = Vec::new();
        for name in &self.methods {
            if name.eq_ignore_ascii_case("race") {
                methods.extend(variants.iter().map(|&v| Method::Race(v)));
            } else {
                methods.push(name.parse()?);
            }
        }
        let config = ExperimentConfig {
            source,
            methods,
            k: self.k,
            window: self.window,
            runs: self.runs,
            seed: self.seed,
            iter: self.iter,
        };
        config.validate()?;
        Ok((config, self.format.parse()?))
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(common) => {
            let (config, format) = common.experiment()?;
            let dataset = config.source.load()?;
            let results = run_prequential(&config, &dataset)?;
            write_output(&Report::from_results(&results).render(format)?, common.out.as_deref())
        }
        Command::SweepK { common, k_min, k_max } => {
            let (config, format) = common.experiment()?;
            let dataset = config.source.load()?;
            let (lo, hi) = default_k_range(dataset.num_labels());
            let (lo, hi) = (k_min.unwrap_or(lo), k_max.unwrap_or(hi));
            if lo == 0 || lo > hi {
                return Err(race_stream::Error::InvalidArgument(format!(
                    "invalid k range {lo}..={hi}"
                )));
            }
            let ks: Vec<usize> = (lo..=hi).collect();
            let sweep = sweep_k(&config, &dataset, &ks)?;
            write_output(&sweep.render(format)?, common.out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

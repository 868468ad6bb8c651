use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use coreprune::flops::{flops_csv, flops_row, keep_for_ratio_preset, KEEP_PRESETS};
use coreprune::io::{read_grid, write_grid, write_grid_csv};
use coreprune::sweep::write_outputs;
use coreprune::{
    generate, run_sweep, select, CoverageReport, Error, FeatureSpace, FlopsOptions,
    FrameAccounting, Method, ModelDims, PruneConfig, Selection, SweepSpec, SynthKind, SynthSpec,
    TokenGrid32, TokenGrid64, WorkloadPreset, DEFAULT_EPSILON,
};

const EXIT_USAGE: u8 = 2;
const EXIT_INPUT: u8 = 3;
const EXIT_INTERNAL: u8 = 4;

#[derive(Parser)]
#[command(
    name = "coreprune",
    version,
    about = "Visual token pruning, coverage diagnostics and FLOPs tables"
)]
struct Cli {
    /// Stability constant added to the feature variance.
    #[arg(long, global = true, default_value_t = DEFAULT_EPSILON)]
    eps: f64,

    /// Output format for reports and tables.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,

    /// Output file (directory for `sweep`); stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Random,
    Kcenter,
    Evtp,
    Divmax,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Random => Method::Random,
            MethodArg::Kcenter => Method::Kcenter,
            MethodArg::Evtp => Method::Evtp,
            MethodArg::Divmax => Method::Divmax,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    GaussianClusters,
    Constant,
    Gradient,
    Checker,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Dtype {
    F32,
    F64,
}

#[derive(Subcommand)]
enum Command {
    /// Select tokens from a grid file and write the selection as JSON.
    Prune {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long, value_enum)]
        method: MethodArg,
        /// Fraction of tokens kept; k = max(1, floor(ratio * M)).
        #[arg(long, default_value_t = 1.0)]
        ratio: f64,
        /// Exact number of tokens kept, overriding the ratio rounding.
        #[arg(long)]
        keep: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Coverage radii and epsilon-ball fractions of a selection.
    Coverage {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        selection: PathBuf,
        /// Ball radii for the epsilon-ball coverage columns.
        #[arg(long, value_delimiter = ',')]
        balls: Vec<f64>,
        /// Measure the feature radius on raw rather than normalized features.
        #[arg(long)]
        raw: bool,
    },
    /// FLOPs breakdown per workload preset and retained token count.
    Flops {
        /// Preset name, or `all`.
        #[arg(long, default_value = "all")]
        preset: String,
        /// Retained tokens per frame (comma separated).
        #[arg(long, value_delimiter = ',', conflicts_with = "ratio_preset")]
        keep: Vec<u64>,
        /// Named ratio preset: 100%, 20%, 10% or 5%.
        #[arg(long)]
        ratio_preset: Option<String>,
        #[arg(long, value_enum, default_value_t = AccountingArg::PerFrame)]
        frame_accounting: AccountingArg,
        /// Do not charge the temporal module for single-frame inputs.
        #[arg(long)]
        no_image_temporal: bool,
    },
    /// Coverage-vs-ratio sweep described by a JSON spec file.
    Sweep {
        #[arg(long)]
        spec: PathBuf,
        /// Also write an SVG chart of mean feature radius against ratio.
        #[arg(long)]
        svg: bool,
    },
    /// Write a synthetic token grid (header + payload, or CSV with --format csv).
    Synth {
        #[arg(long, value_enum)]
        kind: KindArg,
        #[arg(long)]
        width: usize,
        #[arg(long)]
        height: usize,
        #[arg(long, default_value_t = 1)]
        frames: usize,
        #[arg(long)]
        dim: usize,
        #[arg(long, default_value_t = 1)]
        clusters: usize,
        #[arg(long, default_value_t = 0.5)]
        std: f64,
        #[arg(long, default_value_t = 1.0)]
        value: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Dtype::F64)]
        dtype: Dtype,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum AccountingArg {
    PerFrame,
    AllFrames,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            e if e.is_input_error() => EXIT_INPUT,
            Error::InvalidConfig(_)
            | Error::UnknownMethod(_)
            | Error::UnknownPreset { .. }
            | Error::OracleLimit { .. }
            | Error::IndexOutOfRange { .. }
            | Error::EmptySelection => EXIT_USAGE,
            _ => EXIT_INTERNAL,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::from(e).into()
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn load_grid(path: &Path) -> Result<TokenGrid64, Failure> {
    read_grid(path).map_err(|e| Failure {
        code: EXIT_INPUT,
        message: e.to_string(),
    })
}

fn run(cli: Cli) -> Result<(), Failure> {
    let out = cli.out.as_deref();
    match cli.command {
        Command::Prune {
            grid,
            method,
            ratio,
            keep,
            seed,
        } => {
            let grid = load_grid(&grid)?;
            let cfg = PruneConfig {
                ratio,
                epsilon: cli.eps,
                seed,
                k_override: keep,
            };
            let sel = select(method.into(), &grid, &cfg)?;
            sel.validate(grid.len()).map_err(|e| Failure {
                code: EXIT_INTERNAL,
                message: e.to_string(),
            })?;
            emit(out, &(sel.to_json()? + "\n"))
        }
        Command::Coverage {
            grid,
            selection,
            balls,
            raw,
        } => {
            let grid = load_grid(&grid)?;
            let sel =
                Selection::from_json(&fs::read_to_string(&selection)?).map_err(|e| Failure {
                    code: EXIT_INPUT,
                    message: format!("{}: {e}", selection.display()),
                })?;
            let space = if raw {
                FeatureSpace::Raw
            } else {
                FeatureSpace::Normalized
            };
            let report = CoverageReport::compute(&grid, &sel, &balls, space, cli.eps)?;
            let text = match cli.format {
                Format::Json => serde_json::to_string_pretty(&report).map_err(Error::from)? + "\n",
                Format::Csv => report.to_csv()?,
            };
            emit(out, &text)
        }
        Command::Flops {
            preset,
            keep,
            ratio_preset,
            frame_accounting,
            no_image_temporal,
        } => {
            let presets = if preset.eq_ignore_ascii_case("all") {
                WorkloadPreset::all()
            } else {
                vec![WorkloadPreset::by_name(&preset)?]
            };
            let keeps = match (ratio_preset, keep.is_empty()) {
                (Some(name), _) => vec![keep_for_ratio_preset(&name)?],
                (None, true) => KEEP_PRESETS.iter().map(|k| k.1).collect(),
                (None, false) => keep,
            };
            let opts = FlopsOptions {
                frame_accounting: match frame_accounting {
                    AccountingArg::PerFrame => FrameAccounting::PerFrame,
                    AccountingArg::AllFrames => FrameAccounting::AllFrames,
                },
                temporal_for_images: !no_image_temporal,
            };
            let dims = ModelDims::default();
            let rows = presets
                .iter()
                .flat_map(|p| keeps.iter().map(move |&k| (p, k)))
                .map(|(p, k)| flops_row(p, &dims, k, &opts))
                .collect::<Result<Vec<_>, _>>()?;
            let text = match cli.format {
                Format::Json => serde_json::to_string_pretty(&rows).map_err(Error::from)? + "\n",
                Format::Csv => flops_csv(&rows)?,
            };
            emit(out, &text)
        }
        Command::Sweep { spec, svg } => {
            let text = fs::read_to_string(&spec)?;
            let spec: SweepSpec = serde_json::from_str(&text).map_err(|e| Failure {
                code: EXIT_USAGE,
                message: format!("{}: {e}", spec.display()),
            })?;
            let dir = out.ok_or_else(|| Failure {
                code: EXIT_USAGE,
                message: "sweep needs --out <dir>".into(),
            })?;
            let outcome = run_sweep(&spec)?;
            write_outputs(&spec, &outcome, dir, svg)?;
            let failed: Vec<_> = outcome.rows.iter().filter(|r| r.error.is_some()).collect();
            if failed.is_empty() {
                Ok(())
            } else {
                Err(Failure {
                    code: if failed.iter().any(|r| r.input_error) {
                        EXIT_INPUT
                    } else {
                        EXIT_INTERNAL
                    },
                    message: format!(
                        "{} of {} sweep rows failed",
                        failed.len(),
                        outcome.rows.len()
                    ),
                })
            }
        }
        Command::Synth {
            kind,
            width,
            height,
            frames,
            dim,
            clusters,
            std,
            value,
            seed,
            dtype,
        } => {
            let spec = SynthSpec {
                kind: match kind {
                    KindArg::GaussianClusters => SynthKind::GaussianClusters,
                    KindArg::Constant => SynthKind::Constant,
                    KindArg::Gradient => SynthKind::Gradient,
                    KindArg::Checker => SynthKind::Checker,
                },
                width,
                height,
                frames,
                dim,
                n_clusters: clusters,
                cluster_std: std,
                value,
                seed,
            };
            let path = out.ok_or_else(|| Failure {
                code: EXIT_USAGE,
                message: "synth needs --out <path>".into(),
            })?;
            match (cli.format, dtype) {
                (Format::Csv, _) => write_grid_csv(&generate::<f64>(&spec)?, path)?,
                (Format::Json, Dtype::F64) => {
                    write_grid(&generate::<f64>(&spec)?, path)?;
                }
                (Format::Json, Dtype::F32) => {
                    let grid: TokenGrid32 = generate(&spec)?;
                    write_grid::<f32>(&grid, path)?;
                }
            }
            Ok(())
        }
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(value) = std::env::var("COREPRUNE_THREADS") else {
        return Ok(());
    };
    let threads: usize = value.trim().parse().map_err(|_| Failure {
        code: EXIT_USAGE,
        message: format!("COREPRUNE_THREADS must be a positive integer, got `{value}`"),
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build_global()
        .map_err(|e| Failure {
            code: EXIT_INTERNAL,
            message: e.to_string(),
        })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match configure_threads().and_then(|()| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

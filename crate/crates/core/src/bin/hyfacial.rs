use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use hyfacial::error::{Error, Result};
use hyfacial::fusion::{write_deep_features, DeepFeatureTable};
use hyfacial::pipeline::{
    self, fixtures, GridFile, Inputs, RunConfig, DEFAULT_SWEEP_DIMS, TABLE1_AXES, TABLE2_AXES,
};
use hyfacial::reduction::Method;

/// Facial-expression recognition pipeline: descriptors, fusion, reduction, classification.
#[derive(Parser)]
#[command(name = "hyfacial", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Table1,
    Table2,
}

#[derive(Subcommand)]
enum Command {
    /// Run one config end to end.
    Pipeline(Common),
    /// Run a grid of configs and aggregate accuracies into table.csv.
    Ablate {
        #[command(flatten)]
        common: Common,
        /// Built-in grid.
        #[arg(long, conflicts_with = "grid")]
        preset: Option<Preset>,
        /// Grid file: {"axes": [{"axis": ..., "values": [...]}, ...]}.
        #[arg(long)]
        grid: Option<PathBuf>,
        /// Cells run concurrently.
        #[arg(long, default_value_t = default_workers())]
        workers: usize,
    },
    /// Accuracy against target dimension for one or more reducers.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_SWEEP_DIMS.to_vec())]
        dims: Vec<usize>,
        /// Reducers to sweep; the config's reducer when omitted.
        #[arg(long, value_delimiter = ',', value_parser = parse_method)]
        methods: Vec<Method>,
        #[arg(long, default_value_t = default_workers())]
        workers: usize,
    },
    /// Extract and pool local descriptors; write one HYF1 file per source.
    Extract(Common),
    /// Write the bundled tiny dataset, its deep features and example configs.
    ExportFixtures {
        #[arg(long)]
        out: PathBuf,
    },
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    Method::ALL
        .into_iter()
        .find(|m| m.name() == s)
        .ok_or_else(|| format!("unknown reducer {s:?}"))
}

fn load_config(c: &Common) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(&c.config)?;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(o) = &c.out {
        // Command-line paths are relative to the working directory.
        cfg.out = std::path::absolute(o).map_err(|e| Error::io(o, e))?;
    }
    Ok(cfg)
}

fn print_table(t: &pipeline::GridTable, out: &Path) {
    print!("{}", t.to_csv());
    eprintln!("wrote {}", out.join("table.csv").display());
}

fn extract(cfg: &RunConfig) -> Result<()> {
    cfg.validate()?;
    let data = pipeline::load(cfg)?;
    let Inputs::Images(ds) = &data.inputs else {
        return Err(Error::Config("extract needs an image dataset".into()));
    };
    let dir = cfg.out_dir().join("features");
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    for s in cfg.sorted_sources() {
        if !matches!(s, pipeline::FeatureSource::Sift | pipeline::FeatureSource::Orb) {
            continue;
        }
        let (m, counts) = pipeline::pooled_matrix(cfg, ds, s)?;
        let table = DeepFeatureTable::new((0..m.rows()).map(|i| i.to_string()).collect(), m)
            .map_err(|e| Error::Config(e.to_string()))?;
        let path = dir.join(format!("{}.hyf", s.name()));
        write_deep_features(&table, &path).map_err(|e| Error::Config(e.to_string()))?;
        let mean = counts.iter().sum::<usize>() as f64 / counts.len().max(1) as f64;
        println!("{}: {} images, {:.1} keypoints per image, {} columns -> {}", s.name(), counts.len(), mean, table.dim(), path.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Pipeline(c) => {
            let cfg = load_config(&c)?;
            let report = pipeline::run_pipeline(&cfg)?;
            println!("accuracy {:.4}  canonical_sha256 {}", report.accuracy, report.canonical_sha256);
            eprintln!("wrote {}", cfg.out_dir().join("report.json").display());
        }
        Command::Ablate {
            common,
            preset,
            grid,
            workers,
        } => {
            let base = load_config(&common)?;
            let (cells, axes) = match (preset, grid) {
                (_, Some(g)) => {
                    let text = std::fs::read_to_string(&g).map_err(|e| Error::io(&g, e))?;
                    let gf: GridFile = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", g.display())))?;
                    let axes: Vec<_> = gf.axes.iter().map(|a| a.axis()).collect();
                    (pipeline::expand(&base, &gf.axes), axes)
                }
                (Some(Preset::Table2), None) => (pipeline::table2(&base), TABLE2_AXES.to_vec()),
                (Some(Preset::Table1) | None, None) => (pipeline::table1(&base), TABLE1_AXES.to_vec()),
            };
            let out = base.out_dir();
            let (t, _) = pipeline::run_ablation(cells, &axes, &out, workers)?;
            print_table(&t, &out);
        }
        Command::Sweep {
            common,
            dims,
            methods,
            workers,
        } => {
            let base = load_config(&common)?;
            let out = base.out_dir();
            let (t, _) = pipeline::run_dim_sweep(&base, &dims, &methods, &out, workers)?;
            print_table(&t, &out);
        }
        Command::Extract(c) => extract(&load_config(&c)?)?,
        Command::ExportFixtures { out } => {
            fixtures::export_fixtures(&out)?;
            eprintln!("wrote fixtures to {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand};

use soilsamp::evaluation::{run_benchmark, write_plot_csv, BenchmarkConfig, ClassMap};
use soilsamp::formats::{read_matrix_path, write_matrix_path, write_points_csv, write_points_geojson};
use soilsamp::maxvol::{maxvol_rect, MaxvolOptions, TallMatrix};
use soilsamp::raster::{read_asc_path, write_asc_path};
use soilsamp::samplers::{sample, ClhsOptions, Method, RngSeed};
use soilsamp::synth::{generate_site, SiteSpec};
use soilsamp::terrain::features_from_dem;

/// Soil sampling designs from a DEM: terrain features, maxvol and baseline
/// samplers, and a naive Bayes evaluation harness.
#[derive(Debug, Parser)]
#[command(name = "soilsamp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Derive slope, aspect, depressions, accumulation and TWI rasters and
    /// the normalized feature matrix from a DEM.
    Features(FeaturesArgs),
    /// Choose sampling locations from a feature matrix.
    Sample(SampleArgs),
    /// Benchmark sampling methods against a reference class map.
    Evaluate(EvaluateArgs),
    /// Generate a synthetic DEM and reference class map.
    Synth(SynthArgs),
    /// Time maxvol on a seeded random matrix and print mean ± std.
    BenchTiming(BenchTimingArgs),
}

#[derive(Debug, Args)]
struct FeaturesArgs {
    /// Input DEM (ESRI ASCII grid).
    #[arg(long)]
    dem: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Decimal digits in the written rasters.
    #[arg(long, default_value_t = 6)]
    precision: usize,
}

#[derive(Debug, Args)]
struct SampleArgs {
    /// Feature matrix file written by `features`.
    #[arg(long)]
    matrix: PathBuf,
    #[arg(long, default_value = "maxvol")]
    method: Method,
    /// Number of points.
    #[arg(long)]
    k: usize,
    /// Minimum spacing in normalized coordinates (maxvol only).
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 10_000)]
    clhs_iterations: usize,
    /// Output directory for points.csv and points.geojson.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    matrix: PathBuf,
    /// Reference class raster aligned with the matrix grid.
    #[arg(long)]
    classes: PathBuf,
    /// Methods to compare; repeat the flag or separate with commas.
    #[arg(long, value_delimiter = ',', default_value = "maxvol,random,ks,clhs")]
    method: Vec<Method>,
    /// Inclusive range of point counts, `A:B`.
    #[arg(long, default_value = "7:27", value_parser = parse_k_range)]
    k_range: (usize, usize),
    #[arg(long, default_value_t = 1000)]
    repetitions: usize,
    #[arg(long, default_value_t = 10_000)]
    clhs_iterations: usize,
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Train and predict on terrain columns only.
    #[arg(long)]
    drop_coords: bool,
    /// Leave timings out of the report so reruns are byte-identical.
    #[arg(long)]
    omit_timings: bool,
    /// Output directory for report.json and plot.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Site spec as JSON; missing fields take the defaults.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Start from the 217 x 285 cell layout instead of the default site.
    #[arg(long, conflicts_with = "spec")]
    field_scale: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    nrows: Option<usize>,
    #[arg(long)]
    ncols: Option<usize>,
    #[arg(long)]
    cellsize: Option<f64>,
    #[arg(long)]
    noise_amplitude: Option<f64>,
    #[arg(long, default_value_t = 6)]
    precision: usize,
    /// Output directory for dem.asc and classes.asc.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct BenchTimingArgs {
    #[arg(long, default_value_t = 64_000)]
    rows: usize,
    #[arg(long, default_value_t = 5)]
    cols: usize,
    #[arg(long, default_value_t = 27)]
    k: usize,
    #[arg(long, default_value_t = 7)]
    runs: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

fn parse_k_range(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected A:B, got `{s}`"))?;
    let a: usize = a.trim().parse().map_err(|_| format!("bad lower bound `{a}`"))?;
    let b: usize = b.trim().parse().map_err(|_| format!("bad upper bound `{b}`"))?;
    if a == 0 || a > b {
        return Err(format!("range {a}:{b} must satisfy 1 <= A <= B"));
    }
    Ok((a, b))
}

/// Refuses to overwrite any input with an output.
fn check_distinct(inputs: &[&Path], outputs: &[PathBuf]) -> Result<()> {
    for input in inputs {
        let Ok(canon_in) = input.canonicalize() else { continue };
        for out in outputs {
            if out.canonicalize().is_ok_and(|o| o == canon_in) {
                bail!("output {} would overwrite input {}", out.display(), input.display());
            }
        }
    }
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("cannot create {}", path.display()))?))
}

fn features(args: FeaturesArgs) -> Result<()> {
    let dem = read_asc_path(&args.dem).with_context(|| format!("reading {}", args.dem.display()))?;
    let (layers, fm) = features_from_dem(&dem)?;
    fs::create_dir_all(&args.out)?;
    let outputs: Vec<PathBuf> = layers
        .named()
        .iter()
        .map(|(name, _)| args.out.join(format!("{name}.asc")))
        .chain([args.out.join("features.csv")])
        .collect();
    check_distinct(&[&args.dem], &outputs)?;
    for ((_, grid), path) in layers.named().iter().zip(&outputs) {
        write_asc_path(grid, args.precision, path)?;
    }
    write_matrix_path(&fm, &outputs[5])?;
    for name in fm.degenerate_columns() {
        eprintln!("warning: column `{name}` is constant and was normalized to zeros");
    }
    println!("{} pixels x {} features -> {}", fm.nrows(), fm.ncols(), args.out.display());
    Ok(())
}

fn sample_cmd(args: SampleArgs) -> Result<()> {
    let fm = read_matrix_path(&args.matrix).with_context(|| format!("reading {}", args.matrix.display()))?;
    let clhs = ClhsOptions::with_iterations(args.clhs_iterations);
    let design = sample(&fm, args.method, args.k, args.epsilon, RngSeed(args.seed), &clhs)?;
    fs::create_dir_all(&args.out)?;
    let (csv_path, json_path) = (args.out.join("points.csv"), args.out.join("points.geojson"));
    check_distinct(&[&args.matrix], &[csv_path.clone(), json_path.clone()])?;
    write_points_csv(&design, create(&csv_path)?)?;
    write_points_geojson(&design, create(&json_path)?)?;
    if let Some(d) = design.min_ground_spacing() {
        println!("{} points, minimum spacing {d:.2} -> {}", design.k(), args.out.display());
    }
    Ok(())
}

fn evaluate(args: EvaluateArgs) -> Result<()> {
    ensure!(args.repetitions >= 1, "--repetitions must be >= 1");
    ensure!(args.clhs_iterations >= 1, "--clhs-iterations must be >= 1");
    let fm = read_matrix_path(&args.matrix).with_context(|| format!("reading {}", args.matrix.display()))?;
    let grid = read_asc_path(&args.classes).with_context(|| format!("reading {}", args.classes.display()))?;
    let reference = ClassMap::new(grid)?;
    let mut methods = args.method.clone();
    methods.dedup();
    let cfg = BenchmarkConfig {
        k_min: args.k_range.0,
        k_max: args.k_range.1,
        methods,
        repetitions: args.repetitions,
        clhs: ClhsOptions::with_iterations(args.clhs_iterations),
        epsilon: args.epsilon,
        seed: RngSeed(args.seed),
        drop_coords: args.drop_coords,
        record_timings: !args.omit_timings,
        ..BenchmarkConfig::default()
    };
    let report = run_benchmark(&fm, &reference, &cfg)?;

    fs::create_dir_all(&args.out)?;
    let (json_path, plot_path) = (args.out.join("report.json"), args.out.join("plot.csv"));
    check_distinct(&[&args.matrix, &args.classes], &[json_path.clone(), plot_path.clone()])?;
    let mut w = create(&json_path)?;
    serde_json::to_writer_pretty(&mut w, &report)?;
    writeln!(w)?;
    w.flush()?;
    write_plot_csv(&report, create(&plot_path)?)?;

    for cell in report.cells.iter().filter(|c| c.error.is_some()) {
        eprintln!("warning: {} k={}: {}", cell.method, cell.k, cell.error.as_deref().unwrap_or_default());
    }
    if report.failed_cells() == report.cells.len() {
        bail!("every benchmark cell failed");
    }
    println!("{} cells ({} failed) -> {}", report.cells.len(), report.failed_cells(), args.out.display());
    Ok(())
}

fn synth(args: SynthArgs) -> Result<()> {
    let mut spec = match (&args.spec, args.field_scale) {
        (Some(path), _) => {
            let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            serde_json::from_reader(BufReader::new(file)).with_context(|| format!("parsing {}", path.display()))?
        }
        (None, true) => SiteSpec::field_scale(),
        (None, false) => SiteSpec::default(),
    };
    if let Some(v) = args.seed {
        spec.seed = v;
    }
    if let Some(v) = args.nrows {
        spec.nrows = v;
    }
    if let Some(v) = args.ncols {
        spec.ncols = v;
    }
    if let Some(v) = args.cellsize {
        spec.cellsize = v;
    }
    if let Some(v) = args.noise_amplitude {
        spec.noise_amplitude = v;
    }
    let (dem, classes) = generate_site(&spec)?;
    fs::create_dir_all(&args.out)?;
    let (dem_path, classes_path) = (args.out.join("dem.asc"), args.out.join("classes.asc"));
    let inputs: Vec<&Path> = args.spec.iter().map(PathBuf::as_path).collect();
    check_distinct(&inputs, &[dem_path.clone(), classes_path.clone()])?;
    write_asc_path(&dem, args.precision, &dem_path)?;
    write_asc_path(classes.grid(), 0, &classes_path)?;
    let hist: Vec<String> = classes.histogram().iter().map(|(c, n)| format!("{c}:{n}")).collect();
    println!("{}x{} site, classes [{}] -> {}", spec.nrows, spec.ncols, hist.join(", "), args.out.display());
    Ok(())
}

fn bench_timing(args: BenchTimingArgs) -> Result<()> {
    ensure!(args.runs >= 1, "--runs must be >= 1");
    let a = TallMatrix::random_uniform(args.rows, args.cols, args.seed)?;
    let opts = MaxvolOptions::default();
    let mut times = Vec::with_capacity(args.runs);
    for _ in 0..args.runs {
        let start = Instant::now();
        let result = maxvol_rect(&a, args.k, &opts, None)?;
        times.push(start.elapsed().as_secs_f64());
        std::hint::black_box(result);
    }
    let mean = times.iter().sum::<f64>() / times.len() as f64;
    let var = if times.len() > 1 {
        times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (times.len() - 1) as f64
    } else {
        0.0
    };
    println!(
        "maxvol_rect {}x{} -> {} rows: {:.4} s ± {:.4} s over {} runs",
        args.rows,
        args.cols,
        args.k,
        mean,
        var.sqrt(),
        args.runs
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Features(a) => features(a),
        Command::Sample(a) => sample_cmd(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Synth(a) => synth(a),
        Command::BenchTiming(a) => bench_timing(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

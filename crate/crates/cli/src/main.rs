use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use tileflood::bench::{loglog_fit, render_runs, strong_scaling, time_run};
use tileflood::io::{
    read_binary_header, read_raster, tile_monolithic, write_raster, IoCounter, Manifest,
    MANIFEST_NAME,
};
use tileflood::orchestrator::{
    communication_check, io_counters_check, run, Dispatch, RunOptions, Strategy,
};
use tileflood::store::{
    DirectorySink, ManifestSource, MemorySource, MonolithicSource, NullSink, SyntheticSource,
    TileSource,
};
use tileflood::synth::SyntheticDem;
use tileflood::verify::{compare, surface_check, sweep_dims, verify_sweep};
use tileflood::{serial_priority_flood, DType, Error, Grid, Result};

#[derive(Parser)]
#[command(
    name = "tileflood",
    version,
    about = "Tiled Priority-Flood depression filling"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded synthetic DEM (`.asc` for ASCII, anything else binary).
    Generate(GenerateArgs),
    /// Split a monolithic raster into tiles plus a manifest.
    Tile(TileArgs),
    /// Fill a DEM tile by tile.
    Fill(FillArgs),
    /// Compare tiled fills over many layouts and strategies with the serial fill.
    Verify(VerifyArgs),
    /// Time fills across worker counts and DEM sizes.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum DTypeArg {
    Int16,
    Int32,
    Float32,
    Float64,
}

impl From<DTypeArg> for DType {
    fn from(d: DTypeArg) -> Self {
        match d {
            DTypeArg::Int16 => DType::I16,
            DTypeArg::Int32 => DType::I32,
            DTypeArg::Float32 => DType::F32,
            DTypeArg::Float64 => DType::F64,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Evict,
    Cache,
    Cachec,
    Retain,
}

impl StrategyArg {
    fn name(self) -> &'static str {
        match self {
            StrategyArg::Evict => "evict",
            StrategyArg::Cache => "cache",
            StrategyArg::Cachec => "cachec",
            StrategyArg::Retain => "retain",
        }
    }
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 200)]
    width: usize,
    #[arg(long, default_value_t = 200)]
    height: usize,
    #[arg(long, value_enum, default_value = "float32")]
    dtype: DTypeArg,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Leave out the NoData blobs.
    #[arg(long)]
    no_nodata: bool,
}

impl SynthArgs {
    fn dem(&self) -> SyntheticDem {
        SyntheticDem::new(self.width, self.height, self.dtype.into(), self.seed)
            .with_nodata(!self.no_nodata)
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    synth: SynthArgs,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct TileArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    tile_width: usize,
    #[arg(long)]
    tile_height: usize,
    #[arg(long)]
    output: PathBuf,
    /// Cell type for ASCII input (inferred when omitted).
    #[arg(long, value_enum)]
    dtype: Option<DTypeArg>,
}

#[derive(Args)]
struct FillArgs {
    /// Monolithic raster to fill.
    #[arg(
        long,
        conflicts_with = "manifest",
        required_unless_present = "manifest"
    )]
    input: Option<PathBuf>,
    /// Manifest of a pre-tiled DEM.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    tile_width: usize,
    #[arg(long, default_value_t = 1000)]
    tile_height: usize,
    #[arg(long, value_enum, default_value = "evict")]
    strategy: StrategyArg,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    workers: u32,
    /// Directory for output tiles and their manifest.
    #[arg(long)]
    output: PathBuf,
    #[arg(long, env = "TILEFLOOD_CACHE_DIR")]
    cache_dir: Option<PathBuf>,
    /// Where to write the per-tile run report.
    #[arg(long)]
    stats: Option<PathBuf>,
    /// Cell type for ASCII input (inferred when omitted).
    #[arg(long, value_enum)]
    dtype: Option<DTypeArg>,
    /// Hand out tiles in a seeded random order.
    #[arg(long)]
    shuffle_seed: Option<u64>,
}

#[derive(Args)]
struct VerifyArgs {
    /// DEM to check; a synthetic one is generated when omitted.
    #[arg(long)]
    input: Option<PathBuf>,
    #[command(flatten)]
    synth: SynthArgs,
    /// Check this existing output (raster or manifest) instead of running the sweep.
    #[arg(long)]
    against: Option<PathBuf>,
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u32).range(1..))]
    workers: u32,
    /// Extra tile size to include, as WIDTHxHEIGHT. Repeatable.
    #[arg(long = "tile", value_parser = parse_dims)]
    tiles: Vec<(usize, usize)>,
    #[arg(long, env = "TILEFLOOD_CACHE_DIR")]
    cache_dir: Option<PathBuf>,
    #[arg(long, value_enum)]
    dtype_hint: Option<DTypeArg>,
}

#[derive(Args)]
struct BenchArgs {
    /// Pre-tiled DEM to time; a synthetic one is used when omitted.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[command(flatten)]
    synth: SynthArgs,
    #[arg(long, default_value_t = 250)]
    tile_width: usize,
    #[arg(long, default_value_t = 250)]
    tile_height: usize,
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
    workers: Vec<usize>,
    #[arg(long, value_enum, default_value = "retain")]
    strategy: StrategyArg,
    #[arg(long, env = "TILEFLOOD_CACHE_DIR")]
    cache_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    /// Also fit wall time against size over square synthetic DEMs with these
    /// cell counts (single worker).
    #[arg(long, value_delimiter = ',')]
    sizes: Vec<f64>,
}

fn parse_dims(s: &str) -> std::result::Result<(usize, usize), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or("expected WIDTHxHEIGHT")?;
    let w: usize = w.parse().map_err(|_| format!("bad width {w:?}"))?;
    let h: usize = h.parse().map_err(|_| format!("bad height {h:?}"))?;
    if w == 0 || h == 0 {
        return Err("tile dimensions must be at least 1".into());
    }
    Ok((w, h))
}

fn strategy(arg: StrategyArg, cache_dir: Option<&Path>) -> Result<Strategy> {
    Strategy::parse(arg.name(), cache_dir)
}

/// A raster, or the mosaic of a tiled one when given a manifest.
fn load(path: &Path, hint: Option<DType>) -> Result<Grid> {
    if path.file_name().is_some_and(|n| n == MANIFEST_NAME) {
        tileflood::io::mosaic(&Manifest::read(path)?)
    } else {
        read_raster(path, hint, &IoCounter::new())
    }
}

fn cmd_generate(a: &GenerateArgs) -> Result<ExitCode> {
    let g = a.synth.dem().render();
    write_raster(&g, &a.output, &IoCounter::new())?;
    println!(
        "generate width={} height={} dtype={} output={}",
        g.width(),
        g.height(),
        g.dtype(),
        a.output.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_tile(a: &TileArgs) -> Result<ExitCode> {
    let m = tile_monolithic(
        &a.input,
        a.tile_width,
        a.tile_height,
        &a.output,
        a.dtype.map(Into::into),
    )?;
    println!(
        "tile grid={}x{} tiles={} manifest={}",
        m.layout.grid_width(),
        m.layout.grid_height(),
        m.layout.tile_count(),
        a.output.join(MANIFEST_NAME).display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_fill(a: &FillArgs) -> Result<ExitCode> {
    let strategy = strategy(a.strategy, a.cache_dir.as_deref())?;
    let source: Box<dyn TileSource> = match (&a.input, &a.manifest) {
        (_, Some(m)) => Box::new(ManifestSource::open(m)?),
        // Uncompressed binary rasters are read window by window.
        (Some(p), None) if read_binary_header(p).is_ok() => {
            Box::new(MonolithicSource::open(p, a.tile_width, a.tile_height)?)
        }
        (Some(p), None) => {
            let g = read_raster(p, a.dtype.map(Into::into), &IoCounter::new())?;
            let (tw, th) = (a.tile_width.min(g.width()), a.tile_height.min(g.height()));
            Box::new(MemorySource::uniform(g, tw, th)?)
        }
        (None, None) => {
            return Err(Error::Invalid(
                "either --input or --manifest is required".into(),
            ))
        }
    };
    let sink = DirectorySink::create(&a.output)?;
    let mut opts = RunOptions::new(strategy, a.workers as usize);
    if let Some(seed) = a.shuffle_seed {
        opts.dispatch = Dispatch::Shuffled(seed);
    }
    let stats = run(source.as_ref(), &sink, &opts)?;
    let report = stats.report();
    if let Some(p) = &a.stats {
        fs::write(p, &report).map_err(|e| Error::Io {
            path: p.clone(),
            source: e,
        })?;
    }
    print!("{}", report.lines().next().unwrap_or_default());
    println!(" output={}", sink.manifest_path().display());
    for f in io_counters_check(&stats)
        .into_iter()
        .chain(communication_check(&stats))
    {
        eprintln!("warning: {f}");
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(a: &VerifyArgs) -> Result<ExitCode> {
    let dem = match &a.input {
        Some(p) => load(p, a.dtype_hint.map(Into::into))?,
        None => a.synth.dem().render(),
    };
    if let Some(out) = &a.against {
        let got = load(out, Some(dem.dtype()))?;
        let want = serial_priority_flood(&dem);
        let mut ok = true;
        match compare(&want, &got) {
            Some((m, n)) => {
                ok = false;
                println!(
                    "mismatch count={n} first=({},{}) expected={} actual={}",
                    m.row, m.col, m.expected, m.actual
                );
            }
            None => println!("match cells={}", dem.len()),
        }
        for f in surface_check(&dem, &got) {
            ok = false;
            println!("surface {f}");
        }
        println!("verify result={}", if ok { "pass" } else { "FAIL" });
        return Ok(if ok {
            ExitCode::SUCCESS
        } else {
            ExitCode::FAILURE
        });
    }

    let mut dims = sweep_dims(dem.width(), dem.height(), a.synth.seed);
    for &d in &a.tiles {
        if !dims.contains(&d) {
            dims.push(d);
        }
    }
    let scratch = match &a.cache_dir {
        Some(d) => d.join(format!("verify-{}", std::process::id())),
        None => std::env::temp_dir().join(format!("tileflood-verify-{}", std::process::id())),
    };
    let report = verify_sweep(&dem, &dims, a.workers as usize, &scratch);
    let _ = fs::remove_dir_all(&scratch);
    let report = report?;
    print!("{}", report.render());
    Ok(if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn cmd_bench(a: &BenchArgs) -> Result<ExitCode> {
    if a.workers.is_empty() || a.workers.contains(&0) {
        return Err(Error::Invalid("worker counts must be at least 1".into()));
    }
    let strategy = strategy(a.strategy, a.cache_dir.as_deref())?;
    let source: Box<dyn TileSource> = match &a.manifest {
        Some(m) => Box::new(ManifestSource::open(m)?),
        None => Box::new(SyntheticSource::new(
            a.synth.dem(),
            a.tile_width,
            a.tile_height,
        )?),
    };
    let runs = strong_scaling(source.as_ref(), &strategy, &a.workers, a.repeats)?;
    print!("{}", render_runs(&runs));

    if !a.sizes.is_empty() {
        let mut points = Vec::new();
        for &cells in &a.sizes {
            let side = cells.sqrt().round().max(1.0) as usize;
            let dem = SyntheticDem::new(side, side, a.synth.dtype.into(), a.synth.seed);
            let src = SyntheticSource::new(dem, a.tile_width, a.tile_height)?;
            let (secs, stats) = time_run(
                &src,
                &NullSink,
                &RunOptions::new(strategy.clone(), 1),
                a.repeats,
            )?;
            println!(
                "size cells={} seconds={:.4} cells_per_second={:.0}",
                stats.cells(),
                secs,
                stats.cells() as f64 / secs
            );
            points.push((stats.cells() as f64, secs));
        }
        if points.len() >= 2 {
            let fit = loglog_fit(&points)?;
            println!(
                "fit slope={:.4} intercept={:.4} r_squared={:.4}",
                fit.slope, fit.intercept, fit.r_squared
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Tile(a) => cmd_tile(a),
        Command::Fill(a) => cmd_fill(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

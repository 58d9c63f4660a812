use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use doa_refine::audio::{read_raw_f32, read_wav, write_wav};
use doa_refine::manifold::fibonacci_grid;
use doa_refine::pipeline::RunConfig;
use doa_refine::sim::{monte_carlo, random_doas, synth_time_scene, GroundTruth, Scene, SweepConfig};
use doa_refine::{Error, Result};

/// Direction-of-arrival estimation with continuous refinement on the sphere.
#[derive(Parser)]
#[command(name = "doa-refine", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Locate sources in a multichannel recording and print a JSON report.
    Locate(RunArgs),
    /// Run a Monte Carlo sweep and write per-trial errors, timings and medians.
    Bench(BenchArgs),
    /// Print a Fibonacci grid as `x,y,z` CSV.
    Grid {
        #[arg(long, default_value_t = 100)]
        grid: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Render a synthetic scene to WAV plus a ground-truth JSON.
    Simulate(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    geometry: Option<PathBuf>,
    /// WAV file, or headerless f32 when --raw-channels is given.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    raw_channels: Option<usize>,
    #[arg(long)]
    sample_rate: Option<f64>,
    #[arg(long)]
    estimator: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    s: Option<f64>,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    sources: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, allow_negative_numbers = true)]
    snr: Option<f64>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Sweep file; every key is optional.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    estimator: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    s: Option<f64>,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    sources: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, allow_negative_numbers = true)]
    snr: Option<f64>,
    /// Error CSV path; timings and summary go next to it.
    #[arg(long)]
    output: Option<PathBuf>,
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($flag:ident => $field:ident),*) => {
                $(if let Some(v) = &self.$flag { cfg.$field = v.clone().into(); })*
            };
        }
        set!(geometry => geometry, input => input, raw_channels => raw_channels, s => s);
        set!(estimator => estimator, variant => variant, sample_rate => sample_rate);
        set!(grid => grid_size, iters => iters, sources => num_sources, seed => seed, snr => snr_db);
        Ok(cfg)
    }
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => Ok(fs::write(p, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// `scene.wav` → `scene.<suffix>`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn locate(args: &RunArgs) -> Result<()> {
    let cfg = args.config()?;
    let pipeline = cfg.pipeline()?;
    let geometry = cfg.geometry()?;
    let input = cfg.input.as_ref().ok_or_else(|| Error::InvalidArgument("locate needs --input".into()))?;
    let audio = match cfg.raw_channels {
        Some(ch) => read_raw_f32(input, ch, cfg.sample_rate)?,
        None => read_wav(input)?,
    };
    let found = pipeline.locate_signal(audio.samples.view(), audio.sample_rate, &geometry)?;
    let report = pipeline.report(&found);
    write_or_print(args.output.as_deref(), &(serde_json::to_string_pretty(&report)? + "\n"))
}

fn bench(args: &BenchArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => SweepConfig::load(path)?,
        None => SweepConfig::default(),
    };
    if let Some(e) = &args.estimator {
        cfg.estimators = vec![e.clone()];
    }
    if let Some(s) = args.s {
        cfg.s_values = vec![s];
    }
    if let Some(g) = args.grid {
        cfg.grid_sizes = vec![g];
    }
    if let Some(v) = &args.variant {
        cfg.variants = vec![v.clone()];
    }
    if let Some(t) = args.iters {
        cfg.iters = vec![t];
    }
    if let Some(l) = args.sources {
        cfg.num_sources = l;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(snr) = args.snr {
        cfg.snr_db = vec![snr];
    }
    let result = monte_carlo(&cfg)?;
    match &args.output {
        Some(path) => {
            fs::write(path, result.errors_csv()?)?;
            fs::write(sibling(path, "timings.csv"), result.timings_csv()?)?;
            fs::write(sibling(path, "summary.json"), result.summary_json() + "\n")?;
        }
        None => println!("{}", result.summary_json()),
    }
    Ok(())
}

fn simulate(args: &RunArgs) -> Result<()> {
    let cfg = args.config()?;
    if !cfg.snr_db.is_finite() {
        return Err(Error::InvalidArgument("simulate needs a finite --snr".into()));
    }
    if cfg.sample_rate.fract() != 0.0 || cfg.sample_rate < 1.0 || cfg.sample_rate > u32::MAX as f64 {
        return Err(Error::InvalidArgument(format!("sample rate {} is not a whole number of Hz", cfg.sample_rate)));
    }
    let geometry = cfg.geometry()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let doas = random_doas(&mut rng, cfg.num_sources, 30f64.to_radians())?;
    let mut scene = Scene::new(geometry.clone(), &doas, cfg.snr_db, cfg.seed);
    scene.sample_rate = cfg.sample_rate;
    scene.duration = cfg.duration;
    scene.frame_size = cfg.frame_size;
    scene.hop = cfg.hop;
    scene.f_min = cfg.f_min;
    scene.f_max = cfg.f_max;
    let signal = synth_time_scene(&scene)?;

    let out = args.output.clone().unwrap_or_else(|| PathBuf::from("scene.wav"));
    write_wav(&out, signal.view(), cfg.sample_rate as u32)?;
    let truth = serde_json::to_string_pretty(&GroundTruth::of(&scene))?;
    fs::write(sibling(&out, "truth.json"), truth + "\n")?;
    if cfg.geometry.is_none() {
        geometry.save(sibling(&out, "geometry.json"))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Locate(args) => locate(&args),
        Command::Bench(args) => bench(&args),
        Command::Grid { grid, output } => write_or_print(output.as_deref(), &fibonacci_grid(grid)?.to_csv()),
        Command::Simulate(args) => simulate(&args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}

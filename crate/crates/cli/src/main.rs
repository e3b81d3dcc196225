//! `relight`: synthetic dataset generation, inverse rendering, relighting,
//! evaluation and method comparison from the command line.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use relight::assets::{read_assets, write_assets};
use relight::dataset::load_object_dataset;
use relight::evaluate::{evaluate, render_path};
use relight::invopt::{initial_assets, optimize, relight as relight_view, LossKind, OptimConfig};
use relight::io::png::read_png_rgb;
use relight::io::ply::read_ply;
use relight::io::rgbe::{read_rgbe, write_rgbe};
use relight::metrics::report::{compare_methods, MetricsReport};
use relight::photometry::{fit_color_transform, linearize, merge_brackets, ExposureBracket, DEFAULT_SATURATION};
use relight::render::BrdfModel;
use relight::synth::{synth, EnvKind, Shape, SynthSpec};
use relight::{Error, LinearImage};

#[derive(Parser, Debug)]
#[command(name = "relight", version, about = "Relightable object reconstruction and evaluation")]
struct Cli {
    /// Seed for every random choice made by the command.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render a synthetic object dataset with known ground truth.
    Synth(SynthArgs),
    /// Fit material textures and an environment map to a dataset's input views.
    Fit(FitArgs),
    /// Render fitted assets for every test view under that view's environment.
    Relight(RelightArgs),
    /// Score renders against a dataset's test views.
    Evaluate(EvaluateArgs),
    /// Merge an exposure bracket into one linear HDR image.
    MergeHdr(MergeArgs),
    /// Fit a 3×3 color transform between two sets of color-chart patches.
    CalibrateColor(CalibrateArgs),
    /// Compare methods and correlate their relighting and novel-view rankings.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "composite")]
    shape: String,
    /// Comma-separated environments; the first lights the input views.
    #[arg(long, default_value = "outdoor,indoor-natural,indoor-artificial")]
    envs: String,
    #[arg(long, default_value_t = 16)]
    inputs: usize,
    #[arg(long, default_value_t = 3)]
    tests_per_env: usize,
    #[arg(long, default_value_t = 128)]
    width: usize,
    #[arg(long, default_value_t = 128)]
    height: usize,
    #[arg(long, default_value_t = 64)]
    spp: usize,
    #[arg(long, default_value_t = 48)]
    resolution: usize,
    #[arg(long, default_value_t = 256)]
    material_size: usize,
    #[arg(long, default_value_t = 512)]
    env_width: usize,
    #[arg(long, default_value = "principled")]
    brdf: String,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum LossArg {
    L1,
    L2,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    mesh: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    iters: Option<usize>,
    /// Material learning rate.
    #[arg(long)]
    lr: Option<f64>,
    /// Learning rate of the log environment radiance.
    #[arg(long)]
    env_lr: Option<f64>,
    /// Light samples per strategy for each training ray.
    #[arg(long)]
    spp: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long, value_enum)]
    loss: Option<LossArg>,
    #[arg(long)]
    material_size: Option<usize>,
    #[arg(long)]
    env_height: Option<usize>,
    #[arg(long)]
    alpha_env: Option<f64>,
    #[arg(long)]
    alpha_material: Option<f64>,
    /// Take radiance derivatives from the same samples as the residual.
    #[arg(long)]
    correlated: bool,
    /// Trace training rays through pixel centres.
    #[arg(long)]
    no_jitter: bool,
}

#[derive(Args, Debug)]
struct RelightArgs {
    #[arg(long)]
    assets: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 256)]
    spp: usize,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    renders: PathBuf,
    /// Per-view scores as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Per-view scores and aggregates as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct MergeArgs {
    /// Text file with one `<image path> <shutter seconds>` per line; relative
    /// paths resolve against the manifest's directory.
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SATURATION)]
    saturation: f64,
}

#[derive(Args, Debug)]
struct CalibrateArgs {
    /// Measured patch colors, one `r,g,b` per line.
    #[arg(long)]
    measured: PathBuf,
    /// Reference patch colors in the same order.
    #[arg(long)]
    reference: PathBuf,
    /// Image to correct with the fitted transform.
    #[arg(long, requires = "out")]
    apply: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Relighting scores as `name=path.csv`, once per method.
    #[arg(long = "relight", required = true)]
    relight: Vec<String>,
    /// Novel-view scores as `name=path.csv`, once per method.
    #[arg(long = "nvs", required = true)]
    nvs: Vec<String>,
    #[arg(long)]
    json: Option<PathBuf>,
}

fn read_text(path: &Path) -> relight::Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> relight::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn run_synth(args: &SynthArgs, seed: u64) -> anyhow::Result<()> {
    let shape = Shape::from_name(&args.shape).ok_or_else(|| Error::invalid(format!("unknown shape '{}'", args.shape)))?;
    let envs = args
        .envs
        .split(',')
        .map(|s| EnvKind::from_name(s.trim()).ok_or_else(|| Error::invalid(format!("unknown environment '{s}'"))))
        .collect::<relight::Result<Vec<_>>>()?;
    let brdf = BrdfModel::from_name(&args.brdf).ok_or_else(|| Error::invalid(format!("unknown BRDF '{}'", args.brdf)))?;
    let spec = SynthSpec {
        shape,
        resolution: args.resolution,
        material_size: args.material_size,
        envs,
        env_width: args.env_width,
        input_views: args.inputs,
        test_views_per_env: args.tests_per_env,
        width: args.width,
        height: args.height,
        spp: args.spp,
        brdf,
        seed,
    };
    let out = synth(&spec, &args.out)?;
    println!("wrote {} input and {} test views to {}", out.inputs.len(), out.tests.len(), args.out.display());
    Ok(())
}

fn run_fit(args: &FitArgs, seed: u64) -> anyhow::Result<()> {
    let mut cfg = OptimConfig { seed, ..Default::default() };
    if let Some(v) = args.iters {
        cfg.iterations = v;
    }
    if let Some(v) = args.lr {
        cfg.learning_rate = v;
    }
    if let Some(v) = args.env_lr {
        cfg.env_learning_rate = v;
    }
    if let Some(v) = args.spp {
        cfg.samples = v;
    }
    if let Some(v) = args.batch {
        cfg.batch = v;
    }
    if let Some(v) = args.loss {
        cfg.loss = match v {
            LossArg::L1 => LossKind::L1,
            LossArg::L2 => LossKind::L2,
        };
    }
    if let Some(v) = args.material_size {
        cfg.material_size = v;
    }
    if let Some(v) = args.env_height {
        cfg.env_height = v;
        cfg.env_width = 2 * v;
        cfg.env_coarse_height = cfg.env_coarse_height.min(v);
    }
    if let Some(v) = args.alpha_env {
        cfg.alpha_env = v;
    }
    if let Some(v) = args.alpha_material {
        cfg.alpha_material = v;
    }
    cfg.decorrelate = !args.correlated;
    cfg.jitter = !args.no_jitter;
    cfg.validate()?;
    let dataset = load_object_dataset(&args.dataset)?;
    let views = dataset.training_views()?;
    let mesh = read_ply(&args.mesh)?;
    info!("fitting {} views, {} iterations", views.len(), cfg.iterations);
    let fit = optimize(initial_assets(mesh, &views, &cfg)?, &views, &cfg)?;
    write_assets(&fit.assets, &args.out)?;
    let trace: Vec<String> = fit.trace.iter().map(|v| format!("{v:.9e}")).collect();
    write_text(&args.out.join("loss.txt"), &(trace.join("\n") + "\n"))?;
    if let Some(last) = fit.trace.last() {
        println!("final loss {last:.6}");
    }
    Ok(())
}

fn run_relight(args: &RelightArgs, seed: u64) -> anyhow::Result<()> {
    let assets = read_assets(&args.assets)?;
    let dataset = load_object_dataset(&args.dataset)?;
    fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    for (i, view) in dataset.tests.iter().enumerate() {
        let gt = read_png_rgb(&view.image)?;
        let env = dataset.test_env(i)?;
        let r = relight_view(&assets, &env, &view.camera, gt.width(), gt.height(), args.spp, seed ^ u64::from(view.index))?;
        let path = render_path(&args.out, view.index);
        write_rgbe(&r.image, &path)?;
        info!("wrote {}", path.display());
    }
    println!("relit {} views into {}", dataset.tests.len(), args.out.display());
    Ok(())
}

fn run_evaluate(args: &EvaluateArgs) -> anyhow::Result<()> {
    let dataset = load_object_dataset(&args.dataset)?;
    let report = evaluate(&dataset, &args.renders)?;
    if let Some(p) = &args.csv {
        write_text(p, &report.to_csv()?)?;
    }
    if let Some(p) = &args.json {
        write_text(p, &serde_json::to_string_pretty(&report.to_json())?)?;
    }
    for a in report.aggregates() {
        let perceptual = a.perceptual.map(|p| format!(" perceptual {p:.4}")).unwrap_or_default();
        println!("{:<20} n={:<3} psnr {:>8.3} dB  ssim {:.4}{perceptual}", a.group, a.count, a.psnr_db, a.ssim);
    }
    Ok(())
}

fn read_frame(path: &Path) -> relight::Result<LinearImage> {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("hdr") => read_rgbe(path),
        Some("png") => Ok(linearize(&read_png_rgb(path)?, 0.0, relight::photometry::DEFAULT_GAMMA)),
        _ => Err(Error::format(path, "expected a .png or .hdr frame")),
    }
}

fn run_merge(args: &MergeArgs) -> anyhow::Result<()> {
    let text = read_text(&args.manifest)?;
    let base = args.manifest.parent().unwrap_or(Path::new("."));
    let mut frames = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (path, shutter) = line
            .rsplit_once(char::is_whitespace)
            .ok_or_else(|| Error::format(&args.manifest, format!("line {}: expected '<path> <shutter>'", n + 1)))?;
        let shutter: f64 = shutter
            .parse()
            .map_err(|_| Error::format(&args.manifest, format!("line {}: bad shutter time '{shutter}'", n + 1)))?;
        frames.push((read_frame(&base.join(path.trim()))?, shutter));
    }
    let merged = merge_brackets(&ExposureBracket::new(frames)?, args.saturation)?;
    write_rgbe(&merged.image, &args.out)?;
    println!("merged into {} ({} saturated pixels)", args.out.display(), merged.saturated.count());
    Ok(())
}

fn read_patches(path: &Path) -> relight::Result<Vec<[f64; 3]>> {
    let mut out = Vec::new();
    for (n, line) in read_text(path)?.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals: Result<Vec<f64>, _> = line.split(',').map(|t| t.trim().parse::<f64>()).collect();
        match vals {
            Ok(v) if v.len() == 3 => out.push([v[0], v[1], v[2]]),
            // a non-numeric first line is a header
            Err(_) if out.is_empty() && n == 0 => {}
            _ => return Err(Error::format(path, format!("line {}: expected 'r,g,b'", n + 1))),
        }
    }
    Ok(out)
}

fn run_calibrate(args: &CalibrateArgs) -> anyhow::Result<()> {
    let t = fit_color_transform(&read_patches(&args.measured)?, &read_patches(&args.reference)?)?;
    let m = t.matrix;
    let rows = m.m;
    println!("{}", serde_json::to_string_pretty(&serde_json::json!({ "matrix": rows, "residual_rms": t.residual_rms }))?);
    if let (Some(input), Some(out)) = (&args.apply, &args.out) {
        write_rgbe(&t.apply_image(&read_frame(input)?), out)?;
    }
    Ok(())
}

fn named_reports(items: &[String]) -> relight::Result<Vec<(String, MetricsReport)>> {
    items
        .iter()
        .map(|item| {
            let (name, path) =
                item.split_once('=').ok_or_else(|| Error::invalid(format!("expected name=path, got '{item}'")))?;
            let path = Path::new(path);
            let report = MetricsReport::from_csv(&read_text(path)?).map_err(|e| match e {
                Error::Invalid(msg) => Error::format(path, msg),
                e => e,
            })?;
            Ok((name.to_string(), report))
        })
        .collect()
}

fn run_report(args: &ReportArgs) -> anyhow::Result<()> {
    let cmp = compare_methods(&named_reports(&args.relight)?, &named_reports(&args.nvs)?)?;
    print!("{}", cmp.to_table());
    if let Some(p) = &args.json {
        write_text(p, &serde_json::to_string_pretty(&cmp.to_json())?)?;
    }
    Ok(())
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global().context("configuring threads")?;
    }
    match &cli.command {
        Command::Synth(a) => run_synth(a, cli.seed),
        Command::Fit(a) => run_fit(a, cli.seed),
        Command::Relight(a) => run_relight(a, cli.seed),
        Command::Evaluate(a) => run_evaluate(a),
        Command::MergeHdr(a) => run_merge(a),
        Command::CalibrateColor(a) => run_calibrate(a),
        Command::Report(a) => run_report(a),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_io() => 1,
        Some(_) => 2,
        None => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

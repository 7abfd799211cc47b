use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use halo_core::data::{read_png, write_depth, write_png};
use halo_core::nalgebra::Matrix4;
use halo_core::pipeline::{
    load_point_field, load_ray_field, render_view, score_pair, PipelineConfig, Pipeline, RenderSettings, SetScore,
    Stage,
};
use halo_core::rendering::{DepthGuidedConfig, Intrinsics};
use halo_core::toy2d::{
    detail_image, extrapolate_experiment, fit_image_field, interpolate_experiment, toy_high, toy_low, CheckerSpec,
    MaskRect, ToyConfig,
};
use halo_core::HaloError;
use serde::Deserialize;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "halo", version, about = "Few-shot view synthesis with low-frequency regularized radiance fields")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pick the Lo encoding by the spectral criterion.
    TuneFreq(RunArgs),
    /// Train one stage, or all of them.
    Train {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum, default_value = "all")]
        stage: StageArg,
        /// Continue from checkpoints in the run directory.
        #[arg(long)]
        resume: bool,
    },
    /// Render a point-field checkpoint at the poses of a transforms file.
    Render {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Ray-field checkpoint used for depth-guided sampling.
        #[arg(long)]
        ray_checkpoint: Option<PathBuf>,
        /// Blender-style `transforms_*.json`.
        #[arg(long)]
        poses: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        width: usize,
        #[arg(long, default_value_t = 100)]
        height: usize,
        #[arg(long, default_value_t = 64)]
        samples: usize,
    },
    /// PSNR and SSIM of every render against the same-named ground truth.
    Eval {
        #[arg(long)]
        renders: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// Also write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// 2D interpolation and extrapolation experiments.
    Toy2d {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "all")]
        experiment: ToyExperiment,
        #[arg(long, default_value_t = 10_000)]
        iterations: usize,
        /// Steps for each extrapolation fit.
        #[arg(long, default_value_t = 2_000)]
        extrapolation_iterations: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Extrapolation repeats with consecutive seeds.
        #[arg(long, default_value_t = 5)]
        repeats: u64,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run directory.
    #[arg(long)]
    out: PathBuf,
    /// Base seed; every stage seed is derived from it.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum StageArg {
    Lo,
    Ray,
    Hi,
    Joint,
    All,
}

impl From<StageArg> for Stage {
    fn from(s: StageArg) -> Self {
        match s {
            StageArg::Lo => Stage::Lo,
            StageArg::Ray => Stage::Ray,
            StageArg::Hi => Stage::Hi,
            StageArg::Joint => Stage::Joint,
            StageArg::All => Stage::All,
        }
    }
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum ToyExperiment {
    Interpolate,
    Extrapolate,
    All,
}

fn load_config(args: &RunArgs) -> anyhow::Result<PipelineConfig> {
    let mut cfg = match &args.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            PipelineConfig::from_toml(&text)?
        }
        None => PipelineConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.reseed(seed);
    }
    Ok(cfg)
}

fn print_json(value: &Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("json"));
}

/// JSON has no infinity; identical images report PSNR as the string "inf".
fn number(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else if v > 0.0 {
        json!("inf")
    } else {
        json!(null)
    }
}

fn score_json(s: &SetScore) -> Value {
    json!({
        "mean_psnr": number(s.mean_psnr),
        "mean_ssim": number(s.mean_ssim),
        "views": s.views.iter().map(|v| json!({"name": v.name, "psnr": number(v.psnr), "ssim": number(v.ssim)})).collect::<Vec<_>>(),
    })
}

#[derive(Deserialize)]
struct Transforms {
    camera_angle_x: f64,
    frames: Vec<Frame>,
}

#[derive(Deserialize)]
struct Frame {
    file_path: String,
    transform_matrix: [[f64; 4]; 4],
}

fn render(
    checkpoint: &Path,
    ray_checkpoint: Option<&Path>,
    poses: &Path,
    out: &Path,
    (width, height, samples): (usize, usize, usize),
) -> anyhow::Result<()> {
    let (field, bounds) = load_point_field(checkpoint)?;
    let ray = ray_checkpoint.map(load_ray_field).transpose()?;
    let text = fs::read_to_string(poses).with_context(|| format!("reading {}", poses.display()))?;
    let transforms: Transforms = serde_json::from_str(&text).with_context(|| format!("parsing {}", poses.display()))?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let intr = Intrinsics::from_camera_angle_x(width, height, transforms.camera_angle_x);
    let settings = RenderSettings {
        samples,
        guide: ray.as_ref().map(|r| (r, DepthGuidedConfig::default())),
    };
    let mut written = Vec::new();
    for frame in &transforms.frames {
        let m = frame.transform_matrix;
        let pose = Matrix4::from_fn(|r, c| m[r][c]);
        let (img, depth) = render_view(&field, &pose, &intr, &bounds, settings)?;
        let stem = Path::new(&frame.file_path)
            .file_name()
            .and_then(|s| s.to_str())
            .map(|s| s.trim_end_matches(".png").to_string())
            .unwrap_or_else(|| format!("view_{}", written.len()));
        write_png(&out.join(format!("{stem}.png")), &img)?;
        write_depth(&out.join(format!("{stem}.depth")), &depth)?;
        written.push(stem);
    }
    print_json(&json!({ "rendered": written }));
    Ok(())
}

fn eval(renders: &Path, gt: &Path, out: Option<&Path>) -> anyhow::Result<()> {
    let mut names: Vec<String> = fs::read_dir(renders)
        .with_context(|| format!("reading {}", renders.display()))?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".png"))
        .collect();
    names.sort();
    if names.is_empty() {
        bail!(HaloError::InvalidInput(format!("no PNG renders in {}", renders.display())));
    }
    let mut views = Vec::with_capacity(names.len());
    for n in &names {
        let pred = read_png(&renders.join(n))?;
        let truth = read_png(&gt.join(n))?;
        views.push(score_pair(n, &pred, &truth)?);
    }
    let report = score_json(&SetScore::from_views(views));
    if let Some(p) = out {
        fs::write(p, serde_json::to_string_pretty(&report)? + "\n").with_context(|| format!("writing {}", p.display()))?;
    }
    print_json(&report);
    Ok(())
}

fn toy2d(out: &Path, experiment: ToyExperiment, iterations: usize, extrap_iterations: usize, seed: u64, repeats: u64) -> anyhow::Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut report = serde_json::Map::new();
    if experiment != ToyExperiment::Extrapolate {
        let source = detail_image(64, seed);
        write_png(&out.join("source.png"), &source)?;
        let cfg = ToyConfig {
            iterations,
            seed,
            ..Default::default()
        };
        let mut rows = Vec::new();
        for (name, enc) in [("low", toy_low()), ("high", toy_high())] {
            let fit = fit_image_field(&source, None, &enc, &cfg)?;
            let rep = interpolate_experiment(&fit.field, &source, 4)?;
            write_png(&out.join(format!("interpolate_{name}.png")), &rep.upsampled)?;
            rows.push(json!({
                "config": name,
                "encoding": enc.label(),
                "train_psnr": number(fit.train_psnr),
                "residual_hf_ratio": rep.residual_hf_ratio,
            }));
        }
        report.insert("interpolation".into(), Value::Array(rows));
    }
    if experiment != ToyExperiment::Interpolate {
        let pattern = CheckerSpec { size: 64, cells: 8 };
        let mask = MaskRect::corner(64, 1.0 / 16.0);
        let mut rows = Vec::new();
        for s in seed..seed + repeats {
            let cfg = ToyConfig {
                iterations: extrap_iterations,
                seed: s,
                ..Default::default()
            };
            let res = extrapolate_experiment(&pattern, &mask, &[toy_low(), toy_high()], &cfg)?;
            rows.push(json!({
                "seed": s,
                "low_accuracy": res[0].masked_accuracy,
                "high_accuracy": res[1].masked_accuracy,
                "low_train_psnr": number(res[0].train_psnr),
                "high_train_psnr": number(res[1].train_psnr),
            }));
        }
        report.insert("extrapolation".into(), Value::Array(rows));
    }
    let report = Value::Object(report);
    fs::write(out.join("toy2d.json"), serde_json::to_string_pretty(&report)? + "\n")?;
    print_json(&report);
    Ok(())
}

fn init_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("HALO_NUM_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| HaloError::InvalidConfig(format!("HALO_NUM_THREADS={v:?} is not a thread count")))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    init_threads()?;
    match cli.command {
        Command::TuneFreq(args) => {
            let cfg = load_config(&args)?;
            let report = Pipeline::new(cfg, &args.out, false)?.tune()?;
            print_json(&serde_json::to_value(report)?);
        }
        Command::Train { run, stage, resume } => {
            let cfg = load_config(&run)?;
            let report = Pipeline::new(cfg, &run.out, resume)?.run_stage(stage.into())?;
            print_json(&serde_json::to_value(report)?);
        }
        Command::Render {
            checkpoint,
            ray_checkpoint,
            poses,
            out,
            width,
            height,
            samples,
        } => render(&checkpoint, ray_checkpoint.as_deref(), &poses, &out, (width, height, samples))?,
        Command::Eval { renders, gt, out } => eval(&renders, &gt, out.as_deref())?,
        Command::Toy2d {
            out,
            experiment,
            iterations,
            extrapolation_iterations,
            seed,
            repeats,
        } => toy2d(&out, experiment, iterations, extrapolation_iterations, seed, repeats)?,
    }
    Ok(())
}

fn error_line(err: &anyhow::Error) -> String {
    let kind = err.downcast_ref::<HaloError>().map_or("error", HaloError::kind);
    let message = err.chain().map(|e| e.to_string()).collect::<Vec<_>>().join(": ");
    json!({ "error": { "kind": kind, "message": message } }).to_string()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_line(&e));
            ExitCode::FAILURE
        }
    }
}

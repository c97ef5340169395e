use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use polyinsert_cli::{parse_config, Config, Overrides};
use polyinsert_core::adaptivecrop;
use polyinsert_core::attention::{attention_weights, mma, TokenMatrix};
use polyinsert_core::backend::{run_pipeline, Guidance, HttpBackend, MockServer, PipelineConfig, PipelineInputs};
use polyinsert_core::datasetforge::{self, ExpectedCounts, FrameScore};
use polyinsert_core::imagecore::{Image, Mask, Rect};
use polyinsert_core::maskgen::{self, DILATION_REFERENCE_RESOLUTION};
use polyinsert_core::metrics::{self, EvalOptions, FeatureSet};
use polyinsert_core::promptkit::PromptTemplate;
use polyinsert_core::rng::SplitMix64;

const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (protocol insert/v1)");

#[derive(Parser, Debug)]
#[command(name = "polyinsert", version = VERSION, about = "Reference-based image insertion toolkit", allow_negative_numbers = true)]
struct Cli {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Debug)]
struct ConfigArgs {
    /// key=value file with defaults for the options below
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    beta: Option<f64>,
    #[arg(long = "t", global = true)]
    t: Option<f64>,
    #[arg(long, global = true)]
    target_resolution: Option<u32>,
    #[arg(long, global = true)]
    steps: Option<u32>,
    /// Segmentation dilation radius at 768 px
    #[arg(long, global = true)]
    dilation_radius: Option<usize>,
    #[arg(long, global = true)]
    max_angle: Option<f64>,
    #[arg(long, global = true)]
    endpoint: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Generate a box, Bezier-augmented or dilated mask
    Maskgen(MaskgenArgs),
    /// Plan and apply the adaptive crop-and-zoom
    Crop(CropArgs),
    /// Render a prompt template
    Prompt(PromptArgs),
    /// Dataset construction helpers
    #[command(subcommand)]
    Dataset(DatasetCmd),
    /// Score generated images against ground truth
    Eval(EvalArgs),
    /// Run the deterministic mock backend
    ServeMock(ServeArgs),
    /// Run one insertion against a backend
    Insert(InsertArgs),
    /// Check the attention kernel's invariants
    Selftest(SelftestArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum KindArg {
    Box,
    Bezier,
    Dilate,
}

#[derive(Args, Debug)]
struct MaskgenArgs {
    #[arg(long, value_parser = parse_rect, value_name = "X,Y,W,H")]
    rect: Option<Rect>,
    #[arg(long, value_parser = parse_size, value_name = "WxH")]
    size: Option<(usize, usize)>,
    /// Region mask; its bbox replaces --rect, and dilate needs it
    #[arg(long)]
    mask: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "box")]
    kind: KindArg,
    /// Dilation radius in pixels (default: --dilation-radius scaled to the mask size)
    #[arg(long)]
    radius: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct CropArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    mask: PathBuf,
    /// Working resolution (default: square --target-resolution)
    #[arg(long, value_parser = parse_size, value_name = "WxH")]
    target: Option<(usize, usize)>,
    /// Write the plan here instead of stdout
    #[arg(long)]
    emit_plan: Option<PathBuf>,
    #[arg(long)]
    out_image: Option<PathBuf>,
    #[arg(long)]
    out_mask: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PromptKind {
    Triptych,
    Replace,
    Add,
}

#[derive(Args, Debug)]
struct PromptArgs {
    #[arg(long, value_enum)]
    kind: PromptKind,
    #[arg(long, default_value = "")]
    label: String,
    #[arg(long, default_value = "")]
    instruction: String,
    #[arg(long, default_value = "")]
    source: String,
    #[arg(long, default_value = "")]
    reference: String,
}

#[derive(Subcommand, Debug)]
enum DatasetCmd {
    /// Laplacian variance of each frame plus the blur threshold
    ScoreBlur {
        #[arg(required = true)]
        frames: Vec<PathBuf>,
    },
    /// Pick the start/end keyframes from a JSONL of frame scores
    PairFrames {
        #[arg(long)]
        scores: PathBuf,
        /// Defaults to the max variance of the first 10 frames
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Non-overlapping (i, i+stride) view pairs
    SampleViews {
        #[arg(long)]
        n_views: usize,
        #[arg(long)]
        stride: usize,
    },
    /// Union of before/after garment masks
    CombineMasks {
        #[arg(long)]
        src_mask: PathBuf,
        #[arg(long)]
        tgt_mask: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a JSONL manifest and report counts
    Validate {
        #[arg(long)]
        manifest: PathBuf,
        /// Expected count, e.g. mask=120 or text.garment=22
        #[arg(long = "expect", value_name = "KEY=N")]
        expect: Vec<String>,
    },
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, requires = "features_b")]
    features_a: Option<PathBuf>,
    #[arg(long, requires = "features_a")]
    features_b: Option<PathBuf>,
    /// Report path (default: stdout)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Score only the masked region
    #[arg(long)]
    mask_local: bool,
}

#[derive(Args, Debug)]
struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Mask,
    Text,
}

#[derive(Args, Debug)]
struct InsertArgs {
    #[arg(long, value_enum)]
    mode: ModeArg,
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long)]
    ref_mask: PathBuf,
    #[arg(long)]
    src: PathBuf,
    #[arg(long)]
    mask: Option<PathBuf>,
    #[arg(long)]
    label: Option<String>,
    #[arg(long)]
    instruction: Option<String>,
    #[arg(long)]
    out: PathBuf,
    /// Request timeout in seconds
    #[arg(long, default_value_t = 120)]
    timeout: u64,
}

#[derive(Args, Debug)]
struct SelftestArgs {
    #[arg(long, default_value_t = 200)]
    instances: usize,
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or("expected WxH")?;
    let w: usize = w.trim().parse().map_err(|_| format!("bad width `{w}`"))?;
    let h: usize = h.trim().parse().map_err(|_| format!("bad height `{h}`"))?;
    if w == 0 || h == 0 {
        return Err("sizes must be positive".into());
    }
    Ok((w, h))
}

fn parse_rect(s: &str) -> Result<Rect, String> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse().map_err(|_| format!("bad rect component `{p}`")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [x, y, w, h] => Ok(Rect::new(x, y, w, h)),
        _ => Err("expected X,Y,W,H".into()),
    }
}

enum Failure {
    Usage(anyhow::Error),
    Domain(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Domain(e)
    }
}

macro_rules! usage {
    ($($t:tt)*) => { return Err(Failure::Usage(anyhow::anyhow!($($t)*))) };
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = command_name(&cli.cmd);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("polyinsert {name}: usage: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Domain(e)) => {
            eprintln!("polyinsert {name}: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn command_name(cmd: &Cmd) -> &'static str {
    match cmd {
        Cmd::Maskgen(_) => "maskgen",
        Cmd::Crop(_) => "crop",
        Cmd::Prompt(_) => "prompt",
        Cmd::Dataset(_) => "dataset",
        Cmd::Eval(_) => "eval",
        Cmd::ServeMock(_) => "serve-mock",
        Cmd::Insert(_) => "insert",
        Cmd::Selftest(_) => "selftest",
    }
}

fn load_config(args: &ConfigArgs) -> Result<Config, Failure> {
    let file = match &args.config {
        Some(p) => Some(
            fs::read_to_string(p)
                .with_context(|| format!("--config {}", p.display()))
                .map_err(Failure::Usage)?,
        ),
        None => None,
    };
    let flags = Overrides {
        beta: args.beta,
        t: args.t,
        target_resolution: args.target_resolution,
        steps: args.steps,
        dilation_radius: args.dilation_radius,
        max_angle: args.max_angle,
        endpoint: args.endpoint.clone(),
        seed: args.seed,
    };
    parse_config(&flags, file.as_deref()).map_err(|e| Failure::Usage(e.into()))
}

/// Seed for randomized subcommands; CI runs must pin it.
fn require_seed(cfg: &Config) -> Result<u64, Failure> {
    match cfg.seed {
        Some(s) => Ok(s),
        None if std::env::var("CI").is_ok_and(|v| v == "1") => usage!("--seed is required when CI=1"),
        None => Ok(0),
    }
}

fn run(cli: Cli) -> CmdResult {
    let cfg = load_config(&cli.cfg)?;
    match cli.cmd {
        Cmd::Maskgen(a) => maskgen_cmd(a, &cfg),
        Cmd::Crop(a) => crop_cmd(a, &cfg),
        Cmd::Prompt(a) => prompt_cmd(a),
        Cmd::Dataset(d) => dataset_cmd(d, &cfg),
        Cmd::Eval(a) => eval_cmd(a),
        Cmd::ServeMock(a) => serve_cmd(a),
        Cmd::Insert(a) => insert_cmd(a, &cfg),
        Cmd::Selftest(a) => selftest_cmd(a, &cfg),
    }
}

fn write_json(path: Option<&Path>, value: &impl serde::Serialize) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match path {
        Some(p) => fs::write(p, text + "\n").with_context(|| format!("writing {}", p.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn maskgen_cmd(a: MaskgenArgs, cfg: &Config) -> CmdResult {
    let region = match &a.mask {
        Some(p) => Some(Mask::load_png(p).with_context(|| format!("reading {}", p.display()))?),
        None => None,
    };
    let (w, h) = match (a.size, &region) {
        (Some(s), _) => s,
        (None, Some(m)) => m.dims(),
        (None, None) => usage!("--size is required without --mask"),
    };
    let radius = a.radius.unwrap_or_else(|| {
        (cfg.dilation_radius as f64 * w.max(h) as f64 / DILATION_REFERENCE_RESOLUTION as f64).round() as usize
    });
    let out = match (a.kind, region) {
        (KindArg::Dilate, Some(region)) if a.rect.is_none() => {
            maskgen::dilate(&region, radius)
        }
        (kind, region) => {
            let rect = match (a.rect, &region) {
                (Some(r), _) => r,
                (None, Some(m)) => maskgen::bbox_of(m).context("region mask")?,
                (None, None) => usage!("--rect or --mask is required"),
            };
            let boxed = maskgen::box_mask(rect, w, h).context("box mask")?;
            match kind {
                KindArg::Box => boxed,
                KindArg::Bezier => maskgen::bezier_augment(rect, w, h, require_seed(cfg)?).context("bezier augmentation")?,
                KindArg::Dilate => maskgen::dilate(&boxed, radius),
            }
        }
    };
    out.save_png(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    Ok(())
}

fn crop_cmd(a: CropArgs, cfg: &Config) -> CmdResult {
    let src = Image::load_png(&a.image).with_context(|| format!("reading {}", a.image.display()))?;
    let m = Mask::load_png(&a.mask).with_context(|| format!("reading {}", a.mask.display()))?;
    let res = cfg.target_resolution as usize;
    let (tw, th) = a.target.unwrap_or((res, res));
    let plan = adaptivecrop::plan_crop(&src, &m, cfg.beta, cfg.t, tw, th).context("plan")?;
    if a.out_image.is_some() || a.out_mask.is_some() {
        let (img, mask) = adaptivecrop::apply_crop(&src, &m, &plan).context("apply")?;
        if let Some(p) = &a.out_image {
            img.save_png(p).with_context(|| format!("writing {}", p.display()))?;
        }
        if let Some(p) = &a.out_mask {
            mask.save_png(p).with_context(|| format!("writing {}", p.display()))?;
        }
    }
    write_json(a.emit_plan.as_deref(), &plan)?;
    Ok(())
}

fn prompt_cmd(a: PromptArgs) -> CmdResult {
    let t = match a.kind {
        PromptKind::Triptych => PromptTemplate::TriptychEdit { label: a.label, instruction: a.instruction },
        PromptKind::Replace => PromptTemplate::ReplaceInstruction { source_name: a.source, reference_name: a.reference },
        PromptKind::Add => PromptTemplate::AddInstruction { label: a.label },
    };
    let text = t.render().map_err(|e| Failure::Usage(e.into()))?;
    println!("{text}");
    Ok(())
}

fn dataset_cmd(d: DatasetCmd, cfg: &Config) -> CmdResult {
    match d {
        DatasetCmd::ScoreBlur { frames } => {
            let variances: Vec<f64> = frames
                .iter()
                .map(|p| {
                    Image::load_png(p)
                        .with_context(|| format!("reading {}", p.display()))
                        .map(|img| datasetforge::laplacian_variance(&img))
                })
                .collect::<anyhow::Result<_>>()?;
            let threshold = datasetforge::blur_threshold(&variances).context("threshold")?;
            write_json(None, &serde_json::json!({ "variances": variances, "threshold": threshold }))?;
        }
        DatasetCmd::PairFrames { scores, threshold } => {
            let text = fs::read_to_string(&scores).with_context(|| format!("reading {}", scores.display()))?;
            let frames: Vec<FrameScore> = text
                .lines()
                .enumerate()
                .filter(|(_, l)| !l.trim().is_empty())
                .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{} line {}", scores.display(), i + 1)))
                .collect::<anyhow::Result<_>>()?;
            let threshold = match threshold {
                Some(t) => t,
                None => {
                    let v: Vec<f64> = frames.iter().map(|f| f.laplacian_variance).collect();
                    datasetforge::blur_threshold(&v).context("threshold")?
                }
            };
            let (start, end) = datasetforge::select_keyframe_pair(&frames, threshold, cfg.max_angle).context("pairing")?;
            write_json(None, &serde_json::json!({ "start": start, "end": end, "threshold": threshold }))?;
        }
        DatasetCmd::SampleViews { n_views, stride } => {
            let pairs = datasetforge::interval_sample(n_views, stride).map_err(|e| Failure::Usage(e.into()))?;
            write_json(None, &pairs)?;
        }
        DatasetCmd::CombineMasks { src_mask, tgt_mask, out } => {
            let a = Mask::load_png(&src_mask).with_context(|| format!("reading {}", src_mask.display()))?;
            let b = Mask::load_png(&tgt_mask).with_context(|| format!("reading {}", tgt_mask.display()))?;
            let u = datasetforge::combine_shapechange_masks(&a, &b).context("combine")?;
            u.save_png(&out).with_context(|| format!("writing {}", out.display()))?;
        }
        DatasetCmd::Validate { manifest, expect } => {
            let mut expected = ExpectedCounts::new();
            for e in &expect {
                let Some((k, v)) = e.split_once('=') else { usage!("--expect {e}: expected KEY=N") };
                let Ok(n) = v.trim().parse::<usize>() else { usage!("--expect {e}: `{v}` is not a count") };
                expected.insert(k.trim().to_owned(), n);
            }
            let report = datasetforge::validate_manifest(&manifest, (!expected.is_empty()).then_some(&expected))
                .with_context(|| format!("validating {}", manifest.display()))?;
            write_json(None, &report)?;
            if !report.is_clean() {
                return Err(anyhow!(
                    "{} violation(s), {} failed expectation(s)",
                    report.violations.len(),
                    report.expectation_failures.len()
                )
                .into());
            }
        }
    }
    Ok(())
}

fn eval_cmd(a: EvalArgs) -> CmdResult {
    let features = match (&a.features_a, &a.features_b) {
        (Some(fa), Some(fb)) => Some((
            FeatureSet::load(fa).with_context(|| format!("reading {}", fa.display()))?,
            FeatureSet::load(fb).with_context(|| format!("reading {}", fb.display()))?,
        )),
        _ => None,
    };
    let opts = EvalOptions { mask_local: a.mask_local, features };
    let report = metrics::evaluate_manifest(&a.manifest, &opts).with_context(|| format!("evaluating {}", a.manifest.display()))?;
    for e in &report.errors {
        eprintln!("polyinsert eval: line {}: {}", e.line, e.message);
    }
    write_json(a.out.as_deref(), &report)?;
    Ok(())
}

fn serve_cmd(a: ServeArgs) -> CmdResult {
    let addr = format!("{}:{}", a.host, a.port)
        .parse()
        .map_err(|e| Failure::Usage(anyhow::anyhow!("--host/--port: {e}")))?;
    let server = MockServer::start(addr).context("binding")?;
    eprintln!("mock backend listening on {}", server.url());
    server.wait();
    Ok(())
}

fn insert_cmd(a: InsertArgs, cfg: &Config) -> CmdResult {
    let seed = require_seed(cfg)?;
    let guidance = match a.mode {
        ModeArg::Mask => {
            let Some(p) = &a.mask else { usage!("--mode mask needs --mask") };
            Guidance::Mask(Mask::load_png(p).with_context(|| format!("reading {}", p.display()))?)
        }
        ModeArg::Text => match (a.label, a.instruction) {
            (Some(label), Some(instruction)) => Guidance::Text { label, instruction },
            _ => usage!("--mode text needs --label and --instruction"),
        },
    };
    let reference = Image::load_png(&a.reference).with_context(|| format!("reading {}", a.reference.display()))?;
    let ref_mask = Mask::load_png(&a.ref_mask).with_context(|| format!("reading {}", a.ref_mask.display()))?;
    let source = Image::load_png(&a.src).with_context(|| format!("reading {}", a.src.display()))?;
    let backend = HttpBackend::new(&cfg.endpoint, Duration::from_secs(a.timeout)).context("client")?;
    let res = cfg.target_resolution as usize;
    let pcfg = PipelineConfig { beta: cfg.beta, t: cfg.t, target_w: res, target_h: res, steps: cfg.steps, seed };
    let inputs = PipelineInputs { reference: &reference, reference_mask: &ref_mask, source: &source, guidance };
    // the stage label already carries the cause chain
    let out = run_pipeline(&inputs, &pcfg, &backend).map_err(|e| anyhow!("{e}"))?;
    out.save_png(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    Ok(())
}

fn selftest_cmd(a: SelftestArgs, cfg: &Config) -> CmdResult {
    let mut rng = SplitMix64::new(require_seed(cfg)?);
    let rows = |rng: &mut SplitMix64, n: usize, d: usize, amp: f64| -> Vec<Vec<f64>> {
        (0..n).map(|_| (0..d).map(|_| rng.symmetric(amp)).collect()).collect()
    };
    let tm = |r: &[Vec<f64>]| TokenMatrix::from_rows(r).expect("finite rows");
    let (mut row_sum, mut naive, mut perm, mut shift, mut hull) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..a.instances {
        let nq = 1 + rng.range_inclusive(0, 15) as usize;
        let nk = 1 + rng.range_inclusive(0, 15) as usize;
        let d = 1 + rng.range_inclusive(0, 7) as usize;
        let dv = 1 + rng.range_inclusive(0, 7) as usize;
        let (q, k, v) = (rows(&mut rng, nq, d, 3.0), rows(&mut rng, nk, d, 3.0), rows(&mut rng, nk, dv, 5.0));
        let w = attention_weights(&tm(&q), &tm(&k)).context("weights")?;
        let out = mma(&tm(&q), &tm(&k), &tm(&v)).context("mma")?;
        for (i, qi) in q.iter().enumerate() {
            row_sum = row_sum.max((w.row(i).iter().sum::<f64>() - 1.0).abs());
            let e: Vec<f64> = k
                .iter()
                .map(|kj| (qi.iter().zip(kj).map(|(x, y)| x * y).sum::<f64>() / (d as f64).sqrt()).exp())
                .collect();
            let z: f64 = e.iter().sum();
            for (j, ej) in e.iter().enumerate() {
                naive = naive.max((w.get(i, j) - ej / z).abs());
            }
            for c in 0..dv {
                let lo = v.iter().map(|r| r[c]).fold(f64::INFINITY, f64::min);
                let hi = v.iter().map(|r| r[c]).fold(f64::NEG_INFINITY, f64::max);
                hull = hull.max(lo - out.get(i, c)).max(out.get(i, c) - hi);
            }
        }
        let order: Vec<usize> = (0..nk).rev().collect();
        let kp: Vec<_> = order.iter().map(|&i| k[i].clone()).collect();
        let vp: Vec<_> = order.iter().map(|&i| v[i].clone()).collect();
        let out_p = mma(&tm(&q), &tm(&kp), &tm(&vp)).context("mma")?;
        let c = rng.symmetric(4.0);
        let ks: Vec<Vec<f64>> = k.iter().map(|r| r.iter().map(|x| x + c).collect()).collect();
        let out_s = mma(&tm(&q), &tm(&ks), &tm(&v)).context("mma")?;
        for ((x, y), z) in out.values().iter().zip(out_p.values()).zip(out_s.values()) {
            perm = perm.max((x - y).abs());
            shift = shift.max((x - z).abs());
        }
    }
    let hull = hull.max(0.0);
    println!("instances {}", a.instances);
    println!("row_sum_deviation {row_sum:.3e}");
    println!("naive_softmax_deviation {naive:.3e}");
    println!("key_permutation_deviation {perm:.3e}");
    println!("logit_shift_deviation {shift:.3e}");
    println!("value_hull_excess {hull:.3e}");
    let worst = row_sum.max(naive).max(perm).max(shift).max(hull);
    if worst > 1e-9 {
        return Err(anyhow!("attention invariants violated: max deviation {worst:e}").into());
    }
    Ok(())
}

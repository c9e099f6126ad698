//! The `flowtruth` command line.
//!
//! Exit codes: 0 success, 1 usage, 2 input or data error, 3 numeric failure.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::buffer::{BoolMask, ImageBuffer};
use crate::config::{Lambdas, RunConfig};
use crate::degrade::{apply_degradation, sample_degradation, DegradationSpec};
use crate::error::Error;
use crate::estimator::{cost_to_confidence, estimate_flow, MatchParams};
use crate::io::{flow_to_rgb, load_flo, read_image, save_flo, write_atomic, write_image, write_report};
use crate::metrics::{fb_valid_mask, flow_metrics, FbParams, MetricsReport};
use crate::motion::MotionBank;
use crate::pipeline::recover_frames;
use crate::reversal::{drop_first, fuse, recovery_eval, RecoverySet};
use crate::sim::{simulate_video, FrameMeta};
use crate::template::{
    amplitude_for_psnr, decode, embed, embedding_fidelity, generate_template, ncc, reference, to_rgb, TemplateSpec,
};

pub const SEED_ENV: &str = "FLOWTRUTH_SEED";

#[derive(Debug, Parser)]
#[command(name = "flowtruth", version, about = "Template-guided motion forensics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML run configuration; flags override it.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Run seed. Falls back to $FLOWTRUTH_SEED, then the config, then 0.
    #[arg(long, env = SEED_ENV)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args, Default)]
pub struct MatchArgs {
    /// Patch side in px (odd).
    #[arg(long)]
    pub patch: Option<usize>,
    /// Pyramid levels.
    #[arg(long)]
    pub levels: Option<usize>,
    /// Search radius per level in px.
    #[arg(long)]
    pub radius: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Embed the seed's template into an image.
    Embed {
        #[arg(long = "in", value_name = "PNG")]
        input: Option<PathBuf>,
        #[arg(long = "out", value_name = "PNG")]
        output: Option<PathBuf>,
        /// Target embedding PSNR in dB; sets the amplitude.
        #[arg(long, conflicts_with = "amplitude")]
        psnr: Option<f64>,
        /// Template amplitude in intensity units.
        #[arg(long)]
        amplitude: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Decode the template from an image and correlate it with the seed's.
    Decode {
        #[arg(long = "in", value_name = "PNG")]
        input: Option<PathBuf>,
        /// Where to write the decoded residual as an image.
        #[arg(long = "out", value_name = "PNG")]
        output: Option<PathBuf>,
        /// Where to write the JSON report (also printed).
        #[arg(long, value_name = "JSON")]
        report: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Simulate image-to-video frames from a marked image.
    Simulate {
        #[arg(long = "in", value_name = "PNG")]
        input: Option<PathBuf>,
        /// Output directory; created if missing.
        #[arg(long = "out", value_name = "DIR")]
        output: Option<PathBuf>,
        #[arg(long, default_value_t = 8)]
        frames: usize,
        /// Motion bank TOML; overrides the config's bank.
        #[arg(long, value_name = "FILE")]
        bank: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Estimate the motion of a frame relative to the seed's template.
    Estimate {
        #[arg(long = "in", value_name = "PNG")]
        input: Option<PathBuf>,
        #[arg(long = "out", value_name = "FLO")]
        output: Option<PathBuf>,
        /// Where to write the confidence map as a grayscale image.
        #[arg(long, value_name = "PNG")]
        confidence: Option<PathBuf>,
        #[command(flatten)]
        matching: MatchArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Warp frames back to the source and fuse them by confidence.
    Reverse {
        /// Frames in temporal order.
        #[arg(long = "in", value_name = "PNG", num_args = 1.., required = true)]
        input: Vec<PathBuf>,
        #[arg(long = "out", value_name = "PNG")]
        output: Option<PathBuf>,
        /// Fraction of leading frames to drop before fusing.
        #[arg(long, default_value_t = 0.0)]
        drop: f64,
        /// Marked source to score the recovery against.
        #[arg(long, value_name = "PNG")]
        source: Option<PathBuf>,
        /// Where to write the JSON recovery report (also printed).
        #[arg(long, value_name = "JSON", requires = "source")]
        report: Option<PathBuf>,
        /// Where to write the fusion support mask.
        #[arg(long, value_name = "PNG")]
        support: Option<PathBuf>,
        #[command(flatten)]
        matching: MatchArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Flow accuracy report of a prediction against ground truth.
    Metrics {
        #[arg(long, value_name = "FLO")]
        pred: PathBuf,
        #[arg(long, value_name = "FLO")]
        gt: PathBuf,
        /// Forward flow for the consistency mask.
        #[arg(long, value_name = "FLO", requires = "bwd")]
        fwd: Option<PathBuf>,
        /// Backward flow for the consistency mask.
        #[arg(long, value_name = "FLO", requires = "fwd")]
        bwd: Option<PathBuf>,
        /// Validity mask image; nonzero pixels are valid.
        #[arg(long, value_name = "PNG")]
        mask: Option<PathBuf>,
        #[arg(long, default_value = "sample")]
        sample: String,
        /// Where to write the JSON report (also printed).
        #[arg(long = "out", value_name = "JSON")]
        output: Option<PathBuf>,
    },
    /// Apply one degradation, given or drawn from the seed.
    Degrade {
        #[arg(long = "in", value_name = "PNG")]
        input: Option<PathBuf>,
        #[arg(long = "out", value_name = "PNG")]
        output: Option<PathBuf>,
        #[arg(long, requires = "value")]
        kind: Option<DegradeKind>,
        /// Strength: quality, std (8-bit units), radius, kernel size, ratio or factor.
        #[arg(long, requires = "kind")]
        value: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Render a flow field with the color wheel.
    Viz {
        #[arg(long, value_name = "FLO")]
        flow: PathBuf,
        #[arg(long = "out", value_name = "PNG")]
        output: PathBuf,
        /// Magnitude mapped to full saturation; defaults to the field's maximum.
        #[arg(long)]
        max_mag: Option<f32>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DegradeKind {
    Jpeg,
    GaussNoise,
    GaussBlur,
    MedianBlur,
    ResizeRecover,
    Brightness,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Run(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Run(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Run(Error::Io(e))
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Run(e) if e.is_numeric() => 3,
            CliError::Run(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Run(e) => write!(f, "{e}"),
        }
    }
}

type CliResult<T = ()> = std::result::Result<T, CliError>;

/// Settings resolved from flags, environment and config.
struct Ctx {
    seed: u64,
    cfg: RunConfig,
}

impl Ctx {
    fn new(common: &Common) -> CliResult<Self> {
        let cfg = match &common.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let seed = common.seed.or(cfg.seed).unwrap_or(0);
        Ok(Ctx { seed, cfg })
    }

    fn spec(&self) -> TemplateSpec {
        self.cfg.template.spec(self.seed)
    }

    fn input(&self, flag: Option<PathBuf>) -> CliResult<PathBuf> {
        flag.or_else(|| self.cfg.paths.input.clone())
            .ok_or_else(|| CliError::Usage("--in is required (flag or [paths] in)".into()))
    }

    fn output(&self, flag: Option<PathBuf>) -> CliResult<PathBuf> {
        flag.or_else(|| self.cfg.paths.output.clone())
            .ok_or_else(|| CliError::Usage("--out is required (flag or [paths] out)".into()))
    }

    fn matching(&self, m: &MatchArgs) -> CliResult<MatchParams> {
        let d = self.cfg.matching;
        let p = MatchParams {
            patch: m.patch.unwrap_or(d.patch),
            levels: m.levels.unwrap_or(d.levels),
            radius: m.radius.unwrap_or(d.radius),
        };
        p.validate()?;
        Ok(p)
    }
}

fn json_line<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("serializable");
    out.push(b'\n');
    out
}

/// Prints `bytes` and, if asked, also writes them to `path`.
fn emit(bytes: &[u8], path: Option<&Path>) -> CliResult {
    use std::io::Write;
    if let Some(p) = path {
        write_atomic(p, bytes)?;
    }
    std::io::stdout().write_all(bytes)?;
    Ok(())
}

/// Prefixes I/O and parse failures with the file they concern.
fn at<T>(path: &Path, r: crate::error::Result<T>) -> CliResult<T> {
    r.map_err(|e| match e {
        Error::Io(io) => Error::Io(std::io::Error::new(io.kind(), format!("{}: {io}", path.display()))),
        Error::Parse { field, reason } => Error::Parse { field, reason: format!("{}: {reason}", path.display()) },
        other => other,
    })
    .map_err(CliError::from)
}

fn read_img(path: &Path) -> CliResult<ImageBuffer> {
    at(path, read_image(path))
}

fn read_rgb(path: &Path) -> CliResult<ImageBuffer> {
    Ok(to_rgb(&read_img(path)?)?)
}

fn read_flo(path: &Path) -> CliResult<crate::buffer::FlowField> {
    at(path, load_flo(path))
}

fn mask_image(mask: &BoolMask) -> ImageBuffer {
    let (h, w) = mask.dims();
    ImageBuffer::from_fn(1, h, w, |_, y, x| if mask.get(y, x) { 1.0 } else { 0.0 })
}

fn read_mask(path: &Path) -> CliResult<BoolMask> {
    let img = read_img(path)?;
    let (h, w) = img.dims();
    Ok(BoolMask::from_fn(h, w, |y, x| (0..img.channels()).any(|c| img.get(c, y, x) > 0.0)))
}

#[derive(Serialize)]
struct EmbedReport {
    seed: u64,
    amplitude: f64,
    psnr: Option<f64>,
    identical: bool,
    ssim: f64,
    lambdas: Lambdas,
}

#[derive(Serialize)]
struct DecodeReport {
    seed: u64,
    ncc: f64,
}

#[derive(Serialize)]
struct SimManifest {
    seed: u64,
    frames: usize,
    lambdas: Lambdas,
    meta: Vec<FrameMeta>,
}

fn cmd_embed(ctx: Ctx, input: Option<PathBuf>, output: Option<PathBuf>, psnr: Option<f64>, amplitude: Option<f64>) -> CliResult {
    let (input, output) = (ctx.input(input)?, ctx.output(output)?);
    let mut spec = ctx.spec();
    if let Some(db) = psnr {
        spec.amplitude = amplitude_for_psnr(db);
    }
    if let Some(a) = amplitude {
        spec.amplitude = a;
    }
    spec.validate()?;
    let cover = read_rgb(&input)?;
    let (h, w) = cover.dims();
    let t = generate_template(&spec, h, w)?;
    let marked = crate::io::quantize(&embed(&cover, &t, spec.amplitude)?);
    write_image(&output, &marked)?;
    let (p, ssim) = embedding_fidelity(&cover, &marked)?;
    let report = EmbedReport {
        seed: ctx.seed,
        amplitude: spec.amplitude,
        psnr: p.db(),
        identical: p.db().is_none(),
        ssim,
        lambdas: ctx.cfg.lambdas,
    };
    emit(&json_line(&report), None)
}

fn cmd_decode(ctx: Ctx, input: Option<PathBuf>, output: Option<PathBuf>, report: Option<PathBuf>) -> CliResult {
    let input = ctx.input(input)?;
    let spec = ctx.spec();
    spec.validate()?;
    let img = read_rgb(&input)?;
    let (h, w) = img.dims();
    let decoded = decode(&img, &spec)?;
    let expected = reference(&generate_template(&spec, h, w)?, &spec)?;
    let rho = ncc(&decoded, &expected)?;
    if let Some(out) = output {
        // Residual shown around mid-gray at ±4 template amplitudes.
        let k = (0.125 / spec.amplitude) as f32;
        write_image(out, &decoded.map(|v| 0.5 + k * v))?;
    }
    emit(&json_line(&DecodeReport { seed: ctx.seed, ncc: rho }), report.as_deref())
}

fn cmd_simulate(ctx: Ctx, input: Option<PathBuf>, output: Option<PathBuf>, frames: usize, bank: Option<PathBuf>) -> CliResult {
    let (input, output) = (ctx.input(input)?, ctx.output(output)?);
    if frames == 0 {
        return Err(CliError::Usage("--frames must be at least 1".into()));
    }
    let bank = match bank {
        Some(p) => at(&p, MotionBank::load(&p))?,
        None => ctx.cfg.bank.clone(),
    };
    let marked = read_rgb(&input)?;
    let video = simulate_video(&marked, &bank, frames, ctx.seed)?;
    std::fs::create_dir_all(&output)?;
    for f in &video {
        let i = f.meta.index;
        write_image(output.join(format!("frame_{i:04}.png")), &f.frame)?;
        save_flo(output.join(format!("flow_{i:04}.flo")), &f.gt_flow)?;
        write_image(output.join(format!("holes_{i:04}.png")), &mask_image(&f.holes))?;
    }
    let manifest = SimManifest {
        seed: ctx.seed,
        frames,
        lambdas: ctx.cfg.lambdas,
        meta: video.into_iter().map(|f| f.meta).collect(),
    };
    write_atomic(output.join("meta.json"), &json_line(&manifest))?;
    Ok(())
}

fn cmd_estimate(ctx: Ctx, input: Option<PathBuf>, output: Option<PathBuf>, confidence: Option<PathBuf>, m: MatchArgs) -> CliResult {
    let (input, output) = (ctx.input(input)?, ctx.output(output)?);
    let params = ctx.matching(&m)?;
    let spec = ctx.spec();
    spec.validate()?;
    let frame = read_rgb(&input)?;
    let (h, w) = frame.dims();
    let refr = reference(&generate_template(&spec, h, w)?, &spec)?;
    let est = estimate_flow(&refr, &decode(&frame, &spec)?, &params)?;
    if !est.flow.is_finite() {
        return Err(Error::NonFinite("estimated flow").into());
    }
    save_flo(&output, &est.flow)?;
    if let Some(p) = confidence {
        let conf = cost_to_confidence(&est.cost, &est.second_best_ratio)?;
        let img = ImageBuffer::from_planar(1, h, w, conf.data().iter().map(|&c| c as f32).collect())?;
        write_image(p, &img)?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_reverse(
    ctx: Ctx,
    input: Vec<PathBuf>,
    output: Option<PathBuf>,
    drop: f64,
    source: Option<PathBuf>,
    report: Option<PathBuf>,
    support: Option<PathBuf>,
    m: MatchArgs,
) -> CliResult {
    let output = ctx.output(output)?;
    let params = ctx.matching(&m)?;
    let spec = ctx.spec();
    spec.validate()?;
    let frames = input.iter().map(|p| read_rgb(p)).collect::<CliResult<Vec<_>>>()?;
    let (h, w) = frames[0].dims();
    for f in &frames {
        f.check_dims("frame", (h, w))?;
    }
    let refr = reference(&generate_template(&spec, h, w)?, &spec)?;
    let recovered = recover_frames(&frames, &refr, &spec, &params)?;
    let set = RecoverySet::new(recovered.into_iter().map(|r| r.recovered).collect())?;
    let fused = fuse(&drop_first(&set, drop)?)?;
    if fused.image.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("fused image").into());
    }
    write_image(&output, &fused.image)?;
    if let Some(p) = support {
        write_image(p, &mask_image(&fused.support))?;
    }
    if let Some(src) = source {
        let src = read_rgb(&src)?;
        let mut r = MetricsReport::empty(output.display().to_string());
        r.pixel_counts.valid = fused.support.count() as u64;
        r.recovery = Some(recovery_eval(&crate::io::quantize(&fused.image), &src, &fused.support)?);
        emit(&write_report(&r), report.as_deref())?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_metrics(
    pred: PathBuf,
    gt: PathBuf,
    fwd: Option<PathBuf>,
    bwd: Option<PathBuf>,
    mask: Option<PathBuf>,
    sample: String,
    output: Option<PathBuf>,
) -> CliResult {
    let (pred, gt) = (read_flo(&pred)?, read_flo(&gt)?);
    let (h, w) = gt.dims();
    let mut valid = BoolMask::filled(h, w, true);
    if let Some(p) = mask {
        let m = read_mask(&p)?;
        m.check_dims("mask", (h, w))?;
        valid = valid.and(&m);
    }
    if let (Some(f), Some(b)) = (fwd, bwd) {
        valid = valid.and(&fb_valid_mask(&read_flo(&f)?, &read_flo(&b)?, FbParams::default())?);
    }
    let report = flow_metrics(&pred, &gt, &valid, &sample)?;
    emit(&write_report(&report), output.as_deref())
}

fn degradation(kind: DegradeKind, value: f64) -> DegradationSpec {
    match kind {
        DegradeKind::Jpeg => DegradationSpec::Jpeg { quality: value.round().clamp(0.0, 255.0) as u8 },
        DegradeKind::GaussNoise => DegradationSpec::GaussNoise { std: value },
        DegradeKind::GaussBlur => DegradationSpec::GaussBlur { radius: value.round().clamp(0.0, 255.0) as u8 },
        DegradeKind::MedianBlur => DegradationSpec::MedianBlur { k: value.round().max(0.0) as usize },
        DegradeKind::ResizeRecover => DegradationSpec::ResizeRecover { ratio: value },
        DegradeKind::Brightness => DegradationSpec::Brightness { factor: value },
    }
}

fn cmd_degrade(ctx: Ctx, input: Option<PathBuf>, output: Option<PathBuf>, kind: Option<DegradeKind>, value: Option<f64>) -> CliResult {
    let (input, output) = (ctx.input(input)?, ctx.output(output)?);
    let spec = match (kind, value) {
        (Some(k), Some(v)) => degradation(k, v),
        _ => sample_degradation(ctx.seed),
    };
    spec.validate()?;
    let img = read_img(&input)?;
    write_image(&output, &apply_degradation(&img, &spec, ctx.seed)?)?;
    emit(&json_line(&spec), None)
}

fn cmd_viz(flow: PathBuf, output: PathBuf, max_mag: Option<f32>) -> CliResult {
    let flow = read_flo(&flow)?;
    if !flow.is_finite() {
        return Err(Error::NonFinite("flow").into());
    }
    write_image(output, &flow_to_rgb(&flow, max_mag))?;
    Ok(())
}

pub fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Embed { input, output, psnr, amplitude, common } => {
            cmd_embed(Ctx::new(&common)?, input, output, psnr, amplitude)
        }
        Command::Decode { input, output, report, common } => cmd_decode(Ctx::new(&common)?, input, output, report),
        Command::Simulate { input, output, frames, bank, common } => {
            cmd_simulate(Ctx::new(&common)?, input, output, frames, bank)
        }
        Command::Estimate { input, output, confidence, matching, common } => {
            cmd_estimate(Ctx::new(&common)?, input, output, confidence, matching)
        }
        Command::Reverse { input, output, drop, source, report, support, matching, common } => {
            cmd_reverse(Ctx::new(&common)?, input, output, drop, source, report, support, matching)
        }
        Command::Metrics { pred, gt, fwd, bwd, mask, sample, output } => {
            cmd_metrics(pred, gt, fwd, bwd, mask, sample, output)
        }
        Command::Degrade { input, output, kind, value, common } => {
            cmd_degrade(Ctx::new(&common)?, input, output, kind, value)
        }
        Command::Viz { flow, output, max_mag } => cmd_viz(flow, output, max_mag),
    }
}

/// Parses `args`, runs the command and maps the outcome to an exit code,
/// printing a one-line diagnostic on failure.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp
                | clap::error::ErrorKind::DisplayVersion
                | clap::error::ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("flowtruth: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

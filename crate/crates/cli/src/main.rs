//! `daylocus` command-line tool.
//!
//! Every flag can also be set through an environment variable named
//! `DAYLOCUS_<FLAG>` (upper case, dashes as underscores), for example
//! `DAYLOCUS_PROFILE=cam.profile daylocus estimate --image a.png`.
//! Exit status is 0 on success, 2 on usage errors and 1 on processing errors.

mod commands;
mod config;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "daylocus", version, about = "Daylight locus calibration, illuminant estimation, relighting and matte images")]
#[command(arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render a synthetic sphere scene, or a labelled dataset of them.
    RenderSynth(RenderArgs),
    /// Calibrate the specular-point locus and write a profile.
    Calibrate(CalibrateArgs),
    /// Estimate the illuminant of one image.
    Estimate(EstimateArgs),
    /// Relight an image to new colour temperatures.
    Relight(RelightArgs),
    /// Write a specular-free matte chromaticity image.
    Matte(MatteArgs),
    /// Angular-error evaluation over a dataset manifest.
    Eval(EvalArgs),
    /// Plot light chromaticities and the fitted locus (CSV + SVG).
    PlotLocus(PlotArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SensorKind {
    Delta,
    Gaussian,
}

#[derive(Args, Debug, Clone)]
pub struct SensorArgs {
    /// Camera sensor model.
    #[arg(long, value_enum, default_value_t = SensorKind::Delta, env = "DAYLOCUS_SENSORS")]
    pub sensors: SensorKind,
    /// Peak wavelengths in nm (red, green, blue).
    #[arg(long, value_delimiter = ',', default_values_t = [610.0, 540.0, 450.0], env = "DAYLOCUS_CENTRES")]
    pub centres: Vec<f64>,
    /// Gaussian sensor width in nm.
    #[arg(long, default_value_t = 30.0, env = "DAYLOCUS_SIGMA_NM")]
    pub sigma_nm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Depth {
    #[value(name = "8")]
    Eight,
    #[value(name = "16")]
    Sixteen,
}

#[derive(Args, Debug, Clone)]
pub struct OutputArgs {
    /// Bits per sample for image outputs.
    #[arg(long, value_enum, default_value_t = Depth::Sixteen, env = "DAYLOCUS_DEPTH")]
    pub depth: Depth,
    /// Apply the sRGB transfer curve when writing images.
    #[arg(long, env = "DAYLOCUS_SRGB_ENCODE")]
    pub srgb_encode: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SceneKind {
    /// Patches 1, 4 and 9 with a weak, tight highlight.
    ThreeSphere,
    /// Five spheres with strong, broad highlights.
    Glossy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ImageKind {
    Png,
    Ppm,
}

#[derive(Args, Debug)]
pub struct RenderArgs {
    #[arg(long, value_enum, default_value_t = SceneKind::ThreeSphere, env = "DAYLOCUS_SCENE")]
    pub scene: SceneKind,
    /// Light temperature in K for a single image.
    #[arg(long, default_value_t = 6500.0, env = "DAYLOCUS_TEMP")]
    pub temp: f64,
    /// Output image; the matte layer goes to `<stem>.matte.<ext>`.
    #[arg(long, required_unless_present = "dataset", conflicts_with = "dataset", env = "DAYLOCUS_OUT")]
    pub out: Option<PathBuf>,
    /// Write a dataset of `--count` images plus `truth.csv` into this directory.
    #[arg(long, env = "DAYLOCUS_DATASET")]
    pub dataset: Option<PathBuf>,
    #[arg(long, default_value_t = 10, env = "DAYLOCUS_COUNT")]
    pub count: usize,
    /// Lowest dataset temperature in K.
    #[arg(long, default_value_t = 4500.0, env = "DAYLOCUS_TEMP_MIN")]
    pub temp_min: f64,
    /// Highest dataset temperature in K.
    #[arg(long, default_value_t = 11500.0, env = "DAYLOCUS_TEMP_MAX")]
    pub temp_max: f64,
    /// Dataset image format.
    #[arg(long, value_enum, default_value_t = ImageKind::Png, env = "DAYLOCUS_FORMAT")]
    pub format: ImageKind,
    /// Exposure: the brightest pixel is written at this fraction of full scale.
    #[arg(long, default_value_t = 0.95, env = "DAYLOCUS_PEAK")]
    pub peak: f64,
    #[command(flatten)]
    pub sensors: SensorArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct CalibrateArgs {
    /// `synthetic`, a patch CSV (`patch,temperature_k,r,g,b,camera`) or a directory holding `patches.csv`.
    #[arg(long, env = "DAYLOCUS_PATCHES")]
    pub patches: String,
    /// Light CSV (`temperature_k,r,g,b,camera`); synthetic lights are rendered when omitted.
    #[arg(long, env = "DAYLOCUS_LIGHTS")]
    pub lights: Option<PathBuf>,
    /// Temperatures of synthetic calibration lights.
    #[arg(long, value_delimiter = ',', default_values_t = [6500.0, 9500.0], env = "DAYLOCUS_LIGHT_TEMPS")]
    pub light_temps: Vec<f64>,
    /// How synthetic lights are imaged: `direct` or `grey:<patch>`.
    #[arg(long, default_value = "direct", env = "DAYLOCUS_LIGHT_PATH")]
    pub light_path: String,
    #[arg(long, env = "DAYLOCUS_OUT")]
    pub out: PathBuf,
    #[command(flatten)]
    pub sensors: SensorArgs,
}

#[derive(Args, Debug, Clone)]
pub struct InputArgs {
    #[arg(long, env = "DAYLOCUS_IMAGE")]
    pub image: PathBuf,
    /// Apply the inverse sRGB curve on load.
    #[arg(long, env = "DAYLOCUS_SRGB_DECODE")]
    pub srgb_decode: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    ZetaLocus,
    ZetaFree,
    WhitePatch,
    GreyWorld,
    GreyEdge,
}

#[derive(Args, Debug, Clone)]
pub struct MethodArgs {
    #[arg(long, value_enum, default_value_t = MethodArg::ZetaLocus, env = "DAYLOCUS_METHOD")]
    pub method: MethodArg,
    /// Calibration profile (needed by zeta-locus).
    #[arg(long, env = "DAYLOCUS_PROFILE")]
    pub profile: Option<PathBuf>,
    /// Coarse simplex step for zeta-free.
    #[arg(long, default_value_t = 0.005, env = "DAYLOCUS_GRID_STEP")]
    pub grid_step: f64,
    /// Fraction of pixels with the smallest |zeta| entering the objective.
    #[arg(long, default_value_t = 0.10, env = "DAYLOCUS_FRACTION")]
    pub fraction: f64,
    /// Minkowski norm for grey-edge.
    #[arg(long, default_value_t = 1.0, env = "DAYLOCUS_MINKOWSKI_P")]
    pub minkowski_p: f64,
    /// Gaussian derivative scale in pixels for grey-edge.
    #[arg(long, default_value_t = 1.0, env = "DAYLOCUS_SIGMA")]
    pub sigma: f64,
}

#[derive(Args, Debug)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub method: MethodArgs,
    /// Also write the result to this file (with a sidecar).
    #[arg(long, env = "DAYLOCUS_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ClipArg {
    Clip,
    Rescale,
}

#[derive(Args, Debug)]
pub struct RelightArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, env = "DAYLOCUS_PROFILE")]
    pub profile: PathBuf,
    /// Target temperatures in K; more than one writes numbered files.
    #[arg(long, value_delimiter = ',', required = true, env = "DAYLOCUS_TARGET_TEMP")]
    pub target_temp: Vec<f64>,
    /// Source temperature; estimated on the locus when omitted.
    #[arg(long, env = "DAYLOCUS_SOURCE_TEMP")]
    pub source_temp: Option<f64>,
    #[arg(long, value_enum, default_value_t = ClipArg::Clip, env = "DAYLOCUS_CLIP")]
    pub clip: ClipArg,
    #[arg(long, env = "DAYLOCUS_OUT")]
    pub out: PathBuf,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlaneArg {
    L1,
    Chi,
}

#[derive(Args, Debug)]
pub struct MatteArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, env = "DAYLOCUS_PROFILE")]
    pub profile: PathBuf,
    #[arg(long, env = "DAYLOCUS_OUT")]
    pub out: PathBuf,
    /// Write the input's log-chromaticity field as CSV.
    #[arg(long, env = "DAYLOCUS_EMIT_CHROMA_CSV")]
    pub emit_chroma_csv: Option<PathBuf>,
    /// Plane for the angular projection.
    #[arg(long, value_enum, default_value_t = PlaneArg::L1, env = "DAYLOCUS_PLANE")]
    pub plane: PlaneArg,
    /// Fraction of pixels nearest the specular point that are re-resolved by voting.
    #[arg(long, default_value_t = 0.10, env = "DAYLOCUS_NEAR_FRACTION")]
    pub near_fraction: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Directory the manifest's image paths are relative to.
    #[arg(long, env = "DAYLOCUS_DATASET")]
    pub dataset: PathBuf,
    /// Manifest CSV (`image,r,g,b,camera,mask`).
    #[arg(long, env = "DAYLOCUS_TRUTH")]
    pub truth: PathBuf,
    #[command(flatten)]
    pub method: MethodArgs,
    #[arg(long, env = "DAYLOCUS_SRGB_DECODE")]
    pub srgb_decode: bool,
    /// Worker threads; 0 uses every available core.
    #[arg(long, default_value_t = 0, env = "DAYLOCUS_JOBS")]
    pub jobs: usize,
    /// Result CSV; standard output when omitted.
    #[arg(long, env = "DAYLOCUS_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PlotArgs {
    /// Light CSV (`temperature_k,r,g,b,camera`); synthetic lights when omitted.
    #[arg(long, env = "DAYLOCUS_LIGHTS")]
    pub lights: Option<PathBuf>,
    /// Draw this profile's locus instead of the fitted line.
    #[arg(long, env = "DAYLOCUS_PROFILE")]
    pub profile: Option<PathBuf>,
    /// Synthetic lights: Planckian temperatures.
    #[arg(long, value_delimiter = ',', default_values_t = [4000.0, 5000.0, 5500.0, 6500.0, 7500.0, 8500.0, 9500.0, 10500.0, 12000.0], env = "DAYLOCUS_LIGHT_TEMPS")]
    pub light_temps: Vec<f64>,
    /// Synthetic lights: off-locus lights seen through these coloured patches.
    #[arg(long, value_delimiter = ',', default_values_t = [11usize, 12, 14], env = "DAYLOCUS_OUTLIER_PATCHES")]
    pub outlier_patches: Vec<usize>,
    /// Also plot the 18 chromatic patches under the synthetic temperatures.
    #[arg(long, env = "DAYLOCUS_WITH_PATCHES")]
    pub with_patches: bool,
    /// Seed for LMS candidate sampling.
    #[arg(long, default_value_t = daylocus::calib::CALIBRATION_SEED, env = "DAYLOCUS_SEED")]
    pub seed: u64,
    /// Output prefix: writes `<prefix>.csv` and `<prefix>.svg`.
    #[arg(long, env = "DAYLOCUS_OUT")]
    pub out: PathBuf,
    #[command(flatten)]
    pub sensors: SensorArgs,
}

/// A bad argument combination that clap cannot express; exits with status 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let result = match cli.command {
        Command::RenderSynth(a) => commands::render_synth(a),
        Command::Calibrate(a) => commands::calibrate(a),
        Command::Estimate(a) => commands::estimate(a),
        Command::Relight(a) => commands::relight(a),
        Command::Matte(a) => commands::matte(a),
        Command::Eval(a) => commands::eval(a),
        Command::PlotLocus(a) => commands::plot_locus(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.downcast_ref::<UsageError>().is_some() => {
            eprintln!("error: {e}");
            eprintln!("run `daylocus --help` for usage");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

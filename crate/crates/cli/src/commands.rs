//! Subcommand implementations.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use daylocus::calib::profile::{parse_profile, write_profile};
use daylocus::calib::{calibrate as run_calibration, lms_line_fit, CalibObservation, LightPath, LocusParams, ObservationKind, SyntheticCalibration};
use daylocus::chroma::{geomean_chroma, ChromaField};
use daylocus::illum::{
    angular_error, estimate_zeta_free, estimate_zeta_locus, grey_edge, grey_world, white_patch, IlluminantEstimate,
    SimplexGrid, TempSearch,
};
use daylocus::imaging::{render, SceneSpec};
use daylocus::io::manifest::{apply_mask, parse_manifest, write_manifest};
use daylocus::io::{load_image, save_image, BitDepth, DatasetManifest, LoadOptions, ManifestEntry};
use daylocus::matte::{matte_image, MatteOptions, MattePlane};
use daylocus::relight::{apply_clip, relight as relight_image, ClipPolicy, LightSpec, RelightSpec};
use daylocus::spectra::{colorchecker_patch, chromatic_patch_numbers, default_grid, Illuminant, SensorSet};
use daylocus::LinearImage;
use log::{info, warn};
use rayon::prelude::*;

use crate::config::{sha256_hex, write_sidecar, RunConfig};
use crate::plot::{self, PlotPoint};
use crate::{
    CalibrateArgs, ClipArg, Depth, EstimateArgs, EvalArgs, ImageKind, InputArgs, MatteArgs, MethodArg, MethodArgs,
    OutputArgs, PlaneArg, PlotArgs, RelightArgs, RenderArgs, SceneKind, SensorArgs, SensorKind, UsageError,
};

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn join_f64(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl SensorArgs {
    fn build(&self) -> Result<SensorSet> {
        let [r, g, b] = self.centres[..] else {
            return Err(usage(format!("--centres needs three wavelengths, got {}", self.centres.len())));
        };
        Ok(match self.sensors {
            SensorKind::Delta => SensorSet::delta([r, g, b], [1.0; 3])?,
            SensorKind::Gaussian => SensorSet::gaussian([r, g, b], self.sigma_nm, &default_grid())?,
        })
    }

    fn record(&self, cfg: &mut RunConfig) {
        cfg.set("sensors", format!("{:?}", self.sensors).to_lowercase()).set("centres_nm", join_f64(&self.centres));
        if self.sensors == SensorKind::Gaussian {
            cfg.set("sigma_nm", self.sigma_nm);
        }
    }

    fn label(&self) -> String {
        match self.sensors {
            SensorKind::Delta => format!("delta-{}", join_f64(&self.centres)),
            SensorKind::Gaussian => format!("gaussian{}-{}", self.sigma_nm, join_f64(&self.centres)),
        }
    }
}

impl OutputArgs {
    fn depth(&self) -> BitDepth {
        match self.depth {
            Depth::Eight => BitDepth::Eight,
            Depth::Sixteen => BitDepth::Sixteen,
        }
    }

    fn record(&self, cfg: &mut RunConfig) {
        cfg.set("depth", if self.depth == Depth::Eight { 8 } else { 16 }).set("srgb_encode", self.srgb_encode);
    }
}

fn load_input(input: &InputArgs, cfg: &mut RunConfig) -> Result<LinearImage> {
    cfg.set("image", input.image.display()).set("srgb_decode", input.srgb_decode);
    let bytes = std::fs::read(&input.image).with_context(|| format!("reading {}", input.image.display()))?;
    cfg.set("image_sha256", sha256_hex(&bytes));
    let loaded = daylocus::io::decode_image(&bytes, &LoadOptions { srgb_decode: input.srgb_decode })
        .with_context(|| format!("decoding {}", input.image.display()))?;
    let saturated = loaded.saturated.iter().filter(|&&s| s).count();
    if saturated > 0 {
        info!("{saturated} saturated pixels excluded");
    }
    Ok(loaded.image)
}

struct Profile {
    locus: LocusParams,
    hash: String,
}

fn load_profile(path: &Path, cfg: &mut RunConfig) -> Result<Profile> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading profile {}", path.display()))?;
    let locus = parse_profile(&text).with_context(|| format!("parsing profile {}", path.display()))?;
    let hash = sha256_hex(text.as_bytes());
    cfg.set("profile", path.display());
    Ok(Profile { locus, hash })
}

fn save(path: &Path, image: &LinearImage, output: &OutputArgs, cfg: &RunConfig, profile: Option<&str>) -> Result<()> {
    save_image(path, image, output.depth(), output.srgb_encode).with_context(|| format!("writing {}", path.display()))?;
    write_sidecar(path, cfg, profile)
}

/// `dir/stem<suffix>.ext`
fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}{suffix}.{}", ext.to_string_lossy()),
        None => format!("{stem}{suffix}"),
    };
    path.with_file_name(name)
}

fn scene_for(kind: SceneKind, t: f64) -> Result<SceneSpec> {
    Ok(match kind {
        SceneKind::ThreeSphere => SceneSpec::three_patch_spheres(t)?,
        SceneKind::Glossy => SceneSpec::glossy_spheres(t)?,
    })
}

struct Rendered {
    rgb: LinearImage,
    matte: LinearImage,
    truth: [f64; 3],
}

fn render_scene(kind: SceneKind, t: f64, sensors: &SensorSet, peak: f64) -> Result<Rendered> {
    let scene = scene_for(kind, t)?;
    let out = render(&scene, sensors)?;
    let max = out.rgb.max_value();
    if !(max > 0.0) {
        bail!("rendered scene is black");
    }
    let k = peak / max;
    let light = sensors.response(&scene.light.illuminant, None)?;
    let sum: f64 = light.iter().sum();
    Ok(Rendered { rgb: out.rgb.scaled(k), matte: out.matte_rgb.scaled(k), truth: light.map(|v| v / sum) })
}

pub fn render_synth(a: RenderArgs) -> Result<()> {
    if !(a.peak > 0.0 && a.peak <= 1.0) {
        return Err(usage("--peak must be in (0, 1]"));
    }
    let sensors = a.sensors.build()?;
    let mut cfg = RunConfig::new("render-synth");
    a.sensors.record(&mut cfg);
    a.output.record(&mut cfg);
    cfg.set("scene", format!("{:?}", a.scene).to_lowercase()).set("peak", a.peak);

    if let Some(out) = &a.out {
        cfg.set("temp_k", a.temp).set("out", out.display());
        let r = render_scene(a.scene, a.temp, &sensors, a.peak)?;
        save(out, &r.rgb, &a.output, &cfg, None)?;
        save(&with_suffix(out, ".matte"), &r.matte, &a.output, &cfg, None)?;
        println!("light_rho = {} {} {}", r.truth[0], r.truth[1], r.truth[2]);
        return Ok(());
    }

    let dir = a.dataset.as_ref().expect("clap requires --out or --dataset");
    if a.count == 0 {
        return Err(usage("--count must be at least 1"));
    }
    if !(a.temp_min > 0.0 && a.temp_max >= a.temp_min) {
        return Err(usage("need 0 < --temp-min <= --temp-max"));
    }
    cfg.set("dataset", dir.display())
        .set("count", a.count)
        .set("temp_min_k", a.temp_min)
        .set("temp_max_k", a.temp_max)
        .set("format", format!("{:?}", a.format).to_lowercase());
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let ext = match a.format {
        ImageKind::Png => "png",
        ImageKind::Ppm => "ppm",
    };
    let temps: Vec<f64> = (0..a.count)
        .map(|i| if a.count == 1 { a.temp_min } else { a.temp_min + (a.temp_max - a.temp_min) * i as f64 / (a.count - 1) as f64 })
        .collect();
    let mut manifest = DatasetManifest::default();
    for (i, &t) in temps.iter().enumerate() {
        let path = dir.join(format!("img_{i:03}.{ext}"));
        let r = render_scene(a.scene, t, &sensors, a.peak)?;
        let mut item = cfg.clone();
        item.set("temp_k", t).set("out", path.display());
        save(&path, &r.rgb, &a.output, &item, None)?;
        save(&with_suffix(&path, ".matte"), &r.matte, &a.output, &item, None)?;
        manifest.entries.push(ManifestEntry { image: path, truth: Some(r.truth), camera: Some(a.sensors.label()), mask: None });
    }
    let truth = dir.join("truth.csv");
    std::fs::write(&truth, write_manifest(&manifest, dir)?).with_context(|| format!("writing {}", truth.display()))?;
    write_sidecar(&truth, &cfg, None)?;
    info!("wrote {} images and {}", a.count, truth.display());
    Ok(())
}

fn csv_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))
}

fn parse_f64(path: &Path, line: u64, what: &str, s: &str) -> Result<f64> {
    s.parse().with_context(|| format!("{}:{line}: bad {what} {s:?}", path.display()))
}

fn rgb_fields(path: &Path, line: u64, rec: &csv::StringRecord, from: usize) -> Result<[f64; 3]> {
    let mut v = [0.0; 3];
    for (k, name) in ["r", "g", "b"].iter().enumerate() {
        v[k] = parse_f64(path, line, name, rec.get(from + k).unwrap_or(""))?;
    }
    Ok(v)
}

fn camera_field(rec: &csv::StringRecord, i: usize) -> Option<String> {
    rec.get(i).filter(|s| !s.is_empty()).map(str::to_string)
}

fn check_header(path: &Path, reader: &mut csv::Reader<std::fs::File>, expected: &[&str]) -> Result<()> {
    let h = reader.headers().with_context(|| format!("reading {}", path.display()))?;
    let got: Vec<&str> = h.iter().collect();
    if got.len() < expected.len() - 1 || got.iter().zip(expected).any(|(a, b)| a != b) {
        bail!("{}:1: header must be {}", path.display(), expected.join(","));
    }
    Ok(())
}

/// Patch rows `patch,temperature_k,r,g,b[,camera]`.
fn read_patch_csv(path: &Path) -> Result<Vec<CalibObservation>> {
    let mut reader = csv_reader(path)?;
    check_header(path, &mut reader, &["patch", "temperature_k", "r", "g", "b", "camera"])?;
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.with_context(|| format!("reading {}", path.display()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let id = rec.get(0).unwrap_or("").to_string();
        if id.is_empty() {
            bail!("{}:{line}: empty patch id", path.display());
        }
        let t = parse_f64(path, line, "temperature", rec.get(1).unwrap_or(""))?;
        out.push(CalibObservation {
            kind: ObservationKind::Patch { id, temperature_k: t },
            rgb: rgb_fields(path, line, &rec, 2)?,
            camera: camera_field(&rec, 5),
        });
    }
    Ok(out)
}

struct LightRow {
    temperature_k: Option<f64>,
    rgb: [f64; 3],
    camera: Option<String>,
}

/// Light rows `temperature_k,r,g,b[,camera]`; the temperature may be empty.
fn read_light_csv(path: &Path) -> Result<Vec<LightRow>> {
    let mut reader = csv_reader(path)?;
    check_header(path, &mut reader, &["temperature_k", "r", "g", "b", "camera"])?;
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.with_context(|| format!("reading {}", path.display()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let t = match rec.get(0).unwrap_or("") {
            "" => None,
            s => Some(parse_f64(path, line, "temperature", s)?),
        };
        out.push(LightRow { temperature_k: t, rgb: rgb_fields(path, line, &rec, 1)?, camera: camera_field(&rec, 4) });
    }
    Ok(out)
}

fn parse_light_path(s: &str) -> Result<LightPath> {
    if s == "direct" {
        return Ok(LightPath::Direct);
    }
    if let Some(n) = s.strip_prefix("grey:") {
        let n: usize = n.parse().map_err(|_| usage(format!("bad patch number in --light-path {s:?}")))?;
        return Ok(LightPath::GreyPatch(n));
    }
    Err(usage(format!("--light-path must be `direct` or `grey:<patch>`, got {s:?}")))
}

pub fn calibrate(a: CalibrateArgs) -> Result<()> {
    let sensors = a.sensors.build()?;
    let mut cfg = RunConfig::new("calibrate");
    cfg.set("patches", &a.patches).set("out", a.out.display());
    let synthetic = a.patches == "synthetic";
    let mut obs = if synthetic {
        a.sensors.record(&mut cfg);
        let plan = SyntheticCalibration { light_temperatures: Vec::new(), ..SyntheticCalibration::default() };
        cfg.set("patch_numbers", plan.patches.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(","))
            .set("patch_temps_k", join_f64(&plan.patch_temperatures));
        plan.observations(&sensors)?
    } else {
        let p = PathBuf::from(&a.patches);
        let file = if p.is_dir() { p.join("patches.csv") } else { p };
        cfg.set("patches_sha256", sha256_hex(&std::fs::read(&file).with_context(|| format!("reading {}", file.display()))?));
        read_patch_csv(&file)?
    };
    match &a.lights {
        Some(path) => {
            cfg.set("lights", path.display())
                .set("lights_sha256", sha256_hex(&std::fs::read(path).with_context(|| format!("reading {}", path.display()))?));
            for l in read_light_csv(path)? {
                obs.push(CalibObservation { kind: ObservationKind::Light { temperature_k: l.temperature_k }, rgb: l.rgb, camera: l.camera });
            }
        }
        None if synthetic => {
            let path = parse_light_path(&a.light_path)?;
            cfg.set("light_temps_k", join_f64(&a.light_temps)).set("light_path", &a.light_path);
            let plan = SyntheticCalibration { patches: Vec::new(), patch_temperatures: Vec::new(), light_temperatures: a.light_temps.clone(), light_path: path };
            obs.extend(plan.observations(&sensors)?);
        }
        None => return Err(usage("--lights is required unless --patches synthetic")),
    }
    let locus = run_calibration(&obs, synthetic.then_some(&sensors))?;
    for w in &locus.diagnostics.warnings {
        warn!("{w}");
    }
    let text = write_profile(&locus);
    std::fs::write(&a.out, &text).with_context(|| format!("writing {}", a.out.display()))?;
    write_sidecar(&a.out, &cfg, Some(&sha256_hex(text.as_bytes())))?;
    eprintln!(
        "eta = {} {}; xi = {} {}; eigen ratio = {}",
        locus.eta[0],
        locus.eta[1],
        locus.xi[0],
        locus.xi[1],
        locus.diagnostics.eigen_ratio.map_or("n/a".to_string(), |r| format!("{r:.1}"))
    );
    Ok(())
}

struct Estimator {
    method: MethodArg,
    locus: Option<LocusParams>,
    profile_hash: Option<String>,
    grid: SimplexGrid,
    fraction: f64,
    minkowski_p: f64,
    sigma: f64,
}

impl MethodArgs {
    fn build(&self, cfg: &mut RunConfig) -> Result<Estimator> {
        if !(self.fraction > 0.0 && self.fraction <= 1.0) {
            return Err(usage("--fraction must be in (0, 1]"));
        }
        let name = match self.method {
            MethodArg::ZetaLocus => "zeta-locus",
            MethodArg::ZetaFree => "zeta-free",
            MethodArg::WhitePatch => "white-patch",
            MethodArg::GreyWorld => "grey-world",
            MethodArg::GreyEdge => "grey-edge",
        };
        cfg.set("method", name);
        let (locus, profile_hash) = match (&self.profile, self.method) {
            (Some(p), _) => {
                let prof = load_profile(p, cfg)?;
                (Some(prof.locus), Some(prof.hash))
            }
            (None, MethodArg::ZetaLocus) => return Err(usage("zeta-locus needs --profile")),
            (None, _) => (None, None),
        };
        let grid = SimplexGrid { step: self.grid_step, fraction: self.fraction, ..SimplexGrid::default() };
        match self.method {
            MethodArg::ZetaLocus => {
                cfg.set("fraction", self.fraction);
            }
            MethodArg::ZetaFree => {
                if !(self.grid_step > 0.0 && self.grid_step < 0.1) {
                    return Err(usage("--grid-step must be in (0, 0.1)"));
                }
                cfg.set("fraction", self.fraction).set("grid_step", self.grid_step).set("grid_range", format!("{},{}", grid.min, grid.max));
            }
            MethodArg::GreyEdge => {
                cfg.set("minkowski_p", self.minkowski_p).set("sigma", self.sigma);
            }
            MethodArg::WhitePatch | MethodArg::GreyWorld => {}
        }
        Ok(Estimator { method: self.method, locus, profile_hash, grid, fraction: self.fraction, minkowski_p: self.minkowski_p, sigma: self.sigma })
    }
}

impl Estimator {
    fn run(&self, image: &LinearImage) -> daylocus::Result<IlluminantEstimate> {
        match self.method {
            MethodArg::ZetaLocus => {
                let locus = self.locus.as_ref().expect("checked when built");
                let search = TempSearch { fraction: self.fraction, ..TempSearch::for_locus(locus)? };
                estimate_zeta_locus(image, locus, &search)
            }
            MethodArg::ZetaFree => estimate_zeta_free(image, &self.grid),
            MethodArg::WhitePatch => white_patch(image),
            MethodArg::GreyWorld => grey_world(image),
            MethodArg::GreyEdge => grey_edge(image, self.minkowski_p, self.sigma),
        }
    }
}

fn opt_f64(v: Option<f64>) -> String {
    v.map_or("none".to_string(), |x| x.to_string())
}

pub fn estimate(a: EstimateArgs) -> Result<()> {
    let mut cfg = RunConfig::new("estimate");
    let est = a.method.build(&mut cfg)?;
    let image = load_input(&a.input, &mut cfg)?;
    let e = est.run(&image).with_context(|| format!("estimating {}", a.input.image.display()))?;
    let text = format!(
        "method = {}\nrho_e = {} {} {}\ntemperature_k = {}\nobjective = {}\nlow_confidence = {}\n",
        e.method,
        e.rho_e[0],
        e.rho_e[1],
        e.rho_e[2],
        opt_f64(e.temperature_k),
        opt_f64(e.objective),
        e.low_confidence
    );
    print!("{text}");
    if e.low_confidence {
        warn!("objective landscape is flat; estimate is unreliable");
    }
    if let Some(out) = &a.out {
        cfg.set("out", out.display());
        std::fs::write(out, &text).with_context(|| format!("writing {}", out.display()))?;
        write_sidecar(out, &cfg, est.profile_hash.as_deref())?;
    }
    Ok(())
}

pub fn relight(a: RelightArgs) -> Result<()> {
    let mut cfg = RunConfig::new("relight");
    let image = load_input(&a.input, &mut cfg)?;
    let prof = load_profile(&a.profile, &mut cfg)?;
    a.output.record(&mut cfg);
    let clip = match a.clip {
        ClipArg::Clip => ClipPolicy::Clip,
        ClipArg::Rescale => ClipPolicy::Rescale,
    };
    let source_t = match a.source_temp {
        Some(t) => t,
        None => {
            let e = estimate_zeta_locus(&image, &prof.locus, &TempSearch::for_locus(&prof.locus)?)?;
            let t = e.temperature_k.expect("locus estimate has a temperature");
            info!("estimated source temperature {t:.0} K");
            t
        }
    };
    cfg.set("source_temp_k", source_t)
        .set("target_temps_k", join_f64(&a.target_temp))
        .set("clip", format!("{:?}", a.clip).to_lowercase());
    let sweep = a.target_temp.len() > 1;
    for (i, &t) in a.target_temp.iter().enumerate() {
        let spec = RelightSpec { source: LightSpec::Temperature(source_t), target: LightSpec::Temperature(t), clip };
        let out = relight_image(&image, &spec, Some(&prof.locus))?;
        let path = if sweep { with_suffix(&a.out, &format!("_{i:03}")) } else { a.out.clone() };
        let mut item = cfg.clone();
        item.set("out", path.display()).set("target_temp_k", t);
        save(&path, &apply_clip(&out, clip), &a.output, &item, Some(&prof.hash))?;
    }
    Ok(())
}

pub fn matte(a: MatteArgs) -> Result<()> {
    if !(a.near_fraction >= 0.0 && a.near_fraction < 1.0) {
        return Err(usage("--near-fraction must be in [0, 1)"));
    }
    let mut cfg = RunConfig::new("matte");
    let image = load_input(&a.input, &mut cfg)?;
    let prof = load_profile(&a.profile, &mut cfg)?;
    a.output.record(&mut cfg);
    let plane = match a.plane {
        PlaneArg::L1 => MattePlane::L1,
        PlaneArg::Chi => MattePlane::LogChi,
    };
    cfg.set("plane", format!("{:?}", a.plane).to_lowercase()).set("near_fraction", a.near_fraction).set("out", a.out.display());
    let out = matte_image(&image, &prof.locus, &MatteOptions { plane, near_fraction: a.near_fraction })?;
    if let Some(e) = &out.estimate {
        info!("specular point at {} K", opt_f64(e.temperature_k));
    }
    let unresolved = out.result.unresolved.iter().filter(|&&u| u).count();
    if unresolved > 0 {
        warn!("{unresolved} near-specular pixels left unresolved by voting");
    }
    let max = out.image.max_value();
    let display = if max > 0.0 { out.image.scaled(1.0 / max) } else { out.image.clone() };
    save(&a.out, &display, &a.output, &cfg, Some(&prof.hash))?;
    if let Some(csv_path) = &a.emit_chroma_csv {
        let field = ChromaField::from_image(&image, None);
        let mut f = std::io::BufWriter::new(std::fs::File::create(csv_path).with_context(|| format!("creating {}", csv_path.display()))?);
        field.write_chi_csv(&mut f)?;
        f.flush()?;
        let mut item = cfg.clone();
        item.set("chroma_csv", csv_path.display());
        write_sidecar(csv_path, &item, Some(&prof.hash))?;
    }
    Ok(())
}

struct EvalRow {
    image: String,
    estimate: IlluminantEstimate,
    error_deg: f64,
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

pub fn eval(a: EvalArgs) -> Result<()> {
    let mut cfg = RunConfig::new("eval");
    let est = a.method.build(&mut cfg)?;
    let text = std::fs::read_to_string(&a.truth).with_context(|| format!("reading {}", a.truth.display()))?;
    cfg.set("dataset", a.dataset.display())
        .set("truth", a.truth.display())
        .set("truth_sha256", sha256_hex(text.as_bytes()))
        .set("srgb_decode", a.srgb_decode);
    let manifest = parse_manifest(&text, &a.dataset).with_context(|| format!("parsing {}", a.truth.display()))?;
    if manifest.entries.is_empty() {
        bail!("{} lists no images", a.truth.display());
    }
    for e in &manifest.entries {
        if !e.image.is_file() {
            bail!("manifest image {} does not exist", e.image.display());
        }
        if e.truth.is_none() {
            bail!("manifest image {} has no ground-truth light", e.image.display());
        }
    }
    let jobs = if a.jobs == 0 { std::thread::available_parallelism().map_or(1, |n| n.get()) } else { a.jobs };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
    let options = LoadOptions { srgb_decode: a.srgb_decode };
    let rows: Vec<Result<EvalRow>> = pool.install(|| {
        manifest
            .entries
            .par_iter()
            .map(|entry| {
                let loaded = load_image(&entry.image, &options)?;
                let image = apply_mask(&loaded.image, entry.mask.as_deref())?;
                let e = est.run(&image).with_context(|| format!("estimating {}", entry.image.display()))?;
                let error_deg = angular_error(e.rho_e, entry.truth.expect("checked above"))?;
                let rel = entry.image.strip_prefix(&a.dataset).unwrap_or(&entry.image);
                Ok(EvalRow { image: rel.display().to_string(), estimate: e, error_deg })
            })
            .collect()
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;

    let method = cfg.get("method").unwrap_or_default().to_string();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["image", "method", "angular_error_deg", "rho_r", "rho_g", "rho_b", "temperature_k", "low_confidence", "median_deg", "mean_deg"])?;
    for r in &rows {
        let e = &r.estimate;
        w.write_record([
            r.image.clone(),
            method.clone(),
            r.error_deg.to_string(),
            e.rho_e[0].to_string(),
            e.rho_e[1].to_string(),
            e.rho_e[2].to_string(),
            e.temperature_k.map(|t| t.to_string()).unwrap_or_default(),
            e.low_confidence.to_string(),
            String::new(),
            String::new(),
        ])?;
    }
    let errors: Vec<f64> = rows.iter().map(|r| r.error_deg).collect();
    let mean = errors.iter().sum::<f64>() / errors.len() as f64;
    let med = median(&errors);
    let mut summary = vec!["summary".to_string(), method];
    summary.extend(std::iter::repeat_n(String::new(), 6));
    summary.extend([med.to_string(), mean.to_string()]);
    w.write_record(&summary)?;
    let bytes = w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?;
    eprintln!("{} images: median {med:.3} deg, mean {mean:.3} deg", rows.len());
    match &a.out {
        Some(out) => {
            cfg.set("out", out.display());
            std::fs::write(out, &bytes).with_context(|| format!("writing {}", out.display()))?;
            write_sidecar(out, &cfg, est.profile_hash.as_deref())?;
        }
        None => std::io::stdout().write_all(&bytes)?,
    }
    Ok(())
}

pub fn plot_locus(a: PlotArgs) -> Result<()> {
    let mut cfg = RunConfig::new("plot-locus");
    cfg.set("seed", a.seed).set("out", a.out.display());
    let sensors = a.sensors.build()?;
    let mut lights: Vec<(String, [f64; 2], Option<f64>)> = Vec::new();
    match &a.lights {
        Some(path) => {
            cfg.set("lights", path.display());
            for (i, l) in read_light_csv(path)?.into_iter().enumerate() {
                let label = l.temperature_k.map_or(format!("light{i}"), |t| format!("{t}K"));
                lights.push((label, geomean_chroma(l.rgb)?.chi, l.temperature_k));
            }
        }
        None => {
            a.sensors.record(&mut cfg);
            cfg.set("light_temps_k", join_f64(&a.light_temps))
                .set("outlier_patches", a.outlier_patches.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(","));
            for &t in &a.light_temps {
                let rgb = sensors.response(&Illuminant::planckian(t, 1.0)?, None)?;
                lights.push((format!("{t}K"), geomean_chroma(rgb)?.chi, Some(t)));
            }
            for (i, &p) in a.outlier_patches.iter().enumerate() {
                let t = a.light_temps.get(i % a.light_temps.len().max(1)).copied().unwrap_or(6500.0);
                let rgb = sensors.response(&Illuminant::planckian(t, 1.0)?, Some(colorchecker_patch(p)?))?;
                lights.push((format!("off-locus-patch{p:02}"), geomean_chroma(rgb)?.chi, None));
            }
        }
    }
    if lights.len() < 3 {
        bail!("need at least 3 lights to fit a line, got {}", lights.len());
    }
    let pts: Vec<[f64; 2]> = lights.iter().map(|l| l.1).collect();
    let fit = lms_line_fit(&pts, None, a.seed)?;
    let mut points: Vec<PlotPoint> = lights
        .iter()
        .enumerate()
        .map(|(i, (label, p, _))| PlotPoint { xy: *p, label: label.clone(), inlier: Some(!fit.line.outliers.contains(&i)) })
        .collect();
    if a.with_patches {
        cfg.set("with_patches", true);
        for p in chromatic_patch_numbers() {
            let refl = colorchecker_patch(p)?;
            for &t in &a.light_temps {
                let rgb = sensors.response(&Illuminant::planckian(t, 1.0)?, Some(refl))?;
                points.push(PlotPoint { xy: geomean_chroma(rgb)?.chi, label: format!("patch{p:02}@{t}K"), inlier: None });
            }
        }
    }
    let (line_point, line_dir, line_label, profile_hash) = match &a.profile {
        Some(p) => {
            let prof = load_profile(p, &mut cfg)?;
            let n = prof.locus.xi_norm();
            (prof.locus.eta, [prof.locus.xi[0] / n, prof.locus.xi[1] / n], "profile locus", Some(prof.hash))
        }
        None => (fit.line.point, fit.line.direction, "LMS fit", None),
    };
    let csv_path = a.out.with_extension("csv");
    let svg_path = a.out.with_extension("svg");
    std::fs::write(&csv_path, plot::points_csv(&points)?).with_context(|| format!("writing {}", csv_path.display()))?;
    std::fs::write(&svg_path, plot::scatter_svg(&points, line_point, line_dir, line_label))
        .with_context(|| format!("writing {}", svg_path.display()))?;
    write_sidecar(&csv_path, &cfg, profile_hash.as_deref())?;
    write_sidecar(&svg_path, &cfg, profile_hash.as_deref())?;
    eprintln!("{} lights, {} flagged off-locus", lights.len(), fit.line.outliers.len());
    Ok(())
}

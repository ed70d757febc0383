//! Batch driver: simulate SVE raws from HDR scenes, reconstruct them with the
//! conventional and the proposed pipeline, score the results and tabulate.
//!
//! Every stage reads the previous stage's files from the output tree, so
//! `all` is exactly `simulate`, `reconstruct`, `evaluate` and `report` run
//! back to back:
//!
//! ```text
//! out/
//!   manifest.json
//!   scenes/<scene>.pfm  <scene>.json
//!   raw/<scene>_ev-2_+2.pfm  .mask.pfm  .json
//!   recon/<scene>_ev-2_+2_<method>.pfm  .png   <scene>_ev-2_+2_proposed.branches.json
//!   eval/<scene>_ev-2_+2_<method>.json
//!   report.csv
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use thiserror::Error;

use sve_hdr::corpus::{
    generate_synthetic_corpus, symmetric_pairs, CorpusError, CorpusManifest, SceneEntry, SceneSource,
};
use sve_hdr::io::{self, IoError, ReportEntry};
use sve_hdr::metrics::evaluate;
use sve_hdr::pipeline::{shared_stages, BranchCounts, Method};
use sve_hdr::raw_sve::{clip_mask_of, simulate_sve_capture, BitDepth, ClipFlag, ExposureAnchor};
use sve_hdr::HdrImage64;

pub const EXIT_INPUT: i32 = 2;
pub const EXIT_COMPUTE: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments, missing or unreadable inputs.
    #[error("{0}")]
    Input(String),
    /// A stage failed on valid inputs, or an output could not be written.
    #[error("{0}")]
    Compute(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Compute(_) => EXIT_COMPUTE,
        }
    }
}

fn input_err(context: impl std::fmt::Display, e: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("{context}: {e}"))
}

fn compute_err(context: impl std::fmt::Display, e: impl std::fmt::Display) -> CliError {
    CliError::Compute(format!("{context}: {e}"))
}

#[derive(Debug, Parser)]
#[command(name = "sve-hdr", version, about = "Single-shot SVE HDR reconstruction with hue correction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CommandLine,
}

#[derive(Debug, Subcommand)]
pub enum CommandLine {
    /// Write raw SVE captures and clip masks for every scene and EV pair.
    Simulate(RunArgs),
    /// Reconstruct every simulated raw.
    Reconstruct(RunArgs),
    /// Score every reconstruction against its scene.
    Evaluate(RunArgs),
    /// Tabulate the scores into report.csv.
    Report(RunArgs),
    /// Simulate, reconstruct, evaluate and report.
    All(RunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodSelection {
    Conventional,
    Proposed,
    Both,
}

impl MethodSelection {
    pub fn methods(self) -> Vec<Method> {
        match self {
            MethodSelection::Conventional => vec![Method::Conventional],
            MethodSelection::Proposed => vec![Method::Proposed],
            MethodSelection::Both => Method::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvPairs(pub Vec<(f64, f64)>);

/// `1,2,3` means ±1, ±2, ±3 EV; `-2:1` is an explicit low:high pair.
pub fn parse_ev_pairs(s: &str) -> Result<EvPairs, String> {
    let pairs = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            let num = |v: &str| v.trim().parse::<f64>().map_err(|_| format!("bad EV value {v:?}"));
            let (lo, hi) = match t.split_once(':') {
                Some((lo, hi)) => (num(lo)?, num(hi)?),
                None => {
                    let e = num(t)?.abs();
                    (-e, e)
                }
            };
            if lo.is_finite() && hi.is_finite() && lo < hi {
                Ok((lo, hi))
            } else {
                Err(format!("EV pair {t:?} needs low < high"))
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    if pairs.is_empty() {
        return Err("no EV pairs given".into());
    }
    Ok(EvPairs(pairs))
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// HDR scenes (.hdr, .pfm) or one corpus manifest (.json). Without
    /// inputs, `simulate` renders the built-in synthetic corpus.
    #[arg(long = "input", short = 'i')]
    pub inputs: Vec<PathBuf>,
    /// Output directory.
    #[arg(long, short = 'o')]
    pub out: PathBuf,
    /// Comma separated EV pairs, e.g. `1,2,3,4` or `-2:1` [default: 1,2,3,4]
    #[arg(long = "ev-pairs", value_parser = parse_ev_pairs)]
    pub ev_pairs: Option<EvPairs>,
    #[arg(long, value_enum, default_value_t = MethodSelection::Both)]
    pub method: MethodSelection,
    /// Seed of the synthetic corpus.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Raw quantization depth: 8, 10, 12, 14 or 16.
    #[arg(long = "bit-depth", default_value_t = 8)]
    pub bit_depth: u32,
    /// Worker threads [default: available cores]
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Recompute and overwrite existing outputs.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Reconstruct,
    Evaluate,
    Report,
    All,
}

/// A validated invocation.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub command: Command,
    pub inputs: Vec<PathBuf>,
    pub out: PathBuf,
    /// `None` selects the defaults: ±1..±4 EV when simulating, every raw
    /// present in the output tree otherwise.
    pub ev_pairs: Option<Vec<(f64, f64)>>,
    pub methods: Vec<Method>,
    pub seed: u64,
    pub bit_depth: BitDepth,
    pub jobs: usize,
    pub force: bool,
}

pub const DEFAULT_EVS: [f64; 4] = [1.0, 2.0, 3.0, 4.0];

impl RunSpec {
    pub fn from_cli(cli: Cli) -> Result<Self, CliError> {
        let (command, args) = match cli.command {
            CommandLine::Simulate(a) => (Command::Simulate, a),
            CommandLine::Reconstruct(a) => (Command::Reconstruct, a),
            CommandLine::Evaluate(a) => (Command::Evaluate, a),
            CommandLine::Report(a) => (Command::Report, a),
            CommandLine::All(a) => (Command::All, a),
        };
        let bit_depth = BitDepth::new(args.bit_depth).map_err(|e| input_err("--bit-depth", e))?;
        let jobs = match args.jobs {
            Some(0) => return Err(CliError::Input("--jobs must be at least 1".into())),
            Some(n) => n,
            None => std::thread::available_parallelism().map_or(1, usize::from),
        };
        Ok(Self {
            command,
            inputs: args.inputs,
            out: args.out,
            ev_pairs: args.ev_pairs.map(|p| p.0),
            methods: args.method.methods(),
            seed: args.seed,
            bit_depth,
            jobs,
            force: args.force,
        })
    }
}

/// What a stage did.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StageSummary {
    pub written: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunSummary {
    pub simulate: Option<StageSummary>,
    pub reconstruct: Option<StageSummary>,
    pub evaluate: Option<StageSummary>,
    pub report: Option<StageSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneInfo {
    pub id: String,
    pub source: String,
    pub width: usize,
    pub height: usize,
    pub anchor_gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawInfo {
    pub scene: String,
    pub ev_low: f64,
    pub ev_high: f64,
    pub bit_depth: BitDepth,
    pub anchor_gain: f64,
    pub under_samples: usize,
    pub over_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchInfo {
    pub scene: String,
    pub ev_low: f64,
    pub ev_high: f64,
    pub pixel_count: usize,
    pub branches: BranchCounts,
}

/// Path layout of an output tree.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.json")
    }

    pub fn scenes(&self) -> PathBuf {
        self.root.join("scenes")
    }

    pub fn raw(&self) -> PathBuf {
        self.root.join("raw")
    }

    pub fn recon(&self) -> PathBuf {
        self.root.join("recon")
    }

    pub fn eval(&self) -> PathBuf {
        self.root.join("eval")
    }

    pub fn report(&self) -> PathBuf {
        self.root.join("report.csv")
    }

    pub fn scene(&self, id: &str, ext: &str) -> PathBuf {
        self.scenes().join(format!("{id}.{ext}"))
    }

    pub fn raw_file(&self, stem: &str, ext: &str) -> PathBuf {
        self.raw().join(format!("{stem}.{ext}"))
    }

    pub fn recon_file(&self, stem: &str, method: Method, ext: &str) -> PathBuf {
        self.recon().join(format!("{stem}_{method}.{ext}"))
    }

    pub fn eval_file(&self, stem: &str, method: Method) -> PathBuf {
        self.eval().join(format!("{stem}_{method}.json"))
    }
}

/// File stem of one capture, e.g. `scene_ev-2_+2`.
pub fn capture_stem(scene: &str, ev_low: f64, ev_high: f64) -> String {
    format!("{scene}_ev{ev_low:+}_{ev_high:+}")
}

fn partial_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".partial");
    path.with_file_name(name)
}

/// Writes through a sibling temporary file so readers never see a
/// half-written output.
fn atomic<E: std::fmt::Display>(path: &Path, write: impl FnOnce(&Path) -> Result<(), E>) -> Result<(), CliError> {
    let tmp = partial_path(path);
    if let Err(e) = write(&tmp) {
        let _ = fs::remove_file(&tmp);
        return Err(compute_err(path.display(), e));
    }
    fs::rename(&tmp, path).map_err(|e| compute_err(path.display(), e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    atomic(path, |tmp| -> Result<(), IoError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| IoError::Invalid(e.to_string()))?;
        text.push('\n');
        fs::write(tmp, text)?;
        Ok(())
    })
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| input_err(path.display(), e))?;
    serde_json::from_str(&text).map_err(|e| input_err(path.display(), e))
}

fn all_exist(paths: &[PathBuf]) -> bool {
    paths.iter().all(|p| p.is_file())
}

fn make_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| compute_err(dir.display(), e))
}

/// Runs `f` over `items` on a pool of `jobs` threads; results keep the input
/// order and the first error in that order wins.
fn parallel<I: Sync, R: Send>(
    jobs: usize,
    items: &[I],
    f: impl Fn(&I) -> Result<R, CliError> + Sync + Send,
) -> Result<Vec<R>, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| compute_err("thread pool", e))?;
    pool.install(|| items.par_iter().map(&f).collect::<Vec<_>>())
        .into_iter()
        .collect()
}

fn tally(flags: impl IntoIterator<Item = bool>) -> StageSummary {
    let mut s = StageSummary::default();
    for wrote in flags {
        if wrote {
            s.written += 1;
        } else {
            s.skipped += 1;
        }
    }
    s
}

fn sanitize_id(stem: &str) -> String {
    stem.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect()
}

/// Builds the corpus manifest from the inputs, checking every input exists.
pub fn resolve_manifest(spec: &RunSpec) -> Result<CorpusManifest, CliError> {
    let default_pairs = || symmetric_pairs(&DEFAULT_EVS);
    for p in &spec.inputs {
        if !p.is_file() {
            return Err(CliError::Input(format!("input {} does not exist", p.display())));
        }
    }
    let is_json = |p: &PathBuf| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let mut manifest = match spec.inputs.as_slice() {
        [] => CorpusManifest::default_synthetic(spec.seed),
        [one] if is_json(one) => {
            let mut m: CorpusManifest = read_json(one)?;
            let base = one.parent().unwrap_or(Path::new("."));
            for s in &mut m.scenes {
                if let SceneSource::File { path } = &mut s.source {
                    if path.is_relative() {
                        *path = base.join(&*path);
                    }
                    if !path.is_file() {
                        return Err(CliError::Input(format!("scene {}: {} does not exist", s.id, path.display())));
                    }
                }
            }
            m
        }
        files => {
            if let Some(j) = files.iter().find(|p| is_json(p)) {
                return Err(CliError::Input(format!(
                    "manifest {} cannot be combined with other inputs",
                    j.display()
                )));
            }
            let scenes = files
                .iter()
                .map(|p| SceneEntry {
                    id: sanitize_id(&p.file_stem().unwrap_or_default().to_string_lossy()),
                    source: SceneSource::File { path: p.clone() },
                    ev_pairs: default_pairs(),
                })
                .collect();
            CorpusManifest { seed: spec.seed, scenes }
        }
    };
    if let Some(pairs) = &spec.ev_pairs {
        for s in &mut manifest.scenes {
            s.ev_pairs = pairs.clone();
        }
    }
    manifest.validate().map_err(|e| input_err("manifest", e))?;
    Ok(manifest)
}

fn source_label(s: &SceneSource) -> String {
    match s {
        SceneSource::File { path } => path.display().to_string(),
        SceneSource::Synthetic { recipe, width, height } => format!("{}:{width}x{height}", recipe.name()),
    }
}

pub fn cmd_simulate(spec: &RunSpec) -> Result<StageSummary, CliError> {
    let manifest = resolve_manifest(spec)?;
    // Load and check every scene before anything is written.
    let scenes = generate_synthetic_corpus::<f64>(&manifest).map_err(|e: CorpusError| input_err("corpus", e))?;
    let layout = Layout::new(&spec.out);
    for dir in [layout.root.clone(), layout.scenes(), layout.raw()] {
        make_dir(&dir)?;
    }
    let manifest_json = serde_json::to_string_pretty(&manifest).map_err(|e| compute_err("manifest", e))? + "\n";
    if fs::read_to_string(layout.manifest()).ok().as_deref() != Some(manifest_json.as_str()) {
        atomic(&layout.manifest(), |t| fs::write(t, &manifest_json))?;
    }

    let work: Vec<_> = manifest.scenes.iter().zip(scenes).collect();
    let per_scene = parallel(spec.jobs, &work, |(entry, (id, scene))| {
        simulate_scene(spec, &layout, entry, id, scene)
    })?;
    Ok(tally(per_scene.into_iter().flatten()))
}

fn simulate_scene(
    spec: &RunSpec,
    layout: &Layout,
    entry: &SceneEntry,
    id: &str,
    scene: &HdrImage64,
) -> Result<Vec<bool>, CliError> {
    let ctx = |what: &str| format!("scene {id}: {what}");
    let scene_pfm = layout.scene(id, "pfm");
    let scene_json = layout.scene(id, "json");
    let mut wrote = Vec::new();
    if spec.force || !all_exist(&[scene_pfm.clone(), scene_json.clone()]) {
        atomic(&scene_pfm, |t| io::write_hdr_pfm(t, scene))?;
        wrote.push(true);
    } else {
        wrote.push(false);
    }
    // Downstream stages see the scene as stored, so simulate from that too.
    let stored: HdrImage64 = io::read_hdr(&scene_pfm).map_err(|e| compute_err(ctx("stored scene"), e))?;
    let anchor_gain = ExposureAnchor::MiddleGray
        .gain(&stored)
        .map_err(|e| input_err(ctx("exposure anchor"), e))?;
    let info = SceneInfo {
        id: id.to_string(),
        source: source_label(&entry.source),
        width: stored.width(),
        height: stored.height(),
        anchor_gain,
    };
    if spec.force || !scene_json.is_file() {
        write_json(&scene_json, &info)?;
    }

    for &(ev_low, ev_high) in &entry.ev_pairs {
        let stem = capture_stem(id, ev_low, ev_high);
        let files = [
            layout.raw_file(&stem, "pfm"),
            layout.raw_file(&stem, "mask.pfm"),
            layout.raw_file(&stem, "json"),
        ];
        if !spec.force && all_exist(&files) {
            wrote.push(false);
            continue;
        }
        let x = simulate_sve_capture(&stored, ev_low, ev_high, ExposureAnchor::Gain(anchor_gain), spec.bit_depth)
            .map_err(|e| compute_err(ctx(&stem), e))?;
        let mask = clip_mask_of(&x);
        atomic(&files[0], |t| io::write_raw(t, &x))?;
        atomic(&files[1], |t| io::write_mask(t, &mask))?;
        write_json(
            &files[2],
            &RawInfo {
                scene: id.to_string(),
                ev_low,
                ev_high,
                bit_depth: spec.bit_depth,
                anchor_gain,
                under_samples: mask.count(ClipFlag::Under),
                over_samples: mask.count(ClipFlag::Over),
            },
        )?;
        wrote.push(true);
    }
    Ok(wrote)
}

/// Sidecars of every raw in the tree, filtered by the requested EV pairs,
/// in file name order.
fn list_raws(spec: &RunSpec, layout: &Layout) -> Result<Vec<(String, RawInfo)>, CliError> {
    let dir = layout.raw();
    let entries = fs::read_dir(&dir).map_err(|e| {
        CliError::Input(format!("{}: {e} (run `simulate` first)", dir.display()))
    })?;
    let mut stems: Vec<String> = entries
        .filter_map(Result::ok)
        .filter_map(|e| e.file_name().to_str().map(String::from))
        .filter_map(|n| n.strip_suffix(".json").map(String::from))
        .collect();
    stems.sort();
    let mut out = Vec::new();
    for stem in stems {
        let info: RawInfo = read_json(&layout.raw_file(&stem, "json"))?;
        let wanted = spec
            .ev_pairs
            .as_ref()
            .is_none_or(|p| p.contains(&(info.ev_low, info.ev_high)));
        if wanted {
            out.push((stem, info));
        }
    }
    if out.is_empty() {
        return Err(CliError::Input(format!("no simulated raws in {}", dir.display())));
    }
    Ok(out)
}

pub fn cmd_reconstruct(spec: &RunSpec) -> Result<StageSummary, CliError> {
    let layout = Layout::new(&spec.out);
    let raws = list_raws(spec, &layout)?;
    for (stem, _) in &raws {
        let f = layout.raw_file(stem, "pfm");
        if !f.is_file() {
            return Err(CliError::Input(format!("{} is missing", f.display())));
        }
    }
    make_dir(&layout.recon())?;
    let per_raw = parallel(spec.jobs, &raws, |(stem, info)| reconstruct_one(spec, &layout, stem, info))?;
    Ok(tally(per_raw.into_iter().flatten()))
}

fn reconstruct_one(spec: &RunSpec, layout: &Layout, stem: &str, info: &RawInfo) -> Result<Vec<bool>, CliError> {
    let outputs = |m: Method| {
        let mut v = vec![layout.recon_file(stem, m, "pfm"), layout.recon_file(stem, m, "png")];
        if m == Method::Proposed {
            v.push(layout.recon_file(stem, m, "branches.json"));
        }
        v
    };
    let todo: Vec<Method> = spec
        .methods
        .iter()
        .copied()
        .filter(|&m| spec.force || !all_exist(&outputs(m)))
        .collect();
    let mut wrote: Vec<bool> = vec![false; spec.methods.len() - todo.len()];
    if todo.is_empty() {
        return Ok(wrote);
    }
    let x = io::read_raw::<f64>(layout.raw_file(stem, "pfm"), info.ev_low, info.ev_high, info.bit_depth)
        .map_err(|e| input_err(stem, e))?;
    let stages = shared_stages(&x).map_err(|e| compute_err(stem, e))?;
    for m in todo {
        let out = stages.finish(m).map_err(|e| compute_err(format!("{stem} ({m})"), e))?;
        let files = outputs(m);
        atomic(&files[0], |t| io::write_rgb_pfm(t, &out.image))?;
        atomic(&files[1], |t| io::write_png(t, &out.image))?;
        if let Some(branches) = out.branches {
            write_json(
                &files[2],
                &BranchInfo {
                    scene: info.scene.clone(),
                    ev_low: info.ev_low,
                    ev_high: info.ev_high,
                    pixel_count: out.image.len(),
                    branches,
                },
            )?;
        }
        wrote.push(true);
    }
    Ok(wrote)
}

pub fn cmd_evaluate(spec: &RunSpec) -> Result<StageSummary, CliError> {
    let layout = Layout::new(&spec.out);
    let raws = list_raws(spec, &layout)?;
    let mut jobs = Vec::new();
    for (stem, info) in &raws {
        for &m in &spec.methods {
            let recon = layout.recon_file(stem, m, "pfm");
            if !recon.is_file() {
                return Err(CliError::Input(format!("{} is missing (run `reconstruct` first)", recon.display())));
            }
            jobs.push((stem.clone(), info.clone(), m));
        }
    }
    make_dir(&layout.eval())?;
    let wrote = parallel(spec.jobs, &jobs, |(stem, info, m)| {
        let target = layout.eval_file(stem, *m);
        if !spec.force && target.is_file() {
            return Ok(false);
        }
        let scene: HdrImage64 = io::read_hdr(layout.scene(&info.scene, "pfm")).map_err(|e| input_err(&info.scene, e))?;
        let recon = io::read_rgb_pfm::<f64>(layout.recon_file(stem, *m, "pfm")).map_err(|e| input_err(stem, e))?;
        let report = evaluate(&scene, info.anchor_gain, &recon).map_err(|e| compute_err(format!("{stem} ({m})"), e))?;
        let entry = ReportEntry {
            scene: info.scene.clone(),
            ev_low: info.ev_low,
            ev_high: info.ev_high,
            method: *m,
            report,
        };
        write_json(&target, &entry)?;
        Ok(true)
    })?;
    Ok(tally(wrote))
}

/// Every evaluation sidecar in the tree, in file name order.
pub fn load_evaluations(layout: &Layout) -> Result<Vec<ReportEntry>, CliError> {
    let dir = layout.eval();
    let entries = fs::read_dir(&dir)
        .map_err(|e| CliError::Input(format!("{}: {e} (run `evaluate` first)", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    paths.iter().map(|p| read_json(p)).collect()
}

pub fn cmd_report(spec: &RunSpec) -> Result<StageSummary, CliError> {
    let layout = Layout::new(&spec.out);
    let entries: Vec<ReportEntry> = load_evaluations(&layout)?
        .into_iter()
        .filter(|e| spec.methods.contains(&e.method))
        .filter(|e| spec.ev_pairs.as_ref().is_none_or(|p| p.contains(&(e.ev_low, e.ev_high))))
        .collect();
    if entries.is_empty() {
        return Err(CliError::Input(format!("no evaluations in {}", layout.eval().display())));
    }
    let path = layout.report();
    let tmp = partial_path(&path);
    if let Err(e) = io::write_report(&entries, &tmp) {
        let _ = fs::remove_file(&tmp);
        return Err(compute_err(path.display(), e));
    }
    let unchanged = !spec.force && fs::read(&path).ok() == fs::read(&tmp).ok();
    if unchanged {
        let _ = fs::remove_file(&tmp);
        return Ok(StageSummary { written: 0, skipped: 1 });
    }
    fs::rename(&tmp, &path).map_err(|e| compute_err(path.display(), e))?;
    Ok(StageSummary { written: 1, skipped: 0 })
}

pub fn run(spec: &RunSpec) -> Result<RunSummary, CliError> {
    let mut summary = RunSummary::default();
    let c = spec.command;
    if matches!(c, Command::Simulate | Command::All) {
        summary.simulate = Some(cmd_simulate(spec)?);
    }
    if matches!(c, Command::Reconstruct | Command::All) {
        summary.reconstruct = Some(cmd_reconstruct(spec)?);
    }
    if matches!(c, Command::Evaluate | Command::All) {
        summary.evaluate = Some(cmd_evaluate(spec)?);
    }
    if matches!(c, Command::Report | Command::All) {
        summary.report = Some(cmd_report(spec)?);
    }
    Ok(summary)
}

/// Parses `args` (program name first), runs, and returns the exit code.
pub fn main_with_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { 0 };
        }
    };
    let result = RunSpec::from_cli(cli).and_then(|spec| run(&spec));
    match result {
        Ok(summary) => {
            for (name, s) in [
                ("simulate", summary.simulate),
                ("reconstruct", summary.reconstruct),
                ("evaluate", summary.evaluate),
                ("report", summary.report),
            ] {
                if let Some(s) = s {
                    println!("{name}: {} written, {} up to date", s.written, s.skipped);
                }
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

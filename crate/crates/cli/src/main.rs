//! `icevision-kit` command-line front end.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 missing input, 3 malformed
//! input, 64 usage error.

mod error;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use error::{write_failed, CliError, CliResult, EXIT_USAGE};
use icevision_kit::datastore::{
    read_annotations, read_detections, read_manifest, read_thresholds, read_tracks, write_annotations, write_atomic, write_detections,
    write_thresholds, write_tracks, ManifestFrames, ReadOptions, SequenceManifest,
};
use icevision_kit::frames::{convert_raw, write_pgm, write_ppm, CfaPattern, FrameSidecar};
use icevision_kit::harness::{generate_scenario, mock_detector, run_benchmark, NoiseModel, PipelineConfig, ScenarioSpec};
use icevision_kit::kv::KvFile;
use icevision_kit::refinement::{grid_search_thresholds, refine_tracks, LevelThresholds, ThresholdGrid};
use icevision_kit::scoring::{score_dataset, ScoringConfig, Stage};
use icevision_kit::tracking::{densify_linear, densify_ncc, run_tracker, select_keyframes, NccConfig, Track, TrackerConfig};
use icevision_kit::Taxonomy;

#[derive(Parser, Debug)]
#[command(name = "icevision-kit", version, about = "Score, track, refine and preprocess traffic-sign detections")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Common {
    /// Scoring rules
    #[arg(long, global = true, value_parser = parse_stage)]
    stage: Option<Stage>,
    /// key=value settings for the subcommand
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output file (standard output when omitted, where allowed)
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Restrict class codes to a registry: `russian` or a file of codes
    #[arg(long, global = true)]
    taxonomy: Option<String>,
    /// Skip records with unknown or malformed class codes
    #[arg(long, global = true)]
    permissive: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Score detections against annotations
    Score {
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        annotations: PathBuf,
        /// Also write the human-readable table here
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Chain keyframe detections into tracks
    Track {
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        stride: Option<u32>,
        /// Drop detections on frames that are not multiples of the stride
        #[arg(long)]
        select_keyframes: bool,
    },
    /// Fill the frames between keyframes of each track
    Interp {
        #[arg(long, required_unless_present = "detections", conflicts_with = "detections")]
        tracks: Option<PathBuf>,
        /// Keyframe detections, tracked first
        #[arg(long)]
        detections: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Method::Linear)]
        method: Method,
        /// Frame manifest, required by `--method ncc`
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Frames are raw sensor data with this CFA pattern
        #[arg(long)]
        pattern: Option<CfaPattern>,
        #[arg(long)]
        last_frame: Option<u32>,
        #[arg(long, value_enum, default_value_t = Emit::Tracks)]
        emit: Emit,
    },
    /// Average each track's classes and emit one detection per entry
    Refine {
        #[arg(long)]
        tracks: PathBuf,
        /// Thresholds file
        #[arg(long, conflicts_with = "levels")]
        thresholds: Option<PathBuf>,
        /// `specific,level2,top`
        #[arg(long)]
        levels: Option<String>,
    },
    /// Grid-search the refinement thresholds
    Tune {
        #[arg(long)]
        tracks: PathBuf,
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long, default_value = DEFAULT_GRID)]
        specific: String,
        #[arg(long, default_value = DEFAULT_GRID)]
        level2: String,
        #[arg(long, default_value = DEFAULT_GRID)]
        top: String,
    },
    /// Demosaic raw PGM frames into PPM
    Convert {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        sidecar: Option<PathBuf>,
        #[arg(long)]
        pattern: Option<CfaPattern>,
        #[arg(long)]
        equalize: bool,
        #[arg(long)]
        crop_keep: Option<usize>,
        /// Directory for `<stem>.ppm` outputs
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Generate a synthetic scenario with mock detections
    Synth {
        /// Mock detector noise (key=value)
        #[arg(long)]
        noise: Option<PathBuf>,
        #[arg(long)]
        stride: Option<u32>,
        /// Also write rendered frames and a manifest
        #[arg(long)]
        render: bool,
    },
    /// Time the post-processing pipeline on a synthetic scenario
    Bench {
        #[arg(long)]
        noise: Option<PathBuf>,
        #[arg(long)]
        stride: Option<u32>,
        #[arg(long)]
        thresholds: Option<PathBuf>,
    },
}

const DEFAULT_GRID: &str = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Linear,
    Ncc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Emit {
    Tracks,
    Detections,
}

fn parse_stage(s: &str) -> Result<Stage, String> {
    s.parse()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE as u8),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("icevision-kit: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let common = &cli.common;
    if let Some(jobs) = common.jobs {
        if jobs == 0 {
            return Err(CliError::usage("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global().map_err(|e| CliError::failure(e.to_string()))?;
    }
    match &cli.command {
        Command::Score { detections, annotations, table } => cmd_score(common, detections, annotations, table.as_deref()),
        Command::Track { detections, stride, select_keyframes } => cmd_track(common, detections, *stride, *select_keyframes),
        Command::Interp { tracks, detections, method, manifest, pattern, last_frame, emit } => cmd_interp(
            common,
            InterpArgs {
                tracks: tracks.as_deref(),
                detections: detections.as_deref(),
                method: *method,
                manifest: manifest.as_deref(),
                pattern: *pattern,
                last_frame: *last_frame,
                emit: *emit,
            },
        ),
        Command::Refine { tracks, thresholds, levels } => cmd_refine(common, tracks, thresholds.as_deref(), levels.as_deref()),
        Command::Tune { tracks, annotations, specific, level2, top } => cmd_tune(common, tracks, annotations, [specific, level2, top]),
        Command::Convert { inputs, sidecar, pattern, equalize, crop_keep, output_dir } => {
            cmd_convert(common, inputs, sidecar.as_deref(), *pattern, *equalize, *crop_keep, output_dir.as_deref())
        }
        Command::Synth { noise, stride, render } => cmd_synth(common, noise.as_deref(), *stride, *render),
        Command::Bench { noise, stride, thresholds } => cmd_bench(common, noise.as_deref(), *stride, thresholds.as_deref()),
    }
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::missing(format!("{}: {e}", path.display())))
}

fn read_options(common: &Common) -> CliResult<ReadOptions> {
    let taxonomy = match common.taxonomy.as_deref() {
        None => None,
        Some("russian") => Some(Taxonomy::russian()),
        Some(path) => Some(Taxonomy::load(Path::new(path))?),
    };
    Ok(ReadOptions { taxonomy, permissive: common.permissive })
}

/// Write to `--output`, or standard output when it is absent.
fn emit_text(common: &Common, text: &str) -> CliResult<()> {
    match &common.output {
        Some(path) => write_atomic(path, text.as_bytes()).map_err(write_failed),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn scoring_config(common: &Common) -> CliResult<ScoringConfig> {
    let mut cfg = ScoringConfig::for_stage(common.stage.unwrap_or(Stage::Offline));
    if let Some(path) = &common.config {
        let kv = KvFile::parse(&read_text(path)?).map_err(|e| CliError::from(e).context(path.display()))?;
        cfg = cfg.with_overrides(&kv).map_err(|e| CliError::from(e).context(path.display()))?;
        if common.stage.is_some_and(|s| s != cfg.stage) {
            return Err(CliError::usage(format!("--stage conflicts with the stage set in {}", path.display())));
        }
    }
    Ok(cfg)
}

fn tracker_config(common: &Common, stride: Option<u32>) -> CliResult<(TrackerConfig, NccConfig)> {
    let (mut cfg, ncc) = match &common.config {
        Some(path) => TrackerConfig::parse(&read_text(path)?).map_err(|e| CliError::from(e).context(path.display()))?,
        None => (TrackerConfig::default(), NccConfig::default()),
    };
    if let Some(s) = stride {
        cfg.keyframe_stride = s;
        cfg.validate().map_err(|e| CliError::usage(e.to_string()))?;
    }
    Ok((cfg, ncc))
}

fn scenario_spec(common: &Common) -> CliResult<ScenarioSpec> {
    match &common.config {
        Some(path) => ScenarioSpec::parse(&read_text(path)?).map_err(|e| CliError::from(e).context(path.display())),
        None => Ok(ScenarioSpec::default()),
    }
}

fn noise_model(path: Option<&Path>) -> CliResult<NoiseModel> {
    match path {
        Some(p) => NoiseModel::parse(&read_text(p)?).map_err(|e| CliError::from(e).context(p.display())),
        None => Ok(NoiseModel::default()),
    }
}

fn cmd_score(common: &Common, detections: &Path, annotations: &Path, table: Option<&Path>) -> CliResult<()> {
    let cfg = scoring_config(common)?;
    let opts = read_options(common)?;
    let dets = read_detections(detections, &opts)?;
    let ann = read_annotations(annotations, &opts)?;
    let report = score_dataset(&dets, &ann, &cfg)?;
    if let Some(path) = &common.output {
        write_atomic(path, report.to_records().as_bytes()).map_err(write_failed)?;
    }
    if let Some(path) = table {
        write_atomic(path, report.to_table().as_bytes()).map_err(write_failed)?;
    }
    print!("{}", report.to_table());
    Ok(())
}

fn cmd_track(common: &Common, detections: &Path, stride: Option<u32>, keyframes_only: bool) -> CliResult<()> {
    let (cfg, _) = tracker_config(common, stride)?;
    let mut dets = read_detections(detections, &read_options(common)?)?;
    if keyframes_only {
        dets = select_keyframes(&dets, cfg.keyframe_stride);
    }
    let tracks = run_tracker(&dets, &cfg)?;
    write_tracks_out(common, &tracks)
}

fn write_tracks_out(common: &Common, tracks: &[Track]) -> CliResult<()> {
    match &common.output {
        Some(path) => write_tracks(tracks, path).map_err(write_failed),
        None => emit_text(common, &icevision_kit::datastore::format_tracks(tracks).map_err(write_failed)?),
    }
}

struct InterpArgs<'a> {
    tracks: Option<&'a Path>,
    detections: Option<&'a Path>,
    method: Method,
    manifest: Option<&'a Path>,
    pattern: Option<CfaPattern>,
    last_frame: Option<u32>,
    emit: Emit,
}

fn cmd_interp(common: &Common, args: InterpArgs<'_>) -> CliResult<()> {
    let manifest: Option<SequenceManifest> = match (args.method, args.manifest) {
        (Method::Ncc, None) => return Err(CliError::usage("--method ncc needs --manifest")),
        (Method::Ncc, Some(p)) => Some(read_manifest(p)?),
        (Method::Linear, _) => None,
    };
    let (cfg, ncc) = tracker_config(common, None)?;
    let opts = read_options(common)?;
    let tracks = match (args.tracks, args.detections) {
        (Some(p), _) => read_tracks(p, &opts)?,
        (None, Some(p)) => run_tracker(&read_detections(p, &opts)?, &cfg)?,
        (None, None) => return Err(CliError::usage("either --tracks or --detections is required")),
    };
    let dense: Vec<Track> = match &manifest {
        None => {
            let last = args.last_frame.unwrap_or(u32::MAX);
            tracks.par_iter().map(|t| densify_linear(t, last)).collect()
        }
        Some(m) => {
            let frames = ManifestFrames::new(m, args.pattern);
            tracks.par_iter().map(|t| densify_ncc(t, &frames, &ncc)).collect::<Result<_, _>>()?
        }
    };
    match args.emit {
        Emit::Tracks => write_tracks_out(common, &dense),
        Emit::Detections => {
            let dets = dense.iter().flat_map(|t| t.entries.iter().map(|e| &e.detection));
            match &common.output {
                Some(path) => write_detections(dets, path).map_err(write_failed),
                None => emit_text(common, &icevision_kit::datastore::format_detections(dets).map_err(write_failed)?),
            }
        }
    }
}

fn parse_levels(text: &str) -> CliResult<LevelThresholds> {
    let v = ThresholdGrid::parse_list(text)?;
    let [s, l, t] = v[..] else {
        return Err(CliError::usage(format!("--levels needs three values, got {text:?}")));
    };
    Ok(LevelThresholds::new(s, l, t)?)
}

fn cmd_refine(common: &Common, tracks: &Path, thresholds: Option<&Path>, levels: Option<&str>) -> CliResult<()> {
    let thr = match (thresholds, levels) {
        (Some(p), _) => read_thresholds(p)?,
        (None, Some(l)) => parse_levels(l)?,
        (None, None) => LevelThresholds::default(),
    };
    let tracks = read_tracks(tracks, &read_options(common)?)?;
    let refined = refine_tracks(&tracks, &thr)?;
    match &common.output {
        Some(path) => write_detections(&refined, path).map_err(write_failed),
        None => emit_text(common, &icevision_kit::datastore::format_detections(&refined).map_err(write_failed)?),
    }
}

fn cmd_tune(common: &Common, tracks: &Path, annotations: &Path, lists: [&String; 3]) -> CliResult<()> {
    let [specific, level2, top] = lists.map(|s| ThresholdGrid::parse_list(s));
    let grid = ThresholdGrid { specific: specific?, level2: level2?, top: top? };
    grid.validate()?;
    let cfg = scoring_config(common)?;
    let opts = read_options(common)?;
    let tracks = read_tracks(tracks, &opts)?;
    let ann = read_annotations(annotations, &opts)?;
    let result = grid_search_thresholds(&tracks, &ann, &grid, &cfg)?;
    if let Some(path) = &common.output {
        write_thresholds(&result.thresholds, path).map_err(write_failed)?;
    }
    println!("best thresholds {} score {:.6} ({} triples)", result.thresholds, result.score, result.evaluations.len());
    Ok(())
}

fn cmd_convert(
    common: &Common,
    inputs: &[PathBuf],
    sidecar: Option<&Path>,
    pattern: Option<CfaPattern>,
    equalize: bool,
    crop_keep: Option<usize>,
    output_dir: Option<&Path>,
) -> CliResult<()> {
    let mut settings = match sidecar {
        Some(p) => FrameSidecar::parse(&read_text(p)?).map_err(|e| CliError::from(e).context(p.display()))?,
        None => FrameSidecar::default(),
    };
    if let Some(p) = pattern {
        settings.pattern = p;
    }
    settings.equalize |= equalize;
    if crop_keep.is_some() {
        settings.crop_keep = crop_keep;
    }
    let targets: Vec<(PathBuf, PathBuf)> = match (output_dir, &common.output) {
        (Some(_), Some(_)) => return Err(CliError::usage("use either --output or --output-dir")),
        (None, Some(out)) if inputs.len() == 1 => vec![(inputs[0].clone(), out.clone())],
        (None, _) => return Err(CliError::usage("--output-dir is required unless a single input is given with --output")),
        (Some(dir), None) => inputs
            .iter()
            .map(|i| {
                let stem = i.file_stem().ok_or_else(|| CliError::usage(format!("{}: no file name", i.display())))?;
                Ok((i.clone(), dir.join(stem).with_extension("ppm")))
            })
            .collect::<CliResult<_>>()?,
    };
    targets.par_iter().try_for_each(|(input, output)| -> CliResult<()> {
        let bytes = fs::read(input).map_err(|e| CliError::missing(format!("{}: {e}", input.display())))?;
        let rgb = convert_raw(&bytes, &settings).map_err(|e| CliError::from(e).context(input.display()))?;
        write_atomic(output, &write_ppm(&rgb)).map_err(write_failed)
    })
}

fn cmd_synth(common: &Common, noise: Option<&Path>, stride: Option<u32>, render: bool) -> CliResult<()> {
    let dir = common.output.as_deref().ok_or_else(|| CliError::usage("synth needs --output <directory>"))?;
    let spec = scenario_spec(common)?;
    let noise = noise_model(noise)?;
    let stride = stride.unwrap_or(TrackerConfig::default().keyframe_stride);
    let scenario = generate_scenario(&spec, common.seed.unwrap_or(0))?;
    let detections = mock_detector(&scenario, &noise, stride)?;
    fs::create_dir_all(dir).map_err(|e| CliError::failure(format!("{}: {e}", dir.display())))?;
    write_annotations(&scenario.annotations(), &dir.join("annotations.txt")).map_err(write_failed)?;
    write_annotations(&scenario.dense_annotations(), &dir.join("dense_annotations.txt")).map_err(write_failed)?;
    write_detections(detections.values().flatten(), &dir.join("detections.txt")).map_err(write_failed)?;
    if render {
        let frames_dir = dir.join("frames");
        fs::create_dir_all(&frames_dir).map_err(|e| CliError::failure(format!("{}: {e}", frames_dir.display())))?;
        (0..spec.frames).into_par_iter().try_for_each(|f| {
            write_atomic(&frames_dir.join(format!("{f:06}.pgm")), &write_pgm(&scenario.render_frame(f))).map_err(write_failed)
        })?;
        let mut manifest = format!("icevision-kit/v1 manifest\n# sequence: synthetic-{}\n# annotation: annotations.txt\n", scenario.seed);
        for f in 0..spec.frames {
            manifest.push_str(&format!("{f}\tframes/{f:06}.pgm\n"));
        }
        write_atomic(&dir.join("manifest.txt"), manifest.as_bytes()).map_err(write_failed)?;
    }
    println!(
        "{} frames, {} signs, {} annotated frames, {} keyframe detections",
        spec.frames,
        scenario.signs.len(),
        scenario.annotated_frames.len(),
        detections.values().map(Vec::len).sum::<usize>()
    );
    Ok(())
}

fn cmd_bench(common: &Common, noise: Option<&Path>, stride: Option<u32>, thresholds: Option<&Path>) -> CliResult<()> {
    let spec = scenario_spec(common)?;
    let noise = noise_model(noise)?;
    let mut cfg = PipelineConfig { scoring: ScoringConfig::for_stage(common.stage.unwrap_or(Stage::Offline)), ..PipelineConfig::default() };
    if let Some(s) = stride {
        cfg.tracker.keyframe_stride = s;
        cfg.tracker.validate().map_err(|e| CliError::usage(e.to_string()))?;
    }
    if let Some(p) = thresholds {
        cfg.thresholds = read_thresholds(p)?;
    }
    let scenario = generate_scenario(&spec, common.seed.unwrap_or(0))?;
    let report = run_benchmark(&scenario, &noise, &cfg)?;
    if let Some(path) = &common.output {
        write_atomic(path, report.to_records().as_bytes()).map_err(write_failed)?;
    }
    print!("{}", report.to_table());
    Ok(())
}

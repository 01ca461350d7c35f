use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use wapdet::config::RunConfig;
use wapdet::harness::external::DetectorCommand;
use wapdet::harness::images::{detect_image_sequence, ImageManifest};
use wapdet::harness::{
    best_point, generate_suite, roc_to_csv, score_suite, sweep_thresholds, Metric, ScenarioSpec, ThetaRange,
};
use wapdet::model::{read_sequence, write_sequence, FrameDetections, ImageBuffer};
use wapdet::temporal::TemporalState;
use wapdet::tracker::Tracker;
use wapdet::transforms::{AttackSpec, SqueezeSpec};
use wapdet::{wap_distance, DetectorError};

const FORMATS_HELP: &str = "\
Detection-exchange JSON (one frame):
  {\"frame_id\": 0, \"detections\": [{\"bbox\": [x1, y1, x2, y2], \"confidence\": 0.9, \"class_id\": 2}]}
A sequence file is a JSON array of frames in increasing frame_id order. Boxes are
corner format in pixels, origin top-left.

Scenario spec JSON (evaluate/generate): name, streams, n_frames, image_width,
image_height, objects | random_objects, jitter, attacks | random_attacks.
Builtins: builtin:default, builtin:small-object-jitter.

Image manifest JSON (evaluate with --detector-cmd):
  {\"stream_id\": \"cam0\", \"squeeze\": \"bit7\", \"attack\": {\"kind\": \"brightness\", \"delta\": 40},
   \"frames\": [{\"image\": \"f0.png\", \"adversarial\": false}, ...]}
The detector is run as `<cmd> <image.png>` and must print one frame object on stdout.

Exit codes: 0 success, 1 invalid input or configuration, 2 external detector failure.";

#[derive(Parser)]
#[command(name = "wapdet", version, about = "Adversarial-example detection for object detectors", after_help = FORMATS_HELP)]
struct Cli {
    /// TOML config file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Squeeze and/or attack a PNG image.
    Transform(TransformArgs),
    /// Distance between two detection files.
    Distance(DistanceArgs),
    /// Per-frame alarms for an (original, squeezed) detection sequence pair.
    Detect(DetectArgs),
    /// Kalman-track a detection sequence.
    Track(TrackArgs),
    /// Threshold sweep over a labeled scenario, written as ROC CSV.
    Evaluate(EvaluateArgs),
    /// Write the detection streams and labels of a scenario.
    Generate(GenerateArgs),
}

#[derive(Args, Default)]
struct MetricFlags {
    #[arg(long)]
    metric: Option<Metric>,
    #[arg(long)]
    min_overlap: Option<f64>,
    /// `a` of the area weighting x / (x + a).
    #[arg(long)]
    wf_a: Option<f64>,
    #[arg(long)]
    gamma_cs: Option<f64>,
    #[arg(long)]
    alpha_tp: Option<f64>,
    #[arg(long)]
    alpha_fp: Option<f64>,
    #[arg(long)]
    alpha_fn: Option<f64>,
}

impl MetricFlags {
    fn apply(&self, cfg: &mut RunConfig) {
        let m = &mut cfg.metric_params;
        if let Some(v) = self.metric {
            cfg.metric = v;
        }
        set(&mut m.min_overlap, self.min_overlap);
        set(&mut m.a, self.wf_a);
        set(&mut m.gamma_cs, self.gamma_cs);
        set(&mut m.alpha_tp, self.alpha_tp);
        set(&mut m.alpha_fp, self.alpha_fp);
        set(&mut m.alpha_fn, self.alpha_fn);
    }
}

fn set<T: Copy>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

#[derive(Args)]
struct TransformArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// `bitN` with N in 1..=7.
    #[arg(long)]
    squeeze: Option<String>,
    /// `gaussian:SIGMA:SEED` or `brightness:DELTA`; applied before squeezing.
    #[arg(long, allow_hyphen_values = true)]
    attack: Option<String>,
}

#[derive(Args)]
struct DistanceArgs {
    /// Reference detections (frame or sequence).
    #[arg(long)]
    gt: PathBuf,
    /// Compared detections (frame or sequence).
    #[arg(long)]
    pd: PathBuf,
    /// Print the wAP breakdown as JSON instead of the bare distance.
    #[arg(long)]
    breakdown: bool,
    #[command(flatten)]
    metric: MetricFlags,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Single,
    Temporal,
}

#[derive(Args)]
struct DetectArgs {
    #[arg(long)]
    original: PathBuf,
    #[arg(long)]
    squeezed: PathBuf,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    window: Option<usize>,
    /// `single` forces a window of 1.
    #[arg(long, value_enum, default_value = "temporal")]
    mode: Mode,
    /// CSV output (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    metric: MetricFlags,
}

#[derive(Args)]
struct TrackArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    reserved_age: Option<u32>,
    #[arg(long)]
    assoc_min_iou: Option<f64>,
    #[arg(long)]
    process_noise: Option<f64>,
    #[arg(long)]
    measurement_noise: Option<f64>,
    #[arg(long)]
    min_hits: Option<u32>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// `builtin:NAME`, a scenario spec file, or an image manifest with --detector-cmd.
    #[arg(long, default_value = "builtin:default")]
    scenario: String,
    #[arg(long)]
    window: Option<usize>,
    /// `start:stop:step`, inclusive.
    #[arg(long)]
    thetas: Option<ThetaRange>,
    #[arg(long)]
    seed: Option<u64>,
    /// External detector command, run once per image.
    #[arg(long)]
    detector_cmd: Option<String>,
    #[arg(long)]
    detector_timeout: Option<f64>,
    #[arg(long, default_value = "roc.csv")]
    out: PathBuf,
    #[command(flatten)]
    metric: MetricFlags,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value = "builtin:default")]
    scenario: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: PathBuf,
}

fn base_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::from_toml_file(p)?,
        None => RunConfig::default(),
    };
    set(&mut cfg.jobs, cli.jobs.map(Some));
    Ok(cfg)
}

fn io(cfg: &mut RunConfig, key: &str, path: impl AsRef<Path>) {
    cfg.io.insert(key.into(), path.as_ref().display().to_string());
}

fn start(cfg: &RunConfig) -> anyhow::Result<()> {
    cfg.validate()?;
    if let Some(n) = cfg.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker pool")?;
    }
    for line in cfg.header().lines() {
        eprintln!("# {line}");
    }
    Ok(())
}

fn pair_sequences(a: Vec<FrameDetections>, b: Vec<FrameDetections>) -> anyhow::Result<Vec<(FrameDetections, FrameDetections)>> {
    if a.len() != b.len() {
        bail!("sequences differ in length: {} vs {} frames", a.len(), b.len());
    }
    a.into_iter()
        .zip(b)
        .map(|(x, y)| {
            if x.frame_id != y.frame_id {
                bail!("frame ids do not line up: {} vs {}", x.frame_id, y.frame_id);
            }
            Ok((x, y))
        })
        .collect()
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = base_config(&cli)?;
    match cli.command {
        Command::Transform(a) => {
            io(&mut cfg, "input", &a.input);
            io(&mut cfg, "output", &a.output);
            start(&cfg)?;
            let squeeze = a.squeeze.as_deref().map(str::parse::<SqueezeSpec>).transpose()?;
            let attack = a.attack.as_deref().map(str::parse::<AttackSpec>).transpose()?;
            if squeeze.is_none() && attack.is_none() {
                bail!("nothing to do: give --squeeze and/or --attack");
            }
            let mut img = ImageBuffer::load_png(&a.input)?;
            if let Some(at) = attack {
                img = at.apply(&img)?;
            }
            if let Some(sq) = squeeze {
                img = sq.apply(&img);
            }
            img.save_png(&a.output)?;
        }
        Command::Distance(a) => {
            a.metric.apply(&mut cfg);
            io(&mut cfg, "gt", &a.gt);
            io(&mut cfg, "pd", &a.pd);
            start(&cfg)?;
            let pairs = pair_sequences(read_sequence(&a.gt)?, read_sequence(&a.pd)?)?;
            for (gt, pd) in &pairs {
                if a.breakdown {
                    let b = wap_distance(gt, pd, &cfg.metric_params);
                    println!("{}", serde_json::to_string(&b)?);
                } else {
                    println!("{:?}", cfg.metric.distance(gt, pd, &cfg.metric_params));
                }
            }
        }
        Command::Detect(a) => {
            a.metric.apply(&mut cfg);
            set(&mut cfg.temporal.theta, a.theta);
            set(&mut cfg.temporal.window, a.window);
            if let Mode::Single = a.mode {
                cfg.temporal.window = 1;
            }
            io(&mut cfg, "original", &a.original);
            io(&mut cfg, "squeezed", &a.squeezed);
            if let Some(o) = &a.out {
                io(&mut cfg, "out", o);
            }
            start(&cfg)?;
            let pairs = pair_sequences(read_sequence(&a.original)?, read_sequence(&a.squeezed)?)?;
            let mut state = TemporalState::new();
            let mut csv = String::from("frame_id,distance,alarm\n");
            for (o, s) in &pairs {
                let d = cfg.metric.distance(o, s, &cfg.metric_params);
                let alarm = state.step(d, &cfg.temporal);
                csv.push_str(&format!("{},{d:.6},{}\n", o.frame_id, u8::from(alarm)));
            }
            match &a.out {
                Some(p) => fs::write(p, csv).with_context(|| format!("writing {}", p.display()))?,
                None => print!("{csv}"),
            }
        }
        Command::Track(a) => {
            set(&mut cfg.tracker.reserved_age, a.reserved_age);
            set(&mut cfg.tracker.assoc_min_iou, a.assoc_min_iou);
            set(&mut cfg.tracker.process_noise, a.process_noise);
            set(&mut cfg.tracker.measurement_noise, a.measurement_noise);
            set(&mut cfg.tracker.min_hits_to_confirm, a.min_hits);
            io(&mut cfg, "input", &a.input);
            io(&mut cfg, "output", &a.output);
            start(&cfg)?;
            let frames = read_sequence(&a.input)?;
            let tracked = Tracker::new(cfg.tracker)?.run(&frames);
            let mut text = serde_json::to_string_pretty(&tracked)?;
            text.push('\n');
            fs::write(&a.output, text).with_context(|| format!("writing {}", a.output.display()))?;
        }
        Command::Evaluate(a) => {
            a.metric.apply(&mut cfg);
            set(&mut cfg.temporal.window, a.window);
            set(&mut cfg.thetas, a.thetas);
            set(&mut cfg.seed, a.seed);
            set(&mut cfg.detector_timeout_secs, a.detector_timeout);
            cfg.io.insert("scenario".into(), a.scenario.clone());
            io(&mut cfg, "out", &a.out);
            if let Some(cmd) = &a.detector_cmd {
                cfg.io.insert("detector_cmd".into(), cmd.clone());
            }
            start(&cfg)?;

            let suite = match &a.detector_cmd {
                Some(cmd) => {
                    let detector = DetectorCommand::parse(cmd)?
                        .with_timeout(Duration::from_secs_f64(cfg.detector_timeout_secs));
                    let manifest = ImageManifest::from_file(&a.scenario)?;
                    let work = tempfile::tempdir().context("creating work directory")?;
                    vec![detect_image_sequence(&manifest, &detector, work.path())?]
                }
                None => generate_suite(&ScenarioSpec::resolve(&a.scenario)?, cfg.seed)?,
            };
            let scored = score_suite(&suite, cfg.metric, &cfg.metric_params);
            let points = sweep_thresholds(&scored, cfg.temporal.window, &cfg.thetas.values())?;
            fs::write(&a.out, roc_to_csv(&points)).with_context(|| format!("writing {}", a.out.display()))?;
            let meta = a.out.with_extension("run.toml");
            fs::write(&meta, cfg.header()).with_context(|| format!("writing {}", meta.display()))?;
            if let Some(best) = best_point(&points) {
                eprintln!(
                    "best theta {:.6}: accuracy {:.4} tpr {:.4} fpr {:.4}",
                    best.theta, best.accuracy, best.tpr, best.fpr
                );
            }
        }
        Command::Generate(a) => {
            set(&mut cfg.seed, a.seed);
            cfg.io.insert("scenario".into(), a.scenario.clone());
            io(&mut cfg, "out_dir", &a.out_dir);
            start(&cfg)?;
            let suite = generate_suite(&ScenarioSpec::resolve(&a.scenario)?, cfg.seed)?;
            fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
            for seq in &suite {
                let (orig, sq): (Vec<_>, Vec<_>) = seq.frames.iter().map(|p| (p.original.clone(), p.squeezed.clone())).unzip();
                write_sequence(a.out_dir.join(format!("{}.original.json", seq.stream_id)), &orig)?;
                write_sequence(a.out_dir.join(format!("{}.squeezed.json", seq.stream_id)), &sq)?;
                let mut labels = String::from("frame_id,adversarial\n");
                for (p, l) in seq.frames.iter().zip(&seq.labels) {
                    labels.push_str(&format!("{},{}\n", p.original.frame_id, u8::from(*l)));
                }
                let path = a.out_dir.join(format!("{}.labels.csv", seq.stream_id));
                fs::write(&path, labels).with_context(|| format!("writing {}", path.display()))?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let detector_failure = e.chain().any(|c| {
                c.downcast_ref::<DetectorError>().is_some()
                    || matches!(c.downcast_ref::<wapdet::Error>(), Some(wapdet::Error::Detector(_)))
            });
            ExitCode::from(if detector_failure { 2 } else { 1 })
        }
    }
}

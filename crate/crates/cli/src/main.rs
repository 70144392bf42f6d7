use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use actipipe::calibration::{fit_calibration, CalibrationModel, FitOptions};
use actipipe::classifier::{fit_thresholds, read_labels_csv, write_labels_csv, ClassifierConfig};
use actipipe::dsp::{welch_psd, WelchParams};
use actipipe::eval::{
    evaluate, load_annotations, report_table, report_text, write_annotations_csv, EvalOptions,
    LabeledWindow,
};
use actipipe::features::{read_features_csv, write_features_csv, FeatureConfig};
use actipipe::pipeline::{
    annotated_features, listen, run_stream, training_set, Decision, ListenOptions, PipelineConfig,
    Preprocessor,
};
use actipipe::synth::{
    default_protocol, generate_corpus, generate_session, ActivityProfile, AnnotatedSession,
    CorpusOptions,
};
use actipipe::wire::{
    encode_packet, read_csv, write_csv, CsvMode, DatagramListener, RawSampleStream, Units,
};

#[derive(Parser)]
#[command(name = "actipipe", version, about = "Rest/walk/run classification from accelerometer data")]
struct Cli {
    /// Sample rate in Hz.
    #[arg(long, global = true, default_value_t = 50.0)]
    fs: f64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic session (CSV, or frames when --out ends in .bin).
    Gen(GenArgs),
    /// Fit a calibration model from an upright and an inverted recording.
    Calibrate(CalibrateArgs),
    /// Decode a binary frame file to CSV.
    Decode(DecodeArgs),
    /// Welch PSD of one preprocessed axis as `freq_hz,pxx`.
    Psd(PsdArgs),
    /// Per-second SMA and median-frequency features.
    Features(StreamArgs),
    /// Per-second activity labels.
    Classify(ClassifyArgs),
    /// Fit classifier thresholds.
    Fit(FitArgs),
    /// Score labels against annotations.
    Eval(EvalArgs),
    /// Classify frames arriving as UDP datagrams.
    Listen(ListenArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Protocol {
    /// 300 s each of rest, walk and run.
    Default,
    Rest,
    Walk,
    Run,
    /// Still, sensor upright.
    Upright,
    /// Still, sensor upside down.
    Inverted,
    /// Pure z-axis sinusoid.
    Tone,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum, default_value_t = Protocol::Default)]
    protocol: Protocol,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Duration in seconds for single-segment protocols.
    #[arg(long, default_value_t = 60.0)]
    duration: f64,
    #[arg(long, default_value_t = 3.0)]
    tone_hz: f64,
    #[arg(long, default_value_t = 0.5)]
    tone_g: f64,
    /// Units of CSV output.
    #[arg(long, default_value = "mv")]
    units: Units,
    /// Device model used to convert g to millivolts (nominal if omitted).
    #[arg(long)]
    cal: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    node: u16,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Annotation sidecar; defaults to --out with its extension replaced by `.annotations.csv`.
    #[arg(long)]
    annotations: Option<PathBuf>,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    upright: PathBuf,
    #[arg(long)]
    inverted: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StreamArgs {
    /// CSV samples, or binary frames when the name ends in .bin.
    #[arg(long = "in")]
    input: PathBuf,
    /// Units of CSV input.
    #[arg(long, default_value = "mv")]
    units: Units,
    /// Skip unparsable CSV rows instead of failing.
    #[arg(long)]
    lenient: bool,
    /// Calibration model JSON (nominal if omitted).
    #[arg(long)]
    cal: Option<PathBuf>,
    /// Node to process when the input holds several.
    #[arg(long)]
    node: Option<u16>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    X,
    Y,
    Z,
}

#[derive(Args)]
struct PsdArgs {
    #[command(flatten)]
    stream: StreamArgs,
    #[arg(long, value_enum, default_value_t = Axis::Z)]
    axis: Axis,
    #[arg(long, default_value_t = 128)]
    segment: usize,
}

#[derive(Args)]
struct ClassifyArgs {
    #[command(flatten)]
    stream: StreamArgs,
    /// Classifier config JSON (shipped defaults if omitted).
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum CorpusKind {
    Default,
    Overlap,
    Separated,
}

#[derive(Args)]
struct FitArgs {
    /// Recordings to train on, each paired with an --annotations file.
    #[arg(long = "in")]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    annotations: Vec<PathBuf>,
    #[arg(long, default_value = "mv")]
    units: Units,
    #[arg(long)]
    cal: Option<PathBuf>,
    /// Train on a generated corpus instead of recordings.
    #[arg(long, value_enum, conflicts_with = "inputs")]
    synthetic: Option<CorpusKind>,
    /// First seed of the synthetic corpus.
    #[arg(long, default_value_t = 101)]
    seed: u64,
    /// Windows skipped at the start of every annotated segment.
    #[arg(long, default_value_t = 6)]
    warmup: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Labels as written by `classify`.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    annotations: PathBuf,
    /// Features as written by `features`, for the f_m columns.
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long, default_value_t = 6)]
    warmup: usize,
    /// Also write the table as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct ListenArgs {
    #[arg(long, default_value_t = 9750)]
    port: u16,
    #[arg(long)]
    cal: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Exit after this many datagrams.
    #[arg(long)]
    max_frames: Option<u64>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ACTIPIPE_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(1)
        }
    }
}

fn broken_pipe(e: &anyhow::Error) -> bool {
    e.chain()
        .filter_map(|c| c.downcast_ref::<io::Error>())
        .any(|io| io.kind() == io::ErrorKind::BrokenPipe)
}

/// Joins the error chain, leaving out causes already quoted by the layer above.
fn describe(e: &anyhow::Error) -> String {
    let mut msg = String::new();
    let mut prev = String::new();
    for cause in e.chain() {
        let s = cause.to_string();
        if !prev.contains(&s) {
            if !msg.is_empty() {
                msg.push_str(": ");
            }
            msg.push_str(&s);
        }
        prev = s;
    }
    msg
}

fn run(cli: Cli) -> Result<()> {
    if !(cli.fs.is_finite() && cli.fs > 0.0) {
        bail!("--fs must be positive, got {}", cli.fs);
    }
    let fs = cli.fs;
    match cli.command {
        Command::Gen(a) => gen(fs, a),
        Command::Calibrate(a) => calibrate(fs, a),
        Command::Decode(a) => decode(a),
        Command::Psd(a) => psd(fs, a),
        Command::Features(a) => features(fs, a),
        Command::Classify(a) => classify(fs, a),
        Command::Fit(a) => fit(fs, a),
        Command::Eval(a) => eval(fs, a),
        Command::Listen(a) => listen_cmd(fs, a),
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn load_calibration(path: Option<&Path>) -> Result<CalibrationModel> {
    match path {
        Some(p) => CalibrationModel::load(p)
            .map_err(actipipe::Error::from)
            .with_context(|| format!("cannot load calibration model {}", p.display())),
        None => Ok(CalibrationModel::nominal()),
    }
}

fn load_classifier(path: Option<&Path>) -> Result<ClassifierConfig> {
    match path {
        Some(p) => ClassifierConfig::load(p)
            .map_err(actipipe::Error::from)
            .with_context(|| format!("cannot load classifier config {}", p.display())),
        None => Ok(ClassifierConfig::default()),
    }
}

fn is_frames(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("bin"))
}

fn read_samples(path: &Path, units: Units, lenient: bool) -> Result<RawSampleStream> {
    if is_frames(path) {
        let bytes = std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
        let (stream, stats) = RawSampleStream::from_frames(&bytes);
        log::info!(
            "{}: {} samples, {} duplicates, {} late, {} corrupt",
            path.display(),
            stream.len(),
            stats.duplicates,
            stats.late,
            stats.corrupt_frames
        );
        return Ok(stream);
    }
    let mode = if lenient { CsvMode::Lenient } else { CsvMode::Strict };
    let read = read_csv(path, units, mode)
        .map_err(actipipe::Error::from)
        .with_context(|| format!("cannot read {}", path.display()))?;
    for e in &read.row_errors {
        log::warn!("{}: skipped line {}: {}", path.display(), e.line, e.message);
    }
    Ok(read.stream)
}

/// Reads the input and keeps one node.
fn single_node(a: &StreamArgs) -> Result<RawSampleStream> {
    let mut stream = read_samples(&a.input, a.units, a.lenient)?;
    let mut ids: Vec<u16> = stream.samples.iter().map(|s| s.node_id).collect();
    ids.sort_unstable();
    ids.dedup();
    let node = match (a.node, ids.as_slice()) {
        (Some(n), _) => n,
        (None, [] | [_]) => return Ok(stream),
        (None, _) => bail!("input holds nodes {ids:?}; pick one with --node"),
    };
    stream.samples.retain(|s| s.node_id == node);
    if stream.is_empty() {
        bail!("no samples for node {node}");
    }
    Ok(stream)
}

fn pipeline_config(fs: f64, cal: Option<&Path>, config: Option<&Path>) -> Result<PipelineConfig> {
    Ok(PipelineConfig {
        fs_hz: fs,
        calibration: load_calibration(cal)?,
        classifier: load_classifier(config)?,
        features: FeatureConfig::for_rate(fs),
        ..PipelineConfig::default()
    })
}

fn decisions(fs: f64, a: &StreamArgs, config: Option<&Path>) -> Result<Vec<Decision>> {
    let cfg = pipeline_config(fs, a.cal.as_deref(), config)?;
    let stream = single_node(a)?;
    Ok(run_stream(&stream, &cfg)?.into_iter().map(|(_, d)| d).collect())
}

fn gen(fs: f64, a: GenArgs) -> Result<()> {
    let device = load_calibration(a.cal.as_deref())?;
    let single = |p: ActivityProfile| vec![(p, a.duration)];
    let protocol = match a.protocol {
        Protocol::Default => default_protocol(),
        Protocol::Rest => single(ActivityProfile::rest()),
        Protocol::Walk => single(ActivityProfile::walk()),
        Protocol::Run => single(ActivityProfile::run()),
        Protocol::Upright => single(ActivityProfile::rest()),
        Protocol::Inverted => single(ActivityProfile {
            gravity: [0.0, 0.0, -1.0],
            ..ActivityProfile::rest()
        }),
        Protocol::Tone => single(ActivityProfile::z_tone(a.tone_hz, a.tone_g)),
    };
    let session = generate_session(&protocol, fs, a.seed).map_err(actipipe::Error::from)?;

    let mut out = output(a.out.as_deref())?;
    match &a.out {
        Some(p) if is_frames(p) => {
            for packet in session.to_packets(&device, a.node) {
                out.write_all(&encode_packet(&packet))?;
            }
        }
        _ => {
            let mut stream = match a.units {
                Units::Mv => session.to_mv_stream(&device),
                Units::G => session.to_g_stream(),
            };
            stream.samples.iter_mut().for_each(|s| s.node_id = a.node);
            write_csv(&mut out, &stream)?;
        }
    }
    out.flush()?;

    let sidecar = a.annotations.clone().or_else(|| {
        a.out.as_ref().map(|p| p.with_extension("annotations.csv"))
    });
    if let Some(p) = sidecar {
        write_annotations_csv(output(Some(&p))?, &session.annotations)?;
        log::info!("annotations written to {}", p.display());
    }
    Ok(())
}

fn calibrate(fs: f64, a: CalibrateArgs) -> Result<()> {
    let upright = read_samples(&a.upright, Units::Mv, false)?;
    let inverted = read_samples(&a.inverted, Units::Mv, false)?;
    let opts = FitOptions {
        fs_hz: fs,
        ..FitOptions::default()
    };
    let model = fit_calibration(&upright, &inverted, &opts).map_err(actipipe::Error::from)?;
    let mut out = output(a.out.as_deref())?;
    writeln!(out, "{}", model.to_json().map_err(actipipe::Error::from)?)?;
    out.flush()?;
    Ok(())
}

fn decode(a: DecodeArgs) -> Result<()> {
    let stream = read_samples(&a.input, Units::Mv, false)?;
    let mut out = output(a.out.as_deref())?;
    write_csv(&mut out, &stream)?;
    Ok(())
}

fn psd(fs: f64, a: PsdArgs) -> Result<()> {
    let stream = single_node(&a.stream)?;
    let calibration = match stream.units {
        Units::Mv => Some(load_calibration(a.stream.cal.as_deref())?),
        Units::G => None,
    };
    let mut pre = Preprocessor::new(calibration, 3, fs)?;
    let k = a.axis as usize;
    let signal: Vec<f64> = stream.samples.iter().map(|s| pre.process(s.axes)[k]).collect();
    let params = WelchParams {
        segment_len: a.segment,
        ..WelchParams::default()
    };
    let psd = welch_psd(&signal, fs, &params).map_err(actipipe::Error::from)?;
    let mut out = output(a.stream.out.as_deref())?;
    writeln!(out, "freq_hz,pxx")?;
    for (f, p) in psd.freqs_hz.iter().zip(&psd.pxx) {
        writeln!(out, "{f},{p}")?;
    }
    out.flush()?;
    Ok(())
}

fn features(fs: f64, a: StreamArgs) -> Result<()> {
    let fv: Vec<_> = decisions(fs, &a, None)?.iter().map(|d| d.features).collect();
    write_features_csv(output(a.out.as_deref())?, &fv)?;
    Ok(())
}

fn classify(fs: f64, a: ClassifyArgs) -> Result<()> {
    let labels: Vec<_> = decisions(fs, &a.stream, a.config.as_deref())?
        .iter()
        .map(|d| (d.window_start_ms, d.label))
        .collect();
    write_labels_csv(output(a.stream.out.as_deref())?, &labels)?;
    Ok(())
}

fn fit(fs: f64, a: FitArgs) -> Result<()> {
    let cfg = pipeline_config(fs, a.cal.as_deref(), None)?;
    let (training, provenance) = match a.synthetic {
        Some(kind) => {
            let (opts, name) = match kind {
                CorpusKind::Default => (CorpusOptions::default(), "default"),
                CorpusKind::Overlap => (CorpusOptions::overlap_stressed(), "overlap"),
                CorpusKind::Separated => (CorpusOptions::well_separated(), "separated"),
            };
            let opts = CorpusOptions { fs_hz: fs, ..opts };
            let corpus: Vec<AnnotatedSession> = generate_corpus(&opts, a.seed).map_err(actipipe::Error::from)?;
            let provenance = format!(
                "actipipe fit --synthetic {name} --seed {} --warmup {} ({} sessions, seeds {}..={})",
                a.seed,
                a.warmup,
                opts.sessions,
                a.seed,
                a.seed + opts.sessions as u64 - 1
            );
            (training_set(&corpus, &cfg, a.warmup)?, provenance)
        }
        None => {
            if a.inputs.is_empty() {
                bail!("fit needs --in recordings with --annotations, or --synthetic");
            }
            if a.inputs.len() != a.annotations.len() {
                bail!(
                    "{} recordings but {} annotation files",
                    a.inputs.len(),
                    a.annotations.len()
                );
            }
            let mut training = Vec::new();
            for (input, ann) in a.inputs.iter().zip(&a.annotations) {
                let stream = read_samples(input, a.units, false)?;
                let annotations = load_annotations(ann)
                    .map_err(actipipe::Error::from)
                    .with_context(|| format!("cannot read {}", ann.display()))?;
                let ds: Vec<Decision> = run_stream(&stream, &cfg)?.into_iter().map(|(_, d)| d).collect();
                training.extend(annotated_features(&ds, &annotations, a.warmup));
            }
            (training, format!("actipipe fit on {} recordings", a.inputs.len()))
        }
    };
    log::info!("fitting on {} windows", training.len());
    let fitted = fit_thresholds(&training).map_err(actipipe::Error::from)?;
    let mut doc = serde_json::to_value(fitted)?;
    doc["provenance"] = provenance.into();
    let mut out = output(a.out.as_deref())?;
    writeln!(out, "{}", serde_json::to_string_pretty(&doc)?)?;
    out.flush()?;
    Ok(())
}

fn eval(fs: f64, a: EvalArgs) -> Result<()> {
    let labels = read_labels_csv(File::open(&a.input).with_context(|| format!("cannot open {}", a.input.display()))?)
        .map_err(actipipe::Error::from)
        .with_context(|| format!("cannot read {}", a.input.display()))?;
    let annotations = load_annotations(&a.annotations)
        .map_err(actipipe::Error::from)
        .with_context(|| format!("cannot read {}", a.annotations.display()))?;
    let window_samples = FeatureConfig::for_rate(fs).window_samples;
    let fm: std::collections::HashMap<u64, f64> = match &a.features {
        Some(p) => read_features_csv(
            File::open(p).with_context(|| format!("cannot open {}", p.display()))?,
            window_samples,
        )
        .map_err(actipipe::Error::from)
        .with_context(|| format!("cannot read {}", p.display()))?
        .into_iter()
        .filter_map(|f| f.fm_hz.map(|fm| (f.window_start_ms, fm)))
        .collect(),
        None => Default::default(),
    };
    let span_ms = (window_samples as f64 * 1000.0 / fs).round() as u64;
    let windows: Vec<LabeledWindow> = labels
        .iter()
        .map(|&(start_ms, label)| LabeledWindow {
            start_ms,
            end_ms: start_ms + span_ms,
            label,
            fm_hz: fm.get(&start_ms).copied(),
        })
        .collect();
    let opts = EvalOptions {
        warmup_windows_per_segment: a.warmup,
    };
    let report = evaluate(&windows, &annotations, &opts).map_err(actipipe::Error::from)?;
    let mut out = output(None)?;
    write!(out, "{}", report_text(&report))?;
    out.flush()?;
    if let Some(p) = &a.csv {
        let (_, csv) = report_table(&report);
        std::fs::write(p, csv).with_context(|| format!("cannot write {}", p.display()))?;
    }
    Ok(())
}

fn listen_cmd(fs: f64, a: ListenArgs) -> Result<()> {
    let cfg = pipeline_config(fs, a.cal.as_deref(), a.config.as_deref())?;
    let listener = DatagramListener::bind(a.port).map_err(actipipe::Error::from)?;
    log::info!("listening on {}", listener.local_addr().map_err(actipipe::Error::from)?);
    let opts = ListenOptions {
        max_frames: a.max_frames,
        ..ListenOptions::default()
    };
    let stdout = io::stdout();
    println!("node_id,window_start_ms,label");
    let summary = listen(listener, &cfg, &opts, |node, d| {
        let mut lock = stdout.lock();
        let _ = writeln!(lock, "{node},{},{}", d.window_start_ms, d.label);
        let _ = lock.flush();
    })?;
    log::info!(
        "{} frames, {} decisions, {} duplicates, {} late, {} corrupt",
        summary.frames,
        summary.decisions,
        summary.reorder.duplicates,
        summary.reorder.late,
        summary.reorder.corrupt_frames
    );
    Ok(())
}

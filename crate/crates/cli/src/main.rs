use std::path::{Path, PathBuf};
use std::process::ExitCode;

use attkws::config::RunConfig;
use attkws::evaluation::{
    emit_report, frr_at_fa, negative_hours, parse_scores_csv, roc, score_manifest, scores_csv, RocSeries,
};
use attkws::features::FeatureExtractor;
use attkws::models::checkpoint;
use attkws::streaming::stream_file;
use attkws::training::{synth, train, write_metrics_csv, Dataset, Manifest};
use attkws::KwsError;
use clap::{Parser, Subcommand};

/// Attention-based keyword spotting: features, training, evaluation and streaming.
#[derive(Parser, Debug)]
#[command(name = "kws", version)]
struct Cli {
    /// Run configuration (flat TOML; see --dump-config).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Override one configuration key.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,

    /// Random seed (same as --set seed=N).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Print the effective configuration with documentation and exit.
    #[arg(long, global = true)]
    dump_config: bool,

    #[command(subcommand)]
    cmd: Option<Cmd>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Compute PCEN Mel features of a WAV file and write a KWSF file.
    Featurize {
        #[arg(long)]
        wav: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model and write the best-validation checkpoint.
    Train {
        /// Training manifest.
        #[arg(long)]
        train: PathBuf,
        /// Validation manifest.
        #[arg(long)]
        val: PathBuf,
        /// Output checkpoint.
        #[arg(long)]
        out: PathBuf,
        /// Per-step metrics CSV.
        #[arg(long)]
        metrics: Option<PathBuf>,
        #[command(flatten)]
        arch: Arch,
    },
    /// Score a test manifest and write the ROC report.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        target_fa: Option<f64>,
        /// Writes <prefix>.csv, <prefix>.svg and <prefix>.scores.csv.
        #[arg(long)]
        out_prefix: PathBuf,
        /// Runtime attention window in frames.
        #[arg(long)]
        window: Option<usize>,
    },
    /// Stream a WAV file and print detections as `frame<TAB>time_s<TAB>score`.
    Stream {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        wav: PathBuf,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        window: Option<usize>,
        #[arg(long)]
        refractory: Option<usize>,
    },
    /// Print the parameter count of a model configuration.
    Params {
        #[command(flatten)]
        arch: Arch,
    },
    /// Combine score files from `eval` into one ROC report.
    Roc {
        /// One scores CSV per model; the series is named after the file.
        #[arg(long = "scores", required = true)]
        scores: Vec<PathBuf>,
        #[arg(long)]
        out_prefix: PathBuf,
        #[arg(long)]
        target_fa: Option<f64>,
    },
    /// Generate the synthetic keyword corpus (WAV files and manifest.tsv).
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 200)]
        positives: usize,
        #[arg(long, default_value_t = 200)]
        negatives: usize,
        #[arg(long, default_value_t = 15.0)]
        negative_secs: f64,
    },
}

/// Architecture flags; unset flags keep the configuration value.
#[derive(clap::Args, Debug)]
struct Arch {
    /// attention_e2e | deep_kws
    #[arg(long)]
    kind: Option<String>,
    /// dnn | lstm | gru | crnn
    #[arg(long)]
    encoder: Option<String>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    nodes: Option<usize>,
    /// soft | average
    #[arg(long)]
    attention: Option<String>,
    #[arg(long)]
    conv_channels: Option<usize>,
}

impl Arch {
    fn apply(&self, cfg: &mut RunConfig) -> attkws::Result<()> {
        let pairs = [
            ("model_kind", self.kind.clone()),
            ("encoder", self.encoder.clone()),
            ("layers", self.layers.map(|v| v.to_string())),
            ("nodes", self.nodes.map(|v| v.to_string())),
            ("attention", self.attention.clone()),
            ("conv_channels", self.conv_channels.map(|v| v.to_string())),
        ];
        for (k, v) in pairs {
            if let Some(v) = v {
                cfg.set(k, &v)?;
            }
        }
        Ok(())
    }
}

enum Failure {
    Usage(String),
    Runtime(KwsError),
}

impl From<KwsError> for Failure {
    fn from(e: KwsError) -> Self {
        Failure::Runtime(e)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n\nRun `kws --help` for usage.");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn effective_config(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p).map_err(|e| Failure::Usage(e.to_string()))?,
        None => RunConfig::default(),
    };
    for s in &cli.sets {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("--set expects KEY=VALUE, got {s:?}")))?;
        cfg.set(k.trim(), v.trim()).map_err(|e| Failure::Usage(e.to_string()))?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn usage(e: KwsError) -> Failure {
    Failure::Usage(e.to_string())
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut cfg = effective_config(&cli)?;
    if let Some(Cmd::Train { arch, .. } | Cmd::Params { arch }) = &cli.cmd {
        arch.apply(&mut cfg).map_err(usage)?;
    }
    if cli.dump_config {
        print!("{}", cfg.dump());
        return Ok(());
    }
    let Some(cmd) = cli.cmd else {
        return Err(Failure::Usage("no subcommand given".into()));
    };
    let pool = attkws::parallel::worker_pool()?;
    pool.install(|| execute(cmd, cfg))
}

fn extractor(cfg: &RunConfig) -> Result<FeatureExtractor, Failure> {
    FeatureExtractor::new(cfg.frontend_config()).map_err(usage)
}

fn series_name(path: &Path) -> String {
    let stem = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    stem.trim_end_matches(".csv").trim_end_matches(".scores").to_string()
}

fn execute(cmd: Cmd, cfg: RunConfig) -> Result<(), Failure> {
    match cmd {
        Cmd::Featurize { wav, out } => {
            let fm = extractor(&cfg)?.extract_file(&wav)?;
            fm.write(&out)?;
            println!("{}\t{}x{}", out.display(), fm.num_frames(), fm.channels());
        }
        Cmd::Params { .. } => {
            let m = cfg.model_config().map_err(usage)?;
            println!("{}", m.count_params());
        }
        Cmd::Train {
            train: train_path,
            val,
            out,
            metrics,
            ..
        } => {
            let mcfg = cfg.model_config().map_err(usage)?;
            let tcfg = cfg.train_config();
            tcfg.validate().map_err(usage)?;
            let fx = extractor(&cfg)?;
            let tr = Dataset::from_manifest(&Manifest::load(&train_path)?, &fx)?;
            let va = Dataset::from_manifest(&Manifest::load(&val)?, &fx)?;
            log::info!("training {} ({} parameters)", mcfg.label(), mcfg.count_params());
            let outcome = train(&mcfg, &tr, &va, &tcfg)?;
            checkpoint::save(&outcome.best, &out)?;
            if let Some(p) = metrics {
                write_metrics_csv(&outcome.metrics, p)?;
            }
            println!(
                "{}\tsteps {}\tbest step {}\ttrain accuracy {:.4}",
                out.display(),
                outcome.steps_run(),
                outcome.best_step,
                outcome.final_train_accuracy().unwrap_or(f64::NAN)
            );
        }
        Cmd::Eval {
            checkpoint: ck,
            manifest,
            target_fa,
            out_prefix,
            window,
        } => {
            let model = checkpoint::load(&ck, None)?;
            let fx = extractor(&cfg)?;
            let m = Manifest::load(&manifest)?;
            let scored = score_manifest(&model, &m, &fx, window.unwrap_or(cfg.stream_window))?;
            let curve = roc(&scored.scores, scored.negative_hours())?;
            let target = target_fa.unwrap_or(cfg.target_fa);
            let op = frr_at_fa(&curve, target)?;
            let name = model.config().label();
            emit_report(&[RocSeries { name, points: curve }], &out_prefix)?;
            let scores_path = PathBuf::from(format!("{}.scores.csv", out_prefix.display()));
            std::fs::write(&scores_path, scores_csv(&scored.scores)).map_err(|e| KwsError::Io {
                path: scores_path.clone(),
                source: e,
            })?;
            println!(
                "frr_at_fa\t{target}\t{:.6}\tthreshold\t{}{}",
                op.frr(),
                op.point.threshold,
                if op.fallback { "\t(target not reached)" } else { "" }
            );
        }
        Cmd::Stream {
            checkpoint: ck,
            wav,
            threshold,
            window,
            refractory,
        } => {
            let model = checkpoint::load(&ck, None)?;
            let mut sc = cfg.stream_config();
            sc.threshold = threshold.unwrap_or(sc.threshold);
            sc.window = window.unwrap_or(sc.window);
            sc.refractory = refractory.unwrap_or(sc.refractory);
            if !(sc.threshold > 0.0 && sc.threshold < 1.0) || sc.window == 0 {
                return Err(Failure::Usage(
                    "threshold must lie in (0, 1) and window must be positive".into(),
                ));
            }
            for e in stream_file(&wav, &model, &extractor(&cfg)?, &sc)? {
                println!("{}\t{:.2}\t{:.6}", e.frame, e.time_s, e.score);
            }
        }
        Cmd::Roc {
            scores,
            out_prefix,
            target_fa,
        } => {
            let target = target_fa.unwrap_or(cfg.target_fa);
            let mut series = Vec::new();
            for p in &scores {
                let text = std::fs::read_to_string(p).map_err(|e| KwsError::Io {
                    path: p.clone(),
                    source: e,
                })?;
                let sc = parse_scores_csv(&text)?;
                let curve = roc(&sc, negative_hours(&sc))?;
                let name = series_name(p);
                println!("{name}\tfrr_at_fa\t{target}\t{:.6}", frr_at_fa(&curve, target)?.frr());
                series.push(RocSeries { name, points: curve });
            }
            emit_report(&series, &out_prefix)?;
        }
        Cmd::Synth {
            out,
            positives,
            negatives,
            negative_secs,
        } => {
            let sc = synth::SynthConfig {
                seed: cfg.seed,
                positives,
                negatives,
                negative_secs,
                sample_rate: cfg.sample_rate,
                ..Default::default()
            };
            let m = synth::write_corpus(&synth::synthesize(&sc)?, &out)?;
            let (p, n) = m.counts();
            println!("{}\t{p} positive\t{n} negative", out.join("manifest.tsv").display());
        }
    }
    Ok(())
}

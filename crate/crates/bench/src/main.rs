use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use denoise_bench::config::ExperimentConfig;
use denoise_bench::corpus::write_synthetic_corpus;
use denoise_bench::pipeline::{cmd_denoise, cmd_eval, cmd_mix};
use denoise_bench::report::cmd_report;
use denoise_bench::{BenchError, Method, RunSummary, SEED_ENV};
use denoise_core::adaptive::Algorithm;
use denoise_core::vad::VadFeature;
use denoise_core::wavelet::{ShrinkMode, ThresholdMethod, TransformKind, WaveletFamily};

#[derive(Parser)]
#[command(name = "denoise-bench", version, about = "Speech denoising experiment driver")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment config; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[arg(long, global = true, env = SEED_ENV)]
    seed: Option<u64>,
    /// Parallel workers for mix, denoise and eval.
    #[arg(long, global = true, default_value_t = default_jobs())]
    jobs: usize,
    /// SNR targets in dB, comma separated.
    #[arg(long, global = true, value_delimiter = ',', allow_negative_numbers = true)]
    snr: Option<Vec<f64>>,
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Wavelet,
    Adaptive,
}

#[derive(Subcommand)]
enum Command {
    /// Resample clean files to 8 kHz and mix them with noise at each target SNR.
    Mix {
        #[arg(long)]
        clean_dir: Option<PathBuf>,
        #[arg(long)]
        noise_file: Option<PathBuf>,
    },
    /// Run a denoiser grid over every noisy file.
    Denoise {
        #[arg(long, value_enum)]
        method: MethodArg,
        #[arg(long, value_delimiter = ',')]
        families: Option<Vec<WaveletFamily>>,
        #[arg(long, value_delimiter = ',')]
        kinds: Option<Vec<TransformKind>>,
        #[arg(long, value_delimiter = ',')]
        thresholds: Option<Vec<ThresholdMethod>>,
        #[arg(long, value_delimiter = ',')]
        modes: Option<Vec<ShrinkMode>>,
        #[arg(long, value_delimiter = ',')]
        algorithms: Option<Vec<Algorithm>>,
        #[arg(long, value_delimiter = ',')]
        vad: Option<Vec<VadFeature>>,
    },
    /// Score denoised files against clean and noisy counterparts.
    Eval,
    /// Group results by algorithm, variant and target SNR.
    Report {
        /// CSV with columns file,algorithm,variant,input_snr_db,pesq.
        #[arg(long)]
        pesq_csv: Option<PathBuf>,
    },
    /// Write a synthetic clean corpus and a babble noise file.
    Synth {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, default_value_t = 4)]
        files: usize,
        #[arg(long, default_value_t = 3.0)]
        duration: f64,
    },
    /// Host the blinded MOS listening test.
    MosServe {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        bind: IpAddr,
        #[arg(long)]
        clips: PathBuf,
        /// Ratings log; defaults to <clips>/ratings.jsonl.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Directory served at `/`.
        #[arg(long = "static")]
        static_dir: Option<PathBuf>,
    },
}

fn load_config(c: &Common) -> Result<ExperimentConfig, BenchError> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(d) = &c.output_dir {
        cfg.output_dir = d.clone();
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(t) = &c.snr {
        cfg.snr_targets = t.clone();
    }
    Ok(cfg)
}

fn report_summary(stage: &str, s: &RunSummary) -> ExitCode {
    tracing::info!(stage, produced = s.produced, failed = s.failures.len(), "done");
    for (item, reason) in &s.failures {
        eprintln!("{stage}: {item}: {reason}");
    }
    ExitCode::from(s.exit_code())
}

fn run(cli: Cli) -> Result<ExitCode, BenchError> {
    let jobs = cli.common.jobs.max(1);
    let mut cfg = load_config(&cli.common)?;
    match cli.command {
        Command::Mix { clean_dir, noise_file } => {
            cfg.clean_dir = clean_dir.or(cfg.clean_dir);
            cfg.noise_file = noise_file.or(cfg.noise_file);
            Ok(report_summary("mix", &cmd_mix(&cfg, jobs)?))
        }
        Command::Denoise {
            method,
            families,
            kinds,
            thresholds,
            modes,
            algorithms,
            vad,
        } => {
            let w = &mut cfg.wavelet;
            w.families = families.unwrap_or(std::mem::take(&mut w.families));
            w.kinds = kinds.unwrap_or(std::mem::take(&mut w.kinds));
            w.methods = thresholds.unwrap_or(std::mem::take(&mut w.methods));
            w.modes = modes.unwrap_or(std::mem::take(&mut w.modes));
            let a = &mut cfg.adaptive;
            a.algorithms = algorithms.unwrap_or(std::mem::take(&mut a.algorithms));
            a.vad = vad.unwrap_or(std::mem::take(&mut a.vad));
            let method = match method {
                MethodArg::Wavelet => Method::Wavelet,
                MethodArg::Adaptive => Method::Adaptive,
            };
            Ok(report_summary("denoise", &cmd_denoise(&cfg, method, jobs)?))
        }
        Command::Eval => Ok(report_summary("eval", &cmd_eval(&cfg, jobs)?)),
        Command::Report { pesq_csv } => {
            print!("{}", cmd_report(&cfg, pesq_csv.as_deref())?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Synth { dir, files, duration } => {
            let c = write_synthetic_corpus(&dir, cfg.seed, files, duration)?;
            println!("wrote {} clean files and {}", c.clean.len(), c.noise.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::MosServe {
            port,
            bind,
            clips,
            log,
            static_dir,
        } => {
            let mut config = mos_service::Config::new(clips);
            if let Some(l) = log {
                config.log_path = l;
            }
            config.static_dir = static_dir;
            let rt = tokio::runtime::Runtime::new().map_err(|e| BenchError::Config(format!("tokio runtime: {e}")))?;
            rt.block_on(mos_service::serve(config, SocketAddr::new(bind, port)))
                .map_err(|e| BenchError::Config(e.to_string()))?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

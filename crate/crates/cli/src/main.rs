mod config;
mod losscheck;

use std::ffi::OsStr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use articulate::dataset::{
    load_wav, plan_mixtures, render_plan, resolve, save_wav, temporal_split, Manifest, WavFormat,
};
use articulate::dsp::mel_spectrogram;
use articulate::features::{write_uft1, Uft1};
use articulate::metrics::{evaluate_pair, MetricReport};
use articulate::sensing::{
    simulate_reflection, synth_multitone, white_noise, MotionProfile,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Deserialize;

use config::PipelineConfig;
use losscheck::LossKind;

const EXIT_INPUT: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;

#[derive(Parser)]
#[command(name = "articulate", version, about = "Ultrasound Doppler speech sensing pipelines")]
struct Cli {
    /// TOML pipeline configuration; omitted keys keep their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Print the resolved configuration and exit.
    #[arg(long)]
    print_config: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Write the multi-tone transmit signal.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        duration: f64,
        #[arg(long, value_enum, default_value_t = Format::Float32)]
        format: Format,
    },
    /// Simulate the received echo of a motion profile.
    Simulate {
        /// TOML motion profile.
        #[arg(long)]
        profile: PathBuf,
        /// Transmit WAV; synthesized from the tone plan when omitted.
        #[arg(long)]
        tx: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        duration: f64,
        /// Add the transmit signal itself as a direct path.
        #[arg(long)]
        direct_path: bool,
        /// RMS of additive receiver noise.
        #[arg(long, default_value_t = 0.0)]
        noise_rms: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Float32)]
        format: Format,
    },
    /// Captures to T x 14 Doppler features (UFT1).
    ExtractUltra(ExtractArgs),
    /// Captures or 16 kHz speech to T x 128 log-Mel features (UFT1).
    ExtractMel(ExtractArgs),
    /// Mix clean and noise manifests into a noisy set.
    Mix {
        #[arg(long)]
        clean: PathBuf,
        #[arg(long)]
        noise: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Noises drawn per clean entry.
        #[arg(long)]
        per_clean: Option<usize>,
        #[command(flatten)]
        jobs: Jobs,
    },
    /// Per-speaker chronological train/test split.
    Split {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        test_fraction: Option<f64>,
    },
    /// Score processed speech against clean references.
    Evaluate {
        /// JSON lines of `{"id", "clean", "processed"}`.
        #[arg(long)]
        pairs: PathBuf,
        /// JSON lines report.
        #[arg(long)]
        out: PathBuf,
        /// JSON lines of `{"id", "pesq"}` computed by an external tool.
        #[arg(long)]
        pesq: Option<PathBuf>,
        #[command(flatten)]
        jobs: Jobs,
    },
    /// Check analytic loss gradients on random instances.
    Losscheck {
        #[arg(long, value_enum)]
        loss: LossKind,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// Largest acceptable relative error.
        #[arg(long, default_value_t = 1e-4)]
        threshold: f64,
    },
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
    #[command(flatten)]
    jobs: Jobs,
}

#[derive(Args)]
struct Jobs {
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Float32,
    Pcm16,
}

impl From<Format> for WavFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Float32 => WavFormat::Float32,
            Format::Pcm16 => WavFormat::Pcm16,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    let numerical = e
        .chain()
        .any(|c| matches!(c.downcast_ref(), Some(articulate::Error::Numerical(_))));
    if numerical {
        EXIT_NUMERICAL
    } else {
        EXIT_INPUT
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if cli.print_config {
        print!("{}", cfg.to_toml());
        return Ok(ExitCode::SUCCESS);
    }
    let Some(command) = cli.command else {
        bail!("no subcommand given; see --help");
    };
    match command {
        Command::Synth {
            out,
            duration,
            format,
        } => {
            let tx = synth_multitone(&cfg.features.tones, duration, None)?;
            save_wav(&out, &tx, format.into())?;
            write_config_for_file(&cfg, &out)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Simulate {
            profile,
            tx,
            duration,
            direct_path,
            noise_rms,
            out,
            format,
        } => {
            let text = std::fs::read_to_string(&profile)
                .with_context(|| format!("reading {}", profile.display()))?;
            let motion: MotionProfile = toml::from_str(&text)
                .with_context(|| format!("parsing motion profile {}", profile.display()))?;
            let tones = &cfg.features.tones;
            let tx = match tx {
                Some(path) => load_wav(&path)?,
                None => synth_multitone(tones, duration, None)?,
            };
            let mut rx = simulate_reflection(&tx, &motion, tones)?;
            if direct_path {
                rx = rx.add(&tx)?;
            }
            if noise_rms > 0.0 {
                rx = rx.add(&white_noise(rx.fs(), rx.len(), noise_rms, cfg.seed)?)?;
            }
            save_wav(&out, &rx, format.into())?;
            write_config_for_file(&cfg, &out)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::ExtractUltra(args) => extract(&cfg, args, Feature::Ultrasound),
        Command::ExtractMel(args) => extract(&cfg, args, Feature::Mel),
        Command::Mix {
            clean,
            noise,
            out_dir,
            per_clean,
            jobs,
        } => mix(&cfg, &clean, &noise, &out_dir, per_clean, &jobs),
        Command::Split {
            manifest,
            out_dir,
            test_fraction,
        } => {
            let m = Manifest::load(&manifest)?;
            let base = manifest.parent().unwrap_or(Path::new(""));
            let fraction = test_fraction.unwrap_or(cfg.dataset.test_fraction);
            let (mut train, mut test) = temporal_split(&m, fraction)?;
            std::fs::create_dir_all(&out_dir)?;
            for e in train.entries.iter_mut().chain(test.entries.iter_mut()) {
                e.path = std::path::absolute(resolve(base, &e.path))?;
            }
            train.save(out_dir.join("train.jsonl"))?;
            test.save(out_dir.join("test.jsonl"))?;
            cfg.dataset.test_fraction = fraction;
            cfg.write_beside(&out_dir)?;
            println!("train {} entries, test {} entries", train.len(), test.len());
            Ok(ExitCode::SUCCESS)
        }
        Command::Evaluate {
            pairs,
            out,
            pesq,
            jobs,
        } => evaluate(&cfg, &pairs, &out, pesq.as_deref(), &jobs),
        Command::Losscheck {
            loss,
            trials,
            threshold,
        } => {
            let worst = losscheck::run(loss, trials, &cfg.losses, cfg.seed)?;
            println!("max relative error: {worst:.3e} over {trials} trials");
            if worst < threshold {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("error: max relative error {worst:.3e} exceeds {threshold:e}");
                Ok(ExitCode::from(EXIT_NUMERICAL))
            }
        }
    }
}

fn write_config_for_file(cfg: &PipelineConfig, out: &Path) -> anyhow::Result<()> {
    let mut name = out.file_name().unwrap_or(OsStr::new("run")).to_os_string();
    name.push(".config.toml");
    let path = out.with_file_name(name);
    std::fs::write(&path, cfg.to_toml()).with_context(|| format!("writing {}", path.display()))
}

fn pool(jobs: &Jobs) -> anyhow::Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs.jobs {
        if n == 0 {
            bail!("--jobs must be at least 1");
        }
        b = b.num_threads(n);
    }
    Ok(b.build()?)
}

/// Runs `f` over `items` in parallel, reporting each failure on one line.
fn run_batch<T: Sync, R: Send>(
    jobs: &Jobs,
    items: &[T],
    label: impl Fn(&T) -> String + Sync,
    f: impl Fn(&T) -> anyhow::Result<R> + Sync,
) -> anyhow::Result<(Vec<R>, Vec<u8>)> {
    let results: Vec<_> = pool(jobs)?.install(|| items.par_iter().map(&f).collect());
    let mut ok = Vec::new();
    let mut failures = Vec::new();
    for (item, r) in items.iter().zip(results) {
        match r {
            Ok(v) => ok.push(v),
            Err(e) => {
                eprintln!("error: {}: {e:#}", label(item));
                failures.push(exit_code(&e));
            }
        }
    }
    Ok((ok, failures))
}

fn summarize(done: usize, failures: &[u8]) -> ExitCode {
    eprintln!("{done} succeeded, {} failed", failures.len());
    match failures.iter().max() {
        None => ExitCode::SUCCESS,
        Some(&code) => ExitCode::from(code),
    }
}

#[derive(Clone, Copy)]
enum Feature {
    Ultrasound,
    Mel,
}

fn extract(cfg: &PipelineConfig, args: ExtractArgs, feature: Feature) -> anyhow::Result<ExitCode> {
    std::fs::create_dir_all(&args.out_dir)?;
    let pipeline = &cfg.features;
    let (done, failures) = run_batch(
        &args.jobs,
        &args.inputs,
        |p| p.display().to_string(),
        |input| {
            let capture = load_wav(input)?;
            let uft = match feature {
                Feature::Ultrasound => {
                    let f = pipeline.ultrasound(&capture)?;
                    Uft1::new(f.frames, f.fs, f.hop as u32)
                }
                Feature::Mel => {
                    // already-decimated speech skips the capture front end
                    let m = if capture.fs() == pipeline.mel.fs {
                        mel_spectrogram(&capture, &pipeline.mel)?
                    } else {
                        pipeline.mel(&capture)?
                    };
                    Uft1::new(m.frames, m.fs, m.hop as u32)
                }
            };
            let stem = input
                .file_stem()
                .ok_or_else(|| anyhow!("input has no file name"))?;
            let mut name = stem.to_os_string();
            name.push(".uft");
            write_uft1(args.out_dir.join(name), &uft)?;
            Ok(())
        },
    )?;
    cfg.write_beside(&args.out_dir)?;
    Ok(summarize(done.len(), &failures))
}

fn mix(
    cfg: &PipelineConfig,
    clean_path: &Path,
    noise_path: &Path,
    out_dir: &Path,
    per_clean: Option<usize>,
    jobs: &Jobs,
) -> anyhow::Result<ExitCode> {
    let mut cfg = cfg.clone();
    if let Some(n) = per_clean {
        cfg.dataset.noises_per_clean = n;
    }
    let clean = Manifest::load(clean_path)?;
    let noise = Manifest::load(noise_path)?;
    let clean_base = clean_path.parent().unwrap_or(Path::new(""));
    let noise_base = noise_path.parent().unwrap_or(Path::new(""));
    let plans = plan_mixtures(&clean, &noise, &cfg.mix_spec(), cfg.dataset.noises_per_clean)?;
    std::fs::create_dir_all(out_dir)?;
    let (done, failures) = run_batch(
        jobs,
        &plans,
        |p| p.clean_id.clone(),
        |plan| Ok(render_plan(plan, &clean, clean_base, &noise, noise_base, out_dir)?),
    )?;
    let noisy = Manifest::new(done.into_iter().flatten().collect())?;
    noisy.save(out_dir.join("noisy.jsonl"))?;
    cfg.write_beside(out_dir)?;
    println!("{} mixtures written", noisy.len());
    Ok(summarize(plans.len() - failures.len(), &failures))
}

#[derive(Deserialize)]
struct PairLine {
    id: String,
    clean: PathBuf,
    processed: PathBuf,
}

#[derive(Deserialize)]
struct PesqLine {
    id: String,
    pesq: f64,
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> anyhow::Result<Vec<T>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            serde_json::from_str(l).with_context(|| format!("{}:{}", path.display(), n + 1))
        })
        .collect()
}

fn evaluate(
    cfg: &PipelineConfig,
    pairs_path: &Path,
    out: &Path,
    pesq_path: Option<&Path>,
    jobs: &Jobs,
) -> anyhow::Result<ExitCode> {
    let pairs: Vec<PairLine> = read_jsonl(pairs_path)?;
    let pesq: Vec<PesqLine> = match pesq_path {
        Some(p) => read_jsonl(p)?,
        None => Vec::new(),
    };
    let base = pairs_path.parent().unwrap_or(Path::new(""));
    let (reports, failures) = run_batch(
        jobs,
        &pairs,
        |p| p.id.clone(),
        |p| -> anyhow::Result<MetricReport> {
            let clean = load_wav(resolve(base, &p.clean))?;
            let processed = load_wav(resolve(base, &p.processed))?;
            let mut r = evaluate_pair(&p.id, &clean, &processed, &cfg.eval)?;
            r.pesq = pesq.iter().find(|q| q.id == p.id).map(|q| q.pesq);
            Ok(r)
        },
    )?;
    let mut text = String::new();
    for r in &reports {
        text.push_str(&serde_json::to_string(r)?);
        text.push('\n');
    }
    std::fs::write(out, text).with_context(|| format!("writing {}", out.display()))?;
    write_config_for_file(cfg, out)?;
    Ok(summarize(reports.len(), &failures))
}

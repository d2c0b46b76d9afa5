use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use upn_core::audio::{read_wav, resample_to_48k, write_wav, WavFormat};
use upn_core::conditioning::FlagSchedule;
use upn_core::datagen::{detect_multispeaker, generate_dataset, select_interference, speaker_id};
use upn_core::desk::{
    build_training_set, enrollment_embeddings, enrollment_variants, held_out_items, load_training_set,
    train_desk_embedder, variants_for, DeskConfig,
};
use upn_core::embedder::{embed, read_embedding_cache, write_embedding_cache, EmbedderModel, SpeakerEmbedding};
use upn_core::harness::{evaluate, measure_rtf, EvalReport, Mode, Pipeline};
use upn_core::net::{load_params, NetParams};
use upn_core::rng;
use upn_core::trainer::train_from;
use upn_core::{AudioBuffer, Error};

const EMBEDDER_FILE: &str = "embedder.json";

#[derive(Parser, Debug)]
#[command(name = "upn", version, about = "Personalized / non-personalized speech enhancement toolkit")]
struct Cli {
    /// TOML configuration (data, embedder, train sections)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// overrides every seed in the configuration
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// enhancement checkpoint
    #[arg(long, global = true)]
    model: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    mode: Option<ModeArg>,
    /// per-frame flag file for schedule mode
    #[arg(long, global = true)]
    schedule: Option<PathBuf>,
    /// enrollment recording of the target speaker
    #[arg(long, global = true)]
    enroll: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Pse,
    Nse,
    Schedule,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Pse => Mode::Personalized,
            ModeArg::Nse => Mode::NonPersonalized,
            ModeArg::Schedule => Mode::Scheduled,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the synthetic training corpus (WAV triples, flags, features, manifest)
    Datagen {
        #[arg(long)]
        out: PathBuf,
    },
    /// Flag multi-speaker clips; with --enroll and --candidates, list usable interference speakers
    Cleanup {
        /// embedder model (JSON)
        #[arg(long)]
        embedder: PathBuf,
        /// directory with one sub-directory of WAV clips per speaker
        #[arg(long)]
        candidates: Option<PathBuf>,
        clips: Vec<PathBuf>,
    },
    /// Train the toy speaker embedder, or embed --enroll into an embedding file
    Embed {
        #[arg(long)]
        out: PathBuf,
        /// embedder model used with --enroll
        #[arg(long)]
        embedder: Option<PathBuf>,
    },
    /// Train the enhancement network
    Train {
        /// output directory for checkpoints, log and embedder
        #[arg(long)]
        out: PathBuf,
        /// dataset written by `datagen`; generated in memory when absent
        #[arg(long)]
        data: Option<PathBuf>,
        /// pre-trained embedder model; trained from the corpus when absent
        #[arg(long)]
        embedder: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        /// weight of the VAD term in the gain loss
        #[arg(long)]
        mu: Option<f64>,
    },
    /// Enhance a WAV file
    Enhance {
        input: PathBuf,
        #[arg(long, short)]
        output: PathBuf,
        /// embedder model; defaults to embedder.json next to the checkpoint
        #[arg(long)]
        embedder: Option<PathBuf>,
        /// precomputed embedding file (from `embed --enroll`)
        #[arg(long, conflicts_with = "enroll")]
        embedding: Option<PathBuf>,
    },
    /// Score a checkpoint on held-out synthetic mixtures
    Eval {
        #[arg(long)]
        embedder: Option<PathBuf>,
        /// also write the JSON-lines report here
        #[arg(long)]
        out: Option<PathBuf>,
        /// print JSON lines instead of the table
        #[arg(long)]
        json: bool,
    },
    /// Real-time factor of the streaming pipeline
    Bench {
        /// seconds of audio per run
        #[arg(long, default_value_t = 10.0)]
        duration: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let usage = e.chain().any(|c| matches!(c.downcast_ref::<Error>(), Some(Error::Usage(_))));
            ExitCode::from(if usage { 2 } else { 1 })
        }
    }
}

fn load_config(cli: &Cli) -> Result<DeskConfig> {
    let mut cfg: DeskConfig = match &cli.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => DeskConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.data.seed = seed;
        cfg.embedder.seed = seed;
        cfg.train.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli)?;
    match &cli.command {
        Command::Datagen { out } => {
            let records = generate_dataset(&cfg.data, None, out)?;
            eprintln!("wrote {} segments to {}", records.len(), out.display());
        }
        Command::Cleanup {
            embedder,
            candidates,
            clips,
        } => cleanup(&cli, embedder, candidates.as_deref(), clips)?,
        Command::Embed { out, embedder } => match &cli.enroll {
            Some(enroll) => {
                let model = EmbedderModel::load(embedder.as_ref().context("--embedder is required with --enroll")?)?;
                let z = embed(&model, &read_audio(enroll)?)?;
                let name = enroll.file_stem().map_or("enrollment".into(), |s| s.to_string_lossy().into_owned());
                write_embedding_cache(out, &[(name, z)])?;
                eprintln!("wrote embedding to {}", out.display());
            }
            None => {
                let model = train_desk_embedder(&cfg)?;
                model.save(out)?;
                eprintln!("wrote embedder to {}", out.display());
            }
        },
        Command::Train {
            out,
            data,
            embedder,
            epochs,
            mu,
        } => train(cfg, out, data.as_deref(), embedder.as_deref(), *epochs, *mu)?,
        Command::Enhance {
            input,
            output,
            embedder,
            embedding,
        } => enhance(&cli, input, output, embedder.as_deref(), embedding.as_deref())?,
        Command::Eval { embedder, out, json } => {
            let pipeline = Pipeline::new(load_model(&cli)?)?;
            let model = load_embedder(&cli, embedder.as_deref())?;
            let items = held_out_items(&cfg, &enrollment_embeddings(&cfg, &model)?)?;
            let modes = match cli.mode {
                Some(m) => vec![m.into()],
                None => vec![Mode::Personalized, Mode::NonPersonalized, Mode::Scheduled],
            };
            let reports = modes
                .into_iter()
                .map(|m| evaluate(&pipeline, &items, m))
                .collect::<upn_core::Result<Vec<EvalReport>>>()?;
            let mut lines = String::new();
            for r in &reports {
                lines.push_str(&r.to_json_lines()?);
            }
            if let Some(path) = out {
                fs::write(path, &lines).with_context(|| format!("writing {}", path.display()))?;
            }
            let mut stdout = std::io::stdout().lock();
            if *json {
                stdout.write_all(lines.as_bytes())?;
            } else {
                for r in &reports {
                    writeln!(stdout, "{}", r.to_table())?;
                }
            }
        }
        Command::Bench { duration } => {
            let params = match &cli.model {
                Some(p) => load_params(p)?,
                None => NetParams::init(cfg.train.net, rng::derive_str(cfg.train.seed, "init"))?,
            };
            let rtf = measure_rtf(&params, *duration)?;
            println!("{}", serde_json::json!({ "duration_s": duration, "rtf": rtf }));
        }
    }
    Ok(())
}

fn read_audio(path: &Path) -> Result<AudioBuffer> {
    let audio = read_wav(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(if audio.sample_rate == 48_000 {
        audio
    } else {
        resample_to_48k(&audio)
    })
}

fn load_model(cli: &Cli) -> Result<NetParams<f32>> {
    let path = cli.model.as_ref().context("--model is required")?;
    load_params(path).with_context(|| format!("loading {}", path.display()))
}

/// Explicit path, else the embedder saved next to the checkpoint.
fn load_embedder(cli: &Cli, explicit: Option<&Path>) -> Result<EmbedderModel> {
    let path = match (explicit, &cli.model) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(m)) => m.with_file_name(EMBEDDER_FILE),
        (None, None) => bail!("--embedder is required"),
    };
    EmbedderModel::load(&path).with_context(|| format!("loading embedder {}", path.display()))
}

fn cleanup(cli: &Cli, embedder: &Path, candidates: Option<&Path>, clips: &[PathBuf]) -> Result<()> {
    let model = EmbedderModel::load(embedder)?;
    for clip in clips {
        let (multi, similarity) = detect_multispeaker(&read_audio(clip)?, &model)?;
        println!(
            "{}",
            serde_json::json!({ "clip": clip.display().to_string(), "multi_speaker": multi, "similarity": similarity })
        );
    }
    let Some(dir) = candidates else { return Ok(()) };
    let enroll = cli.enroll.as_ref().context("--candidates needs --enroll for the target speaker")?;
    let target = embed(&model, &read_audio(enroll)?)?;
    let mut pool: BTreeMap<String, Vec<SpeakerEmbedding>> = BTreeMap::new();
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        if !entry.file_type()?.is_dir() {
            continue;
        }
        let speaker = entry.file_name().to_string_lossy().into_owned();
        let mut embs = Vec::new();
        let mut files: Vec<_> = fs::read_dir(entry.path())?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<_>>()?;
        files.sort();
        for f in files.iter().filter(|f| f.extension().is_some_and(|e| e == "wav")) {
            embs.push(embed(&model, &read_audio(f)?)?);
        }
        pool.insert(speaker, embs);
    }
    let eligible = select_interference(&target, &pool)?;
    println!("{}", serde_json::json!({ "eligible_interference": eligible }));
    Ok(())
}

fn train(
    mut cfg: DeskConfig,
    out: &Path,
    data: Option<&Path>,
    embedder: Option<&Path>,
    epochs: Option<usize>,
    mu: Option<f64>,
) -> Result<()> {
    if let Some(e) = epochs {
        cfg.train.epochs = e;
    }
    if let Some(m) = mu {
        cfg.train.mu = m;
    }
    fs::create_dir_all(out)?;
    cfg.train.checkpoint_dir = Some(out.to_path_buf());
    let model = match embedder {
        Some(p) => EmbedderModel::load(p)?,
        None => train_desk_embedder(&cfg)?,
    };
    model.save(out.join(EMBEDDER_FILE))?;
    let set = match data {
        Some(dir) => {
            let mut enrollments = Vec::new();
            for s in 0..cfg.data.n_speakers {
                let path = dir.join("enroll").join(format!("{}.wav", speaker_id(s)));
                if path.exists() {
                    enrollments.push((s, read_audio(&path)?));
                }
            }
            load_training_set(dir, &variants_for(&enrollments, &model, cfg.data.seed)?)?
        }
        None => build_training_set(&cfg, &enrollment_variants(&cfg, &model)?)?,
    };
    eprintln!("training on {} segments", set.len());
    let init = NetParams::init(cfg.train.net, rng::derive_str(cfg.train.seed, "init"))?;
    let outcome = train_from(init, &set, &cfg.train, |rec| {
        if let Ok(line) = serde_json::to_string(rec) {
            println!("{line}");
        }
    })?;
    fs::write(out.join("config.toml"), toml::to_string(&cfg)?)?;
    eprintln!(
        "best epoch {}; checkpoints in {}",
        outcome.best_epoch,
        out.display()
    );
    Ok(())
}

fn enhance(
    cli: &Cli,
    input: &Path,
    output: &Path,
    embedder: Option<&Path>,
    embedding: Option<&Path>,
) -> Result<()> {
    let pipeline = Pipeline::new(load_model(cli)?)?;
    let audio = read_audio(input)?;
    let z = match (embedding, &cli.enroll) {
        (Some(p), _) => Some(
            read_embedding_cache(p)?
                .into_iter()
                .next()
                .with_context(|| format!("{} holds no embeddings", p.display()))?
                .1
                .cast::<f64>(),
        ),
        (None, Some(enroll)) => Some(embed(&load_embedder(cli, embedder)?, &read_audio(enroll)?)?),
        (None, None) => None,
    };
    let mode: Mode = match cli.mode {
        Some(m) => m.into(),
        None if cli.schedule.is_some() => Mode::Scheduled,
        None if z.is_some() => Mode::Personalized,
        None => Mode::NonPersonalized,
    };
    let n = pipeline.n_frames(&audio);
    let schedule = match (&cli.schedule, mode) {
        (Some(path), Mode::Scheduled) => {
            let (fitted, truncated) =
                FlagSchedule::read(path, n).with_context(|| format!("reading {}", path.display()))?;
            if truncated {
                eprintln!("warning: schedule runs past the {n} frames of the input; extra entries ignored");
            }
            Some(fitted)
        }
        _ => None,
    };
    let out = pipeline.enhance_mode(&audio, mode, z.as_ref(), schedule.as_ref())?;
    write_wav(output, &out, WavFormat::Float32, 0).with_context(|| format!("writing {}", output.display()))?;
    eprintln!("{} mode: wrote {}", mode.short(), output.display());
    Ok(())
}

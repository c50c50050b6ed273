//! Command-line front end: preprocess, train, summarize, evaluate, probe,
//! gradcheck and toy-corpus.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lenvae::config::RunConfig;
use lenvae::eval::{evaluate_system, histogram_to_string, length_histogram, prefix_baseline, EvalOptions, EvalReport};
use lenvae::inference::{DecodeRequest, Summarizer, TargetLength};
use lenvae::model::{gradient_check, HyperParams, Mode};
use lenvae::probe::probe_experiment;
use lenvae::textpipe::{
    build_vocab, filter_by_length, generate_toy_corpus, normalize, read_lines, write_lines, TokenizedSentence, ToyGrammar,
    Vocabulary,
};
use lenvae::training::{train, Checkpoint, TrainConfig};

const EXIT_FAILURE: u8 = 1;
const EXIT_IO: u8 = 3;
const EXIT_INCOMPATIBLE: u8 = 4;
const EXIT_CORRUPT_CHECKPOINT: u8 = 5;
const EXIT_CONFIG: u8 = 6;
const EXIT_GRADCHECK: u8 = 7;

#[derive(Parser)]
#[command(name = "lenvae", version, about = "Length-controllable sentence VAE")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct ConfigArgs {
    /// Config file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Normalize raw sentences, filter by length and build the vocabulary.
    Preprocess {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output_dir: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Train a model on a preprocessed corpus.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long)]
        output_dir: PathBuf,
        /// Replace the length input with a constant zero vector.
        #[arg(long)]
        no_lenemb: bool,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Decode every input line at a requested length.
    Summarize {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output_dir: PathBuf,
        /// Number of words, or `natural` for the input's own length.
        #[arg(long)]
        length: Option<TargetLength>,
        #[arg(long)]
        beam: Option<usize>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Score candidate files against references.
    Evaluate {
        /// `NAME=PATH` or `PATH`; repeatable.
        #[arg(long, required = true)]
        candidates: Vec<String>,
        /// One reference per line, aligned with candidates; repeatable.
        #[arg(long, required = true)]
        references: Vec<PathBuf>,
        /// Source sentences; adds the PREFIX row and extractive percentages.
        #[arg(long)]
        inputs: Option<PathBuf>,
        #[arg(long)]
        output_dir: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Linear length probe on the latent means of two models.
    Probe {
        #[arg(long = "with")]
        with_lenemb: PathBuf,
        #[arg(long = "without")]
        without_lenemb: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Finite-difference gradient check of the full model at tiny sizes.
    Gradcheck {
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        #[arg(long, default_value_t = 1e-5)]
        eps: f64,
        #[arg(long, default_value_t = 1e-4)]
        threshold: f64,
    },
    /// Write a synthetic corpus from the built-in toy grammar.
    ToyCorpus {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        size: usize,
        #[arg(long)]
        output: PathBuf,
    },
}

enum Failure {
    Lib(lenvae::Error),
    GradCheck(f64),
}

impl From<lenvae::Error> for Failure {
    fn from(e: lenvae::Error) -> Self {
        Failure::Lib(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        use lenvae::Error;
        match self {
            Failure::GradCheck(_) => EXIT_GRADCHECK,
            Failure::Lib(Error::Io { .. }) => EXIT_IO,
            Failure::Lib(Error::Incompatible(_)) => EXIT_INCOMPATIBLE,
            Failure::Lib(Error::Checkpoint(_)) => EXIT_CORRUPT_CHECKPOINT,
            Failure::Lib(Error::Config(_) | Error::InvalidArgument(_)) => EXIT_CONFIG,
            Failure::Lib(_) => EXIT_FAILURE,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Lib(e) => write!(f, "{e}"),
            Failure::GradCheck(err) => write!(f, "gradient check failed: max relative error {err:e}"),
        }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {failure}");
            ExitCode::from(failure.exit_code())
        }
    }
}

fn load_config(args: &ConfigArgs) -> CliResult<RunConfig> {
    let mut config = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    for item in &args.set {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| lenvae::Error::Config(format!("--set expects KEY=VALUE, got `{item}`")))?;
        config.set(key.trim(), value.trim())?;
    }
    config.validate()?;
    Ok(config)
}

fn create_dir(dir: &Path) -> CliResult {
    std::fs::create_dir_all(dir).map_err(|e| lenvae::Error::io(dir, e))?;
    Ok(())
}

fn write(path: &Path, contents: &str) -> CliResult {
    std::fs::write(path, contents).map_err(|e| lenvae::Error::io(path, e))?;
    Ok(())
}

fn echo_config(dir: &Path, config: &RunConfig) -> CliResult {
    write(&dir.join("config.txt"), &config.to_config_text())
}

fn tokenize_file(path: &Path, vocab: &Vocabulary) -> CliResult<Vec<TokenizedSentence>> {
    Ok(read_lines(path)?
        .iter()
        .map(|line| TokenizedSentence::from_text(line, vocab))
        .filter(|s| s.word_count() > 0)
        .collect())
}

fn run(command: Command) -> CliResult {
    match command {
        Command::Preprocess {
            input,
            output_dir,
            config,
        } => {
            let config = load_config(&config)?;
            let sentences: Vec<Vec<String>> = read_lines(&input)?
                .iter()
                .map(|l| normalize(l))
                .filter(|t| !t.is_empty())
                .collect();
            let kept = filter_by_length(sentences, config.max_words);
            let vocab = build_vocab(&kept, config.vocab_top_k)?;
            create_dir(&output_dir)?;
            let lines: Vec<String> = kept.iter().map(|t| t.join(" ")).collect();
            write_lines(&output_dir.join("corpus.txt"), &lines)?;
            vocab.save(&output_dir.join("vocab.txt"))?;
            echo_config(&output_dir, &config)?;
            println!("{} sentences, vocabulary of {}", lines.len(), vocab.len());
        }
        Command::Train {
            corpus,
            vocab,
            output_dir,
            no_lenemb,
            steps,
            seed,
            config,
        } => {
            let mut config = load_config(&config)?;
            if no_lenemb {
                config.set("lenemb", "false")?;
            }
            if let Some(steps) = steps {
                config.train.steps = steps;
                config.train.anneal_horizon = config.train.anneal_horizon.min(steps.max(1));
            }
            if let Some(seed) = seed {
                config.train.seed = seed;
            }
            config.validate()?;
            let vocab = Vocabulary::load(&vocab)?;
            let sentences = tokenize_file(&corpus, &vocab)?;
            create_dir(&output_dir)?;
            echo_config(&output_dir, &config)?;
            let train_config: &TrainConfig = &config.train;
            let out = train(
                &sentences,
                &vocab,
                config.hyper_params(vocab.len()),
                train_config,
                Some(&output_dir),
            )?;
            out.metrics.save(&output_dir.join("metrics.csv"))?;
            let step = train_config.steps as u64;
            Checkpoint::new(out.model.hp.clone(), step, vocab, out.params).save(&output_dir.join("model.lvae"))?;
            if let Some(last) = out.metrics.records().last() {
                println!(
                    "step {} total {:.4} reconstruction {:.4} kl {:.4} bow {:.4}",
                    last.step, last.total, last.reconstruction, last.kl, last.bow
                );
            }
        }
        Command::Summarize {
            checkpoint,
            input,
            output_dir,
            length,
            beam,
            config,
        } => {
            let config = load_config(&config)?;
            let length = length.unwrap_or(config.decode.length);
            let ck = Checkpoint::load(&checkpoint)?;
            let model = match length {
                TargetLength::Words(_) => ck.model_with_length_control()?,
                TargetLength::Natural => ck.model()?,
            };
            let summarizer = Summarizer::new(&model, &ck.params, &ck.vocab)?;
            let mut outputs = Vec::new();
            let mut truncated = 0;
            for line in read_lines(&input)? {
                if normalize(&line).is_empty() {
                    outputs.push(String::new());
                    continue;
                }
                let decoded = summarizer.decode(&DecodeRequest {
                    input: line,
                    length,
                    beam_width: beam.unwrap_or(config.decode.beam_width),
                    max_tokens: config.decode.max_tokens,
                })?;
                truncated += usize::from(decoded.truncated);
                outputs.push(decoded.text);
            }
            create_dir(&output_dir)?;
            write_lines(&output_dir.join("summaries.txt"), &outputs)?;
            let hist = length_histogram(&outputs, config.histogram_width);
            write(&output_dir.join("histogram.csv"), &histogram_to_string(&hist))?;
            echo_config(&output_dir, &config)?;
            println!("{} outputs, {} without EOS", outputs.len(), truncated);
        }
        Command::Evaluate {
            candidates,
            references,
            inputs,
            output_dir,
            config,
        } => {
            let config = load_config(&config)?;
            let ref_sets: Vec<Vec<String>> = references.iter().map(|p| read_lines(p)).collect::<Result<_, _>>()?;
            let n = ref_sets[0].len();
            if let Some(bad) = ref_sets.iter().find(|r| r.len() != n) {
                return Err(lenvae::Error::InvalidArgument(format!(
                    "reference files differ in length ({} vs {})",
                    n,
                    bad.len()
                ))
                .into());
            }
            let refs: Vec<Vec<String>> = (0..n).map(|i| ref_sets.iter().map(|r| r[i].clone()).collect()).collect();
            let inputs = inputs.map(|p| read_lines(&p)).transpose()?;
            let options = EvalOptions {
                byte_limit: Some(config.byte_limit),
            };
            create_dir(&output_dir)?;
            let mut report = EvalReport::default();
            if let Some(inputs) = &inputs {
                let prefix: Vec<String> = inputs.iter().map(|s| prefix_baseline(s)).collect();
                report
                    .systems
                    .push(evaluate_system("PREFIX", &prefix, &refs, Some(inputs), options)?);
            }
            for spec in &candidates {
                let (name, path) = match spec.split_once('=') {
                    Some((name, path)) => (name.to_owned(), PathBuf::from(path)),
                    None => {
                        let path = PathBuf::from(spec);
                        let name = path.file_stem().map_or("system".into(), |s| s.to_string_lossy().into_owned());
                        (name, path)
                    }
                };
                let lines = read_lines(&path)?;
                report
                    .systems
                    .push(evaluate_system(&name, &lines, &refs, inputs.as_deref(), options)?);
                let hist = length_histogram(&lines, config.histogram_width);
                write(&output_dir.join(format!("histogram_{name}.csv")), &histogram_to_string(&hist))?;
            }
            write(&output_dir.join("report.txt"), &report.to_table())?;
            write(&output_dir.join("report.csv"), &report.to_csv())?;
            echo_config(&output_dir, &config)?;
            print!("{}", report.to_table());
        }
        Command::Probe {
            with_lenemb,
            without_lenemb,
            corpus,
            output_dir,
            seed,
        } => {
            let with = Checkpoint::load(&with_lenemb)?;
            let without = Checkpoint::load(&without_lenemb)?;
            if with.vocab != without.vocab {
                return Err(lenvae::Error::Incompatible("the two checkpoints use different vocabularies".into()).into());
            }
            let sentences = tokenize_file(&corpus, &with.vocab)?;
            let (m1, m0) = (with.model()?, without.model()?);
            let seed = seed.unwrap_or(RunConfig::default().train.seed);
            let report = probe_experiment((&m1, &with.params), (&m0, &without.params), &sentences, seed)?;
            if let Some(dir) = output_dir {
                create_dir(&dir)?;
                write(&dir.join("probe.txt"), &report.to_table())?;
            }
            print!("{}", report.to_table());
        }
        Command::Gradcheck { seeds, eps, threshold } => {
            let mut worst: f64 = 0.0;
            for seed in 0..seeds {
                for mode in [Mode::Train { keep_rate: 0.8 }, Mode::Eval] {
                    let report = gradient_check(HyperParams::tiny(), seed, mode, eps)?;
                    println!(
                        "seed {seed} {:<5} max relative error {:.3e} ({})",
                        if matches!(mode, Mode::Eval) { "eval" } else { "train" },
                        report.max_relative_error,
                        report.worst.as_deref().unwrap_or("-")
                    );
                    worst = worst.max(report.max_relative_error);
                }
            }
            println!("max relative error {worst:.3e}");
            if !(worst < threshold) {
                return Err(Failure::GradCheck(worst));
            }
        }
        Command::ToyCorpus { seed, size, output } => {
            let corpus = generate_toy_corpus(&ToyGrammar::default(), size, seed);
            write_lines(&output, &corpus)?;
        }
    }
    Ok(())
}

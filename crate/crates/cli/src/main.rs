use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mmcode::dataset::{extract_corpus, read_jsonl, split, write_jsonl};
use mmcode::model::{checkpoint_precision, hex, Vocabularies};
use mmcode::retrieval::{build_index, evaluate, search, EvalQuery};
use mmcode::training::train;
use mmcode::{CorpusRecord, ExtractedRecord, Model, ModelConfig, Precision, Real, RetrievalIndex};

#[derive(Parser)]
#[command(
    name = "mmcode",
    version,
    about = "Multi-modal semantic code search for C functions"
)]
struct Cli {
    /// Seed for every random choice (initialization, dropout, sampling, splits).
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a JSONL corpus of {id, code, description} and write extracted modalities.
    Extract {
        /// Input JSONL file.
        #[arg(long)]
        input: PathBuf,
        /// Output file.
        #[arg(long)]
        output: PathBuf,
    },
    /// Partition a dataset into train and test files by seeded shuffle.
    Split {
        /// Input JSONL file.
        #[arg(long)]
        input: PathBuf,
        /// Destination of the training records.
        #[arg(long)]
        train: PathBuf,
        /// Destination of the test records.
        #[arg(long)]
        test: PathBuf,
        /// Fraction of records sent to the test file.
        #[arg(long, default_value_t = 0.1)]
        test_ratio: f64,
    },
    /// Train a model and write one checkpoint per epoch.
    Train(TrainArgs),
    /// Encode a dataset into a retrieval index.
    Index {
        /// Checkpoint written by `train`.
        #[arg(long)]
        checkpoint: PathBuf,
        /// Extracted dataset (JSONL written by `extract` or `split`).
        #[arg(long)]
        dataset: PathBuf,
        /// Output file.
        #[arg(long)]
        output: PathBuf,
    },
    /// Rank indexed snippets against a natural-language query.
    Search {
        /// Checkpoint written by `train`.
        #[arg(long)]
        checkpoint: PathBuf,
        /// Index written by `index`.
        #[arg(long)]
        index: PathBuf,
        /// Natural-language query.
        #[arg(long)]
        query: String,
        /// Number of hits to print.
        #[arg(short, long, default_value_t = 10)]
        k: usize,
        /// Corpus file used to print source excerpts.
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
    /// Use each description of a dataset as a query and report R@1/5/10 and MRR.
    Eval {
        /// Checkpoint written by `train`.
        #[arg(long)]
        checkpoint: PathBuf,
        /// Index written by `index`.
        #[arg(long)]
        index: PathBuf,
        /// Extracted dataset (JSONL written by `extract` or `split`).
        #[arg(long)]
        dataset: PathBuf,
        /// Also write the report as JSON to this file.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Print the attention weight of every token, AST node and CFG vertex of one snippet.
    InspectAttention {
        /// Checkpoint written by `train`.
        #[arg(long)]
        checkpoint: PathBuf,
        /// Extracted dataset (JSONL written by `extract` or `split`).
        #[arg(long)]
        dataset: PathBuf,
        /// Record id to inspect.
        #[arg(long)]
        id: String,
    },
}

#[derive(Args)]
struct TrainArgs {
    /// Extracted dataset (JSONL written by `extract` or `split`).
    #[arg(long)]
    dataset: PathBuf,
    /// key=value configuration file; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for checkpoints, vocabularies and the stats log.
    #[arg(long)]
    out_dir: PathBuf,
    /// Override the number of epochs.
    #[arg(long)]
    epochs: Option<usize>,
    /// Override any configuration key, e.g. `--set hidden_dim=32`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

enum Failure {
    Data(String),
    Internal(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Data(_) => 2,
            Failure::Internal(_) => 3,
        }
    }
}

type Result<T> = std::result::Result<T, Failure>;

fn data<E: std::fmt::Display>(context: impl std::fmt::Display) -> impl FnOnce(E) -> Failure {
    move |e| Failure::Data(format!("{context}: {e}"))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Data(m) | Failure::Internal(m)) = &f;
            eprintln!("error: {m}");
            ExitCode::from(f.code())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::Extract { input, output } => cmd_extract(&input, &output),
        Command::Split {
            input,
            train,
            test,
            test_ratio,
        } => cmd_split(&input, &train, &test, test_ratio, seed),
        Command::Train(args) => {
            let mut config = match &args.config {
                Some(p) => ModelConfig::from_text(&read_text(p)?).map_err(data(p.display()))?,
                None => ModelConfig::default(),
            };
            for o in &args.overrides {
                let (k, v) = o
                    .split_once('=')
                    .ok_or_else(|| Failure::Data(format!("bad override `{o}`")))?;
                config.set(k.trim(), v.trim()).map_err(data("override"))?;
            }
            config.hyper.seed = seed;
            if let Some(e) = args.epochs {
                config.hyper.epochs = e;
            }
            config.validate().map_err(data("config"))?;
            match config.precision {
                Precision::F32 => cmd_train::<f32>(&args, config),
                Precision::F64 => cmd_train::<f64>(&args, config),
            }
        }
        Command::Index {
            checkpoint,
            dataset,
            output,
        } => with_model(&checkpoint, Dispatch::Index { dataset, output }),
        Command::Search {
            checkpoint,
            index,
            query,
            k,
            corpus,
        } => with_model(
            &checkpoint,
            Dispatch::Search {
                index,
                query,
                k,
                corpus,
            },
        ),
        Command::Eval {
            checkpoint,
            index,
            dataset,
            report,
        } => with_model(
            &checkpoint,
            Dispatch::Eval {
                index,
                dataset,
                report,
            },
        ),
        Command::InspectAttention {
            checkpoint,
            dataset,
            id,
        } => with_model(&checkpoint, Dispatch::Attention { dataset, id }),
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(data(path.display()))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(data(path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(data(path.display()))
}

fn read_dataset(path: &Path) -> Result<Vec<ExtractedRecord>> {
    read_jsonl(open(path)?).map_err(data(path.display()))
}

fn write_records(path: &Path, items: &[ExtractedRecord]) -> Result<()> {
    let mut w = create(path)?;
    write_jsonl(&mut w, items).map_err(data(path.display()))?;
    w.flush().map_err(data(path.display()))
}

fn cmd_extract(input: &Path, output: &Path) -> Result<()> {
    let corpus: Vec<CorpusRecord> = read_jsonl(open(input)?).map_err(data(input.display()))?;
    let out = extract_corpus(&corpus);
    if out.records.is_empty() {
        return Err(Failure::Data(format!(
            "no record of {} could be extracted",
            input.display()
        )));
    }
    write_records(output, &out.records)?;
    println!(
        "extracted {} skipped {}",
        out.records.len(),
        out.skipped.len()
    );
    Ok(())
}

fn cmd_split(input: &Path, train: &Path, test: &Path, ratio: f64, seed: u64) -> Result<()> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Failure::Data(format!(
            "test ratio {ratio} is outside [0, 1]"
        )));
    }
    let records = read_dataset(input)?;
    let (a, b) = split(&records, ratio, seed);
    write_records(train, &a)?;
    write_records(test, &b)?;
    println!("train {} test {}", a.len(), b.len());
    Ok(())
}

fn cmd_train<R: Real>(args: &TrainArgs, config: ModelConfig) -> Result<()> {
    let records = read_dataset(&args.dataset)?;
    if records.len() < 2 {
        return Err(Failure::Data("training needs at least two records".into()));
    }
    let dir = &args.out_dir;
    fs::create_dir_all(dir).map_err(data(dir.display()))?;
    fs::write(dir.join("config.txt"), config.to_text()).map_err(data(dir.display()))?;
    let vocabs = Vocabularies::build(&records, &config);
    for (name, v) in [
        ("code", &vocabs.code),
        ("ast", &vocabs.ast),
        ("desc", &vocabs.desc),
    ] {
        let path = dir.join(format!("vocab.{name}.tsv"));
        fs::write(&path, v.to_text()).map_err(data(path.display()))?;
    }
    let seed = config.hyper.seed;
    let mut model: Model<R> = Model::init(config, vocabs, seed);
    let mut stats_log = create(&dir.join("stats.jsonl"))?;
    let stats = train(&mut model, &records, |m, e| {
        let path = dir.join(format!("checkpoint-{:04}.mman", e.epoch));
        fs::write(&path, m.to_bytes()).map_err(|err| format!("{}: {err}", path.display()))?;
        let line = serde_json::to_string(e).map_err(|err| err.to_string())?;
        writeln!(stats_log, "{line}").map_err(|err| err.to_string())
    })
    .map_err(|e| Failure::Internal(e.to_string()))?;
    stats_log.flush().map_err(data("stats.jsonl"))?;
    let path = dir.join("final.mman");
    fs::write(&path, model.to_bytes()).map_err(data(path.display()))?;
    println!(
        "trained {} epochs, final loss {:.6}, checkpoint {}",
        stats.epochs.len(),
        stats.final_loss().unwrap_or(0.0),
        path.display()
    );
    Ok(())
}

enum Dispatch {
    Index {
        dataset: PathBuf,
        output: PathBuf,
    },
    Search {
        index: PathBuf,
        query: String,
        k: usize,
        corpus: Option<PathBuf>,
    },
    Eval {
        index: PathBuf,
        dataset: PathBuf,
        report: Option<PathBuf>,
    },
    Attention {
        dataset: PathBuf,
        id: String,
    },
}

fn with_model(checkpoint: &Path, what: Dispatch) -> Result<()> {
    let bytes = fs::read(checkpoint).map_err(data(checkpoint.display()))?;
    match checkpoint_precision(&bytes).map_err(data(checkpoint.display()))? {
        Precision::F32 => dispatch::<f32>(checkpoint, &bytes, what),
        Precision::F64 => dispatch::<f64>(checkpoint, &bytes, what),
    }
}

fn load_index(path: &Path) -> Result<RetrievalIndex> {
    let bytes = fs::read(path).map_err(data(path.display()))?;
    RetrievalIndex::from_bytes(&bytes).map_err(data(path.display()))
}

fn dispatch<R: Real>(checkpoint: &Path, bytes: &[u8], what: Dispatch) -> Result<()> {
    let model = Model::<R>::from_bytes(bytes).map_err(data(checkpoint.display()))?;
    match what {
        Dispatch::Index { dataset, output } => {
            let records = read_dataset(&dataset)?;
            let (index, skipped) = build_index(&model, &records).map_err(data("index"))?;
            for s in &skipped {
                log::warn!("skipped {}: {}", s.id, s.reason);
            }
            fs::write(&output, index.to_bytes()).map_err(data(output.display()))?;
            println!(
                "indexed {} skipped {} fingerprint {}",
                index.len(),
                skipped.len(),
                hex(index.fingerprint())
            );
        }
        Dispatch::Search {
            index,
            query,
            k,
            corpus,
        } => {
            if k == 0 {
                return Err(Failure::Data("k must be at least 1".into()));
            }
            let index = load_index(&index)?;
            let result = search(&query, &index, &model, k).map_err(data("search"))?;
            let sources: Vec<CorpusRecord> = match corpus {
                Some(p) => read_jsonl(open(&p)?).map_err(data(p.display()))?,
                None => Vec::new(),
            };
            for (rank, (id, score)) in result.hits.iter().enumerate() {
                println!("{:>3}  {score:>8.5}  {id}", rank + 1);
                if let Some(src) = sources.iter().find(|s| &s.id == id) {
                    for line in src.code.lines().take(3) {
                        println!("        {line}");
                    }
                }
            }
        }
        Dispatch::Eval {
            index,
            dataset,
            report,
        } => {
            let index = load_index(&index)?;
            let queries: Vec<EvalQuery> = read_dataset(&dataset)?
                .iter()
                .map(EvalQuery::from)
                .collect();
            let rep = evaluate(&queries, &index, &model).map_err(data("eval"))?;
            print!("{}", rep.table());
            if let Some(p) = report {
                fs::write(&p, rep.to_json() + "\n").map_err(data(p.display()))?;
            }
        }
        Dispatch::Attention { dataset, id } => {
            let records = read_dataset(&dataset)?;
            let rec = records
                .iter()
                .find(|r| r.id == id)
                .ok_or_else(|| Failure::Data(format!("no record with id `{id}`")))?;
            let report = model
                .attention_report(rec)
                .map_err(|e| Failure::Data(e.to_string()))?;
            print!("{}", report.to_jsonl());
        }
    }
    Ok(())
}

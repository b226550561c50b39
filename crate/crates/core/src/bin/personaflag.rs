use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};

use personaflag::classifier::synthetic::{keyword_corpus, REFERENCE_IDS, REFERENCE_SEEDS};
use personaflag::classifier::{evaluate, train, LinearModel, ModelSpec, TrainingConfig, DEFAULT_FEATURE_DIM};
use personaflag::dataset::{self, AnnotationMatrix, AugmentationJob};
use personaflag::ensemble::{to_wire, Detector};
use personaflag::eval::{run_comparison, ExperimentGrid, ExperimentOptions};
use personaflag::generation::GenerationSettings;
use personaflag::label::{Dataset, Split};
use personaflag::persona::KnowledgeBase;
use personaflag::service::{self, ServiceConfig};
use personaflag::{Result, Theme};

#[derive(Parser)]
#[command(name = "personaflag", version, about = "Stereotype flagging for persona text")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP service.
    Serve {
        #[arg(long, env = "PERSONAFLAG_CONFIG")]
        config: PathBuf,
    },
    /// Train the three ensemble members and write them to a directory.
    Train {
        /// Dataset file; the synthetic keyword corpus is used when omitted.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = DEFAULT_FEATURE_DIM)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Convert an MGSD export (columns text, category) to the label set.
    Import {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = ',')]
        delimiter: char,
    },
    /// Fleiss' kappa of a seed annotation sheet.
    Kappa {
        input: PathBuf,
        #[arg(long, default_value_t = ',')]
        delimiter: char,
        /// Report instead of failing below substantial agreement.
        #[arg(long)]
        allow_low_agreement: bool,
    },
    /// Expand seed sentences through the generation backend.
    Augment {
        seeds: PathBuf,
        #[arg(long)]
        theme: Theme,
        #[arg(long)]
        count: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Merge, deduplicate and split example files into a dataset.
    Assemble {
        #[arg(long)]
        imported: Option<PathBuf>,
        #[arg(long)]
        seeds: Option<PathBuf>,
        #[arg(long)]
        generated: Option<PathBuf>,
        #[arg(long, default_value_t = 0.1)]
        test_fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Grounded versus ungrounded comparison.
    Experiment {
        /// Grid file (TOML or JSON); the default grid when omitted.
        #[arg(long)]
        grid: Option<PathBuf>,
        #[arg(long, num_args = 3, required = true)]
        models: Vec<PathBuf>,
        #[arg(long, default_value = concat!(env!("CARGO_MANIFEST_DIR"), "/data/kb"))]
        kb: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 0.10)]
        alpha: f64,
    },
    /// Flag the sentences of a text file and print the payload.
    Detect {
        input: PathBuf,
        #[arg(long, num_args = 3, required = true)]
        models: Vec<PathBuf>,
    },
}

fn delimiter(c: char) -> Result<u8> {
    u8::try_from(c).map_err(|_| personaflag::Error::invalid("delimiter must be a single byte"))
}

fn read_examples(path: &Path) -> Result<Vec<personaflag::LabeledExample>> {
    dataset::read_examples(BufReader::new(File::open(path)?))
}

fn write_examples(path: &Path, rows: &[personaflag::LabeledExample]) -> Result<()> {
    dataset::write_examples(rows, BufWriter::new(File::create(path)?))
}

fn detector(models: &[PathBuf]) -> Result<Detector> {
    let loaded: Vec<LinearModel> = models.iter().map(LinearModel::load).collect::<Result<_>>()?;
    let gen = GenerationSettings::default().apply_env()?.build()?;
    Detector::from_models(loaded.try_into().expect("three models"), gen)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Serve { config } => {
            let cfg = ServiceConfig::load(config)?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(service::serve(cfg))
        }
        Command::Train { data, out_dir, dim, seed } => {
            let (train_set, test_set) = match &data {
                Some(path) => {
                    let loaded = Dataset::read_jsonl(BufReader::new(File::open(path)?))?;
                    loaded.warnings.iter().for_each(|w| log::warn!("{w}"));
                    let d = loaded.dataset;
                    (d.split(Split::Train).to_vec(), d.split(Split::Test).to_vec())
                }
                None => keyword_corpus(500, 200, seed),
            };
            std::fs::create_dir_all(&out_dir)?;
            let cfg = TrainingConfig {
                rng_seed: seed,
                ..TrainingConfig::default()
            };
            for (id, feature_seed) in REFERENCE_IDS.iter().zip(REFERENCE_SEEDS) {
                let spec = ModelSpec::new(*id, feature_seed).with_dim(dim);
                let outcome = train(&spec, &train_set, &[], &cfg)?;
                let path = out_dir.join(format!("{id}.bin"));
                outcome.model.save(&path)?;
                let acc = if test_set.is_empty() {
                    String::from("n/a")
                } else {
                    format!("{:.4}", evaluate(&outcome.model, &test_set)?.accuracy)
                };
                println!("{id}: epoch {} selected, test accuracy {acc}, wrote {}", outcome.selected_epoch, path.display());
            }
            Ok(())
        }
        Command::Import { input, out, delimiter: d } => {
            let (rows, report) = dataset::import_mgsd(File::open(input)?, delimiter(d)?)?;
            write_examples(&out, &rows)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
        Command::Kappa { input, delimiter: d, allow_low_agreement } => {
            let m = AnnotationMatrix::read_delimited(File::open(input)?, delimiter(d)?)?;
            let kappa = dataset::annotation_gate(&m, allow_low_agreement)?;
            println!("items {} annotators {} kappa {kappa:.4}", m.items.len(), m.annotators);
            Ok(())
        }
        Command::Augment { seeds, theme, count, out } => {
            let gen = GenerationSettings::default().apply_env()?.build()?;
            let job = AugmentationJob::new(read_examples(&seeds)?, count, theme);
            let rows = dataset::augment(&job, gen.as_ref())?;
            write_examples(&out, &rows)?;
            println!("wrote {} examples to {}", rows.len(), out.display());
            Ok(())
        }
        Command::Assemble { imported, seeds, generated, test_fraction, seed, out } => {
            let load = |p: &Option<PathBuf>| p.as_deref().map(read_examples).transpose().map(Option::unwrap_or_default);
            let (dataset, report) = dataset::assemble(&load(&imported)?, &load(&seeds)?, &load(&generated)?, test_fraction, seed)?;
            dataset.write_jsonl(BufWriter::new(File::create(&out)?))?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
        Command::Experiment { grid, models, kb, out_dir, alpha } => {
            let grid = grid.map(ExperimentGrid::load).transpose()?.unwrap_or_default();
            let detector = detector(&models)?;
            let kb = KnowledgeBase::load_dir(kb)?;
            let gen: Arc<dyn personaflag::generation::GenerationClient> =
                GenerationSettings::default().apply_env()?.build()?;
            let opts = ExperimentOptions {
                alpha,
                ..ExperimentOptions::default()
            };
            let outcome = run_comparison(&grid, gen.as_ref(), gen.as_ref(), &detector, &kb, &opts)?;
            outcome.archive(&out_dir)?;
            print!("{}", outcome.table);
            Ok(())
        }
        Command::Detect { input, models } => {
            let text = std::fs::read_to_string(input)?;
            let flags = detector(&models)?.detect(&text);
            println!("{}", serde_json::to_string_pretty(&serde_json::json!({ "flags": to_wire(&flags) }))?);
            Ok(())
        }
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

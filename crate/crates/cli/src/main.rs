use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pirisk::featurelab::{self, DayDataset, FeatureSpec};
use pirisk::harness::{self, ExperimentConfig, Plan, TrainedModel};
use pirisk::pipeline::{FittedPipeline, ModelKind};
use pirisk::synthgen::{self, GeneratorConfig};
use pirisk::{cohort, Error, Result};

#[derive(Parser)]
#[command(name = "pirisk", version, about = "Pressure-injury risk prediction pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic cohort (and its oracle file) to --out.
    Generate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Parse a cohort directory and print ingest and filter counts.
    IngestCheck {
        cohort: PathBuf,
    },
    /// Extract the day-level dataset from a cohort directory into --out.
    Extract {
        cohort: PathBuf,
        /// Feature spec file; the built-in 40 specs when absent.
        #[arg(long)]
        features: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Search, refit and store one pipeline per model kind under --out.
    Train(ExperimentArgs),
    /// Score the test split with models stored by `train` and write report.json.
    Evaluate(ExperimentArgs),
    /// Evaluate the Braden baseline on the split and write its curve.
    BaselineBraden(ExperimentArgs),
    /// Render tables, curve files and the plot from a report.json.
    Report {
        report: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train, evaluate and render in one go.
    RunAll(ExperimentArgs),
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset file; overrides the config's `dataset`.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated model codes (lr, rf, gbdt); an empty string runs none.
    #[arg(long)]
    models: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

struct Setup {
    cfg: ExperimentConfig,
    ds: DayDataset,
    plan: Plan,
}

impl ExperimentArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(d) = &self.dataset {
            cfg.dataset = Some(d.clone());
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(m) = &self.models {
            cfg.models = parse_models(m)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn setup(&self) -> Result<Setup> {
        let cfg = self.config()?;
        let path = cfg
            .dataset
            .clone()
            .ok_or_else(|| Error::Config("no dataset given (--dataset or `dataset` in the config)".into()))?;
        let specs = load_specs(self.features.as_deref())?;
        let ds = featurelab::read_dataset_file(&path, &specs)?;
        let links = if cfg.group_by_patient {
            let dir = cfg.cohort.as_ref().expect("validated");
            let (store, _) = cohort::ingest_dir(dir)?;
            Some(
                store
                    .stays
                    .iter()
                    .map(|(id, s)| (id.clone(), s.record.patient_id.clone()))
                    .collect::<BTreeMap<_, _>>(),
            )
        } else {
            None
        };
        let plan = harness::plan_experiment(&cfg, &ds, links.as_ref())?;
        Ok(Setup { cfg, ds, plan })
    }
}

fn parse_models(list: &str) -> Result<Vec<ModelKind>> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::parse)
        .collect()
}

fn load_specs(path: Option<&Path>) -> Result<Vec<FeatureSpec>> {
    match path {
        Some(p) => featurelab::load_specs(p),
        None => Ok(featurelab::default_specs()),
    }
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.into(), source: e })?;
    }
    fs::write(path, contents).map_err(|e| Error::Io { path: path.into(), source: e })
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io { path: path.into(), source: e })
}

fn json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serialisable") + "\n"
}

fn model_paths(out: &Path, kind: ModelKind) -> (PathBuf, PathBuf) {
    let dir = out.join("models");
    (dir.join(format!("{}.json", kind.code())), dir.join(format!("{}.search.json", kind.code())))
}

fn save_model(out: &Path, trained: &TrainedModel, pipeline: &FittedPipeline<f64>) -> Result<()> {
    let (artifact, search) = model_paths(out, trained.kind);
    write(&artifact, &pipeline.to_json()?)?;
    write(&search, &json(trained))
}

fn generate(config: Option<&Path>, seed: Option<u64>, out: &Path) -> Result<()> {
    let mut cfg = match config {
        Some(p) => GeneratorConfig::load(p)?,
        None => GeneratorConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let s = synthgen::generate(&cfg, out)?;
    println!(
        "patients {} stays {} events {} stays_with_incidence {} oracle_rows {}",
        s.patients, s.stays, s.events, s.stays_with_incidence, s.oracle_rows
    );
    Ok(())
}

fn ingest_check(dir: &Path) -> Result<()> {
    let (store, r) = cohort::ingest_dir(dir)?;
    let (_, f) = cohort::apply_filters(&store);
    println!(
        "patients {} stays {} events {} injuries {} braden_readings {} warnings {}",
        r.patients,
        r.stays,
        r.events,
        r.injuries,
        r.braden_readings,
        r.warnings()
    );
    println!(
        "filtered: underage {} no_braden {} patients {} stays_with_incidence {}",
        f.removed_underage, f.removed_no_braden, f.removed_patients, f.stays_with_incidence
    );
    Ok(())
}

fn extract(dir: &Path, features: Option<&Path>, out: &Path) -> Result<()> {
    featurelab::ensure_not_oracle(out)?;
    let specs = load_specs(features)?;
    let (store, _) = cohort::ingest_dir(dir)?;
    let (store, _) = cohort::apply_filters(&store);
    let ds = featurelab::build_dataset(&store, &specs)?;
    let mut buf = Vec::new();
    featurelab::write_dataset(&ds, &mut buf).map_err(|e| Error::Io { path: out.into(), source: e })?;
    write(out, std::str::from_utf8(&buf).expect("csv output is utf-8"))?;
    let s = ds.summary();
    println!(
        "rows {} positive_rows {} stays {} positive_stays {}",
        s.rows, s.positive_rows, s.stays, s.positive_stays
    );
    Ok(())
}

fn train(args: &ExperimentArgs) -> Result<()> {
    let Setup { cfg, ds, plan } = args.setup()?;
    let baseline = harness::braden_baseline(&cfg, &ds, &plan)?;
    for &kind in &cfg.models {
        let mut trained = harness::train_kind(&cfg, &ds, &plan, kind, baseline.reference_precision)?;
        let pipeline = trained.pipeline.take().expect("freshly trained");
        save_model(&args.out, &trained, &pipeline)?;
        let best = &trained.candidates[trained.best_index];
        println!(
            "{kind}: candidate {} cv {:.4} {}",
            trained.best_index,
            best.mean.unwrap_or(f64::NAN),
            best.hyperparameters
        );
    }
    Ok(())
}

fn evaluate(args: &ExperimentArgs) -> Result<()> {
    let Setup { cfg, ds, plan } = args.setup()?;
    let baseline = harness::braden_baseline(&cfg, &ds, &plan)?;
    let brow = harness::baseline_row(&cfg, &baseline)?;
    let mut models = Vec::new();
    for &kind in &cfg.models {
        let (artifact, search) = model_paths(&args.out, kind);
        let pipeline = FittedPipeline::<f64>::load(&artifact)?;
        let trained: TrainedModel = serde_json::from_str(&read(&search)?)
            .map_err(|e| Error::Artifact(format!("{}: {e}", search.display())))?;
        if trained.kind != kind {
            return Err(Error::Artifact(format!("{} holds a {} search", search.display(), trained.kind)));
        }
        models.push(harness::evaluate_model(&cfg, &ds, &plan, &baseline, &brow, &trained, &pipeline)?);
    }
    let report = harness::assemble_report(&cfg, &ds, &plan, &baseline, brow, models)?;
    write(&args.out.join("report.json"), &report.to_json())?;
    print!("{}", harness::report::render_text_table(&report));
    Ok(())
}

fn baseline_braden(args: &ExperimentArgs) -> Result<()> {
    let Setup { cfg, ds, plan } = args.setup()?;
    let baseline = harness::braden_baseline(&cfg, &ds, &plan)?;
    let row = harness::baseline_row(&cfg, &baseline)?;
    write(&args.out.join("braden.json"), &json(&row))?;
    write(
        &args.out.join("curves").join("braden.csv"),
        &harness::report::render_curve_csv(&row.curve),
    )?;
    println!(
        "reference precision {:.4}; test precision at target {:.4}",
        baseline.reference_precision, row.curve_precision_at_target
    );
    Ok(())
}

fn report(path: &Path, out: &Path) -> Result<()> {
    let report = harness::Report::from_json(&read(path)?).map_err(|e| e.context(path.display().to_string()))?;
    harness::emit_report(&report, out)?;
    print!("{}", harness::report::render_text_table(&report));
    Ok(())
}

fn run_all(args: &ExperimentArgs) -> Result<()> {
    let Setup { cfg, ds, plan } = args.setup()?;
    let baseline = harness::braden_baseline(&cfg, &ds, &plan)?;
    let brow = harness::baseline_row(&cfg, &baseline)?;
    let mut models = Vec::new();
    for &kind in &cfg.models {
        let mut trained = harness::train_kind(&cfg, &ds, &plan, kind, baseline.reference_precision)?;
        let pipeline = trained.pipeline.take().expect("freshly trained");
        save_model(&args.out, &trained, &pipeline)?;
        models.push(harness::evaluate_model(&cfg, &ds, &plan, &baseline, &brow, &trained, &pipeline)?);
    }
    let report = harness::assemble_report(&cfg, &ds, &plan, &baseline, brow, models)?;
    harness::emit_report(&report, &args.out)?;
    print!("{}", harness::report::render_text_table(&report));
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { config, seed, out } => generate(config.as_deref(), seed, &out),
        Command::IngestCheck { cohort } => ingest_check(&cohort),
        Command::Extract { cohort, features, out } => extract(&cohort, features.as_deref(), &out),
        Command::Train(a) => train(&a),
        Command::Evaluate(a) => evaluate(&a),
        Command::BaselineBraden(a) => baseline_braden(&a),
        Command::Report { report: r, out } => report(&r, &out),
        Command::RunAll(a) => run_all(&a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let cat = e.category();
            eprintln!("error[{}]: {e}", cat.as_str());
            ExitCode::from(cat.exit_code() as u8)
        }
    }
}

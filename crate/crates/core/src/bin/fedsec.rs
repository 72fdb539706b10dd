use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use fedsec::data;
use fedsec::dataset::{default_feature_names, Dataset};
use fedsec::experiment::{self, DataSource, ResultWriter, SweepGrid};
use fedsec::fl::{self, MlpSpec, TrainingPlan};
use fedsec::flow::{self, DeviceTable};
use fedsec::montecarlo::{self, SuccessEvent};
use fedsec::policy::{run_stream, Candidate, PolicyKind};
use fedsec::stopping::{self, AlphaFormula, BudgetSpec};
use fedsec::{Error, Result};

#[derive(Parser)]
#[command(name = "fedsec", version, about = "Budgeted online client selection for federated learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Event {
    RecordChain,
    TopSet,
}

#[derive(Subcommand)]
enum Command {
    /// Optimal observation threshold and its success probability.
    Alpha {
        #[arg(long)]
        n: u64,
        #[arg(long, default_value_t = 1)]
        r1: u32,
        #[arg(long)]
        r2: u32,
        /// Divide by (r2 − r1 + 1) instead of taking the root.
        #[arg(long)]
        paper_table_variant: bool,
        /// Cross-check against a numeric maximization (reported on stderr).
        #[arg(long)]
        numeric_check: bool,
    },
    /// Simulated success rate of the threshold rule.
    Montecarlo {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        r: usize,
        #[arg(long)]
        alpha: usize,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Event::RecordChain)]
        event: Event,
    },
    /// Run one policy over a probed candidate stream and print its audit log.
    Simulate {
        #[arg(long)]
        policy: PolicyKind,
        /// CSV `arrival_index,client_id,probe_accuracy`.
        #[arg(long)]
        stream: PathBuf,
        /// Budget R.
        #[arg(long)]
        r: usize,
        #[arg(long, default_value_t = 1)]
        r1: u32,
        #[arg(long)]
        r2: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Federated training over a directory of client CSVs.
    FlRun {
        #[arg(long)]
        clients: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long, default_value_t = 20)]
        rounds: usize,
        #[arg(long, default_value_t = 8)]
        epochs: usize,
        #[arg(long, default_value_t = 3)]
        batch: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Normalize, split and partition a labeled feature table.
    Prepare {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0.2)]
        test_frac: f64,
        #[arg(long)]
        n_clients: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Windowed behavioral features from JSON-lines flow records.
    ExtractFeatures {
        #[arg(long)]
        flows: PathBuf,
        /// CSV `mac,name,device_id`; the built-in reference table if omitted.
        #[arg(long)]
        devices: Option<PathBuf>,
        #[arg(long, default_value_t = flow::DEFAULT_MAX_PERIOD)]
        max_period: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convert generic flow-meter JSON lines of one device to flow records.
    ConvertFlows {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        mac: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic labeled feature table.
    Synth {
        #[arg(long, default_value_t = 5000)]
        samples: usize,
        #[arg(long, default_value_t = 10)]
        features: usize,
        #[arg(long, default_value_t = 28)]
        classes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every grid cell × seed × policy.
    Sweep {
        /// JSON with arrays `n`, `r`, `r2` and optional `plan` overrides.
        #[arg(long)]
        grid: PathBuf,
        #[arg(long, default_value = "1..10")]
        seeds: String,
        #[arg(long, default_value = "synthetic:5000x10x28")]
        data: DataSource,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mean and standard deviation per cell and policy of a sweep.
    Summarize {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the long-format table for plotting.
        #[arg(long)]
        plot_out: Option<PathBuf>,
    },
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn alpha(n: u64, r1: u32, r2: u32, paper_variant: bool, numeric_check: bool) -> Result<()> {
    let formula = if paper_variant { AlphaFormula::PaperTable } else { AlphaFormula::Root };
    let a = stopping::alpha_star_with(n, r1, r2, formula)?;
    let index = BudgetSpec::builder(n as usize, 1, r1, r2).formula(formula).allow_small_n().build()?.alpha_star_index;
    let p = stopping::selection_probability(n, a, r1, r2)?.value;
    let mut out = io::stdout().lock();
    writeln!(out, "n,r1,r2,alpha_star,alpha_index,p_max")?;
    writeln!(out, "{n},{r1},{r2},{a},{index},{p}")?;
    if numeric_check {
        let numeric = stopping::alpha_star_numeric(n, r1, r2, 100_000)?;
        let p_num = stopping::selection_probability(n, numeric, r1, r2)?.value;
        eprintln!(
            "numeric optimum {numeric} (P = {p_num}); closed form {a} (P = {p}); |difference| {}",
            (numeric - a).abs()
        );
        if !paper_variant && (numeric - a).abs() > 0.5 {
            return Err(Error::State("numeric optimum disagrees with the closed form".into()));
        }
    }
    Ok(())
}

fn read_stream(path: &Path) -> Result<Vec<Candidate>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(open(path)?);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 1;
        // tolerate a header line
        if line == 1 && rec.get(0) == Some("arrival_index") {
            continue;
        }
        if rec.len() != 3 {
            return Err(Error::Malformed { line, msg: "expected arrival_index,client_id,probe_accuracy".into() });
        }
        let idx = rec[0].parse().map_err(|_| Error::Malformed { line, msg: format!("bad index {:?}", &rec[0]) })?;
        let acc = rec[2].parse().map_err(|_| Error::Malformed { line, msg: format!("bad accuracy {:?}", &rec[2]) })?;
        out.push(Candidate::new(idx, &rec[1], acc));
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn simulate(policy: PolicyKind, stream: &Path, r: usize, r1: u32, r2: u32, seed: u64, out: &Option<PathBuf>) -> Result<()> {
    let stream = read_stream(stream)?;
    let spec = BudgetSpec::builder(stream.len(), r, r1, r2).allow_small_n().build()?;
    let audit = run_stream(policy, &spec, &stream, seed)?;
    let mut w = output(out)?;
    for e in &audit.entries {
        serde_json::to_writer(&mut w, e)?;
        writeln!(w)?;
    }
    w.flush()?;
    let ids: Vec<&str> = audit.selected.iter().map(|c| c.client_id.as_str()).collect();
    eprintln!(
        "{policy}: selected {} (forced {}), {} probes, alpha index {}",
        ids.join(" "),
        audit.forced_acceptances,
        audit.probe_count(),
        spec.alpha_star_index
    );
    Ok(())
}

fn fl_run(clients: &Path, test: &Path, plan: TrainingPlan, seed: u64, out: &Option<PathBuf>) -> Result<()> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(clients)?
        .map(|e| e.map(|e| e.path()))
        .collect::<io::Result<Vec<_>>>()?
        .into_iter()
        .filter(|p| p.extension().is_some_and(|x| x == "csv") && p != test)
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::EmptyList);
    }
    let (test, _) = Dataset::read_csv(open(test)?)?;
    let sets =
        files.iter().map(|f| Ok(Dataset::read_csv(open(f)?)?.0)).collect::<Result<Vec<_>>>()?;
    let classes = sets.iter().map(Dataset::n_classes).chain([test.n_classes()]).max().unwrap_or(0);
    let init = fl::init_model(&MlpSpec::new(test.n_features(), classes), seed)?;
    let refs: Vec<&Dataset> = sets.iter().collect();
    let outcome = fl::federated_train(&init, &refs, &test, &plan, seed)?;
    let mut w = output(out)?;
    writeln!(w, "round,test_accuracy")?;
    for (k, acc) in outcome.history.iter().enumerate() {
        writeln!(w, "{},{acc}", k + 1)?;
    }
    w.flush()?;
    Ok(())
}

fn prepare(input: &Path, test_frac: f64, n_clients: usize, seed: u64, out: &Path) -> Result<()> {
    let (table, names) = Dataset::read_csv(open(input)?)?;
    let prepared = data::prepare(&table, names, test_frac, n_clients, seed)?;
    let manifest = data::write_prepared(out, &prepared, seed, test_frac)?;
    let fat = manifest.clients.iter().filter(|c| c.fat).count();
    eprintln!(
        "wrote {} clients ({fat} fat) and {} test rows to {}",
        manifest.clients.len(),
        manifest.test_size,
        out.display()
    );
    Ok(())
}

fn extract(flows: &Path, devices: &Option<PathBuf>, max_period: f64, out: &Option<PathBuf>) -> Result<()> {
    let table = match devices {
        Some(p) => DeviceTable::read_csv(open(p)?)?,
        None => DeviceTable::reference(),
    };
    let records = flow::read_flows_jsonl(open(flows)?)?;
    let (rows, dropped) = flow::extract_all(&records, &table, max_period)?;
    let mut w = output(out)?;
    flow::write_features_csv(&mut w, &rows)?;
    w.flush()?;
    if dropped > 0 {
        eprintln!("dropped {dropped} flows from unknown devices");
    }
    Ok(())
}

fn run_sweep(grid: &Path, seeds: &str, data: &DataSource, out: &Option<PathBuf>) -> Result<()> {
    let grid = SweepGrid::from_json(&std::fs::read_to_string(grid)?)?;
    let seeds = experiment::parse_seeds(seeds)?;
    let mut writer = ResultWriter::new(output(out)?);
    let mut failure = None;
    let total = grid.n_cells() * seeds.len();
    let mut done = 0usize;
    let per_job = grid.policies.len() * grid.cycle_count;
    experiment::sweep(&grid, &seeds, data, |r| {
        if failure.is_none() {
            failure = writer.write(r).err();
        }
        done += 1;
        if done.is_multiple_of(per_job) {
            eprintln!("[{}/{total}] n={} r={} r2={} seed={}", done / per_job, r.n, r.r, r.r2, r.seed);
        }
    })?;
    failure.map_or(Ok(()), Err)
}

fn summarize(input: &Path, out: &Option<PathBuf>, plot_out: &Option<PathBuf>) -> Result<()> {
    let rows = experiment::read_results_csv(open(input)?)?;
    let cells = experiment::summarize(&rows);
    let mut w = output(out)?;
    experiment::write_summary_csv(&mut w, &cells)?;
    w.flush()?;
    if let Some(p) = plot_out {
        experiment::write_plot_csv(BufWriter::new(File::create(p)?), &cells)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Alpha { n, r1, r2, paper_table_variant, numeric_check } => {
            alpha(n, r1, r2, paper_table_variant, numeric_check)
        }
        Command::Montecarlo { n, r, alpha, trials, seed, event } => {
            let event = match event {
                Event::RecordChain => SuccessEvent::RecordChain,
                Event::TopSet => SuccessEvent::TopSet,
            };
            let est = montecarlo::monte_carlo_probability(n, r, alpha, trials, seed, event)?;
            println!("n,r,alpha,trials,p_hat,std_err");
            println!("{n},{r},{alpha},{trials},{},{}", est.value, est.std_error);
            Ok(())
        }
        Command::Simulate { policy, stream, r, r1, r2, seed, out } => simulate(policy, &stream, r, r1, r2, seed, &out),
        Command::FlRun { clients, test, rounds, epochs, batch, seed, out } => {
            let plan = TrainingPlan { rounds, epochs, batch_size: batch, ..TrainingPlan::default() };
            fl_run(&clients, &test, plan, seed, &out)
        }
        Command::Prepare { input, test_frac, n_clients, seed, out } => prepare(&input, test_frac, n_clients, seed, &out),
        Command::ExtractFeatures { flows, devices, max_period, out } => extract(&flows, &devices, max_period, &out),
        Command::ConvertFlows { input, mac, out } => {
            let records = flow::convert_generic_flows(open(&input)?, &mac)?;
            let mut w = output(&out)?;
            flow::write_flows_jsonl(&mut w, &records)?;
            w.flush()?;
            Ok(())
        }
        Command::Synth { samples, features, classes, seed, out } => {
            let d = data::synth_dataset(samples, features, classes, seed)?;
            let mut w = output(&out)?;
            d.write_csv(&mut w, &default_feature_names(features))?;
            w.flush()?;
            Ok(())
        }
        Command::Sweep { grid, seeds, data, out } => run_sweep(&grid, &seeds, &data, &out),
        Command::Summarize { input, out, plot_out } => summarize(&input, &out, &plot_out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fedsec: {e}");
            ExitCode::from(e.code().clamp(1, 255) as u8)
        }
    }
}


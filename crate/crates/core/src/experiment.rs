//! End-to-end runs: prepare data, draw an arrival order, probe candidates
//! lazily, let each policy pick its clients, train each selected set with
//! FedAvg, and report the per-policy metrics. Sweeps run the cross product
//! of a grid and a seed list; `summarize` aggregates sweep output.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};
use std::path::PathBuf;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{self, ClientData, PreparedData};
use crate::dataset::{default_feature_names, Dataset};
use crate::error::{Error, Result};
use crate::fl::{federated_train, init_model, probe_client, MlpSpec, ModelParams, TrainingOutcome, TrainingPlan};
use crate::policy::{run_stream, AuditEntry, Candidate, PolicyKind, SelectionAudit, SelectionState};
use crate::rng;
use crate::stopping::BudgetSpec;

/// Where candidate data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    /// Generated per seed with [`data::synth_dataset_with_sigma`].
    Synthetic { samples: usize, features: usize, classes: usize, sigma: f64 },
    /// A directory written by `prepare`; the first `N` clients are used.
    Prepared { dir: PathBuf },
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::synthetic(5000, 10, 28)
    }
}

impl DataSource {
    /// Synthetic data at the default noise level.
    pub fn synthetic(samples: usize, features: usize, classes: usize) -> Self {
        DataSource::Synthetic { samples, features, classes, sigma: data::SYNTH_SIGMA }
    }
}

impl FromStr for DataSource {
    type Err = Error;

    /// `synthetic:5000x10x28` (optionally `synthetic:5000x10x28:σ`), or a
    /// path to a prepared directory (optionally prefixed with `dir:`).
    fn from_str(s: &str) -> Result<Self> {
        if let Some(spec) = s.strip_prefix("synthetic:") {
            let (dims, sigma) = match spec.split_once(':') {
                Some((d, sig)) => {
                    let sigma: f64 = sig.trim().parse().map_err(|_| Error::Parse(format!("bad noise level in {s:?}")))?;
                    (d, sigma)
                }
                None => (spec, data::SYNTH_SIGMA),
            };
            let parts = dims
                .split('x')
                .map(|p| p.trim().parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::Parse(format!("bad synthetic spec {s:?}")))?;
            return match parts[..] {
                [samples, features, classes] => Ok(DataSource::Synthetic { samples, features, classes, sigma }),
                _ => Err(Error::Parse(format!("expected synthetic:SAMPLESxFEATURESxCLASSES, got {s:?}"))),
            };
        }
        let dir = s.strip_prefix("dir:").unwrap_or(s);
        if dir.is_empty() {
            return Err(Error::Parse("empty data source".into()));
        }
        Ok(DataSource::Prepared { dir: dir.into() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n_candidates: usize,
    pub budget: usize,
    pub r_min: u32,
    pub r_max: u32,
    pub plan: TrainingPlan,
    pub data: DataSource,
    pub test_fraction: f64,
    pub policies: Vec<PolicyKind>,
    pub seeds: Vec<u64>,
    /// Selection-plus-training passes per seed.
    pub cycle_count: usize,
}

impl ExperimentConfig {
    pub fn new(n_candidates: usize, budget: usize, r_max: u32) -> Self {
        Self {
            n_candidates,
            budget,
            r_min: 1,
            r_max,
            plan: TrainingPlan::default(),
            data: DataSource::default(),
            test_fraction: 0.2,
            policies: PolicyKind::ALL.to_vec(),
            seeds: vec![1],
            cycle_count: 1,
        }
    }

    pub fn budget_spec(&self) -> Result<BudgetSpec> {
        BudgetSpec::new(self.n_candidates, self.budget, self.r_min, self.r_max)
    }

    fn validate(&self) -> Result<BudgetSpec> {
        if self.policies.is_empty() {
            return Err(Error::domain("no policies requested"));
        }
        if self.cycle_count == 0 {
            return Err(Error::domain("cycle_count must be positive"));
        }
        self.budget_spec()
    }
}

/// Candidate sizes of Table-VI style sweeps.
pub const GRID_N: [usize; 5] = [100, 200, 400, 800, 1600];
pub const GRID_R: [usize; 5] = [10, 20, 30, 40, 50];
pub const GRID_R2: [u32; 5] = [1, 2, 3, 4, 5];

/// Metrics of one policy in one cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub n: usize,
    pub r: usize,
    pub r1: u32,
    pub r2: u32,
    pub alpha_index: usize,
    pub seed: u64,
    pub cycle: usize,
    pub policy: PolicyKind,
    pub final_test_accuracy: f64,
    pub mean_selected_probe_accuracy: f64,
    pub fat_fraction_selected: f64,
    /// Probes the policy needed to decide.
    pub probe_count: usize,
    /// Probes run only to report `mean_selected_probe_accuracy`.
    pub metric_probe_count: usize,
    pub forced_acceptances: usize,
    /// Selected client positions, ascending.
    pub selected: Vec<usize>,
    pub history: Vec<f64>,
}

/// One policy's picks over an arrival order.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub policy: PolicyKind,
    pub audit: SelectionAudit,
    /// Selected client positions, ascending.
    pub clients: Vec<usize>,
    pub probe_count: usize,
    pub metric_probe_count: usize,
}

/// Probe results shared by every policy of a run.
pub struct ProbeCache<'a> {
    values: Vec<Option<f64>>,
    probe: &'a mut dyn FnMut(usize) -> Result<f64>,
}

impl<'a> ProbeCache<'a> {
    pub fn new(n_clients: usize, probe: &'a mut dyn FnMut(usize) -> Result<f64>) -> Self {
        Self { values: vec![None; n_clients], probe }
    }

    pub fn get(&mut self, client: usize) -> Result<f64> {
        if let Some(v) = self.values[client] {
            return Ok(v);
        }
        let v = (self.probe)(client)?;
        self.values[client] = Some(v);
        Ok(v)
    }

    /// Number of distinct clients probed so far.
    pub fn probed(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }
}

pub fn client_id(position: usize) -> String {
    format!("client_{:04}", position + 1)
}

/// Run `policies` over one arrival order. `arrival[k]` is the client
/// position arriving at index `k + 1`. Probes go through `cache`, so the
/// policies see identical accuracies.
pub fn select_all(
    spec: &BudgetSpec,
    arrival: &[usize],
    policies: &[PolicyKind],
    cache: &mut ProbeCache<'_>,
    seed: u64,
) -> Result<Vec<Selection>> {
    if arrival.len() != spec.n_candidates {
        return Err(Error::Size { need: spec.n_candidates, got: arrival.len() });
    }
    let positions = |audit: &SelectionAudit| {
        let mut v: Vec<usize> = audit.selected.iter().map(|c| arrival[c.arrival_index - 1]).collect();
        v.sort_unstable();
        v
    };
    let mut out = Vec::with_capacity(policies.len());
    for &policy in policies {
        let selection = match policy {
            PolicyKind::Secretary => {
                let mut state = SelectionState::new(spec.clone());
                let mut entries = Vec::with_capacity(arrival.len());
                for (k, &c) in arrival.iter().enumerate() {
                    let id = client_id(c);
                    let (d, acc) = state.observe_secretary_with(k + 1, &id, || cache.get(c))?;
                    entries.push(AuditEntry {
                        arrival_index: k + 1,
                        client_id: id,
                        probe_accuracy: acc,
                        verdict: d.verdict,
                        reason: d.reason,
                        n_selected: state.n_selected(),
                        threshold: state.best_observed_accuracy,
                    });
                }
                let forced_acceptances = state.forced_acceptances;
                let audit = SelectionAudit {
                    policy,
                    alpha_index: spec.alpha_star_index,
                    entries,
                    selected: state.into_selected(),
                    forced_acceptances,
                };
                let probe_count = audit.probe_count();
                Selection { policy, clients: positions(&audit), audit, probe_count, metric_probe_count: 0 }
            }
            PolicyKind::Random => {
                // accuracies are not consulted; fill them in afterwards
                let stream: Vec<Candidate> =
                    arrival.iter().enumerate().map(|(k, &c)| Candidate::new(k + 1, client_id(c), 0.0)).collect();
                let mut audit = run_stream(policy, spec, &stream, seed)?;
                for cand in &mut audit.selected {
                    cand.probe_accuracy = cache.get(arrival[cand.arrival_index - 1])?;
                }
                let clients = positions(&audit);
                let metric_probe_count = clients.len();
                Selection { policy, clients, audit, probe_count: 0, metric_probe_count }
            }
            PolicyKind::Best => {
                let stream = arrival
                    .iter()
                    .enumerate()
                    .map(|(k, &c)| Ok(Candidate::new(k + 1, client_id(c), cache.get(c)?)))
                    .collect::<Result<Vec<_>>>()?;
                let audit = run_stream(policy, spec, &stream, seed)?;
                Selection { policy, clients: positions(&audit), audit, probe_count: arrival.len(), metric_probe_count: 0 }
            }
        };
        out.push(selection);
    }
    Ok(out)
}

/// Everything a cycle needs besides the arrival order.
pub struct Environment<'a> {
    pub clients: &'a [ClientData],
    pub test: &'a Dataset,
    pub init: &'a ModelParams,
    pub plan: &'a TrainingPlan,
}

/// Identity of the run a result belongs to.
#[derive(Debug, Clone, Copy)]
pub struct RunTag {
    pub seed: u64,
    pub cycle: usize,
}

/// Select with every policy, then train each selected set from the shared
/// initial model. Policies picking the same set share one training run.
#[allow(clippy::too_many_arguments)]
pub fn run_cycle(
    spec: &BudgetSpec,
    env: &Environment<'_>,
    arrival: &[usize],
    policies: &[PolicyKind],
    cache: &mut ProbeCache<'_>,
    policy_seed: u64,
    train_seed: u64,
    tag: RunTag,
) -> Result<Vec<RunResult>> {
    let selections = select_all(spec, arrival, policies, cache, policy_seed)?;
    let mut trained: HashMap<Vec<usize>, TrainingOutcome> = HashMap::new();
    let mut results = Vec::with_capacity(selections.len());
    for s in selections {
        if !trained.contains_key(&s.clients) {
            let sets: Vec<&Dataset> = s.clients.iter().map(|&c| &env.clients[c].data).collect();
            let outcome = federated_train(env.init, &sets, env.test, env.plan, train_seed)?;
            trained.insert(s.clients.clone(), outcome);
        }
        let outcome = &trained[&s.clients];
        let k = s.clients.len() as f64;
        let mean_probe = s.clients.iter().map(|&c| cache.get(c)).sum::<Result<f64>>()? / k;
        let fat = s.clients.iter().filter(|&&c| env.clients[c].fat).count() as f64 / k;
        results.push(RunResult {
            n: spec.n_candidates,
            r: spec.budget,
            r1: spec.r_min,
            r2: spec.r_max,
            alpha_index: spec.alpha_star_index,
            seed: tag.seed,
            cycle: tag.cycle,
            policy: s.policy,
            final_test_accuracy: outcome.history.last().copied().unwrap_or(f64::NAN),
            mean_selected_probe_accuracy: mean_probe,
            fat_fraction_selected: fat,
            probe_count: s.probe_count,
            metric_probe_count: s.metric_probe_count,
            forced_acceptances: s.audit.forced_acceptances,
            selected: s.clients,
            history: outcome.history.clone(),
        });
    }
    check_best_dominates(&results)?;
    Ok(results)
}

/// The offline baseline maximizes mean selected probe accuracy, so every
/// other policy must score at most as high.
fn check_best_dominates(results: &[RunResult]) -> Result<()> {
    let Some(best) = results.iter().find(|r| r.policy == PolicyKind::Best) else {
        return Ok(());
    };
    for r in results {
        if r.mean_selected_probe_accuracy > best.mean_selected_probe_accuracy + 1e-12 {
            return Err(Error::State(format!(
                "{} selected a higher mean probe accuracy ({}) than the offline best ({})",
                r.policy, r.mean_selected_probe_accuracy, best.mean_selected_probe_accuracy
            )));
        }
    }
    Ok(())
}

fn n_classes(prepared: &PreparedData) -> usize {
    prepared
        .clients
        .iter()
        .map(|c| c.data.n_classes())
        .chain(std::iter::once(prepared.test.n_classes()))
        .max()
        .unwrap_or(0)
}

/// All cycles of one seed, one result per policy per cycle.
pub fn run_experiment(config: &ExperimentConfig, seed: u64) -> Result<Vec<RunResult>> {
    let spec = config.validate()?;
    let n = config.n_candidates;
    let loaded = match &config.data {
        DataSource::Prepared { dir } => {
            let p = data::load_prepared(dir)?;
            if p.clients.len() < n {
                return Err(Error::Size { need: n, got: p.clients.len() });
            }
            Some(p)
        }
        DataSource::Synthetic { .. } => None,
    };
    let mut results = Vec::with_capacity(config.cycle_count * config.policies.len());
    for cycle in 0..config.cycle_count {
        let cycle_seed = rng::derive_seed(seed, &[rng::TAG_CYCLE, cycle as u64]);
        let generated;
        let prepared = match (&config.data, &loaded) {
            (_, Some(p)) => p,
            (&DataSource::Synthetic { samples, features, classes, sigma }, None) => {
                let table = data::synth_dataset_with_sigma(samples, features, classes, sigma, seed)?;
                generated =
                    data::prepare(&table, default_feature_names(features), config.test_fraction, n, cycle_seed)?;
                &generated
            }
            (DataSource::Prepared { .. }, None) => unreachable!("prepared data is loaded up front"),
        };
        let clients = &prepared.clients[..n];
        let init = init_model(&MlpSpec::new(prepared.test.n_features(), n_classes(prepared)), cycle_seed)?;
        let mut arrival: Vec<usize> = (0..n).collect();
        arrival.shuffle(&mut rng::rng_from(cycle_seed, &[rng::TAG_ARRIVAL]));

        let env = Environment { clients, test: &prepared.test, init: &init, plan: &config.plan };
        let mut probe = |c: usize| {
            let s = rng::derive_seed(cycle_seed, &[rng::TAG_PROBE, c as u64]);
            probe_client(&init, &clients[c].data, &prepared.test, &config.plan, s)
        };
        let mut cache = ProbeCache::new(n, &mut probe);
        let train_seed = rng::derive_seed(cycle_seed, &[rng::TAG_TRAIN]);
        results.extend(run_cycle(
            &spec,
            &env,
            &arrival,
            &config.policies,
            &mut cache,
            cycle_seed,
            train_seed,
            RunTag { seed, cycle },
        )?);
    }
    Ok(results)
}

/// Sweep grid, as read from `grid.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    pub n: Vec<usize>,
    pub r: Vec<usize>,
    pub r2: Vec<u32>,
    #[serde(default = "one")]
    pub r1: u32,
    /// Overrides of the default training plan.
    #[serde(default)]
    pub plan: TrainingPlan,
    #[serde(default = "all_policies")]
    pub policies: Vec<PolicyKind>,
    #[serde(default = "one_usize")]
    pub cycle_count: usize,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
}

fn one() -> u32 {
    1
}

fn one_usize() -> usize {
    1
}

fn all_policies() -> Vec<PolicyKind> {
    PolicyKind::ALL.to_vec()
}

fn default_test_fraction() -> f64 {
    0.2
}

impl SweepGrid {
    /// The full 5×5×5 grid.
    pub fn table() -> Self {
        Self::new(GRID_N.to_vec(), GRID_R.to_vec(), GRID_R2.to_vec())
    }

    pub fn new(n: Vec<usize>, r: Vec<usize>, r2: Vec<u32>) -> Self {
        Self {
            n,
            r,
            r2,
            r1: 1,
            plan: TrainingPlan::default(),
            policies: all_policies(),
            cycle_count: 1,
            test_fraction: default_test_fraction(),
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn n_cells(&self) -> usize {
        self.n.len() * self.r.len() * self.r2.len()
    }

    /// Cell configurations in sweep order (n, then r, then r2).
    pub fn cells(&self, data: &DataSource, seeds: &[u64]) -> Vec<ExperimentConfig> {
        let mut out = Vec::with_capacity(self.n_cells());
        for &n in &self.n {
            for &r in &self.r {
                for &r2 in &self.r2 {
                    out.push(ExperimentConfig {
                        n_candidates: n,
                        budget: r,
                        r_min: self.r1,
                        r_max: r2,
                        plan: self.plan,
                        data: data.clone(),
                        test_fraction: self.test_fraction,
                        policies: self.policies.clone(),
                        seeds: seeds.to_vec(),
                        cycle_count: self.cycle_count,
                    });
                }
            }
        }
        out
    }
}

/// Parse `1..10` (inclusive), `3`, or `1,4,9`.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let bad = || Error::Parse(format!("bad seed list {s:?}"));
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        if b < a {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    let seeds = s.split(',').map(|p| p.trim().parse::<u64>().map_err(|_| bad())).collect::<Result<Vec<_>>>()?;
    if seeds.is_empty() {
        return Err(bad());
    }
    Ok(seeds)
}

/// Run every cell × seed of `grid`. `on_result` sees each result as it is
/// produced, in output order.
pub fn sweep(
    grid: &SweepGrid,
    seeds: &[u64],
    data: &DataSource,
    mut on_result: impl FnMut(&RunResult),
) -> Result<Vec<RunResult>> {
    if grid.n_cells() == 0 || seeds.is_empty() {
        return Err(Error::domain("empty sweep grid or seed list"));
    }
    let mut out = Vec::new();
    for cfg in grid.cells(data, seeds) {
        for &seed in seeds {
            let rows = run_experiment(&cfg, seed).map_err(|e| Error::Cell {
                cell: format!("n={} r={} r2={} seed={seed}", cfg.n_candidates, cfg.budget, cfg.r_max),
                source: Box::new(e),
            })?;
            rows.iter().for_each(&mut on_result);
            out.extend(rows);
        }
    }
    Ok(out)
}

/// One line of a sweep results CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub n: usize,
    pub r: usize,
    pub r2: u32,
    pub alpha_index: usize,
    pub policy: PolicyKind,
    pub seed: u64,
    pub final_acc: f64,
    pub mean_sel_probe_acc: f64,
    pub fat_frac: f64,
    pub probe_count: usize,
}

impl From<&RunResult> for ResultRow {
    fn from(r: &RunResult) -> Self {
        Self {
            n: r.n,
            r: r.r,
            r2: r.r2,
            alpha_index: r.alpha_index,
            policy: r.policy,
            seed: r.seed,
            final_acc: r.final_test_accuracy,
            mean_sel_probe_acc: r.mean_selected_probe_accuracy,
            fat_frac: r.fat_fraction_selected,
            probe_count: r.probe_count,
        }
    }
}

pub struct ResultWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> ResultWriter<W> {
    pub fn new(w: W) -> Self {
        Self { inner: csv::Writer::from_writer(w) }
    }

    pub fn write(&mut self, r: &RunResult) -> Result<()> {
        self.inner.serialize(ResultRow::from(r))?;
        self.inner.flush()?;
        Ok(())
    }
}

pub fn write_results_csv<W: Write>(w: W, results: &[RunResult]) -> Result<()> {
    let mut out = ResultWriter::new(w);
    results.iter().try_for_each(|r| out.write(r))
}

pub fn read_results_csv<R: Read>(r: R) -> Result<Vec<ResultRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    rdr.deserialize()
        .enumerate()
        .map(|(i, row)| row.map_err(|e| Error::Malformed { line: i + 2, msg: e.to_string() }))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        if values.len() < 2 {
            return Self { mean, std: 0.0 };
        }
        let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        Self { mean, std: (ss / (n - 1.0)).sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub n: usize,
    pub r: usize,
    pub r2: u32,
    pub policy: PolicyKind,
    pub runs: usize,
    pub final_acc: Stat,
    pub mean_sel_probe_acc: Stat,
    pub fat_frac: Stat,
    pub probe_count: Stat,
}

pub const SUMMARY_METRICS: [&str; 4] = ["final_acc", "mean_sel_probe_acc", "fat_frac", "probe_count"];

impl CellSummary {
    pub fn metrics(&self) -> [(&'static str, Stat); 4] {
        [
            (SUMMARY_METRICS[0], self.final_acc),
            (SUMMARY_METRICS[1], self.mean_sel_probe_acc),
            (SUMMARY_METRICS[2], self.fat_frac),
            (SUMMARY_METRICS[3], self.probe_count),
        ]
    }
}

/// Group by `(n, r, r2, policy)`; groups come out sorted by that key.
pub fn summarize(rows: &[ResultRow]) -> Vec<CellSummary> {
    let mut groups: BTreeMap<(usize, usize, u32, PolicyKind), Vec<&ResultRow>> = BTreeMap::new();
    for row in rows {
        groups.entry((row.n, row.r, row.r2, row.policy)).or_default().push(row);
    }
    groups
        .into_iter()
        .map(|((n, r, r2, policy), g)| {
            let stat = |f: fn(&ResultRow) -> f64| Stat::of(&g.iter().map(|row| f(row)).collect::<Vec<_>>());
            CellSummary {
                n,
                r,
                r2,
                policy,
                runs: g.len(),
                final_acc: stat(|x| x.final_acc),
                mean_sel_probe_acc: stat(|x| x.mean_sel_probe_acc),
                fat_frac: stat(|x| x.fat_frac),
                probe_count: stat(|x| x.probe_count as f64),
            }
        })
        .collect()
}

/// Wide table: one row per cell and policy, `<metric>_mean,<metric>_std`.
pub fn write_summary_csv<W: Write>(w: W, cells: &[CellSummary]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["n".to_string(), "r".into(), "r2".into(), "policy".into(), "runs".into()];
    for m in SUMMARY_METRICS {
        header.push(format!("{m}_mean"));
        header.push(format!("{m}_std"));
    }
    out.write_record(&header)?;
    for c in cells {
        let mut rec = vec![c.n.to_string(), c.r.to_string(), c.r2.to_string(), c.policy.to_string(), c.runs.to_string()];
        for (_, s) in c.metrics() {
            rec.push(s.mean.to_string());
            rec.push(s.std.to_string());
        }
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

/// Long format for plotting: `n,r,r2,policy,metric,mean,std`.
pub fn write_plot_csv<W: Write>(w: W, cells: &[CellSummary]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["n", "r", "r2", "policy", "metric", "mean", "std"])?;
    for c in cells {
        for (m, s) in c.metrics() {
            out.write_record([
                c.n.to_string(),
                c.r.to_string(),
                c.r2.to_string(),
                c.policy.to_string(),
                m.to_string(),
                s.mean.to_string(),
                s.std.to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

//! Benchmark plans, the resumable sweep runner, and CSV summaries.
//!
//! A plan is a TOML document:
//!
//! ```toml
//! study = "dimension_sweep"
//! backends = ["krylov", "dense"]
//! krylov_dims = [10]
//! dt = [0.5]
//! seeds = [0, 1, 2, 3, 4]
//! output = "dimension_sweep.csv"
//!
//! [models]
//! sites = [9, 10, 11, 12, 13]
//! excitations = [3]
//! parity = ["even"]
//!
//! [optimizer]
//! max_iterations = 5000
//! ```
//!
//! Optional keys: `m_factor` (4.0), `gradient` ("centered"), `workers` (1),
//! `dense_max_iterations`, `verify_exact` (false), and every field of the
//! optimizer table.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::mpsc;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grape::{GradientKind, PropagatorBackend, EXACT_GRADIENT_CAP};
use crate::optim::{elementary_runtime, solve_control, OptimizerConfig, SolveSettings, StopStatus};
use crate::spinchain::{ChainSpec, Parity, ReducedModel};

pub const CSV_HEADER: &str =
    "study,L,K,parity,D,backend,N,dt,M,seed,iterations,field_evaluations,wall_time_seconds,elementary_runtime,final_infidelity,status";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Study {
    DimensionSweep,
    TimestepSweep,
    TruncationSweep,
    WindowSweep,
}

impl Study {
    pub const ALL: [Study; 4] = [Study::DimensionSweep, Study::TimestepSweep, Study::TruncationSweep, Study::WindowSweep];

    pub fn as_str(&self) -> &'static str {
        match self {
            Study::DimensionSweep => "dimension_sweep",
            Study::TimestepSweep => "timestep_sweep",
            Study::TruncationSweep => "truncation_sweep",
            Study::WindowSweep => "window_sweep",
        }
    }
}

impl fmt::Display for Study {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Study {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Study::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown study '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Krylov,
    Dense,
    DenseCached,
}

impl BackendKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            BackendKind::Krylov => "krylov",
            BackendKind::Dense => "dense",
            BackendKind::DenseCached => "dense_cached",
        }
    }

    pub fn backend(&self, krylov_dim: Option<usize>) -> Result<PropagatorBackend> {
        match (self, krylov_dim) {
            (BackendKind::Krylov, Some(n)) => Ok(PropagatorBackend::krylov(n)),
            (BackendKind::Krylov, None) => Err(Error::Config("krylov backend needs a Krylov dimension".into())),
            (BackendKind::Dense, _) => Ok(PropagatorBackend::dense()),
            (BackendKind::DenseCached, _) => Ok(PropagatorBackend::dense_cached()),
        }
    }
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelGrid {
    pub sites: Vec<usize>,
    pub excitations: Vec<usize>,
    #[serde(default = "default_parity")]
    pub parity: Vec<Parity>,
}

fn default_parity() -> Vec<Parity> {
    vec![Parity::Even]
}

fn default_m_factor() -> f64 {
    4.0
}

fn default_gradient() -> GradientKind {
    GradientKind::Centered
}

fn default_workers() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchPlan {
    pub study: Study,
    pub models: ModelGrid,
    pub backends: Vec<BackendKind>,
    #[serde(default)]
    pub krylov_dims: Vec<usize>,
    pub dt: Vec<f64>,
    #[serde(default = "default_m_factor")]
    pub m_factor: f64,
    #[serde(default = "default_gradient")]
    pub gradient: GradientKind,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    /// Iteration cap for dense cells; dense runs only need enough
    /// evaluations to time them.
    #[serde(default)]
    pub dense_max_iterations: Option<usize>,
    /// Record the infidelity of the final protocol under exact propagation
    /// instead of the optimizer's own objective. Needs `D ≤ 512`.
    #[serde(default)]
    pub verify_exact: bool,
    pub output: PathBuf,
    /// Concurrent cells; keep at 1 for timing studies.
    #[serde(default = "default_workers")]
    pub workers: usize,
}

/// Grid sizes for the preset plans.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scale {
    Desk,
    Full,
}

impl FromStr for Scale {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Scale::Desk),
            "full" => Ok(Scale::Full),
            _ => Err(Error::Config(format!("unknown scale '{s}' (desk | full)"))),
        }
    }
}

fn dt_grid(count: usize, step: f64) -> Vec<f64> {
    (1..=count).map(|i| (i as f64 * step * 1e6).round() / 1e6).collect()
}

impl BenchPlan {
    pub fn from_toml(text: &str) -> Result<Self> {
        let plan: BenchPlan = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Ready-made plans for the four studies; `Desk` shrinks seeds and
    /// dimensions to laptop scale.
    pub fn preset(study: Study, scale: Scale) -> Self {
        let desk = scale == Scale::Desk;
        let seeds: Vec<u64> = (0..if desk { 5 } else { 20 }).collect();
        let d60 = ModelGrid { sites: vec![10], excitations: vec![3], parity: vec![Parity::Even] };
        let (models, backends, krylov_dims, dt) = match study {
            Study::DimensionSweep => (
                ModelGrid {
                    sites: if desk { (9..=13).collect() } else { (9..=20).collect() },
                    excitations: vec![3],
                    parity: vec![Parity::Even],
                },
                vec![BackendKind::Krylov, BackendKind::Dense],
                vec![10],
                vec![0.5],
            ),
            Study::TimestepSweep => (d60, vec![BackendKind::Krylov], vec![2, 6, 10], dt_grid(10, 0.1)),
            Study::TruncationSweep => (
                d60,
                vec![BackendKind::Krylov],
                if desk { vec![2, 4, 6, 8, 10, 12] } else { (2..=20).collect() },
                vec![0.5],
            ),
            Study::WindowSweep => (
                ModelGrid {
                    sites: if desk { vec![6, 7, 9, 13] } else { vec![6, 7, 9, 10, 11, 13, 15, 17] },
                    excitations: vec![3],
                    parity: vec![Parity::Even],
                },
                vec![BackendKind::Krylov],
                vec![6],
                dt_grid(10, 0.1),
            ),
        };
        BenchPlan {
            study,
            models,
            backends,
            krylov_dims,
            dt,
            m_factor: 4.0,
            gradient: GradientKind::Centered,
            seeds,
            optimizer: OptimizerConfig::default(),
            dense_max_iterations: None,
            verify_exact: false,
            output: PathBuf::from(format!("{study}.csv")),
            workers: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.models.sites.is_empty() || self.models.excitations.is_empty() || self.models.parity.is_empty() {
            return bad("model grid must be non-empty");
        }
        if self.backends.is_empty() {
            return bad("backend list must be non-empty");
        }
        if self.backends.contains(&BackendKind::Krylov) {
            if self.krylov_dims.is_empty() {
                return bad("krylov backend needs krylov_dims");
            }
            if self.krylov_dims.contains(&0) {
                return bad("Krylov dimensions must be positive");
            }
        }
        if self.dt.is_empty() || self.dt.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return bad("dt grid must be non-empty and positive");
        }
        if self.seeds.is_empty() {
            return bad("seed list must be non-empty");
        }
        if !(self.m_factor.is_finite() && self.m_factor > 0.0) {
            return bad("m_factor must be positive");
        }
        if self.workers == 0 {
            return bad("workers must be positive");
        }
        self.optimizer.validate()?;
        for spec in self.chain_specs()? {
            let d = spec.pe_dim();
            if d < 2 {
                return Err(Error::Config(format!(
                    "L={} K={} {} has dimension {d}; need at least 2",
                    spec.sites, spec.excitations, spec.parity
                )));
            }
        }
        Ok(())
    }

    fn chain_specs(&self) -> Result<Vec<ChainSpec>> {
        let mut out = Vec::new();
        for &l in &self.models.sites {
            for &k in &self.models.excitations {
                for &p in &self.models.parity {
                    out.push(ChainSpec::xxz(l, k, p).map_err(|e| Error::Config(e.to_string()))?);
                }
            }
        }
        Ok(out)
    }

    /// Every cell of the grid, in execution order.
    pub fn cells(&self) -> Result<Vec<Cell>> {
        let mut cells = Vec::new();
        for spec in self.chain_specs()? {
            for &backend in &self.backends {
                let dims: Vec<Option<usize>> = match backend {
                    BackendKind::Krylov => self.krylov_dims.iter().map(|&n| Some(n)).collect(),
                    _ => vec![None],
                };
                for n in dims {
                    for &dt in &self.dt {
                        for &seed in &self.seeds {
                            cells.push(Cell { spec, backend, krylov_dim: n, dt, seed });
                        }
                    }
                }
            }
        }
        Ok(cells)
    }
}

/// One point of the plan grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub spec: ChainSpec,
    pub backend: BackendKind,
    pub krylov_dim: Option<usize>,
    pub dt: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellKey {
    pub study: Study,
    pub sites: usize,
    pub excitations: usize,
    pub parity: Parity,
    pub backend: BackendKind,
    pub krylov_dim: Option<usize>,
    pub dt_bits: u64,
    pub seed: u64,
}

impl Cell {
    pub fn key(&self, study: Study) -> CellKey {
        CellKey {
            study,
            sites: self.spec.sites,
            excitations: self.spec.excitations,
            parity: self.spec.parity,
            backend: self.backend,
            krylov_dim: self.krylov_dim,
            dt_bits: self.dt.to_bits(),
            seed: self.seed,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    TargetReached,
    Stalled,
    MaxIter,
    Failed,
}

impl From<StopStatus> for RunStatus {
    fn from(s: StopStatus) -> Self {
        match s {
            StopStatus::TargetReached => RunStatus::TargetReached,
            StopStatus::Stalled => RunStatus::Stalled,
            StopStatus::MaxIter => RunStatus::MaxIter,
        }
    }
}

/// One CSV row. Dense rows leave `N` empty; failed rows leave the
/// derived runtime and the infidelity empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub study: Study,
    #[serde(rename = "L")]
    pub sites: usize,
    #[serde(rename = "K")]
    pub excitations: usize,
    pub parity: Parity,
    #[serde(rename = "D")]
    pub dim: usize,
    pub backend: BackendKind,
    #[serde(rename = "N")]
    pub krylov_dim: Option<usize>,
    pub dt: f64,
    #[serde(rename = "M")]
    pub slots: usize,
    pub seed: u64,
    pub iterations: usize,
    pub field_evaluations: usize,
    pub wall_time_seconds: f64,
    pub elementary_runtime: Option<f64>,
    pub final_infidelity: Option<f64>,
    pub status: RunStatus,
}

impl RunRecord {
    pub fn key(&self) -> CellKey {
        CellKey {
            study: self.study,
            sites: self.sites,
            excitations: self.excitations,
            parity: self.parity,
            backend: self.backend,
            krylov_dim: self.krylov_dim,
            dt_bits: self.dt.to_bits(),
            seed: self.seed,
        }
    }

    pub fn succeeded(&self, target: f64) -> bool {
        self.final_infidelity.is_some_and(|i| i <= target)
    }
}

pub fn write_records<W: Write>(out: W, records: &[RunRecord], header: bool) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(header).from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<RunRecord>> {
    parse_records(File::open(path)?)
}

pub fn parse_records<R: std::io::Read>(input: R) -> Result<Vec<RunRecord>> {
    let mut reader = csv::Reader::from_reader(input);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != CSV_HEADER {
        return Err(Error::Config(format!("unexpected CSV header '{}'", header.join(","))));
    }
    reader.deserialize().map(|r| r.map_err(Error::from)).collect()
}

/// Runs one cell; model construction is outside the timed region.
pub fn run_cell(plan: &BenchPlan, cell: &Cell, model: &ReducedModel) -> RunRecord {
    let dim = model.dim();
    let slots = (plan.m_factor * dim as f64).round().max(1.0) as usize;
    let mut record = RunRecord {
        study: plan.study,
        sites: cell.spec.sites,
        excitations: cell.spec.excitations,
        parity: cell.spec.parity,
        dim,
        backend: cell.backend,
        krylov_dim: cell.krylov_dim,
        dt: cell.dt,
        slots,
        seed: cell.seed,
        iterations: 0,
        field_evaluations: 0,
        wall_time_seconds: 0.0,
        elementary_runtime: None,
        final_infidelity: None,
        status: RunStatus::Failed,
    };
    let outcome = (|| -> Result<_> {
        let problem = model.transfer_problem()?;
        let settings = SolveSettings {
            m_factor: plan.m_factor,
            slots: Some(slots),
            dt: cell.dt,
            gradient: plan.gradient,
            backend: cell.backend.backend(cell.krylov_dim)?,
            rng_seed: cell.seed,
            verify_exact: plan.verify_exact,
            ..SolveSettings::default()
        };
        if plan.verify_exact && dim > EXACT_GRADIENT_CAP {
            return Err(Error::InvalidArgument(format!("exact verification needs D <= {EXACT_GRADIENT_CAP}, got {dim}")));
        }
        let mut cfg = plan.optimizer.clone();
        if cell.backend != BackendKind::Krylov {
            if let Some(cap) = plan.dense_max_iterations {
                cfg.max_iterations = cap;
            }
        }
        let rec = solve_control(&problem, &settings, &cfg)?;
        let er = elementary_runtime(&rec, slots)?;
        Ok((rec, er))
    })();
    if let Ok((rec, er)) = outcome {
        record.iterations = rec.iterations;
        record.field_evaluations = rec.field_evaluations;
        record.wall_time_seconds = rec.wall_time_seconds;
        record.elementary_runtime = Some(er);
        record.final_infidelity = Some(rec.exact_infidelity.unwrap_or(rec.final_infidelity));
        record.status = rec.status.into();
    }
    record
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchOutcome {
    /// All rows of the output file after the run.
    pub records: Vec<RunRecord>,
    pub executed: usize,
    pub skipped: usize,
    pub failures: usize,
}

/// Executes every cell missing from the output CSV and appends its row.
pub fn run_plan(plan: &BenchPlan) -> Result<BenchOutcome> {
    run_plan_with(plan, |_| {})
}

pub fn run_plan_with<F>(plan: &BenchPlan, mut on_row: F) -> Result<BenchOutcome>
where
    F: FnMut(&RunRecord) + Send,
{
    plan.validate()?;
    let existing = if plan.output.exists() && fs::metadata(&plan.output)?.len() > 0 {
        read_records(&plan.output)?
    } else {
        Vec::new()
    };
    let done: HashSet<CellKey> = existing.iter().map(RunRecord::key).collect();
    let cells = plan.cells()?;
    let pending: Vec<Cell> = cells.iter().filter(|c| !done.contains(&c.key(plan.study))).cloned().collect();
    let skipped = cells.len() - pending.len();

    let mut models: HashMap<(usize, usize, Parity), ReducedModel> = HashMap::new();
    for cell in &pending {
        let key = (cell.spec.sites, cell.spec.excitations, cell.spec.parity);
        if let std::collections::hash_map::Entry::Vacant(e) = models.entry(key) {
            e.insert(ReducedModel::build(&cell.spec)?);
        }
    }

    if let Some(parent) = plan.output.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let fresh = existing.is_empty();
    let mut file = OpenOptions::new().create(true).append(true).open(&plan.output)?;
    if fresh {
        file.set_len(0)?;
        writeln!(file, "{CSV_HEADER}")?;
        file.flush()?;
    }

    let mut executed = Vec::with_capacity(pending.len());
    let mut write_row = |row: RunRecord, file: &mut File| -> Result<()> {
        write_records(&mut *file, std::slice::from_ref(&row), false)?;
        file.flush()?;
        on_row(&row);
        executed.push(row);
        Ok(())
    };

    if plan.workers <= 1 {
        for cell in &pending {
            let model = &models[&(cell.spec.sites, cell.spec.excitations, cell.spec.parity)];
            write_row(run_cell(plan, cell, model), &mut file)?;
        }
    } else {
        let queue = Mutex::new(pending.iter());
        let (tx, rx) = mpsc::channel();
        std::thread::scope(|scope| -> Result<()> {
            for _ in 0..plan.workers.min(pending.len()) {
                let tx = tx.clone();
                let queue = &queue;
                let models = &models;
                scope.spawn(move || loop {
                    let next = queue.lock().map(|mut q| q.next()).unwrap_or(None);
                    let Some(cell) = next else { break };
                    let model = &models[&(cell.spec.sites, cell.spec.excitations, cell.spec.parity)];
                    if tx.send(run_cell(plan, cell, model)).is_err() {
                        break;
                    }
                });
            }
            drop(tx);
            for row in rx {
                write_row(row, &mut file)?;
            }
            Ok(())
        })?;
    }

    let failures = executed.iter().filter(|r| r.status == RunStatus::Failed).count();
    let count = executed.len();
    let mut records = existing;
    records.extend(executed);
    Ok(BenchOutcome { records, executed: count, skipped, failures })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub study: Study,
    pub backend: BackendKind,
    #[serde(rename = "D")]
    pub dim: usize,
    #[serde(rename = "N")]
    pub krylov_dim: Option<usize>,
    pub dt: f64,
    pub runs: usize,
    pub failures: usize,
    pub min_infidelity: Option<f64>,
    pub mean_infidelity: Option<f64>,
    pub mean_iterations: Option<f64>,
    /// Mean total optimization time.
    pub mean_runtime: Option<f64>,
    /// Mean time per field evaluation and slot.
    pub mean_elementary_runtime: Option<f64>,
}

/// Least-squares slope of `log 𝓡` against `log D`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub study: Study,
    pub backend: BackendKind,
    #[serde(rename = "N")]
    pub krylov_dim: Option<usize>,
    pub dt: f64,
    pub dimensions: Vec<usize>,
    pub slope: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub groups: Vec<GroupSummary>,
    pub runtime_scaling: Vec<ScalingFit>,
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 || points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return None;
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Aggregates per (study, backend, D, N, dt) and fits runtime scaling in D.
pub fn summarize(records: &[RunRecord]) -> Result<Summary> {
    if records.is_empty() {
        return Err(Error::EmptyInput("no records to summarize".into()));
    }
    type GroupKey = (Study, BackendKind, usize, Option<usize>, u64);
    let mut groups: BTreeMap<GroupKey, Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.study, r.backend, r.dim, r.krylov_dim, r.dt.to_bits())).or_default().push(r);
    }
    let summaries: Vec<GroupSummary> = groups
        .iter()
        .map(|(&(study, backend, dim, krylov_dim, dt_bits), rows)| {
            let ok: Vec<&&RunRecord> = rows.iter().filter(|r| r.status != RunStatus::Failed).collect();
            let infid: Vec<f64> = ok.iter().filter_map(|r| r.final_infidelity).collect();
            GroupSummary {
                study,
                backend,
                dim,
                krylov_dim,
                dt: f64::from_bits(dt_bits),
                runs: rows.len(),
                failures: rows.len() - ok.len(),
                min_infidelity: infid.iter().copied().reduce(f64::min),
                mean_infidelity: mean(&infid),
                mean_iterations: mean(&ok.iter().map(|r| r.iterations as f64).collect::<Vec<_>>()),
                mean_runtime: mean(&ok.iter().map(|r| r.wall_time_seconds).collect::<Vec<_>>()),
                mean_elementary_runtime: mean(&ok.iter().filter_map(|r| r.elementary_runtime).collect::<Vec<_>>()),
            }
        })
        .collect();

    let mut series: BTreeMap<(Study, BackendKind, Option<usize>, u64), Vec<(usize, f64)>> = BTreeMap::new();
    for g in &summaries {
        if let Some(rt) = g.mean_runtime {
            series.entry((g.study, g.backend, g.krylov_dim, g.dt.to_bits())).or_default().push((g.dim, rt));
        }
    }
    let runtime_scaling = series
        .into_iter()
        .filter_map(|((study, backend, krylov_dim, dt_bits), pts)| {
            let xy: Vec<(f64, f64)> = pts.iter().map(|&(d, r)| (d as f64, r)).collect();
            loglog_slope(&xy).map(|slope| ScalingFit {
                study,
                backend,
                krylov_dim,
                dt: f64::from_bits(dt_bits),
                dimensions: pts.iter().map(|p| p.0).collect(),
                slope,
            })
        })
        .collect();
    Ok(Summary { groups: summaries, runtime_scaling })
}

//! L-BFGS with a strong-Wolfe line search, and the end-to-end control solver.

use std::collections::VecDeque;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grape::{evaluate, exact_infidelity, ControlProblem, GradientKind, PropagatorBackend, PwcProtocol, EXACT_GRADIENT_CAP};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub memory: usize,
    pub wolfe_c1: f64,
    pub wolfe_c2: f64,
    pub max_iterations: usize,
    /// Stop once the objective is at or below this value.
    pub target_infidelity: f64,
    /// Stop once an accepted step changes the objective by less than this.
    pub min_objective_change: f64,
    pub max_linesearch_steps: usize,
    /// Stop once `‖∇f‖₂` falls below this; zero disables the check.
    pub gradient_tolerance: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            memory: 10,
            wolfe_c1: 1e-4,
            wolfe_c2: 0.9,
            max_iterations: 5000,
            target_infidelity: 1e-2,
            min_objective_change: 10.0 * f64::EPSILON,
            max_linesearch_steps: 40,
            gradient_tolerance: 0.0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.memory == 0 {
            return Err(Error::Config("memory must be positive".into()));
        }
        if !(0.0 < self.wolfe_c1 && self.wolfe_c1 < self.wolfe_c2 && self.wolfe_c2 < 1.0) {
            return Err(Error::Config(format!(
                "Wolfe constants need 0 < c1 < c2 < 1, got c1={} c2={}",
                self.wolfe_c1, self.wolfe_c2
            )));
        }
        if self.max_linesearch_steps == 0 {
            return Err(Error::Config("max_linesearch_steps must be positive".into()));
        }
        if self.target_infidelity.is_nan() || self.min_objective_change.is_nan() || self.gradient_tolerance.is_nan() {
            return Err(Error::Config("tolerances must not be NaN".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopStatus {
    TargetReached,
    Stalled,
    MaxIter,
}

impl StopStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopStatus::TargetReached => "target_reached",
            StopStatus::Stalled => "stalled",
            StopStatus::MaxIter => "max_iter",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizationRecord {
    pub final_infidelity: f64,
    pub iterations: usize,
    /// Objective-and-gradient evaluations, line-search probes included.
    pub field_evaluations: usize,
    /// Measured around the optimizer loop only.
    pub wall_time_seconds: f64,
    /// Objective at the start and after every accepted step.
    pub trace: Vec<f64>,
    pub status: StopStatus,
    pub final_amplitudes: Vec<f64>,
    /// Slot width, when the record comes from a control solve.
    pub dt: Option<f64>,
    /// Infidelity of the final protocol under exact propagation, when requested.
    pub exact_infidelity: Option<f64>,
}

impl OptimizationRecord {
    pub fn protocol(&self) -> Option<PwcProtocol> {
        self.dt.and_then(|dt| PwcProtocol::new(self.final_amplitudes.clone(), dt).ok())
    }
}

/// Wall time per field evaluation and per slot.
pub fn elementary_runtime(record: &OptimizationRecord, slots: usize) -> Result<f64> {
    if record.field_evaluations == 0 {
        return Err(Error::InvalidArgument("record has no field evaluations".into()));
    }
    if slots == 0 {
        return Err(Error::InvalidArgument("slot count must be positive".into()));
    }
    Ok(record.wall_time_seconds / (record.field_evaluations as f64 * slots as f64))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Curvature pairs `(s, y, 1/yᵀs)`, oldest first.
#[derive(Clone, Debug, Default)]
pub struct LbfgsMemory {
    capacity: usize,
    pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)>,
}

impl LbfgsMemory {
    pub fn new(capacity: usize) -> Self {
        Self { capacity, pairs: VecDeque::with_capacity(capacity) }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn clear(&mut self) {
        self.pairs.clear();
    }

    /// Stores the pair unless `yᵀs ≤ 1e−10 ‖y‖‖s‖`; returns whether it was kept.
    pub fn push(&mut self, s: Vec<f64>, y: Vec<f64>) -> bool {
        let ys = dot(&y, &s);
        if !(ys > 1e-10 * norm(&y) * norm(&s)) {
            return false;
        }
        if self.pairs.len() == self.capacity {
            self.pairs.pop_front();
        }
        self.pairs.push_back((s, y, 1.0 / ys));
        true
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&[f64], &[f64])> {
        self.pairs.iter().map(|(s, y, _)| (s.as_slice(), y.as_slice()))
    }

    /// `H₀` scaling `sᵀy/yᵀy` of the newest pair, 1 when empty.
    pub fn gamma(&self) -> f64 {
        self.pairs.back().map_or(1.0, |(s, y, _)| dot(s, y) / dot(y, y))
    }

    /// Two-loop recursion: returns `−H g`.
    pub fn direction(&self, grad: &[f64]) -> Vec<f64> {
        let mut q = grad.to_vec();
        let mut alphas = Vec::with_capacity(self.pairs.len());
        for (s, y, rho) in self.pairs.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        let gamma = self.gamma();
        q.iter_mut().for_each(|qi| *qi *= gamma);
        for ((s, y, rho), a) in self.pairs.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        q.iter_mut().for_each(|qi| *qi = -*qi);
        q
    }
}

#[derive(Clone, Debug)]
pub struct LineSearchOutcome {
    pub step: f64,
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub evaluations: usize,
}

#[derive(Clone, Debug)]
pub enum LineSearchResult {
    Accepted(LineSearchOutcome),
    Failed { evaluations: usize },
}

struct Probe {
    step: f64,
    value: f64,
    slope: f64,
    x: Vec<f64>,
    gradient: Vec<f64>,
}

/// Minimizer of the cubic through `(a, fa, da)` and `(b, fb, db)`, if real.
fn cubic_minimizer(a: f64, fa: f64, da: f64, b: f64, fb: f64, db: f64) -> Option<f64> {
    let d1 = da + db - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - da * db;
    if !(disc >= 0.0) {
        return None;
    }
    let d2 = (b - a).signum() * disc.sqrt();
    let t = b - (b - a) * (db + d2 - d1) / (db - da + 2.0 * d2);
    t.is_finite().then_some(t)
}

/// Line search enforcing the strong Wolfe conditions
///
/// ```text
/// f(x + αp) ≤ f(x) + c1 α ∇fᵀp,   |∇f(x + αp)ᵀp| ≤ c2 |∇fᵀp|
/// ```
///
/// by bracketing and cubic-interpolation zoom. A non-finite probe halves
/// the trial step.
#[allow(clippy::too_many_arguments)]
pub fn strong_wolfe_search<F>(
    objective: &mut F,
    x: &[f64],
    value: f64,
    gradient: &[f64],
    direction: &[f64],
    initial_step: f64,
    cfg: &OptimizerConfig,
) -> Result<LineSearchResult>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let slope0 = dot(gradient, direction);
    if !(slope0 < 0.0) {
        return Ok(LineSearchResult::Failed { evaluations: 0 });
    }
    let mut evaluations = 0;
    let mut probe = |step: f64, evaluations: &mut usize| -> Result<Option<Probe>> {
        *evaluations += 1;
        let xs: Vec<f64> = x.iter().zip(direction).map(|(xi, pi)| xi + step * pi).collect();
        match objective(&xs) {
            Ok((v, g)) if v.is_finite() && g.iter().all(|gi| gi.is_finite()) => {
                if g.len() != x.len() {
                    return Err(Error::DimensionMismatch { expected: x.len(), found: g.len() });
                }
                let slope = dot(&g, direction);
                Ok(Some(Probe { step, value: v, slope, x: xs, gradient: g }))
            }
            Ok(_) | Err(Error::NonFinite(_)) => Ok(None),
            Err(e) => Err(e),
        }
    };
    let armijo = |p: &Probe| p.value <= value + cfg.wolfe_c1 * p.step * slope0;
    let curvature = |p: &Probe| p.slope.abs() <= -cfg.wolfe_c2 * slope0;
    let accept = |p: Probe, evaluations: usize| {
        LineSearchResult::Accepted(LineSearchOutcome {
            step: p.step,
            x: p.x,
            value: p.value,
            gradient: p.gradient,
            evaluations,
        })
    };

    let origin = Probe { step: 0.0, value, slope: slope0, x: x.to_vec(), gradient: gradient.to_vec() };
    let mut prev = origin;
    let mut step = initial_step;
    let (mut lo, mut hi);
    loop {
        if evaluations >= cfg.max_linesearch_steps {
            return Ok(LineSearchResult::Failed { evaluations });
        }
        let Some(cur) = probe(step, &mut evaluations)? else {
            step = prev.step + 0.5 * (step - prev.step);
            continue;
        };
        if !armijo(&cur) || (prev.step > 0.0 && cur.value >= prev.value) {
            lo = prev;
            hi = cur;
            break;
        }
        if curvature(&cur) {
            return Ok(accept(cur, evaluations));
        }
        if cur.slope >= 0.0 {
            lo = cur;
            hi = prev;
            break;
        }
        step = 2.0 * cur.step;
        prev = cur;
    }

    // Zoom: `lo` satisfies Armijo with the lowest value seen, and
    // `slope(lo)·(hi − lo) < 0`.
    loop {
        if evaluations >= cfg.max_linesearch_steps {
            return Ok(LineSearchResult::Failed { evaluations });
        }
        let (a, b) = (lo.step, hi.step);
        let width = (b - a).abs();
        if width <= f64::EPSILON * a.abs().max(b.abs()).max(1e-300) {
            return Ok(LineSearchResult::Failed { evaluations });
        }
        let (low, high) = (a.min(b), a.max(b));
        let margin = 0.1 * width;
        let trial = cubic_minimizer(a, lo.value, lo.slope, b, hi.value, hi.slope)
            .filter(|t| *t > low + margin && *t < high - margin)
            .unwrap_or(0.5 * (a + b));
        let Some(cur) = probe(trial, &mut evaluations)? else {
            hi = Probe { step: trial, value: f64::INFINITY, slope: f64::NAN, x: Vec::new(), gradient: Vec::new() };
            continue;
        };
        if !armijo(&cur) || cur.value >= lo.value {
            hi = cur;
        } else {
            if curvature(&cur) {
                return Ok(accept(cur, evaluations));
            }
            if cur.slope * (hi.step - lo.step) >= 0.0 {
                hi = lo;
            }
            lo = cur;
        }
    }
}

/// Minimizes `objective` from `x0`, which returns the value and gradient.
pub fn lbfgs_minimize<F>(mut objective: F, x0: &[f64], cfg: &OptimizerConfig) -> Result<OptimizationRecord>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    cfg.validate()?;
    if x0.is_empty() {
        return Err(Error::EmptyInput("initial point".into()));
    }
    let start = Instant::now();
    let (mut value, mut grad) = objective(x0)?;
    if grad.len() != x0.len() {
        return Err(Error::DimensionMismatch { expected: x0.len(), found: grad.len() });
    }
    if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("objective at the initial point".into()));
    }
    let mut x = x0.to_vec();
    let mut evaluations = 1;
    let mut trace = vec![value];
    let mut memory = LbfgsMemory::new(cfg.memory);
    let mut iterations = 0;

    let status = loop {
        if value <= cfg.target_infidelity {
            break StopStatus::TargetReached;
        }
        if norm(&grad) <= cfg.gradient_tolerance {
            break StopStatus::Stalled;
        }
        if iterations >= cfg.max_iterations {
            break StopStatus::MaxIter;
        }
        let mut direction = memory.direction(&grad);
        let mut initial = if memory.is_empty() { (1.0 / norm(&grad)).min(1.0) } else { 1.0 };
        let mut outcome = strong_wolfe_search(&mut objective, &x, value, &grad, &direction, initial, cfg)?;
        if matches!(outcome, LineSearchResult::Failed { .. }) && !memory.is_empty() {
            if let LineSearchResult::Failed { evaluations: n } = outcome {
                evaluations += n;
            }
            memory.clear();
            direction = memory.direction(&grad);
            initial = (1.0 / norm(&grad)).min(1.0);
            outcome = strong_wolfe_search(&mut objective, &x, value, &grad, &direction, initial, cfg)?;
        }
        let step = match outcome {
            LineSearchResult::Failed { evaluations: n } => {
                evaluations += n;
                break StopStatus::Stalled;
            }
            LineSearchResult::Accepted(step) => step,
        };
        evaluations += step.evaluations;
        iterations += 1;
        let s: Vec<f64> = step.x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = step.gradient.iter().zip(&grad).map(|(a, b)| a - b).collect();
        memory.push(s, y);
        let change = (value - step.value).abs();
        x = step.x;
        value = step.value;
        grad = step.gradient;
        trace.push(value);
        if value > cfg.target_infidelity && change < cfg.min_objective_change {
            break StopStatus::Stalled;
        }
    };

    Ok(OptimizationRecord {
        final_infidelity: value,
        iterations,
        field_evaluations: evaluations,
        wall_time_seconds: start.elapsed().as_secs_f64(),
        trace,
        status,
        final_amplitudes: x,
        dt: None,
        exact_infidelity: None,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveSettings {
    /// `M = round(m_factor · D)` unless `slots` is given.
    pub m_factor: f64,
    pub slots: Option<usize>,
    pub dt: f64,
    pub gradient: GradientKind,
    pub backend: PropagatorBackend,
    pub rng_seed: u64,
    pub init_range: (f64, f64),
    /// Also report the exact infidelity of the final protocol.
    pub verify_exact: bool,
}

impl Default for SolveSettings {
    fn default() -> Self {
        Self {
            m_factor: 4.0,
            slots: None,
            dt: 0.5,
            gradient: GradientKind::Centered,
            backend: PropagatorBackend::krylov(10),
            rng_seed: 0,
            init_range: (-1.0, 1.0),
            verify_exact: false,
        }
    }
}

impl SolveSettings {
    pub fn slot_count(&self, dim: usize) -> Result<usize> {
        let m = match self.slots {
            Some(m) => m,
            None => {
                if !(self.m_factor.is_finite() && self.m_factor > 0.0) {
                    return Err(Error::InvalidArgument(format!("M factor must be positive, got {}", self.m_factor)));
                }
                (self.m_factor * dim as f64).round() as usize
            }
        };
        if m == 0 {
            return Err(Error::InvalidArgument("slot count rounds to zero".into()));
        }
        Ok(m)
    }

    /// Uniform draw in `init_range` from the seeded generator.
    pub fn initial_amplitudes(&self, slots: usize) -> Result<Vec<f64>> {
        let (lo, hi) = self.init_range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::InvalidArgument(format!("bad init range [{lo}, {hi}]")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.rng_seed);
        Ok((0..slots).map(|_| if lo == hi { lo } else { rng.gen_range(lo..hi) }).collect())
    }
}

/// Optimizes the state transfer from a random initial protocol.
pub fn solve_control(problem: &ControlProblem, settings: &SolveSettings, cfg: &OptimizerConfig) -> Result<OptimizationRecord> {
    let slots = settings.slot_count(problem.dim())?;
    let x0 = settings.initial_amplitudes(slots)?;
    solve_from(problem, settings, cfg, x0)
}

/// Optimizes the state transfer from the given amplitudes.
pub fn solve_from(
    problem: &ControlProblem,
    settings: &SolveSettings,
    cfg: &OptimizerConfig,
    x0: Vec<f64>,
) -> Result<OptimizationRecord> {
    PwcProtocol::new(x0.clone(), settings.dt)?;
    settings.backend.validate()?;
    let dt = settings.dt;
    let objective = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
        let protocol = PwcProtocol::new(x.to_vec(), dt)?;
        evaluate(problem, &protocol, &settings.backend, settings.gradient)
    };
    let mut record = lbfgs_minimize(objective, &x0, cfg)?;
    record.dt = Some(dt);
    if settings.verify_exact && problem.dim() <= EXACT_GRADIENT_CAP {
        let protocol = PwcProtocol::new(record.final_amplitudes.clone(), dt)?;
        record.exact_infidelity = Some(exact_infidelity(problem, &protocol)?);
    }
    Ok(record)
}

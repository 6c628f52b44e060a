//! Configuration-driven front end: TOML run configs, validation, task
//! execution with CSV/JSON artifacts, and parameter sweeps.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    self, ContinuationConfig, ContinuationStatus, HolderFitOptions, HolderIndices, MaxPrincipleReport,
};
use crate::error::{Error, Result};
use crate::fraccalc::{self, default_grading, make_graded_grid, TimeGrid, Trajectory};
use crate::mild::{
    self, Forcing, InitialGuess, Lipschitz, MildProblem, Nonlinearity, PerturbationSpec, PicardReport, SolverConfig,
};
use crate::operators::{make_diagonal, make_dirichlet_laplacian_1d, SpectralOperator, StateVector};
use crate::specfun::{self, FractionalOrder, SeriesTolerance};

/// Exit status of a validation failure.
pub const EXIT_VALIDATION: i32 = 2;
/// Exit status of a solver failure.
pub const EXIT_SOLVER: i32 = 3;
/// Exit status when blow-up can neither be confirmed nor excluded.
pub const EXIT_BLOWUP_AMBIGUOUS: i32 = 4;
/// Exit status of an I/O failure.
pub const EXIT_IO: i32 = 1;

/// Exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_VALIDATION,
        Error::BlowUpAmbiguous(_) => EXIT_BLOWUP_AMBIGUOUS,
        Error::Io(_) => EXIT_IO,
        _ => EXIT_SOLVER,
    }
}

/// Task executed by [`run`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Linear,
    Semilinear,
    IntegralInitial,
    Derivative,
    Blowup,
    Maxprinciple,
    SpecfunTable,
    HolderFit,
}

impl Task {
    pub fn is_solve(self) -> bool {
        matches!(self, Task::Linear | Task::Semilinear | Task::IntegralInitial | Task::Derivative)
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        f.write_str(&s)
    }
}

/// Operator block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OperatorSpec {
    Diagonal { eigenvalues: Vec<f64> },
    DirichletLaplacian { modes: usize, length: f64 },
}

impl OperatorSpec {
    pub fn build(&self) -> Result<SpectralOperator> {
        match self {
            OperatorSpec::Diagonal { eigenvalues } => make_diagonal(eigenvalues),
            OperatorSpec::DirichletLaplacian { modes, length } => make_dirichlet_laplacian_1d(*modes, *length),
        }
    }

    fn dim(&self) -> usize {
        match self {
            OperatorSpec::Diagonal { eigenvalues } => eigenvalues.len(),
            OperatorSpec::DirichletLaplacian { modes, .. } => *modes,
        }
    }
}

/// State given in the operator's basis or through physical samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StateSpec {
    #[default]
    Zero,
    Coefficients { values: Vec<f64> },
    /// `amplitude · e_mode`, modes counted from 1.
    Eigenvector { mode: usize, amplitude: f64 },
    /// Coefficients `amplitude · k^{−2q−1/2}`, so that `A^{q'}u` stays
    /// bounded for the Laplacian only when `q' < q`.
    PowerDecay { q: f64, amplitude: f64 },
    /// The same value at every sample point (every coefficient for the
    /// identity basis).
    Uniform { value: f64 },
    Samples { values: Vec<f64> },
}

impl StateSpec {
    pub fn build(&self, op: &SpectralOperator) -> Result<StateVector> {
        let d = op.dim();
        let v = match self {
            StateSpec::Zero => vec![0.0; d],
            StateSpec::Coefficients { values } => values.clone(),
            StateSpec::Eigenvector { mode, amplitude } => {
                if *mode == 0 || *mode > d {
                    return Err(Error::Config(format!("mode must lie in 1..={d}, got {mode}")));
                }
                let mut v = vec![0.0; d];
                v[mode - 1] = *amplitude;
                v
            }
            StateSpec::PowerDecay { q, amplitude } => {
                (1..=d).map(|k| amplitude * (k as f64).powf(-2.0 * q - 0.5)).collect()
            }
            StateSpec::Uniform { value } => return op.transform(&vec![*value; d]),
            StateSpec::Samples { values } => return op.transform(values),
        };
        op.check_dim(v.len())?;
        StateVector::new(v)
    }

    fn len_hint(&self) -> Option<usize> {
        match self {
            StateSpec::Coefficients { values } | StateSpec::Samples { values } => Some(values.len()),
            _ => None,
        }
    }
}

/// Forcing block: `f(t) = a + bt` with `a`, `b` given as states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ForcingSpec {
    #[serde(default = "zero_state")]
    pub constant: StateSpec,
    #[serde(default = "zero_state")]
    pub slope: StateSpec,
}

fn zero_state() -> StateSpec {
    StateSpec::Zero
}

impl ForcingSpec {
    pub fn build(&self, op: &SpectralOperator) -> Result<(Forcing, Vec<f64>)> {
        let a = self.constant.build(op)?;
        let b = self.slope.build(op)?;
        let mut samples = vec![0.0; op.dim()];
        op.to_samples(&a.0, &mut samples);
        Ok((Forcing::affine(a.0, b.0), samples))
    }
}

/// Problem block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub alpha: f64,
    pub operator: OperatorSpec,
    #[serde(default)]
    pub initial: StateSpec,
    #[serde(default)]
    pub forcing: ForcingSpec,
    #[serde(default = "zero_nonlinearity")]
    pub nonlinearity: Nonlinearity,
    /// `(I^{1−α}u)(0)` for the integral-initial task.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<StateSpec>,
    /// Truncation radius making a locally Lipschitz nonlinearity global.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation_radius: Option<f64>,
}

fn zero_nonlinearity() -> Nonlinearity {
    Nonlinearity::Zero
}

/// Solver block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverBlock {
    pub t_end: f64,
    pub nodes: usize,
    /// Grading exponent; defaults to `(2 − α)/α`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grading: Option<f64>,
    #[serde(default = "default_tol")]
    pub picard_tol: f64,
    #[serde(default = "default_iters")]
    pub max_picard_iters: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_weight: Option<f64>,
    #[serde(default = "default_budget")]
    pub growth_budget: f64,
    #[serde(default)]
    pub initial_guess: InitialGuess,
}

fn default_tol() -> f64 {
    1e-10
}

fn default_iters() -> usize {
    500
}

fn default_budget() -> f64 {
    1e4
}

/// Hölder diagnostics block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderBlock {
    pub r: f64,
    pub beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_max: Option<f64>,
    #[serde(default = "default_lags")]
    pub lags: usize,
}

fn default_lags() -> usize {
    24
}

impl HolderBlock {
    fn indices(&self, alpha: FractionalOrder) -> HolderIndices {
        HolderIndices { r: self.r, beta: self.beta, gamma: self.gamma, kappa: self.gamma.map(|g| alpha.value() - g) }
    }
}

/// Tabulation block of the specfun task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecfunBlock {
    pub t_max: f64,
    pub points: usize,
}

impl Default for SpecfunBlock {
    fn default() -> Self {
        Self { t_max: 5.0, points: 101 }
    }
}

/// Sampled Lipschitz check of the nonlinearity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzCheckBlock {
    pub radius: f64,
    pub samples: usize,
}

impl Default for LipschitzCheckBlock {
    fn default() -> Self {
        Self { radius: 2.0, samples: 256 }
    }
}

/// A complete run description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<Task>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub problem: ProblemConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub continuation: Option<ContinuationConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub holder: Option<HolderBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub specfun: Option<SpecfunBlock>,
    #[serde(default)]
    pub lipschitz_check: LipschitzCheckBlock,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Task after defaults: linear for `B = 0`, semilinear otherwise.
    pub fn effective_task(&self) -> Task {
        self.task.unwrap_or(if self.problem.nonlinearity == Nonlinearity::Zero { Task::Linear } else { Task::Semilinear })
    }

    /// The config with every default filled in.
    pub fn effective(&self) -> Self {
        let mut c = self.clone();
        c.task = Some(self.effective_task());
        if let Some(s) = c.solver.as_mut() {
            if s.grading.is_none() {
                if let Ok(a) = FractionalOrder::new(self.problem.alpha) {
                    s.grading = Some(default_grading(a));
                }
            }
        }
        match c.effective_task() {
            Task::Blowup if c.continuation.is_none() => c.continuation = Some(ContinuationConfig::new(10.0)),
            Task::SpecfunTable if c.specfun.is_none() => c.specfun = Some(SpecfunBlock::default()),
            _ => {}
        }
        c
    }
}

/// A failed validation check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    /// Dotted field path.
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

/// All violations of a config; empty iff the config is runnable.
pub fn validate(config: &RunConfig) -> Vec<Violation> {
    let mut v = Vec::new();
    let mut push = |path: &str, message: String| v.push(Violation { path: path.into(), message });
    let p = &config.problem;
    let task = config.effective_task();
    let alpha = FractionalOrder::new(p.alpha);
    if alpha.is_err() {
        push("problem.alpha", format!("0 < α < 1 required, got {}", p.alpha));
    }
    let op = match p.operator.build() {
        Ok(op) => Some(op),
        Err(e) => {
            push("problem.operator", e.to_string());
            None
        }
    };
    let d = p.operator.dim();
    let mut states = vec![("problem.initial", &p.initial), ("problem.forcing.constant", &p.forcing.constant), ("problem.forcing.slope", &p.forcing.slope)];
    if let Some(x0) = &p.x0 {
        states.push(("problem.x0", x0));
    }
    for (path, s) in states {
        if let Some(n) = s.len_hint() {
            if n != d {
                push(path, format!("expected {d} values, got {n}"));
                continue;
            }
        }
        if let Some(op) = &op {
            if let Err(e) = s.build(op) {
                push(path, e.to_string());
            }
        }
    }
    if let Err(e) = p.nonlinearity.validate() {
        push("problem.nonlinearity", e.to_string());
    }
    if let Some(m) = p.truncation_radius {
        if !(m > 0.0) {
            push("problem.truncation_radius", format!("must be positive, got {m}"));
        }
    }
    let local = matches!(
        p.nonlinearity,
        Nonlinearity::Quadratic { .. } | Nonlinearity::CubicDissipative { .. }
    );
    let needs_solver = !matches!(task, Task::Blowup | Task::SpecfunTable);
    match (&config.solver, needs_solver) {
        (None, true) => push("solver", format!("task {task} needs a [solver] block")),
        (Some(s), _) => {
            if !(s.t_end > 0.0) || !s.t_end.is_finite() {
                push("solver.t_end", format!("T > 0 required, got {}", s.t_end));
            }
            if s.nodes < 2 {
                push("solver.nodes", format!("N ≥ 2 required, got {}", s.nodes));
            }
            if let Some(g) = s.grading {
                if !(g >= 1.0) {
                    push("solver.grading", format!("g ≥ 1 required, got {g}"));
                }
            }
            if !(s.picard_tol > 0.0) {
                push("solver.picard_tol", format!("must be positive, got {}", s.picard_tol));
            }
            if s.max_picard_iters == 0 {
                push("solver.max_picard_iters", "must be at least 1".into());
            }
            if let Some(mu) = s.mu_weight {
                if !(mu > 0.0) {
                    push("solver.mu_weight", format!("must be positive, got {mu}"));
                }
            }
            if !(s.growth_budget > 1.0) {
                push("solver.growth_budget", format!("must exceed 1, got {}", s.growth_budget));
            }
        }
        _ => {}
    }
    match task {
        Task::Linear if p.nonlinearity != Nonlinearity::Zero => {
            push("problem.nonlinearity", "the linear task requires B = 0".into())
        }
        Task::Semilinear | Task::IntegralInitial | Task::Derivative | Task::Maxprinciple | Task::HolderFit
            if local && p.truncation_radius.is_none() =>
        {
            push(
                "problem.truncation_radius",
                format!("{} is only locally Lipschitz; set a truncation radius or use the blowup task", p.nonlinearity.name()),
            )
        }
        _ => {}
    }
    if task == Task::Derivative && p.truncation_radius.is_some() && local {
        push("problem.truncation_radius", "the derivative task needs a differentiable nonlinearity; truncation removes it".into());
    }
    if task == Task::IntegralInitial && p.x0.is_none() {
        push("problem.x0", "the integral-initial task needs x0".into());
    }
    if task == Task::Blowup {
        if let Some(c) = &config.continuation {
            if let Err(e) = c.validate() {
                push("continuation", e.to_string());
            }
        }
    }
    if task == Task::SpecfunTable {
        if let Some(s) = &config.specfun {
            if !(s.t_max > 0.0) || s.points < 2 {
                push("specfun", format!("t_max > 0 and points ≥ 2 required, got {} and {}", s.t_max, s.points));
            }
        }
    }
    if task == Task::HolderFit && config.holder.is_none() {
        push("holder", "the holder-fit task needs a [holder] block".into());
    }
    if let (Some(h), Ok(a)) = (&config.holder, alpha) {
        let idx = h.indices(a);
        let violations = if task == Task::IntegralInitial {
            idx.integral_initial_violations(a)
        } else {
            idx.semilinear_violations(a)
        };
        for m in violations {
            push("holder", m);
        }
    }
    if config.lipschitz_check.samples == 0 || !(config.lipschitz_check.radius > 0.0) {
        push("lipschitz_check", "samples ≥ 1 and radius > 0 required".into());
    }
    v
}

fn check(config: &RunConfig) -> Result<()> {
    let v = validate(config);
    if v.is_empty() {
        Ok(())
    } else {
        Err(Error::Config(v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")))
    }
}

/// Metadata written next to every run's artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub task: Task,
    pub alpha: f64,
    pub dim: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridInfo>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub picard: Option<PicardSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lipschitz_sample: Option<LipschitzSample>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extra: Option<serde_json::Value>,
    pub artifacts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridInfo {
    pub t_end: f64,
    pub nodes: usize,
    pub grading: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicardSummary {
    pub lipschitz: f64,
    pub windows: usize,
    pub mu: Vec<f64>,
    pub iterations: usize,
    pub max_ratio: f64,
    pub final_ratio: f64,
    pub max_discrete_factor: f64,
}

impl From<&PicardReport> for PicardSummary {
    fn from(r: &PicardReport) -> Self {
        let mut mu: Vec<f64> = r.windows.iter().map(|w| w.mu).collect();
        mu.dedup();
        Self {
            lipschitz: r.lipschitz,
            windows: r.windows.len(),
            mu,
            iterations: r.total_iterations,
            max_ratio: r.max_ratio,
            final_ratio: r.final_ratio,
            max_discrete_factor: r.windows.iter().map(|w| w.discrete_factor).fold(0.0, f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzSample {
    pub seed: u64,
    pub radius: f64,
    pub observed: f64,
    pub declared: f64,
}

/// Everything a run produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub metadata: RunMetadata,
    pub trajectory: Option<Trajectory>,
    pub continuation: Option<dynamics::ContinuationSummary>,
    pub max_principle: Option<MaxPrincipleReport>,
}

struct Built {
    op: SpectralOperator,
    alpha: FractionalOrder,
    u0: StateVector,
    forcing: Forcing,
    f_samples: Vec<f64>,
    perturbation: PerturbationSpec,
}

fn build(config: &RunConfig) -> Result<Built> {
    let p = &config.problem;
    let op = p.operator.build()?;
    let alpha = FractionalOrder::new(p.alpha)?;
    let u0 = p.initial.build(&op)?;
    let (forcing, f_samples) = p.forcing.build(&op)?;
    let mut perturbation = PerturbationSpec::from_registry(&p.nonlinearity, &op)?;
    if let (Some(m), Lipschitz::Local(_)) = (p.truncation_radius, &perturbation.lipschitz) {
        perturbation = dynamics::truncate_perturbation(&perturbation, m)?;
    }
    Ok(Built { op, alpha, u0, forcing, f_samples, perturbation })
}

fn solver_config(block: &SolverBlock, alpha: FractionalOrder) -> Result<SolverConfig> {
    let g = block.grading.unwrap_or_else(|| default_grading(alpha));
    let grid = make_graded_grid(block.t_end, block.nodes, g)?;
    Ok(SolverConfig {
        grid,
        picard_tol: block.picard_tol,
        max_picard_iters: block.max_picard_iters,
        mu_weight: block.mu_weight,
        growth_budget: block.growth_budget,
        initial_guess: block.initial_guess,
        instrument: false,
    })
}

fn grid_info(g: &TimeGrid) -> GridInfo {
    GridInfo { t_end: g.t_end(), nodes: g.n(), grading: g.grading() }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

/// Execute a validated config, writing artifacts into `out`.
pub fn run(config: &RunConfig, out: &Path, seed: u64) -> Result<RunOutcome> {
    let config = config.effective();
    check(&config)?;
    fs::create_dir_all(out)?;
    fs::write(out.join("effective_config.toml"), config.to_toml()?)?;
    let task = config.effective_task();
    let b = build(&config)?;
    let mut artifacts = vec!["effective_config.toml".to_string()];
    let mut meta = RunMetadata {
        task,
        alpha: b.alpha.value(),
        dim: b.op.dim(),
        grid: None,
        picard: None,
        lipschitz_sample: None,
        extra: None,
        artifacts: Vec::new(),
    };
    if config.problem.nonlinearity != Nonlinearity::Zero {
        let lc = &config.lipschitz_check;
        let (observed, declared) = mild::sample_lipschitz(&b.perturbation, lc.radius, lc.samples, seed);
        meta.lipschitz_sample = Some(LipschitzSample { seed, radius: lc.radius, observed, declared });
    }
    let mut outcome = RunOutcome { metadata: meta.clone(), trajectory: None, continuation: None, max_principle: None };
    let problem = || MildProblem::new(b.op.clone(), b.alpha, b.u0.clone(), b.forcing.clone(), b.perturbation.clone());
    match task {
        Task::Linear | Task::Semilinear | Task::Maxprinciple | Task::HolderFit => {
            let sc = solver_config(config.solver.as_ref().expect("validated"), b.alpha)?;
            let sol = if task == Task::Linear {
                mild::solve_linear(&problem()?, &sc)?
            } else {
                mild::solve_semilinear(&problem()?, &sc)?
            };
            meta.grid = Some(grid_info(&sc.grid));
            meta.picard = Some(PicardSummary::from(&sol.report));
            sol.trajectory.save_csv(&out.join("trajectory.csv"))?;
            artifacts.push("trajectory.csv".into());
            if task == Task::Maxprinciple {
                let u0s = b.op.inverse_transform(&b.u0)?;
                let report = dynamics::max_principle_check(&b.op, b.alpha, &sol.trajectory, &b.f_samples, &u0s)?;
                write_json(&out.join("maxprinciple.json"), &report)?;
                artifacts.push("maxprinciple.json".into());
                let samples = sample_trajectory(&b.op, &sol.trajectory)?;
                samples.save_csv(&out.join("samples.csv"))?;
                artifacts.push("samples.csv".into());
                outcome.max_principle = Some(report);
            }
            if task == Task::HolderFit {
                let h = config.holder.as_ref().expect("validated");
                let opts = HolderFitOptions { h_min: h.h_min, h_max: h.h_max, lags: h.lags, ..Default::default() };
                let report = dynamics::holder_fit(&sol.trajectory, h.indices(b.alpha), opts)?;
                write_json(&out.join("holder.json"), &report)?;
                artifacts.push("holder.json".into());
            }
            outcome.trajectory = Some(sol.trajectory);
        }
        Task::IntegralInitial => {
            let sc = solver_config(config.solver.as_ref().expect("validated"), b.alpha)?;
            let x0 = config.problem.x0.as_ref().expect("validated").build(&b.op)?;
            let sol = mild::solve_integral_initial(&b.op, b.alpha, &x0, &b.forcing, &b.perturbation, &sc)?;
            let integral = fraccalc::rl_fractional_integral(1.0 - b.alpha.value(), &sol.trajectory)?;
            let limit: Vec<f64> = (0..b.op.dim()).map(|k| fraccalc::extrapolate_to_origin(&integral, k)).collect();
            meta.grid = Some(grid_info(&sc.grid));
            meta.picard = Some(PicardSummary::from(&sol.report));
            meta.extra = Some(serde_json::json!({ "x0": x0.0, "integral_limit": limit }));
            sol.trajectory.save_csv(&out.join("trajectory.csv"))?;
            artifacts.push("trajectory.csv".into());
            outcome.trajectory = Some(sol.trajectory);
        }
        Task::Derivative => {
            let sc = solver_config(config.solver.as_ref().expect("validated"), b.alpha)?;
            let sol = mild::solve_time_derivative(&problem()?, &sc)?;
            meta.grid = Some(grid_info(&sc.grid));
            meta.picard = Some(PicardSummary::from(&sol.inner));
            meta.extra = Some(serde_json::json!({
                "x0": sol.x0.0,
                "outer_iterations": sol.outer_iterations,
                "outer_distances": sol.outer_distances,
            }));
            sol.u.save_csv(&out.join("trajectory.csv"))?;
            sol.w.save_csv(&out.join("derivative.csv"))?;
            artifacts.push("trajectory.csv".into());
            artifacts.push("derivative.csv".into());
            outcome.trajectory = Some(sol.u);
        }
        Task::Blowup => {
            let cc = config.continuation.clone().expect("effective config fills continuation");
            let mut p = problem()?;
            p.perturbation = PerturbationSpec::from_registry(&config.problem.nonlinearity, &b.op)?;
            let res = dynamics::continue_with_blowup(&p, &cc)?;
            let summary = res.summary();
            write_json(&out.join("continuation.json"), &summary)?;
            res.trajectory.save_csv(&out.join("trajectory.csv"))?;
            artifacts.push("continuation.json".into());
            artifacts.push("trajectory.csv".into());
            meta.grid = Some(grid_info(res.trajectory.grid()));
            outcome.continuation = Some(summary);
            outcome.trajectory = Some(res.trajectory);
        }
        Task::SpecfunTable => {
            let s = config.specfun.clone().expect("effective config fills specfun");
            let path = out.join("specfun.csv");
            fs::write(&path, specfun_table(b.alpha, &s)?)?;
            artifacts.push("specfun.csv".into());
        }
    }
    meta.artifacts = artifacts;
    write_json(&out.join("metadata.json"), &meta)?;
    outcome.metadata = meta;
    Ok(outcome)
}

/// Physical samples of a coefficient trajectory.
pub fn sample_trajectory(op: &SpectralOperator, u: &Trajectory) -> Result<Trajectory> {
    let d = op.dim();
    let mut flat = vec![0.0; u.len() * d];
    for i in 0..u.len() {
        op.to_samples(u.value(i), &mut flat[i * d..(i + 1) * d]);
    }
    Trajectory::from_flat(u.grid().clone(), d, flat, u.origin())
}

/// CSV of `E_α(−t^α)`, `h_α(t)` and the positive-argument series
/// `E_{1,α}(t)` with its bound on `t ∈ [0, t_max]`.
pub fn specfun_table(alpha: FractionalOrder, s: &SpecfunBlock) -> Result<String> {
    let a = alpha.value();
    let e = specfun::MittagLefflerNeg::new(a, 1.0)?;
    let tol = SeriesTolerance::default();
    let params = specfun::MittagLefflerParams::new(1.0, a)?;
    let mut out = String::from("t,ml_neg,wright_density,ml_pos,ml_bound\n");
    for i in 0..s.points {
        let t = s.t_max * i as f64 / (s.points - 1) as f64;
        let h = if t > 0.0 { specfun::wright_density(alpha, t, tol)? } else { specfun::rgamma(1.0 - a) };
        let m = specfun::mittag_leffler(params, t, tol)?;
        let bound = specfun::mittag_leffler_bound(params, t)?;
        out.push_str(&format!("{t:e},{:e},{h:e},{m:e},{bound:e}\n", e.eval(t.powf(a))));
    }
    Ok(out)
}

/// Replace the value at a dotted path of a TOML document.
pub fn set_path(doc: &mut toml::Value, path: &str, value: toml::Value) -> Result<()> {
    let mut cur = doc;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, key) in parts.iter().enumerate() {
        let table = cur.as_table_mut().ok_or_else(|| Error::Config(format!("{path}: '{key}' is not inside a table")))?;
        if i + 1 == parts.len() {
            table.insert(key.to_string(), value);
            return Ok(());
        }
        cur = table
            .entry(key.to_string())
            .or_insert_with(|| toml::Value::Table(Default::default()));
    }
    Err(Error::Config(format!("empty sweep path '{path}'")))
}

/// Sweep `path=start:end:count` (inclusive, evenly spaced) or
/// `path=v1,v2,...`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub path: String,
    pub values: Vec<toml::Value>,
}

impl Sweep {
    pub fn parse(spec: &str) -> Result<Self> {
        let (path, range) = spec.split_once('=').ok_or_else(|| Error::Config(format!("sweep '{spec}' needs the form path=range")))?;
        let num = |s: &str| -> Result<toml::Value> {
            let s = s.trim();
            if let Ok(i) = s.parse::<i64>() {
                return Ok(toml::Value::Integer(i));
            }
            s.parse::<f64>().map(toml::Value::Float).map_err(|_| Error::Config(format!("sweep value '{s}' is not a number")))
        };
        let values = if range.contains(':') {
            let p: Vec<&str> = range.split(':').collect();
            if p.len() != 3 {
                return Err(Error::Config(format!("sweep range '{range}' needs start:end:count")));
            }
            let start: f64 = p[0].trim().parse().map_err(|_| Error::Config(format!("bad sweep start '{}'", p[0])))?;
            let end: f64 = p[1].trim().parse().map_err(|_| Error::Config(format!("bad sweep end '{}'", p[1])))?;
            let count: usize = p[2].trim().parse().map_err(|_| Error::Config(format!("bad sweep count '{}'", p[2])))?;
            if count < 1 {
                return Err(Error::Config("sweep count must be at least 1".into()));
            }
            (0..count)
                .map(|i| {
                    let v = if count == 1 { start } else { start + (end - start) * i as f64 / (count - 1) as f64 };
                    toml::Value::Float(v)
                })
                .collect()
        } else {
            range.split(',').map(num).collect::<Result<Vec<_>>>()?
        };
        Ok(Self { path: path.trim().to_string(), values })
    }
}

/// One sweep member's result.
#[derive(Debug, Clone, Serialize)]
pub struct SweepEntry {
    pub index: usize,
    pub value: String,
    pub output: PathBuf,
    pub exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Run every member of a sweep concurrently, each into `out/sweep_NNN`.
pub fn run_sweep(base: &str, sweep: &Sweep, out: &Path, seed: u64, task: Option<Task>) -> Result<Vec<SweepEntry>> {
    let doc: toml::Value = toml::from_str(base).map_err(|e| Error::Config(e.to_string()))?;
    fs::create_dir_all(out)?;
    let entries: Vec<SweepEntry> = sweep
        .values
        .par_iter()
        .enumerate()
        .map(|(i, v)| {
            let dir = out.join(format!("sweep_{i:03}"));
            let result = (|| {
                let mut d = doc.clone();
                set_path(&mut d, &sweep.path, v.clone())?;
                let mut cfg: RunConfig = d.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
                if let Some(t) = task {
                    cfg.task = Some(t);
                }
                run(&cfg, &dir, seed)
            })();
            SweepEntry {
                index: i,
                value: v.to_string(),
                output: dir,
                exit_code: result.as_ref().map_or_else(exit_code, |_| 0),
                error: result.err().map(|e| e.to_string()),
            }
        })
        .collect();
    write_json(&out.join("sweep.json"), &entries)?;
    Ok(entries)
}

/// Did a blow-up run end in detected blow-up?
pub fn blew_up(o: &RunOutcome) -> bool {
    matches!(o.continuation.as_ref().map(|c| &c.status), Some(ContinuationStatus::BlowUpDetected { .. }))
}

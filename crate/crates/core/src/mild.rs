//! Subordination solution operators and solvers for
//! `D_t^α(u − u₀) + Au + B(t, u) = f(t)`.
//!
//! All solution operators act per mode through Mittag-Leffler functions:
//!
//! * `Φ(t)x`: `E_α(−λ_k t^α) x_k`
//! * `S₁(g)(t)`: `∫₀^t (t−τ)^{α−1} E_{α,α}(−λ_k (t−τ)^α) g_k(τ) dτ`
//!
//! Nonlinear problems are solved by Picard iteration of the fixed-point map
//! `u = Φ(·)u₀ + S₁(f − B(u))`, restarted over consecutive time windows. In
//! each window the weight `μ` of the norm `sup e^{−μ(t−t_s)}‖u(t)‖` is chosen
//! so that the map contracts with factor at most 1/2.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fraccalc::{Origin, TimeGrid, Trajectory};
use crate::operators::{dist, norm, Basis, SpectralOperator, StateVector};
use crate::quad;
use crate::specfun::{self, FractionalOrder, MittagLefflerFamily, SeriesTolerance};
use crate::weights::{FirstInterval, KernelWeights, ModeKernels, Times};

type EvalFn = dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync;
type JvpFn = dyn Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync;
type RadiusFn = dyn Fn(f64) -> f64 + Send + Sync;
type ForcingFn = dyn Fn(f64, &mut [f64]) + Send + Sync;

/// Lipschitz data of a perturbation.
#[derive(Clone)]
pub enum Lipschitz {
    /// `‖B(u) − B(v)‖ ≤ L‖u − v‖` everywhere.
    Global(f64),
    /// `‖B(u) − B(v)‖ ≤ L(ρ)‖u − v‖` for `‖u‖, ‖v‖ ≤ ρ`, `L` nondecreasing.
    Local(Arc<RadiusFn>),
}

impl Lipschitz {
    /// Constant valid on the ball of radius `rho`.
    pub fn on_ball(&self, rho: f64) -> f64 {
        match self {
            Lipschitz::Global(l) => *l,
            Lipschitz::Local(f) => f(rho),
        }
    }

    pub fn is_global(&self) -> bool {
        matches!(self, Lipschitz::Global(_))
    }
}

impl fmt::Debug for Lipschitz {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Lipschitz::Global(l) => write!(f, "Global({l})"),
            Lipschitz::Local(_) => write!(f, "Local(..)"),
        }
    }
}

/// Fréchet derivative `B′(u)` given as a Jacobian-vector product, with a
/// bound on `‖B′(u)‖` and the Lipschitz constant of `u ↦ B′(u)`.
#[derive(Clone)]
pub struct DerivativeSpec {
    pub jvp: Arc<JvpFn>,
    pub bound: Lipschitz,
    pub lipschitz: Lipschitz,
}

/// Nonlinearity `B(t, u)` acting on coefficient vectors.
#[derive(Clone)]
pub struct PerturbationSpec {
    pub name: String,
    pub dim: usize,
    pub eval: Arc<EvalFn>,
    pub lipschitz: Lipschitz,
    pub derivative: Option<DerivativeSpec>,
}

impl fmt::Debug for PerturbationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PerturbationSpec")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("lipschitz", &self.lipschitz)
            .field("differentiable", &self.derivative.is_some())
            .finish()
    }
}

impl PerturbationSpec {
    pub fn zero(dim: usize) -> Self {
        Self {
            name: "zero".into(),
            dim,
            eval: Arc::new(|_, _, out| out.fill(0.0)),
            lipschitz: Lipschitz::Global(0.0),
            derivative: Some(DerivativeSpec {
                jvp: Arc::new(|_, _, _, out| out.fill(0.0)),
                bound: Lipschitz::Global(0.0),
                lipschitz: Lipschitz::Global(0.0),
            }),
        }
    }

    /// Perturbation from a named registry entry.
    pub fn from_registry(kind: &Nonlinearity, op: &SpectralOperator) -> Result<Self> {
        kind.validate()?;
        if let Nonlinearity::Zero = kind {
            return Ok(Self::zero(op.dim()));
        }
        Ok(pointwise(kind.clone(), op))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.lipschitz, Lipschitz::Global(l) if l == 0.0) && self.name == "zero"
    }

    pub fn apply(&self, t: f64, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        (self.eval)(t, u, &mut out);
        out
    }
}

/// Registry of pointwise nonlinearities `b(u)`, entering the equation as
/// `+B(u)` on the left-hand side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Nonlinearity {
    Zero,
    /// `b(u) = c·u`
    Linear { coefficient: f64 },
    /// `b(u) = c·u²`; `c < 0` feeds growth.
    Quadratic { coefficient: f64 },
    /// `b(u) = c·u³` with `c > 0`.
    CubicDissipative { coefficient: f64 },
    /// `b(u) = −c·e^{−1/u}` for `u > 0`, zero otherwise: a heat source.
    Combustion { coefficient: f64 },
}

impl Nonlinearity {
    pub fn name(&self) -> &'static str {
        match self {
            Nonlinearity::Zero => "zero",
            Nonlinearity::Linear { .. } => "linear",
            Nonlinearity::Quadratic { .. } => "quadratic",
            Nonlinearity::CubicDissipative { .. } => "cubic-dissipative",
            Nonlinearity::Combustion { .. } => "combustion",
        }
    }

    fn coefficient(&self) -> f64 {
        match self {
            Nonlinearity::Zero => 0.0,
            Nonlinearity::Linear { coefficient }
            | Nonlinearity::Quadratic { coefficient }
            | Nonlinearity::CubicDissipative { coefficient }
            | Nonlinearity::Combustion { coefficient } => *coefficient,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.coefficient();
        if !c.is_finite() {
            return Err(Error::Config(format!("{} coefficient must be finite", self.name())));
        }
        match self {
            Nonlinearity::CubicDissipative { coefficient } if *coefficient <= 0.0 => {
                Err(Error::Config("cubic-dissipative coefficient must be positive".into()))
            }
            Nonlinearity::Combustion { coefficient } if *coefficient < 0.0 => {
                Err(Error::Config("combustion coefficient must be nonnegative".into()))
            }
            _ => Ok(()),
        }
    }

    fn scalar(&self, u: f64) -> f64 {
        let c = self.coefficient();
        match self {
            Nonlinearity::Zero => 0.0,
            Nonlinearity::Linear { .. } => c * u,
            Nonlinearity::Quadratic { .. } => c * u * u,
            Nonlinearity::CubicDissipative { .. } => c * u * u * u,
            Nonlinearity::Combustion { .. } => {
                if u > 0.0 {
                    -c * (-1.0 / u).exp()
                } else {
                    0.0
                }
            }
        }
    }

    fn scalar_derivative(&self, u: f64) -> f64 {
        let c = self.coefficient();
        match self {
            Nonlinearity::Zero => 0.0,
            Nonlinearity::Linear { .. } => c,
            Nonlinearity::Quadratic { .. } => 2.0 * c * u,
            Nonlinearity::CubicDissipative { .. } => 3.0 * c * u * u,
            Nonlinearity::Combustion { .. } => {
                if u > 0.0 {
                    -c * (-1.0 / u).exp() / (u * u)
                } else {
                    0.0
                }
            }
        }
    }
}

/// `max_{u>0} e^{−1/u}/u² = 4e^{−2}`.
const COMBUSTION_SLOPE: f64 = 0.541_341_132_946_450_9;

/// `max_{u>0} |d²/du² e^{−1/u}| = max |e^{−1/u}(1 − 2u)/u⁴|`.
fn combustion_curvature() -> f64 {
    let f = |u: f64| ((-1.0 / u).exp() * (1.0 - 2.0 * u) / u.powi(4)).abs();
    // the maximum sits at the root u = (3 − √3)/6 of the third derivative
    f((3.0 - 3f64.sqrt()) / 6.0)
}

fn pointwise(kind: Nonlinearity, op: &SpectralOperator) -> PerturbationSpec {
    let c = kind.coefficient().abs();
    let scale = op.sup_scale();
    let dim = op.dim();
    let lipschitz = match kind {
        Nonlinearity::Zero => Lipschitz::Global(0.0),
        Nonlinearity::Linear { .. } => Lipschitz::Global(c),
        Nonlinearity::Quadratic { .. } => Lipschitz::Local(Arc::new(move |r| 2.0 * c * scale * r)),
        Nonlinearity::CubicDissipative { .. } => Lipschitz::Local(Arc::new(move |r| 3.0 * c * (scale * r).powi(2))),
        Nonlinearity::Combustion { .. } => Lipschitz::Global(c * COMBUSTION_SLOPE),
    };
    let (bound, dlip) = match kind {
        Nonlinearity::Zero => (Lipschitz::Global(0.0), Lipschitz::Global(0.0)),
        Nonlinearity::Linear { .. } => (Lipschitz::Global(c), Lipschitz::Global(0.0)),
        Nonlinearity::Quadratic { .. } => (lipschitz.clone(), Lipschitz::Global(2.0 * c * scale)),
        Nonlinearity::CubicDissipative { .. } => (
            lipschitz.clone(),
            Lipschitz::Local(Arc::new(move |r| 6.0 * c * scale * scale * r)),
        ),
        Nonlinearity::Combustion { .. } => {
            (Lipschitz::Global(c * COMBUSTION_SLOPE), Lipschitz::Global(c * combustion_curvature() * scale))
        }
    };
    let identity = matches!(op.basis(), Basis::Identity);
    let op_eval = op.clone();
    let kind_eval = kind.clone();
    let eval: Arc<EvalFn> = Arc::new(move |_t, u, out| {
        if identity {
            for (o, x) in out.iter_mut().zip(u) {
                *o = kind_eval.scalar(*x);
            }
        } else {
            let mut s = vec![0.0; u.len()];
            op_eval.to_samples(u, &mut s);
            for x in s.iter_mut() {
                *x = kind_eval.scalar(*x);
            }
            op_eval.from_samples(&s, out);
        }
    });
    let op_jvp = op.clone();
    let kind_jvp = kind.clone();
    let jvp: Arc<JvpFn> = Arc::new(move |_t, u, v, out| {
        if identity {
            for ((o, x), y) in out.iter_mut().zip(u).zip(v) {
                *o = kind_jvp.scalar_derivative(*x) * y;
            }
        } else {
            let n = u.len();
            let (mut su, mut sv) = (vec![0.0; n], vec![0.0; n]);
            op_jvp.to_samples(u, &mut su);
            op_jvp.to_samples(v, &mut sv);
            for (a, b) in su.iter_mut().zip(&sv) {
                *a = kind_jvp.scalar_derivative(*a) * b;
            }
            op_jvp.from_samples(&su, out);
        }
    });
    PerturbationSpec {
        name: kind.name().into(),
        dim,
        eval,
        lipschitz,
        derivative: Some(DerivativeSpec { jvp, bound, lipschitz: dlip }),
    }
}

/// Forcing `f(t)` with optional derivative `f′(t)`.
#[derive(Clone)]
pub struct Forcing {
    dim: usize,
    eval: Arc<ForcingFn>,
    derivative: Option<Arc<ForcingFn>>,
}

impl fmt::Debug for Forcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Forcing").field("dim", &self.dim).field("differentiable", &self.derivative.is_some()).finish()
    }
}

impl Forcing {
    pub fn new(dim: usize, f: impl Fn(f64, &mut [f64]) + Send + Sync + 'static) -> Self {
        Self { dim, eval: Arc::new(f), derivative: None }
    }

    pub fn with_derivative(mut self, df: impl Fn(f64, &mut [f64]) + Send + Sync + 'static) -> Self {
        self.derivative = Some(Arc::new(df));
        self
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(dim, |_, out| out.fill(0.0)).with_derivative(|_, out| out.fill(0.0))
    }

    pub fn constant(v: Vec<f64>) -> Self {
        let dim = v.len();
        Self::new(dim, move |_, out| out.copy_from_slice(&v)).with_derivative(|_, out| out.fill(0.0))
    }

    /// `f(t) = a + bt`.
    pub fn affine(a: Vec<f64>, b: Vec<f64>) -> Self {
        let dim = a.len();
        let b2 = b.clone();
        Self::new(dim, move |t, out| {
            for ((o, x), y) in out.iter_mut().zip(&a).zip(&b) {
                *o = x + y * t;
            }
        })
        .with_derivative(move |_, out| out.copy_from_slice(&b2))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        (self.eval)(t, out)
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        (self.eval)(t, &mut v);
        v
    }

    pub fn derivative(&self) -> Option<&Arc<ForcingFn>> {
        self.derivative.as_ref()
    }
}

/// The Cauchy problem `D_t^α(u − u₀) + Au + B(t, u) = f(t)`.
#[derive(Debug, Clone)]
pub struct MildProblem {
    pub op: SpectralOperator,
    pub alpha: FractionalOrder,
    pub u0: StateVector,
    pub forcing: Forcing,
    pub perturbation: PerturbationSpec,
}

impl MildProblem {
    pub fn new(
        op: SpectralOperator,
        alpha: FractionalOrder,
        u0: StateVector,
        forcing: Forcing,
        perturbation: PerturbationSpec,
    ) -> Result<Self> {
        let d = op.dim();
        for got in [u0.dim(), forcing.dim(), perturbation.dim] {
            if got != d {
                return Err(Error::Dimension { expected: d, got });
            }
        }
        if u0.0.iter().any(|x| !x.is_finite()) {
            return Err(Error::domain("initial state must be finite"));
        }
        Ok(Self { op, alpha, u0, forcing, perturbation })
    }

    /// Problem with `B = 0`.
    pub fn linear(op: SpectralOperator, alpha: FractionalOrder, u0: StateVector, forcing: Forcing) -> Result<Self> {
        let d = op.dim();
        Self::new(op, alpha, u0, forcing, PerturbationSpec::zero(d))
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }
}

/// Initial Picard iterate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InitialGuess {
    /// `u(t) ≡ u₀` (the last accepted value in later windows).
    #[default]
    Constant,
    /// `u ≡ 0`.
    Zero,
}

/// Solver settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub grid: TimeGrid,
    pub picard_tol: f64,
    pub max_picard_iters: usize,
    /// Weight `μ` of the window norm; `None` selects it automatically.
    pub mu_weight: Option<f64>,
    /// Upper bound on `e^{μH}` over a window of length `H`.
    pub growth_budget: f64,
    pub initial_guess: InitialGuess,
    /// Record the per-node Picard increments for the Volterra bound check.
    pub instrument: bool,
}

impl SolverConfig {
    pub fn new(grid: TimeGrid) -> Self {
        Self {
            grid,
            picard_tol: 1e-10,
            max_picard_iters: 500,
            mu_weight: None,
            growth_budget: 1e4,
            initial_guess: InitialGuess::Constant,
            instrument: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.picard_tol > 0.0) {
            return Err(Error::Config(format!("picard_tol must be positive, got {}", self.picard_tol)));
        }
        if self.max_picard_iters == 0 {
            return Err(Error::Config("max_picard_iters must be at least 1".into()));
        }
        if let Some(mu) = self.mu_weight {
            if !(mu > 0.0) {
                return Err(Error::Config(format!("mu_weight must be positive, got {mu}")));
            }
        }
        if !(self.growth_budget > 1.0) {
            return Err(Error::Config(format!("growth_budget must exceed 1, got {}", self.growth_budget)));
        }
        Ok(())
    }
}

/// Per-window Picard record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowReport {
    /// First and last node solved in this window.
    pub first: usize,
    pub last: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub mu: f64,
    /// `A_μ(H)·L/Γ(α)` for the window length `H`.
    pub continuous_factor: f64,
    /// `L·max_i Σ_j max_k |w^k_ij| e^{−μ(t_i − t_j)}` over the window.
    pub discrete_factor: f64,
    pub iterations: usize,
    /// Ratios of successive weighted distances above the round-off floor.
    pub ratios: Vec<f64>,
    pub final_distance: f64,
}

/// Accumulated Picard increments `W(t_i) = Σ_k ‖u^{k+1}(t_i) − u^k(t_i)‖` of
/// one window, on window-local time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolterraTrace {
    pub window: usize,
    /// Local times, starting with 0 at the node preceding the window.
    pub local_times: Vec<f64>,
    pub accumulated: Vec<f64>,
    /// `sup_i ‖u¹(t_i) − u⁰(t_i)‖`.
    pub first_increment: f64,
}

/// Summary of a Picard solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct PicardReport {
    pub lipschitz: f64,
    pub windows: Vec<WindowReport>,
    pub total_iterations: usize,
    pub max_ratio: f64,
    pub final_ratio: f64,
    pub traces: Vec<VolterraTrace>,
}

impl PicardReport {
    fn push(&mut self, w: WindowReport, trace: Option<VolterraTrace>) {
        self.total_iterations += w.iterations;
        for r in &w.ratios {
            self.max_ratio = self.max_ratio.max(*r);
        }
        if let Some(r) = w.ratios.last() {
            self.final_ratio = *r;
        }
        self.windows.push(w);
        if let Some(t) = trace {
            self.traces.push(t);
        }
    }

    /// Largest `μ` used over all windows.
    pub fn max_mu(&self) -> f64 {
        self.windows.iter().map(|w| w.mu).fold(0.0, f64::max)
    }
}

/// Trajectory with its Picard report.
#[derive(Debug, Clone)]
pub struct Solution {
    pub trajectory: Trajectory,
    pub report: PicardReport,
}

/// `A_μ(H) = ∫₀^H e^{−μτ} τ^{α−1} dτ`, by quadrature after `τ = v^{1/α}`.
pub fn a_mu(mu: f64, h: f64, alpha: f64) -> f64 {
    let p = 1.0 / alpha;
    let top = h.powf(alpha);
    let r = quad::integrate(|v| (-mu * v.powf(p)).exp(), 0.0, top, 1e-300, 1e-10, 200);
    r.value / alpha
}

/// Contraction factor `A_μ(H)·L·α/Γ(1+α)` of the fixed-point map over a
/// window of length `H`.
pub fn contraction_factor(mu: f64, h: f64, lipschitz: f64, alpha: f64) -> f64 {
    a_mu(mu, h, alpha) * lipschitz * specfun::rgamma(alpha)
}

/// Smallest `μ ∈ {1, 2, 4, …}` with contraction factor at most 1/2.
pub fn auto_mu(h: f64, lipschitz: f64, alpha: f64) -> f64 {
    let mut mu = 1.0;
    for _ in 0..200 {
        if contraction_factor(mu, h, lipschitz, alpha) <= 0.5 {
            return mu;
        }
        mu *= 2.0;
    }
    mu
}

/// Longest window length `H` whose automatically chosen `μ` satisfies
/// `μH ≤ ln(growth_budget)`; depends only on `L`, `α` and the budget.
pub fn admitted_window_length(lipschitz: f64, alpha: f64, growth_budget: f64) -> f64 {
    if lipschitz <= 0.0 {
        return f64::INFINITY;
    }
    let cap = growth_budget.ln();
    let ok = |h: f64| auto_mu(h, lipschitz, alpha) * h <= cap;
    let (mut lo, mut hi) = (0.0, cap);
    if ok(hi) {
        return hi;
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

pub(crate) struct Engine<'a> {
    pub alpha: f64,
    pub dim: usize,
    pub lipschitz: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub mu_fixed: Option<f64>,
    pub growth_budget: f64,
    pub guess: InitialGuess,
    pub instrument: bool,
    /// `g(i, t_i, u_i) → out`
    pub g: &'a (dyn Fn(usize, f64, &[f64], &mut [f64]) + Sync),
}

/// Window solution: values and `g` values for nodes `first..=last`.
pub(crate) struct WindowOutcome {
    pub values: Vec<f64>,
    pub gvals: Vec<f64>,
    pub report: WindowReport,
    pub trace: Option<VolterraTrace>,
}

impl Engine<'_> {
    /// `μ` for a window of length `h`, and whether the window is admissible.
    pub fn window_mu(&self, h: f64) -> (f64, bool) {
        if self.lipschitz <= 0.0 {
            return (self.mu_fixed.unwrap_or(1.0), true);
        }
        let cap = self.growth_budget.ln();
        match self.mu_fixed {
            Some(mu) => (mu, contraction_factor(mu, h, self.lipschitz, self.alpha) <= 0.5 && mu * h <= cap),
            None => {
                let mu = auto_mu(h, self.lipschitz, self.alpha);
                (mu, mu * h <= cap)
            }
        }
    }

    /// Discrete contraction factor of the window `first..=last`.
    pub fn discrete_factor(&self, times: &Times, rows: &[std::borrow::Cow<'_, [f64]>], first: usize, last: usize, mu: f64) -> f64 {
        let d = self.dim;
        let mut q: f64 = 0.0;
        for i in first..=last {
            let row = &rows[i - first];
            let n = i + 1;
            let mut s = 0.0;
            for j in first..=i {
                let w = (0..d).map(|k| row[k * n + j].abs()).fold(0.0, f64::max);
                s += w * (-mu * times.diff(i, j)).exp();
            }
            q = q.max(s);
        }
        q * self.lipschitz
    }

    /// Picard iteration over nodes `first..=last` with all earlier nodes fixed.
    ///
    /// `base(i)` is the free term at node `i`, `prev` holds values for nodes
    /// `0..first` and `gprev` the corresponding `g` values.
    #[allow(clippy::too_many_arguments)]
    pub fn solve_window(
        &self,
        times: &Times,
        rows: &[std::borrow::Cow<'_, [f64]>],
        first: usize,
        last: usize,
        base: &[f64],
        prev_value: &[f64],
        gprev: &[f64],
        mu: f64,
        window_index: usize,
    ) -> Result<WindowOutcome> {
        let d = self.dim;
        let m = last - first + 1;
        let t_start = times.get(first - 1);
        // history part: base + contributions of fixed nodes
        let mut hist = base.to_vec();
        for i in first..=last {
            let row = &rows[i - first];
            let n = i + 1;
            let h = &mut hist[(i - first) * d..(i - first + 1) * d];
            for j in 0..first {
                let gj = &gprev[j * d..(j + 1) * d];
                for k in 0..d {
                    h[k] += row[k * n + j] * gj[k];
                }
            }
        }
        let mut u = match self.guess {
            InitialGuess::Constant => {
                if prev_value.iter().all(|x| x.is_finite()) {
                    prev_value.repeat(m)
                } else {
                    hist.clone()
                }
            }
            InitialGuess::Zero => vec![0.0; m * d],
        };
        let mut g = vec![0.0; m * d];
        let mut next = vec![0.0; m * d];
        let decay: Vec<f64> = (first..=last).map(|i| (-mu * times.diff(i, first - 1)).exp()).collect();
        let mut ratios = Vec::new();
        let mut prev_weighted = f64::NAN;
        let mut acc = if self.instrument { Some(vec![0.0; m]) } else { None };
        let mut first_increment = 0.0;
        for iter in 1..=self.max_iters {
            for (r, i) in (first..=last).enumerate() {
                (self.g)(i, times.get(i), &u[r * d..(r + 1) * d], &mut g[r * d..(r + 1) * d]);
            }
            for (r, i) in (first..=last).enumerate() {
                let row = &rows[r];
                let n = i + 1;
                let out = &mut next[r * d..(r + 1) * d];
                out.copy_from_slice(&hist[r * d..(r + 1) * d]);
                for (c, j) in (first..=i).enumerate() {
                    let gj = &g[c * d..(c + 1) * d];
                    for k in 0..d {
                        out[k] += row[k * n + j] * gj[k];
                    }
                }
            }
            if next.iter().any(|x| !x.is_finite()) {
                let bad = next.iter().position(|x| !x.is_finite()).unwrap_or(0) / d;
                return Err(Error::NonFinite { t: times.get(first + bad) });
            }
            let mut weighted: f64 = 0.0;
            let mut plain: f64 = 0.0;
            let mut scale: f64 = 1.0;
            for r in 0..m {
                let dr = dist(&next[r * d..(r + 1) * d], &u[r * d..(r + 1) * d]);
                if let Some(a) = acc.as_mut() {
                    a[r] += dr;
                }
                if iter == 1 {
                    first_increment = f64::max(first_increment, dr);
                }
                plain = plain.max(dr);
                weighted = weighted.max(decay[r] * dr);
                scale = scale.max(norm(&next[r * d..(r + 1) * d]));
            }
            std::mem::swap(&mut u, &mut next);
            let floor = 1e-13 * scale;
            if iter > 1 && prev_weighted > floor && weighted > floor {
                ratios.push(weighted / prev_weighted);
            }
            prev_weighted = weighted;
            if plain <= self.tol * scale {
                // refresh g at the converged values
                for (r, i) in (first..=last).enumerate() {
                    (self.g)(i, times.get(i), &u[r * d..(r + 1) * d], &mut g[r * d..(r + 1) * d]);
                }
                let trace = acc.map(|a| VolterraTrace {
                    window: window_index,
                    local_times: std::iter::once(0.0).chain((first..=last).map(|i| times.diff(i, first - 1))).collect(),
                    accumulated: std::iter::once(0.0).chain(a).collect(),
                    first_increment,
                });
                let h = times.diff(last, first - 1);
                let report = WindowReport {
                    first,
                    last,
                    t_start,
                    t_end: times.get(last),
                    mu,
                    continuous_factor: contraction_factor(mu, h, self.lipschitz, self.alpha),
                    discrete_factor: self.discrete_factor(times, rows, first, last, mu),
                    iterations: iter,
                    ratios,
                    final_distance: plain,
                };
                return Ok(WindowOutcome { values: u, gvals: g, report, trace });
            }
        }
        Err(Error::PicardDivergence { iterations: self.max_iters, distance: prev_weighted })
    }

    /// Choose the window `first..=last` on a fixed grid and return it with its
    /// weight rows.
    pub fn plan_window<'w>(&self, weights: &'w KernelWeights, first: usize) -> Result<(usize, f64, Vec<std::borrow::Cow<'w, [f64]>>)> {
        let times = &weights.times;
        let n_last = times.len() - 1;
        let d = self.dim;
        // memory cap on uncached rows
        let per_row = times.len() * d;
        let max_rows = if weights.is_cached() { usize::MAX } else { (crate::weights::WEIGHT_BUDGET / per_row).max(1) };
        let admissible = |last: usize| self.window_mu(times.diff(last, first - 1)).1;
        let mut last = if admissible(n_last) {
            n_last
        } else {
            let (mut lo, mut hi) = (first, n_last);
            if !admissible(lo) {
                hi = lo;
            }
            while hi - lo > 1 {
                let mid = (lo + hi) / 2;
                if admissible(mid) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo
        };
        last = last.min(first.saturating_add(max_rows - 1)).min(n_last);
        let mut rows: Vec<_> = (first..=last).map(|i| weights.row(i)).collect();
        loop {
            let mu = self.window_mu(times.diff(last, first - 1)).0;
            let q = self.discrete_factor(times, &rows, first, last, mu);
            if q <= 0.5 || last == first {
                if last == first && q >= 1.0 {
                    return Err(Error::GridTooCoarse(format!(
                        "L·w_ii = {q:.3} >= 1 at t = {}; refine the grid",
                        times.get(first)
                    )));
                }
                return Ok((last, mu, rows));
            }
            last = first + (last - first) / 2;
            rows.truncate(last - first + 1);
        }
    }
}

fn engine_lipschitz(p: &PerturbationSpec) -> Result<f64> {
    match &p.lipschitz {
        Lipschitz::Global(l) => Ok(*l),
        Lipschitz::Local(_) => Err(Error::Config(format!(
            "perturbation '{}' is only locally Lipschitz; truncate it or use continuation",
            p.name
        ))),
    }
}

/// Run the windowed Picard engine on a fixed grid.
fn run_fixed_grid(engine: &Engine<'_>, weights: &KernelWeights, base: &[f64], row0: &[f64], g0: &[f64]) -> Result<(Vec<f64>, PicardReport)> {
    let d = engine.dim;
    let n = weights.len();
    let mut values = vec![0.0; n * d];
    let mut gvals = vec![0.0; n * d];
    values[..d].copy_from_slice(row0);
    gvals[..d].copy_from_slice(g0);
    let mut report = PicardReport { lipschitz: engine.lipschitz, ..Default::default() };
    let mut first = 1;
    let mut widx = 0;
    while first < n {
        let (last, mu, rows) = engine.plan_window(weights, first)?;
        let prev = if first == 1 && weights.first != FirstInterval::Linear {
            vec![f64::NAN; d]
        } else {
            values[(first - 1) * d..first * d].to_vec()
        };
        let out = engine.solve_window(
            &weights.times,
            &rows,
            first,
            last,
            &base[first * d..(last + 1) * d],
            &prev,
            &gvals[..first * d],
            mu,
            widx,
        )?;
        values[first * d..(last + 1) * d].copy_from_slice(&out.values);
        gvals[first * d..(last + 1) * d].copy_from_slice(&out.gvals);
        report.push(out.report, out.trace);
        first = last + 1;
        widx += 1;
    }
    Ok((values, report))
}

fn mode_weights(op: &SpectralOperator, alpha: FractionalOrder, grid: &TimeGrid, first: FirstInterval) -> KernelWeights {
    let family = Arc::new(MittagLefflerFamily::new(alpha));
    let kernels = ModeKernels::new(op.eigenvalues(), family, first);
    KernelWeights::new(Times::from_f64(grid.nodes()), kernels, first)
}

/// `Φ(t)x`, per mode `E_α(−λ_k t^α) x_k`.
pub fn phi_apply(op: &SpectralOperator, alpha: FractionalOrder, t: f64, x: &StateVector) -> Result<StateVector> {
    if !(t >= 0.0) {
        return Err(Error::domain(format!("phi_apply needs t >= 0, got {t}")));
    }
    op.check_dim(x.dim())?;
    let e = specfun::MittagLefflerNeg::new(alpha.value(), 1.0)?;
    let ta = t.powf(alpha.value());
    Ok(StateVector(op.eigenvalues().iter().zip(&x.0).map(|(l, v)| e.eval(l * ta) * v).collect()))
}

/// `Φ(t)x` by direct quadrature of `∫₀^∞ h_α(θ) e^{−λ_k t^α θ} dθ x_k` with
/// [`specfun::wright_density`]; a cross-check for [`phi_apply`].
pub fn phi_apply_quadrature(op: &SpectralOperator, alpha: FractionalOrder, t: f64, x: &StateVector) -> Result<StateVector> {
    if !(t >= 0.0) {
        return Err(Error::domain(format!("phi_apply needs t >= 0, got {t}")));
    }
    op.check_dim(x.dim())?;
    let tol = SeriesTolerance::default();
    let ta = t.powf(alpha.value());
    let mut out = Vec::with_capacity(x.dim());
    for (l, v) in op.eigenvalues().iter().zip(&x.0) {
        let z = l * ta;
        let f = |th: f64| {
            if th <= 0.0 {
                return 0.0;
            }
            specfun::wright_density(alpha, th, tol).unwrap_or(f64::NAN) * (-z * th).exp()
        };
        let mut total = 0.0;
        let mut a = 0.0;
        let mut b = 1.0;
        loop {
            let r = quad::integrate(f, a, b, 1e-14, 1e-11, 200);
            total += r.value;
            if r.value.abs() < 1e-16 * total.abs().max(1e-300) || b > 200.0 {
                break;
            }
            a = b;
            b *= 2.0;
        }
        out.push(total * v);
    }
    Ok(StateVector(out))
}

/// `S₁(g)(t_i)` at grid node `node` of `g`.
pub fn s1_apply(op: &SpectralOperator, alpha: FractionalOrder, g: &Trajectory, node: usize) -> Result<StateVector> {
    op.check_dim(g.dim())?;
    if node >= g.len() {
        return Err(Error::InvalidGrid(format!("node {node} outside grid of {} nodes", g.len())));
    }
    if g.origin() == Origin::Undefined {
        return Err(Error::domain("S1 needs g defined at t = 0"));
    }
    let first = match g.origin() {
        Origin::Singular { exponent } => FirstInterval::Power(exponent),
        _ => FirstInterval::Linear,
    };
    let family = Arc::new(MittagLefflerFamily::new(alpha));
    let kernels = ModeKernels::new(op.eigenvalues(), family, first);
    let times = Times::from_f64(g.times());
    let d = g.dim();
    let n = node + 1;
    let mut row = vec![0.0; n * d];
    kernels.row(&times, node, first, &mut row);
    let mut out = vec![0.0; d];
    for (k, o) in out.iter_mut().enumerate() {
        for j in 0..n {
            if first != FirstInterval::Linear && j == 0 {
                continue;
            }
            *o += row[k * n + j] * g.value(j)[k];
        }
    }
    Ok(StateVector(out))
}

/// Solve with `B = 0`: `u(t_i) = Φ(t_i)u₀ + S₁(f)(t_i)`.
pub fn solve_linear(problem: &MildProblem, config: &SolverConfig) -> Result<Solution> {
    if !problem.perturbation.is_zero() {
        return Err(Error::Config("solve_linear requires B = 0".into()));
    }
    solve_semilinear(problem, config)
}

/// Solve the semilinear problem with globally Lipschitz `B` by windowed
/// Picard iteration.
pub fn solve_semilinear(problem: &MildProblem, config: &SolverConfig) -> Result<Solution> {
    config.validate()?;
    let l = engine_lipschitz(&problem.perturbation)?;
    let weights = mode_weights(&problem.op, problem.alpha, &config.grid, FirstInterval::Linear);
    solve_semilinear_with(problem, config, &weights, l)
}

fn solve_semilinear_with(problem: &MildProblem, config: &SolverConfig, weights: &KernelWeights, l: f64) -> Result<Solution> {
    let d = problem.dim();
    let grid = &config.grid;
    let alpha = problem.alpha.value();
    let e1 = specfun::MittagLefflerNeg::new(alpha, 1.0)?;
    let lambdas = problem.op.eigenvalues();
    let mut base = vec![0.0; grid.len() * d];
    for (i, t) in grid.nodes().iter().enumerate() {
        let ta = t.powf(alpha);
        for k in 0..d {
            base[i * d + k] = e1.eval(lambdas[k] * ta) * problem.u0.0[k];
        }
    }
    let b = &problem.perturbation;
    let f = &problem.forcing;
    let g = move |_i: usize, t: f64, u: &[f64], out: &mut [f64]| {
        f.eval_into(t, out);
        let mut bu = vec![0.0; u.len()];
        (b.eval)(t, u, &mut bu);
        for (o, x) in out.iter_mut().zip(&bu) {
            *o -= x;
        }
    };
    let engine = Engine {
        alpha,
        dim: d,
        lipschitz: l,
        tol: config.picard_tol,
        max_iters: config.max_picard_iters,
        mu_fixed: config.mu_weight,
        growth_budget: config.growth_budget,
        guess: config.initial_guess,
        instrument: config.instrument,
        g: &g,
    };
    let mut g0 = vec![0.0; d];
    g(0, 0.0, &problem.u0.0, &mut g0);
    let (values, report) = run_fixed_grid(&engine, weights, &base, &problem.u0.0, &g0)?;
    let trajectory = Trajectory::from_flat(grid.clone(), d, values, Origin::Regular)?;
    Ok(Solution { trajectory, report })
}

/// Solve `D_t^α u + Au + B(t, u) = f` with the integral initial condition
/// `(I^{1−α}u)(0) = x₀`, i.e. the fixed point of
/// `u(t) = t^{α−1}E_{α,α}(−At^α)x₀ + S₁(f − B(u))(t)`.
///
/// The returned trajectory is singular at `t = 0` with exponent `α − 1`;
/// row 0 holds the leading coefficient `x₀/Γ(α)`.
pub fn solve_integral_initial(
    op: &SpectralOperator,
    alpha: FractionalOrder,
    x0: &StateVector,
    forcing: &Forcing,
    perturbation: &PerturbationSpec,
    config: &SolverConfig,
) -> Result<Solution> {
    config.validate()?;
    op.check_dim(x0.dim())?;
    op.check_dim(forcing.dim())?;
    op.check_dim(perturbation.dim)?;
    let l = engine_lipschitz(perturbation)?;
    let weights = mode_weights(op, alpha, &config.grid, FirstInterval::Power(alpha.value() - 1.0));
    let b = perturbation;
    let f = forcing;
    let g = move |_i: usize, t: f64, u: &[f64], out: &mut [f64]| {
        f.eval_into(t, out);
        let mut bu = vec![0.0; u.len()];
        (b.eval)(t, u, &mut bu);
        for (o, x) in out.iter_mut().zip(&bu) {
            *o -= x;
        }
    };
    integral_initial_engine(op, alpha, x0, config, &weights, l, &g)
}

fn integral_initial_engine(
    op: &SpectralOperator,
    alpha: FractionalOrder,
    x0: &StateVector,
    config: &SolverConfig,
    weights: &KernelWeights,
    l: f64,
    g: &(dyn Fn(usize, f64, &[f64], &mut [f64]) + Sync),
) -> Result<Solution> {
    let d = op.dim();
    let grid = &config.grid;
    let a = alpha.value();
    let ea = specfun::MittagLefflerNeg::new(a, a)?;
    let lambdas = op.eigenvalues();
    let mut base = vec![0.0; grid.len() * d];
    let ra = specfun::rgamma(a);
    for k in 0..d {
        base[k] = x0.0[k] * ra;
    }
    for (i, t) in grid.nodes().iter().enumerate().skip(1) {
        let ta = t.powf(a);
        for k in 0..d {
            base[i * d + k] = ta / t * ea.eval(lambdas[k] * ta) * x0.0[k];
        }
    }
    let engine = Engine {
        alpha: a,
        dim: d,
        lipschitz: l,
        tol: config.picard_tol,
        max_iters: config.max_picard_iters,
        mu_fixed: config.mu_weight,
        growth_budget: config.growth_budget,
        guess: config.initial_guess,
        instrument: config.instrument,
        g,
    };
    let row0 = base[..d].to_vec();
    let (values, report) = run_fixed_grid(&engine, weights, &base, &row0, &vec![0.0; d])?;
    let trajectory = Trajectory::from_flat(grid.clone(), d, values, Origin::Singular { exponent: a - 1.0 })?;
    Ok(Solution { trajectory, report })
}

/// `U(t_i) = u₀ + ∫₀^{t_i} w` for `w ~ c t^{α−1}` near 0: the first interval
/// uses the power profile, later intervals integrate `τ^{α−1}` times the
/// linear interpolant of `τ^{1−α}w(τ)` exactly.
pub fn integrate_singular(u0: &[f64], w: &Trajectory) -> Result<Trajectory> {
    let d = w.dim();
    let t = w.times();
    let e = match w.origin() {
        Origin::Singular { exponent } => exponent,
        Origin::Regular => 0.0,
        Origin::Undefined => return Err(Error::domain("cannot integrate an undefined trajectory")),
    };
    let a = e + 1.0;
    let mut out = vec![0.0; w.len() * d];
    out[..d].copy_from_slice(u0);
    let mut acc = u0.to_vec();
    for i in 1..w.len() {
        let (ta, tb) = (t[i - 1], t[i]);
        for k in 0..d {
            let inc = if i == 1 && e != 0.0 {
                w.value(1)[k] * tb / a
            } else {
                let wa = ta.powf(-e) * w.value(i - 1)[k];
                let wb = tb.powf(-e) * w.value(i)[k];
                let h = tb - ta;
                let i0 = (tb.powf(a) - ta.powf(a)) / a;
                let i1 = (tb.powf(a + 1.0) - ta.powf(a + 1.0)) / (a + 1.0) - ta * i0;
                wa * i0 + (wb - wa) / h * i1
            };
            acc[k] += inc;
        }
        out[i * d..(i + 1) * d].copy_from_slice(&acc);
    }
    Trajectory::from_flat(w.grid().clone(), d, out, Origin::Regular)
}

/// Result of [`solve_time_derivative`].
#[derive(Debug, Clone)]
pub struct DerivativeSolution {
    /// `U = u₀ + ∫ w`
    pub u: Trajectory,
    /// `w = u′`, singular at 0 with exponent `α − 1`.
    pub w: Trajectory,
    /// `x₀ = −Au₀ − B(u₀) + f(0)`
    pub x0: StateVector,
    pub outer_iterations: usize,
    pub outer_distances: Vec<f64>,
    pub inner: PicardReport,
}

/// Time derivative of the solution through the auxiliary problem
/// `D_t^α w + Aw + B′(u)w = f′` with `(I^{1−α}w)(0) = x₀ = −Au₀ − B(u₀) + f(0)`,
/// coupled with `u = u₀ + ∫₀^t w` and iterated to a fixed point.
pub fn solve_time_derivative(problem: &MildProblem, config: &SolverConfig) -> Result<DerivativeSolution> {
    config.validate()?;
    let deriv = problem
        .perturbation
        .derivative
        .as_ref()
        .ok_or(Error::MissingDerivative("perturbation has no derivative"))?;
    let df = problem.forcing.derivative().ok_or(Error::MissingDerivative("forcing has no derivative"))?;
    let d = problem.dim();
    let op = &problem.op;
    let au0 = op.apply(&problem.u0)?;
    let bu0 = problem.perturbation.apply(0.0, &problem.u0.0);
    let f0 = problem.forcing.eval(0.0);
    let x0 = StateVector((0..d).map(|k| -au0.0[k] - bu0[k] + f0[k]).collect());
    let alpha = problem.alpha;
    let weights = mode_weights(op, alpha, &config.grid, FirstInterval::Power(alpha.value() - 1.0));
    let n = config.grid.len();
    let mut u = problem.u0.0.repeat(n);
    let mut distances = Vec::new();
    for outer in 1..=config.max_picard_iters {
        let rho = (0..n).map(|i| norm(&u[i * d..(i + 1) * d])).fold(0.0, f64::max);
        let l = deriv.bound.on_ball(rho.max(problem.u0.norm()) * 1.5 + 1e-12);
        let uref = &u;
        let g = |i: usize, t: f64, w: &[f64], out: &mut [f64]| {
            df(t, out);
            let mut jv = vec![0.0; w.len()];
            (deriv.jvp)(t, &uref[i * d..(i + 1) * d], w, &mut jv);
            for (o, x) in out.iter_mut().zip(&jv) {
                *o -= x;
            }
        };
        let sol = integral_initial_engine(op, alpha, &x0, config, &weights, l, &g)?;
        let big_u = integrate_singular(&problem.u0.0, &sol.trajectory)?;
        let delta = big_u.flat().iter().zip(&u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let scale = big_u.flat().iter().map(|x| x.abs()).fold(1.0, f64::max);
        distances.push(delta);
        u.copy_from_slice(big_u.flat());
        if delta <= config.picard_tol * scale {
            return Ok(DerivativeSolution {
                u: big_u,
                w: sol.trajectory,
                x0,
                outer_iterations: outer,
                outer_distances: distances,
                inner: sol.report,
            });
        }
    }
    Err(Error::PicardDivergence { iterations: config.max_picard_iters, distance: *distances.last().unwrap_or(&f64::NAN) })
}

/// Sampled check of the declared Lipschitz constant on the ball of radius
/// `rho`: returns the largest observed ratio `‖B(u)−B(v)‖/‖u−v‖` and the
/// declared constant.
pub fn sample_lipschitz(p: &PerturbationSpec, rho: f64, samples: usize, seed: u64) -> (f64, f64) {
    use rand::{Rng, SeedableRng};
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let d = p.dim;
    let mut worst: f64 = 0.0;
    let point = |rng: &mut rand::rngs::StdRng| {
        let v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = norm(&v).max(1e-300);
        let r = rho * rng.gen::<f64>();
        v.into_iter().map(|x| x / n * r).collect::<Vec<f64>>()
    };
    for _ in 0..samples {
        let u = point(&mut rng);
        let v = point(&mut rng);
        let du = dist(&u, &v);
        if du == 0.0 {
            continue;
        }
        let bu = p.apply(0.0, &u);
        let bv = p.apply(0.0, &v);
        worst = worst.max(dist(&bu, &bv) / du);
    }
    (worst, p.lipschitz.on_ball(rho))
}

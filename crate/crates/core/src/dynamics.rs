//! Continuation of locally Lipschitz problems with blow-up detection, the
//! fractional Volterra bound, weighted Hölder diagnostics and the maximum
//! principle check.

use std::borrow::Cow;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fraccalc::{default_grading, Origin, TimeGrid, Trajectory};
use crate::mild::{admitted_window_length, Engine, InitialGuess, Lipschitz, MildProblem, PerturbationSpec};
use crate::operators::{norm, SpectralOperator};
use crate::specfun::{self, FractionalOrder, MittagLefflerFamily, MittagLefflerParams, SeriesTolerance};
use crate::weights::{kernel_row, FirstInterval, ModeKernels, PowerKernel, Times};

/// `B̃(u) = B(u)` for `‖u‖ ≤ M` and `B(Mu/‖u‖)` otherwise, globally Lipschitz
/// with constant `2L(M)`.
pub fn truncate_perturbation(b: &PerturbationSpec, radius: f64) -> Result<PerturbationSpec> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::domain(format!("truncation radius must be positive, got {radius}")));
    }
    let l = b.lipschitz.on_ball(radius);
    let inner = b.eval.clone();
    let eval = Arc::new(move |t: f64, u: &[f64], out: &mut [f64]| {
        let n = norm(u);
        if n <= radius {
            inner(t, u, out);
        } else {
            let s = radius / n;
            let p: Vec<f64> = u.iter().map(|x| x * s).collect();
            inner(t, &p, out);
        }
    });
    let lipschitz = match b.lipschitz {
        Lipschitz::Global(l) => Lipschitz::Global(l),
        Lipschitz::Local(_) => Lipschitz::Global(2.0 * l),
    };
    Ok(PerturbationSpec { name: format!("{}|M={radius}", b.name), dim: b.dim, eval, lipschitz, derivative: None })
}

/// Settings for [`continue_with_blowup`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationConfig {
    pub horizon: f64,
    pub picard_tol: f64,
    pub max_picard_iters: usize,
    pub growth_budget: f64,
    /// Norm above which a collapsing window is read as blow-up.
    pub norm_ceiling: f64,
    /// Window floor relative to the horizon.
    pub window_floor: f64,
    /// Smallest truncation radius.
    pub radius_floor: f64,
    pub min_window_nodes: usize,
    /// Largest time step; defaults to `horizon/256`.
    pub max_step: Option<f64>,
    pub max_nodes: usize,
}

impl ContinuationConfig {
    pub fn new(horizon: f64) -> Self {
        Self {
            horizon,
            picard_tol: 1e-10,
            max_picard_iters: 200,
            growth_budget: 1e4,
            norm_ceiling: 1e8,
            window_floor: 1e-6,
            radius_floor: 1e-3,
            min_window_nodes: 8,
            max_step: None,
            max_nodes: 100_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return bad(format!("horizon must be positive, got {}", self.horizon));
        }
        if !(self.picard_tol > 0.0) {
            return bad(format!("picard_tol must be positive, got {}", self.picard_tol));
        }
        if self.max_picard_iters == 0 || self.min_window_nodes == 0 {
            return bad("max_picard_iters and min_window_nodes must be at least 1".into());
        }
        if !(self.growth_budget > 1.0) {
            return bad(format!("growth_budget must exceed 1, got {}", self.growth_budget));
        }
        if !(self.norm_ceiling > 0.0 && self.window_floor > 0.0 && self.radius_floor > 0.0) {
            return bad("norm_ceiling, window_floor and radius_floor must be positive".into());
        }
        if let Some(h) = self.max_step {
            if !(h > 0.0) {
                return bad(format!("max_step must be positive, got {h}"));
            }
        }
        Ok(())
    }
}

/// Outcome of the blow-up alternative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status")]
pub enum ContinuationStatus {
    GlobalToHorizon,
    BlowUpDetected { t_star_estimate: f64, lower: f64, upper: f64 },
}

/// One accepted continuation window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationWindow {
    pub t_start: f64,
    pub length: f64,
    pub radius: f64,
    pub lipschitz: f64,
    pub mu: f64,
    pub nodes: usize,
    pub iterations: usize,
    pub discrete_factor: f64,
    pub max_norm: f64,
    pub retries: usize,
}

/// Result of [`continue_with_blowup`].
#[derive(Debug, Clone)]
pub struct ContinuationResult {
    pub status: ContinuationStatus,
    /// Solution up to the last accepted node; nodes that coincide in `f64`
    /// are merged, keeping the latest value.
    pub trajectory: Trajectory,
    /// Truncation radius of each accepted window.
    pub radius_history: Vec<f64>,
    pub windows: Vec<ContinuationWindow>,
    pub t_reached: f64,
    pub final_norm: f64,
}

/// Serializable digest of a [`ContinuationResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationSummary {
    #[serde(flatten)]
    pub status: ContinuationStatus,
    pub t_reached: f64,
    pub final_norm: f64,
    pub radii: Vec<f64>,
    pub window_count: usize,
    pub node_count: usize,
    pub picard_iterations: usize,
    pub smallest_window: f64,
}

impl ContinuationResult {
    pub fn summary(&self) -> ContinuationSummary {
        ContinuationSummary {
            status: self.status.clone(),
            t_reached: self.t_reached,
            final_norm: self.final_norm,
            radii: self.radius_history.clone(),
            window_count: self.windows.len(),
            node_count: self.windows.iter().map(|w| w.nodes).sum::<usize>() + 1,
            picard_iterations: self.windows.iter().map(|w| w.iterations).sum(),
            smallest_window: self.windows.iter().map(|w| w.length).fold(f64::INFINITY, f64::min),
        }
    }
}

/// `T*` from the times at which the norm doubled, assuming geometric
/// shrinking of the gaps.
fn extrapolate_blowup_time(doublings: &[f64], t_last: f64) -> f64 {
    let n = doublings.len();
    if n >= 3 {
        let g1 = doublings[n - 2] - doublings[n - 3];
        let g2 = doublings[n - 1] - doublings[n - 2];
        if g1 > 0.0 && g2 > 0.0 && g2 < g1 {
            let r = g2 / g1;
            return (doublings[n - 1] + g2 * r / (1.0 - r)).max(t_last);
        }
    }
    t_last
}

/// Continue the solution of a problem with locally Lipschitz `B` by solving
/// truncated, globally Lipschitz problems on consecutive windows.
///
/// Each window starts from the radius `M = max(2‖u(t_c)‖, radius_floor)`; if
/// the solution leaves the ball, `M ← max(2‖u‖, 2M)` and the window is solved
/// again. The window length depends only on `2L(M)`. Blow-up is declared when
/// the admitted window falls below `window_floor·horizon` while `‖u‖` exceeds
/// `norm_ceiling`.
pub fn continue_with_blowup(problem: &MildProblem, config: &ContinuationConfig) -> Result<ContinuationResult> {
    config.validate()?;
    let d = problem.dim();
    let alpha = problem.alpha.value();
    let lambdas = problem.op.eigenvalues().to_vec();
    let family = Arc::new(MittagLefflerFamily::new(problem.alpha));
    let kernels = ModeKernels::new(&lambdas, family, FirstInterval::Linear);
    let e1 = specfun::MittagLefflerNeg::new(alpha, 1.0)?;
    let horizon = config.horizon;
    let floor = config.window_floor * horizon;
    let max_step = config.max_step.unwrap_or(horizon / 256.0);
    let step_const = specfun::gamma(2.0 + alpha)?;
    let u0 = &problem.u0.0;
    let norm0 = problem.u0.norm().max(config.radius_floor);

    let mut times = Times::from_f64(&[0.0]);
    let mut values = u0.clone();
    let mut gvals = problem.forcing.eval(0.0);
    let b0 = problem.perturbation.apply(0.0, u0);
    for (g, b) in gvals.iter_mut().zip(&b0) {
        *g -= b;
    }
    let mut windows: Vec<ContinuationWindow> = Vec::new();
    let mut doublings = vec![0.0];
    let mut next_doubling = 2.0 * norm0;
    let mut status = ContinuationStatus::GlobalToHorizon;

    'outer: loop {
        let c = times.len() - 1;
        let tc = times.get(c);
        let remaining = horizon - tc;
        if remaining <= horizon * 1e-14 {
            break;
        }
        let uc_norm = norm(&values[c * d..]);
        let mut radius = (2.0 * uc_norm).max(config.radius_floor);
        let mut retries = 0;
        loop {
            if retries > 200 || !radius.is_finite() {
                return Err(Error::ContinuationStalled(format!("no admissible truncation radius at t = {tc}")));
            }
            let truncated = truncate_perturbation(&problem.perturbation, radius)?;
            let l = truncated.lipschitz.on_ball(radius);
            let admitted = admitted_window_length(l, alpha, config.growth_budget);
            if admitted < floor {
                if uc_norm > config.norm_ceiling {
                    let t_star = extrapolate_blowup_time(&doublings, tc);
                    status = ContinuationStatus::BlowUpDetected {
                        t_star_estimate: t_star,
                        lower: tc,
                        upper: tc + 2.0 * (t_star - tc),
                    };
                    break 'outer;
                }
                if uc_norm < 2.0 * norm0 {
                    return Err(Error::ContinuationStalled(format!(
                        "window {admitted:e} below floor at t = {tc} without norm growth (|u| = {uc_norm:e})"
                    )));
                }
                if admitted < 1e-28 * tc.max(f64::MIN_POSITIVE) {
                    return Err(Error::BlowUpAmbiguous(format!(
                        "window {admitted:e} below time resolution at t = {tc}, |u| = {uc_norm:e} under ceiling"
                    )));
                }
            }
            let h_win = admitted.min(remaining);
            let mut h = if l > 0.0 { (step_const / (4.0 * l)).powf(1.0 / alpha) } else { f64::INFINITY };
            h = h.min(max_step).min(h_win / config.min_window_nodes as f64);
            let m = ((h_win / h).ceil() as usize).max(1);
            if times.len() + m > config.max_nodes {
                return Err(Error::ContinuationStalled(format!(
                    "node budget {} exhausted at t = {tc}",
                    config.max_nodes
                )));
            }
            let grading = if c == 0 { default_grading(problem.alpha) } else { 1.0 };
            for i in 1..=m {
                let offset = if i == m { h_win } else { h_win * (i as f64 / m as f64).powf(grading) };
                times.push_offset(c, offset);
            }
            let rows: Vec<Cow<'_, [f64]>> = (c + 1..=c + m)
                .into_par_iter()
                .map(|i| {
                    let mut out = vec![0.0; (i + 1) * d];
                    kernels.row(&times, i, FirstInterval::Linear, &mut out);
                    Cow::Owned(out)
                })
                .collect();
            let mut base = vec![0.0; m * d];
            for r in 0..m {
                let ta = times.get(c + 1 + r).powf(alpha);
                for k in 0..d {
                    base[r * d + k] = e1.eval(lambdas[k] * ta) * u0[k];
                }
            }
            let forcing = &problem.forcing;
            let tb = &truncated;
            let g = move |_i: usize, t: f64, u: &[f64], out: &mut [f64]| {
                forcing.eval_into(t, out);
                let mut bu = vec![0.0; u.len()];
                (tb.eval)(t, u, &mut bu);
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
                mu_fixed: None,
                growth_budget: config.growth_budget,
                guess: InitialGuess::Constant,
                instrument: false,
                g: &g,
            };
            let mu = engine.window_mu(h_win).0;
            let outcome = engine.solve_window(
                &times,
                &rows,
                c + 1,
                c + m,
                &base,
                &values[c * d..(c + 1) * d],
                &gvals,
                mu,
                windows.len(),
            );
            let outcome = match outcome {
                Ok(o) => o,
                Err(Error::NonFinite { .. }) | Err(Error::PicardDivergence { .. }) => {
                    times.truncate(c + 1);
                    radius *= 2.0;
                    retries += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let max_norm = outcome.values.chunks(d).map(norm).fold(0.0, f64::max);
            if max_norm >= radius {
                times.truncate(c + 1);
                radius = (2.0 * max_norm).max(2.0 * radius);
                retries += 1;
                continue;
            }
            for r in 0..m {
                let nr = norm(&outcome.values[r * d..(r + 1) * d]);
                while nr >= next_doubling {
                    doublings.push(times.get(c + 1 + r));
                    next_doubling *= 2.0;
                }
            }
            values.extend_from_slice(&outcome.values);
            gvals.extend_from_slice(&outcome.gvals);
            windows.push(ContinuationWindow {
                t_start: tc,
                length: h_win,
                radius,
                lipschitz: l,
                mu,
                nodes: m,
                iterations: outcome.report.iterations,
                discrete_factor: outcome.report.discrete_factor,
                max_norm,
                retries,
            });
            break;
        }
    }

    let n = times.len();
    let mut nodes = Vec::with_capacity(n);
    let mut flat = Vec::with_capacity(n * d);
    for i in 0..n {
        let t = times.get(i);
        if nodes.last().is_some_and(|&last| t <= last) {
            let len = flat.len();
            flat[len - d..].copy_from_slice(&values[i * d..(i + 1) * d]);
        } else {
            nodes.push(t);
            flat.extend_from_slice(&values[i * d..(i + 1) * d]);
        }
    }
    let t_reached = times.get(n - 1);
    let final_norm = norm(&values[(n - 1) * d..]);
    let grid = TimeGrid::from_nodes(nodes)?;
    let trajectory = Trajectory::from_flat(grid, d, flat, Origin::Regular)?;
    Ok(ContinuationResult {
        status,
        trajectory,
        radius_history: windows.iter().map(|w| w.radius).collect(),
        windows,
        t_reached,
        final_norm,
    })
}

/// Outcome of [`volterra_bound_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolterraReport {
    /// `w(t) ≤ a t^{μ−1} + b ∫₀^t (t−τ)^{ν−1} w(τ) dτ` at every node `t > 0`.
    pub premise_holds: bool,
    pub premise_max_violation: f64,
    /// `w(t) ≤ a Γ(μ) t^{μ−1} E_{μ,ν}((bΓ(ν))^{1/ν} t)` at every node `t > 0`.
    pub conclusion_holds: bool,
    /// Smallest `bound − w` over the nodes; infinite when no node is checked.
    pub min_margin: f64,
    /// Node of the smallest margin.
    pub min_margin_time: f64,
}

/// Check the fractional Volterra inequality on sampled nonnegative `w`.
///
/// The premise is evaluated with product-integration weights for the
/// piecewise-linear interpolant of `w`; the bound uses
/// `E_{μ,ν}(s) = Σ s^{nν}/Γ(μ+nν)`.
pub fn volterra_bound_check(a: f64, b: f64, mu: f64, nu: f64, w: &Trajectory) -> Result<VolterraReport> {
    for (name, v) in [("a", a), ("b", b), ("mu", mu), ("nu", nu)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::domain(format!("{name} must be positive, got {v}")));
        }
    }
    if w.dim() != 1 {
        return Err(Error::Dimension { expected: 1, got: w.dim() });
    }
    let vals = w.component(0);
    if vals.iter().skip(1).any(|v| *v < 0.0) {
        return Err(Error::domain("w must be nonnegative"));
    }
    let t = w.times();
    let n = t.len();
    let times = Times::from_f64(t);
    let kernel = PowerKernel::new(nu);
    let gnu = specfun::gamma(nu)?;
    let gmu = specfun::gamma(mu)?;
    let params = MittagLefflerParams::new(mu, nu)?;
    let tol = SeriesTolerance::default();
    let scale = (b * gnu).powf(1.0 / nu);
    let mut premise_max_violation: f64 = 0.0;
    let mut min_margin = f64::INFINITY;
    let mut min_margin_time = f64::NAN;
    let mut row = vec![0.0; n];
    for i in 1..n {
        kernel_row(&kernel, &times, i, FirstInterval::Linear, &mut row[..=i]);
        // PowerKernel rows carry 1/Γ(ν)
        let integral = gnu * row[..=i].iter().zip(&vals).map(|(r, v)| r * v).sum::<f64>();
        let rhs = a * t[i].powf(mu - 1.0) + b * integral;
        premise_max_violation = premise_max_violation.max(vals[i] - rhs);
        let e = match specfun::mittag_leffler(params, scale * t[i], tol) {
            Ok(e) => e,
            Err(Error::Overflow(_)) => f64::INFINITY,
            Err(e) => return Err(e),
        };
        let bound = a * gmu * t[i].powf(mu - 1.0) * e;
        let margin = bound - vals[i];
        if margin < min_margin {
            min_margin = margin;
            min_margin_time = t[i];
        }
    }
    let slack = 1e-12 * vals.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    Ok(VolterraReport {
        premise_holds: premise_max_violation <= slack,
        premise_max_violation,
        conclusion_holds: min_margin >= 0.0,
        min_margin,
        min_margin_time,
    })
}

/// Indices `(r, β)` of the weighted Hölder space `F^{r,β}`, with the optional
/// `γ` of the integral-initial problem and `κ = α − γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderIndices {
    pub r: f64,
    pub beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
}

impl HolderIndices {
    pub fn new(r: f64, beta: f64) -> Result<Self> {
        let h = Self { r, beta, gamma: None, kappa: None };
        if !(r > 0.0 && r <= 1.0) || !(beta > 0.0 && beta < r) {
            return Err(Error::domain(format!("Hölder indices need 0 < β < r ≤ 1, got r = {r}, β = {beta}")));
        }
        Ok(h)
    }

    /// Indices `(κ, γ)` with `κ = α − γ`, the space of the integral-initial
    /// solution.
    pub fn for_integral_initial(alpha: FractionalOrder, gamma: f64) -> Result<Self> {
        let kappa = alpha.value() - gamma;
        let mut h = Self::new(kappa, gamma)?;
        h.gamma = Some(gamma);
        h.kappa = Some(kappa);
        Ok(h)
    }

    /// Violated conditions for the semilinear regularity result.
    pub fn semilinear_violations(&self, alpha: FractionalOrder) -> Vec<String> {
        let a = alpha.value();
        let mut v = Vec::new();
        if !(self.beta > 0.0) {
            v.push(format!("0 < β required, got β = {}", self.beta));
        }
        if !(self.beta < self.r) {
            v.push(format!("β < r required, got β = {}, r = {}", self.beta, self.r));
        }
        if !(self.r <= 1.0) {
            v.push(format!("r ≤ 1 required, got r = {}", self.r));
        }
        if !(self.r > (1.0 - a).max(self.beta)) {
            v.push(format!("max(β, 1 − α) < r required, got r = {}", self.r));
        }
        if !(self.beta < a) {
            v.push(format!("β < α required, got β = {}, α = {a}", self.beta));
        }
        v
    }

    /// Violated conditions for the integral-initial problem.
    pub fn integral_initial_violations(&self, alpha: FractionalOrder) -> Vec<String> {
        let a = alpha.value();
        let mut v = Vec::new();
        match self.gamma {
            None => v.push("γ required for the integral-initial problem".into()),
            Some(g) => {
                if !(g > 0.0 && g < a / 2.0) {
                    v.push(format!("0 < γ < α/2 required, got γ = {g}, α/2 = {}", a / 2.0));
                }
                if !(a - g <= self.r) {
                    v.push(format!("α − γ ≤ r required, got α − γ = {}, r = {}", a - g, self.r));
                }
                if !(g <= self.beta) {
                    v.push(format!("γ ≤ β required, got γ = {g}, β = {}", self.beta));
                }
                if let Some(k) = self.kappa {
                    if (k - (a - g)).abs() > 1e-12 {
                        v.push(format!("κ = α − γ required, got κ = {k}"));
                    }
                }
            }
        }
        v
    }
}

/// Options of [`holder_fit`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderFitOptions {
    /// Lag range of the modulus-of-continuity fit; defaults to
    /// `[4·t_1, T/10]`.
    pub h_min: Option<f64>,
    pub h_max: Option<f64>,
    pub lags: usize,
    /// Fraction of the nodes forming the smallest window for `w_f`.
    pub window_fraction: f64,
}

impl Default for HolderFitOptions {
    fn default() -> Self {
        Self { h_min: None, h_max: None, lags: 24, window_fraction: 1.0 / 16.0 }
    }
}

/// Discrete weighted Hölder norms of a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderReport {
    pub indices: HolderIndices,
    /// `sup t^{1−r}‖u(t)‖`
    pub weighted_sup: f64,
    /// `sup s^{1−r+β}‖u(t) − u(s)‖/(t − s)^β` over grid pairs `0 < s < t`.
    pub weighted_seminorm: f64,
    /// The seminorm restricted to the smallest window `(0, t_w]`.
    pub w_limit_estimate: f64,
    /// Slope of `log ω(h)` against `log h`; `None` when the trajectory is
    /// flat over the fit range.
    pub fitted_exponent: Option<f64>,
    pub fit_range: (f64, f64),
}

impl HolderReport {
    pub fn norm(&self) -> f64 {
        self.weighted_sup + self.weighted_seminorm
    }
}

fn weighted_seminorm(u: &Trajectory, r: f64, beta: f64, last: usize) -> f64 {
    let t = u.times();
    (1..=last)
        .into_par_iter()
        .map(|j| {
            let s = t[j];
            let w = s.powf(1.0 - r + beta);
            let uj = u.value(j);
            let mut best: f64 = 0.0;
            for i in j + 1..=last {
                let diff = crate::operators::dist(u.value(i), uj);
                best = best.max(w * diff / (t[i] - s).powf(beta));
            }
            best
        })
        .reduce(|| 0.0, f64::max)
}

/// `u(τ)` by linear interpolation.
fn interpolate(u: &Trajectory, tau: f64, hint: &mut usize, out: &mut [f64]) {
    let t = u.times();
    while *hint + 1 < t.len() - 1 && t[*hint + 1] < tau {
        *hint += 1;
    }
    let (a, b) = (t[*hint], t[*hint + 1]);
    let w = ((tau - a) / (b - a)).clamp(0.0, 1.0);
    let (ua, ub) = (u.value(*hint), u.value(*hint + 1));
    for k in 0..out.len() {
        out[k] = ua[k] + w * (ub[k] - ua[k]);
    }
}

/// Modulus of continuity `ω(h) = max_s ‖u(s + h) − u(s)‖` over grid nodes
/// `s`, with `u(s + h)` interpolated linearly.
pub fn modulus_of_continuity(u: &Trajectory, h: f64) -> f64 {
    let t = u.times();
    let end = t[t.len() - 1];
    let d = u.dim();
    let mut hint = 0;
    let mut buf = vec![0.0; d];
    let mut best: f64 = 0.0;
    for (j, s) in t.iter().enumerate() {
        if s + h > end {
            break;
        }
        if u.origin() != Origin::Regular && j == 0 {
            continue;
        }
        interpolate(u, s + h, &mut hint, &mut buf);
        best = best.max(crate::operators::dist(&buf, u.value(j)));
    }
    best
}

/// Weighted Hölder norms and the fitted Hölder exponent near the origin.
pub fn holder_fit(u: &Trajectory, indices: HolderIndices, opts: HolderFitOptions) -> Result<HolderReport> {
    let t = u.times();
    let n = t.len() - 1;
    if n < 8 {
        return Err(Error::InvalidGrid(format!("Hölder fit needs at least 8 intervals, got {n}")));
    }
    let HolderIndices { r, beta, .. } = indices;
    if !(r > 0.0 && r <= 1.0 && beta > 0.0 && beta < r) {
        return Err(Error::domain(format!("Hölder indices need 0 < β < r ≤ 1, got r = {r}, β = {beta}")));
    }
    let weighted_sup = (1..=n).map(|i| t[i].powf(1.0 - r) * norm(u.value(i))).fold(0.0, f64::max);
    let seminorm = weighted_seminorm(u, r, beta, n);
    let window = ((n as f64 * opts.window_fraction).ceil() as usize).clamp(2, n);
    let w_limit_estimate = weighted_seminorm(u, r, beta, window);
    let h_min = opts.h_min.unwrap_or(4.0 * t[1]);
    let h_max = opts.h_max.unwrap_or(t[n] / 10.0);
    if !(h_min > 0.0 && h_max > h_min) {
        return Err(Error::domain(format!("invalid fit range [{h_min}, {h_max}]")));
    }
    let lags = opts.lags.max(2);
    let mut xs = Vec::with_capacity(lags);
    let mut ys = Vec::with_capacity(lags);
    let scale = (0..=n).filter(|i| *i > 0 || u.origin() == Origin::Regular).map(|i| norm(u.value(i))).fold(0.0, f64::max);
    for m in 0..lags {
        let h = h_min * (h_max / h_min).powf(m as f64 / (lags - 1) as f64);
        let w = modulus_of_continuity(u, h);
        if w > 1e-13 * scale.max(f64::MIN_POSITIVE) {
            xs.push(h.ln());
            ys.push(w.ln());
        }
    }
    let fitted_exponent = if xs.len() >= lags / 2 { Some(slope(&xs, &ys)) } else { None };
    Ok(HolderReport {
        indices,
        weighted_sup,
        weighted_seminorm: seminorm,
        w_limit_estimate,
        fitted_exponent,
        fit_range: (h_min, h_max),
    })
}

fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Location of a sample value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub t: f64,
    /// Spatial sample point, or the mode index for the identity basis.
    pub x: f64,
    pub value: f64,
}

/// Outcome of [`max_principle_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxPrincipleReport {
    /// `f ≥ 0` and `u₀ ≥ 0` on the spatial grid.
    pub premise_holds: bool,
    pub nonnegative: bool,
    pub min_value: f64,
    /// Minimizing point when `nonnegative` is false.
    pub witness: Option<GridPoint>,
    /// Discrete `∫₀^{t₀}(t₀−τ)^{−α}g′(τ)dτ ≥ −tol` at the maximizer `t₀` of
    /// every sample trace and every mode trace.
    pub luchko_holds: bool,
    pub luchko_min: f64,
    pub luchko_traces: usize,
    pub tolerance: f64,
}

/// Tolerance of the maximum-principle check.
pub const MAX_PRINCIPLE_TOL: f64 = 1e-8;

/// `Σ_j ((t₀−t_j)^{1−α} − (t₀−t_{j+1})^{1−α})/((1−α)h_j) (g_{j+1} − g_j)`
/// over the intervals up to `t₀ = t_m`.
fn luchko_sum(t: &[f64], g: &[f64], m: usize, alpha: f64) -> f64 {
    let e = 1.0 - alpha;
    let t0 = t[m];
    (0..m)
        .map(|j| {
            let h = t[j + 1] - t[j];
            let w = ((t0 - t[j]).powf(e) - (t0 - t[j + 1]).powf(e)) / (e * h);
            w * (g[j + 1] - g[j])
        })
        .sum()
}

/// Nonnegativity of `u` on the space-time grid, with the discrete fractional
/// maximum principle at each trace maximizer.
pub fn max_principle_check(
    op: &SpectralOperator,
    alpha: FractionalOrder,
    u: &Trajectory,
    f_samples: &[f64],
    u0_samples: &[f64],
) -> Result<MaxPrincipleReport> {
    let d = op.dim();
    for got in [u.dim(), f_samples.len(), u0_samples.len()] {
        if got != d {
            return Err(Error::Dimension { expected: d, got });
        }
    }
    if u.origin() != Origin::Regular {
        return Err(Error::domain("maximum principle check needs a regular trajectory"));
    }
    let premise_holds = f_samples.iter().chain(u0_samples).all(|v| *v >= 0.0);
    let t = u.times();
    let n = t.len();
    let points = op.sample_points();
    let mut samples = vec![0.0; n * d];
    for i in 0..n {
        op.to_samples(u.value(i), &mut samples[i * d..(i + 1) * d]);
    }
    let mut min_value = f64::INFINITY;
    let mut argmin = (0, 0);
    for i in 0..n {
        for j in 0..d {
            let v = samples[i * d + j];
            if v < min_value {
                min_value = v;
                argmin = (i, j);
            }
        }
    }
    let nonnegative = min_value >= -MAX_PRINCIPLE_TOL;
    let witness = (!nonnegative).then(|| GridPoint {
        t: t[argmin.0],
        x: points.get(argmin.1).copied().unwrap_or(argmin.1 as f64),
        value: min_value,
    });
    let a = alpha.value();
    let mut luchko_min = f64::INFINITY;
    let mut traces = 0;
    for (source, stride) in [(&samples, d), (&u.flat().to_vec(), d)] {
        for j in 0..stride {
            let g: Vec<f64> = (0..n).map(|i| source[i * stride + j]).collect();
            let m = (0..n).fold(0, |best, i| if g[i] > g[best] { i } else { best });
            let s = if m == 0 { 0.0 } else { luchko_sum(t, &g, m, a) };
            luchko_min = luchko_min.min(s);
            traces += 1;
        }
    }
    Ok(MaxPrincipleReport {
        premise_holds,
        nonnegative,
        min_value,
        witness,
        luchko_holds: luchko_min >= -MAX_PRINCIPLE_TOL,
        luchko_min,
        luchko_traces: traces,
        tolerance: MAX_PRINCIPLE_TOL,
    })
}

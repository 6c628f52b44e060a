//! Product-integration weights for convolutions `∫₀^{t_i} k(t_i − τ) g(τ) dτ`
//! with piecewise-linear `g`, for the Riemann-Liouville kernel and the
//! per-mode Mittag-Leffler kernels of the solution operator.

use std::borrow::Cow;
use std::sync::Arc;

use rayon::prelude::*;

use crate::quad;
use crate::specfun::{self, MittagLefflerFamily, MittagLefflerNeg};

/// Node times stored as unevaluated sums `hi + lo`, so that nodes closer
/// together than one ulp of `t` stay distinct.
#[derive(Debug, Clone, Default)]
pub(crate) struct Times {
    hi: Vec<f64>,
    lo: Vec<f64>,
}

impl Times {
    pub fn from_f64(nodes: &[f64]) -> Self {
        Self { hi: nodes.to_vec(), lo: vec![0.0; nodes.len()] }
    }

    pub fn len(&self) -> usize {
        self.hi.len()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.hi[i] + self.lo[i]
    }

    /// `t_i − t_j`.
    pub fn diff(&self, i: usize, j: usize) -> f64 {
        (self.hi[i] - self.hi[j]) + (self.lo[i] - self.lo[j])
    }

    /// Append `t_last + dt`.
    pub fn push_offset(&mut self, base: usize, dt: f64) {
        let (bh, bl) = (self.hi[base], self.lo[base]);
        let s = bh + dt;
        let bb = s - bh;
        let err = (bh - (s - bb)) + (dt - bb);
        let lo = bl + err;
        let hi = s + lo;
        let lo = lo - (hi - s);
        self.hi.push(hi);
        self.lo.push(lo);
    }

    pub fn truncate(&mut self, n: usize) {
        self.hi.truncate(n);
        self.lo.truncate(n);
    }
}

/// Treatment of the first interval `[t_0, t_1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum FirstInterval {
    /// Linear interpolation between the values at `t_0` and `t_1`.
    Linear,
    /// Profile `g(t_1)(τ/t_1)^e`, `e > −1`; the weight attaches to node 1.
    Power(f64),
}

/// Convolution kernel with its first two primitives.
pub(crate) trait Kernel: Sync {
    fn k(&self, s: f64) -> f64;
    /// `∫₀^s k`
    fn k1(&self, s: f64) -> f64;
    /// `∫₀^s k1`
    fn k2(&self, s: f64) -> f64;
    /// `∫₀^{h} k(t − τ)(τ/h)^e dτ` with `t − h = q ≥ 0`.
    fn power_first(&self, t: f64, h: f64, e: f64) -> f64;
}

/// `k(s) = s^{σ−1}/Γ(σ)`.
pub(crate) struct PowerKernel {
    sigma: f64,
    r0: f64,
    r1: f64,
    r2: f64,
}

impl PowerKernel {
    pub fn new(sigma: f64) -> Self {
        Self {
            sigma,
            r0: specfun::rgamma(sigma),
            r1: specfun::rgamma(sigma + 1.0),
            r2: specfun::rgamma(sigma + 2.0),
        }
    }
}

impl Kernel for PowerKernel {
    fn k(&self, s: f64) -> f64 {
        s.powf(self.sigma - 1.0) * self.r0
    }
    fn k1(&self, s: f64) -> f64 {
        s.powf(self.sigma) * self.r1
    }
    fn k2(&self, s: f64) -> f64 {
        s.powf(self.sigma + 1.0) * self.r2
    }
    fn power_first(&self, t: f64, h: f64, e: f64) -> f64 {
        let sigma = self.sigma;
        let front = specfun::gamma(e + 1.0).unwrap_or(f64::NAN) * specfun::rgamma(sigma + e + 1.0);
        if t <= h {
            return h.powf(sigma) * front;
        }
        let x = h / t;
        let inc = specfun::beta_inc_regularized(e + 1.0, sigma, x).unwrap_or(f64::NAN);
        h.powf(-e) * t.powf(sigma + e) * front * inc
    }
}

/// `k(s) = s^{α−1} E_{α,α}(−λ s^α)`, the per-mode kernel of the solution
/// operator `S₁`; its primitives are `s^α E_{α,α+1}` and `s^{α+1} E_{α,α+2}`.
pub(crate) struct MlKernel<'a> {
    pub lambda: f64,
    pub family: &'a MittagLefflerFamily,
    pub first: Option<&'a (f64, MittagLefflerNeg)>,
}

impl Kernel for MlKernel<'_> {
    fn k(&self, s: f64) -> f64 {
        let a = self.family.alpha;
        let sa = s.powf(a);
        sa / s * self.family.e_a.eval(self.lambda * sa)
    }
    fn k1(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        let sa = s.powf(self.family.alpha);
        sa * self.family.e_a1.eval(self.lambda * sa)
    }
    fn k2(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        let sa = s.powf(self.family.alpha);
        s * sa * self.family.e_a2.eval(self.lambda * sa)
    }
    fn power_first(&self, t: f64, h: f64, e: f64) -> f64 {
        let a = self.family.alpha;
        if t <= h {
            let ha = h.powf(a);
            let g = specfun::gamma(e + 1.0).unwrap_or(f64::NAN);
            let ev = match self.first {
                Some((ee, ev)) if *ee == e => ev.eval(self.lambda * ha),
                _ => MittagLefflerNeg::new(a, a + e + 1.0).map(|m| m.eval(self.lambda * ha)).unwrap_or(f64::NAN),
            };
            return g * ha * ev;
        }
        let p = 1.0 / (e + 1.0);
        let rule = quad::gl16();
        h * p * quad::gauss_legendre_apply(rule, 0.0, 1.0, |v| self.k(t - h * v.powf(p)))
    }
}

const GAUSS3_X: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
const GAUSS3_W: [f64; 3] = [0.555_555_555_555_555_6, 0.888_888_888_888_888_9, 0.555_555_555_555_555_6];
/// Intervals shorter than this fraction of their distance to `t_i` are
/// integrated by Gauss quadrature; the closed form would cancel.
const FAR_RATIO: f64 = 1e-4;

/// Weights `w_{ij}`, `j = 0..=i`, with `Σ_j w_{ij} g_j = ∫₀^{t_i} k(t_i − τ) ĝ(τ) dτ`
/// for the piecewise-linear (or power-profile) reconstruction `ĝ`.
pub(crate) fn kernel_row<K: Kernel + ?Sized>(k: &K, times: &Times, i: usize, first: FirstInterval, out: &mut [f64]) {
    debug_assert_eq!(out.len(), i + 1);
    out.fill(0.0);
    if i == 0 {
        return;
    }
    let mut cache: Option<(f64, f64)> = None;
    for j in 0..i {
        let p = times.diff(i, j);
        let q = times.diff(i, j + 1);
        let h = times.diff(j + 1, j);
        if j == 0 {
            if let FirstInterval::Power(e) = first {
                out[1] += k.power_first(p, h, e);
                cache = None;
                continue;
            }
        }
        if q > 0.0 && h < FAR_RATIO * q {
            let (mut left, mut right) = (0.0, 0.0);
            for (x, w) in GAUSS3_X.iter().zip(GAUSS3_W) {
                let phi = 0.5 * (1.0 + x);
                let kv = k.k(p - h * phi) * w * 0.5 * h;
                left += kv * (1.0 - phi);
                right += kv * phi;
            }
            out[j] += left;
            out[j + 1] += right;
            cache = None;
            continue;
        }
        let (k1p, k2p) = match cache {
            Some(v) => v,
            None => (k.k1(p), k.k2(p)),
        };
        let (k1q, k2q) = if q > 0.0 { (k.k1(q), k.k2(q)) } else { (0.0, 0.0) };
        let d = (k2p - k2q) / h;
        out[j] += k1p - d;
        out[j + 1] += d - k1q;
        cache = Some((k1q, k2q));
    }
}

/// Per-mode Mittag-Leffler kernels for an operator spectrum.
pub(crate) struct ModeKernels {
    pub lambdas: Vec<f64>,
    pub family: Arc<MittagLefflerFamily>,
    pub first_eval: Option<(f64, MittagLefflerNeg)>,
}

impl ModeKernels {
    pub fn new(lambdas: &[f64], family: Arc<MittagLefflerFamily>, first: FirstInterval) -> Self {
        let first_eval = match first {
            FirstInterval::Power(e) => MittagLefflerNeg::new(family.alpha, family.alpha + e + 1.0).ok().map(|m| (e, m)),
            FirstInterval::Linear => None,
        };
        Self { lambdas: lambdas.to_vec(), family, first_eval }
    }

    pub fn dim(&self) -> usize {
        self.lambdas.len()
    }

    pub fn kernel(&self, mode: usize) -> MlKernel<'_> {
        MlKernel { lambda: self.lambdas[mode], family: &self.family, first: self.first_eval.as_ref() }
    }

    /// Row `i` for all modes, mode-major: entry `(k, j)` at `k(i+1) + j`.
    pub fn row(&self, times: &Times, i: usize, first: FirstInterval, out: &mut [f64]) {
        let n = i + 1;
        if self.dim() > 1 && n > 64 {
            out.par_chunks_mut(n).enumerate().for_each(|(m, chunk)| {
                kernel_row(&self.kernel(m), times, i, first, chunk);
            });
        } else {
            for (m, chunk) in out.chunks_mut(n).enumerate() {
                kernel_row(&self.kernel(m), times, i, first, chunk);
            }
        }
    }
}

/// Weight rows on a fixed grid, cached in full when they fit into memory.
pub(crate) struct KernelWeights {
    pub times: Times,
    pub kernels: ModeKernels,
    pub first: FirstInterval,
    cache: Option<Vec<Vec<f64>>>,
}

/// Maximum number of cached weights (f64 entries).
pub(crate) const WEIGHT_BUDGET: usize = 1 << 24;

impl KernelWeights {
    pub fn new(times: Times, kernels: ModeKernels, first: FirstInterval) -> Self {
        let n = times.len();
        let d = kernels.dim();
        let total = n * (n + 1) / 2 * d;
        let mut w = Self { times, kernels, first, cache: None };
        if total <= WEIGHT_BUDGET {
            let rows: Vec<Vec<f64>> = (0..n)
                .into_par_iter()
                .map(|i| {
                    let mut r = vec![0.0; (i + 1) * d];
                    w.kernels.row(&w.times, i, w.first, &mut r);
                    r
                })
                .collect();
            w.cache = Some(rows);
        }
        w
    }

    pub fn dim(&self) -> usize {
        self.kernels.dim()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_cached(&self) -> bool {
        self.cache.is_some()
    }

    pub fn row(&self, i: usize) -> Cow<'_, [f64]> {
        match &self.cache {
            Some(rows) => Cow::Borrowed(&rows[i]),
            None => {
                let mut r = vec![0.0; (i + 1) * self.dim()];
                self.kernels.row(&self.times, i, self.first, &mut r);
                Cow::Owned(r)
            }
        }
    }
}

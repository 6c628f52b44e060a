//! Time grids, trajectories and discrete Riemann-Liouville / Caputo
//! operators built on piecewise-linear product integration.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun::{self, FractionalOrder};
use crate::weights::{kernel_row, FirstInterval, PowerKernel, Times};

/// Strictly increasing nodes `0 = t_0 < t_1 < … < t_N = T`, `N ≥ 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    nodes: Vec<f64>,
    grading: Option<f64>,
}

impl TimeGrid {
    /// Grid from explicit nodes.
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 3 {
            return Err(Error::InvalidGrid(format!("need at least 3 nodes, got {}", nodes.len())));
        }
        if nodes[0] != 0.0 {
            return Err(Error::InvalidGrid(format!("first node must be 0, got {}", nodes[0])));
        }
        if let Some(w) = nodes.windows(2).find(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(Error::InvalidGrid(format!("nodes must increase strictly: {} then {}", w[0], w[1])));
        }
        Ok(Self { nodes, grading: None })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Number of intervals `N`.
    pub fn n(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn t_end(&self) -> f64 {
        self.nodes[self.n()]
    }

    pub fn grading(&self) -> Option<f64> {
        self.grading
    }

    /// Index of the node equal to `t`, if any.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.nodes.iter().position(|x| *x == t)
    }
}

/// Graded grid `t_i = T(i/N)^g`.
pub fn make_graded_grid(t_end: f64, n: usize, g: f64) -> Result<TimeGrid> {
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::InvalidGrid(format!("horizon must be positive, got {t_end}")));
    }
    if n < 2 {
        return Err(Error::InvalidGrid(format!("need N >= 2 intervals, got {n}")));
    }
    if !(g >= 1.0) || !g.is_finite() {
        return Err(Error::InvalidGrid(format!("grading exponent must be >= 1, got {g}")));
    }
    let mut nodes: Vec<f64> = (0..=n).map(|i| t_end * (i as f64 / n as f64).powf(g)).collect();
    nodes[n] = t_end;
    let mut grid = TimeGrid::from_nodes(nodes)?;
    grid.grading = Some(g);
    Ok(grid)
}

/// Default grading `(2 − α)/α` for solver grids.
pub fn default_grading(alpha: FractionalOrder) -> f64 {
    (2.0 - alpha.value()) / alpha.value()
}

/// Meaning of the row stored at `t_0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Origin {
    /// Row 0 holds `u(0)`.
    Regular,
    /// The quantity is undefined at `t = 0`; row 0 holds NaN.
    Undefined,
    /// `u(t) ~ c t^exponent` as `t → 0` with `exponent < 0`; row 0 holds `c`.
    Singular { exponent: f64 },
}

/// Grid plus state vectors `u(t_i) ∈ R^d`, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    grid: TimeGrid,
    dim: usize,
    values: Vec<f64>,
    origin: Origin,
}

impl Trajectory {
    /// Trajectory whose row 0 is the value at `t = 0`.
    pub fn new(grid: TimeGrid, values: Vec<Vec<f64>>) -> Result<Self> {
        Self::with_origin(grid, values, Origin::Regular)
    }

    pub fn with_origin(grid: TimeGrid, values: Vec<Vec<f64>>, origin: Origin) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Dimension { expected: grid.len(), got: values.len() });
        }
        let dim = values[0].len();
        let mut flat = Vec::with_capacity(dim * values.len());
        for v in &values {
            if v.len() != dim {
                return Err(Error::Dimension { expected: dim, got: v.len() });
            }
            flat.extend_from_slice(v);
        }
        Self::from_flat(grid, dim, flat, origin)
    }

    pub fn from_flat(grid: TimeGrid, dim: usize, values: Vec<f64>, origin: Origin) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Dimension { expected: 1, got: 0 });
        }
        if values.len() != dim * grid.len() {
            return Err(Error::Dimension { expected: dim * grid.len(), got: values.len() });
        }
        let skip = if origin == Origin::Undefined { dim } else { 0 };
        for (idx, v) in values.iter().enumerate().skip(skip) {
            if !v.is_finite() {
                return Err(Error::NonFinite { t: grid.nodes()[idx / dim] });
            }
        }
        if let Origin::Singular { exponent } = origin {
            if !(exponent < 0.0 && exponent > -1.0) {
                return Err(Error::domain(format!("singular exponent must lie in (-1, 0), got {exponent}")));
            }
        }
        Ok(Self { grid, dim, values, origin })
    }

    /// Sample `f` on the grid.
    pub fn from_fn<F: Fn(f64) -> Vec<f64>>(grid: TimeGrid, f: F) -> Result<Self> {
        let values = grid.nodes().iter().map(|t| f(*t)).collect();
        Self::new(grid, values)
    }

    /// Scalar trajectory sampled from `f`.
    pub fn scalar<F: Fn(f64) -> f64>(grid: TimeGrid, f: F) -> Result<Self> {
        Self::from_fn(grid, |t| vec![f(t)])
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        self.grid.nodes()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn origin(&self) -> Origin {
        self.origin
    }

    pub fn value(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn flat(&self) -> &[f64] {
        &self.values
    }

    /// Time series of component `k`.
    pub fn component(&self, k: usize) -> Vec<f64> {
        (0..self.len()).map(|i| self.values[i * self.dim + k]).collect()
    }

    /// Euclidean norms `‖u(t_i)‖`.
    pub fn norms(&self) -> Vec<f64> {
        (0..self.len()).map(|i| crate::operators::norm(self.value(i))).collect()
    }

    /// Largest componentwise difference over nodes `i ≥ 1` (and node 0 when
    /// both are regular).
    pub fn max_abs_diff(&self, other: &Trajectory) -> Result<f64> {
        if self.len() != other.len() || self.dim != other.dim {
            return Err(Error::Dimension { expected: self.values.len(), got: other.values.len() });
        }
        let start = if self.origin == Origin::Regular && other.origin == Origin::Regular { 0 } else { self.dim };
        Ok(self.values[start..]
            .iter()
            .zip(&other.values[start..])
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Write `t, u_1, …, u_d` rows. A singular origin row is omitted and an
    /// undefined one is written as NaN.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut header = String::from("t");
        for k in 1..=self.dim {
            header.push_str(&format!(",u_{k}"));
        }
        writeln!(w, "{header}")?;
        for i in 0..self.len() {
            if i == 0 && matches!(self.origin, Origin::Singular { .. }) {
                continue;
            }
            let mut line = format!("{:e}", self.grid.nodes()[i]);
            for v in self.value(i) {
                line.push_str(&format!(",{v:e}"));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    /// Read a regular trajectory written by [`Self::write_csv`].
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut times = Vec::new();
        let mut rows = Vec::new();
        for (n, line) in r.lines().enumerate() {
            let line = line?;
            if n == 0 || line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split(',').map(|s| s.trim().parse::<f64>());
            let t = parts
                .next()
                .ok_or_else(|| Error::Config(format!("line {}: empty row", n + 1)))?
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
            let row: std::result::Result<Vec<f64>, _> = parts.collect();
            times.push(t);
            rows.push(row.map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?);
        }
        Self::new(TimeGrid::from_nodes(times)?, rows)
    }
}

fn check_order(sigma: f64, what: &str) -> Result<()> {
    if sigma > 0.0 && sigma < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("{what} must lie in (0, 1), got {sigma}")))
    }
}

/// `v(t_i) = (1/Γ(σ)) ∫₀^{t_i} (t_i − τ)^{σ−1} u(τ) dτ`, exact for
/// piecewise-linear `u`. For a singular trajectory `u ~ c t^e` the product
/// `t^{−e} u` is interpolated linearly instead, starting from the stored
/// leading coefficient at `t = 0`.
pub fn rl_fractional_integral(sigma: f64, u: &Trajectory) -> Result<Trajectory> {
    check_order(sigma, "integration order")?;
    if u.origin == Origin::Undefined {
        return Err(Error::domain("cannot integrate a trajectory that is undefined at t = 0"));
    }
    if u.grid.n() < 4 {
        log::warn!("rl_fractional_integral on a grid with only {} intervals", u.grid.n());
    }
    let d = u.dim;
    let mut out = vec![0.0; u.values.len()];
    let mut row = Vec::new();
    let accumulate = |out: &mut [f64], row: &[f64], i: usize| {
        let dst = &mut out[i * d..(i + 1) * d];
        for (j, w) in row.iter().enumerate() {
            if *w != 0.0 {
                for (o, x) in dst.iter_mut().zip(u.value(j)) {
                    *o += w * x;
                }
            }
        }
    };
    let out_origin = match u.origin {
        Origin::Singular { exponent } => {
            let t = u.times();
            for i in 1..u.len() {
                singular_rl_row(sigma, exponent, t, i, &mut row)?;
                accumulate(&mut out, &row, i);
            }
            let e = exponent + sigma;
            // limit of v(t)/t^e (or v(0) when e = 0) from the leading coefficient
            let factor = specfun::gamma(exponent + 1.0)? * specfun::rgamma(e + 1.0);
            if e <= 0.0 {
                for k in 0..d {
                    out[k] = u.values[k] * factor;
                }
            }
            if e < 0.0 {
                Origin::Singular { exponent: e }
            } else {
                Origin::Regular
            }
        }
        _ => {
            let kernel = PowerKernel::new(sigma);
            let times = Times::from_f64(u.times());
            for i in 1..u.len() {
                row.resize(i + 1, 0.0);
                kernel_row(&kernel, &times, i, FirstInterval::Linear, &mut row);
                accumulate(&mut out, &row, i);
            }
            Origin::Regular
        }
    };
    Trajectory::from_flat(u.grid.clone(), d, out, out_origin)
}

/// Weights of `I^σ u(t_i)` for `u = τ^e φ(τ)` with `φ` piecewise linear
/// through the leading coefficient (row 0) and `t_j^{−e} u_j`.
fn singular_rl_row(sigma: f64, e: f64, t: &[f64], i: usize, row: &mut Vec<f64>) -> Result<()> {
    row.clear();
    row.resize(i + 1, 0.0);
    let rg = specfun::rgamma(sigma);
    let ti = t[i];
    let t1 = t[1];
    let rule = crate::quad::gl16();
    // weights of φ_0 = c and φ_1 on [0, t_1]
    if i == 1 {
        let scale = t1.powf(sigma + e) * rg;
        let b1 = specfun::beta(e + 1.0, sigma)?;
        let b2 = specfun::beta(e + 2.0, sigma)?;
        row[0] += scale * (b1 - b2);
        row[1] += scale * b2 * t1.powf(-e);
    } else {
        // τ = t_1 w^{1/(e+1)} absorbs the τ^e singularity
        let p = 1.0 / (e + 1.0);
        let front = t1.powf(e + 1.0) / (e + 1.0) * rg;
        let mut w0 = 0.0;
        let mut w1 = 0.0;
        for (x, w) in rule.0.iter().zip(&rule.1) {
            let z = 0.5 * (1.0 + x);
            let tau = t1 * z.powf(p);
            let k = (ti - tau).powf(sigma - 1.0) * 0.5 * w;
            let r = tau / t1;
            w0 += k * (1.0 - r);
            w1 += k * r;
        }
        row[0] += front * w0;
        row[1] += front * w1 * t1.powf(-e);
    }
    for j in 1..i {
        let (a, b) = (t[j], t[j + 1]);
        let h = b - a;
        let q = ti - b;
        let mut wa = 0.0;
        let mut wb = 0.0;
        if q >= h {
            for (x, w) in rule.0.iter().zip(&rule.1) {
                let tau = a + 0.5 * h * (1.0 + x);
                let f = (ti - tau).powf(sigma - 1.0) * tau.powf(e) * 0.5 * h * w;
                let r = (tau - a) / h;
                wa += f * (1.0 - r);
                wb += f * r;
            }
            wa *= rg;
            wb *= rg;
        } else {
            // s = t_i − τ, v = s^σ absorbs the kernel singularity
            let (vq, vp) = (q.powf(sigma), (ti - a).powf(sigma));
            let inv = 1.0 / sigma;
            for (x, w) in rule.0.iter().zip(&rule.1) {
                let v = vq + 0.5 * (vp - vq) * (1.0 + x);
                let s = v.powf(inv);
                let tau = (b - s) + q;
                let f = tau.powf(e) * 0.5 * (vp - vq) * w;
                let r = ((tau - a) / h).clamp(0.0, 1.0);
                wa += f * (1.0 - r);
                wb += f * r;
            }
            wa *= rg * inv;
            wb *= rg * inv;
        }
        row[j] += wa * a.powf(-e);
        row[j + 1] += wb * b.powf(-e);
    }
    Ok(())
}

/// `D_t^α(u − u(0))(t_i) = d/dt I^{1−α}(u − u(0))(t_i)`, obtained by
/// differentiating the product-integrated order-`(1−α)` integral of the
/// piecewise-linear reconstruction.
pub fn rl_derivative(alpha: FractionalOrder, u: &Trajectory) -> Result<Trajectory> {
    check_regular(u)?;
    let a = alpha.value();
    let s = 1.0 - a;
    let k1 = |x: f64| x.powf(s) * specfun::rgamma(s + 1.0);
    let t = u.times();
    let d = u.dim;
    let mut out = vec![0.0; u.values.len()];
    out[..d].fill(f64::NAN);
    for i in 1..u.len() {
        // d/dt of ∫ k(t−τ) φ_j(τ) dτ for the hat function φ_j, at t = t_i
        let dst = &mut out[i * d..(i + 1) * d];
        for j in 1..=i {
            let left = (k1(t[i] - t[j - 1]) - k1(t[i] - t[j])) / (t[j] - t[j - 1]);
            let right = if j < i { (k1(t[i] - t[j]) - k1(t[i] - t[j + 1])) / (t[j + 1] - t[j]) } else { 0.0 };
            let w = left - right;
            let u0 = u.value(0);
            for ((o, x), x0) in dst.iter_mut().zip(u.value(j)).zip(u0) {
                *o += w * (x - x0);
            }
        }
    }
    Trajectory::from_flat(u.grid.clone(), d, out, Origin::Undefined)
}

/// `(1/Γ(1−α)) ∫₀^{t_i} (t_i − τ)^{−α} u′(τ) dτ` with `u′` the piecewise
/// constant derivative of the linear reconstruction (L1 scheme).
pub fn caputo_derivative(alpha: FractionalOrder, u: &Trajectory) -> Result<Trajectory> {
    check_regular(u)?;
    let a = alpha.value();
    let s = 1.0 - a;
    let k1 = |x: f64| x.powf(s) * specfun::rgamma(s + 1.0);
    let t = u.times();
    let d = u.dim;
    let mut out = vec![0.0; u.values.len()];
    out[..d].fill(f64::NAN);
    for i in 1..u.len() {
        let dst = &mut out[i * d..(i + 1) * d];
        for j in 0..i {
            let h = t[j + 1] - t[j];
            let w = (k1(t[i] - t[j]) - k1(t[i] - t[j + 1])) / h;
            for ((o, x1), x0) in dst.iter_mut().zip(u.value(j + 1)).zip(u.value(j)) {
                *o += w * (x1 - x0);
            }
        }
    }
    Trajectory::from_flat(u.grid.clone(), d, out, Origin::Undefined)
}

fn check_regular(u: &Trajectory) -> Result<()> {
    if u.origin != Origin::Regular {
        return Err(Error::domain("fractional derivatives need a trajectory with a value at t = 0"));
    }
    if u.len() < 3 {
        return Err(Error::InvalidGrid("fractional derivatives need at least 3 nodes".into()));
    }
    Ok(())
}

/// Linear extrapolation of a component to `t = 0` from nodes 1 and 2.
pub fn extrapolate_to_origin(u: &Trajectory, k: usize) -> f64 {
    let t = u.times();
    let (t1, t2) = (t[1], t[2]);
    let (v1, v2) = (u.value(1)[k], u.value(2)[k]);
    v1 - (v2 - v1) / (t2 - t1) * t1
}

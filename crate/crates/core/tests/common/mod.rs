#![allow(dead_code)]

use serde_json::Value;

/// Values frozen by `tests/oracles/gen_oracles.py` (mpmath).
pub fn oracles() -> Value {
    serde_json::from_str(include_str!("../oracles/oracles.json")).expect("oracle file parses")
}

pub fn num(v: &Value, key: &str) -> f64 {
    v[key].as_f64().unwrap_or_else(|| panic!("oracle entry lacks {key}"))
}

pub fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(f64::MIN_POSITIVE)
}

/// Fine-grid oracle for `D^α(u − u₀) + λu = c`: the Volterra form
/// `u = u₀ + I^α(c − λu)` with product-trapezoidal weights on `nodes`,
/// solved implicitly node by node.
pub fn volterra_linear_oracle(lambda: f64, alpha: f64, u0: f64, c: f64, nodes: &[f64]) -> Vec<f64> {
    let g1 = fracevo::specfun::rgamma(alpha + 1.0);
    let g2 = fracevo::specfun::rgamma(alpha + 2.0);
    let k1 = |s: f64| s.powf(alpha) * g1;
    let k2 = |s: f64| s.powf(alpha + 1.0) * g2;
    let mut u = vec![u0; nodes.len()];
    for i in 1..nodes.len() {
        let t = nodes[i];
        let mut acc = 0.0;
        let mut wii = 0.0;
        for j in 0..i {
            let (a, b) = (t - nodes[j], t - nodes[j + 1]);
            let h = nodes[j + 1] - nodes[j];
            let total = k1(a) - k1(b);
            let right = (a * total - alpha * (k2(a) - k2(b))) / h;
            let left = total - right;
            acc += total * c - lambda * left * u[j];
            if j + 1 < i {
                acc -= lambda * right * u[j + 1];
            } else {
                wii = right;
            }
        }
        u[i] = (u0 + acc) / (1.0 + lambda * wii);
    }
    u
}

/// Classical RK4 for `u′ = f(u)` on `[0, t_end]` with `steps` steps,
/// returning a dense evaluator by linear interpolation.
pub fn rk4(f: impl Fn(f64) -> f64, u0: f64, t_end: f64, steps: usize) -> impl Fn(f64) -> f64 {
    let h = t_end / steps as f64;
    let mut u = vec![u0];
    let mut x = u0;
    for _ in 0..steps {
        let a = f(x);
        let b = f(x + 0.5 * h * a);
        let c = f(x + 0.5 * h * b);
        let d = f(x + h * c);
        x += h / 6.0 * (a + 2.0 * b + 2.0 * c + d);
        u.push(x);
    }
    move |t: f64| {
        let s = (t / h).clamp(0.0, steps as f64);
        let i = (s.floor() as usize).min(steps - 1);
        let r = s - i as f64;
        u[i] * (1.0 - r) + u[i + 1] * r
    }
}

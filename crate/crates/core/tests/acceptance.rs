//! Acceptance suite: one pass/fail line per criterion.

mod common;

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use fracevo::cli::{self, RunConfig};
use fracevo::dynamics::*;
use fracevo::fraccalc::*;
use fracevo::mild::*;
use fracevo::operators::*;
use fracevo::quad::integrate;
use fracevo::specfun::{gamma, wright_density, wright_moment, FractionalOrder, SeriesTolerance};

use common::{rel_err, rk4, volterra_linear_oracle};

fn order(a: f64) -> FractionalOrder {
    FractionalOrder::new(a).unwrap()
}

fn sv(v: &[f64]) -> StateVector {
    StateVector::new(v.to_vec()).unwrap()
}

fn registry(kind: Nonlinearity, op: &SpectralOperator) -> PerturbationSpec {
    PerturbationSpec::from_registry(&kind, op).unwrap()
}

fn graded(n: usize, alpha: FractionalOrder) -> SolverConfig {
    SolverConfig::new(make_graded_grid(1.0, n, default_grading(alpha)).unwrap())
}

fn preset(name: &str) -> RunConfig {
    RunConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("presets").join(format!("{name}.toml"))).unwrap()
}

fn max_over(n: usize, f: impl Fn(usize) -> f64) -> f64 {
    (0..n).map(f).fold(0.0, f64::max)
}

/// Three-point derivative on a nonuniform grid.
fn centered_difference(t: &[f64], u: &[f64], i: usize) -> f64 {
    let (h1, h2) = (t[i] - t[i - 1], t[i + 1] - t[i]);
    (h1 * h1 * u[i + 1] - h2 * h2 * u[i - 1] - (h1 * h1 - h2 * h2) * u[i]) / (h1 * h2 * (h1 + h2))
}

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn moment_identity() -> Verdict {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for a in [0.3, 0.5, 0.7] {
        let alpha = order(a);
        for g in [-0.5, 0.0, 1.0, 2.0] {
            let q = integrate(
                |th: f64| th.powf(g) * wright_density(alpha, th, SeriesTolerance::default()).unwrap(),
                0.0,
                80.0,
                1e-13,
                1e-10,
                4000,
            );
            worst = worst.max(rel_err(q.value, wright_moment(alpha, g).unwrap()));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(worst <= 1e-5 && secs < 5.0, format!("max rel err {worst:.2e}, {secs:.2} s"))
}

fn scalar_linear_oracle() -> Verdict {
    let start = Instant::now();
    let alpha = order(0.5);
    let p = MildProblem::linear(make_diagonal(&[1.0]).unwrap(), alpha, sv(&[1.0]), Forcing::zero(1)).unwrap();
    let sol = solve_linear(&p, &graded(1024, alpha)).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let fine = make_graded_grid(1.0, 8 * 1024, default_grading(alpha)).unwrap();
    let oracle = volterra_linear_oracle(1.0, 0.5, 1.0, 0.0, fine.nodes());
    let err = max_over(sol.trajectory.len(), |i| (sol.trajectory.value(i)[0] - oracle[8 * i]).abs());
    verdict(err <= 1e-4 && secs < 10.0, format!("max err {err:.2e}, solve {secs:.2} s"))
}

fn classical_limit() -> Verdict {
    let start = Instant::now();
    let op = make_diagonal(&[1.0]).unwrap();
    let b = truncate_perturbation(&registry(Nonlinearity::CubicDissipative { coefficient: 1.0 }, &op), 2.0).unwrap();
    let p = MildProblem::new(op, order(0.999), sv(&[1.0]), Forcing::zero(1), b).unwrap();
    let sol = solve_semilinear(&p, &SolverConfig::new(make_graded_grid(1.0, 512, 1.0).unwrap())).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let reference = rk4(|u| -u - u * u * u, 1.0, 1.0, 20000);
    let t = sol.trajectory.times();
    let err = max_over(t.len(), |i| (sol.trajectory.value(i)[0] - reference(t[i])).abs());
    verdict(err <= 1e-2 && secs < 10.0, format!("max err vs RK4 {err:.2e}, {secs:.2} s"))
}

fn picard_runs() -> Vec<(f64, Solution)> {
    let alpha = order(0.8);
    [1.0, 10.0, 100.0]
        .into_iter()
        .map(|l| {
            let op = make_diagonal(&[1.0]).unwrap();
            let b = registry(Nonlinearity::Linear { coefficient: l }, &op);
            let p = MildProblem::new(op, alpha, sv(&[1.0]), Forcing::zero(1), b).unwrap();
            let mut cfg = graded(1024, alpha);
            cfg.instrument = true;
            (l, solve_semilinear(&p, &cfg).unwrap())
        })
        .collect()
}

fn lipschitz_independence(runs: &[(f64, Solution)]) -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for (l, sol) in runs {
        let r = &sol.report;
        pass &= r.max_ratio <= 0.55 && r.total_iterations > 0;
        parts.push(format!("L={l}: {} iters, {} windows, max ratio {:.3}, μ≤{:.1}", r.total_iterations, r.windows.len(), r.max_ratio, r.max_mu()));
    }
    verdict(pass, parts.join("; "))
}

fn inverse_relation() -> Verdict {
    let a = order(0.5);
    let f = |t: f64| (3.0 * t).sin() + t * t;
    let errs: Vec<f64> = [64, 128, 256, 512]
        .iter()
        .map(|&n| {
            let u = Trajectory::scalar(make_graded_grid(1.0, n, 1.0).unwrap(), f).unwrap();
            let v = rl_derivative(a, &rl_fractional_integral(0.5, &u).unwrap()).unwrap();
            let t = v.times();
            max_over(t.len() - 1, |i| (v.value(i + 1)[0] - f(t[i + 1])).abs())
        })
        .collect();
    let orders: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let errs: Vec<String> = errs.iter().map(|e| format!("{e:.2e}")).collect();
    verdict(orders.iter().all(|o| *o >= 1.0), format!("errors [{}], orders {orders:.2?}", errs.join(", ")))
}

fn differentiability() -> Verdict {
    let alpha = order(0.5);
    let op = make_diagonal(&[1.0, 4.0]).unwrap();
    let b = registry(Nonlinearity::Combustion { coefficient: 1.0 }, &op);
    let f = Forcing::affine(vec![0.3, 0.1], vec![0.2, 0.0]);
    let p = MildProblem::new(op, alpha, sv(&[1.0, 0.5]), f, b).unwrap();
    let cfg = graded(1024, alpha);
    let d = solve_time_derivative(&p, &cfg).unwrap();
    let t = d.u.times();
    let mut fd_err: f64 = 0.0;
    for k in 0..2 {
        let u = d.u.component(k);
        for i in 1..t.len() - 1 {
            if t[i] >= 0.01 {
                let w = d.w.value(i)[k];
                fd_err = fd_err.max((centered_difference(t, &u, i) - w).abs() / w.abs().max(1e-3));
            }
        }
    }
    let semi = solve_semilinear(&p, &cfg).unwrap();
    let diff = d.u.max_abs_diff(&semi.trajectory).unwrap();
    verdict(fd_err <= 1e-2 && diff <= 1e-3, format!("FD rel err {fd_err:.2e} (t ≥ 0.01), U vs semilinear {diff:.2e}"))
}

fn maximum_principle() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let o = cli::run(&preset("combustion"), dir.path(), 0).unwrap();
    let r = o.max_principle.unwrap();
    verdict(
        r.premise_holds && r.min_value >= -1e-8 && r.luchko_holds,
        format!("min u {:.3e}, Luchko min {:.3e} over {} traces", r.min_value, r.luchko_min, r.luchko_traces),
    )
}

fn blowup_alternative() -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, want) in [("blowup-quadratic", "BlowUpDetected"), ("blowup-cubic", "GlobalToHorizon")] {
        let dir = tempfile::tempdir().unwrap();
        let o = cli::run(&preset(name), dir.path(), 0).unwrap();
        let c = o.continuation.unwrap();
        let finite = o.trajectory.as_ref().is_some_and(|u| u.flat().iter().all(|x| x.is_finite()));
        let status = serde_json::to_value(&c.status).unwrap();
        let ok = match &c.status {
            ContinuationStatus::BlowUpDetected { lower, upper, .. } => {
                want == "BlowUpDetected" && lower.is_finite() && upper.is_finite() && lower <= upper
            }
            ContinuationStatus::GlobalToHorizon => want == "GlobalToHorizon" && c.t_reached == 10.0,
        };
        pass &= ok && finite;
        parts.push(format!("{name}: {status} (finite: {finite})"));
    }
    verdict(pass, parts.join("; "))
}

fn volterra_bound(runs: &[(f64, Solution)]) -> Verdict {
    let alpha = 0.8;
    let mut pass = true;
    let mut checked = 0;
    let mut min_margin = f64::INFINITY;
    for (l, sol) in runs {
        for tr in sol.report.traces.iter().filter(|tr| tr.local_times.len() >= 3) {
            let grid = TimeGrid::from_nodes(tr.local_times.clone()).unwrap();
            let w = Trajectory::from_flat(grid, 1, tr.accumulated.clone(), Origin::Regular).unwrap();
            let r = volterra_bound_check(tr.first_increment, l / gamma(alpha).unwrap(), 1.0, alpha, &w).unwrap();
            pass &= r.conclusion_holds;
            min_margin = min_margin.min(r.min_margin);
            checked += 1;
        }
    }
    verdict(pass && checked > 0, format!("{checked} window traces, min margin {min_margin:.3e}"))
}

fn holder_exponents() -> Verdict {
    let alpha = order(0.5);
    let op = make_dirichlet_laplacian_1d(64, 1.0).unwrap();
    let opts = HolderFitOptions { h_min: Some(1e-8), h_max: Some(1e-3), ..Default::default() };
    let fit = |u0: Vec<f64>| {
        let p = MildProblem::linear(op.clone(), alpha, sv(&u0), Forcing::zero(64)).unwrap();
        let sol = solve_linear(&p, &graded(1024, alpha)).unwrap();
        holder_fit(&sol.trajectory, HolderIndices::new(1.0, 0.2).unwrap(), opts).unwrap().fitted_exponent.unwrap()
    };
    let mut e1 = vec![0.0; 64];
    e1[0] = 1.0;
    let eigen = fit(e1);
    let q = 0.5;
    let rough = fit((1..=64).map(|k| (k as f64).powf(-2.0 * q - 0.5)).collect());
    let a = alpha.value();
    verdict(
        (eigen - a).abs() <= 0.1 && (rough - a * q).abs() <= 0.1,
        format!("eigenvector {eigen:.3} (target {a}), q = {q} data {rough:.3} (target {})", a * q),
    )
}

fn power_estimates() -> Verdict {
    let ops = [
        ("diagonal", make_diagonal(&(1..=2000).map(|k| k as f64 * 5e-3).collect::<Vec<_>>()).unwrap()),
        ("laplacian", make_dirichlet_laplacian_1d(128, 1.0).unwrap()),
    ];
    let mut pass = true;
    let mut checks = 0;
    for (_, op) in &ops {
        let x = sv(&(0..op.dim()).map(|k| ((k * 7 + 3) % 11) as f64 - 5.0).collect::<Vec<_>>());
        let lmin = op.lambda_min();
        for i in 0..60 {
            let t = 10f64.powf(-6.0 + 7.0 * i as f64 / 59.0);
            let decay = op.apply_semigroup(t, &x).unwrap().norm();
            pass &= decay <= (-lmin * t).exp() * x.norm() * (1.0 + 1e-12);
            for delta in [0.25, 0.5, 1.0] {
                pass &= op.semigroup_power_estimate(delta, t).unwrap().holds();
                pass &= op.semigroup_increment_estimate(delta, t).unwrap().holds();
                checks += 2;
            }
        }
    }
    verdict(pass, format!("{checks} power/increment checks and 120 decay checks"))
}

#[test]
fn acceptance_criteria() {
    let runs = picard_runs();
    let results = [
        ("moment identity", moment_identity()),
        ("scalar linear oracle", scalar_linear_oracle()),
        ("classical limit", classical_limit()),
        ("Lipschitz-independent contraction", lipschitz_independence(&runs)),
        ("inverse relation", inverse_relation()),
        ("time differentiability", differentiability()),
        ("maximum principle", maximum_principle()),
        ("blow-up alternative", blowup_alternative()),
        ("Volterra bound", volterra_bound(&runs)),
        ("Hölder exponents", holder_exponents()),
        ("semigroup and power estimates", power_estimates()),
    ];
    // the raw handle bypasses libtest's capture so the lines show in every run
    let mut out = std::io::stdout().lock();
    for (i, (name, v)) in results.iter().enumerate() {
        let status = if v.pass { "PASS" } else { "FAIL" };
        writeln!(out, "criterion {:2} {status}: {name} ({})", i + 1, v.detail).unwrap();
    }
    drop(out);
    let failed: Vec<usize> = results.iter().enumerate().filter(|(_, (_, v))| !v.pass).map(|(i, _)| i + 1).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

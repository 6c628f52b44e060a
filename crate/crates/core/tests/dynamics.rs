mod common;

use approx::assert_relative_eq;
use fracevo::dynamics::*;
use fracevo::fraccalc::*;
use fracevo::mild::*;
use fracevo::operators::*;
use fracevo::specfun::{gamma, mittag_leffler, FractionalOrder, MittagLefflerParams, SeriesTolerance};
use proptest::prelude::*;

use common::oracles;

fn order(a: f64) -> FractionalOrder {
    FractionalOrder::new(a).unwrap()
}

fn sv(v: &[f64]) -> StateVector {
    StateVector::new(v.to_vec()).unwrap()
}

fn registry(kind: Nonlinearity, op: &SpectralOperator) -> PerturbationSpec {
    PerturbationSpec::from_registry(&kind, op).unwrap()
}

fn scalar_problem(lambda: f64, alpha: f64, u0: f64, kind: Nonlinearity) -> MildProblem {
    let op = make_diagonal(&[lambda]).unwrap();
    let b = registry(kind, &op);
    MildProblem::new(op, order(alpha), sv(&[u0]), Forcing::zero(1), b).unwrap()
}

fn combustion_problem(forcing_value: f64, u0_amplitude: f64) -> MildProblem {
    let op = make_dirichlet_laplacian_1d(32, 1.0).unwrap();
    let mut u0 = vec![0.0; 32];
    u0[0] = u0_amplitude;
    let f = op.transform(&vec![forcing_value; 32]).unwrap();
    let b = registry(Nonlinearity::Combustion { coefficient: 1.0 }, &op);
    MildProblem::new(op, order(0.5), sv(&u0), Forcing::constant(f.0), b).unwrap()
}

#[test]
fn truncation_projects_radially() {
    let op = make_diagonal(&[1.0, 1.0]).unwrap();
    let id = registry(Nonlinearity::Linear { coefficient: 1.0 }, &op);
    let t = truncate_perturbation(&id, 1.5).unwrap();
    assert_eq!(t.apply(0.0, &[3.0, 0.0]), vec![1.5, 0.0]);
    assert_eq!(t.apply(0.0, &[0.5, -1.0]), vec![0.5, -1.0]);
    assert!(t.derivative.is_none());
    let q = registry(Nonlinearity::Quadratic { coefficient: 1.0 }, &op);
    let tq = truncate_perturbation(&q, 2.0).unwrap();
    assert!(matches!(tq.lipschitz, Lipschitz::Global(l) if (l - 8.0).abs() < 1e-12));
    assert!(truncate_perturbation(&q, 0.0).is_err());
}

#[test]
fn quadratic_growth_blows_up() {
    let o = oracles();
    let range = o["blowup_quadratic"]["t_star_range"].as_array().unwrap();
    let (lo, hi) = (range[0].as_f64().unwrap(), range[1].as_f64().unwrap());
    let p = scalar_problem(0.1, 0.5, 2.0, Nonlinearity::Quadratic { coefficient: -1.0 });
    let r = continue_with_blowup(&p, &ContinuationConfig::new(10.0)).unwrap();
    let ContinuationStatus::BlowUpDetected { t_star_estimate, lower, upper } = r.status else {
        panic!("expected blow-up, got {:?}", r.status);
    };
    assert!(t_star_estimate > lo && t_star_estimate < hi, "{t_star_estimate}");
    assert!(lower <= t_star_estimate && t_star_estimate <= upper && upper < 10.0);
    assert!(r.final_norm > 1e8);
    assert!(r.trajectory.flat().iter().all(|x| x.is_finite()));
    let radii = &r.radius_history;
    assert!(radii.windows(2).all(|w| w[1] >= w[0] * 0.999));
}

#[test]
fn cubic_damping_is_global() {
    let p = scalar_problem(1.0, 0.5, 1.0, Nonlinearity::CubicDissipative { coefficient: 1.0 });
    let r = continue_with_blowup(&p, &ContinuationConfig::new(10.0)).unwrap();
    assert_eq!(r.status, ContinuationStatus::GlobalToHorizon);
    assert_eq!(r.t_reached, 10.0);
    assert_eq!(*r.trajectory.times().last().unwrap(), 10.0);
    assert!(r.trajectory.norms().iter().all(|n| *n <= 1.0 + 1e-9));
    let s = r.summary();
    assert_eq!(s.window_count, r.windows.len());
    let json = serde_json::to_value(&s).unwrap();
    assert_eq!(json["status"], "GlobalToHorizon");
}

#[test]
fn bounded_source_is_global() {
    let p = combustion_problem(0.1, 1.0);
    let r = continue_with_blowup(&p, &ContinuationConfig::new(2.0)).unwrap();
    assert_eq!(r.status, ContinuationStatus::GlobalToHorizon);
}

#[test]
fn window_length_depends_only_on_local_bound() {
    let p = scalar_problem(1.0, 0.5, 1.0, Nonlinearity::CubicDissipative { coefficient: 1.0 });
    let cfg = ContinuationConfig::new(10.0);
    let r = continue_with_blowup(&p, &cfg).unwrap();
    for w in &r.windows {
        if w.retries == 0 && w.t_start + w.length < 10.0 {
            let admitted = admitted_window_length(w.lipschitz, 0.5, cfg.growth_budget);
            assert!(w.length <= admitted * (1.0 + 1e-12));
        }
    }
    assert_eq!(admitted_window_length(5.0, 0.5, 1e4), admitted_window_length(5.0, 0.5, 1e4));
    assert!(admitted_window_length(10.0, 0.5, 1e4) < admitted_window_length(5.0, 0.5, 1e4));
}

#[test]
fn truncation_radius_does_not_matter_inside_the_ball() {
    let op = make_diagonal(&[1.0]).unwrap();
    let b = registry(Nonlinearity::CubicDissipative { coefficient: 1.0 }, &op);
    let cfg = SolverConfig::new(make_graded_grid(1.0, 1024, 1.0).unwrap());
    let solve = |m: f64| {
        let p = MildProblem::new(op.clone(), order(0.5), sv(&[1.0]), Forcing::zero(1), truncate_perturbation(&b, m).unwrap()).unwrap();
        solve_semilinear(&p, &cfg).unwrap().trajectory
    };
    let (a, c) = (solve(1.25), solve(2.5));
    assert!(a.norms().iter().all(|n| *n < 1.25));
    assert!(a.max_abs_diff(&c).unwrap() < 10.0 * cfg.picard_tol, "{}", a.max_abs_diff(&c).unwrap());
}

#[test]
fn continuation_rejects_bad_config() {
    let p = scalar_problem(1.0, 0.5, 1.0, Nonlinearity::CubicDissipative { coefficient: 1.0 });
    let mut cfg = ContinuationConfig::new(1.0);
    cfg.window_floor = 0.0;
    assert!(continue_with_blowup(&p, &cfg).is_err());
    assert!(continue_with_blowup(&p, &ContinuationConfig::new(-1.0)).is_err());
}

#[test]
fn volterra_bound_examples() {
    let g = make_graded_grid(1.0, 200, 1.5).unwrap();
    // b → 0: the bound reduces to a t^{μ−1}
    for mu in [1.0, 2.0] {
        let w = Trajectory::scalar(g.clone(), |t| 0.7 * t.powf(mu - 1.0)).unwrap();
        let r = volterra_bound_check(0.7, 1e-12, mu, 0.5, &w).unwrap();
        assert!(r.premise_holds && r.conclusion_holds);
        assert!(r.min_margin.abs() < 1e-9);
    }
    let zero = Trajectory::scalar(g.clone(), |_| 0.0).unwrap();
    let r = volterra_bound_check(1.0, 1.0, 1.0, 0.5, &zero).unwrap();
    assert!(r.premise_holds && r.conclusion_holds && r.min_margin > 0.0);
    assert!(volterra_bound_check(0.0, 1.0, 1.0, 0.5, &zero).is_err());
    let neg = Trajectory::scalar(g, |t| -t).unwrap();
    assert!(volterra_bound_check(1.0, 1.0, 1.0, 0.5, &neg).is_err());
}

#[test]
fn volterra_bound_is_sharp() {
    // w = a E_{1,ν}((bΓ(ν))^{1/ν} t) solves the inequality with equality
    let (a, b, nu) = (0.5, 2.0, 0.6);
    let g = make_graded_grid(1.0, 400, 2.0).unwrap();
    let scale = (b * gamma(nu).unwrap()).powf(1.0 / nu);
    let p = MittagLefflerParams::new(1.0, nu).unwrap();
    let exact = |t: f64| a * mittag_leffler(p, scale * t, SeriesTolerance::default()).unwrap();
    let below = Trajectory::scalar(g.clone(), |t| 0.99 * exact(t)).unwrap();
    assert!(volterra_bound_check(a, b, 1.0, nu, &below).unwrap().conclusion_holds);
    let above = Trajectory::scalar(g, |t| 1.01 * exact(t)).unwrap();
    let r = volterra_bound_check(a, b, 1.0, nu, &above).unwrap();
    assert!(!r.conclusion_holds && !r.premise_holds);
}

#[test]
fn picard_error_traces_satisfy_volterra_bound() {
    let alpha = 0.7;
    let op = make_diagonal(&[1.0]).unwrap();
    let b = registry(Nonlinearity::Linear { coefficient: 10.0 }, &op);
    let p = MildProblem::new(op, order(alpha), sv(&[1.0]), Forcing::zero(1), b).unwrap();
    let mut cfg = SolverConfig::new(make_graded_grid(1.0, 256, 2.0).unwrap());
    cfg.instrument = true;
    let sol = solve_semilinear(&p, &cfg).unwrap();
    assert!(!sol.report.traces.is_empty());
    for tr in &sol.report.traces {
        let grid = TimeGrid::from_nodes(tr.local_times.clone()).unwrap();
        let w = Trajectory::scalar(grid.clone(), |_| 0.0).unwrap();
        let w = Trajectory::from_flat(grid, 1, tr.accumulated.clone(), w.origin()).unwrap();
        let r = volterra_bound_check(tr.first_increment, 10.0 / gamma(alpha).unwrap(), 1.0, alpha, &w).unwrap();
        assert!(r.conclusion_holds, "window {}: {r:?}", tr.window);
    }
}

#[test]
fn holder_fit_of_linear_function() {
    let g = make_graded_grid(1.0, 400, 1.0).unwrap();
    let u = Trajectory::scalar(g, |t| t).unwrap();
    let r = holder_fit(&u, HolderIndices::new(1.0, 0.5).unwrap(), HolderFitOptions::default()).unwrap();
    assert_relative_eq!(r.weighted_sup, 1.0, max_relative = 1e-12);
    assert!((r.weighted_seminorm - 0.5).abs() < 1e-9);
    assert!((r.fitted_exponent.unwrap() - 1.0).abs() < 1e-6);
    assert_relative_eq!(r.norm(), 1.5, max_relative = 1e-8);
}

#[test]
fn holder_fit_of_constant_is_flat() {
    let g = make_graded_grid(1.0, 64, 1.0).unwrap();
    let u = Trajectory::scalar(g, |_| 2.0).unwrap();
    let r = holder_fit(&u, HolderIndices::new(0.8, 0.3).unwrap(), HolderFitOptions::default()).unwrap();
    assert_eq!(r.weighted_seminorm, 0.0);
    assert!(r.fitted_exponent.is_none());
    let short = Trajectory::scalar(make_graded_grid(1.0, 4, 1.0).unwrap(), |t| t).unwrap();
    assert!(holder_fit(&short, HolderIndices::new(0.8, 0.3).unwrap(), HolderFitOptions::default()).is_err());
}

#[test]
fn singular_profile_has_finite_weighted_norm() {
    let alpha = order(0.6);
    let idx = HolderIndices::for_integral_initial(alpha, 0.15).unwrap();
    assert!(idx.integral_initial_violations(alpha).is_empty());
    let norms: Vec<f64> = [128, 512]
        .iter()
        .map(|&n| {
            let g = make_graded_grid(1.0, n, 3.0).unwrap();
            let vals = g.nodes().iter().map(|&t| vec![if t == 0.0 { 1.0 } else { t.powf(-0.4) }]).collect();
            let u = Trajectory::with_origin(g, vals, Origin::Singular { exponent: -0.4 }).unwrap();
            holder_fit(&u, idx, HolderFitOptions::default()).unwrap().norm()
        })
        .collect();
    assert!(norms.iter().all(|n| n.is_finite() && *n < 10.0), "{norms:?}");
    assert!((norms[0] - norms[1]).abs() < 0.1 * norms[1]);
}

#[test]
fn index_conditions_name_the_inequality() {
    let alpha = order(0.5);
    let v = HolderIndices::new(0.9, 0.6).unwrap().semilinear_violations(alpha);
    assert!(v.iter().any(|m| m.starts_with("β < α required")), "{v:?}");
    let v = HolderIndices::new(0.3, 0.1).unwrap().semilinear_violations(alpha);
    assert!(v.iter().any(|m| m.contains("1 − α")));
    assert!(HolderIndices::new(0.9, 0.3).unwrap().semilinear_violations(alpha).is_empty());
    let mut idx = HolderIndices::for_integral_initial(alpha, 0.1).unwrap();
    idx.gamma = Some(0.3);
    assert!(idx.integral_initial_violations(alpha).iter().any(|m| m.starts_with("0 < γ < α/2 required")));
    assert!(HolderIndices::new(0.5, 0.5).is_err());
}

#[test]
fn combustion_solution_stays_nonnegative() {
    let p = combustion_problem(0.1, 1.0);
    let cfg = SolverConfig::new(make_graded_grid(1.0, 512, default_grading(p.alpha)).unwrap());
    let sol = solve_semilinear(&p, &cfg).unwrap();
    let f = p.op.inverse_transform(&sv(&p.forcing.eval(0.0))).unwrap();
    let u0 = p.op.inverse_transform(&p.u0).unwrap();
    let r = max_principle_check(&p.op, p.alpha, &sol.trajectory, &f, &u0).unwrap();
    assert!(r.premise_holds && r.nonnegative && r.luchko_holds, "{r:?}");
    assert!(r.min_value >= -1e-8);
    assert_eq!(r.luchko_traces, 64);
}

#[test]
fn zero_data_gives_zero_minimum() {
    let p = combustion_problem(0.0, 0.0);
    let cfg = SolverConfig::new(make_graded_grid(1.0, 64, 2.0).unwrap());
    let sol = solve_semilinear(&p, &cfg).unwrap();
    let z = vec![0.0; 32];
    let r = max_principle_check(&p.op, p.alpha, &sol.trajectory, &z, &z).unwrap();
    assert!(r.nonnegative && r.luchko_holds);
    assert_eq!(r.min_value, 0.0);
}

#[test]
fn negative_forcing_produces_interior_witness() {
    let p = combustion_problem(-1.0, 0.0);
    let cfg = SolverConfig::new(make_graded_grid(1.0, 128, 2.0).unwrap());
    let sol = solve_semilinear(&p, &cfg).unwrap();
    let f = vec![-1.0; 32];
    let r = max_principle_check(&p.op, p.alpha, &sol.trajectory, &f, &vec![0.0; 32]).unwrap();
    assert!(!r.premise_holds && !r.nonnegative);
    let w = r.witness.unwrap();
    assert!(w.t > 0.0 && w.x > 0.0 && w.x < 1.0 && w.value < 0.0);
    // B vanishes for u ≤ 0, so the solution is minus the linear f ≡ 1 response
    let lin = MildProblem::linear(p.op.clone(), p.alpha, StateVector::zeros(32), Forcing::constant(p.op.transform(&vec![1.0; 32]).unwrap().0)).unwrap();
    let pos = solve_linear(&lin, &cfg).unwrap().trajectory;
    let sum = sol.trajectory.flat().iter().zip(pos.flat()).map(|(a, b)| (a + b).abs()).fold(0.0, f64::max);
    assert!(sum < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn truncated_square_is_globally_lipschitz(m in 0.2f64..3.0, a in prop::collection::vec(-1.0f64..1.0, 3), b in prop::collection::vec(-1.0f64..1.0, 3), ra in 0.0f64..3.0, rb in 0.0f64..3.0) {
        let op = make_diagonal(&[1.0, 1.0, 1.0]).unwrap();
        let q = registry(Nonlinearity::Quadratic { coefficient: 1.0 }, &op);
        let t = truncate_perturbation(&q, m).unwrap();
        let scale = |v: &[f64], r: f64| { let n = norm(v).max(1e-12); v.iter().map(|x| x / n * r * m).collect::<Vec<_>>() };
        let (u, v) = (scale(&a, ra), scale(&b, rb));
        let lhs = dist(&t.apply(0.0, &u), &t.apply(0.0, &v));
        let l = q.lipschitz.on_ball(m);
        prop_assert!(lhs <= 2.0 * l * dist(&u, &v) * (1.0 + 1e-12) + 1e-15);
        if norm(&u) <= m {
            prop_assert_eq!(t.apply(0.0, &u), q.apply(0.0, &u));
        }
    }

    #[test]
    fn seminorm_obeys_the_embedding(beta in 0.05f64..0.9, shrink in 0.1f64..0.95, p in 0.2f64..2.0) {
        let g = make_graded_grid(1.0, 48, 1.5).unwrap();
        let u = Trajectory::scalar(g, |t| t.powf(p) * (3.0 * t).cos()).unwrap();
        let opts = HolderFitOptions::default();
        let hi = holder_fit(&u, HolderIndices::new(1.0, beta).unwrap(), opts).unwrap();
        let lo = holder_fit(&u, HolderIndices::new(1.0, beta * shrink).unwrap(), opts).unwrap();
        prop_assert!(lo.weighted_seminorm <= hi.weighted_seminorm.max(2.0 * hi.weighted_sup) * (1.0 + 1e-12));
    }
}

mod common;

use proptest::prelude::*;
use sheetgame::calculus::{ito_integral, lebesgue_integral, Field};
use sheetgame::game::{
    check_nash, solve_adjoint_linear, standard_directions, AdjointConvention, Controls, LqModel, NashOptions, Player,
    Policy,
};
use sheetgame::pollution::{
    example1_reduction, solve_example1, solve_example2, symmetric_case_report, Bilinear, Example1Model, Example1Params,
    Example1Strategy, Example2Model, Example2Params, Example2Variant, SolveOptions,
};
use sheetgame::process::{simulate_process, ProcessSpec};
use sheetgame::stats::MeanStat;
use sheetgame::{GridSpec, SheetEnsemble};

use common::*;

fn quiet() -> SolveOptions {
    SolveOptions { nash: None, ..Default::default() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn example1_closed_form_matches_golden_section(a1 in 0.5f64..2.0, a2 in 0.5f64..2.0, c1 in 0.5f64..2.0, c2 in 0.5f64..2.0, y0 in -2.0f64..2.0) {
        let params = Example1Params { a: [a1, a2], c: [c1, c2], sigma: 0.0, y0 };
        let sol = solve_example1(&params, Example1Strategy::Reduced, GridSpec::new(1.0, 2.0, 4, 3).unwrap(), 0, 1, &quiet()).unwrap();
        let closed = example1_closed_form(params.a, params.c, y0, 2.0);
        let golden = golden_section(|u| example1_total_cost(params.a, params.c, y0, 2.0, u), -20.0, 20.0, 1e-12);
        let scale = closed.abs().max(1e-3);
        prop_assert!((closed - golden).abs() <= 1e-6 * scale);
        for u in sol.u1.constant() {
            prop_assert!((u - closed).abs() <= 1e-6 * scale, "{u} vs {closed}");
        }
    }

    #[test]
    fn example1_controls_are_proportional(a1 in 0.5f64..2.0, a2 in 0.5f64..2.0, c1 in 0.5f64..2.0, c2 in 0.5f64..2.0, sigma in 0.0f64..1.5) {
        let params = Example1Params { a: [a1, a2], c: [c1, c2], sigma, y0: 1.0 };
        let (_, _, ratio) = example1_reduction(&params).unwrap();
        prop_assert!((ratio - c2 * a1 / (c1 * a2)).abs() <= 1e-14 * ratio);
        let sol = solve_example1(&params, Example1Strategy::Reduced, GridSpec::unit(4), 0, 2, &quiet()).unwrap();
        for (x, y) in sol.u1.as_vec().iter().zip(sol.u2.as_vec()) {
            prop_assert_eq!(y, ratio * x);
        }
        // p₂ = (c₂/c₁)·p₁
        for (x, y) in sol.p[0].as_vec().iter().zip(sol.p[1].as_vec()) {
            prop_assert!((y - c2 / c1 * x).abs() <= 1e-12 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn example1_stochastic_weights_match_closed_form(sigma in 0.1f64..2.0, c1 in 0.5f64..2.0, n in 2usize..6) {
        let params = Example1Params { c: [c1, 1.0], sigma, ..Default::default() };
        let (alpha, beta, ratio) = example1_reduction(&params).unwrap();
        let coeff = -(alpha / (2.0 * beta)) * 2.0 * (c1 + 1.0);
        let kappa = coeff * (1.0 + ratio);
        let g = GridSpec::unit(n);
        let sol = solve_example1(&params, Example1Strategy::Reduced, g, 0, 1, &quiet()).unwrap();
        for z in g.nodes() {
            let row = sol.u1.row(g.node(z.i, z.j));
            for c in g.cells() {
                let expect = if c.i < z.i && c.j < z.j {
                    coeff * example1_weight(sigma, kappa, g.cell_area(), n, n, c.i, c.j)
                } else {
                    0.0
                };
                prop_assert!((row[g.cell(c.i, c.j)] - expect).abs() <= 1e-7 * (1.0 + expect.abs()));
            }
        }
    }

    #[test]
    fn symmetric_parameters_give_identical_controls(s in 0.3f64..2.0, sig in 0.0f64..1.0, src in -1.0f64..2.0, y0 in -1.0f64..1.0, quadrant in any::<bool>()) {
        let params = Example2Params {
            alpha: [s, s],
            beta: [s, s],
            sigma: Bilinear { c0: sig, ct: 0.3 * sig, ..Default::default() },
            source: Bilinear { c0: src, cx: 0.5, ..Default::default() },
            y0,
        };
        let variant = if quadrant { Example2Variant::Quadrant } else { Example2Variant::default() };
        let r = symmetric_case_report(&params, variant, GridSpec::unit(4), 1, 1, &quiet()).unwrap();
        prop_assert!(r.symmetric_params);
        prop_assert!(r.max_deviation <= 1e-8);
        if let Some(res) = r.superposition_residual {
            prop_assert!(res <= 1e-6);
        }
    }

    #[test]
    fn example2_quadrant_is_the_discrete_nash_point(a1 in 0.5f64..1.5, a2 in 0.5f64..1.5, b1 in 0.5f64..2.0, b2 in 0.5f64..2.0, src in 0.0f64..2.0) {
        let params = Example2Params { alpha: [a1, a2], beta: [b1, b2], source: Bilinear { c0: src, ct: 0.5, ..Default::default() }, ..Default::default() };
        let g = GridSpec::unit(4);
        let sol = solve_example2(&params, Example2Variant::Quadrant, g, 0, 1, &quiet()).unwrap();
        let oracle = Example2Oracle::new(4, 4, 1.0, 1.0, params.alpha, params.beta, 0.0, |t, _| src + 0.5 * t);
        let (o1, o2, _) = oracle.nash(1e-13, 500);
        for c in g.cells() {
            let n = g.node(c.i, c.j);
            let k = g.cell(c.i, c.j);
            prop_assert!((sol.u1.constant()[n] - o1[k]).abs() <= 1e-6);
            prop_assert!((sol.u2.constant()[n] - o2[k]).abs() <= 1e-6);
        }
    }

    #[test]
    fn deterministic_limit_is_quadrature(a in -1.0f64..1.0, b in -1.0f64..1.0, y0 in -1.0f64..1.0, nt in 1usize..7, nx in 1usize..7) {
        let g = GridSpec::new(1.5, 0.5, nt, nx).unwrap();
        let e = SheetEnsemble::sample(g, 3, 1).unwrap();
        let spec = ProcessSpec::new(y0, move |p, _| a + b * p.t * p.x, |_, _| 0.0).state_free();
        let y = simulate_process(&spec, &e, 0).unwrap();
        let alpha = Field::from_fn(g, |p| a + b * p.t * p.x);
        for z in g.nodes() {
            let q = y0 + lebesgue_integral(&alpha, z).unwrap();
            prop_assert!((y.at(z) - q).abs() <= 1e-10 * (1.0 + q.abs()));
        }
    }
}

#[test]
fn ito_isometry_for_three_integrands() {
    let g = GridSpec::unit(8);
    let e = SheetEnsemble::sample(g, 31, 20_000).unwrap();
    let z = g.corner();
    let fams: [fn(f64, f64, f64) -> f64; 3] = [|t, x, _| 1.0 + t * x, |_, _, b| b, |t, _, b| (2.0 * b).sin() + t];
    for phi in fams {
        let mut lhs = Vec::new();
        let mut rhs = Vec::new();
        for p in 0..e.n_paths() {
            let b = e.values(p);
            let vals: Vec<f64> = g.nodes().map(|n| phi(g.t(n.i), g.x(n.j), b[g.node(n.i, n.j)])).collect();
            let f = Field::from_values(g, vals, true).unwrap();
            let i = ito_integral(&f, &e, p, z).unwrap();
            lhs.push(i * i);
            rhs.push(lebesgue_integral(&f.map(|v| v * v), z).unwrap());
        }
        let d: Vec<f64> = lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect();
        let s = MeanStat::from_samples(&d);
        assert!(s.within(0.0, 3.0), "{} se {}", s.mean, s.stderr);
    }
}

#[test]
fn adjoint_terminal_condition_is_exact() {
    let g = GridSpec::unit(4);
    let e = SheetEnsemble::sample(g, 8, 300).unwrap();
    let model = LqModel { s0: 0.5, a0: 0.2, ..Default::default() };
    let controls = Controls::new(Policy::constant(g, 0.1), Policy::constant(g, -0.2));
    for conv in [AdjointConvention::Quadrant, AdjointConvention::Complement { p_sign: 1.0 }] {
        let adj = solve_adjoint_linear(&model, Player::One, &controls, &e, conv).unwrap();
        assert!(adj.terminal_residual <= 1e-12, "{conv:?}: {}", adj.terminal_residual);
    }
}

#[test]
fn solutions_have_small_l_residual_and_monotone_picard() {
    let g = GridSpec::unit(6);
    let s1 = solve_example1(&Example1Params { sigma: 0.7, ..Default::default() }, Example1Strategy::BestResponse, g, 1, 10, &quiet())
        .unwrap();
    let s2 = solve_example2(&Example2Params::default(), Example2Variant::default(), g, 1, 1, &quiet()).unwrap();
    for s in [&s1, &s2] {
        assert!(s.l_residual <= 1e-8);
        assert!(s.trace.residuals.windows(2).all(|w| w[1] <= w[0]));
        assert!(s.trace.final_residual() <= 1e-8);
    }
}

#[test]
fn convex_equilibria_survive_deviations() {
    let g = GridSpec::unit(8);
    let p1 = Example1Params { sigma: 1.0, ..Default::default() };
    let s1 = solve_example1(&p1, Example1Strategy::BestResponse, g, 4, 2_000, &SolveOptions::default()).unwrap();
    assert!(s1.nash.as_ref().unwrap().pass);
    let p2 = Example2Params { sigma: Bilinear::constant(0.5), ..Default::default() };
    let s2 = solve_example2(&p2, Example2Variant::Quadrant, g, 4, 2_000, &quiet()).unwrap();
    let e = SheetEnsemble::sample(g, 9, 2_000).unwrap();
    let r = check_nash(&Example2Model(p2), &s2.controls(), &standard_directions(g), &e, &NashOptions::default()).unwrap();
    assert!(r.pass, "{:?}", r.worst());
}

#[test]
fn reduced_example1_strategy_is_not_a_nash_point() {
    let g = GridSpec::unit(4);
    let p = Example1Params::default();
    let s = solve_example1(&p, Example1Strategy::Reduced, g, 0, 1, &quiet()).unwrap();
    let e = SheetEnsemble::sample(g, 0, 1).unwrap();
    let r = check_nash(&Example1Model(p), &s.controls(), &standard_directions(g), &e, &NashOptions::default()).unwrap();
    assert!(!r.pass);
    // a player gains by moving from -0.4 toward its best response -1/3
    assert!(r.worst().unwrap().delta_j < 0.0);
}

//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

use std::path::PathBuf;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use netdiff::analysis::vertex_limit::{vertex_limit_study, VertexLimitSetup};
use netdiff::analysis::{
    comparison_bound, extinction_exponents, extinction_fit_series, interpolate,
    junction_balance_sum, kirchhoff_residual, l2_error_squared,
};
use netdiff::assembly::{build_junction_system, junction_flux_balance, DiscreteState, Problem};
use netdiff::geometry::{presets, EdgeSpec, LoopEdge, PartitionedDomain};
use netdiff::mesh::{mesh_domain, MeshKind};
use netdiff::model::{CouplingCoefficients, FluxLaw, FluxVariant, ModelSpec, ReactionLaw, Sources};
use netdiff::timestepper::{run, run_with, solve_vertex_ode_exact, PiecewiseLinear};
use netdiff::RunConfig;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn config(name: &str, overrides: &[&str]) -> RunConfig {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "configs", name]
        .iter()
        .collect();
    let o: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
    RunConfig::load(&path, &o).unwrap_or_else(|e| panic!("{name}: {e}"))
}

// 1 --------------------------------------------------------------------------

/// Vertex 0 at the origin joined to `d` hull vertices; `d` triangular sectors.
fn fan(d: usize) -> PartitionedDomain {
    let mut pos = vec![[0.0, 0.0]];
    for m in 0..d {
        let a = std::f64::consts::TAU * m as f64 / d as f64;
        pos.push([a.cos(), a.sin()]);
    }
    let mut edges: Vec<EdgeSpec> = (0..d).map(|m| EdgeSpec::new(0, m + 1)).collect();
    edges.extend((0..d).map(|m| EdgeSpec::new(m + 1, (m + 1) % d + 1)));
    let loops = (0..d)
        .map(|m| {
            vec![
                LoopEdge::forward(m),
                LoopEdge::forward(d + m),
                LoopEdge::reversed((m + 1) % d),
            ]
        })
        .collect();
    PartitionedDomain::new(pos, edges, loops).unwrap()
}

fn junction_algebra() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let domains: Vec<PartitionedDomain> = vec![presets::unit_square(), fan(3), fan(4), fan(5)];
    let mut worst_col = 0.0f64;
    let mut row_mismatch = 0;
    let mut dominance_failures = 0;
    let mut a5_draws = 0;
    for draw in 0..1000 {
        let domain = &domains[draw % 4];
        let at: Vec<usize> = domain
            .edges_at_vertex(0)
            .unwrap()
            .iter()
            .map(|e| e.0)
            .collect();
        let symmetric = draw % 2 == 0;
        let mut c = CouplingCoefficients::default();
        for (n, &a) in at.iter().enumerate() {
            for &b in &at[n + 1..] {
                let g = rng.gen_range(0.0..2.0);
                let h = if symmetric {
                    g
                } else {
                    rng.gen_range(0.0..2.0)
                };
                c.gamma.insert((0, a, b), g);
                c.gamma.insert((0, b, a), h);
            }
            let delta = if draw % 3 == 0 {
                0.0
            } else {
                rng.gen_range(0.0..1.5)
            };
            c.delta.insert((0, a), delta);
            c.lambda.insert(
                (0, a),
                if delta == 0.0 {
                    0.0
                } else {
                    rng.gen_range(0.0..1.5)
                },
            );
        }
        let js = build_junction_system(domain, &c, 0).unwrap();
        worst_col = js
            .column_sums()
            .iter()
            .fold(worst_col, |m, v| m.max(v.abs()));
        let rows_zero = js.row_sums().iter().all(|v| v.abs() <= 1e-14);
        if rows_zero != symmetric {
            row_mismatch += 1;
        }
        // the transfer inequality, straight from the coefficient table
        let a5 = at.iter().all(|&j| {
            let out: f64 = at
                .iter()
                .filter(|&&m| m != j)
                .map(|&m| c.gamma[&(0, j, m)])
                .sum();
            let inc: f64 = at
                .iter()
                .filter(|&&m| m != j)
                .map(|&m| c.gamma[&(0, m, j)])
                .sum();
            c.delta[&(0, j)] + out >= inc
        });
        if a5 {
            a5_draws += 1;
            if !js.is_column_dominant() {
                dominance_failures += 1;
            }
        }
    }
    verdict(
        worst_col <= 1e-14 && row_mismatch == 0 && dominance_failures == 0,
        format!(
            "max |column sum| {worst_col:.1e}, row-sum/symmetry mismatches {row_mismatch}, \
             column dominance failures {dominance_failures} of {a5_draws} draws satisfying the transfer inequality"
        ),
    )
}

// 2 --------------------------------------------------------------------------

fn mass_conservation() -> Verdict {
    let cfg = config(
        "mass.json",
        &["discretization.t_end=1.0", "discretization.dt=0.01"],
    );
    let p = cfg.prepare().unwrap();
    let series = run_with(&p.problem, &p.initial, &p.solver, false, &mut |_, _, _| {
        Ok(())
    })
    .unwrap();
    let m0 = series.diagnostics[0].total_mass;
    let drift = series
        .diagnostics
        .iter()
        .map(|d| (d.total_mass - m0).abs())
        .fold(0.0, f64::max)
        / m0.abs();
    verdict(
        drift <= 1e-8 && series.stats.steps == 100,
        format!(
            "{} steps, max relative drift {drift:.2e}",
            series.stats.steps
        ),
    )
}

// 3 --------------------------------------------------------------------------

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    rec(
        f,
        a,
        b,
        fa,
        fm,
        fb,
        (b - a) / 6.0 * (fa + 4.0 * fm + fb),
        tol,
        40,
    )
}

fn vertex_ode_exactness() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let n = rng.gen_range(2..10);
        let mut times = vec![rng.gen_range(0.0..0.3)];
        for _ in 1..n {
            let last = *times.last().unwrap();
            times.push(last + rng.gen_range(0.02..0.8));
        }
        let values: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let trace = PiecewiseLinear::new(times.clone(), values).unwrap();
        let lambda = rng.gen_range(0.0..4.0);
        let z0 = rng.gen_range(-2.0..2.0);
        let t = rng.gen_range(0.05..1.2) * times[n - 1] + 0.1;
        let exact = solve_vertex_ode_exact(z0, lambda, &trace, t);
        // z(t) = z0 e^{-lambda t} + int_0^t e^{-lambda (t - s)} S(s) ds, split at the trace knots
        let f = |s: f64| (-lambda * (t - s)).exp() * trace.eval(s);
        let mut knots = vec![0.0];
        knots.extend(times.iter().copied().filter(|&s| s > 0.0 && s < t));
        knots.push(t);
        let mut oracle = z0 * (-lambda * t).exp();
        for w in knots.windows(2) {
            oracle += adaptive_simpson(&f, w[0], w[1], 1e-14);
        }
        worst = worst.max((exact - oracle).abs());
    }
    verdict(worst <= 1e-10, format!("50 traces, max error {worst:.2e}"))
}

// 4 --------------------------------------------------------------------------

fn mms_config(h: f64, dt: f64, t_end: f64) -> RunConfig {
    let json = format!(
        r#"{{
        "geometry": {{
            "vertices": [[0, 0], [1, 0], [1, 1], [0, 1]],
            "edges": [{{"source": 0, "terminal": 1}}, {{"source": 1, "terminal": 2}},
                      {{"source": 2, "terminal": 3}}, {{"source": 3, "terminal": 0}}],
            "subdomains": [[0, 1, 2, 3]]
        }},
        "model": {{
            "p": 2,
            "coefficients": {{"uniform": {{"alpha": 1, "beta": 1, "gamma": 1, "delta": 0, "lambda": 0}}}},
            "sources": {{
                "subdomain": [{{"id": 0, "expr": "(2 * pi * pi - 1) * cos(pi * x) * cos(pi * y) * exp(-t)"}}],
                "edge": [
                    {{"id": 0, "expr": "(pi * pi - 1) * cos(pi * x) * cos(pi * y) * exp(-t)"}},
                    {{"id": 1, "expr": "(pi * pi - 1) * cos(pi * x) * cos(pi * y) * exp(-t)"}},
                    {{"id": 2, "expr": "(pi * pi - 1) * cos(pi * x) * cos(pi * y) * exp(-t)"}},
                    {{"id": 3, "expr": "(pi * pi - 1) * cos(pi * x) * cos(pi * y) * exp(-t)"}}
                ]
            }}
        }},
        "discretization": {{"h": {h}, "mesh": "structured", "dt": {dt}, "t_end": {t_end}}},
        "initial": {{"u": "cos(pi * x) * cos(pi * y)", "w": "cos(pi * x) * cos(pi * y)"}}
    }}"#
    );
    RunConfig::from_json(&json).unwrap()
}

fn mms_error(h: f64, dt: f64, t_end: f64) -> f64 {
    let p = mms_config(h, dt, t_end).prepare().unwrap();
    let s = run_with(&p.problem, &p.initial, &p.solver, false, &mut |_, _, _| {
        Ok(())
    })
    .unwrap();
    let u = s.final_state().unwrap();
    let decay = (-t_end).exp();
    let exact = |x: f64, y: f64| {
        (std::f64::consts::PI * x).cos() * (std::f64::consts::PI * y).cos() * decay
    };
    let (eu, ew) = l2_error_squared(&p.problem, u, &exact, &exact);
    (eu + ew).sqrt()
}

fn mms_convergence() -> Verdict {
    let t_end = 0.1;
    let hs = [0.2, 0.1, 0.05];
    let eh: Vec<f64> = hs.iter().map(|&h| mms_error(h, 1e-4, t_end)).collect();
    let space = (eh[1] / eh[2]).log2();
    // longer horizon so the time error dominates the spatial floor of the fine mesh
    let dts = [0.1, 0.05, 0.025];
    let et: Vec<f64> = dts.iter().map(|&dt| mms_error(0.025, dt, 1.0)).collect();
    let time = (et[1] / et[2]).log2();
    verdict(
        space >= 1.9 && time >= 0.9,
        format!(
            "spatial errors {:.3e} {:.3e} {:.3e} (order {space:.3}), temporal errors {:.3e} {:.3e} {:.3e} (order {time:.3})",
            eh[0], eh[1], eh[2], et[0], et[1], et[2]
        ),
    )
}

// 5 --------------------------------------------------------------------------

fn bound_check(mesh: MeshKind) -> (f64, f64) {
    let kind = match mesh {
        MeshKind::Structured => "discretization.mesh=structured",
        MeshKind::Delaunay => "discretization.mesh=delaunay",
    };
    let cfg = config("boundedness.json", &[kind]);
    let p = cfg.prepare().unwrap();
    let nedges = p.problem.domain.edges().len();
    let mut edge_sup = vec![0.0f64; nedges];
    let mut sup_u = 0.0f64;
    run_with(&p.problem, &p.initial, &p.solver, false, &mut |_, _, s| {
        for (j, w) in s.w.iter().enumerate() {
            edge_sup[j] = w.iter().fold(edge_sup[j], |m, v| m.max(v.abs()));
        }
        sup_u = s.u.iter().flatten().fold(sup_u, |m, v| m.max(v.abs()));
        Ok(())
    })
    .unwrap();
    let initial_sup: Vec<f64> = p
        .initial
        .u
        .iter()
        .map(|u| u.iter().fold(0.0, |m: f64, v| m.max(v.abs())))
        .collect();
    let bound = comparison_bound(&p.problem.model.coefficients, &edge_sup, &initial_sup).unwrap();
    (sup_u, bound)
}

fn boundedness() -> Verdict {
    let (sup_s, m_s) = bound_check(MeshKind::Structured);
    let (sup_d, m_d) = bound_check(MeshKind::Delaunay);
    let flag = if sup_d <= m_d + 1e-6 {
        "within"
    } else {
        "above"
    };
    verdict(
        sup_s <= m_s + 1e-6,
        format!(
            "structured mesh: sup |u| {sup_s:.10} vs bound {m_s:.10}; delaunay mesh (reported only): sup |u| {sup_d:.10}, {flag} bound {m_d:.10}"
        ),
    )
}

// 6 --------------------------------------------------------------------------

fn extinction() -> Verdict {
    let cfg = config("extinction.json", &[]);
    let sigma = cfg.model.subdomain_reaction.exponent;
    let exps = extinction_exponents(cfg.model.p, sigma, 2).unwrap();
    let p = cfg.prepare().unwrap();
    let series = run_with(&p.problem, &p.initial, &p.solver, false, &mut |_, _, _| {
        Ok(())
    })
    .unwrap();
    let fit = extinction_fit_series(&series, &exps);
    let t_end = cfg.discretization.t_end;
    let pass = (exps.s2 - 0.8).abs() < 1e-15
        && fit.t_extinct.is_some_and(|t| t < t_end)
        && fit.monotone
        && fit.max_second_difference <= 1e-8
        && fit.r_squared >= 0.99;
    verdict(
        pass,
        format!(
            "s2 {:.3}, t_extinct {:?}, monotone {}, max second difference {:.2e} over {} of {} samples, R^2 {:.5}",
            exps.s2, fit.t_extinct, fit.monotone, fit.max_second_difference, fit.fit_samples, fit.window_samples, fit.r_squared
        ),
    )
}

// 7 --------------------------------------------------------------------------

fn scheme_cross_validation() -> Verdict {
    let dt = 5e-6;
    let t_end = format!("discretization.t_end={}", 10.0 * dt);
    let dts = format!("discretization.dt={dt}");
    let mono = config(
        "mass.json",
        &[&t_end, &dts, "discretization.scheme=monolithic"],
    );
    let split = config(
        "mass.json",
        &[&t_end, &dts, "discretization.scheme=splitting"],
    );
    let pm = mono.prepare().unwrap();
    let ps = split.prepare().unwrap();
    let populated = pm.problem.junctions.iter().all(|j| j.is_populated());
    let a = run(&pm.problem, &pm.initial, &pm.solver).unwrap();
    let b = run(&ps.problem, &ps.initial, &ps.solver).unwrap();
    let diff = a
        .states
        .iter()
        .zip(&b.states)
        .map(|(x, y)| x.max_abs_diff(y))
        .fold(0.0, f64::max);
    verdict(
        populated && diff <= 1e-8 && a.stats.steps == 10,
        format!(
            "{} steps of dt {dt:e}, max difference {diff:.2e}, {} fixed-point sweeps",
            a.stats.steps, b.stats.fixed_point_iterations
        ),
    )
}

// 8 --------------------------------------------------------------------------

fn kirchhoff_problem(h: f64) -> Problem {
    let d = presets::three_cell_pentagon();
    let mut c = CouplingCoefficients::default();
    c.fill_missing(
        &d,
        &netdiff::model::UniformCoefficients {
            alpha: 1.0,
            beta: 1.0,
            gamma: 0.7,
            delta: 0.0,
            lambda: 0.0,
        },
    );
    let law = FluxLaw::new(2.0, FluxVariant::PurePLaplacian);
    let model = ModelSpec {
        subdomain_flux: law,
        edge_flux: law,
        subdomain_reaction: ReactionLaw::zero(),
        edge_reaction: ReactionLaw::zero(),
        coefficients: c,
        sources: Sources::default(),
    };
    let disc = mesh_domain(&d, h).unwrap();
    Problem::new(d, disc, model).unwrap()
}

fn kirchhoff_reduction() -> Verdict {
    // vertex 0 of the pentagon is interior, unpopulated, with symmetric transfer
    let k = 0;
    let mut worst = 0.0f64;
    let mut worst_scale = 0.0f64;
    let mut residuals = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for &h in &[0.2, 0.1, 0.05] {
        let p = kirchhoff_problem(h);
        let c = p.domain.vertex(k).unwrap().position;
        // smooth state whose gradient vanishes at the vertex: Kirchhoff holds exactly
        let f = move |x: f64, y: f64| {
            1.0 + (x - c[0]).powi(2) + 0.5 * (y - c[1]).powi(2) + (x - c[0]) * (y - c[1])
        };
        let s = interpolate(&p, &|_, x, y| f(x, y), &|_, x, y, _| f(x, y), &|_| 0.0);
        residuals.push(kirchhoff_residual(&p, &s, k).unwrap());
        for _ in 0..20 {
            let x: Vec<f64> = (0..p.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let r = DiscreteState::from_vector(&p.layout, &x).unwrap();
            let a = kirchhoff_residual(&p, &r, k).unwrap();
            let b = junction_balance_sum(&p, &r, k).unwrap().abs();
            let comps = junction_flux_balance(&p, &r, k).unwrap();
            assert_eq!(comps.len(), p.domain.degree(k));
            // the identity is exact; in floating point compare relative to the term magnitudes
            let scale = 1.0 + comps.iter().map(|v| v.abs()).sum::<f64>();
            worst = worst.max((a - b).abs() / scale);
            worst_scale = worst_scale.max(scale);
        }
    }
    let decreasing = residuals.windows(2).all(|w| w[1] < w[0]);
    verdict(
        worst <= 1e-14 && decreasing,
        format!(
            "max |residual - balance sum| / (1 + sum |components|) {worst:.1e} (term scale up to {worst_scale:.1}); smooth-state residuals {:.3e} {:.3e} {:.3e}",
            residuals[0], residuals[1], residuals[2]
        ),
    )
}

// 9 --------------------------------------------------------------------------

fn vertex_limit() -> Verdict {
    let rows =
        vertex_limit_study(&VertexLimitSetup::reference(), &[0.2, 0.1, 0.05, 0.025]).unwrap();
    let d: Vec<f64> = rows.iter().map(|r| r.discrepancy).collect();
    let decreasing = d.windows(2).all(|w| w[1] < w[0]);
    verdict(
        decreasing,
        format!(
            "discrepancies {:.3e} {:.3e} {:.3e} {:.3e}",
            d[0], d[1], d[2], d[3]
        ),
    )
}

// 10 -------------------------------------------------------------------------

fn continuous_dependence() -> Verdict {
    let base = [
        "model.p=3",
        "model.subdomain_reaction={\"kind\": \"linear\", \"coefficient\": 0.5}",
        "model.edge_reaction={\"kind\": \"linear\", \"coefficient\": 0.5}",
        "discretization.t_end=0.1",
    ];
    let run_with_eps = |eps: f64| {
        let u =
            format!("initial.u=\"1 + 0.5 * cos(pi * x) * cos(pi * y) + {eps:e} * sin(2 * x + y)\"");
        let w = format!("initial.w=\"1 + {eps:e} * cos(3 * x)\"");
        let mut o: Vec<&str> = base.to_vec();
        o.push(&u);
        o.push(&w);
        let p = config("figure1.json", &o).prepare().unwrap();
        run(&p.problem, &p.initial, &p.solver).unwrap()
    };
    let reference = run_with_eps(0.0);
    let sup_diff = |eps: f64| {
        let s = run_with_eps(eps);
        reference
            .states
            .iter()
            .zip(&s.states)
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max)
    };
    let (d3, d4) = (sup_diff(1e-3), sup_diff(1e-4));
    let ratio = d3 / d4;
    verdict(
        (10.0 / 3.0..=30.0).contains(&ratio),
        format!(
            "sup differences {d3:.3e} and {d4:.3e}, ratio {ratio:.3} (linear scaling gives 10)"
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 10] = [
        ("junction algebra", junction_algebra),
        ("mass conservation", mass_conservation),
        ("vertex ODE exactness", vertex_ode_exactness),
        ("manufactured-solution convergence", mms_convergence),
        ("boundedness", boundedness),
        ("finite-time extinction", extinction),
        ("scheme cross-validation", scheme_cross_validation),
        ("Kirchhoff reduction", kirchhoff_reduction),
        ("vertex-limit study", vertex_limit),
        ("continuous dependence", continuous_dependence),
    ];
    let filter: Option<usize> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failed = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        if filter.is_some_and(|f| f != n + 1) {
            continue;
        }
        let start = Instant::now();
        let v = check();
        let status = if v.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {:>2} {status} {name}: {} [{:.1} s]",
            n + 1,
            v.detail,
            start.elapsed().as_secs_f64()
        );
        if !v.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("acceptance: {failed} criterion(s) failed");
        std::process::exit(1);
    }
    println!("acceptance: all criteria pass");
}

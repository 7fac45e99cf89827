//! Diagnostics and structural checks on computed solutions.

pub mod vertex_limit;

use serde::{Deserialize, Serialize};

use crate::assembly::{
    junction_flux_balance, outward_derivative, DiscreteState, Problem, SEG_POINTS, TRI_POINTS,
};
use crate::error::{Error, Result};
use crate::model::CouplingCoefficients;
use crate::timestepper::TimeSeries;

/// `X(t) <= EXTINCTION_THRESHOLD * X(0)` counts as extinct.
pub const EXTINCTION_THRESHOLD: f64 = 1e-12;

/// One row of the run report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub time: f64,
    pub total_mass: f64,
    /// Sum of squared L2 norms over subdomains and edges.
    pub x: f64,
    pub sup_u: f64,
    pub sup_w: f64,
    /// Gradient part of the energy, `sum int kappa_hat + sum int eta_hat`.
    pub energy: f64,
    pub z: Vec<f64>,
    pub extinct: bool,
}

pub fn diagnostics(problem: &Problem, state: &DiscreteState, time: f64) -> Diagnostics {
    Diagnostics {
        time,
        total_mass: total_mass(problem, state),
        x: l2_norm_squared(problem, state),
        sup_u: state
            .u
            .iter()
            .flatten()
            .fold(0.0, |m: f64, v| m.max(v.abs())),
        sup_w: state
            .w
            .iter()
            .flatten()
            .fold(0.0, |m: f64, v| m.max(v.abs())),
        energy: energy(problem, state),
        z: state.z.clone(),
        extinct: false,
    }
}

pub fn subdomain_integral(problem: &Problem, i: usize, u: &[f64]) -> f64 {
    let mesh = &problem.disc.subdomains[i];
    mesh.triangles
        .iter()
        .zip(problem.triangle_geometry(i))
        .map(|(t, g)| g.area * (u[t[0]] + u[t[1]] + u[t[2]]) / 3.0)
        .sum()
}

pub fn edge_integral(problem: &Problem, j: usize, w: &[f64]) -> f64 {
    let em = &problem.disc.edges[j];
    em.cells()
        .map(|(a, b)| 0.5 * (em.nodes[b] - em.nodes[a]) * (w[a] + w[b]))
        .sum()
}

/// `sum_i int u_i + sum_j int w_j + sum_k z_k`
pub fn total_mass(problem: &Problem, state: &DiscreteState) -> f64 {
    let u: f64 = (0..state.u.len())
        .map(|i| subdomain_integral(problem, i, &state.u[i]))
        .sum();
    let w: f64 = (0..state.w.len())
        .map(|j| edge_integral(problem, j, &state.w[j]))
        .sum();
    u + w + state.z.iter().sum::<f64>()
}

pub fn l2_norm_squared(problem: &Problem, state: &DiscreteState) -> f64 {
    let mut acc = 0.0;
    for (i, u) in state.u.iter().enumerate() {
        let mesh = &problem.disc.subdomains[i];
        for (t, g) in mesh.triangles.iter().zip(problem.triangle_geometry(i)) {
            let (a, b, c) = (u[t[0]], u[t[1]], u[t[2]]);
            acc += g.area / 6.0 * (a * a + b * b + c * c + a * b + b * c + c * a);
        }
    }
    for (j, w) in state.w.iter().enumerate() {
        let em = &problem.disc.edges[j];
        for (p, q) in em.cells() {
            let h = em.nodes[q] - em.nodes[p];
            acc += h / 3.0 * (w[p] * w[p] + w[p] * w[q] + w[q] * w[q]);
        }
    }
    acc
}

fn gradient(g: &crate::assembly::TriangleGeometry, t: &[usize; 3], u: &[f64]) -> [f64; 2] {
    let mut out = [0.0; 2];
    for (n, gr) in t.iter().zip(&g.grads) {
        out[0] += u[*n] * gr[0];
        out[1] += u[*n] * gr[1];
    }
    out
}

/// `sum_i int kappa_hat(grad u_i) + sum_j int eta_hat(w_j')`
pub fn energy(problem: &Problem, state: &DiscreteState) -> f64 {
    let kappa = &problem.model.subdomain_flux;
    let eta = &problem.model.edge_flux;
    let mut acc = 0.0;
    for (i, u) in state.u.iter().enumerate() {
        let mesh = &problem.disc.subdomains[i];
        for (t, g) in mesh.triangles.iter().zip(problem.triangle_geometry(i)) {
            acc += g.area * kappa.antiderivative(gradient(g, t, u));
        }
    }
    for (j, w) in state.w.iter().enumerate() {
        let em = &problem.disc.edges[j];
        for (p, q) in em.cells() {
            let h = em.nodes[q] - em.nodes[p];
            acc += h * eta.antiderivative_1d((w[q] - w[p]) / h);
        }
    }
    acc
}

/// Energy plus reaction potentials (same quadrature as the residual) and the
/// exchange penalties `alpha/2 (w - u)^2`, `gamma/2 (w_j - w_m)^2` and
/// `delta/2 (w_j - z)^2`. It does not increase under the implicit scheme
/// when `alpha = beta`, `gamma` is symmetric and `delta = lambda`, no sources.
pub fn lyapunov(problem: &Problem, state: &DiscreteState) -> f64 {
    let f = &problem.model.subdomain_reaction;
    let g = &problem.model.edge_reaction;
    let c = &problem.model.coefficients;
    let mut acc = energy(problem, state);
    for (i, u) in state.u.iter().enumerate() {
        let mesh = &problem.disc.subdomains[i];
        for (t, geo) in mesh.triangles.iter().zip(problem.triangle_geometry(i)) {
            for bary in &TRI_POINTS {
                let uq: f64 = t.iter().zip(bary).map(|(n, l)| l * u[*n]).sum();
                acc += geo.area / 3.0 * f.antiderivative(uq);
            }
        }
    }
    for (j, w) in state.w.iter().enumerate() {
        let em = &problem.disc.edges[j];
        for (p, q) in em.cells() {
            let h = em.nodes[q] - em.nodes[p];
            for &xi in &SEG_POINTS {
                acc += 0.5 * h * g.antiderivative((1.0 - xi) * w[p] + xi * w[q]);
            }
        }
        for &i in &problem.domain.edges()[j].adjacent_subdomains {
            let alpha = c.alpha(i, j).unwrap_or(0.0);
            let ids = &problem.disc.trace.map[&(i, j)];
            let u = &state.u[i];
            for (p, q) in em.cells() {
                let h = em.nodes[q] - em.nodes[p];
                let (dp, dq) = (w[p] - u[ids[p]], w[q] - u[ids[q]]);
                acc += 0.5 * alpha * h / 3.0 * (dp * dp + dp * dq + dq * dq);
            }
        }
    }
    for js in &problem.junctions {
        let vals: Vec<f64> = js
            .edge_order
            .iter()
            .map(|&(j, end)| state.w[j][problem.disc.edges[j].end_node(end)])
            .collect();
        for a in 0..vals.len() {
            for b in a + 1..vals.len() {
                acc += 0.5 * (-js.n[a][b]) * (vals[a] - vals[b]).powi(2);
            }
            acc += 0.5 * js.e[a] * (vals[a] - state.z[js.vertex]).powi(2);
        }
    }
    acc
}

/// `max(max_{i~j} alpha_ij / beta_ij * sup w_j, max_i sup u_{i,0})`
pub fn comparison_bound(
    coefficients: &CouplingCoefficients,
    edge_sup: &[f64],
    initial_sup: &[f64],
) -> Result<f64> {
    let mut m = initial_sup.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    for (&(i, j), &alpha) in &coefficients.alpha {
        let beta = coefficients.beta(i, j)?;
        if !(beta > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "beta at ({i}, {j}) must be positive"
            )));
        }
        let w = *edge_sup.get(j).ok_or(Error::UnknownEdge(j))?;
        m = m.max(alpha / beta * w);
    }
    Ok(m)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtinctionExponents {
    pub sigma: f64,
    pub p: f64,
    pub dimension: u8,
    pub theta1: f64,
    pub theta2: f64,
    pub s1: f64,
    pub s2: f64,
}

impl ExtinctionExponents {
    /// `theta_d` for the stored dimension.
    pub fn theta(&self) -> f64 {
        if self.dimension == 1 {
            self.theta1
        } else {
            self.theta2
        }
    }
}

pub fn theta(p: f64, sigma: f64, d: f64) -> f64 {
    0.5 * (2.0 - sigma) * d * p / (d * p + sigma * (p - d))
}

pub fn extinction_exponents(p: f64, sigma: f64, d: u8) -> Result<ExtinctionExponents> {
    if !(p >= 2.0) || !(sigma > 1.0 && sigma < 2.0) || !(d == 1 || d == 2) {
        return Err(Error::InvalidArgument(format!(
            "extinction exponents need p >= 2, 1 < sigma < 2, d in {{1, 2}} (got p = {p}, sigma = {sigma}, d = {d})"
        )));
    }
    let s2 = 1.0 / (1.0 + p * (2.0 - sigma) / (p * (2.0 + sigma) - 2.0 * sigma));
    let s1 = 1.0 / (1.0 + p * (2.0 - sigma) / (p * (1.0 + sigma) - sigma));
    let e = ExtinctionExponents {
        sigma,
        p,
        dimension: d,
        theta1: theta(p, sigma, 1.0),
        theta2: theta(p, sigma, 2.0),
        s1,
        s2,
    };
    debug_assert!(e.s1 <= e.s2);
    debug_assert!(e.theta1 > 0.0 && e.theta1 < 1.0 && e.theta2 > 0.0 && e.theta2 < 1.0);
    Ok(e)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtinctionFit {
    /// First time with `X <= threshold * X(0)`.
    pub t_extinct: Option<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Number of samples in the fit window.
    pub fit_samples: usize,
    /// Number of samples before extinction.
    pub window_samples: usize,
    /// Largest second difference of `X^{1 - s2}` over the fit window.
    pub max_second_difference: f64,
    /// Largest second difference over all samples before extinction.
    pub max_second_difference_window: f64,
    /// `X^{1 - s2}` strictly decreasing before extinction.
    pub monotone: bool,
}

/// Least-squares line `a + b t`, returning `(b, a, R^2)`.
pub fn linear_fit(t: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = t.len() as f64;
    let mt = t.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = t.iter().zip(y).map(|(a, b)| (a - mt) * (b - my)).sum();
    let sxx: f64 = t.iter().map(|a| (a - mt).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mt;
    let r2 = if syy > 0.0 {
        sxy * sxy / (sxx * syy)
    } else {
        1.0
    };
    (slope, intercept, r2)
}

/// Extinction time and the shape of `X^{1 - s2}` before it. The fit uses the
/// first 80% of the pre-extinction samples.
pub fn extinction_fit(
    times: &[f64],
    x: &[f64],
    exponents: &ExtinctionExponents,
    threshold: f64,
) -> ExtinctionFit {
    let x0 = x.first().copied().unwrap_or(0.0);
    let ext = x.iter().position(|&v| v <= threshold * x0);
    let window = ext.unwrap_or(x.len());
    let power = 1.0 - exponents.s2;
    let y: Vec<f64> = x[..window].iter().map(|v| v.powf(power)).collect();
    let t = &times[..window];
    let fit_n = ((0.8 * window as f64).floor() as usize).max(2.min(window));
    let (slope, intercept, r2) = if fit_n >= 2 {
        linear_fit(&t[..fit_n], &y[..fit_n])
    } else {
        (0.0, y.first().copied().unwrap_or(0.0), 0.0)
    };
    let second = |ys: &[f64]| {
        ys.windows(3)
            .map(|w| w[2] - 2.0 * w[1] + w[0])
            .fold(f64::NEG_INFINITY, f64::max)
    };
    ExtinctionFit {
        t_extinct: ext.map(|k| times[k]),
        slope,
        intercept,
        r_squared: r2,
        fit_samples: fit_n,
        window_samples: window,
        max_second_difference: second(&y[..fit_n]),
        max_second_difference_window: second(&y),
        monotone: y.windows(2).all(|w| w[1] < w[0]),
    }
}

pub fn extinction_fit_series(
    series: &TimeSeries,
    exponents: &ExtinctionExponents,
) -> ExtinctionFit {
    let x: Vec<f64> = series.diagnostics.iter().map(|d| d.x).collect();
    extinction_fit(&series.times, &x, exponents, EXTINCTION_THRESHOLD)
}

/// `|sum_j eta(d_nu w_j)|` at vertex `k` from one-sided outward slopes.
pub fn kirchhoff_residual(problem: &Problem, state: &DiscreteState, k: usize) -> Result<f64> {
    let js = problem.junctions.get(k).ok_or(Error::UnknownVertex(k))?;
    let eta = &problem.model.edge_flux;
    Ok(js
        .edge_order
        .iter()
        .map(|&(j, end)| eta.flux_1d(outward_derivative(&problem.disc.edges[j], &state.w[j], end)))
        .sum::<f64>()
        .abs())
}

/// Component sum of the junction balance at vertex `k`.
pub fn junction_balance_sum(problem: &Problem, state: &DiscreteState, k: usize) -> Result<f64> {
    Ok(junction_flux_balance(problem, state, k)?.iter().sum())
}

/// Degree-5, 7-point triangle rule: barycentric points and weights (sum 1).
const TRI7: [([f64; 3], f64); 7] = [
    ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 0.225),
    (
        [
            0.059_715_871_789_770,
            0.470_142_064_105_115,
            0.470_142_064_105_115,
        ],
        0.132_394_152_788_506,
    ),
    (
        [
            0.470_142_064_105_115,
            0.059_715_871_789_770,
            0.470_142_064_105_115,
        ],
        0.132_394_152_788_506,
    ),
    (
        [
            0.470_142_064_105_115,
            0.470_142_064_105_115,
            0.059_715_871_789_770,
        ],
        0.132_394_152_788_506,
    ),
    (
        [
            0.797_426_985_353_087,
            0.101_286_507_323_456,
            0.101_286_507_323_456,
        ],
        0.125_939_180_544_827,
    ),
    (
        [
            0.101_286_507_323_456,
            0.797_426_985_353_087,
            0.101_286_507_323_456,
        ],
        0.125_939_180_544_827,
    ),
    (
        [
            0.101_286_507_323_456,
            0.101_286_507_323_456,
            0.797_426_985_353_087,
        ],
        0.125_939_180_544_827,
    ),
];

/// 3-point Gauss on `[0, 1]`.
const SEG3: [(f64, f64); 3] = [
    (0.112_701_665_379_258_3, 5.0 / 18.0),
    (0.5, 8.0 / 18.0),
    (0.887_298_334_620_741_7, 5.0 / 18.0),
];

/// Squared L2 distance between the P1 functions of `state` and `exact`
/// (`exact_u(x, y)` on subdomains, `exact_w(x, y)` on edges), summed over
/// all subdomains and edges.
pub fn l2_error_squared(
    problem: &Problem,
    state: &DiscreteState,
    exact_u: &dyn Fn(f64, f64) -> f64,
    exact_w: &dyn Fn(f64, f64) -> f64,
) -> (f64, f64) {
    let mut eu = 0.0;
    for (i, u) in state.u.iter().enumerate() {
        let mesh = &problem.disc.subdomains[i];
        for (t, g) in mesh.triangles.iter().zip(problem.triangle_geometry(i)) {
            for (bary, wt) in &TRI7 {
                let mut p = [0.0; 2];
                let mut uh = 0.0;
                for (n, l) in t.iter().zip(bary) {
                    p[0] += l * mesh.nodes[*n][0];
                    p[1] += l * mesh.nodes[*n][1];
                    uh += l * u[*n];
                }
                eu += g.area * wt * (uh - exact_u(p[0], p[1])).powi(2);
            }
        }
    }
    let mut ew = 0.0;
    for (j, w) in state.w.iter().enumerate() {
        let em = &problem.disc.edges[j];
        for (a, b) in em.cells() {
            let h = em.nodes[b] - em.nodes[a];
            for &(xi, wt) in &SEG3 {
                let s = (1.0 - xi) * em.nodes[a] + xi * em.nodes[b];
                let p = problem.domain.edge_point(j, s);
                let wh = (1.0 - xi) * w[a] + xi * w[b];
                ew += h * wt * (wh - exact_w(p[0], p[1])).powi(2);
            }
        }
    }
    (eu, ew)
}

/// Interpolates closed-form data at the mesh nodes.
pub fn interpolate(
    problem: &Problem,
    u: &dyn Fn(usize, f64, f64) -> f64,
    w: &dyn Fn(usize, f64, f64, f64) -> f64,
    z: &dyn Fn(usize) -> f64,
) -> DiscreteState {
    DiscreteState {
        u: problem
            .disc
            .subdomains
            .iter()
            .enumerate()
            .map(|(i, m)| m.nodes.iter().map(|p| u(i, p[0], p[1])).collect())
            .collect(),
        w: problem
            .disc
            .edges
            .iter()
            .enumerate()
            .map(|(j, em)| {
                em.nodes
                    .iter()
                    .map(|&s| {
                        let p = problem.domain.edge_point(j, s);
                        w(j, p[0], p[1], s)
                    })
                    .collect()
            })
            .collect(),
        z: (0..problem.domain.vertices().len()).map(z).collect(),
    }
}

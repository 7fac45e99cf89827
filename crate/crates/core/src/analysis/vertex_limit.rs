//! Shrinking-interval study: two edges joined through a vertex region of
//! width `delta`, compared against two edges joined at a populated vertex.
//!
//! The `delta` model lives on `[-L, -delta/2] u V u [delta/2, L]` with
//! `V = (-delta/2, delta/2)`:
//!
//! ```text
//! v:  int v_t phi + int v' phi' + mu (v - w) phi(-delta/2) = 0
//! u:  int u_t phi + int u' phi' + theta (u - w) phi(delta/2) = 0
//! w:  (1/delta) [int w_t phi + int w' phi' + lambda int w phi]
//!       - mu (v - w) phi(-delta/2) - theta (u - w) phi(delta/2) = 0
//! ```
//!
//! and the limit model on `[-L, 0] u [0, L]` with a vertex value `z`:
//! `z' + lambda z - theta (u(0) - z) - mu (v(0) - z) = 0`.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mesh::EdgeMesh;
use crate::sparse::{LuSolver, TripletMatrix};
use crate::timestepper::{newton, NewtonOptions, NonlinearSystem};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Dof {
    Node(usize, usize),
    Scalar(usize),
}

/// P1 segment carrying `scale * [int x_t phi + int x' phi' + decay int x phi]`.
#[derive(Clone, Debug)]
struct Segment {
    nodes: Vec<f64>,
    scale: f64,
    decay: f64,
}

/// Linear 1D network: segments, scalar unknowns `x' + decay x`, and point
/// exchanges `rate (x_a - x_b)` added to row `a` and subtracted from row `b`.
#[derive(Clone, Debug)]
struct Network {
    segments: Vec<Segment>,
    scalars: Vec<f64>,
    links: Vec<(Dof, Dof, f64)>,
    offsets: Vec<usize>,
    dim: usize,
}

impl Network {
    fn new(segments: Vec<Segment>, scalars: Vec<f64>, links: Vec<(Dof, Dof, f64)>) -> Self {
        let mut offsets = Vec::new();
        let mut off = 0;
        for s in &segments {
            offsets.push(off);
            off += s.nodes.len();
        }
        let dim = off + scalars.len();
        Self {
            segments,
            scalars,
            links,
            offsets,
            dim,
        }
    }

    fn index(&self, d: Dof) -> usize {
        match d {
            Dof::Node(s, n) => self.offsets[s] + n,
            Dof::Scalar(k) => self.dim - self.scalars.len() + k,
        }
    }

    fn residual(&self, x: &[f64], prev: &[f64], dt: f64) -> Vec<f64> {
        let mut r = vec![0.0; self.dim];
        for (s, seg) in self.segments.iter().enumerate() {
            let o = self.offsets[s];
            for c in 0..seg.nodes.len() - 1 {
                let h = seg.nodes[c + 1] - seg.nodes[c];
                let (a, b) = (o + c, o + c + 1);
                let slope = (x[b] - x[a]) / h;
                r[a] -= seg.scale * slope;
                r[b] += seg.scale * slope;
                // exact P1 mass: h/6 [[2, 1], [1, 2]]
                let va = (x[a] - prev[a]) / dt + seg.decay * x[a];
                let vb = (x[b] - prev[b]) / dt + seg.decay * x[b];
                r[a] += seg.scale * h / 6.0 * (2.0 * va + vb);
                r[b] += seg.scale * h / 6.0 * (va + 2.0 * vb);
            }
        }
        for (k, &decay) in self.scalars.iter().enumerate() {
            let i = self.index(Dof::Scalar(k));
            r[i] += (x[i] - prev[i]) / dt + decay * x[i];
        }
        for &(a, b, rate) in &self.links {
            let (ia, ib) = (self.index(a), self.index(b));
            let flux = rate * (x[ia] - x[ib]);
            r[ia] += flux;
            r[ib] -= flux;
        }
        r
    }

    fn tangent(&self, dt: f64) -> TripletMatrix {
        let mut t = TripletMatrix::new(self.dim);
        for (s, seg) in self.segments.iter().enumerate() {
            let o = self.offsets[s];
            for c in 0..seg.nodes.len() - 1 {
                let h = seg.nodes[c + 1] - seg.nodes[c];
                let (a, b) = (o + c, o + c + 1);
                let k = seg.scale / h;
                let m = seg.scale * h / 6.0 * (1.0 / dt + seg.decay);
                t.push(a, a, k + 2.0 * m);
                t.push(b, b, k + 2.0 * m);
                t.push(a, b, -k + m);
                t.push(b, a, -k + m);
            }
        }
        for (k, &decay) in self.scalars.iter().enumerate() {
            let i = self.index(Dof::Scalar(k));
            t.push(i, i, 1.0 / dt + decay);
        }
        for &(a, b, rate) in &self.links {
            let (ia, ib) = (self.index(a), self.index(b));
            t.push(ia, ia, rate);
            t.push(ia, ib, -rate);
            t.push(ib, ia, -rate);
            t.push(ib, ib, rate);
        }
        t
    }
}

struct NetworkStep<'a> {
    net: &'a Network,
    prev: &'a [f64],
    dt: f64,
}

impl NonlinearSystem for NetworkStep<'_> {
    fn dim(&self) -> usize {
        self.net.dim
    }

    fn residual(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.net.residual(x, self.prev, self.dt))
    }

    fn tangent(&self, _x: &[f64]) -> Result<TripletMatrix> {
        Ok(self.net.tangent(self.dt))
    }
}

fn integrate(net: &Network, x0: Vec<f64>, dt: f64, t_end: f64, tol: f64) -> Result<Vec<f64>> {
    let steps = (t_end / dt - 1e-9).ceil().max(0.0) as usize;
    let mut lu = LuSolver::new();
    let mut x = x0;
    let mut t = 0.0;
    for n in 1..=steps {
        let t_next = (n as f64 * dt).min(t_end);
        let sys = NetworkStep {
            net,
            prev: &x,
            dt: t_next - t,
        };
        let opts = NewtonOptions {
            tol,
            max_iter: 5,
            line_search: false,
        };
        x = newton(&sys, x.clone(), opts, &mut lu)?.0;
        t = t_next;
    }
    Ok(x)
}

pub type Profile = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct VertexLimitSetup {
    /// Half-length `L` of the line.
    pub length: f64,
    /// Exchange rate with the right edge.
    pub theta: f64,
    /// Exchange rate with the left edge.
    pub mu: f64,
    pub lambda: f64,
    pub h: f64,
    pub dt: f64,
    pub t_end: f64,
    /// Minimum number of cells across the vertex region.
    pub min_vertex_cells: usize,
    /// Initial data on the right edge, as a function of `x`.
    pub right: Profile,
    /// Initial data on the left edge.
    pub left: Profile,
    pub z0: f64,
    pub newton_tol: f64,
}

impl std::fmt::Debug for VertexLimitSetup {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VertexLimitSetup")
            .field("length", &self.length)
            .field("theta", &self.theta)
            .field("mu", &self.mu)
            .field("lambda", &self.lambda)
            .field("h", &self.h)
            .field("dt", &self.dt)
            .field("t_end", &self.t_end)
            .field("z0", &self.z0)
            .finish_non_exhaustive()
    }
}

impl VertexLimitSetup {
    pub fn reference() -> Self {
        Self {
            length: 1.0,
            theta: 1.0,
            mu: 2.0,
            lambda: 0.5,
            h: 1.0 / 800.0,
            dt: 1e-3,
            t_end: 0.5,
            min_vertex_cells: 4,
            right: Arc::new(|x| 1.0 + (std::f64::consts::PI * x).cos()),
            left: Arc::new(|x| 0.5 * (1.0 - x)),
            z0: 0.0,
            newton_tol: 1e-11,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VertexLimitRow {
    pub delta: f64,
    /// Mean of the vertex-region solution at `t_end`.
    pub vertex_average: f64,
    pub z_limit: f64,
    pub vertex_error: f64,
    /// L2 distance of the edge solutions on the common region.
    pub edge_error: f64,
    pub discrepancy: f64,
}

/// Final values of one model: left and right edge meshes with nodal values,
/// and the vertex quantity (region average or `z`).
#[derive(Clone, Debug)]
pub struct LimitSolution {
    pub left: (Vec<f64>, Vec<f64>),
    pub right: (Vec<f64>, Vec<f64>),
    pub vertex: f64,
    /// Vertex-region mesh and values (`delta` model only).
    pub region: Option<(Vec<f64>, Vec<f64>)>,
}

fn edge_nodes(a: f64, b: f64, h: f64) -> Vec<f64> {
    let cells = ((b - a) / h - 1e-9).ceil().max(1.0) as usize;
    EdgeMesh::uniform(0, b - a, cells)
        .nodes
        .into_iter()
        .map(|s| a + s)
        .collect()
}

fn mirror(nodes: &[f64]) -> Vec<f64> {
    nodes.iter().rev().map(|x| -x).collect()
}

fn p1_mean(nodes: &[f64], vals: &[f64]) -> f64 {
    let mut acc = 0.0;
    for c in 0..nodes.len() - 1 {
        acc += 0.5 * (nodes[c + 1] - nodes[c]) * (vals[c] + vals[c + 1]);
    }
    acc / (nodes[nodes.len() - 1] - nodes[0])
}

fn p1_eval(nodes: &[f64], vals: &[f64], x: f64) -> f64 {
    let n = nodes.len();
    if x <= nodes[0] {
        return vals[0];
    }
    if x >= nodes[n - 1] {
        return vals[n - 1];
    }
    let c = nodes.partition_point(|&s| s <= x).min(n - 1) - 1;
    let s = (x - nodes[c]) / (nodes[c + 1] - nodes[c]);
    vals[c] + s * (vals[c + 1] - vals[c])
}

/// Squared L2 distance on `[a, b]` between two P1 functions on different meshes.
fn p1_distance_squared(a: f64, b: f64, f: (&[f64], &[f64]), g: (&[f64], &[f64])) -> f64 {
    let mut knots: Vec<f64> =
        f.0.iter()
            .chain(g.0)
            .copied()
            .filter(|&x| x > a && x < b)
            .collect();
    knots.push(a);
    knots.push(b);
    knots.sort_by(f64::total_cmp);
    knots.dedup_by(|x, y| (*x - *y).abs() <= 1e-14);
    let gauss = [
        (0.112_701_665_379_258_3, 5.0 / 18.0),
        (0.5, 8.0 / 18.0),
        (0.887_298_334_620_741_7, 5.0 / 18.0),
    ];
    let mut acc = 0.0;
    for w in knots.windows(2) {
        let h = w[1] - w[0];
        for &(xi, wt) in &gauss {
            let x = w[0] + xi * h;
            let d = p1_eval(f.0, f.1, x) - p1_eval(g.0, g.1, x);
            acc += h * wt * d * d;
        }
    }
    acc
}

impl VertexLimitSetup {
    fn check(&self) -> Result<()> {
        if !(self.length > 0.0 && self.h > 0.0 && self.dt > 0.0 && self.t_end >= 0.0) {
            return Err(Error::InvalidArgument(
                "length, h and dt must be positive".into(),
            ));
        }
        if self.theta < 0.0 || self.mu < 0.0 || self.lambda < 0.0 {
            return Err(Error::InvalidArgument(
                "exchange rates must be non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Solves the model with a vertex region of width `delta`.
    pub fn solve_delta(&self, delta: f64) -> Result<LimitSolution> {
        self.check()?;
        if !(delta > 0.0) || delta >= 2.0 * self.length {
            return Err(Error::InvalidArgument(format!(
                "vertex width {delta} must lie in (0, 2L) with L = {}",
                self.length
            )));
        }
        let half = 0.5 * delta;
        let right = edge_nodes(half, self.length, self.h);
        let left = mirror(&right);
        let cells = ((delta / self.h - 1e-9).ceil() as usize).max(self.min_vertex_cells);
        let mut region: Vec<f64> = (0..=cells)
            .map(|q| -half + delta * q as f64 / cells as f64)
            .collect();
        region[cells] = half;
        // exact mirror symmetry of the region mesh
        for q in 0..cells / 2 + 1 {
            let m = cells - q;
            region[m] = -region[q];
        }
        let nl = left.len();
        let nr = right.len();
        let nv = region.len();
        let net = Network::new(
            vec![
                Segment {
                    nodes: left.clone(),
                    scale: 1.0,
                    decay: 0.0,
                },
                Segment {
                    nodes: region.clone(),
                    scale: 1.0 / delta,
                    decay: self.lambda,
                },
                Segment {
                    nodes: right.clone(),
                    scale: 1.0,
                    decay: 0.0,
                },
            ],
            vec![],
            vec![
                (Dof::Node(0, nl - 1), Dof::Node(1, 0), self.mu),
                (Dof::Node(2, 0), Dof::Node(1, nv - 1), self.theta),
            ],
        );
        let mut x0 = Vec::with_capacity(net.dim);
        x0.extend(left.iter().map(|&x| (self.left)(x)));
        x0.extend(std::iter::repeat_n(self.z0, nv));
        x0.extend(right.iter().map(|&x| (self.right)(x)));
        let x = integrate(&net, x0, self.dt, self.t_end, self.newton_tol)?;
        let lv = x[..nl].to_vec();
        let wv = x[nl..nl + nv].to_vec();
        let rv = x[nl + nv..nl + nv + nr].to_vec();
        Ok(LimitSolution {
            vertex: p1_mean(&region, &wv),
            left: (left, lv),
            right: (right, rv),
            region: Some((region, wv)),
        })
    }

    /// Solves the limit model with a populated vertex at `x = 0`.
    pub fn solve_limit(&self) -> Result<LimitSolution> {
        self.check()?;
        let right = edge_nodes(0.0, self.length, self.h);
        let left = mirror(&right);
        let (nl, nr) = (left.len(), right.len());
        let net = Network::new(
            vec![
                Segment {
                    nodes: left.clone(),
                    scale: 1.0,
                    decay: 0.0,
                },
                Segment {
                    nodes: right.clone(),
                    scale: 1.0,
                    decay: 0.0,
                },
            ],
            vec![self.lambda],
            vec![
                (Dof::Node(0, nl - 1), Dof::Scalar(0), self.mu),
                (Dof::Node(1, 0), Dof::Scalar(0), self.theta),
            ],
        );
        let mut x0 = Vec::with_capacity(net.dim);
        x0.extend(left.iter().map(|&x| (self.left)(x)));
        x0.extend(right.iter().map(|&x| (self.right)(x)));
        x0.push(self.z0);
        let x = integrate(&net, x0, self.dt, self.t_end, self.newton_tol)?;
        Ok(LimitSolution {
            left: (left, x[..nl].to_vec()),
            right: (right, x[nl..nl + nr].to_vec()),
            vertex: x[nl + nr],
            region: None,
        })
    }
}

/// One row per `delta`: vertex mismatch plus edge L2 mismatch on the region
/// both models share.
pub fn vertex_limit_study(setup: &VertexLimitSetup, deltas: &[f64]) -> Result<Vec<VertexLimitRow>> {
    if deltas.is_empty() {
        return Err(Error::InvalidArgument("no vertex widths given".into()));
    }
    let limit = setup.solve_limit()?;
    deltas
        .iter()
        .map(|&delta| {
            let s = setup.solve_delta(delta)?;
            let half = 0.5 * delta;
            let er = p1_distance_squared(
                half,
                setup.length,
                (&s.right.0, &s.right.1),
                (&limit.right.0, &limit.right.1),
            );
            let el = p1_distance_squared(
                -setup.length,
                -half,
                (&s.left.0, &s.left.1),
                (&limit.left.0, &limit.left.1),
            );
            let vertex_error = (s.vertex - limit.vertex).abs();
            let edge_error = (er + el).sqrt();
            Ok(VertexLimitRow {
                delta,
                vertex_average: s.vertex,
                z_limit: limit.vertex,
                vertex_error,
                edge_error,
                discrepancy: vertex_error + edge_error,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coarse() -> VertexLimitSetup {
        VertexLimitSetup {
            h: 1.0 / 100.0,
            dt: 1e-2,
            t_end: 0.2,
            ..VertexLimitSetup::reference()
        }
    }

    #[test]
    fn decoupled_vertex_keeps_its_value() {
        let s = VertexLimitSetup {
            theta: 0.0,
            mu: 0.0,
            lambda: 0.0,
            z0: 0.7,
            ..coarse()
        };
        let lim = s.solve_limit().unwrap();
        assert!((lim.vertex - 0.7).abs() < 1e-14);
        let d = s.solve_delta(0.1).unwrap();
        assert!((d.vertex - 0.7).abs() < 1e-11, "{}", d.vertex);
    }

    #[test]
    fn mirror_symmetric_data_gives_symmetric_solutions() {
        let f: Profile = Arc::new(|x: f64| 1.0 + (3.0 * x).sin().abs());
        let g = f.clone();
        let s = VertexLimitSetup {
            theta: 1.5,
            mu: 1.5,
            right: f,
            left: Arc::new(move |x| g(-x)),
            ..coarse()
        };
        for sol in [s.solve_limit().unwrap(), s.solve_delta(0.1).unwrap()] {
            let (ln, lv) = &sol.left;
            let (rn, rv) = &sol.right;
            for q in 0..rn.len() {
                let m = ln.len() - 1 - q;
                assert_eq!(ln[m], -rn[q]);
                assert!((lv[m] - rv[q]).abs() <= 1e-10);
            }
            if let Some((_, w)) = &sol.region {
                for q in 0..w.len() {
                    assert!((w[q] - w[w.len() - 1 - q]).abs() <= 1e-10);
                }
            }
        }
    }

    #[test]
    fn total_mass_decays_only_through_lambda() {
        let s = VertexLimitSetup {
            lambda: 0.0,
            ..coarse()
        };
        let lim = s.solve_limit().unwrap();
        let d = s.solve_delta(0.2).unwrap();
        let edge_mass = |sol: &LimitSolution, a: f64| {
            let (ln, lv) = &sol.left;
            let (rn, rv) = &sol.right;
            p1_mean(ln, lv) * (ln[ln.len() - 1] - ln[0])
                + p1_mean(rn, rv) * (rn[rn.len() - 1] - rn[0])
                + a
        };
        let initial_lim = {
            let right = edge_nodes(0.0, 1.0, s.h);
            let left = mirror(&right);
            let lv: Vec<f64> = left.iter().map(|&x| (s.left)(x)).collect();
            let rv: Vec<f64> = right.iter().map(|&x| (s.right)(x)).collect();
            p1_mean(&left, &lv) + p1_mean(&right, &rv) + s.z0
        };
        assert!((edge_mass(&lim, lim.vertex) - initial_lim).abs() < 1e-12);
        // the delta model conserves int v + int u + mean over the region
        let initial_d = {
            let right = edge_nodes(0.1, 1.0, s.h);
            let left = mirror(&right);
            let lv: Vec<f64> = left.iter().map(|&x| (s.left)(x)).collect();
            let rv: Vec<f64> = right.iter().map(|&x| (s.right)(x)).collect();
            p1_mean(&left, &lv) * 0.9 + p1_mean(&right, &rv) * 0.9 + s.z0
        };
        assert!((edge_mass(&d, d.vertex) - initial_d).abs() < 1e-12);
    }

    #[test]
    fn width_must_fit() {
        assert!(coarse().solve_delta(2.0).is_err());
        assert!(coarse().solve_delta(0.0).is_err());
    }

    #[test]
    fn p1_distance_on_identical_functions_is_zero() {
        let a = edge_nodes(0.0, 1.0, 0.1);
        let b = edge_nodes(0.0, 1.0, 0.07);
        let fa: Vec<f64> = a.iter().map(|x| 2.0 * x).collect();
        let fb: Vec<f64> = b.iter().map(|x| 2.0 * x).collect();
        assert!(p1_distance_squared(0.05, 1.0, (&a, &fa), (&b, &fb)) < 1e-28);
        let ones = vec![1.0; a.len()];
        let zeros = vec![0.0; b.len()];
        assert!((p1_distance_squared(0.0, 0.5, (&a, &ones), (&b, &zeros)) - 0.5).abs() < 1e-14);
    }
}

//! Backward-Euler residual and tangent of the coupled weak form.
//!
//! Unknowns are stacked as `[u_0 .. u_{I-1} | w_0 .. w_{J-1} | z]`.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Endpoint, PartitionedDomain};
use crate::mesh::{Discretization, EdgeMesh, SubdomainMesh};
use crate::model::{CouplingCoefficients, FieldPoint, ModelSpec};
use crate::sparse::TripletMatrix;

/// Barycentric points of the 3-point triangle rule; weights are `area / 3`.
pub const TRI_POINTS: [[f64; 3]; 3] = [
    [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
    [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
    [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
];

/// Local coordinates in `[0, 1]` of the 2-point Gauss rule; weights are `length / 2`.
pub const SEG_POINTS: [f64; 2] = [0.211_324_865_405_187_1, 0.788_675_134_594_812_9];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TriangleGeometry {
    pub area: f64,
    /// Gradients of the three hat functions.
    pub grads: [[f64; 2]; 3],
}

pub fn triangle_geometry(mesh: &SubdomainMesh) -> Vec<TriangleGeometry> {
    mesh.triangles
        .iter()
        .map(|&[a, b, c]| {
            let (pa, pb, pc) = (mesh.nodes[a], mesh.nodes[b], mesh.nodes[c]);
            let det = (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]);
            let grads = [
                [(pb[1] - pc[1]) / det, (pc[0] - pb[0]) / det],
                [(pc[1] - pa[1]) / det, (pa[0] - pc[0]) / det],
                [(pa[1] - pb[1]) / det, (pb[0] - pa[0]) / det],
            ];
            TriangleGeometry {
                area: 0.5 * det,
                grads,
            }
        })
        .collect()
}

/// Per-vertex junction data, rows and columns in ascending edge id order.
#[derive(Clone, Debug, PartialEq)]
pub struct JunctionSystem {
    pub vertex: usize,
    pub edge_order: Vec<(usize, Endpoint)>,
    /// `N[n][m] = -gamma_{m -> n}` off the diagonal, `N[n][n] = sum_m gamma_{n -> m}`.
    pub n: Vec<Vec<f64>>,
    /// Diagonal of `E`.
    pub e: Vec<f64>,
    pub lam: Vec<f64>,
}

impl JunctionSystem {
    pub fn degree(&self) -> usize {
        self.edge_order.len()
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let d = self.degree();
        (0..d).map(|m| (0..d).map(|n| self.n[n][m]).sum()).collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.n.iter().map(|r| r.iter().sum()).collect()
    }

    /// Weak diagonal dominance of `N + E` by columns.
    pub fn is_column_dominant(&self) -> bool {
        let d = self.degree();
        (0..d).all(|m| {
            let off: f64 = (0..d).filter(|&n| n != m).map(|n| self.n[n][m].abs()).sum();
            self.n[m][m] + self.e[m] >= off
        })
    }

    /// Weak diagonal dominance of `N + E` by rows.
    pub fn is_row_dominant(&self) -> bool {
        let d = self.degree();
        (0..d).all(|n| {
            let off: f64 = (0..d).filter(|&m| m != n).map(|m| self.n[n][m].abs()).sum();
            self.n[n][n] + self.e[n] >= off
        })
    }

    pub fn lambda_total(&self) -> f64 {
        self.lam.iter().sum()
    }

    pub fn is_populated(&self) -> bool {
        self.e.iter().chain(&self.lam).any(|&v| v != 0.0)
    }
}

pub fn build_junction_system(
    domain: &PartitionedDomain,
    coefficients: &CouplingCoefficients,
    k: usize,
) -> Result<JunctionSystem> {
    let edge_order = domain.edges_at_vertex(k)?;
    let d = edge_order.len();
    let mut n = vec![vec![0.0; d]; d];
    for a in 0..d {
        for b in 0..d {
            if a != b {
                let (ja, jb) = (edge_order[a].0, edge_order[b].0);
                n[a][b] = -coefficients.gamma(k, jb, ja)?;
                n[a][a] += coefficients.gamma(k, ja, jb)?;
            }
        }
    }
    let e = edge_order
        .iter()
        .map(|&(j, _)| coefficients.delta(k, j))
        .collect::<Result<_>>()?;
    let lam = edge_order
        .iter()
        .map(|&(j, _)| coefficients.lambda(k, j))
        .collect::<Result<_>>()?;
    Ok(JunctionSystem {
        vertex: k,
        edge_order,
        n,
        e,
        lam,
    })
}

/// Offsets of each block in the stacked unknown vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    pub u_offsets: Vec<usize>,
    pub u_sizes: Vec<usize>,
    pub w_offsets: Vec<usize>,
    pub w_sizes: Vec<usize>,
    pub z_offset: usize,
    pub z_size: usize,
}

impl Layout {
    pub fn new(disc: &Discretization, vertex_count: usize) -> Self {
        let mut off = 0;
        let mut u_offsets = Vec::new();
        let mut u_sizes = Vec::new();
        for m in &disc.subdomains {
            u_offsets.push(off);
            u_sizes.push(m.nodes.len());
            off += m.nodes.len();
        }
        let mut w_offsets = Vec::new();
        let mut w_sizes = Vec::new();
        for e in &disc.edges {
            w_offsets.push(off);
            w_sizes.push(e.len());
            off += e.len();
        }
        Self {
            u_offsets,
            u_sizes,
            w_offsets,
            w_sizes,
            z_offset: off,
            z_size: vertex_count,
        }
    }

    pub fn dim(&self) -> usize {
        self.z_offset + self.z_size
    }

    pub fn u_range(&self, i: usize) -> std::ops::Range<usize> {
        self.u_offsets[i]..self.u_offsets[i] + self.u_sizes[i]
    }

    pub fn w_range(&self, j: usize) -> std::ops::Range<usize> {
        self.w_offsets[j]..self.w_offsets[j] + self.w_sizes[j]
    }
}

/// Nodal values at one time level.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteState {
    pub u: Vec<Vec<f64>>,
    pub w: Vec<Vec<f64>>,
    pub z: Vec<f64>,
}

impl DiscreteState {
    pub fn zeros(layout: &Layout) -> Self {
        Self::constant(layout, 0.0)
    }

    pub fn constant(layout: &Layout, c: f64) -> Self {
        Self {
            u: layout.u_sizes.iter().map(|&n| vec![c; n]).collect(),
            w: layout.w_sizes.iter().map(|&n| vec![c; n]).collect(),
            z: vec![c; layout.z_size],
        }
    }

    pub fn to_vector(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for u in &self.u {
            out.extend_from_slice(u);
        }
        for w in &self.w {
            out.extend_from_slice(w);
        }
        out.extend_from_slice(&self.z);
        out
    }

    pub fn from_vector(layout: &Layout, x: &[f64]) -> Result<Self> {
        check_len(layout, x, "state vector")?;
        Ok(Self {
            u: (0..layout.u_sizes.len())
                .map(|i| x[layout.u_range(i)].to_vec())
                .collect(),
            w: (0..layout.w_sizes.len())
                .map(|j| x[layout.w_range(j)].to_vec())
                .collect(),
            z: x[layout.z_offset..].to_vec(),
        })
    }

    pub fn matches(&self, layout: &Layout) -> bool {
        self.u.len() == layout.u_sizes.len()
            && self.w.len() == layout.w_sizes.len()
            && self.z.len() == layout.z_size
            && self
                .u
                .iter()
                .zip(&layout.u_sizes)
                .all(|(u, &n)| u.len() == n)
            && self
                .w
                .iter()
                .zip(&layout.w_sizes)
                .all(|(w, &n)| w.len() == n)
    }

    pub fn is_finite(&self) -> bool {
        self.u
            .iter()
            .chain(&self.w)
            .flatten()
            .chain(&self.z)
            .all(|v| v.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let a = self.to_vector();
        let b = other.to_vector();
        a.iter()
            .zip(&b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }
}

fn check_len(layout: &Layout, x: &[f64], context: &'static str) -> Result<()> {
    if x.len() != layout.dim() {
        return Err(Error::DimensionMismatch {
            context,
            expected: layout.dim(),
            found: x.len(),
        });
    }
    Ok(())
}

/// How the vertex rows are treated.
#[derive(Clone, Copy, Debug)]
pub enum VertexRows<'a> {
    /// Backward-Euler discretization of the vertex ODE.
    Coupled,
    /// `z - z_frozen = 0`, for the splitting scheme.
    Frozen(&'a [f64]),
}

/// Everything needed to evaluate the discrete weak form.
pub struct Problem {
    pub domain: PartitionedDomain,
    pub disc: Discretization,
    pub model: ModelSpec,
    pub junctions: Vec<JunctionSystem>,
    pub layout: Layout,
    tri_geom: Vec<Vec<TriangleGeometry>>,
    /// `(alpha, beta)` for each adjacent subdomain of each edge, in the
    /// order of `Edge::adjacent_subdomains`.
    edge_pairs: Vec<Vec<(usize, f64, f64)>>,
    /// `(edge, alpha, beta)` per subdomain.
    sub_pairs: Vec<Vec<(usize, f64, f64)>>,
    pool: Option<Arc<rayon::ThreadPool>>,
}

impl Problem {
    pub fn new(domain: PartitionedDomain, disc: Discretization, model: ModelSpec) -> Result<Self> {
        let junctions = (0..domain.vertices().len())
            .map(|k| build_junction_system(&domain, &model.coefficients, k))
            .collect::<Result<Vec<_>>>()?;
        let layout = Layout::new(&disc, domain.vertices().len());
        let tri_geom = disc.subdomains.iter().map(triangle_geometry).collect();
        let c = &model.coefficients;
        let mut edge_pairs = vec![Vec::new(); domain.edges().len()];
        let mut sub_pairs = vec![Vec::new(); domain.subdomains().len()];
        for e in domain.edges() {
            for &i in &e.adjacent_subdomains {
                let (a, b) = (c.alpha(i, e.id)?, c.beta(i, e.id)?);
                edge_pairs[e.id].push((i, a, b));
                sub_pairs[i].push((e.id, a, b));
            }
        }
        for s in &mut sub_pairs {
            s.sort_by_key(|p| p.0);
        }
        Ok(Self {
            domain,
            disc,
            model,
            junctions,
            layout,
            tri_geom,
            edge_pairs,
            sub_pairs,
            pool: None,
        })
    }

    /// Caps the number of worker threads used in assembly.
    pub fn with_threads(mut self, threads: usize) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
        self.pool = Some(Arc::new(pool));
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    pub fn triangle_geometry(&self, i: usize) -> &[TriangleGeometry] {
        &self.tri_geom[i]
    }

    fn run<T: Send>(&self, f: impl FnOnce() -> T + Send) -> T {
        match &self.pool {
            Some(p) => p.install(f),
            None => f(),
        }
    }

    pub fn residual(
        &self,
        x: &[f64],
        prev: &[f64],
        dt: f64,
        t: f64,
        rows: VertexRows<'_>,
    ) -> Result<Vec<f64>> {
        check_len(&self.layout, x, "residual state")?;
        check_len(&self.layout, prev, "residual previous state")?;
        if !(dt > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "time step must be positive, got {dt}"
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("state"));
        }
        let ni = self.disc.subdomains.len();
        let nj = self.disc.edges.len();
        let blocks: Vec<Vec<f64>> = self.run(|| {
            (0..ni + nj)
                .into_par_iter()
                .map(|b| {
                    if b < ni {
                        self.subdomain_residual(b, x, prev, dt, t)
                    } else {
                        self.edge_residual(b - ni, x, prev, dt, t)
                    }
                })
                .collect()
        });
        let mut r = Vec::with_capacity(self.dim());
        for b in blocks {
            r.extend(b);
        }
        r.extend(self.vertex_residual(x, prev, dt, rows));
        Ok(r)
    }

    pub fn tangent(&self, x: &[f64], dt: f64, rows: VertexRows<'_>) -> Result<TripletMatrix> {
        check_len(&self.layout, x, "tangent state")?;
        if !(dt > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "time step must be positive, got {dt}"
            )));
        }
        let ni = self.disc.subdomains.len();
        let nj = self.disc.edges.len();
        let blocks: Vec<TripletMatrix> = self.run(|| {
            (0..ni + nj)
                .into_par_iter()
                .map(|b| {
                    if b < ni {
                        self.subdomain_tangent(b, x, dt)
                    } else {
                        self.edge_tangent(b - ni, x, dt)
                    }
                })
                .collect::<Result<_>>()
        })?;
        let mut t = TripletMatrix::new(self.dim());
        for b in blocks {
            t.extend(b);
        }
        self.vertex_tangent(&mut t, dt, rows);
        Ok(t)
    }

    fn subdomain_residual(&self, i: usize, x: &[f64], prev: &[f64], dt: f64, t: f64) -> Vec<f64> {
        let mesh = &self.disc.subdomains[i];
        let u = &x[self.layout.u_range(i)];
        let up = &prev[self.layout.u_range(i)];
        let kappa = &self.model.subdomain_flux;
        let f = &self.model.subdomain_reaction;
        let source = self.model.sources.subdomain(i);
        let mut r = vec![0.0; mesh.nodes.len()];
        for (tri, geo) in mesh.triangles.iter().zip(&self.tri_geom[i]) {
            let mut g = [0.0; 2];
            for (n, gr) in tri.iter().zip(&geo.grads) {
                g[0] += u[*n] * gr[0];
                g[1] += u[*n] * gr[1];
            }
            let flux = kappa.flux(g);
            for (n, gr) in tri.iter().zip(&geo.grads) {
                r[*n] += geo.area * (flux[0] * gr[0] + flux[1] * gr[1]);
            }
            let wq = geo.area / 3.0;
            for bary in &TRI_POINTS {
                let mut uq = 0.0;
                let mut upq = 0.0;
                for (n, l) in tri.iter().zip(bary) {
                    uq += l * u[*n];
                    upq += l * up[*n];
                }
                let mut val = (uq - upq) / dt + f.eval(uq);
                if let Some(src) = source {
                    let mut p = [0.0; 2];
                    for (n, l) in tri.iter().zip(bary) {
                        p[0] += l * mesh.nodes[*n][0];
                        p[1] += l * mesh.nodes[*n][1];
                    }
                    val -= src(&FieldPoint {
                        x: p[0],
                        y: p[1],
                        arclength: 0.0,
                        t,
                    });
                }
                for (n, l) in tri.iter().zip(bary) {
                    r[*n] += wq * val * l;
                }
            }
        }
        for &(j, alpha, beta) in &self.sub_pairs[i] {
            let w = &x[self.layout.w_range(j)];
            for (c, facet) in mesh.boundary_facets[&j].iter().enumerate() {
                let [a, b] = facet.nodes;
                let hw = 0.5 * facet.length;
                for &xi in &SEG_POINTS {
                    let uq = (1.0 - xi) * u[a] + xi * u[b];
                    let wv = (1.0 - xi) * w[c] + xi * w[c + 1];
                    let ex = alpha * wv - beta * uq;
                    r[a] -= hw * ex * (1.0 - xi);
                    r[b] -= hw * ex * xi;
                }
            }
        }
        r
    }

    fn subdomain_tangent(&self, i: usize, x: &[f64], dt: f64) -> Result<TripletMatrix> {
        let mesh = &self.disc.subdomains[i];
        let off = self.layout.u_offsets[i];
        let u = &x[self.layout.u_range(i)];
        let kappa = &self.model.subdomain_flux;
        let f = &self.model.subdomain_reaction;
        let mut t = TripletMatrix::with_capacity(self.dim(), 18 * mesh.triangles.len());
        for (tri, geo) in mesh.triangles.iter().zip(&self.tri_geom[i]) {
            let mut g = [0.0; 2];
            for (n, gr) in tri.iter().zip(&geo.grads) {
                g[0] += u[*n] * gr[0];
                g[1] += u[*n] * gr[1];
            }
            let jac = kappa.jacobian(g)?;
            let wq = geo.area / 3.0;
            let mut fq = [0.0; 3];
            for (q, bary) in TRI_POINTS.iter().enumerate() {
                let uq: f64 = tri.iter().zip(bary).map(|(n, l)| l * u[*n]).sum();
                fq[q] = 1.0 / dt + f.derivative(uq);
            }
            for a in 0..3 {
                for b in 0..3 {
                    let ga = geo.grads[a];
                    let gb = geo.grads[b];
                    let jg = [
                        jac[0][0] * gb[0] + jac[0][1] * gb[1],
                        jac[1][0] * gb[0] + jac[1][1] * gb[1],
                    ];
                    let mut v = geo.area * (ga[0] * jg[0] + ga[1] * jg[1]);
                    for (q, bary) in TRI_POINTS.iter().enumerate() {
                        v += wq * fq[q] * bary[a] * bary[b];
                    }
                    t.push(off + tri[a], off + tri[b], v);
                }
            }
        }
        for &(j, alpha, beta) in &self.sub_pairs[i] {
            let woff = self.layout.w_offsets[j];
            for (c, facet) in mesh.boundary_facets[&j].iter().enumerate() {
                let nodes = facet.nodes;
                let cols = [c, c + 1];
                let hw = 0.5 * facet.length;
                for a in 0..2 {
                    for b in 0..2 {
                        let mut m = 0.0;
                        for &xi in &SEG_POINTS {
                            let phi = [1.0 - xi, xi];
                            m += hw * phi[a] * phi[b];
                        }
                        t.push(off + nodes[a], off + nodes[b], beta * m);
                        t.push(off + nodes[a], woff + cols[b], -alpha * m);
                    }
                }
            }
        }
        Ok(t)
    }

    fn edge_residual(&self, j: usize, x: &[f64], prev: &[f64], dt: f64, t: f64) -> Vec<f64> {
        let em = &self.disc.edges[j];
        let w = &x[self.layout.w_range(j)];
        let wp = &prev[self.layout.w_range(j)];
        let eta = &self.model.edge_flux;
        let g = &self.model.edge_reaction;
        let source = self.model.sources.edge(j);
        let mut r = vec![0.0; em.len()];
        for (a, b) in em.cells() {
            let h = em.nodes[b] - em.nodes[a];
            let flux = eta.flux_1d((w[b] - w[a]) / h);
            r[a] -= flux;
            r[b] += flux;
            for &xi in &SEG_POINTS {
                let wq = (1.0 - xi) * w[a] + xi * w[b];
                let wpq = (1.0 - xi) * wp[a] + xi * wp[b];
                let mut val = (wq - wpq) / dt + g.eval(wq);
                if let Some(src) = source {
                    let s = (1.0 - xi) * em.nodes[a] + xi * em.nodes[b];
                    let p = self.domain.edge_point(j, s);
                    val -= src(&FieldPoint {
                        x: p[0],
                        y: p[1],
                        arclength: s,
                        t,
                    });
                }
                r[a] += 0.5 * h * val * (1.0 - xi);
                r[b] += 0.5 * h * val * xi;
            }
        }
        for &(i, alpha, beta) in &self.edge_pairs[j] {
            let u = &x[self.layout.u_range(i)];
            let ids = &self.disc.trace.map[&(i, j)];
            for (a, b) in em.cells() {
                let hw = 0.5 * (em.nodes[b] - em.nodes[a]);
                for &xi in &SEG_POINTS {
                    let uq = (1.0 - xi) * u[ids[a]] + xi * u[ids[b]];
                    let wq = (1.0 - xi) * w[a] + xi * w[b];
                    let ex = alpha * wq - beta * uq;
                    r[a] += hw * ex * (1.0 - xi);
                    r[b] += hw * ex * xi;
                }
            }
        }
        let e = &self.domain.edges()[j];
        for (k, end) in [
            (e.source, Endpoint::Source),
            (e.terminal, Endpoint::Terminal),
        ] {
            let node = em.end_node(end);
            r[node] += self.junction_row(x, k, j);
        }
        r
    }

    /// `[(N + E) w - lambda z]` component of edge `j` at vertex `k`.
    fn junction_row(&self, x: &[f64], k: usize, j: usize) -> f64 {
        let js = &self.junctions[k];
        let n = js
            .edge_order
            .iter()
            .position(|&(e, _)| e == j)
            .expect("edge at vertex");
        let z = x[self.layout.z_offset + k];
        let mut v = js.e[n] * self.vertex_value(x, j, js.edge_order[n].1) - js.lam[n] * z;
        for (m, &(jm, end)) in js.edge_order.iter().enumerate() {
            v += js.n[n][m] * self.vertex_value(x, jm, end);
        }
        v
    }

    /// Value of `w_j` at its given endpoint.
    fn vertex_value(&self, x: &[f64], j: usize, end: Endpoint) -> f64 {
        x[self.layout.w_offsets[j] + self.disc.edges[j].end_node(end)]
    }

    fn edge_tangent(&self, j: usize, x: &[f64], dt: f64) -> Result<TripletMatrix> {
        let em = &self.disc.edges[j];
        let off = self.layout.w_offsets[j];
        let w = &x[self.layout.w_range(j)];
        let eta = &self.model.edge_flux;
        let g = &self.model.edge_reaction;
        let mut t = TripletMatrix::with_capacity(self.dim(), 12 * em.len());
        for (a, b) in em.cells() {
            let h = em.nodes[b] - em.nodes[a];
            let d = eta.derivative_1d((w[b] - w[a]) / h)? / h;
            let nodes = [a, b];
            let sgn = [-1.0, 1.0];
            for p in 0..2 {
                for q in 0..2 {
                    let mut v = sgn[p] * sgn[q] * d;
                    for &xi in &SEG_POINTS {
                        let phi = [1.0 - xi, xi];
                        let wq = phi[0] * w[a] + phi[1] * w[b];
                        v += 0.5 * h * (1.0 / dt + g.derivative(wq)) * phi[p] * phi[q];
                    }
                    t.push(off + nodes[p], off + nodes[q], v);
                }
            }
        }
        for &(i, alpha, beta) in &self.edge_pairs[j] {
            let uoff = self.layout.u_offsets[i];
            let ids = &self.disc.trace.map[&(i, j)];
            for (a, b) in em.cells() {
                let hw = 0.5 * (em.nodes[b] - em.nodes[a]);
                let nodes = [a, b];
                for p in 0..2 {
                    for q in 0..2 {
                        let mut m = 0.0;
                        for &xi in &SEG_POINTS {
                            let phi = [1.0 - xi, xi];
                            m += hw * phi[p] * phi[q];
                        }
                        t.push(off + nodes[p], off + nodes[q], alpha * m);
                        t.push(off + nodes[p], uoff + ids[nodes[q]], -beta * m);
                    }
                }
            }
        }
        let e = &self.domain.edges()[j];
        for (k, end) in [
            (e.source, Endpoint::Source),
            (e.terminal, Endpoint::Terminal),
        ] {
            let js = &self.junctions[k];
            let n = js
                .edge_order
                .iter()
                .position(|&(e, _)| e == j)
                .expect("edge at vertex");
            let row = off + em.end_node(end);
            for (m, &(jm, endm)) in js.edge_order.iter().enumerate() {
                let mut v = js.n[n][m];
                if m == n {
                    v += js.e[n];
                }
                t.push(
                    row,
                    self.layout.w_offsets[jm] + self.disc.edges[jm].end_node(endm),
                    v,
                );
            }
            t.push(row, self.layout.z_offset + k, -js.lam[n]);
        }
        Ok(t)
    }

    fn vertex_residual(&self, x: &[f64], prev: &[f64], dt: f64, rows: VertexRows<'_>) -> Vec<f64> {
        let zo = self.layout.z_offset;
        self.junctions
            .iter()
            .map(|js| {
                let k = js.vertex;
                let z = x[zo + k];
                match rows {
                    VertexRows::Frozen(zf) => z - zf[k],
                    VertexRows::Coupled => {
                        let mut r = (z - prev[zo + k]) / dt;
                        for (n, &(j, end)) in js.edge_order.iter().enumerate() {
                            r -= js.e[n] * self.vertex_value(x, j, end) - js.lam[n] * z;
                        }
                        r
                    }
                }
            })
            .collect()
    }

    fn vertex_tangent(&self, t: &mut TripletMatrix, dt: f64, rows: VertexRows<'_>) {
        let zo = self.layout.z_offset;
        for js in &self.junctions {
            let row = zo + js.vertex;
            match rows {
                VertexRows::Frozen(_) => t.push(row, row, 1.0),
                VertexRows::Coupled => {
                    t.push(row, row, 1.0 / dt + js.lambda_total());
                    for (n, &(j, end)) in js.edge_order.iter().enumerate() {
                        let col = self.layout.w_offsets[j] + self.disc.edges[j].end_node(end);
                        t.push(row, col, -js.e[n]);
                    }
                }
            }
        }
    }

    pub fn state_from_vector(&self, x: &[f64]) -> Result<DiscreteState> {
        DiscreteState::from_vector(&self.layout, x)
    }
}

/// Residual of the backward-Euler step from `prev` to `state` over `dt`.
pub fn assemble_residual(
    problem: &Problem,
    state: &DiscreteState,
    prev: &DiscreteState,
    dt: f64,
    t: f64,
) -> Result<Vec<f64>> {
    check_state(problem, state)?;
    check_state(problem, prev)?;
    problem.residual(
        &state.to_vector(),
        &prev.to_vector(),
        dt,
        t,
        VertexRows::Coupled,
    )
}

pub fn assemble_tangent(
    problem: &Problem,
    state: &DiscreteState,
    dt: f64,
) -> Result<TripletMatrix> {
    check_state(problem, state)?;
    problem.tangent(&state.to_vector(), dt, VertexRows::Coupled)
}

fn check_state(problem: &Problem, s: &DiscreteState) -> Result<()> {
    if !s.matches(&problem.layout) {
        return Err(Error::DimensionMismatch {
            context: "discrete state",
            expected: problem.dim(),
            found: s.u.iter().chain(&s.w).map(Vec::len).sum::<usize>() + s.z.len(),
        });
    }
    Ok(())
}

/// Outward one-sided slope of `w` at the given end of its edge mesh.
pub fn outward_derivative(mesh: &EdgeMesh, w: &[f64], end: Endpoint) -> f64 {
    let n = mesh.len() - 1;
    match end {
        Endpoint::Source => (w[0] - w[1]) / (mesh.nodes[1] - mesh.nodes[0]),
        Endpoint::Terminal => (w[n] - w[n - 1]) / (mesh.nodes[n] - mesh.nodes[n - 1]),
    }
}

/// `eta(d_nu w) + (N + E) w - z lambda` at vertex `k`, one component per
/// incident edge in ascending edge order.
pub fn junction_flux_balance(
    problem: &Problem,
    state: &DiscreteState,
    k: usize,
) -> Result<Vec<f64>> {
    let js = problem.junctions.get(k).ok_or(Error::UnknownVertex(k))?;
    let vals: Vec<f64> = js
        .edge_order
        .iter()
        .map(|&(j, end)| state.w[j][problem.disc.edges[j].end_node(end)])
        .collect();
    let z = state.z[k];
    Ok(js
        .edge_order
        .iter()
        .enumerate()
        .map(|(n, &(j, end))| {
            let d = outward_derivative(&problem.disc.edges[j], &state.w[j], end);
            let mut v = problem.model.edge_flux.flux_1d(d) + js.e[n] * vals[n] - js.lam[n] * z;
            for (m, wm) in vals.iter().enumerate() {
                v += js.n[n][m] * wm;
            }
            v
        })
        .collect())
}

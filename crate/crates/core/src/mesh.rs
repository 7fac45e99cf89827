//! Conforming P1 meshes: triangulated subdomains, uniform edge partitions and
//! the node correspondences between them.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use spade::{ConstrainedDelaunayTriangulation, HasPosition, Point2, Triangulation};

use crate::error::{Error, Result};
use crate::geometry::{
    distance, point_in_polygon, segment_distance, signed_area, Endpoint, PartitionedDomain, Point,
};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeshKind {
    /// Constrained Delaunay triangulation with lattice Steiner points.
    #[default]
    Delaunay,
    /// Tensor grid split into right triangles; axis-aligned rectangles only.
    Structured,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EdgeMesh {
    pub edge: usize,
    /// Arclength coordinates, `0` first and `l_j` last.
    pub nodes: Vec<f64>,
}

impl EdgeMesh {
    pub fn uniform(edge: usize, length: f64, cells: usize) -> Self {
        let n = cells.max(1);
        let mut nodes: Vec<f64> = (0..=n).map(|q| length * q as f64 / n as f64).collect();
        nodes[n] = length;
        Self { edge, nodes }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn cell_count(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.cell_count()).map(|c| (c, c + 1))
    }

    pub fn length(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    /// Node index at the given endpoint.
    pub fn end_node(&self, end: Endpoint) -> usize {
        match end {
            Endpoint::Source => 0,
            Endpoint::Terminal => self.nodes.len() - 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryFacet {
    pub nodes: [usize; 2],
    pub length: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SubdomainMesh {
    pub subdomain: usize,
    pub nodes: Vec<Point>,
    /// Counter-clockwise node triples.
    pub triangles: Vec<[usize; 3]>,
    /// Facets on each adjacent edge, ordered by increasing arclength along the edge.
    pub boundary_facets: BTreeMap<usize, Vec<BoundaryFacet>>,
}

impl SubdomainMesh {
    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.nodes[a], self.nodes[b], self.nodes[c]);
        0.5 * ((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]))
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| self.triangle_area(t))
            .sum()
    }

    pub fn max_triangle_diameter(&self) -> f64 {
        self.triangles
            .iter()
            .map(|&[a, b, c]| {
                let (pa, pb, pc) = (self.nodes[a], self.nodes[b], self.nodes[c]);
                distance(pa, pb).max(distance(pb, pc)).max(distance(pc, pa))
            })
            .fold(0.0, f64::max)
    }
}

/// For every incidence `(subdomain i, edge j)`, the subdomain node matching
/// each edge node.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TraceMap {
    pub(crate) map: BTreeMap<(usize, usize), Vec<usize>>,
    pub(crate) subdomain_sizes: Vec<usize>,
}

impl TraceMap {
    /// Subdomain node ids indexed by edge node.
    pub fn nodes(&self, i: usize, j: usize) -> Result<&[usize]> {
        self.map
            .get(&(i, j))
            .map(Vec::as_slice)
            .ok_or(Error::NotIncident {
                subdomain: i,
                edge: j,
            })
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.map.keys().copied()
    }

    /// Copies edge nodal values onto the matched subdomain nodes; all other
    /// entries of the returned subdomain vector are zero.
    pub fn lift_edge_values(&self, i: usize, j: usize, edge_values: &[f64]) -> Result<Vec<f64>> {
        let nodes = self.nodes(i, j)?;
        if edge_values.len() != nodes.len() {
            return Err(Error::DimensionMismatch {
                context: "lift_edge_values",
                expected: nodes.len(),
                found: edge_values.len(),
            });
        }
        let mut out = vec![0.0; self.subdomain_sizes[i]];
        for (&n, &v) in nodes.iter().zip(edge_values) {
            out[n] = v;
        }
        Ok(out)
    }

    /// Transpose of [`lift_edge_values`](Self::lift_edge_values): reads the
    /// subdomain vector at the matched nodes.
    pub fn scatter_to_edge(
        &self,
        i: usize,
        j: usize,
        subdomain_values: &[f64],
    ) -> Result<Vec<f64>> {
        let nodes = self.nodes(i, j)?;
        if subdomain_values.len() != self.subdomain_sizes[i] {
            return Err(Error::DimensionMismatch {
                context: "scatter_to_edge",
                expected: self.subdomain_sizes[i],
                found: subdomain_values.len(),
            });
        }
        Ok(nodes.iter().map(|&n| subdomain_values[n]).collect())
    }
}

/// Edge node realizing each `(edge j, vertex k)` endpoint.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct VertexTrace {
    pub(crate) map: BTreeMap<(usize, usize), usize>,
}

impl VertexTrace {
    pub fn node(&self, j: usize, k: usize) -> Option<usize> {
        self.map.get(&(j, k)).copied()
    }
}

#[derive(Clone, Debug)]
pub struct Discretization {
    pub subdomains: Vec<SubdomainMesh>,
    pub edges: Vec<EdgeMesh>,
    pub trace: TraceMap,
    pub vertex_trace: VertexTrace,
    /// Mesh size actually used (after clamping).
    pub h: f64,
    pub kind: MeshKind,
}

impl Discretization {
    pub fn triangle_count(&self) -> usize {
        self.subdomains.iter().map(|m| m.triangles.len()).sum()
    }
}

pub fn mesh_domain(domain: &PartitionedDomain, target_h: f64) -> Result<Discretization> {
    mesh_domain_with(domain, target_h, MeshKind::Delaunay)
}

pub fn mesh_domain_with(
    domain: &PartitionedDomain,
    target_h: f64,
    kind: MeshKind,
) -> Result<Discretization> {
    if !(target_h > 0.0) || !target_h.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "mesh size must be positive, got {target_h}"
        )));
    }
    let l_min = domain
        .edges()
        .iter()
        .map(|e| e.length)
        .fold(f64::INFINITY, f64::min);
    let mut h = target_h;
    if h > l_min {
        h = 0.5 * l_min;
        log::warn!("mesh size {target_h} exceeds the shortest edge ({l_min}); clamped to {h}");
    }

    let edges: Vec<EdgeMesh> = domain
        .edges()
        .iter()
        .map(|e| {
            let cells = ((e.length / h) - 1e-9).ceil().max(1.0) as usize;
            EdgeMesh::uniform(e.id, e.length, cells)
        })
        .collect();

    let subdomains: Vec<SubdomainMesh> = (0..domain.subdomains().len())
        .into_par_iter()
        .map(|i| mesh_subdomain(domain, &edges, i, h, kind))
        .collect::<Result<_>>()?;

    let mut trace = TraceMap {
        map: BTreeMap::new(),
        subdomain_sizes: subdomains.iter().map(|m| m.nodes.len()).collect(),
    };
    for (i, m) in subdomains.iter().enumerate() {
        let tol = 1e-10 * domain.diameter().max(1.0);
        for j in domain.edges_of_subdomain(i)? {
            let em = &edges[j];
            let mut ids = Vec::with_capacity(em.len());
            for &s in &em.nodes {
                let p = domain.edge_point(j, s);
                let found = m
                    .nodes
                    .iter()
                    .position(|&q| distance(p, q) <= tol)
                    .ok_or_else(|| {
                        Error::Mesh(format!(
                            "subdomain {i} has no node at arclength {s} of edge {j}"
                        ))
                    })?;
                ids.push(found);
            }
            trace.map.insert((i, j), ids);
        }
    }

    let mut subdomains = subdomains;
    for (i, m) in subdomains.iter_mut().enumerate() {
        for j in domain.edges_of_subdomain(i)? {
            let ids = &trace.map[&(i, j)];
            let em = &edges[j];
            let facets = em
                .cells()
                .map(|(a, b)| BoundaryFacet {
                    nodes: [ids[a], ids[b]],
                    length: em.nodes[b] - em.nodes[a],
                })
                .collect();
            m.boundary_facets.insert(j, facets);
        }
    }

    let mut vertex_trace = VertexTrace::default();
    for e in domain.edges() {
        vertex_trace.map.insert((e.id, e.source), 0);
        vertex_trace
            .map
            .insert((e.id, e.terminal), edges[e.id].len() - 1);
    }

    Ok(Discretization {
        subdomains,
        edges,
        trace,
        vertex_trace,
        h,
        kind,
    })
}

/// Boundary node positions of subdomain `i` in loop order, without repeats.
fn boundary_nodes(domain: &PartitionedDomain, edges: &[EdgeMesh], i: usize) -> Vec<Point> {
    let sub = &domain.subdomains()[i];
    let mut out = Vec::new();
    for le in &sub.boundary_loop {
        let em = &edges[le.edge];
        let n = em.len();
        for q in 0..n - 1 {
            let s = if le.forward {
                em.nodes[q]
            } else {
                em.nodes[n - 1 - q]
            };
            out.push(domain.edge_point(le.edge, s));
        }
    }
    out
}

fn mesh_subdomain(
    domain: &PartitionedDomain,
    edges: &[EdgeMesh],
    i: usize,
    h: f64,
    kind: MeshKind,
) -> Result<SubdomainMesh> {
    let poly = domain.polygon(i);
    let area = signed_area(&poly);
    let diam = domain.diameter().max(f64::MIN_POSITIVE);
    if area.abs() <= 1e-12 * diam * diam {
        return Err(Error::Mesh(format!(
            "subdomain {i} has a degenerate (collinear) boundary"
        )));
    }
    let boundary = boundary_nodes(domain, edges, i);
    let (nodes, triangles) = match kind {
        MeshKind::Delaunay => delaunay(&poly, &boundary, h, i)?,
        MeshKind::Structured => structured(&poly, &boundary, i)?,
    };
    let mut mesh = SubdomainMesh {
        subdomain: i,
        nodes,
        triangles,
        boundary_facets: BTreeMap::new(),
    };
    for t in 0..mesh.triangles.len() {
        if mesh.triangle_area(t) < 0.0 {
            mesh.triangles[t].swap(1, 2);
        }
        if mesh.triangle_area(t) <= 0.0 {
            return Err(Error::Mesh(format!(
                "subdomain {i} produced a flat triangle"
            )));
        }
    }
    Ok(mesh)
}

#[derive(Clone, Copy, Debug)]
struct Site {
    p: Point2<f64>,
    id: usize,
}

impl HasPosition for Site {
    type Scalar = f64;
    fn position(&self) -> Point2<f64> {
        self.p
    }
}

fn delaunay(
    poly: &[Point],
    boundary: &[Point],
    h: f64,
    i: usize,
) -> Result<(Vec<Point>, Vec<[usize; 3]>)> {
    let mut nodes: Vec<Point> = boundary.to_vec();

    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in poly {
        for d in 0..2 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    let dy = h * 3f64.sqrt() / 2.0;
    let rows = ((hi[1] - lo[1]) / dy).ceil() as usize;
    let cols = ((hi[0] - lo[0]) / h).ceil() as usize + 1;
    let n = poly.len();
    for r in 1..rows {
        let y = lo[1] + r as f64 * dy;
        let shift = if r % 2 == 1 { 0.5 * h } else { 0.0 };
        for c in 0..=cols {
            let p = [lo[0] + shift + c as f64 * h, y];
            if !point_in_polygon(poly, p) {
                continue;
            }
            let clear = (0..n).all(|a| segment_distance(poly[a], poly[(a + 1) % n], p) >= 0.5 * h);
            if clear {
                nodes.push(p);
            }
        }
    }

    let mut cdt = ConstrainedDelaunayTriangulation::<Site>::new();
    let mut handles = Vec::with_capacity(nodes.len());
    for (id, p) in nodes.iter().enumerate() {
        let handle = cdt
            .insert(Site {
                p: Point2::new(p[0], p[1]),
                id,
            })
            .map_err(|e| Error::Mesh(format!("subdomain {i}: {e:?}")))?;
        handles.push(handle);
    }
    if cdt.num_vertices() != nodes.len() {
        return Err(Error::Mesh(format!("subdomain {i}: coincident mesh nodes")));
    }
    let nb = boundary.len();
    for a in 0..nb {
        let (from, to) = (handles[a], handles[(a + 1) % nb]);
        if !cdt.can_add_constraint(from, to) {
            return Err(Error::Mesh(format!(
                "subdomain {i}: boundary constraint crosses the mesh"
            )));
        }
        cdt.add_constraint(from, to);
    }

    let all: Vec<[usize; 3]> = cdt
        .inner_faces()
        .map(|f| f.vertices().map(|v| v.data().id))
        .collect();
    let inside = interior_faces(&all, nb);
    let triangles = collapse_slivers(
        &nodes,
        all.into_iter()
            .zip(inside)
            .filter(|t| t.1)
            .map(|t| t.0)
            .collect(),
        h,
    )
    .ok_or_else(|| {
        Error::Mesh(format!(
            "subdomain {i}: could not repair a flat boundary triangle"
        ))
    })?;
    Ok((nodes, triangles))
}

fn key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

/// Marks faces of the convex-hull triangulation lying inside the boundary
/// cycle `0, 1, .., nb - 1` by flooding from the hull across unconstrained edges.
fn interior_faces(faces: &[[usize; 3]], nb: usize) -> Vec<bool> {
    let constraint = |a: usize, b: usize| {
        a < nb && b < nb && (a + 1 == b || b + 1 == a || key(a, b) == (0, nb - 1))
    };
    let mut by_edge: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (f, t) in faces.iter().enumerate() {
        for k in 0..3 {
            by_edge
                .entry(key(t[k], t[(k + 1) % 3]))
                .or_default()
                .push(f);
        }
    }
    let mut outside = vec![false; faces.len()];
    let mut stack: Vec<usize> = by_edge
        .iter()
        .filter(|(e, fs)| fs.len() == 1 && !constraint(e.0, e.1))
        .map(|(_, fs)| fs[0])
        .collect();
    while let Some(f) = stack.pop() {
        if outside[f] {
            continue;
        }
        outside[f] = true;
        let t = faces[f];
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            if constraint(a, b) {
                continue;
            }
            for &g in &by_edge[&key(a, b)] {
                if !outside[g] {
                    stack.push(g);
                }
            }
        }
    }
    outside.into_iter().map(|o| !o).collect()
}

fn raw_area(nodes: &[Point], t: [usize; 3]) -> f64 {
    let (a, b, c) = (nodes[t[0]], nodes[t[1]], nodes[t[2]]);
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

/// Boundary nodes on one straight side are collinear only up to rounding, so
/// the triangulation may contain flat faces spanning three of them. Each such
/// face is merged with its neighbour across the long side, which is then
/// split at the middle node.
fn collapse_slivers(nodes: &[Point], mut tris: Vec<[usize; 3]>, h: f64) -> Option<Vec<[usize; 3]>> {
    let flat = |t: [usize; 3]| raw_area(nodes, t).abs() <= 1e-9 * h * h;
    let mut guard = 0;
    while let Some(s) = tris.iter().position(|&t| flat(t)) {
        guard += 1;
        if guard > 10 * tris.len() {
            return None;
        }
        let t = tris[s];
        // middle node is opposite the longest side
        let k = (0..3)
            .max_by(|&x, &y| {
                let lx = distance(nodes[t[(x + 1) % 3]], nodes[t[(x + 2) % 3]]);
                let ly = distance(nodes[t[(y + 1) % 3]], nodes[t[(y + 2) % 3]]);
                lx.total_cmp(&ly)
            })
            .unwrap();
        let (m, a, c) = (t[k], t[(k + 1) % 3], t[(k + 2) % 3]);
        let other = tris
            .iter()
            .enumerate()
            .position(|(f, u)| f != s && u.contains(&a) && u.contains(&c))?;
        let u = tris[other];
        let d = *u.iter().find(|&&n| n != a && n != c)?;
        let (hi, lo) = (s.max(other), s.min(other));
        tris.swap_remove(hi);
        tris.swap_remove(lo);
        tris.push([a, m, d]);
        tris.push([m, c, d]);
    }
    Some(tris)
}

fn structured(
    poly: &[Point],
    boundary: &[Point],
    i: usize,
) -> Result<(Vec<Point>, Vec<[usize; 3]>)> {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in poly {
        for d in 0..2 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    let box_area = (hi[0] - lo[0]) * (hi[1] - lo[1]);
    let scale = (hi[0] - lo[0]).max(hi[1] - lo[1]);
    let tol = 1e-10 * scale;
    if (signed_area(poly).abs() - box_area).abs() > 1e-10 * box_area {
        return Err(Error::Mesh(format!(
            "structured meshing needs an axis-aligned rectangle; subdomain {i} is not one"
        )));
    }
    let coords_on = |axis: usize, level: f64| {
        let mut c: Vec<f64> = boundary
            .iter()
            .filter(|p| (p[1 - axis] - level).abs() <= tol)
            .map(|p| p[axis])
            .collect();
        c.sort_by(f64::total_cmp);
        c
    };
    let xs = coords_on(0, lo[1]);
    let ys = coords_on(1, lo[0]);
    let same = |a: &[f64], b: &[f64]| {
        a.len() == b.len() && a.iter().zip(b).all(|(p, q)| (p - q).abs() <= tol)
    };
    if !same(&xs, &coords_on(0, hi[1])) || !same(&ys, &coords_on(1, hi[0])) {
        return Err(Error::Mesh(format!(
            "structured meshing needs matching nodes on opposite sides of subdomain {i}"
        )));
    }
    let (nx, ny) = (xs.len(), ys.len());
    let mut nodes = Vec::with_capacity(nx * ny);
    for &y in &ys {
        for &x in &xs {
            nodes.push([x, y]);
        }
    }
    let id = |a: usize, b: usize| b * nx + a;
    let mut triangles = Vec::with_capacity(2 * (nx - 1) * (ny - 1));
    for b in 0..ny - 1 {
        for a in 0..nx - 1 {
            triangles.push([id(a, b), id(a + 1, b), id(a + 1, b + 1)]);
            triangles.push([id(a, b), id(a + 1, b + 1), id(a, b + 1)]);
        }
    }
    Ok((nodes, triangles))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::presets;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeSet;

    fn check_invariants(domain: &PartitionedDomain, d: &Discretization) {
        for (i, m) in d.subdomains.iter().enumerate() {
            let poly_area = signed_area(&domain.polygon(i)).abs();
            assert!(
                (m.area() - poly_area).abs() <= 1e-10 * poly_area,
                "area of {i}"
            );
            for t in 0..m.triangles.len() {
                assert!(m.triangle_area(t) > 0.0);
            }
            assert!(
                m.max_triangle_diameter() <= 2.0 * d.h + 1e-12,
                "{} vs {}",
                m.max_triangle_diameter(),
                d.h
            );
            let tol = 1e-12 * domain.diameter();
            for a in 0..m.nodes.len() {
                for b in a + 1..m.nodes.len() {
                    assert!(distance(m.nodes[a], m.nodes[b]) > tol);
                }
            }
            let mut mesh_edges = BTreeSet::new();
            for t in &m.triangles {
                for k in 0..3 {
                    let (a, b) = (t[k], t[(k + 1) % 3]);
                    mesh_edges.insert((a.min(b), a.max(b)));
                }
            }
            for (&j, facets) in &m.boundary_facets {
                let total: f64 = facets.iter().map(|f| f.length).sum();
                let l = domain.edges()[j].length;
                assert!((total - l).abs() <= 1e-10 * l);
                let e = &domain.edges()[j];
                let (a, b) = (
                    domain.vertices()[e.source].position,
                    domain.vertices()[e.terminal].position,
                );
                for f in facets {
                    let [p, q] = f.nodes;
                    assert!(
                        mesh_edges.contains(&(p.min(q), p.max(q))),
                        "facet is not a triangle side"
                    );
                    for n in f.nodes {
                        assert!(segment_distance(a, b, m.nodes[n]) <= 1e-10 * l);
                    }
                }
            }
        }
        for (i, j) in d.trace.pairs() {
            let ids = d.trace.nodes(i, j).unwrap();
            let set: BTreeSet<_> = ids.iter().collect();
            assert_eq!(set.len(), ids.len(), "trace map is not injective");
            for (q, &n) in ids.iter().enumerate() {
                let p = domain.edge_point(j, d.edges[j].nodes[q]);
                assert!(distance(p, d.subdomains[i].nodes[n]) <= 1e-10 * domain.edges()[j].length);
            }
        }
    }

    #[test]
    fn unit_square_half() {
        let domain = presets::unit_square();
        let d = mesh_domain(&domain, 0.5).unwrap();
        for e in &d.edges {
            assert!(e.cell_count() >= 2);
            assert_eq!(e.nodes[0], 0.0);
            assert_eq!(e.length(), 1.0);
        }
        assert_eq!(d.trace.pairs().count(), 4);
        check_invariants(&domain, &d);
    }

    #[test]
    fn two_rectangles_share_edge_mesh() {
        let domain = presets::two_rectangles();
        let d = mesh_domain(&domain, 0.25).unwrap();
        check_invariants(&domain, &d);
        let left = d.trace.nodes(0, 6).unwrap();
        let right = d.trace.nodes(1, 6).unwrap();
        assert_eq!(left.len(), d.edges[6].len());
        assert_eq!(right.len(), d.edges[6].len());
        for q in 0..left.len() {
            assert!(
                distance(
                    d.subdomains[0].nodes[left[q]],
                    d.subdomains[1].nodes[right[q]]
                ) < 1e-14
            );
        }
        assert!(d.trace.nodes(0, 1).is_err());
    }

    #[test]
    fn refinement_doubles_cells() {
        let domain = presets::three_cell_pentagon();
        let a = mesh_domain(&domain, 0.2).unwrap();
        let b = mesh_domain(&domain, 0.1).unwrap();
        for (ea, eb) in a.edges.iter().zip(&b.edges) {
            let (na, nb) = (ea.cell_count() as i64, eb.cell_count() as i64);
            assert!((nb - 2 * na).abs() <= 1, "{na} -> {nb}");
        }
        check_invariants(&domain, &a);
        check_invariants(&domain, &b);
    }

    #[test]
    fn structured_variant() {
        let domain = presets::two_rectangles();
        let d = mesh_domain_with(&domain, 0.125, MeshKind::Structured).unwrap();
        check_invariants(&domain, &d);
        assert_eq!(d.subdomains[0].triangles.len(), 2 * 4 * 8);
        let pent = presets::three_cell_pentagon();
        assert!(mesh_domain_with(&pent, 0.2, MeshKind::Structured).is_err());
    }

    #[test]
    fn oversized_h_is_clamped() {
        let domain = presets::two_rectangles();
        let d = mesh_domain(&domain, 3.0).unwrap();
        assert_eq!(d.h, 0.25);
        check_invariants(&domain, &d);
    }

    #[test]
    fn vertex_trace_hits_endpoints() {
        let domain = presets::three_cell_pentagon();
        let d = mesh_domain(&domain, 0.3).unwrap();
        for e in domain.edges() {
            assert_eq!(d.vertex_trace.node(e.id, e.source), Some(0));
            assert_eq!(
                d.vertex_trace.node(e.id, e.terminal),
                Some(d.edges[e.id].len() - 1)
            );
            let s = d.edges[e.id].nodes[d.edges[e.id].len() - 1];
            assert!(
                distance(
                    domain.edge_point(e.id, s),
                    domain.vertices()[e.terminal].position
                ) < 1e-14
            );
        }
    }

    #[test]
    fn lift_constant_and_linear() {
        let domain = presets::two_rectangles();
        let d = mesh_domain(&domain, 0.2).unwrap();
        for (i, j) in d.trace.pairs().collect::<Vec<_>>() {
            let em = &d.edges[j];
            let ones = vec![1.0; em.len()];
            let lifted = d.trace.lift_edge_values(i, j, &ones).unwrap();
            for &n in d.trace.nodes(i, j).unwrap() {
                assert_eq!(lifted[n], 1.0);
            }
            let lin: Vec<f64> = em.nodes.iter().map(|s| 2.0 * s - 0.3).collect();
            let lifted = d.trace.lift_edge_values(i, j, &lin).unwrap();
            // read back through positions along the edge
            let e = &domain.edges()[j];
            let a = domain.vertices()[e.source].position;
            for &n in d.trace.nodes(i, j).unwrap() {
                let s = distance(a, d.subdomains[i].nodes[n]);
                assert!((lifted[n] - (2.0 * s - 0.3)).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn lift_scatter_adjoint() {
        let domain = presets::three_cell_pentagon();
        let d = mesh_domain(&domain, 0.25).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pairs: Vec<_> = d.trace.pairs().collect();
        for trial in 0..20 {
            let (i, j) = pairs[trial % pairs.len()];
            let x: Vec<f64> = (0..d.edges[j].len())
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect();
            let y: Vec<f64> = (0..d.subdomains[i].nodes.len())
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect();
            let lx = d.trace.lift_edge_values(i, j, &x).unwrap();
            let sy = d.trace.scatter_to_edge(i, j, &y).unwrap();
            let lhs: f64 = lx.iter().zip(&y).map(|(a, b)| a * b).sum();
            let rhs: f64 = x.iter().zip(&sy).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() <= 1e-13 * lhs.abs().max(1.0));
        }
        assert!(matches!(
            d.trace.lift_edge_values(0, 1, &[0.0]),
            Err(Error::NotIncident { .. })
        ));
    }

    #[test]
    fn meshing_is_deterministic() {
        let domain = presets::three_cell_pentagon();
        let a = mesh_domain(&domain, 0.15).unwrap();
        let b = mesh_domain(&domain, 0.15).unwrap();
        assert_eq!(a.subdomains, b.subdomains);
    }
}

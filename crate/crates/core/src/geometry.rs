//! Polygonal partition of a planar domain by an embedded metric graph.
//!
//! The partition is ingested as explicit data (vertex positions, straight
//! edges with an orientation, and one closed boundary loop per subdomain).
//! Nothing here computes a planar subdivision; [`PartitionedDomain::validate`]
//! only checks that the given data describes an admissible one.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

pub const DEFAULT_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct Vertex {
    pub id: usize,
    pub position: Point,
}

/// A straight edge with local coordinate `x in [0, length]`, `x = 0` at the
/// source vertex.
#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub id: usize,
    pub source: usize,
    pub terminal: usize,
    pub length: f64,
    /// Subdomains whose boundary loop contains this edge, ascending.
    pub adjacent_subdomains: Vec<usize>,
}

/// One entry of a subdomain boundary loop. `forward` means the loop runs from
/// the edge's source to its terminal vertex.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LoopEdge {
    pub edge: usize,
    pub forward: bool,
}

impl LoopEdge {
    pub fn forward(edge: usize) -> Self {
        Self {
            edge,
            forward: true,
        }
    }

    pub fn reversed(edge: usize) -> Self {
        Self {
            edge,
            forward: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Subdomain {
    pub id: usize,
    pub boundary_loop: Vec<LoopEdge>,
}

/// Which end of an edge touches a vertex.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Endpoint {
    Source,
    Terminal,
}

impl Endpoint {
    /// Sign of the outward normal of the edge interval at this end.
    pub fn outward_sign(self) -> f64 {
        match self {
            Endpoint::Source => -1.0,
            Endpoint::Terminal => 1.0,
        }
    }
}

/// Edge description used to build a domain. A stated `length` is kept and
/// checked against the endpoint distance by validation.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeSpec {
    pub source: usize,
    pub terminal: usize,
    pub length: Option<f64>,
}

impl EdgeSpec {
    pub fn new(source: usize, terminal: usize) -> Self {
        Self {
            source,
            terminal,
            length: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum GeometryViolation {
    LowDegree {
        vertex: usize,
        degree: usize,
    },
    DegenerateEdge {
        edge: usize,
    },
    LengthMismatch {
        edge: usize,
        stated: f64,
        euclidean: f64,
    },
    OrphanEdge {
        edge: usize,
    },
    TooManySubdomains {
        edge: usize,
        count: usize,
    },
    OpenLoop {
        subdomain: usize,
        position: usize,
    },
    NonSimpleLoop {
        subdomain: usize,
    },
    DegeneratePolygon {
        subdomain: usize,
    },
    CrossingEdges {
        first: usize,
        second: usize,
    },
    VertexOnEdge {
        vertex: usize,
        edge: usize,
    },
    SameSideAdjacency {
        edge: usize,
    },
    OpenHull {
        vertex: usize,
    },
    CoverageMismatch {
        subdomain_area: f64,
        hull_area: f64,
    },
}

impl fmt::Display for GeometryViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use GeometryViolation::*;
        match self {
            LowDegree { vertex, degree } => {
                write!(f, "vertex {vertex} has degree {degree}; at least 2 required")
            }
            DegenerateEdge { edge } => write!(f, "edge {edge} has coincident endpoints"),
            LengthMismatch {
                edge,
                stated,
                euclidean,
            } => write!(
                f,
                "edge {edge} states length {stated} but its endpoints are {euclidean} apart"
            ),
            OrphanEdge { edge } => write!(f, "edge {edge} bounds no subdomain"),
            TooManySubdomains { edge, count } => {
                write!(f, "edge {edge} is listed by {count} subdomains; at most 2 allowed")
            }
            OpenLoop {
                subdomain,
                position,
            } => write!(
                f,
                "boundary loop of subdomain {subdomain} breaks after entry {position}"
            ),
            NonSimpleLoop { subdomain } => {
                write!(f, "boundary loop of subdomain {subdomain} is not a simple polygon")
            }
            DegeneratePolygon { subdomain } => {
                write!(f, "subdomain {subdomain} has (near) zero area")
            }
            CrossingEdges { first, second } => {
                write!(f, "edges {first} and {second} intersect away from a shared vertex")
            }
            VertexOnEdge { vertex, edge } => {
                write!(f, "vertex {vertex} lies in the interior of edge {edge}")
            }
            SameSideAdjacency { edge } => write!(
                f,
                "both subdomains adjacent to edge {edge} lie on the same side of it"
            ),
            OpenHull { vertex } => write!(
                f,
                "outer boundary edges do not close up at vertex {vertex}"
            ),
            CoverageMismatch {
                subdomain_area,
                hull_area,
            } => write!(
                f,
                "subdomain areas sum to {subdomain_area} but the outer boundary encloses {hull_area}"
            ),
        }
    }
}

/// Subdomains, edges and vertices with their incidences. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct PartitionedDomain {
    vertices: Vec<Vertex>,
    edges: Vec<Edge>,
    subdomains: Vec<Subdomain>,
    tolerance: f64,
}

impl PartitionedDomain {
    /// Builds the incidence structure. Fails only on out-of-range indices;
    /// every other defect is reported by [`validate`](Self::validate).
    pub fn new(
        positions: Vec<Point>,
        edges: Vec<EdgeSpec>,
        loops: Vec<Vec<LoopEdge>>,
    ) -> Result<Self> {
        let nv = positions.len();
        let vertices: Vec<Vertex> = positions
            .into_iter()
            .enumerate()
            .map(|(id, position)| Vertex { id, position })
            .collect();
        let mut built = Vec::with_capacity(edges.len());
        for (id, spec) in edges.into_iter().enumerate() {
            for v in [spec.source, spec.terminal] {
                if v >= nv {
                    return Err(Error::Geometry(format!(
                        "edge {id} references vertex {v}, but only {nv} vertices exist"
                    )));
                }
            }
            let length = spec.length.unwrap_or_else(|| {
                distance(
                    vertices[spec.source].position,
                    vertices[spec.terminal].position,
                )
            });
            built.push(Edge {
                id,
                source: spec.source,
                terminal: spec.terminal,
                length,
                adjacent_subdomains: Vec::new(),
            });
        }
        let ne = built.len();
        let mut subdomains = Vec::with_capacity(loops.len());
        for (id, boundary_loop) in loops.into_iter().enumerate() {
            for le in &boundary_loop {
                if le.edge >= ne {
                    return Err(Error::Geometry(format!(
                        "subdomain {id} references edge {}, but only {ne} edges exist",
                        le.edge
                    )));
                }
                built[le.edge].adjacent_subdomains.push(id);
            }
            subdomains.push(Subdomain { id, boundary_loop });
        }
        for e in &mut built {
            e.adjacent_subdomains.sort_unstable();
        }
        Ok(Self {
            vertices,
            edges: built,
            subdomains,
            tolerance: DEFAULT_TOLERANCE,
        })
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn subdomains(&self) -> &[Subdomain] {
        &self.subdomains
    }

    pub fn vertex(&self, k: usize) -> Result<&Vertex> {
        self.vertices.get(k).ok_or(Error::UnknownVertex(k))
    }

    pub fn edge(&self, j: usize) -> Result<&Edge> {
        self.edges.get(j).ok_or(Error::UnknownEdge(j))
    }

    pub fn subdomain(&self, i: usize) -> Result<&Subdomain> {
        self.subdomains.get(i).ok_or(Error::UnknownSubdomain(i))
    }

    pub fn degree(&self, k: usize) -> usize {
        self.edges
            .iter()
            .map(|e| (e.source == k) as usize + (e.terminal == k) as usize)
            .sum()
    }

    /// Edges touching vertex `k`, ascending by edge id.
    pub fn edges_at_vertex(&self, k: usize) -> Result<Vec<(usize, Endpoint)>> {
        self.vertex(k)?;
        let mut out = Vec::new();
        for e in &self.edges {
            if e.source == k {
                out.push((e.id, Endpoint::Source));
            }
            if e.terminal == k {
                out.push((e.id, Endpoint::Terminal));
            }
        }
        Ok(out)
    }

    /// Edges on the boundary of subdomain `i`, deduplicated and ascending.
    pub fn edges_of_subdomain(&self, i: usize) -> Result<Vec<usize>> {
        let sub = self.subdomain(i)?;
        let mut ids: Vec<usize> = sub.boundary_loop.iter().map(|le| le.edge).collect();
        ids.sort_unstable();
        ids.dedup();
        Ok(ids)
    }

    pub fn endpoint_vertex(&self, j: usize, end: Endpoint) -> usize {
        match end {
            Endpoint::Source => self.edges[j].source,
            Endpoint::Terminal => self.edges[j].terminal,
        }
    }

    /// Point at arclength `s` along edge `j`.
    pub fn edge_point(&self, j: usize, s: f64) -> Point {
        let e = &self.edges[j];
        let a = self.vertices[e.source].position;
        let b = self.vertices[e.terminal].position;
        let t = if e.length > 0.0 { s / e.length } else { 0.0 };
        [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
    }

    pub fn is_hull_edge(&self, j: usize) -> bool {
        self.edges[j].adjacent_subdomains.len() == 1
    }

    /// Start vertex of each loop entry in traversal order.
    pub fn loop_vertices(&self, i: usize) -> Vec<usize> {
        self.subdomains[i]
            .boundary_loop
            .iter()
            .map(|le| {
                let e = &self.edges[le.edge];
                if le.forward {
                    e.source
                } else {
                    e.terminal
                }
            })
            .collect()
    }

    pub fn polygon(&self, i: usize) -> Vec<Point> {
        self.loop_vertices(i)
            .into_iter()
            .map(|v| self.vertices[v].position)
            .collect()
    }

    pub fn subdomain_area(&self, i: usize) -> f64 {
        signed_area(&self.polygon(i)).abs()
    }

    /// Diameter of the vertex cloud; scale for absolute tolerances.
    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for a in &self.vertices {
            for b in &self.vertices {
                d = d.max(distance(a.position, b.position));
            }
        }
        d
    }

    /// Every violated admissibility condition; empty iff the domain is admissible.
    pub fn validate(&self) -> Vec<GeometryViolation> {
        use GeometryViolation::*;
        let mut out = Vec::new();
        let tol = self.tolerance;
        let diam = self.diameter().max(f64::MIN_POSITIVE);

        for v in &self.vertices {
            let degree = self.degree(v.id);
            if degree < 2 {
                out.push(LowDegree {
                    vertex: v.id,
                    degree,
                });
            }
        }

        for e in &self.edges {
            let euclidean = distance(
                self.vertices[e.source].position,
                self.vertices[e.terminal].position,
            );
            if e.source == e.terminal || euclidean <= tol * diam {
                out.push(DegenerateEdge { edge: e.id });
                continue;
            }
            if (e.length - euclidean).abs() > tol * euclidean {
                out.push(LengthMismatch {
                    edge: e.id,
                    stated: e.length,
                    euclidean,
                });
            }
            match e.adjacent_subdomains.len() {
                0 => out.push(OrphanEdge { edge: e.id }),
                1 | 2 => {}
                count => out.push(TooManySubdomains { edge: e.id, count }),
            }
        }

        let mut oriented_areas = vec![0.0; self.subdomains.len()];
        for sub in &self.subdomains {
            let lp = &sub.boundary_loop;
            let n = lp.len();
            let mut closed = n > 0;
            for pos in 0..n {
                let cur = lp[pos];
                let next = lp[(pos + 1) % n];
                if self.loop_end(cur) != self.loop_start(next) {
                    out.push(OpenLoop {
                        subdomain: sub.id,
                        position: pos,
                    });
                    closed = false;
                }
            }
            if !closed {
                continue;
            }
            let verts = self.loop_vertices(sub.id);
            let mut seen = verts.clone();
            seen.sort_unstable();
            seen.dedup();
            let poly = self.polygon(sub.id);
            if seen.len() != verts.len()
                || n < 3
                || polygon_self_intersects(&poly, tol * diam * diam)
            {
                out.push(NonSimpleLoop { subdomain: sub.id });
                continue;
            }
            let area = signed_area(&poly);
            if area.abs() <= tol * diam * diam {
                out.push(DegeneratePolygon { subdomain: sub.id });
                continue;
            }
            oriented_areas[sub.id] = area;
        }

        // Interior edges must be traversed in opposite directions once both
        // loops are normalised to the same orientation.
        for e in &self.edges {
            if e.adjacent_subdomains.len() != 2 {
                continue;
            }
            let dirs: Vec<Option<f64>> = e
                .adjacent_subdomains
                .iter()
                .map(|&i| {
                    let a = oriented_areas[i];
                    if a == 0.0 {
                        return None;
                    }
                    self.subdomains[i]
                        .boundary_loop
                        .iter()
                        .find(|le| le.edge == e.id)
                        .map(|le| if le.forward { a.signum() } else { -a.signum() })
                })
                .collect();
            if let (Some(a), Some(b)) = (dirs[0], dirs[1]) {
                if a == b {
                    out.push(SameSideAdjacency { edge: e.id });
                }
            }
        }

        let eps = tol * diam * diam;
        for a in 0..self.edges.len() {
            for b in (a + 1)..self.edges.len() {
                if self.edges_conflict(a, b, eps) {
                    out.push(CrossingEdges {
                        first: a,
                        second: b,
                    });
                }
            }
        }
        for v in &self.vertices {
            for e in &self.edges {
                if e.source == v.id || e.terminal == v.id {
                    continue;
                }
                let p = self.vertices[e.source].position;
                let q = self.vertices[e.terminal].position;
                if on_segment_interior(p, q, v.position, eps) {
                    out.push(VertexOnEdge {
                        vertex: v.id,
                        edge: e.id,
                    });
                }
            }
        }

        let mut hull_count: BTreeMap<usize, usize> = BTreeMap::new();
        for e in self
            .edges
            .iter()
            .filter(|e| e.adjacent_subdomains.len() == 1)
        {
            *hull_count.entry(e.source).or_default() += 1;
            *hull_count.entry(e.terminal).or_default() += 1;
        }
        let mut hull_ok = true;
        for (&vertex, &count) in &hull_count {
            if count % 2 == 1 {
                out.push(OpenHull { vertex });
                hull_ok = false;
            }
        }
        let all_loops_ok = !out.iter().any(|v| {
            matches!(
                v,
                OpenLoop { .. }
                    | NonSimpleLoop { .. }
                    | DegeneratePolygon { .. }
                    | SameSideAdjacency { .. }
            )
        });
        if hull_ok && all_loops_ok && !self.subdomains.is_empty() {
            let subdomain_area: f64 = oriented_areas.iter().map(|a| a.abs()).sum();
            if let Some(hull_area) = self.hull_area() {
                if (subdomain_area - hull_area).abs() > 1e-10 * hull_area.max(tol) {
                    out.push(CoverageMismatch {
                        subdomain_area,
                        hull_area,
                    });
                }
            }
        }
        out
    }

    fn loop_start(&self, le: LoopEdge) -> usize {
        let e = &self.edges[le.edge];
        if le.forward {
            e.source
        } else {
            e.terminal
        }
    }

    fn loop_end(&self, le: LoopEdge) -> usize {
        let e = &self.edges[le.edge];
        if le.forward {
            e.terminal
        } else {
            e.source
        }
    }

    /// Area enclosed by the outer boundary, chaining single-sided edges into
    /// cycles. The largest cycle is the hull; any further cycles are holes.
    fn hull_area(&self) -> Option<f64> {
        let hull: Vec<&Edge> = self
            .edges
            .iter()
            .filter(|e| e.adjacent_subdomains.len() == 1)
            .collect();
        if hull.is_empty() {
            return None;
        }
        let mut used = vec![false; hull.len()];
        let mut areas = Vec::new();
        for start in 0..hull.len() {
            if used[start] {
                continue;
            }
            used[start] = true;
            let first = hull[start].source;
            let mut cur = hull[start].terminal;
            let mut poly = vec![self.vertices[first].position];
            let mut guard = 0;
            while cur != first {
                poly.push(self.vertices[cur].position);
                let next = (0..hull.len())
                    .find(|&m| !used[m] && (hull[m].source == cur || hull[m].terminal == cur))?;
                used[next] = true;
                cur = if hull[next].source == cur {
                    hull[next].terminal
                } else {
                    hull[next].source
                };
                guard += 1;
                if guard > hull.len() {
                    return None;
                }
            }
            areas.push(signed_area(&poly).abs());
        }
        areas.sort_by(|a, b| b.total_cmp(a));
        Some(areas[0] - areas[1..].iter().sum::<f64>())
    }

    fn edges_conflict(&self, a: usize, b: usize, eps: f64) -> bool {
        let ea = &self.edges[a];
        let eb = &self.edges[b];
        let pa = self.vertices[ea.source].position;
        let qa = self.vertices[ea.terminal].position;
        let pb = self.vertices[eb.source].position;
        let qb = self.vertices[eb.terminal].position;
        let shared: Vec<usize> = [ea.source, ea.terminal]
            .into_iter()
            .filter(|v| *v == eb.source || *v == eb.terminal)
            .collect();
        match shared.len() {
            0 => segments_intersect(pa, qa, pb, qb, eps),
            1 => {
                // Sharing one endpoint: they conflict only if they overlap along a line.
                let s = self.vertices[shared[0]].position;
                let oa = if ea.source == shared[0] { qa } else { pa };
                let ob = if eb.source == shared[0] { qb } else { pb };
                cross(sub(oa, s), sub(ob, s)).abs() <= eps && dot(sub(oa, s), sub(ob, s)) > 0.0
            }
            _ => true,
        }
    }
}

pub fn validate_geometry(domain: &PartitionedDomain) -> Vec<GeometryViolation> {
    domain.validate()
}

pub fn distance(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

pub fn signed_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    let mut s = 0.0;
    for k in 0..n {
        let a = poly[k];
        let b = poly[(k + 1) % n];
        s += a[0] * b[1] - a[1] * b[0];
    }
    0.5 * s
}

pub fn point_in_polygon(poly: &[Point], p: Point) -> bool {
    let n = poly.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Distance from `p` to the segment `[a, b]`.
pub fn segment_distance(a: Point, b: Point, p: Point) -> f64 {
    let ab = sub(b, a);
    let len2 = dot(ab, ab);
    let t = if len2 > 0.0 {
        (dot(sub(p, a), ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    distance(p, [a[0] + t * ab[0], a[1] + t * ab[1]])
}

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    cross(sub(b, a), sub(c, a))
}

fn on_segment_interior(a: Point, b: Point, p: Point, eps: f64) -> bool {
    if orient(a, b, p).abs() > eps {
        return false;
    }
    let ab = sub(b, a);
    let t = dot(sub(p, a), ab) / dot(ab, ab);
    let margin = eps.sqrt() / dot(ab, ab).sqrt();
    t > margin && t < 1.0 - margin
}

fn segments_intersect(p1: Point, q1: Point, p2: Point, q2: Point, eps: f64) -> bool {
    let d1 = orient(p2, q2, p1);
    let d2 = orient(p2, q2, q1);
    let d3 = orient(p1, q1, p2);
    let d4 = orient(p1, q1, q2);
    if ((d1 > eps && d2 < -eps) || (d1 < -eps && d2 > eps))
        && ((d3 > eps && d4 < -eps) || (d3 < -eps && d4 > eps))
    {
        return true;
    }
    let touches = |a: Point, b: Point, p: Point, d: f64| {
        d.abs() <= eps
            && p[0] >= a[0].min(b[0]) - eps.sqrt()
            && p[0] <= a[0].max(b[0]) + eps.sqrt()
            && p[1] >= a[1].min(b[1]) - eps.sqrt()
            && p[1] <= a[1].max(b[1]) + eps.sqrt()
    };
    touches(p2, q2, p1, d1)
        || touches(p2, q2, q1, d2)
        || touches(p1, q1, p2, d3)
        || touches(p1, q1, q2, d4)
}

fn polygon_self_intersects(poly: &[Point], eps: f64) -> bool {
    let n = poly.len();
    for a in 0..n {
        for b in (a + 1)..n {
            // Skip neighbouring sides, which share a corner.
            if b == a + 1 || (a == 0 && b == n - 1) {
                continue;
            }
            if segments_intersect(poly[a], poly[(a + 1) % n], poly[b], poly[(b + 1) % n], eps) {
                return true;
            }
        }
    }
    false
}

/// Reference partitions used by tests, benches and the example configs.
pub mod presets {
    use super::*;

    /// Unit square as a single subdomain, edges counter-clockwise from the origin.
    pub fn unit_square() -> PartitionedDomain {
        PartitionedDomain::new(
            vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            vec![
                EdgeSpec::new(0, 1),
                EdgeSpec::new(1, 2),
                EdgeSpec::new(2, 3),
                EdgeSpec::new(3, 0),
            ],
            vec![(0..4).map(LoopEdge::forward).collect()],
        )
        .expect("static geometry")
    }

    /// Unit square split by the segment `x = 0.5` into two rectangles.
    ///
    /// Vertices: 0 (0,0), 1 (0.5,0), 2 (1,0), 3 (1,1), 4 (0.5,1), 5 (0,1).
    /// Edge 6 runs from vertex 1 up to vertex 4 and is shared.
    pub fn two_rectangles() -> PartitionedDomain {
        PartitionedDomain::new(
            vec![
                [0.0, 0.0],
                [0.5, 0.0],
                [1.0, 0.0],
                [1.0, 1.0],
                [0.5, 1.0],
                [0.0, 1.0],
            ],
            vec![
                EdgeSpec::new(0, 1),
                EdgeSpec::new(1, 2),
                EdgeSpec::new(2, 3),
                EdgeSpec::new(3, 4),
                EdgeSpec::new(4, 5),
                EdgeSpec::new(5, 0),
                EdgeSpec::new(1, 4),
            ],
            vec![
                vec![
                    LoopEdge::forward(0),
                    LoopEdge::forward(6),
                    LoopEdge::forward(4),
                    LoopEdge::forward(5),
                ],
                vec![
                    LoopEdge::forward(1),
                    LoopEdge::forward(2),
                    LoopEdge::forward(3),
                    LoopEdge::reversed(6),
                ],
            ],
        )
        .expect("static geometry")
    }

    /// A pentagon cut into three subdomains by nine edges meeting at seven
    /// vertices. Ids are zero-based: edges 0..=4 form the outer boundary,
    /// subdomain 0 is bounded by edges {0, 5, 8}, and vertex 0 joins edges
    /// {5, 6, 8}.
    pub fn three_cell_pentagon() -> PartitionedDomain {
        // 0: interior junction, 1: interior bend, 2..=6: hull corners.
        let positions = vec![
            [1.0, 0.7],
            [1.0, 1.5],
            [0.0, 0.0],
            [2.0, 0.0],
            [2.0, 1.5],
            [1.0, 2.5],
            [0.0, 1.5],
        ];
        let edges = vec![
            EdgeSpec::new(2, 3), // e0 hull
            EdgeSpec::new(3, 4), // e1 hull
            EdgeSpec::new(4, 5), // e2 hull
            EdgeSpec::new(5, 6), // e3 hull
            EdgeSpec::new(6, 2), // e4 hull
            EdgeSpec::new(2, 0), // e5
            EdgeSpec::new(0, 1), // e6
            EdgeSpec::new(1, 5), // e7
            EdgeSpec::new(3, 0), // e8
        ];
        let loops = vec![
            // triangle (2, 3, 0)
            vec![
                LoopEdge::forward(0),
                LoopEdge::forward(8),
                LoopEdge::reversed(5),
            ],
            // right cell (3, 4, 5, 1, 0)
            vec![
                LoopEdge::forward(1),
                LoopEdge::forward(2),
                LoopEdge::reversed(7),
                LoopEdge::reversed(6),
                LoopEdge::reversed(8),
            ],
            // left cell (2, 0, 1, 5, 6)
            vec![
                LoopEdge::forward(5),
                LoopEdge::forward(6),
                LoopEdge::forward(7),
                LoopEdge::forward(3),
                LoopEdge::forward(4),
            ],
        ];
        PartitionedDomain::new(positions, edges, loops).expect("static geometry")
    }
}

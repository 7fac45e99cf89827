//! JSON run configuration: schema, validation, overrides and hashing.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::analysis::interpolate;
use crate::analysis::vertex_limit::VertexLimitSetup;
use crate::assembly::{DiscreteState, Problem};
use crate::error::{Error, Result};
use crate::expr::{Env, Expr, Var};
use crate::geometry::{EdgeSpec, LoopEdge, PartitionedDomain};
use crate::mesh::{mesh_domain_with, MeshKind};
use crate::model::{
    CouplingCoefficients, Field, FieldPoint, FluxLaw, FluxVariant, ModelSpec, ReactionKind,
    ReactionLaw, Sources, UniformCoefficients, DEFAULT_REGULARIZATION,
};
use crate::timestepper::{Scheme, SolverConfig};

/// A located configuration problem.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigIssue {
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

fn issue(path: impl Into<String>, message: impl Into<String>) -> ConfigIssue {
    ConfigIssue {
        path: path.into(),
        message: message.into(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: GeometryConfig,
    pub model: ModelConfig,
    #[serde(default)]
    pub discretization: DiscretizationConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub outputs: OutputConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub vertices: Vec<[f64; 2]>,
    pub edges: Vec<EdgeConfig>,
    /// Boundary loops, counter-clockwise, one per subdomain.
    pub subdomains: Vec<Vec<LoopEntry>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeConfig {
    pub source: usize,
    pub terminal: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
}

/// A loop entry: a bare edge id (traversed source to terminal) or an
/// explicit `{ "edge": j, "reversed": true }`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LoopEntry {
    Forward(usize),
    Oriented {
        edge: usize,
        #[serde(default)]
        reversed: bool,
    },
}

impl LoopEntry {
    fn to_loop_edge(&self) -> LoopEdge {
        match *self {
            LoopEntry::Forward(j) => LoopEdge::forward(j),
            LoopEntry::Oriented { edge, reversed } => {
                if reversed {
                    LoopEdge::reversed(edge)
                } else {
                    LoopEdge::forward(edge)
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Common exponent of the subdomain and edge flux laws.
    pub p: f64,
    #[serde(default)]
    pub subdomain_flux: FluxConfig,
    #[serde(default)]
    pub edge_flux: FluxConfig,
    #[serde(default)]
    pub subdomain_reaction: ReactionConfig,
    #[serde(default)]
    pub edge_reaction: ReactionConfig,
    #[serde(default)]
    pub coefficients: CoefficientsConfig,
    #[serde(default)]
    pub sources: SourcesConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FluxConfig {
    /// Defaults to `p` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exponent: Option<f64>,
    pub variant: FluxVariant,
    pub regularization: f64,
}

impl Default for FluxConfig {
    fn default() -> Self {
        Self {
            exponent: None,
            variant: FluxVariant::PurePLaplacian,
            regularization: DEFAULT_REGULARIZATION,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReactionConfig {
    pub kind: ReactionKind,
    pub coefficient: f64,
    /// `sigma` for the power kind.
    pub exponent: f64,
}

impl Default for ReactionConfig {
    fn default() -> Self {
        Self {
            kind: ReactionKind::Zero,
            coefficient: 0.0,
            exponent: 1.0,
        }
    }
}

impl ReactionConfig {
    fn law(&self) -> ReactionLaw {
        match self.kind {
            ReactionKind::Zero => ReactionLaw::zero(),
            ReactionKind::Linear => ReactionLaw::linear(self.coefficient),
            ReactionKind::Power => ReactionLaw::power(self.coefficient, self.exponent),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniformConfig {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub lambda: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubdomainEdgeValue {
    pub subdomain: usize,
    pub edge: usize,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VertexEdgeValue {
    pub vertex: usize,
    pub edge: usize,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferValue {
    pub vertex: usize,
    pub from: usize,
    pub to: usize,
    pub value: f64,
}

/// Explicit entries override `uniform`, which fills every remaining pair.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoefficientsConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub uniform: Option<UniformConfig>,
    pub alpha: Vec<SubdomainEdgeValue>,
    pub beta: Vec<SubdomainEdgeValue>,
    pub gamma: Vec<TransferValue>,
    pub delta: Vec<VertexEdgeValue>,
    pub lambda: Vec<VertexEdgeValue>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceEntry {
    pub id: usize,
    pub expr: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SourcesConfig {
    pub subdomain: Vec<SourceEntry>,
    pub edge: Vec<SourceEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiscretizationConfig {
    pub h: f64,
    pub mesh: MeshKind,
    pub dt: f64,
    pub t_end: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub line_search: bool,
    pub scheme: Scheme,
    pub splitting_tol: f64,
    pub splitting_max_iter: usize,
}

impl Default for DiscretizationConfig {
    fn default() -> Self {
        let s = SolverConfig::default();
        Self {
            h: 0.1,
            mesh: MeshKind::default(),
            dt: s.dt,
            t_end: s.t_end,
            newton_tol: s.newton_tol,
            newton_max_iter: s.newton_max_iter,
            line_search: s.line_search,
            scheme: s.scheme,
            splitting_tol: s.splitting_tol,
            splitting_max_iter: s.splitting_max_iter,
        }
    }
}

impl DiscretizationConfig {
    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            dt: self.dt,
            t_end: self.t_end,
            newton_tol: self.newton_tol,
            newton_max_iter: self.newton_max_iter,
            line_search: self.line_search,
            scheme: self.scheme,
            splitting_tol: self.splitting_tol,
            splitting_max_iter: self.splitting_max_iter,
        }
    }
}

/// A constant or an expression string.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Number(f64),
    Text(String),
}

impl Scalar {
    fn parse(&self) -> Result<Expr> {
        match self {
            Scalar::Number(v) => Ok(Expr::constant(*v)),
            Scalar::Text(s) => Expr::parse(s),
        }
    }
}

impl Default for Scalar {
    fn default() -> Self {
        Scalar::Number(0.0)
    }
}

/// One value for every item, or a list with one value per id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerItem {
    All(Scalar),
    Each(Vec<Scalar>),
}

impl Default for PerItem {
    fn default() -> Self {
        PerItem::All(Scalar::default())
    }
}

impl PerItem {
    fn expressions(&self, count: usize, path: &str, issues: &mut Vec<ConfigIssue>) -> Vec<Expr> {
        let items: Vec<(String, &Scalar)> = match self {
            PerItem::All(s) => {
                return match s.parse() {
                    Ok(e) if e.uses(Var::T) => {
                        issues.push(issue(path, "initial data cannot depend on t"));
                        Vec::new()
                    }
                    Ok(e) => vec![e; count],
                    Err(e) => {
                        issues.push(issue(path, e.to_string()));
                        Vec::new()
                    }
                }
            }
            PerItem::Each(v) => {
                if v.len() != count {
                    issues.push(issue(
                        path,
                        format!("expected {count} entries, found {}", v.len()),
                    ));
                    return Vec::new();
                }
                v.iter()
                    .enumerate()
                    .map(|(n, s)| (format!("{path}[{n}]"), s))
                    .collect()
            }
        };
        let mut out = Vec::new();
        for (p, s) in items {
            match s.parse() {
                Ok(e) if e.uses(Var::T) => issues.push(issue(p, "initial data cannot depend on t")),
                Ok(e) => out.push(e),
                Err(e) => issues.push(issue(p, e.to_string())),
            }
        }
        out
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialConfig {
    /// Functions of `x`, `y` on each subdomain.
    pub u: PerItem,
    /// Functions of `x`, `y`, `arclength` on each edge.
    pub w: PerItem,
    /// Functions of the vertex position.
    pub z: PerItem,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: String,
    pub csv: bool,
    pub vtk: bool,
    /// VTK snapshot cadence in steps; 0 writes only the initial and final states.
    pub vtk_every: usize,
    pub summary: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: "out".into(),
            csv: true,
            vtk: true,
            vtk_every: 0,
            summary: true,
        }
    }
}

/// Splits `key=value`; the value is read as JSON and falls back to a string.
pub fn parse_override(s: &str) -> Result<(String, Value)> {
    let (key, raw) = s
        .split_once('=')
        .ok_or_else(|| Error::InvalidArgument(format!("override '{s}' is not key=value")))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "override '{s}' has an empty key"
        )));
    }
    let value =
        serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().to_string()));
    Ok((key.to_string(), value))
}

/// Sets a dotted path (`discretization.dt`, `geometry.vertices.0`) in a JSON
/// document, creating missing object keys.
pub fn apply_override(doc: &mut Value, key: &str, value: Value) -> Result<()> {
    let mut cur = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (n, part) in parts.iter().enumerate() {
        let last = n + 1 == parts.len();
        cur = match cur {
            Value::Object(map) => {
                if last {
                    map.insert(part.to_string(), value);
                    return Ok(());
                }
                map.entry(part.to_string())
                    .or_insert_with(|| Value::Object(Default::default()))
            }
            Value::Array(arr) => {
                let idx: usize = part.parse().map_err(|_| {
                    Error::InvalidArgument(format!("override {key}: '{part}' is not an index"))
                })?;
                let len = arr.len();
                let slot = arr.get_mut(idx).ok_or_else(|| {
                    Error::InvalidArgument(format!("override {key}: index {idx} out of {len}"))
                })?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "override {key}: '{part}' descends into a scalar"
                )))
            }
        };
    }
    Ok(())
}

fn typed<T: DeserializeOwned>(doc: Value) -> Result<T> {
    serde_path_to_error::deserialize(doc).map_err(|e| {
        let path = e.path().to_string();
        Error::Config(vec![issue(
            if path == "." { "(root)".into() } else { path },
            e.inner().to_string(),
        )])
    })
}

fn read_json(path: &Path, overrides: &[String]) -> Result<Value> {
    let text = std::fs::read_to_string(path)?;
    let mut doc: Value = serde_json::from_str(&text).map_err(|e| {
        Error::Config(vec![issue(
            path.display().to_string(),
            format!("not valid JSON: {e}"),
        )])
    })?;
    for o in overrides {
        let (k, v) = parse_override(o)?;
        apply_override(&mut doc, &k, v)?;
    }
    Ok(doc)
}

/// Everything needed to run: the assembled problem, the initial state and the
/// solver settings.
pub struct Prepared {
    pub problem: Problem,
    pub initial: DiscreteState,
    pub solver: SolverConfig,
}

impl RunConfig {
    /// Reads, applies overrides, deserializes and validates.
    pub fn load(path: impl AsRef<Path>, overrides: &[String]) -> Result<Self> {
        let doc = read_json(path.as_ref(), overrides)?;
        Self::from_value(doc)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Value = serde_json::from_str(text)?;
        Self::from_value(doc)
    }

    pub fn from_value(doc: Value) -> Result<Self> {
        let cfg: RunConfig = typed(doc)?;
        let issues = cfg.issues();
        if issues.is_empty() {
            Ok(cfg)
        } else {
            Err(Error::Config(issues))
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical serialization (defaults and overrides applied).
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }

    pub fn domain(&self) -> Result<PartitionedDomain> {
        let g = &self.geometry;
        PartitionedDomain::new(
            g.vertices.clone(),
            g.edges
                .iter()
                .map(|e| EdgeSpec {
                    length: e.length,
                    ..EdgeSpec::new(e.source, e.terminal)
                })
                .collect(),
            g.subdomains
                .iter()
                .map(|l| l.iter().map(LoopEntry::to_loop_edge).collect())
                .collect(),
        )
    }

    /// All semantic problems: ids, geometry, coefficients, expressions, numbers.
    pub fn issues(&self) -> Vec<ConfigIssue> {
        let mut out = Vec::new();
        let g = &self.geometry;
        let (nv, ne, ns) = (g.vertices.len(), g.edges.len(), g.subdomains.len());
        for (j, e) in g.edges.iter().enumerate() {
            for (name, v) in [("source", e.source), ("terminal", e.terminal)] {
                if v >= nv {
                    out.push(issue(
                        format!("geometry.edges[{j}].{name}"),
                        format!("unknown vertex {v}"),
                    ));
                }
            }
            if let Some(l) = e.length {
                if !(l > 0.0) {
                    out.push(issue(
                        format!("geometry.edges[{j}].length"),
                        "must be positive",
                    ));
                }
            }
        }
        for (i, l) in g.subdomains.iter().enumerate() {
            for (n, le) in l.iter().enumerate() {
                let j = le.to_loop_edge().edge;
                if j >= ne {
                    out.push(issue(
                        format!("geometry.subdomains[{i}][{n}]"),
                        format!("unknown edge {j}"),
                    ));
                }
            }
        }
        if !out.is_empty() {
            return out;
        }
        let domain = match self.domain() {
            Ok(d) => d,
            Err(e) => return vec![issue("geometry", e.to_string())],
        };
        for v in domain.validate() {
            out.push(issue("geometry", v.to_string()));
        }

        let m = &self.model;
        if !(m.p >= 2.0) {
            out.push(issue("model.p", format!("must be at least 2, got {}", m.p)));
        }
        for (name, f) in [
            ("subdomain_flux", &m.subdomain_flux),
            ("edge_flux", &m.edge_flux),
        ] {
            if !(f.regularization >= 0.0) {
                out.push(issue(
                    format!("model.{name}.regularization"),
                    "must be non-negative",
                ));
            }
        }
        let c = &m.coefficients;
        let incident_se = |i: usize, j: usize| {
            domain
                .edges()
                .get(j)
                .is_some_and(|e| e.adjacent_subdomains.contains(&i))
        };
        let incident_ve = |k: usize, j: usize| {
            domain
                .edges()
                .get(j)
                .is_some_and(|e| e.source == k || e.terminal == k)
        };
        for (name, list) in [("alpha", &c.alpha), ("beta", &c.beta)] {
            let mut seen = BTreeSet::new();
            for (n, v) in list.iter().enumerate() {
                let p = format!("model.coefficients.{name}[{n}]");
                if v.subdomain >= ns || !incident_se(v.subdomain, v.edge) {
                    out.push(issue(
                        p,
                        format!(
                            "subdomain {} is not adjacent to edge {}",
                            v.subdomain, v.edge
                        ),
                    ));
                } else if !seen.insert((v.subdomain, v.edge)) {
                    out.push(issue(p, "duplicate entry"));
                }
            }
        }
        for (name, list) in [("delta", &c.delta), ("lambda", &c.lambda)] {
            let mut seen = BTreeSet::new();
            for (n, v) in list.iter().enumerate() {
                let p = format!("model.coefficients.{name}[{n}]");
                if !incident_ve(v.vertex, v.edge) {
                    out.push(issue(
                        p,
                        format!("edge {} does not touch vertex {}", v.edge, v.vertex),
                    ));
                } else if !seen.insert((v.vertex, v.edge)) {
                    out.push(issue(p, "duplicate entry"));
                }
            }
        }
        let mut seen = BTreeSet::new();
        for (n, v) in c.gamma.iter().enumerate() {
            let p = format!("model.coefficients.gamma[{n}]");
            if v.from == v.to || !incident_ve(v.vertex, v.from) || !incident_ve(v.vertex, v.to) {
                out.push(issue(
                    p,
                    format!(
                        "edges {} -> {} are not an incident pair at vertex {}",
                        v.from, v.to, v.vertex
                    ),
                ));
            } else if !seen.insert((v.vertex, v.from, v.to)) {
                out.push(issue(p, "duplicate entry"));
            }
        }
        if c.uniform.is_none() {
            let built = self.coefficients(&domain);
            let missing = crate::model::check_assumptions(
                &ModelSpec {
                    subdomain_flux: FluxLaw::linear(),
                    edge_flux: FluxLaw::linear(),
                    subdomain_reaction: ReactionLaw::zero(),
                    edge_reaction: ReactionLaw::zero(),
                    coefficients: built,
                    sources: Sources::default(),
                },
                &domain,
                2.0,
            );
            for v in missing.iter().filter(|v| v.message.ends_with("is missing")) {
                out.push(issue(
                    "model.coefficients",
                    format!("{}: {}", v.location, v.message),
                ));
            }
        }
        for (name, list, count) in [
            ("subdomain", &m.sources.subdomain, ns),
            ("edge", &m.sources.edge, ne),
        ] {
            for (n, s) in list.iter().enumerate() {
                let p = format!("model.sources.{name}[{n}]");
                if s.id >= count {
                    out.push(issue(&p, format!("unknown {name} {}", s.id)));
                }
                if let Err(e) = Expr::parse(&s.expr) {
                    out.push(issue(p, e.to_string()));
                }
            }
        }

        let d = &self.discretization;
        if !(d.h > 0.0) {
            out.push(issue("discretization.h", "must be positive"));
        }
        if let Err(e) = d.solver().validate() {
            out.push(issue("discretization", e.to_string()));
        }
        let init = &self.initial;
        init.u.expressions(ns, "initial.u", &mut out);
        init.w.expressions(ne, "initial.w", &mut out);
        init.z.expressions(nv, "initial.z", &mut out);
        out
    }

    pub fn coefficients(&self, domain: &PartitionedDomain) -> CouplingCoefficients {
        let c = &self.model.coefficients;
        let mut out = CouplingCoefficients::default();
        for v in &c.alpha {
            out.alpha.insert((v.subdomain, v.edge), v.value);
        }
        for v in &c.beta {
            out.beta.insert((v.subdomain, v.edge), v.value);
        }
        for v in &c.gamma {
            out.gamma.insert((v.vertex, v.from, v.to), v.value);
        }
        for v in &c.delta {
            out.delta.insert((v.vertex, v.edge), v.value);
        }
        for v in &c.lambda {
            out.lambda.insert((v.vertex, v.edge), v.value);
        }
        if let Some(u) = c.uniform {
            out.fill_missing(
                domain,
                &UniformCoefficients {
                    alpha: u.alpha,
                    beta: u.beta,
                    gamma: u.gamma,
                    delta: u.delta,
                    lambda: u.lambda,
                },
            );
        }
        out
    }

    pub fn model_spec(&self, domain: &PartitionedDomain) -> Result<ModelSpec> {
        let m = &self.model;
        let flux = |f: &FluxConfig| {
            FluxLaw::new(f.exponent.unwrap_or(m.p), f.variant).with_regularization(f.regularization)
        };
        let field = |s: &str| -> Result<Field> {
            let e = Expr::parse(s)?;
            Ok(Arc::new(move |q: &FieldPoint| {
                e.eval(&Env {
                    x: q.x,
                    y: q.y,
                    arclength: q.arclength,
                    t: q.t,
                })
            }))
        };
        let mut sources = Sources {
            subdomain: vec![None; domain.subdomains().len()],
            edge: vec![None; domain.edges().len()],
        };
        for s in &m.sources.subdomain {
            sources.subdomain[s.id] = Some(field(&s.expr)?);
        }
        for s in &m.sources.edge {
            sources.edge[s.id] = Some(field(&s.expr)?);
        }
        Ok(ModelSpec {
            subdomain_flux: flux(&m.subdomain_flux),
            edge_flux: flux(&m.edge_flux),
            subdomain_reaction: m.subdomain_reaction.law(),
            edge_reaction: m.edge_reaction.law(),
            coefficients: self.coefficients(domain),
            sources,
        })
    }

    /// Meshes the domain and builds the problem and the initial state.
    pub fn prepare(&self) -> Result<Prepared> {
        let domain = self.domain()?;
        let model = self.model_spec(&domain)?;
        let disc = mesh_domain_with(&domain, self.discretization.h, self.discretization.mesh)?;
        let mut issues = Vec::new();
        let ns = domain.subdomains().len();
        let ne = domain.edges().len();
        let nv = domain.vertices().len();
        let u = self.initial.u.expressions(ns, "initial.u", &mut issues);
        let w = self.initial.w.expressions(ne, "initial.w", &mut issues);
        let z = self.initial.z.expressions(nv, "initial.z", &mut issues);
        if !issues.is_empty() {
            return Err(Error::Config(issues));
        }
        let positions: Vec<_> = domain.vertices().iter().map(|v| v.position).collect();
        let problem = Problem::new(domain, disc, model)?;
        let initial = interpolate(
            &problem,
            &|i, x, y| {
                u[i].eval(&Env {
                    x,
                    y,
                    ..Env::default()
                })
            },
            &|j, x, y, s| {
                w[j].eval(&Env {
                    x,
                    y,
                    arclength: s,
                    t: 0.0,
                })
            },
            &|k| {
                let [x, y] = positions[k];
                z[k].eval(&Env {
                    x,
                    y,
                    ..Env::default()
                })
            },
        );
        if !initial.is_finite() {
            return Err(Error::Config(vec![issue(
                "initial",
                "initial data is not finite at some node",
            )]));
        }
        Ok(Prepared {
            problem,
            initial,
            solver: self.discretization.solver(),
        })
    }
}

/// Settings for the shrinking vertex-region study. Missing fields take the
/// reference values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VertexLimitConfig {
    pub length: f64,
    pub theta: f64,
    pub mu: f64,
    pub lambda: f64,
    pub h: f64,
    pub dt: f64,
    pub t_end: f64,
    pub min_vertex_cells: usize,
    /// Initial data on the right edge, an expression in `x`.
    pub right: String,
    /// Initial data on the left edge, an expression in `x`.
    pub left: String,
    pub z0: f64,
    pub newton_tol: f64,
    pub deltas: Vec<f64>,
    pub out: String,
}

impl Default for VertexLimitConfig {
    fn default() -> Self {
        let r = VertexLimitSetup::reference();
        Self {
            length: r.length,
            theta: r.theta,
            mu: r.mu,
            lambda: r.lambda,
            h: r.h,
            dt: r.dt,
            t_end: r.t_end,
            min_vertex_cells: r.min_vertex_cells,
            right: "1 + cos(pi * x)".into(),
            left: "0.5 * (1 - x)".into(),
            z0: r.z0,
            newton_tol: r.newton_tol,
            deltas: vec![0.2, 0.1, 0.05, 0.025],
            out: "out".into(),
        }
    }
}

impl VertexLimitConfig {
    pub fn load(path: impl AsRef<Path>, overrides: &[String]) -> Result<Self> {
        let cfg: Self = typed(read_json(path.as_ref(), overrides)?)?;
        cfg.setup()?;
        Ok(cfg)
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(
            serde_json::to_vec(self).expect("config serializes"),
        ))
    }

    pub fn setup(&self) -> Result<VertexLimitSetup> {
        let mut issues = Vec::new();
        let mut profile = |name: &str, s: &str| match Expr::parse(s) {
            Ok(e) if e.uses(Var::Y) || e.uses(Var::T) || e.uses(Var::Arclength) => {
                issues.push(issue(name, "may only depend on x"));
                None
            }
            Ok(e) => Some(e),
            Err(e) => {
                issues.push(issue(name, e.to_string()));
                None
            }
        };
        let right = profile("right", &self.right);
        let left = profile("left", &self.left);
        for (name, v) in [
            ("length", self.length),
            ("h", self.h),
            ("dt", self.dt),
            ("newton_tol", self.newton_tol),
        ] {
            if !(v > 0.0) {
                issues.push(issue(name, "must be positive"));
            }
        }
        for (name, v) in [
            ("theta", self.theta),
            ("mu", self.mu),
            ("lambda", self.lambda),
            ("t_end", self.t_end),
        ] {
            if !(v >= 0.0) {
                issues.push(issue(name, "must be non-negative"));
            }
        }
        if self.deltas.is_empty() {
            issues.push(issue("deltas", "at least one width is needed"));
        }
        for (n, &d) in self.deltas.iter().enumerate() {
            if !(d > 0.0 && d < 2.0 * self.length) {
                issues.push(issue(
                    format!("deltas[{n}]"),
                    format!("width {d} must lie in (0, 2 * length)"),
                ));
            }
        }
        if !issues.is_empty() {
            return Err(Error::Config(issues));
        }
        let (right, left) = (right.unwrap(), left.unwrap());
        let at = |e: Expr| {
            move |x: f64| {
                e.eval(&Env {
                    x,
                    ..Env::default()
                })
            }
        };
        Ok(VertexLimitSetup {
            length: self.length,
            theta: self.theta,
            mu: self.mu,
            lambda: self.lambda,
            h: self.h,
            dt: self.dt,
            t_end: self.t_end,
            min_vertex_cells: self.min_vertex_cells,
            right: Arc::new(at(right)),
            left: Arc::new(at(left)),
            z0: self.z0,
            newton_tol: self.newton_tol,
        })
    }
}

//! Flux laws, reaction laws and coupling coefficients.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PartitionedDomain;

pub const DEFAULT_REGULARIZATION: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FluxVariant {
    /// `|g|^{p-2} g`
    PurePLaplacian,
    /// `(1 + |g|^{p-2}) g`
    LinearPlusPLaplacian,
}

/// Diffusive flux `kappa(g)` with antiderivative `kappa_hat`.
///
/// With `regularization = eps > 0` the power factor is evaluated as
/// `(eps^2 + |g|^2)^{(p-2)/2}` so that Newton has a Jacobian at `g = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FluxLaw {
    pub exponent: f64,
    pub variant: FluxVariant,
    pub regularization: f64,
}

impl FluxLaw {
    pub fn new(exponent: f64, variant: FluxVariant) -> Self {
        Self {
            exponent,
            variant,
            regularization: DEFAULT_REGULARIZATION,
        }
    }

    pub fn linear() -> Self {
        Self::new(2.0, FluxVariant::PurePLaplacian)
    }

    pub fn with_regularization(mut self, eps: f64) -> Self {
        self.regularization = eps;
        self
    }

    fn power_factor(&self, norm2: f64) -> f64 {
        let m = 0.5 * (self.exponent - 2.0);
        if m == 0.0 {
            return 1.0;
        }
        let eps = self.regularization;
        (eps * eps + norm2).powf(m)
    }

    fn scalar_factor(&self, norm2: f64) -> f64 {
        match self.variant {
            FluxVariant::PurePLaplacian => self.power_factor(norm2),
            FluxVariant::LinearPlusPLaplacian => 1.0 + self.power_factor(norm2),
        }
    }

    pub fn flux(&self, g: [f64; 2]) -> [f64; 2] {
        let a = self.scalar_factor(g[0] * g[0] + g[1] * g[1]);
        [a * g[0], a * g[1]]
    }

    pub fn flux_1d(&self, s: f64) -> f64 {
        self.scalar_factor(s * s) * s
    }

    /// `d kappa / d g`, symmetric 2x2.
    pub fn jacobian(&self, g: [f64; 2]) -> Result<[[f64; 2]; 2]> {
        let norm2 = g[0] * g[0] + g[1] * g[1];
        let p = self.exponent;
        let m = 0.5 * (p - 2.0);
        let a = self.scalar_factor(norm2);
        if m == 0.0 {
            return Ok([[a, 0.0], [0.0, a]]);
        }
        let eps2 = self.regularization * self.regularization;
        let base = eps2 + norm2;
        if base == 0.0 {
            return Err(Error::DegenerateFlux { p });
        }
        // d/dg (base^m) = 2 m base^{m-1} g
        let b = 2.0 * m * base.powf(m - 1.0);
        Ok([
            [a + b * g[0] * g[0], b * g[0] * g[1]],
            [b * g[1] * g[0], a + b * g[1] * g[1]],
        ])
    }

    pub fn derivative_1d(&self, s: f64) -> Result<f64> {
        Ok(self.jacobian([s, 0.0])?[0][0])
    }

    /// Antiderivative with gradient equal to [`flux`](Self::flux); zero at
    /// the origin and exactly `|g|^p / p` (plus `|g|^2 / 2`) when unregularized.
    pub fn antiderivative(&self, g: [f64; 2]) -> f64 {
        let norm2 = g[0] * g[0] + g[1] * g[1];
        let p = self.exponent;
        let power = if p == 2.0 {
            0.5 * norm2
        } else {
            let eps = self.regularization;
            ((eps * eps + norm2).powf(0.5 * p) - eps.powf(p)) / p
        };
        match self.variant {
            FluxVariant::PurePLaplacian => power,
            FluxVariant::LinearPlusPLaplacian => 0.5 * norm2 + power,
        }
    }

    pub fn antiderivative_1d(&self, s: f64) -> f64 {
        self.antiderivative([s, 0.0])
    }
}

pub fn flux_eval(law: &FluxLaw, gradient: [f64; 2]) -> [f64; 2] {
    law.flux(gradient)
}

pub fn flux_jacobian(law: &FluxLaw, gradient: [f64; 2]) -> Result<[[f64; 2]; 2]> {
    law.jacobian(gradient)
}

pub fn antiderivative_eval(law: &FluxLaw, gradient: [f64; 2]) -> f64 {
    law.antiderivative(gradient)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReactionKind {
    Zero,
    Linear,
    /// `c |s|^{sigma-2} s`
    Power,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReactionLaw {
    pub kind: ReactionKind,
    pub coefficient: f64,
    /// `sigma` for the power kind; ignored otherwise.
    pub exponent: f64,
}

impl ReactionLaw {
    pub fn zero() -> Self {
        Self {
            kind: ReactionKind::Zero,
            coefficient: 0.0,
            exponent: 1.0,
        }
    }

    pub fn linear(c: f64) -> Self {
        Self {
            kind: ReactionKind::Linear,
            coefficient: c,
            exponent: 2.0,
        }
    }

    pub fn power(c: f64, sigma: f64) -> Self {
        Self {
            kind: ReactionKind::Power,
            coefficient: c,
            exponent: sigma,
        }
    }

    pub fn eval(&self, s: f64) -> f64 {
        match self.kind {
            ReactionKind::Zero => 0.0,
            ReactionKind::Linear => self.coefficient * s,
            ReactionKind::Power => {
                if s == 0.0 {
                    0.0
                } else {
                    self.coefficient * s.abs().powf(self.exponent - 2.0) * s
                }
            }
        }
    }

    /// Derivative; for the power kind the value at `s = 0` is taken as 0
    /// when `sigma != 2`.
    pub fn derivative(&self, s: f64) -> f64 {
        match self.kind {
            ReactionKind::Zero => 0.0,
            ReactionKind::Linear => self.coefficient,
            ReactionKind::Power => {
                let sigma = self.exponent;
                if sigma == 2.0 {
                    self.coefficient
                } else if s == 0.0 {
                    0.0
                } else {
                    self.coefficient * (sigma - 1.0) * s.abs().powf(sigma - 2.0)
                }
            }
        }
    }

    /// `f_hat` with `f_hat' = f` and `f_hat(0) = 0`.
    pub fn antiderivative(&self, s: f64) -> f64 {
        match self.kind {
            ReactionKind::Zero => 0.0,
            ReactionKind::Linear => 0.5 * self.coefficient * s * s,
            ReactionKind::Power => self.coefficient * s.abs().powf(self.exponent) / self.exponent,
        }
    }

    /// Exponent `q` in `|f(s)| <= C (1 + |s|^q)`.
    pub fn growth_exponent(&self) -> f64 {
        match self.kind {
            ReactionKind::Zero => 0.0,
            ReactionKind::Linear => 1.0,
            ReactionKind::Power => (self.exponent - 1.0).max(0.0),
        }
    }
}

pub fn reaction_eval(law: &ReactionLaw, s: f64) -> f64 {
    law.eval(s)
}

pub fn reaction_derivative(law: &ReactionLaw, s: f64) -> f64 {
    law.derivative(s)
}

/// Exchange coefficients keyed by incidence:
/// `alpha`, `beta` by (subdomain, edge); `gamma` by (vertex, from-edge, to-edge);
/// `delta`, `lambda` by (vertex, edge).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CouplingCoefficients {
    pub alpha: BTreeMap<(usize, usize), f64>,
    pub beta: BTreeMap<(usize, usize), f64>,
    pub gamma: BTreeMap<(usize, usize, usize), f64>,
    pub delta: BTreeMap<(usize, usize), f64>,
    pub lambda: BTreeMap<(usize, usize), f64>,
}

/// Uniform values used to fill every incidence pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UniformCoefficients {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub lambda: f64,
}

impl CouplingCoefficients {
    /// Assigns the same value on every incidence pair of `domain`.
    pub fn uniform(domain: &PartitionedDomain, values: UniformCoefficients) -> Self {
        let mut c = Self::default();
        c.fill_missing(domain, &values);
        c
    }

    /// Inserts `values` for every incidence pair that has no entry yet.
    pub fn fill_missing(&mut self, domain: &PartitionedDomain, values: &UniformCoefficients) {
        for e in domain.edges() {
            for &i in &e.adjacent_subdomains {
                self.alpha.entry((i, e.id)).or_insert(values.alpha);
                self.beta.entry((i, e.id)).or_insert(values.beta);
            }
        }
        for v in domain.vertices() {
            let at = domain.edges_at_vertex(v.id).unwrap_or_default();
            for &(j, _) in &at {
                self.delta.entry((v.id, j)).or_insert(values.delta);
                self.lambda.entry((v.id, j)).or_insert(values.lambda);
                for &(m, _) in &at {
                    if m != j {
                        self.gamma.entry((v.id, j, m)).or_insert(values.gamma);
                    }
                }
            }
        }
    }

    fn get2(
        map: &BTreeMap<(usize, usize), f64>,
        name: &'static str,
        a: usize,
        b: usize,
        what: &str,
    ) -> Result<f64> {
        map.get(&(a, b))
            .copied()
            .ok_or_else(|| Error::MissingCoefficient {
                name,
                location: format!("{what} ({a}, {b})"),
            })
    }

    pub fn alpha(&self, i: usize, j: usize) -> Result<f64> {
        Self::get2(&self.alpha, "alpha", i, j, "subdomain/edge")
    }

    pub fn beta(&self, i: usize, j: usize) -> Result<f64> {
        Self::get2(&self.beta, "beta", i, j, "subdomain/edge")
    }

    pub fn delta(&self, k: usize, j: usize) -> Result<f64> {
        Self::get2(&self.delta, "delta", k, j, "vertex/edge")
    }

    pub fn lambda(&self, k: usize, j: usize) -> Result<f64> {
        Self::get2(&self.lambda, "lambda", k, j, "vertex/edge")
    }

    /// Rate `gamma^k_{from -> to}`.
    pub fn gamma(&self, k: usize, from: usize, to: usize) -> Result<f64> {
        self.gamma
            .get(&(k, from, to))
            .copied()
            .ok_or_else(|| Error::MissingCoefficient {
                name: "gamma",
                location: format!("vertex {k}, edge {from} -> edge {to}"),
            })
    }

    /// True when `gamma` is symmetric at vertex `k`.
    pub fn gamma_symmetric_at(&self, domain: &PartitionedDomain, k: usize) -> bool {
        let at = domain.edges_at_vertex(k).unwrap_or_default();
        at.iter().all(|&(j, _)| {
            at.iter()
                .all(|&(m, _)| j == m || self.gamma.get(&(k, j, m)) == self.gamma.get(&(k, m, j)))
        })
    }

    /// Unpopulated vertices carry `delta = lambda = 0` on every incident edge.
    pub fn is_populated(&self, domain: &PartitionedDomain, k: usize) -> bool {
        domain
            .edges_at_vertex(k)
            .unwrap_or_default()
            .iter()
            .any(|&(j, _)| {
                self.delta.get(&(k, j)).copied().unwrap_or(0.0) != 0.0
                    || self.lambda.get(&(k, j)).copied().unwrap_or(0.0) != 0.0
            })
    }

    /// Entries keyed on pairs that are not incidences of `domain`.
    pub fn stray_entries(&self, domain: &PartitionedDomain) -> Vec<String> {
        let mut out = Vec::new();
        let sub_edge = |i: usize, j: usize| {
            domain
                .edges()
                .get(j)
                .is_some_and(|e| e.adjacent_subdomains.contains(&i))
        };
        let vert_edge = |k: usize, j: usize| {
            domain
                .edges()
                .get(j)
                .is_some_and(|e| e.source == k || e.terminal == k)
        };
        for (name, map) in [("alpha", &self.alpha), ("beta", &self.beta)] {
            for &(i, j) in map.keys() {
                if !sub_edge(i, j) {
                    out.push(format!("{name}: subdomain {i} is not adjacent to edge {j}"));
                }
            }
        }
        for (name, map) in [("delta", &self.delta), ("lambda", &self.lambda)] {
            for &(k, j) in map.keys() {
                if !vert_edge(k, j) {
                    out.push(format!("{name}: edge {j} does not touch vertex {k}"));
                }
            }
        }
        for &(k, a, b) in self.gamma.keys() {
            if a == b || !vert_edge(k, a) || !vert_edge(k, b) {
                out.push(format!(
                    "gamma: edges {a} -> {b} are not a pair at vertex {k}"
                ));
            }
        }
        out
    }
}

/// Evaluation point for source terms. `arclength` is only meaningful on edges.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldPoint {
    pub x: f64,
    pub y: f64,
    pub arclength: f64,
    pub t: f64,
}

pub type Field = Arc<dyn Fn(&FieldPoint) -> f64 + Send + Sync>;

/// Optional volumetric forcing added to the right-hand side of the subdomain
/// and edge equations. Absent entries mean no forcing.
#[derive(Clone, Default)]
pub struct Sources {
    pub subdomain: Vec<Option<Field>>,
    pub edge: Vec<Option<Field>>,
}

impl Sources {
    pub fn subdomain(&self, i: usize) -> Option<&Field> {
        self.subdomain.get(i).and_then(|f| f.as_ref())
    }

    pub fn edge(&self, j: usize) -> Option<&Field> {
        self.edge.get(j).and_then(|f| f.as_ref())
    }

    pub fn is_empty(&self) -> bool {
        self.subdomain.iter().chain(&self.edge).all(|f| f.is_none())
    }
}

impl fmt::Debug for Sources {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Sources")
            .field(
                "subdomain",
                &self
                    .subdomain
                    .iter()
                    .map(Option::is_some)
                    .collect::<Vec<_>>(),
            )
            .field(
                "edge",
                &self.edge.iter().map(Option::is_some).collect::<Vec<_>>(),
            )
            .finish()
    }
}

#[derive(Clone, Debug)]
pub struct ModelSpec {
    pub subdomain_flux: FluxLaw,
    pub edge_flux: FluxLaw,
    pub subdomain_reaction: ReactionLaw,
    pub edge_reaction: ReactionLaw,
    pub coefficients: CouplingCoefficients,
    pub sources: Sources,
}

/// One failed structural assumption, with the label of the condition and
/// where it fails.
#[derive(Clone, Debug, PartialEq)]
pub struct AssumptionViolation {
    pub assumption: &'static str,
    pub location: String,
    pub message: String,
}

impl fmt::Display for AssumptionViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {}: {}",
            self.assumption, self.location, self.message
        )
    }
}

/// Upper bound on the subdomain reaction growth exponent.
pub fn subdomain_growth_bound(p: f64) -> f64 {
    2.0 * (p - 1.0).powi(2) / p + 2.0
}

/// Upper bound on the edge reaction growth exponent.
pub fn edge_growth_bound(p: f64) -> f64 {
    (3.0 * p - 2.0) * (p - 1.0) / p + 2.0
}

pub fn check_assumptions(
    spec: &ModelSpec,
    domain: &PartitionedDomain,
    p: f64,
) -> Vec<AssumptionViolation> {
    let mut out = Vec::new();
    let mut push = |assumption, location: String, message: String| {
        out.push(AssumptionViolation {
            assumption,
            location,
            message,
        })
    };

    for (label, law) in [("A1", &spec.subdomain_flux), ("A2", &spec.edge_flux)] {
        if !(law.exponent >= 2.0) {
            push(
                label,
                "flux".into(),
                format!("exponent {} is below 2", law.exponent),
            );
        }
        if law.exponent != p {
            push(
                label,
                "flux".into(),
                format!(
                    "exponent {} differs from the common index p = {p}",
                    law.exponent
                ),
            );
        }
        if law.regularization < 0.0 {
            push(label, "flux".into(), "negative regularization".into());
        }
    }

    for (label, law, bound, what) in [
        (
            "A3",
            &spec.subdomain_reaction,
            subdomain_growth_bound(p),
            "subdomain reaction",
        ),
        (
            "A4",
            &spec.edge_reaction,
            edge_growth_bound(p),
            "edge reaction",
        ),
    ] {
        let q = law.growth_exponent();
        if !(q < bound) {
            push(
                label,
                what.into(),
                format!("growth exponent {q} is not below {bound}"),
            );
        }
        if law.coefficient < 0.0 {
            push(
                label,
                what.into(),
                "negative coefficient makes it decreasing".into(),
            );
        }
        if law.kind == ReactionKind::Power && law.exponent < 1.0 {
            push(
                label,
                what.into(),
                format!("power exponent {} < 1 is not monotone", law.exponent),
            );
        }
    }

    let c = &spec.coefficients;
    for e in domain.edges() {
        for &i in &e.adjacent_subdomains {
            for (name, val) in [("alpha", c.alpha(i, e.id)), ("beta", c.beta(i, e.id))] {
                match val {
                    Ok(v) if v > 0.0 => {}
                    Ok(v) => push(
                        "A5",
                        format!("subdomain {i}, edge {}", e.id),
                        format!("{name} = {v} is not positive"),
                    ),
                    Err(_) => push(
                        "A5",
                        format!("subdomain {i}, edge {}", e.id),
                        format!("{name} is missing"),
                    ),
                }
            }
        }
    }

    for v in domain.vertices() {
        let k = v.id;
        let at = domain.edges_at_vertex(k).unwrap_or_default();
        let mut zero = 0;
        let mut positive = 0;
        for &(j, _) in &at {
            for (name, val) in [("delta", c.delta(k, j)), ("lambda", c.lambda(k, j))] {
                match val {
                    Ok(x) if x == 0.0 => zero += 1,
                    Ok(x) if x > 0.0 => positive += 1,
                    Ok(x) => push(
                        "A5",
                        format!("vertex {k}, edge {j}"),
                        format!("{name} = {x} is negative"),
                    ),
                    Err(_) => push(
                        "A5",
                        format!("vertex {k}, edge {j}"),
                        format!("{name} is missing"),
                    ),
                }
            }
        }
        if zero > 0 && positive > 0 {
            push(
                "A5",
                format!("vertex {k}"),
                "delta/lambda must be all zero (unpopulated) or all positive (populated)".into(),
            );
        }
        for &(j, _) in &at {
            let mut outgoing = 0.0;
            let mut incoming = 0.0;
            for &(m, _) in &at {
                if m == j {
                    continue;
                }
                match (c.gamma(k, j, m), c.gamma(k, m, j)) {
                    (Ok(a), Ok(b)) => {
                        if a < 0.0 {
                            push(
                                "A5",
                                format!("vertex {k}, edge {j} -> {m}"),
                                format!("gamma = {a} is negative"),
                            );
                        }
                        outgoing += a;
                        incoming += b;
                    }
                    _ => push(
                        "A5",
                        format!("vertex {k}, edges {j}/{m}"),
                        "gamma is missing".into(),
                    ),
                }
            }
            let d = c.delta(k, j).unwrap_or(0.0);
            if d + outgoing < incoming {
                push(
                    "A5",
                    format!("vertex {k}, edge {j}"),
                    format!(
                        "delta + outgoing transfer = {} is below incoming transfer {incoming}",
                        d + outgoing
                    ),
                );
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::presets;
    use proptest::prelude::*;

    fn pure(p: f64) -> FluxLaw {
        FluxLaw::new(p, FluxVariant::PurePLaplacian).with_regularization(0.0)
    }

    #[test]
    fn flux_examples() {
        assert_eq!(pure(2.0).flux([3.0, 4.0]), [3.0, 4.0]);
        assert_eq!(pure(4.0).flux([1.0, 0.0]), [1.0, 0.0]);
        let lp = FluxLaw::new(3.0, FluxVariant::LinearPlusPLaplacian).with_regularization(0.0);
        assert!((lp.flux_1d(2.0) - 6.0).abs() < 1e-15);
        assert_eq!(pure(3.0).flux([0.0, 0.0]), [0.0, 0.0]);
    }

    #[test]
    fn jacobian_examples() {
        let j = pure(2.0).jacobian([0.3, -7.0]).unwrap();
        assert_eq!(j, [[1.0, 0.0], [0.0, 1.0]]);
        let j = pure(4.0).jacobian([1.0, 0.0]).unwrap();
        assert!((j[0][0] - 3.0).abs() < 1e-14 && (j[1][1] - 1.0).abs() < 1e-14);
        assert_eq!(j[0][1], 0.0);
        assert!(matches!(
            pure(3.0).jacobian([0.0, 0.0]),
            Err(Error::DegenerateFlux { .. })
        ));
        // regularized law is fine at the origin
        assert!(FluxLaw::new(3.0, FluxVariant::PurePLaplacian)
            .jacobian([0.0, 0.0])
            .is_ok());
    }

    #[test]
    fn antiderivative_examples() {
        assert!((pure(2.0).antiderivative([3.0, 4.0]) - 12.5).abs() < 1e-14);
        assert!((pure(4.0).antiderivative([1.0, 1.0]) - 1.0).abs() < 1e-14);
        let lp = FluxLaw::new(4.0, FluxVariant::LinearPlusPLaplacian).with_regularization(0.0);
        assert!((lp.antiderivative([1.0, 1.0]) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn reaction_examples() {
        assert_eq!(ReactionLaw::zero().eval(7.0), 0.0);
        assert!((ReactionLaw::power(2.0, 1.5).eval(4.0) - 4.0).abs() < 1e-14);
        assert_eq!(ReactionLaw::linear(3.0).eval(-2.0), -6.0);
        assert_eq!(ReactionLaw::power(2.0, 1.5).derivative(0.0), 0.0);
        assert_eq!(ReactionLaw::power(2.0, 1.5).growth_exponent(), 0.5);
    }

    #[test]
    fn growth_bounds_at_p2() {
        assert!((subdomain_growth_bound(2.0) - 3.0).abs() < 1e-15);
        assert!((edge_growth_bound(2.0) - 4.0).abs() < 1e-15);
        let bound = subdomain_growth_bound(2.0);
        assert!(2.5 < bound && !(3.1 < bound));
        assert!(3.9 < edge_growth_bound(2.0));
    }

    fn spec_on(domain: &PartitionedDomain, gamma: f64, delta: f64, lambda: f64) -> ModelSpec {
        ModelSpec {
            subdomain_flux: FluxLaw::linear(),
            edge_flux: FluxLaw::linear(),
            subdomain_reaction: ReactionLaw::zero(),
            edge_reaction: ReactionLaw::zero(),
            coefficients: CouplingCoefficients::uniform(
                domain,
                UniformCoefficients {
                    alpha: 1.0,
                    beta: 1.0,
                    gamma,
                    delta,
                    lambda,
                },
            ),
            sources: Sources::default(),
        }
    }

    #[test]
    fn growth_exponent_violations_are_reported() {
        let d = presets::unit_square();
        let mut spec = spec_on(&d, 1.0, 0.0, 0.0);
        // power law with sigma - 1 = q
        spec.subdomain_reaction = ReactionLaw::power(1.0, 3.5);
        assert!(check_assumptions(&spec, &d, 2.0).is_empty());
        spec.subdomain_reaction = ReactionLaw::power(1.0, 4.1);
        let v = check_assumptions(&spec, &d, 2.0);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].assumption, "A3");
        spec.subdomain_reaction = ReactionLaw::zero();
        spec.edge_reaction = ReactionLaw::power(1.0, 4.9);
        assert!(check_assumptions(&spec, &d, 2.0).is_empty());
    }

    #[test]
    fn transfer_inequality_violation_located() {
        let d = presets::unit_square();
        let mut spec = spec_on(&d, 0.0, 0.0, 0.0);
        // vertex 0 joins edges 0 (source) and 3 (terminal)
        spec.coefficients.gamma.insert((0, 3, 0), 1.0);
        let v = check_assumptions(&spec, &d, 2.0);
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].assumption, "A5");
        assert_eq!(v[0].location, "vertex 0, edge 0");
    }

    #[test]
    fn mixed_population_is_flagged() {
        let d = presets::unit_square();
        let mut spec = spec_on(&d, 1.0, 1.0, 1.0);
        assert!(check_assumptions(&spec, &d, 2.0).is_empty());
        spec.coefficients.lambda.insert((2, 1), 0.0);
        assert!(!check_assumptions(&spec, &d, 2.0).is_empty());
        spec.coefficients.alpha.insert((0, 1), -1.0);
        assert!(check_assumptions(&spec, &d, 2.0)
            .iter()
            .any(|v| v.message.contains("alpha")));
    }

    #[test]
    fn stray_coefficients_are_listed() {
        let d = presets::unit_square();
        let mut c = CouplingCoefficients::default();
        c.gamma.insert((0, 1, 2), 1.0);
        c.alpha.insert((0, 3), 1.0);
        let stray = c.stray_entries(&d);
        assert_eq!(stray.len(), 1);
        assert!(stray[0].contains("vertex 0"));
    }

    fn gradient() -> impl Strategy<Value = [f64; 2]> {
        (0.0f64..10.0, 0.0f64..std::f64::consts::TAU).prop_map(|(r, a)| [r * a.cos(), r * a.sin()])
    }

    fn law() -> impl Strategy<Value = FluxLaw> {
        (
            prop_oneof![Just(2.0), Just(2.5), Just(3.0), Just(4.0)],
            any::<bool>(),
        )
            .prop_map(|(p, lin)| {
                FluxLaw::new(
                    p,
                    if lin {
                        FluxVariant::LinearPlusPLaplacian
                    } else {
                        FluxVariant::PurePLaplacian
                    },
                )
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn antiderivative_gradient_is_flux(law in law(), g in gradient()) {
            let h = 1e-6 * (1.0 + g[0].abs().max(g[1].abs()));
            let f = law.flux(g);
            for d in 0..2 {
                let mut gp = g;
                let mut gm = g;
                gp[d] += h;
                gm[d] -= h;
                let fd = (law.antiderivative(gp) - law.antiderivative(gm)) / (2.0 * h);
                let scale = f[0].abs().max(f[1].abs()).max(1.0);
                prop_assert!((fd - f[d]).abs() <= 1e-6 * scale, "fd {fd} vs {}", f[d]);
            }
        }

        #[test]
        fn flux_jacobian_matches_finite_differences(law in law(), g in gradient()) {
            prop_assume!(g[0].hypot(g[1]) > 1e-3);
            let j = law.jacobian(g).unwrap();
            let h = 1e-7;
            for d in 0..2 {
                let mut gp = g;
                let mut gm = g;
                gp[d] += h;
                gm[d] -= h;
                let fp = law.flux(gp);
                let fm = law.flux(gm);
                let scale = j.iter().flatten().fold(1.0f64, |m, x| m.max(x.abs()));
                for r in 0..2 {
                    let fd = (fp[r] - fm[r]) / (2.0 * h);
                    prop_assert!((fd - j[r][d]).abs() <= 1e-6 * scale);
                }
            }
        }

        #[test]
        fn flux_is_monotone(law in law(), q in gradient(), r in gradient()) {
            let fq = law.flux(q);
            let fr = law.flux(r);
            let ip = (fq[0] - fr[0]) * (q[0] - r[0]) + (fq[1] - fr[1]) * (q[1] - r[1]);
            prop_assert!(ip >= -1e-12 * (1.0 + fq[0].abs() + fr[0].abs() + fq[1].abs() + fr[1].abs()));
        }

        #[test]
        fn growth_sandwich_is_exact(p in 2.0f64..5.0, g in gradient()) {
            let law = FluxLaw::new(p, FluxVariant::PurePLaplacian).with_regularization(0.0);
            let n = g[0].hypot(g[1]);
            let lhs = law.antiderivative(g) * p;
            prop_assert!((lhs - n.powf(p)).abs() <= 1e-12 * (1.0 + n.powf(p)));
        }

        #[test]
        fn reactions_are_odd_and_monotone(c in 0.0f64..5.0, sigma in 1.05f64..3.0, a in -10.0f64..10.0, b in -10.0f64..10.0) {
            for law in [ReactionLaw::linear(c), ReactionLaw::power(c, sigma)] {
                prop_assert!((law.eval(a) + law.eval(-a)).abs() <= 1e-12 * (1.0 + law.eval(a).abs()));
                prop_assert!((law.eval(a) - law.eval(b)) * (a - b) >= 0.0);
                prop_assert_eq!(law.eval(0.0), 0.0);
            }
        }
    }
}

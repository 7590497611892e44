//! Finite-data revealed preference checks.
//!
//! x^i is directly (weakly) revealed preferred to x^j when
//! p^i·x^j ≤ p^i·x^i. SARP holds when the transitive closure of that
//! relation never ranks two distinct bundles both ways, i.e. the directed
//! graph over distinct bundles is acyclic.

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};

use crate::cobb_douglas::{demand, Consumer};
use crate::error::{Error, Result};
use crate::geometry::{dot, PricePoint};

/// Slack allowed in p^i·x^j ≤ p^i·x^i.
pub const TIE_TOL: f64 = 1e-10;
/// Bundles closer than this in L∞ are treated as the same bundle.
pub const DISTINCT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub price: PricePoint,
    pub bundle: Vec<f64>,
}

impl Observation {
    pub fn new(price: PricePoint, bundle: Vec<f64>) -> Result<Self> {
        if bundle.len() != price.goods() {
            return Err(Error::DimensionMismatch {
                expected: price.goods(),
                found: bundle.len(),
            });
        }
        if bundle.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "bundle {bundle:?} must be non-negative"
            )));
        }
        Ok(Self { price, bundle })
    }

    fn cost(&self, bundle: &[f64]) -> f64 {
        dot(self.price.coords(), bundle)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationDataset {
    observations: Vec<Observation>,
}

impl ObservationDataset {
    pub fn new(observations: Vec<Observation>) -> Result<Self> {
        let first = observations
            .first()
            .ok_or_else(|| Error::InvalidArgument("dataset has no observations".into()))?;
        let l = first.bundle.len();
        if let Some(o) = observations.iter().find(|o| o.bundle.len() != l) {
            return Err(Error::DimensionMismatch {
                expected: l,
                found: o.bundle.len(),
            });
        }
        Ok(Self { observations })
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn goods(&self) -> usize {
        self.observations[0].bundle.len()
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// x^i R⁰ x^j: bundle j was affordable when i was chosen.
    pub fn directly_revealed(&self, i: usize, j: usize) -> bool {
        let oi = &self.observations[i];
        oi.cost(&self.observations[j].bundle) <= oi.cost(&oi.bundle) + TIE_TOL
    }

    pub fn same_bundle(&self, i: usize, j: usize) -> bool {
        self.observations[i]
            .bundle
            .iter()
            .zip(&self.observations[j].bundle)
            .all(|(a, b)| (a - b).abs() <= DISTINCT_TOL)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SarpOutcome {
    Pass,
    /// Observation indices (0-based) around a revealed-preference cycle;
    /// each is directly revealed preferred to the next, the last to the
    /// first.
    Violation { cycle: Vec<usize> },
}

impl SarpOutcome {
    pub fn is_pass(&self) -> bool {
        matches!(self, SarpOutcome::Pass)
    }

    /// "pass" or "violation: cycle (1,2)" with 1-based observation numbers.
    pub fn describe(&self) -> String {
        match self {
            SarpOutcome::Pass => "pass".to_string(),
            SarpOutcome::Violation { cycle } => {
                let ids: Vec<String> = cycle.iter().map(|i| (i + 1).to_string()).collect();
                format!("violation: cycle ({})", ids.join(","))
            }
        }
    }
}

pub fn sarp_check(d: &ObservationDataset) -> SarpOutcome {
    let n = d.len();
    // group identical bundles; the representative is the first member
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        match groups.iter().position(|g| d.same_bundle(g[0], i)) {
            Some(g) => groups[g].push(i),
            None => groups.push(vec![i]),
        }
    }

    let mut graph: DiGraph<usize, (usize, usize)> = DiGraph::new();
    let nodes: Vec<NodeIndex> = (0..groups.len()).map(|g| graph.add_node(g)).collect();
    for (gi, members_i) in groups.iter().enumerate() {
        for (gj, members_j) in groups.iter().enumerate() {
            if gi == gj {
                continue;
            }
            let witness = members_i.iter().find_map(|&i| {
                members_j
                    .iter()
                    .find(|&&j| d.directly_revealed(i, j))
                    .map(|&j| (i, j))
            });
            if let Some(w) = witness {
                graph.add_edge(nodes[gi], nodes[gj], w);
            }
        }
    }

    let cyclic = tarjan_scc(&graph)
        .into_iter()
        .filter(|c| c.len() > 1)
        .min_by_key(|c| c.iter().map(|n| n.index()).min());
    let Some(component) = cyclic else {
        return SarpOutcome::Pass;
    };
    let start = component.iter().copied().min_by_key(|n| n.index()).unwrap();
    SarpOutcome::Violation {
        cycle: shortest_cycle(&graph, start, &component),
    }
}

/// BFS from `start` back to itself within one strongly connected component.
fn shortest_cycle(
    graph: &DiGraph<usize, (usize, usize)>,
    start: NodeIndex,
    component: &[NodeIndex],
) -> Vec<usize> {
    use std::collections::VecDeque;
    let mut prev: Vec<Option<(NodeIndex, (usize, usize))>> = vec![None; graph.node_count()];
    let mut queue = VecDeque::from([start]);
    let mut seen = vec![false; graph.node_count()];
    seen[start.index()] = true;
    let mut closing = None;
    'bfs: while let Some(u) = queue.pop_front() {
        let mut edges: Vec<_> = graph
            .edges(u)
            .map(|e| {
                use petgraph::visit::EdgeRef;
                (e.target(), *e.weight())
            })
            .filter(|(t, _)| component.contains(t))
            .collect();
        edges.sort_by_key(|(t, _)| t.index());
        for (t, w) in edges {
            if t == start {
                closing = Some((u, w));
                break 'bfs;
            }
            if !seen[t.index()] {
                seen[t.index()] = true;
                prev[t.index()] = Some((u, w));
                queue.push_back(t);
            }
        }
    }
    let (mut node, last) = closing.expect("strongly connected component has a cycle");
    let mut cycle = vec![last.0];
    while node != start {
        let (p, w) = prev[node.index()].expect("BFS tree");
        cycle.push(w.0);
        node = p;
    }
    cycle.reverse();
    cycle
}

/// Pairs each price with the consumer's (unscaled) demand.
pub fn sample_demand(c: &Consumer, prices: &[PricePoint]) -> Result<ObservationDataset> {
    let observations = prices
        .iter()
        .map(|p| Observation::new(p.clone(), demand(c, p)?))
        .collect::<Result<Vec<_>>>()?;
    ObservationDataset::new(observations)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditSample {
    pub price: PricePoint,
    pub scale: f64,
    /// |p·(μz)| with p in the simplex frame.
    pub walras_residual: f64,
    /// min over goods of (μz)ᵢ + μ·ωᵢ; negative means the lower bound failed.
    pub bound_slack: f64,
    /// max deviation of μz between p and λp for λ ∈ {0.5, 2, 10}.
    pub homogeneity_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub samples: Vec<AuditSample>,
    /// Samples where the scale is not strictly positive.
    pub flagged: Vec<usize>,
    pub walras_ok: bool,
    pub bounded_below_ok: bool,
    pub homogeneous_ok: bool,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.flagged.is_empty() && self.walras_ok && self.bounded_below_ok && self.homogeneous_ok
    }

    pub fn summary(&self) -> String {
        let worst_walras = self
            .samples
            .iter()
            .map(|s| s.walras_residual)
            .fold(0.0, f64::max);
        let flagged: Vec<String> = self.flagged.iter().map(|i| (i + 1).to_string()).collect();
        format!(
            "samples: {}\nwalras: {} (max |p.z| {:.3e})\nbounded below: {}\nhomogeneous: {}\nnon-positive scale at samples: [{}]\nverdict: {}\n",
            self.samples.len(),
            if self.walras_ok { "ok" } else { "FAIL" },
            worst_walras,
            if self.bounded_below_ok { "ok" } else { "FAIL" },
            if self.homogeneous_ok { "ok" } else { "FAIL" },
            flagged.join(","),
            if self.passed() { "pass" } else { "fail" }
        )
    }
}

/// Sampled checks of the properties a positively rescaled excess demand
/// must keep: Walras' law, homogeneity of degree zero, and the lower bound
/// μ(p)·zᵢ(p) ≥ −μ(p)·ωᵢ.
pub fn scaled_field_audit(c: &Consumer, prices: &[PricePoint]) -> Result<AuditReport> {
    const WALRAS_TOL: f64 = 1e-9;
    const HOMOGENEITY_TOL: f64 = 1e-10;
    let mut samples = Vec::with_capacity(prices.len());
    let mut flagged = Vec::new();
    for (k, p) in prices.iter().enumerate() {
        if p.goods() != c.goods() {
            return Err(Error::DimensionMismatch {
                expected: c.goods(),
                found: p.goods(),
            });
        }
        let s = p.simplex_coords();
        let mu = c.scale_at(&s);
        if !(mu > 0.0) {
            flagged.push(k);
            continue;
        }
        let z = c.excess_demand_raw(&s)?;
        let walras_residual = dot(&s, &z).abs();
        let bound_slack = z
            .iter()
            .zip(c.endowment())
            .map(|(zi, wi)| zi + mu * wi)
            .fold(f64::INFINITY, f64::min);
        let mut homogeneity_error: f64 = 0.0;
        for lambda in [0.5, 2.0, 10.0] {
            let scaled: Vec<f64> = s.iter().map(|x| x * lambda).collect();
            let zl = c.excess_demand_raw(&scaled)?;
            for (a, b) in z.iter().zip(&zl) {
                homogeneity_error = homogeneity_error.max((a - b).abs());
            }
        }
        samples.push(AuditSample {
            price: p.clone(),
            scale: mu,
            walras_residual,
            bound_slack,
            homogeneity_error,
        });
    }
    let walras_ok = samples.iter().all(|s| s.walras_residual <= WALRAS_TOL);
    let bounded_below_ok = samples
        .iter()
        .all(|s| s.bound_slack >= -1e-12 * s.scale.max(1.0));
    let homogeneous_ok = samples
        .iter()
        .all(|s| s.homogeneity_error <= HOMOGENEITY_TOL);
    Ok(AuditReport {
        samples,
        flagged,
        walras_ok,
        bounded_below_ok,
        homogeneous_ok,
    })
}

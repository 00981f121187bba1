//! Minimum-cost undetectable data-injection attack synthesis.
//!
//! Biasing a target state variable undetectably requires compromising every
//! meter that measures an edge crossing some reference/target cut; the
//! cheapest attack therefore sits on a minimum S-T cut of the measured graph
//! weighted by meter compromise costs. Secured meters push an edge weight to
//! infinity. The emitted bias is constant on the separated component, so the
//! forged vector a = Hc touches only meters on the cut.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::estimator::{forge_attack, verify_undetectable, AttackVector, StateVector};
use crate::jacobian::JacobianMatrix;
use crate::maxflow::FlowNetwork;
use crate::model::{BusId, MeterKind, MeterSet, PowerNetwork};
use crate::scalar::{sc, Scalar};

/// Buses the adversary wants to bias, plus meters declared off-limits on top
/// of the `secured` flags carried by the meter set.
#[derive(Debug, Clone, Default)]
pub struct AttackTarget {
    pub buses: Vec<BusId>,
    pub forbidden: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct AttackOptions<T> {
    /// Bias magnitude applied to the separated component (radians).
    pub delta: T,
    /// Lines with unknown parameters, excluded from cutting.
    pub unknown_lines: Vec<(BusId, BusId)>,
}

impl<T: Scalar> Default for AttackOptions<T> {
    fn default() -> Self {
        Self {
            delta: sc(0.1),
            unknown_lines: Vec::new(),
        }
    }
}

/// Weighted cut graph over the network vertices, with one extra virtual
/// terminal node when several targets are attacked at once.
#[derive(Debug, Clone)]
pub struct CutGraph<T> {
    /// Per line: the compromise weight (sum of unsecured meter costs;
    /// +infinity when a secured meter measures it; 0 when unmeasured).
    pub line_weights: Vec<T>,
    /// Meters measuring each line, canonical order.
    pub line_meters: Vec<Vec<String>>,
    /// Virtual terminal present (multi-target attack).
    pub virtual_terminal: bool,
    pub source: BusId,
    pub targets: Vec<BusId>,
}

fn secured_set<T: Scalar>(meters: &MeterSet<T>, target: &AttackTarget) -> Result<BTreeSet<String>> {
    let mut secured = BTreeSet::new();
    for m in meters.meters() {
        if m.secured {
            secured.insert(m.id.clone());
        }
    }
    for id in &target.forbidden {
        meters.get(id)?;
        secured.insert(id.clone());
    }
    Ok(secured)
}

/// Builds the weighted cut graph for a target set.
pub fn build_cut_graph<T: Scalar>(
    network: &PowerNetwork<T>,
    meters: &MeterSet<T>,
    target: &AttackTarget,
    options: &AttackOptions<T>,
) -> Result<CutGraph<T>> {
    if target.buses.is_empty() {
        return Err(Error::InvalidCase("attack target set is empty".into()));
    }
    let r = network.reference_id();
    for &b in &target.buses {
        network.bus_idx(b)?;
        if b == r {
            return Err(Error::InvalidCase(
                "the reference bus cannot be an attack target".into(),
            ));
        }
    }
    let secured = secured_set(meters, target)?;
    let mut unknown = BTreeSet::new();
    for &(a, b) in &options.unknown_lines {
        let li = network.line_idx(a, b)?;
        unknown.insert(li);
    }

    let mut line_weights = vec![T::zero(); network.lines().len()];
    let mut line_meters = vec![Vec::new(); network.lines().len()];
    for m in meters.meters() {
        let lines: Vec<usize> = match &m.kind {
            MeterKind::Flow { from, to } => vec![network.line_idx(*from, *to)?],
            MeterKind::Injection { bus } => network
                .adjacent(network.bus_idx(*bus)?)
                .iter()
                .map(|&(_, li)| li)
                .collect(),
        };
        for li in lines {
            line_meters[li].push(m.id.clone());
            if secured.contains(&m.id) {
                line_weights[li] = T::infinity();
            } else if line_weights[li].is_finite() {
                line_weights[li] = line_weights[li] + m.cost;
            }
        }
    }
    for li in unknown {
        line_weights[li] = T::infinity();
    }
    Ok(CutGraph {
        line_weights,
        line_meters,
        virtual_terminal: target.buses.len() > 1,
        source: r,
        targets: target.buses.clone(),
    })
}

/// A synthesized attack: the cut, the meters to compromise, both cost
/// readings (weight model vs distinct meters), and the verified vector.
#[derive(Debug, Clone)]
pub struct AttackPlan<T> {
    pub cut_edges: Vec<(BusId, BusId)>,
    pub compromised_meters: Vec<String>,
    /// Minimum cut value under the per-edge weight model. Shared injection
    /// meters can be double-charged here.
    pub cost: T,
    /// Sum of costs over the distinct compromised meters.
    pub realized_cost: T,
    pub bias: StateVector<T>,
    pub vector: AttackVector<T>,
}

/// Minimum S-T cut attack against the target buses.
pub fn min_cut_attack<T: Scalar>(
    network: &PowerNetwork<T>,
    meters: &MeterSet<T>,
    target: &AttackTarget,
    options: &AttackOptions<T>,
) -> Result<AttackPlan<T>> {
    let cut_graph = build_cut_graph(network, meters, target, options)?;
    min_cut_attack_on(network, meters, &cut_graph, options)
}

/// Attack with every unsecured meter priced at 1: minimizes the edge-weight
/// count, an upper bound on the number of meters to control.
pub fn smallest_attack_meter_set<T: Scalar>(
    network: &PowerNetwork<T>,
    meters: &MeterSet<T>,
    target: &AttackTarget,
    options: &AttackOptions<T>,
) -> Result<AttackPlan<T>> {
    let mut unit = cut_graph_with_unit_costs(network, meters, target, options)?;
    min_cut_attack_on(network, meters, &mut unit, options)
}

fn cut_graph_with_unit_costs<T: Scalar>(
    network: &PowerNetwork<T>,
    meters: &MeterSet<T>,
    target: &AttackTarget,
    options: &AttackOptions<T>,
) -> Result<CutGraph<T>> {
    let mut flat = Vec::new();
    for m in meters.meters() {
        let mut m = m.clone();
        m.cost = T::one();
        flat.push(m);
    }
    let unit_meters = MeterSet::new(network, flat)?;
    build_cut_graph(network, &unit_meters, target, options)
}

fn min_cut_attack_on<T: Scalar>(
    network: &PowerNetwork<T>,
    meters: &MeterSet<T>,
    cut_graph: &CutGraph<T>,
    options: &AttackOptions<T>,
) -> Result<AttackPlan<T>> {
    let nb = network.buses().len();
    let vt = nb; // virtual terminal node index when present
    let nodes = nb + usize::from(cut_graph.virtual_terminal);
    let source = network.reference_idx();

    // infeasibility check: a path of infinite-weight lines from the source
    // into the target set certifies that every cut costs infinity
    if let Some(barrier) = infinite_barrier(network, cut_graph) {
        return Err(Error::AttackImpossible { barrier });
    }

    let mut flow = FlowNetwork::<T>::new(nodes);
    let mut edge_ids = Vec::with_capacity(network.lines().len());
    for (li, line) in network.lines().iter().enumerate() {
        let (u, v) = (
            network.bus_idx(line.from).unwrap(),
            network.bus_idx(line.to).unwrap(),
        );
        edge_ids.push(flow.add_undirected(u, v, cut_graph.line_weights[li]));
    }
    let sink = if cut_graph.virtual_terminal {
        for &t in &cut_graph.targets {
            flow.add_undirected(network.bus_idx(t)?, vt, T::infinity());
        }
        vt
    } else {
        network.bus_idx(cut_graph.targets[0])?
    };

    let cost = flow.max_flow(source, sink)?;
    let side = flow.source_side(source);

    let mut cut_edges = Vec::new();
    let mut compromised = Vec::new();
    let mut seen = BTreeSet::new();
    for (li, line) in network.lines().iter().enumerate() {
        let (u, v) = (
            network.bus_idx(line.from).unwrap(),
            network.bus_idx(line.to).unwrap(),
        );
        if side[u] != side[v] {
            cut_edges.push(line.pair());
            for id in &cut_graph.line_meters[li] {
                if seen.insert(id.clone()) {
                    compromised.push(id.clone());
                }
            }
        }
    }
    // canonical order
    let mut compromised: Vec<String> = meters
        .ids()
        .into_iter()
        .filter(|id| seen.contains(id))
        .collect();
    compromised.dedup();

    let realized_cost = compromised
        .iter()
        .map(|id| meters.get(id).map(|m| m.cost))
        .sum::<Result<T>>()?;

    // bias: delta on the separated component, zero elsewhere
    let bias_values: Vec<T> = network
        .state_buses()
        .iter()
        .map(|&b| {
            if side[network.bus_idx(b).unwrap()] {
                T::zero()
            } else {
                options.delta
            }
        })
        .collect();
    let bias = StateVector { values: bias_values };

    let h = JacobianMatrix::build(network, meters)?;
    let vector = forge_attack(&h, &bias)?;
    if !verify_undetectable(&h, &vector, sc(1e-9)) {
        return Err(Error::Internal("forged attack failed verification".into()));
    }
    if !vector
        .support
        .iter()
        .all(|id| compromised.iter().any(|c| c == id))
    {
        return Err(Error::Internal(
            "attack support leaks outside the compromised meter set".into(),
        ));
    }
    Ok(AttackPlan {
        cut_edges,
        compromised_meters: compromised,
        cost,
        realized_cost,
        bias,
        vector,
    })
}

/// Path of infinite-weight lines joining the source to any target, if one
/// exists; such a path certifies that no finite cut separates them.
fn infinite_barrier<T: Scalar>(
    network: &PowerNetwork<T>,
    cut_graph: &CutGraph<T>,
) -> Option<Vec<(BusId, BusId)>> {
    let n = network.buses().len();
    let mut prev: Vec<Option<(usize, usize)>> = vec![None; n];
    let mut seen = vec![false; n];
    let s = network.reference_idx();
    seen[s] = true;
    let mut queue = std::collections::VecDeque::new();
    queue.push_back(s);
    while let Some(u) = queue.pop_front() {
        for &(v, li) in network.adjacent(u) {
            if !seen[v] && cut_graph.line_weights[li] == T::infinity() {
                seen[v] = true;
                prev[v] = Some((u, li));
                queue.push_back(v);
            }
        }
    }
    for &t in &cut_graph.targets {
        let ti = network.bus_idx(t).ok()?;
        if seen[ti] {
            let mut path = Vec::new();
            let mut cur = ti;
            while let Some((p, li)) = prev[cur] {
                path.push(network.line(li).pair());
                cur = p;
            }
            path.reverse();
            return Some(path);
        }
    }
    None
}

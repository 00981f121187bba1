//! Network and subnetwork observability, basic measurement sets, and
//! edge-measured Steiner tree (EMST) construction.
//!
//! A measured subgraph is observable exactly when an EMST exists: a tree
//! containing the reference bus whose edges are injectively mapped to meters
//! that measure them. Observability itself is decided algebraically from the
//! rank of the measurement Jacobian restricted to the subgraph columns.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::certificate_buses;
use crate::jacobian::JacobianMatrix;
use crate::linalg::{nullspace, Mat};
use crate::matching::tree_matching;
use crate::model::{measured_subgraph, BusId, MeasuredSubgraph, MeterKind, MeterSet, PowerNetwork};
use crate::scalar::{sc, Scalar};

/// Nonzero vector c with H c = 0, exposing buses whose state the meters
/// cannot pin down.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate<T> {
    pub null_vector: Vec<T>,
    pub buses: Vec<BusId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservabilityVerdict<T> {
    pub observable: bool,
    pub certificate: Option<Certificate<T>>,
}

/// Decides observability of the subgraph measured by `meters`.
///
/// With `targets = None` the verdict covers the measured subgraph itself:
/// the reference bus must be covered and the Jacobian restricted to the
/// measured columns must have full rank. With `targets = Some(buses)` those
/// buses must additionally lie inside the measured subgraph; passing every
/// non-reference bus gives the classic full-network rank(H) = n test.
pub fn is_observable<T: Scalar>(
    network: &PowerNetwork<T>,
    meters: &MeterSet<T>,
    targets: Option<&[BusId]>,
) -> Result<ObservabilityVerdict<T>> {
    let ids = meters.ids();
    let subgraph = measured_subgraph(network, meters, &ids)?;
    if let Some(targets) = targets {
        for b in targets {
            network.bus_idx(*b)?;
            if !subgraph.vertices.contains(b) {
                return Ok(unit_certificate(network, *b));
            }
        }
    }
    if !subgraph.vertices.contains(&network.reference_id()) {
        // nothing ties the measured angles to the reference
        let cols = network.state_buses();
        let null_vector: Vec<T> = cols
            .iter()
            .map(|b| {
                if subgraph.vertices.contains(b) || subgraph.vertices.is_empty() {
                    T::one()
                } else {
                    T::zero()
                }
            })
            .collect();
        let buses = certificate_buses(&cols, &null_vector);
        return Ok(ObservabilityVerdict {
            observable: false,
            certificate: Some(Certificate { null_vector, buses }),
        });
    }

    let h = JacobianMatrix::build(network, meters)?;
    let state_cols: Vec<(usize, BusId)> = network
        .state_buses()
        .into_iter()
        .enumerate()
        .filter(|(_, b)| subgraph.vertices.contains(b))
        .collect();
    let want = state_cols.len();
    let mut restricted = Mat::zeros(h.rows(), want);
    for r in 0..h.rows() {
        for (j, &(c, _)) in state_cols.iter().enumerate() {
            restricted.set(r, j, h.get(r, c));
        }
    }
    let ns = nullspace(&restricted);
    if ns.is_empty() || want == 0 {
        return Ok(ObservabilityVerdict {
            observable: true,
            certificate: None,
        });
    }
    // embed the restricted null vector into full column space
    let mut null_vector = vec![T::zero(); h.cols()];
    for (j, &(c, _)) in state_cols.iter().enumerate() {
        null_vector[c] = ns[0][j];
    }
    let buses = certificate_buses(h.col_buses(), &null_vector);
    Ok(ObservabilityVerdict {
        observable: false,
        certificate: Some(Certificate { null_vector, buses }),
    })
}

fn unit_certificate<T: Scalar>(network: &PowerNetwork<T>, bus: BusId) -> ObservabilityVerdict<T> {
    let cols = network.state_buses();
    let mut null_vector = vec![T::zero(); cols.len()];
    if let Some(pos) = cols.iter().position(|b| *b == bus) {
        null_vector[pos] = T::one();
    }
    ObservabilityVerdict {
        observable: false,
        certificate: Some(Certificate {
            null_vector,
            buses: vec![bus],
        }),
    }
}

/// Convenience full-network check: every non-reference bus estimable.
pub fn is_fully_observable<T: Scalar>(
    network: &PowerNetwork<T>,
    meters: &MeterSet<T>,
) -> Result<ObservabilityVerdict<T>> {
    let all = network.state_buses();
    is_observable(network, meters, Some(&all))
}

/// Meter ids whose Jacobian rows are linearly independent and span the
/// measured subgraph: exactly |V̄| - 1 of them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasicSet {
    pub meter_ids: Vec<String>,
}

/// Extracts a basic measurement set by Gauss-Jordan elimination over the
/// meter rows in canonical order; the first independent row wins, so the
/// result is deterministic.
pub fn find_basic_set<T: Scalar>(
    network: &PowerNetwork<T>,
    meters: &MeterSet<T>,
) -> Result<BasicSet> {
    let verdict = is_observable(network, meters, None)?;
    if !verdict.observable {
        let cert = verdict.certificate.expect("failed verdict carries certificate");
        return Err(Error::Unobservable {
            certificate: cert.null_vector.iter().map(|v| v.to_f64_lossy()).collect(),
            buses: cert.buses,
        });
    }
    let ids = meters.ids();
    let subgraph = measured_subgraph(network, meters, &ids)?;
    let h = JacobianMatrix::build(network, meters)?;
    let state_cols: Vec<usize> = network
        .state_buses()
        .into_iter()
        .enumerate()
        .filter(|(_, b)| subgraph.vertices.contains(b))
        .map(|(c, _)| c)
        .collect();
    let target = state_cols.len();

    let mut basis: Vec<Vec<T>> = Vec::new();
    let mut pivot_cols: Vec<usize> = Vec::new();
    let mut chosen = Vec::new();
    let scale = {
        let mut m = T::one();
        for r in 0..h.rows() {
            for &c in &state_cols {
                m = m.max(h.get(r, c).abs());
            }
        }
        m
    };
    let tol = scale * sc::<T>(1e-9);
    for (r, meter) in meters.meters().iter().enumerate() {
        if basis.len() == target {
            break;
        }
        let mut v: Vec<T> = state_cols.iter().map(|&c| h.get(r, c)).collect();
        for (b, &pc) in basis.iter().zip(&pivot_cols) {
            let f = v[pc];
            if f != T::zero() {
                for (vi, bi) in v.iter_mut().zip(b) {
                    *vi = *vi - f * *bi;
                }
            }
        }
        let (mut pc, mut best) = (0, T::zero());
        for (j, &x) in v.iter().enumerate() {
            if x.abs() > best {
                best = x.abs();
                pc = j;
            }
        }
        if best <= tol {
            continue;
        }
        let inv = T::one() / v[pc];
        for x in v.iter_mut() {
            *x = *x * inv;
        }
        basis.push(v);
        pivot_cols.push(pc);
        chosen.push(meter.id.clone());
    }
    if basis.len() != target {
        return Err(Error::Internal(format!(
            "basic set extraction found rank {} of {}",
            basis.len(),
            target
        )));
    }
    Ok(BasicSet { meter_ids: chosen })
}

/// An edge-measured Steiner tree: spans the measured vertex set, contains
/// the reference bus, and maps each tree edge to a distinct meter that
/// measures it. Serializes as {"vertices", "edges", "mapping"} with the
/// mapping keyed by meter id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Emst {
    pub vertices: BTreeSet<BusId>,
    pub edges: Vec<(BusId, BusId)>,
    pub mapping: BTreeMap<String, (BusId, BusId)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EmstViolation {
    /// Reference bus missing (condition 1).
    MissingReference,
    /// A mapped meter does not measure its edge (condition 2).
    MeterEdgeMismatch { meter: String, edge: (BusId, BusId) },
    /// Mapping is not a bijection between tree edges and meters (condition 3).
    NotBijective(String),
    /// The edge set is not a tree spanning the vertex set.
    NotATree(String),
}

impl std::fmt::Display for EmstViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EmstViolation::MissingReference => write!(f, "condition 1: reference bus not in tree"),
            EmstViolation::MeterEdgeMismatch { meter, edge } => write!(
                f,
                "condition 2: meter {meter:?} does not measure edge ({},{})",
                edge.0, edge.1
            ),
            EmstViolation::NotBijective(msg) => write!(f, "condition 3: {msg}"),
            EmstViolation::NotATree(msg) => write!(f, "not a tree: {msg}"),
        }
    }
}

/// Checks the three EMST conditions plus tree-ness; lists every violation.
pub fn validate_emst<T: Scalar>(
    network: &PowerNetwork<T>,
    meters: &MeterSet<T>,
    emst: &Emst,
) -> (bool, Vec<EmstViolation>) {
    let mut violations = Vec::new();
    if !emst.vertices.contains(&network.reference_id()) {
        violations.push(EmstViolation::MissingReference);
    }
    if emst.edges.len() + 1 != emst.vertices.len() {
        violations.push(EmstViolation::NotATree(format!(
            "{} edges cannot span {} vertices",
            emst.edges.len(),
            emst.vertices.len()
        )));
    }
    let vs: Vec<BusId> = emst.vertices.iter().copied().collect();
    let pos = |b: BusId| vs.iter().position(|&x| x == b);
    let mut parent: Vec<usize> = (0..vs.len()).collect();
    fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for &(a, b) in &emst.edges {
        match (pos(a), pos(b), network.line_idx(a, b)) {
            (Some(pa), Some(pb), Ok(_)) => {
                let (ra, rb) = (find(&mut parent, pa), find(&mut parent, pb));
                if ra == rb {
                    violations.push(EmstViolation::NotATree(format!(
                        "edge ({a},{b}) closes a cycle"
                    )));
                } else {
                    parent[ra] = rb;
                }
            }
            _ => violations.push(EmstViolation::NotATree(format!(
                "edge ({a},{b}) is not a line between tree vertices"
            ))),
        }
    }
    if !vs.is_empty() {
        let root = find(&mut parent, 0);
        if (0..vs.len()).any(|i| find(&mut parent, i) != root) {
            violations.push(EmstViolation::NotATree("tree is disconnected".into()));
        }
    }

    let mut seen_edges = BTreeSet::new();
    for (meter_id, &(a, b)) in &emst.mapping {
        let edge = if a <= b { (a, b) } else { (b, a) };
        if !seen_edges.insert(edge) {
            violations.push(EmstViolation::NotBijective(format!(
                "edge ({},{}) mapped by more than one meter",
                edge.0, edge.1
            )));
        }
        if !emst.edges.iter().any(|&(x, y)| (x, y) == edge) {
            violations.push(EmstViolation::NotBijective(format!(
                "meter {meter_id:?} maps to edge ({},{}) outside the tree",
                edge.0, edge.1
            )));
        }
        match meters.get(meter_id) {
            Err(_) => violations.push(EmstViolation::MeterEdgeMismatch {
                meter: meter_id.clone(),
                edge,
            }),
            Ok(m) => {
                if !meter_measures_edge(network, &m.kind, edge) {
                    violations.push(EmstViolation::MeterEdgeMismatch {
                        meter: meter_id.clone(),
                        edge,
                    });
                }
            }
        }
    }
    for &(a, b) in &emst.edges {
        if !seen_edges.contains(&(a, b)) {
            violations.push(EmstViolation::NotBijective(format!(
                "tree edge ({a},{b}) has no meter"
            )));
        }
    }
    (violations.is_empty(), violations)
}

fn meter_measures_edge<T: Scalar>(
    network: &PowerNetwork<T>,
    kind: &MeterKind,
    edge: (BusId, BusId),
) -> bool {
    match kind {
        MeterKind::Flow { from, to } => {
            let (a, b) = if from <= to { (*from, *to) } else { (*to, *from) };
            (a, b) == edge
        }
        MeterKind::Injection { bus } => {
            (edge.0 == *bus || edge.1 == *bus) && network.line_idx(edge.0, edge.1).is_ok()
        }
    }
}

/// Builds an EMST of an observable measured subgraph from a basic set.
///
/// Candidate root-incident edges are forced one at a time (canonical order);
/// for each candidate a unit-capacity matching between meters and the edges
/// they measure is grown and exchanged until the selected edges form a
/// spanning tree, mirroring the max-flow construction with a forced root
/// edge. The first candidate that yields a feasible tree wins.
pub fn construct_emst<T: Scalar>(
    network: &PowerNetwork<T>,
    subgraph: &MeasuredSubgraph,
    meters: &MeterSet<T>,
    basic: &BasicSet,
) -> Result<Emst> {
    let verts: Vec<BusId> = subgraph.vertices.iter().copied().collect();
    let nv = verts.len();
    let r = network.reference_id();
    if !subgraph.vertices.contains(&r) {
        return Err(Error::Internal(
            "EMST construction on a subgraph that misses the reference bus".into(),
        ));
    }
    let vert_pos: BTreeMap<BusId, usize> =
        verts.iter().enumerate().map(|(i, &b)| (b, i)).collect();

    let basic_meters: Vec<&crate::model::Meter<T>> = basic
        .meter_ids
        .iter()
        .map(|id| meters.get(id))
        .collect::<Result<_>>()?;

    // ground set: subgraph edges measured by at least one basic meter
    let mut edges: Vec<(BusId, BusId)> = Vec::new();
    let mut measure: Vec<Vec<usize>> = Vec::new();
    for &(a, b) in subgraph.edges.iter() {
        let who: Vec<usize> = basic_meters
            .iter()
            .enumerate()
            .filter(|(_, m)| meter_measures_edge(network, &m.kind, (a, b)))
            .map(|(i, _)| i)
            .collect();
        if !who.is_empty() {
            edges.push((a, b));
            measure.push(who);
        }
    }
    let local: Vec<(usize, usize)> = edges
        .iter()
        .map(|&(a, b)| (vert_pos[&a], vert_pos[&b]))
        .collect();

    let candidates: Vec<usize> = (0..edges.len())
        .filter(|&e| edges[e].0 == r || edges[e].1 == r)
        .collect();
    for forced in candidates {
        if let Some(out) = tree_matching(
            nv,
            &local,
            &measure,
            basic_meters.len(),
            forced,
            nv.saturating_sub(1),
        ) {
            // spanning connectivity check on the selected edges
            let mut uf: Vec<usize> = (0..nv).collect();
            fn find(p: &mut Vec<usize>, mut x: usize) -> usize {
                while p[x] != x {
                    p[x] = p[p[x]];
                    x = p[x];
                }
                x
            }
            for &e in &out.edges {
                let (u, v) = local[e];
                let (ru, rv) = (find(&mut uf, u), find(&mut uf, v));
                if ru == rv {
                    return Err(Error::Internal("selected edges contain a cycle".into()));
                }
                uf[ru] = rv;
            }
            let root = find(&mut uf, 0);
            if (0..nv).any(|i| find(&mut uf, i) != root) {
                continue;
            }
            let mapping: BTreeMap<String, (BusId, BusId)> = out
                .edges
                .iter()
                .zip(&out.meters)
                .map(|(&e, &m)| (basic_meters[m].id.clone(), edges[e]))
                .collect();
            return Ok(Emst {
                vertices: subgraph.vertices.clone(),
                edges: out.edges.iter().map(|&e| edges[e]).collect(),
                mapping,
            });
        }
    }
    Err(Error::Internal(
        "no candidate root edge yields a feasible tree on an observable subgraph".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Bus, Line, Meter};

    fn bus(id: BusId, r: bool) -> Bus {
        Bus { id, is_reference: r }
    }

    fn line(from: BusId, to: BusId) -> Line<f64> {
        Line { from, to, reactance: 1.0 }
    }

    fn flow(id: &str, from: BusId, to: BusId) -> Meter<f64> {
        Meter {
            id: id.into(),
            kind: MeterKind::Flow { from, to },
            cost: 1.0,
            secured: false,
        }
    }

    #[test]
    fn single_meter_three_bus_certificate() {
        let net = PowerNetwork::new(
            vec![bus(1, true), bus(2, false), bus(3, false)],
            vec![line(1, 2), line(2, 3)],
        )
        .unwrap();
        let ms = MeterSet::new(&net, vec![flow("f", 1, 2)]).unwrap();
        let verdict = is_fully_observable(&net, &ms).unwrap();
        assert!(!verdict.observable);
        assert_eq!(verdict.certificate.unwrap().buses, vec![3]);
        // the subgraph alone is observable
        assert!(is_observable(&net, &ms, None).unwrap().observable);
    }

    #[test]
    fn empty_meter_set_is_unobservable() {
        let net = PowerNetwork::new(
            vec![bus(1, true), bus(2, false)],
            vec![line(1, 2)],
        )
        .unwrap();
        let ms = MeterSet::new(&net, vec![]).unwrap();
        let verdict = is_observable(&net, &ms, None).unwrap();
        assert!(!verdict.observable);
    }

    #[test]
    fn basic_set_on_square_system_returns_all() {
        let net = PowerNetwork::new(
            vec![bus(1, true), bus(2, false), bus(3, false)],
            vec![line(1, 2), line(2, 3)],
        )
        .unwrap();
        let ms = MeterSet::new(&net, vec![flow("a", 1, 2), flow("b", 2, 3)]).unwrap();
        let basic = find_basic_set(&net, &ms).unwrap();
        assert_eq!(basic.meter_ids, vec!["a", "b"]);
    }

    #[test]
    fn construct_two_bus_tree() {
        let net = PowerNetwork::new(
            vec![bus(1, true), bus(2, false)],
            vec![line(1, 2)],
        )
        .unwrap();
        let ms = MeterSet::new(&net, vec![flow("m", 1, 2)]).unwrap();
        let sg = measured_subgraph(&net, &ms, &["m"]).unwrap();
        let basic = find_basic_set(&net, &ms).unwrap();
        let emst = construct_emst(&net, &sg, &ms, &basic).unwrap();
        assert_eq!(emst.edges, vec![(1, 2)]);
        assert_eq!(emst.mapping["m"], (1, 2));
        let (ok, v) = validate_emst(&net, &ms, &emst);
        assert!(ok, "{v:?}");
    }

    #[test]
    fn validate_flags_missing_reference() {
        let net = PowerNetwork::new(
            vec![bus(1, true), bus(2, false), bus(3, false)],
            vec![line(1, 2), line(2, 3)],
        )
        .unwrap();
        let ms = MeterSet::new(&net, vec![flow("a", 2, 3)]).unwrap();
        let emst = Emst {
            vertices: [2, 3].into_iter().collect(),
            edges: vec![(2, 3)],
            mapping: [("a".to_string(), (2, 3))].into_iter().collect(),
        };
        let (ok, violations) = validate_emst(&net, &ms, &emst);
        assert!(!ok);
        assert!(violations.contains(&EmstViolation::MissingReference));
    }

    #[test]
    fn validate_flags_condition_two() {
        let net = PowerNetwork::new(
            vec![bus(1, true), bus(2, false), bus(3, false)],
            vec![line(1, 2), line(2, 3)],
        )
        .unwrap();
        let ms = MeterSet::new(&net, vec![flow("a", 1, 2), flow("b", 1, 2)]).unwrap();
        // meter b maps to an edge it does not measure
        let emst = Emst {
            vertices: [1, 2, 3].into_iter().collect(),
            edges: vec![(1, 2), (2, 3)],
            mapping: [
                ("a".to_string(), (1, 2)),
                ("b".to_string(), (2, 3)),
            ]
            .into_iter()
            .collect(),
        };
        let (ok, violations) = validate_emst(&net, &ms, &emst);
        assert!(!ok);
        assert!(violations
            .iter()
            .any(|v| matches!(v, EmstViolation::MeterEdgeMismatch { meter, .. } if meter == "b")));
    }
}

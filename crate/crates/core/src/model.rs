use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// External bus identifier as it appears in case files (1-based, arbitrary).
pub type BusId = i64;

/// Index into `PowerNetwork::buses` (dense, 0-based, ascending by id).
pub type BusIdx = usize;

/// Index into `PowerNetwork::lines` (dense, 0-based, canonical order).
pub type LineIdx = usize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bus {
    pub id: BusId,
    pub is_reference: bool,
}

/// Transmission line with canonical endpoint order `from < to`.
#[derive(Debug, Clone, PartialEq)]
pub struct Line<T> {
    pub from: BusId,
    pub to: BusId,
    pub reactance: T,
}

impl<T: Scalar> Line<T> {
    pub fn pair(&self) -> (BusId, BusId) {
        (self.from, self.to)
    }
}

/// The undirected graph G = (V, E): buses plus transmission lines.
///
/// Construction validates every type invariant: unique ids, exactly one
/// reference bus, distinct existing endpoints, positive reactances, at most
/// one line per bus pair, and connectivity.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerNetwork<T> {
    buses: Vec<Bus>,
    lines: Vec<Line<T>>,
    index_of: BTreeMap<BusId, BusIdx>,
    line_of: BTreeMap<(BusId, BusId), LineIdx>,
    /// adjacency[b] = (neighbor bus idx, line idx), sorted by neighbor id
    adjacency: Vec<Vec<(BusIdx, LineIdx)>>,
    reference: BusIdx,
}

impl<T: Scalar> PowerNetwork<T> {
    /// Builds a validated network. Parallel lines must already be merged;
    /// duplicates are rejected here.
    pub fn new(mut buses: Vec<Bus>, mut lines: Vec<Line<T>>) -> Result<Self> {
        if buses.len() < 2 {
            return Err(Error::InvalidCase("a network needs at least 2 buses".into()));
        }
        buses.sort_by_key(|b| b.id);
        let mut index_of = BTreeMap::new();
        for (i, b) in buses.iter().enumerate() {
            if index_of.insert(b.id, i).is_some() {
                return Err(Error::InvalidCase(format!("duplicate bus id {}", b.id)));
            }
        }
        let refs: Vec<_> = buses.iter().filter(|b| b.is_reference).collect();
        if refs.len() != 1 {
            return Err(Error::InvalidCase(format!(
                "exactly one reference bus required, found {}",
                refs.len()
            )));
        }
        let reference = index_of[&refs[0].id];

        for line in lines.iter_mut() {
            if line.from == line.to {
                return Err(Error::InvalidCase(format!(
                    "line ({},{}) joins a bus to itself",
                    line.from, line.to
                )));
            }
            if line.from > line.to {
                std::mem::swap(&mut line.from, &mut line.to);
            }
            if !(line.reactance > T::zero()) {
                return Err(Error::BadReactance(line.from, line.to));
            }
        }
        lines.sort_by_key(|l| (l.from, l.to));
        let mut line_of = BTreeMap::new();
        for (i, l) in lines.iter().enumerate() {
            for id in [l.from, l.to] {
                if !index_of.contains_key(&id) {
                    return Err(Error::UnknownBus(id));
                }
            }
            if line_of.insert((l.from, l.to), i).is_some() {
                return Err(Error::InvalidCase(format!(
                    "duplicate line ({},{})",
                    l.from, l.to
                )));
            }
        }

        let mut adjacency = vec![Vec::new(); buses.len()];
        for (li, l) in lines.iter().enumerate() {
            let (a, b) = (index_of[&l.from], index_of[&l.to]);
            adjacency[a].push((b, li));
            adjacency[b].push((a, li));
        }
        for adj in adjacency.iter_mut() {
            adj.sort();
        }

        let net = Self {
            buses,
            lines,
            index_of,
            line_of,
            adjacency,
            reference,
        };
        let unreachable = net.unreachable_from_reference();
        if !unreachable.is_empty() {
            return Err(Error::Disconnected(unreachable));
        }
        Ok(net)
    }

    fn unreachable_from_reference(&self) -> Vec<BusId> {
        let mut seen = vec![false; self.buses.len()];
        let mut stack = vec![self.reference];
        seen[self.reference] = true;
        while let Some(u) = stack.pop() {
            for &(v, _) in &self.adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        self.buses
            .iter()
            .enumerate()
            .filter(|(i, _)| !seen[*i])
            .map(|(_, b)| b.id)
            .collect()
    }

    pub fn buses(&self) -> &[Bus] {
        &self.buses
    }

    pub fn lines(&self) -> &[Line<T>] {
        &self.lines
    }

    /// Number of state variables n = |buses| - 1.
    pub fn n(&self) -> usize {
        self.buses.len() - 1
    }

    pub fn reference_id(&self) -> BusId {
        self.buses[self.reference].id
    }

    pub fn reference_idx(&self) -> BusIdx {
        self.reference
    }

    pub fn bus_idx(&self, id: BusId) -> Result<BusIdx> {
        self.index_of.get(&id).copied().ok_or(Error::UnknownBus(id))
    }

    pub fn bus_id(&self, idx: BusIdx) -> BusId {
        self.buses[idx].id
    }

    pub fn line_idx(&self, a: BusId, b: BusId) -> Result<LineIdx> {
        let key = if a <= b { (a, b) } else { (b, a) };
        self.line_of
            .get(&key)
            .copied()
            .ok_or(Error::UnknownLine(a, b))
    }

    pub fn line(&self, idx: LineIdx) -> &Line<T> {
        &self.lines[idx]
    }

    /// Neighbors of a bus as (bus idx, line idx), ascending by neighbor id.
    pub fn adjacent(&self, idx: BusIdx) -> &[(BusIdx, LineIdx)] {
        &self.adjacency[idx]
    }

    /// Non-reference buses in ascending id order; column order of the Jacobian.
    pub fn state_buses(&self) -> Vec<BusId> {
        self.buses
            .iter()
            .filter(|b| !b.is_reference)
            .map(|b| b.id)
            .collect()
    }

    /// Column index of a non-reference bus in the Jacobian, if any.
    pub fn state_col(&self, id: BusId) -> Option<usize> {
        if id == self.reference_id() {
            return None;
        }
        let idx = *self.index_of.get(&id)?;
        // columns follow bus order with the reference column dropped
        Some(if idx < self.reference { idx } else { idx - 1 })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MeterKind {
    /// Measures active power flow on one line.
    Flow { from: BusId, to: BusId },
    /// Measures net active power injection at one bus.
    Injection { bus: BusId },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Meter<T> {
    pub id: String,
    pub kind: MeterKind,
    pub cost: T,
    pub secured: bool,
}

/// The meter population M in canonical (file) order.
#[derive(Debug, Clone, PartialEq)]
pub struct MeterSet<T> {
    meters: Vec<Meter<T>>,
    index_of: BTreeMap<String, usize>,
}

impl<T: Scalar> MeterSet<T> {
    pub fn new(network: &PowerNetwork<T>, meters: Vec<Meter<T>>) -> Result<Self> {
        let mut index_of = BTreeMap::new();
        for (i, m) in meters.iter().enumerate() {
            if !(m.cost >= T::zero()) {
                return Err(Error::InvalidCase(format!(
                    "meter {:?} has negative cost",
                    m.id
                )));
            }
            match &m.kind {
                MeterKind::Flow { from, to } => {
                    network.line_idx(*from, *to)?;
                }
                MeterKind::Injection { bus } => {
                    network.bus_idx(*bus)?;
                }
            }
            if index_of.insert(m.id.clone(), i).is_some() {
                return Err(Error::InvalidCase(format!("duplicate meter id {:?}", m.id)));
            }
        }
        Ok(Self { meters, index_of })
    }

    pub fn meters(&self) -> &[Meter<T>] {
        &self.meters
    }

    pub fn len(&self) -> usize {
        self.meters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.meters.is_empty()
    }

    pub fn get(&self, id: &str) -> Result<&Meter<T>> {
        self.index_of
            .get(id)
            .map(|&i| &self.meters[i])
            .ok_or_else(|| Error::UnknownMeter(id.to_string()))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index_of.contains_key(id)
    }

    /// Restriction to the given ids, preserving canonical order.
    pub fn subset<S: AsRef<str>>(&self, ids: &[S]) -> Result<Self> {
        let mut want = BTreeSet::new();
        for id in ids {
            if !self.index_of.contains_key(id.as_ref()) {
                return Err(Error::UnknownMeter(id.as_ref().to_string()));
            }
            want.insert(id.as_ref().to_string());
        }
        let meters: Vec<_> = self
            .meters
            .iter()
            .filter(|m| want.contains(&m.id))
            .cloned()
            .collect();
        let index_of = meters
            .iter()
            .enumerate()
            .map(|(i, m)| (m.id.clone(), i))
            .collect();
        Ok(Self { meters, index_of })
    }

    pub fn ids(&self) -> Vec<String> {
        self.meters.iter().map(|m| m.id.clone()).collect()
    }
}

/// Buses and lines covered by a single meter under the measurement rules:
/// a flow meter covers its line and both endpoints; an injection meter covers
/// its bus, all incident lines, and every neighbor bus.
pub fn meter_coverage<T: Scalar>(
    network: &PowerNetwork<T>,
    meter: &Meter<T>,
) -> Result<(BTreeSet<BusId>, BTreeSet<(BusId, BusId)>)> {
    let mut vs = BTreeSet::new();
    let mut es = BTreeSet::new();
    match &meter.kind {
        MeterKind::Flow { from, to } => {
            let li = network.line_idx(*from, *to)?;
            let l = network.line(li);
            vs.insert(l.from);
            vs.insert(l.to);
            es.insert(l.pair());
        }
        MeterKind::Injection { bus } => {
            let bi = network.bus_idx(*bus)?;
            vs.insert(*bus);
            for &(nb, li) in network.adjacent(bi) {
                vs.insert(network.bus_id(nb));
                es.insert(network.line(li).pair());
            }
        }
    }
    Ok((vs, es))
}

/// The subgraph G(M̄) = (V̄, Ē) measured by a meter subset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeasuredSubgraph {
    pub vertices: BTreeSet<BusId>,
    pub edges: BTreeSet<(BusId, BusId)>,
    pub generating_meters: Vec<String>,
}

/// Closure of a meter id set under the measurement rules.
pub fn measured_subgraph<T: Scalar, S: AsRef<str>>(
    network: &PowerNetwork<T>,
    meters: &MeterSet<T>,
    ids: &[S],
) -> Result<MeasuredSubgraph> {
    let mut vertices = BTreeSet::new();
    let mut edges = BTreeSet::new();
    let mut generating = Vec::new();
    for m in meters.meters() {
        if !ids.iter().any(|i| i.as_ref() == m.id) {
            continue;
        }
        generating.push(m.id.clone());
    }
    // unknown ids are an error even though the loop above ignores them
    for id in ids {
        meters.get(id.as_ref())?;
    }
    for id in &generating {
        let (vs, es) = meter_coverage(network, meters.get(id)?)?;
        vertices.extend(vs);
        edges.extend(es);
    }
    Ok(MeasuredSubgraph {
        vertices,
        edges,
        generating_meters: generating,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bus(id: BusId, r: bool) -> Bus {
        Bus {
            id,
            is_reference: r,
        }
    }

    fn line(from: BusId, to: BusId, x: f64) -> Line<f64> {
        Line {
            from,
            to,
            reactance: x,
        }
    }

    fn path3() -> PowerNetwork<f64> {
        PowerNetwork::new(
            vec![bus(1, true), bus(2, false), bus(3, false)],
            vec![line(1, 2, 1.0), line(2, 3, 1.0)],
        )
        .unwrap()
    }

    #[test]
    fn rejects_zero_reactance() {
        let err = PowerNetwork::new(
            vec![bus(1, true), bus(2, false)],
            vec![line(1, 2, 0.0)],
        )
        .unwrap_err();
        assert!(matches!(err, Error::BadReactance(1, 2)));
    }

    #[test]
    fn rejects_disconnected() {
        let err = PowerNetwork::new(
            vec![bus(1, true), bus(2, false), bus(3, false)],
            vec![line(1, 2, 0.5)],
        )
        .unwrap_err();
        assert!(matches!(err, Error::Disconnected(ref v) if v == &vec![3]));
    }

    #[test]
    fn rejects_double_reference() {
        let err = PowerNetwork::new(
            vec![bus(1, true), bus(2, true)],
            vec![line(1, 2, 0.5)],
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidCase(_)));
    }

    #[test]
    fn state_columns_skip_reference() {
        let net = PowerNetwork::new(
            vec![bus(5, false), bus(2, true), bus(9, false)],
            vec![line(2, 5, 1.0), line(5, 9, 1.0)],
        )
        .unwrap();
        assert_eq!(net.state_buses(), vec![5, 9]);
        assert_eq!(net.state_col(5), Some(0));
        assert_eq!(net.state_col(9), Some(1));
        assert_eq!(net.state_col(2), None);
    }

    #[test]
    fn coverage_rules() {
        let net = path3();
        let flow = Meter {
            id: "f".into(),
            kind: MeterKind::Flow { from: 2, to: 1 },
            cost: 1.0,
            secured: false,
        };
        let (vs, es) = meter_coverage(&net, &flow).unwrap();
        assert_eq!(vs.into_iter().collect::<Vec<_>>(), vec![1, 2]);
        assert_eq!(es.into_iter().collect::<Vec<_>>(), vec![(1, 2)]);

        let inj = Meter {
            id: "i".into(),
            kind: MeterKind::Injection { bus: 2 },
            cost: 1.0,
            secured: false,
        };
        let (vs, es) = meter_coverage(&net, &inj).unwrap();
        assert_eq!(vs.into_iter().collect::<Vec<_>>(), vec![1, 2, 3]);
        assert_eq!(es.into_iter().collect::<Vec<_>>(), vec![(1, 2), (2, 3)]);
    }

    #[test]
    fn empty_meter_set_gives_empty_subgraph() {
        let net = path3();
        let ms = MeterSet::new(&net, vec![]).unwrap();
        let sg = measured_subgraph(&net, &ms, &Vec::<String>::new()).unwrap();
        assert!(sg.vertices.is_empty());
        assert!(sg.edges.is_empty());
    }

    #[test]
    fn unknown_meter_id_errors() {
        let net = path3();
        let ms = MeterSet::new(&net, vec![]).unwrap();
        assert!(matches!(
            measured_subgraph(&net, &ms, &["nope"]),
            Err(Error::UnknownMeter(_))
        ));
    }
}

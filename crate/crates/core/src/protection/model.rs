//! Single-commodity Steiner arborescence model for exact protection
//! planning.
//!
//! Each measured line becomes two opposite arcs (none into the root). One
//! unit of demand sits on every vertex that joins the arborescence, so used
//! arcs must route real flow from the reference bus; an arc may carry flow
//! only when used, every used arc is assigned a distinct meter that measures
//! its line, and selecting an injection meter pulls every vertex it measures
//! into the arborescence (its pseudo demand). The objective charges the cost
//! of the assigned meters.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::model::{meter_coverage, BusId, MeterKind, MeterSet, PowerNetwork};
use crate::observability::Emst;
use crate::scalar::Scalar;
use crate::simplex::{LinearProgram, RowKind, Tableau};

#[derive(Debug, Clone, Copy)]
pub struct Arc {
    pub edge: usize,
    pub tail: BusId,
    pub head: BusId,
}

pub struct ArborescenceModel<T> {
    /// Usable measured lines, canonical order.
    pub edges: Vec<(BusId, BusId)>,
    /// Two arcs per edge except that arcs into the root are dropped.
    pub arcs: Vec<Arc>,
    /// (edge, meter index into the original meter set) assignment pairs.
    pub pairs: Vec<(usize, usize)>,
    /// Vertices that can join the arborescence.
    pub reachable: BTreeSet<BusId>,
    pub targets: Vec<BusId>,
    pub lp: LinearProgram<T>,
    pub tableau: Tableau<T>,
    /// Variable offsets: x (arc use) at 0, then f, then y, then w.
    pub n_arcs: usize,
    f_base: usize,
    y_base: usize,
    w_of: BTreeMap<BusId, usize>,
}

impl<T: Scalar> ArborescenceModel<T> {
    pub fn build(
        network: &PowerNetwork<T>,
        meters: &MeterSet<T>,
        targets: &[BusId],
    ) -> Result<Self> {
        let root = network.reference_id();
        let coverage: Vec<(BTreeSet<BusId>, BTreeSet<(BusId, BusId)>)> = meters
            .meters()
            .iter()
            .map(|m| meter_coverage(network, m))
            .collect::<Result<_>>()?;

        // fixed point: a meter is usable when everything it measures stays
        // reachable; an edge is usable when a usable meter measures it
        let mut reachable: BTreeSet<BusId> = network.buses().iter().map(|b| b.id).collect();
        let (usable_meters, usable_edges) = loop {
            let usable_meters: Vec<usize> = (0..meters.len())
                .filter(|&p| coverage[p].0.iter().all(|v| reachable.contains(v)))
                .collect();
            let mut usable_edges: BTreeSet<(BusId, BusId)> = BTreeSet::new();
            for &p in &usable_meters {
                usable_edges.extend(coverage[p].1.iter().copied());
            }
            let mut now = BTreeSet::new();
            now.insert(root);
            let mut stack = vec![root];
            while let Some(u) = stack.pop() {
                let ui = network.bus_idx(u)?;
                for &(vi, li) in network.adjacent(ui) {
                    let v = network.bus_id(vi);
                    if !now.contains(&v) && usable_edges.contains(&network.line(li).pair()) {
                        now.insert(v);
                        stack.push(v);
                    }
                }
            }
            if now == reachable {
                break (usable_meters, usable_edges);
            }
            reachable = now;
        };
        let missing: Vec<BusId> = targets
            .iter()
            .copied()
            .filter(|t| !reachable.contains(t))
            .collect();
        if !missing.is_empty() {
            return Err(Error::TargetsUnreachable {
                unreachable: missing,
            });
        }

        let edges: Vec<(BusId, BusId)> = usable_edges.into_iter().collect();
        let mut arcs = Vec::new();
        for (e, &(a, b)) in edges.iter().enumerate() {
            if b != root {
                arcs.push(Arc { edge: e, tail: a, head: b });
            }
            if a != root {
                arcs.push(Arc { edge: e, tail: b, head: a });
            }
        }
        let mut pairs = Vec::new();
        for (e, &(a, b)) in edges.iter().enumerate() {
            for &p in &usable_meters {
                let measures = match &meters.meters()[p].kind {
                    MeterKind::Flow { from, to } => {
                        let key = if from <= to { (*from, *to) } else { (*to, *from) };
                        key == (a, b)
                    }
                    MeterKind::Injection { bus } => *bus == a || *bus == b,
                };
                if measures {
                    pairs.push((e, p));
                }
            }
        }

        let target_set: BTreeSet<BusId> = targets.iter().copied().collect();
        let free_vertices: Vec<BusId> = reachable
            .iter()
            .copied()
            .filter(|v| *v != root && !target_set.contains(v))
            .collect();

        let n_arcs = arcs.len();
        let f_base = n_arcs;
        let y_base = 2 * n_arcs;
        let w_base = y_base + pairs.len();
        let ncols = w_base + free_vertices.len();
        let w_of: BTreeMap<BusId, usize> = free_vertices
            .iter()
            .enumerate()
            .map(|(i, &v)| (v, w_base + i))
            .collect();

        let mut lp = LinearProgram::<T>::new(ncols);
        for a in 0..n_arcs {
            lp.upper[a] = T::one(); // x binary relaxed
        }
        for (k, &(_, p)) in pairs.iter().enumerate() {
            lp.upper[y_base + k] = T::one();
            lp.objective[y_base + k] = meters.meters()[p].cost;
        }
        for (_, &w) in &w_of {
            lp.upper[w] = T::one();
        }
        // f upper bounds are implied by the capacity rows
        let big_m = T::from_f64_lossy((reachable.len() - 1) as f64);

        // conservation and in-degree per reachable non-root vertex
        for &v in reachable.iter() {
            if v == root {
                continue;
            }
            let mut flow = Vec::new();
            let mut indeg = Vec::new();
            for (a, arc) in arcs.iter().enumerate() {
                if arc.head == v {
                    flow.push((f_base + a, T::one()));
                    indeg.push((a, T::one()));
                }
                if arc.tail == v {
                    flow.push((f_base + a, -T::one()));
                }
            }
            if target_set.contains(&v) {
                lp.add_row(flow, RowKind::Eq, T::one());
                lp.add_row(indeg, RowKind::Eq, T::one());
            } else {
                let w = w_of[&v];
                let mut flow = flow;
                flow.push((w, -T::one()));
                lp.add_row(flow, RowKind::Eq, T::zero());
                let mut indeg = indeg;
                indeg.push((w, -T::one()));
                lp.add_row(indeg, RowKind::Eq, T::zero());
            }
        }
        // per arc: flow only on used arcs, used arcs carry at least one unit,
        // tails must belong to the arborescence
        for (a, arc) in arcs.iter().enumerate() {
            lp.add_row(
                vec![(f_base + a, T::one()), (a, -big_m)],
                RowKind::Le,
                T::zero(),
            );
            lp.add_row(
                vec![(a, T::one()), (f_base + a, -T::one())],
                RowKind::Le,
                T::zero(),
            );
            if arc.tail != root && !target_set.contains(&arc.tail) {
                lp.add_row(
                    vec![(a, T::one()), (w_of[&arc.tail], -T::one())],
                    RowKind::Le,
                    T::zero(),
                );
            }
        }
        // assignment: a used edge takes exactly one meter
        for (e, _) in edges.iter().enumerate() {
            let mut row: Vec<(usize, T)> = pairs
                .iter()
                .enumerate()
                .filter(|(_, &(pe, _))| pe == e)
                .map(|(k, _)| (y_base + k, T::one()))
                .collect();
            for (a, arc) in arcs.iter().enumerate() {
                if arc.edge == e {
                    row.push((a, -T::one()));
                }
            }
            lp.add_row(row, RowKind::Eq, T::zero());
        }
        // injectivity: a meter takes at most one edge
        for &p in &usable_meters {
            let row: Vec<(usize, T)> = pairs
                .iter()
                .enumerate()
                .filter(|(_, &(_, pp))| pp == p)
                .map(|(k, _)| (y_base + k, T::one()))
                .collect();
            if row.len() > 1 {
                lp.add_row(row, RowKind::Le, T::one());
            }
        }
        // pseudo demand: selecting an injection meter pulls every vertex it
        // measures into the arborescence
        for &p in &usable_meters {
            if !matches!(meters.meters()[p].kind, MeterKind::Injection { .. }) {
                continue;
            }
            let uses: Vec<(usize, T)> = pairs
                .iter()
                .enumerate()
                .filter(|(_, &(_, pp))| pp == p)
                .map(|(k, _)| (y_base + k, T::one()))
                .collect();
            if uses.is_empty() {
                continue;
            }
            for q in &coverage[p].0 {
                if *q == root || target_set.contains(q) {
                    continue;
                }
                let mut row = uses.clone();
                row.push((w_of[q], -T::one()));
                lp.add_row(row, RowKind::Le, T::zero());
            }
        }

        let tableau = Tableau::build(&lp);
        Ok(Self {
            edges,
            arcs,
            pairs,
            reachable,
            targets: targets.to_vec(),
            lp,
            tableau,
            n_arcs,
            f_base,
            y_base,
            w_of,
        })
    }

    /// Most fractional arc-use variable, if any (closest to one half wins,
    /// lowest arc index on ties).
    pub fn fractional_arc(&self, x: &[T], tol: T) -> Option<usize> {
        let half = T::from_f64_lossy(0.5);
        let mut best: Option<(usize, T)> = None;
        for a in 0..self.n_arcs {
            let frac = x[a].min(T::one() - x[a]);
            if frac <= tol {
                continue;
            }
            let dist = (x[a] - half).abs();
            if best.map_or(true, |(_, d)| dist < d) {
                best = Some((a, dist));
            }
        }
        best.map(|(a, _)| a)
    }

    /// Rebuilds the plan pieces from an integral arc-use vector: the tree,
    /// its vertex set, and a minimum-cost injective meter assignment.
    pub fn decode(
        &self,
        network: &PowerNetwork<T>,
        meters: &MeterSet<T>,
        x: &[T],
    ) -> Result<(Emst, Vec<String>, T)> {
        let half = T::from_f64_lossy(0.5);
        let used_edges: Vec<usize> = {
            let mut seen = BTreeSet::new();
            for (a, arc) in self.arcs.iter().enumerate() {
                if x[a] > half {
                    seen.insert(arc.edge);
                }
            }
            seen.into_iter().collect()
        };
        let mut vertices: BTreeSet<BusId> = BTreeSet::new();
        vertices.insert(network.reference_id());
        for &e in &used_edges {
            vertices.insert(self.edges[e].0);
            vertices.insert(self.edges[e].1);
        }
        // meter candidates per used edge: injection meters only when their
        // whole measured set joined the tree
        let candidates: Vec<Vec<(usize, T)>> = used_edges
            .iter()
            .map(|&e| {
                self.pairs
                    .iter()
                    .filter(|&&(pe, _)| pe == e)
                    .filter(|&&(_, p)| {
                        let m = &meters.meters()[p];
                        match &m.kind {
                            MeterKind::Flow { .. } => true,
                            MeterKind::Injection { .. } => {
                                let (vs, _) = meter_coverage(network, m).expect("valid meter");
                                vs.iter().all(|v| vertices.contains(v))
                            }
                        }
                    })
                    .map(|&(_, p)| (p, meters.meters()[p].cost))
                    .collect()
            })
            .collect();
        let Some((assignment, cost)) = min_cost_matching(&candidates, meters.len()) else {
            return Err(Error::Internal(
                "integral arborescence admits no meter assignment".into(),
            ));
        };
        let mut mapping = BTreeMap::new();
        let mut chosen = BTreeSet::new();
        for (i, &e) in used_edges.iter().enumerate() {
            let p = assignment[i];
            mapping.insert(meters.meters()[p].id.clone(), self.edges[e]);
            chosen.insert(meters.meters()[p].id.clone());
        }
        let emst = Emst {
            vertices,
            edges: used_edges.iter().map(|&e| self.edges[e]).collect(),
            mapping,
        };
        let meter_ids: Vec<String> = meters
            .ids()
            .into_iter()
            .filter(|id| chosen.contains(id))
            .collect();
        Ok((emst, meter_ids, cost))
    }
}

/// Minimum-cost perfect matching of every left node to a distinct right
/// node, by successive shortest augmenting paths (Bellman-Ford residuals).
/// Returns the right node per left, or None when no perfect matching exists.
pub(crate) fn min_cost_matching<T: Scalar>(
    candidates: &[Vec<(usize, T)>],
    n_right: usize,
) -> Option<(Vec<usize>, T)> {
    let n_left = candidates.len();
    let mut match_l: Vec<Option<usize>> = vec![None; n_left];
    let mut match_r: Vec<Option<usize>> = vec![None; n_right];
    let mut total = T::zero();
    for start in 0..n_left {
        // shortest alternating path from `start` to any free right node
        let inf = T::infinity();
        let mut dist_l = vec![inf; n_left];
        let mut dist_r = vec![inf; n_right];
        let mut pred_r: Vec<Option<usize>> = vec![None; n_right]; // left that reached r
        dist_l[start] = T::zero();
        loop {
            let mut changed = false;
            for l in 0..n_left {
                if !dist_l[l].is_finite() {
                    continue;
                }
                for &(r, c) in &candidates[l] {
                    if match_l[l] == Some(r) {
                        continue;
                    }
                    let nd = dist_l[l] + c;
                    if nd < dist_r[r] - sc_tie::<T>() {
                        dist_r[r] = nd;
                        pred_r[r] = Some(l);
                        changed = true;
                    }
                }
            }
            for r in 0..n_right {
                if !dist_r[r].is_finite() {
                    continue;
                }
                if let Some(l) = match_r[r] {
                    let back = dist_r[r] - candidates[l]
                        .iter()
                        .find(|&&(rr, _)| rr == r)
                        .map(|&(_, c)| c)
                        .unwrap_or(T::zero());
                    if back < dist_l[l] - sc_tie::<T>() {
                        dist_l[l] = back;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        // cheapest free right node reached
        let mut end: Option<usize> = None;
        for r in 0..n_right {
            if match_r[r].is_none() && dist_r[r].is_finite() {
                if end.map_or(true, |e| dist_r[r] < dist_r[e]) {
                    end = Some(r);
                }
            }
        }
        let mut r = end?;
        total = total + dist_r[r];
        // walk back flipping matched edges
        loop {
            let l = pred_r[r].expect("augmenting path is connected");
            let prev = match_l[l];
            match_l[l] = Some(r);
            match_r[r] = Some(l);
            match prev {
                None if l == start => break,
                None => break,
                Some(pr) => {
                    match_r[pr] = None;
                    r = pr;
                }
            }
        }
    }
    let assignment: Vec<usize> = match_l.into_iter().map(|m| m.expect("perfect")).collect();
    Some((assignment, total))
}

fn sc_tie<T: Scalar>() -> T {
    T::from_f64_lossy(1e-12)
}

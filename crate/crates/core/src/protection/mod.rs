//! Minimum-cost meter protection planning.
//!
//! Protecting an observable subnetwork that contains the defended buses
//! makes every undetectable injection against them impossible. The exact
//! planner solves the Steiner arborescence model by branch-and-bound; the
//! tree pruning heuristic (TPH) trims an EMST of the full measured graph in
//! polynomial time. Both emit a witness EMST and a meter set whose algebraic
//! soundness `verify_protection` re-checks from the nullspace of H.

mod model;
mod solver;

pub use model::ArborescenceModel;
pub use solver::{BnbOptions, SolverStats};

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::jacobian::JacobianMatrix;
use crate::linalg::{nullspace, Mat};
use crate::model::{measured_subgraph, meter_coverage, BusId, MeterSet, PowerNetwork};
use crate::observability::{construct_emst, find_basic_set, is_observable, Emst};
use crate::scalar::{sc, Scalar};

/// Nonempty set of state buses to defend; never includes the reference.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtectionTarget {
    pub buses: Vec<BusId>,
}

impl ProtectionTarget {
    pub fn new<T: Scalar>(network: &PowerNetwork<T>, buses: Vec<BusId>) -> Result<Self> {
        if buses.is_empty() {
            return Err(Error::InvalidCase("protection target set is empty".into()));
        }
        let mut seen = BTreeSet::new();
        for &b in &buses {
            network.bus_idx(b)?;
            if b == network.reference_id() {
                return Err(Error::InvalidCase(
                    "the reference bus needs no protection target".into(),
                ));
            }
            seen.insert(b);
        }
        Ok(Self {
            buses: seen.into_iter().collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtectionPlan<T> {
    /// Meter ids to secure, canonical order.
    pub meters: Vec<String>,
    pub cost: T,
    pub witness: Emst,
    /// True when the solver proved optimality (exact mode, no timeout).
    pub optimal: bool,
}

/// Exact minimum-cost plan via branch-and-bound on the arborescence model.
/// A TPH plan, when one exists, seeds the incumbent.
pub fn protect_exact<T: Scalar>(
    network: &PowerNetwork<T>,
    meters: &MeterSet<T>,
    target: &ProtectionTarget,
    options: &BnbOptions,
) -> Result<ProtectionPlan<T>> {
    solve_exact(network, meters, target, options).map(|(plan, _)| plan)
}

/// Exact plan plus solver statistics.
pub fn solve_exact<T: Scalar>(
    network: &PowerNetwork<T>,
    meters: &MeterSet<T>,
    target: &ProtectionTarget,
    options: &BnbOptions,
) -> Result<(ProtectionPlan<T>, SolverStats)> {
    let model = ArborescenceModel::build(network, meters, &target.buses)?;
    let warm = protect_tph(network, meters, target)
        .ok()
        .map(|plan| solver::Incumbent {
            cost: plan.cost,
            witness: plan.witness,
            meter_ids: plan.meters,
        });
    let (incumbent, optimal, stats) =
        solver::branch_and_bound(network, meters, &model, warm, options)?;
    Ok((
        ProtectionPlan {
            meters: incumbent.meter_ids,
            cost: incumbent.cost,
            witness: incumbent.witness,
            optimal,
        },
        stats,
    ))
}

/// One pruning round: the vertices removed and the surviving vertex set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PruneRound {
    pub pruned: Vec<BusId>,
    pub residual: BTreeSet<BusId>,
}

/// Tree pruning heuristic: polynomial-time suboptimal plan.
pub fn protect_tph<T: Scalar>(
    network: &PowerNetwork<T>,
    meters: &MeterSet<T>,
    target: &ProtectionTarget,
) -> Result<ProtectionPlan<T>> {
    tph_with_trace(network, meters, target).map(|(plan, _)| plan)
}

/// TPH with the per-round pruning trace.
pub fn tph_with_trace<T: Scalar>(
    network: &PowerNetwork<T>,
    meters: &MeterSet<T>,
    target: &ProtectionTarget,
) -> Result<(ProtectionPlan<T>, Vec<PruneRound>)> {
    let all_ids = meters.ids();
    let subgraph = measured_subgraph(network, meters, &all_ids)?;
    let missing: Vec<BusId> = target
        .buses
        .iter()
        .copied()
        .filter(|b| !subgraph.vertices.contains(b))
        .collect();
    if !missing.is_empty() {
        return Err(Error::TargetsUnreachable {
            unreachable: missing,
        });
    }
    let coverage: BTreeMap<String, BTreeSet<BusId>> = meters
        .meters()
        .iter()
        .map(|m| Ok((m.id.clone(), meter_coverage(network, m)?.0)))
        .collect::<Result<_>>()?;
    let terminals: BTreeSet<BusId> = target
        .buses
        .iter()
        .copied()
        .chain([network.reference_id()])
        .collect();

    let mut residual: BTreeSet<BusId> = subgraph.vertices.clone();
    let mut retained: Vec<String> = all_ids;
    let mut trace = Vec::new();
    let mut emst;
    loop {
        let retained_set = meters.subset(&retained)?;
        let basic = find_basic_set(network, &retained_set)?;
        let sub = measured_subgraph(network, &retained_set, &retained)?;
        emst = construct_emst(network, &sub, &retained_set, &basic)?;

        let pruned = prune_pass(
            network,
            meters,
            &coverage,
            &terminals,
            &emst,
            &mut residual,
            &mut retained,
        )?;
        if pruned.is_empty() {
            break;
        }
        trace.push(PruneRound {
            pruned,
            residual: residual.clone(),
        });
    }
    let plan_meters: Vec<String> = meters
        .ids()
        .into_iter()
        .filter(|id| emst.mapping.contains_key(id))
        .collect();
    let cost = plan_meters
        .iter()
        .map(|id| meters.get(id).map(|m| m.cost))
        .sum::<Result<T>>()?;
    Ok((
        ProtectionPlan {
            meters: plan_meters,
            cost,
            witness: emst,
            optimal: false,
        },
        trace,
    ))
}

/// Depth-first pass over the rooted witness tree. A whole subtree is pruned
/// when it holds no terminal and the residual vertex set stays observable
/// with the meters that still measure only residual vertices; failing that,
/// the children are tried, so multi-vertex prunes come before single leaves.
fn prune_pass<T: Scalar>(
    network: &PowerNetwork<T>,
    meters: &MeterSet<T>,
    coverage: &BTreeMap<String, BTreeSet<BusId>>,
    terminals: &BTreeSet<BusId>,
    emst: &Emst,
    residual: &mut BTreeSet<BusId>,
    retained: &mut Vec<String>,
) -> Result<Vec<BusId>> {
    let root = network.reference_id();
    let mut children: BTreeMap<BusId, Vec<BusId>> = BTreeMap::new();
    let mut order = vec![root];
    let mut seen: BTreeSet<BusId> = [root].into_iter().collect();
    let adjacency: BTreeMap<BusId, Vec<BusId>> = {
        let mut adj: BTreeMap<BusId, Vec<BusId>> = BTreeMap::new();
        for &(a, b) in &emst.edges {
            adj.entry(a).or_default().push(b);
            adj.entry(b).or_default().push(a);
        }
        adj
    };
    let mut qi = 0;
    while qi < order.len() {
        let u = order[qi];
        qi += 1;
        if let Some(next) = adjacency.get(&u) {
            let mut kids: Vec<BusId> = next.iter().copied().filter(|v| seen.insert(*v)).collect();
            kids.sort_unstable();
            for &k in &kids {
                order.push(k);
            }
            children.insert(u, kids);
        }
    }

    let mut pruned = Vec::new();
    let top = children.get(&root).cloned().unwrap_or_default();
    for v in top {
        visit(
            network, meters, coverage, terminals, &children, v, residual, retained, &mut pruned,
        )?;
    }
    Ok(pruned)
}

#[allow(clippy::too_many_arguments)]
fn visit<T: Scalar>(
    network: &PowerNetwork<T>,
    meters: &MeterSet<T>,
    coverage: &BTreeMap<String, BTreeSet<BusId>>,
    terminals: &BTreeSet<BusId>,
    children: &BTreeMap<BusId, Vec<BusId>>,
    v: BusId,
    residual: &mut BTreeSet<BusId>,
    retained: &mut Vec<String>,
    pruned: &mut Vec<BusId>,
) -> Result<()> {
    let mut subtree = BTreeSet::new();
    collect_subtree(children, v, &mut subtree);
    let has_terminal = subtree.iter().any(|b| terminals.contains(b));
    if !has_terminal && try_prune(network, meters, coverage, &subtree, residual, retained)? {
        pruned.extend(subtree.iter().copied());
        return Ok(());
    }
    for &c in children.get(&v).map(Vec::as_slice).unwrap_or(&[]) {
        visit(
            network, meters, coverage, terminals, children, c, residual, retained, pruned,
        )?;
    }
    Ok(())
}

fn collect_subtree(children: &BTreeMap<BusId, Vec<BusId>>, v: BusId, out: &mut BTreeSet<BusId>) {
    out.insert(v);
    for &c in children.get(&v).map(Vec::as_slice).unwrap_or(&[]) {
        collect_subtree(children, c, out);
    }
}

/// Commits the prune when the residual vertex set stays fully measured and
/// observable by the meters it retains.
fn try_prune<T: Scalar>(
    network: &PowerNetwork<T>,
    meters: &MeterSet<T>,
    coverage: &BTreeMap<String, BTreeSet<BusId>>,
    subtree: &BTreeSet<BusId>,
    residual: &mut BTreeSet<BusId>,
    retained: &mut Vec<String>,
) -> Result<bool> {
    let candidate: BTreeSet<BusId> = residual.difference(subtree).copied().collect();
    let keep: Vec<String> = retained
        .iter()
        .filter(|id| coverage[*id].is_subset(&candidate))
        .cloned()
        .collect();
    let mut measured: BTreeSet<BusId> = BTreeSet::new();
    for id in &keep {
        measured.extend(coverage[id].iter().copied());
    }
    if measured != candidate {
        return Ok(false);
    }
    let keep_set = meters.subset(&keep)?;
    if !is_observable(network, &keep_set, None)?.observable {
        return Ok(false);
    }
    *residual = candidate;
    *retained = keep;
    Ok(true)
}

/// Algebraic soundness: no vector in the nullspace of the protected rows can
/// bias any defended bus, i.e. no undetectable attack leaving the plan's
/// meters untouched reaches the targets.
pub fn verify_protection<T: Scalar>(
    network: &PowerNetwork<T>,
    meters: &MeterSet<T>,
    plan: &ProtectionPlan<T>,
    target: &ProtectionTarget,
) -> Result<bool> {
    let sub = meters.subset(&plan.meters)?;
    let h = JacobianMatrix::build(network, &sub)?;
    let basis = nullspace(&Mat::from_rows(&h.to_dense()));
    let tol = sc::<T>(1e-7);
    for vec in &basis {
        let scale = vec
            .iter()
            .fold(T::one(), |m, &v| if v.abs() > m { v.abs() } else { m });
        for &b in &target.buses {
            if let Some(col) = network.state_col(b) {
                if vec[col].abs() > tol * scale {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

//! Best-bound branch-and-bound over the arc-use binaries of the
//! arborescence model, with the LP relaxation as the node bound.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::model::{MeterSet, PowerNetwork};
use crate::observability::Emst;
use crate::scalar::{sc, Scalar};
use crate::simplex::{LpOutcome, Simplex};

use super::model::ArborescenceModel;

#[derive(Debug, Clone)]
pub struct BnbOptions {
    /// Wall-clock budget; on expiry the best incumbent is returned flagged
    /// non-optimal.
    pub timeout: Duration,
}

impl Default for BnbOptions {
    fn default() -> Self {
        Self {
            timeout: Duration::from_secs(60),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SolverStats {
    pub nodes: u64,
    pub lp_pivots: u64,
    pub incumbent_updates: u64,
    pub best_bound: f64,
    pub timed_out: bool,
}

pub(crate) struct Incumbent<T> {
    pub cost: T,
    pub witness: Emst,
    pub meter_ids: Vec<String>,
}

struct Node<T> {
    bound: T,
    seq: u64,
    lower: Vec<T>,
    upper: Vec<T>,
}

impl<T: Scalar> PartialEq for Node<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<T: Scalar> Eq for Node<T> {}
impl<T: Scalar> PartialOrd for Node<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T: Scalar> Ord for Node<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; reverse for best-bound-first, then oldest
        other
            .bound
            .partial_cmp(&self.bound)
            .unwrap_or(Ordering::Equal)
            .then(other.seq.cmp(&self.seq))
    }
}

pub(crate) fn branch_and_bound<T: Scalar>(
    network: &PowerNetwork<T>,
    meters: &MeterSet<T>,
    model: &ArborescenceModel<T>,
    warm_start: Option<Incumbent<T>>,
    options: &BnbOptions,
) -> Result<(Incumbent<T>, bool, SolverStats)> {
    let deadline = Instant::now() + options.timeout;
    let eps = sc::<T>(1e-6);
    let int_tol = sc::<T>(1e-6);

    let mut stats = SolverStats::default();
    let mut best: Option<Incumbent<T>> = warm_start;
    let mut heap: BinaryHeap<Box<Node<T>>> = BinaryHeap::new();
    let mut seq = 0u64;
    heap.push(Box::new(Node {
        bound: T::neg_infinity(),
        seq,
        lower: model.lp.lower.clone(),
        upper: model.lp.upper.clone(),
    }));
    let mut timed_out = false;

    while let Some(node) = heap.pop() {
        if let Some(b) = &best {
            if node.bound >= b.cost - eps {
                continue; // best-bound order: everything left is no better
            }
        }
        if Instant::now() >= deadline {
            timed_out = true;
            break;
        }
        stats.nodes += 1;
        let mut simplex = Simplex::from_tableau(&model.tableau, &node.lower, &node.upper);
        let mut outcome = simplex.solve();
        stats.lp_pivots += simplex.pivot_count() as u64;
        if outcome == LpOutcome::Stalled {
            // deterministic anti-cycling retry
            let mut retry = Simplex::from_tableau(&model.tableau, &node.lower, &node.upper);
            retry.set_force_bland(true);
            outcome = retry.solve();
            stats.lp_pivots += retry.pivot_count() as u64;
        }
        let (objective, x) = match outcome {
            LpOutcome::Optimal { objective, x } => (objective, x),
            LpOutcome::Infeasible => continue,
            LpOutcome::Unbounded | LpOutcome::Stalled => {
                return Err(Error::Internal("relaxation solve failed".into()))
            }
        };
        stats.best_bound = objective.to_f64_lossy().min(
            best.as_ref()
                .map_or(f64::INFINITY, |b| b.cost.to_f64_lossy()),
        );
        if let Some(b) = &best {
            if objective >= b.cost - eps {
                continue;
            }
        }
        match model.fractional_arc(&x, int_tol) {
            None => {
                let (witness, meter_ids, cost) = model.decode(network, meters, &x)?;
                if (cost - objective).abs() > sc::<T>(1e-4) {
                    return Err(Error::Internal(format!(
                        "decoded assignment cost {cost} deviates from relaxation objective {objective}"
                    )));
                }
                let replace = match &best {
                    None => true,
                    Some(b) => {
                        cost < b.cost - eps
                            || ((cost - b.cost).abs() <= eps && meter_ids < b.meter_ids)
                    }
                };
                if replace {
                    stats.incumbent_updates += 1;
                    log::debug!(
                        target: "gridseer::solver",
                        "{{\"event\":\"incumbent\",\"node\":{},\"cost\":{}}}",
                        stats.nodes,
                        cost.to_f64_lossy()
                    );
                    best = Some(Incumbent {
                        cost,
                        witness,
                        meter_ids,
                    });
                }
            }
            Some(arc) => {
                log::debug!(
                    target: "gridseer::solver",
                    "{{\"event\":\"branch\",\"node\":{},\"bound\":{},\"arc\":{}}}",
                    stats.nodes,
                    objective.to_f64_lossy(),
                    arc
                );
                for fix_one in [false, true] {
                    let mut lower = node.lower.clone();
                    let mut upper = node.upper.clone();
                    if fix_one {
                        lower[arc] = T::one();
                    } else {
                        upper[arc] = T::zero();
                    }
                    seq += 1;
                    heap.push(Box::new(Node {
                        bound: objective,
                        seq,
                        lower,
                        upper,
                    }));
                }
            }
        }
    }
    stats.timed_out = timed_out;
    match best {
        Some(incumbent) => {
            let optimal = !timed_out;
            if optimal {
                stats.best_bound = incumbent.cost.to_f64_lossy();
            }
            Ok((incumbent, optimal, stats))
        }
        None if timed_out => Err(Error::Timeout),
        None => Err(Error::NoPlan {
            targets: model.targets.clone(),
        }),
    }
}

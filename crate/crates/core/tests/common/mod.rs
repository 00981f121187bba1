//! Shared test support: independent oracles (exact rational elimination,
//! brute-force EMST search, exhaustive enumeration) and random instance
//! generators. Everything here recomputes measurement rules from first
//! principles so the oracles do not share code paths with the library.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gridseer::model::{BusId, Meter, MeterKind, MeterSet, PowerNetwork};
use gridseer::parse::{parse_case, CaseFormat};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

pub fn load_fixture(name: &str) -> (PowerNetwork<f64>, MeterSet<f64>) {
    let bytes = std::fs::read(fixture_path(name)).expect("fixture readable");
    parse_case::<f64>(&bytes, CaseFormat::NativeJson).expect("fixture parses")
}

pub fn rat(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

/// Exact Gaussian elimination rank over the rationals.
pub fn rat_rank(mut m: Vec<Vec<BigRational>>) -> usize {
    let rows = m.len();
    let cols = m.first().map_or(0, |r| r.len());
    let mut rank = 0;
    for col in 0..cols {
        if rank == rows {
            break;
        }
        let Some(p) = (rank..rows).find(|&r| !m[r][col].is_zero()) else {
            continue;
        };
        m.swap(rank, p);
        for r in 0..rows {
            if r != rank && !m[r][col].is_zero() {
                let f = &m[r][col] / &m[rank][col];
                for c in col..cols {
                    let v = &m[r][c] - &f * &m[rank][c];
                    m[r][c] = v;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Exact solve of a square rational system by Gauss-Jordan; panics when the
/// system is singular (callers only use it on full-rank systems).
pub fn rat_solve(mut a: Vec<Vec<BigRational>>, mut b: Vec<BigRational>) -> Vec<BigRational> {
    let n = a.len();
    for col in 0..n {
        let p = (col..n)
            .find(|&r| !a[r][col].is_zero())
            .expect("nonsingular");
        a.swap(col, p);
        b.swap(col, p);
        let inv = a[col][col].clone();
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = &a[r][col] / &inv;
                for c in 0..n {
                    let v = &a[r][c] - &f * &a[col][c];
                    a[r][c] = v;
                }
                let v = &b[r] - &f * &b[col];
                b[r] = v;
            }
        }
    }
    (0..n).map(|i| &b[i] / &a[i][i]).collect()
}

/// Independent DC Jacobian over exact rationals: flow rows are signed 1/x at
/// the endpoints (low-id positive), injection rows sum the flow rows out of
/// the metered bus. Columns are the non-reference buses ascending.
pub fn rational_jacobian(net: &PowerNetwork<f64>, meters: &MeterSet<f64>) -> Vec<Vec<BigRational>> {
    let cols: Vec<BusId> = net.state_buses();
    let col_of: BTreeMap<BusId, usize> = cols.iter().enumerate().map(|(i, &b)| (b, i)).collect();
    let mut out = Vec::new();
    for m in meters.meters() {
        let mut row = vec![BigRational::zero(); cols.len()];
        match &m.kind {
            MeterKind::Flow { from, to } => {
                let (a, b) = if from <= to { (*from, *to) } else { (*to, *from) };
                let li = net.line_idx(a, b).unwrap();
                let w = BigRational::from_integer(BigInt::from(1)) / rat(net.line(li).reactance);
                if let Some(&c) = col_of.get(&a) {
                    row[c] += w.clone();
                }
                if let Some(&c) = col_of.get(&b) {
                    row[c] -= w;
                }
            }
            MeterKind::Injection { bus } => {
                let bi = net.bus_idx(*bus).unwrap();
                for &(nb, li) in net.adjacent(bi) {
                    let w =
                        BigRational::from_integer(BigInt::from(1)) / rat(net.line(li).reactance);
                    if let Some(&c) = col_of.get(bus) {
                        row[c] += w.clone();
                    }
                    if let Some(&c) = col_of.get(&net.bus_id(nb)) {
                        row[c] -= w;
                    }
                }
            }
        }
        out.push(row);
    }
    out
}

/// Measured vertices and edges of one meter, recomputed from the rules.
pub fn oracle_coverage(
    net: &PowerNetwork<f64>,
    meter: &Meter<f64>,
) -> (BTreeSet<BusId>, BTreeSet<(BusId, BusId)>) {
    let mut vs = BTreeSet::new();
    let mut es = BTreeSet::new();
    match &meter.kind {
        MeterKind::Flow { from, to } => {
            let (a, b) = if from <= to { (*from, *to) } else { (*to, *from) };
            vs.insert(a);
            vs.insert(b);
            es.insert((a, b));
        }
        MeterKind::Injection { bus } => {
            vs.insert(*bus);
            let bi = net.bus_idx(*bus).unwrap();
            for &(nb, li) in net.adjacent(bi) {
                vs.insert(net.bus_id(nb));
                es.insert(net.line(li).pair());
            }
        }
    }
    (vs, es)
}

/// Exact subnetwork observability: the measured subgraph of the chosen
/// meters must contain the reference bus and the rational Jacobian restricted
/// to its columns must have full rank.
pub fn oracle_observable(net: &PowerNetwork<f64>, meters: &MeterSet<f64>, chosen: &[usize]) -> bool {
    let mut verts = BTreeSet::new();
    for &i in chosen {
        let (vs, _) = oracle_coverage(net, &meters.meters()[i]);
        verts.extend(vs);
    }
    if !verts.contains(&net.reference_id()) {
        return false;
    }
    let h = rational_jacobian(net, meters);
    let cols: Vec<usize> = net
        .state_buses()
        .iter()
        .enumerate()
        .filter(|(_, b)| verts.contains(b))
        .map(|(c, _)| c)
        .collect();
    let restricted: Vec<Vec<BigRational>> = chosen
        .iter()
        .map(|&r| cols.iter().map(|&c| h[r][c].clone()).collect())
        .collect();
    rat_rank(restricted) == cols.len()
}

/// Brute-force EMST existence: search spanning trees of the measured
/// subgraph (must contain the reference) whose edges admit an injective
/// assignment to measuring meters among the chosen set.
pub fn oracle_emst_exists(
    net: &PowerNetwork<f64>,
    meters: &MeterSet<f64>,
    chosen: &[usize],
) -> bool {
    let mut verts = BTreeSet::new();
    let mut edges = BTreeSet::new();
    for &i in chosen {
        let (vs, es) = oracle_coverage(net, &meters.meters()[i]);
        verts.extend(vs);
        edges.extend(es);
    }
    if !verts.contains(&net.reference_id()) {
        return false;
    }
    if verts.len() == 1 {
        return true;
    }
    let verts: Vec<BusId> = verts.into_iter().collect();
    let vpos: BTreeMap<BusId, usize> = verts.iter().enumerate().map(|(i, &b)| (b, i)).collect();
    let edges: Vec<(BusId, BusId)> = edges.into_iter().collect();
    // which chosen meters can take each edge
    let can: Vec<Vec<usize>> = edges
        .iter()
        .map(|&(a, b)| {
            chosen
                .iter()
                .copied()
                .filter(|&mi| match &meters.meters()[mi].kind {
                    MeterKind::Flow { from, to } => {
                        let (x, y) = if from <= to { (*from, *to) } else { (*to, *from) };
                        (x, y) == (a, b)
                    }
                    MeterKind::Injection { bus } => *bus == a || *bus == b,
                })
                .collect()
        })
        .collect();
    let need = verts.len() - 1;
    let mut picked: Vec<usize> = Vec::new();
    search_trees(&edges, &can, &vpos, verts.len(), need, 0, &mut picked)
}

fn search_trees(
    edges: &[(BusId, BusId)],
    can: &[Vec<usize>],
    vpos: &BTreeMap<BusId, usize>,
    nv: usize,
    need: usize,
    from: usize,
    picked: &mut Vec<usize>,
) -> bool {
    if picked.len() == need {
        // spanning check then injective assignment by backtracking
        let mut uf: Vec<usize> = (0..nv).collect();
        fn find(p: &mut Vec<usize>, mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for &e in picked.iter() {
            let (a, b) = edges[e];
            let (ra, rb) = (find(&mut uf, vpos[&a]), find(&mut uf, vpos[&b]));
            if ra == rb {
                return false;
            }
            uf[ra] = rb;
        }
        let mut used = BTreeSet::new();
        return assign(can, picked, 0, &mut used);
    }
    if from == edges.len() || edges.len() - from < need - picked.len() {
        return false;
    }
    // include edges[from] if it keeps the forest acyclic
    let mut uf: Vec<usize> = (0..nv).collect();
    fn find2(p: &mut Vec<usize>, mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut acyclic = true;
    for &e in picked.iter().chain(std::iter::once(&from)) {
        let (a, b) = edges[e];
        let (ra, rb) = (find2(&mut uf, vpos[&a]), find2(&mut uf, vpos[&b]));
        if ra == rb {
            acyclic = false;
            break;
        }
        uf[ra] = rb;
    }
    if acyclic && !can[from].is_empty() {
        picked.push(from);
        if search_trees(edges, can, vpos, nv, need, from + 1, picked) {
            picked.pop();
            return true;
        }
        picked.pop();
    }
    search_trees(edges, can, vpos, nv, need, from + 1, picked)
}

fn assign(can: &[Vec<usize>], picked: &[usize], at: usize, used: &mut BTreeSet<usize>) -> bool {
    if at == picked.len() {
        return true;
    }
    for &m in &can[picked[at]] {
        if used.insert(m) {
            if assign(can, picked, at + 1, used) {
                return true;
            }
            used.remove(&m);
        }
    }
    false
}

/// Random connected network with `nbus` buses: a random spanning tree plus
/// `extra` chords, reactances drawn from a coarse grid to keep conditioning
/// tame. Bus 1 is the reference.
pub fn random_network(nbus: usize, extra: usize, rng: &mut ChaCha8Rng) -> PowerNetwork<f64> {
    use gridseer::model::{Bus, Line};
    let mut lines = BTreeSet::new();
    for b in 2..=nbus as BusId {
        let parent = rng.gen_range(1..b);
        lines.insert((parent, b));
    }
    let mut attempts = 0;
    let mut added = 0;
    while added < extra && attempts < 200 {
        attempts += 1;
        let a = rng.gen_range(1..=nbus as BusId);
        let b = rng.gen_range(1..=nbus as BusId);
        if a != b {
            let key = (a.min(b), a.max(b));
            if lines.insert(key) {
                added += 1;
            }
        }
    }
    let buses = (1..=nbus as BusId)
        .map(|id| Bus {
            id,
            is_reference: id == 1,
        })
        .collect();
    let lines = lines
        .into_iter()
        .map(|(from, to)| Line {
            from,
            to,
            reactance: 0.05 * rng.gen_range(1..=20) as f64,
        })
        .collect();
    PowerNetwork::new(buses, lines).expect("generated network is valid")
}

/// Random meters over a network: a mix of flow and injection devices with
/// integer-ish costs. Not guaranteed observable.
pub fn random_meters(
    net: &PowerNetwork<f64>,
    count: usize,
    rng: &mut ChaCha8Rng,
) -> MeterSet<f64> {
    let mut meters = Vec::new();
    let lines = net.lines().to_vec();
    for k in 0..count {
        let id = format!("m{k}");
        if rng.gen_bool(0.65) {
            let l = &lines[rng.gen_range(0..lines.len())];
            meters.push(Meter {
                id,
                kind: MeterKind::Flow {
                    from: l.from,
                    to: l.to,
                },
                cost: rng.gen_range(1..=4) as f64,
                secured: false,
            });
        } else {
            let b = net.buses()[rng.gen_range(0..net.buses().len())].id;
            meters.push(Meter {
                id,
                kind: MeterKind::Injection { bus: b },
                cost: rng.gen_range(1..=4) as f64,
                secured: false,
            });
        }
    }
    MeterSet::new(net, meters).expect("generated meters are valid")
}

/// Meters that make the full network observable: flows on a spanning tree
/// plus `extra` random devices.
pub fn observable_meters(
    net: &PowerNetwork<f64>,
    extra: usize,
    rng: &mut ChaCha8Rng,
) -> MeterSet<f64> {
    let mut meters = Vec::new();
    let mut uf: Vec<usize> = (0..net.buses().len()).collect();
    fn find(p: &mut Vec<usize>, mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut k = 0;
    for l in net.lines() {
        let (a, b) = (net.bus_idx(l.from).unwrap(), net.bus_idx(l.to).unwrap());
        let (ra, rb) = (find(&mut uf, a), find(&mut uf, b));
        if ra != rb {
            uf[ra] = rb;
            meters.push(Meter {
                id: format!("t{k}"),
                kind: MeterKind::Flow {
                    from: l.from,
                    to: l.to,
                },
                cost: rng.gen_range(1..=4) as f64,
                secured: false,
            });
            k += 1;
        }
    }
    let lines = net.lines().to_vec();
    for j in 0..extra {
        let id = format!("x{j}");
        if rng.gen_bool(0.5) {
            let l = &lines[rng.gen_range(0..lines.len())];
            meters.push(Meter {
                id,
                kind: MeterKind::Flow {
                    from: l.from,
                    to: l.to,
                },
                cost: rng.gen_range(1..=4) as f64,
                secured: false,
            });
        } else {
            let b = net.buses()[rng.gen_range(0..net.buses().len())].id;
            meters.push(Meter {
                id,
                kind: MeterKind::Injection { bus: b },
                cost: rng.gen_range(1..=4) as f64,
                secured: false,
            });
        }
    }
    MeterSet::new(net, meters).expect("valid meters")
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Exhaustive minimum-cost feasible meter subset for protecting `targets`:
/// the measured subgraph must be observable (exact rank) and contain every
/// target. Returns None when no subset works.
pub fn oracle_protection_cost(
    net: &PowerNetwork<f64>,
    meters: &MeterSet<f64>,
    targets: &[BusId],
) -> Option<f64> {
    let m = meters.len();
    assert!(m <= 20, "oracle is exponential in meter count");
    let mut best: Option<f64> = None;
    for mask in 1u32..(1 << m) {
        let chosen: Vec<usize> = (0..m).filter(|&i| mask >> i & 1 == 1).collect();
        let cost: f64 = chosen.iter().map(|&i| meters.meters()[i].cost).sum();
        if let Some(b) = best {
            if cost >= b {
                continue;
            }
        }
        let mut verts = BTreeSet::new();
        for &i in &chosen {
            let (vs, _) = oracle_coverage(net, &meters.meters()[i]);
            verts.extend(vs);
        }
        if !targets.iter().all(|t| verts.contains(t)) {
            continue;
        }
        if oracle_observable(net, meters, &chosen) {
            best = Some(cost);
        }
    }
    best
}

/// True when |a - b| <= tol.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

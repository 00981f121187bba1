//! Augmenting-path maximum flow (Edmonds-Karp: shortest paths by BFS) over
//! real-valued capacities, with residual-side extraction for minimum cuts.
//! Infinite capacities model edges that must never be cut.

use crate::error::{Error, Result};
use crate::scalar::{sc, Scalar};

pub struct FlowNetwork<T> {
    head: Vec<usize>,
    cap: Vec<T>,
    adj: Vec<Vec<usize>>,
}

impl<T: Scalar> FlowNetwork<T> {
    pub fn new(nodes: usize) -> Self {
        Self {
            head: Vec::new(),
            cap: Vec::new(),
            adj: vec![Vec::new(); nodes],
        }
    }

    /// Undirected edge: capacity available in both directions.
    pub fn add_undirected(&mut self, u: usize, v: usize, cap: T) -> usize {
        let id = self.head.len();
        self.head.push(v);
        self.cap.push(cap);
        self.head.push(u);
        self.cap.push(cap);
        self.adj[u].push(id);
        self.adj[v].push(id + 1);
        id
    }

    fn residual_eps(&self) -> T {
        let scale = self
            .cap
            .iter()
            .filter(|c| c.is_finite())
            .fold(T::one(), |m, &c| m.max(c.abs()));
        scale * sc::<T>(1e-12)
    }

    /// Total max flow from s to t. Errors out when an all-infinite path makes
    /// the flow unbounded; callers are expected to pre-check feasibility.
    pub fn max_flow(&mut self, s: usize, t: usize) -> Result<T> {
        let eps = self.residual_eps();
        let mut total = T::zero();
        loop {
            let mut prev: Vec<Option<usize>> = vec![None; self.adj.len()];
            let mut seen = vec![false; self.adj.len()];
            seen[s] = true;
            let mut queue = std::collections::VecDeque::new();
            queue.push_back(s);
            while let Some(u) = queue.pop_front() {
                if u == t {
                    break;
                }
                for &e in &self.adj[u] {
                    let v = self.head[e];
                    if !seen[v] && self.cap[e] > eps {
                        seen[v] = true;
                        prev[v] = Some(e);
                        queue.push_back(v);
                    }
                }
            }
            if !seen[t] {
                return Ok(total);
            }
            let mut bottleneck = T::infinity();
            let mut v = t;
            while v != s {
                let e = prev[v].expect("path");
                bottleneck = bottleneck.min(self.cap[e]);
                v = self.head[e ^ 1];
            }
            if !bottleneck.is_finite() {
                return Err(Error::Internal(
                    "unbounded flow: infinite-capacity path not excluded".into(),
                ));
            }
            let mut v = t;
            while v != s {
                let e = prev[v].expect("path");
                self.cap[e] = self.cap[e] - bottleneck;
                self.cap[e ^ 1] = self.cap[e ^ 1] + bottleneck;
                v = self.head[e ^ 1];
            }
            total = total + bottleneck;
        }
    }

    /// Nodes residual-reachable from s after a max flow; the source side of
    /// the minimum cut.
    pub fn source_side(&self, s: usize) -> Vec<bool> {
        let eps = self.residual_eps();
        let mut seen = vec![false; self.adj.len()];
        seen[s] = true;
        let mut queue = std::collections::VecDeque::new();
        queue.push_back(s);
        while let Some(u) = queue.pop_front() {
            for &e in &self.adj[u] {
                let v = self.head[e];
                if !seen[v] && self.cap[e] > eps {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen
    }
}

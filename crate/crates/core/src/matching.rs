//! Tree matching for EMST construction: find a spanning tree of the measured
//! subgraph whose edges are injectively assigned to meters that measure them.
//!
//! The assignment side is solved by augmenting-path matching (unit-capacity
//! max flow); tree-ness is maintained as a graphic independence condition.
//! The combined search is a common-independent-set augmentation over the
//! graphic and transversal structures, seeded greedily in canonical order so
//! ties always resolve to the lowest-indexed edges and meters.

/// Result of a successful tree matching: the selected edge indices (including
/// the forced edge) and the meter assigned to each, aligned by position.
pub(crate) struct TreeAssignment {
    pub edges: Vec<usize>,
    pub meters: Vec<usize>,
}

/// Searches for `target` edges forming a forest that includes `forced`, each
/// edge matched to a distinct meter from `measure`. Vertices are `0..nv`
/// local indices; `edges[i]` are endpoint pairs; `measure[i]` lists the
/// meters that can take edge i, in canonical order.
pub(crate) fn tree_matching(
    nv: usize,
    edges: &[(usize, usize)],
    measure: &[Vec<usize>],
    n_meters: usize,
    forced: usize,
    target: usize,
) -> Option<TreeAssignment> {
    let mut search = Search {
        nv,
        edges,
        forced,
        selected: vec![false; edges.len()],
        matcher: Matcher::new(edges.len(), measure, n_meters),
    };
    if target == 0 {
        return None;
    }
    if !search.matcher.try_assign(forced) {
        return None;
    }
    search.selected[forced] = true;

    // greedy seed in canonical edge order
    for e in 0..edges.len() {
        if search.size() == target {
            break;
        }
        if search.selected[e] {
            continue;
        }
        // try_assign only mutates the matching when it succeeds
        if search.acyclic_with(e) && search.matcher.try_assign(e) {
            search.selected[e] = true;
        }
    }
    // augment until the target size is reached or no path remains
    while search.size() < target {
        if !search.augment() {
            return None;
        }
    }
    let mut out = TreeAssignment {
        edges: Vec::new(),
        meters: Vec::new(),
    };
    for e in 0..edges.len() {
        if search.selected[e] {
            out.edges.push(e);
            out.meters.push(
                search.matcher.match_of_edge[e].expect("selected edge must be matched"),
            );
        }
    }
    Some(out)
}

struct Search<'a> {
    nv: usize,
    edges: &'a [(usize, usize)],
    forced: usize,
    selected: Vec<bool>,
    matcher: Matcher<'a>,
}

impl<'a> Search<'a> {
    fn size(&self) -> usize {
        self.selected.iter().filter(|&&s| s).count()
    }

    /// Does the selection stay a forest when `e` joins it?
    fn acyclic_with(&self, e: usize) -> bool {
        let mut uf = UnionFind::new(self.nv);
        for (i, &(u, v)) in self.edges.iter().enumerate() {
            if self.selected[i] {
                uf.union(u, v);
            }
        }
        let (u, v) = self.edges[e];
        uf.find(u) != uf.find(v)
    }

    fn rebuild_matching(&mut self) {
        self.matcher.reset();
        for e in 0..self.edges.len() {
            if self.selected[e] {
                let ok = self.matcher.try_assign(e);
                debug_assert!(ok, "selection must stay matchable");
            }
        }
    }

    /// One exchange-graph augmentation: grows the selection by one edge while
    /// keeping both the forest property and matchability.
    fn augment(&mut self) -> bool {
        let ne = self.edges.len();
        let outside: Vec<usize> = (0..ne).filter(|&e| !self.selected[e]).collect();
        let inside: Vec<usize> = (0..ne)
            .filter(|&e| self.selected[e] && e != self.forced)
            .collect();

        // forest path of each outside edge: the selected edges on the unique
        // path between its endpoints, or None when the endpoints are in
        // different components (the edge joins the forest freely).
        let adj = self.forest_adjacency();
        let mut sources = Vec::new();
        let mut cycle: Vec<Option<Vec<usize>>> = vec![None; ne];
        for &y in &outside {
            let (u, v) = self.edges[y];
            match forest_path(&adj, u, v) {
                None => sources.push(y),
                Some(path) => cycle[y] = Some(path),
            }
        }
        // sinks: outside edges the matching can absorb directly
        let mut is_sink = vec![false; ne];
        for &y in &outside {
            if self.matcher.can_add(y) {
                is_sink[y] = true;
            }
        }

        // BFS over the exchange graph from all sources, canonical order.
        let mut parent: Vec<Option<usize>> = vec![None; ne];
        let mut seen = vec![false; ne];
        let mut queue = std::collections::VecDeque::new();
        for &y in &sources {
            seen[y] = true;
            queue.push_back(y);
            if is_sink[y] {
                // single-element augmenting path
                self.apply_path(&[y], &parent);
                return true;
            }
        }
        while let Some(node) = queue.pop_front() {
            if !self.selected[node] {
                let y = node;
                if is_sink[y] && parent[y].is_some() {
                    let path = trace_path(&parent, y);
                    self.apply_path(&path, &parent);
                    return true;
                }
                // arcs y -> x: swapping keeps the assignment matchable
                for &x in &inside {
                    if !seen[x] && self.matcher.can_swap(x, y) {
                        seen[x] = true;
                        parent[x] = Some(y);
                        queue.push_back(x);
                    }
                }
            } else {
                let x = node;
                // arcs x -> y: swapping keeps the forest acyclic
                for &y in &outside {
                    if seen[y] {
                        continue;
                    }
                    let ok = match &cycle[y] {
                        None => true,
                        Some(path) => path.contains(&x),
                    };
                    if ok {
                        seen[y] = true;
                        parent[y] = Some(x);
                        queue.push_back(y);
                        if is_sink[y] {
                            let path = trace_path(&parent, y);
                            self.apply_path(&path, &parent);
                            return true;
                        }
                    }
                }
            }
        }
        false
    }

    fn forest_adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.nv];
        for (i, &(u, v)) in self.edges.iter().enumerate() {
            if self.selected[i] {
                adj[u].push((v, i));
                adj[v].push((u, i));
            }
        }
        adj
    }

    fn apply_path(&mut self, path: &[usize], _parent: &[Option<usize>]) {
        for &e in path {
            self.selected[e] = !self.selected[e];
        }
        self.rebuild_matching();
        debug_assert!(self.is_forest());
    }

    fn is_forest(&self) -> bool {
        let mut uf = UnionFind::new(self.nv);
        for (i, &(u, v)) in self.edges.iter().enumerate() {
            if self.selected[i] && !uf.union(u, v) {
                return false;
            }
        }
        true
    }
}

/// Selected-edge indices on the forest path between a and b, if connected.
fn forest_path(adj: &[Vec<(usize, usize)>], a: usize, b: usize) -> Option<Vec<usize>> {
    if a == b {
        return Some(Vec::new());
    }
    let mut prev: Vec<Option<(usize, usize)>> = vec![None; adj.len()];
    let mut queue = std::collections::VecDeque::new();
    let mut seen = vec![false; adj.len()];
    seen[a] = true;
    queue.push_back(a);
    while let Some(u) = queue.pop_front() {
        for &(v, e) in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                prev[v] = Some((u, e));
                if v == b {
                    let mut path = Vec::new();
                    let mut cur = b;
                    while let Some((p, pe)) = prev[cur] {
                        path.push(pe);
                        cur = p;
                    }
                    return Some(path);
                }
                queue.push_back(v);
            }
        }
    }
    None
}

fn trace_path(parent: &[Option<usize>], end: usize) -> Vec<usize> {
    let mut path = vec![end];
    let mut cur = end;
    while let Some(p) = parent[cur] {
        path.push(p);
        cur = p;
    }
    path
}

/// Augmenting-path bipartite matcher between edges and meters.
struct Matcher<'a> {
    measure: &'a [Vec<usize>],
    match_of_edge: Vec<Option<usize>>,
    match_of_meter: Vec<Option<usize>>,
}

impl<'a> Matcher<'a> {
    fn new(ne: usize, measure: &'a [Vec<usize>], nm: usize) -> Self {
        Self {
            measure,
            match_of_edge: vec![None; ne],
            match_of_meter: vec![None; nm],
        }
    }

    fn reset(&mut self) {
        self.match_of_edge.fill(None);
        self.match_of_meter.fill(None);
    }

    /// Augment from edge e; mutates the matching on success.
    fn try_assign(&mut self, e: usize) -> bool {
        let mut visited = vec![false; self.match_of_meter.len()];
        self.dfs(e, &mut visited)
    }

    fn dfs(&mut self, e: usize, visited: &mut [bool]) -> bool {
        for &p in &self.measure[e] {
            if visited[p] {
                continue;
            }
            visited[p] = true;
            let next = self.match_of_meter[p];
            match next {
                None => {
                    self.assign(e, p);
                    return true;
                }
                Some(e2) => {
                    if self.dfs(e2, visited) {
                        self.assign(e, p);
                        return true;
                    }
                }
            }
        }
        false
    }

    fn assign(&mut self, e: usize, p: usize) {
        self.match_of_edge[e] = Some(p);
        self.match_of_meter[p] = Some(e);
    }

    /// Non-destructive: can the current assignment absorb edge y?
    fn can_add(&mut self, y: usize) -> bool {
        let (se, sm) = (self.match_of_edge.clone(), self.match_of_meter.clone());
        let ok = self.try_assign(y);
        self.match_of_edge = se;
        self.match_of_meter = sm;
        ok
    }

    /// Non-destructive: does dropping x and adding y keep a full assignment?
    fn can_swap(&mut self, x: usize, y: usize) -> bool {
        let (se, sm) = (self.match_of_edge.clone(), self.match_of_meter.clone());
        if let Some(p) = self.match_of_edge[x].take() {
            self.match_of_meter[p] = None;
        }
        let ok = self.try_assign(y);
        self.match_of_edge = se;
        self.match_of_meter = sm;
        ok
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false when x and y were already joined.
    fn union(&mut self, x: usize, y: usize) -> bool {
        let (rx, ry) = (self.find(x), self.find(y));
        if rx == ry {
            return false;
        }
        self.parent[rx] = ry;
        true
    }
}

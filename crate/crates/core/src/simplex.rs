//! Self-contained bounded-variable primal simplex over a dense tableau.
//!
//! Minimizes c'x subject to sparse Le/Eq rows and per-variable bounds.
//! Phase 1 drives the sum of basic-variable bound violations to zero with a
//! kinked ratio test (infeasible basics may travel to their violated bound);
//! phase 2 is textbook Dantzig pricing with bound flips and a Bland fallback
//! against cycling. Sized for the desk-scale relaxations produced by the
//! protection planner (hundreds of rows).

use crate::scalar::{sc, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Le,
    Eq,
}

#[derive(Debug, Clone)]
pub struct LinearProgram<T> {
    pub ncols: usize,
    pub objective: Vec<T>,
    /// (sparse coefficients, kind, rhs)
    pub rows: Vec<(Vec<(usize, T)>, RowKind, T)>,
    pub lower: Vec<T>,
    pub upper: Vec<T>,
}

impl<T: Scalar> LinearProgram<T> {
    pub fn new(ncols: usize) -> Self {
        Self {
            ncols,
            objective: vec![T::zero(); ncols],
            rows: Vec::new(),
            lower: vec![T::zero(); ncols],
            upper: vec![T::infinity(); ncols],
        }
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, T)>, kind: RowKind, rhs: T) {
        self.rows.push((coeffs, kind, rhs));
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome<T> {
    Optimal { objective: T, x: Vec<T> },
    Infeasible,
    Unbounded,
    /// Iteration cap hit; treat as a solver failure.
    Stalled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarState {
    Basic,
    AtLower,
    AtUpper,
}

/// Dense constraint data shared by every node of a branch-and-bound tree;
/// the per-node solver state is rebuilt from it with fresh bounds.
#[derive(Clone)]
pub struct Tableau<T> {
    ncols: usize,
    nrows: usize,
    /// nrows x (ncols + nrows): structural columns then slack identity.
    /// The artificial identity block is appended at solver setup.
    t: Vec<T>,
    rhs: Vec<T>,
    /// Slack upper bounds: +inf for Le rows, 0 for Eq rows.
    slack_upper: Vec<T>,
    objective: Vec<T>,
}

impl<T: Scalar> Tableau<T> {
    pub fn build(lp: &LinearProgram<T>) -> Self {
        let (n, m) = (lp.ncols, lp.rows.len());
        let width = n + m;
        let mut t = vec![T::zero(); m * width];
        let mut rhs = vec![T::zero(); m];
        let mut slack_upper = vec![T::infinity(); m];
        for (i, (coeffs, kind, b)) in lp.rows.iter().enumerate() {
            for &(j, v) in coeffs {
                t[i * width + j] = t[i * width + j] + v;
            }
            t[i * width + n + i] = T::one();
            rhs[i] = *b;
            if *kind == RowKind::Eq {
                slack_upper[i] = T::zero();
            }
        }
        Self {
            ncols: n,
            nrows: m,
            t,
            rhs,
            slack_upper,
            objective: lp.objective.clone(),
        }
    }
}

enum Step<T> {
    Moved { step: T },
    Unbounded,
    /// The chosen pivot element is too weak to trust on a stale
    /// factorization; refresh and retry the iteration.
    NeedsRefactor,
}

enum PhaseEnd {
    Done,
    NoProgress,
    Stalled,
}

pub struct Simplex<T> {
    width: usize,
    ncols: usize,
    nrows: usize,
    n_art: usize,
    t: Vec<T>,
    /// Pristine sign-scaled tableau for refactorization.
    t0: Vec<T>,
    rhs: Vec<T>,
    lower: Vec<T>,
    upper: Vec<T>,
    cost: Vec<T>,
    state: Vec<VarState>,
    basis: Vec<usize>,
    xval: Vec<T>,
    beta: Vec<T>,
    /// Maintained reduced costs for phase 2.
    dj: Vec<T>,
    pivots: usize,
    pivots_since_refactor: usize,
    feas_tol: T,
    cost_tol: T,
    /// Anti-cycling: use Bland's rule from the first pivot.
    force_bland: bool,
}

impl<T: Scalar> Simplex<T> {
    /// Fresh solver state from a prebuilt tableau and the node's structural
    /// variable bounds (slack bounds come from the row kinds). The start
    /// basis is one artificial variable per row, absorbing whatever residual
    /// the bounded nonbasic point leaves, so phase 1 minimizes the plain
    /// artificial sum.
    pub fn from_tableau(tab: &Tableau<T>, lower: &[T], upper: &[T]) -> Self {
        let (n, m) = (tab.ncols, tab.nrows);
        let width = n + m + m;
        assert_eq!(lower.len(), n);
        let mut full_lower = lower.to_vec();
        let mut full_upper = upper.to_vec();
        full_lower.extend(std::iter::repeat(T::zero()).take(2 * m));
        full_upper.extend_from_slice(&tab.slack_upper);
        full_upper.extend(std::iter::repeat(T::infinity()).take(m));
        let mut cost = tab.objective.clone();
        cost.extend(std::iter::repeat(T::zero()).take(2 * m));

        let mut xval: Vec<T> = full_lower.clone();
        let mut state = vec![VarState::AtLower; width];
        let mut basis = Vec::with_capacity(m);
        // residual of each row at the all-at-lower nonbasic point
        let src_width = n + m;
        let mut residual = tab.rhs.clone();
        for i in 0..m {
            for j in 0..n {
                let a = tab.t[i * src_width + j];
                if a != T::zero() && xval[j] != T::zero() {
                    residual[i] = residual[i] - a * xval[j];
                }
            }
        }
        // rows scaled so the artificial block is the identity and the
        // artificial values |residual| are feasible
        let mut t = vec![T::zero(); m * width];
        let mut beta = vec![T::zero(); m];
        for i in 0..m {
            let sign = if residual[i] < T::zero() { -T::one() } else { T::one() };
            for j in 0..src_width {
                t[i * width + j] = sign * tab.t[i * src_width + j];
            }
            t[i * width + n + m + i] = T::one();
            state[n + m + i] = VarState::Basic;
            basis.push(n + m + i);
            beta[i] = residual[i].abs();
            xval[n + m + i] = beta[i];
        }
        let mut rhs = tab.rhs.clone();
        for i in 0..m {
            if residual[i] < T::zero() {
                rhs[i] = -rhs[i];
            }
        }
        Self {
            width,
            ncols: n,
            nrows: m,
            n_art: m,
            t0: t.clone(),
            t,
            rhs,
            lower: full_lower,
            upper: full_upper,
            cost,
            state,
            basis,
            xval,
            beta,
            dj: vec![T::zero(); width],
            pivots: 0,
            pivots_since_refactor: 0,
            feas_tol: sc(1e-6),
            cost_tol: sc(1e-7),
            force_bland: false,
        }
    }

    /// Deterministic anti-cycling fallback mode.
    pub fn set_force_bland(&mut self, on: bool) {
        self.force_bland = on;
    }

    /// Rebuilds the maintained tableau from the pristine copy and the current
    /// basis, wiping accumulated pivot error. Basis slots may be permuted for
    /// pivot quality; values and reduced costs are recomputed afterwards.
    fn refactorize(&mut self) -> bool {
        let width = self.width;
        let m = self.nrows;
        self.t.copy_from_slice(&self.t0);
        // LU-style sweep: fixed basis-column order, row partial pivoting.
        // For a nonsingular basis this never dead-ends.
        for k in 0..m {
            let col = self.basis[k];
            let mut best = k;
            let mut best_abs = self.at(k, col).abs();
            for r in k + 1..m {
                let a = self.at(r, col).abs();
                if a > best_abs {
                    best = r;
                    best_abs = a;
                }
            }
            if best_abs <= sc::<T>(1e-9) {
                return false; // the basis itself is numerically singular
            }
            if best != k {
                for c in 0..width {
                    let (x, y) = (self.at(k, c), self.at(best, c));
                    self.t[k * width + c] = y;
                    self.t[best * width + c] = x;
                }
            }
            let inv = T::one() / self.at(k, col);
            for c in 0..width {
                self.t[k * width + c] = self.t[k * width + c] * inv;
            }
            let pivot_row: Vec<T> = self.t[k * width..(k + 1) * width].to_vec();
            for r in 0..m {
                if r == k {
                    continue;
                }
                let f = self.at(r, col);
                if f != T::zero() {
                    let row = &mut self.t[r * width..(r + 1) * width];
                    for (v, pv) in row.iter_mut().zip(&pivot_row) {
                        *v = *v - f * *pv;
                    }
                }
            }
        }
        // snap nonbasic values onto their bounds
        for j in 0..width {
            match self.state[j] {
                VarState::AtLower => self.xval[j] = self.lower[j],
                VarState::AtUpper => self.xval[j] = self.upper[j],
                VarState::Basic => {}
            }
        }
        self.recompute_beta();
        self.recompute_dj();
        self.pivots_since_refactor = 0;
        true
    }

    #[inline]
    fn at(&self, r: usize, c: usize) -> T {
        self.t[r * self.width + c]
    }

    pub fn pivot_count(&self) -> usize {
        self.pivots
    }

    /// beta = B^{-1} b - sum over nonbasic j of xval_j * column_j; the
    /// artificial block of the maintained tableau is B^{-1} (w.r.t. the
    /// sign-scaled rows).
    fn recompute_beta(&mut self) {
        let art_base = self.width - self.n_art;
        let mut beta = vec![T::zero(); self.nrows];
        for i in 0..self.nrows {
            let bi = self.rhs[i];
            if bi != T::zero() {
                for r in 0..self.nrows {
                    beta[r] = beta[r] + bi * self.at(r, art_base + i);
                }
            }
        }
        for j in 0..self.width {
            if self.state[j] == VarState::Basic {
                continue;
            }
            let xj = self.xval[j];
            if xj != T::zero() {
                for r in 0..self.nrows {
                    beta[r] = beta[r] - xj * self.at(r, j);
                }
            }
        }
        for r in 0..self.nrows {
            self.xval[self.basis[r]] = beta[r];
        }
        self.beta = beta;
    }

    /// Reduced costs d = c - c_B' B^{-1} A for the real objective.
    fn recompute_dj(&mut self) {
        let mut dj = self.cost.clone();
        for r in 0..self.nrows {
            let cb = self.cost[self.basis[r]];
            if cb != T::zero() {
                for j in 0..self.width {
                    dj[j] = dj[j] - cb * self.at(r, j);
                }
            }
        }
        for r in 0..self.nrows {
            dj[self.basis[r]] = T::zero();
        }
        self.dj = dj;
    }

    pub fn solve(&mut self) -> LpOutcome<T> {
        // phase 1: minimize the artificial sum
        let art_base = self.width - self.n_art;
        let real_cost = self.cost.clone();
        for j in 0..self.width {
            self.cost[j] = if j >= art_base { T::one() } else { T::zero() };
        }
        self.recompute_dj();
        match self.phase2() {
            PhaseEnd::Done => {}
            PhaseEnd::NoProgress => {
                return LpOutcome::Stalled; // the artificial sum is bounded below
            }
            PhaseEnd::Stalled => return LpOutcome::Stalled,
        }
        self.recompute_beta();
        let infeasibility: T = (art_base..self.width).map(|j| self.xval[j]).sum();
        if infeasibility > sc::<T>(1e-6) {
            return LpOutcome::Infeasible;
        }
        // pin artificials at zero and optimize the real objective
        for j in art_base..self.width {
            self.upper[j] = T::zero();
            if self.state[j] != VarState::Basic {
                self.state[j] = VarState::AtLower;
                self.xval[j] = T::zero();
            }
        }
        self.cost = real_cost;
        self.recompute_dj();
        match self.phase2() {
            PhaseEnd::Done => {}
            PhaseEnd::NoProgress => return LpOutcome::Unbounded,
            PhaseEnd::Stalled => return LpOutcome::Stalled,
        }
        self.recompute_beta();
        let x: Vec<T> = self.xval[..self.ncols].to_vec();
        let objective = (0..self.ncols).map(|j| self.cost[j] * x[j]).sum();
        LpOutcome::Optimal { objective, x }
    }

    fn phase2(&mut self) -> PhaseEnd {
        let debug = std::env::var("GRIDSEER_SIMPLEX_DEBUG").is_ok();
        let max_iter = 80 * (self.width + self.nrows) + 2000;
        let mut degenerate = 0usize;
        let refactor_every = 1000;
        let mut next_refactor = self.pivots + refactor_every;
        for it in 0..max_iter {
            if self.pivots >= next_refactor {
                if !self.refactorize() {
                    return PhaseEnd::Stalled;
                }
                next_refactor = self.pivots + refactor_every;
            }
            if debug {
                let mut seen = std::collections::BTreeSet::new();
                for (r, &b) in self.basis.iter().enumerate() {
                    if !seen.insert(b) {
                        eprintln!("BASIS DUP at pivot {}: var {b} twice (row {r})", self.pivots);
                        panic!("basis duplicate");
                    }
                    if self.state[b] != VarState::Basic {
                        eprintln!("STATE MISMATCH at pivot {}: var {b} row {r} not Basic", self.pivots);
                        panic!("state mismatch");
                    }
                }
                let basics = self.state.iter().filter(|&&st| st == VarState::Basic).count();
                if basics != self.nrows {
                    eprintln!("BASIC COUNT {} != {} at pivot {}", basics, self.nrows, self.pivots);
                    panic!("basic count");
                }
            }
            if debug && it % 20000 == 0 {
                let obj: T = (0..self.width).map(|j| self.cost[j] * self.xval[j]).sum();
                eprintln!(
                    "simplex it={it} deg_streak={degenerate} obj={:.6} pivots={}",
                    obj.to_f64_lossy(),
                    self.pivots
                );
            }
            let bland = self.force_bland || degenerate > 30;
            let Some((enter, dir)) = self.pick_entering(&self.dj, bland) else {
                return PhaseEnd::Done; // optimal
            };
            match self.ratio_and_pivot(enter, dir, bland) {
                Step::Moved { step } => {
                    if step <= self.feas_tol {
                        degenerate += 1;
                    } else {
                        degenerate = 0;
                    }
                }
                Step::Unbounded => return PhaseEnd::NoProgress,
                Step::NeedsRefactor => {
                    if !self.refactorize() {
                        return PhaseEnd::Stalled;
                    }
                    next_refactor = self.pivots + refactor_every;
                }
            }
        }
        PhaseEnd::Stalled
    }

    fn pick_entering(&self, d: &[T], bland: bool) -> Option<(usize, T)> {
        let mut best: Option<(usize, T, T)> = None;
        for j in 0..self.width {
            if self.state[j] == VarState::Basic || self.lower[j] == self.upper[j] {
                continue;
            }
            let (dir, score) = match self.state[j] {
                VarState::AtLower => (T::one(), -d[j]),
                VarState::AtUpper => (-T::one(), d[j]),
                VarState::Basic => unreachable!(),
            };
            if score > self.cost_tol {
                if bland {
                    return Some((j, dir));
                }
                if best.map_or(true, |(_, _, s)| score > s) {
                    best = Some((j, dir, score));
                }
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    /// Bounded ratio test followed by a bound flip or a pivot; every basic
    /// variable stays inside its bounds (within tolerance). Two passes in the
    /// Harris style: the first finds the tolerance-relaxed step, the second
    /// picks the best-magnitude pivot among rows inside that step.
    fn ratio_and_pivot(&mut self, enter: usize, dir: T, bland: bool) -> Step<T> {
        let coef_tol = sc::<T>(1e-6);
        let own_span = self.upper[enter] - self.lower[enter];
        // pass 1: relaxed limit
        let mut t_relax = own_span;
        for r in 0..self.nrows {
            let coef = self.at(r, enter);
            if coef.abs() <= coef_tol {
                continue;
            }
            let rate = -(dir * coef);
            let var = self.basis[r];
            let (l, u, v) = (self.lower[var], self.upper[var], self.beta[r]);
            let limit = if rate > T::zero() {
                if u.is_finite() {
                    ((u + self.feas_tol - v) / rate).max(T::zero())
                } else {
                    continue;
                }
            } else if l.is_finite() {
                ((l - self.feas_tol - v) / rate).max(T::zero())
            } else {
                continue;
            };
            if limit < t_relax {
                t_relax = limit;
            }
        }
        if !t_relax.is_finite() {
            return Step::Unbounded;
        }
        // pass 2: among rows whose strict limit fits in t_relax, take the
        // best pivot magnitude (Bland mode: lowest basis variable index)
        let mut leave: Option<(usize, bool, T)> = None; // (row, at_upper, strict limit)
        let mut leave_quality = T::zero();
        for r in 0..self.nrows {
            let coef = self.at(r, enter);
            if coef.abs() <= coef_tol {
                continue;
            }
            let rate = -(dir * coef);
            let var = self.basis[r];
            let (l, u, v) = (self.lower[var], self.upper[var], self.beta[r]);
            let (strict, at_upper) = if rate > T::zero() {
                if u.is_finite() {
                    (((u - v) / rate).max(T::zero()), true)
                } else {
                    continue;
                }
            } else if l.is_finite() {
                (((l - v) / rate).max(T::zero()), false)
            } else {
                continue;
            };
            if strict <= t_relax {
                let better = match leave {
                    None => true,
                    Some((prev, _, _)) => {
                        if bland {
                            self.basis[r] < self.basis[prev]
                        } else {
                            coef.abs() > leave_quality
                        }
                    }
                };
                if better {
                    leave = Some((r, at_upper, strict));
                    leave_quality = coef.abs();
                }
            }
        }
        let (step, leave) = match leave {
            None => (own_span, None), // every row tolerates the full flip
            Some((r, at_upper, strict)) => {
                if own_span <= strict {
                    (own_span, None)
                } else {
                    (strict, Some((r, at_upper)))
                }
            }
        };
        if !step.is_finite() {
            return Step::Unbounded;
        }
        let delta = dir * step;
        for i in 0..self.nrows {
            let change = delta * self.at(i, enter);
            self.beta[i] = self.beta[i] - change;
            self.xval[self.basis[i]] = self.beta[i];
        }
        match leave {
            None => {
                self.xval[enter] = self.xval[enter] + delta;
                self.state[enter] = if dir > T::zero() {
                    VarState::AtUpper
                } else {
                    VarState::AtLower
                };
            }
            Some((r, at_upper)) => {
                if self.at(r, enter).abs() < sc::<T>(1e-4) && self.pivots_since_refactor > 0 {
                    // undo the value sweep above before retrying
                    for i in 0..self.nrows {
                        let change = delta * self.at(i, enter);
                        self.beta[i] = self.beta[i] + change;
                        self.xval[self.basis[i]] = self.beta[i];
                    }
                    return Step::NeedsRefactor;
                }
                let entering_val = self.xval[enter] + delta;
                let leaving = self.basis[r];
                self.xval[leaving] = if at_upper {
                    self.upper[leaving]
                } else {
                    self.lower[leaving]
                };
                self.state[leaving] = if at_upper {
                    VarState::AtUpper
                } else {
                    VarState::AtLower
                };
                self.eliminate(r, enter);
                self.basis[r] = enter;
                self.state[enter] = VarState::Basic;
                self.beta[r] = entering_val;
                self.xval[enter] = entering_val;
                self.pivots += 1;
                self.pivots_since_refactor += 1;
                if std::env::var("GRIDSEER_SIMPLEX_DEBUG").is_ok() {
                    for (rr, &b) in self.basis.iter().enumerate() {
                        for i in 0..self.nrows {
                            let want = if i == rr { 1.0 } else { 0.0 };
                            let got = self.at(i, b).to_f64_lossy();
                            if (got - want).abs() > 1e-4 {
                                panic!(
                                    "pivot {}: basis col {b} row {i} = {got} want {want} (entered {enter}, row {r})",
                                    self.pivots
                                );
                            }
                        }
                    }
                }
            }
        }
        Step::Moved { step }
    }

    /// Gauss pivot on (r, enter): row r normalized, column cleared elsewhere,
    /// maintained reduced costs updated.
    fn eliminate(&mut self, r: usize, enter: usize) {
        let width = self.width;
        let inv = T::one() / self.at(r, enter);
        {
            let row = &mut self.t[r * width..(r + 1) * width];
            for v in row.iter_mut() {
                *v = *v * inv;
            }
        }
        let pivot_row: Vec<T> = self.t[r * width..(r + 1) * width].to_vec();
        for i in 0..self.nrows {
            if i == r {
                continue;
            }
            let f = self.at(i, enter);
            if f != T::zero() {
                let row = &mut self.t[i * width..(i + 1) * width];
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v = *v - f * *pv;
                }
            }
        }
        let f = self.dj[enter];
        if f != T::zero() {
            for (v, pv) in self.dj.iter_mut().zip(&pivot_row) {
                *v = *v - f * *pv;
            }
        }
    }
}

/// Convenience: build and solve in one call.
pub fn solve_lp<T: Scalar>(lp: &LinearProgram<T>) -> LpOutcome<T> {
    let tab = Tableau::build(lp);
    Simplex::from_tableau(&tab, &lp.lower, &lp.upper).solve()
}

//! Two-phase bounded primal simplex for small and medium linear programs.
//!
//! Problems are stated as
//!
//! ```text
//! minimize    c^T x
//! subject to  A x  = b
//!             G x <= h
//!             lo <= x <= hi      (either side may be infinite)
//! ```
//!
//! Internally every variable is shifted or mirrored onto `[0, u]`, free
//! variables are split and inequalities receive slacks. Finite upper bounds
//! are kept as nonbasic-at-upper states rather than extra rows. The solver
//! is a revised simplex with an explicit dense basis inverse, updated per
//! pivot and recomputed periodically; constraint columns are stored without
//! their zero entries.

use std::fmt::Write as _;
use std::io::Write;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem<T> {
    pub objective: Vec<T>,
    pub eq_matrix: Vec<Vec<T>>,
    pub eq_rhs: Vec<T>,
    pub ineq_matrix: Vec<Vec<T>>,
    pub ineq_rhs: Vec<T>,
    pub lower: Vec<T>,
    pub upper: Vec<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution<T> {
    pub status: LpStatus,
    pub x: Vec<T>,
    pub objective_value: T,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub feas_tol: f64,
    pub pivot_tol: f64,
    pub max_iters: usize,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub bland_after: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            feas_tol: 1e-9,
            pivot_tol: 1e-10,
            max_iters: 1_000_000,
            bland_after: 50,
        }
    }
}

/// Largest violation per constraint family.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct FeasibilityReport {
    pub eq_residual: f64,
    pub ineq_violation: f64,
    pub bound_violation: f64,
}

impl FeasibilityReport {
    pub fn max_violation(&self) -> f64 {
        self.eq_residual
            .max(self.ineq_violation)
            .max(self.bound_violation)
    }

    pub fn is_feasible(&self, tol: f64) -> bool {
        self.max_violation() <= tol
    }
}

impl<T: Scalar> LpProblem<T> {
    /// Empty problem over `n` variables with bounds `[0, +inf)`.
    pub fn new(objective: Vec<T>) -> Self {
        let n = objective.len();
        LpProblem {
            objective,
            eq_matrix: Vec::new(),
            eq_rhs: Vec::new(),
            ineq_matrix: Vec::new(),
            ineq_rhs: Vec::new(),
            lower: vec![T::zero(); n],
            upper: vec![T::infinity(); n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_eq(&mut self, row: Vec<T>, rhs: T) {
        self.eq_matrix.push(row);
        self.eq_rhs.push(rhs);
    }

    pub fn add_le(&mut self, row: Vec<T>, rhs: T) {
        self.ineq_matrix.push(row);
        self.ineq_rhs.push(rhs);
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        let bad = |m: String| Err(Error::MalformedProblem(m));
        if self.lower.len() != n || self.upper.len() != n {
            return bad(format!("bounds have length {}/{} for {n} variables", self.lower.len(), self.upper.len()));
        }
        if self.eq_matrix.len() != self.eq_rhs.len() || self.ineq_matrix.len() != self.ineq_rhs.len() {
            return bad("constraint rows and right-hand sides differ in count".into());
        }
        for row in self.eq_matrix.iter().chain(&self.ineq_matrix) {
            if row.len() != n {
                return bad(format!("constraint row of length {} for {n} variables", row.len()));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return bad("non-finite constraint coefficient".into());
            }
        }
        if self.objective.iter().chain(&self.eq_rhs).chain(&self.ineq_rhs).any(|v| !v.is_finite()) {
            return bad("non-finite objective or right-hand side".into());
        }
        for j in 0..n {
            let (lo, hi) = (self.lower[j], self.upper[j]);
            if lo.is_nan() || hi.is_nan() || lo > hi || lo == T::infinity() || hi == T::neg_infinity() {
                return bad(format!("invalid bounds [{lo}, {hi}] on variable {j}"));
            }
        }
        Ok(())
    }

    /// Plain-text standard-form listing for cross-checking with other solvers.
    pub fn write_listing<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let fmt_row = |row: &[T]| {
            let mut s = String::new();
            for (j, v) in row.iter().enumerate() {
                if *v != T::zero() {
                    let _ = write!(s, " {:+e} x{}", v.as_f64(), j);
                }
            }
            if s.is_empty() {
                s.push_str(" 0");
            }
            s
        };
        writeln!(out, "minimize{}", fmt_row(&self.objective))?;
        writeln!(out, "subject to")?;
        for (i, (row, b)) in self.eq_matrix.iter().zip(&self.eq_rhs).enumerate() {
            writeln!(out, "  e{i}:{} = {:e}", fmt_row(row), b.as_f64())?;
        }
        for (i, (row, h)) in self.ineq_matrix.iter().zip(&self.ineq_rhs).enumerate() {
            writeln!(out, "  l{i}:{} <= {:e}", fmt_row(row), h.as_f64())?;
        }
        writeln!(out, "bounds")?;
        for j in 0..self.num_vars() {
            writeln!(out, "  {:e} <= x{j} <= {:e}", self.lower[j].as_f64(), self.upper[j].as_f64())?;
        }
        writeln!(out, "end")
    }
}

/// Residuals of `x` against every constraint family of `problem`.
pub fn check_solution<T: Scalar>(problem: &LpProblem<T>, x: &[T]) -> Result<FeasibilityReport> {
    if x.len() != problem.num_vars() {
        return Err(Error::DimensionMismatch(format!(
            "{} values for {} variables",
            x.len(),
            problem.num_vars()
        )));
    }
    let dot = |row: &[T]| -> f64 { row.iter().zip(x).map(|(a, v)| a.as_f64() * v.as_f64()).sum() };
    let eq_residual = problem
        .eq_matrix
        .iter()
        .zip(&problem.eq_rhs)
        .map(|(row, b)| (dot(row) - b.as_f64()).abs())
        .fold(0.0, f64::max);
    let ineq_violation = problem
        .ineq_matrix
        .iter()
        .zip(&problem.ineq_rhs)
        .map(|(row, h)| (dot(row) - h.as_f64()).max(0.0))
        .fold(0.0, f64::max);
    let bound_violation = x
        .iter()
        .enumerate()
        .map(|(j, v)| {
            let v = v.as_f64();
            (problem.lower[j].as_f64() - v).max(v - problem.upper[j].as_f64()).max(0.0)
        })
        .fold(0.0, f64::max);
    Ok(FeasibilityReport {
        eq_residual,
        ineq_violation,
        bound_violation,
    })
}

#[derive(Debug, Clone, Copy)]
enum ColMap<T> {
    /// x = lo + col
    Shift { col: usize, lo: T },
    /// x = hi - col
    Mirror { col: usize, hi: T },
    /// x = pos - neg
    Split { pos: usize, neg: usize },
}

/// Smallest pivot accepted when removing a zero-valued artificial.
const DRIVE_OUT_TOL: f64 = 1e-7;
/// Largest leftover artificial, in units of the feasibility tolerance, that
/// still counts as feasible after phase 1.
const PHASE1_TOL_FACTOR: f64 = 100.0;
/// Pivots between recomputations of the basis inverse.
const REFACTOR_EVERY: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Basic,
    AtLower,
    AtUpper,
}

#[derive(Debug, Clone, Default)]
struct Column<T> {
    rows: Vec<usize>,
    vals: Vec<T>,
}

/// Bounded revised simplex over columns on `[0, u]`, keeping an explicit
/// dense basis inverse.
struct Revised<T> {
    m: usize,
    /// real columns (structural and slack) followed by one artificial per row
    cols: Vec<Column<T>>,
    n_real: usize,
    upper: Vec<T>,
    cost: Vec<T>,
    b: Vec<T>,
    state: Vec<State>,
    basis: Vec<usize>,
    /// row-major m x m
    binv: Vec<T>,
    xb: Vec<T>,
    pivot_tol: T,
    opt_tol: T,
    feas_tol: T,
    iterations: usize,
    since_refactor: usize,
}

enum Step {
    Optimal,
    Unbounded,
    Moved { degenerate: bool },
}

impl<T: Scalar> Revised<T> {
    fn is_artificial(&self, j: usize) -> bool {
        j >= self.n_real
    }

    fn nonbasic_value(&self, j: usize) -> T {
        match self.state[j] {
            State::AtUpper => self.upper[j],
            _ => T::zero(),
        }
    }

    /// Recomputes the basis inverse by Gauss-Jordan elimination and the
    /// basic values from scratch. A numerically singular basis keeps the
    /// previous inverse.
    fn refactor(&mut self) {
        let m = self.m;
        let mut a = vec![T::zero(); m * m];
        for (pos, &j) in self.basis.iter().enumerate() {
            let c = &self.cols[j];
            for (&r, &v) in c.rows.iter().zip(&c.vals) {
                a[r * m + pos] = v;
            }
        }
        let mut inv = vec![T::zero(); m * m];
        for i in 0..m {
            inv[i * m + i] = T::one();
        }
        let mut ok = true;
        for col in 0..m {
            let (mut p, mut best) = (col, T::zero());
            for r in col..m {
                let v = a[r * m + col].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best <= T::epsilon() {
                ok = false;
                break;
            }
            if p != col {
                for k in 0..m {
                    a.swap(p * m + k, col * m + k);
                    inv.swap(p * m + k, col * m + k);
                }
            }
            let d = T::one() / a[col * m + col];
            for k in 0..m {
                a[col * m + k] = a[col * m + k] * d;
                inv[col * m + k] = inv[col * m + k] * d;
            }
            for r in 0..m {
                if r == col {
                    continue;
                }
                let f = a[r * m + col];
                if f == T::zero() {
                    continue;
                }
                for k in 0..m {
                    a[r * m + k] = a[r * m + k] - f * a[col * m + k];
                    inv[r * m + k] = inv[r * m + k] - f * inv[col * m + k];
                }
            }
        }
        if ok {
            self.binv = inv;
        }
        let mut rhs = self.b.clone();
        for j in 0..self.cols.len() {
            if self.state[j] == State::AtUpper {
                let u = self.upper[j];
                let c = &self.cols[j];
                for (&r, &v) in c.rows.iter().zip(&c.vals) {
                    rhs[r] = rhs[r] - v * u;
                }
            }
        }
        for i in 0..m {
            let row = &self.binv[i * m..(i + 1) * m];
            self.xb[i] = row.iter().zip(&rhs).map(|(a, b)| *a * *b).sum();
        }
        self.since_refactor = 0;
    }

    /// `y = c_B^T B^-1`.
    fn duals(&self) -> Vec<T> {
        let m = self.m;
        let mut y = vec![T::zero(); m];
        for (pos, &j) in self.basis.iter().enumerate() {
            let c = self.cost[j];
            if c == T::zero() {
                continue;
            }
            let row = &self.binv[pos * m..(pos + 1) * m];
            for (yi, a) in y.iter_mut().zip(row) {
                *yi = *yi + c * *a;
            }
        }
        y
    }

    fn reduced_cost(&self, j: usize, y: &[T]) -> T {
        let c = &self.cols[j];
        let mut d = self.cost[j];
        for (&r, &v) in c.rows.iter().zip(&c.vals) {
            d = d - y[r] * v;
        }
        d
    }

    /// `B^-1 a_j`.
    fn ftran(&self, j: usize) -> Vec<T> {
        let m = self.m;
        let c = &self.cols[j];
        let mut alpha = vec![T::zero(); m];
        for (i, out) in alpha.iter_mut().enumerate() {
            let row = &self.binv[i * m..(i + 1) * m];
            let mut acc = T::zero();
            for (&r, &v) in c.rows.iter().zip(&c.vals) {
                acc = acc + row[r] * v;
            }
            *out = acc;
        }
        alpha
    }

    fn enterable(&self, j: usize) -> bool {
        self.state[j] != State::Basic && !self.is_artificial(j) && self.upper[j] > T::zero()
    }

    /// Entering column and direction (+1 increases from the lower bound,
    /// -1 decreases from the upper bound).
    fn choose_entering(&self, bland: bool, y: &[T]) -> Option<(usize, T)> {
        let mut best: Option<(usize, T, T)> = None;
        for j in 0..self.n_real {
            if !self.enterable(j) {
                continue;
            }
            let d = self.reduced_cost(j, y);
            let (score, dir) = match self.state[j] {
                State::AtLower if d < -self.opt_tol => (-d, T::one()),
                State::AtUpper if d > self.opt_tol => (d, -T::one()),
                _ => continue,
            };
            if bland {
                return Some((j, dir));
            }
            if best.is_none_or(|(_, s, _)| score > s) {
                best = Some((j, score, dir));
            }
        }
        best.map(|(j, _, dir)| (j, dir))
    }

    fn basic_upper(&self, pos: usize) -> T {
        self.upper[self.basis[pos]]
    }

    /// Step at which basis row `i` blocks, allowing `slack` bound overshoot;
    /// the flag tells whether the basic variable leaves at its upper bound.
    fn row_ratio(&self, i: usize, g: T, slack: T) -> Option<(T, bool)> {
        if g > self.pivot_tol {
            Some(((self.xb[i].max(T::zero()) + slack) / g, false))
        } else if g < -self.pivot_tol {
            let ub = self.basic_upper(i);
            if ub.is_infinite() {
                return None;
            }
            Some((((ub - self.xb[i]).max(T::zero()) + slack) / -g, true))
        } else {
            None
        }
    }

    /// Two-pass ratio test: bound the step with relaxed ratios, then take the
    /// largest pivot among rows blocking within that bound. In Bland mode the
    /// exact minimum ratio is used with lowest-index tie-breaking.
    fn ratio_test(&self, q: usize, g: &[T], bland: bool) -> (T, Option<(usize, bool)>) {
        let mut t_min = self.upper[q];
        let mut t_relaxed = T::infinity();
        for (i, &gi) in g.iter().enumerate() {
            if let Some((t, _)) = self.row_ratio(i, gi, T::zero()) {
                t_min = t_min.min(t);
            }
            if !bland {
                if let Some((t, _)) = self.row_ratio(i, gi, self.feas_tol) {
                    t_relaxed = t_relaxed.min(t);
                }
            }
        }
        if t_min.is_infinite() {
            return (t_min, None);
        }
        if t_min == self.upper[q] {
            // the bound flip blocks first and wins ties
            return (t_min, None);
        }
        let mut leave: Option<(usize, bool, T, T)> = None;
        for (i, &gi) in g.iter().enumerate() {
            let Some((t, at_upper)) = self.row_ratio(i, gi, T::zero()) else {
                continue;
            };
            let better = if bland {
                t == t_min && leave.is_none_or(|(r, ..)| self.basis[i] < self.basis[r])
            } else {
                t <= t_relaxed && leave.is_none_or(|(_, _, best, _)| gi.abs() > best)
            };
            if better {
                leave = Some((i, at_upper, gi.abs(), t));
            }
        }
        match leave {
            Some((r, at_upper, _, t)) => (t, Some((r, at_upper))),
            None => (t_min, None),
        }
    }

    /// Replaces basis position `r` by column `q`, whose transformed column
    /// is `alpha`, and sets `q`'s basic value to `value`.
    fn pivot(&mut self, r: usize, q: usize, alpha: &[T], value: T) {
        let m = self.m;
        let inv = T::one() / alpha[r];
        for v in &mut self.binv[r * m..(r + 1) * m] {
            *v = *v * inv;
        }
        let (before, rest) = self.binv.split_at_mut(r * m);
        let (pivot_row, after) = rest.split_at_mut(m);
        for (i, row) in before.chunks_mut(m).chain(after.chunks_mut(m)).enumerate() {
            let i = if i < r { i } else { i + 1 };
            let f = alpha[i];
            if f == T::zero() {
                continue;
            }
            for (a, p) in row.iter_mut().zip(pivot_row.iter()) {
                *a = *a - f * *p;
            }
        }
        self.basis[r] = q;
        self.state[q] = State::Basic;
        self.xb[r] = value;
        self.since_refactor += 1;
        if self.since_refactor >= REFACTOR_EVERY {
            self.refactor();
        }
    }

    fn step(&mut self, bland: bool) -> Step {
        let y = self.duals();
        let Some((q, dir)) = self.choose_entering(bland, &y) else {
            return Step::Optimal;
        };
        let alpha = self.ftran(q);
        let g: Vec<T> = alpha.iter().map(|a| *a * dir).collect();
        let (t, leave) = self.ratio_test(q, &g, bland);
        if t.is_infinite() {
            return Step::Unbounded;
        }
        self.iterations += 1;
        for (x, gi) in self.xb.iter_mut().zip(&g) {
            *x = *x - *gi * t;
        }
        let entering_value = self.nonbasic_value(q) + dir * t;
        match leave {
            None => {
                self.state[q] = match self.state[q] {
                    State::AtLower => State::AtUpper,
                    _ => State::AtLower,
                };
            }
            Some((r, at_upper)) => {
                let old = self.basis[r];
                self.state[old] = if at_upper { State::AtUpper } else { State::AtLower };
                self.pivot(r, q, &alpha, entering_value);
            }
        }
        Step::Moved {
            degenerate: t <= T::zero(),
        }
    }

    fn run(&mut self, opts: &SolverOptions) -> Option<LpStatus> {
        let mut degenerate_streak = 0usize;
        loop {
            if self.iterations >= opts.max_iters {
                return Some(LpStatus::IterationLimit);
            }
            let bland = degenerate_streak >= opts.bland_after;
            match self.step(bland) {
                Step::Optimal => return None,
                Step::Unbounded => return Some(LpStatus::Unbounded),
                Step::Moved { degenerate } => {
                    degenerate_streak = if degenerate { degenerate_streak + 1 } else { 0 };
                }
            }
        }
    }

    /// Pivots zero-valued artificials out of the basis where a usable pivot
    /// exists; rows without one are redundant and keep their artificial.
    fn drive_out_artificials(&mut self) {
        let m = self.m;
        for r in 0..m {
            if !self.is_artificial(self.basis[r]) {
                continue;
            }
            let rho = self.binv[r * m..(r + 1) * m].to_vec();
            let mut best: Option<(usize, T)> = None;
            for j in 0..self.n_real {
                if !self.enterable(j) {
                    continue;
                }
                let c = &self.cols[j];
                let a: T = c.rows.iter().zip(&c.vals).map(|(&i, &v)| rho[i] * v).sum();
                if a.abs() > T::of(DRIVE_OUT_TOL) && best.is_none_or(|(_, b)| a.abs() > b) {
                    best = Some((j, a.abs()));
                }
            }
            if let Some((j, _)) = best {
                let alpha = self.ftran(j);
                let old = self.basis[r];
                self.state[old] = State::AtLower;
                let value = self.nonbasic_value(j);
                self.pivot(r, j, &alpha, value);
            }
        }
        self.refactor();
    }

    fn column_values(&self) -> Vec<T> {
        let mut v: Vec<T> = (0..self.n_real).map(|j| self.nonbasic_value(j)).collect();
        for (pos, &j) in self.basis.iter().enumerate() {
            if j < self.n_real {
                v[j] = self.xb[pos];
            }
        }
        v
    }
}

/// Solves `problem` with the two-phase bounded primal simplex.
///
/// Infeasibility, unboundedness and the iteration cap are reported through
/// [`LpSolution::status`]; only a malformed problem is an error.
pub fn solve_lp<T: Scalar>(problem: &LpProblem<T>, opts: &SolverOptions) -> Result<LpSolution<T>> {
    problem.validate()?;
    let n = problem.num_vars();

    // variable substitution
    let mut maps = Vec::with_capacity(n);
    let mut upper: Vec<T> = Vec::new();
    for j in 0..n {
        let (lo, hi) = (problem.lower[j], problem.upper[j]);
        let col = upper.len();
        if lo.is_finite() {
            maps.push(ColMap::Shift { col, lo });
            upper.push(hi - lo);
        } else if hi.is_finite() {
            maps.push(ColMap::Mirror { col, hi });
            upper.push(T::infinity());
        } else {
            maps.push(ColMap::Split { pos: col, neg: col + 1 });
            upper.push(T::infinity());
            upper.push(T::infinity());
        }
    }
    let n_struct = upper.len();
    let m_eq = problem.eq_matrix.len();
    let m = m_eq + problem.ineq_matrix.len();
    let n_real = n_struct + (m - m_eq);
    upper.extend(std::iter::repeat_n(T::infinity(), m - m_eq));
    upper.extend(std::iter::repeat_n(T::infinity(), m));

    let mut cols: Vec<Column<T>> = vec![Column::default(); n_real + m];
    let mut b = vec![T::zero(); m];
    let mut basis = vec![0usize; m];
    let rows = problem
        .eq_matrix
        .iter()
        .zip(&problem.eq_rhs)
        .chain(problem.ineq_matrix.iter().zip(&problem.ineq_rhs));
    for (i, (row, &rhs0)) in rows.enumerate() {
        let mut entries: Vec<(usize, T)> = Vec::new();
        let mut rhs = rhs0;
        for (j, &a) in row.iter().enumerate() {
            if a == T::zero() {
                continue;
            }
            match maps[j] {
                ColMap::Shift { col, lo } => {
                    entries.push((col, a));
                    rhs = rhs - a * lo;
                }
                ColMap::Mirror { col, hi } => {
                    entries.push((col, -a));
                    rhs = rhs - a * hi;
                }
                ColMap::Split { pos, neg } => {
                    entries.push((pos, a));
                    entries.push((neg, -a));
                }
            }
        }
        let slack = (i >= m_eq).then(|| n_struct + (i - m_eq));
        if let Some(s) = slack {
            entries.push((s, T::one()));
        }
        let flip = rhs < T::zero();
        if flip {
            rhs = -rhs;
        }
        for (col, a) in entries {
            cols[col].rows.push(i);
            cols[col].vals.push(if flip { -a } else { a });
        }
        cols[n_real + i].rows.push(i);
        cols[n_real + i].vals.push(T::one());
        basis[i] = match slack {
            Some(s) if !flip => s,
            _ => n_real + i,
        };
        b[i] = rhs;
    }

    let mut costs = vec![T::zero(); n_real + m];
    for j in 0..n {
        let c = problem.objective[j];
        match maps[j] {
            ColMap::Shift { col, .. } => costs[col] = c,
            ColMap::Mirror { col, .. } => costs[col] = -c,
            ColMap::Split { pos, neg } => {
                costs[pos] = c;
                costs[neg] = -c;
            }
        }
    }

    let mut state = vec![State::AtLower; n_real + m];
    for &j in &basis {
        state[j] = State::Basic;
    }
    let mut binv = vec![T::zero(); m * m];
    for i in 0..m {
        binv[i * m + i] = T::one();
    }
    let tol_floor = T::epsilon() * T::of(100.0);
    let mut lp = Revised {
        m,
        cols,
        n_real,
        upper,
        cost: vec![T::zero(); n_real + m],
        xb: b.clone(),
        b,
        state,
        basis,
        binv,
        pivot_tol: T::of(opts.pivot_tol),
        opt_tol: T::of(opts.feas_tol).max(tol_floor),
        feas_tol: T::of(opts.feas_tol).max(tol_floor),
        iterations: 0,
        since_refactor: 0,
    };

    let recover = |lp: &Revised<T>| -> Vec<T> {
        let v = lp.column_values();
        maps.iter()
            .map(|m| match *m {
                ColMap::Shift { col, lo } => lo + v[col],
                ColMap::Mirror { col, hi } => hi - v[col],
                ColMap::Split { pos, neg } => v[pos] - v[neg],
            })
            .collect()
    };
    let finish = |lp: &Revised<T>, status: LpStatus| -> LpSolution<T> {
        let x = recover(lp);
        let objective_value = problem.objective.iter().zip(&x).map(|(c, v)| *c * *v).sum();
        LpSolution {
            status,
            x,
            objective_value,
            iterations: lp.iterations,
        }
    };

    // phase 1: minimize the sum of artificials
    if lp.basis.iter().any(|&j| j >= n_real) {
        for i in 0..m {
            lp.cost[n_real + i] = T::one();
        }
        if let Some(LpStatus::IterationLimit) = lp.run(opts) {
            return Ok(finish(&lp, LpStatus::IterationLimit));
        }
        lp.refactor();
        let scale = lp.b.iter().fold(1.0f64, |acc, v| acc.max(v.as_f64().abs()));
        let infeasibility = (0..m)
            .filter(|&i| lp.basis[i] >= n_real)
            .map(|i| lp.xb[i].as_f64().abs())
            .fold(0.0, f64::max);
        if infeasibility > PHASE1_TOL_FACTOR * lp.feas_tol.as_f64() * scale {
            return Ok(finish(&lp, LpStatus::Infeasible));
        }
        lp.drive_out_artificials();
    }

    // phase 2: artificials left in the basis are pinned at zero
    for i in 0..m {
        lp.upper[n_real + i] = T::zero();
    }
    lp.cost = costs;
    let status = lp.run(opts).unwrap_or(LpStatus::Optimal);
    lp.refactor();
    Ok(finish(&lp, status))
}

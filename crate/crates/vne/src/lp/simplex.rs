//! Bounded-variable two-phase revised simplex with an explicit basis inverse.
//!
//! Rows `a·x <= b` get one slack each; infeasible starting rows get a phase-1
//! artificial. The pivot rule is largest reduced cost with lowest-index tie
//! breaks, falling back to Bland's rule while a degeneracy streak lasts. Rows
//! and columns are equilibrated to powers of two before solving and every
//! quantity is unscaled on the way out.

use super::{LpProblem, LpSolution, SolverOptions, Status};

const PIVOT_EPS: f64 = 1e-9;
const DEGEN_EPS: f64 = 1e-10;
const RATIO_TIE_EPS: f64 = 1e-9;
const REFACTOR_EVERY: usize = 64;
/// Consecutive degenerate pivots before switching to Bland's rule.
const CYCLE_TRIGGER: usize = 40;

pub fn solve_lp(p: &LpProblem) -> LpSolution {
    solve_lp_with(p, &SolverOptions::default())
}

pub fn solve_lp_with(p: &LpProblem, opts: &SolverOptions) -> LpSolution {
    debug_assert!(p.validate().is_ok(), "{:?}", p.validate());
    Workspace::build(p, opts).run(p)
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum VarState {
    Basic,
    AtLower,
    AtUpper,
}

enum RatioHit {
    /// Entering variable reaches its own opposite bound.
    Flip,
    /// Basic variable in this row reaches a bound (`true` = upper).
    Leave(usize, bool),
    Unbounded,
}

struct Workspace {
    m: usize,
    n: usize,
    /// Structural columns, scaled, column-major.
    cols: Vec<Vec<(usize, f64)>>,
    b: Vec<f64>,
    /// Scaled objective over structural variables.
    cost: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    row_scale: Vec<f64>,
    col_scale: Vec<f64>,
    /// Row index backing each artificial variable.
    art_rows: Vec<usize>,

    state: Vec<VarState>,
    xs: Vec<f64>,
    basis: Vec<usize>,
    binv: Vec<f64>,

    iterations: usize,
    pivots_since_refactor: usize,
    degen_streak: usize,
    bland: bool,
    max_iters: usize,
    tol_entering: f64,
}

impl Workspace {
    fn build(p: &LpProblem, opts: &SolverOptions) -> Workspace {
        let n = p.num_vars();
        let m = p.num_rows();

        let mut row_scale = vec![1.0f64; m];
        let mut col_scale = vec![1.0f64; n];
        if opts.scale {
            for (i, row) in p.rows.iter().enumerate() {
                let mx = row.coeffs.iter().fold(0.0f64, |acc, &(_, a)| acc.max(a.abs()));
                if mx > 0.0 {
                    row_scale[i] = pow2_near(1.0 / mx);
                }
            }
            let mut col_max = vec![0.0f64; n];
            for (i, row) in p.rows.iter().enumerate() {
                for &(j, a) in &row.coeffs {
                    col_max[j] = col_max[j].max((row_scale[i] * a).abs());
                }
            }
            for j in 0..n {
                if col_max[j] > 0.0 {
                    col_scale[j] = pow2_near(1.0 / col_max[j]);
                }
            }
        }

        let mut cols = vec![Vec::new(); n];
        for (i, row) in p.rows.iter().enumerate() {
            for &(j, a) in &row.coeffs {
                let v = a * row_scale[i] * col_scale[j];
                if v != 0.0 {
                    cols[j].push((i, v));
                }
            }
        }
        let b: Vec<f64> = p.rows.iter().zip(&row_scale).map(|(r, s)| r.rhs * s).collect();
        let cost: Vec<f64> = p.cost.iter().zip(&col_scale).map(|(c, s)| c * s).collect();
        // x = col_scale * x', so the scaled bounds divide by col_scale.
        let mut lo: Vec<f64> = p.bounds.iter().zip(&col_scale).map(|(bd, s)| bd.0 / s).collect();
        let mut hi: Vec<f64> = p.bounds.iter().zip(&col_scale).map(|(bd, s)| bd.1 / s).collect();
        lo.extend(std::iter::repeat(0.0).take(m));
        hi.extend(std::iter::repeat(f64::INFINITY).take(m));

        let max_iters = opts.max_iters.unwrap_or(200 + 50 * (n + m));
        let cost_mag = cost.iter().fold(1.0f64, |acc, c| acc.max(c.abs()));
        Workspace {
            m,
            n,
            cols,
            b,
            cost,
            lo,
            hi,
            row_scale,
            col_scale,
            art_rows: Vec::new(),
            state: Vec::new(),
            xs: Vec::new(),
            basis: Vec::new(),
            binv: Vec::new(),
            iterations: 0,
            pivots_since_refactor: 0,
            degen_streak: 0,
            bland: false,
            max_iters,
            tol_entering: 1e-9 * cost_mag,
        }
    }

    fn num_vars_total(&self) -> usize {
        self.n + self.m + self.art_rows.len()
    }

    fn var_column(&self, j: usize) -> VarColumn<'_> {
        if j < self.n {
            VarColumn::Structural(&self.cols[j])
        } else if j < self.n + self.m {
            VarColumn::Unit(j - self.n, 1.0)
        } else {
            VarColumn::Unit(self.art_rows[j - self.n - self.m], -1.0)
        }
    }

    fn run(mut self, p: &LpProblem) -> LpSolution {
        self.init_basis();

        if !self.art_rows.is_empty() {
            // Phase 1: drive the artificial variables to zero.
            let mut c1 = vec![0.0; self.num_vars_total()];
            for k in 0..self.art_rows.len() {
                c1[self.n + self.m + k] = -1.0;
            }
            match self.iterate(&c1) {
                IterEnd::Optimal => {}
                IterEnd::Unbounded => unreachable!("phase-1 objective is bounded above by zero"),
                IterEnd::IterLimit => return self.extract(p, Status::IterationLimit),
            }
            let infeas: f64 = self
                .art_rows
                .iter()
                .enumerate()
                .map(|(k, _)| self.xs[self.n + self.m + k])
                .sum();
            let b_mag = self.b.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
            if infeas > 10.0 * 1e-9 * b_mag + 1e-9 {
                return self.extract(p, Status::Infeasible);
            }
            // Pin eliminated artificials so they can never re-enter.
            for k in 0..self.art_rows.len() {
                let j = self.n + self.m + k;
                self.lo[j] = 0.0;
                self.hi[j] = 0.0;
                self.xs[j] = 0.0;
            }
            self.degen_streak = 0;
            self.bland = false;
        }

        let mut c2 = vec![0.0; self.num_vars_total()];
        c2[..self.n].copy_from_slice(&self.cost);
        let status = match self.iterate(&c2) {
            IterEnd::Optimal => Status::Optimal,
            IterEnd::Unbounded => Status::Unbounded,
            IterEnd::IterLimit => Status::IterationLimit,
        };
        self.extract(p, status)
    }

    fn init_basis(&mut self) {
        let (n, m) = (self.n, self.m);
        self.state = Vec::with_capacity(n + m);
        self.xs = Vec::with_capacity(n + m);
        for j in 0..n {
            if self.lo[j].is_finite() {
                self.state.push(VarState::AtLower);
                self.xs.push(self.lo[j]);
            } else {
                self.state.push(VarState::AtUpper);
                self.xs.push(self.hi[j]);
            }
        }

        // Slack values at the initial nonbasic point.
        let mut slack = self.b.clone();
        for j in 0..n {
            let v = self.xs[j];
            if v != 0.0 {
                for &(i, a) in &self.cols[j] {
                    slack[i] -= a * v;
                }
            }
        }

        self.basis = Vec::with_capacity(m);
        self.binv = vec![0.0; m * m];
        for i in 0..m {
            if slack[i] >= 0.0 {
                self.basis.push(n + i);
                self.state.push(VarState::Basic);
                self.xs.push(slack[i]);
                self.binv[i * m + i] = 1.0;
            } else {
                // Slack sits nonbasic at zero; an artificial covers the gap.
                self.state.push(VarState::AtLower);
                self.xs.push(0.0);
                self.binv[i * m + i] = -1.0;
                self.art_rows.push(i);
                self.basis.push(n + m + self.art_rows.len() - 1);
            }
        }
        let deficits: Vec<f64> = self.art_rows.iter().map(|&i| -slack[i]).collect();
        for v in deficits {
            self.lo.push(0.0);
            self.hi.push(f64::INFINITY);
            self.state.push(VarState::Basic);
            self.xs.push(v);
        }
    }

    fn iterate(&mut self, cost: &[f64]) -> IterEnd {
        loop {
            if self.iterations >= self.max_iters {
                return IterEnd::IterLimit;
            }
            if self.pivots_since_refactor >= REFACTOR_EVERY {
                self.refactor();
            }

            let y = self.duals_for(cost);
            let Some((j, dir)) = self.choose_entering(cost, &y) else {
                return IterEnd::Optimal;
            };

            let w = self.ftran(j);
            let (t, hit) = self.ratio_test(j, dir, &w);
            match hit {
                RatioHit::Unbounded => return IterEnd::Unbounded,
                RatioHit::Flip => {
                    let delta = dir * t;
                    for r in 0..self.m {
                        if w[r] != 0.0 {
                            let k = self.basis[r];
                            self.xs[k] -= delta * w[r];
                        }
                    }
                    self.xs[j] += delta;
                    self.state[j] = if dir > 0.0 { VarState::AtUpper } else { VarState::AtLower };
                    // Snap to the exact bound to stop drift.
                    self.xs[j] = if dir > 0.0 { self.hi[j] } else { self.lo[j] };
                }
                RatioHit::Leave(r, to_upper) => {
                    let delta = dir * t;
                    for rr in 0..self.m {
                        if rr != r && w[rr] != 0.0 {
                            let k = self.basis[rr];
                            self.xs[k] -= delta * w[rr];
                        }
                    }
                    let leaving = self.basis[r];
                    self.xs[leaving] = if to_upper { self.hi[leaving] } else { self.lo[leaving] };
                    self.state[leaving] = if to_upper { VarState::AtUpper } else { VarState::AtLower };
                    self.xs[j] += delta;
                    self.state[j] = VarState::Basic;
                    self.basis[r] = j;
                    self.update_binv(r, &w);
                    self.pivots_since_refactor += 1;
                }
            }

            self.iterations += 1;
            if t <= DEGEN_EPS {
                self.degen_streak += 1;
                if self.degen_streak >= CYCLE_TRIGGER {
                    self.bland = true;
                }
            } else {
                self.degen_streak = 0;
                self.bland = false;
            }
        }
    }

    /// y = c_B B^{-1}.
    fn duals_for(&self, cost: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for r in 0..m {
            let cb = cost[self.basis[r]];
            if cb != 0.0 {
                let row = &self.binv[r * m..(r + 1) * m];
                for i in 0..m {
                    y[i] += cb * row[i];
                }
            }
        }
        y
    }

    fn reduced_cost(&self, j: usize, cost: &[f64], y: &[f64]) -> f64 {
        let mut d = cost[j];
        match self.var_column(j) {
            VarColumn::Structural(col) => {
                for &(i, a) in col {
                    d -= a * y[i];
                }
            }
            VarColumn::Unit(i, s) => d -= s * y[i],
        }
        d
    }

    /// Entering variable and its direction (+1 rising from lower, -1 falling
    /// from upper). Largest |reduced cost| wins, lowest index on ties; under
    /// Bland's rule, lowest eligible index wins outright.
    fn choose_entering(&self, cost: &[f64], y: &[f64]) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.num_vars_total() {
            match self.state[j] {
                VarState::Basic => continue,
                _ if self.lo[j] >= self.hi[j] => continue, // fixed
                VarState::AtLower => {
                    let d = self.reduced_cost(j, cost, y);
                    if d > self.tol_entering {
                        if self.bland {
                            return Some((j, 1.0));
                        }
                        if best.map_or(true, |(_, _, bd)| d > bd) {
                            best = Some((j, 1.0, d));
                        }
                    }
                }
                VarState::AtUpper => {
                    let d = self.reduced_cost(j, cost, y);
                    if d < -self.tol_entering {
                        if self.bland {
                            return Some((j, -1.0));
                        }
                        if best.map_or(true, |(_, _, bd)| -d > bd) {
                            best = Some((j, -1.0, -d));
                        }
                    }
                }
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    /// w = B^{-1} A_j.
    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut w = vec![0.0; m];
        match self.var_column(j) {
            VarColumn::Structural(col) => {
                for &(i, a) in col {
                    for r in 0..m {
                        w[r] += self.binv[r * m + i] * a;
                    }
                }
            }
            VarColumn::Unit(i, s) => {
                for r in 0..m {
                    w[r] = self.binv[r * m + i] * s;
                }
            }
        }
        w
    }

    fn ratio_test(&self, j: usize, dir: f64, w: &[f64]) -> (f64, RatioHit) {
        let span = self.hi[j] - self.lo[j];
        let mut t_best = span;
        let mut hit = if span.is_finite() { RatioHit::Flip } else { RatioHit::Unbounded };
        let mut best_pivot = 0.0f64;

        for r in 0..self.m {
            if w[r].abs() <= PIVOT_EPS {
                continue;
            }
            let k = self.basis[r];
            let delta = dir * w[r];
            let (cap, to_upper) = if delta > 0.0 {
                ((self.xs[k] - self.lo[k]).max(0.0) / delta, false)
            } else {
                if self.hi[k].is_infinite() {
                    continue;
                }
                ((self.hi[k] - self.xs[k]).max(0.0) / -delta, true)
            };
            let tie = (cap - t_best).abs() <= RATIO_TIE_EPS * (1.0 + t_best.abs());
            let better = cap < t_best && !tie;
            let wins_tie = tie
                && match hit {
                    RatioHit::Leave(r0, _) => {
                        if self.bland {
                            self.basis[r] < self.basis[r0]
                        } else {
                            w[r].abs() > best_pivot
                        }
                    }
                    // Prefer an honest pivot over a same-length bound flip.
                    _ => w[r].abs() > best_pivot || matches!(hit, RatioHit::Unbounded),
                };
            if better || wins_tie {
                t_best = t_best.min(cap);
                hit = RatioHit::Leave(r, to_upper);
                best_pivot = w[r].abs();
            }
        }

        if let RatioHit::Unbounded = hit {
            return (f64::INFINITY, RatioHit::Unbounded);
        }
        (t_best.max(0.0), hit)
    }

    fn update_binv(&mut self, r: usize, w: &[f64]) {
        let m = self.m;
        let piv = w[r];
        for i in 0..m {
            self.binv[r * m + i] /= piv;
        }
        let pivot_row = self.binv[r * m..(r + 1) * m].to_vec();
        for rr in 0..m {
            if rr == r || w[rr] == 0.0 {
                continue;
            }
            let f = w[rr];
            let row = &mut self.binv[rr * m..(rr + 1) * m];
            for i in 0..m {
                row[i] -= f * pivot_row[i];
            }
        }
    }

    /// Rebuild the inverse and the basic values from scratch.
    fn refactor(&mut self) {
        let m = self.m;
        self.pivots_since_refactor = 0;
        if m == 0 {
            return;
        }
        // Dense Gauss-Jordan on [B | I].
        let mut a = vec![0.0; m * m];
        for (r, &k) in self.basis.iter().enumerate() {
            match self.var_column(k) {
                VarColumn::Structural(col) => {
                    for &(i, v) in col {
                        a[i * m + r] = v;
                    }
                }
                VarColumn::Unit(i, s) => a[i * m + r] = s,
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for col in 0..m {
            let mut piv_row = col;
            let mut piv_val = a[col * m + col].abs();
            for r in col + 1..m {
                if a[r * m + col].abs() > piv_val {
                    piv_val = a[r * m + col].abs();
                    piv_row = r;
                }
            }
            if piv_val < 1e-12 {
                // Numerically singular basis; keep the current inverse rather
                // than replace it with garbage.
                log::warn!("singular basis during refactorization (col {col})");
                return;
            }
            if piv_row != col {
                for i in 0..m {
                    a.swap(col * m + i, piv_row * m + i);
                    inv.swap(col * m + i, piv_row * m + i);
                }
            }
            let p = a[col * m + col];
            for i in 0..m {
                a[col * m + i] /= p;
                inv[col * m + i] /= p;
            }
            for r in 0..m {
                if r != col {
                    let f = a[r * m + col];
                    if f != 0.0 {
                        for i in 0..m {
                            a[r * m + i] -= f * a[col * m + i];
                            inv[r * m + i] -= f * inv[col * m + i];
                        }
                    }
                }
            }
        }
        self.binv = inv;
        self.recompute_basics();
    }

    fn recompute_basics(&mut self) {
        let m = self.m;
        let mut rhs = self.b.clone();
        for j in 0..self.num_vars_total() {
            if self.state[j] == VarState::Basic {
                continue;
            }
            let v = self.xs[j];
            if v == 0.0 {
                continue;
            }
            match self.var_column(j) {
                VarColumn::Structural(col) => {
                    for &(i, a) in col {
                        rhs[i] -= a * v;
                    }
                }
                VarColumn::Unit(i, s) => rhs[i] -= s * v,
            }
        }
        for r in 0..m {
            let mut v = 0.0;
            for i in 0..m {
                v += self.binv[r * m + i] * rhs[i];
            }
            self.xs[self.basis[r]] = v;
        }
    }

    fn extract(mut self, p: &LpProblem, status: Status) -> LpSolution {
        if status == Status::Optimal {
            self.refactor(); // one clean recomputation before reporting
        }
        let mut x = vec![0.0; self.n];
        for j in 0..self.n {
            x[j] = self.xs[j] * self.col_scale[j];
            let (lo, hi) = p.bounds[j];
            x[j] = x[j].clamp(lo, hi);
        }
        let objective = p.objective_value(&x);

        let mut c2 = vec![0.0; self.num_vars_total()];
        c2[..self.n].copy_from_slice(&self.cost);
        let y = self.duals_for(&c2);
        let duals: Vec<f64> = y
            .iter()
            .zip(&self.row_scale)
            .map(|(v, s)| (v * s).max(0.0))
            .collect();

        LpSolution {
            status,
            x,
            objective,
            duals,
            iterations: self.iterations,
        }
    }
}

enum VarColumn<'a> {
    Structural(&'a [(usize, f64)]),
    /// Single entry `(row, sign)` - slacks and artificials.
    Unit(usize, f64),
}

enum IterEnd {
    Optimal,
    Unbounded,
    IterLimit,
}

fn pow2_near(v: f64) -> f64 {
    if v <= 0.0 || !v.is_finite() {
        return 1.0;
    }
    (v.log2().round()).exp2()
}

//! Linear and small-scale binary integer programming with dual extraction.
//!
//! Problems are maximization over `c·x` subject to sparse inequality rows
//! `a·x <= rhs` and per-variable bounds (default `[0, 1]`). The solver is a
//! bounded-variable two-phase revised simplex that returns the row dual
//! multipliers alongside the primal point; `solve_ilp` wraps it in a
//! best-bound branch and bound for the binary variables, and
//! `brute_force_binary` enumerates small all-binary instances as an
//! independent cross-check.
//!
//! Every solve starts cold; warm-starting the basis across the repeated
//! solves of a decomposition run is future work, as are interior-point
//! methods and general mixed-integer cuts.

mod branch;
mod simplex;

pub use branch::{brute_force_binary, solve_ilp, solve_ilp_with};
pub use simplex::{solve_lp, solve_lp_with};

use std::fmt;

/// One inequality row `coeffs · x <= rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

/// A maximization program over bounded variables with `<=` rows.
#[derive(Debug, Clone, Default)]
pub struct LpProblem {
    /// Objective coefficients; the sense is always maximize.
    pub cost: Vec<f64>,
    pub rows: Vec<Row>,
    /// Inclusive (lower, upper) bounds per variable.
    pub bounds: Vec<(f64, f64)>,
    /// Variables required to take integral values by `solve_ilp`.
    pub integral: Vec<bool>,
    /// One label per row naming the model constraint it encodes.
    pub row_labels: Vec<String>,
}

impl LpProblem {
    /// A program with `n` variables, zero cost and default `[0, 1]` bounds.
    pub fn new(n: usize) -> Self {
        LpProblem {
            cost: vec![0.0; n],
            rows: Vec::new(),
            bounds: vec![(0.0, 1.0); n],
            integral: vec![false; n],
            row_labels: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    /// Appends `coeffs · x <= rhs`; returns the row index.
    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64, label: impl Into<String>) -> usize {
        self.rows.push(Row { coeffs, rhs });
        self.row_labels.push(label.into());
        self.rows.len() - 1
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.cost.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    pub fn row_activity(&self, row: usize, x: &[f64]) -> f64 {
        self.rows[row].coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Structural consistency: dimensions, ordered finite bounds, finite rhs.
    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        if self.bounds.len() != n || self.integral.len() != n {
            return Err(LpError::Shape("bounds/integral length != cost length".into()));
        }
        if self.row_labels.len() != self.rows.len() {
            return Err(LpError::Shape("row_labels length != rows length".into()));
        }
        for (j, &(lo, hi)) in self.bounds.iter().enumerate() {
            if lo.is_nan() || hi.is_nan() || (lo == f64::NEG_INFINITY && hi == f64::INFINITY) {
                return Err(LpError::Shape(format!("variable {j} must have a finite bound")));
            }
            if lo > hi {
                return Err(LpError::Shape(format!("variable {j} has lo > hi")));
            }
        }
        for (i, row) in self.rows.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(LpError::Shape(format!("row {i} has non-finite rhs")));
            }
            for &(j, a) in &row.coeffs {
                if j >= n {
                    return Err(LpError::Shape(format!("row {i} references variable {j} >= {n}")));
                }
                if !a.is_finite() {
                    return Err(LpError::Shape(format!("row {i} has non-finite coefficient")));
                }
            }
        }
        Ok(())
    }

    /// Renders the program in CPLEX LP text format for external cross-checks.
    pub fn to_lp_format(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        out.push_str("Maximize\n obj:");
        for (j, &c) in self.cost.iter().enumerate() {
            if c != 0.0 {
                let _ = write!(out, " {} {} x{}", if c < 0.0 { "-" } else { "+" }, c.abs(), j);
            }
        }
        out.push_str("\nSubject To\n");
        for (i, row) in self.rows.iter().enumerate() {
            let _ = write!(out, " r{i}:");
            for &(j, a) in &row.coeffs {
                let _ = write!(out, " {} {} x{}", if a < 0.0 { "-" } else { "+" }, a.abs(), j);
            }
            let _ = writeln!(out, " <= {}  \\ {}", row.rhs, self.row_labels[i]);
        }
        out.push_str("Bounds\n");
        for (j, &(lo, hi)) in self.bounds.iter().enumerate() {
            let _ = writeln!(out, " {lo} <= x{j} <= {hi}");
        }
        let binaries: Vec<usize> = (0..self.num_vars()).filter(|&j| self.integral[j]).collect();
        if !binaries.is_empty() {
            out.push_str("Binaries\n");
            for j in binaries {
                let _ = writeln!(out, " x{j}");
            }
        }
        out.push_str("End\n");
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    /// Simplex pivot cap reached before optimality.
    IterationLimit,
    /// Branch-and-bound node cap reached; the solution is the best incumbent.
    NodeLimit,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Status::Optimal => "optimal",
            Status::Infeasible => "infeasible",
            Status::Unbounded => "unbounded",
            Status::IterationLimit => "iteration-limit",
            Status::NodeLimit => "node-limit",
        };
        f.write_str(s)
    }
}

/// Result of an LP/ILP solve. `x`, `objective` and `duals` are meaningful
/// when `status` is `Optimal` (or `NodeLimit` with an incumbent).
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: Status,
    pub x: Vec<f64>,
    pub objective: f64,
    /// One nonnegative multiplier per `<=` row.
    pub duals: Vec<f64>,
    pub iterations: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }

    /// KKT checks against `p`: primal feasibility, dual sign, complementary
    /// slackness and the strong-duality identity
    /// `c·x = b·λ + Σ_j d_j · (bound hit by x_j)` with `d = c − Aᵀλ`.
    pub fn verify(&self, p: &LpProblem, opts: &SolverOptions) -> Result<(), String> {
        if self.status != Status::Optimal {
            return Err(format!("not optimal: {}", self.status));
        }
        let scale = 1.0 + p.cost.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        for (j, &(lo, hi)) in p.bounds.iter().enumerate() {
            if self.x[j] < lo - opts.tol_feas || self.x[j] > hi + opts.tol_feas {
                return Err(format!("x{j}={} outside [{lo},{hi}]", self.x[j]));
            }
        }
        let mut row_norm = vec![1.0f64; p.num_rows()];
        for (i, row) in p.rows.iter().enumerate() {
            for &(_, a) in &row.coeffs {
                row_norm[i] = row_norm[i].max(a.abs());
            }
            row_norm[i] = row_norm[i].max(row.rhs.abs());
        }
        for i in 0..p.num_rows() {
            let act = p.row_activity(i, &self.x);
            if act > p.rows[i].rhs + opts.tol_feas * row_norm[i] {
                return Err(format!(
                    "row {i} ({}) violated: {act} > {}",
                    p.row_labels[i], p.rows[i].rhs
                ));
            }
            if self.duals[i] < -opts.tol_cs {
                return Err(format!("dual {i} negative: {}", self.duals[i]));
            }
            let slack = p.rows[i].rhs - act;
            if self.duals[i] * slack > opts.tol_cs * scale * row_norm[i] {
                return Err(format!(
                    "complementary slackness broken on row {i}: lambda={} slack={slack}",
                    self.duals[i]
                ));
            }
        }
        // Reduced costs decide which bound each variable sits at; their
        // bound contributions close the duality gap.
        let mut dual_obj: f64 = p.rows.iter().zip(&self.duals).map(|(r, l)| r.rhs * l).sum();
        let mut reduced = p.cost.clone();
        for (row, &lambda) in p.rows.iter().zip(&self.duals) {
            for &(j, a) in &row.coeffs {
                reduced[j] -= a * lambda;
            }
        }
        for (j, &d) in reduced.iter().enumerate() {
            let (lo, hi) = p.bounds[j];
            dual_obj += if d > 0.0 { d * hi } else { d * lo };
            // A positive reduced cost must pin x_j to its upper bound and a
            // negative one to its lower bound.
            let off = if d > opts.tol_cs * scale {
                hi - self.x[j]
            } else if d < -opts.tol_cs * scale {
                self.x[j] - lo
            } else {
                0.0
            };
            if d.abs() * off > opts.tol_cs * scale * (1.0 + hi.abs().max(lo.abs())) {
                return Err(format!("reduced-cost condition broken on x{j}: d={d} x={}", self.x[j]));
            }
        }
        let gap = (self.objective - dual_obj).abs();
        if gap > opts.tol_gap * scale * (1.0 + self.objective.abs()) {
            return Err(format!(
                "duality gap {gap} (primal {} vs dual {dual_obj})",
                self.objective
            ));
        }
        Ok(())
    }
}

/// Solver tolerances and caps. All defaults refer to equilibrated data.
#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub tol_feas: f64,
    pub tol_cs: f64,
    pub tol_gap: f64,
    /// Simplex pivot cap; `None` derives one from the problem size.
    pub max_iters: Option<usize>,
    /// Equilibrate rows and columns to unit max-norm before solving.
    pub scale: bool,
    /// Branch-and-bound node cap.
    pub node_limit: usize,
    /// Integrality tolerance for branching decisions.
    pub tol_int: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol_feas: 1e-7,
            tol_cs: 1e-6,
            tol_gap: 1e-6,
            max_iters: None,
            scale: true,
            node_limit: 200_000,
            tol_int: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LpError {
    /// Structurally malformed problem.
    Shape(String),
    /// Instance outside an operation's stated domain (e.g. brute-force caps).
    Unsupported(String),
}

impl fmt::Display for LpError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LpError::Shape(s) => write!(f, "malformed problem: {s}"),
            LpError::Unsupported(s) => write!(f, "unsupported instance: {s}"),
        }
    }
}

impl std::error::Error for LpError {}

//! Per-iteration records shared by both decomposition drivers.

use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algo {
    Monolithic,
    Primal,
    Dual,
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Algo::Monolithic => f.write_str("monolithic"),
            Algo::Primal => f.write_str("primal"),
            Algo::Dual => f.write_str("dual"),
        }
    }
}

/// Master step-size schedule, evaluated at iteration `t >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepRule {
    /// The 0.5/t diminishing rule.
    #[default]
    Diminishing,
    /// Constant step `a`.
    Constant { a: f64 },
    /// Square-summable `c/t`.
    OverT { c: f64 },
    /// `(value - target) / |g|^2`; needs the optimal value as target.
    Polyak { target: f64 },
}

impl StepRule {
    /// `gap_to_target` and `g_norm2` only matter for the Polyak rule.
    pub fn alpha(&self, t: usize, gap_to_target: f64, g_norm2: f64) -> f64 {
        match self {
            StepRule::Diminishing => 0.5 / t as f64,
            StepRule::Constant { a } => *a,
            StepRule::OverT { c } => c / t as f64,
            StepRule::Polyak { .. } => {
                if g_norm2 > 0.0 {
                    (gap_to_target.max(0.0) / g_norm2).max(1e-12)
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    pub max_iters: usize,
    /// Stop once `gap <= rel_gap * (1 + |reference|)`, when a reference
    /// optimum is available.
    pub rel_gap: Option<f64>,
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule { max_iters: 100, rel_gap: None }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TraceRow {
    pub t: usize,
    pub alpha: f64,
    /// `phi_sum` for primal runs, `q_lambda` for dual runs.
    pub value: f64,
    /// Best feasible (primal) objective known at this iterate.
    pub best_primal: f64,
    /// Distance of the running best from the reference optimum.
    pub gap: f64,
    pub g_norm: f64,
    pub msgs_cum: usize,
}

#[derive(Debug, Clone)]
pub struct IterateTrace {
    pub algo: Algo,
    pub rows: Vec<TraceRow>,
    /// Coupled-LP optimum when computed up front.
    pub reference: Option<f64>,
    /// True when a gap-based stop fired before the iteration cap.
    pub converged: bool,
}

impl IterateTrace {
    pub fn new(algo: Algo, reference: Option<f64>) -> Self {
        IterateTrace { algo, rows: Vec::new(), reference, converged: false }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn final_gap(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| r.gap)
    }

    pub fn best_gap(&self) -> f64 {
        self.rows.iter().map(|r| r.gap).fold(f64::INFINITY, f64::min)
    }

    pub fn total_messages(&self) -> usize {
        self.rows.last().map_or(0, |r| r.msgs_cum)
    }

    /// CSV rendering; the value column is named per algorithm.
    pub fn to_csv(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        match self.algo {
            Algo::Dual => out.push_str("t,alpha,q_lambda,best_primal,gap,g_norm,msgs_cum\n"),
            _ => out.push_str("t,alpha,phi_sum,gap,g_norm,msgs_cum\n"),
        }
        for r in &self.rows {
            match self.algo {
                Algo::Dual => {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{},{}",
                        r.t, r.alpha, r.value, r.best_primal, r.gap, r.g_norm, r.msgs_cum
                    );
                }
                _ => {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{}",
                        r.t, r.alpha, r.value, r.gap, r.g_norm, r.msgs_cum
                    );
                }
            }
        }
        out
    }
}

//! Solver-neutral linear program container and the backend contract.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use serde::Serialize;

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Col(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Row(pub usize);

/// A linear (or mixed-integer linear) program stored row-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub sense: Sense,
    pub offset: f64,
    pub col_cost: Vec<f64>,
    pub col_lower: Vec<f64>,
    pub col_upper: Vec<f64>,
    pub integer: Vec<bool>,
    pub col_names: Vec<String>,
    pub row_lower: Vec<f64>,
    pub row_upper: Vec<f64>,
    pub row_names: Vec<String>,
    pub row_start: Vec<usize>,
    pub row_index: Vec<usize>,
    pub row_value: Vec<f64>,
}

impl LinearProgram {
    pub fn new(sense: Sense) -> Self {
        LinearProgram {
            sense,
            offset: 0.0,
            col_cost: Vec::new(),
            col_lower: Vec::new(),
            col_upper: Vec::new(),
            integer: Vec::new(),
            col_names: Vec::new(),
            row_lower: Vec::new(),
            row_upper: Vec::new(),
            row_names: Vec::new(),
            row_start: vec![0],
            row_index: Vec::new(),
            row_value: Vec::new(),
        }
    }

    pub fn num_cols(&self) -> usize {
        self.col_cost.len()
    }

    pub fn num_rows(&self) -> usize {
        self.row_lower.len()
    }

    pub fn num_nonzeros(&self) -> usize {
        self.row_value.len()
    }

    pub fn is_mip(&self) -> bool {
        self.integer.iter().any(|&i| i)
    }

    pub fn add_col(
        &mut self,
        name: String,
        cost: f64,
        lower: f64,
        upper: f64,
        integer: bool,
    ) -> Col {
        self.col_cost.push(cost);
        self.col_lower.push(lower);
        self.col_upper.push(upper);
        self.integer.push(integer);
        self.col_names.push(name);
        Col(self.col_cost.len() - 1)
    }

    /// Adds `lower <= Σ coef·x <= upper`. Repeated columns are summed.
    pub fn add_row(&mut self, name: String, lower: f64, upper: f64, terms: &[(Col, f64)]) -> Row {
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
        for &(Col(c), v) in terms {
            match merged.iter_mut().find(|(i, _)| *i == c) {
                Some(slot) => slot.1 += v,
                None => merged.push((c, v)),
            }
        }
        for (c, v) in merged {
            if v != 0.0 {
                self.row_index.push(c);
                self.row_value.push(v);
            }
        }
        self.row_start.push(self.row_index.len());
        self.row_lower.push(lower);
        self.row_upper.push(upper);
        self.row_names.push(name);
        Row(self.row_lower.len() - 1)
    }

    pub fn row_terms(&self, row: Row) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (s, e) = (self.row_start[row.0], self.row_start[row.0 + 1]);
        self.row_index[s..e]
            .iter()
            .copied()
            .zip(self.row_value[s..e].iter().copied())
    }

    pub fn fix_col(&mut self, col: Col, value: f64) {
        self.col_lower[col.0] = value;
        self.col_upper[col.0] = value;
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.offset + self.col_cost.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }

    pub fn row_activity(&self, row: Row, x: &[f64]) -> f64 {
        self.row_terms(row).map(|(c, v)| v * x[c]).sum()
    }

    /// Dual objective for `row_duals`/`col_duals` in the marginal-value sign
    /// convention (∂objective/∂bound): each multiplier is charged against the
    /// bound it prices.
    pub fn dual_objective(&self, row_duals: &[f64], col_duals: &[f64]) -> f64 {
        fn pick(dual: f64, lower: f64, upper: f64, sense: Sense) -> f64 {
            // for a maximization, a positive marginal value prices the upper bound
            let upper_side = match sense {
                Sense::Maximize => dual > 0.0,
                Sense::Minimize => dual < 0.0,
            };
            let bound = if lower == upper {
                lower
            } else if upper_side {
                upper
            } else {
                lower
            };
            if bound.is_finite() {
                dual * bound
            } else {
                0.0
            }
        }
        let rows: f64 = (0..self.num_rows())
            .map(|i| {
                pick(
                    row_duals[i],
                    self.row_lower[i],
                    self.row_upper[i],
                    self.sense,
                )
            })
            .sum();
        let cols: f64 = (0..self.num_cols())
            .map(|j| {
                pick(
                    col_duals[j],
                    self.col_lower[j],
                    self.col_upper[j],
                    self.sense,
                )
            })
            .sum();
        self.offset + rows + cols
    }

    /// Hash of the matrix and objective coefficients, ignoring bounds.
    pub fn coefficient_hash(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.num_cols().hash(&mut h);
        self.num_rows().hash(&mut h);
        for v in &self.col_cost {
            v.to_bits().hash(&mut h);
        }
        self.row_start.hash(&mut h);
        self.row_index.hash(&mut h);
        for v in &self.row_value {
            v.to_bits().hash(&mut h);
        }
        self.integer.hash(&mut h);
        h.finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolveOptions {
    /// Relative MIP gap.
    pub mip_rel_gap: f64,
    /// Seconds; `None` for no limit.
    pub time_limit: Option<f64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            mip_rel_gap: 0.005,
            time_limit: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    TimeLimit,
    Other,
}

/// What a backend returns. Duals are in the marginal-value convention:
/// `row_duals[i]` is ∂objective/∂(bound of row i), `col_duals[j]` likewise
/// for column bounds (reduced costs).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RawSolution {
    pub status: SolveStatus,
    pub objective: f64,
    pub col_values: Vec<f64>,
    pub row_values: Vec<f64>,
    pub col_duals: Vec<f64>,
    pub row_duals: Vec<f64>,
    /// Best proved bound (MILP only).
    pub dual_bound: Option<f64>,
    /// Relative gap at termination (MILP only).
    pub mip_gap: Option<f64>,
    /// Fingerprint of the final simplex basis (LP only).
    pub basis_signature: Option<u64>,
}

/// Narrow contract any LP/MILP engine must satisfy.
pub trait SolverBackend: Send + Sync {
    fn name(&self) -> &str;

    /// Solve to optimality (LP) or within `options.mip_rel_gap` (MILP).
    fn solve(&self, lp: &LinearProgram, options: &SolveOptions) -> Result<RawSolution>;

    /// Whether independent instances may be solved concurrently in-process.
    fn concurrent_solves(&self) -> bool;

    /// Write the program in LP or MPS format (chosen by extension).
    fn export(&self, lp: &LinearProgram, path: &std::path::Path) -> Result<()>;
}

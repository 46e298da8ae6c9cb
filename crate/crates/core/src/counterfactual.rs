//! Counterfactual programs: the reference plan with selected node-0 line
//! investments removed.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::optimizer::{
    fix_and_solve_lp, solve_mip, ExpansionPlan, ModelInstance, PrimalDualSolution,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Scope {
    /// All selected increments on one line.
    Project(String),
    Portfolio,
}

impl Scope {
    pub fn label(&self) -> String {
        match self {
            Scope::Project(l) => l.clone(),
            Scope::Portfolio => "portfolio".into(),
        }
    }
}

/// Selected (node, line, increment) triples to be removed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvestmentSubset {
    pub scope: Scope,
    pub members: Vec<(usize, usize, usize)>,
}

impl InvestmentSubset {
    pub fn empty() -> Self {
        InvestmentSubset {
            scope: Scope::Portfolio,
            members: Vec::new(),
        }
    }

    /// Every increment selected at the root.
    pub fn portfolio(instance: &ModelInstance, plan: &ExpansionPlan) -> Self {
        let root = instance.problem.root;
        InvestmentSubset {
            scope: Scope::Portfolio,
            members: plan
                .selected_at(root)
                .into_iter()
                .map(|(l, q)| (root, l, q))
                .collect(),
        }
    }

    /// Increments selected at the root on `line`.
    pub fn project(instance: &ModelInstance, plan: &ExpansionPlan, line: &str) -> Result<Self> {
        let root = instance.problem.root;
        let l = instance.problem.case.line_index(line)?;
        let members: Vec<_> = plan
            .selected_at(root)
            .into_iter()
            .filter(|&(ll, _)| ll == l)
            .map(|(l, q)| (root, l, q))
            .collect();
        if members.is_empty() {
            return Err(Error::input(format!(
                "line '{line}' has no selected increment at the root"
            )));
        }
        Ok(InvestmentSubset {
            scope: Scope::Project(line.to_string()),
            members,
        })
    }

    /// One subset per line with a root selection, in line order.
    pub fn projects(instance: &ModelInstance, plan: &ExpansionPlan) -> Vec<Self> {
        let root = instance.problem.root;
        let mut lines: Vec<usize> = plan.selected_at(root).into_iter().map(|(l, _)| l).collect();
        lines.dedup();
        lines
            .into_iter()
            .map(|l| {
                InvestmentSubset::project(instance, plan, &instance.problem.case.lines[l].id)
                    .expect("line has a selection")
            })
            .collect()
    }

    /// Parses `portfolio` or a comma-separated list of `line` / `line:increment`.
    pub fn parse(spec: &str, instance: &ModelInstance, plan: &ExpansionPlan) -> Result<Self> {
        if spec.trim() == "portfolio" {
            return Ok(InvestmentSubset::portfolio(instance, plan));
        }
        let root = instance.problem.root;
        let case = &instance.problem.case;
        let mut members = Vec::new();
        for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match item.split_once(':') {
                Some((line, inc)) => {
                    members.push((root, case.line_index(line)?, case.catalog.index_of(inc)?));
                }
                None => members.extend(InvestmentSubset::project(instance, plan, item)?.members),
            }
        }
        members.sort_unstable();
        members.dedup();
        let scope = if members.iter().all(|m| m.1 == members[0].1) && !members.is_empty() {
            Scope::Project(case.lines[members[0].1].id.clone())
        } else {
            Scope::Project(spec.to_string())
        };
        Ok(InvestmentSubset { scope, members })
    }
}

/// Which decisions stay fixed in the counterfactual.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CounterfactualOption {
    /// Other lines and all generation decisions fixed to the reference.
    FixGeneration,
    /// Other lines fixed, generation re-optimized.
    Regenerate,
    /// Removed lines excluded at every increment, other lines and
    /// generation free. `all_nodes` extends the exclusion beyond the root.
    FreeLines { all_nodes: bool },
}

impl Default for CounterfactualOption {
    fn default() -> Self {
        CounterfactualOption::Regenerate
    }
}

impl CounterfactualOption {
    pub fn from_number(option: u8, all_nodes: bool) -> Result<Self> {
        match option {
            1 => Ok(CounterfactualOption::FixGeneration),
            2 => Ok(CounterfactualOption::Regenerate),
            3 => Ok(CounterfactualOption::FreeLines { all_nodes }),
            _ => Err(Error::input(format!(
                "counterfactual option {option} not in 1..=3"
            ))),
        }
    }

    pub fn number(self) -> u8 {
        match self {
            CounterfactualOption::FixGeneration => 1,
            CounterfactualOption::Regenerate => 2,
            CounterfactualOption::FreeLines { .. } => 3,
        }
    }
}

/// The counterfactual program for `subset` relative to `reference`.
/// Options 1 and 2 yield an LP; option 3 keeps the free binaries integer.
pub fn build_counterfactual(
    instance: &ModelInstance,
    reference: &ExpansionPlan,
    subset: &InvestmentSubset,
    option: CounterfactualOption,
) -> Result<ModelInstance> {
    let ix = &instance.index;
    if reference.w.dim() != ix.w.dim() {
        return Err(Error::input("reference plan does not match the instance"));
    }
    for &(n, l, q) in &subset.members {
        let (nn, nl, nq) = ix.w.dim();
        if n >= nn || l >= nl || q >= nq || ix.w[[n, l, q]].is_none() {
            return Err(Error::input(format!(
                "({n}, {l}, {q}) is not a line decision of this instance"
            )));
        }
        if !reference.w[[n, l, q]] {
            let p = &instance.problem;
            return Err(Error::input(format!(
                "increment {} on line {} at node {} is not selected in the reference plan",
                p.case.catalog.increments[q].id,
                p.case.lines[l].id,
                p.tree.node(n).id
            )));
        }
    }
    let mut cf = instance.clone();
    let lp = &mut cf.lp;
    match option {
        CounterfactualOption::FixGeneration | CounterfactualOption::Regenerate => {
            for ((n, l, q), c) in instance.binary_columns() {
                let v = reference.w[[n, l, q]] && !subset.members.contains(&(n, l, q));
                lp.fix_col(c, if v { 1.0 } else { 0.0 });
            }
            lp.integer.iter_mut().for_each(|v| *v = false);
            if option == CounterfactualOption::FixGeneration {
                for (cols, vals) in [
                    (&ix.build, &reference.build),
                    (&ix.retire, &reference.retire),
                ] {
                    for (c, &v) in cols.iter().zip(vals.iter()) {
                        if let Some(c) = c {
                            lp.fix_col(*c, v);
                        }
                    }
                }
            }
        }
        CounterfactualOption::FreeLines { all_nodes } => {
            let root = instance.problem.root;
            for ((n, l, _), c) in instance.binary_columns() {
                let named = subset
                    .members
                    .iter()
                    .any(|m| m.1 == l && (all_nodes || m.0 == n));
                if named && (all_nodes || n == root) {
                    lp.fix_col(c, 0.0);
                }
            }
        }
    }
    Ok(cf)
}

/// Solves a counterfactual program; a program with free binaries is solved
/// as a MIP first and then re-solved with its binaries fixed for duals.
pub fn solve_counterfactual(cf: &ModelInstance, gap: f64) -> Result<PrimalDualSolution> {
    if cf.lp.is_mip() {
        let mip = solve_mip(cf, gap)?;
        fix_and_solve_lp(cf, &mip.plan.w)
    } else {
        cf.solve_variant(&cf.lp)
    }
}

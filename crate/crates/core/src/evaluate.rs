//! Out-of-sample evaluation: first-stage decisions held fixed, one
//! full-chronology operating year per grid combination.

use std::fmt::Write as _;
use std::sync::Arc;

use ndarray::Array2;
use rayon::prelude::*;
use serde::Serialize;

use crate::allocation::{AllocationReport, GenDelta, LoadDelta, Participant, Policy};
use crate::benefits::{consumer_surplus, unit_operating_profit};
use crate::error::{Error, Result};
use crate::optimizer::{
    build_with_backend, HighsBackend, ModelInstance, PlanningProblem, PrimalDualSolution,
    SolverBackend,
};
use crate::scenario::{GridCombination, GridEffect, NodeData, ScenarioTree, UncertaintyGrid};
use crate::system::SystemCase;
use crate::timeseries::TimeBlocks;

/// The first-stage state carried into the evaluation year.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPlan {
    pub label: String,
    /// In-service line capacity, MW, by line.
    pub line_capacity: Vec<f64>,
    /// Installed capacity `[[b, g]]`, MW.
    pub fleet: Array2<f64>,
}

impl FixedPlan {
    /// Root-node network and fleet of a solved program: L⁰ plus the root's
    /// selected increments, and G⁰ + ΔG₀ − ΔḠ₀.
    pub fn from_solution(label: &str, problem: &PlanningProblem, sol: &PrimalDualSolution) -> Self {
        let case = &problem.case;
        let root = problem.root;
        let mut line_capacity: Vec<f64> = case.lines.iter().map(|l| l.initial_capacity).collect();
        for (l, q) in sol.plan.selected_at(root) {
            line_capacity[l] += case.catalog.increments[q].capacity;
        }
        let fleet = sol.capacity.index_axis(ndarray::Axis(0), root).to_owned();
        FixedPlan {
            label: label.to_string(),
            line_capacity,
            fleet,
        }
    }

    /// The case as it stands, with no first-stage decisions.
    pub fn status_quo(label: &str, case: &SystemCase) -> Self {
        FixedPlan {
            label: label.to_string(),
            line_capacity: case.lines.iter().map(|l| l.initial_capacity).collect(),
            fleet: case.existing.clone(),
        }
    }
}

/// A later-stage line addition, `line:increment`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AddedExpansion {
    pub line: String,
    pub increment: String,
}

impl std::str::FromStr for AddedExpansion {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (line, increment) = s
            .split_once(':')
            .ok_or_else(|| Error::input(format!("expansion '{s}' must be line:increment")))?;
        Ok(AddedExpansion {
            line: line.trim().to_string(),
            increment: increment.trim().to_string(),
        })
    }
}

impl std::fmt::Display for AddedExpansion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.line, self.increment)
    }
}

/// Settings shared by every combination of a sweep.
#[derive(Clone)]
pub struct Evaluation {
    pub case: SystemCase,
    /// Year data before grid scaling.
    pub base: NodeData,
    pub grid: UncertaintyGrid,
    /// Disables recourse builds and retirements.
    pub frozen_fleet: bool,
    pub policy: Policy,
    pub added: Vec<AddedExpansion>,
    pub evaluation_label: String,
    pub backend: Arc<dyn SolverBackend>,
}

impl Evaluation {
    pub fn new(case: SystemCase, base: NodeData, grid: UncertaintyGrid) -> Self {
        Evaluation {
            case,
            base,
            grid,
            frozen_fleet: false,
            policy: Policy::LoadOnly,
            added: Vec::new(),
            evaluation_label: "evaluation-year".into(),
            backend: Arc::new(HighsBackend::default()),
        }
    }

    fn added_capacity(&self) -> Result<Vec<f64>> {
        let mut extra = vec![0.0; self.case.line_count()];
        for a in &self.added {
            let l = self.case.line_index(&a.line)?;
            let q = self.case.catalog.index_of(&a.increment)?;
            extra[l] += self.case.catalog.increments[q].capacity;
        }
        Ok(extra)
    }
}

/// Year data and case after applying one combination's levels.
pub fn apply_combination(
    case: &SystemCase,
    base: &NodeData,
    grid: &UncertaintyGrid,
    combo: &GridCombination,
) -> Result<(SystemCase, NodeData)> {
    if combo.levels.len() != grid.dimensions.len() {
        return Err(Error::input("combination does not match the grid"));
    }
    let mut case = case.clone();
    let mut data = base.clone();
    let resolve = |techs: &[String]| -> Result<Vec<usize>> {
        if techs.is_empty() {
            Ok((0..case.tech_count()).collect())
        } else {
            techs.iter().map(|t| case.tech_index(t)).collect()
        }
    };
    for (dim, level) in grid.dimensions.iter().zip(&combo.levels) {
        let v = *dim.levels.get(level.index()).ok_or_else(|| {
            Error::input(format!(
                "dimension '{}' lacks a value for {level:?}",
                dim.name
            ))
        })?;
        match &dim.effect {
            GridEffect::DemandScale => data.demand_growth *= v,
            GridEffect::FuelCostScale { techs } => {
                for g in resolve(techs)? {
                    let t = &case.technologies[g];
                    let cur = data.fuel_cost.get(&t.id).copied().unwrap_or(t.fuel_cost);
                    data.fuel_cost.insert(t.id.clone(), cur * v);
                }
            }
            GridEffect::InvestmentCostScale { techs } => {
                for g in resolve(techs)? {
                    let t = &case.technologies[g];
                    let cur = data
                        .investment_cost
                        .get(&t.id)
                        .copied()
                        .unwrap_or(t.investment_cost);
                    data.investment_cost.insert(t.id.clone(), cur * v);
                }
            }
            GridEffect::Rps => data.rps = v,
        }
    }
    case.hourly.demand *= data.demand_growth;
    data.demand_growth = 1.0;
    Ok((case, data))
}

/// Single-node, full-chronology LP for `plan` under `combo`.
pub fn build_oos_lp(
    eval: &Evaluation,
    plan: &FixedPlan,
    combo: &GridCombination,
) -> Result<ModelInstance> {
    let (mut case, data) = apply_combination(&eval.case, &eval.base, &eval.grid, combo)?;
    if plan.line_capacity.len() != case.line_count() || plan.fleet.dim() != case.existing.dim() {
        return Err(Error::input(format!(
            "plan '{}' does not match the case",
            plan.label
        )));
    }
    let extra = eval.added_capacity()?;
    for (l, line) in case.lines.iter_mut().enumerate() {
        line.initial_capacity = plan.line_capacity[l] + extra[l];
    }
    // capacity that can exist in either plan keeps the column layout shared
    for ((b, g), v) in plan.fleet.indexed_iter() {
        if *v > 0.0 && !(eval.case.existing[[b, g]] > 0.0 || eval.case.technologies[g].buildable) {
            return Err(Error::input(format!(
                "plan '{}' holds capacity of non-buildable '{}' at '{}'",
                plan.label, eval.case.technologies[g].id, eval.case.buses[b].id
            )));
        }
    }
    case.existing = plan.fleet.mapv(|v| v.max(0.0));
    let hours = case.hourly.hours();
    if hours == 0 {
        return Err(Error::input("case has no hourly series"));
    }
    let blocks = TimeBlocks::full(hours).slice_inputs(&case.hourly)?;
    let mut problem = PlanningProblem::new(case, ScenarioTree::single(data), blocks)?;
    // keep the column set identical across paired plans
    let base = &eval.case;
    problem.active = Array2::from_shape_fn(base.existing.dim(), |(b, g)| {
        base.existing[[b, g]] > 0.0 || base.technologies[g].buildable
    });
    let mut instance = build_with_backend(Arc::new(problem), eval.backend.clone())?;
    if eval.frozen_fleet {
        let ix = instance.index.clone();
        for c in ix.build.iter().chain(ix.retire.iter()).flatten() {
            instance.lp.fix_col(*c, 0.0);
        }
    }
    Ok(instance)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComboResult {
    pub index: usize,
    pub label: String,
    /// Objective difference, plan minus counterfactual plan.
    pub gross_benefit: f64,
    pub objective_plan: f64,
    pub objective_counterfactual: f64,
    pub loads: Vec<LoadDelta>,
    pub generators: Vec<GenDelta>,
    /// Realized shares under the sweep's policy; empty when nobody gains.
    pub shares: Vec<(Participant, f64)>,
    pub paired_hashes_match: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub evaluation: String,
    pub plan: String,
    pub counterfactual: String,
    pub added: Vec<String>,
    pub policy: Policy,
    pub frozen_fleet: bool,
    /// Ranked by gross benefit, descending; failed combinations last.
    pub results: Vec<ComboResult>,
    pub failed: usize,
}

fn existing_participants(case: &SystemCase) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for b in 0..case.bus_count() {
        for g in 0..case.tech_count() {
            if case.existing[[b, g]] > 0.0 {
                out.push((b, g));
            }
        }
    }
    out
}

fn evaluate_combo(
    eval: &Evaluation,
    plan: &FixedPlan,
    counter: &FixedPlan,
    combo: &GridCombination,
) -> Result<ComboResult> {
    let a = build_oos_lp(eval, plan, combo)?;
    let b = build_oos_lp(eval, counter, combo)?;
    let sa = a.solve_variant(&a.lp)?;
    let sb = b.solve_variant(&b.lp)?;
    let (pa, pb) = (&*a.problem, &*b.problem);
    let case = &eval.case;
    let loads: Vec<LoadDelta> = (0..case.bus_count())
        .map(|bus| LoadDelta {
            bus: case.buses[bus].id.clone(),
            delta: consumer_surplus(pa, &sa, bus) - consumer_surplus(pb, &sb, bus),
        })
        .collect();
    let mut generators = Vec::new();
    for (bus, g) in existing_participants(case) {
        let d = unit_operating_profit(pa, &sa, bus, g)? - unit_operating_profit(pb, &sb, bus, g)?;
        generators.push(GenDelta {
            bus: case.buses[bus].id.clone(),
            tech: case.technologies[g].id.clone(),
            existing_mw: case.existing[[bus, g]],
            unit_delta: d,
        });
    }
    let label = combo.label();
    let report = match eval.policy {
        Policy::LoadOnly => crate::allocation::allocate_load_only(&label, 1.0, &loads, false),
        Policy::LoadAndGen => {
            crate::allocation::allocate_load_and_gen(&label, 1.0, &loads, &generators, false)
        }
    };
    let shares = match report {
        Ok(r) => r
            .shares
            .into_iter()
            .map(|s| (s.participant, s.ratio))
            .collect(),
        Err(Error::NoBeneficiaries) => Vec::new(),
        Err(e) => return Err(e),
    };
    Ok(ComboResult {
        index: combo.index,
        label,
        gross_benefit: sa.objective - sb.objective,
        objective_plan: sa.objective,
        objective_counterfactual: sb.objective,
        loads,
        generators,
        shares,
        paired_hashes_match: a.lp.coefficient_hash() == b.lp.coefficient_hash(),
        error: None,
    })
}

/// Evaluates `plan` against `counter` on every combination. Failures are
/// recorded per combination and do not stop the sweep.
pub fn sweep(
    eval: &Evaluation,
    plan: &FixedPlan,
    counter: &FixedPlan,
    combos: &[GridCombination],
) -> Result<SweepResult> {
    // reject bad configuration before any solve
    eval.added_capacity()?;
    if let Some(c) = combos.first() {
        apply_combination(&eval.case, &eval.base, &eval.grid, c)?;
    }
    let run = |c: &GridCombination| {
        evaluate_combo(eval, plan, counter, c).unwrap_or_else(|e| ComboResult {
            index: c.index,
            label: c.label(),
            gross_benefit: f64::NAN,
            objective_plan: f64::NAN,
            objective_counterfactual: f64::NAN,
            loads: Vec::new(),
            generators: Vec::new(),
            shares: Vec::new(),
            paired_hashes_match: false,
            error: Some(e.to_string()),
        })
    };
    let mut results: Vec<ComboResult> = if eval.backend.concurrent_solves() {
        combos.par_iter().map(run).collect()
    } else {
        combos.iter().map(run).collect()
    };
    results.sort_by(|x, y| match (x.error.is_some(), y.error.is_some()) {
        (false, false) => y
            .gross_benefit
            .total_cmp(&x.gross_benefit)
            .then(x.index.cmp(&y.index)),
        (a, b) => a.cmp(&b).then(x.index.cmp(&y.index)),
    });
    let failed = results.iter().filter(|r| r.error.is_some()).count();
    Ok(SweepResult {
        evaluation: eval.evaluation_label.clone(),
        plan: plan.label.clone(),
        counterfactual: counter.label.clone(),
        added: eval.added.iter().map(|a| a.to_string()).collect(),
        policy: eval.policy,
        frozen_fleet: eval.frozen_fleet,
        results,
        failed,
    })
}

/// Re-evaluates the original pair with later-stage lines added to both.
pub fn later_stage_scenario(
    eval: &Evaluation,
    plan: &FixedPlan,
    counter: &FixedPlan,
    added: &[AddedExpansion],
    combos: &[GridCombination],
) -> Result<SweepResult> {
    let mut e = eval.clone();
    for a in added {
        e.case.line_index(&a.line)?;
        e.case.catalog.index_of(&a.increment)?;
    }
    e.added.extend(added.iter().cloned());
    sweep(&e, plan, counter, combos)
}

impl SweepResult {
    /// Participants in first-result order.
    pub fn participants(&self) -> Vec<Participant> {
        let mut out: Vec<Participant> = Vec::new();
        if let Some(r) = self.results.iter().find(|r| r.error.is_none()) {
            for l in &r.loads {
                let p = Participant::Load { bus: l.bus.clone() };
                if !out.contains(&p) {
                    out.push(p);
                }
            }
            if self.policy == Policy::LoadAndGen {
                for g in &r.generators {
                    let p = Participant::Generator {
                        bus: g.bus.clone(),
                        tech: g.tech.clone(),
                    };
                    if !out.contains(&p) {
                        out.push(p);
                    }
                }
            }
        }
        out
    }

    /// One row per combination: rank, index, label, gross benefit, then
    /// benefit and realized share per participant.
    pub fn to_csv(&self) -> String {
        let parts = self.participants();
        let mut out =
            String::from("rank,combo,label,gross_benefit,objective_plan,objective_counterfactual");
        for p in &parts {
            let _ = write!(out, ",benefit:{0},share:{0}", p.label());
        }
        out.push_str(",error\n");
        for (rank, r) in self.results.iter().enumerate() {
            let _ = write!(
                out,
                "{},{},{},{},{},{}",
                rank + 1,
                r.index,
                r.label,
                num(r.gross_benefit),
                num(r.objective_plan),
                num(r.objective_counterfactual)
            );
            for p in &parts {
                let benefit = match p {
                    Participant::Load { bus } => {
                        r.loads.iter().find(|l| &l.bus == bus).map(|l| l.delta)
                    }
                    Participant::Generator { bus, tech } => r
                        .generators
                        .iter()
                        .find(|g| &g.bus == bus && &g.tech == tech)
                        .map(|g| g.existing_mw * g.unit_delta),
                };
                let share = r.shares.iter().find(|(q, _)| q == p).map(|(_, s)| *s);
                let _ = write!(
                    out,
                    ",{},{}",
                    benefit.map_or(String::new(), num),
                    share.map_or(String::new(), num)
                );
            }
            let _ = writeln!(
                out,
                ",{}",
                r.error.as_deref().unwrap_or("").replace(',', ";")
            );
        }
        out
    }
}

fn num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v:.6}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Divergence {
    pub participant: Participant,
    pub ex_ante: f64,
    pub realized_min: f64,
    pub realized_max: f64,
    pub realized_mean: f64,
    pub histogram: Vec<HistogramBin>,
    /// Ex ante share outside the realized range.
    pub outside_range: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceReport {
    /// Combinations with at least one realized beneficiary.
    pub realized: usize,
    pub failed: usize,
    pub without_beneficiaries: usize,
    pub status: String,
    pub rows: Vec<Divergence>,
}

/// Realized share histograms (`bins` equal bins on [0, 1]) against the ex
/// ante allocation.
pub fn ex_ante_vs_ex_post(
    sweep: &SweepResult,
    ex_ante: &AllocationReport,
    bins: usize,
) -> Result<DivergenceReport> {
    if sweep.results.is_empty() {
        return Err(Error::input("empty sweep"));
    }
    if bins == 0 {
        return Err(Error::input("histogram needs at least one bin"));
    }
    let realized: Vec<&ComboResult> = sweep
        .results
        .iter()
        .filter(|r| r.error.is_none() && !r.shares.is_empty())
        .collect();
    for r in &realized {
        for (p, _) in &r.shares {
            if ex_ante.ratio_of(p).is_none() {
                return Err(Error::input(format!(
                    "participant {} missing from the ex ante report",
                    p.label()
                )));
            }
        }
    }
    let ok = sweep.results.iter().filter(|r| r.error.is_none()).count();
    let mut report = DivergenceReport {
        realized: realized.len(),
        failed: sweep.failed,
        without_beneficiaries: ok - realized.len(),
        status: String::new(),
        rows: Vec::new(),
    };
    if realized.is_empty() {
        report.status = "no realized beneficiaries".into();
        return Ok(report);
    }
    report.status = "ok".into();
    for s in &ex_ante.shares {
        let values: Vec<f64> = realized
            .iter()
            .map(|r| {
                r.shares
                    .iter()
                    .find(|(p, _)| p == &s.participant)
                    .map_or(0.0, |(_, v)| *v)
            })
            .collect();
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let mut histogram: Vec<HistogramBin> = (0..bins)
            .map(|i| HistogramBin {
                lower: i as f64 / bins as f64,
                upper: (i + 1) as f64 / bins as f64,
                count: 0,
            })
            .collect();
        for v in &values {
            let i = ((v * bins as f64).floor() as isize).clamp(0, bins as isize - 1) as usize;
            histogram[i].count += 1;
        }
        let tol = 1e-12;
        report.rows.push(Divergence {
            participant: s.participant.clone(),
            ex_ante: s.ratio,
            realized_min: min,
            realized_max: max,
            realized_mean: mean,
            histogram,
            outside_range: s.ratio < min - tol || s.ratio > max + tol,
        });
    }
    Ok(report)
}

impl DivergenceReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "participant,ex_ante,realized_min,realized_max,realized_mean,outside_range\n",
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.participant.label(),
                num(r.ex_ante),
                num(r.realized_min),
                num(r.realized_max),
                num(r.realized_mean),
                r.outside_range
            );
        }
        out
    }

    /// Long-format histogram data: participant, bin bounds, count, ex ante.
    pub fn histogram_csv(&self) -> String {
        let mut out = String::from("participant,bin_lower,bin_upper,count,ex_ante\n");
        for r in &self.rows {
            for b in &r.histogram {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    r.participant.label(),
                    num(b.lower),
                    num(b.upper),
                    b.count,
                    num(r.ex_ante)
                );
            }
        }
        out
    }
}

//! Participant surpluses from solved programs: generator unit profits,
//! consumer surplus, congestion rents, and a per-node account identity.

use std::fmt::Write as _;

use ndarray::{Array2, Array3};
use serde::Serialize;

use crate::allocation::{fmt2, GenDelta, LoadDelta, ScopeBenefits};
use crate::error::{Error, Result};
use crate::optimizer::{PlanningProblem, PrimalDualSolution, BUILD_TOLERANCE};

/// Capacity below which a unit is treated as absent.
pub const CAPACITY_EPSILON: f64 = 1e-9;
/// Production above this with absent capacity is an inconsistency.
pub const PRODUCTION_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratorUnitBenefit {
    pub bus: String,
    pub tech: String,
    /// G⁰, MW.
    pub existing: f64,
    /// Expected discounted unit operating profit with the expansion, $/MW.
    pub expansion: f64,
    /// Same under the counterfactual, $/MW.
    pub counterfactual: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoadBenefit {
    pub bus: String,
    pub expansion: f64,
    pub counterfactual: f64,
    pub delta: f64,
}

/// Expected discounted operating profit per MW of tech `g` at bus `b`.
pub fn unit_operating_profit(
    problem: &PlanningProblem,
    sol: &PrimalDualSolution,
    b: usize,
    g: usize,
) -> Result<f64> {
    let case = &problem.case;
    let tech = &case.technologies[g];
    let tw = &problem.blocks.weights;
    let mut total = 0.0;
    for (n, node) in problem.nodes.iter().enumerate() {
        let cap = sol.capacity[[n, b, g]];
        let credit = if tech.renewable {
            sol.rps_price[n]
        } else {
            0.0
        };
        let mut operating = 0.0;
        for (t, &w) in tw.iter().enumerate() {
            let p = sol.production[[n, b, g, t]];
            if cap.abs() <= CAPACITY_EPSILON {
                if p > PRODUCTION_EPSILON {
                    return Err(Error::Numerical(format!(
                        "gen@{}/{} produces {p} MW at node {} with no capacity",
                        case.buses[b].id,
                        tech.id,
                        problem.tree.node(n).id
                    )));
                }
                continue;
            }
            let margin = sol.price[[n, b, t]] - node.fuel_cost[g] - tech.variable_om + credit;
            operating += w * margin * p / cap;
        }
        total += node.weight * (operating - tech.fixed_om);
    }
    Ok(total)
}

pub fn generator_unit_benefit(
    problem: &PlanningProblem,
    expansion: &PrimalDualSolution,
    counterfactual: &PrimalDualSolution,
    b: usize,
    g: usize,
) -> Result<GeneratorUnitBenefit> {
    let e = unit_operating_profit(problem, expansion, b, g)?;
    let c = unit_operating_profit(problem, counterfactual, b, g)?;
    Ok(GeneratorUnitBenefit {
        bus: problem.case.buses[b].id.clone(),
        tech: problem.case.technologies[g].id.clone(),
        existing: problem.case.existing[[b, g]],
        expansion: e,
        counterfactual: c,
        delta: e - c,
    })
}

/// Expected discounted consumer surplus at bus `b`.
pub fn consumer_surplus(problem: &PlanningProblem, sol: &PrimalDualSolution, b: usize) -> f64 {
    let gamma = problem.case.penalty.load_value;
    let tw = &problem.blocks.weights;
    let ni = problem.segment_count();
    problem
        .nodes
        .iter()
        .enumerate()
        .map(|(n, node)| {
            let s: f64 = tw
                .iter()
                .enumerate()
                .map(|(t, &w)| {
                    let z: f64 = (0..ni).map(|i| sol.curtailment[[n, b, t, i]]).sum();
                    let value = gamma - sol.price[[n, b, t]] - sol.rps_price[n] * node.rps;
                    w * value * (node.demand[[b, t]] - z)
                })
                .sum();
            node.weight * s
        })
        .sum()
}

pub fn load_benefit(
    problem: &PlanningProblem,
    expansion: &PrimalDualSolution,
    counterfactual: &PrimalDualSolution,
    b: usize,
) -> LoadBenefit {
    let e = consumer_surplus(problem, expansion, b);
    let c = consumer_surplus(problem, counterfactual, b);
    LoadBenefit {
        bus: problem.case.buses[b].id.clone(),
        expansion: e,
        counterfactual: c,
        delta: e - c,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CongestionRent {
    /// CRₙ, undiscounted, per node.
    pub per_node: Vec<f64>,
    /// `[[n, t]]`, T-weighted.
    pub per_time: Array2<f64>,
    /// `[[n, l, t]]`: T·flow·(π_to − π_from). Sums to `per_time` on radial
    /// networks.
    pub per_line: Array3<f64>,
    /// Σₙ φζ·CRₙ.
    pub expected: f64,
}

pub fn congestion_rent(problem: &PlanningProblem, sol: &PrimalDualSolution) -> CongestionRent {
    let (nn, nb, nt) = sol.injection.dim();
    let tw = &problem.blocks.weights;
    let per_time = Array2::from_shape_fn((nn, nt), |(n, t)| {
        tw[t]
            * (0..nb)
                .map(|b| -sol.price[[n, b, t]] * sol.injection[[n, b, t]])
                .sum::<f64>()
    });
    let flows = sol.flows(problem);
    let case = &problem.case;
    let ends: Vec<(usize, usize)> = case
        .lines
        .iter()
        .map(|l| {
            (
                case.bus_index(&l.from_bus).expect("validated"),
                case.bus_index(&l.to_bus).expect("validated"),
            )
        })
        .collect();
    let per_line = Array3::from_shape_fn(flows.dim(), |(n, l, t)| {
        let (f, to) = ends[l];
        tw[t] * flows[[n, l, t]] * (sol.price[[n, to, t]] - sol.price[[n, f, t]])
    });
    let per_node: Vec<f64> = (0..nn).map(|n| per_time.row(n).sum()).collect();
    let expected = per_node
        .iter()
        .zip(&problem.nodes)
        .map(|(c, node)| c * node.weight)
        .sum();
    CongestionRent {
        per_node,
        per_time,
        per_line,
        expected,
    }
}

/// Undiscounted accounts of one node. `objective_term` is the bracketed
/// node term of the objective; `residual` is what the accounts miss.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurplusAccounts {
    pub node: String,
    pub weight: f64,
    pub objective_term: f64,
    pub consumer_surplus: f64,
    pub generator_profit: f64,
    pub congestion_rent: f64,
    /// Σ T·(γ^LOAD − γᵢ)·z.
    pub shortfall: f64,
    /// −Σ T·γ^LINE·sl.
    pub line_violation: f64,
    /// ν·(RPS·served load − renewable output).
    pub rps: f64,
    pub capital_cost: f64,
    pub residual: f64,
}

impl SurplusAccounts {
    pub fn relative_residual(&self) -> f64 {
        self.residual.abs() / self.objective_term.abs().max(1.0)
    }
}

/// Node objective term computed from primal values only.
pub fn node_objective_term(problem: &PlanningProblem, sol: &PrimalDualSolution, n: usize) -> f64 {
    let case = &problem.case;
    let node = &problem.nodes[n];
    let tw = &problem.blocks.weights;
    let (_, nb, ng, nt) = sol.production.dim();
    let gamma = case.penalty.load_value;
    let mut v = 0.0;
    for t in 0..nt {
        for b in 0..nb {
            v += tw[t] * gamma * node.demand[[b, t]];
            for g in 0..ng {
                let tech = &case.technologies[g];
                v -= tw[t] * (node.fuel_cost[g] + tech.variable_om) * sol.production[[n, b, g, t]];
            }
            for (i, seg) in case.penalty.segments.iter().enumerate() {
                v -= tw[t] * seg.price * sol.curtailment[[n, b, t, i]];
            }
        }
        for l in 0..case.line_count() {
            v -= tw[t] * case.penalty.line_violation_price * sol.line_slack[[n, l, t]];
        }
    }
    for b in 0..nb {
        for g in 0..ng {
            v -= case.technologies[g].fixed_om * sol.capacity[[n, b, g]];
        }
    }
    v - capital_cost(problem, sol, n)
}

/// c^cap of node `n`: line and generation investments along its root path.
pub fn capital_cost(problem: &PlanningProblem, sol: &PrimalDualSolution, n: usize) -> f64 {
    let case = &problem.case;
    let (_, nl, nq) = sol.plan.w.dim();
    let (_, nb, ng) = sol.plan.build.dim();
    problem.nodes[n]
        .path
        .iter()
        .map(|&m| {
            let lines: f64 = (0..nl)
                .flat_map(|l| (0..nq).map(move |q| (l, q)))
                .filter(|&(l, q)| sol.plan.w[[m, l, q]])
                .map(|(l, q)| case.catalog.cost[[l, q]])
                .sum();
            let gens: f64 = (0..nb)
                .flat_map(|b| (0..ng).map(move |g| (b, g)))
                .map(|(b, g)| problem.nodes[m].investment_cost[g] * sol.plan.build[[m, b, g]])
                .sum();
            lines + gens
        })
        .sum()
}

pub fn surplus_decomposition(
    problem: &PlanningProblem,
    sol: &PrimalDualSolution,
) -> Vec<SurplusAccounts> {
    let case = &problem.case;
    let tw = &problem.blocks.weights;
    let (nn, nb, ng, nt) = sol.production.dim();
    let gamma = case.penalty.load_value;
    let cr = congestion_rent(problem, sol);
    (0..nn)
        .map(|n| {
            let node = &problem.nodes[n];
            let nu = sol.rps_price[n];
            let (mut cs, mut gp, mut short, mut line, mut served, mut renewable) =
                (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
            for t in 0..nt {
                for b in 0..nb {
                    let pi = sol.price[[n, b, t]];
                    let mut z = 0.0;
                    for (i, seg) in case.penalty.segments.iter().enumerate() {
                        let zi = sol.curtailment[[n, b, t, i]];
                        z += zi;
                        short += tw[t] * (gamma - seg.price) * zi;
                    }
                    let d = node.demand[[b, t]] - z;
                    served += tw[t] * d;
                    cs += tw[t] * (gamma - pi - nu * node.rps) * d;
                    for g in 0..ng {
                        let tech = &case.technologies[g];
                        let p = sol.production[[n, b, g, t]];
                        let credit = if tech.renewable { nu } else { 0.0 };
                        gp += tw[t] * (pi - node.fuel_cost[g] - tech.variable_om + credit) * p;
                        if tech.renewable {
                            renewable += tw[t] * p;
                        }
                    }
                }
                for l in 0..case.line_count() {
                    line -= tw[t] * case.penalty.line_violation_price * sol.line_slack[[n, l, t]];
                }
            }
            for b in 0..nb {
                for g in 0..ng {
                    gp -= case.technologies[g].fixed_om * sol.capacity[[n, b, g]];
                }
            }
            let rps = nu * (node.rps * served - renewable);
            let capital = capital_cost(problem, sol, n);
            let term = node_objective_term(problem, sol, n);
            let sum = cs + gp + cr.per_node[n] + short + line + rps - capital;
            SurplusAccounts {
                node: problem.tree.node(n).id.clone(),
                weight: node.weight,
                objective_term: term,
                consumer_surplus: cs,
                generator_profit: gp,
                congestion_rent: cr.per_node[n],
                shortfall: short,
                line_violation: line,
                rps,
                capital_cost: capital,
                residual: term - sum,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorClass {
    /// Built in both runs: no benefit.
    ZeroBenefit,
    /// Built only with the expansion.
    Beneficiary,
    /// Built only in the counterfactual.
    Loser,
    /// Built in neither run; the sign must be computed directly.
    Indeterminate,
}

pub fn classify_generator(
    built_expansion: f64,
    built_counterfactual: f64,
    tol: f64,
) -> GeneratorClass {
    match (built_expansion > tol, built_counterfactual > tol) {
        (true, true) => GeneratorClass::ZeroBenefit,
        (true, false) => GeneratorClass::Beneficiary,
        (false, true) => GeneratorClass::Loser,
        (false, false) => GeneratorClass::Indeterminate,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratorRow {
    pub benefit: GeneratorUnitBenefit,
    pub class: GeneratorClass,
    /// Σₙ φζ·C^INV₀ for the technology, the scale for the zero-benefit check.
    pub discounted_investment: f64,
}

/// Totals over all nodes, discounted.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateCheck {
    pub objective_delta: f64,
    pub load_delta: f64,
    pub generator_delta: f64,
    pub congestion_delta: f64,
    pub other_accounts_delta: f64,
    pub capital_delta: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenefitReport {
    pub scope: String,
    /// Cost of the removed investments ($/yr).
    pub cost: f64,
    pub loads: Vec<LoadBenefit>,
    pub generators: Vec<GeneratorRow>,
    pub congestion_expansion: f64,
    pub congestion_counterfactual: f64,
    pub accounts_expansion: Vec<SurplusAccounts>,
    pub accounts_counterfactual: Vec<SurplusAccounts>,
    pub aggregate: AggregateCheck,
}

fn discounted_total(accounts: &[SurplusAccounts], f: impl Fn(&SurplusAccounts) -> f64) -> f64 {
    accounts.iter().map(|a| a.weight * f(a)).sum()
}

impl BenefitReport {
    /// Builds the report for a reference/counterfactual pair. Generator rows
    /// cover every (bus, tech) that can hold capacity.
    pub fn build(
        problem: &PlanningProblem,
        scope: &str,
        cost: f64,
        expansion: &PrimalDualSolution,
        counterfactual: &PrimalDualSolution,
    ) -> Result<Self> {
        if expansion.production.dim() != counterfactual.production.dim() {
            return Err(Error::input(
                "solutions are on different trees or time blocks",
            ));
        }
        let case = &problem.case;
        let loads = (0..case.bus_count())
            .map(|b| load_benefit(problem, expansion, counterfactual, b))
            .collect();
        let root = problem.root;
        let weight_sum: f64 = problem.nodes.iter().map(|n| n.weight).sum();
        let mut generators = Vec::new();
        for b in 0..case.bus_count() {
            for g in 0..case.tech_count() {
                if !problem.is_active(b, g) {
                    continue;
                }
                generators.push(GeneratorRow {
                    benefit: generator_unit_benefit(problem, expansion, counterfactual, b, g)?,
                    class: classify_generator(
                        expansion.plan.build[[root, b, g]],
                        counterfactual.plan.build[[root, b, g]],
                        BUILD_TOLERANCE,
                    ),
                    discounted_investment: weight_sum * problem.nodes[root].investment_cost[g],
                });
            }
        }
        let ae = surplus_decomposition(problem, expansion);
        let ac = surplus_decomposition(problem, counterfactual);
        let diff = |f: &dyn Fn(&SurplusAccounts) -> f64| {
            discounted_total(&ae, f) - discounted_total(&ac, f)
        };
        let load_delta = diff(&|a| a.consumer_surplus);
        let generator_delta = diff(&|a| a.generator_profit);
        let congestion_delta = diff(&|a| a.congestion_rent);
        let other_accounts_delta = diff(&|a| a.shortfall + a.line_violation + a.rps);
        let capital_delta = diff(&|a| a.capital_cost);
        let objective_delta = expansion.objective - counterfactual.objective;
        let residual = objective_delta
            - (load_delta + generator_delta + congestion_delta + other_accounts_delta
                - capital_delta);
        Ok(BenefitReport {
            scope: scope.to_string(),
            cost,
            loads,
            generators,
            congestion_expansion: congestion_rent(problem, expansion).expected,
            congestion_counterfactual: congestion_rent(problem, counterfactual).expected,
            accounts_expansion: ae,
            accounts_counterfactual: ac,
            aggregate: AggregateCheck {
                objective_delta,
                load_delta,
                generator_delta,
                congestion_delta,
                other_accounts_delta,
                capital_delta,
                residual,
            },
        })
    }

    /// Allocation input: loads plus existing generators (G⁰ > 0) only.
    pub fn scope_benefits(&self) -> ScopeBenefits {
        ScopeBenefits {
            scope: self.scope.clone(),
            cost: self.cost,
            loads: self
                .loads
                .iter()
                .map(|l| LoadDelta {
                    bus: l.bus.clone(),
                    delta: l.delta,
                })
                .collect(),
            generators: self
                .generators
                .iter()
                .filter(|g| g.benefit.existing > 0.0)
                .map(|g| GenDelta {
                    bus: g.benefit.bus.clone(),
                    tech: g.benefit.tech.clone(),
                    existing_mw: g.benefit.existing,
                    unit_delta: g.benefit.delta,
                })
                .collect(),
        }
    }

    /// Buses as columns; load ΔU and G⁰-weighted generator ΔU per tech as rows.
    pub fn to_table(&self) -> String {
        let buses: Vec<&str> = self.loads.iter().map(|l| l.bus.as_str()).collect();
        let mut out = String::new();
        let _ = writeln!(out, "scope\t{}", self.scope);
        let _ = writeln!(out, "participant\t{}\tsum", buses.join("\t"));
        let cells: Vec<String> = self.loads.iter().map(|l| fmt2(l.delta)).collect();
        let total: f64 = self.loads.iter().map(|l| l.delta).sum();
        let _ = writeln!(out, "load\t{}\t{}", cells.join("\t"), fmt2(total));
        let mut techs: Vec<&str> = self
            .generators
            .iter()
            .map(|g| g.benefit.tech.as_str())
            .collect();
        techs.sort_unstable();
        techs.dedup();
        for tech in techs {
            let row: Vec<f64> = buses
                .iter()
                .map(|b| {
                    self.generators
                        .iter()
                        .filter(|g| g.benefit.tech == tech && g.benefit.bus == *b)
                        .map(|g| g.benefit.existing * g.benefit.delta)
                        .sum()
                })
                .collect();
            let cells: Vec<String> = row.iter().map(|v| fmt2(*v)).collect();
            let _ = writeln!(
                out,
                "gen:{tech}\t{}\t{}",
                cells.join("\t"),
                fmt2(row.iter().sum())
            );
        }
        let _ = writeln!(
            out,
            "congestion_rent\t{}\t(expansion {}, counterfactual {})",
            fmt2(self.congestion_expansion - self.congestion_counterfactual),
            fmt2(self.congestion_expansion),
            fmt2(self.congestion_counterfactual)
        );
        out
    }
}

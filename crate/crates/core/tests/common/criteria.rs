//! One check per acceptance criterion. Each returns a short summary on
//! success and the first violation otherwise.

use std::time::Instant;

use ndarray::Array3;

use tepca::allocation::{
    allocate_load_and_gen, allocate_load_only, benefit_cost_ratios, compare_scopes, fixtures,
    Participant, Policy,
};
use tepca::benefits::{surplus_decomposition, BenefitReport, GeneratorClass};
use tepca::counterfactual::CounterfactualOption;
use tepca::evaluate::{sweep, Evaluation, FixedPlan};
use tepca::optimizer::{
    fix_and_solve_lp, solve_mip, verify_kkt, PlanningProblem, PrimalDualSolution,
};

use super::{load, solve, Solved};

pub type Check = Result<String, String>;

pub const CLASS_CASES: [&str; 3] = ["class-a", "class-b", "class-c"];
pub const ORDERING_CASES: [&str; 5] = ["toy2", "tri3", "class-a", "class-b", "class-c"];
pub const BRUTE_FORCE_CASES: [&str; 2] = ["toy2", "tri3"];

const CLASS_TOL: f64 = 1e-4;
const ZERO_PROFIT_TOL: f64 = 1e-6;
const DECOMPOSITION_TOL: f64 = 1e-6;
/// Relative MIP gap for the reference and option-3 solves in the ordering check.
const ORDERING_GAP: f64 = 1e-6;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

pub fn allocation_oracle() -> Check {
    let set = fixtures::benefit_set();
    let portfolio = set.scope("portfolio").map_err(|e| e.to_string())?;
    let report = allocate_load_only("portfolio", portfolio.cost, &portfolio.loads, false)
        .map_err(|e| e.to_string())?;
    let expected = [57.17, 20.98, 0.0, 0.0, 0.0, 0.14, 0.0, 21.71];
    for (i, want) in expected.iter().enumerate() {
        let p = Participant::Load {
            bus: format!("b{}", i + 1),
        };
        let got = 100.0 * report.ratio_of(&p).unwrap_or(0.0);
        if !close(got, *want, 0.005) {
            return Err(format!("portfolio {}: {got:.4}% vs {want}%", p.label()));
        }
    }
    let l2 = set.scope("l2").map_err(|e| e.to_string())?;
    let report = allocate_load_only("l2", l2.cost, &l2.loads, false).map_err(|e| e.to_string())?;
    for (bus, want) in [("b1", 92.27), ("b8", 7.73)] {
        let got = 100.0
            * report
                .ratio_of(&Participant::Load { bus: bus.into() })
                .unwrap_or(0.0);
        if !close(got, want, 0.005) {
            return Err(format!("l2 load@{bus}: {got:.4}% vs {want}%"));
        }
    }
    let pooled = allocate_load_and_gen(
        "portfolio",
        portfolio.cost,
        &portfolio.loads,
        &fixtures::portfolio_generators(),
        false,
    )
    .map_err(|e| e.to_string())?;
    let load_share: f64 = pooled.load_percent_by_bus().values().sum();
    let gen_share: f64 = pooled.gen_percent_by_bus().values().sum();
    if !close(load_share, 22.72, 0.005) || !close(gen_share, 77.28, 0.005) {
        return Err(format!("policy split {load_share:.4}% / {gen_share:.4}%"));
    }
    Ok(format!(
        "portfolio and l2 rows match; load {load_share:.2}% / generation {gen_share:.2}%"
    ))
}

pub struct ClassCounts {
    pub zero_benefit: usize,
    pub beneficiary: usize,
    pub loser: usize,
    pub indeterminate: usize,
}

/// Portfolio option-2 benefit report for a case planned at the default gap.
pub fn portfolio_report(solved: &Solved) -> (PrimalDualSolution, BenefitReport) {
    let cf = solved.counterfactual(&solved.portfolio(), CounterfactualOption::Regenerate, 0.0);
    let report = BenefitReport::build(&solved.problem, "portfolio", 1.0, &solved.reference, &cf)
        .expect("report");
    (cf, report)
}

pub fn check_classes(
    name: &str,
    report: &BenefitReport,
    counts: &mut ClassCounts,
) -> Result<(), String> {
    for row in &report.generators {
        let tol = CLASS_TOL * row.discounted_investment.max(1.0);
        let d = row.benefit.delta;
        let who = format!("{name} {}/{}", row.benefit.bus, row.benefit.tech);
        match row.class {
            GeneratorClass::ZeroBenefit => {
                counts.zero_benefit += 1;
                if d.abs() > tol {
                    return Err(format!("{who}: zero-benefit delta {d:e} exceeds {tol:e}"));
                }
            }
            GeneratorClass::Beneficiary => {
                counts.beneficiary += 1;
                if d < -tol {
                    return Err(format!("{who}: beneficiary delta {d:e} < 0"));
                }
            }
            GeneratorClass::Loser => {
                counts.loser += 1;
                if d > tol {
                    return Err(format!("{who}: loser delta {d:e} > 0"));
                }
            }
            GeneratorClass::Indeterminate => counts.indeterminate += 1,
        }
    }
    Ok(())
}

fn desk_scale(problem: &PlanningProblem) -> Result<(), String> {
    let case = &problem.case;
    let leaves = problem.tree.leaves().len();
    if case.bus_count() > 5 || case.tech_count() > 3 || leaves != 7 {
        return Err(format!(
            "{}: {} buses, {} techs, {leaves} scenarios",
            case.name,
            case.bus_count(),
            case.tech_count()
        ));
    }
    Ok(())
}

pub fn classification_suite() -> Check {
    let start = Instant::now();
    let mut counts = ClassCounts {
        zero_benefit: 0,
        beneficiary: 0,
        loser: 0,
        indeterminate: 0,
    };
    for name in CLASS_CASES {
        let solved = solve(name, 1, 0.005);
        desk_scale(&solved.problem)?;
        if solved.portfolio().members.is_empty() {
            return Err(format!("{name}: plan builds no root lines"));
        }
        let (_, report) = portfolio_report(&solved);
        check_classes(name, &report, &mut counts)?;
    }
    if counts.zero_benefit == 0 || counts.beneficiary == 0 || counts.loser == 0 {
        return Err(format!(
            "classes not all exercised: {} zero-benefit, {} beneficiary, {} loser",
            counts.zero_benefit, counts.beneficiary, counts.loser
        ));
    }
    Ok(format!(
        "{} zero-benefit, {} beneficiary, {} loser, {} indeterminate in {:.1?}",
        counts.zero_benefit,
        counts.beneficiary,
        counts.loser,
        counts.indeterminate,
        start.elapsed()
    ))
}

pub fn zero_profit_suite() -> Check {
    let mut checked = 0;
    let mut exhausted = Vec::new();
    let mut worst: f64 = 0.0;
    for name in ["toy2", "tri3", "class-a", "class-b", "class-c"] {
        let solved = solve(name, 1, 0.005);
        let mut lps = vec![("reference", solved.reference.clone())];
        if !solved.portfolio().members.is_empty() {
            lps.push(("counterfactual", portfolio_report(&solved).0));
        }
        for (label, sol) in &lps {
            for z in verify_kkt(&solved.problem, sol).zero_profit {
                if z.capacity_exhausted {
                    exhausted.push(format!("{name} {label} {}/{}", z.bus, z.tech));
                }
                checked += 1;
                if z.relative > ZERO_PROFIT_TOL {
                    return Err(format!(
                        "{name} {label} {}/{}: violation {:e}",
                        z.bus, z.tech, z.relative
                    ));
                }
                worst = worst.max(z.relative);
            }
        }
    }
    let aside = if exhausted.is_empty() {
        String::new()
    } else {
        format!(" (retired to zero later: {})", exhausted.join(", "))
    };
    Ok(format!("{checked} root builds, worst {worst:.1e}{aside}"))
}

pub fn line_plan(
    problem: &PlanningProblem,
    bits: &[((usize, usize, usize), bool)],
) -> Array3<bool> {
    let mut w = Array3::from_elem(
        (
            problem.node_count(),
            problem.case.line_count(),
            problem.case.catalog.len(),
        ),
        false,
    );
    for &((n, l, q), on) in bits {
        w[[n, l, q]] = on;
    }
    w
}

/// Best fixed-line LP over every binary assignment; infeasible ones skipped.
pub fn enumerate(solved: &Solved) -> (f64, Array3<bool>, usize) {
    let cols: Vec<(usize, usize, usize)> = solved
        .instance
        .binary_columns()
        .into_iter()
        .map(|(k, _)| k)
        .collect();
    assert!(cols.len() <= 12, "{} binaries", cols.len());
    let mut best = (f64::NEG_INFINITY, None);
    let mut feasible = 0;
    for mask in 0u32..(1 << cols.len()) {
        let bits: Vec<_> = cols
            .iter()
            .enumerate()
            .map(|(i, &k)| (k, mask & (1 << i) != 0))
            .collect();
        let w = line_plan(&solved.problem, &bits);
        if let Ok(sol) = fix_and_solve_lp(&solved.instance, &w) {
            feasible += 1;
            if sol.objective > best.0 {
                best = (sol.objective, Some(w));
            }
        }
    }
    (
        best.0,
        best.1.expect("some assignment is feasible"),
        feasible,
    )
}

pub fn brute_force() -> Check {
    let start = Instant::now();
    let mut summary = Vec::new();
    for name in BRUTE_FORCE_CASES {
        let solved = solve(name, 2, 0.005);
        let (best, best_w, feasible) = enumerate(&solved);
        let tol = 0.005 * best.abs();
        if solved.mip.objective < best - tol || solved.mip.objective > best + 1e-9 * best.abs() {
            return Err(format!(
                "{name}: mip {} vs enumeration {best}",
                solved.mip.objective
            ));
        }
        let exact = solve_mip(&solved.instance, 0.0).map_err(|e| e.to_string())?;
        if exact.plan.w != best_w {
            return Err(format!("{name}: gap-0 selection differs from enumeration"));
        }
        summary.push(format!("{name} {feasible} plans"));
    }
    Ok(format!("{} in {:.1?}", summary.join(", "), start.elapsed()))
}

pub fn decomposition() -> Check {
    let mut worst: f64 = 0.0;
    let mut worst_aggregate: f64 = 0.0;
    let mut nodes = 0;
    for name in [
        "toy2",
        "tri3",
        "class-a",
        "class-b",
        "class-c",
        "zero-demand",
    ] {
        let solved = solve(name, 1, 0.005);
        let mut lps = vec![solved.reference.clone()];
        if !solved.portfolio().members.is_empty() {
            let (cf, report) = portfolio_report(&solved);
            let rel = report.aggregate.residual.abs() / solved.reference.objective.abs().max(1.0);
            if rel > DECOMPOSITION_TOL {
                return Err(format!("{name}: aggregate residual {rel:e}"));
            }
            worst_aggregate = worst_aggregate.max(rel);
            lps.push(cf);
        }
        for sol in &lps {
            for acc in surplus_decomposition(&solved.problem, sol) {
                nodes += 1;
                if acc.relative_residual() > DECOMPOSITION_TOL {
                    return Err(format!(
                        "{name} node {}: residual {:e}",
                        acc.node,
                        acc.relative_residual()
                    ));
                }
                worst = worst.max(acc.relative_residual());
            }
        }
    }
    Ok(format!(
        "{nodes} node identities, worst {worst:.1e}; worst aggregate {worst_aggregate:.1e}"
    ))
}

pub struct Ordering {
    pub objectives: [f64; 4],
}

/// Objectives of options 1, 2, 3 and the reference for the portfolio.
pub fn ordering_objectives(name: &str) -> Option<Ordering> {
    let solved = solve(name, 1, ORDERING_GAP);
    let subset = solved.portfolio();
    if subset.members.is_empty() {
        return None;
    }
    let o1 = solved
        .counterfactual(&subset, CounterfactualOption::FixGeneration, 0.0)
        .objective;
    let o2 = solved
        .counterfactual(&subset, CounterfactualOption::Regenerate, 0.0)
        .objective;
    let o3 = solved
        .counterfactual(
            &subset,
            CounterfactualOption::FreeLines { all_nodes: false },
            ORDERING_GAP,
        )
        .objective;
    Some(Ordering {
        objectives: [o1, o2, o3, solved.reference.objective],
    })
}

/// Pairwise check; LP comparisons get float slack, comparisons against a
/// MIP objective get the MIP gap.
pub fn ordered(o: &Ordering) -> Result<(), String> {
    let [o1, o2, o3, r] = o.objectives;
    let checks = [
        ("option 1 <= option 2", o1, o2, 1e-9),
        ("option 2 <= option 3", o2, o3, ORDERING_GAP),
        ("option 3 <= reference", o3, r, ORDERING_GAP),
    ];
    for (what, a, b, rel) in checks {
        if a > b + rel * b.abs() {
            return Err(format!("{what}: {a} > {b}"));
        }
    }
    Ok(())
}

pub fn ordering() -> Check {
    let start = Instant::now();
    let mut compared = 0;
    let mut trivial = Vec::new();
    for name in ORDERING_CASES {
        match ordering_objectives(name) {
            Some(o) => {
                ordered(&o).map_err(|e| format!("{name}: {e}"))?;
                compared += 1;
            }
            None => trivial.push(name),
        }
    }
    let note = if trivial.is_empty() {
        String::new()
    } else {
        format!("; no root lines at tight gap: {}", trivial.join(", "))
    };
    Ok(format!(
        "{compared} cases ordered in {:.1?}{note}",
        start.elapsed()
    ))
}

pub fn uniformity() -> Check {
    let set = fixtures::benefit_set();
    let portfolio = set.scope("portfolio").map_err(|e| e.to_string())?;
    let report = portfolio
        .allocate(Policy::LoadOnly, false)
        .map_err(|e| e.to_string())?;
    let ratios = benefit_cost_ratios(&report, portfolio.cost).map_err(|e| e.to_string())?;
    let paying: Vec<f64> = ratios.iter().filter_map(|(_, r)| *r).collect();
    let first = paying.first().copied().ok_or("no paying participant")?;
    if paying
        .iter()
        .any(|r| (r - first).abs() > 1e-12 * first.abs())
    {
        return Err(format!("benefit-cost ratios differ: {paying:?}"));
    }
    let projects = fixtures::printed_project_reports();
    let cmp = compare_scopes(&projects, &report, Some(&fixtures::portfolio_benefits()))
        .map_err(|e| e.to_string())?;
    let flagged = cmp.flagged();
    if flagged.is_empty() {
        return Err("no participant flagged".into());
    }
    Ok(format!(
        "{} payers at ratio {first:.4}; flagged {}",
        paying.len(),
        flagged
            .iter()
            .map(|p| p.label())
            .collect::<Vec<_>>()
            .join(", ")
    ))
}

pub fn toy_sweep_inputs() -> (Evaluation, FixedPlan, FixedPlan) {
    let solved = solve("toy2", 2, 0.0);
    let cf = solved.counterfactual(&solved.portfolio(), CounterfactualOption::Regenerate, 0.0);
    let (case, set) = load("toy2");
    let root = set.tree.root().expect("root");
    let base = set.tree.node(root).data.clone();
    let plan = FixedPlan::from_solution("expansion", &solved.problem, &solved.reference);
    let counter = FixedPlan::from_solution("counterfactual", &solved.problem, &cf);
    (Evaluation::new(case, base, set.grid.clone()), plan, counter)
}

pub fn sweep_determinism() -> Check {
    let (eval, plan, counter) = toy_sweep_inputs();
    let combos = eval.grid.enumerate().map_err(|e| e.to_string())?;
    if eval.grid.dimensions.len() != 3 || combos.len() != 27 {
        return Err(format!(
            "{} dimensions, {} combos",
            eval.grid.dimensions.len(),
            combos.len()
        ));
    }
    let start = Instant::now();
    let first = sweep(&eval, &plan, &counter, &combos).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    if elapsed.as_secs() >= 300 {
        return Err(format!("sweep took {elapsed:.1?}"));
    }
    if first.failed > 0 {
        return Err(format!("{} combos failed", first.failed));
    }
    for r in &first.results {
        if !r.shares.is_empty() {
            let total: f64 = r.shares.iter().map(|(_, s)| s).sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(format!("combo {} shares sum to {total}", r.label));
            }
        }
    }
    let again = sweep(&eval, &plan, &counter, &combos).map_err(|e| e.to_string())?;
    if first.to_csv() != again.to_csv() {
        return Err("rerun output differs".into());
    }
    Ok(format!("27 combos in {elapsed:.1?}, rerun byte-identical"))
}

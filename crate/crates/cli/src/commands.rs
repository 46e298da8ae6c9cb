use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use tepca::allocation::{
    compare_scopes, fixtures, fmt2, AllocationReport, BenefitSet, Participant, Policy,
};
use tepca::benefits::{surplus_decomposition, BenefitReport};
use tepca::counterfactual::{
    build_counterfactual, solve_counterfactual, CounterfactualOption, InvestmentSubset,
};
use tepca::evaluate::{
    ex_ante_vs_ex_post, sweep as run_sweep, AddedExpansion, Evaluation, FixedPlan,
};
use tepca::optimizer::{
    build_expansion_mip, fix_and_solve_lp, solve_mip, verify_kkt, ExpansionPlan, ModelInstance,
    PlanningProblem, PrimalDualSolution,
};
use tepca::scenario::ScenarioSet;
use tepca::system::SystemCase;
use tepca::timeseries::{case_net_load, cluster_days, TimeBlocks};

use crate::artifacts::{resolve_case, round6, CliResult, Failure, Outputs, PlanFile};
use crate::{BlockArgs, CaseArgs, ScopeArgs, SolverArgs, SweepArgs};

struct Loaded {
    case: SystemCase,
    set: ScenarioSet,
}

fn load(args: &CaseArgs) -> CliResult<Loaded> {
    let (case_path, scenario_path) =
        resolve_case(&args.case, &args.cases_dir, args.scenarios.as_deref())?;
    let case = SystemCase::load(&case_path)?;
    let set = ScenarioSet::load(&scenario_path)?;
    set.tree.validate(args.allow_multistage).into_result()?;
    Ok(Loaded { case, set })
}

fn check_blocks(blocks: &BlockArgs) -> CliResult<()> {
    if blocks.k < 1 {
        return Err(Failure::input("k must be >= 1"));
    }
    Ok(())
}

fn check_solver(solver: &SolverArgs) -> CliResult<()> {
    if !(solver.gap > 0.0 && solver.gap < 1.0) {
        return Err(Failure::input(format!(
            "gap {} must lie in (0, 1)",
            solver.gap
        )));
    }
    if let Some(t) = solver.time_limit {
        if !(t > 0.0) {
            return Err(Failure::input("time limit must be positive"));
        }
    }
    Ok(())
}

fn blocks_for(case: &SystemCase, k: usize, seed: u64) -> CliResult<TimeBlocks> {
    Ok(cluster_days(&case_net_load(case), k, seed)?)
}

fn problem_for(
    loaded: &Loaded,
    k: usize,
    seed: u64,
    allow_multistage: bool,
) -> CliResult<Arc<PlanningProblem>> {
    let blocks = blocks_for(&loaded.case, k, seed)?;
    let inputs = blocks.slice_inputs(&loaded.case.hourly)?;
    Ok(Arc::new(PlanningProblem::with_tree_shape(
        loaded.case.clone(),
        loaded.set.tree.clone(),
        inputs,
        allow_multistage,
    )?))
}

fn instance_for(
    problem: Arc<PlanningProblem>,
    solver: Option<&SolverArgs>,
) -> CliResult<ModelInstance> {
    let mut instance = build_expansion_mip(problem)?;
    if let Some(s) = solver {
        instance.options.mip_rel_gap = s.gap;
        instance.options.time_limit = s.time_limit;
    }
    Ok(instance)
}

/// Problem, instance and reference solution rebuilt from a plan file.
struct Reference {
    problem: Arc<PlanningProblem>,
    instance: ModelInstance,
    plan: ExpansionPlan,
    solution: PrimalDualSolution,
}

fn reference(
    loaded: &Loaded,
    args: &CaseArgs,
    file: &PlanFile,
    solver: Option<&SolverArgs>,
) -> CliResult<Reference> {
    if file.case != loaded.case.name {
        return Err(Failure::input(format!(
            "plan was made for case '{}', not '{}'",
            file.case, loaded.case.name
        )));
    }
    let problem = problem_for(loaded, file.k, file.seed, args.allow_multistage)?;
    let w = file.line_plan(&problem)?;
    let instance = instance_for(problem.clone(), solver)?;
    let solution = fix_and_solve_lp(&instance, &w)?;
    let plan = solution.plan.clone();
    Ok(Reference {
        problem,
        instance,
        plan,
        solution,
    })
}

fn subsets(scope: &str, r: &Reference) -> CliResult<Vec<InvestmentSubset>> {
    let plan = &r.plan;
    let out = match scope {
        "portfolio" => vec![InvestmentSubset::portfolio(&r.instance, plan)],
        "projects" => InvestmentSubset::projects(&r.instance, plan),
        "all" => {
            let mut v = InvestmentSubset::projects(&r.instance, plan);
            v.push(InvestmentSubset::portfolio(&r.instance, plan));
            v
        }
        s => match s.strip_prefix("project:") {
            Some(line) => vec![InvestmentSubset::project(&r.instance, plan, line)?],
            None => vec![InvestmentSubset::parse(s, &r.instance, plan)?],
        },
    };
    Ok(out)
}

fn subset_cost(problem: &PlanningProblem, subset: &InvestmentSubset) -> f64 {
    subset
        .members
        .iter()
        .map(|&(_, l, q)| problem.case.catalog.cost[[l, q]])
        .sum()
}

fn stamp() -> String {
    let t = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    format!("[unix {t}]")
}

pub fn validate(args: &CaseArgs) -> CliResult<()> {
    let loaded = load(args)?;
    let case = &loaded.case;
    let tree = &loaded.set.tree;
    let report = tree.validate(args.allow_multistage);
    println!("case {}", case.name);
    println!(
        "buses {} lines {} technologies {} increments {} hours {}",
        case.bus_count(),
        case.line_count(),
        case.tech_count(),
        case.catalog.len(),
        case.hourly.hours()
    );
    println!("scenario nodes {} horizon {}", tree.len(), tree.horizon());
    println!(
        "grid dimensions {} combinations {}",
        loaded.set.grid.dimensions.len(),
        loaded.set.grid.combination_count()
    );
    for w in &case.warnings {
        println!("warning: {w}");
    }
    for w in &report.warnings {
        println!("warning: {w}");
    }
    Ok(())
}

pub fn cluster(args: &CaseArgs, blocks: &BlockArgs, out: &Path) -> CliResult<()> {
    check_blocks(blocks)?;
    let loaded = load(args)?;
    let tb = blocks_for(&loaded.case, blocks.k, blocks.seed)?;
    let mut buf = Vec::new();
    tb.write_csv(&mut buf)?;
    let mut outputs = Outputs::default();
    outputs.add("blocks.csv", String::from_utf8_lossy(&buf).into_owned());
    outputs.json("clusters.json", &tb)?;
    outputs.write(out)
}

pub fn plan(args: &CaseArgs, blocks: &BlockArgs, solver: &SolverArgs, out: &Path) -> CliResult<()> {
    check_blocks(blocks)?;
    check_solver(solver)?;
    let loaded = load(args)?;
    let problem = problem_for(&loaded, blocks.k, blocks.seed, args.allow_multistage)?;
    let instance = instance_for(problem.clone(), Some(solver))?;
    let mut log = String::new();
    let _ = writeln!(
        log,
        "{} building expansion model for {}",
        stamp(),
        loaded.case.name
    );
    let _ = writeln!(
        log,
        "{} {} binaries, {} columns, {} rows",
        stamp(),
        instance.binary_columns().len(),
        instance.lp.col_cost.len(),
        instance.lp.row_lower.len()
    );
    let mip = solve_mip(&instance, solver.gap)?;
    let _ = writeln!(
        log,
        "{} mip objective {} bound {:?} gap {:?}",
        stamp(),
        mip.objective,
        mip.dual_bound,
        mip.gap
    );
    let lp = fix_and_solve_lp(&instance, &mip.plan.w)?;
    let _ = writeln!(log, "{} fixed-line lp objective {}", stamp(), lp.objective);
    let file = PlanFile {
        case: loaded.case.name.clone(),
        k: blocks.k,
        seed: blocks.seed,
        gap: solver.gap,
        objective: mip.objective,
        dual_bound: mip.dual_bound,
        mip_gap: mip.gap,
        lp_objective: lp.objective,
        selections: PlanFile::selections_of(&problem, &mip.plan),
        generation: PlanFile::generation_of(&problem, &lp.plan),
    };
    let mut table = String::from("node\tline\tincrement\n");
    for s in &file.selections {
        let _ = writeln!(table, "{}\t{}\t{}", s.node, s.line, s.increment);
    }
    let mut outputs = Outputs::default();
    outputs.json("plan.json", &file)?;
    outputs.add("plan.tsv", table);
    outputs.add("solve.log", log);
    println!("objective {}", mip.objective);
    println!(
        "root selections {}",
        file.selections
            .iter()
            .filter(|s| s.node == problem.tree.node(problem.root).id)
            .count()
    );
    outputs.write(out)
}

pub fn prices(args: &CaseArgs, plan: &Path, out: &Path) -> CliResult<()> {
    let loaded = load(args)?;
    let file = PlanFile::load(plan)?;
    let r = reference(&loaded, args, &file, None)?;
    let (problem, sol) = (&r.problem, &r.solution);
    let case = &problem.case;
    let mut prices = String::from("node,bus,block,weight,price\n");
    let (nn, nb, nt) = sol.price.dim();
    for n in 0..nn {
        for b in 0..nb {
            for t in 0..nt {
                let _ = writeln!(
                    prices,
                    "{},{},{},{},{}",
                    problem.tree.node(n).id,
                    case.buses[b].id,
                    t,
                    problem.blocks.weights[t],
                    round6(sol.price[[n, b, t]])
                );
            }
        }
    }
    let mut rps = String::from("node,rps_price\n");
    for n in 0..nn {
        let _ = writeln!(
            rps,
            "{},{}",
            problem.tree.node(n).id,
            round6(sol.rps_price[n])
        );
    }
    let flows = sol.flows(problem);
    let mut flow_csv = String::from("node,line,block,flow,capacity\n");
    for ((n, l, t), v) in flows.indexed_iter() {
        let _ = writeln!(
            flow_csv,
            "{},{},{},{},{}",
            problem.tree.node(n).id,
            case.lines[l].id,
            t,
            round6(*v),
            round6(sol.line_capacity[[n, l]])
        );
    }
    let mut rents = String::from("node,bus,tech,block,capacity_rent\n");
    for ((n, b, g, t), v) in sol.capacity_rent.indexed_iter() {
        if problem.is_active(b, g) {
            let _ = writeln!(
                rents,
                "{},{},{},{},{}",
                problem.tree.node(n).id,
                case.buses[b].id,
                case.technologies[g].id,
                t,
                round6(*v)
            );
        }
    }
    let kkt = verify_kkt(problem, sol);
    let accounts = surplus_decomposition(problem, sol);
    let mut outputs = Outputs::default();
    outputs.add("prices.csv", prices);
    outputs.add("rps_prices.csv", rps);
    outputs.add("flows.csv", flow_csv);
    outputs.add("capacity_rents.csv", rents);
    outputs.json("kkt.json", &kkt)?;
    outputs.json("surplus.json", &accounts)?;
    println!(
        "production violation {:e}, zero-profit violation {:e}, duality gap {:e}",
        kkt.max_production_violation, kkt.max_zero_profit_violation, kkt.duality_gap
    );
    outputs.write(out)
}

#[derive(Serialize)]
struct CounterfactualRecord {
    scope: String,
    option: u8,
    removed: Vec<String>,
    cost: f64,
    reference_objective: f64,
    objective: f64,
    objective_delta: f64,
    generation: Vec<crate::artifacts::GenerationChange>,
}

fn option_of(scope: &ScopeArgs) -> CliResult<CounterfactualOption> {
    Ok(CounterfactualOption::from_number(
        scope.option,
        scope.all_nodes,
    )?)
}

fn member_labels(problem: &PlanningProblem, subset: &InvestmentSubset) -> Vec<String> {
    subset
        .members
        .iter()
        .map(|&(n, l, q)| {
            format!(
                "{}@{}:{}",
                problem.case.lines[l].id,
                problem.tree.node(n).id,
                problem.case.catalog.increments[q].id
            )
        })
        .collect()
}

pub fn counterfactual(
    args: &CaseArgs,
    plan: &Path,
    scope: &ScopeArgs,
    solver: &SolverArgs,
    out: &Path,
) -> CliResult<()> {
    check_solver(solver)?;
    let option = option_of(scope)?;
    let loaded = load(args)?;
    let file = PlanFile::load(plan)?;
    let r = reference(&loaded, args, &file, Some(solver))?;
    let subsets = subsets(&scope.scope, &r)?;
    let programs = subsets
        .iter()
        .map(|s| build_counterfactual(&r.instance, &r.plan, s, option).map(|cf| (s, cf)))
        .collect::<Result<Vec<_>, _>>()?;
    let mut records = Vec::new();
    for (subset, cf) in programs {
        let sol = solve_counterfactual(&cf, solver.gap)?;
        records.push(CounterfactualRecord {
            scope: subset.scope.label(),
            option: option.number(),
            removed: member_labels(&r.problem, subset),
            cost: subset_cost(&r.problem, subset),
            reference_objective: r.solution.objective,
            objective: sol.objective,
            objective_delta: r.solution.objective - sol.objective,
            generation: PlanFile::generation_of(&r.problem, &sol.plan),
        });
    }
    let mut outputs = Outputs::default();
    outputs.json("counterfactuals.json", &records)?;
    outputs.write(out)
}

fn benefit_reports(
    r: &Reference,
    subsets: &[InvestmentSubset],
    option: CounterfactualOption,
    gap: f64,
) -> CliResult<Vec<BenefitReport>> {
    let programs = subsets
        .iter()
        .map(|s| build_counterfactual(&r.instance, &r.plan, s, option).map(|cf| (s, cf)))
        .collect::<Result<Vec<_>, _>>()?;
    let mut reports = Vec::new();
    for (subset, cf) in programs {
        let sol = solve_counterfactual(&cf, gap)?;
        reports.push(BenefitReport::build(
            &r.problem,
            &subset.scope.label(),
            subset_cost(&r.problem, subset),
            &r.solution,
            &sol,
        )?);
    }
    Ok(reports)
}

pub fn benefits(
    args: &CaseArgs,
    plan: &Path,
    scope: &ScopeArgs,
    solver: &SolverArgs,
    out: &Path,
) -> CliResult<()> {
    check_solver(solver)?;
    let option = option_of(scope)?;
    let loaded = load(args)?;
    let file = PlanFile::load(plan)?;
    let r = reference(&loaded, args, &file, Some(solver))?;
    let subsets = subsets(&scope.scope, &r)?;
    let reports = benefit_reports(&r, &subsets, option, solver.gap)?;
    let mut outputs = Outputs::default();
    let set = BenefitSet {
        scopes: reports.iter().map(|b| b.scope_benefits()).collect(),
    };
    outputs.json("benefits.json", &set)?;
    for b in &reports {
        outputs.add(format!("benefits_{}.tsv", b.scope), b.to_table());
        outputs.json(format!("benefits_{}.json", b.scope), b)?;
        println!(
            "{}: objective delta {}, decomposition residual {:e}",
            b.scope,
            fmt2(b.aggregate.objective_delta),
            b.aggregate.residual
        );
    }
    outputs.write(out)
}

/// Scopes as rows, participants as columns, two-decimal percentages.
fn allocation_table(reports: &[AllocationReport]) -> String {
    let mut participants: Vec<Participant> = Vec::new();
    for r in reports {
        for s in &r.shares {
            if !participants.contains(&s.participant) {
                participants.push(s.participant.clone());
            }
        }
    }
    let mut out = String::from("scope");
    for p in &participants {
        let _ = write!(out, "\t{}", p.label());
    }
    out.push_str("\tcost\n");
    for r in reports {
        out.push_str(&r.scope);
        for p in &participants {
            let _ = write!(out, "\t{}", fmt2(100.0 * r.ratio_of(p).unwrap_or(0.0)));
        }
        let _ = writeln!(out, "\t{}", fmt2(r.cost));
    }
    out
}

pub fn allocate(
    benefits: &Path,
    scope: &str,
    policy: Policy,
    compensate: bool,
    out: &Path,
) -> CliResult<()> {
    let set = BenefitSet::load(benefits)?;
    let names: Vec<String> = match scope {
        "all" => set.scopes.iter().map(|s| s.scope.clone()).collect(),
        s => vec![s.strip_prefix("project:").unwrap_or(s).to_string()],
    };
    let reports = names
        .iter()
        .map(|n| set.scope(n).and_then(|s| s.allocate(policy, compensate)))
        .collect::<Result<Vec<_>, _>>()?;
    let mut outputs = Outputs::default();
    for r in &reports {
        outputs.add(format!("allocation_{}.tsv", r.scope), r.to_table());
        outputs.json(format!("allocation_{}.json", r.scope), r)?;
    }
    outputs.add("allocation_table.tsv", allocation_table(&reports));
    let portfolio = reports.iter().find(|r| r.scope == "portfolio");
    let projects: Vec<AllocationReport> = reports
        .iter()
        .filter(|r| r.scope != "portfolio")
        .cloned()
        .collect();
    if let (Some(p), false) = (portfolio, projects.is_empty()) {
        let cmp = compare_scopes(&projects, p, None)?;
        for f in cmp.flagged() {
            println!(
                "flagged: {} has negative portfolio benefit but pays under project summation",
                f.label()
            );
        }
        outputs.add("scope_comparison.tsv", cmp.to_table());
        outputs.json("scope_comparison.json", &cmp)?;
    }
    for r in &reports {
        print!("{}", r.to_table());
    }
    outputs.write(out)
}

#[derive(Deserialize)]
struct ExAnteShare {
    participant: Participant,
    ratio: f64,
}

#[derive(Deserialize)]
struct ExAnteFile {
    scope: String,
    cost: f64,
    shares: Vec<ExAnteShare>,
}

fn read_ex_ante(path: &Path) -> CliResult<AllocationReport> {
    let text = std::fs::read_to_string(path)
        .map_err(|_| Failure::input(format!("not found: {}", path.display())))?;
    let f: ExAnteFile = serde_json::from_str(&text)
        .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    let ratios: Vec<(Participant, f64)> = f
        .shares
        .into_iter()
        .map(|s| (s.participant, s.ratio))
        .collect();
    Ok(AllocationReport::from_ratios(&f.scope, f.cost, &ratios)?)
}

#[derive(Serialize)]
struct SweepSummary<'a> {
    evaluation: &'a str,
    plan: &'a str,
    counterfactual: &'a str,
    added: &'a [String],
    policy: Policy,
    frozen_fleet: bool,
    combinations: usize,
    failed: usize,
    ex_ante: Option<Vec<(String, f64)>>,
    divergence_status: String,
}

pub fn sweep(args: &SweepArgs) -> CliResult<()> {
    check_solver(&args.solver)?;
    let option = option_of(&args.scope)?;
    if args.bins == 0 {
        return Err(Failure::input("bins must be >= 1"));
    }
    let loaded = load(&args.case)?;
    let file = PlanFile::load(&args.plan)?;
    let mut grid = loaded.set.grid.clone();
    if let Some(d) = args.dims {
        if d > grid.dimensions.len() {
            return Err(Failure::input(format!(
                "grid has {} dimensions, {d} requested",
                grid.dimensions.len()
            )));
        }
        grid = grid.truncated(d);
    }
    let combos = grid.enumerate()?;
    let added = args
        .added
        .iter()
        .map(|s| s.parse::<AddedExpansion>())
        .collect::<Result<Vec<_>, _>>()?;
    for a in &added {
        loaded.case.line_index(&a.line)?;
        loaded.case.catalog.index_of(&a.increment)?;
    }
    let ex_ante_file = args.ex_ante.as_deref().map(read_ex_ante).transpose()?;
    if !matches!(
        args.against.as_str(),
        "counterfactual" | "status-quo" | "plan"
    ) {
        return Err(Failure::input(format!(
            "unknown comparison '{}' (counterfactual | status-quo | plan)",
            args.against
        )));
    }

    let r = reference(&loaded, &args.case, &file, Some(&args.solver))?;
    let plan = FixedPlan::from_solution("plan", &r.problem, &r.solution);
    let portfolio = InvestmentSubset::portfolio(&r.instance, &r.plan);
    let counter = match args.against.as_str() {
        "plan" => FixedPlan {
            label: "plan".into(),
            ..plan.clone()
        },
        "status-quo" => FixedPlan::status_quo("status-quo", &loaded.case),
        _ => {
            let cf = build_counterfactual(&r.instance, &r.plan, &portfolio, option)?;
            let sol = solve_counterfactual(&cf, args.solver.gap)?;
            FixedPlan::from_solution("counterfactual", &r.problem, &sol)
        }
    };
    let ex_ante = match ex_ante_file {
        Some(a) => Some(a),
        None if portfolio.members.is_empty() => None,
        None => {
            let reports = benefit_reports(
                &r,
                std::slice::from_ref(&portfolio),
                option,
                args.solver.gap,
            )?;
            match reports[0].scope_benefits().allocate(args.policy, false) {
                Ok(a) => Some(a),
                Err(tepca::Error::NoBeneficiaries) => None,
                Err(e) => return Err(e.into()),
            }
        }
    };

    let root = loaded
        .set
        .tree
        .root()
        .ok_or_else(|| Failure::input("scenario tree has no root"))?;
    let mut eval = Evaluation::new(
        loaded.case.clone(),
        loaded.set.tree.node(root).data.clone(),
        grid,
    );
    eval.frozen_fleet = args.frozen_fleet;
    eval.policy = args.policy;
    eval.added = added;
    let result = run_sweep(&eval, &plan, &counter, &combos)?;

    let mut outputs = Outputs::default();
    outputs.add("sweep.csv", result.to_csv());
    let mut status = "no ex ante allocation".to_string();
    if let Some(a) = &ex_ante {
        match ex_ante_vs_ex_post(&result, a, args.bins) {
            Ok(d) => {
                status = d.status.clone();
                outputs.add("divergence.csv", d.to_csv());
                outputs.add("histograms.csv", d.histogram_csv());
                outputs.json("divergence.json", &d)?;
            }
            Err(e) => status = e.to_string(),
        }
    }
    let summary = SweepSummary {
        evaluation: &result.evaluation,
        plan: &result.plan,
        counterfactual: &result.counterfactual,
        added: &result.added,
        policy: result.policy,
        frozen_fleet: result.frozen_fleet,
        combinations: result.results.len(),
        failed: result.failed,
        ex_ante: ex_ante.as_ref().map(|a| {
            a.shares
                .iter()
                .map(|s| (s.participant.label(), round6(s.ratio)))
                .collect()
        }),
        divergence_status: status,
    };
    outputs.json("sweep.json", &summary)?;
    outputs.write(&args.out)?;
    println!(
        "{} combinations, {} failed",
        result.results.len(),
        result.failed
    );
    if result.failed > 0 {
        let first = result
            .results
            .iter()
            .find_map(|r| r.error.as_ref().map(|e| format!("{}: {e}", r.label)))
            .unwrap_or_default();
        return Err(Failure {
            code: 4,
            kind: "solver",
            message: format!(
                "{} of {} combinations failed; first: {first}",
                result.failed,
                result.results.len()
            ),
        });
    }
    Ok(())
}

pub fn fixtures(out: &Path) -> CliResult<()> {
    let mut outputs = Outputs::default();
    outputs.json("eight_bus.json", &fixtures::benefit_set())?;
    let projects = fixtures::printed_project_reports();
    let portfolio = fixtures::benefit_set()
        .scope("portfolio")?
        .allocate(Policy::LoadOnly, false)?;
    let mut rows = projects.clone();
    rows.push(portfolio.clone());
    outputs.add("eight_bus_ratios.tsv", allocation_table(&rows));
    let cmp = compare_scopes(&projects, &portfolio, Some(&fixtures::portfolio_benefits()))?;
    outputs.add("eight_bus_scope_comparison.tsv", cmp.to_table());
    outputs.json("no_beneficiaries.json", &fixtures::no_beneficiaries())?;
    outputs.write(out)
}

/// Concatenates the tab-separated tables in `dir` into report.md.
pub fn report(dir: &Path) -> CliResult<()> {
    let entries = std::fs::read_dir(dir)
        .map_err(|_| Failure::input(format!("not found: {}", dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "tsv"))
        .collect();
    files.sort();
    let mut out = String::from("# Run report\n");
    let plan = dir.join("plan.json");
    if plan.is_file() {
        let f = PlanFile::load(&plan)?;
        let _ = writeln!(
            out,
            "\n## Plan\n\ncase {}, {} representative days, seed {}, gap {}\n\nobjective {}, fixed-line LP objective {}\n",
            f.case, f.k, f.seed, f.gap, f.objective, f.lp_objective
        );
        for s in &f.selections {
            let _ = writeln!(out, "- node {}: {} {}", s.node, s.line, s.increment);
        }
    }
    let sweep = dir.join("sweep.json");
    if sweep.is_file() {
        let text = std::fs::read_to_string(&sweep).map_err(|e| Failure::input(e.to_string()))?;
        let _ = writeln!(out, "\n## Sweep\n\n```json\n{}```", text);
    }
    for f in &files {
        let text = std::fs::read_to_string(f).map_err(|e| Failure::input(e.to_string()))?;
        let name = f
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let _ = writeln!(out, "\n## {name}\n\n```\n{}```", text);
    }
    let mut outputs = Outputs::default();
    outputs.add("report.md", out);
    outputs.write(dir)
}

#![allow(dead_code)]

pub mod criteria;

use std::path::PathBuf;
use std::sync::Arc;

use tepca::counterfactual::{
    build_counterfactual, solve_counterfactual, CounterfactualOption, InvestmentSubset,
};
use tepca::optimizer::{
    build_expansion_mip, fix_and_solve_lp, solve_mip, MipOutcome, ModelInstance, PlanningProblem,
    PrimalDualSolution,
};
use tepca::scenario::ScenarioSet;
use tepca::system::SystemCase;
use tepca::timeseries::{case_net_load, cluster_days};

pub fn cases_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../cases")
}

pub fn load(name: &str) -> (SystemCase, ScenarioSet) {
    let dir = cases_dir().join(name);
    let case = SystemCase::load(&dir.join("case.toml")).expect("case loads");
    let set = ScenarioSet::load(&dir.join("scenarios.toml")).expect("scenarios load");
    (case, set)
}

/// Case + tree on `k` representative days.
pub fn problem(name: &str, k: usize) -> Arc<PlanningProblem> {
    let (case, set) = load(name);
    let blocks = cluster_days(&case_net_load(&case), k, 7).expect("clustering");
    let inputs = blocks.slice_inputs(&case.hourly).expect("slicing");
    Arc::new(PlanningProblem::new(case, set.tree, inputs).expect("problem"))
}

pub struct Solved {
    pub problem: Arc<PlanningProblem>,
    pub instance: ModelInstance,
    pub mip: MipOutcome,
    pub reference: PrimalDualSolution,
}

/// Expansion MIP followed by the fixed-w LP.
pub fn solve(name: &str, k: usize, gap: f64) -> Solved {
    let problem = problem(name, k);
    let instance = build_expansion_mip(problem.clone()).expect("model builds");
    let mip = solve_mip(&instance, gap).expect("mip solves");
    let reference = fix_and_solve_lp(&instance, &mip.plan.w).expect("lp solves");
    Solved {
        problem,
        instance,
        mip,
        reference,
    }
}

impl Solved {
    pub fn counterfactual(
        &self,
        subset: &InvestmentSubset,
        option: CounterfactualOption,
        gap: f64,
    ) -> PrimalDualSolution {
        let cf = build_counterfactual(&self.instance, &self.mip.plan, subset, option)
            .expect("counterfactual builds");
        solve_counterfactual(&cf, gap).expect("counterfactual solves")
    }

    pub fn portfolio(&self) -> InvestmentSubset {
        InvestmentSubset::portfolio(&self.instance, &self.mip.plan)
    }
}

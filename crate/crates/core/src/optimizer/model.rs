//! Assembly of the stochastic expansion program, its fixed-binary LP, and
//! the conversion of raw duals into prices.

use std::sync::Arc;

use ndarray::{Array2, Array3, Array4};
use serde::Serialize;

use super::highs::HighsBackend;
use super::lp::{Col, LinearProgram, RawSolution, Row, Sense, SolveOptions, SolverBackend};
use crate::error::{Error, Result};
use crate::scenario::ScenarioTree;
use crate::system::SystemCase;
use crate::timeseries::BlockInputs;

/// ΔG above this is "built".
pub const BUILD_TOLERANCE: f64 = 1e-3;
/// Binary values are rounded with this tolerance.
pub const BINARY_TOLERANCE: f64 = 1e-6;

/// Node data resolved against the case defaults.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedNode {
    /// φₙ·ζ_δ(n).
    pub weight: f64,
    /// Σ of `weight` over the subtree rooted here.
    pub subtree_weight: f64,
    /// `demand[[b, t]]`, MW.
    pub demand: Array2<f64>,
    /// C^EN by technology, $/MWh.
    pub fuel_cost: Vec<f64>,
    /// C^INV by technology, $/MW-yr.
    pub investment_cost: Vec<f64>,
    pub rps: f64,
    /// 𝒫(n): root first, `n` last.
    pub path: Vec<usize>,
}

impl ResolvedNode {
    /// 𝒫(n₋), the nodes whose line decisions are in service at this node.
    pub fn line_path(&self) -> &[usize] {
        &self.path[..self.path.len() - 1]
    }
}

/// Everything needed to assemble one instance.
#[derive(Debug, Clone, Serialize)]
pub struct PlanningProblem {
    pub case: SystemCase,
    pub tree: ScenarioTree,
    pub blocks: BlockInputs,
    pub nodes: Vec<ResolvedNode>,
    pub root: usize,
    /// Whether ΔḠ variables exist.
    pub allow_retirement: bool,
    /// (bus, technology) pairs that carry capacity and production columns.
    pub active: Array2<bool>,
}

impl PlanningProblem {
    pub fn new(case: SystemCase, tree: ScenarioTree, blocks: BlockInputs) -> Result<Self> {
        Self::with_tree_shape(case, tree, blocks, false)
    }

    /// As [`PlanningProblem::new`]; `allow_multistage` accepts trees that
    /// branch below depth 2.
    pub fn with_tree_shape(
        case: SystemCase,
        tree: ScenarioTree,
        blocks: BlockInputs,
        allow_multistage: bool,
    ) -> Result<Self> {
        tree.validate(allow_multistage).into_result()?;
        let root = tree
            .root()
            .ok_or_else(|| Error::input("scenario tree has no root"))?;
        let (nb, ng) = (case.bus_count(), case.tech_count());
        if blocks.demand.dim() != (nb, blocks.weights.len())
            || blocks.availability.dim() != (nb, ng, blocks.weights.len())
        {
            return Err(Error::input("block inputs do not match case dimensions"));
        }
        if blocks.weights.is_empty() {
            return Err(Error::input("no time blocks"));
        }
        if let Some(t) = blocks
            .weights
            .iter()
            .position(|&w| !(w > 0.0 && w.is_finite()))
        {
            return Err(Error::input(format!(
                "time block {t} has non-positive weight"
            )));
        }
        let mut nodes = Vec::with_capacity(tree.len());
        for n in 0..tree.len() {
            let node = tree.node(n);
            let weight = tree.node_weight(n);
            if !(weight > 0.0) {
                return Err(Error::input(format!(
                    "node '{}' has zero weight; prices cannot be unscaled",
                    node.id
                )));
            }
            for id in node
                .data
                .fuel_cost
                .keys()
                .chain(node.data.investment_cost.keys())
            {
                case.tech_index(id)?;
            }
            let fuel_cost = case
                .technologies
                .iter()
                .map(|t| {
                    node.data
                        .fuel_cost
                        .get(&t.id)
                        .copied()
                        .unwrap_or(t.fuel_cost)
                })
                .collect();
            let investment_cost = case
                .technologies
                .iter()
                .map(|t| {
                    node.data
                        .investment_cost
                        .get(&t.id)
                        .copied()
                        .unwrap_or(t.investment_cost)
                })
                .collect();
            if !(0.0..=1.0).contains(&node.data.rps) {
                return Err(Error::input(format!(
                    "node '{}' rps outside [0, 1]",
                    node.id
                )));
            }
            if node.data.rps > 0.0 && !case.technologies.iter().any(|t| t.renewable) {
                return Err(Error::input(format!(
                    "node '{}' has an RPS target but the case has no renewable technology",
                    node.id
                )));
            }
            nodes.push(ResolvedNode {
                weight,
                subtree_weight: tree.subtree_weight(n),
                demand: &blocks.demand * node.data.demand_growth,
                fuel_cost,
                investment_cost,
                rps: node.data.rps,
                path: tree.path_to_root(n)?,
            });
        }
        let active = Array2::from_shape_fn((nb, ng), |(b, g)| {
            case.existing[[b, g]] > 0.0 || case.technologies[g].buildable
        });
        Ok(PlanningProblem {
            case,
            tree,
            blocks,
            nodes,
            root,
            allow_retirement: true,
            active,
        })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn block_count(&self) -> usize {
        self.blocks.weights.len()
    }

    pub fn segment_count(&self) -> usize {
        self.case.penalty.segments.len()
    }

    /// Whether (b, g) can ever hold capacity.
    pub fn is_active(&self, b: usize, g: usize) -> bool {
        self.active[[b, g]]
    }

    /// Whether node `n` has line decision variables (a line built at a leaf
    /// never enters service).
    pub fn has_line_decisions(&self, n: usize) -> bool {
        !self.tree.children(n).is_empty()
    }
}

/// Column and row maps of an assembled instance.
#[derive(Debug, Clone)]
pub struct ModelIndex {
    /// `w[[n, l, q]]`.
    pub w: Array3<Option<Col>>,
    /// `build[[n, b, g]]` is ΔG.
    pub build: Array3<Option<Col>>,
    /// `retire[[n, b, g]]` is ΔḠ.
    pub retire: Array3<Option<Col>>,
    /// `capacity[[n, b, g]]` is G.
    pub capacity: Array3<Option<Col>>,
    /// `p[[n, b, g, t]]`.
    pub p: Array4<Option<Col>>,
    /// `z[[n, b, t, i]]`.
    pub z: Array4<Col>,
    /// `ni[[n, b, t]]`.
    pub ni: Array3<Col>,
    /// `sl[[n, l, t]]`.
    pub sl: Array3<Col>,
    pub capacity_rows: Array3<Option<Row>>,
    pub production_rows: Array4<Option<Row>>,
    pub rps_rows: Vec<Row>,
    pub injection_rows: Array3<Row>,
    /// Upper and lower flow rows; absent when the line carries no flow.
    pub flow_rows: Array3<Option<(Row, Row)>>,
    pub balance_rows: Array2<Row>,
    /// `segment_rows[[n, t, i]]`, absent for uncapped segments.
    pub segment_rows: Array3<Option<Row>>,
}

/// An assembled program with its index maps and solve settings.
#[derive(Clone)]
pub struct ModelInstance {
    pub problem: Arc<PlanningProblem>,
    pub lp: LinearProgram,
    pub index: ModelIndex,
    pub options: SolveOptions,
    pub backend: Arc<dyn SolverBackend>,
}

impl std::fmt::Debug for ModelInstance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ModelInstance")
            .field("cols", &self.lp.num_cols())
            .field("rows", &self.lp.num_rows())
            .field("backend", &self.backend.name())
            .finish()
    }
}

/// Transmission and generation decisions over the whole tree.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpansionPlan {
    /// `w[[n, l, q]]`.
    pub w: Array3<bool>,
    /// ΔG, MW.
    pub build: Array3<f64>,
    /// ΔḠ, MW.
    pub retire: Array3<f64>,
}

impl ExpansionPlan {
    pub fn empty(
        nodes: usize,
        lines: usize,
        increments: usize,
        buses: usize,
        techs: usize,
    ) -> Self {
        ExpansionPlan {
            w: Array3::from_elem((nodes, lines, increments), false),
            build: Array3::zeros((nodes, buses, techs)),
            retire: Array3::zeros((nodes, buses, techs)),
        }
    }

    /// Selected (line, increment) pairs at node `n`.
    pub fn selected_at(&self, n: usize) -> Vec<(usize, usize)> {
        let (_, nl, nq) = self.w.dim();
        (0..nl)
            .flat_map(|l| (0..nq).map(move |q| (l, q)))
            .filter(|&(l, q)| self.w[[n, l, q]])
            .collect()
    }

    pub fn binary_count(&self) -> usize {
        self.w.iter().filter(|&&v| v).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MipOutcome {
    pub plan: ExpansionPlan,
    pub objective: f64,
    pub dual_bound: Option<f64>,
    pub gap: Option<f64>,
}

/// Primal quantities and unscaled duals of a solved LP.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrimalDualSolution {
    pub objective: f64,
    /// Dual objective from the reported multipliers.
    pub dual_objective: f64,
    pub plan: ExpansionPlan,
    /// G, MW, `[[n, b, g]]`.
    pub capacity: Array3<f64>,
    /// L, MW, `[[n, l]]`.
    pub line_capacity: Array2<f64>,
    /// p, MW, `[[n, b, g, t]]`.
    pub production: Array4<f64>,
    /// z, MW, `[[n, b, t, i]]`.
    pub curtailment: Array4<f64>,
    /// sl, MW, `[[n, l, t]]`.
    pub line_slack: Array3<f64>,
    /// NI, MW, `[[n, b, t]]`.
    pub injection: Array3<f64>,
    /// π, $/MWh, `[[n, b, t]]`.
    pub price: Array3<f64>,
    /// θ, $/MWh, `[[n, b, g, t]]`.
    pub capacity_rent: Array4<f64>,
    /// ν, $/MWh, per node.
    pub rps_price: Vec<f64>,
    pub basis_signature: Option<u64>,
    pub coefficient_hash: u64,
}

impl PrimalDualSolution {
    /// Flow on every line, `[[n, l, t]]`.
    pub fn flows(&self, problem: &PlanningProblem) -> Array3<f64> {
        let (nn, nb, nt) = self.injection.dim();
        let nl = problem.case.line_count();
        let mut out = Array3::zeros((nn, nl, nt));
        let sf = &problem.case.shift_factors;
        for n in 0..nn {
            for t in 0..nt {
                let inj: Vec<f64> = (0..nb).map(|b| self.injection[[n, b, t]]).collect();
                let f = crate::system::flows_unchecked(sf, &inj);
                for l in 0..nl {
                    out[[n, l, t]] = f[l];
                }
            }
        }
        out
    }
}

/// Assembles the expansion program (binary line increments) with the
/// default HiGHS backend.
pub fn build_expansion_mip(problem: Arc<PlanningProblem>) -> Result<ModelInstance> {
    build_with_backend(problem, Arc::new(HighsBackend::default()))
}

pub fn build_with_backend(
    problem: Arc<PlanningProblem>,
    backend: Arc<dyn SolverBackend>,
) -> Result<ModelInstance> {
    let pr = &*problem;
    let case = &pr.case;
    let (nn, nb, ng, nl) = (
        pr.node_count(),
        case.bus_count(),
        case.tech_count(),
        case.line_count(),
    );
    let (nq, nt, ni) = (case.catalog.len(), pr.block_count(), pr.segment_count());
    if case.catalog.cost.dim() != (nl, nq) {
        return Err(Error::input(
            "increment cost table does not match lines × increments",
        ));
    }
    if case.existing.dim() != (nb, ng) {
        return Err(Error::input(
            "existing capacity table does not match buses × technologies",
        ));
    }
    let gamma_load = case.penalty.load_value;
    let gamma_line = case.penalty.line_violation_price;
    let tw = &pr.blocks.weights;
    let inf = f64::INFINITY;

    let mut lp = LinearProgram::new(Sense::Maximize);
    let node_id = |n: usize| pr.tree.node(n).id.as_str();

    let mut w = Array3::from_elem((nn, nl, nq), None);
    for n in 0..nn {
        if !pr.has_line_decisions(n) {
            continue;
        }
        let sw = pr.nodes[n].subtree_weight;
        for l in 0..nl {
            if !case.lines[l].expandable {
                continue;
            }
            for q in 0..nq {
                let name = format!(
                    "w[{},{},{}]",
                    node_id(n),
                    case.lines[l].id,
                    case.catalog.increments[q].id
                );
                let cost = -case.catalog.cost[[l, q]] * sw;
                w[[n, l, q]] = Some(lp.add_col(name, cost, 0.0, 1.0, true));
            }
        }
    }

    let mut build = Array3::from_elem((nn, nb, ng), None);
    let mut retire = Array3::from_elem((nn, nb, ng), None);
    let mut capacity = Array3::from_elem((nn, nb, ng), None);
    for n in 0..nn {
        let node = &pr.nodes[n];
        for b in 0..nb {
            for g in 0..ng {
                if !pr.is_active(b, g) {
                    continue;
                }
                let tech = &case.technologies[g];
                let key = format!("{},{},{}", node_id(n), case.buses[b].id, tech.id);
                if tech.buildable {
                    let cost = -node.investment_cost[g] * node.subtree_weight;
                    build[[n, b, g]] =
                        Some(lp.add_col(format!("dG[{key}]"), cost, 0.0, inf, false));
                }
                if pr.allow_retirement {
                    retire[[n, b, g]] =
                        Some(lp.add_col(format!("dGr[{key}]"), 0.0, 0.0, inf, false));
                }
                let cost = -node.weight * tech.fixed_om;
                capacity[[n, b, g]] = Some(lp.add_col(format!("G[{key}]"), cost, 0.0, inf, false));
            }
        }
    }

    let mut p = Array4::from_elem((nn, nb, ng, nt), None);
    let mut ni_cols = Array3::from_elem((nn, nb, nt), Col(0));
    let mut z = Array4::from_elem((nn, nb, nt, ni), Col(0));
    let mut sl = Array3::from_elem((nn, nl, nt), Col(0));
    for n in 0..nn {
        let node = &pr.nodes[n];
        for t in 0..nt {
            let scale = node.weight * tw[t];
            for b in 0..nb {
                let key = format!("{},{},{}", node_id(n), case.buses[b].id, t);
                for g in 0..ng {
                    if capacity[[n, b, g]].is_none() {
                        continue;
                    }
                    let tech = &case.technologies[g];
                    let cost = -scale * (node.fuel_cost[g] + tech.variable_om);
                    let name = format!("p[{key},{}]", tech.id);
                    p[[n, b, g, t]] = Some(lp.add_col(name, cost, 0.0, inf, false));
                }
                for i in 0..ni {
                    let cost = -scale * case.penalty.segments[i].price;
                    z[[n, b, t, i]] = lp.add_col(format!("z[{key},{i}]"), cost, 0.0, inf, false);
                }
                ni_cols[[n, b, t]] = lp.add_col(format!("NI[{key}]"), 0.0, -inf, inf, false);
            }
            for l in 0..nl {
                let name = format!("sl[{},{},{t}]", node_id(n), case.lines[l].id);
                sl[[n, l, t]] = lp.add_col(name, -scale * gamma_line, 0.0, inf, false);
            }
        }
    }

    lp.offset = pr
        .nodes
        .iter()
        .map(|node| {
            node.weight
                * (0..nt)
                    .map(|t| tw[t] * gamma_load * node.demand.column(t).sum())
                    .sum::<f64>()
        })
        .sum();

    // cumulative generation capacity
    let mut capacity_rows = Array3::from_elem((nn, nb, ng), None);
    for n in 0..nn {
        for b in 0..nb {
            for g in 0..ng {
                let Some(gc) = capacity[[n, b, g]] else {
                    continue;
                };
                let mut terms = vec![(gc, 1.0)];
                for &m in &pr.nodes[n].path {
                    if let Some(c) = build[[m, b, g]] {
                        terms.push((c, -1.0));
                    }
                    if let Some(c) = retire[[m, b, g]] {
                        terms.push((c, 1.0));
                    }
                }
                let g0 = case.existing[[b, g]];
                let name = format!(
                    "cap[{},{},{}]",
                    node_id(n),
                    case.buses[b].id,
                    case.technologies[g].id
                );
                capacity_rows[[n, b, g]] = Some(lp.add_row(name, g0, g0, &terms));
            }
        }
    }

    let mut production_rows = Array4::from_elem((nn, nb, ng, nt), None);
    let mut rps_rows = Vec::with_capacity(nn);
    let mut injection_rows = Array3::from_elem((nn, nb, nt), Row(0));
    let mut flow_rows = Array3::from_elem((nn, nl, nt), None);
    let mut balance_rows = Array2::from_elem((nn, nt), Row(0));
    let mut segment_rows = Array3::from_elem((nn, nt, ni), None);
    let sf = &case.shift_factors;
    for n in 0..nn {
        let node = &pr.nodes[n];
        let id = node_id(n);
        for t in 0..nt {
            for b in 0..nb {
                for g in 0..ng {
                    if let (Some(pc), Some(gc)) = (p[[n, b, g, t]], capacity[[n, b, g]]) {
                        let ca = pr.blocks.availability[[b, g, t]];
                        let name = format!(
                            "prod[{id},{},{},{t}]",
                            case.buses[b].id, case.technologies[g].id
                        );
                        production_rows[[n, b, g, t]] =
                            Some(lp.add_row(name, -inf, 0.0, &[(pc, 1.0), (gc, -ca)]));
                    }
                }
            }
        }
        let mut rps_terms = Vec::new();
        for t in 0..nt {
            for b in 0..nb {
                for g in 0..ng {
                    if case.technologies[g].renewable {
                        if let Some(pc) = p[[n, b, g, t]] {
                            rps_terms.push((pc, tw[t]));
                        }
                    }
                }
            }
        }
        let served: f64 = (0..nt).map(|t| tw[t] * node.demand.column(t).sum()).sum();
        rps_rows.push(lp.add_row(format!("rps[{id}]"), node.rps * served, inf, &rps_terms));

        for t in 0..nt {
            for b in 0..nb {
                let mut terms = vec![(ni_cols[[n, b, t]], 1.0)];
                for g in 0..ng {
                    if let Some(pc) = p[[n, b, g, t]] {
                        terms.push((pc, -1.0));
                    }
                }
                for i in 0..ni {
                    terms.push((z[[n, b, t, i]], -1.0));
                }
                let d = node.demand[[b, t]];
                injection_rows[[n, b, t]] = lp.add_row(
                    format!("inj[{id},{},{t}]", case.buses[b].id),
                    -d,
                    -d,
                    &terms,
                );
            }
            for l in 0..nl {
                let mut flow: Vec<(Col, f64)> = sf
                    .columns
                    .iter()
                    .enumerate()
                    .filter(|(c, _)| sf.entries[[l, *c]] != 0.0)
                    .map(|(c, &b)| (ni_cols[[n, b, t]], sf.entries[[l, c]]))
                    .collect();
                if flow.is_empty() {
                    continue;
                }
                let mut expansion = Vec::new();
                for &m in node.line_path() {
                    for q in 0..nq {
                        if let Some(wc) = w[[m, l, q]] {
                            expansion.push((wc, case.catalog.increments[q].capacity));
                        }
                    }
                }
                let l0 = case.lines[l].initial_capacity;
                let lid = &case.lines[l].id;
                let mut upper = flow.clone();
                upper.push((sl[[n, l, t]], -1.0));
                upper.extend(expansion.iter().map(|&(c, v)| (c, -v)));
                let ru = lp.add_row(format!("fmax[{id},{lid},{t}]"), -inf, l0, &upper);
                flow.push((sl[[n, l, t]], 1.0));
                flow.extend(expansion.iter().copied());
                let rl = lp.add_row(format!("fmin[{id},{lid},{t}]"), -l0, inf, &flow);
                flow_rows[[n, l, t]] = Some((ru, rl));
            }
            let terms: Vec<(Col, f64)> = (0..nb).map(|b| (ni_cols[[n, b, t]], 1.0)).collect();
            balance_rows[[n, t]] = lp.add_row(format!("bal[{id},{t}]"), 0.0, 0.0, &terms);
            for i in 0..ni {
                if let Some(cap) = case.penalty.segments[i].cap {
                    let terms: Vec<(Col, f64)> = (0..nb).map(|b| (z[[n, b, t, i]], 1.0)).collect();
                    segment_rows[[n, t, i]] =
                        Some(lp.add_row(format!("seg[{id},{t},{i}]"), -inf, cap, &terms));
                }
            }
        }
        if case.at_most_one_increment && pr.has_line_decisions(n) {
            for l in 0..nl {
                let terms: Vec<(Col, f64)> = (0..nq)
                    .filter_map(|q| w[[n, l, q]])
                    .map(|c| (c, 1.0))
                    .collect();
                if terms.len() > 1 {
                    lp.add_row(format!("one[{id},{}]", case.lines[l].id), -inf, 1.0, &terms);
                }
            }
        }
    }

    Ok(ModelInstance {
        problem,
        lp,
        index: ModelIndex {
            w,
            build,
            retire,
            capacity,
            p,
            z,
            ni: ni_cols,
            sl,
            capacity_rows,
            production_rows,
            rps_rows,
            injection_rows,
            flow_rows,
            balance_rows,
            segment_rows,
        },
        options: SolveOptions::default(),
        backend,
    })
}

impl ModelInstance {
    pub fn binary_columns(&self) -> Vec<((usize, usize, usize), Col)> {
        self.index
            .w
            .indexed_iter()
            .filter_map(|((n, l, q), c)| c.map(|c| ((n, l, q), c)))
            .collect()
    }

    /// Copy of the program with every binary fixed to `w` and relaxed to
    /// continuous.
    pub fn fixed_lp(&self, w: &Array3<bool>) -> Result<LinearProgram> {
        if w.dim() != self.index.w.dim() {
            return Err(Error::input("binary assignment has the wrong shape"));
        }
        let mut lp = self.lp.clone();
        for ((n, l, q), c) in self.binary_columns() {
            lp.fix_col(c, if w[[n, l, q]] { 1.0 } else { 0.0 });
        }
        for v in lp.integer.iter_mut() {
            *v = false;
        }
        Ok(lp)
    }

    fn read_plan(&self, x: &[f64]) -> ExpansionPlan {
        let ix = &self.index;
        let w = ix.w.map(|c| c.is_some_and(|c| x[c.0] > 0.5));
        let col = |c: &Option<Col>| c.map_or(0.0, |c| x[c.0].max(0.0));
        ExpansionPlan {
            w,
            build: ix.build.map(col),
            retire: ix.retire.map(col),
        }
    }

    /// Solve `lp` (a variant of this instance's program) and read the result
    /// through this instance's index maps.
    pub fn solve_variant(&self, lp: &LinearProgram) -> Result<PrimalDualSolution> {
        let raw = self.backend.solve(lp, &self.options)?;
        if lp.is_mip() {
            return Err(Error::Solver(
                "solve_variant expects a continuous program".into(),
            ));
        }
        Ok(self.unscale(lp, &raw))
    }

    fn unscale(&self, lp: &LinearProgram, raw: &RawSolution) -> PrimalDualSolution {
        let pr = &*self.problem;
        let ix = &self.index;
        let x = &raw.col_values;
        let y = &raw.row_duals;
        let tw = &pr.blocks.weights;
        let col = |c: &Option<Col>| c.map_or(0.0, |c| x[c.0]);
        let plan = self.read_plan(x);

        let (nn, nl, nq) = ix.w.dim();
        let mut line_capacity = Array2::zeros((nn, nl));
        for n in 0..nn {
            for l in 0..nl {
                let mut v = pr.case.lines[l].initial_capacity;
                for &m in pr.nodes[n].line_path() {
                    for q in 0..nq {
                        if plan.w[[m, l, q]] {
                            v += pr.case.catalog.increments[q].capacity;
                        }
                    }
                }
                line_capacity[[n, l]] = v;
            }
        }
        let price = Array3::from_shape_fn(ix.injection_rows.dim(), |(n, b, t)| {
            y[ix.injection_rows[[n, b, t]].0] / (pr.nodes[n].weight * tw[t])
        });
        let capacity_rent = Array4::from_shape_fn(ix.production_rows.dim(), |(n, b, g, t)| {
            ix.production_rows[[n, b, g, t]].map_or(0.0, |r| y[r.0] / (pr.nodes[n].weight * tw[t]))
        });
        let rps_price = ix
            .rps_rows
            .iter()
            .enumerate()
            .map(|(n, r)| -y[r.0] / pr.nodes[n].weight)
            .collect();
        PrimalDualSolution {
            objective: raw.objective,
            dual_objective: lp.dual_objective(&raw.row_duals, &raw.col_duals),
            capacity: ix.capacity.map(col),
            line_capacity,
            production: ix.p.map(col),
            curtailment: ix.z.map(|c| x[c.0]),
            line_slack: ix.sl.map(|c| x[c.0]),
            injection: ix.ni.map(|c| x[c.0]),
            price,
            capacity_rent,
            rps_price,
            basis_signature: raw.basis_signature,
            coefficient_hash: lp.coefficient_hash(),
            plan,
        }
    }
}

/// Solves the expansion program to within `gap` (relative).
pub fn solve_mip(instance: &ModelInstance, gap: f64) -> Result<MipOutcome> {
    if !(0.0..1.0).contains(&gap) {
        return Err(Error::input(format!("MIP gap {gap} outside [0, 1)")));
    }
    let options = SolveOptions {
        mip_rel_gap: gap,
        ..instance.options
    };
    let raw = instance.backend.solve(&instance.lp, &options)?;
    let mut plan = instance.read_plan(&raw.col_values);
    for (&c, v) in instance.index.w.iter().zip(plan.w.iter_mut()) {
        if let Some(c) = c {
            let x = raw.col_values[c.0];
            if (x - x.round()).abs() > BINARY_TOLERANCE {
                log::warn!("binary column {} has value {x}", instance.lp.col_names[c.0]);
            }
            *v = x.round() > 0.5;
        }
    }
    Ok(MipOutcome {
        plan,
        objective: raw.objective,
        dual_bound: raw.dual_bound,
        gap: raw.mip_gap,
    })
}

/// Fixes every binary to `w` and solves the resulting LP for primal values
/// and unscaled duals.
pub fn fix_and_solve_lp(instance: &ModelInstance, w: &Array3<bool>) -> Result<PrimalDualSolution> {
    let lp = instance.fixed_lp(w)?;
    instance.solve_variant(&lp)
}

/// One node-0 build checked against the aggregated investment condition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroProfitCheck {
    pub bus: String,
    pub tech: String,
    pub build: f64,
    /// Σₙ φζ·(C^INV₀ + C^FIX − Σₜ T·CA·θ), $/MW.
    pub residual: f64,
    /// Σₙ φζ·C^INV₀, $/MW.
    pub discounted_investment: f64,
    /// |residual| / Σₙ φζ·(C^INV₀ + C^FIX).
    pub relative: f64,
    /// Capacity reaches zero at some node, so the G ≥ 0 bound may carry a
    /// rent and the condition need not hold.
    pub capacity_exhausted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KktReport {
    /// Largest violation of reduced-cost sign or complementarity for
    /// production, divided by the price scale.
    pub max_production_violation: f64,
    pub zero_profit: Vec<ZeroProfitCheck>,
    pub max_zero_profit_violation: f64,
    /// |primal − dual| / max(1, |primal|).
    pub duality_gap: f64,
    /// Max(γ^LOAD, 1), the normalizer for price-valued violations.
    pub price_scale: f64,
}

/// Checks the production KKT conditions and the aggregated zero-profit
/// condition for node-0 builds.
pub fn verify_kkt(problem: &PlanningProblem, sol: &PrimalDualSolution) -> KktReport {
    let case = &problem.case;
    let (nn, nb, ng, nt) = sol.production.dim();
    let tw = &problem.blocks.weights;
    let price_scale = case.penalty.load_value.abs().max(1.0);
    let mut max_prod: f64 = 0.0;
    for n in 0..nn {
        let node = &problem.nodes[n];
        for b in 0..nb {
            for g in 0..ng {
                if !problem.is_active(b, g) {
                    continue;
                }
                let tech = &case.technologies[g];
                for t in 0..nt {
                    let credit = if tech.renewable {
                        sol.rps_price[n]
                    } else {
                        0.0
                    };
                    let rc = node.fuel_cost[g] + tech.variable_om + sol.capacity_rent[[n, b, g, t]]
                        - sol.price[[n, b, t]]
                        - credit;
                    let mut v = (-rc).max(0.0);
                    if sol.production[[n, b, g, t]] > 1e-6 {
                        v = v.max(rc.abs());
                    }
                    max_prod = max_prod.max(v / price_scale);
                }
            }
        }
    }

    let root = problem.root;
    let mut zero_profit = Vec::new();
    for b in 0..nb {
        for g in 0..ng {
            let built = sol.plan.build[[root, b, g]];
            if built <= BUILD_TOLERANCE {
                continue;
            }
            let tech = &case.technologies[g];
            let cinv = problem.nodes[root].investment_cost[g];
            let mut residual = 0.0;
            let mut weight_sum = 0.0;
            for n in 0..nn {
                let wgt = problem.nodes[n].weight;
                let rent: f64 = (0..nt)
                    .map(|t| {
                        tw[t]
                            * problem.blocks.availability[[b, g, t]]
                            * sol.capacity_rent[[n, b, g, t]]
                    })
                    .sum();
                residual += wgt * (cinv + tech.fixed_om - rent);
                weight_sum += wgt;
            }
            let denom = (weight_sum * (cinv + tech.fixed_om)).abs().max(1.0);
            zero_profit.push(ZeroProfitCheck {
                bus: case.buses[b].id.clone(),
                tech: tech.id.clone(),
                build: built,
                residual,
                discounted_investment: weight_sum * cinv,
                relative: residual.abs() / denom,
                capacity_exhausted: (0..nn).any(|n| sol.capacity[[n, b, g]] <= BUILD_TOLERANCE),
            });
        }
    }
    let max_zero_profit_violation = zero_profit.iter().map(|c| c.relative).fold(0.0, f64::max);
    KktReport {
        max_production_violation: max_prod,
        zero_profit,
        max_zero_profit_violation,
        duality_gap: (sol.objective - sol.dual_objective).abs() / sol.objective.abs().max(1.0),
        price_scale,
    }
}

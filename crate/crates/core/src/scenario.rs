//! Scenario tree, discounting and the low/medium/high uncertainty grid.
//!
//! A tree is read from a scenario file (TOML). Each node carries its
//! probability, its depth (which doubles as the time index), and the data
//! overrides that apply in that state of the world. Probabilities are taken
//! verbatim from the file and never inferred.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{read_to_string, Error, Result};

/// Tolerance on per-depth probability sums.
pub const PROBABILITY_TOLERANCE: f64 = 1e-9;

/// Data realised at one node. Missing fuel/investment entries fall back to
/// the technology's base value from the case file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeData {
    /// Multiplier applied to base hourly demand.
    #[serde(default = "one")]
    pub demand_growth: f64,
    /// Fuel cost by technology id, $/MWh.
    #[serde(default)]
    pub fuel_cost: BTreeMap<String, f64>,
    /// Annualized investment cost by technology id, $/MW-yr.
    #[serde(default)]
    pub investment_cost: BTreeMap<String, f64>,
    /// Renewable share target in [0, 1].
    #[serde(default)]
    pub rps: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for NodeData {
    fn default() -> Self {
        NodeData {
            demand_growth: 1.0,
            fuel_cost: BTreeMap::new(),
            investment_cost: BTreeMap::new(),
            rps: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioNode {
    pub id: String,
    #[serde(default)]
    pub parent: Option<String>,
    pub depth: usize,
    pub probability: f64,
    #[serde(flatten)]
    pub data: NodeData,
}

/// Rooted scenario tree. Node order is the file order; index 0 need not be
/// the root, use [`ScenarioTree::root`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioTree {
    nodes: Vec<ScenarioNode>,
    /// Depth from which nodes may have at most one child.
    pub stage_boundary: usize,
    pub discount_rate: f64,
    pub period_years: u32,
    #[serde(skip)]
    parent_index: Vec<Option<usize>>,
    #[serde(skip)]
    children: Vec<Vec<usize>>,
}

/// One violated tree invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum TreeIssue {
    Empty,
    MissingRoot,
    MultipleRoots(Vec<String>),
    DuplicateId(String),
    DanglingParent {
        node: String,
        parent: String,
    },
    RootDepth {
        node: String,
        depth: usize,
    },
    RootProbability {
        node: String,
        probability: f64,
    },
    DepthMismatch {
        node: String,
        depth: usize,
        expected: usize,
    },
    ProbabilityRange {
        node: String,
        probability: f64,
    },
    DepthProbabilitySum {
        depth: usize,
        sum: f64,
    },
    ChildProbabilitySum {
        node: String,
        node_probability: f64,
        children_sum: f64,
    },
    Branching {
        node: String,
        depth: usize,
        children: usize,
    },
    Rps {
        node: String,
        rps: f64,
    },
    DemandGrowth {
        node: String,
        growth: f64,
    },
}

impl fmt::Display for TreeIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TreeIssue::Empty => write!(f, "tree has no nodes"),
            TreeIssue::MissingRoot => write!(f, "missing root (no node without parent)"),
            TreeIssue::MultipleRoots(ids) => write!(f, "multiple roots: {}", ids.join(", ")),
            TreeIssue::DuplicateId(id) => write!(f, "duplicate node id '{id}'"),
            TreeIssue::DanglingParent { node, parent } => {
                write!(f, "node '{node}' references unknown parent '{parent}'")
            }
            TreeIssue::RootDepth { node, depth } => {
                write!(f, "root '{node}' has depth {depth}, expected 1")
            }
            TreeIssue::RootProbability { node, probability } => {
                write!(f, "root '{node}' has probability {probability}, expected 1")
            }
            TreeIssue::DepthMismatch {
                node,
                depth,
                expected,
            } => write!(f, "node '{node}' has depth {depth}, expected {expected}"),
            TreeIssue::ProbabilityRange { node, probability } => {
                write!(f, "node '{node}' probability {probability} outside [0, 1]")
            }
            TreeIssue::DepthProbabilitySum { depth, sum } => {
                write!(f, "depth {depth} probability sum {sum}")
            }
            TreeIssue::ChildProbabilitySum {
                node,
                node_probability,
                children_sum,
            } => write!(
                f,
                "children of '{node}' sum to probability {children_sum}, node has {node_probability}"
            ),
            TreeIssue::Branching {
                node,
                depth,
                children,
            } => write!(
                f,
                "node '{node}' at depth {depth} has {children} children (two-stage shape allows at most 1)"
            ),
            TreeIssue::Rps { node, rps } => write!(f, "node '{node}' rps {rps} outside [0, 1]"),
            TreeIssue::DemandGrowth { node, growth } => {
                write!(f, "node '{node}' demand growth {growth} is negative")
            }
        }
    }
}

/// Outcome of [`ScenarioTree::validate`]. Branching violations land in
/// `warnings` instead of `errors` when multistage trees are allowed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub errors: Vec<TreeIssue>,
    pub warnings: Vec<TreeIssue>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn into_result(self) -> Result<Vec<TreeIssue>> {
        if self.errors.is_empty() {
            Ok(self.warnings)
        } else {
            Err(Error::InvalidTree(
                self.errors.iter().map(ToString::to_string).collect(),
            ))
        }
    }
}

impl ScenarioTree {
    pub fn new(nodes: Vec<ScenarioNode>, discount_rate: f64, period_years: u32) -> Self {
        let mut tree = ScenarioTree {
            nodes,
            stage_boundary: 2,
            discount_rate,
            period_years,
            parent_index: Vec::new(),
            children: Vec::new(),
        };
        tree.link();
        tree
    }

    /// A one-node tree (probability 1, depth 1) with undiscounted weight 1.
    pub fn single(data: NodeData) -> Self {
        ScenarioTree::new(
            vec![ScenarioNode {
                id: "0".into(),
                parent: None,
                depth: 1,
                probability: 1.0,
                data,
            }],
            0.0,
            1,
        )
    }

    fn link(&mut self) {
        let index: BTreeMap<&str, usize> = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id.as_str(), i))
            .collect();
        self.parent_index = self
            .nodes
            .iter()
            .map(|n| n.parent.as_deref().and_then(|p| index.get(p).copied()))
            .collect();
        let mut children = vec![Vec::new(); self.nodes.len()];
        for (i, p) in self.parent_index.iter().enumerate() {
            if let Some(p) = p {
                children[*p].push(i);
            }
        }
        self.children = children;
    }

    pub fn nodes(&self) -> &[ScenarioNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, n: usize) -> &ScenarioNode {
        &self.nodes[n]
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.nodes
            .iter()
            .position(|n| n.id == id)
            .ok_or_else(|| Error::unknown("node", id))
    }

    pub fn root(&self) -> Option<usize> {
        self.nodes.iter().position(|n| n.parent.is_none())
    }

    pub fn parent(&self, n: usize) -> Option<usize> {
        self.parent_index[n]
    }

    pub fn children(&self, n: usize) -> &[usize] {
        &self.children[n]
    }

    /// Largest depth in the tree.
    pub fn horizon(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    pub fn validate(&self, allow_multistage: bool) -> ValidationReport {
        let mut errors = Vec::new();
        let mut warnings = Vec::new();
        if self.nodes.is_empty() {
            errors.push(TreeIssue::Empty);
            return ValidationReport { errors, warnings };
        }

        let mut seen = std::collections::BTreeSet::new();
        for n in &self.nodes {
            if !seen.insert(n.id.as_str()) {
                errors.push(TreeIssue::DuplicateId(n.id.clone()));
            }
        }

        let roots: Vec<&ScenarioNode> = self.nodes.iter().filter(|n| n.parent.is_none()).collect();
        match roots.len() {
            0 => errors.push(TreeIssue::MissingRoot),
            1 => {
                let r = roots[0];
                if r.depth != 1 {
                    errors.push(TreeIssue::RootDepth {
                        node: r.id.clone(),
                        depth: r.depth,
                    });
                }
                if (r.probability - 1.0).abs() > PROBABILITY_TOLERANCE {
                    errors.push(TreeIssue::RootProbability {
                        node: r.id.clone(),
                        probability: r.probability,
                    });
                }
            }
            _ => errors.push(TreeIssue::MultipleRoots(
                roots.iter().map(|r| r.id.clone()).collect(),
            )),
        }

        for (i, n) in self.nodes.iter().enumerate() {
            if !(0.0..=1.0).contains(&n.probability) || n.probability.is_nan() {
                errors.push(TreeIssue::ProbabilityRange {
                    node: n.id.clone(),
                    probability: n.probability,
                });
            }
            if !(0.0..=1.0).contains(&n.data.rps) {
                errors.push(TreeIssue::Rps {
                    node: n.id.clone(),
                    rps: n.data.rps,
                });
            }
            if n.data.demand_growth < 0.0 {
                errors.push(TreeIssue::DemandGrowth {
                    node: n.id.clone(),
                    growth: n.data.demand_growth,
                });
            }
            if let Some(parent) = &n.parent {
                match self.parent_index[i] {
                    None => errors.push(TreeIssue::DanglingParent {
                        node: n.id.clone(),
                        parent: parent.clone(),
                    }),
                    Some(p) => {
                        let expected = self.nodes[p].depth + 1;
                        if n.depth != expected {
                            errors.push(TreeIssue::DepthMismatch {
                                node: n.id.clone(),
                                depth: n.depth,
                                expected,
                            });
                        }
                    }
                }
            }
        }

        let mut depth_sums: BTreeMap<usize, f64> = BTreeMap::new();
        for n in &self.nodes {
            *depth_sums.entry(n.depth).or_default() += n.probability;
        }
        for (depth, sum) in depth_sums {
            if (sum - 1.0).abs() > PROBABILITY_TOLERANCE {
                errors.push(TreeIssue::DepthProbabilitySum { depth, sum });
            }
        }

        for (i, n) in self.nodes.iter().enumerate() {
            let kids = &self.children[i];
            if kids.is_empty() {
                continue;
            }
            let children_sum: f64 = kids.iter().map(|&c| self.nodes[c].probability).sum();
            if (children_sum - n.probability).abs() > PROBABILITY_TOLERANCE {
                errors.push(TreeIssue::ChildProbabilitySum {
                    node: n.id.clone(),
                    node_probability: n.probability,
                    children_sum,
                });
            }
            if n.depth >= self.stage_boundary && kids.len() > 1 {
                let issue = TreeIssue::Branching {
                    node: n.id.clone(),
                    depth: n.depth,
                    children: kids.len(),
                };
                if allow_multistage {
                    warnings.push(issue);
                } else {
                    errors.push(issue);
                }
            }
        }
        ValidationReport { errors, warnings }
    }

    /// Node indices on the path from the root to `n`, root first, `n` last.
    pub fn path_to_root(&self, n: usize) -> Result<Vec<usize>> {
        if n >= self.nodes.len() {
            return Err(Error::unknown("node", n.to_string()));
        }
        let mut path = vec![n];
        let mut cur = n;
        while let Some(p) = self.parent_index[cur] {
            if path.len() > self.nodes.len() {
                return Err(Error::input("cycle in scenario tree parent links"));
            }
            path.push(p);
            cur = p;
        }
        path.reverse();
        Ok(path)
    }

    pub fn path_to_root_by_id(&self, id: &str) -> Result<Vec<String>> {
        let n = self.index_of(id)?;
        Ok(self
            .path_to_root(n)?
            .into_iter()
            .map(|i| self.nodes[i].id.clone())
            .collect())
    }

    /// Discount factor ζ for the node's depth.
    pub fn node_discount(&self, n: usize) -> f64 {
        discount_factor(self.nodes[n].depth, self.discount_rate, self.period_years)
            .expect("tree discount parameters validated at load")
    }

    /// φₙ·ζ_δ(n), the weight of node `n` in the objective.
    pub fn node_weight(&self, n: usize) -> f64 {
        self.nodes[n].probability * self.node_discount(n)
    }

    /// Nodes whose root path contains `n` (its subtree, including `n`).
    pub fn descendants(&self, n: usize) -> Vec<usize> {
        let mut out = vec![n];
        let mut i = 0;
        while i < out.len() {
            out.extend_from_slice(&self.children[out[i]]);
            i += 1;
        }
        out
    }

    /// Sum of node weights over the subtree rooted at `n`.
    pub fn subtree_weight(&self, n: usize) -> f64 {
        self.descendants(n)
            .iter()
            .map(|&d| self.node_weight(d))
            .sum()
    }

    /// Leaves, in node order.
    pub fn leaves(&self) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&i| self.children[i].is_empty())
            .collect()
    }
}

/// ζ_y = (1+r)^(−p·(y−1)) · Σ_{k=0}^{p−1} (1+r)^(−k): the present value of
/// `period_years` equal annual amounts starting at stage `y`.
pub fn discount_factor(y: usize, rate: f64, period_years: u32) -> Result<f64> {
    if y < 1 {
        return Err(Error::input(format!("stage index {y} must be >= 1")));
    }
    if rate.is_nan() || rate <= -1.0 {
        return Err(Error::input(format!("discount rate {rate} must be > -1")));
    }
    if period_years < 1 {
        return Err(Error::input("period_years must be >= 1"));
    }
    let base = 1.0 + rate;
    let annuity: f64 = (0..period_years).map(|k| base.powi(-(k as i32))).sum();
    let offset = base.powf(-(period_years as f64) * (y as f64 - 1.0));
    Ok(offset * annuity)
}

/// Which part of the case data a grid dimension perturbs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "effect")]
pub enum GridEffect {
    /// Level value multiplies base demand.
    DemandScale,
    /// Level value multiplies fuel cost of the listed techs (all when empty).
    FuelCostScale {
        #[serde(default)]
        techs: Vec<String>,
    },
    /// Level value multiplies investment cost of the listed techs.
    InvestmentCostScale { techs: Vec<String> },
    /// Level value is the RPS target.
    Rps,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyDimension {
    pub name: String,
    #[serde(flatten)]
    pub effect: GridEffect,
    /// Values for low, medium, high.
    pub levels: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Low,
    Medium,
    High,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::Low, Level::Medium, Level::High];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn short(self) -> char {
        match self {
            Level::Low => 'L',
            Level::Medium => 'M',
            Level::High => 'H',
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyGrid {
    pub dimensions: Vec<UncertaintyDimension>,
}

/// One point of the grid: a level per dimension.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridCombination {
    pub index: usize,
    pub levels: Vec<Level>,
}

impl GridCombination {
    /// Compact label such as `LMH`.
    pub fn label(&self) -> String {
        if self.levels.is_empty() {
            return "-".into();
        }
        self.levels.iter().map(|l| l.short()).collect()
    }
}

impl UncertaintyGrid {
    /// Keep only the first `count` dimensions.
    pub fn truncated(&self, count: usize) -> UncertaintyGrid {
        UncertaintyGrid {
            dimensions: self.dimensions.iter().take(count).cloned().collect(),
        }
    }

    pub fn combination_count(&self) -> usize {
        3usize.pow(self.dimensions.len() as u32)
    }

    /// Full Cartesian product in lexicographic order (first dimension varies
    /// slowest).
    pub fn enumerate(&self) -> Result<Vec<GridCombination>> {
        for d in &self.dimensions {
            if d.levels.len() != 3 {
                return Err(Error::input(format!(
                    "grid dimension '{}' has {} levels, expected 3",
                    d.name,
                    d.levels.len()
                )));
            }
        }
        let dims = self.dimensions.len();
        let total = self.combination_count();
        Ok((0..total)
            .map(|index| {
                let mut levels = vec![Level::Low; dims];
                let mut rem = index;
                for slot in levels.iter_mut().rev() {
                    *slot = Level::ALL[rem % 3];
                    rem /= 3;
                }
                GridCombination { index, levels }
            })
            .collect())
    }

    /// The all-medium combination.
    pub fn medium(&self) -> GridCombination {
        let levels = vec![Level::Medium; self.dimensions.len()];
        let index = levels.iter().fold(0, |acc, l| acc * 3 + l.index());
        GridCombination { index, levels }
    }
}

/// Free-function form of [`UncertaintyGrid::enumerate`].
pub fn enumerate_grid(grid: &UncertaintyGrid) -> Result<Vec<GridCombination>> {
    grid.enumerate()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    discount_rate: f64,
    period_years: u32,
    #[serde(default = "two")]
    stage_boundary: usize,
    nodes: Vec<ScenarioNode>,
    #[serde(default)]
    grid: Vec<UncertaintyDimension>,
}

fn two() -> usize {
    2
}

/// Contents of a scenario file: the planning tree plus the out-of-sample grid.
#[derive(Debug, Clone)]
pub struct ScenarioSet {
    pub tree: ScenarioTree,
    pub grid: UncertaintyGrid,
}

impl ScenarioSet {
    pub fn from_toml_str(text: &str, context: &str) -> Result<Self> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| Error::parse(context, e))?;
        if file.discount_rate.is_nan() || file.discount_rate <= -1.0 {
            return Err(Error::input(format!(
                "discount_rate {} must be > -1",
                file.discount_rate
            )));
        }
        if file.period_years < 1 {
            return Err(Error::input("period_years must be >= 1"));
        }
        let mut tree = ScenarioTree::new(file.nodes, file.discount_rate, file.period_years);
        tree.stage_boundary = file.stage_boundary;
        Ok(ScenarioSet {
            tree,
            grid: UncertaintyGrid {
                dimensions: file.grid,
            },
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = read_to_string(path)?;
        Self::from_toml_str(&text, &path.display().to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn node(id: &str, parent: Option<&str>, depth: usize, p: f64) -> ScenarioNode {
        ScenarioNode {
            id: id.into(),
            parent: parent.map(Into::into),
            depth,
            probability: p,
            data: NodeData::default(),
        }
    }

    /// Root, 7 depth-2 children, each continuing alone to depth 4.
    fn seven_scenario_tree() -> ScenarioTree {
        let mut nodes = vec![node("0", None, 1, 1.0)];
        for s in 1..=7 {
            let p = 1.0 / 7.0;
            nodes.push(node(&format!("s{s}y2"), Some("0"), 2, p));
            nodes.push(node(&format!("s{s}y3"), Some(&format!("s{s}y2")), 3, p));
            nodes.push(node(&format!("s{s}y4"), Some(&format!("s{s}y3")), 4, p));
        }
        ScenarioTree::new(nodes, 0.0778, 5)
    }

    #[test]
    fn single_root_is_valid() {
        let tree = ScenarioTree::new(vec![node("0", None, 1, 1.0)], 0.0, 1);
        assert!(tree.validate(false).is_ok());
    }

    #[test]
    fn seven_scenario_tree_is_valid() {
        let tree = seven_scenario_tree();
        let report = tree.validate(false);
        assert!(report.is_ok(), "{:?}", report.errors);
        assert_eq!(tree.leaves().len(), 7);
        assert_eq!(tree.horizon(), 4);
    }

    #[test]
    fn depth_sum_violation_is_reported() {
        let tree = ScenarioTree::new(
            vec![
                node("0", None, 1, 1.0),
                node("a", Some("0"), 2, 0.5),
                node("b", Some("0"), 2, 0.4),
            ],
            0.0,
            1,
        );
        let report = tree.validate(false);
        let messages: Vec<String> = report.errors.iter().map(ToString::to_string).collect();
        assert!(
            messages.iter().any(|m| m == "depth 2 probability sum 0.9"),
            "{messages:?}"
        );
    }

    #[test]
    fn missing_root_and_dangling_parent() {
        let tree = ScenarioTree::new(vec![node("a", Some("ghost"), 2, 1.0)], 0.0, 1);
        let report = tree.validate(false);
        assert!(report.errors.contains(&TreeIssue::MissingRoot));
        assert!(report
            .errors
            .iter()
            .any(|e| matches!(e, TreeIssue::DanglingParent { .. })));
    }

    #[test]
    fn branching_after_stage_boundary_is_error_or_warning() {
        let tree = ScenarioTree::new(
            vec![
                node("0", None, 1, 1.0),
                node("a", Some("0"), 2, 1.0),
                node("a1", Some("a"), 3, 0.5),
                node("a2", Some("a"), 3, 0.5),
            ],
            0.0,
            1,
        );
        let strict = tree.validate(false);
        assert!(strict
            .errors
            .iter()
            .any(|e| matches!(e, TreeIssue::Branching { .. })));
        let relaxed = tree.validate(true);
        assert!(relaxed.is_ok());
        assert_eq!(relaxed.warnings.len(), 1);
    }

    #[test]
    fn path_to_root_orders_root_first() {
        let tree = seven_scenario_tree();
        assert_eq!(tree.path_to_root_by_id("0").unwrap(), vec!["0"]);
        assert_eq!(
            tree.path_to_root_by_id("s3y3").unwrap(),
            vec!["0", "s3y2", "s3y3"]
        );
        assert!(tree.path_to_root_by_id("nope").is_err());
    }

    #[test]
    fn discount_factor_examples() {
        assert_relative_eq!(discount_factor(1, 0.0, 5).unwrap(), 5.0);
        // direct evaluation of the annuity formula
        assert_relative_eq!(
            discount_factor(1, 0.0778, 5).unwrap(),
            4.328411184513899,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            discount_factor(2, 0.0778, 5).unwrap(),
            2.976032120552953,
            max_relative = 1e-12
        );
        assert!(discount_factor(0, 0.05, 5).is_err());
        assert!(discount_factor(1, -1.0, 5).is_err());
        assert!(discount_factor(1, 0.05, 0).is_err());
    }

    #[test]
    fn discount_factor_monotone() {
        for y in 1..6 {
            assert!(
                discount_factor(y + 1, 0.03, 5).unwrap() < discount_factor(y, 0.03, 5).unwrap()
            );
            assert_relative_eq!(discount_factor(y, 0.0, 7).unwrap(), 7.0);
        }
    }

    fn grid(dims: usize) -> UncertaintyGrid {
        UncertaintyGrid {
            dimensions: (0..dims)
                .map(|i| UncertaintyDimension {
                    name: format!("d{i}"),
                    effect: GridEffect::DemandScale,
                    levels: vec![0.9, 1.0, 1.1],
                })
                .collect(),
        }
    }

    #[test]
    fn grid_sizes() {
        assert_eq!(grid(5).enumerate().unwrap().len(), 243);
        assert_eq!(grid(1).enumerate().unwrap().len(), 3);
        let empty = grid(0).enumerate().unwrap();
        assert_eq!(empty.len(), 1);
        assert!(empty[0].levels.is_empty());
    }

    #[test]
    fn grid_rejects_wrong_level_count() {
        let mut g = grid(2);
        g.dimensions[1].levels.pop();
        assert!(g.enumerate().is_err());
    }

    #[test]
    fn grid_order_is_lexicographic() {
        let combos = grid(2).enumerate().unwrap();
        assert_eq!(combos[0].label(), "LL");
        assert_eq!(combos[1].label(), "LM");
        assert_eq!(combos[3].label(), "ML");
        assert_eq!(combos[8].label(), "HH");
        assert_eq!(grid(2).medium().index, 4);
    }

    #[test]
    fn parses_scenario_file() {
        let text = r#"
            discount_rate = 0.0778
            period_years = 5

            [[nodes]]
            id = "0"
            depth = 1
            probability = 1.0
            rps = 0.1
            fuel_cost = { gas = 30.0 }

            [[nodes]]
            id = "a"
            parent = "0"
            depth = 2
            probability = 1.0
            demand_growth = 1.2

            [[grid]]
            name = "load"
            effect = "demand_scale"
            levels = [0.9, 1.0, 1.1]

            [[grid]]
            name = "wind_cost"
            effect = "investment_cost_scale"
            techs = ["wind"]
            levels = [0.8, 1.0, 1.2]
        "#;
        let set = ScenarioSet::from_toml_str(text, "inline").unwrap();
        assert!(set.tree.validate(false).is_ok());
        assert_eq!(set.tree.node(0).data.fuel_cost["gas"], 30.0);
        assert_eq!(set.tree.node(1).data.demand_growth, 1.2);
        assert_eq!(set.grid.dimensions.len(), 2);
        assert_eq!(
            set.grid.dimensions[1].effect,
            GridEffect::InvestmentCostScale {
                techs: vec!["wind".into()]
            }
        );
    }

    proptest::proptest! {
        #[test]
        fn grid_has_no_duplicates(dims in 0usize..6) {
            let combos = grid(dims).enumerate().unwrap();
            let set: std::collections::HashSet<_> = combos.iter().map(|c| c.levels.clone()).collect();
            proptest::prop_assert_eq!(set.len(), 3usize.pow(dims as u32));
            proptest::prop_assert_eq!(combos.len(), 3usize.pow(dims as u32));
        }

        #[test]
        fn uniform_trees_have_unit_depth_sums(leaves in 1usize..9) {
            let mut nodes = vec![node("0", None, 1, 1.0)];
            let p = 1.0 / leaves as f64;
            for s in 0..leaves {
                nodes.push(node(&format!("a{s}"), Some("0"), 2, p));
                nodes.push(node(&format!("b{s}"), Some(&format!("a{s}")), 3, p));
            }
            let tree = ScenarioTree::new(nodes, 0.05, 5);
            proptest::prop_assert!(tree.validate(false).is_ok());
        }
    }
}

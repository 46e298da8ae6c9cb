//! Files exchanged between subcommands and the error shape printed on failure.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array3;
use serde::{Deserialize, Serialize};

use tepca::optimizer::{ExpansionPlan, PlanningProblem};
use tepca::Error;

pub struct Failure {
    pub code: u8,
    pub kind: &'static str,
    pub message: String,
}

impl Failure {
    pub fn input(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            kind: "input",
            message: message.into(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({
            "error": self.kind,
            "exit_code": self.code,
            "message": self.message,
        })
        .to_string()
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let kind = match e.exit_code() {
            2 => "input",
            3 => "domain",
            _ => "solver",
        };
        Failure {
            code: e.exit_code() as u8,
            kind,
            message: e.to_string(),
        }
    }
}

pub type CliResult<T> = Result<T, Failure>;

/// Outputs are staged in memory and written only once every step has
/// succeeded.
#[derive(Default)]
pub struct Outputs {
    files: Vec<(String, String)>,
}

impl Outputs {
    pub fn add(&mut self, name: impl Into<String>, contents: impl Into<String>) {
        self.files.push((name.into(), contents.into()));
    }

    pub fn json<T: Serialize>(&mut self, name: impl Into<String>, value: &T) -> CliResult<()> {
        let text =
            serde_json::to_string_pretty(value).map_err(|e| Failure::input(e.to_string()))?;
        self.add(name, text + "\n");
        Ok(())
    }

    pub fn write(self, dir: &Path) -> CliResult<()> {
        fs::create_dir_all(dir).map_err(|e| Failure::input(format!("{}: {e}", dir.display())))?;
        for (name, contents) in self.files {
            let path = dir.join(&name);
            fs::write(&path, contents)
                .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
            println!("wrote {}", path.display());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub node: String,
    pub line: String,
    pub increment: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationChange {
    pub node: String,
    pub bus: String,
    pub tech: String,
    pub build: f64,
    pub retire: f64,
}

/// The plan file: enough to rebuild the same problem and fix its lines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanFile {
    pub case: String,
    pub k: usize,
    pub seed: u64,
    pub gap: f64,
    pub objective: f64,
    pub dual_bound: Option<f64>,
    pub mip_gap: Option<f64>,
    pub lp_objective: f64,
    pub selections: Vec<Selection>,
    pub generation: Vec<GenerationChange>,
}

impl PlanFile {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|_| Failure::input(format!("plan not found: {}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
    }

    pub fn selections_of(problem: &PlanningProblem, plan: &ExpansionPlan) -> Vec<Selection> {
        let case = &problem.case;
        let mut out = Vec::new();
        for n in 0..problem.node_count() {
            for (l, q) in plan.selected_at(n) {
                out.push(Selection {
                    node: problem.tree.node(n).id.clone(),
                    line: case.lines[l].id.clone(),
                    increment: case.catalog.increments[q].id.clone(),
                });
            }
        }
        out
    }

    pub fn generation_of(problem: &PlanningProblem, plan: &ExpansionPlan) -> Vec<GenerationChange> {
        let case = &problem.case;
        let mut out = Vec::new();
        for ((n, b, g), &build) in plan.build.indexed_iter() {
            let retire = plan.retire[[n, b, g]];
            if build.abs() > 1e-9 || retire.abs() > 1e-9 {
                out.push(GenerationChange {
                    node: problem.tree.node(n).id.clone(),
                    bus: case.buses[b].id.clone(),
                    tech: case.technologies[g].id.clone(),
                    build: round6(build),
                    retire: round6(retire),
                });
            }
        }
        out
    }

    /// Line selections as the boolean array the model fixes.
    pub fn line_plan(&self, problem: &PlanningProblem) -> CliResult<Array3<bool>> {
        let case = &problem.case;
        let mut w = Array3::from_elem(
            (problem.node_count(), case.line_count(), case.catalog.len()),
            false,
        );
        for s in &self.selections {
            let n = problem.tree.index_of(&s.node)?;
            let l = case.line_index(&s.line)?;
            let q = case.catalog.index_of(&s.increment)?;
            w[[n, l, q]] = true;
        }
        Ok(w)
    }
}

/// Rounds for stable text output.
pub fn round6(v: f64) -> f64 {
    let r = (v * 1e6).round() / 1e6;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

pub fn resolve_case(
    case: &str,
    cases_dir: &Path,
    scenarios: Option<&Path>,
) -> CliResult<(PathBuf, PathBuf)> {
    let direct = PathBuf::from(case);
    let candidates = [
        direct.clone(),
        direct.join("case.toml"),
        cases_dir.join(case).join("case.toml"),
    ];
    let case_path = candidates
        .iter()
        .find(|p| p.is_file())
        .cloned()
        .ok_or_else(|| Failure::input(format!("case not found: {case}")))?;
    let scenario_path = match scenarios {
        Some(p) => p.to_path_buf(),
        None => case_path
            .parent()
            .map(|d| d.join("scenarios.toml"))
            .unwrap_or_else(|| PathBuf::from("scenarios.toml")),
    };
    if !scenario_path.is_file() {
        return Err(Failure::input(format!(
            "scenario file not found: {}",
            scenario_path.display()
        )));
    }
    Ok((case_path, scenario_path))
}

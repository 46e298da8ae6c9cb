//! The stochastic expansion program, its fixed-binary LP, and the solver
//! backend contract.

mod highs;
mod lp;
mod model;

pub use highs::HighsBackend;
pub use lp::{
    Col, LinearProgram, RawSolution, Row, Sense, SolveOptions, SolveStatus, SolverBackend,
};
pub use model::{
    build_expansion_mip, build_with_backend, fix_and_solve_lp, solve_mip, verify_kkt,
    ExpansionPlan, KktReport, MipOutcome, ModelIndex, ModelInstance, PlanningProblem,
    PrimalDualSolution, ResolvedNode, ZeroProfitCheck, BINARY_TOLERANCE, BUILD_TOLERANCE,
};

impl ModelInstance {
    /// Writes the assembled program in LP or MPS format (by extension).
    pub fn export(&self, path: &std::path::Path) -> crate::error::Result<()> {
        self.backend.export(&self.lp, path)
    }
}

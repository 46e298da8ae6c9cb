//! [`SolverBackend`] implementation over the HiGHS C API.

use std::ffi::{c_void, CString};
use std::hash::{Hash, Hasher};
use std::path::Path;

use highs_sys as ffi;

use super::lp::{LinearProgram, RawSolution, Sense, SolveOptions, SolveStatus, SolverBackend};
use crate::error::{Error, Result};

/// HiGHS simplex for LPs (basic solutions with vertex duals) and HiGHS
/// branch-and-cut for MILPs.
#[derive(Debug, Clone)]
pub struct HighsBackend {
    /// Threads per instance; `None` leaves the HiGHS default.
    pub threads: Option<i32>,
    pub verbose: bool,
}

impl Default for HighsBackend {
    fn default() -> Self {
        HighsBackend {
            threads: Some(1),
            verbose: false,
        }
    }
}

struct Handle(*mut c_void);

impl Handle {
    fn new() -> Result<Self> {
        // SAFETY: Highs_create has no preconditions; null is checked below.
        let ptr = unsafe { ffi::Highs_create() };
        if ptr.is_null() {
            return Err(Error::Solver("Highs_create returned null".into()));
        }
        Ok(Handle(ptr))
    }

    fn check(&self, status: ffi::HighsInt, what: &str) -> Result<()> {
        if status == ffi::STATUS_ERROR {
            Err(Error::Solver(format!("HiGHS {what} failed")))
        } else {
            Ok(())
        }
    }

    fn set_bool(&self, name: &str, value: bool) -> Result<()> {
        let key = CString::new(name).expect("option name");
        // SAFETY: valid handle and NUL-terminated key.
        let st =
            unsafe { ffi::Highs_setBoolOptionValue(self.0, key.as_ptr(), value as ffi::HighsInt) };
        self.check(st, name)
    }

    fn set_int(&self, name: &str, value: i32) -> Result<()> {
        let key = CString::new(name).expect("option name");
        // SAFETY: as above.
        let st =
            unsafe { ffi::Highs_setIntOptionValue(self.0, key.as_ptr(), value as ffi::HighsInt) };
        self.check(st, name)
    }

    fn set_double(&self, name: &str, value: f64) -> Result<()> {
        let key = CString::new(name).expect("option name");
        // SAFETY: as above.
        let st = unsafe { ffi::Highs_setDoubleOptionValue(self.0, key.as_ptr(), value) };
        self.check(st, name)
    }

    fn set_string(&self, name: &str, value: &str) -> Result<()> {
        let key = CString::new(name).expect("option name");
        let val = CString::new(value).expect("option value");
        // SAFETY: as above.
        let st = unsafe { ffi::Highs_setStringOptionValue(self.0, key.as_ptr(), val.as_ptr()) };
        self.check(st, name)
    }

    fn double_info(&self, name: &str) -> Option<f64> {
        let key = CString::new(name).expect("info name");
        let mut v = 0.0;
        // SAFETY: valid handle, key, and out-pointer.
        let st = unsafe { ffi::Highs_getDoubleInfoValue(self.0, key.as_ptr(), &mut v) };
        (st == ffi::STATUS_OK).then_some(v)
    }

    fn pass(&self, lp: &LinearProgram) -> Result<()> {
        let to_int = |v: usize| -> Result<ffi::HighsInt> {
            ffi::HighsInt::try_from(v)
                .map_err(|_| Error::Solver("model too large for HiGHS".into()))
        };
        let num_col = to_int(lp.num_cols())?;
        let num_row = to_int(lp.num_rows())?;
        let num_nz = to_int(lp.num_nonzeros())?;
        let start: Vec<ffi::HighsInt> = lp.row_start[..lp.num_rows()]
            .iter()
            .map(|&s| to_int(s))
            .collect::<Result<_>>()?;
        let index: Vec<ffi::HighsInt> = lp
            .row_index
            .iter()
            .map(|&i| to_int(i))
            .collect::<Result<_>>()?;
        let sense = match lp.sense {
            Sense::Minimize => ffi::OBJECTIVE_SENSE_MINIMIZE,
            Sense::Maximize => ffi::OBJECTIVE_SENSE_MAXIMIZE,
        };
        let ptr_or_null = |v: &[ffi::HighsInt]| {
            if v.is_empty() {
                std::ptr::null()
            } else {
                v.as_ptr()
            }
        };
        let fptr = |v: &[f64]| {
            if v.is_empty() {
                std::ptr::null()
            } else {
                v.as_ptr()
            }
        };
        // SAFETY: all arrays have the lengths HiGHS derives from num_col,
        // num_row and num_nz, and outlive the call (HiGHS copies them).
        let st = unsafe {
            if lp.is_mip() {
                let integrality: Vec<ffi::HighsInt> = lp
                    .integer
                    .iter()
                    .map(|&i| {
                        if i {
                            ffi::VAR_TYPE_INTEGER
                        } else {
                            ffi::VAR_TYPE_CONTINUOUS
                        }
                    })
                    .collect();
                ffi::Highs_passMip(
                    self.0,
                    num_col,
                    num_row,
                    num_nz,
                    ffi::MATRIX_FORMAT_ROW_WISE,
                    sense,
                    lp.offset,
                    fptr(&lp.col_cost),
                    fptr(&lp.col_lower),
                    fptr(&lp.col_upper),
                    fptr(&lp.row_lower),
                    fptr(&lp.row_upper),
                    ptr_or_null(&start),
                    ptr_or_null(&index),
                    fptr(&lp.row_value),
                    integrality.as_ptr(),
                )
            } else {
                ffi::Highs_passLp(
                    self.0,
                    num_col,
                    num_row,
                    num_nz,
                    ffi::MATRIX_FORMAT_ROW_WISE,
                    sense,
                    lp.offset,
                    fptr(&lp.col_cost),
                    fptr(&lp.col_lower),
                    fptr(&lp.col_upper),
                    fptr(&lp.row_lower),
                    fptr(&lp.row_upper),
                    ptr_or_null(&start),
                    ptr_or_null(&index),
                    fptr(&lp.row_value),
                )
            }
        };
        self.check(st, "model load")
    }
}

impl Drop for Handle {
    fn drop(&mut self) {
        // SAFETY: pointer came from Highs_create and is destroyed once.
        unsafe { ffi::Highs_destroy(self.0) }
    }
}

impl HighsBackend {
    fn configure(&self, h: &Handle, options: &SolveOptions, mip: bool) -> Result<()> {
        h.set_bool("output_flag", self.verbose)?;
        if let Some(t) = self.threads {
            h.set_int("threads", t)?;
        }
        if let Some(limit) = options.time_limit {
            h.set_double("time_limit", limit)?;
        }
        if mip {
            h.set_double("mip_rel_gap", options.mip_rel_gap)?;
        } else {
            h.set_string("solver", "simplex")?;
        }
        Ok(())
    }
}

impl SolverBackend for HighsBackend {
    fn name(&self) -> &str {
        "highs"
    }

    fn solve(&self, lp: &LinearProgram, options: &SolveOptions) -> Result<RawSolution> {
        let h = Handle::new()?;
        let mip = lp.is_mip();
        self.configure(&h, options, mip)?;
        h.pass(lp)?;
        // SAFETY: valid handle with a loaded model.
        let run = unsafe { ffi::Highs_run(h.0) };
        h.check(run, "run")?;
        // SAFETY: valid handle.
        let model_status = unsafe { ffi::Highs_getModelStatus(h.0) };
        let status = match model_status {
            ffi::MODEL_STATUS_OPTIMAL | ffi::MODEL_STATUS_MODEL_EMPTY => SolveStatus::Optimal,
            ffi::MODEL_STATUS_INFEASIBLE => SolveStatus::Infeasible,
            ffi::MODEL_STATUS_UNBOUNDED | ffi::MODEL_STATUS_UNBOUNDED_OR_INFEASIBLE => {
                SolveStatus::Unbounded
            }
            ffi::MODEL_STATUS_REACHED_TIME_LIMIT => SolveStatus::TimeLimit,
            _ => SolveStatus::Other,
        };
        if status != SolveStatus::Optimal {
            return Err(Error::Solver(format!(
                "HiGHS terminated with status {status:?} (model status {model_status})"
            )));
        }

        let (nc, nr) = (lp.num_cols(), lp.num_rows());
        let mut col_values = vec![0.0; nc];
        let mut col_duals = vec![0.0; nc];
        let mut row_values = vec![0.0; nr];
        let mut row_duals = vec![0.0; nr];
        // SAFETY: buffers sized to the model dimensions.
        let st = unsafe {
            ffi::Highs_getSolution(
                h.0,
                col_values.as_mut_ptr(),
                col_duals.as_mut_ptr(),
                row_values.as_mut_ptr(),
                row_duals.as_mut_ptr(),
            )
        };
        h.check(st, "solution query")?;
        // SAFETY: valid handle.
        let objective = unsafe { ffi::Highs_getObjectiveValue(h.0) };

        let (dual_bound, mip_gap, basis_signature) = if mip {
            (
                h.double_info("mip_dual_bound"),
                h.double_info("mip_gap"),
                None,
            )
        } else {
            let mut cs = vec![0 as ffi::HighsInt; nc];
            let mut rs = vec![0 as ffi::HighsInt; nr];
            // SAFETY: buffers sized to the model dimensions.
            let st = unsafe { ffi::Highs_getBasis(h.0, cs.as_mut_ptr(), rs.as_mut_ptr()) };
            let sig = (st != ffi::STATUS_ERROR).then(|| {
                let mut hasher = std::collections::hash_map::DefaultHasher::new();
                cs.hash(&mut hasher);
                rs.hash(&mut hasher);
                hasher.finish()
            });
            (None, None, sig)
        };
        if mip {
            col_duals.iter_mut().for_each(|d| *d = 0.0);
            row_duals.iter_mut().for_each(|d| *d = 0.0);
        }

        Ok(RawSolution {
            status,
            objective,
            col_values,
            row_values,
            col_duals,
            row_duals,
            dual_bound,
            mip_gap,
            basis_signature,
        })
    }

    fn concurrent_solves(&self) -> bool {
        true
    }

    fn export(&self, lp: &LinearProgram, path: &Path) -> Result<()> {
        let h = Handle::new()?;
        h.set_bool("output_flag", false)?;
        h.pass(lp)?;
        for (j, name) in lp.col_names.iter().enumerate() {
            let n = CString::new(sanitize(name)).expect("sanitized");
            // SAFETY: valid handle, index in range, NUL-terminated name.
            unsafe { ffi::Highs_passColName(h.0, j as ffi::HighsInt, n.as_ptr()) };
        }
        for (i, name) in lp.row_names.iter().enumerate() {
            let n = CString::new(sanitize(name)).expect("sanitized");
            // SAFETY: as above.
            unsafe { ffi::Highs_passRowName(h.0, i as ffi::HighsInt, n.as_ptr()) };
        }
        let p = CString::new(path.to_string_lossy().as_bytes())
            .map_err(|_| Error::input("export path contains NUL"))?;
        // SAFETY: valid handle and path string.
        let st = unsafe { ffi::Highs_writeModel(h.0, p.as_ptr()) };
        h.check(st, "model export")
    }
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

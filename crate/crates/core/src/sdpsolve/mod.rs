//! Native SDP solver behind a two-call contract: [`solve`] and [`check_solution`].

mod ipm;
mod reduce;

use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::linalg;
use crate::soscompile::SdpInstance;

pub use ipm::{BOUNDARY_SLACK, INACCURATE_RAY_TOL};
pub use reduce::check_equalities;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub tol_feas: f64,
    pub max_iter: usize,
    /// Accepted for interface stability; the interior-point method is deterministic.
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol_feas: 1e-8,
            max_iter: 500,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Feasible,
    Infeasible,
    NumericalFailure,
    IterationLimit,
}

impl SolveStatus {
    pub fn is_success(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::Feasible)
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Feasible => "feasible",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::NumericalFailure => "numerical_failure",
            SolveStatus::IterationLimit => "iteration_limit",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    /// Decision vector, present only for feasible or optimal solves.
    pub v: Option<Vec<f64>>,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// Relative duality gap; zero for pure feasibility problems once a point is found.
    pub gap: f64,
    pub iterations: usize,
    pub wall_time: f64,
    /// Free variables after eliminating the equalities.
    pub reduced_dim: usize,
    pub message: String,
    /// Tail of the iteration log on failure.
    pub trace: Vec<String>,
}

/// Independent recomputation of block eigenvalues and equality residuals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionCheck {
    /// `(block name, smallest eigenvalue)`.
    pub block_min_eig: Vec<(String, f64)>,
    pub eq_residuals: Vec<f64>,
    pub tol: f64,
}

impl SolutionCheck {
    pub fn min_eig(&self) -> f64 {
        self.block_min_eig.iter().map(|b| b.1).fold(f64::INFINITY, f64::min)
    }

    pub fn max_eq_residual(&self) -> f64 {
        self.eq_residuals.iter().fold(0.0, |a, r| a.max(r.abs()))
    }

    /// Blocks whose smallest eigenvalue is below `-tol`.
    pub fn violated_blocks(&self) -> Vec<&str> {
        self.block_min_eig
            .iter()
            .filter(|b| b.1 < -self.tol)
            .map(|b| b.0.as_str())
            .collect()
    }

    /// Equality rows with residual above `tol`.
    pub fn violated_rows(&self) -> Vec<usize> {
        (0..self.eq_residuals.len())
            .filter(|&r| self.eq_residuals[r].abs() > self.tol)
            .collect()
    }

    pub fn passes(&self) -> bool {
        self.violated_blocks().is_empty() && self.violated_rows().is_empty()
    }
}

/// Recomputes every block's smallest eigenvalue and every equality residual at `v`.
pub fn check_solution(inst: &SdpInstance, v: &[f64], tol: f64) -> SolutionCheck {
    assert_eq!(
        v.len(),
        inst.nvars,
        "decision vector length does not match the instance"
    );
    SolutionCheck {
        block_min_eig: inst
            .blocks
            .iter()
            .map(|b| (b.name.clone(), linalg::lambda_min(&b.eval(v))))
            .collect(),
        eq_residuals: inst.eqs.iter().map(|r| r.residual(v)).collect(),
        tol,
    }
}

pub fn solve(inst: &SdpInstance, opts: &SolveOptions) -> SolveReport {
    let start = Instant::now();
    let mut report = SolveReport {
        status: SolveStatus::NumericalFailure,
        v: None,
        primal_residual: f64::NAN,
        dual_residual: f64::NAN,
        gap: f64::NAN,
        iterations: 0,
        wall_time: 0.0,
        reduced_dim: 0,
        message: String::new(),
        trace: Vec::new(),
    };
    let red = match reduce::reduce(inst) {
        Ok(r) => r,
        Err(Error::StructuralInfeasibility { residual }) => {
            report.status = SolveStatus::Infeasible;
            report.primal_residual = residual;
            report.message = format!("equality constraints are inconsistent (residual {residual:.3e})");
            report.wall_time = start.elapsed().as_secs_f64();
            return report;
        }
        Err(e) => {
            report.message = e.to_string();
            report.wall_time = start.elapsed().as_secs_f64();
            return report;
        }
    };
    report.reduced_dim = red.dim();
    log::debug!(
        "reduced {} variables and {} equalities to {} free directions ({} pivots, null space {})",
        inst.nvars,
        inst.eqs.len(),
        red.dim(),
        red.pivots,
        red.null_dim
    );

    // Brute-force acceptance: the lifted point is checked against the original
    // instance, at the solver tolerance when strictly interior and with slack otherwise.
    let feasibility = inst.objective.iter().all(|&(_, c)| c == 0.0);
    let accept = |w: &[f64], strict: bool| -> bool {
        if strict && !red.eval(w).iter().all(|b| linalg::lambda_min(b) > 0.0) {
            return false;
        }
        let tol = if strict {
            opts.tol_feas
        } else {
            ipm::BOUNDARY_SLACK * opts.tol_feas
        };
        check_solution(inst, &red.lift(w), tol).passes()
    };
    let finish = |mut report: SolveReport, w: &[f64]| {
        let v = red.lift(w);
        let chk = check_solution(inst, &v, opts.tol_feas);
        report.primal_residual = chk.max_eq_residual().max((-chk.min_eig()).max(0.0));
        report.v = Some(v);
        report
    };

    if red.dim() == 0 {
        report.iterations = 0;
        report.dual_residual = 0.0;
        report.gap = 0.0;
        let v = red.lift(&[]);
        let chk = check_solution(inst, &v, opts.tol_feas);
        report.primal_residual = chk.max_eq_residual().max((-chk.min_eig()).max(0.0));
        if chk.passes() {
            report.status = if feasibility {
                SolveStatus::Feasible
            } else {
                SolveStatus::Optimal
            };
            report.v = Some(v);
        } else {
            report.status = SolveStatus::Infeasible;
            report.message = format!(
                "no free variables and the fixed point violates {:?}",
                chk.violated_blocks()
            );
        }
        report.wall_time = start.elapsed().as_secs_f64();
        return report;
    }

    let res = ipm::run(
        &red,
        &ipm::IpmOptions {
            tol: opts.tol_feas,
            max_iter: opts.max_iter,
            feasibility,
        },
        accept,
    );
    report.iterations = res.iterations;
    report.dual_residual = res.dres;
    report.gap = res.gap;
    report.primal_residual = res.pres;
    report.message = res.message;
    report = match res.outcome {
        ipm::Outcome::Feasible | ipm::Outcome::Optimal => {
            report.status = if res.outcome == ipm::Outcome::Feasible {
                SolveStatus::Feasible
            } else {
                SolveStatus::Optimal
            };
            finish(report, &res.w)
        }
        ipm::Outcome::Infeasible => {
            report.status = SolveStatus::Infeasible;
            report.trace = res.trace;
            report
        }
        ipm::Outcome::IterationLimit => {
            report.status = SolveStatus::IterationLimit;
            report.trace = res.trace;
            report
        }
        ipm::Outcome::NumericalFailure => {
            report.status = SolveStatus::NumericalFailure;
            report.trace = res.trace;
            report
        }
    };
    report.wall_time = start.elapsed().as_secs_f64();
    report
}

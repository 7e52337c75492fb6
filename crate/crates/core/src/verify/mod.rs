//! Certificate extraction and checks that do not trust the synthesis chain.

mod audit;
mod certificate;
mod report;
mod simulate;

pub use audit::{block_audit, lyapunov_audit, AuditReport, VDOT_TOL};
pub use certificate::{
    extract, gram_reconstruct, solved_blocks, Certificate, CertificateChecks, SolverSummary, EIG_TOL, IDENTITY_TOL,
    MAX_COND_P,
};
pub use report::{report, ComparisonReport, OrderingCheck, ReportRow, Verdict, TIMING_BAND};
pub use simulate::{simulate_closed_loop, Trajectory, TrajectoryPoint, INTEGRATOR_TOL};

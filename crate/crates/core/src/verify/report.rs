use std::fmt;

use serde::Serialize;

use crate::sdpsolve::SolveStatus;
use crate::soscompile::Method;

/// Relative wall-time difference below which the ordering is called inconclusive.
pub const TIMING_BAND: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportRow {
    pub method: Method,
    pub status: SolveStatus,
    pub decision_vars: usize,
    pub iterations: usize,
    pub wall_time: f64,
    pub max_vdot: Option<f64>,
    pub converged: Option<bool>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

/// `cor1` against `thm2`: fewer decision variables and lower wall time.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrderingCheck {
    pub cor1_vars: usize,
    pub thm2_vars: usize,
    pub cor1_time: f64,
    pub thm2_time: f64,
    pub fewer_vars: bool,
    pub timing: Verdict,
}

impl OrderingCheck {
    pub fn new(cor1_vars: usize, thm2_vars: usize, cor1_time: f64, thm2_time: f64) -> Self {
        let rel = (thm2_time - cor1_time).abs() / thm2_time.max(cor1_time).max(f64::MIN_POSITIVE);
        let timing = if rel <= TIMING_BAND {
            Verdict::Inconclusive
        } else if cor1_time < thm2_time {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        OrderingCheck {
            cor1_vars,
            thm2_vars,
            cor1_time,
            thm2_time,
            fewer_vars: cor1_vars < thm2_vars,
            timing,
        }
    }

    pub fn verdict(&self) -> Verdict {
        if !self.fewer_vars {
            Verdict::Fail
        } else {
            self.timing
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub rows: Vec<ReportRow>,
    pub ordering: Option<OrderingCheck>,
}

pub fn report(rows: Vec<ReportRow>) -> ComparisonReport {
    let find = |m: Method| rows.iter().find(|r| r.method == m);
    let ordering = match (find(Method::Cor1), find(Method::Thm2)) {
        (Some(c), Some(t)) => Some(OrderingCheck::new(
            c.decision_vars,
            t.decision_vars,
            c.wall_time,
            t.wall_time,
        )),
        _ => None,
    };
    ComparisonReport { rows, ordering }
}

impl fmt::Display for ComparisonReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<8} {:<18} {:>9} {:>6} {:>10} {:>12} {:>10}",
            "method", "status", "vars", "iters", "time[s]", "max Vdot", "converged"
        )?;
        for r in &self.rows {
            let vd = r.max_vdot.map_or("-".to_string(), |v| format!("{v:.3e}"));
            let cv = r.converged.map_or("-".to_string(), |c| c.to_string());
            writeln!(
                f,
                "{:<8} {:<18} {:>9} {:>6} {:>10.3} {:>12} {:>10}",
                r.method.to_string(),
                r.status.to_string(),
                r.decision_vars,
                r.iterations,
                r.wall_time,
                vd,
                cv
            )?;
        }
        if let Some(o) = &self.ordering {
            writeln!(
                f,
                "cor1 vs thm2: {} vs {} variables, {:.3}s vs {:.3}s -> {}",
                o.cor1_vars,
                o.thm2_vars,
                o.cor1_time,
                o.thm2_time,
                o.verdict()
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timing_band() {
        assert_eq!(OrderingCheck::new(10, 20, 1.0, 1.03).verdict(), Verdict::Inconclusive);
        assert_eq!(OrderingCheck::new(10, 20, 1.0, 2.0).verdict(), Verdict::Pass);
        assert_eq!(OrderingCheck::new(10, 20, 2.0, 1.0).verdict(), Verdict::Fail);
        assert_eq!(OrderingCheck::new(30, 20, 1.0, 2.0).verdict(), Verdict::Fail);
    }

    #[test]
    fn single_method_has_no_ordering() {
        let rep = report(vec![ReportRow {
            method: Method::Thm2,
            status: SolveStatus::Feasible,
            decision_vars: 5,
            iterations: 3,
            wall_time: 0.1,
            max_vdot: None,
            converged: None,
        }]);
        assert!(rep.ordering.is_none());
        assert_eq!(rep.to_string().lines().count(), 2);
    }
}

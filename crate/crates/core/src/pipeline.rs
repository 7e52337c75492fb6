//! Build, compile, solve and extract in one call.

use std::time::Instant;

use crate::basis::BasisSpec;
use crate::error::Result;
use crate::experiment::DataSet;
use crate::polyalg::MatrixPolynomial;
use crate::sdpsolve::{solve, SolveOptions, SolveReport};
use crate::soscompile::{build, compile, Method, SdpInstance, SosProgram, SynthesisOptions, SynthesisProblem};
use crate::verify::{extract, solved_blocks, Certificate};

#[derive(Clone, Debug)]
pub struct SynthesisOutcome {
    pub method: Method,
    pub program: SosProgram,
    pub instance: SdpInstance,
    pub report: SolveReport,
    pub certificate: Option<Certificate>,
    /// Why no certificate was produced despite a successful solve.
    pub extract_error: Option<String>,
    /// Formulation, compilation and solve.
    pub wall_time: f64,
}

impl SynthesisOutcome {
    /// SOS-constrained matrices at the solution, when there is one.
    pub fn solved_blocks(&self) -> Option<Vec<(String, MatrixPolynomial)>> {
        self.report.v.as_ref().map(|v| solved_blocks(&self.program, v))
    }
}

/// Configuration errors surface as `Err`; infeasibility is reported in the outcome.
pub fn synthesize(
    method: Method,
    spec: &BasisSpec,
    data: &DataSet,
    options: &SynthesisOptions,
    solve_opts: &SolveOptions,
) -> Result<SynthesisOutcome> {
    let start = Instant::now();
    let problem = SynthesisProblem {
        method,
        spec,
        data,
        options: options.clone(),
    };
    let program = build(&problem)?;
    for w in &program.warnings {
        log::warn!("{method}: {w}");
    }
    let instance = compile(&program)?;
    log::info!(
        "{method}: {} decision variables, blocks {:?}, {} equalities",
        instance.nvars,
        instance.block_sizes(),
        instance.eqs.len()
    );
    let report = solve(&instance, solve_opts);
    let wall_time = start.elapsed().as_secs_f64();
    log::info!(
        "{method}: {} after {} iterations in {wall_time:.3}s",
        report.status,
        report.iterations
    );
    let (certificate, extract_error) = if report.status.is_success() {
        match extract(&problem, &program, &instance, &report) {
            Ok(c) => (Some(c), None),
            Err(e) => (None, Some(e.to_string())),
        }
    } else {
        (None, None)
    };
    Ok(SynthesisOutcome {
        method,
        program,
        instance,
        report,
        certificate,
        extract_error,
        wall_time,
    })
}

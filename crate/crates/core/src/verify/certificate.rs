use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::GroundTruth;
use crate::linalg;
use crate::polyalg::{MatrixPolynomial, Polynomial};
use crate::sdpsolve::{SolveReport, SolveStatus};
use crate::soscompile::{GramInfo, Method, SdpInstance, SosProgram, SynthesisOptions, SynthesisProblem};

/// Largest admissible condition number of `P`.
pub const MAX_COND_P: f64 = 1e12;
/// Tolerance for the polynomial identities checked at extraction.
pub const IDENTITY_TOL: f64 = 1e-6;
/// Tolerance for eigenvalue checks at extraction.
pub const EIG_TOL: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverSummary {
    pub status: SolveStatus,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub decision_vars: usize,
    pub equalities: usize,
    pub block_sizes: Vec<usize>,
    pub reduced_dim: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateChecks {
    pub p_min_eig: f64,
    /// Largest coefficient of `Z0 Y(x) - H(x) P`, for methods with that equality.
    pub equality_residual: Option<f64>,
    /// Smallest eigenvalue of the Gram matrix of `eps1 - delta |x|^2`.
    pub eps1_gram_min_eig: f64,
    /// Largest coefficient of `F(x) P - U0 Y(x)` (or `- K(x)`).
    pub gain_identity_residual: f64,
}

/// Controller `u = F(x) Zhat(x)` and Lyapunov function `V = Zhat^T P^-1 Zhat`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub method: Method,
    pub n: usize,
    pub m: usize,
    pub zhat: MatrixPolynomial,
    pub p: Vec<Vec<f64>>,
    pub p_inv: Vec<Vec<f64>>,
    pub cond_p: f64,
    /// `Y(x)` for data-sized methods, `K(x)` for `cor1`.
    pub yk: MatrixPolynomial,
    pub eps1: Polynomial,
    pub eps2: Polynomial,
    /// Gain `F(x)`, `m x p`.
    pub f: MatrixPolynomial,
    pub options: SynthesisOptions,
    pub solver: SolverSummary,
    pub checks: CertificateChecks,
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn matrix_of(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    DMatrix::from_fn(r, c, |i, j| rows[i][j])
}

fn max_coeff(m: &MatrixPolynomial) -> f64 {
    m.entries().iter().map(Polynomial::max_abs_coeff).fold(0.0, f64::max)
}

impl Certificate {
    pub fn p_matrix(&self) -> DMatrix<f64> {
        matrix_of(&self.p)
    }

    pub fn p_inv_matrix(&self) -> DMatrix<f64> {
        matrix_of(&self.p_inv)
    }

    /// `u(x) = F(x) Zhat(x)`, an `m x 1` matrix polynomial.
    pub fn controller(&self) -> MatrixPolynomial {
        self.f.mul(&self.zhat).expect("F is m x p")
    }

    /// `V(x) = Zhat^T P^-1 Zhat`.
    pub fn lyapunov(&self) -> Polynomial {
        let pz = self.zhat.lmul_const(&self.p_inv_matrix()).expect("P is p x p");
        self.zhat.transpose().mul(&pz).expect("shapes agree").get(0, 0).clone()
    }

    /// Closed-loop vector field `f(x) + g(x) u(x)`.
    pub fn closed_loop(&self, gt: &GroundTruth) -> Result<MatrixPolynomial> {
        if gt.n() != self.n || gt.m() != self.m {
            return Err(Error::Shape(format!(
                "certificate is for n={}, m={}, system has n={}, m={}",
                self.n,
                self.m,
                gt.n(),
                gt.m()
            )));
        }
        gt.f.add(&gt.g.mul(&self.controller())?)
    }

    /// `dV/dt = 2 Zhat^T P^-1 dZhat/dx (f + g u)`, computed symbolically.
    pub fn vdot(&self, gt: &GroundTruth) -> Result<Polynomial> {
        let fc = self.closed_loop(gt)?;
        let j = self.zhat.jacobian()?;
        let pz = self.zhat.lmul_const(&self.p_inv_matrix())?;
        let v = pz.transpose().mul(&j)?.mul(&fc)?;
        Ok(v.get(0, 0).scale(2.0))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Rebuilds `M(x)` of one SOS constraint from its solved Gram matrix.
pub fn gram_reconstruct(inst: &SdpInstance, info: &GramInfo, v: &[f64], nvars: usize) -> MatrixPolynomial {
    let q = inst.blocks[info.block].eval(v);
    let r = info.slots.len();
    let mut offsets = Vec::with_capacity(r);
    let mut acc = 0;
    for s in &info.slots {
        offsets.push(acc);
        acc += s.len();
    }
    let mut out = MatrixPolynomial::zeros(r, r, nvars);
    for i in 0..r {
        for j in 0..r {
            let mut e = Polynomial::zero(nvars);
            for (a, ma) in info.slots[i].iter().enumerate() {
                for (b, mb) in info.slots[j].iter().enumerate() {
                    let c = q[(offsets[i] + a, offsets[j] + b)];
                    if c != 0.0 {
                        e.add_scaled(&Polynomial::monomial(ma.mul(mb), c), 1.0);
                    }
                }
            }
            out.set(i, j, e);
        }
    }
    out
}

/// Every SOS-constrained matrix of the program evaluated at the solution.
pub fn solved_blocks(program: &SosProgram, v: &[f64]) -> Vec<(String, MatrixPolynomial)> {
    program
        .sos
        .iter()
        .map(|(name, m)| (name.clone(), m.eval_vars(v)))
        .collect()
}

/// Builds the certificate from a feasible solve and checks its invariants.
pub fn extract(
    problem: &SynthesisProblem,
    program: &SosProgram,
    inst: &SdpInstance,
    report: &SolveReport,
) -> Result<Certificate> {
    let v = match (&report.v, report.status.is_success()) {
        (Some(v), true) => v,
        _ => {
            return Err(Error::NotFeasible(format!(
                "status {}: {}",
                report.status, report.message
            )));
        }
    };
    let nx = problem.spec.n;
    let origin = vec![0.0; nx];
    let p = linalg::symmetrize(&program.p.eval_vars(v).eval(&origin));
    let (p_inv, cond) = linalg::spd_inverse(&p);
    log::info!("{}: cond(P) = {cond:.3e}", program.method);
    if !(cond.is_finite() && cond <= MAX_COND_P) {
        return Err(Error::IllConditioned { cond });
    }
    let yk = program.yk.eval_vars(v);
    let scaled = match program.method {
        Method::Cor1 => yk.clone(),
        _ => yk.lmul_const(&problem.data.u0)?,
    };
    let f = scaled.rmul_const(&p_inv)?;

    let p_min_eig = linalg::lambda_min(&p);
    let equality_residual = program
        .equalities
        .iter()
        .map(|(_, m)| max_coeff(&m.eval_vars(v)))
        .reduce(f64::max);
    let eps1_gram_min_eig = inst
        .gram
        .iter()
        .find(|g| g.name == "eps1_strict")
        .map(|g| linalg::lambda_min(&inst.blocks[g.block].eval(v)))
        .unwrap_or(f64::INFINITY);
    let gain_identity_residual = max_coeff(&f.rmul_const(&p)?.sub(&scaled)?);
    let checks = CertificateChecks {
        p_min_eig,
        equality_residual,
        eps1_gram_min_eig,
        gain_identity_residual,
    };

    let mut problems = Vec::new();
    if p_min_eig < program.options.rho - EIG_TOL {
        problems.push(format!("lambda_min(P) = {p_min_eig:.3e} below rho"));
    }
    if let Some(r) = equality_residual.filter(|&r| r > IDENTITY_TOL) {
        problems.push(format!("Z0 Y - H P residual {r:.3e}"));
    }
    if eps1_gram_min_eig < -EIG_TOL {
        problems.push(format!("eps1 Gram matrix has eigenvalue {eps1_gram_min_eig:.3e}"));
    }
    if gain_identity_residual > IDENTITY_TOL {
        problems.push(format!("F P identity residual {gain_identity_residual:.3e}"));
    }
    if !problems.is_empty() {
        return Err(Error::InvalidCertificate(problems.join("; ")));
    }

    Ok(Certificate {
        method: program.method,
        n: nx,
        m: problem.spec.m,
        zhat: problem.spec.zhat.clone(),
        p: rows_of(&p),
        p_inv: rows_of(&p_inv),
        cond_p: cond,
        yk,
        eps1: program.eps1.eval_vars(v),
        eps2: program.eps2.eval_vars(v),
        f,
        options: program.options.clone(),
        solver: SolverSummary {
            status: report.status,
            iterations: report.iterations,
            primal_residual: report.primal_residual,
            dual_residual: report.dual_residual,
            gap: report.gap,
            decision_vars: inst.nvars,
            equalities: inst.eqs.len(),
            block_sizes: inst.block_sizes(),
            reduced_dim: report.reduced_dim,
        },
        checks,
    })
}

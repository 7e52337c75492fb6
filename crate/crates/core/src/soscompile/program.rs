use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::affine::{AffineMatrix, AffinePoly, LinExpr};
use super::gram::compile_sos_matrix;
use super::sdp::{EqRow, PsdBlock, SdpInstance, VarAlloc, VarSlice};
use crate::basis::BasisSpec;
use crate::error::{Error, Result};
use crate::experiment::DataSet;
use crate::linalg;
use crate::polyalg::{MatrixPolynomial, Monomial, Polynomial};

/// The five synthesis formulations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Noise and input-matrix bounds, block of size `p + q + T`.
    Thm1,
    /// Input vector field independent of `x` (`W = I`), block of size `p + T`.
    Remark1,
    /// Noise bound only, block of size `p + q + N`.
    Thm2,
    /// As `Thm2` with `K(x) = F(x) P` as decision variable and no equality constraint.
    Cor1,
    /// Least-squares model `S* = X1 Wbar0^+` in the `Thm1`-shaped block.
    Lsq,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Thm1, Method::Remark1, Method::Thm2, Method::Cor1, Method::Lsq];

    pub fn name(self) -> &'static str {
        match self {
            Method::Thm1 => "thm1",
            Method::Remark1 => "remark1",
            Method::Thm2 => "thm2",
            Method::Cor1 => "cor1",
            Method::Lsq => "lsq",
        }
    }

    /// Whether the program carries the equality `Z0 Y(x) = H(x) P`.
    pub fn has_equality(self) -> bool {
        self != Method::Cor1
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    #[default]
    Feasibility,
    /// Minimize the trace of the largest Gram block.
    MinTrace,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthesisOptions {
    pub deg_yk: u32,
    pub deg_eps1: u32,
    pub deg_eps2: u32,
    /// Strictness margin: `eps1 - delta |x|^2` and `eps2 - delta` must be SOS.
    pub delta: f64,
    /// Floor `P >= rho I`.
    pub rho: f64,
    pub objective: Objective,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        SynthesisOptions {
            deg_yk: 2,
            deg_eps1: 2,
            deg_eps2: 2,
            delta: 1e-6,
            rho: 1e-3,
            objective: Objective::Feasibility,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SynthesisProblem<'a> {
    pub method: Method,
    pub spec: &'a BasisSpec,
    pub data: &'a DataSet,
    pub options: SynthesisOptions,
}

/// Decision variables, equalities and SOS-matrix constraints of one formulation.
#[derive(Clone, Debug)]
pub struct SosProgram {
    pub method: Method,
    pub n: usize,
    pub options: SynthesisOptions,
    pub alloc: VarAlloc,
    /// Symmetric `p x p`, free of `x`.
    pub p: AffineMatrix,
    /// `Y(x)` (`T x p`) or `K(x)` (`m x p`).
    pub yk: AffineMatrix,
    pub eps1: AffinePoly,
    pub eps2: AffinePoly,
    /// Matrices that must vanish identically.
    pub equalities: Vec<(String, AffineMatrix)>,
    /// Matrices that must be SOS matrices; the first is the main condition.
    pub sos: Vec<(String, AffineMatrix)>,
    /// `x`-free matrices that must be PSD.
    pub psd: Vec<(String, AffineMatrix)>,
    pub warnings: Vec<String>,
}

impl SosProgram {
    /// Number of scalar decision variables before Gram reduction.
    pub fn decision_count(&self) -> usize {
        self.alloc.count()
    }

    pub fn main_block(&self) -> &AffineMatrix {
        &self.sos[0].1
    }
}

fn sym_var_matrix(alloc: &mut VarAlloc, name: &str, k: usize, nx: usize) -> AffineMatrix {
    let base = alloc.alloc(name, k * (k + 1) / 2);
    let mut m = AffineMatrix::zeros(k, k, nx);
    let mut idx = base;
    for i in 0..k {
        for j in i..k {
            let e = AffinePoly::scalar_var(nx, idx);
            m.set(i, j, e.clone());
            m.set(j, i, e);
            idx += 1;
        }
    }
    m
}

fn poly_var_matrix(alloc: &mut VarAlloc, name: &str, rows: usize, cols: usize, nx: usize, deg: u32) -> AffineMatrix {
    let monos = Monomial::all_up_to(nx, 0, deg);
    let base = alloc.alloc(name, rows * cols * monos.len());
    let mut m = AffineMatrix::zeros(rows, cols, nx);
    let mut idx = base;
    for i in 0..rows {
        for j in 0..cols {
            let mut e = AffinePoly::zero(nx);
            for mono in &monos {
                e.add_scaled(&AffinePoly::var_term(idx, mono.clone(), 1.0), 1.0);
                idx += 1;
            }
            m.set(i, j, e);
        }
    }
    m
}

fn poly_var(alloc: &mut VarAlloc, name: &str, nx: usize, deg: u32) -> AffinePoly {
    poly_var_matrix(alloc, name, 1, 1, nx, deg).get(0, 0).clone()
}

fn constant(m: &DMatrix<f64>, nx: usize) -> MatrixPolynomial {
    MatrixPolynomial::from_constant(m, nx)
}

fn hcat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((0, a.ncols()), b.shape()).copy_from(b);
    out
}

/// Builds the SOS program for the requested formulation.
pub fn build(problem: &SynthesisProblem) -> Result<SosProgram> {
    let SynthesisProblem {
        method,
        spec,
        data,
        options,
    } = problem;
    let method = *method;
    let o = options;
    if o.deg_eps1 < 2 || o.deg_eps1 % 2 != 0 {
        return Err(Error::Config(format!(
            "deg_eps1 must be even and at least 2, got {}",
            o.deg_eps1
        )));
    }
    if o.deg_eps2 % 2 != 0 {
        return Err(Error::Config(format!("deg_eps2 must be even, got {}", o.deg_eps2)));
    }
    if o.rho <= 0.0 || o.delta < 0.0 {
        return Err(Error::Config("rho must be positive and delta non-negative".into()));
    }
    if data.n() != spec.n || data.m() != spec.m || data.z0.nrows() != spec.big_n() || data.ubar0.nrows() != spec.q() {
        return Err(Error::Shape("data set was not built with this basis".into()));
    }
    if data.rd.nrows() != spec.n {
        return Err(Error::Shape(format!(
            "RD has {} rows, expected {}",
            data.rd.nrows(),
            spec.n
        )));
    }
    match method {
        Method::Thm1 if data.rb.is_none() => {
            return Err(Error::Config("thm1 needs an input-matrix bound RB (--rb)".into()));
        }
        Method::Remark1 if !spec.w_is_identity() => {
            return Err(Error::MethodMismatch {
                method: "remark1".into(),
                reason: "requires W(x) = I".into(),
            });
        }
        _ => {}
    }

    let nx = spec.n;
    let p = spec.p();
    let q = spec.q();
    let big_n = spec.big_n();
    let t = data.samples();
    let mut warnings = Vec::new();

    let mut alloc = VarAlloc::default();
    let pm = sym_var_matrix(&mut alloc, "P", p, nx);
    let yk = match method {
        Method::Cor1 => poly_var_matrix(&mut alloc, "K", spec.m, p, nx, o.deg_yk),
        _ => poly_var_matrix(&mut alloc, "Y", t, p, nx, o.deg_yk),
    };
    let eps1 = poly_var(&mut alloc, "eps1", nx, o.deg_eps1);
    let eps2 = poly_var(&mut alloc, "eps2", nx, o.deg_eps2);

    let j = spec.zhat_jacobian();
    let eps1_i = AffineMatrix::scalar_identity(&eps1, p);
    let rd_rdt = &data.rd * data.rd.transpose();

    // -J X Y - (J X Y)^T for a data-derived n x T matrix polynomial X.
    let drift = |x: &MatrixPolynomial| -> Result<AffineMatrix> {
        let jxy = yk.lmul(&j.mul(x)?)?;
        Ok(jxy.add(&jxy.transpose())?.scale(-1.0))
    };
    // eps2 * J R J^T for a constant n x n matrix R.
    let eps2_jrj = |r: &DMatrix<f64>| -> Result<AffineMatrix> {
        let jrj = j.mul(&constant(r, nx))?.mul(&j.transpose())?;
        AffineMatrix::from_poly(&jrj).mul_scalar(&eps2)
    };

    let main = match method {
        Method::Thm1 | Method::Remark1 | Method::Lsq => {
            let (x_model, uhat, bound) = match method {
                Method::Thm1 => {
                    let rb = data.rb.as_ref().expect("checked above");
                    let re = hcat(rb, &data.rd);
                    let w_u0 = spec.w.rmul_const(&data.u0)?;
                    let top = constant(&data.ubar0, nx).sub(&w_u0)?;
                    let uhat = crate::experiment::stack(&top, &MatrixPolynomial::identity(t, nx));
                    (constant(&data.x1, nx), uhat, &re * re.transpose())
                }
                Method::Remark1 => (
                    constant(&data.x1, nx),
                    MatrixPolynomial::identity(t, nx),
                    rd_rdt.clone(),
                ),
                _ => {
                    let pinv = linalg::pinv(&data.wbar0, linalg::PINV_RTOL);
                    if linalg::rank(&data.wbar0, 1e-8) < data.wbar0.nrows() {
                        warnings.push(format!(
                            "Wbar0 ({}x{}) is rank deficient; the least-squares estimate is not unique",
                            data.wbar0.nrows(),
                            data.wbar0.ncols()
                        ));
                    }
                    let s_star = &data.x1 * &pinv;
                    let w0 = data.w0_poly(spec);
                    let x_model = w0.lmul_const(&s_star)?;
                    let uhat = w0.lmul_const(&pinv)?;
                    (x_model, uhat, rd_rdt.clone())
                }
            };
            let upsilon = drift(&x_model)?.sub(&eps2_jrj(&bound)?)?;
            let off = yk.lmul(&uhat)?;
            let k = off.rows();
            AffineMatrix::block_sym(
                &upsilon.sub(&eps1_i)?,
                &off.transpose(),
                &AffineMatrix::scalar_identity(&eps2, k),
            )?
        }
        Method::Thm2 | Method::Cor1 => {
            let x1x1 = &data.x1 * data.x1.transpose();
            let upsilon_d = eps2_jrj(&(x1x1 - &rd_rdt))?;
            let w0y = match method {
                Method::Thm2 => yk.lmul(&data.w0_poly(spec))?,
                _ => {
                    let wk = yk.lmul(&spec.w)?;
                    let hp = pm.lmul(&spec.h)?;
                    let mut m = AffineMatrix::zeros(q + big_n, p, nx);
                    m.set_block(0, 0, &wk);
                    m.set_block(q, 0, &hp);
                    m
                }
            };
            let jxw = j.mul(&constant(&(&data.x1 * data.wbar0.transpose()), nx))?;
            let cross = w0y
                .transpose()
                .scale(-1.0)
                .sub(&AffineMatrix::from_poly(&jxw).mul_scalar(&eps2)?)?;
            let wwt = constant(&(&data.wbar0 * data.wbar0.transpose()), nx);
            AffineMatrix::block_sym(
                &upsilon_d.sub(&eps1_i)?,
                &cross,
                &AffineMatrix::from_poly(&wwt).mul_scalar(&eps2)?,
            )?
        }
    };

    let mut equalities = Vec::new();
    if method.has_equality() {
        let z0y = yk.lmul(&constant(&data.z0, nx))?;
        let hp = pm.lmul(&spec.h)?;
        equalities.push(("Z0Y=HP".to_string(), z0y.sub(&hp)?));
    }

    let mut norm2 = Polynomial::zero(nx);
    for i in 0..nx {
        let xi = Polynomial::var(nx, i);
        norm2.add_scaled(&(&xi * &xi), 1.0);
    }
    let eps1_strict = {
        let mut e = eps1.clone();
        e.add_scaled(&AffinePoly::from_poly(&norm2), -o.delta);
        AffineMatrix::scalar_identity(&e, 1)
    };
    let eps2_pos = {
        let mut e = eps2.clone();
        e.add_scaled(&AffinePoly::from_poly(&Polynomial::constant(nx, o.delta)), -1.0);
        AffineMatrix::scalar_identity(&e, 1)
    };
    let p_floor = pm.sub(&AffineMatrix::from_poly(
        &MatrixPolynomial::identity(p, nx).scale(o.rho),
    ))?;

    Ok(SosProgram {
        method,
        n: nx,
        options: o.clone(),
        alloc,
        p: pm,
        yk,
        eps1,
        eps2,
        equalities,
        sos: vec![
            ("main".into(), main),
            ("eps1_strict".into(), eps1_strict),
            ("eps2_pos".into(), eps2_pos),
        ],
        psd: vec![("P_floor".into(), p_floor)],
        warnings,
    })
}

fn build_as(method: Method, problem: &SynthesisProblem) -> Result<SosProgram> {
    build(&SynthesisProblem {
        method,
        ..problem.clone()
    })
}

pub fn build_thm1(problem: &SynthesisProblem) -> Result<SosProgram> {
    build_as(Method::Thm1, problem)
}

pub fn build_remark1(problem: &SynthesisProblem) -> Result<SosProgram> {
    build_as(Method::Remark1, problem)
}

pub fn build_thm2(problem: &SynthesisProblem) -> Result<SosProgram> {
    build_as(Method::Thm2, problem)
}

pub fn build_cor1(problem: &SynthesisProblem) -> Result<SosProgram> {
    build_as(Method::Cor1, problem)
}

pub fn build_lsq(problem: &SynthesisProblem) -> Result<SosProgram> {
    build_as(Method::Lsq, problem)
}

fn linexpr_row(e: &LinExpr) -> EqRow {
    EqRow {
        terms: e.terms.iter().map(|(&k, &c)| (k, c)).collect(),
        rhs: -e.constant,
    }
}

/// Aggregates Gram blocks, the `P` floor and all linear equalities into one SDP.
pub fn compile(program: &SosProgram) -> Result<SdpInstance> {
    let mut alloc = program.alloc.clone();
    let mut inst = SdpInstance::default();

    for (_, m) in &program.equalities {
        for e in m.entries() {
            for (_, lin) in e.terms() {
                inst.eqs.push(linexpr_row(lin));
            }
        }
    }

    for (name, m) in &program.psd {
        if m.degree() > 0 {
            return Err(Error::Shape(format!("PSD constraint {name} depends on x")));
        }
        let mut block = PsdBlock {
            name: name.clone(),
            size: m.rows(),
            constant: Vec::new(),
            linear: Vec::new(),
        };
        for i in 0..m.rows() {
            for jj in i..m.cols() {
                for (_, lin) in m.get(i, jj).terms() {
                    if lin.constant != 0.0 {
                        block.constant.push((i, jj, lin.constant));
                    }
                    for (&k, &c) in &lin.terms {
                        block.linear.push((k, i, jj, c));
                    }
                }
            }
        }
        inst.blocks.push(block);
    }

    let mut largest: Option<(usize, usize)> = None;
    for (name, m) in &program.sos {
        let g = compile_sos_matrix(name, m, &mut alloc)?;
        let idx = inst.blocks.len();
        inst.gram.push(g.info(name, idx));
        if largest.is_none_or(|(_, s)| g.block.size > s) {
            largest = Some((idx, g.block.size));
        }
        inst.eqs.extend(g.eqs);
        inst.blocks.push(g.block);
    }

    if program.options.objective == Objective::MinTrace {
        if let Some((idx, _)) = largest {
            inst.objective = inst.blocks[idx]
                .linear
                .iter()
                .filter(|&&(_, i, j, _)| i == j)
                .map(|&(k, _, _, c)| (k, c))
                .collect();
        }
    }

    inst.nvars = alloc.count();
    inst.layout = alloc.layout().to_vec();
    crate::sdpsolve::check_equalities(&inst)?;
    Ok(inst)
}

/// Decision-variable slices of a compiled instance that belong to the program
/// itself rather than to Gram matrices.
pub fn decision_slices(inst: &SdpInstance) -> Vec<VarSlice> {
    inst.layout
        .iter()
        .filter(|s| !s.name.starts_with("gram:"))
        .cloned()
        .collect()
}

//! Experiment data: simulation of a known system, ingestion of recorded data,
//! the derived data matrices and the quadratic noise bounds.

mod io;
pub mod systems;

pub use io::{export_csv, ingest, sidecar_path};
pub use systems::{actuated2d, builtin, integrator, linear1d, scalar_cubic, vanderpol, BUILTIN_SYSTEMS};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::basis::BasisSpec;
use crate::error::{Error, Result};
use crate::linalg;
use crate::ode::rk4_step;
use crate::polyalg::{MatrixPolynomial, Polynomial};

/// Trajectories whose state norm exceeds this are reported as diverged.
pub const DIVERGENCE_NORM: f64 = 1e6;

/// The true dynamics `x' = f(x) + g(x) u`. Only the simulator and the verifier see it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub f: MatrixPolynomial,
    pub g: MatrixPolynomial,
}

impl GroundTruth {
    pub fn new(f: MatrixPolynomial, g: MatrixPolynomial) -> Result<Self> {
        if f.cols() != 1 || g.rows() != f.rows() || f.nvars() != f.rows() || g.nvars() != f.nvars() {
            return Err(Error::Shape(format!(
                "f is {}x{}, g is {}x{} in {} variables",
                f.rows(),
                f.cols(),
                g.rows(),
                g.cols(),
                f.nvars()
            )));
        }
        let f0 = f.eval(&vec![0.0; f.nvars()]).amax();
        if f0 != 0.0 {
            return Err(Error::Config(format!("f(0) must vanish, got max |f(0)| = {f0}")));
        }
        Ok(GroundTruth { f, g })
    }

    pub fn n(&self) -> usize {
        self.f.rows()
    }

    pub fn m(&self) -> usize {
        self.g.cols()
    }

    pub fn rhs(&self, x: &[f64], u: &[f64]) -> DVector<f64> {
        let fx = self.f.eval(x);
        let gx = self.g.eval(x);
        DVector::from_iterator(self.n(), fx.iter().copied()) + gx * DVector::from_column_slice(u)
    }
}

/// Excitation applied during the experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum InputSignal {
    /// `u_i(t) = sin((i + 1) t)`.
    Sine,
    Zero,
    Constant(Vec<f64>),
}

impl InputSignal {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "sin" => Ok(InputSignal::Sine),
            "zero" | "none" => Ok(InputSignal::Zero),
            _ => match s.strip_prefix("const:") {
                Some(v) => Ok(InputSignal::Constant(parse_vec(v)?)),
                None => Err(Error::Config(format!("unknown input signal '{s}'"))),
            },
        }
    }

    pub fn at(&self, t: f64, m: usize) -> Vec<f64> {
        match self {
            InputSignal::Sine => (0..m).map(|i| ((i + 1) as f64 * t).sin()).collect(),
            InputSignal::Zero => vec![0.0; m],
            InputSignal::Constant(v) => (0..m).map(|i| v.get(i).copied().unwrap_or(0.0)).collect(),
        }
    }
}

/// Parses a comma-separated list of reals.
pub fn parse_vec(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("'{v}' is not a number")))
        })
        .collect()
}

/// Measurement noise added to the derivative samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum NoiseModel {
    None,
    /// `D0 = gamma * X1_clean`.
    Proportional {
        gamma: f64,
    },
    /// i.i.d. uniform entries in `[-delta, delta]`.
    Uniform {
        delta: f64,
        seed: u64,
    },
}

impl NoiseModel {
    /// `none`, `prop:<gamma>` or `uniform:<delta>`; the seed applies to random models.
    pub fn parse(s: &str, seed: u64) -> Result<Self> {
        if s == "none" {
            return Ok(NoiseModel::None);
        }
        let (kind, val) = s
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("noise model '{s}' needs a parameter")))?;
        let v: f64 = val
            .parse()
            .map_err(|_| Error::Config(format!("bad noise parameter '{val}'")))?;
        match kind {
            "prop" => Ok(NoiseModel::Proportional { gamma: v }),
            "uniform" => Ok(NoiseModel::Uniform { delta: v, seed }),
            _ => Err(Error::Config(format!("unknown noise model '{kind}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub x0: Vec<f64>,
    pub input: InputSignal,
    pub t0: f64,
    pub tau: f64,
    pub samples: usize,
    pub noise: NoiseModel,
}

impl ExperimentConfig {
    /// The Van der Pol experiment: `x0 = [-0.1, 0.1]`, `u = sin t`, period 0.5, 12 samples,
    /// 5% proportional noise.
    pub fn vanderpol() -> Self {
        ExperimentConfig {
            x0: vec![-0.1, 0.1],
            input: InputSignal::Sine,
            t0: 0.0,
            tau: 0.5,
            samples: 12,
            noise: NoiseModel::Proportional { gamma: 0.05 },
        }
    }
}

/// Samples of one experiment together with the matrices derived from them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataSet {
    pub tau: f64,
    pub t0: f64,
    pub times: Vec<f64>,
    pub u0: DMatrix<f64>,
    pub x0: DMatrix<f64>,
    pub x1: DMatrix<f64>,
    pub z0: DMatrix<f64>,
    pub ubar0: DMatrix<f64>,
    pub wbar0: DMatrix<f64>,
    /// Noise bound factor, `D0 D0^T <= RD RD^T`.
    pub rd: DMatrix<f64>,
    /// Optional input-matrix bound factor, `B B^T <= RB RB^T`.
    pub rb: Option<DMatrix<f64>>,
    /// Injected noise, known only for simulated data.
    pub d0: Option<DMatrix<f64>>,
}

impl DataSet {
    /// Builds the derived matrices `Z0`, `Ubar0`, `Wbar0` from raw samples. `RD` starts at zero.
    pub fn from_samples(
        spec: &BasisSpec,
        t0: f64,
        tau: f64,
        times: Vec<f64>,
        u0: DMatrix<f64>,
        x0: DMatrix<f64>,
        x1: DMatrix<f64>,
    ) -> Result<Self> {
        let t = x0.ncols();
        if x0.nrows() != spec.n || x1.nrows() != spec.n || u0.nrows() != spec.m {
            return Err(Error::Shape(format!(
                "samples have n={}, m={}, basis expects n={}, m={}",
                x0.nrows(),
                u0.nrows(),
                spec.n,
                spec.m
            )));
        }
        if x1.ncols() != t || u0.ncols() != t || times.len() != t {
            return Err(Error::Shape("sample matrices disagree on T".into()));
        }
        let big_n = spec.big_n();
        let q = spec.q();
        let mut z0 = DMatrix::zeros(big_n, t);
        let mut ubar0 = DMatrix::zeros(q, t);
        for k in 0..t {
            let xk: Vec<f64> = x0.column(k).iter().copied().collect();
            z0.set_column(k, &spec.z.eval(&xk).column(0));
            ubar0.set_column(k, &(spec.w.eval(&xk) * u0.column(k)).column(0));
        }
        let mut wbar0 = DMatrix::zeros(q + big_n, t);
        wbar0.view_mut((0, 0), (q, t)).copy_from(&ubar0);
        wbar0.view_mut((q, 0), (big_n, t)).copy_from(&z0);
        Ok(DataSet {
            tau,
            t0,
            times,
            u0,
            x0,
            x1,
            z0,
            ubar0,
            wbar0,
            rd: DMatrix::zeros(spec.n, 0),
            rb: None,
            d0: None,
        })
    }

    pub fn samples(&self) -> usize {
        self.x0.ncols()
    }

    pub fn n(&self) -> usize {
        self.x0.nrows()
    }

    pub fn m(&self) -> usize {
        self.u0.nrows()
    }

    /// `W0(x) = [W(x) U0; Z0]`, a `(q + N) x T` matrix polynomial.
    pub fn w0_poly(&self, spec: &BasisSpec) -> MatrixPolynomial {
        let top = spec.w.rmul_const(&self.u0).expect("W is q x m");
        let bottom = MatrixPolynomial::from_constant(&self.z0, spec.n);
        stack(&top, &bottom)
    }
}

/// Vertical concatenation of two matrix polynomials with equal column counts.
pub fn stack(top: &MatrixPolynomial, bottom: &MatrixPolynomial) -> MatrixPolynomial {
    assert_eq!(top.cols(), bottom.cols());
    let mut entries = top.entries().to_vec();
    entries.extend_from_slice(bottom.entries());
    MatrixPolynomial::from_entries(top.rows() + bottom.rows(), top.cols(), top.nvars(), entries)
        .expect("consistent shapes")
}

/// Runs one experiment with RK4 at a hundredth of the sampling period and
/// records `(u_k, x_k, x'_k + d_k)` at `t0 + k tau`.
pub fn simulate_experiment(gt: &GroundTruth, spec: &BasisSpec, cfg: &ExperimentConfig) -> Result<DataSet> {
    let n = gt.n();
    let m = gt.m();
    if cfg.samples < 1 {
        return Err(Error::Config("experiment needs at least one sample".into()));
    }
    if cfg.tau <= 0.0 || !cfg.tau.is_finite() {
        return Err(Error::Config(format!(
            "sampling period must be positive, got {}",
            cfg.tau
        )));
    }
    if cfg.x0.len() != n {
        return Err(Error::Shape(format!(
            "x0 has length {}, system has n = {n}",
            cfg.x0.len()
        )));
    }
    let t_count = cfg.samples;
    let mut u0 = DMatrix::zeros(m, t_count);
    let mut x0 = DMatrix::zeros(n, t_count);
    let mut x1_clean = DMatrix::zeros(n, t_count);
    let mut times = Vec::with_capacity(t_count);

    let rhs = |t: f64, x: &DVector<f64>| gt.rhs(x.as_slice(), &cfg.input.at(t, m));
    let substeps = 100;
    let h = cfg.tau / substeps as f64;
    let mut x = DVector::from_column_slice(&cfg.x0);
    for k in 0..t_count {
        let tk = cfg.t0 + k as f64 * cfg.tau;
        let uk = cfg.input.at(tk, m);
        times.push(tk);
        u0.set_column(k, &DVector::from_column_slice(&uk));
        x0.set_column(k, &x);
        x1_clean.set_column(k, &gt.rhs(x.as_slice(), &uk));
        if k + 1 < t_count {
            for s in 0..substeps {
                let t = tk + s as f64 * h;
                x = rk4_step(&rhs, t, &x, h);
                let norm = x.norm();
                if !norm.is_finite() || norm > DIVERGENCE_NORM {
                    return Err(Error::Divergence { time: t + h, norm });
                }
            }
        }
    }

    let d0 = match &cfg.noise {
        NoiseModel::None => DMatrix::zeros(n, t_count),
        NoiseModel::Proportional { gamma } => &x1_clean * *gamma,
        NoiseModel::Uniform { delta, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            DMatrix::from_fn(n, t_count, |_, _| rng.random_range(-*delta..=*delta))
        }
    };
    let x1 = &x1_clean + &d0;
    let mut ds = DataSet::from_samples(spec, cfg.t0, cfg.tau, times, u0, x0, x1)?;
    ds.d0 = Some(d0);
    Ok(ds)
}

/// How the noise bound factor `RD` is chosen.
#[derive(Clone, Debug, PartialEq)]
pub enum NoiseBound {
    /// `RD = gamma X1`.
    Snr(f64),
    /// `RD = delta sqrt(n T) I_n`, which dominates any noise with entries in `[-delta, delta]`.
    Box(f64),
    /// Explicit factor.
    Absolute(DMatrix<f64>),
}

impl NoiseBound {
    /// `snr:<gamma>`, `box:<delta>` or `abs:<r>` (meaning `RD = r I_n`).
    pub fn parse(s: &str, n: usize) -> Result<Self> {
        let (kind, val) = s
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("noise bound '{s}' needs a parameter")))?;
        let v: f64 = val
            .parse()
            .map_err(|_| Error::Config(format!("bad noise bound parameter '{val}'")))?;
        match kind {
            "snr" => Ok(NoiseBound::Snr(v)),
            "box" => Ok(NoiseBound::Box(v)),
            "abs" => Ok(NoiseBound::Absolute(DMatrix::identity(n, n) * v)),
            _ => Err(Error::Config(format!("unknown noise bound '{kind}'"))),
        }
    }
}

/// Stores the noise bound factor. Whether the bound actually holds is a modelling
/// assumption and is not checked here.
pub fn make_noise_bound(ds: &mut DataSet, bound: &NoiseBound) -> Result<()> {
    ds.rd = match bound {
        NoiseBound::Snr(g) => {
            if *g <= 0.0 {
                return Err(Error::Config(format!("gamma must be positive, got {g}")));
            }
            &ds.x1 * *g
        }
        NoiseBound::Box(d) => {
            if *d < 0.0 {
                return Err(Error::Config(format!("delta must be non-negative, got {d}")));
            }
            DMatrix::identity(ds.n(), ds.n()) * (d * ((ds.n() * ds.samples()) as f64).sqrt())
        }
        NoiseBound::Absolute(r) => {
            if r.nrows() != ds.n() {
                return Err(Error::Shape(format!("RD has {} rows, expected {}", r.nrows(), ds.n())));
            }
            r.clone()
        }
    };
    Ok(())
}

/// `lambda_max(D0 D0^T - RD RD^T)`, available for simulated data.
pub fn noise_bound_violation(ds: &DataSet) -> Option<f64> {
    let d0 = ds.d0.as_ref()?;
    Some(linalg::lambda_max(&(d0 * d0.transpose() - &ds.rd * ds.rd.transpose())))
}

#[derive(Clone, Debug, Serialize)]
pub struct RichnessDiagnostics {
    pub samples: usize,
    pub big_n: usize,
    pub rank_z0: usize,
    pub rank_h: usize,
    pub rank_wbar0: usize,
    pub wbar0_rows: usize,
    /// `rank(Z0) < rank(H)`: the equality constraint cannot be met.
    pub rank_warning: bool,
    /// `Wbar0` lacks full row rank, so the least-squares estimate is not unique.
    pub wbar0_warning: bool,
}

impl RichnessDiagnostics {
    pub fn messages(&self) -> Vec<String> {
        let mut out = vec![format!(
            "T = {}, N = {}, rank(Z0) = {}, rank(H) = {}, rank(Wbar0) = {}/{}",
            self.samples, self.big_n, self.rank_z0, self.rank_h, self.rank_wbar0, self.wbar0_rows
        )];
        if self.rank_warning {
            out.push(format!(
                "warning: rank(Z0) = {} < rank(H) = {}; collect more or richer samples",
                self.rank_z0, self.rank_h
            ));
        }
        if self.wbar0_warning {
            out.push("warning: Wbar0 is not full row rank; the least-squares estimate is not unique".into());
        }
        out
    }
}

/// Numerical ranks of `Z0`, `H(x)` at a random point and `Wbar0`.
pub fn validate_richness(ds: &DataSet, spec: &BasisSpec, seed: u64) -> RichnessDiagnostics {
    let tol = 1e-8;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xr: Vec<f64> = (0..spec.n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let rank_z0 = linalg::rank(&ds.z0, tol);
    let rank_h = linalg::rank(&spec.h.eval(&xr), tol);
    let rank_wbar0 = linalg::rank(&ds.wbar0, tol);
    RichnessDiagnostics {
        samples: ds.samples(),
        big_n: spec.big_n(),
        rank_z0,
        rank_h,
        rank_wbar0,
        wbar0_rows: ds.wbar0.nrows(),
        rank_warning: rank_z0 < rank_h,
        wbar0_warning: rank_wbar0 < ds.wbar0.nrows(),
    }
}

/// Recovers `A` (`n x N`) and `B` (`n x q`) with `f = A Z` and `g = B W` by coefficient matching.
pub fn reconstruct_ab(gt: &GroundTruth, spec: &BasisSpec) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = gt.n();
    let big_n = spec.big_n();
    let mut a = DMatrix::zeros(n, big_n);
    for i in 0..n {
        let mut rest = gt.f.get(i, 0).clone();
        for j in 0..big_n {
            let (mono, _) = spec.z.get(j, 0).terms().next().expect("Z entries are monomials");
            let c = rest.coeff(mono);
            a[(i, j)] = c;
            rest.add_scaled(&Polynomial::monomial(mono.clone(), c), -1.0);
        }
        if !rest.is_zero() {
            return Err(Error::Config(format!("f_{} has terms outside Z: {rest}", i + 1)));
        }
    }

    // g_il(x) = sum_j B_ij W_jl(x): one least-squares system per row of B.
    let q = spec.q();
    let m = gt.m();
    let mut monos = Vec::new();
    for l in 0..m {
        for j in 0..q {
            for (mono, _) in spec.w.get(j, l).terms() {
                monos.push(mono.clone());
            }
        }
        for i in 0..n {
            for (mono, _) in gt.g.get(i, l).terms() {
                monos.push(mono.clone());
            }
        }
    }
    monos.sort();
    monos.dedup();
    let rows = m * monos.len();
    let mut mat = DMatrix::zeros(rows, q);
    for l in 0..m {
        for (k, mono) in monos.iter().enumerate() {
            for j in 0..q {
                mat[(l * monos.len() + k, j)] = spec.w.get(j, l).coeff(mono);
            }
        }
    }
    let pinv = linalg::pinv(&mat, linalg::PINV_RTOL);
    let mut b = DMatrix::zeros(n, q);
    for i in 0..n {
        let rhs = DVector::from_fn(rows, |r, _| gt.g.get(i, r / monos.len()).coeff(&monos[r % monos.len()]));
        let bi = &pinv * &rhs;
        let resid = (&mat * &bi - &rhs).amax();
        if resid > 1e-9 {
            return Err(Error::Config(format!(
                "g row {} is not in the span of W (residual {resid:e})",
                i + 1
            )));
        }
        b.set_row(i, &bi.transpose());
    }
    Ok((a, b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vdp() -> (GroundTruth, BasisSpec) {
        (vanderpol(), BasisSpec::new(2, 1, 1, 3, 1, None).unwrap())
    }

    #[test]
    fn vanderpol_dataset_shapes() {
        let (gt, spec) = vdp();
        let ds = simulate_experiment(&gt, &spec, &ExperimentConfig::vanderpol()).unwrap();
        assert_eq!(ds.z0.shape(), (9, 12));
        assert_eq!(ds.wbar0.shape(), (10, 12));
        assert_eq!(ds.x0.column(0).as_slice(), &[-0.1, 0.1]);
        let r = validate_richness(&ds, &spec, 0);
        assert_eq!(r.rank_z0, 9);
        assert!(!r.rank_warning);
    }

    #[test]
    fn zero_dynamics_give_zero_derivatives() {
        let gt = integrator();
        let spec = BasisSpec::new(1, 1, 1, 1, 1, None).unwrap();
        let cfg = ExperimentConfig {
            x0: vec![0.3],
            input: InputSignal::Zero,
            t0: 0.0,
            tau: 0.1,
            samples: 5,
            noise: NoiseModel::None,
        };
        let ds = simulate_experiment(&gt, &spec, &cfg).unwrap();
        assert_eq!(ds.x1.amax(), 0.0);
    }

    #[test]
    fn proportional_noise_within_bound() {
        let (gt, spec) = vdp();
        let mut ds = simulate_experiment(&gt, &spec, &ExperimentConfig::vanderpol()).unwrap();
        make_noise_bound(&mut ds, &NoiseBound::Snr(0.1f64.sqrt())).unwrap();
        assert!(noise_bound_violation(&ds).unwrap() <= 1e-9);
        let rr = &ds.rd * ds.rd.transpose();
        let target = &ds.x1 * ds.x1.transpose() * 0.1;
        assert!((rr - target).amax() < 1e-9);
        assert!(make_noise_bound(&mut ds, &NoiseBound::Snr(0.0)).is_err());
    }

    #[test]
    fn divergence_is_reported() {
        let gt = scalar_cubic();
        let spec = BasisSpec::new(1, 1, 1, 3, 1, None).unwrap();
        let cfg = ExperimentConfig {
            x0: vec![5.0],
            input: InputSignal::Zero,
            t0: 0.0,
            tau: 1.0,
            samples: 3,
            noise: NoiseModel::None,
        };
        assert!(matches!(
            simulate_experiment(&gt, &spec, &cfg),
            Err(Error::Divergence { .. })
        ));
    }

    #[test]
    fn reconstructed_model_reproduces_noiseless_data() {
        let (gt, spec) = vdp();
        let mut cfg = ExperimentConfig::vanderpol();
        cfg.noise = NoiseModel::None;
        let ds = simulate_experiment(&gt, &spec, &cfg).unwrap();
        let (a, b) = reconstruct_ab(&gt, &spec).unwrap();
        let resid = &ds.x1 - &a * &ds.z0 - &b * &ds.ubar0;
        assert!(resid.amax() < 1e-9);
        assert_eq!(b, DMatrix::from_column_slice(2, 1, &[0.0, 1.0]));
    }

    #[test]
    fn single_sample_and_repeated_columns_warn() {
        let (gt, spec) = vdp();
        let mut cfg = ExperimentConfig::vanderpol();
        cfg.samples = 1;
        let ds = simulate_experiment(&gt, &spec, &cfg).unwrap();
        let r = validate_richness(&ds, &spec, 0);
        assert_eq!((r.rank_z0, r.rank_h), (1, 2));
        assert!(r.rank_warning);

        let cfg = ExperimentConfig::vanderpol();
        let full = simulate_experiment(&gt, &spec, &cfg).unwrap();
        let col = full.x0.column(3).into_owned();
        let x0 = DMatrix::from_fn(2, 12, |i, _| col[i]);
        let ds = DataSet::from_samples(
            &spec,
            0.0,
            0.5,
            full.times.clone(),
            full.u0.clone(),
            x0,
            full.x1.clone(),
        )
        .unwrap();
        let r = validate_richness(&ds, &spec, 0);
        assert_eq!(r.rank_z0, 1);
        assert!(r.rank_warning);
    }
}

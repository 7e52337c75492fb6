use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::Certificate;
use crate::error::Result;
use crate::experiment::GroundTruth;
use crate::linalg;
use crate::ode::halton_point;
use crate::par::Execution;
use crate::polyalg::MatrixPolynomial;

/// Samples with `Vdot > -VDOT_TOL |Zhat|^2` count as violations.
pub const VDOT_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditReport {
    pub half_width: f64,
    pub samples: usize,
    /// Nonzero samples actually evaluated.
    pub evaluated: usize,
    pub max_vdot: f64,
    /// Largest `Vdot / |Zhat|^2`.
    pub max_vdot_ratio: f64,
    pub negative_fraction: f64,
    pub violations: usize,
    pub worst_point: Option<Vec<f64>>,
    /// Smallest `V / |Zhat|^2`; positive when `V` is positive definite on the samples.
    pub min_v_ratio: f64,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.min_v_ratio > 0.0 && self.evaluated > 0
    }
}

/// Samples `Vdot` on Halton points of `[-half, half]^n`, symbolically differentiated.
pub fn lyapunov_audit(
    cert: &Certificate,
    gt: &GroundTruth,
    half: f64,
    nsamples: usize,
    exec: Execution,
) -> Result<AuditReport> {
    let vdot = cert.vdot(gt)?;
    let v = cert.lyapunov();
    let n = cert.n;
    let zhat = &cert.zhat;
    let per_sample = exec.map(nsamples, |k| {
        let x = halton_point(k as u64 + 1, n, half);
        if x.iter().all(|&xi| xi == 0.0) {
            return None;
        }
        let z2 = zhat.eval(&x).norm_squared();
        Some((x.clone(), vdot.eval(&x), v.eval(&x), z2))
    });

    let mut rep = AuditReport {
        half_width: half,
        samples: nsamples,
        evaluated: 0,
        max_vdot: f64::NEG_INFINITY,
        max_vdot_ratio: f64::NEG_INFINITY,
        negative_fraction: 0.0,
        violations: 0,
        worst_point: None,
        min_v_ratio: f64::INFINITY,
    };
    let mut negative = 0;
    for (x, vd, vv, z2) in per_sample.into_iter().flatten() {
        rep.evaluated += 1;
        let ratio = vd / z2;
        if vd < 0.0 {
            negative += 1;
        }
        if vd.is_nan() || vd > -VDOT_TOL * z2 {
            rep.violations += 1;
        }
        if ratio > rep.max_vdot_ratio || ratio.is_nan() {
            rep.max_vdot_ratio = ratio;
            rep.worst_point = Some(x);
        }
        rep.max_vdot = rep.max_vdot.max(vd);
        rep.min_v_ratio = rep.min_v_ratio.min(vv / z2);
    }
    if rep.evaluated > 0 {
        rep.negative_fraction = negative as f64 / rep.evaluated as f64;
    }
    Ok(rep)
}

/// Smallest eigenvalue of `block(x)` over `nsamples` uniform random points of the box.
pub fn block_audit(block: &MatrixPolynomial, half: f64, nsamples: usize, seed: u64, exec: Execution) -> f64 {
    let n = block.nvars();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<Vec<f64>> = (0..nsamples)
        .map(|_| (0..n).map(|_| rng.random_range(-half..=half)).collect())
        .collect();
    exec.map(nsamples, |k| linalg::lambda_min(&block.eval(&points[k])))
        .into_iter()
        .fold(f64::INFINITY, f64::min)
}

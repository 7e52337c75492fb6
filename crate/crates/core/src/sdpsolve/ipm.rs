//! Homogeneous self-dual interior-point method for
//! `minimize c^T w  s.t.  F0 + sum_k w_k F_k >= 0`,
//! written as `G w + s = h` with `G = -F`, `h = F0` and `s` in the PSD cone.
//! Nesterov-Todd scaling and a Mehrotra predictor-corrector step.

use std::cell::Cell;

use nalgebra::{Cholesky, DMatrix, DVector};

use super::reduce::{Entries, Reduced};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Outcome {
    Optimal,
    /// A strictly feasible point was found (feasibility objective only).
    Feasible,
    Infeasible,
    IterationLimit,
    NumericalFailure,
}

#[derive(Clone, Debug)]
pub(crate) struct IpmResult {
    pub outcome: Outcome,
    pub w: Vec<f64>,
    pub iterations: usize,
    pub pres: f64,
    pub dres: f64,
    pub gap: f64,
    pub trace: Vec<String>,
    pub message: String,
}

type Blocks = Vec<DMatrix<f64>>;

/// Scaling of one block: `r^T z r = diag(lambda) = rinv s rinv^T`.
#[derive(Clone)]
struct Scaling {
    r: DMatrix<f64>,
    rinv: DMatrix<f64>,
    lambda: DVector<f64>,
}

fn inner(a: &Blocks, b: &Blocks) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn norm(a: &Blocks) -> f64 {
    inner(a, a).sqrt()
}

fn axpy(a: &Blocks, s: f64, b: &Blocks) -> Blocks {
    a.iter().zip(b).map(|(x, y)| x + y * s).collect()
}

fn sym(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

fn jordan(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    sym(a * b)
}

/// NT scaling of a pair of positive definite matrices.
fn nt_scaling(s: &DMatrix<f64>, z: &DMatrix<f64>) -> Option<Scaling> {
    let ls = Cholesky::new(sym(s.clone()))?.l();
    let lz = Cholesky::new(sym(z.clone()))?.l();
    let svd = (lz.transpose() * &ls).svd(true, true);
    let u = svd.u?;
    let vt = svd.v_t?;
    let lambda = svd.singular_values;
    if lambda.iter().any(|&l| !l.is_finite() || l <= 0.0) {
        return None;
    }
    let isq = DMatrix::from_diagonal(&lambda.map(|l| 1.0 / l.sqrt()));
    let r = ls * vt.transpose() * &isq;
    let rinv = &isq * u.transpose() * lz.transpose();
    Some(Scaling { r, rinv, lambda })
}

/// Largest `alpha` with `diag(lambda) + alpha d >= 0` (infinite if unbounded).
fn max_step(lambda: &DVector<f64>, d: &DMatrix<f64>) -> f64 {
    let isq = lambda.map(|l| 1.0 / l.sqrt());
    let n = lambda.len();
    let mut m = d.clone();
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] *= isq[i] * isq[j];
        }
    }
    let t = crate::linalg::lambda_min(&sym(m));
    if t < 0.0 {
        -1.0 / t
    } else {
        f64::INFINITY
    }
}

struct Problem<'a> {
    red: &'a Reduced,
    h: Blocks,
    c: DVector<f64>,
    dense: Vec<bool>,
}

impl Problem<'_> {
    fn n(&self) -> usize {
        self.red.cols.len()
    }

    fn zeros(&self) -> Blocks {
        self.red.sizes.iter().map(|&s| DMatrix::zeros(s, s)).collect()
    }

    /// `G x = -sum_k x_k F_k`.
    fn g(&self, x: &DVector<f64>) -> Blocks {
        let mut out = self.zeros();
        for (col, &xk) in self.red.cols.iter().zip(x.iter()) {
            if xk != 0.0 {
                for &(b, i, j, v) in col {
                    out[b][(i, j)] -= xk * v;
                }
            }
        }
        out
    }

    /// `(G^T Z)_k = -<F_k, Z>`.
    fn gt(&self, z: &Blocks) -> DVector<f64> {
        DVector::from_iterator(self.n(), self.red.cols.iter().map(|col| -dot_entries(col, z)))
    }
}

fn dot_entries(col: &Entries, z: &Blocks) -> f64 {
    col.iter().map(|&(b, i, j, v)| v * z[b][(i, j)]).sum()
}

/// `H_kl = <F_k, S F_l S>` with the block scaling `S`.
fn hessian(p: &Problem, sm: &Blocks) -> DMatrix<f64> {
    let n = p.n();
    let cols = &p.red.cols;
    let mut h = DMatrix::zeros(n, n);
    for l in 0..n {
        if p.dense[l] {
            let mut d = p.zeros();
            let mut touched = vec![false; d.len()];
            for &(b, a, bb, v) in &cols[l] {
                touched[b] = true;
                let s = &sm[b];
                // v * S[:, a] S[bb, :]
                d[b].ger(v, &s.column(a), &s.column(bb), 1.0);
            }
            for k in 0..n {
                let val: f64 = cols[k]
                    .iter()
                    .filter(|e| touched[e.0])
                    .map(|&(b, i, j, v)| v * d[b][(i, j)])
                    .sum();
                h[(k, l)] = val;
                h[(l, k)] = val;
            }
        }
    }
    for l in 0..n {
        if p.dense[l] {
            continue;
        }
        for k in 0..=l {
            if p.dense[k] {
                continue;
            }
            let mut val = 0.0;
            for &(b1, a, bb, va) in &cols[k] {
                let s = &sm[b1];
                for &(b2, c, d, vb) in &cols[l] {
                    if b1 == b2 {
                        val += va * vb * s[(bb, c)] * s[(d, a)];
                    }
                }
            }
            h[(k, l)] = val;
            h[(l, k)] = val;
        }
    }
    h
}

/// Cholesky factor of the normal matrix with iterative refinement against the
/// unregularized matrix, which keeps steps accurate near the cone boundary.
struct NormalSolver<'a> {
    h: &'a DMatrix<f64>,
    ch: Cholesky<f64, nalgebra::Dyn>,
}

impl NormalSolver<'_> {
    fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let mut x = self.ch.solve(rhs);
        for _ in 0..2 {
            let r = rhs - self.h * &x;
            x += self.ch.solve(&r);
        }
        x
    }
}

fn factor(h: &DMatrix<f64>) -> Option<Cholesky<f64, nalgebra::Dyn>> {
    if let Some(c) = Cholesky::new(h.clone()) {
        return Some(c);
    }
    let scale = h.diagonal().amax().max(1e-300);
    let mut reg = 1e-14 * scale;
    for _ in 0..6 {
        let mut m = h.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += reg;
        }
        if let Some(c) = Cholesky::new(m) {
            return Some(c);
        }
        reg *= 100.0;
    }
    None
}

/// Tolerance multiplier for feasibility verdicts on problems without a strict interior.
pub const BOUNDARY_SLACK: f64 = 10.0;
/// Dual-ray residual accepted as an infeasibility verdict once the iteration can make no further progress.
pub const INACCURATE_RAY_TOL: f64 = 1e-6;
/// Below this `tau / kappa` the normalized iterate carries no information.
const COLLAPSE_RATIO: f64 = 1e-14;

pub(crate) struct IpmOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Stop at the first strictly feasible iterate (objective is constant).
    pub feasibility: bool,
}

/// `accept(w, strict)` vets a candidate. A strict candidate has every block positive
/// definite and passes at `tol`; otherwise it only has to pass at `BOUNDARY_SLACK * tol`.
pub(crate) fn run(red: &Reduced, opts: &IpmOptions, accept: impl Fn(&[f64], bool) -> bool) -> IpmResult {
    let h: Blocks = red.f0.clone();
    let c = red.c.clone();
    let dense = red.cols.iter().map(|col| col.len() > 24).collect();
    let p = Problem { red, h, c, dense };
    let n = p.n();
    let nu: usize = red.sizes.iter().sum();
    let hnorm = norm(&p.h).max(1.0);
    let cnorm = p.c.norm().max(1.0);
    let mut trace = Vec::new();

    // Smallest dual-ray residual seen, for a reduced-accuracy verdict when the
    // iteration stalls at the rounding floor before reaching `opts.tol`.
    let best_ray = Cell::new(f64::INFINITY);
    let stalled = |outcome: Outcome, msg: String, it: usize, trace: Vec<String>, w: Vec<f64>, last: (f64, f64, f64)| {
        let ray = best_ray.get();
        let (outcome, message) = if ray <= INACCURATE_RAY_TOL {
            (
                Outcome::Infeasible,
                format!("dual improving ray with residual {ray:.2e} (reduced accuracy; {msg})"),
            )
        } else {
            (outcome, msg)
        };
        IpmResult {
            outcome,
            w,
            iterations: it,
            pres: last.0,
            dres: last.1,
            gap: last.2,
            trace,
            message,
        }
    };
    let nan3 = (f64::NAN, f64::NAN, f64::NAN);
    let fail = |msg: String, it: usize, trace: Vec<String>| {
        stalled(Outcome::NumericalFailure, msg, it, trace, vec![0.0; n], nan3)
    };

    // Initial point: least-squares x with s = h - G x, minimum-norm z with G^T z = -c,
    // both shifted into the interior.
    let ident: Blocks = red.sizes.iter().map(|&s| DMatrix::identity(s, s)).collect();
    let h0 = hessian(&p, &ident);
    let Some(ch0) = factor(&h0) else {
        return fail("singular normal matrix at the initial point".into(), 0, trace);
    };
    let x_init = ch0.solve(&p.gt(&p.h));
    let mut s = axpy(&p.h, -1.0, &p.g(&x_init));
    let zc = ch0.solve(&(-&p.c));
    let mut z: Blocks = p.g(&zc);
    let shift = |m: &mut Blocks| {
        let lmin = m.iter().map(crate::linalg::lambda_min).fold(f64::INFINITY, f64::min);
        let t = if lmin.is_finite() { -lmin } else { 0.0 };
        let add = if t >= -1e-8 { 1.0 + t } else { 0.0 };
        for b in m.iter_mut() {
            for i in 0..b.nrows() {
                b[(i, i)] += add;
            }
        }
    };
    shift(&mut s);
    shift(&mut z);
    let mut x = x_init;
    let mut tau = 1.0;
    let mut kappa = 1.0;

    let mut scal: Vec<Scaling> = Vec::with_capacity(s.len());
    for (sb, zb) in s.iter().zip(&z) {
        match nt_scaling(sb, zb) {
            Some(sc) => scal.push(sc),
            None => return fail("initial point is not interior".into(), 0, trace),
        }
    }

    let mut last = (f64::NAN, f64::NAN, f64::NAN);
    for it in 0..=opts.max_iter {
        // Residuals.
        let gx = p.g(&x);
        let r1 = p.gt(&z) + &p.c * tau;
        let r2: Blocks = gx.iter().zip(&s).zip(&p.h).map(|((g, s), h)| g + s - h * tau).collect();
        let cx = p.c.dot(&x);
        let hz = inner(&p.h, &z);
        let r3 = cx + hz + kappa;
        let sz = inner(&s, &z);
        let mu = (sz + tau * kappa) / (nu as f64 + 1.0);

        let pres = norm(&r2) / tau / hnorm;
        let dres = r1.norm() / tau / cnorm;
        let pcost = cx / tau;
        let gap = (sz / (tau * tau)) / pcost.abs().max(1.0);
        last = (pres, dres, gap);
        trace.push(format!(
            "it {it:3}  pres {pres:.2e}  dres {dres:.2e}  gap {gap:.2e}  mu {mu:.2e}  tau {tau:.2e}  kappa {kappa:.2e}"
        ));
        log::trace!("{}", trace.last().unwrap());
        if !(pres.is_finite() && dres.is_finite() && mu.is_finite()) {
            return fail("non-finite iterate".into(), it, trace);
        }

        let w: Vec<f64> = (&x / tau).iter().copied().collect();
        let converged = pres <= opts.tol && dres <= opts.tol && gap <= opts.tol;
        // Without an interior the strict test never fires and the scaling limits
        // accuracy near the boundary; a primal point within the slack is then enough.
        if opts.feasibility
            && tau > 0.0
            && (accept(&w, true) || (pres <= BOUNDARY_SLACK * opts.tol && accept(&w, false)))
        {
            return IpmResult {
                outcome: Outcome::Feasible,
                w,
                iterations: it,
                pres,
                dres: 0.0,
                gap: 0.0,
                trace,
                message: String::new(),
            };
        }
        if !opts.feasibility && converged && accept(&w, false) {
            return IpmResult {
                outcome: Outcome::Optimal,
                w,
                iterations: it,
                pres,
                dres,
                gap,
                trace,
                message: String::new(),
            };
        }
        if hz < 0.0 {
            let pinf = p.gt(&z).norm() / cnorm / (-hz);
            best_ray.set(best_ray.get().min(pinf));
            if pinf <= opts.tol {
                return IpmResult {
                    outcome: Outcome::Infeasible,
                    w: vec![0.0; n],
                    iterations: it,
                    pres,
                    dres,
                    gap,
                    trace,
                    message: format!("dual improving ray with residual {pinf:.2e}"),
                };
            }
        }
        if cx < 0.0 {
            let dinf = norm(&axpy(&gx, 1.0, &s)) / hnorm / (-cx);
            if dinf <= opts.tol {
                return IpmResult {
                    outcome: Outcome::NumericalFailure,
                    w: vec![0.0; n],
                    iterations: it,
                    pres,
                    dres,
                    gap,
                    trace,
                    message: "objective unbounded below".into(),
                };
            }
        }
        if tau < COLLAPSE_RATIO * kappa {
            let tail = trace.split_off(trace.len().saturating_sub(5));
            return stalled(
                Outcome::NumericalFailure,
                format!(
                    "homogeneous embedding collapsed (tau/kappa {:.1e}) at iteration {it}",
                    tau / kappa
                ),
                it,
                tail,
                vec![0.0; n],
                last,
            );
        }
        if it == opts.max_iter {
            break;
        }

        // Newton system.
        let sm: Blocks = scal.iter().map(|sc| sc.rinv.transpose() * &sc.rinv).collect();
        let hm = hessian(&p, &sm);
        let Some(ch) = factor(&hm) else {
            let tail = trace.split_off(trace.len().saturating_sub(5));
            return fail(
                format!("normal matrix not positive definite at iteration {it}"),
                it,
                tail,
            );
        };
        let ch = NormalSolver { h: &hm, ch };
        let ssm = |m: &Blocks| -> Blocks { m.iter().zip(&sm).map(|(x, s)| s * x * s).collect() };
        let bx = ch.solve(&(-&p.c + p.gt(&ssm(&p.h))));
        let bz = ssm(&axpy(&p.g(&bx), -1.0, &p.h));
        let denom = kappa / tau - p.c.dot(&bx) - inner(&p.h, &bz);

        let lam: Blocks = scal.iter().map(|sc| DMatrix::from_diagonal(&sc.lambda)).collect();
        #[allow(clippy::type_complexity)]
        let solve_dir = |eta: f64, ds: &Blocks, dk: f64| -> Option<(DVector<f64>, Blocks, Blocks, f64, f64, Blocks)> {
            // q = lambda \ ds, then r q r^T.
            let rq: Blocks = scal
                .iter()
                .zip(ds)
                .map(|(sc, d)| {
                    let l = &sc.lambda;
                    let q = DMatrix::from_fn(l.len(), l.len(), |i, j| 2.0 * d[(i, j)] / (l[i] + l[j]));
                    &sc.r * q * sc.r.transpose()
                })
                .collect();
            let inner_rhs: Blocks = r2.iter().zip(&rq).map(|(a, b)| a * eta + b).collect();
            let ax = ch.solve(&(-&r1 * eta - p.gt(&ssm(&inner_rhs))));
            let az = ssm(&axpy(&p.g(&ax), 1.0, &inner_rhs));
            let dtau = (eta * r3 + p.c.dot(&ax) + inner(&p.h, &az) + dk / tau) / denom;
            let dx = &ax + &bx * dtau;
            let dz = axpy(&az, dtau, &bz);
            let dkappa = (dk - kappa * dtau) / tau;
            if !dtau.is_finite() {
                return None;
            }
            // Scaled directions; ds_scaled = q - dz_scaled.
            let dzs: Blocks = scal
                .iter()
                .zip(&dz)
                .map(|(sc, d)| sym(sc.r.transpose() * d * &sc.r))
                .collect();
            let dss: Blocks = scal
                .iter()
                .zip(ds)
                .zip(&dzs)
                .map(|((sc, d), dzb)| {
                    let l = &sc.lambda;
                    DMatrix::from_fn(l.len(), l.len(), |i, j| 2.0 * d[(i, j)] / (l[i] + l[j]) - dzb[(i, j)])
                })
                .collect();
            Some((dx, dzs, dss, dtau, dkappa, dz))
        };
        let step_len = |dzs: &Blocks, dss: &Blocks, dtau: f64, dkappa: f64| -> f64 {
            let mut a = f64::INFINITY;
            for ((sc, dz), ds) in scal.iter().zip(dzs).zip(dss) {
                a = a.min(max_step(&sc.lambda, dz)).min(max_step(&sc.lambda, ds));
            }
            if dtau < 0.0 {
                a = a.min(-tau / dtau);
            }
            if dkappa < 0.0 {
                a = a.min(-kappa / dkappa);
            }
            a
        };

        // Predictor.
        let ds_aff: Blocks = lam.iter().map(|l| -(l * l)).collect();
        let Some((_, dzs_a, dss_a, dtau_a, dkappa_a, _)) = solve_dir(1.0, &ds_aff, -tau * kappa) else {
            let tail = trace.split_off(trace.len().saturating_sub(5));
            return fail(format!("degenerate homogeneous step at iteration {it}"), it, tail);
        };
        let alpha_a = step_len(&dzs_a, &dss_a, dtau_a, dkappa_a).min(1.0);
        let sigma = (1.0 - alpha_a).powi(3);

        // Corrector.
        let ds: Blocks = lam
            .iter()
            .zip(&dss_a)
            .zip(&dzs_a)
            .map(|((l, a), b)| {
                let mut m = -(l * l) - jordan(a, b);
                for i in 0..m.nrows() {
                    m[(i, i)] += sigma * mu;
                }
                m
            })
            .collect();
        let dk = -tau * kappa - dtau_a * dkappa_a + sigma * mu;
        let Some((dx, dzs, dss, dtau, dkappa, dz)) = solve_dir(1.0 - sigma, &ds, dk) else {
            let tail = trace.split_off(trace.len().saturating_sub(5));
            return fail(format!("degenerate homogeneous step at iteration {it}"), it, tail);
        };
        let alpha = (0.99 * step_len(&dzs, &dss, dtau, dkappa)).min(1.0);

        // Unscaled primal step from the linearized residual equation itself.
        let gdx = p.g(&dx);
        let ds_lin: Blocks = r2
            .iter()
            .zip(&gdx)
            .zip(&p.h)
            .map(|((r, g), h)| -(r * (1.0 - sigma)) - g + h * dtau)
            .collect();
        x += &dx * alpha;
        tau += alpha * dtau;
        kappa += alpha * dkappa;
        for (k, sc) in scal.iter_mut().enumerate() {
            // Direct updates keep the linear residuals consistent; the composed
            // scaling is the fallback when rounding pushes a block off the cone.
            let s_new = sym(&s[k] + &ds_lin[k] * alpha);
            let z_new = sym(&z[k] + &dz[k] * alpha);
            if let Some(fresh) = nt_scaling(&s_new, &z_new) {
                *sc = fresh;
                s[k] = s_new;
                z[k] = z_new;
                continue;
            }
            let mut sn = &dss[k] * alpha;
            let mut zn = &dzs[k] * alpha;
            for i in 0..sc.lambda.len() {
                sn[(i, i)] += sc.lambda[i];
                zn[(i, i)] += sc.lambda[i];
            }
            let Some(step) = nt_scaling(&sn, &zn) else {
                let tail = trace.split_off(trace.len().saturating_sub(5));
                return fail(format!("lost positive definiteness at iteration {it}"), it, tail);
            };
            sc.r = &sc.r * &step.r;
            sc.rinv = &step.rinv * &sc.rinv;
            sc.lambda = step.lambda;
            let l = DMatrix::from_diagonal(&sc.lambda);
            s[k] = sym(&sc.r * &l * sc.r.transpose());
            z[k] = sym(sc.rinv.transpose() * &l * &sc.rinv);
        }
        if !(tau > 0.0 && kappa > 0.0) {
            let tail = trace.split_off(trace.len().saturating_sub(5));
            return fail(
                format!("homogeneous variables left the cone at iteration {it}"),
                it,
                tail,
            );
        }
    }
    let tail = trace.split_off(trace.len().saturating_sub(5));
    stalled(
        Outcome::IterationLimit,
        format!("no verdict after {} iterations", opts.max_iter),
        opts.max_iter,
        tail,
        (&x / tau).iter().copied().collect(),
        last,
    )
}

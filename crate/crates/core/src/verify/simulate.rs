use std::path::Path;

use nalgebra::DVector;
use serde::Serialize;

use super::Certificate;
use crate::error::{Error, Result};
use crate::experiment::{GroundTruth, DIVERGENCE_NORM};
use crate::ode::rk4_step;

/// Local error target of the step-doubling RK4 integrator.
pub const INTEGRATOR_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub v: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
}

impl Trajectory {
    pub fn final_norm(&self) -> f64 {
        self.points
            .last()
            .map_or(0.0, |p| p.x.iter().map(|v| v * v).sum::<f64>().sqrt())
    }

    /// Whether `V` never grows by more than `tol` between consecutive samples.
    pub fn v_nonincreasing(&self, tol: f64) -> bool {
        self.points.windows(2).all(|w| w[1].v <= w[0].v + tol)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        if let Some(first) = self.points.first() {
            let mut header = vec!["t".to_string()];
            header.extend((1..=first.x.len()).map(|i| format!("x{i}")));
            header.extend((1..=first.u.len()).map(|i| format!("u{i}")));
            header.push("V".into());
            w.write_record(&header)?;
        }
        for p in &self.points {
            let mut rec = vec![p.t.to_string()];
            rec.extend(p.x.iter().map(f64::to_string));
            rec.extend(p.u.iter().map(f64::to_string));
            rec.push(p.v.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Integrates `x' = f(x) + g(x) F(x) Zhat(x)` from `x0` and records `(t, x, u, V)`
/// every `dt`. Steps are subdivided until two half steps agree with one full step.
pub fn simulate_closed_loop(
    cert: &Certificate,
    gt: &GroundTruth,
    x0: &[f64],
    t_end: f64,
    dt: f64,
) -> Result<Trajectory> {
    if !(dt > 0.0 && t_end >= 0.0) {
        return Err(Error::Config(format!(
            "need dt > 0 and t_end >= 0, got dt = {dt}, t_end = {t_end}"
        )));
    }
    if x0.len() != cert.n {
        return Err(Error::Shape(format!("x0 has length {}, expected {}", x0.len(), cert.n)));
    }
    let fc = cert.closed_loop(gt)?;
    let u = cert.controller();
    let v = cert.lyapunov();
    let rhs = |_t: f64, x: &DVector<f64>| DVector::from_column_slice(fc.eval(x.as_slice()).as_slice());
    let record = |t: f64, x: &DVector<f64>| TrajectoryPoint {
        t,
        x: x.iter().copied().collect(),
        u: u.eval(x.as_slice()).iter().copied().collect(),
        v: v.eval(x.as_slice()),
    };

    let steps = (t_end / dt).round() as usize;
    let mut x = DVector::from_column_slice(x0);
    let mut points = vec![record(0.0, &x)];
    let mut h = dt;
    for k in 0..steps {
        let t_start = k as f64 * dt;
        let t_stop = (k + 1) as f64 * dt;
        let mut t = t_start;
        while t < t_stop - 1e-15 * t_stop.max(1.0) {
            let step = h.min(t_stop - t);
            let full = rk4_step(&rhs, t, &x, step);
            let half = rk4_step(&rhs, t, &x, step / 2.0);
            let two = rk4_step(&rhs, t + step / 2.0, &half, step / 2.0);
            let err = (&two - &full).amax();
            if (err.is_nan() || err > INTEGRATOR_TOL * (1.0 + two.amax())) && step > 1e-14 {
                h = step / 2.0;
                continue;
            }
            x = two;
            t += step;
            let norm = x.norm();
            if !norm.is_finite() || norm > DIVERGENCE_NORM {
                return Err(Error::Divergence { time: t, norm });
            }
            if err < INTEGRATOR_TOL * (1.0 + x.amax()) / 64.0 {
                h = (2.0 * step).min(dt);
            }
        }
        points.push(record(t_stop, &x));
    }
    Ok(Trajectory { points })
}

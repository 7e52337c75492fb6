use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::DataSet;
use crate::basis::BasisSpec;
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
struct Sidecar {
    tau: f64,
    t0: f64,
    rd: DMatrix<f64>,
    rb: Option<DMatrix<f64>>,
    d0: Option<DMatrix<f64>>,
}

/// `data.csv` → `data.bounds.json`.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("bounds.json")
}

/// Writes `t,u1..um,x1..xn,dx1..dxn` rows plus the JSON bound sidecar. Returns the sidecar path.
pub fn export_csv(ds: &DataSet, path: &Path) -> Result<PathBuf> {
    let (n, m) = (ds.n(), ds.m());
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["t".to_string()];
    header.extend((1..=m).map(|i| format!("u{i}")));
    header.extend((1..=n).map(|i| format!("x{i}")));
    header.extend((1..=n).map(|i| format!("dx{i}")));
    w.write_record(&header)?;
    for k in 0..ds.samples() {
        let mut row = vec![ds.times[k].to_string()];
        row.extend(ds.u0.column(k).iter().map(f64::to_string));
        row.extend(ds.x0.column(k).iter().map(f64::to_string));
        row.extend(ds.x1.column(k).iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    let side = sidecar_path(path);
    let sc = Sidecar {
        tau: ds.tau,
        t0: ds.t0,
        rd: ds.rd.clone(),
        rb: ds.rb.clone(),
        d0: ds.d0.clone(),
    };
    std::fs::write(&side, serde_json::to_string_pretty(&sc)?)?;
    Ok(side)
}

fn column_index(header: &csv::StringRecord, name: &str) -> Option<usize> {
    header.iter().position(|h| h.trim() == name)
}

/// Reads a data file. Without `dx` columns the derivatives are estimated by
/// central differences (one-sided at the ends). A `.bounds.json` sidecar, if
/// present, supplies the noise bound factors.
pub fn ingest(path: &Path, spec: &BasisSpec) -> Result<DataSet> {
    let (n, m) = (spec.n, spec.m);
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    let need =
        |name: String| column_index(&header, &name).ok_or_else(|| Error::Format(format!("missing column '{name}'")));
    let t_col = need("t".into())?;
    let u_cols: Vec<usize> = (1..=m).map(|i| need(format!("u{i}"))).collect::<Result<_>>()?;
    let x_cols: Vec<usize> = (1..=n).map(|i| need(format!("x{i}"))).collect::<Result<_>>()?;
    let dx_found: Vec<Option<usize>> = (1..=n).map(|i| column_index(&header, &format!("dx{i}"))).collect();
    let dx_cols: Option<Vec<usize>> = if dx_found.iter().all(Option::is_some) {
        Some(dx_found.into_iter().flatten().collect())
    } else if dx_found.iter().all(Option::is_none) {
        None
    } else {
        return Err(Error::Format(
            "derivative columns must be all present or all absent".into(),
        ));
    };

    let mut times = Vec::new();
    let mut us: Vec<f64> = Vec::new();
    let mut xs: Vec<f64> = Vec::new();
    let mut dxs: Vec<f64> = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let get = |c: usize| -> Result<f64> {
            rec.get(c)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| Error::Format(format!("row {}: bad value in column {}", line + 2, c + 1)))
        };
        times.push(get(t_col)?);
        for &c in &u_cols {
            us.push(get(c)?);
        }
        for &c in &x_cols {
            xs.push(get(c)?);
        }
        if let Some(cols) = &dx_cols {
            for &c in cols {
                dxs.push(get(c)?);
            }
        }
    }
    let t = times.len();
    if t == 0 {
        return Err(Error::Format("data file has no samples".into()));
    }

    let side = sidecar_path(path);
    let sidecar: Option<Sidecar> = if side.exists() {
        Some(serde_json::from_str(&std::fs::read_to_string(&side)?)?)
    } else {
        None
    };
    let tau = match (&sidecar, t) {
        (Some(s), _) => s.tau,
        (None, 1) => return Err(Error::Format("cannot infer the sampling period from one sample".into())),
        (None, _) => times[1] - times[0],
    };
    if tau <= 0.0 {
        return Err(Error::Format(format!("sampling period must be positive, got {tau}")));
    }
    for k in 1..t {
        let dt = times[k] - times[k - 1];
        if ((dt - tau) / tau).abs() > 1e-6 {
            return Err(Error::Format(format!(
                "non-uniform sampling at row {}: dt = {dt}, tau = {tau}",
                k + 2
            )));
        }
    }

    let u0 = DMatrix::from_column_slice(m, t, &us);
    let x0 = DMatrix::from_column_slice(n, t, &xs);
    let x1 = if dx_cols.is_some() {
        DMatrix::from_column_slice(n, t, &dxs)
    } else {
        central_differences(&x0, tau)?
    };
    let t0 = sidecar.as_ref().map(|s| s.t0).unwrap_or(times[0]);
    let mut ds = DataSet::from_samples(spec, t0, tau, times, u0, x0, x1)?;
    if let Some(s) = sidecar {
        ds.rd = s.rd;
        ds.rb = s.rb;
        ds.d0 = s.d0;
    }
    Ok(ds)
}

/// Second-order differences in the interior, first-order at the two ends.
pub fn central_differences(x: &DMatrix<f64>, tau: f64) -> Result<DMatrix<f64>> {
    let t = x.ncols();
    if t < 2 {
        return Err(Error::Format("finite differences need at least two samples".into()));
    }
    let mut d = DMatrix::zeros(x.nrows(), t);
    for k in 0..t {
        let col = if k == 0 {
            (x.column(1) - x.column(0)) / tau
        } else if k == t - 1 {
            (x.column(t - 1) - x.column(t - 2)) / tau
        } else {
            (x.column(k + 1) - x.column(k - 1)) / (2.0 * tau)
        };
        d.set_column(k, &col);
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::{make_noise_bound, simulate_experiment, vanderpol, ExperimentConfig, NoiseBound};

    #[test]
    fn roundtrip_is_exact() {
        let spec = BasisSpec::new(2, 1, 1, 3, 1, None).unwrap();
        let mut ds = simulate_experiment(&vanderpol(), &spec, &ExperimentConfig::vanderpol()).unwrap();
        make_noise_bound(&mut ds, &NoiseBound::Snr(0.3)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vdp.csv");
        export_csv(&ds, &path).unwrap();
        let back = ingest(&path, &spec).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn constant_trajectory_has_zero_derivative() {
        let spec = BasisSpec::new(1, 1, 1, 1, 1, None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        std::fs::write(&path, "t,u1,x1\n0,0,2\n0.1,0,2\n0.2,0,2\n").unwrap();
        let ds = ingest(&path, &spec).unwrap();
        assert!(ds.x1.amax() < 1e-12);
        assert!((ds.tau - 0.1).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_files() {
        let spec = BasisSpec::new(1, 1, 1, 1, 1, None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "t,x1\n0,1\n0.1,1\n").unwrap();
        assert!(matches!(ingest(&path, &spec), Err(Error::Format(_))));
        std::fs::write(&path, "t,u1,x1\n0,0,1\n0.1,0,1\n0.3,0,1\n").unwrap();
        assert!(matches!(ingest(&path, &spec), Err(Error::Format(_))));
    }

    #[test]
    fn finite_differences_are_second_order() {
        // x(t) = t^3 sampled on a fine grid: interior error is tau^2 * x'''/6 = tau^2.
        let tau = 1e-2;
        let x = DMatrix::from_fn(1, 50, |_, k| (k as f64 * tau).powi(3));
        let d = central_differences(&x, tau).unwrap();
        for k in 1..49 {
            let t = k as f64 * tau;
            assert!((d[(0, k)] - 3.0 * t * t).abs() <= 1.01 * tau * tau);
        }
    }
}

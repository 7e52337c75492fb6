//! Power vectors `Z(x)`, `Zhat(x)`, the factor matrix `H(x)` with `Z = H Zhat`,
//! and the input monomial matrix `W(x)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polyalg::{MatrixPolynomial, Monomial, Polynomial};

/// Column of all monomials in `n` variables with total degree in `[dmin, dmax]`.
pub fn build_power_vector(n: usize, dmin: u32, dmax: u32) -> Result<MatrixPolynomial> {
    if dmin < 1 || dmin > dmax {
        return Err(Error::DegreeRange { dmin, dmax });
    }
    let entries = Monomial::all_up_to(n, dmin, dmax)
        .into_iter()
        .map(|m| Polynomial::monomial(m, 1.0))
        .collect();
    MatrixPolynomial::column(entries, n)
}

fn single_monomial(p: &Polynomial) -> Option<Monomial> {
    let mut it = p.terms();
    match (it.next(), it.next()) {
        (Some((m, 1.0)), None) => Some(m.clone()),
        _ => None,
    }
}

/// Finds `H` with `Z = H Zhat`, one nonzero monomial per row.
///
/// Row `i` uses the lowest-index entry of `Zhat` among the maximal-degree divisors of `Z_i`.
pub fn factorize(z: &MatrixPolynomial, zhat: &MatrixPolynomial) -> Result<MatrixPolynomial> {
    let n = z.nvars();
    let zm: Vec<Monomial> = (0..z.rows())
        .map(|i| single_monomial(z.get(i, 0)).ok_or_else(|| Error::Shape(format!("Z entry {i} is not a monomial"))))
        .collect::<Result<_>>()?;
    let hm: Vec<Monomial> = (0..zhat.rows())
        .map(|j| {
            single_monomial(zhat.get(j, 0)).ok_or_else(|| Error::Shape(format!("Zhat entry {j} is not a monomial")))
        })
        .collect::<Result<_>>()?;
    let mut h = MatrixPolynomial::zeros(zm.len(), hm.len(), n);
    for (i, mi) in zm.iter().enumerate() {
        let mut best: Option<usize> = None;
        for (j, mj) in hm.iter().enumerate() {
            if mj.divides(mi) && best.is_none_or(|b| mj.degree() > hm[b].degree()) {
                best = Some(j);
            }
        }
        let j = best.ok_or_else(|| Error::Factorization {
            monomial: mi.to_string(),
        })?;
        let q = hm[j].quotient_of(mi).expect("divisor checked");
        h.set(i, j, Polynomial::monomial(q, 1.0));
    }
    Ok(h)
}

/// Parses `W(x)` written as rows separated by `;` and entries by `,`, e.g. `1,0;0,x1^2`.
/// Entries are `0`, `1` or a monomial such as `x1*x2`.
pub fn parse_w(s: &str, n: usize, m: usize) -> Result<MatrixPolynomial> {
    let rows: Vec<&str> = s.split(';').map(str::trim).filter(|r| !r.is_empty()).collect();
    let mut entries = Vec::new();
    for row in &rows {
        let cells: Vec<&str> = row.split(',').map(str::trim).collect();
        if cells.len() != m {
            return Err(Error::Config(format!(
                "W row '{row}' has {} entries, expected {m}",
                cells.len()
            )));
        }
        for c in cells {
            entries.push(if c == "0" {
                Polynomial::zero(n)
            } else {
                Polynomial::monomial(Monomial::parse(c, n)?, 1.0)
            });
        }
    }
    MatrixPolynomial::from_entries(rows.len(), m, n, entries)
}

/// The power vectors and the input monomial matrix of one synthesis problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub n: usize,
    pub m: usize,
    pub z: MatrixPolynomial,
    pub zhat: MatrixPolynomial,
    pub h: MatrixPolynomial,
    pub w: MatrixPolynomial,
}

impl BasisSpec {
    /// `Z` of degrees `zmin..=zmax`, `Zhat` of degrees `1..=zhat_max`, and `W = I_m` unless given.
    pub fn new(n: usize, m: usize, zmin: u32, zmax: u32, zhat_max: u32, w: Option<MatrixPolynomial>) -> Result<Self> {
        let z = build_power_vector(n, zmin, zmax)?;
        let zhat = build_power_vector(n, 1, zhat_max)?;
        Self::from_parts(n, m, z, zhat, w)
    }

    pub fn from_parts(
        n: usize,
        m: usize,
        z: MatrixPolynomial,
        zhat: MatrixPolynomial,
        w: Option<MatrixPolynomial>,
    ) -> Result<Self> {
        let h = factorize(&z, &zhat)?;
        let w = w.unwrap_or_else(|| MatrixPolynomial::identity(m, n));
        if w.cols() != m || w.nvars() != n {
            return Err(Error::Shape(format!(
                "W is {}x{} in {} variables, expected q x {m} in {n}",
                w.rows(),
                w.cols(),
                w.nvars()
            )));
        }
        Ok(BasisSpec { n, m, z, zhat, h, w })
    }

    pub fn big_n(&self) -> usize {
        self.z.rows()
    }

    pub fn p(&self) -> usize {
        self.zhat.rows()
    }

    pub fn q(&self) -> usize {
        self.w.rows()
    }

    /// Whether `W(x)` is the constant identity.
    pub fn w_is_identity(&self) -> bool {
        self.w.rows() == self.m
            && self
                .w
                .max_coeff_diff(&MatrixPolynomial::identity(self.m, self.n))
                .map(|d| d == 0.0)
                .unwrap_or(false)
    }

    /// `dZhat/dx`, a `p x n` matrix polynomial.
    pub fn zhat_jacobian(&self) -> MatrixPolynomial {
        self.zhat.jacobian().expect("Zhat is a column")
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct BasisDiagnostics {
    pub checks: Vec<Check>,
}

impl BasisDiagnostics {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Structural checks on a basis: leading `x` block, vanishing at the origin,
/// distinct `Z` entries and the identity `Z = H Zhat`.
pub fn validate_basis(spec: &BasisSpec) -> BasisDiagnostics {
    let n = spec.n;
    let mut checks = Vec::new();

    let leading = spec.zhat.rows() >= n && (0..n).all(|i| spec.zhat.get(i, 0) == &Polynomial::var(n, i));
    checks.push(Check {
        name: "zhat_leading_x",
        pass: leading,
        detail: if leading {
            "first n entries of Zhat are x".into()
        } else {
            "first n entries of Zhat must be x1..xn".into()
        },
    });

    let origin = vec![0.0; n];
    let z0 = spec.z.eval(&origin).amax();
    let zh0 = spec.zhat.eval(&origin).amax();
    checks.push(Check {
        name: "vanishes_at_origin",
        pass: z0 == 0.0 && zh0 == 0.0,
        detail: format!("max |Z(0)| = {z0}, max |Zhat(0)| = {zh0}"),
    });

    let mut dup = None;
    'outer: for i in 0..spec.z.rows() {
        for j in 0..i {
            if spec.z.get(i, 0) == spec.z.get(j, 0) {
                dup = Some((j, i));
                break 'outer;
            }
        }
    }
    checks.push(Check {
        name: "distinct_z",
        pass: dup.is_none(),
        detail: match dup {
            None => "all Z entries distinct".into(),
            Some((a, b)) => format!("Z entries {a} and {b} coincide"),
        },
    });

    let ident = spec.h.mul(&spec.zhat).and_then(|hz| hz.max_coeff_diff(&spec.z));
    checks.push(Check {
        name: "z_equals_h_zhat",
        pass: matches!(ident, Ok(d) if d == 0.0),
        detail: match ident {
            Ok(d) => format!("max coefficient residual {d:e}"),
            Err(e) => e.to_string(),
        },
    });

    BasisDiagnostics { checks }
}

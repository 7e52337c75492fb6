use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::polynomial::Polynomial;
use crate::error::{Error, Result};

/// Dense `rows x cols` grid of polynomials sharing one variable count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixRepr", into = "MatrixRepr")]
pub struct MatrixPolynomial {
    rows: usize,
    cols: usize,
    nvars: usize,
    entries: Vec<Polynomial>,
}

#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    rows: usize,
    cols: usize,
    nvars: usize,
    entries: Vec<Vec<Polynomial>>,
}

impl TryFrom<MatrixRepr> for MatrixPolynomial {
    type Error = Error;
    fn try_from(r: MatrixRepr) -> Result<Self> {
        if r.entries.len() != r.rows || r.entries.iter().any(|row| row.len() != r.cols) {
            return Err(Error::Shape("matrix entry grid does not match rows/cols".into()));
        }
        MatrixPolynomial::from_entries(r.rows, r.cols, r.nvars, r.entries.into_iter().flatten().collect())
    }
}

impl From<MatrixPolynomial> for MatrixRepr {
    fn from(m: MatrixPolynomial) -> Self {
        let cols = m.cols;
        MatrixRepr {
            rows: m.rows,
            cols: m.cols,
            nvars: m.nvars,
            entries: m.entries.chunks(cols.max(1)).map(|c| c.to_vec()).collect(),
        }
    }
}

impl MatrixPolynomial {
    pub fn zeros(rows: usize, cols: usize, nvars: usize) -> Self {
        MatrixPolynomial {
            rows,
            cols,
            nvars,
            entries: vec![Polynomial::zero(nvars); rows * cols],
        }
    }

    pub fn identity(k: usize, nvars: usize) -> Self {
        let mut m = Self::zeros(k, k, nvars);
        for i in 0..k {
            m.set(i, i, Polynomial::one(nvars));
        }
        m
    }

    /// Row-major construction.
    pub fn from_entries(rows: usize, cols: usize, nvars: usize, entries: Vec<Polynomial>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} entries for a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        if let Some(p) = entries.iter().find(|p| p.nvars() != nvars) {
            return Err(Error::Shape(format!(
                "entry has {} variables, expected {nvars}",
                p.nvars()
            )));
        }
        Ok(MatrixPolynomial {
            rows,
            cols,
            nvars,
            entries,
        })
    }

    pub fn column(entries: Vec<Polynomial>, nvars: usize) -> Result<Self> {
        let n = entries.len();
        Self::from_entries(n, 1, nvars, entries)
    }

    pub fn from_constant(m: &DMatrix<f64>, nvars: usize) -> Self {
        let mut out = Self::zeros(m.nrows(), m.ncols(), nvars);
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                out.set(i, j, Polynomial::constant(nvars, m[(i, j)]));
            }
        }
        out
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn get(&self, i: usize, j: usize) -> &Polynomial {
        &self.entries[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, p: Polynomial) {
        assert_eq!(p.nvars(), self.nvars);
        self.entries[i * self.cols + j] = p;
    }

    pub fn entries(&self) -> &[Polynomial] {
        &self.entries
    }

    pub fn degree(&self) -> u32 {
        self.entries.iter().map(Polynomial::degree).max().unwrap_or(0)
    }

    pub fn transpose(&self) -> MatrixPolynomial {
        let mut t = Self::zeros(self.cols, self.rows, self.nvars);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j).clone());
            }
        }
        t
    }

    fn same_shape(&self, other: &MatrixPolynomial, op: &str) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols || self.nvars != other.nvars {
            return Err(Error::Shape(format!(
                "{op}: {}x{} (n={}) vs {}x{} (n={})",
                self.rows, self.cols, self.nvars, other.rows, other.cols, other.nvars
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &MatrixPolynomial) -> Result<MatrixPolynomial> {
        self.same_shape(other, "add")?;
        let entries = self.entries.iter().zip(&other.entries).map(|(a, b)| a + b).collect();
        Ok(self.with_entries(entries))
    }

    pub fn sub(&self, other: &MatrixPolynomial) -> Result<MatrixPolynomial> {
        self.same_shape(other, "sub")?;
        let entries = self.entries.iter().zip(&other.entries).map(|(a, b)| a - b).collect();
        Ok(self.with_entries(entries))
    }

    fn with_entries(&self, entries: Vec<Polynomial>) -> MatrixPolynomial {
        MatrixPolynomial {
            rows: self.rows,
            cols: self.cols,
            nvars: self.nvars,
            entries,
        }
    }

    pub fn scale(&self, s: f64) -> MatrixPolynomial {
        self.with_entries(self.entries.iter().map(|p| p.scale(s)).collect())
    }

    pub fn mul(&self, other: &MatrixPolynomial) -> Result<MatrixPolynomial> {
        if self.cols != other.rows || self.nvars != other.nvars {
            return Err(Error::Shape(format!(
                "mul: {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols, self.nvars);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc = Polynomial::zero(self.nvars);
                for k in 0..self.cols {
                    let (a, b) = (self.get(i, k), other.get(k, j));
                    if a.is_zero() || b.is_zero() {
                        continue;
                    }
                    acc.add_scaled(&(a * b), 1.0);
                }
                out.set(i, j, acc);
            }
        }
        Ok(out)
    }

    /// `C * self` for a real matrix `C`.
    pub fn lmul_const(&self, c: &DMatrix<f64>) -> Result<MatrixPolynomial> {
        if c.ncols() != self.rows {
            return Err(Error::Shape(format!(
                "lmul_const: {}x{} by {}x{}",
                c.nrows(),
                c.ncols(),
                self.rows,
                self.cols
            )));
        }
        let mut out = Self::zeros(c.nrows(), self.cols, self.nvars);
        for i in 0..c.nrows() {
            for j in 0..self.cols {
                let mut acc = Polynomial::zero(self.nvars);
                for k in 0..self.rows {
                    if c[(i, k)] != 0.0 {
                        acc.add_scaled(self.get(k, j), c[(i, k)]);
                    }
                }
                out.set(i, j, acc);
            }
        }
        Ok(out)
    }

    /// `self * C` for a real matrix `C`.
    pub fn rmul_const(&self, c: &DMatrix<f64>) -> Result<MatrixPolynomial> {
        Ok(self.transpose().lmul_const(&c.transpose())?.transpose())
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        if x.len() != self.nvars {
            return Err(Error::Shape(format!(
                "point has length {}, matrix has {} variables",
                x.len(),
                self.nvars
            )));
        }
        Ok(self.eval(x))
    }

    pub fn eval(&self, x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j).eval(x))
    }

    /// Jacobian of a column vector: entry `(i, j)` is the derivative of `v_i` in `x_j`.
    pub fn jacobian(&self) -> Result<MatrixPolynomial> {
        if self.cols != 1 {
            return Err(Error::Shape(format!(
                "jacobian needs a column vector, got {}x{}",
                self.rows, self.cols
            )));
        }
        let mut out = Self::zeros(self.rows, self.nvars, self.nvars);
        for i in 0..self.rows {
            for j in 0..self.nvars {
                out.set(i, j, self.get(i, 0).derivative(j));
            }
        }
        Ok(out)
    }

    pub fn max_coeff_diff(&self, other: &MatrixPolynomial) -> Result<f64> {
        self.same_shape(other, "compare")?;
        Ok(self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a.max_coeff_diff(b))
            .fold(0.0, f64::max))
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|i| (i + 1..self.cols).all(|j| self.get(i, j).max_coeff_diff(self.get(j, i)) <= tol))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(i: usize) -> Polynomial {
        Polynomial::var(2, i)
    }

    #[test]
    fn identity_is_neutral() {
        let m = MatrixPolynomial::from_entries(
            2,
            3,
            2,
            vec![
                x(0),
                x(1),
                &x(0) * &x(1),
                Polynomial::one(2),
                x(0).scale(2.0),
                Polynomial::zero(2),
            ],
        )
        .unwrap();
        assert_eq!(m.mul(&MatrixPolynomial::identity(3, 2)).unwrap(), m);
        assert_eq!(m.transpose().transpose(), m);
        assert!(m.mul(&m).is_err());
    }

    #[test]
    fn jacobian_of_linear_and_product() {
        let v = MatrixPolynomial::column(vec![x(0), x(1)], 2).unwrap();
        assert_eq!(v.jacobian().unwrap(), MatrixPolynomial::identity(2, 2));
        let v = MatrixPolynomial::column(vec![x(0), x(1), &x(0) * &x(1)], 2).unwrap();
        let j = v.jacobian().unwrap();
        assert_eq!(j.get(2, 0), &x(1));
        assert_eq!(j.get(2, 1), &x(0));
        assert!(j.get(0, 1).is_zero());
    }

    #[test]
    fn json_roundtrip() {
        let m = MatrixPolynomial::from_entries(1, 2, 2, vec![x(0), &x(1) * &x(1)]).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        let back: MatrixPolynomial = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
    }
}

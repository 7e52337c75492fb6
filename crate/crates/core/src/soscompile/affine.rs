//! Polynomials in `x` whose coefficients are affine in the decision vector.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::polyalg::{MatrixPolynomial, Monomial, Polynomial, DROP_TOL};

/// `constant + sum_i coef_i * v_i`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinExpr {
    pub constant: f64,
    pub terms: BTreeMap<usize, f64>,
}

impl LinExpr {
    pub fn constant(c: f64) -> Self {
        LinExpr {
            constant: c,
            terms: BTreeMap::new(),
        }
    }

    pub fn var(i: usize, c: f64) -> Self {
        let mut e = LinExpr::default();
        e.terms.insert(i, c);
        e
    }

    pub fn is_zero(&self) -> bool {
        self.constant == 0.0 && self.terms.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_scaled(&mut self, other: &LinExpr, s: f64) {
        self.constant += s * other.constant;
        for (&i, &c) in &other.terms {
            *self.terms.entry(i).or_insert(0.0) += s * c;
        }
        self.clean();
    }

    fn clean(&mut self) {
        if self.constant.abs() < DROP_TOL {
            self.constant = 0.0;
        }
        self.terms.retain(|_, c| c.abs() >= DROP_TOL);
    }

    pub fn scaled(&self, s: f64) -> LinExpr {
        let mut e = LinExpr::default();
        e.add_scaled(self, s);
        e
    }

    pub fn eval(&self, v: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|(&i, &c)| c * v[i]).sum::<f64>()
    }

    pub fn max_diff(&self, other: &LinExpr) -> f64 {
        let mut d = self.clone();
        d.add_scaled(other, -1.0);
        d.terms.values().fold(d.constant.abs(), |a, c| a.max(c.abs()))
    }
}

/// Polynomial in `x` with [`LinExpr`] coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct AffinePoly {
    nvars: usize,
    terms: BTreeMap<Monomial, LinExpr>,
}

impl AffinePoly {
    pub fn zero(nvars: usize) -> Self {
        AffinePoly {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn from_poly(p: &Polynomial) -> Self {
        AffinePoly {
            nvars: p.nvars(),
            terms: p.terms().map(|(m, c)| (m.clone(), LinExpr::constant(c))).collect(),
        }
    }

    /// `coef * v_var * mono`.
    pub fn var_term(var: usize, mono: Monomial, coef: f64) -> Self {
        let mut p = AffinePoly::zero(mono.nvars());
        p.terms.insert(mono, LinExpr::var(var, coef));
        p
    }

    /// `v_var * 1`.
    pub fn scalar_var(nvars: usize, var: usize) -> Self {
        Self::var_term(var, Monomial::one(nvars), 1.0)
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &LinExpr)> {
        self.terms.iter()
    }

    /// True when no coefficient depends on the decision vector.
    pub fn is_constant(&self) -> bool {
        self.terms.values().all(LinExpr::is_constant)
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn add_scaled(&mut self, other: &AffinePoly, s: f64) {
        assert_eq!(self.nvars, other.nvars);
        for (m, e) in &other.terms {
            self.terms.entry(m.clone()).or_default().add_scaled(e, s);
        }
        self.terms.retain(|_, e| !e.is_zero());
    }

    pub fn add(&self, other: &AffinePoly) -> AffinePoly {
        let mut p = self.clone();
        p.add_scaled(other, 1.0);
        p
    }

    pub fn scale(&self, s: f64) -> AffinePoly {
        let mut p = AffinePoly::zero(self.nvars);
        p.add_scaled(self, s);
        p
    }

    pub fn mul_poly(&self, q: &Polynomial) -> AffinePoly {
        assert_eq!(self.nvars, q.nvars());
        let mut out = AffinePoly::zero(self.nvars);
        for (ma, ea) in &self.terms {
            for (mb, cb) in q.terms() {
                out.terms.entry(ma.mul(mb)).or_default().add_scaled(ea, cb);
            }
        }
        out.terms.retain(|_, e| !e.is_zero());
        out
    }

    /// Product of two affine polynomials; one of them must be free of decision variables.
    pub fn mul(&self, other: &AffinePoly) -> Result<AffinePoly> {
        if other.is_constant() {
            Ok(self.mul_poly(&other.to_poly_const()))
        } else if self.is_constant() {
            Ok(other.mul_poly(&self.to_poly_const()))
        } else {
            Err(Error::Shape("product is not affine in the decision variables".into()))
        }
    }

    fn to_poly_const(&self) -> Polynomial {
        Polynomial::from_terms(self.nvars, self.terms.iter().map(|(m, e)| (m.clone(), e.constant)))
            .expect("consistent variable count")
    }

    /// Substitutes a decision vector.
    pub fn eval_vars(&self, v: &[f64]) -> Polynomial {
        Polynomial::from_terms(self.nvars, self.terms.iter().map(|(m, e)| (m.clone(), e.eval(v))))
            .expect("consistent variable count")
    }

    pub fn max_diff(&self, other: &AffinePoly) -> f64 {
        let mut d = self.clone();
        d.add_scaled(other, -1.0);
        d.terms
            .values()
            .fold(0.0, |a, e| a.max(e.max_diff(&LinExpr::default())))
    }
}

/// Dense matrix of [`AffinePoly`] entries.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineMatrix {
    rows: usize,
    cols: usize,
    nvars: usize,
    entries: Vec<AffinePoly>,
}

impl AffineMatrix {
    pub fn zeros(rows: usize, cols: usize, nvars: usize) -> Self {
        AffineMatrix {
            rows,
            cols,
            nvars,
            entries: vec![AffinePoly::zero(nvars); rows * cols],
        }
    }

    pub fn from_poly(m: &MatrixPolynomial) -> Self {
        AffineMatrix {
            rows: m.rows(),
            cols: m.cols(),
            nvars: m.nvars(),
            entries: m.entries().iter().map(AffinePoly::from_poly).collect(),
        }
    }

    /// `p * I_k` for a scalar affine polynomial.
    pub fn scalar_identity(p: &AffinePoly, k: usize) -> Self {
        let mut m = Self::zeros(k, k, p.nvars());
        for i in 0..k {
            m.set(i, i, p.clone());
        }
        m
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

    pub fn get(&self, i: usize, j: usize) -> &AffinePoly {
        &self.entries[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, p: AffinePoly) {
        self.entries[i * self.cols + j] = p;
    }

    pub fn entries(&self) -> &[AffinePoly] {
        &self.entries
    }

    pub fn degree(&self) -> u32 {
        self.entries.iter().map(AffinePoly::degree).max().unwrap_or(0)
    }

    pub fn transpose(&self) -> AffineMatrix {
        let mut t = Self::zeros(self.cols, self.rows, self.nvars);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j).clone());
            }
        }
        t
    }

    fn zip(&self, other: &AffineMatrix, s: f64) -> Result<AffineMatrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Shape(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = self.clone();
        for (a, b) in out.entries.iter_mut().zip(&other.entries) {
            a.add_scaled(b, s);
        }
        Ok(out)
    }

    pub fn add(&self, other: &AffineMatrix) -> Result<AffineMatrix> {
        self.zip(other, 1.0)
    }

    pub fn sub(&self, other: &AffineMatrix) -> Result<AffineMatrix> {
        self.zip(other, -1.0)
    }

    pub fn scale(&self, s: f64) -> AffineMatrix {
        let mut out = self.clone();
        for e in &mut out.entries {
            *e = e.scale(s);
        }
        out
    }

    /// `L * self` for a matrix polynomial `L`.
    pub fn lmul(&self, l: &MatrixPolynomial) -> Result<AffineMatrix> {
        if l.cols() != self.rows {
            return Err(Error::Shape(format!(
                "lmul: {}x{} by {}x{}",
                l.rows(),
                l.cols(),
                self.rows,
                self.cols
            )));
        }
        let mut out = Self::zeros(l.rows(), self.cols, self.nvars);
        for i in 0..l.rows() {
            for j in 0..self.cols {
                let mut acc = AffinePoly::zero(self.nvars);
                for k in 0..self.rows {
                    let (a, b) = (l.get(i, k), self.get(k, j));
                    if !a.is_zero() && !b.is_zero() {
                        acc.add_scaled(&b.mul_poly(a), 1.0);
                    }
                }
                out.set(i, j, acc);
            }
        }
        Ok(out)
    }

    /// `self * R` for a matrix polynomial `R`.
    pub fn rmul(&self, r: &MatrixPolynomial) -> Result<AffineMatrix> {
        Ok(self.transpose().lmul(&r.transpose())?.transpose())
    }

    /// Every entry multiplied by the scalar affine polynomial `s`, which must be
    /// free of decision variables unless `self` is.
    pub fn mul_scalar(&self, s: &AffinePoly) -> Result<AffineMatrix> {
        let mut out = self.clone();
        for e in &mut out.entries {
            *e = e.mul(s)?;
        }
        Ok(out)
    }

    /// Writes `block` with its top-left corner at `(r, c)`.
    pub fn set_block(&mut self, r: usize, c: usize, block: &AffineMatrix) {
        assert!(r + block.rows <= self.rows && c + block.cols <= self.cols);
        for i in 0..block.rows {
            for j in 0..block.cols {
                self.set(r + i, c + j, block.get(i, j).clone());
            }
        }
    }

    /// Symmetric 2x2 block matrix `[a, b; b^T, d]`.
    pub fn block_sym(a: &AffineMatrix, b: &AffineMatrix, d: &AffineMatrix) -> Result<AffineMatrix> {
        if a.rows != a.cols || d.rows != d.cols || b.rows != a.rows || b.cols != d.rows {
            return Err(Error::Shape("inconsistent block sizes".into()));
        }
        let n = a.rows + d.rows;
        let mut m = Self::zeros(n, n, a.nvars);
        m.set_block(0, 0, a);
        m.set_block(0, a.rows, b);
        m.set_block(a.rows, 0, &b.transpose());
        m.set_block(a.rows, a.rows, d);
        Ok(m)
    }

    pub fn eval_vars(&self, v: &[f64]) -> MatrixPolynomial {
        MatrixPolynomial::from_entries(
            self.rows,
            self.cols,
            self.nvars,
            self.entries.iter().map(|e| e.eval_vars(v)).collect(),
        )
        .expect("consistent shapes")
    }

    /// First entry pair `(i, j)` with `M_ij != M_ji` beyond `tol`.
    pub fn asymmetry(&self, tol: f64) -> Option<(usize, usize)> {
        if self.rows != self.cols {
            return Some((0, 0));
        }
        for i in 0..self.rows {
            for j in i + 1..self.cols {
                if self.get(i, j).max_diff(self.get(j, i)) > tol {
                    return Some((i, j));
                }
            }
        }
        None
    }
}

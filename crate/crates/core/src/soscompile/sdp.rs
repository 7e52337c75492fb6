use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::polyalg::Monomial;

/// Named contiguous slice of the decision vector.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarSlice {
    pub name: String,
    pub start: usize,
    pub len: usize,
}

/// Hands out consecutive decision-variable indices and records the layout.
#[derive(Clone, Debug, Default)]
pub struct VarAlloc {
    next: usize,
    layout: Vec<VarSlice>,
}

impl VarAlloc {
    pub fn alloc(&mut self, name: impl Into<String>, len: usize) -> usize {
        let start = self.next;
        self.layout.push(VarSlice {
            name: name.into(),
            start,
            len,
        });
        self.next += len;
        start
    }

    pub fn count(&self) -> usize {
        self.next
    }

    pub fn layout(&self) -> &[VarSlice] {
        &self.layout
    }
}

/// Symmetric affine matrix `F0 + sum_i v_i F_i`, stored by its upper triangle.
#[derive(Clone, Debug, PartialEq)]
pub struct PsdBlock {
    pub name: String,
    pub size: usize,
    /// `(i, j, value)` with `i <= j`.
    pub constant: Vec<(usize, usize, f64)>,
    /// `(var, i, j, value)` with `i <= j`.
    pub linear: Vec<(usize, usize, usize, f64)>,
}

impl PsdBlock {
    pub fn eval(&self, v: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.size, self.size);
        for &(i, j, c) in &self.constant {
            m[(i, j)] += c;
        }
        for &(k, i, j, c) in &self.linear {
            m[(i, j)] += c * v[k];
        }
        for i in 0..self.size {
            for j in 0..i {
                m[(i, j)] = m[(j, i)];
            }
        }
        m
    }
}

/// Sparse row `sum terms = rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct EqRow {
    pub terms: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl EqRow {
    pub fn residual(&self, v: &[f64]) -> f64 {
        self.terms.iter().map(|&(i, c)| c * v[i]).sum::<f64>() - self.rhs
    }
}

/// Per-slot monomial bases of one Gram block, kept to rebuild `M(x)` from `Q`.
#[derive(Clone, Debug, PartialEq)]
pub struct GramInfo {
    pub name: String,
    pub block: usize,
    pub slots: Vec<Vec<Monomial>>,
}

/// Semidefinite program: `minimize c^T v` subject to `A v = b` and every block PSD.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SdpInstance {
    pub nvars: usize,
    pub blocks: Vec<PsdBlock>,
    pub eqs: Vec<EqRow>,
    /// Sparse objective `c`.
    pub objective: Vec<(usize, f64)>,
    pub layout: Vec<VarSlice>,
    pub gram: Vec<GramInfo>,
}

impl SdpInstance {
    pub fn slice(&self, name: &str) -> Option<&VarSlice> {
        self.layout.iter().find(|s| s.name == name)
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.size).collect()
    }

    pub fn objective_value(&self, v: &[f64]) -> f64 {
        self.objective.iter().map(|&(i, c)| c * v[i]).sum()
    }
}

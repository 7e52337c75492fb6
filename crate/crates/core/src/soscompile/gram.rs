//! Gram-matrix reduction of SOS-matrix constraints.

use std::collections::{BTreeMap, BTreeSet};

use super::affine::{AffineMatrix, LinExpr};
use super::sdp::{EqRow, GramInfo, PsdBlock, VarAlloc};
use crate::error::{Error, Result};
use crate::polyalg::Monomial;

/// Output of [`compile_sos_matrix`].
#[derive(Clone, Debug)]
pub struct GramBlock {
    pub block: PsdBlock,
    pub eqs: Vec<EqRow>,
    pub slots: Vec<Vec<Monomial>>,
}

/// Linear functionals used to discard Gram monomials that cannot occur in any
/// SOS decomposition: total degree and each variable degree, both signs.
type Functional = Box<dyn Fn(&Monomial) -> i64>;

fn functionals(n: usize) -> Vec<Functional> {
    let mut out: Vec<Functional> = vec![
        Box::new(|m: &Monomial| m.degree() as i64),
        Box::new(|m: &Monomial| -(m.degree() as i64)),
    ];
    for i in 0..n {
        out.push(Box::new(move |m: &Monomial| m.exponents()[i] as i64));
        out.push(Box::new(move |m: &Monomial| -(m.exponents()[i] as i64)));
    }
    out
}

/// Candidate basis for slot `j`: every candidate `a` with `2 l(a)` inside the
/// range of `l` over the support of `M_jj`, for each functional `l`. Dropping
/// the others is exact, since the extreme `l`-form of an SOS is itself SOS.
fn slot_basis(diag_support: &BTreeSet<Monomial>, candidates: &[Monomial], n: usize) -> Vec<Monomial> {
    if diag_support.is_empty() {
        return Vec::new();
    }
    let ls = functionals(n);
    let ranges: Vec<(i64, i64)> = ls
        .iter()
        .map(|l| {
            let vals = diag_support.iter().map(l);
            (vals.clone().min().unwrap(), vals.max().unwrap())
        })
        .collect();
    candidates
        .iter()
        .filter(|a| {
            ls.iter()
                .zip(&ranges)
                .all(|(l, &(lo, hi))| (lo..=hi).contains(&(2 * l(a))))
        })
        .cloned()
        .collect()
}

/// Encodes `M(x) in Sigma^r` as `M(x) = (z(x) (x) I_r)^T Q (z(x) (x) I_r)` with `Q` PSD.
///
/// Each slot gets its own pruned monomial vector, drawn from all monomials up to
/// `ceil(deg M / 2)` in the variables that occur in `M`. The Gram entries are fresh
/// decision variables allocated from `alloc`; each appears in exactly one matching row.
pub fn compile_sos_matrix(name: &str, m: &AffineMatrix, alloc: &mut VarAlloc) -> Result<GramBlock> {
    if let Some((row, col)) = m.asymmetry(1e-9) {
        return Err(Error::NonSymmetric { row, col });
    }
    let r = m.rows();
    let n = m.nvars();

    let mut used = vec![false; n];
    for e in m.entries() {
        for (mono, _) in e.terms() {
            for (u, &k) in used.iter_mut().zip(mono.exponents()) {
                *u |= k > 0;
            }
        }
    }
    let half = m.degree().div_ceil(2);
    let candidates: Vec<Monomial> = Monomial::all_up_to(n, 0, half)
        .into_iter()
        .filter(|a| a.exponents().iter().zip(&used).all(|(&k, &u)| u || k == 0))
        .collect();

    let slots: Vec<Vec<Monomial>> = (0..r)
        .map(|j| {
            let support: BTreeSet<Monomial> = m.get(j, j).terms().map(|(mono, _)| mono.clone()).collect();
            slot_basis(&support, &candidates, n)
        })
        .collect();
    let mut offsets = Vec::with_capacity(r + 1);
    let mut size = 0;
    for s in &slots {
        offsets.push(size);
        size += s.len();
    }

    let nq = size * (size + 1) / 2;
    let base = alloc.alloc(format!("gram:{name}"), nq);
    let qvar = |a: usize, b: usize| {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        // Row-major upper triangle.
        base + a * size - a * (a + 1) / 2 + b
    };

    let mut linear = Vec::with_capacity(nq);
    for a in 0..size {
        for b in a..size {
            linear.push((qvar(a, b), a, b, 1.0));
        }
    }
    let block = PsdBlock {
        name: format!("gram:{name}"),
        size,
        constant: Vec::new(),
        linear,
    };

    let mut eqs = Vec::new();
    for i in 0..r {
        for j in i..r {
            // gamma -> (Gram terms, target coefficient of M_ij)
            let mut rows: BTreeMap<Monomial, (BTreeMap<usize, f64>, LinExpr)> = BTreeMap::new();
            for (gamma, e) in m.get(i, j).terms() {
                rows.entry(gamma.clone()).or_default().1 = e.clone();
            }
            for (ai, a) in slots[i].iter().enumerate() {
                for (bi, b) in slots[j].iter().enumerate() {
                    if i == j && bi < ai {
                        continue;
                    }
                    let coef = if i == j && ai != bi { 2.0 } else { 1.0 };
                    let var = qvar(offsets[i] + ai, offsets[j] + bi);
                    *rows.entry(a.mul(b)).or_default().0.entry(var).or_insert(0.0) += coef;
                }
            }
            for (_, (gram, target)) in rows {
                // sum gram - target.linear = target.constant
                let mut terms: Vec<(usize, f64)> = gram.into_iter().collect();
                terms.extend(target.terms.iter().map(|(&k, &c)| (k, -c)));
                if terms.is_empty() && target.constant == 0.0 {
                    continue;
                }
                eqs.push(EqRow {
                    terms,
                    rhs: target.constant,
                });
            }
        }
    }
    Ok(GramBlock { block, eqs, slots })
}

impl GramBlock {
    pub fn info(&self, name: &str, block: usize) -> GramInfo {
        GramInfo {
            name: name.to_string(),
            block,
            slots: self.slots.clone(),
        }
    }
}

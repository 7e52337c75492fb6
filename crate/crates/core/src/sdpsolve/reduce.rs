//! Elimination of the equality system and reduction to a pure LMI.
//!
//! Rows that own a column singleton (a variable occurring in no other row) are
//! solved for that variable. The remaining rows are solved through an SVD null
//! space. The decision vector is then `v = x0 + M w` and every block becomes
//! `F0 + sum_k w_k F_k`; columns of `F` that are linearly dependent are merged.

use std::collections::{BTreeMap, HashMap};

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::soscompile::SdpInstance;

/// Entries `(block, i, j, value)` of one column, both triangles listed.
pub(crate) type Entries = Vec<(usize, usize, usize, f64)>;

#[derive(Clone, Debug)]
pub(crate) struct Reduced {
    /// Sizes of the blocks kept in the cone (size zero blocks dropped).
    pub sizes: Vec<usize>,
    pub f0: Vec<DMatrix<f64>>,
    pub cols: Vec<Entries>,
    pub c: DVector<f64>,
    pub x0: Vec<f64>,
    /// Sparse rows of `M`, one per original variable.
    pub m_rows: Vec<Vec<(usize, f64)>>,
    pub pivots: usize,
    pub null_dim: usize,
}

impl Reduced {
    pub fn dim(&self) -> usize {
        self.cols.len()
    }

    pub fn lift(&self, w: &[f64]) -> Vec<f64> {
        self.x0
            .iter()
            .zip(&self.m_rows)
            .map(|(x, row)| x + row.iter().map(|&(k, m)| m * w[k]).sum::<f64>())
            .collect()
    }

    /// `F0 + sum_k w_k F_k`, block by block.
    pub fn eval(&self, w: &[f64]) -> Vec<DMatrix<f64>> {
        let mut out = self.f0.clone();
        for (col, &wk) in self.cols.iter().zip(w) {
            for &(b, i, j, v) in col {
                out[b][(i, j)] += wk * v;
            }
        }
        out
    }
}

/// Result of eliminating the equalities: `v = x0 + M u` in free coordinates `u`.
struct Param {
    x0: Vec<f64>,
    rows: Vec<Vec<(usize, f64)>>,
    nfree: usize,
    pivots: usize,
    null_dim: usize,
}

fn null_space_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let (m, n) = a.shape();
    // Pad to at least square so the SVD exposes a full right basis.
    let rows = m.max(n);
    let mut padded = DMatrix::zeros(rows, n);
    padded.view_mut((0, 0), (m, n)).copy_from(a);
    let svd = padded.svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let smax = svd.singular_values.max();
    let tol = (1e-10 * smax).max(1e-14);
    let mut x = DVector::zeros(n);
    let mut null = Vec::new();
    let mut bp = DVector::zeros(rows);
    bp.rows_mut(0, m).copy_from(b);
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > tol {
            let coef = u.column(k).dot(&bp) / s;
            x += vt.row(k).transpose() * coef;
        } else {
            null.push(k);
        }
    }
    let residual = (a * &x - b).amax();
    if residual > 1e-8 * b.amax().max(1.0) {
        return Err(Error::StructuralInfeasibility { residual });
    }
    let mut basis = DMatrix::zeros(n, null.len());
    for (c, &k) in null.iter().enumerate() {
        basis.set_column(c, &vt.row(k).transpose());
    }
    Ok((x, basis))
}

fn eliminate(inst: &SdpInstance) -> Result<Param> {
    let nv = inst.nvars;
    let mut count = vec![0usize; nv];
    for row in &inst.eqs {
        for &(k, c) in &row.terms {
            if c != 0.0 {
                count[k] += 1;
            }
        }
    }
    for (r, row) in inst.eqs.iter().enumerate() {
        if row.terms.iter().all(|&(_, c)| c == 0.0) && row.rhs != 0.0 {
            log::debug!("equality row {r} reads 0 = {}", row.rhs);
        }
    }
    let mut is_pivot = vec![false; nv];
    let mut pivot_rows = Vec::new();
    let mut rest = Vec::new();
    for row in &inst.eqs {
        match row.terms.iter().find(|&&(k, c)| c != 0.0 && count[k] == 1) {
            Some(&(k, c)) => {
                is_pivot[k] = true;
                pivot_rows.push((k, c, row));
            }
            None => rest.push(row),
        }
    }

    // Variables of the remaining rows, solved through a null space.
    let mut dvars: BTreeMap<usize, usize> = BTreeMap::new();
    for row in &rest {
        for &(k, c) in &row.terms {
            if c != 0.0 {
                let next = dvars.len();
                dvars.entry(k).or_insert(next);
            }
        }
    }
    let (xd, nd) = if rest.is_empty() {
        (DVector::zeros(0), DMatrix::zeros(0, 0))
    } else {
        let mut a = DMatrix::zeros(rest.len(), dvars.len());
        let mut b = DVector::zeros(rest.len());
        for (r, row) in rest.iter().enumerate() {
            for &(k, c) in &row.terms {
                if c != 0.0 {
                    a[(r, dvars[&k])] += c;
                }
            }
            b[r] = row.rhs;
        }
        null_space_solve(&a, &b)?
    };
    let null_dim = nd.ncols();

    let mut x0 = vec![0.0; nv];
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nv];
    let mut nfree = null_dim;
    for k in 0..nv {
        if is_pivot[k] {
            continue;
        }
        if let Some(&d) = dvars.get(&k) {
            x0[k] = xd[d];
            rows[k] = (0..null_dim)
                .filter(|&j| nd[(d, j)] != 0.0)
                .map(|j| (j, nd[(d, j)]))
                .collect();
        } else {
            rows[k] = vec![(nfree, 1.0)];
            nfree += 1;
        }
    }
    for &(p, a, row) in &pivot_rows {
        let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
        let mut constant = row.rhs / a;
        for &(k, c) in &row.terms {
            if k == p || c == 0.0 {
                continue;
            }
            let f = -c / a;
            constant += f * x0[k];
            for &(j, m) in &rows[k] {
                *acc.entry(j).or_insert(0.0) += f * m;
            }
        }
        x0[p] = constant;
        rows[p] = acc.into_iter().filter(|&(_, v)| v != 0.0).collect();
    }
    Ok(Param {
        x0,
        rows,
        nfree,
        pivots: pivot_rows.len(),
        null_dim,
    })
}

/// Fails with a structural-infeasibility error when `A v = b` has no solution.
pub fn check_equalities(inst: &SdpInstance) -> Result<()> {
    eliminate(inst).map(|_| ())
}

pub(crate) fn reduce(inst: &SdpInstance) -> Result<Reduced> {
    let param = eliminate(inst)?;
    let mut block_ids = Vec::new();
    let mut slot = vec![usize::MAX; inst.blocks.len()];
    for (b, blk) in inst.blocks.iter().enumerate() {
        if blk.size > 0 {
            slot[b] = block_ids.len();
            block_ids.push(b);
        }
    }
    let sizes: Vec<usize> = block_ids.iter().map(|&b| inst.blocks[b].size).collect();

    let mut f0: Vec<DMatrix<f64>> = sizes.iter().map(|&s| DMatrix::zeros(s, s)).collect();
    let mut ucols: Vec<BTreeMap<(usize, usize, usize), f64>> = vec![BTreeMap::new(); param.nfree];
    for (b, blk) in inst.blocks.iter().enumerate() {
        if blk.size == 0 {
            continue;
        }
        let s = slot[b];
        for &(i, j, v) in &blk.constant {
            f0[s][(i, j)] += v;
        }
        for &(k, i, j, v) in &blk.linear {
            f0[s][(i, j)] += v * param.x0[k];
            for &(u, m) in &param.rows[k] {
                *ucols[u].entry((s, i, j)).or_insert(0.0) += v * m;
            }
        }
    }
    for m in &mut f0 {
        symmetrize_upper(m);
    }
    let mut cu = vec![0.0; param.nfree];
    for &(k, c) in &inst.objective {
        for &(u, m) in &param.rows[k] {
            cu[u] += c * m;
        }
    }
    for col in &mut ucols {
        col.retain(|_, v| *v != 0.0);
    }

    // Columns owning an entry no other column touches are independent of the rest.
    let mut owners: HashMap<(usize, usize, usize), u32> = HashMap::new();
    for col in &ucols {
        for key in col.keys() {
            *owners.entry(*key).or_insert(0) += 1;
        }
    }
    let (private, shared): (Vec<usize>, Vec<usize>) = (0..param.nfree)
        .filter(|&u| !ucols[u].is_empty())
        .partition(|&u| ucols[u].keys().any(|k| owners[k] == 1));

    // Orthonormal basis of the span of the shared columns.
    let ns = shared.len();
    let mut gram = DMatrix::zeros(ns, ns);
    for a in 0..ns {
        for b in a..ns {
            let (ca, cb) = (&ucols[shared[a]], &ucols[shared[b]]);
            let (small, large) = if ca.len() <= cb.len() { (ca, cb) } else { (cb, ca) };
            let dot: f64 = small
                .iter()
                .filter_map(|(k, v)| large.get(k).map(|w| v * w * if k.1 == k.2 { 1.0 } else { 2.0 }))
                .sum();
            gram[(a, b)] = dot;
            gram[(b, a)] = dot;
        }
    }
    let basis = if ns > 0 {
        let eig = SymmetricEigen::new(gram);
        let lmax = eig.eigenvalues.max();
        let keep: Vec<usize> = (0..ns)
            .filter(|&k| eig.eigenvalues[k] > 1e-12 * lmax.max(0.0))
            .collect();
        let mut v = DMatrix::zeros(ns, keep.len());
        for (c, &k) in keep.iter().enumerate() {
            v.set_column(c, &eig.eigenvectors.column(k));
        }
        v
    } else {
        DMatrix::zeros(0, 0)
    };
    if basis.ncols() < ns {
        log::debug!("dropped {} dependent directions", ns - basis.ncols());
    }

    // u -> w map: private columns keep their own coordinate, shared ones go through `basis`.
    let mut u_to_w: Vec<Vec<(usize, f64)>> = vec![Vec::new(); param.nfree];
    let mut cols: Vec<Entries> = Vec::new();
    let expand = |map: &BTreeMap<(usize, usize, usize), f64>| -> Entries {
        let mut e = Vec::with_capacity(2 * map.len());
        for (&(b, i, j), &v) in map {
            e.push((b, i, j, v));
            if i != j {
                e.push((b, j, i, v));
            }
        }
        e
    };
    for &u in &private {
        u_to_w[u].push((cols.len(), 1.0));
        cols.push(expand(&ucols[u]));
    }
    let base = cols.len();
    for c in 0..basis.ncols() {
        let mut acc: BTreeMap<(usize, usize, usize), f64> = BTreeMap::new();
        for (a, &u) in shared.iter().enumerate() {
            let coef = basis[(a, c)];
            if coef == 0.0 {
                continue;
            }
            u_to_w[u].push((base + c, coef));
            for (k, v) in &ucols[u] {
                *acc.entry(*k).or_insert(0.0) += coef * v;
            }
        }
        acc.retain(|_, v| v.abs() > 1e-15);
        cols.push(expand(&acc));
    }

    let nw = cols.len();
    let mut c = DVector::zeros(nw);
    for (u, &cv) in cu.iter().enumerate() {
        for &(w, m) in &u_to_w[u] {
            c[w] += cv * m;
        }
    }
    let col_scale = equilibrate(&mut f0, &mut cols);
    for (cv, s) in c.iter_mut().zip(&col_scale) {
        *cv *= s;
    }
    let m_rows = param
        .rows
        .iter()
        .map(|row| {
            let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
            for &(u, m) in row {
                for &(w, t) in &u_to_w[u] {
                    *acc.entry(w).or_insert(0.0) += m * t * col_scale[w];
                }
            }
            acc.into_iter().filter(|&(_, v)| v != 0.0).collect()
        })
        .collect();

    Ok(Reduced {
        sizes,
        f0,
        cols,
        c,
        x0: param.x0,
        m_rows,
        pivots: param.pivots,
        null_dim: param.null_dim,
    })
}

const EQUILIBRATION_PASSES: usize = 8;

/// Ruiz equilibration of the LMI data. Each block is replaced by `D F D` with a
/// positive diagonal `D`, which preserves definiteness, and each free direction
/// is rescaled. Returns the column scales: the original coordinate is `scale * w`.
fn equilibrate(f0: &mut [DMatrix<f64>], cols: &mut [Entries]) -> Vec<f64> {
    let mut scale = vec![1.0; cols.len()];
    for _ in 0..EQUILIBRATION_PASSES {
        let mut row_max: Vec<Vec<f64>> = f0.iter().map(|m| vec![0.0f64; m.nrows()]).collect();
        for (b, m) in f0.iter().enumerate() {
            for j in 0..m.ncols() {
                for i in 0..m.nrows() {
                    row_max[b][i] = row_max[b][i].max(m[(i, j)].abs());
                }
            }
        }
        for col in cols.iter() {
            for &(b, i, _, v) in col {
                row_max[b][i] = row_max[b][i].max(v.abs());
            }
        }
        let d: Vec<Vec<f64>> = row_max
            .iter()
            .map(|r| r.iter().map(|&x| if x > 0.0 { 1.0 / x.sqrt() } else { 1.0 }).collect())
            .collect();
        for (b, m) in f0.iter_mut().enumerate() {
            for j in 0..m.ncols() {
                for i in 0..m.nrows() {
                    m[(i, j)] *= d[b][i] * d[b][j];
                }
            }
        }
        for (col, s) in cols.iter_mut().zip(scale.iter_mut()) {
            let mut cmax = 0.0f64;
            for e in col.iter_mut() {
                e.3 *= d[e.0][e.1] * d[e.0][e.2];
                cmax = cmax.max(e.3.abs());
            }
            if cmax > 0.0 {
                for e in col.iter_mut() {
                    e.3 /= cmax;
                }
                *s /= cmax;
            }
        }
    }
    scale
}

fn symmetrize_upper(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            m[(i, j)] = m[(j, i)];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::soscompile::{EqRow, PsdBlock};

    #[test]
    fn lifted_points_satisfy_equalities() {
        // Q (2x2) with q11 + q22 = 1 and a decision variable d with q12 - d = 0.5, d + 0 = 0.25.
        let inst = SdpInstance {
            nvars: 4,
            blocks: vec![PsdBlock {
                name: "q".into(),
                size: 2,
                constant: Vec::new(),
                linear: vec![(0, 0, 0, 1.0), (1, 0, 1, 1.0), (2, 1, 1, 1.0)],
            }],
            eqs: vec![
                EqRow {
                    terms: vec![(0, 1.0), (2, 1.0)],
                    rhs: 1.0,
                },
                EqRow {
                    terms: vec![(1, 1.0), (3, -1.0)],
                    rhs: 0.5,
                },
                EqRow {
                    terms: vec![(3, 2.0)],
                    rhs: 0.5,
                },
            ],
            ..Default::default()
        };
        let red = reduce(&inst).unwrap();
        assert_eq!(red.dim(), 1);
        for w in [-2.0, 0.0, 3.5] {
            let v = red.lift(&[w]);
            for row in &inst.eqs {
                assert!(row.residual(&v).abs() < 1e-12);
            }
            let direct = inst.blocks[0].eval(&v);
            let reduced = &red.eval(&[w])[0];
            assert!((direct - reduced).amax() < 1e-12);
        }
    }

    #[test]
    fn inconsistent_rows_are_structurally_infeasible() {
        let inst = SdpInstance {
            nvars: 2,
            eqs: vec![
                EqRow {
                    terms: vec![(0, 1.0), (1, 1.0)],
                    rhs: 1.0,
                },
                EqRow {
                    terms: vec![(0, 2.0), (1, 2.0)],
                    rhs: 3.0,
                },
            ],
            ..Default::default()
        };
        assert!(matches!(
            check_equalities(&inst),
            Err(Error::StructuralInfeasibility { .. })
        ));
    }
}

//! Sparse SDPA text format.
//!
//! The writer emits the primal form `F(v) = sum_k v_k F_k - F0 >= 0`. Each
//! equality row becomes two adjacent entries of a trailing diagonal block,
//! `a.v - b >= 0` and `b - a.v >= 0`; the reader folds such pairs back.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::sdp::{EqRow, PsdBlock, SdpInstance, VarSlice};
use crate::error::{Error, Result};

pub fn to_sdpa_string(inst: &SdpInstance) -> String {
    let mut out = String::new();
    let neq = inst.eqs.len();
    let mut sizes: Vec<i64> = inst.blocks.iter().map(|b| b.size as i64).collect();
    if neq > 0 {
        sizes.push(-2 * neq as i64);
    }
    let _ = writeln!(
        out,
        "\"polystab SDP: {} vars, {} blocks, {} equalities",
        inst.nvars,
        inst.blocks.len(),
        neq
    );
    let _ = writeln!(out, "{}", inst.nvars);
    let _ = writeln!(out, "{}", sizes.len());
    let _ = writeln!(
        out,
        "{}",
        sizes.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(" ")
    );
    let mut c = vec![0.0; inst.nvars];
    for &(k, v) in &inst.objective {
        c[k] += v;
    }
    let _ = writeln!(
        out,
        "{}",
        c.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(" ")
    );

    for (b, block) in inst.blocks.iter().enumerate() {
        for &(i, j, v) in &block.constant {
            if v != 0.0 {
                let _ = writeln!(out, "0 {} {} {} {:e}", b + 1, i + 1, j + 1, -v);
            }
        }
        for &(k, i, j, v) in &block.linear {
            if v != 0.0 {
                let _ = writeln!(out, "{} {} {} {} {:e}", k + 1, b + 1, i + 1, j + 1, v);
            }
        }
    }
    if neq > 0 {
        let b = inst.blocks.len() + 1;
        for (r, row) in inst.eqs.iter().enumerate() {
            let (lo, hi) = (2 * r + 1, 2 * r + 2);
            if row.rhs != 0.0 {
                let _ = writeln!(out, "0 {b} {lo} {lo} {:e}", row.rhs);
                let _ = writeln!(out, "0 {b} {hi} {hi} {:e}", -row.rhs);
            }
            for &(k, v) in &row.terms {
                let _ = writeln!(out, "{} {b} {lo} {lo} {:e}", k + 1, v);
                let _ = writeln!(out, "{} {b} {hi} {hi} {:e}", k + 1, -v);
            }
        }
    }
    out
}

pub fn write_sdpa(inst: &SdpInstance, path: &Path) -> Result<()> {
    std::fs::write(path, to_sdpa_string(inst))?;
    Ok(())
}

fn bad(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Format(format!("SDPA line {line}: {msg}"))
}

/// Parses sparse SDPA. The decision vector is exposed as a single slice `v`.
pub fn parse_sdpa(text: &str) -> Result<SdpInstance> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('"') && !l.starts_with('*'));
    let clean = |s: &str| s.replace([',', '{', '}', '(', ')'], " ");
    let mut next = |what: &str| {
        lines
            .next()
            .ok_or_else(|| Error::Format(format!("SDPA: missing {what}")))
    };

    let (ln, l) = next("variable count")?;
    let nvars: usize = clean(l)
        .split_whitespace()
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| bad(ln, "expected variable count"))?;
    let (ln, l) = next("block count")?;
    let nblocks: usize = clean(l)
        .split_whitespace()
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| bad(ln, "expected block count"))?;
    let (ln, l) = next("block structure")?;
    let sizes: Vec<i64> = clean(l)
        .split_whitespace()
        .take(nblocks)
        .map(|t| t.parse().map_err(|_| bad(ln, format!("bad block size '{t}'"))))
        .collect::<Result<_>>()?;
    if sizes.len() != nblocks || sizes.contains(&0) {
        return Err(bad(ln, "block structure does not match block count"));
    }
    let (ln, l) = next("objective")?;
    let c: Vec<f64> = clean(l)
        .split_whitespace()
        .take(nvars)
        .map(|t| t.parse().map_err(|_| bad(ln, format!("bad objective entry '{t}'"))))
        .collect::<Result<_>>()?;
    if c.len() != nvars {
        return Err(bad(ln, "objective length does not match variable count"));
    }

    let mut blocks: Vec<PsdBlock> = sizes
        .iter()
        .enumerate()
        .map(|(b, &s)| PsdBlock {
            name: format!("block{}", b + 1),
            size: s.unsigned_abs() as usize,
            constant: Vec::new(),
            linear: Vec::new(),
        })
        .collect();
    for (ln, l) in lines {
        let toks: Vec<String> = clean(l).split_whitespace().map(str::to_string).collect();
        if toks.len() < 5 {
            return Err(bad(ln, "expected 'matno block i j value'"));
        }
        let int = |t: &str| t.parse::<usize>().map_err(|_| bad(ln, format!("bad index '{t}'")));
        let (k, b, i, j) = (int(&toks[0])?, int(&toks[1])?, int(&toks[2])?, int(&toks[3])?);
        let v: f64 = toks[4]
            .parse()
            .map_err(|_| bad(ln, format!("bad value '{}'", toks[4])))?;
        if k > nvars || b == 0 || b > nblocks {
            return Err(bad(ln, "index out of range"));
        }
        let size = blocks[b - 1].size;
        if i == 0 || j == 0 || i > size || j > size || (sizes[b - 1] < 0 && i != j) {
            return Err(bad(ln, "entry outside block"));
        }
        let (i, j) = if i <= j { (i - 1, j - 1) } else { (j - 1, i - 1) };
        if k == 0 {
            blocks[b - 1].constant.push((i, j, -v));
        } else {
            blocks[b - 1].linear.push((k - 1, i, j, v));
        }
    }

    let mut inst = SdpInstance {
        nvars,
        objective: c
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(k, &v)| (k, v))
            .collect(),
        layout: vec![VarSlice {
            name: "v".into(),
            start: 0,
            len: nvars,
        }],
        ..Default::default()
    };
    for (block, &s) in blocks.into_iter().zip(&sizes) {
        if s > 0 {
            inst.blocks.push(block);
            continue;
        }
        // Diagonal block: one affine scalar per index.
        let mut rows: Vec<(f64, BTreeMap<usize, f64>)> = vec![(0.0, BTreeMap::new()); block.size];
        for &(i, _, v) in &block.constant {
            rows[i].0 += v;
        }
        for &(k, i, _, v) in &block.linear {
            *rows[i].1.entry(k).or_insert(0.0) += v;
        }
        let negated = |a: &(f64, BTreeMap<usize, f64>), b: &(f64, BTreeMap<usize, f64>)| {
            a.0 == -b.0 && a.1.len() == b.1.len() && a.1.iter().all(|(k, v)| b.1.get(k) == Some(&-v))
        };
        let mut idx = 0;
        while idx < rows.len() {
            if idx + 1 < rows.len() && negated(&rows[idx], &rows[idx + 1]) {
                let (c0, terms) = &rows[idx];
                inst.eqs.push(EqRow {
                    terms: terms.iter().map(|(&k, &v)| (k, v)).collect(),
                    rhs: -c0,
                });
                idx += 2;
            } else {
                let (c0, terms) = &rows[idx];
                inst.blocks.push(PsdBlock {
                    name: format!("{}[{}]", block.name, idx + 1),
                    size: 1,
                    constant: if *c0 != 0.0 { vec![(0, 0, *c0)] } else { Vec::new() },
                    linear: terms.iter().map(|(&k, &v)| (k, 0, 0, v)).collect(),
                });
                idx += 1;
            }
        }
    }
    Ok(inst)
}

pub fn read_sdpa(path: &Path) -> Result<SdpInstance> {
    parse_sdpa(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SdpInstance {
        SdpInstance {
            nvars: 3,
            blocks: vec![PsdBlock {
                name: "b".into(),
                size: 2,
                constant: vec![(0, 0, 1.5), (0, 1, -0.25)],
                linear: vec![(0, 0, 0, 1.0), (1, 0, 1, 2.0), (2, 1, 1, 0.1)],
            }],
            eqs: vec![
                EqRow {
                    terms: vec![(0, 1.0), (2, -3.0)],
                    rhs: 0.7,
                },
                EqRow {
                    terms: vec![(1, 1.0)],
                    rhs: 0.0,
                },
            ],
            objective: vec![(2, 1.0)],
            layout: Vec::new(),
            gram: Vec::new(),
        }
    }

    #[test]
    fn roundtrip_preserves_blocks_and_equalities() {
        let inst = sample();
        let back = parse_sdpa(&to_sdpa_string(&inst)).unwrap();
        assert_eq!(back.nvars, 3);
        assert_eq!(back.blocks.len(), 1);
        assert_eq!(back.eqs, inst.eqs);
        assert_eq!(back.objective, inst.objective);
        let v = [0.3, -1.0, 2.0];
        assert_eq!(back.blocks[0].eval(&v), inst.blocks[0].eval(&v));
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(parse_sdpa("2\n1\n2\n1 0\n1 1 3 1 1.0\n").is_err());
        assert!(parse_sdpa("2\n1\n").is_err());
    }
}

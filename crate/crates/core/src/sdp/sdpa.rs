//! SDPA sparse format (`.dat-s`).
//!
//! Layout: `m`, the number of blocks, the signed block sizes, the `m`-vector,
//! then one `matno blkno i j value` line per stored upper-triangular entry
//! with 1-based indices. `matno 0` is the matrix maximized by the SDPA dual
//! form, which is `-C` for our minimization form; constraint matrices are
//! written as-is. Entries are ordered by `(matno, blkno, i, j)` and numbers
//! use the shortest representation that round-trips exactly.
//!
//! On import, lines starting with `"` or `*` are comments and the separators
//! `, { } ( )` are treated as whitespace.

use std::fmt::Write as _;

use super::{SdpProblem, SparseSym};
use crate::error::{Result, SsosError};

pub fn export_sdpa(p: &SdpProblem) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{}", p.n_constraints());
    let _ = writeln!(out, "{}", p.n_blocks());
    let sizes: Vec<String> = p.block_sizes.iter().map(i64::to_string).collect();
    let _ = writeln!(out, "{}", sizes.join(" "));
    let b: Vec<String> = p.b.iter().map(|v| fmt_f64(*v)).collect();
    let _ = writeln!(out, "{}", b.join(" "));
    let mut write_mat = |matno: usize, m: &SparseSym, sign: f64| {
        let mut m = m.clone();
        m.canonicalize();
        for e in m.entries() {
            let _ = writeln!(
                out,
                "{} {} {} {} {}",
                matno,
                e.block + 1,
                e.row + 1,
                e.col + 1,
                fmt_f64(sign * e.value)
            );
        }
    };
    write_mat(0, &p.c, -1.0);
    for (i, a) in p.constraints.iter().enumerate() {
        write_mat(i + 1, a, 1.0);
    }
    out
}

fn fmt_f64(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else {
        v.to_string()
    }
}

pub fn import_sdpa(text: &str) -> Result<SdpProblem> {
    // (line number, token)
    let mut toks: Vec<(usize, String)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim_start();
        if t.starts_with('"') || t.starts_with('*') {
            continue;
        }
        let cleaned: String = line
            .chars()
            .map(|c| {
                if matches!(c, ',' | '{' | '}' | '(' | ')') {
                    ' '
                } else {
                    c
                }
            })
            .collect();
        for tok in cleaned.split_whitespace() {
            toks.push((i + 1, tok.to_string()));
        }
    }
    let mut it = toks.into_iter();
    let mut next = |what: &str| -> Result<(usize, String)> {
        it.next()
            .ok_or_else(|| SsosError::parse(0, format!("unexpected end of input reading {what}")))
    };
    fn int<T: std::str::FromStr>(tok: (usize, String)) -> Result<T> {
        tok.1
            .parse::<T>()
            .map_err(|_| SsosError::parse(tok.0, format!("expected integer, found `{}`", tok.1)))
    }
    fn float(tok: (usize, String)) -> Result<f64> {
        tok.1
            .parse::<f64>()
            .map_err(|_| SsosError::parse(tok.0, format!("expected number, found `{}`", tok.1)))
    }
    let m: usize = int(next("m")?)?;
    let nblocks: usize = int(next("block count")?)?;
    let mut sizes = Vec::with_capacity(nblocks);
    for _ in 0..nblocks {
        let s: i64 = int(next("block size")?)?;
        if s == 0 {
            return Err(SsosError::parse(0, "zero block size"));
        }
        sizes.push(s);
    }
    let mut p = SdpProblem::new(sizes);
    for _ in 0..m {
        p.b.push(float(next("b vector")?)?);
    }
    p.constraints = vec![SparseSym::new(); m];
    let rest: Vec<(usize, String)> = it.collect();
    if !rest.len().is_multiple_of(5) {
        return Err(SsosError::parse(
            rest.last().map(|t| t.0).unwrap_or(0),
            "entry lines must have 5 fields",
        ));
    }
    for chunk in rest.chunks(5) {
        let line = chunk[0].0;
        let matno: usize = int(chunk[0].clone())?;
        let blk: usize = int(chunk[1].clone())?;
        let i: usize = int(chunk[2].clone())?;
        let j: usize = int(chunk[3].clone())?;
        let v = float(chunk[4].clone())?;
        if matno > m || blk == 0 || blk > nblocks || i == 0 || j == 0 {
            return Err(SsosError::parse(line, "entry index out of range"));
        }
        if matno == 0 {
            p.c.add(blk - 1, i - 1, j - 1, -v);
        } else {
            p.constraints[matno - 1].add(blk - 1, i - 1, j - 1, v);
        }
    }
    p.canonicalize();
    p.validate()?;
    Ok(p)
}

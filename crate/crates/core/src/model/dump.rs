//! Plain-text dump of an assembled problem.
//!
//! Line-oriented and sorted, so two dumps can be compared with `diff`:
//!
//! ```text
//! qp vars <n> eq <m_eq> le <m_le> binaries <k>
//! col <j> <label> <lower> <upper> <cost> [bin]
//! quad <i> <j> <value>            (upper triangle, i <= j)
//! eq <r> <tag> <rhs> | <col>:<coef> <col>:<coef> ...
//! le <r> <tag> <rhs> | <col>:<coef> ...
//! ```
//!
//! Numbers use Rust's shortest round-trip formatting; infinite bounds print as
//! `inf` / `-inf`. Without a [`VarMap`] the label column is `x<j>`.

use std::io::{self, Write};

use super::{QpProblem, VarMap};
use crate::sparse::CsrMatrix;

pub fn write_dump<W: Write>(p: &QpProblem, map: Option<&VarMap>, mut w: W) -> io::Result<()> {
    writeln!(
        w,
        "qp vars {} eq {} le {} binaries {}",
        p.num_vars(),
        p.eq.nrows(),
        p.ineq.nrows(),
        p.binaries.len()
    )?;
    let mut is_bin = vec![false; p.num_vars()];
    for &b in &p.binaries {
        is_bin[b] = true;
    }
    for j in 0..p.num_vars() {
        let label = map.map_or_else(|| format!("x{j}"), |m| m.label(j));
        write!(w, "col {j} {label} {} {} {}", p.lower[j], p.upper[j], p.linear[j])?;
        if is_bin[j] {
            write!(w, " bin")?;
        }
        writeln!(w)?;
    }
    for j in 0..p.quad.ncols {
        for (i, v) in p.quad.col(j) {
            if i <= j {
                writeln!(w, "quad {i} {j} {v}")?;
            }
        }
    }
    rows(&mut w, "eq", &p.eq, &p.eq_rhs, &p.eq_tags)?;
    rows(&mut w, "le", &p.ineq, &p.ineq_rhs, &p.ineq_tags)?;
    Ok(())
}

fn rows<W: Write>(w: &mut W, kind: &str, a: &CsrMatrix, rhs: &[f64], tags: &[super::RowTag]) -> io::Result<()> {
    for r in 0..a.nrows() {
        write!(w, "{kind} {r} {} {} |", tags[r], rhs[r])?;
        for (c, v) in a.row(r) {
            write!(w, " {c}:{v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

//! Export to the SDPA sparse format (`.dat-s`).
//!
//! SDPA states the primal as `min Σ c_k x_k` subject to
//! `Σ x_k F_k − F_0 ⪰ 0` over block-diagonal matrices. The lowered real
//! conic form maps onto it directly: each LMI becomes one block with
//! `F_0 = −(LMI constant)`, and the equalities `A x = b` become two
//! diagonal blocks, `A x − b ≥ 0` and `b − A x ≥ 0`. Maximizations are
//! exported with the objective negated.
//!
//! Layout:
//!
//! ```text
//! "comment
//! <number of variables>
//! <number of blocks>
//! <block sizes; negative for diagonal blocks>
//! <c_1 ... c_n>
//! <matrix> <block> <row> <col> <value>     (1-based, row <= col, matrix 0 is F_0)
//! ```

use std::fmt::Write;

use super::lower::lower;
use super::problem::SdpProblem;

fn fmt_value(v: f64) -> String {
    format!("{v:.17e}")
}

/// Serializes the problem in SDPA sparse format.
pub fn to_sdpa(p: &SdpProblem) -> crate::Result<String> {
    p.validate()?;
    let form = lower(p);
    let rows = form.a.nrows();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "\"qsdp export: {} variables, {} LMI blocks, {} equalities{}",
        form.n,
        form.cones.len(),
        rows,
        if form.sign < 0.0 {
            ", objective negated"
        } else {
            ""
        }
    );
    let _ = writeln!(out, "{}", form.n);
    let eq_blocks = if rows > 0 { 2 } else { 0 };
    let _ = writeln!(out, "{}", form.cones.len() + eq_blocks);
    let mut sizes: Vec<String> = form.cones.iter().map(|c| c.size.to_string()).collect();
    if rows > 0 {
        sizes.push(format!("-{rows}"));
        sizes.push(format!("-{rows}"));
    }
    let _ = writeln!(out, "{}", sizes.join(" "));
    let cvals: Vec<String> = form.c.iter().map(|&v| fmt_value(v)).collect();
    let _ = writeln!(out, "{}", cvals.join(" "));

    for (bi, cone) in form.cones.iter().enumerate() {
        let blk = bi + 1;
        for r in 0..cone.size {
            for c in r..cone.size {
                let v = cone.f0[(r, c)];
                if v != 0.0 {
                    let _ = writeln!(out, "0 {blk} {} {} {}", r + 1, c + 1, fmt_value(-v));
                }
            }
        }
        for (k, trip) in &cone.cols {
            for &(r, c, v) in trip {
                if r <= c {
                    let _ = writeln!(out, "{} {blk} {} {} {}", k + 1, r + 1, c + 1, fmt_value(v));
                }
            }
        }
    }
    if rows > 0 {
        let (pos, neg) = (form.cones.len() + 1, form.cones.len() + 2);
        for i in 0..rows {
            let b = form.b[i];
            if b != 0.0 {
                let _ = writeln!(out, "0 {pos} {} {} {}", i + 1, i + 1, fmt_value(b));
                let _ = writeln!(out, "0 {neg} {} {} {}", i + 1, i + 1, fmt_value(-b));
            }
            for k in 0..form.n {
                let v = form.a[(i, k)];
                if v != 0.0 {
                    let _ = writeln!(out, "{} {pos} {} {} {}", k + 1, i + 1, i + 1, fmt_value(v));
                    let _ = writeln!(out, "{} {neg} {} {} {}", k + 1, i + 1, i + 1, fmt_value(-v));
                }
            }
        }
    }
    Ok(out)
}

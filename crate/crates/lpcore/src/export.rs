//! Plain-text LP-format export for cross-checking models against external
//! solvers. Numbers are written in fixed-point decimal with 12 significant
//! digits.

use std::fmt::Write as _;

use crate::problem::{MixedIntegerProgram, Sense};

/// Formats `v` in fixed-point decimal with `sig` significant digits.
fn fmt_fixed(v: f64, sig: usize) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let mag = v.abs().log10().floor() as i32;
    let decimals = (sig as i32 - 1 - mag).clamp(0, 60) as usize;
    let mut s = format!("{v:.decimals$}");
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    s
}

fn var_name(j: usize) -> String {
    format!("x{j}")
}

/// Renders the program in LP interchange format.
pub fn write_lp_format(mip: &MixedIntegerProgram) -> String {
    let lp = &mip.lp;
    let mut out = String::new();
    out.push_str("\\ generated by lpcore\nMinimize\n obj:");
    let mut first = true;
    for (j, &c) in lp.objective.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        let sign = if c < 0.0 { " - " } else if first { " " } else { " + " };
        let _ = write!(out, "{}{} {}", sign, fmt_fixed(c.abs(), 12), var_name(j));
        first = false;
    }
    if first {
        out.push_str(" 0 x0");
    }
    if lp.objective_offset != 0.0 {
        let off = lp.objective_offset;
        let sign = if off < 0.0 { " - " } else { " + " };
        let _ = write!(out, "{}{}", sign, fmt_fixed(off.abs(), 12));
    }
    out.push_str("\nSubject To\n");
    let cols = rows_of(lp);
    for (i, row) in cols.iter().enumerate() {
        let _ = write!(out, " c{i}:");
        let mut first = true;
        for &(j, v) in row {
            let sign = if v < 0.0 { " - " } else if first { " " } else { " + " };
            let _ = write!(out, "{}{} {}", sign, fmt_fixed(v.abs(), 12), var_name(j));
            first = false;
        }
        if first {
            out.push_str(" 0 x0");
        }
        let op = match lp.senses[i] {
            Sense::Eq => "=",
            Sense::Le => "<=",
            Sense::Ge => ">=",
        };
        let _ = writeln!(out, " {} {}", op, fmt_fixed(lp.rhs[i], 12));
    }
    out.push_str("Bounds\n");
    for (j, b) in lp.bounds.iter().enumerate() {
        let name = var_name(j);
        match (b.lower.is_finite(), b.upper.is_finite()) {
            (true, true) => {
                let _ = writeln!(
                    out,
                    " {} <= {} <= {}",
                    fmt_fixed(b.lower, 12),
                    name,
                    fmt_fixed(b.upper, 12)
                );
            }
            (true, false) => {
                let _ = writeln!(out, " {} >= {}", name, fmt_fixed(b.lower, 12));
            }
            (false, true) => {
                let _ = writeln!(out, " -inf <= {} <= {}", name, fmt_fixed(b.upper, 12));
            }
            (false, false) => {
                let _ = writeln!(out, " {} free", name);
            }
        }
    }
    let ints: Vec<usize> = mip
        .integer
        .iter()
        .enumerate()
        .filter_map(|(j, &b)| b.then_some(j))
        .collect();
    if !ints.is_empty() {
        out.push_str("General\n");
        for j in ints {
            let _ = writeln!(out, " {}", var_name(j));
        }
    }
    out.push_str("End\n");
    out
}

fn rows_of(lp: &crate::problem::LinearProgram) -> Vec<Vec<(usize, f64)>> {
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); lp.num_rows()];
    for &(r, c, v) in &lp.entries {
        rows[r].push((c, v));
    }
    for row in rows.iter_mut() {
        row.sort_by_key(|&(c, _)| c);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
        for &(c, v) in row.iter() {
            match merged.last_mut() {
                Some(last) if last.0 == c => last.1 += v,
                _ => merged.push((c, v)),
            }
        }
        merged.retain(|&(_, v)| v != 0.0);
        *row = merged;
    }
    rows
}

//! Fixed-format MPS export for cross-checking models in other solvers.
//!
//! Rows and columns get short generated names (`R0000001`, `C0000001`); the
//! model's own tags are listed in comment lines so a reader can map back.

use std::fmt::Write as _;

use gridbid_core::lp::{LpModel, Relation};

fn row_name(i: usize) -> String {
    format!("R{:07}", i + 1)
}

fn col_name(j: usize) -> String {
    format!("C{:07}", j + 1)
}

/// Shortest text for `v` that fits the 12-character value field.
fn num(v: f64) -> String {
    let plain = format!("{v}");
    if plain.len() <= 12 {
        return plain;
    }
    (0..=10).rev().map(|p| format!("{v:.p$E}")).find(|s| s.len() <= 12).unwrap_or_else(|| format!("{v:.0E}"))
}

fn field_line(out: &mut String, code: &str, name: &str, entries: &[(String, f64)]) {
    // columns: 2-3 code, 5-12 name, 15-22 first entry, 25-36 value, 40-47 and 50-61 for the second pair
    let mut line = format!(" {code:<2} {name:<8}");
    for (i, (n, v)) in entries.iter().enumerate() {
        if i == 0 {
            let _ = write!(line, "  {n:<8}  {:>12}", num(*v));
        } else {
            let _ = write!(line, "   {n:<8}  {:>12}", num(*v));
        }
    }
    out.push_str(line.trim_end());
    out.push('\n');
}

/// Renders `model` as fixed MPS text (minimization).
pub fn to_mps(model: &LpModel, name: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "* {} rows, {} columns, {} nonzeros", model.num_rows(), model.num_vars(), model.nnz());
    for (i, row) in model.rows().iter().enumerate() {
        let _ = writeln!(out, "* {} {}", row_name(i), row.tag);
    }
    for (j, var) in model.vars().iter().enumerate() {
        let _ = writeln!(out, "* {} {}", col_name(j), var.name);
    }
    let _ = writeln!(out, "NAME          {}", name.chars().filter(|c| !c.is_whitespace()).take(8).collect::<String>());
    out.push_str("ROWS\n N  COST\n");
    for (i, row) in model.rows().iter().enumerate() {
        let code = match row.relation {
            Relation::Le => "L",
            Relation::Ge => "G",
            Relation::Eq => "E",
        };
        let _ = writeln!(out, " {code}  {}", row_name(i));
    }

    let mut columns: Vec<Vec<(usize, f64)>> = vec![Vec::new(); model.num_vars()];
    for (i, row) in model.rows().iter().enumerate() {
        for &(v, a) in &row.coeffs {
            columns[v.0].push((i, a));
        }
    }
    out.push_str("COLUMNS\n");
    for (j, var) in model.vars().iter().enumerate() {
        let mut entries: Vec<(String, f64)> = Vec::new();
        if var.cost != 0.0 {
            entries.push(("COST".into(), var.cost));
        }
        let mut merged: Vec<(usize, f64)> = Vec::new();
        for &(i, a) in &columns[j] {
            match merged.last_mut() {
                Some(last) if last.0 == i => last.1 += a,
                _ => merged.push((i, a)),
            }
        }
        entries.extend(merged.into_iter().map(|(i, a)| (row_name(i), a)));
        for pair in entries.chunks(2) {
            field_line(&mut out, "", &col_name(j), pair);
        }
    }
    out.push_str("RHS\n");
    for (i, row) in model.rows().iter().enumerate() {
        if row.rhs != 0.0 {
            field_line(&mut out, "", "RHS", &[(row_name(i), row.rhs)]);
        }
    }
    out.push_str("BOUNDS\n");
    for (j, var) in model.vars().iter().enumerate() {
        let c = col_name(j);
        let (lo, hi) = (var.lower, var.upper);
        if lo == hi {
            field_line(&mut out, "FX", "BND", &[(c, lo)]);
            continue;
        }
        match (lo.is_finite(), hi.is_finite()) {
            (false, false) => field_line(&mut out, "FR", "BND", &[(c, 0.0)]),
            (false, true) => {
                field_line(&mut out, "MI", "BND", &[(c.clone(), 0.0)]);
                field_line(&mut out, "UP", "BND", &[(c, hi)]);
            }
            (true, _) => {
                if lo != 0.0 {
                    field_line(&mut out, "LO", "BND", &[(c.clone(), lo)]);
                }
                if hi.is_finite() {
                    field_line(&mut out, "UP", "BND", &[(c, hi)]);
                }
            }
        }
    }
    out.push_str("ENDATA\n");
    out
}

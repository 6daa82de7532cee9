//! MATPOWER `.m` case import.
//!
//! Only the tables the DC market model needs are read: `mpc.baseMVA`,
//! `mpc.bus`, `mpc.gen`, `mpc.branch` and `mpc.gencost`. Out-of-service
//! generators and branches are dropped. Costs are linearized to the marginal
//! cost at the middle of each generator's output range.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use gridbid_core::grid::{Bus, ConventionalUnit, GridCase, LoadPoint, Line};
use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Raw numeric tables of a MATPOWER case, rows in file order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MatpowerCase {
    pub base_mva: f64,
    pub bus: Vec<Vec<f64>>,
    pub gen: Vec<Vec<f64>>,
    pub branch: Vec<Vec<f64>>,
    pub gencost: Vec<Vec<f64>>,
}

fn strip_comment(line: &str) -> &str {
    // '%' never appears inside the quoted strings of case files we read
    match line.find('%') {
        Some(i) => &line[..i],
        None => line,
    }
}

fn parse_number(tok: &str, what: &str) -> Result<f64, String> {
    match tok {
        "Inf" | "inf" => Ok(f64::INFINITY),
        "-Inf" | "-inf" => Ok(f64::NEG_INFINITY),
        _ => tok.parse::<f64>().map_err(|_| format!("bad number {tok:?} in {what}")),
    }
}

/// Parses the text of a MATPOWER case file.
pub fn parse_matpower(text: &str) -> Result<MatpowerCase, String> {
    let code: String = text.lines().map(strip_comment).collect::<Vec<_>>().join("\n");
    let mut scalars = BTreeMap::new();
    let mut tables: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();
    let mut rest = code.as_str();
    while let Some(pos) = rest.find("mpc.") {
        rest = &rest[pos + 4..];
        let name_end = rest.find(|c: char| !(c.is_alphanumeric() || c == '_')).unwrap_or(rest.len());
        let name = rest[..name_end].to_string();
        let after = rest[name_end..].trim_start();
        let Some(after) = after.strip_prefix('=') else { continue };
        let after = after.trim_start();
        if let Some(body) = after.strip_prefix('[') {
            let end = body.find(']').ok_or_else(|| format!("unterminated matrix mpc.{name}"))?;
            let mut rows = Vec::new();
            for row in body[..end].split([';', '\n']) {
                let toks: Vec<&str> = row.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()).collect();
                if toks.is_empty() {
                    continue;
                }
                rows.push(toks.iter().map(|t| parse_number(t, &format!("mpc.{name}"))).collect::<Result<Vec<_>, _>>()?);
            }
            tables.insert(name, rows);
            rest = &body[end + 1..];
        } else {
            let end = after.find(';').unwrap_or(after.len());
            let value = after[..end].trim();
            if !value.starts_with('\'') {
                scalars.insert(name, parse_number(value, "scalar")?);
            }
            rest = &after[end..];
        }
    }
    let mut take = |name: &str, min_cols: usize| -> Result<Vec<Vec<f64>>, String> {
        let rows = tables.remove(name).ok_or_else(|| format!("missing mpc.{name}"))?;
        if let Some((i, _)) = rows.iter().enumerate().find(|(_, r)| r.len() < min_cols) {
            return Err(format!("mpc.{name} row {} has fewer than {min_cols} columns", i + 1));
        }
        Ok(rows)
    };
    Ok(MatpowerCase {
        base_mva: scalars.get("baseMVA").copied().unwrap_or(100.0),
        bus: take("bus", 13)?,
        gen: take("gen", 10)?,
        branch: take("branch", 11)?,
        gencost: take("gencost", 4)?,
    })
}

/// Settings for turning MATPOWER tables into a market case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportOptions {
    /// Real-time upward price as a multiple of the day-ahead price.
    pub up_factor: f64,
    /// Real-time downward price as a multiple of the day-ahead price.
    pub down_factor: f64,
    pub voll: f64,
    /// Rating used when `rateA` is 0 (MATPOWER's "unlimited").
    pub unlimited_rating_mw: f64,
}

impl Default for ImportOptions {
    fn default() -> Self {
        ImportOptions { up_factor: 1.5, down_factor: 0.7, voll: 1000.0, unlimited_rating_mw: 9900.0 }
    }
}

/// Marginal cost at `p` of a MATPOWER cost row.
fn marginal_cost(row: &[f64], p_lo: f64, p_hi: f64) -> Result<f64, String> {
    let model = row[0] as i64;
    let n = row[3] as usize;
    match model {
        2 => {
            let coeffs = row.get(4..4 + n).ok_or("gencost row shorter than its n")?;
            // coefficients run from the highest power down to the constant
            let p = 0.5 * (p_lo + p_hi);
            Ok(coeffs.iter().enumerate().map(|(i, &c)| {
                let power = (n - 1 - i) as i32;
                if power == 0 { 0.0 } else { c * power as f64 * p.powi(power - 1) }
            }).sum())
        }
        1 => {
            let pts = row.get(4..4 + 2 * n).ok_or("gencost row shorter than its n")?;
            if n < 2 {
                return Err("piecewise-linear cost needs two points".into());
            }
            let (x0, y0, x1, y1) = (pts[0], pts[1], pts[2 * n - 2], pts[2 * n - 1]);
            if x1 <= x0 {
                return Err("piecewise-linear cost points are not increasing".into());
            }
            Ok((y1 - y0) / (x1 - x0))
        }
        m => Err(format!("unknown cost model {m}")),
    }
}

impl MatpowerCase {
    /// Builds a case without renewable units; add them with
    /// [`GridCase::vres_units`] afterwards.
    pub fn to_grid_case(&self, opts: &ImportOptions) -> Result<GridCase, String> {
        let buses: Vec<Bus> = self.bus.iter().map(|r| Bus { id: r[0] as usize, name: format!("{}", r[0] as usize) }).collect();
        let reference = self.bus.iter().find(|r| r[1] as i64 == 3).map(|r| r[0] as usize);
        let loads: Vec<LoadPoint> = self
            .bus
            .iter()
            .filter(|r| r[2] > 0.0)
            .map(|r| LoadPoint { bus: r[0] as usize, demand_mw: r[2] })
            .collect();
        if self.gencost.len() < self.gen.len() {
            return Err(format!("{} generators but {} cost rows", self.gen.len(), self.gencost.len()));
        }
        let mut units = Vec::new();
        for (g, cost) in self.gen.iter().zip(&self.gencost) {
            if g[7] <= 0.0 {
                continue;
            }
            let (p_max, p_min) = (g[8], g[9].max(0.0));
            let c = marginal_cost(cost, p_min, p_max)?;
            units.push(ConventionalUnit {
                bus: g[0] as usize,
                cost_da: c,
                cost_up: c * opts.up_factor,
                cost_down: c * opts.down_factor,
                p_max,
                p_min,
            });
        }
        let lines = self
            .branch
            .iter()
            .filter(|r| r[10] > 0.0)
            .map(|r| {
                let tap = if r[8] == 0.0 { 1.0 } else { r[8] };
                Line {
                    from_bus: r[0] as usize,
                    to_bus: r[1] as usize,
                    reactance_pu: r[3] * tap,
                    capacity_mw: if r[5] > 0.0 { r[5] } else { opts.unlimited_rating_mw },
                }
            })
            .collect();
        GridCase::from_labeled(buses, lines, units, Vec::new(), loads, opts.voll, reference).map_err(|e| e.to_string())
    }
}

/// Reads a MATPOWER file into a market case (no renewable units).
pub fn import_matpower(path: impl AsRef<Path>, opts: &ImportOptions) -> Result<GridCase, Error> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parsed = parse_matpower(&text).map_err(|message| Error::Parse { path: path.into(), message })?;
    parsed.to_grid_case(opts).map_err(|message| Error::Parse { path: path.into(), message })
}

//! Comma-separated tables with `#` comment lines and a header row.

use std::collections::HashMap;

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub theta: f64,
    pub t: u32,
    pub z_mean: f64,
    pub z_typ: f64,
    pub se: f64,
    pub pool_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateRow {
    pub t: u32,
    pub theta: f64,
    pub z_hat: f64,
    pub se: f64,
    pub n_circuits: usize,
    pub n_shots: usize,
}

pub const CURVE_COLUMNS: &str = "theta,t,z_mean,z_typ,se,pool_size";
pub const ESTIMATE_COLUMNS: &str = "t,theta,z_hat,se,n_circuits,n_shots";

/// Rows as maps from column name to field, with the line number of each row.
fn rows(text: &str, required: &str) -> Result<Vec<(usize, HashMap<String, String>)>, String> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
    let (_, header) = lines.next().ok_or("table has no header row")?;
    let names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    for col in required.split(',') {
        if !names.iter().any(|n| n == col) {
            return Err(format!("table lacks column `{col}`"));
        }
    }
    lines
        .map(|(i, l)| {
            let fields: Vec<&str> = l.split(',').collect();
            if fields.len() != names.len() {
                return Err(format!("line {}: expected {} fields, found {}", i + 1, names.len(), fields.len()));
            }
            Ok((i + 1, names.iter().cloned().zip(fields.iter().map(|f| f.trim().to_string())).collect()))
        })
        .collect()
}

fn field<T: std::str::FromStr>(row: &HashMap<String, String>, name: &str, line: usize) -> Result<T, String> {
    let raw = &row[name];
    raw.parse().map_err(|_| format!("line {line}: bad `{name}` value `{raw}`"))
}

pub fn parse_curves(text: &str) -> Result<Vec<CurveRow>, String> {
    rows(text, CURVE_COLUMNS)?
        .iter()
        .map(|(n, r)| {
            Ok(CurveRow {
                theta: field(r, "theta", *n)?,
                t: field(r, "t", *n)?,
                z_mean: field(r, "z_mean", *n)?,
                z_typ: field(r, "z_typ", *n)?,
                se: field(r, "se", *n)?,
                pool_size: field(r, "pool_size", *n)?,
            })
        })
        .collect()
}

pub fn parse_estimates(text: &str) -> Result<Vec<EstimateRow>, String> {
    rows(text, ESTIMATE_COLUMNS)?
        .iter()
        .map(|(n, r)| {
            Ok(EstimateRow {
                t: field(r, "t", *n)?,
                theta: field(r, "theta", *n)?,
                z_hat: field(r, "z_hat", *n)?,
                se: field(r, "se", *n)?,
                n_circuits: field(r, "n_circuits", *n)?,
                n_shots: field(r, "n_shots", *n)?,
            })
        })
        .collect()
}

pub fn curve_line(r: &CurveRow) -> String {
    format!("{},{},{},{},{},{}", r.theta, r.t, r.z_mean, r.z_typ, r.se, r.pool_size)
}

pub fn estimate_line(r: &EstimateRow) -> String {
    format!("{},{},{},{},{},{}", r.t, r.theta, r.z_hat, r.se, r.n_circuits, r.n_shots)
}

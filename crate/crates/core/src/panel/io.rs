//! Long-format CSV: `unit_id, period, arm, y, s1..sD, x1..xR`.
//!
//! Negative periods carry observational pre-period history when
//! `ColumnSpec::pre_periods` is positive.

use super::{ColumnNames, ExperimentWindow, PanelDataset, UnitRecord};
use crate::error::{Error, Result};
use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

/// Which columns hold surrogates and covariates. `None` infers `s<k>` / `x<k>`
/// columns from the header in numeric order.
#[derive(Debug, Clone)]
pub struct ColumnSpec {
    pub window: ExperimentWindow,
    pub outcome: String,
    pub surrogates: Option<Vec<String>>,
    pub covariates: Option<Vec<String>>,
    pub pre_periods: usize,
}

impl ColumnSpec {
    pub fn infer(window: ExperimentWindow) -> Self {
        ColumnSpec { window, outcome: "y".into(), surrogates: None, covariates: None, pre_periods: 0 }
    }
}

fn numbered(header: &csv::StringRecord, prefix: char) -> Vec<String> {
    let mut found: Vec<(usize, String)> = header
        .iter()
        .filter_map(|h| {
            let rest = h.strip_prefix(prefix)?;
            rest.parse::<usize>().ok().map(|k| (k, h.to_string()))
        })
        .collect();
    found.sort();
    found.into_iter().map(|(_, h)| h).collect()
}

fn column(header: &csv::StringRecord, name: &str) -> Result<usize> {
    header.iter().position(|h| h == name).ok_or_else(|| Error::Schema(name.to_string()))
}

fn parse_f64(raw: &str, line: u64, col: &str) -> Result<f64> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Ok(f64::NAN);
    }
    raw.parse::<f64>()
        .map_err(|_| Error::Data(format!("line {line}: column `{col}` has non-numeric value `{raw}`")))
}

struct Partial {
    arm: u8,
    covariates: Vec<f64>,
    surrogates: Vec<f64>,
    outcomes: Vec<f64>,
    pre_surrogates: Vec<f64>,
    pre_outcomes: Vec<f64>,
    seen: Vec<bool>,
}

/// Reads a panel from any reader.
pub fn read_panel<R: Read>(reader: R, spec: &ColumnSpec) -> Result<PanelDataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers().map_err(|e| Error::Data(e.to_string()))?.clone();
    let c_id = column(&header, "unit_id")?;
    let c_period = column(&header, "period")?;
    let c_arm = column(&header, "arm")?;
    let c_y = column(&header, &spec.outcome)?;
    let s_names = spec.surrogates.clone().unwrap_or_else(|| numbered(&header, 's'));
    let x_names = spec.covariates.clone().unwrap_or_else(|| numbered(&header, 'x'));
    if s_names.is_empty() {
        return Err(Error::Schema("s1".into()));
    }
    let c_s: Vec<usize> = s_names.iter().map(|n| column(&header, n)).collect::<Result<_>>()?;
    let c_x: Vec<usize> = x_names.iter().map(|n| column(&header, n)).collect::<Result<_>>()?;
    let (d, r) = (c_s.len(), c_x.len());
    let t_total = spec.window.t_total();
    let te = spec.window.t_experimental();
    let l = spec.pre_periods;

    let mut order: Vec<String> = Vec::new();
    let mut partial: HashMap<String, Partial> = HashMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Data(e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let id = rec.get(c_id).unwrap_or("").to_string();
        if id.is_empty() {
            return Err(Error::Data(format!("line {line}: empty unit_id")));
        }
        let period: i64 = rec
            .get(c_period)
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|_| Error::Data(format!("line {line}: bad period")))?;
        if period > t_total as i64 || period < -(l as i64) {
            return Err(Error::Data(format!("line {line}: period {period} outside -{l}..={t_total}")));
        }
        let arm: u8 = match rec.get(c_arm).unwrap_or("").trim() {
            "0" => 0,
            "1" => 1,
            other => return Err(Error::Data(format!("line {line}: arm `{other}` is not 0/1"))),
        };
        let xs: Vec<f64> = c_x
            .iter()
            .zip(&x_names)
            .map(|(&c, n)| parse_f64(rec.get(c).unwrap_or(""), line, n))
            .collect::<Result<_>>()?;
        if xs.iter().any(|v| v.is_nan()) {
            return Err(Error::Data(format!("line {line}: missing covariate")));
        }
        let entry = partial.entry(id.clone()).or_insert_with(|| {
            order.push(id.clone());
            Partial {
                arm,
                covariates: xs.clone(),
                surrogates: vec![f64::NAN; (t_total + 1) * d],
                outcomes: vec![f64::NAN; t_total],
                pre_surrogates: vec![f64::NAN; l * d],
                pre_outcomes: vec![f64::NAN; l],
                seen: vec![false; l + t_total + 1],
            }
        });
        if entry.arm != arm {
            return Err(Error::DesignViolation(format!("unit `{id}` changes arm at period {period}")));
        }
        if entry.covariates != xs {
            return Err(Error::Data(format!("unit `{id}` has covariates that vary across periods")));
        }
        let slot = (period + l as i64) as usize;
        if entry.seen[slot] {
            return Err(Error::Data(format!("duplicate row for unit `{id}` period {period}")));
        }
        entry.seen[slot] = true;
        for (k, (&c, n)) in c_s.iter().zip(&s_names).enumerate() {
            let v = parse_f64(rec.get(c).unwrap_or(""), line, n)?;
            if period >= 0 {
                entry.surrogates[period as usize * d + k] = v;
            } else {
                entry.pre_surrogates[slot * d + k] = v;
            }
        }
        let y = || parse_f64(rec.get(c_y).unwrap_or(""), line, &spec.outcome);
        if period >= 1 {
            entry.outcomes[period as usize - 1] = y()?;
        } else if l > 0 && period > -(l as i64) {
            entry.pre_outcomes[slot - 1] = y()?;
        }
    }
    let mut units = Vec::with_capacity(order.len());
    for id in order {
        let p = partial.remove(&id).expect("unit recorded in order");
        if let Some(k) = (0..=l + te).find(|&k| !p.seen[k]) {
            let t = k as i64 - l as i64;
            return Err(Error::Data(format!("unit `{id}` has no row for observed period {t}")));
        }
        units.push(UnitRecord {
            unit_id: id,
            covariates: p.covariates,
            arm: p.arm,
            surrogates: p.surrogates,
            outcomes: p.outcomes,
            pre_surrogates: p.pre_surrogates,
            pre_outcomes: p.pre_outcomes,
        });
    }
    let names = ColumnNames { outcome: spec.outcome.clone(), surrogates: s_names, covariates: x_names };
    PanelDataset::new(spec.window, d, r, names, units)
}

/// Loads a panel CSV from disk.
pub fn load_panel(path: &Path, spec: &ColumnSpec) -> Result<PanelDataset> {
    let f = std::fs::File::open(path)
        .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
    read_panel(std::io::BufReader::new(f), spec)
}

fn fmt(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

/// Writes a panel as long CSV. Shortest round-trip float formatting; NaN as empty.
pub fn write_panel<W: Write>(ds: &PanelDataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let names = ds.column_names();
    let mut header = vec!["unit_id".to_string(), "period".into(), "arm".into(), names.outcome.clone()];
    header.extend(names.surrogates.iter().cloned());
    header.extend(names.covariates.iter().cloned());
    w.write_record(&header).map_err(|e| Error::Data(e.to_string()))?;
    let d = ds.d_surrogates();
    let l = ds.pre_periods();
    for u in ds.units() {
        for k in 0..l {
            let t = k as i64 - l as i64;
            let mut row = vec![u.unit_id.clone(), t.to_string(), u.arm.to_string()];
            row.push(if k == 0 { String::new() } else { fmt(u.pre_outcomes[k - 1]) });
            row.extend(u.pre_surrogates[k * d..(k + 1) * d].iter().map(|v| fmt(*v)));
            row.extend(u.covariates.iter().map(|v| fmt(*v)));
            w.write_record(&row).map_err(|e| Error::Data(e.to_string()))?;
        }
        for t in 0..=ds.window().t_total() {
            let mut row = vec![u.unit_id.clone(), t.to_string(), u.arm.to_string()];
            row.push(match t {
                0 if l > 0 => fmt(u.pre_outcomes[l - 1]),
                0 => String::new(),
                _ => fmt(u.outcomes[t - 1]),
            });
            row.extend(u.surrogates[t * d..(t + 1) * d].iter().map(|v| fmt(*v)));
            row.extend(u.covariates.iter().map(|v| fmt(*v)));
            w.write_record(&row).map_err(|e| Error::Data(e.to_string()))?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn save_panel(ds: &PanelDataset, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_panel(ds, std::io::BufWriter::new(f))
}

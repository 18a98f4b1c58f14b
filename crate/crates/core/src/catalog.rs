//! CSV feature catalog.
//!
//! One row per [`FeatureRecord`]: four identifier columns, the 61 feature
//! columns in group order, then `ipi_s` as a trailing annotation. Absent
//! values are written as `NA`. dB values and pressures carry 6 fractional
//! digits, times 9.

use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::measures::LevelSet;
use crate::pipeline::{is_sorted, FeatureRecord, FEATURES_PER_RECORD};
use crate::weighting::Weighting;
use crate::windows::{EnergyBounds, LATE_WINDOW_COUNT};

pub const ABSENT: &str = "NA";
pub const ID_COLUMNS: [&str; 4] = ["run_id", "channel_id", "weighting", "pulse_index"];
const LEVEL_NAMES: [&str; 4] = ["spl_peak_db", "sel_db", "leq_db", "csel_db"];

/// Full header row in column order.
pub fn header() -> Vec<String> {
    let mut h: Vec<String> = ID_COLUMNS.iter().map(|s| s.to_string()).collect();
    h.extend(feature_columns());
    h.push("ipi_s".into());
    h
}

/// The 61 feature column names.
pub fn feature_columns() -> Vec<String> {
    let mut h = vec!["early_interval_s".to_string()];
    h.extend((1..=LATE_WINDOW_COUNT).map(|k| format!("late_start_{k:02}_s")));
    h.extend(
        ["t_a_s", "p_a_upa", "p_a_db", "t_b_s", "p_b_upa", "p_b_db"]
            .iter()
            .map(|s| s.to_string()),
    );
    h.extend(LEVEL_NAMES.iter().map(|m| format!("early_{m}")));
    for k in 1..=LATE_WINDOW_COUNT {
        h.extend(LEVEL_NAMES.iter().map(|m| format!("late_{k:02}_{m}")));
    }
    h
}

fn time(t: f64) -> String {
    format!("{t:.9}")
}

fn level(v: f64) -> String {
    format!("{v:.6}")
}

fn opt(v: Option<f64>, f: fn(f64) -> String) -> String {
    v.map_or_else(|| ABSENT.to_string(), f)
}

fn feature_cells(r: &FeatureRecord) -> Vec<String> {
    let mut cells = Vec::with_capacity(FEATURES_PER_RECORD);
    cells.push(format!("{};{}", time(r.early.t_5th_s), time(r.early.t_95th_s)));
    cells.extend(r.late_starts_s.iter().map(|&t| time(t)));
    cells.push(time(r.t_a_s));
    cells.push(level(r.p_a_upa));
    cells.push(opt(r.p_a_db, level));
    cells.push(time(r.t_b_s));
    cells.push(level(r.p_b_upa));
    cells.push(opt(r.p_b_db, level));
    let levels = |l: Option<&LevelSet>| -> [String; 4] {
        match l {
            Some(l) => [l.spl_peak_db, l.sel_db, l.leq_db, l.csel_db].map(level),
            None => std::array::from_fn(|_| ABSENT.to_string()),
        }
    };
    cells.extend(levels(Some(&r.early_levels)));
    for l in &r.late_levels {
        cells.extend(levels(l.as_ref()));
    }
    cells
}

/// Row and cell counts of a written catalog.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CatalogSummary {
    pub records: u64,
    /// Feature cells written, `NA` included; identifier and annotation columns excluded.
    pub points: u64,
}

/// Writes `records` to any sink. Records must already be in catalog order.
pub fn write_catalog_to<W: Write>(sink: W, run_id: &str, records: &[FeatureRecord]) -> Result<CatalogSummary> {
    if !is_sorted(records) {
        return Err(Error::InvalidConfig(
            "catalog records must be sorted by channel, pulse index, weighting".into(),
        ));
    }
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(header())?;
    let mut summary = CatalogSummary::default();
    for r in records {
        let features = feature_cells(r);
        summary.records += 1;
        summary.points += features.len() as u64;
        let mut row = vec![
            run_id.to_string(),
            r.channel_id.to_string(),
            r.weighting.name().to_string(),
            r.pulse_index.to_string(),
        ];
        row.extend(features);
        row.push(opt(r.ipi_s, time));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(summary)
}

/// Writes the catalog file at `path`.
pub fn write_catalog(path: &Path, run_id: &str, records: &[FeatureRecord]) -> Result<CatalogSummary> {
    let file = File::create(path)?;
    let mut sink = io::BufWriter::new(file);
    let summary = write_catalog_to(&mut sink, run_id, records)?;
    sink.flush()?;
    Ok(summary)
}

/// One parsed catalog row.
#[derive(Debug, Clone, PartialEq)]
pub struct CatalogRow {
    pub run_id: String,
    pub record: FeatureRecord,
}

fn bad(line: u64, msg: impl Into<String>) -> Error {
    Error::CatalogParse(format!("row {line}: {}", msg.into()))
}

struct Cells<'a> {
    row: &'a csv::StringRecord,
    pos: usize,
    line: u64,
}

impl<'a> Cells<'a> {
    fn next(&mut self) -> Result<&'a str> {
        let cell = self.row.get(self.pos).ok_or_else(|| bad(self.line, "too few columns"))?;
        self.pos += 1;
        Ok(cell)
    }

    fn num(&mut self) -> Result<f64> {
        let cell = self.next()?;
        cell.parse().map_err(|_| bad(self.line, format!("bad number {cell:?}")))
    }

    fn opt(&mut self) -> Result<Option<f64>> {
        match self.next()? {
            ABSENT => Ok(None),
            cell => cell
                .parse()
                .map(Some)
                .map_err(|_| bad(self.line, format!("bad number {cell:?}"))),
        }
    }

    fn levels(&mut self) -> Result<Option<LevelSet>> {
        let v = [self.opt()?, self.opt()?, self.opt()?, self.opt()?];
        match v {
            [Some(spl_peak_db), Some(sel_db), Some(leq_db), Some(csel_db)] => Ok(Some(LevelSet {
                spl_peak_db,
                sel_db,
                leq_db,
                csel_db,
            })),
            [None, None, None, None] => Ok(None),
            _ => Err(bad(self.line, "partially absent level set")),
        }
    }
}

/// Parses a catalog written by [`write_catalog`].
pub fn read_catalog(path: &Path) -> Result<Vec<CatalogRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    let expected = header();
    if reader.headers()?.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::CatalogParse("header does not match the catalog schema".into()));
    }
    let mut rows = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let line = i as u64 + 2;
        if row.len() != expected.len() {
            return Err(bad(line, format!("expected {} columns, found {}", expected.len(), row.len())));
        }
        let mut c = Cells { row: &row, pos: 0, line };
        let run_id = c.next()?.to_string();
        let channel_id = c.next()?.parse().map_err(|_| bad(line, "bad channel_id"))?;
        let weighting: Weighting = c.next()?.parse().map_err(|_| bad(line, "bad weighting"))?;
        let pulse_index = c.next()?.parse().map_err(|_| bad(line, "bad pulse_index"))?;
        let interval = c.next()?;
        let (t5, t95) = interval
            .split_once(';')
            .and_then(|(a, b)| Some((a.parse().ok()?, b.parse().ok()?)))
            .ok_or_else(|| bad(line, format!("bad early interval {interval:?}")))?;
        let mut late_starts_s = [0.0; LATE_WINDOW_COUNT];
        for t in &mut late_starts_s {
            *t = c.num()?;
        }
        let t_a_s = c.num()?;
        let p_a_upa = c.num()?;
        let p_a_db = c.opt()?;
        let t_b_s = c.num()?;
        let p_b_upa = c.num()?;
        let p_b_db = c.opt()?;
        let early_levels = c.levels()?.ok_or_else(|| bad(line, "early levels absent"))?;
        let mut late_levels = [None; LATE_WINDOW_COUNT];
        for l in &mut late_levels {
            *l = c.levels()?;
        }
        let ipi_s = c.opt()?;
        rows.push(CatalogRow {
            run_id,
            record: FeatureRecord {
                channel_id,
                weighting,
                pulse_index,
                early: EnergyBounds {
                    t_5th_s: t5,
                    t_95th_s: t95,
                },
                late_starts_s,
                t_a_s,
                p_a_upa,
                p_a_db,
                t_b_s,
                p_b_upa,
                p_b_db,
                early_levels,
                late_levels,
                ipi_s,
            },
        });
    }
    Ok(rows)
}

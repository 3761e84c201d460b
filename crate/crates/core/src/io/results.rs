use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{column_index, io_err, DataError};
use crate::aggregate::{LevelResult, PeakStudyResult, QuantileProfile, SummaryPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ResultFormat {
    Csv,
    Json,
}

impl ResultFormat {
    pub fn extension(self) -> &'static str {
        match self {
            Self::Csv => "csv",
            Self::Json => "json",
        }
    }
}

/// One row of the per-session cost table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionCostRow {
    pub session_id: String,
    pub cp_id: String,
    pub energy_kwh: f64,
    pub energy_cost_eur: f64,
    pub network_cost_eur: f64,
    pub total_eur: f64,
}

#[derive(Debug, Clone, Copy)]
pub enum ResultRef<'a> {
    Quantile(&'a QuantileProfile),
    Peak(&'a PeakStudyResult),
    Costs(&'a [SessionCostRow]),
}

pub fn write_results(result: ResultRef<'_>, path: &Path, format: ResultFormat) -> Result<(), DataError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    write_results_to(result, &mut w, format)?;
    w.flush().map_err(io_err(path))
}

pub(crate) fn write_results_to<W: Write>(
    result: ResultRef<'_>,
    writer: W,
    format: ResultFormat,
) -> Result<(), DataError> {
    match format {
        ResultFormat::Json => {
            match result {
                ResultRef::Quantile(q) => serde_json::to_writer_pretty(writer, q)?,
                ResultRef::Peak(p) => serde_json::to_writer_pretty(writer, p)?,
                ResultRef::Costs(c) => serde_json::to_writer_pretty(writer, c)?,
            }
            Ok(())
        }
        ResultFormat::Csv => {
            let mut w = csv::Writer::from_writer(writer);
            match result {
                ResultRef::Quantile(q) => write_quantile_csv(&mut w, q)?,
                ResultRef::Peak(p) => write_peak_csv(&mut w, p)?,
                ResultRef::Costs(rows) => {
                    for r in rows {
                        w.serialize(r)?;
                    }
                    if rows.is_empty() {
                        w.write_record(COST_COLUMNS)?;
                    }
                }
            }
            w.flush().map_err(|e| DataError::Csv(e.into()))
        }
    }
}

const COST_COLUMNS: [&str; 6] = [
    "session_id",
    "cp_id",
    "energy_kwh",
    "energy_cost_eur",
    "network_cost_eur",
    "total_eur",
];

fn write_quantile_csv<W: Write>(w: &mut csv::Writer<W>, q: &QuantileProfile) -> Result<(), DataError> {
    w.write_record(["hour", "quantile", "value"])?;
    for (hour, (row, max)) in q.values_kw.iter().zip(&q.max_kw).enumerate() {
        let hour = hour.to_string();
        for (level, v) in q.quantile_levels.iter().zip(row) {
            w.write_record([hour.as_str(), &level.to_string(), &v.to_string()])?;
        }
        w.write_record([hour.as_str(), "max", &max.to_string()])?;
    }
    Ok(())
}

fn write_peak_csv<W: Write>(w: &mut csv::Writer<W>, p: &PeakStudyResult) -> Result<(), DataError> {
    w.write_record(["level", "repeat", "metric", "value"])?;
    for level in &p.levels {
        let n = level.n_cps.to_string();
        for (r, (m, d)) in level.max_per_cp_kw.iter().zip(&level.diversity_factor).enumerate() {
            let r = r.to_string();
            w.write_record([n.as_str(), &r, "max_per_cp_kw", &m.to_string()])?;
            w.write_record([n.as_str(), &r, "diversity_factor", &d.to_string()])?;
        }
        for s in &level.summary {
            let q = format!("q{}", s.q);
            w.write_record([n.as_str(), &q, "summary_max_per_cp_kw", &s.max_per_cp_kw.to_string()])?;
            w.write_record([n.as_str(), &q, "summary_diversity_factor", &s.diversity_factor.to_string()])?;
        }
    }
    Ok(())
}

fn open(path: &Path) -> Result<File, DataError> {
    File::open(path).map_err(io_err(path))
}

pub fn read_peak_study(path: &Path, format: ResultFormat) -> Result<PeakStudyResult, DataError> {
    read_peak_study_from(open(path)?, format)
}

pub fn read_quantile_profile(path: &Path, format: ResultFormat) -> Result<QuantileProfile, DataError> {
    read_quantile_profile_from(open(path)?, format)
}

pub fn read_cost_table(path: &Path, format: ResultFormat) -> Result<Vec<SessionCostRow>, DataError> {
    read_cost_table_from(open(path)?, format)
}

fn bad(line: u64, what: impl std::fmt::Display) -> DataError {
    DataError::Results(format!("line {line}: {what}"))
}

fn number<T: std::str::FromStr>(raw: &str, line: u64) -> Result<T, DataError> {
    raw.parse().map_err(|_| bad(line, format!("bad number '{raw}'")))
}

pub(crate) fn read_peak_study_from<R: Read>(reader: R, format: ResultFormat) -> Result<PeakStudyResult, DataError> {
    if format == ResultFormat::Json {
        return Ok(serde_json::from_reader(reader)?);
    }
    let mut rdr = csv::Reader::from_reader(reader);
    let idx = column_index(rdr.headers()?, &["level", "repeat", "metric", "value"])?;
    let mut levels: Vec<LevelResult> = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let n: usize = number(&record[idx[0]], line)?;
        let repeat = &record[idx[1]];
        let metric = &record[idx[2]];
        let value: f64 = number(&record[idx[3]], line)?;
        if levels.last().is_none_or(|l| l.n_cps != n) {
            levels.push(LevelResult {
                n_cps: n,
                max_per_cp_kw: Vec::new(),
                diversity_factor: Vec::new(),
                summary: Vec::new(),
            });
        }
        let level = levels.last_mut().expect("pushed above");
        match metric {
            "max_per_cp_kw" | "diversity_factor" => {
                let r: usize = number(repeat, line)?;
                let column = if metric == "max_per_cp_kw" {
                    &mut level.max_per_cp_kw
                } else {
                    &mut level.diversity_factor
                };
                if r != column.len() {
                    return Err(bad(line, format!("repeat {r} out of order")));
                }
                column.push(value);
            }
            "summary_max_per_cp_kw" | "summary_diversity_factor" => {
                let q: f64 = repeat
                    .strip_prefix('q')
                    .ok_or_else(|| bad(line, format!("summary row needs a q-prefixed repeat, got '{repeat}'")))
                    .and_then(|q| number(q, line))?;
                if metric == "summary_max_per_cp_kw" {
                    level.summary.push(SummaryPoint {
                        q,
                        max_per_cp_kw: value,
                        diversity_factor: f64::NAN,
                    });
                } else {
                    match level.summary.last_mut() {
                        Some(s) if s.q == q && s.diversity_factor.is_nan() => s.diversity_factor = value,
                        _ => return Err(bad(line, "summary rows out of order")),
                    }
                }
            }
            other => return Err(bad(line, format!("unknown metric '{other}'"))),
        }
    }
    for l in &levels {
        if l.max_per_cp_kw.len() != l.diversity_factor.len() || l.summary.iter().any(|s| s.diversity_factor.is_nan()) {
            return Err(DataError::Results(format!("level {} is incomplete", l.n_cps)));
        }
    }
    Ok(PeakStudyResult { levels })
}

pub(crate) fn read_quantile_profile_from<R: Read>(
    reader: R,
    format: ResultFormat,
) -> Result<QuantileProfile, DataError> {
    if format == ResultFormat::Json {
        return Ok(serde_json::from_reader(reader)?);
    }
    let mut rdr = csv::Reader::from_reader(reader);
    let idx = column_index(rdr.headers()?, &["hour", "quantile", "value"])?;
    let mut by_hour: BTreeMap<usize, (Vec<(f64, f64)>, Option<f64>)> = BTreeMap::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let hour: usize = number(&record[idx[0]], line)?;
        let value: f64 = number(&record[idx[2]], line)?;
        let entry = by_hour.entry(hour).or_default();
        match &record[idx[1]] {
            "max" => entry.1 = Some(value),
            q => entry.0.push((number(q, line)?, value)),
        }
    }
    let levels: Vec<f64> = by_hour
        .values()
        .next()
        .map(|(qs, _)| qs.iter().map(|(q, _)| *q).collect())
        .unwrap_or_default();
    let mut values_kw = Vec::with_capacity(by_hour.len());
    let mut max_kw = Vec::with_capacity(by_hour.len());
    for (expected, (hour, (qs, max))) in by_hour.into_iter().enumerate() {
        if hour != expected {
            return Err(DataError::Results(format!("hour {expected} is missing")));
        }
        if qs.iter().map(|(q, _)| *q).ne(levels.iter().copied()) {
            return Err(DataError::Results(format!("hour {hour} has different quantile levels")));
        }
        values_kw.push(qs.into_iter().map(|(_, v)| v).collect());
        max_kw.push(max.ok_or_else(|| DataError::Results(format!("hour {hour} has no max row")))?);
    }
    Ok(QuantileProfile {
        quantile_levels: levels,
        values_kw,
        max_kw,
    })
}

pub(crate) fn read_cost_table_from<R: Read>(
    reader: R,
    format: ResultFormat,
) -> Result<Vec<SessionCostRow>, DataError> {
    if format == ResultFormat::Json {
        return Ok(serde_json::from_reader(reader)?);
    }
    let mut rdr = csv::Reader::from_reader(reader);
    column_index(rdr.headers()?, &COST_COLUMNS)?;
    Ok(rdr.deserialize().collect::<Result<Vec<SessionCostRow>, _>>()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn peak_result() -> PeakStudyResult {
        let qs = [0.05, 0.5, 0.95];
        PeakStudyResult {
            levels: vec![
                LevelResult::from_peaks(1, vec![11.0, 22.0, 7.4], &qs),
                LevelResult::from_peaks(4, vec![5.5, 6.1 / 3.0, 4.0], &qs),
            ],
        }
    }

    fn quantile_profile() -> QuantileProfile {
        let levels = vec![0.05, 0.25, 0.5, 0.75, 0.95];
        QuantileProfile {
            values_kw: (0..24)
                .map(|h| levels.iter().map(|q| q * h as f64 / 7.0).collect())
                .collect(),
            max_kw: (0..24).map(|h| h as f64 * 0.3).collect(),
            quantile_levels: levels,
        }
    }

    fn csv_of(r: ResultRef<'_>) -> String {
        let mut buf = Vec::new();
        write_results_to(r, &mut buf, ResultFormat::Csv).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn peak_csv_has_one_row_per_repeat_and_metric() {
        let text = csv_of(ResultRef::Peak(&peak_result()));
        let rows: Vec<&str> = text.lines().skip(1).collect();
        assert_eq!(rows.iter().filter(|r| r.contains(",max_per_cp_kw,")).count(), 6);
        assert_eq!(rows.iter().filter(|r| r.contains(",diversity_factor,")).count(), 6);
        assert_eq!(text.lines().next(), Some("level,repeat,metric,value"));
        assert!(text.contains("4,q0.5,summary_max_per_cp_kw,"));
    }

    #[test]
    fn quantile_csv_has_values_plus_max_per_hour() {
        let text = csv_of(ResultRef::Quantile(&quantile_profile()));
        assert_eq!(text.lines().count() - 1, 24 * 6);
        assert_eq!(text.lines().next(), Some("hour,quantile,value"));
    }

    #[test]
    fn round_trips_are_exact() {
        for format in [ResultFormat::Csv, ResultFormat::Json] {
            let p = peak_result();
            let mut buf = Vec::new();
            write_results_to(ResultRef::Peak(&p), &mut buf, format).unwrap();
            assert_eq!(read_peak_study_from(buf.as_slice(), format).unwrap(), p);

            let q = quantile_profile();
            let mut buf = Vec::new();
            write_results_to(ResultRef::Quantile(&q), &mut buf, format).unwrap();
            assert_eq!(read_quantile_profile_from(buf.as_slice(), format).unwrap(), q);

            let rows = vec![SessionCostRow {
                session_id: "s1".into(),
                cp_id: "cp1".into(),
                energy_kwh: 60.0,
                energy_cost_eur: 1.0 / 3.0,
                network_cost_eur: 0.22,
                total_eur: 1.0 / 3.0 + 0.22,
            }];
            let mut buf = Vec::new();
            write_results_to(ResultRef::Costs(&rows), &mut buf, format).unwrap();
            assert_eq!(read_cost_table_from(buf.as_slice(), format).unwrap(), rows);
        }
    }

    #[test]
    fn files_round_trip_and_unwritable_paths_fail() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("peak.csv");
        let p = peak_result();
        write_results(ResultRef::Peak(&p), &path, ResultFormat::Csv).unwrap();
        assert_eq!(read_peak_study(&path, ResultFormat::Csv).unwrap(), p);
        let missing = dir.path().join("no/such/dir/x.csv");
        assert!(matches!(
            write_results(ResultRef::Peak(&p), &missing, ResultFormat::Csv),
            Err(DataError::Io { .. })
        ));
    }

    #[test]
    fn corrupted_tables_are_rejected() {
        let text = "level,repeat,metric,value\n1,0,max_per_cp_kw,3\n1,0,bogus,1\n";
        assert!(read_peak_study_from(text.as_bytes(), ResultFormat::Csv).is_err());
        let text = "hour,quantile,value\n0,0.5,1\n";
        assert!(read_quantile_profile_from(text.as_bytes(), ResultFormat::Csv).is_err());
    }
}

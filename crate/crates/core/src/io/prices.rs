use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, Duration, DurationRound, Utc};

use super::{format_utc, io_err, parse_utc, DataError};
use crate::model::{PriceSeries, TimeGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriceUnit {
    EurPerMwh,
    EurPerKwh,
}

impl PriceUnit {
    fn column(self) -> &'static str {
        match self {
            Self::EurPerMwh => "price_eur_per_mwh",
            Self::EurPerKwh => "price_eur_per_kwh",
        }
    }

    fn to_eur_per_kwh(self, v: f64) -> f64 {
        match self {
            Self::EurPerMwh => v / 1000.0,
            Self::EurPerKwh => v,
        }
    }
}

pub fn load_prices(path: &Path, grid: &TimeGrid) -> Result<PriceSeries, DataError> {
    read_prices(File::open(path).map_err(io_err(path))?, grid)
}

/// Reads an hourly price file and returns the hours spanning `grid`.
///
/// Rows must be consecutive hours without gaps or duplicates.
pub fn read_prices<R: Read>(reader: R, grid: &TimeGrid) -> Result<PriceSeries, DataError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let time_col = find("hour_start_utc")
        .ok_or_else(|| DataError::MissingColumns(vec!["hour_start_utc".into()]))?;
    let (price_col, unit) = [PriceUnit::EurPerMwh, PriceUnit::EurPerKwh]
        .into_iter()
        .find_map(|u| find(u.column()).map(|c| (c, u)))
        .ok_or_else(|| {
            DataError::MissingColumns(vec!["price_eur_per_mwh or price_eur_per_kwh".into()])
        })?;

    let mut start: Option<DateTime<Utc>> = None;
    let mut values = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let raw_t = record.get(time_col).unwrap_or_default();
        let t = parse_utc(raw_t)
            .ok_or_else(|| DataError::Prices(format!("line {line}: bad timestamp '{raw_t}'")))?;
        let raw_p = record.get(price_col).unwrap_or_default();
        let p: f64 = raw_p
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| DataError::Prices(format!("line {line}: bad price '{raw_p}'")))?;
        match start {
            None => {
                if t.duration_trunc(Duration::hours(1)).ok() != Some(t) {
                    return Err(DataError::Prices(format!(
                        "line {line}: {raw_t} is not on an hour boundary"
                    )));
                }
                start = Some(t);
            }
            Some(s) => {
                let expected = s + Duration::hours(values.len() as i64);
                if t < expected {
                    return Err(DataError::Prices(format!(
                        "line {line}: duplicate or out-of-order hour {}",
                        format_utc(t)
                    )));
                }
                if t > expected {
                    return Err(DataError::Prices(format!(
                        "gap: hour {} is missing (next row is {})",
                        format_utc(expected),
                        format_utc(t)
                    )));
                }
            }
        }
        values.push(unit.to_eur_per_kwh(p));
    }
    let start = start.ok_or_else(|| DataError::Prices("no price rows".into()))?;
    let full = PriceSeries::new(start, values)?;
    if !full.covers(grid) {
        return Err(DataError::Prices(format!(
            "prices span {}..{} but the horizon is {}..{}",
            format_utc(full.start()),
            format_utc(full.end()),
            format_utc(grid.start),
            format_utc(grid.end())
        )));
    }
    let first_hour = grid
        .start
        .duration_trunc(Duration::hours(1))
        .expect("in-range timestamp");
    let skip = (first_hour - start).num_hours() as usize;
    let end = grid.end();
    let n_hours = ((end - first_hour).num_milliseconds() as u64).div_ceil(3_600_000) as usize;
    Ok(PriceSeries::new(first_hour, full.values()[skip..skip + n_hours].to_vec())?)
}

pub fn write_prices<W: Write>(writer: W, prices: &PriceSeries) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["hour_start_utc", "price_eur_per_kwh"])?;
    for (i, p) in prices.values().iter().enumerate() {
        w.write_record([
            format_utc(prices.start() + Duration::hours(i as i64)),
            p.to_string(),
        ])?;
    }
    w.flush().map_err(|e| DataError::Csv(e.into()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::make_time_grid;
    use chrono::TimeZone;

    fn csv_for(hours: impl Iterator<Item = i64>, header: &str, value: &str) -> String {
        let t0 = Utc.with_ymd_and_hms(2022, 1, 1, 0, 0, 0).unwrap();
        let mut s = format!("hour_start_utc,{header}\n");
        for h in hours {
            s.push_str(&format!("{},{value}\n", format_utc(t0 + Duration::hours(h))));
        }
        s
    }

    fn year_grid() -> TimeGrid {
        let t0 = Utc.with_ymd_and_hms(2022, 1, 1, 0, 0, 0).unwrap();
        make_time_grid(t0, Utc.with_ymd_and_hms(2023, 1, 1, 0, 0, 0).unwrap(), 0.25).unwrap()
    }

    #[test]
    fn full_year_has_8760_hours() {
        let csv = csv_for(0..8760, "price_eur_per_mwh", "100.0");
        let s = read_prices(csv.as_bytes(), &year_grid()).unwrap();
        assert_eq!(s.len(), 8760);
    }

    #[test]
    fn mwh_prices_are_converted() {
        let csv = csv_for(0..24, "price_eur_per_mwh", "250.0");
        let t0 = Utc.with_ymd_and_hms(2022, 1, 1, 0, 0, 0).unwrap();
        let g = make_time_grid(t0, t0 + Duration::days(1), 0.25).unwrap();
        let s = read_prices(csv.as_bytes(), &g).unwrap();
        assert_eq!(s.values()[0], 0.25);
    }

    #[test]
    fn missing_hour_names_first_gap() {
        let csv = csv_for((0..8760).filter(|h| *h != 100 && *h != 200), "price_eur_per_kwh", "0.1");
        let err = read_prices(csv.as_bytes(), &year_grid()).unwrap_err().to_string();
        assert!(err.contains("2022-01-05T04:00:00Z"), "{err}");
    }

    #[test]
    fn duplicates_and_short_files_are_rejected() {
        let csv = csv_for([0, 1, 1, 2].into_iter(), "price_eur_per_kwh", "0.1");
        assert!(read_prices(csv.as_bytes(), &year_grid()).unwrap_err().to_string().contains("duplicate"));
        let csv = csv_for(0..100, "price_eur_per_kwh", "0.1");
        assert!(read_prices(csv.as_bytes(), &year_grid()).is_err());
        let csv = "hour_start_utc,price\n";
        assert!(matches!(read_prices(csv.as_bytes(), &year_grid()), Err(DataError::MissingColumns(_))));
    }

    #[test]
    fn longer_file_is_trimmed_to_horizon() {
        let csv = csv_for(0..100, "price_eur_per_kwh", "0.1");
        let t0 = Utc.with_ymd_and_hms(2022, 1, 2, 0, 0, 0).unwrap();
        let g = make_time_grid(t0, t0 + Duration::hours(12), 0.25).unwrap();
        let s = read_prices(csv.as_bytes(), &g).unwrap();
        assert_eq!(s.start(), t0);
        assert_eq!(s.len(), 12);
    }

    #[test]
    fn written_prices_read_back() {
        let t0 = Utc.with_ymd_and_hms(2022, 1, 1, 0, 0, 0).unwrap();
        let s = PriceSeries::new(t0, vec![0.1, -0.02, 0.333333333333]).unwrap();
        let mut buf = Vec::new();
        write_prices(&mut buf, &s).unwrap();
        let g = make_time_grid(t0, t0 + Duration::hours(3), 1.0).unwrap();
        assert_eq!(read_prices(buf.as_slice(), &g).unwrap(), s);
    }
}

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{column_index, format_utc, io_err, parse_utc, DataError};
use crate::model::ChargingSession;

pub const SESSION_COLUMNS: [&str; 6] = [
    "session_id",
    "cp_id",
    "arrival_utc",
    "departure_utc",
    "max_power_kw",
    "energy_kwh",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    MalformedRow,
    BadTimestamp,
    BadNumber,
    NonPositiveDuration,
    NonPositivePower,
    NonPositiveEnergy,
    DuplicateSessionId,
}

impl RejectReason {
    pub fn code(self) -> &'static str {
        match self {
            Self::MalformedRow => "malformed_row",
            Self::BadTimestamp => "bad_timestamp",
            Self::BadNumber => "bad_number",
            Self::NonPositiveDuration => "non_positive_duration",
            Self::NonPositivePower => "non_positive_power",
            Self::NonPositiveEnergy => "non_positive_energy",
            Self::DuplicateSessionId => "duplicate_session_id",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Self::MalformedRow => "malformed row",
            Self::BadTimestamp => "unparseable timestamp",
            Self::BadNumber => "unparseable number",
            Self::NonPositiveDuration => "non-positive duration",
            Self::NonPositivePower => "non-positive max power",
            Self::NonPositiveEnergy => "non-positive energy",
            Self::DuplicateSessionId => "duplicate session id",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedRow {
    /// 1-based line number in the file, header included.
    pub line: u64,
    pub reason: RejectReason,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SessionLoad {
    pub sessions: Vec<ChargingSession>,
    pub rejects: Vec<RejectedRow>,
    /// Ids of accepted sessions whose energy exceeds `max_power_kw * duration`; these are
    /// clipped when mapped onto a grid.
    pub clipped: Vec<String>,
}

pub fn load_sessions(path: &Path) -> Result<SessionLoad, DataError> {
    read_sessions(File::open(path).map_err(io_err(path))?)
}

pub fn read_sessions<R: Read>(reader: R) -> Result<SessionLoad, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let idx = column_index(rdr.headers()?, &SESSION_COLUMNS)?;
    let mut out = SessionLoad::default();
    let mut seen = std::collections::HashSet::new();
    for record in rdr.records() {
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                if matches!(e.kind(), csv::ErrorKind::Utf8 { .. } | csv::ErrorKind::UnequalLengths { .. }) {
                    out.rejects.push(RejectedRow {
                        line,
                        reason: RejectReason::MalformedRow,
                        detail: e.to_string(),
                    });
                    continue;
                }
                return Err(e.into());
            }
        };
        let line = record.position().map_or(0, |p| p.line());
        match parse_row(&record, &idx) {
            Ok(s) => {
                if !seen.insert(s.session_id.clone()) {
                    out.rejects.push(RejectedRow {
                        line,
                        reason: RejectReason::DuplicateSessionId,
                        detail: s.session_id,
                    });
                    continue;
                }
                if s.energy_kwh > s.deliverable_kwh() {
                    out.clipped.push(s.session_id.clone());
                }
                out.sessions.push(s);
            }
            Err((reason, detail)) => out.rejects.push(RejectedRow { line, reason, detail }),
        }
    }
    Ok(out)
}

fn parse_row(
    record: &csv::StringRecord,
    idx: &[usize],
) -> Result<ChargingSession, (RejectReason, String)> {
    let field = |k: usize| {
        record
            .get(idx[k])
            .ok_or((RejectReason::MalformedRow, format!("missing field {}", SESSION_COLUMNS[k])))
    };
    let time = |k: usize| {
        let raw = field(k)?;
        parse_utc(raw).ok_or((RejectReason::BadTimestamp, format!("{}: '{raw}'", SESSION_COLUMNS[k])))
    };
    let number = |k: usize| {
        let raw = field(k)?;
        raw.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or((RejectReason::BadNumber, format!("{}: '{raw}'", SESSION_COLUMNS[k])))
    };
    let session = ChargingSession {
        session_id: field(0)?.to_string(),
        cp_id: field(1)?.to_string(),
        arrival: time(2)?,
        departure: time(3)?,
        max_power_kw: number(4)?,
        energy_kwh: number(5)?,
    };
    if session.session_id.is_empty() || session.cp_id.is_empty() {
        return Err((RejectReason::MalformedRow, "empty identifier".into()));
    }
    if session.departure <= session.arrival {
        return Err((RejectReason::NonPositiveDuration, RejectReason::NonPositiveDuration.description().into()));
    }
    if session.max_power_kw <= 0.0 {
        return Err((RejectReason::NonPositivePower, format!("{} kW", session.max_power_kw)));
    }
    if session.energy_kwh <= 0.0 {
        return Err((RejectReason::NonPositiveEnergy, format!("{} kWh", session.energy_kwh)));
    }
    Ok(session)
}

pub fn write_sessions<W: Write>(writer: W, sessions: &[ChargingSession]) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SESSION_COLUMNS)?;
    for s in sessions {
        w.write_record([
            s.session_id.as_str(),
            s.cp_id.as_str(),
            &format_utc(s.arrival),
            &format_utc(s.departure),
            &s.max_power_kw.to_string(),
            &s.energy_kwh.to_string(),
        ])?;
    }
    w.flush().map_err(|e| DataError::Csv(e.into()))?;
    Ok(())
}

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use chrono::{DateTime, FixedOffset, NaiveDateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Input flavor: LBSN check-ins carry venue categories, CDR does not.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetMode {
    Checkin,
    Cdr,
}

impl DatasetMode {
    pub fn has_categories(self) -> bool {
        matches!(self, DatasetMode::Checkin)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DatasetMode::Checkin => "checkin",
            DatasetMode::Cdr => "cdr",
        }
    }

    fn columns(self) -> usize {
        match self {
            DatasetMode::Checkin => 8,
            DatasetMode::Cdr => 5,
        }
    }
}

impl std::str::FromStr for DatasetMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "checkin" => Ok(DatasetMode::Checkin),
            "cdr" => Ok(DatasetMode::Cdr),
            other => Err(Error::Parse(format!("unknown dataset mode `{other}`"))),
        }
    }
}

/// One raw visit event; `time` is the instant expressed in local civil time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckinRecord {
    pub user_id: String,
    pub location_id: String,
    pub category_id: Option<String>,
    pub latitude: f64,
    pub longitude: f64,
    pub time: DateTime<FixedOffset>,
}

#[derive(Clone, Debug, Default)]
pub struct ParseOptions {
    pub has_header: bool,
    /// Field delimiter; detected from the first line (tab, else comma) when unset.
    pub delimiter: Option<u8>,
}

#[derive(Clone, Debug, Default)]
pub struct ParseOutcome {
    pub records: Vec<CheckinRecord>,
    /// 1-based line numbers of skipped lines.
    pub malformed: Vec<usize>,
    pub warnings: Vec<String>,
}

pub fn parse_records(path: &Path, mode: DatasetMode, opts: &ParseOptions) -> Result<ParseOutcome> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut text = String::new();
    BufReader::new(file)
        .read_to_string(&mut text)
        .map_err(|e| Error::io(path, e))?;
    parse_str(&text, mode, opts)
}

pub fn parse_str(text: &str, mode: DatasetMode, opts: &ParseOptions) -> Result<ParseOutcome> {
    let mut out = ParseOutcome::default();
    let first = text.lines().find(|l| !l.trim().is_empty());
    let Some(first) = first else {
        out.warnings.push("input is empty".into());
        return Ok(out);
    };
    let delimiter = opts
        .delimiter
        .unwrap_or(if first.contains('\t') { b'\t' } else { b',' });
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(false)
        .flexible(true)
        .quoting(delimiter != b'\t')
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut total = 0usize;
    let mut header_seen = !opts.has_header;
    for row in reader.records() {
        let (line, fields) = match row {
            Ok(r) => {
                let line = r.position().map(|p| p.line() as usize).unwrap_or(0);
                (line, r)
            }
            Err(e) => {
                let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
                total += 1;
                out.malformed.push(line);
                continue;
            }
        };
        if fields.iter().all(|f| f.is_empty()) {
            continue;
        }
        if !header_seen {
            header_seen = true;
            if fields.len() != mode.columns() {
                return Err(Error::Parse(format!(
                    "unparseable header: expected {} columns for {} input, found {}",
                    mode.columns(),
                    mode.as_str(),
                    fields.len()
                )));
            }
            continue;
        }
        total += 1;
        match parse_row(&fields, mode) {
            Some(r) => out.records.push(r),
            None => out.malformed.push(line),
        }
    }
    if !out.malformed.is_empty() {
        if out.malformed.len() * 100 > total {
            return Err(Error::Malformed {
                count: out.malformed.len(),
                total,
                lines: out.malformed.iter().take(20).copied().collect(),
            });
        }
        out.warnings.push(format!(
            "skipped {} malformed lines: {:?}",
            out.malformed.len(),
            &out.malformed[..out.malformed.len().min(20)]
        ));
    }
    out.records
        .sort_by(|a, b| a.user_id.cmp(&b.user_id).then(a.time.cmp(&b.time)));
    Ok(out)
}

fn parse_row(f: &csv::StringRecord, mode: DatasetMode) -> Option<CheckinRecord> {
    if f.len() != mode.columns() {
        return None;
    }
    let nonempty = |s: &str| (!s.is_empty()).then(|| s.to_string());
    let (user_id, location_id, category_id, lat, lon, time) = match mode {
        DatasetMode::Checkin => {
            let offset_min: i32 = f[6].parse().ok()?;
            let tz = FixedOffset::east_opt(offset_min.checked_mul(60)?)?;
            let utc = parse_utc(&f[7])?;
            (
                nonempty(&f[0])?,
                nonempty(&f[1])?,
                Some(nonempty(&f[2])?),
                f[4].parse::<f64>().ok()?,
                f[5].parse::<f64>().ok()?,
                utc.with_timezone(&tz),
            )
        }
        DatasetMode::Cdr => (
            nonempty(&f[0])?,
            nonempty(&f[1])?,
            None,
            f[2].parse::<f64>().ok()?,
            f[3].parse::<f64>().ok()?,
            parse_local(&f[4])?,
        ),
    };
    let in_bounds = (-90.0..=90.0).contains(&lat) && (-180.0..=180.0).contains(&lon);
    in_bounds.then_some(CheckinRecord {
        user_id,
        location_id,
        category_id,
        latitude: lat,
        longitude: lon,
        time,
    })
}

/// Accepts RFC 3339, the Foursquare dump format
/// (`Tue Apr 03 18:00:09 +0000 2012`), `YYYY-MM-DD HH:MM:SS` (UTC) and
/// integer unix seconds.
pub fn parse_utc(s: &str) -> Option<DateTime<Utc>> {
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc));
    }
    if let Ok(t) = DateTime::parse_from_str(s, "%a %b %d %H:%M:%S %z %Y") {
        return Some(t.with_timezone(&Utc));
    }
    if let Ok(t) = NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S") {
        return Some(Utc.from_utc_datetime(&t));
    }
    s.parse::<i64>().ok().and_then(|secs| Utc.timestamp_opt(secs, 0).single())
}

/// CDR timestamps are local civil time; without an offset they are kept at +00:00.
pub fn parse_local(s: &str) -> Option<DateTime<FixedOffset>> {
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t);
    }
    let utc0 = FixedOffset::east_opt(0)?;
    ["%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S"]
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(s, fmt).ok())
        .and_then(|n| utc0.from_local_datetime(&n).single())
}

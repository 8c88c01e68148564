//! Buoy observation parsing and series repair.
//!
//! Two input layouts are accepted:
//!
//! * NDBC standard-meteorological text: whitespace separated, header lines
//!   prefixed with `#` (`#YY MM DD hh mm WDIR WSPD GST ...`). Columns are
//!   located through the header when one is present; otherwise the modern
//!   19-column layout is assumed.
//! * CSV with named columns, either a single `timestamp` column or split
//!   `YY,MM,DD,hh,mm` columns. Optional `<FIELD>_flag` columns carry the
//!   per-value flags written by [`write_csv`].
//!
//! NDBC codes missing values with all-nines sentinels (`99.0` for speeds,
//! `999` for direction and temperatures, `9999.0` for pressure) or the
//! literal `MM` in realtime files. Both are flagged [`FieldFlag::Missing`].
//!
//! [`repair`] places the records on a fixed cadence grid. Per field, runs of
//! at most [`MAX_INTERPOLATED_GAP`] missing slots between two known values
//! are linearly interpolated; longer runs are forward filled (back filled
//! at the start of the series). Every synthetic row and value is logged.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Read, Write};
use std::path::Path;

use chrono::{NaiveDate, NaiveDateTime, TimeDelta};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Longest run of missing slots that is linearly interpolated (one hour at
/// 10-minute cadence).
pub const MAX_INTERPOLATED_GAP: usize = 6;

pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%SZ";

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("insufficient data: need at least 2 records, got {0}")]
    InsufficientData(usize),
    #[error("timestamp {timestamp} is not on the {cadence_minutes}-minute grid starting at {origin}")]
    OffGrid {
        timestamp: NaiveDateTime,
        origin: NaiveDateTime,
        cadence_minutes: i64,
    },
    #[error("cadence must be positive")]
    BadCadence,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// The seven meteorological fields kept from a standard-met record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Field {
    Wdir,
    Wspd,
    Gst,
    Pres,
    Atmp,
    Wtmp,
    Dewp,
}

impl Field {
    pub const ALL: [Field; 7] = [
        Field::Wdir,
        Field::Wspd,
        Field::Gst,
        Field::Pres,
        Field::Atmp,
        Field::Wtmp,
        Field::Dewp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Field::Wdir => "WDIR",
            Field::Wspd => "WSPD",
            Field::Gst => "GST",
            Field::Pres => "PRES",
            Field::Atmp => "ATMP",
            Field::Wtmp => "WTMP",
            Field::Dewp => "DEWP",
        }
    }

    /// Accepts the canonical names plus the legacy `WD` and `BAR` headers.
    pub fn from_name(name: &str) -> Option<Field> {
        match name.trim().to_ascii_uppercase().as_str() {
            "WDIR" | "WD" => Some(Field::Wdir),
            "WSPD" => Some(Field::Wspd),
            "GST" => Some(Field::Gst),
            "PRES" | "BAR" => Some(Field::Pres),
            "ATMP" => Some(Field::Atmp),
            "WTMP" => Some(Field::Wtmp),
            "DEWP" => Some(Field::Dewp),
            _ => None,
        }
    }

    fn index(self) -> usize {
        self as usize
    }

    fn sentinel(self) -> f64 {
        match self {
            Field::Wspd | Field::Gst => 99.0,
            Field::Wdir | Field::Atmp | Field::Wtmp | Field::Dewp => 999.0,
            Field::Pres => 9999.0,
        }
    }

    /// Physically impossible observed values are treated like sentinels.
    fn plausible(self, v: f64) -> bool {
        match self {
            Field::Wdir => (0.0..=360.0).contains(&v),
            Field::Wspd | Field::Gst => v >= 0.0,
            _ => true,
        }
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldFlag {
    Observed,
    Imputed,
    Missing,
}

impl FieldFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            FieldFlag::Observed => "observed",
            FieldFlag::Imputed => "imputed",
            FieldFlag::Missing => "missing",
        }
    }

    fn parse(s: &str) -> Option<FieldFlag> {
        match s.trim() {
            "observed" => Some(FieldFlag::Observed),
            "imputed" => Some(FieldFlag::Imputed),
            "missing" => Some(FieldFlag::Missing),
            _ => None,
        }
    }
}

/// One timestamped observation. Missing values are stored as NaN and
/// always carry [`FieldFlag::Missing`].
#[derive(Debug, Clone, PartialEq)]
pub struct MetRecord {
    pub timestamp: NaiveDateTime,
    values: [f64; 7],
    flags: [FieldFlag; 7],
}

impl MetRecord {
    /// A record with every field missing.
    pub fn empty(timestamp: NaiveDateTime) -> Self {
        MetRecord {
            timestamp,
            values: [f64::NAN; 7],
            flags: [FieldFlag::Missing; 7],
        }
    }

    /// Builds a record from values in [`Field::ALL`] order. Sentinels and
    /// implausible values are flagged missing.
    pub fn observed(timestamp: NaiveDateTime, values: [f64; 7]) -> Self {
        let mut r = MetRecord::empty(timestamp);
        for (field, v) in Field::ALL.into_iter().zip(values) {
            r.set_raw(field, v);
        }
        r
    }

    /// Known (observed or imputed) value of a field.
    pub fn get(&self, field: Field) -> Option<f64> {
        match self.flags[field.index()] {
            FieldFlag::Missing => None,
            _ => Some(self.values[field.index()]),
        }
    }

    /// Stored value; NaN when missing.
    pub fn value(&self, field: Field) -> f64 {
        self.values[field.index()]
    }

    pub fn flag(&self, field: Field) -> FieldFlag {
        self.flags[field.index()]
    }

    /// Stores a raw reading, applying the sentinel and plausibility rules.
    pub fn set_raw(&mut self, field: Field, v: f64) {
        if !v.is_finite() || v == field.sentinel() || !field.plausible(v) {
            self.set_missing(field);
            return;
        }
        // 360 and 0 both mean north
        let v = if field == Field::Wdir && v == 360.0 { 0.0 } else { v };
        self.set(field, v, FieldFlag::Observed);
    }

    pub fn set_missing(&mut self, field: Field) {
        self.values[field.index()] = f64::NAN;
        self.flags[field.index()] = FieldFlag::Missing;
    }

    fn set(&mut self, field: Field, v: f64, flag: FieldFlag) {
        self.values[field.index()] = v;
        self.flags[field.index()] = flag;
    }
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

const DEFAULT_NDBC_COLUMNS: [&str; 19] = [
    "YY", "MM", "DD", "hh", "mm", "WDIR", "WSPD", "GST", "WVHT", "DPD", "APD", "MWD", "PRES",
    "ATMP", "WTMP", "DEWP", "VIS", "PTDY", "TIDE",
];

/// Column positions of the date parts and fields in one layout.
#[derive(Debug, Clone)]
struct Layout {
    year: usize,
    month: usize,
    day: usize,
    hour: usize,
    minute: Option<usize>,
    fields: Vec<(Field, usize)>,
    width: usize,
}

impl Layout {
    fn from_names<S: AsRef<str>>(names: &[S], line: usize) -> Result<Layout, IngestError> {
        let find = |cands: &[&str]| {
            names
                .iter()
                .position(|n| cands.contains(&n.as_ref().trim_start_matches('#')))
        };
        let need = |cands: &[&str], what: &str| {
            find(cands).ok_or_else(|| IngestError::Malformed {
                line,
                message: format!("header has no {what} column"),
            })
        };
        let year = need(&["YY", "YYYY", "yy", "yyyy"], "year")?;
        let month = need(&["MM"], "month")?;
        let day = need(&["DD"], "day")?;
        let hour = need(&["hh"], "hour")?;
        let minute = find(&["mm"]);
        let mut fields = Vec::new();
        for (i, n) in names.iter().enumerate() {
            let n = n.as_ref();
            // "MM" is the month column, not a field
            if n == "MM" || n == "mm" {
                continue;
            }
            if let Some(f) = Field::from_name(n) {
                if !fields.iter().any(|(g, _)| *g == f) {
                    fields.push((f, i));
                }
            }
        }
        let width = fields
            .iter()
            .map(|&(_, i)| i)
            .chain([year, month, day, hour])
            .chain(minute)
            .max()
            .unwrap_or(0)
            + 1;
        Ok(Layout {
            year,
            month,
            day,
            hour,
            minute,
            fields,
            width,
        })
    }
}

fn is_header_token(tok: &str) -> bool {
    matches!(
        tok.trim_start_matches('#'),
        "YY" | "YYYY" | "yy" | "yyyy"
    )
}

fn make_timestamp(
    year: i64,
    month: i64,
    day: i64,
    hour: i64,
    minute: i64,
    line: usize,
) -> Result<NaiveDateTime, IngestError> {
    // two-digit years appear in pre-1999 archives
    let year = if year < 100 { year + 1900 } else { year };
    NaiveDate::from_ymd_opt(year as i32, month as u32, day as u32)
        .and_then(|d| d.and_hms_opt(hour as u32, minute as u32, 0))
        .ok_or_else(|| IngestError::Malformed {
            line,
            message: format!("invalid date {year}-{month}-{day} {hour}:{minute}"),
        })
}

fn parse_int(tok: &str, what: &str, line: usize) -> Result<i64, IngestError> {
    tok.trim().parse::<i64>().map_err(|_| IngestError::Malformed {
        line,
        message: format!("cannot parse {what} from {tok:?}"),
    })
}

/// Parses a numeric cell; `None` for missing-value markers.
fn parse_value(tok: &str, field: Field, line: usize) -> Result<Option<f64>, IngestError> {
    let tok = tok.trim();
    if tok.is_empty() || tok == "MM" {
        return Ok(None);
    }
    tok.parse::<f64>()
        .map(Some)
        .map_err(|_| IngestError::Malformed {
            line,
            message: format!("cannot parse {field} from {tok:?}"),
        })
}

/// Parses NDBC standard-met text. Empty input yields no records.
pub fn parse_ndbc<R: BufRead>(reader: R) -> Result<Vec<MetRecord>, IngestError> {
    let mut layout: Option<Layout> = None;
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let Some(first) = tokens.first() else {
            continue;
        };
        if first.starts_with('#') || is_header_token(first) {
            // the second header line (units) starts with "#yr"
            if is_header_token(first) {
                layout = Some(Layout::from_names(&tokens, line_no)?);
            }
            continue;
        }
        let layout = match &layout {
            Some(l) => l,
            None => layout.insert(Layout::from_names(&DEFAULT_NDBC_COLUMNS, line_no)?),
        };
        if tokens.len() < layout.width {
            return Err(IngestError::Malformed {
                line: line_no,
                message: format!(
                    "expected at least {} columns, found {}",
                    layout.width,
                    tokens.len()
                ),
            });
        }
        let ts = make_timestamp(
            parse_int(tokens[layout.year], "year", line_no)?,
            parse_int(tokens[layout.month], "month", line_no)?,
            parse_int(tokens[layout.day], "day", line_no)?,
            parse_int(tokens[layout.hour], "hour", line_no)?,
            match layout.minute {
                Some(m) => parse_int(tokens[m], "minute", line_no)?,
                None => 0,
            },
            line_no,
        )?;
        let mut rec = MetRecord::empty(ts);
        for &(field, col) in &layout.fields {
            if let Some(v) = parse_value(tokens[col], field, line_no)? {
                rec.set_raw(field, v);
            }
        }
        out.push(rec);
    }
    Ok(out)
}

fn parse_timestamp(s: &str, line: usize) -> Result<NaiveDateTime, IngestError> {
    const FORMATS: [&str; 5] = [
        TIMESTAMP_FORMAT,
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%dT%H:%MZ",
        "%Y-%m-%d %H:%M",
    ];
    let s = s.trim();
    FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        .ok_or_else(|| IngestError::Malformed {
            line,
            message: format!("unrecognised timestamp {s:?}"),
        })
}

/// Parses a named-column CSV. Unknown columns are ignored.
pub fn parse_csv<R: Read>(reader: R) -> Result<Vec<MetRecord>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if headers.iter().all(|h| h.is_empty()) {
        return Ok(Vec::new());
    }
    let ts_col = headers
        .iter()
        .position(|h| h.eq_ignore_ascii_case("timestamp"));
    let split_layout = match ts_col {
        Some(_) => None,
        None => Some(Layout::from_names(&headers, 1)?),
    };
    let mut value_cols: Vec<(Field, usize)> = Vec::new();
    let mut flag_cols: BTreeMap<Field, usize> = BTreeMap::new();
    for (i, h) in headers.iter().enumerate() {
        if let Some(base) = h.strip_suffix("_flag") {
            if let Some(f) = Field::from_name(base) {
                flag_cols.insert(f, i);
            }
        } else if h != "MM" && h != "mm" {
            if let Some(f) = Field::from_name(h) {
                if !value_cols.iter().any(|(g, _)| *g == f) {
                    value_cols.push((f, i));
                }
            }
        }
    }

    let mut out = Vec::new();
    for result in rdr.records() {
        let row = result?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let ts = match (ts_col, &split_layout) {
            (Some(c), _) => parse_timestamp(&row[c], line)?,
            (None, Some(l)) => make_timestamp(
                parse_int(&row[l.year], "year", line)?,
                parse_int(&row[l.month], "month", line)?,
                parse_int(&row[l.day], "day", line)?,
                parse_int(&row[l.hour], "hour", line)?,
                match l.minute {
                    Some(m) => parse_int(&row[m], "minute", line)?,
                    None => 0,
                },
                line,
            )?,
            (None, None) => unreachable!("layout built when no timestamp column"),
        };
        let mut rec = MetRecord::empty(ts);
        for &(field, col) in &value_cols {
            let value = parse_value(&row[col], field, line)?;
            let flag = match flag_cols.get(&field) {
                Some(&fc) => Some(FieldFlag::parse(&row[fc]).ok_or_else(|| {
                    IngestError::Malformed {
                        line,
                        message: format!("bad flag {:?} for {field}", &row[fc]),
                    }
                })?),
                None => None,
            };
            match (value, flag) {
                (None, _) | (_, Some(FieldFlag::Missing)) => rec.set_missing(field),
                (Some(v), None) => rec.set_raw(field, v),
                (Some(v), Some(flag)) => rec.set(field, v, flag),
            }
        }
        out.push(rec);
    }
    Ok(out)
}

/// Reads a file in either format. `.csv` files (or files whose first
/// non-blank line contains a comma) are read as CSV.
pub fn load_path(path: &Path) -> Result<Vec<MetRecord>, IngestError> {
    let text = std::fs::read_to_string(path)?;
    let is_csv = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
        || text
            .lines()
            .find(|l| !l.trim().is_empty())
            .is_some_and(|l| l.contains(','));
    if is_csv {
        parse_csv(text.as_bytes())
    } else {
        parse_ndbc(text.as_bytes())
    }
}

// ---------------------------------------------------------------------------
// Repair
// ---------------------------------------------------------------------------

/// One synthetic change made by [`repair`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum RepairEvent {
    DuplicateDropped {
        timestamp: NaiveDateTime,
    },
    RowInserted {
        index: usize,
        timestamp: NaiveDateTime,
    },
    Interpolated {
        index: usize,
        field: Field,
        value: f64,
    },
    ForwardFilled {
        index: usize,
        field: Field,
        value: f64,
    },
    BackFilled {
        index: usize,
        field: Field,
        value: f64,
    },
}

impl RepairEvent {
    /// True for events that synthesised a field value.
    pub fn is_value_fill(&self) -> bool {
        matches!(
            self,
            RepairEvent::Interpolated { .. }
                | RepairEvent::ForwardFilled { .. }
                | RepairEvent::BackFilled { .. }
        )
    }
}

/// A gap-free series on a fixed cadence. Built by [`repair`] and immutable
/// afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesDataset {
    station_id: String,
    cadence: TimeDelta,
    records: Vec<MetRecord>,
    repair_log: Vec<RepairEvent>,
}

impl SeriesDataset {
    pub fn with_station_id(mut self, id: impl Into<String>) -> Self {
        self.station_id = id.into();
        self
    }

    pub fn station_id(&self) -> &str {
        &self.station_id
    }

    pub fn cadence(&self) -> TimeDelta {
        self.cadence
    }

    pub fn records(&self) -> &[MetRecord] {
        &self.records
    }

    pub fn repair_log(&self) -> &[RepairEvent] {
        &self.repair_log
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Stored values of one field (NaN where missing).
    pub fn column(&self, field: Field) -> Vec<f64> {
        self.records.iter().map(|r| r.value(field)).collect()
    }

    pub fn first_timestamp(&self) -> NaiveDateTime {
        self.records[0].timestamp
    }

    pub fn last_timestamp(&self) -> NaiveDateTime {
        self.records[self.records.len() - 1].timestamp
    }
}

/// Default NDBC cadence.
pub fn ten_minutes() -> TimeDelta {
    TimeDelta::minutes(10)
}

/// Sorts, de-duplicates and fills `raw` onto a `cadence` grid spanning the
/// first to the last timestamp.
pub fn repair(raw: Vec<MetRecord>, cadence: TimeDelta) -> Result<SeriesDataset, IngestError> {
    if cadence <= TimeDelta::zero() {
        return Err(IngestError::BadCadence);
    }
    if raw.len() < 2 {
        return Err(IngestError::InsufficientData(raw.len()));
    }
    let mut log = Vec::new();

    let mut sorted = raw;
    sorted.sort_by_key(|r| r.timestamp); // stable: first occurrence wins
    let mut deduped: Vec<MetRecord> = Vec::with_capacity(sorted.len());
    for rec in sorted {
        if deduped.last().is_some_and(|p| p.timestamp == rec.timestamp) {
            log.push(RepairEvent::DuplicateDropped {
                timestamp: rec.timestamp,
            });
        } else {
            deduped.push(rec);
        }
    }
    if deduped.len() < 2 {
        return Err(IngestError::InsufficientData(deduped.len()));
    }

    let origin = deduped[0].timestamp;
    let step = cadence.num_seconds();
    let slot_of = |ts: NaiveDateTime| -> Result<usize, IngestError> {
        let offset = (ts - origin).num_seconds();
        if offset % step != 0 {
            return Err(IngestError::OffGrid {
                timestamp: ts,
                origin,
                cadence_minutes: cadence.num_minutes(),
            });
        }
        Ok((offset / step) as usize)
    };
    let n = slot_of(deduped[deduped.len() - 1].timestamp)? + 1;

    let mut grid: Vec<Option<MetRecord>> = vec![None; n];
    for rec in deduped {
        let slot = slot_of(rec.timestamp)?;
        grid[slot] = Some(rec);
    }
    let mut records: Vec<MetRecord> = Vec::with_capacity(n);
    for (index, cell) in grid.into_iter().enumerate() {
        match cell {
            Some(r) => records.push(r),
            None => {
                let timestamp = origin + cadence * index as i32;
                log.push(RepairEvent::RowInserted { index, timestamp });
                records.push(MetRecord::empty(timestamp));
            }
        }
    }

    for field in Field::ALL {
        fill_field(&mut records, field, &mut log);
    }

    Ok(SeriesDataset {
        station_id: String::new(),
        cadence,
        records,
        repair_log: log,
    })
}

fn fill_field(records: &mut [MetRecord], field: Field, log: &mut Vec<RepairEvent>) {
    let n = records.len();
    let mut i = 0;
    while i < n {
        if records[i].get(field).is_some() {
            i += 1;
            continue;
        }
        let start = i;
        while i < n && records[i].get(field).is_none() {
            i += 1;
        }
        let end = i; // exclusive
        let len = end - start;
        let before = start.checked_sub(1).map(|j| records[j].value(field));
        let after = (end < n).then(|| records[end].value(field));
        for (k, idx) in (start..end).enumerate() {
            let (value, event) = match (before, after) {
                (Some(a), Some(b)) if len <= MAX_INTERPOLATED_GAP => {
                    let frac = (k + 1) as f64 / (len + 1) as f64;
                    let v = a + (b - a) * frac;
                    (v, RepairEvent::Interpolated { index: idx, field, value: v })
                }
                (Some(a), _) => (a, RepairEvent::ForwardFilled { index: idx, field, value: a }),
                (None, Some(b)) => (b, RepairEvent::BackFilled { index: idx, field, value: b }),
                // the whole column is missing; leave it
                (None, None) => return,
            };
            records[idx].set(field, value, FieldFlag::Imputed);
            log.push(event);
        }
    }
}

// ---------------------------------------------------------------------------
// Summary and writers
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldSummary {
    pub field: Field,
    pub observed: usize,
    pub imputed: usize,
    pub missing: usize,
    pub imputed_fraction: f64,
    pub missing_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IngestSummary {
    pub station_id: String,
    pub rows: usize,
    pub first: NaiveDateTime,
    pub last: NaiveDateTime,
    pub span_minutes: i64,
    pub cadence_minutes: i64,
    pub inserted_rows: usize,
    pub row_imputed_fraction: f64,
    pub duplicates_dropped: usize,
    pub imputed_values: usize,
    pub fields: Vec<FieldSummary>,
}

pub fn summarize(ds: &SeriesDataset) -> IngestSummary {
    let rows = ds.len();
    let nf = rows as f64;
    let inserted_rows = ds
        .repair_log
        .iter()
        .filter(|e| matches!(e, RepairEvent::RowInserted { .. }))
        .count();
    let duplicates_dropped = ds
        .repair_log
        .iter()
        .filter(|e| matches!(e, RepairEvent::DuplicateDropped { .. }))
        .count();
    let fields: Vec<FieldSummary> = Field::ALL
        .iter()
        .map(|&field| {
            let mut counts = [0usize; 3];
            for r in &ds.records {
                counts[r.flag(field) as usize] += 1;
            }
            FieldSummary {
                field,
                observed: counts[0],
                imputed: counts[1],
                missing: counts[2],
                imputed_fraction: counts[1] as f64 / nf,
                missing_fraction: counts[2] as f64 / nf,
            }
        })
        .collect();
    IngestSummary {
        station_id: ds.station_id.clone(),
        rows,
        first: ds.first_timestamp(),
        last: ds.last_timestamp(),
        span_minutes: (ds.last_timestamp() - ds.first_timestamp()).num_minutes(),
        cadence_minutes: ds.cadence.num_minutes(),
        inserted_rows,
        row_imputed_fraction: inserted_rows as f64 / nf,
        duplicates_dropped,
        imputed_values: fields.iter().map(|f| f.imputed).sum(),
        fields,
    }
}

impl fmt::Display for IngestSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "station {}: {} rows, {} .. {} ({} min span, cadence {} min)",
            if self.station_id.is_empty() { "?" } else { &self.station_id },
            self.rows,
            self.first.format(TIMESTAMP_FORMAT),
            self.last.format(TIMESTAMP_FORMAT),
            self.span_minutes,
            self.cadence_minutes
        )?;
        writeln!(
            f,
            "inserted rows: {} ({:.6}), duplicates dropped: {}, imputed values: {}",
            self.inserted_rows, self.row_imputed_fraction, self.duplicates_dropped, self.imputed_values
        )?;
        writeln!(f, "{:<6} {:>10} {:>10} {:>10} {:>10} {:>10}", "field", "observed", "imputed", "missing", "imp_frac", "miss_frac")?;
        for s in &self.fields {
            writeln!(
                f,
                "{:<6} {:>10} {:>10} {:>10} {:>10.6} {:>10.6}",
                s.field.name(),
                s.observed,
                s.imputed,
                s.missing,
                s.imputed_fraction,
                s.missing_fraction
            )?;
        }
        Ok(())
    }
}

/// Writes records as CSV with a `timestamp` column, one column per field
/// and one `<FIELD>_flag` column per field. Missing values are empty.
pub fn write_csv<W: Write>(records: &[MetRecord], writer: W) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["timestamp".to_string()];
    header.extend(Field::ALL.iter().map(|f| f.name().to_string()));
    header.extend(Field::ALL.iter().map(|f| format!("{}_flag", f.name())));
    w.write_record(&header)?;
    for r in records {
        let mut row = Vec::with_capacity(header.len());
        row.push(r.timestamp.format(TIMESTAMP_FORMAT).to_string());
        for f in Field::ALL {
            row.push(match r.get(f) {
                Some(v) => v.to_string(),
                None => String::new(),
            });
        }
        for f in Field::ALL {
            row.push(r.flag(f).as_str().to_string());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the repair log as JSON lines.
pub fn write_repair_log<W: Write>(log: &[RepairEvent], mut writer: W) -> Result<(), IngestError> {
    for event in log {
        serde_json::to_writer(&mut writer, event)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

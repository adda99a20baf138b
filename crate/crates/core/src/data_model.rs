//! Coarse building data: per-day hourly load, average indoor temperature,
//! outdoor temperature and explanatory variables, plus CSV ingestion.
//!
//! CSV layout (one header line, UTF-8):
//!
//! ```text
//! day,hour,load_kw,indoor_temp_c,outdoor_temp_c,solar_wm2,day_of_week
//! 1,0,,22.9,,,mon          <- hour 0 carries the initial indoor temperature
//! 1,1,8.25,23.1,24.0,0,mon
//! ...
//! ```

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Sanity bounds for any temperature in the data, °C.
pub const TEMP_SANITY_MIN: f64 = -60.0;
pub const TEMP_SANITY_MAX: f64 = 80.0;

pub const CSV_HEADER: [&str; 7] =
    ["day", "hour", "load_kw", "indoor_temp_c", "outdoor_temp_c", "solar_wm2", "day_of_week"];

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {row}: {msg}")]
    Malformed { row: usize, msg: String },
    #[error("row {row}: duplicate (day {day}, hour {hour})")]
    Duplicate { row: usize, day: u32, hour: usize },
    #[error("row {row}: non-finite or out-of-range value in {field}")]
    BadValue { row: usize, field: &'static str },
    #[error("incomplete day {day}: {msg}")]
    IncompleteDay { day: u32, msg: String },
    #[error("bad header: expected `{}`", CSV_HEADER.join(","))]
    Header,
    #[error("invalid dataset: {0}")]
    Invalid(String),
    #[error("period {t} out of range 1..={periods}")]
    PeriodOutOfRange { t: usize, periods: usize },
    #[error("requested split {requested} exceeds {available} available days")]
    SplitTooLarge { requested: usize, available: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DayOfWeek {
    Mon,
    Tue,
    Wed,
    Thu,
    Fri,
    Sat,
    Sun,
}

impl DayOfWeek {
    pub const ALL: [DayOfWeek; 7] = [
        DayOfWeek::Mon,
        DayOfWeek::Tue,
        DayOfWeek::Wed,
        DayOfWeek::Thu,
        DayOfWeek::Fri,
        DayOfWeek::Sat,
        DayOfWeek::Sun,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> DayOfWeek {
        Self::ALL[i % 7]
    }

    pub fn is_weekend(self) -> bool {
        matches!(self, DayOfWeek::Sat | DayOfWeek::Sun)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DayOfWeek::Mon => "mon",
            DayOfWeek::Tue => "tue",
            DayOfWeek::Wed => "wed",
            DayOfWeek::Thu => "thu",
            DayOfWeek::Fri => "fri",
            DayOfWeek::Sat => "sat",
            DayOfWeek::Sun => "sun",
        }
    }

    /// Seven-element one-hot encoding.
    pub fn one_hot(self) -> [f64; 7] {
        let mut v = [0.0; 7];
        v[self.index()] = 1.0;
        v
    }
}

impl fmt::Display for DayOfWeek {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DayOfWeek {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .copied()
            .find(|d| d.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown day of week `{s}`"))
    }
}

/// Explanatory variables ψ for one period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanatoryRecord {
    pub day_of_week: DayOfWeek,
    pub outdoor_temp: f64,
    pub solar_irradiation: f64,
    /// Additional numeric features, appended after the built-in ones.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extra: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayRecord {
    pub day_id: u32,
    pub initial_indoor_temp: f64,
    pub load: Vec<f64>,
    pub indoor_temp: Vec<f64>,
    pub outdoor_temp: Vec<f64>,
    pub explanatory: Vec<ExplanatoryRecord>,
}

impl DayRecord {
    pub fn periods(&self) -> usize {
        self.load.len()
    }

    pub fn day_of_week(&self) -> DayOfWeek {
        self.explanatory[0].day_of_week
    }

    /// Checks the per-day invariants.
    pub fn validate(&self) -> Result<(), DataError> {
        let t = self.load.len();
        if t == 0 {
            return Err(DataError::Invalid(format!("day {} has no periods", self.day_id)));
        }
        if self.indoor_temp.len() != t || self.outdoor_temp.len() != t || self.explanatory.len() != t {
            return Err(DataError::Invalid(format!("day {}: series lengths differ", self.day_id)));
        }
        let temp_ok = |v: f64| v.is_finite() && (TEMP_SANITY_MIN..=TEMP_SANITY_MAX).contains(&v);
        if !self.load.iter().all(|v| v.is_finite() && *v >= 0.0) {
            return Err(DataError::Invalid(format!("day {}: invalid load", self.day_id)));
        }
        if !temp_ok(self.initial_indoor_temp)
            || !self.indoor_temp.iter().all(|&v| temp_ok(v))
            || !self.outdoor_temp.iter().all(|&v| temp_ok(v))
        {
            return Err(DataError::Invalid(format!("day {}: temperature out of range", self.day_id)));
        }
        if !self
            .explanatory
            .iter()
            .all(|e| e.solar_irradiation.is_finite() && e.outdoor_temp.is_finite() && e.extra.iter().all(|v| v.is_finite()))
        {
            return Err(DataError::Invalid(format!("day {}: invalid explanatory value", self.day_id)));
        }
        Ok(())
    }

    /// w_{k,t} = [p_{1:t}, φ₀ⁱⁿ, φⁱⁿ_t, φᵒᵘᵗ_t] for 1-based period `t`.
    pub fn feature_vector(&self, t: usize) -> Result<Vec<f64>, DataError> {
        let periods = self.periods();
        if t == 0 || t > periods {
            return Err(DataError::PeriodOutOfRange { t, periods });
        }
        let mut w = Vec::with_capacity(t + 3);
        w.extend_from_slice(&self.load[..t]);
        w.push(self.initial_indoor_temp);
        w.push(self.indoor_temp[t - 1]);
        w.push(self.outdoor_temp[t - 1]);
        Ok(w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetRole {
    Train,
    CrossValidation,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingDataset {
    days: Vec<DayRecord>,
    periods: usize,
    role: DatasetRole,
}

impl TrainingDataset {
    pub fn new(days: Vec<DayRecord>, periods: usize, role: DatasetRole) -> Result<Self, DataError> {
        if periods == 0 {
            return Err(DataError::Invalid("T must be at least 1".into()));
        }
        let mut seen = HashSet::new();
        for d in &days {
            d.validate()?;
            if d.periods() != periods {
                return Err(DataError::Invalid(format!(
                    "day {} has {} periods, expected {periods}",
                    d.day_id,
                    d.periods()
                )));
            }
            if !seen.insert(d.day_id) {
                return Err(DataError::Invalid(format!("duplicate day id {}", d.day_id)));
            }
        }
        Ok(Self { days, periods, role })
    }

    pub fn days(&self) -> &[DayRecord] {
        &self.days
    }

    pub fn periods(&self) -> usize {
        self.periods
    }

    pub fn role(&self) -> DatasetRole {
        self.role
    }

    pub fn len(&self) -> usize {
        self.days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }

    pub fn with_role(mut self, role: DatasetRole) -> Self {
        self.role = role;
        self
    }

    /// Subset by positional indices, keeping the given order.
    pub fn subset(&self, indices: &[usize], role: DatasetRole) -> Self {
        Self { days: indices.iter().map(|&i| self.days[i].clone()).collect(), periods: self.periods, role }
    }

    pub fn build_feature_vector(&self, k: usize, t: usize) -> Result<Vec<f64>, DataError> {
        let day = self
            .days
            .get(k)
            .ok_or_else(|| DataError::Invalid(format!("day index {k} out of range")))?;
        day.feature_vector(t)
    }
}

/// Disjoint seeded split into train / cross-validation / test sets.
pub fn split_dataset(
    ds: &TrainingDataset,
    sizes: (usize, usize, usize),
    seed: u64,
) -> Result<(TrainingDataset, TrainingDataset, TrainingDataset), DataError> {
    let (n_train, n_cv, n_test) = sizes;
    let requested = n_train + n_cv + n_test;
    if requested > ds.len() {
        return Err(DataError::SplitTooLarge { requested, available: ds.len() });
    }
    let mut order: Vec<usize> = (0..ds.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let take = |range: std::ops::Range<usize>| {
        let mut idx = order[range].to_vec();
        idx.sort_unstable();
        idx
    };
    let train = take(0..n_train);
    let cv = take(n_train..n_train + n_cv);
    let test = take(n_train + n_cv..requested);
    Ok((
        ds.subset(&train, DatasetRole::Train),
        ds.subset(&cv, DatasetRole::CrossValidation),
        ds.subset(&test, DatasetRole::Test),
    ))
}

fn parse_field(
    rec: &csv::StringRecord,
    idx: usize,
    row: usize,
    field: &'static str,
) -> Result<Option<f64>, DataError> {
    let s = rec.get(idx).unwrap_or("").trim();
    if s.is_empty() {
        return Ok(None);
    }
    let v: f64 = s
        .parse()
        .map_err(|_| DataError::Malformed { row, msg: format!("cannot parse {field} `{s}`") })?;
    if !v.is_finite() {
        return Err(DataError::BadValue { row, field });
    }
    Ok(Some(v))
}

fn required(v: Option<f64>, row: usize, field: &'static str) -> Result<f64, DataError> {
    v.ok_or_else(|| DataError::Malformed { row, msg: format!("missing {field}") })
}

#[derive(Default)]
struct PartialDay {
    initial: Option<f64>,
    dow: Option<DayOfWeek>,
    first_row: usize,
    hours: BTreeMap<usize, (f64, f64, f64, f64)>,
}

/// Reads and validates a building CSV from any reader.
pub fn read_dataset<R: Read>(reader: R, periods: usize) -> Result<TrainingDataset, DataError> {
    if periods == 0 {
        return Err(DataError::Invalid("T must be at least 1".into()));
    }
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.len() != CSV_HEADER.len() || header.iter().zip(CSV_HEADER).any(|(a, b)| a.trim() != b) {
        return Err(DataError::Header);
    }
    let temp_ok = |v: f64| (TEMP_SANITY_MIN..=TEMP_SANITY_MAX).contains(&v);
    let mut days: BTreeMap<u32, PartialDay> = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        // Line numbers are 1-based with the header on line 1.
        let row = i + 2;
        let rec = rec.map_err(|e| DataError::Malformed { row, msg: e.to_string() })?;
        let day: u32 = rec[0]
            .trim()
            .parse()
            .map_err(|_| DataError::Malformed { row, msg: format!("bad day `{}`", &rec[0]) })?;
        let hour: usize = rec[1]
            .trim()
            .parse()
            .map_err(|_| DataError::Malformed { row, msg: format!("bad hour `{}`", &rec[1]) })?;
        if hour > periods {
            return Err(DataError::Malformed { row, msg: format!("hour {hour} outside 0..={periods}") });
        }
        let dow: DayOfWeek = rec[6].parse().map_err(|msg| DataError::Malformed { row, msg })?;
        let entry = days.entry(day).or_insert_with(|| PartialDay { first_row: row, ..Default::default() });
        match entry.dow {
            Some(d) if d != dow => {
                return Err(DataError::Malformed { row, msg: format!("day {day} changes day_of_week") })
            }
            _ => entry.dow = Some(dow),
        }
        let indoor = required(parse_field(&rec, 3, row, "indoor_temp_c")?, row, "indoor_temp_c")?;
        if !temp_ok(indoor) {
            return Err(DataError::BadValue { row, field: "indoor_temp_c" });
        }
        if hour == 0 {
            if entry.initial.is_some() {
                return Err(DataError::Duplicate { row, day, hour });
            }
            entry.initial = Some(indoor);
            continue;
        }
        let load = required(parse_field(&rec, 2, row, "load_kw")?, row, "load_kw")?;
        if load < 0.0 {
            return Err(DataError::BadValue { row, field: "load_kw" });
        }
        let outdoor = required(parse_field(&rec, 4, row, "outdoor_temp_c")?, row, "outdoor_temp_c")?;
        if !temp_ok(outdoor) {
            return Err(DataError::BadValue { row, field: "outdoor_temp_c" });
        }
        let solar = required(parse_field(&rec, 5, row, "solar_wm2")?, row, "solar_wm2")?;
        if entry.hours.insert(hour, (load, indoor, outdoor, solar)).is_some() {
            return Err(DataError::Duplicate { row, day, hour });
        }
    }

    let mut out = Vec::with_capacity(days.len());
    for (day_id, part) in days {
        let initial = part.initial.ok_or_else(|| DataError::IncompleteDay {
            day: day_id,
            msg: format!("missing hour 0 row (first seen on row {})", part.first_row),
        })?;
        if part.hours.len() != periods {
            return Err(DataError::IncompleteDay {
                day: day_id,
                msg: format!("{} of {periods} hourly rows (first seen on row {})", part.hours.len(), part.first_row),
            });
        }
        let dow = part.dow.expect("set with first row");
        let mut rec = DayRecord {
            day_id,
            initial_indoor_temp: initial,
            load: Vec::with_capacity(periods),
            indoor_temp: Vec::with_capacity(periods),
            outdoor_temp: Vec::with_capacity(periods),
            explanatory: Vec::with_capacity(periods),
        };
        for (_, (load, indoor, outdoor, solar)) in part.hours {
            rec.load.push(load);
            rec.indoor_temp.push(indoor);
            rec.outdoor_temp.push(outdoor);
            rec.explanatory.push(ExplanatoryRecord {
                day_of_week: dow,
                outdoor_temp: outdoor,
                solar_irradiation: solar,
                extra: Vec::new(),
            });
        }
        out.push(rec);
    }
    TrainingDataset::new(out, periods, DatasetRole::Train)
}

pub fn load_dataset(path: &Path, periods: usize) -> Result<TrainingDataset, DataError> {
    let file = std::fs::File::open(path)?;
    read_dataset(std::io::BufReader::new(file), periods)
}

/// Writes the dataset in the CSV layout accepted by [`read_dataset`].
///
/// Floats use Rust's shortest round-trip formatting, so re-reading is bit-exact.
pub fn write_dataset<W: Write>(ds: &TrainingDataset, writer: W) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_HEADER)?;
    for day in ds.days() {
        let id = day.day_id.to_string();
        let dow = day.day_of_week().as_str();
        w.write_record([id.as_str(), "0", "", &day.initial_indoor_temp.to_string(), "", "", dow])?;
        for t in 0..day.periods() {
            w.write_record([
                id.clone(),
                (t + 1).to_string(),
                day.load[t].to_string(),
                day.indoor_temp[t].to_string(),
                day.outdoor_temp[t].to_string(),
                day.explanatory[t].solar_irradiation.to_string(),
                dow.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn save_dataset(ds: &TrainingDataset, path: &Path) -> Result<(), DataError> {
    let file = std::fs::File::create(path)?;
    write_dataset(ds, std::io::BufWriter::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn day(id: u32, periods: usize, dow: DayOfWeek) -> DayRecord {
        DayRecord {
            day_id: id,
            initial_indoor_temp: 22.5,
            load: (0..periods).map(|t| 5.0 + t as f64 * 0.5).collect(),
            indoor_temp: (0..periods).map(|t| 22.0 + 0.1 * t as f64).collect(),
            outdoor_temp: (0..periods).map(|t| 25.0 + 0.3 * t as f64).collect(),
            explanatory: (0..periods)
                .map(|t| ExplanatoryRecord {
                    day_of_week: dow,
                    outdoor_temp: 25.0 + 0.3 * t as f64,
                    solar_irradiation: 100.0 * t as f64,
                    extra: vec![],
                })
                .collect(),
        }
    }

    fn csv_of(ds: &TrainingDataset) -> String {
        let mut buf = Vec::new();
        write_dataset(ds, &mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn two_day_file_ingests() {
        let ds = TrainingDataset::new(vec![day(1, 24, DayOfWeek::Mon), day(2, 24, DayOfWeek::Tue)], 24, DatasetRole::Train)
            .unwrap();
        let back = read_dataset(csv_of(&ds).as_bytes(), 24).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back, ds);
    }

    #[test]
    fn incomplete_day_is_reported() {
        let ds = TrainingDataset::new(vec![day(4, 24, DayOfWeek::Mon), day(5, 24, DayOfWeek::Tue)], 24, DatasetRole::Train)
            .unwrap();
        let text = csv_of(&ds);
        let kept: Vec<&str> = text.lines().filter(|l| !l.starts_with("5,24,")).collect();
        let err = read_dataset(kept.join("\n").as_bytes(), 24).unwrap_err();
        assert!(err.to_string().contains("incomplete day 5"), "{err}");
    }

    #[test]
    fn duplicate_key_reports_row() {
        let ds = TrainingDataset::new(vec![day(1, 2, DayOfWeek::Mon)], 2, DatasetRole::Train).unwrap();
        let mut text = csv_of(&ds);
        let dup = text.lines().nth(2).unwrap().to_string();
        text.push_str(&dup);
        text.push('\n');
        match read_dataset(text.as_bytes(), 2).unwrap_err() {
            DataError::Duplicate { row, day, hour } => assert_eq!((row, day, hour), (5, 1, 1)),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn non_finite_and_malformed_rows_rejected() {
        let head = CSV_HEADER.join(",");
        let bad = format!("{head}\n1,0,,22,,,mon\n1,1,NaN,22,20,0,mon\n");
        assert!(matches!(read_dataset(bad.as_bytes(), 1), Err(DataError::BadValue { row: 3, .. })));
        let bad = format!("{head}\n1,0,,22,,,mon\n1,1,abc,22,20,0,mon\n");
        assert!(matches!(read_dataset(bad.as_bytes(), 1), Err(DataError::Malformed { row: 3, .. })));
        let bad = format!("{head}\n1,0,,22,,,mon\n1,1,3,22,,0,mon\n");
        assert!(matches!(read_dataset(bad.as_bytes(), 1), Err(DataError::Malformed { row: 3, .. })));
        let bad = format!("{head}\n1,0,,22,,,mon\n1,1,3,95,20,0,mon\n");
        assert!(matches!(read_dataset(bad.as_bytes(), 1), Err(DataError::BadValue { row: 3, .. })));
        let bad = format!("{head}\n1,0,,22,,,xyz\n");
        assert!(matches!(read_dataset(bad.as_bytes(), 1), Err(DataError::Malformed { row: 2, .. })));
        assert!(matches!(read_dataset("a,b\n".as_bytes(), 1), Err(DataError::Header)));
    }

    #[test]
    fn split_is_disjoint_and_deterministic() {
        let days: Vec<_> = (0..500).map(|i| day(i, 3, DayOfWeek::from_index(i as usize))).collect();
        let ds = TrainingDataset::new(days, 3, DatasetRole::Train).unwrap();
        let (a, b, c) = split_dataset(&ds, (300, 100, 100), 1).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (300, 100, 100));
        assert_eq!(a.role(), DatasetRole::Train);
        assert_eq!(b.role(), DatasetRole::CrossValidation);
        assert_eq!(c.role(), DatasetRole::Test);
        let mut ids: Vec<u32> = a.days().iter().chain(b.days()).chain(c.days()).map(|d| d.day_id).collect();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), 500);
        let (a2, b2, c2) = split_dataset(&ds, (300, 100, 100), 1).unwrap();
        assert_eq!((a, b, c), (a2, b2, c2));

        let small = ds.subset(&(0..10).collect::<Vec<_>>(), DatasetRole::Train);
        let (a, b, c) = split_dataset(&small, (10, 0, 0), 3).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (10, 0, 0));
        assert!(matches!(split_dataset(&small, (8, 2, 1), 3), Err(DataError::SplitTooLarge { .. })));
    }

    #[test]
    fn feature_vector_layout() {
        let ds = TrainingDataset::new(vec![day(1, 24, DayOfWeek::Mon)], 24, DatasetRole::Train).unwrap();
        let d = &ds.days()[0];
        assert_eq!(
            ds.build_feature_vector(0, 1).unwrap(),
            vec![d.load[0], d.initial_indoor_temp, d.indoor_temp[0], d.outdoor_temp[0]]
        );
        assert_eq!(ds.build_feature_vector(0, 24).unwrap().len(), 27);
        assert!(matches!(ds.build_feature_vector(0, 0), Err(DataError::PeriodOutOfRange { .. })));
        assert!(matches!(ds.build_feature_vector(0, 25), Err(DataError::PeriodOutOfRange { .. })));
    }

    #[test]
    fn dataset_rejects_mixed_periods_and_duplicate_ids() {
        assert!(TrainingDataset::new(vec![day(1, 3, DayOfWeek::Mon), day(2, 4, DayOfWeek::Mon)], 3, DatasetRole::Train).is_err());
        assert!(TrainingDataset::new(vec![day(1, 3, DayOfWeek::Mon), day(1, 3, DayOfWeek::Mon)], 3, DatasetRole::Train).is_err());
    }

    #[test]
    fn day_of_week_parsing() {
        assert_eq!("Sat".parse::<DayOfWeek>().unwrap(), DayOfWeek::Sat);
        assert!(DayOfWeek::Sun.is_weekend() && !DayOfWeek::Fri.is_weekend());
        assert_eq!(DayOfWeek::Wed.one_hot()[2], 1.0);
    }
}

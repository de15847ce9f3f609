//! Minute-level activity records to normalized curves.
//!
//! Records are grouped per subject and visit, averaged over days (absent
//! minutes count as zero), smoothed with a cubic smoothing spline of fixed
//! equivalent degrees of freedom, sampled every `epoch_min` minutes and
//! mapped affinely into `[-1, 1]^2` with cohort-global scale parameters.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Curve, Vec2};
use crate::spline::SmoothingSpline;

pub const MINUTES_PER_DAY: u32 = 1440;
pub const CSV_HEADER: [&str; 5] = ["subject_id", "visit", "day_index", "minute_of_day", "vm"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    /// First minute of the analysis window (inclusive).
    pub window_start_min: u32,
    /// End of the analysis window (exclusive).
    pub window_end_min: u32,
    /// Equivalent degrees of freedom of the smoothing spline.
    pub target_df: f64,
    /// Spacing of curve vertices in minutes; the spline is fit at 1-minute
    /// resolution and sampled on this stride.
    pub epoch_min: u32,
    /// Fixed maximal magnitude; `None` takes the pooled cohort maximum.
    pub m_max: Option<f64>,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            window_start_min: 360,
            window_end_min: 1440,
            target_df: 25.0,
            epoch_min: 1,
            m_max: None,
        }
    }
}

impl PreprocessConfig {
    pub fn window_len(&self) -> usize {
        (self.window_end_min - self.window_start_min) as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_start_min >= self.window_end_min || self.window_end_min > MINUTES_PER_DAY {
            return Err(Error::Config(format!(
                "window [{}, {}) must satisfy start < end <= {MINUTES_PER_DAY}",
                self.window_start_min, self.window_end_min
            )));
        }
        let n = self.window_len() as f64;
        if !(self.target_df > 1.0 && self.target_df < n) {
            return Err(Error::Config(format!(
                "target_df {} must lie in (1, {n})",
                self.target_df
            )));
        }
        if self.epoch_min == 0 {
            return Err(Error::Config("epoch_min must be positive".into()));
        }
        if self.curve_minutes().len() < 4 {
            return Err(Error::Config("window and epoch give fewer than 4 curve points".into()));
        }
        if let Some(m) = self.m_max {
            if !(m > 0.0 && m.is_finite()) {
                return Err(Error::Config(format!("m_max must be positive, got {m}")));
            }
        }
        Ok(())
    }

    /// Minutes at which curve vertices are placed.
    pub fn curve_minutes(&self) -> Vec<u32> {
        (self.window_start_min..self.window_end_min)
            .step_by(self.epoch_min.max(1) as usize)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RawRecord {
    pub subject_id: String,
    pub visit: u32,
    pub day_index: u32,
    pub minute_of_day: u32,
    pub vm: f64,
}

/// All in-window records of one subject, split by visit.
#[derive(Clone, Debug, Default)]
pub struct SubjectRecords {
    pub subject_id: String,
    pub baseline: Vec<RawRecord>,
    pub follow_up: Vec<RawRecord>,
}

impl SubjectRecords {
    pub fn is_complete(&self) -> bool {
        !self.baseline.is_empty() && !self.follow_up.is_empty()
    }

    pub fn visit(&self, visit: u32) -> &[RawRecord] {
        if visit == 0 {
            &self.baseline
        } else {
            &self.follow_up
        }
    }
}

/// Parsed records for a cohort, ordered by subject id.
#[derive(Clone, Debug, Default)]
pub struct ActivityData {
    pub subjects: Vec<SubjectRecords>,
}

impl ActivityData {
    pub fn complete(&self) -> impl Iterator<Item = &SubjectRecords> {
        self.subjects.iter().filter(|s| s.is_complete())
    }

    pub fn incomplete_ids(&self) -> Vec<&str> {
        self.subjects
            .iter()
            .filter(|s| !s.is_complete())
            .map(|s| s.subject_id.as_str())
            .collect()
    }
}

pub fn parse_activity_csv(path: &Path, config: &PreprocessConfig) -> Result<ActivityData> {
    let file = std::fs::File::open(path)?;
    parse_activity_reader(file, config)
}

pub fn parse_activity_reader<R: Read>(reader: R, config: &PreprocessConfig) -> Result<ActivityData> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::Parse {
            line: 1,
            msg: format!("expected header `{}`", CSV_HEADER.join(",")),
        });
    }
    let mut seen: HashMap<(String, u32, u32, u32), u64> = HashMap::new();
    let mut groups: BTreeMap<String, SubjectRecords> = BTreeMap::new();
    for row in rdr.records() {
        let row = row.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            msg: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let rec = parse_row(&row, line)?;
        let key = (rec.subject_id.clone(), rec.visit, rec.day_index, rec.minute_of_day);
        if seen.insert(key, line).is_some() {
            return Err(Error::DuplicateRecord {
                subject: rec.subject_id,
                visit: rec.visit,
                day: rec.day_index,
                minute: rec.minute_of_day,
                line,
            });
        }
        let group = groups
            .entry(rec.subject_id.clone())
            .or_insert_with(|| SubjectRecords {
                subject_id: rec.subject_id.clone(),
                ..Default::default()
            });
        if rec.minute_of_day < config.window_start_min || rec.minute_of_day >= config.window_end_min {
            continue;
        }
        if rec.visit == 0 {
            group.baseline.push(rec);
        } else {
            group.follow_up.push(rec);
        }
    }
    Ok(ActivityData {
        subjects: groups.into_values().collect(),
    })
}

fn parse_row(row: &csv::StringRecord, line: u64) -> Result<RawRecord> {
    let err = |msg: String| Error::Parse { line, msg };
    if row.len() != 5 {
        return Err(err(format!("expected 5 fields, found {}", row.len())));
    }
    let int = |i: usize| -> Result<u32> {
        row[i]
            .parse::<u32>()
            .map_err(|_| err(format!("{} is not a nonnegative integer: {:?}", CSV_HEADER[i], &row[i])))
    };
    let subject_id = row[0].to_string();
    if subject_id.is_empty() {
        return Err(err("empty subject_id".into()));
    }
    let visit = int(1)?;
    if visit > 1 {
        return Err(err(format!("visit must be 0 or 1, got {visit}")));
    }
    let day_index = int(2)?;
    let minute_of_day = int(3)?;
    if minute_of_day >= MINUTES_PER_DAY {
        return Err(err(format!("minute_of_day {minute_of_day} outside [0, 1439]")));
    }
    let vm: f64 = row[4]
        .parse()
        .map_err(|_| err(format!("vm is not numeric: {:?}", &row[4])))?;
    if !vm.is_finite() {
        return Err(err(format!("vm is not finite: {vm}")));
    }
    if vm < 0.0 {
        return Err(err(format!("negative vm {vm}")));
    }
    Ok(RawRecord {
        subject_id,
        visit,
        day_index,
        minute_of_day,
        vm,
    })
}

/// Values on a grid of whole minutes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinuteSeries {
    pub minutes: Vec<u32>,
    pub values: Vec<f64>,
}

impl MinuteSeries {
    pub fn len(&self) -> usize {
        self.minutes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.minutes.is_empty()
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Keeps the minutes in `[start, end)`.
    pub fn window(&self, start: u32, end: u32) -> MinuteSeries {
        let (minutes, values) = self
            .minutes
            .iter()
            .zip(&self.values)
            .filter(|(m, _)| (start..end).contains(*m))
            .map(|(m, v)| (*m, *v))
            .unzip();
        MinuteSeries { minutes, values }
    }

    /// Values at the given minutes, which must be on the grid.
    pub fn sample(&self, minutes: &[u32]) -> Result<MinuteSeries> {
        let values = minutes
            .iter()
            .map(|m| {
                self.minutes
                    .binary_search(m)
                    .map(|i| self.values[i])
                    .map_err(|_| Error::Dimension(format!("minute {m} not on the series grid")))
            })
            .collect::<Result<_>>()?;
        Ok(MinuteSeries {
            minutes: minutes.to_vec(),
            values,
        })
    }
}

/// Mean over the days present of each in-window minute, absent minutes as 0.
pub fn average_days(records: &[RawRecord], config: &PreprocessConfig) -> Result<MinuteSeries> {
    let days: BTreeSet<u32> = records.iter().map(|r| r.day_index).collect();
    if days.is_empty() {
        return Err(Error::Degenerate("no days to average".into()));
    }
    let start = config.window_start_min;
    let mut sums = vec![0.0; config.window_len()];
    for r in records {
        if r.minute_of_day >= start && r.minute_of_day < config.window_end_min {
            sums[(r.minute_of_day - start) as usize] += r.vm;
        }
    }
    let n_days = days.len() as f64;
    Ok(MinuteSeries {
        minutes: (start..config.window_end_min).collect(),
        values: sums.into_iter().map(|s| s / n_days).collect(),
    })
}

/// Smoothing-spline fit with smoother trace `target_df`, on the same grid.
pub fn smooth_spline(series: &MinuteSeries, target_df: f64) -> Result<MinuteSeries> {
    let x: Vec<f64> = series.minutes.iter().map(|&m| m as f64).collect();
    let spline = SmoothingSpline::new(&x)?;
    let lambda = spline.lambda_for_df(target_df)?;
    Ok(MinuteSeries {
        minutes: series.minutes.clone(),
        values: spline.fit(&series.values, lambda)?,
    })
}

/// Cohort-global affine map between minutes/magnitudes and `[-1, 1]^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleParams {
    pub t_min: f64,
    pub t_max: f64,
    pub m_max: f64,
}

impl ScaleParams {
    pub fn new(t_min: f64, t_max: f64, m_max: f64) -> Result<Self> {
        if !(m_max > 0.0 && m_max.is_finite()) {
            return Err(Error::Config(format!("m_max must be positive, got {m_max}")));
        }
        if !(t_max > t_min) {
            return Err(Error::Config(format!("t_max {t_max} must exceed t_min {t_min}")));
        }
        Ok(Self { t_min, t_max, m_max })
    }

    /// Time range from the first and last grid minute, `m_max` the pooled
    /// maximum over every series.
    pub fn from_cohort<'a>(series: impl IntoIterator<Item = &'a MinuteSeries>) -> Result<Self> {
        let mut t_min = f64::INFINITY;
        let mut t_max = f64::NEG_INFINITY;
        let mut m_max = f64::NEG_INFINITY;
        for s in series {
            if let (Some(a), Some(b)) = (s.minutes.first(), s.minutes.last()) {
                t_min = t_min.min(*a as f64);
                t_max = t_max.max(*b as f64);
            }
            m_max = m_max.max(s.max_value());
        }
        Self::new(t_min, t_max, m_max)
    }

    pub fn to_x(&self, t: f64) -> f64 {
        2.0 * (t - self.t_min) / (self.t_max - self.t_min) - 1.0
    }

    pub fn to_y(&self, value: f64) -> f64 {
        2.0 * value.clamp(0.0, self.m_max) / self.m_max - 1.0
    }

    pub fn from_x(&self, x: f64) -> f64 {
        (x + 1.0) * 0.5 * (self.t_max - self.t_min) + self.t_min
    }

    pub fn from_y(&self, y: f64) -> f64 {
        (y + 1.0) * 0.5 * self.m_max
    }
}

pub fn normalize_curve(series: &MinuteSeries, scale: &ScaleParams) -> Result<Curve<f64>> {
    ScaleParams::new(scale.t_min, scale.t_max, scale.m_max)?;
    let points = series
        .minutes
        .iter()
        .zip(&series.values)
        .map(|(&t, &v)| Vec2::new(scale.to_x(t as f64), scale.to_y(v)))
        .collect();
    Curve::new(points)
}

/// Inverse of [`normalize_curve`] as `(minute, magnitude)` pairs.
pub fn denormalize_curve(curve: &Curve<f64>, scale: &ScaleParams) -> Vec<(f64, f64)> {
    curve
        .points()
        .iter()
        .map(|p| (scale.from_x(p.x), scale.from_y(p.y)))
        .collect()
}

/// Smoothed and sampled visit pair for one subject, before normalization.
#[derive(Clone, Debug)]
pub struct SmoothedSubject {
    pub subject_id: String,
    pub visits: [MinuteSeries; 2],
}

#[derive(Clone, Debug)]
pub struct SubjectCurves {
    pub subject_id: String,
    pub baseline: Curve<f64>,
    pub follow_up: Curve<f64>,
}

#[derive(Clone, Debug)]
pub struct PreprocessedCohort {
    pub subjects: Vec<SubjectCurves>,
    pub scale: ScaleParams,
    pub achieved_df: f64,
    pub incomplete: Vec<String>,
}

/// Average, smooth and sample every complete subject, then normalize with
/// cohort-global scale parameters. Subjects are processed in parallel.
pub fn preprocess(data: &ActivityData, config: &PreprocessConfig) -> Result<PreprocessedCohort> {
    config.validate()?;
    let grid: Vec<f64> = (config.window_start_min..config.window_end_min)
        .map(|m| m as f64)
        .collect();
    let spline = SmoothingSpline::new(&grid)?;
    let lambda = spline.lambda_for_df(config.target_df)?;
    let achieved_df = spline.df(lambda)?;
    let sample_at = config.curve_minutes();
    let complete: Vec<&SubjectRecords> = data.complete().collect();
    let smoothed: Vec<SmoothedSubject> = complete
        .par_iter()
        .map(|s| {
            let run = |visit: u32| -> Result<MinuteSeries> {
                let avg = average_days(s.visit(visit), config)?;
                let fitted = MinuteSeries {
                    minutes: avg.minutes.clone(),
                    values: spline.fit(&avg.values, lambda)?,
                };
                fitted.sample(&sample_at)
            };
            Ok(SmoothedSubject {
                subject_id: s.subject_id.clone(),
                visits: [run(0)?, run(1)?],
            })
        })
        .collect::<Result<_>>()?;
    if smoothed.is_empty() {
        return Err(Error::Degenerate("no complete subjects".into()));
    }
    let pooled = ScaleParams::from_cohort(smoothed.iter().flat_map(|s| s.visits.iter()))?;
    let scale = match config.m_max {
        Some(m) => ScaleParams::new(pooled.t_min, pooled.t_max, m)?,
        None => pooled,
    };
    let subjects = smoothed
        .iter()
        .map(|s| {
            let wrap = |e| Error::Subject {
                subject: s.subject_id.clone(),
                source: Box::new(e),
            };
            Ok(SubjectCurves {
                subject_id: s.subject_id.clone(),
                baseline: normalize_curve(&s.visits[0], &scale).map_err(wrap)?,
                follow_up: normalize_curve(&s.visits[1], &scale).map_err(wrap)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(PreprocessedCohort {
        subjects,
        scale,
        achieved_df,
        incomplete: data.incomplete_ids().into_iter().map(String::from).collect(),
    })
}

pub const CURVES_HEADER: [&str; 4] = ["subject_id", "visit", "x", "y"];

/// Fixed 17-significant-digit formatting used for every numeric CSV field.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_curves_csv<W: Write>(writer: W, subjects: &[SubjectCurves]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CURVES_HEADER)?;
    for s in subjects {
        for (visit, curve) in [(0, &s.baseline), (1, &s.follow_up)] {
            for p in curve.points() {
                w.write_record([
                    s.subject_id.as_str(),
                    if visit == 0 { "0" } else { "1" },
                    &fmt_f64(p.x),
                    &fmt_f64(p.y),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads curves written by [`write_curves_csv`]. Subjects keep file order.
/// A subject whose curve fails validation is returned as an error entry so
/// callers can isolate it.
pub fn read_curves_csv<R: Read>(reader: R) -> Result<Vec<(String, Result<SubjectCurves>)>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().ne(CURVES_HEADER.iter().copied()) {
        return Err(Error::Parse {
            line: 1,
            msg: format!("expected header `{}`", CURVES_HEADER.join(",")),
        });
    }
    let mut order: Vec<String> = Vec::new();
    let mut pts: HashMap<String, [Vec<Vec2<f64>>; 2]> = HashMap::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let err = |msg: String| Error::Parse { line, msg };
        if row.len() != 4 {
            return Err(err(format!("expected 4 fields, found {}", row.len())));
        }
        let visit: usize = match &row[1] {
            "0" => 0,
            "1" => 1,
            v => return Err(err(format!("visit must be 0 or 1, got {v:?}"))),
        };
        let num = |i: usize| -> Result<f64> {
            row[i]
                .parse::<f64>()
                .map_err(|_| err(format!("{} is not numeric: {:?}", CURVES_HEADER[i], &row[i])))
        };
        let p = Vec2::new(num(2)?, num(3)?);
        let id = row[0].to_string();
        let entry = pts.entry(id.clone()).or_insert_with(|| {
            order.push(id);
            [Vec::new(), Vec::new()]
        });
        entry[visit].push(p);
    }
    Ok(order
        .into_iter()
        .map(|id| {
            let [b, f] = pts.remove(&id).unwrap_or_default();
            let res = (|| {
                Ok(SubjectCurves {
                    subject_id: id.clone(),
                    baseline: Curve::new(b)?,
                    follow_up: Curve::new(f)?,
                })
            })();
            (id, res)
        })
        .collect())
}

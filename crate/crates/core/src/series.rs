//! Uniformly sampled power channels, CSV ingestion and resampling.

use std::io::{Read, Write};

use crate::error::{Error, Result};

/// Gap marker for missing readings. Test with [`is_gap`], never with `==`.
pub const GAP: f64 = f64::NAN;

#[inline]
pub fn is_gap(v: f64) -> bool {
    v.is_nan()
}

/// One channel of watt readings. Sample `i` sits at `start_time + i * period`.
#[derive(Debug, Clone)]
pub struct PowerSeries {
    label: String,
    start_time: i64,
    period: i64,
    values: Vec<f64>,
}

impl PartialEq for PowerSeries {
    fn eq(&self, other: &Self) -> bool {
        self.label == other.label
            && self.start_time == other.start_time
            && self.period == other.period
            && self.values.len() == other.values.len()
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| a == b || (is_gap(*a) && is_gap(*b)))
    }
}

impl PowerSeries {
    pub fn new(
        label: impl Into<String>,
        start_time: i64,
        period: i64,
        values: Vec<f64>,
    ) -> Result<Self> {
        let label = label.into();
        let invalid = |reason: String| Error::InvalidSeries {
            label: label.clone(),
            reason,
        };
        if period <= 0 {
            return Err(invalid(format!("period must be > 0, got {period}")));
        }
        if values.is_empty() {
            return Err(invalid("series is empty".into()));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !is_gap(**v) && (!v.is_finite() || **v < 0.0))
        {
            return Err(invalid(format!("value {v} at index {i} is not a finite non-negative number")));
        }
        Ok(Self {
            label,
            start_time,
            period,
            values,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn start_time(&self) -> i64 {
        self.start_time
    }

    pub fn period(&self) -> i64 {
        self.period
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Exclusive end of the covered time range.
    pub fn end_time(&self) -> i64 {
        self.start_time + self.values.len() as i64 * self.period
    }

    pub fn timestamp(&self, i: usize) -> i64 {
        self.start_time + i as i64 * self.period
    }

    pub fn gap_count(&self) -> usize {
        self.values.iter().filter(|v| is_gap(**v)).count()
    }

    pub fn has_gaps(&self) -> bool {
        self.values.iter().any(|v| is_gap(*v))
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Same grid and label, new values (validated).
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.values.len() {
            return Err(Error::LengthMismatch(self.values.len(), values.len()));
        }
        Self::new(self.label.clone(), self.start_time, self.period, values)
    }

    /// Samples `start..end` by index.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.values.len() {
            return Err(Error::InvalidSeries {
                label: self.label.clone(),
                reason: format!("bad slice {start}..{end} of length {}", self.values.len()),
            });
        }
        Ok(Self {
            label: self.label.clone(),
            start_time: self.timestamp(start),
            period: self.period,
            values: self.values[start..end].to_vec(),
        })
    }
}

/// Reads the dataset CSV format (`timestamp,aggregate,<appliance>,...`),
/// inferring the period as the smallest timestamp step.
pub fn load_csv<R: Read>(reader: R) -> Result<Vec<PowerSeries>> {
    load_csv_with_period(reader, None)
}

/// Reads the dataset CSV format. Timestamps are integer UTC seconds and must
/// be strictly increasing; empty cells become gaps, and grid points with no
/// row at all are also filled with gaps.
pub fn load_csv_with_period<R: Read>(reader: R, period: Option<i64>) -> Result<Vec<PowerSeries>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Csv { line: 1, reason: e.to_string() })?
        .clone();
    if headers.len() < 2 {
        return Err(Error::Csv {
            line: 1,
            reason: "expected a timestamp column and at least one channel".into(),
        });
    }
    let labels: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();

    let mut stamps: Vec<i64> = Vec::new();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); labels.len()];
    for (row_idx, record) in rdr.records().enumerate() {
        let line = row_idx as u64 + 2;
        let record = record.map_err(|e| Error::Csv { line, reason: e.to_string() })?;
        if record.len() != headers.len() {
            return Err(Error::Csv {
                line,
                reason: format!("expected {} fields, got {}", headers.len(), record.len()),
            });
        }
        let ts: i64 = record[0].parse().map_err(|_| Error::Csv {
            line,
            reason: format!("unparseable timestamp `{}`", &record[0]),
        })?;
        if let Some(&prev) = stamps.last() {
            if ts <= prev {
                return Err(Error::NonMonotone { line });
            }
        }
        stamps.push(ts);
        for (col, cell) in columns.iter_mut().zip(record.iter().skip(1)) {
            if cell.is_empty() {
                col.push(GAP);
            } else {
                let v: f64 = cell.parse().map_err(|_| Error::Csv {
                    line,
                    reason: format!("unparseable number `{cell}`"),
                })?;
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::Csv {
                        line,
                        reason: format!("value `{cell}` is not a finite non-negative number"),
                    });
                }
                col.push(v);
            }
        }
    }
    if stamps.is_empty() {
        return Err(Error::NoRows);
    }

    let period = match period {
        Some(p) if p > 0 => p,
        Some(p) => {
            return Err(Error::Csv {
                line: 1,
                reason: format!("period must be > 0, got {p}"),
            })
        }
        None => stamps
            .windows(2)
            .map(|w| w[1] - w[0])
            .min()
            .ok_or_else(|| Error::Csv {
                line: 2,
                reason: "cannot infer the sample period from a single row".into(),
            })?,
    };

    let start = stamps[0];
    let mut slots = Vec::with_capacity(stamps.len());
    for (i, &ts) in stamps.iter().enumerate() {
        let offset = ts - start;
        if offset % period != 0 {
            return Err(Error::Csv {
                line: i as u64 + 2,
                reason: format!("timestamp {ts} is off the {period} s grid starting at {start}"),
            });
        }
        slots.push((offset / period) as usize);
    }
    let len = slots.last().copied().unwrap_or(0) + 1;
    labels
        .into_iter()
        .zip(columns)
        .map(|(label, col)| {
            let mut values = vec![GAP; len];
            for (&slot, v) in slots.iter().zip(col) {
                values[slot] = v;
            }
            PowerSeries::new(label, start, period, values)
        })
        .collect()
}

/// Writes channels sharing one grid in the dataset CSV format. Gaps become
/// empty cells.
pub fn write_csv<W: Write>(writer: W, channels: &[&PowerSeries]) -> Result<()> {
    let first = channels.first().ok_or(Error::EmptyInput)?;
    if channels
        .iter()
        .any(|c| c.start_time != first.start_time || c.period != first.period || c.len() != first.len())
    {
        return Err(Error::MixedPeriods);
    }
    let io = |e: std::io::Error| Error::Csv { line: 0, reason: e.to_string() };
    let mut w = std::io::BufWriter::new(writer);
    write!(w, "timestamp").map_err(io)?;
    for c in channels {
        write!(w, ",{}", c.label).map_err(io)?;
    }
    writeln!(w).map_err(io)?;
    for i in 0..first.len() {
        write!(w, "{}", first.timestamp(i)).map_err(io)?;
        for c in channels {
            let v = c.values[i];
            if is_gap(v) {
                write!(w, ",").map_err(io)?;
            } else {
                write!(w, ",{v}").map_err(io)?;
            }
        }
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Default forward-fill horizon for upsampling, in source samples.
pub const DEFAULT_MAX_GAP: usize = 3;

/// Changes the sample period. Downsampling averages each bin of source
/// samples (gaps ignored, all-gap bins stay gaps); upsampling forward-fills,
/// bridging at most `max_gap` consecutive missing source samples.
pub fn resample(series: &PowerSeries, target_period: i64, max_gap: usize) -> Result<PowerSeries> {
    let period = series.period;
    if target_period <= 0 {
        return Err(Error::IncompatiblePeriods { from: period, to: target_period });
    }
    if target_period == period {
        return Ok(series.clone());
    }
    let values = if target_period % period == 0 {
        let factor = (target_period / period) as usize;
        series
            .values
            .chunks(factor)
            .map(|bin| {
                let (sum, n) = bin
                    .iter()
                    .filter(|v| !is_gap(**v))
                    .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
                if n == 0 {
                    GAP
                } else {
                    sum / n as f64
                }
            })
            .collect()
    } else if period % target_period == 0 {
        let factor = (period / target_period) as usize;
        let mut out = Vec::with_capacity(series.len() * factor);
        let mut last_valid: Option<(usize, f64)> = None;
        for (i, &v) in series.values.iter().enumerate() {
            let filled = if is_gap(v) {
                match last_valid {
                    Some((j, lv)) if i - j <= max_gap => lv,
                    _ => GAP,
                }
            } else {
                last_valid = Some((i, v));
                v
            };
            out.extend(std::iter::repeat_n(filled, factor));
        }
        out
    } else {
        return Err(Error::IncompatiblePeriods { from: period, to: target_period });
    };
    PowerSeries::new(series.label.clone(), series.start_time, target_period, values)
}

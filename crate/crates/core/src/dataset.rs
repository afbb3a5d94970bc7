//! Aligned multi-channel datasets and date-based splitting.

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::series::{is_gap, PowerSeries, DEFAULT_MAX_GAP};

/// What to do with gaps when channels are aligned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GapPolicy {
    FillZero,
    /// Carry the last reading forward over at most `max_gap` missing
    /// samples; anything longer is zero-filled.
    ForwardFill { max_gap: usize },
    /// Drop grid points where any channel is missing. Only leading and
    /// trailing rows may go, otherwise the grid would stop being uniform.
    DropRow,
}

impl Default for GapPolicy {
    fn default() -> Self {
        GapPolicy::ForwardFill { max_gap: DEFAULT_MAX_GAP }
    }
}

/// Aggregate plus per-appliance channels on one gap-free grid.
///
/// The residual `aggregate - sum(appliances)` is the unmetered load plus
/// noise and may have either sign; it is never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedDataset {
    aggregate: PowerSeries,
    appliances: Vec<PowerSeries>,
}

impl AlignedDataset {
    pub fn new(aggregate: PowerSeries, appliances: Vec<PowerSeries>) -> Result<Self> {
        for ch in std::iter::once(&aggregate).chain(&appliances) {
            if ch.start_time() != aggregate.start_time()
                || ch.period() != aggregate.period()
                || ch.len() != aggregate.len()
            {
                return Err(Error::InvalidDataset(format!(
                    "channel `{}` is not on the aggregate grid",
                    ch.label()
                )));
            }
            if ch.has_gaps() {
                return Err(Error::InvalidDataset(format!("channel `{}` has gaps", ch.label())));
            }
        }
        for (i, a) in appliances.iter().enumerate() {
            if appliances[..i].iter().any(|b| b.label() == a.label()) {
                return Err(Error::InvalidDataset(format!("duplicate label `{}`", a.label())));
            }
        }
        Ok(Self { aggregate, appliances })
    }

    pub fn aggregate(&self) -> &PowerSeries {
        &self.aggregate
    }

    pub fn appliances(&self) -> &[PowerSeries] {
        &self.appliances
    }

    pub fn appliance(&self, label: &str) -> Option<&PowerSeries> {
        self.appliances.iter().find(|a| a.label() == label)
    }

    pub fn labels(&self) -> Vec<&str> {
        self.appliances.iter().map(|a| a.label()).collect()
    }

    pub fn start_time(&self) -> i64 {
        self.aggregate.start_time()
    }

    pub fn end_time(&self) -> i64 {
        self.aggregate.end_time()
    }

    pub fn period(&self) -> i64 {
        self.aggregate.period()
    }

    pub fn len(&self) -> usize {
        self.aggregate.len()
    }

    pub fn is_empty(&self) -> bool {
        self.aggregate.is_empty()
    }

    /// Samples `start..end` by index on every channel.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        Ok(Self {
            aggregate: self.aggregate.slice(start, end)?,
            appliances: self
                .appliances
                .iter()
                .map(|a| a.slice(start, end))
                .collect::<Result<_>>()?,
        })
    }

    /// Keeps only the named appliance channels, in the given order.
    pub fn select(&self, labels: &[&str]) -> Result<Self> {
        let appliances = labels
            .iter()
            .map(|l| {
                self.appliance(l)
                    .cloned()
                    .ok_or_else(|| Error::InvalidDataset(format!("unknown appliance `{l}`")))
            })
            .collect::<Result<_>>()?;
        Self::new(self.aggregate.clone(), appliances)
    }
}

/// Trims channels to their common time range and applies the gap policy.
/// All inputs must share one period; call `resample` first.
pub fn align(
    aggregate: &PowerSeries,
    appliances: &[PowerSeries],
    gap_policy: GapPolicy,
) -> Result<AlignedDataset> {
    let period = aggregate.period();
    let channels: Vec<&PowerSeries> = std::iter::once(aggregate).chain(appliances).collect();
    if channels.iter().any(|c| c.period() != period) {
        return Err(Error::MixedPeriods);
    }
    if channels
        .iter()
        .any(|c| (c.start_time() - aggregate.start_time()).rem_euclid(period) != 0)
    {
        return Err(Error::MisalignedGrids);
    }
    let start = channels.iter().map(|c| c.start_time()).max().unwrap_or_default();
    let end = channels.iter().map(|c| c.end_time()).min().unwrap_or_default();
    if start >= end {
        return Err(Error::EmptyIntersection);
    }
    let len = ((end - start) / period) as usize;
    let mut columns: Vec<Vec<f64>> = channels
        .iter()
        .map(|c| {
            let offset = ((start - c.start_time()) / period) as usize;
            c.values()[offset..offset + len].to_vec()
        })
        .collect();

    let mut first = 0;
    let mut last = len;
    match gap_policy {
        GapPolicy::FillZero => columns.iter_mut().for_each(|c| fill(c, 0)),
        GapPolicy::ForwardFill { max_gap } => columns.iter_mut().for_each(|c| fill(c, max_gap)),
        GapPolicy::DropRow => {
            let row_ok = |i: usize| columns.iter().all(|c| !is_gap(c[i]));
            let kept: Vec<usize> = (0..len).filter(|&i| row_ok(i)).collect();
            let (Some(&lo), Some(&hi)) = (kept.first(), kept.last()) else {
                return Err(Error::EmptyIntersection);
            };
            if hi - lo + 1 != kept.len() {
                return Err(Error::NonContiguous);
            }
            first = lo;
            last = hi + 1;
        }
    }

    let mut series = channels.iter().zip(columns).map(|(c, col)| {
        PowerSeries::new(
            c.label(),
            start + first as i64 * period,
            period,
            col[first..last].to_vec(),
        )
    });
    let aggregate = series.next().expect("aggregate channel")?;
    let appliances = series.collect::<Result<Vec<_>>>()?;
    AlignedDataset::new(aggregate, appliances)
}

/// Forward-fills runs of at most `max_gap` gaps, zero-fills the rest.
fn fill(values: &mut [f64], max_gap: usize) {
    let mut last: Option<(usize, f64)> = None;
    for i in 0..values.len() {
        if is_gap(values[i]) {
            values[i] = match last {
                Some((j, v)) if i - j <= max_gap => v,
                _ => 0.0,
            };
        } else {
            last = Some((i, values[i]));
        }
    }
}

/// Train / validation / test boundaries in UTC seconds. Intervals are
/// half-open, so a sample exactly on a boundary belongs to the later split.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSpec {
    pub train_start: i64,
    pub train_end: i64,
    pub val_end: i64,
    pub test_end: i64,
}

impl SplitSpec {
    pub fn new(train_start: i64, train_end: i64, val_end: i64, test_end: i64) -> Result<Self> {
        if !(train_start < train_end && train_end < val_end && val_end < test_end) {
            return Err(Error::InvalidSplit(
                "require train_start < train_end < val_end < test_end".into(),
            ));
        }
        Ok(Self {
            train_start,
            train_end,
            val_end,
            test_end,
        })
    }

    /// Builds a spec from `YYYY-MM-DD` dates (midnight UTC).
    pub fn from_dates(train_start: &str, train_end: &str, val_end: &str, test_end: &str) -> Result<Self> {
        Self::new(
            parse_date(train_start)?,
            parse_date(train_end)?,
            parse_date(val_end)?,
            parse_date(test_end)?,
        )
    }
}

/// Parses `YYYY-MM-DD` as midnight UTC, or an integer as UTC seconds.
pub fn parse_date(s: &str) -> Result<i64> {
    if let Ok(secs) = s.parse::<i64>() {
        return Ok(secs);
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .map(|d| d.and_hms_opt(0, 0, 0).expect("midnight").and_utc().timestamp())
        .map_err(|e| Error::InvalidSplit(format!("bad date `{s}`: {e}")))
}

/// Splits `ds` into train, validation and test by timestamp.
pub fn split_by_date(
    ds: &AlignedDataset,
    spec: &SplitSpec,
) -> Result<(AlignedDataset, AlignedDataset, AlignedDataset)> {
    if spec.train_start < ds.start_time() || spec.test_end > ds.end_time() {
        return Err(Error::SplitOutOfRange);
    }
    // First index whose timestamp is >= t.
    let index_of = |t: i64| -> usize {
        let offset = t - ds.start_time();
        (offset + ds.period() - 1).div_euclid(ds.period()) as usize
    };
    let bounds = [
        index_of(spec.train_start),
        index_of(spec.train_end),
        index_of(spec.val_end),
        index_of(spec.test_end).min(ds.len()),
    ];
    let part = |lo: usize, hi: usize, name: &'static str| {
        if lo >= hi {
            Err(Error::EmptySplit(name))
        } else {
            ds.slice(lo, hi)
        }
    };
    Ok((
        part(bounds[0], bounds[1], "train")?,
        part(bounds[1], bounds[2], "validation")?,
        part(bounds[2], bounds[3], "test")?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::GAP;

    fn ch(label: &str, start: i64, values: Vec<f64>) -> PowerSeries {
        PowerSeries::new(label, start, 60, values).unwrap()
    }

    #[test]
    fn identical_grids_unchanged() {
        let agg = ch("aggregate", 0, vec![1.0, 2.0, 3.0]);
        let a = ch("a", 0, vec![0.5, 1.0, 1.5]);
        let ds = align(&agg, &[a.clone()], GapPolicy::default()).unwrap();
        assert_eq!(ds.aggregate(), &agg);
        assert_eq!(ds.appliances(), &[a]);
    }

    #[test]
    fn offset_channels_trimmed() {
        let agg = ch("aggregate", 60, vec![1.0; 10]);
        let a = ch("a", 0, vec![2.0; 11]);
        let ds = align(&agg, &[a], GapPolicy::default()).unwrap();
        assert_eq!(ds.len(), 10);
        assert_eq!(ds.start_time(), 60);
        assert_eq!(ds.appliances()[0].len(), 10);
    }

    #[test]
    fn disjoint_ranges() {
        let agg = ch("aggregate", 0, vec![1.0; 3]);
        let a = ch("a", 600, vec![1.0; 3]);
        let err = align(&agg, &[a], GapPolicy::default()).unwrap_err();
        assert_eq!(err, Error::EmptyIntersection);
        assert!(err.to_string().contains("empty intersection"));
    }

    #[test]
    fn mixed_periods() {
        let agg = ch("aggregate", 0, vec![1.0; 3]);
        let a = PowerSeries::new("a", 0, 30, vec![1.0; 6]).unwrap();
        assert_eq!(align(&agg, &[a], GapPolicy::default()).unwrap_err(), Error::MixedPeriods);
    }

    #[test]
    fn gap_policies() {
        let agg = ch("aggregate", 0, vec![GAP, 5.0, GAP, GAP, GAP, GAP, 1.0, GAP]);
        let zero = align(&agg, &[], GapPolicy::FillZero).unwrap();
        assert_eq!(zero.aggregate().values(), &[0.0, 5.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let ff = align(&agg, &[], GapPolicy::ForwardFill { max_gap: 3 }).unwrap();
        assert_eq!(ff.aggregate().values(), &[0.0, 5.0, 5.0, 5.0, 5.0, 0.0, 1.0, 1.0]);

        let edges = ch("aggregate", 0, vec![GAP, 1.0, 2.0, GAP]);
        let dropped = align(&edges, &[], GapPolicy::DropRow).unwrap();
        assert_eq!(dropped.aggregate().values(), &[1.0, 2.0]);
        assert_eq!(dropped.start_time(), 60);
        let interior = ch("aggregate", 0, vec![1.0, GAP, 2.0]);
        assert_eq!(align(&interior, &[], GapPolicy::DropRow).unwrap_err(), Error::NonContiguous);
    }

    #[test]
    fn twenty_five_seven_seven_day_split() {
        let spec = SplitSpec::from_dates("2014-03-13", "2014-04-07", "2014-04-14", "2015-05-15").unwrap();
        let start = spec.train_start;
        let days = (spec.test_end - start) / 86_400;
        let n = (days * 1440) as usize;
        let agg = PowerSeries::new("aggregate", start, 60, vec![1.0; n]).unwrap();
        let ds = AlignedDataset::new(agg, vec![]).unwrap();
        let (train, val, test) = split_by_date(&ds, &spec).unwrap();
        assert_eq!(train.len(), 25 * 1440);
        assert_eq!(val.len(), 7 * 1440);
        assert_eq!(train.len() + val.len() + test.len(), n);
    }

    #[test]
    fn split_boundary_goes_to_later_split() {
        let agg = PowerSeries::new("aggregate", 0, 10, (0..10).map(f64::from).collect()).unwrap();
        let ds = AlignedDataset::new(agg, vec![]).unwrap();
        let spec = SplitSpec::new(0, 30, 60, 100).unwrap();
        let (train, val, test) = split_by_date(&ds, &spec).unwrap();
        assert_eq!(train.aggregate().values(), &[0.0, 1.0, 2.0]);
        assert_eq!(val.aggregate().values()[0], 3.0);
        assert_eq!(test.aggregate().values(), &[6.0, 7.0, 8.0, 9.0]);
    }

    #[test]
    fn split_errors() {
        let agg = PowerSeries::new("aggregate", 100, 10, vec![1.0; 10]).unwrap();
        let ds = AlignedDataset::new(agg, vec![]).unwrap();
        let before = SplitSpec::new(0, 130, 160, 200).unwrap();
        assert_eq!(split_by_date(&ds, &before).unwrap_err(), Error::SplitOutOfRange);
        let empty_val = SplitSpec::new(100, 131, 139, 200).unwrap();
        assert_eq!(split_by_date(&ds, &empty_val).unwrap_err(), Error::EmptySplit("validation"));
        assert!(SplitSpec::new(0, 0, 1, 2).is_err());
    }
}

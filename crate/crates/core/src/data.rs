//! Ratings ingestion: CSV parsing, user filtering, calendar-month binning,
//! dense re-indexing, train/test splitting and dataset summaries.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::{DateTime, Datelike};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Dims, Entry, SparseTemporalTensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeBinning {
    /// UTC calendar months.
    CalendarMonth,
    /// Fixed-width bins of this many seconds, starting at the earliest timestamp.
    FixedWidth(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DuplicatePolicy {
    Reject,
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitStrategy {
    Random,
    /// Holds out the entries with the latest time index.
    Temporal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingsConfig {
    pub min_ratings_per_user: usize,
    pub time_binning: TimeBinning,
    pub test_fraction: f64,
    pub split_seed: u64,
    pub duplicate_policy: DuplicatePolicy,
    pub split: SplitStrategy,
}

impl Default for RatingsConfig {
    fn default() -> Self {
        Self {
            min_ratings_per_user: 20,
            time_binning: TimeBinning::CalendarMonth,
            test_fraction: 0.10,
            split_seed: 0,
            duplicate_policy: DuplicatePolicy::Reject,
            split: SplitStrategy::Random,
        }
    }
}

/// One raw CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingRecord {
    pub user: String,
    pub item: String,
    pub rating: f64,
    pub timestamp: i64,
    pub line: usize,
}

/// Bijection between original ids and dense 0-based indices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IndexMap {
    ids: Vec<String>,
    lookup: HashMap<String, usize>,
}

impl IndexMap {
    /// Returns the index of `id`, assigning the next one on first sight.
    pub fn intern(&mut self, id: &str) -> usize {
        if let Some(&ix) = self.lookup.get(id) {
            return ix;
        }
        let ix = self.ids.len();
        self.ids.push(id.to_owned());
        self.lookup.insert(id.to_owned(), ix);
        ix
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.lookup.get(id).copied()
    }

    pub fn id_of(&self, index: usize) -> Option<&str> {
        self.ids.get(index).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Two-column CSV `original_id,index` with 1-based indices.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "original_id,index")?;
        for (ix, id) in self.ids.iter().enumerate() {
            writeln!(w, "{id},{}", ix + 1)?;
        }
        Ok(())
    }

    pub fn write_csv_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_csv(&mut w)?;
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct LoadedRatings {
    pub tensor: SparseTemporalTensor,
    pub users: IndexMap,
    pub items: IndexMap,
    /// Time-bin labels (`YYYY-MM` for calendar months) by time index.
    pub months: IndexMap,
}

/// Parses `userId,movieId,rating,timestamp` rows; a non-numeric first row is
/// treated as a header.
pub fn parse_ratings<R: BufRead>(reader: R) -> Result<Vec<RatingRecord>> {
    let mut out = Vec::new();
    let mut first_content = true;
    for (n, line) in reader.lines().enumerate() {
        let line_no = n + 1;
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let is_first = std::mem::replace(&mut first_content, false);
        let fields: Vec<&str> = t.split(',').map(str::trim).collect();
        let parsed = match fields.as_slice() {
            [user, item, rating, timestamp, ..] => rating
                .parse::<f64>()
                .ok()
                .filter(|r| r.is_finite())
                .zip(timestamp.parse::<i64>().ok())
                .map(|(rating, timestamp)| RatingRecord {
                    user: (*user).to_owned(),
                    item: (*item).to_owned(),
                    rating,
                    timestamp,
                    line: line_no,
                }),
            _ => None,
        };
        match parsed {
            Some(r) => out.push(r),
            None if is_first && fields.len() >= 4 => {} // header
            None => {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("malformed rating row {t:?}"),
                })
            }
        }
    }
    Ok(out)
}

/// Drops users with fewer than `min` ratings (a single pass over the counts).
pub fn filter_users(records: &[RatingRecord], min: usize) -> Vec<RatingRecord> {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for r in records {
        *counts.entry(r.user.as_str()).or_default() += 1;
    }
    records
        .iter()
        .filter(|r| counts[r.user.as_str()] >= min)
        .cloned()
        .collect()
}

/// Months since 0000-01 for a Unix timestamp, in UTC.
pub fn utc_month_number(timestamp: i64) -> Result<i64> {
    let dt = DateTime::from_timestamp(timestamp, 0).ok_or_else(|| Error::Parse {
        line: 0,
        message: format!("timestamp {timestamp} out of range"),
    })?;
    Ok(dt.year() as i64 * 12 + dt.month0() as i64)
}

fn month_label(month_number: i64) -> String {
    format!("{:04}-{:02}", month_number.div_euclid(12), month_number.rem_euclid(12) + 1)
}

/// Builds the tensor from already-filtered records.
pub fn build_tensor(records: &[RatingRecord], config: &RatingsConfig) -> Result<LoadedRatings> {
    if records.is_empty() {
        return Err(Error::EmptyDataset("no ratings left after filtering".into()));
    }
    let bins: Vec<i64> = match config.time_binning {
        TimeBinning::CalendarMonth => records
            .iter()
            .map(|r| {
                utc_month_number(r.timestamp).map_err(|_| Error::Parse {
                    line: r.line,
                    message: format!("timestamp {} out of range", r.timestamp),
                })
            })
            .collect::<Result<_>>()?,
        TimeBinning::FixedWidth(width) => {
            if width == 0 {
                return Err(Error::InvalidParameter("time bin width must be positive".into()));
            }
            let t0 = records.iter().map(|r| r.timestamp).min().unwrap_or(0);
            records
                .iter()
                .map(|r| (r.timestamp - t0).div_euclid(width as i64))
                .collect()
        }
    };
    let first_bin = *bins.iter().min().expect("non-empty");
    let last_bin = *bins.iter().max().expect("non-empty");
    let mut months = IndexMap::default();
    for b in first_bin..=last_bin {
        let label = match config.time_binning {
            TimeBinning::CalendarMonth => month_label(b),
            TimeBinning::FixedWidth(_) => format!("bin{}", b - first_bin + 1),
        };
        months.intern(&label);
    }

    let mut users = IndexMap::default();
    let mut items = IndexMap::default();
    let mut slot: HashMap<(u32, u32, u32), usize> = HashMap::with_capacity(records.len());
    let mut entries: Vec<Entry> = Vec::with_capacity(records.len());
    let mut counts: Vec<u32> = Vec::with_capacity(records.len());
    for (r, &bin) in records.iter().zip(&bins) {
        let e = Entry::new(users.intern(&r.user), items.intern(&r.item), (bin - first_bin) as usize, r.rating);
        match slot.get(&e.key()) {
            None => {
                slot.insert(e.key(), entries.len());
                entries.push(e);
                counts.push(1);
            }
            Some(&pos) => match config.duplicate_policy {
                DuplicatePolicy::Reject => {
                    return Err(Error::Parse {
                        line: r.line,
                        message: format!(
                            "duplicate rating for user {} item {} in the same time bin",
                            r.user, r.item
                        ),
                    })
                }
                DuplicatePolicy::Mean => {
                    entries[pos].value += e.value;
                    counts[pos] += 1;
                }
            },
        }
    }
    for (e, &c) in entries.iter_mut().zip(&counts) {
        e.value /= c as f64;
    }
    let dims = Dims::new(users.len(), items.len(), months.len());
    Ok(LoadedRatings {
        tensor: SparseTemporalTensor::new(dims, entries)?,
        users,
        items,
        months,
    })
}

/// Reads a ratings CSV, filters sparse users and builds the tensor.
pub fn load_ratings(path: impl AsRef<Path>, config: &RatingsConfig) -> Result<LoadedRatings> {
    let records = parse_ratings(BufReader::new(File::open(path)?))?;
    let kept = filter_users(&records, config.min_ratings_per_user);
    if kept.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "no user has at least {} ratings",
            config.min_ratings_per_user
        )));
    }
    build_tensor(&kept, config)
}

/// Reads a tensor in the plain-text COO format.
pub fn load_coo(path: impl AsRef<Path>) -> Result<SparseTemporalTensor> {
    SparseTemporalTensor::read_coo(BufReader::new(File::open(path)?))
}

/// Partitions the entries into train and test sets sharing the input dims.
pub fn train_test_split(
    tensor: &SparseTemporalTensor,
    config: &RatingsConfig,
) -> Result<(SparseTemporalTensor, SparseTemporalTensor)> {
    let f = config.test_fraction;
    if !(f > 0.0 && f < 1.0) {
        return Err(Error::InvalidParameter(format!("test fraction must lie in (0, 1), got {f}")));
    }
    let n = tensor.len();
    let n_test = (f * n as f64).round() as usize;
    if n_test == 0 || n_test >= n {
        return Err(Error::InvalidParameter(format!(
            "test fraction {f} over {n} entries leaves an empty train or test set"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    match config.split {
        SplitStrategy::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.split_seed);
            order.shuffle(&mut rng);
        }
        SplitStrategy::Temporal => {
            let entries = tensor.entries();
            order.sort_by_key(|&p| std::cmp::Reverse((entries[p].k, p)));
        }
    }
    let mut is_test = vec![false; n];
    for &p in &order[..n_test] {
        is_test[p] = true;
    }
    let mut train = Vec::with_capacity(n - n_test);
    let mut test = Vec::with_capacity(n_test);
    for (e, &t) in tensor.entries().iter().zip(&is_test) {
        if t {
            test.push(*e);
        } else {
            train.push(*e);
        }
    }
    let dims = tensor.dims();
    Ok((
        SparseTemporalTensor::new_unchecked(dims, train),
        SparseTemporalTensor::new_unchecked(dims, test),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub train_count: usize,
    pub test_count: usize,
    pub density: f64,
    pub rating_min: Option<f64>,
    pub rating_max: Option<f64>,
}

pub fn dataset_summary(train: &SparseTemporalTensor, test: &SparseTemporalTensor) -> Result<DatasetSummary> {
    let d = train.dims();
    if test.dims() != d {
        return Err(crate::error::shape_err("dataset_summary", d, test.dims()));
    }
    let range = [train.value_range(), test.value_range()]
        .into_iter()
        .flatten()
        .reduce(|(a, b), (c, e)| (a.min(c), b.max(e)));
    Ok(DatasetSummary {
        i: d.i,
        j: d.j,
        k: d.k,
        train_count: train.len(),
        test_count: test.len(),
        density: (train.len() + test.len()) as f64 / d.cells(),
        rating_min: range.map(|r| r.0),
        rating_max: range.map(|r| r.1),
    })
}

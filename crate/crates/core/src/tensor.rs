//! Sparse third-order tensors in coordinate form and the mode-1 row split.
//!
//! Indices are 0-based in memory. The plain-text COO format is 1-based:
//!
//! ```text
//! # comment
//! dims 10 8 6
//! 1 1 1 4.5
//! 3 2 6 -0.25
//! ```

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mode sizes `(I, J, K)`: rows (users), columns (items), time slices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub i: usize,
    pub j: usize,
    pub k: usize,
}

impl Dims {
    pub fn new(i: usize, j: usize, k: usize) -> Self {
        Self { i, j, k }
    }

    pub fn cells(&self) -> f64 {
        self.i as f64 * self.j as f64 * self.k as f64
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.i, self.j, self.k)
    }
}

/// One observed cell `x_ijk`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Entry {
    pub i: u32,
    pub j: u32,
    pub k: u32,
    pub value: f64,
}

impl Entry {
    pub fn new(i: usize, j: usize, k: usize, value: f64) -> Self {
        Self {
            i: i as u32,
            j: j as u32,
            k: k as u32,
            value,
        }
    }

    #[inline]
    pub fn key(&self) -> (u32, u32, u32) {
        (self.i, self.j, self.k)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// Entry at `position` (1-based) has an index outside `dims`.
    OutOfRange { position: usize, index: (usize, usize, usize) },
    /// Entry at `position` repeats the triple first seen at `first`.
    Duplicate { position: usize, first: usize, index: (usize, usize, usize) },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        let shown: Vec<String> = self
            .violations
            .iter()
            .take(5)
            .map(|v| match v {
                Violation::OutOfRange { position, index } => {
                    format!("entry {position} out of range at {index:?}")
                }
                Violation::Duplicate {
                    position,
                    first,
                    index,
                } => format!("entry {position} duplicates entry {first} at {index:?}"),
            })
            .collect();
        write!(f, "{} violation(s): {}", self.violations.len(), shown.join("; "))
    }
}

/// Reports out-of-range indices and duplicate triples. Indices in the
/// report are 0-based; positions are 1-based.
pub fn validate_entries(dims: Dims, entries: &[Entry]) -> ValidationReport {
    let mut violations = Vec::new();
    let mut seen = std::collections::HashMap::with_capacity(entries.len());
    for (n, e) in entries.iter().enumerate() {
        let index = (e.i as usize, e.j as usize, e.k as usize);
        if index.0 >= dims.i || index.1 >= dims.j || index.2 >= dims.k {
            violations.push(Violation::OutOfRange {
                position: n + 1,
                index,
            });
            continue;
        }
        if let Some(&first) = seen.get(&e.key()) {
            violations.push(Violation::Duplicate {
                position: n + 1,
                first,
                index,
            });
        } else {
            seen.insert(e.key(), n + 1);
        }
    }
    ValidationReport { violations }
}

/// COO set of observations `{(i, j, k, x_ijk)}` over an `I×J×K` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseTemporalTensor {
    dims: Dims,
    entries: Vec<Entry>,
}

impl SparseTemporalTensor {
    /// Validating constructor: rejects out-of-range or duplicate entries.
    pub fn new(dims: Dims, entries: Vec<Entry>) -> Result<Self> {
        if dims.i == 0 || dims.j == 0 || dims.k == 0 {
            return Err(Error::InvalidDimension(format!("tensor dims {dims}")));
        }
        let report = validate_entries(dims, &entries);
        if !report.is_valid() {
            return Err(Error::InvalidTensor(report.to_string()));
        }
        Ok(Self { dims, entries })
    }

    /// Skips validation. Use [`validate_tensor`] to inspect the result.
    pub fn new_unchecked(dims: Dims, entries: Vec<Entry>) -> Self {
        Self { dims, entries }
    }

    pub fn empty(dims: Dims) -> Self {
        Self {
            dims,
            entries: Vec::new(),
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub(crate) fn entries_mut(&mut self) -> &mut [Entry] {
        &mut self.entries
    }

    pub fn into_entries(self) -> Vec<Entry> {
        self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn validate(&self) -> ValidationReport {
        validate_entries(self.dims, &self.entries)
    }

    pub fn value_range(&self) -> Option<(f64, f64)> {
        let mut it = self.entries.iter().map(|e| e.value);
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v))))
    }

    /// Reads the plain-text COO format (1-based indices, `dims` header first).
    pub fn read_coo<R: BufRead>(reader: R) -> Result<Self> {
        let mut dims = None;
        let mut entries = Vec::new();
        for (n, line) in reader.lines().enumerate() {
            let line_no = n + 1;
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = t.split_whitespace().collect();
            let Some(d) = dims else {
                if fields.len() != 4 || fields[0] != "dims" {
                    return Err(Error::Parse {
                        line: line_no,
                        message: "expected header \"dims I J K\"".into(),
                    });
                }
                let parse = |s: &str| {
                    s.parse::<usize>().ok().filter(|&v| v > 0).ok_or(Error::Parse {
                        line: line_no,
                        message: format!("invalid dimension {s:?}"),
                    })
                };
                dims = Some(Dims::new(parse(fields[1])?, parse(fields[2])?, parse(fields[3])?));
                continue;
            };
            if fields.len() != 4 {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected \"i j k value\", got {} fields", fields.len()),
                });
            }
            let idx = |s: &str, bound: usize| {
                s.parse::<usize>()
                    .ok()
                    .filter(|&v| v >= 1 && v <= bound)
                    .ok_or(Error::Parse {
                        line: line_no,
                        message: format!("index {s:?} outside 1..={bound}"),
                    })
            };
            let i = idx(fields[0], d.i)?;
            let j = idx(fields[1], d.j)?;
            let k = idx(fields[2], d.k)?;
            let value: f64 = fields[3].parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("invalid value {:?}", fields[3]),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    line: line_no,
                    message: "non-finite value".into(),
                });
            }
            entries.push(Entry::new(i - 1, j - 1, k - 1, value));
        }
        let dims = dims.ok_or(Error::Parse {
            line: 0,
            message: "missing \"dims I J K\" header".into(),
        })?;
        Self::new(dims, entries)
    }

    pub fn write_coo<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "dims {} {} {}", self.dims.i, self.dims.j, self.dims.k)?;
        for e in &self.entries {
            writeln!(w, "{} {} {} {}", e.i + 1, e.j + 1, e.k + 1, e.value)?;
        }
        Ok(())
    }
}

/// Same as [`SparseTemporalTensor::validate`].
pub fn validate_tensor(tensor: &SparseTemporalTensor) -> ValidationReport {
    tensor.validate()
}

/// One worker's horizontal slab: global rows `row_offset..row_offset + rows`.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    /// Global 0-based index of the first row owned by this block.
    pub row_offset: usize,
    /// Sub-tensor with rows re-indexed to `0..rows`; `dims.j`, `dims.k` are global.
    pub subtensor: SparseTemporalTensor,
}

impl Block {
    pub fn rows(&self) -> usize {
        self.subtensor.dims().i
    }

    /// 1-based inclusive global row range `[first, last]`.
    pub fn row_range(&self) -> (usize, usize) {
        (self.row_offset + 1, self.row_offset + self.rows())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorPartition {
    pub dims: Dims,
    pub blocks: Vec<Block>,
}

impl TensorPartition {
    pub fn workers(&self) -> usize {
        self.blocks.len()
    }

    /// Restores global row indices and concatenates every block's entries.
    pub fn merge(&self) -> SparseTemporalTensor {
        let entries = self
            .blocks
            .iter()
            .flat_map(|b| {
                b.subtensor.entries().iter().map(move |e| Entry {
                    i: e.i + b.row_offset as u32,
                    ..*e
                })
            })
            .collect();
        SparseTemporalTensor::new_unchecked(self.dims, entries)
    }
}

/// Row boundaries `(first, last]` of the mode-1 split: `last_p = ⌊p·I/P⌋`.
pub fn split_bounds(rows: usize, workers: usize) -> Result<Vec<(usize, usize)>> {
    if workers == 0 || workers > rows {
        return Err(Error::InvalidPartition { workers, rows });
    }
    let mut first = 0;
    Ok((1..=workers)
        .map(|p| {
            let last = p * rows / workers;
            let r = (first, last);
            first = last;
            r
        })
        .collect())
}

/// Splits a tensor into `workers` contiguous row slabs along mode 1.
pub fn split_tensor(tensor: &SparseTemporalTensor, workers: usize) -> Result<TensorPartition> {
    let dims = tensor.dims();
    let bounds = split_bounds(dims.i, workers)?;
    let owner = block_owner_table(&bounds, dims.i);
    let mut buckets: Vec<Vec<Entry>> = vec![Vec::new(); workers];
    for e in tensor.entries() {
        let p = owner[e.i as usize];
        let offset = bounds[p].0 as u32;
        buckets[p].push(Entry { i: e.i - offset, ..*e });
    }
    let blocks = bounds
        .iter()
        .zip(buckets)
        .map(|(&(first, last), entries)| Block {
            row_offset: first,
            subtensor: SparseTemporalTensor::new_unchecked(
                Dims::new(last - first, dims.j, dims.k),
                entries,
            ),
        })
        .collect();
    Ok(TensorPartition { dims, blocks })
}

fn block_owner_table(bounds: &[(usize, usize)], rows: usize) -> Vec<usize> {
    let mut owner = vec![0; rows];
    for (p, &(first, last)) in bounds.iter().enumerate() {
        owner[first..last].iter_mut().for_each(|o| *o = p);
    }
    owner
}

/// Set of `(i, j, k)` keys, used to compare entry multisets in tests.
pub fn key_set(entries: &[Entry]) -> HashSet<(u32, u32, u32)> {
    entries.iter().map(Entry::key).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(dims: Dims) -> SparseTemporalTensor {
        let mut e = Vec::new();
        for i in 0..dims.i {
            for j in 0..dims.j {
                for k in 0..dims.k {
                    e.push(Entry::new(i, j, k, (i * 100 + j * 10 + k) as f64));
                }
            }
        }
        SparseTemporalTensor::new(dims, e).unwrap()
    }

    #[test]
    fn split_ten_rows_three_ways() {
        let t = dense(Dims::new(10, 2, 2));
        let p = split_tensor(&t, 3).unwrap();
        let ranges: Vec<_> = p.blocks.iter().map(Block::row_range).collect();
        assert_eq!(ranges, vec![(1, 3), (4, 6), (7, 10)]);
        let sizes: Vec<_> = p.blocks.iter().map(Block::rows).collect();
        assert_eq!(sizes, vec![3, 3, 4]);
    }

    #[test]
    fn split_single_worker_is_identity() {
        let t = dense(Dims::new(5, 3, 2));
        let p = split_tensor(&t, 1).unwrap();
        assert_eq!(p.blocks.len(), 1);
        assert_eq!(p.blocks[0].row_range(), (1, 5));
        assert_eq!(p.blocks[0].subtensor, t);
    }

    #[test]
    fn split_one_row_each() {
        let t = dense(Dims::new(4, 2, 2));
        let p = split_tensor(&t, 4).unwrap();
        assert!(p.blocks.iter().all(|b| b.rows() == 1));
        assert!(p
            .blocks
            .iter()
            .all(|b| b.subtensor.entries().iter().all(|e| e.i == 0)));
    }

    #[test]
    fn split_rejects_bad_worker_counts() {
        let t = dense(Dims::new(3, 1, 1));
        assert!(matches!(
            split_tensor(&t, 0),
            Err(Error::InvalidPartition { .. })
        ));
        assert!(matches!(
            split_tensor(&t, 4),
            Err(Error::InvalidPartition { .. })
        ));
    }

    #[test]
    fn validation_examples() {
        let d = Dims::new(2, 2, 2);
        let ok = vec![Entry::new(0, 0, 0, 5.0)];
        assert!(validate_entries(d, &ok).is_valid());

        let oob = vec![Entry::new(2, 0, 0, 5.0)];
        let r = validate_entries(d, &oob);
        assert_eq!(
            r.violations,
            vec![Violation::OutOfRange {
                position: 1,
                index: (2, 0, 0)
            }]
        );

        let dup = vec![Entry::new(0, 0, 0, 5.0), Entry::new(0, 0, 0, 4.0)];
        let r = validate_entries(d, &dup);
        assert!(matches!(
            r.violations.as_slice(),
            [Violation::Duplicate {
                position: 2,
                first: 1,
                ..
            }]
        ));
        assert!(SparseTemporalTensor::new(d, dup).is_err());
    }

    #[test]
    fn coo_round_trip() {
        let t = dense(Dims::new(3, 2, 2));
        let mut buf = Vec::new();
        t.write_coo(&mut buf).unwrap();
        let back = SparseTemporalTensor::read_coo(buf.as_slice()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn coo_parse_errors_carry_line_numbers() {
        let src = "# hi\ndims 2 2 2\n1 1 1 1.0\n1 x 1 2.0\n";
        match SparseTemporalTensor::read_coo(src.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
        assert!(SparseTemporalTensor::read_coo("1 1 1 1.0\n".as_bytes()).is_err());
        assert!(SparseTemporalTensor::read_coo("dims 2 2 2\n3 1 1 1.0\n".as_bytes()).is_err());
    }
}

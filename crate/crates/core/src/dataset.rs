//! Binarized classification datasets: loading, splitting and label noise.

use std::fs::File;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

// Guards floor/ceil against products like 0.2 * 120 landing a hair off an integer.
const FRACTION_SLACK: f64 = 1e-9;

/// An immutable table of 0/1 features with integer class labels `0..n_classes`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryDataset {
    bits: Vec<u8>,
    labels: Vec<usize>,
    feature_names: Vec<String>,
    n_features: usize,
    n_classes: usize,
}

impl BinaryDataset {
    /// Builds a dataset from per-row feature vectors.
    pub fn new(
        rows: Vec<Vec<u8>>,
        labels: Vec<usize>,
        feature_names: Vec<String>,
        n_classes: usize,
    ) -> Result<Self> {
        let n_features = feature_names.len();
        let mut bits = Vec::with_capacity(rows.len() * n_features);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_features {
                return Err(Error::validation(format!(
                    "row {i} has {} features, expected {n_features}",
                    row.len()
                )));
            }
            bits.extend_from_slice(row);
        }
        Self::from_flat(bits, labels, feature_names, n_classes)
    }

    /// Builds a dataset from a row-major feature buffer.
    pub fn from_flat(
        bits: Vec<u8>,
        labels: Vec<usize>,
        feature_names: Vec<String>,
        n_classes: usize,
    ) -> Result<Self> {
        let n_features = feature_names.len();
        if labels.is_empty() {
            return Err(Error::validation("dataset has no rows"));
        }
        if n_classes < 2 {
            return Err(Error::validation(format!(
                "need at least 2 classes, got {n_classes}"
            )));
        }
        if bits.len() != labels.len() * n_features {
            return Err(Error::validation(format!(
                "feature buffer holds {} cells, expected {} rows x {n_features} features",
                bits.len(),
                labels.len()
            )));
        }
        if let Some(pos) = bits.iter().position(|&b| b > 1) {
            return Err(Error::validation(format!(
                "feature value {} at row {}, column {} is not 0/1",
                bits[pos],
                pos / n_features.max(1),
                pos % n_features.max(1)
            )));
        }
        if let Some((i, &y)) = labels.iter().enumerate().find(|(_, &y)| y >= n_classes) {
            return Err(Error::validation(format!(
                "label {y} at row {i} is outside 0..{n_classes}"
            )));
        }
        Ok(Self {
            bits,
            labels,
            feature_names,
            n_features,
            n_classes,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[u8] {
        &self.bits[i * self.n_features..(i + 1) * self.n_features]
    }

    #[inline]
    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Same features, different labels.
    pub fn with_labels(&self, labels: Vec<usize>) -> Result<Self> {
        Self::from_flat(
            self.bits.clone(),
            labels,
            self.feature_names.clone(),
            self.n_classes,
        )
    }

    /// Keeps only `rows`, in the given order.
    pub fn select(&self, rows: &[usize]) -> Result<Self> {
        let mut bits = Vec::with_capacity(rows.len() * self.n_features);
        let mut labels = Vec::with_capacity(rows.len());
        for &r in rows {
            if r >= self.n_rows() {
                return Err(Error::contract(format!(
                    "row {r} out of range for {} rows",
                    self.n_rows()
                )));
            }
            bits.extend_from_slice(self.row(r));
            labels.push(self.labels[r]);
        }
        Self::from_flat(bits, labels, self.feature_names.clone(), self.n_classes)
    }

    /// Uniformly subsamples `n` rows without replacement; row order is preserved.
    pub fn subsample(&self, n: usize, seed: u64) -> Result<Self> {
        if n == 0 || n > self.n_rows() {
            return Err(Error::config(format!(
                "cannot subsample {n} rows from {}",
                self.n_rows()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = rand::seq::index::sample(&mut rng, self.n_rows(), n).into_vec();
        rows.sort_unstable();
        self.select(&rows)
    }

    /// Reads a CSV file whose header names the columns and whose last column is
    /// the label. The class count is inferred, with a floor of two.
    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::load_csv_with_classes(path, 2)
    }

    /// Like [`load_csv`](Self::load_csv) but with `min_classes` as the floor on
    /// the class count, for files that happen not to contain every class.
    pub fn load_csv_with_classes(path: impl AsRef<Path>, min_classes: usize) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::read_csv(file, min_classes)
    }

    pub fn read_csv<R: std::io::Read>(reader: R, min_classes: usize) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header = rdr.headers()?.clone();
        if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
            return Err(Error::validation("empty file"));
        }
        if header.len() < 2 {
            return Err(Error::validation(
                "need at least one feature column and a label column",
            ));
        }
        let n_features = header.len() - 1;
        let feature_names: Vec<String> = header.iter().take(n_features).map(String::from).collect();

        let mut bits = Vec::new();
        let mut labels = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let record = record?;
            // header is line 1
            let line = i + 2;
            if record.len() != header.len() {
                return Err(Error::Parse {
                    row: line,
                    column: record.len().min(header.len()),
                    message: format!("expected {} cells, found {}", header.len(), record.len()),
                });
            }
            for (j, cell) in record.iter().take(n_features).enumerate() {
                let bit = match cell {
                    "0" => 0,
                    "1" => 1,
                    other => {
                        return Err(Error::Parse {
                            row: line,
                            column: j + 1,
                            message: format!("feature cell {other:?} is not 0 or 1"),
                        })
                    }
                };
                bits.push(bit);
            }
            let cell = &record[n_features];
            let label = cell.parse::<usize>().map_err(|_| Error::Parse {
                row: line,
                column: n_features + 1,
                message: format!("label cell {cell:?} is not a class id"),
            })?;
            labels.push(label);
        }
        if labels.is_empty() {
            return Err(Error::validation("file has a header but no data rows"));
        }

        let max_label = *labels.iter().max().expect("nonempty");
        let mut seen = vec![false; max_label + 1];
        for &y in &labels {
            seen[y] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::validation(format!(
                "class ids must be contiguous from 0; {missing} is missing below {max_label}"
            )));
        }
        let n_classes = (max_label + 1).max(min_classes).max(2);
        Self::from_flat(bits, labels, feature_names, n_classes)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.write_to(file)
    }

    pub fn write_to<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        header.push("label");
        w.write_record(&header)?;
        let mut record = Vec::with_capacity(self.n_features + 1);
        for i in 0..self.n_rows() {
            record.clear();
            record.extend(self.row(i).iter().map(|b| b.to_string()));
            record.push(self.labels[i].to_string());
            w.write_record(&record)?;
        }
        w.flush().map_err(|source| Error::Io {
            path: "<csv writer>".into(),
            source,
        })?;
        Ok(())
    }

    /// Splits rows into test, initial-train and candidate sets.
    ///
    /// The test set takes `ceil(test_frac * n)` rows, the initial training set
    /// `floor(init_train_frac * remainder)` of what is left, and every other row
    /// goes to the candidate pool.
    pub fn split(&self, test_frac: f64, init_train_frac: f64, seed: u64) -> Result<SplitIndices> {
        SplitIndices::new(self.n_rows(), test_frac, init_train_frac, seed)
    }

    /// Replaces each label, with probability `flip_prob`, by a uniformly drawn
    /// different class.
    pub fn inject_label_noise(&self, flip_prob: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&flip_prob) {
            return Err(Error::config(format!(
                "flip probability {flip_prob} outside [0, 1]"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = self.n_classes;
        let labels = self
            .labels
            .iter()
            .map(|&y| {
                if rng.gen_bool(flip_prob) {
                    let shift = rng.gen_range(1..c);
                    (y + shift) % c
                } else {
                    y
                }
            })
            .collect();
        self.with_labels(labels)
    }
}

/// Disjoint train / candidate / test row sets. Each set is sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub candidate: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

impl SplitIndices {
    pub fn sizes(n_rows: usize, test_frac: f64, init_train_frac: f64) -> Result<(usize, usize, usize)> {
        if !(test_frac > 0.0 && test_frac < 1.0) {
            return Err(Error::config(format!("test fraction {test_frac} outside (0, 1)")));
        }
        if !(init_train_frac > 0.0 && init_train_frac < 1.0) {
            return Err(Error::config(format!(
                "initial training fraction {init_train_frac} outside (0, 1)"
            )));
        }
        let n_test = ((test_frac * n_rows as f64) - FRACTION_SLACK).ceil().max(0.0) as usize;
        let rest = n_rows.saturating_sub(n_test);
        let n_train = ((init_train_frac * rest as f64) + FRACTION_SLACK).floor() as usize;
        let n_candidate = rest.saturating_sub(n_train);
        if n_test == 0 || n_train == 0 || n_candidate == 0 || n_test >= n_rows {
            return Err(Error::config(format!(
                "fractions ({test_frac}, {init_train_frac}) on {n_rows} rows leave an empty partition \
                 (test {n_test}, train {n_train}, candidate {n_candidate})"
            )));
        }
        Ok((n_test, n_train, n_candidate))
    }

    pub fn new(n_rows: usize, test_frac: f64, init_train_frac: f64, seed: u64) -> Result<Self> {
        let (n_test, n_train, _) = Self::sizes(n_rows, test_frac, init_train_frac)?;
        let mut order: Vec<usize> = (0..n_rows).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        order.shuffle(&mut rng);
        let mut test = order[..n_test].to_vec();
        let mut train = order[n_test..n_test + n_train].to_vec();
        let mut candidate = order[n_test + n_train..].to_vec();
        test.sort_unstable();
        train.sort_unstable();
        candidate.sort_unstable();
        Ok(Self {
            train,
            candidate,
            test,
            seed,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.train.len() + self.candidate.len() + self.test.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn tiny() -> BinaryDataset {
        BinaryDataset::new(
            vec![vec![0, 1], vec![1, 1], vec![1, 0]],
            vec![0, 1, 1],
            vec!["a".into(), "b".into()],
            2,
        )
        .unwrap()
    }

    #[test]
    fn one_row_file_gets_two_classes() {
        let d = BinaryDataset::read_csv("f1,label\n1,0\n".as_bytes(), 2).unwrap();
        assert_eq!(d.n_rows(), 1);
        assert_eq!(d.n_classes(), 2);
        assert_eq!(d.row(0), &[1]);
    }

    #[test]
    fn class_floor_from_caller() {
        let d = BinaryDataset::read_csv("f1,label\n1,0\n0,1\n".as_bytes(), 3).unwrap();
        assert_eq!(d.n_classes(), 3);
    }

    #[test]
    fn bad_cell_names_coordinates() {
        let err = BinaryDataset::read_csv("a,b,label\n0,1,0\n1,2,1\n".as_bytes(), 2).unwrap_err();
        match err {
            Error::Parse { row, column, .. } => {
                assert_eq!(row, 3);
                assert_eq!(column, 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_label_is_parse_error() {
        let err = BinaryDataset::read_csv("a,label\n0,x\n".as_bytes(), 2).unwrap_err();
        assert!(matches!(err, Error::Parse { row: 2, column: 2, .. }));
    }

    #[test]
    fn gap_in_labels_rejected() {
        let err = BinaryDataset::read_csv("a,label\n0,0\n1,2\n".as_bytes(), 2).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn empty_inputs_rejected() {
        assert!(matches!(
            BinaryDataset::read_csv("".as_bytes(), 2).unwrap_err(),
            Error::Validation(_)
        ));
        assert!(matches!(
            BinaryDataset::read_csv("a,label\n".as_bytes(), 2).unwrap_err(),
            Error::Validation(_)
        ));
    }

    #[test]
    fn constructor_rejects_non_binary() {
        let err = BinaryDataset::new(vec![vec![2]], vec![0], vec!["a".into()], 2).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
        let err = BinaryDataset::new(vec![vec![1]], vec![5], vec!["a".into()], 2).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn csv_round_trip() {
        let d = tiny();
        let mut buf = Vec::new();
        d.write_to(&mut buf).unwrap();
        let back = BinaryDataset::read_csv(buf.as_slice(), 2).unwrap();
        assert_eq!(back.labels(), d.labels());
        assert_eq!(back.row(2), d.row(2));
        assert_eq!(back.feature_names(), d.feature_names());
    }

    #[test]
    fn split_sizes_match_benchmark_tables() {
        assert_eq!(SplitIndices::sizes(150, 0.2, 0.2).unwrap(), (30, 24, 96));
        assert_eq!(SplitIndices::sizes(124, 0.2, 0.2).unwrap(), (25, 19, 80));
        assert_eq!(SplitIndices::sizes(122, 0.2, 0.2).unwrap(), (25, 19, 78));
        assert_eq!(SplitIndices::sizes(200, 0.2, 0.2).unwrap(), (40, 32, 128));
    }

    #[test]
    fn split_is_a_partition_and_deterministic() {
        let a = SplitIndices::new(150, 0.2, 0.2, 7).unwrap();
        let b = SplitIndices::new(150, 0.2, 0.2, 7).unwrap();
        assert_eq!(a, b);
        let all: BTreeSet<usize> = a
            .train
            .iter()
            .chain(&a.candidate)
            .chain(&a.test)
            .copied()
            .collect();
        assert_eq!(all.len(), 150);
        assert_eq!(all, (0..150).collect());
        let c = SplitIndices::new(150, 0.2, 0.2, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn degenerate_fractions_rejected() {
        assert!(SplitIndices::new(3, 0.2, 0.2, 0).is_err());
        assert!(SplitIndices::new(100, 0.0, 0.2, 0).is_err());
        assert!(SplitIndices::new(100, 0.2, 1.0, 0).is_err());
    }

    #[test]
    fn zero_noise_is_identity() {
        let d = tiny();
        assert_eq!(d.inject_label_noise(0.0, 3).unwrap(), d);
    }

    #[test]
    fn full_noise_flips_binary_labels() {
        let d = tiny();
        let flipped = d.inject_label_noise(1.0, 3).unwrap();
        for i in 0..d.n_rows() {
            assert_eq!(flipped.label(i), 1 - d.label(i));
            assert_eq!(flipped.row(i), d.row(i));
        }
    }

    #[test]
    fn noise_rate_concentrates() {
        let rows = vec![vec![0u8]; 1000];
        let d = BinaryDataset::new(rows, vec![0; 1000], vec!["a".into()], 3).unwrap();
        let noisy = d.inject_label_noise(0.3, 11).unwrap();
        let flipped = noisy.labels().iter().filter(|&&y| y != 0).count() as f64;
        let sigma = (1000.0f64 * 0.3 * 0.7).sqrt();
        assert!((flipped - 300.0).abs() <= 3.0 * sigma, "flipped {flipped}");
        assert!(noisy.labels().iter().all(|&y| y < 3));
    }

    #[test]
    fn subsample_keeps_order() {
        let rows: Vec<Vec<u8>> = (0..50).map(|i| vec![(i % 2) as u8]).collect();
        let labels: Vec<usize> = (0..50).map(|i| i % 2).collect();
        let d = BinaryDataset::new(rows, labels, vec!["a".into()], 2).unwrap();
        let s = d.subsample(20, 1).unwrap();
        assert_eq!(s.n_rows(), 20);
        assert_eq!(s, d.subsample(20, 1).unwrap());
    }
}

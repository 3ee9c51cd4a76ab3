//! Labeled datasets, treatment-rule datasets, random halving, and the CSV
//! schemas used on disk.
//!
//! Classification files carry a header `x1,...,xd,y` (optionally followed by a
//! `w` weight column); treatment files carry `x1,...,xd,t,r[,pi]`. Labels and
//! treatments may be coded `{0,1}` or `{-1,+1}` on disk and are always `{-1,+1}`
//! in memory.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// A row-major feature matrix with `n` rows and `dim` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Features {
    data: Vec<f64>,
    dim: usize,
}

impl Features {
    pub fn new(data: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidData("feature dimension must be at least 1".into()));
        }
        if data.len() % dim != 0 {
            return Err(Error::InvalidData(format!(
                "{} values do not fill rows of width {dim}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "non-finite feature value in row {}",
                pos / dim
            )));
        }
        Ok(Self { data, dim })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidData("ragged feature rows".into()));
        }
        Self::new(rows.concat(), dim)
    }

    pub fn n_rows(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    fn select(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self { data, dim: self.dim }
    }
}

/// Labeled classification sample with optional nonnegative per-row weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Features,
    labels: Vec<i8>,
    weights: Option<Vec<f64>>,
}

impl Dataset {
    pub fn new(features: Features, labels: Vec<i8>, weights: Option<Vec<f64>>) -> Result<Self> {
        let n = features.n_rows();
        if n == 0 {
            return Err(Error::InvalidData("dataset must contain at least one row".into()));
        }
        if labels.len() != n {
            return Err(Error::InvalidData(format!(
                "{} labels for {n} feature rows",
                labels.len()
            )));
        }
        if let Some(i) = labels.iter().position(|&y| y != 1 && y != -1) {
            return Err(Error::Label { row: i + 1, value: labels[i].to_string() });
        }
        if let Some(w) = &weights {
            if w.len() != n {
                return Err(Error::InvalidData(format!("{} weights for {n} rows", w.len())));
            }
            if let Some(i) = w.iter().position(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::InvalidData(format!(
                    "weight {} at row {} is not a finite nonnegative number",
                    w[i],
                    i + 1
                )));
            }
        }
        Ok(Self { features, labels, weights })
    }

    /// Convenience constructor from row vectors and `{-1,+1}` labels.
    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<i8>) -> Result<Self> {
        Self::new(Features::from_rows(rows)?, labels, None)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.dim()
    }

    pub fn features(&self) -> &Features {
        &self.features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.features.row(i)
    }

    pub fn labels(&self) -> &[i8] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> i8 {
        self.labels[i]
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    /// Weight of row `i`; 1 when the dataset is unweighted.
    pub fn weight(&self, i: usize) -> f64 {
        self.weights.as_ref().map_or(1.0, |w| w[i])
    }

    pub fn total_weight(&self) -> f64 {
        match &self.weights {
            Some(w) => w.iter().sum(),
            None => self.len() as f64,
        }
    }

    pub fn with_weights(self, weights: Option<Vec<f64>>) -> Result<Self> {
        Self::new(self.features, self.labels, weights)
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            features: self.features.select(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            weights: self
                .weights
                .as_ref()
                .map(|w| indices.iter().map(|&i| w[i]).collect()),
        }
    }

    /// Row-wise concatenation. Weights are kept only when either side has them,
    /// in which case the unweighted side contributes ones.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if self.dim() != other.dim() {
            return Err(Error::Shape { expected: self.dim(), found: other.dim() });
        }
        let mut data = self.features.as_slice().to_vec();
        data.extend_from_slice(other.features.as_slice());
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        let weights = if self.weights.is_some() || other.weights.is_some() {
            let mut w: Vec<f64> = (0..self.len()).map(|i| self.weight(i)).collect();
            w.extend((0..other.len()).map(|i| other.weight(i)));
            Some(w)
        } else {
            None
        };
        Dataset::new(Features::new(data, self.dim())?, labels, weights)
    }
}

/// Covariates, binary treatment, observed reward, and optional propensities.
#[derive(Debug, Clone, PartialEq)]
pub struct ItrDataset {
    features: Features,
    treatments: Vec<i8>,
    rewards: Vec<f64>,
    propensities: Option<Vec<f64>>,
}

impl ItrDataset {
    pub fn new(
        features: Features,
        treatments: Vec<i8>,
        rewards: Vec<f64>,
        propensities: Option<Vec<f64>>,
    ) -> Result<Self> {
        let n = features.n_rows();
        if n == 0 {
            return Err(Error::InvalidData("dataset must contain at least one row".into()));
        }
        if treatments.len() != n || rewards.len() != n {
            return Err(Error::InvalidData("treatment/reward length does not match rows".into()));
        }
        if let Some(i) = treatments.iter().position(|&t| t != 1 && t != -1) {
            return Err(Error::Label { row: i + 1, value: treatments[i].to_string() });
        }
        if let Some(i) = rewards.iter().position(|r| !r.is_finite()) {
            return Err(Error::Parse { row: i + 1, message: "non-finite reward".into() });
        }
        if let Some(p) = &propensities {
            if p.len() != n {
                return Err(Error::InvalidData("propensity length does not match rows".into()));
            }
            if let Some(i) = p.iter().position(|&v| !(v > 0.0 && v < 1.0)) {
                return Err(Error::Propensity { row: i + 1, value: p[i] });
            }
        }
        Ok(Self { features, treatments, rewards, propensities })
    }

    pub fn len(&self) -> usize {
        self.treatments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.treatments.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.dim()
    }

    pub fn features(&self) -> &Features {
        &self.features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.features.row(i)
    }

    pub fn treatments(&self) -> &[i8] {
        &self.treatments
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn propensities(&self) -> Option<&[f64]> {
        self.propensities.as_deref()
    }

    pub fn with_propensities(self, propensities: Vec<f64>) -> Result<Self> {
        Self::new(self.features, self.treatments, self.rewards, Some(propensities))
    }

    pub fn map_rewards(self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let rewards = self.rewards.iter().map(|&r| f(r)).collect();
        Self::new(self.features, self.treatments, rewards, self.propensities)
    }

    /// Bounded-outcome check: every `|R_i| <= bound`.
    pub fn check_reward_bound(&self, bound: f64) -> Result<()> {
        match self.rewards.iter().position(|r| r.abs() > bound) {
            Some(i) => Err(Error::RewardBound { row: i + 1, value: self.rewards[i], bound }),
            None => Ok(()),
        }
    }

    /// Strict-overlap check: every propensity in `[c0, 1 - c0]`.
    pub fn check_overlap(&self, c0: f64) -> Result<()> {
        let p = self.propensities.as_ref().ok_or_else(|| {
            Error::InvalidData("propensities are required for the overlap check".into())
        })?;
        let bad: Vec<usize> = p
            .iter()
            .enumerate()
            .filter(|(_, &v)| v < c0 || v > 1.0 - c0)
            .map(|(i, _)| i + 1)
            .collect();
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Overlap { c0, count: bad.len(), rows: bad.into_iter().take(50).collect() })
        }
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            features: self.features.select(indices),
            treatments: indices.iter().map(|&i| self.treatments[i]).collect(),
            rewards: indices.iter().map(|&i| self.rewards[i]).collect(),
            propensities: self
                .propensities
                .as_ref()
                .map(|p| indices.iter().map(|&i| p[i]).collect()),
        }
    }
}

/// Row-indexable collections that can be split in two.
pub trait RowSubset: Sized {
    fn n_rows(&self) -> usize;
    fn select_rows(&self, indices: &[usize]) -> Self;
}

impl RowSubset for Dataset {
    fn n_rows(&self) -> usize {
        self.len()
    }
    fn select_rows(&self, indices: &[usize]) -> Self {
        self.subset(indices)
    }
}

impl RowSubset for ItrDataset {
    fn n_rows(&self) -> usize {
        self.len()
    }
    fn select_rows(&self, indices: &[usize]) -> Self {
        self.subset(indices)
    }
}

/// Two halves of a random partition. `first` is the calibration half and
/// receives the extra row when `n` is odd.
#[derive(Debug, Clone)]
pub struct SplitPair<T> {
    pub first: T,
    pub second: T,
    pub first_indices: Vec<usize>,
    pub second_indices: Vec<usize>,
    pub seed: u64,
}

/// Uniformly random partition into `ceil(n/2)` and `floor(n/2)` rows,
/// deterministic in `seed`. Within each half rows keep their original order.
pub fn split_half<T: RowSubset>(data: &T, seed: u64) -> Result<SplitPair<T>> {
    let n = data.n_rows();
    if n < 2 {
        return Err(Error::Size(format!("cannot split {n} rows into two nonempty halves")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = n.div_ceil(2);
    let mut first_indices = order[..cut].to_vec();
    let mut second_indices = order[cut..].to_vec();
    first_indices.sort_unstable();
    second_indices.sort_unstable();
    Ok(SplitPair {
        first: data.select_rows(&first_indices),
        second: data.select_rows(&second_indices),
        first_indices,
        second_indices,
        seed,
    })
}

/// Column naming for classification CSV files.
#[derive(Debug, Clone)]
pub struct CsvSchema {
    pub feature_prefix: String,
    pub label_column: String,
    pub weight_column: String,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self { feature_prefix: "x".into(), label_column: "y".into(), weight_column: "w".into() }
    }
}

/// Header layout: the feature columns, then named extra columns.
struct Layout {
    dim: usize,
    extra: Vec<Option<usize>>,
}

fn parse_header(
    headers: &csv::StringRecord,
    prefix: &str,
    required: &[&str],
    optional: &[&str],
) -> Result<Layout> {
    let names: Vec<&str> = headers.iter().map(str::trim).collect();
    let mut dim = 0;
    while dim < names.len() && names[dim] == format!("{prefix}{}", dim + 1) {
        dim += 1;
    }
    if dim == 0 {
        return Err(Error::Schema(format!("missing feature column {prefix}1")));
    }
    let find = |name: &str| names.iter().position(|n| *n == name);
    for name in &names[dim..] {
        if name.starts_with(prefix) && name[prefix.len()..].parse::<usize>().is_ok() {
            return Err(Error::Schema(format!(
                "feature column {name} is not contiguous with {prefix}1..{prefix}{dim}"
            )));
        }
        if !required.contains(name) && !optional.contains(name) {
            return Err(Error::Schema(format!("unexpected column {name}")));
        }
    }
    let mut extra = Vec::new();
    for name in required {
        match find(name) {
            Some(pos) => extra.push(Some(pos)),
            None => return Err(Error::Schema(format!("missing column {name}"))),
        }
    }
    for name in optional {
        extra.push(find(name));
    }
    Ok(Layout { dim, extra })
}

fn parse_number(record: &csv::StringRecord, col: usize, row: usize) -> Result<f64> {
    let cell = record.get(col).unwrap_or("").trim();
    cell.parse::<f64>().map_err(|_| Error::Parse {
        row,
        message: format!("cannot parse {cell:?} in column {} as a number", col + 1),
    })
}

fn parse_sign(record: &csv::StringRecord, col: usize, row: usize) -> Result<i8> {
    let cell = record.get(col).unwrap_or("").trim();
    match cell.parse::<f64>() {
        Ok(v) if v == 1.0 => Ok(1),
        Ok(v) if v == 0.0 || v == -1.0 => Ok(-1),
        _ => Err(Error::Label { row, value: cell.to_string() }),
    }
}

fn read_features(record: &csv::StringRecord, dim: usize, row: usize, out: &mut Vec<f64>) -> Result<()> {
    for col in 0..dim {
        let v = parse_number(record, col, row)?;
        if !v.is_finite() {
            return Err(Error::Parse { row, message: format!("non-finite value in column x{}", col + 1) });
        }
        out.push(v);
    }
    Ok(())
}

/// Parse a classification CSV from any reader.
pub fn read_classification_csv<R: Read>(reader: R, schema: &CsvSchema) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let layout = parse_header(
        rdr.headers()?,
        &schema.feature_prefix,
        &[schema.label_column.as_str()],
        &[schema.weight_column.as_str()],
    )?;
    let label_col = layout.extra[0].expect("required column");
    let weight_col = layout.extra[1];
    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut weights = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row = i + 1;
        read_features(&record, layout.dim, row, &mut data)?;
        labels.push(parse_sign(&record, label_col, row)?);
        if let Some(col) = weight_col {
            weights.push(parse_number(&record, col, row)?);
        }
    }
    let weights = weight_col.map(|_| weights);
    Dataset::new(Features::new(data, layout.dim)?, labels, weights)
}

pub fn load_classification_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset> {
    read_classification_csv(File::open(path)?, schema)
}

/// Write `x1..xd,y[,w]`. Values use the shortest round-trip representation.
pub fn write_classification_csv<W: Write>(data: &Dataset, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (1..=data.dim()).map(|j| format!("x{j}")).collect();
    header.push("y".into());
    if data.weights().is_some() {
        header.push("w".into());
    }
    wtr.write_record(&header)?;
    for i in 0..data.len() {
        let mut rec: Vec<String> = data.row(i).iter().map(f64::to_string).collect();
        rec.push(data.label(i).to_string());
        if let Some(w) = data.weights() {
            rec.push(w[i].to_string());
        }
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn save_classification_csv(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    write_classification_csv(data, File::create(path)?)
}

/// Parse a treatment-rule CSV (`x1..xd,t,r[,pi]`) from any reader.
pub fn read_itr_csv<R: Read>(reader: R) -> Result<ItrDataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let layout = parse_header(rdr.headers()?, "x", &["t", "r"], &["pi"])?;
    let (t_col, r_col, pi_col) = (
        layout.extra[0].expect("required column"),
        layout.extra[1].expect("required column"),
        layout.extra[2],
    );
    let mut data = Vec::new();
    let mut treatments = Vec::new();
    let mut rewards = Vec::new();
    let mut propensities = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row = i + 1;
        read_features(&record, layout.dim, row, &mut data)?;
        treatments.push(parse_sign(&record, t_col, row)?);
        let r = parse_number(&record, r_col, row)?;
        if !r.is_finite() {
            return Err(Error::Parse { row, message: "non-finite reward".into() });
        }
        rewards.push(r);
        if let Some(col) = pi_col {
            let p = parse_number(&record, col, row)?;
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::Propensity { row, value: p });
            }
            propensities.push(p);
        }
    }
    let propensities = pi_col.map(|_| propensities);
    ItrDataset::new(Features::new(data, layout.dim)?, treatments, rewards, propensities)
}

pub fn load_itr_csv(path: impl AsRef<Path>) -> Result<ItrDataset> {
    read_itr_csv(File::open(path)?)
}

pub fn write_itr_csv<W: Write>(data: &ItrDataset, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (1..=data.dim()).map(|j| format!("x{j}")).collect();
    header.push("t".into());
    header.push("r".into());
    if data.propensities().is_some() {
        header.push("pi".into());
    }
    wtr.write_record(&header)?;
    for i in 0..data.len() {
        let mut rec: Vec<String> = data.row(i).iter().map(f64::to_string).collect();
        rec.push(data.treatments()[i].to_string());
        rec.push(data.rewards()[i].to_string());
        if let Some(p) = data.propensities() {
            rec.push(p[i].to_string());
        }
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn save_itr_csv(data: &ItrDataset, path: impl AsRef<Path>) -> Result<()> {
    write_itr_csv(data, File::create(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(text: &str) -> Result<Dataset> {
        read_classification_csv(text.as_bytes(), &CsvSchema::default())
    }

    #[test]
    fn parses_signed_labels() {
        let d = parse("x1,y\n0.5,1\n-0.5,-1").unwrap();
        assert_eq!((d.len(), d.dim()), (2, 1));
        assert_eq!(d.labels(), &[1, -1]);
        assert_eq!(d.row(1), &[-0.5]);
    }

    #[test]
    fn zero_label_maps_to_negative() {
        assert_eq!(parse("x1,y\n0.5,0").unwrap().labels(), &[-1]);
    }

    #[test]
    fn out_of_domain_label() {
        match parse("x1,y\n0.5,2") {
            Err(Error::Label { row, .. }) => assert_eq!(row, 1),
            other => panic!("expected label error, got {other:?}"),
        }
    }

    #[test]
    fn schema_and_parse_errors() {
        assert!(matches!(parse("x1,z\n0.5,1"), Err(Error::Schema(_))));
        assert!(matches!(parse("a,y\n0.5,1"), Err(Error::Schema(_))));
        assert!(matches!(parse("x1,x3,y\n0.5,1,1"), Err(Error::Schema(_))));
        match parse("x1,x2,y\n0.5,1,1\n0.1,abc,0") {
            Err(Error::Parse { row, .. }) => assert_eq!(row, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn weight_column_is_optional() {
        let d = parse("x1,y,w\n0.5,1,2\n1.5,0,0.5").unwrap();
        assert_eq!(d.weights(), Some(&[2.0, 0.5][..]));
        assert!(parse("x1,y,w\n0.5,1,-1").is_err());
    }

    #[test]
    fn itr_parsing() {
        let d = read_itr_csv("x1,t,r\n1.0,1,2.5".as_bytes()).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.treatments(), &[1]);
        assert_eq!(d.rewards(), &[2.5]);
        assert!(d.propensities().is_none());

        let d = read_itr_csv("x1,t,r,pi\n1.0,0,0.0,0.5".as_bytes()).unwrap();
        assert_eq!(d.treatments(), &[-1]);
        assert_eq!(d.propensities(), Some(&[0.5][..]));

        assert!(matches!(
            read_itr_csv("x1,t,r,pi\n1.0,1,1.0,1.2".as_bytes()),
            Err(Error::Propensity { row: 1, .. })
        ));
        assert!(matches!(
            read_itr_csv("x1,t,r\n1.0,1,inf".as_bytes()),
            Err(Error::Parse { row: 1, .. })
        ));
    }

    #[test]
    fn reward_bound_and_overlap() {
        let d = read_itr_csv("x1,t,r,pi\n1.0,1,3.0,0.005\n0.0,0,-1.0,0.5".as_bytes()).unwrap();
        assert!(matches!(d.check_reward_bound(2.0), Err(Error::RewardBound { row: 1, .. })));
        assert!(d.check_reward_bound(3.0).is_ok());
        match d.check_overlap(0.01) {
            Err(Error::Overlap { rows, .. }) => assert_eq!(rows, vec![1]),
            other => panic!("expected overlap error, got {other:?}"),
        }
    }

    fn toy(n: usize) -> Dataset {
        let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64]).collect();
        Dataset::from_rows(&rows, vec![1; n]).unwrap()
    }

    #[test]
    fn split_sizes_and_determinism() {
        let s = split_half(&toy(4), 7).unwrap();
        assert_eq!(s.first.len(), 2);
        assert_eq!(s.second.len(), 2);
        let mut all = [s.first_indices.clone(), s.second_indices.clone()].concat();
        all.sort_unstable();
        assert_eq!(all, vec![0, 1, 2, 3]);

        let odd = split_half(&toy(5), 1).unwrap();
        assert_eq!((odd.first.len(), odd.second.len()), (3, 2));

        let again = split_half(&toy(4), 7).unwrap();
        assert_eq!(s.first_indices, again.first_indices);
        assert!(matches!(split_half(&toy(1), 0), Err(Error::Size(_))));
    }

    #[test]
    fn round_trip_through_csv() {
        let rows = vec![vec![0.1234567890123, -2.5e-7], vec![3.0, 1.0 / 3.0]];
        let d = Dataset::from_rows(&rows, vec![1, -1]).unwrap();
        let mut buf = Vec::new();
        write_classification_csv(&d, &mut buf).unwrap();
        let back = read_classification_csv(buf.as_slice(), &CsvSchema::default()).unwrap();
        assert_eq!(back, d);
    }

    proptest! {
        #[test]
        fn split_is_a_partition(n in 2usize..200, seed in any::<u64>()) {
            let s = split_half(&toy(n), seed).unwrap();
            prop_assert_eq!(s.first.len(), n.div_ceil(2));
            prop_assert_eq!(s.second.len(), n / 2);
            let mut all = [s.first_indices.clone(), s.second_indices].concat();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        }

        #[test]
        fn csv_round_trip(values in prop::collection::vec(-1e6f64..1e6, 1..40), dim in 1usize..4) {
            let n = values.len() / dim;
            prop_assume!(n >= 1);
            let feats = Features::new(values[..n * dim].to_vec(), dim).unwrap();
            let labels = (0..n).map(|i| if i % 3 == 0 { 1 } else { -1 }).collect();
            let d = Dataset::new(feats, labels, None).unwrap();
            let mut buf = Vec::new();
            write_classification_csv(&d, &mut buf).unwrap();
            let back = read_classification_csv(buf.as_slice(), &CsvSchema::default()).unwrap();
            prop_assert_eq!(back, d);
        }
    }
}

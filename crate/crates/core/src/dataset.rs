//! Dataset ingestion and preparation: KEEL and CSV parsing, min-max
//! normalization, stratified k-fold splitting, Gaussian feature-noise
//! injection, and synthetic imbalanced data for tests.
//!
//! Labels are a single column in {+1, -1}. The +1 class is the minority (or
//! tied) class by convention; loaders enforce this and record a flag when
//! the incoming labels had to be swapped.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct Dataset {
    pub name: String,
    pub x: DMatrix<f64>,
    pub y: Vec<i8>,
    pub feature_names: Vec<String>,
    /// True when the loader swapped label roles to keep +1 the minority class.
    pub swapped: bool,
}

impl Dataset {
    pub fn new(name: impl Into<String>, x: DMatrix<f64>, y: Vec<i8>, feature_names: Vec<String>) -> Self {
        assert_eq!(x.nrows(), y.len(), "row count must match label count");
        assert_eq!(x.ncols(), feature_names.len(), "column count must match feature names");
        Dataset {
            name: name.into(),
            x,
            y,
            feature_names,
            swapped: false,
        }
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Number of (+1, -1) samples.
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.y.iter().filter(|&&v| v > 0).count();
        (pos, self.y.len() - pos)
    }

    /// Indices of the (+1, -1) samples, in order of appearance.
    pub fn class_indices(&self) -> (Vec<usize>, Vec<usize>) {
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for (i, &v) in self.y.iter().enumerate() {
            if v > 0 {
                pos.push(i);
            } else {
                neg.push(i);
            }
        }
        (pos, neg)
    }

    /// Row subset with labels, preserving index order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let p = self.p();
        let x = DMatrix::from_fn(indices.len(), p, |i, j| self.x[(indices[i], j)]);
        let y = indices.iter().map(|&i| self.y[i]).collect();
        Dataset {
            name: self.name.clone(),
            x,
            y,
            feature_names: self.feature_names.clone(),
            swapped: self.swapped,
        }
    }
}

fn enforce_minority_positive(ds: &mut Dataset) {
    let (pos, neg) = ds.class_counts();
    if pos > neg && neg > 0 {
        for v in ds.y.iter_mut() {
            *v = -*v;
        }
        ds.swapped = true;
    }
}

fn map_class_label(token: &str) -> Option<i8> {
    if token.eq_ignore_ascii_case("positive") {
        Some(1)
    } else if token.eq_ignore_ascii_case("negative") {
        Some(-1)
    } else {
        None
    }
}

/// Parses a KEEL `.dat` file: `@relation`/`@attribute` header, optional
/// `@inputs`/`@outputs`, then comma-separated rows after `@data`. The class
/// column holds the strings `positive`/`negative`.
pub fn parse_keel(text: &str) -> Result<Dataset> {
    let mut relation = String::from("keel");
    let mut attr_names: Vec<String> = Vec::new();
    let mut attr_values: Vec<Option<Vec<String>>> = Vec::new();
    let mut inputs: Option<Vec<String>> = None;
    let mut outputs: Option<Vec<String>> = None;
    let mut data_start = None;

    let lines: Vec<&str> = text.lines().collect();
    for (li, raw) in lines.iter().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let lower = line.to_ascii_lowercase();
        if lower.starts_with("@relation") {
            relation = line[9..].trim().to_string();
            if relation.is_empty() {
                relation = "keel".into();
            }
        } else if lower.starts_with("@attribute") {
            let rest = line[10..].trim();
            let brace = rest.find(['{', '[']);
            let (name_part, tail) = match brace {
                Some(idx) => (&rest[..idx], &rest[idx..]),
                None => (rest, ""),
            };
            let name = name_part
                .split_whitespace()
                .next()
                .unwrap_or("")
                .to_string();
            let values = if tail.starts_with('{') {
                tail.strip_prefix('{')
                    .and_then(|s| s.split('}').next())
                    .map(|s| s.split(',').map(|v| v.trim().to_string()).collect())
            } else {
                None
            };
            attr_names.push(name);
            attr_values.push(values);
        } else if lower.starts_with("@inputs") {
            inputs = Some(
                line[7..]
                    .split(',')
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .collect(),
            );
        } else if lower.starts_with("@outputs") || lower.starts_with("@output") {
            let cut = if lower.starts_with("@outputs") { 8 } else { 7 };
            outputs = Some(
                line[cut..]
                    .split(',')
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .collect(),
            );
        } else if lower.starts_with("@data") {
            data_start = Some(li + 1);
            break;
        }
    }

    let data_start = data_start.ok_or(Error::MissingHeader)?;
    if attr_names.is_empty() {
        return Err(Error::MissingHeader);
    }

    let class_name = outputs
        .as_ref()
        .and_then(|o| o.first().cloned())
        .unwrap_or_else(|| attr_names.last().unwrap().clone());
    let class_idx = attr_names
        .iter()
        .position(|n| n.eq_ignore_ascii_case(&class_name))
        .ok_or(Error::MissingHeader)?;
    let class_set = attr_values[class_idx].clone();

    let input_names: Vec<String> = match &inputs {
        Some(list) => list.clone(),
        None => attr_names
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != class_idx)
            .map(|(_, n)| n.clone())
            .collect(),
    };
    let input_cols: Vec<usize> = input_names
        .iter()
        .map(|n| {
            attr_names
                .iter()
                .position(|a| a.eq_ignore_ascii_case(n))
                .ok_or(Error::MissingHeader)
        })
        .collect::<Result<_>>()?;

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut y: Vec<i8> = Vec::new();
    for (ri, raw) in lines[data_start..].iter().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('%') || line.starts_with('@') {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(|c| c.trim()).collect();
        if cells.len() != attr_names.len() {
            return Err(Error::ArityMismatch {
                row: ri + 1,
                expected: attr_names.len(),
                found: cells.len(),
            });
        }
        let class_token = cells[class_idx];
        if let Some(set) = &class_set {
            if !set.iter().any(|v| v.eq_ignore_ascii_case(class_token)) {
                return Err(Error::UnknownClassLabel {
                    row: ri + 1,
                    label: class_token.to_string(),
                });
            }
        }
        let label = map_class_label(class_token).ok_or_else(|| Error::UnknownClassLabel {
            row: ri + 1,
            label: class_token.to_string(),
        })?;
        let mut row = Vec::with_capacity(input_cols.len());
        for &ci in &input_cols {
            let cell = cells[ci];
            let v: f64 = cell.parse().map_err(|_| Error::NonNumericFeature {
                row: ri + 1,
                col: ci + 1,
                value: cell.to_string(),
            })?;
            row.push(v);
        }
        rows.push(row);
        y.push(label);
    }

    let p = input_cols.len();
    let x = DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]);
    let mut ds = Dataset::new(relation, x, y, input_names);
    enforce_minority_positive(&mut ds);
    Ok(ds)
}

/// Serializes a dataset back to KEEL format. `parse_keel` on the output
/// reproduces the numeric payload and labels exactly (floats are written
/// with shortest round-trip formatting).
pub fn write_keel(ds: &Dataset) -> String {
    let mut out = String::new();
    out.push_str(&format!("@relation {}\n", ds.name));
    for name in &ds.feature_names {
        out.push_str(&format!("@attribute {name} real\n"));
    }
    out.push_str("@attribute Class {positive, negative}\n");
    out.push_str(&format!("@inputs {}\n", ds.feature_names.join(", ")));
    out.push_str("@outputs Class\n@data\n");
    for i in 0..ds.n() {
        let mut cells: Vec<String> = (0..ds.p()).map(|j| format!("{}", ds.x[(i, j)])).collect();
        cells.push(if ds.y[i] > 0 { "positive".into() } else { "negative".into() });
        out.push_str(&cells.join(", "));
        out.push('\n');
    }
    out
}

/// Parses a CSV with a header row; the last column is the class label, one
/// of `positive`, `negative`, `+1`, `-1`, `1`, `0` (0 maps to -1).
pub fn parse_csv(text: &str, name: &str) -> Result<Dataset> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(Error::MissingHeader)?;
    let cols: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    if cols.len() < 2 {
        return Err(Error::MissingHeader);
    }
    let p = cols.len() - 1;

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut y: Vec<i8> = Vec::new();
    for (li, line) in lines {
        let cells: Vec<&str> = line.split(',').map(|c| c.trim()).collect();
        if cells.len() != cols.len() {
            return Err(Error::ArityMismatch {
                row: li + 1,
                expected: cols.len(),
                found: cells.len(),
            });
        }
        let token = cells[p];
        let label = match token {
            "+1" | "1" => 1,
            "-1" | "0" => -1,
            other => map_class_label(other).ok_or_else(|| Error::UnknownClassLabel {
                row: li + 1,
                label: other.to_string(),
            })?,
        };
        let mut row = Vec::with_capacity(p);
        for (ci, cell) in cells[..p].iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::NonNumericFeature {
                row: li + 1,
                col: ci + 1,
                value: cell.to_string(),
            })?;
            row.push(v);
        }
        rows.push(row);
        y.push(label);
    }

    let x = DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]);
    let mut ds = Dataset::new(name, x, y, cols[..p].to_vec());
    enforce_minority_positive(&mut ds);
    Ok(ds)
}

/// Loads a dataset from a file path, dispatching on the extension
/// (`.dat` is KEEL, anything else is treated as CSV).
pub fn load(path: &std::path::Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    match path.extension().and_then(|e| e.to_str()) {
        Some("dat") => {
            let mut ds = parse_keel(&text)?;
            ds.name = stem;
            Ok(ds)
        }
        _ => parse_csv(&text, &stem),
    }
}

/// Per-feature min-max scaling parameters, fitted on a training fold and
/// reusable on test folds.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Normalizer {
    pub mins: Vec<f64>,
    pub ranges: Vec<f64>,
}

impl Normalizer {
    pub fn fit(ds: &Dataset) -> Normalizer {
        let p = ds.p();
        let mut mins = vec![f64::INFINITY; p];
        let mut maxs = vec![f64::NEG_INFINITY; p];
        for j in 0..p {
            for i in 0..ds.n() {
                let v = ds.x[(i, j)];
                mins[j] = mins[j].min(v);
                maxs[j] = maxs[j].max(v);
            }
        }
        let ranges = mins
            .iter()
            .zip(&maxs)
            .map(|(&lo, &hi)| if hi > lo { hi - lo } else { 0.0 })
            .collect();
        Normalizer { mins, ranges }
    }

    pub fn apply_row(&self, row: &mut [f64]) {
        for (j, v) in row.iter_mut().enumerate() {
            *v = if self.ranges[j] > 0.0 {
                (*v - self.mins[j]) / self.ranges[j]
            } else {
                0.0
            };
        }
    }

    pub fn apply(&self, ds: &Dataset) -> Dataset {
        let mut out = ds.clone();
        for i in 0..ds.n() {
            for j in 0..ds.p() {
                out.x[(i, j)] = if self.ranges[j] > 0.0 {
                    (ds.x[(i, j)] - self.mins[j]) / self.ranges[j]
                } else {
                    0.0
                };
            }
        }
        out
    }
}

/// Fits min-max parameters on `ds` and returns the scaled copy together
/// with the parameters. Constant features map to all-zero columns.
pub fn normalize(ds: &Dataset) -> (Dataset, Normalizer) {
    let norm = Normalizer::fit(ds);
    (norm.apply(ds), norm)
}

/// Seeded stratified k-fold split. Returns `(train, test)` index pairs;
/// test folds partition the index set and per-fold class counts differ from
/// exact proportionality by at most one sample.
pub fn stratified_kfold(ds: &Dataset, k: usize, seed: u64) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    if k < 2 {
        return Err(Error::Config(format!("fold count must be at least 2, got {k}")));
    }
    let (pos, neg) = ds.class_indices();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::SingleClass);
    }
    for cls in [&pos, &neg] {
        if cls.len() < k {
            return Err(Error::TooFewSamplesPerClass { count: cls.len(), k });
        }
    }

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut shuffled_pos = pos;
    let mut shuffled_neg = neg;
    shuffled_pos.shuffle(&mut rng);
    shuffled_neg.shuffle(&mut rng);

    let mut test_folds: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &idx) in shuffled_pos.iter().enumerate() {
        test_folds[i % k].push(idx);
    }
    for (i, &idx) in shuffled_neg.iter().enumerate() {
        test_folds[i % k].push(idx);
    }

    let n = ds.n();
    let mut out = Vec::with_capacity(k);
    for fold in test_folds.iter_mut() {
        fold.sort_unstable();
        let in_test: std::collections::HashSet<usize> = fold.iter().copied().collect();
        let train: Vec<usize> = (0..n).filter(|i| !in_test.contains(i)).collect();
        out.push((train, fold.clone()));
    }
    Ok(out)
}

/// Fraction of samples to corrupt and the seed driving both row selection
/// and the noise draws.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub level: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(level: f64, seed: u64) -> Result<NoiseSpec> {
        if !(0.0..=1.0).contains(&level) {
            return Err(Error::Config(format!(
                "noise level must lie in [0,1], got {level}"
            )));
        }
        Ok(NoiseSpec { level, seed })
    }
}

/// Corrupts exactly round(level*N) distinct rows: every feature of a selected
/// row receives additive zero-mean Gaussian noise scaled by that feature's
/// standard deviation over the whole input. Deterministic given the seed.
pub fn inject_noise(ds: &Dataset, spec: &NoiseSpec) -> Dataset {
    let n = ds.n();
    let n_corrupt = (spec.level * n as f64).round() as usize;
    if n_corrupt == 0 {
        return ds.clone();
    }

    let p = ds.p();
    let mut sigma = vec![0.0; p];
    if n >= 2 {
        for j in 0..p {
            let mean = (0..n).map(|i| ds.x[(i, j)]).sum::<f64>() / n as f64;
            let ss = (0..n).map(|i| (ds.x[(i, j)] - mean).powi(2)).sum::<f64>();
            sigma[j] = (ss / (n - 1) as f64).sqrt();
        }
    }

    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut selected: Vec<usize> = order.into_iter().take(n_corrupt.min(n)).collect();
    selected.sort_unstable();

    let mut out = ds.clone();
    for &i in &selected {
        for j in 0..p {
            let z: f64 = rng.sample(StandardNormal);
            if sigma[j] > 0.0 {
                out.x[(i, j)] += sigma[j] * z;
            }
        }
    }
    out
}

/// Two spherical Gaussian clouds with means at ±separation/2 on every
/// coordinate; +1 samples first. Deterministic given the seed.
pub fn synth_gaussians(
    n_pos: usize,
    n_neg: usize,
    p: usize,
    separation: f64,
    seed: u64,
) -> Dataset {
    assert!(n_pos >= 1 && n_neg >= 1 && p >= 1, "degenerate synthetic spec");
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let n = n_pos + n_neg;
    let mut x = DMatrix::zeros(n, p);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let center = if i < n_pos { separation / 2.0 } else { -separation / 2.0 };
        for j in 0..p {
            let z: f64 = rng.sample(StandardNormal);
            x[(i, j)] = center + z;
        }
        y.push(if i < n_pos { 1 } else { -1 });
    }
    let names = (0..p).map(|j| format!("f{j}")).collect();
    let mut ds = Dataset::new(
        format!("synth_{n_pos}v{n_neg}_p{p}_sep{separation}_s{seed}"),
        x,
        y,
        names,
    );
    enforce_minority_positive(&mut ds);
    ds
}

/// Majority count divided by minority count (≥ 1).
pub fn imbalance_ratio(ds: &Dataset) -> Result<f64> {
    let (pos, neg) = ds.class_counts();
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    Ok(pos.max(neg) as f64 / pos.min(neg) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TINY_KEEL: &str = "@relation tiny\n@attribute a real\n@attribute b real\n@attribute Class {positive, negative}\n@inputs a, b\n@outputs Class\n@data\n1.0,2.0,positive\n0.0,0.0,negative\n";

    #[test]
    fn parse_keel_two_rows() {
        let ds = parse_keel(TINY_KEEL).unwrap();
        assert_eq!(ds.n(), 2);
        assert_eq!(ds.p(), 2);
        assert_eq!(ds.y, vec![1, -1]);
        assert_eq!(ds.x[(0, 0)], 1.0);
        assert_eq!(ds.x[(0, 1)], 2.0);
        assert!(!ds.swapped);
    }

    #[test]
    fn parse_keel_short_row_is_arity_mismatch() {
        let text = TINY_KEEL.replace("0.0,0.0,negative", "0.0,negative");
        assert!(matches!(
            parse_keel(&text),
            Err(Error::ArityMismatch { expected: 3, found: 2, .. })
        ));
    }

    #[test]
    fn parse_keel_undeclared_class_label_rejected() {
        let text = TINY_KEEL.replace("1.0,2.0,positive", "1.0,2.0,pos");
        assert!(matches!(parse_keel(&text), Err(Error::UnknownClassLabel { .. })));
    }

    #[test]
    fn parse_keel_missing_data_header() {
        assert!(matches!(
            parse_keel("@relation x\n@attribute a real\n1.0\n"),
            Err(Error::MissingHeader)
        ));
    }

    #[test]
    fn parse_keel_rejects_missing_values() {
        let text = TINY_KEEL.replace("1.0,2.0,positive", "1.0,?,positive");
        assert!(matches!(parse_keel(&text), Err(Error::NonNumericFeature { .. })));
    }

    #[test]
    fn parse_keel_swaps_when_positive_is_majority() {
        let text = "@relation sw\n@attribute a real\n@attribute Class {positive, negative}\n@data\n1,positive\n2,positive\n3,negative\n";
        let ds = parse_keel(text).unwrap();
        assert!(ds.swapped);
        assert_eq!(ds.y, vec![-1, -1, 1]);
    }

    #[test]
    fn keel_round_trip_preserves_payload() {
        let ds = synth_gaussians(3, 5, 2, 1.5, 42);
        let back = parse_keel(&write_keel(&ds)).unwrap();
        assert_eq!(back.n(), ds.n());
        assert_eq!(back.y, ds.y);
        for i in 0..ds.n() {
            for j in 0..ds.p() {
                assert_eq!(back.x[(i, j)].to_bits(), ds.x[(i, j)].to_bits());
            }
        }
    }

    #[test]
    fn parse_csv_label_tokens() {
        let text = "a,b,label\n1,2,+1\n3,4,-1\n5,6,1\n7,8,0\n9,0,positive\n1,1,negative\n";
        let ds = parse_csv(text, "t").unwrap();
        assert_eq!(ds.y, vec![1, -1, 1, -1, 1, -1]);
        let bad = parse_csv("a,label\n1,maybe\n", "t");
        assert!(matches!(bad, Err(Error::UnknownClassLabel { .. })));
    }

    #[test]
    fn normalize_maps_to_unit_interval() {
        let x = DMatrix::from_column_slice(3, 2, &[2.0, 4.0, 6.0, 5.0, 5.0, 5.0]);
        let ds = Dataset::new("n", x, vec![1, -1, -1], vec!["a".into(), "b".into()]);
        let (scaled, _) = normalize(&ds);
        assert_eq!(scaled.x.column(0).as_slice(), &[0.0, 0.5, 1.0]);
        assert_eq!(scaled.x.column(1).as_slice(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn normalize_is_idempotent() {
        let ds = synth_gaussians(5, 9, 3, 2.0, 1);
        let (once, _) = normalize(&ds);
        let (twice, _) = normalize(&once);
        for i in 0..ds.n() {
            for j in 0..ds.p() {
                assert_eq!(once.x[(i, j)].to_bits(), twice.x[(i, j)].to_bits());
            }
        }
    }

    #[test]
    fn kfold_exact_divisibility() {
        let ds = synth_gaussians(8, 8, 2, 1.0, 3);
        let folds = stratified_kfold(&ds, 4, 9).unwrap();
        for (_, test) in &folds {
            let pos = test.iter().filter(|&&i| ds.y[i] > 0).count();
            assert_eq!(test.len(), 4);
            assert_eq!(pos, 2);
        }
    }

    #[test]
    fn kfold_imbalanced_proportions() {
        let ds = synth_gaussians(5, 15, 2, 1.0, 3);
        let folds = stratified_kfold(&ds, 5, 1).unwrap();
        for (_, test) in &folds {
            let pos = test.iter().filter(|&&i| ds.y[i] > 0).count();
            assert_eq!(pos, 1);
            assert_eq!(test.len() - pos, 3);
        }
    }

    #[test]
    fn kfold_partitions_indices() {
        let ds = synth_gaussians(7, 19, 2, 1.0, 5);
        let folds = stratified_kfold(&ds, 4, 2).unwrap();
        let mut seen = vec![false; ds.n()];
        for (train, test) in &folds {
            for &i in test {
                assert!(!seen[i], "test folds overlap");
                seen[i] = true;
            }
            assert_eq!(train.len() + test.len(), ds.n());
        }
        assert!(seen.into_iter().all(|s| s));
    }

    #[test]
    fn kfold_too_few_samples() {
        let ds = synth_gaussians(3, 20, 2, 1.0, 3);
        assert!(matches!(
            stratified_kfold(&ds, 5, 0),
            Err(Error::TooFewSamplesPerClass { count: 3, k: 5 })
        ));
    }

    #[test]
    fn noise_level_zero_is_identity() {
        let ds = synth_gaussians(4, 12, 3, 1.0, 8);
        let out = inject_noise(&ds, &NoiseSpec::new(0.0, 1).unwrap());
        for i in 0..ds.n() {
            for j in 0..ds.p() {
                assert_eq!(out.x[(i, j)].to_bits(), ds.x[(i, j)].to_bits());
            }
        }
    }

    #[test]
    fn noise_on_constant_features_is_identity() {
        let x = DMatrix::from_element(6, 2, 5.0);
        let ds = Dataset::new("c", x, vec![1, 1, 1, -1, -1, -1], vec!["a".into(), "b".into()]);
        let out = inject_noise(&ds, &NoiseSpec::new(1.0, 7).unwrap());
        for i in 0..ds.n() {
            for j in 0..ds.p() {
                assert_eq!(out.x[(i, j)], ds.x[(i, j)]);
            }
        }
    }

    #[test]
    fn noise_corrupts_exact_row_count() {
        let ds = synth_gaussians(20, 80, 4, 1.0, 11);
        let out = inject_noise(&ds, &NoiseSpec::new(0.2, 33).unwrap());
        let changed = (0..ds.n())
            .filter(|&i| (0..ds.p()).any(|j| out.x[(i, j)] != ds.x[(i, j)]))
            .count();
        assert_eq!(changed, 20);
    }

    #[test]
    fn noise_is_reproducible() {
        let ds = synth_gaussians(10, 30, 3, 1.0, 2);
        let spec = NoiseSpec::new(0.3, 99).unwrap();
        let a = inject_noise(&ds, &spec);
        let b = inject_noise(&ds, &spec);
        for i in 0..ds.n() {
            for j in 0..ds.p() {
                assert_eq!(a.x[(i, j)].to_bits(), b.x[(i, j)].to_bits());
            }
        }
    }

    #[test]
    fn synth_counts_and_ratio() {
        let ds = synth_gaussians(10, 90, 3, 2.0, 0);
        assert_eq!(ds.class_counts(), (10, 90));
        assert_eq!(imbalance_ratio(&ds).unwrap(), 9.0);
        let balanced = synth_gaussians(50, 50, 2, 1.0, 0);
        assert_eq!(imbalance_ratio(&balanced).unwrap(), 1.0);
    }

    #[test]
    fn single_class_ratio_rejected() {
        let x = DMatrix::zeros(3, 1);
        let ds = Dataset::new("s", x, vec![1, 1, 1], vec!["a".into()]);
        assert!(matches!(imbalance_ratio(&ds), Err(Error::SingleClass)));
    }

    #[test]
    fn normalizer_reuses_training_parameters_on_test_rows() {
        let ds = synth_gaussians(6, 10, 2, 1.0, 4);
        let (_, norm) = normalize(&ds);
        let mut row = vec![ds.x[(0, 0)], ds.x[(0, 1)]];
        norm.apply_row(&mut row);
        let scaled = norm.apply(&ds);
        assert_eq!(row[0], scaled.x[(0, 0)]);
        assert_eq!(row[1], scaled.x[(0, 1)]);
    }
}

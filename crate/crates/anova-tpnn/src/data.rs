//! Data ingestion, rank-based preprocessing, splitting and synthetic
//! benchmark generators.

use crate::error::{Error, Result};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::path::Path;

/// Columnar numeric data: an n x p feature matrix plus a target vector.
///
/// Targets are real-valued for regression or {0, 1} for binary
/// classification. Categorical features must be one-hot encoded upstream.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub features: Array2<f64>,
    pub target: Array1<f64>,
    pub feature_names: Vec<String>,
}

impl Dataset {
    pub fn new(features: Array2<f64>, target: Array1<f64>, feature_names: Vec<String>) -> Result<Self> {
        if target.len() != features.nrows() {
            return Err(Error::Data(format!(
                "target length {} does not match row count {}",
                target.len(),
                features.nrows()
            )));
        }
        if feature_names.len() != features.ncols() {
            return Err(Error::Data(format!(
                "{} feature names for {} columns",
                feature_names.len(),
                features.ncols()
            )));
        }
        if features.iter().any(|v| !v.is_finite()) || target.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("dataset contains non-finite values".into()));
        }
        Ok(Self {
            features,
            target,
            feature_names,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    /// True when every target is 0.0 or 1.0.
    pub fn is_binary_target(&self) -> bool {
        self.target.iter().all(|&y| y == 0.0 || y == 1.0)
    }

    fn take_rows(&self, idx: &[usize]) -> Dataset {
        let p = self.n_features();
        let mut feats = Array2::zeros((idx.len(), p));
        let mut tgt = Array1::zeros(idx.len());
        for (r, &i) in idx.iter().enumerate() {
            feats.row_mut(r).assign(&self.features.row(i));
            tgt[r] = self.target[i];
        }
        Dataset {
            features: feats,
            target: tgt,
            feature_names: self.feature_names.clone(),
        }
    }
}

/// Load an RFC-4180-style CSV (header required, '.' decimal separator).
/// The named target column is extracted; the remaining columns become
/// features in their original order.
pub fn load_csv(path: impl AsRef<Path>, target_column: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let path_str = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::Io {
                path: path_str.clone(),
                source: std::io::Error::new(std::io::ErrorKind::NotFound, e.to_string()),
            },
            _ => Error::Csv {
                path: path_str.clone(),
                message: e.to_string(),
            },
        })?;

    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Csv {
            path: path_str.clone(),
            message: e.to_string(),
        })?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();

    let target_idx = headers
        .iter()
        .position(|h| h == target_column)
        .ok_or_else(|| Error::TargetColumnNotFound(target_column.to_string()))?;

    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != target_idx)
        .map(|(_, h)| h.clone())
        .collect();

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut target: Vec<f64> = Vec::new();
    for (row_no, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Csv {
            path: path_str.clone(),
            message: e.to_string(),
        })?;
        if record.len() != headers.len() {
            return Err(Error::Csv {
                path: path_str.clone(),
                message: format!(
                    "row {} has {} fields, expected {}",
                    row_no + 1,
                    record.len(),
                    headers.len()
                ),
            });
        }
        let mut feats = Vec::with_capacity(headers.len() - 1);
        for (col, cell) in record.iter().enumerate() {
            let value: f64 = cell.trim().parse().map_err(|_| Error::BadCell {
                row: row_no + 1,
                column: headers[col].clone(),
                value: cell.to_string(),
            })?;
            if !value.is_finite() {
                return Err(Error::BadCell {
                    row: row_no + 1,
                    column: headers[col].clone(),
                    value: cell.to_string(),
                });
            }
            if col == target_idx {
                target.push(value);
            } else {
                feats.push(value);
            }
        }
        rows.push(feats);
    }

    let n = rows.len();
    let p = feature_names.len();
    let mut features = Array2::zeros((n, p));
    for (i, row) in rows.into_iter().enumerate() {
        for (j, v) in row.into_iter().enumerate() {
            features[(i, j)] = v;
        }
    }
    Dataset::new(features, Array1::from(target), feature_names)
}

/// One feature's monotone piecewise-linear rank map: sorted distinct
/// training values paired with their (tie-averaged) empirical CDF heights.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FeatureRankMap {
    /// (value, rank) knots; values strictly increasing, ranks non-decreasing.
    pub knots: Vec<(f64, f64)>,
}

impl FeatureRankMap {
    /// Evaluate the rank map at x: linear interpolation between knots,
    /// clamped to the boundary ranks outside the training range.
    pub fn apply(&self, x: f64) -> f64 {
        let knots = &self.knots;
        if knots.len() == 1 {
            return knots[0].1;
        }
        if x <= knots[0].0 {
            return knots[0].1;
        }
        if x >= knots[knots.len() - 1].0 {
            return knots[knots.len() - 1].1;
        }
        // binary search for the bracketing interval
        let mut lo = 0;
        let mut hi = knots.len() - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if knots[mid].0 <= x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (x0, r0) = knots[lo];
        let (x1, r1) = knots[hi];
        if x == x0 {
            return r0;
        }
        r0 + (r1 - r0) * (x - x0) / (x1 - x0)
    }

    /// Invert the rank map: find x with apply(x) = r, clamping outside
    /// the rank range. Used to express exported curves in raw units.
    pub fn invert(&self, r: f64) -> f64 {
        let knots = &self.knots;
        if knots.len() == 1 {
            return knots[0].0;
        }
        if r <= knots[0].1 {
            return knots[0].0;
        }
        if r >= knots[knots.len() - 1].1 {
            return knots[knots.len() - 1].0;
        }
        let mut lo = 0;
        let mut hi = knots.len() - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if knots[mid].1 <= r {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (x0, r0) = knots[lo];
        let (x1, r1) = knots[hi];
        if r1 == r0 {
            return x0;
        }
        x0 + (x1 - x0) * (r - r0) / (r1 - r0)
    }
}

/// Per-feature monotone rank maps to [0, 1], fitted on training data.
///
/// Applying a fitted transformer to its own training column yields values
/// whose empirical distribution is close to uniform on [0, 1]; out-of-range
/// inputs clamp to the boundary ranks.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct QuantileTransformer {
    pub maps: Vec<FeatureRankMap>,
    /// Names of features that were constant in training (mapped to 0.5).
    pub warnings: Vec<String>,
}

impl QuantileTransformer {
    /// Pass-through transformer on [0, 1]: each feature keeps its value,
    /// clamped to [0, 1]. Useful when inputs are already rank-scaled.
    pub fn identity(p: usize) -> Self {
        Self {
            maps: (0..p)
                .map(|_| FeatureRankMap {
                    knots: vec![(0.0, 0.0), (1.0, 1.0)],
                })
                .collect(),
            warnings: Vec::new(),
        }
    }

    pub fn n_features(&self) -> usize {
        self.maps.len()
    }

    /// Transform one row of raw features into [0, 1]^p.
    pub fn apply_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.maps.len() {
            return Err(Error::ArityMismatch {
                expected: self.maps.len(),
                got: row.len(),
            });
        }
        Ok(row
            .iter()
            .zip(self.maps.iter())
            .map(|(&x, m)| m.apply(x))
            .collect())
    }
}

/// Fit per-feature rank maps on training features.
///
/// Tied values share their average rank; a constant column maps to 0.5
/// and is reported in the transformer's warning list.
pub fn fit_quantile_transform(train_features: &Array2<f64>, feature_names: &[String]) -> Result<QuantileTransformer> {
    let n = train_features.nrows();
    if n < 2 {
        return Err(Error::Data("quantile transform needs at least 2 rows".into()));
    }
    let mut maps = Vec::with_capacity(train_features.ncols());
    let mut warnings = Vec::new();
    for j in 0..train_features.ncols() {
        let mut vals: Vec<f64> = train_features.column(j).to_vec();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // group ties: each distinct value gets the average of the ranks
        // i/(n-1) of its occurrences
        let mut knots: Vec<(f64, f64)> = Vec::new();
        let mut i = 0;
        while i < n {
            let v = vals[i];
            let mut k = i;
            while k < n && vals[k] == v {
                k += 1;
            }
            // positions i..k hold value v; mean rank of those positions
            let mean_rank = (i + k - 1) as f64 / 2.0 / (n - 1) as f64;
            knots.push((v, mean_rank));
            i = k;
        }
        if knots.len() == 1 {
            knots[0].1 = 0.5;
            let name = feature_names
                .get(j)
                .cloned()
                .unwrap_or_else(|| format!("feature {}", j + 1));
            warnings.push(format!("feature '{}' is constant; mapped to 0.5", name));
        }
        maps.push(FeatureRankMap { knots });
    }
    Ok(QuantileTransformer { maps, warnings })
}

/// Apply a fitted transformer to a feature matrix.
pub fn apply_transform(t: &QuantileTransformer, features: &Array2<f64>) -> Result<Array2<f64>> {
    if features.ncols() != t.n_features() {
        return Err(Error::ArityMismatch {
            expected: t.n_features(),
            got: features.ncols(),
        });
    }
    let mut out = Array2::zeros(features.raw_dim());
    for j in 0..features.ncols() {
        let map = &t.maps[j];
        for i in 0..features.nrows() {
            out[(i, j)] = map.apply(features[(i, j)]);
        }
    }
    Ok(out)
}

/// Which synthetic benchmark function to draw from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SyntheticKind {
    F1,
    F2,
    F3,
}

impl SyntheticKind {
    pub fn n_features(&self) -> usize {
        match self {
            SyntheticKind::F1 => 5,
            SyntheticKind::F2 | SyntheticKind::F3 => 10,
        }
    }

    /// Noiseless signal value at a feature vector.
    pub fn signal(&self, x: &[f64]) -> f64 {
        match self {
            SyntheticKind::F1 => {
                10.0 * x[0]
                    + 10.0 * x[1]
                    + 20.0 * (x[2] - 0.3) * (x[2] - 0.6)
                    + 20.0 * x[3]
                    + 5.0 * x[4]
                    + 10.0 * (std::f64::consts::PI * x[0] * x[1]).sin()
            }
            SyntheticKind::F2 => {
                std::f64::consts::PI.powf(x[0] * x[1]) * (2.0 * x[2]).sqrt() - x[3].asin()
                    + (x[2] + x[4]).ln()
                    - (x[8] / x[9]) * (x[6] / x[7]).sqrt()
                    - x[1] * x[6]
            }
            SyntheticKind::F3 => {
                // |x3|^(2|x4|) keeps the power term real for negative x3
                (x[0] - x[1]).abs().exp() + (x[1] * x[2]).abs()
                    - x[2].abs().powf(2.0 * x[3].abs())
                    + (x[3] * x[3] + x[4] * x[4] + x[6] * x[6] + x[7] * x[7]).ln()
                    + x[8]
                    + 1.0 / (1.0 + x[9] * x[9])
            }
        }
    }

    fn draw_features<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            SyntheticKind::F1 => (0..5).map(|_| rng.gen_range(0.0..1.0)).collect(),
            SyntheticKind::F2 => (0..10)
                .map(|j| match j {
                    3 | 4 | 7 | 9 => rng.gen_range(0.6..1.0),
                    _ => rng.gen_range(0.0..1.0),
                })
                .collect(),
            SyntheticKind::F3 => (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        }
    }

    /// Signal components up to order 2: every main effect and every feature
    /// pair that co-occurs in some term of the formula (0-based indices).
    pub fn signal_components(&self) -> BTreeSet<Vec<usize>> {
        let mut truth: BTreeSet<Vec<usize>> = BTreeSet::new();
        // terms written 1-based to mirror the formulas, shifted below
        let terms: &[&[usize]] = match self {
            // 10x1 + 10x2 + 20(x3-.3)(x3-.6) + 20x4 + 5x5 + 10sin(pi x1 x2)
            SyntheticKind::F1 => &[&[1], &[2], &[3], &[4], &[5], &[1, 2]],
            // pi^(x1 x2) sqrt(2 x3) - asin(x4) + ln(x3+x5)
            //   - (x9/x10) sqrt(x7/x8) - x2 x7
            SyntheticKind::F2 => &[&[1, 2, 3], &[4], &[3, 5], &[7, 8, 9, 10], &[2, 7]],
            // exp|x1-x2| + |x2 x3| - |x3|^(2|x4|)
            //   + ln(x4^2+x5^2+x7^2+x8^2) + x9 + 1/(1+x10^2)
            SyntheticKind::F3 => &[&[1, 2], &[2, 3], &[3, 4], &[4, 5, 7, 8], &[9], &[10]],
        };
        for term in terms {
            for (a, &fa) in term.iter().enumerate() {
                truth.insert(vec![fa - 1]);
                for &fb in &term[a + 1..] {
                    truth.insert(vec![fa.min(fb) - 1, fa.max(fb) - 1]);
                }
            }
        }
        truth
    }
}

/// Specification of one synthetic draw.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub n: usize,
    /// Signal-to-noise ratio (variance ratio); f64::INFINITY for noiseless.
    pub snr: f64,
    pub seed: u64,
}

/// A generated dataset together with its ground truth.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub dataset: Dataset,
    /// Noiseless signal per row.
    pub signal: Array1<f64>,
    /// Noise standard deviation used (0 for noiseless).
    pub sigma_eps: f64,
    /// True signal components up to order 2, 0-based.
    pub truth: BTreeSet<Vec<usize>>,
}

/// Draw a synthetic dataset. The noise variance is the empirical variance
/// of the noiseless signal divided by the requested SNR.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    if spec.n < 1 {
        return Err(Error::Config("synthetic n must be >= 1".into()));
    }
    if spec.snr.is_nan() || spec.snr <= 0.0 {
        return Err(Error::Config("synthetic snr must be > 0".into()));
    }
    let p = spec.kind.n_features();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut features = Array2::zeros((spec.n, p));
    let mut signal = Array1::zeros(spec.n);
    for i in 0..spec.n {
        let x = spec.kind.draw_features(&mut rng);
        signal[i] = spec.kind.signal(&x);
        for (j, v) in x.into_iter().enumerate() {
            features[(i, j)] = v;
        }
    }
    let mean = signal.sum() / spec.n as f64;
    let var = signal.iter().map(|&s| (s - mean) * (s - mean)).sum::<f64>() / spec.n as f64;
    let sigma_eps = if spec.snr.is_finite() {
        (var / spec.snr).sqrt()
    } else {
        0.0
    };
    let mut target = signal.clone();
    if sigma_eps > 0.0 {
        let normal = Normal::new(0.0, sigma_eps).map_err(|e| Error::Numeric(e.to_string()))?;
        for i in 0..spec.n {
            target[i] += normal.sample(&mut rng);
        }
    }
    let names = (1..=p).map(|j| format!("x{j}")).collect();
    Ok(SyntheticData {
        dataset: Dataset::new(features, target, names)?,
        signal,
        sigma_eps,
        truth: spec.kind.signal_components(),
    })
}

/// Split into train/validation/test by a seeded row permutation.
///
/// Sizes are floor-rounded from the ratios with the remainder assigned to
/// the training split.
pub fn split(d: &Dataset, ratios: (f64, f64, f64), seed: u64) -> Result<(Dataset, Dataset, Dataset)> {
    let (rt, rv, rs) = ratios;
    if rt <= 0.0 || rv <= 0.0 || rs <= 0.0 {
        return Err(Error::Config("split ratios must be positive".into()));
    }
    if ((rt + rv + rs) - 1.0).abs() > 1e-9 {
        return Err(Error::Config("split ratios must sum to 1".into()));
    }
    let n = d.n_rows();
    // epsilon guard so that e.g. 10 * 0.7 floors to 7
    let n_val = ((n as f64 * rv) + 1e-9).floor() as usize;
    let n_test = ((n as f64 * rs) + 1e-9).floor() as usize;
    let n_train_floor = ((n as f64 * rt) + 1e-9).floor() as usize;
    let n_train = n - n_val - n_test; // remainder goes to train
    debug_assert!(n_train >= n_train_floor);
    if n_train == 0 || n_val == 0 || n_test == 0 {
        return Err(Error::Data(format!(
            "split of {n} rows with ratios ({rt}, {rv}, {rs}) leaves an empty part"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Fisher-Yates
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        idx.swap(i, j);
    }
    let train = d.take_rows(&idx[..n_train]);
    let val = d.take_rows(&idx[n_train..n_train + n_val]);
    let test = d.take_rows(&idx[n_train + n_val..]);
    Ok((train, val, test))
}

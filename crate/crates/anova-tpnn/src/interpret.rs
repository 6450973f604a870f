//! Component-wise interpretation: SHAP attribution, importance scores,
//! stability across refits, purification and selection AUROC.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::AnovaTpnnModel;
use ndarray::Array2;
use serde::Serialize;
use std::collections::BTreeSet;
use std::sync::Arc;

/// Per-feature SHAP values of one input, on the link scale, together with
/// the per-component contributions they are assembled from.
///
/// For a sum-to-zero decomposition the SHAP value of feature j is exactly
/// the sum of f_S(x_S) / |S| over the components containing j, so the
/// attribution is read off the model with no sampling.
#[derive(Debug, Clone, Serialize)]
pub struct Attribution {
    pub beta0: f64,
    /// Per feature (model column order).
    pub shap: Vec<f64>,
    /// Per component (model component order): f_S(x_S).
    pub component_values: Vec<f64>,
    /// forward(x) = beta0 + sum of component values.
    pub prediction: f64,
}

/// Exact SHAP attribution for one raw input row.
pub fn anova_shap(model: &AnovaTpnnModel, x_raw: &[f64]) -> Result<Attribution> {
    let x01 = model.transformer.apply_row(x_raw)?;
    let p = model.n_features();
    let mut shap = vec![0.0; p];
    let mut component_values = Vec::with_capacity(model.components.len());
    let mut prediction = model.beta0;
    for (idx, comp) in model.components.iter().enumerate() {
        let v = model.eval_component_transformed(idx, &x01);
        component_values.push(v);
        prediction += v;
        let share = v / comp.order() as f64;
        for &j in &comp.features {
            shap[j] += share;
        }
    }
    Ok(Attribution {
        beta0: model.beta0,
        shap,
        component_values,
        prediction,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ImportanceEntry {
    /// 0-based feature indices of the component.
    pub features: Vec<usize>,
    /// Empirical L1 norm: mean |f_S| over the reference rows.
    pub raw: f64,
    /// raw / max(raw), or 0 when every score is 0.
    pub normalized: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ImportanceTable {
    pub entries: Vec<ImportanceEntry>,
}

impl ImportanceTable {
    /// Entries sorted by descending raw score (stable for ties).
    pub fn sorted_desc(&self) -> Vec<&ImportanceEntry> {
        let mut v: Vec<&ImportanceEntry> = self.entries.iter().collect();
        v.sort_by(|a, b| b.raw.partial_cmp(&a.raw).unwrap());
        v
    }

    /// CSV rendering with columns component, raw, normalized; features are
    /// 1-based and joined with ':'.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("component,raw,normalized\n");
        for e in &self.entries {
            let name = e
                .features
                .iter()
                .map(|j| (j + 1).to_string())
                .collect::<Vec<_>>()
                .join(":");
            out.push_str(&format!("{},{},{}\n", name, e.raw, e.normalized));
        }
        out
    }
}

/// Importance of every component as the empirical mean of |f_S| over the
/// reference rows (raw features).
pub fn importance_scores(model: &AnovaTpnnModel, reference: &Array2<f64>) -> Result<ImportanceTable> {
    if reference.nrows() == 0 {
        return Err(Error::Data("importance needs a non-empty reference set".into()));
    }
    let x01 = crate::data::apply_transform(&model.transformer, reference)?;
    let xs = x01.as_slice().expect("standard layout");
    let p = x01.ncols();
    let n = x01.nrows();
    let mut raws = vec![0.0; model.components.len()];
    for i in 0..n {
        let row = &xs[i * p..(i + 1) * p];
        for (idx, raw) in raws.iter_mut().enumerate() {
            *raw += model.eval_component_transformed(idx, row).abs();
        }
    }
    for raw in raws.iter_mut() {
        *raw /= n as f64;
    }
    let max = raws.iter().cloned().fold(0.0, f64::max);
    let entries = model
        .components
        .iter()
        .zip(raws.iter())
        .map(|(c, &raw)| ImportanceEntry {
            features: c.features.clone(),
            raw,
            normalized: if max > 0.0 { raw / max } else { 0.0 },
        })
        .collect();
    Ok(ImportanceTable { entries })
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityEntry {
    pub features: Vec<usize>,
    pub sc: f64,
}

/// Across-refit stability: for each component, the mean over evaluation
/// points of (spread across runs) / (magnitude across runs). Zero means
/// the runs agree exactly.
#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub per_component: Vec<StabilityEntry>,
    /// Mean of the per-component scores (the default overall score).
    pub overall: f64,
    /// Alternative aggregate: sum of SC(f_S) / |S|.
    pub overall_cardinality_weighted: f64,
    pub n_runs: usize,
    pub n_points: usize,
}

/// Denominators below this are treated as 0/0 and skipped.
const SC_DENOM_FLOOR: f64 = 1e-24;

/// Stability score over m >= 2 fitted models sharing component structure,
/// evaluated at fixed raw input rows.
pub fn stability_score(runs: &[AnovaTpnnModel], eval_rows: &Array2<f64>) -> Result<StabilityReport> {
    if runs.len() < 2 {
        return Err(Error::Config("stability needs at least 2 runs".into()));
    }
    if eval_rows.nrows() == 0 {
        return Err(Error::Data("stability needs evaluation rows".into()));
    }
    let structure: Vec<Vec<usize>> = runs[0].components.iter().map(|c| c.features.clone()).collect();
    for run in &runs[1..] {
        let other: Vec<Vec<usize>> = run.components.iter().map(|c| c.features.clone()).collect();
        if other != structure {
            return Err(Error::Data("runs have mismatched component structures".into()));
        }
    }
    let n = eval_rows.nrows();
    let m = runs.len();
    // values[run][component][point]
    let mut values = vec![vec![vec![0.0; n]; structure.len()]; m];
    for (ri, run) in runs.iter().enumerate() {
        let x01 = crate::data::apply_transform(&run.transformer, eval_rows)?;
        let xs = x01.as_slice().expect("standard layout");
        let p = x01.ncols();
        for i in 0..n {
            let row = &xs[i * p..(i + 1) * p];
            for ci in 0..structure.len() {
                values[ri][ci][i] = run.eval_component_transformed(ci, row);
            }
        }
    }
    let mut per_component = Vec::with_capacity(structure.len());
    for (ci, features) in structure.iter().enumerate() {
        let mut acc = 0.0;
        let mut used = 0usize;
        for i in 0..n {
            let mut mean = 0.0;
            let mut denom = 0.0;
            let first = values[0][ci][i];
            let mut all_equal = true;
            for run_vals in values.iter() {
                let v = run_vals[ci][i];
                mean += v;
                denom += v * v;
                all_equal &= v == first;
            }
            mean /= m as f64;
            if denom < SC_DENOM_FLOOR {
                continue;
            }
            used += 1;
            if all_equal {
                // spread is exactly zero when every run agrees bitwise
                continue;
            }
            let num: f64 = values.iter().map(|rv| (rv[ci][i] - mean) * (rv[ci][i] - mean)).sum();
            acc += num / denom;
        }
        let sc = if used > 0 { acc / used as f64 } else { 0.0 };
        per_component.push(StabilityEntry {
            features: features.clone(),
            sc,
        });
    }
    let overall = per_component.iter().map(|e| e.sc).sum::<f64>() / per_component.len() as f64;
    let overall_cardinality_weighted = per_component
        .iter()
        .map(|e| e.sc / e.features.len() as f64)
        .sum();
    Ok(StabilityReport {
        per_component,
        overall,
        overall_cardinality_weighted,
        n_runs: m,
        n_points: n,
    })
}

// --- purification ---

type EvalFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// One evaluable component of an additive decomposition. The closure
/// receives the values of exactly the features in `features`, in order.
#[derive(Clone)]
pub struct ComponentFn {
    /// Sorted 0-based feature indices.
    pub features: Vec<usize>,
    pub eval: EvalFn,
}

impl ComponentFn {
    pub fn new(mut features: Vec<usize>, eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        features.sort_unstable();
        Self {
            features,
            eval: Arc::new(eval),
        }
    }

    pub fn value(&self, x_subset: &[f64]) -> f64 {
        (self.eval)(x_subset)
    }
}

impl std::fmt::Debug for ComponentFn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ComponentFn").field("features", &self.features).finish()
    }
}

/// An additive decomposition: intercept plus evaluable components.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub beta0: f64,
    pub components: Vec<ComponentFn>,
}

impl Decomposition {
    /// Evaluate the whole function at a full input row.
    pub fn total(&self, x: &[f64]) -> f64 {
        let mut out = self.beta0;
        let mut buf = Vec::new();
        for c in &self.components {
            buf.clear();
            buf.extend(c.features.iter().map(|&j| x[j]));
            out += c.value(&buf);
        }
        out
    }

    pub fn component(&self, features: &[usize]) -> Option<&ComponentFn> {
        let mut s = features.to_vec();
        s.sort_unstable();
        self.components.iter().find(|c| c.features == s)
    }
}

/// Integration nodes per axis for the purification means.
#[derive(Debug, Clone)]
pub enum Quadrature {
    /// Uniform measure on [0, 1]: midpoint nodes (i + 0.5) / points.
    Grid { points: usize },
    /// Empirical product measure: each axis uses its column of the rows.
    Rows { data: Arc<Array2<f64>> },
}

impl Quadrature {
    fn nodes(&self, feature: usize) -> Result<Vec<f64>> {
        match self {
            Quadrature::Grid { points } => {
                if *points == 0 {
                    return Err(Error::Config("quadrature grid needs points".into()));
                }
                Ok((0..*points).map(|i| (i as f64 + 0.5) / *points as f64).collect())
            }
            Quadrature::Rows { data } => {
                if data.nrows() == 0 {
                    return Err(Error::Data("empty quadrature rows".into()));
                }
                if feature >= data.ncols() {
                    return Err(Error::Data(format!(
                        "quadrature rows lack feature {}",
                        feature + 1
                    )));
                }
                Ok(data.column(feature).to_vec())
            }
        }
    }
}

pub const DEFAULT_PURIFY_GRID: usize = 201;

fn mean_over(eval: &EvalFn, fixed_first: bool, fixed: f64, nodes: &[f64]) -> f64 {
    let mut acc = 0.0;
    let mut buf = [0.0; 2];
    for &v in nodes {
        if fixed_first {
            buf[0] = fixed;
            buf[1] = v;
        } else {
            buf[0] = v;
            buf[1] = fixed;
        }
        acc += eval(&buf);
    }
    acc / nodes.len() as f64
}

/// Transform an arbitrary additive decomposition of order <= 2 into the
/// sum-to-zero one, preserving the total function pointwise.
///
/// Processes pairs first: each single-axis conditional mean is subtracted
/// and pushed into the matching main effect (created if absent) and the
/// full mean is pushed into the intercept. Mains are then centered into
/// the intercept. All means are taken under the given quadrature.
pub fn purify(input: &Decomposition, quad: &Quadrature) -> Result<Decomposition> {
    if let Some(c) = input.components.iter().find(|c| c.features.len() > 2) {
        return Err(Error::Config(format!(
            "purification implemented for order <= 2, got component of order {}",
            c.features.len()
        )));
    }
    if input.components.is_empty() {
        return Ok(input.clone());
    }
    let mut beta0 = input.beta0;
    // working main effects keyed by feature; additions stack as closures
    let mut mains: Vec<(usize, EvalFn)> = Vec::new();
    let mut main_order: Vec<usize> = Vec::new();
    for c in &input.components {
        if c.features.len() == 1 {
            let j = c.features[0];
            if mains.iter().any(|(f, _)| *f == j) {
                return Err(Error::Config(format!("duplicate main effect {}", j + 1)));
            }
            mains.push((j, c.eval.clone()));
            main_order.push(j);
        }
    }
    let mut pairs_out: Vec<ComponentFn> = Vec::new();

    for c in &input.components {
        if c.features.len() != 2 {
            continue;
        }
        let (a, b) = (c.features[0], c.features[1]);
        if pairs_out.iter().any(|p| p.features == c.features) {
            return Err(Error::Config(format!(
                "duplicate pair component {}:{}",
                a + 1,
                b + 1
            )));
        }
        let nodes_a = quad.nodes(a)?;
        let nodes_b = quad.nodes(b)?;
        let eval = c.eval.clone();

        // full mean over both axes
        let mut m = 0.0;
        {
            let mut buf = [0.0; 2];
            for &u in &nodes_a {
                for &v in &nodes_b {
                    buf[0] = u;
                    buf[1] = v;
                    m += (eval)(&buf);
                }
            }
            m /= (nodes_a.len() * nodes_b.len()) as f64;
        }

        // conditional means as evaluable closures
        let g_a: EvalFn = {
            let eval = eval.clone();
            let nodes_b = nodes_b.clone();
            Arc::new(move |x: &[f64]| mean_over(&eval, true, x[0], &nodes_b))
        };
        let g_b: EvalFn = {
            let eval = eval.clone();
            let nodes_a = nodes_a.clone();
            Arc::new(move |x: &[f64]| mean_over(&eval, false, x[0], &nodes_a))
        };

        // purified pair: f - g_a - g_b + m
        let purified: EvalFn = {
            let eval = eval.clone();
            let g_a = g_a.clone();
            let g_b = g_b.clone();
            Arc::new(move |x: &[f64]| {
                (eval)(x) - (g_a)(&x[..1]) - (g_b)(&x[1..]) + m
            })
        };
        pairs_out.push(ComponentFn {
            features: vec![a, b],
            eval: purified,
        });

        // push the conditional means down, the full mean into the intercept
        beta0 -= m;
        for (j, g) in [(a, g_a), (b, g_b)] {
            if let Some((_, existing)) = mains.iter_mut().find(|(f, _)| *f == j) {
                let prev = existing.clone();
                *existing = Arc::new(move |x: &[f64]| (prev)(x) + (g)(x));
            } else {
                mains.push((j, g));
                main_order.push(j);
            }
        }
    }

    // center every main effect into the intercept
    let mut mains_out: Vec<ComponentFn> = Vec::new();
    for &j in &main_order {
        let (_, eval) = mains.iter().find(|(f, _)| *f == j).unwrap();
        let nodes = quad.nodes(j)?;
        let mut h = 0.0;
        for &v in &nodes {
            h += (eval)(&[v]);
        }
        h /= nodes.len() as f64;
        beta0 += h;
        let eval = eval.clone();
        mains_out.push(ComponentFn {
            features: vec![j],
            eval: Arc::new(move |x: &[f64]| (eval)(x) - h),
        });
    }

    // preserve the input component order; created mains go at the end
    let mut components = Vec::with_capacity(pairs_out.len() + mains_out.len());
    for c in &input.components {
        match c.features.len() {
            1 => {
                let pos = mains_out
                    .iter()
                    .position(|mo| mo.features == c.features)
                    .unwrap();
                components.push(mains_out.remove(pos));
            }
            2 => {
                let pos = pairs_out
                    .iter()
                    .position(|po| po.features == c.features)
                    .unwrap();
                components.push(pairs_out.remove(pos));
            }
            _ => unreachable!(),
        }
    }
    components.extend(mains_out); // created mains
    Ok(Decomposition { beta0, components })
}

/// View a fitted model as an evaluable decomposition on the transformed
/// [0, 1] scale, suitable for `purify`.
pub fn decomposition_of_model(model: &AnovaTpnnModel) -> Decomposition {
    let model = Arc::new(model.clone());
    let p = model.n_features();
    let components = model
        .components
        .iter()
        .enumerate()
        .map(|(idx, c)| {
            let features = c.features.clone();
            let m = model.clone();
            let feats = features.clone();
            ComponentFn {
                features,
                eval: Arc::new(move |xs: &[f64]| {
                    let mut row = vec![0.0; p];
                    for (pos, &j) in feats.iter().enumerate() {
                        row[j] = xs[pos];
                    }
                    m.eval_component_transformed(idx, &row)
                }),
            }
        })
        .collect();
    Decomposition {
        beta0: model.beta0,
        components,
    }
}

// --- selection AUROC ---

/// Rank-based AUROC (Mann-Whitney) of importance scores against a truth
/// set of signal components; ties count one half.
pub fn selection_auroc(scores: &ImportanceTable, truth: &BTreeSet<Vec<usize>>) -> Result<f64> {
    let mut labeled: Vec<(f64, bool)> = scores
        .entries
        .iter()
        .map(|e| (e.raw, truth.contains(&e.features)))
        .collect();
    let n_pos = labeled.iter().filter(|(_, t)| *t).count();
    let n_neg = labeled.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Data("selection truth must contain both classes".into()));
    }
    labeled.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    // average ranks over tie groups
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < labeled.len() {
        let mut k = i;
        while k < labeled.len() && labeled[k].0 == labeled[i].0 {
            k += 1;
        }
        let avg_rank = (i + 1 + k) as f64 / 2.0; // ranks are 1-based
        for item in &labeled[i..k] {
            if item.1 {
                rank_sum_pos += avg_rank;
            }
        }
        i = k;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Convenience wrapper: importance on a dataset's rows.
pub fn importance_on_dataset(model: &AnovaTpnnModel, data: &Dataset) -> Result<ImportanceTable> {
    importance_scores(model, &data.features)
}

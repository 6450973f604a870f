//! Model assembly, evaluation and persistence.
//!
//! An `AnovaTpnnModel` is an intercept plus a set of components, one per
//! feature subset S. Each component is a linear combination of K_S
//! tensor-product basis functions; every basis function integrates to zero
//! along each of its axes, so the fitted decomposition is the unique
//! sum-to-zero one.
//!
//! Feature indices are 0-based inside the library; the JSON model file and
//! the CLI use 1-based indices.

use crate::basis::{softplus, softplus_inv, BasisEval, BasisParam, TensorTheta, GAMMA_MIN};
use crate::data::QuantileTransformer;
use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

pub const SCHEMA_VERSION: u32 = 1;

/// Monotonicity directive for a main-effect component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Monotonicity {
    #[serde(rename = "none")]
    None,
    #[serde(rename = "inc")]
    Increasing,
    #[serde(rename = "dec")]
    Decreasing,
}

/// Link function between the model sum and the conditional mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Link {
    #[serde(rename = "identity")]
    Identity,
    #[serde(rename = "logit")]
    Logit,
}

/// Basis ownership: each component owns its basis parameters, or all
/// components of equal cardinality share one bank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BasisMode {
    #[serde(rename = "independent")]
    Independent,
    #[serde(rename = "nbm-shared")]
    NbmShared,
}

/// Map a raw stored coefficient to the effective one.
///
/// Every basis function is non-increasing in x, so forcing coefficients
/// non-positive yields a non-decreasing main effect and vice versa.
#[inline]
pub fn effective_beta(raw: f64, monotone: Monotonicity) -> f64 {
    match monotone {
        Monotonicity::None => raw,
        Monotonicity::Increasing => -softplus(raw),
        Monotonicity::Decreasing => softplus(raw),
    }
}

/// Derivative of the effective coefficient w.r.t. the raw one.
#[inline]
pub fn effective_beta_grad(raw: f64, monotone: Monotonicity) -> f64 {
    match monotone {
        Monotonicity::None => 1.0,
        Monotonicity::Increasing => -crate::basis::sigmoid(raw),
        Monotonicity::Decreasing => crate::basis::sigmoid(raw),
    }
}

/// One component of the decomposition: a feature subset S with K_S basis
/// functions. `betas` holds the raw learnable coefficients; for monotone
/// components the effective coefficient is a softplus image of the raw one.
/// In NBM-shared mode `thetas` is empty and the model-level bank is used.
#[derive(Debug, Clone)]
pub struct Component {
    /// Sorted, 0-based feature indices.
    pub features: Vec<usize>,
    pub betas: Vec<f64>,
    pub thetas: Vec<TensorTheta>,
    pub monotone: Monotonicity,
}

impl Component {
    pub fn order(&self) -> usize {
        self.features.len()
    }

    pub fn basis_count(&self) -> usize {
        self.betas.len()
    }
}

/// Which components to build.
#[derive(Debug, Clone)]
pub enum ComponentSpec {
    /// All subsets of cardinality 1..=d.
    AllUpToOrder,
    /// An explicit list of feature subsets (0-based).
    Explicit(Vec<Vec<usize>>),
}

/// Basis counts per interaction order (1-based order -> K).
#[derive(Debug, Clone)]
pub struct BasisCounts {
    pub default: usize,
    pub per_order: BTreeMap<usize, usize>,
}

impl BasisCounts {
    pub fn uniform(k: usize) -> Self {
        Self {
            default: k,
            per_order: BTreeMap::new(),
        }
    }

    pub fn for_order(&self, order: usize) -> usize {
        *self.per_order.get(&order).unwrap_or(&self.default)
    }
}

#[derive(Debug, Clone)]
pub struct AnovaTpnnModel {
    pub beta0: f64,
    pub link: Link,
    pub mode: BasisMode,
    /// Maximum interaction order d.
    pub order: usize,
    pub components: Vec<Component>,
    /// NBM-shared basis banks keyed by component cardinality.
    pub shared_thetas: BTreeMap<usize, Vec<BasisParam>>,
    pub transformer: QuantileTransformer,
    pub feature_names: Vec<String>,
}

/// Initial bandwidth on the transformed scale.
const INIT_GAMMA: f64 = 0.1;
const INIT_BETA_SCALE: f64 = 0.01;

/// Build an initialized model.
///
/// Locations are spread uniformly over [0, 1], bandwidths start at 0.1 and
/// coefficients start near zero; everything is deterministic per seed. The
/// intercept is set from the training target when training starts.
pub fn build_model(
    p: usize,
    d: usize,
    spec: &ComponentSpec,
    k: &BasisCounts,
    mode: BasisMode,
    link: Link,
    seed: u64,
) -> Result<AnovaTpnnModel> {
    if p == 0 {
        return Err(Error::Config("feature count must be positive".into()));
    }
    if d == 0 {
        return Err(Error::Config("interaction order must be >= 1".into()));
    }
    let subsets: Vec<Vec<usize>> = match spec {
        ComponentSpec::AllUpToOrder => all_subsets_up_to(p, d),
        ComponentSpec::Explicit(list) => {
            if list.is_empty() {
                return Err(Error::Config("component list is empty".into()));
            }
            let mut seen: BTreeSet<Vec<usize>> = BTreeSet::new();
            let mut out = Vec::with_capacity(list.len());
            for s in list {
                let mut s = s.clone();
                s.sort_unstable();
                s.dedup();
                if s.is_empty() {
                    return Err(Error::Config("component with empty feature set".into()));
                }
                if s.len() > d {
                    return Err(Error::Config(format!(
                        "component {:?} exceeds interaction order {}",
                        one_based(&s),
                        d
                    )));
                }
                if let Some(&max) = s.last() {
                    if max >= p {
                        return Err(Error::Config(format!(
                            "component {:?} references feature beyond p={}",
                            one_based(&s),
                            p
                        )));
                    }
                }
                if !seen.insert(s.clone()) {
                    return Err(Error::Config(format!(
                        "duplicate component {:?}",
                        one_based(&s)
                    )));
                }
                out.push(s);
            }
            out
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rho0 = softplus_inv(INIT_GAMMA - GAMMA_MIN);

    let mut components = Vec::with_capacity(subsets.len());
    let mut shared: BTreeMap<usize, Vec<BasisParam>> = BTreeMap::new();
    for s in &subsets {
        let k_s = k.for_order(s.len());
        if k_s == 0 {
            return Err(Error::Config("basis count must be >= 1".into()));
        }
        let betas = (0..k_s)
            .map(|_| rng.gen_range(-INIT_BETA_SCALE..INIT_BETA_SCALE))
            .collect();
        let thetas = match mode {
            BasisMode::Independent => (0..k_s)
                .map(|_| {
                    s.iter()
                        .map(|_| BasisParam::new(rng.gen_range(0.0..1.0), rho0))
                        .collect()
                })
                .collect(),
            BasisMode::NbmShared => Vec::new(),
        };
        components.push(Component {
            features: s.clone(),
            betas,
            thetas,
            monotone: Monotonicity::None,
        });
    }
    if mode == BasisMode::NbmShared {
        let mut cards: BTreeSet<usize> = subsets.iter().map(|s| s.len()).collect();
        for card in std::mem::take(&mut cards) {
            let k_s = k.for_order(card);
            let bank = (0..k_s)
                .map(|_| BasisParam::new(rng.gen_range(0.0..1.0), rho0))
                .collect();
            shared.insert(card, bank);
        }
    }

    Ok(AnovaTpnnModel {
        beta0: 0.0,
        link,
        mode,
        order: d,
        components,
        shared_thetas: shared,
        transformer: QuantileTransformer::identity(p),
        feature_names: (1..=p).map(|j| format!("x{j}")).collect(),
    })
}

fn all_subsets_up_to(p: usize, d: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = (0..p).map(|j| vec![j]).collect();
    if d >= 2 {
        for a in 0..p {
            for b in (a + 1)..p {
                out.push(vec![a, b]);
            }
        }
    }
    // orders beyond 2 are allowed but enumerate quickly only when asked
    for card in 3..=d.min(p) {
        let mut stack = vec![(Vec::<usize>::new(), 0usize)];
        while let Some((cur, start)) = stack.pop() {
            if cur.len() == card {
                out.push(cur);
                continue;
            }
            for j in start..p {
                let mut next = cur.clone();
                next.push(j);
                stack.push((next, j + 1));
            }
        }
    }
    out
}

fn one_based(s: &[usize]) -> Vec<usize> {
    s.iter().map(|&j| j + 1).collect()
}

impl AnovaTpnnModel {
    pub fn n_features(&self) -> usize {
        self.transformer.n_features()
    }

    /// Basis parameters backing basis k of a component: owned in
    /// independent mode, replicated from the cardinality bank in shared mode.
    #[inline]
    pub fn theta_for(&self, comp: &Component, k: usize, j_in_s: usize) -> BasisParam {
        match self.mode {
            BasisMode::Independent => comp.thetas[k][j_in_s],
            BasisMode::NbmShared => self.shared_thetas[&comp.order()][k],
        }
    }

    /// Total number of learnable scalars.
    pub fn param_count(&self) -> usize {
        let mut count = 1; // beta0
        for c in &self.components {
            count += c.basis_count();
            if self.mode == BasisMode::Independent {
                count += c.basis_count() * c.order() * 2;
            }
        }
        if self.mode == BasisMode::NbmShared {
            count += self.shared_thetas.values().map(|bank| bank.len() * 2).sum::<usize>();
        }
        count
    }

    /// Evaluate one component at an already-transformed input row.
    pub fn eval_component_transformed(&self, comp_idx: usize, x01: &[f64]) -> f64 {
        let comp = &self.components[comp_idx];
        let mut sum = 0.0;
        for k in 0..comp.basis_count() {
            let mut prod = 1.0;
            for (j_in_s, &j) in comp.features.iter().enumerate() {
                let theta = self.theta_for(comp, k, j_in_s);
                prod *= BasisEval::new(&theta).value(x01[j]);
            }
            sum += effective_beta(comp.betas[k], comp.monotone) * prod;
        }
        sum
    }

    /// Model sum at an already-transformed input row (link scale).
    pub fn forward_transformed(&self, x01: &[f64]) -> f64 {
        let mut out = self.beta0;
        for idx in 0..self.components.len() {
            out += self.eval_component_transformed(idx, x01);
        }
        out
    }

    /// Model output at a raw input row (link scale). Applies the stored
    /// rank transform first.
    pub fn forward(&self, x_raw: &[f64]) -> Result<f64> {
        let x01 = self.transformer.apply_row(x_raw)?;
        Ok(self.forward_transformed(&x01))
    }

    /// Predicted response: identity link returns the sum, logit link the
    /// probability sigmoid(sum).
    pub fn predict_response(&self, x_raw: &[f64]) -> Result<f64> {
        let f = self.forward(x_raw)?;
        Ok(match self.link {
            Link::Identity => f,
            Link::Logit => crate::basis::sigmoid(f),
        })
    }

    /// Find a component by its (0-based) feature subset.
    pub fn component_index(&self, features: &[usize]) -> Option<usize> {
        let mut s = features.to_vec();
        s.sort_unstable();
        self.components.iter().position(|c| c.features == s)
    }

    /// Evaluate the component for subset `features` (0-based) at a raw row.
    pub fn eval_component(&self, features: &[usize], x_raw: &[f64]) -> Result<f64> {
        let idx = self
            .component_index(features)
            .ok_or_else(|| Error::Data(format!("unknown component {:?}", one_based(features))))?;
        let x01 = self.transformer.apply_row(x_raw)?;
        Ok(self.eval_component_transformed(idx, &x01))
    }

    /// Apply a monotonicity directive to the main-effect component of
    /// feature `j` (0-based), reparameterizing its coefficients so the
    /// constraint holds by construction.
    pub fn enforce_monotone(&mut self, features: &[usize], direction: Monotonicity) -> Result<()> {
        if features.len() != 1 {
            return Err(Error::Config(
                "monotone requires main effect (single-feature component)".into(),
            ));
        }
        let idx = self
            .component_index(features)
            .ok_or_else(|| Error::Config(format!("no component {:?} to constrain", one_based(features))))?;
        let comp = &mut self.components[idx];
        if comp.monotone == direction {
            return Ok(());
        }
        if direction == Monotonicity::None {
            for b in comp.betas.iter_mut() {
                *b = effective_beta(*b, comp.monotone);
            }
        } else {
            // raw w with softplus(w) = |effective beta|, floored away from 0
            for b in comp.betas.iter_mut() {
                let eff = effective_beta(*b, comp.monotone);
                *b = softplus_inv(eff.abs().max(1e-3));
            }
        }
        comp.monotone = direction;
        Ok(())
    }
}

// --- persistence (versioned JSON with checksum) ---

#[derive(Serialize, Deserialize)]
struct ThetaEntryDoc {
    /// 1-based feature index.
    feature: usize,
    b: f64,
    rho: f64,
}

#[derive(Serialize, Deserialize)]
struct ComponentDoc {
    /// 1-based feature indices.
    #[serde(rename = "S")]
    s: Vec<usize>,
    #[serde(rename = "K")]
    k: usize,
    beta: Vec<f64>,
    monotone: Monotonicity,
    /// Flat list grouped per basis: k-major, |S| entries per basis.
    theta: Vec<ThetaEntryDoc>,
}

#[derive(Serialize, Deserialize)]
struct SharedEntryDoc {
    b: f64,
    rho: f64,
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    link: Link,
    mode: BasisMode,
    d: usize,
    beta0: f64,
    feature_names: Vec<String>,
    transformer: QuantileTransformer,
    components: Vec<ComponentDoc>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    shared_theta: BTreeMap<String, Vec<SharedEntryDoc>>,
}

#[derive(Serialize, Deserialize)]
struct ModelFileDoc {
    schema: u32,
    checksum: String,
    #[serde(flatten)]
    model: ModelDoc,
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

fn to_doc(m: &AnovaTpnnModel) -> ModelDoc {
    let components = m
        .components
        .iter()
        .map(|c| {
            let mut theta = Vec::new();
            if m.mode == BasisMode::Independent {
                for k in 0..c.basis_count() {
                    for (j_in_s, &j) in c.features.iter().enumerate() {
                        let p = c.thetas[k][j_in_s];
                        theta.push(ThetaEntryDoc {
                            feature: j + 1,
                            b: p.b,
                            rho: p.rho,
                        });
                    }
                }
            }
            ComponentDoc {
                s: one_based(&c.features),
                k: c.basis_count(),
                beta: c.betas.clone(),
                monotone: c.monotone,
                theta,
            }
        })
        .collect();
    let shared_theta = m
        .shared_thetas
        .iter()
        .map(|(card, bank)| {
            (
                card.to_string(),
                bank.iter()
                    .map(|p| SharedEntryDoc { b: p.b, rho: p.rho })
                    .collect(),
            )
        })
        .collect();
    ModelDoc {
        link: m.link,
        mode: m.mode,
        d: m.order,
        beta0: m.beta0,
        feature_names: m.feature_names.clone(),
        transformer: m.transformer.clone(),
        components,
        shared_theta,
    }
}

fn from_doc(doc: ModelDoc) -> Result<AnovaTpnnModel> {
    let p = doc.transformer.n_features();
    let mut components = Vec::with_capacity(doc.components.len());
    for cd in doc.components {
        if cd.beta.len() != cd.k {
            return Err(Error::ModelFile(format!(
                "component {:?}: {} coefficients for K={}",
                cd.s,
                cd.beta.len(),
                cd.k
            )));
        }
        let features: Vec<usize> = cd
            .s
            .iter()
            .map(|&j| {
                if j == 0 || j > p {
                    Err(Error::ModelFile(format!("feature index {j} out of range")))
                } else {
                    Ok(j - 1)
                }
            })
            .collect::<Result<_>>()?;
        let thetas = match doc.mode {
            BasisMode::Independent => {
                if cd.theta.len() != cd.k * features.len() {
                    return Err(Error::ModelFile(format!(
                        "component {:?}: {} theta entries, expected {}",
                        cd.s,
                        cd.theta.len(),
                        cd.k * features.len()
                    )));
                }
                cd.theta
                    .chunks(features.len())
                    .map(|chunk| {
                        chunk
                            .iter()
                            .zip(features.iter())
                            .map(|(e, &j)| {
                                if e.feature != j + 1 {
                                    Err(Error::ModelFile(format!(
                                        "theta feature {} does not match component {:?}",
                                        e.feature, cd.s
                                    )))
                                } else {
                                    Ok(BasisParam::new(e.b, e.rho))
                                }
                            })
                            .collect::<Result<TensorTheta>>()
                    })
                    .collect::<Result<Vec<_>>>()?
            }
            BasisMode::NbmShared => Vec::new(),
        };
        components.push(Component {
            features,
            betas: cd.beta,
            thetas,
            monotone: cd.monotone,
        });
    }
    let mut shared_thetas = BTreeMap::new();
    for (card, bank) in doc.shared_theta {
        let card: usize = card
            .parse()
            .map_err(|_| Error::ModelFile(format!("bad cardinality key '{card}'")))?;
        shared_thetas.insert(
            card,
            bank.into_iter().map(|e| BasisParam::new(e.b, e.rho)).collect(),
        );
    }
    Ok(AnovaTpnnModel {
        beta0: doc.beta0,
        link: doc.link,
        mode: doc.mode,
        order: doc.d,
        components,
        shared_thetas,
        transformer: doc.transformer,
        feature_names: doc.feature_names,
    })
}

/// Serialize the model to its JSON document (schema 1, with checksum).
pub fn model_to_json(m: &AnovaTpnnModel) -> Result<String> {
    let doc = to_doc(m);
    let payload = serde_json::to_string(&doc).map_err(|e| Error::ModelFile(e.to_string()))?;
    let file = ModelFileDoc {
        schema: SCHEMA_VERSION,
        checksum: format!("{:016x}", fnv1a64(payload.as_bytes())),
        model: doc,
    };
    serde_json::to_string_pretty(&file).map_err(|e| Error::ModelFile(e.to_string()))
}

/// Parse a model from its JSON document, verifying schema and checksum.
pub fn model_from_json(text: &str) -> Result<AnovaTpnnModel> {
    let file: ModelFileDoc =
        serde_json::from_str(text).map_err(|e| Error::ModelFile(e.to_string()))?;
    if file.schema != SCHEMA_VERSION {
        return Err(Error::SchemaVersion {
            found: file.schema,
            expected: SCHEMA_VERSION,
        });
    }
    let payload = serde_json::to_string(&file.model).map_err(|e| Error::ModelFile(e.to_string()))?;
    let checksum = format!("{:016x}", fnv1a64(payload.as_bytes()));
    if checksum != file.checksum {
        return Err(Error::ChecksumMismatch);
    }
    from_doc(file.model)
}

pub fn save_model(m: &AnovaTpnnModel, path: impl AsRef<Path>) -> Result<()> {
    let text = model_to_json(m)?;
    std::fs::write(path.as_ref(), text).map_err(|e| Error::Io {
        path: path.as_ref().display().to_string(),
        source: e,
    })
}

pub fn load_model(path: impl AsRef<Path>) -> Result<AnovaTpnnModel> {
    let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::Io {
        path: path.as_ref().display().to_string(),
        source: e,
    })?;
    model_from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_model(seed: u64) -> AnovaTpnnModel {
        build_model(
            3,
            2,
            &ComponentSpec::AllUpToOrder,
            &BasisCounts::uniform(4),
            BasisMode::Independent,
            Link::Identity,
            seed,
        )
        .unwrap()
    }

    #[test]
    fn build_counts_components() {
        let m1 = build_model(
            8,
            1,
            &ComponentSpec::AllUpToOrder,
            &BasisCounts::uniform(3),
            BasisMode::Independent,
            Link::Identity,
            0,
        )
        .unwrap();
        assert_eq!(m1.components.len(), 8);

        let m2 = build_model(
            5,
            2,
            &ComponentSpec::AllUpToOrder,
            &BasisCounts::uniform(3),
            BasisMode::Independent,
            Link::Identity,
            0,
        )
        .unwrap();
        assert_eq!(m2.components.len(), 15);

        let m3 = build_model(
            3,
            2,
            &ComponentSpec::Explicit(vec![vec![0], vec![1], vec![2], vec![0, 1]]),
            &BasisCounts::uniform(3),
            BasisMode::Independent,
            Link::Identity,
            0,
        )
        .unwrap();
        assert_eq!(m3.components.len(), 4);
    }

    #[test]
    fn build_rejects_bad_specs() {
        let k = BasisCounts::uniform(2);
        // duplicate S
        assert!(build_model(
            3,
            2,
            &ComponentSpec::Explicit(vec![vec![0], vec![0]]),
            &k,
            BasisMode::Independent,
            Link::Identity,
            0
        )
        .is_err());
        // |S| > d
        assert!(build_model(
            3,
            1,
            &ComponentSpec::Explicit(vec![vec![0, 1]]),
            &k,
            BasisMode::Independent,
            Link::Identity,
            0
        )
        .is_err());
        // empty list
        assert!(build_model(
            3,
            1,
            &ComponentSpec::Explicit(vec![]),
            &k,
            BasisMode::Independent,
            Link::Identity,
            0
        )
        .is_err());
    }

    #[test]
    fn build_is_deterministic() {
        let a = small_model(9);
        let b = small_model(9);
        for (ca, cb) in a.components.iter().zip(b.components.iter()) {
            assert_eq!(ca.betas, cb.betas);
            for (ta, tb) in ca.thetas.iter().zip(cb.thetas.iter()) {
                assert_eq!(ta, tb);
            }
        }
        let c = small_model(10);
        assert_ne!(a.components[0].betas, c.components[0].betas);
    }

    #[test]
    fn forward_zero_betas_is_intercept() {
        let mut m = small_model(1);
        for c in m.components.iter_mut() {
            c.betas.iter_mut().for_each(|b| *b = 0.0);
        }
        m.beta0 = 3.25;
        assert_eq!(m.forward(&[0.2, 0.5, 0.9]).unwrap(), 3.25);
    }

    #[test]
    fn forward_is_sum_of_components() {
        let m = small_model(2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..30 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..1.0)).collect();
            let f = m.forward(&x).unwrap();
            let sum: f64 = m
                .components
                .iter()
                .map(|c| m.eval_component(&c.features, &x).unwrap())
                .sum();
            assert!((f - (m.beta0 + sum)).abs() < 1e-10);
        }
    }

    #[test]
    fn component_axis_means_vanish() {
        // sum-to-zero is inherited from the basis: grid mean over each axis is ~0
        let m = small_model(3);
        let pair_idx = m.component_index(&[0, 1]).unwrap();
        let g = 20_000;
        for &fixed in &[0.2, 0.8] {
            let mean = (0..g)
                .map(|i| {
                    let x = (i as f64 + 0.5) / g as f64;
                    m.eval_component_transformed(pair_idx, &[x, fixed, 0.0])
                })
                .sum::<f64>()
                / g as f64;
            assert!(mean.abs() < 2e-4);
        }
    }

    #[test]
    fn unknown_component_is_an_error() {
        let m = small_model(4);
        assert!(m.eval_component(&[1, 0], &[0.1, 0.2, 0.3]).is_ok());
        assert!(m.eval_component(&[5], &[0.1, 0.2, 0.3]).is_err());
    }

    #[test]
    fn save_load_round_trip_is_exact() {
        let m = small_model(5);
        let text = model_to_json(&m).unwrap();
        let m2 = model_from_json(&text).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-0.5..1.5)).collect();
            let a = m.forward(&x).unwrap();
            let b = m2.forward(&x).unwrap();
            assert_eq!(a.to_bits(), b.to_bits(), "forward differs after round trip");
        }
        // serialization itself is deterministic
        assert_eq!(text, model_to_json(&m2).unwrap());
    }

    #[test]
    fn load_rejects_bad_files() {
        let m = small_model(6);
        let text = model_to_json(&m).unwrap();

        // truncation
        let truncated = &text[..text.len() / 2];
        assert!(matches!(model_from_json(truncated), Err(Error::ModelFile(_))));

        // unknown schema version
        let with_version = text.replace("\"schema\": 1", "\"schema\": 99");
        assert!(matches!(
            model_from_json(&with_version),
            Err(Error::SchemaVersion { found: 99, .. })
        ));

        // tampered payload fails the checksum
        let tampered = text.replace("\"beta0\": 0.0", "\"beta0\": 1.0");
        assert_ne!(text, tampered);
        assert!(matches!(model_from_json(&tampered), Err(Error::ChecksumMismatch)));
    }

    #[test]
    fn nbm_shared_mode_shares_the_bank() {
        let mut m = build_model(
            4,
            2,
            &ComponentSpec::AllUpToOrder,
            &BasisCounts::uniform(3),
            BasisMode::NbmShared,
            Link::Identity,
            11,
        )
        .unwrap();
        for c in m.components.iter_mut() {
            for b in c.betas.iter_mut() {
                *b = 1.0;
            }
        }
        let x = [0.3, 0.6, 0.1, 0.9];
        let c01 = m.eval_component(&[0, 1], &x).unwrap();
        let c23 = m.eval_component(&[2, 3], &x).unwrap();
        // mutate the shared pair bank: every pair component must move
        for p in m.shared_thetas.get_mut(&2).unwrap().iter_mut() {
            p.b += 0.17;
        }
        let c01b = m.eval_component(&[0, 1], &x).unwrap();
        let c23b = m.eval_component(&[2, 3], &x).unwrap();
        assert!((c01 - c01b).abs() > 1e-9);
        assert!((c23 - c23b).abs() > 1e-9);

        // sum-to-zero still holds per component
        let idx = m.component_index(&[0, 1]).unwrap();
        let g = 20_000;
        let mean = (0..g)
            .map(|i| m.eval_component_transformed(idx, &[(i as f64 + 0.5) / g as f64, 0.7, 0.0, 0.0]))
            .sum::<f64>()
            / g as f64;
        assert!(mean.abs() < 2e-4);

        // round trip preserves shared banks
        let text = model_to_json(&m).unwrap();
        let m2 = model_from_json(&text).unwrap();
        assert_eq!(
            m.forward(&x).unwrap().to_bits(),
            m2.forward(&x).unwrap().to_bits()
        );
    }

    #[test]
    fn nbm_mode_has_fewer_parameters() {
        let k = BasisCounts::uniform(30);
        let ind = build_model(10, 1, &ComponentSpec::AllUpToOrder, &k, BasisMode::Independent, Link::Identity, 0).unwrap();
        let nbm = build_model(10, 1, &ComponentSpec::AllUpToOrder, &k, BasisMode::NbmShared, Link::Identity, 0).unwrap();
        assert!(nbm.param_count() < ind.param_count());
    }

    #[test]
    fn monotone_reparameterization() {
        let mut m = small_model(7);
        m.enforce_monotone(&[0], Monotonicity::Increasing).unwrap();
        let c = &m.components[m.component_index(&[0]).unwrap()];
        for &raw in &c.betas {
            assert!(effective_beta(raw, Monotonicity::Increasing) <= 0.0);
        }
        // directive on an interaction is rejected
        assert!(m.enforce_monotone(&[0, 1], Monotonicity::Increasing).is_err());

        // raw weights driven far negative give a vanishing (still monotone)
        // effect
        assert!(effective_beta(-40.0, Monotonicity::Increasing).abs() < 1e-15);
        assert!(effective_beta(-40.0, Monotonicity::Decreasing).abs() < 1e-15);
    }
}


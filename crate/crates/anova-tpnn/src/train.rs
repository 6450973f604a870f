//! Empirical-risk minimization with mini-batch Adam and analytic gradients.
//!
//! The learnable parameters are the intercept, the per-component
//! coefficients (their softplus preimages for monotone components) and the
//! basis parameters (b, rho). Everything is flattened into one parameter
//! vector; gradients are accumulated analytically in one pass per batch.

use crate::basis::{BasisEval, BasisParam};
use crate::data::{apply_transform, Dataset};
use crate::error::{Error, Result};
use crate::model::{effective_beta, effective_beta_grad, AnovaTpnnModel, BasisMode, Link, Monotonicity};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossKind {
    #[serde(rename = "squared")]
    Squared,
    #[serde(rename = "logistic")]
    Logistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ValidationPolicy {
    #[serde(rename = "none")]
    None,
    #[serde(rename = "select-best-epoch")]
    SelectBestEpoch,
}

/// Adam moment decay rates and epsilon.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// A monotonicity directive for one component (must be a main effect).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonotoneDirective {
    /// 0-based feature indices of the component to constrain.
    pub features: Vec<usize>,
    pub direction: Monotonicity,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitConfig {
    pub loss: LossKind,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    pub validation: ValidationPolicy,
    pub monotone: Vec<MonotoneDirective>,
    /// Log one line per epoch to stderr.
    pub verbose: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            loss: LossKind::Squared,
            learning_rate: 5e-3,
            batch_size: 4096,
            max_epochs: 100,
            adam: AdamConfig::default(),
            seed: 0,
            validation: ValidationPolicy::SelectBestEpoch,
            monotone: Vec::new(),
            verbose: false,
        }
    }
}

/// Training record: per-epoch losses and the selected snapshot.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    /// Batch-weighted mean training loss per epoch.
    pub train_losses: Vec<f64>,
    /// Full validation loss per epoch (empty without validation data).
    pub val_losses: Vec<f64>,
    /// 1-based epoch whose parameters the returned model carries; None when
    /// no epoch ran.
    pub selected_epoch: Option<usize>,
    /// Hash of the final flat parameter vector.
    pub snapshot: String,
    pub wall_seconds: f64,
}

/// Gradients are rescaled so their global norm never exceeds this.
pub const GRAD_CLIP_NORM: f64 = 10.0;

// --- flat parameter vector ---

/// Offsets of each parameter group in the flat vector. Layout:
/// beta0, then per component its raw coefficients, then basis parameters
/// (per component in independent mode, per cardinality bank in shared mode),
/// each as (b, rho) pairs in k-major order.
pub struct ParamLayout {
    pub total: usize,
    beta_offsets: Vec<usize>,
    theta_offsets: Vec<usize>,
    bank_offsets: Vec<(usize, usize)>, // (cardinality, offset)
}

impl ParamLayout {
    pub fn of(model: &AnovaTpnnModel) -> Self {
        let mut total = 1;
        let mut beta_offsets = Vec::with_capacity(model.components.len());
        for c in &model.components {
            beta_offsets.push(total);
            total += c.basis_count();
        }
        let mut theta_offsets = Vec::new();
        let mut bank_offsets = Vec::new();
        match model.mode {
            BasisMode::Independent => {
                for c in &model.components {
                    theta_offsets.push(total);
                    total += c.basis_count() * c.order() * 2;
                }
            }
            BasisMode::NbmShared => {
                for (&card, bank) in &model.shared_thetas {
                    bank_offsets.push((card, total));
                    total += bank.len() * 2;
                }
            }
        }
        Self {
            total,
            beta_offsets,
            theta_offsets,
            bank_offsets,
        }
    }

    pub fn beta0(&self) -> usize {
        0
    }

    pub fn beta(&self, comp: usize, k: usize) -> usize {
        self.beta_offsets[comp] + k
    }

    /// Offset of the (b, rho) pair for basis k, in-subset position j.
    pub fn theta(&self, comp: usize, order: usize, k: usize, j_in_s: usize) -> usize {
        self.theta_offsets[comp] + 2 * (k * order + j_in_s)
    }

    pub fn bank(&self, card: usize, k: usize) -> usize {
        let (_, off) = self
            .bank_offsets
            .iter()
            .find(|(c, _)| *c == card)
            .expect("bank for cardinality");
        off + 2 * k
    }

    pub fn gather(&self, model: &AnovaTpnnModel) -> Vec<f64> {
        let mut v = vec![0.0; self.total];
        v[0] = model.beta0;
        for (ci, c) in model.components.iter().enumerate() {
            for k in 0..c.basis_count() {
                v[self.beta(ci, k)] = c.betas[k];
            }
        }
        match model.mode {
            BasisMode::Independent => {
                for (ci, c) in model.components.iter().enumerate() {
                    for k in 0..c.basis_count() {
                        for j in 0..c.order() {
                            let off = self.theta(ci, c.order(), k, j);
                            v[off] = c.thetas[k][j].b;
                            v[off + 1] = c.thetas[k][j].rho;
                        }
                    }
                }
            }
            BasisMode::NbmShared => {
                for (&card, bank) in &model.shared_thetas {
                    for (k, p) in bank.iter().enumerate() {
                        let off = self.bank(card, k);
                        v[off] = p.b;
                        v[off + 1] = p.rho;
                    }
                }
            }
        }
        v
    }

    pub fn scatter(&self, model: &mut AnovaTpnnModel, v: &[f64]) {
        model.beta0 = v[0];
        for ci in 0..model.components.len() {
            let kc = model.components[ci].basis_count();
            for k in 0..kc {
                model.components[ci].betas[k] = v[self.beta(ci, k)];
            }
        }
        match model.mode {
            BasisMode::Independent => {
                for ci in 0..model.components.len() {
                    let order = model.components[ci].order();
                    let kc = model.components[ci].basis_count();
                    for k in 0..kc {
                        for j in 0..order {
                            let off = self.theta(ci, order, k, j);
                            model.components[ci].thetas[k][j] = BasisParam::new(v[off], v[off + 1]);
                        }
                    }
                }
            }
            BasisMode::NbmShared => {
                for (&card, bank) in model.shared_thetas.iter_mut() {
                    for (k, p) in bank.iter_mut().enumerate() {
                        let off = self.bank(card, k);
                        *p = BasisParam::new(v[off], v[off + 1]);
                    }
                }
            }
        }
    }
}

#[inline]
fn loss_value_and_slope(loss: LossKind, y: f64, f: f64) -> (f64, f64) {
    match loss {
        LossKind::Squared => {
            let r = f - y;
            (r * r, 2.0 * r)
        }
        LossKind::Logistic => (crate::basis::softplus(f) - y * f, crate::basis::sigmoid(f) - y),
    }
}

/// Batch loss (mean over rows) and its gradient for every learnable
/// parameter. `x01` must already be on the transformed scale.
pub fn loss_and_grad(
    model: &AnovaTpnnModel,
    x01: &Array2<f64>,
    y: &[f64],
    rows: &[usize],
    loss: LossKind,
    layout: &ParamLayout,
) -> Result<(f64, Vec<f64>)> {
    if rows.is_empty() {
        return Err(Error::Data("empty batch".into()));
    }
    let p = x01.ncols();
    let xs = x01.as_slice().expect("standard layout");

    // per (component, k, j): hoisted eta/c and gradient factors
    let evals: Vec<Vec<Vec<BasisEval>>> = model
        .components
        .iter()
        .map(|c| {
            (0..c.basis_count())
                .map(|k| {
                    (0..c.order())
                        .map(|j| BasisEval::new(&model.theta_for(c, k, j)))
                        .collect()
                })
                .collect()
        })
        .collect();

    let inv_n = 1.0 / rows.len() as f64;
    let mut grad = vec![0.0; layout.total];
    let mut total_loss = 0.0;

    // scratch for per-basis factor values and their parameter partials
    let max_order = model.components.iter().map(|c| c.order()).max().unwrap_or(1);
    let mut phis = vec![0.0; max_order];
    let mut dbs = vec![0.0; max_order];
    let mut drhos = vec![0.0; max_order];
    // cached products per (component, k) for the backward pass
    let n_ck: usize = model.components.iter().map(|c| c.basis_count()).sum();
    let mut prods = vec![0.0; n_ck];
    let mut factor_cache = vec![0.0; n_ck * max_order];
    let mut db_cache = vec![0.0; n_ck * max_order];
    let mut drho_cache = vec![0.0; n_ck * max_order];

    for &i in rows {
        let row = &xs[i * p..(i + 1) * p];

        // forward, caching every factor
        let mut f = model.beta0;
        let mut ck = 0;
        for (ci, c) in model.components.iter().enumerate() {
            let order = c.order();
            let mut comp_val = 0.0;
            for k in 0..c.basis_count() {
                let mut prod = 1.0;
                for (j_in_s, &j) in c.features.iter().enumerate() {
                    let g = evals[ci][k][j_in_s].value_grad(row[j]);
                    phis[j_in_s] = g.phi;
                    dbs[j_in_s] = g.d_b;
                    drhos[j_in_s] = g.d_rho;
                    prod *= g.phi;
                }
                prods[ck] = prod;
                factor_cache[ck * max_order..ck * max_order + order].copy_from_slice(&phis[..order]);
                db_cache[ck * max_order..ck * max_order + order].copy_from_slice(&dbs[..order]);
                drho_cache[ck * max_order..ck * max_order + order].copy_from_slice(&drhos[..order]);
                comp_val += effective_beta(c.betas[k], c.monotone) * prod;
                ck += 1;
            }
            let _ = ci;
            f += comp_val;
        }

        let (l, slope) = loss_value_and_slope(loss, y[i], f);
        total_loss += l * inv_n;
        let w = slope * inv_n;

        // backward
        grad[0] += w;
        let mut ck = 0;
        for (ci, c) in model.components.iter().enumerate() {
            let order = c.order();
            for k in 0..c.basis_count() {
                let raw = c.betas[k];
                let eff = effective_beta(raw, c.monotone);
                grad[layout.beta(ci, k)] += w * prods[ck] * effective_beta_grad(raw, c.monotone);
                let weff = w * eff;
                if weff != 0.0 {
                    let base = ck * max_order;
                    for j_in_s in 0..order {
                        // product of the other factors
                        let mut rest = 1.0;
                        for l2 in 0..order {
                            if l2 != j_in_s {
                                rest *= factor_cache[base + l2];
                            }
                        }
                        let gb = weff * rest * db_cache[base + j_in_s];
                        let gr = weff * rest * drho_cache[base + j_in_s];
                        match model.mode {
                            BasisMode::Independent => {
                                let off = layout.theta(ci, order, k, j_in_s);
                                grad[off] += gb;
                                grad[off + 1] += gr;
                            }
                            BasisMode::NbmShared => {
                                let off = layout.bank(order, k);
                                grad[off] += gb;
                                grad[off + 1] += gr;
                            }
                        }
                    }
                }
                ck += 1;
            }
        }
    }

    Ok((total_loss, grad))
}

/// Mean loss over all rows of an already-transformed matrix.
pub fn full_loss(model: &AnovaTpnnModel, x01: &Array2<f64>, y: &[f64], loss: LossKind) -> f64 {
    let p = x01.ncols();
    let xs = x01.as_slice().expect("standard layout");
    let mut total = 0.0;
    for i in 0..y.len() {
        let row = &xs[i * p..(i + 1) * p];
        let f = model.forward_transformed(row);
        total += loss_value_and_slope(loss, y[i], f).0;
    }
    total / y.len() as f64
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    lr: f64,
    cfg: AdamConfig,
}

impl Adam {
    fn new(n: usize, lr: f64, cfg: AdamConfig) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            lr,
            cfg,
        }
    }

    fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        self.t += 1;
        let bc1 = 1.0 - self.cfg.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.cfg.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.cfg.beta1 * self.m[i] + (1.0 - self.cfg.beta1) * grads[i];
            self.v[i] = self.cfg.beta2 * self.v[i] + (1.0 - self.cfg.beta2) * grads[i] * grads[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.cfg.eps);
        }
    }
}

fn clip_global_norm(grad: &mut [f64], max_norm: f64) {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let scale = max_norm / norm;
        grad.iter_mut().for_each(|g| *g *= scale);
    }
}

/// Train by mini-batch Adam over shuffled batches (reshuffled every epoch,
/// deterministic per seed).
///
/// The intercept is initialized from the training target (mean for the
/// identity link, log-odds of the base rate for logit). With validation
/// data and the select-best-epoch policy, the returned model carries the
/// parameters of the epoch minimizing validation loss.
pub fn train(
    mut model: AnovaTpnnModel,
    train_data: &Dataset,
    val_data: Option<&Dataset>,
    cfg: &FitConfig,
) -> Result<(AnovaTpnnModel, FitReport)> {
    let started = Instant::now();
    if train_data.n_features() != model.n_features() {
        return Err(Error::ArityMismatch {
            expected: model.n_features(),
            got: train_data.n_features(),
        });
    }
    if cfg.learning_rate <= 0.0 {
        return Err(Error::Config("learning rate must be positive".into()));
    }
    if cfg.batch_size == 0 {
        return Err(Error::Config("batch size must be >= 1".into()));
    }
    match (cfg.loss, model.link) {
        (LossKind::Logistic, Link::Logit) | (LossKind::Squared, Link::Identity) => {}
        (LossKind::Logistic, Link::Identity) => {
            return Err(Error::Config("logistic loss requires the logit link".into()))
        }
        (LossKind::Squared, Link::Logit) => {
            return Err(Error::Config("squared loss requires the identity link".into()))
        }
    }
    if cfg.loss == LossKind::Logistic && !train_data.is_binary_target() {
        return Err(Error::Data("logistic loss requires {0,1} targets".into()));
    }
    for d in &cfg.monotone {
        model.enforce_monotone(&d.features, d.direction)?;
    }

    // intercept from the training target
    let n = train_data.n_rows();
    let mean_y = train_data.target.sum() / n as f64;
    model.beta0 = match model.link {
        Link::Identity => mean_y,
        Link::Logit => {
            let p = mean_y.clamp(1e-6, 1.0 - 1e-6);
            (p / (1.0 - p)).ln()
        }
    };

    let x01 = apply_transform(&model.transformer, &train_data.features)?;
    let y: Vec<f64> = train_data.target.to_vec();
    let val = match val_data {
        Some(v) => {
            if v.n_features() != model.n_features() {
                return Err(Error::ArityMismatch {
                    expected: model.n_features(),
                    got: v.n_features(),
                });
            }
            Some((apply_transform(&model.transformer, &v.features)?, v.target.to_vec()))
        }
        None => None,
    };

    let layout = ParamLayout::of(&model);
    let mut params = layout.gather(&model);

    if !full_loss(&model, &x01, &y, cfg.loss).is_finite() {
        return Err(Error::Numeric("non-finite loss at initialization".into()));
    }

    let mut adam = Adam::new(layout.total, cfg.learning_rate, cfg.adam);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();

    let mut train_losses = Vec::with_capacity(cfg.max_epochs);
    let mut val_losses = Vec::with_capacity(cfg.max_epochs);
    let select_best = val.is_some() && cfg.validation == ValidationPolicy::SelectBestEpoch;
    let mut best: Option<(f64, usize, Vec<f64>)> = None;

    for epoch in 1..=cfg.max_epochs {
        // reshuffle
        for i in (1..n).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let (loss, mut grad) = loss_and_grad(&model, &x01, &y, batch, cfg.loss, &layout)?;
            epoch_loss += loss * batch.len() as f64;
            clip_global_norm(&mut grad, GRAD_CLIP_NORM);
            adam.step(&mut params, &grad);
            layout.scatter(&mut model, &params);
        }
        epoch_loss /= n as f64;
        if !epoch_loss.is_finite() || params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Numeric(format!("non-finite state at epoch {epoch}")));
        }
        train_losses.push(epoch_loss);

        if let Some((vx, vy)) = &val {
            let vl = full_loss(&model, vx, vy, cfg.loss);
            val_losses.push(vl);
            if select_best && best.as_ref().map_or(true, |(b, _, _)| vl < *b) {
                best = Some((vl, epoch, params.clone()));
            }
            if cfg.verbose {
                eprintln!("epoch={epoch} train_loss={epoch_loss} val_loss={vl}");
            }
        } else if cfg.verbose {
            eprintln!("epoch={epoch} train_loss={epoch_loss}");
        }
    }

    let selected_epoch = if let Some((_, epoch, best_params)) = best {
        layout.scatter(&mut model, &best_params);
        params = best_params;
        Some(epoch)
    } else if cfg.max_epochs > 0 {
        Some(cfg.max_epochs)
    } else {
        None
    };

    let snapshot = {
        let mut hash: u64 = 0xcbf29ce484222325;
        for p in &params {
            for b in p.to_bits().to_le_bytes() {
                hash ^= b as u64;
                hash = hash.wrapping_mul(0x100000001b3);
            }
        }
        format!("{hash:016x}")
    };

    Ok((
        model,
        FitReport {
            train_losses,
            val_losses,
            selected_epoch,
            snapshot,
            wall_seconds: started.elapsed().as_secs_f64(),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
        use crate::model::{build_model, BasisCounts, ComponentSpec};
    use ndarray::Array1;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn uniform_dataset(n: usize, p: usize, seed: u64, target: impl Fn(&[f64], &mut ChaCha8Rng) -> f64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut feats = Array2::zeros((n, p));
        let mut y = Array1::zeros(n);
        for i in 0..n {
            let row: Vec<f64> = (0..p).map(|_| rng.gen_range(0.0..1.0)).collect();
            for (j, v) in row.iter().enumerate() {
                feats[(i, j)] = *v;
            }
            y[i] = target(&row, &mut rng);
        }
        Dataset::new(feats, y, (1..=p).map(|j| format!("x{j}")).collect()).unwrap()
    }

    fn tiny_model(seed: u64) -> AnovaTpnnModel {
        build_model(
            2,
            2,
            &ComponentSpec::AllUpToOrder,
            &BasisCounts::uniform(2),
            BasisMode::Independent,
            Link::Identity,
            seed,
        )
        .unwrap()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut model = tiny_model(3);
        model.beta0 = 0.4;
        // make coefficients non-trivial so theta gradients are exercised,
        // and constrain one main effect so the softplus path is covered
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for c in model.components.iter_mut() {
            for b in c.betas.iter_mut() {
                *b = rng.gen_range(-1.0..1.0);
            }
        }
        model.enforce_monotone(&[0], Monotonicity::Increasing).unwrap();
        let data = uniform_dataset(8, 2, 1, |x, _| x[0] + 0.5 * x[1]);
        let x01 = data.features.clone();
        let y: Vec<f64> = data.target.to_vec();
        let rows: Vec<usize> = (0..8).collect();
        let layout = ParamLayout::of(&model);
        let (_, grad) = loss_and_grad(&model, &x01, &y, &rows, LossKind::Squared, &layout).unwrap();

        let params = layout.gather(&model);
        let h = 1e-5;
        let mut worst = 0.0f64;
        for i in 0..params.len() {
            let mut plus = params.clone();
            plus[i] += h;
            let mut minus = params.clone();
            minus[i] -= h;
            let mut mp = model.clone();
            layout.scatter(&mut mp, &plus);
            let lp =
                loss_and_grad(&mp, &x01, &y, &rows, LossKind::Squared, &layout).unwrap().0;
            let mut mm = model.clone();
            layout.scatter(&mut mm, &minus);
            let lm =
                loss_and_grad(&mm, &x01, &y, &rows, LossKind::Squared, &layout).unwrap().0;
            let fd = (lp - lm) / (2.0 * h);
            let rel = (grad[i] - fd).abs() / (1.0 + grad[i].abs());
            worst = worst.max(rel);
        }
        assert!(worst < 1e-4, "worst relative gradient error {worst}");
    }

    #[test]
    fn beta_gradient_has_closed_form() {
        // for squared loss, d/d beta = -2 mean(residual * phi)
        let model = tiny_model(11);
        let data = uniform_dataset(16, 2, 2, |x, _| 2.0 * x[0] - x[1]);
        let y: Vec<f64> = data.target.to_vec();
        let rows: Vec<usize> = (0..16).collect();
        let layout = ParamLayout::of(&model);
        let (_, grad) =
            loss_and_grad(&model, &data.features, &y, &rows, LossKind::Squared, &layout).unwrap();

        for (ci, c) in model.components.iter().enumerate() {
            for k in 0..c.basis_count() {
                let mut acc = 0.0;
                for i in 0..16 {
                    let row: Vec<f64> = data.features.row(i).to_vec();
                    let f = model.forward_transformed(&row);
                    let mut phi = 1.0;
                    for (j_in_s, &j) in c.features.iter().enumerate() {
                        phi *= crate::basis::phi_main(row[j], &model.theta_for(c, k, j_in_s));
                    }
                    acc += (y[i] - f) * phi;
                }
                let expect = -2.0 * acc / 16.0;
                let got = grad[layout.beta(ci, k)];
                assert!(
                    (got - expect).abs() < 1e-10,
                    "beta grad mismatch {got} vs {expect}"
                );
            }
        }
    }

    #[test]
    fn zero_residual_batch_has_zero_beta_gradients() {
        let model = tiny_model(4);
        let n = 12;
        let mut feats = Array2::zeros((n, 2));
        let mut y = Array1::zeros(n);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for i in 0..n {
            let row: Vec<f64> = (0..2).map(|_| rng.gen_range(0.0..1.0)).collect();
            feats[(i, 0)] = row[0];
            feats[(i, 1)] = row[1];
            y[i] = model.forward_transformed(&row);
        }
        let rows: Vec<usize> = (0..n).collect();
        let layout = ParamLayout::of(&model);
        let (loss, grad) =
            loss_and_grad(&model, &feats, &y.to_vec(), &rows, LossKind::Squared, &layout).unwrap();
        assert!(loss < 1e-20);
        assert!(grad[layout.beta0()].abs() < 1e-12);
        for (ci, c) in model.components.iter().enumerate() {
            for k in 0..c.basis_count() {
                assert!(grad[layout.beta(ci, k)].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fits_a_linear_target() {
        // y = 3 x - 1.5 + noise; the generator is the oracle for the
        // achievable error
        let noise = 0.1;
        let data = uniform_dataset(3000, 1, 7, |x, rng| {
            3.0 * x[0] - 1.5 + noise * rng.gen_range(-1.73..1.73)
        });
        let (train_d, rest) = {
            let (a, b, c) = crate::data::split(&data, (0.7, 0.1, 0.2), 1).unwrap();
            (a, (b, c))
        };
        let (val_d, test_d) = rest;
        let model = build_model(
            1,
            1,
            &ComponentSpec::AllUpToOrder,
            &BasisCounts::uniform(10),
            BasisMode::Independent,
            Link::Identity,
            0,
        )
        .unwrap();
        let cfg = FitConfig {
            batch_size: 512,
            max_epochs: 150,
            ..FitConfig::default()
        };
        let (fitted, report) = train(model, &train_d, Some(&val_d), &cfg).unwrap();
        assert_eq!(report.train_losses.len(), 150);
        let mut se = 0.0;
        for i in 0..test_d.n_rows() {
            let row: Vec<f64> = test_d.features.row(i).to_vec();
            let pred = fitted.forward(&row).unwrap();
            se += (pred - test_d.target[i]).powi(2);
        }
        let rmse = (se / test_d.n_rows() as f64).sqrt();
        // uniform(-a, a) noise has std a/sqrt(3) ~ 0.0999 here
        let noise_std = noise * 1.73 / 3.0_f64.sqrt();
        assert!(rmse <= 1.2 * noise_std, "test rmse {rmse}");
    }

    #[test]
    fn zero_epoch_budget_returns_initialized_model() {
        let data = uniform_dataset(50, 2, 3, |x, _| x[0]);
        let model = tiny_model(0);
        let cfg = FitConfig {
            max_epochs: 0,
            ..FitConfig::default()
        };
        let (fitted, report) = train(model, &data, None, &cfg).unwrap();
        assert_eq!(report.train_losses.len(), 0);
        assert_eq!(report.selected_epoch, None);
        // intercept initialized from the target mean
        let mean = data.target.sum() / 50.0;
        assert!((fitted.beta0 - mean).abs() < 1e-12);
    }

    #[test]
    fn logistic_loss_decreases_on_separable_data() {
        let data = uniform_dataset(600, 1, 9, |x, _| if x[0] > 0.5 { 1.0 } else { 0.0 });
        let model = build_model(
            1,
            1,
            &ComponentSpec::AllUpToOrder,
            &BasisCounts::uniform(5),
            BasisMode::Independent,
            Link::Logit,
            2,
        )
        .unwrap();
        let cfg = FitConfig {
            loss: LossKind::Logistic,
            batch_size: 600,
            max_epochs: 5,
            ..FitConfig::default()
        };
        let (_, report) = train(model, &data, None, &cfg).unwrap();
        for w in report.train_losses.windows(2) {
            assert!(w[1] < w[0], "loss not strictly decreasing: {:?}", report.train_losses);
        }
    }

    #[test]
    fn training_is_deterministic() {
        let data = uniform_dataset(400, 2, 5, |x, rng| x[0] * x[1] + 0.05 * rng.gen_range(-1.0..1.0));
        let cfg = FitConfig {
            batch_size: 128,
            max_epochs: 10,
            ..FitConfig::default()
        };
        let (m1, r1) = train(tiny_model(1), &data, None, &cfg).unwrap();
        let (m2, r2) = train(tiny_model(1), &data, None, &cfg).unwrap();
        assert_eq!(r1.train_losses, r2.train_losses);
        assert_eq!(r1.snapshot, r2.snapshot);
        let layout = ParamLayout::of(&m1);
        assert_eq!(layout.gather(&m1), layout.gather(&m2));
    }

    #[test]
    fn selected_epoch_minimizes_validation_loss() {
        let data = uniform_dataset(500, 2, 6, |x, rng| {
            x[0] + x[1] + 0.2 * rng.gen_range(-1.0..1.0)
        });
        let (tr, va, _) = crate::data::split(&data, (0.6, 0.2, 0.2), 0).unwrap();
        let cfg = FitConfig {
            batch_size: 64,
            max_epochs: 30,
            ..FitConfig::default()
        };
        let (_, report) = train(tiny_model(2), &tr, Some(&va), &cfg).unwrap();
        let selected = report.selected_epoch.unwrap();
        let min_idx = report
            .val_losses
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0
            + 1;
        assert_eq!(selected, min_idx);
    }

    #[test]
    fn sum_to_zero_survives_training() {
        let data = uniform_dataset(800, 2, 8, |x, rng| {
            (x[0] * 6.0).sin() + x[1] + 0.1 * rng.gen_range(-1.0..1.0)
        });
        let cfg = FitConfig {
            batch_size: 256,
            max_epochs: 40,
            ..FitConfig::default()
        };
        let (fitted, _) = train(tiny_model(3), &data, None, &cfg).unwrap();
        let g = 100_000;
        for (ci, c) in fitted.components.iter().enumerate() {
            if c.order() == 1 {
                let j = c.features[0];
                let mut x = [0.3, 0.6];
                let mean = (0..g)
                    .map(|i| {
                        x[j] = (i as f64 + 0.5) / g as f64;
                        fitted.eval_component_transformed(ci, &x)
                    })
                    .sum::<f64>()
                    / g as f64;
                assert!(mean.abs() < 2e-4, "component {ci} grid mean {mean}");
            }
        }
        // pair component, both axes, coarser grid
        let pair = fitted.component_index(&[0, 1]).unwrap();
        let g2 = 1000;
        for axis in 0..2 {
            for &other in &[0.25, 0.75] {
                let mut x = [other, other];
                let mean = (0..g2)
                    .map(|i| {
                        x[axis] = (i as f64 + 0.5) / g2 as f64;
                        fitted.eval_component_transformed(pair, &x)
                    })
                    .sum::<f64>()
                    / g2 as f64;
                assert!(mean.abs() < 2e-4, "pair axis {axis} mean {mean}");
            }
        }
    }

    #[test]
    fn monotone_increasing_constraint_holds_after_training() {
        // decreasing-in-truth target fought against an increasing constraint
        // still yields a monotone curve
        let data = uniform_dataset(1500, 1, 10, |x, rng| {
            (2.0 * x[0] - 0.3 * (x[0] * 12.0).sin()) + 0.1 * rng.gen_range(-1.0..1.0)
        });
        let model = build_model(
            1,
            1,
            &ComponentSpec::AllUpToOrder,
            &BasisCounts::uniform(8),
            BasisMode::Independent,
            Link::Identity,
            4,
        )
        .unwrap();
        let cfg = FitConfig {
            batch_size: 256,
            max_epochs: 80,
            monotone: vec![MonotoneDirective {
                features: vec![0],
                direction: Monotonicity::Increasing,
            }],
            ..FitConfig::default()
        };
        let (fitted, _) = train(model, &data, None, &cfg).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=1000 {
            let x = i as f64 / 1000.0;
            let v = fitted.eval_component_transformed(0, &[x]);
            assert!(v >= prev - 1e-12, "monotone violation at {x}");
            prev = v;
        }
    }

    #[test]
    fn monotone_directive_on_pair_is_rejected() {
        let data = uniform_dataset(50, 2, 0, |x, _| x[0]);
        let cfg = FitConfig {
            monotone: vec![MonotoneDirective {
                features: vec![0, 1],
                direction: Monotonicity::Increasing,
            }],
            ..FitConfig::default()
        };
        let err = train(tiny_model(0), &data, None, &cfg).unwrap_err();
        assert!(err.to_string().contains("main effect"));
    }

    #[test]
    fn non_finite_target_is_rejected_at_init() {
        let mut data = uniform_dataset(20, 2, 1, |x, _| x[0]);
        // bypass Dataset::new checks to simulate a poisoned value
        data.target[3] = f64::NAN;
        let err = train(tiny_model(1), &data, None, &FitConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Numeric(_)));
    }

    #[test]
    fn empirical_quantile_pipeline_fits_shifted_data() {
        // raw features far from [0,1]; rank transform brings them in
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let n = 2000;
        let mut feats = Array2::zeros((n, 1));
        let mut y = Array1::zeros(n);
        for i in 0..n {
            let x: f64 = rng.gen_range(-50.0..150.0);
            feats[(i, 0)] = x;
            y[i] = (x / 50.0).tanh() + 0.05 * rng.gen_range(-1.0..1.0);
        }
        let data = Dataset::new(feats, y, vec!["x1".into()]).unwrap();
        let mut model = build_model(
            1,
            1,
            &ComponentSpec::AllUpToOrder,
            &BasisCounts::uniform(10),
            BasisMode::Independent,
            Link::Identity,
            0,
        )
        .unwrap();
        model.transformer =
            crate::data::fit_quantile_transform(&data.features, &data.feature_names).unwrap();
        model.feature_names = data.feature_names.clone();
        let cfg = FitConfig {
            batch_size: 512,
            max_epochs: 120,
            ..FitConfig::default()
        };
        let (fitted, _) = train(model, &data, None, &cfg).unwrap();
        let mut se = 0.0;
        for i in 0..n {
            let pred = fitted.forward(&[data.features[(i, 0)]]).unwrap();
            se += (pred - data.target[i]).powi(2);
        }
        let rmse = (se / n as f64).sqrt();
        assert!(rmse < 0.08, "rmse {rmse}");
    }
}

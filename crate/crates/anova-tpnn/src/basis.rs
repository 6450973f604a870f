//! Sum-to-zero basis neural networks and their tensor products.
//!
//! A basis function is `phi(x | b, gamma) = (1 - s) + c * s` with
//! `s = sigmoid((x - b) / gamma)` and `c = -(1 - eta) / eta`, where `eta`
//! is the integral of the shifted sigmoid under the reference measure on
//! the feature's domain. The correction `c` makes every basis function
//! integrate to zero, so any linear combination (and any tensor product)
//! inherits the sum-to-zero property structurally.
//!
//! The reference measure is uniform on [0, 1] (inputs are rank-transformed
//! upstream), which gives `eta` in closed form as a softplus difference.
//! An empirical-measure variant is provided for callers that skip the rank
//! transform.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Floor for the bandwidth reparameterization: gamma = softplus(rho) + GAMMA_MIN.
pub const GAMMA_MIN: f64 = 1e-3;

/// eta is clamped to [ETA_EPS, 1 - ETA_EPS] so that c stays bounded.
pub const ETA_EPS: f64 = 1e-6;

/// Logistic sigmoid, stable for large |z|.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^z) computed as max(z, 0) + ln(1 + e^-|z|).
#[inline]
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Inverse of softplus on (0, inf): returns rho with softplus(rho) = y.
pub fn softplus_inv(y: f64) -> f64 {
    assert!(y > 0.0, "softplus_inv requires y > 0");
    if y > 20.0 {
        // softplus(y) ~ y in this range
        y + (-(-y).exp()).ln_1p()
    } else {
        y.exp_m1().ln()
    }
}

/// Parameters of one basis neural network.
///
/// The bandwidth is stored through its unconstrained preimage `rho`;
/// `gamma = softplus(rho) + GAMMA_MIN` is strictly positive by construction.
/// The location `b` is unconstrained (it may drift outside [0, 1] during
/// training; sum-to-zero is preserved through `eta` regardless).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisParam {
    pub b: f64,
    pub rho: f64,
}

impl BasisParam {
    pub fn new(b: f64, rho: f64) -> Self {
        Self { b, rho }
    }

    /// Construct from an explicit bandwidth (must exceed GAMMA_MIN).
    pub fn from_gamma(b: f64, gamma: f64) -> Self {
        assert!(gamma > GAMMA_MIN, "gamma must exceed GAMMA_MIN");
        Self {
            b,
            rho: softplus_inv(gamma - GAMMA_MIN),
        }
    }

    #[inline]
    pub fn gamma(&self) -> f64 {
        softplus(self.rho) + GAMMA_MIN
    }
}

/// Per-feature basis parameters of one tensor-product basis function,
/// aligned with the owning component's sorted feature set.
pub type TensorTheta = Vec<BasisParam>;

/// Closed-form integral of sigmoid((x - b) / gamma) over uniform[0, 1],
/// before clamping.
#[inline]
fn eta_raw_uniform(b: f64, gamma: f64) -> f64 {
    gamma * (softplus((1.0 - b) / gamma) - softplus(-b / gamma))
}

/// eta under the uniform[0, 1] reference measure, clamped to
/// [ETA_EPS, 1 - ETA_EPS]. Takes the bandwidth explicitly.
pub fn eta_uniform(b: f64, gamma: f64) -> f64 {
    eta_raw_uniform(b, gamma).clamp(ETA_EPS, 1.0 - ETA_EPS)
}

/// eta for a basis parameter under the uniform reference measure.
pub fn eta(p: &BasisParam) -> f64 {
    eta_uniform(p.b, p.gamma())
}

/// eta under the empirical measure of `samples` (finite mean of the
/// shifted sigmoid), clamped like the uniform version. For callers that
/// skip the rank transform.
pub fn eta_empirical(b: f64, gamma: f64, samples: &[f64]) -> f64 {
    assert!(!samples.is_empty(), "empirical measure needs samples");
    let mean = samples.iter().map(|&x| sigmoid((x - b) / gamma)).sum::<f64>() / samples.len() as f64;
    mean.clamp(ETA_EPS, 1.0 - ETA_EPS)
}

/// Precomputed per-parameter quantities shared by every evaluation of one
/// basis function. `eta` and `c` depend only on the parameters, so batch
/// loops hoist this out of the per-row work.
#[derive(Debug, Clone, Copy)]
pub struct BasisEval {
    pub b: f64,
    pub gamma: f64,
    pub eta: f64,
    pub c: f64,
    /// d eta / d b (zero when eta sits on its clamp boundary).
    deta_db: f64,
    /// d eta / d gamma (zero when clamped).
    deta_dgamma: f64,
    /// d gamma / d rho = sigmoid(rho).
    dgamma_drho: f64,
}

impl BasisEval {
    pub fn new(p: &BasisParam) -> Self {
        let gamma = p.gamma();
        let raw = eta_raw_uniform(p.b, gamma);
        let clamped = !(ETA_EPS..=1.0 - ETA_EPS).contains(&raw);
        let eta = raw.clamp(ETA_EPS, 1.0 - ETA_EPS);
        let c = -(1.0 - eta) / eta;
        let (deta_db, deta_dgamma) = if clamped {
            // subgradient of the clamp
            (0.0, 0.0)
        } else {
            let su = sigmoid((1.0 - p.b) / gamma);
            let sv = sigmoid(-p.b / gamma);
            let deta_db = sv - su;
            let deta_dgamma = (raw - (1.0 - p.b) * su - p.b * sv) / gamma;
            (deta_db, deta_dgamma)
        };
        Self {
            b: p.b,
            gamma,
            eta,
            c,
            deta_db,
            deta_dgamma,
            dgamma_drho: sigmoid(p.rho),
        }
    }

    /// Evaluate phi at x.
    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        let s = sigmoid((x - self.b) / self.gamma);
        (1.0 - s) + self.c * s
    }

    /// Evaluate phi together with its partials w.r.t. b and rho.
    #[inline]
    pub fn value_grad(&self, x: f64) -> PhiGrad {
        let z = (x - self.b) / self.gamma;
        let s = sigmoid(z);
        let sp = s * (1.0 - s);
        let phi = (1.0 - s) + self.c * s;
        // c = 1 - 1/eta, so dc/deta = 1/eta^2
        let dc_deta = 1.0 / (self.eta * self.eta);
        let ds_db = -sp / self.gamma;
        let ds_dgamma = -sp * z / self.gamma;
        let dphi_db = (self.c - 1.0) * ds_db + s * dc_deta * self.deta_db;
        let dphi_dgamma = (self.c - 1.0) * ds_dgamma + s * dc_deta * self.deta_dgamma;
        PhiGrad {
            phi,
            d_b: dphi_db,
            d_rho: dphi_dgamma * self.dgamma_drho,
        }
    }
}

/// Value and parameter partials of one basis function at one point.
#[derive(Debug, Clone, Copy)]
pub struct PhiGrad {
    pub phi: f64,
    pub d_b: f64,
    pub d_rho: f64,
}

/// Main-effect basis function under the uniform reference measure.
pub fn phi_main(x: f64, p: &BasisParam) -> f64 {
    BasisEval::new(p).value(x)
}

/// Main-effect basis function under the empirical measure of `samples`.
pub fn phi_main_empirical(x: f64, p: &BasisParam, samples: &[f64]) -> f64 {
    let gamma = p.gamma();
    let eta = eta_empirical(p.b, gamma, samples);
    let c = -(1.0 - eta) / eta;
    let s = sigmoid((x - p.b) / gamma);
    (1.0 - s) + c * s
}

/// Partials of phi_main w.r.t. (b, rho), matching central finite differences.
pub fn phi_grad(x: f64, p: &BasisParam) -> (f64, f64) {
    let g = BasisEval::new(p).value_grad(x);
    (g.d_b, g.d_rho)
}

/// Tensor-product basis: product of per-feature basis functions.
pub fn phi_tensor(x_subset: &[f64], thetas: &[BasisParam]) -> Result<f64> {
    if x_subset.len() != thetas.len() {
        return Err(Error::ArityMismatch {
            expected: thetas.len(),
            got: x_subset.len(),
        });
    }
    Ok(x_subset
        .iter()
        .zip(thetas.iter())
        .map(|(&x, p)| phi_main(x, p))
        .product())
}

//! Recursive least squares over the 12 template entries of `B_d`, with
//! variable-rate forgetting.
//!
//! The performance variable is the one-step prediction residual
//! `z_k(θ) = y_k − A_d y_{k−1} − Φ(u_{k−1}) θ`. With the regressor being a
//! 12×12 matrix, the gain solves a 12×12 innovation system each step.

use std::collections::VecDeque;

use nalgebra::{Cholesky, SymmetricEigen, Vector4};

use crate::error::RlsError;
use crate::linear_model::{regressor, ThetaVec};
use crate::{Matrix12, Vector12};

/// Variable-rate forgetting parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VrfConfig {
    pub eta: f64,
    /// Short window length [steps].
    pub tau_n: usize,
    /// Long window length [steps].
    pub tau_d: usize,
    /// Floor on the forgetting factor.
    pub lambda_min: f64,
    /// Variance ratio `σ²_short/σ²_long` at or below which no forgetting
    /// occurs. `1` gives the ungated statistic.
    pub activation_ratio: f64,
}

impl VrfConfig {
    pub fn new(eta: f64, tau_n: usize, tau_d: usize) -> Result<Self, RlsError> {
        let cfg = Self {
            eta,
            tau_n,
            tau_d,
            lambda_min: 0.01,
            activation_ratio: 1.0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Gates forgetting on an F-test of the two window variances: the
    /// ratio must exceed the `1 − alpha` quantile of `F(τ_n, τ_d)`.
    /// `alpha = 1` leaves the statistic ungated.
    pub fn with_significance(mut self, alpha: f64) -> Result<Self, RlsError> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(RlsError::InvalidConfig(format!(
                "significance must lie in (0, 1], got {alpha}"
            )));
        }
        self.activation_ratio = if alpha == 1.0 {
            1.0
        } else {
            f_quantile(self.tau_n, self.tau_d, 1.0 - alpha)?
        };
        Ok(self)
    }

    /// Forgetting switched off: `λ ≡ 1`.
    pub fn disabled() -> Self {
        Self {
            eta: 0.0,
            tau_n: 5,
            tau_d: 25,
            lambda_min: 0.01,
            activation_ratio: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), RlsError> {
        if self.tau_n == 0 || self.tau_n >= self.tau_d {
            return Err(RlsError::InvalidConfig(format!(
                "need 0 < tau_n < tau_d, got tau_n = {}, tau_d = {}",
                self.tau_n, self.tau_d
            )));
        }
        if !(self.eta >= 0.0) || !self.eta.is_finite() {
            return Err(RlsError::InvalidConfig(format!(
                "eta must be nonnegative, got {}",
                self.eta
            )));
        }
        if !(self.lambda_min > 0.0 && self.lambda_min < 1.0) {
            return Err(RlsError::InvalidConfig(format!(
                "lambda_min must lie in (0, 1), got {}",
                self.lambda_min
            )));
        }
        if !(self.activation_ratio >= 1.0 && self.activation_ratio.is_finite()) {
            return Err(RlsError::InvalidConfig(format!(
                "activation_ratio must be finite and at least 1, got {}",
                self.activation_ratio
            )));
        }
        Ok(())
    }
}

fn f_quantile(d1: usize, d2: usize, p: f64) -> Result<f64, RlsError> {
    use statrs::distribution::{ContinuousCDF, FisherSnedecor};
    let dist = FisherSnedecor::new(d1 as f64, d2 as f64)
        .map_err(|e| RlsError::InvalidConfig(e.to_string()))?;
    Ok(dist.inverse_cdf(p).max(1.0))
}

/// Bounded history of squared residual norms `‖z_k‖²`, newest last.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResidualWindow {
    values: VecDeque<f64>,
    capacity: usize,
}

impl ResidualWindow {
    pub fn new(capacity: usize) -> Self {
        Self {
            values: VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    pub fn push(&mut self, z: &Vector12) {
        self.push_squared_norm(z.norm_squared());
    }

    pub fn push_squared_norm(&mut self, value: f64) {
        if self.values.len() == self.capacity {
            self.values.pop_front();
        }
        self.values.push_back(value);
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Mean of the newest `n` entries.
    fn recent_mean(&self, n: usize) -> f64 {
        let n = n.min(self.values.len());
        self.values.iter().rev().take(n).sum::<f64>() / n as f64
    }
}

/// Window statistic `√(σ²_short / σ²_long) − 1` when the variance ratio
/// exceeds the activation ratio, zero otherwise.
pub fn vrf_statistic(history: &ResidualWindow, config: &VrfConfig) -> f64 {
    if history.len() < config.tau_d {
        return 0.0;
    }
    let short = history.recent_mean(config.tau_n);
    let long = history.recent_mean(config.tau_d);
    if !(long > 0.0) {
        return 0.0;
    }
    let ratio = short / long;
    if ratio <= config.activation_ratio {
        return 0.0;
    }
    ratio.sqrt() - 1.0
}

/// Forgetting factor `λ = 1 / (1 + η f)`, clamped to `[λ_min, 1]`.
pub fn vrf_lambda(history: &ResidualWindow, config: &VrfConfig) -> f64 {
    if config.eta == 0.0 {
        return 1.0;
    }
    let f = vrf_statistic(history, config);
    (1.0 / (1.0 + config.eta * f)).clamp(config.lambda_min, 1.0)
}

/// One-step prediction residual `y_k − A_d y_{k−1} − Φ(u_{k−1}) θ`.
pub fn performance_variable(
    y_k: &Vector12,
    y_prev: &Vector12,
    u_prev: &Vector4<f64>,
    ad: &Matrix12,
    theta: &ThetaVec,
) -> Vector12 {
    y_k - ad * y_prev - regressor(u_prev) * theta.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct RlsState {
    pub theta: ThetaVec,
    pub p: Matrix12,
    pub lambda: f64,
    pub history: ResidualWindow,
}

/// Diagnostics from one [`RlsState::step`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RlsStepInfo {
    /// Residual at the prior estimate.
    pub z: Vector12,
    pub lambda: f64,
}

impl RlsState {
    pub fn new(theta0: ThetaVec, p0: Matrix12, vrf: &VrfConfig) -> Result<Self, RlsError> {
        vrf.validate()?;
        let state = Self {
            theta: theta0,
            p: p0,
            lambda: 1.0,
            history: ResidualWindow::new(vrf.tau_d),
        };
        state.check_covariance()?;
        Ok(state)
    }

    pub fn with_scaled_identity(
        theta0: ThetaVec,
        p0_scale: f64,
        vrf: &VrfConfig,
    ) -> Result<Self, RlsError> {
        Self::new(theta0, Matrix12::identity() * p0_scale, vrf)
    }

    /// Measures `z`, updates the forgetting factor from the residual history
    /// and applies the recursive update.
    pub fn step(
        &mut self,
        y_k: &Vector12,
        y_prev: &Vector12,
        u_prev: &Vector4<f64>,
        ad: &Matrix12,
        vrf: &VrfConfig,
    ) -> Result<RlsStepInfo, RlsError> {
        let z = performance_variable(y_k, y_prev, u_prev, ad, &self.theta);
        self.history.push(&z);
        let lambda = vrf_lambda(&self.history, vrf);
        self.update(&regressor(u_prev), &z, lambda)?;
        Ok(RlsStepInfo { z, lambda })
    }

    /// Recursive minimizer update for regressor `phi` and prior residual `z`:
    /// `L = PΦᵀ(λI + ΦPΦᵀ)⁻¹`, `θ ← θ + Lz`, `P ← λ⁻¹(P − LΦP)`.
    pub fn update(&mut self, phi: &Matrix12, z: &Vector12, lambda: f64) -> Result<(), RlsError> {
        let p_phi_t = self.p * phi.transpose();
        let innovation = Matrix12::identity() * lambda + phi * p_phi_t;
        let chol = Cholesky::new(innovation).ok_or(RlsError::SingularInnovation)?;
        // L = PΦᵀ S⁻¹, computed as (S⁻¹ ΦP)ᵀ with S symmetric.
        let gain = chol.solve(&p_phi_t.transpose()).transpose();
        self.theta = ThetaVec(self.theta.0 + gain * z);
        let p_next = (self.p - gain * phi * self.p) / lambda;
        self.p = (p_next + p_next.transpose()) * 0.5;
        self.lambda = lambda;
        self.check_covariance()
    }

    pub fn check_covariance(&self) -> Result<(), RlsError> {
        let asymmetry = (self.p - self.p.transpose()).amax();
        let finite = self.p.iter().all(|v| v.is_finite());
        if finite && asymmetry < 1e-10 && Cholesky::new(self.p).is_some() {
            return Ok(());
        }
        let min_eigenvalue = if finite {
            SymmetricEigen::new(self.p).eigenvalues.min()
        } else {
            f64::NAN
        };
        Err(RlsError::CovarianceNotPositiveDefinite {
            min_eigenvalue,
            asymmetry,
        })
    }
}

//! Nonlinear rectenna transfer function.
//!
//! Harvested DC power as a function of the received baseband power `p`:
//!
//! ```text
//! φ̃(p) = [ W0(a·e^a·I0(B·√(2p))) / a − 1 ]² · Is² · RL
//! φ(p)  = min{ φ̃(p), φ̃(A_s²) }
//! ```
//!
//! All powers are in watts. The bracket is evaluated through the offset
//! `W0(·) − a`, which is solved in the log domain, so the model is accurate
//! for tiny inputs and finite arbitrarily deep in saturation.

use serde::{Deserialize, Serialize};

use crate::beam_design::{ChannelPair, Weights};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::specfun;

/// Rectenna circuit constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RectennaParams {
    /// Dimensionless diode constant.
    pub a: f64,
    /// Amplitude scaling, 1/√W.
    pub b: f64,
    /// Reverse saturation current, A.
    pub i_s: f64,
    /// Load resistance, Ω.
    pub r_l: f64,
    /// Input power at which the output saturates, W.
    pub p_sat: f64,
}

impl Default for RectennaParams {
    fn default() -> Self {
        Self { a: 1.29, b: 1.55e3, i_s: 5e-6, r_l: 10e3, p_sat: 25e-6 }
    }
}

impl RectennaParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [("a", self.a), ("b", self.b), ("i_s", self.i_s), ("r_l", self.r_l), ("p_sat", self.p_sat)];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("rectenna.{name} must be positive and finite, got {v}")));
            }
        }
        if self.a > 10.0 {
            return Err(Error::Config(format!("rectenna.a must lie in (0, 10], got {}", self.a)));
        }
        Ok(())
    }

    fn check_power(p: f64) -> Result<()> {
        if p.is_nan() || p < 0.0 {
            return Err(Error::Domain(format!("input power must be nonnegative, got {p}")));
        }
        Ok(())
    }

    fn scale(&self) -> f64 {
        self.i_s * self.i_s * self.r_l
    }

    /// `(x, δ)` with `x = B√(2p)` and `δ = W0(a·e^a·I0(x)) − a`.
    fn offset(&self, p: f64) -> Result<(f64, f64)> {
        let x = self.b * (2.0 * p).sqrt();
        let log_i0 = specfun::bessel_i0_log(x)?;
        Ok((x, specfun::lambert_w0_offset(self.a, log_i0)))
    }

    /// Unclipped harvested power.
    pub fn varphi(&self, p: f64) -> Result<f64> {
        Self::check_power(p)?;
        let (_, delta) = self.offset(p)?;
        let bracket = delta / self.a;
        Ok(bracket * bracket * self.scale())
    }

    /// Saturation level `φ̃(A_s²)`.
    pub fn phi_sat(&self) -> f64 {
        self.varphi(self.p_sat).expect("p_sat validated positive")
    }

    /// Clipped harvested power.
    pub fn phi(&self, p: f64) -> Result<f64> {
        Self::check_power(p)?;
        if p >= self.p_sat {
            return Ok(self.phi_sat());
        }
        self.varphi(p)
    }

    /// Derivative of the unclipped curve, `dφ̃/dp`, including the limit at 0.
    pub fn varphi_prime(&self, p: f64) -> Result<f64> {
        Self::check_power(p)?;
        let (x, delta) = self.offset(p)?;
        let w = self.a + delta;
        // dW/dp = W/(1+W) · I1(x)/(x·I0(x)) · B²
        let dw_dp = w / (1.0 + w) * specfun::bessel_i1_over_x_i0(x)? * self.b * self.b;
        Ok(2.0 * (delta / self.a) * dw_dp / self.a * self.scale())
    }

    /// Derivative of the clipped curve: the left derivative below `p_sat`, 0 at and above it.
    pub fn phi_prime(&self, p: f64) -> Result<f64> {
        Self::check_power(p)?;
        if p >= self.p_sat {
            return Ok(0.0);
        }
        self.varphi_prime(p)
    }
}

/// `ψ(W) = Σ ξ_m φ(g_m W g_mᴴ)` and its gradient `Σ ξ_m φ'(p_m) g_mᴴ g_m`.
pub fn weighted_psi(
    w: &CMat,
    channels: &ChannelPair,
    weights: Weights,
    params: &RectennaParams,
) -> Result<(f64, CMat)> {
    let n = channels.n_t();
    if w.nrows() != n || w.ncols() != n {
        return Err(Error::Contract(format!("W must be {n}x{n}, got {}x{}", w.nrows(), w.ncols())));
    }
    let asym = linalg::hermitian_asymmetry(w);
    if asym > 1e-9 * linalg::max_abs(w).max(1.0) {
        return Err(Error::Contract(format!("W is not Hermitian (asymmetry {asym:e})")));
    }
    let mut value = 0.0;
    let mut grad = CMat::zeros(n, n);
    for (g, xi) in [(&channels.g1, weights.xi1), (&channels.g2, weights.xi2)] {
        let p = linalg::quad_form(g, w).max(0.0);
        value += xi * params.phi(p)?;
        let slope = xi * params.phi_prime(p)?;
        if slope != 0.0 {
            grad += linalg::gram(g) * linalg::c(slope);
        }
    }
    Ok((value, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, CVec};

    /// 60-digit reference, produced by `scripts/eh_oracle.py`.
    #[allow(clippy::excessive_precision)]
    const VARPHI_AT_PSAT: f64 = 7.353_191_743_079_691_253_117e-6;

    fn params() -> RectennaParams {
        RectennaParams::default()
    }

    #[test]
    fn zero_input_gives_zero() {
        assert_eq!(params().varphi(0.0).unwrap(), 0.0);
        assert_eq!(params().phi(0.0).unwrap(), 0.0);
    }

    #[test]
    fn saturation_value_matches_oracle() {
        let v = params().varphi(25e-6).unwrap();
        assert!(((v - VARPHI_AT_PSAT) / VARPHI_AT_PSAT).abs() < 1e-10, "{v:e}");
        assert_eq!(params().phi(100e-6).unwrap(), params().phi(25e-6).unwrap());
        assert_eq!(params().phi(25e-6).unwrap(), params().varphi(25e-6).unwrap());
    }

    #[test]
    fn strictly_between_below_saturation() {
        let p = params();
        let mid = p.varphi(12.5e-6).unwrap();
        assert!(mid > 0.0 && mid < p.varphi(25e-6).unwrap());
    }

    #[test]
    fn negative_power_rejected() {
        assert!(matches!(params().varphi(-1e-9), Err(Error::Domain(_))));
        assert!(params().phi(-1.0).is_err());
        assert!(params().phi_prime(-1.0).is_err());
    }

    #[test]
    fn derivative_points() {
        let p = params();
        assert_eq!(p.phi_prime(25e-6).unwrap(), 0.0);
        assert_eq!(p.phi_prime(1.0).unwrap(), 0.0);
        let d0 = p.phi_prime(0.0).unwrap();
        assert!(d0.is_finite() && d0 >= 0.0);
        let x = 10e-6;
        let h = 1e-10;
        let fd = (p.phi(x + h).unwrap() - p.phi(x - h).unwrap()) / (2.0 * h);
        let an = p.phi_prime(x).unwrap();
        assert!(((fd - an) / an).abs() < 1e-5, "fd {fd:e} analytic {an:e}");
    }

    #[test]
    fn stays_finite_deep_in_saturation() {
        let p = params();
        for &x in &[1e-3, 1.0, 1e3, 1e6] {
            let v = p.varphi(x).unwrap();
            assert!(v.is_finite() && v > p.phi_sat());
            assert!(p.varphi_prime(x).unwrap().is_finite());
        }
    }

    #[test]
    fn validate_rejects_bad_constants() {
        let mut bad = params();
        bad.a = 11.0;
        assert!(bad.validate().is_err());
        bad = params();
        bad.p_sat = 0.0;
        assert!(bad.validate().is_err());
        assert!(params().validate().is_ok());
    }

    fn pair() -> ChannelPair {
        ChannelPair::new(
            CVec::from_vec(vec![c(1e-4), linalg::cx(0.5e-4, 1e-4)]),
            CVec::from_vec(vec![linalg::cx(0.0, -2e-5), c(3e-5)]),
        )
        .unwrap()
    }

    #[test]
    fn psi_at_zero() {
        let ch = pair();
        let wts = Weights::new(0.3).unwrap();
        let (v, g) = weighted_psi(&CMat::zeros(2, 2), &ch, wts, &params()).unwrap();
        assert_eq!(v, 0.0);
        let d0 = params().phi_prime(0.0).unwrap();
        let expect = linalg::gram(&ch.g1) * c(0.3 * d0) + linalg::gram(&ch.g2) * c(0.7 * d0);
        assert!((&g - &expect).norm() <= 1e-12 * expect.norm().max(1e-300));
    }

    #[test]
    fn psi_both_saturated() {
        let ch = pair();
        let w = CMat::identity(2, 2) * c(1e6);
        let (v, g) = weighted_psi(&w, &ch, Weights::new(0.4).unwrap(), &params()).unwrap();
        assert!((v - params().phi_sat()).abs() <= 1e-18);
        assert_eq!(g.norm(), 0.0);
    }

    #[test]
    fn psi_rejects_non_hermitian() {
        let mut w = CMat::zeros(2, 2);
        w[(0, 1)] = c(1.0);
        assert!(matches!(
            weighted_psi(&w, &pair(), Weights::new(0.5).unwrap(), &params()),
            Err(Error::Contract(_))
        ));
    }
}

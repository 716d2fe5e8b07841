//! Beamformer design for a fixed transmit power.
//!
//! `Φ(ν) = max_{‖w‖² = ν} Σ_m ξ_m φ(|g_m w|²)` is approached through the
//! semidefinite relaxation `W = w wᴴ`. The clipped transfer function is split
//! into four saturation regions; on each region the objective is a sum of
//! convex terms and constants, so successive tangent underestimates give a
//! non-decreasing sequence of linear subproblems.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::conic::{self, Feasibility, SatConstraint, SdpProblem, SdpStatus};
use crate::eh_model::RectennaParams;
use crate::error::{Error, Result};
use crate::linalg::{self, c, cvec_serde, cx, CMat, CVec};
use crate::seed;

/// Harvested powers are multiplied by this inside the optimization loop.
pub const OBJECTIVE_SCALE: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelPair {
    #[serde(with = "cvec_serde")]
    pub g1: CVec,
    #[serde(with = "cvec_serde")]
    pub g2: CVec,
}

impl ChannelPair {
    pub fn new(g1: CVec, g2: CVec) -> Result<Self> {
        let pair = Self { g1, g2 };
        pair.validate()?;
        Ok(pair)
    }

    pub fn validate(&self) -> Result<()> {
        if self.g1.is_empty() || self.g1.len() != self.g2.len() {
            return Err(Error::Contract(format!(
                "channel vectors must be non-empty and equally long ({} vs {})",
                self.g1.len(),
                self.g2.len()
            )));
        }
        if self.g1.len() > conic::MAX_DIM {
            return Err(Error::Contract(format!("at most {} antennas are supported", conic::MAX_DIM)));
        }
        for g in [&self.g1, &self.g2] {
            if g.norm() == 0.0 || g.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
                return Err(Error::Contract("channel vectors must be finite and nonzero".into()));
            }
        }
        Ok(())
    }

    pub fn n_t(&self) -> usize {
        self.g1.len()
    }

    pub fn get(&self, m: usize) -> &CVec {
        if m == 0 {
            &self.g1
        } else {
            &self.g2
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub xi1: f64,
    pub xi2: f64,
}

impl Weights {
    pub fn new(xi1: f64) -> Result<Self> {
        Self::pair(xi1, 1.0 - xi1)
    }

    pub fn pair(xi1: f64, xi2: f64) -> Result<Self> {
        let ok = |x: f64| (0.0..=1.0).contains(&x);
        if !ok(xi1) || !ok(xi2) || (xi1 + xi2 - 1.0).abs() > 1e-12 {
            return Err(Error::Contract(format!("weights must lie in [0,1] and sum to 1, got ({xi1}, {xi2})")));
        }
        Ok(Self { xi1, xi2 })
    }

    pub fn get(&self, m: usize) -> f64 {
        if m == 0 {
            self.xi1
        } else {
            self.xi2
        }
    }
}

/// Saturation pattern: `true` at index `m` forces `|g_m w|² ≥ p_sat`,
/// `false` forces `≤ p_sat`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SatRegion(pub [bool; 2]);

impl SatRegion {
    pub const ALL: [SatRegion; 4] =
        [SatRegion([false, false]), SatRegion([false, true]), SatRegion([true, false]), SatRegion([true, true])];

    pub fn label(&self) -> (u8, u8) {
        (self.0[0] as u8, self.0[1] as u8)
    }

    fn constraints(&self, channels: &ChannelPair, p_sat: f64) -> Vec<SatConstraint> {
        (0..2)
            .map(|m| {
                let g = channels.get(m).clone();
                if self.0[m] {
                    SatConstraint::lower(g, p_sat)
                } else {
                    SatConstraint::upper(g, p_sat)
                }
            })
            .collect()
    }
}

impl std::fmt::Display for SatRegion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let (i, j) = self.label();
        write!(f, "({i},{j})")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaOptions {
    /// Stopping threshold on successive objective values, in µW.
    pub epsilon: f64,
    pub max_iter: usize,
}

impl Default for ScaOptions {
    fn default() -> Self {
        Self { epsilon: 1e-3, max_iter: 100 }
    }
}

impl ScaOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) || self.max_iter == 0 {
            return Err(Error::Config(format!(
                "sca.epsilon must be positive and sca.max_iter at least 1, got {} and {}",
                self.epsilon, self.max_iter
            )));
        }
        Ok(())
    }
}

/// Finished SCA run on one region.
#[derive(Debug, Clone)]
pub struct ScaRun {
    pub w: CMat,
    /// `ψ(W)` of the returned iterate, watts.
    pub value: f64,
    /// `ψ(W⁽ᵏ⁾)` for `k = 0, 1, …`, watts.
    pub trace: Vec<f64>,
    pub converged: bool,
    pub raw_eig_ratio: f64,
    /// Decrease of a subproblem step that was discarded, watts (0 if none).
    /// Inexact subproblem solves can return a point marginally below the
    /// current iterate; the loop then stops at the current iterate.
    pub rejected_drop: f64,
}

impl ScaRun {
    pub fn iterations(&self) -> usize {
        self.trace.len() - 1
    }

    /// Largest decrease between consecutive iterates, watts (0 if monotone).
    pub fn max_drop(&self) -> f64 {
        self.trace.windows(2).map(|p| p[0] - p[1]).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub enum RegionOutcome {
    Solved(ScaRun),
    Infeasible,
    Failed(String),
}

/// `Ψ(w) = Σ_m ξ_m φ(|g_m w|²)`.
pub fn psi_of_w(w: &CVec, channels: &ChannelPair, weights: Weights, params: &RectennaParams) -> Result<f64> {
    if w.len() != channels.n_t() {
        return Err(Error::Contract(format!("beamformer has length {}, expected {}", w.len(), channels.n_t())));
    }
    let mut total = 0.0;
    for m in 0..2 {
        total += weights.get(m) * params.phi(linalg::received_power(channels.get(m), w))?;
    }
    Ok(total)
}

fn psi_of_matrix(w: &CMat, channels: &ChannelPair, weights: Weights, params: &RectennaParams) -> Result<f64> {
    let mut total = 0.0;
    for m in 0..2 {
        total += weights.get(m) * params.phi(linalg::quad_form(channels.get(m), w).max(0.0))?;
    }
    Ok(total)
}

/// Gradient of the region's objective: saturated nodes contribute constants,
/// unsaturated ones the tangent slope of the unclipped curve. At the
/// boundary this is the left derivative, which keeps the tangent an
/// underestimate over the whole region.
fn region_gradient(
    region: SatRegion,
    w: &CMat,
    channels: &ChannelPair,
    weights: Weights,
    params: &RectennaParams,
) -> Result<CMat> {
    let n = channels.n_t();
    let mut grad = CMat::zeros(n, n);
    for m in 0..2 {
        if region.0[m] || weights.get(m) == 0.0 {
            continue;
        }
        let g = channels.get(m);
        let q = linalg::quad_form(g, w).clamp(0.0, params.p_sat);
        grad += linalg::gram(g) * c(weights.get(m) * params.varphi_prime(q)?);
    }
    Ok(grad)
}

fn random_start(n: usize, nu: f64, seed: u64) -> CMat {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = CVec::from_fn(n, |_, _| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        cx(re, im)
    });
    linalg::gram(&v.map(|z| z.conj())) * c(nu / v.norm_squared())
}

/// Smallest `θ ∈ [0,1]` with `(1−θ)·W_rand + θ·witness` inside every
/// constraint; `None` if the witness itself does not qualify.
fn mixing_weight(rand: &CMat, witness: &CMat, constraints: &[SatConstraint]) -> Option<f64> {
    let mut theta: f64 = 0.0;
    for con in constraints {
        let v0 = con.violation(rand);
        if v0 <= 0.0 {
            continue;
        }
        let v1 = con.violation(witness);
        if v1 >= 0.0 {
            // lower bounds need strict room; upper bounds allow equality
            if !(v1 == 0.0 && con.sense == conic::Sense::Upper) {
                return None;
            }
        }
        theta = theta.max(v0 / (v0 - v1));
    }
    Some(theta.min(1.0))
}

/// Runs the SCA loop on one saturation region from a seeded random start.
pub fn sca_maximize_region(
    region: SatRegion,
    nu: f64,
    channels: &ChannelPair,
    weights: Weights,
    params: &RectennaParams,
    options: &ScaOptions,
    seed: u64,
) -> Result<RegionOutcome> {
    if !(nu.is_finite() && nu >= 0.0) {
        return Err(Error::Domain(format!("transmit power must be finite and >= 0, got {nu}")));
    }
    channels.validate()?;
    let n = channels.n_t();
    let constraints = region.constraints(channels, params.p_sat);
    let probe = SdpProblem { objective: CMat::zeros(n, n), trace_cap: nu, sat_constraints: constraints.clone() };
    let witness = match conic::feasibility_check(&probe) {
        Ok(Feasibility::Feasible { witness }) => witness,
        Ok(Feasibility::Infeasible) => return Ok(RegionOutcome::Infeasible),
        Err(Error::Solver(msg)) => return Ok(RegionOutcome::Failed(msg)),
        Err(e) => return Err(e),
    };

    let start = random_start(n, nu, seed);
    let Some(theta) = mixing_weight(&start, &witness, &constraints) else {
        return Ok(RegionOutcome::Failed("could not place the random start inside the region".into()));
    };
    let mut w = linalg::hermitize(&(start * c(1.0 - theta) + &witness * c(theta)));
    let mut h = psi_of_matrix(&w, channels, weights, params)?;
    let mut trace = vec![h];
    let mut converged = false;
    let mut raw_eig_ratio = 0.0;
    let mut rejected_drop = 0.0;

    for _ in 0..options.max_iter {
        let grad = region_gradient(region, &w, channels, weights, params)? * c(OBJECTIVE_SCALE);
        let problem = SdpProblem { objective: grad, trace_cap: nu, sat_constraints: constraints.clone() };
        let sol = conic::solve_linear_sdp(&problem)?;
        match sol.status {
            SdpStatus::Optimal => {}
            SdpStatus::Infeasible => return Ok(RegionOutcome::Infeasible),
            SdpStatus::NumericalFailure => {
                return Ok(RegionOutcome::Failed(format!(
                    "subproblem failed at iteration {} (residual {:e})",
                    trace.len(),
                    sol.kkt_residual
                )))
            }
        }
        let next = psi_of_matrix(&sol.w, channels, weights, params)?;
        if next < h {
            rejected_drop = h - next;
            converged = (h - next) * OBJECTIVE_SCALE <= options.epsilon;
            break;
        }
        w = sol.w;
        raw_eig_ratio = sol.raw_eig_ratio;
        trace.push(next);
        let step = (next - h).abs() * OBJECTIVE_SCALE;
        h = next;
        if step <= options.epsilon {
            converged = true;
            break;
        }
    }
    Ok(RegionOutcome::Solved(ScaRun { w, value: h, trace, converged, raw_eig_ratio, rejected_drop }))
}

/// Best beamformer found for transmit power `ν`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhiPoint {
    pub nu: f64,
    /// `Ψ(w)`, watts.
    pub value: f64,
    #[serde(with = "cvec_serde")]
    pub w: CVec,
    pub region: (u8, u8),
    /// `λ₂/λ₁` of the winning relaxed solution.
    pub eig_ratio: f64,
    /// Same ratio before rank reduction inside the subproblem solver.
    pub raw_eig_ratio: f64,
    /// `ψ(W*)` of the winning relaxed solution.
    pub relaxed_value: f64,
    /// `Ψ` of `√Tr(W*)` times the dominant eigenvector.
    pub extracted_value: f64,
    pub sca_iterations: usize,
    /// Per-region `ψ` sequences, in region order; empty for skipped regions.
    #[serde(skip)]
    pub traces: Vec<Vec<f64>>,
    pub regions_solved: usize,
    pub restarts: usize,
    /// Subproblem steps discarded for lowering `ψ`, and the largest such drop.
    #[serde(default)]
    pub rejected_steps: usize,
    #[serde(default)]
    pub max_rejected_drop: f64,
    /// Replaced by the previous grid point's beamformer scaled to `ν`.
    #[serde(default)]
    pub repaired: bool,
}

/// Runs all four regions, keeps the best relaxed solution and extracts a
/// beamformer using the full power `ν`.
pub fn compute_phi_point(
    nu: f64,
    channels: &ChannelPair,
    weights: Weights,
    params: &RectennaParams,
    options: &ScaOptions,
    seed: u64,
) -> Result<PhiPoint> {
    if !(nu.is_finite() && nu >= 0.0) {
        return Err(Error::Domain(format!("transmit power must be finite and >= 0, got {nu}")));
    }
    let n = channels.n_t();
    let mut best: Option<(SatRegion, ScaRun)> = None;
    let mut traces = Vec::with_capacity(4);
    let mut iterations = 0;
    let mut solved = 0;
    let mut restarts = 0;
    let (mut rejected_steps, mut max_rejected_drop) = (0, 0.0f64);

    for (k, region) in SatRegion::ALL.into_iter().enumerate() {
        let mut outcome =
            sca_maximize_region(region, nu, channels, weights, params, options, seed::mix(seed, k as u64))?;
        if let RegionOutcome::Failed(ref why) = outcome {
            log::warn!("region {region} at nu={nu}: {why}; restarting");
            restarts += 1;
            outcome =
                sca_maximize_region(region, nu, channels, weights, params, options, seed::mix(seed, k as u64 + 4))?;
        }
        match outcome {
            RegionOutcome::Solved(run) => {
                solved += 1;
                iterations += run.iterations();
                if run.rejected_drop > 0.0 {
                    rejected_steps += 1;
                    max_rejected_drop = max_rejected_drop.max(run.rejected_drop);
                }
                traces.push(run.trace.clone());
                if best.as_ref().is_none_or(|(_, b)| run.value > b.value) {
                    best = Some((region, run));
                }
            }
            RegionOutcome::Infeasible => traces.push(Vec::new()),
            RegionOutcome::Failed(why) => {
                log::warn!("region {region} at nu={nu} skipped: {why}");
                traces.push(Vec::new());
            }
        }
    }
    let Some((region, run)) = best else {
        return Err(Error::Solver(format!("no saturation region could be solved at nu={nu}")));
    };

    let (vals, vecs) = linalg::eigh_desc(&run.w);
    let eig_ratio = if n < 2 || vals[0] <= 0.0 { 0.0 } else { vals[1].max(0.0) / vals[0] };
    let direction = if vals[0] > 0.0 {
        linalg::normalize_phase(&vecs[0])
    } else {
        // W* = 0: any direction gives zero harvested power at ν = 0.
        CVec::from_fn(n, |i, _| if i == 0 { c(1.0) } else { c(0.0) })
    };
    let extracted = &direction * c(linalg::trace_re(&run.w).max(0.0).sqrt());
    let extracted_value = psi_of_w(&extracted, channels, weights, params)?;
    let w = &direction * c(nu.sqrt());
    let value = psi_of_w(&w, channels, weights, params)?;

    Ok(PhiPoint {
        nu,
        value,
        w,
        region: region.label(),
        eig_ratio,
        raw_eig_ratio: run.raw_eig_ratio,
        relaxed_value: run.value,
        extracted_value,
        sca_iterations: iterations,
        traces,
        regions_solved: solved,
        restarts,
        rejected_steps,
        max_rejected_drop,
        repaired: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> RectennaParams {
        RectennaParams::default()
    }

    fn channels() -> ChannelPair {
        ChannelPair::new(
            CVec::from_vec(vec![cx(2.0e-4, 1.0e-4), cx(-1.0e-4, 0.5e-4)]),
            CVec::from_vec(vec![cx(0.3e-4, -0.2e-4), cx(0.4e-4, 0.1e-4)]),
        )
        .unwrap()
    }

    #[test]
    fn weights_validation() {
        assert!(Weights::new(0.25).is_ok());
        assert!(Weights::new(1.5).is_err());
        assert!(Weights::pair(0.5, 0.6).is_err());
        assert_eq!(Weights::new(1.0).unwrap().xi2, 0.0);
    }

    #[test]
    fn channel_validation() {
        let g = CVec::from_vec(vec![c(1.0)]);
        assert!(ChannelPair::new(g.clone(), CVec::zeros(1)).is_err());
        assert!(ChannelPair::new(g.clone(), CVec::from_vec(vec![c(1.0), c(1.0)])).is_err());
        assert!(ChannelPair::new(g.clone(), g).is_ok());
    }

    #[test]
    fn psi_examples() {
        let ch = channels();
        let wts = Weights::new(0.4).unwrap();
        assert_eq!(psi_of_w(&CVec::zeros(2), &ch, wts, &params()).unwrap(), 0.0);
        let big = CVec::from_vec(vec![c(1e4), c(0.0)]);
        let v = psi_of_w(&big, &ch, wts, &params()).unwrap();
        assert!((v - params().phi_sat()).abs() < 1e-18);
        // matched filter toward node 1 with ξ = (1, 0)
        let nu: f64 = 50.0;
        let mrt = ch.g1.map(|z| z.conj()) * c(nu.sqrt() / ch.g1.norm());
        let v = psi_of_w(&mrt, &ch, Weights::new(1.0).unwrap(), &params()).unwrap();
        let expect = params().phi(nu * ch.g1.norm_squared()).unwrap();
        assert!(((v - expect) / expect).abs() < 1e-12);
    }

    #[test]
    fn zero_power_region() {
        let out = sca_maximize_region(
            SatRegion([false, false]),
            0.0,
            &channels(),
            Weights::new(0.5).unwrap(),
            &params(),
            &ScaOptions::default(),
            1,
        )
        .unwrap();
        match out {
            RegionOutcome::Solved(run) => {
                assert_eq!(run.value, 0.0);
                assert_eq!(run.w.norm(), 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn low_power_cannot_saturate() {
        let out = sca_maximize_region(
            SatRegion([true, true]),
            1.0,
            &channels(),
            Weights::new(0.5).unwrap(),
            &params(),
            &ScaOptions::default(),
            1,
        )
        .unwrap();
        assert!(matches!(out, RegionOutcome::Infeasible));
    }

    #[test]
    fn sca_sequence_non_decreasing() {
        let ch = channels();
        for (k, region) in SatRegion::ALL.into_iter().enumerate() {
            let out = sca_maximize_region(region, 800.0, &ch, Weights::new(0.5).unwrap(), &params(), &ScaOptions::default(), k as u64)
                .unwrap();
            if let RegionOutcome::Solved(run) = out {
                assert!(run.max_drop() <= 1e-12, "{region}: {:?}", run.trace);
                assert!(run.iterations() >= 1);
            }
        }
    }

    #[test]
    fn single_antenna_matches_scalar_formula() {
        let ch = ChannelPair::new(CVec::from_vec(vec![cx(1e-4, 2e-4)]), CVec::from_vec(vec![c(-1.2e-4)])).unwrap();
        let wts = Weights::new(0.3).unwrap();
        let nu = 400.0;
        let pt = compute_phi_point(nu, &ch, wts, &params(), &ScaOptions::default(), 9).unwrap();
        let expect = 0.3 * params().phi(ch.g1.norm_squared() * nu).unwrap()
            + 0.7 * params().phi(ch.g2.norm_squared() * nu).unwrap();
        assert!((pt.value - expect).abs() <= 1e-12 * expect);
        assert!((pt.w[0].re - nu.sqrt()).abs() < 1e-9 && pt.w[0].im == 0.0);
    }

    #[test]
    fn phi_point_invariants() {
        let ch = channels();
        let wts = Weights::new(0.6).unwrap();
        for &nu in &[0.0, 10.0, 300.0, 5000.0] {
            let pt = compute_phi_point(nu, &ch, wts, &params(), &ScaOptions::default(), 3).unwrap();
            assert!((pt.w.norm_squared() - nu).abs() <= 1e-8 * nu.max(1.0));
            let again = psi_of_w(&pt.w, &ch, wts, &params()).unwrap();
            assert!((again - pt.value).abs() <= 1e-9);
            assert!(pt.value <= params().phi_sat() + 1e-18);
            assert!(pt.extracted_value <= pt.relaxed_value + 1e-6);
            assert!(pt.value >= pt.extracted_value);
        }
    }

    #[test]
    fn saturating_both_nodes_reaches_ceiling() {
        let ch = channels();
        // constructed point: split power over the two matched filters
        let nu1 = 2.0 * params().p_sat / ch.g1.norm_squared();
        let nu2 = 2.0 * params().p_sat / ch.g2.norm_squared();
        let w = linalg::gram(&ch.g1) * c(nu1 / ch.g1.norm_squared()) + linalg::gram(&ch.g2) * c(nu2 / ch.g2.norm_squared());
        let nu = linalg::trace_re(&w);
        assert!(linalg::quad_form(&ch.g1, &w) >= params().p_sat);
        assert!(linalg::quad_form(&ch.g2, &w) >= params().p_sat);
        let pt = compute_phi_point(nu, &ch, Weights::new(0.5).unwrap(), &params(), &ScaOptions::default(), 5).unwrap();
        assert!((pt.value - params().phi_sat()).abs() <= 1e-9 * params().phi_sat(), "{}", pt.value);
    }
}

//! Transmit-power curve, two-point policy, baselines and the weight sweep
//! that traces the harvested-power region.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beam_design::{self, ChannelPair, PhiPoint, ScaOptions, Weights};
use crate::channel::{self, ChannelConfig};
use crate::eh_model::RectennaParams;
use crate::error::{Error, Result};
use crate::linalg::{self, c, cvec_serde, CMat, CVec};
use crate::seed;
use crate::two_point::{self, SampledCurve};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Grid step, W.
    pub delta_rho: f64,
    /// Index of the last nominal grid point.
    pub n_rho: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { delta_rho: 0.1, n_rho: 1000 }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta_rho.is_finite() && self.delta_rho > 0.0) || self.n_rho == 0 {
            return Err(Error::Config(format!(
                "grid needs delta_rho > 0 and n_rho >= 1, got {} and {}",
                self.delta_rho, self.n_rho
            )));
        }
        Ok(())
    }

    pub fn power(&self, j: usize) -> f64 {
        j as f64 * self.delta_rho
    }

    /// Largest nominal grid power.
    pub fn last(&self) -> f64 {
        self.power(self.n_rho)
    }

    /// Largest index the curve may be extended to while chasing saturation.
    pub fn hard_cap(&self) -> usize {
        4 * self.n_rho
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhiCurve {
    pub grid: Vec<f64>,
    pub points: Vec<PhiPoint>,
    /// Whether the last value reached the saturation ceiling.
    pub saturated: bool,
    /// Grid points whose solver output was replaced by the scaled beamformer
    /// of the previous point.
    pub repairs: usize,
}

impl PhiCurve {
    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.value).collect()
    }

    pub fn sampled(&self) -> Result<SampledCurve> {
        SampledCurve::new(self.grid.clone(), self.values())
    }

    pub fn index_of(&self, nu: f64) -> Option<usize> {
        let tol = 1e-12 * nu.abs().max(1.0);
        self.grid.iter().position(|&g| (g - nu).abs() <= tol)
    }
}

fn reaches_ceiling(value: f64, params: &RectennaParams) -> bool {
    let sat = params.phi_sat();
    value >= sat - 1e-9 * sat
}

fn region_of(w: &CVec, channels: &ChannelPair, params: &RectennaParams) -> (u8, u8) {
    let sat = |m: usize| (linalg::received_power(channels.get(m), w) >= params.p_sat) as u8;
    (sat(0), sat(1))
}

/// Samples `Φ` on `ρ_j = jΔ_ρ`, extending past `N_ρ` until the ceiling is
/// reached or the hard cap is hit.
pub fn build_phi_curve(
    channels: &ChannelPair,
    weights: Weights,
    params: &RectennaParams,
    grid: &GridSpec,
    sca: &ScaOptions,
    seed: u64,
) -> Result<PhiCurve> {
    grid.validate()?;
    params.validate()?;
    sca.validate()?;
    let solve = |j: usize| beam_design::compute_phi_point(grid.power(j), channels, weights, params, sca, seed::mix(seed, j as u64));

    let mut points: Vec<PhiPoint> = (0..=grid.n_rho).into_par_iter().map(solve).collect::<Result<_>>()?;
    repair_monotone(&mut points, 1, channels, weights, params)?;
    let mut repairs = count_repairs(&points);
    while !reaches_ceiling(points.last().unwrap().value, params) && points.len() <= grid.hard_cap() {
        let start = points.len();
        let end = (start + grid.n_rho).min(grid.hard_cap() + 1);
        let more: Vec<PhiPoint> = (start..end).into_par_iter().map(solve).collect::<Result<_>>()?;
        points.extend(more);
        repair_monotone(&mut points, start, channels, weights, params)?;
        repairs = count_repairs(&points);
        if let Some(k) = points[start..].iter().position(|p| reaches_ceiling(p.value, params)) {
            points.truncate(start + k + 1);
        }
    }
    let saturated = reaches_ceiling(points.last().unwrap().value, params);
    if !saturated {
        log::warn!(
            "curve did not saturate by rho={} W (last value {:e} W, ceiling {:e} W)",
            grid.power(points.len() - 1),
            points.last().unwrap().value,
            params.phi_sat()
        );
    }
    let grid_powers = (0..points.len()).map(|j| grid.power(j)).collect();
    Ok(PhiCurve { grid: grid_powers, points, saturated, repairs })
}

fn count_repairs(points: &[PhiPoint]) -> usize {
    points.iter().filter(|p| p.repaired).count()
}

/// `Φ` is non-decreasing, and scaling the previous beamformer up to the
/// current power is a feasible candidate. When that candidate beats the
/// solver output it replaces it.
/// Relative gain below which a rescaled earlier beamformer does not replace a point.
const REPAIR_MARGIN: f64 = 1e-12;

fn repair_monotone(
    points: &mut [PhiPoint],
    from: usize,
    channels: &ChannelPair,
    weights: Weights,
    params: &RectennaParams,
) -> Result<()> {
    for j in from.max(1)..points.len() {
        let prev = &points[j - 1];
        if prev.nu <= 0.0 {
            continue;
        }
        let cand = linalg::normalize_phase(&prev.w) * c(points[j].nu.sqrt());
        let value = beam_design::psi_of_w(&cand, channels, weights, params)?;
        // ignore rounding-level gains
        if value > points[j].value + REPAIR_MARGIN * params.phi_sat() {
            let eig_ratio = prev.eig_ratio;
            let region = region_of(&cand, channels, params);
            let pt = &mut points[j];
            pt.w = cand;
            pt.value = value;
            pt.region = region;
            pt.eig_ratio = eig_ratio;
            pt.repaired = true;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoPointPolicy {
    #[serde(with = "cvec_serde")]
    pub w1: CVec,
    #[serde(with = "cvec_serde")]
    pub w2: CVec,
    /// Probability of `w1`.
    pub beta: f64,
    pub nu1: f64,
    pub nu2: f64,
    pub region1: (u8, u8),
    pub region2: (u8, u8),
    pub eig_ratio1: f64,
    pub eig_ratio2: f64,
}

impl TwoPointPolicy {
    pub fn single(point: &PhiPoint) -> Self {
        Self {
            w1: point.w.clone(),
            w2: point.w.clone(),
            beta: 1.0,
            nu1: point.nu,
            nu2: point.nu,
            region1: point.region,
            region2: point.region,
            eig_ratio1: point.eig_ratio,
            eig_ratio2: point.eig_ratio,
        }
    }

    pub fn mean_power(&self) -> f64 {
        self.beta * self.nu1 + (1.0 - self.beta) * self.nu2
    }
}

/// Two-point transmit pdf for the average-power budget `p_x`.
pub fn solve_policy(curve: &PhiCurve, p_x: f64) -> Result<TwoPointPolicy> {
    let mass = two_point::solve_two_point(&curve.sampled()?, p_x)?;
    let (a, b) = (&curve.points[mass.i1], &curve.points[mass.i2]);
    Ok(TwoPointPolicy {
        w1: a.w.clone(),
        w2: b.w.clone(),
        beta: mass.beta,
        nu1: mass.nu1,
        nu2: mass.nu2,
        region1: a.region,
        region2: b.region,
        eig_ratio1: a.eig_ratio,
        eig_ratio2: b.eig_ratio,
    })
}

/// Per-node average harvested power of a two-point policy.
pub fn average_powers(policy: &TwoPointPolicy, channels: &ChannelPair, params: &RectennaParams) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&policy.beta) {
        return Err(Error::Contract(format!("beta must lie in [0,1], got {}", policy.beta)));
    }
    let mut e = [0.0; 2];
    for (m, slot) in e.iter_mut().enumerate() {
        let g = channels.get(m);
        let f1 = params.phi(linalg::received_power(g, &policy.w1))?;
        let f2 = params.phi(linalg::received_power(g, &policy.w2))?;
        *slot = policy.beta * f1 + (1.0 - policy.beta) * f2;
    }
    Ok((e[0], e[1]))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegionPoint {
    pub xi1: f64,
    pub e1: f64,
    pub e2: f64,
    pub policy: TwoPointPolicy,
}

impl RegionPoint {
    fn new(xi1: f64, policy: TwoPointPolicy, channels: &ChannelPair, params: &RectennaParams) -> Result<Self> {
        let (e1, e2) = average_powers(&policy, channels, params)?;
        Ok(Self { xi1, e1, e2, policy })
    }

    pub fn weighted(&self) -> f64 {
        self.xi1 * self.e1 + (1.0 - self.xi1) * self.e2
    }
}

fn check_budget(p_x: f64) -> Result<()> {
    if !(p_x.is_finite() && p_x > 0.0) {
        return Err(Error::Domain(format!("power budget must be positive, got {p_x}")));
    }
    Ok(())
}

/// Full power along the dominant eigenvector of `ξ1 g1ᴴg1 + ξ2 g2ᴴg2`.
pub fn baseline_linear_eh(
    channels: &ChannelPair,
    weights: Weights,
    params: &RectennaParams,
    p_x: f64,
) -> Result<RegionPoint> {
    check_budget(p_x)?;
    let n = channels.n_t();
    let mut m = CMat::zeros(n, n);
    for k in 0..2 {
        m += linalg::gram(channels.get(k)) * c(weights.get(k));
    }
    let (_, vecs) = linalg::eigh_desc(&m);
    let w = linalg::normalize_phase(&vecs[0]) * c(p_x.sqrt());
    let region = region_of(&w, channels, params);
    let point = PhiPoint {
        nu: p_x,
        value: beam_design::psi_of_w(&w, channels, weights, params)?,
        w,
        region,
        eig_ratio: 0.0,
        raw_eig_ratio: 0.0,
        relaxed_value: f64::NAN,
        extracted_value: f64::NAN,
        sca_iterations: 0,
        traces: Vec::new(),
        regions_solved: 0,
        restarts: 0,
        rejected_steps: 0,
        max_rejected_drop: 0.0,
        repaired: false,
    };
    RegionPoint::new(weights.xi1, TwoPointPolicy::single(&point), channels, params)
}

/// One beamformer designed for exactly `p_x`, used with probability 1. The
/// curve point at `p_x` is reused when `p_x` is on the grid.
pub fn baseline_single_beam(
    curve: &PhiCurve,
    channels: &ChannelPair,
    weights: Weights,
    params: &RectennaParams,
    sca: &ScaOptions,
    p_x: f64,
    seed: u64,
) -> Result<RegionPoint> {
    check_budget(p_x)?;
    let point = match curve.index_of(p_x) {
        Some(j) => curve.points[j].clone(),
        None => beam_design::compute_phi_point(p_x, channels, weights, params, sca, seed::mix(seed, u64::MAX))?,
    };
    RegionPoint::new(weights.xi1, TwoPointPolicy::single(&point), channels, params)
}

// ── Sweep ───────────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Proposed,
    BaselineLinear,
    BaselineSingleBeam,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Proposed, Scheme::BaselineLinear, Scheme::BaselineSingleBeam];

    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::BaselineLinear => "baseline_linear",
            Scheme::BaselineSingleBeam => "baseline_single_beam",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub params: RectennaParams,
    pub channel: ChannelConfig,
    pub grid: GridSpec,
    pub sca: ScaOptions,
    pub weights: Vec<f64>,
    pub n_realizations: usize,
    pub seed: u64,
}

impl SweepConfig {
    pub fn validate(&self, p_x: &[f64]) -> Result<()> {
        self.params.validate()?;
        self.channel.validate()?;
        self.grid.validate()?;
        self.sca.validate()?;
        if self.n_realizations == 0 {
            return Err(Error::Config("n_realizations must be at least 1".into()));
        }
        for &xi in &self.weights {
            Weights::new(xi)?;
        }
        for &p in p_x {
            check_budget(p)?;
            if p > self.grid.last() + 1e-12 {
                return Err(Error::Range(format!("p_x = {p} W lies beyond the grid end {} W", self.grid.last())));
            }
        }
        Ok(())
    }
}

/// Curve statistics kept per cell.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CurveDiagnostics {
    pub n_points: usize,
    pub last_power: f64,
    pub saturated: bool,
    pub repairs: usize,
    pub sca_runs: usize,
    pub sca_iterations: usize,
    /// Largest single-step decrease of any SCA sequence, watts.
    pub sca_max_drop: f64,
    pub restarts: usize,
    /// SCA steps discarded because the subproblem solution lowered `ψ`.
    pub sca_rejected_steps: usize,
    pub sca_max_rejected_drop: f64,
    /// `λ₂/λ₁` of every winning relaxed solution.
    #[serde(skip)]
    pub eig_ratios: Vec<f64>,
    #[serde(skip)]
    pub raw_eig_ratios: Vec<f64>,
    /// Largest gap `Ψ(extracted) − ψ(W*)`, watts.
    pub max_extraction_excess: f64,
}

impl CurveDiagnostics {
    fn from_curve(curve: &PhiCurve) -> Self {
        let mut d = Self {
            n_points: curve.points.len(),
            last_power: *curve.grid.last().unwrap(),
            saturated: curve.saturated,
            repairs: curve.repairs,
            max_extraction_excess: f64::NEG_INFINITY,
            ..Default::default()
        };
        for p in &curve.points {
            for t in p.traces.iter().filter(|t| !t.is_empty()) {
                d.sca_runs += 1;
                d.sca_iterations += t.len() - 1;
                let drop = t.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max);
                d.sca_max_drop = d.sca_max_drop.max(drop);
            }
            d.restarts += p.restarts;
            d.sca_rejected_steps += p.rejected_steps;
            d.sca_max_rejected_drop = d.sca_max_rejected_drop.max(p.max_rejected_drop);
            if p.traces.is_empty() {
                continue;
            }
            d.eig_ratios.push(p.eig_ratio);
            d.raw_eig_ratios.push(p.raw_eig_ratio);
            d.max_extraction_excess = d.max_extraction_excess.max(p.extracted_value - p.relaxed_value);
        }
        if !d.max_extraction_excess.is_finite() {
            d.max_extraction_excess = 0.0;
        }
        d
    }
}

/// Outcome of one (weight, realization) cell at every requested budget.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellRecord {
    pub xi1: f64,
    pub realization: u64,
    /// One entry per budget, in the order given to [`sweep_region`].
    pub by_budget: Vec<CellSchemes>,
    pub diagnostics: CurveDiagnostics,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellSchemes {
    pub p_x: f64,
    pub proposed: RegionPoint,
    pub baseline_linear: RegionPoint,
    pub baseline_single_beam: RegionPoint,
}

impl CellSchemes {
    pub fn get(&self, scheme: Scheme) -> &RegionPoint {
        match scheme {
            Scheme::Proposed => &self.proposed,
            Scheme::BaselineLinear => &self.baseline_linear,
            Scheme::BaselineSingleBeam => &self.baseline_single_beam,
        }
    }
}

/// Realization-averaged powers for one (scheme, weight).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionRow {
    pub scheme: Scheme,
    pub xi1: f64,
    pub e1: f64,
    pub e2: f64,
    pub n_ok: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    pub p_x: Vec<f64>,
    /// `rows[k]` holds the averaged rows for `p_x[k]`, sorted by scheme then weight.
    pub rows: Vec<Vec<RegionRow>>,
    pub cells: Vec<CellRecord>,
    pub failures: Vec<String>,
}

/// Seed for the solver work of one cell.
pub fn cell_seed(seed: u64, xi1: f64, realization: u64) -> u64 {
    seed::mix(seed::mix(seed, realization), xi1.to_bits())
}

pub fn solve_cell(config: &SweepConfig, xi1: f64, realization: u64, p_x: &[f64]) -> Result<CellRecord> {
    let weights = Weights::new(xi1)?;
    let channels = channel::draw_channel_pair(&config.channel, realization)?;
    let seed = cell_seed(config.seed, xi1, realization);
    let curve = build_phi_curve(&channels, weights, &config.params, &config.grid, &config.sca, seed)?;
    let mut by_budget = Vec::with_capacity(p_x.len());
    for &p in p_x {
        let policy = solve_policy(&curve, p)?;
        let proposed = RegionPoint::new(xi1, policy, &channels, &config.params)?;
        let baseline_linear = baseline_linear_eh(&channels, weights, &config.params, p)?;
        let baseline_single_beam =
            baseline_single_beam(&curve, &channels, weights, &config.params, &config.sca, p, seed)?;
        by_budget.push(CellSchemes { p_x: p, proposed, baseline_linear, baseline_single_beam });
    }
    let diagnostics = CurveDiagnostics::from_curve(&curve);
    log::info!(
        "cell xi1={xi1} r={realization}: {} grid points, {} SCA iterations, last region {:?}",
        diagnostics.n_points,
        diagnostics.sca_iterations,
        curve.points.last().map(|p| p.region).unwrap_or_default()
    );
    Ok(CellRecord { xi1, realization, by_budget, diagnostics })
}

/// Runs every (weight, realization) cell and averages per scheme and weight.
/// One `Φ` curve per cell serves all budgets in `p_x`.
pub fn sweep_region(config: &SweepConfig, p_x: &[f64]) -> Result<SweepResult> {
    config.validate(p_x)?;
    let jobs: Vec<(f64, u64)> = config
        .weights
        .iter()
        .flat_map(|&xi| (0..config.n_realizations as u64).map(move |r| (xi, r)))
        .collect();
    let outcomes: Vec<(f64, u64, Result<CellRecord>)> =
        jobs.into_par_iter().map(|(xi, r)| (xi, r, solve_cell(config, xi, r, p_x))).collect();

    let mut cells = Vec::new();
    let mut failures = Vec::new();
    for (xi, r, out) in outcomes {
        match out {
            Ok(cell) => cells.push(cell),
            Err(e) => {
                log::warn!("cell xi1={xi} realization={r} failed: {e}");
                failures.push(format!("xi1={xi} realization={r}: {e}"));
            }
        }
    }

    let mut rows = Vec::with_capacity(p_x.len());
    for k in 0..p_x.len() {
        let mut per_budget = Vec::new();
        for scheme in Scheme::ALL {
            for &xi in &config.weights {
                let sel: Vec<&RegionPoint> =
                    cells.iter().filter(|c| c.xi1 == xi).map(|c| c.by_budget[k].get(scheme)).collect();
                let n_ok = sel.len();
                let mean = |f: fn(&RegionPoint) -> f64| {
                    if n_ok == 0 {
                        f64::NAN
                    } else {
                        sel.iter().map(|p| f(p)).sum::<f64>() / n_ok as f64
                    }
                };
                per_budget.push(RegionRow { scheme, xi1: xi, e1: mean(|p| p.e1), e2: mean(|p| p.e2), n_ok });
            }
        }
        per_budget.sort_by(|a, b| a.scheme.cmp(&b.scheme).then(a.xi1.total_cmp(&b.xi1)));
        rows.push(per_budget);
    }
    Ok(SweepResult { p_x: p_x.to_vec(), rows, cells, failures })
}

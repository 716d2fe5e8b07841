//! Linear-objective semidefinite subproblem.
//!
//! ```text
//! maximize   Re Tr(C W)
//! subject to Tr W ≤ ν,  W ⪰ 0,
//!            σ_m (g_m W g_mᴴ − p_m) ≤ 0   for at most two constraints
//! ```
//!
//! The complex Hermitian problem is lifted to a real symmetric one of twice
//! the dimension and solved with an infeasible-start primal-dual
//! interior-point method (HKM direction, Mehrotra predictor-corrector). The
//! constraint family is fixed and tiny, so the Schur complement is at most
//! 3×3.
//!
//! Every optimal return is post-processed into an extreme point of the
//! optimal face: a rank-reduction pass keeps the trace, every constraint
//! value and the objective fixed while removing eigen-directions. The result
//! is then re-verified against the feasibility invariants independently of
//! the interior-point iterates.

use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, cx, CMat, CVec};

/// Largest supported antenna count.
pub const MAX_DIM: usize = 16;
const IPM_TOL: f64 = 1e-10;
const IPM_MAX_ITER: usize = 200;
/// Stalled runs still count as converged at this residual; the post-hoc
/// check on `W` has the final word.
const IPM_ACCEPT: f64 = 1e-8;
const STALL_ITER: usize = 8;
const STEP_FRACTION: f64 = 0.95;
/// Lower bounds whose best achievable value clears the threshold by less
/// than this relative margin are treated as infeasible (no interior).
const THIN_MARGIN: f64 = 1e-9;
const AUX_MARGIN: f64 = 1e-7;
const RANK_TOL: f64 = 1e-9;

// Post-hoc acceptance tolerances for an optimal return.
const EIG_FLOOR: f64 = -1e-8;
const TRACE_SLACK: f64 = 1e-8;
const SAT_SLACK: f64 = 1e-8;
const KKT_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    /// `g W gᴴ ≤ p`
    Upper,
    /// `g W gᴴ ≥ p`
    Lower,
}

impl Sense {
    fn sign(self) -> f64 {
        match self {
            Sense::Upper => 1.0,
            Sense::Lower => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SatConstraint {
    /// Row vector `g`, stored as a column of its entries.
    pub g: CVec,
    pub sense: Sense,
    pub threshold: f64,
}

impl SatConstraint {
    pub fn upper(g: CVec, threshold: f64) -> Self {
        Self { g, sense: Sense::Upper, threshold }
    }

    pub fn lower(g: CVec, threshold: f64) -> Self {
        Self { g, sense: Sense::Lower, threshold }
    }

    /// `σ (g W gᴴ − p)`; nonpositive when satisfied.
    pub fn violation(&self, w: &CMat) -> f64 {
        self.sense.sign() * (linalg::quad_form(&self.g, w) - self.threshold)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    pub objective: CMat,
    pub trace_cap: f64,
    pub sat_constraints: Vec<SatConstraint>,
}

impl SdpProblem {
    pub fn dim(&self) -> usize {
        self.objective.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        if n == 0 || self.objective.ncols() != n {
            return Err(Error::Contract("objective must be a non-empty square matrix".into()));
        }
        if n > MAX_DIM {
            return Err(Error::Contract(format!("dimension {n} exceeds {MAX_DIM}")));
        }
        if linalg::hermitian_asymmetry(&self.objective) > 1e-9 * linalg::max_abs(&self.objective).max(1e-300) {
            return Err(Error::Contract("objective is not Hermitian".into()));
        }
        if !(self.trace_cap.is_finite() && self.trace_cap >= 0.0) {
            return Err(Error::Contract(format!("trace cap must be finite and >= 0, got {}", self.trace_cap)));
        }
        if self.sat_constraints.len() > 2 {
            return Err(Error::Contract("at most two saturation constraints are supported".into()));
        }
        for k in &self.sat_constraints {
            if k.g.len() != n {
                return Err(Error::Contract(format!("constraint vector has length {}, expected {n}", k.g.len())));
            }
            if !(k.threshold.is_finite() && k.threshold > 0.0) {
                return Err(Error::Contract(format!("constraint threshold must be positive, got {}", k.threshold)));
            }
            if k.g.norm() == 0.0 {
                return Err(Error::Contract("constraint vector is zero".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SdpStatus {
    Optimal,
    Infeasible,
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub w: CMat,
    pub value: f64,
    pub status: SdpStatus,
    pub kkt_residual: f64,
    pub iterations: usize,
    /// `λ₂/λ₁` of the interior-point iterate before rank reduction.
    pub raw_eig_ratio: f64,
}

impl SdpSolution {
    fn without_point(n: usize, status: SdpStatus, kkt_residual: f64, iterations: usize) -> Self {
        Self { w: CMat::zeros(n, n), value: 0.0, status, kkt_residual, iterations, raw_eig_ratio: 0.0 }
    }
}

#[derive(Debug, Clone)]
pub enum Feasibility {
    Feasible { witness: CMat },
    Infeasible,
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible { .. })
    }
}

// ── Solve counters ──────────────────────────────────────────────────────────

static SOLVES: AtomicU64 = AtomicU64::new(0);
static OPTIMAL: AtomicU64 = AtomicU64::new(0);
static VERIFIED: AtomicU64 = AtomicU64::new(0);
static REJECTED: AtomicU64 = AtomicU64::new(0);
static FAILED: AtomicU64 = AtomicU64::new(0);

/// Process-wide counters over every `solve_linear_sdp` call.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolveStats {
    pub solves: u64,
    /// Returns with status `Optimal`.
    pub optimal: u64,
    /// Optimal returns that passed the post-hoc invariant check.
    pub verified: u64,
    /// Candidates that converged but failed the post-hoc check (downgraded).
    pub rejected: u64,
    /// Interior-point runs that did not converge.
    pub failed: u64,
}

pub fn solve_stats() -> SolveStats {
    SolveStats {
        solves: SOLVES.load(Ordering::Relaxed),
        optimal: OPTIMAL.load(Ordering::Relaxed),
        verified: VERIFIED.load(Ordering::Relaxed),
        rejected: REJECTED.load(Ordering::Relaxed),
        failed: FAILED.load(Ordering::Relaxed),
    }
}

// ── Real lift ───────────────────────────────────────────────────────────────

/// `[[Re M, −Im M], [Im M, Re M]]`, so that `Re Tr(A B) = Tr(lift A · lift B) / 2`.
pub fn lift(m: &CMat) -> DMatrix<f64> {
    let n = m.nrows();
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = m[(i, j)];
            out[(i, j)] = z.re;
            out[(i + n, j + n)] = z.re;
            out[(i, j + n)] = -z.im;
            out[(i + n, j)] = z.im;
        }
    }
    out
}

/// Inverse of [`lift`], averaging over the two copies so that an arbitrary
/// symmetric input maps to the nearest structured one.
pub fn unlift(x: &DMatrix<f64>) -> CMat {
    let n = x.nrows() / 2;
    CMat::from_fn(n, n, |i, j| {
        cx(
            0.5 * (x[(i, j)] + x[(i + n, j + n)]),
            0.5 * (x[(i + n, j)] - x[(i, j + n)]),
        )
    })
}

// ── Feasibility ─────────────────────────────────────────────────────────────

/// Decides whether the feasible set has a point, returning one if so.
///
/// Each lower bound must pass `ν‖g‖² ≥ p`, the largest value reachable under
/// the trace cap. A lone lower bound is then feasible with the matched-filter
/// point. When a lower bound is combined with another constraint, an
/// auxiliary problem maximizing the lower-bounded form subject to the
/// remaining constraint settles the question.
pub fn feasibility_check(problem: &SdpProblem) -> Result<Feasibility> {
    problem.validate()?;
    let n = problem.dim();
    let nu = problem.trace_cap;
    let lowers: Vec<usize> = (0..problem.sat_constraints.len())
        .filter(|&k| problem.sat_constraints[k].sense == Sense::Lower)
        .collect();
    for &k in &lowers {
        let con = &problem.sat_constraints[k];
        if nu * con.g.norm_squared() < con.threshold * (1.0 + THIN_MARGIN) {
            return Ok(Feasibility::Infeasible);
        }
    }
    if lowers.is_empty() {
        return Ok(Feasibility::Feasible { witness: CMat::zeros(n, n) });
    }
    let target = &problem.sat_constraints[lowers[0]];
    if problem.sat_constraints.len() == 1 {
        let witness = linalg::gram(&target.g) * c(nu / target.g.norm_squared());
        return Ok(Feasibility::Feasible { witness });
    }
    let others = problem
        .sat_constraints
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != lowers[0])
        .map(|(_, con)| con.clone())
        .collect();
    let aux = SdpProblem { objective: linalg::gram(&target.g), trace_cap: nu, sat_constraints: others };
    let sol = solve_linear_sdp(&aux)?;
    match sol.status {
        SdpStatus::Optimal if sol.value >= target.threshold * (1.0 + AUX_MARGIN) => {
            Ok(Feasibility::Feasible { witness: sol.w })
        }
        SdpStatus::Optimal | SdpStatus::Infeasible => Ok(Feasibility::Infeasible),
        SdpStatus::NumericalFailure => Err(Error::Solver("auxiliary feasibility problem did not converge".into())),
    }
}

// ── Solve ───────────────────────────────────────────────────────────────────

pub fn solve_linear_sdp(problem: &SdpProblem) -> Result<SdpSolution> {
    problem.validate()?;
    SOLVES.fetch_add(1, Ordering::Relaxed);
    let n = problem.dim();
    let nu = problem.trace_cap;

    let witness = match feasibility_check(problem) {
        Ok(Feasibility::Feasible { witness }) => witness,
        Ok(Feasibility::Infeasible) => return Ok(SdpSolution::without_point(n, SdpStatus::Infeasible, 0.0, 0)),
        Err(Error::Solver(_)) => {
            FAILED.fetch_add(1, Ordering::Relaxed);
            return Ok(SdpSolution::without_point(n, SdpStatus::NumericalFailure, f64::INFINITY, 0));
        }
        Err(e) => return Err(e),
    };

    let c_norm = problem.objective.norm();
    if nu == 0.0 || c_norm == 0.0 {
        // Every feasible point is optimal.
        let w = reduce_rank(&witness, &functionals(problem));
        return Ok(accept(problem, w, 0.0, 0));
    }

    let lifted = build_lifted(problem, c_norm);
    let outcome = interior_point(&lifted);
    if !outcome.converged {
        FAILED.fetch_add(1, Ordering::Relaxed);
        log::debug!("interior point stopped after {} iterations, residual {:e}", outcome.iterations, outcome.residual);
        return Ok(SdpSolution::without_point(n, SdpStatus::NumericalFailure, outcome.residual, outcome.iterations));
    }
    let w_scaled = linalg::psd_project(&unlift(&outcome.x)) * c(nu);
    let raw_eig_ratio = eig_ratio(&w_scaled);
    let w = reduce_rank(&w_scaled, &functionals(problem));
    Ok(SdpSolution { raw_eig_ratio, ..accept(problem, w, outcome.residual, outcome.iterations) })
}

fn functionals(problem: &SdpProblem) -> Vec<CMat> {
    let n = problem.dim();
    let mut out = vec![CMat::identity(n, n)];
    out.extend(problem.sat_constraints.iter().map(|k| linalg::gram(&k.g)));
    out.push(problem.objective.clone());
    out
}

/// Trims rounding-level overshoots, evaluates the objective and runs the
/// post-hoc check; a failed check downgrades the status.
fn accept(problem: &SdpProblem, w: CMat, kkt_residual: f64, iterations: usize) -> SdpSolution {
    let nu = problem.trace_cap;
    let mut scale: f64 = 1.0;
    let tr = linalg::trace_re(&w);
    if tr > nu {
        scale = scale.min(if tr > 0.0 { nu / tr } else { 0.0 });
    }
    for k in problem.sat_constraints.iter().filter(|k| k.sense == Sense::Upper) {
        let q = linalg::quad_form(&k.g, &w);
        if q > k.threshold {
            scale = scale.min(k.threshold / q);
        }
    }
    let w = linalg::hermitize(&(w * c(scale)));
    let value = linalg::inner_re(&problem.objective, &w);
    let sol = SdpSolution { w, value, status: SdpStatus::Optimal, kkt_residual, iterations, raw_eig_ratio: 0.0 };
    match verify_solution(problem, &sol) {
        Ok(()) => {
            OPTIMAL.fetch_add(1, Ordering::Relaxed);
            VERIFIED.fetch_add(1, Ordering::Relaxed);
            sol
        }
        Err(why) => {
            REJECTED.fetch_add(1, Ordering::Relaxed);
            log::debug!("rejecting interior-point solution: {why}");
            SdpSolution { status: SdpStatus::NumericalFailure, ..sol }
        }
    }
}

/// Checks the invariants of an optimal solution directly on `W`.
pub fn verify_solution(problem: &SdpProblem, sol: &SdpSolution) -> std::result::Result<(), String> {
    if sol.status != SdpStatus::Optimal {
        return Ok(());
    }
    let w = &sol.w;
    let n = problem.dim();
    if w.nrows() != n || w.ncols() != n {
        return Err("solution has the wrong shape".into());
    }
    if linalg::hermitian_asymmetry(w) > 1e-9 * linalg::max_abs(w).max(1.0) {
        return Err("solution is not Hermitian".into());
    }
    let (vals, _) = linalg::eigh_desc(w);
    let min_eig = *vals.last().unwrap();
    if min_eig < EIG_FLOOR {
        return Err(format!("eigenvalue {min_eig:e} below floor"));
    }
    let tr = linalg::trace_re(w);
    if tr > problem.trace_cap + TRACE_SLACK {
        return Err(format!("trace {tr} exceeds cap {}", problem.trace_cap));
    }
    for (k, con) in problem.sat_constraints.iter().enumerate() {
        let v = con.violation(w);
        if v > SAT_SLACK * con.threshold {
            return Err(format!("constraint {k} violated by {v:e}"));
        }
    }
    if sol.kkt_residual > KKT_LIMIT {
        return Err(format!("KKT residual {:e} too large", sol.kkt_residual));
    }
    let value = linalg::inner_re(&problem.objective, w);
    if (value - sol.value).abs() > 1e-9 * (1.0 + value.abs()) {
        return Err("reported value does not match the objective at W".into());
    }
    Ok(())
}

/// `λ₂/λ₁` of a PSD matrix; 0 for rank ≤ 1 or the zero matrix.
pub fn eig_ratio(w: &CMat) -> f64 {
    if w.nrows() < 2 {
        return 0.0;
    }
    let (vals, _) = linalg::eigh_desc(w);
    if vals[0] <= 0.0 {
        0.0
    } else {
        vals[1].max(0.0) / vals[0]
    }
}

// ── Rank reduction ──────────────────────────────────────────────────────────

/// Moves `W` to a lower-rank point with the same value of every functional
/// `Re Tr(F W)`, repeating while the linear system admits a nonzero
/// Hermitian direction on the current range of `W`.
pub fn reduce_rank(w: &CMat, functionals: &[CMat]) -> CMat {
    let n = w.nrows();
    let mut w = linalg::hermitize(w);
    for _ in 0..n {
        let (vals, vecs) = linalg::eigh_desc(&w);
        let top = vals[0];
        if top <= 0.0 {
            return CMat::zeros(n, n);
        }
        let keep: Vec<usize> = (0..n).filter(|&k| vals[k] > RANK_TOL * top).collect();
        let r = keep.len();
        if r <= 1 {
            // drop the negligible tail
            return linalg::hermitize(&(&vecs[0] * vecs[0].adjoint() * c(top)));
        }
        let factor = CMat::from_fn(n, r, |i, j| vecs[keep[j]][i] * vals[keep[j]].sqrt());

        let dim = r * r;
        let mut eqs = DMatrix::<f64>::zeros(functionals.len(), dim);
        for (row, f) in functionals.iter().enumerate() {
            let b = factor.adjoint() * f * &factor;
            let mut col = r;
            for k in 0..r {
                eqs[(row, k)] = b[(k, k)].re;
                for l in (k + 1)..r {
                    eqs[(row, col)] = 2.0 * b[(l, k)].re;
                    eqs[(row, col + 1)] = -2.0 * b[(l, k)].im;
                    col += 2;
                }
            }
            let norm = eqs.row(row).norm();
            if norm > 0.0 {
                eqs.row_mut(row).scale_mut(1.0 / norm);
            }
        }
        let normal = eqs.transpose() * &eqs;
        let eig = SymmetricEigen::new(normal);
        let (imin, lam_min) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (k, &v)| if v < acc.1 { (k, v) } else { acc });
        if lam_min > 1e-10 {
            break;
        }
        let d = eig.eigenvectors.column(imin);
        let mut delta = CMat::zeros(r, r);
        let mut col = r;
        for k in 0..r {
            delta[(k, k)] = c(d[k]);
            for l in (k + 1)..r {
                delta[(k, l)] = cx(d[col], d[col + 1]);
                delta[(l, k)] = cx(d[col], -d[col + 1]);
                col += 2;
            }
        }
        let (dvals, _) = linalg::eigh_desc(&delta);
        let (dir, peak) = if dvals[0] >= -dvals[r - 1] { (1.0, dvals[0]) } else { (-1.0, -dvals[r - 1]) };
        if peak <= 0.0 {
            break;
        }
        let inner = CMat::identity(r, r) - delta * c(dir / peak);
        w = linalg::hermitize(&(&factor * inner * factor.adjoint()));
    }
    w
}

// ── Interior point on the real lift ─────────────────────────────────────────

/// `min <C, X>  s.t.  <A_i, X> + s_i = b_i,  X ⪰ 0,  s ≥ 0`.
struct LiftedProblem {
    c: DMatrix<f64>,
    a: Vec<DMatrix<f64>>,
    b: DVector<f64>,
}

/// Normalized lift: `W = ν W̃`, each saturation row scaled so its right-hand
/// side is ±1, objective scaled to unit norm. Upper bounds that the trace cap
/// already implies (`ν‖g‖² ≤ p`) are dropped.
fn build_lifted(problem: &SdpProblem, c_norm: f64) -> LiftedProblem {
    let n2 = 2 * problem.dim();
    let nu = problem.trace_cap;
    let mut a = vec![DMatrix::identity(n2, n2) * 0.5];
    let mut b = vec![1.0];
    for con in &problem.sat_constraints {
        if con.sense == Sense::Upper && nu * con.g.norm_squared() <= con.threshold {
            continue;
        }
        let sigma = con.sense.sign();
        a.push(lift(&linalg::gram(&con.g)) * (0.5 * sigma * nu / con.threshold));
        b.push(sigma);
    }
    LiftedProblem { c: lift(&problem.objective) * (-0.5 / c_norm), a, b: DVector::from_vec(b) }
}

struct IpmOutcome {
    x: DMatrix<f64>,
    iterations: usize,
    residual: f64,
    converged: bool,
}

fn dot(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.component_mul(b).sum()
}

fn sym(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// Largest `α` keeping `X + α ΔX ⪰ 0`.
fn psd_step(x: &DMatrix<f64>, dx: &DMatrix<f64>) -> f64 {
    let Some(chol) = x.clone().cholesky() else { return 0.0 };
    let l = chol.l();
    let Some(half) = l.solve_lower_triangular(dx) else { return 0.0 };
    let Some(full) = l.solve_lower_triangular(&half.transpose()) else { return 0.0 };
    let lam = sym(full).symmetric_eigenvalues().min();
    if lam >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lam
    }
}

fn vec_step(v: &DVector<f64>, dv: &DVector<f64>) -> f64 {
    v.iter().zip(dv.iter()).filter(|(_, &d)| d < 0.0).map(|(&x, &d)| -x / d).fold(f64::INFINITY, f64::min)
}

struct Direction {
    dx: DMatrix<f64>,
    ds: DVector<f64>,
    dy: DVector<f64>,
    dz: DMatrix<f64>,
    dzs: DVector<f64>,
}

fn interior_point(p: &LiftedProblem) -> IpmOutcome {
    let n = p.c.nrows();
    let m = p.a.len();
    let ident = DMatrix::<f64>::identity(n, n);
    let mut x = &ident * (1.0 / n as f64);
    let mut z = ident.clone();
    let mut y = DVector::<f64>::zeros(m);
    let mut s = DVector::<f64>::from_element(m, 1.0);
    let mut zs = DVector::<f64>::from_element(m, 1.0);
    let b_norm = p.b.norm();
    let c_norm = p.c.norm();
    let dof = (n + m) as f64;
    let mut best = (x.clone(), f64::INFINITY, 0usize);
    let mut iterations = IPM_MAX_ITER;

    for it in 0..IPM_MAX_ITER {
        iterations = it;
        let ax = DVector::from_iterator(m, p.a.iter().map(|ai| dot(ai, &x)));
        let rp = &p.b - ax - &s;
        let mut aty = DMatrix::<f64>::zeros(n, n);
        for (ai, &yi) in p.a.iter().zip(y.iter()) {
            aty += ai * yi;
        }
        let rd = &p.c - aty - &z;
        let rz = -&y - &zs;
        let gap = dot(&x, &z) + s.dot(&zs);
        let mu = gap / dof;
        let pobj = dot(&p.c, &x);
        let dobj = p.b.dot(&y);
        let residual = (rp.norm() / (1.0 + b_norm))
            .max((rd.norm() + rz.norm()) / (1.0 + c_norm))
            .max(gap / (1.0 + pobj.abs() + dobj.abs()));
        log::trace!(
            "ipm {it}: rp {:.3e} rd {:.3e} gap {:.3e} mu {:.3e} pobj {:.9e} dobj {:.9e}",
            rp.norm(),
            rd.norm() + rz.norm(),
            gap,
            mu,
            pobj,
            dobj
        );
        if residual < best.1 {
            best = (x.clone(), residual, it);
        }
        if residual <= IPM_TOL {
            return IpmOutcome { x, iterations: it, residual, converged: true };
        }
        if it >= best.2 + STALL_ITER {
            break;
        }

        let Some(zchol) = z.clone().cholesky() else { break };
        let zinv = zchol.inverse();
        let t: Vec<DMatrix<f64>> = p.a.iter().map(|aj| &zinv * aj * &x).collect();
        let mut schur = DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                schur[(i, j)] = dot(&p.a[i], &t[j]);
            }
            schur[(i, i)] += s[i] / zs[i];
        }
        let schur = sym(schur);
        let schur_lu = schur.clone().lu();
        if !schur_lu.is_invertible() {
            break;
        }
        // one refinement step keeps the Schur residual small near degenerate optima
        let solve_schur = |rhs: &DVector<f64>| -> DVector<f64> {
            let mut dy = schur_lu.solve(rhs).unwrap_or_else(|| DVector::zeros(m));
            let r = rhs - &schur * &dy;
            if let Some(fix) = schur_lu.solve(&r) {
                dy += fix;
            }
            dy
        };
        let zinv_rd_x = &zinv * &rd * &x;
        let zx = &z * &x;

        let direction = |target: f64, corr: Option<&Direction>| -> Direction {
            let mut rmat = -&zx;
            for k in 0..n {
                rmat[(k, k)] += target;
            }
            let mut r_s = DVector::from_iterator(m, (0..m).map(|i| target - s[i] * zs[i]));
            if let Some(d) = corr {
                rmat -= &d.dz * &d.dx;
                r_s -= d.ds.component_mul(&d.dzs);
            }
            let pm = sym(&zinv * rmat);
            let rhs = DVector::from_iterator(
                m,
                (0..m).map(|i| rp[i] - dot(&p.a[i], &pm) + dot(&p.a[i], &zinv_rd_x) - (r_s[i] - s[i] * rz[i]) / zs[i]),
            );
            let dy = solve_schur(&rhs);
            let mut dz = rd.clone();
            for (ai, &d) in p.a.iter().zip(dy.iter()) {
                dz -= ai * d;
            }
            let dzs = &rz - &dy;
            let dx = &pm - sym(&zinv * &dz * &x);
            let ds = DVector::from_iterator(m, (0..m).map(|i| (r_s[i] - s[i] * dzs[i]) / zs[i]));
            Direction { dx, ds, dy, dz, dzs }
        };

        let aff = direction(0.0, None);
        let ap = psd_step(&x, &aff.dx).min(vec_step(&s, &aff.ds)).min(1.0);
        let ad = psd_step(&z, &aff.dz).min(vec_step(&zs, &aff.dzs)).min(1.0);
        let mu_aff = (dot(&(&x + &aff.dx * ap), &(&z + &aff.dz * ad))
            + (&s + &aff.ds * ap).dot(&(&zs + &aff.dzs * ad)))
            / dof;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        let dir = direction(sigma * mu, Some(&aff));
        let ap = (STEP_FRACTION * psd_step(&x, &dir.dx).min(vec_step(&s, &dir.ds))).min(1.0);
        let ad = (STEP_FRACTION * psd_step(&z, &dir.dz).min(vec_step(&zs, &dir.dzs))).min(1.0);
        if !(ap > 0.0 && ad > 0.0) || !ap.is_finite() || !ad.is_finite() {
            break;
        }
        x = sym(&x + &dir.dx * ap);
        s += &dir.ds * ap;
        y += &dir.dy * ad;
        z = sym(&z + &dir.dz * ad);
        zs += &dir.dzs * ad;
    }
    let (x, residual, _) = best;
    IpmOutcome { x, iterations, residual, converged: residual <= IPM_ACCEPT }
}

//! Two-mass-point solution of `max E{f(ν)} s.t. E{ν} ≤ ν̄` for a non-decreasing,
//! grid-sampled `f`.
//!
//! The optimal pdf puts mass on two grid powers found by a min-max search over
//! chord slopes: the lower mass point minimizes the steepest chord reaching at
//! or beyond `ν̄`, and the upper mass point is the end of that steepest chord.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Monotonicity tolerance on sampled values.
pub const MONOTONE_TOL: f64 = 1e-12;
/// Mass points closer than this collapse to a single mass.
pub const DEGENERATE_GAP: f64 = 1e-12;

/// `f` sampled on a strictly ascending grid starting at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledCurve {
    grid: Vec<f64>,
    values: Vec<f64>,
}

impl SampledCurve {
    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.is_empty() || grid.len() != values.len() {
            return Err(Error::Contract(format!(
                "grid and values must be non-empty and equally long ({} vs {})",
                grid.len(),
                values.len()
            )));
        }
        if grid[0] != 0.0 {
            return Err(Error::Contract(format!("grid must start at 0, got {}", grid[0])));
        }
        for k in 1..grid.len() {
            if !(grid[k] > grid[k - 1]) {
                return Err(Error::Contract(format!("grid not strictly ascending at index {k}")));
            }
            if values[k] < values[k - 1] - MONOTONE_TOL {
                return Err(Error::Contract(format!(
                    "values decrease at index {k}: {} -> {}",
                    values[k - 1],
                    values[k]
                )));
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Contract("values must be finite".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Index of the grid point equal to `nu` up to rounding.
    pub fn index_of(&self, nu: f64) -> Option<usize> {
        let tol = 1e-12 * nu.abs().max(1.0);
        let k = self.grid.partition_point(|&g| g < nu - tol);
        (k < self.grid.len() && (self.grid[k] - nu).abs() <= tol).then_some(k)
    }
}

/// Discrete pdf `β·δ(ν − ν1) + (1 − β)·δ(ν − ν2)` on grid points `i1 ≤ i2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoPointMass {
    pub nu1: f64,
    pub nu2: f64,
    pub beta: f64,
    pub i1: usize,
    pub i2: usize,
}

impl TwoPointMass {
    pub fn single(nu: f64, index: usize) -> Self {
        Self { nu1: nu, nu2: nu, beta: 1.0, i1: index, i2: index }
    }

    pub fn is_degenerate(&self) -> bool {
        self.i1 == self.i2
    }

    pub fn mean(&self) -> f64 {
        self.beta * self.nu1 + (1.0 - self.beta) * self.nu2
    }
}

/// Chord slope between grid points `i < j`.
pub fn slope(curve: &SampledCurve, i: usize, j: usize) -> Result<f64> {
    if j <= i || j >= curve.len() {
        return Err(Error::Index(format!("slope needs i < j < {}, got ({i}, {j})", curve.len())));
    }
    Ok((curve.values[j] - curve.values[i]) / (curve.grid[j] - curve.grid[i]))
}

/// Index of the first grid point at or beyond `ν̄`.
fn split_index(curve: &SampledCurve, nu_bar: f64) -> Result<usize> {
    let grid = &curve.grid;
    let last = *grid.last().unwrap();
    let tol = 1e-12 * nu_bar.abs().max(1.0);
    if !(nu_bar >= -tol && nu_bar <= last + tol) {
        return Err(Error::Range(format!("mean budget {nu_bar} outside grid [0, {last}]")));
    }
    Ok(grid.partition_point(|&g| g < nu_bar - tol).min(grid.len() - 1))
}

/// Min-max chord `(i*, j*)`: `i*` minimizes over `i < n` the steepest slope
/// to any `j ≥ n`, and `j*` attains that slope. `None` when `ν̄` sits on the
/// first grid point. Ties resolve to the smallest index.
pub fn min_max_chord(curve: &SampledCurve, nu_bar: f64) -> Result<Option<(usize, usize)>> {
    let n = split_index(curve, nu_bar)?;
    if n == 0 {
        return Ok(None);
    }
    let grid = &curve.grid;
    let mut best = (0, n);
    let mut best_max = f64::INFINITY;
    for i in 0..n {
        let (mut row_max, mut row_arg) = (f64::NEG_INFINITY, n);
        for j in n..grid.len() {
            let s = (curve.values[j] - curve.values[i]) / (grid[j] - grid[i]);
            if s > row_max {
                row_max = s;
                row_arg = j;
            }
        }
        if row_max < best_max {
            best_max = row_max;
            best = (i, row_arg);
        }
    }
    Ok(Some(best))
}

/// Two-point pdf from the min-max chord, with `β = (ν2 − ν̄)/(ν2 − ν1)`.
pub fn solve_two_point(curve: &SampledCurve, nu_bar: f64) -> Result<TwoPointMass> {
    let Some((i1, i2)) = min_max_chord(curve, nu_bar)? else {
        return Ok(TwoPointMass::single(curve.grid[0], 0));
    };
    let (nu1, nu2) = (curve.grid[i1], curve.grid[i2]);
    if nu2 - nu1 < DEGENERATE_GAP {
        return Ok(best_single_point(curve, nu_bar));
    }
    let beta = ((nu2 - nu_bar) / (nu2 - nu1)).clamp(0.0, 1.0);
    if beta <= 1e-12 {
        // The upper point sits on ν̄ itself.
        return Ok(TwoPointMass::single(nu2, i2));
    }
    Ok(TwoPointMass { nu1, nu2, beta, i1, i2 })
}

fn best_single_point(curve: &SampledCurve, nu_bar: f64) -> TwoPointMass {
    let tol = 1e-12 * nu_bar.abs().max(1.0);
    let mut best = 0;
    for (k, &g) in curve.grid.iter().enumerate() {
        if g > nu_bar + tol {
            break;
        }
        if curve.values[k] > curve.values[best] {
            best = k;
        }
    }
    TwoPointMass::single(curve.grid[best], best)
}

/// `β·f(ν1) + (1 − β)·f(ν2)`; both mass points must be grid points.
pub fn expected_value(curve: &SampledCurve, mass: &TwoPointMass) -> Result<f64> {
    let lookup = |nu: f64| {
        curve
            .index_of(nu)
            .map(|k| curve.values[k])
            .ok_or_else(|| Error::Lookup(format!("mass point {nu} is not on the grid")))
    };
    let f1 = lookup(mass.nu1)?;
    let f2 = lookup(mass.nu2)?;
    Ok(mass.beta * f1 + (1.0 - mass.beta) * f2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(step: f64, last: f64, f: impl Fn(f64) -> f64) -> SampledCurve {
        let n = (last / step).round() as usize;
        let grid: Vec<f64> = (0..=n).map(|k| k as f64 * step).collect();
        let values = grid.iter().map(|&x| f(x)).collect();
        SampledCurve::new(grid, values).unwrap()
    }

    #[test]
    fn slope_examples() {
        let lin = curve(1.0, 5.0, |x| x);
        assert_eq!(slope(&lin, 1, 4).unwrap(), 1.0);
        let flat = curve(1.0, 5.0, |_| 3.0);
        assert_eq!(slope(&flat, 0, 5).unwrap(), 0.0);
        let sq = curve(1.0, 5.0, |x| x * x);
        assert_eq!(slope(&sq, 2, 5).unwrap(), 7.0);
        assert!(matches!(slope(&sq, 3, 3), Err(Error::Index(_))));
        assert!(matches!(slope(&sq, 4, 2), Err(Error::Index(_))));
    }

    #[test]
    fn convex_curve_uses_endpoints() {
        let c = curve(0.5, 10.0, |x| x * x);
        let m = solve_two_point(&c, 4.0).unwrap();
        assert_eq!((m.nu1, m.nu2), (0.0, 10.0));
        assert!((m.beta - 0.6).abs() < 1e-15);
    }

    #[test]
    fn concave_curve_degenerates() {
        let c = curve(0.5, 10.0, f64::sqrt);
        let m = solve_two_point(&c, 4.0).unwrap();
        assert!(m.is_degenerate());
        assert_eq!(m.nu1, 4.0);
        assert_eq!(m.beta, 1.0);
        assert_eq!(expected_value(&c, &m).unwrap(), 2.0);
    }

    #[test]
    fn convex_then_flat_stops_at_knee() {
        let c = curve(0.5, 10.0, |x| if x <= 5.0 { x * x } else { 25.0 });
        let m = solve_two_point(&c, 4.0).unwrap();
        assert_eq!((m.nu1, m.nu2), (0.0, 5.0));
        assert!((m.beta - 0.2).abs() < 1e-15);
        assert!((expected_value(&c, &m).unwrap() - 20.0).abs() < 1e-12);
    }

    #[test]
    fn zero_budget_is_single_mass_at_origin() {
        let c = curve(1.0, 4.0, |x| x * x);
        let m = solve_two_point(&c, 0.0).unwrap();
        assert_eq!(m, TwoPointMass::single(0.0, 0));
    }

    #[test]
    fn expected_value_arithmetic() {
        let c = curve(1.0, 10.0, |x| x * x);
        let m = TwoPointMass { nu1: 0.0, nu2: 10.0, beta: 0.6, i1: 0, i2: 10 };
        assert!((expected_value(&c, &m).unwrap() - 40.0).abs() < 1e-12);
        let off = TwoPointMass { nu1: 0.5, ..m };
        assert!(matches!(expected_value(&c, &off), Err(Error::Lookup(_))));
    }

    #[test]
    fn rejects_bad_inputs() {
        let c = curve(1.0, 4.0, |x| x);
        assert!(matches!(solve_two_point(&c, 4.5), Err(Error::Range(_))));
        assert!(matches!(solve_two_point(&c, -1.0), Err(Error::Range(_))));
        assert!(SampledCurve::new(vec![0.0, 1.0, 2.0], vec![0.0, 2.0, 1.0]).is_err());
        assert!(SampledCurve::new(vec![0.0, 1.0, 1.0], vec![0.0, 1.0, 1.0]).is_err());
        assert!(SampledCurve::new(vec![0.5, 1.0], vec![0.0, 1.0]).is_err());
        // decreases within tolerance are accepted
        assert!(SampledCurve::new(vec![0.0, 1.0], vec![1.0, 1.0 - 1e-13]).is_ok());
    }
}

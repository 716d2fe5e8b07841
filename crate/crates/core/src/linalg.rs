//! Small dense complex linear-algebra helpers shared by the solver modules.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

#[inline]
pub fn c(re: f64) -> C64 {
    Complex::new(re, 0.0)
}

#[inline]
pub fn cx(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

/// Real part of `g W gᴴ` for a row vector `g` stored as a column of entries.
pub fn quad_form(g: &CVec, w: &CMat) -> f64 {
    let gh = g.map(|z| z.conj());
    let t = w * &gh;
    g.iter().zip(t.iter()).map(|(a, b)| a * b).sum::<C64>().re
}

/// `gᴴ g`, the rank-one Gram matrix of a row vector.
pub fn gram(g: &CVec) -> CMat {
    let gh = g.map(|z| z.conj());
    &gh * g.transpose()
}

/// `|g w|²` for a row vector `g` and column beamformer `w`.
pub fn received_power(g: &CVec, w: &CVec) -> f64 {
    g.iter().zip(w.iter()).map(|(a, b)| a * b).sum::<C64>().norm_sqr()
}

pub fn hermitian_asymmetry(w: &CMat) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..w.nrows() {
        for j in i..w.ncols() {
            worst = worst.max((w[(i, j)] - w[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn max_abs(w: &CMat) -> f64 {
    w.iter().fold(0.0, |m, z| m.max(z.norm()))
}

pub fn hermitize(w: &CMat) -> CMat {
    (w + w.adjoint()) * c(0.5)
}

pub fn trace_re(w: &CMat) -> f64 {
    (0..w.nrows()).map(|i| w[(i, i)].re).sum()
}

/// Real part of `Tr(A B)`.
pub fn inner_re(a: &CMat, b: &CMat) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += (a[(i, k)] * b[(k, i)]).re;
        }
    }
    acc
}

/// Eigenvalues (descending) and matching unit eigenvectors of a Hermitian matrix.
pub fn eigh_desc(w: &CMat) -> (Vec<f64>, Vec<CVec>) {
    let eig = SymmetricEigen::new(hermitize(w));
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = idx.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect();
    (vals, vecs)
}

/// Rotate a vector so its first non-negligible entry is real and positive, then
/// renormalize to unit length.
pub fn normalize_phase(v: &CVec) -> CVec {
    let norm = v.norm();
    if norm == 0.0 {
        return v.clone();
    }
    let mut out = v.clone();
    if let Some(k) = v.iter().position(|z| z.norm() > 1e-12 * norm) {
        let mag = v[k].norm();
        let rot = v[k].conj() / mag;
        out = v * rot;
        out[k] = c(mag);
    }
    let n = out.norm();
    out.map(|z| z / n)
}

/// Project a Hermitian matrix onto the PSD cone by clipping negative eigenvalues.
pub fn psd_project(w: &CMat) -> CMat {
    let eig = SymmetricEigen::new(hermitize(w));
    let n = w.nrows();
    let mut out = CMat::zeros(n, n);
    for (i, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam > 0.0 {
            let v = eig.eigenvectors.column(i);
            out += v * v.adjoint() * c(lam);
        }
    }
    hermitize(&out)
}

/// Serde adapter storing complex vectors as `[[re, im], …]`.
pub mod cvec_serde {
    use super::*;

    pub fn serialize<S: Serializer>(v: &CVec, s: S) -> Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = v.iter().map(|z| [z.re, z.im]).collect();
        pairs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CVec, D::Error> {
        let pairs: Vec<[f64; 2]> = Vec::deserialize(d)?;
        Ok(CVec::from_iterator(pairs.len(), pairs.iter().map(|p| cx(p[0], p[1]))))
    }
}

//! Spectral data of block Jacobi and dense hermitian matrices, matrix
//! spectral measure moments, and the determinant/eigenvector identity
//! `∏_j det(B_j)^{n-j} = |det M(λ, Q)|`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::ensembles::BlockJacobi;
use crate::error::{Error, Result};
use crate::linalg::eigh;
use crate::scalar::CMat;
use crate::vdm::{build_m, Mat};

/// Sorted eigenvalues plus the first `r` coordinates of each eigenvector.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub eigenvalues: Vec<f64>,
    /// `r × rn`; column `j` belongs to `eigenvalues[j]`.
    pub top_rows: CMat,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralDataJson {
    pub eigenvalues: Vec<f64>,
    /// Row-major `r × rn`, complex entries as `[re, im]`.
    pub top_rows: Vec<Vec<[f64; 2]>>,
}

impl SpectralData {
    pub fn r(&self) -> usize {
        self.top_rows.nrows()
    }

    pub fn to_json(&self) -> SpectralDataJson {
        let q = &self.top_rows;
        SpectralDataJson {
            eigenvalues: self.eigenvalues.clone(),
            top_rows: (0..q.nrows()).map(|i| (0..q.ncols()).map(|j| [q[(i, j)].re, q[(i, j)].im]).collect()).collect(),
        }
    }

    /// Largest deviation of `Σ_j Q_j Q_j†` from `I_r`.
    pub fn completeness_defect(&self) -> f64 {
        let r = self.r();
        let g = &self.top_rows * self.top_rows.adjoint();
        (g - CMat::identity(r, r)).norm()
    }

    pub fn min_gap(&self) -> f64 {
        self.eigenvalues.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    }
}

/// Eigen-decomposition of a dense hermitian matrix, keeping `r` top rows.
pub fn eigh_dense(m: &CMat, r: usize) -> Result<SpectralData> {
    if r == 0 || r > m.nrows() {
        return Err(Error::Dimension(format!("r={r} for a {}x{} matrix", m.nrows(), m.ncols())));
    }
    let (vals, vecs) = eigh(m)?;
    Ok(SpectralData { eigenvalues: vals, top_rows: vecs.rows(0, r).into_owned() })
}

/// Eigen-decomposition of a block Jacobi matrix.
pub fn eigh_banded(t: &BlockJacobi) -> Result<SpectralData> {
    eigh_dense(&t.to_dense(), t.r)
}

/// `j`-th moment `Σ_k λ_k^j Q_k Q_k†` for `j = 0..=jmax`.
pub fn spectral_measure_moments(sd: &SpectralData, jmax: usize) -> Vec<CMat> {
    let r = sd.r();
    let mut out = Vec::with_capacity(jmax + 1);
    let mut w: Vec<f64> = vec![1.0; sd.eigenvalues.len()];
    for _ in 0..=jmax {
        let mut acc = DMatrix::zeros(r, r);
        for (k, wk) in w.iter().enumerate() {
            let col = sd.top_rows.column(k);
            acc += (col * col.adjoint()) * Complex64::new(*wk, 0.0);
        }
        out.push(acc);
        for (wk, l) in w.iter_mut().zip(&sd.eigenvalues) {
            *wk *= l;
        }
    }
    out
}

/// Outcome of one spectral identity check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MagicCheck {
    Residual(f64),
    /// The spectrum has a gap below `1e-6`; the draw was not evaluated.
    Skipped { min_gap: f64 },
}

/// `|lhs − rhs| / lhs` for `lhs = ∏ det(B_j)^{n−j}`, `rhs = |det M(λ,Q)|`.
pub fn verify_magic_identity(t: &BlockJacobi) -> Result<MagicCheck> {
    let sd = eigh_banded(t)?;
    if t.n() > 1 && sd.min_gap() < 1e-6 {
        return Ok(MagicCheck::Skipped { min_gap: sd.min_gap() });
    }
    let n = t.n();
    let mut lhs = 1.0;
    for (j, b) in t.offdiag_blocks.iter().enumerate() {
        let d: f64 = (0..t.r).map(|i| b[(i, i)].re).product();
        lhs *= d.powi((n - 1 - j) as i32);
    }
    let rhs = magic_det(&sd)?.norm();
    Ok(MagicCheck::Residual((lhs - rhs).abs() / lhs))
}

/// `det M(λ, Q)` from spectral data, in floating point.
pub fn magic_det(sd: &SpectralData) -> Result<Complex64> {
    let lam: Vec<Complex64> = sd.eigenvalues.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    let q = &sd.top_rows;
    let x = Mat::from_fn(q.nrows(), q.ncols(), |i, j| q[(i, j)]);
    let m = build_m(&lam, &x, sd.r())?;
    let dm = DMatrix::from_fn(m.rows, m.cols, |i, j| m[(i, j)]);
    Ok(dm.determinant())
}

/// Floating version of the positive-spectrum Pfaffian form of `det M` for
/// `r = 2`: `∏_{i<j}(√λ_i+√λ_j) · Pf((q_{1i}q_{2j}−q_{1j}q_{2i})/(√λ_i+√λ_j))`.
/// Real eigenvector rows are required (β = 1).
pub fn pfaffian_form_det_m(lam: &[f64], q: &CMat) -> Result<f64> {
    let d = lam.len();
    if q.nrows() != 2 || q.ncols() != d {
        return Err(Error::Dimension("pfaffian form needs a 2 x 2n Q".into()));
    }
    if lam.iter().any(|&l| !(l > 0.0)) {
        return crate::error::domain("pfaffian form needs a positive spectrum");
    }
    let sq: Vec<f64> = lam.iter().map(|l| l.sqrt()).collect();
    let mut k = vec![0.0; d * d];
    let mut logp = 0.0;
    for i in 0..d {
        for j in 0..d {
            if i != j {
                k[i * d + j] = (q[(0, i)].re * q[(1, j)].re - q[(0, j)].re * q[(1, i)].re) / (sq[i] + sq[j]);
            }
            if i < j {
                logp += (sq[i] + sq[j]).ln();
            }
        }
    }
    let (s, l) = crate::linalg::pfaffian_log(&k, d);
    Ok(s * (l + logp).exp())
}

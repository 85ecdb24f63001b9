//! Block Hermite and block Laguerre ensembles, and block Householder
//! reduction of a dense hermitian matrix to block Jacobi form.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::linalg::{full_qr, BlockTridiag};
use crate::randcore::{sample_chi, sample_gfe, sample_sqw, std_normal, FieldTag};
use crate::scalar::CMat;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleParams {
    pub beta: FieldTag,
    /// Number of block rows.
    pub n: usize,
    /// Block size.
    pub r: usize,
    /// Bias parameter.
    pub s: f64,
    /// Laguerre parameter; only the W family reads it.
    pub m: Option<f64>,
}

impl EnsembleParams {
    pub fn hermite(beta: FieldTag, n: usize, r: usize, s: f64) -> Self {
        Self { beta, n, r, s, m: None }
    }

    pub fn laguerre(beta: FieldTag, n: usize, r: usize, s: f64, m: f64) -> Self {
        Self { beta, n, r, s, m: Some(m) }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return domain("n must be at least 1");
        }
        if self.r < 1 {
            return domain("r must be at least 1");
        }
        if !(self.s >= 0.0) || !self.s.is_finite() {
            return domain(format!("s must be a finite value >= 0, got {}", self.s));
        }
        Ok(())
    }

    /// Smallest admissible Laguerre `m`: every SqW dof must stay positive.
    pub fn laguerre_m_bound(&self) -> f64 {
        let (n, r) = (self.n as f64, self.r as f64);
        n - 1.0 + (r - 1.0) / (r + self.s)
    }

    pub fn validate_laguerre(&self) -> Result<f64> {
        self.validate()?;
        let m = self.m.ok_or_else(|| Error::Domain("laguerre needs m".into()))?;
        let bound = self.laguerre_m_bound();
        if !(m > bound) {
            return domain(format!("laguerre requires m > n - 1 + (r-1)/(r+s) = {bound}, got {m}"));
        }
        Ok(m)
    }

    /// `γ = (r+s)/r`.
    pub fn gamma(&self) -> f64 {
        (self.r as f64 + self.s) / self.r as f64
    }
}

/// Hermitian block tridiagonal matrix with lower-triangular,
/// positive-diagonal blocks `B_k` above the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockJacobi {
    pub r: usize,
    pub diag_blocks: Vec<CMat>,
    pub offdiag_blocks: Vec<CMat>,
}

impl BlockJacobi {
    pub fn n(&self) -> usize {
        self.diag_blocks.len()
    }

    pub fn dim(&self) -> usize {
        self.r * self.n()
    }

    pub fn to_dense(&self) -> CMat {
        self.as_tridiag().to_dense()
    }

    pub fn as_tridiag(&self) -> BlockTridiag {
        BlockTridiag { r: self.r, diag: self.diag_blocks.clone(), upper: self.offdiag_blocks.clone() }
    }

    /// Read the blocks of a dense matrix without checking structure.
    pub fn from_dense_blocks(m: &CMat, r: usize) -> Result<Self> {
        let d = m.nrows();
        if d % r != 0 || m.ncols() != d {
            return Err(Error::Dimension(format!("{}x{} is not a multiple of r={r}", d, m.ncols())));
        }
        let n = d / r;
        let diag = (0..n).map(|k| m.view((k * r, k * r), (r, r)).into_owned()).collect();
        let off = (0..n.saturating_sub(1)).map(|k| m.view((k * r, (k + 1) * r), (r, r)).into_owned()).collect();
        Ok(Self { r, diag_blocks: diag, offdiag_blocks: off })
    }

    /// Whether the matrix lies in the block Jacobi set up to `tol`.
    pub fn is_block_jacobi(&self, tol: f64) -> bool {
        let r = self.r;
        let herm = self.diag_blocks.iter().all(|a| (a - a.adjoint()).norm() <= tol);
        let tri = self.offdiag_blocks.iter().all(|b| {
            (0..r).all(|i| {
                b[(i, i)].re > 0.0 && b[(i, i)].im.abs() <= tol && (i + 1..r).all(|j| b[(i, j)].norm() <= tol)
            })
        });
        herm && tri
    }
}

/// Block bidiagonal factor `L` with `D_i` on the diagonal and `O_i` above it.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockBidiagonal {
    pub r: usize,
    pub n: usize,
    pub diag_blocks: Vec<CMat>,
    pub offdiag_blocks: Vec<CMat>,
}

impl BlockBidiagonal {
    pub fn to_dense(&self) -> CMat {
        let (r, n) = (self.r, self.n);
        let mut l = DMatrix::zeros(r * n, r * n);
        for k in 0..n {
            l.view_mut((k * r, k * r), (r, r)).copy_from(&self.diag_blocks[k]);
            if k + 1 < n {
                l.view_mut((k * r, (k + 1) * r), (r, r)).copy_from(&self.offdiag_blocks[k]);
            }
        }
        l
    }

    /// `W = L L†` as a block tridiagonal matrix.
    pub fn gram_tridiag(&self) -> BlockTridiag {
        let n = self.n;
        let mut diag = Vec::with_capacity(n);
        let mut upper = Vec::with_capacity(n.saturating_sub(1));
        for k in 0..n {
            let d = &self.diag_blocks[k];
            let mut w = d * d.adjoint();
            if k + 1 < n {
                let o = &self.offdiag_blocks[k];
                w += o * o.adjoint();
                upper.push(o * self.diag_blocks[k + 1].adjoint());
            }
            diag.push(w);
        }
        BlockTridiag { r: self.r, diag, upper }
    }
}

/// Draw from `H_{β,n}(r,s)`: `A_k ~ GFE(r)`, `B_k ~ SqW_β(r, (r+s)(n-k))`.
pub fn sample_hermite<R: Rng + ?Sized>(p: &EnsembleParams, rng: &mut R) -> Result<BlockJacobi> {
    p.validate()?;
    let (n, r) = (p.n, p.r);
    let mut diag = Vec::with_capacity(n);
    let mut off = Vec::with_capacity(n - 1);
    for _ in 0..n {
        diag.push(sample_gfe(r, p.beta, rng)?);
    }
    for k in 1..n {
        off.push(sample_sqw(r, (r as f64 + p.s) * (n - k) as f64, p.beta, rng)?);
    }
    Ok(BlockJacobi { r, diag_blocks: diag, offdiag_blocks: off })
}

/// The leading `k + 1` diagonal and `k` off-diagonal blocks of a draw from
/// `H_{β,n}(r,s)`, with the same laws as in the full matrix. Edge-local
/// statistics at huge `n` only need this prefix.
pub fn sample_hermite_prefix<R: Rng + ?Sized>(p: &EnsembleParams, k: usize, rng: &mut R) -> Result<BlockJacobi> {
    p.validate()?;
    let (n, r) = (p.n, p.r);
    let k = k.min(n - 1);
    let mut diag = Vec::with_capacity(k + 1);
    let mut off = Vec::with_capacity(k);
    for _ in 0..=k {
        diag.push(sample_gfe(r, p.beta, rng)?);
    }
    for j in 1..=k {
        off.push(sample_sqw(r, (r as f64 + p.s) * (n - j) as f64, p.beta, rng)?);
    }
    Ok(BlockJacobi { r, diag_blocks: diag, offdiag_blocks: off })
}

/// Draw from `W_{β,n,m}(r,s)`: `D_i† ~ SqW_β(r,(r+s)(m+1-i))`,
/// `O_i ~ SqW_β(r,(r+s)(n-i))`. Returns `L` and the dense `W = L L†`.
pub fn sample_laguerre<R: Rng + ?Sized>(p: &EnsembleParams, rng: &mut R) -> Result<(BlockBidiagonal, CMat)> {
    let l = sample_laguerre_factor(p, rng)?;
    let ld = l.to_dense();
    let w = &ld * ld.adjoint();
    Ok((l, w))
}

/// The bidiagonal factor only (no dense product).
pub fn sample_laguerre_factor<R: Rng + ?Sized>(p: &EnsembleParams, rng: &mut R) -> Result<BlockBidiagonal> {
    let m = p.validate_laguerre()?;
    let (n, r) = (p.n, p.r);
    let rs = r as f64 + p.s;
    let mut diag = Vec::with_capacity(n);
    let mut off = Vec::with_capacity(n - 1);
    for i in 1..=n {
        diag.push(sample_sqw(r, rs * (m + 1.0 - i as f64), p.beta, rng)?.adjoint());
    }
    for i in 1..n {
        off.push(sample_sqw(r, rs * (n - i) as f64, p.beta, rng)?);
    }
    Ok(BlockBidiagonal { r, n, diag_blocks: diag, offdiag_blocks: off })
}

/// Scalar Gaussian β-ensemble tridiagonal model for any real `β > 0`:
/// diagonal `N(0, 2/β)`, off-diagonal `χ_{β(n-k)}/√β`.
pub fn sample_beta_tridiagonal<R: Rng + ?Sized>(beta: f64, n: usize, rng: &mut R) -> Result<BlockTridiag> {
    if !(beta > 0.0) || n < 1 {
        return domain("beta tridiagonal needs beta > 0 and n >= 1");
    }
    let sd = (2.0 / beta).sqrt();
    let diag: Vec<f64> = (0..n).map(|_| sd * std_normal(rng)).collect();
    let mut off = Vec::with_capacity(n - 1);
    for k in 1..n {
        off.push(sample_chi(beta * (n - k) as f64, rng)? / beta.sqrt());
    }
    BlockTridiag::scalar(&diag, &off)
}

/// Smallest/largest singular value ratio of `[e, Me, ..., M^{n-1}e]`.
pub fn krylov_conditioning(m: &CMat, r: usize) -> Result<f64> {
    let d = m.nrows();
    if d % r != 0 || m.ncols() != d {
        return Err(Error::Dimension("matrix size must be a multiple of r".into()));
    }
    let n = d / r;
    let mut s = DMatrix::zeros(d, d);
    let mut blk: CMat = DMatrix::zeros(d, r);
    for i in 0..r {
        blk[(i, i)] = Complex64::new(1.0, 0.0);
    }
    for j in 0..n {
        s.view_mut((0, j * r), (d, r)).copy_from(&blk);
        blk = m * blk;
        // rescale power blocks; conditioning of the column space is what matters
        let nb = blk.norm();
        if nb > 0.0 {
            blk /= Complex64::new(nb, 0.0);
        }
    }
    let sv = s.singular_values();
    let mx = sv.iter().cloned().fold(0.0, f64::max);
    let mn = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(if mx > 0.0 { mn / mx } else { 0.0 })
}

/// Reduce hermitian `M` (size `rn`) to block Jacobi form: `O† M O = T` with
/// `O = I_r ⊕ Õ`.
pub fn block_householder(m: &CMat, r: usize) -> Result<(BlockJacobi, CMat)> {
    let d = m.nrows();
    if r == 0 || d % r != 0 || m.ncols() != d {
        return Err(Error::Dimension(format!("{}x{} with r={r}", d, m.ncols())));
    }
    if crate::linalg::hermitian_defect(m) > 1e-10 {
        return domain("block_householder needs a hermitian matrix");
    }
    let ratio = krylov_conditioning(m, r)?;
    if !(ratio > 1e-10) {
        return Err(Error::KrylovDegenerate { ratio });
    }
    let n = d / r;
    let mut t = m.clone();
    let mut o = CMat::identity(d, d);
    for k in 0..n.saturating_sub(1) {
        let row0 = (k + 1) * r;
        let rest = d - row0;
        let x = t.view((row0, k * r), (rest, r)).into_owned();
        let (q, rr) = full_qr(&x);
        for i in 0..r {
            if rr[(i, i)].re <= 0.0 {
                return Err(Error::KrylovDegenerate { ratio: 0.0 });
            }
        }
        // t <- H t H† on the trailing block, with H = q†
        let qh = q.adjoint();
        let rows = t.view((row0, 0), (rest, d)).into_owned();
        t.view_mut((row0, 0), (rest, d)).copy_from(&(&qh * rows));
        let cols = t.view((0, row0), (d, rest)).into_owned();
        t.view_mut((0, row0), (d, rest)).copy_from(&(cols * &q));
        let oc = o.view((0, row0), (d, rest)).into_owned();
        o.view_mut((0, row0), (d, rest)).copy_from(&(oc * &q));
    }
    let mut tj = BlockJacobi::from_dense_blocks(&t, r)?;
    for a in tj.diag_blocks.iter_mut() {
        let h = (&*a + a.adjoint()) * Complex64::new(0.5, 0.0);
        *a = h;
    }
    for b in tj.offdiag_blocks.iter_mut() {
        for i in 0..r {
            b[(i, i)] = Complex64::new(b[(i, i)].re, 0.0);
            for j in i + 1..r {
                b[(i, j)] = Complex64::new(0.0, 0.0);
            }
        }
    }
    Ok((tj, o))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randcore::RngStream;

    #[test]
    fn householder_fixed_point() {
        let mut rng = RngStream::new(3, 0).rng();
        let p = EnsembleParams::hermite(FieldTag::Complex, 3, 2, 1.0);
        let t = sample_hermite(&p, &mut rng).unwrap();
        let (t2, o) = block_householder(&t.to_dense(), 2).unwrap();
        assert!((t2.to_dense() - t.to_dense()).norm() < 1e-12 * t.to_dense().norm().max(1.0) * 10.0);
        assert!((o - CMat::identity(6, 6)).norm() < 1e-12);
    }

    #[test]
    fn laguerre_bound() {
        let p = EnsembleParams::laguerre(FieldTag::Real, 2, 2, 0.0, 1.4);
        assert!(p.validate_laguerre().is_err());
        let p = EnsembleParams::laguerre(FieldTag::Real, 2, 2, 0.0, 1.6);
        assert!(p.validate_laguerre().is_ok());
    }
}

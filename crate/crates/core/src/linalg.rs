//! Dense and block-tridiagonal numerical kernels.
//!
//! Dense hermitian problems go through nalgebra's symmetric eigensolver.
//! For edge statistics only a few extreme eigenvalues of long block
//! tridiagonal matrices are needed; those use a block Sturm count
//! (inertia of the block LDL† Schur complements) plus bisection, which costs
//! `O(n r³)` per count instead of a dense `O((rn)³)` solve.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{domain, Error, Result};
use crate::scalar::CMat;

/// Largest entrywise deviation from hermitian symmetry relative to the norm.
pub fn hermitian_defect(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut d: f64 = 0.0;
    for i in 0..n {
        for j in 0..=i {
            d = d.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    d / m.norm().max(1e-300)
}

/// Ascending eigenvalues and unit eigenvector columns.
///
/// Each eigenvector's first coordinate with modulus above `1e-12` is made
/// real positive, which fixes the phase freedom.
pub fn eigh(m: &CMat) -> Result<(Vec<f64>, CMat)> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!("{}x{} is not square", m.nrows(), m.ncols())));
    }
    if hermitian_defect(m) > 1e-10 {
        return domain("matrix is not hermitian");
    }
    let n = m.nrows();
    let se = SymmetricEigen::new(m.clone());
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
    let vals: Vec<f64> = idx.iter().map(|&i| se.eigenvalues[i]).collect();
    let mut vecs = DMatrix::zeros(n, n);
    for (c, &i) in idx.iter().enumerate() {
        let col = se.eigenvectors.column(i);
        let lead = col.iter().find(|z| z.norm() > 1e-12).copied().unwrap_or(Complex64::new(1.0, 0.0));
        let ph = lead.conj() / lead.norm();
        for rr in 0..n {
            vecs[(rr, c)] = col[rr] * ph;
        }
    }
    Ok((vals, vecs))
}

pub fn eigvalsh(m: &CMat) -> Result<Vec<f64>> {
    if hermitian_defect(m) > 1e-10 {
        return domain("matrix is not hermitian");
    }
    let mut v: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Hermitian block tridiagonal matrix with general off-diagonal blocks.
///
/// `upper[k]` sits at block position `(k, k+1)`; its adjoint is below.
#[derive(Debug, Clone)]
pub struct BlockTridiag {
    pub r: usize,
    pub diag: Vec<CMat>,
    pub upper: Vec<CMat>,
}

impl BlockTridiag {
    pub fn new(r: usize, diag: Vec<CMat>, upper: Vec<CMat>) -> Result<Self> {
        if diag.is_empty() || upper.len() + 1 != diag.len() {
            return Err(Error::Dimension("need n diagonal and n-1 off-diagonal blocks".into()));
        }
        for b in diag.iter().chain(upper.iter()) {
            if b.nrows() != r || b.ncols() != r {
                return Err(Error::Dimension(format!("block is not {r}x{r}")));
            }
        }
        Ok(Self { r, diag, upper })
    }

    /// Scalar tridiagonal (`r = 1`) from real diagonal and off-diagonal.
    pub fn scalar(diag: &[f64], off: &[f64]) -> Result<Self> {
        let c = |x: f64| DMatrix::from_element(1, 1, Complex64::new(x, 0.0));
        Self::new(1, diag.iter().map(|&x| c(x)).collect(), off.iter().map(|&x| c(x)).collect())
    }

    pub fn nblocks(&self) -> usize {
        self.diag.len()
    }

    pub fn dim(&self) -> usize {
        self.r * self.diag.len()
    }

    pub fn to_dense(&self) -> CMat {
        let (r, n) = (self.r, self.nblocks());
        let mut m = DMatrix::zeros(r * n, r * n);
        for k in 0..n {
            m.view_mut((k * r, k * r), (r, r)).copy_from(&self.diag[k]);
            if k + 1 < n {
                m.view_mut((k * r, (k + 1) * r), (r, r)).copy_from(&self.upper[k]);
                m.view_mut(((k + 1) * r, k * r), (r, r)).copy_from(&self.upper[k].adjoint());
            }
        }
        m
    }

    /// Gershgorin interval containing the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let (r, n) = (self.r, self.nblocks());
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for k in 0..n {
            for i in 0..r {
                let c = self.diag[k][(i, i)].re;
                let mut rad = 0.0;
                for j in 0..r {
                    if j != i {
                        rad += self.diag[k][(i, j)].norm();
                    }
                    if k + 1 < n {
                        rad += self.upper[k][(i, j)].norm();
                    }
                    if k > 0 {
                        rad += self.upper[k - 1][(j, i)].norm();
                    }
                }
                lo = lo.min(c - rad);
                hi = hi.max(c + rad);
            }
        }
        (lo, hi)
    }

    /// Number of eigenvalues strictly below `sigma`.
    pub fn count_below(&self, sigma: f64) -> usize {
        let mut ws = SturmWork::new(self.r);
        self.count_below_with(sigma, &mut ws)
    }

    fn count_below_with(&self, sigma: f64, ws: &mut SturmWork) -> usize {
        let r = self.r;
        let n = self.nblocks();
        let scale = 1e-300_f64.max(1e-15 * (self.diag[0].norm() + sigma.abs() + 1.0));
        let mut neg = 0usize;
        for k in 0..n {
            // S = A_k - σI - B_{k-1}† X_{k-1}
            for i in 0..r {
                for j in 0..r {
                    let mut v = self.diag[k][(i, j)];
                    if i == j {
                        v -= sigma;
                    }
                    if k > 0 {
                        let b = &self.upper[k - 1];
                        let mut acc = Complex64::new(0.0, 0.0);
                        for l in 0..r {
                            acc += b[(l, i)].conj() * ws.x[l * r + j];
                        }
                        v -= acc;
                    }
                    ws.s[i * r + j] = v;
                }
            }
            neg += ws.ldl(scale);
            if k + 1 < n {
                ws.solve_into_x(&self.upper[k]);
            }
        }
        neg
    }

    /// `k`-th smallest eigenvalue (0-based) by bisection to absolute `tol`.
    pub fn kth_smallest(&self, k: usize, tol: f64) -> f64 {
        let (mut lo, mut hi) = self.gershgorin();
        let mut ws = SturmWork::new(self.r);
        let tol = tol.max(4.0 * f64::EPSILON * lo.abs().max(hi.abs()));
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if self.count_below_with(mid, &mut ws) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    pub fn kth_largest(&self, k: usize, tol: f64) -> f64 {
        self.kth_smallest(self.dim() - 1 - k, tol)
    }

    /// The `k` smallest eigenvalues, ascending.
    pub fn smallest(&self, k: usize, tol: f64) -> Vec<f64> {
        (0..k.min(self.dim())).map(|i| self.kth_smallest(i, tol)).collect()
    }
}

/// Scratch buffers for the block Sturm recursion.
struct SturmWork {
    r: usize,
    s: Vec<Complex64>,
    d: Vec<f64>,
    x: Vec<Complex64>,
}

impl SturmWork {
    fn new(r: usize) -> Self {
        Self { r, s: vec![Complex64::new(0.0, 0.0); r * r], d: vec![0.0; r], x: vec![Complex64::new(0.0, 0.0); r * r] }
    }

    /// In-place LDL† of `s` (unit lower factor stored below the diagonal).
    /// Returns the number of negative pivots. Exact-zero pivots are nudged.
    fn ldl(&mut self, tiny: f64) -> usize {
        let r = self.r;
        let mut neg = 0;
        for j in 0..r {
            let mut dj = self.s[j * r + j].re;
            for l in 0..j {
                dj -= self.s[j * r + l].norm_sqr() * self.d[l];
            }
            if dj.abs() < tiny {
                dj = if dj < 0.0 { -tiny } else { tiny };
            }
            self.d[j] = dj;
            if dj < 0.0 {
                neg += 1;
            }
            for i in j + 1..r {
                let mut v = self.s[i * r + j];
                for l in 0..j {
                    v -= self.s[i * r + l] * self.s[j * r + l].conj() * self.d[l];
                }
                self.s[i * r + j] = v / dj;
            }
        }
        neg
    }

    /// `x = S^{-1} b` using the factor from [`Self::ldl`].
    fn solve_into_x(&mut self, b: &CMat) {
        let r = self.r;
        for c in 0..r {
            // forward: L y = b
            for i in 0..r {
                let mut v = b[(i, c)];
                for l in 0..i {
                    v -= self.s[i * r + l] * self.x[l * r + c];
                }
                self.x[i * r + c] = v;
            }
            for i in 0..r {
                self.x[i * r + c] /= self.d[i];
            }
            // backward: L† x = y
            for i in (0..r).rev() {
                let mut v = self.x[i * r + c];
                for l in i + 1..r {
                    v -= self.s[l * r + i].conj() * self.x[l * r + c];
                }
                self.x[i * r + c] = v;
            }
        }
    }
}

/// Full Householder QR: `x = q r` with `q` unitary `m×m`, `r` upper
/// trapezoidal `m×c`, and `diag(r)` real nonnegative.
pub fn full_qr(x: &CMat) -> (CMat, CMat) {
    let (m, c) = (x.nrows(), x.ncols());
    let mut r = x.clone();
    let mut q = CMat::identity(m, m);
    for j in 0..c.min(m) {
        let norm: f64 = (j..m).map(|i| r[(i, j)].norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let x0 = r[(j, j)];
        let ph = if x0.norm() > 0.0 { x0 / x0.norm() } else { Complex64::new(1.0, 0.0) };
        let alpha = -ph * norm;
        let mut v: Vec<Complex64> = (j..m).map(|i| r[(i, j)]).collect();
        v[0] -= alpha;
        let vn: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        if vn == 0.0 {
            continue;
        }
        // r <- (I - 2 v v†/|v|²) r on rows j..m
        for col in 0..c {
            let mut dot = Complex64::new(0.0, 0.0);
            for (t, vi) in v.iter().enumerate() {
                dot += vi.conj() * r[(j + t, col)];
            }
            let f = dot * (2.0 / vn);
            for (t, vi) in v.iter().enumerate() {
                r[(j + t, col)] -= vi * f;
            }
        }
        // q <- q (I - 2 v v†/|v|²)
        for row in 0..m {
            let mut dot = Complex64::new(0.0, 0.0);
            for (t, vi) in v.iter().enumerate() {
                dot += q[(row, j + t)] * vi;
            }
            let f = dot * (2.0 / vn);
            for (t, vi) in v.iter().enumerate() {
                q[(row, j + t)] -= f * vi.conj();
            }
        }
        for i in j + 1..m {
            r[(i, j)] = Complex64::new(0.0, 0.0);
        }
    }
    // make diag(r) real nonnegative
    for j in 0..c.min(m) {
        let d = r[(j, j)];
        if d.norm() > 0.0 {
            let ph = d / d.norm();
            for col in 0..c {
                r[(j, col)] *= ph.conj();
            }
            for row in 0..m {
                q[(row, j)] *= ph;
            }
            r[(j, j)] = Complex64::new(r[(j, j)].re, 0.0);
        }
    }
    (q, r)
}

/// Pfaffian of a real skew matrix (row-major `2m×2m`) by pivoted
/// skew elimination. Returns `(sign, ln|Pf|)`; sign is 0 for a zero Pfaffian.
pub fn pfaffian_log(a: &[f64], dim: usize) -> (f64, f64) {
    assert_eq!(a.len(), dim * dim);
    if dim % 2 == 1 {
        return (0.0, f64::NEG_INFINITY);
    }
    let mut a = a.to_vec();
    let at = |a: &Vec<f64>, i: usize, j: usize| a[i * dim + j];
    let mut sign = 1.0;
    let mut logabs = 0.0;
    let mut k = 0;
    while k < dim {
        // pivot: largest |a[k][p]| for p > k
        let mut p = k + 1;
        let mut best = at(&a, k, p).abs();
        for q in k + 2..dim {
            let v = at(&a, k, q).abs();
            if v > best {
                best = v;
                p = q;
            }
        }
        if best == 0.0 {
            return (0.0, f64::NEG_INFINITY);
        }
        if p != k + 1 {
            // symmetric swap of k+1 and p flips the Pfaffian sign
            for c in 0..dim {
                a.swap((k + 1) * dim + c, p * dim + c);
            }
            for rr in 0..dim {
                a.swap(rr * dim + k + 1, rr * dim + p);
            }
            sign = -sign;
        }
        let alpha = at(&a, k, k + 1);
        if alpha < 0.0 {
            sign = -sign;
        }
        logabs += alpha.abs().ln();
        for i in k + 2..dim {
            let ui = at(&a, k, i);
            let vi = at(&a, k + 1, i);
            for j in k + 2..dim {
                let uj = at(&a, k, j);
                let vj = at(&a, k + 1, j);
                a[i * dim + j] -= (ui * vj - vi * uj) / alpha;
            }
        }
        k += 2;
    }
    (sign, logabs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randcore::{sample_gfe, FieldTag, RngStream};

    #[test]
    fn eigh_diag() {
        let m = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 1.0, 2.0]).map(|x| Complex64::new(x, 0.0)));
        let (v, q) = eigh(&m).unwrap();
        assert_eq!(v.len(), 3);
        assert!((v[0] - 1.0).abs() < 1e-14 && (v[2] - 3.0).abs() < 1e-14);
        assert!((q[(1, 0)].re - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sturm_matches_dense() {
        let mut rng = RngStream::new(9, 0).rng();
        for tag in [FieldTag::Real, FieldTag::Complex] {
            for r in 1..=3 {
                let n = 5;
                let diag: Vec<CMat> = (0..n).map(|_| sample_gfe(r, tag, &mut rng).unwrap()).collect();
                let upper: Vec<CMat> =
                    (0..n - 1).map(|_| crate::randcore::sample_ginibre(r, r, tag, &mut rng)).collect();
                let bt = BlockTridiag::new(r, diag, upper).unwrap();
                let ev = eigvalsh(&bt.to_dense()).unwrap();
                for (k, e) in ev.iter().enumerate() {
                    assert!((bt.kth_smallest(k, 1e-12) - e).abs() < 1e-9, "r={r} k={k}");
                }
            }
        }
    }

    #[test]
    fn pfaffian_4x4() {
        let (a12, a13, a14, a23, a24, a34) = (1.5, -2.0, 0.7, 3.0, 1.1, -0.4);
        let m = [
            0.0, a12, a13, a14, -a12, 0.0, a23, a24, -a13, -a23, 0.0, a34, -a14, -a24, -a34, 0.0,
        ];
        let (s, l) = pfaffian_log(&m, 4);
        let want = a12 * a34 - a13 * a24 + a14 * a23;
        assert!((s * l.exp() - want).abs() < 1e-12);
    }
}

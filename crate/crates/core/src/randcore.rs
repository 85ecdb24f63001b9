//! Field-generic random primitives.
//!
//! All samplers draw from an explicitly passed generator. [`RngStream`]
//! turns a `(master_seed, stream_index)` pair into an independent ChaCha
//! stream, so parallel or reordered work stays reproducible.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::scalar::CMat;

/// Real (β=1) or complex (β=2) scalars.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FieldTag {
    Real,
    Complex,
}

impl FieldTag {
    pub fn from_beta(beta: u32) -> Result<Self> {
        match beta {
            1 => Ok(FieldTag::Real),
            2 => Ok(FieldTag::Complex),
            b => domain(format!("beta must be 1 or 2, got {b}")),
        }
    }

    pub fn beta(self) -> u32 {
        match self {
            FieldTag::Real => 1,
            FieldTag::Complex => 2,
        }
    }

    pub fn betaf(self) -> f64 {
        self.beta() as f64
    }
}

pub type StreamRng = ChaCha8Rng;

/// Seed plus stream index. Distinct pairs give independent sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        Self { master_seed, stream_index }
    }

    pub fn rng(&self) -> StreamRng {
        let mut r = ChaCha8Rng::seed_from_u64(self.master_seed);
        r.set_stream(self.stream_index);
        r
    }

    /// Child stream for sub-task `k`; keeps the seed, mixes the index.
    pub fn child(&self, k: u64) -> Self {
        let mixed = self
            .stream_index
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(k.wrapping_mul(0xBF58_476D_1CE4_E5B9))
            ^ 0x94D0_49BB_1331_11EB;
        Self { master_seed: self.master_seed, stream_index: mixed }
    }
}

pub fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// 𝔽N(0,1): each real component has variance 1/β, so `E|x|² = 1`.
pub fn sample_fnormal<R: Rng + ?Sized>(tag: FieldTag, rng: &mut R) -> Complex64 {
    match tag {
        FieldTag::Real => Complex64::new(std_normal(rng), 0.0),
        FieldTag::Complex => {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            Complex64::new(s * std_normal(rng), s * std_normal(rng))
        }
    }
}

/// χ with real `dof > 0`, drawn as `sqrt(2 Gamma(dof/2, 1))`.
pub fn sample_chi<R: Rng + ?Sized>(dof: f64, rng: &mut R) -> Result<f64> {
    if !(dof > 0.0) || !dof.is_finite() {
        return domain(format!("chi dof must be positive, got {dof}"));
    }
    let g = Gamma::new(dof / 2.0, 1.0).map_err(|e| crate::Error::Domain(e.to_string()))?;
    let x: f64 = g.sample(rng);
    Ok((2.0 * x).sqrt())
}

/// 𝔽N(0,1) matrix with i.i.d. entries.
pub fn sample_ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, tag: FieldTag, rng: &mut R) -> CMat {
    let mut m = DMatrix::zeros(rows, cols);
    // column-major fill keeps the draw order fixed
    for j in 0..cols {
        for i in 0..rows {
            m[(i, j)] = sample_fnormal(tag, rng);
        }
    }
    m
}

/// GFE(r): `(Y + Y†)/√2`, exactly hermitian.
pub fn sample_gfe<R: Rng + ?Sized>(r: usize, tag: FieldTag, rng: &mut R) -> Result<CMat> {
    if r < 1 {
        return domain("GFE size must be at least 1");
    }
    let y = sample_ginibre(r, r, tag, rng);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut x = DMatrix::zeros(r, r);
    for i in 0..r {
        x[(i, i)] = Complex64::new(2.0 * y[(i, i)].re * s, 0.0);
        for j in 0..i {
            let v = (y[(i, j)] + y[(j, i)].conj()) * s;
            x[(i, j)] = v;
            x[(j, i)] = v.conj();
        }
    }
    Ok(x)
}

/// Haar 𝔽-unitary `d×d`: QR of a Ginibre matrix with positive `diag(R)`.
pub fn sample_haar<R: Rng + ?Sized>(d: usize, tag: FieldTag, rng: &mut R) -> Result<CMat> {
    if d < 1 {
        return domain("Haar dimension must be at least 1");
    }
    let g = sample_ginibre(d, d, tag, rng);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        let rjj = r[(j, j)];
        let a = rjj.norm();
        if a > 0.0 {
            let ph = rjj / a;
            for i in 0..d {
                q[(i, j)] *= ph;
            }
        }
    }
    if tag == FieldTag::Real {
        q.iter_mut().for_each(|z| z.im = 0.0);
    }
    Ok(q)
}

/// Square-root Wishart `SqW_β(r, m)`: lower triangular, `χ_{β(m+1-i)}/√β`
/// on the diagonal and 𝔽N(0,1) below it.
pub fn sample_sqw<R: Rng + ?Sized>(r: usize, m: f64, tag: FieldTag, rng: &mut R) -> Result<CMat> {
    if r < 1 {
        return domain("SqW size must be at least 1");
    }
    if !(m > r as f64 - 1.0) {
        return domain(format!("SqW requires m > r - 1 (r = {r}, m = {m})"));
    }
    let beta = tag.betaf();
    let mut l = DMatrix::zeros(r, r);
    for i in 0..r {
        let dof = beta * (m - i as f64);
        l[(i, i)] = Complex64::new(sample_chi(dof, rng)? / beta.sqrt(), 0.0);
        for j in 0..i {
            l[(i, j)] = sample_fnormal(tag, rng);
        }
    }
    Ok(l)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproducible_streams() {
        let draw = |s: RngStream| {
            let mut r = s.rng();
            (0..5).map(|_| std_normal(&mut r)).collect::<Vec<_>>()
        };
        assert_eq!(draw(RngStream::new(42, 3)), draw(RngStream::new(42, 3)));
        assert_ne!(draw(RngStream::new(42, 3)), draw(RngStream::new(42, 4)));
    }

    #[test]
    fn chi_rejects_nonpositive() {
        let mut r = RngStream::new(1, 0).rng();
        assert!(sample_chi(0.0, &mut r).is_err());
        assert!(sample_chi(-1.0, &mut r).is_err());
    }

    #[test]
    fn sqw_shape() {
        let mut r = RngStream::new(1, 0).rng();
        let l = sample_sqw(3, 4.0, FieldTag::Complex, &mut r).unwrap();
        for i in 0..3 {
            assert!(l[(i, i)].re > 0.0 && l[(i, i)].im == 0.0);
            for j in i + 1..3 {
                assert_eq!(l[(i, j)], Complex64::new(0.0, 0.0));
            }
        }
        assert!(sample_sqw(3, 2.0, FieldTag::Real, &mut r).is_err());
    }

    #[test]
    fn haar_unitary() {
        let mut r = RngStream::new(5, 0).rng();
        for tag in [FieldTag::Real, FieldTag::Complex] {
            let q = sample_haar(4, tag, &mut r).unwrap();
            let e = q.adjoint() * &q - CMat::identity(4, 4);
            assert!(e.norm() < 1e-12);
        }
    }
}

//! Joint eigenvalue densities of the block ensembles, their normalizing
//! constants, determinant moments over Haar and Gaussian matrices, an
//! adaptive Metropolis sampler, and the energy-distance permutation test.

use nalgebra::DMatrix;
use num_complex::Complex64;
use num_rational::BigRational;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::ensembles::{sample_hermite, sample_laguerre, EnsembleParams};
use crate::error::{domain, Error, Result};
use crate::linalg::{eigvalsh, pfaffian_log};
use crate::randcore::{sample_ginibre, sample_haar, std_normal, FieldTag, RngStream};
use crate::scalar::{to_f64, ExactScalar};
use crate::spectra::eigh_banded;
use crate::vdm::{enumerate_equipartitions, partition_power_sum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Hermite,
    Laguerre,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensitySpec {
    pub family: Family,
    pub beta: FieldTag,
    pub n: usize,
    pub r: usize,
    pub s: f64,
    /// Laguerre only; `a = m − n`.
    pub m: Option<f64>,
}

fn close(x: f64, y: f64) -> bool {
    (x - y).abs() < 1e-9
}

impl DensitySpec {
    pub fn hermite(beta: FieldTag, n: usize, r: usize, s: f64) -> Self {
        Self { family: Family::Hermite, beta, n, r, s, m: None }
    }

    pub fn laguerre(beta: FieldTag, n: usize, r: usize, s: f64, m: f64) -> Self {
        Self { family: Family::Laguerre, beta, n, r, s, m: Some(m) }
    }

    /// The determinant exponent `βs`.
    pub fn bs(&self) -> f64 {
        self.beta.betaf() * self.s
    }

    /// `βs/2` as an integer power, when the regime has a closed form.
    pub fn half_bs(&self) -> Result<u32> {
        self.validate()?;
        Ok(if close(self.bs(), 2.0) { 1 } else { 2 })
    }

    pub fn dim(&self) -> usize {
        self.n * self.r
    }

    pub fn params(&self) -> EnsembleParams {
        match self.family {
            Family::Hermite => EnsembleParams::hermite(self.beta, self.n, self.r, self.s),
            Family::Laguerre => EnsembleParams::laguerre(self.beta, self.n, self.r, self.s, self.m.unwrap_or(f64::NAN)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return domain("n must be at least 1");
        }
        let bs = self.bs();
        let ok = (self.r >= 2 && close(bs, 2.0)) || (self.r == 2 && close(bs, 4.0));
        if !ok {
            return domain(format!(
                "no closed-form density for r={}, beta*s={bs}; need r>=2 with beta*s=2, or r=2 with beta*s=4",
                self.r
            ));
        }
        if self.family == Family::Laguerre {
            self.params().validate_laguerre()?;
        }
        Ok(())
    }

    /// Exponent of `λ_i` in the Laguerre weight, `(β/2)((r+s)a + 1 + s) − 1`.
    ///
    /// This is the exponent the sampled ensemble follows (checked by the
    /// head-on MCMC test); at `s = 0` it is the Wishart `(β/2)(r a + 1) − 1`.
    pub fn laguerre_power(&self) -> f64 {
        self.laguerre_power_printed() + 0.5 * self.beta.betaf() * self.s
    }

    /// `(β/2)((r+s)a + 1) − 1`, without the `s` shift. Kept so the mismatch
    /// with the sampled ensemble can be exhibited.
    pub fn laguerre_power_printed(&self) -> f64 {
        let b = self.beta.betaf();
        let a = self.m.unwrap_or(f64::NAN) - self.n as f64;
        0.5 * b * ((self.r as f64 + self.s) * a + 1.0) - 1.0
    }
}

/// How the interaction factor is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InteractionForm {
    /// `log Σ_P ∏ |Δ(A_j)|^{βs}` by log-sum-exp over equipartitions.
    PartitionSum,
    /// `n log 2 + (βs/2)(log|Δ| + log|Pf(1/(λ_i−λ_j))|)`, `r = 2` only.
    Pfaffian,
}

/// Cached evaluator for one density; the equipartition list is built once.
#[derive(Debug, Clone)]
pub struct DensityEvaluator {
    pub spec: DensitySpec,
    pub form: InteractionForm,
    half_bs: u32,
    /// Each partition as the list of index pairs `(i,j)` inside one block.
    pairs: Vec<Vec<(usize, usize)>>,
}

impl DensityEvaluator {
    pub fn new(spec: DensitySpec) -> Result<Self> {
        let form = if spec.dim() <= 12 && crate::vdm::count_equipartitions(spec.r, spec.n) <= 2.0e6 {
            InteractionForm::PartitionSum
        } else if spec.r == 2 {
            InteractionForm::Pfaffian
        } else {
            return Err(Error::Guard {
                what: format!("partition sum for r={}, n={}", spec.r, spec.n),
                estimate: crate::vdm::count_equipartitions(spec.r, spec.n),
            });
        };
        Self::with_form(spec, form)
    }

    pub fn with_form(spec: DensitySpec, form: InteractionForm) -> Result<Self> {
        let half_bs = spec.half_bs()?;
        let pairs = match form {
            InteractionForm::PartitionSum => {
                if spec.dim() > 12 {
                    return Err(Error::Guard { what: "partition sum needs rn <= 12".into(), estimate: spec.dim() as f64 });
                }
                enumerate_equipartitions(spec.r, spec.n)?
                    .into_iter()
                    .map(|p| {
                        let mut v = Vec::new();
                        for b in &p.blocks {
                            for (x, &i) in b.iter().enumerate() {
                                for &j in &b[x + 1..] {
                                    v.push((i, j));
                                }
                            }
                        }
                        v
                    })
                    .collect()
            }
            InteractionForm::Pfaffian => {
                if spec.r != 2 {
                    return domain("the Pfaffian form needs r = 2");
                }
                Vec::new()
            }
        };
        Ok(Self { spec, form, half_bs, pairs })
    }

    /// Log of the symmetrized unnormalized density.
    pub fn log_density(&self, lam: &[f64]) -> Result<f64> {
        let d = self.spec.dim();
        if lam.len() != d {
            return Err(Error::Dimension(format!("expected {d} eigenvalues, got {}", lam.len())));
        }
        if lam.iter().any(|x| !x.is_finite()) {
            return domain("eigenvalues must be finite");
        }
        let beta = self.spec.beta.betaf();
        let weight = match self.spec.family {
            Family::Hermite => -0.25 * beta * lam.iter().map(|x| x * x).sum::<f64>(),
            Family::Laguerre => {
                if lam.iter().any(|&x| x <= 0.0) {
                    return Ok(f64::NEG_INFINITY);
                }
                let p = self.spec.laguerre_power();
                lam.iter().map(|&x| p * x.ln() - 0.5 * beta * x).sum()
            }
        };
        let mut logd = vec![0.0; d * d];
        let mut log_delta = 0.0;
        let mut gap = f64::INFINITY;
        for i in 0..d {
            for j in i + 1..d {
                let g = (lam[i] - lam[j]).abs();
                gap = gap.min(g);
                let l = g.ln();
                logd[i * d + j] = l;
                log_delta += l;
            }
        }
        let p = self.half_bs as f64;
        let inter = match self.form {
            InteractionForm::PartitionSum => {
                if gap == 0.0 {
                    return Ok(f64::NEG_INFINITY);
                }
                let terms: Vec<f64> =
                    self.pairs.iter().map(|pp| 2.0 * p * pp.iter().map(|&(i, j)| logd[i * d + j]).sum::<f64>()).collect();
                log_sum_exp(&terms)
            }
            InteractionForm::Pfaffian => {
                if gap < 1e-10 {
                    return Err(Error::CoincidentPoints { gap });
                }
                let mut k = vec![0.0; d * d];
                for i in 0..d {
                    for j in 0..d {
                        if i != j {
                            k[i * d + j] = 1.0 / (lam[i] - lam[j]);
                        }
                    }
                }
                let (_, lpf) = pfaffian_log(&k, d);
                self.spec.n as f64 * std::f64::consts::LN_2 + p * (log_delta + lpf)
            }
        };
        Ok(beta * log_delta + inter + weight)
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// One-shot density evaluation; see [`DensityEvaluator`] for repeated use.
pub fn log_unnorm_density(spec: &DensitySpec, lam: &[f64]) -> Result<f64> {
    DensityEvaluator::new(*spec)?.log_density(lam)
}

/// Log normalizing constant of the Hermite density over all of `ℝ^{rn}`.
pub fn log_z(spec: &DensitySpec) -> Result<f64> {
    spec.validate()?;
    if spec.family != Family::Hermite {
        return domain("closed-form normalizer is only available for the Hermite family");
    }
    let (n, r, s) = (spec.n as f64, spec.r as f64, spec.s);
    let b = spec.beta.betaf();
    let nr = spec.n * spec.r;
    let a = -0.25 * b * n * r * (n * (r + s) + s) + (0.25 * b - 0.5) * n * r;
    let mut z = ln_gamma(nr as f64 + 1.0) + 0.5 * nr as f64 * (2.0 * std::f64::consts::PI).ln() + a * (0.5 * b).ln()
        - nr as f64 * ln_gamma(0.5 * b);
    for k in 1..=nr {
        let ceil = k.div_ceil(spec.r) as f64;
        z += ln_gamma(0.5 * b * (k as f64 + s * ceil));
    }
    if close(spec.bs(), 4.0) {
        z += n * (b / 12.0).ln();
    }
    Ok(z)
}

/// `(ln c, ln κ)`: Haar moment constant and Gaussian reduction ratio for
/// the exponent `βs = beta·s`. `c` is `None` outside `βs ∈ {2,4}`.
pub fn moment_constants(n: usize, beta: FieldTag, r: usize, s: f64) -> Result<(Option<f64>, f64)> {
    if !(s > 0.0) || n == 0 || r == 0 {
        return domain("moment constants need n, r >= 1 and s > 0");
    }
    let b = beta.betaf();
    let (nf, rf) = (n as f64, r as f64);
    let mut lk = 0.5 * b * rf * s * nf * (0.5 * b).ln();
    for i in 1..=r {
        let i = i as f64;
        lk += ln_gamma(0.5 * b * (rf * nf + 1.0 - i)) - ln_gamma(0.5 * b * ((rf + s) * nf + 1.0 - i));
    }
    let bs = b * s;
    let lc = if close(bs, 2.0) && r >= 2 {
        Some(lk)
    } else if close(bs, 4.0) && r == 2 {
        Some(lk + nf * (12.0 / b).ln())
    } else {
        None
    };
    Ok((lc, lk))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MomentMode {
    Haar,
    Gaussian,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub n: usize,
}

/// Monte-Carlo mean of `|det M(λ, ·)|^{βs}` with the first `r` rows of a
/// Haar matrix, or an `r × rn` Gaussian matrix.
pub fn mc_moment(
    lam: &[f64],
    r: usize,
    beta: FieldTag,
    exponent: f64,
    n_samples: usize,
    mode: MomentMode,
    stream: &RngStream,
) -> Result<MomentEstimate> {
    let d = lam.len();
    if r == 0 || d % r != 0 {
        return Err(Error::Dimension(format!("{d} eigenvalues do not split into blocks of {r}")));
    }
    if n_samples < 1000 {
        return domain("mc_moment needs at least 1000 samples");
    }
    let mut rng = stream.rng();
    let mut sum = 0.0;
    let mut sum2 = 0.0;
    let mut m = DMatrix::<Complex64>::zeros(d, d);
    for _ in 0..n_samples {
        let q = match mode {
            MomentMode::Haar => sample_haar(d, beta, &mut rng)?.rows(0, r).into_owned(),
            MomentMode::Gaussian => sample_ginibre(r, d, beta, &mut rng),
        };
        for i in 0..d {
            let mut pw = 1.0;
            for k in 0..d / r {
                for a in 0..r {
                    m[(i, k * r + a)] = q[(a, i)] * pw;
                }
                pw *= lam[i];
            }
        }
        let v = m.clone().lu().determinant().norm().powf(exponent);
        sum += v;
        sum2 += v * v;
    }
    let nf = n_samples as f64;
    let mean = sum / nf;
    let var = (sum2 / nf - mean * mean).max(0.0) * nf / (nf - 1.0);
    Ok(MomentEstimate { estimate: mean, std_error: (var / nf).sqrt(), n: n_samples })
}

/// Exact `Σ_P ∏_j Δ(A_j)^{2p}` at the binary value of each `λ_i`.
pub fn exact_partition_sum(lam: &[f64], r: usize, p: u32) -> Result<f64> {
    let ex: Vec<ExactScalar> = lam
        .iter()
        .map(|&x| BigRational::from_float(x).ok_or_else(|| Error::Domain("non-finite lambda".into())))
        .collect::<Result<_>>()?;
    Ok(to_f64(&partition_power_sum(&ex, r, p)?))
}

// ---------------------------------------------------------------------------
// MCMC

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct McmcConfig {
    pub n_chains: usize,
    pub burn_in: usize,
    /// Samples kept per chain after burn-in.
    pub per_chain: usize,
    pub thin: usize,
    pub target_acceptance: f64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self { n_chains: 500, burn_in: 3000, per_chain: 20, thin: 60, target_acceptance: 0.3 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McmcBatch {
    /// Sorted eigenvalue vectors, chain-major.
    pub samples: Vec<Vec<f64>>,
    /// Post burn-in acceptance rate over all chains.
    pub acceptance: f64,
    pub min_chain_acceptance: f64,
    pub max_chain_acceptance: f64,
    pub reinitialized: usize,
}

fn initial_point<R: Rng + ?Sized>(spec: &DensitySpec, rng: &mut R) -> Result<Vec<f64>> {
    let d = spec.dim();
    let g = sample_ginibre(d, d, spec.beta, rng);
    let mut v = match spec.family {
        Family::Hermite => {
            let h = (&g + g.adjoint()) * Complex64::new((0.5 * (spec.r as f64 + spec.s) / spec.r as f64).sqrt(), 0.0);
            eigvalsh(&h)?
        }
        Family::Laguerre => {
            let c = ((spec.r as f64 + spec.s) * spec.m.unwrap_or(1.0)).ceil().max(d as f64) as usize;
            let x = sample_ginibre(d, c, spec.beta, rng);
            eigvalsh(&(&x * x.adjoint()))?
        }
    };
    v.iter_mut().for_each(|x| *x += 1e-9 * std_normal(rng));
    Ok(v)
}

/// Random-walk Metropolis on `ℝ^{rn}` (on `log λ` for Laguerre) with the
/// proposal scale tuned by Robbins-Monro during burn-in and frozen after.
pub fn mcmc_sample(spec: &DensitySpec, cfg: &McmcConfig, stream: &RngStream) -> Result<McmcBatch> {
    let ev = DensityEvaluator::new(*spec)?;
    if spec.dim() > 8 {
        return Err(Error::Guard { what: "mcmc is limited to rn <= 8".into(), estimate: spec.dim() as f64 });
    }
    let d = spec.dim();
    let lag = spec.family == Family::Laguerre;
    // log target in the working coordinates
    let target = |y: &[f64], buf: &mut Vec<f64>| -> f64 {
        buf.clear();
        if lag {
            buf.extend(y.iter().map(|v| v.exp()));
        } else {
            buf.extend_from_slice(y);
        }
        let jac: f64 = if lag { y.iter().sum() } else { 0.0 };
        match ev.log_density(buf) {
            Ok(v) => v + jac,
            Err(_) => f64::NEG_INFINITY,
        }
    };
    let mut samples = Vec::with_capacity(cfg.n_chains * cfg.per_chain);
    let mut accepted = 0usize;
    let mut proposed = 0usize;
    let mut reinit = 0usize;
    let (mut amin, mut amax) = (f64::INFINITY, 0.0f64);
    let mut buf = Vec::with_capacity(d);
    for c in 0..cfg.n_chains {
        let mut rng = stream.child(c as u64).rng();
        let mut x;
        let mut lp;
        let mut tries = 0;
        loop {
            let v = initial_point(spec, &mut rng)?;
            x = if lag { v.iter().map(|t| t.max(1e-12).ln()).collect() } else { v };
            lp = target(&x, &mut buf);
            if lp.is_finite() {
                break;
            }
            reinit += 1;
            tries += 1;
            if tries > 100 {
                return Err(Error::Degenerate("could not initialize a chain on the support".into()));
            }
        }
        let mut log_scale: f64 = if lag { (0.3f64).ln() } else { (0.5 * (spec.r as f64 + spec.s).sqrt() / d as f64).ln() };
        let mut prop = vec![0.0; d];
        let total = cfg.burn_in + cfg.per_chain * cfg.thin;
        let (mut acc_c, mut prop_c) = (0usize, 0usize);
        for t in 0..total {
            let sc = log_scale.exp();
            for (p, xi) in prop.iter_mut().zip(&x) {
                *p = xi + sc * std_normal(&mut rng);
            }
            let lq = target(&prop, &mut buf);
            let ok = lq.is_finite() && (lq - lp >= 0.0 || rng.random::<f64>().ln() < lq - lp);
            if ok {
                x.copy_from_slice(&prop);
                lp = lq;
            }
            if t < cfg.burn_in {
                let step = 1.0 / (1.0 + t as f64).powf(0.6);
                log_scale += step * (f64::from(u8::from(ok)) - cfg.target_acceptance);
            } else {
                prop_c += 1;
                acc_c += usize::from(ok);
                if (t - cfg.burn_in + 1) % cfg.thin == 0 {
                    let mut v: Vec<f64> = if lag { x.iter().map(|t| t.exp()).collect() } else { x.clone() };
                    v.sort_by(f64::total_cmp);
                    samples.push(v);
                }
            }
        }
        accepted += acc_c;
        proposed += prop_c;
        let a = acc_c as f64 / prop_c.max(1) as f64;
        amin = amin.min(a);
        amax = amax.max(a);
    }
    Ok(McmcBatch {
        samples,
        acceptance: accepted as f64 / proposed.max(1) as f64,
        min_chain_acceptance: amin,
        max_chain_acceptance: amax,
        reinitialized: reinit,
    })
}

// ---------------------------------------------------------------------------
// Energy test

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergyTest {
    /// `E = 2 E|X−Y| − E|X−X'| − E|Y−Y'|` (V-statistic).
    pub energy: f64,
    /// `nm/(n+m) · E`.
    pub statistic: f64,
    pub p_value: f64,
    pub n_a: usize,
    pub n_b: usize,
    pub n_permutations: usize,
}

/// Two-sample energy-distance permutation test.
///
/// All label vectors (observed first) form the columns of `S`; the
/// quadratic forms `sᵀ D s` are accumulated from row blocks of the pooled
/// distance matrix times `S`, so `D` is never held whole.
pub fn gof_energy(a: &[Vec<f64>], b: &[Vec<f64>], n_permutations: usize, stream: &RngStream) -> Result<EnergyTest> {
    let (na, nb) = (a.len(), b.len());
    if na < 2 || nb < 2 {
        return domain("energy test needs at least two points per sample");
    }
    let dim = a[0].len();
    if a.iter().chain(b).any(|v| v.len() != dim) {
        return Err(Error::Dimension("samples have different dimensions".into()));
    }
    let pooled: Vec<&[f64]> = a.iter().chain(b).map(|v| v.as_slice()).collect();
    let n = na + nb;
    let k = n_permutations + 1;
    let wa = 1.0 / na as f64;
    let wb = -1.0 / nb as f64;
    let mut labels: Vec<f32> = (0..n).map(|i| if i < na { wa as f32 } else { wb as f32 }).collect();
    let mut s = DMatrix::<f32>::zeros(n, k);
    let mut rng = stream.rng();
    for c in 0..k {
        if c > 0 {
            labels.shuffle(&mut rng);
        }
        s.column_mut(c).copy_from_slice(&labels);
    }
    let mut totals = vec![0.0f64; k];
    let block = 512;
    let mut i0 = 0;
    while i0 < n {
        let i1 = (i0 + block).min(n);
        let dblk = DMatrix::<f32>::from_fn(i1 - i0, n, |i, j| {
            let (x, y) = (pooled[i0 + i], pooled[j]);
            x.iter().zip(y).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt() as f32
        });
        let p = &dblk * &s;
        for c in 0..k {
            let mut acc = 0.0f64;
            for i in 0..i1 - i0 {
                acc += s[(i0 + i, c)] as f64 * p[(i, c)] as f64;
            }
            totals[c] += acc;
        }
        i0 = i1;
    }
    let obs = -totals[0];
    let ge = totals[1..].iter().filter(|&&t| -t >= obs).count();
    Ok(EnergyTest {
        energy: obs,
        statistic: obs * (na * nb) as f64 / n as f64,
        p_value: (1 + ge) as f64 / k as f64,
        n_a: na,
        n_b: nb,
        n_permutations,
    })
}

/// Sorted eigenvalues of `count` draws of the ensemble behind `spec`.
pub fn ensemble_spectra(spec: &DensitySpec, count: usize, stream: &RngStream) -> Result<Vec<Vec<f64>>> {
    let p = spec.params();
    let mut rng = stream.rng();
    (0..count)
        .map(|_| match spec.family {
            Family::Hermite => Ok(eigh_banded(&sample_hermite(&p, &mut rng)?)?.eigenvalues),
            Family::Laguerre => eigvalsh(&sample_laguerre(&p, &mut rng)?.1),
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensityTestReport {
    pub spec: DensitySpec,
    pub statistic: f64,
    pub p_value: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub acceptance: f64,
}

/// Ensemble spectra against MCMC draws from the closed-form density.
pub fn density_head_on(spec: &DensitySpec, cfg: &McmcConfig, n_permutations: usize, seed: u64) -> Result<DensityTestReport> {
    spec.validate()?;
    let target = cfg.n_chains * cfg.per_chain;
    let mc = mcmc_sample(spec, cfg, &RngStream::new(seed, 1))?;
    let ens = ensemble_spectra(spec, target, &RngStream::new(seed, 2))?;
    let t = gof_energy(&ens, &mc.samples, n_permutations, &RngStream::new(seed, 3))?;
    Ok(DensityTestReport {
        spec: *spec,
        statistic: t.statistic,
        p_value: t.p_value,
        n_samples: target,
        seed,
        acceptance: mc.acceptance,
    })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ZCheck {
    pub log_z_formula: f64,
    pub log_z_mc: f64,
    /// Standard error of `exp(log_z_mc)` relative to its value.
    pub rel_std_error: f64,
    pub samples: usize,
}

/// Importance-sampling estimate of the Hermite normalizer from an isotropic
/// Gaussian with per-coordinate variance `var`.
pub fn log_z_monte_carlo(spec: &DensitySpec, samples: usize, var: f64, stream: &RngStream) -> Result<ZCheck> {
    let ev = DensityEvaluator::new(*spec)?;
    let d = spec.dim();
    let mut rng = stream.rng();
    let sd = var.sqrt();
    let log_norm = 0.5 * d as f64 * (2.0 * std::f64::consts::PI * var).ln();
    let mut x = vec![0.0; d];
    let mut vals = Vec::with_capacity(samples);
    for _ in 0..samples {
        let mut q2 = 0.0;
        for xi in x.iter_mut() {
            let z = std_normal(&mut rng);
            *xi = sd * z;
            q2 += z * z;
        }
        let lq = -0.5 * q2 - log_norm;
        vals.push(ev.log_density(&x).unwrap_or(f64::NEG_INFINITY) - lq);
    }
    let m = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = vals.iter().map(|v| (v - m).exp()).collect();
    let nf = samples as f64;
    let mean = w.iter().sum::<f64>() / nf;
    let var_w = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    Ok(ZCheck {
        log_z_formula: log_z(spec)?,
        log_z_mc: m + mean.ln(),
        rel_std_error: (var_w / nf).sqrt() / mean,
        samples,
    })
}

//! Edge limits: soft-edge and hard-edge rescalings of the block ensembles,
//! the Riccati particle systems whose explosion or vanishing counts give
//! the limiting eigenvalue counts, discretized stochastic Airy and Bessel
//! operators, and the semicircle check.
//!
//! Sign conventions (checked against the noise-free operators):
//! - soft edge: `dp_i = σ db_i + (r x − λ − p_i² + c Σ_{j≠i} 1/(p_i−p_j)) dx`,
//!   and `P(Λ_k ≤ λ) = P(at least k+1 explosions)`;
//! - hard edge: `P(Λ̂_k ≤ λ) = P(at least k+1 zero crossings)`.
//!
//! The Itô interaction strength `c` is `2/γ` (soft) and the hard-edge
//! pair term carries `1/γ`. [`Interaction::Printed`] keeps the γ-free
//! coefficient instead; the two agree only at `γ = 1`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::ensembles::{
    sample_beta_tridiagonal, sample_hermite, sample_laguerre_factor, BlockBidiagonal, BlockJacobi, EnsembleParams,
};
use crate::error::{domain, Error, Result};
use crate::linalg::{eigvalsh, BlockTridiag};
use crate::randcore::{sample_fnormal, sample_gfe, std_normal, FieldTag, RngStream};
use crate::scalar::CMat;

/// First zero of Ai, `a₁ < 0`.
pub const AIRY_A1: f64 = -2.338107410459767;
/// First positive zero of `J_0`.
pub const BESSEL_J0_1: f64 = 2.404825557695773;
/// First positive zero of `J_1`.
pub const BESSEL_J1_1: f64 = 3.831705970207512;

// ---------------------------------------------------------------------------
// special functions

/// Airy `Ai(x)` from its Maclaurin series. Accurate to about 1e-10 on
/// `[-8, 3]`, which covers the first few zeros.
pub fn airy_ai(x: f64) -> f64 {
    const C1: f64 = 0.355_028_053_887_817_2;
    const C2: f64 = 0.258_819_403_792_806_8;
    let x3 = x * x * x;
    let (mut f, mut g) = (0.0, 0.0);
    let (mut tf, mut tg) = (1.0, x);
    for k in 0..200 {
        f += tf;
        g += tg;
        let k = k as f64;
        tf *= x3 / ((3.0 * k + 2.0) * (3.0 * k + 3.0));
        tg *= x3 / ((3.0 * k + 3.0) * (3.0 * k + 4.0));
        if tf.abs() + tg.abs() < 1e-18 * (f.abs() + g.abs() + 1e-300) {
            break;
        }
    }
    C1 * f - C2 * g
}

/// Bessel `J_a(x)` for `a > -1`, `0 ≤ x ≲ 25`, by its power series.
pub fn bessel_j(a: f64, x: f64) -> f64 {
    let h = 0.5 * x;
    let mut t = h.powf(a) / gamma(a + 1.0);
    let mut sum = 0.0;
    for k in 0..300 {
        sum += t;
        let k = k as f64;
        t *= -h * h / ((k + 1.0) * (k + 1.0 + a));
        if t.abs() < 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

/// Bisection root of `f` on a sign-changing bracket.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let (mut flo, fhi) = (f(lo), f(hi));
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return domain("bisection bracket does not change sign");
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `k`-th zero of Ai (1-based), returned as a negative number.
pub fn airy_zero(k: usize) -> Result<f64> {
    let mut found = 0;
    let step = 0.01;
    let mut x = 0.0;
    while x > -8.0 {
        let y = x - step;
        if airy_ai(x).signum() != airy_ai(y).signum() {
            found += 1;
            if found == k {
                return bisect(airy_ai, y, x, 1e-13);
            }
        }
        x = y;
    }
    domain("airy_zero: only the first few zeros are in range")
}

/// `k`-th positive zero of `J_a` (1-based).
pub fn bessel_j_zero(a: f64, k: usize) -> Result<f64> {
    let f = |x: f64| bessel_j(a, x);
    let step = 0.01;
    let mut x = step;
    let mut found = 0;
    while x < 25.0 {
        let y = x + step;
        if f(x).signum() != f(y).signum() {
            found += 1;
            if found == k {
                return bisect(f, x, y, 1e-13);
            }
        }
        x = y;
    }
    domain("bessel_j_zero: zero out of series range")
}

// ---------------------------------------------------------------------------
// soft edge rescaling

fn gamma_of(r: usize, s: f64) -> f64 {
    (r as f64 + s) / r as f64
}

/// `H_n = γ^{-1/2}(rn)^{1/6}(2√((r+s)n) I − T)`.
pub fn rescale_soft(t: &BlockJacobi, s: f64) -> Result<CMat> {
    let (r, n) = (t.r, t.n());
    if t.diag_blocks.len() != n || t.offdiag_blocks.len() + 1 != n {
        return Err(Error::Dimension("block Jacobi matrix is inconsistent".into()));
    }
    let (c, shift) = soft_affine(n, r, s);
    let d = t.dim();
    Ok((CMat::identity(d, d) * Complex64::new(shift, 0.0) - t.to_dense()) * Complex64::new(c, 0.0))
}

/// `(scale, shift)` with `H_n = scale·(shift·I − T)`.
fn soft_affine(n: usize, r: usize, s: f64) -> (f64, f64) {
    let g = gamma_of(r, s);
    let rn = (r * n) as f64;
    (rn.powf(1.0 / 6.0) / g.sqrt(), 2.0 * ((r as f64 + s) * n as f64).sqrt())
}

/// The `k` smallest eigenvalues of `H_n`, via Sturm counts on `T`.
pub fn soft_edge_smallest(t: &BlockJacobi, s: f64, k: usize) -> Vec<f64> {
    let (c, shift) = soft_affine(t.n(), t.r, s);
    let tri = t.as_tridiag();
    (0..k.min(t.dim())).map(|j| c * (shift - tri.kth_largest(j, 1e-10))).collect()
}

/// Running sums of the centered potential of `H_n` on the grid `x = k/m_n`.
#[derive(Debug, Clone)]
pub struct PotentialSums {
    pub m_n: f64,
    pub x: Vec<f64>,
    /// `Y₁(x_k) = Σ_{i≤k} −A_i/√(γ m_n)`.
    pub y1: Vec<CMat>,
    /// `Y₂(x_k) = Σ_{i≤k} (m_n I − B_i/√(γ m_n))`.
    pub y2: Vec<CMat>,
}

impl PotentialSums {
    /// `Y₁ + Y₂ + Y₂†` at grid index `k`.
    pub fn symmetric(&self, k: usize) -> CMat {
        &self.y1[k] + &self.y2[k] + self.y2[k].adjoint()
    }
}

/// Potential sums of `H_n` for the size-`n` model. `t` may hold only a
/// prefix of the blocks; the sums stop where the data runs out.
pub fn potential_sums(t: &BlockJacobi, n: usize, s: f64) -> Result<PotentialSums> {
    let r = t.r;
    if t.n() > n || t.offdiag_blocks.len() + 1 != t.diag_blocks.len() {
        return Err(Error::Dimension("blocks do not fit an n-block model".into()));
    }
    let m_n = ((r * n) as f64).powf(1.0 / 3.0);
    let sc = Complex64::new(1.0 / (gamma_of(r, s) * m_n).sqrt(), 0.0);
    let len = t.offdiag_blocks.len();
    let mut x = vec![0.0];
    let mut y1 = vec![CMat::zeros(r, r)];
    let mut y2 = vec![CMat::zeros(r, r)];
    for i in 0..len {
        let a = &y1[i] - &t.diag_blocks[i] * sc;
        let b = &y2[i] + CMat::identity(r, r) * Complex64::new(m_n, 0.0) - &t.offdiag_blocks[i] * sc;
        y1.push(a);
        y2.push(b);
        x.push((i + 1) as f64 / m_n);
    }
    Ok(PotentialSums { m_n, x, y1, y2 })
}

// ---------------------------------------------------------------------------
// Riccati particle systems

/// Coefficient of the pairwise interaction in the particle SDEs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Interaction {
    /// Itô drift of the eigenvalue process of the matrix Riccati equation.
    #[default]
    Ito,
    /// The γ-free coefficient (`2` soft, `1` hard).
    Printed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoftEdgeConfig {
    pub r: usize,
    /// Enters only through the diffusion coefficient; any `β > 0`.
    pub beta: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub dx: f64,
    pub x_max: f64,
    pub p_max: f64,
    pub n_paths: usize,
    /// Relative spacing of the starting coordinates below `p_max`.
    pub offset: f64,
    pub interaction: Interaction,
    /// `false` is the formal `βγ → ∞` limit: no diffusion, no Itô terms.
    pub noise: bool,
    /// Keep every `trace_thin`-th step of each path (0: none).
    pub trace_thin: usize,
}

impl SoftEdgeConfig {
    pub fn new(r: usize, beta: f64, gamma: f64, lambda: f64) -> Self {
        Self {
            r,
            beta,
            gamma,
            lambda,
            dx: 2e-3,
            x_max: Self::horizon(lambda),
            p_max: 1e4,
            n_paths: 4000,
            offset: 0.01,
            interaction: Interaction::Ito,
            noise: true,
            trace_thin: 0,
        }
    }

    /// `10 + 2|λ|^{1/2}`.
    pub fn horizon(lambda: f64) -> f64 {
        10.0 + 2.0 * lambda.abs().sqrt()
    }

    /// Same settings at another `λ`, with the horizon recomputed.
    pub fn at(&self, lambda: f64) -> Self {
        Self { lambda, x_max: Self::horizon(lambda), ..*self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.r < 1 {
            return domain("soft edge: r >= 1");
        }
        if !(self.beta > 0.0) || !(self.gamma > 0.0) {
            return domain("soft edge: beta > 0 and gamma > 0");
        }
        if !(self.dx > 0.0) || !(self.x_max > 0.0) {
            return domain("soft edge: dx > 0 and x_max > 0");
        }
        if !(self.p_max >= 1e3) {
            return domain("soft edge: P_max >= 1e3");
        }
        if !(self.offset > 0.0) || self.n_paths == 0 {
            return domain("soft edge: offset > 0 and n_paths >= 1");
        }
        Ok(())
    }

    pub fn sigma(&self) -> f64 {
        if self.noise {
            2.0 / (self.beta * self.gamma).sqrt()
        } else {
            0.0
        }
    }

    pub fn interaction_strength(&self) -> f64 {
        match (self.noise, self.interaction) {
            (false, _) => 0.0,
            (true, Interaction::Ito) => 2.0 / self.gamma,
            (true, Interaction::Printed) => 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardEdgeConfig {
    pub r: usize,
    pub beta: f64,
    pub gamma: f64,
    pub a: f64,
    pub lambda: f64,
    pub dx: f64,
    pub x_max: f64,
    pub q_max: f64,
    pub n_paths: usize,
    pub offset: f64,
    pub interaction: Interaction,
    pub noise: bool,
    pub trace_thin: usize,
}

impl HardEdgeConfig {
    pub fn new(r: usize, beta: f64, gamma: f64, a: f64, lambda: f64) -> Self {
        Self {
            r,
            beta,
            gamma,
            a,
            lambda,
            dx: 2e-3,
            x_max: Self::horizon(r, lambda),
            q_max: 1e4,
            n_paths: 4000,
            offset: 0.01,
            interaction: Interaction::Ito,
            noise: true,
            trace_thin: 0,
        }
    }

    /// Smallest `x` with `λ e^{−r x} < 10⁻⁴`; `10/r` when `λ ≤ 0`.
    pub fn horizon(r: usize, lambda: f64) -> f64 {
        if lambda > 0.0 {
            ((lambda * 1e4).ln() / r as f64).max(1.0)
        } else {
            10.0 / r as f64
        }
    }

    pub fn at(&self, lambda: f64) -> Self {
        Self { lambda, x_max: Self::horizon(self.r, lambda), ..*self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.r < 1 {
            return domain("hard edge: r >= 1");
        }
        if !(self.a > -1.0) {
            return domain("hard edge: a > -1");
        }
        if !(self.beta > 0.0) || !(self.gamma > 0.0) {
            return domain("hard edge: beta > 0 and gamma > 0");
        }
        if !(self.dx > 0.0) || !(self.x_max > 0.0) {
            return domain("hard edge: dx > 0 and x_max > 0");
        }
        if !(self.q_max >= 1e3) {
            return domain("hard edge: Q_max >= 1e3");
        }
        if !(self.offset > 0.0) || self.n_paths == 0 {
            return domain("hard edge: offset > 0 and n_paths >= 1");
        }
        Ok(())
    }

    pub fn sigma(&self) -> f64 {
        if self.noise {
            2.0 / (self.beta * self.gamma).sqrt()
        } else {
            0.0
        }
    }

    /// Coefficient of `q_i` in the drift.
    pub fn linear_coefficient(&self) -> f64 {
        let base = self.a / self.gamma;
        if self.noise {
            base + 2.0 / (self.beta * self.gamma)
        } else {
            base
        }
    }

    pub fn interaction_strength(&self) -> f64 {
        match (self.noise, self.interaction) {
            (false, _) => 0.0,
            (true, Interaction::Ito) => 1.0 / self.gamma,
            (true, Interaction::Printed) => 1.0,
        }
    }
}

/// One retained point of a thinned trajectory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TracePoint {
    pub x: f64,
    pub p: Vec<f64>,
}

/// Event counts of a batch of paths.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathEnsemble {
    /// Explosions (soft edge) or zero crossings (hard edge) per path.
    pub counts: Vec<u32>,
    /// Attempts that hit the step-halving limit and were redrawn.
    pub flagged: usize,
    /// Paths still flagged after all redraws (dropped from `counts`).
    pub dropped: usize,
    pub traces: Vec<Vec<TracePoint>>,
}

impl PathEnsemble {
    /// Fraction of paths with at least `m` events, and its binomial s.e.
    pub fn fraction_at_least(&self, m: u32) -> (f64, f64) {
        let n = self.counts.len() as f64;
        let p = self.counts.iter().filter(|&&c| c >= m).count() as f64 / n;
        (p, (p * (1.0 - p) / n).sqrt())
    }

    pub fn flag_rate(&self) -> f64 {
        self.flagged as f64 / (self.counts.len() + self.dropped).max(1) as f64
    }
}

/// Shared drift/diffusion description of both particle systems.
#[derive(Clone, Copy)]
enum System {
    Airy { r: f64, lambda: f64, c: f64, sigma: f64 },
    Bessel { r: f64, lambda: f64, alpha: f64, c: f64, sigma: f64 },
}

struct PathSetup {
    system: System,
    dim: usize,
    dx: f64,
    x_max: f64,
    p_max: f64,
    offset: f64,
    crossings: bool,
    trace_thin: usize,
}

impl System {
    fn drift(&self, x: f64, p: &[f64], out: &mut [f64]) {
        match *self {
            System::Airy { r, lambda, c, .. } => {
                for i in 0..p.len() {
                    let mut d = r * x - lambda - p[i] * p[i];
                    if c != 0.0 {
                        for j in 0..p.len() {
                            if j != i {
                                d += c / (p[i] - p[j]);
                            }
                        }
                    }
                    out[i] = d;
                }
            }
            System::Bessel { r, lambda, alpha, c, .. } => {
                let pot = lambda * (-r * x).exp();
                for i in 0..p.len() {
                    let q = p[i];
                    let mut d = alpha * q - q * q - pot;
                    if c != 0.0 {
                        for j in 0..p.len() {
                            if j != i {
                                d += c * q * (q + p[j]) / (q - p[j]);
                            }
                        }
                    }
                    out[i] = d;
                }
            }
        }
    }

    fn diffusion(&self, p: f64) -> f64 {
        match *self {
            System::Airy { sigma, .. } => sigma,
            System::Bessel { sigma, .. } => sigma * p,
        }
    }

    fn sigma(&self) -> f64 {
        match *self {
            System::Airy { sigma, .. } | System::Bessel { sigma, .. } => sigma,
        }
    }

    /// Step cap: the quadratic drift may change a coordinate by a tenth of
    /// its size, and neighbouring gaps may shrink by a tenth per step.
    fn cap(&self, p: &[f64], d: &[f64], dx: f64) -> f64 {
        let m = p.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        let mut h = dx.min(0.1 / (1.0 + m));
        for i in 1..p.len() {
            let gap = p[i - 1] - p[i];
            let closing = d[i] - d[i - 1];
            if closing > 0.0 {
                h = h.min(0.1 * gap / closing);
            }
            // the gap's own diffusion should not exceed it in one step
            let var = self.diffusion(p[i - 1]).powi(2) + self.diffusion(p[i]).powi(2);
            if var > 0.0 {
                h = h.min(0.5 * gap * gap / var);
            }
        }
        if let System::Bessel { .. } = self {
            if p.iter().any(|v| v.abs() < 0.1) {
                h = h.min(0.25 * dx);
            }
        }
        h
    }
}

fn strictly_descending(p: &[f64]) -> bool {
    p.iter().all(|v| v.is_finite()) && p.windows(2).all(|w| w[0] > w[1])
}

/// One ordered path. Returns `(count, flagged)`.
fn run_path<R: Rng + ?Sized>(setup: &PathSetup, rng: &mut R, trace: Option<&mut Vec<TracePoint>>) -> (u32, bool) {
    let r = setup.dim;
    let sys = setup.system;
    let noisy = sys.sigma() != 0.0;
    let mut p: Vec<f64> = (0..r).map(|i| setup.p_max * (1.0 + setup.offset * (r - 1 - i) as f64)).collect();
    let mut np = vec![0.0; r];
    let mut d = vec![0.0; r];
    let mut x = 0.0;
    let mut count = 0u32;
    let mut steps = 0usize;
    let mut trace = trace;
    while setup.x_max - x > 1e-12 {
        sys.drift(x, &p, &mut d);
        let mut h = sys.cap(&p, &d, setup.dx).min(setup.x_max - x);
        let mut accepted = false;
        for _ in 0..=20 {
            let sh = h.sqrt();
            for i in 0..r {
                let z = if noisy { std_normal(rng) } else { 0.0 };
                np[i] = p[i] + d[i] * h + sys.diffusion(p[i]) * sh * z;
            }
            if strictly_descending(&np) {
                accepted = true;
                break;
            }
            h *= 0.5;
        }
        if !accepted {
            return (count, true);
        }
        if setup.crossings {
            for i in 0..r {
                if p[i] >= 0.0 && np[i] < 0.0 {
                    count += 1;
                }
            }
        }
        std::mem::swap(&mut p, &mut np);
        x += h;
        while p[r - 1] < -setup.p_max {
            if !setup.crossings {
                count += 1;
            }
            for i in (1..r).rev() {
                p[i] = p[i - 1];
            }
            p[0] = if r > 1 { setup.p_max.max(p[1] * (1.0 + setup.offset)) } else { setup.p_max };
        }
        steps += 1;
        if let Some(tr) = trace.as_deref_mut() {
            if setup.trace_thin > 0 && steps % setup.trace_thin == 0 {
                tr.push(TracePoint { x, p: p.clone() });
            }
        }
    }
    (count, false)
}

const MAX_REDRAWS: u64 = 5;

fn run_batch(setup: &PathSetup, n_paths: usize, stream: &RngStream) -> PathEnsemble {
    let out: Vec<(Option<u32>, usize, Vec<TracePoint>)> = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let base = stream.child(i);
            let mut flagged = 0;
            for attempt in 0..MAX_REDRAWS {
                let mut rng = base.child(attempt).rng();
                let mut tr = Vec::new();
                let (c, bad) = run_path(setup, &mut rng, Some(&mut tr));
                if !bad {
                    return (Some(c), flagged, tr);
                }
                flagged += 1;
            }
            (None, flagged, Vec::new())
        })
        .collect();
    let mut ens = PathEnsemble { counts: Vec::with_capacity(n_paths), flagged: 0, dropped: 0, traces: Vec::new() };
    for (c, f, tr) in out {
        ens.flagged += f;
        match c {
            Some(c) => ens.counts.push(c),
            None => ens.dropped += 1,
        }
        if setup.trace_thin > 0 {
            ens.traces.push(tr);
        }
    }
    ens
}

/// Euler–Maruyama paths of the soft-edge particle system started from
/// `{+∞}^r`; counts explosions below `−P_max` up to `x_max`.
pub fn simulate_airy_sde(cfg: &SoftEdgeConfig, stream: &RngStream) -> Result<PathEnsemble> {
    cfg.validate()?;
    let setup = PathSetup {
        system: System::Airy {
            r: cfg.r as f64,
            lambda: cfg.lambda,
            c: cfg.interaction_strength(),
            sigma: cfg.sigma(),
        },
        dim: cfg.r,
        dx: cfg.dx,
        x_max: cfg.x_max,
        p_max: cfg.p_max,
        offset: cfg.offset,
        crossings: false,
        trace_thin: cfg.trace_thin,
    };
    Ok(run_batch(&setup, cfg.n_paths, stream))
}

/// Hard-edge particle system started from `{+∞}^r`; counts downward zero
/// crossings up to `x_max`. Passages below `−Q_max` are reinserted on top.
pub fn simulate_bessel_sde(cfg: &HardEdgeConfig, stream: &RngStream) -> Result<PathEnsemble> {
    cfg.validate()?;
    let setup = PathSetup {
        system: System::Bessel {
            r: cfg.r as f64,
            lambda: cfg.lambda,
            alpha: cfg.linear_coefficient(),
            c: cfg.interaction_strength(),
            sigma: cfg.sigma(),
        },
        dim: cfg.r,
        dx: cfg.dx,
        x_max: cfg.x_max,
        p_max: cfg.q_max,
        offset: cfg.offset,
        crossings: true,
        trace_thin: cfg.trace_thin,
    };
    Ok(run_batch(&setup, cfg.n_paths, stream))
}

/// One row of an edge CDF table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfRow {
    pub lambda: f64,
    pub k: usize,
    pub estimate: f64,
    pub std_error: f64,
}

/// `P(Λ_k ≤ λ)` for `k < kmax` on a λ grid. Each λ uses stream child `i`.
pub fn soft_edge_cdf(cfg: &SoftEdgeConfig, lambdas: &[f64], kmax: usize, stream: &RngStream) -> Result<(Vec<CdfRow>, f64)> {
    let mut rows = Vec::new();
    let mut flags = 0.0_f64;
    for (i, &l) in lambdas.iter().enumerate() {
        let ens = simulate_airy_sde(&cfg.at(l), &stream.child(i as u64))?;
        flags = flags.max(ens.flag_rate());
        for k in 0..kmax {
            let (p, se) = ens.fraction_at_least(k as u32 + 1);
            rows.push(CdfRow { lambda: l, k, estimate: p, std_error: se });
        }
    }
    Ok((rows, flags))
}

/// `P(Λ̂_k ≤ λ)` for `k < kmax` on a λ grid.
pub fn hard_edge_cdf(cfg: &HardEdgeConfig, lambdas: &[f64], kmax: usize, stream: &RngStream) -> Result<(Vec<CdfRow>, f64)> {
    let mut rows = Vec::new();
    let mut flags = 0.0_f64;
    for (i, &l) in lambdas.iter().enumerate() {
        let ens = simulate_bessel_sde(&cfg.at(l), &stream.child(i as u64))?;
        flags = flags.max(ens.flag_rate());
        for k in 0..kmax {
            let (p, se) = ens.fraction_at_least(k as u32 + 1);
            rows.push(CdfRow { lambda: l, k, estimate: p, std_error: se });
        }
    }
    Ok((rows, flags))
}

// ---------------------------------------------------------------------------
// discretized operators

/// Hermitian noise block with the GFE(r) covariance. For `r = 1` any
/// `β > 0` works (real `N(0, 2/β)`); larger blocks need `β ∈ {1, 2}`.
fn noise_block<R: Rng + ?Sized>(r: usize, beta: f64, rng: &mut R) -> Result<CMat> {
    if r == 1 {
        return Ok(CMat::from_element(1, 1, Complex64::new((2.0 / beta).sqrt() * std_normal(rng), 0.0)));
    }
    let tag = field_of(beta)?;
    sample_gfe(r, tag, rng)
}

fn field_of(beta: f64) -> Result<FieldTag> {
    if beta == 1.0 {
        Ok(FieldTag::Real)
    } else if beta == 2.0 {
        Ok(FieldTag::Complex)
    } else {
        domain("matrix-valued noise for r > 1 is built for beta in {1, 2} only")
    }
}

/// Dirichlet finite differences for `−d²/dx² + r x + √(2/γ) B′_x` on
/// `(0, L)` with step `h`. Each cell carries an independent GFE-type block
/// scaled by `1/√h`. `noise = false` drops `B′`.
pub fn discretize_airy<R: Rng + ?Sized>(
    r: usize,
    beta: f64,
    gamma: f64,
    h: f64,
    length: f64,
    noise: bool,
    rng: &mut R,
) -> Result<BlockTridiag> {
    if !(h > 0.0 && h <= 0.05) || !(length >= 10.0) {
        return domain("discretize_airy: need h <= 0.05 and L >= 10");
    }
    if r < 1 || !(beta > 0.0) || !(gamma > 0.0) {
        return domain("discretize_airy: r >= 1, beta > 0, gamma > 0");
    }
    let cells = (length / h).round() as usize - 1;
    let amp = Complex64::new((2.0 / gamma).sqrt() / h.sqrt(), 0.0);
    let id = CMat::identity(r, r);
    let mut diag = Vec::with_capacity(cells);
    for k in 1..=cells {
        let x = k as f64 * h;
        let mut b = &id * Complex64::new(2.0 / (h * h) + r as f64 * x, 0.0);
        if noise {
            b += noise_block(r, beta, rng)? * amp;
        }
        diag.push(b);
    }
    let upper = vec![&id * Complex64::new(-1.0 / (h * h), 0.0); cells - 1];
    BlockTridiag::new(r, diag, upper)
}

/// Lowest `k` eigenvalues of a discretized Airy operator.
pub fn airy_operator_lowest(op: &BlockTridiag, k: usize) -> Vec<f64> {
    op.smallest(k, 1e-9)
}

/// Spectrum estimate of a discretized hard-edge operator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelSpectrum {
    /// `Λ̂_k = 1/σ_k²`, ascending.
    pub eigenvalues: Vec<f64>,
    /// Paths redrawn because `cond(Y_x)` exceeded `10¹²`.
    pub resampled: usize,
    pub iterations: usize,
}

/// Grid samples of `Y_x` and `Y_x^{-1}`.
struct YPath {
    y: Vec<CMat>,
    yinv: Vec<CMat>,
}

fn simulate_y<R: Rng + ?Sized>(
    r: usize,
    beta: f64,
    gamma: f64,
    a: f64,
    h: f64,
    nodes: usize,
    noise: bool,
    rng: &mut R,
) -> Result<Option<YPath>> {
    // Y^{-1} dY = γ^{-1/2} dB + (1/β − a)/(2γ) dx; the diagonal of B has
    // diffusion 1/β, the off-diagonal entries are standard 𝔽 motions.
    let tag = if r > 1 { Some(field_of(beta)?) } else { None };
    let mu = if noise { (1.0 / beta - a) / (2.0 * gamma) } else { -a / (2.0 * gamma) };
    let sg = (h / gamma).sqrt();
    let mut y = Vec::with_capacity(nodes);
    let mut yinv = Vec::with_capacity(nodes);
    let mut cur = CMat::identity(r, r);
    for j in 0..nodes {
        if j > 0 {
            let mut inc = CMat::identity(r, r) * Complex64::new(1.0 + mu * h, 0.0);
            if noise {
                for p in 0..r {
                    for q in 0..r {
                        let z = if p == q {
                            Complex64::new(std_normal(rng) / beta.sqrt(), 0.0)
                        } else {
                            sample_fnormal(tag.unwrap(), rng)
                        };
                        inc[(p, q)] += z * sg;
                    }
                }
            }
            cur = &cur * inc;
        }
        let sv = cur.clone().singular_values();
        let (smax, smin) = (sv.max(), sv.min());
        if !(smin > 0.0) || smax / smin > 1e12 {
            return Ok(None);
        }
        let inv = match cur.clone().try_inverse() {
            Some(v) => v,
            None => return Ok(None),
        };
        y.push(cur.clone());
        yinv.push(inv);
    }
    Ok(Some(YPath { y, yinv }))
}

/// Matrix-free discretization of the inverse hard-edge operator with
/// kernel `ℓ(x,y) = e^{−r y/2} Y_x^{-1} Y_y 1{x<y}` on `[0, x_max]`.
struct KernelOp {
    r: usize,
    /// `c_j Y_j` with trapezoid-style weights `c_j = w_j h e^{−r x_j/2}`.
    cy: Vec<CMat>,
    yinv: Vec<CMat>,
    cyh: Vec<CMat>,
    yinvh: Vec<CMat>,
}

impl KernelOp {
    fn new(path: YPath, r: usize, h: f64) -> Self {
        let cy: Vec<CMat> = path
            .y
            .iter()
            .enumerate()
            .map(|(j, y)| y * Complex64::new(h * (-(r as f64) * j as f64 * h / 2.0).exp(), 0.0))
            .collect();
        let cyh = cy.iter().map(|m| m.adjoint()).collect();
        let yinvh = path.yinv.iter().map(|m| m.adjoint()).collect();
        Self { r, cy, yinv: path.yinv, cyh, yinvh }
    }

    fn nodes(&self) -> usize {
        self.cy.len()
    }

    /// `(Af)_i = Y_i^{-1}(Σ_{j>i} c_j Y_j f_j + ½ c_i Y_i f_i)`.
    fn apply(&self, f: &[Complex64], out: &mut [Complex64]) {
        let r = self.r;
        let mut acc = vec![Complex64::new(0.0, 0.0); r];
        let mut term = vec![Complex64::new(0.0, 0.0); r];
        for i in (0..self.nodes()).rev() {
            mat_vec(&self.cy[i], &f[i * r..(i + 1) * r], &mut term);
            let mut tmp = vec![Complex64::new(0.0, 0.0); r];
            for k in 0..r {
                tmp[k] = acc[k] + 0.5 * term[k];
                acc[k] += term[k];
            }
            mat_vec(&self.yinv[i], &tmp, &mut out[i * r..(i + 1) * r]);
        }
    }

    /// `(A†g)_j = c_j Y_j†(Σ_{i<j} Y_i^{-†} g_i + ½ Y_j^{-†} g_j)`.
    fn apply_adjoint(&self, g: &[Complex64], out: &mut [Complex64]) {
        let r = self.r;
        let mut acc = vec![Complex64::new(0.0, 0.0); r];
        let mut term = vec![Complex64::new(0.0, 0.0); r];
        for j in 0..self.nodes() {
            mat_vec(&self.yinvh[j], &g[j * r..(j + 1) * r], &mut term);
            let mut tmp = vec![Complex64::new(0.0, 0.0); r];
            for k in 0..r {
                tmp[k] = acc[k] + 0.5 * term[k];
                acc[k] += term[k];
            }
            mat_vec(&self.cyh[j], &tmp, &mut out[j * r..(j + 1) * r]);
        }
    }
}

fn mat_vec(m: &CMat, v: &[Complex64], out: &mut [Complex64]) {
    for i in 0..m.nrows() {
        let mut s = Complex64::new(0.0, 0.0);
        for j in 0..m.ncols() {
            s += m[(i, j)] * v[j];
        }
        out[i] = s;
    }
}

/// Top singular values of the kernel operator by subspace iteration on
/// `A†A`, then `Λ̂_k = 1/σ_k²`.
fn kernel_spectrum<R: Rng + ?Sized>(op: &KernelOp, k: usize, rng: &mut R) -> Result<(Vec<f64>, usize)> {
    let dim = op.nodes() * op.r;
    let p = (k + 4).min(dim);
    let mut v = DMatrix::from_fn(dim, p, |_, _| Complex64::new(std_normal(rng), 0.0));
    let mut col = vec![Complex64::new(0.0, 0.0); dim];
    let mut col2 = vec![Complex64::new(0.0, 0.0); dim];
    let mut prev: Vec<f64> = vec![0.0; k];
    let mut last = Vec::new();
    for it in 1..=400 {
        v = v.qr().q();
        let mut av = DMatrix::zeros(dim, p);
        for c in 0..p {
            let src: Vec<Complex64> = v.column(c).iter().copied().collect();
            op.apply(&src, &mut col);
            av.column_mut(c).copy_from_slice(&col);
        }
        let g = av.adjoint() * &av;
        let mut ev = eigvalsh(&g)?;
        ev.reverse();
        last = ev[..k].to_vec();
        let conv = last.iter().zip(&prev).all(|(a, b)| (a - b).abs() <= 1e-11 * a.abs());
        if conv && it > 3 {
            return Ok((last.iter().map(|s| 1.0 / s).collect(), it));
        }
        prev = last.clone();
        for c in 0..p {
            op.apply_adjoint(&av.column(c).iter().copied().collect::<Vec<_>>(), &mut col2);
            v.column_mut(c).copy_from_slice(&col2);
        }
    }
    Ok((last.iter().map(|s| 1.0 / s).collect(), 400))
}

/// Simulates `Y_x` by Euler steps, assembles the inverse operator on the
/// grid `x_j = jh`, and returns the `k` lowest `Λ̂` from its singular
/// values. `noise = false` gives the deterministic operator.
#[allow(clippy::too_many_arguments)]
pub fn discretize_bessel_kernel<R: Rng + ?Sized>(
    r: usize,
    beta: f64,
    gamma: f64,
    a: f64,
    h: f64,
    x_max: f64,
    k: usize,
    noise: bool,
    rng: &mut R,
) -> Result<KernelSpectrum> {
    if !(h > 0.0 && h <= 0.01) || !(x_max >= 8.0 / r as f64) {
        return domain("discretize_bessel_kernel: need h <= 0.01 and x_max >= 8/r");
    }
    if !(a > -1.0) || !(beta > 0.0) || !(gamma > 0.0) || r < 1 || k < 1 {
        return domain("discretize_bessel_kernel: a > -1, beta > 0, gamma > 0, r >= 1, k >= 1");
    }
    let nodes = (x_max / h).round() as usize + 1;
    let mut resampled = 0;
    loop {
        if let Some(path) = simulate_y(r, beta, gamma, a, h, nodes, noise, rng)? {
            let op = KernelOp::new(path, r, h);
            let (ev, iterations) = kernel_spectrum(&op, k, rng)?;
            return Ok(KernelSpectrum { eigenvalues: ev, resampled, iterations });
        }
        resampled += 1;
        if resampled > 100 {
            return Err(Error::Guard { what: "cond(Y_x) above 1e12 on 100 consecutive paths".into(), estimate: 1e12 });
        }
    }
}

// ---------------------------------------------------------------------------
// hard edge rescaling

/// `(rn/γ)·eig(W)` for a dense `W`, ascending.
pub fn rescale_hard(w: &CMat, n: usize, r: usize, s: f64) -> Result<Vec<f64>> {
    if w.nrows() != r * n || w.ncols() != r * n {
        return Err(Error::Dimension(format!("W is {}x{}, expected {}", w.nrows(), w.ncols(), r * n)));
    }
    let c = (r * n) as f64 / gamma_of(r, s);
    Ok(eigvalsh(w)?.into_iter().map(|l| c * l).collect())
}

/// The `k` smallest of `(rn/γ)·eig(L L†)`, via Sturm counts.
pub fn hard_edge_smallest(l: &BlockBidiagonal, s: f64, k: usize) -> Vec<f64> {
    let c = (l.r * l.n) as f64 / gamma_of(l.r, s);
    let tri = l.gram_tridiag();
    (0..k.min(l.r * l.n)).map(|j| c * tri.kth_smallest(j, 1e-13)).collect()
}

// ---------------------------------------------------------------------------
// density of states

/// CDF of the semicircle law on `[−2√γ, 2√γ]`, density `√(4γ−x²)/(2πγ)`.
pub fn semicircle_cdf(x: f64, gamma: f64) -> f64 {
    let e = 2.0 * gamma.sqrt();
    if x <= -e {
        return 0.0;
    }
    if x >= e {
        return 1.0;
    }
    0.5 + x * (4.0 * gamma - x * x).sqrt() / (4.0 * std::f64::consts::PI * gamma) + (x / e).asin() / std::f64::consts::PI
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DosReport {
    pub r: usize,
    pub s: f64,
    pub gamma: f64,
    pub n_eigenvalues: usize,
    /// Kolmogorov distance of the pooled empirical CDF of `λ/√(rn)`.
    pub sup_distance: f64,
    /// Fraction of `|λ|/√(rn)` above `2√γ + 0.1`.
    pub edge_excess: f64,
    /// Mean over samples of `max |λ|/√(rn)`.
    pub fitted_edge: f64,
}

/// Compares spectra of `T` (one vector per draw) with the semicircle law.
pub fn dos_check(samples: &[Vec<f64>], r: usize, s: f64) -> Result<DosReport> {
    if samples.is_empty() || r < 1 {
        return domain("dos_check needs at least one spectrum");
    }
    let d = samples[0].len();
    if d % r != 0 || samples.iter().any(|v| v.len() != d) {
        return Err(Error::Dimension("spectra must all have length rn".into()));
    }
    let g = gamma_of(r, s);
    let sc = 1.0 / (d as f64).sqrt();
    let mut pooled: Vec<f64> = samples.iter().flatten().map(|l| l * sc).collect();
    pooled.sort_by(f64::total_cmp);
    let m = pooled.len() as f64;
    let mut sup = 0.0_f64;
    for (i, &x) in pooled.iter().enumerate() {
        let f = semicircle_cdf(x, g);
        sup = sup.max((f - i as f64 / m).abs()).max((f - (i + 1) as f64 / m).abs());
    }
    let lim = 2.0 * g.sqrt() + 0.1;
    let excess = pooled.iter().filter(|x| x.abs() > lim).count() as f64 / m;
    let fitted = samples.iter().map(|v| v.iter().fold(0.0_f64, |a, l| a.max(l.abs())) * sc).sum::<f64>() / samples.len() as f64;
    Ok(DosReport { r, s, gamma: g, n_eigenvalues: pooled.len(), sup_distance: sup, edge_excess: excess, fitted_edge: fitted })
}

/// Full spectra of `count` Hermite draws, one vector per draw.
pub fn hermite_spectra(p: &EnsembleParams, count: usize, stream: &RngStream) -> Result<Vec<Vec<f64>>> {
    (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream.child(i).rng();
            let t = sample_hermite(p, &mut rng)?;
            eigvalsh(&t.to_dense())
        })
        .collect()
}

// ---------------------------------------------------------------------------
// cross-estimator tables

/// Lowest rescaled soft-edge eigenvalue `Λ₀^{(n)}` of `count` draws.
/// `β = 4` is available for `r = 1` through the scalar tridiagonal model.
pub fn soft_edge_ensemble(r: usize, beta: f64, s: f64, n: usize, count: usize, stream: &RngStream) -> Result<Vec<f64>> {
    if r == 1 && s == 0.0 && beta != 1.0 && beta != 2.0 {
        return (0..count as u64)
            .into_par_iter()
            .map(|i| {
                let t = sample_beta_tridiagonal(beta, n, &mut stream.child(i).rng())?;
                let (c, shift) = soft_affine(n, 1, 0.0);
                Ok(c * (shift - t.kth_largest(0, 1e-10)))
            })
            .collect();
    }
    let p = EnsembleParams::hermite(field_of(beta)?, n, r, s);
    (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let t = sample_hermite(&p, &mut stream.child(i).rng())?;
            Ok(soft_edge_smallest(&t, s, 1)[0])
        })
        .collect()
}

/// Lowest eigenvalue of `count` discretized Airy operators.
pub fn soft_edge_operator(r: usize, beta: f64, gamma: f64, h: f64, length: f64, count: usize, stream: &RngStream) -> Result<Vec<f64>> {
    (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let op = discretize_airy(r, beta, gamma, h, length, true, &mut stream.child(i).rng())?;
            Ok(op.kth_smallest(0, 1e-9))
        })
        .collect()
}

/// Smallest `(rn/γ)`-scaled eigenvalue of `count` block Laguerre draws with `m = n + a`.
pub fn hard_edge_ensemble(r: usize, beta: f64, s: f64, a: f64, n: usize, count: usize, stream: &RngStream) -> Result<Vec<f64>> {
    let p = EnsembleParams::laguerre(field_of(beta)?, n, r, s, n as f64 + a);
    (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let l = sample_laguerre_factor(&p, &mut stream.child(i).rng())?;
            Ok(hard_edge_smallest(&l, s, 1)[0])
        })
        .collect()
}

/// Lowest `Λ̂₀` of `count` discretized hard-edge operators.
#[allow(clippy::too_many_arguments)]
pub fn hard_edge_operator(
    r: usize,
    beta: f64,
    gamma: f64,
    a: f64,
    h: f64,
    x_max: f64,
    count: usize,
    stream: &RngStream,
) -> Result<(Vec<f64>, usize)> {
    let out: Result<Vec<(f64, usize)>> = (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let ks = discretize_bessel_kernel(r, beta, gamma, a, h, x_max, 1, true, &mut stream.child(i).rng())?;
            Ok((ks.eigenvalues[0], ks.resampled))
        })
        .collect();
    let out = out?;
    let resampled = out.iter().map(|x| x.1).sum();
    Ok((out.into_iter().map(|x| x.0).collect(), resampled))
}

/// Empirical `P(X ≤ λ)`.
pub fn empirical_cdf(sample: &[f64], lambda: f64) -> f64 {
    sample.iter().filter(|&&x| x <= lambda).count() as f64 / sample.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossRow {
    pub lambda: f64,
    pub sde: f64,
    pub sde_se: f64,
    pub operator: f64,
    pub ensemble: f64,
}

impl CrossRow {
    pub fn max_pairwise(&self) -> f64 {
        let v = [self.sde, self.operator, self.ensemble];
        let mut m = 0.0_f64;
        for i in 0..3 {
            for j in 0..i {
                m = m.max((v[i] - v[j]).abs());
            }
        }
        m
    }
}

/// Settings for a three-estimator edge comparison.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrossCheckSpec {
    pub r: usize,
    pub beta: f64,
    pub s: f64,
    /// Hard edge only.
    pub a: f64,
    pub lambdas: Vec<f64>,
    /// Matrix size is `rn`.
    pub rn: usize,
    pub n_paths: usize,
    pub n_operator: usize,
    pub n_ensemble: usize,
    /// Operator grid step; length is fixed per edge.
    pub h: f64,
    pub interaction: Interaction,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrossCheck {
    pub spec: CrossCheckSpec,
    pub rows: Vec<CrossRow>,
    pub max_difference: f64,
    pub flag_rate: f64,
    pub resampled: usize,
}

fn finish_cross(spec: &CrossCheckSpec, sde: &[CdfRow], op: &[f64], ens: &[f64], flag_rate: f64, resampled: usize) -> CrossCheck {
    let rows: Vec<CrossRow> = spec
        .lambdas
        .iter()
        .zip(sde)
        .map(|(&l, row)| CrossRow {
            lambda: l,
            sde: row.estimate,
            sde_se: row.std_error,
            operator: empirical_cdf(op, l),
            ensemble: empirical_cdf(ens, l),
        })
        .collect();
    let max_difference = rows.iter().map(|r| r.max_pairwise()).fold(0.0, f64::max);
    CrossCheck { spec: spec.clone(), rows, max_difference, flag_rate, resampled }
}

/// `P(Λ₀ ≤ λ)` from the SDE, the discretized operator and the rescaled
/// ensemble. Streams: children 0, 1, 2 of `stream`.
pub fn soft_edge_cross_check(spec: &CrossCheckSpec, stream: &RngStream) -> Result<CrossCheck> {
    let g = gamma_of(spec.r, spec.s);
    let mut cfg = SoftEdgeConfig::new(spec.r, spec.beta, g, 0.0);
    cfg.n_paths = spec.n_paths;
    cfg.interaction = spec.interaction;
    let (sde, flags) = soft_edge_cdf(&cfg, &spec.lambdas, 1, &stream.child(0))?;
    let op = soft_edge_operator(spec.r, spec.beta, g, spec.h, 12.0, spec.n_operator, &stream.child(1))?;
    if spec.rn % spec.r != 0 {
        return domain("rn must be a multiple of r");
    }
    let ens = soft_edge_ensemble(spec.r, spec.beta, spec.s, spec.rn / spec.r, spec.n_ensemble, &stream.child(2))?;
    Ok(finish_cross(spec, &sde, &op, &ens, flags, 0))
}

/// Operator parameter of the hard-edge limit of `W` with `m = n + a`.
///
/// The χ degrees of freedom of `D_{k+1}` and `O_k` differ by `(r+s)a`, so
/// the drift of `Y` sees `(r+s)a`; the two agree at `r = 1, s = 0`.
pub fn operator_a(r: usize, s: f64, a: f64) -> f64 {
    (r as f64 + s) * a
}

/// `P(Λ̂₀ ≤ λ)` from the vanishing SDE, the discretized kernel and the
/// rescaled Laguerre ensemble.
pub fn hard_edge_cross_check(spec: &CrossCheckSpec, stream: &RngStream) -> Result<CrossCheck> {
    let g = gamma_of(spec.r, spec.s);
    let a_op = operator_a(spec.r, spec.s, spec.a);
    let mut cfg = HardEdgeConfig::new(spec.r, spec.beta, g, a_op, 0.0);
    cfg.n_paths = spec.n_paths;
    cfg.interaction = spec.interaction;
    let (sde, flags) = hard_edge_cdf(&cfg, &spec.lambdas, 1, &stream.child(0))?;
    let x_max = (10.0 / spec.r as f64).max(8.0 / spec.r as f64);
    let (op, resampled) = hard_edge_operator(spec.r, spec.beta, g, a_op, spec.h, x_max, spec.n_operator, &stream.child(1))?;
    if spec.rn % spec.r != 0 {
        return domain("rn must be a multiple of r");
    }
    let ens = hard_edge_ensemble(spec.r, spec.beta, spec.s, spec.a, spec.rn / spec.r, spec.n_ensemble, &stream.child(2))?;
    Ok(finish_cross(spec, &sde, &op, &ens, flags, resampled))
}

//! Exact engine for Vandermonde-type sums, Cauchy determinants, Pfaffians
//! and Hafnians, the matrix `M(λ, X)`, and the registry of identities that
//! tie them to the eigenvalue densities.
//!
//! Everything here is generic over [`Scalar`]; identity checks run in
//! [`ExactScalar`] and pass only on literal equality. Index sets are
//! 0-based internally; reports print them 1-based.

use std::fmt;
use std::ops::{Index, IndexMut};

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::scalar::{int, parity_sign, powi, rat, ExactScalar, Scalar};

/// Small dense row-major matrix over any scalar.
#[derive(Clone, PartialEq)]
pub struct Mat<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Clone> Mat<T> {
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }
}

impl<T> Index<(usize, usize)> for Mat<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

impl<T: fmt::Debug> fmt::Debug for Mat<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<&[T]> = self.data.chunks(self.cols.max(1)).collect();
        f.debug_list().entries(rows).finish()
    }
}

/// Sorted, duplicate-free 0-based indices.
pub type IndexSet = Vec<usize>;

/// Ordered `r`-tuple of disjoint `n`-sets covering `{0..rn-1}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EquiPartition {
    pub blocks: Vec<IndexSet>,
    /// Parity of σ with σ(a + (m-1)n) = a-th largest element of block m.
    pub sign: i8,
}

fn inversions_odd(p: &[usize]) -> bool {
    let mut odd = false;
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            if p[i] > p[j] {
                odd = !odd;
            }
        }
    }
    odd
}

/// Sign of the blocked permutation: block `m` occupies positions
/// `mn..(m+1)n` in decreasing order.
pub fn equipartition_sign(blocks: &[IndexSet]) -> i8 {
    let p: Vec<usize> = blocks.iter().flat_map(|b| b.iter().rev().copied()).collect();
    if inversions_odd(&p) {
        -1
    } else {
        1
    }
}

/// Sign of the interleaved permutation `σ(m + a r) = a-th smallest of A_m`
/// that arises when the Leibniz expansion of `det M` is regrouped.
pub fn expansion_sign(blocks: &[IndexSet]) -> i8 {
    let r = blocks.len();
    let n = blocks.first().map_or(0, |b| b.len());
    let mut p = vec![0usize; r * n];
    for (m, b) in blocks.iter().enumerate() {
        for (a, &v) in b.iter().enumerate() {
            p[m + a * r] = v;
        }
    }
    if inversions_odd(&p) {
        -1
    } else {
        1
    }
}

fn binom(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `(rn)! / (n!)^r`.
pub fn count_equipartitions(r: usize, n: usize) -> f64 {
    (0..r).fold(1.0, |acc, m| acc * binom((r - m) * n, n))
}

/// All `k`-subsets of `pool` in lexicographic order.
pub fn subsets_of(pool: &[usize], k: usize) -> Vec<IndexSet> {
    fn rec(pool: &[usize], k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<IndexSet>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        let need = k - cur.len();
        for i in start..pool.len() {
            if pool.len() - i < need {
                break;
            }
            cur.push(pool[i]);
            rec(pool, k, i + 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(pool, k, 0, &mut Vec::with_capacity(k), &mut out);
    out
}

pub fn subsets(total: usize, k: usize) -> Vec<IndexSet> {
    subsets_of(&(0..total).collect::<Vec<_>>(), k)
}

pub fn complement(set: &[usize], total: usize) -> IndexSet {
    (0..total).filter(|i| !set.contains(i)).collect()
}

/// Visit every equipartition; refuses when `rn > 16`.
pub fn for_each_equipartition(r: usize, n: usize, mut f: impl FnMut(&EquiPartition)) -> Result<()> {
    if r * n > 16 {
        return Err(Error::Guard { what: format!("equipartitions of r={r}, n={n}"), estimate: count_equipartitions(r, n) });
    }
    if r == 0 || n == 0 {
        return domain("r and n must be positive");
    }
    fn rec(r: usize, n: usize, remaining: &[usize], blocks: &mut Vec<IndexSet>, f: &mut dyn FnMut(&EquiPartition)) {
        if blocks.len() == r - 1 {
            blocks.push(remaining.to_vec());
            let sign = equipartition_sign(blocks);
            f(&EquiPartition { blocks: blocks.clone(), sign });
            blocks.pop();
            return;
        }
        for s in subsets_of(remaining, n) {
            let rest: Vec<usize> = remaining.iter().copied().filter(|x| !s.contains(x)).collect();
            blocks.push(s);
            rec(r, n, &rest, blocks, f);
            blocks.pop();
        }
    }
    let all: Vec<usize> = (0..r * n).collect();
    rec(r, n, &all, &mut Vec::with_capacity(r), &mut f);
    Ok(())
}

pub fn enumerate_equipartitions(r: usize, n: usize) -> Result<Vec<EquiPartition>> {
    let mut out = Vec::new();
    for_each_equipartition(r, n, |p| out.push(p.clone()))?;
    Ok(out)
}

/// `Δ = ∏_{i<j} (v_j − v_i)` in list order.
pub fn vandermonde<T: Scalar>(values: &[T]) -> T {
    let mut p = T::one();
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            p = p * (values[j].clone() - values[i].clone());
        }
    }
    p
}

/// `Δ(S)` over the coordinates of `λ` indexed by `set` (ascending).
pub fn vandermonde_of<T: Scalar>(lambda: &[T], set: &[usize]) -> T {
    let v: Vec<T> = set.iter().map(|&i| lambda[i].clone()).collect();
    vandermonde(&v)
}

/// `Θ(S1,S2) = ∏_{s1∈S1}∏_{s2∈S2} (λ_{s1} − λ_{s2})`.
pub fn theta<T: Scalar>(s1: &[usize], s2: &[usize], lambda: &[T]) -> Result<T> {
    if s1.iter().any(|x| s2.contains(x)) {
        return domain("theta needs disjoint sets");
    }
    let mut p = T::one();
    for &a in s1 {
        for &b in s2 {
            p = p * (lambda[a].clone() - lambda[b].clone());
        }
    }
    Ok(p)
}

/// Exact determinant by elimination with the first nonzero pivot.
/// Intended for exact scalars; floats should use a pivoted solver.
pub fn det<T: Scalar>(m: &Mat<T>) -> T {
    assert_eq!(m.rows, m.cols, "det of a non-square matrix");
    let n = m.rows;
    let mut a = m.data.clone();
    let mut acc = T::one();
    for c in 0..n {
        let Some(p) = (c..n).find(|&i| !a[i * n + c].is_zero()) else {
            return T::zero();
        };
        if p != c {
            for j in 0..n {
                a.swap(c * n + j, p * n + j);
            }
            acc = -acc;
        }
        let piv = a[c * n + c].clone();
        acc = acc * piv.clone();
        for i in c + 1..n {
            if a[i * n + c].is_zero() {
                continue;
            }
            let f = a[i * n + c].clone() / piv.clone();
            for j in c + 1..n {
                let v = a[i * n + j].clone() - f.clone() * a[c * n + j].clone();
                a[i * n + j] = v;
            }
        }
    }
    acc
}

fn check_distinct<T: Scalar>(lambda: &[T], sets: &[&[usize]]) -> Result<()> {
    let idx: Vec<usize> = sets.iter().flat_map(|s| s.iter().copied()).collect();
    for i in 0..idx.len() {
        for j in i + 1..idx.len() {
            if lambda[idx[i]] == lambda[idx[j]] {
                return domain("repeated lambda values");
            }
        }
    }
    Ok(())
}

/// Cauchy determinant `det(1/(λ_a − λ_b))_{a∈A, b∈A'}` by its product
/// formula `(−1)^{C(|A|,2)} Δ(A)Δ(A') / Θ(A,A')`.
pub fn cauchy_det<T: Scalar>(a: &[usize], ap: &[usize], lambda: &[T]) -> Result<T> {
    if a.len() != ap.len() {
        return Err(Error::Dimension("Cauchy sets must have equal size".into()));
    }
    check_distinct(lambda, &[a, ap])?;
    let k = a.len();
    let th = theta(a, ap, lambda)?;
    let s: T = parity_sign(k * k.saturating_sub(1) / 2 % 2 == 1);
    Ok(s * vandermonde_of(lambda, a) * vandermonde_of(lambda, ap) / th)
}

/// Cauchy determinant by direct elimination (oracle for [`cauchy_det`]).
pub fn cauchy_matrix_det<T: Scalar>(a: &[usize], ap: &[usize], lambda: &[T]) -> Result<T> {
    if a.len() != ap.len() {
        return Err(Error::Dimension("Cauchy sets must have equal size".into()));
    }
    check_distinct(lambda, &[a, ap])?;
    let m = Mat::from_fn(a.len(), a.len(), |i, j| T::one() / (lambda[a[i]].clone() - lambda[ap[j]].clone()));
    Ok(det(&m))
}

fn matching_sum<T: Scalar>(m: &Mat<T>, idx: &[usize], signed: bool) -> T {
    if idx.is_empty() {
        return T::one();
    }
    let first = idx[0];
    let mut acc = T::zero();
    for t in 1..idx.len() {
        let e = m[(first, idx[t])].clone();
        if e.is_zero() {
            continue;
        }
        let rest: Vec<usize> = idx[1..].iter().copied().filter(|&x| x != idx[t]).collect();
        let term = e * matching_sum(m, &rest, signed);
        acc = if signed && t % 2 == 0 { acc - term } else { acc + term };
    }
    acc
}

fn check_even_square<T>(m: &Mat<T>) -> Result<()> {
    if m.rows != m.cols {
        return Err(Error::Dimension("matrix must be square".into()));
    }
    if m.rows % 2 == 1 {
        return domain("odd dimension");
    }
    if m.rows > 12 {
        return Err(Error::Guard { what: "matching sum".into(), estimate: (1..m.rows).step_by(2).map(|k| k as f64).product() });
    }
    Ok(())
}

/// Pfaffian as the signed sum over perfect matchings. Input must be
/// exactly skew-symmetric.
pub fn pfaffian<T: Scalar>(m: &Mat<T>) -> Result<T> {
    check_even_square(m)?;
    for i in 0..m.rows {
        for j in 0..=i {
            if m[(i, j)] != -m[(j, i)].clone() {
                return domain("pfaffian input is not skew-symmetric");
            }
        }
    }
    let idx: Vec<usize> = (0..m.rows).collect();
    Ok(matching_sum(m, &idx, true))
}

/// Hafnian as the unsigned matching sum; the diagonal is ignored.
pub fn hafnian<T: Scalar>(m: &Mat<T>) -> Result<T> {
    check_even_square(m)?;
    for i in 0..m.rows {
        for j in 0..i {
            if m[(i, j)] != m[(j, i)] {
                return domain("hafnian input is not symmetric off the diagonal");
            }
        }
    }
    let idx: Vec<usize> = (0..m.rows).collect();
    Ok(matching_sum(m, &idx, false))
}

/// `M[i][j] = λ_i^{⌊j/r⌋} · X[j mod r][i]` (0-based), using the first `r`
/// rows of `X`.
pub fn build_m<T: Scalar>(lambda: &[T], x: &Mat<T>, r: usize) -> Result<Mat<T>> {
    let d = lambda.len();
    if r == 0 || d % r != 0 || x.rows < r || x.cols != d {
        return Err(Error::Dimension(format!("lambda has {d} entries, X is {}x{} with r={r}", x.rows, x.cols)));
    }
    Ok(Mat::from_fn(d, d, |i, j| powi(&lambda[i], (j / r) as u32) * x[(j % r, i)].clone()))
}

/// `det M(λ, Q)` as the sum over equipartitions of
/// `sign · ∏_m Q_m(A_m) Δ(A_m)`, with the interleaved sign.
pub fn detm_via_expansion<T: Scalar>(lambda: &[T], q: &Mat<T>, r: usize) -> Result<T> {
    let d = lambda.len();
    if d > 12 {
        return Err(Error::Guard { what: "det M expansion".into(), estimate: count_equipartitions(r, d / r.max(1)) });
    }
    if r == 0 || d % r != 0 || q.rows < r || q.cols != d {
        return Err(Error::Dimension("inconsistent lambda/Q sizes".into()));
    }
    let n = d / r;
    let mut acc = T::zero();
    for_each_equipartition(r, n, |p| {
        let mut term: T = parity_sign(expansion_sign(&p.blocks) < 0);
        for (m, b) in p.blocks.iter().enumerate() {
            for &a in b {
                term = term * q[(m, a)].clone();
            }
            term = term * vandermonde_of(lambda, b);
        }
        acc = acc.clone() + term;
    })?;
    Ok(acc)
}

/// `Σ_{P_{r,n}} ∏_j Δ(A_j)^{2p}`.
pub fn partition_power_sum<T: Scalar>(lambda: &[T], r: usize, p: u32) -> Result<T> {
    let d = lambda.len();
    if r == 0 || d % r != 0 {
        return Err(Error::Dimension("lambda length must be a multiple of r".into()));
    }
    let mut acc = T::zero();
    for_each_equipartition(r, d / r, |part| {
        let mut t = T::one();
        for b in &part.blocks {
            t = t * powi(&vandermonde_of(lambda, b), 2 * p);
        }
        acc = acc.clone() + t;
    })?;
    Ok(acc)
}

/// `Σ_{|A|=n} Δ(A)^k Δ(A')^k` over subsets of `{0..2n-1}`.
pub fn subset_power_sum<T: Scalar>(lambda: &[T], k: u32) -> T {
    let d = lambda.len();
    let n = d / 2;
    let mut acc = T::zero();
    for a in subsets(d, n) {
        let ac = complement(&a, d);
        acc = acc + powi(&(vandermonde_of(lambda, &a) * vandermonde_of(lambda, &ac)), k);
    }
    acc
}

/// `1_{i≠j}/(λ_i − λ_j)`.
pub fn cauchy_kernel<T: Scalar>(lambda: &[T]) -> Mat<T> {
    let d = lambda.len();
    Mat::from_fn(d, d, |i, j| if i == j { T::zero() } else { T::one() / (lambda[i].clone() - lambda[j].clone()) })
}

// ---------------------------------------------------------------------------
// Identity registry

/// Named identities checked exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IdentityId {
    /// `Σ Δ(A)²Δ(A')² = (−2)^n Δ(λ) Pf(1/(λ_i−λ_j))`.
    IdPfaff,
    /// `Σ Δ⁴Δ'⁴ = 2^{−n} (Σ Δ²Δ'²)²`.
    QuadToSquare,
    /// `Σ Δ⁴Δ'⁴ = 2^n Δ(λ)² Pf(1/(λ_i−λ_j))²`.
    Det4Pfaff,
    /// `Σ Δ⁴Δ'⁴ = 2^n Δ(λ)² Hf(1/(λ_i−λ_j)²)`.
    Det4Hafnian,
    /// Sum of squared Cauchy determinants over 8-block partitions.
    CauchySum,
    /// Cycle sums of `∏ 1/(z_i − z_σ(i))` vanish for `k ≥ 3`.
    CauchyCycle,
    /// Sylvester's column exchange identity.
    Sylvester,
    /// Signed exchange of Vandermonde pairs with fixed overlap.
    DetSylv,
    /// `Δ(λ) = (−1)^n sgn(σ_A) Δ(A)Δ(A')Θ(A,A')`.
    SignExchange,
    /// `Pf(K)² = det K = Hf(K∘K)` for the Cauchy kernel `K`.
    PfDetHf,
    /// Positive-spectrum Pfaffian form of `det M(λ, Q)` for `r = 2`.
    PfaffianDetM,
    /// `det M` equals its equipartition expansion.
    DetMExpansion,
}

impl IdentityId {
    pub const ALL: [IdentityId; 12] = [
        IdentityId::IdPfaff,
        IdentityId::QuadToSquare,
        IdentityId::Det4Pfaff,
        IdentityId::Det4Hafnian,
        IdentityId::CauchySum,
        IdentityId::CauchyCycle,
        IdentityId::Sylvester,
        IdentityId::DetSylv,
        IdentityId::SignExchange,
        IdentityId::PfDetHf,
        IdentityId::PfaffianDetM,
        IdentityId::DetMExpansion,
    ];

    pub fn name(self) -> &'static str {
        match self {
            IdentityId::IdPfaff => "id-pfaff",
            IdentityId::QuadToSquare => "quad-to-square",
            IdentityId::Det4Pfaff => "det4-pfaff",
            IdentityId::Det4Hafnian => "det4-hafnian",
            IdentityId::CauchySum => "cauchy-sum",
            IdentityId::CauchyCycle => "cauchy-cycle",
            IdentityId::Sylvester => "sylvester",
            IdentityId::DetSylv => "det-sylv",
            IdentityId::SignExchange => "sign-exchange",
            IdentityId::PfDetHf => "pf-det-hf",
            IdentityId::PfaffianDetM => "pfaffian-detm",
            IdentityId::DetMExpansion => "detm-expansion",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|i| i.name() == s)
    }

    /// Number of λ values the identity consumes at size `size`.
    pub fn lambda_len(self, size: usize, r: usize) -> usize {
        match self {
            IdentityId::CauchyCycle => size,
            IdentityId::DetMExpansion => size * r,
            _ => 2 * size,
        }
    }
}

/// Input for one identity evaluation.
#[derive(Debug, Clone)]
pub struct IdentityInput {
    /// `n` for the subset identities, `k` for the cycle lemma.
    pub size: usize,
    pub lambda: Vec<ExactScalar>,
    /// Extra matrix entries, row-major: `Q` (2×2n) for the Pfaffian form,
    /// `Q` (r×rn) for the expansion, two n×n matrices for Sylvester.
    pub aux: Vec<ExactScalar>,
    /// Block size for the expansion identity.
    pub r: usize,
    /// Restrict the Cauchy partition sum to one `(b_1..b_4)`.
    pub profile: Option<[usize; 4]>,
}

impl IdentityInput {
    pub fn new(size: usize, lambda: Vec<ExactScalar>) -> Self {
        Self { size, lambda, aux: Vec::new(), r: 2, profile: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdentityReport {
    pub identity: String,
    pub n: usize,
    pub lambda: Vec<String>,
    /// Left and right sides of the first failing case, or of the first
    /// case when all pass.
    pub lhs: String,
    pub rhs: String,
    pub cases: usize,
    pub failures: usize,
    pub pass: bool,
}

struct Cases {
    cases: usize,
    failures: usize,
    shown: Option<(ExactScalar, ExactScalar)>,
}

impl Cases {
    fn new() -> Self {
        Self { cases: 0, failures: 0, shown: None }
    }

    fn push(&mut self, lhs: ExactScalar, rhs: ExactScalar) {
        self.cases += 1;
        let ok = lhs == rhs;
        if !ok {
            self.failures += 1;
            if self.failures == 1 {
                self.shown = Some((lhs, rhs));
                return;
            }
        }
        if self.shown.is_none() {
            self.shown = Some((lhs, rhs));
        }
    }
}

fn pow2(e: i64) -> ExactScalar {
    let two = int(2);
    if e >= 0 {
        powi(&two, e as u32)
    } else {
        ExactScalar::one() / powi(&two, (-e) as u32)
    }
}

fn multinomial(parts: &[usize]) -> ExactScalar {
    let n: usize = parts.iter().sum();
    let fact = |k: usize| (1..=k).fold(BigInt::one(), |a, b| a * BigInt::from(b));
    let mut den = BigInt::one();
    for &p in parts {
        den *= fact(p);
    }
    ExactScalar::from_integer(fact(n) / den)
}

/// Exact square root of a rational, when it has one.
pub fn exact_sqrt(x: &ExactScalar) -> Option<ExactScalar> {
    if x.is_negative() {
        return None;
    }
    let (n, d) = (x.numer(), x.denom());
    let (sn, sd) = (n.sqrt(), d.sqrt());
    if &(&sn * &sn) == n && &(&sd * &sd) == d {
        Some(ExactScalar::new(sn, sd))
    } else {
        None
    }
}

fn distinct_rationals<R: Rng + ?Sized>(rng: &mut R, k: usize) -> Vec<ExactScalar> {
    let mut out: Vec<ExactScalar> = Vec::with_capacity(k);
    while out.len() < k {
        let v = rat(rng.random_range(-30..=30), rng.random_range(1..=7));
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

/// A random test point for `id`: distinct rationals `p/q` (`|p| ≤ 30`,
/// `q ≤ 7`), squares of distinct positive rationals for the Pfaffian form,
/// small rational matrix entries, and one random profile for the Cauchy
/// partition sum at `size ≥ 4`.
pub fn random_input<R: Rng + ?Sized>(id: IdentityId, size: usize, r: usize, rng: &mut R) -> IdentityInput {
    let mut input = IdentityInput::new(size, Vec::new());
    input.r = r;
    let len = id.lambda_len(size, r);
    input.lambda = if id == IdentityId::PfaffianDetM {
        let mut mu: Vec<ExactScalar> = Vec::with_capacity(len);
        while mu.len() < len {
            let v = rat(rng.random_range(1..=20), rng.random_range(1..=5));
            if !mu.contains(&v) {
                mu.push(v);
            }
        }
        mu.iter().map(|m| m * m).collect()
    } else {
        distinct_rationals(rng, len)
    };
    let aux_len = match id {
        IdentityId::PfaffianDetM => 2 * len,
        IdentityId::DetMExpansion => r * len,
        IdentityId::Sylvester => 2 * size * size,
        _ => 0,
    };
    input.aux = (0..aux_len).map(|_| rat(rng.random_range(-9..=9), rng.random_range(1..=4))).collect();
    if id == IdentityId::CauchySum && size >= 4 {
        let all = compositions4(size);
        input.profile = Some(all[rng.random_range(0..all.len())]);
    }
    input
}

/// Evaluate one identity exactly.
pub fn check_identity(id: IdentityId, input: &IdentityInput) -> Result<IdentityReport> {
    let lam = &input.lambda;
    let n = input.size;
    let need = id.lambda_len(n, input.r);
    if lam.len() != need {
        return Err(Error::Dimension(format!("{} at size {n} needs {need} lambda values, got {}", id.name(), lam.len())));
    }
    for i in 0..lam.len() {
        for j in i + 1..lam.len() {
            if lam[i] == lam[j] {
                return domain("lambda values must be pairwise distinct");
            }
        }
    }
    let guard = |limit: usize| -> Result<()> {
        if n > limit || n == 0 {
            return Err(Error::Guard { what: format!("{} at size {n}", id.name()), estimate: n as f64 });
        }
        Ok(())
    };
    let d = lam.len();
    let mut cs = Cases::new();
    match id {
        IdentityId::IdPfaff => {
            guard(4)?;
            let lhs = subset_power_sum(lam, 2);
            let rhs = powi(&int(-2), n as u32) * vandermonde(lam) * pfaffian(&cauchy_kernel(lam))?;
            cs.push(lhs, rhs);
        }
        IdentityId::QuadToSquare => {
            guard(4)?;
            let lhs = subset_power_sum(lam, 4);
            let s2 = subset_power_sum(lam, 2);
            cs.push(lhs, pow2(-(n as i64)) * s2.clone() * s2);
        }
        IdentityId::Det4Pfaff => {
            guard(4)?;
            let lhs = subset_power_sum(lam, 4);
            let pf = pfaffian(&cauchy_kernel(lam))?;
            let v = vandermonde(lam);
            cs.push(lhs, pow2(n as i64) * v.clone() * v * pf.clone() * pf);
        }
        IdentityId::Det4Hafnian => {
            guard(4)?;
            let lhs = subset_power_sum(lam, 4);
            let k = cauchy_kernel(lam);
            let k2 = Mat::from_fn(d, d, |i, j| k[(i, j)].clone() * k[(i, j)].clone());
            let v = vandermonde(lam);
            cs.push(lhs, pow2(n as i64) * v.clone() * v * hafnian(&k2)?);
        }
        IdentityId::CauchySum => {
            guard(4)?;
            let base: ExactScalar = subsets(d, n)
                .into_iter()
                .map(|a| {
                    let c = cauchy_det(&a, &complement(&a, d), lam).expect("distinct");
                    c.clone() * c
                })
                .fold(ExactScalar::zero(), |x, y| x + y);
            let profiles: Vec<[usize; 4]> = match input.profile {
                Some(p) => {
                    if p.iter().sum::<usize>() != n {
                        return domain("profile must sum to n");
                    }
                    vec![p]
                }
                None => compositions4(n),
            };
            for b in profiles {
                let lhs = cauchy_partition_sum(lam, &b)?;
                cs.push(lhs, multinomial(&b) * base.clone());
            }
        }
        IdentityId::CauchyCycle => {
            if !(3..=6).contains(&n) {
                return Err(Error::Guard { what: "cycle lemma needs 3 <= k <= 6".into(), estimate: n as f64 });
            }
            let (cyc, full) = cycle_sums(lam);
            cs.push(cyc, ExactScalar::zero());
            cs.push(full, ExactScalar::zero());
        }
        IdentityId::Sylvester => {
            guard(4)?;
            let (r1, r2) = if input.aux.len() == 2 * n * n {
                (
                    Mat::from_fn(n, n, |i, j| input.aux[i * n + j].clone()),
                    Mat::from_fn(n, n, |i, j| input.aux[n * n + i * n + j].clone()),
                )
            } else {
                let vm = |set: &[usize]| Mat::from_fn(n, n, |i, j| powi(&lam[set[j]], i as u32));
                let a: Vec<usize> = (0..n).collect();
                (vm(&a), vm(&complement(&a, d)))
            };
            let lhs = det(&r1) * det(&r2);
            for m in 1..=n {
                for i_set in subsets(n, m) {
                    let mut rhs = ExactScalar::zero();
                    for j_set in subsets(n, m) {
                        let mut h1 = r1.clone();
                        let mut h2 = r2.clone();
                        for (&ci, &cj) in i_set.iter().zip(&j_set) {
                            for row in 0..n {
                                h1[(row, ci)] = r2[(row, cj)].clone();
                                h2[(row, cj)] = r1[(row, ci)].clone();
                            }
                        }
                        rhs = rhs + det(&h1) * det(&h2);
                    }
                    cs.push(lhs.clone(), rhs);
                }
            }
        }
        IdentityId::DetSylv => {
            guard(4)?;
            let sg = |a: &[usize]| -> ExactScalar {
                parity_sign(equipartition_sign(&[a.to_vec(), complement(a, d)]) < 0)
            };
            for a in subsets(d, n) {
                let ac = complement(&a, d);
                let base = vandermonde_of(lam, &a) * vandermonde_of(lam, &ac);
                for k in 0..=n {
                    for s in subsets_of(&a, k) {
                        let lhs: ExactScalar = parity_sign::<ExactScalar>((n - k) % 2 == 1) * base.clone();
                        let mut sum = ExactScalar::zero();
                        for extra in subsets_of(&ac, n - k) {
                            let mut b: Vec<usize> = s.iter().chain(extra.iter()).copied().collect();
                            b.sort_unstable();
                            let bc = complement(&b, d);
                            sum = sum + sg(&b) * vandermonde_of(lam, &b) * vandermonde_of(lam, &bc);
                        }
                        cs.push(lhs, sg(&a) * sum);
                    }
                }
            }
        }
        IdentityId::SignExchange => {
            guard(4)?;
            let full = vandermonde(lam);
            for a in subsets(d, n) {
                let ac = complement(&a, d);
                let s: ExactScalar =
                    parity_sign((n % 2 == 1) != (equipartition_sign(&[a.clone(), ac.clone()]) < 0));
                let rhs = s * vandermonde_of(lam, &a) * vandermonde_of(lam, &ac) * theta(&a, &ac, lam)?;
                cs.push(full.clone(), rhs);
            }
        }
        IdentityId::PfDetHf => {
            guard(4)?;
            let k = cauchy_kernel(lam);
            let pf = pfaffian(&k)?;
            let dt = det(&k);
            let k2 = Mat::from_fn(d, d, |i, j| k[(i, j)].clone() * k[(i, j)].clone());
            let hf = hafnian(&k2)?;
            cs.push(pf.clone() * pf, dt.clone());
            cs.push(dt, hf);
        }
        IdentityId::PfaffianDetM => {
            guard(4)?;
            let mu: Vec<ExactScalar> = lam
                .iter()
                .map(|l| exact_sqrt(l).filter(|m| m.is_positive()))
                .collect::<Option<_>>()
                .ok_or_else(|| Error::Domain("pfaffian-detm needs lambda values that are positive rational squares".into()))?;
            if input.aux.len() != 2 * d {
                return Err(Error::Dimension(format!("pfaffian-detm needs a 2x{d} Q in aux")));
            }
            let q = Mat::from_fn(2, d, |i, j| input.aux[i * d + j].clone());
            let lhs = det(&build_m(lam, &q, 2)?);
            let mut prod = ExactScalar::one();
            for i in 0..d {
                for j in i + 1..d {
                    prod = prod * (mu[i].clone() + mu[j].clone());
                }
            }
            let k = Mat::from_fn(d, d, |i, j| {
                if i == j {
                    ExactScalar::zero()
                } else {
                    (q[(0, i)].clone() * q[(1, j)].clone() - q[(0, j)].clone() * q[(1, i)].clone())
                        / (mu[i].clone() + mu[j].clone())
                }
            });
            cs.push(lhs, prod * pfaffian(&k)?);
        }
        IdentityId::DetMExpansion => {
            let r = input.r;
            if d > 12 || r == 0 {
                return Err(Error::Guard { what: "det M expansion".into(), estimate: d as f64 });
            }
            if input.aux.len() != r * d {
                return Err(Error::Dimension(format!("detm-expansion needs an {r}x{d} Q in aux")));
            }
            let q = Mat::from_fn(r, d, |i, j| input.aux[i * d + j].clone());
            cs.push(detm_via_expansion(lam, &q, r)?, det(&build_m(lam, &q, r)?));
        }
    }
    let (lhs, rhs) = cs.shown.unwrap_or((ExactScalar::zero(), ExactScalar::zero()));
    Ok(IdentityReport {
        identity: id.name().to_string(),
        n,
        lambda: lam.iter().map(|x| x.to_string()).collect(),
        lhs: lhs.to_string(),
        rhs: rhs.to_string(),
        cases: cs.cases,
        failures: cs.failures,
        pass: cs.failures == 0,
    })
}

/// Compositions of `n` into four nonnegative parts.
pub fn compositions4(n: usize) -> Vec<[usize; 4]> {
    let mut out = Vec::new();
    for a in 0..=n {
        for b in 0..=n - a {
            for c in 0..=n - a - b {
                out.push([a, b, c, n - a - b - c]);
            }
        }
    }
    out
}

/// `Σ_B ∏_{j=1..4} C²_{B_j, B_{9−j}}` over ordered partitions of `{0..2n-1}`
/// into eight blocks of sizes `(b_1,b_2,b_3,b_4,b_4,b_3,b_2,b_1)`.
pub fn cauchy_partition_sum(lambda: &[ExactScalar], b: &[usize; 4]) -> Result<ExactScalar> {
    let d = lambda.len();
    let sizes = [b[0], b[1], b[2], b[3], b[3], b[2], b[1], b[0]];
    if sizes.iter().sum::<usize>() != d {
        return Err(Error::Dimension("profile does not cover lambda".into()));
    }
    fn rec(
        lambda: &[ExactScalar],
        sizes: &[usize; 8],
        remaining: &[usize],
        blocks: &mut Vec<IndexSet>,
        acc: &mut ExactScalar,
    ) {
        if blocks.len() == 8 {
            let mut t = ExactScalar::one();
            for j in 0..4 {
                let c = cauchy_det(&blocks[j], &blocks[7 - j], lambda).expect("distinct");
                t = t * c.clone() * c;
            }
            *acc = acc.clone() + t;
            return;
        }
        let k = sizes[blocks.len()];
        for s in subsets_of(remaining, k) {
            let rest: Vec<usize> = remaining.iter().copied().filter(|x| !s.contains(x)).collect();
            blocks.push(s);
            rec(lambda, sizes, &rest, blocks, acc);
            blocks.pop();
        }
    }
    let mut acc = ExactScalar::zero();
    let all: Vec<usize> = (0..d).collect();
    rec(lambda, &sizes, &all, &mut Vec::with_capacity(8), &mut acc);
    Ok(acc)
}

/// Sums over `k`-cycles of `∏ 1/(z_i − z_σ(i))`, and over all of `S_k` of
/// the cyclic product `∏ 1/(z_σ(i) − z_σ(i+1))`.
pub fn cycle_sums(z: &[ExactScalar]) -> (ExactScalar, ExactScalar) {
    let k = z.len();
    let mut perms = Vec::new();
    permutations(&(0..k).collect::<Vec<_>>(), &mut Vec::new(), &mut perms);
    let mut cyc = ExactScalar::zero();
    let mut full = ExactScalar::zero();
    for p in &perms {
        // cyclic product along the sequence p
        let mut t = ExactScalar::one();
        for i in 0..k {
            t = t / (z[p[i]].clone() - z[p[(i + 1) % k]].clone());
        }
        full = full + t.clone();
        // each k-cycle appears once with p[0] == 0
        if p[0] == 0 {
            cyc = cyc + t;
        }
    }
    (cyc, full)
}

fn permutations(rest: &[usize], cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if rest.is_empty() {
        out.push(cur.clone());
        return;
    }
    for i in 0..rest.len() {
        let mut r2 = rest.to_vec();
        let v = r2.remove(i);
        cur.push(v);
        permutations(&r2, cur, out);
        cur.pop();
    }
}

// ---------------------------------------------------------------------------
// Overlap conjecture

/// Which reading of the overlap conjecture to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConjectureForm {
    /// Squared Vandermondes on the left, sign `(−1)^{x2+x3+x5+x7}`.
    Printed,
    /// Single powers on the left, sign from the odd overlaps
    /// `(−1)^{x2+x3+x5+x8}`. Degree-consistent with the right side.
    SinglePower,
}

/// One overlap profile: `x[i]` is the size of the overlap for pattern
/// `(j1..j4)` at reverse-lexicographic position `i` (1111 first, 0000 last).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConjectureRow {
    pub x: [usize; 16],
    pub quadruples: usize,
    pub lhs: String,
    pub rhs: String,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConjectureReport {
    pub n: usize,
    pub form: ConjectureForm,
    pub lambda: Vec<String>,
    pub rows: Vec<ConjectureRow>,
    pub profiles: usize,
    pub failures: usize,
    pub pass: bool,
}

fn overlap_profile(quad: [u32; 4], d: usize) -> [usize; 16] {
    let full = (1u32 << d) - 1;
    let mut x = [0usize; 16];
    for (pos, xv) in x.iter_mut().enumerate() {
        let pat = 15 - pos;
        let mut s = full;
        for (i, &a) in quad.iter().enumerate() {
            let j = (pat >> (3 - i)) & 1;
            s &= if j == 1 { a } else { full & !a };
        }
        *xv = s.count_ones() as usize;
    }
    x
}

fn conjecture_rhs(x: &[usize; 16], n: usize, base: &ExactScalar, form: ConjectureForm) -> ExactScalar {
    let sym = (0..16).all(|i| x[i] == x[15 - i]);
    if !sym || x[..8].iter().sum::<usize>() != n {
        return ExactScalar::zero();
    }
    let e = match form {
        ConjectureForm::Printed => x[1] + x[2] + x[4] + x[6],
        ConjectureForm::SinglePower => x[1] + x[2] + x[4] + x[7],
    };
    parity_sign::<ExactScalar>(e % 2 == 1) * multinomial(&x[..8]) * base.clone()
}

/// Evaluate both sides for every overlap profile that occurs, plus the
/// symmetric profiles that do not occur (whose left side is the empty sum).
pub fn conjecture_table(n: usize, lambda: &[ExactScalar], form: ConjectureForm) -> Result<ConjectureReport> {
    if !(1..=3).contains(&n) {
        return Err(Error::Guard { what: format!("conjecture at n={n}"), estimate: binom(2 * n, n).powi(4) });
    }
    let d = 2 * n;
    if lambda.len() != d {
        return Err(Error::Dimension(format!("need {d} lambda values")));
    }
    let subs = subsets(d, n);
    let masks: Vec<u32> = subs.iter().map(|s| s.iter().fold(0u32, |m, &i| m | (1 << i))).collect();
    let vals: Vec<ExactScalar> = subs
        .iter()
        .map(|a| {
            let ac = complement(a, d);
            let sg: ExactScalar = parity_sign(equipartition_sign(&[a.clone(), ac.clone()]) < 0);
            let v = vandermonde_of(lambda, a) * vandermonde_of(lambda, &ac);
            match form {
                ConjectureForm::Printed => sg * v.clone() * v,
                ConjectureForm::SinglePower => sg * v,
            }
        })
        .collect();
    let base = subset_power_sum(lambda, 4);
    let mut table: std::collections::BTreeMap<[usize; 16], (usize, ExactScalar)> = Default::default();
    let k = subs.len();
    for i1 in 0..k {
        for i2 in 0..k {
            let v12 = vals[i1].clone() * vals[i2].clone();
            for i3 in 0..k {
                let v123 = v12.clone() * vals[i3].clone();
                for i4 in 0..k {
                    let x = overlap_profile([masks[i1], masks[i2], masks[i3], masks[i4]], d);
                    let e = table.entry(x).or_insert((0, ExactScalar::zero()));
                    e.0 += 1;
                    e.1 = e.1.clone() + v123.clone() * vals[i4].clone();
                }
            }
        }
    }
    let mut rows = Vec::new();
    let mut failures = 0;
    for (x, (count, lhs)) in &table {
        let rhs = conjecture_rhs(x, n, &base, form);
        let pass = *lhs == rhs;
        failures += usize::from(!pass);
        rows.push(ConjectureRow { x: *x, quadruples: *count, lhs: lhs.to_string(), rhs: rhs.to_string(), pass });
    }
    Ok(ConjectureReport {
        n,
        form,
        lambda: lambda.iter().map(|v| v.to_string()).collect(),
        profiles: rows.len(),
        failures,
        pass: failures == 0,
        rows,
    })
}

/// Compare both sides for a single overlap profile. Profiles that cannot
/// occur give an empty left sum.
pub fn check_conjecture(
    n: usize,
    x: &[usize; 16],
    lambda: &[ExactScalar],
    form: ConjectureForm,
) -> Result<ConjectureRow> {
    if x[..8].iter().sum::<usize>() != n {
        return domain("overlap sizes x_1..x_8 must sum to n");
    }
    let rep = conjecture_table(n, lambda, form)?;
    if let Some(row) = rep.rows.into_iter().find(|row| &row.x == x) {
        return Ok(row);
    }
    let base = subset_power_sum(lambda, 4);
    let rhs = conjecture_rhs(x, n, &base, form);
    Ok(ConjectureRow { x: *x, quadruples: 0, lhs: "0".into(), pass: rhs.is_zero(), rhs: rhs.to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rat;

    #[test]
    fn counts() {
        assert_eq!(enumerate_equipartitions(2, 1).unwrap().len(), 2);
        assert_eq!(enumerate_equipartitions(2, 2).unwrap().len(), 6);
        assert_eq!(enumerate_equipartitions(3, 2).unwrap().len(), 90);
        assert!(matches!(enumerate_equipartitions(4, 5), Err(Error::Guard { .. })));
    }

    #[test]
    fn small_vandermonde() {
        assert_eq!(vandermonde(&[int(0), int(1), int(2)]), int(2));
        assert_eq!(vandermonde(&[int(1), int(2), int(4)]), int(6));
        assert_eq!(vandermonde(&[int(7)]), int(1));
        assert_eq!(theta(&[0], &[1], &[int(5), int(3)]).unwrap(), int(2));
        assert_eq!(theta::<ExactScalar>(&[], &[1], &[int(5), int(3)]).unwrap(), int(1));
    }

    #[test]
    fn cauchy_small() {
        let lam = [int(3), int(1)];
        assert_eq!(cauchy_det(&[0], &[1], &lam).unwrap(), rat(1, 2));
        assert_eq!(cauchy_det::<ExactScalar>(&[], &[], &lam).unwrap(), int(1));
    }

    #[test]
    fn matchings_4x4() {
        let a = [int(2), int(-3), int(5), int(7), int(11), int(-13)];
        let (a12, a13, a14, a23, a24, a34) = (&a[0], &a[1], &a[2], &a[3], &a[4], &a[5]);
        let up = |i: usize, j: usize| -> ExactScalar {
            match (i, j) {
                (0, 1) => a12.clone(),
                (0, 2) => a13.clone(),
                (0, 3) => a14.clone(),
                (1, 2) => a23.clone(),
                (1, 3) => a24.clone(),
                (2, 3) => a34.clone(),
                _ => unreachable!(),
            }
        };
        let skew = Mat::from_fn(4, 4, |i, j| if i < j { up(i, j) } else if i > j { -up(j, i) } else { int(0) });
        let sym = Mat::from_fn(4, 4, |i, j| if i < j { up(i, j) } else if i > j { up(j, i) } else { int(99) });
        let pf = a12 * a34 - a13 * a24 + a14 * a23;
        let hf = a12 * a34 + a13 * a24 + a14 * a23;
        assert_eq!(pfaffian(&skew).unwrap(), pf);
        assert_eq!(hafnian(&sym).unwrap(), hf);
        assert!(pfaffian(&sym).is_err());
    }
}

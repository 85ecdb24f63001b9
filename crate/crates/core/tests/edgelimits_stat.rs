use blockbeta::densities::gof_energy;
use blockbeta::edgelimits::*;
use blockbeta::ensembles::{sample_hermite_prefix, sample_laguerre, BlockJacobi, EnsembleParams};
use blockbeta::randcore::{FieldTag, RngStream};
use blockbeta::{CMat, Cplx};

const AIRY1: f64 = 2.338_107_410_459_767;

fn at(rows: &[CdfRow], lambda: f64, k: usize) -> CdfRow {
    *rows.iter().find(|r| r.lambda == lambda && r.k == k).unwrap()
}

fn quiet_soft(r: usize, lambda: f64) -> usize {
    let mut cfg = SoftEdgeConfig::new(r, 1.0, 1.0, lambda);
    cfg.noise = false;
    cfg.n_paths = 1;
    simulate_airy_sde(&cfg, &RngStream::new(0, 0)).unwrap().counts[0] as usize
}

fn quiet_hard(a: f64, lambda: f64) -> usize {
    let mut cfg = HardEdgeConfig::new(1, 1.0, 1.0, a, lambda);
    cfg.noise = false;
    cfg.n_paths = 1;
    simulate_bessel_sde(&cfg, &RngStream::new(0, 0)).unwrap().counts[0] as usize
}

#[test]
fn special_function_zeros() {
    assert!((airy_zero(1).unwrap() + AIRY1).abs() < 1e-10);
    assert!((bessel_j_zero(0.0, 1).unwrap() - 2.404_825_557_695_773).abs() < 1e-9);
    assert!((bessel_j_zero(1.0, 1).unwrap() - 3.831_705_970_207_512).abs() < 1e-9);
}

#[test]
fn soft_rescaling_forms() {
    let (n, r, s) = (8, 2, 2.0);
    let c = 2.0 * ((r as f64 + s) * n as f64).sqrt();
    let flat = BlockJacobi {
        r,
        diag_blocks: vec![CMat::identity(r, r) * Cplx::new(c, 0.0); n],
        offdiag_blocks: vec![CMat::zeros(r, r); n - 1],
    };
    assert!(rescale_soft(&flat, s).unwrap().norm() < 1e-12);

    let t = blockbeta::ensembles::sample_hermite(&EnsembleParams::hermite(FieldTag::Real, n, r, s), &mut RngStream::new(1, 0).rng())
        .unwrap();
    let h = rescale_soft(&t, s).unwrap();
    let m = ((r * n) as f64).powf(1.0 / 3.0);
    let g = (r as f64 + s) / r as f64;
    let d = r * n;
    let other = CMat::identity(d, d) * Cplx::new(2.0 * m * m, 0.0) - t.to_dense() * Cplx::new((m / g).sqrt(), 0.0);
    assert!((&h - other).norm() < 1e-10 * h.norm());
    let low = soft_edge_smallest(&t, s, 3);
    let full = blockbeta::linalg::eigvalsh(&h).unwrap();
    assert!(low.iter().zip(&full).all(|(a, b)| (a - b).abs() < 1e-8));
}

#[test]
fn soft_edge_location_is_stable_in_n() {
    let mean = |n: usize, seed: u64| {
        let v = soft_edge_ensemble(1, 2.0, 0.0, n, 4000, &RngStream::new(seed, 0)).unwrap();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let (m100, m200) = (mean(100, 2), mean(200, 3));
    // TW₂ has mean −1.7711; Λ₀ is its negative
    assert!((m200 - 1.7711).abs() < 0.25, "{m200}");
    assert!((m100 - m200).abs() < 0.15, "{m100} vs {m200}");
}

#[test]
fn potential_sums_drift_and_variance() {
    let (r, s) = (2, 2.0);
    let n = 100_000 / r;
    let p = EnsembleParams::hermite(FieldTag::Real, n, r, s);
    let m_n = ((r * n) as f64).powf(1.0 / 3.0);
    let k = m_n.round() as usize;
    let stream = RngStream::new(4, 0);
    let draws = 1000;
    let mut sym = Vec::with_capacity(draws);
    let mut off = Vec::with_capacity(draws);
    let mut x = 0.0;
    for i in 0..draws as u64 {
        let t = sample_hermite_prefix(&p, k, &mut stream.child(i).rng()).unwrap();
        let ps = potential_sums(&t, n, s).unwrap();
        x = ps.x[k];
        let y = ps.symmetric(k);
        sym.push((0..r).map(|j| y[(j, j)].re).sum::<f64>() / r as f64);
        off.push(ps.y1[k][(1, 0)].re);
    }
    let mean = sym.iter().sum::<f64>() / draws as f64;
    let sd = (sym.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (draws - 1) as f64).sqrt();
    let want = r as f64 * x * x / 2.0;
    assert!((mean - want).abs() < 3.0 * sd / (draws as f64).sqrt(), "{mean} vs {want} (sd {sd})");

    let g = (r as f64 + s) / r as f64;
    let var = off.iter().map(|v| v * v).sum::<f64>() / draws as f64;
    let slope = var / x;
    assert!((slope * g - 1.0).abs() < 0.1, "slope {slope}, want {}", 1.0 / g);

    // at the block means the centred diagonal part vanishes
    let zero = BlockJacobi { r, diag_blocks: vec![CMat::zeros(r, r); k + 1], offdiag_blocks: vec![CMat::identity(r, r); k] };
    let ps = potential_sums(&zero, n, s).unwrap();
    assert!(ps.y1.iter().all(|y| y.norm() == 0.0));
}

#[test]
fn noise_free_explosions() {
    assert_eq!(quiet_soft(1, 2.0), 0);
    assert!(quiet_soft(1, 2.5) >= 1);
    // r = 2: 2^{2/3}·2.33811 ≈ 3.7115, a double level
    assert_eq!(quiet_soft(2, 3.6), 0);
    assert_eq!(quiet_soft(2, 3.8), 2);
}

#[test]
fn soft_cdf_is_monotone() {
    let mut cfg = SoftEdgeConfig::new(1, 2.0, 1.0, 0.0);
    cfg.n_paths = 10_000;
    let grid = [-2.0, -1.0, 0.0, 1.0, 2.0];
    let (rows, flags) = soft_edge_cdf(&cfg, &grid, 2, &RngStream::new(5, 0)).unwrap();
    assert!(flags < 0.01);
    for w in grid.windows(2) {
        let (a, b) = (at(&rows, w[0], 0), at(&rows, w[1], 0));
        assert!(b.estimate + 3.0 * b.std_error >= a.estimate, "{a:?} {b:?}");
    }
    for &l in &grid {
        assert!(at(&rows, l, 1).estimate <= at(&rows, l, 0).estimate);
    }
}

#[test]
fn airy_operator_noise_free() {
    let mut rng = RngStream::new(0, 0).rng();
    let op = discretize_airy(1, 2.0, 1.0, 0.01, 20.0, false, &mut rng).unwrap();
    assert!((airy_operator_lowest(&op, 1)[0] - AIRY1).abs() < 0.01);
    let op = discretize_airy(2, 1.0, 2.0, 0.01, 20.0, false, &mut rng).unwrap();
    let want = 2f64.powf(2.0 / 3.0) * AIRY1;
    for l in airy_operator_lowest(&op, 2) {
        assert!((l - want).abs() < 0.02, "{l} vs {want}");
    }
    assert!(discretize_airy(1, 2.0, 1.0, 0.06, 20.0, false, &mut rng).is_err());
    assert!(discretize_airy(1, 2.0, 1.0, 0.01, 5.0, false, &mut rng).is_err());
}

#[test]
fn airy_operator_matches_gue_edge() {
    let n = 10_000;
    let op = soft_edge_operator(1, 2.0, 1.0, 0.01, 12.0, n, &RngStream::new(6, 0)).unwrap();
    let ens = soft_edge_ensemble(1, 2.0, 0.0, 1000, n, &RngStream::new(6, 1)).unwrap();
    let a: Vec<Vec<f64>> = op.iter().map(|&x| vec![x]).collect();
    let b: Vec<Vec<f64>> = ens.iter().map(|&x| vec![x]).collect();
    let t = gof_energy(&a, &b, 199, &RngStream::new(6, 2)).unwrap();
    assert!(t.p_value > 0.01, "{t:?}");
}

#[test]
fn soft_sde_matches_operator() {
    let grid = [-1.0, 0.0, 1.0, 2.0, 3.0];
    let mut cfg = SoftEdgeConfig::new(2, 1.0, 2.0, 0.0);
    cfg.n_paths = 4000;
    let (rows, flags) = soft_edge_cdf(&cfg, &grid, 1, &RngStream::new(7, 0)).unwrap();
    assert!(flags < 0.01);
    let op = soft_edge_operator(2, 1.0, 2.0, 0.01, 12.0, 4000, &RngStream::new(7, 1)).unwrap();
    for &l in &grid {
        let (sde, opc) = (at(&rows, l, 0).estimate, empirical_cdf(&op, l));
        assert!((sde - opc).abs() < 0.03, "λ={l}: {sde} vs {opc}");
    }
}

#[test]
fn matched_beta_gamma_across_r() {
    let grid = [-1.0, 0.0, 1.0, 2.0, 3.0];
    let table = |r: usize, beta: f64, gamma: f64, form: Interaction, seed: u64| {
        let mut cfg = SoftEdgeConfig::new(r, beta, gamma, 0.0);
        cfg.n_paths = 4000;
        cfg.interaction = form;
        soft_edge_cdf(&cfg, &grid, 1, &RngStream::new(seed, 0)).unwrap().0
    };
    let one = table(1, 2.0, 1.0, Interaction::Ito, 8);
    let printed = table(2, 1.0, 2.0, Interaction::Printed, 9);
    let ito = table(2, 1.0, 2.0, Interaction::Ito, 10);
    let gap = |a: &[CdfRow], b: &[CdfRow]| a.iter().zip(b).map(|(x, y)| (x.estimate - y.estimate).abs()).fold(0.0, f64::max);
    // with interaction 2 the r = 2 law coincides with r = 1
    assert!(gap(&one, &printed) < 0.04, "{}", gap(&one, &printed));
    // the Itô coefficient 2/γ (which tracks the matrix model) does not
    assert!(gap(&one, &ito) > 0.04, "{}", gap(&one, &ito));
}

#[test]
fn bessel_sde_anchors() {
    assert_eq!(quiet_hard(0.0, 1.3), 0);
    assert!(quiet_hard(0.0, 1.6) >= 1);
    assert_eq!(quiet_hard(1.0, 3.6), 0);
    assert!(quiet_hard(1.0, 3.75) >= 1);

    let mut cfg = HardEdgeConfig::new(2, 1.0, 2.0, 1.0, 0.0);
    cfg.n_paths = 10_000;
    let e = simulate_bessel_sde(&cfg, &RngStream::new(11, 0)).unwrap();
    assert!(e.counts.iter().all(|&c| c == 0));

    let mut cfg = HardEdgeConfig::new(1, 2.0, 1.0, 0.0, 0.0);
    cfg.n_paths = 4000;
    let grid = [0.25, 0.5, 1.0, 2.0];
    let (rows, _) = hard_edge_cdf(&cfg, &grid, 1, &RngStream::new(12, 0)).unwrap();
    for w in rows.windows(2) {
        assert!(w[1].estimate + 3.0 * w[1].std_error >= w[0].estimate);
    }
}

#[test]
fn kernel_noise_free() {
    let mut rng = RngStream::new(0, 0).rng();
    for a in [0.0, 1.0] {
        let j = bessel_j_zero(a, 1).unwrap();
        let ks = discretize_bessel_kernel(1, 2.0, 1.0, a, 0.005, 10.0, 2, false, &mut rng).unwrap();
        let want = j * j / 4.0;
        assert!(((ks.eigenvalues[0] - want) / want).abs() < 0.02, "a={a}: {:?} vs {want}", ks.eigenvalues);
        assert!(ks.eigenvalues.iter().all(|&l| l > 0.0));
    }
    assert!(discretize_bessel_kernel(1, 2.0, 1.0, 0.0, 0.02, 10.0, 1, false, &mut rng).is_err());
    assert!(discretize_bessel_kernel(1, 2.0, 1.0, -1.0, 0.01, 10.0, 1, false, &mut rng).is_err());
}

#[test]
fn kernel_matches_lue_hard_edge() {
    let (op, resampled) = hard_edge_operator(1, 2.0, 1.0, 0.0, 0.01, 10.0, 2000, &RngStream::new(13, 0)).unwrap();
    assert!(resampled < 20);
    let mut ens = hard_edge_ensemble(1, 2.0, 0.0, 0.0, 200, 2000, &RngStream::new(13, 1)).unwrap();
    ens.sort_by(f64::total_cmp);
    for q in [0.25, 0.5, 0.75] {
        let x = ens[(q * ens.len() as f64) as usize];
        let f = empirical_cdf(&op, x);
        assert!((f - q).abs() < 0.05, "q={q}: {f}");
    }
}

#[test]
fn hard_rescaling() {
    let p = EnsembleParams::laguerre(FieldTag::Complex, 60, 2, 1.0, 61.0);
    let (l, w) = sample_laguerre(&p, &mut RngStream::new(14, 0).rng()).unwrap();
    let dense = rescale_hard(&w, 60, 2, 1.0).unwrap();
    assert!(dense[0] > 0.0);
    let sturm = hard_edge_smallest(&l, 1.0, 3);
    assert!(sturm.iter().zip(&dense).all(|(a, b)| (a - b).abs() < 1e-8 * b.max(1.0)), "{sturm:?} {:?}", &dense[..3]);
    assert!(rescale_hard(&w, 59, 2, 1.0).is_err());

    let mut big = hard_edge_ensemble(1, 2.0, 0.0, 0.0, 200, 4000, &RngStream::new(15, 0)).unwrap();
    big.sort_by(f64::total_cmp);
    let median = big[big.len() / 2];
    let small = hard_edge_ensemble(1, 2.0, 0.0, 0.0, 100, 4000, &RngStream::new(15, 1)).unwrap();
    let f = empirical_cdf(&small, median);
    assert!((f - 0.5).abs() < 0.03, "{f}");
}

#[test]
fn hard_parameter_conversion() {
    assert_eq!(operator_a(1, 0.0, 1.5), 1.5);
    assert_eq!(operator_a(2, 2.0, 1.0), 4.0);
}

#[test]
fn semicircle_checks() {
    let wig = hermite_spectra(&EnsembleParams::hermite(FieldTag::Real, 400, 1, 0.0), 20, &RngStream::new(16, 0)).unwrap();
    let rep = dos_check(&wig, 1, 0.0).unwrap();
    assert!(rep.sup_distance < 0.03, "{rep:?}");

    let blk = hermite_spectra(&EnsembleParams::hermite(FieldTag::Real, 200, 2, 2.0), 20, &RngStream::new(16, 1)).unwrap();
    let rep = dos_check(&blk, 2, 2.0).unwrap();
    assert!(rep.sup_distance < 0.05, "{rep:?}");
    assert!(rep.edge_excess < 0.005, "{rep:?}");
    assert!((rep.fitted_edge - 2.0 * 2f64.sqrt()).abs() < 0.1, "{rep:?}");

    let scaled: Vec<Vec<f64>> = blk.iter().map(|v| v.iter().map(|x| 1.5 * x).collect()).collect();
    let rep2 = dos_check(&scaled, 2, 2.0).unwrap();
    assert!((rep2.fitted_edge - 1.5 * rep.fitted_edge).abs() < 1e-12);
    assert!((semicircle_cdf(0.0, 2.0) - 0.5).abs() < 1e-15);
}

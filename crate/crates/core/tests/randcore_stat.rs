use blockbeta::linalg::eigvalsh;
use blockbeta::randcore::*;
use blockbeta::CMat;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

fn mean(xs: impl Iterator<Item = f64>) -> (f64, usize) {
    let mut s = 0.0;
    let mut n = 0;
    for x in xs {
        s += x;
        n += 1;
    }
    (s / n as f64, n)
}

#[test]
fn fnormal_moments() {
    let mut rng = RngStream::new(1, 0).rng();
    let n = 1_000_000;
    let xs: Vec<f64> = (0..n).map(|_| sample_fnormal(FieldTag::Real, &mut rng).re).collect();
    let m = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64;
    assert!((var - 1.0).abs() < 0.01, "{var}");

    let zs: Vec<_> = (0..n).map(|_| sample_fnormal(FieldTag::Complex, &mut rng)).collect();
    let (m2, _) = mean(zs.iter().map(|z| z.norm_sqr()));
    assert!((m2 - 1.0).abs() < 0.01, "{m2}");
    let (re2, _) = mean(zs.iter().map(|z| z.re * z.re));
    let (im2, _) = mean(zs.iter().map(|z| z.im * z.im));
    let (reim, _) = mean(zs.iter().map(|z| z.re * z.im));
    let corr = reim / (re2 * im2).sqrt();
    assert!(corr.abs() < 0.01, "{corr}");
}

#[test]
fn chi_moments_and_half_normal() {
    let mut rng = RngStream::new(2, 0).rng();
    for dof in [5.0, 2.5] {
        let (m, _) = mean((0..1_000_000).map(|_| sample_chi(dof, &mut rng).unwrap().powi(2)));
        assert!((m - dof).abs() < 0.03, "dof {dof}: {m}");
    }
    let n = 100_000;
    let mut xs: Vec<f64> = (0..n).map(|_| sample_chi(1.0, &mut rng).unwrap()).collect();
    xs.sort_by(f64::total_cmp);
    let nd = Normal::new(0.0, 1.0).unwrap();
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = 2.0 * nd.cdf(x) - 1.0;
            (f - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - f).abs())
        })
        .fold(0.0, f64::max);
    assert!(d < 0.01, "KS {d}");
    assert!(sample_chi(0.0, &mut rng).is_err());
    assert!(sample_chi(-1.0, &mut rng).is_err());
}

#[test]
fn gfe_variance_and_hermiticity() {
    let mut rng = RngStream::new(3, 0).rng();
    let (v, _) = mean((0..100_000).map(|_| sample_gfe(2, FieldTag::Real, &mut rng).unwrap()[(0, 0)].re.powi(2)));
    assert!((v - 2.0).abs() < 0.05, "{v}");
    let x = sample_gfe(3, FieldTag::Complex, &mut rng).unwrap();
    assert_eq!(x, x.adjoint());
    assert!(sample_gfe(0, FieldTag::Real, &mut rng).is_err());
}

#[test]
fn goe2_top_eigenvalue_mean() {
    // λ_max = (a+c)/2 + |((a−c)/2, b)|, a Rayleigh radius: mean √(π/2)
    let mut rng = RngStream::new(4, 0).rng();
    let n = 100_000;
    let tops: Vec<f64> = (0..n).map(|_| eigvalsh(&sample_gfe(2, FieldTag::Real, &mut rng).unwrap()).unwrap()[1]).collect();
    let m = tops.iter().sum::<f64>() / n as f64;
    let sd = (tops.iter().map(|t| (t - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    let want = (std::f64::consts::PI / 2.0).sqrt();
    assert!((m - want).abs() < 3.0 * sd / (n as f64).sqrt(), "{m} vs {want}");
}

#[test]
fn haar_unitary_and_marginals() {
    let mut rng = RngStream::new(5, 0).rng();
    for tag in [FieldTag::Real, FieldTag::Complex] {
        let q = sample_haar(4, tag, &mut rng).unwrap();
        assert!((q.adjoint() * &q - CMat::identity(4, 4)).norm() < 1e-12);
    }
    let (m, _) = mean((0..100_000).map(|_| sample_haar(3, FieldTag::Complex, &mut rng).unwrap()[(0, 0)].norm_sqr()));
    assert!((m - 1.0 / 3.0).abs() < 0.01, "{m}");

    // arcsine law of Q₁₁ on O(2), binned at equal probability
    let bins = 20;
    let mut counts = vec![0usize; bins];
    let n = 100_000;
    for _ in 0..n {
        let x = sample_haar(2, FieldTag::Real, &mut rng).unwrap()[(0, 0)].re;
        let f = 1.0 - x.clamp(-1.0, 1.0).acos() / std::f64::consts::PI;
        counts[((f * bins as f64) as usize).min(bins - 1)] += 1;
    }
    let e = n as f64 / bins as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
    let p = 1.0 - ChiSquared::new((bins - 1) as f64).unwrap().cdf(chi2);
    assert!(p > 0.01, "chi2 {chi2}, p {p}");
}

#[test]
fn sqw_moments() {
    let mut rng = RngStream::new(6, 0).rng();
    let (m, _) = mean((0..1_000_000).map(|_| sample_sqw(1, 5.0, FieldTag::Real, &mut rng).unwrap()[(0, 0)].norm_sqr()));
    assert!((m - 5.0).abs() < 0.03, "{m}");
    let (w11, _) = mean((0..100_000).map(|_| {
        let l = sample_sqw(2, 4.0, FieldTag::Real, &mut rng).unwrap();
        (&l * l.adjoint())[(0, 0)].re
    }));
    assert!((w11 - 4.0).abs() < 0.05, "{w11}");
    let (det, _) = mean((0..100_000).map(|_| {
        let l = sample_sqw(2, 4.0, FieldTag::Complex, &mut rng).unwrap();
        (&l * l.adjoint()).determinant().re
    }));
    assert!((det - 12.0).abs() < 0.3, "{det}");
    assert!(sample_sqw(3, 2.0, FieldTag::Real, &mut rng).is_err());
}

#[test]
fn streams_are_independent_of_order() {
    let base = RngStream::new(9, 0);
    let a: Vec<f64> = (0..4).map(|k| std_normal(&mut base.child(k).rng())).collect();
    let b: Vec<f64> = (0..4).rev().map(|k| std_normal(&mut base.child(k).rng())).collect();
    assert_eq!(a, b.into_iter().rev().collect::<Vec<_>>());
    assert_ne!(a[0], a[1]);
}

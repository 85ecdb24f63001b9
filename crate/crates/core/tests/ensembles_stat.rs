use blockbeta::densities::gof_energy;
use blockbeta::ensembles::*;
use blockbeta::linalg::eigvalsh;
use blockbeta::randcore::{sample_gfe, sample_ginibre, FieldTag, RngStream};
use blockbeta::CMat;

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

#[test]
fn classical_tridiagonal_offdiagonals() {
    let p = EnsembleParams::hermite(FieldTag::Real, 4, 1, 0.0);
    let mut rng = RngStream::new(1, 0).rng();
    let draws: Vec<BlockJacobi> = (0..100_000).map(|_| sample_hermite(&p, &mut rng).unwrap()).collect();
    for k in 0..3 {
        let m = mean(draws.iter().map(|t| t.offdiag_blocks[k][(0, 0)].re.powi(2)));
        assert!((m - (3 - k) as f64).abs() < 0.02, "b_{} {m}", k + 1);
    }
}

#[test]
fn single_block_is_gfe() {
    let p = EnsembleParams::hermite(FieldTag::Complex, 1, 3, 1.5);
    let t = sample_hermite(&p, &mut RngStream::new(2, 0).rng()).unwrap();
    assert!(t.offdiag_blocks.is_empty());
    let g = sample_gfe(3, FieldTag::Complex, &mut RngStream::new(2, 0).rng()).unwrap();
    assert!((&t.diag_blocks[0] - g).norm() < 1e-14);
}

#[test]
fn biased_block_degrees_of_freedom() {
    let p = EnsembleParams::hermite(FieldTag::Real, 3, 2, 2.0);
    let mut rng = RngStream::new(3, 0).rng();
    let b1: Vec<CMat> = (0..100_000).map(|_| sample_hermite(&p, &mut rng).unwrap().offdiag_blocks[0].clone()).collect();
    for (i, want) in [(0, 8.0), (1, 7.0)] {
        let m = mean(b1.iter().map(|b| b[(i, i)].re.powi(2)));
        assert!((m - want).abs() < 0.05, "entry {i}: {m}");
    }
    assert!(b1.iter().all(|b| b[(0, 1)].norm() == 0.0));
}

#[test]
fn laguerre_factor_moments() {
    let p = EnsembleParams::laguerre(FieldTag::Real, 2, 1, 0.0, 4.0);
    let mut rng = RngStream::new(4, 0).rng();
    let ls: Vec<BlockBidiagonal> = (0..100_000).map(|_| sample_laguerre(&p, &mut rng).unwrap().0).collect();
    for (k, want) in [(0, 4.0), (1, 3.0)] {
        let m = mean(ls.iter().map(|l| l.diag_blocks[k][(0, 0)].norm_sqr()));
        assert!((m - want).abs() < 0.03, "D_{}: {m}", k + 1);
    }

    let p = EnsembleParams::laguerre(FieldTag::Real, 2, 2, 0.0, 3.0);
    let mut min_eig = f64::INFINITY;
    let tr = mean((0..100_000).map(|_| {
        let (_, w) = sample_laguerre(&p, &mut rng).unwrap();
        min_eig = min_eig.min(eigvalsh(&w).unwrap()[0]);
        w.trace().re
    }));
    assert!((tr - 24.0).abs() < 0.2, "{tr}");
    assert!(min_eig >= -1e-10);
}

#[test]
fn laguerre_rejects_small_m() {
    let p = EnsembleParams::laguerre(FieldTag::Real, 3, 2, 1.0, 1.5);
    assert!(sample_laguerre(&p, &mut RngStream::new(5, 0).rng()).is_err());
    assert!(EnsembleParams::hermite(FieldTag::Real, 3, 2, -0.5).validate().is_err());
}

#[test]
fn householder_fixed_point_and_similarity() {
    let mut rng = RngStream::new(6, 0).rng();
    let t = sample_hermite(&EnsembleParams::hermite(FieldTag::Complex, 3, 2, 1.0), &mut rng).unwrap();
    let (t2, o) = block_householder(&t.to_dense(), 2).unwrap();
    assert!((t2.to_dense() - t.to_dense()).norm() < 1e-12);
    assert!((o - CMat::identity(6, 6)).norm() < 1e-12);

    let m = sample_gfe(3, FieldTag::Real, &mut rng).unwrap();
    let (t, o) = block_householder(&m, 1).unwrap();
    assert!(t.offdiag_blocks.iter().all(|b| b[(0, 0)].re > 0.0));
    assert!((o.adjoint() * &m * &o - t.to_dense()).norm() < 1e-9 * m.norm());
    let (a, b) = (eigvalsh(&m).unwrap(), eigvalsh(&t.to_dense()).unwrap());
    assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-10));
}

#[test]
fn householder_rejects_reducible_input() {
    let m = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]).map(|x| x.into()));
    assert!(block_householder(&m, 2).is_err());
}

#[test]
fn householder_of_gfe_matches_block_model() {
    let mut rng = RngStream::new(7, 0).rng();
    let p = EnsembleParams::hermite(FieldTag::Real, 2, 2, 0.0);
    let feats = |t: &BlockJacobi| -> Vec<f64> {
        let (a, b) = (&t.diag_blocks[0], &t.offdiag_blocks[0]);
        vec![a[(0, 0)].re, a[(0, 1)].re, a[(1, 1)].re, b[(0, 0)].re, b[(1, 1)].re]
    };
    let n = 10_000;
    let x: Vec<Vec<f64>> =
        (0..n).map(|_| feats(&block_householder(&sample_gfe(4, FieldTag::Real, &mut rng).unwrap(), 2).unwrap().0)).collect();
    let y: Vec<Vec<f64>> = (0..n).map(|_| feats(&sample_hermite(&p, &mut rng).unwrap())).collect();
    let t = gof_energy(&x, &y, 99, &RngStream::new(7, 1)).unwrap();
    assert!(t.p_value > 0.01, "{t:?}");
}

#[test]
fn unbiased_spectra_match_classical_ensembles() {
    let mut rng = RngStream::new(8, 0).rng();
    let n = 10_000;
    let p = EnsembleParams::hermite(FieldTag::Complex, 3, 2, 0.0);
    let x: Vec<Vec<f64>> = (0..n).map(|_| eigvalsh(&sample_hermite(&p, &mut rng).unwrap().to_dense()).unwrap()).collect();
    let y: Vec<Vec<f64>> = (0..n).map(|_| eigvalsh(&sample_gfe(6, FieldTag::Complex, &mut rng).unwrap()).unwrap()).collect();
    let t = gof_energy(&x, &y, 99, &RngStream::new(8, 1)).unwrap();
    assert!(t.p_value > 0.01, "hermite {t:?}");

    let p = EnsembleParams::laguerre(FieldTag::Real, 2, 2, 0.0, 3.0);
    let x: Vec<Vec<f64>> = (0..n).map(|_| eigvalsh(&sample_laguerre(&p, &mut rng).unwrap().1).unwrap()).collect();
    let y: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let g = sample_ginibre(4, 6, FieldTag::Real, &mut rng);
            eigvalsh(&(&g * g.adjoint())).unwrap()
        })
        .collect();
    let t = gof_energy(&x, &y, 99, &RngStream::new(8, 2)).unwrap();
    assert!(t.p_value > 0.01, "laguerre {t:?}");
}

use hypiss_core::linalg::{self, Matrix, SymMatrix};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sym_strategy(n: usize) -> impl Strategy<Value = SymMatrix> {
    prop::collection::vec(-10.0f64..10.0, n * n).prop_map(move |v| SymMatrix::from_matrix(&Matrix::new(n, n, v).unwrap()))
}

fn mat_strategy(r: usize, c: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-10.0f64..10.0, r * c).prop_map(move |v| Matrix::new(r, c, v).unwrap())
}

proptest! {
    #[test]
    fn eigen_reconstruction_and_orthonormality(a in (1usize..7).prop_flat_map(sym_strategy)) {
        let eig = linalg::sym_eig(&a).unwrap();
        let n = a.dim();
        let v = &eig.vectors;
        let vt = v.transpose();
        let recon = &(v * &Matrix::from_diag(&eig.values)) * &vt;
        let scale = a.frobenius_norm().max(1.0);
        prop_assert!((&recon - &a.to_matrix()).max_abs() <= 1e-9 * scale);
        prop_assert!((&(&vt * v) - &Matrix::identity(n)).max_abs() <= 1e-9);
        prop_assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
        for (i, &l) in eig.values.iter().enumerate() {
            let col: Vec<f64> = (0..n).map(|r| v.get(r, i)).collect();
            let av = a.to_matrix().mul_vec(&col);
            for r in 0..n {
                prop_assert!((av[r] - l * col[r]).abs() <= 1e-10 * scale);
            }
        }
    }

    #[test]
    fn spectral_norm_is_transpose_invariant(a in (1usize..5, 1usize..5).prop_flat_map(|(r, c)| mat_strategy(r, c))) {
        let n1 = linalg::spectral_norm(&a).unwrap();
        let n2 = linalg::spectral_norm(&a.transpose()).unwrap();
        prop_assert!((n1 - n2).abs() <= 1e-12 * n1.max(1.0));
    }
}

#[test]
fn rayleigh_quotient_is_bracketed() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let n = rng.gen_range(1..7);
        let a = SymMatrix::from_matrix(&Matrix::from_fn(n, n, |_, _| rng.gen_range(-5.0..5.0)));
        let (lo, hi) = (linalg::min_eig(&a).unwrap(), linalg::max_eig(&a).unwrap());
        for _ in 0..100 {
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let xx: f64 = x.iter().map(|v| v * v).sum();
            if xx == 0.0 {
                continue;
            }
            let r = a.quad_form(&x) / xx;
            assert!(lo - 1e-12 <= r && r <= hi + 1e-12);
        }
    }
}

#[test]
fn random_reconstruction_4x4() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let a = SymMatrix::from_matrix(&Matrix::from_fn(4, 4, |_, _| rng.gen_range(-3.0..3.0)));
    let eig = linalg::sym_eig(&a).unwrap();
    let recon = &(&eig.vectors * &Matrix::from_diag(&eig.values)) * &eig.vectors.transpose();
    assert!((&recon - &a.to_matrix()).max_abs() < 1e-9);
}

#[test]
fn well_conditioned_solves_have_small_residual() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        // diagonally dominant, hence well conditioned
        let a = Matrix::from_fn(3, 3, |i, j| if i == j { 5.0 + rng.gen::<f64>() } else { rng.gen_range(-1.0..1.0) });
        let b: Vec<f64> = (0..3).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let x = linalg::solve_linear(&a, &b).unwrap();
        let r = a.mul_vec(&x);
        let res: f64 = r.iter().zip(&b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
        let bn: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(res <= 1e-10 * bn);
    }
}

#[test]
fn reference_closed_loop_norm() {
    let hcl = Matrix::from_rows(&[[0.25 - 0.24, 0.0], [-1.0 + 0.33, 0.25 - 0.08]]).unwrap();
    let s = linalg::spectral_norm(&hcl).unwrap();
    // singular values of a 2x2 from the closed-form eigenvalues of AᵀA
    let ata = &hcl.transpose() * &hcl;
    let (p, q, r) = (ata.get(0, 0), ata.get(0, 1), ata.get(1, 1));
    let top = 0.5 * (p + r) + (0.25 * (p - r) * (p - r) + q * q).sqrt();
    assert!((s - top.sqrt()).abs() < 1e-12);
    assert!((s - 0.691).abs() < 1e-3);
}

#[test]
fn decay_block_minimum_eigenvalue() {
    let g = SymMatrix::from_matrix(&Matrix::from_rows(&[[4.07, 0.195], [0.195, 36.3]]).unwrap());
    let d = SymMatrix::from_matrix(&Matrix::from_diag(&[6.25, 74.97]));
    let m = &d - &g;
    let (a, b, c) = (m.get(0, 0), m.get(0, 1), m.get(1, 1));
    let closed = 0.5 * (a + c) - (0.25 * (a - c) * (a - c) + b * b).sqrt();
    let lo = linalg::min_eig(&m).unwrap();
    assert!((lo - closed).abs() < 1e-12);
    assert!((lo - 2.17).abs() < 0.01);
}

use hypiss_core::control;
use hypiss_core::lmi::{self, AffineMatrixExpr, LmiProblem, MatExpr, Point, Sense, Shape};
use hypiss_core::{DiagMatrix, Matrix, SymMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_point(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-3.0..3.0)).collect()
}

fn mixed_problem() -> LmiProblem {
    let mut p = LmiProblem::new(1e-3).unwrap();
    let d = p.add_var("D", Shape::Diagonal(2)).unwrap();
    let w = p.add_var("W", Shape::Full { rows: 1, cols: 2 }).unwrap();
    let g = p.add_var("G", Shape::Symmetric(2)).unwrap();
    let x = p.add_var("x", Shape::Scalar).unwrap();
    let a = Matrix::from_rows(&[[1.0, 2.0], [-0.5, 0.3]]).unwrap();
    let e = AffineMatrixExpr::from_blocks(&[
        vec![Some(d.expr().lmul(&a).add(&g.expr())), Some(w.expr().transpose())],
        vec![None, Some(x.expr().scale(-2.0))],
    ])
    .unwrap();
    p.add_constraint("mixed", e, Sense::NegDef, true).unwrap();
    p.add_constraint("g", AffineMatrixExpr::symmetric_part(&g.expr()), Sense::PosDef, false).unwrap();
    p
}

#[test]
fn evaluation_is_affine() {
    let p = mixed_problem();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let (a, b) = (random_point(&mut rng, p.num_entries()), random_point(&mut rng, p.num_entries()));
        let s: f64 = rng.gen();
        let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| s * x + (1.0 - s) * y).collect();
        for c in p.constraints() {
            let fa = c.expr.evaluate(&Point::from_values(&a)).unwrap();
            let fb = c.expr.evaluate(&Point::from_values(&b)).unwrap();
            let fm = c.expr.evaluate(&Point::from_values(&mix)).unwrap();
            let lin = fa.scale(s).add_scaled(&fb, 1.0 - s);
            assert!((&fm - &lin).frobenius_norm() <= 1e-12 * (1.0 + lin.frobenius_norm()));
        }
    }
}

#[test]
fn margin_sense_duality() {
    let p = mixed_problem();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..100 {
        let pt = Point::from_values(&random_point(&mut rng, p.num_entries()));
        for c in p.constraints() {
            let m1 = lmi::margin(&c.expr, Sense::NegDef, 0.0, &pt).unwrap();
            let m2 = lmi::margin(&c.expr.neg(), Sense::PosDef, 0.0, &pt).unwrap();
            assert_eq!(m1, m2);
        }
    }
}

#[test]
fn standard_form_matches_direct_evaluation() {
    let p = mixed_problem();
    let form = lmi::vectorize(&p);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let x = random_point(&mut rng, p.num_entries());
        let pt = Point::from_values(&x);
        for (c, b) in p.constraints().iter().zip(&form.blocks) {
            let direct = c.expr.evaluate(&pt).unwrap();
            let eps = p.constraint_epsilon(c);
            let dim = direct.dim();
            let expected = match c.sense {
                Sense::NegDef => direct.scale(-1.0),
                Sense::PosDef => direct,
            }
            .add_scaled(&SymMatrix::identity(dim), -eps);
            assert!((&b.evaluate(&x) - &expected).frobenius_norm() < 1e-12);
        }
    }
}

#[test]
fn entry_counts() {
    let mut p = LmiProblem::new(0.0).unwrap();
    let d = p.add_var("d", Shape::Diagonal(2)).unwrap();
    p.add_constraint("d", AffineMatrixExpr::symmetric_part(&d.expr()), Sense::PosDef, true).unwrap();
    let f = lmi::vectorize(&p);
    assert_eq!(f.num_entries, 2);
    assert_eq!(f.blocks[0].coeffs.len(), 2);
    p.add_var("s", Shape::Symmetric(2)).unwrap();
    assert_eq!(p.num_entries(), 5);
}

#[test]
fn active_zero_constraint_has_zero_margin() {
    let e = AffineMatrixExpr::constant(SymMatrix::zeros(3));
    let m = lmi::margin(&e, Sense::NegDef, 0.0, &Point::empty(0)).unwrap();
    assert_eq!(m, 0.0);
}

#[test]
fn decay_block_at_reference_values() {
    let plant = control::reference_plant();
    let (problem, vars) = control::build_synthesis_lmis(&plant, 1.0, 0.5, 1e-6).unwrap();
    let mut pt = Point::empty(problem.num_entries());
    pt.set_diag(&vars.q, &DiagMatrix::new(vec![12.5, 82.0]).unwrap());
    pt.set_sym(&vars.gamma_hat, &SymMatrix::new(2, vec![4.07, 0.195, 0.195, 36.3]).unwrap());
    let decay = &problem.constraints()[2];
    assert_eq!(decay.label, "decay");
    let m = decay.expr.evaluate(&pt).unwrap();
    let expected = [[12.5 * (0.5 - 1.0) + 4.07, 0.195], [0.195, 82.0 * (0.5 - 2f64.sqrt()) + 36.3]];
    for i in 0..2 {
        for j in 0..2 {
            assert!((m.get(i, j) - expected[i][j]).abs() < 1e-12);
        }
    }
    assert!((m.get(0, 0) + 2.18).abs() < 0.01 && (m.get(1, 1) + 38.67).abs() < 0.01);
    let margin = lmi::margin(&decay.expr, Sense::NegDef, 0.0, &pt).unwrap();
    assert!((margin - 2.18).abs() < 0.01);
}

#[test]
fn mat_expr_term_builds_scaled_identity() {
    let mut p = LmiProblem::new(0.0).unwrap();
    let c = p.add_var("c", Shape::Scalar).unwrap();
    let e = MatExpr::term(c.offset(), Matrix::identity(3));
    let mut pt = Point::empty(1);
    pt.set_scalar(&c, 2.5);
    assert_eq!(e.evaluate(&pt).unwrap(), Matrix::identity(3).scale(2.5));
}

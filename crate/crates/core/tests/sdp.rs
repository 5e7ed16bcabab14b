use hypiss_core::control;
use hypiss_core::lmi::{AffineMatrixExpr, LmiProblem, MatExpr, Sense, Shape};
use hypiss_core::sdp::{self, SolveOptions, Status};
use hypiss_core::{linalg, Matrix, SymMatrix};
use proptest::prelude::*;

fn scalar_bound(p: &mut LmiProblem, entry: usize, lower: f64) {
    let e = AffineMatrixExpr::new(SymMatrix::new(1, vec![-lower]).unwrap(), vec![(entry, SymMatrix::identity(1))]).unwrap();
    p.add_constraint("lower", e, Sense::PosDef, false).unwrap();
}

#[test]
fn smallest_common_upper_bound() {
    // minimise c subject to diag(q1, q2) ⪯ cI, q1 ≥ 1, q2 ≥ 1
    let mut p = LmiProblem::new(1e-6).unwrap();
    let q = p.add_var("q", Shape::Diagonal(2)).unwrap();
    let c = p.add_var("c", Shape::Scalar).unwrap();
    let cap = q.expr().sub(&MatExpr::term(c.offset(), Matrix::identity(2)));
    p.add_constraint("cap", AffineMatrixExpr::symmetric_part(&cap), Sense::NegDef, false).unwrap();
    scalar_bound(&mut p, q.offset(), 1.0);
    scalar_bound(&mut p, q.offset() + 1, 1.0);
    p.set_objective(vec![(c.offset(), 1.0)]).unwrap();
    let sol = sdp::minimize(&p, &SolveOptions::default()).unwrap();
    assert_eq!(sol.status, Status::Optimal);
    assert!((sol.objective.unwrap() - 1.0).abs() < 1e-5);
}

#[test]
fn psd_shift_matches_brute_force_scan() {
    let a = SymMatrix::new(2, vec![-3.0, 0.0, 0.0, 2.0]).unwrap();
    let scan = (0..=10_000)
        .map(|i| i as f64 * 1e-3)
        .find(|&l| linalg::min_eig(&a.add_scaled(&SymMatrix::identity(2), l)).unwrap() >= 0.0)
        .unwrap();
    let mut p = LmiProblem::new(0.0).unwrap();
    let l = p.add_var("lambda", Shape::Scalar).unwrap();
    let e = AffineMatrixExpr::new(a, vec![(l.offset(), SymMatrix::identity(2))]).unwrap();
    p.add_constraint("shift", e, Sense::PosDef, false).unwrap();
    p.set_objective(vec![(l.offset(), 1.0)]).unwrap();
    let sol = sdp::minimize(&p, &SolveOptions::default()).unwrap();
    assert!((sol.objective.unwrap() - scan).abs() <= 1e-3);
    assert!((sol.objective.unwrap() - 3.0).abs() <= 1e-6);
}

#[test]
fn best_margin_of_an_interval() {
    // x ⪰ 0 and 1 - x ⪰ 0: the best achievable margin is 1/2
    let mut p = LmiProblem::new(0.0).unwrap();
    let x = p.add_var("x", Shape::Scalar).unwrap();
    let e = AffineMatrixExpr::symmetric_part(&x.expr());
    p.add_constraint("lo", e.clone(), Sense::PosDef, false).unwrap();
    let hi = AffineMatrixExpr::new(SymMatrix::identity(1), vec![(x.offset(), SymMatrix::identity(1).scale(-1.0))]).unwrap();
    p.add_constraint("hi", hi, Sense::PosDef, false).unwrap();
    let sol = sdp::maximize_margin(&p, &SolveOptions::default()).unwrap();
    assert_eq!(sol.status, Status::Feasible);
    assert!((sol.phase1_slack + 0.5).abs() < 1e-6);
    assert!((sol.min_margin() - 0.5).abs() < 1e-6);
}

#[test]
fn tighter_slack_never_lowers_the_optimum() {
    let plant = control::reference_plant();
    let mut last = f64::NEG_INFINITY;
    for eps in [1e-7, 1e-5, 1e-3, 1e-2] {
        let (p, _) = control::build_synthesis_lmis(&plant, 1.0, 0.5, eps).unwrap();
        let sol = sdp::minimize(&p, &SolveOptions::default()).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        let obj = sol.objective.unwrap();
        assert!(obj >= last - 1e-6, "eps {eps}: {obj} < {last}");
        last = obj;
    }
}

#[test]
fn identical_inputs_give_identical_outputs() {
    let (p, _) = control::build_synthesis_lmis(&control::reference_plant(), 1.0, 0.5, 1e-6).unwrap();
    let a = sdp::minimize(&p, &SolveOptions::default()).unwrap();
    let b = sdp::minimize(&p, &SolveOptions::default()).unwrap();
    assert_eq!(format!("{a:?}"), format!("{b:?}"));
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.point.values().unwrap()), bits(&b.point.values().unwrap()));
}

fn random_problem(dim: usize, coeffs: Vec<Vec<f64>>, objective: Vec<f64>, eps: f64) -> LmiProblem {
    // I + Σ x_i A_i ⪰ εI is strictly feasible at x = 0; boxed by |x_i| ≤ 10
    let mut p = LmiProblem::new(eps).unwrap();
    let x = p.add_var("x", Shape::Diagonal(coeffs.len())).unwrap();
    let terms = coeffs
        .iter()
        .enumerate()
        .map(|(i, c)| (x.offset() + i, SymMatrix::from_matrix(&Matrix::new(dim, dim, c.clone()).unwrap())))
        .collect();
    p.add_constraint("lmi", AffineMatrixExpr::new(SymMatrix::identity(dim), terms).unwrap(), Sense::PosDef, true).unwrap();
    let boxed = AffineMatrixExpr::new(
        SymMatrix::scaled_identity(coeffs.len(), 10.0),
        (0..coeffs.len()).map(|i| {
            let mut unit = vec![0.0; coeffs.len() * coeffs.len()];
            unit[i * coeffs.len() + i] = 1.0;
            (x.offset() + i, SymMatrix::new(coeffs.len(), unit).unwrap())
        }).collect(),
    )
    .unwrap();
    p.add_constraint("box", boxed.clone(), Sense::PosDef, false).unwrap();
    let neg = AffineMatrixExpr::new(SymMatrix::scaled_identity(coeffs.len(), 10.0), boxed.neg().terms().to_vec()).unwrap();
    p.add_constraint("box2", neg, Sense::PosDef, false).unwrap();
    p.set_objective(objective.iter().enumerate().map(|(i, w)| (x.offset() + i, *w)).collect()).unwrap();
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn optimal_points_survive_independent_recheck(
        (dim, k) in (1usize..4, 1usize..4),
        seed in prop::collection::vec(-1.0f64..1.0, 64),
        eps in 0.0f64..0.1,
    ) {
        let coeffs: Vec<Vec<f64>> = (0..k).map(|i| seed[i * 9..i * 9 + dim * dim].to_vec()).collect();
        let objective = seed[40..40 + k].to_vec();
        let p = random_problem(dim, coeffs, objective, eps);
        let sol = sdp::minimize(&p, &SolveOptions::default()).unwrap();
        prop_assert!(sol.status.is_success(), "{:?}", sol.status);
        let margins = p.margins(&sol.point).unwrap();
        prop_assert!(margins.iter().all(|m| *m >= -1e-9), "{margins:?}");
    }
}

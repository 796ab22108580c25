use nalgebra::{DMatrix, DVector};
use polygrpd::field::{Chart, MatrixField, PolyFormField};
use polygrpd::folired::{self as fr, ActionData, ConditionStatus};
use polygrpd::lie::LieAlgebraData;
use polygrpd::polyspace::PolyForm;
use polygrpd::structures::{self as st, FoliationVariant, TrivialVariant};
use polygrpd::Error;

fn cube(n: usize) -> Chart {
    Chart::cube(n, -1.0, 1.0).unwrap()
}

fn pt(v: &[f64]) -> DVector<f64> {
    DVector::from_vec(v.to_vec())
}

fn ambient_gap(a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs().max()).fold(0.0, f64::max)
}

#[test]
fn distribution_of_so3_direct_sum_is_three_dimensional() {
    let s = st::linear_direct_sum(&LieAlgebraData::so3(), 2, cube(6)).unwrap();
    let x = pt(&[0.3, -0.2, 0.5, 0.1, 0.7, -0.4]);
    assert_eq!(fr::distribution_at(&s, &x).dim(), 3);
    let lf = fr::leaf_two_form(&s, &x).unwrap();
    assert_eq!(lf.basis.ncols(), 3);
    assert!(lf.is_nondegenerate());
}

#[test]
fn trivial_structure_has_zero_leaf() {
    let s = st::trivial(TrivialVariant::S3, cube(3), 2).unwrap();
    assert!(fr::distribution_at(&s, &pt(&[0.1, 0.2, 0.3])).is_zero());
}

#[test]
fn leaf_form_recovers_polysymplectic_form() {
    for (q, r) in [(1, 1), (2, 2), (3, 3), (2, 3)] {
        let n = q * (1 + r);
        let s = st::covelocity(q, r, cube(n)).unwrap();
        let x = DVector::from_fn(n, |i, _| 0.1 * i as f64 - 0.3);
        assert_eq!(fr::distribution_at(&s, &x).dim(), n);
        let lf = fr::leaf_two_form(&s, &x).unwrap();
        let w = st::covelocity_form(q, r);
        assert!(ambient_gap(&lf.ambient(), w.components()) < 1e-8);
    }
}

#[test]
fn leaf_form_is_independent_of_the_frame() {
    let cases = vec![
        st::linear_direct_sum(&LieAlgebraData::so3(), 2, cube(6)).unwrap(),
        st::linear_product(&LieAlgebraData::aff1(), 2, cube(4)).unwrap(),
        st::covelocity(2, 2, cube(6)).unwrap(),
    ];
    for (idx, s) in cases.iter().enumerate() {
        let x = DVector::from_fn(s.dim(), |i, _| 0.37 * ((i + 1) as f64).sin());
        let base = fr::leaf_two_form(s, &x).unwrap();
        for seed in 0..3 {
            let t = st::random_respan_matrix(s.frame_size(), 100 * idx as u64 + seed);
            let other = fr::leaf_two_form(&s.respan(&t).unwrap(), &x).unwrap();
            assert!(ambient_gap(&base.ambient(), &other.ambient()) < 1e-6, "{}", s.name());
        }
    }
}

#[test]
fn product_of_planes_recovers_each_block() {
    let p = st::product(&[st::covelocity(1, 1, cube(2)).unwrap(), st::covelocity(1, 1, cube(2)).unwrap()]).unwrap();
    let x = pt(&[0.1, 0.2, -0.3, 0.4]);
    let amb = fr::leaf_two_form(&p, &x).unwrap().ambient();
    let plane = st::covelocity_form(1, 1);
    assert!((amb[0].view((0, 0), (2, 2)) - plane.component(0)).abs().max() < 1e-10);
    // slots concatenate: the second factor's form lives in slot 1
    assert_eq!(amb.len(), 2);
    assert!((amb[1].view((2, 2), (2, 2)) - plane.component(0)).abs().max() < 1e-10);
    assert!(amb[0].view((2, 0), (2, 4)).abs().max() < 1e-10);
    assert!(amb[1].view((0, 0), (2, 4)).abs().max() < 1e-10);
}

#[test]
fn corrupted_anchor_makes_the_leaf_form_ill_posed() {
    let s = st::covelocity(1, 1, cube(2)).unwrap();
    let bad = s.with_corrupted_anchor(0, &pt(&[0.0, 1.0]));
    let err = fr::leaf_two_form(&bad, &pt(&[0.1, 0.1])).unwrap_err();
    assert!(matches!(err, Error::IllPosed { .. }));
}

#[test]
fn foliation_variants_share_the_distribution_but_not_the_frame() {
    let omega = PolyFormField::constant(&st::covelocity_form(1, 2));
    let chart = cube(4);
    let structs: Vec<_> = [FoliationVariant::S1, FoliationVariant::S2, FoliationVariant::S3]
        .into_iter()
        .map(|v| st::foliation_family(&omega, v, chart.clone()).unwrap())
        .collect();
    for x in chart.sample_points(20, 3, 0.0) {
        let d0 = fr::distribution_at(&structs[0], &x);
        assert_eq!(d0.dim(), 3);
        for s in &structs[1..] {
            assert!(fr::distribution_at(s, &x).approx_eq(&d0));
        }
        let ranks: Vec<_> = structs.iter().map(|s| s.fiber(&x).unwrap().rank()).collect();
        assert_eq!(ranks, vec![5, 4, 4]);
        assert!(!structs[1].fiber(&x).unwrap().as_subspace().approx_eq(&structs[2].fiber(&x).unwrap().as_subspace()));
    }
}

#[test]
fn translation_moment_map_reads_the_first_momenta() {
    let sc = fr::covelocity_translation(2).unwrap();
    // coordinates (q1, q2, p1_1, p1_2, p2_1, p2_2)
    let x = pt(&[0.3, -0.2, 0.7, 0.1, -0.4, 0.9]);
    assert_eq!(sc.moment.eval(&x).as_slice(), &[0.7, -0.4]);
    assert_eq!(sc.moment.eval(&pt(&[0.3, -0.2, 0.0, 0.0, 0.0, 0.0])).as_slice(), &[0.0, 0.0]);
    assert!(fr::moment_condition_defect(&sc.omega, &sc.action, &sc.moment, &x, 1e-5).unwrap() < 1e-12);
    assert!(fr::equivariance_defect(&sc.action, &sc.moment, &x, 1e-5).unwrap() < 1e-12);
}

#[test]
fn so3_moment_map_is_angular_momentum() {
    let sc = fr::so3_rotation(1).unwrap();
    let q = nalgebra::Vector3::new(0.3, -0.5, 0.8);
    let p = nalgebra::Vector3::new(-0.2, 0.6, 0.4);
    let x = pt(&[q[0], q[1], q[2], p[0], p[1], p[2]]);
    let l = q.cross(&p);
    assert!((sc.moment.eval(&x) - pt(l.as_slice())).abs().max() < 1e-14);
    assert!(fr::moment_condition_defect(&sc.omega, &sc.action, &sc.moment, &x, 1e-5).unwrap() < 1e-8);
    assert!(fr::equivariance_defect(&sc.action, &sc.moment, &x, 1e-5).unwrap() < 1e-8);
    assert!(sc.action.closure_defect(&x, 1e-5) < 1e-8);
}

#[test]
fn translation_and_rotation_reduce() {
    for sc in [fr::covelocity_translation(2).unwrap(), fr::covelocity_rotation(2).unwrap()] {
        let rep = fr::run_reduction(&sc, 100, 7).unwrap();
        assert!(rep.reducibility.reducible(), "{}: {:?}", sc.name, rep.reducibility);
        assert!(rep.mw_all, "{}", sc.name);
        assert!(rep.reduced_nondegenerate, "{}: {}", sc.name, rep.min_reduced_singular_value);
        assert!(rep.min_reduced_singular_value > 1e-6);
        assert_eq!(rep.reduced_dim, 3);
        assert!(rep.moment_defect < 1e-8);
    }
}

#[test]
fn violating_scenario_fails_the_reduction_condition() {
    let sc = fr::violating_scenario().unwrap();
    let rep = fr::run_reduction(&sc, 30, 1).unwrap();
    assert!(!rep.mw_all);
    assert!(!rep.reducibility.cond_b_polar_in_v);
    assert!(rep.reducibility.cond_a_rank_constant);
    assert!(rep.moment_defect < 1e-12);
}

#[test]
fn reducibility_implies_the_reduction_condition() {
    let scenarios = vec![
        fr::covelocity_translation(1).unwrap(),
        fr::covelocity_translation(3).unwrap(),
        fr::covelocity_rotation(1).unwrap(),
        fr::covelocity_rotation(2).unwrap(),
        fr::violating_scenario().unwrap(),
    ];
    for sc in scenarios {
        let rep = fr::run_reduction(&sc, 20, 11).unwrap();
        if rep.reducibility.reducible() {
            assert!(rep.mw_all, "{}", sc.name);
        }
    }
}

#[test]
fn trivial_action_is_vacuously_reducible() {
    let s = st::covelocity(2, 2, cube(6)).unwrap();
    let rep = fr::reducibility_check(&s, &ActionData::trivial(6), 20, 0).unwrap();
    assert!(rep.reducible());
    assert_eq!(rep.min_rank, 6);
}

#[test]
fn translation_reduces_to_the_smaller_covelocity_form() {
    let sc = fr::covelocity_translation(2).unwrap();
    let x = pt(&[0.3, -0.2, 0.0, 0.1, 0.0, 0.9]);
    let red = fr::reduced_form_at(&sc.omega, &sc.action, &sc.moment, &x, 1e-5).unwrap();
    // the quotient is spanned by (q2, p1_2, p2_2); compare B w B^T with the
    // covelocity form placed on those coordinates
    let idx = [1, 3, 5];
    let w = st::covelocity_form(1, 2);
    for i in 0..2 {
        let amb = &red.basis * red.form.component(i) * red.basis.transpose();
        let mut expect = DMatrix::zeros(6, 6);
        for a in 0..3 {
            for b in 0..3 {
                expect[(idx[a], idx[b])] = w.component(i)[(a, b)];
            }
        }
        assert!((amb - expect).abs().max() < 1e-10);
    }
}

#[test]
fn zero_action_reduced_form_is_the_restriction() {
    let form = st::covelocity_form(1, 2);
    let omega = PolyFormField::constant(&form);
    let action = ActionData::trivial(3);
    let j = fr::MomentMapData::new(2, 0, MatrixField::constant(DMatrix::zeros(0, 1)), DVector::zeros(0)).unwrap();
    let red = fr::reduced_form_at(&omega, &action, &j, &pt(&[0.1, 0.2, 0.3]), 1e-5).unwrap();
    assert_eq!(red.basis.ncols(), 3);
    for i in 0..2 {
        let amb = &red.basis * red.form.component(i) * red.basis.transpose();
        assert!((amb - form.component(i)).abs().max() < 1e-12);
    }
}

#[test]
fn off_level_point_is_rejected() {
    let sc = fr::covelocity_translation(2).unwrap();
    let err = fr::mw_condition(&sc.structure, &sc.action, &sc.moment, &pt(&[0.0, 0.0, 0.5, 0.0, 0.0, 0.0])).unwrap_err();
    assert!(matches!(err, Error::NotCleanValue(_)));
}

#[test]
fn morita_so3_order_two() {
    let rep = fr::morita_conditions_check(&LieAlgebraData::so3(), 2, 50, 5).unwrap();
    assert_eq!(rep.samples, 50);
    assert_eq!(rep.min_rank_left, 6);
    assert_eq!(rep.min_rank_right, 6);
    assert!(rep.orthogonality_residual < 1e-6, "{}", rep.orthogonality_residual);
    assert!(rep.bracket_residual < 1e-6, "{}", rep.bracket_residual);
    for i in [1, 3, 4] {
        assert_eq!(rep.condition(i).status, ConditionStatus::Verified, "{:?}", rep.condition(i));
    }
    for i in [2, 5] {
        assert_eq!(rep.condition(i).status, ConditionStatus::NotVerifiedGlobal);
        assert!(rep.condition(i).detail.contains("not verified — global"));
    }
}

#[test]
fn morita_order_one_is_the_classical_case() {
    let r1 = fr::morita_conditions_check(&LieAlgebraData::so3(), 1, 30, 2).unwrap();
    assert_eq!(r1.expected_rank, 3);
    assert!(r1.orthogonal_complements_match);
    assert!(r1.orthogonality_residual < 1e-6 && r1.bracket_residual < 1e-6);
    let r2 = fr::morita_conditions_check(&LieAlgebraData::so3(), 2, 30, 2).unwrap();
    assert_eq!(r1.condition(3).status, r2.condition(3).status);
}

#[test]
fn morita_abelian_brackets_vanish() {
    let rep = fr::morita_conditions_check(&LieAlgebraData::abelian(2), 2, 20, 9).unwrap();
    assert!(rep.bracket_residual < 1e-12);
    assert_eq!(rep.min_rank_left, 4);
}

#[test]
fn violating_form_is_the_hand_built_example() {
    let sc = fr::violating_scenario().unwrap();
    let w = sc.omega.eval(&pt(&[0.0, 0.0, 0.0])).unwrap();
    let expect = PolyForm::new(vec![
        DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
        DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, -1.0, 0.0]),
    ])
    .unwrap();
    for i in 0..2 {
        assert_eq!(w.component(i), expect.component(i));
    }
}

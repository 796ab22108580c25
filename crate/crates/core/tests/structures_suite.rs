use nalgebra::{DMatrix, DVector};
use polygrpd::field::{Chart, DerivMode, MatrixField, PolyFormField};
use polygrpd::lie::LieAlgebraData;
use polygrpd::polyspace::PolyForm;
use polygrpd::structures::{self as st, FoliationVariant, Section, TrivialVariant};
use polygrpd::Error;

fn cube(n: usize) -> Chart {
    Chart::cube(n, -1.0, 1.0).unwrap()
}

fn pt(v: &[f64]) -> DVector<f64> {
    DVector::from_vec(v.to_vec())
}

#[test]
fn symplectic_plane_bracket_of_dx_dy_is_zero() {
    let s = st::covelocity(1, 1, cube(2)).unwrap();
    // sigma_0 = row 0 of dx∧dy = dy, sigma_1 = -dx
    let x = pt(&[0.3, -0.4]);
    let f = s.frame_at(&x);
    assert_eq!(f.column(0).as_slice(), &[0.0, 1.0]);
    assert_eq!(f.column(1).as_slice(), &[-1.0, 0.0]);
    let b = st::bracket(&s, &Section::frame_element(2, 1), &Section::frame_element(2, 0), &x).unwrap();
    assert_eq!(b.rows().abs().max(), 0.0);
}

#[test]
fn trivial_bracket_of_constant_sections_is_zero() {
    let s = st::trivial(TrivialVariant::S1, cube(2), 2).unwrap();
    let x = pt(&[0.1, 0.2]);
    let eta = Section::constant(&pt(&[1.0, -2.0, 0.5, 3.0]));
    let gamma = Section::constant(&pt(&[0.2, 0.0, 1.0, -1.0]));
    assert_eq!(st::bracket(&s, &eta, &gamma, &x).unwrap().rows().abs().max(), 0.0);
    assert_eq!(st::structure_functions(&s, &x).unwrap().max_abs(), 0.0);
}

#[test]
fn so3_diagonal_sections_bracket_to_the_lie_bracket() {
    let g = LieAlgebraData::so3();
    let s = st::linear_direct_sum(&g, 2, cube(6)).unwrap();
    let u = pt(&[0.3, -1.0, 0.4]);
    let v = pt(&[0.5, 0.7, -0.2]);
    let w = u.cross(&v);
    let x = pt(&[0.1, -0.2, 0.3, 0.4, 0.0, -0.5]);
    for mode in [DerivMode::Analytic, DerivMode::Numeric] {
        let s = s.clone().with_deriv_mode(mode);
        let b = st::bracket(&s, &Section::constant(&u), &Section::constant(&v), &x).unwrap();
        for slot in 0..2 {
            let got = b.slot(slot).rows(3 * slot, 3).into_owned();
            assert!((got - &w).abs().max() < 1e-9, "{mode:?}");
        }
    }
}

#[test]
fn linear_admissible_bracket_is_the_pairing_with_the_lie_bracket() {
    for g in [LieAlgebraData::so3(), LieAlgebraData::aff1()] {
        let d = g.dim();
        let r = 3;
        let s = st::linear_direct_sum(&g, r, cube(r * d)).unwrap();
        let lin = |u: DVector<f64>| {
            st::AdmissibleFunction::from_fn(r, move |z| {
                DVector::from_fn(r, |i, _| (0..d).map(|a| z[i * d + a] * u[a]).sum())
            })
        };
        let u = DVector::from_fn(d, |a, _| 0.3 + a as f64);
        let v = DVector::from_fn(d, |a, _| 1.0 - 0.7 * a as f64);
        let uv = g.bracket(&u, &v);
        let pts = s.chart().sample_points(10, 4, 0.01);
        for z in &pts {
            let got = st::admissible_bracket(&s, &lin(u.clone()), &lin(v.clone()), z).unwrap();
            let back = st::admissible_bracket(&s, &lin(v.clone()), &lin(u.clone()), z).unwrap();
            let expect = DVector::from_fn(r, |i, _| (0..d).map(|a| z[i * d + a] * uv[a]).sum());
            assert!((&got - &expect).abs().max() < 1e-8);
            assert!((&got + &back).abs().max() < 1e-8);
            let diag = st::admissible_bracket(&s, &lin(u.clone()), &lin(u.clone()), z).unwrap();
            assert!(diag.abs().max() < 1e-8);
        }
    }
}

#[test]
fn covelocity_canonical_relations() {
    // coordinates (q, p1, p2)
    let s = st::covelocity(1, 2, cube(3)).unwrap();
    let q = st::AdmissibleFunction::new(MatrixField::affine(
        DMatrix::zeros(2, 1),
        vec![DMatrix::from_element(2, 1, 1.0), DMatrix::zeros(2, 1), DMatrix::zeros(2, 1)],
    ));
    let p = st::AdmissibleFunction::from_fn(2, |x| pt(&[x[1], x[2]]));
    for x in s.chart().sample_points(10, 9, 0.01) {
        let pq = st::admissible_bracket(&s, &p, &q, &x).unwrap();
        let qp = st::admissible_bracket(&s, &q, &p, &x).unwrap();
        assert!((pq - pt(&[1.0, 1.0])).abs().max() < 1e-9);
        assert!((qp + pt(&[1.0, 1.0])).abs().max() < 1e-9);
    }
    // a non-admissible function is rejected
    let bad = st::AdmissibleFunction::from_fn(2, |x| pt(&[x[1], x[1]]));
    assert!(matches!(
        st::admissible_bracket(&s, &bad, &q, &pt(&[0.0, 0.1, 0.2])),
        Err(Error::NotAdmissible { .. })
    ));
}

fn s_dependent_covelocity() -> PolyFormField {
    // on (q, p1, p2, s): omega_i = c_i(s) dq∧dp^i
    let base = st::covelocity_form(1, 2);
    let comps = (0..2)
        .map(|i| {
            let w = base.component(i).clone();
            let w4 = DMatrix::from_fn(3, 3, |a, b| w[(a, b)]);
            let wd = w4.clone();
            let c = move |s: f64| if i == 0 { 1.0 + 0.3 * s * s } else { 2.0 + s.sin() };
            let dc = move |s: f64| if i == 0 { 0.6 * s } else { s.cos() };
            MatrixField::new(3, 3, move |x| &w4 * c(x[3])).with_partials(move |x| {
                let mut d = vec![DMatrix::zeros(3, 3); 4];
                d[3] = &wd * dc(x[3]);
                d
            })
        })
        .collect();
    PolyFormField::new(comps).unwrap()
}

#[test]
fn every_constructor_passes_the_axioms() {
    let g = LieAlgebraData::so3();
    let a = LieAlgebraData::aff1();
    let omega3 = PolyForm::new(vec![
        DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
        DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, -1.0, 0.0]),
    ])
    .unwrap();
    let plane = st::covelocity(1, 1, cube(2)).unwrap();
    let zetas = vec![
        MatrixField::new(2, 1, |x| DMatrix::from_column_slice(2, 1, &[1.0, x[0]]))
            .with_partials(|_| vec![DMatrix::from_column_slice(2, 1, &[0.0, 1.0]), DMatrix::zeros(2, 1)]),
        MatrixField::constant(DMatrix::from_column_slice(2, 1, &[0.0, 1.0])),
    ];
    let structures = vec![
        st::covelocity(1, 1, cube(2)).unwrap(),
        st::covelocity(1, 2, cube(3)).unwrap(),
        st::covelocity(1, 3, cube(4)).unwrap(),
        st::covelocity(2, 1, cube(4)).unwrap(),
        st::constant_polysymplectic("r3-pair", &omega3, cube(3)).unwrap(),
        st::trivial(TrivialVariant::S1, cube(2), 2).unwrap(),
        st::trivial_s2(cube(2), zetas).unwrap(),
        st::trivial(TrivialVariant::S3, cube(2), 2).unwrap(),
        st::product(&[plane.clone(), plane.clone()]).unwrap(),
        st::product(&[plane.clone(), st::trivial(TrivialVariant::S1, cube(1), 1).unwrap()]).unwrap(),
        st::constant(1, &st::covelocity_form(1, 1), cube(3)).unwrap(),
        st::linear_direct_sum(&g, 2, cube(6)).unwrap(),
        st::linear_product(&g, 2, cube(6)).unwrap(),
        st::linear_direct_sum(&a, 2, cube(4)).unwrap(),
        st::linear_product(&a, 2, cube(4)).unwrap(),
        st::foliation_family(&s_dependent_covelocity(), FoliationVariant::S1, cube(4)).unwrap(),
    ];
    for s in &structures {
        let rep = st::check_axioms(s, 20, 11).unwrap();
        assert!(rep.all_passed(), "{}: {:?}", s.name(), rep);
    }
}

#[test]
fn s4_has_trivial_polar() {
    // {X : alpha(X) = 0 for all alpha} is zero, so S4 satisfies (ii).
    let s = st::trivial(TrivialVariant::S4, cube(2), 2).unwrap();
    let rep = st::check_axioms(&s, 10, 1).unwrap();
    assert!(rep.all_passed(), "{rep:?}");
    assert_eq!(rep.cond_ii.worst_residual, 0.0);
}

#[test]
fn corrupted_anchor_fails_condition_i() {
    let s = st::covelocity(1, 1, cube(2)).unwrap();
    let bad = s.with_corrupted_anchor(0, &pt(&[1.0, 0.0]));
    let rep = st::check_axioms(&bad, 10, 1).unwrap();
    assert!(!rep.cond_i.passed);
    assert!(rep.cond_i.worst_residual > 0.5);
}

#[test]
fn dropping_a_frame_element_of_s3_breaks_condition_ii() {
    let s = st::trivial(TrivialVariant::S3, cube(2), 1).unwrap();
    let rep = st::check_axioms(&s.without_frame_element(1), 10, 1).unwrap();
    assert!(!rep.cond_ii.passed);
    assert!(rep.cond_i.passed && rep.cond_iii_closure.passed && rep.cond_iii_jacobi.passed);
}

#[test]
fn analytic_and_numeric_derivatives_agree() {
    let g = LieAlgebraData::so3();
    for s in [
        st::linear_direct_sum(&g, 2, cube(6)).unwrap(),
        st::foliation_family(&s_dependent_covelocity(), FoliationVariant::S1, cube(4)).unwrap(),
        st::product(&[st::covelocity(1, 1, cube(2)).unwrap(), st::linear_product(&g, 1, cube(3)).unwrap()]).unwrap(),
    ] {
        let num = s.clone().with_deriv_mode(DerivMode::Numeric);
        for x in s.chart().sample_points(10, 2, 0.01) {
            let a = st::structure_functions_unchecked(&s, &x).unwrap();
            let b = st::structure_functions_unchecked(&num, &x).unwrap();
            let k = a.frame_size();
            for c in 0..k {
                for p in 0..k {
                    for q in 0..k {
                        assert!((a.get(c, p, q) - b.get(c, p, q)).abs() < 1e-6, "{}", s.name());
                    }
                }
            }
        }
    }
}

#[test]
fn product_of_linear_factors_matches_linear_product() {
    let g = LieAlgebraData::so3();
    let one = st::linear_direct_sum(&g, 1, cube(3)).unwrap();
    let prod = st::product(&[one.clone(), one]).unwrap();
    let lin = st::linear_product(&g, 2, cube(6)).unwrap();
    for x in lin.chart().sample_points(10, 5, 0.0) {
        assert!(prod.fiber(&x).unwrap().as_subspace().approx_eq(&lin.fiber(&x).unwrap().as_subspace()));
        assert!((prod.anchor_at(&x) - lin.anchor_at(&x)).abs().max() < 1e-14);
    }
}

#[test]
fn product_with_trivial_factor_has_zero_anchor_block() {
    let plane = st::covelocity(1, 1, cube(2)).unwrap();
    let triv = st::trivial(TrivialVariant::S1, cube(2), 1).unwrap();
    let p = st::product(&[plane, triv]).unwrap();
    let a = p.anchor_at(&pt(&[0.1, 0.2, 0.3, 0.4]));
    assert_eq!(a.view((0, 2), (4, 2)).abs().max(), 0.0);
    assert_eq!(a.view((2, 0), (2, 2)).abs().max(), 0.0);
}

#[test]
fn constant_degenerate_factors() {
    let w = st::covelocity_form(1, 1);
    let c0 = st::constant(0, &w, cube(2)).unwrap();
    let ps = st::covelocity(1, 1, cube(2)).unwrap();
    let x = pt(&[0.2, 0.1]);
    assert_eq!(c0.frame_at(&x), ps.frame_at(&x));
    assert_eq!(c0.anchor_at(&x), ps.anchor_at(&x));
    let empty = PolyForm::new(vec![DMatrix::zeros(0, 0); 2]).unwrap();
    let cm = st::constant(2, &empty, cube(2)).unwrap();
    let s1 = st::trivial(TrivialVariant::S1, cube(2), 2).unwrap();
    assert_eq!(cm.frame_at(&x), s1.frame_at(&x));
}

#[test]
fn abelian_linear_structure_has_zero_anchor() {
    let s = st::linear_direct_sum(&LieAlgebraData::abelian(2), 2, cube(4)).unwrap();
    for x in s.chart().sample_points(5, 1, 0.0) {
        assert_eq!(s.anchor_at(&x).abs().max(), 0.0);
    }
}

#[test]
fn foliation_variants_differ_in_frame_size() {
    let omega = PolyFormField::constant(&st::covelocity_form(1, 2));
    let sizes: Vec<usize> = [FoliationVariant::S1, FoliationVariant::S2, FoliationVariant::S3]
        .iter()
        .map(|&v| {
            let s = st::foliation_family(&omega, v, cube(4)).unwrap();
            assert!(st::check_axioms(&s, 10, 3).unwrap().all_passed());
            s.frame_size()
        })
        .collect();
    assert_eq!(sizes, vec![5, 4, 4]);
    // r = 1 collapses the variants
    let one = PolyFormField::constant(&st::covelocity_form(1, 1));
    let x = pt(&[0.1, 0.2, 0.3]);
    let f1 = st::foliation_family(&one, FoliationVariant::S1, cube(3)).unwrap().frame_at(&x);
    for v in [FoliationVariant::S2, FoliationVariant::S3] {
        assert_eq!(st::foliation_family(&one, v, cube(3)).unwrap().frame_at(&x), f1);
    }
}

#[test]
fn s_dependent_family_closes_only_for_s1() {
    let omega = s_dependent_covelocity();
    let s2 = st::foliation_family(&omega, FoliationVariant::S2, cube(4)).unwrap();
    let rep = st::check_axioms(&s2, 10, 3).unwrap();
    assert!(!rep.cond_iii_closure.passed);
}

#[test]
fn leibniz_failure_witness() {
    let chart = Chart::new(vec![(0.5, 1.5), (-1.0, 1.0), (0.5, 1.5), (-1.0, 1.0)]).unwrap();
    let s = st::leibniz_example(chart).unwrap();
    assert!(st::check_axioms(&s, 10, 1).unwrap().all_passed());
    let w = st::non_derivation_witness(&s, &pt(&[0.8, 0.1, 1.2, -0.3])).unwrap();
    assert!(w.h_residual < 1e-8 && w.fg_residual < 1e-8);
    assert!(w.f_residual > 0.1 && w.g_residual > 0.1);
    // d(fg) = (dx, du) = -sigma_y - sigma_v / u, so P(d(fg)) = -d/dy - d/dv / u
    let u = 1.2;
    assert!((&w.bracket_of_product - pt(&[-1.0, -1.0 / u])).abs().max() < 1e-8);
    assert!((&w.bracket_into_product + &w.bracket_of_product).abs().max() < 1e-8);
    assert!(w.factors_rejected);
    assert!(w.defect.is_finite());
}

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use polygrpd::field::Chart;
use polygrpd::lie::LieAlgebraData;
use polygrpd::linalg;
use polygrpd::polyspace::{CotupleSubspace, PolyForm, Subspace};
use polygrpd::structures::{self as st, PolyPoissonStructure, TrivialVariant};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

pub fn random_skew(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let a = random_matrix(rng, n, n);
    &a - a.transpose()
}

/// Random `L` of random dimension.
pub fn random_subspace(rng: &mut ChaCha8Rng, n: usize) -> Subspace {
    let k = rng.random_range(0..=n);
    Subspace::span(n, &random_matrix(rng, n, k))
}

/// A poly-form together with a subspace. Kinds: generic form with random
/// `L`; covelocity form pulled back by a random linear map with the pulled
/// back fibre (poly-Lagrangian); a symplectic form with a Darboux
/// Lagrangian; a generic form with `L` built as an omega-orthogonal.
pub fn random_form_and_subspace(seed: u64, max_n: usize, max_r: usize) -> (PolyForm, Subspace) {
    let mut g = rng(seed);
    loop {
        let kind = g.random_range(0..4);
        let r = g.random_range(1..=max_r);
        match kind {
            1 => {
                let q = g.random_range(1..=(max_n / (1 + r)).max(1));
                let n = q * (1 + r);
                if n > max_n {
                    continue;
                }
                let m = random_matrix(&mut g, n, n);
                if linalg::rank(&m) < n {
                    continue;
                }
                let minv = m.clone().try_inverse().unwrap();
                let w = st::covelocity_form(q, r).pullback(&m);
                let fibre = DMatrix::from_fn(n, q * r, |i, j| f64::from(u8::from(i == q + j)));
                return (w, Subspace::span(n, &(minv * fibre)));
            }
            2 => {
                let m = g.random_range(1..=max_n / 2);
                let n = 2 * m;
                let w = PolyForm::new(vec![random_skew(&mut g, n)]).unwrap();
                let Ok(b) = polygrpd::polyspace::darboux_basis(w.component(0)) else {
                    continue;
                };
                return (w, Subspace::span(n, &b.columns(0, m).into_owned()));
            }
            _ => {
                let n = g.random_range(2..=max_n);
                let w = PolyForm::new((0..r).map(|_| random_skew(&mut g, n)).collect()).unwrap();
                if !w.is_nondegenerate() {
                    continue;
                }
                let l = random_subspace(&mut g, n);
                let l = if kind == 3 { polygrpd::polyspace::omega_orthogonal(&w, &l) } else { l };
                return (w, l);
            }
        }
    }
}

fn structure_pool() -> Vec<PolyPoissonStructure> {
    let cube = |n| Chart::cube(n, -1.0, 1.0).unwrap();
    let so3 = LieAlgebraData::so3();
    let aff = LieAlgebraData::aff1();
    let plane = st::covelocity(1, 1, cube(2)).unwrap();
    vec![
        plane.clone(),
        st::covelocity(1, 2, cube(3)).unwrap(),
        st::covelocity(2, 1, cube(4)).unwrap(),
        st::trivial(TrivialVariant::S1, cube(2), 2).unwrap(),
        st::trivial(TrivialVariant::S3, cube(3), 2).unwrap(),
        st::linear_direct_sum(&so3, 2, cube(6)).unwrap(),
        st::linear_product(&so3, 2, cube(6)).unwrap(),
        st::linear_direct_sum(&aff, 2, cube(4)).unwrap(),
        st::linear_product(&aff, 3, cube(6)).unwrap(),
        st::product(&[plane, st::trivial(TrivialVariant::S1, cube(1), 1).unwrap()]).unwrap(),
    ]
}

fn independent_columns(f: &DMatrix<f64>) -> Vec<usize> {
    let mut keep: Vec<usize> = Vec::new();
    for c in 0..f.ncols() {
        let mut cols = keep.clone();
        cols.push(c);
        if linalg::rank(&f.select_columns(&cols)) == cols.len() {
            keep = cols;
        }
    }
    keep
}

/// Pointwise `(S, P, L)` drawn from the library structures at random
/// points, and from random poly-symplectic forms. `L` is random, or
/// contains `P(S)`, or is spanned by coordinate vectors.
pub fn coisotropic_draws(count: usize, seed: u64) -> Vec<(CotupleSubspace, DMatrix<f64>, Subspace)> {
    let pool = structure_pool();
    let mut g = rng(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let (s, p) = if g.random_range(0..4) == 0 {
            let n = g.random_range(2..=5);
            let r = g.random_range(1..=3);
            let w = PolyForm::new((0..r).map(|_| random_skew(&mut g, n)).collect()).unwrap();
            if !w.is_nondegenerate() {
                continue;
            }
            let flat: Vec<DVector<f64>> = (0..n)
                .map(|a| w.sharp(&DVector::from_fn(n, |j, _| f64::from(u8::from(j == a)))).flat())
                .collect();
            let f = linalg::columns_to_matrix(r * n, &flat);
            let keep = independent_columns(&f);
            let s = CotupleSubspace::from_flat_columns(r, n, f.select_columns(&keep)).unwrap();
            let p = DMatrix::identity(n, n).select_columns(&keep);
            (s, p)
        } else {
            let st = &pool[g.random_range(0..pool.len())];
            let x = st.chart().sample_points(1, g.random(), 0.0).remove(0);
            let f = st.frame_at(&x);
            let keep = independent_columns(&f);
            let s = CotupleSubspace::from_flat_columns(st.order(), st.dim(), f.select_columns(&keep)).unwrap();
            (s, st.anchor_at(&x).select_columns(&keep))
        };
        let n = s.dim();
        let l = match g.random_range(0..3) {
            0 => random_subspace(&mut g, n),
            1 => {
                let k = g.random_range(0..n);
                let extra = random_matrix(&mut g, n, k);
                Subspace::span(n, &linalg::hstack(&p, &extra))
            }
            _ => {
                let coords: Vec<DVector<f64>> = (0..n)
                    .filter(|_| g.random_bool(0.5))
                    .map(|a| DVector::from_fn(n, |j, _| f64::from(u8::from(j == a))))
                    .collect();
                Subspace::from_vectors(n, &coords)
            }
        };
        out.push((s, p, l));
    }
    out
}

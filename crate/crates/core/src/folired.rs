//! Leaves, group actions, moment maps and reduction, checked pointwise.
//!
//! Quotients are never built as manifolds: a quotient `A / B` at a point is
//! represented by an orthonormal basis of the complement of `B` inside `A`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{Chart, DerivMode, MatrixField, PolyFormField};
use crate::lie::LieAlgebraData;
use crate::linalg;
use crate::polyspace::{self, CotupleSubspace, PolyForm, Subspace};
use crate::structures::{self as st, AdmissibleFunction, PolyPoissonStructure};

/// Consistency tolerance for the leaf form system.
pub const LEAF_TOL: f64 = 1e-8;
/// Level-set Newton tolerance and iteration cap.
pub const NEWTON_TOL: f64 = 1e-10;
pub const NEWTON_MAX_ITER: usize = 50;
/// `|J(x) - zeta|` accepted as "on the level set".
pub const LEVEL_TOL: f64 = 1e-8;

/// `D_x = P(S_x)`.
pub fn distribution_at(s: &PolyPoissonStructure, x: &DVector<f64>) -> Subspace {
    Subspace::span(s.dim(), &s.anchor_at(x))
}

/// The leaf form at a point, expressed on an orthonormal basis of `D`.
#[derive(Clone, Debug)]
pub struct LeafForm {
    /// `n x k`, orthonormal columns spanning `D`.
    pub basis: DMatrix<f64>,
    pub form: PolyForm,
    /// Worst residual of the defining system and of skew-symmetry.
    pub residual: f64,
}

impl LeafForm {
    /// `B omega_i B^T`, independent of the basis chosen for `D`.
    pub fn ambient(&self) -> Vec<DMatrix<f64>> {
        self.form
            .components()
            .iter()
            .map(|w| &self.basis * w * self.basis.transpose())
            .collect()
    }

    pub fn is_nondegenerate(&self) -> bool {
        self.form.dim() == 0 || self.form.is_nondegenerate()
    }
}

/// Solves `omega_O(P(eta), .) = iota^* eta` on `D` for all frame elements.
pub fn leaf_two_form(s: &PolyPoissonStructure, x: &DVector<f64>) -> Result<LeafForm> {
    let n = s.dim();
    let r = s.order();
    let a = s.anchor_at(x);
    let f = s.frame_at(x);
    let b = linalg::orth(&a);
    let w = b.transpose() * &a; // k x K, coordinates of P(sigma_a)
    let wt = w.transpose();
    let scale = linalg::max_abs(&f).max(1.0);
    let mut comps = Vec::with_capacity(r);
    let mut residual = 0.0_f64;
    for i in 0..r {
        // row a of sigma_rhs: iota^* sigma_a^i
        let slot = f.rows(i * n, n);
        let rhs = (b.transpose() * slot).transpose();
        let (om, res) = linalg::lstsq(&wt, &rhs);
        residual = residual.max(res).max(linalg::max_abs(&(&om + om.transpose())));
        comps.push(om);
    }
    if residual > LEAF_TOL * scale {
        return Err(Error::IllPosed { residual });
    }
    Ok(LeafForm {
        basis: b,
        form: PolyForm::new(comps)?,
        residual,
    })
}

/// An infinitesimal action: generators `u_M` as the columns of an `n x d`
/// field, optionally with the Lie algebra they represent.
#[derive(Clone, Debug)]
pub struct ActionData {
    pub generators: MatrixField,
    pub algebra: Option<LieAlgebraData>,
}

impl ActionData {
    pub fn new(generators: MatrixField, algebra: Option<LieAlgebraData>) -> Self {
        ActionData { generators, algebra }
    }

    pub fn trivial(n: usize) -> Self {
        ActionData::new(MatrixField::constant(DMatrix::zeros(n, 0)), None)
    }

    pub fn dim(&self) -> usize {
        self.generators.shape().1
    }

    pub fn at(&self, x: &DVector<f64>) -> DMatrix<f64> {
        self.generators.eval(x)
    }

    /// `V_x`, the span of the generators.
    pub fn vertical(&self, x: &DVector<f64>) -> Subspace {
        Subspace::span(x.len(), &self.at(x))
    }

    /// Worst distance of `[u_a, u_b](x)` from `V_x`, with Jacobians by central
    /// differences of step `h`.
    pub fn closure_defect(&self, x: &DVector<f64>, h: f64) -> f64 {
        let u = self.at(x);
        let d = self.generators.partials(x, h, DerivMode::Analytic);
        let v = self.vertical(x);
        let n = x.len();
        let jac = |a: usize| DMatrix::from_fn(n, n, |i, k| d[k][(i, a)]);
        let mut worst = 0.0_f64;
        for a in 0..self.dim() {
            for b in (a + 1)..self.dim() {
                let br = jac(b) * u.column(a) - jac(a) * u.column(b);
                worst = worst.max(linalg::max_abs_vec(&(&br - v.project(&br))));
            }
        }
        worst
    }
}

/// A moment map with values in `(g*)^r`, stored as an `(r d) x 1` field
/// (`J_{i,a}` at row `i d + a`), and a level.
#[derive(Clone, Debug)]
pub struct MomentMapData {
    pub order: usize,
    pub dim: usize,
    pub map: MatrixField,
    pub level: DVector<f64>,
}

impl MomentMapData {
    pub fn new(order: usize, dim: usize, map: MatrixField, level: DVector<f64>) -> Result<Self> {
        if map.shape() != (order * dim, 1) || level.len() != order * dim {
            return Err(Error::InvalidInput("moment map must be (r d) x 1 with a matching level".into()));
        }
        Ok(MomentMapData { order, dim, map, level })
    }

    pub fn with_level(mut self, level: DVector<f64>) -> Self {
        self.level = level;
        self
    }

    pub fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        self.map.eval(x).column(0).into_owned()
    }

    /// `dJ`, an `(r d) x n` matrix.
    pub fn differential(&self, x: &DVector<f64>, h: f64) -> DMatrix<f64> {
        let d = self.map.partials(x, h, DerivMode::Analytic);
        DMatrix::from_fn(self.order * self.dim, x.len(), |row, k| d[k][(row, 0)])
    }

    pub fn level_gap(&self, x: &DVector<f64>) -> f64 {
        linalg::max_abs_vec(&(self.eval(x) - &self.level))
    }
}

/// Worst `|i_{u_a} omega_i - dJ_{i,a}|` at `x`.
pub fn moment_condition_defect(
    omega: &PolyFormField,
    action: &ActionData,
    j: &MomentMapData,
    x: &DVector<f64>,
    h: f64,
) -> Result<f64> {
    let w = omega.eval(x)?;
    let u = action.at(x);
    let dj = j.differential(x, h);
    let mut worst = 0.0_f64;
    for i in 0..j.order {
        let wi = w.component(i);
        for a in 0..j.dim {
            let contraction = wi.transpose() * u.column(a);
            let target = dj.row(i * j.dim + a).transpose();
            worst = worst.max(linalg::max_abs_vec(&(contraction - target)));
        }
    }
    Ok(worst)
}

/// Worst `|dJ_i(u_b) + ad*_{e_b} J_i|` at `x`; needs the action's algebra.
pub fn equivariance_defect(action: &ActionData, j: &MomentMapData, x: &DVector<f64>, h: f64) -> Result<f64> {
    let g = action
        .algebra
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("equivariance needs the Lie algebra of the action".into()))?;
    let u = action.at(x);
    let dj = j.differential(x, h);
    let jv = j.eval(x);
    let d = j.dim;
    let mut worst = 0.0_f64;
    for i in 0..j.order {
        let ji = jv.rows(i * d, d).into_owned();
        for b in 0..d {
            let e = st::unit_vector(d, b);
            let lhs = dj.rows(i * d, d) * u.column(b) + g.coad(&e, &ji);
            worst = worst.max(linalg::max_abs_vec(&lhs));
        }
    }
    Ok(worst)
}

/// Cotangent lift of an action on `Q = R^q` to `⊕_r T*Q` with coordinates
/// `(q, p^1, ..., p^r)`: `u_M = (u_Q(q), -Du_Q(q)^T p^1, ..., -Du_Q(q)^T p^r)`,
/// and its moment map `J_{i,a} = p^i · u_a(q)` at level zero.
pub fn covelocity_moment_map(q_action: &ActionData, r: usize, h: f64) -> (ActionData, MomentMapData) {
    let (q, d) = q_action.generators.shape();
    let n = q * (1 + r);
    let gens = q_action.generators.clone();
    let gens_d = gens.clone();
    let lifted = MatrixField::new(n, d, move |x| {
        let qx = x.rows(0, q).into_owned();
        let u = gens.eval(&qx);
        let du = gens.partials(&qx, h, DerivMode::Analytic);
        let mut out = DMatrix::zeros(n, d);
        out.view_mut((0, 0), (q, d)).copy_from(&u);
        for i in 0..r {
            let p = x.rows(q * (1 + i), q);
            for a in 0..d {
                for k in 0..q {
                    let s: f64 = (0..q).map(|jj| du[k][(jj, a)] * p[jj]).sum();
                    out[(q * (1 + i) + k, a)] = -s;
                }
            }
        }
        out
    });
    let gens = q_action.generators.clone();
    let jmap = MatrixField::new(r * d, 1, move |x| {
        let u = gens.eval(&x.rows(0, q).into_owned());
        DMatrix::from_fn(r * d, 1, |row, _| {
            let (i, a) = (row / d, row % d);
            (0..q).map(|k| x[q * (1 + i) + k] * u[(k, a)]).sum()
        })
    })
    .with_partials(move |x| {
        let qx = x.rows(0, q).into_owned();
        let u = gens_d.eval(&qx);
        let du = gens_d.partials(&qx, h, DerivMode::Analytic);
        let mut out = vec![DMatrix::zeros(r * d, 1); n];
        for i in 0..r {
            for a in 0..d {
                let row = i * d + a;
                for k in 0..q {
                    out[k][(row, 0)] = (0..q).map(|jj| x[q * (1 + i) + jj] * du[k][(jj, a)]).sum();
                    out[q * (1 + i) + k][(row, 0)] = u[(k, a)];
                }
            }
        }
        out
    });
    let action = ActionData::new(lifted, q_action.algebra.clone());
    let moment = MomentMapData::new(r, d, jmap, DVector::zeros(r * d)).expect("shapes match");
    (action, moment)
}

/// `S_x ∩ ⊕_r Ann(V_x)`.
pub fn s_cap_ann(s: &PolyPoissonStructure, v: &Subspace, x: &DVector<f64>) -> Result<CotupleSubspace> {
    let f = s.frame_at(x);
    let coeffs = polyspace::frame_coefficients_in_ann(s.order(), &f, v);
    let elems = &f * coeffs;
    CotupleSubspace::from_flat_columns(s.order(), s.dim(), linalg::orth(&elems))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReducibilityReport {
    /// Rank of `S ∩ ⊕_r Ann(V)` is the same at every sample.
    pub cond_a_rank_constant: bool,
    /// Its polar lies in `V` at every sample.
    pub cond_b_polar_in_v: bool,
    pub min_rank: usize,
    pub max_rank: usize,
    pub worst_polar_defect: f64,
    pub samples: usize,
}

impl ReducibilityReport {
    pub fn reducible(&self) -> bool {
        self.cond_a_rank_constant && self.cond_b_polar_in_v
    }
}

/// Checks reducibility at the given points.
pub fn reducibility_at(s: &PolyPoissonStructure, action: &ActionData, points: &[DVector<f64>]) -> Result<ReducibilityReport> {
    let per: Vec<(usize, f64, bool)> = points
        .par_iter()
        .map(|x| {
            let v = action.vertical(x);
            let sc = s_cap_ann(s, &v, x)?;
            let pol = polyspace::polar(&sc);
            Ok((sc.rank(), v.containment_defect(&pol), v.contains(&pol)))
        })
        .collect::<Result<_>>()?;
    let min_rank = per.iter().map(|p| p.0).min().unwrap_or(0);
    let max_rank = per.iter().map(|p| p.0).max().unwrap_or(0);
    Ok(ReducibilityReport {
        cond_a_rank_constant: min_rank == max_rank,
        cond_b_polar_in_v: per.iter().all(|p| p.2),
        min_rank,
        max_rank,
        worst_polar_defect: per.iter().map(|p| p.1).fold(0.0, f64::max),
        samples: points.len(),
    })
}

/// Reducibility at `samples` uniform points of the chart box.
pub fn reducibility_check(s: &PolyPoissonStructure, action: &ActionData, samples: usize, seed: u64) -> Result<ReducibilityReport> {
    let points = s.chart().sample_points(samples, seed, s.fd_step());
    reducibility_at(s, action, &points)
}

/// Projected Newton iteration onto `J = zeta` from `x0` (minimum-norm
/// steps). Returns the point and the final gap.
pub fn project_to_level(j: &MomentMapData, x0: &DVector<f64>, h: f64) -> (DVector<f64>, f64) {
    let mut x = x0.clone();
    let mut gap = j.level_gap(&x);
    for _ in 0..NEWTON_MAX_ITER {
        if gap < NEWTON_TOL {
            break;
        }
        let res = j.eval(&x) - &j.level;
        let dj = j.differential(&x, h);
        let (step, _) = linalg::lstsq(&dj, &DMatrix::from_column_slice(res.len(), 1, res.as_slice()));
        x -= step.column(0);
        gap = j.level_gap(&x);
    }
    (x, gap)
}

/// Level-set points obtained by projecting chart samples.
pub fn level_points(chart: &Chart, j: &MomentMapData, count: usize, seed: u64, margin: f64) -> Vec<DVector<f64>> {
    let mut out = Vec::with_capacity(count);
    let mut attempt = 0;
    while out.len() < count && attempt < 20 * count.max(1) {
        let x0 = chart.sample_points(1, seed.wrapping_add(attempt as u64), margin).remove(0);
        attempt += 1;
        let (x, gap) = project_to_level(j, &x0, chart.fd_step());
        if gap < NEWTON_TOL && chart.check_point(&x, margin).is_ok() {
            out.push(x);
        }
    }
    out
}

/// Clean-value check at a level point: `|J(x) - zeta| < LEVEL_TOL` and the
/// rank of `dJ` is the same at nearby level points.
pub fn check_clean_value(j: &MomentMapData, x: &DVector<f64>, h: f64, seed: u64) -> Result<()> {
    let gap = j.level_gap(x);
    if gap > LEVEL_TOL {
        return Err(Error::NotCleanValue(format!("point is off the level set by {gap:.3e}")));
    }
    let r0 = linalg::rank(&j.differential(x, h));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..4 {
        let dx = DVector::from_fn(x.len(), |_, _| 1e-3 * rng.random_range(-1.0..1.0));
        let (y, g) = project_to_level(j, &(x + dx), h);
        if g > NEWTON_TOL {
            return Err(Error::NotCleanValue("nearby level points not reachable".into()));
        }
        let ry = linalg::rank(&j.differential(&y, h));
        if ry != r0 {
            return Err(Error::NotCleanValue(format!("rank of dJ jumps from {r0} to {ry}")));
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct MwOutcome {
    pub holds: bool,
    pub defect: f64,
    /// `dim (S ∩ ⊕ Ann V)° ∩ ker dJ`.
    pub lhs_dim: usize,
    /// `dim V ∩ ker dJ`.
    pub vzeta_dim: usize,
}

/// `(S ∩ ⊕_r Ann(V))° ∩ ker dJ ⊆ V ∩ ker dJ` at a level point.
pub fn mw_condition(
    s: &PolyPoissonStructure,
    action: &ActionData,
    j: &MomentMapData,
    x: &DVector<f64>,
) -> Result<MwOutcome> {
    let h = s.fd_step();
    check_clean_value(j, x, h, 0xc1ea)?;
    let v = action.vertical(x);
    let kj = Subspace::kernel_of(&j.differential(x, h));
    let lhs = polyspace::polar(&s_cap_ann(s, &v, x)?).intersection(&kj);
    let vz = v.intersection(&kj);
    Ok(MwOutcome {
        holds: vz.contains(&lhs),
        defect: vz.containment_defect(&lhs),
        lhs_dim: lhs.dim(),
        vzeta_dim: vz.dim(),
    })
}

/// The reduced form on `ker dJ / V_zeta`, on an orthonormal basis of the
/// complement of `V_zeta` in `ker dJ`.
#[derive(Clone, Debug)]
pub struct ReducedForm {
    pub basis: DMatrix<f64>,
    pub form: PolyForm,
    /// Smallest singular value of the stacked components.
    pub min_singular_value: f64,
}

pub fn reduced_form_at(
    omega: &PolyFormField,
    action: &ActionData,
    j: &MomentMapData,
    x: &DVector<f64>,
    h: f64,
) -> Result<ReducedForm> {
    let w = omega.eval(x)?;
    let kj = Subspace::kernel_of(&j.differential(x, h));
    let vz = action.vertical(x).intersection(&kj);
    let q = kj.complement_within(&vz);
    let basis = q.basis().clone();
    let form = w.pullback(&basis);
    let sv = if basis.ncols() == 0 {
        Vec::new()
    } else {
        linalg::singular_values(&form.stacked())
    };
    let kd = form.common_kernel().dim();
    if basis.ncols() > 0 && kd > 0 {
        return Err(Error::DegenerateReduction { kernel_dim: kd });
    }
    Ok(ReducedForm {
        basis,
        form,
        min_singular_value: sv.last().copied().unwrap_or(f64::INFINITY),
    })
}

// ------------------------------------------------------------------- scenarios

/// A named reduction scenario: a poly-symplectic structure with an action
/// and a moment map.
#[derive(Clone, Debug)]
pub struct ReductionScenario {
    pub name: String,
    pub omega: PolyFormField,
    pub structure: PolyPoissonStructure,
    pub action: ActionData,
    pub moment: MomentMapData,
}

fn q_field(q: usize, d: usize, f: impl Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static) -> MatrixField {
    MatrixField::new(q, d, f)
}

/// Translation along `q_1` on `Q = R^2`, lifted to `⊕_r T*R^2`.
pub fn covelocity_translation(r: usize) -> Result<ReductionScenario> {
    let gens = q_field(2, 1, |_| DMatrix::from_column_slice(2, 1, &[1.0, 0.0]))
        .with_partials(|_| vec![DMatrix::zeros(2, 1); 2]);
    covelocity_scenario("covelocity-translation", ActionData::new(gens, Some(LieAlgebraData::abelian(1))), r, Chart::cube(2 * (1 + r), -1.0, 1.0)?)
}

/// Rotations of `Q = R^2`, lifted to `⊕_r T*R^2`; the box keeps `q_1 > 0`
/// so the action is free.
pub fn covelocity_rotation(r: usize) -> Result<ReductionScenario> {
    let gens = q_field(2, 1, |q| DMatrix::from_column_slice(2, 1, &[-q[1], q[0]])).with_partials(|_| {
        vec![
            DMatrix::from_column_slice(2, 1, &[0.0, 1.0]),
            DMatrix::from_column_slice(2, 1, &[-1.0, 0.0]),
        ]
    });
    let mut bx = vec![(0.5, 1.5), (-1.0, 1.0)];
    bx.extend(std::iter::repeat_n((-1.0, 1.0), 2 * r));
    covelocity_scenario("covelocity-rotation", ActionData::new(gens, Some(LieAlgebraData::abelian(1))), r, Chart::new(bx)?)
}

/// `so(3)` rotating `Q = R^3`, lifted to `⊕_r T*R^3`.
pub fn so3_rotation(r: usize) -> Result<ReductionScenario> {
    let gens = q_field(3, 3, |q| {
        let mut m = DMatrix::zeros(3, 3);
        for a in 0..3 {
            let mut e = [0.0; 3];
            e[a] = 1.0;
            m.set_column(a, &(linalg::hat3(&e) * q));
        }
        m
    })
    .with_partials(|_| {
        (0..3)
            .map(|k| {
                let mut m = DMatrix::zeros(3, 3);
                for a in 0..3 {
                    let mut e = [0.0; 3];
                    e[a] = 1.0;
                    m.set_column(a, &linalg::hat3(&e).column(k));
                }
                m
            })
            .collect()
    });
    covelocity_scenario("so3-rotation", ActionData::new(gens, Some(LieAlgebraData::so3())), r, Chart::cube(3 * (1 + r), -1.0, 1.0)?)
}

fn covelocity_scenario(name: &str, q_action: ActionData, r: usize, chart: Chart) -> Result<ReductionScenario> {
    let q = q_action.generators.shape().0;
    let omega = PolyFormField::constant(&st::covelocity_form(q, r));
    let structure = st::covelocity(q, r, chart.clone())?;
    let (action, moment) = covelocity_moment_map(&q_action, r, chart.fd_step());
    Ok(ReductionScenario {
        name: name.to_string(),
        omega,
        structure,
        action,
        moment,
    })
}

/// `(R^3, (dx1∧dx2, dx2∧dx3))` with the action of `d/dx1` and `J = (x2, 0)`.
/// Condition (ii) of the moment map holds while the reduction condition
/// fails at every level point.
pub fn violating_scenario() -> Result<ReductionScenario> {
    let mut w1 = DMatrix::zeros(3, 3);
    w1[(0, 1)] = 1.0;
    w1[(1, 0)] = -1.0;
    let mut w2 = DMatrix::zeros(3, 3);
    w2[(1, 2)] = 1.0;
    w2[(2, 1)] = -1.0;
    let form = PolyForm::new(vec![w1, w2])?;
    let chart = Chart::cube(3, -1.0, 1.0)?;
    let structure = st::constant_polysymplectic("r3-pair", &form, chart)?;
    let gens = MatrixField::constant(DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]));
    let jmap = MatrixField::affine(
        DMatrix::zeros(2, 1),
        vec![DMatrix::zeros(2, 1), DMatrix::from_column_slice(2, 1, &[1.0, 0.0]), DMatrix::zeros(2, 1)],
    );
    Ok(ReductionScenario {
        name: "violating".into(),
        omega: PolyFormField::constant(&form),
        structure,
        action: ActionData::new(gens, Some(LieAlgebraData::abelian(1))),
        moment: MomentMapData::new(2, 1, jmap, DVector::zeros(2))?,
    })
}

#[derive(Clone, Debug)]
pub struct ReductionReport {
    pub name: String,
    pub reducibility: ReducibilityReport,
    pub level_points: usize,
    pub mw_all: bool,
    pub worst_mw_defect: f64,
    pub reduced_nondegenerate: bool,
    pub min_reduced_singular_value: f64,
    pub reduced_dim: usize,
    pub moment_defect: f64,
}

/// Reducibility at chart samples, then the reduction condition and the
/// reduced form at projected level points.
pub fn run_reduction(sc: &ReductionScenario, samples: usize, seed: u64) -> Result<ReductionReport> {
    let chart = sc.structure.chart();
    let h = chart.fd_step();
    let reducibility = reducibility_check(&sc.structure, &sc.action, samples, seed)?;
    let pts = level_points(chart, &sc.moment, samples, seed ^ 0x1e7e1, 0.05);
    if pts.is_empty() {
        return Err(Error::NotCleanValue("no level points found in the chart box".into()));
    }
    let mut mw_all = true;
    let mut worst_mw: f64 = 0.0;
    let mut nondeg = true;
    let mut min_sv = f64::INFINITY;
    let mut reduced_dim = 0;
    let mut moment_defect: f64 = 0.0;
    for x in &pts {
        moment_defect = moment_defect.max(moment_condition_defect(&sc.omega, &sc.action, &sc.moment, x, h)?);
        let mw = mw_condition(&sc.structure, &sc.action, &sc.moment, x)?;
        mw_all &= mw.holds;
        worst_mw = worst_mw.max(mw.defect);
        if mw.holds {
            match reduced_form_at(&sc.omega, &sc.action, &sc.moment, x, h) {
                Ok(rf) => {
                    min_sv = min_sv.min(rf.min_singular_value);
                    reduced_dim = rf.basis.ncols();
                }
                Err(Error::DegenerateReduction { .. }) => nondeg = false,
                Err(e) => return Err(e),
            }
        }
    }
    Ok(ReductionReport {
        name: sc.name.clone(),
        reducibility,
        level_points: pts.len(),
        mw_all,
        worst_mw_defect: worst_mw,
        reduced_nondegenerate: nondeg && min_sv > 1e-6,
        min_reduced_singular_value: min_sv,
        reduced_dim,
        moment_defect,
    })
}

// ---------------------------------------------------------------------- Morita

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConditionStatus {
    Verified,
    Failed,
    NotVerifiedGlobal,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MoritaCondition {
    pub index: usize,
    pub status: ConditionStatus,
    pub worst_residual: f64,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MoritaReport {
    pub algebra: String,
    pub order: usize,
    pub samples: usize,
    pub expected_rank: usize,
    pub min_rank_left: usize,
    pub min_rank_right: usize,
    pub orthogonality_residual: f64,
    /// `(ker dJ_L)^omega = ker dJ_R` at every sample.
    pub orthogonal_complements_match: bool,
    pub bracket_residual: f64,
    pub poisson_map_residual: f64,
    pub conditions: Vec<MoritaCondition>,
}

impl MoritaReport {
    pub fn condition(&self, index: usize) -> &MoritaCondition {
        &self.conditions[index - 1]
    }
}

pub const MORITA_TOL: f64 = 1e-6;

/// Left and right multiplication on `G` in exponential coordinates `theta`:
/// `u^L = dexp_theta^{-1} e_a`, `u^R = dexp_{-theta}^{-1} e_a`.
pub fn group_multiplication_actions(g: &LieAlgebraData) -> (ActionData, ActionData) {
    let d = g.dim();
    let make = |sign: f64| {
        let g1 = g.clone();
        let field = MatrixField::new(d, d, move |theta| {
            let t = theta * sign;
            g1.dexp(&t).try_inverse().expect("dexp is invertible near the identity")
        });
        ActionData::new(field, Some(g.clone()))
    };
    (make(1.0), make(-1.0))
}

/// The five Morita conditions for `⊕_r T*G` with the moment maps of the
/// lifted left and right multiplications, at `samples` points with
/// `|theta_a| <= 0.5`, `|p| <= 1`.
pub fn morita_conditions_check(g: &LieAlgebraData, r: usize, samples: usize, seed: u64) -> Result<MoritaReport> {
    let d = g.dim();
    let mut bx = vec![(-0.5, 0.5); d];
    bx.extend(std::iter::repeat_n((-1.0, 1.0), r * d));
    let chart = Chart::new(bx)?;
    let h = chart.fd_step();
    let omega = st::covelocity_form(d, r);
    let m = st::constant_polysymplectic("cotangent-group", &omega, chart.clone())?;
    let target = st::linear_direct_sum(g, r, Chart::cube(r * d, -1e3, 1e3)?)?;
    let (left_q, right_q) = group_multiplication_actions(g);
    let (_, jl) = covelocity_moment_map(&left_q, r, h);
    let (_, jr) = covelocity_moment_map(&right_q, r, h);
    let diag = |u: DVector<f64>, jm: MomentMapData| {
        AdmissibleFunction::from_fn(r, move |x| {
            let v = jm.eval(x);
            DVector::from_fn(r, |i, _| (0..d).map(|a| v[i * d + a] * u[a]).sum())
        })
    };
    let points = chart.sample_points(samples, seed, 10.0 * h);
    struct Per {
        rank_l: usize,
        rank_r: usize,
        orth: f64,
        complements: bool,
        bracket: f64,
        map_plus: f64,
        map_minus: f64,
    }
    let per: Vec<Per> = points
        .par_iter()
        .enumerate()
        .map(|(idx, x)| {
            let dl = jl.differential(x, h);
            let dr = jr.differential(x, h);
            let kl = Subspace::kernel_of(&dl);
            let kr = Subspace::kernel_of(&dr);
            let orth = omega
                .components()
                .iter()
                .map(|w| linalg::max_abs(&(kl.basis().transpose() * w * kr.basis())))
                .fold(0.0, f64::max);
            let complements = polyspace::omega_orthogonal(&omega, &kl).approx_eq(&kr);
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(idx as u64));
            let mut bracket: f64 = 0.0;
            let mut map_plus: f64 = 0.0;
            let mut map_minus: f64 = 0.0;
            for _ in 0..3 {
                let u = DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
                let v = DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
                let hr = diag(u.clone(), jr.clone());
                let gl = diag(v.clone(), jl.clone());
                let b = st::admissible_bracket(&m, &hr, &gl, x)?;
                bracket = bracket.max(linalg::max_abs_vec(&b));
                // J_L pushes P(d J_L^* h_u) to ±P_target(dh_u).
                let hl = diag(u.clone(), jl.clone());
                let (lambda, _) = st::admissibility(&m, &hl, x);
                let pushed = &dl * m.anchor_of(x, &lambda);
                let xi = jl.eval(x);
                let expect = target.anchor_of(&xi, &u);
                map_plus = map_plus.max(linalg::max_abs_vec(&(&pushed - &expect)));
                map_minus = map_minus.max(linalg::max_abs_vec(&(&pushed + &expect)));
            }
            Ok(Per {
                rank_l: linalg::rank(&dl),
                rank_r: linalg::rank(&dr),
                orth,
                complements,
                bracket,
                map_plus,
                map_minus,
            })
        })
        .collect::<Result<_>>()?;
    let expected_rank = r * d;
    let min_rank_left = per.iter().map(|p| p.rank_l).min().unwrap_or(0);
    let min_rank_right = per.iter().map(|p| p.rank_r).min().unwrap_or(0);
    let orthogonality_residual = per.iter().map(|p| p.orth).fold(0.0, f64::max);
    let orthogonal_complements_match = per.iter().all(|p| p.complements);
    let bracket_residual = per.iter().map(|p| p.bracket).fold(0.0, f64::max);
    let plus = per.iter().map(|p| p.map_plus).fold(0.0, f64::max);
    let minus = per.iter().map(|p| p.map_minus).fold(0.0, f64::max);
    let (poisson_map_residual, sign) = if plus <= minus { (plus, "+") } else { (minus, "-") };
    let status = |ok: bool| if ok { ConditionStatus::Verified } else { ConditionStatus::Failed };
    let ranks_ok = min_rank_left == expected_rank && min_rank_right == expected_rank;
    let conditions = vec![
        MoritaCondition {
            index: 1,
            status: status(ranks_ok && poisson_map_residual < MORITA_TOL),
            worst_residual: poisson_map_residual,
            detail: format!(
                "rank dJ_L = {min_rank_left}, rank dJ_R = {min_rank_right} (expected {expected_rank}); \
                 J_L is poly-Poisson onto the direct-sum structure with sign {sign}"
            ),
        },
        MoritaCondition {
            index: 2,
            status: ConditionStatus::NotVerifiedGlobal,
            worst_residual: f64::NAN,
            detail: "connected and simply connected level sets: not verified — global".into(),
        },
        MoritaCondition {
            index: 3,
            status: status(orthogonality_residual < MORITA_TOL),
            worst_residual: orthogonality_residual,
            detail: format!("max |omega_i(ker dJ_L, ker dJ_R)|; complements match: {orthogonal_complements_match}"),
        },
        MoritaCondition {
            index: 4,
            status: status(bracket_residual < MORITA_TOL),
            worst_residual: bracket_residual,
            detail: "max |{J_R^* h, J_L^* g}| over diagonal linear h, g".into(),
        },
        MoritaCondition {
            index: 5,
            status: ConditionStatus::NotVerifiedGlobal,
            worst_residual: f64::NAN,
            detail: "completeness: not verified — global".into(),
        },
    ];
    Ok(MoritaReport {
        algebra: g.name().to_string(),
        order: r,
        samples: points.len(),
        expected_rank,
        min_rank_left,
        min_rank_right,
        orthogonality_residual,
        orthogonal_complements_match,
        bracket_residual,
        poisson_map_residual,
        conditions,
    })
}

//! Linear relations between poly-symplectic vector spaces and the axioms of
//! relational poly-symplectic groupoids on finite linear models.
//!
//! A model is `(G, L, I)` with `L ⊂ G^3` and `I` the inversion. The
//! multiplication relation `M = I ∘ L : G ⊕ G -> G` is `{((a, b), ab)}`, so
//! `L = {(a, b, c) : abc = e}`. The axioms are checked as equalities of
//! composed relations:
//!
//! - A.1 `L` is invariant under `(a, b, c) -> (b, c, a)`.
//! - A.2 `I ∘ I = id`.
//! - A.3 `I ∘ M = M ∘ swap ∘ (I ⊕ I)`.
//! - A.4 `M ∘ (M ⊕ id) = M ∘ (id ⊕ M)`.
//! - A.5 with `L_1 = M ∘ {(a, I a)}` (a relation from the point to `G`):
//!   `M ∘ (L_1 ⊕ L_1) = L_1`.
//! - A.6 with `L_2 = M ∘ (id ⊕ L_1)`: `L_2 = M ∘ (L_1 ⊕ id)`,
//!   `L_2 ∘ L_2 = L_2`, `L_2 ∘ M = M` and `M ∘ (L_2 ⊕ L_2) = M`.
//!
//! The figure behind A.1, A.3, A.5 and A.6 is not available as equations;
//! the forms above are reconstructions. Alternatives that agree on
//! groupoid models: A.1 as `L = (I × I × I)(L)` after rotation, and A.6 with
//! `L_3 = L_2 ∘ M` in place of `M`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg;
use crate::polyspace::{self, PolyForm, Subspace};

/// A finite-dimensional poly-symplectic vector space.
#[derive(Clone, Debug, PartialEq)]
pub struct PolySymplecticSpace {
    form: PolyForm,
}

impl PolySymplecticSpace {
    /// `DegeneratePolyForm` if the components share a kernel.
    pub fn new(form: PolyForm) -> Result<Self> {
        let k = form.common_kernel().dim();
        if form.dim() > 0 && k > 0 {
            return Err(Error::DegeneratePolyForm { kernel_dim: k });
        }
        Ok(PolySymplecticSpace { form })
    }

    /// For models whose form is degenerate on purpose.
    pub fn new_unchecked(form: PolyForm) -> Self {
        PolySymplecticSpace { form }
    }

    /// The zero-dimensional space of order `r`.
    pub fn point(r: usize) -> Self {
        PolySymplecticSpace { form: PolyForm::zero(r, 0) }
    }

    pub fn form(&self) -> &PolyForm {
        &self.form
    }

    pub fn dim(&self) -> usize {
        self.form.dim()
    }

    pub fn order(&self) -> usize {
        self.form.order()
    }

    pub fn direct_sum(&self, other: &PolySymplecticSpace) -> Result<Self> {
        Ok(PolySymplecticSpace {
            form: self.form.direct_sum(&other.form)?,
        })
    }

    pub fn negated(&self) -> Self {
        PolySymplecticSpace { form: self.form.negated() }
    }
}

/// A linear subspace of `source ⊕ target`.
#[derive(Clone, Debug)]
pub struct LinearRelation {
    source: PolySymplecticSpace,
    target: PolySymplecticSpace,
    graph: Subspace,
}

impl LinearRelation {
    pub fn new(source: PolySymplecticSpace, target: PolySymplecticSpace, graph: Subspace) -> Result<Self> {
        if graph.ambient_dim() != source.dim() + target.dim() {
            return Err(Error::SpaceMismatch(format!(
                "graph lives in R^{}, expected R^{}",
                graph.ambient_dim(),
                source.dim() + target.dim()
            )));
        }
        Ok(LinearRelation { source, target, graph })
    }

    /// `{(x, f x)}`.
    pub fn graph_of(source: PolySymplecticSpace, target: PolySymplecticSpace, f: &DMatrix<f64>) -> Result<Self> {
        if f.shape() != (target.dim(), source.dim()) {
            return Err(Error::SpaceMismatch("map shape does not match the spaces".into()));
        }
        let n = source.dim();
        let basis = linalg::vstack(&[DMatrix::identity(n, n), f.clone()]);
        let g = Subspace::span(n + target.dim(), &basis);
        LinearRelation::new(source, target, g)
    }

    pub fn identity(space: PolySymplecticSpace) -> Self {
        let n = space.dim();
        LinearRelation::graph_of(space.clone(), space, &DMatrix::identity(n, n)).expect("square")
    }

    pub fn source(&self) -> &PolySymplecticSpace {
        &self.source
    }

    pub fn target(&self) -> &PolySymplecticSpace {
        &self.target
    }

    pub fn graph(&self) -> &Subspace {
        &self.graph
    }

    pub fn dim(&self) -> usize {
        self.graph.dim()
    }

    /// `{(y, x) : (x, y) ∈ R}`.
    pub fn transpose(&self) -> Self {
        let (n1, n2) = (self.source.dim(), self.target.dim());
        let b = self.graph.basis();
        let swapped = linalg::vstack(&[b.rows(n1, n2).into_owned(), b.rows(0, n1).into_owned()]);
        LinearRelation {
            source: self.target.clone(),
            target: self.source.clone(),
            graph: Subspace::span(n1 + n2, &swapped),
        }
    }

    /// `R_1 ⊕ R_2 : A_1 ⊕ A_2 -> B_1 ⊕ B_2`.
    pub fn direct_sum(&self, other: &LinearRelation) -> Result<Self> {
        let (a1, b1) = (self.source.dim(), self.target.dim());
        let (a2, b2) = (other.source.dim(), other.target.dim());
        let g1 = self.graph.basis();
        let g2 = other.graph.basis();
        let (k1, k2) = (g1.ncols(), g2.ncols());
        let mut m = DMatrix::zeros(a1 + a2 + b1 + b2, k1 + k2);
        m.view_mut((0, 0), (a1, k1)).copy_from(&g1.rows(0, a1));
        m.view_mut((a1 + a2, 0), (b1, k1)).copy_from(&g1.rows(a1, b1));
        m.view_mut((a1, k1), (a2, k2)).copy_from(&g2.rows(0, a2));
        m.view_mut((a1 + a2 + b1, k1), (b2, k2)).copy_from(&g2.rows(a2, b2));
        LinearRelation::new(
            self.source.direct_sum(&other.source)?,
            self.target.direct_sum(&other.target)?,
            Subspace::span(a1 + a2 + b1 + b2, &m),
        )
    }

    /// The matrix of the relation if it is the graph of a linear map.
    pub fn as_linear_map(&self) -> Option<DMatrix<f64>> {
        let n = self.source.dim();
        let b = self.graph.basis();
        if b.ncols() != n {
            return None;
        }
        let x = b.rows(0, n).into_owned();
        if linalg::rank(&x) != n {
            return None;
        }
        let inv = x.try_inverse()?;
        Some(b.rows(n, self.target.dim()) * inv)
    }

    /// `dim(R + R') - dim(R ∩ R')`, zero exactly when the graphs agree.
    pub fn equality_defect(&self, other: &LinearRelation) -> usize {
        if self.graph.ambient_dim() != other.graph.ambient_dim() {
            return usize::MAX;
        }
        if self.graph.approx_eq(&other.graph) {
            return 0;
        }
        let s = self.graph.sum(&other.graph).dim();
        let i = self.graph.intersection(&other.graph).dim();
        (s - i).max(1)
    }
}

/// Result of `compose`: the relation and the dimension of the fiber-product
/// directions lost in the projection.
#[derive(Clone, Debug)]
pub struct Composition {
    pub relation: LinearRelation,
    pub defect: usize,
}

/// `R_2 ∘ R_1 = {(a, c) : (a, b) ∈ R_1, (b, c) ∈ R_2}`.
pub fn compose(r1: &LinearRelation, r2: &LinearRelation) -> Result<Composition> {
    let (na, nb, nc) = (r1.source.dim(), r1.target.dim(), r2.target.dim());
    if nb != r2.source.dim() || r1.target.order() != r2.source.order() {
        return Err(Error::SpaceMismatch(format!(
            "cannot compose a relation into R^{nb} with one out of R^{}",
            r2.source.dim()
        )));
    }
    let g1 = r1.graph.basis();
    let g2 = r2.graph.basis();
    let (k1, k2) = (g1.ncols(), g2.ncols());
    let meet = linalg::hstack(&g1.rows(na, nb).into_owned(), &(-g2.rows(0, nb).into_owned()));
    let ker = if nb == 0 {
        DMatrix::identity(k1 + k2, k1 + k2)
    } else {
        linalg::kernel(&meet)
    };
    let proj = linalg::vstack(&[
        g1.rows(0, na) * ker.rows(0, k1),
        g2.rows(nb, nc) * ker.rows(k1, k2),
    ]);
    let graph = Subspace::span(na + nc, &proj);
    let defect = ker.ncols() - graph.dim();
    Ok(Composition {
        relation: LinearRelation::new(r1.source.clone(), r2.target.clone(), graph)?,
        defect,
    })
}

/// `compose(r1, r2)` without the defect.
pub fn then(r1: &LinearRelation, r2: &LinearRelation) -> Result<LinearRelation> {
    compose(r1, r2).map(|c| c.relation)
}

/// Maximal isotropy of the graph in `(source, -omega) ⊕ (target, omega)`.
pub fn is_lagrangian_relation(r: &LinearRelation) -> bool {
    let form = r.source.form().negated().direct_sum(r.target.form()).expect("orders agree");
    polyspace::omega_orthogonal(&form, &r.graph).approx_eq(&r.graph)
}

/// Maximal isotropy of a subspace of a space.
pub fn is_lagrangian_in(space: &PolySymplecticSpace, l: &Subspace) -> bool {
    polyspace::omega_orthogonal(space.form(), l).approx_eq(l)
}

/// A finite linear model `(G, L, I)`.
#[derive(Clone, Debug)]
pub struct RelationalGroupoidData {
    pub name: String,
    pub space: PolySymplecticSpace,
    /// `L ⊂ G^3`.
    pub l: Subspace,
    pub inversion: LinearRelation,
}

impl RelationalGroupoidData {
    /// Builds `L = {(a, b, I(c)) : ((a, b), c) ∈ M}` from a multiplication
    /// relation and an inversion.
    pub fn from_multiplication(name: &str, multiplication: &LinearRelation, inversion: LinearRelation) -> Result<Self> {
        let space = inversion.source().clone();
        let n = space.dim();
        let l_rel = then(multiplication, &inversion)?;
        Ok(RelationalGroupoidData {
            name: name.to_string(),
            space,
            l: Subspace::span(3 * n, l_rel.graph().basis()),
            inversion,
        })
    }

    fn gg(&self) -> PolySymplecticSpace {
        self.space.direct_sum(&self.space).expect("same order")
    }

    /// `L` as a relation `G ⊕ G -> G`.
    pub fn l_relation(&self) -> LinearRelation {
        LinearRelation::new(self.gg(), self.space.clone(), self.l.clone()).expect("dimensions agree")
    }

    /// `M = I ∘ L`.
    pub fn multiplication(&self) -> Result<LinearRelation> {
        then(&self.l_relation(), &self.inversion)
    }

    /// `L_1 = M ∘ {(a, I a)}`, a relation from the point.
    pub fn unit_relation(&self) -> Result<LinearRelation> {
        let n = self.space.dim();
        let pt = PolySymplecticSpace::point(self.space.order());
        let antidiag = {
            let i = self
                .inversion
                .as_linear_map()
                .ok_or_else(|| Error::WrongStructure("inversion is not a linear map".into()))?;
            let b = linalg::vstack(&[DMatrix::identity(n, n), i]);
            LinearRelation::new(pt, self.gg(), Subspace::span(2 * n, &b))?
        };
        then(&antidiag, &self.multiplication()?)
    }

    /// Whether `I` pulls each `omega_i` back to `-omega_i`; the worst
    /// entry of `I^T omega_i I + omega_i`.
    pub fn inversion_defect(&self) -> Option<f64> {
        let i = self.inversion.as_linear_map()?;
        Some(
            self.space
                .form()
                .components()
                .iter()
                .map(|w| linalg::max_abs(&(i.transpose() * w * &i + w)))
                .fold(0.0, f64::max),
        )
    }

    /// Maximal isotropy of `L` in `G^3` with `omega ⊕ omega ⊕ omega`.
    pub fn l_is_lagrangian(&self) -> bool {
        let g3 = self.gg().direct_sum(&self.space).expect("same order");
        is_lagrangian_in(&g3, &self.l)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AxiomResult {
    pub name: &'static str,
    pub passed: bool,
    /// Largest equality defect among the relation equations of the axiom.
    pub defect_dim: usize,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RelationalReport {
    pub model: String,
    pub axioms: Vec<AxiomResult>,
    pub inversion_antisymplectic: bool,
    pub l_lagrangian: bool,
}

impl RelationalReport {
    pub fn axiom(&self, name: &str) -> Option<&AxiomResult> {
        self.axioms.iter().find(|a| a.name == name)
    }

    pub fn all_passed(&self) -> bool {
        self.axioms.iter().all(|a| a.passed)
    }
}

fn axiom(name: &'static str, detail: &str, defects: Vec<usize>) -> AxiomResult {
    let d = defects.into_iter().max().unwrap_or(0);
    AxiomResult {
        name,
        passed: d == 0,
        defect_dim: d,
        detail: detail.to_string(),
    }
}

/// Checks A.1 to A.6 with the equations listed in the module docs.
pub fn check_axioms(rg: &RelationalGroupoidData) -> Result<RelationalReport> {
    let n = rg.space.dim();
    let g = rg.space.clone();
    let gg = rg.gg();
    let id = LinearRelation::identity(g.clone());
    let inv = &rg.inversion;
    let m = rg.multiplication()?;
    let swap = {
        let mut p = DMatrix::zeros(2 * n, 2 * n);
        p.view_mut((0, n), (n, n)).fill_with_identity();
        p.view_mut((n, 0), (n, n)).fill_with_identity();
        LinearRelation::graph_of(gg.clone(), gg.clone(), &p)?
    };

    // A.1
    let rot = {
        let mut p = DMatrix::zeros(3 * n, 3 * n);
        for k in 0..3 {
            p.view_mut((k * n, ((k + 1) % 3) * n), (n, n)).fill_with_identity();
        }
        p
    };
    let rotated = rg.l.image(&rot);
    let a1 = axiom(
        "A.1",
        "L = rotation of L",
        vec![if rotated.approx_eq(&rg.l) {
            0
        } else {
            (rotated.sum(&rg.l).dim() - rotated.intersection(&rg.l).dim()).max(1)
        }],
    );

    // A.2
    let a2 = axiom("A.2", "I ∘ I = id", vec![then(inv, inv)?.equality_defect(&id)]);

    // A.3
    let ii = inv.direct_sum(inv)?;
    let lhs = then(&m, inv)?;
    let rhs = then(&then(&ii, &swap)?, &m)?;
    let a3 = axiom("A.3", "I ∘ M = M ∘ swap ∘ (I ⊕ I)", vec![lhs.equality_defect(&rhs)]);

    // A.4
    let m_id = m.direct_sum(&id)?;
    let id_m = id.direct_sum(&m)?;
    let left = then(&m_id, &m)?;
    let right = then(&id_m, &m)?;
    let a4 = axiom("A.4", "M ∘ (M ⊕ id) = M ∘ (id ⊕ M)", vec![left.equality_defect(&right)]);

    // A.5
    let l1 = rg.unit_relation()?;
    let l1l1 = l1.direct_sum(&l1)?;
    let ee = then(&l1l1, &m)?;
    let a5 = axiom("A.5", "M ∘ (L_1 ⊕ L_1) = L_1", vec![ee.equality_defect(&l1)]);

    // A.6
    let l2 = then(&id.direct_sum(&l1)?, &m)?;
    let l2_left = then(&l1.direct_sum(&id)?, &m)?;
    let l2l2 = then(&l2, &l2)?;
    let l2m = then(&m, &l2)?;
    let ml2 = then(&l2.direct_sum(&l2)?, &m)?;
    let a6 = axiom(
        "A.6",
        "L_2 = M ∘ (id ⊕ L_1) = M ∘ (L_1 ⊕ id), L_2 ∘ L_2 = L_2, L_2 ∘ M = M = M ∘ (L_2 ⊕ L_2)",
        vec![
            l2.equality_defect(&l2_left),
            l2l2.equality_defect(&l2),
            l2m.equality_defect(&m),
            ml2.equality_defect(&m),
        ],
    );

    Ok(RelationalReport {
        model: rg.name.clone(),
        axioms: vec![a1, a2, a3, a4, a5, a6],
        inversion_antisymplectic: rg.inversion_defect().is_some_and(|d| d < 1e-12),
        l_lagrangian: rg.l_is_lagrangian(),
    })
}

/// Pair groupoid `M × M` with form `omega ⊕ (-omega)` (arrows `(x, y)`
/// from `y` to `x`), multiplication `(x, y)(y, z) = (x, z)` and inversion
/// `(x, y) -> (y, x)`.
pub fn from_pair_groupoid(m: &PolySymplecticSpace) -> Result<RelationalGroupoidData> {
    let k = m.dim();
    let n = 2 * k;
    let g = m.direct_sum(&m.negated())?;
    let gg = g.direct_sum(&g)?;
    // coordinates of G ⊕ G ⊕ G: (x1, y1, x2, y2, x3, y3); free parameters x, y, z
    let mut basis = DMatrix::zeros(3 * n, 3 * k);
    let mut put = |row_block: usize, param: usize| {
        basis.view_mut((row_block * k, param * k), (k, k)).fill_with_identity();
    };
    put(0, 0); // x1 = x
    put(1, 1); // y1 = y
    put(2, 1); // x2 = y
    put(3, 2); // y2 = z
    put(4, 0); // x3 = x
    put(5, 2); // y3 = z
    let mult = LinearRelation::new(gg, g.clone(), Subspace::span(3 * n, &basis))?;
    let mut swap = DMatrix::zeros(n, n);
    swap.view_mut((0, k), (k, k)).fill_with_identity();
    swap.view_mut((k, 0), (k, k)).fill_with_identity();
    let inv = LinearRelation::graph_of(g.clone(), g, &swap)?;
    RelationalGroupoidData::from_multiplication("relational-pair", &mult, inv)
}

/// `⊕_r T*Q` over `Q = R^q` with fibrewise addition: coordinates
/// `(q, p^1, ..., p^r)`, multiplication `(q, a)(q, b) = (q, a + b)`,
/// inversion `(q, a) -> (q, -a)`.
pub fn from_bundle_groupoid(q: usize, r: usize) -> Result<RelationalGroupoidData> {
    let g = PolySymplecticSpace::new(crate::structures::covelocity_form(q, r))?;
    let n = q * (1 + r);
    let f = q * r;
    let gg = g.direct_sum(&g)?;
    // parameters: base q, fibre a, fibre b
    let mut basis = DMatrix::zeros(3 * n, q + 2 * f);
    for c in 0..3 {
        basis.view_mut((c * n, 0), (q, q)).fill_with_identity();
    }
    basis.view_mut((q, q), (f, f)).fill_with_identity();
    basis.view_mut((n + q, q + f), (f, f)).fill_with_identity();
    basis.view_mut((2 * n + q, q), (f, f)).fill_with_identity();
    basis.view_mut((2 * n + q, q + f), (f, f)).fill_with_identity();
    let mult = LinearRelation::new(gg, g.clone(), Subspace::span(3 * n, &basis))?;
    let mut neg = DMatrix::identity(n, n);
    for i in q..n {
        neg[(i, i)] = -1.0;
    }
    let inv = LinearRelation::graph_of(g.clone(), g, &neg)?;
    RelationalGroupoidData::from_multiplication("relational-bundle", &mult, inv)
}

/// A model with its inversion composed with a sign flip of coordinate 0.
pub fn corrupted_inversion(rg: &RelationalGroupoidData) -> Result<RelationalGroupoidData> {
    let i = rg
        .inversion
        .as_linear_map()
        .ok_or_else(|| Error::WrongStructure("inversion is not a linear map".into()))?;
    let mut d = DMatrix::identity(i.nrows(), i.nrows());
    d[(0, 0)] = -1.0;
    let bad = LinearRelation::graph_of(rg.space.clone(), rg.space.clone(), &(d * i))?;
    Ok(RelationalGroupoidData {
        name: "relational-corrupted".into(),
        space: rg.space.clone(),
        l: rg.l.clone(),
        inversion: bad,
    })
}

/// Random Lagrangian subspace of an order-1 space: `span{e_j + sum_k S_jk f_k}`
/// in a Darboux basis with `S` random symmetric.
pub fn random_lagrangian(space: &PolySymplecticSpace, seed: u64) -> Result<Subspace> {
    if space.order() != 1 {
        return Err(Error::InvalidInput("random Lagrangians are drawn for order 1 only".into()));
    }
    let n = space.dim();
    let m = n / 2;
    let basis = polyspace::darboux_basis(space.form().component(0))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = DMatrix::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
    s = (&s + s.transpose()) * 0.5;
    let e = basis.columns(0, m).into_owned();
    let f = basis.columns(m, m).into_owned();
    Ok(Subspace::span(n, &(e + f * s.transpose())))
}

/// The model with `L` replaced by a random Lagrangian of `G^3` (order 1).
pub fn with_random_l(rg: &RelationalGroupoidData, seed: u64) -> Result<RelationalGroupoidData> {
    let g3 = rg.gg().direct_sum(&rg.space)?;
    Ok(RelationalGroupoidData {
        name: format!("{}-random-l", rg.name),
        space: rg.space.clone(),
        l: random_lagrangian(&g3, seed)?,
        inversion: rg.inversion.clone(),
    })
}

/// The unit graph of the product of the cotangent groupoid `T*R` with the
/// pair groupoid of `R` carrying the zero form, order 2 with form
/// `(omega, 0)`: a relation from the base `R ⊕ R` (zero form) to the
/// groupoid. Built without the nondegeneracy check.
pub fn unit_graph_counterexample() -> LinearRelation {
    // groupoid coordinates (q, p, y, y'); base coordinates (q, y)
    let mut w = DMatrix::zeros(4, 4);
    w[(0, 1)] = 1.0;
    w[(1, 0)] = -1.0;
    let form = PolyForm::new(vec![w, DMatrix::zeros(4, 4)]).expect("skew");
    let g = PolySymplecticSpace::new_unchecked(form);
    let base = PolySymplecticSpace::new_unchecked(PolyForm::zero(2, 2));
    let eps = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0]);
    LinearRelation::graph_of(base, g, &eps).expect("shapes match")
}

/// Random linear map as a relation between spaces of the given order with
/// zero forms (for algebraic tests of composition).
pub fn random_graph(order: usize, n_in: usize, n_out: usize, seed: u64) -> LinearRelation {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = DMatrix::from_fn(n_out, n_in, |_, _| rng.random_range(-1.0..1.0));
    LinearRelation::graph_of(
        PolySymplecticSpace::new_unchecked(PolyForm::zero(order, n_in)),
        PolySymplecticSpace::new_unchecked(PolyForm::zero(order, n_out)),
        &f,
    )
    .expect("shapes match")
}

/// Whether `x` is related to `y`.
pub fn relates(r: &LinearRelation, x: &DVector<f64>, y: &DVector<f64>) -> bool {
    let v = DVector::from_iterator(x.len() + y.len(), x.iter().chain(y.iter()).copied());
    r.graph().contains_vector(&v)
}

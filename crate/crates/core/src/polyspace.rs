//! Pointwise multilinear algebra for poly-symplectic vector spaces.
//!
//! Everything here works on a single tangent space `V = R^n`. Covectors are
//! written in the dual coordinate basis, so `V*` is also represented by
//! `R^n`; an element of `⊕_r V*` is a [`CovectorTuple`] and is flattened
//! slot-major into `R^{r n}` (slot `i`, coordinate `j` lives at `i * n + j`).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, SUBSPACE_TOL};

/// Skew-symmetry correction above which construction logs a warning.
pub const SKEW_WARN_TOL: f64 = 1e-10;
/// Components must be skew within this tolerance before symmetrization.
pub const SKEW_TOL: f64 = 1e-12;

/// A linear subspace of `R^n`, stored as an orthonormal basis.
#[derive(Clone, Debug)]
pub struct Subspace {
    ambient_dim: usize,
    basis: DMatrix<f64>,
}

impl Subspace {
    /// Span of the columns of `vectors` (which need not be independent).
    pub fn span(ambient_dim: usize, vectors: &DMatrix<f64>) -> Self {
        assert_eq!(vectors.nrows(), ambient_dim, "vectors live in the wrong space");
        Subspace {
            ambient_dim,
            basis: linalg::orth(vectors),
        }
    }

    pub fn from_vectors(ambient_dim: usize, vectors: &[DVector<f64>]) -> Self {
        Self::span(ambient_dim, &linalg::columns_to_matrix(ambient_dim, vectors))
    }

    /// Wraps a basis that is already orthonormal.
    pub(crate) fn from_orthonormal(ambient_dim: usize, basis: DMatrix<f64>) -> Self {
        debug_assert_eq!(basis.nrows(), ambient_dim);
        Subspace { ambient_dim, basis }
    }

    /// Null space of a linear map `R^n -> R^m`.
    pub fn kernel_of(map: &DMatrix<f64>) -> Self {
        Subspace::from_orthonormal(map.ncols(), linalg::kernel(map))
    }

    pub fn zero(ambient_dim: usize) -> Self {
        Subspace {
            ambient_dim,
            basis: DMatrix::zeros(ambient_dim, 0),
        }
    }

    pub fn full(ambient_dim: usize) -> Self {
        Subspace {
            ambient_dim,
            basis: DMatrix::identity(ambient_dim, ambient_dim),
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    /// Orthonormal basis as columns.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn is_zero(&self) -> bool {
        self.dim() == 0
    }

    pub fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.basis * (self.basis.transpose() * v)
    }

    /// Largest distance of a unit vector of `other` from `self`.
    pub fn containment_defect(&self, other: &Subspace) -> f64 {
        assert_eq!(self.ambient_dim, other.ambient_dim);
        if other.dim() == 0 {
            return 0.0;
        }
        let proj = &self.basis * (self.basis.transpose() * &other.basis);
        let diff = &other.basis - proj;
        diff.column_iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// `other ⊆ self`.
    pub fn contains(&self, other: &Subspace) -> bool {
        other.dim() <= self.dim() && self.containment_defect(other) <= SUBSPACE_TOL
    }

    pub fn contains_vector(&self, v: &DVector<f64>) -> bool {
        let norm = v.norm();
        if norm <= linalg::RANK_ABS_FLOOR {
            return true;
        }
        (v - self.project(v)).norm() <= SUBSPACE_TOL * norm
    }

    /// Equality as mutual containment.
    pub fn approx_eq(&self, other: &Subspace) -> bool {
        self.dim() == other.dim() && self.contains(other) && other.contains(self)
    }

    pub fn sum(&self, other: &Subspace) -> Subspace {
        Subspace::span(self.ambient_dim, &linalg::hstack(&self.basis, &other.basis))
    }

    pub fn intersection(&self, other: &Subspace) -> Subspace {
        assert_eq!(self.ambient_dim, other.ambient_dim);
        if self.dim() == 0 || other.dim() == 0 {
            return Subspace::zero(self.ambient_dim);
        }
        let stacked = linalg::hstack(&self.basis, &(-&other.basis));
        let k = linalg::kernel(&stacked);
        let coeffs = k.rows(0, self.dim()).into_owned();
        Subspace::span(self.ambient_dim, &(&self.basis * coeffs))
    }

    pub fn orthogonal_complement(&self) -> Subspace {
        if self.dim() == 0 {
            return Subspace::full(self.ambient_dim);
        }
        Subspace::kernel_of(&self.basis.transpose())
    }

    /// Orthogonal complement of `sub` inside `self`.
    pub fn complement_within(&self, sub: &Subspace) -> Subspace {
        if sub.dim() == 0 {
            return self.clone();
        }
        let coeffs = linalg::kernel(&(sub.basis.transpose() * &self.basis));
        Subspace::span(self.ambient_dim, &(&self.basis * coeffs))
    }

    /// Image under a linear map.
    pub fn image(&self, map: &DMatrix<f64>) -> Subspace {
        Subspace::span(map.nrows(), &(map * &self.basis))
    }
}

/// An element of `⊕_r V*`: `r` covectors stored as the rows of an `r x n`
/// matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CovectorTuple {
    rows: DMatrix<f64>,
}

impl CovectorTuple {
    pub fn new(rows: DMatrix<f64>) -> Self {
        assert!(rows.nrows() > 0, "order must be positive");
        CovectorTuple { rows }
    }

    pub fn zeros(order: usize, dim: usize) -> Self {
        CovectorTuple::new(DMatrix::zeros(order, dim))
    }

    pub fn from_flat(order: usize, dim: usize, flat: &DVector<f64>) -> Self {
        assert_eq!(flat.len(), order * dim);
        CovectorTuple::new(DMatrix::from_fn(order, dim, |i, j| flat[i * dim + j]))
    }

    pub fn order(&self) -> usize {
        self.rows.nrows()
    }

    pub fn dim(&self) -> usize {
        self.rows.ncols()
    }

    pub fn rows(&self) -> &DMatrix<f64> {
        &self.rows
    }

    pub fn slot(&self, i: usize) -> DVector<f64> {
        self.rows.row(i).transpose()
    }

    pub fn flat(&self) -> DVector<f64> {
        let (r, n) = self.rows.shape();
        DVector::from_fn(r * n, |k, _| self.rows[(k / n, k % n)])
    }

    /// `i_X eta = (eta_1(X), ..., eta_r(X))`.
    pub fn contract(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.rows * x
    }
}

/// An `R^r`-valued skew form on `R^n`: `r` skew-symmetric `n x n` matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyForm {
    components: Vec<DMatrix<f64>>,
}

impl PolyForm {
    /// Builds a poly-form, symmetrizing each component to `(A - A^T) / 2`.
    ///
    /// Fails when a component is not square or is further than [`SKEW_TOL`]
    /// (relative to its size) from being skew.
    pub fn new(components: Vec<DMatrix<f64>>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidInput("poly-form needs at least one component".into()));
        }
        let n = components[0].nrows();
        let mut out = Vec::with_capacity(components.len());
        for (i, c) in components.into_iter().enumerate() {
            if c.nrows() != n || c.ncols() != n {
                return Err(Error::InvalidInput(format!(
                    "component {i} has shape {:?}, expected {n}x{n}",
                    c.shape()
                )));
            }
            let skew = (&c - c.transpose()) * 0.5;
            let correction = linalg::max_abs(&(&c - &skew));
            let scale = linalg::max_abs(&c).max(1.0);
            if correction > SKEW_WARN_TOL * scale {
                log::warn!("poly-form component {i} symmetrized; correction {correction:.3e}");
            }
            if correction > 1e-6 * scale {
                return Err(Error::InvalidInput(format!(
                    "component {i} is not skew-symmetric (defect {correction:.3e})"
                )));
            }
            out.push(skew);
        }
        Ok(PolyForm { components: out })
    }

    pub fn zero(order: usize, dim: usize) -> Self {
        PolyForm {
            components: vec![DMatrix::zeros(dim, dim); order],
        }
    }

    pub fn order(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.components[0].nrows()
    }

    pub fn components(&self) -> &[DMatrix<f64>] {
        &self.components
    }

    pub fn component(&self, i: usize) -> &DMatrix<f64> {
        &self.components[i]
    }

    /// `(omega_1(X, Y), ..., omega_r(X, Y))`.
    pub fn eval(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.order(),
            self.components.iter().map(|w| (x.transpose() * w * y)[(0, 0)]),
        )
    }

    /// `i_X omega = (omega_1(X, .), ..., omega_r(X, .))`.
    pub fn sharp(&self, x: &DVector<f64>) -> CovectorTuple {
        let mut rows = DMatrix::zeros(self.order(), self.dim());
        for (i, w) in self.components.iter().enumerate() {
            rows.set_row(i, &(x.transpose() * w));
        }
        CovectorTuple::new(rows)
    }

    /// The stacked matrix whose kernel is `⋂ ker omega_i`.
    pub fn stacked(&self) -> DMatrix<f64> {
        linalg::vstack(&self.components)
    }

    pub fn common_kernel(&self) -> Subspace {
        Subspace::kernel_of(&self.stacked())
    }

    pub fn is_nondegenerate(&self) -> bool {
        self.common_kernel().is_zero()
    }

    /// `M^T omega_i M` for each component.
    pub fn pullback(&self, m: &DMatrix<f64>) -> PolyForm {
        PolyForm {
            components: self
                .components
                .iter()
                .map(|w| m.transpose() * w * m)
                .collect(),
        }
    }

    pub fn negated(&self) -> PolyForm {
        PolyForm {
            components: self.components.iter().map(|w| -w).collect(),
        }
    }

    /// Componentwise block-diagonal sum on `V ⊕ W`; orders must agree.
    pub fn direct_sum(&self, other: &PolyForm) -> Result<PolyForm> {
        if self.order() != other.order() {
            return Err(Error::InvalidInput(format!(
                "orders differ: {} vs {}",
                self.order(),
                other.order()
            )));
        }
        Ok(PolyForm {
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| linalg::block_diag(&[a.clone(), b.clone()]))
                .collect(),
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.components.iter().map(linalg::max_abs).fold(0.0, f64::max)
    }
}

/// A subspace of `⊕_r V*`, given by a basis of covector tuples.
#[derive(Clone, Debug)]
pub struct CotupleSubspace {
    order: usize,
    dim: usize,
    /// Flattened basis tuples as columns, `(r n) x K`.
    basis: DMatrix<f64>,
}

impl CotupleSubspace {
    pub fn new(order: usize, dim: usize, basis: &[CovectorTuple]) -> Result<Self> {
        for t in basis {
            if t.order() != order || t.dim() != dim {
                return Err(Error::InvalidInput("covector tuple of the wrong shape".into()));
            }
        }
        let flat: Vec<DVector<f64>> = basis.iter().map(CovectorTuple::flat).collect();
        Self::from_flat_columns(order, dim, linalg::columns_to_matrix(order * dim, &flat))
    }

    pub fn from_flat_columns(order: usize, dim: usize, basis: DMatrix<f64>) -> Result<Self> {
        assert_eq!(basis.nrows(), order * dim);
        if linalg::rank(&basis) != basis.ncols() {
            return Err(Error::InvalidInput("cotuple basis is linearly dependent".into()));
        }
        Ok(CotupleSubspace { order, dim, basis })
    }

    pub fn zero(order: usize, dim: usize) -> Self {
        CotupleSubspace {
            order,
            dim,
            basis: DMatrix::zeros(order * dim, 0),
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn flat_basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn tuple(&self, a: usize) -> CovectorTuple {
        CovectorTuple::from_flat(self.order, self.dim, &self.basis.column(a).into_owned())
    }

    /// All slot covectors of all basis tuples stacked as rows,
    /// `(K r) x n`; its kernel is the polar.
    pub fn contraction_matrix(&self) -> DMatrix<f64> {
        stacked_contraction(self.order, self.dim, &self.basis)
    }

    pub fn as_subspace(&self) -> Subspace {
        Subspace::from_orthonormal(self.order * self.dim, linalg::orth(&self.basis))
    }
}

pub(crate) fn stacked_contraction(order: usize, dim: usize, flat: &DMatrix<f64>) -> DMatrix<f64> {
    let k = flat.ncols();
    let mut m = DMatrix::zeros(k * order, dim);
    for a in 0..k {
        for i in 0..order {
            for j in 0..dim {
                m[(a * order + i, j)] = flat[(i * dim + j, a)];
            }
        }
    }
    m
}

/// `Ann(L) = {alpha : alpha(X) = 0 for all X in L}`, in dual coordinates.
pub fn annihilator(l: &Subspace) -> Subspace {
    if l.dim() == 0 {
        return Subspace::full(l.ambient_dim());
    }
    Subspace::kernel_of(&l.basis().transpose())
}

/// `Ann(L) ⊗ R^r` as a subspace of the flattened `R^{r n}`.
pub fn annihilator_tensor(l: &Subspace, order: usize) -> Subspace {
    let ann = annihilator(l);
    let blocks = vec![ann.basis().clone(); order];
    Subspace::from_orthonormal(l.ambient_dim() * order, linalg::block_diag(&blocks))
}

/// The polar `S° = {X : i_X eta = 0 for all eta in S}`.
pub fn polar(s: &CotupleSubspace) -> Subspace {
    if s.rank() == 0 {
        return Subspace::full(s.dim());
    }
    Subspace::kernel_of(&s.contraction_matrix())
}

/// Defect of `L` from being isotropic: `max_i |B^T omega_i B|` on an
/// orthonormal basis `B` of `L`.
pub fn isotropy_defect(omega: &PolyForm, l: &Subspace) -> f64 {
    let b = l.basis();
    omega
        .components()
        .iter()
        .map(|w| linalg::max_abs(&(b.transpose() * w * b)))
        .fold(0.0, f64::max)
}

/// Matrix of `omega^sharp : L -> Ann(L) ⊗ R^r`, in the orthonormal bases of
/// `L` and `Ann(L)` (slot-major rows, `r (n - k) x k`).
pub fn omega_sharp(omega: &PolyForm, l: &Subspace) -> Result<DMatrix<f64>> {
    assert_eq!(omega.dim(), l.ambient_dim());
    let defect = isotropy_defect(omega, l);
    if defect > 1e-9 * omega.max_abs().max(1.0) {
        return Err(Error::NotIsotropic { defect });
    }
    let ann = annihilator(l);
    let blocks: Vec<DMatrix<f64>> = omega
        .components()
        .iter()
        .map(|w| ann.basis().transpose() * w.transpose() * l.basis())
        .collect();
    Ok(linalg::vstack(&blocks))
}

/// `L^omega = {X : omega_i(Y, X) = 0 for all Y in L and all i}`.
pub fn omega_orthogonal(omega: &PolyForm, l: &Subspace) -> Subspace {
    if l.dim() == 0 {
        return Subspace::full(l.ambient_dim());
    }
    let blocks: Vec<DMatrix<f64>> = omega
        .components()
        .iter()
        .map(|w| l.basis().transpose() * w)
        .collect();
    Subspace::kernel_of(&linalg::vstack(&blocks))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Classification {
    pub isotropic: bool,
    pub coisotropic: bool,
    pub lagrangian: bool,
    pub poly_lagrangian: bool,
}

/// Isotropic / coisotropic / Lagrangian / poly-Lagrangian classification of
/// `L` with respect to a nondegenerate poly-form.
pub fn classify(omega: &PolyForm, l: &Subspace) -> Result<Classification> {
    let ker = omega.common_kernel();
    if !ker.is_zero() {
        return Err(Error::DegeneratePolyForm {
            kernel_dim: ker.dim(),
        });
    }
    let orth = omega_orthogonal(omega, l);
    let isotropic = orth.contains(l);
    let coisotropic = l.contains(&orth);
    let lagrangian = isotropic && coisotropic;
    let poly_lagrangian = match omega_sharp(omega, l) {
        Ok(m) => m.nrows() == m.ncols() && linalg::rank(&m) == m.ncols(),
        Err(Error::NotIsotropic { .. }) => false,
        Err(e) => return Err(e),
    };
    debug_assert!(!poly_lagrangian || lagrangian, "poly-Lagrangian must imply Lagrangian");
    Ok(Classification {
        isotropic,
        coisotropic,
        lagrangian,
        poly_lagrangian,
    })
}

/// Dimensions `l` of subspaces of `R^n` for which `omega_sharp` can be
/// square, i.e. `l = r (n - l)`. A poly-Lagrangian subspace can only have
/// one of these dimensions.
pub fn poly_lagrangian_dimensions(order: usize, dim: usize) -> Vec<usize> {
    (0..=dim).filter(|&l| l == order * (dim - l)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoisotropicConditions {
    /// `P(S ∩ Ann(L) ⊗ R^r) ⊂ L`.
    pub cond_a: bool,
    /// `Ann(L) ⊗ R^r ⊂ (S ∩ Ann(L) ⊗ R^r)^⊥`.
    pub cond_b: bool,
    pub defect_a: f64,
    pub defect_b: f64,
}

/// Coefficients `c` (as columns) of the elements `sum_a c_a sigma_a` of `S`
/// lying in `Ann(L) ⊗ R^r`. `frame` holds flattened tuples as columns.
pub fn frame_coefficients_in_ann(
    order: usize,
    frame: &DMatrix<f64>,
    l: &Subspace,
) -> DMatrix<f64> {
    let n = l.ambient_dim();
    let k = frame.ncols();
    if l.dim() == 0 {
        return DMatrix::identity(k, k);
    }
    let mut rows = DMatrix::zeros(order * l.dim(), k);
    for i in 0..order {
        let slot = frame.rows(i * n, n);
        let block = l.basis().transpose() * slot;
        rows.view_mut((i * l.dim(), 0), block.shape()).copy_from(&block);
    }
    linalg::kernel(&rows)
}

/// Conditions (a) and (b) for `L` to be coisotropic with respect to a
/// pointwise `(S, P)`. `anchor` holds `P(sigma_a)` as columns.
pub fn coisotropic_conditions(
    s: &CotupleSubspace,
    anchor: &DMatrix<f64>,
    l: &Subspace,
) -> CoisotropicConditions {
    let n = s.dim();
    let r = s.order();
    assert_eq!(anchor.shape(), (n, s.rank()));
    let coeffs = frame_coefficients_in_ann(r, s.flat_basis(), l);
    let images = anchor * &coeffs;

    let image_space = Subspace::span(n, &images);
    let defect_a = l.containment_defect(&image_space);
    let cond_a = l.contains(&image_space);

    // (S ∩ Ann(L)⊗R^r)^⊥ = {beta : beta^i(P alpha) = 0 for all alpha, i}.
    let m = images.ncols();
    let mut constraints = DMatrix::zeros(m * r, r * n);
    for c in 0..m {
        for i in 0..r {
            for j in 0..n {
                constraints[(c * r + i, i * n + j)] = images[(j, c)];
            }
        }
    }
    let perp = Subspace::kernel_of(&constraints);
    let ann_r = annihilator_tensor(l, r);
    let defect_b = perp.containment_defect(&ann_r);
    let cond_b = perp.contains(&ann_r);
    CoisotropicConditions {
        cond_a,
        cond_b,
        defect_a,
        defect_b,
    }
}

/// Symplectic Gram-Schmidt for a nondegenerate 2-form: returns columns
/// `(e_1..e_m, f_1..f_m)` with `omega(e_i, f_j) = delta_ij` and all other
/// pairings zero.
pub fn darboux_basis(omega: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = omega.nrows();
    if n % 2 != 0 || linalg::rank(omega) != n {
        return Err(Error::DegenerateForm {
            kernel_dim: n - linalg::rank(omega),
        });
    }
    let pair = |x: &DVector<f64>, y: &DVector<f64>| (x.transpose() * omega * y)[(0, 0)];
    let mut pool: Vec<DVector<f64>> = (0..n).map(|i| DVector::from_fn(n, |j, _| f64::from(u8::from(i == j)))).collect();
    let mut es = Vec::new();
    let mut fs = Vec::new();
    while let Some(e) = pool.first().cloned() {
        pool.remove(0);
        let Some((idx, val)) = pool
            .iter()
            .enumerate()
            .map(|(i, w)| (i, pair(&e, w)))
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        else {
            return Err(Error::DegenerateForm { kernel_dim: 1 });
        };
        if val.abs() < 1e-12 {
            return Err(Error::DegenerateForm { kernel_dim: 1 });
        }
        let f = pool.remove(idx) / val;
        pool = pool
            .into_iter()
            .map(|w| &w - &e * pair(&w, &f) + &f * pair(&w, &e))
            .filter(|w| w.norm() > 1e-12)
            .collect();
        es.push(e);
        fs.push(f);
    }
    es.extend(fs);
    Ok(linalg::columns_to_matrix(n, &es))
}

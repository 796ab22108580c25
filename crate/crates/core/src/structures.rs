//! Poly-Poisson structures `(S, P)` on a single coordinate chart.
//!
//! `S` is given by a global frame `sigma_1..sigma_K`, stored as the columns of
//! an `(r n) x K` matrix field (slot `i`, coordinate `j` at row `i n + j`), and
//! `P` by the anchor vectors `v_a = P(sigma_a)`, the columns of an `n x K`
//! matrix field. Sections of `S` are carried by their frame coefficients.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{Chart, DerivMode, MatrixField, PolyFormField};
use crate::lie::LieAlgebraData;
use crate::linalg;
use crate::polyspace::{self, CotupleSubspace, CovectorTuple, PolyForm};

/// Admissibility residual: `dh` must lie in `S` up to this least-squares residual.
pub const TAU_ADM: f64 = 1e-8;
/// Closure residual of the bracket on the frame.
pub const TAU_CLOSURE: f64 = 1e-7;
/// Worst residual accepted by [`check_axioms`].
pub const AXIOM_TOL: f64 = 1e-6;
/// Jacobi is differentiated once more than the bracket; its outer step is
/// this multiple of the chart step.
pub const JACOBI_STEP_FACTOR: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrivialVariant {
    S1,
    S2,
    S3,
    S4,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FoliationVariant {
    S1,
    S2,
    S3,
}

/// Which constructor produced a structure; some operations need it.
#[derive(Clone, Debug)]
pub enum StructureKind {
    Custom,
    Polysymplectic,
    Trivial(TrivialVariant),
    Product(Vec<PolyPoissonStructure>),
    Constant { k: usize },
    LinearDirectSum(LieAlgebraData),
    LinearProduct(LieAlgebraData),
    Foliation(FoliationVariant),
}

#[derive(Clone, Debug)]
pub struct PolyPoissonStructure {
    name: String,
    chart: Chart,
    order: usize,
    frame: MatrixField,
    anchor: MatrixField,
    mode: DerivMode,
    kind: StructureKind,
}

impl PolyPoissonStructure {
    pub fn new(name: &str, chart: Chart, order: usize, frame: MatrixField, anchor: MatrixField) -> Result<Self> {
        let n = chart.dim();
        let (fr, k) = frame.shape();
        if order == 0 {
            return Err(Error::InvalidInput("order must be positive".into()));
        }
        if fr != order * n {
            return Err(Error::InvalidInput(format!("frame has {fr} rows, expected {}", order * n)));
        }
        if anchor.shape() != (n, k) {
            return Err(Error::InvalidInput(format!(
                "anchor has shape {:?}, expected ({n}, {k})",
                anchor.shape()
            )));
        }
        Ok(PolyPoissonStructure {
            name: name.to_string(),
            chart,
            order,
            frame,
            anchor,
            mode: DerivMode::Analytic,
            kind: StructureKind::Custom,
        })
    }

    fn with_kind(mut self, kind: StructureKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn with_name(mut self, name: &str) -> Self {
        self.name = name.to_string();
        self
    }

    pub fn with_deriv_mode(mut self, mode: DerivMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_chart(mut self, chart: Chart) -> Result<Self> {
        if chart.dim() != self.chart.dim() {
            return Err(Error::InvalidInput("replacement chart has the wrong dimension".into()));
        }
        self.chart = chart;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn frame_size(&self) -> usize {
        self.frame.shape().1
    }

    pub fn kind(&self) -> &StructureKind {
        &self.kind
    }

    pub fn deriv_mode(&self) -> DerivMode {
        self.mode
    }

    pub fn fd_step(&self) -> f64 {
        self.chart.fd_step()
    }

    pub fn has_analytic_derivatives(&self) -> bool {
        self.frame.has_analytic_partials() && self.anchor.has_analytic_partials()
    }

    pub fn frame_field(&self) -> &MatrixField {
        &self.frame
    }

    pub fn anchor_field(&self) -> &MatrixField {
        &self.anchor
    }

    pub fn frame_at(&self, x: &DVector<f64>) -> DMatrix<f64> {
        self.frame.eval(x)
    }

    pub fn anchor_at(&self, x: &DVector<f64>) -> DMatrix<f64> {
        self.anchor.eval(x)
    }

    pub fn frame_partials(&self, x: &DVector<f64>) -> Vec<DMatrix<f64>> {
        self.frame.partials(x, self.fd_step(), self.mode)
    }

    pub fn anchor_partials(&self, x: &DVector<f64>) -> Vec<DMatrix<f64>> {
        self.anchor.partials(x, self.fd_step(), self.mode)
    }

    /// `S_x` as a cotuple subspace; fails if the frame is dependent at `x`.
    pub fn fiber(&self, x: &DVector<f64>) -> Result<CotupleSubspace> {
        CotupleSubspace::from_flat_columns(self.order, self.dim(), self.frame_at(x))
    }

    /// `P(sum_a lambda_a sigma_a)`.
    pub fn anchor_of(&self, x: &DVector<f64>, lambda: &DVector<f64>) -> DVector<f64> {
        self.anchor_at(x) * lambda
    }

    /// `sum_a lambda_a sigma_a`, flattened.
    pub fn tuple_of(&self, x: &DVector<f64>, lambda: &DVector<f64>) -> DVector<f64> {
        self.frame_at(x) * lambda
    }

    /// Least-squares frame coefficients of a flattened tuple, with the
    /// max-abs residual.
    pub fn coefficients_of(&self, x: &DVector<f64>, eta: &DVector<f64>) -> (DVector<f64>, f64) {
        let (c, res) = linalg::lstsq(&self.frame_at(x), &DMatrix::from_column_slice(eta.len(), 1, eta.as_slice()));
        (c.column(0).into_owned(), res)
    }

    /// Same `(S, P)` with the frame replaced by `sigma T` for an invertible
    /// constant `K x K` matrix `T`.
    pub fn respan(&self, t: &DMatrix<f64>) -> Result<Self> {
        let k = self.frame_size();
        if t.shape() != (k, k) || linalg::rank(t) != k {
            return Err(Error::InvalidInput("respan matrix must be invertible K x K".into()));
        }
        let mut out = self.clone();
        out.frame = right_multiply(&self.frame, t);
        out.anchor = right_multiply(&self.anchor, t);
        Ok(out)
    }

    /// The anchor of frame element `a` shifted by a constant vector.
    pub fn with_corrupted_anchor(&self, a: usize, shift: &DVector<f64>) -> Self {
        let inner = self.anchor.clone();
        let inner_d = self.anchor.clone();
        let s = shift.clone();
        let (n, k) = inner.shape();
        let mut out = self.clone();
        let mode = self.mode;
        let h = self.fd_step();
        out.anchor = MatrixField::new(n, k, move |x| {
            let mut m = inner.eval(x);
            let mut col = m.column_mut(a);
            col += &s;
            m
        })
        .with_partials(move |x| inner_d.partials(x, h, mode));
        out.kind = StructureKind::Custom;
        out.name = format!("{}-corrupted", self.name);
        out
    }

    /// The structure with frame element `a` removed.
    pub fn without_frame_element(&self, a: usize) -> Self {
        let k = self.frame_size();
        let keep: Vec<usize> = (0..k).filter(|&b| b != a).collect();
        let mut sel = DMatrix::zeros(k, k - 1);
        for (c, &b) in keep.iter().enumerate() {
            sel[(b, c)] = 1.0;
        }
        let mut out = self.clone();
        out.frame = right_multiply(&self.frame, &sel);
        out.anchor = right_multiply(&self.anchor, &sel);
        out.kind = StructureKind::Custom;
        out.name = format!("{}-dropped{a}", self.name);
        out
    }
}

fn right_multiply(f: &MatrixField, t: &DMatrix<f64>) -> MatrixField {
    let (rows, _) = f.shape();
    let inner = f.clone();
    let t1 = t.clone();
    let field = MatrixField::new(rows, t.ncols(), move |x| inner.eval(x) * &t1);
    if f.has_analytic_partials() {
        let inner = f.clone();
        let t2 = t.clone();
        field.with_partials(move |x| {
            inner
                .partials(x, 0.0, DerivMode::Analytic)
                .into_iter()
                .map(|d| d * &t2)
                .collect()
        })
    } else {
        field
    }
}

/// A section of `S` given by its frame coefficients `x -> lambda(x)` (a
/// `K x 1` field).
#[derive(Clone, Debug)]
pub struct Section {
    coeffs: MatrixField,
    fd_step: Option<f64>,
}

impl Section {
    pub fn new(coeffs: MatrixField) -> Self {
        Section { coeffs, fd_step: None }
    }

    pub fn constant(lambda: &DVector<f64>) -> Self {
        Section::new(MatrixField::constant(DMatrix::from_column_slice(
            lambda.len(),
            1,
            lambda.as_slice(),
        )))
    }

    pub fn frame_element(k: usize, a: usize) -> Self {
        let mut e = DVector::zeros(k);
        e[a] = 1.0;
        Section::constant(&e)
    }

    /// Overrides the chart step when differencing the coefficients.
    pub fn with_fd_step(mut self, h: f64) -> Self {
        self.fd_step = Some(h);
        self
    }

    pub fn coefficients(&self, x: &DVector<f64>) -> DVector<f64> {
        self.coeffs.eval(x).column(0).into_owned()
    }
}

/// Value and first partials of a section and of its anchor image at a point.
struct Jet {
    eta: DVector<f64>,
    d_eta: Vec<DVector<f64>>,
    v: DVector<f64>,
    d_v: Vec<DVector<f64>>,
}

struct FrameData {
    f: DMatrix<f64>,
    df: Vec<DMatrix<f64>>,
    a: DMatrix<f64>,
    da: Vec<DMatrix<f64>>,
}

impl FrameData {
    fn at(s: &PolyPoissonStructure, x: &DVector<f64>) -> Self {
        FrameData {
            f: s.frame_at(x),
            df: s.frame_partials(x),
            a: s.anchor_at(x),
            da: s.anchor_partials(x),
        }
    }

    fn jet(&self, lambda: &DVector<f64>, d_lambda: &[DVector<f64>]) -> Jet {
        let n = self.df.len();
        Jet {
            eta: &self.f * lambda,
            d_eta: (0..n).map(|k| &self.df[k] * lambda + &self.f * &d_lambda[k]).collect(),
            v: &self.a * lambda,
            d_v: (0..n).map(|k| &self.da[k] * lambda + &self.a * &d_lambda[k]).collect(),
        }
    }

    fn frame_jet(&self, a: usize) -> Jet {
        let n = self.df.len();
        Jet {
            eta: self.f.column(a).into_owned(),
            d_eta: (0..n).map(|k| self.df[k].column(a).into_owned()).collect(),
            v: self.a.column(a).into_owned(),
            d_v: (0..n).map(|k| self.da[k].column(a).into_owned()).collect(),
        }
    }
}

/// `L_{P(eta)} gamma - i_{P(gamma)} d eta`, componentwise in the slots.
fn bracket_jets(order: usize, n: usize, eta: &Jet, gamma: &Jet) -> DVector<f64> {
    let mut out = DVector::zeros(order * n);
    for i in 0..order {
        for k in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                s += eta.v[j] * gamma.d_eta[j][i * n + k];
                s += gamma.eta[i * n + j] * eta.d_v[k][j];
                s -= gamma.v[j] * (eta.d_eta[j][i * n + k] - eta.d_eta[k][i * n + j]);
            }
            out[i * n + k] = s;
        }
    }
    out
}

fn section_jet(s: &PolyPoissonStructure, fd: &FrameData, sec: &Section, x: &DVector<f64>) -> Jet {
    let h = sec.fd_step.unwrap_or(s.fd_step());
    let lambda = sec.coefficients(x);
    let d: Vec<DVector<f64>> = sec
        .coeffs
        .partials(x, h, s.mode)
        .into_iter()
        .map(|m| m.column(0).into_owned())
        .collect();
    fd.jet(&lambda, &d)
}

fn stencil_margin(s: &PolyPoissonStructure, secs: &[&Section]) -> f64 {
    let needs_fd = |f: &MatrixField| s.mode == DerivMode::Numeric || !f.has_analytic_partials();
    let mut m: f64 = 0.0;
    if needs_fd(&s.frame) || needs_fd(&s.anchor) {
        m = s.fd_step();
    }
    for sec in secs {
        if needs_fd(&sec.coeffs) {
            m = m.max(sec.fd_step.unwrap_or(s.fd_step()));
        }
    }
    m
}

/// The bracket `⌊eta, gamma⌋` of two sections at `x`, as a covector tuple.
pub fn bracket(s: &PolyPoissonStructure, eta: &Section, gamma: &Section, x: &DVector<f64>) -> Result<CovectorTuple> {
    s.chart.check_point(x, stencil_margin(s, &[eta, gamma]))?;
    let fd = FrameData::at(s, x);
    let je = section_jet(s, &fd, eta, x);
    let jg = section_jet(s, &fd, gamma, x);
    let flat = bracket_jets(s.order, s.dim(), &je, &jg);
    Ok(CovectorTuple::from_flat(s.order, s.dim(), &flat))
}

/// Frame expansion of the bracket, `⌊sigma_a, sigma_b⌋ = sum_c C^c_{ab} sigma_c`.
#[derive(Clone, Debug, PartialEq)]
pub struct StructureFunctions {
    k: usize,
    // c[c * K * K + a * K + b]
    values: Vec<f64>,
    pub residual: f64,
}

impl StructureFunctions {
    pub fn frame_size(&self) -> usize {
        self.k
    }

    /// `C^c_{ab}`.
    pub fn get(&self, c: usize, a: usize, b: usize) -> f64 {
        self.values[c * self.k * self.k + a * self.k + b]
    }

    /// `C(lambda, mu)^c = sum_{ab} C^c_{ab} lambda^a mu^b`.
    pub fn apply(&self, lambda: &DVector<f64>, mu: &DVector<f64>) -> DVector<f64> {
        let k = self.k;
        DVector::from_fn(k, |c, _| {
            let mut s = 0.0;
            for a in 0..k {
                if lambda[a] == 0.0 {
                    continue;
                }
                for b in 0..k {
                    s += self.get(c, a, b) * lambda[a] * mu[b];
                }
            }
            s
        })
    }

    /// Coefficient vector of `⌊sigma_a, sigma_b⌋`.
    pub fn pair(&self, a: usize, b: usize) -> DVector<f64> {
        DVector::from_fn(self.k, |c, _| self.get(c, a, b))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn antisymmetry_defect(&self) -> f64 {
        let k = self.k;
        let mut worst = 0.0_f64;
        for c in 0..k {
            for a in 0..k {
                for b in 0..k {
                    worst = worst.max((self.get(c, a, b) + self.get(c, b, a)).abs());
                }
            }
        }
        worst
    }
}

fn structure_functions_from(s: &PolyPoissonStructure, fd: &FrameData) -> StructureFunctions {
    let k = s.frame_size();
    let n = s.dim();
    let jets: Vec<Jet> = (0..k).map(|a| fd.frame_jet(a)).collect();
    let mut pairs = Vec::new();
    let mut rhs = DMatrix::zeros(s.order * n, k * (k.saturating_sub(1)) / 2);
    for a in 0..k {
        for b in (a + 1)..k {
            let col = pairs.len();
            rhs.set_column(col, &bracket_jets(s.order, n, &jets[a], &jets[b]));
            pairs.push((a, b));
        }
    }
    let (coef, residual) = if pairs.is_empty() {
        (DMatrix::zeros(k, 0), 0.0)
    } else {
        linalg::lstsq(&fd.f, &rhs)
    };
    let mut values = vec![0.0; k * k * k];
    for (col, &(a, b)) in pairs.iter().enumerate() {
        for c in 0..k {
            values[c * k * k + a * k + b] = coef[(c, col)];
            values[c * k * k + b * k + a] = -coef[(c, col)];
        }
    }
    StructureFunctions { k, values, residual }
}

/// Structure functions without the closure check.
pub fn structure_functions_unchecked(s: &PolyPoissonStructure, x: &DVector<f64>) -> Result<StructureFunctions> {
    s.chart.check_point(x, stencil_margin(s, &[]))?;
    Ok(structure_functions_from(s, &FrameData::at(s, x)))
}

/// Structure functions at `x`; `ClosureFailure` if the brackets of frame
/// elements leave `S` by more than `TAU_CLOSURE`.
pub fn structure_functions(s: &PolyPoissonStructure, x: &DVector<f64>) -> Result<StructureFunctions> {
    let sf = structure_functions_unchecked(s, x)?;
    if sf.residual > TAU_CLOSURE {
        return Err(Error::ClosureFailure { residual: sf.residual });
    }
    Ok(sf)
}

/// Worst cyclic sum `⌊⌊sigma_a, sigma_b⌋, sigma_c⌋ + cyclic` over frame
/// triples at `x`. The inner brackets are differentiated by central
/// differences of their frame coefficients with step
/// `JACOBI_STEP_FACTOR * fd_step`.
pub fn jacobiator(s: &PolyPoissonStructure, x: &DVector<f64>) -> Result<f64> {
    let n = s.dim();
    let k = s.frame_size();
    let big = JACOBI_STEP_FACTOR * s.fd_step();
    s.chart.check_point(x, big + stencil_margin(s, &[]))?;
    if k < 3 {
        return Ok(0.0);
    }
    let fd = FrameData::at(s, x);
    let c0 = structure_functions_from(s, &fd);
    let mut dc = Vec::with_capacity(n);
    for j in 0..n {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[j] += big;
        xm[j] -= big;
        let cp = structure_functions_from(s, &FrameData::at(s, &xp));
        let cm = structure_functions_from(s, &FrameData::at(s, &xm));
        dc.push((cp, cm));
    }
    let inner = |a: usize, b: usize| -> Jet {
        let lambda = c0.pair(a, b);
        let d: Vec<DVector<f64>> = dc
            .iter()
            .map(|(cp, cm)| (cp.pair(a, b) - cm.pair(a, b)) / (2.0 * big))
            .collect();
        fd.jet(&lambda, &d)
    };
    let frame: Vec<Jet> = (0..k).map(|a| fd.frame_jet(a)).collect();
    let mut worst = 0.0_f64;
    for a in 0..k {
        for b in (a + 1)..k {
            for c in (b + 1)..k {
                let t = bracket_jets(s.order, n, &inner(a, b), &frame[c])
                    + bracket_jets(s.order, n, &inner(b, c), &frame[a])
                    + bracket_jets(s.order, n, &inner(c, a), &frame[b]);
                worst = worst.max(linalg::max_abs_vec(&t));
            }
        }
    }
    Ok(worst)
}

/// One line of an axiom report.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub worst_residual: f64,
    pub tolerance: f64,
    pub samples: usize,
    pub detail: String,
}

impl CheckOutcome {
    pub fn new(name: &str, worst_residual: f64, tolerance: f64, samples: usize) -> Self {
        CheckOutcome {
            name: name.to_string(),
            passed: worst_residual.is_finite() && worst_residual <= tolerance,
            worst_residual,
            tolerance,
            samples,
            detail: String::new(),
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AxiomReport {
    pub cond_i: CheckOutcome,
    pub cond_ii: CheckOutcome,
    pub cond_iii_closure: CheckOutcome,
    pub cond_iii_jacobi: CheckOutcome,
}

impl AxiomReport {
    pub fn checks(&self) -> [&CheckOutcome; 4] {
        [&self.cond_i, &self.cond_ii, &self.cond_iii_closure, &self.cond_iii_jacobi]
    }

    pub fn all_passed(&self) -> bool {
        self.checks().iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> Vec<&str> {
        self.checks()
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect()
    }
}

/// Margin kept from the box boundary when sampling for axiom checks.
pub fn sample_margin(s: &PolyPoissonStructure) -> f64 {
    (JACOBI_STEP_FACTOR + 2.0) * s.fd_step()
}

struct PointResult {
    cond_i: f64,
    polar_dim: usize,
    frame_deficiency: usize,
    closure: f64,
    jacobi: f64,
}

fn axioms_at(s: &PolyPoissonStructure, x: &DVector<f64>, seed: u64) -> Result<PointResult> {
    let n = s.dim();
    let r = s.order;
    let k = s.frame_size();
    let f = s.frame_at(x);
    let a = s.anchor_at(x);

    // (i), polarized on the frame and on random combinations.
    let mut cond_i = 0.0_f64;
    let contract = |eta: &DVector<f64>, v: &DVector<f64>, i: usize| -> f64 {
        (0..n).map(|j| eta[i * n + j] * v[j]).sum()
    };
    for p in 0..k {
        for q in p..k {
            let (sp, sq) = (f.column(p).into_owned(), f.column(q).into_owned());
            let (vp, vq) = (a.column(p).into_owned(), a.column(q).into_owned());
            for i in 0..r {
                cond_i = cond_i.max((contract(&sp, &vq, i) + contract(&sq, &vp, i)).abs());
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..4 {
        let lambda = DVector::from_fn(k, |_, _| rng.random_range(-1.0..1.0));
        let eta = &f * &lambda;
        let v = &a * &lambda;
        for i in 0..r {
            cond_i = cond_i.max(contract(&eta, &v, i).abs());
        }
    }

    // (ii)
    let frame_rank = linalg::rank(&f);
    let polar_dim = if frame_rank == k {
        polyspace::polar(&CotupleSubspace::from_flat_columns(r, n, f.clone())?).dim()
    } else {
        linalg::kernel(&polyspace::stacked_contraction(r, n, &f)).ncols()
    };

    // (iii)
    let closure = structure_functions_unchecked(s, x)?.residual;
    let jacobi = jacobiator(s, x)?;
    Ok(PointResult {
        cond_i,
        polar_dim,
        frame_deficiency: k - frame_rank,
        closure,
        jacobi,
    })
}

/// Checks conditions (i)–(iii) at `num_samples` uniform points of the chart
/// box (shrunk by [`sample_margin`]).
pub fn check_axioms(s: &PolyPoissonStructure, num_samples: usize, seed: u64) -> Result<AxiomReport> {
    let points = s.chart.sample_points(num_samples, seed, sample_margin(s));
    let results: Vec<PointResult> = points
        .par_iter()
        .enumerate()
        .map(|(idx, x)| axioms_at(s, x, seed.wrapping_add(idx as u64 + 1)))
        .collect::<Result<_>>()?;
    let fold = |f: fn(&PointResult) -> f64| results.iter().map(f).fold(0.0_f64, f64::max);
    let worst_polar = results.iter().map(|p| p.polar_dim).max().unwrap_or(0);
    let worst_def = results.iter().map(|p| p.frame_deficiency).max().unwrap_or(0);
    let cond_ii = CheckOutcome::new("cond_ii", (worst_polar + worst_def) as f64, 0.0, num_samples).with_detail(
        format!("max polar dimension {worst_polar}, max frame rank deficiency {worst_def}"),
    );
    let cond_i = CheckOutcome::new("cond_i", fold(|p| p.cond_i), AXIOM_TOL, num_samples)
        .with_detail("max |i_{P(eta)} eta| over polarized frame pairs and random sections");
    let cond_iii_closure = CheckOutcome::new("cond_iii_closure", fold(|p| p.closure), AXIOM_TOL, num_samples)
        .with_detail("least-squares residual of frame brackets against the frame");
    let cond_iii_jacobi = CheckOutcome::new("cond_iii_jacobi", fold(|p| p.jacobi), AXIOM_TOL, num_samples)
        .with_detail("cyclic sum on frame triples");
    Ok(AxiomReport {
        cond_i,
        cond_ii,
        cond_iii_closure,
        cond_iii_jacobi,
    })
}

/// An `R^r`-valued function, given as an `r x 1` matrix field. Admissibility
/// (`dh` in `S`) is checked where it is used.
#[derive(Clone, Debug)]
pub struct AdmissibleFunction {
    value: MatrixField,
}

impl AdmissibleFunction {
    pub fn new(value: MatrixField) -> Self {
        AdmissibleFunction { value }
    }

    /// Builds from a closure; partials by central differences.
    pub fn from_fn(order: usize, f: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static) -> Self {
        AdmissibleFunction::new(MatrixField::new(order, 1, move |x| {
            let v = f(x);
            DMatrix::from_column_slice(v.len(), 1, v.as_slice())
        }))
    }

    pub fn order(&self) -> usize {
        self.value.shape().0
    }

    pub fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        self.value.eval(x).column(0).into_owned()
    }

    /// `r x n` matrix whose row `i` is `dh_i`.
    pub fn differential(&self, x: &DVector<f64>, h: f64, mode: DerivMode) -> DMatrix<f64> {
        let d = self.value.partials(x, h, mode);
        DMatrix::from_fn(self.order(), d.len(), |i, k| d[k][(i, 0)])
    }

    /// `dh` flattened slot-major.
    pub fn flat_differential(&self, x: &DVector<f64>, h: f64, mode: DerivMode) -> DVector<f64> {
        let d = self.differential(x, h, mode);
        let (r, n) = d.shape();
        DVector::from_fn(r * n, |idx, _| d[(idx / n, idx % n)])
    }
}

/// Frame coefficients of `dh` at `x` with the least-squares residual.
pub fn admissibility(s: &PolyPoissonStructure, h: &AdmissibleFunction, x: &DVector<f64>) -> (DVector<f64>, f64) {
    let dh = h.flat_differential(x, s.fd_step(), s.mode);
    s.coefficients_of(x, &dh)
}

/// `{h, g} = L_{P(dh)} g`.
pub fn admissible_bracket(
    s: &PolyPoissonStructure,
    h: &AdmissibleFunction,
    g: &AdmissibleFunction,
    x: &DVector<f64>,
) -> Result<DVector<f64>> {
    if h.order() != s.order || g.order() != s.order {
        return Err(Error::InvalidInput("function order differs from the structure order".into()));
    }
    s.chart.check_point(x, s.fd_step())?;
    let (lambda, res) = admissibility(s, h, x);
    if res > TAU_ADM {
        return Err(Error::NotAdmissible { residual: res });
    }
    let (_, res_g) = admissibility(s, g, x);
    if res_g > TAU_ADM {
        return Err(Error::NotAdmissible { residual: res_g });
    }
    Ok(g.differential(x, s.fd_step(), s.mode) * s.anchor_of(x, &lambda))
}

/// `L_{P(pr_S dh)} g` with `pr_S` the least-squares projection onto `S`;
/// defined for any `h`.
pub fn projected_bracket(
    s: &PolyPoissonStructure,
    h: &AdmissibleFunction,
    g: &AdmissibleFunction,
    x: &DVector<f64>,
) -> DVector<f64> {
    let (lambda, _) = admissibility(s, h, x);
    g.differential(x, s.fd_step(), s.mode) * s.anchor_of(x, &lambda)
}

// ---------------------------------------------------------------- constructors

fn unit(n: usize, j: usize) -> DVector<f64> {
    let mut e = DVector::zeros(n);
    e[j] = 1.0;
    e
}

/// Frame `sigma_j = i_{e_j} omega`, i.e. row `j` of every `omega_i`.
fn polysymplectic_frame(omega: &PolyFormField) -> MatrixField {
    let n = omega.dim();
    let r = omega.order();
    let assemble = move |mats: &[DMatrix<f64>]| {
        let mut f = DMatrix::zeros(r * n, n);
        for (i, w) in mats.iter().enumerate() {
            for j in 0..n {
                for k in 0..n {
                    f[(i * n + k, j)] = w[(j, k)];
                }
            }
        }
        f
    };
    let comps = omega.components().to_vec();
    let comps_d = comps.clone();
    let field = MatrixField::new(r * n, n, move |x| {
        let mats: Vec<DMatrix<f64>> = comps.iter().map(|c| c.eval(x)).collect();
        assemble(&mats)
    });
    if omega.has_analytic_partials() {
        field.with_partials(move |x| {
            let per_comp: Vec<Vec<DMatrix<f64>>> = comps_d
                .iter()
                .map(|c| c.partials(x, 0.0, DerivMode::Analytic))
                .collect();
            (0..x.len())
                .map(|k| {
                    let mats: Vec<DMatrix<f64>> = per_comp.iter().map(|d| d[k].clone()).collect();
                    assemble(&mats)
                })
                .collect()
        })
    } else {
        field
    }
}

/// Skew-symmetrized copy of a matrix field, so the frame sees exact skew data.
fn skew_part(f: &MatrixField) -> MatrixField {
    let (n, _) = f.shape();
    let inner = f.clone();
    let field = MatrixField::new(n, n, move |x| {
        let m = inner.eval(x);
        (&m - m.transpose()) * 0.5
    });
    if f.has_analytic_partials() {
        let inner = f.clone();
        field.with_partials(move |x| {
            inner
                .partials(x, 0.0, DerivMode::Analytic)
                .into_iter()
                .map(|m| (&m - m.transpose()) * 0.5)
                .collect()
        })
    } else {
        field
    }
}

/// Number of sample points used by constructors that validate their input.
pub const CONSTRUCTOR_SAMPLES: usize = 20;
pub const CLOSEDNESS_TOL: f64 = 1e-6;

/// The structure induced by a poly-symplectic form: `S = image(omega^sharp)`,
/// `P = (omega^sharp)^{-1}`.
pub fn polysymplectic(name: &str, omega: &PolyFormField, chart: Chart) -> Result<PolyPoissonStructure> {
    let n = chart.dim();
    if omega.dim() != n {
        return Err(Error::InvalidInput("form dimension differs from the chart".into()));
    }
    let mut points = chart.sample_points(CONSTRUCTOR_SAMPLES, 0x5eed, chart.fd_step());
    points.push(chart.center());
    let mode = DerivMode::Analytic;
    for x in &points {
        let w = omega.eval(x)?;
        let kd = w.common_kernel().dim();
        if kd > 0 {
            return Err(Error::DegenerateForm { kernel_dim: kd });
        }
        let dw = omega.exterior_derivative_norm(x, chart.fd_step(), mode);
        if dw > CLOSEDNESS_TOL {
            return Err(Error::NotClosed { residual: dw });
        }
    }
    let skew = PolyFormField::new(omega.components().iter().map(skew_part).collect())?;
    let frame = polysymplectic_frame(&skew);
    let anchor = MatrixField::constant(DMatrix::identity(n, n));
    Ok(PolyPoissonStructure::new(name, chart, omega.order(), frame, anchor)?.with_kind(StructureKind::Polysymplectic))
}

/// Constant poly-symplectic form.
pub fn constant_polysymplectic(name: &str, omega: &PolyForm, chart: Chart) -> Result<PolyPoissonStructure> {
    polysymplectic(name, &PolyFormField::constant(omega), chart)
}

/// The covelocity form on `⊕_r T*R^q` with coordinates
/// `(q_1..q_q, p^1_1..p^1_q, ..., p^r_1..p^r_q)`:
/// `omega_i = sum_j dq_j ∧ dp^i_j`.
pub fn covelocity_form(q: usize, r: usize) -> PolyForm {
    let n = q * (1 + r);
    let comps = (0..r)
        .map(|i| {
            let mut w = DMatrix::zeros(n, n);
            for j in 0..q {
                let p = q * (1 + i) + j;
                w[(j, p)] = 1.0;
                w[(p, j)] = -1.0;
            }
            w
        })
        .collect();
    PolyForm::new(comps).expect("covelocity form is skew")
}

pub fn covelocity(q: usize, r: usize, chart: Chart) -> Result<PolyPoissonStructure> {
    if chart.dim() != q * (1 + r) {
        return Err(Error::InvalidInput(format!(
            "covelocity chart must have dimension {}",
            q * (1 + r)
        )));
    }
    constant_polysymplectic(&format!("covelocity-q{q}-r{r}"), &covelocity_form(q, r), chart)
}

/// Trivial structures with zero anchor. `S2` uses `zeta_i = dx_{i mod n}`;
/// see [`trivial_s2`] for general 1-forms.
pub fn trivial(variant: TrivialVariant, chart: Chart, r: usize) -> Result<PolyPoissonStructure> {
    let n = chart.dim();
    if r == 0 {
        return Err(Error::InvalidInput("order must be positive".into()));
    }
    let frame = match variant {
        TrivialVariant::S1 => DMatrix::identity(r * n, r * n),
        TrivialVariant::S2 => {
            let zetas = (0..r)
                .map(|i| MatrixField::constant(DMatrix::from_column_slice(n, 1, unit(n, i % n).as_slice())))
                .collect();
            return trivial_s2(chart, zetas);
        }
        TrivialVariant::S3 => DMatrix::from_fn(r * n, n, |row, j| f64::from(u8::from(row % n == j))),
        TrivialVariant::S4 => DMatrix::from_fn(r * n, n, |row, j| f64::from(u8::from(row == j))),
    };
    let k = frame.ncols();
    PolyPoissonStructure::new(
        &format!("trivial-{variant:?}").to_lowercase(),
        chart,
        r,
        MatrixField::constant(frame),
        MatrixField::constant(DMatrix::zeros(n, k)),
    )
    .map(|s| s.with_kind(StructureKind::Trivial(variant)))
}

/// `S2 = {(c_1 zeta_1, ..., c_r zeta_r)}` with zero anchor; each `zeta_i`
/// is an `n x 1` field. Condition (ii) holds exactly when the `zeta_i` span
/// the cotangent space.
pub fn trivial_s2(chart: Chart, zetas: Vec<MatrixField>) -> Result<PolyPoissonStructure> {
    let n = chart.dim();
    let r = zetas.len();
    if r == 0 || zetas.iter().any(|z| z.shape() != (n, 1)) {
        return Err(Error::InvalidInput("S2 needs r one-forms of length n".into()));
    }
    let analytic = zetas.iter().all(MatrixField::has_analytic_partials);
    let z = zetas.clone();
    let mut frame = MatrixField::new(r * n, r, move |x| {
        let mut f = DMatrix::zeros(r * n, r);
        for (i, zi) in z.iter().enumerate() {
            f.view_mut((i * n, i), (n, 1)).copy_from(&zi.eval(x));
        }
        f
    });
    if analytic {
        frame = frame.with_partials(move |x| {
            let d: Vec<Vec<DMatrix<f64>>> = zetas.iter().map(|z| z.partials(x, 0.0, DerivMode::Analytic)).collect();
            (0..x.len())
                .map(|k| {
                    let mut f = DMatrix::zeros(r * n, r);
                    for (i, di) in d.iter().enumerate() {
                        f.view_mut((i * n, i), (n, 1)).copy_from(&di[k]);
                    }
                    f
                })
                .collect()
        });
    }
    PolyPoissonStructure::new(
        "trivial-s2",
        chart,
        r,
        frame,
        MatrixField::constant(DMatrix::zeros(n, r)),
    )
    .map(|s| s.with_kind(StructureKind::Trivial(TrivialVariant::S2)))
}

/// Layout of a product: per factor its coordinate, slot and frame offsets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FactorLayout {
    pub coord_offset: usize,
    pub dim: usize,
    pub slot_offset: usize,
    pub order: usize,
    pub frame_offset: usize,
    pub frame_size: usize,
}

pub fn product_layout(factors: &[PolyPoissonStructure]) -> Vec<FactorLayout> {
    let (mut c, mut s, mut f) = (0, 0, 0);
    factors
        .iter()
        .map(|p| {
            let l = FactorLayout {
                coord_offset: c,
                dim: p.dim(),
                slot_offset: s,
                order: p.order(),
                frame_offset: f,
                frame_size: p.frame_size(),
            };
            c += p.dim();
            s += p.order();
            f += p.frame_size();
            l
        })
        .collect()
}

/// Embeds per-factor frame matrices into the product frame.
fn embed_frames(layout: &[FactorLayout], n: usize, r: usize, k: usize, mats: &[DMatrix<f64>]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(r * n, k);
    for (l, m) in layout.iter().zip(mats) {
        for i in 0..l.order {
            for j in 0..l.dim {
                for a in 0..l.frame_size {
                    out[((l.slot_offset + i) * n + l.coord_offset + j, l.frame_offset + a)] = m[(i * l.dim + j, a)];
                }
            }
        }
    }
    out
}

fn embed_anchors(layout: &[FactorLayout], n: usize, k: usize, mats: &[DMatrix<f64>]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(n, k);
    for (l, m) in layout.iter().zip(mats) {
        out.view_mut((l.coord_offset, l.frame_offset), (l.dim, l.frame_size)).copy_from(m);
    }
    out
}

/// Product of structures, `(S, P) = (S_1 ⊕ ... , P_1 ⊕ ...)`, of order
/// `r_1 + ... + r_k`.
pub fn product(factors: &[PolyPoissonStructure]) -> Result<PolyPoissonStructure> {
    if factors.is_empty() {
        return Err(Error::InvalidInput("product of no structures".into()));
    }
    let layout = product_layout(factors);
    let last = layout[layout.len() - 1];
    let n = last.coord_offset + last.dim;
    let r = last.slot_offset + last.order;
    let k = last.frame_offset + last.frame_size;
    let charts: Vec<&Chart> = factors.iter().map(|f| &f.chart).collect();
    let chart = Chart::product(&charts)?;
    let analytic = factors.iter().all(|f| f.has_analytic_derivatives() && f.mode == DerivMode::Analytic);

    let local = |l: &FactorLayout, x: &DVector<f64>| x.rows(l.coord_offset, l.dim).into_owned();
    let (fs, lay) = (factors.to_vec(), layout.clone());
    let mut frame = MatrixField::new(r * n, k, move |x| {
        let mats: Vec<DMatrix<f64>> = fs.iter().zip(&lay).map(|(f, l)| f.frame_at(&local(l, x))).collect();
        embed_frames(&lay, n, r, k, &mats)
    });
    let (fs, lay) = (factors.to_vec(), layout.clone());
    let mut anchor = MatrixField::new(n, k, move |x| {
        let mats: Vec<DMatrix<f64>> = fs.iter().zip(&lay).map(|(f, l)| f.anchor_at(&local(l, x))).collect();
        embed_anchors(&lay, n, k, &mats)
    });
    if analytic {
        // d/dx_c only sees the factor owning coordinate c.
        let partials = move |fs: &[PolyPoissonStructure], lay: &[FactorLayout], x: &DVector<f64>, is_frame: bool| {
            let mut out = Vec::with_capacity(n);
            for (f, l) in fs.iter().zip(lay) {
                let xl = local(l, x);
                let d = if is_frame { f.frame_partials(&xl) } else { f.anchor_partials(&xl) };
                for dk in d {
                    let mats: Vec<DMatrix<f64>> = fs
                        .iter()
                        .zip(lay)
                        .map(|(g, lg)| {
                            if lg == l {
                                dk.clone()
                            } else if is_frame {
                                DMatrix::zeros(g.order() * g.dim(), g.frame_size())
                            } else {
                                DMatrix::zeros(g.dim(), g.frame_size())
                            }
                        })
                        .collect();
                    out.push(if is_frame {
                        embed_frames(lay, n, r, k, &mats)
                    } else {
                        embed_anchors(lay, n, k, &mats)
                    });
                }
            }
            out
        };
        let (fs, lay) = (factors.to_vec(), layout.clone());
        frame = frame.with_partials(move |x| partials(&fs, &lay, x, true));
        let (fs, lay) = (factors.to_vec(), layout);
        anchor = anchor.with_partials(move |x| partials(&fs, &lay, x, false));
    }
    let name = factors.iter().map(|f| f.name.as_str()).collect::<Vec<_>>().join("*");
    Ok(PolyPoissonStructure::new(&name, chart, r, frame, anchor)?.with_kind(StructureKind::Product(factors.to_vec())))
}

/// Constant structure on `R^k × R^m`: `S = (T*R^k ⊗ R^r) ⊕ S_omega`,
/// `P = 0 ⊕ P_omega`, for a constant poly-symplectic `omega` on `R^m`.
pub fn constant(k: usize, omega: &PolyForm, chart: Chart) -> Result<PolyPoissonStructure> {
    let m = omega.dim();
    let r = omega.order();
    let n = k + m;
    if chart.dim() != n {
        return Err(Error::InvalidInput(format!("constant structure needs a chart of dimension {n}")));
    }
    if m > 0 && !omega.is_nondegenerate() {
        return Err(Error::DegenerateForm {
            kernel_dim: omega.common_kernel().dim(),
        });
    }
    let kk = k * r + m;
    let mut frame = DMatrix::zeros(r * n, kk);
    let mut anchor = DMatrix::zeros(n, kk);
    for i in 0..r {
        for j in 0..k {
            frame[(i * n + j, i * k + j)] = 1.0;
        }
    }
    for j in 0..m {
        let col = k * r + j;
        for (i, w) in omega.components().iter().enumerate() {
            for l in 0..m {
                frame[(i * n + k + l, col)] = w[(j, l)];
            }
        }
        anchor[(k + j, col)] = 1.0;
    }
    PolyPoissonStructure::new(
        &format!("constant-k{k}-m{m}-r{r}"),
        chart,
        r,
        MatrixField::constant(frame),
        MatrixField::constant(anchor),
    )
    .map(|s| s.with_kind(StructureKind::Constant { k }))
}

/// Linear direct-sum structure on `(g*)^r`: `sigma_u = (u, ..., u)`,
/// `P(sigma_u)(zeta) = (ad*_u zeta_1, ..., ad*_u zeta_r)`.
pub fn linear_direct_sum(g: &LieAlgebraData, r: usize, chart: Chart) -> Result<PolyPoissonStructure> {
    let d = g.dim();
    let n = r * d;
    if chart.dim() != n {
        return Err(Error::InvalidInput(format!("linear structure needs a chart of dimension {n}")));
    }
    let mut frame = DMatrix::zeros(r * n, d);
    for a in 0..d {
        for j in 0..r {
            frame[(j * n + j * d + a, a)] = 1.0;
        }
    }
    // anchor row (j d + b), column a: sum_c c^c_{ab} zeta_{j,c}
    let slopes: Vec<DMatrix<f64>> = (0..n)
        .map(|coord| {
            let (j, c) = (coord / d, coord % d);
            DMatrix::from_fn(n, d, |row, a| {
                if row / d == j {
                    g.c(c, a, row % d)
                } else {
                    0.0
                }
            })
        })
        .collect();
    let anchor = MatrixField::affine(DMatrix::zeros(n, d), slopes);
    PolyPoissonStructure::new(
        &format!("linear-direct-sum-{}-r{r}", g.name()),
        chart,
        r,
        MatrixField::constant(frame),
        anchor,
    )
    .map(|s| s.with_kind(StructureKind::LinearDirectSum(g.clone())))
}

/// Product of `r` linear Poisson structures on `g*`, built directly: frame
/// `e_a` in block `j` of slot `j`, anchor `ad*_{e_a} zeta_j` in block `j`.
pub fn linear_product(g: &LieAlgebraData, r: usize, chart: Chart) -> Result<PolyPoissonStructure> {
    let d = g.dim();
    let n = r * d;
    if chart.dim() != n {
        return Err(Error::InvalidInput(format!("linear structure needs a chart of dimension {n}")));
    }
    let k = r * d;
    let mut frame = DMatrix::zeros(r * n, k);
    for j in 0..r {
        for a in 0..d {
            frame[(j * n + j * d + a, j * d + a)] = 1.0;
        }
    }
    let slopes: Vec<DMatrix<f64>> = (0..n)
        .map(|coord| {
            let (j, c) = (coord / d, coord % d);
            DMatrix::from_fn(n, k, |row, col| {
                if row / d == j && col / d == j {
                    g.c(c, col % d, row % d)
                } else {
                    0.0
                }
            })
        })
        .collect();
    let anchor = MatrixField::affine(DMatrix::zeros(n, k), slopes);
    PolyPoissonStructure::new(
        &format!("linear-product-{}-r{r}", g.name()),
        chart,
        r,
        MatrixField::constant(frame),
        anchor,
    )
    .map(|s| s.with_kind(StructureKind::LinearProduct(g.clone())))
}

/// Structures on `M × R` sharing the foliation by `M × {s}`. `omega` is an
/// order-`r` form on `M` whose coefficients may depend on all of `(m, s)`.
/// The extra frame elements are `(ds, ..., ds)` split per slot (`S1`),
/// repeated (`S2`) or in the first slot only (`S3`).
pub fn foliation_family(omega: &PolyFormField, variant: FoliationVariant, chart: Chart) -> Result<PolyPoissonStructure> {
    let m = omega.dim();
    let n = m + 1;
    let r = omega.order();
    if chart.dim() != n {
        return Err(Error::InvalidInput(format!("foliation family needs a chart of dimension {n}")));
    }
    let extra: Vec<Vec<usize>> = match variant {
        FoliationVariant::S1 => (0..r).map(|i| vec![i]).collect(),
        FoliationVariant::S2 => vec![(0..r).collect()],
        FoliationVariant::S3 => vec![vec![0]],
    };
    let k = m + extra.len();
    let skew: Vec<MatrixField> = omega.components().iter().map(skew_part).collect();
    let assemble = {
        let extra = extra.clone();
        move |mats: &[DMatrix<f64>], with_ds: bool| {
            let mut f = DMatrix::zeros(r * n, k);
            for (i, w) in mats.iter().enumerate() {
                for j in 0..m {
                    for l in 0..m {
                        f[(i * n + l, j)] = w[(j, l)];
                    }
                }
            }
            if with_ds {
                for (e, slots) in extra.iter().enumerate() {
                    for &i in slots {
                        f[(i * n + m, m + e)] = 1.0;
                    }
                }
            }
            f
        }
    };
    let comps = skew.clone();
    let asm = assemble.clone();
    let mut frame = MatrixField::new(r * n, k, move |x| {
        let mats: Vec<DMatrix<f64>> = comps.iter().map(|c| c.eval(x)).collect();
        asm(&mats, true)
    });
    if skew.iter().all(MatrixField::has_analytic_partials) {
        frame = frame.with_partials(move |x| {
            let d: Vec<Vec<DMatrix<f64>>> = skew.iter().map(|c| c.partials(x, 0.0, DerivMode::Analytic)).collect();
            (0..x.len())
                .map(|kk| {
                    let mats: Vec<DMatrix<f64>> = d.iter().map(|di| di[kk].clone()).collect();
                    assemble(&mats, false)
                })
                .collect()
        });
    }
    let mut anchor = DMatrix::zeros(n, k);
    for j in 0..m {
        anchor[(j, j)] = 1.0;
    }
    PolyPoissonStructure::new(
        &format!("foliation-{variant:?}").to_lowercase(),
        chart,
        r,
        frame,
        MatrixField::constant(anchor),
    )
    .map(|s| s.with_kind(StructureKind::Foliation(variant)))
}

/// Values recorded by [`non_derivation_witness`].
#[derive(Clone, Debug, PartialEq)]
pub struct LeibnizWitness {
    pub point: DVector<f64>,
    pub h_residual: f64,
    pub f_residual: f64,
    pub g_residual: f64,
    pub fg_residual: f64,
    /// `{fg, h}`.
    pub bracket_of_product: DVector<f64>,
    /// `{h, fg}`.
    pub bracket_into_product: DVector<f64>,
    /// Whether `{h, f}` and `{h, g}` are rejected as non-admissible, so the
    /// Leibniz expansion of `{h, fg}` is not available inside the bracket.
    pub factors_rejected: bool,
    /// `f {g, h} + g {f, h}` with the brackets of the non-admissible `f`, `g`
    /// taken through the least-squares projection onto `S`.
    pub leibniz_expansion: DVector<f64>,
    pub defect: f64,
}

/// The poly-symplectic structure `omega = (dx∧dy, u du∧dv)` on `R^4` with
/// coordinates `(x, y, u, v)` and `u > 0` on the chart box.
pub fn leibniz_example(chart: Chart) -> Result<PolyPoissonStructure> {
    if chart.dim() != 4 || chart.sample_box()[2].0 <= 0.0 {
        return Err(Error::InvalidInput("needs a 4-dimensional chart with u > 0".into()));
    }
    let mut w1 = DMatrix::zeros(4, 4);
    w1[(0, 1)] = 1.0;
    w1[(1, 0)] = -1.0;
    let mut du = DMatrix::zeros(4, 4);
    du[(2, 3)] = 1.0;
    du[(3, 2)] = -1.0;
    let w2 = MatrixField::affine(DMatrix::zeros(4, 4), vec![DMatrix::zeros(4, 4), DMatrix::zeros(4, 4), du, DMatrix::zeros(4, 4)]);
    let omega = PolyFormField::new(vec![MatrixField::constant(w1), w2])?;
    Ok(polysymplectic("leibniz-example", &omega, chart)?.with_name("leibniz-example"))
}

/// Exhibits that the admissible bracket is not a derivation: `h = (y, v)`
/// and `fg = (x, u)` are admissible while `f = (u, x)` and
/// `g = (x/u, u/x)` are not.
pub fn non_derivation_witness(s: &PolyPoissonStructure, x: &DVector<f64>) -> Result<LeibnizWitness> {
    let h = AdmissibleFunction::from_fn(2, |p| DVector::from_vec(vec![p[1], p[3]]));
    let f = AdmissibleFunction::from_fn(2, |p| DVector::from_vec(vec![p[2], p[0]]));
    let g = AdmissibleFunction::from_fn(2, |p| DVector::from_vec(vec![p[0] / p[2], p[2] / p[0]]));
    let fg = AdmissibleFunction::from_fn(2, |p| DVector::from_vec(vec![p[0], p[2]]));
    let bracket_of_product = admissible_bracket(s, &fg, &h, x)?;
    let bracket_into_product = admissible_bracket(s, &h, &fg, x)?;
    let rejected = |e: Result<DVector<f64>>| matches!(e, Err(Error::NotAdmissible { .. }));
    let factors_rejected = rejected(admissible_bracket(s, &h, &f, x)) && rejected(admissible_bracket(s, &h, &g, x));
    let fv = f.eval(x);
    let gv = g.eval(x);
    let leibniz_expansion =
        fv.component_mul(&projected_bracket(s, &g, &h, x)) + gv.component_mul(&projected_bracket(s, &f, &h, x));
    let defect = linalg::max_abs_vec(&(&bracket_of_product - &leibniz_expansion));
    Ok(LeibnizWitness {
        point: x.clone(),
        h_residual: admissibility(s, &h, x).1,
        f_residual: admissibility(s, &f, x).1,
        g_residual: admissibility(s, &g, x).1,
        fg_residual: admissibility(s, &fg, x).1,
        bracket_of_product,
        bracket_into_product,
        factors_rejected,
        leibniz_expansion,
        defect,
    })
}

/// A random invertible `K x K` matrix, well conditioned.
pub fn random_respan_matrix(k: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let t = DMatrix::from_fn(k, k, |i, j| f64::from(u8::from(i == j)) + 0.5 * rng.random_range(-1.0..1.0));
        let sv = linalg::singular_values(&t);
        if sv.last().copied().unwrap_or(0.0) > 0.2 {
            return t;
        }
    }
}

pub fn unit_vector(n: usize, j: usize) -> DVector<f64> {
    unit(n, j)
}

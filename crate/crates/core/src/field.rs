//! Evaluable smooth data on a coordinate chart.
//!
//! A [`MatrixField`] is a matrix-valued function of the chart coordinates
//! with an optional analytic derivative. When the analytic derivative is
//! absent, partial derivatives fall back to central differences with the
//! chart's step.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::polyspace::PolyForm;

pub type EvalFn = Arc<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;
/// Returns `[d/dx_0, ..., d/dx_{n-1}]` of the field.
pub type PartialsFn = Arc<dyn Fn(&DVector<f64>) -> Vec<DMatrix<f64>> + Send + Sync>;

/// How partial derivatives are obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum DerivMode {
    /// Analytic partials where installed, central differences elsewhere.
    #[default]
    Analytic,
    /// Central differences everywhere.
    Numeric,
}

#[derive(Clone)]
pub struct MatrixField {
    rows: usize,
    cols: usize,
    eval: EvalFn,
    partials: Option<PartialsFn>,
}

impl std::fmt::Debug for MatrixField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MatrixField")
            .field("rows", &self.rows)
            .field("cols", &self.cols)
            .field("analytic", &self.partials.is_some())
            .finish()
    }
}

impl MatrixField {
    pub fn new(
        rows: usize,
        cols: usize,
        eval: impl Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        MatrixField {
            rows,
            cols,
            eval: Arc::new(eval),
            partials: None,
        }
    }

    pub fn with_partials(
        mut self,
        partials: impl Fn(&DVector<f64>) -> Vec<DMatrix<f64>> + Send + Sync + 'static,
    ) -> Self {
        self.partials = Some(Arc::new(partials));
        self
    }

    /// A constant field; its partials are exactly zero.
    pub fn constant(value: DMatrix<f64>) -> Self {
        let (rows, cols) = value.shape();
        let v = value.clone();
        MatrixField::new(rows, cols, move |_| v.clone()).with_partials(move |x| {
            vec![DMatrix::zeros(rows, cols); x.len()]
        })
    }

    /// A field that is affine in the coordinates: `x -> base + sum_k x_k slopes[k]`.
    pub fn affine(base: DMatrix<f64>, slopes: Vec<DMatrix<f64>>) -> Self {
        let (rows, cols) = base.shape();
        let s = slopes.clone();
        MatrixField::new(rows, cols, move |x| {
            let mut m = base.clone();
            for (k, slope) in s.iter().enumerate() {
                m += slope * x[k];
            }
            m
        })
        .with_partials(move |_| slopes.clone())
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn has_analytic_partials(&self) -> bool {
        self.partials.is_some()
    }

    pub fn eval(&self, x: &DVector<f64>) -> DMatrix<f64> {
        (self.eval)(x)
    }

    pub fn partials(&self, x: &DVector<f64>, h: f64, mode: DerivMode) -> Vec<DMatrix<f64>> {
        match (&self.partials, mode) {
            (Some(d), DerivMode::Analytic) => d(x),
            _ => self.partials_fd(x, h),
        }
    }

    pub fn partials_fd(&self, x: &DVector<f64>, h: f64) -> Vec<DMatrix<f64>> {
        (0..x.len())
            .map(|k| {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[k] += h;
                xm[k] -= h;
                (self.eval(&xp) - self.eval(&xm)) / (2.0 * h)
            })
            .collect()
    }

    /// Restricts a field on `R^m` to the coordinates `offset..offset + m` of a
    /// larger chart of dimension `ambient`.
    pub fn pull_from_block(&self, ambient: usize, offset: usize, m: usize) -> MatrixField {
        let inner = self.clone();
        let inner_d = self.clone();
        let (rows, cols) = self.shape();
        let analytic = self.has_analytic_partials();
        let field = MatrixField::new(rows, cols, move |x| inner.eval(&x.rows(offset, m).into_owned()));
        if analytic {
            field.with_partials(move |x| {
                let local = x.rows(offset, m).into_owned();
                let d = inner_d.partials(&local, 0.0, DerivMode::Analytic);
                let mut out = vec![DMatrix::zeros(rows, cols); ambient];
                for (k, dk) in d.into_iter().enumerate() {
                    out[offset + k] = dk;
                }
                out
            })
        } else {
            field
        }
    }
}

/// A point-dependent poly-form.
#[derive(Clone, Debug)]
pub struct PolyFormField {
    dim: usize,
    components: Vec<MatrixField>,
}

impl PolyFormField {
    pub fn new(components: Vec<MatrixField>) -> Result<Self> {
        let Some(first) = components.first() else {
            return Err(Error::InvalidInput("poly-form field needs a component".into()));
        };
        let dim = first.shape().0;
        if components.iter().any(|c| c.shape() != (dim, dim)) {
            return Err(Error::InvalidInput("components must be square of equal size".into()));
        }
        Ok(PolyFormField { dim, components })
    }

    pub fn constant(form: &PolyForm) -> Self {
        PolyFormField {
            dim: form.dim(),
            components: form
                .components()
                .iter()
                .map(|c| MatrixField::constant(c.clone()))
                .collect(),
        }
    }

    pub fn order(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[MatrixField] {
        &self.components
    }

    pub fn eval(&self, x: &DVector<f64>) -> Result<PolyForm> {
        PolyForm::new(self.components.iter().map(|c| c.eval(x)).collect())
    }

    pub fn has_analytic_partials(&self) -> bool {
        self.components.iter().all(MatrixField::has_analytic_partials)
    }

    /// `max |d omega_i|` at `x`, using
    /// `(d omega)_{jkl} = d_j omega_{kl} + d_k omega_{lj} + d_l omega_{jk}`.
    pub fn exterior_derivative_norm(&self, x: &DVector<f64>, h: f64, mode: DerivMode) -> f64 {
        let n = self.dim;
        let mut worst = 0.0_f64;
        for c in &self.components {
            let d = c.partials(x, h, mode);
            let skew = |j: usize, k: usize, l: usize| 0.5 * (d[j][(k, l)] - d[j][(l, k)]);
            for j in 0..n {
                for k in (j + 1)..n {
                    for l in (k + 1)..n {
                        let v = skew(j, k, l) + skew(k, l, j) + skew(l, j, k);
                        worst = worst.max(v.abs());
                    }
                }
            }
        }
        worst
    }
}

/// A coordinate chart: a box in `R^n` used for sampling and a
/// finite-difference step.
#[derive(Clone, Debug, PartialEq)]
pub struct Chart {
    sample_box: Vec<(f64, f64)>,
    fd_step: f64,
}

pub const DEFAULT_FD_STEP: f64 = 1e-5;

impl Chart {
    pub fn new(sample_box: Vec<(f64, f64)>) -> Result<Self> {
        if sample_box.is_empty() {
            return Err(Error::InvalidInput("chart dimension must be positive".into()));
        }
        if let Some((i, _)) = sample_box.iter().enumerate().find(|(_, (lo, hi))| !(lo < hi)) {
            return Err(Error::InvalidInput(format!("interval {i} is degenerate")));
        }
        Ok(Chart {
            sample_box,
            fd_step: DEFAULT_FD_STEP,
        })
    }

    /// The cube `[lo, hi]^n`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Chart::new(vec![(lo, hi); dim])
    }

    pub fn with_fd_step(mut self, h: f64) -> Self {
        self.fd_step = h;
        self
    }

    pub fn dim(&self) -> usize {
        self.sample_box.len()
    }

    pub fn fd_step(&self) -> f64 {
        self.fd_step
    }

    pub fn sample_box(&self) -> &[(f64, f64)] {
        &self.sample_box
    }

    /// Cartesian product of charts.
    pub fn product(charts: &[&Chart]) -> Result<Chart> {
        let sample_box = charts.iter().flat_map(|c| c.sample_box.iter().copied()).collect();
        let h = charts.iter().map(|c| c.fd_step).fold(f64::INFINITY, f64::min);
        Ok(Chart::new(sample_box)?.with_fd_step(if h.is_finite() { h } else { DEFAULT_FD_STEP }))
    }

    pub fn check_point(&self, x: &DVector<f64>, margin: f64) -> Result<()> {
        for (k, &(lo, hi)) in self.sample_box.iter().enumerate() {
            let v = x[k];
            if v - margin < lo || v + margin > hi || !v.is_finite() {
                return Err(Error::OutOfBox {
                    coordinate: k,
                    value: v,
                    lo,
                    hi,
                });
            }
        }
        Ok(())
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        self.check_point(x, 0.0).is_ok()
    }

    /// `count` uniform points in the box shrunk by `margin` on every side.
    pub fn sample_points(&self, count: usize, seed: u64, margin: f64) -> Vec<DVector<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                DVector::from_iterator(
                    self.dim(),
                    self.sample_box.iter().map(|&(lo, hi)| {
                        let (a, b) = (lo + margin, hi - margin);
                        if a < b {
                            rng.random_range(a..b)
                        } else {
                            0.5 * (lo + hi)
                        }
                    }),
                )
            })
            .collect()
    }

    pub fn center(&self) -> DVector<f64> {
        DVector::from_iterator(self.dim(), self.sample_box.iter().map(|&(lo, hi)| 0.5 * (lo + hi)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_and_numeric_partials_agree() {
        let f = MatrixField::new(1, 2, |x| DMatrix::from_row_slice(1, 2, &[x[0] * x[1], x[0].sin()]))
            .with_partials(|x| {
                vec![
                    DMatrix::from_row_slice(1, 2, &[x[1], x[0].cos()]),
                    DMatrix::from_row_slice(1, 2, &[x[0], 0.0]),
                ]
            });
        let x = DVector::from_vec(vec![0.3, -0.7]);
        let a = f.partials(&x, 1e-5, DerivMode::Analytic);
        let n = f.partials(&x, 1e-5, DerivMode::Numeric);
        for (da, dn) in a.iter().zip(&n) {
            assert!((da - dn).abs().max() < 1e-9);
        }
    }

    #[test]
    fn closed_and_non_closed_forms() {
        // x dy∧dz is not closed; dx∧dy is.
        let mut base = DMatrix::zeros(3, 3);
        base[(0, 1)] = 1.0;
        base[(1, 0)] = -1.0;
        let closed = PolyFormField::new(vec![MatrixField::constant(base)]).unwrap();
        let open = PolyFormField::new(vec![MatrixField::new(3, 3, |x| {
            let mut m = DMatrix::zeros(3, 3);
            m[(1, 2)] = x[0];
            m[(2, 1)] = -x[0];
            m
        })])
        .unwrap();
        let x = DVector::from_vec(vec![0.1, 0.2, 0.3]);
        assert_eq!(closed.exterior_derivative_norm(&x, 1e-5, DerivMode::Analytic), 0.0);
        assert!((open.exterior_derivative_norm(&x, 1e-5, DerivMode::Numeric) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn chart_rejects_degenerate_interval_and_samples_inside() {
        assert!(Chart::new(vec![(0.0, 0.0)]).is_err());
        let c = Chart::cube(3, -1.0, 1.0).unwrap();
        for p in c.sample_points(50, 1, 0.1) {
            assert!(c.check_point(&p, 0.1).is_ok());
        }
        assert!(matches!(
            c.check_point(&DVector::from_vec(vec![0.0, 2.0, 0.0]), 0.0),
            Err(Error::OutOfBox { coordinate: 1, .. })
        ));
    }
}

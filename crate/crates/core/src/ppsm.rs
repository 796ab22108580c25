//! Discretized boundary theory of the poly-Poisson sigma model.
//!
//! A cotangent path is stored as samples `(t_k, X_k, lambda_k)` with
//! `eta(t_k) = sum_a lambda_k^a sigma_a(X_k)`. Times are explicit so that a
//! concatenation keeps both halves exactly: the junction time appears twice,
//! once with each half's coefficients. Maximal runs of strictly increasing
//! times are called segments; every finite-difference stencil stays inside
//! one segment.

use std::fmt::Write as _;
use std::ops::Range;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg;
use crate::polyspace::CovectorTuple;
use crate::structures::{self as st, PolyPoissonStructure, StructureKind};

/// On-shell threshold for the path residual.
pub const TAU_PATH: f64 = 1e-7;
/// Largest endpoint gap accepted by `concatenate`.
pub const TAU_GLUE: f64 = 1e-7;
pub const DEFAULT_N: usize = 1000;
const STENCIL: usize = 5;

/// `N + 1` uniform times on `[0, 1]`.
pub fn uniform_times(n: usize) -> Vec<f64> {
    (0..=n).map(|k| k as f64 / n as f64).collect()
}

fn segments(times: &[f64]) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for k in 1..times.len() {
        if times[k] == times[k - 1] {
            out.push(start..k);
            start = k;
        }
    }
    out.push(start..times.len());
    out
}

/// Weights of the first derivative at `x0` on the given nodes (Fornberg).
fn derivative_weights(nodes: &[f64], x0: f64) -> Vec<f64> {
    let m = nodes.len();
    let mut c = vec![[0.0_f64; 2]; m];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - x0;
    for i in 1..m {
        let mn = i.min(1);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] *= c4 / c3;
        }
        c1 = c2;
    }
    c.iter().map(|w| w[1]).collect()
}

/// Lagrange interpolation weights at `t`.
fn interpolation_weights(nodes: &[f64], t: f64) -> Vec<f64> {
    (0..nodes.len())
        .map(|i| {
            nodes
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &tj)| (t - tj) / (nodes[i] - tj))
                .product()
        })
        .collect()
}

fn window(seg: &Range<usize>, center: usize, width: usize) -> Range<usize> {
    let w = width.min(seg.len());
    let lo = center.saturating_sub(w / 2).max(seg.start).min(seg.end - w);
    lo..lo + w
}

/// Time derivative of sampled values, fourth order inside each segment.
pub fn time_derivative(times: &[f64], values: &[DVector<f64>]) -> Vec<DVector<f64>> {
    let mut out = vec![DVector::zeros(values.first().map_or(0, |v| v.len())); values.len()];
    for seg in segments(times) {
        if seg.len() < 2 {
            continue;
        }
        for k in seg.clone() {
            let win = window(&seg, k, STENCIL);
            let w = derivative_weights(&times[win.clone()], times[k]);
            // differences against the center make constants exact
            let mut d = DVector::zeros(values[k].len());
            for (wi, idx) in w.iter().zip(win) {
                if idx != k {
                    d += (&values[idx] - &values[k]) * *wi;
                }
            }
            out[k] = d;
        }
    }
    out
}

/// Value at the midpoint of `[t_k, t_{k+1}]` by cubic interpolation inside
/// the segment.
fn midpoint(times: &[f64], values: &[DVector<f64>], seg: &Range<usize>, k: usize) -> DVector<f64> {
    let lo = k.saturating_sub(1).max(seg.start).min(seg.end.saturating_sub(4).max(seg.start));
    let hi = (lo + 4).min(seg.end);
    let tm = 0.5 * (times[k] + times[k + 1]);
    let w = interpolation_weights(&times[lo..hi], tm);
    let mut out = DVector::zeros(values[k].len());
    for (wi, idx) in w.iter().zip(lo..hi) {
        out += &values[idx] * *wi;
    }
    out
}

fn trapezoid(times: &[f64], values: &[DVector<f64>]) -> DVector<f64> {
    let mut acc = DVector::zeros(values.first().map_or(0, |v| v.len()));
    for k in 0..times.len().saturating_sub(1) {
        let dt = times[k + 1] - times[k];
        if dt > 0.0 {
            acc += (&values[k] + &values[k + 1]) * (0.5 * dt);
        }
    }
    acc
}

#[derive(Clone, Debug)]
pub struct CotangentPath {
    structure: Arc<PolyPoissonStructure>,
    times: Vec<f64>,
    x: Vec<DVector<f64>>,
    lambda: Vec<DVector<f64>>,
    on_shell: bool,
    reprojected: bool,
}

impl CotangentPath {
    /// Checks shapes and times (nondecreasing, from 0 to 1, no time more
    /// than twice). The on-shell flag is set from the residual.
    pub fn new(
        structure: Arc<PolyPoissonStructure>,
        times: Vec<f64>,
        x: Vec<DVector<f64>>,
        lambda: Vec<DVector<f64>>,
    ) -> Result<Self> {
        let (n, k) = (structure.dim(), structure.frame_size());
        if times.len() < 2 || x.len() != times.len() || lambda.len() != times.len() {
            return Err(Error::InvalidInput("a path needs matching samples at two or more times".into()));
        }
        if x.iter().any(|v| v.len() != n) || lambda.iter().any(|v| v.len() != k) {
            return Err(Error::InvalidInput(format!("expected points in R^{n} and coefficients in R^{k}")));
        }
        if times[0] != 0.0 || *times.last().unwrap() != 1.0 {
            return Err(Error::InvalidInput("path times must run from 0 to 1".into()));
        }
        for w in times.windows(3) {
            if w[1] < w[0] || w[2] < w[1] || (w[0] == w[1] && w[1] == w[2]) {
                return Err(Error::InvalidInput("path times must be nondecreasing, each at most twice".into()));
            }
        }
        if segments(&times).iter().any(|s| s.len() < 2) {
            return Err(Error::InvalidInput("every segment needs at least two times".into()));
        }
        let mut p = CotangentPath {
            structure,
            times,
            x,
            lambda,
            on_shell: false,
            reprojected: false,
        };
        p.on_shell = p.residual() < TAU_PATH;
        Ok(p)
    }

    pub fn structure(&self) -> &PolyPoissonStructure {
        &self.structure
    }

    pub fn structure_arc(&self) -> &Arc<PolyPoissonStructure> {
        &self.structure
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn points(&self) -> &[DVector<f64>] {
        &self.x
    }

    pub fn coefficients(&self) -> &[DVector<f64>] {
        &self.lambda
    }

    pub fn nodes(&self) -> usize {
        self.times.len()
    }

    pub fn is_on_shell(&self) -> bool {
        self.on_shell
    }

    /// Whether a gauge flow re-solved the path from its flowed coefficients.
    pub fn was_reprojected(&self) -> bool {
        self.reprojected
    }

    /// `eta(t_k)` as a covector tuple.
    pub fn eta(&self, k: usize) -> CovectorTuple {
        let s = &self.structure;
        CovectorTuple::from_flat(s.order(), s.dim(), &s.tuple_of(&self.x[k], &self.lambda[k]))
    }

    /// `|dX/dt + P_X(eta)|` at every node, with fourth-order stencils.
    pub fn node_residuals(&self) -> Vec<f64> {
        let dx = time_derivative(&self.times, &self.x);
        dx.iter()
            .enumerate()
            .map(|(k, d)| (d + self.structure.anchor_of(&self.x[k], &self.lambda[k])).norm())
            .collect()
    }

    /// `max_k |dX/dt + P_X(eta)|`.
    pub fn residual(&self) -> f64 {
        self.node_residuals().into_iter().fold(0.0, f64::max)
    }
}

/// Tangent vector to the path space, in frame coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct PathVariation {
    pub dx: Vec<DVector<f64>>,
    pub dlambda: Vec<DVector<f64>>,
}

impl PathVariation {
    pub fn zeros(p: &CotangentPath) -> Self {
        let s = p.structure();
        PathVariation {
            dx: vec![DVector::zeros(s.dim()); p.nodes()],
            dlambda: vec![DVector::zeros(s.frame_size()); p.nodes()],
        }
    }

    /// Smooth random variation built from a few Fourier modes.
    pub fn random(p: &CotangentPath, seed: u64, scale: f64) -> Self {
        let s = p.structure();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut series = |len: usize| {
            let coef: Vec<(f64, f64, f64)> = (0..len * 3)
                .map(|_| (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(0.0..1.0)))
                .collect();
            move |t: f64| {
                DVector::from_fn(len, |i, _| {
                    (0..3)
                        .map(|m| {
                            let (a, b, _) = coef[3 * i + m];
                            let w = std::f64::consts::PI * (m + 1) as f64;
                            a * (w * t).sin() + b * (w * t).cos()
                        })
                        .sum::<f64>()
                        * scale
                })
            }
        };
        let fx = series(s.dim());
        let fl = series(s.frame_size());
        PathVariation {
            dx: p.times().iter().map(|&t| fx(t)).collect(),
            dlambda: p.times().iter().map(|&t| fl(t)).collect(),
        }
    }

    /// Variation along the concatenation of two paths; coefficient
    /// variations double like the coefficients do.
    pub fn concatenate(a: &PathVariation, b: &PathVariation) -> Self {
        PathVariation {
            dx: a.dx.iter().chain(&b.dx).cloned().collect(),
            dlambda: a.dlambda.iter().chain(&b.dlambda).map(|v| v * 2.0).collect(),
        }
    }

    fn check(&self, p: &CotangentPath) -> Result<()> {
        if self.dx.len() != p.nodes() || self.dlambda.len() != p.nodes() {
            return Err(Error::InvalidInput("variation is not grid-matched to the path".into()));
        }
        Ok(())
    }

    fn displaced(&self, p: &CotangentPath, eps: f64) -> CotangentPath {
        CotangentPath {
            structure: p.structure.clone(),
            times: p.times.clone(),
            x: p.x.iter().zip(&self.dx).map(|(x, d)| x + d * eps).collect(),
            lambda: p.lambda.iter().zip(&self.dlambda).map(|(l, d)| l + d * eps).collect(),
            on_shell: false,
            reprojected: false,
        }
    }
}

/// Integrates `dX/dt = -sum_a lambda_a(t) v_a(X)` with classical RK4 on the
/// given times; midpoint coefficients come from cubic interpolation inside
/// each segment.
pub fn solve_on_grid(
    structure: Arc<PolyPoissonStructure>,
    x0: &DVector<f64>,
    times: Vec<f64>,
    lambda: Vec<DVector<f64>>,
) -> Result<CotangentPath> {
    if lambda.len() != times.len() {
        return Err(Error::InvalidInput("one coefficient vector per time".into()));
    }
    let s = structure.clone();
    let chart = s.chart();
    let out_of_box = |x: &DVector<f64>, t: f64| {
        if chart.check_point(x, 0.0).is_err() {
            Err(Error::LeftBox { t })
        } else {
            Ok(())
        }
    };
    out_of_box(x0, 0.0)?;
    let mut x = Vec::with_capacity(times.len());
    x.push(x0.clone());
    for seg in segments(&times) {
        if seg.start > 0 {
            let last = x[seg.start - 1].clone();
            x.push(last);
        }
        for k in seg.start..seg.end - 1 {
            let h = times[k + 1] - times[k];
            let lm = midpoint(&times, &lambda, &seg, k);
            let f = |y: &DVector<f64>, l: &DVector<f64>| -s.anchor_of(y, l);
            let xk = &x[k];
            let k1 = f(xk, &lambda[k]);
            let y2 = xk + &k1 * (0.5 * h);
            out_of_box(&y2, times[k])?;
            let k2 = f(&y2, &lm);
            let y3 = xk + &k2 * (0.5 * h);
            out_of_box(&y3, times[k])?;
            let k3 = f(&y3, &lm);
            let y4 = xk + &k3 * h;
            out_of_box(&y4, times[k])?;
            let k4 = f(&y4, &lambda[k + 1]);
            let next = xk + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            out_of_box(&next, times[k + 1])?;
            x.push(next);
        }
    }
    CotangentPath::new(structure, times, x, lambda)
}

/// `solve_on_grid` on `N + 1` uniform times with `lambda(t)` sampled there.
pub fn solve_a_path(
    structure: Arc<PolyPoissonStructure>,
    x0: &DVector<f64>,
    n: usize,
    lambda: impl Fn(f64) -> DVector<f64>,
) -> Result<CotangentPath> {
    let times = uniform_times(n);
    let samples = times.iter().map(|&t| lambda(t)).collect();
    solve_on_grid(structure, x0, times, samples)
}

/// `delta eta = F(X) delta lambda + (dF(X)[delta X]) lambda`, flattened.
fn eta_variation(s: &PolyPoissonStructure, x: &DVector<f64>, lambda: &DVector<f64>, dx: &DVector<f64>, dl: &DVector<f64>) -> DVector<f64> {
    let f = s.frame_at(x);
    let mut out = &f * dl;
    if dx.iter().any(|v| *v != 0.0) && lambda.iter().any(|v| *v != 0.0) {
        for (j, pj) in s.frame_partials(x).iter().enumerate() {
            if dx[j] != 0.0 {
                out += pj * lambda * dx[j];
            }
        }
    }
    out
}

/// The weak poly-symplectic pairing
/// `int_0^1 (<delta_2 eta^i, delta_1 X> - <delta_1 eta^i, delta_2 X>) dt`,
/// one component per slot, by the trapezoidal rule.
pub fn pairing(p: &CotangentPath, v1: &PathVariation, v2: &PathVariation) -> Result<DVector<f64>> {
    v1.check(p)?;
    v2.check(p)?;
    let s = p.structure();
    let (n, r) = (s.dim(), s.order());
    let integrand: Vec<DVector<f64>> = (0..p.nodes())
        .map(|k| {
            let e1 = eta_variation(s, &p.x[k], &p.lambda[k], &v1.dx[k], &v1.dlambda[k]);
            let e2 = eta_variation(s, &p.x[k], &p.lambda[k], &v2.dx[k], &v2.dlambda[k]);
            DVector::from_fn(r, |i, _| e2.rows(i * n, n).dot(&v1.dx[k]) - e1.rows(i * n, n).dot(&v2.dx[k]))
        })
        .collect();
    Ok(trapezoid(&p.times, &integrand))
}

/// A gauge parameter: frame coefficients `mu_k` on the path grid, zero at
/// both ends.
#[derive(Clone, Debug, PartialEq)]
pub struct GaugeParameter {
    mu: Vec<DVector<f64>>,
}

impl GaugeParameter {
    pub fn new(mu: Vec<DVector<f64>>) -> Result<Self> {
        let ends = [mu.first(), mu.last()];
        if ends.iter().any(|m| m.is_none_or(|v| v.iter().any(|c| *c != 0.0))) {
            return Err(Error::InvalidInput("gauge parameters vanish at both ends".into()));
        }
        Ok(GaugeParameter { mu })
    }

    pub fn zero(p: &CotangentPath) -> Self {
        GaugeParameter {
            mu: vec![DVector::zeros(p.structure().frame_size()); p.nodes()],
        }
    }

    /// Samples `f` on the grid of `p`; the end values are set to zero.
    pub fn from_fn(p: &CotangentPath, f: impl Fn(f64) -> DVector<f64>) -> Self {
        let k = p.structure().frame_size();
        let last = p.nodes() - 1;
        let mu = p
            .times()
            .iter()
            .enumerate()
            .map(|(i, &t)| if i == 0 || i == last { DVector::zeros(k) } else { f(t) })
            .collect();
        GaugeParameter { mu }
    }

    /// `mu(t) = sum_m c_m sin(m pi t)` with random `c_m` in `[-amp, amp]`.
    pub fn random(p: &CotangentPath, seed: u64, amplitude: f64) -> Self {
        let k = p.structure().frame_size();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coef: Vec<DVector<f64>> = (0..3)
            .map(|_| DVector::from_fn(k, |_, _| rng.random_range(-amplitude..amplitude)))
            .collect();
        GaugeParameter::from_fn(p, |t| {
            coef.iter()
                .enumerate()
                .fold(DVector::zeros(k), |acc, (m, c)| acc + c * (std::f64::consts::PI * (m + 1) as f64 * t).sin())
        })
    }

    pub fn samples(&self) -> &[DVector<f64>] {
        &self.mu
    }

    fn check(&self, p: &CotangentPath) -> Result<()> {
        if self.mu.len() != p.nodes() || self.mu.iter().any(|m| m.len() != p.structure().frame_size()) {
            return Err(Error::InvalidInput("gauge parameter is not grid-matched to the path".into()));
        }
        Ok(())
    }
}

/// `H_i(beta) = int_0^1 beta^i(dX/dt + P_X(eta)) dt`, zero on on-shell paths.
pub fn moment_map(p: &CotangentPath, beta: &GaugeParameter) -> Result<DVector<f64>> {
    beta.check(p)?;
    let s = p.structure();
    let (n, r) = (s.dim(), s.order());
    let dx = time_derivative(&p.times, &p.x);
    let integrand: Vec<DVector<f64>> = (0..p.nodes())
        .map(|k| {
            let b = s.tuple_of(&p.x[k], &beta.mu[k]);
            let e = &dx[k] + s.anchor_of(&p.x[k], &p.lambda[k]);
            DVector::from_fn(r, |i, _| b.rows(i * n, n).dot(&e))
        })
        .collect();
    Ok(trapezoid(&p.times, &integrand))
}

fn gauge_field_at(
    s: &PolyPoissonStructure,
    x: &[DVector<f64>],
    lambda: &[DVector<f64>],
    mu: &[DVector<f64>],
    dmu: &[DVector<f64>],
) -> Result<PathVariation> {
    let mut dx = Vec::with_capacity(x.len());
    let mut dl = Vec::with_capacity(x.len());
    for k in 0..x.len() {
        dx.push(-s.anchor_of(&x[k], &mu[k]));
        if mu[k].iter().all(|v| *v == 0.0) || lambda[k].iter().all(|v| *v == 0.0) {
            dl.push(dmu[k].clone());
        } else {
            let c = st::structure_functions(s, &x[k])?;
            dl.push(&dmu[k] + c.apply(&mu[k], &lambda[k]));
        }
    }
    Ok(PathVariation { dx, dlambda: dl })
}

/// Infinitesimal gauge transformation in frame coordinates:
/// `delta X = -P_X(mu)`, `delta lambda^c = dmu^c/dt + sum C^c_{ab} mu^a lambda^b`.
pub fn gauge_vector_field(p: &CotangentPath, beta: &GaugeParameter) -> Result<PathVariation> {
    beta.check(p)?;
    let dmu = time_derivative(&p.times, &beta.mu);
    gauge_field_at(p.structure(), &p.x, &p.lambda, &beta.mu, &dmu)
}

/// RK4 in flow time of the gauge vector field. If the flowed path has
/// residual above `TAU_PATH` it is re-solved from `X(0)` with the flowed
/// coefficients and marked as reprojected.
pub fn gauge_flow(p: &CotangentPath, beta: &GaugeParameter, flow_time: f64, steps: usize) -> Result<CotangentPath> {
    beta.check(p)?;
    let s = p.structure();
    let dmu = time_derivative(&p.times, &beta.mu);
    let h = flow_time / steps.max(1) as f64;
    let mut x = p.x.clone();
    let mut l = p.lambda.clone();
    let axpy = |a: &[DVector<f64>], b: &[DVector<f64>], c: f64| -> Vec<DVector<f64>> {
        a.iter().zip(b).map(|(u, v)| u + v * c).collect()
    };
    for step in 0..steps.max(1) {
        let k1 = gauge_field_at(s, &x, &l, &beta.mu, &dmu)?;
        let k2 = gauge_field_at(s, &axpy(&x, &k1.dx, h / 2.0), &axpy(&l, &k1.dlambda, h / 2.0), &beta.mu, &dmu)?;
        let k3 = gauge_field_at(s, &axpy(&x, &k2.dx, h / 2.0), &axpy(&l, &k2.dlambda, h / 2.0), &beta.mu, &dmu)?;
        let k4 = gauge_field_at(s, &axpy(&x, &k3.dx, h), &axpy(&l, &k3.dlambda, h), &beta.mu, &dmu)?;
        for k in 0..x.len() {
            x[k] += (&k1.dx[k] + &k2.dx[k] * 2.0 + &k3.dx[k] * 2.0 + &k4.dx[k]) * (h / 6.0);
            l[k] += (&k1.dlambda[k] + &k2.dlambda[k] * 2.0 + &k3.dlambda[k] * 2.0 + &k4.dlambda[k]) * (h / 6.0);
            if s.chart().check_point(&x[k], 0.0).is_err() {
                return Err(Error::LeftBox { t: (step + 1) as f64 * h });
            }
        }
    }
    let flowed = CotangentPath::new(p.structure.clone(), p.times.clone(), x, l)?;
    if flowed.on_shell || !p.on_shell {
        return Ok(flowed);
    }
    let mut re = solve_on_grid(p.structure.clone(), &flowed.x[0], flowed.times, flowed.lambda)?;
    re.reprojected = true;
    Ok(re)
}

/// Gauge flows of one path along many parameters, in parallel.
pub fn gauge_flow_ensemble(
    p: &CotangentPath,
    betas: &[GaugeParameter],
    flow_time: f64,
    steps: usize,
) -> Result<Vec<CotangentPath>> {
    betas.par_iter().map(|b| gauge_flow(p, b, flow_time, steps)).collect()
}

pub fn source(p: &CotangentPath) -> DVector<f64> {
    p.x[0].clone()
}

pub fn target(p: &CotangentPath) -> DVector<f64> {
    p.x[p.nodes() - 1].clone()
}

/// Constant path at `x` with `lambda = 0` on `N + 1` uniform times.
pub fn unit(structure: Arc<PolyPoissonStructure>, x: &DVector<f64>, n: usize) -> Result<CotangentPath> {
    let k = structure.frame_size();
    let times = uniform_times(n);
    let m = times.len();
    CotangentPath::new(structure, times, vec![x.clone(); m], vec![DVector::zeros(k); m])
}

/// `t -> 1 - t` with `lambda` negated.
pub fn inverse(p: &CotangentPath) -> CotangentPath {
    CotangentPath {
        structure: p.structure.clone(),
        times: p.times.iter().rev().map(|t| 1.0 - t).collect(),
        x: p.x.iter().rev().cloned().collect(),
        lambda: p.lambda.iter().rev().map(|l| -l).collect(),
        on_shell: p.on_shell,
        reprojected: p.reprojected,
    }
}

/// `p` on `[0, 1/2]` followed by `q` on `[1/2, 1]`, both with doubled
/// coefficients. Requires `target(p) = source(q)` within `TAU_GLUE`.
pub fn concatenate(p: &CotangentPath, q: &CotangentPath) -> Result<CotangentPath> {
    if !Arc::ptr_eq(&p.structure, &q.structure) && p.structure.name() != q.structure.name() {
        return Err(Error::InvalidInput("paths belong to different structures".into()));
    }
    let gap = linalg::max_abs_vec(&(target(p) - source(q)));
    if gap > TAU_GLUE {
        return Err(Error::NonComposable { gap });
    }
    let times = p
        .times
        .iter()
        .map(|t| 0.5 * t)
        .chain(q.times.iter().map(|t| 0.5 + 0.5 * t))
        .collect();
    let x = p.x.iter().chain(&q.x).cloned().collect();
    let lambda = p.lambda.iter().chain(&q.lambda).map(|l| l * 2.0).collect();
    CotangentPath::new(p.structure.clone(), times, x, lambda)
}

/// Solves `g' = u(t) g`, `g(0) = I` with RK4 and cubic midpoints.
fn matrix_holonomy(times: &[f64], u: &[DMatrix<f64>]) -> DMatrix<f64> {
    let m = u[0].nrows();
    let flat: Vec<DVector<f64>> = u.iter().map(|a| DVector::from_column_slice(a.as_slice())).collect();
    let mut g = DMatrix::identity(m, m);
    for seg in segments(times) {
        for k in seg.start..seg.end - 1 {
            let h = times[k + 1] - times[k];
            let um = DMatrix::from_column_slice(m, m, midpoint(times, &flat, &seg, k).as_slice());
            let k1 = &u[k] * &g;
            let k2 = &um * (&g + &k1 * (0.5 * h));
            let k3 = &um * (&g + &k2 * (0.5 * h));
            let k4 = &u[k + 1] * (&g + &k3 * h);
            g += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        }
    }
    g
}

/// Holonomy of a path on a linear structure over a matrix Lie algebra; for
/// the linear product the result is block diagonal, one block per slot.
pub fn holonomy(p: &CotangentPath) -> Result<DMatrix<f64>> {
    match p.structure().kind() {
        StructureKind::LinearDirectSum(g) => {
            let u: Vec<DMatrix<f64>> = p.lambda.iter().map(|l| g.to_matrix(l)).collect::<Result<_>>()?;
            Ok(matrix_holonomy(&p.times, &u))
        }
        StructureKind::LinearProduct(g) => {
            let d = g.dim();
            let r = p.structure().order();
            let blocks = (0..r)
                .map(|i| {
                    let u: Vec<DMatrix<f64>> = p
                        .lambda
                        .iter()
                        .map(|l| g.to_matrix(&l.rows(i * d, d).into_owned()))
                        .collect::<Result<_>>()?;
                    Ok(matrix_holonomy(&p.times, &u))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(linalg::block_diag(&blocks))
        }
        _ => Err(Error::WrongStructure(format!("holonomy needs a linear structure, got `{}`", p.structure().name()))),
    }
}

/// `(X(0), int_0^1 eta dt)` on a trivial structure.
pub fn j_trivial(p: &CotangentPath) -> Result<(DVector<f64>, CovectorTuple)> {
    let s = p.structure();
    if !matches!(s.kind(), StructureKind::Trivial(_)) {
        return Err(Error::WrongStructure(format!("j_trivial needs a trivial structure, got `{}`", s.name())));
    }
    let etas: Vec<DVector<f64>> = (0..p.nodes()).map(|k| s.tuple_of(&p.x[k], &p.lambda[k])).collect();
    let total = trapezoid(&p.times, &etas);
    Ok((source(p), CovectorTuple::from_flat(s.order(), s.dim(), &total)))
}

/// Worst relative disagreement between `pairing(p, xi_beta, v)` and the
/// central difference of `H(beta)` along `v`, over the probes.
pub fn hamiltonian_identity_check(p: &CotangentPath, beta: &GaugeParameter, probes: &[PathVariation], eps: f64) -> Result<f64> {
    let xi = gauge_vector_field(p, beta)?;
    let mut worst = 0.0_f64;
    for v in probes {
        let lhs = pairing(p, &xi, v)?;
        let hp = moment_map(&v.displaced(p, eps), beta)?;
        let hm = moment_map(&v.displaced(p, -eps), beta)?;
        let rhs = (hp - hm) / (2.0 * eps);
        let scale = linalg::max_abs_vec(&lhs).max(linalg::max_abs_vec(&rhs)).max(1e-9);
        worst = worst.max(linalg::max_abs_vec(&(lhs - rhs)) / scale);
    }
    Ok(worst)
}

/// Splits a path on a product structure into its factor paths.
pub fn split_product(p: &CotangentPath) -> Result<Vec<CotangentPath>> {
    let StructureKind::Product(factors) = p.structure().kind() else {
        return Err(Error::WrongStructure(format!("`{}` is not a product", p.structure().name())));
    };
    st::product_layout(factors)
        .iter()
        .zip(factors)
        .map(|(l, f)| {
            CotangentPath::new(
                Arc::new(f.clone()),
                p.times.clone(),
                p.x.iter().map(|x| x.rows(l.coord_offset, l.dim).into_owned()).collect(),
                p.lambda.iter().map(|v| v.rows(l.frame_offset, l.frame_size).into_owned()).collect(),
            )
        })
        .collect()
}

/// Columnar text form: a header with `n`, `r`, `K`, `N` and the structure
/// name, then one row `t X lambda` per node in 17 significant digits.
pub fn write_path(p: &CotangentPath) -> String {
    let s = p.structure();
    let mut out = String::new();
    let _ = writeln!(out, "# cotangent-path");
    let _ = writeln!(out, "n {}", s.dim());
    let _ = writeln!(out, "r {}", s.order());
    let _ = writeln!(out, "K {}", s.frame_size());
    let _ = writeln!(out, "N {}", p.nodes() - 1);
    let _ = writeln!(out, "structure {}", s.name());
    for k in 0..p.nodes() {
        let mut row = format!("{:.16e}", p.times[k]);
        for v in p.x[k].iter().chain(p.lambda[k].iter()) {
            let _ = write!(row, " {v:.16e}");
        }
        let _ = writeln!(out, "{row}");
    }
    out
}

pub fn read_path(text: &str, structure: Arc<PolyPoissonStructure>) -> Result<CotangentPath> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
    let mut header = |key: &str| -> Result<String> {
        let line = lines.next().ok_or_else(|| Error::Parse(format!("missing `{key}` header")))?;
        line.strip_prefix(key)
            .and_then(|rest| rest.strip_prefix(' '))
            .map(|v| v.trim().to_string())
            .ok_or_else(|| Error::Parse(format!("expected `{key}` header, got `{line}`")))
    };
    let num = |v: String, key: &str| v.parse::<usize>().map_err(|_| Error::Parse(format!("bad `{key}` value `{v}`")));
    let n = num(header("n")?, "n")?;
    let r = num(header("r")?, "r")?;
    let k = num(header("K")?, "K")?;
    let big_n = num(header("N")?, "N")?;
    let name = header("structure")?;
    if (n, r, k) != (structure.dim(), structure.order(), structure.frame_size()) || name != structure.name() {
        return Err(Error::SpaceMismatch(format!(
            "file has structure `{name}` with (n, r, K) = ({n}, {r}, {k})"
        )));
    }
    let mut times = Vec::new();
    let mut x = Vec::new();
    let mut lambda = Vec::new();
    for (row_no, line) in lines.enumerate() {
        let vals = line
            .split_whitespace()
            .map(|v| v.parse::<f64>().map_err(|_| Error::Parse(format!("row {row_no}: bad number `{v}`"))))
            .collect::<Result<Vec<f64>>>()?;
        if vals.len() != 1 + n + k {
            return Err(Error::Parse(format!("row {row_no}: expected {} values, got {}", 1 + n + k, vals.len())));
        }
        times.push(vals[0]);
        x.push(DVector::from_column_slice(&vals[1..1 + n]));
        lambda.push(DVector::from_column_slice(&vals[1 + n..]));
    }
    if times.len() != big_n + 1 {
        return Err(Error::Parse(format!("expected {} rows, got {}", big_n + 1, times.len())));
    }
    CotangentPath::new(structure, times, x, lambda)
}

/// Coefficient profile `t -> lambda(t)`.
pub type Profile = Arc<dyn Fn(f64) -> DVector<f64> + Send + Sync>;

/// A structure with a base point and a smooth coefficient profile.
#[derive(Clone)]
pub struct PathScenario {
    pub name: String,
    pub structure: Arc<PolyPoissonStructure>,
    pub x0: DVector<f64>,
    pub profile: Profile,
}

impl std::fmt::Debug for PathScenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PathScenario").field("name", &self.name).field("x0", &self.x0).finish()
    }
}

impl PathScenario {
    pub fn solve(&self, n: usize) -> Result<CotangentPath> {
        let prof = self.profile.clone();
        solve_a_path(self.structure.clone(), &self.x0, n, move |t| prof(t))
    }

    pub fn by_name(name: &str, r: usize) -> Result<Self> {
        match name {
            "so3-direct-sum" => so3_direct_sum_scenario(r),
            "aff1-product" => aff1_product_scenario(r),
            "trivial" => trivial_scenario(r),
            "symplectic-plane" => symplectic_plane_scenario(),
            other => Err(Error::InvalidInput(format!("unknown path scenario `{other}`"))),
        }
    }
}

fn wave(base: Vec<f64>, amp: Vec<f64>) -> Profile {
    Arc::new(move |t: f64| {
        let s = (2.0 * std::f64::consts::PI * t).sin();
        DVector::from_fn(base.len(), |a, _| base[a] + amp[a] * s)
    })
}

/// Linear direct sum over `so(3)` on `(so(3)*)^r`, box `[-5, 5]`.
pub fn so3_direct_sum_scenario(r: usize) -> Result<PathScenario> {
    let g = crate::lie::LieAlgebraData::so3();
    let s = st::linear_direct_sum(&g, r, crate::field::Chart::cube(3 * r, -5.0, 5.0)?)?.with_name("so3-direct-sum");
    let x0 = DVector::from_fn(3 * r, |i, _| [0.3, -0.5, 0.8, 1.0, 0.2, -0.4][i % 6] + 0.1 * (i / 6) as f64);
    Ok(PathScenario {
        name: "so3-direct-sum".into(),
        structure: Arc::new(s),
        x0,
        profile: wave(vec![0.7, -0.4, 0.2], vec![0.3, 0.1, -0.5]),
    })
}

/// Linear product over the two-dimensional nonabelian algebra.
pub fn aff1_product_scenario(r: usize) -> Result<PathScenario> {
    let g = crate::lie::LieAlgebraData::aff1();
    let s = st::linear_product(&g, r, crate::field::Chart::cube(2 * r, -5.0, 5.0)?)?.with_name("aff1-product");
    Ok(PathScenario {
        name: "aff1-product".into(),
        structure: Arc::new(s),
        x0: DVector::from_fn(2 * r, |i, _| 0.5 - 0.2 * i as f64),
        profile: wave((0..2 * r).map(|a| 0.3 + 0.1 * a as f64).collect(), vec![0.2; 2 * r]),
    })
}

/// Trivial `S3` structure on `R^2` of order `r`.
pub fn trivial_scenario(r: usize) -> Result<PathScenario> {
    let s = st::trivial(st::TrivialVariant::S3, crate::field::Chart::cube(2, -5.0, 5.0)?, r)?.with_name("trivial");
    let k = s.frame_size();
    Ok(PathScenario {
        name: "trivial".into(),
        structure: Arc::new(s),
        x0: DVector::from_vec(vec![0.4, -0.3]),
        profile: wave((0..k).map(|a| 0.5 - 0.3 * a as f64).collect(), vec![0.4; k]),
    })
}

/// `T*R` with `dq∧dp` and its coordinate frame.
pub fn symplectic_plane_scenario() -> Result<PathScenario> {
    let s = st::covelocity(1, 1, crate::field::Chart::cube(2, -5.0, 5.0)?)?.with_name("symplectic-plane");
    Ok(PathScenario {
        name: "symplectic-plane".into(),
        structure: Arc::new(s),
        x0: DVector::from_vec(vec![0.2, 0.1]),
        profile: wave(vec![0.5, -0.3], vec![0.2, 0.4]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stencil_is_exact_on_quartics() {
        let times = uniform_times(8);
        let vals: Vec<DVector<f64>> = times.iter().map(|&t| DVector::from_element(1, t.powi(4) - 2.0 * t)).collect();
        let d = time_derivative(&times, &vals);
        for (t, v) in times.iter().zip(d) {
            assert!((v[0] - (4.0 * t.powi(3) - 2.0)).abs() < 1e-11);
        }
    }

    #[test]
    fn segments_split_at_repeated_times() {
        let t = vec![0.0, 0.25, 0.5, 0.5, 0.75, 1.0];
        assert_eq!(segments(&t), vec![0..3, 3..6]);
    }

    #[test]
    fn cubic_midpoint_is_exact_on_cubics() {
        let times = uniform_times(5);
        let vals: Vec<DVector<f64>> = times.iter().map(|&t| DVector::from_element(1, t * t * t)).collect();
        let seg = 0..6;
        for k in 0..5 {
            let tm = 0.5 * (times[k] + times[k + 1]);
            assert!((midpoint(&times, &vals, &seg, k)[0] - tm.powi(3)).abs() < 1e-14);
        }
    }
}

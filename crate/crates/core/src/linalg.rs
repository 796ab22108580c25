//! Dense helpers shared by every module: rank decisions, kernels, column
//! spaces and least squares.
//!
//! All rank decisions use one rule: a singular value counts as zero when it
//! is at most `RANK_RTOL` times the largest singular value of the matrix (or
//! below the absolute floor `RANK_ABS_FLOOR`, which only matters for
//! matrices that are zero up to round-off).

use nalgebra::{DMatrix, DVector};

/// Relative singular-value threshold for rank decisions.
pub const RANK_RTOL: f64 = 1e-9;
/// Absolute floor below which a singular value is always zero.
pub const RANK_ABS_FLOOR: f64 = 1e-13;
/// Tolerance for subspace containment, measured on orthonormal bases.
pub const SUBSPACE_TOL: f64 = 1e-8;

fn threshold(max_sv: f64) -> f64 {
    (RANK_RTOL * max_sv).max(RANK_ABS_FLOOR)
}

/// Singular values, sorted in descending order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

pub fn rank(m: &DMatrix<f64>) -> usize {
    let sv = singular_values(m);
    let Some(&max) = sv.first() else { return 0 };
    let tau = threshold(max);
    sv.iter().filter(|&&s| s > tau).count()
}

/// Rank by Gaussian elimination with full pivoting. Independent of the SVD
/// route; used to cross-check rank decisions.
pub fn rank_by_elimination(m: &DMatrix<f64>) -> usize {
    let mut a = m.clone();
    let (rows, cols) = a.shape();
    let scale = a.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    if scale <= RANK_ABS_FLOOR {
        return 0;
    }
    let tau = 1e-9 * scale * (rows.max(cols) as f64);
    let mut rank = 0;
    for step in 0..rows.min(cols) {
        let mut best = (step, step, 0.0_f64);
        for i in step..rows {
            for j in step..cols {
                if a[(i, j)].abs() > best.2 {
                    best = (i, j, a[(i, j)].abs());
                }
            }
        }
        if best.2 <= tau {
            break;
        }
        a.swap_rows(step, best.0);
        a.swap_columns(step, best.1);
        let pivot = a[(step, step)];
        for i in (step + 1)..rows {
            let factor = a[(i, step)] / pivot;
            if factor != 0.0 {
                for j in step..cols {
                    let v = a[(step, j)];
                    a[(i, j)] -= factor * v;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Orthonormal basis (as columns) of the null space of `m`.
pub fn kernel(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.ncols();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    if m.nrows() == 0 {
        return DMatrix::identity(n, n);
    }
    // Pad with zero rows so the SVD returns a full set of right singular
    // vectors.
    let padded = if m.nrows() < n {
        let mut p = DMatrix::zeros(n, n);
        p.view_mut((0, 0), (m.nrows(), n)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let sv = &svd.singular_values;
    let max = sv.iter().fold(0.0_f64, |acc, s| acc.max(*s));
    let tau = threshold(max);
    let cols: Vec<DVector<f64>> = (0..sv.len())
        .filter(|&i| sv[i] <= tau)
        .map(|i| v_t.row(i).transpose())
        .collect();
    columns_to_matrix(n, &cols)
}

/// Orthonormal basis (as columns) of the column space of `m`.
pub fn orth(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    if m.ncols() == 0 || n == 0 {
        return DMatrix::zeros(n, 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("requested U");
    let sv = &svd.singular_values;
    let max = sv.iter().fold(0.0_f64, |acc, s| acc.max(*s));
    let tau = threshold(max);
    let cols: Vec<DVector<f64>> = (0..sv.len())
        .filter(|&i| sv[i] > tau)
        .map(|i| u.column(i).into_owned())
        .collect();
    columns_to_matrix(n, &cols)
}

pub fn columns_to_matrix(nrows: usize, cols: &[DVector<f64>]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(nrows, cols.len());
    for (j, c) in cols.iter().enumerate() {
        m.set_column(j, c);
    }
    m
}

/// Horizontal concatenation `[a | b]`.
pub fn hstack(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(a.nrows(), b.nrows(), "hstack row mismatch");
    let mut m = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    m.view_mut((0, 0), a.shape()).copy_from(a);
    m.view_mut((0, a.ncols()), b.shape()).copy_from(b);
    m
}

/// Vertical concatenation of blocks with equal column counts.
pub fn vstack(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let ncols = blocks.first().map_or(0, |b| b.ncols());
    let nrows = blocks.iter().map(|b| b.nrows()).sum();
    let mut m = DMatrix::zeros(nrows, ncols);
    let mut row = 0;
    for b in blocks {
        assert_eq!(b.ncols(), ncols, "vstack column mismatch");
        m.view_mut((row, 0), b.shape()).copy_from(b);
        row += b.nrows();
    }
    m
}

/// Block-diagonal matrix.
pub fn block_diag(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let nrows = blocks.iter().map(|b| b.nrows()).sum();
    let ncols = blocks.iter().map(|b| b.ncols()).sum();
    let mut m = DMatrix::zeros(nrows, ncols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        m.view_mut((r, c), b.shape()).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    m
}

/// Minimum-norm least-squares solution of `a x = b` (column-wise for matrix
/// right-hand sides), together with the max-abs residual.
pub fn lstsq(a: &DMatrix<f64>, b: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    if a.ncols() == 0 {
        let res = b.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        return (DMatrix::zeros(0, b.ncols()), res);
    }
    let svd = a.clone().svd(true, true);
    let max = svd.singular_values.iter().fold(0.0_f64, |acc, s| acc.max(*s));
    let x = svd
        .solve(b, threshold(max))
        .expect("SVD computed with U and V");
    let res = (a * &x - b).iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    (x, res)
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

pub fn max_abs_vec(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Hat map of a 3-vector.
pub fn hat3(v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(3, 3, &[0.0, -v[2], v[1], v[2], 0.0, -v[0], -v[1], v[0], 0.0])
}

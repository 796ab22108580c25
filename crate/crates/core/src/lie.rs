//! Finite-dimensional real Lie algebras given by structure constants.
//!
//! `[e_i, e_j] = sum_k c^k_{ij} e_k`. When a faithful matrix representation is
//! attached, holonomies and group elements can be computed as matrices.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::hat3;

pub const JACOBI_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct LieAlgebraData {
    name: String,
    dim: usize,
    // c[k * d * d + i * d + j] = c^k_{ij}
    constants: Vec<f64>,
    basis_matrices: Option<Vec<DMatrix<f64>>>,
}

impl LieAlgebraData {
    /// Checks antisymmetry and the Jacobi identity within `JACOBI_TOL`.
    pub fn new(name: &str, dim: usize, constants: Vec<f64>) -> Result<Self> {
        if constants.len() != dim * dim * dim {
            return Err(Error::InvalidInput(format!(
                "expected {} structure constants, got {}",
                dim * dim * dim,
                constants.len()
            )));
        }
        let g = LieAlgebraData {
            name: name.to_string(),
            dim,
            constants,
            basis_matrices: None,
        };
        let anti = g.antisymmetry_defect();
        if anti > JACOBI_TOL {
            return Err(Error::InvalidInput(format!(
                "structure constants not antisymmetric (defect {anti:.3e})"
            )));
        }
        let jac = g.jacobi_defect();
        if jac > JACOBI_TOL {
            return Err(Error::InvalidInput(format!(
                "structure constants violate Jacobi (defect {jac:.3e})"
            )));
        }
        Ok(g)
    }

    /// Attaches matrices `E_a` with `[E_i, E_j] = sum_k c^k_{ij} E_k`.
    pub fn with_basis_matrices(mut self, mats: Vec<DMatrix<f64>>) -> Result<Self> {
        if mats.len() != self.dim {
            return Err(Error::InvalidInput("one basis matrix per generator".into()));
        }
        for i in 0..self.dim {
            for j in 0..self.dim {
                let comm = &mats[i] * &mats[j] - &mats[j] * &mats[i];
                let mut expect = DMatrix::zeros(comm.nrows(), comm.ncols());
                for (k, m) in mats.iter().enumerate() {
                    expect += m * self.c(k, i, j);
                }
                if (comm - expect).abs().max() > 1e-12 {
                    return Err(Error::InvalidInput(format!(
                        "basis matrices do not represent the bracket at ({i}, {j})"
                    )));
                }
            }
        }
        self.basis_matrices = Some(mats);
        Ok(self)
    }

    pub fn so3() -> Self {
        let mut c = vec![0.0; 27];
        for (i, j, k, s) in [
            (0, 1, 2, 1.0),
            (1, 2, 0, 1.0),
            (2, 0, 1, 1.0),
            (1, 0, 2, -1.0),
            (2, 1, 0, -1.0),
            (0, 2, 1, -1.0),
        ] {
            c[k * 9 + i * 3 + j] = s;
        }
        let mats = (0..3)
            .map(|a| {
                let mut e = [0.0; 3];
                e[a] = 1.0;
                hat3(&e)
            })
            .collect();
        LieAlgebraData::new("so3", 3, c)
            .and_then(|g| g.with_basis_matrices(mats))
            .expect("so(3) data is valid")
    }

    /// The two-dimensional nonabelian algebra, `[e1, e2] = e2`.
    pub fn aff1() -> Self {
        let mut c = vec![0.0; 8];
        c[4 + 1] = 1.0; // c^2_{12}
        c[4 + 2] = -1.0; // c^2_{21}
        let e1 = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let e2 = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        LieAlgebraData::new("aff1", 2, c)
            .and_then(|g| g.with_basis_matrices(vec![e1, e2]))
            .expect("aff(1) data is valid")
    }

    /// Abelian algebra of dimension `d`, represented by diagonal matrices.
    pub fn abelian(d: usize) -> Self {
        let mats = (0..d)
            .map(|a| {
                let mut m = DMatrix::zeros(d, d);
                m[(a, a)] = 1.0;
                m
            })
            .collect();
        LieAlgebraData::new(&format!("abelian{d}"), d, vec![0.0; d * d * d])
            .and_then(|g| g.with_basis_matrices(mats))
            .expect("abelian data is valid")
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "so3" => Ok(Self::so3()),
            "aff1" => Ok(Self::aff1()),
            other => match other.strip_prefix("abelian").map(str::parse::<usize>) {
                Some(Ok(d)) if d > 0 => Ok(Self::abelian(d)),
                _ => Err(Error::InvalidInput(format!("unknown Lie algebra `{other}`"))),
            },
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `c^k_{ij}`.
    pub fn c(&self, k: usize, i: usize, j: usize) -> f64 {
        self.constants[k * self.dim * self.dim + i * self.dim + j]
    }

    pub fn basis_matrices(&self) -> Option<&[DMatrix<f64>]> {
        self.basis_matrices.as_deref()
    }

    pub fn is_abelian(&self) -> bool {
        self.constants.iter().all(|&c| c == 0.0)
    }

    pub fn bracket(&self, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        self.ad(u) * v
    }

    /// Matrix of `ad_u`, `(ad_u)_{kj} = sum_i u^i c^k_{ij}`.
    pub fn ad(&self, u: &DVector<f64>) -> DMatrix<f64> {
        let d = self.dim;
        DMatrix::from_fn(d, d, |k, j| (0..d).map(|i| u[i] * self.c(k, i, j)).sum())
    }

    /// `ad*_u zeta`, defined by `(ad*_u zeta)(v) = zeta([u, v])`.
    pub fn coad(&self, u: &DVector<f64>, zeta: &DVector<f64>) -> DVector<f64> {
        self.ad(u).transpose() * zeta
    }

    /// `sum_a u^a E_a`.
    pub fn to_matrix(&self, u: &DVector<f64>) -> Result<DMatrix<f64>> {
        let mats = self
            .basis_matrices
            .as_ref()
            .ok_or_else(|| Error::WrongStructure(format!("{} has no matrix representation", self.name)))?;
        let m = mats[0].nrows();
        let mut out = DMatrix::zeros(m, m);
        for (a, e) in mats.iter().enumerate() {
            out += e * u[a];
        }
        Ok(out)
    }

    /// `dexp_theta = sum_k ad_theta^k / (k+1)!`, as a `d x d` matrix. The
    /// series is summed until terms drop below round-off.
    pub fn dexp(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        let d = self.dim;
        let ad = self.ad(theta);
        let mut term = DMatrix::identity(d, d);
        let mut sum = term.clone();
        for k in 1..60 {
            term = &ad * &term / (k as f64 + 1.0);
            sum += &term;
            if term.abs().max() < 1e-18 {
                break;
            }
        }
        sum
    }

    pub fn antisymmetry_defect(&self) -> f64 {
        let d = self.dim;
        let mut worst = 0.0_f64;
        for k in 0..d {
            for i in 0..d {
                for j in 0..d {
                    worst = worst.max((self.c(k, i, j) + self.c(k, j, i)).abs());
                }
            }
        }
        worst
    }

    /// Max over basis triples and output index of the cyclic sum
    /// `[[e_i, e_j], e_l] + [[e_j, e_l], e_i] + [[e_l, e_i], e_j]`.
    pub fn jacobi_defect(&self) -> f64 {
        let d = self.dim;
        let mut worst = 0.0_f64;
        for i in 0..d {
            for j in 0..d {
                for l in 0..d {
                    for k in 0..d {
                        let mut s = 0.0;
                        for m in 0..d {
                            s += self.c(m, i, j) * self.c(k, m, l)
                                + self.c(m, j, l) * self.c(k, m, i)
                                + self.c(m, l, i) * self.c(k, m, j);
                        }
                        worst = worst.max(s.abs());
                    }
                }
            }
        }
        worst
    }
}

//! Finite-difference solver for the two-chart boundary value problem
//!
//! ```text
//! Σ_i c_i^{-2} (f_{y_i y_i} + S_i f_{y_i}) = -1   on (0,h_1) × (0,h_2)
//! f_{y_i} = 0 at y_i = 0,   f = 0 at y_i = h_i
//! ```
//!
//! Central differences with ghost-point Neumann rows (second order
//! throughout). The operator is a Kronecker sum of two tridiagonal matrices;
//! each is symmetrized by a diagonal similarity and diagonalized, which turns
//! the 2-D solve into an elementwise division in the eigenbasis.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::cusum::ThresholdVector;
use crate::error::{precondition, Error, Result};
use crate::kernel::SignVector;
use crate::sde_sim::SignalStrengths;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdGrid {
    pub nx: usize,
    pub ny: usize,
    pub h1: f64,
    pub h2: f64,
    /// Row-major `(nx + 1) × (ny + 1)`; entry `(i, j)` sits at
    /// `(i h1/nx, j h2/ny)`.
    pub values: Vec<f64>,
}

impl FdGrid {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * (self.ny + 1) + j]
    }

    pub fn origin(&self) -> f64 {
        self.at(0, 0)
    }
}

struct Axis {
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
    scale: DVector<f64>,
}

// One axis of the operator, c^{-2}(d²/dy² + s d/dy) on n unknowns
// y_0 = 0, …, y_{n-1}, with y_n = h held at zero.
fn axis(s: f64, c2: f64, h: f64, n: usize) -> Result<Axis> {
    let dy = h / n as f64;
    let inv2 = 1.0 / (dy * dy * c2);
    let adv = s / (2.0 * dy * c2);
    let sub = inv2 - adv;
    let sup = inv2 + adv;
    if sub <= 0.0 || sup <= 0.0 {
        return Err(Error::Precondition(format!(
            "grid too coarse: spacing {dy} must be below 2 for a stable symmetrization"
        )));
    }
    let upper = |j: usize| if j == 0 { 2.0 * inv2 } else { sup };
    let mut scale = DVector::from_element(n, 1.0);
    let mut j_mat = DMatrix::zeros(n, n);
    for j in 0..n {
        j_mat[(j, j)] = -2.0 * inv2;
        if j + 1 < n {
            let (u, l) = (upper(j), sub);
            scale[j + 1] = scale[j] * (u / l).sqrt();
            let off = (u * l).sqrt();
            j_mat[(j, j + 1)] = off;
            j_mat[(j + 1, j)] = off;
        }
    }
    let eig = SymmetricEigen::new(j_mat);
    Ok(Axis {
        eigenvalues: eig.eigenvalues,
        eigenvectors: eig.eigenvectors,
        scale,
    })
}

pub fn f_fd_solve(
    sign: &SignVector,
    hbar: &ThresholdVector,
    cs: &SignalStrengths,
    nx: usize,
    ny: usize,
) -> Result<FdGrid> {
    if sign.len() != 2 || hbar.len() != 2 || cs.len() != 2 {
        return Err(Error::Dimension(format!(
            "finite differences need N = 2 (sign {}, thresholds {}, strengths {})",
            sign.len(),
            hbar.len(),
            cs.len()
        )));
    }
    precondition(nx >= 50 && ny >= 50, || {
        format!("grid {nx}×{ny} below the 50×50 minimum")
    })?;
    let c2 = cs.squared();
    let hs = hbar.as_slice();
    let s = sign.signs();
    let a = axis(s[0].value(), c2[0], hs[0], nx)?;
    let b = axis(s[1].value(), c2[1], hs[1], ny)?;

    // With J = D T D^{-1} = Q Λ Q^T the right-hand side -1 becomes the
    // rank-one -(Q1^T d1)(Q2^T d2)^T in the eigenbasis.
    let p = a.eigenvectors.transpose() * &a.scale;
    let q = b.eigenvectors.transpose() * &b.scale;
    let mut x = DMatrix::zeros(nx, ny);
    for i in 0..nx {
        for j in 0..ny {
            let lam = a.eigenvalues[i] + b.eigenvalues[j];
            if lam.is_nan() || lam >= -1e-300 {
                return Err(Error::Singular(format!("eigenvalue sum {lam} at ({i}, {j})")));
            }
            x[(i, j)] = -p[i] * q[j] / lam;
        }
    }
    let f = &a.eigenvectors * x * b.eigenvectors.transpose();
    let mut values = vec![0.0; (nx + 1) * (ny + 1)];
    for i in 0..nx {
        for j in 0..ny {
            values[i * (ny + 1) + j] = f[(i, j)] / (a.scale[i] * b.scale[j]);
        }
    }
    Ok(FdGrid {
        nx,
        ny,
        h1: hs[0],
        h2: hs[1],
        values,
    })
}

/// Origin value extrapolated from grids `n×n` and `2n×2n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdEstimate {
    pub value: f64,
    /// `|f_2n - f_n| / 3`, the error estimate of the finer grid; the
    /// extrapolated value is normally much closer.
    pub error: f64,
    pub coarse: f64,
    pub fine: f64,
}

pub fn f_fd_richardson(
    sign: &SignVector,
    hbar: &ThresholdVector,
    cs: &SignalStrengths,
    n: usize,
) -> Result<FdEstimate> {
    let coarse = f_fd_solve(sign, hbar, cs, n, n)?.origin();
    let fine = f_fd_solve(sign, hbar, cs, 2 * n, 2 * n)?.origin();
    Ok(FdEstimate {
        value: (4.0 * fine - coarse) / 3.0,
        error: (fine - coarse).abs() / 3.0,
        coarse,
        fine,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::g;

    fn setup(s: [i64; 2], h: [f64; 2], c: [f64; 2]) -> (SignVector, ThresholdVector, SignalStrengths) {
        (
            SignVector::from_ints(&s).unwrap(),
            ThresholdVector::new(h.to_vec()).unwrap(),
            SignalStrengths::new(c.to_vec()).unwrap(),
        )
    }

    #[test]
    fn dirichlet_edges_are_zero_and_values_positive() {
        let (s, h, c) = setup([-1, 1], [3.0, 2.0], [1.0, 1.0]);
        let grid = f_fd_solve(&s, &h, &c, 60, 50).unwrap();
        for i in 0..=60 {
            assert_eq!(grid.at(i, 50), 0.0);
        }
        for j in 0..=50 {
            assert_eq!(grid.at(60, j), 0.0);
        }
        for i in 0..60 {
            for j in 0..50 {
                assert!(grid.at(i, j) > 0.0);
            }
        }
    }

    #[test]
    fn neumann_edges_are_flat() {
        let (s, h, c) = setup([1, -1], [3.0, 3.0], [1.0, 2.0]);
        let grid = f_fd_solve(&s, &h, &c, 200, 200).unwrap();
        let dy = 3.0 / 200.0;
        for j in [0, 50, 100] {
            // one-sided second-order difference at y1 = 0
            let d = (-3.0 * grid.at(0, j) + 4.0 * grid.at(1, j) - grid.at(2, j)) / (2.0 * dy);
            assert!(d.abs() < 1e-2 * grid.at(0, j), "slope {d}");
        }
    }

    #[test]
    fn large_second_threshold_reduces_to_one_dimension() {
        for (s1, expect) in [(1, g(-3.0)), (-1, g(3.0))] {
            let (s, h, c) = setup([s1, -1], [3.0, 14.0], [1.0, 1.0]);
            let est = f_fd_richardson(&s, &h, &c, 100).unwrap();
            assert!((est.value / expect - 1.0).abs() < 0.02, "{} vs {expect}", est.value);
        }
    }

    #[test]
    fn second_order_convergence() {
        let (s, h, c) = setup([1, -1], [4.0, 4.0], [1.0, 1.0]);
        let f1 = f_fd_solve(&s, &h, &c, 50, 50).unwrap().origin();
        let f2 = f_fd_solve(&s, &h, &c, 100, 100).unwrap().origin();
        let f3 = f_fd_solve(&s, &h, &c, 200, 200).unwrap().origin();
        let ratio = (f1 - f2) / (f2 - f3);
        assert!((ratio - 4.0).abs() < 1.0, "ratio {ratio}");
    }

    #[test]
    fn origin_grows_with_thresholds() {
        let (s, _, c) = setup([-1, -1], [1.0, 1.0], [1.0, 1.0]);
        let lo = f_fd_solve(&s, &ThresholdVector::new(vec![3.0, 3.0]).unwrap(), &c, 80, 80).unwrap();
        let hi = f_fd_solve(&s, &ThresholdVector::new(vec![3.5, 3.0]).unwrap(), &c, 80, 80).unwrap();
        assert!(hi.origin() > lo.origin());
    }

    #[test]
    fn rejects_wrong_dimension() {
        let s = SignVector::all_minus(3);
        let h = ThresholdVector::new(vec![2.0; 3]).unwrap();
        let c = SignalStrengths::new(vec![1.0; 3]).unwrap();
        assert!(matches!(f_fd_solve(&s, &h, &c, 50, 50), Err(Error::Dimension(_))));
    }
}

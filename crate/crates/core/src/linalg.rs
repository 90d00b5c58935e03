//! Exact integer kernels of the stoichiometric matrix, conservation-class
//! membership and a floating least-squares solve.
//!
//! Kernels are computed by fraction-free elimination over `BigInt`: a
//! Bareiss-style forward pass to echelon form with the first nonzero entry
//! in each column (scanning rows top to bottom) as pivot, followed by a
//! fraction-free backward pass. Every basis vector is scaled to content 1
//! with its first nonzero entry positive, so results are reproducible.

use nalgebra::{DMatrix, DVector};
use num::{BigInt, Integer, One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::system::StoichMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelSide {
    /// `{v : Γ·v = 0}`, linear conservation laws.
    Right,
    /// `{v : vᵀ·Γ = 0}`, integer relations between events.
    Left,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct KernelBasis {
    pub side: KernelSide,
    pub vectors: Vec<Vec<i64>>,
}

impl KernelBasis {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

/// Reduced echelon data of an integer matrix: row `r` has pivot column
/// `pivots[r]`, and all pivot columns are cleared above and below.
struct Echelon {
    rows: Vec<Vec<BigInt>>,
    pivots: Vec<usize>,
}

fn to_big(rows: &[Vec<i64>]) -> Vec<Vec<BigInt>> {
    rows.iter()
        .map(|r| r.iter().map(|&v| BigInt::from(v)).collect())
        .collect()
}

fn make_primitive(row: &mut [BigInt]) {
    let g = row.iter().fold(BigInt::zero(), |acc, v| acc.gcd(v));
    if !g.is_zero() && !g.is_one() {
        for v in row.iter_mut() {
            *v = &*v / &g;
        }
    }
}

fn echelon(rows: &[Vec<i64>], cols: usize) -> Echelon {
    let mut a = to_big(rows);
    let nrows = a.len();
    let mut pivots = Vec::new();
    let mut prev = BigInt::one();
    let mut r = 0;
    for c in 0..cols {
        if r == nrows {
            break;
        }
        let Some(p) = (r..nrows).find(|&i| !a[i][c].is_zero()) else {
            continue;
        };
        a.swap(r, p);
        // Bareiss step: every entry below stays integral after the exact division.
        for i in (r + 1)..nrows {
            for k in (c + 1)..cols {
                let v = (&a[r][c] * &a[i][k] - &a[i][c] * &a[r][k]) / &prev;
                a[i][k] = v;
            }
            a[i][c] = BigInt::zero();
        }
        prev = a[r][c].clone();
        pivots.push(c);
        r += 1;
    }
    a.truncate(r);

    // Fraction-free backward pass: clear entries above each pivot by
    // cross-multiplication, then keep rows primitive.
    for (pr, &pc) in pivots.iter().enumerate().rev() {
        make_primitive(&mut a[pr]);
        for i in 0..pr {
            if a[i][pc].is_zero() {
                continue;
            }
            let piv = a[pr][pc].clone();
            let f = a[i][pc].clone();
            for k in 0..cols {
                let v = &piv * &a[i][k] - &f * &a[pr][k];
                a[i][k] = v;
            }
            make_primitive(&mut a[i]);
        }
    }
    Echelon { rows: a, pivots }
}

fn normalize(v: &mut [BigInt]) {
    make_primitive(v);
    if let Some(first) = v.iter().find(|x| !x.is_zero()) {
        if first.is_negative() {
            for x in v.iter_mut() {
                *x = -&*x;
            }
        }
    }
}

/// Integer basis of `{v : A·v = 0}` for an integer matrix given by rows.
pub fn integer_kernel(rows: &[Vec<i64>], cols: usize) -> Vec<Vec<i64>> {
    let ech = echelon(rows, cols);
    let free: Vec<usize> = (0..cols).filter(|c| !ech.pivots.contains(c)).collect();
    let lcm = ech
        .pivots
        .iter()
        .enumerate()
        .fold(BigInt::one(), |acc, (r, &c)| acc.lcm(&ech.rows[r][c].abs()));
    free.iter()
        .map(|&f| {
            let mut v = vec![BigInt::zero(); cols];
            v[f] = lcm.clone();
            for (r, &pc) in ech.pivots.iter().enumerate() {
                let d = &ech.rows[r][pc];
                v[pc] = -(&lcm / d) * &ech.rows[r][f];
            }
            normalize(&mut v);
            v.iter()
                .map(|x| x.to_i64().expect("kernel entry exceeds i64"))
                .collect()
        })
        .collect()
}

/// Rank of an integer matrix by exact elimination.
pub fn rank(g: &StoichMatrix) -> usize {
    echelon(g.rows(), g.ncols()).pivots.len()
}

pub fn right_kernel(g: &StoichMatrix) -> KernelBasis {
    KernelBasis {
        side: KernelSide::Right,
        vectors: integer_kernel(g.rows(), g.ncols()),
    }
}

pub fn left_kernel(g: &StoichMatrix) -> KernelBasis {
    let t = g.transpose();
    KernelBasis {
        side: KernelSide::Left,
        vectors: integer_kernel(t.rows(), t.ncols()),
    }
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::Dimension { expected, found });
    }
    Ok(())
}

/// Default relative tolerance for [`same_conservation_class`].
pub const CLASS_TOL: f64 = 1e-9;

/// Whether `x` and `y` agree on every primitive linear conservation law,
/// up to `tol·(1 + ‖v‖₁·max(‖x‖∞, ‖y‖∞))` per basis vector `v`.
pub fn same_conservation_class(g: &StoichMatrix, x: &[f64], y: &[f64], tol: f64) -> Result<bool> {
    check_len(g.ncols(), x.len())?;
    check_len(g.ncols(), y.len())?;
    if !(tol >= 0.0) {
        return Err(Error::Domain(format!("tolerance {tol} must be non-negative")));
    }
    let scale = x.iter().chain(y).fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(right_kernel(g).vectors.iter().all(|v| {
        let l1: f64 = v.iter().map(|c| c.unsigned_abs() as f64).sum();
        let d: f64 = v.iter().zip(x.iter().zip(y)).map(|(&c, (a, b))| c as f64 * (a - b)).sum();
        d.abs() <= tol * (1.0 + l1 * scale)
    }))
}

/// Exact class membership for rational points.
pub fn same_conservation_class_exact(
    g: &StoichMatrix,
    x: &[num::BigRational],
    y: &[num::BigRational],
) -> Result<bool> {
    check_len(g.ncols(), x.len())?;
    check_len(g.ncols(), y.len())?;
    Ok(right_kernel(g).vectors.iter().all(|v| {
        v.iter()
            .zip(x.iter().zip(y))
            .fold(num::BigRational::zero(), |acc, (&c, (a, b))| {
                acc + num::BigRational::from_integer(c.into()) * (a - b)
            })
            .is_zero()
    }))
}

#[derive(Clone, Debug, PartialEq)]
pub struct LeastSquares {
    pub alpha: Vec<f64>,
    pub residual: f64,
}

/// Minimum-norm least-squares solution of `Γ·α ≈ b` through a singular value
/// decomposition.
pub fn least_squares_solve(g: &StoichMatrix, b: &[f64]) -> Result<LeastSquares> {
    check_len(g.nrows(), b.len())?;
    let a = g.to_dmatrix();
    let alpha = min_norm_solve(&a, &DVector::from_column_slice(b))?;
    let r = &a * &alpha - DVector::from_column_slice(b);
    Ok(LeastSquares {
        alpha: alpha.iter().copied().collect(),
        residual: r.norm(),
    })
}

pub(crate) fn min_norm_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if a.ncols() == 0 {
        return Ok(DVector::zeros(0));
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = f64::EPSILON * a.nrows().max(a.ncols()) as f64 * smax.max(1.0);
    svd.solve(b, eps)
        .map_err(|e| Error::Domain(format!("least-squares solve failed: {e}")))
}

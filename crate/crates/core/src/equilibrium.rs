//! Positive strong equilibria and the Lyapunov function.
//!
//! A base point `c*` comes from the log-linear system `Γ·α = ln(σ/τ)`,
//! solved in the least-squares sense and mapped through `exp`. The unique
//! strong equilibrium in the class of a positive point `p` is
//! `c = c*·exp(K·y)`, where `K` holds a right-kernel basis and `y` minimises
//! the strictly convex, coercive function
//!
//! ```text
//! φ(y) = Σ_i c*_i exp((K·y)_i) - p·(K·y)
//! ```
//!
//! Stationarity `Kᵀ(c - p) = 0` is class membership, and `K·y ∈ ker Γ`
//! keeps `ln c` on the solution set of the log-linear system.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::analysis::wegscheider_check;
use crate::error::{Error, Result};
use crate::linalg::{least_squares_solve, min_norm_solve, right_kernel};
use crate::system::EventSystem;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EquilibriumOptions {
    /// Stop when `‖∇φ‖∞ ≤ grad_tol·(1 + ‖p‖∞)`.
    pub grad_tol: f64,
    pub max_iter: usize,
    pub armijo_c1: f64,
    pub backtrack: f64,
    /// Polish the base point when its detailed-balance residual exceeds this.
    pub polish_threshold: f64,
    pub detailed_balance_tol: f64,
    pub class_tol: f64,
}

impl Default for EquilibriumOptions {
    fn default() -> Self {
        Self {
            grad_tol: 1e-12,
            max_iter: 200,
            armijo_c1: 1e-4,
            backtrack: 0.5,
            polish_threshold: 1e-12,
            detailed_balance_tol: 1e-9,
            class_tol: 1e-9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquilibriumResult {
    pub c: Vec<f64>,
    /// `max_j |e_j(c)| / max(σ_j M_j(c), τ_j N_j(c))`.
    pub detailed_balance_residual: f64,
    /// `max_v |v·(c - p)| / (1 + ‖v‖₁·max(‖c‖∞, ‖p‖∞))` over the right-kernel basis.
    pub class_residual: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
}

fn check_positive(x: &[f64], what: &str) -> Result<()> {
    if x.iter().all(|&v| v > 0.0 && v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Domain(format!("{what} must be strictly positive")))
    }
}

fn check_dim(sys: &EventSystem, x: &[f64]) -> Result<()> {
    if x.len() != sys.dim() {
        return Err(Error::Dimension {
            expected: sys.dim(),
            found: x.len(),
        });
    }
    Ok(())
}

/// A positive strong equilibrium of a natural system.
pub fn base_strong_equilibrium(sys: &EventSystem) -> Result<Vec<f64>> {
    base_strong_equilibrium_with(sys, &EquilibriumOptions::default())
}

pub fn base_strong_equilibrium_with(sys: &EventSystem, opts: &EquilibriumOptions) -> Result<Vec<f64>> {
    let verdict = wegscheider_check(sys);
    if !verdict.natural {
        let cert = verdict
            .energy_cycles()
            .next()
            .map(|c| format!("combination {:?} has product {}", c.combination, c.exact_product))
            .unwrap_or_default();
        return Err(Error::NotNatural(cert));
    }
    let g = sys.stoichiometric_matrix();
    let b: Vec<f64> = sys.events().iter().map(|e| e.log_ratio()).collect();
    let ls = least_squares_solve(&g, &b)?;
    let mut alpha = ls.alpha;
    let mut c: Vec<f64> = alpha.iter().map(|a| a.exp()).collect();
    let mut residual = sys.detailed_balance_residual(&c);
    if residual > opts.polish_threshold {
        // Gauss-Newton on the relative residuals 1 - τN(c)/(σM(c)) in log space.
        let gm = g.to_dmatrix();
        for _ in 0..8 {
            let mut r = DVector::zeros(sys.len());
            let mut jac = gm.clone();
            for (j, e) in sys.events().iter().enumerate() {
                let (fwd, bwd) = e.fluxes(&c);
                let q = bwd / fwd;
                r[j] = 1.0 - q;
                jac.row_mut(j).scale_mut(-q);
            }
            let step = min_norm_solve(&jac, &(-r))?;
            let trial_alpha: Vec<f64> = alpha.iter().zip(step.iter()).map(|(a, s)| a + s).collect();
            let trial: Vec<f64> = trial_alpha.iter().map(|a| a.exp()).collect();
            let trial_res = sys.detailed_balance_residual(&trial);
            if !(trial_res < residual) {
                break;
            }
            alpha = trial_alpha;
            c = trial;
            residual = trial_res;
            if residual <= opts.polish_threshold {
                break;
            }
        }
    }
    Ok(c)
}

/// The convex objective whose minimiser gives the class equilibrium.
#[derive(Clone, Debug)]
pub struct ClassObjective {
    c_star: Vec<f64>,
    p: Vec<f64>,
    basis: DMatrix<f64>,
}

impl ClassObjective {
    pub fn new(sys: &EventSystem, c_star: &[f64], p: &[f64]) -> Result<Self> {
        check_dim(sys, c_star)?;
        check_dim(sys, p)?;
        let kernel = right_kernel(&sys.stoichiometric_matrix());
        let n = sys.dim();
        let basis = DMatrix::from_fn(n, kernel.len(), |i, k| kernel.vectors[k][i] as f64);
        Ok(Self {
            c_star: c_star.to_vec(),
            p: p.to_vec(),
            basis,
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    fn shift(&self, y: &[f64]) -> DVector<f64> {
        &self.basis * DVector::from_column_slice(y)
    }

    /// `c*·exp(K·y)`.
    pub fn point(&self, y: &[f64]) -> Vec<f64> {
        let s = self.shift(y);
        self.c_star.iter().zip(s.iter()).map(|(c, s)| c * s.exp()).collect()
    }

    pub fn value(&self, y: &[f64]) -> f64 {
        let s = self.shift(y);
        self.c_star
            .iter()
            .zip(&self.p)
            .zip(s.iter())
            .map(|((c, p), s)| c * s.exp() - p * s)
            .sum()
    }

    pub fn gradient(&self, y: &[f64]) -> Vec<f64> {
        let c = self.point(y);
        let d = DVector::from_iterator(c.len(), c.iter().zip(&self.p).map(|(c, p)| c - p));
        (self.basis.transpose() * d).iter().copied().collect()
    }

    /// `Kᵀ·diag(c)·K`.
    pub fn hessian(&self, y: &[f64]) -> DMatrix<f64> {
        let c = self.point(y);
        let mut scaled = self.basis.clone();
        for (i, ci) in c.iter().enumerate() {
            scaled.row_mut(i).scale_mut(*ci);
        }
        self.basis.transpose() * scaled
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// The unique positive strong equilibrium in the conservation class of `p`.
pub fn class_equilibrium(sys: &EventSystem, c_star: &[f64], p: &[f64]) -> Result<EquilibriumResult> {
    class_equilibrium_with(sys, c_star, p, &EquilibriumOptions::default())
}

pub fn class_equilibrium_with(
    sys: &EventSystem,
    c_star: &[f64],
    p: &[f64],
    opts: &EquilibriumOptions,
) -> Result<EquilibriumResult> {
    check_dim(sys, c_star)?;
    check_dim(sys, p)?;
    check_positive(c_star, "base equilibrium")?;
    if !p.iter().all(|&v| v > 0.0 && v.is_finite()) {
        return Err(Error::Class("class representative must be a positive point".into()));
    }
    let obj = ClassObjective::new(sys, c_star, p)?;
    let mut y = vec![0.0; obj.dim()];
    let tol = opts.grad_tol * (1.0 + inf_norm(p));
    let mut iterations = 0;
    let mut grad = obj.gradient(&y);
    while inf_norm(&grad) > tol {
        if iterations == opts.max_iter {
            return Err(Error::Convergence {
                iterations,
                gradient_norm: inf_norm(&grad),
            });
        }
        iterations += 1;
        let h = obj.hessian(&y);
        let chol = h.cholesky().ok_or_else(|| {
            Error::Domain("Hessian of the class objective is not positive definite".into())
        })?;
        let g = DVector::from_column_slice(&grad);
        let dir = -chol.solve(&g);
        let slope = g.dot(&dir);
        let f0 = obj.value(&y);
        let trial_at = |t: f64| -> Vec<f64> { y.iter().zip(dir.iter()).map(|(a, d)| a + t * d).collect() };

        let mut t = 1.0;
        let mut accepted = None;
        // Once the predicted decrease is below the round-off of φ the line
        // search only sees noise; Newton is in its quadratic regime there.
        if -slope <= 64.0 * f64::EPSILON * (1.0 + f0.abs()) {
            accepted = Some(trial_at(1.0));
        } else {
            while t > 1e-20 {
                let cand = trial_at(t);
                let f = obj.value(&cand);
                if f.is_finite() && f <= f0 + opts.armijo_c1 * t * slope {
                    accepted = Some(cand);
                    break;
                }
                t *= opts.backtrack;
            }
        }
        let Some(next) = accepted else {
            // Line search stalled in round-off; keep the full step if it still
            // reduces the gradient.
            let cand = trial_at(1.0);
            let g_new = obj.gradient(&cand);
            if inf_norm(&g_new) < inf_norm(&grad) {
                y = cand;
                grad = g_new;
                continue;
            }
            return Err(Error::Convergence {
                iterations,
                gradient_norm: inf_norm(&grad),
            });
        };
        y = next;
        grad = obj.gradient(&y);
    }
    let c = obj.point(&y);
    Ok(EquilibriumResult {
        detailed_balance_residual: sys.detailed_balance_residual(&c),
        class_residual: class_residual(sys, &c, p),
        gradient_norm: inf_norm(&grad),
        c,
        iterations,
    })
}

/// Largest scaled violation of a conservation law between `x` and `p`.
pub fn class_residual(sys: &EventSystem, x: &[f64], p: &[f64]) -> f64 {
    let scale = inf_norm(x).max(inf_norm(p));
    right_kernel(&sys.stoichiometric_matrix())
        .vectors
        .iter()
        .map(|v| {
            let l1: f64 = v.iter().map(|c| c.unsigned_abs() as f64).sum();
            let d: f64 = v.iter().zip(x.iter().zip(p)).map(|(&c, (a, b))| c as f64 * (a - b)).sum();
            d.abs() / (1.0 + l1 * scale)
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LyapunovValue {
    pub value: f64,
    /// `ln(x_i / c_i)`, only for positive `x`.
    pub gradient: Option<Vec<f64>>,
}

/// `Σ x_i(ln x_i - 1 - ln c_i) + c_i`, with a zero component contributing `c_i`.
pub fn lyapunov_value(c: &[f64], x: &[f64]) -> Result<LyapunovValue> {
    if c.len() != x.len() {
        return Err(Error::Dimension {
            expected: c.len(),
            found: x.len(),
        });
    }
    check_positive(c, "reference equilibrium")?;
    if x.iter().any(|&v| v < 0.0 || v.is_nan()) {
        return Err(Error::Domain("Lyapunov function needs a non-negative point".into()));
    }
    let value = c
        .iter()
        .zip(x)
        .map(|(&ci, &xi)| {
            if xi > 0.0 {
                xi * (xi.ln() - 1.0 - ci.ln()) + ci
            } else {
                ci
            }
        })
        .sum();
    let gradient = x
        .iter()
        .all(|&v| v > 0.0)
        .then(|| c.iter().zip(x).map(|(ci, xi)| (xi / ci).ln()).collect());
    Ok(LyapunovValue { value, gradient })
}

/// Time derivative of the Lyapunov function along the flow at a positive
/// point, in closed form `Σ_j (σ_j M_j(x) - τ_j N_j(x))·ln(τ_j N_j(x) / σ_j M_j(x))`.
/// It does not depend on which positive strong equilibrium anchors the
/// Lyapunov function.
pub fn orbital_derivative(sys: &EventSystem, x: &[f64]) -> Result<f64> {
    check_dim(sys, x)?;
    check_positive(x, "orbital derivative point")?;
    Ok(sys
        .events()
        .iter()
        .map(|e| {
            let (fwd, bwd) = e.fluxes(x);
            (fwd - bwd) * (bwd.ln() - fwd.ln())
        })
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_system;

    fn ab() -> EventSystem {
        parse_system("A <-> B ; kf=2 kr=1").unwrap()
    }

    fn example_3_3() -> EventSystem {
        parse_system("<-> X1 + X2 ; kf=6 kr=1\n2 X2 <-> X1 ; kf=2 kr=9").unwrap()
    }

    #[test]
    fn base_point_example_3_3() {
        let c = base_strong_equilibrium(&example_3_3()).unwrap();
        assert!((c[0] - 2.0).abs() < 1e-9 && (c[1] - 3.0).abs() < 1e-9);
        assert!(example_3_3().detailed_balance_residual(&c) <= 1e-12);
    }

    #[test]
    fn base_point_single_event() {
        let sys = parse_system("X1 <-> X2 ; kf=3/7 kr=5").unwrap();
        let c = base_strong_equilibrium(&sys).unwrap();
        let e = &sys.events()[0];
        let (fwd, bwd) = e.fluxes(&c);
        assert!((fwd - bwd).abs() <= 1e-12 * fwd.abs());
    }

    #[test]
    fn base_point_equal_rates_is_ones() {
        let sys = parse_system("A <-> B ; kf=4 kr=4\n2 B <-> C ; kf=1 kr=1").unwrap();
        let c = base_strong_equilibrium(&sys).unwrap();
        for v in c {
            assert!((v - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn base_point_rejects_unnatural() {
        let sys = parse_system("X1 <-> X2 ; kf=1 kr=2\nX1 <-> X2 ; kf=1 kr=1").unwrap();
        assert!(matches!(base_strong_equilibrium(&sys), Err(Error::NotNatural(_))));
    }

    #[test]
    fn class_equilibrium_examples() {
        let sys = ab();
        let c_star = base_strong_equilibrium(&sys).unwrap();
        let r = class_equilibrium(&sys, &c_star, &[2.0, 1.0]).unwrap();
        assert!((r.c[0] - 1.0).abs() < 1e-12 && (r.c[1] - 2.0).abs() < 1e-12);
        assert!(r.class_residual < 1e-12);

        let r = class_equilibrium(&sys, &c_star, &c_star).unwrap();
        assert_eq!(r.iterations, 0);
        assert_eq!(r.c, c_star);

        let sys = example_3_3();
        let c_star = base_strong_equilibrium(&sys).unwrap();
        let r = class_equilibrium(&sys, &c_star, &[0.1, 40.0]).unwrap();
        assert_eq!(r.c, c_star);
    }

    #[test]
    fn class_equilibrium_rejects_nonpositive_point() {
        let sys = ab();
        let c_star = base_strong_equilibrium(&sys).unwrap();
        assert!(matches!(
            class_equilibrium(&sys, &c_star, &[3.0, 0.0]),
            Err(Error::Class(_))
        ));
    }

    #[test]
    fn objective_gradient_matches_finite_differences() {
        let sys = parse_system("2 A <-> B ; kf=1/2 kr=3\nB + C <-> D ; kf=2 kr=1").unwrap();
        let c_star = base_strong_equilibrium(&sys).unwrap();
        let obj = ClassObjective::new(&sys, &c_star, &[0.3, 1.7, 2.0, 0.4]).unwrap();
        let y: Vec<f64> = (0..obj.dim()).map(|k| 0.1 * (k as f64 + 1.0)).collect();
        let g = obj.gradient(&y);
        let h = 1e-6;
        for k in 0..obj.dim() {
            let mut yp = y.clone();
            let mut ym = y.clone();
            yp[k] += h;
            ym[k] -= h;
            let fd = (obj.value(&yp) - obj.value(&ym)) / (2.0 * h);
            assert!((g[k] - fd).abs() <= 1e-5 * (1.0 + fd.abs()), "{} vs {}", g[k], fd);
        }
        assert!(obj.hessian(&y).cholesky().is_some());
    }

    #[test]
    fn lyapunov_examples() {
        let c = [1.0, 2.0];
        assert_eq!(lyapunov_value(&c, &c).unwrap().value, 0.0);
        let v = lyapunov_value(&c, &[2.0, 1.0]).unwrap();
        assert!((v.value - 2f64.ln()).abs() < 1e-15);
        let v = lyapunov_value(&c, &[0.0, 2.0]).unwrap();
        assert_eq!(v.value, 1.0);
        assert!(v.gradient.is_none());
        assert!(matches!(lyapunov_value(&c, &[-1.0, 1.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn orbital_derivative_examples() {
        let sys = example_3_3();
        assert_eq!(orbital_derivative(&sys, &[2.0, 3.0]).unwrap(), 0.0);
        let od = orbital_derivative(&sys, &[1.0, 1.0]).unwrap();
        let expected = 5.0 * (1.0f64 / 6.0).ln() - 7.0 * (9.0f64 / 2.0).ln();
        assert!((od - expected).abs() <= 1e-12 * expected.abs());
        assert!(od < 0.0);

        // second route: ∇g · P
        let c = [2.0, 3.0];
        let x = [1.0, 1.0];
        let grad = lyapunov_value(&c, &x).unwrap().gradient.unwrap();
        let p = sys.mass_action_rhs(&x).unwrap();
        let dot: f64 = grad.iter().zip(&p).map(|(a, b)| a * b).sum();
        assert!((dot - od).abs() <= 1e-12 * od.abs());

        assert!(matches!(orbital_derivative(&sys, &[0.0, 1.0]), Err(Error::Domain(_))));
    }
}

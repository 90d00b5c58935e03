//! Naturality through exact Wegscheider products.
//!
//! Each vector `v` of the left kernel of Γ combines events into a closed
//! walk of the event-graph whose total weight is `Σ v_j ln(σ_j/τ_j)`. The
//! system is natural exactly when all of these products `∏ (σ_j/τ_j)^{v_j}`
//! equal one; checking a basis of the left kernel is enough.

use num::{BigRational, One};
use serde::Serialize;

use crate::linalg::left_kernel;
use crate::system::{EventSystem, Monomial};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CycleCertificate {
    /// Integer combination of events, one entry per event.
    pub combination: Vec<i64>,
    /// `Σ v_j ln(σ_j/τ_j)`.
    pub weight: f64,
    /// `∏ (σ_j/τ_j)^{v_j}`; equal to one iff the cycle carries no energy.
    #[serde(serialize_with = "crate::report::ser_rational")]
    pub exact_product: BigRational,
}

impl CycleCertificate {
    pub fn is_energy_cycle(&self) -> bool {
        !self.exact_product.is_one()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NaturalityVerdict {
    pub natural: bool,
    pub certificates: Vec<CycleCertificate>,
}

impl NaturalityVerdict {
    /// Certificates whose product differs from one.
    pub fn energy_cycles(&self) -> impl Iterator<Item = &CycleCertificate> {
        self.certificates.iter().filter(|c| c.is_energy_cycle())
    }
}

fn rational_pow(base: &BigRational, exp: i64) -> BigRational {
    let p = num::pow(base.clone(), exp.unsigned_abs() as usize);
    if exp < 0 {
        p.recip()
    } else {
        p
    }
}

pub fn certificate(sys: &EventSystem, combination: Vec<i64>) -> CycleCertificate {
    let mut product = BigRational::one();
    let mut weight = 0.0;
    for (e, &k) in sys.events().iter().zip(&combination) {
        if k == 0 {
            continue;
        }
        product *= rational_pow(&e.rate_ratio(), k);
        weight += k as f64 * e.log_ratio();
    }
    CycleCertificate {
        combination,
        weight,
        exact_product: product,
    }
}

/// Exact naturality test over a left-kernel basis of the stoichiometric matrix.
pub fn wegscheider_check(sys: &EventSystem) -> NaturalityVerdict {
    let basis = left_kernel(&sys.stoichiometric_matrix());
    let certificates: Vec<_> = basis
        .vectors
        .into_iter()
        .map(|v| certificate(sys, v))
        .collect();
    NaturalityVerdict {
        natural: certificates.iter().all(|c| !c.is_energy_cycle()),
        certificates,
    }
}

/// An explicit closed walk in the event-graph realising an event
/// combination `v` with `vᵀΓ = 0`.
///
/// The walk starts at the product of every consumed side (`low^{v_j}` for
/// `v_j > 0`, `high^{-v_j}` otherwise) and fires each event `|v_j|` times in
/// index order; it returns to its start because the exponent changes cancel.
pub fn explicit_cycle(sys: &EventSystem, combination: &[i64]) -> Vec<Monomial> {
    let n = sys.dim();
    let mut start = Monomial::one(n);
    for (e, &k) in sys.events().iter().zip(combination) {
        let side = if k > 0 { e.low() } else { e.high() };
        start = start.mul(&side.pow(k.unsigned_abs() as u32));
    }
    let mut walk = vec![start.clone()];
    let mut cur = start;
    for (e, &k) in sys.events().iter().zip(combination) {
        let (from, to) = if k > 0 { (e.low(), e.high()) } else { (e.high(), e.low()) };
        for _ in 0..k.unsigned_abs() {
            let rest = cur
                .checked_div(from)
                .expect("consumed side divides the walk monomial");
            cur = rest.mul(to);
            walk.push(cur.clone());
        }
    }
    walk
}

/// Weight of a walk that follows `explicit_cycle`: the forward direction of
/// event `j` carries `ln(σ_j/τ_j)`, the reverse direction its negative.
pub fn cycle_weight(sys: &EventSystem, combination: &[i64]) -> f64 {
    sys.events()
        .iter()
        .zip(combination)
        .map(|(e, &k)| k as f64 * e.log_ratio())
        .sum()
}

/// Magnitude of the largest certificate weight, for reporting.
pub fn max_weight(verdict: &NaturalityVerdict) -> f64 {
    verdict
        .certificates
        .iter()
        .map(|c| c.weight.abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_system;
    use crate::system::rate_int;

    #[test]
    fn e1_has_energy_cycle() {
        let sys = parse_system("X1 <-> X2 ; kf=1 kr=2\nX1 <-> X2 ; kf=1 kr=1").unwrap();
        let names = sys.species().to_vec();
        assert_eq!(sys.events()[0].display_with(&names).to_string(), "2*X2 - X1");
        let v = wegscheider_check(&sys);
        assert!(!v.natural);
        assert_eq!(v.certificates.len(), 1);
        let c = &v.certificates[0];
        assert_eq!(c.combination, vec![1, -1]);
        assert_eq!(c.exact_product, rate_int(2));
        assert!((c.weight.abs() - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn e2_has_energy_cycle() {
        let sys = parse_system(
            "X1 <-> X2 ; kf=1 kr=1\nX2 + X3 <-> X3 + X4 ; kf=1 kr=2\nX1 + X5 <-> X4 + X5 ; kf=1 kr=1",
        )
        .unwrap();
        let v = wegscheider_check(&sys);
        assert!(!v.natural);
        let c = &v.certificates[0];
        assert_eq!(c.exact_product, rate_int(2));
        assert!((c.weight.abs() - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn example_3_3_is_natural() {
        let sys = parse_system("<-> X1 + X2 ; kf=6 kr=1\n2 X2 <-> X1 ; kf=2 kr=9").unwrap();
        let v = wegscheider_check(&sys);
        assert!(v.natural);
        assert!(v.certificates.is_empty());
    }

    #[test]
    fn explicit_cycle_closes_with_certificate_weight() {
        let sys = parse_system(
            "X1 <-> X2 ; kf=1 kr=1\nX2 + X3 <-> X3 + X4 ; kf=1 kr=2\nX1 + X5 <-> X4 + X5 ; kf=1 kr=1",
        )
        .unwrap();
        let v = wegscheider_check(&sys);
        let cert = &v.certificates[0];
        let walk = explicit_cycle(&sys, &cert.combination);
        assert_eq!(walk.first(), walk.last());
        assert_eq!(walk.len(), 1 + cert.combination.iter().map(|k| k.unsigned_abs() as usize).sum::<usize>());
        for pair in walk.windows(2) {
            assert!(crate::analysis::is_edge(&sys, &pair[0], &pair[1]));
        }
        assert!((cycle_weight(&sys, &cert.combination) - cert.weight).abs() < 1e-15);
    }
}

//! Monomials, binomial events and event-systems, together with the
//! stoichiometric matrix and the mass-action vector field they induce.
//!
//! An event `a·M - b·N` pairs two distinct monomials with positive rates.
//! The pair is always stored so that `M` precedes `N` in the lexicographic
//! order on exponent vectors, which makes the map from reversible reactions
//! to events one-to-one.

use std::cmp::Ordering;
use std::fmt;

use nalgebra::DMatrix;
use num::{BigRational, One, Signed, ToPrimitive};

use crate::error::{Error, Result};

/// Exact positive rate constant.
pub type Rate = BigRational;

/// A monic monomial over `n` species, stored as its exponent vector.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Monomial {
    exponents: Vec<u32>,
}

impl Monomial {
    pub fn new(exponents: Vec<u32>) -> Self {
        Self { exponents }
    }

    /// The constant monomial `1` in `n` variables.
    pub fn one(n: usize) -> Self {
        Self {
            exponents: vec![0; n],
        }
    }

    /// The single variable `X_i` in `n` variables.
    pub fn var(n: usize, i: usize) -> Self {
        let mut exponents = vec![0; n];
        exponents[i] = 1;
        Self { exponents }
    }

    pub fn exponents(&self) -> &[u32] {
        &self.exponents
    }

    pub fn dim(&self) -> usize {
        self.exponents.len()
    }

    pub fn degree(&self) -> u32 {
        self.exponents.iter().sum()
    }

    pub fn is_one(&self) -> bool {
        self.exponents.iter().all(|&e| e == 0)
    }

    /// True if this monomial is exactly the variable `X_i`.
    pub fn is_var(&self, i: usize) -> bool {
        self.exponents
            .iter()
            .enumerate()
            .all(|(k, &e)| if k == i { e == 1 } else { e == 0 })
    }

    /// Index of the variable if this monomial is a single variable.
    pub fn as_var(&self) -> Option<usize> {
        let mut found = None;
        for (k, &e) in self.exponents.iter().enumerate() {
            match e {
                0 => {}
                1 if found.is_none() => found = Some(k),
                _ => return None,
            }
        }
        found
    }

    /// True if every variable with a nonzero exponent is in `vars`.
    pub fn supported_on(&self, vars: &[usize]) -> bool {
        self.exponents
            .iter()
            .enumerate()
            .all(|(k, &e)| e == 0 || vars.contains(&k))
    }

    pub fn divides(&self, other: &Monomial) -> bool {
        self.exponents
            .iter()
            .zip(&other.exponents)
            .all(|(a, b)| a <= b)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        Monomial::new(
            self.exponents
                .iter()
                .zip(&other.exponents)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    pub fn pow(&self, k: u32) -> Monomial {
        Monomial::new(self.exponents.iter().map(|e| e * k).collect())
    }

    /// `self / other`, or `None` when `other` does not divide `self`.
    pub fn checked_div(&self, other: &Monomial) -> Option<Monomial> {
        self.exponents
            .iter()
            .zip(&other.exponents)
            .map(|(a, b)| a.checked_sub(*b))
            .collect::<Option<Vec<_>>>()
            .map(Monomial::new)
    }

    /// Strict lexicographic order: at the least index where the exponents
    /// differ, `self` has the smaller exponent.
    pub fn precedes(&self, other: &Monomial) -> Result<bool> {
        if self.dim() != other.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(self.lex_cmp(other) == Ordering::Less)
    }

    fn lex_cmp(&self, other: &Monomial) -> Ordering {
        for (a, b) in self.exponents.iter().zip(&other.exponents) {
            match a.cmp(b) {
                Ordering::Equal => continue,
                ord => return ord,
            }
        }
        Ordering::Equal
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.exponents
            .iter()
            .zip(x)
            .filter(|(&e, _)| e > 0)
            .map(|(&e, &v)| v.powi(e as i32))
            .product()
    }

    /// Partial derivative with respect to `x_k`, evaluated at `x`.
    pub fn partial(&self, x: &[f64], k: usize) -> f64 {
        let ek = self.exponents[k];
        if ek == 0 {
            return 0.0;
        }
        let mut value = ek as f64 * x[k].powi(ek as i32 - 1);
        for (i, (&e, &v)) in self.exponents.iter().zip(x).enumerate() {
            if i != k && e > 0 {
                value *= v.powi(e as i32);
            }
        }
        value
    }

    /// Render with species names, e.g. `X1*X2^2`; the constant monomial is `1`.
    pub fn display_with<'a>(&'a self, names: &'a [String]) -> MonomialDisplay<'a> {
        MonomialDisplay { mon: self, names }
    }
}

pub struct MonomialDisplay<'a> {
    mon: &'a Monomial,
    names: &'a [String],
}

impl fmt::Display for MonomialDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.mon.is_one() {
            return f.write_str("1");
        }
        let mut first = true;
        for (i, &e) in self.mon.exponents.iter().enumerate() {
            if e == 0 {
                continue;
            }
            if !first {
                f.write_str("*")?;
            }
            first = false;
            let name = self.names.get(i).map(String::as_str).unwrap_or("?");
            if e == 1 {
                write!(f, "{name}")?;
            } else {
                write!(f, "{name}^{e}")?;
            }
        }
        Ok(())
    }
}

/// Strict lexicographic order on exponent vectors.
pub fn monomial_precedes(a: &Monomial, b: &Monomial) -> Result<bool> {
    a.precedes(b)
}

/// A physical event `low_rate·low - high_rate·high` with `low ≺ high`.
#[derive(Clone, Debug)]
pub struct Event {
    low_rate: Rate,
    low: Monomial,
    high_rate: Rate,
    high: Monomial,
    low_rate_f: f64,
    high_rate_f: f64,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.low == other.low
            && self.high == other.high
            && self.low_rate == other.low_rate
            && self.high_rate == other.high_rate
    }
}

impl Eq for Event {}

impl Event {
    /// Build the canonical event from a rate attached to each monomial.
    /// The operands are swapped if needed so the stored first monomial
    /// precedes the second; each rate stays with its monomial.
    pub fn canonical(rate_a: Rate, mon_a: Monomial, rate_b: Rate, mon_b: Monomial) -> Result<Self> {
        if mon_a.dim() != mon_b.dim() {
            return Err(Error::Dimension {
                expected: mon_a.dim(),
                found: mon_b.dim(),
            });
        }
        if mon_a == mon_b {
            return Err(Error::InvalidEvent(
                "both sides are the same monomial".into(),
            ));
        }
        for r in [&rate_a, &rate_b] {
            if !r.is_positive() {
                return Err(Error::Physicality(format!("rate {r} is not positive")));
            }
        }
        let (low_rate, low, high_rate, high) = if mon_a.lex_cmp(&mon_b) == Ordering::Less {
            (rate_a, mon_a, rate_b, mon_b)
        } else {
            (rate_b, mon_b, rate_a, mon_a)
        };
        let low_rate_f = rate_to_f64(&low_rate);
        let high_rate_f = rate_to_f64(&high_rate);
        Ok(Self {
            low_rate,
            low,
            high_rate,
            high,
            low_rate_f,
            high_rate_f,
        })
    }

    pub fn low(&self) -> &Monomial {
        &self.low
    }

    pub fn high(&self) -> &Monomial {
        &self.high
    }

    pub fn low_rate(&self) -> &Rate {
        &self.low_rate
    }

    pub fn high_rate(&self) -> &Rate {
        &self.high_rate
    }

    pub fn low_rate_f64(&self) -> f64 {
        self.low_rate_f
    }

    pub fn high_rate_f64(&self) -> f64 {
        self.high_rate_f
    }

    pub fn dim(&self) -> usize {
        self.low.dim()
    }

    /// Exact ratio `low_rate / high_rate`.
    pub fn rate_ratio(&self) -> BigRational {
        &self.low_rate / &self.high_rate
    }

    /// `ln(low_rate / high_rate)`, the weight of a forward edge in the event-graph.
    pub fn log_ratio(&self) -> f64 {
        ln_rational(&self.low_rate) - ln_rational(&self.high_rate)
    }

    /// Exponent change `high - low`, one row of the stoichiometric matrix.
    pub fn stoich_row(&self) -> Vec<i64> {
        self.high
            .exponents()
            .iter()
            .zip(self.low.exponents())
            .map(|(&h, &l)| h as i64 - l as i64)
            .collect()
    }

    /// The two flux terms `(low_rate·low(x), high_rate·high(x))`.
    pub fn fluxes(&self, x: &[f64]) -> (f64, f64) {
        (self.low_rate_f * self.low.eval(x), self.high_rate_f * self.high.eval(x))
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        let (fwd, bwd) = self.fluxes(x);
        fwd - bwd
    }

    pub fn display_with<'a>(&'a self, names: &'a [String]) -> EventDisplay<'a> {
        EventDisplay { event: self, names }
    }
}

pub struct EventDisplay<'a> {
    event: &'a Event,
    names: &'a [String],
}

fn write_term(f: &mut fmt::Formatter<'_>, rate: &Rate, mon: &Monomial, names: &[String]) -> fmt::Result {
    if mon.is_one() {
        write!(f, "{rate}")
    } else if rate.is_one() {
        write!(f, "{}", mon.display_with(names))
    } else {
        write!(f, "{rate}*{}", mon.display_with(names))
    }
}

impl fmt::Display for EventDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let e = self.event;
        write_term(f, &e.low_rate, &e.low, self.names)?;
        f.write_str(" - ")?;
        write_term(f, &e.high_rate, &e.high, self.names)
    }
}

pub fn canonicalize_event(sigma: Rate, m: Monomial, tau: Rate, n: Monomial) -> Result<Event> {
    Event::canonical(sigma, m, tau, n)
}

pub fn rate_to_f64(r: &Rate) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Natural log of a positive rational, computed from numerator and
/// denominator separately so large terms do not overflow.
pub fn ln_rational(r: &Rate) -> f64 {
    fn ln_big(v: &num::BigInt) -> f64 {
        match v.to_f64() {
            Some(f) if f.is_finite() => f.ln(),
            _ => {
                let bits = v.bits();
                let shift = bits.saturating_sub(60);
                let top = (v >> shift).to_f64().unwrap_or(f64::NAN);
                top.ln() + shift as f64 * std::f64::consts::LN_2
            }
        }
    }
    ln_big(r.numer()) - ln_big(r.denom())
}

/// A finite set of physical events over named species.
#[derive(Clone, Debug, PartialEq)]
pub struct EventSystem {
    species: Vec<String>,
    events: Vec<Event>,
    labels: Vec<Option<String>>,
}

impl EventSystem {
    pub fn new(species: Vec<String>, events: Vec<Event>) -> Result<Self> {
        let labels = vec![None; events.len()];
        Self::with_labels(species, events, labels)
    }

    pub fn with_labels(
        species: Vec<String>,
        events: Vec<Event>,
        labels: Vec<Option<String>>,
    ) -> Result<Self> {
        if events.is_empty() {
            return Err(Error::InvalidEvent("an event-system needs at least one event".into()));
        }
        if labels.len() != events.len() {
            return Err(Error::Dimension {
                expected: events.len(),
                found: labels.len(),
            });
        }
        let n = species.len();
        for e in &events {
            if e.dim() != n {
                return Err(Error::Dimension {
                    expected: n,
                    found: e.dim(),
                });
            }
        }
        for (j, e) in events.iter().enumerate() {
            if let Some(k) = events[..j].iter().position(|f| f == e) {
                return Err(Error::Duplicate(format!(
                    "event {} repeats event {}: {}",
                    j + 1,
                    k + 1,
                    e.display_with(&species)
                )));
            }
        }
        Ok(Self {
            species,
            events,
            labels,
        })
    }

    /// Convenience constructor naming species `X1..Xn`.
    pub fn with_default_names(n: usize, events: Vec<Event>) -> Result<Self> {
        Self::new(default_species_names(n), events)
    }

    pub fn species(&self) -> &[String] {
        &self.species
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn labels(&self) -> &[Option<String>] {
        &self.labels
    }

    /// Number of species `n`.
    pub fn dim(&self) -> usize {
        self.species.len()
    }

    /// Number of events `m`.
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn species_index(&self, name: &str) -> Option<usize> {
        self.species.iter().position(|s| s == name)
    }

    pub fn stoichiometric_matrix(&self) -> StoichMatrix {
        StoichMatrix {
            rows: self.events.iter().map(Event::stoich_row).collect(),
            cols: self.dim(),
        }
    }

    pub fn evaluate_events(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        Ok(self.events.iter().map(|e| e.evaluate(x)).collect())
    }

    /// The mass-action vector field `Γᵀ·(e_1(x), …, e_m(x))`.
    pub fn mass_action_rhs(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let mut out = vec![0.0; self.dim()];
        self.rhs_into(x, &mut out);
        Ok(out)
    }

    /// Unchecked variant of [`mass_action_rhs`](Self::mass_action_rhs) for
    /// integrator inner loops.
    pub(crate) fn rhs_into(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for e in &self.events {
            let flux = e.evaluate(x);
            if flux == 0.0 {
                continue;
            }
            for (i, (&h, &l)) in e.high.exponents().iter().zip(e.low.exponents()).enumerate() {
                if h != l {
                    out[i] += (h as f64 - l as f64) * flux;
                }
            }
        }
    }

    /// Analytic Jacobian of the mass-action vector field.
    pub fn rhs_jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_dim(x)?;
        let n = self.dim();
        let mut jac = DMatrix::zeros(n, n);
        for e in &self.events {
            let row = e.stoich_row();
            for k in 0..n {
                let de = e.low_rate_f * e.low.partial(x, k) - e.high_rate_f * e.high.partial(x, k);
                if de == 0.0 {
                    continue;
                }
                for (i, &g) in row.iter().enumerate() {
                    if g != 0 {
                        jac[(i, k)] += g as f64 * de;
                    }
                }
            }
        }
        Ok(jac)
    }

    /// Largest rate constant over all events, as a float.
    pub fn max_rate(&self) -> f64 {
        self.events
            .iter()
            .map(|e| e.low_rate_f.max(e.high_rate_f))
            .fold(0.0, f64::max)
    }

    /// `max_j |e_j(x)| / max(low flux, high flux)`, zero where both fluxes vanish.
    pub fn detailed_balance_residual(&self, x: &[f64]) -> f64 {
        self.events
            .iter()
            .map(|e| {
                let (a, b) = e.fluxes(x);
                let scale = a.abs().max(b.abs());
                if scale == 0.0 {
                    0.0
                } else {
                    (a - b).abs() / scale
                }
            })
            .fold(0.0, f64::max)
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(())
    }
}

pub fn default_species_names(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("X{i}")).collect()
}

/// Integer matrix with one row per event: `γ_{j,i}` is the exponent of `X_i`
/// in the second monomial minus its exponent in the first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StoichMatrix {
    rows: Vec<Vec<i64>>,
    cols: usize,
}

impl StoichMatrix {
    pub fn from_rows(rows: Vec<Vec<i64>>, cols: usize) -> Result<Self> {
        if let Some(r) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::Dimension {
                expected: cols,
                found: r.len(),
            });
        }
        Ok(Self { rows, cols })
    }

    pub fn rows(&self) -> &[Vec<i64>] {
        &self.rows
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn transpose(&self) -> StoichMatrix {
        let rows = (0..self.cols)
            .map(|i| self.rows.iter().map(|r| r[i]).collect())
            .collect();
        StoichMatrix {
            rows,
            cols: self.rows.len(),
        }
    }

    /// Exact integer product `Γ·v`.
    pub fn mul_vec(&self, v: &[i64]) -> Vec<i64> {
        self.rows
            .iter()
            .map(|r| r.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Exact integer product `vᵀ·Γ`.
    pub fn left_mul_vec(&self, v: &[i64]) -> Vec<i64> {
        (0..self.cols)
            .map(|i| self.rows.iter().zip(v).map(|(r, b)| r[i] * b).sum())
            .collect()
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.nrows(), self.cols, |j, i| self.rows[j][i] as f64)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PointClass {
    Positive,
    NonNegativeZPoint,
    Other,
}

pub fn classify_point(x: &[f64]) -> PointClass {
    if x.iter().all(|&v| v > 0.0) {
        PointClass::Positive
    } else if x.iter().all(|&v| v >= 0.0) {
        PointClass::NonNegativeZPoint
    } else {
        PointClass::Other
    }
}

/// Parse-free helper used throughout tests and examples.
pub fn rate(num: i64, den: i64) -> Rate {
    BigRational::new(num.into(), den.into())
}

pub fn rate_int(v: i64) -> Rate {
    BigRational::from_integer(v.into())
}

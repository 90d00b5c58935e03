//! Generators and independent oracles shared by the integration tests.
#![allow(dead_code)]

use evsys::system::{Event, EventSystem, Monomial, Rate};
use num::{BigInt, BigRational, One, Zero};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn fixture(name: &str) -> String {
    format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

pub fn rat(p: i64, q: i64) -> Rate {
    BigRational::new(p.into(), q.into())
}

pub fn random_rate(rng: &mut ChaCha8Rng) -> Rate {
    rat(rng.gen_range(1..=9), rng.gen_range(1..=9))
}

/// A monomial with total degree in `1..=max_degree` (or the constant one
/// when `allow_one`).
pub fn random_monomial(rng: &mut ChaCha8Rng, n: usize, max_degree: u32, allow_one: bool) -> Monomial {
    loop {
        let mut e = vec![0u32; n];
        let deg = rng.gen_range(0..=max_degree);
        for _ in 0..deg {
            e[rng.gen_range(0..n)] += 1;
        }
        let m = Monomial::new(e);
        if allow_one || !m.is_one() {
            return m;
        }
    }
}

fn assemble(n: usize, mut make: impl FnMut() -> Option<Event>, m: usize) -> EventSystem {
    loop {
        let mut events: Vec<Event> = Vec::new();
        while events.len() < m {
            if let Some(e) = make() {
                if !events.contains(&e) {
                    events.push(e);
                }
            }
        }
        if let Ok(sys) = EventSystem::with_default_names(n, events) {
            return sys;
        }
    }
}

/// Physical system with arbitrary positive rational rates.
pub fn random_physical(rng: &mut ChaCha8Rng, n: usize, m: usize, max_degree: u32) -> EventSystem {
    let mut gen = rng.clone();
    let sys = assemble(
        n,
        || {
            let a = random_monomial(&mut gen, n, max_degree, true);
            let b = random_monomial(&mut gen, n, max_degree, true);
            let (ra, rb) = (random_rate(&mut gen), random_rate(&mut gen));
            Event::canonical(ra, a, rb, b).ok()
        },
        m,
    );
    *rng = gen;
    sys
}

/// Exact value of a monomial at a rational point.
pub fn eval_exact(m: &Monomial, c: &[Rate]) -> Rate {
    m.exponents()
        .iter()
        .zip(c)
        .fold(Rate::one(), |acc, (&e, ci)| acc * num::pow(ci.clone(), e as usize))
}

/// Natural system: rates are chosen so that the rational point `c` is a
/// positive strong equilibrium (`σ M(c) = τ N(c)` exactly).
pub fn random_natural(rng: &mut ChaCha8Rng, n: usize, m: usize, max_degree: u32) -> (EventSystem, Vec<Rate>) {
    let c: Vec<Rate> = (0..n).map(|_| rat(rng.gen_range(1..=4), rng.gen_range(1..=3))).collect();
    let mut gen = rng.clone();
    let sys = assemble(
        n,
        || {
            let a = random_monomial(&mut gen, n, max_degree, true);
            let b = random_monomial(&mut gen, n, max_degree, true);
            let sigma = random_rate(&mut gen);
            let tau = &sigma * eval_exact(&a, &c) / eval_exact(&b, &c);
            Event::canonical(sigma, a, tau, b).ok()
        },
        m,
    );
    *rng = gen;
    (sys, c)
}

/// Natural atomic system. Atoms are the first `atoms` species; every other
/// species is a composite with a formation event from atoms, and extra
/// events exchange atoms between composites.
pub fn random_atomic(rng: &mut ChaCha8Rng) -> (EventSystem, Vec<Rate>) {
    let k = rng.gen_range(1..=2);
    // A single atom only leaves contents 2 and 3 for composites.
    let composites = rng.gen_range(1..=if k == 1 { 2 } else { 3 });
    let n = k + composites;
    // Atom content of each species.
    let mut content: Vec<Vec<u32>> = (0..k)
        .map(|a| (0..k).map(|b| u32::from(a == b)).collect())
        .collect();
    while content.len() < n {
        let d: Vec<u32> = (0..k).map(|_| rng.gen_range(0..=if k == 1 { 3 } else { 2 })).collect();
        if d.iter().sum::<u32>() >= 2 && !content.contains(&d) {
            content.push(d);
        }
    }
    let c: Vec<Rate> = (0..n).map(|_| rat(rng.gen_range(1..=4), rng.gen_range(1..=3))).collect();
    let mon = |e: Vec<u32>| Monomial::new(e);
    let mut events = Vec::new();
    let natural_event = |rng: &mut ChaCha8Rng, a: Monomial, b: Monomial| {
        let sigma = random_rate(rng);
        let tau = &sigma * eval_exact(&a, &c) / eval_exact(&b, &c);
        Event::canonical(sigma, a, tau, b).ok()
    };
    for (j, d) in content.iter().enumerate().skip(k) {
        let mut atoms = vec![0; n];
        atoms[..k].copy_from_slice(d);
        if let Some(e) = natural_event(rng, mon(atoms), Monomial::var(n, j)) {
            events.push(e);
        }
    }
    // Exchange events X_i·X_j ⇌ X_l·(leftover atoms).
    for _ in 0..rng.gen_range(0..=2) {
        let (i, j, l) = (rng.gen_range(k..n), rng.gen_range(k..n), rng.gen_range(k..n));
        let total: Vec<u32> = (0..k).map(|a| content[i][a] + content[j][a]).collect();
        if (0..k).any(|a| content[l][a] > total[a]) || l == i || l == j {
            continue;
        }
        let mut lhs = vec![0; n];
        lhs[i] += 1;
        lhs[j] += 1;
        let mut rhs = vec![0; n];
        rhs[l] = 1;
        for a in 0..k {
            rhs[a] = total[a] - content[l][a];
        }
        if let Some(e) = natural_event(rng, mon(lhs), mon(rhs)) {
            if !events.contains(&e) {
                events.push(e);
            }
        }
    }
    (EventSystem::with_default_names(n, events).expect("valid atomic system"), c)
}

pub fn to_f64(c: &[Rate]) -> Vec<f64> {
    c.iter().map(evsys::system::rate_to_f64).collect()
}

pub fn random_positive(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(0.1..4.0)).collect()
}

/// Rank over ℚ by plain Gaussian elimination with rational pivots.
pub fn rational_rank(rows: &[Vec<i64>], cols: usize) -> usize {
    let mut a: Vec<Vec<BigRational>> = rows
        .iter()
        .map(|r| r.iter().map(|&v| BigRational::from_integer(BigInt::from(v))).collect())
        .collect();
    let mut rank = 0;
    for col in 0..cols {
        let Some(p) = (rank..a.len()).find(|&r| !a[r][col].is_zero()) else {
            continue;
        };
        a.swap(rank, p);
        let pivot = a[rank][col].clone();
        for r in 0..a.len() {
            if r != rank && !a[r][col].is_zero() {
                let f = &a[r][col] / &pivot;
                for k in 0..cols {
                    let v = &f * &a[rank][k];
                    a[r][k] -= v;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// `Γ v` and `vᵀ Γ` with exact integer arithmetic.
pub fn mat_vec(rows: &[Vec<i64>], v: &[i64]) -> Vec<i128> {
    rows.iter()
        .map(|r| r.iter().zip(v).map(|(&a, &b)| a as i128 * b as i128).sum())
        .collect()
}

pub fn vec_mat(rows: &[Vec<i64>], cols: usize, v: &[i64]) -> Vec<i128> {
    (0..cols)
        .map(|c| rows.iter().zip(v).map(|(r, &b)| r[c] as i128 * b as i128).sum())
        .collect()
}

/// Mass-action field recomputed species by species from the definition.
pub fn rhs_oracle(sys: &EventSystem, x: &[f64]) -> Vec<f64> {
    let n = sys.dim();
    (0..n)
        .map(|i| {
            sys.events()
                .iter()
                .map(|e| {
                    let m: f64 = (0..n).map(|k| x[k].powi(e.low().exponents()[k] as i32)).product();
                    let nn: f64 = (0..n).map(|k| x[k].powi(e.high().exponents()[k] as i32)).product();
                    let flux = e.low_rate_f64() * m - e.high_rate_f64() * nn;
                    (e.high().exponents()[i] as f64 - e.low().exponents()[i] as f64) * flux
                })
                .sum()
        })
        .collect()
}

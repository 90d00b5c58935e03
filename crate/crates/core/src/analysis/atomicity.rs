//! Event-graph search, atoms, and the atomicity criterion.
//!
//! The event-graph has every monomial as a vertex; an event `σM - τN` joins
//! `T·M` and `T·N` for every monomial `T`. The graph is infinite, so all
//! searches are breadth-first under a degree cap and a node budget, and an
//! exhausted budget is reported separately from a fully explored component.

use std::collections::{HashMap, VecDeque};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::system::{EventSystem, Monomial};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SearchBudget {
    /// Largest total degree a visited monomial may have. `None` derives
    /// `start degree + 8 · (largest per-event degree change)`.
    pub max_total_degree: Option<u32>,
    pub max_nodes: usize,
}

impl Default for SearchBudget {
    fn default() -> Self {
        Self {
            max_total_degree: None,
            max_nodes: 100_000,
        }
    }
}

impl SearchBudget {
    pub fn degree_cap(&self, sys: &EventSystem, start: &Monomial) -> u32 {
        self.max_total_degree.unwrap_or_else(|| {
            let change = sys
                .events()
                .iter()
                .map(|e| e.high().degree().abs_diff(e.low().degree()))
                .max()
                .unwrap_or(0);
            start.degree() + 8 * change
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SearchOutcome {
    /// A monomial over the target variables, with the path that reached it.
    Found { monomial: Monomial, path: Vec<Monomial> },
    /// The whole component was explored without a hit.
    Exhausted,
    /// The degree cap or node budget cut the search short.
    BudgetExceeded,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SearchResult {
    pub outcome: SearchOutcome,
    pub nodes: usize,
    pub degree_cap: u32,
}

impl SearchResult {
    pub fn found(&self) -> Option<&Monomial> {
        match &self.outcome {
            SearchOutcome::Found { monomial, .. } => Some(monomial),
            _ => None,
        }
    }
}

/// Monomials adjacent to `m`, following events in `order`.
fn neighbours<'a>(
    sys: &'a EventSystem,
    m: &'a Monomial,
    order: &'a [usize],
) -> impl Iterator<Item = Monomial> + 'a {
    order.iter().flat_map(move |&j| {
        let e = &sys.events()[j];
        let fwd = m.checked_div(e.low()).map(|t| t.mul(e.high()));
        let bwd = m.checked_div(e.high()).map(|t| t.mul(e.low()));
        fwd.into_iter().chain(bwd)
    })
}

/// Whether `a` and `b` are joined by an edge of the event-graph.
pub fn is_edge(sys: &EventSystem, a: &Monomial, b: &Monomial) -> bool {
    let order: Vec<usize> = (0..sys.len()).collect();
    let found = neighbours(sys, a, &order).any(|m| &m == b);
    found
}

/// Breadth-first search from `start` for a monomial supported on `targets`.
pub fn connected_search(
    sys: &EventSystem,
    start: &Monomial,
    targets: &[usize],
    budget: SearchBudget,
) -> SearchResult {
    let order: Vec<usize> = (0..sys.len()).collect();
    connected_search_ordered(sys, start, targets, budget, &order)
}

/// Like [`connected_search`] with an explicit event visiting order.
pub fn connected_search_ordered(
    sys: &EventSystem,
    start: &Monomial,
    targets: &[usize],
    budget: SearchBudget,
    order: &[usize],
) -> SearchResult {
    let cap = budget.degree_cap(sys, start);
    let done = |outcome, nodes| SearchResult {
        outcome,
        nodes,
        degree_cap: cap,
    };
    if start.supported_on(targets) {
        return done(
            SearchOutcome::Found {
                monomial: start.clone(),
                path: vec![start.clone()],
            },
            1,
        );
    }
    let mut parent: HashMap<Monomial, Option<Monomial>> = HashMap::new();
    parent.insert(start.clone(), None);
    let mut queue = VecDeque::from([start.clone()]);
    let mut truncated = false;
    while let Some(cur) = queue.pop_front() {
        for next in neighbours(sys, &cur, order) {
            if parent.contains_key(&next) {
                continue;
            }
            if next.degree() > cap {
                truncated = true;
                continue;
            }
            if parent.len() >= budget.max_nodes {
                return done(SearchOutcome::BudgetExceeded, parent.len());
            }
            parent.insert(next.clone(), Some(cur.clone()));
            if next.supported_on(targets) {
                let mut path = vec![next.clone()];
                let mut at = &next;
                while let Some(Some(p)) = parent.get(at) {
                    path.push(p.clone());
                    at = p;
                }
                path.reverse();
                let nodes = parent.len();
                return done(SearchOutcome::Found { monomial: next, path }, nodes);
            }
            queue.push_back(next);
        }
    }
    let nodes = parent.len();
    if truncated {
        done(SearchOutcome::BudgetExceeded, nodes)
    } else {
        done(SearchOutcome::Exhausted, nodes)
    }
}

/// Species whose component is a singleton: no event side is `1` or `X_i`.
pub fn compute_atoms(sys: &EventSystem) -> Vec<usize> {
    (0..sys.dim())
        .filter(|&i| {
            sys.events().iter().all(|e| {
                [e.low(), e.high()]
                    .iter()
                    .all(|side| !side.is_one() && !side.is_var(i))
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BSet {
    /// Species that never form a whole side of an event on their own.
    pub species: Vec<usize>,
    /// Some event has the constant monomial as a side; the criterion does
    /// not apply then.
    pub constant_side: bool,
}

pub fn compute_b_set(sys: &EventSystem) -> BSet {
    let species = (0..sys.dim())
        .filter(|&i| {
            sys.events()
                .iter()
                .all(|e| !e.low().is_var(i) && !e.high().is_var(i))
        })
        .collect();
    let constant_side = sys
        .events()
        .iter()
        .any(|e| e.low().is_one() || e.high().is_one());
    BSet {
        species,
        constant_side,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum AtomicityStatus {
    Atomic,
    NotAtomic,
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    /// `∏ M_i^{a_i} ≠ ∏ M_i^{b_i}` for the event with index `event`.
    Equation {
        event: usize,
        lhs: Monomial,
        rhs: Monomial,
    },
    /// The component of `X_species` was explored completely and holds no
    /// monomial over the criterion variables.
    NoWitness { species: usize },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct BudgetUsage {
    pub nodes: usize,
    pub max_degree_cap: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AtomicityVerdict {
    pub status: AtomicityStatus,
    pub atoms: Vec<usize>,
    pub b_set: BSet,
    /// One monomial per species, each over the criterion variables.
    pub witness: Option<Vec<Monomial>>,
    pub violation: Option<Violation>,
    pub budget_used: BudgetUsage,
    pub note: Option<String>,
}

/// `(∏ M_i^{a_i}, ∏ M_i^{b_i})` for one event, `a` and `b` being the
/// exponents of its two sides.
pub fn substitute(witness: &[Monomial], event_low: &Monomial, event_high: &Monomial) -> (Monomial, Monomial) {
    let n = witness.first().map_or(0, Monomial::dim);
    let apply = |side: &Monomial| {
        side.exponents()
            .iter()
            .zip(witness)
            .fold(Monomial::one(n), |acc, (&a, m)| acc.mul(&m.pow(a)))
    };
    (apply(event_low), apply(event_high))
}

/// The single-event system `σ - τX_1` in one variable.
fn is_constant_pair_system(sys: &EventSystem) -> bool {
    sys.dim() == 1 && sys.len() == 1 && {
        let e = &sys.events()[0];
        e.low().is_one() && e.high().is_var(0)
    }
}

pub fn check_atomicity(sys: &EventSystem, budget: SearchBudget) -> AtomicityVerdict {
    let order: Vec<usize> = (0..sys.len()).collect();
    check_atomicity_ordered(sys, budget, &order)
}

/// Atomicity with an explicit event visiting order for the witness
/// searches. Any order yields the same status.
pub fn check_atomicity_ordered(sys: &EventSystem, budget: SearchBudget, order: &[usize]) -> AtomicityVerdict {
    let n = sys.dim();
    let atoms = compute_atoms(sys);
    let b_set = compute_b_set(sys);
    let mut verdict = AtomicityVerdict {
        status: AtomicityStatus::Unknown,
        atoms,
        b_set: b_set.clone(),
        witness: None,
        violation: None,
        budget_used: BudgetUsage::default(),
        note: None,
    };

    if b_set.constant_side {
        if is_constant_pair_system(sys) {
            verdict.status = AtomicityStatus::Atomic;
            verdict.witness = Some(vec![Monomial::one(n)]);
            verdict.note = Some(
                "single event joining 1 and the only species: every monomial lies in one component containing 1, the only monomial over the empty atom set".into(),
            );
        } else {
            verdict.note = Some(
                "an event has the constant monomial as a side; the witness criterion does not apply".into(),
            );
        }
        return verdict;
    }

    let mut witness = Vec::with_capacity(n);
    let mut incomplete = false;
    for i in 0..n {
        let start = Monomial::var(n, i);
        let res = connected_search_ordered(sys, &start, &b_set.species, budget, order);
        verdict.budget_used.nodes += res.nodes;
        verdict.budget_used.max_degree_cap = verdict.budget_used.max_degree_cap.max(res.degree_cap);
        match res.outcome {
            SearchOutcome::Found { monomial, .. } => witness.push(monomial),
            SearchOutcome::Exhausted => {
                verdict.status = AtomicityStatus::NotAtomic;
                verdict.violation = Some(Violation::NoWitness { species: i });
                return verdict;
            }
            SearchOutcome::BudgetExceeded => {
                incomplete = true;
                witness.push(Monomial::one(n));
            }
        }
    }
    if incomplete {
        verdict.note = Some("a witness search exhausted its budget".into());
        return verdict;
    }

    for (j, e) in sys.events().iter().enumerate() {
        let (lhs, rhs) = substitute(&witness, e.low(), e.high());
        if lhs != rhs {
            verdict.status = AtomicityStatus::NotAtomic;
            verdict.violation = Some(Violation::Equation { event: j, lhs, rhs });
            verdict.witness = Some(witness);
            return verdict;
        }
    }
    verdict.status = AtomicityStatus::Atomic;
    verdict.witness = Some(witness);
    verdict
}

/// Atom content of every species: `vectors[j]` is the exponent vector of
/// the unique atom monomial in the component of `X_j`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AtomDecomposition {
    pub atoms: Vec<usize>,
    pub vectors: Vec<Vec<u32>>,
}

impl AtomDecomposition {
    /// Additive extension to an arbitrary monomial.
    pub fn decompose(&self, m: &Monomial) -> Vec<u32> {
        let n = self.vectors.len();
        let mut out = vec![0; n];
        for (j, &e) in m.exponents().iter().enumerate() {
            for (o, &d) in out.iter_mut().zip(&self.vectors[j]) {
                *o += e * d;
            }
        }
        out
    }

    /// Conservation law of each atom: `κ_a = (D_a(X_1), …, D_a(X_n))`.
    pub fn conservation_laws(&self) -> Vec<Vec<i64>> {
        self.atoms
            .iter()
            .map(|&a| self.vectors.iter().map(|v| v[a] as i64).collect())
            .collect()
    }
}

pub fn atomic_decomposition(sys: &EventSystem, budget: SearchBudget) -> Result<AtomDecomposition> {
    let verdict = check_atomicity(sys, budget);
    if verdict.status != AtomicityStatus::Atomic {
        return Err(Error::Atomicity(format!(
            "decomposition needs an atomic system, verdict was {:?}",
            verdict.status
        )));
    }
    let n = sys.dim();
    let atoms = verdict.atoms;
    let mut vectors = Vec::with_capacity(n);
    for j in 0..n {
        let start = Monomial::var(n, j);
        let res = connected_search(sys, &start, &atoms, budget);
        match res.outcome {
            SearchOutcome::Found { monomial, .. } => vectors.push(monomial.exponents().to_vec()),
            SearchOutcome::BudgetExceeded => {
                return Err(Error::Budget(format!(
                    "no atom monomial found for species {} within degree {} and {} nodes",
                    sys.species()[j],
                    res.degree_cap,
                    budget.max_nodes
                )))
            }
            SearchOutcome::Exhausted => {
                return Err(Error::Atomicity(format!(
                    "component of {} holds no atom monomial",
                    sys.species()[j]
                )))
            }
        }
    }
    Ok(AtomDecomposition { atoms, vectors })
}

pub fn atom_conservation_laws(sys: &EventSystem, budget: SearchBudget) -> Result<Vec<Vec<i64>>> {
    Ok(atomic_decomposition(sys, budget)?.conservation_laws())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_system;

    fn example_2_1() -> EventSystem {
        parse_system("X1 + X1 <-> X2 + X2 ; kf=1 kr=1").unwrap()
    }

    fn example_2_2() -> EventSystem {
        parse_system(
            "species: X1, X2, X3, X4, X5\n2 X4 <-> X2 ; kf=1 kr=1\n2 X5 <-> X3 ; kf=1 kr=1\nX2 + X3 <-> X1 ; kf=1 kr=1",
        )
        .unwrap()
    }

    fn example_2_3() -> EventSystem {
        parse_system("<-> X1 ; kf=1 kr=1").unwrap()
    }

    fn mono(e: &[u32]) -> Monomial {
        Monomial::new(e.to_vec())
    }

    #[test]
    fn atoms_and_b_sets() {
        assert_eq!(compute_atoms(&example_2_2()), vec![3, 4]);
        assert!(compute_atoms(&example_2_3()).is_empty());
        assert_eq!(compute_atoms(&example_2_1()), vec![0, 1]);

        assert_eq!(compute_b_set(&example_2_1()).species, vec![0, 1]);
        assert_eq!(compute_b_set(&example_2_2()).species, vec![3, 4]);
        let b = compute_b_set(&example_2_3());
        assert!(b.constant_side);
        assert!(!compute_b_set(&example_2_2()).constant_side);
    }

    #[test]
    fn search_reaches_atom_monomial() {
        let sys = example_2_2();
        let res = connected_search(&sys, &Monomial::var(5, 0), &[3, 4], SearchBudget::default());
        let SearchOutcome::Found { monomial, path } = res.outcome else {
            panic!("expected a hit");
        };
        assert_eq!(monomial, mono(&[0, 0, 0, 2, 2]));
        assert_eq!(path.first(), Some(&Monomial::var(5, 0)));
        for pair in path.windows(2) {
            assert!(is_edge(&sys, &pair[0], &pair[1]));
        }
        // the path written out by hand is a path too
        let by_hand = [
            mono(&[1, 0, 0, 0, 0]),
            mono(&[0, 1, 1, 0, 0]),
            mono(&[0, 1, 0, 0, 2]),
            mono(&[0, 0, 0, 2, 2]),
        ];
        for pair in by_hand.windows(2) {
            assert!(is_edge(&sys, &pair[0], &pair[1]));
        }

        let res = connected_search(&sys, &Monomial::var(5, 3), &[3, 4], SearchBudget::default());
        assert_eq!(res.found(), Some(&Monomial::var(5, 3)));
        assert_eq!(res.nodes, 1);
    }

    #[test]
    fn search_exhausts_finite_component() {
        let sys = example_2_1();
        let res = connected_search(&sys, &Monomial::var(2, 0), &[1], SearchBudget::default());
        assert_eq!(res.outcome, SearchOutcome::Exhausted);
        assert_eq!(res.nodes, 1);
    }

    #[test]
    fn search_reports_budget_exhaustion() {
        // X1 <-> X2 X3 and X2 <-> X1 X3: the component of X1 never reaches {X3}
        let sys = parse_system("X1 <-> X2 + X3 ; kf=1 kr=1\nX2 <-> X1 + X3 ; kf=1 kr=1").unwrap();
        let res = connected_search(&sys, &Monomial::var(3, 0), &[2], SearchBudget::default());
        assert_eq!(res.outcome, SearchOutcome::BudgetExceeded);
        let tight = SearchBudget {
            max_total_degree: Some(100),
            max_nodes: 10,
        };
        let res = connected_search(&sys, &Monomial::var(3, 0), &[2], tight);
        assert_eq!(res.outcome, SearchOutcome::BudgetExceeded);
        assert!(res.nodes <= 10);
        let v = check_atomicity(&sys, SearchBudget::default());
        assert_eq!(v.status, AtomicityStatus::Unknown);
    }

    #[test]
    fn atomicity_examples() {
        let v = check_atomicity(&example_2_1(), SearchBudget::default());
        assert_eq!(v.status, AtomicityStatus::NotAtomic);
        assert_eq!(
            v.violation,
            Some(Violation::Equation {
                event: 0,
                lhs: mono(&[0, 2]),
                rhs: mono(&[2, 0]),
            })
        );

        let v = check_atomicity(&example_2_2(), SearchBudget::default());
        assert_eq!(v.status, AtomicityStatus::Atomic);
        assert_eq!(
            v.witness.unwrap(),
            vec![
                mono(&[0, 0, 0, 2, 2]),
                mono(&[0, 0, 0, 2, 0]),
                mono(&[0, 0, 0, 0, 2]),
                mono(&[0, 0, 0, 1, 0]),
                mono(&[0, 0, 0, 0, 1]),
            ]
        );

        let v = check_atomicity(&example_2_3(), SearchBudget::default());
        assert_eq!(v.status, AtomicityStatus::Atomic);
        assert!(v.atoms.is_empty());
        assert!(v.note.is_some());

        // other constant-side systems are left undecided
        let sys = parse_system("<-> X1 ; kf=1 kr=1\nX1 <-> X2 ; kf=1 kr=1").unwrap();
        assert_eq!(check_atomicity(&sys, SearchBudget::default()).status, AtomicityStatus::Unknown);
    }

    #[test]
    fn no_witness_is_not_atomic() {
        let sys = parse_system("X1 <-> X2 ; kf=1 kr=3").unwrap();
        let v = check_atomicity(&sys, SearchBudget::default());
        assert_eq!(v.status, AtomicityStatus::NotAtomic);
        assert_eq!(v.violation, Some(Violation::NoWitness { species: 0 }));
    }

    #[test]
    fn decomposition_and_atom_laws() {
        let sys = example_2_2();
        let d = atomic_decomposition(&sys, SearchBudget::default()).unwrap();
        assert_eq!(d.vectors[0], vec![0, 0, 0, 2, 2]);
        assert_eq!(d.vectors[3], vec![0, 0, 0, 1, 0]);
        let d1 = d.decompose(&Monomial::var(5, 0));
        let d23 = d.decompose(&mono(&[0, 1, 1, 0, 0]));
        assert_eq!(d1, d23);

        let laws = d.conservation_laws();
        assert_eq!(laws, vec![vec![2, 2, 0, 1, 0], vec![2, 0, 2, 0, 1]]);
        let g = sys.stoichiometric_matrix();
        for k in &laws {
            assert!(g.mul_vec(k).iter().all(|&v| v == 0));
        }

        let d = atomic_decomposition(&example_2_3(), SearchBudget::default()).unwrap();
        assert_eq!(d.vectors, vec![vec![0]]);
        assert!(d.conservation_laws().is_empty());

        assert!(matches!(
            atomic_decomposition(&example_2_1(), SearchBudget::default()),
            Err(Error::Atomicity(_))
        ));
    }
}

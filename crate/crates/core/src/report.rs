//! Machine-readable analysis report.
//!
//! Serialization is deterministic: vectors keep their computed order, floats
//! use the shortest round-trip representation and rationals print as `p/q`.

use std::fmt::Write as _;

use num::BigRational;
use serde::{Serialize, Serializer};

use crate::analysis::{
    atom_conservation_laws, check_atomicity, explicit_cycle, wegscheider_check, AtomicityStatus,
    AtomicityVerdict, NaturalityVerdict, SearchBudget, Violation,
};
use crate::equilibrium::{base_strong_equilibrium_with, class_equilibrium_with, EquilibriumOptions, EquilibriumResult};
use crate::linalg::{left_kernel, right_kernel};
use crate::system::{EventSystem, Monomial};

pub const SCHEMA_VERSION: u32 = 1;

/// Exit bit set when the system is not natural.
pub const EXIT_NOT_NATURAL: i32 = 3;
/// Exit bit set when the atomicity search was inconclusive.
pub const EXIT_ATOMICITY_UNKNOWN: i32 = 4;

pub fn ser_rational<S: Serializer>(r: &BigRational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&r.to_string())
}

/// Where a configuration value came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Flag,
    Env,
    Default,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Setting<T> {
    pub value: T,
    pub source: Source,
}

impl<T> Setting<T> {
    pub fn new(value: T, source: Source) -> Self {
        Self { value, source }
    }

    pub fn default_value(value: T) -> Self {
        Self::new(value, Source::Default)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnalysisConfig {
    /// `None` means the degree cap derived from the system.
    pub budget_degree: Setting<Option<u32>>,
    pub budget_nodes: Setting<usize>,
    pub jobs: Setting<usize>,
    pub equilibrium: EquilibriumOptions,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        let budget = SearchBudget::default();
        Self {
            budget_degree: Setting::default_value(budget.max_total_degree),
            budget_nodes: Setting::default_value(budget.max_nodes),
            jobs: Setting::default_value(1),
            equilibrium: EquilibriumOptions::default(),
        }
    }
}

impl AnalysisConfig {
    pub fn budget(&self) -> SearchBudget {
        SearchBudget {
            max_total_degree: self.budget_degree.value,
            max_nodes: self.budget_nodes.value,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SystemSummary {
    pub n: usize,
    pub m: usize,
    pub species: Vec<String>,
    /// Canonical binomials, `σM - τN` with `M ≺ N`.
    pub events: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertificateReport {
    pub combination: Vec<i64>,
    pub weight: f64,
    #[serde(serialize_with = "ser_rational")]
    pub exact_product: BigRational,
    pub energy_cycle: bool,
    /// Monomials of a closed walk realising the combination.
    pub cycle: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NaturalityReport {
    pub natural: bool,
    pub certificates: Vec<CertificateReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ViolationReport {
    Equation { event: usize, lhs: String, rhs: String },
    NoWitness { species: String },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AtomicityReport {
    pub status: AtomicityStatus,
    pub atoms: Vec<String>,
    pub b_set: Vec<String>,
    pub constant_side: bool,
    pub witness: Option<Vec<String>>,
    pub violation: Option<ViolationReport>,
    pub nodes_explored: usize,
    pub degree_cap: u32,
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassReport {
    pub at: Vec<f64>,
    pub result: Option<EquilibriumResult>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquilibriaReport {
    pub base: Option<Vec<f64>>,
    pub base_detailed_balance_residual: Option<f64>,
    pub classes: Vec<ClassReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub schema_version: u32,
    pub system: SystemSummary,
    pub stoichiometric_matrix: Vec<Vec<i64>>,
    pub right_kernel: Vec<Vec<i64>>,
    pub left_kernel: Vec<Vec<i64>>,
    pub naturality: NaturalityReport,
    pub atomicity: AtomicityReport,
    /// One law per atom; present only for atomic systems.
    pub atom_laws: Option<Vec<Vec<i64>>>,
    pub atom_laws_error: Option<String>,
    pub equilibria: EquilibriaReport,
    pub config: AnalysisConfig,
}

fn show(m: &Monomial, names: &[String]) -> String {
    m.display_with(names).to_string()
}

fn naturality_report(sys: &EventSystem, verdict: &NaturalityVerdict) -> NaturalityReport {
    let names = sys.species();
    NaturalityReport {
        natural: verdict.natural,
        certificates: verdict
            .certificates
            .iter()
            .map(|c| CertificateReport {
                combination: c.combination.clone(),
                weight: c.weight,
                exact_product: c.exact_product.clone(),
                energy_cycle: c.is_energy_cycle(),
                cycle: explicit_cycle(sys, &c.combination)
                    .iter()
                    .map(|m| show(m, names))
                    .collect(),
            })
            .collect(),
    }
}

fn atomicity_report(sys: &EventSystem, v: &AtomicityVerdict) -> AtomicityReport {
    let names = sys.species();
    let pick = |ix: &[usize]| ix.iter().map(|&i| names[i].clone()).collect::<Vec<_>>();
    AtomicityReport {
        status: v.status,
        atoms: pick(&v.atoms),
        b_set: pick(&v.b_set.species),
        constant_side: v.b_set.constant_side,
        witness: v
            .witness
            .as_ref()
            .map(|w| w.iter().map(|m| show(m, names)).collect()),
        violation: v.violation.as_ref().map(|viol| match viol {
            Violation::Equation { event, lhs, rhs } => ViolationReport::Equation {
                event: *event,
                lhs: show(lhs, names),
                rhs: show(rhs, names),
            },
            Violation::NoWitness { species } => ViolationReport::NoWitness {
                species: names[*species].clone(),
            },
        }),
        nodes_explored: v.budget_used.nodes,
        degree_cap: v.budget_used.max_degree_cap,
        note: v.note.clone(),
    }
}

fn solve_classes(sys: &EventSystem, c_star: &[f64], points: &[Vec<f64>], cfg: &AnalysisConfig) -> Vec<ClassReport> {
    let solve = |p: &Vec<f64>| match class_equilibrium_with(sys, c_star, p, &cfg.equilibrium) {
        Ok(r) => ClassReport {
            at: p.clone(),
            result: Some(r),
            error: None,
        },
        Err(e) => ClassReport {
            at: p.clone(),
            result: None,
            error: Some(e.to_string()),
        },
    };
    let jobs = cfg.jobs.value.max(1).min(points.len().max(1));
    if jobs == 1 {
        return points.iter().map(solve).collect();
    }
    let chunk = points.len().div_ceil(jobs);
    std::thread::scope(|scope| {
        let handles: Vec<_> = points
            .chunks(chunk)
            .map(|part| scope.spawn(move || part.iter().map(solve).collect::<Vec<_>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("class solve thread panicked"))
            .collect()
    })
}

/// Run every analysis on `sys`; `points` selects the conservation classes
/// whose equilibria are reported.
pub fn analyze(sys: &EventSystem, points: &[Vec<f64>], cfg: &AnalysisConfig) -> AnalysisReport {
    let names = sys.species().to_vec();
    let g = sys.stoichiometric_matrix();
    let naturality = wegscheider_check(sys);
    let budget = cfg.budget();
    let atomicity = check_atomicity(sys, budget);

    let (atom_laws, atom_laws_error) = if atomicity.status == AtomicityStatus::Atomic {
        match atom_conservation_laws(sys, budget) {
            Ok(l) => (Some(l), None),
            Err(e) => (None, Some(e.to_string())),
        }
    } else {
        (None, None)
    };

    let equilibria = if naturality.natural {
        match base_strong_equilibrium_with(sys, &cfg.equilibrium) {
            Ok(c) => EquilibriaReport {
                base_detailed_balance_residual: Some(sys.detailed_balance_residual(&c)),
                classes: solve_classes(sys, &c, points, cfg),
                base: Some(c),
            },
            Err(e) => EquilibriaReport {
                base: None,
                base_detailed_balance_residual: None,
                classes: points
                    .iter()
                    .map(|p| ClassReport {
                        at: p.clone(),
                        result: None,
                        error: Some(e.to_string()),
                    })
                    .collect(),
            },
        }
    } else {
        EquilibriaReport {
            base: None,
            base_detailed_balance_residual: None,
            classes: Vec::new(),
        }
    };

    AnalysisReport {
        schema_version: SCHEMA_VERSION,
        system: SystemSummary {
            n: sys.dim(),
            m: sys.len(),
            species: names.clone(),
            events: sys
                .events()
                .iter()
                .map(|e| e.display_with(&names).to_string())
                .collect(),
        },
        stoichiometric_matrix: g.rows().to_vec(),
        right_kernel: right_kernel(&g).vectors,
        left_kernel: left_kernel(&g).vectors,
        naturality: naturality_report(sys, &naturality),
        atomicity: atomicity_report(sys, &atomicity),
        atom_laws,
        atom_laws_error,
        equilibria,
        config: cfg.clone(),
    }
}

impl AnalysisReport {
    /// Bit flags: [`EXIT_NOT_NATURAL`] and [`EXIT_ATOMICITY_UNKNOWN`].
    pub fn exit_code(&self) -> i32 {
        let mut code = 0;
        if !self.naturality.natural {
            code |= EXIT_NOT_NATURAL;
        }
        if self.atomicity.status == AtomicityStatus::Unknown {
            code |= EXIT_ATOMICITY_UNKNOWN;
        }
        code
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Plain-text rendering.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let sys = &self.system;
        let _ = writeln!(s, "species ({}): {}", sys.n, sys.species.join(", "));
        let _ = writeln!(s, "events ({}):", sys.m);
        for (e, row) in sys.events.iter().zip(&self.stoichiometric_matrix) {
            let _ = writeln!(s, "  {e:<30} {}", fmt_ivec(row));
        }
        let _ = writeln!(s, "conservation laws (right kernel): {}", fmt_basis(&self.right_kernel));
        let _ = writeln!(s, "event cycles (left kernel): {}", fmt_basis(&self.left_kernel));

        let nat = &self.naturality;
        let _ = writeln!(s, "natural: {}", if nat.natural { "yes" } else { "no" });
        for c in &nat.certificates {
            let _ = writeln!(
                s,
                "  cycle {}  product {}  weight {:.12}{}",
                fmt_ivec(&c.combination),
                c.exact_product,
                c.weight,
                if c.energy_cycle { "  (energy cycle)" } else { "" }
            );
        }

        let at = &self.atomicity;
        let _ = writeln!(s, "atomicity: {:?}", at.status);
        let _ = writeln!(s, "  atoms: {}", list_or_none(&at.atoms));
        let _ = writeln!(s, "  criterion variables: {}", list_or_none(&at.b_set));
        if let Some(w) = &at.witness {
            let _ = writeln!(s, "  witness: {}", w.join(", "));
        }
        match &at.violation {
            Some(ViolationReport::Equation { event, lhs, rhs }) => {
                let _ = writeln!(s, "  violation: event {} gives {lhs} != {rhs}", event + 1);
            }
            Some(ViolationReport::NoWitness { species }) => {
                let _ = writeln!(s, "  violation: no witness monomial for {species}");
            }
            None => {}
        }
        if let Some(note) = &at.note {
            let _ = writeln!(s, "  note: {note}");
        }
        let _ = writeln!(s, "  search: {} nodes, degree cap {}", at.nodes_explored, at.degree_cap);
        if let Some(laws) = &self.atom_laws {
            for (a, law) in at.atoms.iter().zip(laws) {
                let _ = writeln!(s, "  law for {a}: {}", fmt_ivec(law));
            }
        }
        if let Some(e) = &self.atom_laws_error {
            let _ = writeln!(s, "  atom laws unavailable: {e}");
        }

        let eq = &self.equilibria;
        if let Some(c) = &eq.base {
            let _ = writeln!(s, "base equilibrium: {}", fmt_fvec(c));
            if let Some(r) = eq.base_detailed_balance_residual {
                let _ = writeln!(s, "  detailed-balance residual: {r:e}");
            }
        }
        for cls in &eq.classes {
            match (&cls.result, &cls.error) {
                (Some(r), _) => {
                    let _ = writeln!(s, "equilibrium in class of {}: {}", fmt_fvec(&cls.at), fmt_fvec(&r.c));
                }
                (None, Some(e)) => {
                    let _ = writeln!(s, "equilibrium in class of {}: error: {e}", fmt_fvec(&cls.at));
                }
                _ => {}
            }
        }
        s
    }
}

fn list_or_none(v: &[String]) -> String {
    if v.is_empty() {
        "(none)".into()
    } else {
        v.join(", ")
    }
}

pub fn fmt_ivec(v: &[i64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
    format!("({})", parts.join(", "))
}

pub fn fmt_fvec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
    format!("({})", parts.join(", "))
}

fn fmt_basis(b: &[Vec<i64>]) -> String {
    if b.is_empty() {
        "(none)".into()
    } else {
        b.iter().map(|v| fmt_ivec(v)).collect::<Vec<_>>().join(" ")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_system;

    #[test]
    fn example_2_2_report() {
        let sys = parse_system(
            "species: X1, X2, X3, X4, X5\n2 X4 <-> X2 ; kf=1 kr=1\n2 X5 <-> X3 ; kf=1 kr=1\nX2 + X3 <-> X1 ; kf=1 kr=1",
        )
        .unwrap();
        let rep = analyze(&sys, &[], &AnalysisConfig::default());
        assert_eq!(rep.atomicity.status, AtomicityStatus::Atomic);
        assert_eq!(rep.atomicity.atoms, vec!["X4", "X5"]);
        assert_eq!(rep.atom_laws.as_ref().unwrap().len(), 2);
        assert_eq!(rep.exit_code(), 0);
    }

    #[test]
    fn not_natural_sets_flag_and_prints_rational() {
        let sys = parse_system("X1 <-> X2 ; kf=1 kr=2\nX1 <-> X2 ; kf=1 kr=1").unwrap();
        let rep = analyze(&sys, &[], &AnalysisConfig::default());
        assert_eq!(rep.exit_code() & EXIT_NOT_NATURAL, EXIT_NOT_NATURAL);
        let json = rep.to_json();
        assert!(json.contains("\"exact_product\": \"2\"") || json.contains("\"exact_product\": \"1/2\""));
        assert!(rep.to_text().contains("0.693147180560"));
    }

    #[test]
    fn json_is_deterministic() {
        let sys = parse_system("A <-> B ; kf=2 kr=1\nB + A <-> 2 C ; kf=3 kr=5").unwrap();
        let pts = vec![vec![1.0, 2.0, 3.0], vec![0.5, 0.5, 0.5]];
        let cfg = AnalysisConfig {
            jobs: Setting::new(2, Source::Flag),
            ..AnalysisConfig::default()
        };
        let a = analyze(&sys, &pts, &cfg).to_json();
        let b = analyze(&sys, &pts, &cfg).to_json();
        assert_eq!(a, b);
        assert!(a.contains("\"schema_version\": 1"));
    }
}

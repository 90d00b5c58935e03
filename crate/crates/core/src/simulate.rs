//! Mass-action trajectories with invariant monitoring.
//!
//! The default integrator is the Dormand–Prince 5(4) pair with PI step-size
//! control and its quartic continuous extension for sample output. An
//! implicit midpoint rule with step-doubling error control and the analytic
//! Jacobian is available for stiff systems.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::analysis::{check_atomicity, wegscheider_check, AtomicityStatus, SearchBudget};
use crate::equilibrium::{base_strong_equilibrium, class_equilibrium, lyapunov_value};
use crate::error::{Error, Result};
use crate::linalg::right_kernel;
use crate::system::EventSystem;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum NegativityPolicy {
    /// Reject a step that drives a component below zero (or a positive
    /// component to zero) and retry with half the step.
    Reject,
    /// Floor negative components at zero; every clamp is counted.
    Clamp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Method {
    DormandPrince,
    ImplicitMidpoint,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum SampleGrid {
    /// Every accepted step.
    Steps,
    /// `count` points spaced geometrically from `min(t_end, 1)·1e-4` to `t_end`.
    Geometric { count: usize },
    Uniform { count: usize },
    Times(Vec<f64>),
}

impl SampleGrid {
    fn times(&self, t_end: f64) -> Vec<f64> {
        let mut ts = match self {
            SampleGrid::Steps => Vec::new(),
            SampleGrid::Geometric { count } => {
                let count = (*count).max(2);
                let first = t_end.min(1.0) * 1e-4;
                let ratio = (t_end / first).ln();
                (0..count)
                    .map(|k| first * (ratio * k as f64 / (count - 1) as f64).exp())
                    .collect()
            }
            SampleGrid::Uniform { count } => {
                let count = (*count).max(1);
                (1..=count).map(|k| t_end * k as f64 / count as f64).collect()
            }
            SampleGrid::Times(ts) => ts.clone(),
        };
        ts.retain(|&t| t > 0.0 && t < t_end);
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        ts
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub t_end: f64,
    pub max_steps: usize,
    /// Equilibrium is declared when `‖P(x)‖∞ ≤ equilibrium_tol·max(1, ‖x‖∞)·(largest rate)`.
    pub equilibrium_tol: f64,
    pub negativity_policy: NegativityPolicy,
    pub method: Method,
    pub samples: SampleGrid,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            t_end: 10.0,
            max_steps: 1_000_000,
            equilibrium_tol: 1e-10,
            negativity_policy: NegativityPolicy::Reject,
            method: Method::DormandPrince,
            samples: SampleGrid::Geometric { count: 200 },
        }
    }
}

impl SimOptions {
    fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::Domain("tolerances must be positive".into()));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::Domain("t_end must be positive and finite".into()));
        }
        if !(self.equilibrium_tol > 0.0) {
            return Err(Error::Domain("equilibrium tolerance must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonitorRecord {
    pub min_component: f64,
    /// `v·(x(t) - x(0))` for each right-kernel basis vector `v`.
    pub conservation_drift: Vec<f64>,
    pub lyapunov: Option<f64>,
    /// `‖P(x)‖∞`.
    pub rhs_norm: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub negativity_rejections: usize,
    pub clamped: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trajectory {
    pub species: Vec<String>,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub monitors: Vec<MonitorRecord>,
    pub stats: StepStats,
    /// Positive strong equilibrium anchoring the Lyapunov column, when the
    /// system is natural.
    pub reference: Option<Vec<f64>>,
}

impl Trajectory {
    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectory holds the initial state")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory holds the initial time")
    }

    /// CSV with header `t,<species...>,lyapunov,rhs_norm`. Floats use the
    /// shortest representation that parses back to the same value; an
    /// unavailable Lyapunov value is an empty field.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for s in &self.species {
            out.push(',');
            out.push_str(s);
        }
        out.push_str(",lyapunov,rhs_norm\n");
        for ((t, x), m) in self.times.iter().zip(&self.states).zip(&self.monitors) {
            out.push_str(&format!("{t:?}"));
            for v in x {
                out.push_str(&format!(",{v:?}"));
            }
            out.push(',');
            if let Some(l) = m.lyapunov {
                out.push_str(&format!("{l:?}"));
            }
            out.push_str(&format!(",{:?}\n", m.rhs_norm));
        }
        out
    }
}

struct Monitor {
    kernel: Vec<Vec<i64>>,
    x0: Vec<f64>,
    reference: Option<Vec<f64>>,
}

impl Monitor {
    fn record(&self, sys: &EventSystem, x: &[f64], scratch: &mut [f64]) -> MonitorRecord {
        sys.rhs_into(x, scratch);
        MonitorRecord {
            min_component: x.iter().copied().fold(f64::INFINITY, f64::min),
            conservation_drift: self
                .kernel
                .iter()
                .map(|v| v.iter().zip(x.iter().zip(&self.x0)).map(|(&c, (a, b))| c as f64 * (a - b)).sum())
                .collect(),
            lyapunov: self
                .reference
                .as_ref()
                .and_then(|c| lyapunov_value(c, x).ok())
                .map(|l| l.value),
            rhs_norm: inf_norm(scratch),
        }
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn error_norm(err: &[f64], y0: &[f64], y1: &[f64], rtol: f64, atol: f64) -> f64 {
    let n = err.len().max(1) as f64;
    let sum: f64 = err
        .iter()
        .zip(y0.iter().zip(y1))
        .map(|(e, (a, b))| {
            let sk = atol + rtol * a.abs().max(b.abs());
            (e / sk).powi(2)
        })
        .sum();
    (sum / n).sqrt()
}

// Dormand–Prince 5(4) tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Result of one trial step.
struct Attempt {
    y: Vec<f64>,
    f_new: Vec<f64>,
    err: f64,
    dense: Dense,
}

enum Dense {
    /// Quartic continuous extension of the Dormand–Prince pair.
    Quartic([Vec<f64>; 5]),
    /// Cubic Hermite from end values and slopes.
    Hermite {
        y0: Vec<f64>,
        f0: Vec<f64>,
        y1: Vec<f64>,
        f1: Vec<f64>,
        h: f64,
    },
}

impl Dense {
    /// State at fraction `s ∈ [0, 1]` of the step.
    fn eval(&self, s: f64) -> Vec<f64> {
        match self {
            Dense::Quartic(c) => {
                let s1 = 1.0 - s;
                (0..c[0].len())
                    .map(|i| c[0][i] + s * (c[1][i] + s1 * (c[2][i] + s * (c[3][i] + s1 * c[4][i]))))
                    .collect()
            }
            Dense::Hermite { y0, f0, y1, f1, h } => {
                let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
                let h10 = s * (1.0 - s) * (1.0 - s);
                let h01 = s * s * (3.0 - 2.0 * s);
                let h11 = s * s * (s - 1.0);
                (0..y0.len())
                    .map(|i| h00 * y0[i] + h10 * h * f0[i] + h01 * y1[i] + h11 * h * f1[i])
                    .collect()
            }
        }
    }
}

fn axpy(y: &[f64], h: f64, terms: &[(f64, &[f64])]) -> Vec<f64> {
    (0..y.len())
        .map(|i| y[i] + h * terms.iter().map(|(c, k)| c * k[i]).sum::<f64>())
        .collect()
}

fn dopri_step(sys: &EventSystem, y: &[f64], k1: &[f64], h: f64, opts: &SimOptions) -> Attempt {
    let n = y.len();
    let f = |x: &[f64]| {
        let mut out = vec![0.0; n];
        sys.rhs_into(x, &mut out);
        out
    };
    let k2 = f(&axpy(y, h, &[(A21, k1)]));
    let k3 = f(&axpy(y, h, &[(A31, k1), (A32, &k2)]));
    let k4 = f(&axpy(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]));
    let k5 = f(&axpy(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
    let k6 = f(&axpy(y, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
    let y_new = axpy(y, h, &[(B1, k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
    let k7 = f(&y_new);
    let err_vec: Vec<f64> = (0..n)
        .map(|i| h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]))
        .collect();
    let err = error_norm(&err_vec, y, &y_new, opts.rel_tol, opts.abs_tol);

    let ydiff: Vec<f64> = (0..n).map(|i| y_new[i] - y[i]).collect();
    let bspl: Vec<f64> = (0..n).map(|i| h * k1[i] - ydiff[i]).collect();
    let c3: Vec<f64> = (0..n).map(|i| ydiff[i] - h * k7[i] - bspl[i]).collect();
    let c4: Vec<f64> = (0..n)
        .map(|i| h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]))
        .collect();
    Attempt {
        y: y_new,
        f_new: k7,
        err,
        dense: Dense::Quartic([y.to_vec(), ydiff, bspl, c3, c4]),
    }
}

/// One implicit midpoint step `z = y + h·P((y + z)/2)` solved by Newton.
fn midpoint(sys: &EventSystem, y: &[f64], f0: &[f64], h: f64) -> Option<Vec<f64>> {
    let n = y.len();
    let mut z = axpy(y, h, &[(1.0, f0)]);
    let mut p = vec![0.0; n];
    for _ in 0..25 {
        let m: Vec<f64> = y.iter().zip(&z).map(|(a, b)| 0.5 * (a + b)).collect();
        sys.rhs_into(&m, &mut p);
        let resid = DVector::from_iterator(n, (0..n).map(|i| z[i] - y[i] - h * p[i]));
        let jac = sys.rhs_jacobian(&m).ok()?;
        let lhs = DMatrix::identity(n, n) - jac * (0.5 * h);
        let delta = lhs.lu().solve(&resid)?;
        let mut size = 0.0f64;
        for i in 0..n {
            z[i] -= delta[i];
            size = size.max(delta[i].abs() / (1.0 + z[i].abs()));
        }
        if !size.is_finite() {
            return None;
        }
        if size <= 1e-14 {
            return Some(z);
        }
    }
    None
}

fn midpoint_step(sys: &EventSystem, y: &[f64], f0: &[f64], h: f64, opts: &SimOptions) -> Option<Attempt> {
    let n = y.len();
    let full = midpoint(sys, y, f0, h)?;
    let half = midpoint(sys, y, f0, 0.5 * h)?;
    let mut f_half = vec![0.0; n];
    sys.rhs_into(&half, &mut f_half);
    let two = midpoint(sys, &half, &f_half, 0.5 * h)?;
    let err_vec: Vec<f64> = (0..n).map(|i| (two[i] - full[i]) / 3.0).collect();
    let err = error_norm(&err_vec, y, &two, opts.rel_tol, opts.abs_tol);
    let mut f_new = vec![0.0; n];
    sys.rhs_into(&two, &mut f_new);
    Some(Attempt {
        dense: Dense::Hermite {
            y0: y.to_vec(),
            f0: f0.to_vec(),
            y1: two.clone(),
            f1: f_new.clone(),
            h,
        },
        y: two,
        f_new,
        err,
    })
}

fn initial_step(sys: &EventSystem, y: &[f64], f0: &[f64], opts: &SimOptions, order: i32) -> f64 {
    let scale = |v: &[f64]| {
        let n = v.len().max(1) as f64;
        (v.iter()
            .zip(y)
            .map(|(a, b)| (a / (opts.abs_tol + opts.rel_tol * b.abs())).powi(2))
            .sum::<f64>()
            / n)
            .sqrt()
    };
    let d0 = scale(y);
    let d1 = scale(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(opts.t_end);
    let y1 = axpy(y, h0, &[(1.0, f0)]);
    let mut f1 = vec![0.0; y.len()];
    sys.rhs_into(&y1, &mut f1);
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = scale(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / (order as f64 + 1.0))
    };
    (100.0 * h0).min(h1).min(opts.t_end)
}

fn acceptable(policy: NegativityPolicy, old: &[f64], new: &[f64]) -> bool {
    match policy {
        NegativityPolicy::Reject => old
            .iter()
            .zip(new)
            .all(|(&a, &b)| b.is_finite() && b >= 0.0 && !(a > 0.0 && b <= 0.0)),
        NegativityPolicy::Clamp => new.iter().all(|b| b.is_finite()),
    }
}

fn clamp(x: &mut [f64]) -> bool {
    let mut any = false;
    for v in x.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
            any = true;
        }
    }
    any
}

enum StopReason {
    EndTime,
    Condition,
}

fn validate_start(sys: &EventSystem, x0: &[f64]) -> Result<()> {
    if x0.len() != sys.dim() {
        return Err(Error::Dimension {
            expected: sys.dim(),
            found: x0.len(),
        });
    }
    if x0.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(Error::Domain("initial state must be non-negative".into()));
    }
    Ok(())
}

fn lyapunov_reference(sys: &EventSystem) -> Option<Vec<f64>> {
    if wegscheider_check(sys).natural {
        base_strong_equilibrium(sys).ok()
    } else {
        None
    }
}

fn run(
    sys: &EventSystem,
    x0: &[f64],
    opts: &SimOptions,
    reference: Option<Vec<f64>>,
    contractive: bool,
    mut stop: impl FnMut(&[f64]) -> bool,
) -> Result<(Trajectory, StopReason)> {
    validate_start(sys, x0)?;
    opts.validate()?;
    let n = sys.dim();
    let monitor = Monitor {
        kernel: right_kernel(&sys.stoichiometric_matrix()).vectors,
        x0: x0.to_vec(),
        reference,
    };
    let mut scratch = vec![0.0; n];
    let mut traj = Trajectory {
        species: sys.species().to_vec(),
        times: vec![0.0],
        states: vec![x0.to_vec()],
        monitors: vec![monitor.record(sys, x0, &mut scratch)],
        stats: StepStats::default(),
        reference: monitor.reference.clone(),
    };
    if stop(x0) {
        return Ok((traj, StopReason::Condition));
    }

    let samples = opts.samples.times(opts.t_end);
    let every_step = matches!(opts.samples, SampleGrid::Steps);
    let mut next_sample = 0;
    let order = match opts.method {
        Method::DormandPrince => 5,
        Method::ImplicitMidpoint => 2,
    };

    let mut t = 0.0;
    let mut y = x0.to_vec();
    let mut f = vec![0.0; n];
    sys.rhs_into(&y, &mut f);
    // Near a stable equilibrium the error estimate alone lets explicit steps
    // grow to the edge of the stability region, where the deviation stops
    // shrinking. Capping `h·‖J‖∞` keeps the step map contractive.
    let explicit_cap = contractive && opts.method == Method::DormandPrince;
    let stability_cap = |y: &[f64]| {
        if !explicit_cap {
            return f64::INFINITY;
        }
        sys.rhs_jacobian(y)
            .map(|j| {
                let norm = (0..j.nrows())
                    .map(|r| j.row(r).iter().map(|v| v.abs()).sum::<f64>())
                    .fold(0.0, f64::max);
                if norm > 0.0 { 2.0 / norm } else { f64::INFINITY }
            })
            .unwrap_or(f64::INFINITY)
    };
    let mut h = initial_step(sys, &y, &f, opts, order).min(stability_cap(&y));
    let mut facold: f64 = 1e-4;
    let mut last_rejected = false;
    const BETA: f64 = 0.04;
    const SAFE: f64 = 0.9;

    while t < opts.t_end {
        if traj.stats.accepted + traj.stats.rejected >= opts.max_steps {
            return Err(Error::MaxSteps {
                max_steps: opts.max_steps,
                t,
                state: y,
            });
        }
        let remaining = opts.t_end - t;
        let last = h >= remaining;
        if last {
            h = remaining;
        }
        if h <= 1e-14 * t.abs().max(1.0) && !last {
            return Err(Error::StepUnderflow { t, step: h, state: y });
        }
        let attempt = match opts.method {
            Method::DormandPrince => Some(dopri_step(sys, &y, &f, h, opts)),
            Method::ImplicitMidpoint => midpoint_step(sys, &y, &f, h, opts),
        };
        let Some(mut attempt) = attempt else {
            traj.stats.rejected += 1;
            h *= 0.25;
            last_rejected = true;
            continue;
        };
        if !attempt.err.is_finite() {
            traj.stats.rejected += 1;
            h *= 0.1;
            last_rejected = true;
            continue;
        }
        let fac11 = attempt.err.powf(1.0 / order as f64 - 0.75 * BETA);
        if attempt.err > 1.0 {
            traj.stats.rejected += 1;
            h /= (1.0 / 0.2f64).min(fac11 / SAFE);
            last_rejected = true;
            continue;
        }

        // Sample points inside this step; they must respect positivity too.
        let t_new = if last { opts.t_end } else { t + h };
        let mut pending = Vec::new();
        let mut k = next_sample;
        while k < samples.len() && samples[k] <= t_new {
            let s = ((samples[k] - t) / h).clamp(0.0, 1.0);
            pending.push((samples[k], attempt.dense.eval(s)));
            k += 1;
        }
        let positive_ok = acceptable(opts.negativity_policy, &y, &attempt.y)
            && pending
                .iter()
                .all(|(_, x)| acceptable(opts.negativity_policy, &y, x));
        if !positive_ok {
            traj.stats.rejected += 1;
            traj.stats.negativity_rejections += 1;
            h *= 0.5;
            last_rejected = true;
            continue;
        }
        if opts.negativity_policy == NegativityPolicy::Clamp {
            let mut clamped = clamp(&mut attempt.y);
            for (_, x) in pending.iter_mut() {
                clamped |= clamp(x);
            }
            if clamped {
                traj.stats.clamped += 1;
                sys.rhs_into(&attempt.y, &mut attempt.f_new);
            }
        }

        traj.stats.accepted += 1;
        next_sample = k;
        for (ts, x) in pending {
            if ts < t_new {
                traj.monitors.push(monitor.record(sys, &x, &mut scratch));
                traj.times.push(ts);
                traj.states.push(x);
            }
        }
        t = t_new;
        y = attempt.y;
        f = attempt.f_new;

        let stopped = stop(&y);
        if every_step || stopped || t >= opts.t_end {
            traj.monitors.push(monitor.record(sys, &y, &mut scratch));
            traj.times.push(t);
            traj.states.push(y.clone());
        }
        if stopped {
            return Ok((traj, StopReason::Condition));
        }

        let mut fac = fac11 / facold.powf(BETA);
        fac = (1.0 / 10.0f64).max((1.0 / 0.2f64).min(fac / SAFE));
        let mut h_new = h / fac;
        if last_rejected {
            h_new = h_new.min(h);
        }
        facold = attempt.err.max(1e-4);
        last_rejected = false;
        h = h_new.min(stability_cap(&y));
    }
    Ok((traj, StopReason::EndTime))
}

/// Integrate the mass-action system from `x0` up to `opts.t_end`.
pub fn integrate(sys: &EventSystem, x0: &[f64], opts: &SimOptions) -> Result<Trajectory> {
    let reference = lyapunov_reference(sys);
    run(sys, x0, opts, reference, false, |_| false).map(|(traj, _)| traj)
}

/// Residual used to declare equilibrium: `‖P(x)‖∞ / (max(1, ‖x‖∞)·max rate)`.
pub fn equilibrium_residual(sys: &EventSystem, x: &[f64]) -> f64 {
    let mut p = vec![0.0; sys.dim()];
    sys.rhs_into(x, &mut p);
    inf_norm(&p) / (inf_norm(x).max(1.0) * sys.max_rate())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CrossCheck {
    /// Equilibrium from the convex solve in the class of the initial state.
    pub convex: Vec<f64>,
    pub max_rel_diff: f64,
    pub agrees: bool,
}

/// Relative agreement required between the ODE limit and the convex solve.
pub const CROSS_CHECK_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquilibriumRun {
    pub trajectory: Trajectory,
    pub state: Vec<f64>,
    pub time: f64,
    pub residual: f64,
    /// Present for natural atomic systems.
    pub cross_check: Option<CrossCheck>,
}

pub fn max_rel_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max)
}

/// Integrate until the equilibrium residual drops below
/// `opts.equilibrium_tol`, or fail with [`Error::Timeout`] at `opts.t_end`.
pub fn simulate_to_equilibrium(sys: &EventSystem, x0: &[f64], opts: &SimOptions) -> Result<EquilibriumRun> {
    let reference = lyapunov_reference(sys);
    let mut best: Option<(f64, Vec<f64>)> = None;
    let (traj, reason) = run(sys, x0, opts, reference.clone(), true, |x| {
        let r = equilibrium_residual(sys, x);
        if best.as_ref().is_none_or(|(b, _)| r < *b) {
            best = Some((r, x.to_vec()));
        }
        r <= opts.equilibrium_tol
    })?;
    let (residual, _) = best.clone().expect("initial state was checked");
    if let StopReason::EndTime = reason {
        let (residual, best_state) = best.expect("initial state was checked");
        return Err(Error::Timeout {
            t: traj.final_time(),
            residual,
            best_state,
        });
    }
    let state = traj.final_state().to_vec();
    let cross_check = match reference {
        Some(c_star) if x0.iter().all(|&v| v > 0.0) => {
            let verdict = check_atomicity(sys, SearchBudget::default());
            if verdict.status == AtomicityStatus::Atomic {
                let eq = class_equilibrium(sys, &c_star, x0)?;
                let diff = max_rel_diff(&state, &eq.c);
                Some(CrossCheck {
                    convex: eq.c,
                    max_rel_diff: diff,
                    agrees: diff <= CROSS_CHECK_TOL,
                })
            } else {
                None
            }
        }
        _ => None,
    };
    Ok(EquilibriumRun {
        time: traj.final_time(),
        residual,
        trajectory: traj,
        state,
        cross_check,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonitorReport {
    pub natural: bool,
    /// Smallest component over every recorded state.
    pub min_component: f64,
    /// Largest component over every recorded state.
    pub max_component: f64,
    /// `max_t |v·(x(t) - x(0))|` per right-kernel basis vector.
    pub max_conservation_drift: Vec<f64>,
    /// Largest increase between consecutive Lyapunov values.
    pub max_lyapunov_increase: Option<f64>,
    pub lyapunov_initial: Option<f64>,
    pub clamped_steps: usize,
}

/// Worst-case invariant violations over a trajectory, recomputed from the
/// stored states. `reference` anchors the Lyapunov function.
pub fn run_monitors(sys: &EventSystem, reference: Option<&[f64]>, traj: &Trajectory) -> MonitorReport {
    let kernel = right_kernel(&sys.stoichiometric_matrix()).vectors;
    let x0 = &traj.states[0];
    let mut report = MonitorReport {
        natural: wegscheider_check(sys).natural,
        min_component: f64::INFINITY,
        max_component: f64::NEG_INFINITY,
        max_conservation_drift: vec![0.0; kernel.len()],
        max_lyapunov_increase: None,
        lyapunov_initial: None,
        clamped_steps: traj.stats.clamped,
    };
    let mut prev_g: Option<f64> = None;
    for x in &traj.states {
        for &v in x {
            report.min_component = report.min_component.min(v);
            report.max_component = report.max_component.max(v);
        }
        for (d, v) in report.max_conservation_drift.iter_mut().zip(&kernel) {
            let drift: f64 = v.iter().zip(x.iter().zip(x0)).map(|(&c, (a, b))| c as f64 * (a - b)).sum();
            *d = d.max(drift.abs());
        }
        if let Some(c) = reference {
            if let Ok(g) = lyapunov_value(c, x) {
                if let Some(p) = prev_g {
                    let inc = report.max_lyapunov_increase.unwrap_or(0.0).max(g.value - p);
                    report.max_lyapunov_increase = Some(inc);
                } else {
                    report.lyapunov_initial = Some(g.value);
                    report.max_lyapunov_increase = Some(0.0);
                }
                prev_g = Some(g.value);
            }
        }
    }
    report
}

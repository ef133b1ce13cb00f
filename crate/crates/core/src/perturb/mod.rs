//! Conductance-style cut frequencies, the closeness relation between
//! transition matrices (global and on a subset), admissibility gates for
//! the perturbation theorems, the theorem bounds, the competing bounds from
//! the literature, and the side-by-side deviation report.

pub mod generator;

use serde::Serialize;
use thiserror::Error;

use crate::chain::{require_same_space, Chain, ChainError, Distribution};
use crate::formulas::{visit_length_given, FormulaError};
use crate::oracles::{self, OracleError};
use crate::scalar::Scalar;
use crate::subset::StateSet;

#[derive(Debug, Error)]
pub enum PerturbError {
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Formula(#[from] FormulaError),
    #[error("chain is reducible; {0}")]
    Reducible(String),
    #[error("epsilon and beta must be positive")]
    BadParams,
    #[error("subset for restricted closeness needs more than one state")]
    SubsetTooSmall,
    #[error("subset must be a nonempty set of states")]
    BadSubset,
    #[error("graph-count constant overflows 128 bits at {0} states")]
    Overflow(usize),
    #[error("state count must be at least 2, got {0}")]
    TooFewStates(usize),
}

/// Parameters of the closeness relation; `subset` switches to the
/// restricted relation, `mixing` optionally pins the mixing level used by
/// the subset-mode gate (computed from the base chain when absent).
#[derive(Clone, Debug)]
pub struct ClosenessParams<F> {
    pub epsilon: F,
    pub beta: F,
    pub subset: Option<StateSet>,
    pub mixing: Option<F>,
}

impl<F: Scalar> ClosenessParams<F> {
    pub fn new(epsilon: F, beta: F) -> Result<Self, PerturbError> {
        if !(epsilon > F::zero()) || !(beta > F::zero()) {
            return Err(PerturbError::BadParams);
        }
        Ok(ClosenessParams {
            epsilon,
            beta,
            subset: None,
            mixing: None,
        })
    }

    pub fn on_subset(mut self, subset: StateSet) -> Result<Self, PerturbError> {
        if subset.len() < 2 {
            return Err(PerturbError::SubsetTooSmall);
        }
        self.subset = Some(subset);
        Ok(self)
    }

    pub fn with_mixing(mut self, a: F) -> Self {
        self.mixing = Some(a);
        self
    }
}

/// A minimized cut frequency and the subset attaining it.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ZetaResult<F> {
    pub value: F,
    pub argmin: StateSet,
}

/// Stationary-weighted escape frequency of a cut.
fn cut_frequency<F: Scalar>(c: &Chain<F>, mu: &Distribution<F>, cut: StateSet) -> F {
    let outside = cut.complement(c.n());
    cut.iter()
        .map(|s| mu.get(s) * c.mass_into(s, outside))
        .sum()
}

/// Minimize the cut frequency over candidate cuts. Near-ties (within a
/// relative `1e-12`) are resolved toward fewer states, then lexicographic
/// order, so reported argmins are deterministic and scale-independent.
fn minimize_cuts<F: Scalar, I: Iterator<Item = StateSet>>(
    c: &Chain<F>,
    mu: &Distribution<F>,
    cuts: I,
) -> Option<ZetaResult<F>> {
    let rtol = F::cast(1e-12);
    let mut best: Option<ZetaResult<F>> = None;
    for cut in cuts {
        let value = cut_frequency(c, mu, cut);
        match &mut best {
            None => best = Some(ZetaResult { value, argmin: cut }),
            Some(b) => {
                let scale = if b.value > value { b.value } else { value };
                let tied = (value - b.value).abs() <= rtol * scale;
                if (!tied && value < b.value)
                    || (tied && cut.canonical_cmp(b.argmin) == std::cmp::Ordering::Less)
                {
                    *b = ZetaResult { value, argmin: cut };
                }
            }
        }
    }
    best
}

/// The conductance variant: minimum over all proper nonempty cuts of the
/// stationary-weighted escape frequency. `mu` must be the stationary
/// distribution of `c`.
pub fn zeta<F: Scalar>(c: &Chain<F>, mu: &Distribution<F>) -> Result<ZetaResult<F>, PerturbError> {
    if c.n() > crate::DEFAULT_ENUMERATION_CAP * 2 {
        // 2^n cuts; twice the graph cap is still instant and a safe limit.
        return Err(FormulaError::OverCap {
            n: c.n(),
            cap: crate::DEFAULT_ENUMERATION_CAP * 2,
        }
        .into());
    }
    Ok(minimize_cuts(c, mu, StateSet::proper_nonempty(c.n())).expect("n >= 2 has cuts"))
}

/// The restricted variant: minimum over nonempty strict subsets of `s1`
/// (escape still counted into the complement within the full space).
pub fn zeta_restricted<F: Scalar>(
    c: &Chain<F>,
    mu: &Distribution<F>,
    s1: StateSet,
) -> Result<ZetaResult<F>, PerturbError> {
    if s1.len() < 2 {
        return Err(PerturbError::SubsetTooSmall);
    }
    if !s1.is_subset_of(c.space().full_set()) {
        return Err(PerturbError::BadSubset);
    }
    Ok(minimize_cuts(c, mu, s1.nonempty_strict_subsets()).expect("|s1| >= 2 has cuts"))
}

/// The graph-count constant `L(n) = sum_{k=1}^{n-1} C(n,k) k^n`, an upper
/// bound on the total number of C-graphs over all proper nonempty subsets.
pub fn l_const(n: usize) -> Result<u128, PerturbError> {
    if n < 2 {
        return Err(PerturbError::TooFewStates(n));
    }
    let mut total: u128 = 0;
    for k in 1..n {
        let mut binom: u128 = 1;
        for j in 0..k {
            binom = binom
                .checked_mul((n - j) as u128)
                .ok_or(PerturbError::Overflow(n))?
                / (j as u128 + 1);
        }
        let pow = (k as u128)
            .checked_pow(n as u32)
            .ok_or(PerturbError::Overflow(n))?;
        total = total
            .checked_add(binom.checked_mul(pow).ok_or(PerturbError::Overflow(n))?)
            .ok_or(PerturbError::Overflow(n))?;
    }
    Ok(total)
}

fn l_as<F: Scalar>(n: usize) -> Result<F, PerturbError> {
    Ok(F::cast(l_const(n)? as f64))
}

/// Admissible region of the global perturbation theorem:
/// `beta in (0, 1/2^n)` and `epsilon in (0, beta(1-beta) / (L n^4))`.
pub fn theorem1_gate<F: Scalar>(beta: F, epsilon: F, n: usize) -> Result<bool, PerturbError> {
    let l = l_as::<F>(n)?;
    let beta_cap = F::cast(0.5).powi(n as i32);
    let eps_cap = beta * (F::one() - beta) / (l * F::cast((n as f64).powi(4)));
    Ok(beta > F::zero() && beta < beta_cap && epsilon > F::zero() && epsilon < eps_cap)
}

/// Admissible region of the subset-mode theorem: the global epsilon cap
/// shrunk by `(a/L)^n / 2`, where `a` is the mixing level on the subset.
pub fn theorem2_gate<F: Scalar>(
    beta: F,
    epsilon: F,
    a: F,
    n: usize,
) -> Result<bool, PerturbError> {
    let l = l_as::<F>(n)?;
    let beta_cap = F::cast(0.5).powi(n as i32);
    let shrink = F::cast(0.5) * (a / l).powi(n as i32);
    let eps_cap = shrink * beta * (F::one() - beta) / (l * F::cast((n as f64).powi(4)));
    Ok(a > F::zero()
        && beta > F::zero()
        && beta < beta_cap
        && epsilon > F::zero()
        && epsilon < eps_cap)
}

/// Mixing level of a subset: the minimum over ordered pairs `s != t` in
/// `s1` of the probability that, from `s`, the first arrival (after at
/// least one step) in "outside-`s1` or `t`" happens at `t`. Computed by a
/// one-step decomposition on top of an absorbing solve.
pub fn mixing_parameter<F: Scalar>(c: &Chain<F>, s1: StateSet) -> Result<F, PerturbError> {
    if s1.len() < 2 {
        return Err(PerturbError::SubsetTooSmall);
    }
    require_irreducible(c)?;
    let n = c.n();
    let mut min = F::infinity();
    for t in s1.iter() {
        // h(x) = P_x(first entry into (complement of s1) + {t} is at t),
        // solved on B = s1 minus t with everything else absorbing.
        let b = s1.without(t);
        let inside = b.indices();
        let mut m = oracles::linalg::Matrix::zeros(inside.len());
        for (i, &x) in inside.iter().enumerate() {
            for (j, &y) in inside.iter().enumerate() {
                let delta = if i == j { F::one() } else { F::zero() };
                m[(i, j)] = delta - c.prob(x, y);
            }
        }
        let rhs: Vec<F> = inside.iter().map(|&x| c.prob(x, t)).collect();
        let h = m
            .factor()
            .map_err(OracleError::from)?
            .solve(&rhs)
            .map_err(OracleError::from)?;
        let _ = n;
        for s in s1.iter().filter(|&s| s != t) {
            let mut value = c.prob(s, t);
            for (j, &y) in inside.iter().enumerate() {
                value = value + c.prob(s, y) * h[j];
            }
            if value < min {
                min = value;
            }
        }
    }
    Ok(min)
}

fn require_irreducible<F: Scalar>(c: &Chain<F>) -> Result<(), PerturbError> {
    match c.closed_class_witness() {
        None => Ok(()),
        Some(w) => Err(PerturbError::Reducible(format!(
            "closed class {}",
            c.space().fmt_set(w)
        ))),
    }
}

/// Which closeness condition fired for a transition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Trigger {
    /// (a): the transition is frequent under the base matrix.
    MassUnderBase,
    /// (b): the transition carries stationary mass under the perturbed
    /// matrix (stationary vector still of the base).
    MassUnderPerturbed,
}

/// A transition that fired a trigger but moved by more than `beta`
/// relatively (or onto/off a zero).
#[derive(Clone, Debug, Serialize)]
pub struct Violation<F> {
    pub from: String,
    pub to: String,
    /// `|1 - qhat/q|`; infinite when the base entry is zero but the
    /// trigger fired anyway.
    pub deviation: F,
    pub triggers: Vec<Trigger>,
}

/// Outcome of the closeness test.
#[derive(Clone, Debug, Serialize)]
pub struct ClosenessReport<F> {
    pub close: bool,
    pub violations: Vec<Violation<F>>,
    /// The cut constant the trigger threshold was built from.
    pub zeta_used: F,
    pub zeta_argmin: StateSet,
    /// `epsilon * zeta`: the stationary-mass level above which a
    /// transition counts as frequent.
    pub threshold: F,
    /// Subset mode only: whether the two matrices agree exactly outside
    /// the subset (required for the subset-mode theorems, reported
    /// separately from the closeness verdict).
    pub coincides_outside: Option<bool>,
}

fn closeness_check<F: Scalar>(
    q: &Chain<F>,
    qhat: &Chain<F>,
    mu: &Distribution<F>,
    epsilon: F,
    beta: F,
    zeta_result: ZetaResult<F>,
    coincides_outside: Option<bool>,
) -> ClosenessReport<F> {
    let threshold = epsilon * zeta_result.value;
    let mut violations = Vec::new();
    for s in 0..q.n() {
        for t in 0..q.n() {
            let base = q.prob(s, t);
            let pert = qhat.prob(s, t);
            let mut triggers = Vec::new();
            if mu.get(s) * base >= threshold {
                triggers.push(Trigger::MassUnderBase);
            }
            if mu.get(s) * pert >= threshold {
                triggers.push(Trigger::MassUnderPerturbed);
            }
            if triggers.is_empty() {
                continue;
            }
            let deviation = if base == F::zero() {
                // The relative change is undefined; the condition cannot
                // hold, so an active trigger is a violation.
                F::infinity()
            } else {
                (F::one() - pert / base).abs()
            };
            if deviation > beta {
                violations.push(Violation {
                    from: q.space().label(s).to_string(),
                    to: q.space().label(t).to_string(),
                    deviation,
                    triggers,
                });
            }
        }
    }
    ClosenessReport {
        close: violations.is_empty(),
        violations,
        zeta_used: zeta_result.value,
        zeta_argmin: zeta_result.argmin,
        threshold,
        coincides_outside,
    }
}

/// Is `qhat` close to `q` at level `(epsilon, beta)`? A transition must
/// move by at most `beta` relatively whenever its stationary-weighted mass
/// (under `q`, or under `qhat` with the stationary vector of `q`) reaches
/// `epsilon * zeta_q`. The relation is not symmetric: only the stationary
/// distribution of `q` enters.
pub fn is_close<F: Scalar>(
    q: &Chain<F>,
    qhat: &Chain<F>,
    params: &ClosenessParams<F>,
) -> Result<ClosenessReport<F>, PerturbError> {
    require_same_space(q, qhat)?;
    require_irreducible(q)?;
    let mu = oracles::stationary_solve(q)?;
    let zr = zeta(q, &mu)?;
    Ok(closeness_check(
        q,
        qhat,
        &mu,
        params.epsilon,
        params.beta,
        zr,
        None,
    ))
}

/// The restricted relation: same conditions with the cut constant taken
/// over strict subsets of `params.subset`. Also reports whether the
/// matrices coincide outside the subset.
pub fn is_close_on<F: Scalar>(
    q: &Chain<F>,
    qhat: &Chain<F>,
    params: &ClosenessParams<F>,
) -> Result<ClosenessReport<F>, PerturbError> {
    require_same_space(q, qhat)?;
    require_irreducible(q)?;
    let s1 = params.subset.ok_or(PerturbError::BadSubset)?;
    let mu = oracles::stationary_solve(q)?;
    let zr = zeta_restricted(q, &mu, s1)?;
    let coincides = (0..q.n())
        .filter(|&s| !s1.contains(s))
        .all(|s| q.row(s) == qhat.row(s));
    Ok(closeness_check(
        q,
        qhat,
        &mu,
        params.epsilon,
        params.beta,
        zr,
        Some(coincides),
    ))
}

/// The numeric bounds asserted by the perturbation theorems at a given
/// `beta` and state count.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TheoremBounds<F> {
    /// Bound on the relative stationary deviation: `18 beta L`.
    pub stationary: F,
    /// A relative-deviation bound at or above one cannot exclude total
    /// loss of the state's mass; reported as vacuous, never suppressed.
    pub stationary_vacuous: bool,
    /// Bound on the exit-law deviation: `12 beta L`.
    pub exit: F,
    /// Exit laws differ by at most one, so this bound is vacuous at one.
    pub exit_vacuous: bool,
    /// Two-sided factor `2 n^2` bounding the visit-length ratio.
    pub k_factor: F,
}

pub fn theorem_bounds<F: Scalar>(beta: F, n: usize) -> Result<TheoremBounds<F>, PerturbError> {
    let l = l_as::<F>(n)?;
    let stationary = F::cast(18.0) * beta * l;
    let exit = F::cast(12.0) * beta * l;
    Ok(TheoremBounds {
        stationary,
        stationary_vacuous: stationary >= F::one(),
        exit,
        exit_vacuous: exit >= F::one(),
        k_factor: F::cast(2.0 * (n * n) as f64),
    })
}

/// Visit-length dichotomy threshold for the subset itself:
/// `mu(S1) / (2 epsilon n zeta^1)`. Either the visit-length ratio stays
/// within the `2 n^2` band or both visit lengths exceed this.
pub fn dichotomy_threshold<F: Scalar>(epsilon: F, n: usize, mu_s1: F, zeta1: F) -> F {
    mu_s1 / (F::cast(2.0 * n as f64) * epsilon * zeta1)
}

/// Largest absolute entrywise difference between two transition matrices.
/// This is the perturbation magnitude the comparison bounds are quoted in.
pub fn transition_deviation<F: Scalar>(q: &Chain<F>, qhat: &Chain<F>) -> F {
    let mut max = F::zero();
    for s in 0..q.n() {
        for t in 0..q.n() {
            let d = (q.prob(s, t) - qhat.prob(s, t)).abs();
            if d > max {
                max = d;
            }
        }
    }
    max
}

/// Mean-passage-time bound on the relative stationary deviation at `s`:
/// half the perturbation magnitude times the largest mean passage time
/// into `s`.
pub fn cho_meyer_bound<F: Scalar>(
    q: &Chain<F>,
    qhat: &Chain<F>,
    s: usize,
) -> Result<F, PerturbError> {
    require_same_space(q, qhat)?;
    let m = oracles::mean_first_passage(q)?;
    Ok(transition_deviation(q, qhat) / F::cast(2.0) * m.max_into(s))
}

/// Deleted-inverse bound on the relative stationary deviation at `s`:
/// half of (half the perturbation magnitude) times the infinity norm of
/// the deleted inverse of `A = I - q`.
pub fn kirkland_bound<F: Scalar>(
    q: &Chain<F>,
    qhat: &Chain<F>,
    s: usize,
) -> Result<F, PerturbError> {
    require_same_space(q, qhat)?;
    let a = oracles::fundamental_matrix(q);
    let norm = oracles::deleted_inverse_norm(&a, s)?;
    Ok(F::cast(0.5) * (transition_deviation(q, qhat) / F::cast(2.0)) * norm)
}

/// Entrywise ratio measure: the largest of `q/qhat` and `qhat/q` over all
/// transitions. One when the matrices agree on every jointly supported
/// entry; infinite when exactly one of a pair is zero; entries that are
/// zero in both are skipped.
pub fn ocinneide_ratio<F: Scalar>(q: &Chain<F>, qhat: &Chain<F>) -> F {
    let mut max = F::one();
    for s in 0..q.n() {
        for t in 0..q.n() {
            let a = q.prob(s, t);
            let b = qhat.prob(s, t);
            if a == F::zero() && b == F::zero() {
                continue;
            }
            if a == F::zero() || b == F::zero() {
                return F::infinity();
            }
            let r = if a / b > b / a { a / b } else { b / a };
            if r > max {
                max = r;
            }
        }
    }
    max
}

/// Per-state deviations and competing bounds.
#[derive(Clone, Debug, Serialize)]
pub struct StateDeviation<F> {
    pub label: String,
    /// `|1 - mu_hat_s / mu_s|` (conditional on the subset in subset mode);
    /// absent when the perturbed stationary vector is unavailable, or for
    /// states outside the subset in subset mode.
    pub actual: Option<F>,
    pub cho_meyer: F,
    pub kirkland: F,
}

/// Exit-law deviation from one start state.
#[derive(Clone, Debug, Serialize)]
pub struct ExitDeviation<F> {
    pub from: String,
    /// Largest per-target deviation (the bound is checked against this).
    pub sup: F,
    /// Total variation distance, reported alongside.
    pub tv: F,
}

/// Deviations over one requested subset.
#[derive(Clone, Debug, Serialize)]
pub struct SubsetReport<F> {
    pub domain: StateSet,
    pub labels: Vec<String>,
    /// Whether the exit/visit bounds apply to this subset (always in
    /// global mode; strict subsets of the perturbed region in subset
    /// mode — the region itself is covered by the dichotomy instead).
    pub covered: bool,
    pub exits: Vec<ExitDeviation<F>>,
    pub k_base: F,
    /// May be infinite when the perturbed matrix never leaves the subset;
    /// absent when no stationary information exists for it at all.
    pub k_perturbed: Option<F>,
    pub k_ratio: Option<F>,
    pub note: Option<String>,
}

/// Visit-length dichotomy verdict for the perturbed region itself.
#[derive(Clone, Debug, Serialize)]
pub struct DichotomyReport<F> {
    pub threshold: F,
    pub k_base: F,
    pub k_perturbed: F,
    pub within_band: bool,
    pub above_threshold: bool,
    pub holds: bool,
}

/// Side-by-side report: actual deviations against the theorem bounds and
/// the competing bounds.
#[derive(Clone, Debug, Serialize)]
pub struct DeviationReport<F> {
    pub subset_mode: bool,
    pub subset_labels: Option<Vec<String>>,
    pub epsilon: F,
    pub beta: F,
    pub mixing: Option<F>,
    pub gate_passed: bool,
    pub closeness: ClosenessReport<F>,
    pub bounds: TheoremBounds<F>,
    pub qhat_irreducible: bool,
    /// Subset mode: do all subset states sit in one recurrent class of the
    /// perturbed matrix?
    pub subset_in_one_class: Option<bool>,
    pub states: Vec<StateDeviation<F>>,
    pub max_actual: Option<F>,
    /// `None` renders as infinite.
    pub ocinneide: Option<F>,
    pub subsets: Vec<SubsetReport<F>>,
    pub dichotomy: Option<DichotomyReport<F>>,
    /// Inequalities asserted by the theorems that failed even though the
    /// gate and the closeness verdict both passed. Always empty unless
    /// something is seriously wrong.
    pub theorem_violations: Vec<String>,
    pub fundamental_convention: String,
}

impl<F: Scalar> DeviationReport<F> {
    /// True when the theorems made claims here (gate and verdict passed,
    /// and in subset mode the matrices coincide outside the subset).
    pub fn theorems_apply(&self) -> bool {
        self.gate_passed
            && self.closeness.close
            && self.closeness.coincides_outside.unwrap_or(true)
    }
}

/// Stationary vector of the perturbed matrix usable in subset mode: the
/// stationary distribution on the recurrent class containing the subset,
/// extended by zeros. `None` when the subset states do not share a class.
fn subset_stationary<F: Scalar>(
    qhat: &Chain<F>,
    s1: StateSet,
) -> Result<Option<Vec<F>>, PerturbError> {
    let class = match qhat
        .recurrent_classes()
        .into_iter()
        .find(|c| s1.is_subset_of(*c))
    {
        Some(c) => c,
        None => return Ok(None),
    };
    let inside = class.indices();
    let k = inside.len();
    let mut a = oracles::linalg::Matrix::zeros(k);
    for (i, &s) in inside.iter().enumerate() {
        for (j, &t) in inside.iter().enumerate() {
            let delta = if i == j { F::one() } else { F::zero() };
            a[(i, j)] = delta - qhat.prob(t, s);
        }
    }
    for j in 0..k {
        a[(k - 1, j)] = F::one();
    }
    let mut b = vec![F::zero(); k];
    b[k - 1] = F::one();
    let w = a
        .factor()
        .map_err(OracleError::from)?
        .solve(&b)
        .map_err(OracleError::from)?;
    let total: F = w.iter().copied().sum();
    let mut full = vec![F::zero(); qhat.n()];
    for (i, &s) in inside.iter().enumerate() {
        full[s] = w[i] / total;
    }
    Ok(Some(full))
}

/// Exit-law deviation rows for one subset under both matrices; `None` when
/// the perturbed matrix cannot leave the subset from somewhere (singular
/// absorbing solve).
fn exit_deviations<F: Scalar>(
    q: &Chain<F>,
    qhat: &Chain<F>,
    domain: StateSet,
) -> Result<Option<Vec<ExitDeviation<F>>>, PerturbError> {
    let base = oracles::exit_law_rows(q, domain)?;
    let pert = match oracles::exit_law_rows(qhat, domain) {
        Ok(rows) => rows,
        Err(OracleError::Solve(_)) => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let half = F::cast(0.5);
    let mut out = Vec::new();
    for (i, s) in domain.iter().enumerate() {
        let mut sup = F::zero();
        let mut l1 = F::zero();
        for t in 0..q.n() {
            let d = (base[i][t] - pert[i][t]).abs();
            if d > sup {
                sup = d;
            }
            l1 = l1 + d;
        }
        out.push(ExitDeviation {
            from: q.space().label(s).to_string(),
            sup,
            tv: l1 * half,
        });
    }
    Ok(Some(out))
}

/// Assemble the full deviation report for a pair of matrices.
///
/// `subsets` lists the domains whose exit laws and visit lengths are
/// compared; in subset mode the perturbed region is always evaluated for
/// the dichotomy whether requested or not.
pub fn deviation_report<F: Scalar>(
    q: &Chain<F>,
    qhat: &Chain<F>,
    params: &ClosenessParams<F>,
    subsets: &[StateSet],
) -> Result<DeviationReport<F>, PerturbError> {
    require_same_space(q, qhat)?;
    require_irreducible(q)?;
    let n = q.n();
    let mu = oracles::stationary_solve(q)?;

    let (closeness, gate_passed, mixing) = match params.subset {
        None => {
            let closeness = is_close(q, qhat, params)?;
            let gate = theorem1_gate(params.beta, params.epsilon, n)?;
            (closeness, gate, None)
        }
        Some(s1) => {
            let closeness = is_close_on(q, qhat, params)?;
            let a = match params.mixing {
                Some(a) => a,
                None => mixing_parameter(q, s1)?,
            };
            let gate = theorem2_gate(params.beta, params.epsilon, a, n)?;
            (closeness, gate, Some(a))
        }
    };
    let bounds = theorem_bounds(params.beta, n)?;
    let qhat_irreducible = qhat.is_irreducible();
    let mut violations: Vec<String> = Vec::new();
    let theorems_apply = gate_passed
        && closeness.close
        && closeness.coincides_outside.unwrap_or(true);

    // Stationary deviations.
    let mut actuals: Vec<Option<F>> = vec![None; n];
    let mut subset_in_one_class = None;
    let mut muhat_full: Option<Vec<F>> = None;
    match params.subset {
        None => {
            if qhat_irreducible {
                let muhat = oracles::stationary_solve(qhat)?;
                for s in 0..n {
                    actuals[s] = Some((F::one() - muhat.get(s) / mu.get(s)).abs());
                }
                muhat_full = Some(muhat.as_slice().to_vec());
            } else if theorems_apply {
                violations.push(
                    "perturbed matrix is reducible despite a passing gate and closeness verdict"
                        .to_string(),
                );
            }
        }
        Some(s1) => {
            let muhat = subset_stationary(qhat, s1)?;
            subset_in_one_class = Some(muhat.is_some());
            if let Some(muhat) = muhat {
                let mass_base = mu.mass(s1);
                let mass_pert: F = s1.iter().map(|s| muhat[s]).sum();
                for s in s1.iter() {
                    let cond_base = mu.get(s) / mass_base;
                    let cond_pert = muhat[s] / mass_pert;
                    actuals[s] = Some((F::one() - cond_pert / cond_base).abs());
                }
                muhat_full = Some(muhat);
            } else if theorems_apply {
                violations.push(
                    "subset states split across recurrent classes despite a passing gate and \
                     closeness verdict"
                        .to_string(),
                );
            }
        }
    }
    if theorems_apply {
        for (s, actual) in actuals.iter().enumerate() {
            if let Some(a) = actual {
                if *a > bounds.stationary {
                    violations.push(format!(
                        "stationary deviation {} at state {} exceeds bound {}",
                        a,
                        q.space().label(s),
                        bounds.stationary
                    ));
                }
            }
        }
    }

    let mut states = Vec::with_capacity(n);
    for s in 0..n {
        states.push(StateDeviation {
            label: q.space().label(s).to_string(),
            actual: actuals[s],
            cho_meyer: cho_meyer_bound(q, qhat, s)?,
            kirkland: kirkland_bound(q, qhat, s)?,
        });
    }
    let max_actual = actuals
        .iter()
        .flatten()
        .copied()
        .fold(None, |m: Option<F>, a| {
            Some(match m {
                None => a,
                Some(m) if a > m => a,
                Some(m) => m,
            })
        });

    let oc = ocinneide_ratio(q, qhat);
    let ocinneide = if oc.is_finite() { Some(oc) } else { None };

    // Per-subset exit laws and visit lengths.
    let mut subset_reports = Vec::new();
    for &domain in subsets {
        if domain.is_empty() || domain == q.space().full_set() {
            return Err(PerturbError::BadSubset);
        }
        let covered = match params.subset {
            None => true,
            Some(s1) => domain.is_subset_of(s1) && domain != s1,
        };
        let k_base = visit_length_given(&mu, q, domain)?;
        let (k_perturbed, k_ratio) = match &muhat_full {
            Some(muhat) => {
                let mass: F = domain.iter().map(|s| muhat[s]).sum();
                if mass > F::zero() {
                    let outside = domain.complement(n);
                    let outflow: F = domain
                        .iter()
                        .map(|s| muhat[s] * qhat.mass_into(s, outside))
                        .collect::<Vec<F>>()
                        .into_iter()
                        .sum();
                    let k = mass / outflow; // infinite when outflow is zero
                    (Some(k), Some(k / k_base))
                } else {
                    (None, None)
                }
            }
            None => (None, None),
        };
        let (exits, note) = match exit_deviations(q, qhat, domain)? {
            Some(e) => (e, None),
            None => (
                Vec::new(),
                Some("perturbed matrix cannot exit this subset; exit laws undefined".to_string()),
            ),
        };
        if theorems_apply && covered {
            for e in &exits {
                if e.sup >= bounds.exit {
                    violations.push(format!(
                        "exit-law deviation {} from state {} over {} reaches bound {}",
                        e.sup,
                        e.from,
                        q.space().fmt_set(domain),
                        bounds.exit
                    ));
                }
            }
            match k_ratio {
                Some(r) if r.is_finite() => {
                    if r > bounds.k_factor || r < F::one() / bounds.k_factor {
                        violations.push(format!(
                            "visit-length ratio {} over {} outside [1/{}, {}]",
                            r,
                            q.space().fmt_set(domain),
                            bounds.k_factor,
                            bounds.k_factor
                        ));
                    }
                }
                _ => violations.push(format!(
                    "visit-length ratio over {} undefined despite passing gate and verdict",
                    q.space().fmt_set(domain)
                )),
            }
        }
        subset_reports.push(SubsetReport {
            domain,
            labels: domain.iter().map(|s| q.space().label(s).to_string()).collect(),
            covered,
            exits,
            k_base,
            k_perturbed,
            k_ratio,
            note,
        });
    }

    // Dichotomy for the perturbed region itself.
    let dichotomy = match params.subset {
        None => None,
        Some(s1) => {
            let zr1 = zeta_restricted(q, &mu, s1)?;
            let threshold = dichotomy_threshold(params.epsilon, n, mu.mass(s1), zr1.value);
            let k_base = visit_length_given(&mu, q, s1)?;
            let k_perturbed = match &muhat_full {
                Some(muhat) => {
                    let mass: F = s1.iter().map(|s| muhat[s]).sum();
                    let outside = s1.complement(n);
                    let outflow: F = s1
                        .iter()
                        .map(|s| muhat[s] * qhat.mass_into(s, outside))
                        .sum();
                    if mass > F::zero() {
                        mass / outflow
                    } else {
                        F::nan()
                    }
                }
                None => F::nan(),
            };
            if k_perturbed.is_nan() {
                None
            } else {
                let ratio = k_perturbed / k_base;
                let within_band =
                    ratio.is_finite() && ratio <= bounds.k_factor && ratio >= F::one() / bounds.k_factor;
                let above_threshold = k_base >= threshold && k_perturbed >= threshold;
                let holds = within_band || above_threshold;
                if theorems_apply && !holds {
                    violations.push(format!(
                        "visit-length dichotomy fails over {}: ratio {} outside band and \
                         lengths {} / {} below threshold {}",
                        q.space().fmt_set(s1),
                        ratio,
                        k_base,
                        k_perturbed,
                        threshold
                    ));
                }
                Some(DichotomyReport {
                    threshold,
                    k_base,
                    k_perturbed,
                    within_band,
                    above_threshold,
                    holds,
                })
            }
        }
    };

    Ok(DeviationReport {
        subset_mode: params.subset.is_some(),
        subset_labels: params.subset.map(|s1| {
            s1.iter().map(|s| q.space().label(s).to_string()).collect()
        }),
        epsilon: params.epsilon,
        beta: params.beta,
        mixing,
        gate_passed,
        closeness,
        bounds,
        qhat_irreducible,
        subset_in_one_class,
        states,
        max_actual,
        ocinneide,
        subsets: subset_reports,
        dichotomy,
        theorem_violations: violations,
        fundamental_convention: oracles::FUNDAMENTAL_CONVENTION.to_string(),
    })
}

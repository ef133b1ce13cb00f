//! Independent ground-truth engines: direct linear solves for stationary
//! vectors, hitting probabilities and passage times, plus a seeded
//! trajectory simulator and empirical estimation. Everything here avoids
//! the graph-enumeration route so the two can check each other.

pub mod linalg;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::chain::{Chain, ChainError, Distribution, StateSpace};
use crate::scalar::Scalar;
use crate::subset::StateSet;
use linalg::{LinalgError, Matrix};

/// Condition number past which a solve is reported as ill-conditioned.
pub const CONDITION_WARNING: f64 = 1e12;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("chain is reducible; {0}")]
    Reducible(String),
    #[error("subset is not usable here: {0}")]
    BadSubset(String),
    #[error("linear solve failed ({0}); this indicates a closed class inside the subset")]
    Solve(#[from] LinalgError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error("trajectory is empty")]
    EmptyTrajectory,
    #[error("step count must be at least 1")]
    ZeroSteps,
    #[error("state {0:?} was visited but never left; its empirical row is undefined")]
    NeverLeft(String),
    #[error("only {observed} completed visits (need at least {required})")]
    TooFewVisits { observed: usize, required: usize },
    #[error("malformed trajectory file: {0}")]
    TrajectoryFormat(String),
}

fn require_irreducible<F: Scalar>(c: &Chain<F>) -> Result<(), OracleError> {
    match c.closed_class_witness() {
        None => Ok(()),
        Some(w) => Err(OracleError::Reducible(format!(
            "closed class {}",
            c.space().fmt_set(w)
        ))),
    }
}

/// Stationary distribution by direct linear solve: the system
/// `mu (I - q) = 0` transposed, with the last equation replaced by the
/// normalization `sum mu = 1`.
pub fn stationary_solve<F: Scalar>(c: &Chain<F>) -> Result<Distribution<F>, OracleError> {
    require_irreducible(c)?;
    let n = c.n();
    let mut a = Matrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            // (I - q)^T
            let delta = if i == j { F::one() } else { F::zero() };
            a[(i, j)] = delta - c.prob(j, i);
        }
    }
    for j in 0..n {
        a[(n - 1, j)] = F::one();
    }
    if let Some(cond) = a.condition_inf() {
        if cond > CONDITION_WARNING {
            log::warn!("stationary solve is ill-conditioned (cond_inf = {cond:.3e})");
        }
    }
    let mut b = vec![F::zero(); n];
    b[n - 1] = F::one();
    let mu = a.factor()?.solve(&b)?;
    Ok(Distribution::from_weights(c.space().clone(), mu)?)
}

/// Restrict to the subset `keep` (for solves with the complement made
/// absorbing): the sub-block `q[keep, keep]`.
fn sub_block<F: Scalar>(c: &Chain<F>, keep: &[usize]) -> Matrix<F> {
    let k = keep.len();
    let mut m = Matrix::zeros(k);
    for (i, &s) in keep.iter().enumerate() {
        for (j, &t) in keep.iter().enumerate() {
            m[(i, j)] = c.prob(s, t);
        }
    }
    m
}

fn i_minus<F: Scalar>(m: &Matrix<F>) -> Matrix<F> {
    let n = m.n();
    let mut out = Matrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let delta = if i == j { F::one() } else { F::zero() };
            out[(i, j)] = delta - m[(i, j)];
        }
    }
    out
}

/// Law of the exit state from `domain`, starting at `s` inside it, by the
/// absorbing-chain solve `(I - Q_CC) h_t = r_t` per target `t` outside.
pub fn exit_distribution_solve<F: Scalar>(
    c: &Chain<F>,
    domain: StateSet,
    s: usize,
) -> Result<crate::formulas::ExitLaw<F>, OracleError> {
    let law = exit_law_rows(c, domain)?;
    let inside = domain.indices();
    let pos = inside.iter().position(|&x| x == s).ok_or_else(|| {
        OracleError::BadSubset(format!("state {} not in subset", c.space().label(s)))
    })?;
    let p = law[pos].clone();
    Ok(crate::formulas::ExitLaw {
        origin: s,
        domain,
        law: Distribution::from_weights(c.space().clone(), p)?,
    })
}

/// Exit laws for every start state in `domain` at once (one factorization).
/// Row `i` is the exit law from the `i`-th state of `domain` (ascending),
/// as a full-length vector supported on the complement.
pub fn exit_law_rows<F: Scalar>(
    c: &Chain<F>,
    domain: StateSet,
) -> Result<Vec<Vec<F>>, OracleError> {
    check_proper_subset(c, domain)?;
    let n = c.n();
    let inside = domain.indices();
    let outside: Vec<usize> = domain.complement(n).indices();
    let lu = i_minus(&sub_block(c, &inside)).factor()?;
    let mut rows = vec![vec![F::zero(); n]; inside.len()];
    for &t in &outside {
        let rhs: Vec<F> = inside.iter().map(|&s| c.prob(s, t)).collect();
        let h = lu.solve(&rhs)?;
        for (i, &_s) in inside.iter().enumerate() {
            rows[i][t] = h[i];
        }
    }
    Ok(rows)
}

/// Expected first hitting time of the complement of `domain` from `s`,
/// solving `(I - Q_CC) tau = 1`.
pub fn hitting_time_solve<F: Scalar>(
    c: &Chain<F>,
    domain: StateSet,
    s: usize,
) -> Result<F, OracleError> {
    check_proper_subset(c, domain)?;
    let inside = domain.indices();
    let pos = inside.iter().position(|&x| x == s).ok_or_else(|| {
        OracleError::BadSubset(format!("state {} not in subset", c.space().label(s)))
    })?;
    let lu = i_minus(&sub_block(c, &inside)).factor()?;
    let tau = lu.solve(&vec![F::one(); inside.len()])?;
    Ok(tau[pos])
}

fn check_proper_subset<F: Scalar>(c: &Chain<F>, domain: StateSet) -> Result<(), OracleError> {
    if domain.is_empty() {
        return Err(OracleError::BadSubset("subset is empty".into()));
    }
    if domain == c.space().full_set() {
        return Err(OracleError::BadSubset(
            "subset must be proper for the exit to be reachable".into(),
        ));
    }
    Ok(())
}

/// Mean first passage times: `m[t][s]` is the expected number of steps from
/// `t` until the first visit to `s`; the diagonal carries the mean return
/// time `1 / mu_s`.
#[derive(Clone, Debug)]
pub struct PassageMatrix<F> {
    space: StateSpace,
    m: Vec<Vec<F>>,
}

impl<F: Scalar> PassageMatrix<F> {
    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn get(&self, from: usize, to: usize) -> F {
        self.m[from][to]
    }

    /// Largest passage time into `to` from any other state.
    pub fn max_into(&self, to: usize) -> F {
        (0..self.space.n())
            .filter(|&t| t != to)
            .map(|t| self.m[t][to])
            .fold(F::zero(), |a, b| if b > a { b } else { a })
    }
}

pub fn mean_first_passage<F: Scalar>(c: &Chain<F>) -> Result<PassageMatrix<F>, OracleError> {
    require_irreducible(c)?;
    let n = c.n();
    let mu = stationary_solve(c)?;
    let mut m = vec![vec![F::zero(); n]; n];
    for target in 0..n {
        let domain = c.space().full_set().without(target);
        let inside = domain.indices();
        let lu = i_minus(&sub_block(c, &inside)).factor()?;
        let tau = lu.solve(&vec![F::one(); inside.len()])?;
        for (i, &t) in inside.iter().enumerate() {
            m[t][target] = tau[i];
        }
        m[target][target] = F::one() / mu.get(target);
    }
    Ok(PassageMatrix {
        space: c.space().clone(),
        m,
    })
}

/// The matrix `A = I - q` whose deleted principal submatrices drive the
/// deleted-inverse sensitivity bound.
///
/// Two conventions circulate for the "fundamental matrix" of an irreducible
/// chain: this one, and the resolvent form `Z = (I - q + 1 mu^T)^{-1}`. The
/// deleted-inverse bound values for the three-state benchmark chain (see
/// [`crate::fixtures::rare_state_chain`]) arise under `A = I - q`, so that
/// is the convention pinned here; `resolvent_matrix` is kept for reference
/// and the report layer records which convention produced its numbers.
pub fn fundamental_matrix<F: Scalar>(c: &Chain<F>) -> Matrix<F> {
    let n = c.n();
    let mut a = Matrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let delta = if i == j { F::one() } else { F::zero() };
            a[(i, j)] = delta - c.prob(i, j);
        }
    }
    a
}

/// Name of the pinned fundamental-matrix convention, recorded in reports.
pub const FUNDAMENTAL_CONVENTION: &str = "I - q";

/// The resolvent form `Z = (I - q + 1 mu^T)^{-1}`. Not the convention the
/// bounds use (its deleted inverses do not produce the benchmark values);
/// exposed so the two can be compared.
pub fn resolvent_matrix<F: Scalar>(c: &Chain<F>) -> Result<Matrix<F>, OracleError> {
    let n = c.n();
    let mu = stationary_solve(c)?;
    let mut a = Matrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let delta = if i == j { F::one() } else { F::zero() };
            a[(i, j)] = delta - c.prob(i, j) + mu.get(j);
        }
    }
    Ok(a.inverse()?)
}

/// Infinity norm of the inverse of `a` with row and column `s` deleted.
pub fn deleted_inverse_norm<F: Scalar>(a: &Matrix<F>, s: usize) -> Result<F, OracleError> {
    Ok(a.deleted(s).inverse()?.inf_norm())
}

/// A simulated path. Consecutive states always have positive transition
/// probability under the generating chain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trajectory {
    pub space: StateSpace,
    pub states: Vec<usize>,
    pub seed: u64,
}

/// Simulate `steps` states (the start state plus `steps - 1` transitions).
///
/// The generator is ChaCha8 seeded with `seed`: portable, and deterministic
/// given `(seed, steps)`. Concurrent runs should derive their generators by
/// keeping the seed and giving each run its own stream id via
/// [`simulate_stream`].
pub fn simulate<F: Scalar>(
    c: &Chain<F>,
    start: usize,
    steps: usize,
    seed: u64,
) -> Result<Trajectory, OracleError> {
    simulate_stream(c, start, steps, seed, 0)
}

/// [`simulate`] on an explicit ChaCha stream; `(seed, stream)` pairs give
/// independent reproducible runs.
pub fn simulate_stream<F: Scalar>(
    c: &Chain<F>,
    start: usize,
    steps: usize,
    seed: u64,
    stream: u64,
) -> Result<Trajectory, OracleError> {
    if steps == 0 {
        return Err(OracleError::ZeroSteps);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut states = Vec::with_capacity(steps);
    let mut cur = start;
    states.push(cur);
    for _ in 1..steps {
        cur = step(c, cur, &mut rng);
        states.push(cur);
    }
    Ok(Trajectory {
        space: c.space().clone(),
        states,
        seed,
    })
}

/// One transition by inverse-CDF walk over the row. Zero entries can never
/// be selected: the cumulative sum does not move across them, and the
/// final-bin fallback (for the floating tail `u ~ 1`) lands on the last
/// positive entry.
fn step<F: Scalar, R: Rng>(c: &Chain<F>, from: usize, rng: &mut R) -> usize {
    let u = F::cast(rng.gen::<f64>());
    let mut acc = F::zero();
    let mut last_positive = from;
    for (t, &p) in c.row(from).iter().enumerate() {
        if p > F::zero() {
            last_positive = t;
            acc = acc + p;
            if u < acc {
                return t;
            }
        }
    }
    last_positive
}

/// Empirical estimate read off a trajectory: transition counts, occupancy,
/// and whether the path closes its loop (first state = last state), in
/// which case the occupancy is exactly the stationary vector of the
/// empirical matrix.
#[derive(Clone, Debug)]
pub struct EmpiricalEstimate<F> {
    pub space: StateSpace,
    /// `counts[s][t]` = observed transitions s -> t.
    pub counts: Vec<Vec<u64>>,
    /// Fraction of time spent in each state.
    pub occupancy: Vec<F>,
    /// States never visited at all; their empirical rows are undefined.
    pub unvisited: StateSet,
    /// True iff the trajectory starts and ends in the same state.
    pub loop_closed: bool,
}

impl<F: Scalar> EmpiricalEstimate<F> {
    /// The empirical transition matrix, if every row is defined. A state
    /// that was visited but never left (or never visited) has no empirical
    /// row; that is reported, never silently renormalized away.
    pub fn chain(&self) -> Result<Chain<F>, OracleError> {
        let n = self.space.n();
        let mut rows = vec![vec![F::zero(); n]; n];
        for s in 0..n {
            let total: u64 = self.counts[s].iter().sum();
            if total == 0 {
                return Err(OracleError::NeverLeft(self.space.label(s).to_string()));
            }
            for t in 0..n {
                rows[s][t] = F::cast(self.counts[s][t] as f64 / total as f64);
            }
        }
        Ok(Chain::new(self.space.clone(), rows)?)
    }
}

pub fn empirical_matrix<F: Scalar>(t: &Trajectory) -> Result<EmpiricalEstimate<F>, OracleError> {
    if t.states.is_empty() {
        return Err(OracleError::EmptyTrajectory);
    }
    let n = t.space.n();
    let mut counts = vec![vec![0u64; n]; n];
    let mut visits = vec![0u64; n];
    for pair in t.states.windows(2) {
        counts[pair[0]][pair[1]] += 1;
    }
    for &s in &t.states {
        visits[s] += 1;
    }
    let total = t.states.len() as f64;
    let occupancy = visits
        .iter()
        .map(|&v| F::cast(v as f64 / total))
        .collect();
    let unvisited = StateSet::from_indices((0..n).filter(|&s| visits[s] == 0));
    Ok(EmpiricalEstimate {
        space: t.space.clone(),
        counts,
        occupancy,
        unvisited,
        loop_closed: t.states.first() == t.states.last(),
    })
}

/// Monte Carlo estimate of the mean visit length to a subset.
#[derive(Clone, Copy, Debug)]
pub struct KEstimate<F> {
    /// Ratio estimator: stages spent in the subset over completed exits.
    pub estimate: F,
    /// Standard error from the spread of completed visit lengths.
    pub std_error: F,
    pub completed_visits: usize,
}

/// Minimum completed visits for [`mc_estimate_k`] to report an estimate.
pub const MIN_COMPLETED_VISITS: usize = 30;

/// Estimate the long-run mean visit length to `domain` from a simulated
/// path of `steps` stages: time in the subset divided by the number of
/// completed exits from it. One extra state is simulated so a visit in
/// progress at the horizon is recognized as incomplete.
pub fn mc_estimate_k<F: Scalar>(
    c: &Chain<F>,
    domain: StateSet,
    steps: usize,
    seed: u64,
) -> Result<KEstimate<F>, OracleError> {
    check_proper_subset(c, domain)?;
    if steps == 0 {
        return Err(OracleError::ZeroSteps);
    }
    // Start outside the subset so the first visit is entered, not inherited.
    let start = domain.complement(c.n()).iter().next().expect("proper");
    let t = simulate(c, start, steps + 1, seed)?;

    let mut time_in = 0u64;
    let mut exits = 0u64;
    let mut lengths: Vec<f64> = Vec::new();
    let mut run = 0u64;
    for p in 0..steps {
        let here = domain.contains(t.states[p]);
        if here {
            time_in += 1;
            run += 1;
            if !domain.contains(t.states[p + 1]) {
                exits += 1;
                lengths.push(run as f64);
                run = 0;
            }
        }
    }
    let m = lengths.len();
    if m < MIN_COMPLETED_VISITS {
        return Err(OracleError::TooFewVisits {
            observed: m,
            required: MIN_COMPLETED_VISITS,
        });
    }
    let mean = lengths.iter().sum::<f64>() / m as f64;
    let var = lengths.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>() / (m as f64 - 1.0);
    Ok(KEstimate {
        estimate: F::cast(time_in as f64 / exits as f64),
        std_error: F::cast((var / m as f64).sqrt()),
        completed_visits: m,
    })
}

/// Serialize a trajectory: a header carrying the generating chain's digest
/// and the seed, then one state label per line.
pub fn trajectory_to_string<F: Scalar>(t: &Trajectory, chain: &Chain<F>) -> String {
    let mut out = format!("#trajectory chain={} seed={}\n", chain.digest(), t.seed);
    for &s in &t.states {
        out.push_str(t.space.label(s));
        out.push('\n');
    }
    out
}

/// Parse a trajectory file against a state space. Returns the trajectory
/// and the chain digest recorded in the header (callers match it against
/// the chain they analyze with).
pub fn trajectory_from_str(
    text: &str,
    space: &StateSpace,
) -> Result<(Trajectory, String), OracleError> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| OracleError::TrajectoryFormat("missing header".into()))?;
    let mut digest = None;
    let mut seed = None;
    if !header.starts_with("#trajectory") {
        return Err(OracleError::TrajectoryFormat(
            "first line must be a #trajectory header".into(),
        ));
    }
    for field in header.split_whitespace().skip(1) {
        if let Some(v) = field.strip_prefix("chain=") {
            digest = Some(v.to_string());
        } else if let Some(v) = field.strip_prefix("seed=") {
            seed = Some(v.parse::<u64>().map_err(|e| {
                OracleError::TrajectoryFormat(format!("bad seed field: {e}"))
            })?);
        }
    }
    let digest =
        digest.ok_or_else(|| OracleError::TrajectoryFormat("header missing chain digest".into()))?;
    let seed =
        seed.ok_or_else(|| OracleError::TrajectoryFormat("header missing seed".into()))?;
    let mut states = Vec::new();
    for line in lines {
        let label = line.trim();
        if label.is_empty() {
            continue;
        }
        states.push(
            space
                .index_of(label)
                .map_err(|_| OracleError::TrajectoryFormat(format!("unknown label {label:?}")))?,
        );
    }
    if states.is_empty() {
        return Err(OracleError::EmptyTrajectory);
    }
    Ok((
        Trajectory {
            space: space.clone(),
            states,
            seed,
        },
        digest,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use approx::assert_relative_eq;

    #[test]
    fn stationary_of_rare_state_chain() {
        let c = fixtures::rare_state_chain::<f64>(0.1);
        let mu = stationary_solve(&c).unwrap();
        assert_relative_eq!(mu.get(0), 0.5, max_relative = 1e-13);
        assert_relative_eq!(mu.get(1), 0.45, max_relative = 1e-13);
        assert_relative_eq!(mu.get(2), 0.05, max_relative = 1e-13);
    }

    #[test]
    fn stationary_of_two_cycle() {
        let mu = stationary_solve(&fixtures::two_cycle::<f64>()).unwrap();
        assert_eq!(mu.get(0), 0.5);
        assert_eq!(mu.get(1), 0.5);
    }

    #[test]
    fn stationary_rejects_reducible() {
        let q = fixtures::split_cluster_chain::<f64>(0.0, 0.3);
        assert!(matches!(
            stationary_solve(&q),
            Err(OracleError::Reducible(_))
        ));
    }

    #[test]
    fn exit_law_of_rare_state_from_one() {
        let c = fixtures::rare_state_chain::<f64>(0.1);
        let law = exit_distribution_solve(&c, StateSet::singleton(0), 0).unwrap();
        assert_relative_eq!(law.law.get(1), 0.9, max_relative = 1e-14);
        assert_relative_eq!(law.law.get(2), 0.1, max_relative = 1e-14);
        assert_eq!(law.law.get(0), 0.0);
    }

    #[test]
    fn hitting_time_immediate_exit() {
        let c = fixtures::rare_state_chain::<f64>(0.1);
        let tau = hitting_time_solve(&c, StateSet::singleton(1), 1).unwrap();
        assert_relative_eq!(tau, 1.0, max_relative = 1e-14);
    }

    #[test]
    fn exit_law_rows_sum_to_one() {
        let c = fixtures::coupled_pair_chain::<f64>();
        let domain = StateSet::from_indices([0, 1, 2]);
        for row in exit_law_rows(&c, domain).unwrap() {
            let total: f64 = row.iter().sum();
            assert_relative_eq!(total, 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn passage_times_of_rare_state_chain() {
        for &delta in &[0.1, 0.01] {
            let c = fixtures::rare_state_chain::<f64>(delta);
            let m = mean_first_passage(&c).unwrap();
            assert_relative_eq!(m.get(1, 2), 2.0 / delta, max_relative = 1e-10);
            assert_relative_eq!(m.get(0, 2), 2.0 / delta - 1.0, max_relative = 1e-10);
        }
        let m = mean_first_passage(&fixtures::two_cycle::<f64>()).unwrap();
        assert_eq!(m.get(0, 1), 1.0);
    }

    #[test]
    fn kac_formula_on_the_diagonal() {
        let c = fixtures::coupled_pair_chain::<f64>();
        let mu = stationary_solve(&c).unwrap();
        let m = mean_first_passage(&c).unwrap();
        for s in 0..c.n() {
            assert_relative_eq!(m.get(s, s) * mu.get(s), 1.0, max_relative = 1e-10);
        }
    }

    #[test]
    fn fundamental_matrix_deleted_inverse_matches_benchmark() {
        let delta = 0.1;
        let c = fixtures::rare_state_chain::<f64>(delta);
        let a = fundamental_matrix(&c);
        // A with row/col 3 deleted is [[1, -1+delta], [-1, 1]] ...
        let a3 = a.deleted(2);
        assert_relative_eq!(a3[(0, 0)], 1.0, max_relative = 1e-14);
        assert_relative_eq!(a3[(0, 1)], -1.0 + delta, max_relative = 1e-14);
        assert_relative_eq!(a3[(1, 0)], -1.0, max_relative = 1e-14);
        assert_relative_eq!(a3[(1, 1)], 1.0, max_relative = 1e-14);
        // ... and its inverse is [[1/d, -1+1/d], [1/d, 1/d]].
        let inv = a3.inverse().unwrap();
        assert_relative_eq!(inv[(0, 0)], 1.0 / delta, max_relative = 1e-11);
        assert_relative_eq!(inv[(0, 1)], -1.0 + 1.0 / delta, max_relative = 1e-11);
        assert_relative_eq!(inv[(1, 0)], 1.0 / delta, max_relative = 1e-11);
        assert_relative_eq!(inv[(1, 1)], 1.0 / delta, max_relative = 1e-11);
        assert_relative_eq!(
            deleted_inverse_norm(&a, 2).unwrap(),
            2.0 / delta,
            max_relative = 1e-11
        );
    }

    #[test]
    fn resolvent_convention_disagrees_with_benchmark() {
        // The pinned convention is the one that reproduces the benchmark
        // deleted inverse; the resolvent form demonstrably does not.
        let delta = 0.1;
        let c = fixtures::rare_state_chain::<f64>(delta);
        let z = resolvent_matrix(&c).unwrap();
        let inv = z.deleted(2).inverse().unwrap();
        assert!((inv[(0, 0)] - 1.0 / delta).abs() > 1e-3);
    }

    #[test]
    fn simulate_two_cycle_is_deterministic() {
        let c = fixtures::two_cycle::<f64>();
        let t = simulate(&c, 0, 4, 7).unwrap();
        assert_eq!(t.states, vec![0, 1, 0, 1]);
    }

    #[test]
    fn same_seed_same_path() {
        let c = fixtures::rare_state_chain::<f64>(0.3);
        let a = simulate(&c, 0, 1000, 99).unwrap();
        let b = simulate(&c, 0, 1000, 99).unwrap();
        assert_eq!(a, b);
        let c2 = simulate(&c, 0, 1000, 100).unwrap();
        assert_ne!(a, c2);
        let s1 = simulate_stream(&c, 0, 1000, 99, 1).unwrap();
        assert_ne!(a, s1);
    }

    #[test]
    fn simulated_frequencies_match_stationary() {
        let c = fixtures::rare_state_chain::<f64>(0.1);
        let t = simulate(&c, 0, 1_000_000, 42).unwrap();
        let est: EmpiricalEstimate<f64> = empirical_matrix(&t).unwrap();
        // State 1 is visited every other stage; 3 sigma of a fair coin at
        // this horizon is 1.5e-3.
        assert!((est.occupancy[0] - 0.5).abs() < 1.5e-3);
        let qhat = est.chain().unwrap();
        let se = (0.1f64 * 0.9 / (est.counts[0].iter().sum::<u64>() as f64)).sqrt();
        assert!((qhat.prob(0, 2) - 0.1).abs() < 3.0 * se);
    }

    #[test]
    fn empirical_matrix_of_deterministic_path() {
        let c = fixtures::two_cycle::<f64>();
        let t = simulate(&c, 0, 5, 1).unwrap();
        let est: EmpiricalEstimate<f64> = empirical_matrix(&t).unwrap();
        let qhat = est.chain().unwrap();
        assert_eq!(qhat.prob(0, 1), 1.0);
        assert_eq!(qhat.prob(1, 0), 1.0);
        assert!(est.loop_closed); // 0,1,0,1,0
        assert!(est.unvisited.is_empty());
    }

    #[test]
    fn empirical_matrix_flags_states_never_left() {
        let space = StateSpace::new(["a", "b", "c"]).unwrap();
        let t = Trajectory {
            space,
            states: vec![0, 1, 0, 2],
            seed: 0,
        };
        let est: EmpiricalEstimate<f64> = empirical_matrix(&t).unwrap();
        assert!(matches!(est.chain(), Err(OracleError::NeverLeft(l)) if l == "c"));
    }

    #[test]
    fn mc_visit_length_forced_to_one() {
        let c = fixtures::rare_state_chain::<f64>(0.1);
        let k = mc_estimate_k(&c, StateSet::from_indices([1, 2]), 20_000, 5).unwrap();
        assert_eq!(k.estimate, 1.0);
    }

    #[test]
    fn mc_visit_length_geometric_self_loop() {
        let space = StateSpace::new(["s", "t"]).unwrap();
        let c: Chain<f64> = Chain::new(space, vec![vec![0.5, 0.5], vec![1.0, 0.0]]).unwrap();
        let k = mc_estimate_k(&c, StateSet::singleton(0), 300_000, 11).unwrap();
        assert!((k.estimate - 2.0).abs() < 3.0 * k.std_error);
        assert!(k.completed_visits > 50_000);
    }

    #[test]
    fn mc_requires_enough_visits() {
        let c = fixtures::rare_state_chain::<f64>(0.1);
        let r = mc_estimate_k(&c, StateSet::from_indices([1, 2]), 20, 5);
        assert!(matches!(r, Err(OracleError::TooFewVisits { .. })));
    }

    #[test]
    fn trajectory_file_roundtrip() {
        let c = fixtures::rare_state_chain::<f64>(0.2);
        let t = simulate(&c, 0, 50, 3).unwrap();
        let text = trajectory_to_string(&t, &c);
        let (back, digest) = trajectory_from_str(&text, c.space()).unwrap();
        assert_eq!(back, t);
        assert_eq!(digest, c.digest());
    }

    #[test]
    fn trajectory_parser_rejects_garbage() {
        let space = StateSpace::new(["a", "b"]).unwrap();
        assert!(trajectory_from_str("", &space).is_err());
        assert!(trajectory_from_str("#trajectory chain=x\n", &space).is_err());
        assert!(trajectory_from_str("#trajectory chain=x seed=1\nz\n", &space).is_err());
    }

    #[test]
    fn error_scaling_is_square_root_in_n() {
        // Seed-averaged RMS entrywise error should scale like 1/sqrt(N).
        let c = fixtures::rare_state_chain::<f64>(0.3);
        let mut rms = Vec::new();
        for &steps in &[1_000usize, 10_000, 100_000, 1_000_000] {
            let mut total = 0.0;
            let seeds = 8;
            for seed in 0..seeds {
                let t = simulate(&c, 0, steps, seed).unwrap();
                let qhat = empirical_matrix::<f64>(&t).unwrap().chain().unwrap();
                let mut sq = 0.0;
                for s in 0..3 {
                    for u in 0..3 {
                        let d = qhat.prob(s, u) - c.prob(s, u);
                        sq += d * d;
                    }
                }
                total += (sq / 9.0).sqrt();
            }
            rms.push(total / seeds as f64);
        }
        // Scaled by sqrt(N) the errors should be flat within a small factor.
        let scaled: Vec<f64> = rms
            .iter()
            .zip([1e3f64, 1e4, 1e5, 1e6])
            .map(|(r, n)| r * n.sqrt())
            .collect();
        for w in scaled.windows(2) {
            let ratio = w[1] / w[0];
            assert!(
                (0.3..3.0).contains(&ratio),
                "sqrt-N scaling broken: {scaled:?}"
            );
        }
    }
}

//! Labeled state spaces, row-stochastic transition matrices and probability
//! vectors, plus the chain file format and reachability checks.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::scalar::Scalar;
use crate::subset::{StateSet, MAX_STATES};

#[derive(Debug, Error)]
pub enum ChainError {
    #[error("malformed chain document: {0}")]
    Malformed(String),
    #[error("state space needs at least two states, got {0}")]
    TooFewStates(usize),
    #[error("state space exceeds {MAX_STATES} states ({0})")]
    TooManyStates(usize),
    #[error("duplicate state label {0:?}")]
    DuplicateLabel(String),
    #[error("unknown state label {0:?}")]
    UnknownLabel(String),
    #[error("matrix row count {rows} does not match {states} states")]
    ShapeMismatch { rows: usize, states: usize },
    #[error("row {label:?} has {len} entries, expected {states}")]
    RowLength {
        label: String,
        len: usize,
        states: usize,
    },
    #[error("negative entry at ({from:?} -> {to:?})")]
    NegativeEntry { from: String, to: String },
    #[error("row {label:?} is all zero; every state needs an outgoing transition")]
    ZeroRow { label: String },
    #[error("row {label:?} sums to {sum}, not 1 within tolerance")]
    NonStochasticRow { label: String, sum: f64 },
    #[error("probability vector sums to {sum}, not 1 within tolerance")]
    NonNormalized { sum: f64 },
    #[error("state spaces do not match ({left:?} vs {right:?})")]
    SpaceMismatch { left: Vec<String>, right: Vec<String> },
}

/// Ordered list of distinct state labels. States are addressed by label at
/// the boundary and by dense index internally.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct StateSpace {
    labels: Arc<Vec<String>>,
}

impl StateSpace {
    pub fn new<S: Into<String>, I: IntoIterator<Item = S>>(labels: I) -> Result<Self, ChainError> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.len() < 2 {
            return Err(ChainError::TooFewStates(labels.len()));
        }
        if labels.len() > MAX_STATES {
            return Err(ChainError::TooManyStates(labels.len()));
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(ChainError::DuplicateLabel(l.clone()));
            }
        }
        Ok(StateSpace {
            labels: Arc::new(labels),
        })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Result<usize, ChainError> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| ChainError::UnknownLabel(label.to_string()))
    }

    pub fn full_set(&self) -> StateSet {
        StateSet::full(self.n())
    }

    /// Parse a comma-separated label list into a subset.
    pub fn set_from_labels<S: AsRef<str>, I: IntoIterator<Item = S>>(
        &self,
        labels: I,
    ) -> Result<StateSet, ChainError> {
        let mut set = StateSet::EMPTY;
        for l in labels {
            set = set.with(self.index_of(l.as_ref())?);
        }
        Ok(set)
    }

    /// Render a subset as `{a, b}` using labels.
    pub fn fmt_set(&self, set: StateSet) -> String {
        let inner: Vec<&str> = set.iter().map(|i| self.label(i)).collect();
        format!("{{{}}}", inner.join(", "))
    }
}

/// Nudge a nonnegative vector so its floating-point sum is exactly one.
/// The residual is folded into the largest entry.
fn snap_to_one<F: Scalar>(v: &mut [F]) {
    for _ in 0..32 {
        let sum: F = v.iter().copied().sum();
        if sum == F::one() {
            return;
        }
        let imax = (0..v.len())
            .max_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap())
            .unwrap();
        v[imax] = v[imax] + (F::one() - sum);
    }
}

#[derive(Serialize, Deserialize)]
struct ChainDoc<F> {
    states: Vec<String>,
    matrix: Vec<Vec<F>>,
}

/// A finite Markov chain: labeled states plus a validated row-stochastic
/// transition matrix. Immutable after construction.
#[derive(Clone, PartialEq, Debug)]
pub struct Chain<F> {
    space: StateSpace,
    rows: Vec<Vec<F>>,
}

impl<F: Scalar> Chain<F> {
    /// Validate and renormalize a transition matrix. Rows must sum to one
    /// within [`Scalar::validation_tolerance`]; they are snapped to an exact
    /// floating-point sum of one afterwards.
    pub fn new(space: StateSpace, mut rows: Vec<Vec<F>>) -> Result<Self, ChainError> {
        let n = space.n();
        if rows.len() != n {
            return Err(ChainError::ShapeMismatch {
                rows: rows.len(),
                states: n,
            });
        }
        let tol = F::validation_tolerance();
        for (s, row) in rows.iter_mut().enumerate() {
            if row.len() != n {
                return Err(ChainError::RowLength {
                    label: space.label(s).to_string(),
                    len: row.len(),
                    states: n,
                });
            }
            for (t, &p) in row.iter().enumerate() {
                if p < F::zero() {
                    return Err(ChainError::NegativeEntry {
                        from: space.label(s).to_string(),
                        to: space.label(t).to_string(),
                    });
                }
            }
            let sum: F = row.iter().copied().sum();
            if sum == F::zero() {
                return Err(ChainError::ZeroRow {
                    label: space.label(s).to_string(),
                });
            }
            if (sum - F::one()).abs() > tol {
                return Err(ChainError::NonStochasticRow {
                    label: space.label(s).to_string(),
                    sum: sum.to_f64_lossy(),
                });
            }
            for p in row.iter_mut() {
                *p = *p / sum;
            }
            snap_to_one(row);
        }
        Ok(Chain { space, rows })
    }

    /// Bit-preserving construction from rows that already came out of a
    /// validated chain. Re-running the public validation would renormalize
    /// and could move entries by an ulp, which matters where two chains
    /// must coincide exactly on shared rows.
    pub(crate) fn from_validated(space: StateSpace, rows: Vec<Vec<F>>) -> Self {
        debug_assert!(rows.len() == space.n());
        debug_assert!(rows.iter().all(|row| {
            let sum: F = row.iter().copied().sum();
            row.len() == space.n()
                && row.iter().all(|&p| p >= F::zero())
                && (sum - F::one()).abs() <= F::validation_tolerance()
        }));
        Chain { space, rows }
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn n(&self) -> usize {
        self.space.n()
    }

    /// One-step probability from `from` to `to`.
    pub fn prob(&self, from: usize, to: usize) -> F {
        self.rows[from][to]
    }

    pub fn row(&self, from: usize) -> &[F] {
        &self.rows[from]
    }

    /// Total one-step mass from `from` into `set`.
    pub fn mass_into(&self, from: usize, set: StateSet) -> F {
        set.iter().map(|t| self.rows[from][t]).sum()
    }

    /// Parse the chain file format: a JSON document with a `states` array of
    /// labels and a `matrix` array of rows.
    pub fn parse(text: &str) -> Result<Self, ChainError> {
        let doc: ChainDoc<F> =
            serde_json::from_str(text).map_err(|e| ChainError::Malformed(e.to_string()))?;
        let space = StateSpace::new(doc.states)?;
        Chain::new(space, doc.matrix)
    }

    /// Canonical serialization; `parse` of the output reproduces the chain
    /// bit for bit.
    pub fn serialize(&self) -> String {
        let doc = ChainDoc {
            states: self.space.labels().to_vec(),
            matrix: self.rows.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("chain serializes")
    }

    /// Hex digest of the canonical serialization; trajectory files carry it
    /// so estimates cannot be run against the wrong chain.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.serialize().as_bytes());
        format!("{:x}", hasher.finalize())
    }

    /// Successors of `s` in the positive-probability digraph.
    fn successors(&self, s: usize) -> impl Iterator<Item = usize> + '_ {
        self.rows[s]
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > F::zero())
            .map(|(t, _)| t)
    }

    fn reachable_from(&self, start: usize) -> StateSet {
        let mut seen = StateSet::singleton(start);
        let mut stack = vec![start];
        while let Some(s) = stack.pop() {
            for t in self.successors(s) {
                if !seen.contains(t) {
                    seen = seen.with(t);
                    stack.push(t);
                }
            }
        }
        seen
    }

    /// True iff the positive-entry digraph is strongly connected.
    pub fn is_irreducible(&self) -> bool {
        self.strongly_connected_components().len() == 1
    }

    /// Strongly connected components of the positive-entry digraph.
    pub fn strongly_connected_components(&self) -> Vec<StateSet> {
        let n = self.n();
        let forward: Vec<StateSet> = (0..n).map(|s| self.reachable_from(s)).collect();
        let mut assigned = StateSet::EMPTY;
        let mut comps = Vec::new();
        for s in 0..n {
            if assigned.contains(s) {
                continue;
            }
            let comp = StateSet::from_indices(
                (0..n).filter(|&t| forward[s].contains(t) && forward[t].contains(s)),
            );
            assigned = assigned.union(comp);
            comps.push(comp);
        }
        comps
    }

    /// Closed (recurrent) classes: components with no edge leaving them.
    pub fn recurrent_classes(&self) -> Vec<StateSet> {
        self.strongly_connected_components()
            .into_iter()
            .filter(|&comp| {
                comp.iter()
                    .all(|s| self.successors(s).all(|t| comp.contains(t)))
            })
            .collect()
    }

    /// A closed class strictly smaller than the full space, if one exists.
    /// `None` exactly when the chain is irreducible.
    pub fn closed_class_witness(&self) -> Option<StateSet> {
        self.recurrent_classes()
            .into_iter()
            .find(|&c| c != self.space.full_set())
    }
}

/// A probability vector over a state space.
#[derive(Clone, PartialEq, Debug)]
pub struct Distribution<F> {
    space: StateSpace,
    p: Vec<F>,
}

impl<F: Scalar> Distribution<F> {
    pub fn new(space: StateSpace, mut p: Vec<F>) -> Result<Self, ChainError> {
        if p.len() != space.n() {
            return Err(ChainError::ShapeMismatch {
                rows: p.len(),
                states: space.n(),
            });
        }
        for (i, &x) in p.iter().enumerate() {
            if x < F::zero() {
                return Err(ChainError::NegativeEntry {
                    from: space.label(i).to_string(),
                    to: space.label(i).to_string(),
                });
            }
        }
        let sum: F = p.iter().copied().sum();
        if (sum - F::one()).abs() > F::validation_tolerance() {
            return Err(ChainError::NonNormalized {
                sum: sum.to_f64_lossy(),
            });
        }
        for x in p.iter_mut() {
            *x = *x / sum;
        }
        snap_to_one(&mut p);
        Ok(Distribution { space, p })
    }

    /// Normalize a nonnegative weight vector (used where the math guarantees
    /// a positive total, e.g. graph-weight ratios).
    pub fn from_weights(space: StateSpace, w: Vec<F>) -> Result<Self, ChainError> {
        let sum: F = w.iter().copied().sum();
        if !(sum > F::zero()) {
            return Err(ChainError::NonNormalized {
                sum: sum.to_f64_lossy(),
            });
        }
        let p = w.into_iter().map(|x| x / sum).collect();
        let mut d = Distribution { space, p };
        snap_to_one(&mut d.p);
        Ok(d)
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn get(&self, i: usize) -> F {
        self.p[i]
    }

    pub fn as_slice(&self) -> &[F] {
        &self.p
    }

    /// Total mass on a subset.
    pub fn mass(&self, set: StateSet) -> F {
        set.iter().map(|i| self.p[i]).sum()
    }
}

impl<F: Scalar> fmt::Display for Distribution<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .p
            .iter()
            .enumerate()
            .map(|(i, x)| format!("{}={}", self.space.label(i), x))
            .collect();
        write!(f, "[{}]", parts.join(", "))
    }
}

/// Check two chains share one state space, for pairwise operations.
pub fn require_same_space<F: Scalar>(a: &Chain<F>, b: &Chain<F>) -> Result<(), ChainError> {
    if a.space() != b.space() {
        return Err(ChainError::SpaceMismatch {
            left: a.space().labels().to_vec(),
            right: b.space().labels().to_vec(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    const DOC: &str = r#"{
        "states": ["1", "2", "3"],
        "matrix": [[0.0, 0.9, 0.1], [1.0, 0.0, 0.0], [1.0, 0.0, 0.0]]
    }"#;

    #[test]
    fn parses_three_state_document() {
        let c: Chain<f64> = Chain::parse(DOC).unwrap();
        assert_eq!(c.n(), 3);
        assert_eq!(c.prob(0, 1), 0.9);
        assert_eq!(c.prob(0, 2), 0.1);
        assert_eq!(c.prob(1, 0), 1.0);
        assert_eq!(c, fixtures::rare_state_chain(0.1));
    }

    #[test]
    fn parses_two_cycle() {
        let c: Chain<f64> =
            Chain::parse(r#"{"states":["1","2"],"matrix":[[0,1],[1,0]]}"#).unwrap();
        assert!(c.is_irreducible());
    }

    #[test]
    fn rejects_non_stochastic_row() {
        let r: Result<Chain<f64>, _> =
            Chain::parse(r#"{"states":["a","b"],"matrix":[[0.4,0.5],[1,0]]}"#);
        assert!(matches!(r, Err(ChainError::NonStochasticRow { .. })));
    }

    #[test]
    fn rejects_negative_entry() {
        let r: Result<Chain<f64>, _> =
            Chain::parse(r#"{"states":["a","b"],"matrix":[[-0.5,1.5],[1,0]]}"#);
        assert!(matches!(r, Err(ChainError::NegativeEntry { .. })));
    }

    #[test]
    fn rejects_duplicate_label() {
        let r: Result<Chain<f64>, _> =
            Chain::parse(r#"{"states":["a","a"],"matrix":[[0,1],[1,0]]}"#);
        assert!(matches!(r, Err(ChainError::DuplicateLabel(_))));
    }

    #[test]
    fn rejects_zero_row() {
        let r: Result<Chain<f64>, _> =
            Chain::parse(r#"{"states":["a","b"],"matrix":[[0,0],[1,0]]}"#);
        assert!(matches!(r, Err(ChainError::ZeroRow { .. })));
    }

    #[test]
    fn rejects_malformed_document() {
        assert!(matches!(
            Chain::<f64>::parse("states: nope"),
            Err(ChainError::Malformed(_))
        ));
    }

    #[test]
    fn rows_snap_to_exact_unit_sum() {
        let c: Chain<f64> = Chain::parse(
            r#"{"states":["a","b","c"],
                "matrix":[[0.1,0.2,0.7000000001],[0.3333333333,0.3333333333,0.3333333334],[1,0,0]]}"#,
        )
        .unwrap();
        for s in 0..3 {
            let sum: f64 = c.row(s).iter().sum();
            assert_eq!(sum, 1.0, "row {s} sum not exactly one");
        }
    }

    #[test]
    fn serialize_roundtrip_is_identity() {
        let c: Chain<f64> = Chain::parse(DOC).unwrap();
        let back: Chain<f64> = Chain::parse(&c.serialize()).unwrap();
        assert_eq!(c, back);
        assert_eq!(c.digest(), back.digest());
    }

    #[test]
    fn block_diagonal_is_reducible() {
        let c: Chain<f64> = Chain::parse(
            r#"{"states":["1","2","3","4"],
                "matrix":[[0,1,0,0],[1,0,0,0],[0,0,0,1],[0,0,1,0]]}"#,
        )
        .unwrap();
        assert!(!c.is_irreducible());
        let witness = c.closed_class_witness().unwrap();
        assert!(witness.len() == 2);
        assert_eq!(c.recurrent_classes().len(), 2);
    }

    #[test]
    fn counterexample_with_dead_exit_is_reducible() {
        // eta_hat = 0 disconnects {a, b} from c.
        let q = fixtures::split_cluster_chain::<f64>(0.0, 0.3);
        assert!(!q.is_irreducible());
        let witness = q.closed_class_witness().unwrap();
        assert_eq!(q.space().fmt_set(witness), "{a, b}");
    }

    #[test]
    fn irreducible_chain_has_no_witness() {
        assert!(fixtures::rare_state_chain::<f64>(0.1)
            .closed_class_witness()
            .is_none());
    }

    #[test]
    fn distribution_validation() {
        let space = StateSpace::new(["a", "b"]).unwrap();
        assert!(Distribution::new(space.clone(), vec![0.5, 0.5]).is_ok());
        assert!(matches!(
            Distribution::new(space.clone(), vec![0.7, 0.2]),
            Err(ChainError::NonNormalized { .. })
        ));
        assert!(Distribution::new(space, vec![-0.1, 1.1]).is_err());
    }

    #[test]
    fn f32_chain_accepts_f32_rounding() {
        let space = StateSpace::new(["a", "b", "c"]).unwrap();
        let third = 1.0f32 / 3.0;
        let c = Chain::new(space, vec![vec![third, third, third]; 3]).unwrap();
        assert!(c.is_irreducible());
    }
}

//! Graph-ratio formulas for stationary distributions, exit times and exit
//! laws, plus entry distributions and mean visit lengths.
//!
//! Every quantity here is a ratio of summed C-graph weights (or of
//! stationary masses); the matching linear-algebra routes live in
//! [`crate::oracles`] and the two are cross-checked in tests.

use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;

use thiserror::Error;

use crate::chain::{Chain, ChainError, Distribution};
use crate::graphs::{enumerate_graphs_allow_empty, GraphError, GraphFamily};
use crate::scalar::Scalar;
use crate::subset::StateSet;
use crate::DEFAULT_ENUMERATION_CAP;

#[derive(Debug, Error)]
pub enum FormulaError {
    #[error("chain is reducible; {0}")]
    Reducible(String),
    #[error("state space has {n} states, over the enumeration cap {cap}")]
    OverCap { n: usize, cap: usize },
    #[error("subset must be a proper nonempty subset of the state space")]
    ImproperSubset,
    #[error("state {0} is not in the subset")]
    NotInSubset(String),
    #[error(
        "graph-weight denominator vanished for subset {0}; impossible for an \
         irreducible chain and indicates a reducibility bug"
    )]
    ZeroDenominator(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Chain(#[from] ChainError),
}

/// Law of the exit state from a subset, starting inside it.
#[derive(Clone, Debug)]
pub struct ExitLaw<F> {
    pub origin: usize,
    pub domain: StateSet,
    /// Full-length probability vector, supported on the complement.
    pub law: Distribution<F>,
}

impl<F: Scalar> ExitLaw<F> {
    /// Largest absolute difference over exit targets.
    pub fn sup_distance(&self, other: &ExitLaw<F>) -> F {
        self.law
            .as_slice()
            .iter()
            .zip(other.law.as_slice())
            .map(|(&a, &b)| (a - b).abs())
            .fold(F::zero(), |m, d| if d > m { d } else { m })
    }

    /// Total variation distance (half the L1 distance).
    pub fn tv_distance(&self, other: &ExitLaw<F>) -> F {
        let l1: F = self
            .law
            .as_slice()
            .iter()
            .zip(other.law.as_slice())
            .map(|(&a, &b)| (a - b).abs())
            .sum();
        l1 / F::cast(2.0)
    }
}

/// Entry distribution and mean length of visits to a subset.
#[derive(Clone, Debug)]
pub struct VisitStats<F> {
    pub domain: StateSet,
    /// Probability that a visit to the subset starts at each state
    /// (full-length vector supported on the subset).
    pub entry: Distribution<F>,
    /// Long-run mean number of stages per visit; at least one.
    pub mean_length: F,
}

/// A graph family with its member weights and their sum, cached per domain.
struct WeightedFamily<F> {
    family: GraphFamily,
    weights: Vec<F>,
    total: F,
}

/// Shared enumeration context: one irreducibility check and per-domain
/// weight cache, confined to a single solver instance. The ratio formulas
/// for one subset reuse each other's subfamilies heavily.
pub struct FwSolver<'c, F> {
    chain: &'c Chain<F>,
    cache: RefCell<HashMap<StateSet, Rc<WeightedFamily<F>>>>,
}

impl<'c, F: Scalar> FwSolver<'c, F> {
    /// Build a solver with the default enumeration cap.
    pub fn new(chain: &'c Chain<F>) -> Result<Self, FormulaError> {
        Self::with_cap(chain, DEFAULT_ENUMERATION_CAP)
    }

    /// Build a solver with an explicit cap on the state-space size.
    pub fn with_cap(chain: &'c Chain<F>, cap: usize) -> Result<Self, FormulaError> {
        if chain.n() > cap {
            return Err(FormulaError::OverCap {
                n: chain.n(),
                cap,
            });
        }
        if let Some(w) = chain.closed_class_witness() {
            return Err(FormulaError::Reducible(format!(
                "closed class {}",
                chain.space().fmt_set(w)
            )));
        }
        Ok(FwSolver {
            chain,
            cache: RefCell::new(HashMap::new()),
        })
    }

    fn weighted(&self, domain: StateSet) -> Rc<WeightedFamily<F>> {
        if let Some(hit) = self.cache.borrow().get(&domain) {
            return Rc::clone(hit);
        }
        let family = enumerate_graphs_allow_empty(self.chain.n(), domain);
        let weights: Vec<F> = family.iter().map(|g| g.weight(self.chain)).collect();
        let total = weights.iter().copied().sum();
        let entry = Rc::new(WeightedFamily {
            family,
            weights,
            total,
        });
        self.cache.borrow_mut().insert(domain, Rc::clone(&entry));
        entry
    }

    fn positive_total(&self, domain: StateSet) -> Result<F, FormulaError> {
        let wf = self.weighted(domain);
        if !(wf.total > F::zero()) {
            return Err(FormulaError::ZeroDenominator(
                self.chain.space().fmt_set(domain),
            ));
        }
        Ok(wf.total)
    }

    fn check_proper(&self, domain: StateSet) -> Result<(), FormulaError> {
        if domain.is_empty() || domain == self.chain.space().full_set() {
            return Err(FormulaError::ImproperSubset);
        }
        Ok(())
    }

    fn require_member(&self, domain: StateSet, s: usize) -> Result<(), FormulaError> {
        if !domain.contains(s) {
            return Err(FormulaError::NotInSubset(
                self.chain.space().label(s).to_string(),
            ));
        }
        Ok(())
    }

    /// Stationary distribution: mass at `s` proportional to the total
    /// weight of the graphs on everything-but-`s`.
    pub fn stationary(&self) -> Result<Distribution<F>, FormulaError> {
        let n = self.chain.n();
        let full = self.chain.space().full_set();
        let weights: Vec<F> = (0..n)
            .map(|s| self.weighted(full.without(s)).total)
            .collect();
        Ok(Distribution::from_weights(
            self.chain.space().clone(),
            weights,
        )?)
    }

    /// Expected number of stages before the walk started at `s` leaves
    /// `domain`.
    pub fn exit_time(&self, domain: StateSet, s: usize) -> Result<F, FormulaError> {
        self.check_proper(domain)?;
        self.require_member(domain, s)?;
        let denom = self.positive_total(domain)?;
        let mut numer = self.weighted(domain.without(s)).total;
        for t in domain.iter().filter(|&t| t != s) {
            numer = numer + self.leading_total(domain.without(t), s, t);
        }
        Ok(numer / denom)
    }

    /// Total weight of the graphs on `domain` along which `s` leads to `t`.
    fn leading_total(&self, domain: StateSet, s: usize, t: usize) -> F {
        let wf = self.weighted(domain);
        wf.family
            .iter()
            .zip(&wf.weights)
            .filter(|&(g, _)| g.leads_to(s).expect("validated") == t)
            .map(|(_, &w)| w)
            .sum()
    }

    /// Law of the exit state from `domain` starting at `s`: the weight of
    /// the graphs leading from `s` to each outside target, normalized by
    /// the family total.
    pub fn exit_distribution(&self, domain: StateSet, s: usize) -> Result<ExitLaw<F>, FormulaError> {
        self.check_proper(domain)?;
        self.require_member(domain, s)?;
        let denom = self.positive_total(domain)?;
        let n = self.chain.n();
        let mut law = vec![F::zero(); n];
        let wf = self.weighted(domain);
        for (g, &w) in wf.family.iter().zip(&wf.weights) {
            law[g.leads_to(s).expect("validated")] += w;
        }
        for p in law.iter_mut() {
            *p = *p / denom;
        }
        Ok(ExitLaw {
            origin: s,
            domain,
            law: Distribution::from_weights(self.chain.space().clone(), law)?,
        })
    }

    /// Distribution of the state through which visits to `domain` begin.
    pub fn entry_distribution(&self, domain: StateSet) -> Result<Distribution<F>, FormulaError> {
        self.check_proper(domain)?;
        let mu = self.stationary()?;
        entry_distribution_given(&mu, self.chain, domain)
    }

    /// Long-run mean number of stages per visit to `domain`.
    pub fn visit_length(&self, domain: StateSet) -> Result<F, FormulaError> {
        self.check_proper(domain)?;
        let mu = self.stationary()?;
        visit_length_given(&mu, self.chain, domain)
    }

    /// Entry law and mean visit length together.
    pub fn visit_stats(&self, domain: StateSet) -> Result<VisitStats<F>, FormulaError> {
        let entry = self.entry_distribution(domain)?;
        let mean_length = self.visit_length(domain)?;
        Ok(VisitStats {
            domain,
            entry,
            mean_length,
        })
    }
}

/// Entry distribution evaluated against a supplied stationary vector:
/// entry mass at `s` is the stationary flow from outside into `s`,
/// normalized by the total flow into the subset.
pub fn entry_distribution_given<F: Scalar>(
    mu: &Distribution<F>,
    chain: &Chain<F>,
    domain: StateSet,
) -> Result<Distribution<F>, FormulaError> {
    let n = chain.n();
    let outside = domain.complement(n);
    let mut w = vec![F::zero(); n];
    for s in domain.iter() {
        w[s] = outside.iter().map(|t| mu.get(t) * chain.prob(t, s)).sum();
    }
    Ok(Distribution::from_weights(chain.space().clone(), w)?)
}

/// Mean visit length evaluated against a supplied stationary vector:
/// stationary mass of the subset over the stationary exit flow. Infinite
/// when the flow out of the subset vanishes (possible only for reducible
/// matrices whose recurrent class never leaves the subset).
pub fn visit_length_given<F: Scalar>(
    mu: &Distribution<F>,
    chain: &Chain<F>,
    domain: StateSet,
) -> Result<F, FormulaError> {
    let outside = domain.complement(chain.n());
    let mass = mu.mass(domain);
    let outflow: F = domain
        .iter()
        .map(|s| mu.get(s) * chain.mass_into(s, outside))
        .sum();
    Ok(mass / outflow)
}

/// Stationary distribution via the graph formula, at the default cap.
pub fn stationary_fw<F: Scalar>(c: &Chain<F>) -> Result<Distribution<F>, FormulaError> {
    FwSolver::new(c)?.stationary()
}

/// Expected exit time via the graph formula, at the default cap.
pub fn exit_time_fw<F: Scalar>(
    c: &Chain<F>,
    domain: StateSet,
    s: usize,
) -> Result<F, FormulaError> {
    FwSolver::new(c)?.exit_time(domain, s)
}

/// Exit law via the graph formula, at the default cap.
pub fn exit_distribution_fw<F: Scalar>(
    c: &Chain<F>,
    domain: StateSet,
    s: usize,
) -> Result<ExitLaw<F>, FormulaError> {
    FwSolver::new(c)?.exit_distribution(domain, s)
}

/// Entry distribution of a subset, at the default cap.
pub fn entry_distribution<F: Scalar>(
    c: &Chain<F>,
    domain: StateSet,
) -> Result<Distribution<F>, FormulaError> {
    FwSolver::new(c)?.entry_distribution(domain)
}

/// Mean visit length of a subset, at the default cap.
pub fn visit_length<F: Scalar>(c: &Chain<F>, domain: StateSet) -> Result<F, FormulaError> {
    FwSolver::new(c)?.visit_length(domain)
}

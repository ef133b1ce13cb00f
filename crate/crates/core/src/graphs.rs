//! C-graphs: acyclic functional digraphs with exactly one outgoing edge per
//! state of a subset C and none elsewhere. Their weights under a transition
//! matrix drive every ratio formula in [`crate::formulas`].

use std::fmt;

use thiserror::Error;

use crate::chain::Chain;
use crate::scalar::Scalar;
use crate::subset::StateSet;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("domain must be a nonempty subset of the state space")]
    EmptyDomain,
    #[error("domain must be a proper subset of the state space")]
    FullDomain,
    #[error("state {0} is outside the graph domain")]
    OutsideDomain(usize),
    #[error("state {0} must belong to the domain and target {1} must not")]
    BadEndpoints(usize, usize),
    #[error("edge {0} -> {1} is a self loop")]
    SelfLoop(usize, usize),
    #[error("edge list does not give exactly one edge per domain state")]
    NotFunctional,
    #[error("successor map has a cycle through state {0}")]
    Cyclic(usize),
    #[error("domains are not disjoint")]
    NotDisjoint,
    #[error("eta must lie in (0, 1]")]
    BadEta,
}

/// A C-graph: one edge `s -> g(s)` per state `s` of the domain, no self
/// loops, and no cycle inside the domain, so every path leaves the domain
/// within `|C|` steps. The empty domain gives the empty graph (weight one).
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct CGraph {
    domain: StateSet,
    /// Edges sorted by source; sources are exactly the domain states.
    edges: Vec<(usize, usize)>,
}

impl CGraph {
    /// The empty graph (used as the restriction of any graph to the empty
    /// set; its weight is the empty product).
    pub fn empty() -> Self {
        CGraph {
            domain: StateSet::EMPTY,
            edges: Vec::new(),
        }
    }

    /// Validate an edge list into a C-graph.
    pub fn new(domain: StateSet, mut edges: Vec<(usize, usize)>) -> Result<Self, GraphError> {
        edges.sort_unstable();
        if edges.len() != domain.len() {
            return Err(GraphError::NotFunctional);
        }
        for (i, &(s, t)) in edges.iter().enumerate() {
            if !domain.contains(s) {
                return Err(GraphError::OutsideDomain(s));
            }
            if s == t {
                return Err(GraphError::SelfLoop(s, t));
            }
            if i > 0 && edges[i - 1].0 == s {
                return Err(GraphError::NotFunctional);
            }
        }
        let g = CGraph { domain, edges };
        for s in domain.iter() {
            if g.path_endpoint(s).is_none() {
                return Err(GraphError::Cyclic(s));
            }
        }
        Ok(g)
    }

    pub fn domain(&self) -> StateSet {
        self.domain
    }

    /// Edges `(s, g(s))` sorted by source.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// The successor `g(s)`.
    pub fn succ(&self, s: usize) -> Result<usize, GraphError> {
        self.edges
            .iter()
            .find(|&&(src, _)| src == s)
            .map(|&(_, t)| t)
            .ok_or(GraphError::OutsideDomain(s))
    }

    /// Follow successors from `s`; `None` if a cycle is hit (only possible
    /// on unvalidated edge data).
    fn path_endpoint(&self, s: usize) -> Option<usize> {
        let mut cur = s;
        for _ in 0..=self.domain.len() {
            if !self.domain.contains(cur) {
                return Some(cur);
            }
            cur = self.succ(cur).ok()?;
        }
        None
    }

    /// The unique endpoint outside the domain of the path starting at `s`.
    pub fn leads_to(&self, s: usize) -> Result<usize, GraphError> {
        if !self.domain.contains(s) {
            return Err(GraphError::OutsideDomain(s));
        }
        // Acyclicity is a construction invariant, so the walk terminates.
        Ok(self.path_endpoint(s).expect("validated graph is acyclic"))
    }

    /// True iff every path ends outside `set` (not merely outside the
    /// domain).
    pub fn all_paths_leave(&self, set: StateSet) -> bool {
        self.domain
            .iter()
            .all(|s| !set.contains(self.leads_to(s).expect("validated")))
    }

    /// The restriction to `sub`: keep exactly the edges starting in `sub`.
    pub fn restrict(&self, sub: StateSet) -> Result<CGraph, GraphError> {
        if !sub.is_subset_of(self.domain) {
            return Err(GraphError::OutsideDomain(
                sub.minus(self.domain).iter().next().unwrap_or(usize::MAX),
            ));
        }
        let edges = self
            .edges
            .iter()
            .copied()
            .filter(|&(s, _)| sub.contains(s))
            .collect();
        // A sub-map of an acyclic map is acyclic; revalidation is cheap and
        // keeps a single constructor.
        CGraph::new(sub, edges)
    }

    /// Union of two graphs on disjoint domains. Fails if the combined map
    /// has a cycle, i.e. if the union is not a C-graph.
    pub fn union(&self, other: &CGraph) -> Result<CGraph, GraphError> {
        if !self.domain.is_disjoint(other.domain) {
            return Err(GraphError::NotDisjoint);
        }
        let mut edges = self.edges.clone();
        edges.extend_from_slice(&other.edges);
        CGraph::new(self.domain.union(other.domain), edges)
    }

    /// Product of transition probabilities along the edges.
    pub fn weight<F: Scalar>(&self, chain: &Chain<F>) -> F {
        self.edges
            .iter()
            .fold(F::one(), |acc, &(s, t)| acc * chain.prob(s, t))
    }

    /// Sum of log probabilities; `-inf` on a zero edge. Only needed when
    /// weights underflow the scalar type, which direct products at desk
    /// scale do not.
    pub fn log_weight<F: Scalar>(&self, chain: &Chain<F>) -> F {
        self.edges
            .iter()
            .fold(F::zero(), |acc, &(s, t)| acc + chain.prob(s, t).ln())
    }

    /// Successor targets aligned with ascending domain states; the family
    /// ordering key.
    fn target_key(&self) -> Vec<usize> {
        self.edges.iter().map(|&(_, t)| t).collect()
    }
}

impl fmt::Display for CGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .edges
            .iter()
            .map(|(s, t)| format!("{s}->{t}"))
            .collect();
        write!(f, "{}", parts.join(", "))
    }
}

/// A set of C-graphs over one domain, canonically ordered (lexicographic in
/// the successor arrays) so families compare deterministically.
#[derive(Clone, PartialEq, Debug)]
pub struct GraphFamily {
    domain: StateSet,
    members: Vec<CGraph>,
}

impl GraphFamily {
    pub fn domain(&self) -> StateSet {
        self.domain
    }

    pub fn members(&self) -> &[CGraph] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &CGraph> {
        self.members.iter()
    }

    /// Sum of member weights under a chain.
    pub fn total_weight<F: Scalar>(&self, chain: &Chain<F>) -> F {
        self.members.iter().map(|g| g.weight(chain)).sum()
    }

    fn from_sorted(domain: StateSet, members: Vec<CGraph>) -> Self {
        debug_assert!(members.windows(2).all(|w| w[0].target_key() < w[1].target_key()));
        GraphFamily { domain, members }
    }
}

/// Enumerate `G(C)`: all successor maps `s -> S \ {s}` on `C` whose
/// functional digraph has no cycle inside `C`. The odometer iterates targets
/// in ascending order, so the family comes out canonically ordered.
pub fn enumerate_graphs(n: usize, domain: StateSet) -> Result<GraphFamily, GraphError> {
    if domain.is_empty() {
        return Err(GraphError::EmptyDomain);
    }
    if domain == StateSet::full(n) {
        return Err(GraphError::FullDomain);
    }
    Ok(enumerate_graphs_allow_empty(n, domain))
}

/// Enumeration that admits the empty domain (whose only graph is the empty
/// graph); the ratio formulas need `G(C \ {s})` even when `C = {s}`.
pub(crate) fn enumerate_graphs_allow_empty(n: usize, domain: StateSet) -> GraphFamily {
    let sources = domain.indices();
    if sources.is_empty() {
        return GraphFamily::from_sorted(domain, vec![CGraph::empty()]);
    }
    let candidates: Vec<Vec<usize>> = sources
        .iter()
        .map(|&s| (0..n).filter(|&t| t != s).collect())
        .collect();
    let k = sources.len();
    let mut picks = vec![0usize; k];
    let mut members = Vec::new();
    'outer: loop {
        let targets: Vec<usize> = (0..k).map(|i| candidates[i][picks[i]]).collect();
        if acyclic(&sources, &targets, domain) {
            let edges = sources.iter().copied().zip(targets).collect();
            members.push(CGraph { domain, edges });
        }
        // Odometer increment, most significant digit first so target keys
        // come out in ascending lexicographic order.
        let mut i = k;
        loop {
            if i == 0 {
                break 'outer;
            }
            i -= 1;
            picks[i] += 1;
            if picks[i] < candidates[i].len() {
                break;
            }
            picks[i] = 0;
        }
    }
    GraphFamily::from_sorted(domain, members)
}

/// Cycle check for a successor map given as parallel source/target arrays.
fn acyclic(sources: &[usize], targets: &[usize], domain: StateSet) -> bool {
    let succ = |s: usize| -> usize {
        let i = sources.iter().position(|&x| x == s).expect("in domain");
        targets[i]
    };
    for &start in sources {
        let mut cur = start;
        let mut steps = 0;
        while domain.contains(cur) {
            cur = succ(cur);
            steps += 1;
            if steps > sources.len() {
                return false;
            }
        }
    }
    true
}

/// `G_{s,t}(C)`: the members of `G(C)` along which `s` leads to `t`.
pub fn graphs_leading(
    n: usize,
    domain: StateSet,
    s: usize,
    t: usize,
) -> Result<GraphFamily, GraphError> {
    if !domain.contains(s) || domain.contains(t) || t >= n {
        return Err(GraphError::BadEndpoints(s, t));
    }
    let all = enumerate_graphs(n, domain)?;
    let members = all
        .members
        .into_iter()
        .filter(|g| g.leads_to(s).expect("validated") == t)
        .collect();
    Ok(GraphFamily::from_sorted(domain, members))
}

/// `G^eta(C)`: the members whose weight is at least `eta` times the maximum
/// weight over the family. Nonempty for every `eta <= 1`. Comparisons carry
/// a relative guard of a few ulps so weights that are equal algebraically
/// but computed in different orders still tie.
pub fn eta_maximal_set<F: Scalar>(
    chain: &Chain<F>,
    domain: StateSet,
    eta: F,
) -> Result<GraphFamily, GraphError> {
    if !(eta > F::zero()) || eta > F::one() {
        return Err(GraphError::BadEta);
    }
    let family = enumerate_graphs(chain.n(), domain)?;
    Ok(eta_maximal_of(&family, chain, eta))
}

/// η-maximal filter over an already enumerated family.
pub fn eta_maximal_of<F: Scalar>(
    family: &GraphFamily,
    chain: &Chain<F>,
    eta: F,
) -> GraphFamily {
    let weights: Vec<F> = family.iter().map(|g| g.weight(chain)).collect();
    let max = weights
        .iter()
        .copied()
        .fold(F::zero(), |a, b| if b > a { b } else { a });
    let threshold = eta * max * (F::one() - F::weight_tie_guard());
    let members = family
        .iter()
        .zip(&weights)
        .filter(|&(_, &w)| w >= threshold)
        .map(|(g, _)| g.clone())
        .collect();
    GraphFamily::from_sorted(family.domain, members)
}

//! Small benchmark chains used by the test suites and the `example`
//! subcommand.

use crate::chain::{Chain, StateSpace};
use crate::scalar::Scalar;

/// Three-state chain where state 3 is visited rarely: from state 1 the walk
/// goes to 2 with probability `1 - delta` and to 3 with probability `delta`;
/// states 2 and 3 both return to 1. Every other stage is spent in state 1,
/// so the stationary vector is `(1/2, (1-delta)/2, delta/2)`.
pub fn rare_state_chain<F: Scalar>(delta: f64) -> Chain<F> {
    assert!(delta > 0.0 && delta < 0.5, "delta must lie in (0, 1/2)");
    let d = F::cast(delta);
    let space = StateSpace::new(["1", "2", "3"]).unwrap();
    Chain::new(
        space,
        vec![
            vec![F::zero(), F::one() - d, d],
            vec![F::one(), F::zero(), F::zero()],
            vec![F::one(), F::zero(), F::zero()],
        ],
    )
    .unwrap()
}

/// Perturbation of [`rare_state_chain`] that only rewires the rare state:
/// state 3 now returns to 1 with probability `1 - eta` and jumps to 2 with
/// probability `eta`. A relatively large change confined to a rarely
/// visited state.
pub fn rare_state_perturbed<F: Scalar>(delta: f64, eta: f64) -> Chain<F> {
    assert!(delta > 0.0 && delta < 0.5, "delta must lie in (0, 1/2)");
    assert!(eta > 0.0 && eta < 1.0, "eta must lie in (0, 1)");
    let d = F::cast(delta);
    let e = F::cast(eta);
    let space = StateSpace::new(["1", "2", "3"]).unwrap();
    Chain::new(
        space,
        vec![
            vec![F::zero(), F::one() - d, d],
            vec![F::one(), F::zero(), F::zero()],
            vec![F::one() - e, e, F::zero()],
        ],
    )
    .unwrap()
}

/// Two tightly coupled states `a, b` plus a sticky third state `c`: from
/// `a` (resp. `b`) the walk leaves the pair toward `c` with probability
/// `eta` and otherwise crosses to the other pair state; `c` holds with
/// probability `1 - lambda` and otherwise re-enters the pair uniformly.
/// With `eta = 0` the pair becomes a closed class.
pub fn split_cluster_chain<F: Scalar>(eta: f64, lambda: f64) -> Chain<F> {
    assert!((0.0..1.0).contains(&eta), "eta must lie in [0, 1)");
    assert!(lambda > 0.0 && lambda < 1.0, "lambda must lie in (0, 1)");
    let e = F::cast(eta);
    let l = F::cast(lambda);
    let half = F::cast(0.5);
    let space = StateSpace::new(["a", "b", "c"]).unwrap();
    Chain::new(
        space,
        vec![
            vec![F::zero(), F::one() - e, e],
            vec![F::one() - e, F::zero(), e],
            vec![half * l, half * l, F::one() - l],
        ],
    )
    .unwrap()
}

/// Deterministic two-state cycle.
pub fn two_cycle<F: Scalar>() -> Chain<F> {
    let space = StateSpace::new(["1", "2"]).unwrap();
    Chain::new(
        space,
        vec![vec![F::zero(), F::one()], vec![F::one(), F::zero()]],
    )
    .unwrap()
}

/// Four-state chain with a strong 1<->2 coupling and weak exits, where a
/// half-maximal single-state graph fails to stay maximal after merging
/// domains.
pub fn coupled_pair_chain<F: Scalar>() -> Chain<F> {
    let third = F::one() / F::cast(3.0);
    let two_thirds = F::one() - third;
    let quarter = F::cast(0.25);
    let space = StateSpace::new(["1", "2", "3", "4"]).unwrap();
    Chain::new(
        space,
        vec![
            vec![F::zero(), two_thirds, third, F::zero()],
            vec![two_thirds, F::zero(), F::zero(), third],
            vec![quarter, quarter, quarter, quarter],
            vec![quarter, quarter, quarter, quarter],
        ],
    )
    .unwrap()
}

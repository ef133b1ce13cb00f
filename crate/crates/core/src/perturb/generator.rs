//! Seeded random chains and admissible perturbation pairs.
//!
//! The pair constructions mirror what the theorems admit: frequent
//! transitions move multiplicatively within the relative budget, while
//! transitions whose stationary-weighted mass stays under the trigger
//! threshold may move arbitrarily (including on and off zero). Rows are
//! renormalized and the closeness verdict re-checked, since normalization
//! shifts every ratio; candidates are retried with shrinking amplitudes
//! until the verdict holds.

use rand::Rng;

use crate::chain::{Chain, StateSpace};
use crate::oracles;
use crate::perturb::{
    self, is_close, is_close_on, mixing_parameter, theorem1_gate, theorem2_gate, ClosenessParams,
};
use crate::scalar::Scalar;
use crate::subset::StateSet;

/// A base chain, a perturbation of it, and the closeness level the pair
/// was built for (gate-admissible by construction).
#[derive(Clone, Debug)]
pub struct AdmissiblePair<F> {
    pub q: Chain<F>,
    pub qhat: Chain<F>,
    pub epsilon: F,
    pub beta: F,
}

/// As [`AdmissiblePair`], for the subset-mode theorems: the perturbation
/// is confined to `s1` and the gate uses the computed mixing level `a`.
#[derive(Clone, Debug)]
pub struct SubsetPair<F> {
    pub q: Chain<F>,
    pub qhat: Chain<F>,
    pub s1: StateSet,
    pub epsilon: F,
    pub beta: F,
    pub a: F,
}

fn default_labels(n: usize) -> StateSpace {
    StateSpace::new((1..=n).map(|i| i.to_string())).expect("n >= 2")
}

/// Random irreducible chain on `n` states. `zero_fraction` of the entries
/// are knocked out (rows keep at least one positive entry); candidates are
/// redrawn until the positive-entry digraph is strongly connected.
pub fn random_irreducible_chain<F: Scalar, R: Rng>(
    rng: &mut R,
    n: usize,
    zero_fraction: f64,
) -> Chain<F> {
    let space = default_labels(n);
    loop {
        let mut rows = Vec::with_capacity(n);
        for _ in 0..n {
            let mut row: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
            for x in row.iter_mut() {
                if rng.gen_bool(zero_fraction) {
                    *x = 0.0;
                }
            }
            if row.iter().all(|&x| x == 0.0) {
                row[rng.gen_range(0..n)] = 1.0;
            }
            let sum: f64 = row.iter().sum();
            rows.push(row.into_iter().map(|x| F::cast(x / sum)).collect());
        }
        let c = Chain::new(space.clone(), rows).expect("normalized rows");
        if c.is_irreducible() {
            return c;
        }
    }
}

/// Log-uniform draw in `[lo, hi]`.
fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

/// Random pair admissible for the global theorem: `beta` below its cap,
/// `epsilon` below its cap, and a perturbation that passes the closeness
/// verdict after renormalization.
pub fn random_admissible_pair<F: Scalar, R: Rng>(rng: &mut R, n: usize) -> AdmissiblePair<F> {
    let zero_fraction = if rng.gen_bool(0.5) { 0.0 } else { 0.15 };
    let q = random_irreducible_chain::<F, R>(rng, n, zero_fraction);
    let l = perturb::l_const(n).expect("desk scale") as f64;
    let beta_cap = 0.5f64.powi(n as i32);
    let beta = log_uniform(rng, 1e-5, 0.9 * beta_cap);
    let eps_cap = beta * (1.0 - beta) / (l * (n as f64).powi(4));
    let epsilon = rng.gen_range(0.05..0.9) * eps_cap;

    let params = ClosenessParams::new(F::cast(epsilon), F::cast(beta)).expect("positive");
    debug_assert!(theorem1_gate(params.beta, params.epsilon, n).unwrap());

    let mu = oracles::stationary_solve(&q).expect("irreducible");
    let threshold = epsilon * perturb::zeta(&q, &mu).expect("desk scale").value.to_f64_lossy();

    let mut amplitude = beta / 3.0;
    let mut rewire_chance = 0.5;
    loop {
        let qhat = perturb_rows(
            rng,
            &q,
            |s| mu.get(s).to_f64_lossy(),
            threshold,
            amplitude,
            rewire_chance,
            q.space().full_set(),
        );
        if is_close(&q, &qhat, &params).expect("same space").close {
            return AdmissiblePair {
                q,
                qhat,
                epsilon: params.epsilon,
                beta: params.beta,
            };
        }
        amplitude *= 0.5;
        rewire_chance *= 0.5;
    }
}

/// Build a candidate perturbation: inside `region`, frequent entries move
/// by a factor `1 + u` with `|u| <= amplitude`, infrequent entries are
/// rewired (zeroed, kept, or set to a sub-threshold mass) with probability
/// `rewire_chance`; rows outside `region` are copied verbatim.
fn perturb_rows<F: Scalar, R: Rng>(
    rng: &mut R,
    q: &Chain<F>,
    mu_of: impl Fn(usize) -> f64,
    threshold: f64,
    amplitude: f64,
    rewire_chance: f64,
    region: StateSet,
) -> Chain<F> {
    let n = q.n();
    let mut rows: Vec<Vec<F>> = Vec::with_capacity(n);
    for s in 0..n {
        if !region.contains(s) {
            rows.push(q.row(s).to_vec());
            continue;
        }
        let mus = mu_of(s);
        let mut row: Vec<f64> = (0..n).map(|t| q.prob(s, t).to_f64_lossy()).collect();
        for (t, x) in row.iter_mut().enumerate() {
            let frequent = mus * *x >= threshold;
            if frequent {
                *x *= 1.0 + rng.gen_range(-amplitude..amplitude);
            } else if rng.gen_bool(rewire_chance) {
                // Arbitrary sub-threshold mass, sometimes an outright zero,
                // sometimes a brand-new transition.
                let cap = if mus > 0.0 {
                    (0.5 * threshold / mus).min(1.0)
                } else {
                    0.0
                };
                *x = if rng.gen_bool(0.4) {
                    0.0
                } else {
                    rng.gen_range(0.0..=cap)
                };
                let _ = t;
            }
        }
        let sum: f64 = row.iter().sum();
        if sum == 0.0 {
            rows.push(q.row(s).to_vec());
            continue;
        }
        rows.push(row.into_iter().map(|x| F::cast(x / sum)).collect());
    }
    // Bit-preserving: rows outside the region must coincide with the base
    // chain exactly, so the public renormalizing constructor is bypassed.
    Chain::from_validated(q.space().clone(), rows)
}

/// Random two-block chain: dense mixing inside each block, total
/// cross-block mass per row at most `1e-3`.
pub fn random_two_block_chain<F: Scalar, R: Rng>(
    rng: &mut R,
    n1: usize,
    n2: usize,
) -> (Chain<F>, StateSet) {
    assert!(n1 >= 2 && n2 >= 2, "each block needs at least two states");
    let n = n1 + n2;
    let space = default_labels(n);
    let s1 = StateSet::from_indices(0..n1);
    let mut rows = Vec::with_capacity(n);
    for s in 0..n {
        let own = if s1.contains(s) { s1 } else { s1.complement(n) };
        let cross_mass = rng.gen_range(1e-4..1e-3);
        let mut row = vec![0.0f64; n];
        let mut own_total = 0.0;
        for t in own.iter() {
            let w = rng.gen_range(0.2..1.0);
            row[t] = w;
            own_total += w;
        }
        for t in own.iter() {
            row[t] *= (1.0 - cross_mass) / own_total;
        }
        let other = own.complement(n);
        let mut cross_total = 0.0;
        for t in other.iter() {
            let w = rng.gen_range(0.2..1.0);
            row[t] = w;
            cross_total += w;
        }
        for t in other.iter() {
            row[t] *= cross_mass / cross_total;
        }
        rows.push(row.into_iter().map(F::cast).collect());
    }
    (
        Chain::new(space, rows).expect("normalized rows"),
        s1,
    )
}

/// Random pair admissible for the subset-mode theorem: a two-block chain,
/// the perturbation confined to the first block, the gate evaluated at the
/// block's computed mixing level.
pub fn random_two_block_pair<F: Scalar, R: Rng>(
    rng: &mut R,
    n1: usize,
    n2: usize,
) -> SubsetPair<F> {
    let (q, s1) = random_two_block_chain::<F, R>(rng, n1, n2);
    let n = q.n();
    let a = mixing_parameter(&q, s1).expect("irreducible two-block chain");
    let a64 = a.to_f64_lossy();
    let l = perturb::l_const(n).expect("desk scale") as f64;
    let beta_cap = 0.5f64.powi(n as i32);
    let beta = log_uniform(rng, 1e-5, 0.9 * beta_cap);
    let eps_cap = 0.5 * (a64 / l).powi(n as i32) * beta * (1.0 - beta) / (l * (n as f64).powi(4));
    let epsilon = rng.gen_range(0.05..0.9) * eps_cap;

    let params = ClosenessParams::new(F::cast(epsilon), F::cast(beta))
        .expect("positive")
        .on_subset(s1)
        .expect("block size >= 2");
    debug_assert!(theorem2_gate(params.beta, params.epsilon, a, n).unwrap());

    let mu = oracles::stationary_solve(&q).expect("irreducible");
    let threshold = epsilon
        * perturb::zeta_restricted(&q, &mu, s1)
            .expect("block size >= 2")
            .value
            .to_f64_lossy();

    let mut amplitude = beta / 3.0;
    loop {
        // At gate-admissible epsilon the trigger threshold is microscopic,
        // so every positive entry is frequent: rewiring is off and the
        // perturbation is purely multiplicative inside the block.
        let qhat = perturb_rows(
            rng,
            &q,
            |s| mu.get(s).to_f64_lossy(),
            threshold,
            amplitude,
            0.0,
            s1,
        );
        let report = is_close_on(&q, &qhat, &params).expect("same space");
        if report.close && report.coincides_outside == Some(true) {
            return SubsetPair {
                q,
                qhat,
                s1,
                epsilon: params.epsilon,
                beta: params.beta,
                a,
            };
        }
        amplitude *= 0.5;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_chains_are_irreducible_and_stochastic() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 2..=6 {
            let c: Chain<f64> = random_irreducible_chain(&mut rng, n, 0.2);
            assert!(c.is_irreducible());
            for s in 0..n {
                let sum: f64 = c.row(s).iter().sum();
                assert_eq!(sum, 1.0);
            }
        }
    }

    #[test]
    fn admissible_pairs_pass_gate_and_verdict() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let n = rng.gen_range(2..=4);
            let pair: AdmissiblePair<f64> = random_admissible_pair(&mut rng, n);
            assert!(theorem1_gate(pair.beta, pair.epsilon, n).unwrap());
            let params = ClosenessParams::new(pair.epsilon, pair.beta).unwrap();
            assert!(is_close(&pair.q, &pair.qhat, &params).unwrap().close);
        }
    }

    #[test]
    fn two_block_pairs_pass_gate_verdict_and_coincidence() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let pair: SubsetPair<f64> = random_two_block_pair(&mut rng, 2, 2);
            assert!(theorem2_gate(pair.beta, pair.epsilon, pair.a, pair.q.n()).unwrap());
            let params = ClosenessParams::new(pair.epsilon, pair.beta)
                .unwrap()
                .on_subset(pair.s1)
                .unwrap();
            let report = is_close_on(&pair.q, &pair.qhat, &params).unwrap();
            assert!(report.close);
            assert_eq!(report.coincides_outside, Some(true));
        }
    }

    #[test]
    fn cross_block_mass_stays_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (q, s1) = random_two_block_chain::<f64, _>(&mut rng, 3, 2);
        for s in q.space().full_set().iter() {
            let own = if s1.contains(s) { s1 } else { s1.complement(q.n()) };
            let cross = q.mass_into(s, own.complement(q.n()));
            assert!(cross <= 1e-3 + 1e-12, "cross mass {cross}");
        }
    }
}

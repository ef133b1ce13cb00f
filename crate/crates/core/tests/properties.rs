//! Randomized invariants of the graph machinery, the ratio formulas and
//! the closeness relation.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use chainsense::chain::{Chain, StateSpace};
use chainsense::graphs::{self, CGraph};
use chainsense::oracles;
use chainsense::perturb::{self, generator, ClosenessParams};
use chainsense::subset::StateSet;
use chainsense::{formulas, Chain64};

fn set_from_mask(mask: u32) -> StateSet {
    StateSet::from_indices((0..32).filter(|&i| mask & (1 << i) != 0))
}

/// Dense random chain: strictly positive rows, hence irreducible.
fn dense_chain(max_n: usize) -> impl Strategy<Value = Chain64> {
    (2..=max_n).prop_flat_map(|n| {
        proptest::collection::vec(proptest::collection::vec(0.05f64..1.0, n), n).prop_map(
            move |raw| {
                let space = StateSpace::new((1..=n).map(|i| i.to_string())).unwrap();
                let rows = raw
                    .into_iter()
                    .map(|row| {
                        let sum: f64 = row.iter().sum();
                        row.into_iter().map(|x| x / sum).collect()
                    })
                    .collect();
                Chain::new(space, rows).unwrap()
            },
        )
    })
}

/// Random chain with zero entries, filtered to irreducible.
fn sparse_chain(max_n: usize) -> impl Strategy<Value = Chain64> {
    dense_chain(max_n)
        .prop_flat_map(|c| {
            let n = c.n();
            (
                Just(c),
                proptest::collection::vec(proptest::collection::vec(0.0f64..1.0, n), n),
            )
        })
        .prop_filter_map("need irreducible", |(c, mask)| {
            let n = c.n();
            let mut rows = Vec::with_capacity(n);
            for s in 0..n {
                let mut row: Vec<f64> = (0..n).map(|t| c.prob(s, t)).collect();
                for t in 0..n {
                    if mask[s][t] < 0.35 {
                        row[t] = 0.0;
                    }
                }
                let sum: f64 = row.iter().sum();
                if sum == 0.0 {
                    return None;
                }
                rows.push(row.into_iter().map(|x| x / sum).collect());
            }
            let c2 = Chain::new(c.space().clone(), rows).unwrap();
            c2.is_irreducible().then_some(c2)
        })
}

/// A chain plus a proper nonempty subset of its states.
fn chain_and_subset(max_n: usize) -> impl Strategy<Value = (Chain64, StateSet)> {
    sparse_chain(max_n).prop_flat_map(|c| {
        let n = c.n();
        (Just(c), 1u32..(1 << n) - 1).prop_map(|(c, mask)| (c, set_from_mask(mask)))
    })
}

/// A chain plus two disjoint subsets whose union is proper.
fn chain_and_disjoint_pair(max_n: usize) -> impl Strategy<Value = (Chain64, StateSet, StateSet)> {
    dense_chain(max_n)
        .prop_flat_map(|c| {
            let n = c.n() as u32;
            (Just(c), 1u32..(1 << n) - 1, 1u32..(1 << n) - 1)
        })
        .prop_filter_map("need disjoint nonempty with proper union", |(c, m1, m2)| {
            let (c1, c2) = (set_from_mask(m1), set_from_mask(m2));
            let union = c1.union(c2);
            (c1.is_disjoint(c2)
                && !c1.is_empty()
                && !c2.is_empty()
                && union != c.space().full_set())
            .then_some((c, c1, c2))
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    // Restricting a union of two graphs on disjoint domains recovers the
    // parts, and weights multiply.
    #[test]
    fn union_weight_is_product_of_parts((c, c1, c2) in chain_and_disjoint_pair(5)) {
        let f1 = graphs::enumerate_graphs(c.n(), c1).unwrap();
        let f2 = graphs::enumerate_graphs(c.n(), c2).unwrap();
        for g1 in f1.iter().take(8) {
            for g2 in f2.iter().take(8) {
                if let Ok(u) = g1.union(g2) {
                    let direct = u.weight(&c);
                    let product = g1.weight(&c) * g2.weight(&c);
                    prop_assert!((direct - product).abs() <= 1e-12 * direct.max(product).max(1e-300));
                    prop_assert_eq!(&u.restrict(c1).unwrap(), g1);
                    prop_assert_eq!(&u.restrict(c2).unwrap(), g2);
                }
            }
        }
    }

    // If every path of a first graph already leaves the union of the two
    // domains, gluing any second graph on keeps it a valid graph.
    #[test]
    fn p0_union_of_escaping_graphs_is_valid((c, c1, c2) in chain_and_disjoint_pair(5)) {
        let union_set = c1.union(c2);
        let f1 = graphs::enumerate_graphs(c.n(), c1).unwrap();
        let f2 = graphs::enumerate_graphs(c.n(), c2).unwrap();
        for g1 in f1.iter().filter(|g| g.all_paths_leave(union_set)) {
            for g2 in f2.iter() {
                let u = g1.union(g2);
                prop_assert!(u.is_ok(), "union failed: {g1} + {g2}");
                prop_assert_eq!(u.unwrap().domain(), union_set);
            }
        }
    }

    // Maximality restricts: take a near-maximal graph on the union whose
    // second-part paths escape the union; its first part is near-maximal
    // on the first domain.
    #[test]
    fn p1_restriction_keeps_maximality(
        (c, c1, c2) in chain_and_disjoint_pair(5),
        eta_ix in 0usize..3,
    ) {
        let eta = [0.1, 0.5, 1.0][eta_ix];
        let union_set = c1.union(c2);
        let fam = graphs::eta_maximal_set(&c, union_set, eta).unwrap();
        let f1 = graphs::enumerate_graphs(c.n(), c1).unwrap();
        let max1 = f1.iter().map(|g| g.weight(&c)).fold(0.0f64, f64::max);
        for g in fam.iter() {
            let g2 = g.restrict(c2).unwrap();
            if g2.all_paths_leave(union_set) {
                let g1 = g.restrict(c1).unwrap();
                prop_assert!(
                    g1.weight(&c) >= eta * max1 * (1.0 - 1e-9),
                    "restriction lost maximality: w={} eta*max={}",
                    g1.weight(&c),
                    eta * max1
                );
            }
        }
    }

    // Products of near-maximal parts are near-maximal on the union when
    // the union is a graph at all.
    #[test]
    fn p2_union_keeps_product_maximality(
        (c, c1, c2) in chain_and_disjoint_pair(5),
        eta1_ix in 0usize..3,
        eta2_ix in 0usize..3,
    ) {
        let (eta1, eta2) = ([0.2, 0.6, 1.0][eta1_ix], [0.2, 0.6, 1.0][eta2_ix]);
        let f1 = graphs::eta_maximal_set(&c, c1, eta1).unwrap();
        let f2 = graphs::eta_maximal_set(&c, c2, eta2).unwrap();
        let union_set = c1.union(c2);
        let max_u = graphs::enumerate_graphs(c.n(), union_set)
            .unwrap()
            .iter()
            .map(|g| g.weight(&c))
            .fold(0.0f64, f64::max);
        for g1 in f1.iter().take(6) {
            for g2 in f2.iter().take(6) {
                if let Ok(u) = g1.union(g2) {
                    prop_assert!(
                        u.weight(&c) >= eta1 * eta2 * max_u * (1.0 - 1e-9),
                        "union below eta1*eta2 level"
                    );
                }
            }
        }
    }

    // Dropping sub-maximal graphs from a family changes its total weight
    // by less than eta * L, relatively.
    #[test]
    fn near_maximal_subfamily_carries_the_weight(
        (c, domain) in chain_and_subset(5),
        eta_ix in 0usize..3,
    ) {
        let eta = [0.1, 0.5, 1.0][eta_ix];
        let full = graphs::enumerate_graphs(c.n(), domain).unwrap();
        let kept = graphs::eta_maximal_of(&full, &c, eta);
        let total: f64 = full.total_weight(&c);
        let kept_total: f64 = kept.total_weight(&c);
        prop_assert!(kept_total > 0.0);
        let ratio = total / kept_total - 1.0;
        let l = perturb::l_const(c.n()).unwrap() as f64;
        prop_assert!(ratio >= -1e-12);
        prop_assert!(ratio < eta * l + 1e-9, "ratio {ratio} vs eta*L {}", eta * l);
    }

    // Every path ends somewhere outside: the leading families partition
    // the full family.
    #[test]
    fn leading_families_partition((c, domain) in chain_and_subset(5)) {
        prop_assume!(!domain.is_empty() && domain != c.space().full_set());
        let full = graphs::enumerate_graphs(c.n(), domain).unwrap();
        let s = domain.iter().next().unwrap();
        let total: usize = domain
            .complement(c.n())
            .iter()
            .map(|t| graphs::graphs_leading(c.n(), domain, s, t).unwrap().len())
            .sum();
        prop_assert_eq!(total, full.len());
    }

    // The two stationary routes agree, the stationary vector is strictly
    // positive, and it is fixed by the transition matrix.
    #[test]
    fn stationary_routes_agree(c in sparse_chain(5)) {
        let fw = formulas::stationary_fw(&c).unwrap();
        let solve = oracles::stationary_solve(&c).unwrap();
        for s in 0..c.n() {
            prop_assert!(fw.get(s) > 0.0);
            prop_assert!((fw.get(s) - solve.get(s)).abs() <= 1e-10 * solve.get(s));
            let image: f64 = (0..c.n()).map(|t| solve.get(t) * c.prob(t, s)).sum();
            prop_assert!((image - solve.get(s)).abs() <= 1e-10);
        }
    }

    // Exit laws from both routes sum to one and agree.
    #[test]
    fn exit_laws_agree((c, domain) in chain_and_subset(5)) {
        for s in domain.iter() {
            let fw = formulas::exit_distribution_fw(&c, domain, s).unwrap();
            let solve = oracles::exit_distribution_solve(&c, domain, s).unwrap();
            let sum: f64 = fw.law.as_slice().iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-12);
            prop_assert!(fw.sup_distance(&solve) <= 1e-10);
            let t_fw = formulas::exit_time_fw(&c, domain, s).unwrap();
            let t_solve = oracles::hitting_time_solve(&c, domain, s).unwrap();
            prop_assert!((t_fw - t_solve).abs() <= 1e-8 * t_solve.max(1.0));
        }
    }

    // Stationary flow out of a subset balances the flow into it, and the
    // entry law is a probability vector on the subset.
    #[test]
    fn stationary_flow_balances((c, domain) in chain_and_subset(5)) {
        let mu = oracles::stationary_solve(&c).unwrap();
        let outside = domain.complement(c.n());
        let outflow: f64 = domain.iter().map(|s| mu.get(s) * c.mass_into(s, outside)).sum();
        let inflow: f64 = outside.iter().map(|t| mu.get(t) * c.mass_into(t, domain)).sum();
        prop_assert!((outflow - inflow).abs() <= 1e-12);
        let nu = formulas::entry_distribution(&c, domain).unwrap();
        let mass: f64 = domain.iter().map(|s| nu.get(s)).sum();
        prop_assert!((mass - 1.0).abs() <= 1e-12);
        prop_assert!(outside.iter().all(|t| nu.get(t) == 0.0));
    }

    // The mean visit length equals the entry-weighted mean exit time
    // (renewal-reward identity), and is at least one.
    #[test]
    fn visit_length_matches_entry_weighted_exit_times((c, domain) in chain_and_subset(5)) {
        let k = formulas::visit_length(&c, domain).unwrap();
        prop_assert!(k >= 1.0 - 1e-12);
        let nu = formulas::entry_distribution(&c, domain).unwrap();
        let weighted: f64 = domain
            .iter()
            .map(|s| nu.get(s) * oracles::hitting_time_solve(&c, domain, s).unwrap())
            .sum();
        prop_assert!((k - weighted).abs() <= 1e-8 * k, "k={k} weighted={weighted}");
    }

    // Chain documents round-trip: labels bit for bit, entries to 1e-12
    // (the only slack is the final unit-sum snap, which can sit one ulp
    // off its fixpoint).
    #[test]
    fn chain_document_roundtrip(c in sparse_chain(6)) {
        let text = c.serialize();
        let back: Chain64 = Chain::parse(&text).unwrap();
        prop_assert_eq!(back.space().labels(), c.space().labels());
        for s in 0..c.n() {
            for t in 0..c.n() {
                prop_assert!((back.prob(s, t) - c.prob(s, t)).abs() <= 1e-12);
            }
        }
    }

    // Irreducibility is invariant under relabeling of states.
    #[test]
    fn irreducibility_survives_relabeling(c in sparse_chain(5), rot in 1usize..4) {
        let n = c.n();
        let perm: Vec<usize> = (0..n).map(|i| (i + rot) % n).collect();
        let space = StateSpace::new(perm.iter().map(|&i| c.space().label(i))).unwrap();
        let rows: Vec<Vec<f64>> = perm
            .iter()
            .map(|&s| perm.iter().map(|&t| c.prob(s, t)).collect())
            .collect();
        let relabeled = Chain::new(space, rows).unwrap();
        prop_assert_eq!(relabeled.is_irreducible(), c.is_irreducible());
    }

    // Growing either closeness parameter never flips a passing verdict.
    #[test]
    fn closeness_verdict_is_monotone(seed in 0u64..5000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 2 + (seed % 3) as usize;
        let pair: generator::AdmissiblePair<f64> = generator::random_admissible_pair(&mut rng, n);
        let base = ClosenessParams::new(pair.epsilon, pair.beta).unwrap();
        prop_assert!(perturb::is_close(&pair.q, &pair.qhat, &base).unwrap().close);
        for &(ke, kb) in &[(2.0, 1.0), (1.0, 2.0), (10.0, 5.0)] {
            let looser = ClosenessParams::new(pair.epsilon * ke, pair.beta * kb).unwrap();
            prop_assert!(
                perturb::is_close(&pair.q, &pair.qhat, &looser).unwrap().close,
                "loosening ({ke}, {kb}) flipped the verdict"
            );
        }
    }
}

// The minimized cut agrees with an independent pass that walks the cuts in
// the opposite order and scores them from the inflow side.
#[test]
fn zeta_agrees_with_reversed_inflow_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let n = 2 + rand::Rng::gen_range(&mut rng, 0..4);
        let c: Chain64 = generator::random_irreducible_chain(&mut rng, n, 0.2);
        let mu = oracles::stationary_solve(&c).unwrap();
        let z = perturb::zeta(&c, &mu).unwrap();
        let n = c.n();
        let mut best = f64::INFINITY;
        for mask in (1..(1u32 << n) - 1).rev() {
            let cut = set_from_mask(mask);
            let inflow: f64 = cut
                .complement(n)
                .iter()
                .map(|t| mu.get(t) * c.mass_into(t, cut))
                .sum();
            best = best.min(inflow);
        }
        assert!(
            (z.value - best).abs() <= 1e-10 * best.max(1e-300),
            "cut minimum mismatch: {} vs {}",
            z.value,
            best
        );
    }
}

// Total graph counts stay under the combinatorial constant.
#[test]
fn family_sizes_sum_under_graph_count_constant() {
    for n in 2..=6 {
        let total: u128 = StateSet::proper_nonempty(n)
            .map(|c| graphs::enumerate_graphs(n, c).unwrap().len() as u128)
            .sum();
        assert!(total <= perturb::l_const(n).unwrap());
    }
}

// Graph-weight totals equal the deleted determinant of I - q (the
// spanning-arborescence identity), checked against the LU route.
#[test]
fn family_totals_match_deleted_determinants() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..40 {
        let n = 2 + rand::Rng::gen_range(&mut rng, 0..5);
        let c: Chain64 = generator::random_irreducible_chain(&mut rng, n, 0.15);
        let a = oracles::fundamental_matrix(&c);
        for s in 0..n {
            let total = graphs::enumerate_graphs(n, c.space().full_set().without(s))
                .unwrap()
                .total_weight(&c);
            let det = a.deleted(s).factor().unwrap().determinant();
            assert!(
                (total - det).abs() <= 1e-10 * det.abs().max(1e-300),
                "n={n} s={s}: graphs {total} vs determinant {det}"
            );
        }
    }
}

// The escape premise of the restriction property genuinely matters: on
// the coupled-pair chain the graph 1 -> 2 -> 4 is maximal over {1, 2},
// yet its restriction to {2} is only half-maximal. The other part,
// 1 -> 2, ends inside the union, which is exactly the premise failing.
#[test]
fn maximality_does_not_restrict_without_escape() {
    let c = chainsense::fixtures::coupled_pair_chain::<f64>();
    let union_domain = StateSet::from_indices([0, 1]);
    let g = CGraph::new(union_domain, vec![(0, 1), (1, 3)]).unwrap();
    let max_union = graphs::enumerate_graphs(c.n(), union_domain)
        .unwrap()
        .iter()
        .map(|g| g.weight(&c))
        .fold(0.0f64, f64::max);
    assert!((g.weight(&c) - max_union).abs() <= 1e-15);

    let part_kept = g.restrict(StateSet::singleton(1)).unwrap();
    let half_max = graphs::eta_maximal_set(&c, StateSet::singleton(1), 0.5).unwrap();
    let full_max = graphs::eta_maximal_set(&c, StateSet::singleton(1), 1.0).unwrap();
    assert!(half_max.members().contains(&part_kept));
    assert!(!full_max.members().contains(&part_kept));

    let other_part = g.restrict(StateSet::singleton(0)).unwrap();
    assert!(!other_part.all_paths_leave(union_domain));
}

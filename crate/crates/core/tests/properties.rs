use proptest::prelude::*;

use treegibbs::constants::eta_dn;
use treegibbs::gibbs::{
    dlr_oracle_check, marginal_separation, sample_tree, FiniteSubtree, FiniteVolume, MarkovChainGibbs,
};
use treegibbs::gradient::{build_fuzzy_chain, increment_kernel};
use treegibbs::potentials::TransferOperator;
use treegibbs::seqspace::{GroupSpace, SeqFn};
use treegibbs::solver::{LocalizationProblem, Tolerances};
use treegibbs::verify::translation_defect;
use treegibbs::Error;

/// Symmetric table on the window of radius `values.len()` with `Q(0) = 1`.
fn symmetric_table(values: &[f64]) -> TransferOperator {
    let r = values.len();
    let space = GroupSpace::window(r).unwrap();
    let table = space
        .elements()
        .map(|e| if e == 0 { 1.0 } else { values[e.unsigned_abs() as usize - 1] })
        .collect();
    TransferOperator::custom(SeqFn::new(space, table).unwrap()).unwrap()
}

fn chain_for(q: &TransferOperator, d: u32, a: &[i64]) -> (treegibbs::solver::BoundaryLawSolution, MarkovChainGibbs) {
    let sol = LocalizationProblem::new(d, q.clone(), a, Tolerances::default()).unwrap().solve().unwrap();
    let chain = MarkovChainGibbs::from_boundary_law(&sol, q).unwrap();
    (sol, chain)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn cyclic_solutions_are_translation_covariant(
        modulus in 5usize..10,
        beta in 2.6f64..4.0,
        a in 0i64..10,
        pair in any::<bool>(),
        t in 1i64..10,
    ) {
        let space = GroupSpace::cyclic(modulus).unwrap();
        let q = TransferOperator::sos(beta, space).unwrap();
        let a0 = space.reduce(a);
        let set: Vec<i64> = if pair { vec![a0, space.reduce(a0 + 1)] } else { vec![a0] };
        let moved: Vec<i64> = set.iter().map(|&x| space.reduce(x + t)).collect();
        let tol = Tolerances::default();
        let x = LocalizationProblem::new(2, q.clone(), &set, tol).unwrap().solve().unwrap();
        let y = LocalizationProblem::new(2, q, &moved, tol).unwrap().solve().unwrap();
        prop_assert!(translation_defect(&x.xbar, &y.xbar, t) <= 1e-10);
    }

    #[test]
    fn finite_volume_matches_chain(values in prop::collection::vec(0.0f64..0.03, 3), a in -3i64..=3) {
        let q = symmetric_table(&values);
        let (sol, chain) = chain_for(&q, 2, &[a]);
        let n = chain.space().size();
        let star = FiniteVolume::new(&sol, &q, FiniteSubtree::star(2)).unwrap();
        let m = star.vertex_marginal(0);
        for (x, y) in m.values().iter().zip(chain.pi().values()) {
            prop_assert!((x - y).abs() < 1e-9);
        }
        let edge = FiniteVolume::new(&sol, &q, FiniteSubtree::edge(2)).unwrap();
        let joint = edge.pair_marginal(0, 1);
        for i in 0..n {
            for j in 0..n {
                let expected = chain.pi().values()[i] * chain.p(i, j);
                prop_assert!((joint[i * n + j] - expected).abs() < 1e-9);
                prop_assert!((joint[i * n + j] - joint[j * n + i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dlr_holds_for_random_custom_operators(values in prop::collection::vec(0.0f64..0.03, 4), a in -4i64..=4) {
        let q = symmetric_table(&values);
        let (_, chain) = chain_for(&q, 2, &[a]);
        let report = dlr_oracle_check(&chain, 1_000_000, 0).unwrap();
        prop_assert_eq!(report.configurations, 9usize.pow(3));
        prop_assert!(report.max_violation < 1e-8, "{}", report.max_violation);
    }

    #[test]
    fn two_class_fuzzy_threshold_is_equivalent(beta in 1.0f64..4.0, d in 2u32..4) {
        let base = TransferOperator::sos(beta, GroupSpace::window(60).unwrap()).unwrap();
        let eps = base.fuzzy_operator(2).unwrap().operator.deviation_norm(d).unwrap().epsilon;
        let eta = eta_dn(d, 1);
        prop_assume!((eps - eta).abs() > 1e-9);
        match build_fuzzy_chain(&base, 2, d, &[0], Tolerances::default()) {
            Ok(_) => prop_assert!(eps <= eta),
            Err(Error::ThresholdExceeded { .. }) => prop_assert!(eps > eta),
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }

    #[test]
    fn odd_class_kernel_is_geometric(beta in 2.5f64..6.0) {
        let base = TransferOperator::sos(beta, GroupSpace::window(60).unwrap()).unwrap();
        let fc = build_fuzzy_chain(&base, 2, 2, &[0], Tolerances::default()).unwrap();
        let k = increment_kernel(&fc, 1);
        let expected = (1.0 - (-2.0 * beta).exp()) / 2.0;
        prop_assert!((k.weight(1) - expected).abs() < 1e-12);
        prop_assert!((k.weight(-1) - expected).abs() < 1e-12);
        prop_assert_eq!(k.weight(0), 0.0);
    }
}

#[test]
fn identity_operator_pins_every_vertex() {
    let q = TransferOperator::identity(GroupSpace::window(4).unwrap());
    let (_, chain) = chain_for(&q, 3, &[2]);
    for seed in 0..5 {
        let t = sample_tree(&chain, 3, seed).unwrap();
        assert_eq!(t.vertex_count(), 1 + 4 + 12 + 36);
        assert!(t.states.iter().all(|&s| chain.space().element(s) == 2));
    }
    assert_eq!(sample_tree(&chain, 0, 9).unwrap().vertex_count(), 1);
}

#[test]
fn first_increment_matches_exact_mixture() {
    let samples = 100_000;
    for (beta, seed) in [(2.4, 3u64), (3.0, 4)] {
        let base = TransferOperator::sos(beta, GroupSpace::window(40).unwrap()).unwrap();
        let fc = build_fuzzy_chain(&base, 5, 2, &[0, 1], Tolerances::default()).unwrap();
        let chain = fc.chain();
        let window = base.space();
        // Mixture over fuzzy edges of Q restricted to the congruence class.
        let mut exact = vec![0.0; window.size()];
        for a in 0..5 {
            for b in 0..5 {
                let mass = chain.pi().values()[a] * chain.p(a, b);
                let class = (b as i64 - a as i64).rem_euclid(5);
                let members: Vec<i64> = window.elements().filter(|j| j.rem_euclid(5) == class).collect();
                let total: f64 = members.iter().map(|&j| base.evaluate(j)).sum();
                for j in members {
                    exact[window.index_of(j).unwrap()] += mass * base.evaluate(j) / total;
                }
            }
        }
        let total: f64 = exact.iter().sum();
        assert!((total - 1.0).abs() <= chain.row_sum_tolerance(), "{total}");
        let mut counts = vec![0usize; window.size()];
        for path in fc.sample_branches(1, samples, seed) {
            counts[window.index_of(path.increments[0]).unwrap()] += 1;
        }
        for (k, &p) in exact.iter().enumerate() {
            let hat = counts[k] as f64 / samples as f64;
            let se = (p * (1.0 - p) / samples as f64).sqrt();
            assert!(
                (hat - p).abs() <= 3.0 * se || (hat == 0.0 && p * samples as f64 <= 1e-3),
                "beta {beta} increment {}: {hat} vs {p}",
                window.element(k)
            );
        }
    }
}

#[test]
fn distinct_sets_give_separated_marginals() {
    let q = TransferOperator::sos(2.4, GroupSpace::window(40).unwrap()).unwrap();
    let (_, x) = chain_for(&q, 2, &[0, 5]);
    let (_, y) = chain_for(&q, 2, &[0, 9]);
    let (_, z) = chain_for(&q, 2, &[3]);
    for (a, b) in [(&x, &y), (&x, &z), (&y, &z)] {
        let (tv, bound) = marginal_separation(a, b).unwrap();
        assert!(bound > 0.0);
        assert!(tv > bound, "{tv} <= {bound}");
    }
}

#[test]
fn theorem_report_rejects_foreign_set() {
    let q = TransferOperator::sos(2.4, GroupSpace::window(40).unwrap()).unwrap();
    let (sol, chain) = chain_for(&q, 2, &[0, 5]);
    let own = treegibbs::gibbs::verify_theorem_bounds(&chain, &[0, 5], sol.epsilon.epsilon).unwrap();
    assert!(own.pass);
    let foreign = treegibbs::gibbs::verify_theorem_bounds(&chain, &[0, 7], sol.epsilon.epsilon).unwrap();
    assert!(!foreign.pass);
    let lazy = foreign.checks.iter().find(|c| c.name == "inside diagonal > 1/d").unwrap();
    assert!(!lazy.pass);
}

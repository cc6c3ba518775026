use std::sync::{Arc, OnceLock};

use gridmga_core::cases;
use gridmga_core::evaluation::{
    cumulative_overload, eval_switching_sequence, feasible_by_state_search, first_feasible_ordering,
    sequence_feasible_by_state_search, eval_cumulative_overload, eval_cumulative_quadratic_load, eval_topological_depth,
    rank_by_values, Direction, EvalContext,
};
use gridmga_core::mga::generate_mga_set;
use gridmga_core::network::hamming_distance;
use gridmga_core::reconfig::{ReconfigModel, Solver, SwitchingOptions};
use gridmga_core::{Alternative, Network, Topology};
use proptest::prelude::*;

struct Fixture {
    net: Network,
    model: ReconfigModel,
    alts: Vec<Alternative>,
}

fn five_bus() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let net = cases::congested_five_bus();
        let model = ReconfigModel::build(Arc::new(net.clone()), SwitchingOptions::lines_only(3)).unwrap();
        let s = Solver::with_default_backend(1e-3).unwrap();
        let (f_star, lc) = model.solve_least_cost(&s).unwrap();
        let mut alts = generate_mga_set(&model, &s, f_star, 0.2, 12, 2).unwrap().alternatives;
        alts.push(lc);
        Fixture { net, model, alts }
    })
}

/// Loop-free reference for the ordering question: walks every permutation
/// recursively and checks each prefix state from scratch.
fn naive_ordering_exists(n: usize, ok: &dyn Fn(u32) -> bool) -> bool {
    fn go(mask: u32, n: usize, ok: &dyn Fn(u32) -> bool) -> bool {
        if mask.count_ones() as usize == n {
            return true;
        }
        (0..n).any(|a| mask & (1 << a) == 0 && ok(mask | (1 << a)) && go(mask | (1 << a), n, ok))
    }
    go(0, n, ok)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn depth_is_hamming_distance_to_base(bits in proptest::collection::vec(any::<bool>(), 1..40)) {
        let t = Topology::from_bits(&bits, bits.len());
        let ctx = EvalContext::from_least_cost(&Topology::base(bits.len(), 0));
        let h = hamming_distance(&t, &ctx.base_topology).unwrap();
        prop_assert_eq!(eval_topological_depth(&t, &ctx), h as f64);
    }

    #[test]
    fn overload_vanishes_iff_every_loading_at_most_threshold(loadings in proptest::collection::vec(0.0f64..1.5, 0..30)) {
        let u4 = cumulative_overload(&loadings, 0.9);
        prop_assert!(u4 >= 0.0);
        prop_assert_eq!(u4 == 0.0, loadings.iter().all(|&p| p <= 0.9));
    }

    #[test]
    fn ranking_is_a_stable_permutation(values in proptest::collection::vec(-5i32..5, 0..30), maximize in any::<bool>()) {
        let values: Vec<f64> = values.into_iter().map(f64::from).collect();
        let dir = if maximize { Direction::Maximize } else { Direction::Minimize };
        let order = rank_by_values(&values, dir);
        let mut sorted = order.clone();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, (0..values.len()).collect::<Vec<_>>());
        for w in order.windows(2) {
            let (a, b) = (values[w[0]], values[w[1]]);
            prop_assert!(!dir.better(b, a));
            if a == b {
                prop_assert!(w[0] < w[1]);
            }
        }
    }

    #[test]
    fn flow_sign_does_not_change_loading_values(idx in 0usize..13, signs in proptest::collection::vec(any::<bool>(), 7)) {
        let f = five_bus();
        let alt = &f.alts[idx % f.alts.len()];
        let mut flipped = alt.clone();
        for (flow, s) in flipped.flows.iter_mut().zip(signs) {
            if s {
                *flow = -*flow;
            }
        }
        let ctx = EvalContext::from_least_cost(&alt.topology);
        prop_assert_eq!(
            eval_cumulative_overload(alt, &f.net, &ctx).unwrap(),
            eval_cumulative_overload(&flipped, &f.net, &ctx).unwrap()
        );
        prop_assert_eq!(
            eval_cumulative_quadratic_load(alt, &f.net).unwrap(),
            eval_cumulative_quadratic_load(&flipped, &f.net).unwrap()
        );
    }

    #[test]
    fn sequence_search_agrees_with_oracles(n in 0usize..=4, table in proptest::collection::vec(any::<bool>(), 16)) {
        let ok = |mask: u32| table[mask as usize];
        let order = first_feasible_ordering(n, ok);
        let expected = naive_ordering_exists(n, &ok);
        prop_assert_eq!(order.is_some(), expected);
        prop_assert_eq!(feasible_by_state_search(n, ok), expected);
        if let Some(order) = order {
            let mut mask = 0u32;
            for a in order {
                mask |= 1 << a;
                prop_assert!(ok(mask));
            }
        }
        if n == 1 {
            prop_assert_eq!(expected, ok(1));
        }
    }

    #[test]
    fn sequence_search_agrees_on_power_flows(
        idx in 0usize..13,
        bits in proptest::collection::vec(any::<bool>(), 3),
        factor in 0.4f64..=1.0,
    ) {
        let f = five_bus();
        let mut alt = f.alts[idx % f.alts.len()].clone();
        alt.topology = Topology::from_bits(&bits, 3);
        let net = f.net.scale_line_capacities(factor).unwrap();
        let layout = f.model.layout();
        let exhaustive = eval_switching_sequence(&alt, &net, layout).unwrap();
        prop_assert_eq!(exhaustive.feasible, sequence_feasible_by_state_search(&alt, &net, layout).unwrap());
    }
}

#[test]
fn two_actions_need_the_right_order() {
    // feasible final state, but the first action alone is only safe in one order
    let ok = |mask: u32| mask != 0b01;
    assert_eq!(first_feasible_ordering(2, ok), Some(vec![1, 0]));
    assert!(feasible_by_state_search(2, ok));
    let blocked = |mask: u32| mask == 0b11;
    assert_eq!(first_feasible_ordering(2, blocked), None);
    assert!(!feasible_by_state_search(2, blocked));
}

use gridmga_core::cases;
use gridmga_core::network::to_native;
use gridmga_wasm::demo::{self, CaseSummary, EncodeView, PowerFlowView, CASES};

const TOL: f64 = 1e-9;

fn flow(case: &str, open: &str) -> PowerFlowView {
    serde_json::from_str(&demo::power_flow(case, open).unwrap()).unwrap()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < TOL
}

#[test]
fn case_list_round_trips() {
    let names: Vec<String> = serde_json::from_str(&demo::case_list()).unwrap();
    assert_eq!(names, CASES);
    for name in CASES {
        demo::demo_case(name).unwrap();
    }
    assert!(demo::demo_case("case9999").is_err());
}

// Equal reactances: the direct path takes two thirds of the 60 MW load.
#[test]
fn congested_triangle_closed() {
    let v = flow("congested-triangle", "[]");
    let flows: Vec<f64> = v.branches.iter().map(|b| b.flow_mw).collect();
    assert!(close(flows[0], 20.0) && close(flows[1], 40.0) && close(flows[2], 20.0), "{flows:?}");
    assert!(close(v.cost, 600.0));
    assert!(close(v.max_loading, 4.0));
    // loadings 4.0, 0.8, 0.4
    assert!(close(v.cumulative_overload, 3.1));
    assert!(close(v.cumulative_quadratic_load, 16.0 + 0.64 + 0.16));
    assert_eq!(v.topology, "000");
    let seq = v.sequence.unwrap();
    assert!(seq.feasible);
    assert_eq!(seq.order, Some(vec![]));
}

#[test]
fn opening_a_line_reroutes_everything() {
    let v = flow("congested-triangle", "[1]");
    assert!(v.branches[0].open && close(v.branches[0].flow_mw, 0.0));
    assert!(close(v.branches[1].flow_mw, 60.0));
    assert!(close(v.cumulative_overload, 1.2 - 0.9));
    assert!(close(v.cumulative_quadratic_load, 1.44));
    // the only state with the action applied is overloaded
    assert!(!v.sequence.unwrap().feasible);

    let v = flow("triangle", "[1]");
    assert_eq!(v.topology, "100");
    let seq = v.sequence.unwrap();
    assert!(seq.feasible);
    assert_eq!(seq.order, Some(vec![1]));
}

#[test]
fn power_flow_rejects_bad_requests() {
    // line 1 of the five-bus case is not switchable
    assert!(demo::power_flow("congested-five-bus", "[1]").is_err());
    assert!(demo::power_flow("triangle", "[7]").is_err());
    assert!(demo::power_flow("triangle", "not json").is_err());
    assert!(demo::power_flow("nowhere", "[]").is_err());
    // opening both lines at bus 3 islands its load
    assert!(demo::power_flow("triangle", "[2, 3]").is_err());
}

#[test]
fn five_bus_flows_balance() {
    let v = flow("congested-five-bus", "[3, 7]");
    let net = cases::congested_five_bus();
    assert!(close(v.dispatch_mw.iter().sum::<f64>(), net.total_load()));
    for bus in &net.buses {
        let gen: f64 = net
            .generators
            .iter()
            .zip(&v.dispatch_mw)
            .filter(|(g, _)| g.bus == bus.id)
            .map(|(_, p)| p)
            .sum();
        let net_out: f64 = v
            .branches
            .iter()
            .map(|b| {
                if b.from_bus == bus.id {
                    b.flow_mw
                } else if b.to_bus == bus.id {
                    -b.flow_mw
                } else {
                    0.0
                }
            })
            .sum();
        assert!((gen - bus.load_mw - net_out).abs() < 1e-6, "bus {}", bus.id);
    }
}

fn encode(body: serde_json::Value) -> EncodeView {
    serde_json::from_str(&demo::encode_feedback(&body.to_string()).unwrap()).unwrap()
}

// Column means are [0.5, 0.25]; the top alternative is "10".
#[test]
fn encodings_by_hand() {
    let v = encode(serde_json::json!({
        "topologies": ["10", "10", "01", "00"],
        "ranked": [0],
        "tau": 0.15,
        "a": 0.0,
        "b": 1.0,
        "count": 2
    }));
    assert_eq!(v.dim, 2);
    assert_eq!(v.baseline.feedback, vec![vec![-1.0, 1.0], vec![-1.0, 1.0]]);
    assert_eq!(v.v1.feedback, vec![vec![-1.0, 1.0]]);
    assert_eq!(v.v2.feedback, vec![vec![-0.5, 0.25]]);
    let norm = (0.25f64 + 0.0625).sqrt();
    for c in &v.v2.composed {
        assert!(close(c[0], -0.5 / norm) && close(c[1], 0.25 / norm), "{c:?}");
    }
    assert_eq!(v.v2.composed.len(), 2);
    assert_eq!(v.v2.feedback_used, vec![true, true]);
}

#[test]
fn composed_weights_follow_the_formula() {
    let (a, b) = (0.7, 1.3);
    let v = encode(serde_json::json!({
        "topologies": ["110|1", "011|0", "100|1", "000|0", "111|1"],
        "ranked": [2, 0],
        "a": a,
        "b": b,
        "count": 4,
        "seed": 9
    }));
    assert_eq!(v.dim, 4);
    assert_eq!(v.diversity.len(), 4);
    let unit = |w: &[f64]| {
        let n = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        w.iter().map(|x| x / n).collect::<Vec<_>>()
    };
    // baseline vectors pair with the diversity weights round-robin
    assert_eq!(v.baseline.feedback.len(), 3);
    for (i, c) in v.baseline.composed.iter().enumerate() {
        let d = unit(&v.diversity[i]);
        let h = &v.baseline.feedback[i % 3];
        let hn = h.iter().map(|x| x * x).sum::<f64>().sqrt();
        for j in 0..4 {
            let want = a * d[j] + if hn > 0.0 { b * h[j] / hn } else { 0.0 };
            assert!(close(c[j], want), "baseline {i} dim {j}");
        }
    }
    for (i, c) in v.v2.composed.iter().enumerate() {
        let (d, h) = (unit(&v.diversity[i]), unit(&v.v2.feedback[0]));
        for j in 0..4 {
            assert!(close(c[j], a * d[j] + b * h[j]));
        }
    }
}

#[test]
fn zero_feedback_is_flagged_and_bad_requests_fail() {
    // the top alternative equals the mean, so every delta vanishes
    let v = encode(serde_json::json!({"topologies": ["1", "1"], "ranked": [0], "count": 1}));
    assert_eq!(v.v2.feedback_used, vec![false]);
    assert!(demo::encode_feedback(r#"{"topologies": ["10", "1"], "ranked": [0]}"#).is_err());
    assert!(demo::encode_feedback(r#"{"topologies": ["10"], "ranked": [3]}"#).is_err());
    assert!(demo::encode_feedback(r#"{"topologies": ["1x"], "ranked": [0]}"#).is_err());
    assert!(demo::encode_feedback(r#"{"topologies": ["10"], "ranked": [0], "tau": 2}"#).is_err());
}

fn summary(text: &str) -> CaseSummary {
    serde_json::from_str(&demo::validate_case(text).unwrap()).unwrap()
}

#[test]
fn validates_pasted_cases() {
    let s = summary(include_str!("../../core/data/case14.m"));
    assert!(s.valid, "{:?}", s.issues);
    assert_eq!((s.buses, s.branches, s.generators), (14, 20, 5));

    let s = summary(&to_native(&cases::congested_five_bus()).unwrap());
    assert!(s.valid);
    assert_eq!(s.switchable_branches, 3);

    let mut net = cases::triangle();
    net.branches[0].to_bus = 42;
    let s = summary(&to_native(&net).unwrap());
    assert!(!s.valid);
    assert!(s.issues.iter().any(|i| i.contains("42")), "{:?}", s.issues);

    assert!(demo::validate_case("mpc.bus = [\n1 2").is_err());
}

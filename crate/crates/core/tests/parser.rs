use gridmga_core::cases;
use gridmga_core::network::{parse_matpower_case, parse_native, to_native};

#[test]
fn bundled_cases_have_published_sizes() {
    for (name, buses, branches) in [("case14", 14, 20), ("case57", 57, 80), ("case118", 118, 186)] {
        let net = cases::bundled(name).unwrap();
        assert_eq!(net.buses.len(), buses, "{name}");
        assert_eq!(net.branches.len(), branches, "{name}");
        assert!(net.validate().is_valid(), "{name}");
    }
}

#[test]
fn native_round_trip_is_lossless() {
    for net in [cases::case57(), cases::case118(), cases::congested_five_bus()] {
        let text = to_native(&net).unwrap();
        let back = parse_native(&text).unwrap();
        assert_eq!(back, net);
        assert_eq!(to_native(&back).unwrap(), text);
    }
}

#[test]
fn file_loader_detects_format() {
    let dir = tempfile::tempdir().unwrap();
    let net = cases::congested_five_bus();
    let json = dir.path().join("five.json");
    std::fs::write(&json, to_native(&net).unwrap()).unwrap();
    assert_eq!(cases::load(json.to_str().unwrap()).unwrap(), net);
    let m = dir.path().join("case57.m");
    std::fs::write(&m, include_str!("../data/case57.m")).unwrap();
    assert_eq!(cases::load(m.to_str().unwrap()).unwrap(), parse_matpower_case(include_str!("../data/case57.m")).unwrap());
    assert!(cases::load("no-such-case").is_err());
}

#[test]
fn capacity_scaling() {
    let net = cases::case57();
    assert_eq!(net.scale_line_capacities(1.0).unwrap(), net);
    let half = net.scale_line_capacities(0.5).unwrap();
    for (a, b) in net.branches.iter().zip(&half.branches) {
        assert_eq!(b.limit_mw, a.limit_mw * 0.5);
    }
    assert!(net.scale_line_capacities(0.0).is_err());
    assert!(net.scale_line_capacities(f64::NAN).is_err());
    assert!(net.scale_line_capacities(1.5).is_err());
}

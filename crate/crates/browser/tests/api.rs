use serde_json::Value;
use unmixer::numerics::pearson;
use unmixer_browser::{factorize_json, penalty_slice_json, simulate_json};

fn parse(text: &str) -> Value {
    serde_json::from_str(text).unwrap()
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

#[test]
fn simulate_default_scenario() {
    let out = parse(&simulate_json("").unwrap());
    assert_eq!(out["wavenumbers"].as_array().unwrap().len(), 1000);
    assert_eq!(out["times"].as_array().unwrap().len(), 200);
    let spectra = out["spectra"].as_array().unwrap();
    let kinetics: Vec<Vec<f64>> = out["kinetics"].as_array().unwrap().iter().map(floats).collect();
    assert_eq!(spectra.len(), 5);
    assert_eq!(kinetics.len(), 5);
    for t in 0..200 {
        let total: f64 = kinetics.iter().map(|row| row[t]).sum();
        assert!((total - 1.0).abs() <= 1e-12);
    }
    let snapshots = out["snapshots"].as_array().unwrap();
    assert_eq!(snapshots.len(), 6);
    assert_eq!(snapshots[5]["time"].as_f64(), Some(20.0));
}

#[test]
fn noise_and_interference_change_the_data() {
    let base = parse(&simulate_json("{}").unwrap());
    let moved = parse(&simulate_json(r#"{"lambda": 0.6, "noise": 0.5}"#).unwrap());
    assert_ne!(base["spectra"], moved["spectra"]);
    assert_ne!(base["snapshots"], moved["snapshots"]);
    assert_eq!(base["kinetics"], moved["kinetics"]);
}

#[test]
fn bad_requests_are_rejected() {
    assert!(simulate_json("{\"lamda\": 1}").unwrap_err().contains("lamda"));
    assert!(factorize_json(r#"{"preset": "fastest"}"#).unwrap_err().contains("fastest"));
    assert!(penalty_slice_json(r#"{"row": 5}"#).is_err());
    assert!(penalty_slice_json(r#"{"points": 1}"#).is_err());
}

#[test]
fn factorize_aligns_components_with_truth() {
    let out = parse(&factorize_json(r#"{"restarts": 1}"#).unwrap());
    let truth: Vec<Vec<f64>> = out["true_spectra"].as_array().unwrap().iter().map(floats).collect();
    let rec: Vec<Vec<f64>> = out["spectra"].as_array().unwrap().iter().map(floats).collect();
    let corr = floats(&out["correlations"]);
    assert_eq!(corr.len(), 5);
    for j in 0..5 {
        assert!((pearson(&rec[j], &truth[j]).unwrap() - corr[j]).abs() <= 1e-12);
    }
    assert!(out["residual"].as_f64().unwrap() <= 1e-10);
    let b = &out["breakdown"];
    let sum: f64 = ["p1", "p2", "p3", "p4", "p5"].iter().map(|k| b[k].as_f64().unwrap()).sum();
    assert!((sum - b["psi"].as_f64().unwrap()).abs() <= 1e-12);
}

#[test]
fn slice_passes_through_the_start() {
    let out = parse(&penalty_slice_json(r#"{"row": 1, "col": 2, "points": 21, "span": 0.2}"#).unwrap());
    let values = floats(&out["values"]);
    let psi2 = floats(&out["psi_squared"]);
    assert_eq!(values.len(), 21);
    assert_eq!(values[10], out["center"].as_f64().unwrap());
    let terms: Vec<Vec<f64>> = out["terms"].as_array().unwrap().iter().map(floats).collect();
    for k in 0..21 {
        let psi: f64 = terms.iter().map(|t| t[k]).sum();
        assert!((psi * psi - psi2[k]).abs() <= 1e-12 * psi2[k].max(1.0));
    }
    // spectral preset: transition terms are weighted by zero
    assert!(terms[3].iter().chain(&terms[4]).all(|&x| x == 0.0));
}

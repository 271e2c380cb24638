use serde_json::Value;
use voidplace_wasm::{gap_bracket_curve_json, greedy_layout_json, void_curve_json};

const SCENARIO: &str = r#"{
    "n_cells": 60, "spacing_m": 50, "baseline_rate": 0.002,
    "bumps": [{"center_m": 800, "width_m": 120, "peak_rate": 0.05},
              {"center_m": 2200, "width_m": 150, "peak_rate": 0.03}],
    "sigma2": 0.5, "beta_m": 300, "rho": 0.95, "sigma_l": 2250,
    "horizon_ratio": 0.5, "sensors": 6, "samples": 500, "seed": 4
}"#;

#[test]
fn layout_has_one_pick_per_sensor() {
    let v: Value = serde_json::from_str(&greedy_layout_json(SCENARIO).unwrap()).unwrap();
    assert_eq!(v["cells"].as_array().unwrap().len(), 6);
    assert_eq!(v["lambda_bar"].as_array().unwrap().len(), 60);
    let f: Vec<f64> = v["objective_values"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert!(f.windows(2).all(|w| w[1] >= w[0]));
    assert!(f[5] <= v["total"].as_f64().unwrap());
    // First pick sits on the taller mode.
    let first = v["sensor_positions_m"][0].as_f64().unwrap();
    assert!((first - 800.0).abs() <= 75.0, "{first}");
}

#[test]
fn void_curve_rows_are_consistent() {
    let a = void_curve_json(SCENARIO).unwrap();
    assert_eq!(a, void_curve_json(SCENARIO).unwrap());
    let rows: Vec<Value> = serde_json::from_str(&a).unwrap();
    assert_eq!(rows.len(), 7);
    for r in &rows {
        let (vp, se, lb) =
            (r["vp_mc"].as_f64().unwrap(), r["vp_se"].as_f64().unwrap(), r["lower_bound"].as_f64().unwrap());
        assert!(vp + 3.0 * se >= lb);
        assert!(r["gap"].as_f64().unwrap() <= r["gap_bound"].as_f64().unwrap() + 3.0 * se);
    }
}

#[test]
fn bracket_peaks_at_zero() {
    let v: Value = serde_json::from_str(&gap_bracket_curve_json(1.5, 0.8, 501).unwrap()).unwrap();
    assert_eq!(v["argmax"].as_f64().unwrap(), 0.0);
    assert!((v["sup"].as_f64().unwrap() - v["bound"].as_f64().unwrap()).abs() < 1e-12);
    assert_eq!(v["lambda"].as_array().unwrap().len(), 501);
}

#[test]
fn bad_input_is_an_error() {
    assert!(greedy_layout_json("{}").is_err());
    assert!(greedy_layout_json(&SCENARIO.replace("\"sensors\": 6", "\"sensors\": 61")).is_err());
    assert!(void_curve_json(&SCENARIO.replace("\"n_cells\": 60", "\"n_cells\": 5000")).is_err());
    assert!(gap_bracket_curve_json(-1.0, 1.0, 10).is_err());
}

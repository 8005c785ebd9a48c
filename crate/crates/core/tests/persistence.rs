use proptest::prelude::*;
use serde_json::Value;

use vstate::continuation::{trace_loop, TraceOptions};
use vstate::io::{branch_csv, branch_sidecar_json, load_state, save_state, state_from_json, state_to_json, StateFile};
use vstate::{PatchState, Sign, SpectralGrid, VStateError};

fn schema() -> Value {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../schema/branch.schema.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

proptest! {
    #[test]
    fn state_round_trip_is_bit_exact(
        m in 2usize..7,
        b in 0.3f64..0.9,
        lambda in -2.0f64..2.0,
        coeffs in prop::collection::vec(-1e-4f64..1e-4, 2..12),
        scale in -300i32..0,
    ) {
        let n = coeffs.len() / 2 * 2;
        let c: Vec<f64> = coeffs[..n].iter().map(|x| x * 10f64.powi(scale / 10)).collect();
        let s = PatchState::from_interleaved(m, b, lambda, &c).unwrap();
        let back = state_from_json(&state_to_json(&s)).unwrap();
        prop_assert_eq!(back.lambda.to_bits(), s.lambda.to_bits());
        prop_assert_eq!(back.b().to_bits(), s.b().to_bits());
        for (x, y) in back.interleaved().iter().zip(s.interleaved()) {
            prop_assert_eq!(x.to_bits(), y.to_bits());
        }
    }
}

#[test]
fn save_and_load_through_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.json");
    let s = PatchState::from_interleaved(4, 0.63, 0.1 + 0.2, &[1e-2 / 3.0, -2e-2 / 7.0, 5e-300, 0.0]).unwrap();
    save_state(&path, &s).unwrap();
    assert_eq!(load_state(&path).unwrap(), s);
    assert!(matches!(load_state(&dir.path().join("nope.json")), Err(VStateError::Io(_))));
}

#[test]
fn invalid_states_are_rejected_on_load() {
    let good = state_to_json(&PatchState::annulus(3, 0.4, 0.6, 2).unwrap());
    for (from, to) in [("\"b\": 0.4", "\"b\": 0.0"), ("\"m\": 3", "\"m\": 0"), ("\"lambda\": 0.6", "\"lambda\": null")] {
        let text = good.replace(from, to);
        assert_ne!(text, good, "{from}");
        assert!(state_from_json(&text).is_err(), "{to}");
    }
    // boundaries that cross each other
    let mut file = StateFile::from_state(&PatchState::annulus(3, 0.9, 0.6, 2).unwrap());
    file.inner[0] = 0.2;
    let text = serde_json::to_string(&file).unwrap();
    assert!(matches!(state_from_json(&text), Err(VStateError::InvalidState(_) | VStateError::Geometry(_))));
}

#[test]
fn sidecar_matches_schema() {
    let grid = SpectralGrid::new(8, 4).unwrap();
    let opts = TraceOptions { max_steps: 6, ..TraceOptions::default() };
    let branch = trace_loop(4, 0.64, Sign::Plus, &grid, &opts).unwrap();
    let sidecar: Value = serde_json::from_str(&branch_sidecar_json(&branch)).unwrap();
    let validator = jsonschema::validator_for(&schema()).unwrap();
    let errors: Vec<String> = validator.iter_errors(&sidecar).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}");

    let mut broken = sidecar.clone();
    broken["termination"] = Value::from("exploded");
    assert!(!validator.is_valid(&broken));

    let csv = branch_csv(&branch);
    assert_eq!(csv.lines().count(), branch.points.len() + 1);
    assert_eq!(sidecar["points"].as_array().unwrap().len(), branch.points.len());
}

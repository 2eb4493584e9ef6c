//! Pinned values for the seed-13 fixture model, to catch silent changes in
//! initialization, encoding or the exact references.

use loarm::elbo::f_term;
use loarm::oracle::{exact_elbo, exact_log_likelihood};
use loarm::{DataVector, OrderPrefix};
use serde_json::Value;

const TOL: f64 = 1e-12;

fn golden() -> Value {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/oracle_golden.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn assert_close(got: f64, want: &Value, what: &str) {
    let want = want.as_f64().unwrap();
    assert!((got - want).abs() <= TOL * (1.0 + want.abs()), "{what}: {got} vs {want}");
}

#[test]
fn fixture_matches_golden_values() {
    let g = golden();
    let (m, x) = loarm::verify::fixture();
    assert_eq!(x.tokens(), &[1, 0, 1]);
    let logits = m.variational_logits(&x).unwrap();
    for (a, b) in logits.iter().zip(g["g_101"].as_array().unwrap()) {
        assert_close(*a, b, "g");
    }
    let cases = g["cases"].as_array().unwrap();
    assert_eq!(cases.len(), 8);
    for c in cases {
        let t: Vec<usize> = c["x"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap() as usize).collect();
        let x = DataVector::new(t, m.layout()).unwrap();
        assert_close(exact_log_likelihood(&m, &x).unwrap(), &c["log_likelihood"], "log p");
        assert_close(exact_elbo(&m, &x).unwrap(), &c["elbo"], "elbo");
        let empty = OrderPrefix::new(vec![], 3).unwrap();
        assert_close(f_term(&m, &x, &empty).unwrap().value, &c["f_empty"], "F()");
        let p21 = OrderPrefix::new(vec![2, 1], 3).unwrap();
        assert_close(f_term(&m, &x, &p21).unwrap().value, &c["f_2_1"], "F(2,1)");
    }
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let (m, x) = loarm::verify::fixture();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    m.save(&path).unwrap();
    let back = loarm::LoArmModel::load(&path).unwrap();
    assert_eq!(back.params().flat_values(), m.params().flat_values());
    assert_eq!(exact_elbo(&back, &x).unwrap().to_bits(), exact_elbo(&m, &x).unwrap().to_bits());
}

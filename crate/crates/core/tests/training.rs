use loarm::data::nll_bound;
use loarm::engine::{fit, TrainConfig};
use loarm::oracle::{exact_elbo, exact_log_likelihood};
use loarm::state::DimKind;
use loarm::{DataVector, Layout, LoArmModel, ModelConfig, PolicyMode, RngStream, VariationalMode};

#[test]
fn short_training_raises_the_exact_elbo() {
    let (mut m, x) = loarm::verify::fixture();
    let before = exact_elbo(&m, &x).unwrap();
    let data = vec![x.clone(); 16];
    let cfg = TrainConfig { lr: 1e-2, steps: 500, batch_size: 8, ..Default::default() };
    let log = fit(&mut m, &data, &cfg, None).unwrap();
    assert_eq!(log.len(), 500);
    let after = exact_elbo(&m, &x).unwrap();
    assert!(after > before + 0.5, "{before} -> {after}");
    assert!(after <= exact_log_likelihood(&m, &x).unwrap() + 1e-12);
}

#[test]
fn training_is_deterministic_for_a_seed() {
    let run = || {
        let (mut m, x) = loarm::verify::fixture();
        let data = vec![x, DataVector::new(vec![0, 0, 1], &Layout::uniform(3, 2, DimKind::Token).unwrap()).unwrap()];
        let cfg = TrainConfig { lr: 1e-2, steps: 30, batch_size: 4, seed: 9, ..Default::default() };
        fit(&mut m, &data, &cfg, None).unwrap();
        m.params().flat_values()
    };
    assert_eq!(run(), run());
}

#[test]
fn stochastic_nll_bound_sits_above_exact_nll() {
    let lay = Layout::uniform(4, 2, DimKind::Token).unwrap();
    let m = LoArmModel::new(lay.clone(), ModelConfig::new(vec![8], PolicyMode::SharedTorso, VariationalMode::Separate, 4)).unwrap();
    let data: Vec<DataVector> = [[0, 1, 1, 0], [1, 1, 0, 0], [0, 0, 0, 1]]
        .iter()
        .map(|t| DataVector::new(t.to_vec(), &lay).unwrap())
        .collect();
    let n = data.len() as f64;
    let exact_nll: f64 = data.iter().map(|x| -exact_log_likelihood(&m, x).unwrap()).sum::<f64>() / n;
    let exact_neg_elbo: f64 = data.iter().map(|x| -exact_elbo(&m, x).unwrap()).sum::<f64>() / n;
    assert!(exact_neg_elbo >= exact_nll);
    let bound = nll_bound(&m, &data, 4000, &mut RngStream::new(1)).unwrap();
    assert!((bound - exact_neg_elbo).abs() < 0.05, "{bound} vs {exact_neg_elbo}");
    assert!(bound >= exact_nll);
}

#![allow(dead_code)]

use arcutoff_core::streams::stream_rng;
use arcutoff_core::{Model, ModelParams, Network, NoiseSpec};
use rand::Rng;

/// Two coordinates, `e = 0.55`, unit Gaussian noise.
pub fn swap_model() -> Model {
    Model::new(Network::swap(), ModelParams::uniform(2, 0.55, 1.0).unwrap()).unwrap()
}

/// Three coordinates on the complete graph, `e = 0.5`, unit Gaussian noise.
pub fn complete3() -> Model {
    Model::new(Network::complete(3).unwrap(), ModelParams::uniform(3, 0.5, 1.0).unwrap()).unwrap()
}

/// Random strongly connected network with random damping and noise scales.
/// Edges are kept with probability 1/2 and the draw is retried until the
/// graph is connected.
pub fn random_model(d: usize, seed: u64) -> Model {
    let mut rng = stream_rng(seed, d as u64);
    loop {
        let w: Vec<Vec<f64>> = (0..d)
            .map(|i| (0..d).map(|j| if i != j && rng.random_bool(0.5) { rng.random_range(0.1..2.0) } else { 0.0 }).collect())
            .collect();
        if w.iter().any(|row| row.iter().all(|&v| v == 0.0)) {
            continue;
        }
        let rows: Vec<Vec<f64>> = w.iter().map(|r| {
            let s: f64 = r.iter().sum();
            r.iter().map(|v| v / s).collect()
        }).collect();
        let Ok(net) = Network::new(rows) else { continue };
        let e = (0..d).map(|_| rng.random_range(0.05..0.99)).collect();
        let sigma = (0..d).map(|_| rng.random_range(0.2..3.0)).collect();
        return Model::new(net, ModelParams::new(e, sigma, NoiseSpec::gaussian()).unwrap()).unwrap();
    }
}

//! Shared fixtures for the benchmarks: Gresho-square spaces and a sampled
//! discretely divergence-free velocity.

use std::sync::Arc;

use nsfem_core::mesh::generate_uniform;
use nsfem_core::reconstruction::DivFreeSampler;
use nsfem_core::{DomainSpec, ElementPair, Field, Mesh, Space};

pub struct Fixture {
    pub pair: ElementPair,
    pub mesh: Arc<Mesh>,
    pub velocity: Arc<Space>,
    pub pressure: Arc<Space>,
    /// Seeded discretely divergence-free sample.
    pub u: Field,
}

impl Fixture {
    pub fn new(pair: ElementPair, n: usize) -> Fixture {
        let mesh = Arc::new(generate_uniform(&DomainSpec::gresho_square(n)).expect("valid mesh"));
        let velocity = Space::new(mesh.clone(), pair.velocity());
        let pressure = Space::new(mesh.clone(), pair.pressure());
        let u = DivFreeSampler::new(&velocity, &pressure)
            .and_then(|s| s.sample(1))
            .expect("sampler");
        Fixture {
            pair,
            mesh,
            velocity,
            pressure,
            u,
        }
    }
}

//! Shared fixtures for the unit tests.

use nalgebra::DVector;

use crate::model::{DomainSpec, ModelSpec, Reaction, ReactionNetwork, Species};

/// `2 v1 <-> v2` plus decay of both species.
pub(crate) fn dimerization_net(k1: f64, k2: f64, g1: f64, g2: f64) -> ReactionNetwork {
    ReactionNetwork {
        species: vec![
            Species { index: 0, name: "v1".into() },
            Species { index: 1, name: "v2".into() },
        ],
        reactions: vec![
            Reaction::new([(0, 2)], [(1, 1)], k1),
            Reaction::new([(1, 1)], [(0, 2)], k2),
            Reaction::new([(0, 1)], [], g1),
            Reaction::new([(1, 1)], [], g2),
        ],
    }
}

/// `v1 + v2 <-> v3` plus decay of v1 only.
pub(crate) fn trimolecular_net(k1: f64, k2: f64, g1: f64) -> ReactionNetwork {
    ReactionNetwork {
        species: (0..3)
            .map(|i| Species { index: i, name: format!("v{}", i + 1) })
            .collect(),
        reactions: vec![
            Reaction::new([(0, 1), (1, 1)], [(2, 1)], k1),
            Reaction::new([(2, 1)], [(0, 1), (1, 1)], k2),
            Reaction::new([(0, 1)], [], g1),
        ],
    }
}

/// Single decaying chemical produced by the population: the minimal
/// Keller-Segel system.
pub(crate) fn minimal_ks_net(gamma: f64) -> ReactionNetwork {
    ReactionNetwork {
        species: vec![Species { index: 0, name: "v1".into() }],
        reactions: vec![Reaction::new([(0, 1)], [], gamma)],
    }
}

pub(crate) fn interval_model(
    net: ReactionNetwork,
    alpha: &[f64],
    chi: f64,
    d: f64,
    d_tilde: &[f64],
    length: f64,
) -> ModelSpec {
    let model = ModelSpec {
        network: net,
        alpha: DVector::from_row_slice(alpha),
        chi,
        cell_diffusion: d,
        chem_diffusion: DVector::from_row_slice(d_tilde),
        domain: DomainSpec::Interval { length },
        chemoattractant: alpha.len() - 1,
    };
    model.validate().expect("fixture model must validate");
    model
}

/// Minimal KS with unit parameters except `chi`, on an interval of length pi.
pub(crate) fn minimal_ks_model(chi: f64) -> ModelSpec {
    interval_model(minimal_ks_net(1.0), &[1.0], chi, 1.0, &[1.0], std::f64::consts::PI)
}

/// Dimerization model with unit rates on an interval of length pi.
pub(crate) fn dimerization_model(chi: f64) -> ModelSpec {
    interval_model(
        dimerization_net(1.0, 1.0, 1.0, 1.0),
        &[1.0, 0.0],
        chi,
        1.0,
        &[1.0, 1.0],
        std::f64::consts::PI,
    )
}

/// Trimolecular model with the rates used throughout the examples.
pub(crate) fn trimolecular_model(chi: f64) -> ModelSpec {
    interval_model(
        trimolecular_net(2.0, 3.0, 1.0),
        &[1.0, 0.0, 0.0],
        chi,
        1.0,
        &[1.0, 1.0, 1.0],
        std::f64::consts::PI,
    )
}

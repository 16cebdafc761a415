#![allow(dead_code)]

use dhn_core::fixtures::{comb, CombSpec};
use dhn_core::network::{FlowField, NetworkGraph};
use proptest::prelude::*;

/// Random single-plant comb networks.
pub fn comb_spec(max_junctions: usize, max_branches: usize, lossy: bool) -> impl Strategy<Value = CombSpec> {
    let k = if lossy { 0.0..0.5f64 } else { 0.0..f64::MIN_POSITIVE };
    (
        1..=max_junctions,
        1..=max_branches,
        50.0..400.0f64,
        0.04..0.2f64,
        k.clone(),
        prop::collection::vec(20.0..300.0f64, 1..4),
        0.02..0.06f64,
        k,
        0.05..1.0f64,
    )
        .prop_map(move |(junctions, branches, tl, td, tk, lengths, bd, bk, m)| CombSpec {
            prefix: String::new(),
            junctions,
            branches_per_junction: branches,
            trunk_length: tl,
            trunk_diameter: td,
            trunk_heat_transfer: if lossy { tk } else { 0.0 },
            branch_lengths: lengths,
            branch_diameter: bd,
            branch_heat_transfer: if lossy { bk } else { 0.0 },
            consumer_massflow: m,
            origin: (0.0, 0.0),
        })
}

/// A comb, optionally subdivided into cells of at most `cell` metres.
pub fn network(spec: &CombSpec, cell: Option<f64>) -> (NetworkGraph<f64>, FlowField<f64>) {
    let (g, f) = comb(spec).unwrap();
    match cell {
        Some(c) => g.subdivide(&f, c).unwrap(),
        None => (g, f),
    }
}

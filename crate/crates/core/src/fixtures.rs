//! Published reference values shipped with the crate.
//!
//! The JSON sources live in `fixtures/` and are embedded at compile time so
//! that the CLI and the tests need no data directory.

use serde::Deserialize;

use crate::qkd::LayerId;
use crate::tensor::parse_ket;
use crate::witness::{ElementEstimate, ElementLabel};
use crate::Measured;

pub const DENSITY_ELEMENTS_JSON: &str = include_str!("../fixtures/density_elements.json");
pub const SUBSPACE_FIDELITIES_JSON: &str = include_str!("../fixtures/subspace_fidelities.json");
pub const LAYER_QBERS_JSON: &str = include_str!("../fixtures/layer_qbers.json");

#[derive(Deserialize)]
struct RawDiagonal {
    ket: String,
    value: f64,
    std_dev: f64,
}

#[derive(Deserialize)]
struct RawOffDiagonal {
    bra: String,
    ket: String,
    value: f64,
    std_dev: f64,
}

#[derive(Deserialize)]
struct RawDensityTable {
    diagonals: Vec<RawDiagonal>,
    offdiagonals: Vec<RawOffDiagonal>,
    fidelity: Measured,
    bound: f64,
    reported_margin_sigma: u32,
}

/// Measured density-matrix elements with the reported fidelity.
#[derive(Clone, Debug)]
pub struct DensityElementTable {
    pub diagonals: Vec<ElementEstimate>,
    pub offdiagonals: Vec<ElementEstimate>,
    pub fidelity: Measured,
    pub bound: f64,
    pub reported_margin_sigma: u32,
}

pub fn density_elements() -> DensityElementTable {
    let raw: RawDensityTable =
        serde_json::from_str(DENSITY_ELEMENTS_JSON).expect("embedded fixture parses");
    let ket = |s: &str| parse_ket(s).expect("embedded ket label");
    DensityElementTable {
        diagonals: raw
            .diagonals
            .iter()
            .map(|d| ElementEstimate::new(ElementLabel::diagonal(&ket(&d.ket)), d.value, d.std_dev))
            .collect(),
        offdiagonals: raw
            .offdiagonals
            .iter()
            .map(|o| {
                ElementEstimate::new(
                    ElementLabel::new(&ket(&o.bra), &ket(&o.ket)),
                    o.value,
                    o.std_dev,
                )
            })
            .collect(),
        fidelity: raw.fidelity,
        bound: raw.bound,
        reported_margin_sigma: raw.reported_margin_sigma,
    }
}

#[derive(Clone, Debug, Deserialize)]
pub struct SubspaceFidelityEntry {
    pub kets: [String; 2],
    pub value: f64,
    pub std_dev: f64,
}

impl SubspaceFidelityEntry {
    pub fn ket_digits(&self) -> [Vec<usize>; 2] {
        [
            parse_ket(&self.kets[0]).expect("embedded ket label"),
            parse_ket(&self.kets[1]).expect("embedded ket label"),
        ]
    }
}

#[derive(Deserialize)]
struct RawSubspace {
    entries: Vec<SubspaceFidelityEntry>,
}

/// Reported two-level GHZ fidelities, in publication order.
pub fn subspace_fidelities() -> Vec<SubspaceFidelityEntry> {
    let raw: RawSubspace =
        serde_json::from_str(SUBSPACE_FIDELITIES_JSON).expect("embedded fixture parses");
    raw.entries
}

/// One reported row of per-layer QBERs.
#[derive(Clone, Debug, Deserialize)]
pub struct LayerQberRow {
    pub layer: LayerId,
    pub kets: [String; 2],
    pub qber_z: Measured,
    pub qber_x: Measured,
    pub qber_z_ab: Option<Measured>,
    pub qber_z_ac: Option<Measured>,
    pub key_per_round: f64,
}

#[derive(Deserialize)]
struct RawQbers {
    rows: Vec<LayerQberRow>,
}

pub fn layer_qbers() -> Vec<LayerQberRow> {
    let raw: RawQbers = serde_json::from_str(LAYER_QBERS_JSON).expect("embedded fixture parses");
    raw.rows
}

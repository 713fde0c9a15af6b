//! Layered key extraction, per-layer QBERs and asymptotic key rates.
//!
//! The state splits into two three-party layers, `{000, 111}` and
//! `{220, 331}`, read out with [`key_map_abc`], and two A–B layers, `{00, 22}`
//! and `{11, 33}` (C fixed on 0 and 1 respectively), read out with
//! [`key_map_ab`].

use std::fmt;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixtures::LayerQberRow;
use crate::tensor::{ket_label, DensityOperator};
use crate::tomo::{
    born_probabilities, sample_outcomes, CountTable, LocalMeasurement, MeasurementSetting,
};
use crate::witness::Sigma;
use crate::Measured;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerId {
    Abc0,
    Abc1,
    Ab0,
    Ab1,
}

impl LayerId {
    pub const ALL: [LayerId; 4] = [LayerId::Abc0, LayerId::Abc1, LayerId::Ab0, LayerId::Ab1];

    pub fn as_str(self) -> &'static str {
        match self {
            LayerId::Abc0 => "abc0",
            LayerId::Abc1 => "abc1",
            LayerId::Ab0 => "ab0",
            LayerId::Ab1 => "ab1",
        }
    }
}

impl fmt::Display for LayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for LayerId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LayerId::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| Error::Parse(format!("unknown layer {s:?}")))
    }
}

/// One key layer: who shares the key and which levels each party uses.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerSpec {
    pub id: LayerId,
    /// Parties that hold key bits.
    pub participants: Vec<usize>,
    /// Levels of the two basis kets, per party. Non-participants have equal
    /// levels and are conditioned on that level.
    pub levels: Vec<[usize; 2]>,
}

impl LayerSpec {
    pub fn new(id: LayerId) -> Self {
        let (participants, levels) = match id {
            LayerId::Abc0 => (vec![0, 1, 2], vec![[0, 1], [0, 1], [0, 1]]),
            LayerId::Abc1 => (vec![0, 1, 2], vec![[2, 3], [2, 3], [0, 1]]),
            LayerId::Ab0 => (vec![0, 1], vec![[0, 2], [0, 2], [0, 0]]),
            LayerId::Ab1 => (vec![0, 1], vec![[1, 3], [1, 3], [1, 1]]),
        };
        Self {
            id,
            participants,
            levels,
        }
    }

    pub fn all() -> Vec<LayerSpec> {
        LayerId::ALL.into_iter().map(LayerSpec::new).collect()
    }

    /// The layer's two basis kets over the participants.
    pub fn kets(&self) -> [String; 2] {
        let pick = |i: usize| -> Vec<usize> {
            self.participants
                .iter()
                .map(|&p| self.levels[p][i])
                .collect()
        };
        [ket_label(&pick(0)), ket_label(&pick(1))]
    }

    /// The two basis kets over all three parties.
    pub fn full_kets(&self) -> [Vec<usize>; 2] {
        [
            self.levels.iter().map(|l| l[0]).collect(),
            self.levels.iter().map(|l| l[1]).collect(),
        ]
    }

    fn in_layer(&self, digits: &[usize]) -> bool {
        digits
            .iter()
            .zip(&self.levels)
            .all(|(d, l)| *d == l[0] || *d == l[1])
    }

    fn key_bit(&self, digit: usize) -> Result<u8> {
        match self.id {
            LayerId::Abc0 | LayerId::Abc1 => key_map_abc(digit),
            LayerId::Ab0 | LayerId::Ab1 => key_map_ab(digit),
        }
    }

    /// `σx` on the participants' levels, computational basis elsewhere.
    pub fn x_setting(&self) -> MeasurementSetting {
        MeasurementSetting::new(
            self.levels
                .iter()
                .enumerate()
                .map(|(p, l)| {
                    if self.participants.contains(&p) {
                        LocalMeasurement::sigma(Sigma::X, l[0], l[1])
                    } else {
                        LocalMeasurement::Computational
                    }
                })
                .collect(),
        )
    }
}

/// Key bit of a three-party layer: outcomes 0 and 2 give 0, 1 and 3 give 1.
pub fn key_map_abc(digit: usize) -> Result<u8> {
    if digit > 3 {
        return Err(Error::InvalidDigit { digit, dim: 4 });
    }
    Ok((digit & 1) as u8)
}

/// Key bit of an A–B layer: outcomes 0 and 1 give 0, 2 and 3 give 1.
pub fn key_map_ab(digit: usize) -> Result<u8> {
    if digit > 3 {
        return Err(Error::InvalidDigit { digit, dim: 4 });
    }
    Ok((digit >> 1) as u8)
}

pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::OutOfRange {
            name: "p",
            value: p,
            lo: 0.0,
            hi: 1.0,
        });
    }
    if p == 0.0 || p == 1.0 {
        return Ok(0.0);
    }
    Ok(-p * p.log2() - (1.0 - p) * (1.0 - p).log2())
}

/// Pairwise Z-basis disagreement between two parties.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairQber {
    pub parties: (usize, usize),
    pub qber: Measured,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QberReport {
    pub layer: LayerId,
    pub qber_z: Measured,
    pub qber_x: Measured,
    /// Reference party against each other participant; empty for A–B layers.
    pub pairwise: Vec<PairQber>,
    /// Fraction of Z rounds discarded by sifting, when known.
    pub discard_fraction: Option<f64>,
}

impl QberReport {
    fn pair(&self, a: usize, b: usize) -> Option<Measured> {
        self.pairwise
            .iter()
            .find(|p| p.parties == (a, b) || p.parties == (b, a))
            .map(|p| p.qber)
    }

    pub fn qber_z_ab(&self) -> Option<Measured> {
        self.pair(0, 1)
    }

    pub fn qber_z_ac(&self) -> Option<Measured> {
        self.pair(0, 2)
    }

    /// Report built from published central values and uncertainties.
    pub fn from_fixture(row: &LayerQberRow) -> Self {
        let pairwise = [((0, 1), row.qber_z_ab), ((0, 2), row.qber_z_ac)]
            .into_iter()
            .filter_map(|(parties, q)| q.map(|qber| PairQber { parties, qber }))
            .collect();
        Self {
            layer: row.layer,
            qber_z: row.qber_z,
            qber_x: row.qber_x,
            pairwise,
            discard_fraction: None,
        }
    }
}

fn binomial(errors: f64, total: f64) -> Measured {
    let q = errors / total;
    Measured::new(q, (q * (1.0 - q) / total).sqrt())
}

fn parse_digits(outcome: &str) -> Result<Vec<usize>> {
    outcome
        .chars()
        .map(|c| {
            c.to_digit(10)
                .map(|d| d as usize)
                .ok_or_else(|| Error::Parse(format!("outcome {outcome:?} is not a digit string")))
        })
        .collect()
}

/// QBERs from weighted outcomes. Z outcomes are digit strings; X outcomes
/// are labels of [`LayerSpec::x_setting`].
fn qbers_weighted<'a>(
    layer: &LayerSpec,
    reference: usize,
    z: impl IntoIterator<Item = (&'a str, f64)>,
    x: impl IntoIterator<Item = (&'a str, f64)>,
) -> Result<QberReport> {
    if !layer.participants.contains(&reference) {
        return Err(Error::InvalidParty {
            party: reference,
            parties: layer.participants.len(),
        });
    }
    let receivers: Vec<usize> = if layer.participants.len() > 2 {
        layer
            .participants
            .iter()
            .copied()
            .filter(|&p| p != reference)
            .collect()
    } else {
        Vec::new()
    };

    let (mut total, mut kept, mut err_all) = (0.0, 0.0, 0.0);
    let mut err_pair = vec![0.0; receivers.len()];
    for (outcome, w) in z {
        let digits = parse_digits(outcome)?;
        if digits.len() != layer.levels.len() {
            return Err(Error::Parse(format!(
                "outcome {outcome:?} has wrong length"
            )));
        }
        total += w;
        if !layer.in_layer(&digits) {
            continue;
        }
        kept += w;
        let bits = layer
            .participants
            .iter()
            .map(|&p| Ok((p, layer.key_bit(digits[p])?)))
            .collect::<Result<Vec<_>>>()?;
        let reference_bit = bits
            .iter()
            .find(|b| b.0 == reference)
            .expect("participant")
            .1;
        if bits.iter().any(|b| b.1 != reference_bit) {
            err_all += w;
        }
        for (r, e) in receivers.iter().zip(err_pair.iter_mut()) {
            if bits.iter().find(|b| b.0 == *r).expect("participant").1 != reference_bit {
                *e += w;
            }
        }
    }

    let (mut x_kept, mut x_err) = (0.0, 0.0);
    'rounds: for (outcome, w) in x {
        let tokens: Vec<char> = outcome.chars().collect();
        if tokens.len() != layer.levels.len() {
            return Err(Error::Parse(format!(
                "outcome {outcome:?} has wrong length"
            )));
        }
        let mut odd = false;
        for (p, &t) in tokens.iter().enumerate() {
            if layer.participants.contains(&p) {
                match t {
                    '+' => {}
                    '-' => odd = !odd,
                    _ => continue 'rounds,
                }
            } else if t.to_digit(10) != Some(layer.levels[p][0] as u32) {
                continue 'rounds;
            }
        }
        x_kept += w;
        if odd {
            x_err += w;
        }
    }

    if kept <= 0.0 {
        return Err(Error::EmptySamples(format!(
            "no Z rounds in layer {}",
            layer.id
        )));
    }
    if x_kept <= 0.0 {
        return Err(Error::EmptySamples(format!(
            "no X rounds in layer {}",
            layer.id
        )));
    }
    Ok(QberReport {
        layer: layer.id,
        qber_z: binomial(err_all, kept),
        qber_x: binomial(x_err, x_kept),
        pairwise: receivers
            .iter()
            .zip(&err_pair)
            .map(|(&r, &e)| PairQber {
                parties: (reference, r),
                qber: binomial(e, kept),
            })
            .collect(),
        discard_fraction: Some(1.0 - kept / total),
    })
}

/// QBERs from sampled rounds, with the first participant as reference.
pub fn compute_qbers(
    layer: &LayerSpec,
    z_outcomes: &[&str],
    x_outcomes: &[&str],
) -> Result<QberReport> {
    compute_qbers_with_reference(layer, layer.participants[0], z_outcomes, x_outcomes)
}

pub fn compute_qbers_with_reference(
    layer: &LayerSpec,
    reference: usize,
    z_outcomes: &[&str],
    x_outcomes: &[&str],
) -> Result<QberReport> {
    qbers_weighted(
        layer,
        reference,
        z_outcomes.iter().map(|o| (*o, 1.0)),
        x_outcomes.iter().map(|o| (*o, 1.0)),
    )
}

/// QBERs in the infinite-statistics limit; standard deviations are zero.
pub fn exact_qbers(rho: &DensityOperator, layer: &LayerSpec) -> Result<QberReport> {
    let z = born_probabilities(
        rho,
        &MeasurementSetting::computational(rho.dims().parties()),
    )?;
    let x = born_probabilities(rho, &layer.x_setting())?;
    let mut report = qbers_weighted(
        layer,
        layer.participants[0],
        z.iter().map(|(o, p)| (o.as_str(), *p)),
        x.iter().map(|(o, p)| (o.as_str(), *p)),
    )?;
    report.qber_z.std_dev = 0.0;
    report.qber_x.std_dev = 0.0;
    for p in &mut report.pairwise {
        p.qber.std_dev = 0.0;
    }
    Ok(report)
}

/// QBER reports for all four layers from tomography counts: the
/// computational setting supplies the Z rounds and each layer's
/// [`LayerSpec::x_setting`] its X rounds.
pub fn qbers_from_counts(table: &CountTable) -> Result<Vec<QberReport>> {
    let layers = LayerSpec::all();
    let z_label = MeasurementSetting::computational(3).label();
    let mut missing = Vec::new();
    for label in
        std::iter::once(z_label.clone()).chain(layers.iter().map(|l| l.x_setting().label()))
    {
        if table.setting(&label).is_none() {
            missing.push(label);
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingSettings(missing));
    }
    let z = table.setting(&z_label).expect("checked above");
    layers
        .iter()
        .map(|layer| {
            let x = table
                .setting(&layer.x_setting().label())
                .expect("checked above");
            qbers_weighted(
                layer,
                layer.participants[0],
                z.iter().map(|(o, n)| (o.as_str(), *n)),
                x.iter().map(|(o, n)| (o.as_str(), *n)),
            )
        })
        .collect()
}

/// Sampled rounds for every layer: one shared Z record and one X record per layer.
#[derive(Clone, Debug)]
pub struct RoundSamples {
    pub z: Vec<String>,
    pub x: Vec<(LayerId, Vec<String>)>,
}

impl RoundSamples {
    pub fn x_for(&self, layer: LayerId) -> Option<&[String]> {
        self.x
            .iter()
            .find(|(l, _)| *l == layer)
            .map(|(_, v)| v.as_slice())
    }
}

/// Draws `rounds` Z rounds (stream 0) and `rounds` X rounds per layer
/// (stream `1 + layer index`).
pub fn sample_rounds(rho: &DensityOperator, rounds: usize, seed: u64) -> Result<RoundSamples> {
    let draw = |setting: &MeasurementSetting, stream: u64| -> Result<Vec<String>> {
        let probs = born_probabilities(rho, setting)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Ok(sample_outcomes(&probs, rounds, &mut rng)?
            .into_iter()
            .map(str::to_string)
            .collect())
    };
    let z = draw(&MeasurementSetting::computational(rho.dims().parties()), 0)?;
    let x = LayerSpec::all()
        .iter()
        .enumerate()
        .map(|(i, layer)| Ok((layer.id, draw(&layer.x_setting(), 1 + i as u64)?)))
        .collect::<Result<_>>()?;
    Ok(RoundSamples { z, x })
}

/// QBER reports for all four layers from sampled rounds.
pub fn qbers_from_samples(samples: &RoundSamples) -> Result<Vec<QberReport>> {
    let z: Vec<&str> = samples.z.iter().map(String::as_str).collect();
    LayerSpec::all()
        .iter()
        .map(|layer| {
            let x: Vec<&str> = samples
                .x_for(layer.id)
                .ok_or_else(|| Error::EmptySamples(format!("no X rounds for layer {}", layer.id)))?
                .iter()
                .map(String::as_str)
                .collect();
            compute_qbers(layer, &z, &x)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerKeyReport {
    pub layer: LayerId,
    pub rate_mean: f64,
    pub rate_pessimistic: f64,
}

fn rate(qx: f64, qz: &[f64]) -> f64 {
    let h = |q: f64| binary_entropy(q.clamp(0.0, 0.5)).expect("clamped to [0, 1/2]");
    let worst = qz.iter().map(|&q| h(q)).fold(0.0, f64::max);
    (1.0 - h(qx) - worst).max(0.0)
}

/// `r = 1 − h(Q_X) − max_i h(Q_Z(ref, i))` per post-selected round; A–B
/// layers use their single Z-basis QBER. QBERs above 1/2 count as 1/2.
/// The pessimistic rate uses every QBER shifted up by one sigma.
pub fn asymptotic_key_rate(report: &QberReport) -> LayerKeyReport {
    let z: Vec<Measured> = if report.pairwise.is_empty() {
        vec![report.qber_z]
    } else {
        report.pairwise.iter().map(|p| p.qber).collect()
    };
    let mean = rate(
        report.qber_x.value,
        &z.iter().map(|m| m.value).collect::<Vec<_>>(),
    );
    let pess = rate(
        report.qber_x.value + report.qber_x.std_dev,
        &z.iter().map(|m| m.value + m.std_dev).collect::<Vec<_>>(),
    );
    LayerKeyReport {
        layer: report.layer,
        rate_mean: mean,
        rate_pessimistic: pess.min(mean),
    }
}

/// Plug-in mutual information, in bits, of paired discrete samples.
pub fn mutual_information(pairs: &[(usize, usize)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptySamples("no sample pairs".into()));
    }
    let nx = pairs.iter().map(|p| p.0).max().unwrap_or(0) + 1;
    let ny = pairs.iter().map(|p| p.1).max().unwrap_or(0) + 1;
    let mut joint = vec![0.0; nx * ny];
    for &(x, y) in pairs {
        joint[x * ny + y] += 1.0;
    }
    let n = pairs.len() as f64;
    let px: Vec<f64> = (0..nx)
        .map(|x| (0..ny).map(|y| joint[x * ny + y]).sum::<f64>() / n)
        .collect();
    let py: Vec<f64> = (0..ny)
        .map(|y| (0..nx).map(|x| joint[x * ny + y]).sum::<f64>() / n)
        .collect();
    let mut mi = 0.0;
    for x in 0..nx {
        for y in 0..ny {
            let p = joint[x * ny + y] / n;
            if p > 0.0 {
                mi += p * (p / (px[x] * py[y])).log2();
            }
        }
    }
    Ok(mi.max(0.0))
}

/// Writes one row per layer with columns `subspace, qber_z, qber_x,
/// qber_z_ab, qber_z_ac, key_per_round_mean, key_per_round_pessimistic`.
/// Pairwise cells are empty for A–B layers.
pub fn write_layer_csv(mut writer: impl Write, reports: &[QberReport]) -> std::io::Result<()> {
    writeln!(
        writer,
        "subspace,qber_z,qber_x,qber_z_ab,qber_z_ac,key_per_round_mean,key_per_round_pessimistic"
    )?;
    for r in reports {
        let kets = LayerSpec::new(r.layer).kets();
        let opt = |m: Option<Measured>| m.map(|m| format!("{:.6}", m.value)).unwrap_or_default();
        let key = asymptotic_key_rate(r);
        writeln!(
            writer,
            "{}/{},{:.6},{:.6},{},{},{:.6},{:.6}",
            kets[0],
            kets[1],
            r.qber_z.value,
            r.qber_x.value,
            opt(r.qber_z_ab()),
            opt(r.qber_z_ac()),
            key.rate_mean,
            key.rate_pessimistic
        )?;
    }
    Ok(())
}

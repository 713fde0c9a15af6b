//! Measurement settings, Poissonian count simulation, density-matrix element
//! estimation and Monte Carlo error propagation.
//!
//! # Setting and outcome labels
//!
//! A setting label is `"Z"` when every party measures in the computational
//! basis. Otherwise it joins one token per party with `-`: `Z` for the
//! computational basis, `X<a><b>` / `Y<a><b>` for the eigenbasis of
//! `σx^{a,b} = |a⟩⟨b| + |b⟩⟨a|` or `σy^{a,b} = i|a⟩⟨b| − i|b⟩⟨a|`, for
//! example `"Y01-X01-Y10"` or `"X02-X02-Z"`.
//!
//! An outcome label has one character per party: the detected level for a
//! computational party, and `+`, `-` or `r` (residual, detected outside the
//! two levels) for a σ party. The residual outcome is omitted for
//! two-dimensional parties.
//!
//! # Count files
//!
//! Count files are a JSON array of records
//! `{"setting": "X01-X01-X01", "outcome": "+-+", "counts": 37}`.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;
use std::io::{Read, Write};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Poisson;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{c, ket_label, DensityOperator, Dims};
use crate::witness::{
    correlator_patterns, fidelity_with_uniform_target, renormalized_subspace_fidelity,
    signal_pairs, ElementEstimate, ElementLabel, Sigma, SIGNAL_KETS, TARGET_DIMS,
};
use crate::Measured;

/// Settings whose total count falls below this are flagged as low statistics.
pub const LOW_STATISTICS_COUNTS: f64 = 50.0;

/// Measurement performed by one party.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LocalMeasurement {
    Computational,
    Sigma { kind: Sigma, a: usize, b: usize },
}

impl LocalMeasurement {
    pub fn sigma(kind: Sigma, a: usize, b: usize) -> Self {
        LocalMeasurement::Sigma { kind, a, b }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if let LocalMeasurement::Sigma { a, b, .. } = *self {
            if a == b || a >= dim || b >= dim {
                return Err(Error::InvalidSetting(format!(
                    "{} on a {dim}-level party",
                    self.token()
                )));
            }
        }
        Ok(())
    }

    pub fn token(&self) -> String {
        match *self {
            LocalMeasurement::Computational => "Z".into(),
            LocalMeasurement::Sigma { kind, a, b } => {
                let k = match kind {
                    Sigma::X => 'X',
                    Sigma::Y => 'Y',
                };
                format!("{k}{a}{b}")
            }
        }
    }

    fn parse(token: &str) -> Result<Self> {
        let bad = || Error::InvalidSetting(format!("bad party token {token:?}"));
        if token == "Z" {
            return Ok(LocalMeasurement::Computational);
        }
        let chars: Vec<char> = token.chars().collect();
        if chars.len() != 3 {
            return Err(bad());
        }
        let kind = match chars[0] {
            'X' => Sigma::X,
            'Y' => Sigma::Y,
            _ => return Err(bad()),
        };
        let a = chars[1].to_digit(10).ok_or_else(bad)? as usize;
        let b = chars[2].to_digit(10).ok_or_else(bad)? as usize;
        Ok(LocalMeasurement::Sigma { kind, a, b })
    }

    /// Measurement basis as rows of bras, with the outcome token of each row.
    fn basis(&self, dim: usize) -> (DMatrix<Complex64>, Vec<char>) {
        match *self {
            LocalMeasurement::Computational => (
                DMatrix::identity(dim, dim),
                (0..dim)
                    .map(|d| char::from_digit(d as u32, 36).expect("small level"))
                    .collect(),
            ),
            LocalMeasurement::Sigma { kind, a, b } => {
                let h = FRAC_1_SQRT_2;
                // eigenvectors: X: (|a> ± |b>)/√2, Y: (|a> ∓ i|b>)/√2 for ±1
                let (plus_b, minus_b) = match kind {
                    Sigma::X => (c(h), c(-h)),
                    Sigma::Y => (Complex64::new(0.0, -h), Complex64::new(0.0, h)),
                };
                let mut u = DMatrix::zeros(dim, dim);
                u[(0, a)] = c(h);
                u[(0, b)] = plus_b.conj();
                u[(1, a)] = c(h);
                u[(1, b)] = minus_b.conj();
                let mut tokens = vec!['+', '-'];
                for (row, level) in (2..).zip((0..dim).filter(|&l| l != a && l != b)) {
                    u[(row, level)] = c(1.0);
                    tokens.push('r');
                }
                (u, tokens)
            }
        }
    }

    /// Distinct outcome tokens in canonical order.
    fn tokens(&self, dim: usize) -> Vec<char> {
        let (_, mut tokens) = self.basis(dim);
        tokens.dedup();
        tokens
    }
}

/// One projective measurement configuration across all parties.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MeasurementSetting {
    parts: Vec<LocalMeasurement>,
}

impl MeasurementSetting {
    pub fn new(parts: Vec<LocalMeasurement>) -> Self {
        Self { parts }
    }

    pub fn computational(parties: usize) -> Self {
        Self {
            parts: vec![LocalMeasurement::Computational; parties],
        }
    }

    pub fn parts(&self) -> &[LocalMeasurement] {
        &self.parts
    }

    pub fn label(&self) -> String {
        if self
            .parts
            .iter()
            .all(|p| *p == LocalMeasurement::Computational)
        {
            return "Z".into();
        }
        self.parts
            .iter()
            .map(LocalMeasurement::token)
            .collect::<Vec<_>>()
            .join("-")
    }

    pub fn parse(label: &str, parties: usize) -> Result<Self> {
        if label == "Z" {
            return Ok(Self::computational(parties));
        }
        let parts = label
            .split('-')
            .map(LocalMeasurement::parse)
            .collect::<Result<Vec<_>>>()?;
        if parts.len() != parties {
            return Err(Error::InvalidSetting(format!(
                "{label:?} names {} parties, expected {parties}",
                parts.len()
            )));
        }
        Ok(Self { parts })
    }

    pub fn validate(&self, dims: &Dims) -> Result<()> {
        if self.parts.len() != dims.parties() {
            return Err(Error::InvalidSetting(format!(
                "{} has {} parties, state has {}",
                self.label(),
                self.parts.len(),
                dims.parties()
            )));
        }
        for (part, &d) in self.parts.iter().zip(dims.as_slice()) {
            part.validate(d)?;
        }
        Ok(())
    }

    /// All outcome labels of this setting, in canonical order.
    pub fn outcomes(&self, dims: &Dims) -> Vec<String> {
        let mut out = vec![String::new()];
        for (part, &d) in self.parts.iter().zip(dims.as_slice()) {
            let tokens = part.tokens(d);
            out = out
                .iter()
                .flat_map(|prefix| {
                    tokens.iter().map(move |t| {
                        let mut s = prefix.clone();
                        s.push(*t);
                        s
                    })
                })
                .collect();
        }
        out
    }
}

/// Born-rule outcome probabilities, in canonical outcome order.
pub fn born_probabilities(
    rho: &DensityOperator,
    setting: &MeasurementSetting,
) -> Result<Vec<(String, f64)>> {
    let dims = rho.dims();
    setting.validate(dims)?;
    let mut u = DMatrix::from_element(1, 1, c(1.0));
    let mut fine_tokens: Vec<String> = vec![String::new()];
    for (part, &d) in setting.parts.iter().zip(dims.as_slice()) {
        let (basis, tokens) = part.basis(d);
        u = u.kronecker(&basis);
        fine_tokens = fine_tokens
            .iter()
            .flat_map(|prefix| {
                tokens.iter().map(move |t| {
                    let mut s = prefix.clone();
                    s.push(*t);
                    s
                })
            })
            .collect();
    }
    let rotated = &u * rho.matrix() * u.adjoint();

    let outcomes = setting.outcomes(dims);
    let index: BTreeMap<&str, usize> = outcomes
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    let mut probs = vec![0.0; outcomes.len()];
    for (i, label) in fine_tokens.iter().enumerate() {
        probs[index[label.as_str()]] += rotated[(i, i)].re.max(0.0);
    }
    let total: f64 = probs.iter().sum();
    Ok(outcomes
        .into_iter()
        .zip(probs.into_iter().map(|p| p / total))
        .collect())
}

/// Observed (or simulated) counts for one outcome of one setting.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountRecord {
    pub setting: String,
    pub outcome: String,
    pub counts: u64,
}

pub fn read_counts(reader: impl Read) -> Result<Vec<CountRecord>> {
    Ok(serde_json::from_reader(reader)?)
}

pub fn write_counts(writer: impl Write, records: &[CountRecord]) -> Result<()> {
    Ok(serde_json::to_writer_pretty(writer, records)?)
}

/// Counts keyed by setting and outcome label. Values are real so that
/// expected (infinite-statistics) counts can flow through the estimators.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CountTable {
    settings: BTreeMap<String, BTreeMap<String, f64>>,
}

impl CountTable {
    pub fn from_records(records: &[CountRecord]) -> Self {
        let mut table = Self::default();
        for r in records {
            *table
                .settings
                .entry(r.setting.clone())
                .or_default()
                .entry(r.outcome.clone())
                .or_default() += r.counts as f64;
        }
        table
    }

    pub fn insert(&mut self, setting: &str, outcome: &str, counts: f64) {
        self.settings
            .entry(setting.to_string())
            .or_default()
            .insert(outcome.to_string(), counts);
    }

    pub fn setting(&self, label: &str) -> Option<&BTreeMap<String, f64>> {
        self.settings.get(label)
    }

    pub fn setting_labels(&self) -> impl Iterator<Item = &str> {
        self.settings.keys().map(String::as_str)
    }

    pub fn total(&self, label: &str) -> f64 {
        self.settings
            .get(label)
            .map(|m| m.values().sum())
            .unwrap_or(0.0)
    }

    /// Multiplies every count by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for outcomes in out.settings.values_mut() {
            for v in outcomes.values_mut() {
                *v *= factor;
            }
        }
        out
    }

    /// Rounds to integer records, for writing count files.
    pub fn to_records(&self) -> Vec<CountRecord> {
        self.settings
            .iter()
            .flat_map(|(s, outcomes)| {
                outcomes.iter().map(move |(o, &n)| CountRecord {
                    setting: s.clone(),
                    outcome: o.clone(),
                    counts: n.round().max(0.0) as u64,
                })
            })
            .collect()
    }

    /// Each count replaced by a Poisson draw with that mean, settings and
    /// outcomes visited in label order.
    pub fn resample(&self, rng: &mut impl Rng) -> Self {
        let mut out = self.clone();
        for outcomes in out.settings.values_mut() {
            for v in outcomes.values_mut() {
                *v = poisson(*v, rng);
            }
        }
        out
    }
}

fn poisson(mean: f64, rng: &mut impl Rng) -> f64 {
    if mean <= 0.0 {
        return 0.0;
    }
    Poisson::new(mean)
        .expect("positive finite mean")
        .sample(rng)
}

/// Coincidence rate, per-setting integration time and the settings to run.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentPlan {
    /// Coincidences per second.
    pub rate: f64,
    /// Seconds per setting.
    pub integration_time: f64,
    pub settings: Vec<MeasurementSetting>,
}

impl ExperimentPlan {
    /// All settings needed for the target-state fidelity.
    pub fn standard(rate: f64, integration_time: f64) -> Self {
        Self {
            rate,
            integration_time,
            settings: target_settings(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return Err(Error::InvalidPlan(format!(
                "rate {} must be > 0",
                self.rate
            )));
        }
        if !(self.integration_time > 0.0 && self.integration_time.is_finite()) {
            return Err(Error::InvalidPlan(format!(
                "integration time {} must be > 0",
                self.integration_time
            )));
        }
        if self.settings.is_empty() {
            return Err(Error::InvalidPlan("no settings".into()));
        }
        Ok(())
    }

    pub fn counts_per_setting(&self) -> f64 {
        self.rate * self.integration_time
    }
}

/// Expected counts: `rate × time × probability` per outcome.
pub fn expected_counts(rho: &DensityOperator, plan: &ExperimentPlan) -> Result<CountTable> {
    plan.validate()?;
    let n = plan.counts_per_setting();
    let mut table = CountTable::default();
    for setting in &plan.settings {
        let label = setting.label();
        for (outcome, p) in born_probabilities(rho, setting)? {
            table.insert(&label, &outcome, n * p);
        }
    }
    Ok(table)
}

/// Poissonian counts for every setting of the plan. Setting `i` draws from
/// its own stream of the seeded generator, so records depend only on
/// `(seed, i)`.
pub fn simulate_counts(
    rho: &DensityOperator,
    plan: &ExperimentPlan,
    seed: u64,
) -> Result<Vec<CountRecord>> {
    plan.validate()?;
    let n = plan.counts_per_setting();
    let mut records = Vec::new();
    for (i, setting) in plan.settings.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let label = setting.label();
        for (outcome, p) in born_probabilities(rho, setting)? {
            records.push(CountRecord {
                setting: label.clone(),
                outcome,
                counts: poisson(n * p, &mut rng) as u64,
            });
        }
    }
    Ok(records)
}

/// Draws `n` outcome labels from a probability list.
pub fn sample_outcomes<'a>(
    probabilities: &'a [(String, f64)],
    n: usize,
    rng: &mut impl Rng,
) -> Result<Vec<&'a str>> {
    let dist = WeightedIndex::new(probabilities.iter().map(|(_, p)| *p))
        .map_err(|e| Error::InvalidSetting(format!("cannot sample: {e}")))?;
    Ok((0..n)
        .map(|_| probabilities[dist.sample(rng)].0.as_str())
        .collect())
}

/// The settings that determine `ℜ⟨bra|ρ|ket⟩`, with the sign of each
/// correlator and the number of level-changing parties.
pub fn offdiagonal_settings(
    bra: &[usize],
    ket: &[usize],
) -> (Vec<(MeasurementSetting, f64)>, usize) {
    let changing: Vec<usize> = (0..bra.len()).filter(|&p| bra[p] != ket[p]).collect();
    let m = changing.len();
    let settings = correlator_patterns(m)
        .into_iter()
        .map(|(pattern, sign)| {
            let mut parts = vec![LocalMeasurement::Computational; bra.len()];
            for (&p, &kind) in changing.iter().zip(&pattern) {
                parts[p] = LocalMeasurement::sigma(kind, bra[p], ket[p]);
            }
            (MeasurementSetting::new(parts), sign)
        })
        .collect();
    (settings, m)
}

/// The computational setting plus every correlator setting for the six
/// unique off-diagonals of the target.
pub fn target_settings() -> Vec<MeasurementSetting> {
    let mut out = vec![MeasurementSetting::computational(TARGET_DIMS.len())];
    for (a, b) in signal_pairs() {
        for (s, _) in offdiagonal_settings(&a, &b).0 {
            if !out.contains(&s) {
                out.push(s);
            }
        }
    }
    out
}

/// Diagonal and off-diagonal estimates for the target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElementEstimates {
    pub diagonals: Vec<ElementEstimate>,
    pub offdiagonals: Vec<ElementEstimate>,
}

impl ElementEstimates {
    pub fn fidelity(&self) -> Result<f64> {
        let dims = Dims::new(TARGET_DIMS.to_vec())?;
        let kets: Vec<&[usize]> = SIGNAL_KETS.iter().map(|k| k.as_slice()).collect();
        fidelity_with_uniform_target(&dims, &kets, &self.diagonals, &self.offdiagonals)
    }

    fn value(&self, bra: &[usize], ket: &[usize]) -> Result<f64> {
        self.diagonals
            .iter()
            .chain(&self.offdiagonals)
            .find(|e| e.label.same_real_part(bra, ket))
            .map(|e| e.value)
            .ok_or_else(|| Error::MissingElement(ElementLabel::new(bra, ket).to_string()))
    }

    /// Fidelity with `(|a⟩ + |b⟩)/√2`, renormalized to the pair's population.
    pub fn subspace_fidelity(&self, a: &[usize], b: &[usize]) -> Result<f64> {
        renormalized_subspace_fidelity(self.value(a, a)?, self.value(b, b)?, self.value(a, b)?)
    }

    pub fn iter(&self) -> impl Iterator<Item = &ElementEstimate> {
        self.diagonals.iter().chain(&self.offdiagonals)
    }

    fn iter_mut(&mut self) -> impl Iterator<Item = &mut ElementEstimate> {
        self.diagonals
            .iter_mut()
            .chain(self.offdiagonals.iter_mut())
    }
}

/// Writes `label,value,std_dev` rows.
pub fn write_estimates_csv<'a>(
    mut writer: impl Write,
    estimates: impl IntoIterator<Item = &'a ElementEstimate>,
) -> std::io::Result<()> {
    writeln!(writer, "label,value,std_dev")?;
    for e in estimates {
        writeln!(writer, "{},{},{}", e.label, e.value, e.std_dev)?;
    }
    Ok(())
}

/// Parses an outcome label into per-party tokens, checking it against the setting.
fn outcome_tokens(outcome: &str, parties: usize) -> Option<Vec<char>> {
    let tokens: Vec<char> = outcome.chars().collect();
    (tokens.len() == parties).then_some(tokens)
}

/// Estimates the 32 diagonals (`C(ijk)/C_T`) and the six off-diagonal real
/// parts of the target from count data.
///
/// Correlators are normalized within the outcomes of their own setting that
/// fall inside the element's subspace, then rescaled by that subspace's
/// population taken from the diagonal estimates.
pub fn estimate_elements(table: &CountTable) -> Result<ElementEstimates> {
    let dims = Dims::new(TARGET_DIMS.to_vec())?;
    let pairs: Vec<(Vec<usize>, Vec<usize>)> = signal_pairs()
        .into_iter()
        .map(|(a, b)| (a.to_vec(), b.to_vec()))
        .collect();
    estimate_elements_for(table, &dims, &pairs)
}

/// [`estimate_elements`] for arbitrary dimensions and off-diagonal pairs.
pub fn estimate_elements_for(
    table: &CountTable,
    dims: &Dims,
    pairs: &[(Vec<usize>, Vec<usize>)],
) -> Result<ElementEstimates> {
    let z_label = MeasurementSetting::computational(dims.parties()).label();
    let mut missing = Vec::new();
    if table.setting(&z_label).is_none() {
        missing.push(z_label.clone());
    }
    for (a, b) in pairs {
        for (s, _) in offdiagonal_settings(a, b).0 {
            let label = s.label();
            if table.setting(&label).is_none() && !missing.contains(&label) {
                missing.push(label);
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingSettings(missing));
    }

    let z = table.setting(&z_label).expect("checked above");
    let c_total = table.total(&z_label);
    if c_total <= 0.0 {
        return Err(Error::EmptySamples(
            "computational setting has no counts".into(),
        ));
    }
    let mut diag_values = vec![0.0; dims.total()];
    let diagonals: Vec<ElementEstimate> = (0..dims.total())
        .map(|idx| {
            let digits = dims.digits(idx);
            let n = z.get(&ket_label(&digits)).copied().unwrap_or(0.0);
            diag_values[idx] = n / c_total;
            let mut e = ElementEstimate::new(ElementLabel::diagonal(&digits), n / c_total, 0.0);
            e.low_statistics = n == 0.0 || c_total < LOW_STATISTICS_COUNTS;
            e
        })
        .collect();

    let mut offdiagonals = Vec::with_capacity(pairs.len());
    for (bra, ket) in pairs {
        dims.check_digits(bra)?;
        dims.check_digits(ket)?;
        let (settings, m) = offdiagonal_settings(bra, ket);
        if m == 0 {
            return Err(Error::InvalidSetting(format!(
                "{} is a diagonal element",
                ElementLabel::new(bra, ket)
            )));
        }
        let population = subspace_population(dims, bra, ket, &diag_values);
        let mut low = false;
        let mut signed_sum = 0.0;
        for (setting, sign) in &settings {
            let counts = table.setting(&setting.label()).expect("checked above");
            let (num, den) = conditional_correlator(counts, bra, ket, dims.parties());
            low |= den < LOW_STATISTICS_COUNTS;
            let conditional = if den > 0.0 { num / den } else { 0.0 };
            signed_sum += sign * conditional * population;
        }
        let mut e = ElementEstimate::new(
            ElementLabel::new(bra, ket),
            signed_sum / f64::from(1u32 << m),
            0.0,
        );
        e.low_statistics = low;
        offdiagonals.push(e);
    }
    Ok(ElementEstimates {
        diagonals,
        offdiagonals,
    })
}

/// Σ of diagonal estimates over `{bra_p, ket_p}` per party.
fn subspace_population(dims: &Dims, bra: &[usize], ket: &[usize], diag: &[f64]) -> f64 {
    let mut combos: Vec<Vec<usize>> = vec![Vec::new()];
    for p in 0..dims.parties() {
        let mut levels = vec![bra[p]];
        if ket[p] != bra[p] {
            levels.push(ket[p]);
        }
        combos = combos
            .into_iter()
            .flat_map(|prefix| {
                levels.iter().map(move |&l| {
                    let mut v = prefix.clone();
                    v.push(l);
                    v
                })
            })
            .collect();
    }
    combos.iter().map(|d| diag[dims.index(d)]).sum()
}

/// (Σ sign·n, Σ n) over the outcomes inside the element's subspace: σ parties
/// on `±`, fixed parties on their level.
fn conditional_correlator(
    counts: &BTreeMap<String, f64>,
    bra: &[usize],
    ket: &[usize],
    parties: usize,
) -> (f64, f64) {
    let mut num = 0.0;
    let mut den = 0.0;
    'outcomes: for (outcome, &n) in counts {
        let Some(tokens) = outcome_tokens(outcome, parties) else {
            continue;
        };
        let mut sign = 1.0;
        for p in 0..parties {
            let t = tokens[p];
            if bra[p] != ket[p] {
                match t {
                    '+' => {}
                    '-' => sign = -sign,
                    _ => continue 'outcomes,
                }
            } else if t.to_digit(36) != Some(bra[p] as u32) {
                continue 'outcomes;
            }
        }
        num += sign * n;
        den += n;
    }
    (num, den)
}

/// Monte Carlo error propagation result.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MonteCarloReport {
    /// Point estimates from the observed counts, with Monte Carlo σ.
    pub estimates: ElementEstimates,
    pub fidelity: Measured,
    pub subspace: Vec<SubspaceEstimate>,
    pub trials: usize,
    /// Fewer than 100 trials: the spread is not a usable error bar.
    pub degenerate: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SubspaceEstimate {
    pub kets: [String; 2],
    pub fidelity: Measured,
}

fn sample_std(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = values.clone().count();
    if n < 2 {
        return 0.0;
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    var.sqrt()
}

/// Resamples every count as `Poisson(observed)` `trials` times and reports
/// the sample standard deviation of each element, of the target fidelity
/// and of the six subspace fidelities. Trial `t` uses stream `t` of the
/// seeded generator, so the result does not depend on scheduling.
pub fn monte_carlo_errors(
    table: &CountTable,
    trials: usize,
    seed: u64,
) -> Result<MonteCarloReport> {
    if trials == 0 {
        return Err(Error::EmptySamples("zero Monte Carlo trials".into()));
    }
    let mut estimates = estimate_elements(table)?;
    let fidelity = estimates.fidelity()?;
    let pairs = signal_pairs();
    let subspace_point = pairs
        .iter()
        .map(|(a, b)| estimates.subspace_fidelity(a, b))
        .collect::<Result<Vec<_>>>()?;

    let samples: Vec<(Vec<f64>, f64, Vec<f64>)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            let resampled = table.resample(&mut rng);
            let e = estimate_elements(&resampled)?;
            let f = e.fidelity()?;
            let sub = pairs
                .iter()
                .map(|(a, b)| e.subspace_fidelity(a, b))
                .collect::<Result<Vec<_>>>()?;
            Ok((e.iter().map(|x| x.value).collect(), f, sub))
        })
        .collect::<Result<_>>()?;

    for (i, e) in estimates.iter_mut().enumerate() {
        e.std_dev = sample_std(samples.iter().map(|s| s.0[i]));
    }
    let fidelity_std = sample_std(samples.iter().map(|s| s.1));
    let subspace = pairs
        .iter()
        .zip(subspace_point)
        .enumerate()
        .map(|(k, ((a, b), value))| SubspaceEstimate {
            kets: [ket_label(a), ket_label(b)],
            fidelity: Measured::new(value, sample_std(samples.iter().map(|s| s.2[k]))),
        })
        .collect();
    Ok(MonteCarloReport {
        estimates,
        fidelity: Measured::new(fidelity, fidelity_std),
        subspace,
        trials,
        degenerate: trials < 100,
    })
}

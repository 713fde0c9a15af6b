use std::fmt;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context};
use clap::Args;
use serde::Serialize;
use serde_json::{json, Value};

use layered_core::fixtures::{density_elements, layer_qbers, subspace_fidelities};
use layered_core::photonic::{apply_white_noise, make_psi442, prepare_psi442};
use layered_core::qkd::{
    asymptotic_key_rate, qbers_from_counts, qbers_from_samples, sample_rounds, write_layer_csv,
    QberReport,
};
use layered_core::tensor::{ket_label, parse_ket, rank_vector};
use layered_core::tomo::{
    monte_carlo_errors, read_counts, simulate_counts, write_counts, write_estimates_csv,
    CountTable, ExperimentPlan, MonteCarloReport,
};
use layered_core::witness::{
    certify_dimensionality, fidelity_from_elements, fmax_class_bound, ghz_witness_value,
    max_overlap_bounded_rank, signal_pairs, ElementEstimate, RankVectorClass,
};
use layered_core::{DensityOperator, Measured};

use crate::config::RunConfig;

/// Internal inconsistency, reported with exit code 3.
#[derive(Debug)]
pub struct ConsistencyError(pub String);

impl fmt::Display for ConsistencyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "consistency check failed: {}", self.0)
    }
}

impl std::error::Error for ConsistencyError {}

/// Outcome of a command that produced valid output.
#[derive(Debug, PartialEq, Eq)]
pub enum Status {
    Success,
    /// The data do not certify the claim; exit code 1.
    NotCertified,
}

const REFERENCE_FIDELITY: Measured = Measured {
    value: 0.854,
    std_dev: 0.007,
};
const REFERENCE_MARGIN_SIGMA: f64 = 14.0;

/// Where count data come from.
#[derive(Debug, Clone, Default, Args)]
pub struct CountSource {
    /// Count file (JSON records); counts are simulated from the config when absent
    #[arg(long, value_name = "PATH")]
    pub counts: Option<PathBuf>,
}

struct Output<'a> {
    cfg: &'a RunConfig,
}

impl<'a> Output<'a> {
    fn new(cfg: &'a RunConfig) -> anyhow::Result<Self> {
        fs::create_dir_all(&cfg.out)
            .with_context(|| format!("could not create output directory {}", cfg.out.display()))?;
        Ok(Self { cfg })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.cfg.out.join(name)
    }

    fn create(&self, name: &str) -> anyhow::Result<BufWriter<File>> {
        let path = self.path(name);
        let file =
            File::create(&path).with_context(|| format!("could not create {}", path.display()))?;
        Ok(BufWriter::new(file))
    }

    fn now(&self) -> Option<u64> {
        self.cfg.timestamp.then(|| {
            SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0)
        })
    }

    /// Writes `report` with the run parameters and seed alongside.
    fn json(&self, name: &str, report: Value) -> anyhow::Result<PathBuf> {
        let mut doc = json!({
            "seed": self.cfg.seed,
            "run": self.cfg,
            "report": report,
        });
        if let Some(t) = self.now() {
            doc["generated_at_unix"] = json!(t);
        }
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, &doc)?;
        writeln!(w)?;
        w.flush()?;
        Ok(self.path(name))
    }

    /// CSV with a leading `# seed=...` comment line.
    fn csv(
        &self,
        name: &str,
        body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>,
    ) -> anyhow::Result<PathBuf> {
        let mut w = self.create(name)?;
        write!(w, "# seed={}", self.cfg.seed)?;
        if let Some(t) = self.now() {
            write!(w, " generated_at_unix={t}")?;
        }
        writeln!(w)?;
        body(&mut w)?;
        w.flush()?;
        Ok(self.path(name))
    }
}

fn noisy_state(cfg: &RunConfig) -> anyhow::Result<DensityOperator> {
    Ok(apply_white_noise(&make_psi442(), cfg.visibility)?)
}

fn plan(cfg: &RunConfig) -> ExperimentPlan {
    ExperimentPlan::standard(cfg.rate, cfg.integration_time)
}

fn load_counts(source: &CountSource, cfg: &RunConfig) -> anyhow::Result<(CountTable, String)> {
    match &source.counts {
        Some(path) => {
            let file =
                File::open(path).with_context(|| format!("could not open {}", path.display()))?;
            let records = read_counts(BufReader::new(file))
                .with_context(|| format!("invalid count file {}", path.display()))?;
            Ok((
                CountTable::from_records(&records),
                path.display().to_string(),
            ))
        }
        None => {
            let records = simulate_counts(&noisy_state(cfg)?, &plan(cfg), cfg.seed)?;
            Ok((CountTable::from_records(&records), "simulation".into()))
        }
    }
}

fn element_rows(elements: &[ElementEstimate]) -> Vec<Value> {
    elements
        .iter()
        .map(|e| {
            json!({
                "label": e.label.to_string(),
                "value": e.value,
                "std_dev": e.std_dev,
                "low_statistics": e.low_statistics,
            })
        })
        .collect()
}

fn show(path: &Path) {
    println!("wrote {}", path.display());
}

pub fn gen_state(cfg: &RunConfig) -> anyhow::Result<Status> {
    let prep = prepare_psi442()?;
    let closed = make_psi442();
    let distance = prep.state.distance(&closed)?;
    if distance > 1e-12 {
        return Err(ConsistencyError(format!(
            "circuit state differs from closed form by {distance:e}"
        ))
        .into());
    }
    let ranks = rank_vector(&prep.state, None)?;
    if ranks.as_slice() != [4, 4, 2] {
        return Err(ConsistencyError(format!("rank vector {ranks}, expected (4, 4, 2)")).into());
    }
    let fidelity = noisy_state(cfg)?.fidelity_pure(&closed)?;
    let dims = prep.state.dims();
    let amplitudes: Vec<Value> = (0..dims.total())
        .map(|i| {
            let a = prep.state.amplitudes()[i];
            json!({ "ket": ket_label(&dims.digits(i)), "re": a.re, "im": a.im })
        })
        .collect();
    let report = json!({
        "dims": dims.as_slice(),
        "amplitudes": amplitudes,
        "rank_vector": ranks.as_slice(),
        "circuit_distance": distance,
        "fusion_probability": prep.fusion_probability,
        "doubling_probability": prep.doubling_probability,
        "visibility": cfg.visibility,
        "fidelity": fidelity,
        "reference": {
            "rank_vector": [4, 4, 2],
            "fusion_probability": 0.5,
            "doubling_probability": 0.5,
        },
    });
    let out = Output::new(cfg)?;
    show(&out.json("state.json", report)?);
    println!("rank vector {ranks}, circuit distance {distance:.1e}, fidelity {fidelity:.6}");
    Ok(Status::Success)
}

pub fn simulate(cfg: &RunConfig) -> anyhow::Result<Status> {
    let plan = plan(cfg);
    let records = simulate_counts(&noisy_state(cfg)?, &plan, cfg.seed)?;
    let out = Output::new(cfg)?;
    let mut w = out.create("counts.json")?;
    write_counts(&mut w, &records)?;
    writeln!(w)?;
    w.flush()?;
    show(&out.path("counts.json"));
    let labels: Vec<String> = plan.settings.iter().map(|s| s.label()).collect();
    let meta = json!({
        "settings": labels,
        "expected_counts_per_setting": plan.counts_per_setting(),
        "records": records.len(),
        "total_counts": records.iter().map(|r| r.counts).sum::<u64>(),
    });
    show(&out.json("simulation.json", meta)?);
    Ok(Status::Success)
}

fn monte_carlo(table: &CountTable, cfg: &RunConfig) -> anyhow::Result<MonteCarloReport> {
    let mc = monte_carlo_errors(table, cfg.monte_carlo_trials, cfg.seed)?;
    if mc.degenerate {
        eprintln!(
            "warning: {} Monte Carlo trials; at least 100 are needed for usable error bars",
            mc.trials
        );
    }
    Ok(mc)
}

pub fn estimate(cfg: &RunConfig, source: &CountSource) -> anyhow::Result<Status> {
    let (table, origin) = load_counts(source, cfg)?;
    let mc = monte_carlo(&table, cfg)?;
    let out = Output::new(cfg)?;
    show(&out.csv("elements.csv", |w| {
        write_estimates_csv(w, mc.estimates.iter())
    })?);
    let report = json!({
        "counts": origin,
        "diagonals": element_rows(&mc.estimates.diagonals),
        "offdiagonals": element_rows(&mc.estimates.offdiagonals),
        "fidelity": mc.fidelity,
        "trials": mc.trials,
        "degenerate": mc.degenerate,
    });
    show(&out.json("estimates.json", report)?);
    println!("F = {:.4} ± {:.4}", mc.fidelity.value, mc.fidelity.std_dev);
    Ok(Status::Success)
}

#[derive(Debug, Clone, Default, Args)]
pub struct WitnessArgs {
    #[command(flatten)]
    pub source: CountSource,
    /// Use the bundled published element table instead of counts
    #[arg(long, conflicts_with = "counts")]
    pub fixture: bool,
}

pub fn witness(cfg: &RunConfig, args: &WitnessArgs) -> anyhow::Result<Status> {
    let bound = fmax_class_bound(&make_psi442(), &RankVectorClass::new(vec![4, 3, 2]))?;
    let (diagonals, offdiagonals, fidelity, origin, trials) = if args.fixture {
        let table = density_elements();
        let f = fidelity_from_elements(&table.diagonals, &table.offdiagonals)?;
        let m = Measured::new(f, table.fidelity.std_dev);
        (
            table.diagonals,
            table.offdiagonals,
            m,
            "published elements".to_string(),
            None,
        )
    } else {
        let (table, origin) = load_counts(&args.source, cfg)?;
        let mc = monte_carlo(&table, cfg)?;
        let trials = mc.trials;
        (
            mc.estimates.diagonals,
            mc.estimates.offdiagonals,
            mc.fidelity,
            origin,
            Some(trials),
        )
    };
    if fidelity.std_dev <= 0.0 {
        bail!("the fidelity has no spread; use at least 2 Monte Carlo trials");
    }
    let cert = certify_dimensionality(fidelity.value, fidelity.std_dev, bound)?;
    let report = json!({
        "source": origin,
        "trials": trials,
        "diagonals": element_rows(&diagonals),
        "offdiagonals": element_rows(&offdiagonals),
        "fidelity": fidelity,
        "bound": bound,
        "margin_sigma": cert.margin_sigma,
        "certified": cert.certified,
        "reference": {
            "fidelity": REFERENCE_FIDELITY,
            "bound": 0.75,
            "margin_sigma": REFERENCE_MARGIN_SIGMA,
        },
    });
    let out = Output::new(cfg)?;
    show(&out.json("witness.json", report)?);
    println!(
        "F = {:.4} ± {:.4}, bound {bound:.3}, margin {:.1} sigma: {}",
        fidelity.value,
        fidelity.std_dev,
        cert.margin_sigma,
        if cert.certified {
            "certified"
        } else {
            "not certified"
        }
    );
    Ok(if cert.certified {
        Status::Success
    } else {
        Status::NotCertified
    })
}

#[derive(Debug, Clone, Default, Args)]
pub struct SubspaceArgs {
    #[command(flatten)]
    pub source: CountSource,
    /// Pair of signal kets, e.g. `000,111`; repeatable. All six pairs when absent
    #[arg(long = "kets", value_name = "KET,KET")]
    pub pairs: Vec<String>,
}

fn parse_pair(text: &str) -> anyhow::Result<(Vec<usize>, Vec<usize>)> {
    let Some((a, b)) = text.split_once(',') else {
        bail!("expected two kets separated by a comma, got {text:?}");
    };
    let (a, b) = (parse_ket(a.trim())?, parse_ket(b.trim())?);
    let known = signal_pairs()
        .iter()
        .any(|(x, y)| (x[..] == a[..] && y[..] == b[..]) || (x[..] == b[..] && y[..] == a[..]));
    if !known {
        bail!("{text:?} is not a pair of distinct signal kets (000, 111, 220, 331)");
    }
    Ok((a, b))
}

pub fn subspace(cfg: &RunConfig, args: &SubspaceArgs) -> anyhow::Result<Status> {
    let reference = subspace_fidelities();
    let pairs = if args.pairs.is_empty() {
        reference
            .iter()
            .map(|e| {
                let [a, b] = e.ket_digits();
                (a, b)
            })
            .collect()
    } else {
        args.pairs
            .iter()
            .map(|p| parse_pair(p))
            .collect::<anyhow::Result<Vec<_>>>()?
    };
    let (table, origin) = load_counts(&args.source, cfg)?;
    let mc = monte_carlo(&table, cfg)?;
    let mut entries = Vec::new();
    let mut all_witnessed = true;
    for (a, b) in &pairs {
        let (la, lb) = (ket_label(a), ket_label(b));
        let found = mc
            .subspace
            .iter()
            .find(|s| (s.kets[0] == la && s.kets[1] == lb) || (s.kets[0] == lb && s.kets[1] == la))
            .expect("every signal pair is estimated");
        let w = ghz_witness_value(found.fidelity.value.clamp(0.0, 1.0))?;
        all_witnessed &= w.witnessed;
        let published = reference
            .iter()
            .find(|e| (e.kets[0] == la && e.kets[1] == lb) || (e.kets[0] == lb && e.kets[1] == la))
            .map(|e| Measured::new(e.value, e.std_dev));
        println!(
            "{la}/{lb}: F = {:.4} ± {:.4} {}",
            found.fidelity.value,
            found.fidelity.std_dev,
            if w.witnessed {
                "GME"
            } else {
                "no GME witnessed"
            }
        );
        entries.push(json!({
            "kets": [la, lb],
            "fidelity": found.fidelity,
            "witness_expectation": w.expectation,
            "gme": w.witnessed,
            "reference": published,
        }));
    }
    let report = json!({
        "counts": origin,
        "threshold": 0.5,
        "trials": mc.trials,
        "entries": entries,
    });
    let out = Output::new(cfg)?;
    show(&out.json("subspace.json", report)?);
    Ok(if all_witnessed {
        Status::Success
    } else {
        Status::NotCertified
    })
}

#[derive(Debug, Clone, Default, Args)]
pub struct QkdArgs {
    #[command(flatten)]
    pub source: CountSource,
    /// Use the bundled published QBERs
    #[arg(long, conflicts_with = "counts")]
    pub fixture: bool,
    /// Rounds per basis when sampling from the simulated state
    #[arg(long, default_value_t = 100_000)]
    pub rounds: usize,
}

pub fn qkd(cfg: &RunConfig, args: &QkdArgs) -> anyhow::Result<Status> {
    let published = layer_qbers();
    let (reports, origin): (Vec<QberReport>, String) = if args.fixture {
        (
            published.iter().map(QberReport::from_fixture).collect(),
            "published QBERs".into(),
        )
    } else if args.source.counts.is_some() {
        let (table, origin) = load_counts(&args.source, cfg)?;
        (qbers_from_counts(&table)?, origin)
    } else {
        if args.rounds == 0 {
            bail!("--rounds must be positive");
        }
        let samples = sample_rounds(&noisy_state(cfg)?, args.rounds, cfg.seed)?;
        (
            qbers_from_samples(&samples)?,
            format!("{} sampled rounds per basis", args.rounds),
        )
    };
    let out = Output::new(cfg)?;
    show(&out.csv("qkd.csv", |w| write_layer_csv(w, &reports))?);

    #[derive(Serialize)]
    struct Row<'a> {
        qber: &'a QberReport,
        key_per_round_mean: f64,
        key_per_round_pessimistic: f64,
        reference_key_per_round: f64,
        difference: f64,
    }
    let rows: Vec<Row> = reports
        .iter()
        .map(|r| {
            let key = asymptotic_key_rate(r);
            let reference = published
                .iter()
                .find(|p| p.layer == r.layer)
                .map(|p| p.key_per_round)
                .expect("every layer is published");
            println!(
                "{}: rate {:.4} (pessimistic {:.4}), reference {reference:.3}",
                r.layer, key.rate_mean, key.rate_pessimistic
            );
            Row {
                qber: r,
                key_per_round_mean: key.rate_mean,
                key_per_round_pessimistic: key.rate_pessimistic,
                reference_key_per_round: reference,
                difference: key.rate_mean - reference,
            }
        })
        .collect();
    let report = json!({ "source": origin, "layers": rows });
    show(&out.json("qkd.json", report)?);
    Ok(Status::Success)
}

#[derive(Debug, Clone, Args)]
pub struct FmaxArgs {
    /// Rank vector of the class, e.g. `4,3,2`
    #[arg(long, default_value = "4,3,2", value_delimiter = ',')]
    pub ranks: Vec<usize>,
}

pub fn fmax(cfg: &RunConfig, args: &FmaxArgs) -> anyhow::Result<Status> {
    let psi = make_psi442();
    let class = RankVectorClass::new(args.ranks.clone());
    let members = class.members(psi.dims())?;
    let bound = fmax_class_bound(&psi, &class)?;
    let mut per_member = Vec::new();
    for m in &members {
        let cuts: Vec<f64> = (0..m.len())
            .map(|p| max_overlap_bounded_rank(&psi, &[p], m[p]))
            .collect::<Result<_, _>>()?;
        per_member.push(json!({ "ranks": m, "single_cut_bounds": cuts }));
    }
    let report = json!({
        "target_rank_vector": [4, 4, 2],
        "class": args.ranks,
        "members": per_member,
        "bound": bound,
        "reference": { "class": [4, 3, 2], "bound": 0.75 },
    });
    let out = Output::new(cfg)?;
    show(&out.json("fmax.json", report)?);
    println!("F_max = {bound:.6} over {} class members", members.len());
    Ok(Status::Success)
}

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use selftune_core::certifier::{
    build_certificate, empirical_convergence, manifold_membership, ConvergenceTrials, HarnessMode, LipschitzBounds,
    SweepConfig,
};
use selftune_core::learner::{replay_report, run_learning, LearnConfig, LearningReport};
use selftune_core::metrics::{analyze_response, MetricConventions};
use selftune_core::policy::dataset::{dataset_hash, read_csv, write_csv};
use selftune_core::policy::{generate_dataset, train, PolicyModel, SamplingConfig, TrainConfig};
use selftune_core::presets::{self, Start};
use selftune_core::sim::plant_file::PlantSpec;
use selftune_core::sim::{closed_loop_step, ControllerParams, Plant, SimConfig};

use crate::artifacts::{write_report, OutDir, Stamp};
use crate::{exit, Cli, Command, PlantPreset, Scenario, EXIT_FAILED, EXIT_MISSING_STAGE, EXIT_PLANT_FILE};

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(a) => simulate(cli, a),
        Command::GenDataset(a) => gen_dataset(cli, a).map(|_| ()),
        Command::Train(a) => train_cmd(cli, a),
        Command::Learn(a) => learn(cli, a),
        Command::Certify(a) => certify(cli, a),
        Command::Replay(a) => replay(a),
        Command::Demo(a) => demo(cli, a),
        Command::Sweep(a) => sweep(cli, a),
    }
}

fn parse_triple(s: &str) -> Result<[f64; 3], String> {
    let v = parse_list(s)?;
    v.try_into().map_err(|v: Vec<f64>| format!("expected 3 comma-separated numbers, got {}", v.len()))
}

fn parse_pair(s: &str) -> Result<[f64; 2], String> {
    let v = parse_list(s)?;
    v.try_into().map_err(|v: Vec<f64>| format!("expected 2 comma-separated numbers, got {}", v.len()))
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}"))).collect()
}

fn preset_plant(p: PlantPreset) -> Plant {
    let tf = match p {
        PlantPreset::CaseA => presets::circuit_tf(),
        PlantPreset::WingspanA => presets::wingspan_a_tf(),
        PlantPreset::WingspanB => presets::wingspan_b_tf(),
        PlantPreset::FirstOrder => presets::first_order_tf(),
    };
    Plant::from_tf(&tf)
}

fn load_plant(path: &Path) -> Result<(Plant, PlantSpec)> {
    if !path.exists() {
        return Err(exit(EXIT_PLANT_FILE, format!("plant file not found: {}", path.display())));
    }
    let spec = PlantSpec::load(path).with_context(|| format!("cannot read plant file {}", path.display()))?;
    Ok((spec.build()?, spec))
}

fn require(path: &Path, stage: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(exit(
            EXIT_MISSING_STAGE,
            format!("missing {stage} output: {} not found (run `selftune {stage}` first)", path.display()),
        ))
    }
}

fn preset_learning(p: PlantPreset, seed: u64) -> Result<LearnConfig> {
    Ok(match p {
        PlantPreset::CaseA => presets::circuit_learning(seed),
        PlantPreset::WingspanA | PlantPreset::WingspanB => presets::wingspan_learning(seed)?,
        PlantPreset::FirstOrder => bail!("no learning preset for the first-order plant; pass --config"),
    })
}

fn preset_sim(p: PlantPreset) -> (SimConfig, MetricConventions) {
    match p {
        PlantPreset::CaseA => (presets::circuit_sim(), presets::circuit_conventions()),
        PlantPreset::WingspanA | PlantPreset::WingspanB => (presets::wingspan_sim(), presets::wingspan_conventions()),
        PlantPreset::FirstOrder => (SimConfig::new(1e-3, 20.0), MetricConventions::default()),
    }
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long, value_enum, conflicts_with = "plant", required_unless_present = "plant")]
    pub preset: Option<PlantPreset>,
    /// JSON plant definition.
    #[arg(long)]
    pub plant: Option<PathBuf>,
    /// Kp,Ki,Kd.
    #[arg(long, value_parser = parse_triple, allow_hyphen_values = true)]
    pub gains: [f64; 3],
    #[arg(long, default_value_t = presets::START_FILTER)]
    pub filter_n: f64,
    #[arg(long, default_value_t = 1.0)]
    pub setpoint: f64,
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub plot: bool,
}

#[derive(Serialize)]
struct SimulateSummary<'a> {
    #[serde(flatten)]
    stamp: Stamp,
    plant: String,
    params: ControllerParams,
    setpoint: f64,
    sim: &'a SimConfig,
    conventions: MetricConventions,
    diverged: bool,
    samples: usize,
    indicators: Option<[f64; 4]>,
}

fn simulate(cli: &Cli, a: &SimulateArgs) -> Result<()> {
    let (plant, label, (mut sim, conv)) = match (&a.plant, a.preset) {
        (Some(path), _) => {
            let (plant, _) = load_plant(path)?;
            (plant, path.display().to_string(), (SimConfig::new(1e-4, 10.0), MetricConventions::default()))
        }
        (None, Some(p)) => (preset_plant(p), format!("{p:?}"), preset_sim(p)),
        (None, None) => unreachable!("clap requires one of them"),
    };
    if let Some(h) = a.step {
        sim.step = h;
    }
    if let Some(t) = a.horizon {
        sim.horizon = t;
    }
    let params = ControllerParams::new(a.gains[0], a.gains[1], a.gains[2], a.filter_n)?;
    let traj = closed_loop_step(&plant, &params, a.setpoint, &sim)?;
    let indicators = if traj.diverged {
        None
    } else {
        analyze_response(&traj, a.setpoint, &conv).ok().map(|r| r.indicators.to_array())
    };
    let out = OutDir::create(&cli.out_dir)?;
    let mut csv = Vec::new();
    traj.write_csv(&mut csv)?;
    let csv_path = out.write("simulate.csv", csv)?;
    let summary = SimulateSummary {
        stamp: Stamp::new(cli.seed, &(&label, &params, a.setpoint, &sim)),
        plant: label,
        params,
        setpoint: a.setpoint,
        sim: &sim,
        conventions: conv,
        diverged: traj.diverged,
        samples: traj.len(),
        indicators,
    };
    out.write_json("simulate.json", &summary)?;
    if a.plot {
        let pts = traj.t.iter().zip(&traj.y).step_by((traj.len() / 2000).max(1)).map(|(t, y)| (*t, *y)).collect();
        let svg = selftune_core::learner::svg::line_chart(
            "Step response",
            "t [s]",
            "y",
            &[selftune_core::learner::svg::Series::new("y", pts)],
        );
        out.write("simulate.svg", svg)?;
    }
    println!("{}", csv_path.display());
    match indicators {
        Some([os, sse, tr, ts]) => println!("overshoot {os:.6}  sse {sse:.6}  rise {tr:.6} s  settle {ts:.6} s"),
        None if traj.diverged => println!("diverged at t = {:.4} s", traj.horizon()),
        None => println!("indicators not measurable"),
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct GenDatasetArgs {
    #[arg(long, value_enum, default_value = "case-a")]
    pub preset: Scenario,
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(Serialize, Deserialize)]
struct DatasetSummary {
    seed: u64,
    config_sha256: String,
    dataset_sha256: String,
    scenario: String,
    expert: ControllerParams,
    sampling: SamplingConfig,
    sim: SimConfig,
    conventions: MetricConventions,
    records: usize,
    valid: usize,
    diverged: usize,
    unmeasurable: usize,
}

fn scenario_setup(s: Scenario) -> (Plant, ControllerParams, SimConfig, MetricConventions) {
    match s {
        Scenario::CaseA => (
            Plant::from_tf(&presets::circuit_tf()),
            presets::circuit_expert(),
            presets::circuit_sim(),
            presets::circuit_conventions(),
        ),
        // both wing states share one model trained on the retracted wing
        Scenario::CaseB => (
            Plant::from_tf(&presets::wingspan_a_tf()),
            presets::wingspan_expert(),
            presets::wingspan_sim(),
            presets::wingspan_conventions(),
        ),
    }
}

fn gen_dataset_into(out: &OutDir, scenario: Scenario, samples: Option<usize>, seed: u64) -> Result<PathBuf> {
    let (plant, expert, sim, conv) = scenario_setup(scenario);
    let mut sampling = match scenario {
        Scenario::CaseA => presets::circuit_sampling(seed),
        Scenario::CaseB => presets::wingspan_sampling(seed),
    };
    if let Some(n) = samples {
        sampling.samples = n;
    }
    let ds = generate_dataset(&expert, &plant, &sim, &conv, &sampling)?;
    let mut buf = Vec::new();
    write_csv(&ds.records, &mut buf)?;
    let path = out.write("dataset.csv", buf)?;
    let summary = DatasetSummary {
        seed,
        config_sha256: crate::artifacts::sha256_json(&(&expert, &sampling, &sim, &conv)),
        dataset_sha256: dataset_hash(&ds.records),
        scenario: format!("{scenario:?}"),
        expert,
        sampling,
        sim,
        conventions: conv,
        records: ds.records.len(),
        valid: ds.valid,
        diverged: ds.diverged,
        unmeasurable: ds.unmeasurable,
    };
    out.write_json("dataset.json", &summary)?;
    eprintln!(
        "dataset: {} records ({} valid, {} diverged, {} unmeasurable)",
        summary.records, summary.valid, summary.diverged, summary.unmeasurable
    );
    Ok(path)
}

fn gen_dataset(cli: &Cli, a: &GenDatasetArgs) -> Result<PathBuf> {
    let out = OutDir::create(&cli.out_dir)?;
    let p = gen_dataset_into(&out, a.preset, a.samples, cli.seed)?;
    println!("{}", p.display());
    Ok(p)
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Defaults to `<out-dir>/dataset.csv`.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
}

fn train_into(out: &OutDir, dataset: &Path, epochs: Option<usize>, seed: u64) -> Result<PathBuf> {
    require(dataset, "gen-dataset")?;
    let records = read_csv(fs::File::open(dataset)?)?;
    let mut cfg: TrainConfig = presets::training(seed);
    if let Some(e) = epochs {
        cfg.epochs = e;
    }
    let mut model = train(&records, &cfg)?.model;
    let sidecar = dataset.with_extension("json");
    if let Ok(text) = fs::read_to_string(&sidecar) {
        if let Ok(s) = serde_json::from_str::<DatasetSummary>(&text) {
            model.metadata.expert = Some(s.expert);
            model.metadata.alpha = Some(s.sampling.alpha);
        }
    }
    let path = out.path("model.json");
    model.save(&path)?;
    eprintln!(
        "model: train mse {:.4}, validation mse {:.4}",
        model.metadata.train_mse, model.metadata.validation_mse
    );
    Ok(path)
}

fn train_cmd(cli: &Cli, a: &TrainArgs) -> Result<()> {
    let out = OutDir::create(&cli.out_dir)?;
    let dataset = a.dataset.clone().unwrap_or_else(|| out.path("dataset.csv"));
    let p = train_into(&out, &dataset, a.epochs, cli.seed)?;
    println!("{}", p.display());
    Ok(())
}

#[derive(Args, Debug)]
pub struct LearnArgs {
    #[arg(long, value_enum, default_value = "case-a")]
    pub preset: PlantPreset,
    /// JSON plant definition; overrides the preset plant.
    #[arg(long)]
    pub plant: Option<PathBuf>,
    /// Named start: case-a-text, case-a-figure, random or wingspan.
    #[arg(long, conflicts_with = "gains")]
    pub start: Option<String>,
    /// Kp,Ki,Kd of the starting controller.
    #[arg(long, value_parser = parse_triple)]
    pub gains: Option<[f64; 3]>,
    #[arg(long, default_value_t = presets::START_FILTER)]
    pub filter_n: f64,
    /// Defaults to `<out-dir>/model.json`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Full learning configuration as JSON; replaces the preset.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    /// L1,L2; certify every accepted controller against these bounds.
    #[arg(long, value_parser = parse_pair)]
    pub lipschitz: Option<[f64; 2]>,
    #[arg(long)]
    pub plot: bool,
}

#[derive(Serialize)]
struct AcceptedCertificate {
    iter: usize,
    gains: [f64; 3],
    member: bool,
    smallest_margin: f64,
}

fn default_start(p: PlantPreset) -> Start {
    match p {
        PlantPreset::WingspanA | PlantPreset::WingspanB => Start::Wingspan,
        _ => Start::CaseAText,
    }
}

fn learn(cli: &Cli, a: &LearnArgs) -> Result<()> {
    let out = OutDir::create(&cli.out_dir)?;
    let model_path = a.model.clone().unwrap_or_else(|| out.path("model.json"));
    let plant = match &a.plant {
        Some(p) => load_plant(p)?.0,
        None => preset_plant(a.preset),
    };
    require(&model_path, "train")?;
    let model = PolicyModel::load(&model_path)?;
    let mut cfg = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("cannot read config {}", p.display()))?;
            serde_json::from_str::<LearnConfig>(&text).with_context(|| format!("bad config {}", p.display()))?
        }
        None => preset_learning(a.preset, cli.seed)?,
    };
    cfg.seed = cli.seed;
    if let Some(n) = a.max_iterations {
        cfg.max_iterations = n;
    }
    let (init, name) = match (a.gains, &a.start) {
        (Some(g), _) => (ControllerParams::new(g[0], g[1], g[2], a.filter_n)?, "custom".to_string()),
        (None, Some(s)) => {
            let start = Start::from_name(s).ok_or_else(|| anyhow::anyhow!("unknown start {s:?}"))?;
            (start.params(), start.name().to_string())
        }
        (None, None) => {
            let s = default_start(a.preset);
            (s.params(), s.name().to_string())
        }
    };
    let report = run_learning(&plant, &init, &model, &cfg)?;
    let dir = out.sub(&format!("learn-{}-{name}", preset_slug(a.preset)))?;
    let written = write_report(&dir, &report, &plant, a.plot)?;
    if let Some([l1, l2]) = a.lipschitz {
        let bounds = LipschitzBounds::new(l1, l2)?;
        let certs = report
            .rows
            .iter()
            .filter(|r| r.indicators.is_some())
            .map(|r| -> Result<AcceptedCertificate> {
                let m = manifold_membership(r.params.gains(), bounds)?;
                Ok(AcceptedCertificate {
                    iter: r.iter,
                    gains: r.params.gains(),
                    member: m.member,
                    smallest_margin: m.margins.smallest(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        dir.write_json("certificates.json", &certs)?;
    }
    print_report(&report);
    println!("{}", written.summary.display());
    if !report.converged() {
        return Err(exit(EXIT_FAILED, "iteration budget exhausted before the cost threshold was met"));
    }
    Ok(())
}

fn preset_slug(p: PlantPreset) -> &'static str {
    match p {
        PlantPreset::CaseA => "case-a",
        PlantPreset::WingspanA => "wingspan-a",
        PlantPreset::WingspanB => "wingspan-b",
        PlantPreset::FirstOrder => "first-order",
    }
}

fn print_report(r: &LearningReport) {
    let [os, sse, tr, ts] = r.best_indicators.to_array();
    let [k1, k2, k3] = r.best_params.gains();
    println!(
        "{:?} after {} iterations ({} penalized); best at iteration {}: gains ({k1:.4}, {k2:.4}, {k3:.4}), cost {:.5}",
        r.status,
        r.rows.len(),
        r.penalties(),
        r.best_iteration,
        r.best_cost
    );
    println!("  overshoot {:.3}%  sse {sse:.5}  rise {tr:.4} s  settle {ts:.4} s", 100.0 * os);
}

#[derive(Args, Debug)]
pub struct CertifyArgs {
    /// L1,L2.
    #[arg(long = "L", value_parser = parse_pair, required_unless_present = "config")]
    pub bounds: Option<[f64; 2]>,
    /// theta1,theta2,theta3.
    #[arg(long, value_parser = parse_triple, allow_hyphen_values = true, required_unless_present = "config")]
    pub theta: Option<[f64; 3]>,
    /// JSON file `{"l1": .., "l2": .., "theta": [..]}`.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Grid points per axis of the (l, p) sweep.
    #[arg(long, default_value_t = 101)]
    pub points: usize,
    /// Also simulate this many random plants from the bounded family.
    #[arg(long, default_value_t = 0)]
    pub trials: usize,
    /// Run the trials even outside the region, reporting only.
    #[arg(long)]
    pub falsify: bool,
}

#[derive(Deserialize)]
struct CertifyFile {
    l1: f64,
    l2: f64,
    theta: [f64; 3],
}

fn certify(cli: &Cli, a: &CertifyArgs) -> Result<()> {
    let (l, theta) = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
            let f: CertifyFile = serde_json::from_str(&text)?;
            ([f.l1, f.l2], f.theta)
        }
        None => (a.bounds.expect("required"), a.theta.expect("required")),
    };
    let bounds = LipschitzBounds::new(l[0], l[1])?;
    let sweep = SweepConfig {
        points: a.points,
        p_range: None,
    };
    let membership = manifold_membership(theta, bounds)?;
    let report = if membership.member {
        build_certificate(theta, bounds, &sweep)?
    } else {
        membership
    };
    let m = report.margins;
    println!("theta = ({}, {}, {}), L = ({}, {})", theta[0], theta[1], theta[2], l[0], l[1]);
    println!("member: {}", report.member);
    println!("  margin theta1 - L1:            {:+.6}", m.proportional);
    println!("  margin theta3 - L2:            {:+.6}", m.derivative);
    println!("  margin coupling condition:     {:+.6}", m.coupling);
    let mut ok = report.member;
    if let Some(c) = &report.certificate {
        println!("Gamma = {:.6}, p0 = {:.6}, w0 = {:.6}, w1 = {:.6}, w = {:.6}", c.gamma, c.p0, c.varpi0, c.varpi1, c.varpi);
        println!("M leading minors: {:.6?}", c.m_minors);
        println!("M eigenvalues:    {:.6?}", c.m_eigenvalues);
        println!("scalar conditions: {:.6?} (alternative third form {:.6})", c.conditions, c.alternative_third);
        println!(
            "P over {}x{} sweep: positive definite {}, min eigenvalue {:.6} at (l, p) = ({:.4}, {:.4}), closed-form error {:.2e}",
            c.sweep.points, c.sweep.points, c.sweep.positive_definite, c.sweep.min_lambda, c.sweep.argmin.0, c.sweep.argmin.1,
            c.sweep.max_closed_form_error
        );
        ok &= c.holds();
    }
    let trials = if a.trials > 0 {
        let cfg = ConvergenceTrials {
            trials: a.trials,
            seed: cli.seed,
            ..Default::default()
        };
        let mode = if a.falsify { HarnessMode::Falsify } else { HarnessMode::Assert };
        let stats = empirical_convergence(bounds, theta, &cfg, mode)?;
        println!(
            "trials: {}/{} converged, worst |x1 - y*| {:.2e}, worst |x2| {:.2e}, Lyapunov failures {}",
            stats.converged, stats.trials, stats.worst_position_error, stats.worst_rate, stats.lyapunov_failures
        );
        if !a.falsify {
            ok &= stats.converged == stats.trials && stats.lyapunov_failures == 0;
        }
        Some(stats)
    } else {
        None
    };
    #[derive(Serialize)]
    struct CertifyOut<'a> {
        #[serde(flatten)]
        stamp: Stamp,
        report: &'a selftune_core::certifier::ManifoldReport,
        trials: Option<selftune_core::certifier::ConvergenceStats>,
    }
    let out = OutDir::create(&cli.out_dir)?;
    let doc = CertifyOut {
        stamp: Stamp::new(cli.seed, &(l, theta, a.points, a.trials)),
        report: &report,
        trials,
    };
    out.write_json("certificate.json", &doc)?;
    println!("{}", serde_json::to_string(&doc.report)?);
    if !ok {
        return Err(exit(EXIT_FAILED, "gains are not certified for these bounds"));
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct ReplayArgs {
    /// `report.json` from a learning run.
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long, value_enum, conflicts_with = "plant", required_unless_present = "plant")]
    pub preset: Option<PlantPreset>,
    #[arg(long)]
    pub plant: Option<PathBuf>,
}

fn replay(a: &ReplayArgs) -> Result<()> {
    let plant = match (&a.plant, a.preset) {
        (Some(p), _) => load_plant(p)?.0,
        (None, Some(p)) => preset_plant(p),
        (None, None) => unreachable!(),
    };
    let text = fs::read_to_string(&a.report).with_context(|| format!("cannot read {}", a.report.display()))?;
    let report = LearningReport::from_json(&text)?;
    let v = replay_report(&report, &plant)?;
    println!("{}", serde_json::to_string_pretty(&v)?);
    if !v.pass {
        return Err(exit(EXIT_FAILED, "replayed indicators differ from the report"));
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct DemoArgs {
    #[arg(value_enum)]
    pub scenario: Scenario,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub no_plot: bool,
}

fn demo(cli: &Cli, a: &DemoArgs) -> Result<()> {
    let slug = match a.scenario {
        Scenario::CaseA => "demo-case-a",
        Scenario::CaseB => "demo-case-b",
    };
    let out = OutDir::create(&cli.out_dir)?.sub(slug)?;
    let dataset = gen_dataset_into(&out, a.scenario, a.samples, cli.seed)?;
    let model_path = train_into(&out, &dataset, None, cli.seed)?;
    let model = PolicyModel::load(&model_path)?;
    let runs: Vec<(&str, PlantPreset, Start)> = match a.scenario {
        Scenario::CaseA => vec![
            ("case-a-text", PlantPreset::CaseA, Start::CaseAText),
            ("case-a-figure", PlantPreset::CaseA, Start::CaseAFigure),
            ("random", PlantPreset::CaseA, Start::Random),
        ],
        Scenario::CaseB => vec![
            ("wingspan-a", PlantPreset::WingspanA, Start::Wingspan),
            ("wingspan-b", PlantPreset::WingspanB, Start::Wingspan),
        ],
    };
    let mut all_ok = true;
    for (name, preset, start) in runs {
        let plant = preset_plant(preset);
        let cfg = preset_learning(preset, cli.seed)?;
        let report = run_learning(&plant, &start.params(), &model, &cfg)?;
        let dir = out.sub(name)?;
        write_report(&dir, &report, &plant, !a.no_plot)?;
        let verdict = replay_report(&report, &plant)?;
        dir.write_json("replay.json", &verdict)?;
        println!("[{name}] start {:?}", start.gains());
        print_report(&report);
        println!("  replay {}", if verdict.pass { "pass" } else { "FAIL" });
        all_ok &= report.converged() && verdict.pass;
    }
    println!("{}", out.path("").display());
    if !all_ok {
        return Err(exit(EXIT_FAILED, "at least one demo run did not converge or replay"));
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long, value_enum, default_value = "case-a")]
    pub preset: PlantPreset,
    /// Number of random starting controllers.
    #[arg(long, default_value_t = 20)]
    pub starts: usize,
    /// Starting gains are drawn log-uniformly from [lo, hi] per component.
    #[arg(long, value_parser = parse_pair, default_value = "0.5,200")]
    pub range: [f64; 2],
    /// Defaults to `<out-dir>/model.json`.
    #[arg(long)]
    pub model: Option<PathBuf>,
}

fn sweep(cli: &Cli, a: &SweepArgs) -> Result<()> {
    let out = OutDir::create(&cli.out_dir)?;
    let model_path = a.model.clone().unwrap_or_else(|| out.path("model.json"));
    require(&model_path, "train")?;
    let model = PolicyModel::load(&model_path)?;
    let cfg = preset_learning(a.preset, cli.seed)?;
    let plant = preset_plant(a.preset);
    let [lo, hi] = a.range;
    if !(lo > 0.0 && hi >= lo) {
        bail!("range must satisfy 0 < lo <= hi");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
    let starts: Vec<[f64; 3]> = (0..a.starts)
        .map(|_| [0; 3].map(|_| (rng.gen_range(lo.ln()..=hi.ln())).exp()))
        .collect();
    let results: Vec<Result<LearningReport>> = starts
        .par_iter()
        .map(|g| {
            let init = ControllerParams::new(g[0], g[1], g[2], presets::START_FILTER)?;
            Ok(run_learning(&plant, &init, &model, &cfg)?)
        })
        .collect();
    let mut csv = String::from("run,k1_0,k2_0,k3_0,status,iterations,penalties,best_k1,best_k2,best_k3,best_J,best_overshoot\n");
    let mut converged = 0;
    for (i, (g, r)) in starts.iter().zip(&results).enumerate() {
        match r {
            Ok(r) => {
                converged += r.converged() as usize;
                let b = r.best_params.gains();
                csv.push_str(&format!(
                    "{i},{},{},{},{:?},{},{},{},{},{},{},{}\n",
                    g[0], g[1], g[2], r.status, r.rows.len(), r.penalties(), b[0], b[1], b[2], r.best_cost,
                    r.best_indicators.overshoot
                ));
            }
            Err(e) => csv.push_str(&format!("{i},{},{},{},error: {e},,,,,,,\n", g[0], g[1], g[2])),
        }
    }
    let dir = out.sub(&format!("sweep-{}", preset_slug(a.preset)))?;
    dir.write("sweep.csv", &csv)?;
    dir.write_json(
        "sweep.json",
        &serde_json::json!({
            "seed": cli.seed,
            "config_sha256": crate::artifacts::sha256_json(&cfg),
            "starts": a.starts,
            "range": a.range,
            "converged": converged,
            "config": cfg,
        }),
    )?;
    println!("{converged}/{} runs converged", a.starts);
    println!("{}", dir.path("sweep.csv").display());
    Ok(())
}

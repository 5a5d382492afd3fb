use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use subnetpc::baselines::{grid_oracle, grid_slack, wmmse, WmmseConfig};
use subnetpc::eval::{
    empirical_cdf, evaluate, gain_vs_baseline, robustness_sweep, summarize, MetricsRecord, Policy, Protocol,
    SweepParam, SweepSpec,
};
use subnetpc::gradcheck::check_model_gradients;
use subnetpc::graph::build_graph;
use subnetpc::io::{self, GainRow, Provenance};
use subnetpc::nn::AdamConfig;
use subnetpc::pcgnn::{Trainer, TrainingSet};
use subnetpc::{
    channel, Architecture, Dataset, Model, Model64, Normalizer, PcgnnModel, SeedDomain, SystemConfig, TrainConfig,
    Variant,
};

#[derive(Parser)]
#[command(
    name = "subnetpc",
    version,
    about = "GNN power control for dense wireless subnetworks"
)]
struct Cli {
    /// Repeat for more log output.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a snapshot dataset.
    Gen(GenArgs),
    /// Train a PCGNN model on a dataset.
    Train(TrainArgs),
    /// Evaluate models and baselines on a test dataset.
    Eval(EvalArgs),
    /// Robustness sweep over shadowing or density.
    Sweep(SweepArgs),
    /// Compare WMMSE with exhaustive grid search on small deployments.
    Oracle(OracleArgs),
    /// Finite-difference check of the network gradient.
    Gradcheck(GradcheckArgs),
}

/// Scenario parameters; defaults are the reference deployment.
#[derive(Args, Clone, Debug)]
struct SystemArgs {
    /// Number of subnetworks per snapshot, N.
    #[arg(long, default_value_t = 20)]
    n_subnetworks: usize,
    /// Deployment density in subnetworks/km²; overrides N for the given area.
    #[arg(long)]
    density: Option<f64>,
    /// Factory area side L, m.
    #[arg(long, default_value_t = 20.0)]
    area_side: f64,
    /// Subnetwork radius R, m.
    #[arg(long, default_value_t = 2.0)]
    cell_radius: f64,
    /// Minimum distance between controllers, m.
    #[arg(long, default_value_t = 2.0)]
    min_controller_separation: f64,
    /// Sensor to controller minimum distance, m.
    #[arg(long, default_value_t = 0.5)]
    min_device_distance: f64,
    /// Shadowing standard deviation λ, dB.
    #[arg(long, default_value_t = 7.0)]
    shadowing_std: f64,
    /// Path loss exponent r.
    #[arg(long, default_value_t = 2.7)]
    pathloss_exponent: f64,
    /// Maximum transmit power P_max, dBm.
    #[arg(long, default_value_t = 0.0)]
    max_power_dbm: f64,
    /// Bandwidth B, Hz.
    #[arg(long, default_value_t = 20e6)]
    bandwidth: f64,
    /// Center frequency f, Hz.
    #[arg(long, default_value_t = 6e9)]
    carrier_freq: f64,
    /// Noise figure NF, dB.
    #[arg(long, default_value_t = 10.0)]
    noise_figure: f64,
    /// Receiver temperature, K.
    #[arg(long, default_value_t = 290.0)]
    temperature: f64,
    /// Master seed for all snapshot streams.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SystemArgs {
    fn config(&self) -> Result<SystemConfig> {
        let cfg = SystemConfig {
            n_subnetworks: self.n_subnetworks,
            area_side: self.area_side,
            cell_radius: self.cell_radius,
            min_controller_separation: self.min_controller_separation,
            min_device_distance: self.min_device_distance,
            shadowing_std_db: self.shadowing_std,
            pathloss_exponent: self.pathloss_exponent,
            max_power: 10f64.powf(self.max_power_dbm / 10.0) * 1e-3,
            bandwidth: self.bandwidth,
            carrier_freq: self.carrier_freq,
            noise_figure_db: self.noise_figure,
            temperature: self.temperature,
            master_seed: self.seed,
            ..SystemConfig::default()
        };
        let cfg = match self.density {
            Some(d) => cfg.with_density(d),
            None => cfg,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Split {
    Train,
    Test,
}

impl From<Split> for SeedDomain {
    fn from(s: Split) -> Self {
        match s {
            Split::Train => SeedDomain::Train,
            Split::Test => SeedDomain::Test,
        }
    }
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    system: SystemArgs,
    /// Number of snapshots.
    #[arg(long, default_value_t = 2000)]
    count: usize,
    /// Seed domain; train and test sets never share snapshots.
    #[arg(long, value_enum, default_value_t = Split::Train)]
    split: Split,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    force: bool,
}

#[derive(Args, Clone)]
struct ScheduleArgs {
    #[arg(long, default_value_t = 300)]
    epochs: usize,
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    /// Seed for weight initialisation and batch order.
    #[arg(long, default_value_t = 0)]
    train_seed: u64,
}

impl ScheduleArgs {
    fn config(&self) -> Result<TrainConfig> {
        ensure!(
            self.epochs > 0 && self.batch_size > 0,
            "epochs and batch size must be positive"
        );
        ensure!(self.lr > 0.0 && self.lr.is_finite(), "learning rate must be positive");
        Ok(TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            adam: AdamConfig {
                lr: self.lr,
                ..AdamConfig::default()
            },
            seed: self.train_seed,
        })
    }
}

#[derive(Args)]
struct TrainArgs {
    /// Training dataset directory.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "hD")]
    variant: Variant,
    #[command(flatten)]
    schedule: ScheduleArgs,
    /// Output model file.
    #[arg(long)]
    out: PathBuf,
    /// Loss-history CSV; defaults to the model path with extension `loss.csv`.
    #[arg(long)]
    loss_out: Option<PathBuf>,
    /// Checkpoint file, rewritten every `checkpoint_every` epochs.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long, default_value_t = 25)]
    checkpoint_every: usize,
    /// Continue from `--checkpoint` instead of starting fresh.
    #[arg(long, requires = "checkpoint")]
    resume: bool,
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct WmmseArgs {
    /// WMMSE stopping threshold on the sum-SE change.
    #[arg(long, default_value_t = 1e-5)]
    wmmse_tol: f64,
    #[arg(long, default_value_t = 500)]
    wmmse_max_iter: usize,
}

impl WmmseArgs {
    fn config(&self) -> WmmseConfig {
        WmmseConfig {
            tol: self.wmmse_tol,
            max_iter: self.wmmse_max_iter,
        }
    }
}

#[derive(Args)]
struct EvalArgs {
    /// Test dataset directory.
    #[arg(long)]
    data: PathBuf,
    /// Model files; repeat for several.
    #[arg(long = "model")]
    models: Vec<PathBuf>,
    /// Skip the WMMSE baseline.
    #[arg(long)]
    no_wmmse: bool,
    #[command(flatten)]
    wmmse: WmmseArgs,
    /// Output directory for records, CDFs and gains.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    system: SystemArgs,
    #[arg(long, value_parser = parse_param)]
    param: SweepParam,
    #[arg(long, value_parser = parse_protocol, default_value = "T1")]
    protocol: Protocol,
    /// Grid values, comma separated; defaults to 4,7,10 dB or 25k,50k,75k /km².
    #[arg(long, value_delimiter = ',')]
    grid: Vec<f64>,
    /// Value the T1 model is trained at; defaults to 7 dB or 50k /km².
    #[arg(long)]
    train_value: Option<f64>,
    #[arg(long, value_delimiter = ',', default_value = "hD,dD,hH")]
    variants: Vec<Variant>,
    /// Pretrained T1 models as VARIANT=PATH; missing variants are trained.
    #[arg(long = "model", value_parser = parse_model_arg)]
    models: Vec<(Variant, PathBuf)>,
    #[arg(long, default_value_t = 2000)]
    train_count: usize,
    #[arg(long, default_value_t = 5000)]
    test_count: usize,
    #[command(flatten)]
    schedule: ScheduleArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    system: SystemArgs,
    /// Random snapshots to compare; N must be at most 3.
    #[arg(long, default_value_t = 100)]
    count: usize,
    #[arg(long, default_value_t = 1001)]
    grid_points: usize,
    #[command(flatten)]
    wmmse: WmmseArgs,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 4)]
    n: usize,
    /// Snapshots (and weight seeds) per variant and depth.
    #[arg(long, default_value_t = 1)]
    trials: u64,
    #[arg(long, default_value_t = 1e-6)]
    step: f64,
    #[arg(long, default_value_t = 1e-5)]
    tol: f64,
    /// Relative-error floor as a fraction of the largest gradient entry.
    #[arg(long, default_value_t = 1e-2)]
    floor_ratio: f64,
}

fn parse_param(s: &str) -> Result<SweepParam, String> {
    s.parse().map_err(|e: subnetpc::Error| e.to_string())
}

fn parse_protocol(s: &str) -> Result<Protocol, String> {
    s.parse().map_err(|e: subnetpc::Error| e.to_string())
}

fn parse_model_arg(s: &str) -> Result<(Variant, PathBuf), String> {
    let (v, p) = s.split_once('=').ok_or("expected VARIANT=PATH")?;
    Ok((v.parse().map_err(|e: subnetpc::Error| e.to_string())?, PathBuf::from(p)))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Sweep(a) => sweep(a),
        Command::Oracle(a) => oracle(a),
        Command::Gradcheck(a) => gradcheck(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn gen(a: GenArgs) -> Result<()> {
    let cfg = a.system.config()?;
    let ds = Dataset::generate(&cfg, a.split.into(), a.count)?;
    io::save_dataset(&ds, &a.out, a.force)?;
    println!(
        "wrote {} snapshots (N = {}) to {}",
        ds.len(),
        cfg.n_subnetworks,
        a.out.display()
    );
    Ok(())
}

fn fit(
    dataset: &Dataset,
    variant: Variant,
    config: &TrainConfig,
    checkpoint: Option<(&Path, usize)>,
    resume: bool,
) -> Result<(Model, Vec<f64>)> {
    let (normalizer, data) = TrainingSet::prepare(dataset, variant)?;
    let mut trainer: Trainer<f32> = match checkpoint {
        Some((path, _)) if resume => {
            let t: Trainer<f32> = io::load_checkpoint(path)?;
            ensure!(
                t.model.variant == variant,
                "checkpoint is for variant {}",
                t.model.variant
            );
            ensure!(
                t.model.normalizer == normalizer,
                "checkpoint was trained on a different dataset"
            );
            t
        }
        _ => {
            let model = PcgnnModel::new(
                Architecture::default(),
                normalizer,
                dataset.config.max_power,
                config.seed,
            )?;
            Trainer::new(model, config.clone())
        }
    };
    trainer.config.epochs = config.epochs;
    let start = Instant::now();
    let mut saved = Ok(());
    let outcome = trainer.run(&data, |t| {
        info!(
            "{variant} epoch {} loss {:.5}",
            t.epoch,
            t.history.last().copied().unwrap_or(f64::NAN)
        );
        if let Some((path, every)) = checkpoint {
            if every > 0 && t.epoch % every == 0 && saved.is_ok() {
                saved = io::save_checkpoint(t, path);
            }
        }
    });
    if let Err(e) = outcome {
        if let Some((path, _)) = checkpoint {
            io::save_checkpoint(&trainer, path)?;
            return Err(anyhow::Error::new(e).context(format!(
                "training stopped at epoch {}; last good state saved to {}",
                trainer.epoch,
                path.display()
            )));
        }
        return Err(e.into());
    }
    saved?;
    info!("{variant} trained in {:.1} s", start.elapsed().as_secs_f64());
    Ok((trainer.model, trainer.history))
}

fn train(a: TrainArgs) -> Result<()> {
    let loss_out = a.loss_out.clone().unwrap_or_else(|| a.out.with_extension("loss.csv"));
    for path in [&a.out, &loss_out] {
        if path.exists() && !a.force {
            bail!("refusing to overwrite {} (use --force)", path.display());
        }
    }
    let ds = io::load_dataset(&a.data).with_context(|| format!("loading {}", a.data.display()))?;
    ensure!(
        ds.domain == SeedDomain::Train,
        "dataset {} is not a training split",
        a.data.display()
    );
    let config = a.schedule.config()?;
    let ckpt = a.checkpoint.as_deref().map(|p| (p, a.checkpoint_every));
    let (model, history) = fit(&ds, a.variant, &config, ckpt, a.resume)?;
    let prov = Provenance {
        system: ds.config.clone(),
        train: config,
        train_count: ds.len(),
        loss_history: history.clone(),
    };
    io::save_model(&model, Some(prov), &a.out, a.force)?;
    io::write_loss_history(&loss_out, &history, a.force)?;
    println!(
        "trained {} for {} epochs, final loss {:.4}; model written to {}",
        a.variant,
        history.len(),
        history.last().copied().unwrap_or(f64::NAN),
        a.out.display()
    );
    Ok(())
}

/// Equal up to the master seed, which only selects the snapshot stream.
fn same_scenario(a: &SystemConfig, b: &SystemConfig) -> bool {
    SystemConfig {
        master_seed: b.master_seed,
        ..a.clone()
    } == *b
}

fn check_records(records: &[MetricsRecord], max_power: f64) -> Result<()> {
    for r in records {
        ensure!(
            r.is_feasible(max_power),
            "{} on snapshot {} violates feasibility (power {}, SE {})",
            r.policy,
            r.snapshot,
            r.avg_power,
            r.avg_se
        );
    }
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let ds = io::load_dataset(&a.data).with_context(|| format!("loading {}", a.data.display()))?;
    let p_max = ds.config.max_power;
    let mut runs: Vec<Vec<MetricsRecord>> = vec![evaluate::<f32>(&Policy::MaxPower, &ds)?];
    if !a.no_wmmse {
        let cfg = a.wmmse.config();
        for s in &ds.snapshots {
            let out = wmmse(&s.channel, ds.noise_power(), p_max, cfg)?;
            if let Some(w) = out.trajectory().windows(2).position(|w| w[1] < w[0] - 1e-9) {
                bail!(
                    "WMMSE sum SE decreased at iteration {} on snapshot seed {}",
                    w + 1,
                    s.seed
                );
            }
        }
        runs.push(evaluate::<f32>(&Policy::Wmmse(cfg), &ds)?);
    }
    for path in &a.models {
        let file = io::load_model_file(path).with_context(|| format!("loading {}", path.display()))?;
        match &file.provenance {
            Some(p) if !same_scenario(&p.system, &ds.config) => warn!(
                "{} was trained on a different scenario (config digest {}) than {}",
                path.display(),
                &file.config_digest[..12.min(file.config_digest.len())],
                a.data.display()
            ),
            None => warn!("{} carries no training provenance", path.display()),
            _ => {}
        }
        let model: Model = file.to_model()?;
        runs.push(evaluate(&Policy::Pcgnn(&model), &ds)?);
    }
    for r in &runs {
        check_records(r, p_max)?;
    }

    let all: Vec<MetricsRecord> = runs.iter().flatten().cloned().collect();
    io::write_records(&io::output_path(&a.out, "records.csv")?, &all, a.force)?;
    let mut se_cdfs = Vec::new();
    let mut power_cdfs = Vec::new();
    for r in &runs {
        let id = r[0].policy.clone();
        se_cdfs.push((
            id.clone(),
            empirical_cdf(&r.iter().map(|x| x.avg_se).collect::<Vec<_>>())?,
        ));
        power_cdfs.push((id, empirical_cdf(&r.iter().map(|x| x.avg_power).collect::<Vec<_>>())?));
    }
    io::write_cdfs(&a.out.join("cdf_se.csv"), &se_cdfs, a.force)?;
    io::write_cdfs(&a.out.join("cdf_power.csv"), &power_cdfs, a.force)?;

    let mut gains = Vec::new();
    for r in &runs {
        for base in &runs {
            gains.push(GainRow {
                policy: r[0].policy.clone(),
                baseline: base[0].policy.clone(),
                gain_pct: gain_vs_baseline(r, base)?,
            });
        }
    }
    io::write_gains(&a.out.join("gains.csv"), &gains, a.force)?;

    println!(
        "{:<12} {:>10} {:>12} {:>10}",
        "policy", "mean SE", "mean power", "iters"
    );
    for r in &runs {
        let s = summarize(r)?;
        let it = s
            .mean_iterations
            .map(|v| format!("{v:.1}"))
            .unwrap_or_else(|| "-".into());
        println!(
            "{:<12} {:>10.4} {:>12.4e} {:>10}",
            s.policy, s.mean_se, s.mean_power, it
        );
    }
    let shown = gains
        .iter()
        .filter(|g| g.policy != g.baseline && (g.baseline == "max_power" || g.baseline == "wmmse"));
    for g in shown {
        println!("{} vs {}: {:+.2}%", g.policy, g.baseline, g.gain_pct);
    }
    Ok(())
}

fn sweep(a: SweepArgs) -> Result<()> {
    let base = a.system.config()?;
    let mut spec = match a.param {
        SweepParam::Shadowing => SweepSpec::shadowing(base, a.test_count),
        SweepParam::Density => SweepSpec::density(base, a.test_count),
    };
    if !a.grid.is_empty() {
        spec.grid = a.grid.clone();
    }
    if let Some(v) = a.train_value {
        spec.train_value = v;
    }
    spec.validate()?;
    let config = a.schedule.config()?;
    let out_file = a.out.join(format!("sweep_{}_{}.csv", spec.param, a.protocol));
    if out_file.exists() && !a.force {
        bail!("refusing to overwrite {} (use --force)", out_file.display());
    }

    let train_values: Vec<f64> = match a.protocol {
        Protocol::T1 => vec![spec.train_value],
        Protocol::T2 => spec.grid.clone(),
    };
    let mut models: Vec<(Variant, f64, Model)> = Vec::new();
    for &value in &train_values {
        let mut train_set = None;
        for &variant in &a.variants {
            let given = a.models.iter().find(|(v, _)| *v == variant);
            let model = match (a.protocol, given) {
                (Protocol::T1, Some((_, path))) => io::load_model(path)?,
                _ => {
                    if train_set.is_none() {
                        train_set = Some(spec.train_set(value, a.train_count)?);
                    }
                    let ds = train_set.as_ref().expect("just generated");
                    let (m, history) = fit(ds, variant, &config, None, false)?;
                    let path = io::output_path(&a.out, &format!("model_{variant}_{}_{value}.json", spec.param))?;
                    let prov = Provenance {
                        system: ds.config.clone(),
                        train: config.clone(),
                        train_count: ds.len(),
                        loss_history: history,
                    };
                    io::save_model(&m, Some(prov), &path, a.force)?;
                    m
                }
            };
            models.push((variant, value, model));
        }
    }
    let protocol = a.protocol;
    let rows = robustness_sweep(&spec, protocol, &a.variants, |variant, value| {
        models
            .iter()
            .find(|(v, at, _)| *v == variant && (protocol == Protocol::T1 || *at == value))
            .map(|(_, _, m)| m)
    })?;
    io::write_sweep(
        &io::output_path(&a.out, &out_file.file_name().unwrap().to_string_lossy())?,
        &rows,
        a.force,
    )?;
    println!(
        "{:<10} {:>10} {:>8} {:>9}",
        spec.param.as_str(),
        "variant",
        "protocol",
        "gain %"
    );
    for r in &rows {
        println!(
            "{:<10} {:>10} {:>8} {:>+9.2}",
            r.value,
            r.variant.as_str(),
            r.protocol,
            r.gain_pct
        );
    }
    Ok(())
}

fn oracle(a: OracleArgs) -> Result<()> {
    let mut sys = a.system.clone();
    if sys.density.is_none() && sys.n_subnetworks == 20 {
        sys.n_subnetworks = 2;
    }
    let cfg = sys.config()?;
    ensure!(cfg.n_subnetworks <= 3, "grid oracle supports N <= 3");
    let ds = Dataset::generate(&cfg, SeedDomain::Test, a.count)?;
    let noise = cfg.noise_power();
    let mut gaps = Vec::new();
    let mut violations = 0;
    for s in &ds.snapshots {
        let w = wmmse(&s.channel, noise, cfg.max_power, a.wmmse.config())?;
        let (_, best) = grid_oracle(&s.channel, noise, cfg.max_power, a.grid_points)?;
        let slack = grid_slack(&s.channel, noise, w.allocation.powers(), cfg.max_power, a.grid_points);
        if w.sum_se() > best + slack {
            violations += 1;
        }
        gaps.push(best - w.sum_se());
    }
    gaps.sort_by(f64::total_cmp);
    let median = gaps[gaps.len() / 2];
    println!(
        "N = {}, {} snapshots: median oracle - WMMSE gap {median:.3e} bit/s/Hz, max {:.3e}, min {:.3e}",
        cfg.n_subnetworks,
        gaps.len(),
        gaps[gaps.len() - 1],
        gaps[0]
    );
    ensure!(
        violations == 0,
        "WMMSE beat the grid oracle beyond slack on {violations} snapshots"
    );
    Ok(())
}

fn gradcheck(a: GradcheckArgs) -> Result<()> {
    let cfg = SystemConfig {
        n_subnetworks: a.n,
        ..SystemConfig::default()
    };
    let noise = channel::noise_power(&cfg);
    let mut failed = 0;
    for variant in Variant::ALL {
        for layers in 1..=3 {
            for trial in 0..a.trials {
                let s = channel::sample_snapshot(&cfg, trial)?;
                let raw = build_graph(&s, variant);
                let norm = Normalizer::fit(std::slice::from_ref(&raw), cfg.area_side)?;
                let graph = norm.apply(&raw)?;
                let arch = Architecture {
                    layers,
                    ..Architecture::default()
                };
                let model = Model64::new(arch, norm, cfg.max_power, 100 * trial + layers as u64)?;
                let r = check_model_gradients(&model, &graph, &s.channel, noise, a.step, a.floor_ratio)?;
                let ok = r.passes(a.tol);
                failed += usize::from(!ok);
                println!(
                    "{variant} K={layers} trial {trial}: {} params, {} kink skips, max rel err {:.2e} {}",
                    r.checked,
                    r.skipped_kinks,
                    r.max_rel_err,
                    if ok { "ok" } else { "FAIL" }
                );
            }
        }
    }
    ensure!(failed == 0, "{failed} gradient checks failed");
    Ok(())
}

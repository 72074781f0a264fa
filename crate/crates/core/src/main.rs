use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use openplan_hvac::agent::{OptimizerKind, QNetwork};
use openplan_hvac::config::BuildingConfig;
use openplan_hvac::harness::{
    compare_plans, run_eval, run_sweep, run_training, write_sweep_csv, write_training_outputs, PolicyKind, Prepared, RunConfig, SweepAxis, SweepSpec,
    WeatherSource,
};
use openplan_hvac::metrics::{save_summaries, RunSummary};
use openplan_hvac::reward::ComfortLossKind;
use openplan_hvac::weather::{generate_weather, write_weather_csv, WeatherOptions, WeatherProfile, DEFAULT_SOLAR_BOOST};
use openplan_hvac::{Error, Result};

#[derive(Parser)]
#[command(name = "openplan-hvac", version, about = "Open-plan office HVAC simulator with a DQN controller")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a DQN, then evaluate it greedily against the schedule baseline.
    Train(TrainArgs),
    /// Roll out one policy without learning.
    Eval(EvalArgs),
    /// Train and evaluate over a grid of reward weights.
    Sweep(SweepArgs),
    /// Run one policy on an open and a closed floor plan.
    ComparePlans(ComparePlansArgs),
    /// Write a synthetic weather series as CSV.
    WeatherGen(WeatherGenArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Run config JSON; omitted fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Start from the bundled tuned run config instead of the defaults.
    #[arg(long, conflicts_with = "config")]
    tuned: bool,
    /// Building config JSON, replacing the one in the run config.
    #[arg(long)]
    building: Option<PathBuf>,
    /// Outdoor series CSV (t_min,outdoor_F[,t_sol_F]).
    #[arg(long, conflicts_with = "profile")]
    weather_csv: Option<PathBuf>,
    /// Built-in weather profile name.
    #[arg(long)]
    profile: Option<String>,
    #[arg(long)]
    weather_seed: Option<u64>,
    /// Agent seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    eta_t: Option<f64>,
    #[arg(long)]
    eta_e: Option<f64>,
    #[arg(long)]
    eta_s: Option<f64>,
    #[arg(long)]
    safety_penalty: Option<f64>,
    #[arg(long, value_enum)]
    comfort: Option<ComfortLossKind>,
    #[arg(long)]
    step_minutes: Option<u32>,
    #[arg(long)]
    duration_days: Option<u32>,
    #[arg(long)]
    start_day: Option<u32>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    epsilon_start: Option<f64>,
    #[arg(long)]
    epsilon_decay_steps: Option<u64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    buffer_size: Option<usize>,
    /// Transitions stored before the first train step.
    #[arg(long)]
    min_buffer: Option<usize>,
    /// Train steps between target-network syncs.
    #[arg(long)]
    target_update: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Hidden layer widths, comma separated.
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    #[arg(long)]
    grad_clip: Option<f64>,
    #[arg(long, value_enum)]
    optimizer: Option<OptimizerKind>,
    #[arg(long)]
    reward_scale: Option<f64>,
    /// Output directory.
    #[arg(long, short, default_value = "out")]
    out: PathBuf,
}

impl RunArgs {
    fn run_config(&self) -> Result<RunConfig> {
        let mut rc = match (&self.config, self.tuned) {
            (Some(p), _) => RunConfig::load(p)?,
            (None, true) => RunConfig::tuned(),
            (None, false) => RunConfig::default(),
        };
        if let Some(p) = &self.building {
            rc.building = BuildingConfig::load(p)?;
        }
        if let Some(p) = &self.weather_csv {
            rc.weather = WeatherSource::Csv { path: p.clone() };
        }
        if self.profile.is_some() || self.weather_seed.is_some() {
            let (name, seed) = match &rc.weather {
                WeatherSource::Profile { name, seed, .. } => (name.clone(), *seed),
                WeatherSource::Csv { .. } => return Err(Error::Usage("--weather-seed needs a profile weather source".into())),
            };
            rc.weather = WeatherSource::Profile { name: self.profile.clone().unwrap_or(name), profile: None, seed: self.weather_seed.unwrap_or(seed) };
        }
        set(&mut rc.seed, self.seed);
        let w = &mut rc.reward.weights;
        set(&mut w.eta_t, self.eta_t);
        set(&mut w.eta_e, self.eta_e);
        set(&mut w.eta_s, self.eta_s);
        set(&mut w.safety_penalty, self.safety_penalty);
        set(&mut rc.reward.comfort, self.comfort);
        set(&mut rc.step_minutes, self.step_minutes);
        set(&mut rc.duration_days, self.duration_days);
        set(&mut rc.start_day, self.start_day);
        let h = &mut rc.hyper;
        set(&mut h.lr, self.lr);
        set(&mut h.gamma, self.gamma);
        set(&mut h.epsilon, self.epsilon);
        if self.epsilon_start.is_some() {
            h.epsilon_start = self.epsilon_start;
        }
        set(&mut h.epsilon_decay_steps, self.epsilon_decay_steps);
        set(&mut h.batch_size, self.batch_size);
        set(&mut h.buffer_capacity, self.buffer_size);
        set(&mut h.min_buffer, self.min_buffer);
        set(&mut h.target_update, self.target_update);
        set(&mut h.epochs, self.epochs);
        set(&mut h.hidden, self.hidden.clone());
        set(&mut h.grad_clip, self.grad_clip);
        set(&mut h.optimizer, self.optimizer);
        set(&mut h.reward_scale, self.reward_scale);
        rc.validate()?;
        Ok(rc)
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, value_enum, default_value = "rbc")]
    policy: PolicyKind,
    /// Weights file written by `train`; required for the dqn policy.
    #[arg(long)]
    weights: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    /// Energy:comfort weight multipliers.
    EtaRatio,
    EtaS,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, value_enum, default_value = "eta-ratio")]
    axis: AxisArg,
    /// Seeds per cell, counting up from --seed.
    #[arg(long, default_value_t = 1)]
    repeats: u32,
    /// Grid values; `e:t` pairs for eta-ratio, numbers for eta-s. Defaults to the standard grid.
    #[arg(long, value_delimiter = ',')]
    values: Option<Vec<String>>,
}

#[derive(Args)]
struct ComparePlansArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Open-plan building; defaults to the bundled reference.
    #[arg(long)]
    open: Option<PathBuf>,
    /// Closed-plan building; defaults to the bundled reference.
    #[arg(long)]
    closed: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "rbc")]
    policy: PolicyKind,
    #[arg(long)]
    weights: Option<PathBuf>,
}

#[derive(Args)]
struct WeatherGenArgs {
    /// Built-in profile name.
    #[arg(long, default_value = "greenville")]
    profile: String,
    /// Explicit profile JSON, replacing the built-in one.
    #[arg(long)]
    profile_json: Option<PathBuf>,
    #[arg(long, default_value_t = 30)]
    duration_days: u32,
    #[arg(long, default_value_t = 12)]
    step_minutes: u32,
    #[arg(long, default_value_t = 0)]
    start_day: u32,
    /// Solar air-temperature boost at noon, K.
    #[arg(long, default_value_t = DEFAULT_SOLAR_BOOST)]
    solar_boost: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, short, default_value = "weather.csv")]
    out: PathBuf,
}

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Sweep(a) => sweep(a),
        Command::ComparePlans(a) => plans(a),
        Command::WeatherGen(a) => weather_gen(a),
    }
}

fn warn_sizing(rc: &RunConfig) -> Result<()> {
    for w in Prepared::new(rc)?.sizing_warnings(rc.step_minutes) {
        eprintln!("warning: {w}");
    }
    Ok(())
}

fn load_weights(path: Option<&Path>, policy: PolicyKind) -> Result<Option<QNetwork>> {
    match (path, policy) {
        (Some(p), _) => QNetwork::load(p).map(Some),
        (None, PolicyKind::Dqn) => Err(Error::Usage("the dqn policy needs --weights".into())),
        (None, _) => Ok(None),
    }
}

fn print_summaries(summaries: &[&RunSummary]) {
    // A closed pipe (`| head`) is not an error worth reporting.
    let mut out = std::io::stdout().lock();
    for s in summaries {
        if writeln!(out, "{}", s.to_text()).is_err() {
            return;
        }
    }
}

fn train(a: TrainArgs) -> Result<()> {
    let rc = a.run.run_config()?;
    warn_sizing(&rc)?;
    let outcome = run_training(&rc)?;
    for (k, r) in outcome.epoch_rewards().iter().enumerate() {
        println!("epoch {:2} reward {r:.3}", k + 1);
    }
    let cmp = write_training_outputs(&a.run.out, &rc, &outcome)?;
    print_summaries(&[&cmp.dqn.summary, &cmp.rbc.summary]);
    println!("wrote {}", a.run.out.display());
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let rc = a.run.run_config()?;
    warn_sizing(&rc)?;
    let weights = load_weights(a.weights.as_deref(), a.policy)?;
    let out = run_eval(&rc, a.policy, weights.as_ref())?;
    let dir = &a.run.out;
    std::fs::create_dir_all(dir)?;
    out.log.save_csv(&dir.join(format!("eval_{}.csv", a.policy.label())))?;
    save_summaries(dir, std::slice::from_ref(&out.summary))?;
    print_summaries(&[&out.summary]);
    Ok(())
}

fn parse_axis(axis: AxisArg, values: Option<&[String]>, repeats: u32) -> Result<SweepSpec> {
    let bad = |v: &str| Error::Usage(format!("bad sweep value {v:?}"));
    let num = |v: &str| v.trim().parse::<f64>().map_err(|_| bad(v));
    Ok(match (axis, values) {
        (AxisArg::EtaRatio, None) => SweepSpec::trade_off_grid(repeats),
        (AxisArg::EtaS, None) => SweepSpec::smoothness_grid(repeats),
        (AxisArg::EtaRatio, Some(vs)) => {
            let pairs = vs
                .iter()
                .map(|v| {
                    let (e, t) = v.split_once(':').ok_or_else(|| bad(v))?;
                    Ok((num(e)?, num(t)?))
                })
                .collect::<Result<Vec<_>>>()?;
            SweepSpec { axis: SweepAxis::EtaRatio(pairs), repeats }
        }
        (AxisArg::EtaS, Some(vs)) => SweepSpec { axis: SweepAxis::EtaS(vs.iter().map(|v| num(v)).collect::<Result<_>>()?), repeats },
    })
}

fn sweep(a: SweepArgs) -> Result<()> {
    let rc = a.run.run_config()?;
    let spec = parse_axis(a.axis, a.values.as_deref(), a.repeats)?;
    let rows = run_sweep(&spec, &rc)?;
    std::fs::create_dir_all(&a.run.out)?;
    let path = a.run.out.join("sweep.csv");
    write_sweep_csv(&rows, &path)?;
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    for r in rows.iter().filter_map(|r| r.error.as_ref().map(|e| (r, e))) {
        eprintln!("cell {} seed {} failed: {}", r.0.cell, r.0.seed, r.1);
    }
    println!("{} rows ({failed} failed), wrote {}", rows.len(), path.display());
    Ok(())
}

fn plans(a: ComparePlansArgs) -> Result<()> {
    let rc = a.run.run_config()?;
    let open = a.open.as_deref().map(BuildingConfig::load).transpose()?.unwrap_or_else(BuildingConfig::reference_open);
    let closed = a.closed.as_deref().map(BuildingConfig::load).transpose()?.unwrap_or_else(BuildingConfig::reference_closed);
    let weights = load_weights(a.weights.as_deref(), a.policy)?;
    let cmp = compare_plans(&open, &closed, &rc, a.policy, weights.as_ref())?;
    let dir = &a.run.out;
    std::fs::create_dir_all(dir)?;
    cmp.open.log.save_csv(&dir.join("open.csv"))?;
    cmp.closed.log.save_csv(&dir.join("closed.csv"))?;
    save_summaries(dir, &[cmp.open.summary.clone(), cmp.closed.summary.clone()])?;
    print_summaries(&[&cmp.open.summary, &cmp.closed.summary]);
    Ok(())
}

fn weather_gen(a: WeatherGenArgs) -> Result<()> {
    let profile = match &a.profile_json {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::from(e).context(format!("reading {}", p.display())))?;
            let profile: WeatherProfile = serde_json::from_str(&text)?;
            profile.validate()?;
            profile
        }
        None => WeatherProfile::builtin(&a.profile).ok_or_else(|| Error::Config(format!("unknown weather profile {:?}", a.profile)))?,
    };
    let opts = WeatherOptions { duration_days: a.duration_days, step_minutes: a.step_minutes, start_day: a.start_day, solar_boost: a.solar_boost };
    let samples = generate_weather(&profile, &opts, a.seed)?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_weather_csv(&samples, &a.out)?;
    println!("{} samples, wrote {}", samples.len(), a.out.display());
    Ok(())
}

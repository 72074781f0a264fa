//! Experiment driver: training, evaluation, sweeps and plan comparison.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agent::{action_count, argmax, decode_action, state_dim, ActionIndex, DqnAgent, Hyperparams, QNetwork, Transition};
use crate::baseline::{always_off_policy, always_on_policy, rbc_policy};
use crate::config::{Building, BuildingConfig};
use crate::env::{check_step_minutes, Environment, LOCAL_LOOP_SECONDS};
use crate::error::{Error, Result};
use crate::metrics::{save_summaries, EpisodeLog, RunSummary};
use crate::plant::ComfortPolicy;
use crate::reward::{comfort_term, energy_loss, smoothness_loss, total_reward, FahrenheitBands, RewardConfig};
use crate::thermal::WeatherSample;
use crate::weather::{generate_weather, load_weather_csv, WeatherOptions, WeatherProfile};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum WeatherSource {
    /// A built-in profile by name, or an explicit profile.
    Profile {
        name: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        profile: Option<WeatherProfile>,
        #[serde(default)]
        seed: u64,
    },
    Csv { path: PathBuf },
}

impl Default for WeatherSource {
    fn default() -> Self {
        WeatherSource::Profile { name: "greenville".into(), profile: None, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub building: BuildingConfig,
    pub weather: WeatherSource,
    pub step_minutes: u32,
    pub duration_days: u32,
    /// Day of year for generated weather (0 = 1 January).
    pub start_day: u32,
    pub reward: RewardConfig,
    pub hyper: Hyperparams,
    /// Agent seed; overrides `hyper.seed`.
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            building: BuildingConfig::reference_open(),
            weather: WeatherSource::default(),
            step_minutes: 12,
            duration_days: 30,
            start_day: 0,
            reward: RewardConfig::default(),
            hyper: Hyperparams { epochs: 5, ..Hyperparams::default() },
            seed: 0,
        }
    }
}

/// Run settings under which the agent reliably beats the schedule baseline on
/// the reference building.
pub const TUNED_RUN: &str = include_str!("../../../configs/run_tuned.json");

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let rc: RunConfig = serde_json::from_str(text)?;
        rc.validate()?;
        Ok(rc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).context(format!("reading {}", path.display())))?;
        Self::from_json(&text).map_err(|e| e.context(format!("parsing {}", path.display())))
    }

    pub fn tuned() -> Self {
        Self::from_json(TUNED_RUN).expect("bundled run config is valid")
    }

    pub fn validate(&self) -> Result<()> {
        check_step_minutes(self.step_minutes)?;
        if self.duration_days < 1 {
            return Err(Error::Config("duration_days must be >= 1".into()));
        }
        let w = &self.reward.weights;
        if [w.eta_t, w.eta_e, w.eta_s, w.safety_penalty].iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::Config("reward weights must be >= 0".into()));
        }
        self.hyper.validate()
    }

    pub fn steps(&self) -> usize {
        self.duration_days as usize * 1440 / self.step_minutes as usize
    }

    pub fn hyper_seeded(&self) -> Hyperparams {
        Hyperparams { seed: self.seed, ..self.hyper.clone() }
    }
}

/// Everything a rollout needs, built once per run.
pub struct Prepared {
    pub building: Building,
    pub weather: Vec<WeatherSample>,
    pub steps: usize,
}

impl Prepared {
    pub fn new(rc: &RunConfig) -> Result<Self> {
        rc.validate()?;
        let building = rc.building.build()?;
        let weather = load_weather(rc, &building)?;
        Ok(Prepared { building, weather, steps: rc.steps() })
    }

    pub fn env(&self, rc: &RunConfig) -> Result<Environment<'_>> {
        Environment::new(&self.building, &self.weather, rc.step_minutes, self.steps, rc.reward)
    }

    /// Plant sizing against this run's weather extremes, at the VAV loop interval.
    pub fn sizing_warnings(&self, step_minutes: u32) -> Vec<String> {
        let lo = self.weather.iter().map(|w| w.outdoor).fold(f64::INFINITY, f64::min);
        let hi = self.weather.iter().map(|w| w.outdoor).fold(f64::NEG_INFINITY, f64::max);
        self.building.sizing_warnings(lo, hi, LOCAL_LOOP_SECONDS.min(step_minutes as f64 * 60.0))
    }
}

fn load_weather(rc: &RunConfig, building: &Building) -> Result<Vec<WeatherSample>> {
    match &rc.weather {
        WeatherSource::Profile { name, profile, seed } => {
            let profile = match profile {
                Some(p) => p.clone(),
                None => WeatherProfile::builtin(name).ok_or_else(|| Error::Config(format!("unknown weather profile {name:?}")))?,
            };
            let opts = WeatherOptions {
                duration_days: rc.duration_days,
                step_minutes: rc.step_minutes,
                start_day: rc.start_day,
                solar_boost: building.solar_boost,
            };
            generate_weather(&profile, &opts, *seed)
        }
        WeatherSource::Csv { path } => load_weather_csv(path, building.solar_boost),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Dqn,
    Rbc,
    AlwaysOn,
    AlwaysOff,
}

impl PolicyKind {
    pub fn label(self) -> &'static str {
        match self {
            PolicyKind::Dqn => "dqn",
            PolicyKind::Rbc => "rbc",
            PolicyKind::AlwaysOn => "always_on",
            PolicyKind::AlwaysOff => "always_off",
        }
    }
}

/// Rolls one full episode, asking `policy` for the actions of every step.
pub fn rollout(env: &mut Environment<'_>, mut policy: impl FnMut(&Environment<'_>) -> Result<Vec<ComfortPolicy>>) -> Result<EpisodeLog> {
    env.reset();
    let mut log = EpisodeLog::new(env.logical().len());
    while !env.done() {
        let actions = policy(env)?;
        log.push(env.step(&actions)?);
    }
    Ok(log)
}

pub struct TrainingOutcome {
    pub weights: QNetwork,
    pub epoch_logs: Vec<EpisodeLog>,
    pub train_steps: u64,
}

impl TrainingOutcome {
    pub fn epoch_rewards(&self) -> Vec<f64> {
        self.epoch_logs.iter().map(EpisodeLog::total_reward).collect()
    }
}

/// Trains a fresh agent for `hyper.epochs` epochs over the configured episode.
pub fn run_training(rc: &RunConfig) -> Result<TrainingOutcome> {
    let prep = Prepared::new(rc)?;
    let mut env = prep.env(rc)?;
    let zones = prep.building.zone_count();
    let mut agent = DqnAgent::new(state_dim(zones), action_count(zones), rc.hyper_seeded())?;
    let mut epoch_logs = Vec::with_capacity(rc.hyper.epochs as usize);
    for epoch in 0..rc.hyper.epochs {
        env.reset();
        let mut log = EpisodeLog::new(zones);
        let mut state = env.observe();
        while !env.done() {
            let action = agent.act(&state, true);
            let actions = decode_action(action, zones)?;
            let record = env.step(&actions).map_err(|e| e.context(format!("epoch {epoch}")))?;
            let next_state = env.observe();
            agent
                .observe(Transition { state, action, reward: record.reward.total, next_state: next_state.clone() })
                .map_err(|e| e.context(format!("epoch {epoch}, step {}", env.step_index())))?;
            log.push(record);
            state = next_state;
        }
        epoch_logs.push(log);
    }
    Ok(TrainingOutcome { weights: agent.online().clone(), epoch_logs, train_steps: agent.train_steps() })
}

pub struct EvalOutcome {
    pub log: EpisodeLog,
    pub summary: RunSummary,
}

fn greedy(net: &QNetwork, env: &Environment<'_>) -> Result<Vec<ComfortPolicy>> {
    let q = net.forward(env.observe().as_slice());
    decode_action(ActionIndex(argmax(&q)), env.logical().len())
}

/// Evaluates `policy` without exploration or learning.
pub fn run_eval(rc: &RunConfig, policy: PolicyKind, weights: Option<&QNetwork>) -> Result<EvalOutcome> {
    let prep = Prepared::new(rc)?;
    eval_prepared(&prep, rc, policy, weights)
}

fn eval_prepared(prep: &Prepared, rc: &RunConfig, policy: PolicyKind, weights: Option<&QNetwork>) -> Result<EvalOutcome> {
    let zones = prep.building.zone_count();
    let mut env = prep.env(rc)?;
    let schedule = prep.building.schedule.clone();
    let log = match policy {
        PolicyKind::Dqn => {
            let net = weights.ok_or_else(|| Error::Usage("dqn evaluation needs trained weights".into()))?;
            if net.input_dim() != state_dim(zones) || net.output_dim() != action_count(zones) {
                return Err(Error::Usage(format!("weights are {}->{}, building needs {}->{}", net.input_dim(), net.output_dim(), state_dim(zones), action_count(zones))));
            }
            rollout(&mut env, |e| greedy(net, e))?
        }
        PolicyKind::Rbc => rollout(&mut env, |e| Ok(rbc_policy(e.clock(), &schedule, zones)))?,
        PolicyKind::AlwaysOn => rollout(&mut env, |_| Ok(always_on_policy(zones)))?,
        PolicyKind::AlwaysOff => rollout(&mut env, |_| Ok(always_off_policy(zones)))?,
    };
    let summary = RunSummary::from_log(policy.label(), &log, env.bands_f(), None)?;
    Ok(EvalOutcome { log, summary })
}

pub struct Comparison {
    pub dqn: EvalOutcome,
    pub rbc: EvalOutcome,
}

/// Greedy DQN against RBC on identical weather; fills the DQN's saving column.
pub fn compare(rc: &RunConfig, weights: &QNetwork) -> Result<Comparison> {
    let prep = Prepared::new(rc)?;
    let rbc = eval_prepared(&prep, rc, PolicyKind::Rbc, None)?;
    let mut dqn = eval_prepared(&prep, rc, PolicyKind::Dqn, Some(weights))?;
    let bands = FahrenheitBands::from(&prep.building.bands);
    dqn.summary = RunSummary::from_log("dqn", &dqn.log, &bands, Some(&rbc.log))?;
    let mut rbc_summary = rbc.summary.clone();
    rbc_summary.saving_pct = Some(0.0);
    Ok(Comparison { dqn, rbc: EvalOutcome { log: rbc.log, summary: rbc_summary } })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "axis", content = "values", rename_all = "snake_case")]
pub enum SweepAxis {
    /// `(eta_e, eta_t)` multipliers applied to the base run's weights.
    EtaRatio(Vec<(f64, f64)>),
    EtaS(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub repeats: u32,
}

impl SweepSpec {
    /// The ten energy:comfort weight ratios of the trade-off study.
    pub fn trade_off_grid(repeats: u32) -> Self {
        let pairs = [(1.0, 1.0), (2.0, 1.0), (5.0, 1.0), (10.0, 1.0), (1.0, 2.0), (1.0, 5.0), (1.0, 10.0), (2.0, 2.0), (5.0, 5.0), (10.0, 10.0)];
        SweepSpec { axis: SweepAxis::EtaRatio(pairs.to_vec()), repeats }
    }

    pub fn smoothness_grid(repeats: u32) -> Self {
        SweepSpec { axis: SweepAxis::EtaS(vec![0.0, 1.0, 3.0, 5.0, 7.0]), repeats }
    }

    pub fn validate(&self) -> Result<()> {
        let empty = match &self.axis {
            SweepAxis::EtaRatio(v) => v.is_empty(),
            SweepAxis::EtaS(v) => v.is_empty(),
        };
        if empty || self.repeats < 1 {
            return Err(Error::Config("sweep needs a non-empty grid and repeats >= 1".into()));
        }
        Ok(())
    }

    fn cells(&self, base: &RunConfig) -> Vec<(String, RewardConfig)> {
        let mut out = Vec::new();
        match &self.axis {
            SweepAxis::EtaRatio(pairs) => {
                for &(e, t) in pairs {
                    let mut r = base.reward;
                    r.weights.eta_e = base.reward.weights.eta_e * e;
                    r.weights.eta_t = base.reward.weights.eta_t * t;
                    out.push((format!("{e}:{t}"), r));
                }
            }
            SweepAxis::EtaS(values) => {
                for &s in values {
                    let mut r = base.reward;
                    r.weights.eta_s = s;
                    out.push((format!("eta_s={s}"), r));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub cell: String,
    pub eta_e: f64,
    pub eta_t: f64,
    pub eta_s: f64,
    pub seed: u64,
    pub electricity_mj: Option<f64>,
    pub saving_pct: Option<f64>,
    pub violation_pct: Option<f64>,
    pub transitions: Option<usize>,
    pub error: Option<String>,
}

/// Trains and evaluates each (cell, seed) in isolation. Cells run in parallel;
/// a failing cell is recorded and the rest continue.
pub fn run_sweep(spec: &SweepSpec, base: &RunConfig) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let rbc = run_eval(base, PolicyKind::Rbc, None)?;
    let jobs: Vec<(String, RewardConfig, u64)> = spec
        .cells(base)
        .into_iter()
        .flat_map(|(label, reward)| (0..spec.repeats as u64).map(move |r| (label.clone(), reward, r)))
        .map(|(label, reward, r)| (label, reward, base.seed + r))
        .collect();
    Ok(jobs
        .into_par_iter()
        .map(|(cell, reward, seed)| {
            let rc = RunConfig { reward, seed, ..base.clone() };
            let w = reward.weights;
            let mut row = SweepRow { cell, eta_e: w.eta_e, eta_t: w.eta_t, eta_s: w.eta_s, seed, electricity_mj: None, saving_pct: None, violation_pct: None, transitions: None, error: None };
            let result = run_training(&rc).and_then(|t| run_eval(&rc, PolicyKind::Dqn, Some(&t.weights)));
            match result.and_then(|e| Ok((crate::metrics::energy_saving_ratio(&e.log, &rbc.log)?, e))) {
                Ok((saving, e)) => {
                    row.electricity_mj = Some(e.summary.total_mj);
                    row.saving_pct = Some(saving);
                    row.violation_pct = Some(100.0 * e.summary.cvr);
                    row.transitions = Some(e.summary.transitions);
                }
                Err(e) => row.error = Some(e.to_string()),
            }
            row
        })
        .collect())
}

pub fn write_sweep_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Format(e.to_string()))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::Format(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub struct PlanComparison {
    pub open: EvalOutcome,
    pub closed: EvalOutcome,
}

/// Runs one policy on two floor plans that differ only in coupling kind.
pub fn compare_plans(open: &BuildingConfig, closed: &BuildingConfig, rc: &RunConfig, policy: PolicyKind, weights: Option<&QNetwork>) -> Result<PlanComparison> {
    if !open.same_geometry(closed) {
        return Err(Error::Usage("open and closed configs must share zones, plant and coupling layout".into()));
    }
    let run = |b: &BuildingConfig, label: &str| -> Result<EvalOutcome> {
        let rc = RunConfig { building: b.clone(), ..rc.clone() };
        let mut out = run_eval(&rc, policy, weights)?;
        out.summary.label = format!("{label}/{}", policy.label());
        Ok(out)
    };
    Ok(PlanComparison { open: run(open, "open")?, closed: run(closed, "closed")? })
}

/// Writes per-epoch logs, weights and a greedy-evaluation summary.
pub fn write_training_outputs(dir: &Path, rc: &RunConfig, outcome: &TrainingOutcome) -> Result<Comparison> {
    std::fs::create_dir_all(dir)?;
    for (k, log) in outcome.epoch_logs.iter().enumerate() {
        log.save_csv(&dir.join(format!("epoch_{:02}.csv", k + 1)))?;
    }
    outcome.weights.save(&dir.join("weights.bin"))?;
    std::fs::write(dir.join("run_config.json"), serde_json::to_string_pretty(rc)?)?;
    let cmp = compare(rc, &outcome.weights)?;
    cmp.dqn.log.save_csv(&dir.join("eval_dqn.csv"))?;
    cmp.rbc.log.save_csv(&dir.join("eval_rbc.csv"))?;
    save_summaries(dir, &[cmp.dqn.summary.clone(), cmp.rbc.summary.clone()])?;
    Ok(cmp)
}

/// Total reward of a logged episode re-scored under `reward`. Units start
/// from the OFF policy, as in [`Environment::reset`].
pub fn rescore(log: &EpisodeLog, rc: &RunConfig, reward: RewardConfig) -> Result<f64> {
    let building = rc.building.build()?;
    let bands = FahrenheitBands::from(&building.bands);
    let e_scale = building.energy_scale(rc.step_minutes as f64 * 60.0);
    let w = &reward.weights;
    let mut prev = vec![ComfortPolicy::Off; log.zones];
    let mut total = 0.0;
    for r in &log.records {
        let l_t = comfort_term(reward.comfort, &r.zone_f, &r.logical, r.work, w, &bands);
        total += total_reward(l_t, energy_loss(r.energy_j, w, e_scale), smoothness_loss(&r.logical, &prev, w)).total;
        prev.clone_from(&r.logical);
    }
    Ok(total)
}

/// First epoch whose reward reaches `level`.
pub fn epoch_reaching(epoch_rewards: &[f64], level: f64) -> Option<usize> {
    epoch_rewards.iter().position(|&r| r >= level)
}

/// Index of the first epoch whose progress from the first epoch toward the
/// last reaches `fraction`.
pub fn convergence_epoch(epoch_rewards: &[f64], fraction: f64) -> Option<usize> {
    let (&first, &last) = (epoch_rewards.first()?, epoch_rewards.last()?);
    let span = last - first;
    if span.abs() < 1e-12 {
        return Some(0);
    }
    epoch_rewards.iter().position(|&r| (r - first) / span >= fraction)
}

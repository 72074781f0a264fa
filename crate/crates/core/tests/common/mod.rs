//! Oracles and checks shared by the integration suites and the acceptance run.
#![allow(dead_code)]

use std::time::Instant;

use ndarray::Array2;
use openplan_hvac::agent::{encode_state, DqnAgent, Hyperparams, OptimizerKind, QNetwork, StateVector, Transition};
use openplan_hvac::config::{Building, BuildingConfig};
use openplan_hvac::metrics::{ccr, energy_saving_ratio, EpisodeLog, StepRecord};
use openplan_hvac::plant::{ComfortBands, ComfortPolicy, PhysicalCommand};
use openplan_hvac::reward::{comfort_loss, energy_loss, smoothness_loss, FahrenheitBands, RewardBreakdown, RewardWeights};
use openplan_hvac::thermal::{self, AirProperties, BuildingModel, Coupling, Endpoint, HvacFlow, ThermalState, WeatherSample, ZoneSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Verdict {
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(pass: bool, detail: impl Into<String>) -> Self {
        Verdict { pass, detail: detail.into() }
    }
}

// ---- gradient oracle ------------------------------------------------------

/// Plain-loop forward pass: relu on hidden layers, identity output.
pub fn oracle_forward(net: &QNetwork, x: &[f64]) -> Vec<f64> {
    let mut a = x.to_vec();
    let last = net.layers().len() - 1;
    for (li, layer) in net.layers().iter().enumerate() {
        let (n_in, n_out) = layer.weights.dim();
        let mut z = vec![0.0; n_out];
        for (j, zj) in z.iter_mut().enumerate() {
            *zj = layer.bias[j] + (0..n_in).map(|i| a[i] * layer.weights[[i, j]]).sum::<f64>();
        }
        if li < last {
            z.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        a = z;
    }
    a
}

pub fn oracle_loss(net: &QNetwork, inputs: &Array2<f64>, actions: &[usize], targets: &[f64]) -> f64 {
    let n = inputs.nrows();
    (0..n)
        .map(|k| {
            let q = oracle_forward(net, inputs.row(k).as_slice().unwrap());
            (q[actions[k]] - targets[k]).powi(2)
        })
        .sum::<f64>()
        / n as f64
}

/// Backprop against central differences on `nets` random networks. Returns
/// the worst norm-wise relative error and the elapsed seconds.
pub fn gradient_check(nets: usize, seed: u64) -> (f64, f64) {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..nets {
        let depth = rng.random_range(1..=3);
        let mut sizes = vec![rng.random_range(2..=6)];
        sizes.extend((0..depth).map(|_| rng.random_range(3..=8)));
        sizes.push(rng.random_range(2..=5));
        let mut net = QNetwork::new(&sizes, &mut rng);
        // Non-zero biases so every unit's offset path is exercised.
        for l in net.layers_mut() {
            l.bias.iter_mut().for_each(|b| *b = rng.random_range(-0.3..0.3));
        }
        let batch = 5;
        let inputs = Array2::from_shape_fn((batch, sizes[0]), |_| rng.random_range(-1.0..1.0));
        let out = *sizes.last().unwrap();
        let actions: Vec<usize> = (0..batch).map(|_| rng.random_range(0..out)).collect();
        let targets: Vec<f64> = (0..batch).map(|_| rng.random_range(-2.0..2.0)).collect();
        let (_, grads) = net.td_loss_gradients(&inputs, &actions, &targets);

        let (mut diff2, mut norm_a, mut norm_n) = (0.0, 0.0, 0.0);
        for li in 0..net.layers().len() {
            let (rows, cols) = net.layers()[li].weights.dim();
            let mut params: Vec<(Option<(usize, usize)>, usize)> = Vec::new();
            for r in 0..rows {
                for c in 0..cols {
                    params.push((Some((r, c)), 0));
                }
            }
            params.extend((0..cols).map(|c| (None, c)));
            for (w, c) in params {
                let analytic = match w {
                    Some(rc) => grads.layers[li].weights[rc],
                    None => grads.layers[li].bias[c],
                };
                let bump = |net: &mut QNetwork, delta: f64| {
                    let l = &mut net.layers_mut()[li];
                    match w {
                        Some(rc) => l.weights[rc] += delta,
                        None => l.bias[c] += delta,
                    }
                };
                bump(&mut net, h);
                let up = oracle_loss(&net, &inputs, &actions, &targets);
                bump(&mut net, -2.0 * h);
                let down = oracle_loss(&net, &inputs, &actions, &targets);
                bump(&mut net, h);
                let numeric = (up - down) / (2.0 * h);
                diff2 += (analytic - numeric).powi(2);
                norm_a += analytic * analytic;
                norm_n += numeric * numeric;
            }
        }
        let scale = norm_a.sqrt().max(norm_n.sqrt()).max(1e-12);
        worst = worst.max(diff2.sqrt() / scale);
    }
    (worst, t0.elapsed().as_secs_f64())
}

pub fn criterion_gradient() -> Verdict {
    let (err, secs) = gradient_check(12, 7);
    Verdict::new(err <= 1e-4 && secs < 10.0, format!("12 networks, worst relative error {err:.2e} (<= 1e-4), {secs:.2}s (< 10s)"))
}

// ---- conservation and steady state ---------------------------------------

pub fn criterion_conservation() -> Verdict {
    let building = BuildingConfig::reference_open().build().unwrap();
    let model = building.model.adiabatic();
    let n = model.zone_count();
    let mut state = ThermalState { zone_temps: (0..n).map(|i| 285.0 + 3.0 * i as f64).collect(), clock: 0.0 };
    let weather = WeatherSample { minute: 0.0, outdoor: 250.0, t_sol: 340.0 };
    let idle = vec![HvacFlow::IDLE; n];
    let dt = 60.0;
    let start = model.heat_content(&state);
    for _ in 0..10_000 {
        state = thermal::step(&model, &state, &weather, &idle, true, dt).unwrap();
    }
    let drift = ((model.heat_content(&state) - start) / start).abs();
    let spread = state.zone_temps.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - state.zone_temps.iter().cloned().fold(f64::INFINITY, f64::min);
    Verdict::new(drift <= 1e-6, format!("10000 steps, relative drift {drift:.2e} (<= 1e-6), final zone spread {spread:.2e} K"))
}

pub fn single_zone(window: f64, mass: f64) -> ZoneSpec {
    ZoneSpec {
        id: 1,
        floor_area: 100.0,
        height: 3.0,
        window_area: window,
        window_absorptance: 0.5,
        thermal_mass_multiplier: mass,
        internal_gain_occupied: 800.0,
        internal_gain_vacant: 50.0,
    }
}

/// Root of a monotone decreasing balance by bisection.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    assert!(f(lo) > 0.0 && f(hi) < 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid
        } else {
            hi = mid
        }
    }
    0.5 * (lo + hi)
}

/// Forced single zone against a fixed outdoor boundary, with and without a
/// radiant window. Returns (worst |T_sim - T_oracle| K, worst residual W).
pub fn steady_state_check() -> (f64, f64) {
    let air = AirProperties::default();
    let cases = [
        (Coupling::conductive(1, Endpoint::OUTDOOR, 120.0, 0.04, 0.1), 0.0),
        (Coupling::convective(1, Endpoint::OUTDOOR, 40.0, 3.0), 0.0),
        (Coupling::convective(1, Endpoint::OUTDOOR, 40.0, 3.0), 6.0),
    ];
    let (outdoor, t_sol, supply, flow): (f64, f64, f64, f64) = (268.0, 285.0, 310.0, 0.05);
    let (mut worst_t, mut worst_q) = (0.0_f64, 0.0_f64);
    for (coupling, window) in cases {
        let zone = single_zone(window, 5.0);
        let g = coupling.conductance();
        let cp = air.specific_heat;
        let sigma = 5.670374419e-8;
        let balance = |t: f64| {
            zone.internal_gain_occupied + g * (outdoor - t) + flow * cp * (supply - t) + sigma * zone.window_absorptance * window * (t_sol.powi(4) - t.powi(4))
        };
        let oracle = bisect(balance, 200.0, 400.0);
        let model = BuildingModel::new(vec![zone], vec![coupling], air).unwrap();
        let weather = WeatherSample { minute: 0.0, outdoor, t_sol };
        let flows = [HvacFlow { mass_flow: flow, supply_temp: supply }];
        let dt = 60.0 / model.stable_substeps(&flows, 60.0) as f64;
        let mut state = ThermalState::uniform(1, 280.0);
        for _ in 0..200_000 {
            state = thermal::step(&model, &state, &weather, &flows, true, dt).unwrap();
        }
        worst_t = worst_t.max((state.zone_temps[0] - oracle).abs());
        let at_oracle = ThermalState::uniform(1, oracle);
        worst_q = worst_q.max(thermal::steady_state_residual(&model, &at_oracle, &weather, &flows, true).unwrap()[0]);
        worst_q = worst_q.max(thermal::steady_state_residual(&model, &state, &weather, &flows, true).unwrap()[0]);
    }
    (worst_t, worst_q)
}

pub fn criterion_steady_state() -> Verdict {
    let (dt, dq) = steady_state_check();
    Verdict::new(dt <= 0.05 && dq < 1.0, format!("worst |T - T*| {dt:.2e} K (<= 0.05), worst residual {dq:.2e} W (< 1)"))
}

// ---- toy MDP -------------------------------------------------------------

/// One zone, three temperature bins, ON/OFF. Deterministic: ON brings any
/// bin to comfortable; OFF lets a cold zone warm up, a comfortable zone
/// overheat and a hot zone stay hot.
pub struct ToyMdp {
    pub bins_f: [f64; 3],
    pub weights: RewardWeights,
    pub bands: FahrenheitBands,
    pub on_energy: f64,
    pub gamma: f64,
}

/// (bin, previous action), last action as 0 = off, 1 = on.
pub type ToyState = (usize, usize);

impl Default for ToyMdp {
    fn default() -> Self {
        ToyMdp {
            bins_f: [66.0, 72.5, 79.0],
            weights: RewardWeights { eta_t: 1.0, eta_e: 1.0, eta_s: 1.0, safety_penalty: 1e6 },
            bands: FahrenheitBands::from(&ComfortBands::default()),
            on_energy: 0.5,
            gamma: 0.9,
        }
    }
}

impl ToyMdp {
    pub fn states() -> Vec<ToyState> {
        (0..3).flat_map(|b| (0..2).map(move |p| (b, p))).collect()
    }

    pub fn next(&self, (bin, _): ToyState, action: usize) -> ToyState {
        let bin = if action == 1 { 1 } else { [1, 2, 2][bin] };
        (bin, action)
    }

    pub fn reward(&self, s: ToyState, action: usize) -> f64 {
        let (bin, _) = self.next(s, action);
        let policy = |a: usize| ComfortPolicy::from_bit(a == 1);
        let l_t = comfort_loss(&[self.bins_f[bin]], &[policy(action)], true, &self.weights, &self.bands);
        let l_e = energy_loss(if action == 1 { self.on_energy } else { 0.0 }, &self.weights, 1.0);
        let l_s = smoothness_loss(&[policy(action)], &[policy(s.1)], &self.weights);
        l_t + l_e + l_s
    }

    pub fn encode(&self, (bin, prev): ToyState) -> StateVector {
        encode_state(80.0, true, &[self.bins_f[bin]], &[ComfortPolicy::from_bit(prev == 1)])
    }

    /// Exact Q by value iteration.
    pub fn value_iteration(&self) -> Vec<[f64; 2]> {
        let states = Self::states();
        let index = |s: ToyState| s.0 * 2 + s.1;
        let mut q = vec![[0.0_f64; 2]; states.len()];
        loop {
            let mut delta: f64 = 0.0;
            let mut next_q = q.clone();
            for &s in &states {
                for a in 0..2 {
                    let s2 = self.next(s, a);
                    let v2 = q[index(s2)][0].max(q[index(s2)][1]);
                    next_q[index(s)][a] = self.reward(s, a) + self.gamma * v2;
                    delta = delta.max((next_q[index(s)][a] - q[index(s)][a]).abs());
                }
            }
            q = next_q;
            if delta < 1e-12 {
                return q;
            }
        }
    }

    /// Greedy policy of a DQN trained off-policy under uniform exploration.
    pub fn train_dqn(&self, seed: u64, steps: usize) -> Vec<usize> {
        let hyper = Hyperparams {
            lr: 1e-3,
            gamma: self.gamma,
            epsilon: 1.0,
            batch_size: 32,
            buffer_capacity: 2000,
            min_buffer: 100,
            target_update: 50,
            hidden: vec![32, 32],
            optimizer: OptimizerKind::Adam,
            seed,
            ..Hyperparams::default()
        };
        let mut agent = DqnAgent::new(4, 2, hyper).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let states = Self::states();
        let mut s = states[0];
        for k in 0..steps {
            if k % 10 == 0 {
                s = states[rng.random_range(0..states.len())];
            }
            let x = self.encode(s);
            let a = agent.act(&x, true).0;
            let s2 = self.next(s, a);
            agent.observe(Transition { state: x, action: openplan_hvac::agent::ActionIndex(a), reward: self.reward(s, a), next_state: self.encode(s2) }).unwrap();
            s = s2;
        }
        states.iter().map(|&s| agent.act(&self.encode(s), false).0).collect()
    }
}

pub fn criterion_toy_mdp() -> Verdict {
    let t0 = Instant::now();
    let mdp = ToyMdp::default();
    let q = mdp.value_iteration();
    let oracle: Vec<usize> = q.iter().map(|v| if v[1] > v[0] { 1 } else { 0 }).collect();
    let learned = mdp.train_dqn(0, 8000);
    let matched = oracle.iter().zip(&learned).filter(|(a, b)| a == b).count();
    let secs = t0.elapsed().as_secs_f64();
    Verdict::new(
        matched == oracle.len() && secs < 60.0,
        format!("{matched}/{} states match value iteration (oracle {oracle:?}, learned {learned:?}), {secs:.1}s (< 60s)", oracle.len()),
    )
}

// ---- metric exactness ----------------------------------------------------

/// Ten steps of six zones; the first eight are work steps.
pub const HAND_LOG: [[f64; 6]; 10] = [
    [71.0, 72.0, 73.0, 74.0, 75.0, 70.0],
    [70.9, 71.5, 72.5, 73.5, 74.1, 72.0],
    [72.0, 72.0, 72.0, 72.0, 72.0, 72.0],
    [60.0, 90.0, 71.0, 74.0, 74.0, 71.0],
    [68.0, 69.0, 70.0, 75.5, 76.0, 77.0],
    [73.9, 71.1, 72.2, 73.3, 70.99, 74.01],
    [71.0, 71.0, 71.0, 71.0, 71.0, 71.0],
    [80.0, 72.0, 80.0, 72.0, 80.0, 72.0],
    [50.0, 50.0, 50.0, 50.0, 50.0, 50.0],
    [72.0, 72.0, 72.0, 72.0, 72.0, 72.0],
];

/// In-band zone-steps among the work steps of [`HAND_LOG`], counted by hand:
/// 4 + 4 + 6 + 4 + 0 + 4 + 6 + 3.
pub const HAND_IN_BAND: u32 = 31;
pub const HAND_WORK_STEPS: u32 = 8;

pub fn hand_log() -> EpisodeLog {
    let mut log = EpisodeLog::new(6);
    for (k, temps) in HAND_LOG.iter().enumerate() {
        log.push(StepRecord {
            t_min: 12.0 * k as f64,
            outdoor_f: 50.0,
            zone_f: temps.to_vec(),
            logical: vec![ComfortPolicy::On; 6],
            physical: vec![PhysicalCommand::Idle; 6],
            energy_j: 1000.0 * k as f64,
            reward: RewardBreakdown::default(),
            work: k < HAND_WORK_STEPS as usize,
        });
    }
    log
}

pub fn criterion_metrics() -> Verdict {
    let log = hand_log();
    let bands = FahrenheitBands::from(&ComfortBands::default());
    let got = ccr(&log, &bands).unwrap();
    let want = HAND_IN_BAND as f64 / (HAND_WORK_STEPS * 6) as f64;
    let saving = energy_saving_ratio(&log, &log).unwrap();
    Verdict::new(got == want && saving == 0.0, format!("ccr {got} == {HAND_IN_BAND}/48, saving(x, x) = {saving}"))
}

// ---- shared fixtures ------------------------------------------------------

pub fn reference_building() -> Building {
    BuildingConfig::reference_open().build().unwrap()
}

/// Safe band plus hysteresis slack, °F.
pub const SAFE_LOW_F: f64 = 60.0 - 0.6;
pub const SAFE_HIGH_F: f64 = 90.0 + 0.6;

pub fn print_verdict(id: u32, name: &str, v: &Verdict) {
    println!("criterion {id:2} {name:<24} {} {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
}

//! Episode logs and the evaluation metrics computed from them.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::plant::{ComfortPolicy, PhysicalCommand};
use crate::reward::{toggles, FahrenheitBands, RewardBreakdown};

/// One control step. Temperatures are the zone state at the end of the step
/// that started at `t_min`; action, energy and reward belong to that step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t_min: f64,
    pub outdoor_f: f64,
    pub zone_f: Vec<f64>,
    pub logical: Vec<ComfortPolicy>,
    pub physical: Vec<PhysicalCommand>,
    pub energy_j: f64,
    pub reward: RewardBreakdown,
    pub work: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpisodeLog {
    pub zones: usize,
    pub records: Vec<StepRecord>,
}

impl EpisodeLog {
    pub fn new(zones: usize) -> Self {
        EpisodeLog { zones, records: Vec::new() }
    }

    pub fn push(&mut self, record: StepRecord) {
        debug_assert_eq!(record.zone_f.len(), self.zones);
        self.records.push(record);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn total_energy(&self) -> f64 {
        self.records.iter().map(|r| r.energy_j).sum()
    }

    pub fn total_reward(&self) -> f64 {
        self.records.iter().map(|r| r.reward.total).sum()
    }

    pub fn header(&self) -> Vec<String> {
        let n = self.zones;
        let mut h = vec!["t_min".to_string(), "outdoor_F".to_string()];
        h.extend((1..=n).map(|i| format!("zone{i}_F")));
        h.extend((1..=n).map(|i| format!("vav{i}")));
        h.extend((1..=n).map(|i| format!("phys{i}")));
        h.extend(["energy_J", "l_t", "l_e", "l_s", "reward", "work"].map(String::from));
        h
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(self.header()).map_err(csv_err)?;
        for r in &self.records {
            let mut row: Vec<String> = Vec::with_capacity(5 + 3 * self.zones + 6);
            row.push(r.t_min.to_string());
            row.push(r.outdoor_f.to_string());
            row.extend(r.zone_f.iter().map(f64::to_string));
            row.extend(r.logical.iter().map(|p| if p.is_on() { "1" } else { "0" }.to_string()));
            row.extend(r.physical.iter().map(|c| c.label().to_string()));
            row.push(r.energy_j.to_string());
            row.push(r.reward.l_t.to_string());
            row.push(r.reward.l_e.to_string());
            row.push(r.reward.l_s.to_string());
            row.push(r.reward.total.to_string());
            row.push(if r.work { "1" } else { "0" }.to_string());
            out.write_record(&row).map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::from(e).context(format!("creating {}", path.display())))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Format(format!("{other:?}")),
    }
}

fn ratio_in_band<'a>(records: impl Iterator<Item = &'a StepRecord>, bands: &FahrenheitBands) -> Option<f64> {
    let (mut inside, mut total) = (0u64, 0u64);
    for r in records {
        for &t in &r.zone_f {
            total += 1;
            if bands.in_comfort(t) {
                inside += 1;
            }
        }
    }
    (total > 0).then(|| inside as f64 / total as f64)
}

/// Work-hour comfort compliance ratio.
pub fn ccr(log: &EpisodeLog, bands: &FahrenheitBands) -> Result<f64> {
    ratio_in_band(log.records.iter().filter(|r| r.work), bands).ok_or_else(|| Error::UndefinedMetric("CCR over an empty work-hour set".into()))
}

pub fn cvr(log: &EpisodeLog, bands: &FahrenheitBands) -> Result<f64> {
    Ok(1.0 - ccr(log, bands)?)
}

/// Compliance over every logged step.
pub fn ccr_full_time(log: &EpisodeLog, bands: &FahrenheitBands) -> Result<f64> {
    ratio_in_band(log.records.iter(), bands).ok_or_else(|| Error::UndefinedMetric("CCR over an empty log".into()))
}

/// `100 * (1 - E_candidate / E_baseline)`.
pub fn energy_saving_ratio(candidate: &EpisodeLog, baseline: &EpisodeLog) -> Result<f64> {
    let base = baseline.total_energy();
    if base == 0.0 {
        return Err(Error::UndefinedMetric("baseline consumed no energy".into()));
    }
    Ok(100.0 * (1.0 - candidate.total_energy() / base))
}

/// Time-mean of the across-zone range and population variance, °F and °F².
pub fn homogeneity_stats(log: &EpisodeLog) -> (f64, f64) {
    if log.records.is_empty() {
        return (0.0, 0.0);
    }
    let (mut range_sum, mut var_sum) = (0.0, 0.0);
    for r in &log.records {
        let n = r.zone_f.len() as f64;
        let max = r.zone_f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = r.zone_f.iter().copied().fold(f64::INFINITY, f64::min);
        let mean = r.zone_f.iter().sum::<f64>() / n;
        range_sum += max - min;
        var_sum += r.zone_f.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / n;
    }
    let steps = log.records.len() as f64;
    (range_sum / steps, var_sum / steps)
}

/// Logical toggles between consecutive logged steps, over all units.
pub fn transition_count(log: &EpisodeLog) -> usize {
    log.records.windows(2).map(|w| toggles(&w[1].logical, &w[0].logical)).sum()
}

/// Zone-steps outside `[low, high]` °F.
pub fn excursions(log: &EpisodeLog, low: f64, high: f64) -> usize {
    log.records.iter().flat_map(|r| &r.zone_f).filter(|&&t| t < low || t > high).count()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub label: String,
    pub steps: usize,
    pub ccr: f64,
    pub cvr: f64,
    pub ccr_full_time: f64,
    pub total_mj: f64,
    pub saving_pct: Option<f64>,
    pub delta_t_f: f64,
    pub variance_t_f2: f64,
    pub transitions: usize,
    pub total_reward: f64,
}

impl RunSummary {
    pub fn from_log(label: impl Into<String>, log: &EpisodeLog, bands: &FahrenheitBands, baseline: Option<&EpisodeLog>) -> Result<Self> {
        let ccr = ccr(log, bands)?;
        let (delta_t_f, variance_t_f2) = homogeneity_stats(log);
        Ok(RunSummary {
            label: label.into(),
            steps: log.len(),
            ccr,
            cvr: 1.0 - ccr,
            ccr_full_time: ccr_full_time(log, bands)?,
            total_mj: log.total_energy() / 1e6,
            saving_pct: baseline.map(|b| energy_saving_ratio(log, b)).transpose()?,
            delta_t_f,
            variance_t_f2,
            transitions: transition_count(log),
            total_reward: log.total_reward(),
        })
    }

    pub fn to_text(&self) -> String {
        let saving = self.saving_pct.map_or_else(|| "n/a".to_string(), |s| format!("{s:.2}%"));
        format!(
            "run: {}\nsteps: {}\nCCR (work hours): {:.4}\nCVR (work hours): {:.4}\nCCR (all steps): {:.4}\nenergy: {:.3} MJ\nsaving vs baseline: {}\nmean zone range: {:.4} F\nmean zone variance: {:.4} F^2\ntransitions: {}\ntotal reward: {:.6}\n",
            self.label, self.steps, self.ccr, self.cvr, self.ccr_full_time, self.total_mj, saving, self.delta_t_f, self.variance_t_f2, self.transitions, self.total_reward
        )
    }
}

pub fn write_summaries_csv<W: Write>(summaries: &[RunSummary], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for s in summaries {
        out.serialize(s).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// Writes `summary.csv` and `summary.txt` into `dir`.
pub fn save_summaries(dir: &Path, summaries: &[RunSummary]) -> Result<()> {
    write_summaries_csv(summaries, std::fs::File::create(dir.join("summary.csv"))?)?;
    let text: String = summaries.iter().map(RunSummary::to_text).collect::<Vec<_>>().join("\n");
    std::fs::write(dir.join("summary.txt"), text)?;
    Ok(())
}

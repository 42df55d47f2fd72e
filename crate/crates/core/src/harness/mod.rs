//! Reproducible experiment runner: configs, seeded replications, sweeps and
//! file emission.

pub mod config;
pub mod selfcheck;

use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learner::{run, RunOutput, Variant};
use crate::network::NetworkState;

pub use config::{ExperimentConfig, ResolvedExperiment, ResolvedParams, StepSizeSpec};

/// Seeds of one replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedPair {
    pub replication: u64,
    pub init: u64,
    pub sampling: u64,
}

/// Replication `k` uses seed `master + k`, split into an init stream and a
/// sampling stream. Neither depends on the width.
pub fn split_seed(master: u64, k: u64) -> SeedPair {
    let replication = master.wrapping_add(k);
    let draw = |stream: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(replication);
        rng.set_stream(stream);
        rng.next_u64()
    };
    SeedPair { replication, init: draw(1), sampling: draw(2) }
}

/// Per-run summary written next to the trace. Carries no timing so that
/// identical inputs give identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub tag: String,
    pub replication_index: u64,
    pub seeds: SeedPair,
    pub params: ResolvedParams,
    pub value_norm_pi: f64,
    pub steps: u64,
    pub t1: Option<u64>,
    pub event_ok: bool,
    pub final_err_pi: f64,
    pub final_avg_err_pi: f64,
    pub final_msbe: f64,
    pub peak_drift_sqrt_m: f64,
}

pub struct Replication {
    pub record: RunRecord,
    pub output: RunOutput,
}

pub fn file_stem(tag: &str, seed: u64) -> String {
    format!("{tag}_{seed}")
}

/// Runs replication `k` without touching the file system.
pub fn execute_replication(exp: &ResolvedExperiment, k: u64) -> Result<Replication> {
    let seeds = split_seed(exp.config.replication.master_seed, k);
    let p = &exp.params;
    let net = NetworkState::init_seeded(p.width, p.d, seeds.init)?;
    let output = run(&exp.mrp, net, &p.learner_config(seeds.sampling), &exp.value)?;
    let s = &output.trace.summary;
    let record = RunRecord {
        tag: exp.config.tag.clone(),
        replication_index: k,
        seeds,
        params: p.clone(),
        value_norm_pi: exp.mrp.weighted_norm(&exp.value)?,
        steps: s.steps,
        t1: s.t1,
        event_ok: s.t1.is_none(),
        final_err_pi: s.final_err_pi,
        final_avg_err_pi: s.final_avg_err_pi,
        final_msbe: s.final_msbe,
        peak_drift_sqrt_m: s.peak_drift_sqrt_m,
    };
    Ok(Replication { record, output })
}

/// Writes `bytes` to a sibling temp file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn prepare_out_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Error::Config(format!("logging.out_dir: cannot create {}: {e}", dir.display())))?;
    let probe = dir.join(".ntd_write_probe");
    std::fs::write(&probe, b"")
        .map_err(|e| Error::Config(format!("logging.out_dir: {} is not writable: {e}", dir.display())))?;
    let _ = std::fs::remove_file(probe);
    Ok(())
}

/// Files produced by one replication.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunFiles {
    pub trace_csv: PathBuf,
    pub summary_json: PathBuf,
    pub checkpoint_json: PathBuf,
}

pub fn run_files(dir: &Path, tag: &str, seed: u64) -> RunFiles {
    let stem = file_stem(tag, seed);
    RunFiles {
        trace_csv: dir.join(format!("{stem}.csv")),
        summary_json: dir.join(format!("{stem}.json")),
        checkpoint_json: dir.join(format!("{stem}.net.json")),
    }
}

fn emit(dir: &Path, rep: &Replication) -> Result<RunFiles> {
    let files = run_files(dir, &rep.record.tag, rep.record.seeds.replication);
    write_atomic(&files.trace_csv, &rep.output.trace.to_csv_bytes()?)?;
    write_atomic(&files.checkpoint_json, &serde_json::to_vec(&rep.output.net)?)?;
    let mut summary = serde_json::to_vec_pretty(&rep.record)?;
    summary.push(b'\n');
    write_atomic(&files.summary_json, &summary)?;
    Ok(files)
}

/// Runs every replication in parallel and writes `{tag}_{seed}.csv`,
/// `{tag}_{seed}.json` and the network checkpoint `{tag}_{seed}.net.json`.
pub fn cmd_run(exp: &ResolvedExperiment, out_dir: &Path) -> Result<Vec<(RunRecord, f64)>> {
    prepare_out_dir(out_dir)?;
    let n = exp.config.replication.n_seeds;
    let results: Vec<Result<(RunRecord, f64)>> = (0..n)
        .into_par_iter()
        .map(|k| match execute_replication(exp, k) {
            Ok(rep) => {
                emit(out_dir, &rep)?;
                Ok((rep.record, rep.output.trace.summary.wall_clock_secs))
            }
            Err(Error::Divergence { t, trace }) => {
                if let Some(trace) = &trace {
                    let seed = split_seed(exp.config.replication.master_seed, k).replication;
                    let files = run_files(out_dir, &exp.config.tag, seed);
                    write_atomic(&files.trace_csv, &trace.to_csv_bytes()?)?;
                }
                Err(Error::Divergence { t, trace })
            }
            Err(e) => Err(e),
        })
        .collect();
    results.into_iter().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    #[serde(rename = "m")]
    Width,
    #[serde(rename = "alpha")]
    StepSize,
    #[serde(rename = "variant")]
    Variant,
    #[serde(rename = "R")]
    Radius,
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "m" => Ok(SweepAxis::Width),
            "alpha" => Ok(SweepAxis::StepSize),
            "variant" => Ok(SweepAxis::Variant),
            "R" => Ok(SweepAxis::Radius),
            other => Err(Error::Config(format!("sweep axis {other:?}: expected m, alpha, variant or R"))),
        }
    }
}

impl std::fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SweepAxis::Width => "m",
            SweepAxis::StepSize => "alpha",
            SweepAxis::Variant => "variant",
            SweepAxis::Radius => "R",
        })
    }
}

impl SweepAxis {
    /// The base config with this axis set to `value`.
    pub fn apply(&self, base: &ExperimentConfig, value: &str) -> Result<ExperimentConfig> {
        let bad = |e: &dyn std::fmt::Display| Error::Config(format!("sweep value {value:?} for axis {self}: {e}"));
        let mut cfg = base.clone();
        match self {
            SweepAxis::Width => cfg.network.width = value.parse().map_err(|e| bad(&e))?,
            SweepAxis::StepSize => {
                cfg.learner.step_size = if value == "theorem" {
                    StepSizeSpec::Named(value.into())
                } else {
                    StepSizeSpec::Fixed(value.parse().map_err(|e| bad(&e))?)
                }
            }
            SweepAxis::Variant => cfg.learner.variant = value.parse::<Variant>()?,
            SweepAxis::Radius => cfg.learner.radius = Some(value.parse().map_err(|e| bad(&e))?),
        }
        cfg.tag = format!("{}_{}{}", base.tag, self, value);
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: String,
    pub value: String,
    pub n_seeds: u64,
    pub median_final_avg_err_pi: f64,
    pub median_final_err_pi: f64,
    pub median_t1_indicator: f64,
    pub event_fraction: f64,
    pub wall_clock_secs: f64,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// One run set per axis value; writes the per-run files and
/// `{tag}_sweep_{axis}.csv`, returning the table rows in input order.
pub fn cmd_sweep(base: &ExperimentConfig, axis: SweepAxis, values: &[String], out_dir: &Path) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::Config("sweep: values list is empty".into()));
    }
    let exps: Vec<ResolvedExperiment> =
        values.iter().map(|v| axis.apply(base, v)?.resolve()).collect::<Result<_>>()?;
    prepare_out_dir(out_dir)?;
    let jobs: Vec<(usize, u64)> = exps
        .iter()
        .enumerate()
        .flat_map(|(i, e)| (0..e.config.replication.n_seeds).map(move |k| (i, k)))
        .collect();
    let results: Vec<Result<(usize, RunRecord, f64)>> = jobs
        .par_iter()
        .map(|&(i, k)| {
            let rep = execute_replication(&exps[i], k)?;
            emit(out_dir, &rep)?;
            Ok((i, rep.record, rep.output.trace.summary.wall_clock_secs))
        })
        .collect();
    let mut done = results.into_iter().collect::<Result<Vec<_>>>()?;
    done.sort_by_key(|(i, r, _)| (*i, r.replication_index));

    let rows: Vec<SweepRow> = values
        .iter()
        .enumerate()
        .map(|(i, value)| {
            let runs: Vec<_> = done.iter().filter(|(j, _, _)| *j == i).collect();
            let avg: Vec<f64> = runs.iter().map(|(_, r, _)| r.final_avg_err_pi).collect();
            let err: Vec<f64> = runs.iter().map(|(_, r, _)| r.final_err_pi).collect();
            let ind: Vec<f64> = runs.iter().map(|(_, r, _)| if r.t1.is_some() { 1.0 } else { 0.0 }).collect();
            SweepRow {
                axis: axis.to_string(),
                value: value.clone(),
                n_seeds: runs.len() as u64,
                median_final_avg_err_pi: median(&avg),
                median_final_err_pi: median(&err),
                median_t1_indicator: median(&ind),
                event_fraction: runs.iter().filter(|(_, r, _)| r.event_ok).count() as f64 / runs.len() as f64,
                wall_clock_secs: runs.iter().map(|(_, _, w)| w).sum(),
            }
        })
        .collect();

    let mut w = csv::Writer::from_writer(Vec::new());
    for row in &rows {
        w.serialize(row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    write_atomic(&out_dir.join(format!("{}_sweep_{axis}.csv", base.tag)), &bytes)?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_split_is_deterministic_and_distinct() {
        let a = split_seed(7, 2);
        assert_eq!(a, split_seed(7, 2));
        assert_eq!(a.replication, 9);
        assert_ne!(a.init, a.sampling);
        assert_ne!(split_seed(7, 3).init, a.init);
        assert_eq!(split_seed(8, 1), split_seed(7, 2));
    }

    #[test]
    fn median_even_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
    }

    #[test]
    fn axis_parsing() {
        assert_eq!("R".parse::<SweepAxis>().unwrap(), SweepAxis::Radius);
        assert!("width".parse::<SweepAxis>().is_err());
    }
}

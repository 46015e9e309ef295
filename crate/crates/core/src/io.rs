//! File formats: versioned JSON artifacts, trial and raw-signal CSV, and
//! heatmap panels.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::coupling::Heatmap;
use crate::error::{Error, Result};
use crate::models::ModelSpec;
use crate::signal::RawSignal;
use crate::vf_reconstruction::{Trial, TrialSet};

pub const TRIAL_MANIFEST: &str = "manifest.json";

#[derive(Serialize)]
struct ArtifactOut<'a, T> {
    schema: &'a str,
    data: &'a T,
}

#[derive(Deserialize)]
struct ArtifactIn<T> {
    schema: String,
    data: T,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

pub fn write_artifact<T: Serialize>(path: &Path, schema: &str, data: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    let mut text = serde_json::to_string_pretty(&ArtifactOut { schema, data })?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn read_artifact<T: DeserializeOwned>(path: &Path, schema: &str) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let a: ArtifactIn<T> = serde_json::from_str(&text).map_err(|e| io_err(path, e))?;
    if a.schema != schema {
        return Err(io_err(
            path,
            format!("schema {} where {schema} was expected", a.schema),
        ));
    }
    Ok(a.data)
}

/// Full double precision, enough for a bit-exact round trip.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_f64(path: &Path, row: usize, s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| io_err(path, format!("row {row}: bad number {s:?}")))
}

pub fn write_trial_csv(path: &Path, trial: &Trial) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    let n = trial.n_oscillators();
    let mut header = vec!["t".to_string()];
    for i in 1..=n {
        header.push(format!("theta_{i}"));
        header.push(format!("r_{i}"));
    }
    w.write_record(&header).map_err(|e| io_err(path, e))?;
    let mut rec = Vec::with_capacity(2 * n + 1);
    for k in 0..trial.len() {
        rec.clear();
        rec.push(fmt_f64(trial.times[k]));
        for i in 0..n {
            rec.push(fmt_f64(trial.theta[i][k]));
            rec.push(fmt_f64(trial.r[i][k]));
        }
        w.write_record(&rec).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn read_trial_csv(path: &Path) -> Result<Trial> {
    let mut rd = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    let header = rd.headers().map_err(|e| io_err(path, e))?.clone();
    if header.len() < 3 || header.len() % 2 == 0 || header.get(0).map(str::trim) != Some("t") {
        return Err(io_err(path, "expected columns t, theta_1, r_1, ..."));
    }
    let n = (header.len() - 1) / 2;
    let mut trial = Trial {
        times: Vec::new(),
        theta: vec![Vec::new(); n],
        r: vec![Vec::new(); n],
    };
    for (row, rec) in rd.records().enumerate() {
        let rec = rec.map_err(|e| io_err(path, e))?;
        trial.times.push(parse_f64(path, row, &rec[0])?);
        for i in 0..n {
            trial.theta[i].push(parse_f64(path, row, &rec[1 + 2 * i])?);
            trial.r[i].push(parse_f64(path, row, &rec[2 + 2 * i])?);
        }
    }
    Ok(trial)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialManifest {
    pub model: Option<ModelSpec>,
    pub seed: Option<u64>,
    pub step: Option<f64>,
    pub metadata: String,
    pub n_oscillators: usize,
    pub files: Vec<String>,
}

pub const TRIAL_SCHEMA: &str = "pharec.trials/1";

pub fn trial_file_name(k: usize) -> String {
    format!("trial_{k:04}.csv")
}

pub fn write_trials(
    dir: &Path,
    set: &TrialSet,
    model: Option<&ModelSpec>,
    seed: Option<u64>,
) -> Result<TrialManifest> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let files: Vec<String> = (0..set.trials.len()).map(trial_file_name).collect();
    for (t, f) in set.trials.iter().zip(&files) {
        write_trial_csv(&dir.join(f), t)?;
    }
    let step = set
        .trials
        .first()
        .and_then(|t| Some(t.times.get(1)? - t.times.first()?));
    let manifest = TrialManifest {
        model: model.cloned(),
        seed,
        step,
        metadata: set.metadata.clone(),
        n_oscillators: set.n_oscillators,
        files,
    };
    write_artifact(&dir.join(TRIAL_MANIFEST), TRIAL_SCHEMA, &manifest)?;
    Ok(manifest)
}

/// Trials listed in the directory manifest, or every `*.csv` in name order
/// when there is none.
pub fn read_trials(dir: &Path) -> Result<TrialSet> {
    let mpath = dir.join(TRIAL_MANIFEST);
    let (files, metadata): (Vec<PathBuf>, String) = if mpath.exists() {
        let m: TrialManifest = read_artifact(&mpath, TRIAL_SCHEMA)?;
        (m.files.iter().map(|f| dir.join(f)).collect(), m.metadata)
    } else {
        let mut v: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(|e| io_err(dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect();
        v.sort();
        (v, format!("loaded:{}", dir.display()))
    };
    if files.is_empty() {
        return Err(io_err(dir, "no trial files"));
    }
    let trials = files
        .iter()
        .map(|f| read_trial_csv(f))
        .collect::<Result<Vec<_>>>()?;
    let n = trials[0].n_oscillators();
    let set = TrialSet {
        trials,
        n_oscillators: n,
        metadata,
    };
    set.validate()?;
    Ok(set)
}

/// Raw signals from a CSV with a `t` column followed by one column per channel.
pub fn read_signal_csv(path: &Path) -> Result<Vec<RawSignal>> {
    let mut rd = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    let header = rd.headers().map_err(|e| io_err(path, e))?.clone();
    if header.len() < 2 || header.get(0).map(str::trim) != Some("t") {
        return Err(io_err(path, "expected columns t, <channel>, ..."));
    }
    let labels: Vec<String> = header
        .iter()
        .skip(1)
        .map(|s| s.trim().to_string())
        .collect();
    let mut times = Vec::new();
    let mut values = vec![Vec::new(); labels.len()];
    for (row, rec) in rd.records().enumerate() {
        let rec = rec.map_err(|e| io_err(path, e))?;
        times.push(parse_f64(path, row, &rec[0])?);
        for (c, v) in values.iter_mut().enumerate() {
            v.push(parse_f64(path, row, &rec[c + 1])?);
        }
    }
    labels
        .into_iter()
        .zip(values)
        .map(|(l, v)| RawSignal::new(l, times.clone(), v))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PanelEntry {
    pub file: String,
    pub target: usize,
    pub source: usize,
    pub equation: crate::coupling::Equation,
    pub power_i: usize,
    pub power_j: usize,
    pub rows: Vec<String>,
    pub columns: Vec<String>,
}

pub const HEATMAP_SCHEMA: &str = "pharec.heatmaps/1";

/// One CSV per panel plus `manifest.json`; oscillators are numbered from 1
/// in file names and labels.
pub fn write_heatmaps(dir: &Path, maps: &[Heatmap]) -> Result<Vec<PanelEntry>> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut entries = Vec::new();
    for h in maps {
        let eq = match h.equation {
            crate::coupling::Equation::Phase => "phase",
            crate::coupling::Equation::Amplitude => "amplitude",
        };
        for p in &h.panels {
            let file = format!(
                "pair_{}_{}_{eq}_s{}{}.csv",
                h.target + 1,
                h.source + 1,
                p.power_i,
                p.power_j
            );
            let path = dir.join(&file);
            let mut w = csv::Writer::from_path(&path).map_err(|e| io_err(&path, e))?;
            let mut header = vec!["own".to_string()];
            header.extend(p.columns.iter().cloned());
            w.write_record(&header).map_err(|e| io_err(&path, e))?;
            for (label, row) in p.rows.iter().zip(&p.cells) {
                let mut rec = vec![label.clone()];
                rec.extend(row.iter().map(|v| fmt_f64(*v)));
                w.write_record(&rec).map_err(|e| io_err(&path, e))?;
            }
            w.flush().map_err(|e| io_err(&path, e))?;
            entries.push(PanelEntry {
                file,
                target: h.target,
                source: h.source,
                equation: h.equation,
                power_i: p.power_i,
                power_j: p.power_j,
                rows: p.rows.clone(),
                columns: p.columns.clone(),
            });
        }
    }
    write_artifact(&dir.join("manifest.json"), HEATMAP_SCHEMA, &entries)?;
    Ok(entries)
}

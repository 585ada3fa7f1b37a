//! Implementation of the `hardi` subcommands.
//!
//! Every file written here gets a `<file>.provenance.json` sidecar holding
//! the command name, the fully resolved settings and command-specific
//! details.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use hardi_recon::dictionary::{assemble_sensing_matrix, RidgeletSpec};
use hardi_recon::io::{
    field_to_bytes, fmt_f64, matrix_to_bytes, matrix_to_csv, read_directions, read_field, read_text,
    series_to_csv, write_bytes, directions_to_csv,
};
use hardi_recon::phantom::{phantom_by_name, GroundTruth};
use hardi_recon::solver::SolverParams;
use hardi_recon::sphere::{icosphere, UnitDirection};

use crate::config::{Cell, ExperimentConfig, Snr};
use crate::pipeline::{
    acquire, acquisition_directions, reconstruct, score, AnalysisParams, DictChoice, Metrics, Setup, SolverMode,
};

pub const TOOL_NAME: &str = "hardi";

/// Columns of `metrics.csv` written by `evaluate`.
pub const METRIC_COLUMNS: [&str; 10] = [
    "phantom",
    "b",
    "k",
    "snr_db",
    "dictionary",
    "mode",
    "seed",
    "nmse",
    "angular_error_deg",
    "false_detection_pct",
];

/// Columns of `results.csv` written by `sweep`.
pub const RESULT_COLUMNS: [&str; 14] = [
    "phantom",
    "b",
    "k",
    "snr_db",
    "dictionary",
    "mode",
    "seed",
    "status",
    "achieved_snr_db",
    "nmse",
    "angular_error_deg",
    "false_detection_pct",
    "bregman_iterations",
    "message",
];

/// Columns of `summary.csv` written by `sweep` (mean and sample standard
/// deviation over the seeds that completed).
pub const SUMMARY_COLUMNS: [&str; 14] = [
    "phantom",
    "b",
    "k",
    "snr_db",
    "dictionary",
    "mode",
    "n_ok",
    "n_failed",
    "nmse_mean",
    "nmse_std",
    "angular_error_deg_mean",
    "angular_error_deg_std",
    "false_detection_pct_mean",
    "false_detection_pct_std",
];

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".provenance.json");
    path.with_file_name(name)
}

fn provenance(command: &str, settings: &Value, details: &Value) -> Value {
    json!({
        "tool": TOOL_NAME,
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "settings": settings,
        "details": details,
    })
}

/// Writes `bytes` to `path` and the provenance record next to it.
pub fn write_output(path: &Path, bytes: &[u8], prov: &Value) -> anyhow::Result<()> {
    write_bytes(path, bytes)?;
    let text = serde_json::to_string_pretty(prov)? + "\n";
    write_bytes(&sidecar_path(path), text.as_bytes())?;
    Ok(())
}

pub fn read_provenance(path: &Path) -> Option<Value> {
    let text = std::fs::read_to_string(sidecar_path(path)).ok()?;
    serde_json::from_str(&text).ok()
}

/// How a signal field was produced; carried from `gen-phantom` to
/// `reconstruct` to `evaluate`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionInfo {
    pub phantom: Option<String>,
    pub b: Option<f64>,
    pub k: Option<usize>,
    pub snr_db: Option<Snr>,
    pub seed: Option<u64>,
    pub achieved_snr_db: Option<Snr>,
}

// ---------------------------------------------------------------- gen-phantom

#[derive(Clone, Debug, Serialize)]
pub struct GenPhantomArgs {
    pub phantom: String,
    pub b: f64,
    pub k: usize,
    pub snr: Snr,
    pub seed: u64,
    /// Keep only this many of the `k` spiral directions (greedy max-min angle).
    pub subset: Option<usize>,
    pub out_dir: PathBuf,
}

#[derive(Clone, Debug)]
pub struct GenPhantomOutput {
    pub clean: PathBuf,
    pub noisy: PathBuf,
    pub directions: PathBuf,
    pub truth: PathBuf,
    pub achieved_snr_db: f64,
}

pub fn gen_phantom(args: &GenPhantomArgs) -> anyhow::Result<GenPhantomOutput> {
    phantom_by_name(&args.phantom)?;
    let (k, pool) = match args.subset {
        Some(s) => (s, Some(args.k)),
        None => (args.k, None),
    };
    let acq = acquire(&args.phantom, args.b, k, args.snr.db(), args.seed, pool)?;
    let info = AcquisitionInfo {
        phantom: Some(args.phantom.clone()),
        b: Some(args.b),
        k: Some(k),
        snr_db: Some(args.snr),
        seed: Some(args.seed),
        achieved_snr_db: Some(Snr(acq.achieved_snr_db)),
    };
    let settings = serde_json::to_value(args)?;
    let prov = provenance(
        "gen-phantom",
        &settings,
        &json!({ "acquisition": info, "dims": acq.phantom.dims, "layout": acq.phantom.layout }),
    );
    let out = GenPhantomOutput {
        clean: args.out_dir.join("clean.field"),
        noisy: args.out_dir.join("noisy.field"),
        directions: args.out_dir.join("directions.csv"),
        truth: args.out_dir.join("truth.json"),
        achieved_snr_db: acq.achieved_snr_db,
    };
    write_output(&out.clean, &field_to_bytes(&acq.clean), &prov)?;
    write_output(&out.noisy, &field_to_bytes(&acq.noisy), &prov)?;
    write_output(&out.directions, directions_to_csv(&acq.directions).as_bytes(), &prov)?;
    let truth = serde_json::to_string_pretty(&acq.phantom.ground_truth())? + "\n";
    write_output(&out.truth, truth.as_bytes(), &prov)?;
    log::info!(
        "{}: K={} b={} target {} dB, achieved {:.3} dB",
        args.phantom,
        k,
        args.b,
        args.snr,
        acq.achieved_snr_db
    );
    Ok(out)
}

// ----------------------------------------------------------------- build-dict

#[derive(Clone, Debug, Serialize)]
pub struct BuildDictArgs {
    pub dict: DictChoice,
    pub b: f64,
    /// Directions file; when absent a spiral of `k` directions is used.
    pub directions: Option<PathBuf>,
    pub k: usize,
    pub subset: Option<usize>,
    pub ridgelet: RidgeletSpec,
    pub csv: bool,
    pub out_dir: PathBuf,
}

pub fn build_dict(args: &BuildDictArgs) -> anyhow::Result<Value> {
    let dirs = resolve_directions(args.directions.as_deref(), args.k, args.subset)?;
    let dictionary = args.dict.build(&args.ridgelet, args.b)?;
    let sensing = assemble_sensing_matrix(&dictionary, &dirs)?;
    let header = json!({
        "dictionary": args.dict,
        "kind": dictionary.kind,
        "K": sensing.matrix().rows(),
        "M": sensing.matrix().cols(),
        "level_counts": dictionary.level_counts,
    });
    let prov = provenance("build-dict", &serde_json::to_value(args)?, &header);
    write_output(
        &args.out_dir.join("sensing.bin"),
        &matrix_to_bytes(dictionary.kind, sensing.matrix()),
        &prov,
    )?;
    if args.csv {
        write_output(&args.out_dir.join("sensing.csv"), matrix_to_csv(sensing.matrix()).as_bytes(), &prov)?;
    }
    write_output(
        &args.out_dir.join("dictionary.json"),
        (serde_json::to_string_pretty(&header)? + "\n").as_bytes(),
        &prov,
    )?;
    Ok(header)
}

fn resolve_directions(file: Option<&Path>, k: usize, subset: Option<usize>) -> anyhow::Result<Vec<UnitDirection>> {
    match (file, subset) {
        (Some(f), None) => Ok(read_directions(f)?),
        (Some(f), Some(s)) => Ok(hardi_recon::sphere::select_subset(&read_directions(f)?, s)?),
        (None, Some(s)) => Ok(acquisition_directions(s, Some(k))?),
        (None, None) => Ok(acquisition_directions(k, None)?),
    }
}

// ---------------------------------------------------------------- reconstruct

#[derive(Clone, Debug, Serialize)]
pub struct ReconstructArgs {
    pub signal: PathBuf,
    pub directions: PathBuf,
    pub dict: DictChoice,
    pub mode: SolverMode,
    /// Falls back to the b-value recorded with the signal.
    pub b: Option<f64>,
    pub solver: SolverParams,
    pub analysis: AnalysisParams,
    pub ridgelet: RidgeletSpec,
    pub prefilter_tv: bool,
    pub out_dir: PathBuf,
}

/// Metadata written to `reconstruction.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionInfo {
    pub dictionary: DictChoice,
    pub mode: SolverMode,
    pub b: f64,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub level_counts: Vec<(i32, usize)>,
    pub dims: [usize; 3],
    pub bregman_iterations: usize,
    pub degenerate_odf_voxels: Vec<usize>,
    pub solver: SolverParams,
    pub analysis: AnalysisParams,
    pub prefilter_tv: bool,
    pub acquisition: AcquisitionInfo,
}

fn acquisition_of(signal: &Path) -> AcquisitionInfo {
    read_provenance(signal)
        .and_then(|p| serde_json::from_value(p["details"]["acquisition"].clone()).ok())
        .unwrap_or_default()
}

pub fn reconstruct_cmd(args: &ReconstructArgs) -> anyhow::Result<ReconstructionInfo> {
    let signal = read_field(&args.signal)?;
    let dirs = read_directions(&args.directions)?;
    if dirs.len() != signal.channels() {
        bail!(
            "{} has {} directions but {} has {} channels",
            args.directions.display(),
            dirs.len(),
            args.signal.display(),
            signal.channels()
        );
    }
    let acquisition = acquisition_of(&args.signal);
    let b = args
        .b
        .or(acquisition.b)
        .ok_or_else(|| anyhow!("no b-value given and none recorded for {}", args.signal.display()))?;
    let setup = Setup::new(args.dict, &args.ridgelet, b, &dirs, &args.analysis)?;
    let rec = reconstruct(&setup, &signal, args.mode, &args.solver, args.prefilter_tv, &args.analysis)?;

    let info = ReconstructionInfo {
        dictionary: args.dict,
        mode: args.mode,
        b,
        k: dirs.len(),
        m: setup.dictionary.len(),
        level_counts: setup.dictionary.level_counts.clone(),
        dims: signal.dims(),
        bregman_iterations: rec.bregman_iterations,
        degenerate_odf_voxels: rec.odf.degenerate.clone(),
        solver: args.solver.clone(),
        analysis: args.analysis.clone(),
        prefilter_tv: args.prefilter_tv,
        acquisition,
    };
    let prov = provenance("reconstruct", &serde_json::to_value(args)?, &serde_json::to_value(&info)?);
    let dir = &args.out_dir;
    write_output(&dir.join("coefficients.field"), &field_to_bytes(&rec.coefficients), &prov)?;
    write_output(&dir.join("reference_signal.field"), &field_to_bytes(&rec.reference_signal), &prov)?;
    write_output(&dir.join("odf.field"), &field_to_bytes(&rec.odf.values), &prov)?;
    write_output(
        &dir.join("modes.json"),
        (serde_json::to_string_pretty(&rec.modes)? + "\n").as_bytes(),
        &prov,
    )?;
    write_output(
        &dir.join("trace.csv"),
        series_to_csv("iteration,objective,feasibility", &[&rec.objective_trace, &rec.feasibility_trace]).as_bytes(),
        &prov,
    )?;
    write_output(
        &dir.join("reconstruction.json"),
        (serde_json::to_string_pretty(&info)? + "\n").as_bytes(),
        &prov,
    )?;
    Ok(info)
}

// ------------------------------------------------------------------- evaluate

#[derive(Clone, Debug, Serialize)]
pub struct EvaluateArgs {
    pub truth: PathBuf,
    pub recon_dir: PathBuf,
    pub out_dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRow {
    pub phantom: String,
    pub b: f64,
    pub k: usize,
    pub snr_db: Option<Snr>,
    pub dictionary: DictChoice,
    pub mode: SolverMode,
    pub seed: Option<u64>,
    pub metrics: Metrics,
}

impl EvaluationRow {
    pub fn csv_line(&self) -> String {
        [
            self.phantom.clone(),
            fmt_f64(self.b),
            self.k.to_string(),
            self.snr_db.map(|s| s.to_string()).unwrap_or_default(),
            self.dictionary.to_string(),
            self.mode.to_string(),
            self.seed.map(|s| s.to_string()).unwrap_or_default(),
            fmt_f64(self.metrics.nmse),
            fmt_f64(self.metrics.angular_error_deg),
            fmt_f64(self.metrics.false_detection_pct),
        ]
        .join(",")
    }
}

pub fn evaluate_cmd(args: &EvaluateArgs) -> anyhow::Result<EvaluationRow> {
    let truth: GroundTruth = serde_json::from_str(&read_text(&args.truth)?)
        .with_context(|| format!("{}: not a ground-truth file", args.truth.display()))?;
    let info_path = args.recon_dir.join("reconstruction.json");
    let info: ReconstructionInfo = serde_json::from_str(&read_text(&info_path)?)
        .with_context(|| format!("{}: not a reconstruction record", info_path.display()))?;
    let reference = read_field(&args.recon_dir.join("reference_signal.field"))?;
    let modes_path = args.recon_dir.join("modes.json");
    let modes = serde_json::from_str(&read_text(&modes_path)?)
        .with_context(|| format!("{}: not a mode set", modes_path.display()))?;

    let phantom = truth.to_phantom();
    if phantom.dims != reference.dims() {
        bail!(
            "truth grid {:?} does not match reconstruction grid {:?}",
            phantom.dims,
            reference.dims()
        );
    }
    let tess = icosphere(info.analysis.tessellation_order)?;
    let metrics = score(&phantom, info.b, &tess, &reference, &modes)?;
    let row = EvaluationRow {
        phantom: truth.name.clone(),
        b: info.b,
        k: info.k,
        snr_db: info.acquisition.snr_db,
        dictionary: info.dictionary,
        mode: info.mode,
        seed: info.acquisition.seed,
        metrics,
    };
    let prov = provenance("evaluate", &serde_json::to_value(args)?, &serde_json::to_value(&info)?);
    write_output(
        &args.out_dir.join("metrics.json"),
        (serde_json::to_string_pretty(&row)? + "\n").as_bytes(),
        &prov,
    )?;
    let csv = format!("{}\n{}\n", METRIC_COLUMNS.join(","), row.csv_line());
    write_output(&args.out_dir.join("metrics.csv"), csv.as_bytes(), &prov)?;
    Ok(row)
}

// ---------------------------------------------------------------------- sweep

#[derive(Clone, Debug, PartialEq)]
pub struct CellResult {
    pub cell: Cell,
    pub outcome: Result<CellOutcome, String>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellOutcome {
    pub achieved_snr_db: f64,
    pub metrics: Metrics,
    pub bregman_iterations: usize,
}

#[derive(Clone, Debug)]
pub struct SweepReport {
    pub results: Vec<CellResult>,
    pub results_csv: String,
    pub summary_csv: String,
}

impl SweepReport {
    pub fn failures(&self) -> usize {
        self.results.iter().filter(|r| r.outcome.is_err()).count()
    }
}

type SetupKey = (DictChoice, u64, usize);

/// Runs every cell of the grid. Cells execute in parallel on the current
/// rayon pool; the returned rows keep the grid order, so the CSV text does
/// not depend on scheduling.
pub fn run_sweep(cfg: &ExperimentConfig) -> anyhow::Result<SweepReport> {
    cfg.validate()?;
    let cells = cfg.cells();

    let mut keys: Vec<SetupKey> = cells.iter().map(|c| (c.dictionary, c.b.to_bits(), c.k)).collect();
    keys.sort();
    keys.dedup();
    let setups: BTreeMap<SetupKey, Result<Setup, String>> = keys
        .par_iter()
        .map(|&key @ (dict, b_bits, k)| {
            let setup = acquisition_directions(k, cfg.subset_pool)
                .and_then(|dirs| Setup::new(dict, &cfg.ridgelet, f64::from_bits(b_bits), &dirs, &cfg.analysis))
                .map_err(|e| e.to_string());
            (key, setup)
        })
        .collect();

    let results: Vec<CellResult> = cells
        .into_par_iter()
        .map(|cell| {
            let outcome = run_cell(cfg, &cell, &setups[&(cell.dictionary, cell.b.to_bits(), cell.k)]);
            match &outcome {
                Ok(o) => log::info!(
                    "{} b={} K={} snr={} {}-{} seed {}: nmse {:.4e}",
                    cell.phantom,
                    cell.b,
                    cell.k,
                    cell.snr,
                    cell.dictionary,
                    cell.mode,
                    cell.seed,
                    o.metrics.nmse
                ),
                Err(e) => log::warn!("cell {cell:?} failed: {e}"),
            }
            CellResult { cell, outcome }
        })
        .collect();

    let results_csv = results_to_csv(&results);
    let summary_csv = summarize(&results);
    Ok(SweepReport {
        results,
        results_csv,
        summary_csv,
    })
}

fn run_cell(cfg: &ExperimentConfig, cell: &Cell, setup: &Result<Setup, String>) -> Result<CellOutcome, String> {
    let setup = setup.as_ref().map_err(|e| format!("setup failed: {e}"))?;
    let acq = acquire(&cell.phantom, cell.b, cell.k, cell.snr.db(), cell.seed, cfg.subset_pool)
        .map_err(|e| e.to_string())?;
    let rec = reconstruct(setup, &acq.noisy, cell.mode, &cfg.solver, cfg.prefilter_tv, &cfg.analysis)
        .map_err(|e| e.to_string())?;
    let metrics = score(&acq.phantom, cell.b, &setup.tess, &rec.reference_signal, &rec.modes)
        .map_err(|e| e.to_string())?;
    Ok(CellOutcome {
        achieved_snr_db: acq.achieved_snr_db,
        metrics,
        bregman_iterations: rec.bregman_iterations,
    })
}

fn cell_prefix(cell: &Cell) -> String {
    [
        cell.phantom.clone(),
        fmt_f64(cell.b),
        cell.k.to_string(),
        cell.snr.to_string(),
        cell.dictionary.to_string(),
        cell.mode.to_string(),
    ]
    .join(",")
}

fn csv_safe(text: &str) -> String {
    text.replace([',', '\n', '\r', '"'], " ")
}

pub fn results_to_csv(results: &[CellResult]) -> String {
    let mut out = RESULT_COLUMNS.join(",") + "\n";
    for r in results {
        let fields = match &r.outcome {
            Ok(o) => [
                "ok".to_string(),
                fmt_f64(o.achieved_snr_db),
                fmt_f64(o.metrics.nmse),
                fmt_f64(o.metrics.angular_error_deg),
                fmt_f64(o.metrics.false_detection_pct),
                o.bregman_iterations.to_string(),
                String::new(),
            ],
            Err(e) => [
                "failed".to_string(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                csv_safe(e),
            ],
        };
        out.push_str(&format!("{},{},{}\n", cell_prefix(&r.cell), r.cell.seed, fields.join(",")));
    }
    out
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Mean and sample standard deviation over seeds, one row per grid point
/// in first-appearance order.
pub fn summarize(results: &[CellResult]) -> String {
    let mut groups: Vec<(String, Vec<&CellResult>)> = Vec::new();
    for r in results {
        let key = cell_prefix(&r.cell);
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(r),
            None => groups.push((key, vec![r])),
        }
    }
    let mut out = SUMMARY_COLUMNS.join(",") + "\n";
    for (key, rows) in groups {
        let ok: Vec<&CellOutcome> = rows.iter().filter_map(|r| r.outcome.as_ref().ok()).collect();
        let failed = rows.len() - ok.len();
        let collect = |f: fn(&Metrics) -> f64| -> (f64, f64) {
            mean_std(&ok.iter().map(|o| f(&o.metrics)).collect::<Vec<_>>())
        };
        let (nm, ns) = collect(|m| m.nmse);
        let (am, as_) = collect(|m| m.angular_error_deg);
        let (pm, ps) = collect(|m| m.false_detection_pct);
        out.push_str(&format!(
            "{key},{},{failed},{},{},{},{},{},{}\n",
            ok.len(),
            fmt_f64(nm),
            fmt_f64(ns),
            fmt_f64(am),
            fmt_f64(as_),
            fmt_f64(pm),
            fmt_f64(ps)
        ));
    }
    out
}

/// Runs the sweep and writes `results.csv` and `summary.csv` to `out_dir`.
pub fn sweep_cmd(cfg: &ExperimentConfig, out_dir: &Path) -> anyhow::Result<SweepReport> {
    let report = run_sweep(cfg)?;
    let prov = provenance(
        "sweep",
        &serde_json::to_value(cfg)?,
        &json!({ "cells": report.results.len(), "failed": report.failures() }),
    );
    write_output(&out_dir.join("results.csv"), report.results_csv.as_bytes(), &prov)?;
    write_output(&out_dir.join("summary.csv"), report.summary_csv.as_bytes(), &prov)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sidecar_names() {
        assert_eq!(
            sidecar_path(Path::new("out/noisy.field")),
            PathBuf::from("out/noisy.field.provenance.json")
        );
    }

    #[test]
    fn mean_and_std() {
        assert_eq!(mean_std(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 2f64.sqrt()).abs() < 1e-15);
        assert!(mean_std(&[]).0.is_nan());
    }

    #[test]
    fn csv_text_is_sanitised() {
        assert_eq!(csv_safe("a,b\nc"), "a b c");
    }
}

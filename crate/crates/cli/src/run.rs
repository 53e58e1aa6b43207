use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use tracing::info;

use homext::disk::assemble_disk_extension;
use homext::energy::{mesh_energy_with, series_bound, EnergyOptions};
use homext::export::{
    energy_csv, g_samples_csv, holder_csv, mesh_json, mesh_svg, series_csv, snowflake_json, snowflake_svg,
    MeshSide,
};
use homext::extension::check_homeomorphism_with;
use homext::snowflake::{
    claim_sample, eta_identity_check, holder_estimate_with, length_formula_check, quasisymmetry_probe,
    simplicity_check, ChoiceOracle, HolderOptions, SnowflakeState,
};
use homext::{build_extension, CircleMap, Parallelism};

use crate::config::{Command, ValidatedConfig};

/// Homeomorphism check sample size and comparability constant for the claim.
const OVERLAP_PAIRS: usize = 1000;
const CLAIM_PAIRS: usize = 1000;
const CLAIM_C: f64 = 4.0;
const QS_SAMPLES: usize = 10_000;
const G_SAMPLES: usize = 4096;

#[derive(Debug)]
pub enum RunError {
    Module(homext::Error),
    Io(String),
}

impl From<homext::Error> for RunError {
    fn from(e: homext::Error) -> Self {
        RunError::Module(e)
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Module(e) => write!(f, "{e}"),
            RunError::Io(e) => f.write_str(e),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Artifact {
    pub name: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteResult {
    pub name: String,
    pub passed: bool,
    pub details: Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub artifacts: Vec<Artifact>,
    /// Present for `verify`.
    pub suites: Option<Vec<SuiteResult>>,
}

impl Outcome {
    pub fn all_passed(&self) -> bool {
        self.suites.as_ref().is_none_or(|s| s.iter().all(|r| r.passed))
    }
}

struct Writer<'a> {
    dir: &'a Path,
    artifacts: Vec<Artifact>,
}

impl Writer<'_> {
    fn text(&mut self, name: &str, body: &str) -> Result<(), RunError> {
        let path = self.dir.join(name);
        fs::write(&path, body).map_err(|e| RunError::Io(format!("cannot write {}: {e}", path.display())))?;
        self.artifacts.push(Artifact {
            name: name.to_string(),
            bytes: body.len(),
            sha256: hex(&Sha256::digest(body.as_bytes())),
        });
        info!(artifact = name, bytes = body.len(), "wrote");
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), RunError> {
        let mut body = serde_json::to_string_pretty(value).map_err(|e| RunError::Io(e.to_string()))?;
        body.push('\n');
        self.text(name, &body)
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Runs the configured command, writing every artifact and the manifest into
/// the output directory.
pub fn run(cfg: &ValidatedConfig) -> Result<Outcome, RunError> {
    fs::create_dir_all(&cfg.out)
        .map_err(|e| RunError::Io(format!("cannot create {}: {e}", cfg.out.display())))?;
    let mut w = Writer {
        dir: &cfg.out,
        artifacts: Vec::new(),
    };
    w.json("config.json", cfg)?;
    let mut suites = None;
    match cfg.command {
        Command::Extend => extend(cfg, &mut w)?,
        Command::Energy => energy(cfg, &mut w)?,
        Command::Snowflake => snowflake(cfg, &mut w)?,
        Command::Bound => bound(cfg, &mut w)?,
        Command::Verify => {
            let results = verify(cfg)?;
            let passed = results.iter().all(|r| r.passed);
            w.json("verify.json", &json!({ "passed": passed, "suites": results }))?;
            suites = Some(results);
        }
    }
    let manifest = json!({
        "command": cfg.command,
        "config": cfg,
        "version": env!("CARGO_PKG_VERSION"),
        "artifacts": w.artifacts,
    });
    let artifacts = w.artifacts.clone();
    w.json("manifest.json", &manifest)?;
    Ok(Outcome { artifacts, suites })
}

fn extend(cfg: &ValidatedConfig, w: &mut Writer) -> Result<(), RunError> {
    info!(depth = cfg.depth, "building extension");
    let mesh = build_extension(&cfg.phi, cfg.depth)?;
    let report = check_homeomorphism_with(&mesh, OVERLAP_PAIRS, cfg.seed, Parallelism::default());
    w.json("mesh.json", &mesh_json(&mesh))?;
    w.text("source.svg", &mesh_svg(&mesh, MeshSide::Source))?;
    w.text("image.svg", &mesh_svg(&mesh, MeshSide::Image))?;
    w.json("homeomorphism.json", &report)
}

fn energy(cfg: &ValidatedConfig, w: &mut Writer) -> Result<(), RunError> {
    info!(depth = cfg.depth, p = cfg.energy.p(), beta = cfg.energy.beta(), "computing energy");
    let mesh = build_extension(&cfg.phi, cfg.depth)?;
    let opts = EnergyOptions {
        seed: cfg.seed,
        ..EnergyOptions::default()
    };
    let report = mesh_energy_with(&mesh, cfg.energy, &opts)?;
    w.json("energy.json", &report)?;
    w.text("energy.csv", &energy_csv(&report))
}

fn bound(cfg: &ValidatedConfig, w: &mut Writer) -> Result<(), RunError> {
    let bound = series_bound(&cfg.phi, cfg.energy, cfg.depth)?;
    w.json("series.json", &bound)?;
    w.text("series.csv", &series_csv(&bound))
}

fn snowflake(cfg: &ValidatedConfig, w: &mut Writer) -> Result<(), RunError> {
    info!(p = cfg.snowflake.p, generation = cfg.generation, "refining snowflake");
    let state = SnowflakeState::build(cfg.snowflake.clone(), cfg.generation)?;
    let opts = HolderOptions {
        seed: cfg.seed,
        ..HolderOptions::default()
    };
    let rows: Vec<_> = (1..=cfg.generation.max(1).min(state.generation()))
        .map(|n| {
            let s = state.truncated(n);
            (holder_estimate_with(&s, &opts), quasisymmetry_probe(&s, QS_SAMPLES, cfg.seed))
        })
        .collect();
    w.text("curve.svg", &snowflake_svg(&state))?;
    w.json("state.json", &snowflake_json(&state))?;
    w.text("holder.csv", &holder_csv(&rows))?;
    w.text("g_samples.csv", &g_samples_csv(&state, G_SAMPLES))
}

fn suite(name: &str, passed: bool, details: Value) -> SuiteResult {
    info!(suite = name, passed, "suite finished");
    SuiteResult {
        name: name.to_string(),
        passed,
        details,
    }
}

/// Every property suite on the configured data.
pub fn verify(cfg: &ValidatedConfig) -> Result<Vec<SuiteResult>, RunError> {
    let mut out = Vec::new();
    let mesh = build_extension(&cfg.phi, cfg.depth)?;
    let report = check_homeomorphism_with(&mesh, OVERLAP_PAIRS, cfg.seed, Parallelism::default());
    out.push(suite(
        "tiling",
        report.source_tiling_residual == 0.0 && report.image_tiling_residual.abs() <= 1e-9,
        json!({
            "source_residual": report.source_tiling_residual,
            "image_residual": report.image_tiling_residual,
        }),
    ));
    out.push(suite("homeomorphism", report.passed(), serde_json::to_value(&report).unwrap_or_default()));

    let energy = mesh_energy_with(
        &mesh,
        cfg.energy,
        &EnergyOptions {
            seed: cfg.seed,
            ..EnergyOptions::default()
        },
    )?;
    let q = &energy.quadrature_check;
    out.push(suite(
        "energy_quadrature",
        energy.total.is_finite() && q.max_rel_error <= 10.0 * q.rel_tol,
        json!({
            "total": energy.total,
            "cells_checked": q.cells_checked,
            "max_rel_error": q.max_rel_error,
            "max_cell_bound_ratio": energy.max_cell_bound_ratio,
        }),
    ));
    let bound = series_bound(&cfg.phi, cfg.energy, cfg.depth)?;
    out.push(suite(
        "series_bound",
        bound.violations == 0,
        json!({ "regime": bound.regime, "violations": bound.violations, "majorant_total": bound.majorant_total }),
    ));

    let disk_depth = cfg.depth.min(8);
    let circle = CircleMap::quarter_preserving(0.0, std::array::from_fn(|_| cfg.phi.clone()))?;
    let disk = match assemble_disk_extension(&circle, disk_depth) {
        Ok(d) => json!({ "passed": d.diagnostics().passed(), "central": d.diagnostics().central }),
        Err(e) => json!({ "passed": false, "error": e.to_string() }),
    };
    out.push(suite("disk", disk["passed"] == json!(true), disk));

    let state = SnowflakeState::build(cfg.snowflake.clone(), cfg.generation)?;
    let lengths = length_formula_check(&state);
    let mut details = serde_json::to_value(&lengths).unwrap_or_default();
    let mut ok = lengths.max_segment_rel_error <= 1e-12
        && lengths.max_param_rel_error <= 1e-12
        && lengths.max_partition_defect <= 1e-12;
    if cfg.snowflake.oracle == ChoiceOracle::AllBump {
        let expected = 4.0 * (4.0 * cfg.snowflake.p).powi(cfg.generation as i32);
        let rel = (state.perimeter() - expected).abs() / expected;
        details["perimeter_rel_error"] = json!(rel);
        ok &= rel <= 1e-12;
    }
    out.push(suite("snowflake_lengths", ok, details));
    let eta = eta_identity_check(&state);
    out.push(suite(
        "eta_identity",
        eta.max_residual <= 1e-10 && eta.violations == 0,
        serde_json::to_value(&eta).unwrap_or_default(),
    ));
    if state.generation() <= 6 {
        let simple = simplicity_check(&state);
        out.push(suite("simplicity", simple.is_simple(), serde_json::to_value(&simple).unwrap_or_default()));
    }
    if state.generation() >= 1 {
        let claim = claim_sample(&state, CLAIM_PAIRS, CLAIM_C, cfg.seed);
        out.push(suite(
            "claim",
            claim.ratio_violations == 0 && claim.n_bound_violations == 0,
            serde_json::to_value(&claim).unwrap_or_default(),
        ));
    }
    Ok(out)
}

use std::path::{Path, PathBuf};

use dirac_core::continuous::{
    recover_from_samples, relative_l2_error, sample_weyl, FourierParams, Grid, PhiSamples,
    PotentialGrid,
};
use dirac_core::discrete::system_from_beta;
use dirac_core::inverse::{
    classify_admissible_with, solve_inverse, Classification, InverseDiagnostics,
};
use dirac_core::linalg::{c, max_abs};
use dirac_core::random::random_beta_sequence;
use dirac_core::weyl::{taylor_from_system, WeylTaylorData};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, EXIT_CHECK_FAILED, EXIT_NOT_WEYL, EXIT_OK};
use crate::format::{
    csv_table, emit, read_json, to_json, PhiSamplesFile, PotentialFile, SystemFile, TaylorFile,
};

/// Largest `(n + 1) p` accepted by the round-trip driver.
pub const MAX_ROUNDTRIP_SIZE: usize = 64;

/// Writes a JSON side report to `path`, or to stderr.
fn side_report(path: Option<&Path>, json: &str) -> Result<(), CliError> {
    match path {
        Some(_) => emit(path, json),
        None => {
            eprint!("{json}");
            Ok(())
        }
    }
}

pub fn cmd_forward_discrete(cfg: &RunConfig, system: &Path) -> Result<i32, CliError> {
    let file: SystemFile = read_json(system, "system file")?;
    let beta = file.to_beta()?;
    let alpha = taylor_from_system(&beta)?;
    emit(
        cfg.out.as_deref(),
        &to_json(&TaylorFile::from_data(&alpha))?,
    )?;
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
pub struct DiagnosticsReport {
    pub classification: String,
    pub margin: f64,
    pub s_min_eigenvalue: f64,
    pub s_max_eigenvalue: f64,
    pub displacement_residual: f64,
    pub peel_margin: f64,
    pub stage_conditions: Vec<f64>,
    pub coisometry_deviation: f64,
    pub nondegeneracy: Vec<f64>,
}

impl From<&InverseDiagnostics> for DiagnosticsReport {
    fn from(d: &InverseDiagnostics) -> Self {
        Self {
            classification: d.classification.class.as_str().to_string(),
            margin: d.classification.margin,
            s_min_eigenvalue: d.min_eigenvalue,
            s_max_eigenvalue: d.max_eigenvalue,
            displacement_residual: d.displacement_residual,
            peel_margin: d.peel_margin,
            stage_conditions: d.stage_conditions.clone(),
            coisometry_deviation: d.coisometry_deviation,
            nondegeneracy: d.nondegeneracy.clone(),
        }
    }
}

pub fn cmd_inverse_discrete(cfg: &RunConfig, taylor: &Path) -> Result<i32, CliError> {
    let file: TaylorFile = read_json(taylor, "Taylor file")?;
    let alpha = file.to_data()?;
    let res = solve_inverse(&alpha)?;
    emit(
        cfg.out.as_deref(),
        &to_json(&SystemFile::from_beta(&res.beta)?)?,
    )?;
    side_report(
        cfg.report.as_deref(),
        &to_json(&DiagnosticsReport::from(&res.diagnostics))?,
    )?;
    Ok(EXIT_OK)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRow {
    pub trial: usize,
    pub seed: u64,
    /// `max_k |C_k - C_k'|`, infinite when reconstruction failed.
    pub c_deviation: f64,
    /// Relative deviation of the recomputed Taylor data.
    pub alpha_deviation: f64,
    pub passed: bool,
}

fn corrupt(alpha: &WeylTaylorData) -> WeylTaylorData {
    let mut coeffs = alpha.coefficients().to_vec();
    let last = coeffs.len() - 1;
    coeffs[last][(0, 0)] += c(0.25, 0.0);
    WeylTaylorData::new(alpha.p(), coeffs).expect("same shape as the input")
}

pub fn roundtrip_trial(seed: u64, n: usize, p: usize, corrupted: bool, tol: f64) -> TrialRow {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let beta = random_beta_sequence(&mut rng, n, p);
    let outcome = (|| -> dirac_core::Result<(f64, f64)> {
        let truth = system_from_beta(&beta)?;
        let mut alpha = taylor_from_system(&beta)?;
        if corrupted {
            alpha = corrupt(&alpha);
        }
        let res = solve_inverse(&alpha)?;
        let c_dev = res
            .system
            .coefficients()
            .iter()
            .zip(truth.coefficients())
            .map(|(x, y)| max_abs(&(x - y)))
            .fold(0.0, f64::max);
        let a_dev = taylor_from_system(&res.beta)?.relative_deviation(&alpha);
        Ok((c_dev, a_dev))
    })();
    let (c_deviation, alpha_deviation) = outcome.unwrap_or((f64::INFINITY, f64::INFINITY));
    TrialRow {
        trial: 0,
        seed,
        c_deviation,
        alpha_deviation,
        passed: c_deviation <= tol && alpha_deviation <= tol,
    }
}

pub fn cmd_roundtrip(
    cfg: &RunConfig,
    trials: usize,
    n: usize,
    p: usize,
    corrupted: bool,
) -> Result<i32, CliError> {
    if p == 0 || (n + 1) * p > MAX_ROUNDTRIP_SIZE {
        return Err(CliError::invalid(
            "invalid_size",
            format!("need p >= 1 and (n + 1) p <= {MAX_ROUNDTRIP_SIZE}, got n = {n}, p = {p}"),
        ));
    }
    let tol = cfg.tolerances.residual;
    let rows: Vec<TrialRow> = (0..trials)
        .into_par_iter()
        .map(|t| TrialRow {
            trial: t,
            ..roundtrip_trial(cfg.seed.wrapping_add(t as u64), n, p, corrupted, tol)
        })
        .collect();
    let mut text = String::from("trial,seed,n,p,c_deviation,alpha_deviation,status\n");
    for r in &rows {
        text.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.trial,
            r.seed,
            n,
            p,
            crate::format::fmt17(r.c_deviation),
            crate::format::fmt17(r.alpha_deviation),
            if r.passed { "PASS" } else { "FAIL" }
        ));
    }
    emit(cfg.out.as_deref(), &text)?;
    Ok(if rows.iter().all(|r| r.passed) {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    })
}

#[derive(Debug, Serialize)]
struct AdmissibleReport {
    classification: String,
    margin: f64,
}

/// Prints the classification; `NotWeyl` exits with code 3.
pub fn cmd_admissible(cfg: &RunConfig, taylor: &Path) -> Result<i32, CliError> {
    let file: TaylorFile = read_json(taylor, "Taylor file")?;
    let class = classify_admissible_with(&file.to_data()?, cfg.tolerances.admissibility);
    let report = AdmissibleReport {
        classification: class.class.as_str().to_string(),
        margin: class.margin,
    };
    emit(cfg.out.as_deref(), &to_json(&report)?)?;
    Ok(if class.class == Classification::NotWeyl {
        EXIT_NOT_WEYL
    } else {
        EXIT_OK
    })
}

pub enum ContinuousInput {
    Potential(PathBuf),
    PhiSamples(PathBuf),
}

#[derive(Debug, Serialize)]
pub struct ContinuousReport {
    pub p: usize,
    pub l: f64,
    pub n: usize,
    pub eta: f64,
    pub xi_max: f64,
    pub samples: usize,
    pub tail_estimate: f64,
    pub s_min_eigenvalue: f64,
    pub chi_coisometry_deviation: f64,
    pub beta_gram_trace_deviation: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_relative_l2_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_max_abs_error: Option<f64>,
    pub warnings: Vec<String>,
}

fn fourier_params(cfg: &RunConfig, m: f64, l: f64) -> FourierParams {
    FourierParams {
        tail_tolerance: cfg.continuous.tail_tolerance,
        ..FourierParams::new(m, l, cfg.continuous.eta_offset, cfg.continuous.xi_for(l))
    }
}

fn resample(truth: &PotentialGrid, grid: Grid) -> Result<PotentialGrid, CliError> {
    let v = grid.nodes().into_iter().map(|x| truth.at(x)).collect();
    Ok(PotentialGrid::new(truth.p(), grid, v, truth.bound())?)
}

/// Recovers the potential (`p = 1`) or `beta^* beta` (`p > 1`) as CSV; the
/// JSON report goes to the report path or stderr.
pub fn cmd_continuous(
    cfg: &RunConfig,
    input: &ContinuousInput,
    truth: Option<&Path>,
) -> Result<i32, CliError> {
    let (samples, l, mut reference): (PhiSamples, f64, Option<PotentialGrid>) = match input {
        ContinuousInput::Potential(path) => {
            let pot = read_json::<PotentialFile>(path, "potential file")?.to_grid()?;
            let l = pot.grid().l;
            let samples = sample_weyl(&pot, &fourier_params(cfg, pot.bound(), l))?;
            (samples, l, Some(pot))
        }
        ContinuousInput::PhiSamples(path) => {
            let file: PhiSamplesFile = read_json(path, "phi samples file")?;
            (file.to_samples()?, file.l, None)
        }
    };
    if let Some(path) = truth {
        reference = Some(read_json::<PotentialFile>(path, "truth potential file")?.to_grid()?);
    }
    let grid = Grid::new(l, cfg.continuous.grid)?;
    let rec = recover_from_samples(&samples, grid, cfg.continuous.tail_tolerance)?;
    let p = samples.p;

    let mut warnings = Vec::new();
    if rec.s_min_eigenvalue < 1.0 - cfg.tolerances.positivity {
        warnings.push(format!(
            "smallest eigenvalue of S is {:.3e}, below 1 - {}",
            rec.s_min_eigenvalue, cfg.tolerances.positivity
        ));
    }
    let nodes = grid.nodes();
    let (header, rows): (Vec<String>, Vec<Vec<f64>>) = match &rec.potential {
        Some(v) => (
            vec!["x".into(), "re_v".into(), "im_v".into()],
            nodes
                .iter()
                .zip(v.values())
                .map(|(&x, m)| vec![x, m[(0, 0)].re, m[(0, 0)].im])
                .collect(),
        ),
        None => {
            warnings.push(format!(
                "potential recovery is implemented for p = 1 only; writing beta^* beta for p = {p}"
            ));
            let dim = 2 * p;
            let mut header = vec!["x".to_string()];
            for r in 0..dim {
                for col in 0..dim {
                    header.push(format!("re_g_{r}_{col}"));
                    header.push(format!("im_g_{r}_{col}"));
                }
            }
            let rows = nodes
                .iter()
                .zip(&rec.beta_gram)
                .map(|(&x, g)| {
                    let mut row = vec![x];
                    for r in 0..dim {
                        for col in 0..dim {
                            row.push(g[(r, col)].re);
                            row.push(g[(r, col)].im);
                        }
                    }
                    row
                })
                .collect();
            (header, rows)
        }
    };
    emit(cfg.out.as_deref(), &csv_table(&header, &rows))?;

    let (mut rel, mut abs) = (None, None);
    if let (Some(truth), Some(v)) = (&reference, &rec.potential) {
        if truth.p() == p {
            let truth = resample(truth, grid)?;
            rel = Some(relative_l2_error(v, &truth));
            abs = Some(
                v.values()
                    .iter()
                    .zip(truth.values())
                    .map(|(a, b)| max_abs(&(a - b)))
                    .fold(0.0, f64::max),
            );
        } else {
            warnings.push("truth potential has a different block size; no error metrics".into());
        }
    }
    let report = ContinuousReport {
        p,
        l,
        n: grid.n,
        eta: samples.eta,
        xi_max: samples.xi.iter().fold(0.0, |a: f64, x| a.max(x.abs())),
        samples: samples.xi.len(),
        tail_estimate: rec.kernel.tail_estimate,
        s_min_eigenvalue: rec.s_min_eigenvalue,
        chi_coisometry_deviation: rec.chi.coisometry_deviation(),
        beta_gram_trace_deviation: rec
            .beta_gram
            .iter()
            .map(|g| (g.trace().re - p as f64).abs())
            .fold(0.0, f64::max),
        v_relative_l2_error: rel,
        v_max_abs_error: abs,
        warnings,
    };
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    side_report(cfg.report.as_deref(), &to_json(&report)?)?;
    Ok(EXIT_OK)
}

/// Writes Weyl-function samples of a potential for later recovery.
pub fn cmd_sample_phi(cfg: &RunConfig, potential: &Path) -> Result<i32, CliError> {
    let pot = read_json::<PotentialFile>(potential, "potential file")?.to_grid()?;
    let l = pot.grid().l;
    let samples = sample_weyl(&pot, &fourier_params(cfg, pot.bound(), l))?;
    emit(
        cfg.out.as_deref(),
        &to_json(&PhiSamplesFile::from_samples(&samples, l, pot.bound()))?,
    )?;
    Ok(EXIT_OK)
}

/// Seeded random system in the format read by `forward-discrete`.
pub fn cmd_random_system(cfg: &RunConfig, n: usize, p: usize) -> Result<i32, CliError> {
    if p == 0 {
        return Err(CliError::invalid(
            "invalid_block_size",
            "p must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let beta = random_beta_sequence(&mut rng, n, p);
    emit(
        cfg.out.as_deref(),
        &to_json(&SystemFile::from_beta(&beta)?)?,
    )?;
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trials_pass_and_corruption_is_flagged() {
        let ok = roundtrip_trial(3, 4, 2, false, 1e-8);
        assert!(ok.passed, "{ok:?}");
        let bad = roundtrip_trial(3, 4, 2, true, 1e-8);
        assert!(!bad.passed);
        assert!(bad.c_deviation > 1e-3);
        let tiny = roundtrip_trial(0, 0, 1, false, 1e-8);
        assert!(tiny.c_deviation < 1e-14);
    }
}

//! Drivers for the three experiments, data synthesis, loss-surface scans and
//! result persistence.

pub mod beam;
pub mod burgers;
pub mod config;
pub mod kpp;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{ExperimentConfig, ExperimentKind};

use crate::error::{Error, Result};
use crate::io::CsvTable;
use crate::linalg::symmetric_condition_number;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: ExperimentKind,
    pub config: ExperimentConfig,
    pub recovered_params: Vec<f64>,
    pub objective_trace: Vec<f64>,
    pub constraint_violation_trace: Vec<f64>,
    pub final_constraint_forces: Vec<f64>,
    pub error_metrics: BTreeMap<String, f64>,
    pub hessian_condition: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Conditions worth a look, e.g. a variance pinned at its floor.
    pub flags: Vec<String>,
    /// Seconds; the only field that varies between identical runs.
    pub wall_time: f64,
}

impl ExperimentReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        self.error_metrics.get(name).copied()
    }
}

/// A report plus the CSV side files that go with it.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub report: ExperimentReport,
    pub tables: Vec<(String, CsvTable)>,
}

pub fn run(config: &ExperimentConfig) -> Result<RunOutput> {
    config.validate()?;
    let start = std::time::Instant::now();
    let mut out = match config.experiment {
        ExperimentKind::BurgersInv | ExperimentKind::BurgersEcfm => burgers::run_burgers(config)?,
        ExperimentKind::KppInv | ExperimentKind::KppEcfm => kpp::run_kpp(config)?,
        ExperimentKind::BeamEcfm => beam::run_beam_ecfm(config)?,
    };
    out.report.wall_time = start.elapsed().as_secs_f64();
    Ok(out)
}

/// Measurement tables for `gen-data`.
pub fn generate_data(config: &ExperimentConfig) -> Result<Vec<(String, CsvTable)>> {
    config.validate()?;
    match config.experiment {
        ExperimentKind::BurgersInv | ExperimentKind::BurgersEcfm => {
            let setup = burgers::BurgersSetup::new(config)?;
            let data = setup.generate_data()?;
            Ok(vec![("data.csv".into(), burgers::data_table(&setup, &data)?)])
        }
        ExperimentKind::KppInv | ExperimentKind::KppEcfm => {
            let (setup, data) = kpp::KppSetup::with_data(config)?;
            Ok(vec![("data.csv".into(), kpp::data_table(&setup, &data)?)])
        }
        ExperimentKind::BeamEcfm => {
            let setup = beam::BeamSetup::new(config)?;
            let (data, omegas) = setup.generate_data(config.noise.seed, config.discretization.replicates)?;
            Ok(vec![("data.csv".into(), beam::data_table(&data, &omegas)?)])
        }
    }
}

/// `output_dir/<experiment>/<timestamp>/`, created fresh.
pub fn run_directory(config: &ExperimentConfig) -> Result<PathBuf> {
    let stamp = chrono::Local::now().format("%Y%m%dT%H%M%S%.3f").to_string();
    let dir = config.output_dir.join(config.experiment.name()).join(stamp);
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

pub fn write_tables(dir: &Path, tables: &[(String, CsvTable)]) -> Result<()> {
    for (name, t) in tables {
        t.write(&dir.join(name))?;
    }
    Ok(())
}

pub fn write_run(dir: &Path, out: &RunOutput) -> Result<()> {
    std::fs::write(dir.join("report.json"), out.report.to_json()?)?;
    write_tables(dir, &out.tables)
}

/// Condition number of the central-difference Hessian of `f` at `x`, with
/// steps `rel_step·|x_i|` (or `rel_step` where `x_i = 0`).
pub fn hessian_condition(f: impl Fn(&[f64]) -> Result<f64>, x: &[f64], rel_step: f64) -> Result<f64> {
    let n = x.len();
    let h: Vec<f64> = x.iter().map(|v| if *v == 0.0 { rel_step } else { rel_step * v.abs() }).collect();
    let at = |di: &[(usize, f64)]| {
        let mut y = x.to_vec();
        for (i, s) in di {
            y[*i] += s;
        }
        f(&y)
    };
    let f0 = f(x)?;
    let mut hess = DMatrix::zeros(n, n);
    for i in 0..n {
        hess[(i, i)] = (at(&[(i, h[i])])? - 2.0 * f0 + at(&[(i, -h[i])])?) / (h[i] * h[i]);
        for j in 0..i {
            let v = (at(&[(i, h[i]), (j, h[j])])? - at(&[(i, h[i]), (j, -h[j])])? - at(&[(i, -h[i]), (j, h[j])])?
                + at(&[(i, -h[i]), (j, -h[j])])?)
                / (4.0 * h[i] * h[j]);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    let c = symmetric_condition_number(&hess);
    if !c.is_finite() {
        return Err(Error::LinearAlgebraFailure("singular finite-difference Hessian".into()));
    }
    Ok(c)
}

/// Axis of a scan grid: `count` points from `lo` to `hi` inclusive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanAxis {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl ScanAxis {
    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.lo];
        }
        (0..self.count)
            .map(|k| self.lo + (self.hi - self.lo) * k as f64 / (self.count - 1) as f64)
            .collect()
    }

    /// `lo:hi:count`.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::Config(format!("grid axis {s:?} is not lo:hi:count"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
        if count == 0 || !(lo <= hi) {
            return Err(bad());
        }
        Ok(Self { lo, hi, count })
    }
}

/// Parses `lo:hi:n,lo:hi:n`.
pub fn parse_grid(s: &str) -> Result<(ScanAxis, ScanAxis)> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| Error::Config(format!("grid {s:?} needs two comma-separated axes")))?;
    Ok((ScanAxis::parse(a)?, ScanAxis::parse(b)?))
}

/// Burgers objective over an `(ε₁, ε₂)` grid, evaluated in parallel. Rows
/// are `(ε₁, ε₂, z)`; points where the forward solve fails are left out of
/// the table and returned separately.
pub fn scan_loss_surface(config: &ExperimentConfig, e1: ScanAxis, e2: ScanAxis) -> Result<(CsvTable, Vec<[f64; 2]>)> {
    config.validate()?;
    if !config.experiment.is_burgers() {
        return Err(Error::Config("loss-surface scans are defined for the Burgers experiments".into()));
    }
    let setup = burgers::BurgersSetup::new(config)?;
    let data = setup.generate_data()?;
    let form = burgers::Formulation::of(config.experiment);
    let points: Vec<[f64; 2]> = e1
        .values()
        .into_iter()
        .flat_map(|a| e2.values().into_iter().map(move |b| [a, b]))
        .collect();
    let values: Vec<Result<f64>> = points.par_iter().map(|p| setup.objective(&data, *p, form)).collect();
    let mut table = CsvTable::new(&["eps1", "eps2", "objective"]);
    let mut failed = vec![];
    for (p, v) in points.iter().zip(values) {
        match v {
            Ok(z) => table.push(vec![p[0], p[1], z])?,
            Err(Error::StepFailed { .. }) | Err(Error::SingularJacobian { .. }) | Err(Error::Diverged { .. }) => {
                failed.push(*p)
            }
            Err(e) => return Err(e),
        }
    }
    Ok((table, failed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hessian_condition_of_quadratic() {
        let c = hessian_condition(|x| Ok(0.5 * (x[0] * x[0] + 4.0 * x[1] * x[1])), &[0.3, -0.2], 1e-3).unwrap();
        assert!((c - 4.0).abs() < 1e-6, "{c}");
        let c = hessian_condition(|x| Ok(x[0] * x[0] + x[0] * x[1] + x[1] * x[1]), &[0.0, 0.0], 1e-3).unwrap();
        assert!((c - 3.0).abs() < 1e-6, "{c}");
    }

    #[test]
    fn grid_parsing() {
        let (a, b) = parse_grid("1.5:2.0:11,0.5:1.5:3").unwrap();
        assert_eq!(a.values().len(), 11);
        assert_eq!(b.values(), vec![0.5, 1.0, 1.5]);
        for bad in ["1:2", "1:2:3", "a:2:3,1:2:3", "2:1:3,1:2:3", "1:2:0,1:2:3"] {
            assert!(matches!(parse_grid(bad), Err(Error::Config(_))), "{bad}");
        }
    }
}

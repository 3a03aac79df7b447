//! Benchmark of completion methods over a set of elections.

use std::fmt;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use log::{info, warn};
use num_traits::One;
use rayon::prelude::*;

use crate::completion::{complete, CompletionConfig, CompletionError, StopRule, Strategy, SweepTrace};
use crate::model::{Election, Utility, UtilityKind};
use crate::pabulib::load_election;
use crate::rational::{format_rational, to_f64, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    MesAddOne,
    MesAddOneComplete,
    EesAddOpt,
    EesAddOptComplete,
    EesAddOptSkip,
    Max,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::MesAddOne,
        Method::MesAddOneComplete,
        Method::EesAddOpt,
        Method::EesAddOptComplete,
        Method::EesAddOptSkip,
        Method::Max,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::MesAddOne => "MES+add-one",
            Method::MesAddOneComplete => "MES+add-one (C)",
            Method::EesAddOpt => "EES+add-opt",
            Method::EesAddOptComplete => "EES+add-opt (C)",
            Method::EesAddOptSkip => "EES+add-opt-skip",
            Method::Max => "max",
        }
    }

    fn config(&self) -> Option<CompletionConfig> {
        let (strategy, stop) = match self {
            Method::MesAddOne => (Strategy::AddOneMes, StopRule::FirstOverspend),
            Method::MesAddOneComplete => (Strategy::AddOneMes, StopRule::AllSelected),
            Method::EesAddOpt => (Strategy::AddOpt, StopRule::FirstOverspend),
            Method::EesAddOptComplete => (Strategy::AddOpt, StopRule::AllSelected),
            Method::EesAddOptSkip => (Strategy::AddOptSkip, StopRule::AllSelected),
            Method::Max => return None,
        };
        Some(CompletionConfig::new(strategy, stop))
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchmarkRow {
    pub method: Method,
    /// Base-rule runs.
    pub executions: usize,
    pub efficiency: Rational,
    pub wall: Duration,
    pub gpc_probes: usize,
    pub best_virtual_budget: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceReport {
    pub name: String,
    pub rows: Vec<BenchmarkRow>,
    /// Per-voter increments taken by EES+add-opt (C).
    pub add_opt_increments: Vec<Rational>,
    /// Whether the best EES+add-opt (C) outcome comes after an overspending
    /// breakpoint.
    pub non_monotone: bool,
}

impl InstanceReport {
    pub fn row(&self, method: Method) -> &BenchmarkRow {
        self.rows
            .iter()
            .find(|r| r.method == method)
            .expect("every method is benchmarked")
    }

    pub fn has_fractional_step(&self) -> bool {
        self.add_opt_increments.iter().any(|d| *d < Rational::one())
    }
}

fn timed(e: &Election, u: &Utility, config: &CompletionConfig) -> Result<(SweepTrace, Duration), CompletionError> {
    let start = Instant::now();
    let trace = complete(e, u, config)?;
    Ok((trace, start.elapsed()))
}

fn row_of(method: Method, trace: &SweepTrace, wall: Duration) -> BenchmarkRow {
    let best = trace.best_feasible().expect("the real budget is always feasible");
    BenchmarkRow {
        method,
        executions: trace.executions(),
        efficiency: best.efficiency.clone(),
        wall,
        gpc_probes: trace.gpc_probes,
        best_virtual_budget: best.virtual_budget.clone(),
    }
}

/// Runs every method on one election. `cap` overrides the default
/// execution caps.
pub fn benchmark_election(
    name: &str,
    e: &Election,
    kind: UtilityKind,
    cap: Option<usize>,
) -> Result<InstanceReport, CompletionError> {
    let u = Utility::of_kind(kind, e);
    let mut rows = Vec::new();
    let mut traces = Vec::new();
    for method in Method::ALL {
        let Some(mut config) = method.config() else { continue };
        if let Some(cap) = cap {
            config = config.with_cap(cap);
        }
        let (trace, wall) = timed(e, &u, &config)?;
        rows.push(row_of(method, &trace, wall));
        traces.push((method, trace));
    }
    let find = |m: Method| {
        rows.iter()
            .find(|r: &&BenchmarkRow| r.method == m)
            .expect("benchmarked")
    };
    let mes = find(Method::MesAddOne);
    let skip = find(Method::EesAddOptSkip);
    let winner = if mes.efficiency > skip.efficiency { mes } else { skip };
    let max_row = BenchmarkRow {
        method: Method::Max,
        executions: mes.executions + skip.executions,
        efficiency: winner.efficiency.clone(),
        wall: mes.wall + skip.wall,
        gpc_probes: mes.gpc_probes + skip.gpc_probes,
        best_virtual_budget: winner.best_virtual_budget.clone(),
    };
    rows.push(max_row);

    let full = &traces
        .iter()
        .find(|(m, _)| *m == Method::EesAddOptComplete)
        .expect("benchmarked")
        .1;
    let non_monotone = match (full.best_feasible_index(), full.first_infeasible_index()) {
        (Some(best), Some(over)) => best > over,
        _ => false,
    };
    Ok(InstanceReport {
        name: name.to_string(),
        rows,
        add_opt_increments: full.increments.clone(),
        non_monotone,
    })
}

/// Mean, median and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stats {
    pub mean: f64,
    pub median: f64,
    pub std: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Option<Stats> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        let mean = sorted.iter().sum::<f64>() / n;
        let mid = sorted.len() / 2;
        let median = if sorted.len() % 2 == 1 {
            sorted[mid]
        } else {
            (sorted[mid - 1] + sorted[mid]) / 2.0
        };
        let std = (sorted.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        Some(Stats { mean, median, std })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub method: Method,
    pub executions: Stats,
    pub efficiency: Stats,
    pub seconds: Stats,
}

#[derive(Debug, Clone, Default)]
pub struct Summary {
    /// Sorted by instance name.
    pub reports: Vec<InstanceReport>,
    /// Instances that could not be read or run, with the reason.
    pub failures: Vec<(String, String)>,
}

impl Summary {
    pub fn aggregates(&self) -> Vec<Aggregate> {
        if self.reports.is_empty() {
            return Vec::new();
        }
        Method::ALL
            .iter()
            .map(|&method| {
                let rows: Vec<&BenchmarkRow> = self.reports.iter().map(|r| r.row(method)).collect();
                let stats = |f: &dyn Fn(&BenchmarkRow) -> f64| {
                    Stats::of(&rows.iter().map(|r| f(r)).collect::<Vec<_>>()).expect("non-empty")
                };
                Aggregate {
                    method,
                    executions: stats(&|r| r.executions as f64),
                    efficiency: stats(&|r| to_f64(&r.efficiency)),
                    seconds: stats(&|r| r.wall.as_secs_f64()),
                }
            })
            .collect()
    }

    /// Mean and median per-voter increment over all add-opt steps.
    pub fn increment_stats(&self) -> Option<Stats> {
        let all: Vec<f64> = self
            .reports
            .iter()
            .flat_map(|r| r.add_opt_increments.iter().map(to_f64))
            .collect();
        Stats::of(&all)
    }

    pub fn fractional_count(&self) -> usize {
        self.reports.iter().filter(|r| r.has_fractional_step()).count()
    }

    pub fn non_monotone_count(&self) -> usize {
        self.reports.iter().filter(|r| r.non_monotone).count()
    }

    /// One row per instance and method. Wall time is left out unless
    /// `with_time` is set, so the output is reproducible.
    pub fn write_rows_csv<W: io::Write>(&self, out: W, with_time: bool) -> Result<(), csv::Error> {
        let mut writer = csv::Writer::from_writer(out);
        let mut header = vec![
            "instance",
            "method",
            "executions",
            "efficiency",
            "gpc_probes",
            "best_virtual_budget",
        ];
        if with_time {
            header.push("seconds");
        }
        writer.write_record(&header)?;
        for report in &self.reports {
            for row in &report.rows {
                let mut record = vec![
                    report.name.clone(),
                    row.method.name().to_string(),
                    row.executions.to_string(),
                    format!("{:.6}", to_f64(&row.efficiency)),
                    row.gpc_probes.to_string(),
                    format_rational(&row.best_virtual_budget),
                ];
                if with_time {
                    record.push(format!("{:.6}", row.wall.as_secs_f64()));
                }
                writer.write_record(&record)?;
            }
        }
        writer.flush()?;
        Ok(())
    }

    /// One row per method with mean, median and standard deviation of
    /// executions and efficiency.
    pub fn write_aggregate_csv<W: io::Write>(&self, out: W, with_time: bool) -> Result<(), csv::Error> {
        let mut writer = csv::Writer::from_writer(out);
        let mut header = vec![
            "method",
            "instances",
            "exec_mean",
            "exec_median",
            "exec_std",
            "eff_mean",
            "eff_median",
            "eff_std",
        ];
        if with_time {
            header.extend(["seconds_mean", "seconds_median"]);
        }
        writer.write_record(&header)?;
        for agg in self.aggregates() {
            let mut record = vec![
                agg.method.name().to_string(),
                self.reports.len().to_string(),
                format!("{:.1}", agg.executions.mean),
                format!("{:.1}", agg.executions.median),
                format!("{:.1}", agg.executions.std),
                format!("{:.4}", agg.efficiency.mean),
                format!("{:.4}", agg.efficiency.median),
                format!("{:.4}", agg.efficiency.std),
            ];
            if with_time {
                record.push(format!("{:.6}", agg.seconds.mean));
                record.push(format!("{:.6}", agg.seconds.median));
            }
            writer.write_record(&record)?;
        }
        writer.flush()?;
        Ok(())
    }
}

/// Benchmarks named elections in parallel.
pub fn compare_elections(items: Vec<(String, Election)>, kind: UtilityKind, cap: Option<usize>) -> Summary {
    let results: Vec<(String, Result<InstanceReport, CompletionError>)> = items
        .into_par_iter()
        .map(|(name, e)| {
            let report = benchmark_election(&name, &e, kind, cap);
            (name, report)
        })
        .collect();
    collect(
        results
            .into_iter()
            .map(|(name, r)| (name, r.map_err(|e| e.to_string()))),
    )
}

fn collect(results: impl Iterator<Item = (String, Result<InstanceReport, String>)>) -> Summary {
    let mut summary = Summary::default();
    for (name, result) in results {
        match result {
            Ok(report) => summary.reports.push(report),
            Err(reason) => {
                warn!("{name}: {reason}");
                summary.failures.push((name, reason));
            }
        }
    }
    summary.reports.sort_by(|a, b| a.name.cmp(&b.name));
    summary.failures.sort();
    summary
}

/// `.pb` files directly inside `dir`, sorted by name.
pub fn pb_files(dir: &Path) -> io::Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_file() && path.extension().is_some_and(|ext| ext == "pb") {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Benchmarks every `.pb` file in `dir`. Files that fail to parse or run are
/// reported in [`Summary::failures`].
pub fn compare_directory(dir: &Path, kind: UtilityKind, cap: Option<usize>) -> io::Result<Summary> {
    let files = pb_files(dir)?;
    info!("benchmarking {} files from {}", files.len(), dir.display());
    let results: Vec<(String, Result<InstanceReport, String>)> = files
        .par_iter()
        .map(|path| {
            let name = path
                .file_name()
                .map(|f| f.to_string_lossy().into_owned())
                .unwrap_or_default();
            let result = load_election(path)
                .map_err(|e| e.to_string())
                .and_then(|e| benchmark_election(&name, &e, kind, cap).map_err(|e| e.to_string()));
            (name, result)
        })
        .collect();
    Ok(collect(results.into_iter()))
}

//! Subcommands of the `ees` tool. Each returns the text it would print so
//! the commands can be tested without spawning the binary.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use log::info;

use equal_shares::compare::{compare_directory, compare_elections, Summary};
use equal_shares::completion::{complete, next_increment, CompletionConfig, ProbeScope};
use equal_shares::generate::{exponential_instance, random_elections, RandomConfig};
use equal_shares::model::{validate_price_system, validate_solution, Election, Solution, Utility, UtilityKind};
use equal_shares::oracles::{
    check_ejr1, oracle_instability_exhaustive, oracle_next_change, MAX_EJR_PROJECTS, MAX_EXHAUSTIVE_VOTERS,
};
use equal_shares::pabulib::{election_to_instance, load_election, serialize_pb};
use equal_shares::rational::{format_rational, to_f64, Rational};
use equal_shares::rules::{ees, greedy_approval, mes};
use equal_shares::stability::find_certificate;

/// Largest instance on which `check` runs the next-change oracle.
const ORACLE_MAX_VOTERS: usize = 15;
const ORACLE_MAX_PROJECTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    Ees,
    Mes,
    Greedy,
}

impl Rule {
    pub fn name(&self) -> &'static str {
        match self {
            Rule::Ees => "ees",
            Rule::Mes => "mes",
            Rule::Greedy => "greedy",
        }
    }
}

fn kind_name(kind: UtilityKind) -> &'static str {
    match kind {
        UtilityKind::Cardinal => "cardinal",
        UtilityKind::Cost => "cost",
        UtilityKind::Custom => "custom",
    }
}

fn efficiency_text(value: &Rational) -> String {
    format!("{}/{} ({:.6})", value.numer(), value.denom(), to_f64(value))
}

fn project_list(e: &Election, s: &Solution) -> String {
    let mut selected = s.selected().to_vec();
    selected.sort();
    if selected.is_empty() {
        return "(none)".into();
    }
    selected.iter().map(|&p| e.name(p)).collect::<Vec<_>>().join(" ")
}

fn describe(path: &Path, e: &Election) -> String {
    format!(
        "{}: {} voters, {} projects, budget {}",
        path.display(),
        e.num_voters(),
        e.num_projects(),
        format_rational(e.budget())
    )
}

/// Runs one rule and reports the outcome, its payments and a validation.
pub fn cmd_run(path: &Path, rule: Rule, kind: UtilityKind) -> Result<String> {
    let e = load_election(path).with_context(|| format!("reading {}", path.display()))?;
    let u = Utility::of_kind(kind, &e);
    let s = match rule {
        Rule::Ees => ees(&e, &u),
        Rule::Mes => mes(&e, &u),
        Rule::Greedy => greedy_approval(&e),
    };
    let mut out = String::new();
    writeln!(out, "{}", describe(path, &e))?;
    writeln!(out, "rule: {}, utility: {}", rule.name(), kind_name(kind))?;
    writeln!(out, "selected: {}", project_list(&e, &s))?;
    if rule != Rule::Greedy {
        writeln!(out, "payments:")?;
        for &p in s.selected() {
            let payers = s.payments_for(p);
            let amounts: Vec<String> = payers.iter().map(|(_, x)| format_rational(x)).collect();
            writeln!(
                out,
                "  {}: cost {}, {} payers, paying {}",
                e.name(p),
                format_rational(e.cost(p)),
                payers.len(),
                amounts.join(" ")
            )?;
        }
    }
    writeln!(out, "cost: {}", format_rational(&s.cost(&e)))?;
    writeln!(
        out,
        "efficiency: {}",
        efficiency_text(&e.spending_efficiency(s.selected()))
    )?;
    let problems: Vec<String> = if rule == Rule::Greedy {
        if s.cost(&e) > *e.budget() {
            vec!["outcome exceeds the budget".into()]
        } else {
            Vec::new()
        }
    } else if rule == Rule::Mes {
        validate_price_system(&e, &s).iter().map(ToString::to_string).collect()
    } else {
        validate_solution(&e, &s).iter().map(ToString::to_string).collect()
    };
    if problems.is_empty() {
        writeln!(out, "validation: ok")?;
    } else {
        for p in &problems {
            writeln!(out, "validation: {p}")?;
        }
        bail!("{out}invalid outcome");
    }
    Ok(out)
}

pub struct SweepOutput {
    pub csv: String,
    pub summary: String,
}

/// Runs a completion strategy and returns its breakpoint CSV plus a summary.
pub fn cmd_sweep(path: &Path, kind: UtilityKind, config: &CompletionConfig) -> Result<SweepOutput> {
    let e = load_election(path).with_context(|| format!("reading {}", path.display()))?;
    let u = Utility::of_kind(kind, &e);
    let trace = complete(&e, &u, config)?;
    let mut csv = Vec::new();
    trace.write_csv(&e, &mut csv)?;
    let mut summary = String::new();
    writeln!(summary, "{}", describe(path, &e))?;
    writeln!(
        summary,
        "{} with {}: {} executions, stopped: {}",
        config.strategy,
        config.stop.name(),
        trace.executions(),
        trace.stop_reason.name()
    )?;
    if let Some(best) = trace.best_feasible() {
        writeln!(
            summary,
            "best feasible at virtual budget {}: {} efficiency {}",
            format_rational(&best.virtual_budget),
            project_list(&e, &best.solution),
            efficiency_text(&best.efficiency)
        )?;
    }
    Ok(SweepOutput {
        csv: String::from_utf8(csv)?,
        summary,
    })
}

/// Writes the exponential-outcome instance for `m` and a manifest listing
/// its `2^m` budgets. The file's own budget is the largest one.
pub fn cmd_gen_exp(m: usize, out: &Path, manifest: &Path) -> Result<String> {
    let inst = exponential_instance(m)?;
    let top = inst.budgets.last().expect("at least four budgets").clone();
    let e = inst.election.with_budget(top);
    let pb = election_to_instance(&e, &format!("exponential-outcome instance, m={m}"));
    fs::write(out, serialize_pb(&pb)).with_context(|| format!("writing {}", out.display()))?;

    let mut writer = csv::Writer::from_path(manifest).with_context(|| format!("writing {}", manifest.display()))?;
    writer.write_record(["index", "budget", "expected_p"])?;
    for (k, budget) in inst.budgets.iter().enumerate() {
        let pattern: String = inst
            .expected_pattern(k)
            .iter()
            .map(|&bit| if bit { '1' } else { '0' })
            .collect();
        writer.write_record([(k + 1).to_string(), format_rational(budget), pattern])?;
    }
    writer.flush()?;
    Ok(format!(
        "wrote {} ({} voters, {} projects) and {} budgets to {}\n",
        out.display(),
        e.num_voters(),
        e.num_projects(),
        inst.budgets.len(),
        manifest.display()
    ))
}

/// Where `compare` takes its elections from.
pub enum CompareSource<'a> {
    Directory(&'a Path),
    Synthetic { count: usize, seed: u64 },
}

pub struct CompareOutput {
    pub summary: Summary,
    pub rows_csv: String,
    pub aggregate_csv: String,
    pub report: String,
}

pub fn cmd_compare(
    source: CompareSource<'_>,
    kind: UtilityKind,
    cap: Option<usize>,
    with_time: bool,
) -> Result<CompareOutput> {
    let summary = match source {
        CompareSource::Directory(dir) => {
            compare_directory(dir, kind, cap).with_context(|| format!("listing {}", dir.display()))?
        }
        CompareSource::Synthetic { count, seed } => {
            let items = random_elections(seed, count, &RandomConfig::corpus())
                .into_iter()
                .enumerate()
                .map(|(i, e)| (format!("synthetic-{seed}-{i:03}"), e))
                .collect();
            compare_elections(items, kind, cap)
        }
    };
    info!(
        "{} instances, {} failures",
        summary.reports.len(),
        summary.failures.len()
    );
    let mut rows = Vec::new();
    summary.write_rows_csv(&mut rows, with_time)?;
    let mut aggregate = Vec::new();
    summary.write_aggregate_csv(&mut aggregate, with_time)?;

    let mut report = String::new();
    writeln!(
        report,
        "instances: {}, failures: {}",
        summary.reports.len(),
        summary.failures.len()
    )?;
    for (name, reason) in &summary.failures {
        writeln!(report, "  failed {name}: {reason}")?;
    }
    for agg in summary.aggregates() {
        writeln!(
            report,
            "{:<18} executions avg {:>9.1} med {:>8.1}  efficiency avg {:.4} med {:.4}",
            agg.method.name(),
            agg.executions.mean,
            agg.executions.median,
            agg.efficiency.mean,
            agg.efficiency.median
        )?;
    }
    if let Some(stats) = summary.increment_stats() {
        writeln!(
            report,
            "add-opt per-voter increment: mean {:.4}, median {:.4}",
            stats.mean, stats.median
        )?;
    }
    writeln!(
        report,
        "instances with a step below one unit: {}",
        summary.fractional_count()
    )?;
    writeln!(
        report,
        "instances whose best outcome follows an overspend: {}",
        summary.non_monotone_count()
    )?;
    Ok(CompareOutput {
        rows_csv: String::from_utf8(rows)?,
        aggregate_csv: String::from_utf8(aggregate)?,
        report,
        summary,
    })
}

pub struct CheckReport {
    pub lines: Vec<String>,
    pub passed: bool,
}

impl CheckReport {
    fn record(&mut self, name: &str, ok: bool, detail: impl AsRef<str>) {
        self.passed &= ok;
        let status = if ok { "pass" } else { "FAIL" };
        self.lines.push(format!("{status} {name}: {}", detail.as_ref()));
    }

    fn skip(&mut self, name: &str, why: impl AsRef<str>) {
        self.lines.push(format!("skip {name}: {}", why.as_ref()));
    }
}

/// Runs EES and cross-checks it against the oracles that fit the size.
pub fn cmd_check(path: &Path, kind: UtilityKind) -> Result<CheckReport> {
    let e = load_election(path).with_context(|| format!("reading {}", path.display()))?;
    let u = Utility::of_kind(kind, &e);
    let s = ees(&e, &u);
    let mut report = CheckReport {
        lines: vec![describe(path, &e), format!("ees selects {}", project_list(&e, &s))],
        passed: true,
    };

    let violations = validate_solution(&e, &s);
    report.record(
        "price system",
        violations.is_empty(),
        violations.first().map_or("valid".into(), ToString::to_string),
    );

    let cert = find_certificate(&e, &s, &u);
    report.record(
        "stability",
        cert.is_none(),
        cert.map_or("no certificate".into(), |c| {
            format!("{} is certified by {} voters", e.name(c.project), c.payers.len())
        }),
    );
    if e.num_voters() <= MAX_EXHAUSTIVE_VOTERS {
        let cert = oracle_instability_exhaustive(&e, &s, &u)?;
        report.record(
            "stability (exhaustive)",
            cert.is_none(),
            cert.map_or("no certificate".into(), |c| {
                format!("{} is certified", e.name(c.project))
            }),
        );
    } else {
        report.skip(
            "stability (exhaustive)",
            format!("more than {MAX_EXHAUSTIVE_VOTERS} voters"),
        );
    }

    if e.num_projects() <= MAX_EJR_PROJECTS {
        let violation = check_ejr1(&e, &u, s.selected())?;
        report.record(
            "EJR1",
            violation.is_none(),
            violation.map_or("no violation".into(), |v| {
                let names: Vec<&str> = v.projects.iter().map(|&p| e.name(p)).collect();
                format!("{} voters short on {{{}}}", v.unsatisfied.len(), names.join(","))
            }),
        );
    } else {
        report.skip("EJR1", format!("more than {MAX_EJR_PROJECTS} projects"));
    }

    let fast = next_increment(&e, &s, &u, ProbeScope::All)?;
    if e.num_voters() <= ORACLE_MAX_VOTERS && e.num_projects() <= ORACLE_MAX_PROJECTS {
        let slow = oracle_next_change(&e, &u, &s);
        report.record(
            "next change",
            fast.per_voter() == slow.per_voter(),
            format!("add-opt {fast}, oracle {slow}"),
        );
    } else {
        report.lines.push(format!("next change: {fast}"));
        report.skip("next change (oracle)", "instance too large");
    }
    Ok(report)
}

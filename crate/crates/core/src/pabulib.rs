//! Pabulib `.pb` files.
//!
//! A file has three sections, each introduced by its name on a line of its
//! own (`META`, `PROJECTS`, `VOTES`) and followed by a `;`-separated header
//! row and data rows. Approval lists in the `vote` column are
//! comma-separated project ids. Costs and the budget are read as exact
//! decimals; `a/b` fractions are accepted as well.

use std::fs;
use std::io;
use std::path::Path;

use log::warn;
use thiserror::Error;

use crate::model::{Election, ModelError, Project, ProjectId};
use crate::rational::{format_rational, parse_rational, Rational};

#[derive(Debug, Error)]
pub enum PabulibError {
    #[error("missing {0} section")]
    MissingSection(&'static str),
    #[error("META has no budget")]
    MissingBudget,
    #[error("unsupported vote_type `{0}`, only approval ballots are handled")]
    UnsupportedVoteType(String),
    #[error("malformed {field} `{value}` for {owner}")]
    Malformed {
        field: &'static str,
        owner: String,
        value: String,
    },
    #[error("{section} section has no `{column}` column")]
    MissingColumn {
        section: &'static str,
        column: &'static str,
    },
    #[error("duplicate {what} id `{id}`")]
    Duplicate { what: &'static str, id: String },
    #[error("line {line} of {section}: {source}")]
    Csv {
        section: &'static str,
        line: u64,
        source: csv::Error,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PbProject {
    pub id: String,
    pub cost: Rational,
    pub name: Option<String>,
    pub category: Option<String>,
    /// Columns other than the ones above, in file order.
    pub extra: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PbVote {
    pub voter_id: String,
    pub approvals: Vec<String>,
    pub extra: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PabulibInstance {
    /// META entries in file order.
    pub meta: Vec<(String, String)>,
    pub budget: Rational,
    pub projects: Vec<PbProject>,
    pub votes: Vec<PbVote>,
}

impl PabulibInstance {
    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

const SECTIONS: [&str; 3] = ["META", "PROJECTS", "VOTES"];

/// Splits the text into section bodies keyed by section name.
fn split_sections(text: &str) -> Vec<(&'static str, String)> {
    let mut out: Vec<(&'static str, String)> = Vec::new();
    for line in text.lines() {
        let trimmed = line.trim().trim_start_matches('\u{feff}');
        if let Some(name) = SECTIONS.iter().find(|s| trimmed.eq_ignore_ascii_case(s)) {
            out.push((name, String::new()));
        } else if let Some((_, body)) = out.last_mut() {
            if !trimmed.is_empty() {
                body.push_str(line);
                body.push('\n');
            }
        }
    }
    out
}

/// Header plus rows of one section.
fn read_table(section: &'static str, body: &str) -> Result<(Vec<String>, Vec<Vec<String>>), PabulibError> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(b';')
        .flexible(true)
        .has_headers(true)
        .from_reader(body.as_bytes());
    let wrap = |source: csv::Error| PabulibError::Csv {
        section,
        line: source.position().map_or(0, |p| p.line()),
        source,
    };
    let header: Vec<String> = reader
        .headers()
        .map_err(wrap)?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        rows.push(record.map_err(wrap)?.iter().map(|f| f.trim().to_string()).collect());
    }
    Ok((header, rows))
}

fn column(section: &'static str, header: &[String], name: &'static str) -> Result<usize, PabulibError> {
    header
        .iter()
        .position(|h| h == name)
        .ok_or(PabulibError::MissingColumn { section, column: name })
}

/// Parses a `.pb` file and returns the instance with the warnings raised on
/// the way (count mismatches, dangling approvals, extra fields).
pub fn parse_pb_with_warnings(text: &str) -> Result<(PabulibInstance, Vec<String>), PabulibError> {
    let sections = split_sections(text);
    let body = |name: &'static str| {
        sections
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, b)| b.as_str())
            .ok_or(PabulibError::MissingSection(name))
    };
    let mut warnings = Vec::new();

    let (_, meta_rows) = read_table("META", body("META")?)?;
    let mut meta = Vec::new();
    for row in meta_rows {
        let key = row.first().cloned().unwrap_or_default();
        let value = row.get(1).cloned().unwrap_or_default();
        if row.len() > 2 {
            warnings.push(format!("META row `{key}` has {} fields, extra ones ignored", row.len()));
        }
        if !key.is_empty() {
            meta.push((key, value));
        }
    }
    let meta_get = |key: &str| meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
    match meta_get("vote_type") {
        Some(kind) if kind.eq_ignore_ascii_case("approval") => {}
        Some(kind) => return Err(PabulibError::UnsupportedVoteType(kind.to_string())),
        None => warnings.push("META has no vote_type, assuming approval".into()),
    }
    let budget_text = meta_get("budget").ok_or(PabulibError::MissingBudget)?;
    let budget = parse_rational(budget_text).map_err(|_| PabulibError::Malformed {
        field: "budget",
        owner: "META".into(),
        value: budget_text.into(),
    })?;

    let (header, rows) = read_table("PROJECTS", body("PROJECTS")?)?;
    let id_col = column("PROJECTS", &header, "project_id")?;
    let cost_col = column("PROJECTS", &header, "cost")?;
    let name_col = header.iter().position(|h| h == "name");
    let category_col = header.iter().position(|h| h == "category");
    let mut projects: Vec<PbProject> = Vec::with_capacity(rows.len());
    for row in rows {
        let field = |i: usize| row.get(i).cloned().unwrap_or_default();
        let id = field(id_col);
        if projects.iter().any(|p| p.id == id) {
            return Err(PabulibError::Duplicate { what: "project", id });
        }
        let cost_text = field(cost_col);
        let cost = parse_rational(&cost_text).map_err(|_| PabulibError::Malformed {
            field: "cost",
            owner: format!("project {id}"),
            value: cost_text,
        })?;
        let optional = |col: Option<usize>| col.map(field).filter(|s| !s.is_empty());
        let extra = header
            .iter()
            .enumerate()
            .filter(|(i, _)| ![Some(id_col), Some(cost_col), name_col, category_col].contains(&Some(*i)))
            .map(|(i, h)| (h.clone(), field(i)))
            .collect();
        projects.push(PbProject {
            id,
            cost,
            name: optional(name_col),
            category: optional(category_col),
            extra,
        });
    }

    let (header, rows) = read_table("VOTES", body("VOTES")?)?;
    let voter_col = column("VOTES", &header, "voter_id")?;
    let vote_col = column("VOTES", &header, "vote")?;
    let mut votes: Vec<PbVote> = Vec::with_capacity(rows.len());
    let mut seen = std::collections::HashSet::new();
    for row in rows {
        let field = |i: usize| row.get(i).cloned().unwrap_or_default();
        let voter_id = field(voter_col);
        if !seen.insert(voter_id.clone()) {
            return Err(PabulibError::Duplicate {
                what: "voter",
                id: voter_id,
            });
        }
        let mut approvals = Vec::new();
        for id in field(vote_col).split(',').map(str::trim).filter(|s| !s.is_empty()) {
            if !projects.iter().any(|p| p.id == id) {
                warnings.push(format!("voter {voter_id} approves unknown project {id}, dropped"));
            } else if approvals.iter().any(|a| a == id) {
                warnings.push(format!("voter {voter_id} approves {id} twice"));
            } else {
                approvals.push(id.to_string());
            }
        }
        let extra = header
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != voter_col && *i != vote_col)
            .map(|(i, h)| (h.clone(), field(i)))
            .collect();
        votes.push(PbVote {
            voter_id,
            approvals,
            extra,
        });
    }

    for (key, actual) in [("num_projects", projects.len()), ("num_votes", votes.len())] {
        match meta_get(key).map(str::parse::<usize>) {
            Some(Ok(declared)) if declared != actual => {
                warnings.push(format!("META declares {key}={declared} but the file has {actual}"))
            }
            Some(Err(_)) => warnings.push(format!("META {key} is not a count")),
            _ => {}
        }
    }

    Ok((
        PabulibInstance {
            meta,
            budget,
            projects,
            votes,
        },
        warnings,
    ))
}

/// [`parse_pb_with_warnings`] that logs the warnings.
pub fn parse_pb(text: &str) -> Result<PabulibInstance, PabulibError> {
    let (instance, warnings) = parse_pb_with_warnings(text)?;
    for w in &warnings {
        warn!("{w}");
    }
    Ok(instance)
}

pub fn read_pb(path: &Path) -> Result<PabulibInstance, PabulibError> {
    parse_pb(&fs::read_to_string(path)?)
}

fn write_section<W: io::Write>(
    out: &mut W,
    name: &str,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
) -> Result<(), csv::Error> {
    writeln!(out, "{name}")?;
    let mut writer = csv::WriterBuilder::new().delimiter(b';').from_writer(&mut *out);
    writer.write_record(&header)?;
    for row in rows {
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Writes the instance back in `.pb` form. The budget is written from
/// [`PabulibInstance::budget`], replacing any `budget` META entry in place.
pub fn serialize_pb(instance: &PabulibInstance) -> String {
    let mut out = Vec::new();
    let mut meta: Vec<Vec<String>> = instance
        .meta
        .iter()
        .map(|(k, v)| {
            let value = if k == "budget" {
                format_rational(&instance.budget)
            } else {
                v.clone()
            };
            vec![k.clone(), value]
        })
        .collect();
    if instance.meta_value("budget").is_none() {
        meta.push(vec!["budget".into(), format_rational(&instance.budget)]);
    }
    write_section(&mut out, "META", vec!["key".into(), "value".into()], meta).expect("writing to memory");

    let mut header = vec!["project_id".to_string(), "cost".to_string()];
    let with_name = instance.projects.iter().any(|p| p.name.is_some());
    let with_category = instance.projects.iter().any(|p| p.category.is_some());
    if with_name {
        header.push("name".into());
    }
    if with_category {
        header.push("category".into());
    }
    let extra_cols: Vec<String> = instance
        .projects
        .first()
        .map(|p| p.extra.iter().map(|(k, _)| k.clone()).collect())
        .unwrap_or_default();
    header.extend(extra_cols.iter().cloned());
    let rows = instance
        .projects
        .iter()
        .map(|p| {
            let mut row = vec![p.id.clone(), format_rational(&p.cost)];
            if with_name {
                row.push(p.name.clone().unwrap_or_default());
            }
            if with_category {
                row.push(p.category.clone().unwrap_or_default());
            }
            for col in &extra_cols {
                row.push(lookup(&p.extra, col));
            }
            row
        })
        .collect();
    write_section(&mut out, "PROJECTS", header, rows).expect("writing to memory");

    let extra_cols: Vec<String> = instance
        .votes
        .first()
        .map(|v| v.extra.iter().map(|(k, _)| k.clone()).collect())
        .unwrap_or_default();
    let mut header = vec!["voter_id".to_string(), "vote".to_string()];
    header.extend(extra_cols.iter().cloned());
    let rows = instance
        .votes
        .iter()
        .map(|v| {
            let mut row = vec![v.voter_id.clone(), v.approvals.join(",")];
            for col in &extra_cols {
                row.push(lookup(&v.extra, col));
            }
            row
        })
        .collect();
    write_section(&mut out, "VOTES", header, rows).expect("writing to memory");
    String::from_utf8(out).expect("csv output is utf-8")
}

fn lookup(pairs: &[(String, String)], key: &str) -> String {
    pairs
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.clone())
        .unwrap_or_default()
}

/// Builds an election with projects in file order, named by their ids.
/// Projects nobody approves are dropped, with a warning.
pub fn to_election_with_warnings(instance: &PabulibInstance) -> Result<(Election, Vec<String>), PabulibError> {
    let mut warnings = Vec::new();
    let approved: Vec<bool> = instance
        .projects
        .iter()
        .map(|p| instance.votes.iter().any(|v| v.approvals.contains(&p.id)))
        .collect();
    let mut index = std::collections::HashMap::new();
    let mut projects = Vec::new();
    for (p, keep) in instance.projects.iter().zip(&approved) {
        if *keep {
            index.insert(p.id.as_str(), ProjectId(projects.len()));
            projects.push(Project::new(p.id.clone(), p.cost.clone()));
        } else {
            warnings.push(format!("project {} has no approvals, dropped", p.id));
        }
    }
    let ballots = instance
        .votes
        .iter()
        .map(|v| v.approvals.iter().map(|id| index[id.as_str()]).collect())
        .collect();
    let election = Election::new(projects, ballots, instance.budget.clone())?;
    Ok((election, warnings))
}

/// [`to_election_with_warnings`] that logs the warnings.
pub fn to_election(instance: &PabulibInstance) -> Result<Election, PabulibError> {
    let (election, warnings) = to_election_with_warnings(instance)?;
    for w in &warnings {
        warn!("{w}");
    }
    Ok(election)
}

/// Reads and converts a `.pb` file in one go.
pub fn load_election(path: &Path) -> Result<Election, PabulibError> {
    to_election(&read_pb(path)?)
}

/// Writes an election as a `.pb` file with voters numbered from 1.
pub fn election_to_instance(e: &Election, description: &str) -> PabulibInstance {
    let projects = e
        .project_ids()
        .map(|p| PbProject {
            id: e.name(p).to_string(),
            cost: e.cost(p).clone(),
            name: None,
            category: None,
            extra: Vec::new(),
        })
        .collect();
    let votes = e
        .voter_ids()
        .map(|v| PbVote {
            voter_id: (v.0 + 1).to_string(),
            approvals: e.ballot(v).iter().map(|&p| e.name(p).to_string()).collect(),
            extra: Vec::new(),
        })
        .collect();
    PabulibInstance {
        meta: vec![
            ("description".into(), description.into()),
            ("num_projects".into(), e.num_projects().to_string()),
            ("num_votes".into(), e.num_voters().to_string()),
            ("budget".into(), format_rational(e.budget())),
            ("vote_type".into(), "approval".into()),
        ],
        budget: e.budget().clone(),
        projects,
        votes,
    }
}

/// One line of a results table.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub instance: String,
    pub rule: String,
    pub strategy: String,
    pub efficiency: f64,
    pub iterations: usize,
    pub best_virtual_budget: Rational,
}

/// Writes `instance,rule,strategy,efficiency,iterations,best_virtual_budget`.
pub fn write_results_csv<W: io::Write>(rows: &[ResultRow], out: W) -> Result<(), csv::Error> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record([
        "instance",
        "rule",
        "strategy",
        "efficiency",
        "iterations",
        "best_virtual_budget",
    ])?;
    for row in rows {
        writer.write_record([
            row.instance.clone(),
            row.rule.clone(),
            row.strategy.clone(),
            format!("{:.6}", row.efficiency),
            row.iterations.to_string(),
            format_rational(&row.best_virtual_budget),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

//! Brute-force references for the fast algorithms: the next budget at which
//! EES changes, exhaustive instability search, and an EJR1 checker.
//!
//! Everything here is exponential or quadratic in the worst case and meant
//! for small instances only.

use std::collections::BTreeSet;

use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::completion::BudgetIncrement;
use crate::model::{Election, ProjectId, Solution, Utility, VoterId};
use crate::rational::{from_usize, Rational};
use crate::rules::ees_with_budget;
use crate::stability::{build_budget_lists, willing_cardinal, willing_uniform, InstabilityCertificate};

/// Largest voter count the exhaustive instability search accepts.
pub const MAX_EXHAUSTIVE_VOTERS: usize = 16;
/// Largest project count the EJR1 checker accepts.
pub const MAX_EJR_PROJECTS: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("instance has {actual} {what}, the oracle handles at most {limit}")]
    TooLarge {
        what: &'static str,
        actual: usize,
        limit: usize,
    },
}

/// Every per-voter increase at which some project could start certifying
/// instability, sorted ascending and deduplicated.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CandidateSet {
    pub increments: Vec<Rational>,
}

impl CandidateSet {
    pub fn contains(&self, d: &Rational) -> bool {
        self.increments.binary_search(d).is_ok()
    }

    pub fn len(&self) -> usize {
        self.increments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.increments.is_empty()
    }
}

/// Collects `cost(p)/t - r` for every project `p`, group size `t` up to
/// `|N_p|`, approver `v` and every level `r` the voter could redirect: each
/// budget-list entry `r_i(v)` (which includes the leftover) and, for
/// cardinal utilities, the leximax amount. Only positive values are kept.
pub fn candidate_set(e: &Election, u: &Utility, s: &Solution) -> CandidateSet {
    let table = build_budget_lists(e, s, u).table(e.num_voters());
    let leximax = s.leximax_all();
    let mut found = BTreeSet::new();
    for p in e.project_ids() {
        for t in 1..=e.approvers(p).len() {
            let price = e.cost(p) / from_usize(t);
            for &v in e.approvers(p) {
                let mut levels: Vec<&Rational> = table.iter().map(|row| &row[v.0]).collect();
                if u.is_cardinal() {
                    levels.push(&leximax[v.0].amount);
                }
                for r in levels {
                    let d = &price - r;
                    if d.is_positive() {
                        found.insert(d);
                    }
                }
            }
        }
    }
    CandidateSet {
        increments: found.into_iter().collect(),
    }
}

/// Smallest candidate `d` for which EES at `b + n * d` differs from `s`.
///
/// `s` must be the EES outcome at the election's own budget.
pub fn oracle_next_change(e: &Election, u: &Utility, s: &Solution) -> BudgetIncrement {
    let n = from_usize(e.num_voters());
    for d in candidate_set(e, u, s).increments {
        let raised = e.budget() + &n * &d;
        if !ees_with_budget(e, u, &raised).same_outcome(s) {
            return BudgetIncrement::finite(d, None);
        }
    }
    BudgetIncrement::Infinite
}

/// Samples `d = upper * k / samples` for `k = 1..=samples` and returns the
/// first sample at which EES differs from `s`.
pub fn grid_probe(e: &Election, u: &Utility, s: &Solution, upper: &Rational, samples: usize) -> Option<Rational> {
    let n = from_usize(e.num_voters());
    let steps = from_usize(samples);
    (1..=samples)
        .map(|k| upper * from_usize(k) / &steps)
        .find(|d| !ees_with_budget(e, u, &(e.budget() + &n * d)).same_outcome(s))
}

/// Searches every project and every voter set `V` with `N_p(X) ⊊ V ⊆ N_p`
/// in which each member is willing to pay `cost(p)/|V|`.
///
/// Cardinal utilities use the leximax willingness test, all others the
/// aggregated-budget test.
pub fn oracle_instability_exhaustive(
    e: &Election,
    s: &Solution,
    u: &Utility,
) -> Result<Option<InstabilityCertificate>, OracleError> {
    if e.num_voters() > MAX_EXHAUSTIVE_VOTERS {
        return Err(OracleError::TooLarge {
            what: "voters",
            actual: e.num_voters(),
            limit: MAX_EXHAUSTIVE_VOTERS,
        });
    }
    for p in e.project_ids() {
        let current: Vec<VoterId> = s.payments_for(p).iter().map(|(v, _)| *v).collect();
        let outsiders: Vec<VoterId> = e.approvers(p).iter().copied().filter(|&v| !s.pays_for(v, p)).collect();
        for mask in 1u32..(1u32 << outsiders.len()) {
            let mut group = current.clone();
            group.extend(
                outsiders
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask & (1 << i) != 0)
                    .map(|(_, &v)| v),
            );
            let t = group.len();
            let price = e.cost(p) / from_usize(t);
            let all_willing = group.iter().all(|&v| {
                if u.is_cardinal() {
                    willing_cardinal(s, v, &price, p)
                } else {
                    willing_uniform(e, s, u, v, t, p)
                }
            });
            if all_willing {
                group.sort();
                return Ok(Some(InstabilityCertificate {
                    project: p,
                    payers: group,
                    per_voter_price: price,
                }));
            }
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ejr1Violation {
    pub projects: Vec<ProjectId>,
    /// Smallest group size that can afford `projects` from its shares.
    pub cohesive_size: usize,
    /// Voters approving all of `projects` who are not satisfied up to one
    /// project.
    pub unsatisfied: Vec<VoterId>,
}

/// Smallest `t` with `t * b / n >= cost`, or `None` when no group can pay.
fn cohesive_size(e: &Election, cost: &Rational) -> Option<usize> {
    if e.budget().is_zero() {
        return None;
    }
    let needed = (cost * from_usize(e.num_voters()) / e.budget()).ceil();
    let size: usize = needed.to_integer().try_into().ok()?;
    Some(size.max(1))
}

/// Whether voter `v` of a `T`-cohesive group is satisfied by `outcome` up to
/// one project of `T`.
fn ejr1_satisfied(e: &Election, u: &Utility, outcome: &[ProjectId], group_projects: &[ProjectId], v: VoterId) -> bool {
    let target = u.of_set(group_projects);
    let missing: Vec<ProjectId> = group_projects
        .iter()
        .copied()
        .filter(|p| !outcome.contains(p))
        .collect();
    if missing.is_empty() {
        return u.of_voter(e, v, outcome) >= target;
    }
    let base = u.of_voter(e, v, outcome);
    missing.iter().any(|&p| &base + u.value(p) >= target)
}

/// First project set `T` (by bitmask order) for which a `T`-cohesive group
/// exists whose members are all unsatisfied up to one project.
///
/// Such a group exists iff at least `t` approvers of all of `T` are
/// unsatisfied, where `t` is the cohesive size of `T`.
pub fn check_ejr1(e: &Election, u: &Utility, outcome: &[ProjectId]) -> Result<Option<Ejr1Violation>, OracleError> {
    let m = e.num_projects();
    if m > MAX_EJR_PROJECTS {
        return Err(OracleError::TooLarge {
            what: "projects",
            actual: m,
            limit: MAX_EJR_PROJECTS,
        });
    }
    for mask in 1u32..(1u32 << m) {
        let projects: Vec<ProjectId> = (0..m).filter(|i| mask & (1 << i) != 0).map(ProjectId).collect();
        let Some(size) = cohesive_size(e, &e.cost_of(&projects)) else {
            continue;
        };
        let supporters: Vec<VoterId> = e
            .voter_ids()
            .filter(|&v| projects.iter().all(|&p| e.approves(v, p)))
            .collect();
        if supporters.len() < size {
            continue;
        }
        let unsatisfied: Vec<VoterId> = supporters
            .into_iter()
            .filter(|&v| !ejr1_satisfied(e, u, outcome, &projects, v))
            .collect();
        if unsatisfied.len() >= size {
            return Ok(Some(Ejr1Violation {
                projects,
                cohesive_size: size,
                unsatisfied,
            }));
        }
    }
    Ok(None)
}

//! Elections, uniform utilities, price systems and tie-breaking.
//!
//! Projects are identified by their position in the input; that position is
//! also the tie-breaking order, so `ProjectId(0)` is preferred over
//! `ProjectId(1)` whenever two candidates are otherwise equal.

use std::fmt;

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::rational::{format_rational, from_usize, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProjectId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VoterId(pub usize);

impl fmt::Display for ProjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

impl fmt::Display for VoterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("an election needs at least one voter")]
    NoVoters,
    #[error("project `{name}` has cost {cost}; costs must be positive")]
    NonPositiveCost { name: String, cost: String },
    #[error("budget {0} is negative")]
    NegativeBudget(String),
    #[error("voter {voter} approves unknown project index {project}")]
    UnknownProject { voter: usize, project: usize },
    #[error("project `{0}` is not approved by any voter")]
    Unapproved(String),
    #[error("unknown voter {0}")]
    UnknownVoter(usize),
    #[error("utility of project {0} must be positive")]
    NonPositiveUtility(usize),
    #[error("expected {expected} utility values, got {got}")]
    UtilityArity { expected: usize, got: usize },
    #[error("scale factor must be positive")]
    NonPositiveScale,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Project {
    pub name: String,
    pub cost: Rational,
}

impl Project {
    pub fn new(name: impl Into<String>, cost: Rational) -> Self {
        Project {
            name: name.into(),
            cost,
        }
    }
}

/// An approval election with a budget.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Election {
    projects: Vec<Project>,
    ballots: Vec<Vec<ProjectId>>,
    approvers: Vec<Vec<VoterId>>,
    /// Row-major `project * n + voter` approval mask.
    mask: Vec<bool>,
    budget: Rational,
}

impl Election {
    /// Builds an election. Ballots may list projects in any order and with
    /// duplicates; they are normalised. Voters with empty ballots are kept.
    pub fn new(projects: Vec<Project>, ballots: Vec<Vec<ProjectId>>, budget: Rational) -> Result<Self, ModelError> {
        if ballots.is_empty() {
            return Err(ModelError::NoVoters);
        }
        if budget.is_negative() {
            return Err(ModelError::NegativeBudget(format_rational(&budget)));
        }
        for project in &projects {
            if !project.cost.is_positive() {
                return Err(ModelError::NonPositiveCost {
                    name: project.name.clone(),
                    cost: format_rational(&project.cost),
                });
            }
        }
        let n = ballots.len();
        let m = projects.len();
        let mut mask = vec![false; m * n];
        let mut approvers = vec![Vec::new(); m];
        let mut normalised = Vec::with_capacity(n);
        for (voter, mut ballot) in ballots.into_iter().enumerate() {
            ballot.sort_unstable();
            ballot.dedup();
            for &ProjectId(p) in &ballot {
                if p >= m {
                    return Err(ModelError::UnknownProject { voter, project: p });
                }
                mask[p * n + voter] = true;
                approvers[p].push(VoterId(voter));
            }
            normalised.push(ballot);
        }
        if let Some(p) = approvers.iter().position(Vec::is_empty) {
            return Err(ModelError::Unapproved(projects[p].name.clone()));
        }
        Ok(Election {
            projects,
            ballots: normalised,
            approvers,
            mask,
            budget,
        })
    }

    pub fn num_voters(&self) -> usize {
        self.ballots.len()
    }

    pub fn num_projects(&self) -> usize {
        self.projects.len()
    }

    pub fn projects(&self) -> &[Project] {
        &self.projects
    }

    pub fn project_ids(&self) -> impl Iterator<Item = ProjectId> + '_ {
        (0..self.projects.len()).map(ProjectId)
    }

    pub fn voter_ids(&self) -> impl Iterator<Item = VoterId> + '_ {
        (0..self.ballots.len()).map(VoterId)
    }

    pub fn name(&self, p: ProjectId) -> &str {
        &self.projects[p.0].name
    }

    pub fn cost(&self, p: ProjectId) -> &Rational {
        &self.projects[p.0].cost
    }

    pub fn budget(&self) -> &Rational {
        &self.budget
    }

    /// `b / n`, the amount every voter starts with.
    pub fn per_voter_share(&self) -> Rational {
        share_of(&self.budget, self.num_voters())
    }

    pub fn ballot(&self, v: VoterId) -> &[ProjectId] {
        &self.ballots[v.0]
    }

    /// Voters approving `p`, in increasing id order.
    pub fn approvers(&self, p: ProjectId) -> &[VoterId] {
        &self.approvers[p.0]
    }

    pub fn approves(&self, v: VoterId, p: ProjectId) -> bool {
        self.mask[p.0 * self.num_voters() + v.0]
    }

    /// Approval row of `p` indexed by voter.
    pub fn approval_row(&self, p: ProjectId) -> &[bool] {
        let n = self.num_voters();
        &self.mask[p.0 * n..(p.0 + 1) * n]
    }

    pub fn cost_of(&self, projects: &[ProjectId]) -> Rational {
        projects.iter().map(|&p| self.cost(p)).sum()
    }

    /// `cost(W) / b`, or zero when the budget is zero.
    pub fn spending_efficiency(&self, projects: &[ProjectId]) -> Rational {
        if self.budget.is_zero() {
            return Rational::zero();
        }
        self.cost_of(projects) / &self.budget
    }

    /// Same election with a different (virtual) budget.
    pub fn with_budget(&self, budget: Rational) -> Election {
        debug_assert!(!budget.is_negative());
        Election { budget, ..self.clone() }
    }

    /// Multiplies every cost and the budget by `factor`.
    pub fn scaled(&self, factor: &Rational) -> Result<Election, ModelError> {
        if !factor.is_positive() {
            return Err(ModelError::NonPositiveScale);
        }
        let mut scaled = self.clone();
        for project in &mut scaled.projects {
            project.cost = &project.cost * factor;
        }
        scaled.budget = &self.budget * factor;
        Ok(scaled)
    }
}

pub(crate) fn share_of(budget: &Rational, voters: usize) -> Rational {
    budget / from_usize(voters)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UtilityKind {
    /// `u(p) = 1`.
    Cardinal,
    /// `u(p) = cost(p)`.
    Cost,
    Custom,
}

/// Uniform utility function: a voter gets `u(p)` from each approved project.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Utility {
    kind: UtilityKind,
    values: Vec<Rational>,
}

impl Utility {
    pub fn cardinal(e: &Election) -> Self {
        Utility {
            kind: UtilityKind::Cardinal,
            values: vec![Rational::one(); e.num_projects()],
        }
    }

    pub fn cost(e: &Election) -> Self {
        Utility {
            kind: UtilityKind::Cost,
            values: e.projects().iter().map(|p| p.cost.clone()).collect(),
        }
    }

    /// Arbitrary positive values, one per project.
    pub fn custom(e: &Election, values: Vec<Rational>) -> Result<Self, ModelError> {
        if values.len() != e.num_projects() {
            return Err(ModelError::UtilityArity {
                expected: e.num_projects(),
                got: values.len(),
            });
        }
        if let Some(p) = values.iter().position(|u| !u.is_positive()) {
            return Err(ModelError::NonPositiveUtility(p));
        }
        let kind = if values.iter().all(One::is_one) {
            UtilityKind::Cardinal
        } else {
            UtilityKind::Custom
        };
        Ok(Utility { kind, values })
    }

    /// Builds the cardinal or cost utility for `e`.
    pub fn of_kind(kind: UtilityKind, e: &Election) -> Self {
        match kind {
            UtilityKind::Cardinal => Utility::cardinal(e),
            UtilityKind::Cost | UtilityKind::Custom => Utility::cost(e),
        }
    }

    pub fn kind(&self) -> UtilityKind {
        self.kind
    }

    pub fn is_cardinal(&self) -> bool {
        self.kind == UtilityKind::Cardinal
    }

    pub fn value(&self, p: ProjectId) -> &Rational {
        &self.values[p.0]
    }

    pub fn of_set(&self, projects: &[ProjectId]) -> Rational {
        projects.iter().map(|&p| self.value(p)).sum()
    }

    /// `u_i(T)`: utility voter `v` derives from the projects in `T`.
    pub fn of_voter(&self, e: &Election, v: VoterId, projects: &[ProjectId]) -> Rational {
        projects
            .iter()
            .filter(|&&p| e.approves(v, p))
            .map(|&p| self.value(p))
            .sum()
    }
}

/// A voter's largest single payment and the tie-break-last project attaining
/// it. Ordering is `<_lex`: by amount, then by project, with "no project"
/// below every project.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct LeximaxPayment {
    pub amount: Rational,
    pub project: Option<ProjectId>,
}

impl LeximaxPayment {
    pub fn none() -> Self {
        LeximaxPayment {
            amount: Rational::zero(),
            project: None,
        }
    }

    pub fn offer(amount: Rational, project: ProjectId) -> Self {
        LeximaxPayment {
            amount,
            project: Some(project),
        }
    }
}

/// A selected set with its payments.
///
/// Payments are stored per selected project (in selection order) as the list
/// of strictly positive contributions, sorted by voter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Solution {
    selected: Vec<ProjectId>,
    payments: Vec<Vec<(VoterId, Rational)>>,
    slot: Vec<Option<usize>>,
    leftovers: Vec<Rational>,
    share: Rational,
}

impl Solution {
    /// Assembles a solution for `e` where every voter started with `share`.
    /// Zero payments are dropped; leftovers are derived, not trusted.
    pub fn new(e: &Election, share: Rational, purchases: Vec<(ProjectId, Vec<(VoterId, Rational)>)>) -> Self {
        let mut leftovers = vec![share.clone(); e.num_voters()];
        let mut slot = vec![None; e.num_projects()];
        let mut selected = Vec::with_capacity(purchases.len());
        let mut payments = Vec::with_capacity(purchases.len());
        for (position, (project, mut payers)) in purchases.into_iter().enumerate() {
            payers.retain(|(_, x)| !x.is_zero());
            payers.sort_by_key(|(v, _)| *v);
            for (v, x) in &payers {
                leftovers[v.0] -= x;
            }
            slot[project.0] = Some(position);
            selected.push(project);
            payments.push(payers);
        }
        Solution {
            selected,
            payments,
            slot,
            leftovers,
            share,
        }
    }

    /// Nothing selected; every voter keeps `share`.
    pub fn empty(e: &Election, share: Rational) -> Self {
        Solution::new(e, share, Vec::new())
    }

    /// Selected projects in selection order.
    pub fn selected(&self) -> &[ProjectId] {
        &self.selected
    }

    pub fn is_selected(&self, p: ProjectId) -> bool {
        self.slot.get(p.0).is_some_and(Option::is_some)
    }

    /// Positive payments towards `p`, sorted by voter; empty if `p ∉ W`.
    pub fn payments_for(&self, p: ProjectId) -> &[(VoterId, Rational)] {
        match self.slot.get(p.0).copied().flatten() {
            Some(i) => &self.payments[i],
            None => &[],
        }
    }

    /// `|N_p(X)|`.
    pub fn num_payers(&self, p: ProjectId) -> usize {
        self.payments_for(p).len()
    }

    pub fn payment(&self, v: VoterId, p: ProjectId) -> Rational {
        let payers = self.payments_for(p);
        match payers.binary_search_by_key(&v, |(w, _)| *w) {
            Ok(i) => payers[i].1.clone(),
            Err(_) => Rational::zero(),
        }
    }

    pub fn pays_for(&self, v: VoterId, p: ProjectId) -> bool {
        self.payments_for(p).binary_search_by_key(&v, |(w, _)| *w).is_ok()
    }

    pub fn leftover(&self, v: VoterId) -> &Rational {
        &self.leftovers[v.0]
    }

    pub fn leftovers(&self) -> &[Rational] {
        &self.leftovers
    }

    /// Initial per-voter budget the payments were drawn from.
    pub fn share(&self) -> &Rational {
        &self.share
    }

    /// Every positive payment of every voter, grouped by voter.
    pub fn payments_by_voter(&self) -> Vec<Vec<(ProjectId, Rational)>> {
        let mut by_voter = vec![Vec::new(); self.leftovers.len()];
        for (&p, payers) in self.selected.iter().zip(&self.payments) {
            for (v, x) in payers {
                by_voter[v.0].push((p, x.clone()));
            }
        }
        by_voter
    }

    pub fn cost(&self, e: &Election) -> Rational {
        e.cost_of(&self.selected)
    }

    pub fn spending_efficiency(&self, e: &Election) -> Rational {
        e.spending_efficiency(&self.selected)
    }

    /// `W` and `X` as order-free data: selected projects ascending, each with
    /// its sorted payments.
    pub fn outcome(&self) -> Vec<(ProjectId, &[(VoterId, Rational)])> {
        let mut outcome: Vec<_> = self
            .selected
            .iter()
            .zip(&self.payments)
            .map(|(&p, payers)| (p, payers.as_slice()))
            .collect();
        outcome.sort_by_key(|(p, _)| *p);
        outcome
    }

    /// Selected projects ascending, each with its payer set.
    pub fn payer_sets(&self) -> Vec<(ProjectId, Vec<VoterId>)> {
        self.outcome()
            .into_iter()
            .map(|(p, payers)| (p, payers.iter().map(|(v, _)| *v).collect()))
            .collect()
    }

    /// Whether both solutions have the same `(W, X)`, ignoring selection order
    /// and starting budgets.
    pub fn same_outcome(&self, other: &Solution) -> bool {
        self.outcome() == other.outcome()
    }

    /// Leximax payment of every voter.
    pub fn leximax_all(&self) -> Vec<LeximaxPayment> {
        let mut best = vec![LeximaxPayment::none(); self.leftovers.len()];
        for (&p, payers) in self.selected.iter().zip(&self.payments) {
            for (v, x) in payers {
                let offer = LeximaxPayment::offer(x.clone(), p);
                if offer > best[v.0] {
                    best[v.0] = offer;
                }
            }
        }
        best
    }
}

/// Maximum payment of `voter` and the tie-break-last project attaining it.
pub fn leximax(e: &Election, s: &Solution, voter: VoterId) -> Result<LeximaxPayment, ModelError> {
    if voter.0 >= e.num_voters() {
        return Err(ModelError::UnknownVoter(voter.0));
    }
    let mut best = LeximaxPayment::none();
    for &p in s.selected() {
        let x = s.payment(voter, p);
        if x.is_positive() {
            let offer = LeximaxPayment::offer(x, p);
            if offer > best {
                best = offer;
            }
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// The solution was built from a different per-voter share than `b/n`.
    ShareMismatch {
        stored: Rational,
        expected: Rational,
    },
    Overspent {
        voter: VoterId,
        spent: Rational,
        share: Rational,
    },
    LeftoverMismatch {
        voter: VoterId,
        stored: Rational,
        expected: Rational,
    },
    CostNotCovered {
        project: ProjectId,
        paid: Rational,
        cost: Rational,
    },
    PaysForUnapproved {
        voter: VoterId,
        project: ProjectId,
    },
    UnequalShares {
        project: ProjectId,
        first: (VoterId, Rational),
        second: (VoterId, Rational),
    },
    Infeasible {
        cost: Rational,
        budget: Rational,
    },
    DuplicateSelection {
        project: ProjectId,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = format_rational;
        match self {
            Violation::ShareMismatch { stored, expected } => {
                write!(f, "per-voter share is {} but b/n = {}", r(stored), r(expected))
            }
            Violation::Overspent { voter, spent, share } => {
                write!(f, "{voter} spends {} > share {}", r(spent), r(share))
            }
            Violation::LeftoverMismatch {
                voter,
                stored,
                expected,
            } => write!(
                f,
                "{voter} leftover recorded as {} but share minus payments is {}",
                r(stored),
                r(expected)
            ),
            Violation::CostNotCovered { project, paid, cost } => {
                write!(f, "{project} receives {} but costs {}", r(paid), r(cost))
            }
            Violation::PaysForUnapproved { voter, project } => {
                write!(f, "{voter} pays for {project} without approving it")
            }
            Violation::UnequalShares { project, first, second } => write!(
                f,
                "equal-shares broken at {project}: {} pays {} but {} pays {}",
                first.0,
                r(&first.1),
                second.0,
                r(&second.1)
            ),
            Violation::Infeasible { cost, budget } => {
                write!(f, "cost(W) = {} exceeds budget {}", r(cost), r(budget))
            }
            Violation::DuplicateSelection { project } => {
                write!(f, "{project} is selected more than once")
            }
        }
    }
}

/// Checks the price-system conditions and, in addition, that every selected
/// project is split exactly equally among its payers.
pub fn validate_solution(e: &Election, s: &Solution) -> Vec<Violation> {
    let mut violations = validate_price_system(e, s);
    for (&p, payers) in s.selected.iter().zip(&s.payments) {
        if let Some((first, rest)) = payers.split_first() {
            if let Some(other) = rest.iter().find(|(_, x)| *x != first.1) {
                violations.push(Violation::UnequalShares {
                    project: p,
                    first: first.clone(),
                    second: other.clone(),
                });
            }
        }
    }
    violations
}

/// Price-system conditions only; MES solutions are checked with this.
pub fn validate_price_system(e: &Election, s: &Solution) -> Vec<Violation> {
    let mut violations = Vec::new();
    let share = e.per_voter_share();
    if s.share != share {
        violations.push(Violation::ShareMismatch {
            stored: s.share.clone(),
            expected: share.clone(),
        });
    }
    let mut seen = vec![false; e.num_projects()];
    for &p in &s.selected {
        if std::mem::replace(&mut seen[p.0], true) {
            violations.push(Violation::DuplicateSelection { project: p });
        }
    }
    let mut spent = vec![Rational::zero(); e.num_voters()];
    for (&p, payers) in s.selected.iter().zip(&s.payments) {
        let mut paid = Rational::zero();
        for (v, x) in payers {
            if !e.approves(*v, p) {
                violations.push(Violation::PaysForUnapproved { voter: *v, project: p });
            }
            paid += x;
            spent[v.0] += x;
        }
        if &paid != e.cost(p) {
            violations.push(Violation::CostNotCovered {
                project: p,
                paid,
                cost: e.cost(p).clone(),
            });
        }
    }
    for (i, spent) in spent.into_iter().enumerate() {
        let voter = VoterId(i);
        if spent > share {
            violations.push(Violation::Overspent {
                voter,
                spent: spent.clone(),
                share: share.clone(),
            });
        }
        let expected = &share - &spent;
        if s.leftovers[i] != expected {
            violations.push(Violation::LeftoverMismatch {
                voter,
                stored: s.leftovers[i].clone(),
                expected,
            });
        }
    }
    let cost = s.cost(e);
    if &cost > e.budget() {
        violations.push(Violation::Infeasible {
            cost,
            budget: e.budget().clone(),
        });
    }
    violations
}

//! Budget completion: the smallest per-voter budget increase that changes the
//! EES outcome, and sweeps over virtual budgets built on it.
//!
//! [`gpc_cardinal`] and [`gpc_uniform`] answer the question for one project;
//! [`add_opt_cardinal`] and [`add_opt_uniform`] take the minimum over
//! projects. Because EES outcomes are stable, the minimum is exactly the next
//! budget at which EES returns a different solution.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::io;
use std::str::FromStr;

use num_traits::{One, Signed};
use thiserror::Error;

use crate::model::{Election, LeximaxPayment, ProjectId, Solution, Utility, VoterId};
use crate::rational::{format_rational, from_usize, to_f64, Rational};
use crate::rules::{ees_with_budget, mes_with_budget, BangPerBuck, SortedBudgetList};
use crate::stability::{build_budget_lists, BudgetLists};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompletionError {
    #[error("{list} list passed for {project} is not sorted")]
    UnsortedInput { project: ProjectId, list: &'static str },
    #[error("input lists for {project} do not describe its {expected} non-paying approvers")]
    MismatchedLists { project: ProjectId, expected: usize },
    #[error("solution is not stable: {project} certifies instability without a budget increase")]
    Unstable { project: ProjectId },
}

/// Per-voter budget increase, or `Infinite` when no increase changes anything
/// for the probed projects.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum BudgetIncrement {
    Finite {
        per_voter: Rational,
        project: Option<ProjectId>,
    },
    #[default]
    Infinite,
}

impl BudgetIncrement {
    pub fn finite(per_voter: Rational, project: Option<ProjectId>) -> Self {
        debug_assert!(per_voter.is_positive());
        BudgetIncrement::Finite { per_voter, project }
    }

    pub fn per_voter(&self) -> Option<&Rational> {
        match self {
            BudgetIncrement::Finite { per_voter, .. } => Some(per_voter),
            BudgetIncrement::Infinite => None,
        }
    }

    pub fn project(&self) -> Option<ProjectId> {
        match self {
            BudgetIncrement::Finite { project, .. } => *project,
            BudgetIncrement::Infinite => None,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, BudgetIncrement::Infinite)
    }
}

impl Ord for BudgetIncrement {
    fn cmp(&self, other: &Self) -> Ordering {
        use BudgetIncrement::*;
        match (self, other) {
            (Infinite, Infinite) => Ordering::Equal,
            (Infinite, _) => Ordering::Greater,
            (_, Infinite) => Ordering::Less,
            (
                Finite {
                    per_voter: a,
                    project: pa,
                },
                Finite {
                    per_voter: b,
                    project: pb,
                },
            ) => a.cmp(b).then_with(|| match (pa, pb) {
                (Some(x), Some(y)) => x.cmp(y),
                (Some(_), None) => Ordering::Less,
                (None, Some(_)) => Ordering::Greater,
                (None, None) => Ordering::Equal,
            }),
        }
    }
}

impl PartialOrd for BudgetIncrement {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for BudgetIncrement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BudgetIncrement::Finite { per_voter, .. } => f.write_str(&format_rational(per_voter)),
            BudgetIncrement::Infinite => f.write_str("inf"),
        }
    }
}

/// Result of one cardinal probe with its loop count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GpcTrace {
    pub increment: BudgetIncrement,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Liquid,
    Solvent,
    Dropped,
}

/// Smallest per-voter increase after which `p` certifies the instability of
/// the stable cardinal solution `s`.
///
/// `leftovers` and `leximax` describe the approvers of `p` who do not pay for
/// it, sorted non-decreasingly by leftover and by leximax payment.
pub fn gpc_cardinal(
    e: &Election,
    s: &Solution,
    p: ProjectId,
    leftovers: &[(Rational, VoterId)],
    leximax: &[(LeximaxPayment, VoterId)],
) -> Result<BudgetIncrement, CompletionError> {
    gpc_cardinal_traced(e, s, p, leftovers, leximax).map(|t| t.increment)
}

/// [`gpc_cardinal`] that also reports how many loop iterations it ran.
///
/// Buyers are the current payers plus the liquid voters (paying from their
/// leftover) and the solvent ones (paying by abandoning their leximax
/// project). Pointer `i` walks the leftover list, `j` the leximax list; each
/// iteration advances exactly one of them, so the loop runs at most `2k`
/// times for `k` non-paying approvers.
pub fn gpc_cardinal_traced(
    e: &Election,
    s: &Solution,
    p: ProjectId,
    leftovers: &[(Rational, VoterId)],
    leximax: &[(LeximaxPayment, VoterId)],
) -> Result<GpcTrace, CompletionError> {
    let k = leftovers.len();
    let mismatch = || CompletionError::MismatchedLists {
        project: p,
        expected: k,
    };
    if leximax.len() != k {
        return Err(mismatch());
    }
    if leftovers.windows(2).any(|w| w[0] > w[1]) {
        return Err(CompletionError::UnsortedInput {
            project: p,
            list: "leftover",
        });
    }
    if leximax.windows(2).any(|w| w[0].0 > w[1].0) {
        return Err(CompletionError::UnsortedInput {
            project: p,
            list: "leximax",
        });
    }
    let position: HashMap<VoterId, usize> = leftovers.iter().enumerate().map(|(i, (_, v))| (*v, i)).collect();
    if position.len() != k {
        return Err(mismatch());
    }
    // For each leximax entry, the voter's position in the leftover list.
    let mut by_leximax = Vec::with_capacity(k);
    let mut leximax_at: Vec<Option<&LeximaxPayment>> = vec![None; k];
    for (c, v) in leximax {
        let at = *position.get(v).ok_or_else(mismatch)?;
        if leximax_at[at].replace(c).is_some() {
            return Err(mismatch());
        }
        by_leximax.push(at);
    }

    let cost = e.cost(p);
    let paying = s.num_payers(p);
    let mut role = vec![Role::Liquid; k];
    let (mut liquid, mut solvent) = (k, 0usize);
    let (mut i, mut j) = (0usize, 0usize);
    let mut best = BudgetIncrement::Infinite;
    let mut iterations = 0usize;

    while liquid + solvent > 0 {
        iterations += 1;
        let price = LeximaxPayment::offer(cost / from_usize(paying + liquid + solvent), p);
        if j < k && leximax[j].0 < price {
            let at = by_leximax[j];
            if role[at] == Role::Solvent {
                role[at] = Role::Dropped;
                solvent -= 1;
            }
            j += 1;
        } else if i < k && leximax_at[i].is_some_and(|c| *c > price) {
            role[i] = Role::Solvent;
            liquid -= 1;
            solvent += 1;
            i += 1;
        } else if i < k {
            let needed = &price.amount - &leftovers[i].0;
            if !needed.is_positive() {
                return Err(CompletionError::Unstable { project: p });
            }
            best = best.min(BudgetIncrement::finite(needed, Some(p)));
            role[i] = Role::Dropped;
            liquid -= 1;
            i += 1;
        } else {
            // Only solvent buyers left and all of them willing.
            return Err(CompletionError::Unstable { project: p });
        }
        assert!(iterations <= 2 * k, "pointer loop exceeded 2k iterations");
    }
    Ok(GpcTrace {
        increment: best,
        iterations,
    })
}

/// Non-paying approvers of `p`, as a voter mask.
fn outsiders(e: &Election, s: &Solution, p: ProjectId) -> Vec<bool> {
    let mut mask = e.approval_row(p).to_vec();
    for (v, _) in s.payments_for(p) {
        mask[v.0] = false;
    }
    mask
}

/// Which projects a completion step probes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeScope {
    All,
    /// Only projects outside the current outcome.
    Unselected,
}

impl ProbeScope {
    fn projects<'a>(&self, e: &'a Election, s: &'a Solution) -> impl Iterator<Item = ProjectId> + 'a {
        let unselected_only = *self == ProbeScope::Unselected;
        e.project_ids().filter(move |&p| !(unselected_only && s.is_selected(p)))
    }
}

/// Smallest `d > 0` such that EES at budget `b + n * d` differs from the
/// cardinal EES solution `s`.
pub fn add_opt_cardinal(e: &Election, s: &Solution) -> Result<BudgetIncrement, CompletionError> {
    add_opt_cardinal_scoped(e, s, ProbeScope::All)
}

pub fn add_opt_cardinal_scoped(
    e: &Election,
    s: &Solution,
    scope: ProbeScope,
) -> Result<BudgetIncrement, CompletionError> {
    let inputs = CardinalInputs::new(s);
    let mut best = BudgetIncrement::Infinite;
    for p in scope.projects(e, s) {
        let (leftovers, leximax) = inputs.for_project(e, s, p);
        best = best.min(gpc_cardinal(e, s, p, &leftovers, &leximax)?);
    }
    Ok(best)
}

/// Leftover and leximax lists of a solution, sorted once and then filtered
/// per probed project.
#[derive(Debug, Clone)]
pub struct CardinalInputs {
    leftovers: SortedBudgetList,
    leximax: Vec<(LeximaxPayment, VoterId)>,
}

impl CardinalInputs {
    pub fn new(s: &Solution) -> Self {
        let mut leximax: Vec<(LeximaxPayment, VoterId)> = s
            .leximax_all()
            .into_iter()
            .enumerate()
            .map(|(v, c)| (c, VoterId(v)))
            .collect();
        leximax.sort();
        CardinalInputs {
            leftovers: SortedBudgetList::from_budgets(s.leftovers()),
            leximax,
        }
    }

    /// The two sorted lists restricted to the approvers of `p` who do not
    /// pay for it, as [`gpc_cardinal`] expects them.
    #[allow(clippy::type_complexity)]
    pub fn for_project(
        &self,
        e: &Election,
        s: &Solution,
        p: ProjectId,
    ) -> (Vec<(Rational, VoterId)>, Vec<(LeximaxPayment, VoterId)>) {
        let keep = outsiders(e, s, p);
        let leftovers = self
            .leftovers
            .entries()
            .iter()
            .filter(|(_, v)| keep[v.0])
            .cloned()
            .collect();
        let leximax = self.leximax.iter().filter(|(_, v)| keep[v.0]).cloned().collect();
        (leftovers, leximax)
    }
}

/// Smallest per-voter increase after which `p` certifies the instability of
/// the EES solution `s` under uniform utilities.
///
/// `lists` must be the budget lists of `s` restricted to the non-paying
/// approvers of `p`. With `t = |N_p(X)| + l` payers, the `l` newcomers are the
/// richest entries of the list for the first project that `p` would outrank
/// at `t` payers; that list index only moves towards the front as `l` grows.
pub fn gpc_uniform(
    e: &Election,
    s: &Solution,
    u: &Utility,
    p: ProjectId,
    lists: &BudgetLists,
) -> Result<BudgetIncrement, CompletionError> {
    let order = lists.order();
    let w = order.len();
    let k = lists.list(w).len();
    let expected = e.approvers(p).len() - s.num_payers(p);
    if k != expected || lists.lists().iter().any(|l| l.len() != k) {
        return Err(CompletionError::MismatchedLists { project: p, expected });
    }
    if lists.lists().iter().any(|l| l.windows(2).any(|pair| pair[0] > pair[1])) {
        return Err(CompletionError::UnsortedInput {
            project: p,
            list: "budget",
        });
    }

    let paying = s.num_payers(p);
    let cost = e.cost(p);
    let mut best = BudgetIncrement::Infinite;
    let mut index = w;
    for newcomers in 1..=k {
        let t = paying + newcomers;
        let offer = BangPerBuck::new(e, u, p, t);
        while index > 0 && offer > order[index - 1] {
            index -= 1;
        }
        let needed = cost / from_usize(t) - &lists.list(index)[k - newcomers].0;
        if !needed.is_positive() {
            return Err(CompletionError::Unstable { project: p });
        }
        best = best.min(BudgetIncrement::finite(needed, Some(p)));
    }
    Ok(best)
}

/// Smallest `d > 0` such that EES at budget `b + n * d` differs from the EES
/// solution `s` for utilities `u`.
pub fn add_opt_uniform(e: &Election, s: &Solution, u: &Utility) -> Result<BudgetIncrement, CompletionError> {
    add_opt_uniform_scoped(e, s, u, ProbeScope::All)
}

pub fn add_opt_uniform_scoped(
    e: &Election,
    s: &Solution,
    u: &Utility,
    scope: ProbeScope,
) -> Result<BudgetIncrement, CompletionError> {
    let lists = build_budget_lists(e, s, u);
    let mut best = BudgetIncrement::Infinite;
    for p in scope.projects(e, s) {
        let restricted = lists.restricted(&outsiders(e, s, p));
        best = best.min(gpc_uniform(e, s, u, p, &restricted)?);
    }
    Ok(best)
}

/// Next breakpoint increment, using the linear-time cardinal probe when the
/// utilities are cardinal.
pub fn next_increment(
    e: &Election,
    s: &Solution,
    u: &Utility,
    scope: ProbeScope,
) -> Result<BudgetIncrement, CompletionError> {
    if u.is_cardinal() {
        add_opt_cardinal_scoped(e, s, scope)
    } else {
        add_opt_uniform_scoped(e, s, u, scope)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    /// MES at `b, b + n, b + 2n, ...` (step scaled by the increment unit).
    AddOneMes,
    /// EES at `b, b + n, b + 2n, ...`.
    AddOneEes,
    /// EES at every breakpoint.
    AddOpt,
    /// EES at breakpoints caused by currently unselected projects.
    AddOptSkip,
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::AddOneMes => "add-one-mes",
            Strategy::AddOneEes => "add-one-ees",
            Strategy::AddOpt => "add-opt",
            Strategy::AddOptSkip => "add-opt-skip",
        }
    }

    pub fn default_cap(&self) -> usize {
        match self {
            Strategy::AddOneMes | Strategy::AddOneEes => 100_000,
            Strategy::AddOpt | Strategy::AddOptSkip => 50_000,
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "add-one-mes" => Ok(Strategy::AddOneMes),
            "add-one-ees" => Ok(Strategy::AddOneEes),
            "add-opt" => Ok(Strategy::AddOpt),
            "add-opt-skip" => Ok(Strategy::AddOptSkip),
            other => Err(format!("unknown strategy `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StopRule {
    /// Stop at the first virtual budget whose outcome overspends the real one.
    FirstOverspend,
    /// Keep going until everything has been selected.
    AllSelected,
}

impl StopRule {
    pub fn name(&self) -> &'static str {
        match self {
            StopRule::FirstOverspend => "first-overspend",
            StopRule::AllSelected => "all-selected",
        }
    }
}

impl FromStr for StopRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "first-overspend" => Ok(StopRule::FirstOverspend),
            "all-selected" => Ok(StopRule::AllSelected),
            other => Err(format!("unknown stop rule `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    AllProjectsSelected,
    OverspendStop,
    NoMoreBreakpoints,
    IterationCap,
}

impl StopReason {
    pub fn name(&self) -> &'static str {
        match self {
            StopReason::AllProjectsSelected => "all-projects-selected",
            StopReason::OverspendStop => "overspend-stop",
            StopReason::NoMoreBreakpoints => "no-more-breakpoints",
            StopReason::IterationCap => "iteration-cap",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompletionConfig {
    pub strategy: Strategy,
    pub stop: StopRule,
    /// Maximum number of base-rule executions.
    pub cap: usize,
    /// Per-voter step of the add-one strategies.
    pub increment_unit: Rational,
}

impl CompletionConfig {
    pub fn new(strategy: Strategy, stop: StopRule) -> Self {
        CompletionConfig {
            strategy,
            stop,
            cap: strategy.default_cap(),
            increment_unit: Rational::one(),
        }
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.cap = cap.max(1);
        self
    }

    pub fn with_increment_unit(mut self, unit: Rational) -> Self {
        assert!(unit.is_positive(), "increment unit must be positive");
        self.increment_unit = unit;
        self
    }
}

/// One base-rule execution of a sweep.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Breakpoint {
    pub virtual_budget: Rational,
    pub solution: Solution,
    pub cost: Rational,
    /// `cost(W) / b` for the real budget `b`.
    pub efficiency: Rational,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepTrace {
    pub breakpoints: Vec<Breakpoint>,
    pub stop_reason: StopReason,
    /// Per-voter increments taken between consecutive breakpoints.
    pub increments: Vec<Rational>,
    /// Single-project probes run to find those increments.
    pub gpc_probes: usize,
}

impl SweepTrace {
    /// Number of base-rule runs.
    pub fn executions(&self) -> usize {
        self.breakpoints.len()
    }

    /// Feasible breakpoint with the highest efficiency (earliest on ties).
    pub fn best_feasible_index(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, bp) in self.breakpoints.iter().enumerate() {
            if bp.feasible && best.is_none_or(|b| bp.efficiency > self.breakpoints[b].efficiency) {
                best = Some(i);
            }
        }
        best
    }

    pub fn best_feasible(&self) -> Option<&Breakpoint> {
        self.best_feasible_index().map(|i| &self.breakpoints[i])
    }

    pub fn best_efficiency(&self) -> Rational {
        self.best_feasible().map(|bp| bp.efficiency.clone()).unwrap_or_default()
    }

    pub fn first_infeasible_index(&self) -> Option<usize> {
        self.breakpoints.iter().position(|bp| !bp.feasible)
    }

    /// Writes `virtual_budget,cost_of_W,efficiency,feasible,projects`, one row
    /// per breakpoint. Budgets and costs are exact; efficiency has six
    /// decimals; projects are `;`-joined names in input order.
    pub fn write_csv<W: io::Write>(&self, e: &Election, out: W) -> Result<(), csv::Error> {
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(["virtual_budget", "cost_of_W", "efficiency", "feasible", "projects"])?;
        for bp in &self.breakpoints {
            let mut projects = bp.solution.selected().to_vec();
            projects.sort();
            let names: Vec<&str> = projects.iter().map(|&p| e.name(p)).collect();
            writer.write_record([
                format_rational(&bp.virtual_budget),
                format_rational(&bp.cost),
                format!("{:.6}", to_f64(&bp.efficiency)),
                bp.feasible.to_string(),
                names.join(";"),
            ])?;
        }
        writer.flush()?;
        Ok(())
    }
}

/// Runs a completion strategy starting from the election's real budget.
pub fn complete(e: &Election, u: &Utility, config: &CompletionConfig) -> Result<SweepTrace, CompletionError> {
    let n = from_usize(e.num_voters());
    let m = e.num_projects();
    let mut budget = e.budget().clone();
    let mut ever_selected = vec![false; m];
    let mut breakpoints = Vec::new();
    let mut increments = Vec::new();
    let mut gpc_probes = 0usize;

    let stop_reason = loop {
        let solution = match config.strategy {
            Strategy::AddOneMes => mes_with_budget(e, u, &budget),
            _ => ees_with_budget(e, u, &budget),
        };
        for &p in solution.selected() {
            ever_selected[p.0] = true;
        }
        let cost = solution.cost(e);
        let feasible = &cost <= e.budget();
        let everything = match config.strategy {
            Strategy::AddOptSkip => ever_selected.iter().all(|&x| x),
            _ => solution.selected().len() == m,
        };
        breakpoints.push(Breakpoint {
            virtual_budget: budget.clone(),
            efficiency: e.spending_efficiency(solution.selected()),
            cost,
            feasible,
            solution,
        });

        if !feasible && config.stop == StopRule::FirstOverspend {
            break StopReason::OverspendStop;
        }
        if everything {
            break StopReason::AllProjectsSelected;
        }
        if breakpoints.len() >= config.cap {
            break StopReason::IterationCap;
        }
        let current = &breakpoints.last().expect("just pushed").solution;
        let step = match config.strategy {
            Strategy::AddOneMes | Strategy::AddOneEes => config.increment_unit.clone(),
            Strategy::AddOpt | Strategy::AddOptSkip => {
                let scope = if config.strategy == Strategy::AddOpt {
                    ProbeScope::All
                } else {
                    ProbeScope::Unselected
                };
                gpc_probes += scope.projects(e, current).count();
                let at = e.with_budget(budget.clone());
                match next_increment(&at, current, u, scope)? {
                    BudgetIncrement::Finite { per_voter, .. } => per_voter,
                    BudgetIncrement::Infinite => break StopReason::NoMoreBreakpoints,
                }
            }
        };
        budget += &n * &step;
        increments.push(step);
    };

    Ok(SweepTrace {
        breakpoints,
        stop_reason,
        increments,
        gpc_probes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HybridChoice {
    MesAddOne,
    EesAddOptSkip,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HybridOutcome {
    pub choice: HybridChoice,
    pub solution: Solution,
    pub virtual_budget: Rational,
    pub efficiency: Rational,
    /// Base-rule runs of both strategies together.
    pub executions: usize,
}

/// Runs MES with add-one (stopping at the first overspend) and EES with
/// add-opt-skip, and keeps the more efficient feasible outcome. Ties go to
/// EES.
pub fn hybrid_max(e: &Election, u: &Utility) -> Result<HybridOutcome, CompletionError> {
    let mes_trace = complete(
        e,
        u,
        &CompletionConfig::new(Strategy::AddOneMes, StopRule::FirstOverspend),
    )?;
    let ees_trace = complete(
        e,
        u,
        &CompletionConfig::new(Strategy::AddOptSkip, StopRule::AllSelected),
    )?;
    let executions = mes_trace.executions() + ees_trace.executions();
    let (choice, trace) = if mes_trace.best_efficiency() > ees_trace.best_efficiency() {
        (HybridChoice::MesAddOne, mes_trace)
    } else {
        (HybridChoice::EesAddOptSkip, ees_trace)
    };
    let best = trace
        .best_feasible()
        .expect("the real budget always yields a feasible outcome")
        .clone();
    Ok(HybridOutcome {
        choice,
        solution: best.solution,
        virtual_budget: best.virtual_budget,
        efficiency: best.efficiency,
        executions,
    })
}

/// Mean and median of a list of increments, as floats for reporting.
pub fn increment_summary(increments: &[Rational]) -> Option<(f64, f64)> {
    if increments.is_empty() {
        return None;
    }
    let mut sorted: Vec<&Rational> = increments.iter().collect();
    sorted.sort();
    let mean = to_f64(&(increments.iter().sum::<Rational>() / from_usize(increments.len())));
    let mid = sorted.len() / 2;
    let median = if sorted.len() % 2 == 1 {
        to_f64(sorted[mid])
    } else {
        to_f64(&((sorted[mid - 1] + sorted[mid]) / from_usize(2)))
    };
    Some((mean, median))
}

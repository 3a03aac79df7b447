//! Greedy Approval, Exact Equal Shares and the Method of Equal Shares.

use std::cmp::Ordering;

use num_traits::{Signed, Zero};

use crate::model::{share_of, Election, ProjectId, Solution, Utility, VoterId};
use crate::rational::{from_usize, times_at_least, Rational};

/// Priority of a project bought by a given number of equal payers:
/// `|V| * u(p) / cost(p)`.
///
/// `Ord` follows `>_t`: a larger value wins, and between equal values the
/// project earlier in the tie-breaking order wins.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BangPerBuck {
    pub value: Rational,
    pub project: ProjectId,
}

impl BangPerBuck {
    pub fn new(e: &Election, u: &Utility, project: ProjectId, payers: usize) -> Self {
        BangPerBuck {
            value: u.value(project) * from_usize(payers) / e.cost(project),
            project,
        }
    }
}

impl Ord for BangPerBuck {
    fn cmp(&self, other: &Self) -> Ordering {
        self.value
            .cmp(&other.value)
            .then_with(|| other.project.cmp(&self.project))
    }
}

impl PartialOrd for BangPerBuck {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Leftover budgets sorted non-decreasingly, ties by voter id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SortedBudgetList {
    entries: Vec<(Rational, VoterId)>,
}

impl SortedBudgetList {
    pub fn uniform(voters: usize, budget: &Rational) -> Self {
        SortedBudgetList {
            entries: (0..voters).map(|v| (budget.clone(), VoterId(v))).collect(),
        }
    }

    pub fn from_budgets(budgets: &[Rational]) -> Self {
        let mut entries: Vec<_> = budgets
            .iter()
            .enumerate()
            .map(|(v, r)| (r.clone(), VoterId(v)))
            .collect();
        entries.sort();
        SortedBudgetList { entries }
    }

    pub fn entries(&self) -> &[(Rational, VoterId)] {
        &self.entries
    }

    pub fn is_sorted(&self) -> bool {
        self.entries.windows(2).all(|w| w[0] <= w[1])
    }

    /// Largest number of approvers of a project (given by its approval row)
    /// that can split `cost` equally, together with the list position from
    /// which those payers start. The payers are exactly the approvers at or
    /// after that position.
    fn largest_payer_group(&self, row: &[bool], approvers: usize, cost: &Rational) -> Option<(usize, usize)> {
        let mut remaining = approvers;
        for (pos, (r, v)) in self.entries.iter().enumerate() {
            if !row[v.0] {
                continue;
            }
            if times_at_least(r, remaining, cost) {
                return Some((pos, remaining));
            }
            remaining -= 1;
            if remaining == 0 {
                break;
            }
        }
        None
    }

    /// Subtracts `delta` from every voter flagged in `payers`; the two sorted
    /// halves are merged back in one pass.
    fn charge(&mut self, payers: &[bool], delta: &Rational) {
        let (mut paying, keeping): (Vec<_>, Vec<_>) = std::mem::take(&mut self.entries)
            .into_iter()
            .partition(|(_, v)| payers[v.0]);
        for (r, _) in &mut paying {
            *r -= delta;
        }
        let mut merged = Vec::with_capacity(paying.len() + keeping.len());
        let mut a = paying.into_iter().peekable();
        let mut b = keeping.into_iter().peekable();
        loop {
            let take_a = match (a.peek(), b.peek()) {
                (Some(x), Some(y)) => x <= y,
                (Some(_), None) => true,
                (None, Some(_)) => false,
                (None, None) => break,
            };
            merged.push(if take_a { a.next() } else { b.next() }.unwrap());
        }
        self.entries = merged;
    }
}

/// Selects projects by approval count (ties by input order), skipping any that
/// no longer fit. Only `W` is meaningful; no payments are attributed.
pub fn greedy_approval(e: &Election) -> Solution {
    let mut order: Vec<ProjectId> = e.project_ids().collect();
    order.sort_by_key(|&p| (std::cmp::Reverse(e.approvers(p).len()), p));
    let mut remaining = e.budget().clone();
    let mut purchases = Vec::new();
    for p in order {
        if e.cost(p) <= &remaining {
            remaining -= e.cost(p);
            purchases.push((p, Vec::new()));
        }
    }
    Solution::new(e, e.per_voter_share(), purchases)
}

/// Exact Equal Shares at the election's own budget.
pub fn ees(e: &Election, u: &Utility) -> Solution {
    ees_with_budget(e, u, e.budget())
}

/// Exact Equal Shares with every voter starting from `budget / n`.
///
/// Each round buys the unselected project whose best equal split has the
/// highest bang per buck. For a fixed project the best split is unique: the
/// approvers able to pay `cost / |V|` form a suffix of the sorted budget list
/// once `|V|` is fixed, and larger groups strictly raise the bang per buck,
/// so only the largest affordable suffix needs to be considered. Smaller
/// payer groups are always dominated and never selected.
pub fn ees_with_budget(e: &Election, u: &Utility, budget: &Rational) -> Solution {
    let n = e.num_voters();
    let share = share_of(budget, n);
    let mut list = SortedBudgetList::uniform(n, &share);
    let mut selected = vec![false; e.num_projects()];
    let per_payer: Vec<Rational> = e.project_ids().map(|p| u.value(p) / e.cost(p)).collect();
    let mut purchases = Vec::new();
    let mut payers = vec![false; n];

    loop {
        let mut best: Option<(BangPerBuck, usize)> = None;
        for p in e.project_ids().filter(|p| !selected[p.0]) {
            let Some((start, size)) = list.largest_payer_group(e.approval_row(p), e.approvers(p).len(), e.cost(p))
            else {
                continue;
            };
            let candidate = BangPerBuck {
                value: &per_payer[p.0] * from_usize(size),
                project: p,
            };
            if best.as_ref().is_none_or(|(b, _)| candidate > *b) {
                best = Some((candidate, start));
            }
        }
        let Some((winner, start)) = best else {
            break;
        };
        let p = winner.project;
        let row = e.approval_row(p);
        payers.fill(false);
        let mut group = Vec::new();
        for (_, v) in &list.entries()[start..] {
            if row[v.0] {
                payers[v.0] = true;
                group.push(*v);
            }
        }
        let price = e.cost(p) / from_usize(group.len());
        list.charge(&payers, &price);
        selected[p.0] = true;
        purchases.push((p, group.into_iter().map(|v| (v, price.clone())).collect()));
    }
    Solution::new(e, share, purchases)
}

/// Method of Equal Shares at the election's own budget.
pub fn mes(e: &Election, u: &Utility) -> Solution {
    mes_with_budget(e, u, e.budget())
}

/// Method of Equal Shares: voters who cannot match the common payment
/// contribute everything they have left.
///
/// Each round computes, per unselected project, the smallest `rho` with
/// `sum_i min(r_i, rho * u(p)) = cost(p)` over its approvers and buys the
/// project with the smallest `rho` (ties by input order).
pub fn mes_with_budget(e: &Election, u: &Utility, budget: &Rational) -> Solution {
    let n = e.num_voters();
    let share = share_of(budget, n);
    let mut leftovers = vec![share.clone(); n];
    let mut selected = vec![false; e.num_projects()];
    let mut purchases = Vec::new();

    loop {
        let mut best: Option<(Rational, ProjectId, Rational)> = None;
        for p in e.project_ids().filter(|p| !selected[p.0]) {
            let Some(cap) = payment_cap(e.approvers(p), &leftovers, e.cost(p)) else {
                continue;
            };
            let rho = &cap / u.value(p);
            if best.as_ref().is_none_or(|(b, _, _)| rho < *b) {
                best = Some((rho, p, cap));
            }
        }
        let Some((_, p, cap)) = best else {
            break;
        };
        let mut payments = Vec::new();
        for &v in e.approvers(p) {
            let x = (&leftovers[v.0]).min(&cap).clone();
            if x.is_positive() {
                leftovers[v.0] -= &x;
                payments.push((v, x));
            }
        }
        selected[p.0] = true;
        purchases.push((p, payments));
    }
    Solution::new(e, share, purchases)
}

/// Smallest per-voter cap `q` with `sum min(r_i, q) = cost`, if the approvers
/// can afford the project at all.
fn payment_cap(approvers: &[VoterId], leftovers: &[Rational], cost: &Rational) -> Option<Rational> {
    let mut budgets: Vec<&Rational> = approvers.iter().map(|v| &leftovers[v.0]).collect();
    let total: Rational = budgets.iter().copied().sum();
    if &total < cost {
        return None;
    }
    budgets.sort();
    let k = budgets.len();
    let mut capped = Rational::zero();
    for (j, r) in budgets.iter().enumerate() {
        let q = (cost - &capped) / from_usize(k - j);
        if &q <= *r {
            return Some(q);
        }
        capped += *r;
    }
    unreachable!("total >= cost guarantees a cap")
}

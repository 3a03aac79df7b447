//! Willingness to contribute, instability certificates and the per-priority
//! budget lists used by the uniform-utility completion.

use num_traits::Zero;

use crate::model::{Election, LeximaxPayment, ProjectId, Solution, Utility, VoterId};
use crate::rational::{from_usize, Rational};
use crate::rules::BangPerBuck;

/// A project and a payer group that would fund it with more voters than
/// currently do, each newcomer willing to pay `per_voter_price`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstabilityCertificate {
    pub project: ProjectId,
    pub payers: Vec<VoterId>,
    pub per_voter_price: Rational,
}

/// Bang per buck of a selected project under its current payers.
pub fn selected_bang_per_buck(e: &Election, s: &Solution, u: &Utility, p: ProjectId) -> BangPerBuck {
    BangPerBuck::new(e, u, p, s.num_payers(p))
}

/// Selected projects ordered by decreasing `(BpB, project)` under `>_t`.
pub fn priority_order(e: &Election, s: &Solution, u: &Utility) -> Vec<BangPerBuck> {
    let mut order: Vec<_> = s
        .selected()
        .iter()
        .map(|&p| selected_bang_per_buck(e, s, u, p))
        .collect();
    order.sort_by(|a, b| b.cmp(a));
    order
}

/// `amount <= r_v`, or `(amount, target) <_lex` the voter's leximax payment.
pub fn willing_cardinal(s: &Solution, voter: VoterId, amount: &Rational, target: ProjectId) -> bool {
    let leximax = leximax_of(s, voter);
    amount <= s.leftover(voter) || LeximaxPayment::offer(amount.clone(), target) < leximax
}

fn leximax_of(s: &Solution, voter: VoterId) -> LeximaxPayment {
    let mut best = LeximaxPayment::none();
    for &p in s.selected() {
        let x = s.payment(voter, p);
        if !x.is_zero() {
            best = best.max(LeximaxPayment::offer(x, p));
        }
    }
    best
}

/// Whether `voter` would pay `cost(target) / payers` towards `target`: their
/// leftover plus everything they spend on projects that `target` would
/// outrank with that many payers must cover the price.
pub fn willing_uniform(
    e: &Election,
    s: &Solution,
    u: &Utility,
    voter: VoterId,
    payers: usize,
    target: ProjectId,
) -> bool {
    assert!(payers >= 1, "payer count must be positive");
    let order = priority_order(e, s, u);
    let offer = BangPerBuck::new(e, u, target, payers);
    let first = order.iter().position(|b| offer > *b).unwrap_or(order.len());
    let mut available = s.leftover(voter).clone();
    for b in &order[first..] {
        available += s.payment(voter, b.project);
    }
    available * from_usize(payers) >= *e.cost(target)
}

/// Lists `L_1, ..., L_{w+1}`: list `i` holds, for every voter, what they spend
/// on the `i`-th through last project in priority order plus their leftover,
/// sorted non-decreasingly (ties by voter id).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BudgetLists {
    order: Vec<BangPerBuck>,
    lists: Vec<Vec<(Rational, VoterId)>>,
}

impl BudgetLists {
    /// Priority order `p_1, ..., p_w`.
    pub fn order(&self) -> &[BangPerBuck] {
        &self.order
    }

    /// `L_{i+1}` for `i` in `0..=w`; index `w` is the leftover list.
    pub fn list(&self, i: usize) -> &[(Rational, VoterId)] {
        &self.lists[i]
    }

    pub fn lists(&self) -> &[Vec<(Rational, VoterId)>] {
        &self.lists
    }

    /// Keeps only the voters flagged in `keep`, preserving order.
    pub fn restricted(&self, keep: &[bool]) -> BudgetLists {
        BudgetLists {
            order: self.order.clone(),
            lists: self
                .lists
                .iter()
                .map(|l| l.iter().filter(|(_, v)| keep[v.0]).cloned().collect())
                .collect(),
        }
    }

    /// `r_i(v)` for every list and voter: `table[i][v]`.
    pub fn table(&self, voters: usize) -> Vec<Vec<Rational>> {
        self.lists
            .iter()
            .map(|l| {
                let mut row = vec![Rational::zero(); voters];
                for (r, v) in l {
                    row[v.0] = r.clone();
                }
                row
            })
            .collect()
    }
}

/// Builds the budget lists from the leftover list backwards: list `i` is list
/// `i + 1` with `p_i`'s payers shifted up by their share, which keeps both the
/// payer and non-payer sublists sorted, so one merge per project suffices.
pub fn build_budget_lists(e: &Election, s: &Solution, u: &Utility) -> BudgetLists {
    let order = priority_order(e, s, u);
    let w = order.len();
    let mut lists = vec![Vec::new(); w + 1];
    let mut current: Vec<(Rational, VoterId)> = s
        .leftovers()
        .iter()
        .enumerate()
        .map(|(v, r)| (r.clone(), VoterId(v)))
        .collect();
    current.sort();
    let mut paying = vec![false; e.num_voters()];
    for i in (0..w).rev() {
        let p = order[i].project;
        let payments = s.payments_for(p);
        paying.fill(false);
        for (v, _) in payments {
            paying[v.0] = true;
        }
        let price = payments.first().map(|(_, x)| x.clone()).unwrap_or_default();
        let (mut payers, others): (Vec<_>, Vec<_>) = current.iter().cloned().partition(|(_, v)| paying[v.0]);
        for (r, _) in &mut payers {
            *r += &price;
        }
        lists[i + 1] = std::mem::replace(&mut current, merge_sorted(payers, others));
    }
    lists[0] = current;
    BudgetLists { order, lists }
}

fn merge_sorted<T: Ord>(a: Vec<T>, b: Vec<T>) -> Vec<T> {
    let mut merged = Vec::with_capacity(a.len() + b.len());
    let mut a = a.into_iter().peekable();
    let mut b = b.into_iter().peekable();
    loop {
        let take_a = match (a.peek(), b.peek()) {
            (Some(x), Some(y)) => x <= y,
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (None, None) => return merged,
        };
        merged.push(if take_a { a.next() } else { b.next() }.unwrap());
    }
}

/// Looks for a project that certifies the instability of `s`.
///
/// Cardinal utilities use leximax willingness, anything else the aggregated
/// budgets of [`BudgetLists`]. For each project and each group size `t` above
/// the current payer count, the newcomers are the richest willing approvers;
/// the first size with enough of them yields the certificate.
pub fn find_certificate(e: &Election, s: &Solution, u: &Utility) -> Option<InstabilityCertificate> {
    let leximax = s.leximax_all();
    let lists = (!u.is_cardinal()).then(|| build_budget_lists(e, s, u));
    let table = lists.as_ref().map(|l| l.table(e.num_voters()));

    for p in e.project_ids() {
        let current: Vec<VoterId> = s.payments_for(p).iter().map(|(v, _)| *v).collect();
        let outsiders: Vec<VoterId> = e.approvers(p).iter().copied().filter(|&v| !s.pays_for(v, p)).collect();
        for t in current.len() + 1..=e.approvers(p).len() {
            let price = e.cost(p) / from_usize(t);
            // (budget the voter can redirect, voter)
            let mut willing: Vec<(Rational, VoterId)> = match (&lists, &table) {
                (Some(lists), Some(table)) => {
                    let offer = BangPerBuck::new(e, u, p, t);
                    let first = lists
                        .order()
                        .iter()
                        .position(|b| offer > *b)
                        .unwrap_or(lists.order().len());
                    outsiders
                        .iter()
                        .map(|&v| (table[first][v.0].clone(), v))
                        .filter(|(r, _)| *r >= price)
                        .collect()
                }
                _ => outsiders
                    .iter()
                    .filter(|&&v| &price <= s.leftover(v) || LeximaxPayment::offer(price.clone(), p) < leximax[v.0])
                    .map(|&v| (s.leftover(v).clone().max(leximax[v.0].amount.clone()), v))
                    .collect(),
            };
            let needed = t - current.len();
            if willing.len() >= needed {
                willing.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
                let mut payers = current.clone();
                payers.extend(willing.into_iter().take(needed).map(|(_, v)| v));
                payers.sort();
                return Some(InstabilityCertificate {
                    project: p,
                    payers,
                    per_voter_price: price,
                });
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::*;
    use crate::model::Project;
    use crate::rational::{integer, ratio};
    use crate::rules::ees;

    #[test]
    fn cardinal_willingness_examples() {
        let e = worked_example();
        let s = worked_example_solution(&e);
        // v3 can abandon p2 (leximax 8/5) for p3 at 3/2.
        assert!(willing_cardinal(&s, VoterId(2), &ratio(3, 2), ProjectId(2)));
        // v2 has 1 left and leximax (1, p1).
        assert!(!willing_cardinal(&s, VoterId(1), &ratio(3, 2), ProjectId(2)));
        for v in e.voter_ids() {
            assert!(willing_cardinal(&s, v, &Rational::zero(), ProjectId(2)));
        }
    }

    #[test]
    fn uniform_willingness_with_empty_outcome_uses_leftover() {
        let e = worked_example();
        let s = Solution::empty(&e, integer(2));
        let u = Utility::cost(&e);
        assert!(willing_uniform(&e, &s, &u, VoterId(4), 3, ProjectId(2)));
        assert!(!willing_uniform(&e, &s, &u, VoterId(4), 2, ProjectId(2)));
    }

    #[test]
    fn uniform_willingness_single_list_case() {
        // One selected project with low priority: the voter may add their
        // payment for it to their leftover.
        let e = Election::new(
            vec![Project::new("a", integer(4)), Project::new("b", integer(3))],
            vec![vec![ProjectId(0), ProjectId(1)], vec![ProjectId(0)], vec![ProjectId(1)]],
            integer(6),
        )
        .unwrap();
        let s = Solution::new(
            &e,
            integer(2),
            vec![(ProjectId(0), vec![(VoterId(0), integer(2)), (VoterId(1), integer(2))])],
        );
        let u = Utility::cardinal(&e);
        // b with 2 payers: BpB 2/3 > BpB(a) = 1/2, so v0 may use 0 + 2 >= 3/2.
        assert!(willing_uniform(&e, &s, &u, VoterId(0), 2, ProjectId(1)));
        // b alone: BpB 1/3 < 1/2, only the leftover 0 counts.
        assert!(!willing_uniform(&e, &s, &u, VoterId(0), 1, ProjectId(1)));
    }

    #[test]
    fn budget_lists_for_worked_example() {
        let e = worked_example();
        let s = worked_example_solution(&e);
        let lists = build_budget_lists(&e, &s, &Utility::cardinal(&e));
        // p1 (BpB 1) outranks p2 (BpB 5/8).
        assert_eq!(
            lists.order().iter().map(|b| b.project).collect::<Vec<_>>(),
            vec![ProjectId(0), ProjectId(1)]
        );
        assert_eq!(
            lists.list(2),
            &[
                (ratio(2, 5), VoterId(2)),
                (ratio(2, 5), VoterId(3)),
                (integer(1), VoterId(0)),
                (integer(1), VoterId(1)),
                (integer(2), VoterId(4)),
            ]
        );
        assert_eq!(
            lists.list(1),
            &[
                (integer(1), VoterId(0)),
                (integer(1), VoterId(1)),
                (integer(2), VoterId(2)),
                (integer(2), VoterId(3)),
                (integer(2), VoterId(4)),
            ]
        );
        assert!(lists.list(0).iter().all(|(r, _)| *r == integer(2)));
    }

    #[test]
    fn budget_lists_without_selection() {
        let e = worked_example();
        let s = Solution::empty(&e, integer(2));
        let lists = build_budget_lists(&e, &s, &Utility::cardinal(&e));
        assert_eq!(lists.lists().len(), 1);
        assert_eq!(lists.list(0).len(), 5);
    }

    #[test]
    fn ees_outcomes_have_no_certificate() {
        let e = worked_example();
        for u in [Utility::cardinal(&e), Utility::cost(&e)] {
            let s = ees(&e, &u);
            assert_eq!(find_certificate(&e, &s, &u), None);
        }
    }

    #[test]
    fn raised_budget_exposes_certificate() {
        let e = worked_example();
        let s = worked_example_solution(&e);
        // Give every voter another 1/2: the old payments at share 5/2.
        let raised = e.with_budget(ratio(25, 2));
        let purchases = s
            .outcome()
            .into_iter()
            .map(|(p, payers)| (p, payers.to_vec()))
            .collect();
        let lifted = Solution::new(&raised, ratio(5, 2), purchases);
        let cert = find_certificate(&raised, &lifted, &Utility::cardinal(&raised)).unwrap();
        assert_eq!(cert.project, ProjectId(2));
        assert_eq!(cert.payers, vec![VoterId(1), VoterId(2), VoterId(3), VoterId(4)]);
        assert_eq!(cert.per_voter_price, ratio(3, 2));
    }

    #[test]
    fn fully_spent_full_selection_is_stable() {
        let e = Election::new(
            vec![Project::new("a", integer(2)), Project::new("b", integer(2))],
            vec![vec![ProjectId(0)], vec![ProjectId(1)]],
            integer(4),
        )
        .unwrap();
        let s = ees(&e, &Utility::cardinal(&e));
        assert_eq!(s.selected().len(), 2);
        assert!(s.leftovers().iter().all(Zero::is_zero));
        assert_eq!(find_certificate(&e, &s, &Utility::cardinal(&e)), None);
        assert_eq!(find_certificate(&e, &s, &Utility::cost(&e)), None);
    }
}

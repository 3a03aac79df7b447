//! Instance generators: the exponential-outcome construction and seeded
//! random elections.

use std::ops::RangeInclusive;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{Election, Project, ProjectId};
use crate::rational::{from_usize, Rational};

pub const EXPONENTIAL_M: RangeInclusive<usize> = 2..=12;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("m = {0} is outside {min}..={max}", min = EXPONENTIAL_M.start(), max = EXPONENTIAL_M.end())]
pub struct OutOfRange(pub usize);

/// An election together with `2^m` budgets whose EES outcomes (cost
/// utilities) are pairwise distinct.
#[derive(Debug, Clone)]
pub struct ExponentialInstance {
    pub m: usize,
    /// Budget is `budgets[0]`.
    pub election: Election,
    /// `budgets[k]` buys exactly the `p_j` whose bit `j - 1` is set in `k`.
    pub budgets: Vec<Rational>,
}

impl ExponentialInstance {
    pub fn p(&self, j: usize) -> ProjectId {
        assert!((1..=self.m).contains(&j));
        ProjectId(j - 1)
    }

    pub fn a(&self, j: usize) -> ProjectId {
        assert!((1..=self.m).contains(&j));
        ProjectId(self.m + j - 1)
    }

    /// Which `p_j` the budget `budgets[k]` should select.
    pub fn expected_pattern(&self, k: usize) -> Vec<bool> {
        (0..self.m).map(|bit| k & (1 << bit) != 0).collect()
    }
}

/// Builds the construction for `m` with all amounts multiplied by the voter
/// count `n = 2m² + m + m³`, so every cost and budget is an integer.
///
/// Projects are `p1..pm` then `a1..am`. A block of `2m² + m` voters approves
/// the `p_j`; `m - j` of them skip `p_j` and approve `a_j` instead, no voter
/// skipping more than one. Each `a_j` also has `m²` voters of its own.
/// `cost(p_j) = 2^j (2m² + j)` and `cost(a_j) = 2^j (m² + m - j)`, i.e.
/// `2^j` per approver, and budget `k` gives every voter
/// `Σ_j 2^j · bit_{j-1}(k)`.
pub fn exponential_instance(m: usize) -> Result<ExponentialInstance, OutOfRange> {
    if !EXPONENTIAL_M.contains(&m) {
        return Err(OutOfRange(m));
    }
    let block = 2 * m * m + m;
    let n = block + m * m * m;
    let pow = |j: usize| 1u64 << j;

    let mut projects = Vec::with_capacity(2 * m);
    for j in 1..=m {
        projects.push(Project::new(
            format!("p{j}"),
            Rational::from_integer((pow(j) * (2 * m * m + j) as u64).into()),
        ));
    }
    for j in 1..=m {
        projects.push(Project::new(
            format!("a{j}"),
            Rational::from_integer((pow(j) * (m * m + m - j) as u64).into()),
        ));
    }

    let all_p: Vec<ProjectId> = (0..m).map(ProjectId).collect();
    let mut ballots = vec![all_p; block];
    let mut voter = 0;
    for j in 1..=m {
        for _ in 0..m - j {
            ballots[voter].retain(|&p| p != ProjectId(j - 1));
            ballots[voter].push(ProjectId(m + j - 1));
            voter += 1;
        }
    }
    for j in 1..=m {
        ballots.extend(std::iter::repeat_n(vec![ProjectId(m + j - 1)], m * m));
    }
    debug_assert_eq!(ballots.len(), n);

    let budgets: Vec<Rational> = (0..1usize << m)
        .map(|k| {
            let share: u64 = (1..=m).filter(|j| k & (1 << (j - 1)) != 0).map(pow).sum();
            Rational::from_integer((share * n as u64).into())
        })
        .collect();
    let election = Election::new(projects, ballots, budgets[0].clone()).expect("construction is valid");
    Ok(ExponentialInstance { m, election, budgets })
}

/// Shape of random elections.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomConfig {
    pub voters: RangeInclusive<usize>,
    pub projects: RangeInclusive<usize>,
    /// Integer costs are drawn from `1..=max_cost`.
    pub max_cost: u64,
    /// Per-voter share, an integer drawn from this range.
    pub share: RangeInclusive<u64>,
    /// Approval probability, drawn per instance.
    pub approval: (f64, f64),
}

impl RandomConfig {
    /// Instances small enough for the brute-force oracles.
    pub fn small(max_voters: usize, max_projects: usize) -> Self {
        RandomConfig {
            voters: 2..=max_voters,
            projects: 1..=max_projects,
            max_cost: 30,
            share: 1..=8,
            approval: (0.2, 0.7),
        }
    }

    /// Fixed size, for scaling measurements.
    pub fn sized(voters: usize, projects: usize) -> Self {
        RandomConfig {
            voters: voters..=voters,
            projects: projects..=projects,
            max_cost: 0,
            share: 5..=50,
            approval: (0.1, 0.5),
        }
    }

    /// The benchmark corpus shape: `n` in 10..=200, `m` in 3..=20, costs up
    /// to the budget.
    pub fn corpus() -> Self {
        RandomConfig {
            voters: 10..=200,
            projects: 3..=20,
            max_cost: 0,
            share: 5..=50,
            approval: (0.1, 0.5),
        }
    }
}

/// Draws one election. A `max_cost` of zero means costs up to the budget.
/// Every project gets at least one approver.
pub fn random_election<R: Rng>(rng: &mut R, config: &RandomConfig) -> Election {
    let n = rng.gen_range(config.voters.clone());
    let m = rng.gen_range(config.projects.clone());
    let share = rng.gen_range(config.share.clone());
    let budget = share * n as u64;
    let max_cost = if config.max_cost == 0 {
        budget.max(1)
    } else {
        config.max_cost
    };
    let prob = rng.gen_range(config.approval.0..=config.approval.1);

    let projects = (0..m)
        .map(|j| {
            Project::new(
                format!("{}", j + 1),
                Rational::from_integer(rng.gen_range(1..=max_cost).into()),
            )
        })
        .collect();
    let mut ballots: Vec<Vec<ProjectId>> = (0..n)
        .map(|_| (0..m).filter(|_| rng.gen_bool(prob)).map(ProjectId).collect())
        .collect();
    for j in 0..m {
        if !ballots.iter().any(|b| b.contains(&ProjectId(j))) {
            let v = rng.gen_range(0..n);
            ballots[v].push(ProjectId(j));
            ballots[v].sort();
        }
    }
    Election::new(projects, ballots, from_usize(budget as usize)).expect("generated election is valid")
}

/// `count` elections from one seed.
pub fn random_elections(seed: u64, count: usize, config: &RandomConfig) -> Vec<Election> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_election(&mut rng, config)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Utility;
    use crate::rules::ees_with_budget;

    #[test]
    fn counts_match_the_construction() {
        let inst = exponential_instance(3).unwrap();
        let e = &inst.election;
        assert_eq!(e.num_voters(), 18 + 3 + 27);
        assert_eq!(e.num_projects(), 6);
        for j in 1..=3 {
            assert_eq!(e.approvers(inst.p(j)).len(), 18 + j);
            assert_eq!(e.approvers(inst.a(j)).len(), 9 + 3 - j);
            assert_eq!(e.cost(inst.p(j)), &from_usize((1 << j) * (18 + j)));
        }
        for v in e.voter_ids().take(21) {
            assert!(e.ballot(v).iter().filter(|p| p.0 < 3).count() >= 2);
        }
        assert_eq!(inst.budgets.len(), 8);
        assert_eq!(inst.budgets[0], from_usize(0));
        assert_eq!(inst.budgets[7], from_usize(14 * 48));
    }

    #[test]
    fn range_is_checked() {
        assert_eq!(exponential_instance(1).unwrap_err(), OutOfRange(1));
        assert_eq!(exponential_instance(13).unwrap_err(), OutOfRange(13));
    }

    #[test]
    fn m2_patterns_follow_the_bits() {
        let inst = exponential_instance(2).unwrap();
        let e = &inst.election;
        let u = Utility::cost(e);
        for (k, b) in inst.budgets.iter().enumerate() {
            let s = ees_with_budget(e, &u, b);
            let pattern: Vec<bool> = (1..=2).map(|j| s.is_selected(inst.p(j))).collect();
            assert_eq!(pattern, inst.expected_pattern(k), "budget {k}");
        }
    }

    #[test]
    fn random_elections_are_reproducible() {
        let a = random_elections(7, 5, &RandomConfig::small(10, 5));
        let b = random_elections(7, 5, &RandomConfig::small(10, 5));
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.budget(), y.budget());
            assert_eq!(x.num_voters(), y.num_voters());
            for v in x.voter_ids() {
                assert_eq!(x.ballot(v), y.ballot(v));
            }
        }
        for e in &a {
            assert!(e.project_ids().all(|p| !e.approvers(p).is_empty()));
        }
    }
}

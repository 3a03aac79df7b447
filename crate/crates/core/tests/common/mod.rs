#![allow(dead_code)]

use equal_shares::model::{Election, Project, ProjectId};
use equal_shares::rational::integer;
use proptest::prelude::*;

pub fn ids(list: &[usize]) -> Vec<ProjectId> {
    list.iter().copied().map(ProjectId).collect()
}

/// Small elections with integer costs. Project `j` is always approved by
/// voter `j mod n`, so no project goes unapproved.
pub fn small_election(max_voters: usize, max_projects: usize) -> impl Strategy<Value = Election> {
    (2..=max_voters, 1..=max_projects).prop_flat_map(|(n, m)| {
        (
            prop::collection::vec(1i64..=20, m),
            prop::collection::vec(prop::collection::vec(any::<bool>(), m), n),
            0i64..=6,
        )
            .prop_map(move |(costs, approvals, share)| {
                let projects = costs
                    .iter()
                    .enumerate()
                    .map(|(j, &c)| Project::new(format!("p{}", j + 1), integer(c)))
                    .collect();
                let ballots = approvals
                    .iter()
                    .enumerate()
                    .map(|(v, row)| (0..m).filter(|&j| row[j] || j % n == v).map(ProjectId).collect())
                    .collect();
                Election::new(projects, ballots, integer(share * n as i64)).unwrap()
            })
    })
}

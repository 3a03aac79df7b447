//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use equal_shares::compare::{compare_elections, Method};
use equal_shares::completion::{
    add_opt_cardinal, add_opt_uniform, complete, gpc_cardinal, CardinalInputs, CompletionConfig, StopRule, Strategy,
    SweepTrace,
};
use equal_shares::generate::{random_elections, RandomConfig};
use equal_shares::model::{Election, Project, ProjectId, Solution, Utility, UtilityKind};
use equal_shares::oracles::{candidate_set, check_ejr1, oracle_instability_exhaustive, oracle_next_change};
use equal_shares::pabulib::load_election;
use equal_shares::rational::{format_rational, from_usize, integer, ratio, Rational};
use equal_shares::rules::{ees, ees_with_budget, greedy_approval};
use equal_shares::stability::find_certificate;
use equal_shares_cli::cmd_gen_exp;

type Outcome = Result<String, String>;

fn ids(list: &[usize]) -> Vec<ProjectId> {
    list.iter().copied().map(ProjectId).collect()
}

fn worked_example() -> Election {
    Election::new(
        vec![
            Project::new("p1", integer(2)),
            Project::new("p2", ratio(16, 5)),
            Project::new("p3", integer(6)),
        ],
        vec![ids(&[0]), ids(&[0, 2]), ids(&[1, 2]), ids(&[1, 2]), ids(&[2])],
        integer(10),
    )
    .unwrap()
}

fn remark_example() -> Election {
    Election::new(
        vec![
            Project::new("p1", integer(2)),
            Project::new("p2", integer(98)),
            Project::new("p3", integer(100)),
            Project::new("p4", integer(51)),
        ],
        vec![ids(&[0, 1]), ids(&[1, 2]), ids(&[2, 3])],
        integer(150),
    )
    .unwrap()
}

fn min_time(reps: usize, mut f: impl FnMut()) -> Duration {
    (0..reps)
        .map(|_| {
            let start = Instant::now();
            f();
            start.elapsed()
        })
        .min()
        .unwrap()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn criterion_1() -> Outcome {
    let e = worked_example();
    let s = ees(&e, &Utility::cardinal(&e));
    let p3 = ProjectId(2);
    let (left, lex) = CardinalInputs::new(&s).for_project(&e, &s, p3);
    let d = gpc_cardinal(&e, &s, p3, &left, &lex).map_err(|e| e.to_string())?;
    ensure(d.per_voter() == Some(&ratio(1, 2)), || format!("gpc(p3) = {d}"))?;
    let raised = ees_with_budget(&e, &Utility::cardinal(&e), &ratio(25, 2));
    let mut w = raised.selected().to_vec();
    w.sort();
    ensure(w == ids(&[0, 2]), || format!("EES(25/2) selects {w:?}"))?;
    let t = min_time(50, || {
        gpc_cardinal(&e, &s, p3, &left, &lex).unwrap();
    });
    ensure(t < Duration::from_millis(1), || format!("gpc took {t:?}"))?;
    Ok(format!("gpc(p3) = 1/2 in {t:?}, EES(25/2) = {{p1, p3}}"))
}

fn criterion_2() -> Outcome {
    let e = remark_example();
    let u = Utility::cardinal(&e);
    let s = ees(&e, &u);
    let p4 = ProjectId(3);
    let (left, lex) = CardinalInputs::new(&s).for_project(&e, &s, p4);
    let d4 = gpc_cardinal(&e, &s, p4, &left, &lex).map_err(|e| e.to_string())?;
    ensure(d4.per_voter() == Some(&integer(51)), || format!("gpc(p4) = {d4}"))?;
    let best = add_opt_cardinal(&e, &s).map_err(|e| e.to_string())?;
    ensure(
        best.per_voter() == Some(&integer(1)) && best.project() == Some(ProjectId(1)),
        || format!("add-opt = {best} via {:?}", best.project()),
    )?;
    let mut w = ees_with_budget(&e, &u, &integer(153)).selected().to_vec();
    w.sort();
    ensure(w == ids(&[0, 1, 3]), || format!("EES(153) selects {w:?}"))?;
    Ok("gpc(p4) = 51, add-opt = 1 via p2, EES(153) = {p1, p2, p4}".into())
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let elections = random_elections(3, 500, &RandomConfig::small(12, 6));
    let mut mismatches = Vec::new();
    let mut finite = 0;
    for (i, e) in elections.iter().enumerate() {
        let card = Utility::cardinal(e);
        let cost = Utility::cost(e);
        let s = ees(e, &card);
        let oracle = oracle_next_change(e, &card, &s);
        let fast = add_opt_cardinal(e, &s).map_err(|err| format!("instance {i}: {err}"))?;
        let uniform = add_opt_uniform(e, &s, &card).map_err(|err| format!("instance {i}: {err}"))?;
        if fast.per_voter() != oracle.per_voter() || uniform.per_voter() != oracle.per_voter() {
            mismatches.push(format!("#{i} cardinal: fast {fast} uniform {uniform} oracle {oracle}"));
        }
        if let Some(d) = fast.per_voter() {
            finite += 1;
            if !candidate_set(e, &card, &s).contains(d) {
                mismatches.push(format!("#{i}: {d} missing from candidate set"));
            }
        }
        let s = ees(e, &cost);
        let oracle = oracle_next_change(e, &cost, &s);
        let fast = add_opt_uniform(e, &s, &cost).map_err(|err| format!("instance {i}: {err}"))?;
        if fast.per_voter() != oracle.per_voter() {
            mismatches.push(format!("#{i} cost: fast {fast} oracle {oracle}"));
        }
    }
    let elapsed = start.elapsed();
    ensure(mismatches.is_empty(), || {
        format!("{} mismatches, first: {}", mismatches.len(), mismatches[0])
    })?;
    ensure(elapsed <= Duration::from_secs(300), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "500 instances x 3 comparisons, 0 mismatches ({finite} finite cardinal d*), {:.1}s",
        elapsed.as_secs_f64()
    ))
}

fn criterion_4() -> Outcome {
    let elections = random_elections(4, 500, &RandomConfig::small(12, 6));
    let mut checked = 0;
    for (i, e) in elections.iter().enumerate() {
        for u in [Utility::cardinal(e), Utility::cost(e)] {
            let s = ees(e, &u);
            if let Some(c) = find_certificate(e, &s, &u) {
                return Err(format!("#{i}: greedy search certifies {}", c.project));
            }
            if let Some(c) = oracle_instability_exhaustive(e, &s, &u).map_err(|e| e.to_string())? {
                return Err(format!("#{i}: exhaustive search certifies {}", c.project));
            }
            checked += 1;
        }
    }
    // Drop one funded project so its payers keep their money.
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let mut perturbed = 0;
    for (i, e) in elections.iter().enumerate() {
        if perturbed == 50 {
            break;
        }
        let u = if i % 2 == 0 {
            Utility::cardinal(e)
        } else {
            Utility::cost(e)
        };
        let s = ees(e, &u);
        if s.selected().is_empty() {
            continue;
        }
        let dropped = s.selected()[rng.gen_range(0..s.selected().len())];
        let kept: Vec<_> = s
            .selected()
            .iter()
            .filter(|&&p| p != dropped)
            .map(|&p| (p, s.payments_for(p).to_vec()))
            .collect();
        let broken = Solution::new(e, s.share().clone(), kept);
        let greedy = find_certificate(e, &broken, &u).is_some();
        let exhaustive = oracle_instability_exhaustive(e, &broken, &u)
            .map_err(|e| e.to_string())?
            .is_some();
        ensure(greedy && exhaustive, || {
            format!("#{i}: greedy found {greedy}, exhaustive found {exhaustive}")
        })?;
        perturbed += 1;
    }
    ensure(perturbed == 50, || format!("only {perturbed} perturbations built"))?;
    Ok(format!(
        "{checked} EES outputs stable for both searches, both certify all 50 perturbed"
    ))
}

fn criterion_5() -> Outcome {
    let elections = random_elections(5, 300, &RandomConfig::small(8, 5));
    for (i, e) in elections.iter().enumerate() {
        for u in [Utility::cardinal(e), Utility::cost(e)] {
            let s = ees(e, &u);
            if let Some(v) = check_ejr1(e, &u, s.selected()).map_err(|e| e.to_string())? {
                return Err(format!("#{i}: EES violates EJR1 on {:?}", v.projects));
            }
        }
    }
    let mut ballots = vec![ids(&[0, 1]); 51];
    ballots.extend(vec![ids(&[2, 3]); 49]);
    let e = Election::new(
        vec![
            Project::new("a1", integer(50)),
            Project::new("a2", integer(50)),
            Project::new("b1", integer(24)),
            Project::new("b2", integer(24)),
        ],
        ballots,
        integer(100),
    )
    .unwrap();
    let u = Utility::cardinal(&e);
    let g = greedy_approval(&e);
    let v = check_ejr1(&e, &u, g.selected()).map_err(|e| e.to_string())?;
    let v = v.ok_or("greedy outcome passes EJR1")?;
    Ok(format!(
        "600 EES outcomes satisfy EJR1; greedy fails on {:?} ({} of 49 short, group size {})",
        v.projects.iter().map(|p| p.0 + 1).collect::<Vec<_>>(),
        v.unsatisfied.len(),
        v.cohesive_size
    ))
}

fn exponential_patterns(m: usize, dir: &Path) -> Result<(), String> {
    let pb = dir.join(format!("exp{m}.pb"));
    let manifest = dir.join(format!("exp{m}.csv"));
    cmd_gen_exp(m, &pb, &manifest).map_err(|e| e.to_string())?;
    let e = load_election(&pb).map_err(|e| e.to_string())?;
    let u = Utility::cost(&e);
    let mut reader = csv::Reader::from_path(&manifest).map_err(|e| e.to_string())?;
    let mut seen: Vec<Vec<ProjectId>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| e.to_string())?;
        let budget = equal_shares::rational::parse_rational(&record[1]).map_err(|e| e.to_string())?;
        let s = ees_with_budget(&e, &u, &budget);
        let pattern: String = (1..=m)
            .map(|j| {
                let p = e.project_ids().find(|&p| e.name(p) == format!("p{j}")).unwrap();
                if s.is_selected(p) {
                    '1'
                } else {
                    '0'
                }
            })
            .collect();
        ensure(pattern == record[2], || {
            format!(
                "m={m} budget #{}: pattern {pattern}, expected {}",
                &record[0], &record[2]
            )
        })?;
        let mut w = s.selected().to_vec();
        w.sort();
        ensure(!seen.contains(&w), || {
            format!("m={m} budget #{} repeats an outcome", &record[0])
        })?;
        seen.push(w);
    }
    ensure(seen.len() == 1 << m, || format!("m={m}: {} budgets", seen.len()))
}

fn criterion_6() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    exponential_patterns(3, dir.path())?;
    exponential_patterns(2, dir.path())?;
    Ok("m=3: 8 distinct outcomes, m=2: 4 distinct outcomes, p-patterns follow the budget bits".into())
}

fn sampled_between(rng: &mut ChaCha8Rng, low: &Rational, high: &Rational) -> Rational {
    let k = rng.gen_range(1..1_000_000i64);
    low + (high - low) * ratio(k, 1_000_000)
}

fn criterion_7() -> Outcome {
    let elections = random_elections(7, 300, &RandomConfig::small(10, 5));
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut pairs = 0;
    for kind in [UtilityKind::Cardinal, UtilityKind::Cost] {
        for (i, e) in elections.iter().enumerate() {
            let u = Utility::of_kind(kind, e);
            let config = CompletionConfig::new(Strategy::AddOpt, StopRule::AllSelected).with_cap(200);
            let trace = complete(e, &u, &config).map_err(|e| e.to_string())?;
            for pair in trace.breakpoints.windows(2) {
                let (low, high) = (&pair[0], &pair[1]);
                ensure(!high.solution.same_outcome(&low.solution), || {
                    format!(
                        "#{i}: breakpoint {} repeats the outcome",
                        format_rational(&high.virtual_budget)
                    )
                })?;
                for _ in 0..20 {
                    let b = sampled_between(&mut rng, &low.virtual_budget, &high.virtual_budget);
                    ensure(ees_with_budget(e, &u, &b).same_outcome(&low.solution), || {
                        format!(
                            "#{i}: outcome changes at {} before {}",
                            format_rational(&b),
                            format_rational(&high.virtual_budget)
                        )
                    })?;
                }
                pairs += 1;
            }
        }
    }
    Ok(format!(
        "{pairs} breakpoint pairs over 600 sweeps, 20 samples each, no early change"
    ))
}

/// Four voters; `a` (cost 4) has one supporter, `b` (cost 10) three. At
/// budget 12 nothing is affordable; a third of a unit per voter buys `b`, a
/// full unit buys both and overspends.
fn fractional_instance() -> Election {
    Election::new(
        vec![Project::new("a", integer(4)), Project::new("b", integer(10))],
        vec![ids(&[1]), ids(&[0]), ids(&[1]), ids(&[1])],
        integer(12),
    )
    .unwrap()
}

fn selected_sets(trace: &SweepTrace) -> Vec<Vec<ProjectId>> {
    trace
        .breakpoints
        .iter()
        .map(|b| {
            let mut w = b.solution.selected().to_vec();
            w.sort();
            w
        })
        .collect()
}

fn criterion_8() -> Outcome {
    let e = fractional_instance();
    let u = Utility::cardinal(&e);
    let s = ees(&e, &u);
    let d = add_opt_cardinal(&e, &s).map_err(|e| e.to_string())?;
    let d = d.per_voter().cloned().ok_or("add-opt is infinite")?;
    ensure(d < integer(1), || format!("d* = {}", format_rational(&d)))?;

    let opt =
        complete(&e, &u, &CompletionConfig::new(Strategy::AddOpt, StopRule::AllSelected)).map_err(|e| e.to_string())?;
    let one = complete(
        &e,
        &u,
        &CompletionConfig::new(Strategy::AddOneEes, StopRule::AllSelected),
    )
    .map_err(|e| e.to_string())?;
    let target = &opt.breakpoints[1];
    let mut w = target.solution.selected().to_vec();
    w.sort();
    ensure(target.feasible, || "skipped outcome is not feasible".into())?;
    // The outcome holds on [b + n d*, next breakpoint); no add-one budget
    // lies in that interval and the outcome never recurs.
    let next = &opt.breakpoints[2].virtual_budget;
    let n = from_usize(e.num_voters());
    let grid_hit = (0..one.executions()).any(|k| {
        let b = e.budget() + &n * from_usize(k);
        target.virtual_budget <= b && &b < next
    });
    ensure(!grid_hit, || "an add-one budget lands on the outcome".into())?;
    ensure(!selected_sets(&one).contains(&w), || {
        "add-one visits the outcome".into()
    })?;
    ensure(one.best_efficiency() < target.efficiency, || {
        "add-one is as efficient".into()
    })?;
    Ok(format!(
        "d* = {}: add-opt reaches {{b}} at {} (efficiency {}), add-one jumps from 12 to 16 and never sees it",
        format_rational(&d),
        format_rational(&target.virtual_budget),
        format_rational(&target.efficiency)
    ))
}

/// `base` with every voter repeated `k` times and costs and budget scaled by
/// `k`, so every voter keeps the same share and EES picks the same projects.
fn replicated(base: &Election, k: usize) -> Election {
    let factor = from_usize(k);
    let projects = base
        .project_ids()
        .map(|p| Project::new(base.name(p), base.cost(p) * &factor))
        .collect();
    let ballots = base
        .voter_ids()
        .flat_map(|v| std::iter::repeat_n(base.ballot(v).to_vec(), k))
        .collect();
    Election::new(projects, ballots, base.budget() * &factor).unwrap()
}

fn criterion_9() -> Outcome {
    let config = RandomConfig {
        voters: 1000..=1000,
        projects: 20..=20,
        max_cost: 0,
        share: 20..=20,
        approval: (0.3, 0.3),
    };
    let base = random_elections(900, 1, &config).remove(0);
    let mut gpc_times = Vec::new();
    let mut ees_times = Vec::new();
    let mut winners = Vec::new();
    for k in [1usize, 2, 4, 8] {
        let e = replicated(&base, k);
        let u = Utility::cardinal(&e);
        let s = ees(&e, &u);
        winners.push(s.selected().len());
        ees_times.push(min_time(3, || {
            ees(&e, &u);
        }));
        let inputs = CardinalInputs::new(&s);
        let prepared: Vec<_> = e.project_ids().map(|p| (p, inputs.for_project(&e, &s, p))).collect();
        gpc_times.push(min_time(20, || {
            for (p, (left, lex)) in &prepared {
                gpc_cardinal(&e, &s, *p, left, lex).unwrap();
            }
        }));
    }
    ensure(winners.iter().all(|&w| w == winners[0]), || {
        format!("outcomes differ: {winners:?}")
    })?;
    let ratios =
        |t: &[Duration]| -> Vec<f64> { t.windows(2).map(|w| w[1].as_secs_f64() / w[0].as_secs_f64()).collect() };
    let (g, x) = (ratios(&gpc_times), ratios(&ees_times));
    let fmt = |r: &[f64]| r.iter().map(|v| format!("{v:.2}")).collect::<Vec<_>>().join("/");
    ensure(g.iter().all(|&r| r <= 2.5), || format!("gpc ratios {}", fmt(&g)))?;
    ensure(x.iter().all(|&r| r <= 2.5), || format!("EES ratios {}", fmt(&x)))?;
    Ok(format!(
        "n = 1000..8000, m = 20, {} winners: gpc x{} and EES x{} per doubling (EES at n=8000: {:?})",
        winners[0],
        fmt(&g),
        fmt(&x),
        ees_times[3]
    ))
}

fn criterion_10() -> Outcome {
    let items = random_elections(10, 50, &RandomConfig::corpus())
        .into_iter()
        .enumerate()
        .map(|(i, e)| (format!("corpus-{i:02}"), e))
        .collect();
    let summary = compare_elections(items, UtilityKind::Cardinal, None);
    ensure(summary.failures.is_empty(), || {
        format!("failures: {:?}", summary.failures)
    })?;
    let mean = |m: Method| {
        summary.reports.iter().map(|r| r.row(m).executions as f64).sum::<f64>() / summary.reports.len() as f64
    };
    let (skip, opt, one) = (
        mean(Method::EesAddOptSkip),
        mean(Method::EesAddOptComplete),
        mean(Method::MesAddOneComplete),
    );
    ensure(skip < opt && opt < one, || {
        format!("mean executions skip {skip:.1}, add-opt (C) {opt:.1}, add-one (C) {one:.1}")
    })?;
    Ok(format!(
        "mean executions: EES+add-opt-skip {skip:.1} < EES+add-opt (C) {opt:.1} < MES+add-one (C) {one:.1}"
    ))
}

/// Four voters. At budget 12 only `p1` (cost 2) is bought; the first
/// breakpoint adds `p2` and overspends, a later one swaps it for `p3` and
/// spends the whole budget.
fn non_monotone_instance() -> Election {
    Election::new(
        vec![
            Project::new("p1", integer(2)),
            Project::new("p2", integer(11)),
            Project::new("p3", integer(10)),
            Project::new("p4", integer(11)),
        ],
        vec![ids(&[0, 2]), ids(&[1, 2]), ids(&[1, 2, 3]), ids(&[1, 3])],
        integer(12),
    )
    .unwrap()
}

fn criterion_11() -> Outcome {
    let e = non_monotone_instance();
    let u = Utility::cardinal(&e);
    let skip = complete(
        &e,
        &u,
        &CompletionConfig::new(Strategy::AddOptSkip, StopRule::AllSelected),
    )
    .map_err(|e| e.to_string())?;
    let first = complete(
        &e,
        &u,
        &CompletionConfig::new(Strategy::AddOpt, StopRule::FirstOverspend),
    )
    .map_err(|e| e.to_string())?;
    let (a, b) = (skip.best_efficiency(), first.best_efficiency());
    ensure(a > b, || {
        format!(
            "skip {} vs first-overspend {}",
            format_rational(&a),
            format_rational(&b)
        )
    })?;
    let best = skip.best_feasible().unwrap();
    Ok(format!(
        "add-opt-skip reaches efficiency {} at virtual budget {}, add-opt with first-overspend stops at {}",
        format_rational(&a),
        format_rational(&best.virtual_budget),
        format_rational(&b)
    ))
}

fn scaled_solution_matches(base: &Solution, scaled: &Solution, factor: &Rational) -> bool {
    base.selected() == scaled.selected()
        && base.selected().iter().all(|&p| {
            let (x, y) = (base.payments_for(p), scaled.payments_for(p));
            x.len() == y.len() && x.iter().zip(y).all(|((v, a), (w, b))| v == w && &(a * factor) == b)
        })
        && base
            .leftovers()
            .iter()
            .zip(scaled.leftovers())
            .all(|(a, b)| &(a * factor) == b)
}

fn criterion_12() -> Outcome {
    let elections = random_elections(12, 100, &RandomConfig::small(10, 5));
    let factors = [ratio(1, 3), integer(7), integer(1000)];
    let mut compared = 0;
    for (i, e) in elections.iter().enumerate() {
        for kind in [UtilityKind::Cardinal, UtilityKind::Cost] {
            let u = Utility::of_kind(kind, e);
            let config = CompletionConfig::new(Strategy::AddOpt, StopRule::AllSelected).with_cap(200);
            let base = complete(e, &u, &config).map_err(|e| e.to_string())?;
            for factor in &factors {
                let se = e.scaled(factor).map_err(|e| e.to_string())?;
                let su = Utility::of_kind(kind, &se);
                ensure(scaled_solution_matches(&ees(e, &u), &ees(&se, &su), factor), || {
                    format!("#{i}: EES differs at scale {}", format_rational(factor))
                })?;
                let trace = complete(&se, &su, &config).map_err(|e| e.to_string())?;
                ensure(trace.executions() == base.executions(), || {
                    format!(
                        "#{i}: {} vs {} breakpoints at scale {}",
                        trace.executions(),
                        base.executions(),
                        format_rational(factor)
                    )
                })?;
                for (x, y) in base.breakpoints.iter().zip(&trace.breakpoints) {
                    ensure(
                        &x.virtual_budget * factor == y.virtual_budget
                            && scaled_solution_matches(&x.solution, &y.solution, factor),
                        || format!("#{i}: breakpoint {} not scaled", format_rational(&x.virtual_budget)),
                    )?;
                }
                compared += 1;
            }
        }
    }
    Ok(format!("{compared} scaled sweeps identical up to the factor"))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 12] = [
        ("worked example, cardinal probe", criterion_1),
        ("overspending example", criterion_2),
        ("add-opt equals the next-change oracle", criterion_3),
        ("EES outputs are stable", criterion_4),
        ("EJR1", criterion_5),
        ("exponentially many outcomes", criterion_6),
        ("breakpoint minimality", criterion_7),
        ("fractional breakpoint", criterion_8),
        ("runtime scaling", criterion_9),
        ("execution counts", criterion_10),
        ("non-monotone recovery", criterion_11),
        ("currency invariance", criterion_12),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS {name}: {detail} [{secs:.1}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL {name}: {detail} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} of {} criteria pass",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

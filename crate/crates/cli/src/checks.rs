//! The `check-all` invariant sweep: every scenario in the corpus is loaded,
//! scheduled, executed, quoted, and searched, and every documented invariant
//! is asserted as a pass/fail line. IO problems are errors; failed
//! assertions are data.

use std::collections::BTreeSet;
use std::path::Path;

use anyhow::Context;

use parafee_core::execution::{apply_schedule, is_contingent_object, Guard};
use parafee_core::fees::{
    fee_sched_shill_check, fee_user_shill_check, independence_check, prior_expected_fee, quote,
    scheduler_risk, user_risk, FeeContext, IndependenceInstance, IndependenceVerdict, PricingRule,
    RiskDivision, SchedulerPrior,
};
use parafee_core::gcm::{
    efficiency_check, gas_assignment, scheduler_shill_search, spam_efficiency_witness,
    user_shill_search, GcmMechanism, SearchBudget,
};
use parafee_core::owtfm::{
    convergence_scenario, owtfm_sched_shill_eval, shill_alpha_bound, stable_demand_scenario,
    ConvergenceMode,
};
use parafee_core::rational::Rational;
use parafee_core::scheduling::{
    greedy_order, makespan_exact, makespan_greedy, schedule_greedy, schedule_opt, schedule_random,
    validate_schedule, worstcase_alpha, WorstCaseParams, EXACT_CAP,
};
use parafee_core::Transaction;

use crate::report::{Report, Table};
use crate::scenario::{load_scenario, scenario_hash, LoadedScenario};

fn rat(s: &str) -> Rational {
    s.parse().unwrap()
}

const ALPHA_GRID: [&str; 5] = ["0", "1/4", "1/2", "3/4", "1"];

/// Runs the full sweep over every `*.json` scenario in `corpus`.
pub fn run_corpus(corpus: &Path, report: &mut Report) -> anyhow::Result<()> {
    let mut paths: Vec<_> = std::fs::read_dir(corpus)
        .with_context(|| format!("reading corpus {}", corpus.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();

    let mut summary = Table::new("corpus", &["scenario", "file", "transactions", "hash"]);
    let mut loaded_ok: Vec<LoadedScenario> = Vec::new();
    for path in &paths {
        match load_scenario(path) {
            Ok(loaded) => {
                summary.row([
                    loaded.scenario.name.clone(),
                    path.file_name().unwrap().to_string_lossy().into_owned(),
                    loaded.scenario.total_tx_count().to_string(),
                    loaded.config_hash.clone(),
                ]);
                report.check(format!("{}: load", loaded.scenario.name), true, "");
                loaded_ok.push(loaded);
            }
            Err(e) => {
                report.check(
                    format!("{}: load", path.display()),
                    false,
                    e.issues.join("; "),
                );
            }
        }
    }
    report.push_table(summary);

    for loaded in &loaded_ok {
        scenario_checks(loaded, report);
    }
    independence_family_checks(&loaded_ok, report);
    global_checks(report);
    Ok(())
}

fn scenario_checks(loaded: &LoadedScenario, report: &mut Report) {
    let s = &loaded.scenario;
    let name = &s.name;
    let txs = s.txs();
    let cfg = &s.machine;
    let n = cfg.n_cores;

    // Reports must embed the hash of the scenario they ran on; a report
    // whose hash disagrees with the corpus is rejected.
    report.check(
        format!("{name}: report hash matches corpus"),
        scenario_hash(s) == loaded.config_hash,
        "",
    );

    // Feasibility of every emitted schedule, replayed independently.
    let greedy = match schedule_greedy(&txs, cfg) {
        Ok(sch) => sch,
        Err(e) => {
            report.check(format!("{name}: greedy schedule"), false, e.to_string());
            return;
        }
    };
    report.check(
        format!("{name}: greedy schedule validates"),
        validate_schedule(&greedy, cfg).is_ok(),
        "",
    );
    for seed in s.seeds.iter().take(4) {
        match schedule_random(&txs, cfg, *seed) {
            Ok(sch) => {
                report.check(
                    format!("{name}: random schedule (seed {seed}) validates"),
                    validate_schedule(&sch, cfg).is_ok(),
                    "",
                );
            }
            Err(e) => report.check(
                format!("{name}: random schedule (seed {seed})"),
                false,
                e.to_string(),
            ),
        }
    }

    // Engine determinism: identical inputs, identical placements.
    let greedy_again = schedule_greedy(&txs, cfg).unwrap();
    report.check(
        format!("{name}: greedy schedule deterministic"),
        greedy.assignment() == greedy_again.assignment(),
        "",
    );
    if let Some(seed) = s.seeds.first() {
        let a = schedule_random(&txs, cfg, *seed).unwrap();
        let b = schedule_random(&txs, cfg, *seed).unwrap();
        report.check(
            format!("{name}: random schedule deterministic per seed"),
            a.assignment() == b.assignment(),
            "",
        );
    }

    if txs.len() <= EXACT_CAP && !txs.is_empty() {
        let exact = makespan_exact(&txs, n).unwrap();
        let list = makespan_greedy(&txs, n, &greedy_order(&txs)).unwrap();
        report.check(
            format!("{name}: exact makespan bounds list schedule"),
            exact <= list,
            format!("v = {exact}, list = {list}"),
        );
        match schedule_opt(&txs, cfg) {
            Ok(opt) => {
                report.check(
                    format!("{name}: opt schedule validates"),
                    validate_schedule(&opt, cfg).is_ok(),
                    "",
                );
                let mut dominated = opt.revenue() >= greedy.revenue();
                for seed in s.seeds.iter().take(4) {
                    let r = schedule_random(&txs, cfg, *seed).unwrap();
                    dominated &= opt.revenue() >= r.revenue();
                }
                report.check(
                    format!("{name}: opt revenue dominates policies"),
                    dominated,
                    format!("opt = {}", opt.revenue()),
                );
            }
            Err(e) => report.check(format!("{name}: opt schedule"), false, e.to_string()),
        }
    }

    // Gas mechanisms within the subset-enumeration cap.
    if !txs.is_empty() && txs.len() <= parafee_core::gcm::GCM_SUBSET_CAP {
        match efficiency_check(GcmMechanism::Shapley, &txs, n) {
            Ok(eff) => report.check(
                format!("{name}: shapley gas sums to the makespan"),
                eff.holds,
                format!("total {} vs v = {}", eff.total_gas, eff.makespan),
            ),
            Err(e) => report.check(format!("{name}: shapley efficiency"), false, e.to_string()),
        }
        let assignment = gas_assignment(GcmMechanism::Tpm, &txs, n).unwrap();
        let proportional = txs.iter().all(|a| {
            txs.iter().all(|b| {
                &assignment.per_tx[&a.id] * Rational::from_u64(b.t)
                    == &assignment.per_tx[&b.id] * Rational::from_u64(a.t)
            })
        });
        report.check(
            format!("{name}: tpm gas is compute-proportional"),
            proportional,
            "",
        );
    }

    // Gas-level shill searches over the declared pools are exhaustive within
    // budget; their outcome (found or proven-none) is informational.
    let budget = SearchBudget::default();
    if !s.user_pool().is_empty() {
        for mech in [GcmMechanism::Shapley, GcmMechanism::Tpm] {
            let mut outcome = String::from("none");
            let mut ok = true;
            for victim in &txs {
                match user_shill_search(mech, &txs, &victim.id, s.user_pool(), 2, n, &budget) {
                    Ok(Some(r)) => outcome = format!("profit {} via {}", r.profit, victim.id),
                    Ok(None) => {}
                    Err(e) => {
                        ok = false;
                        outcome = e.to_string();
                    }
                }
            }
            report.check(
                format!("{name}: user shill search exhaustive ({mech})"),
                ok,
                outcome,
            );
        }
    }
    if !s.scheduler_pool().is_empty() {
        for mech in [GcmMechanism::Shapley, GcmMechanism::Tpm] {
            match scheduler_shill_search(mech, &txs, s.scheduler_pool(), 2, n, &budget) {
                Ok(found) => report.check(
                    format!("{name}: scheduler shill search exhaustive ({mech})"),
                    true,
                    found
                        .map(|r| format!("profit {}", r.profit))
                        .unwrap_or_else(|| "none".into()),
                ),
                Err(e) => report.check(
                    format!("{name}: scheduler shill search ({mech})"),
                    false,
                    e.to_string(),
                ),
            }
        }
    }

    // Fee-level shill proofness of the scenario's configured pricing rule.
    if let Ok(pricing) = s.pricing_rule() {
        if !s.user_pool().is_empty() {
            let mut pass = true;
            let mut detail = String::new();
            for victim in &txs {
                match fee_user_shill_check(&pricing, &txs, &victim.id, s.user_pool(), cfg, &s.division)
                {
                    Ok(check) if !check.pass => {
                        pass = false;
                        detail = format!("victim {} margin {}", victim.id, check.margin);
                    }
                    Ok(_) => {}
                    Err(e) => {
                        pass = false;
                        detail = e.to_string();
                    }
                }
            }
            report.check(
                format!("{name}: fee-based user shill proofness on pool"),
                pass,
                detail,
            );
        }
        if !s.scheduler_pool().is_empty() {
            let mut pass = true;
            let mut detail = String::new();
            for victim in &txs {
                match fee_sched_shill_check(
                    &pricing,
                    &txs,
                    &victim.id,
                    s.scheduler_pool(),
                    cfg,
                    &s.division,
                    &s.retention,
                ) {
                    Ok(check) if !check.pass => {
                        pass = false;
                        detail = format!("victim {} margin {}", victim.id, check.margin);
                    }
                    Ok(_) => {}
                    Err(e) => {
                        pass = false;
                        detail = e.to_string();
                    }
                }
            }
            report.check(
                format!("{name}: fee-based scheduler shill proofness on pool"),
                pass,
                detail,
            );
        }
    }

    // Execute the block once and audit every quote.
    risk_checks(loaded, report);
    contingency_checks(loaded, report);
    price_pump_checks(loaded, report);
}

fn risk_checks(loaded: &LoadedScenario, report: &mut Report) {
    let s = &loaded.scenario;
    let name = &s.name;
    let txs = s.txs();
    let pricing = match s.pricing_rule() {
        Ok(p) => p,
        Err(e) => {
            report.check(format!("{name}: pricing rule"), false, e.to_string());
            return;
        }
    };
    let schedule = schedule_greedy(&txs, &s.machine).unwrap();
    let outcomes = match apply_schedule(&s.initial_state(), &schedule, &s.rules()) {
        Ok((_, outcomes)) => outcomes,
        Err(e) => {
            report.check(format!("{name}: execution"), false, e.to_string());
            return;
        }
    };
    let ctx = FeeContext {
        txs: &txs,
        cfg: &s.machine,
    };

    let mut identity = true;
    let mut ordering = true;
    let mut boundaries = true;
    let mut shadow = true;
    for tx in schedule.txs() {
        let outcome = &outcomes[&tx.id];
        let mut zeroed_alphas = 0usize;
        let mut contingent_gap = false;
        for alpha in ALPHA_GRID {
            let division = RiskDivision::new(rat(alpha)).unwrap();
            let q = match quote(&pricing, &ctx, tx, outcome, &division, &s.retention) {
                Ok(q) => q,
                Err(e) => {
                    report.check(format!("{name}: quote {}", tx.id), false, e.to_string());
                    return;
                }
            };
            identity &= user_risk(&q) + scheduler_risk(&q) == &q.f_att - &q.f_ui;
            ordering &= q.f_base <= q.f_ui && q.f_ui <= q.f_att;
            ordering &= q.f_base <= q.f_act && q.f_act <= q.f_att;
            if division.alpha.is_zero() {
                boundaries &= user_risk(&q).is_zero();
            }
            if division.alpha == Rational::one() {
                boundaries &= scheduler_risk(&q).is_zero();
            }
            contingent_gap |= q.f_att > q.f_ui;
            if user_risk(&q).is_zero() && scheduler_risk(&q).is_zero() {
                zeroed_alphas += 1;
            }
        }
        // On a genuinely contingent realization no alpha zeroes both risks.
        if contingent_gap {
            shadow &= zeroed_alphas == 0;
        }
    }
    report.check(format!("{name}: UR + SR = f_att - f_ui"), identity, "");
    report.check(
        format!("{name}: fee levels ordered base <= ui <= act <= att"),
        ordering,
        "",
    );
    report.check(
        format!("{name}: alpha boundary presets zero one risk"),
        boundaries,
        "",
    );
    report.check(
        format!("{name}: no alpha removes both risks on contingent outcomes"),
        shadow,
        "",
    );
}

fn contingency_checks(loaded: &LoadedScenario, report: &mut Report) {
    let s = &loaded.scenario;
    let name = &s.name;
    // Only meaningful when some transaction declares a guarded branch.
    let guarded: Vec<_> = s
        .transactions
        .iter()
        .filter(|e| {
            e.rule
                .as_ref()
                .is_some_and(|r| matches!(r.guard, Guard::Compare { .. }))
                && e.tx.is_contingent_declared()
        })
        .collect();
    if guarded.is_empty() {
        return;
    }
    let rules = s.rules();
    let pool: Vec<_> = s
        .transactions
        .iter()
        .map(|e| (e.tx.clone(), rules[&e.tx.id].clone()))
        .collect();
    for entry in guarded {
        let tx = &entry.tx;
        let rule = &rules[&tx.id];
        let others: Vec<_> = pool.iter().filter(|(p, _)| p.id != tx.id).cloned().collect();
        let contingent: BTreeSet<_> = tx
            .contingent_reads
            .iter()
            .chain(&tx.contingent_writes)
            .cloned()
            .collect();
        let mut witnessed = true;
        let mut detail = String::new();
        for o in &contingent {
            match is_contingent_object(&s.initial_state(), tx, rule, o, &others, 3) {
                Ok(true) => {}
                Ok(false) => {
                    witnessed = false;
                    detail = format!("object {o} never flips for {}", tx.id);
                }
                Err(e) => {
                    witnessed = false;
                    detail = e.to_string();
                }
            }
        }
        report.check(
            format!("{name}: declared contingency witnessed by prefix search"),
            witnessed,
            detail,
        );
    }
}

fn price_pump_checks(loaded: &LoadedScenario, report: &mut Report) {
    let s = &loaded.scenario;
    let name = &s.name;
    let Some(owtfm) = &s.owtfm else { return };
    let Some(pump) = &owtfm.price_pump else {
        return;
    };
    let bound = match shill_alpha_bound(&owtfm.eta, &s.retention.gamma, &pump.victim_priority) {
        Ok(b) => b,
        Err(e) => {
            report.check(format!("{name}: shill alpha bound"), false, e.to_string());
            return;
        }
    };
    let fake_t = 10u64;
    let one = Rational::one();
    let eval = |alpha: Rational| {
        let division = RiskDivision::new(alpha).unwrap();
        owtfm_sched_shill_eval(pump, fake_t, &one, &owtfm.eta, &s.retention, &division)
            .map(|r| r.profit)
            .map_err(|e| e.to_string())
    };
    let at = eval(bound.value.clone());
    let below = eval(&bound.value * rat("99/100"));
    let above = eval(&bound.value * rat("101/100"));
    match (at, below, above) {
        (Ok(at), Ok(below), Ok(above)) => {
            report.check(
                format!("{name}: shill profit zero exactly at the alpha bound"),
                at.is_zero(),
                format!("profit {at}"),
            );
            report.check(
                format!("{name}: shill profit positive below the bound"),
                below.is_positive(),
                format!("profit {below}"),
            );
            report.check(
                format!("{name}: shill profit negative above the bound"),
                above.is_negative(),
                format!("profit {above}"),
            );
        }
        (at, below, above) => {
            report.check(
                format!("{name}: shill boundary evaluation"),
                false,
                format!("{at:?} {below:?} {above:?}"),
            );
        }
    }
}

/// Builds the independence family from every corpus scenario that ships a
/// pool, then checks the three pricing rules against it.
fn independence_family_checks(loaded: &[LoadedScenario], report: &mut Report) {
    let mut family = Vec::new();
    for l in loaded {
        let s = &l.scenario;
        let mut fakes: Vec<Transaction> = s.user_pool().to_vec();
        fakes.extend_from_slice(s.scheduler_pool());
        if fakes.is_empty() || s.txs().is_empty() {
            continue;
        }
        family.push(IndependenceInstance {
            name: s.name.clone(),
            base: s.txs(),
            fakes,
            cfg: s.machine.clone(),
        });
    }
    if family.is_empty() {
        return;
    }

    match independence_check(&PricingRule::ComputeProportional, &family) {
        Ok(verdict) => report.check(
            "independence: compute-proportional fee independent on family",
            verdict == IndependenceVerdict::Independent,
            "",
        ),
        Err(e) => report.check("independence: compute-proportional", false, e.to_string()),
    }

    let objects: BTreeSet<_> = family
        .iter()
        .flat_map(|i| i.base.iter().chain(&i.fakes))
        .flat_map(|tx| tx.declared())
        .collect();
    let book = parafee_core::owtfm::ObjectPriceBook::new(
        objects.into_iter().map(|o| (o, Rational::one())).collect(),
        Default::default(),
        rat("1/8"),
        parafee_core::owtfm::UpdateVariant::Linear,
    )
    .unwrap();
    match independence_check(&PricingRule::ObjectWeighted { book }, &family) {
        Ok(verdict) => report.check(
            "independence: object-weighted fee independent within a block",
            verdict == IndependenceVerdict::Independent,
            "",
        ),
        Err(e) => report.check("independence: object-weighted", false, e.to_string()),
    }

    match independence_check(&PricingRule::TpmDerived, &family) {
        Ok(IndependenceVerdict::Counterexample(ce)) => report.check(
            "independence: tpm-derived fee has a counterexample",
            true,
            format!(
                "{} fee moves {} -> {} on {}",
                ce.tx, ce.fee_before, ce.fee_after, ce.instance
            ),
        ),
        Ok(IndependenceVerdict::Independent) => report.check(
            "independence: tpm-derived fee has a counterexample",
            false,
            "family unexpectedly leaves tpm-derived fees unchanged",
        ),
        Err(e) => report.check("independence: tpm-derived", false, e.to_string()),
    }
}

fn global_checks(report: &mut Report) {
    // The nine expected-fee cells at (f_att, f_base) = (10, 4).
    let f_att = rat("10");
    let f_base = rat("4");
    let expected: [(&str, RiskDivision, [&str; 3]); 3] = [
        ("user_friendly", RiskDivision::user_friendly(), ["10", "4", "7"]),
        (
            "scheduler_friendly",
            RiskDivision::scheduler_friendly(),
            ["10", "10", "10"],
        ),
        ("even_steven", RiskDivision::even_steven(), ["10", "7", "17/2"]),
    ];
    let mut cells_ok = true;
    for (_, division, want) in &expected {
        let got = [
            prior_expected_fee(SchedulerPrior::Optimistic, division, &f_att, &f_base),
            prior_expected_fee(SchedulerPrior::Pessimistic, division, &f_att, &f_base),
            prior_expected_fee(SchedulerPrior::Median, division, &f_att, &f_base),
        ];
        cells_ok &= got.iter().zip(want).all(|(g, w)| g == &rat(w));
    }
    report.check(
        "priors: expected-fee table reproduces all nine cells",
        cells_ok,
        "",
    );

    // Scheduler shill proofness vs efficiency witness.
    match spam_efficiency_witness(2, 1) {
        Ok(w) => report.check(
            "spam witness: required gas exceeds makespan on 2 cores",
            w.contradiction && w.required_total == 3 && w.full_makespan == 2,
            format!("required {} vs v = {}", w.required_total, w.full_makespan),
        ),
        Err(e) => report.check("spam witness", false, e.to_string()),
    }

    // Convergence scenarios.
    let eta = rat("1/8");
    match convergence_scenario(ConvergenceMode::SingleDim, 400, &eta, 2, 50) {
        Ok(traj) => {
            let constant = traj
                .blocks
                .iter()
                .all(|b| b.prices.values().all(|p| p == &Rational::one()));
            report.check(
                "convergence: single-dimensional price constant for 50 blocks",
                constant,
                "",
            );
        }
        Err(e) => report.check("convergence: single-dimensional", false, e.to_string()),
    }
    match convergence_scenario(ConvergenceMode::MultiDim, 400, &eta, 2, 50) {
        Ok(traj) => {
            let mut decreasing = true;
            for pair in traj.blocks.windows(2) {
                for (o, p) in &pair[1].prices {
                    decreasing &= p < &pair[0].prices[o];
                }
            }
            report.check(
                "convergence: multi-dimensional prices strictly decrease",
                decreasing,
                "",
            );
        }
        Err(e) => report.check("convergence: multi-dimensional", false, e.to_string()),
    }
    match stable_demand_scenario(400, &eta, 2, 50) {
        Ok(traj) => {
            let constant = traj
                .blocks
                .iter()
                .all(|b| b.prices.values().all(|p| p == &Rational::one()));
            report.check(
                "convergence: multi-dimensional constant under at-target demand",
                constant,
                "",
            );
        }
        Err(e) => report.check("convergence: stable demand", false, e.to_string()),
    }

    // Worst-case GREEDY family approaches its bound monotonically.
    let mut gaps = Vec::new();
    let mut family_ok = true;
    for eps in ["1/10", "1/100", "1/1000"] {
        let params = WorstCaseParams {
            block_limit: 400,
            t_max: 100,
            n_cores: 2,
            n_objects: 3,
            eps: rat(eps),
        };
        match worstcase_alpha(&params) {
            Ok(r) => gaps.push((&r.alpha - &r.bound).abs()),
            Err(e) => {
                family_ok = false;
                report.check("greedy worst case", false, e.to_string());
            }
        }
    }
    if family_ok {
        let monotone = gaps.windows(2).all(|w| w[0] > w[1]);
        let close = gaps.last().map(|g| g < &rat("1/100")).unwrap_or(false);
        report.check(
            "greedy worst case: gap shrinks monotonically and ends below 1/100",
            monotone && close,
            format!(
                "gaps {}",
                gaps.iter().map(|g| g.to_string()).collect::<Vec<_>>().join(" > ")
            ),
        );
    }
}

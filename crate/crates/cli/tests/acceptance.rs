//! Acceptance suite: every release gate runs here, one test per criterion,
//! each printing a single pass line. Expected values are exact rationals
//! frozen from the worked examples and from the independent brute-force
//! oracles in `parafee_core::oracles`.
//!
//! Run with `cargo test -p parafee-cli --test acceptance -- --nocapture`.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use parafee_cli::scenario::load_scenario;
use parafee_core::execution::{exec, Comparator, ContingencyRule, Guard, State};
use parafee_core::fees::{
    independence_check, prior_expected_fee, scheduler_risk, user_risk, IndependenceInstance,
    IndependenceVerdict, PricingRule, RiskDivision, SchedulerPrior,
};
use parafee_core::gcm::{
    efficiency_check, scheduler_shill_search, shapley_gas, spam_efficiency_witness, tpm_gas,
    user_shill_search, GcmMechanism, SearchBudget,
};
use parafee_core::model::RetentionConfig;
use parafee_core::oracles::{makespan_bruteforce, shapley_permutation_oracle};
use parafee_core::owtfm::{
    convergence_scenario, ow_fee, owtfm_sched_shill_eval, shill_alpha_bound,
    stable_demand_scenario, ConvergenceMode, ObjectPriceBook, UpdateVariant,
};
use parafee_core::rational::Rational;
use parafee_core::scheduling::{
    alpha_ratio, makespan_exact, schedule_greedy, schedule_opt, validate_schedule, Policy,
    WorstCaseParams,
};
use parafee_core::{ObjectId, Transaction, TxId};

fn rat(s: &str) -> Rational {
    s.parse().unwrap()
}

fn corpus_path(file: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../corpus")
        .join(file)
}

fn corpus_files() -> Vec<PathBuf> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus");
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .expect("corpus directory")
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    files
}

/// Every transaction multiset a corpus scenario gives rise to: the scheduled
/// set alone and joined with each non-empty pool.
fn corpus_instances() -> Vec<(String, Vec<Transaction>, usize)> {
    let mut out = Vec::new();
    for path in corpus_files() {
        let loaded = load_scenario(&path).expect("corpus scenario loads");
        let s = loaded.scenario;
        let base = s.txs();
        let n = s.machine.n_cores;
        if !base.is_empty() {
            out.push((format!("{}:scheduled", s.name), base.clone(), n));
        }
        if !s.user_pool().is_empty() {
            let mut with = base.clone();
            with.extend_from_slice(s.user_pool());
            out.push((format!("{}:user_pool", s.name), with, n));
        }
        if !s.scheduler_pool().is_empty() {
            let mut with = base.clone();
            with.extend_from_slice(s.scheduler_pool());
            out.push((format!("{}:scheduler_pool", s.name), with, n));
        }
    }
    out
}

fn pass(criterion: &str, elapsed: Option<Duration>) {
    match elapsed {
        Some(d) => println!("acceptance {criterion}: PASS ({} ms)", d.as_millis()),
        None => println!("acceptance {criterion}: PASS"),
    }
}

#[test]
fn criterion_01_shapley_shill_example() {
    let started = Instant::now();
    let loaded = load_scenario(&corpus_path("shapley_shill.json")).unwrap();
    let s = &loaded.scenario;
    assert_eq!(s.total_tx_count(), 5);
    let txs = s.txs();
    let n = s.machine.n_cores;

    assert_eq!(shapley_gas(&txs, &TxId::new("tx4"), n).unwrap(), rat("8/3"));
    let mut attacked = txs.clone();
    attacked.extend_from_slice(s.user_pool());
    assert_eq!(
        shapley_gas(&attacked, &TxId::new("tx4"), n).unwrap(),
        rat("137/60")
    );
    assert_eq!(
        shapley_gas(&attacked, &TxId::new("tx5"), n).unwrap(),
        rat("11/30")
    );

    let report = user_shill_search(
        GcmMechanism::Shapley,
        &txs,
        &TxId::new("tx4"),
        s.user_pool(),
        1,
        n,
        &SearchBudget::default(),
    )
    .unwrap()
    .expect("documented attack must be found");
    assert_eq!(report.profit, rat("1/60"));

    let elapsed = started.elapsed();
    assert!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    pass("01 shapley shill example (8/3, 137/60, 11/30, profit 1/60)", Some(elapsed));
}

#[test]
fn criterion_02_tpm_shill_example() {
    let started = Instant::now();
    let loaded = load_scenario(&corpus_path("tpm_shill.json")).unwrap();
    let s = &loaded.scenario;
    let txs = s.txs();
    let n = s.machine.n_cores;

    assert_eq!(tpm_gas(&txs, &TxId::new("tx1"), n).unwrap(), rat("3"));
    assert_eq!(tpm_gas(&txs, &TxId::new("tx2"), n).unwrap(), rat("3"));
    let mut attacked = txs.clone();
    attacked.extend_from_slice(s.scheduler_pool());
    for id in ["tx1", "tx2", "tx3"] {
        assert_eq!(tpm_gas(&attacked, &TxId::new(id), n).unwrap(), rat("4"));
    }

    let report = scheduler_shill_search(
        GcmMechanism::Tpm,
        &txs,
        s.scheduler_pool(),
        1,
        n,
        &SearchBudget::default(),
    )
    .unwrap()
    .expect("documented attack must be found");
    assert_eq!(report.baseline, rat("6"));
    assert_eq!(report.attacked, rat("8"));
    assert_eq!(report.profit, rat("2"));

    let elapsed = started.elapsed();
    assert!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    pass("02 tpm shill example (3 -> 4 each, honest gas 6 -> 8, profit 2)", Some(elapsed));
}

#[test]
fn criterion_03_fee_ordered_dag_example() {
    let started = Instant::now();
    let loaded = load_scenario(&corpus_path("greedy_dag.json")).unwrap();
    let s = &loaded.scenario;
    let txs = s.txs();

    let greedy = schedule_greedy(&txs, &s.machine).unwrap();
    validate_schedule(&greedy, &s.machine).unwrap();
    assert!(!greedy.includes(&TxId::new("tx3")));
    assert_eq!(greedy.makespan(), 350);
    assert_eq!(greedy.revenue(), &rat("1350"));

    let opt = schedule_opt(&txs, &s.machine).unwrap();
    validate_schedule(&opt, &s.machine).unwrap();
    assert_eq!(opt.metrics().included.len(), 4);
    assert_eq!(opt.makespan(), 350);
    assert_eq!(opt.revenue(), &rat("1550"));

    assert_eq!(
        alpha_ratio(&Policy::Greedy, &txs, &s.machine).unwrap(),
        rat("27/31")
    );

    let elapsed = started.elapsed();
    assert!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    pass("03 fee-ordered DAG example (drop tx3, 1350 vs 1550, ratio 27/31)", Some(elapsed));
}

#[test]
fn criterion_04_greedy_worstcase_bound() {
    let started = Instant::now();
    let bound = rat("3/8");
    let mut gaps = Vec::new();
    for eps in ["1/10", "1/100", "1/1000"] {
        let report = parafee_core::scheduling::worstcase_alpha(&WorstCaseParams {
            block_limit: 400,
            t_max: 100,
            n_cores: 2,
            n_objects: 3,
            eps: rat(eps),
        })
        .unwrap();
        assert_eq!(report.bound, bound);
        gaps.push((&report.alpha - &bound).abs());
    }
    assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "gap must shrink");
    assert!(gaps[2] < rat("1/100"), "final gap {} too large", gaps[2]);

    let elapsed = started.elapsed();
    assert!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    pass("04 worst-case family approaches 3/8 monotonically", Some(elapsed));
}

#[test]
fn criterion_05_risk_identity_on_randomized_quotes() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let alphas: Vec<RiskDivision> = ["0", "1/4", "1/2", "3/4", "1"]
        .iter()
        .map(|a| RiskDivision::new(rat(a)).unwrap())
        .collect();
    let mut quotes = 0usize;
    for _ in 0..200 {
        let t = rng.gen_range(2u64..12);
        let t_base = rng.gen_range(1u64..=t);
        let tx = Transaction::writer("q", t, rat("1"), ["used", "maybe"])
            .with_reads(["gate"])
            .with_priority(Rational::from_u64(rng.gen_range(1u64..5)))
            .with_contingency(Vec::<&str>::new(), ["maybe"], t_base);
        let rule = ContingencyRule {
            tx_id: tx.id.clone(),
            guard: Guard::Compare {
                object: "gate".into(),
                cmp: Comparator::Gt,
                value: 0,
            },
            on_full: BTreeMap::from([("used".into(), 1), ("maybe".into(), 1)]),
            on_under: BTreeMap::from([("used".into(), 1)]),
        };
        let book = ObjectPriceBook::new(
            BTreeMap::from([
                ("gate".into(), Rational::from_u64(rng.gen_range(1u64..9))),
                ("used".into(), Rational::from_u64(rng.gen_range(1u64..9))),
                ("maybe".into(), Rational::from_u64(rng.gen_range(1u64..9))),
            ]),
            BTreeMap::new(),
            rat("1/8"),
            UpdateVariant::Linear,
        )
        .unwrap();
        let gate: i64 = rng.gen_range(-1i64..2);
        let state = State::from_values(BTreeMap::from([("gate".into(), gate)]));
        let outcome = exec(&state, &tx, &rule).unwrap();
        let retention = RetentionConfig {
            gamma: Rational::new(rng.gen_range(1i64..5), 5),
        };
        for division in &alphas {
            let q = ow_fee(&tx, &outcome, &book, division, &retention).unwrap();
            assert_eq!(user_risk(&q) + scheduler_risk(&q), &q.f_att - &q.f_ui);
            if division.alpha.is_zero() {
                assert!(user_risk(&q).is_zero());
            }
            if division.alpha == Rational::one() {
                assert!(scheduler_risk(&q).is_zero());
            }
            quotes += 1;
        }
    }
    assert_eq!(quotes, 1000);
    pass("05 UR + SR identity exact on 1000 randomized quotes", None);
}

#[test]
fn criterion_06_prior_expected_fee_table() {
    let f_att = rat("10");
    let f_base = rat("4");
    let cell = |prior, division: &RiskDivision| prior_expected_fee(prior, division, &f_att, &f_base);
    use SchedulerPrior::*;
    let uf = RiskDivision::user_friendly();
    let sf = RiskDivision::scheduler_friendly();
    let es = RiskDivision::even_steven();
    assert_eq!(cell(Optimistic, &uf), rat("10"));
    assert_eq!(cell(Pessimistic, &uf), rat("4"));
    assert_eq!(cell(Median, &uf), rat("7"));
    assert_eq!(cell(Optimistic, &sf), rat("10"));
    assert_eq!(cell(Pessimistic, &sf), rat("10"));
    assert_eq!(cell(Median, &sf), rat("10"));
    assert_eq!(cell(Optimistic, &es), rat("10"));
    assert_eq!(cell(Pessimistic, &es), rat("7"));
    assert_eq!(cell(Median, &es), rat("17/2"));
    pass("06 expected-fee table reproduces all nine cells", None);
}

#[test]
fn criterion_07_shill_proofness_vs_efficiency() {
    let witness = spam_efficiency_witness(2, 1).unwrap();
    assert_eq!(witness.required_total, 3);
    assert_eq!(witness.full_makespan, 2);
    assert_eq!(witness.subset_makespan, 1);
    assert!(witness.contradiction);

    for (name, txs, n) in corpus_instances() {
        if txs.len() > parafee_core::gcm::GCM_SUBSET_CAP {
            continue;
        }
        let report = efficiency_check(GcmMechanism::Shapley, &txs, n).unwrap();
        assert!(report.holds, "shapley not efficient on {name}");
    }
    pass("07 spam witness (3 > 2) and shapley efficiency across corpus", None);
}

#[test]
fn criterion_08_owtfm_shill_boundary() {
    let loaded = load_scenario(&corpus_path("owtfm_boundary.json")).unwrap();
    let s = &loaded.scenario;
    let owtfm = s.owtfm.as_ref().unwrap();
    let pump = owtfm.price_pump.as_ref().unwrap();

    let bound = shill_alpha_bound(&owtfm.eta, &s.retention.gamma, &pump.victim_priority)
        .unwrap()
        .value;
    assert_eq!(bound, rat("5/72"));

    let profit_at = |alpha: Rational| {
        let division = RiskDivision::new(alpha).unwrap();
        owtfm_sched_shill_eval(pump, 10, &rat("1"), &owtfm.eta, &s.retention, &division)
            .unwrap()
            .profit
    };
    assert!(profit_at(bound.clone()).is_zero());
    assert!(profit_at(&bound * rat("99/100")).is_positive());
    assert!(profit_at(&bound * rat("101/100")).is_negative());
    pass("08 OW-TFM shill profit changes sign exactly at alpha = 5/72", None);
}

#[test]
fn criterion_09_independence_theorem() {
    let tpm = load_scenario(&corpus_path("tpm_shill.json")).unwrap().scenario;
    let shapley = load_scenario(&corpus_path("shapley_shill.json"))
        .unwrap()
        .scenario;
    let family = vec![
        IndependenceInstance {
            name: "tpm_shill".into(),
            base: tpm.txs(),
            fakes: tpm.scheduler_pool().to_vec(),
            cfg: tpm.machine.clone(),
        },
        IndependenceInstance {
            name: "shapley_shill".into(),
            base: shapley.txs(),
            fakes: shapley.user_pool().to_vec(),
            cfg: shapley.machine.clone(),
        },
    ];

    assert_eq!(
        independence_check(&PricingRule::ComputeProportional, &family).unwrap(),
        IndependenceVerdict::Independent
    );

    let objects: BTreeMap<ObjectId, Rational> = ["o1", "o2"]
        .iter()
        .map(|o| (ObjectId::new(*o), Rational::one()))
        .collect();
    let book =
        ObjectPriceBook::new(objects, BTreeMap::new(), rat("1/8"), UpdateVariant::Linear).unwrap();
    assert_eq!(
        independence_check(&PricingRule::ObjectWeighted { book }, &family).unwrap(),
        IndependenceVerdict::Independent
    );

    match independence_check(&PricingRule::TpmDerived, &family).unwrap() {
        IndependenceVerdict::Counterexample(ce) => {
            assert_eq!(ce.instance, "tpm_shill");
            assert_eq!(ce.fee_before, rat("3"));
            assert_eq!(ce.fee_after, rat("4"));
        }
        IndependenceVerdict::Independent => panic!("tpm-derived fee must move 3 -> 4"),
    }
    pass("09 independence holds for flat rules; tpm-derived moves 3 -> 4", None);
}

#[test]
fn criterion_10_convergence_scenarios() {
    let started = Instant::now();
    let eta = rat("1/8");

    let single = convergence_scenario(ConvergenceMode::SingleDim, 400, &eta, 2, 50).unwrap();
    assert_eq!(single.blocks.len(), 50);
    for block in &single.blocks {
        assert_eq!(block.prices[&ObjectId::new("agg")], Rational::one());
    }

    let multi = convergence_scenario(ConvergenceMode::MultiDim, 400, &eta, 2, 50).unwrap();
    for pair in multi.blocks.windows(2) {
        for (o, p) in &pair[1].prices {
            assert!(p < &pair[0].prices[o], "{o} price must strictly decrease");
        }
    }

    let stable = stable_demand_scenario(400, &eta, 2, 50).unwrap();
    for block in &stable.blocks {
        for p in block.prices.values() {
            assert_eq!(p, &Rational::one());
        }
    }

    let elapsed = started.elapsed();
    assert!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    pass("10 convergence: aggregate constant, per-resource decreasing, at-target stable", Some(elapsed));
}

#[test]
fn criterion_11_oracle_equivalence() {
    let mut checked_makespans = 0usize;
    let mut checked_shapley = 0usize;
    for (name, txs, n) in corpus_instances() {
        if txs.len() <= 6 {
            assert_eq!(
                makespan_exact(&txs, n).unwrap(),
                makespan_bruteforce(&txs, n),
                "makespan oracle disagrees on {name}"
            );
            checked_makespans += 1;
            for tx in &txs {
                assert_eq!(
                    shapley_gas(&txs, &tx.id, n).unwrap(),
                    shapley_permutation_oracle(&txs, &tx.id, n),
                    "shapley oracle disagrees on {name}/{}",
                    tx.id
                );
            }
            checked_shapley += 1;
        }
    }
    assert!(checked_makespans >= 5, "corpus must exercise the oracles");
    assert!(checked_shapley >= 5);
    pass("11 fast paths equal brute-force oracles on all small corpus instances", None);
}

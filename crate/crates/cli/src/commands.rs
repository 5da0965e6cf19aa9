//! Command-line surface and per-command report builders.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use parafee_core::fees::{
    prior_expected_fee, quote, scheduler_risk, user_risk, FeeContext, RiskDivision, SchedulerPrior,
};
use parafee_core::gcm::{
    gas_assignment, scheduler_shill_search, user_shill_search, GcmMechanism, SearchBudget,
    ShillReport,
};
use parafee_core::model::RetentionConfig;
use parafee_core::owtfm::{
    convergence_scenario, shill_alpha_bound, simulate_blocks, stable_demand_scenario, BlockPlan,
    ConvergenceMode, ObjectPriceBook, SimConfig, SimTrajectory, UpdateVariant,
};
use parafee_core::rational::Rational;
use parafee_core::scheduling::{schedule_greedy, schedule_opt, schedule_random, validate_schedule};
use parafee_core::{Policy, Schedule, Transaction, TxId};

use crate::checks;
use crate::report::{Report, Table};
use crate::scenario::{load_scenario, LoadedScenario};

#[derive(Parser, Debug)]
#[command(
    name = "parafee",
    version,
    about = "Fee mechanisms and conflict-aware scheduling for parallel execution"
)]
pub struct Cli {
    /// Report output format.
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Human)]
    pub format: OutputFormat,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Human,
    Json,
    /// Primary table only, RFC-4180.
    Csv,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build a schedule for the scenario under a policy
    Schedule(ScheduleArgs),
    /// Per-transaction gas under a gas computation mechanism
    Gas(GasArgs),
    /// Exhaustive shill-attack search over the scenario's pools
    Shill(ShillArgs),
    /// Fee quotes and risk accounting for realized execution
    Risk(RiskArgs),
    /// Expected-fee table across scheduler priors and risk divisions
    PriorTable(PriorTableArgs),
    /// Multi-block object-weighted fee simulation
    OwtfmSim(OwtfmSimArgs),
    /// Convergence scenarios for single- vs multi-dimensional pricing
    Convergence(ConvergenceArgs),
    /// Closed-form bounds with evaluated witness instances
    Bounds(BoundsArgs),
    /// Run every invariant suite across the scenario corpus
    CheckAll(CheckAllArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum PolicyArg {
    Greedy,
    Random,
    Opt,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum MechArg {
    Shapley,
    Tpm,
}

impl From<MechArg> for GcmMechanism {
    fn from(m: MechArg) -> Self {
        match m {
            MechArg::Shapley => GcmMechanism::Shapley,
            MechArg::Tpm => GcmMechanism::Tpm,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum AttackerArg {
    User,
    Scheduler,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum VariantArg {
    Exp,
    Linear,
}

impl From<VariantArg> for UpdateVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Exp => UpdateVariant::Exponential,
            VariantArg::Linear => UpdateVariant::Linear,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModeArg {
    Single,
    Multi,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum DemandArg {
    /// The imbalanced two-resource pattern whose aggregate meets the target.
    Example,
    /// One transaction per resource at exactly the target.
    Stable,
}

#[derive(Args, Debug)]
pub struct ScheduleArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long, value_enum, default_value_t = PolicyArg::Greedy)]
    pub policy: PolicyArg,
    /// Seed for the random policy.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct GasArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long, value_enum)]
    pub mech: MechArg,
}

#[derive(Args, Debug)]
pub struct ShillArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long, value_enum)]
    pub attacker: AttackerArg,
    #[arg(long, value_enum)]
    pub mech: MechArg,
    #[arg(long, default_value_t = 2)]
    pub kmax: usize,
    /// Victim for user attacks; all scheduled transactions when omitted.
    #[arg(long)]
    pub victim: Option<String>,
}

#[derive(Args, Debug)]
pub struct RiskArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Override the scenario's risk division.
    #[arg(long)]
    pub alpha: Option<String>,
    /// Override the scenario's retention ratio.
    #[arg(long)]
    pub gamma: Option<String>,
}

#[derive(Args, Debug)]
pub struct PriorTableArgs {
    #[arg(long, default_value = "10")]
    pub f_att: String,
    #[arg(long, default_value = "4")]
    pub f_base: String,
}

#[derive(Args, Debug)]
pub struct OwtfmSimArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub blocks: u64,
    #[arg(long)]
    pub eta: Option<String>,
    #[arg(long)]
    pub alpha: Option<String>,
    #[arg(long)]
    pub gamma: Option<String>,
    #[arg(long, value_enum)]
    pub variant: Option<VariantArg>,
}

#[derive(Args, Debug)]
pub struct ConvergenceArgs {
    #[arg(long, value_enum)]
    pub mode: ModeArg,
    #[arg(long, value_enum, default_value_t = DemandArg::Example)]
    pub demand: DemandArg,
    #[arg(long, default_value_t = 400)]
    pub g: u64,
    #[arg(long, default_value = "1/8")]
    pub eta: String,
    #[arg(long, default_value_t = 2)]
    pub eps: u64,
    #[arg(long, default_value_t = 50)]
    pub blocks: u64,
}

#[derive(Args, Debug)]
pub struct BoundsArgs {
    /// Responsiveness of the price update.
    #[arg(long, default_value = "1/8")]
    pub eta: String,
    #[arg(long, default_value = "1/10")]
    pub gamma: String,
    /// Average priority of the victim demand.
    #[arg(long, default_value = "5")]
    pub pi: String,
    #[arg(long, default_value_t = 400)]
    pub g: u64,
    #[arg(long, default_value_t = 100)]
    pub tmax: u64,
    #[arg(long, default_value_t = 2)]
    pub cores: usize,
    #[arg(long, default_value_t = 3)]
    pub objects: usize,
    #[arg(long, default_value = "1/1000")]
    pub eps: String,
    /// Compute units for the spam-efficiency witness.
    #[arg(long, default_value_t = 1)]
    pub t: u64,
}

#[derive(Args, Debug)]
pub struct CheckAllArgs {
    /// Scenario corpus directory (defaults to ./corpus).
    #[arg(long, env = "PARAFEE_CORPUS")]
    pub corpus: Option<PathBuf>,
}

fn parse_rational(s: &str, what: &str) -> anyhow::Result<Rational> {
    s.parse::<Rational>()
        .map_err(|e| anyhow!("invalid {what} {s:?}: {e}"))
}

fn command_echo(cli_command: &Command) -> String {
    format!("{cli_command:?}")
}

/// Executes one command into a report. Errors are usage/input/module errors;
/// assertion failures live in the report's check lines instead.
pub fn execute(command: &Command) -> anyhow::Result<Report> {
    match command {
        Command::Schedule(args) => run_schedule(args, command_echo(command)),
        Command::Gas(args) => run_gas(args, command_echo(command)),
        Command::Shill(args) => run_shill(args, command_echo(command)),
        Command::Risk(args) => run_risk(args, command_echo(command)),
        Command::PriorTable(args) => run_prior_table(args, command_echo(command)),
        Command::OwtfmSim(args) => run_owtfm_sim(args, command_echo(command)),
        Command::Convergence(args) => run_convergence(args, command_echo(command)),
        Command::Bounds(args) => run_bounds(args, command_echo(command)),
        Command::CheckAll(args) => run_check_all(args, command_echo(command)),
    }
}

fn load(path: &Path) -> anyhow::Result<LoadedScenario> {
    load_scenario(path).map_err(|e| anyhow!("{e}"))
}

fn schedule_table(txs: &[Transaction], schedule: &Schedule) -> Table {
    let mut table = Table::new("schedule", &["tx_id", "core", "start", "finish", "included"]);
    let mut ids: Vec<&TxId> = txs.iter().map(|tx| &tx.id).collect();
    ids.sort();
    for id in ids {
        match schedule.slot(id) {
            Some(slot) => table.row([
                id.to_string(),
                slot.core.to_string(),
                slot.start.to_string(),
                slot.finish.to_string(),
                "true".into(),
            ]),
            None => table.row([id.to_string(), String::new(), String::new(), String::new(), "false".into()]),
        }
    }
    table
}

fn run_schedule(args: &ScheduleArgs, echo: String) -> anyhow::Result<Report> {
    let loaded = load(&args.scenario)?;
    let scenario = &loaded.scenario;
    let txs = scenario.txs();
    let started = Instant::now();
    let schedule = match args.policy {
        PolicyArg::Greedy => schedule_greedy(&txs, &scenario.machine)?,
        PolicyArg::Random => schedule_random(&txs, &scenario.machine, args.seed)?,
        PolicyArg::Opt => schedule_opt(&txs, &scenario.machine)?,
    };
    let elapsed = started.elapsed().as_millis();

    let mut report = Report::for_scenario(echo, &scenario.name, &loaded.config_hash);
    report.push_table(schedule_table(&txs, &schedule));
    let m = schedule.metrics();
    let mut metrics = Table::new(
        "metrics",
        &["makespan", "total_compute", "revenue", "included", "dropped"],
    );
    metrics.row([
        m.makespan.to_string(),
        m.total_compute.to_string(),
        m.revenue.to_string(),
        m.included.len().to_string(),
        m.dropped.len().to_string(),
    ]);
    report.push_table(metrics);
    let valid = validate_schedule(&schedule, &scenario.machine);
    report.check(
        "schedule_feasibility",
        valid.is_ok(),
        valid.err().map(|e| e.to_string()).unwrap_or_default(),
    );
    report.timing("schedule", elapsed);
    Ok(report)
}

fn gas_table(
    title: &str,
    mech: GcmMechanism,
    txs: &[Transaction],
    n_cores: usize,
) -> anyhow::Result<Table> {
    let assignment = gas_assignment(mech, txs, n_cores)?;
    let mut table = Table::new(title, &["tx_id", "gas"]);
    for (id, gas) in &assignment.per_tx {
        table.row([id.to_string(), gas.to_string()]);
    }
    table.row(["(total)".to_string(), assignment.total.to_string()]);
    Ok(table)
}

fn run_gas(args: &GasArgs, echo: String) -> anyhow::Result<Report> {
    let loaded = load(&args.scenario)?;
    let scenario = &loaded.scenario;
    let mech: GcmMechanism = args.mech.into();
    let txs = scenario.txs();
    let n = scenario.machine.n_cores;

    let mut report = Report::for_scenario(echo, &scenario.name, &loaded.config_hash);
    report.push_table(gas_table("gas (scheduled set)", mech, &txs, n)?);
    if !scenario.user_pool().is_empty() {
        let with_pool: Vec<Transaction> =
            txs.iter().chain(scenario.user_pool()).cloned().collect();
        report.push_table(gas_table("gas (with user pool)", mech, &with_pool, n)?);
    }
    if !scenario.scheduler_pool().is_empty() {
        let with_pool: Vec<Transaction> = txs
            .iter()
            .chain(scenario.scheduler_pool())
            .cloned()
            .collect();
        report.push_table(gas_table("gas (with scheduler pool)", mech, &with_pool, n)?);
    }
    let efficiency = parafee_core::gcm::efficiency_check(mech, &txs, n)?;
    report.check(
        "efficiency",
        efficiency.holds,
        format!(
            "total gas {} vs makespan {} (residual {})",
            efficiency.total_gas, efficiency.makespan, efficiency.residual
        ),
    );
    Ok(report)
}

fn shill_report_table(title: &str, found: Option<&ShillReport>, victim: &str) -> Table {
    let mut table = Table::new(
        title,
        &[
            "attacker",
            "mechanism",
            "victim",
            "fakes",
            "baseline",
            "attacked",
            "profit",
        ],
    );
    match found {
        Some(r) => {
            let fakes = r
                .fake_txs
                .iter()
                .map(|tx| tx.id.to_string())
                .collect::<Vec<_>>()
                .join("+");
            table.row([
                format!("{:?}", r.attacker).to_lowercase(),
                r.mechanism.to_string(),
                victim.to_string(),
                fakes,
                r.baseline.to_string(),
                r.attacked.to_string(),
                r.profit.to_string(),
            ]);
        }
        None => {
            table.row([
                "-".to_string(),
                "-".to_string(),
                victim.to_string(),
                "none".to_string(),
                String::new(),
                String::new(),
                String::new(),
            ]);
        }
    }
    table
}

fn run_shill(args: &ShillArgs, echo: String) -> anyhow::Result<Report> {
    let loaded = load(&args.scenario)?;
    let scenario = &loaded.scenario;
    let mech: GcmMechanism = args.mech.into();
    let txs = scenario.txs();
    let n = scenario.machine.n_cores;
    let budget = SearchBudget::default();

    let mut report = Report::for_scenario(echo, &scenario.name, &loaded.config_hash);
    match args.attacker {
        AttackerArg::User => {
            let pool = scenario.user_pool();
            let victims: Vec<TxId> = match &args.victim {
                Some(v) => vec![TxId::new(v.clone())],
                None => txs.iter().map(|tx| tx.id.clone()).collect(),
            };
            let mut best: Option<(TxId, ShillReport)> = None;
            for victim in victims {
                if let Some(r) = user_shill_search(mech, &txs, &victim, pool, args.kmax, n, &budget)? {
                    let better = best
                        .as_ref()
                        .is_none_or(|(_, b)| r.profit > b.profit);
                    if better {
                        best = Some((victim, r));
                    }
                }
            }
            let victim_label = best
                .as_ref()
                .map(|(v, _)| v.to_string())
                .unwrap_or_else(|| "-".into());
            report.push_table(shill_report_table(
                "user shill search",
                best.as_ref().map(|(_, r)| r),
                &victim_label,
            ));
            if let Some((_, r)) = best {
                report.artifact("shill_report", serde_json::to_value(&r)?);
            }
        }
        AttackerArg::Scheduler => {
            let pool = scenario.scheduler_pool();
            let found = scheduler_shill_search(mech, &txs, pool, args.kmax, n, &budget)?;
            report.push_table(shill_report_table(
                "scheduler shill search",
                found.as_ref(),
                "-",
            ));
            if let Some(r) = found {
                report.artifact("shill_report", serde_json::to_value(&r)?);
            }
        }
    }
    Ok(report)
}

fn run_risk(args: &RiskArgs, echo: String) -> anyhow::Result<Report> {
    let loaded = load(&args.scenario)?;
    let scenario = &loaded.scenario;
    let division = match &args.alpha {
        Some(a) => RiskDivision::new(parse_rational(a, "alpha")?)
            .map_err(|e| anyhow!("{e}"))?,
        None => scenario.division.clone(),
    };
    let retention = match &args.gamma {
        Some(g) => RetentionConfig::new(parse_rational(g, "gamma")?)
            .map_err(|e| anyhow!("{e}"))?,
        None => scenario.retention.clone(),
    };

    let txs = scenario.txs();
    let rules = scenario.rules();
    let schedule = schedule_greedy(&txs, &scenario.machine)?;
    let (_, outcomes) =
        parafee_core::execution::apply_schedule(&scenario.initial_state(), &schedule, &rules)?;
    let pricing = scenario.pricing_rule().map_err(|e| anyhow!("{e}"))?;
    let ctx = FeeContext {
        txs: &txs,
        cfg: &scenario.machine,
    };

    let mut report = Report::for_scenario(echo, &scenario.name, &loaded.config_hash);
    let mut table = Table::new(
        "risk",
        &[
            "tx_id", "fully_executed", "f_base", "f_ui", "f_att", "f_act", "r_act", "UR", "SR",
        ],
    );
    let mut lemma_ok = true;
    for tx in schedule.txs() {
        let outcome = &outcomes[&tx.id];
        let q = quote(&pricing, &ctx, tx, outcome, &division, &retention)
            .map_err(|e| anyhow!("{e}"))?;
        let ur = user_risk(&q);
        let sr = scheduler_risk(&q);
        lemma_ok &= &ur + &sr == &q.f_att - &q.f_ui;
        table.row([
            tx.id.to_string(),
            outcome.fully_executed.to_string(),
            q.f_base.to_string(),
            q.f_ui.to_string(),
            q.f_att.to_string(),
            q.f_act.to_string(),
            q.r_act.to_string(),
            ur.to_string(),
            sr.to_string(),
        ]);
    }
    report.push_table(table);
    report.check(
        "risk_sum_identity",
        lemma_ok,
        "UR + SR = f_att - f_ui on every quote",
    );
    Ok(report)
}

fn run_prior_table(args: &PriorTableArgs, echo: String) -> anyhow::Result<Report> {
    let f_att = parse_rational(&args.f_att, "f_att")?;
    let f_base = parse_rational(&args.f_base, "f_base")?;
    if f_base > f_att {
        bail!("f_base {} exceeds f_att {}", f_base, f_att);
    }
    let mut report = Report::new(echo);
    let mut table = Table::new(
        "expected fee by prior",
        &["division", "optimistic", "pessimistic", "median"],
    );
    let rows = [
        ("user_friendly", RiskDivision::user_friendly()),
        ("scheduler_friendly", RiskDivision::scheduler_friendly()),
        ("even_steven", RiskDivision::even_steven()),
    ];
    for (name, division) in rows {
        table.row([
            name.to_string(),
            prior_expected_fee(SchedulerPrior::Optimistic, &division, &f_att, &f_base).to_string(),
            prior_expected_fee(SchedulerPrior::Pessimistic, &division, &f_att, &f_base).to_string(),
            prior_expected_fee(SchedulerPrior::Median, &division, &f_att, &f_base).to_string(),
        ]);
    }
    report.push_table(table);
    Ok(report)
}

fn trajectory_table(traj: &SimTrajectory, book: &ObjectPriceBook) -> Table {
    let mut table = Table::new(
        "trajectory",
        &[
            "block",
            "object",
            "price",
            "utilization",
            "target",
            "fees_collected",
            "burned",
        ],
    );
    for block in &traj.blocks {
        for (o, price) in &block.prices {
            table.row([
                block.block.to_string(),
                o.to_string(),
                price.to_string(),
                block.utilization.get(o).copied().unwrap_or(0).to_string(),
                book.target_of(o).map(|t| t.to_string()).unwrap_or_default(),
                block.fees_collected.to_string(),
                block.burned.to_string(),
            ]);
        }
    }
    table
}

fn run_owtfm_sim(args: &OwtfmSimArgs, echo: String) -> anyhow::Result<Report> {
    let loaded = load(&args.scenario)?;
    let scenario = &loaded.scenario;
    let owtfm = scenario
        .owtfm
        .as_ref()
        .ok_or_else(|| anyhow!("scenario {} has no owtfm section", scenario.name))?;
    let mut book = scenario
        .price_book()
        .expect("owtfm present")
        .map_err(|e| anyhow!("{e}"))?;
    if let Some(eta) = &args.eta {
        book.eta = parse_rational(eta, "eta")?;
    }
    if let Some(variant) = args.variant {
        book.update_variant = variant.into();
    }
    let division = match &args.alpha {
        Some(a) => RiskDivision::new(parse_rational(a, "alpha")?).map_err(|e| anyhow!("{e}"))?,
        None => scenario.division.clone(),
    };
    let retention = match &args.gamma {
        Some(g) => RetentionConfig::new(parse_rational(g, "gamma")?).map_err(|e| anyhow!("{e}"))?,
        None => scenario.retention.clone(),
    };

    let rules = scenario.rules();
    let txs = scenario.txs();
    let plans: Vec<BlockPlan> = match &owtfm.demand {
        None => vec![BlockPlan {
            txs: txs.clone(),
            rules: rules.clone(),
        }],
        Some(demand) => demand
            .iter()
            .map(|block_ids| {
                let block_txs: Vec<Transaction> = txs
                    .iter()
                    .filter(|tx| block_ids.contains(&tx.id))
                    .cloned()
                    .collect();
                let block_rules = block_txs
                    .iter()
                    .map(|tx| (tx.id.clone(), rules[&tx.id].clone()))
                    .collect();
                BlockPlan {
                    txs: block_txs,
                    rules: block_rules,
                }
            })
            .collect(),
    };
    let sim = SimConfig {
        machine: scenario.machine.clone(),
        policy: Policy::Greedy,
        division,
        retention,
        realized_utilization: false,
    };
    let started = Instant::now();
    let traj = simulate_blocks(&plans, &sim, book.clone(), scenario.initial_state(), args.blocks)
        .map_err(|e| anyhow!("{e}"))?;
    let elapsed = started.elapsed().as_millis();

    let mut report = Report::for_scenario(echo, &scenario.name, &loaded.config_hash);
    report.push_table(trajectory_table(&traj, &book));
    report.timing("simulate_blocks", elapsed);
    Ok(report)
}

fn run_convergence(args: &ConvergenceArgs, echo: String) -> anyhow::Result<Report> {
    let eta = parse_rational(&args.eta, "eta")?;
    let traj = match (args.demand, args.mode) {
        (DemandArg::Example, ModeArg::Single) => {
            convergence_scenario(ConvergenceMode::SingleDim, args.g, &eta, args.eps, args.blocks)
        }
        (DemandArg::Example, ModeArg::Multi) => {
            convergence_scenario(ConvergenceMode::MultiDim, args.g, &eta, args.eps, args.blocks)
        }
        (DemandArg::Stable, _) => stable_demand_scenario(args.g, &eta, 2, args.blocks),
    }
    .map_err(|e| anyhow!("{e}"))?;

    let mut report = Report::new(echo);
    let mut table = Table::new(
        "trajectory",
        &["block", "object", "price", "utilization", "target"],
    );
    let target = Rational::from_u64(args.g / 2);
    for block in &traj.blocks {
        for (o, price) in &block.prices {
            table.row([
                block.block.to_string(),
                o.to_string(),
                price.to_string(),
                block.utilization.get(o).copied().unwrap_or(0).to_string(),
                target.to_string(),
            ]);
        }
    }
    report.push_table(table);
    Ok(report)
}

fn run_bounds(args: &BoundsArgs, echo: String) -> anyhow::Result<Report> {
    let eta = parse_rational(&args.eta, "eta")?;
    let gamma = parse_rational(&args.gamma, "gamma")?;
    let pi = parse_rational(&args.pi, "pi")?;
    let eps = parse_rational(&args.eps, "eps")?;

    let mut report = Report::new(echo);

    let bound = shill_alpha_bound(&eta, &gamma, &pi).map_err(|e| anyhow!("{e}"))?;
    let mut table = Table::new(
        "owtfm scheduler-shill alpha bound",
        &["eta", "gamma", "pi_o", "alpha_bound", "feasible"],
    );
    table.row([
        eta.to_string(),
        gamma.to_string(),
        pi.to_string(),
        bound.value.to_string(),
        bound.feasible.to_string(),
    ]);
    report.push_table(table);

    let params = parafee_core::scheduling::WorstCaseParams {
        block_limit: args.g,
        t_max: args.tmax,
        n_cores: args.cores,
        n_objects: args.objects,
        eps,
    };
    let started = Instant::now();
    let wc = parafee_core::scheduling::worstcase_alpha(&params).map_err(|e| anyhow!("{e}"))?;
    report.timing("worstcase_alpha", started.elapsed().as_millis());
    let mut table = Table::new(
        "greedy worst-case ratio",
        &[
            "G",
            "t_max",
            "cores",
            "objects",
            "eps",
            "bound",
            "alpha",
            "gap",
            "greedy_revenue",
            "opt_revenue",
        ],
    );
    table.row([
        args.g.to_string(),
        args.tmax.to_string(),
        args.cores.to_string(),
        args.objects.to_string(),
        params.eps.to_string(),
        wc.bound.to_string(),
        wc.alpha.to_string(),
        (&wc.alpha - &wc.bound).abs().to_string(),
        wc.greedy_revenue.to_string(),
        wc.opt_revenue.to_string(),
    ]);
    report.push_table(table);

    let witness =
        parafee_core::gcm::spam_efficiency_witness(args.cores, args.t).map_err(|e| anyhow!("{e}"))?;
    let mut table = Table::new(
        "scheduler-shill-proofness vs efficiency witness",
        &[
            "cores",
            "t",
            "subset_makespan",
            "full_makespan",
            "required_total",
            "contradiction",
        ],
    );
    table.row([
        witness.n_cores.to_string(),
        witness.t.to_string(),
        witness.subset_makespan.to_string(),
        witness.full_makespan.to_string(),
        witness.required_total.to_string(),
        witness.contradiction.to_string(),
    ]);
    report.push_table(table);
    Ok(report)
}

fn run_check_all(args: &CheckAllArgs, echo: String) -> anyhow::Result<Report> {
    let corpus = args
        .corpus
        .clone()
        .unwrap_or_else(|| PathBuf::from("corpus"));
    if !corpus.is_dir() {
        bail!("corpus directory {} does not exist", corpus.display());
    }
    let started = Instant::now();
    let mut report = Report::new(echo);
    checks::run_corpus(&corpus, &mut report).context("corpus sweep failed")?;
    report.timing("check_all", started.elapsed().as_millis());
    Ok(report)
}

//! Object-weighted TFM: per-object posted prices with utilization-driven
//! updates, fee computation under the alpha risk split, the scheduler-shill
//! alpha bound, and multi-block simulation including the convergence
//! scenarios.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::execution::{apply_schedule, ContingencyRule, ExecError, ExecOutcome, State};
use crate::fees::{FeeQuote, RiskDivision};
use crate::model::{MachineConfig, ObjectId, RetentionConfig, Transaction, TxId};
use crate::rational::{exp_rational, round_to_sig_digits, Rational};
use crate::scheduling::{
    schedule_greedy, schedule_opt, schedule_random, Policy, Schedule, ScheduleError,
};

/// Significant decimal digits carried by the exponential price update.
pub const PRICE_SIG_DIGITS: u32 = 30;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateVariant {
    /// `p * exp(eta * (U - U*) / U*)`, evaluated in 30-digit decimals.
    #[default]
    Exponential,
    /// `p * (1 + eta * (U - U*) / U*)`, exact rational arithmetic.
    Linear,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OwtfmError {
    #[error("object {0} has no posted price")]
    UnpricedObject(ObjectId),
    #[error("object {0} has no target utilization")]
    UntargetedObject(ObjectId),
    #[error("price for {0} must be strictly positive")]
    NonPositivePrice(ObjectId),
    #[error("target for {0} must be strictly positive")]
    NonPositiveTarget(ObjectId),
    #[error("responsiveness eta must be strictly positive")]
    NonPositiveEta,
    #[error("linear update underflow: price would drop to {0}")]
    LinearUnderflow(Rational),
    #[error("retention gamma = 1 retains all fees; the shill bound diverges")]
    FullRetention,
    #[error("gamma must lie strictly inside (0, 1) for the shill bound, got {0}")]
    BadGamma(Rational),
    #[error("convergence scenario needs G divisible by 4 and eps even, 0 < eps < G/2")]
    BadConvergenceParams,
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

/// Posted per-object prices and targets, plus the update rule parameters.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectPriceBook {
    pub prices: BTreeMap<ObjectId, Rational>,
    pub targets: BTreeMap<ObjectId, Rational>,
    pub eta: Rational,
    #[serde(default)]
    pub update_variant: UpdateVariant,
}

impl ObjectPriceBook {
    pub fn new(
        prices: BTreeMap<ObjectId, Rational>,
        targets: BTreeMap<ObjectId, Rational>,
        eta: Rational,
        update_variant: UpdateVariant,
    ) -> Result<Self, OwtfmError> {
        let book = ObjectPriceBook {
            prices,
            targets,
            eta,
            update_variant,
        };
        book.validate()?;
        Ok(book)
    }

    pub fn validate(&self) -> Result<(), OwtfmError> {
        for (o, p) in &self.prices {
            if !p.is_positive() {
                return Err(OwtfmError::NonPositivePrice(o.clone()));
            }
        }
        for (o, t) in &self.targets {
            if !t.is_positive() {
                return Err(OwtfmError::NonPositiveTarget(o.clone()));
            }
        }
        if !self.eta.is_positive() {
            return Err(OwtfmError::NonPositiveEta);
        }
        Ok(())
    }

    pub fn price_of(&self, o: &ObjectId) -> Option<&Rational> {
        self.prices.get(o)
    }

    pub fn target_of(&self, o: &ObjectId) -> Option<&Rational> {
        self.targets.get(o)
    }

    /// Applies one block's utilization to every priced object; objects with
    /// no recorded demand update with zero utilization.
    pub fn updated(&self, utilization: &BTreeMap<ObjectId, u64>) -> Result<Self, OwtfmError> {
        let mut next = self.clone();
        for (o, p) in &self.prices {
            let target = self
                .targets
                .get(o)
                .ok_or_else(|| OwtfmError::UntargetedObject(o.clone()))?;
            let used = utilization.get(o).copied().unwrap_or(0);
            next.prices.insert(
                o.clone(),
                price_update(p, used, target, &self.eta, self.update_variant)?,
            );
        }
        Ok(next)
    }
}

/// Declared per-object reservation in one block: `sum t * 1{o in R u W}`,
/// independent of realized use.
pub fn utilization(txs: &[Transaction]) -> BTreeMap<ObjectId, u64> {
    let mut per_object: BTreeMap<ObjectId, u64> = BTreeMap::new();
    for tx in txs {
        for o in tx.declared() {
            *per_object.entry(o).or_insert(0) += tx.t;
        }
    }
    per_object
}

/// Realized-use alternative: only objects actually touched count, at the
/// realized compute. Available for experiments; the posted mechanism uses
/// declared reservations.
pub fn utilization_realized(outcomes: &BTreeMap<TxId, ExecOutcome>) -> BTreeMap<ObjectId, u64> {
    let mut per_object: BTreeMap<ObjectId, u64> = BTreeMap::new();
    for outcome in outcomes.values() {
        for o in outcome.used() {
            *per_object.entry(o).or_insert(0) += outcome.compute_used;
        }
    }
    per_object
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct UtilizationRecord {
    pub block: u64,
    pub per_object: BTreeMap<ObjectId, u64>,
}

/// One EIP-1559-style price step for a single object.
pub fn price_update(
    price: &Rational,
    used: u64,
    target: &Rational,
    eta: &Rational,
    variant: UpdateVariant,
) -> Result<Rational, OwtfmError> {
    assert!(price.is_positive() && target.is_positive() && eta.is_positive());
    let deviation = eta * (Rational::from_u64(used) - target) / target;
    match variant {
        UpdateVariant::Exponential => {
            if deviation.is_zero() {
                return Ok(price.clone());
            }
            let factor = exp_rational(&deviation, PRICE_SIG_DIGITS + 4);
            Ok(round_to_sig_digits(&(price * factor), PRICE_SIG_DIGITS))
        }
        UpdateVariant::Linear => {
            let next = price * (Rational::one() + deviation);
            if !next.is_positive() {
                return Err(OwtfmError::LinearUnderflow(next));
            }
            Ok(next)
        }
    }
}

/// Object-weighted fee for one realized outcome: used objects cost
/// `pi * p_o * t`, declared-but-unused objects cost `alpha` of that, which
/// makes the quote coincide with `f_act = alpha f_att + (1-alpha) f_ui`.
pub fn ow_fee(
    tx: &Transaction,
    outcome: &ExecOutcome,
    book: &ObjectPriceBook,
    division: &RiskDivision,
    retention: &RetentionConfig,
) -> Result<FeeQuote, OwtfmError> {
    let per_object = |objects: &mut dyn Iterator<Item = &ObjectId>| -> Result<Rational, OwtfmError> {
        let mut fee = Rational::zero();
        for o in objects {
            let p = book
                .price_of(o)
                .ok_or_else(|| OwtfmError::UnpricedObject(o.clone()))?;
            fee = fee + &tx.pi * p * Rational::from_u64(tx.t);
        }
        Ok(fee)
    };
    let declared = tx.declared();
    let deterministic = tx.deterministic();
    let used = outcome.used();
    let f_att = per_object(&mut declared.iter())?;
    let f_ui = per_object(&mut used.intersection(&declared))?;
    let f_base = per_object(&mut deterministic.iter())?;
    let f_act = division.actual_fee(&f_att, &f_ui);
    let r_act = &retention.gamma * &f_act;
    Ok(FeeQuote {
        f_base,
        f_ui,
        f_att,
        f_act,
        r_act,
    })
}

/// Result of the minimal scheduler-shill alpha: charging unused declarations
/// at least this fraction makes price-pump attacks unprofitable.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AlphaBound {
    pub value: Rational,
    /// False when the bound exceeds one, i.e. no feasible alpha exists.
    pub feasible: bool,
}

/// `alpha >= pi_o * eta * gamma / (1 - gamma)` makes OW-TFM scheduler shill
/// proof; this returns the boundary value.
pub fn shill_alpha_bound(
    eta: &Rational,
    gamma: &Rational,
    pi_o: &Rational,
) -> Result<AlphaBound, OwtfmError> {
    if gamma == &Rational::one() {
        return Err(OwtfmError::FullRetention);
    }
    if !gamma.is_positive() || gamma > &Rational::one() {
        return Err(OwtfmError::BadGamma(gamma.clone()));
    }
    let value = pi_o * eta * gamma / (Rational::one() - gamma);
    let feasible = value <= Rational::one();
    Ok(AlphaBound { value, feasible })
}

/// Two-block price-pump setting: demand on one object in block `b`, the
/// victim's demand in block `b+1` held fixed at the target.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PricePumpScenario {
    pub object: ObjectId,
    /// Posted price `p_{o,b}`.
    pub price: Rational,
    /// Honest utilization of the object in block `b`.
    pub baseline_utilization: u64,
    /// Target utilization `U*_o`.
    pub target: Rational,
    /// Victim compute in block `b+1`; the boundary analysis holds this at
    /// the target.
    pub victim_compute: u64,
    /// Average priority `pi_o` of the victim demand.
    pub victim_priority: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ShillProfitReport {
    pub victim_fee_baseline: Rational,
    pub victim_fee_attacked: Rational,
    pub fee_delta: Rational,
    /// The fake's actual charge, `alpha * f_att(fake)`.
    pub fake_charge: Rational,
    /// What the scheduler burns on its own fake, `(1 - gamma) * fake_charge`.
    pub burn_cost: Rational,
    /// `gamma * fee_delta - burn_cost`.
    pub profit: Rational,
}

/// Profit of inserting a fake with `fake_compute` on the scenario object in
/// block `b`, priced with the linear update so the boundary is exact:
/// zero profit exactly at `alpha = shill_alpha_bound` when the fake bids
/// priority one.
pub fn owtfm_sched_shill_eval(
    scenario: &PricePumpScenario,
    fake_compute: u64,
    fake_priority: &Rational,
    eta: &Rational,
    retention: &RetentionConfig,
    division: &RiskDivision,
) -> Result<ShillProfitReport, OwtfmError> {
    let honest_price = price_update(
        &scenario.price,
        scenario.baseline_utilization,
        &scenario.target,
        eta,
        UpdateVariant::Linear,
    )?;
    let attacked_price = price_update(
        &scenario.price,
        scenario.baseline_utilization + fake_compute,
        &scenario.target,
        eta,
        UpdateVariant::Linear,
    )?;
    let victim_units = &scenario.victim_priority * Rational::from_u64(scenario.victim_compute);
    let victim_fee_baseline = &victim_units * &honest_price;
    let victim_fee_attacked = &victim_units * &attacked_price;
    let fee_delta = &victim_fee_attacked - &victim_fee_baseline;

    let fake_att = fake_priority * &scenario.price * Rational::from_u64(fake_compute);
    let fake_charge = &division.alpha * fake_att;
    let burn_cost = (Rational::one() - &retention.gamma) * &fake_charge;
    let profit = &retention.gamma * &fee_delta - &burn_cost;
    Ok(ShillProfitReport {
        victim_fee_baseline,
        victim_fee_attacked,
        fee_delta,
        fake_charge,
        burn_cost,
        profit,
    })
}

/// Transactions and rules offered to one block of the simulation.
#[derive(Clone, Debug, Default)]
pub struct BlockPlan {
    pub txs: Vec<Transaction>,
    pub rules: BTreeMap<TxId, ContingencyRule>,
}

impl BlockPlan {
    /// Plan with trivial always-full rules for every transaction.
    pub fn plain(txs: Vec<Transaction>) -> Self {
        let rules = txs
            .iter()
            .map(|tx| (tx.id.clone(), ContingencyRule::trivial(tx)))
            .collect();
        BlockPlan { txs, rules }
    }
}

#[derive(Clone, Debug)]
pub struct SimConfig {
    pub machine: MachineConfig,
    pub policy: Policy,
    pub division: RiskDivision,
    pub retention: RetentionConfig,
    /// Experimental switch: account realized use instead of the declared
    /// reservations the posted mechanism charges for.
    pub realized_utilization: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SimBlock {
    pub block: u64,
    /// Prices posted at the start of the block (what its fees used).
    pub prices: BTreeMap<ObjectId, Rational>,
    pub utilization: BTreeMap<ObjectId, u64>,
    pub included: Vec<TxId>,
    pub quotes: BTreeMap<TxId, FeeQuote>,
    pub fees_collected: Rational,
    pub burned: Rational,
}

#[derive(Clone, Debug, Serialize)]
pub struct SimTrajectory {
    pub blocks: Vec<SimBlock>,
    pub final_prices: BTreeMap<ObjectId, Rational>,
}

fn schedule_with(policy: &Policy, txs: &[Transaction], cfg: &MachineConfig, block: u64)
    -> Result<Schedule, ScheduleError>
{
    match policy {
        Policy::Greedy => schedule_greedy(txs, cfg),
        Policy::Opt => schedule_opt(txs, cfg),
        Policy::Random { seeds } => {
            assert!(!seeds.is_empty(), "random policy needs seeds");
            let seed = seeds[(block as usize) % seeds.len()];
            schedule_random(txs, cfg, seed)
        }
    }
}

/// Runs the block loop: schedule, execute, quote, account utilization,
/// update prices. Plans cycle when there are more blocks than plans.
/// Deterministic in all inputs.
pub fn simulate_blocks(
    plans: &[BlockPlan],
    sim: &SimConfig,
    book0: ObjectPriceBook,
    state0: State,
    n_blocks: u64,
) -> Result<SimTrajectory, OwtfmError> {
    let mut book = book0;
    let mut state = state0;
    let mut blocks = Vec::new();
    let empty_plan = BlockPlan::default();
    for block in 0..n_blocks {
        let plan = if plans.is_empty() {
            &empty_plan
        } else {
            &plans[(block as usize) % plans.len()]
        };
        let schedule = schedule_with(&sim.policy, &plan.txs, &sim.machine, block)?;
        let (next_state, outcomes) = apply_schedule(&state, &schedule, &plan.rules)?;
        state = next_state;

        let mut quotes = BTreeMap::new();
        let mut fees_collected = Rational::zero();
        let mut burned = Rational::zero();
        for tx in schedule.txs() {
            let outcome = &outcomes[&tx.id];
            let q = ow_fee(tx, outcome, &book, &sim.division, &sim.retention)?;
            fees_collected = fees_collected + &q.f_act;
            burned = burned + (&q.f_act - &q.r_act);
            quotes.insert(tx.id.clone(), q);
        }
        let used = if sim.realized_utilization {
            utilization_realized(&outcomes)
        } else {
            utilization(schedule.txs())
        };
        let next_book = book.updated(&used)?;
        blocks.push(SimBlock {
            block,
            prices: book.prices.clone(),
            utilization: used,
            included: schedule.txs().iter().map(|tx| tx.id.clone()).collect(),
            quotes,
            fees_collected,
            burned,
        });
        book = next_book;
    }
    Ok(SimTrajectory {
        final_prices: book.prices,
        blocks,
    })
}

/// Pricing granularity of the convergence scenarios.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvergenceMode {
    /// One aggregate resource with target G/2.
    SingleDim,
    /// Both resources priced separately, target G/2 each.
    MultiDim,
}

fn convergence_book(
    objects: &[ObjectId],
    target: Rational,
    eta: &Rational,
) -> Result<ObjectPriceBook, OwtfmError> {
    ObjectPriceBook::new(
        objects
            .iter()
            .map(|o| (o.clone(), Rational::one()))
            .collect(),
        objects.iter().map(|o| (o.clone(), target.clone())).collect(),
        eta.clone(),
        UpdateVariant::Exponential,
    )
}

fn convergence_sim(machine: MachineConfig) -> SimConfig {
    SimConfig {
        machine,
        policy: Policy::Greedy,
        division: RiskDivision::even_steven(),
        retention: RetentionConfig {
            gamma: Rational::new(1, 2),
        },
        realized_utilization: false,
    }
}

/// The two-resource demand pattern whose aggregate exactly meets the
/// single-dimensional target while leaving each individual resource
/// under-utilized: two large single-resource transactions at `G/4 - eps/2`
/// and one small transaction reserving `eps/2` of each resource.
///
/// Requires `G` divisible by four and an even `eps` so every compute stays
/// integral.
pub fn convergence_scenario(
    mode: ConvergenceMode,
    g: u64,
    eta: &Rational,
    eps: u64,
    blocks: u64,
) -> Result<SimTrajectory, OwtfmError> {
    if !g.is_multiple_of(4) || !eps.is_multiple_of(2) || eps == 0 || eps >= g / 2 {
        return Err(OwtfmError::BadConvergenceParams);
    }
    let big = g / 4 - eps / 2;
    let target = Rational::from_u64(g / 2);
    match mode {
        ConvergenceMode::SingleDim => {
            // The aggregate resource sees each transaction's total demand:
            // the mixed transaction consumes eps/2 of each resource, so eps
            // in aggregate.
            let agg = ObjectId::new("agg");
            let txs = vec![
                Transaction::writer("tx1", big, Rational::one(), [agg.clone()]),
                Transaction::writer("tx2", big, Rational::one(), [agg.clone()]),
                Transaction::writer("tx3", eps, Rational::one(), [agg.clone()]),
            ];
            let book = convergence_book(&[agg], target, eta)?;
            simulate_blocks(
                &[BlockPlan::plain(txs)],
                &convergence_sim(MachineConfig::new(1, g)),
                book,
                State::new(),
                blocks,
            )
        }
        ConvergenceMode::MultiDim => {
            let r1 = ObjectId::new("r1");
            let r2 = ObjectId::new("r2");
            let txs = vec![
                Transaction::writer("tx1", big, Rational::one(), [r1.clone()]),
                Transaction::writer("tx2", big, Rational::one(), [r2.clone()]),
                Transaction::writer("tx3", eps / 2, Rational::one(), [r1.clone(), r2.clone()]),
            ];
            let book = convergence_book(&[r1, r2], target, eta)?;
            simulate_blocks(
                &[BlockPlan::plain(txs)],
                &convergence_sim(MachineConfig::new(2, g)),
                book,
                State::new(),
                blocks,
            )
        }
    }
}

/// Stable-demand control: one transaction per resource at exactly the
/// target, so a multidimensional book holds every price constant.
pub fn stable_demand_scenario(
    g: u64,
    eta: &Rational,
    resources: usize,
    blocks: u64,
) -> Result<SimTrajectory, OwtfmError> {
    if !g.is_multiple_of(2) || resources == 0 {
        return Err(OwtfmError::BadConvergenceParams);
    }
    let objects: Vec<ObjectId> = (1..=resources)
        .map(|i| ObjectId::new(format!("r{i}")))
        .collect();
    let txs: Vec<Transaction> = objects
        .iter()
        .enumerate()
        .map(|(i, o)| Transaction::writer(format!("tx{}", i + 1), g / 2, Rational::one(), [o.clone()]))
        .collect();
    let book = convergence_book(&objects, Rational::from_u64(g / 2), eta)?;
    simulate_blocks(
        &[BlockPlan::plain(txs)],
        &convergence_sim(MachineConfig::new(resources, g)),
        book,
        State::new(),
        blocks,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::execution::Guard;

    fn rat(s: &str) -> Rational {
        s.parse().unwrap()
    }

    fn obj(s: &str) -> ObjectId {
        ObjectId::new(s)
    }

    #[test]
    fn utilization_sums_declared_reservations() {
        let txs = vec![
            Transaction::writer("a", 10, rat("1"), ["o1", "o2"]),
        ];
        let u = utilization(&txs);
        assert_eq!(u[&obj("o1")], 10);
        assert_eq!(u[&obj("o2")], 10);

        assert!(utilization(&[]).is_empty());

        let txs = vec![
            Transaction::writer("a", 6, rat("1"), ["o1"]),
            Transaction::writer("b", 6, rat("1"), ["o1"]),
        ];
        assert_eq!(utilization(&txs)[&obj("o1")], 12);
    }

    #[test]
    fn price_update_at_target_is_identity() {
        let p = rat("100");
        for variant in [UpdateVariant::Exponential, UpdateVariant::Linear] {
            let next = price_update(&p, 50, &rat("50"), &rat("1/8"), variant).unwrap();
            assert_eq!(next, p);
        }
    }

    #[test]
    fn price_update_matches_hand_computed_values() {
        let p = rat("100");
        let eta = rat("1/8");
        // Double the target: linear gives exactly 112.5.
        let linear = price_update(&p, 100, &rat("50"), &eta, UpdateVariant::Linear).unwrap();
        assert_eq!(linear, rat("225/2"));
        // Exponential: 100 * e^(1/8), thirty significant digits.
        let expo = price_update(&p, 100, &rat("50"), &eta, UpdateVariant::Exponential).unwrap();
        assert_eq!(
            expo,
            rat("113314845306682631682900722781/1000000000000000000000000000")
        );
        // Empty block: linear 87.5, exponential 100 * e^(-1/8).
        let linear = price_update(&p, 0, &rat("50"), &eta, UpdateVariant::Linear).unwrap();
        assert_eq!(linear, rat("175/2"));
        let expo = price_update(&p, 0, &rat("50"), &eta, UpdateVariant::Exponential).unwrap();
        assert_eq!(
            expo,
            rat("882496902584595402864892143229/10000000000000000000000000000")
        );
    }

    #[test]
    fn linear_update_underflow_is_an_error() {
        // eta * (U - U*) / U* = 2 * (0 - 50) / 50 = -2 drives the price negative.
        let err = price_update(&rat("100"), 0, &rat("50"), &rat("2"), UpdateVariant::Linear)
            .unwrap_err();
        assert!(matches!(err, OwtfmError::LinearUnderflow(_)));
    }

    #[test]
    fn exponential_update_composes_multiplicatively() {
        // Updating with U1 then U2 equals one update with summed deviations,
        // to the configured precision.
        let p = rat("100");
        let eta = rat("1/8");
        let target = rat("50");
        let twice = {
            let step = price_update(&p, 75, &target, &eta, UpdateVariant::Exponential).unwrap();
            price_update(&step, 30, &target, &eta, UpdateVariant::Exponential).unwrap()
        };
        let dev = &eta * (rat("75") - &target) / &target + &eta * (rat("30") - &target) / &target;
        let direct = round_to_sig_digits(&(&p * exp_rational(&dev, 34)), PRICE_SIG_DIGITS);
        let diff = (&twice - &direct).abs() / &direct;
        assert!(diff < rat("1/10000000000000000000000000"), "diff {diff}");
    }

    fn full_outcome(tx: &Transaction) -> ExecOutcome {
        let rule = ContingencyRule::trivial(tx);
        crate::execution::exec(&State::new(), tx, &rule).unwrap()
    }

    fn under_outcome(tx: &Transaction, guard_obj: &str) -> ExecOutcome {
        let rule = ContingencyRule {
            tx_id: tx.id.clone(),
            guard: Guard::Compare {
                object: obj(guard_obj),
                cmp: crate::execution::Comparator::Gt,
                value: 0,
            },
            on_full: tx.writes.iter().map(|o| (o.clone(), 1)).collect(),
            on_under: tx
                .writes
                .difference(&tx.contingent_writes)
                .map(|o| (o.clone(), 1))
                .collect(),
        };
        let out = crate::execution::exec(&State::new(), tx, &rule).unwrap();
        assert!(!out.fully_executed);
        out
    }

    #[test]
    fn ow_fee_prices_used_and_unused_objects() {
        let retention = RetentionConfig { gamma: rat("1/2") };
        let book = ObjectPriceBook::new(
            BTreeMap::from([(obj("o"), rat("3")), (obj("s"), rat("1"))]),
            BTreeMap::new(),
            rat("1/8"),
            UpdateVariant::Linear,
        )
        .unwrap();

        // Used object contributes pi * p * t = 2 * 3 * 10 = 60.
        let tx = Transaction::writer("u", 10, rat("1"), ["o"]).with_priority(rat("2"));
        let q = ow_fee(&tx, &full_outcome(&tx), &book, &RiskDivision::even_steven(), &retention)
            .unwrap();
        assert_eq!(q.f_att, rat("60"));
        assert_eq!(q.f_ui, rat("60"));
        assert_eq!(q.f_act, rat("60"));

        // Declared-unused at even-steven contributes half of that.
        let tx = Transaction::writer("c", 10, rat("1"), ["o"])
            .with_reads(["s"])
            .with_priority(rat("2"))
            .with_contingency(Vec::<&str>::new(), ["o"], 5);
        let out = under_outcome(&tx, "s");
        let q = ow_fee(&tx, &out, &book, &RiskDivision::even_steven(), &retention).unwrap();
        assert_eq!(&q.f_att - &q.f_ui, rat("60"));
        assert_eq!(&q.f_act - &q.f_ui, rat("30"));

        // User-friendly division charges nothing for the skipped object.
        let q = ow_fee(&tx, &out, &book, &RiskDivision::user_friendly(), &retention).unwrap();
        assert_eq!(&q.f_act - &q.f_ui, rat("0"));
        assert_eq!(q.r_act, &q.f_act * rat("1/2"));
    }

    #[test]
    fn ow_fee_orders_fee_levels() {
        let retention = RetentionConfig { gamma: rat("9/10") };
        let book = ObjectPriceBook::new(
            BTreeMap::from([(obj("a"), rat("2")), (obj("b"), rat("3")), (obj("s"), rat("1"))]),
            BTreeMap::new(),
            rat("1/8"),
            UpdateVariant::Linear,
        )
        .unwrap();
        let tx = Transaction::writer("x", 2, rat("1"), ["a", "b"])
            .with_reads(["s"])
            .with_contingency(Vec::<&str>::new(), ["b"], 1);
        for out in [full_outcome(&tx), under_outcome(&tx, "s")] {
            let q = ow_fee(&tx, &out, &book, &RiskDivision::even_steven(), &retention).unwrap();
            assert!(q.f_base <= q.f_ui && q.f_ui <= q.f_att);
            assert!(q.f_base <= q.f_act && q.f_act <= q.f_att);
        }
    }

    #[test]
    fn unpriced_object_is_an_error() {
        let retention = RetentionConfig { gamma: rat("1/2") };
        let book = ObjectPriceBook::new(
            BTreeMap::new(),
            BTreeMap::new(),
            rat("1/8"),
            UpdateVariant::Linear,
        )
        .unwrap();
        let tx = Transaction::writer("u", 1, rat("1"), ["o"]);
        let err = ow_fee(&tx, &full_outcome(&tx), &book, &RiskDivision::even_steven(), &retention)
            .unwrap_err();
        assert_eq!(err, OwtfmError::UnpricedObject(obj("o")));
    }

    #[test]
    fn alpha_bound_examples() {
        let b = shill_alpha_bound(&rat("1/8"), &rat("1/10"), &rat("5")).unwrap();
        assert_eq!(b.value, rat("5/72"));
        assert!(b.feasible);

        let b = shill_alpha_bound(&rat("1/8"), &rat("1/2"), &rat("5")).unwrap();
        assert_eq!(b.value, rat("5/8"));

        let tiny = shill_alpha_bound(&rat("1/8"), &rat("1/1000"), &rat("5")).unwrap();
        assert!(tiny.value < rat("1/100"));

        let infeasible = shill_alpha_bound(&rat("2"), &rat("9/10"), &rat("5")).unwrap();
        assert!(!infeasible.feasible);

        assert_eq!(
            shill_alpha_bound(&rat("1/8"), &rat("1"), &rat("5")).unwrap_err(),
            OwtfmError::FullRetention
        );
    }

    fn pump_scenario() -> PricePumpScenario {
        PricePumpScenario {
            object: obj("o"),
            price: rat("100"),
            baseline_utilization: 100,
            target: rat("100"),
            victim_compute: 100,
            victim_priority: rat("5"),
        }
    }

    #[test]
    fn shill_profit_is_zero_exactly_at_the_bound() {
        let sc = pump_scenario();
        let eta = rat("1/8");
        let retention = RetentionConfig { gamma: rat("1/10") };
        let bound = shill_alpha_bound(&eta, &retention.gamma, &sc.victim_priority)
            .unwrap()
            .value;

        let at = RiskDivision::new(bound.clone()).unwrap();
        let report =
            owtfm_sched_shill_eval(&sc, 10, &rat("1"), &eta, &retention, &at).unwrap();
        assert!(report.profit.is_zero());

        let below = RiskDivision::new(&bound * rat("1/2")).unwrap();
        let report =
            owtfm_sched_shill_eval(&sc, 10, &rat("1"), &eta, &retention, &below).unwrap();
        assert!(report.profit.is_positive());

        let zero = owtfm_sched_shill_eval(&sc, 0, &rat("1"), &eta, &retention, &at).unwrap();
        assert!(zero.profit.is_zero());
    }

    #[test]
    fn sim_holds_prices_at_the_fixed_point() {
        // Demand exactly at target keeps every price constant.
        let traj = stable_demand_scenario(400, &rat("1/8"), 2, 10).unwrap();
        for block in &traj.blocks {
            for price in block.prices.values() {
                assert_eq!(price, &Rational::one());
            }
        }
        assert_eq!(traj.final_prices[&obj("r1")], Rational::one());
    }

    #[test]
    fn sim_grows_overloaded_object_by_exp_eta() {
        // One object at double target grows by e^eta per block; the other
        // stays flat at its target.
        let eta = rat("1/8");
        let hot = Transaction::writer("hot", 100, rat("1"), ["h"]);
        let cold = Transaction::writer("cold", 50, rat("1"), ["c"]);
        let book = ObjectPriceBook::new(
            BTreeMap::from([(obj("h"), rat("1")), (obj("c"), rat("1"))]),
            BTreeMap::from([(obj("h"), rat("50")), (obj("c"), rat("50"))]),
            eta.clone(),
            UpdateVariant::Exponential,
        )
        .unwrap();
        let sim = convergence_sim(MachineConfig::new(2, 1000));
        let traj = simulate_blocks(
            &[BlockPlan::plain(vec![hot, cold])],
            &sim,
            book,
            State::new(),
            3,
        )
        .unwrap();
        let growth = exp_rational(&eta, PRICE_SIG_DIGITS + 4);
        let mut expected = Rational::one();
        for block in &traj.blocks {
            assert_eq!(block.prices[&obj("h")], expected);
            assert_eq!(block.prices[&obj("c")], Rational::one());
            expected = round_to_sig_digits(&(&expected * &growth), PRICE_SIG_DIGITS);
        }
    }

    #[test]
    fn realized_utilization_flag_skips_unused_reservations() {
        // A transaction that always under-executes reserves its contingent
        // object but never touches it: declared accounting still counts it,
        // realized accounting counts t_base on the surviving objects only.
        let eta = rat("1/8");
        let tx = Transaction::writer("c", 8, rat("1"), ["kept", "skipped"])
            .with_reads(["gate"])
            .with_contingency(Vec::<&str>::new(), ["skipped"], 2);
        let rule = ContingencyRule {
            tx_id: tx.id.clone(),
            guard: Guard::Compare {
                object: obj("gate"),
                cmp: crate::execution::Comparator::Gt,
                value: 0,
            },
            on_full: BTreeMap::from([(obj("kept"), 1), (obj("skipped"), 1)]),
            on_under: BTreeMap::from([(obj("kept"), 1)]),
        };
        let plan = BlockPlan {
            rules: BTreeMap::from([(tx.id.clone(), rule)]),
            txs: vec![tx],
        };
        let book = ObjectPriceBook::new(
            BTreeMap::from([
                (obj("gate"), rat("1")),
                (obj("kept"), rat("1")),
                (obj("skipped"), rat("1")),
            ]),
            BTreeMap::from([
                (obj("gate"), rat("4")),
                (obj("kept"), rat("4")),
                (obj("skipped"), rat("4")),
            ]),
            eta,
            UpdateVariant::Exponential,
        )
        .unwrap();
        let mut sim = convergence_sim(MachineConfig::new(1, 100));

        let declared = simulate_blocks(&[plan.clone()], &sim, book.clone(), State::new(), 1)
            .unwrap();
        assert_eq!(declared.blocks[0].utilization[&obj("skipped")], 8);
        assert_eq!(declared.blocks[0].utilization[&obj("gate")], 8);

        sim.realized_utilization = true;
        let realized = simulate_blocks(&[plan], &sim, book, State::new(), 1).unwrap();
        assert_eq!(realized.blocks[0].utilization.get(&obj("skipped")), None);
        assert_eq!(realized.blocks[0].utilization[&obj("kept")], 2);
        assert_eq!(realized.blocks[0].utilization[&obj("gate")], 2);
    }

    #[test]
    fn sim_burn_accounting_matches_retention() {
        let traj = stable_demand_scenario(400, &rat("1/8"), 2, 4).unwrap();
        for block in &traj.blocks {
            // gamma = 1/2 in the convergence sims: half of every fee burns.
            assert_eq!(block.burned, &block.fees_collected * rat("1/2"));
        }
    }

    #[test]
    fn empty_scenario_yields_empty_trajectory() {
        let sim = convergence_sim(MachineConfig::new(1, 10));
        let book = ObjectPriceBook::new(
            BTreeMap::new(),
            BTreeMap::new(),
            rat("1/8"),
            UpdateVariant::Exponential,
        )
        .unwrap();
        let traj = simulate_blocks(&[], &sim, book, State::new(), 3).unwrap();
        assert_eq!(traj.blocks.len(), 3);
        assert!(traj.blocks.iter().all(|b| b.included.is_empty()));
    }

    #[test]
    fn convergence_single_dim_is_blind_to_the_imbalance() {
        let traj = convergence_scenario(ConvergenceMode::SingleDim, 400, &rat("1/8"), 2, 20)
            .unwrap();
        for block in &traj.blocks {
            assert_eq!(block.utilization[&obj("agg")], 200);
            assert_eq!(block.prices[&obj("agg")], Rational::one());
        }
        assert_eq!(traj.final_prices[&obj("agg")], Rational::one());
    }

    #[test]
    fn convergence_multi_dim_sees_underutilization() {
        let traj = convergence_scenario(ConvergenceMode::MultiDim, 400, &rat("1/8"), 2, 20)
            .unwrap();
        let mut last: Option<(Rational, Rational)> = None;
        for block in &traj.blocks {
            assert_eq!(block.utilization[&obj("r1")], 100);
            assert_eq!(block.utilization[&obj("r2")], 100);
            let now = (block.prices[&obj("r1")].clone(), block.prices[&obj("r2")].clone());
            if let Some(prev) = last {
                assert!(now.0 < prev.0, "r1 price must strictly decrease");
                assert!(now.1 < prev.1, "r2 price must strictly decrease");
            }
            last = Some(now);
        }
    }

    #[test]
    fn convergence_parameter_validation() {
        let err = convergence_scenario(ConvergenceMode::SingleDim, 401, &rat("1/8"), 2, 5)
            .unwrap_err();
        assert_eq!(err, OwtfmError::BadConvergenceParams);
        let err = convergence_scenario(ConvergenceMode::SingleDim, 400, &rat("1/8"), 3, 5)
            .unwrap_err();
        assert_eq!(err, OwtfmError::BadConvergenceParams);
    }
}

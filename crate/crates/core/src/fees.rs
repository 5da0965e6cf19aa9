//! Fee taxonomy and risk accounting: the four fee levels, the alpha risk
//! division spectrum, scheduler priors, fee-based shill-proofness checks, and
//! the user-friendly independence checker.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::execution::ExecOutcome;
use crate::model::{MachineConfig, ModelError, ObjectId, RetentionConfig, Transaction, TxId};
use crate::owtfm::ObjectPriceBook;
use crate::rational::Rational;
use crate::scheduling::{makespan_exact, ScheduleError};

/// The four fee levels for one transaction plus the scheduler's receipt.
///
/// `f_base` prices the guaranteed objects, `f_ui` the realized ones, `f_att`
/// the full declaration; `f_act` is what the user is charged and
/// `r_act = gamma * f_act` is what the scheduler keeps.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FeeQuote {
    pub f_base: Rational,
    pub f_ui: Rational,
    pub f_att: Rational,
    pub f_act: Rational,
    pub r_act: Rational,
}

/// User risk: the overpayment for declared-but-unused objects.
pub fn user_risk(q: &FeeQuote) -> Rational {
    &q.f_act - &q.f_ui
}

/// Scheduler risk: the shortfall against the fully-declared fee.
pub fn scheduler_risk(q: &FeeQuote) -> Rational {
    &q.f_att - &q.f_act
}

/// Point on the risk spectrum: `f_act = alpha * f_att + (1 - alpha) * f_ui`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RiskDivision {
    pub alpha: Rational,
}

impl RiskDivision {
    pub fn new(alpha: Rational) -> Result<Self, FeeError> {
        if alpha.is_negative() || alpha > Rational::one() {
            return Err(FeeError::BadAlpha(alpha));
        }
        Ok(RiskDivision { alpha })
    }

    /// alpha = 0: users pay exactly what they use.
    pub fn user_friendly() -> Self {
        RiskDivision {
            alpha: Rational::zero(),
        }
    }

    /// alpha = 1/2: unrealized cost is split evenly.
    pub fn even_steven() -> Self {
        RiskDivision {
            alpha: Rational::new(1, 2),
        }
    }

    /// alpha = 1: the scheduler always collects the attainable fee.
    pub fn scheduler_friendly() -> Self {
        RiskDivision {
            alpha: Rational::one(),
        }
    }

    pub fn actual_fee(&self, f_att: &Rational, f_ui: &Rational) -> Rational {
        &self.alpha * f_att + (Rational::one() - &self.alpha) * f_ui
    }
}

/// Scheduler beliefs about contingent execution when forming revenue
/// expectations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchedulerPrior {
    /// Every transaction fully executes.
    Optimistic,
    /// Every contingent transaction under-executes.
    Pessimistic,
    /// Half the contingent transactions under-execute.
    Median,
}

impl fmt::Display for SchedulerPrior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchedulerPrior::Optimistic => f.write_str("optimistic"),
            SchedulerPrior::Pessimistic => f.write_str("pessimistic"),
            SchedulerPrior::Median => f.write_str("median"),
        }
    }
}

/// Expected fee for a scheduler with the given prior under a risk division;
/// requires `f_base <= f_att`.
///
/// Optimistic expects `f_att` for every division. Pessimistic expects the
/// division applied to the baseline, `alpha * f_att + (1 - alpha) * f_base`.
/// Median sits halfway between those two rows,
/// `((1 + alpha) * f_att + (1 - alpha) * f_base) / 2`.
pub fn prior_expected_fee(
    prior: SchedulerPrior,
    division: &RiskDivision,
    f_att: &Rational,
    f_base: &Rational,
) -> Rational {
    debug_assert!(f_base <= f_att, "baseline fee above attainable fee");
    let one = Rational::one();
    match prior {
        SchedulerPrior::Optimistic => f_att.clone(),
        SchedulerPrior::Pessimistic => &division.alpha * f_att + (&one - &division.alpha) * f_base,
        SchedulerPrior::Median => {
            ((&one + &division.alpha) * f_att + (&one - &division.alpha) * f_base)
                / Rational::from_int(2)
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FeeError {
    #[error("alpha must lie in [0, 1], got {0}")]
    BadAlpha(Rational),
    #[error("transaction {0} is not part of the pricing context")]
    NotInContext(TxId),
    #[error("outcome belongs to {got}, expected {want}")]
    OutcomeMismatch { want: TxId, got: TxId },
    #[error("pricing rule non-monotone for {tx}: {lo_name} {lo} > {hi_name} {hi}")]
    NonMonotonicPricing {
        tx: TxId,
        lo_name: &'static str,
        lo: Rational,
        hi_name: &'static str,
        hi: Rational,
    },
    #[error("object {0} has no posted price")]
    UnpricedObject(ObjectId),
    #[error("fake transaction {0} collides with a scheduled transaction id")]
    FakeIdCollision(TxId),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Schedule context a pricing rule may consult: the scheduled set and the
/// machine it runs on.
#[derive(Clone, Copy, Debug)]
pub struct FeeContext<'a> {
    pub txs: &'a [Transaction],
    pub cfg: &'a MachineConfig,
}

/// A rule mapping (context, transaction, object footprint, priority) to a
/// fee. Rules must be monotone in the object footprint so the fee levels
/// order as `f_base <= f_ui <= f_att`.
#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PricingRule {
    /// `pi * g * t`: independent of both schedule and object footprint.
    ComputeProportional,
    /// `pi * g * (t / sum t) * v(T)` with the transaction's footprint
    /// substituted into the context before taking the exact makespan.
    TpmDerived,
    /// Posted per-object prices: `pi * p_o * t` summed over the footprint.
    ObjectWeighted { book: ObjectPriceBook },
}

impl PricingRule {
    pub fn name(&self) -> &'static str {
        match self {
            PricingRule::ComputeProportional => "compute_proportional",
            PricingRule::TpmDerived => "tpm_derived",
            PricingRule::ObjectWeighted { .. } => "object_weighted",
        }
    }

    /// Prices `tx` as if its footprint were exactly (`reads`, `writes`).
    pub fn price(
        &self,
        ctx: &FeeContext<'_>,
        tx: &Transaction,
        reads: &BTreeSet<ObjectId>,
        writes: &BTreeSet<ObjectId>,
    ) -> Result<Rational, FeeError> {
        match self {
            PricingRule::ComputeProportional => {
                Ok(&tx.pi * &tx.g * Rational::from_u64(tx.t))
            }
            PricingRule::TpmDerived => {
                let idx = ctx
                    .txs
                    .iter()
                    .position(|c| c.id == tx.id)
                    .ok_or_else(|| FeeError::NotInContext(tx.id.clone()))?;
                let mut modified: Vec<Transaction> = ctx.txs.to_vec();
                modified[idx].reads = reads.clone();
                modified[idx].writes = writes.clone();
                let v = makespan_exact(&modified, ctx.cfg.n_cores)?;
                let total: u64 = ctx.txs.iter().map(|c| c.t).sum();
                Ok(&tx.pi * &tx.g * Rational::from_u64(tx.t) * Rational::from_u64(v)
                    / Rational::from_u64(total))
            }
            PricingRule::ObjectWeighted { book } => {
                let mut fee = Rational::zero();
                for o in reads.union(writes) {
                    let p = book
                        .price_of(o)
                        .ok_or_else(|| FeeError::UnpricedObject(o.clone()))?;
                    fee = fee + &tx.pi * p * Rational::from_u64(tx.t);
                }
                Ok(fee)
            }
        }
    }

    /// Attainable fee: the rule applied to the full declared footprint.
    pub fn attainable(&self, ctx: &FeeContext<'_>, tx: &Transaction) -> Result<Rational, FeeError> {
        self.price(ctx, tx, &tx.reads, &tx.writes)
    }
}

/// Quotes all four fee levels for one realized outcome.
pub fn quote(
    rule: &PricingRule,
    ctx: &FeeContext<'_>,
    tx: &Transaction,
    outcome: &ExecOutcome,
    division: &RiskDivision,
    retention: &RetentionConfig,
) -> Result<FeeQuote, FeeError> {
    if outcome.tx_id != tx.id {
        return Err(FeeError::OutcomeMismatch {
            want: tx.id.clone(),
            got: outcome.tx_id.clone(),
        });
    }
    let base_reads: BTreeSet<ObjectId> =
        tx.reads.difference(&tx.contingent_reads).cloned().collect();
    let base_writes: BTreeSet<ObjectId> = tx
        .writes
        .difference(&tx.contingent_writes)
        .cloned()
        .collect();
    let f_base = rule.price(ctx, tx, &base_reads, &base_writes)?;
    let f_ui = rule.price(ctx, tx, &outcome.used_reads, &outcome.used_writes)?;
    let f_att = rule.price(ctx, tx, &tx.reads, &tx.writes)?;
    if f_base > f_ui {
        return Err(FeeError::NonMonotonicPricing {
            tx: tx.id.clone(),
            lo_name: "f_base",
            lo: f_base,
            hi_name: "f_ui",
            hi: f_ui,
        });
    }
    if f_ui > f_att {
        return Err(FeeError::NonMonotonicPricing {
            tx: tx.id.clone(),
            lo_name: "f_ui",
            lo: f_ui,
            hi_name: "f_att",
            hi: f_att,
        });
    }
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

/// Outcome of one fee-level shill condition.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ShillCondition {
    pub pass: bool,
    pub lhs: Rational,
    pub rhs: Rational,
    /// `rhs - lhs`; negative iff the condition fails.
    pub margin: Rational,
}

fn check_disjoint(txs: &[Transaction], fakes: &[Transaction]) -> Result<(), FeeError> {
    for fake in fakes {
        if txs.iter().any(|tx| tx.id == fake.id) {
            return Err(FeeError::FakeIdCollision(fake.id.clone()));
        }
    }
    Ok(())
}

/// Fee-based user shill proofness on one instance: the victim (assumed fully
/// executing) must satisfy
/// `f_att(S, victim) <= f_att(S', victim) + alpha * f_att(S', T')`,
/// where the fakes are assumed to maximally under-execute and the division
/// charges them `alpha` of their attainable fee.
pub fn fee_user_shill_check(
    rule: &PricingRule,
    txs: &[Transaction],
    victim: &TxId,
    fakes: &[Transaction],
    cfg: &MachineConfig,
    division: &RiskDivision,
) -> Result<ShillCondition, FeeError> {
    check_disjoint(txs, fakes)?;
    let victim_tx = txs
        .iter()
        .find(|tx| &tx.id == victim)
        .ok_or_else(|| FeeError::NotInContext(victim.clone()))?;
    let ctx = FeeContext { txs, cfg };
    let lhs = rule.attainable(&ctx, victim_tx)?;

    let attacked: Vec<Transaction> = txs.iter().chain(fakes).cloned().collect();
    let ctx_attacked = FeeContext {
        txs: &attacked,
        cfg,
    };
    let victim_after = rule.attainable(&ctx_attacked, victim_tx)?;
    let fakes_att: Rational = fakes
        .iter()
        .map(|f| rule.attainable(&ctx_attacked, f))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .sum();
    let rhs = victim_after + &division.alpha * fakes_att;
    let margin = &rhs - &lhs;
    Ok(ShillCondition {
        pass: !margin.is_negative(),
        lhs,
        rhs,
        margin,
    })
}

/// Fee-based scheduler shill proofness on one instance:
/// `gamma * (f_att(S', victim) - f_att(S, victim))
///     <= (1 - gamma) * alpha * f_att(S', T')`.
/// The left side is the scheduler's retained gain on the honest victim, the
/// right side the burn cost of its own under-executing fakes. With
/// `gamma = 1` nothing is burned, so any strictly positive gain fails.
pub fn fee_sched_shill_check(
    rule: &PricingRule,
    txs: &[Transaction],
    victim: &TxId,
    fakes: &[Transaction],
    cfg: &MachineConfig,
    division: &RiskDivision,
    retention: &RetentionConfig,
) -> Result<ShillCondition, FeeError> {
    check_disjoint(txs, fakes)?;
    let victim_tx = txs
        .iter()
        .find(|tx| &tx.id == victim)
        .ok_or_else(|| FeeError::NotInContext(victim.clone()))?;
    let ctx = FeeContext { txs, cfg };
    let fee_before = rule.attainable(&ctx, victim_tx)?;

    let attacked: Vec<Transaction> = txs.iter().chain(fakes).cloned().collect();
    let ctx_attacked = FeeContext {
        txs: &attacked,
        cfg,
    };
    let fee_after = rule.attainable(&ctx_attacked, victim_tx)?;
    let fakes_att: Rational = fakes
        .iter()
        .map(|f| rule.attainable(&ctx_attacked, f))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .sum();

    let lhs = &retention.gamma * (fee_after - fee_before);
    let rhs = (Rational::one() - &retention.gamma) * &division.alpha * fakes_att;
    let margin = &rhs - &lhs;
    Ok(ShillCondition {
        pass: lhs <= rhs,
        lhs,
        rhs,
        margin,
    })
}

/// One instance of the independence family: a base set and the fake set an
/// adversary may append.
#[derive(Clone, Debug)]
pub struct IndependenceInstance {
    pub name: String,
    pub base: Vec<Transaction>,
    pub fakes: Vec<Transaction>,
    pub cfg: MachineConfig,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IndependenceCounterexample {
    pub instance: String,
    pub tx: TxId,
    pub fee_before: Rational,
    pub fee_after: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum IndependenceVerdict {
    /// Attainable fees never moved on any instance of the family.
    Independent,
    Counterexample(IndependenceCounterexample),
}

/// Checks whether a rule's attainable fee is independent of the other
/// transactions in the schedule, on every instance of the family. Under the
/// user-friendly division this is equivalent to passing both fee-based shill
/// conditions.
pub fn independence_check(
    rule: &PricingRule,
    family: &[IndependenceInstance],
) -> Result<IndependenceVerdict, FeeError> {
    for instance in family {
        check_disjoint(&instance.base, &instance.fakes)?;
        let ctx = FeeContext {
            txs: &instance.base,
            cfg: &instance.cfg,
        };
        let attacked: Vec<Transaction> = instance
            .base
            .iter()
            .chain(&instance.fakes)
            .cloned()
            .collect();
        let ctx_attacked = FeeContext {
            txs: &attacked,
            cfg: &instance.cfg,
        };
        for tx in &instance.base {
            let before = rule.attainable(&ctx, tx)?;
            let after = rule.attainable(&ctx_attacked, tx)?;
            if before != after {
                return Ok(IndependenceVerdict::Counterexample(
                    IndependenceCounterexample {
                        instance: instance.name.clone(),
                        tx: tx.id.clone(),
                        fee_before: before,
                        fee_after: after,
                    },
                ));
            }
        }
    }
    Ok(IndependenceVerdict::Independent)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::execution::{exec, Comparator, ContingencyRule, Guard, State};
    use crate::owtfm::UpdateVariant;
    use std::collections::BTreeMap;

    fn rat(s: &str) -> Rational {
        s.parse().unwrap()
    }

    fn obj(s: &str) -> ObjectId {
        ObjectId::new(s)
    }

    fn gamma(s: &str) -> RetentionConfig {
        RetentionConfig::new(rat(s)).unwrap()
    }

    /// tx writing {a (price 2), b (price 3)} at t = 2 with b contingent on
    /// s > 0. The always-read guard object s carries a dust price that
    /// cancels out of every fee difference.
    fn quoted_instance() -> (Transaction, ContingencyRule, PricingRule) {
        let tx = Transaction::writer("tx", 2, rat("1"), ["a", "b"])
            .with_reads(["s"])
            .with_contingency(Vec::<&str>::new(), ["b"], 1);
        let rule = ContingencyRule {
            tx_id: tx.id.clone(),
            guard: Guard::Compare {
                object: obj("s"),
                cmp: Comparator::Gt,
                value: 0,
            },
            on_full: BTreeMap::from([(obj("a"), 1), (obj("b"), 1)]),
            on_under: BTreeMap::from([(obj("a"), 1)]),
        };
        let book = ObjectPriceBook::new(
            BTreeMap::from([
                (obj("a"), rat("2")),
                (obj("b"), rat("3")),
                (obj("s"), rat("1/1000000")),
            ]),
            BTreeMap::new(),
            rat("1/8"),
            UpdateVariant::Linear,
        )
        .unwrap();
        (tx, rule, PricingRule::ObjectWeighted { book })
    }

    fn machine() -> MachineConfig {
        MachineConfig::new(2, 1000)
    }

    #[test]
    fn fully_executed_tx_quotes_att_for_every_alpha() {
        let (tx, rule, pricing) = quoted_instance();
        let state = State::from_values(BTreeMap::from([(obj("s"), 5)]));
        let outcome = exec(&state, &tx, &rule).unwrap();
        assert!(outcome.fully_executed);
        let cfg = machine();
        let txs = vec![tx.clone()];
        let ctx = FeeContext {
            txs: &txs,
            cfg: &cfg,
        };
        for alpha in ["0", "1/4", "1/2", "3/4", "1"] {
            let division = RiskDivision::new(rat(alpha)).unwrap();
            let q = quote(&pricing, &ctx, &tx, &outcome, &division, &gamma("1/2")).unwrap();
            assert_eq!(q.f_ui, q.f_att);
            assert_eq!(q.f_act, q.f_att);
        }
    }

    /// Under-executed quote with pi*t = 2: f_att = 2*(2+3) + s-dust,
    /// f_ui = f_base = 2*2 + s-dust. Dust cancels in all risk identities.
    fn under_quote(alpha: &str, g: &str) -> FeeQuote {
        let (tx, rule, pricing) = quoted_instance();
        let outcome = exec(&State::new(), &tx, &rule).unwrap();
        assert!(!outcome.fully_executed);
        let cfg = machine();
        let txs = vec![tx.clone()];
        let ctx = FeeContext {
            txs: &txs,
            cfg: &cfg,
        };
        let division = RiskDivision::new(rat(alpha)).unwrap();
        quote(&pricing, &ctx, &tx, &outcome, &division, &gamma(g)).unwrap()
    }

    #[test]
    fn even_steven_splits_the_unrealized_fee() {
        // f_att - f_ui = 6 here; even-steven charges half of it on top.
        let q = under_quote("1/2", "1/2");
        assert_eq!(&q.f_att - &q.f_ui, rat("6"));
        assert_eq!(&q.f_act - &q.f_ui, rat("3"));
        assert_eq!(user_risk(&q), rat("3"));
        assert_eq!(scheduler_risk(&q), rat("3"));
        assert_eq!(q.r_act, &q.f_act * rat("1/2"));
    }

    #[test]
    fn user_friendly_charges_realized_only() {
        let q = under_quote("0", "1/2");
        assert_eq!(q.f_act, q.f_ui);
        assert_eq!(user_risk(&q), Rational::zero());
    }

    #[test]
    fn scheduler_friendly_eliminates_scheduler_risk() {
        let q = under_quote("1", "1/2");
        assert_eq!(q.f_act, q.f_att);
        assert_eq!(scheduler_risk(&q), Rational::zero());
    }

    #[test]
    fn risk_sum_is_the_fee_gap_for_every_alpha() {
        for alpha in ["0", "1/4", "1/2", "3/4", "1"] {
            let q = under_quote(alpha, "9/10");
            assert_eq!(user_risk(&q) + scheduler_risk(&q), &q.f_att - &q.f_ui);
            assert!(!user_risk(&q).is_negative());
            assert!(!scheduler_risk(&q).is_negative());
        }
    }

    #[test]
    fn no_alpha_zeroes_both_risks_on_a_contingent_quote() {
        for alpha in ["0", "1/4", "1/2", "3/4", "1"] {
            let q = under_quote(alpha, "1/2");
            assert!(q.f_att > q.f_ui, "instance must be genuinely contingent");
            let both_zero = user_risk(&q).is_zero() && scheduler_risk(&q).is_zero();
            assert!(!both_zero);
        }
    }

    #[test]
    fn prior_table_reproduces_all_nine_cells() {
        let f_att = rat("10");
        let f_base = rat("4");
        let uf = RiskDivision::user_friendly();
        let sf = RiskDivision::scheduler_friendly();
        let es = RiskDivision::even_steven();
        use SchedulerPrior::*;
        let cell = |prior, div: &RiskDivision| prior_expected_fee(prior, div, &f_att, &f_base);
        assert_eq!(cell(Optimistic, &uf), rat("10"));
        assert_eq!(cell(Pessimistic, &uf), rat("4"));
        assert_eq!(cell(Median, &uf), rat("7"));
        assert_eq!(cell(Optimistic, &sf), rat("10"));
        assert_eq!(cell(Pessimistic, &sf), rat("10"));
        assert_eq!(cell(Median, &sf), rat("10"));
        assert_eq!(cell(Optimistic, &es), rat("10"));
        assert_eq!(cell(Pessimistic, &es), rat("7"));
        assert_eq!(cell(Median, &es), rat("17/2"));
    }

    fn shapley_example() -> Vec<Transaction> {
        vec![
            Transaction::writer("tx1", 1, rat("1"), ["o1"]),
            Transaction::writer("tx2", 1, rat("1"), ["o1"]),
            Transaction::writer("tx3", 2, rat("1"), ["o2"]),
            Transaction::writer("tx4", 3, rat("1"), ["o1"]),
        ]
    }

    fn tpm_example() -> Vec<Transaction> {
        vec![
            Transaction::writer("tx1", 6, rat("1"), ["o1"]),
            Transaction::writer("tx2", 6, rat("1"), ["o2"]),
        ]
    }

    fn tpm_fake() -> Vec<Transaction> {
        vec![Transaction::writer("tx3", 6, rat("1"), ["o1", "o2"])]
    }

    #[test]
    fn compute_proportional_rule_passes_user_shill_with_alpha_margin() {
        let txs = shapley_example();
        let fakes = vec![Transaction::writer("tx5", 1, rat("1"), ["o2"])];
        let cfg = machine();
        let division = RiskDivision::even_steven();
        let check = fee_user_shill_check(
            &PricingRule::ComputeProportional,
            &txs,
            &TxId::new("tx4"),
            &fakes,
            &cfg,
            &division,
        )
        .unwrap();
        assert!(check.pass);
        // margin = alpha * f_att(fakes) = 1/2 * 1.
        assert_eq!(check.margin, rat("1/2"));
    }

    #[test]
    fn tpm_derived_rule_fails_user_shill_under_user_friendly_division() {
        // The fake parallel transaction dilutes the victim's makespan share
        // (15/7 -> 15/8) and rides free at alpha = 0.
        let txs = shapley_example();
        let fakes = vec![Transaction::writer("tx5", 1, rat("1"), ["o2"])];
        let cfg = machine();
        let check = fee_user_shill_check(
            &PricingRule::TpmDerived,
            &txs,
            &TxId::new("tx4"),
            &fakes,
            &cfg,
            &RiskDivision::user_friendly(),
        )
        .unwrap();
        assert!(!check.pass);
        assert_eq!(check.lhs, rat("15/7"));
        assert_eq!(check.rhs, rat("15/8"));
        assert_eq!(check.margin, rat("-15/56"));
    }

    #[test]
    fn scheduler_friendly_division_restores_user_shill_on_these_instances() {
        let txs = shapley_example();
        let fakes = vec![Transaction::writer("tx5", 1, rat("1"), ["o2"])];
        let cfg = machine();
        let check = fee_user_shill_check(
            &PricingRule::TpmDerived,
            &txs,
            &TxId::new("tx4"),
            &fakes,
            &cfg,
            &RiskDivision::scheduler_friendly(),
        )
        .unwrap();
        assert!(check.pass);

        let check = fee_user_shill_check(
            &PricingRule::TpmDerived,
            &tpm_example(),
            &TxId::new("tx1"),
            &tpm_fake(),
            &cfg,
            &RiskDivision::scheduler_friendly(),
        )
        .unwrap();
        assert!(check.pass);
    }

    #[test]
    fn schedule_independent_rule_passes_scheduler_shill_trivially() {
        let txs = tpm_example();
        let cfg = machine();
        let check = fee_sched_shill_check(
            &PricingRule::ComputeProportional,
            &txs,
            &TxId::new("tx1"),
            &tpm_fake(),
            &cfg,
            &RiskDivision::even_steven(),
            &gamma("1/2"),
        )
        .unwrap();
        assert!(check.pass);
        assert!(check.lhs.is_zero());
    }

    #[test]
    fn tpm_derived_scheduler_shill_at_even_burn() {
        // Victim fee rises 3 -> 4; gamma = 1/2 and alpha = 1 price the fake
        // at 4, so burning half of it (2) dominates the retained gain (1/2).
        let txs = tpm_example();
        let cfg = machine();
        let check = fee_sched_shill_check(
            &PricingRule::TpmDerived,
            &txs,
            &TxId::new("tx1"),
            &tpm_fake(),
            &cfg,
            &RiskDivision::scheduler_friendly(),
            &gamma("1/2"),
        )
        .unwrap();
        assert!(check.pass);
        assert_eq!(check.lhs, rat("1/2"));
        assert_eq!(check.rhs, rat("2"));
    }

    #[test]
    fn user_friendly_division_degenerates_to_fee_monotonicity() {
        // With alpha = 0 the condition is f_att(S', victim) <= f_att(S, victim),
        // which the TPM-derived fee violates (3 -> 4).
        let txs = tpm_example();
        let cfg = machine();
        let check = fee_sched_shill_check(
            &PricingRule::TpmDerived,
            &txs,
            &TxId::new("tx1"),
            &tpm_fake(),
            &cfg,
            &RiskDivision::user_friendly(),
            &gamma("1/2"),
        )
        .unwrap();
        assert!(!check.pass);
        assert_eq!(check.lhs, rat("1/2"));
        assert!(check.rhs.is_zero());
    }

    #[test]
    fn full_retention_makes_positive_gain_an_automatic_fail() {
        let txs = tpm_example();
        let cfg = machine();
        let check = fee_sched_shill_check(
            &PricingRule::TpmDerived,
            &txs,
            &TxId::new("tx1"),
            &tpm_fake(),
            &cfg,
            &RiskDivision::scheduler_friendly(),
            &gamma("1"),
        )
        .unwrap();
        assert!(!check.pass);
        assert!(check.rhs.is_zero());
        assert_eq!(check.lhs, rat("1"));
    }

    fn family() -> Vec<IndependenceInstance> {
        vec![
            IndependenceInstance {
                name: "tpm_pair".into(),
                base: tpm_example(),
                fakes: tpm_fake(),
                cfg: machine(),
            },
            IndependenceInstance {
                name: "shapley_pool".into(),
                base: shapley_example(),
                fakes: vec![Transaction::writer("tx5", 1, rat("1"), ["o2"])],
                cfg: machine(),
            },
        ]
    }

    #[test]
    fn compute_proportional_rule_is_independent() {
        assert_eq!(
            independence_check(&PricingRule::ComputeProportional, &family()).unwrap(),
            IndependenceVerdict::Independent
        );
    }

    #[test]
    fn object_weighted_rule_is_independent_within_a_block() {
        let book = ObjectPriceBook::new(
            BTreeMap::from([(obj("o1"), rat("1")), (obj("o2"), rat("1"))]),
            BTreeMap::new(),
            rat("1/8"),
            UpdateVariant::Linear,
        )
        .unwrap();
        assert_eq!(
            independence_check(&PricingRule::ObjectWeighted { book }, &family()).unwrap(),
            IndependenceVerdict::Independent
        );
    }

    #[test]
    fn tpm_derived_rule_has_the_three_to_four_counterexample() {
        match independence_check(&PricingRule::TpmDerived, &family()).unwrap() {
            IndependenceVerdict::Counterexample(ce) => {
                assert_eq!(ce.instance, "tpm_pair");
                assert_eq!(ce.fee_before, rat("3"));
                assert_eq!(ce.fee_after, rat("4"));
            }
            IndependenceVerdict::Independent => panic!("expected a counterexample"),
        }
    }

    #[test]
    fn user_friendly_shill_proofness_is_equivalent_to_independence() {
        // At alpha = 0, passing both fee-level shill conditions on every
        // family instance coincides with fee independence on that family.
        let family = family();
        let division = RiskDivision::user_friendly();
        let retention = gamma("1/2");
        let book = ObjectPriceBook::new(
            BTreeMap::from([(obj("o1"), rat("1")), (obj("o2"), rat("1"))]),
            BTreeMap::new(),
            rat("1/8"),
            UpdateVariant::Linear,
        )
        .unwrap();
        let rules = [
            PricingRule::ComputeProportional,
            PricingRule::TpmDerived,
            PricingRule::ObjectWeighted { book },
        ];
        for rule in &rules {
            let mut both_pass = true;
            for instance in &family {
                for victim in &instance.base {
                    let user = fee_user_shill_check(
                        rule,
                        &instance.base,
                        &victim.id,
                        &instance.fakes,
                        &instance.cfg,
                        &division,
                    )
                    .unwrap();
                    let sched = fee_sched_shill_check(
                        rule,
                        &instance.base,
                        &victim.id,
                        &instance.fakes,
                        &instance.cfg,
                        &division,
                        &retention,
                    )
                    .unwrap();
                    both_pass &= user.pass && sched.pass;
                }
            }
            let independent = independence_check(rule, &family).unwrap()
                == IndependenceVerdict::Independent;
            assert_eq!(both_pass, independent, "rule {}", rule.name());
        }
    }

    #[test]
    fn quote_rejects_foreign_outcomes() {
        let (tx, rule, pricing) = quoted_instance();
        let outcome = exec(&State::new(), &tx, &rule).unwrap();
        let other = Transaction::writer("other", 1, rat("1"), ["a"]);
        let cfg = machine();
        let txs = vec![other.clone()];
        let ctx = FeeContext {
            txs: &txs,
            cfg: &cfg,
        };
        let err = quote(
            &pricing,
            &ctx,
            &other,
            &outcome,
            &RiskDivision::even_steven(),
            &gamma("1/2"),
        )
        .unwrap_err();
        assert!(matches!(err, FeeError::OutcomeMismatch { .. }));
    }

    #[test]
    fn alpha_outside_unit_interval_is_rejected() {
        assert!(RiskDivision::new(rat("-1/2")).is_err());
        assert!(RiskDivision::new(rat("3/2")).is_err());
        assert!(RiskDivision::new(rat("1")).is_ok());
    }
}

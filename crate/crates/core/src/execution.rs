//! Minimal deterministic execution semantics, just enough to realize
//! contingency: a guard over object values decides whether a transaction
//! takes its full branch or under-executes with only the non-contingent
//! objects.
//!
//! Write effects are absolute assignments, which keeps reachable state
//! spaces tiny and lets contingency searches enumerate prefixes exactly.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::{ObjectId, Transaction, TxId};
use crate::scheduling::Schedule;

/// Cap on prefix length for the exhaustive contingent-object search.
pub const CONTINGENCY_PREFIX_CAP: usize = 6;

/// Object values; objects absent from the map read as zero.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct State {
    values: BTreeMap<ObjectId, i64>,
}

impl State {
    pub fn new() -> Self {
        State::default()
    }

    pub fn from_values(values: BTreeMap<ObjectId, i64>) -> Self {
        State { values }
    }

    pub fn value(&self, o: &ObjectId) -> i64 {
        self.values.get(o).copied().unwrap_or(0)
    }

    /// Copy-on-apply: returns a new state with the effects written.
    pub fn with_effects(&self, effects: &BTreeMap<ObjectId, i64>) -> State {
        let mut next = self.clone();
        for (o, v) in effects {
            next.values.insert(o.clone(), *v);
        }
        next
    }

    pub fn values(&self) -> &BTreeMap<ObjectId, i64> {
        &self.values
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = ">")]
    Gt,
}

impl Comparator {
    fn holds(self, lhs: i64, rhs: i64) -> bool {
        match self {
            Comparator::Lt => lhs < rhs,
            Comparator::Le => lhs <= rhs,
            Comparator::Eq => lhs == rhs,
            Comparator::Ge => lhs >= rhs,
            Comparator::Gt => lhs > rhs,
        }
    }
}

/// Branch predicate of a contingency rule.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Guard {
    /// Trivially true; the transaction always takes its full branch.
    AlwaysFull,
    Compare {
        object: ObjectId,
        cmp: Comparator,
        value: i64,
    },
}

/// The two-branch execution body of one transaction: a guard over a declared
/// read, full-branch effects covering `W`, and under-branch effects covering
/// `W \ C_W`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyRule {
    pub tx_id: TxId,
    pub guard: Guard,
    #[serde(default)]
    pub on_full: BTreeMap<ObjectId, i64>,
    #[serde(default)]
    pub on_under: BTreeMap<ObjectId, i64>,
}

impl ContingencyRule {
    /// A rule for a transaction that always fully executes and writes the
    /// given effects.
    pub fn always_full(tx: &Transaction, on_full: BTreeMap<ObjectId, i64>) -> Self {
        ContingencyRule {
            tx_id: tx.id.clone(),
            guard: Guard::AlwaysFull,
            on_full,
            on_under: tx
                .writes
                .difference(&tx.contingent_writes)
                .map(|o| (o.clone(), 0))
                .collect(),
        }
    }

    /// Default rule for plain transactions: always full, writes zeroes.
    pub fn trivial(tx: &Transaction) -> Self {
        let on_full = tx.writes.iter().map(|o| (o.clone(), 0)).collect();
        ContingencyRule::always_full(tx, on_full)
    }

    pub fn validate_for(&self, tx: &Transaction) -> Result<(), ExecError> {
        let mismatch = |msg: String| Err(ExecError::RuleMismatch(tx.id.clone(), msg));
        if self.tx_id != tx.id {
            return mismatch(format!("rule belongs to {}", self.tx_id));
        }
        if let Guard::Compare { object, .. } = &self.guard {
            if !tx.reads.contains(object) {
                return mismatch(format!("guard object {object} not in declared reads"));
            }
        }
        let full_keys: BTreeSet<&ObjectId> = self.on_full.keys().collect();
        let writes: BTreeSet<&ObjectId> = tx.writes.iter().collect();
        if full_keys != writes {
            return mismatch("full-branch effects must cover exactly the write set".into());
        }
        let under_keys: BTreeSet<&ObjectId> = self.on_under.keys().collect();
        let base_writes: BTreeSet<&ObjectId> =
            tx.writes.difference(&tx.contingent_writes).collect();
        if under_keys != base_writes {
            return mismatch(
                "under-branch effects must cover exactly the non-contingent writes".into(),
            );
        }
        Ok(())
    }
}

/// Realized outcome of executing one transaction on one state.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ExecOutcome {
    pub tx_id: TxId,
    pub used_reads: BTreeSet<ObjectId>,
    pub used_writes: BTreeSet<ObjectId>,
    pub compute_used: u64,
    pub fully_executed: bool,
    pub write_effects: BTreeMap<ObjectId, i64>,
    /// Canonical digest of (used sets, write effects); equal digests mean
    /// equal observable outcomes.
    pub output_digest: String,
}

impl ExecOutcome {
    pub fn used(&self) -> BTreeSet<ObjectId> {
        self.used_reads.union(&self.used_writes).cloned().collect()
    }

    pub fn same_outcome(&self, other: &ExecOutcome) -> bool {
        self.output_digest == other.output_digest
    }
}

fn outcome_digest(
    used_reads: &BTreeSet<ObjectId>,
    used_writes: &BTreeSet<ObjectId>,
    effects: &BTreeMap<ObjectId, i64>,
) -> String {
    let mut hasher = Sha256::new();
    for o in used_reads {
        hasher.update(b"r:");
        hasher.update(o.0.as_bytes());
        hasher.update(b";");
    }
    for o in used_writes {
        hasher.update(b"w:");
        hasher.update(o.0.as_bytes());
        hasher.update(b";");
    }
    for (o, v) in effects {
        hasher.update(b"e:");
        hasher.update(o.0.as_bytes());
        hasher.update(b"=");
        hasher.update(v.to_le_bytes());
        hasher.update(b";");
    }
    format!("{:x}", hasher.finalize())
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExecError {
    #[error("rule does not match transaction {0}: {1}")]
    RuleMismatch(TxId, String),
    #[error("no contingency rule provided for scheduled transaction {0}")]
    MissingRule(TxId),
    #[error("precedence graph has a cycle involving {0}")]
    CyclicPrecedence(TxId),
    #[error("object {0} is not declared by transaction {1}")]
    ObjectNotDeclared(ObjectId, TxId),
    #[error("exhaustive search cap exceeded: prefix length {0} > {CONTINGENCY_PREFIX_CAP}")]
    PrefixCapExceeded(usize),
}

/// Executes `tx` on `state` under `rule`: guard true takes the full branch
/// (all declared objects, compute `t`), guard false the under-executed branch
/// (non-contingent objects only, compute `t_base`). Pure in its inputs.
pub fn exec(state: &State, tx: &Transaction, rule: &ContingencyRule) -> Result<ExecOutcome, ExecError> {
    rule.validate_for(tx)?;
    let guard_holds = match &rule.guard {
        Guard::AlwaysFull => true,
        Guard::Compare { object, cmp, value } => cmp.holds(state.value(object), *value),
    };
    let (used_reads, used_writes, compute_used, effects) = if guard_holds {
        (
            tx.reads.clone(),
            tx.writes.clone(),
            tx.t,
            rule.on_full.clone(),
        )
    } else {
        (
            tx.reads.difference(&tx.contingent_reads).cloned().collect(),
            tx.writes.difference(&tx.contingent_writes).cloned().collect(),
            tx.t_base,
            rule.on_under.clone(),
        )
    };
    let output_digest = outcome_digest(&used_reads, &used_writes, &effects);
    Ok(ExecOutcome {
        tx_id: tx.id.clone(),
        used_reads,
        used_writes,
        compute_used,
        fully_executed: guard_holds,
        write_effects: effects,
        output_digest,
    })
}

/// Deterministic linearization of the schedule's precedence DAG; ties broken
/// by ascending transaction id.
fn linearize(schedule: &Schedule) -> Result<Vec<&Transaction>, ExecError> {
    let txs = schedule.txs();
    let mut indeg: BTreeMap<&TxId, usize> = txs.iter().map(|tx| (&tx.id, 0)).collect();
    for (_, b) in schedule.precedence() {
        if let Some(d) = indeg.get_mut(b) {
            *d += 1;
        }
    }
    let by_id: BTreeMap<&TxId, &Transaction> = txs.iter().map(|tx| (&tx.id, tx)).collect();
    let mut ready: BTreeSet<&TxId> = indeg
        .iter()
        .filter(|(_, &d)| d == 0)
        .map(|(&id, _)| id)
        .collect();
    let mut order = Vec::with_capacity(txs.len());
    while let Some(&id) = ready.iter().next() {
        ready.remove(&id);
        order.push(by_id[&id]);
        for (a, b) in schedule.precedence() {
            if a == id {
                let d = indeg.get_mut(b).unwrap();
                *d -= 1;
                if *d == 0 {
                    ready.insert(b);
                }
            }
        }
    }
    if order.len() != txs.len() {
        let stuck = indeg
            .iter()
            .find(|(_, &d)| d > 0)
            .map(|(&id, _)| id.clone())
            .expect("cycle leaves positive in-degree");
        return Err(ExecError::CyclicPrecedence(stuck));
    }
    Ok(order)
}

/// Applies a schedule to a state: transactions execute in a precedence-
/// consistent order and their effects accumulate. Returns the final state
/// and the per-transaction outcomes.
pub fn apply_schedule(
    state: &State,
    schedule: &Schedule,
    rules: &BTreeMap<TxId, ContingencyRule>,
) -> Result<(State, BTreeMap<TxId, ExecOutcome>), ExecError> {
    let order = linearize(schedule)?;
    let mut current = state.clone();
    let mut outcomes = BTreeMap::new();
    for tx in order {
        let rule = rules
            .get(&tx.id)
            .ok_or_else(|| ExecError::MissingRule(tx.id.clone()))?;
        let outcome = exec(&current, tx, rule)?;
        current = current.with_effects(&outcome.write_effects);
        outcomes.insert(tx.id.clone(), outcome);
    }
    Ok((current, outcomes))
}

/// Executes a linear prefix (no DAG involved) and returns the final state.
pub fn apply_prefix(
    state: &State,
    prefix: &[&(Transaction, ContingencyRule)],
) -> Result<State, ExecError> {
    let mut current = state.clone();
    for (tx, rule) in prefix {
        let outcome = exec(&current, tx, rule)?;
        current = current.with_effects(&outcome.write_effects);
    }
    Ok(current)
}

/// Decides whether `o` is a contingent object for `tx` from `state`: true
/// iff two prefix schedules of length at most `k`, drawn without repetition
/// from `pool`, lead `tx` to use `o` in one and skip it in the other.
/// Exhaustive over ordered prefixes; `k` is capped.
pub fn is_contingent_object(
    state: &State,
    tx: &Transaction,
    rule: &ContingencyRule,
    o: &ObjectId,
    pool: &[(Transaction, ContingencyRule)],
    k: usize,
) -> Result<bool, ExecError> {
    if k > CONTINGENCY_PREFIX_CAP {
        return Err(ExecError::PrefixCapExceeded(k));
    }
    if !tx.reads.contains(o) && !tx.writes.contains(o) {
        return Err(ExecError::ObjectNotDeclared(o.clone(), tx.id.clone()));
    }
    rule.validate_for(tx)?;

    struct PrefixSearch<'a> {
        state: &'a State,
        tx: &'a Transaction,
        rule: &'a ContingencyRule,
        object: &'a ObjectId,
        pool: &'a [(Transaction, ContingencyRule)],
        max_len: usize,
        seen_used: bool,
        seen_unused: bool,
    }

    impl<'a> PrefixSearch<'a> {
        fn walk(
            &mut self,
            prefix: &mut Vec<&'a (Transaction, ContingencyRule)>,
        ) -> Result<(), ExecError> {
            let pre_state = apply_prefix(self.state, prefix)?;
            let outcome = exec(&pre_state, self.tx, self.rule)?;
            if outcome.used_reads.contains(self.object) || outcome.used_writes.contains(self.object)
            {
                self.seen_used = true;
            } else {
                self.seen_unused = true;
            }
            if (self.seen_used && self.seen_unused) || prefix.len() == self.max_len {
                return Ok(());
            }
            for entry in self.pool {
                if prefix.iter().any(|p| p.0.id == entry.0.id) {
                    continue;
                }
                prefix.push(entry);
                self.walk(prefix)?;
                prefix.pop();
                if self.seen_used && self.seen_unused {
                    return Ok(());
                }
            }
            Ok(())
        }
    }

    let mut search = PrefixSearch {
        state,
        tx,
        rule,
        object: o,
        pool,
        max_len: k,
        seen_used: false,
        seen_unused: false,
    };
    search.walk(&mut Vec::new())?;
    Ok(search.seen_used && search.seen_unused)
}

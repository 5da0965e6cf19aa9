//! Gas computation mechanisms over exact makespans: Shapley and
//! time-proportional (TPM) allocations, the efficiency axiom, and exhaustive
//! shill-attack search at the gas level.
//!
//! All makespans come from the exact solver; a "none" result from a search is
//! therefore a proof over the searched space, not a heuristic verdict.

use std::collections::BTreeMap;
use std::fmt;

use num::bigint::BigInt;
use num::integer::binomial;
use serde::Serialize;
use thiserror::Error;

use crate::model::{check_unique_ids, ModelError, Transaction, TxId};
use crate::rational::Rational;
use crate::scheduling::{makespan_exact, ScheduleError};

/// Subset-enumeration cap: Shapley values need `2^|T|` exact makespans.
pub const GCM_SUBSET_CAP: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GcmMechanism {
    Shapley,
    Tpm,
}

impl fmt::Display for GcmMechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GcmMechanism::Shapley => f.write_str("shapley"),
            GcmMechanism::Tpm => f.write_str("tpm"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Attacker {
    User,
    Scheduler,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GcmError {
    #[error("instance too large for subset enumeration: {size} transactions (cap {cap})")]
    InstanceTooLarge { size: usize, cap: usize },
    #[error("transaction {0} is not part of the scheduled set")]
    UnknownTx(TxId),
    #[error("fake transaction {0} collides with a scheduled transaction id")]
    FakeIdCollision(TxId),
    #[error("search budget exceeded after {explored} subset evaluations")]
    BudgetExceeded {
        explored: usize,
        /// Best violation found on the explored frontier, if any.
        partial: Option<Box<ShillReport>>,
    },
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Effective gas per transaction under one mechanism.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GasAssignment {
    pub mechanism: GcmMechanism,
    pub per_tx: BTreeMap<TxId, Rational>,
    pub total: Rational,
}

/// A profitable shill attack found by exhaustive search.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ShillReport {
    pub attacker: Attacker,
    pub mechanism: GcmMechanism,
    pub fake_txs: Vec<Transaction>,
    /// Gas position before the attack (victim charge for users, honest total
    /// for schedulers).
    pub baseline: Rational,
    /// Gas position after the attack.
    pub attacked: Rational,
    pub profit: Rational,
}

/// Evaluation allowance for shill searches; exceeding it is an error that
/// carries the explored frontier.
#[derive(Clone, Copy, Debug)]
pub struct SearchBudget {
    pub max_evals: usize,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget { max_evals: 20_000 }
    }
}

/// Lazily filled table of exact makespans over subsets of one instance.
struct MakespanTable<'a> {
    txs: &'a [Transaction],
    n_cores: usize,
    cache: Vec<Option<u64>>,
}

impl<'a> MakespanTable<'a> {
    fn new(txs: &'a [Transaction], n_cores: usize) -> Result<Self, GcmError> {
        if txs.len() > GCM_SUBSET_CAP {
            return Err(GcmError::InstanceTooLarge {
                size: txs.len(),
                cap: GCM_SUBSET_CAP,
            });
        }
        check_unique_ids(txs)?;
        Ok(MakespanTable {
            txs,
            n_cores,
            cache: vec![None; 1 << txs.len()],
        })
    }

    fn v(&mut self, mask: u32) -> Result<u64, GcmError> {
        if let Some(v) = self.cache[mask as usize] {
            return Ok(v);
        }
        let subset: Vec<Transaction> = (0..self.txs.len())
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| self.txs[i].clone())
            .collect();
        let v = makespan_exact(&subset, self.n_cores)?;
        self.cache[mask as usize] = Some(v);
        Ok(v)
    }

    fn index_of(&self, id: &TxId) -> Result<usize, GcmError> {
        self.txs
            .iter()
            .position(|tx| &tx.id == id)
            .ok_or_else(|| GcmError::UnknownTx(id.clone()))
    }

    fn full_mask(&self) -> u32 {
        (1u32 << self.txs.len()) - 1
    }
}

fn shapley_from_table(table: &mut MakespanTable<'_>, idx: usize) -> Result<Rational, GcmError> {
    let n = table.txs.len();
    let others: Vec<usize> = (0..n).filter(|&i| i != idx).collect();
    let mut total = Rational::zero();
    for mask in 0u32..(1u32 << others.len()) {
        let mut subset_mask = 0u32;
        let mut size = 0usize;
        for (bit, &i) in others.iter().enumerate() {
            if mask & (1 << bit) != 0 {
                subset_mask |= 1 << i;
                size += 1;
            }
        }
        let with = table.v(subset_mask | (1 << idx))?;
        let without = table.v(subset_mask)?;
        let marginal = Rational::from_u64(with - without);
        let weight = BigInt::from(n as u64) * binomial(BigInt::from((n - 1) as u64), BigInt::from(size as u64));
        total = total
            + marginal / Rational::from_big(num::rational::BigRational::from_integer(weight));
    }
    Ok(total)
}

/// Shapley gas: marginal contributions to the exact makespan averaged over
/// all subsets, `sum_S (v(S+tx) - v(S)) / (|T| * C(|T|-1, |S|))`.
pub fn shapley_gas(txs: &[Transaction], tx: &TxId, n_cores: usize) -> Result<Rational, GcmError> {
    let mut table = MakespanTable::new(txs, n_cores)?;
    let idx = table.index_of(tx)?;
    shapley_from_table(&mut table, idx)
}

/// TPM gas: the transaction's share of total compute, scaled by the block's
/// exact makespan, `t(tx) / sum t * v(T)`.
pub fn tpm_gas(txs: &[Transaction], tx: &TxId, n_cores: usize) -> Result<Rational, GcmError> {
    let mut table = MakespanTable::new(txs, n_cores)?;
    let idx = table.index_of(tx)?;
    let v = table.v(table.full_mask())?;
    let total: u64 = txs.iter().map(|t| t.t).sum();
    Ok(Rational::from_u64(txs[idx].t) * Rational::from_u64(v) / Rational::from_u64(total))
}

/// Per-transaction gas for the whole scheduled set under one mechanism.
pub fn gas_assignment(
    mechanism: GcmMechanism,
    txs: &[Transaction],
    n_cores: usize,
) -> Result<GasAssignment, GcmError> {
    let mut table = MakespanTable::new(txs, n_cores)?;
    let mut per_tx = BTreeMap::new();
    match mechanism {
        GcmMechanism::Shapley => {
            for (idx, tx) in txs.iter().enumerate() {
                let gas = shapley_from_table(&mut table, idx)?;
                per_tx.insert(tx.id.clone(), gas);
            }
        }
        GcmMechanism::Tpm => {
            let v = table.v(table.full_mask())?;
            let total: u64 = txs.iter().map(|t| t.t).sum();
            for tx in txs {
                let gas =
                    Rational::from_u64(tx.t) * Rational::from_u64(v) / Rational::from_u64(total);
                per_tx.insert(tx.id.clone(), gas);
            }
        }
    }
    let total = per_tx.values().sum();
    Ok(GasAssignment {
        mechanism,
        per_tx,
        total,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EfficiencyReport {
    pub mechanism: GcmMechanism,
    pub total_gas: Rational,
    pub makespan: u64,
    /// `total_gas - makespan`; zero iff the mechanism is efficient here.
    pub residual: Rational,
    pub holds: bool,
}

/// Efficiency axiom: total assigned gas must equal the exact makespan.
pub fn efficiency_check(
    mechanism: GcmMechanism,
    txs: &[Transaction],
    n_cores: usize,
) -> Result<EfficiencyReport, GcmError> {
    let assignment = gas_assignment(mechanism, txs, n_cores)?;
    let makespan = makespan_exact(txs, n_cores)?;
    let residual = &assignment.total - Rational::from_u64(makespan);
    Ok(EfficiencyReport {
        mechanism,
        total_gas: assignment.total,
        makespan,
        residual: residual.clone(),
        holds: residual.is_zero(),
    })
}

fn merged(txs: &[Transaction], fakes: &[&Transaction]) -> Vec<Transaction> {
    txs.iter()
        .chain(fakes.iter().copied())
        .cloned()
        .collect()
}

fn check_pool(txs: &[Transaction], pool: &[Transaction]) -> Result<(), GcmError> {
    check_unique_ids(pool)?;
    for fake in pool {
        if txs.iter().any(|tx| tx.id == fake.id) {
            return Err(GcmError::FakeIdCollision(fake.id.clone()));
        }
    }
    Ok(())
}

fn subsets_up_to(pool_len: usize, kmax: usize) -> impl Iterator<Item = u32> {
    (1u32..(1u32 << pool_len)).filter(move |m| (m.count_ones() as usize) <= kmax)
}

/// Exhaustive user-shill search: tests every fake subset `T'` of `pool` with
/// `|T'| <= kmax` against `gas_T(tx) <= gas_{T+T'}(tx) + gas_{T+T'}(T')` and
/// reports the maximum-profit violation, if any.
pub fn user_shill_search(
    mechanism: GcmMechanism,
    txs: &[Transaction],
    victim: &TxId,
    pool: &[Transaction],
    kmax: usize,
    n_cores: usize,
    budget: &SearchBudget,
) -> Result<Option<ShillReport>, GcmError> {
    if !txs.iter().any(|tx| &tx.id == victim) {
        return Err(GcmError::UnknownTx(victim.clone()));
    }
    check_pool(txs, pool)?;
    let baseline = gas_of(mechanism, txs, victim, n_cores)?;

    let mut best: Option<ShillReport> = None;
    for (explored, mask) in subsets_up_to(pool.len(), kmax).enumerate() {
        if explored >= budget.max_evals {
            return Err(GcmError::BudgetExceeded {
                explored,
                partial: best.map(Box::new),
            });
        }
        let fakes: Vec<&Transaction> = (0..pool.len())
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| &pool[i])
            .collect();
        let combined = merged(txs, &fakes);
        let victim_after = gas_of(mechanism, &combined, victim, n_cores)?;
        let fakes_charge: Rational = fakes
            .iter()
            .map(|f| gas_of(mechanism, &combined, &f.id, n_cores))
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .sum();
        let attacked = &victim_after + &fakes_charge;
        let profit = &baseline - &attacked;
        if profit.is_positive() && best.as_ref().is_none_or(|b| profit > b.profit) {
            best = Some(ShillReport {
                attacker: Attacker::User,
                mechanism,
                fake_txs: fakes.into_iter().cloned().collect(),
                baseline: baseline.clone(),
                attacked,
                profit,
            });
        }
    }
    Ok(best)
}

/// Exhaustive scheduler-shill search: tests every fake subset against
/// `gas_T(T) >= gas_{T+T'}(T)` (profit counted on honest transactions only).
pub fn scheduler_shill_search(
    mechanism: GcmMechanism,
    txs: &[Transaction],
    pool: &[Transaction],
    kmax: usize,
    n_cores: usize,
    budget: &SearchBudget,
) -> Result<Option<ShillReport>, GcmError> {
    check_pool(txs, pool)?;
    let baseline: Rational = honest_total(mechanism, txs, txs, n_cores)?;

    let mut best: Option<ShillReport> = None;
    for (explored, mask) in subsets_up_to(pool.len(), kmax).enumerate() {
        if explored >= budget.max_evals {
            return Err(GcmError::BudgetExceeded {
                explored,
                partial: best.map(Box::new),
            });
        }
        let fakes: Vec<&Transaction> = (0..pool.len())
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| &pool[i])
            .collect();
        let combined = merged(txs, &fakes);
        let attacked = honest_total(mechanism, &combined, txs, n_cores)?;
        let profit = &attacked - &baseline;
        if profit.is_positive() && best.as_ref().is_none_or(|b| profit > b.profit) {
            best = Some(ShillReport {
                attacker: Attacker::Scheduler,
                mechanism,
                fake_txs: fakes.into_iter().cloned().collect(),
                baseline: baseline.clone(),
                attacked,
                profit,
            });
        }
    }
    Ok(best)
}

fn gas_of(
    mechanism: GcmMechanism,
    txs: &[Transaction],
    tx: &TxId,
    n_cores: usize,
) -> Result<Rational, GcmError> {
    match mechanism {
        GcmMechanism::Shapley => shapley_gas(txs, tx, n_cores),
        GcmMechanism::Tpm => tpm_gas(txs, tx, n_cores),
    }
}

fn honest_total(
    mechanism: GcmMechanism,
    scheduled: &[Transaction],
    honest: &[Transaction],
    n_cores: usize,
) -> Result<Rational, GcmError> {
    let assignment = gas_assignment(mechanism, scheduled, n_cores)?;
    Ok(honest
        .iter()
        .map(|tx| assignment.per_tx[&tx.id].clone())
        .sum())
}

/// Witness that scheduler shill proofness and efficiency cannot coexist on a
/// bounded-core machine: `n + 1` pairwise-independent transactions of compute
/// `t` make every `n`-subset finish in `t` while the full set needs `2t`, so
/// shill proofness forces a total of at least `(n+1) t > 2t` gas for `n > 1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SpamWitness {
    pub n_cores: usize,
    pub t: u64,
    /// Exact makespan of every n-subset (they all coincide).
    pub subset_makespan: u64,
    pub full_makespan: u64,
    /// Total gas forced by scheduler shill proofness: `(n+1) * t`.
    pub required_total: u64,
    pub contradiction: bool,
}

pub fn spam_efficiency_witness(n_cores: usize, t: u64) -> Result<SpamWitness, GcmError> {
    assert!(n_cores >= 1 && t >= 1, "need n >= 1 and t >= 1");
    let txs: Vec<Transaction> = (0..=n_cores)
        .map(|i| {
            Transaction::writer(
                format!("p{i:02}"),
                t,
                Rational::one(),
                [format!("o{i:02}")],
            )
        })
        .collect();
    let full_makespan = makespan_exact(&txs, n_cores)?;
    let mut subset_makespan = None;
    for skip in 0..txs.len() {
        let subset: Vec<Transaction> = txs
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != skip)
            .map(|(_, tx)| tx.clone())
            .collect();
        let v = makespan_exact(&subset, n_cores)?;
        match subset_makespan {
            None => subset_makespan = Some(v),
            Some(prev) => assert_eq!(prev, v, "independent subsets must have equal makespans"),
        }
    }
    let subset_makespan = subset_makespan.expect("at least one subset");
    let required_total = (n_cores as u64 + 1) * t;
    Ok(SpamWitness {
        n_cores,
        t,
        subset_makespan,
        full_makespan,
        required_total,
        contradiction: required_total > full_makespan,
    })
}

//! Conflict-aware parallel schedule construction and evaluation: exact
//! makespans, GREEDY/RANDOM/OPT policies, revenue, and worst-case ratio
//! instances.

mod exact;
mod worstcase;

pub use worstcase::{
    gen_greedy_worstcase, greedy_alpha_lower_bound, worstcase_alpha, WorstCaseInstance,
    WorstCaseParams, WorstCaseReport,
};

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::model::{
    check_unique_ids, conflicts_unchecked, LimitMode, MachineConfig, ModelError, Transaction, TxId,
};
use crate::rational::Rational;

/// Instance-size cap for the exhaustive/branch-and-bound paths.
pub const EXACT_CAP: usize = 12;

/// Seeds used when RANDOM's expectation is taken without an explicit list.
pub fn default_random_seeds() -> Vec<u64> {
    (0..64).collect()
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScheduleError {
    #[error("instance too large for exact solver: {size} transactions (cap {cap})")]
    InstanceTooLarge { size: usize, cap: usize },
    #[error("order is not a permutation of the transaction set")]
    BadOrder,
    #[error("ratio undefined: OPT revenue is zero")]
    RatioUndefined,
    #[error("schedule invariant violated: {0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("worst-case generator: t_max must divide the block limit")]
    TMaxNotDivisor,
    #[error("worst-case generator: need at least one object")]
    NoObjects,
    #[error("worst-case generator: eps must lie strictly between 0 and 1")]
    BadEps,
    #[error("worst-case certificate gap: constructed schedule revenue {got} below bound {bound}")]
    CertificateGap { got: Rational, bound: Rational },
}

/// Core/start placement of one included transaction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Slot {
    pub core: usize,
    pub start: u64,
    pub finish: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScheduleMetrics {
    pub makespan: u64,
    pub total_compute: u64,
    pub revenue: Rational,
    pub included: BTreeSet<TxId>,
    pub dropped: BTreeSet<TxId>,
}

/// A precedence DAG over included transactions together with a concrete
/// core/start assignment. Immutable after construction.
#[derive(Clone, Debug, Serialize)]
pub struct Schedule {
    txs: Vec<Transaction>,
    precedence: BTreeSet<(TxId, TxId)>,
    assignment: BTreeMap<TxId, Slot>,
    metrics: ScheduleMetrics,
}

impl Schedule {
    pub fn empty() -> Self {
        Schedule {
            txs: Vec::new(),
            precedence: BTreeSet::new(),
            assignment: BTreeMap::new(),
            metrics: ScheduleMetrics {
                makespan: 0,
                total_compute: 0,
                revenue: Rational::zero(),
                included: BTreeSet::new(),
                dropped: BTreeSet::new(),
            },
        }
    }

    /// Included transactions in insertion order.
    pub fn txs(&self) -> &[Transaction] {
        &self.txs
    }

    pub fn precedence(&self) -> &BTreeSet<(TxId, TxId)> {
        &self.precedence
    }

    pub fn assignment(&self) -> &BTreeMap<TxId, Slot> {
        &self.assignment
    }

    pub fn slot(&self, id: &TxId) -> Option<&Slot> {
        self.assignment.get(id)
    }

    pub fn metrics(&self) -> &ScheduleMetrics {
        &self.metrics
    }

    pub fn makespan(&self) -> u64 {
        self.metrics.makespan
    }

    pub fn revenue(&self) -> &Rational {
        &self.metrics.revenue
    }

    pub fn includes(&self, id: &TxId) -> bool {
        self.metrics.included.contains(id)
    }

    pub(crate) fn from_parts(
        txs: Vec<Transaction>,
        precedence: BTreeSet<(TxId, TxId)>,
        assignment: BTreeMap<TxId, Slot>,
        dropped: BTreeSet<TxId>,
    ) -> Self {
        let makespan = assignment.values().map(|s| s.finish).max().unwrap_or(0);
        let total_compute = txs.iter().map(|tx| tx.t).sum();
        let revenue = txs.iter().map(Transaction::revenue).sum();
        let included = txs.iter().map(|tx| tx.id.clone()).collect();
        Schedule {
            txs,
            precedence,
            assignment,
            metrics: ScheduleMetrics {
                makespan,
                total_compute,
                revenue,
                included,
                dropped,
            },
        }
    }
}

/// List-scheduling placer: earliest feasible start, best-fit core.
struct Placer<'a> {
    cores: Vec<u64>,
    placed: Vec<(&'a Transaction, Slot)>,
}

impl<'a> Placer<'a> {
    fn new(n_cores: usize) -> Self {
        Placer {
            cores: vec![0; n_cores],
            placed: Vec::new(),
        }
    }

    fn earliest(&self, tx: &Transaction) -> (usize, u64) {
        let cft = self
            .placed
            .iter()
            .filter(|(p, _)| conflicts_unchecked(p, tx))
            .map(|(_, slot)| slot.finish)
            .max()
            .unwrap_or(0);
        let mut chosen: Option<usize> = None;
        for (c, &free) in self.cores.iter().enumerate() {
            if free <= cft {
                match chosen {
                    Some(b) if self.cores[b] >= free => {}
                    _ => chosen = Some(c),
                }
            }
        }
        match chosen {
            Some(c) => (c, cft),
            None => {
                let c = self
                    .cores
                    .iter()
                    .enumerate()
                    .min_by_key(|&(idx, &free)| (free, idx))
                    .map(|(idx, _)| idx)
                    .expect("at least one core");
                (c, self.cores[c])
            }
        }
    }

    fn commit(&mut self, tx: &'a Transaction, core: usize, start: u64) -> Slot {
        let slot = Slot {
            core,
            start,
            finish: start + tx.t,
        };
        self.cores[core] = slot.finish;
        self.placed.push((tx, slot));
        slot
    }

    fn makespan(&self) -> u64 {
        self.placed.iter().map(|(_, s)| s.finish).max().unwrap_or(0)
    }
}

/// Exact minimal makespan of `txs` on `n_cores` cores: conflicting
/// transactions never overlap, independent ones may.
pub fn makespan_exact(txs: &[Transaction], n_cores: usize) -> Result<u64, ScheduleError> {
    if txs.len() > EXACT_CAP {
        return Err(ScheduleError::InstanceTooLarge {
            size: txs.len(),
            cap: EXACT_CAP,
        });
    }
    check_unique_ids(txs)?;
    Ok(exact::solve(txs, n_cores).makespan)
}

/// List-scheduling makespan for an explicit placement order. Always an upper
/// bound on `makespan_exact`.
pub fn makespan_greedy(
    txs: &[Transaction],
    n_cores: usize,
    order: &[TxId],
) -> Result<u64, ScheduleError> {
    check_unique_ids(txs)?;
    let by_id: BTreeMap<&TxId, &Transaction> = txs.iter().map(|tx| (&tx.id, tx)).collect();
    if order.len() != txs.len() {
        return Err(ScheduleError::BadOrder);
    }
    let mut seen = BTreeSet::new();
    let mut placer = Placer::new(n_cores);
    for id in order {
        let tx = by_id.get(id).ok_or(ScheduleError::BadOrder)?;
        if !seen.insert(id) {
            return Err(ScheduleError::BadOrder);
        }
        let (core, start) = placer.earliest(tx);
        placer.commit(tx, core, start);
    }
    Ok(placer.makespan())
}

/// Shared insertion pass: place candidates in order, drop those that violate
/// the block limit, add precedence edges from every earlier-included
/// conflicting transaction.
fn insert_in_order(order: &[&Transaction], cfg: &MachineConfig) -> Schedule {
    let mut placer = Placer::new(cfg.n_cores);
    let mut included: Vec<Transaction> = Vec::new();
    let mut precedence = BTreeSet::new();
    let mut assignment = BTreeMap::new();
    let mut dropped = BTreeSet::new();
    let mut total: u64 = 0;
    for &tx in order {
        let (core, start) = placer.earliest(tx);
        let fits = match cfg.limit_mode {
            LimitMode::Makespan => start + tx.t <= cfg.block_limit,
            LimitMode::TotalCompute => total + tx.t <= cfg.block_limit,
        };
        if !fits {
            dropped.insert(tx.id.clone());
            continue;
        }
        for prev in &included {
            if conflicts_unchecked(prev, tx) {
                precedence.insert((prev.id.clone(), tx.id.clone()));
            }
        }
        let slot = placer.commit(tx, core, start);
        assignment.insert(tx.id.clone(), slot);
        total += tx.t;
        included.push(tx.clone());
    }
    Schedule::from_parts(included, precedence, assignment, dropped)
}

/// Fee-ordered DAG scheduling: sort by gas price descending (ties by id),
/// insert one at a time, drop what the block limit rejects, keep going.
pub fn schedule_greedy(txs: &[Transaction], cfg: &MachineConfig) -> Result<Schedule, ScheduleError> {
    check_unique_ids(txs)?;
    let mut order: Vec<&Transaction> = txs.iter().collect();
    order.sort_by(|a, b| b.g.cmp(&a.g).then_with(|| a.id.cmp(&b.id)));
    Ok(insert_in_order(&order, cfg))
}

/// The ordering a GREEDY pass would use, exposed so RANDOM's support can be
/// compared against it.
pub fn greedy_order(txs: &[Transaction]) -> Vec<TxId> {
    let mut order: Vec<&Transaction> = txs.iter().collect();
    order.sort_by(|a, b| b.g.cmp(&a.g).then_with(|| a.id.cmp(&b.id)));
    order.into_iter().map(|tx| tx.id.clone()).collect()
}

/// Seeded uniform shuffle followed by the same insertion pass as GREEDY.
pub fn schedule_random(
    txs: &[Transaction],
    cfg: &MachineConfig,
    seed: u64,
) -> Result<Schedule, ScheduleError> {
    check_unique_ids(txs)?;
    Ok(insert_in_order(&random_order(txs, seed), cfg))
}

/// The permutation RANDOM uses for a given seed.
pub fn random_order(txs: &[Transaction], seed: u64) -> Vec<&Transaction> {
    let mut order: Vec<&Transaction> = txs.iter().collect();
    order.sort_by(|a, b| a.id.cmp(&b.id));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    order
}

/// Revenue-maximal feasible schedule by exhaustive subset search; feasibility
/// is checked with the exact makespan solver. Ties break toward the smaller
/// makespan, then the lexicographically smaller id set.
pub fn schedule_opt(txs: &[Transaction], cfg: &MachineConfig) -> Result<Schedule, ScheduleError> {
    if txs.len() > EXACT_CAP {
        return Err(ScheduleError::InstanceTooLarge {
            size: txs.len(),
            cap: EXACT_CAP,
        });
    }
    check_unique_ids(txs)?;

    struct Best {
        revenue: Rational,
        makespan: u64,
        ids: Vec<TxId>,
        subset: Vec<usize>,
        placements: Vec<(usize, u64)>,
    }
    let mut best: Option<Best> = None;

    for mask in 0u32..(1u32 << txs.len()) {
        let subset: Vec<usize> = (0..txs.len()).filter(|i| mask & (1 << i) != 0).collect();
        let revenue: Rational = subset.iter().map(|&i| txs[i].revenue()).sum();
        if let Some(b) = &best {
            if revenue < b.revenue {
                continue;
            }
        }
        let chosen: Vec<Transaction> = subset.iter().map(|&i| txs[i].clone()).collect();
        let total: u64 = chosen.iter().map(|tx| tx.t).sum();
        let solution = exact::solve(&chosen, cfg.n_cores);
        let feasible = match cfg.limit_mode {
            LimitMode::Makespan => solution.makespan <= cfg.block_limit,
            LimitMode::TotalCompute => total <= cfg.block_limit,
        };
        if !feasible {
            continue;
        }
        let mut ids: Vec<TxId> = chosen.iter().map(|tx| tx.id.clone()).collect();
        ids.sort();
        let better = match &best {
            None => true,
            Some(b) => revenue
                .cmp(&b.revenue)
                .then_with(|| b.makespan.cmp(&solution.makespan))
                .then_with(|| b.ids.cmp(&ids))
                .is_gt(),
        };
        if better {
            best = Some(Best {
                revenue,
                makespan: solution.makespan,
                ids,
                subset,
                placements: solution.placements,
            });
        }
    }

    let best = best.expect("empty subset is always feasible");
    let included: Vec<Transaction> = best.subset.iter().map(|&i| txs[i].clone()).collect();
    let mut assignment = BTreeMap::new();
    for (tx, &(core, start)) in included.iter().zip(&best.placements) {
        assignment.insert(
            tx.id.clone(),
            Slot {
                core,
                start,
                finish: start + tx.t,
            },
        );
    }
    // Precedence edges follow realized start order among conflicting pairs.
    let mut precedence = BTreeSet::new();
    for i in 0..included.len() {
        for j in 0..included.len() {
            if i == j {
                continue;
            }
            let (a, b) = (&included[i], &included[j]);
            if conflicts_unchecked(a, b) {
                let (sa, sb) = (&assignment[&a.id], &assignment[&b.id]);
                if (sa.start, &a.id) < (sb.start, &b.id) {
                    precedence.insert((a.id.clone(), b.id.clone()));
                }
            }
        }
    }
    let dropped = txs
        .iter()
        .map(|tx| tx.id.clone())
        .filter(|id| !best.ids.contains(id))
        .collect();
    Ok(Schedule::from_parts(included, precedence, assignment, dropped))
}

/// Scheduling policy selector for ratio computations and simulations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Policy {
    Greedy,
    Random { seeds: Vec<u64> },
    Opt,
}

impl Policy {
    pub fn random_default() -> Self {
        Policy::Random {
            seeds: default_random_seeds(),
        }
    }
}

/// `revenue(policy(T)) / revenue(OPT(T))`; RANDOM uses the mean revenue over
/// its seed list.
pub fn alpha_ratio(
    policy: &Policy,
    txs: &[Transaction],
    cfg: &MachineConfig,
) -> Result<Rational, ScheduleError> {
    let opt = schedule_opt(txs, cfg)?;
    if opt.revenue().is_zero() {
        return Err(ScheduleError::RatioUndefined);
    }
    let revenue = match policy {
        Policy::Greedy => schedule_greedy(txs, cfg)?.revenue().clone(),
        Policy::Opt => opt.revenue().clone(),
        Policy::Random { seeds } => {
            assert!(!seeds.is_empty(), "RANDOM expectation needs seeds");
            let total: Rational = seeds
                .iter()
                .map(|&s| schedule_random(txs, cfg, s).map(|sch| sch.revenue().clone()))
                .collect::<Result<Vec<_>, _>>()?
                .into_iter()
                .sum();
            total / Rational::from_u64(seeds.len() as u64)
        }
    };
    Ok(revenue / opt.revenue())
}

/// Independent feasibility validator: replays every schedule invariant from
/// the raw assignment rather than trusting cached metrics.
pub fn validate_schedule(s: &Schedule, cfg: &MachineConfig) -> Result<(), ScheduleError> {
    let fail = |msg: String| Err(ScheduleError::Invalid(msg));
    check_unique_ids(&s.txs)?;
    let ids: BTreeSet<&TxId> = s.txs.iter().map(|tx| &tx.id).collect();

    for (a, b) in &s.precedence {
        if !ids.contains(a) || !ids.contains(b) {
            return fail(format!("precedence edge ({a}, {b}) references unknown tx"));
        }
    }
    // Acyclicity via Kahn's algorithm.
    let mut indeg: BTreeMap<&TxId, usize> = ids.iter().map(|&id| (id, 0)).collect();
    for (_, b) in &s.precedence {
        *indeg.get_mut(b).unwrap() += 1;
    }
    let mut queue: Vec<&TxId> = indeg
        .iter()
        .filter(|(_, &d)| d == 0)
        .map(|(&id, _)| id)
        .collect();
    let mut visited = 0;
    while let Some(id) = queue.pop() {
        visited += 1;
        for (a, b) in &s.precedence {
            if a == id {
                let d = indeg.get_mut(b).unwrap();
                *d -= 1;
                if *d == 0 {
                    queue.push(b);
                }
            }
        }
    }
    if visited != ids.len() {
        return fail("precedence graph has a cycle".into());
    }

    let mut per_core: BTreeMap<usize, Vec<(u64, u64, &TxId)>> = BTreeMap::new();
    for tx in &s.txs {
        let slot = match s.assignment.get(&tx.id) {
            Some(slot) => slot,
            None => return fail(format!("included tx {} has no assignment", tx.id)),
        };
        if slot.core >= cfg.n_cores {
            return fail(format!("tx {} assigned to core {}", tx.id, slot.core));
        }
        if slot.finish != slot.start + tx.t {
            return fail(format!("tx {} has inconsistent finish time", tx.id));
        }
        per_core
            .entry(slot.core)
            .or_default()
            .push((slot.start, slot.finish, &tx.id));
    }
    for (core, intervals) in per_core.iter_mut() {
        intervals.sort();
        for w in intervals.windows(2) {
            if w[0].1 > w[1].0 {
                return fail(format!(
                    "core {core} occupancy overlap between {} and {}",
                    w[0].2, w[1].2
                ));
            }
        }
    }
    for i in 0..s.txs.len() {
        for j in (i + 1)..s.txs.len() {
            let (a, b) = (&s.txs[i], &s.txs[j]);
            if conflicts_unchecked(a, b) {
                let (sa, sb) = (&s.assignment[&a.id], &s.assignment[&b.id]);
                if sa.start < sb.finish && sb.start < sa.finish {
                    return fail(format!("conflicting txs {} and {} overlap", a.id, b.id));
                }
            }
        }
    }
    for (a, b) in &s.precedence {
        let (sa, sb) = (&s.assignment[a], &s.assignment[b]);
        if sa.finish > sb.start {
            return fail(format!("child {b} starts before parent {a} finishes"));
        }
    }

    let makespan = s.assignment.values().map(|x| x.finish).max().unwrap_or(0);
    if makespan != s.metrics.makespan {
        return fail("cached makespan disagrees with assignment".into());
    }
    let total: u64 = s.txs.iter().map(|tx| tx.t).sum();
    if total != s.metrics.total_compute {
        return fail("cached total compute disagrees with transactions".into());
    }
    let revenue: Rational = s.txs.iter().map(Transaction::revenue).sum();
    if revenue != s.metrics.revenue {
        return fail("cached revenue disagrees with transactions".into());
    }
    match cfg.limit_mode {
        LimitMode::Makespan => {
            if makespan > cfg.block_limit {
                return fail(format!(
                    "makespan {makespan} exceeds block limit {}",
                    cfg.block_limit
                ));
            }
        }
        LimitMode::TotalCompute => {
            if total > cfg.block_limit {
                return fail(format!(
                    "total compute {total} exceeds block limit {}",
                    cfg.block_limit
                ));
            }
        }
    }
    Ok(())
}

//! Worst-case instance family for the GREEDY revenue ratio.
//!
//! The family serializes a high-price chain on one object, follows it with a
//! tiny all-object blocker, and offers per-object filler chains that GREEDY
//! can no longer fit. Compute units are scaled by `ceil(1/eps)` so the
//! blocker's epsilon-sized compute becomes an exact positive integer.
//!
//! Instances here grow past the exhaustive-OPT cap, so optimal revenue is
//! established by certificate instead: an explicit schedule is constructed,
//! replay-validated, and its revenue is matched against a knapsack-style
//! upper bound that holds for every feasible schedule of the family. The
//! certificate errors out rather than returning an unproven value.

use num::bigint::BigInt;
use num::traits::ToPrimitive;

use std::collections::{BTreeMap, BTreeSet};

use crate::model::{conflicts_unchecked, MachineConfig, Transaction, TxId};
use crate::rational::Rational;

use super::{schedule_greedy, validate_schedule, Schedule, ScheduleError, Slot};

#[derive(Clone, Debug)]
pub struct WorstCaseParams {
    /// Block compute limit `G` in unscaled units.
    pub block_limit: u64,
    /// Maximum transaction size `T_max`; must divide `G`.
    pub t_max: u64,
    pub n_cores: usize,
    pub n_objects: usize,
    /// Price perturbation; the chain prices at `1 + eps`, fillers at `1 - eps`.
    pub eps: Rational,
}

#[derive(Clone, Debug)]
pub struct WorstCaseInstance {
    pub txs: Vec<Transaction>,
    pub cfg: MachineConfig,
    /// Compute-unit scale factor `ceil(1/eps)` applied to the whole instance.
    pub scale: u64,
}

#[derive(Clone, Debug)]
pub struct WorstCaseReport {
    pub alpha: Rational,
    /// The closed-form lower bound `(G - T_max) / (G * min(n, O))`.
    pub bound: Rational,
    pub greedy_revenue: Rational,
    pub opt_revenue: Rational,
    pub greedy: Schedule,
    pub opt: Schedule,
}

fn object_name(j: usize) -> String {
    format!("o{j:02}")
}

/// `(G - T_max) / (G * min(n, O))`.
pub fn greedy_alpha_lower_bound(
    block_limit: u64,
    t_max: u64,
    n_cores: usize,
    n_objects: usize,
) -> Rational {
    let m = n_cores.min(n_objects) as u64;
    Rational::from_u64(block_limit - t_max) / Rational::from_u64(block_limit * m)
}

/// Emits the worst-case transaction family: the `1+eps` chain summing to
/// `G - T_max` on the first object, the minimal all-object blocker at price
/// one, and `G / T_max` filler copies per object at `1 - eps`.
pub fn gen_greedy_worstcase(params: &WorstCaseParams) -> Result<WorstCaseInstance, ScheduleError> {
    if params.n_objects == 0 || params.n_objects > 32 {
        return Err(ScheduleError::NoObjects);
    }
    if params.t_max == 0
        || params.t_max > params.block_limit
        || !params.block_limit.is_multiple_of(params.t_max)
    {
        return Err(ScheduleError::TMaxNotDivisor);
    }
    if !params.eps.is_positive() || params.eps >= Rational::one() {
        return Err(ScheduleError::BadEps);
    }
    // scale = ceil(1/eps), so ceil(eps * scale) >= 1 is a valid compute.
    let (num, den) = (params.eps.numer().clone(), params.eps.denom().clone());
    let scale_big: BigInt = (&den + &num - BigInt::from(1)) / &num;
    let scale = scale_big.to_u64().ok_or(ScheduleError::BadEps)?;
    let blocker_t = ((&num * BigInt::from(scale) + &den - BigInt::from(1)) / &den)
        .to_u64()
        .ok_or(ScheduleError::BadEps)?;

    let one = Rational::one();
    let price_hi = &one + &params.eps;
    let price_lo = &one - &params.eps;
    let chunk = params.t_max * scale;

    let mut txs = Vec::new();
    let chain_len = (params.block_limit - params.t_max) / params.t_max;
    for k in 0..chain_len {
        txs.push(Transaction::writer(
            format!("s{k:02}"),
            chunk,
            price_hi.clone(),
            [object_name(1)],
        ));
    }
    let all_objects: Vec<String> = (1..=params.n_objects).map(object_name).collect();
    txs.push(Transaction::writer("m", blocker_t, one, all_objects));
    let copies = params.block_limit / params.t_max;
    for j in 1..=params.n_objects {
        for k in 0..copies {
            txs.push(Transaction::writer(
                format!("n{j:02}-{k:02}"),
                chunk,
                price_lo.clone(),
                [object_name(j)],
            ));
        }
    }
    Ok(WorstCaseInstance {
        txs,
        cfg: MachineConfig::new(params.n_cores, params.block_limit * scale),
        scale,
    })
}

/// Explicit optimal schedule for the family plus the matching revenue upper
/// bound. Returns an error when the certificate cannot be closed.
fn certificate_opt(
    params: &WorstCaseParams,
    instance: &WorstCaseInstance,
) -> Result<(Schedule, Rational), ScheduleError> {
    let m = params.n_cores.min(params.n_objects);
    let scale = instance.scale;
    let chunk = params.t_max * scale;
    let chain_compute = (params.block_limit - params.t_max) * scale;
    let g_scaled = params.block_limit * scale;
    let copies = params.block_limit / params.t_max;

    let by_id: BTreeMap<&TxId, &Transaction> =
        instance.txs.iter().map(|tx| (&tx.id, tx)).collect();
    let mut included: Vec<Transaction> = Vec::new();
    let mut assignment: BTreeMap<TxId, Slot> = BTreeMap::new();
    let mut place = |id: String, core: usize, start: u64| {
        let tx = by_id[&TxId::new(id)];
        included.push(tx.clone());
        assignment.insert(
            tx.id.clone(),
            Slot {
                core,
                start,
                finish: start + tx.t,
            },
        );
    };

    // Core 0 carries the high-price chain, topped up with one filler copy.
    let chain_len = (params.block_limit - params.t_max) / params.t_max;
    for k in 0..chain_len {
        place(format!("s{k:02}"), 0, k * chunk);
    }
    place("n01-00".into(), 0, chain_compute);
    // Remaining cores run full filler chains on their own objects.
    for core in 1..m {
        let j = core + 1;
        for k in 0..copies {
            place(format!("n{j:02}-{k:02}"), core, k * chunk);
        }
    }

    let mut precedence = BTreeSet::new();
    for a in &included {
        for b in &included {
            if a.id != b.id && conflicts_unchecked(a, b) {
                let (sa, sb) = (&assignment[&a.id], &assignment[&b.id]);
                if (sa.start, &a.id) < (sb.start, &b.id) {
                    precedence.insert((a.id.clone(), b.id.clone()));
                }
            }
        }
    }
    let included_ids: BTreeSet<TxId> = included.iter().map(|tx| tx.id.clone()).collect();
    let dropped = instance
        .txs
        .iter()
        .map(|tx| tx.id.clone())
        .filter(|id| !included_ids.contains(id))
        .collect();
    let schedule = Schedule::from_parts(included, precedence, assignment, dropped);
    validate_schedule(&schedule, &instance.cfg)?;

    // Upper bound, blocker excluded: compute is partitioned by object and
    // capped per core, so at most min(n, O) * G * scale units fit; the
    // high-price chain is the entire 1+eps supply, the rest fills at 1-eps.
    let price_hi = Rational::one() + &params.eps;
    let price_lo = Rational::one() - &params.eps;
    let capacity = Rational::from_u64(m as u64 * g_scaled);
    let ub_no_blocker = &price_hi * Rational::from_u64(chain_compute)
        + &price_lo * (&capacity - Rational::from_u64(chain_compute));

    // Upper bound, blocker included: every other transaction must dodge the
    // blocker interval, and all of them are exact `T_max * scale` chunks, so
    // each chain fits at most floor((G*scale - t_b) / chunk) of them.
    let blocker = by_id[&TxId::new("m")];
    let per_chain = (g_scaled - blocker.t) / chunk;
    let cap2 = Rational::from_u64(m as u64 * per_chain * chunk);
    let hi_supply = Rational::from_u64(chain_compute).min(cap2.clone());
    let ub_with_blocker =
        Rational::from_u64(blocker.t) + &price_hi * &hi_supply + &price_lo * (&cap2 - &hi_supply);

    let ub = ub_no_blocker.clone().max(ub_with_blocker);
    if schedule.revenue() != &ub {
        return Err(ScheduleError::CertificateGap {
            got: schedule.revenue().clone(),
            bound: ub,
        });
    }
    Ok((schedule, ub))
}

/// Evaluates GREEDY against the certified optimum on the generated instance.
pub fn worstcase_alpha(params: &WorstCaseParams) -> Result<WorstCaseReport, ScheduleError> {
    let instance = gen_greedy_worstcase(params)?;
    let greedy = schedule_greedy(&instance.txs, &instance.cfg)?;
    validate_schedule(&greedy, &instance.cfg)?;
    let (opt, opt_revenue) = certificate_opt(params, &instance)?;
    if opt_revenue.is_zero() {
        return Err(ScheduleError::RatioUndefined);
    }
    let greedy_revenue = greedy.revenue().clone();
    Ok(WorstCaseReport {
        alpha: &greedy_revenue / &opt_revenue,
        bound: greedy_alpha_lower_bound(
            params.block_limit,
            params.t_max,
            params.n_cores,
            params.n_objects,
        ),
        greedy_revenue,
        opt_revenue,
        greedy,
        opt,
    })
}

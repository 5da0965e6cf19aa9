//! Brute-force reference implementations for test suites (feature `testkit`).
//!
//! These deliberately share no code with the fast paths they check:
//! the makespan oracle enumerates every total order and list-schedules it
//! with a first-free-core rule, and the Shapley oracle averages marginal
//! contributions over all |T|! arrival orders.

use itertools::Itertools;

use crate::model::{conflicts, Transaction, TxId};
use crate::rational::Rational;

/// Minimal makespan by exhausting all |S|! placement orders. Feasible up to
/// eight transactions or so.
pub fn makespan_bruteforce(txs: &[Transaction], n_cores: usize) -> u64 {
    assert!(txs.len() <= 8, "brute-force oracle capped at 8 transactions");
    assert!(n_cores >= 1);
    if txs.is_empty() {
        return 0;
    }
    (0..txs.len())
        .permutations(txs.len())
        .map(|order| list_schedule_first_free(txs, n_cores, &order))
        .min()
        .expect("at least one permutation")
}

fn list_schedule_first_free(txs: &[Transaction], n_cores: usize, order: &[usize]) -> u64 {
    let mut cores = vec![0u64; n_cores];
    let mut finish: Vec<Option<u64>> = vec![None; txs.len()];
    let mut spans: Vec<Option<(u64, u64)>> = vec![None; txs.len()];
    for &i in order {
        let mut start = 0;
        for (j, span) in spans.iter().enumerate() {
            if let Some((_, f)) = span {
                if conflicts(&txs[i], &txs[j]).unwrap() {
                    start = start.max(*f);
                }
            }
        }
        // first core free by `start`, otherwise the earliest-free core
        let core = match cores.iter().position(|&free| free <= start) {
            Some(c) => c,
            None => {
                let c = cores
                    .iter()
                    .enumerate()
                    .min_by_key(|&(idx, &free)| (free, idx))
                    .map(|(idx, _)| idx)
                    .unwrap();
                start = cores[c];
                c
            }
        };
        let end = start + txs[i].t;
        cores[core] = end;
        spans[i] = Some((start, end));
        finish[i] = Some(end);
    }
    finish.into_iter().flatten().max().unwrap_or(0)
}

/// Shapley value as the average marginal contribution over all arrival
/// orders, with makespans from the brute-force oracle. Feasible to |T| = 6.
pub fn shapley_permutation_oracle(txs: &[Transaction], tx: &TxId, n_cores: usize) -> Rational {
    assert!(txs.len() <= 6, "permutation oracle capped at 6 transactions");
    let idx = txs
        .iter()
        .position(|t| &t.id == tx)
        .expect("tx must be in the set");
    let mut total = Rational::zero();
    let mut count = 0u64;
    for order in (0..txs.len()).permutations(txs.len()) {
        let pos = order.iter().position(|&i| i == idx).unwrap();
        let before: Vec<Transaction> = order[..pos].iter().map(|&i| txs[i].clone()).collect();
        let mut with: Vec<Transaction> = before.clone();
        with.push(txs[idx].clone());
        let marginal = makespan_bruteforce(&with, n_cores) - makespan_bruteforce(&before, n_cores);
        total = total + Rational::from_u64(marginal);
        count += 1;
    }
    total / Rational::from_u64(count)
}

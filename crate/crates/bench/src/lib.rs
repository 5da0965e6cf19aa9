//! Shared instance builders for the benchmark targets.

use parafee_core::rational::Rational;
use parafee_core::Transaction;

/// Two write-chains interleaved with independent fillers; small enough for
/// the exact solver, dense enough in conflicts to make it work.
pub fn chained_instance(n: usize) -> Vec<Transaction> {
    (0..n)
        .map(|i| {
            let object = match i % 3 {
                0 => "hot",
                1 => "warm",
                _ => return Transaction::writer(format!("t{i:02}"), 2 + (i as u64 % 3), Rational::one(), [format!("solo{i}")]),
            };
            Transaction::writer(format!("t{i:02}"), 2 + (i as u64 % 4), Rational::one(), [object])
        })
        .collect()
}

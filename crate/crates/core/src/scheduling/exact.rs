//! Exact minimal-makespan solver for conflict-constrained parallel schedules.
//!
//! Depth-first branch-and-bound over semi-active schedules: transactions are
//! placed one at a time at their earliest feasible start. Completeness follows
//! from the standard dominance argument for identical machines — sorting any
//! feasible schedule by start time and re-placing each transaction at its
//! earliest feasible start never delays it, so some placement order attains
//! the optimum.
//!
//! Pruning uses three lower bounds (average remaining load per core, serial
//! write-clique chains per object, single-transaction horizons) plus a
//! memo table keyed on the shift-normalized search state. Identical
//! transactions (same compute and declared sets) are branched once per group.

use std::collections::HashMap;

use crate::model::{conflicts_unchecked, Transaction};

pub(crate) struct ExactSolution {
    pub makespan: u64,
    /// `(core, start)` per transaction, in input order.
    pub placements: Vec<(usize, u64)>,
}

struct Solver<'a> {
    txs: &'a [Transaction],
    n_cores: usize,
    conflict_mask: Vec<u32>,
    /// Group representative index for identical transactions.
    group: Vec<usize>,
    full_mask: u32,
    memo: HashMap<Vec<u64>, u64>,
}

#[derive(Clone)]
struct Node {
    placed_mask: u32,
    /// Finish time per placed transaction (0 when unplaced).
    finish: Vec<u64>,
    /// Busy-until time per core.
    cores: Vec<u64>,
}

impl Node {
    fn root(n_txs: usize, n_cores: usize) -> Self {
        Node {
            placed_mask: 0,
            finish: vec![0; n_txs],
            cores: vec![0; n_cores],
        }
    }

    fn current_makespan(&self) -> u64 {
        self.cores.iter().copied().max().unwrap_or(0)
    }
}

impl<'a> Solver<'a> {
    fn new(txs: &'a [Transaction], n_cores: usize) -> Self {
        let n = txs.len();
        let mut conflict_mask = vec![0u32; n];
        for i in 0..n {
            for j in (i + 1)..n {
                if conflicts_unchecked(&txs[i], &txs[j]) {
                    conflict_mask[i] |= 1 << j;
                    conflict_mask[j] |= 1 << i;
                }
            }
        }
        let mut group = vec![0usize; n];
        for i in 0..n {
            group[i] = (0..i)
                .find(|&j| {
                    txs[j].t == txs[i].t
                        && txs[j].reads == txs[i].reads
                        && txs[j].writes == txs[i].writes
                })
                .unwrap_or(i);
        }
        Solver {
            txs,
            n_cores,
            conflict_mask,
            group,
            full_mask: if n == 32 { u32::MAX } else { (1u32 << n) - 1 },
            memo: HashMap::new(),
        }
    }

    /// Earliest time all placed conflictors of `i` have finished.
    fn conflict_free_time(&self, node: &Node, i: usize) -> u64 {
        let mut t = 0;
        let mut mask = self.conflict_mask[i] & node.placed_mask;
        while mask != 0 {
            let j = mask.trailing_zeros() as usize;
            mask &= mask - 1;
            t = t.max(node.finish[j]);
        }
        t
    }

    /// Best-fit placement of `i` at its earliest feasible start.
    fn place(&self, node: &Node, i: usize) -> (Node, usize, u64) {
        let cft = self.conflict_free_time(node, i);
        let mut chosen: Option<usize> = None;
        for (c, &free) in node.cores.iter().enumerate() {
            if free <= cft {
                // latest free time wins; earlier index breaks ties
                match chosen {
                    Some(b) if node.cores[b] >= free => {}
                    _ => chosen = Some(c),
                }
            }
        }
        let (core, start) = match chosen {
            Some(c) => (c, cft),
            None => {
                let c = node
                    .cores
                    .iter()
                    .enumerate()
                    .min_by_key(|&(idx, &free)| (free, idx))
                    .map(|(idx, _)| idx)
                    .expect("at least one core");
                (c, node.cores[c])
            }
        };
        let mut next = node.clone();
        next.placed_mask |= 1 << i;
        next.finish[i] = start + self.txs[i].t;
        next.cores[core] = start + self.txs[i].t;
        (next, core, start)
    }

    fn memo_key(&self, node: &Node) -> (Vec<u64>, u64) {
        let shift = node.cores.iter().copied().min().unwrap_or(0);
        let mut key = Vec::with_capacity(1 + self.n_cores + self.txs.len());
        key.push(node.placed_mask as u64);
        let mut cores: Vec<u64> = node.cores.iter().map(|&c| c - shift).collect();
        cores.sort_unstable();
        key.extend(cores);
        for i in 0..self.txs.len() {
            if node.placed_mask & (1 << i) == 0 {
                key.push(self.conflict_free_time(node, i).saturating_sub(shift));
            }
        }
        (key, shift)
    }

    fn lower_bound(&self, node: &Node) -> u64 {
        let mut lb = node.current_makespan();
        let min_free = node.cores.iter().copied().min().unwrap_or(0);

        let remaining: u64 = (0..self.txs.len())
            .filter(|&i| node.placed_mask & (1 << i) == 0)
            .map(|i| self.txs[i].t)
            .sum();
        let busy: u64 = node.cores.iter().sum();
        lb = lb.max((busy + remaining).div_ceil(self.n_cores as u64));

        for i in 0..self.txs.len() {
            if node.placed_mask & (1 << i) == 0 {
                let est = self.conflict_free_time(node, i).max(min_free);
                lb = lb.max(est + self.txs[i].t);
            }
        }

        // Serial chains: remaining writers of one object pairwise conflict.
        let mut objects: Vec<&crate::model::ObjectId> = Vec::new();
        for i in 0..self.txs.len() {
            if node.placed_mask & (1 << i) == 0 {
                objects.extend(self.txs[i].writes.iter());
            }
        }
        objects.sort_unstable();
        objects.dedup();
        for o in objects {
            let mut total = 0u64;
            let mut earliest = u64::MAX;
            for i in 0..self.txs.len() {
                if node.placed_mask & (1 << i) == 0 && self.txs[i].writes.contains(o) {
                    total += self.txs[i].t;
                    earliest = earliest.min(self.conflict_free_time(node, i).max(min_free));
                }
            }
            if total > 0 {
                lb = lb.max(earliest + total);
            }
        }
        lb
    }

    /// Minimal achievable final makespan from `node`, or `None` when it is
    /// provably `>= ub`. Only exact values below `ub` enter the memo.
    fn dfs(&mut self, node: &Node, ub: u64) -> Option<u64> {
        if node.placed_mask == self.full_mask {
            return Some(node.current_makespan());
        }
        let (key, shift) = self.memo_key(node);
        if let Some(&rel) = self.memo.get(&key) {
            let v = rel + shift;
            return if v < ub { Some(v) } else { None };
        }
        if self.lower_bound(node) >= ub {
            return None;
        }
        let mut best: Option<u64> = None;
        let mut bound = ub;
        let mut seen_groups = 0u32;
        for i in 0..self.txs.len() {
            if node.placed_mask & (1 << i) != 0 {
                continue;
            }
            let rep = self.group[i];
            if seen_groups & (1 << rep) != 0 {
                continue;
            }
            seen_groups |= 1 << rep;
            let (child, _, _) = self.place(node, i);
            if let Some(v) = self.dfs(&child, bound) {
                best = Some(v);
                bound = v;
            }
        }
        if let Some(v) = best {
            debug_assert!(v >= shift);
            self.memo.insert(key, v - shift);
        }
        best
    }

    fn greedy_upper_bound(&self) -> u64 {
        // LPT list schedule seeds the search.
        let mut order: Vec<usize> = (0..self.txs.len()).collect();
        order.sort_by(|&a, &b| {
            self.txs[b]
                .t
                .cmp(&self.txs[a].t)
                .then_with(|| self.txs[a].id.cmp(&self.txs[b].id))
        });
        let mut node = Node::root(self.txs.len(), self.n_cores);
        for i in order {
            node = self.place(&node, i).0;
        }
        node.current_makespan()
    }

    fn solve(mut self) -> ExactSolution {
        if self.txs.is_empty() {
            return ExactSolution {
                makespan: 0,
                placements: Vec::new(),
            };
        }
        let root = Node::root(self.txs.len(), self.n_cores);
        let ub = self.greedy_upper_bound();
        let optimal = match self.dfs(&root, ub) {
            Some(v) => v,
            None => ub, // the greedy seed was already optimal
        };

        // Replay: commit, in canonical order, the first child that still
        // reaches the optimum. The memo is hot, so this is cheap.
        let mut node = root;
        let mut placements = vec![(0usize, 0u64); self.txs.len()];
        while node.placed_mask != self.full_mask {
            let mut committed = false;
            #[allow(clippy::needless_range_loop)] // index drives mask bits too
            for i in 0..self.txs.len() {
                if node.placed_mask & (1 << i) != 0 {
                    continue;
                }
                let (child, core, start) = self.place(&node, i);
                if self.dfs(&child, optimal + 1) == Some(optimal) {
                    placements[i] = (core, start);
                    node = child;
                    committed = true;
                    break;
                }
            }
            assert!(committed, "optimal schedule replay must make progress");
        }
        debug_assert_eq!(node.current_makespan(), optimal);
        ExactSolution {
            makespan: optimal,
            placements,
        }
    }
}

/// Solves the minimal-makespan problem exactly. Caller enforces the size cap.
pub(crate) fn solve(txs: &[Transaction], n_cores: usize) -> ExactSolution {
    assert!(n_cores >= 1, "need at least one core");
    assert!(txs.len() <= 20, "exact solver instance too large");
    Solver::new(txs, n_cores).solve()
}

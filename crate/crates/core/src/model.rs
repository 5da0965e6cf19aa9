//! Core domain vocabulary: transactions, objects, machine and retention
//! configuration, and the conflict relation.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rational::Rational;

/// Identifier of an on-chain object (the grain of conflict detection).
/// Total ordering on the identifier backs all tie-breaking.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectId(pub String);

impl ObjectId {
    pub fn new(id: impl Into<String>) -> Self {
        ObjectId(id.into())
    }
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ObjectId {
    fn from(s: &str) -> Self {
        ObjectId(s.to_owned())
    }
}

impl From<String> for ObjectId {
    fn from(s: String) -> Self {
        ObjectId(s)
    }
}

/// Transaction label, unique within a scenario; ascending id order is the
/// universal tie-break.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TxId(pub String);

impl TxId {
    pub fn new(id: impl Into<String>) -> Self {
        TxId(id.into())
    }
}

impl fmt::Display for TxId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for TxId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for TxId {
    fn from(s: &str) -> Self {
        TxId(s.to_owned())
    }
}

impl From<String> for TxId {
    fn from(s: String) -> Self {
        TxId(s)
    }
}

/// A transaction as seen by the scheduler: compute demand, pricing, and the
/// declared (possibly conservative) object footprint.
///
/// `contingent_reads`/`contingent_writes` mark declared objects whose use
/// depends on pre-execution state; `t_base` is the compute consumed when the
/// contingent branch is skipped.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "TxWire")]
pub struct Transaction {
    pub id: TxId,
    /// Compute units on the standard machine, an exact positive integer.
    pub t: u64,
    /// Gas price per compute unit.
    pub g: Rational,
    /// Priority multiplier, at least one.
    pub pi: Rational,
    pub reads: BTreeSet<ObjectId>,
    pub writes: BTreeSet<ObjectId>,
    pub contingent_reads: BTreeSet<ObjectId>,
    pub contingent_writes: BTreeSet<ObjectId>,
    /// Compute consumed when under-executing; equals `t` when nothing is
    /// contingent.
    pub t_base: u64,
}

/// Wire form: `g` and `pi` default to one, `t_base` to `t`, sets to empty.
#[derive(Deserialize)]
struct TxWire {
    id: TxId,
    t: u64,
    #[serde(default)]
    g: Option<Rational>,
    #[serde(default)]
    pi: Option<Rational>,
    #[serde(default)]
    reads: BTreeSet<ObjectId>,
    #[serde(default)]
    writes: BTreeSet<ObjectId>,
    #[serde(default)]
    contingent_reads: BTreeSet<ObjectId>,
    #[serde(default)]
    contingent_writes: BTreeSet<ObjectId>,
    #[serde(default)]
    t_base: Option<u64>,
}

impl From<TxWire> for Transaction {
    fn from(w: TxWire) -> Self {
        Transaction {
            id: w.id,
            t: w.t,
            g: w.g.unwrap_or_else(Rational::one),
            pi: w.pi.unwrap_or_else(Rational::one),
            reads: w.reads,
            writes: w.writes,
            contingent_reads: w.contingent_reads,
            contingent_writes: w.contingent_writes,
            t_base: w.t_base.unwrap_or(w.t),
        }
    }
}

impl fmt::Debug for Transaction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}(t={}, g={}, R={:?}, W={:?})",
            self.id, self.t, self.g, self.reads, self.writes
        )
    }
}

impl Transaction {
    /// A non-contingent transaction that only writes the given objects.
    /// This is the `tx ≃ (t, g, {o...})` shape most worked examples use.
    pub fn writer<I, O>(id: impl Into<TxId>, t: u64, g: Rational, objs: I) -> Self
    where
        I: IntoIterator<Item = O>,
        O: Into<ObjectId>,
    {
        Transaction {
            id: id.into(),
            t,
            g,
            pi: Rational::one(),
            reads: BTreeSet::new(),
            writes: objs.into_iter().map(Into::into).collect(),
            contingent_reads: BTreeSet::new(),
            contingent_writes: BTreeSet::new(),
            t_base: t,
        }
    }

    pub fn with_reads<I, O>(mut self, objs: I) -> Self
    where
        I: IntoIterator<Item = O>,
        O: Into<ObjectId>,
    {
        self.reads = objs.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_priority(mut self, pi: Rational) -> Self {
        self.pi = pi;
        self
    }

    pub fn with_contingency<I, J, O, P>(mut self, creads: I, cwrites: J, t_base: u64) -> Self
    where
        I: IntoIterator<Item = O>,
        J: IntoIterator<Item = P>,
        O: Into<ObjectId>,
        P: Into<ObjectId>,
    {
        self.contingent_reads = creads.into_iter().map(Into::into).collect();
        self.contingent_writes = cwrites.into_iter().map(Into::into).collect();
        self.t_base = t_base;
        self
    }

    /// All declared objects, read or written.
    pub fn declared(&self) -> BTreeSet<ObjectId> {
        self.reads.union(&self.writes).cloned().collect()
    }

    /// Declared objects that are guaranteed to be used on every path.
    pub fn deterministic(&self) -> BTreeSet<ObjectId> {
        self.declared()
            .into_iter()
            .filter(|o| !self.contingent_reads.contains(o) && !self.contingent_writes.contains(o))
            .collect()
    }

    pub fn is_contingent_declared(&self) -> bool {
        !self.contingent_reads.is_empty() || !self.contingent_writes.is_empty()
    }

    /// Revenue contribution at attainable pricing: `g * t`.
    pub fn revenue(&self) -> Rational {
        &self.g * Rational::from_u64(self.t)
    }
}

/// One invariant violation found on a transaction. Violations are data the
/// caller can surface; they are not errors.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum TxViolation {
    ContingentReadNotDeclared(ObjectId),
    ContingentWriteNotDeclared(ObjectId),
    ZeroCompute,
    ZeroBaseCompute,
    BaseComputeExceedsTotal { t_base: u64, t: u64 },
    NonContingentBaseMismatch { t_base: u64, t: u64 },
    NegativeGasPrice,
    PriorityBelowOne,
}

impl fmt::Display for TxViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TxViolation::ContingentReadNotDeclared(o) => {
                write!(f, "contingent read {o} not declared in reads")
            }
            TxViolation::ContingentWriteNotDeclared(o) => {
                write!(f, "contingent write {o} not declared in writes")
            }
            TxViolation::ZeroCompute => write!(f, "compute t must be positive"),
            TxViolation::ZeroBaseCompute => write!(f, "t_base must be positive"),
            TxViolation::BaseComputeExceedsTotal { t_base, t } => {
                write!(f, "t_base {t_base} exceeds t {t}")
            }
            TxViolation::NonContingentBaseMismatch { t_base, t } => {
                write!(f, "non-contingent tx must have t_base = t ({t_base} != {t})")
            }
            TxViolation::NegativeGasPrice => write!(f, "gas price must be non-negative"),
            TxViolation::PriorityBelowOne => write!(f, "priority multiplier must be >= 1"),
        }
    }
}

/// Checks every `Transaction` invariant; an empty list means valid.
pub fn validate_transaction(tx: &Transaction) -> Vec<TxViolation> {
    let mut out = Vec::new();
    for o in &tx.contingent_reads {
        if !tx.reads.contains(o) {
            out.push(TxViolation::ContingentReadNotDeclared(o.clone()));
        }
    }
    for o in &tx.contingent_writes {
        if !tx.writes.contains(o) {
            out.push(TxViolation::ContingentWriteNotDeclared(o.clone()));
        }
    }
    if tx.t == 0 {
        out.push(TxViolation::ZeroCompute);
    }
    if tx.t_base == 0 {
        out.push(TxViolation::ZeroBaseCompute);
    }
    if tx.t_base > tx.t {
        out.push(TxViolation::BaseComputeExceedsTotal {
            t_base: tx.t_base,
            t: tx.t,
        });
    }
    if !tx.is_contingent_declared() && tx.t_base != tx.t {
        out.push(TxViolation::NonContingentBaseMismatch {
            t_base: tx.t_base,
            t: tx.t,
        });
    }
    if tx.g.is_negative() {
        out.push(TxViolation::NegativeGasPrice);
    }
    if tx.pi < Rational::one() {
        out.push(TxViolation::PriorityBelowOne);
    }
    out
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("self-conflict undefined for transaction {0}")]
    SelfConflict(TxId),
    #[error("duplicate transaction id {0}")]
    DuplicateTxId(TxId),
    #[error("machine config invalid: {0}")]
    BadMachineConfig(String),
    #[error("retention ratio must satisfy 0 < gamma <= 1, got {0}")]
    BadRetention(Rational),
}

/// Read/write footprints conflict when they share an object and at least one
/// access is a write.
pub fn sets_conflict(
    reads_a: &BTreeSet<ObjectId>,
    writes_a: &BTreeSet<ObjectId>,
    reads_b: &BTreeSet<ObjectId>,
    writes_b: &BTreeSet<ObjectId>,
) -> bool {
    writes_a.iter().any(|o| reads_b.contains(o) || writes_b.contains(o))
        || writes_b.iter().any(|o| reads_a.contains(o))
}

/// Whether two distinct transactions conflict on their declared sets.
pub fn conflicts(a: &Transaction, b: &Transaction) -> Result<bool, ModelError> {
    if a.id == b.id {
        return Err(ModelError::SelfConflict(a.id.clone()));
    }
    Ok(sets_conflict(&a.reads, &a.writes, &b.reads, &b.writes))
}

/// `conflicts` for transactions already known to be distinct, as inside
/// schedulers that validated ids up front.
pub(crate) fn conflicts_unchecked(a: &Transaction, b: &Transaction) -> bool {
    sets_conflict(&a.reads, &a.writes, &b.reads, &b.writes)
}

/// How the block limit `G` constrains a schedule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitMode {
    /// Schedules must finish within `G` wall-clock compute units.
    #[default]
    Makespan,
    /// The compute units of included transactions must sum to at most `G`.
    TotalCompute,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MachineConfig {
    pub n_cores: usize,
    pub block_limit: u64,
    #[serde(default)]
    pub limit_mode: LimitMode,
}

impl MachineConfig {
    pub fn new(n_cores: usize, block_limit: u64) -> Self {
        MachineConfig {
            n_cores,
            block_limit,
            limit_mode: LimitMode::Makespan,
        }
    }

    pub fn with_limit_mode(mut self, mode: LimitMode) -> Self {
        self.limit_mode = mode;
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.n_cores == 0 {
            return Err(ModelError::BadMachineConfig("n_cores must be >= 1".into()));
        }
        if self.block_limit == 0 {
            return Err(ModelError::BadMachineConfig(
                "block_limit must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Retention ratio `gamma = r/f`: the fraction of each paid fee the scheduler
/// keeps; the rest is burned.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetentionConfig {
    pub gamma: Rational,
}

impl RetentionConfig {
    pub fn new(gamma: Rational) -> Result<Self, ModelError> {
        let cfg = RetentionConfig { gamma };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !self.gamma.is_positive() || self.gamma > Rational::one() {
            return Err(ModelError::BadRetention(self.gamma.clone()));
        }
        Ok(())
    }
}

/// Errors if the slice contains two transactions with the same id.
pub fn check_unique_ids(txs: &[Transaction]) -> Result<(), ModelError> {
    let mut seen = BTreeSet::new();
    for tx in txs {
        if !seen.insert(&tx.id) {
            return Err(ModelError::DuplicateTxId(tx.id.clone()));
        }
    }
    Ok(())
}

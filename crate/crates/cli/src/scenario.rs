//! Scenario files: the JSON surface of the laboratory.
//!
//! A scenario declares its objects, transactions (with optional contingency
//! rules), machine and retention configuration, the risk division and
//! scheduler prior, optional OW-TFM pricing, optional shill pools, and the
//! seed list used wherever randomness is sampled. Loading validates every
//! cross-reference and model invariant and reports an itemized rejection.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use parafee_core::execution::{ContingencyRule, Guard, State};
use parafee_core::fees::{PricingRule, RiskDivision, SchedulerPrior};
use parafee_core::model::{validate_transaction, MachineConfig, RetentionConfig};
use parafee_core::owtfm::{ObjectPriceBook, PricePumpScenario, UpdateVariant};
use parafee_core::rational::Rational;
use parafee_core::{ObjectId, Transaction, TxId};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TxEntry {
    #[serde(flatten)]
    pub tx: Transaction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<RuleSpec>,
}

/// Contingency rule as written in scenario files; the owning transaction id
/// is implied by position.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RuleSpec {
    pub guard: Guard,
    #[serde(default)]
    pub on_full: BTreeMap<ObjectId, i64>,
    #[serde(default)]
    pub on_under: BTreeMap<ObjectId, i64>,
}

impl RuleSpec {
    pub fn into_rule(self, tx_id: &TxId) -> ContingencyRule {
        ContingencyRule {
            tx_id: tx_id.clone(),
            guard: self.guard,
            on_full: self.on_full,
            on_under: self.on_under,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ShillPools {
    #[serde(default)]
    pub user: Vec<Transaction>,
    #[serde(default)]
    pub scheduler: Vec<Transaction>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OwtfmConfig {
    pub eta: Rational,
    #[serde(default)]
    pub update_variant: UpdateVariant,
    /// Posted prices; objects omitted here default to price one.
    #[serde(default)]
    pub prices: BTreeMap<ObjectId, Rational>,
    #[serde(default)]
    pub targets: BTreeMap<ObjectId, Rational>,
    /// Per-block demand as lists of transaction ids; absent means every
    /// transaction in every block.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demand: Option<Vec<Vec<TxId>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub price_pump: Option<PricePumpScenario>,
}

/// Which pricing rule fee-level commands and checks should use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PricingKind {
    #[default]
    ComputeProportional,
    TpmDerived,
    ObjectWeighted,
}

fn default_division() -> RiskDivision {
    RiskDivision::even_steven()
}

fn default_prior() -> SchedulerPrior {
    SchedulerPrior::Median
}

fn default_seeds() -> Vec<u64> {
    parafee_core::scheduling::default_random_seeds()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub objects: Vec<ObjectId>,
    pub transactions: Vec<TxEntry>,
    pub machine: MachineConfig,
    pub retention: RetentionConfig,
    #[serde(default = "default_division")]
    pub division: RiskDivision,
    #[serde(default = "default_prior")]
    pub prior: SchedulerPrior,
    #[serde(default)]
    pub pricing: PricingKind,
    #[serde(default)]
    pub initial_state: BTreeMap<ObjectId, i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub owtfm: Option<OwtfmConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shill_pools: Option<ShillPools>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
}

impl Scenario {
    /// The honest (scheduled) transactions.
    pub fn txs(&self) -> Vec<Transaction> {
        self.transactions.iter().map(|e| e.tx.clone()).collect()
    }

    /// Contingency rules per transaction; entries without an explicit rule
    /// get the trivial always-full rule.
    pub fn rules(&self) -> BTreeMap<TxId, ContingencyRule> {
        self.transactions
            .iter()
            .map(|e| {
                let rule = match &e.rule {
                    Some(spec) => spec.clone().into_rule(&e.tx.id),
                    None => ContingencyRule::trivial(&e.tx),
                };
                (e.tx.id.clone(), rule)
            })
            .collect()
    }

    pub fn initial_state(&self) -> State {
        State::from_values(self.initial_state.clone())
    }

    pub fn user_pool(&self) -> &[Transaction] {
        self.shill_pools.as_ref().map_or(&[], |p| &p.user)
    }

    pub fn scheduler_pool(&self) -> &[Transaction] {
        self.shill_pools.as_ref().map_or(&[], |p| &p.scheduler)
    }

    /// All transactions in the file, scheduled and pooled alike.
    pub fn total_tx_count(&self) -> usize {
        self.transactions.len() + self.user_pool().len() + self.scheduler_pool().len()
    }

    /// Price book from the OW-TFM section; unlisted objects open at price 1.
    pub fn price_book(&self) -> Option<Result<ObjectPriceBook, parafee_core::owtfm::OwtfmError>> {
        let cfg = self.owtfm.as_ref()?;
        let mut prices = cfg.prices.clone();
        for o in &self.objects {
            prices.entry(o.clone()).or_insert_with(Rational::one);
        }
        Some(ObjectPriceBook::new(
            prices,
            cfg.targets.clone(),
            cfg.eta.clone(),
            cfg.update_variant,
        ))
    }

    /// The pricing rule fee commands run under.
    pub fn pricing_rule(&self) -> Result<PricingRule, ScenarioError> {
        match self.pricing {
            PricingKind::ComputeProportional => Ok(PricingRule::ComputeProportional),
            PricingKind::TpmDerived => Ok(PricingRule::TpmDerived),
            PricingKind::ObjectWeighted => {
                let book = self
                    .price_book()
                    .ok_or_else(|| {
                        ScenarioError::single(
                            "<pricing>",
                            "object_weighted pricing requires an owtfm section".into(),
                        )
                    })?
                    .map_err(|e| ScenarioError::single("<owtfm>", e.to_string()))?;
                Ok(PricingRule::ObjectWeighted { book })
            }
        }
    }
}

#[derive(Debug, Error)]
pub struct ScenarioError {
    pub path: PathBuf,
    pub issues: Vec<String>,
}

impl ScenarioError {
    fn single(path: impl Into<PathBuf>, issue: String) -> Self {
        ScenarioError {
            path: path.into(),
            issues: vec![issue],
        }
    }
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "scenario {} rejected:", self.path.display())?;
        for issue in &self.issues {
            writeln!(f, "  - {issue}")?;
        }
        Ok(())
    }
}

/// A parsed, validated scenario plus the hash every report of it must embed.
#[derive(Clone, Debug)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    pub config_hash: String,
    pub path: PathBuf,
}

/// Canonical hash of a scenario: the digest of its re-serialized canonical
/// JSON, so formatting differences in the source file do not matter.
pub fn scenario_hash(scenario: &Scenario) -> String {
    let canonical = serde_json::to_string(scenario).expect("scenario serializes");
    format!("{:x}", Sha256::digest(canonical.as_bytes()))
}

pub fn load_scenario(path: &Path) -> Result<LoadedScenario, ScenarioError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ScenarioError::single(path, format!("cannot read file: {e}")))?;
    let scenario: Scenario = serde_json::from_str(&text)
        .map_err(|e| ScenarioError::single(path, format!("parse error: {e}")))?;

    let mut issues = Vec::new();
    validate_scenario(&scenario, &mut issues);
    if !issues.is_empty() {
        return Err(ScenarioError {
            path: path.to_path_buf(),
            issues,
        });
    }
    Ok(LoadedScenario {
        config_hash: scenario_hash(&scenario),
        scenario,
        path: path.to_path_buf(),
    })
}

fn validate_scenario(s: &Scenario, issues: &mut Vec<String>) {
    if let Err(e) = s.machine.validate() {
        issues.push(format!("machine: {e}"));
    }
    if let Err(e) = s.retention.validate() {
        issues.push(format!("retention: {e}"));
    }
    if s.division.alpha.is_negative() || s.division.alpha > Rational::one() {
        issues.push(format!("division: alpha {} outside [0, 1]", s.division.alpha));
    }

    let declared: BTreeSet<&ObjectId> = s.objects.iter().collect();
    fn check_objects(
        declared: &BTreeSet<&ObjectId>,
        issues: &mut Vec<String>,
        what: String,
        objs: &BTreeSet<ObjectId>,
    ) {
        for o in objs {
            if !declared.contains(o) {
                issues.push(format!("{what}: object {o} not declared in scenario objects"));
            }
        }
    }

    let mut seen_ids = BTreeSet::new();
    let all_txs: Vec<(&'static str, &Transaction)> = s
        .transactions
        .iter()
        .map(|e| ("transactions", &e.tx))
        .chain(s.user_pool().iter().map(|tx| ("shill_pools.user", tx)))
        .chain(
            s.scheduler_pool()
                .iter()
                .map(|tx| ("shill_pools.scheduler", tx)),
        )
        .collect();
    for (section, tx) in &all_txs {
        if !seen_ids.insert(tx.id.clone()) {
            issues.push(format!("{section}: duplicate transaction id {}", tx.id));
        }
        for violation in validate_transaction(tx) {
            issues.push(format!("{section}[{}]: {violation}", tx.id));
        }
        check_objects(&declared, issues, format!("{section}[{}] reads", tx.id), &tx.reads);
        check_objects(&declared, issues, format!("{section}[{}] writes", tx.id), &tx.writes);
    }

    for entry in &s.transactions {
        if let Some(spec) = &entry.rule {
            let rule = spec.clone().into_rule(&entry.tx.id);
            if let Err(e) = rule.validate_for(&entry.tx) {
                issues.push(format!("transactions[{}] rule: {e}", entry.tx.id));
            }
            if let Guard::Compare { object, .. } = &rule.guard {
                if !declared.contains(object) {
                    issues.push(format!(
                        "transactions[{}] rule: guard object {object} not declared",
                        entry.tx.id
                    ));
                }
            }
        }
    }

    for o in s.initial_state.keys() {
        if !declared.contains(o) {
            issues.push(format!("initial_state: object {o} not declared"));
        }
    }

    if let Some(cfg) = &s.owtfm {
        if !cfg.eta.is_positive() {
            issues.push("owtfm: eta must be strictly positive".into());
        }
        for (o, p) in &cfg.prices {
            if !declared.contains(o) {
                issues.push(format!("owtfm.prices: object {o} not declared"));
            }
            if !p.is_positive() {
                issues.push(format!("owtfm.prices[{o}]: price must be positive"));
            }
        }
        for (o, t) in &cfg.targets {
            if !declared.contains(o) {
                issues.push(format!("owtfm.targets: object {o} not declared"));
            }
            if !t.is_positive() {
                issues.push(format!("owtfm.targets[{o}]: target must be positive"));
            }
        }
        if let Some(demand) = &cfg.demand {
            let known: BTreeSet<&TxId> = s.transactions.iter().map(|e| &e.tx.id).collect();
            for (i, block) in demand.iter().enumerate() {
                for id in block {
                    if !known.contains(id) {
                        issues.push(format!("owtfm.demand[{i}]: unknown transaction {id}"));
                    }
                }
            }
        }
        if let Some(pump) = &cfg.price_pump {
            if !declared.contains(&pump.object) {
                issues.push(format!(
                    "owtfm.price_pump: object {} not declared",
                    pump.object
                ));
            }
            if !pump.price.is_positive() || !pump.target.is_positive() {
                issues.push("owtfm.price_pump: price and target must be positive".into());
            }
        }
    }

    if s.pricing == PricingKind::ObjectWeighted && s.owtfm.is_none() {
        issues.push("pricing: object_weighted requires an owtfm section".into());
    }
    if s.seeds.is_empty() {
        issues.push("seeds: need at least one seed".into());
    }
}

//! Per-operation gas accounting and fiat cost estimates.
//!
//! Gas never gates execution. Every ledger entry records the units its
//! operation costs, and costs convert to fiat at a gas price and an ether
//! price.

use alloc::collections::BTreeMap;
use alloc::string::String;

use serde::{Deserialize, Serialize};

use crate::fixed::{Fixed, SCALE};

/// Gas charged for any operation kind the schedule does not price.
pub const DEFAULT_GAS: u64 = 21_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperationKind {
    CreateWorker,
    CreateTaskPoster,
    PostTask,
    CreateAgreement,
    AcceptAgreement,
    SubmitHash,
    AssignEvaluators,
    FirstEvaluationSubmit,
    SecondEvaluationSubmit,
    ThirdEvaluationSubmit,
    BecomeEvaluator,
    Apply,
    Reveal,
    CancelTask,
    CancelAgreement,
    Exit,
    Tick,
}

/// The measured contract functions, in table order, with their gas.
pub const TABLE: [(OperationKind, u64); 11] = [
    (OperationKind::CreateWorker, 229_786),
    (OperationKind::CreateTaskPoster, 228_410),
    (OperationKind::PostTask, 250_502),
    (OperationKind::CreateAgreement, 198_134),
    (OperationKind::AcceptAgreement, 49_729),
    (OperationKind::SubmitHash, 114_068),
    (OperationKind::AssignEvaluators, 328_702),
    (OperationKind::FirstEvaluationSubmit, 133_073),
    (OperationKind::SecondEvaluationSubmit, 105_620),
    (OperationKind::ThirdEvaluationSubmit, 274_360),
    (OperationKind::BecomeEvaluator, 47_878),
];

/// The nine operations one task passes through from posting to its third
/// evaluation.
pub const LIFECYCLE: [OperationKind; 9] = [
    OperationKind::PostTask,
    OperationKind::CreateAgreement,
    OperationKind::AcceptAgreement,
    OperationKind::SubmitHash,
    OperationKind::AssignEvaluators,
    OperationKind::FirstEvaluationSubmit,
    OperationKind::SecondEvaluationSubmit,
    OperationKind::ThirdEvaluationSubmit,
    OperationKind::BecomeEvaluator,
];

impl OperationKind {
    pub fn label(self) -> &'static str {
        use OperationKind::*;
        match self {
            CreateWorker => "Create worker",
            CreateTaskPoster => "Create taskposter",
            PostTask => "Post task with fees",
            CreateAgreement => "Create agreement",
            AcceptAgreement => "Accept agreement",
            SubmitHash => "Submit hash",
            AssignEvaluators => "Assign evaluators",
            FirstEvaluationSubmit => "First evaluation submit",
            SecondEvaluationSubmit => "Second evaluation submit",
            ThirdEvaluationSubmit => "Third evaluation submit",
            BecomeEvaluator => "Become evaluator",
            Apply => "Apply to task",
            Reveal => "Record envelopes",
            CancelTask => "Cancel task",
            CancelAgreement => "Cancel agreement",
            Exit => "Exit platform",
            Tick => "Deadline tick",
        }
    }

    /// Whether the operation has a measured table price.
    pub fn is_table_priced(self) -> bool {
        TABLE.iter().any(|(k, _)| *k == self)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum GasError {
    #[error("trace is missing lifecycle operation {0:?}")]
    IncompleteTrace(OperationKind),
    #[error("gas override for {0:?} must be positive")]
    ZeroGas(OperationKind),
    #[error("gas and ether prices must be positive")]
    NonPositivePrice,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GasSchedule {
    /// Replacements for the table values or the default.
    pub overrides: BTreeMap<OperationKind, u64>,
    pub gas_price_gwei: Fixed,
    pub ether_usd: Fixed,
}

impl Default for GasSchedule {
    fn default() -> Self {
        GasSchedule {
            overrides: BTreeMap::new(),
            gas_price_gwei: Fixed::ONE,
            ether_usd: Fixed::from_raw(1_443_000),
        }
    }
}

impl GasSchedule {
    pub fn validate(&self) -> Result<(), GasError> {
        if let Some((k, _)) = self.overrides.iter().find(|(_, g)| **g == 0) {
            return Err(GasError::ZeroGas(*k));
        }
        if self.gas_price_gwei.raw() <= 0 || self.ether_usd.raw() <= 0 {
            return Err(GasError::NonPositivePrice);
        }
        Ok(())
    }

    pub fn charge(&self, kind: OperationKind) -> u64 {
        if let Some(g) = self.overrides.get(&kind) {
            return *g;
        }
        TABLE
            .iter()
            .find(|(k, _)| *k == kind)
            .map_or(DEFAULT_GAS, |(_, g)| *g)
    }

    pub fn cost_usd(&self, gas: u64) -> f64 {
        cost_usd(gas, self.gas_price_gwei, self.ether_usd)
    }
}

/// `gas * gwei * 1e-9 * usd`. The product is exact in integers; only the
/// final conversion is floating point.
pub fn cost_usd(gas: u64, gas_price_gwei: Fixed, ether_usd: Fixed) -> f64 {
    let num = u128::from(gas)
        * gas_price_gwei.raw().max(0) as u128
        * ether_usd.raw().max(0) as u128;
    let den = (SCALE as u128) * (SCALE as u128) * 1_000_000_000u128;
    let whole = num / den;
    let rem = num % den;
    whole as f64 + rem as f64 / den as f64
}

/// Fiat amount rounded to four decimals, as printed in cost reports.
pub fn format_usd(usd: f64) -> String {
    alloc::format!("{usd:.4}")
}

/// Gas over a lifecycle trace.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LifecycleGas {
    /// Sum over table-priced operations.
    pub table_gas: u64,
    /// Sum over auxiliary operations (applications, envelope records, ...).
    pub auxiliary_gas: u64,
}

impl LifecycleGas {
    pub fn total(&self) -> u64 {
        self.table_gas
    }
}

/// Sums the gas of a trace given as `(kind, gas_charged)` pairs. Every one
/// of the nine lifecycle operations must appear at least once.
pub fn lifecycle_total<I>(trace: I) -> Result<LifecycleGas, GasError>
where
    I: IntoIterator<Item = (OperationKind, u64)>,
{
    let mut seen = [false; LIFECYCLE.len()];
    let mut out = LifecycleGas { table_gas: 0, auxiliary_gas: 0 };
    for (kind, gas) in trace {
        if let Some(i) = LIFECYCLE.iter().position(|k| *k == kind) {
            seen[i] = true;
        }
        if kind.is_table_priced() {
            out.table_gas += gas;
        } else {
            out.auxiliary_gas += gas;
        }
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(GasError::IncompleteTrace(LIFECYCLE[i]));
    }
    Ok(out)
}

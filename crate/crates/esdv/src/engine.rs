//! Binding and evaluation: resolves manifest slots to parameters with
//! dimension checking, evaluates all line items and builds the ledger.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::ingest::{IngestError, ItemSpec, SlotRef, ValuationModel};
use crate::kernels::{
    build_ledger, evaluate_kernel, kernel_spec, slot_dim, KernelError, LedgerSummary, LineItemResult,
    SlotKind, SlotValue, SlotValues,
};
use crate::taxonomy::ValuedItem;
use crate::units::{ParameterSet, Quantity};

/// One unresolved or dimensionally unsound slot binding.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct BindError {
    pub item: String,
    pub slot: String,
    pub message: String,
}

impl std::fmt::Display for BindError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "item `{}`, slot `{}`: {}", self.item, self.slot, self.message)
    }
}

/// A line item with every slot resolved to a dimension-checked quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundItem {
    pub spec: ItemSpec,
    pub slots: SlotValues,
}

impl ValuedItem for BoundItem {
    fn item_id(&self) -> &str {
        &self.spec.id
    }
    fn node_id(&self) -> &str {
        &self.spec.node
    }
}

fn resolve(
    params: &ParameterSet,
    item: &str,
    slot: &str,
    param_id: &str,
    unit: &'static str,
    errors: &mut Vec<BindError>,
) -> Option<Quantity> {
    let Some(p) = params.get(param_id) else {
        errors.push(BindError {
            item: item.to_string(),
            slot: slot.to_string(),
            message: format!("parameter `{param_id}` not found"),
        });
        return None;
    };
    let expected = slot_dim(unit);
    if !p.quantity.has_dim(&expected) {
        errors.push(BindError {
            item: item.to_string(),
            slot: slot.to_string(),
            message: format!(
                "parameter `{param_id}` dimension mismatch: expected {}, got {}",
                expected.format_unit(),
                p.quantity.unit().format_unit()
            ),
        });
        return None;
    }
    Some(p.quantity)
}

/// Resolves every slot of every item against the parameter set. The full
/// error list is collected (not fail-fast) and sorted by item id then slot
/// name, so it is independent of iteration order.
pub fn bind(model: &ValuationModel, params: &ParameterSet) -> Result<Vec<BoundItem>, Vec<BindError>> {
    let mut errors = Vec::new();
    let mut bound = Vec::with_capacity(model.items.len());

    for item in &model.items {
        let spec = kernel_spec(&item.kernel).expect("manifest validation checked kernel ids");
        let mut slots = SlotValues::new();
        for slot in spec.slots {
            match (&slot.kind, item.slots.get(slot.name)) {
                (SlotKind::Scalar, Some(SlotRef::Param(pid))) => {
                    if let Some(q) = resolve(params, &item.id, slot.name, pid, slot.unit, &mut errors) {
                        slots.insert(slot.name.to_string(), SlotValue::Scalar(q));
                    }
                }
                (SlotKind::Variadic(elems), Some(SlotRef::Rows(rows))) => {
                    let mut resolved_rows = Vec::with_capacity(rows.len());
                    let mut complete = true;
                    for (j, row) in rows.iter().enumerate() {
                        let mut resolved = BTreeMap::new();
                        for e in *elems {
                            let slot_path = format!("{}[{j}].{}", slot.name, e.name);
                            match row.get(e.name) {
                                Some(pid) => {
                                    match resolve(params, &item.id, &slot_path, pid, e.unit, &mut errors) {
                                        Some(q) => {
                                            resolved.insert(e.name.to_string(), q);
                                        }
                                        None => complete = false,
                                    }
                                }
                                None => {
                                    complete = false;
                                    errors.push(BindError {
                                        item: item.id.clone(),
                                        slot: slot_path,
                                        message: "missing field".to_string(),
                                    });
                                }
                            }
                        }
                        resolved_rows.push(resolved);
                    }
                    if complete {
                        slots.insert(slot.name.to_string(), SlotValue::Rows(resolved_rows));
                    }
                }
                _ => errors.push(BindError {
                    item: item.id.clone(),
                    slot: slot.name.to_string(),
                    message: "slot missing or has wrong shape".to_string(),
                }),
            }
        }
        bound.push(BoundItem {
            spec: item.clone(),
            slots,
        });
    }

    if errors.is_empty() {
        Ok(bound)
    } else {
        errors.sort();
        Err(errors)
    }
}

/// Evaluation failure, naming the offending item.
#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("item `{item}`: {source}")]
    Item {
        item: String,
        #[source]
        source: KernelError,
    },
    #[error("ledger: {0}")]
    Ledger(#[from] KernelError),
}

/// Evaluates every bound item and aggregates the ledger.
pub fn evaluate(bound: &[BoundItem], strict: bool) -> Result<(Vec<LineItemResult>, LedgerSummary), EvalError> {
    let mut items = Vec::with_capacity(bound.len());
    for b in bound {
        let out = evaluate_kernel(&b.spec.kernel, &b.slots, strict).map_err(|source| EvalError::Item {
            item: b.spec.id.clone(),
            source,
        })?;
        items.push(LineItemResult {
            id: b.spec.id.clone(),
            side: b.spec.side,
            class: b.spec.class,
            value: out.value,
            breakdown: out.breakdown,
        });
    }
    items.sort_by(|a, b| a.id.cmp(&b.id));
    let ledger = build_ledger(&items)?;
    Ok((items, ledger))
}

/// Full pipeline error for [`run`].
#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("binding failed with {} error(s)", .0.len())]
    Bind(Vec<BindError>),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Transfers → bind → evaluate, for callers that need only the numbers
/// (the sensitivity module re-runs this per perturbation).
pub fn run(
    model: &ValuationModel,
    params: &ParameterSet,
    strict: bool,
) -> Result<(Vec<LineItemResult>, LedgerSummary), RunError> {
    let merged = crate::ingest::inject_transfers(model, params)?;
    let bound = bind(model, &merged).map_err(RunError::Bind)?;
    Ok(evaluate(&bound, strict)?)
}

//! Input loading and validation: the parameter CSV and the model manifest.
//!
//! Missing data is always an error, never an implicit zero. Percent inputs
//! must carry the `%` unit explicitly (`44,%` stores 0.44), which avoids
//! the 0.44-vs-44 ambiguity.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernels::{kernel_spec, Side, SlotKind};
use crate::taxonomy::{CascadeGraph, CascadeNode, FunctionalClass};
use crate::transfer::{DonorObservation, TransferRecord};
use crate::units::{parse_unit, Method, Parameter, ParameterSet, Provenance, Quantity};

pub const CSV_HEADER: &str = "id,value,unit,source,year,method,low,high";

#[derive(Debug, Error, PartialEq)]
pub enum IngestError {
    #[error("CSV load error at row {row}: {message}")]
    Csv { row: usize, message: String },
    #[error("manifest load error: {0}")]
    Json(String),
    #[error("manifest load error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("transfer-derived parameter `{0}` collides with a CSV parameter")]
    TransferCollision(String),
}

/// Parses the parameter table. Header must be exactly
/// `id,value,unit,source,year,method,low,high`; low/high may be empty.
/// Magnitudes are normalized to scale 1 (unit scales folded in).
pub fn parse_params_csv(bytes: &[u8]) -> Result<ParameterSet, IngestError> {
    let text = std::str::from_utf8(bytes).map_err(|e| IngestError::Csv {
        row: 0,
        message: format!("not UTF-8: {e}"),
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());

    let headers = reader.headers().map_err(|e| IngestError::Csv {
        row: 0,
        message: e.to_string(),
    })?;
    let joined = headers.iter().collect::<Vec<_>>().join(",");
    if joined != CSV_HEADER {
        return Err(IngestError::Csv {
            row: 0,
            message: format!("header must be `{CSV_HEADER}`, got `{joined}`"),
        });
    }

    let mut set = ParameterSet::default();
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 2; // 1-based, after header
        let record = record.map_err(|e| IngestError::Csv {
            row,
            message: e.to_string(),
        })?;
        let field = |i: usize| record.get(i).unwrap_or("").trim();

        let id = field(0);
        if id.is_empty() {
            return Err(IngestError::Csv {
                row,
                message: "empty id".to_string(),
            });
        }
        let value: f64 = field(1).parse().map_err(|_| IngestError::Csv {
            row,
            message: format!("non-numeric value `{}`", field(1)),
        })?;
        let unit = parse_unit(field(2)).map_err(|e| IngestError::Csv {
            row,
            message: format!("unit `{}`: {e}", field(2)),
        })?;
        let year: i32 = field(4).parse().map_err(|_| IngestError::Csv {
            row,
            message: format!("non-integer year `{}`", field(4)),
        })?;
        let method = Method::parse(field(5)).ok_or_else(|| IngestError::Csv {
            row,
            message: format!("unknown method token `{}`", field(5)),
        })?;

        let bound = |i: usize| -> Result<Option<f64>, IngestError> {
            let s = field(i);
            if s.is_empty() {
                return Ok(None);
            }
            s.parse::<f64>().map(Some).map_err(|_| IngestError::Csv {
                row,
                message: format!("non-numeric bound `{s}`"),
            })
        };
        let low = bound(6)?;
        let high = bound(7)?;
        let uncertainty = match (low, high) {
            (Some(lo), Some(hi)) => {
                if lo > hi {
                    return Err(IngestError::Csv {
                        row,
                        message: format!("low {lo} > high {hi}"),
                    });
                }
                // bounds are written in the row's unit; normalize like the value
                Some((lo * unit.scale(), hi * unit.scale()))
            }
            (None, None) => None,
            _ => {
                return Err(IngestError::Csv {
                    row,
                    message: "low and high must both be present or both empty".to_string(),
                })
            }
        };

        let quantity = Quantity::new(value, unit).map_err(|e| IngestError::Csv {
            row,
            message: e.to_string(),
        })?;
        let param = Parameter {
            id: id.to_string(),
            quantity,
            provenance: Provenance {
                source: field(3).to_string(),
                year,
                method,
            },
            uncertainty,
        };
        set.insert(param).map_err(|message| IngestError::Csv { row, message })?;
    }
    Ok(set)
}

/// Serializes a parameter set back to the CSV format, canonical units,
/// rows in ascending id order.
pub fn params_to_csv(set: &ParameterSet) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for p in set.iter() {
        let (low, high) = match p.uncertainty {
            Some((lo, hi)) => (format!("{lo}"), format!("{hi}")),
            None => (String::new(), String::new()),
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            p.id,
            p.quantity.magnitude(),
            p.quantity.unit().format_unit(),
            p.provenance.source,
            p.provenance.year,
            p.provenance.method.as_str(),
            low,
            high
        ));
    }
    out
}

// ---------------------------------------------------------------------------
// Model manifest
// ---------------------------------------------------------------------------

/// Cascade section of the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeSpec {
    pub nodes: Vec<CascadeNode>,
    pub edges: Vec<(String, String)>,
}

impl CascadeSpec {
    pub fn to_graph(&self) -> CascadeGraph {
        let mut g = CascadeGraph::new();
        for n in &self.nodes {
            g.add_node(n.clone());
        }
        for (from, to) in &self.edges {
            g.add_edge(from, to);
        }
        g
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSpec {
    pub site: String,
    pub numerator: f64,
    pub denominator: f64,
    #[serde(default = "default_unit")]
    pub unit: String,
}

fn default_unit() -> String {
    "one".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjustmentSpec {
    pub label: String,
    pub factor: f64,
}

/// A transfers entry: derives one parameter from donor observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferSpec {
    pub id: String,
    pub observations: Vec<ObservationSpec>,
    #[serde(default)]
    pub adjustments: Vec<AdjustmentSpec>,
}

impl TransferSpec {
    pub fn to_record(&self) -> Result<TransferRecord, IngestError> {
        let unit_of = |text: &str| {
            parse_unit(text).map_err(|e| IngestError::Schema {
                path: format!("transfers[{}].unit", self.id),
                message: e.to_string(),
            })
        };
        let mut observations = Vec::with_capacity(self.observations.len());
        for obs in &self.observations {
            let unit = unit_of(&obs.unit)?;
            let make = |v: f64| {
                Quantity::new(v, unit).map_err(|e| IngestError::Schema {
                    path: format!("transfers[{}].observations", self.id),
                    message: e.to_string(),
                })
            };
            observations.push(DonorObservation {
                site: obs.site.clone(),
                numerator: make(obs.numerator)?,
                denominator: make(obs.denominator)?,
            });
        }
        Ok(TransferRecord {
            derived_id: self.id.clone(),
            observations,
            adjustments: self.adjustments.iter().map(|a| (a.label.clone(), a.factor)).collect(),
        })
    }
}

/// A slot binding: either a parameter id (scalar slot) or inline rows of
/// field→parameter-id for variadic slots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SlotRef {
    Param(String),
    Rows(Vec<BTreeMap<String, String>>),
}

/// One line item: a kernel bound to named parameters, a ledger side, a
/// functional class and a cascade node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemSpec {
    pub id: String,
    pub kernel: String,
    pub side: Side,
    pub class: FunctionalClass,
    pub node: String,
    pub slots: BTreeMap<String, SlotRef>,
}

impl crate::taxonomy::ValuedItem for ItemSpec {
    fn item_id(&self) -> &str {
        &self.id
    }
    fn node_id(&self) -> &str {
        &self.node
    }
}

/// The declarative valuation model: cascade, transfers and line items.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValuationModel {
    pub region: String,
    pub year: i32,
    pub cascade: CascadeSpec,
    #[serde(default)]
    pub transfers: Vec<TransferSpec>,
    pub items: Vec<ItemSpec>,
}

/// Parses and structurally validates a model manifest. Cascade and
/// double-counting validation are a separate, explicit step.
pub fn parse_model_manifest(bytes: &[u8]) -> Result<ValuationModel, IngestError> {
    let model: ValuationModel =
        serde_json::from_slice(bytes).map_err(|e| IngestError::Json(e.to_string()))?;

    let mut ids = BTreeSet::new();
    for (i, item) in model.items.iter().enumerate() {
        let path = format!("items[{i}] (`{}`)", item.id);
        if !ids.insert(item.id.clone()) {
            return Err(IngestError::Schema {
                path,
                message: format!("duplicate item id `{}`", item.id),
            });
        }
        let spec = kernel_spec(&item.kernel).ok_or_else(|| IngestError::Schema {
            path: format!("{path}.kernel"),
            message: format!("unknown kernel id `{}`", item.kernel),
        })?;
        // slot mappings must be complete and carry no unknown names
        for slot in spec.slots {
            let bound = item.slots.get(slot.name).ok_or_else(|| IngestError::Schema {
                path: format!("{path}.slots"),
                message: format!("missing slot `{}` for kernel `{}`", slot.name, item.kernel),
            })?;
            match (&slot.kind, bound) {
                (SlotKind::Scalar, SlotRef::Param(_)) => {}
                (SlotKind::Variadic(elems), SlotRef::Rows(rows)) => {
                    for (j, row) in rows.iter().enumerate() {
                        for e in *elems {
                            if !row.contains_key(e.name) {
                                return Err(IngestError::Schema {
                                    path: format!("{path}.slots.{}[{j}]", slot.name),
                                    message: format!("missing field `{}`", e.name),
                                });
                            }
                        }
                        for key in row.keys() {
                            if !elems.iter().any(|e| e.name == key) {
                                return Err(IngestError::Schema {
                                    path: format!("{path}.slots.{}[{j}]", slot.name),
                                    message: format!("unknown field `{key}`"),
                                });
                            }
                        }
                    }
                }
                (SlotKind::Scalar, SlotRef::Rows(_)) => {
                    return Err(IngestError::Schema {
                        path: format!("{path}.slots.{}", slot.name),
                        message: "expected a parameter id, got an array".to_string(),
                    })
                }
                (SlotKind::Variadic(_), SlotRef::Param(_)) => {
                    return Err(IngestError::Schema {
                        path: format!("{path}.slots.{}", slot.name),
                        message: "expected an array of rows, got a parameter id".to_string(),
                    })
                }
            }
        }
        for name in item.slots.keys() {
            if !spec.slots.iter().any(|s| s.name == name) {
                return Err(IngestError::Schema {
                    path: format!("{path}.slots"),
                    message: format!("unknown slot `{name}` for kernel `{}`", item.kernel),
                });
            }
        }
    }
    Ok(model)
}

/// Serializes the model back to manifest JSON (non-canonical field order;
/// the report module owns canonical output).
pub fn model_to_json(model: &ValuationModel) -> String {
    serde_json::to_string_pretty(model).expect("model serialization")
}

/// Runs the manifest's transfers and injects the derived parameters.
/// A derived id colliding with a CSV id is an error.
pub fn inject_transfers(model: &ValuationModel, params: &ParameterSet) -> Result<ParameterSet, IngestError> {
    let mut merged = params.clone();
    for spec in &model.transfers {
        if merged.get(&spec.id).is_some() {
            return Err(IngestError::TransferCollision(spec.id.clone()));
        }
        let record = spec.to_record()?;
        let derived = crate::transfer::ratio_from_donors(&record).map_err(|e| IngestError::Schema {
            path: format!("transfers[{}]", spec.id),
            message: e.to_string(),
        })?;
        merged.insert(derived).map_err(|message| IngestError::Schema {
            path: format!("transfers[{}]", spec.id),
            message,
        })?;
    }
    Ok(merged)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::BaseDim;

    #[test]
    fn parse_beijing_m_row() {
        let csv = "id,value,unit,source,year,method,low,high\nM,1.82,billion RMB/year,BeijingStat,2018,statistic,,\n";
        let set = parse_params_csv(csv.as_bytes()).unwrap();
        let m = set.get("M").unwrap();
        assert_eq!(m.quantity.magnitude(), 1.82e9);
        assert_eq!(m.quantity.unit().exponent(BaseDim::Currency), 1);
        assert_eq!(m.quantity.unit().exponent(BaseDim::Time), -1);
        assert_eq!(m.provenance.method, Method::Statistic);
        assert!(m.uncertainty.is_none());
    }

    #[test]
    fn header_only_is_empty_set() {
        let set = parse_params_csv(CSV_HEADER.as_bytes()).unwrap();
        assert!(set.is_empty());
    }

    #[test]
    fn bad_unit_names_row_and_token() {
        let csv = "id,value,unit,source,year,method,low,high\nX,1,RMB/bogus,s,2018,statistic,,\n";
        match parse_params_csv(csv.as_bytes()) {
            Err(IngestError::Csv { row, message }) => {
                assert_eq!(row, 2);
                assert!(message.contains("bogus"), "{message}");
            }
            other => panic!("expected Csv error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_id_and_bad_method_and_bounds() {
        let dup = "id,value,unit,source,year,method,low,high\nA,1,RMB,s,2018,statistic,,\nA,2,RMB,s,2018,statistic,,\n";
        assert!(matches!(parse_params_csv(dup.as_bytes()), Err(IngestError::Csv { row: 3, .. })));

        let method = "id,value,unit,source,year,method,low,high\nA,1,RMB,s,2018,guess,,\n";
        assert!(matches!(parse_params_csv(method.as_bytes()), Err(IngestError::Csv { .. })));

        let bounds = "id,value,unit,source,year,method,low,high\nA,1,RMB,s,2018,statistic,5,2\n";
        assert!(matches!(parse_params_csv(bounds.as_bytes()), Err(IngestError::Csv { .. })));
    }

    #[test]
    fn bounds_normalize_with_unit_scale() {
        let csv = "id,value,unit,source,year,method,low,high\nP,44,%,s,2018,transfer,40,48\n";
        let set = parse_params_csv(csv.as_bytes()).unwrap();
        let p = set.get("P").unwrap();
        assert!((p.quantity.magnitude() - 0.44).abs() < 1e-15);
        let (lo, hi) = p.uncertainty.unwrap();
        assert!((lo - 0.40).abs() < 1e-15 && (hi - 0.48).abs() < 1e-15);
    }

    #[test]
    fn csv_round_trip() {
        let csv = "id,value,unit,source,year,method,low,high\nM,1.82,billion RMB/year,BeijingStat,2018,statistic,,\nP,44,%,McPherson,1996,transfer,40,48\n";
        let set = parse_params_csv(csv.as_bytes()).unwrap();
        let text = params_to_csv(&set);
        let reparsed = parse_params_csv(text.as_bytes()).unwrap();
        assert_eq!(set, reparsed);
    }

    fn minimal_manifest() -> String {
        r#"{
            "region": "test",
            "year": 2018,
            "cascade": {
                "nodes": [
                    {"id": "s", "kind": "ecosystem_structure", "label": "s"},
                    {"id": "f", "kind": "ecosystem_function", "label": "f"},
                    {"id": "svc", "kind": "service", "class": "cultural", "label": "svc"},
                    {"id": "vc", "kind": "value_change", "label": "vc"}
                ],
                "edges": [["s", "f"], ["f", "svc"], ["svc", "vc"]]
            },
            "items": [
                {
                    "id": "one_item",
                    "kernel": "prevalued",
                    "side": "ES",
                    "class": "cultural",
                    "node": "svc",
                    "slots": {"value": "V_rep"}
                }
            ]
        }"#
        .to_string()
    }

    #[test]
    fn minimal_manifest_parses() {
        let model = parse_model_manifest(minimal_manifest().as_bytes()).unwrap();
        assert_eq!(model.items.len(), 1);
        assert_eq!(model.items[0].kernel, "prevalued");
        assert!(model.transfers.is_empty());
    }

    #[test]
    fn unknown_kernel_is_load_error() {
        let text = minimal_manifest().replace("prevalued", "mystery");
        match parse_model_manifest(text.as_bytes()) {
            Err(IngestError::Schema { path, message }) => {
                assert!(path.contains("items[0]"));
                assert!(message.contains("mystery"));
            }
            other => panic!("expected Schema error, got {other:?}"),
        }
    }

    #[test]
    fn missing_slot_is_load_error() {
        let text = minimal_manifest().replace(r#""slots": {"value": "V_rep"}"#, r#""slots": {}"#);
        assert!(matches!(
            parse_model_manifest(text.as_bytes()),
            Err(IngestError::Schema { .. })
        ));
    }

    #[test]
    fn manifest_round_trip() {
        let model = parse_model_manifest(minimal_manifest().as_bytes()).unwrap();
        let text = model_to_json(&model);
        let reparsed = parse_model_manifest(text.as_bytes()).unwrap();
        assert_eq!(model, reparsed);
    }

    #[test]
    fn transfer_injection_and_collision() {
        let mut text = minimal_manifest();
        text = text.replace(
            "\"items\":",
            r#""transfers": [{"id": "P_T", "observations": [{"site": "A", "numerator": 44, "denominator": 100}]}], "items":"#,
        );
        let model = parse_model_manifest(text.as_bytes()).unwrap();

        let empty = parse_params_csv(CSV_HEADER.as_bytes()).unwrap();
        let merged = inject_transfers(&model, &empty).unwrap();
        assert_eq!(merged.get("P_T").unwrap().quantity.magnitude(), 0.44);

        let csv = "id,value,unit,source,year,method,low,high\nP_T,44,%,x,2018,statistic,,\n";
        let clashing = parse_params_csv(csv.as_bytes()).unwrap();
        assert_eq!(
            inject_transfers(&model, &clashing),
            Err(IngestError::TransferCollision("P_T".to_string()))
        );
    }
}

//! Valuation engine for urban ecosystem services (ES) and disservices
//! (EDS): loads declarative parameter datasets, validates them against the
//! disservice cascade and classification rules, evaluates the valuation
//! kernels, aggregates the ES/EDS ledger and quantifies parameter
//! sensitivity.
//!
//! The crate is organized along the pipeline:
//!
//! * [`units`] — unit algebra and the parameter model
//! * [`taxonomy`] — cascade graph, tier/class rules, double-counting guard
//! * [`kernels`] — the valuation formulas and the ledger aggregator
//! * [`transfer`] — donor-site value transfer
//! * [`ingest`] — parameter CSV and model manifest loading
//! * [`engine`] — slot binding and evaluation
//! * [`sensitivity`] — OAT elasticities and Monte-Carlo propagation
//! * [`report`] — canonical JSON and table rendering

pub mod engine;
pub mod ingest;
pub mod kernels;
pub mod report;
pub mod sensitivity;
pub mod taxonomy;
pub mod transfer;
pub mod units;

pub use engine::{bind, evaluate, run, BindError, BoundItem, EvalError, RunError};
pub use ingest::{parse_model_manifest, parse_params_csv, IngestError, ValuationModel};
pub use kernels::{build_ledger, evaluate_kernel, LedgerSummary, LineItemResult, Side};
pub use report::{build_report, inputs_digest, to_canonical_json, to_table, ReportDocument};
pub use sensitivity::{monte_carlo, oat_elasticity, SensitivityConfig, SensitivityReport};
pub use taxonomy::{check_double_counting, validate_cascade, CascadeGraph, Violation};
pub use units::{parse_unit, Parameter, ParameterSet, Quantity, UnitDim};

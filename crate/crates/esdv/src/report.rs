//! Report assembly and rendering: the ledger as canonical JSON (keys
//! sorted, shortest round-trip floats, newline-terminated) and as a text
//! table (4 significant figures, shares to 0.1%).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::engine::BindError;
use crate::kernels::{LedgerSummary, LineItemResult, Side};
use crate::sensitivity::SensitivityReport;
use crate::taxonomy::{FunctionalClass, Violation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemReport {
    pub id: String,
    pub side: Side,
    pub class: FunctionalClass,
    /// RMB/year at scale 1.
    pub value: f64,
    pub breakdown: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerReport {
    pub es_total: f64,
    pub eds_total: f64,
    pub net: f64,
    pub shares_es: BTreeMap<String, f64>,
    pub shares_eds: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eds_to_es_ratio: Option<f64>,
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub code: String,
    pub nodes: Vec<String>,
    pub message: String,
}

impl From<&Violation> for ViolationReport {
    fn from(v: &Violation) -> ViolationReport {
        ViolationReport {
            code: v.code.as_str().to_string(),
            nodes: v.nodes.clone(),
            message: v.message.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ValidationSection {
    pub cascade: Vec<ViolationReport>,
    pub double_counting: Vec<ViolationReport>,
    pub binding: Vec<String>,
}

impl ValidationSection {
    pub fn from_parts(cascade: &[Violation], double_counting: &[Violation], binding: &[BindError]) -> Self {
        ValidationSection {
            cascade: cascade.iter().map(Into::into).collect(),
            double_counting: double_counting.iter().map(Into::into).collect(),
            binding: binding.iter().map(|e| e.to_string()).collect(),
        }
    }

    pub fn is_clean(&self) -> bool {
        self.cascade.is_empty() && self.double_counting.is_empty() && self.binding.is_empty()
    }
}

/// The full machine-readable report: inputs digest, per-item results,
/// ledger, validation findings and (optionally) sensitivity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub version: String,
    pub inputs_digest: String,
    pub region: String,
    pub year: i32,
    pub items: Vec<ItemReport>,
    pub ledger: LedgerReport,
    pub validation: ValidationSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sensitivity: Option<SensitivityReport>,
}

/// Content hash of the two input files, stable across reruns.
pub fn inputs_digest(manifest_bytes: &[u8], params_bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(manifest_bytes);
    hasher.update(params_bytes);
    let digest = hasher.finalize();
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    format!("sha256:{hex}")
}

pub fn build_report(
    region: &str,
    year: i32,
    digest: String,
    items: &[LineItemResult],
    ledger: &LedgerSummary,
    validation: ValidationSection,
    sensitivity: Option<SensitivityReport>,
) -> ReportDocument {
    let mut item_reports: Vec<ItemReport> = items
        .iter()
        .map(|item| ItemReport {
            id: item.id.clone(),
            side: item.side,
            class: item.class,
            value: item.value.magnitude(),
            breakdown: item
                .breakdown
                .iter()
                .map(|(k, v)| (k.clone(), v.magnitude()))
                .collect(),
        })
        .collect();
    item_reports.sort_by(|a, b| a.id.cmp(&b.id));

    ReportDocument {
        version: env!("CARGO_PKG_VERSION").to_string(),
        inputs_digest: digest,
        region: region.to_string(),
        year,
        items: item_reports,
        ledger: LedgerReport {
            es_total: ledger.es_total.magnitude(),
            eds_total: ledger.eds_total.magnitude(),
            net: ledger.net.magnitude(),
            shares_es: ledger.shares_es.clone(),
            shares_eds: ledger.shares_eds.clone(),
            eds_to_es_ratio: ledger.eds_to_es_ratio,
            unit: "RMB/year".to_string(),
        },
        validation,
        sensitivity,
    }
}

/// Canonical JSON: converting through `serde_json::Value` sorts object
/// keys (the default map is a BTreeMap); floats use the shortest
/// round-trip representation; output is newline-terminated.
pub fn to_canonical_json(report: &ReportDocument) -> String {
    let value = serde_json::to_value(report).expect("report serialization");
    let mut text = serde_json::to_string(&value).expect("value serialization");
    text.push('\n');
    text
}

/// 4-significant-figure rendering for tables.
fn sig4(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    let exponent = x.abs().log10().floor() as i32;
    if (-2..4).contains(&exponent) {
        let decimals = (3 - exponent).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.3e}")
    }
}

/// Renders the ledger as a text table: items sorted by value descending
/// within each side, shares rounded to 0.1%.
pub fn to_table(report: &ReportDocument) -> String {
    let mut out = String::new();
    out.push_str(&format!("Valuation ledger: {} ({})\n", report.region, report.year));
    out.push_str(&format!("Inputs: {}\n\n", report.inputs_digest));

    for (side, title, total, shares) in [
        (Side::Es, "Ecosystem services", report.ledger.es_total, &report.ledger.shares_es),
        (Side::Eds, "Ecosystem disservices", report.ledger.eds_total, &report.ledger.shares_eds),
    ] {
        let mut rows: Vec<&ItemReport> = report.items.iter().filter(|i| i.side == side).collect();
        rows.sort_by(|a, b| b.value.partial_cmp(&a.value).unwrap().then(a.id.cmp(&b.id)));
        out.push_str(&format!("{title} (RMB/year)\n"));
        for item in rows {
            let share = shares
                .get(&item.id)
                .map(|s| format!("{:.1}%", s * 100.0))
                .unwrap_or_else(|| "-".to_string());
            out.push_str(&format!("  {:<24} {:>12} {:>8}\n", item.id, sig4(item.value), share));
            for (term, value) in &item.breakdown {
                out.push_str(&format!("    {:<22} {:>12}\n", term, sig4(*value)));
            }
        }
        out.push_str(&format!("  {:<24} {:>12}\n\n", "total", sig4(total)));
    }

    out.push_str(&format!("Net ecosystem effect: {} RMB/year\n", sig4(report.ledger.net)));
    if let Some(ratio) = report.ledger.eds_to_es_ratio {
        out.push_str(&format!("EDS/ES ratio: {:.1}%\n", ratio * 100.0));
    }

    if let Some(sens) = &report.sensitivity {
        out.push_str(&format!(
            "\nSensitivity (n={}, seed={})\n",
            sens.samples, sens.seed
        ));
        for (label, stats) in [
            ("es_total", &sens.es_total),
            ("eds_total", &sens.eds_total),
            ("net", &sens.net),
        ] {
            out.push_str(&format!(
                "  {:<10} mean {:>12}  sd {:>12}  p5 {:>12}  p95 {:>12}\n",
                label,
                sig4(stats.mean),
                sig4(stats.sd),
                sig4(stats.p5),
                sig4(stats.p95)
            ));
        }
        if !sens.elasticities.is_empty() {
            out.push_str("  elasticities of net value:\n");
            for (id, e) in &sens.elasticities {
                out.push_str(&format!("    {id:<22} {e:>10.4}\n"));
            }
        }
    }
    out
}

//! End-to-end acceptance suite. Each test covers one acceptance criterion
//! and prints a single PASS line when it holds; any assertion failure fails
//! the corresponding test.

use std::collections::BTreeMap;

use esdv::engine::{bind, evaluate, run};
use esdv::ingest::{parse_model_manifest, parse_params_csv, params_to_csv, model_to_json};
use esdv::kernels::{
    build_ledger, disease_value, evaluate_kernel, infrastructure_damage_value, water_deficit_value,
    KernelError, KernelSpec, LineItemResult, Side, SlotKind, SlotValue, SlotValues, KERNELS,
};
use esdv::report::{build_report, inputs_digest, to_canonical_json, ValidationSection};
use esdv::sensitivity::{monte_carlo, oat_elasticity, Distribution, SensitivityConfig};
use esdv::taxonomy::{
    check_double_counting, validate_cascade, CascadeGraph, CascadeNode, DisserviceTier, NodeKind,
    ValuedItem, ViolationCode,
};
use esdv::taxonomy::FunctionalClass;
use esdv::transfer::{ratio_from_donors, DonorObservation, TransferRecord};
use esdv::units::{parse_unit, BaseDim, Quantity, UnitDim};

fn fixture(name: &str) -> String {
    format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn assert_rel(actual: f64, expected: f64, tol: f64, what: &str) {
    let denom = expected.abs().max(1e-300);
    let rel = (actual - expected).abs() / denom;
    assert!(rel <= tol, "{what}: {actual} vs {expected} (rel {rel:.3e} > {tol:.1e})");
}

fn q(v: f64, unit: &str) -> Quantity {
    Quantity::parse(v, unit).unwrap()
}

/// Deterministic splitmix64 stream for random test inputs.
struct Rng(u64);

impl Rng {
    fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    fn u01(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

// ---------------------------------------------------------------------------
// Criterion 1: golden ledger from reported totals
// ---------------------------------------------------------------------------

fn reported_item(id: &str, side: Side, value: f64) -> LineItemResult {
    LineItemResult {
        id: id.to_string(),
        side,
        class: FunctionalClass::Regulating,
        value: q(value, "RMB/year"),
        breakdown: BTreeMap::new(),
    }
}

#[test]
fn criterion_1_golden_ledger() {
    let items = vec![
        reported_item("ecotourism", Side::Es, 85.5e9),
        reported_item("climate_regulation", Side::Es, 76.3e9),
        reported_item("food_raw_material", Side::Es, 29.7e9),
        reported_item("environmental_quality", Side::Es, 11.6e9),
        reported_item("soil_retention", Side::Es, 2.968e8),
        reported_item("water_deficit", Side::Eds, 8.1e9),
        reported_item("infrastructure_damage", Side::Eds, 7.989e8),
        reported_item("disease_burden", Side::Eds, 2.312e8),
    ];
    let ledger = build_ledger(&items).unwrap();

    assert_rel(ledger.es_total.magnitude(), 203.3968e9, 1e-3, "es_total");
    assert_rel(ledger.eds_total.magnitude(), 9.1301e9, 2e-3, "eds_total");
    assert_rel(ledger.net.magnitude(), 194.2667e9, 1e-3, "net");

    let eco_share = ledger.shares_es["ecotourism"];
    let cli_share = ledger.shares_es["climate_regulation"];
    let water_share = ledger.shares_eds["water_deficit"];
    let ratio = ledger.eds_to_es_ratio.unwrap();
    assert!((eco_share - 0.420).abs() <= 0.006, "ecotourism share {eco_share}");
    assert!((cli_share - 0.375).abs() <= 0.006, "climate share {cli_share}");
    assert!((water_share - 0.887).abs() <= 0.010, "water EDS share {water_share}");
    assert!((ratio - 0.0449).abs() <= 0.001, "EDS/ES ratio {ratio}");

    println!("PASS criterion 1: golden ledger totals, shares and ratio within tolerance");
}

// ---------------------------------------------------------------------------
// Criterion 2: kernel recomputation vs reported values
// ---------------------------------------------------------------------------

#[test]
fn criterion_2_kernel_recomputation() {
    let v_w = water_deficit_value(
        &q(1.34e9, "m3/year"),
        &q(6.0, "RMB/m3"),
        &q(4.2e7, "m3/year"),
        &q(0.12, "RMB/m3"),
    )
    .unwrap();
    assert_rel(v_w.magnitude(), 8.04504e9, 1e-12, "V_W recomputed");
    assert_rel(v_w.magnitude(), 8.1e9, 0.01, "V_W vs reported");

    let v_i = infrastructure_damage_value(&q(1.82e9, "RMB/year"), &Quantity::dimensionless(0.44).unwrap()).unwrap();
    assert_rel(v_i.magnitude(), 8.008e8, 1e-12, "V_I recomputed");
    assert_rel(v_i.magnitude(), 7.989e8, 0.01, "V_I vs reported");

    let v_d = disease_value(
        &q(21.54e6, "person"),
        &[
            (
                Quantity::dimensionless(0.0081).unwrap(),
                Quantity::dimensionless(0.61).unwrap(),
                q(977.03, "RMB/person"),
            ),
            (
                Quantity::dimensionless(0.0129).unwrap(),
                Quantity::dimensionless(0.61).unwrap(),
                q(629.68, "RMB/person"),
            ),
        ],
    )
    .unwrap();
    // independent hand-computed expression, term by term
    let oracle = 21.54e6 * 0.0081 * 0.61 * 977.03 + 21.54e6 * 0.0129 * 0.61 * 629.68;
    assert_rel(v_d.magnitude(), oracle, 1e-12, "V_D vs hand oracle");
    assert_rel(v_d.magnitude(), 2.312e8, 0.10, "V_D vs reported");

    println!("PASS criterion 2: V_W, V_I, V_D recomputed from inputs match the reported values");
}

// ---------------------------------------------------------------------------
// Criterion 3: kernel property suite
// ---------------------------------------------------------------------------

fn scalar_value(rng: &mut Rng, fraction: bool, strictly_positive: bool) -> f64 {
    if fraction {
        rng.u01()
    } else if strictly_positive {
        0.1 + rng.u01() * 10.0
    } else {
        rng.u01() * 100.0
    }
}

/// Random, domain-valid slot values for one kernel.
fn gen_slots(spec: &KernelSpec, rng: &mut Rng) -> SlotValues {
    let mut slots = SlotValues::new();
    for slot in spec.slots {
        match slot.kind {
            SlotKind::Scalar => {
                let v = scalar_value(rng, slot.fraction, slot.strictly_positive);
                let unit = parse_unit(slot.unit).unwrap();
                slots.insert(slot.name.to_string(), SlotValue::Scalar(Quantity::new(v, unit).unwrap()));
            }
            SlotKind::Variadic(elems) => {
                let count = 1 + (rng.next_u64() % 3) as usize;
                let mut rows = Vec::with_capacity(count);
                for _ in 0..count {
                    let mut row = BTreeMap::new();
                    for e in elems {
                        let v = scalar_value(rng, e.fraction, false);
                        let unit = parse_unit(e.unit).unwrap();
                        row.insert(e.name.to_string(), Quantity::new(v, unit).unwrap());
                    }
                    rows.push(row);
                }
                slots.insert(slot.name.to_string(), SlotValue::Rows(rows));
            }
        }
    }
    slots
}

/// Independent straight-line expression for each kernel, computed from raw
/// magnitudes without going through the dimension layer.
fn naive_oracle(id: &str, slots: &SlotValues) -> f64 {
    let s = |name: &str| match &slots[name] {
        SlotValue::Scalar(qty) => qty.magnitude(),
        _ => panic!("scalar slot"),
    };
    let rows = |name: &str| match &slots[name] {
        SlotValue::Rows(r) => r,
        _ => panic!("variadic slot"),
    };
    let sum2 = |name: &str, a: &str, b: &str| {
        rows(name).iter().map(|r| r[a].magnitude() * r[b].magnitude()).sum::<f64>()
    };
    let sum3 = |name: &str, a: &str, b: &str, c: &str| {
        rows(name)
            .iter()
            .map(|r| r[a].magnitude() * r[b].magnitude() * r[c].magnitude())
            .sum::<f64>()
    };
    match id {
        "prevalued" => s("value"),
        "infra_damage" => s("M") * s("P_T"),
        "water_deficit" => s("A_E") * s("Pr_WE") + s("A_A") * s("Pr_WA"),
        "disease_burden" => s("Pop") * sum3("diseases", "alpha", "beta", "cost"),
        "food_raw_material" => sum2("products", "amount", "price"),
        "climate_regulation" => {
            let volume = s("A_W") * s("ET_avg") * 10.0;
            volume * s("Va") / s("Ef") * s("Pr_E")
                + volume * s("X") * s("Pr_E")
                + sum2("carbon", "amount", "price")
                + sum2("oxygen", "amount", "price")
        }
        "air_quality" => s("R") * s("Pr_R") + s("I_anion") * s("Pr_I"),
        "water_quality" => (s("W_F") + s("W_W")) * s("Pr_WQ"),
        "noise_reduction" => s("N_F") / s("N_R") * s("Pr_N"),
        "soil_retention" => {
            s("R_S") * s("N_SN") * s("Pr_SN") + s("R_S") / s("rho_S") * s("P_SC") * s("Pr_SC")
        }
        "ecotourism" => sum2("recreation", "visitors", "fee") + sum3("education", "area", "coeff", "income"),
        other => panic!("unknown kernel {other}"),
    }
}

/// Scales every currency-carrying slot by `lambda`.
fn scale_prices(slots: &SlotValues, lambda: f64) -> SlotValues {
    let currency = |qty: &Quantity| qty.unit().exponent(BaseDim::Currency) != 0;
    let scale = |qty: &Quantity| {
        if currency(qty) {
            qty.with_magnitude(qty.magnitude() * lambda).unwrap()
        } else {
            *qty
        }
    };
    slots
        .iter()
        .map(|(name, value)| {
            let scaled = match value {
                SlotValue::Scalar(qty) => SlotValue::Scalar(scale(qty)),
                SlotValue::Rows(rows) => SlotValue::Rows(
                    rows.iter()
                        .map(|row| row.iter().map(|(k, qty)| (k.clone(), scale(qty))).collect())
                        .collect(),
                ),
            };
            (name.clone(), scaled)
        })
        .collect()
}

#[test]
fn criterion_3_kernel_properties() {
    let mut rng = Rng(0x5eed_0003);

    // dimensional soundness: every slot rejects a wrong-dimension binding
    let mut corrupted = 0usize;
    for spec in KERNELS {
        let base = gen_slots(spec, &mut rng);
        for slot in spec.slots {
            match slot.kind {
                SlotKind::Scalar => {
                    let mut slots = base.clone();
                    let wrong = parse_unit(slot.unit).unwrap().mul(&UnitDim::base(BaseDim::Sound));
                    slots.insert(slot.name.to_string(), SlotValue::Scalar(Quantity::new(0.5, wrong).unwrap()));
                    let result = evaluate_kernel(spec.id, &slots, false);
                    assert!(
                        matches!(result, Err(KernelError::Dimension { .. })),
                        "{}/{} accepted a wrong dimension: {result:?}",
                        spec.id,
                        slot.name
                    );
                    corrupted += 1;
                }
                SlotKind::Variadic(elems) => {
                    for e in elems {
                        let mut slots = base.clone();
                        if let Some(SlotValue::Rows(rows)) = slots.get_mut(slot.name) {
                            let wrong = parse_unit(e.unit).unwrap().mul(&UnitDim::base(BaseDim::Sound));
                            rows[0].insert(e.name.to_string(), Quantity::new(0.5, wrong).unwrap());
                        }
                        let result = evaluate_kernel(spec.id, &slots, false);
                        assert!(
                            matches!(result, Err(KernelError::Dimension { .. })),
                            "{}/{}.{} accepted a wrong dimension: {result:?}",
                            spec.id,
                            slot.name,
                            e.name
                        );
                        corrupted += 1;
                    }
                }
            }
        }
    }
    assert!(corrupted >= 30, "expected to corrupt every slot, got {corrupted}");

    // degree-1 homogeneity in prices, 100 random inputs per kernel
    for spec in KERNELS {
        for _ in 0..100 {
            let slots = gen_slots(spec, &mut rng);
            let lambda = 0.1 + rng.u01() * 10.0;
            let base = evaluate_kernel(spec.id, &slots, false).unwrap().value.magnitude();
            let scaled = evaluate_kernel(spec.id, &scale_prices(&slots, lambda), false)
                .unwrap()
                .value
                .magnitude();
            assert_rel(scaled, lambda * base, 1e-12, &format!("{} homogeneity", spec.id));
        }
    }

    // zero annihilation: all free inputs at zero give exactly zero
    for spec in KERNELS {
        let mut slots = SlotValues::new();
        for slot in spec.slots {
            match slot.kind {
                SlotKind::Scalar => {
                    let v = if slot.strictly_positive { 1.0 } else { 0.0 };
                    let unit = parse_unit(slot.unit).unwrap();
                    slots.insert(slot.name.to_string(), SlotValue::Scalar(Quantity::new(v, unit).unwrap()));
                }
                SlotKind::Variadic(elems) => {
                    let mut row = BTreeMap::new();
                    for e in elems {
                        let unit = parse_unit(e.unit).unwrap();
                        row.insert(e.name.to_string(), Quantity::new(0.0, unit).unwrap());
                    }
                    slots.insert(slot.name.to_string(), SlotValue::Rows(vec![row]));
                }
            }
        }
        let out = evaluate_kernel(spec.id, &slots, false).unwrap();
        assert_eq!(out.value.magnitude(), 0.0, "{} zero annihilation", spec.id);
    }

    // breakdown additivity and naive-oracle equivalence, 1000 inputs per kernel
    for spec in KERNELS {
        for _ in 0..1000 {
            let slots = gen_slots(spec, &mut rng);
            let out = evaluate_kernel(spec.id, &slots, false).unwrap();
            if !out.breakdown.is_empty() {
                let sum: f64 = out.breakdown.values().map(|v| v.magnitude()).sum();
                assert_rel(out.value.magnitude(), sum, 1e-12, &format!("{} breakdown sum", spec.id));
            }
            assert_rel(
                out.value.magnitude(),
                naive_oracle(spec.id, &slots),
                1e-12,
                &format!("{} naive oracle", spec.id),
            );
        }
    }

    println!(
        "PASS criterion 3: dimension rejection ({corrupted} corrupted bindings), price homogeneity, \
         zero annihilation, breakdown additivity and oracle equivalence hold"
    );
}

// ---------------------------------------------------------------------------
// Criterion 4: cascade taxonomy suite
// ---------------------------------------------------------------------------

fn node(id: &str, kind: NodeKind, tier: Option<DisserviceTier>) -> CascadeNode {
    CascadeNode {
        id: id.to_string(),
        kind,
        tier,
        class: None,
        label: id.to_string(),
    }
}

/// The published urban pathway: three final disservices, each causing a
/// financial-cost effect that feeds value change.
fn pathway_fixture() -> CascadeGraph {
    let mut g = CascadeGraph::new();
    g.add_node(node("green_space", NodeKind::EcosystemStructure, None));
    g.add_node(node("plant_growth", NodeKind::EcosystemFunction, None));
    g.add_node(node("infrastructure_damage", NodeKind::Disservice, Some(DisserviceTier::Final)));
    g.add_node(node("water_quantity_decrease", NodeKind::Disservice, Some(DisserviceTier::Final)));
    g.add_node(node("diseases_injuries", NodeKind::Disservice, Some(DisserviceTier::Final)));
    g.add_node(node("financial_cost", NodeKind::NegativeEffect, None));
    g.add_node(node("value_loss", NodeKind::ValueChange, None));
    g.add_edge("green_space", "plant_growth");
    for d in ["infrastructure_damage", "water_quantity_decrease", "diseases_injuries"] {
        g.add_edge("plant_growth", d);
        g.add_edge(d, "financial_cost");
    }
    g.add_edge("financial_cost", "value_loss");
    g
}

struct Item(&'static str, &'static str);
impl ValuedItem for Item {
    fn item_id(&self) -> &str {
        self.0
    }
    fn node_id(&self) -> &str {
        self.1
    }
}

#[test]
fn criterion_4_taxonomy_suite() {
    assert_eq!(validate_cascade(&pathway_fixture()).unwrap(), vec![]);

    let expect_one = |g: &CascadeGraph, code: ViolationCode| {
        let v = validate_cascade(g).unwrap();
        assert_eq!(v.len(), 1, "expected one violation, got {v:?}");
        assert_eq!(v[0].code, code);
    };

    // A: final disservice with no negative-effect edge
    let mut a = pathway_fixture();
    a.add_node(node("orphan_final", NodeKind::Disservice, Some(DisserviceTier::Final)));
    a.add_edge("plant_growth", "orphan_final");
    expect_one(&a, ViolationCode::FinalWithoutEffect);

    // B: intermediate disservice with a direct negative-effect edge
    let mut b = pathway_fixture();
    b.add_node(node("invasive_species", NodeKind::Disservice, Some(DisserviceTier::Intermediate)));
    b.add_edge("plant_growth", "invasive_species");
    b.add_edge("invasive_species", "financial_cost");
    b.add_edge("invasive_species", "water_quantity_decrease");
    expect_one(&b, ViolationCode::IntermediateDirectEffect);

    // C: intermediate disservice reaching no final disservice or service
    let mut c = pathway_fixture();
    c.add_node(node("dead_end", NodeKind::Disservice, Some(DisserviceTier::Intermediate)));
    c.add_edge("plant_growth", "dead_end");
    expect_one(&c, ViolationCode::IntermediateUnreachable);

    // D: edge kind outside the cascade order
    let mut d = pathway_fixture();
    d.add_edge("green_space", "value_loss");
    expect_one(&d, ViolationCode::ForbiddenEdge);

    // E: cycle among forward edges
    let mut e = pathway_fixture();
    e.add_node(node("d1", NodeKind::Disservice, Some(DisserviceTier::Intermediate)));
    e.add_node(node("d2", NodeKind::Disservice, Some(DisserviceTier::Intermediate)));
    e.add_edge("d1", "d2");
    e.add_edge("d2", "d1");
    e.add_edge("d1", "water_quantity_decrease");
    e.add_edge("d2", "water_quantity_decrease");
    expect_one(&e, ViolationCode::ForwardCycle);

    // double counting: valuing the intermediate "decrease in air quality"
    let mut dc = pathway_fixture();
    dc.add_node(node("air_quality_decrease", NodeKind::Disservice, Some(DisserviceTier::Intermediate)));
    dc.add_edge("plant_growth", "air_quality_decrease");
    dc.add_edge("air_quality_decrease", "diseases_injuries");
    assert_eq!(validate_cascade(&dc).unwrap(), vec![]);
    let items = [
        Item("infra", "infrastructure_damage"),
        Item("air", "air_quality_decrease"),
    ];
    let v = check_double_counting(&dc, &items).unwrap();
    assert_eq!(v.len(), 1);
    assert_eq!(v[0].code, ViolationCode::DoubleCount);
    assert_eq!(v[0].nodes, vec!["air_quality_decrease".to_string()]);

    println!("PASS criterion 4: clean pathway fixture plus all six violation classes detected");
}

// ---------------------------------------------------------------------------
// Criterion 5: value transfer
// ---------------------------------------------------------------------------

#[test]
fn criterion_5_transfer() {
    let rec = TransferRecord {
        derived_id: "P_T".into(),
        observations: vec![DonorObservation {
            site: "donor cities".into(),
            numerator: Quantity::dimensionless(44.0).unwrap(),
            denominator: Quantity::dimensionless(100.0).unwrap(),
        }],
        adjustments: vec![],
    };
    let p = ratio_from_donors(&rec).unwrap();
    assert_eq!(p.quantity.magnitude(), 0.44, "single-donor reconstruction");

    let mut rng = Rng(0x5eed_0005);
    for set in 0..200 {
        let count = 1 + (rng.next_u64() % 8) as usize;
        let mut ratios = Vec::with_capacity(count);
        let mut observations = Vec::with_capacity(count);
        for i in 0..count {
            let num = rng.u01() * 100.0;
            let den = 1.0 + rng.u01() * 100.0;
            ratios.push(num / den);
            observations.push(DonorObservation {
                site: format!("site{i}"),
                numerator: Quantity::dimensionless(num).unwrap(),
                denominator: Quantity::dimensionless(den).unwrap(),
            });
        }
        let rec = TransferRecord {
            derived_id: format!("r{set}"),
            observations,
            adjustments: vec![],
        };
        let p = ratio_from_donors(&rec).unwrap();
        let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mean = p.quantity.magnitude();
        assert!(
            (lo - 1e-12..=hi + 1e-12).contains(&mean),
            "set {set}: mean {mean} outside [{lo}, {hi}]"
        );
        assert_eq!(p.uncertainty, Some((lo, hi)));
    }

    println!("PASS criterion 5: single-donor reconstruction exact; mean-in-[min,max] over 200 donor sets");
}

// ---------------------------------------------------------------------------
// Criterion 6: sensitivity determinism and statistics
// ---------------------------------------------------------------------------

fn tiny_model_json() -> &'static str {
    r#"{
        "region": "test", "year": 2018,
        "cascade": {
            "nodes": [
                {"id": "s", "kind": "ecosystem_structure", "label": "s"},
                {"id": "f", "kind": "ecosystem_function", "label": "f"},
                {"id": "d", "kind": "disservice", "tier": "final", "class": "regulating", "label": "d"},
                {"id": "e", "kind": "negative_effect", "label": "e"},
                {"id": "vc", "kind": "value_change", "label": "vc"}
            ],
            "edges": [["s","f"],["f","d"],["d","e"],["e","vc"]]
        },
        "items": [
            {"id": "infra", "kernel": "infra_damage", "side": "EDS", "class": "regulating",
             "node": "d", "slots": {"M": "M", "P_T": "P_T"}}
        ]
    }"#
}

#[test]
fn criterion_6_sensitivity() {
    // unit elasticity for multiplicative parameters
    let tiny = parse_model_manifest(tiny_model_json().as_bytes()).unwrap();
    let csv = "id,value,unit,source,year,method,low,high\nM,2,RMB/year,s,2018,statistic,,\nP_T,50,%,s,2018,statistic,,\n";
    let tiny_params = parse_params_csv(csv.as_bytes()).unwrap();
    for id in ["M", "P_T"] {
        let e = oat_elasticity(&tiny, &tiny_params, id, 1e-3, false).unwrap();
        assert!((e.abs() - 1.0).abs() < 1e-6, "elasticity of {id} is {e}");
    }

    // bit-identical reports: repeated runs and 1 vs 4 worker threads
    let model_bytes = std::fs::read(fixture("beijing2018.json")).unwrap();
    let params_bytes = std::fs::read(fixture("beijing2018_params.csv")).unwrap();
    let model = parse_model_manifest(&model_bytes).unwrap();
    let params = parse_params_csv(&params_bytes).unwrap();
    let config = SensitivityConfig {
        samples: 1000,
        seed: 7,
        distribution: Distribution::Uniform,
        delta: 1e-3,
    };
    let first = monte_carlo(&model, &params, &config, false, 1).unwrap();
    let second = monte_carlo(&model, &params, &config, false, 1).unwrap();
    let threaded = monte_carlo(&model, &params, &config, false, 4).unwrap();
    assert_eq!(first, second, "repeated runs differ");
    assert_eq!(first, threaded, "thread count changed the report");
    assert_eq!(
        serde_json::to_string(&first).unwrap(),
        serde_json::to_string(&threaded).unwrap(),
        "serialized reports differ"
    );

    // Monte-Carlo mean within 3 standard errors of the analytic mean for a
    // linear item: net = M × P_T with M uniform on [0, 4], so E[net] = 1
    let csv = "id,value,unit,source,year,method,low,high\nM,2,RMB/year,s,2018,statistic,0,4\nP_T,50,%,s,2018,statistic,,\n";
    let linear_params = parse_params_csv(csv.as_bytes()).unwrap();
    let config = SensitivityConfig {
        samples: 10_000,
        seed: 11,
        distribution: Distribution::Uniform,
        delta: 1e-3,
    };
    let report = monte_carlo(&tiny, &linear_params, &config, false, 1).unwrap();
    let se = report.net.sd / (report.samples as f64).sqrt();
    assert!(
        (report.net.mean.abs() - 1.0).abs() < 3.0 * se,
        "MC mean {} vs analytic 1.0 (3se {})",
        report.net.mean,
        3.0 * se
    );

    println!("PASS criterion 6: unit elasticities, bit-identical seeded reports, MC mean within 3 s.e.");
}

// ---------------------------------------------------------------------------
// Criterion 7: round-trips and canonical output determinism
// ---------------------------------------------------------------------------

#[test]
fn criterion_7_round_trip_and_determinism() {
    let model_bytes = std::fs::read(fixture("beijing2018.json")).unwrap();
    let params_bytes = std::fs::read(fixture("beijing2018_params.csv")).unwrap();

    // parse → serialize → parse identity for both input formats
    let model = parse_model_manifest(&model_bytes).unwrap();
    let model_again = parse_model_manifest(model_to_json(&model).as_bytes()).unwrap();
    assert_eq!(model, model_again, "manifest round trip");

    let params = parse_params_csv(&params_bytes).unwrap();
    let params_again = parse_params_csv(params_to_csv(&params).as_bytes()).unwrap();
    assert_eq!(params, params_again, "parameter CSV round trip");

    // canonical JSON byte-identical across two full pipeline runs
    let render = || {
        let model = parse_model_manifest(&model_bytes).unwrap();
        let params = parse_params_csv(&params_bytes).unwrap();
        let (items, ledger) = run(&model, &params, false).unwrap();
        let report = build_report(
            &model.region,
            model.year,
            inputs_digest(&model_bytes, &params_bytes),
            &items,
            &ledger,
            ValidationSection::default(),
            None,
        );
        to_canonical_json(&report)
    };
    let a = render();
    let b = render();
    assert_eq!(a, b, "canonical JSON differs between runs");
    assert!(a.ends_with('\n'));

    // and the shipped fixtures bind, validate and evaluate cleanly
    let graph = model.cascade.to_graph();
    assert_eq!(validate_cascade(&graph).unwrap(), vec![]);
    assert_eq!(check_double_counting(&graph, &model.items).unwrap(), vec![]);
    let merged = esdv::ingest::inject_transfers(&model, &params).unwrap();
    let bound = bind(&model, &merged).unwrap();
    let (_, ledger) = evaluate(&bound, false).unwrap();
    assert!(ledger.net.magnitude() > 0.0);

    println!("PASS criterion 7: both formats round-trip; canonical JSON byte-identical across runs");
}

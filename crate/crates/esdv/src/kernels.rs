//! Valuation kernels: pure functions from dimensioned parameters to a
//! monetary flow (RMB/year), plus the ES/EDS ledger aggregator.
//!
//! Disservice values are computed and stored as positive losses; the sign
//! is applied exactly once, in [`build_ledger`]. Every kernel is generic
//! over sequence lengths; `strict` mode enforces the fixed counts of the
//! Beijing dataset (4 product classes, 3 carbon and 4 oxygen land types).

use std::collections::BTreeMap;
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::taxonomy::FunctionalClass;
use crate::units::{parse_unit, BaseDim, Quantity, UnitDim};

/// Ledger side of a line item.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Side {
    Es,
    Eds,
}

#[derive(Debug, Error, PartialEq)]
pub enum KernelError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("dimension error in slot `{slot}`: expected {expected}, got {actual}")]
    Dimension {
        slot: String,
        expected: String,
        actual: String,
    },
    #[error("singularity error: {0}")]
    Singularity(String),
    #[error("structural error: {0}")]
    Structural(String),
    #[error("arithmetic error: {0}")]
    Arithmetic(String),
}

/// RMB/year, the output dimension of every kernel.
pub fn rmb_per_year() -> UnitDim {
    UnitDim::base(BaseDim::Currency).div(&UnitDim::base(BaseDim::Time))
}

fn flow(magnitude: f64) -> Result<Quantity, KernelError> {
    Quantity::new(magnitude, rmb_per_year()).map_err(|_| KernelError::Arithmetic("non-finite result".into()))
}

fn check_dim(slot: &str, q: &Quantity, unit: &str) -> Result<(), KernelError> {
    let expected = parse_unit(unit).expect("registry unit literal");
    if q.has_dim(&expected) {
        Ok(())
    } else {
        Err(KernelError::Dimension {
            slot: slot.to_string(),
            expected: expected.format_unit(),
            actual: q.unit().format_unit(),
        })
    }
}

fn check_nonneg(slot: &str, q: &Quantity) -> Result<(), KernelError> {
    if q.magnitude() < 0.0 {
        Err(KernelError::Domain(format!("`{slot}` must be non-negative, got {}", q.magnitude())))
    } else {
        Ok(())
    }
}

fn check_fraction(slot: &str, q: &Quantity) -> Result<(), KernelError> {
    let v = q.magnitude();
    if !(0.0..=1.0).contains(&v) {
        Err(KernelError::Domain(format!("`{slot}` must lie in [0, 1], got {v}")))
    } else {
        Ok(())
    }
}

/// V_I: repair costs of plant-caused infrastructure damage, as a share of
/// total maintenance spending.
pub fn infrastructure_damage_value(m: &Quantity, p_t: &Quantity) -> Result<Quantity, KernelError> {
    check_dim("M", m, "RMB/year")?;
    check_dim("P_T", p_t, "one")?;
    check_nonneg("M", m)?;
    check_fraction("P_T", p_t)?;
    flow(m.magnitude() * p_t.magnitude())
}

/// V_W: artificial watering costs compensating the water deficit, for
/// ecological and agricultural use.
pub fn water_deficit_value(
    a_e: &Quantity,
    pr_we: &Quantity,
    a_a: &Quantity,
    pr_wa: &Quantity,
) -> Result<Quantity, KernelError> {
    check_dim("A_E", a_e, "m3/year")?;
    check_dim("Pr_WE", pr_we, "RMB/m3")?;
    check_dim("A_A", a_a, "m3/year")?;
    check_dim("Pr_WA", pr_wa, "RMB/m3")?;
    for (slot, q) in [("A_E", a_e), ("Pr_WE", pr_we), ("A_A", a_a), ("Pr_WA", pr_wa)] {
        check_nonneg(slot, q)?;
    }
    flow(a_e.magnitude() * pr_we.magnitude() + a_a.magnitude() * pr_wa.magnitude())
}

/// V_D: medical costs of plant- and wildlife-induced diseases. Each entry
/// is (incidence rate, plant-attribution share, per-patient cost); the
/// annual rate is implicit in the incidence.
pub fn disease_value(
    pop: &Quantity,
    diseases: &[(Quantity, Quantity, Quantity)],
) -> Result<Quantity, KernelError> {
    check_dim("Pop", pop, "person")?;
    check_nonneg("Pop", pop)?;
    let mut total = 0.0;
    for (i, (alpha, beta, cost)) in diseases.iter().enumerate() {
        check_dim(&format!("diseases[{i}].alpha"), alpha, "one")?;
        check_dim(&format!("diseases[{i}].beta"), beta, "one")?;
        check_dim(&format!("diseases[{i}].cost"), cost, "RMB/person")?;
        check_fraction(&format!("diseases[{i}].alpha"), alpha)?;
        check_fraction(&format!("diseases[{i}].beta"), beta)?;
        check_nonneg(&format!("diseases[{i}].cost"), cost)?;
        total += pop.magnitude() * alpha.magnitude() * beta.magnitude() * cost.magnitude();
    }
    flow(total)
}

/// V_F: market value of food and raw material production, summed over
/// product classes.
pub fn food_raw_material_value(items: &[(Quantity, Quantity)]) -> Result<Quantity, KernelError> {
    let mut total = 0.0;
    for (i, (amount, price)) in items.iter().enumerate() {
        check_dim(&format!("products[{i}].amount"), amount, "t/year")?;
        check_dim(&format!("products[{i}].price"), price, "RMB/t")?;
        check_nonneg(&format!("products[{i}].amount"), amount)?;
        check_nonneg(&format!("products[{i}].price"), price)?;
        total += amount.magnitude() * price.magnitude();
    }
    flow(total)
}

/// A kernel result with its sub-term breakdown.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelOutput {
    pub value: Quantity,
    pub breakdown: BTreeMap<String, Quantity>,
}

impl KernelOutput {
    fn plain(value: Quantity) -> KernelOutput {
        KernelOutput {
            value,
            breakdown: BTreeMap::new(),
        }
    }
}

/// V_cli = V_T + V_H + V_CO2 + V_O2.
///
/// V_T follows the replacement-cost chain ha·mm → m³ (×10) → kg of water
/// (1 t/m³) → kJ (×Va) → ÷Ef → ×Pr_E. V_H is the electricity that would
/// evaporate the same volume: m³ × X × Pr_E. Carbon and oxygen terms are
/// sums of amount×price.
#[allow(clippy::too_many_arguments)]
pub fn climate_regulation_value(
    a_w: &Quantity,
    et_avg: &Quantity,
    va: &Quantity,
    ef: &Quantity,
    pr_e: &Quantity,
    x: &Quantity,
    carbon: &[(Quantity, Quantity)],
    oxygen: &[(Quantity, Quantity)],
    strict: bool,
) -> Result<KernelOutput, KernelError> {
    check_dim("A_W", a_w, "ha")?;
    check_dim("ET_avg", et_avg, "mm/year")?;
    check_dim("Va", va, "kJ/kg")?;
    check_dim("Ef", ef, "one")?;
    check_dim("Pr_E", pr_e, "RMB/kWh")?;
    check_dim("X", x, "kWh/m3")?;
    for (slot, q) in [("A_W", a_w), ("ET_avg", et_avg), ("Va", va), ("Pr_E", pr_e), ("X", x)] {
        check_nonneg(slot, q)?;
    }
    if ef.magnitude() <= 0.0 {
        return Err(KernelError::Domain(format!(
            "`Ef` must be positive, got {}",
            ef.magnitude()
        )));
    }
    if strict && carbon.len() != 3 {
        return Err(KernelError::Structural(format!(
            "strict mode expects 3 carbon land types, got {}",
            carbon.len()
        )));
    }
    if strict && oxygen.len() != 4 {
        return Err(KernelError::Structural(format!(
            "strict mode expects 4 oxygen land types, got {}",
            oxygen.len()
        )));
    }

    // ha·mm/year → m³/year; evaporated water mass at 1 t/m³.
    let volume = a_w.magnitude() * et_avg.magnitude() * 10.0;
    let energy = volume * va.magnitude(); // va normalized to kJ/t
    let v_t = energy / ef.magnitude() * pr_e.magnitude(); // pr_e normalized to RMB/kJ
    let v_h = volume * x.magnitude() * pr_e.magnitude(); // x normalized to kJ/m³

    let mut v_co2 = 0.0;
    for (i, (amount, price)) in carbon.iter().enumerate() {
        check_dim(&format!("carbon[{i}].amount"), amount, "t/year")?;
        check_dim(&format!("carbon[{i}].price"), price, "RMB/t")?;
        check_nonneg(&format!("carbon[{i}].amount"), amount)?;
        check_nonneg(&format!("carbon[{i}].price"), price)?;
        v_co2 += amount.magnitude() * price.magnitude();
    }
    let mut v_o2 = 0.0;
    for (i, (amount, price)) in oxygen.iter().enumerate() {
        check_dim(&format!("oxygen[{i}].amount"), amount, "t/year")?;
        check_dim(&format!("oxygen[{i}].price"), price, "RMB/t")?;
        check_nonneg(&format!("oxygen[{i}].amount"), amount)?;
        check_nonneg(&format!("oxygen[{i}].price"), price)?;
        v_o2 += amount.magnitude() * price.magnitude();
    }

    let mut breakdown = BTreeMap::new();
    breakdown.insert("V_T".to_string(), flow(v_t)?);
    breakdown.insert("V_H".to_string(), flow(v_h)?);
    breakdown.insert("V_CO2".to_string(), flow(v_co2)?);
    breakdown.insert("V_O2".to_string(), flow(v_o2)?);
    Ok(KernelOutput {
        value: flow(v_t + v_h + v_co2 + v_o2)?,
        breakdown,
    })
}

/// V_A = V_R (pollutant reduction) + V_Ianion (anion release).
pub fn air_quality_value(
    r: &Quantity,
    pr_r: &Quantity,
    i_anion: &Quantity,
    pr_i: &Quantity,
) -> Result<KernelOutput, KernelError> {
    check_dim("R", r, "t/year")?;
    check_dim("Pr_R", pr_r, "RMB/t")?;
    check_dim("I_anion", i_anion, "t/year")?;
    check_dim("Pr_I", pr_i, "RMB/t")?;
    for (slot, q) in [("R", r), ("Pr_R", pr_r), ("I_anion", i_anion), ("Pr_I", pr_i)] {
        check_nonneg(slot, q)?;
    }
    let v_r = r.magnitude() * pr_r.magnitude();
    let v_i = i_anion.magnitude() * pr_i.magnitude();
    let mut breakdown = BTreeMap::new();
    breakdown.insert("V_R".to_string(), flow(v_r)?);
    breakdown.insert("V_Ianion".to_string(), flow(v_i)?);
    Ok(KernelOutput {
        value: flow(v_r + v_i)?,
        breakdown,
    })
}

/// V_WQ = (W_F + W_W) × Pr_WQ.
pub fn water_quality_value(
    w_f: &Quantity,
    w_w: &Quantity,
    pr_wq: &Quantity,
) -> Result<Quantity, KernelError> {
    check_dim("W_F", w_f, "t/year")?;
    check_dim("W_W", w_w, "t/year")?;
    check_dim("Pr_WQ", pr_wq, "RMB/t")?;
    for (slot, q) in [("W_F", w_f), ("W_W", w_w), ("Pr_WQ", pr_wq)] {
        check_nonneg(slot, q)?;
    }
    flow((w_f.magnitude() + w_w.magnitude()) * pr_wq.magnitude())
}

/// V_N = (N_F ÷ N_R) × Pr_N.
///
/// N_F ÷ N_R is a dimensionless window-equivalent count; Pr_N is the price
/// of one soundproof window. The per-year rate rides on the reduction
/// abilities, so the result is stamped RMB/year.
pub fn noise_reduction_value(
    n_f: &Quantity,
    n_r: &Quantity,
    pr_n: &Quantity,
) -> Result<Quantity, KernelError> {
    check_dim("N_F", n_f, "dB/year")?;
    check_dim("N_R", n_r, "dB/year")?;
    check_dim("Pr_N", pr_n, "RMB")?;
    check_nonneg("N_F", n_f)?;
    check_nonneg("Pr_N", pr_n)?;
    if n_r.magnitude() <= 0.0 {
        return Err(KernelError::Singularity(format!(
            "`N_R` soundproofing capacity must be positive, got {}",
            n_r.magnitude()
        )));
    }
    flow(n_f.magnitude() / n_r.magnitude() * pr_n.magnitude())
}

/// V_S = V_SN (nutrient retention) + V_SC (avoided cleaning of R_S÷ρ_S
/// cleared volume).
pub fn soil_retention_value(
    r_s: &Quantity,
    n_sn: &Quantity,
    pr_sn: &Quantity,
    rho_s: &Quantity,
    p_sc: &Quantity,
    pr_sc: &Quantity,
) -> Result<KernelOutput, KernelError> {
    check_dim("R_S", r_s, "t/year")?;
    check_dim("N_SN", n_sn, "one")?;
    check_dim("Pr_SN", pr_sn, "RMB/t")?;
    check_dim("rho_S", rho_s, "t/m3")?;
    check_dim("P_SC", p_sc, "one")?;
    check_dim("Pr_SC", pr_sc, "RMB/m3")?;
    check_nonneg("R_S", r_s)?;
    check_fraction("N_SN", n_sn)?;
    check_nonneg("Pr_SN", pr_sn)?;
    check_fraction("P_SC", p_sc)?;
    check_nonneg("Pr_SC", pr_sc)?;
    if rho_s.magnitude() <= 0.0 {
        return Err(KernelError::Singularity(format!(
            "`rho_S` bulk density must be positive, got {}",
            rho_s.magnitude()
        )));
    }
    let v_sn = r_s.magnitude() * n_sn.magnitude() * pr_sn.magnitude();
    let v_sc = r_s.magnitude() / rho_s.magnitude() * p_sc.magnitude() * pr_sc.magnitude();
    let mut breakdown = BTreeMap::new();
    breakdown.insert("V_SN".to_string(), flow(v_sn)?);
    breakdown.insert("V_SC".to_string(), flow(v_sc)?);
    Ok(KernelOutput {
        value: flow(v_sn + v_sc)?,
        breakdown,
    })
}

/// V_Eco = V_Rec (visitor fees) + V_Edu (education income over adjusted
/// reserve areas).
pub fn ecotourism_value(
    recreation: &[(Quantity, Quantity)],
    education: &[(Quantity, Quantity, Quantity)],
) -> Result<KernelOutput, KernelError> {
    let mut v_rec = 0.0;
    for (i, (visitors, fee)) in recreation.iter().enumerate() {
        check_dim(&format!("recreation[{i}].visitors"), visitors, "visitor/year")?;
        check_dim(&format!("recreation[{i}].fee"), fee, "RMB/visitor")?;
        check_nonneg(&format!("recreation[{i}].visitors"), visitors)?;
        check_nonneg(&format!("recreation[{i}].fee"), fee)?;
        v_rec += visitors.magnitude() * fee.magnitude();
    }
    let mut v_edu = 0.0;
    for (i, (area, coeff, income)) in education.iter().enumerate() {
        check_dim(&format!("education[{i}].area"), area, "ha")?;
        check_dim(&format!("education[{i}].coeff"), coeff, "one")?;
        check_dim(&format!("education[{i}].income"), income, "RMB/ha/year")?;
        check_nonneg(&format!("education[{i}].area"), area)?;
        check_nonneg(&format!("education[{i}].coeff"), coeff)?;
        check_nonneg(&format!("education[{i}].income"), income)?;
        v_edu += area.magnitude() * coeff.magnitude() * income.magnitude();
    }
    let mut breakdown = BTreeMap::new();
    breakdown.insert("V_Rec".to_string(), flow(v_rec)?);
    breakdown.insert("V_Edu".to_string(), flow(v_edu)?);
    Ok(KernelOutput {
        value: flow(v_rec + v_edu)?,
        breakdown,
    })
}

/// Pass-through for line items whose value is taken directly from an
/// external report.
pub fn prevalued(value: &Quantity) -> Result<Quantity, KernelError> {
    check_dim("value", value, "RMB/year")?;
    check_nonneg("value", value)?;
    flow(value.magnitude())
}

// ---------------------------------------------------------------------------
// Kernel registry and dispatcher
// ---------------------------------------------------------------------------

/// One element of a variadic slot row.
#[derive(Debug, Clone, Copy)]
pub struct ElementSpec {
    pub name: &'static str,
    pub unit: &'static str,
    /// constrained to [0, 1]
    pub fraction: bool,
}

#[derive(Debug, Clone, Copy)]
pub enum SlotKind {
    Scalar,
    Variadic(&'static [ElementSpec]),
}

/// Declared signature of one kernel slot; drives dimension checking at
/// bind time and random-input generation in the property suite.
#[derive(Debug, Clone, Copy)]
pub struct SlotSpec {
    pub name: &'static str,
    pub unit: &'static str,
    pub kind: SlotKind,
    pub fraction: bool,
    pub strictly_positive: bool,
}

impl SlotSpec {
    const fn scalar(name: &'static str, unit: &'static str) -> SlotSpec {
        SlotSpec {
            name,
            unit,
            kind: SlotKind::Scalar,
            fraction: false,
            strictly_positive: false,
        }
    }
    const fn fraction(name: &'static str) -> SlotSpec {
        SlotSpec {
            name,
            unit: "one",
            kind: SlotKind::Scalar,
            fraction: true,
            strictly_positive: false,
        }
    }
    const fn positive(name: &'static str, unit: &'static str) -> SlotSpec {
        SlotSpec {
            name,
            unit,
            kind: SlotKind::Scalar,
            fraction: false,
            strictly_positive: true,
        }
    }
    const fn variadic(name: &'static str, elements: &'static [ElementSpec]) -> SlotSpec {
        SlotSpec {
            name,
            unit: "one",
            kind: SlotKind::Variadic(elements),
            fraction: false,
            strictly_positive: false,
        }
    }
}

const fn elem(name: &'static str, unit: &'static str) -> ElementSpec {
    ElementSpec {
        name,
        unit,
        fraction: false,
    }
}

const fn elem_fraction(name: &'static str) -> ElementSpec {
    ElementSpec {
        name,
        unit: "one",
        fraction: true,
    }
}

#[derive(Debug, Clone, Copy)]
pub struct KernelSpec {
    pub id: &'static str,
    pub slots: &'static [SlotSpec],
}

const AMOUNT_PRICE: &[ElementSpec] = &[elem("amount", "t/year"), elem("price", "RMB/t")];

/// All kernel signatures, keyed by the manifest kernel ids.
pub const KERNELS: &[KernelSpec] = &[
    KernelSpec {
        id: "prevalued",
        slots: &[SlotSpec::scalar("value", "RMB/year")],
    },
    KernelSpec {
        id: "infra_damage",
        slots: &[SlotSpec::scalar("M", "RMB/year"), SlotSpec::fraction("P_T")],
    },
    KernelSpec {
        id: "water_deficit",
        slots: &[
            SlotSpec::scalar("A_E", "m3/year"),
            SlotSpec::scalar("Pr_WE", "RMB/m3"),
            SlotSpec::scalar("A_A", "m3/year"),
            SlotSpec::scalar("Pr_WA", "RMB/m3"),
        ],
    },
    KernelSpec {
        id: "disease_burden",
        slots: &[
            SlotSpec::scalar("Pop", "person"),
            SlotSpec::variadic(
                "diseases",
                &[elem_fraction("alpha"), elem_fraction("beta"), elem("cost", "RMB/person")],
            ),
        ],
    },
    KernelSpec {
        id: "food_raw_material",
        slots: &[SlotSpec::variadic("products", AMOUNT_PRICE)],
    },
    KernelSpec {
        id: "climate_regulation",
        slots: &[
            SlotSpec::scalar("A_W", "ha"),
            SlotSpec::scalar("ET_avg", "mm/year"),
            SlotSpec::scalar("Va", "kJ/kg"),
            SlotSpec::positive("Ef", "one"),
            SlotSpec::scalar("Pr_E", "RMB/kWh"),
            SlotSpec::scalar("X", "kWh/m3"),
            SlotSpec::variadic("carbon", AMOUNT_PRICE),
            SlotSpec::variadic("oxygen", AMOUNT_PRICE),
        ],
    },
    KernelSpec {
        id: "air_quality",
        slots: &[
            SlotSpec::scalar("R", "t/year"),
            SlotSpec::scalar("Pr_R", "RMB/t"),
            SlotSpec::scalar("I_anion", "t/year"),
            SlotSpec::scalar("Pr_I", "RMB/t"),
        ],
    },
    KernelSpec {
        id: "water_quality",
        slots: &[
            SlotSpec::scalar("W_F", "t/year"),
            SlotSpec::scalar("W_W", "t/year"),
            SlotSpec::scalar("Pr_WQ", "RMB/t"),
        ],
    },
    KernelSpec {
        id: "noise_reduction",
        slots: &[
            SlotSpec::scalar("N_F", "dB/year"),
            SlotSpec::positive("N_R", "dB/year"),
            SlotSpec::scalar("Pr_N", "RMB"),
        ],
    },
    KernelSpec {
        id: "soil_retention",
        slots: &[
            SlotSpec::scalar("R_S", "t/year"),
            SlotSpec::fraction("N_SN"),
            SlotSpec::scalar("Pr_SN", "RMB/t"),
            SlotSpec::positive("rho_S", "t/m3"),
            SlotSpec::fraction("P_SC"),
            SlotSpec::scalar("Pr_SC", "RMB/m3"),
        ],
    },
    KernelSpec {
        id: "ecotourism",
        slots: &[
            SlotSpec::variadic(
                "recreation",
                &[elem("visitors", "visitor/year"), elem("fee", "RMB/visitor")],
            ),
            SlotSpec::variadic(
                "education",
                &[elem("area", "ha"), elem("coeff", "one"), elem("income", "RMB/ha/year")],
            ),
        ],
    },
];

pub fn kernel_spec(id: &str) -> Option<&'static KernelSpec> {
    KERNELS.iter().find(|k| k.id == id)
}

static DIM_CACHE: LazyLock<BTreeMap<&'static str, UnitDim>> = LazyLock::new(|| {
    let mut m = BTreeMap::new();
    for spec in KERNELS {
        for slot in spec.slots {
            m.entry(slot.unit).or_insert_with(|| parse_unit(slot.unit).unwrap());
            if let SlotKind::Variadic(elems) = slot.kind {
                for e in elems {
                    m.entry(e.unit).or_insert_with(|| parse_unit(e.unit).unwrap());
                }
            }
        }
    }
    m
});

/// Declared dimension of a registry unit literal.
pub fn slot_dim(unit: &'static str) -> UnitDim {
    DIM_CACHE[unit]
}

/// A bound slot value ready for dispatch.
#[derive(Debug, Clone, PartialEq)]
pub enum SlotValue {
    Scalar(Quantity),
    Rows(Vec<BTreeMap<String, Quantity>>),
}

pub type SlotValues = BTreeMap<String, SlotValue>;

fn scalar<'a>(slots: &'a SlotValues, name: &str) -> Result<&'a Quantity, KernelError> {
    match slots.get(name) {
        Some(SlotValue::Scalar(q)) => Ok(q),
        Some(SlotValue::Rows(_)) => Err(KernelError::Structural(format!(
            "slot `{name}` expects a scalar, got a sequence"
        ))),
        None => Err(KernelError::Structural(format!("missing slot `{name}`"))),
    }
}

fn rows<'a>(slots: &'a SlotValues, name: &str) -> Result<&'a [BTreeMap<String, Quantity>], KernelError> {
    match slots.get(name) {
        Some(SlotValue::Rows(r)) => Ok(r),
        Some(SlotValue::Scalar(_)) => Err(KernelError::Structural(format!(
            "slot `{name}` expects a sequence, got a scalar"
        ))),
        None => Err(KernelError::Structural(format!("missing slot `{name}`"))),
    }
}

fn row_field(row: &BTreeMap<String, Quantity>, slot: &str, i: usize, field: &str) -> Result<Quantity, KernelError> {
    row.get(field)
        .copied()
        .ok_or_else(|| KernelError::Structural(format!("slot `{slot}[{i}]` is missing field `{field}`")))
}

fn pairs(slots: &SlotValues, name: &str, a: &str, b: &str) -> Result<Vec<(Quantity, Quantity)>, KernelError> {
    rows(slots, name)?
        .iter()
        .enumerate()
        .map(|(i, row)| Ok((row_field(row, name, i, a)?, row_field(row, name, i, b)?)))
        .collect()
}

fn triples(
    slots: &SlotValues,
    name: &str,
    a: &str,
    b: &str,
    c: &str,
) -> Result<Vec<(Quantity, Quantity, Quantity)>, KernelError> {
    rows(slots, name)?
        .iter()
        .enumerate()
        .map(|(i, row)| {
            Ok((
                row_field(row, name, i, a)?,
                row_field(row, name, i, b)?,
                row_field(row, name, i, c)?,
            ))
        })
        .collect()
}

/// Evaluates a kernel by id against bound slot values.
pub fn evaluate_kernel(id: &str, slots: &SlotValues, strict: bool) -> Result<KernelOutput, KernelError> {
    match id {
        "prevalued" => Ok(KernelOutput::plain(prevalued(scalar(slots, "value")?)?)),
        "infra_damage" => Ok(KernelOutput::plain(infrastructure_damage_value(
            scalar(slots, "M")?,
            scalar(slots, "P_T")?,
        )?)),
        "water_deficit" => Ok(KernelOutput::plain(water_deficit_value(
            scalar(slots, "A_E")?,
            scalar(slots, "Pr_WE")?,
            scalar(slots, "A_A")?,
            scalar(slots, "Pr_WA")?,
        )?)),
        "disease_burden" => Ok(KernelOutput::plain(disease_value(
            scalar(slots, "Pop")?,
            &triples(slots, "diseases", "alpha", "beta", "cost")?,
        )?)),
        "food_raw_material" => Ok(KernelOutput::plain(food_raw_material_value(&pairs(
            slots, "products", "amount", "price",
        )?)?)),
        "climate_regulation" => climate_regulation_value(
            scalar(slots, "A_W")?,
            scalar(slots, "ET_avg")?,
            scalar(slots, "Va")?,
            scalar(slots, "Ef")?,
            scalar(slots, "Pr_E")?,
            scalar(slots, "X")?,
            &pairs(slots, "carbon", "amount", "price")?,
            &pairs(slots, "oxygen", "amount", "price")?,
            strict,
        ),
        "air_quality" => air_quality_value(
            scalar(slots, "R")?,
            scalar(slots, "Pr_R")?,
            scalar(slots, "I_anion")?,
            scalar(slots, "Pr_I")?,
        ),
        "water_quality" => Ok(KernelOutput::plain(water_quality_value(
            scalar(slots, "W_F")?,
            scalar(slots, "W_W")?,
            scalar(slots, "Pr_WQ")?,
        )?)),
        "noise_reduction" => Ok(KernelOutput::plain(noise_reduction_value(
            scalar(slots, "N_F")?,
            scalar(slots, "N_R")?,
            scalar(slots, "Pr_N")?,
        )?)),
        "soil_retention" => soil_retention_value(
            scalar(slots, "R_S")?,
            scalar(slots, "N_SN")?,
            scalar(slots, "Pr_SN")?,
            scalar(slots, "rho_S")?,
            scalar(slots, "P_SC")?,
            scalar(slots, "Pr_SC")?,
        ),
        "ecotourism" => ecotourism_value(
            &pairs(slots, "recreation", "visitors", "fee")?,
            &triples(slots, "education", "area", "coeff", "income")?,
        ),
        other => Err(KernelError::Structural(format!("unknown kernel id `{other}`"))),
    }
}

// ---------------------------------------------------------------------------
// Ledger
// ---------------------------------------------------------------------------

/// Per-item monetary result with optional sub-term breakdown.
#[derive(Debug, Clone, PartialEq)]
pub struct LineItemResult {
    pub id: String,
    pub side: Side,
    pub class: FunctionalClass,
    pub value: Quantity,
    pub breakdown: BTreeMap<String, Quantity>,
}

/// Ledger totals, net value and composition shares.
#[derive(Debug, Clone, PartialEq)]
pub struct LedgerSummary {
    pub es_total: Quantity,
    pub eds_total: Quantity,
    pub net: Quantity,
    pub shares_es: BTreeMap<String, f64>,
    pub shares_eds: BTreeMap<String, f64>,
    /// Absent when es_total is zero.
    pub eds_to_es_ratio: Option<f64>,
}

/// Aggregates line items into the ES/EDS ledger. Summation is a pairwise
/// left fold in ascending item-id order, so the result is deterministic.
pub fn build_ledger(items: &[LineItemResult]) -> Result<LedgerSummary, KernelError> {
    let mut sorted: Vec<&LineItemResult> = items.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    for pair in sorted.windows(2) {
        if pair[0].id == pair[1].id {
            return Err(KernelError::Structural(format!("duplicate item id `{}`", pair[0].id)));
        }
    }

    let mut es_total = 0.0;
    let mut eds_total = 0.0;
    for item in &sorted {
        if item.value.magnitude() < 0.0 {
            return Err(KernelError::Domain(format!(
                "item `{}` has negative value; losses are stored positive",
                item.id
            )));
        }
        match item.side {
            Side::Es => es_total += item.value.magnitude(),
            Side::Eds => eds_total += item.value.magnitude(),
        }
    }
    let net = es_total - eds_total;

    let mut shares_es = BTreeMap::new();
    let mut shares_eds = BTreeMap::new();
    for item in &sorted {
        match item.side {
            Side::Es if es_total > 0.0 => {
                shares_es.insert(item.id.clone(), item.value.magnitude() / es_total);
            }
            Side::Eds if eds_total > 0.0 => {
                shares_eds.insert(item.id.clone(), item.value.magnitude() / eds_total);
            }
            _ => {}
        }
    }

    Ok(LedgerSummary {
        es_total: flow(es_total)?,
        eds_total: flow(eds_total)?,
        net: flow(net)?,
        shares_es,
        shares_eds,
        eds_to_es_ratio: if es_total > 0.0 { Some(eds_total / es_total) } else { None },
    })
}

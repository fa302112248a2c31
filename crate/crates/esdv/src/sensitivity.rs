//! Sensitivity of ledger outputs to parameter uncertainty: one-at-a-time
//! elasticities and seeded Monte-Carlo propagation over parameter intervals.
//!
//! Draw j of parameter i depends only on (seed, i, j, attempt), a
//! counter-based scheme, so the report is a pure function of
//! (model, params, config) and is independent of thread count.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{bind, evaluate};
use crate::ingest::{inject_transfers, SlotRef, ValuationModel};
use crate::kernels::KernelError;
use crate::units::ParameterSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distribution {
    Uniform,
    /// Triangular with mode at the parameter's point value.
    Triangular,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityConfig {
    pub samples: u32,
    pub seed: u64,
    pub distribution: Distribution,
    /// Relative step for central-difference elasticities.
    pub delta: f64,
}

impl Default for SensitivityConfig {
    fn default() -> Self {
        SensitivityConfig {
            samples: 1000,
            seed: 0,
            distribution: Distribution::Uniform,
            delta: 1e-3,
        }
    }
}

/// Monte-Carlo statistics for one ledger output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McStats {
    pub mean: f64,
    pub sd: f64,
    pub p5: f64,
    pub p95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub seed: u64,
    pub samples: u32,
    /// Central-difference elasticity of net value per parameter, where
    /// defined (nonzero point value and nonzero net).
    pub elasticities: BTreeMap<String, f64>,
    pub es_total: McStats,
    pub eds_total: McStats,
    pub net: McStats,
}

#[derive(Debug, Error)]
pub enum SensitivityError {
    #[error("parameter `{0}` not found")]
    UnknownParameter(String),
    #[error("parameter `{0}` has zero point value; elasticity undefined")]
    ZeroPointValue(String),
    #[error("net value is zero; elasticity undefined")]
    ZeroNet,
    #[error("sample count must be at least 1")]
    NoSamples,
    #[error("rejection cap exceeded: {rejections} rejected draws for {samples} samples")]
    RejectionCap { rejections: u64, samples: u32 },
    #[error("evaluation failed: {0}")]
    Eval(String),
}

// ---------------------------------------------------------------------------
// Counter-based pseudorandom draws
// ---------------------------------------------------------------------------

fn fnv1a64(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform draw in [0, 1) keyed by (seed, parameter hash, draw, attempt).
fn draw_u01(seed: u64, param_hash: u64, draw: u64, attempt: u64) -> f64 {
    let mut s = splitmix64(seed ^ 0x243F_6A88_85A3_08D3);
    s = splitmix64(s ^ param_hash);
    s = splitmix64(s ^ draw);
    s = splitmix64(s ^ attempt);
    (s >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn sample_interval(dist: Distribution, low: f64, high: f64, mode: f64, u: f64) -> f64 {
    if high <= low {
        return low;
    }
    match dist {
        Distribution::Uniform => low + u * (high - low),
        Distribution::Triangular => {
            let span = high - low;
            let c = ((mode - low) / span).clamp(0.0, 1.0);
            if u < c {
                low + (u * span * (mode - low)).sqrt()
            } else {
                high - ((1.0 - u) * span * (high - mode)).sqrt()
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Evaluation helpers
// ---------------------------------------------------------------------------

fn net_of(model: &ValuationModel, params: &ParameterSet, strict: bool) -> Result<f64, SensitivityError> {
    let bound = bind(model, params).map_err(|e| SensitivityError::Eval(format!("{} binding error(s)", e.len())))?;
    let (_, ledger) = evaluate(&bound, strict).map_err(|e| SensitivityError::Eval(e.to_string()))?;
    Ok(ledger.net.magnitude())
}

fn perturbed(params: &ParameterSet, id: &str, factor: f64) -> Result<ParameterSet, SensitivityError> {
    let mut copy = params.clone();
    let p = copy
        .get_mut(id)
        .ok_or_else(|| SensitivityError::UnknownParameter(id.to_string()))?;
    p.quantity = p
        .quantity
        .with_magnitude(p.quantity.magnitude() * factor)
        .map_err(|e| SensitivityError::Eval(e.to_string()))?;
    // perturbation may leave the declared interval; drop it for the probe
    p.uncertainty = None;
    Ok(copy)
}

/// Parameter ids referenced by any model slot, in sorted order.
fn referenced_params(model: &ValuationModel) -> BTreeSet<String> {
    let mut ids = BTreeSet::new();
    for item in &model.items {
        for slot in item.slots.values() {
            match slot {
                SlotRef::Param(p) => {
                    ids.insert(p.clone());
                }
                SlotRef::Rows(rows) => {
                    for row in rows {
                        for p in row.values() {
                            ids.insert(p.clone());
                        }
                    }
                }
            }
        }
    }
    ids
}

/// Central-difference elasticity of net value with respect to one
/// parameter: (V(p(1+δ)) − V(p(1−δ))) / (2δ·V(p)). `params` here is the
/// merged set (transfers already injected).
pub fn oat_elasticity(
    model: &ValuationModel,
    params: &ParameterSet,
    param_id: &str,
    delta: f64,
    strict: bool,
) -> Result<f64, SensitivityError> {
    let p = params
        .get(param_id)
        .ok_or_else(|| SensitivityError::UnknownParameter(param_id.to_string()))?;
    if p.quantity.magnitude() == 0.0 {
        return Err(SensitivityError::ZeroPointValue(param_id.to_string()));
    }
    let base = net_of(model, params, strict)?;
    if base == 0.0 {
        return Err(SensitivityError::ZeroNet);
    }
    let up = net_of(model, &perturbed(params, param_id, 1.0 + delta)?, strict)?;
    let down = net_of(model, &perturbed(params, param_id, 1.0 - delta)?, strict)?;
    Ok((up - down) / (2.0 * delta * base))
}

struct DrawOutcome {
    es: f64,
    eds: f64,
    net: f64,
    rejections: u64,
}

fn run_draw(
    model: &ValuationModel,
    merged: &ParameterSet,
    sampled: &[(String, u64, f64, f64, f64)],
    config: &SensitivityConfig,
    strict: bool,
    draw: u64,
    max_attempts: u64,
) -> Result<DrawOutcome, SensitivityError> {
    for attempt in 0..max_attempts {
        let mut params = merged.clone();
        for (id, hash, low, high, mode) in sampled {
            let u = draw_u01(config.seed, *hash, draw, attempt);
            let value = sample_interval(config.distribution, *low, *high, *mode, u);
            let p = params.get_mut(id).expect("sampled id exists");
            p.quantity = p
                .quantity
                .with_magnitude(value)
                .map_err(|e| SensitivityError::Eval(e.to_string()))?;
        }
        let bound = match bind(model, &params) {
            Ok(b) => b,
            Err(e) => return Err(SensitivityError::Eval(format!("{} binding error(s)", e.len()))),
        };
        match evaluate(&bound, strict) {
            Ok((_, ledger)) => {
                return Ok(DrawOutcome {
                    es: ledger.es_total.magnitude(),
                    eds: ledger.eds_total.magnitude(),
                    net: ledger.net.magnitude(),
                    rejections: attempt,
                })
            }
            // a sampled value outside a kernel precondition rejects the draw
            Err(crate::engine::EvalError::Item {
                source: KernelError::Domain(_) | KernelError::Singularity(_),
                ..
            }) => continue,
            Err(e) => return Err(SensitivityError::Eval(e.to_string())),
        }
    }
    Err(SensitivityError::RejectionCap {
        rejections: max_attempts,
        samples: config.samples,
    })
}

fn stats(values: &mut [f64]) -> McStats {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let sd = if n > 1 {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let nearest_rank = |q: f64| {
        let rank = (q * n as f64).ceil().max(1.0) as usize;
        values[rank.min(n) - 1]
    };
    McStats {
        mean,
        sd,
        p5: nearest_rank(0.05),
        p95: nearest_rank(0.95),
    }
}

/// Seeded Monte-Carlo propagation. `threads` is an execution hint only; the
/// report is identical for any thread count. The statistics fold runs over
/// draw index order.
pub fn monte_carlo(
    model: &ValuationModel,
    params: &ParameterSet,
    config: &SensitivityConfig,
    strict: bool,
    threads: usize,
) -> Result<SensitivityReport, SensitivityError> {
    if config.samples == 0 {
        return Err(SensitivityError::NoSamples);
    }
    let merged = inject_transfers(model, params).map_err(|e| SensitivityError::Eval(e.to_string()))?;

    // interval-bearing parameters, sorted by id; others held fixed
    let sampled: Vec<(String, u64, f64, f64, f64)> = merged
        .iter()
        .filter_map(|p| {
            p.uncertainty
                .map(|(lo, hi)| (p.id.clone(), fnv1a64(&p.id), lo, hi, p.quantity.magnitude()))
        })
        .collect();

    let n = config.samples as usize;
    let max_attempts = 100u64 * config.samples as u64 + 1;
    let threads = threads.max(1).min(n);

    let mut outcomes: Vec<Option<Result<DrawOutcome, SensitivityError>>> = Vec::new();
    outcomes.resize_with(n, || None);

    if threads == 1 {
        for (j, slot) in outcomes.iter_mut().enumerate() {
            *slot = Some(run_draw(model, &merged, &sampled, config, strict, j as u64, max_attempts));
        }
    } else {
        let chunk = n.div_ceil(threads);
        std::thread::scope(|scope| {
            for (t, chunk_slice) in outcomes.chunks_mut(chunk).enumerate() {
                let merged = &merged;
                let sampled = &sampled;
                scope.spawn(move || {
                    for (k, slot) in chunk_slice.iter_mut().enumerate() {
                        let j = (t * chunk + k) as u64;
                        *slot = Some(run_draw(model, merged, sampled, config, strict, j, max_attempts));
                    }
                });
            }
        });
    }

    let mut es = Vec::with_capacity(n);
    let mut eds = Vec::with_capacity(n);
    let mut net = Vec::with_capacity(n);
    let mut total_rejections = 0u64;
    for outcome in outcomes {
        let o = outcome.expect("all draws populated").map_err(|e| e)?;
        total_rejections += o.rejections;
        es.push(o.es);
        eds.push(o.eds);
        net.push(o.net);
    }
    if total_rejections > 100 * config.samples as u64 {
        return Err(SensitivityError::RejectionCap {
            rejections: total_rejections,
            samples: config.samples,
        });
    }

    // elasticities where defined; undefined ones are omitted
    let mut elasticities = BTreeMap::new();
    for id in referenced_params(model) {
        if let Ok(e) = oat_elasticity(model, &merged, &id, config.delta, strict) {
            elasticities.insert(id, e);
        }
    }

    Ok(SensitivityReport {
        seed: config.seed,
        samples: config.samples,
        elasticities,
        es_total: stats(&mut es),
        eds_total: stats(&mut eds),
        net: stats(&mut net),
    })
}

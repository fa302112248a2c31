//! Value transfer: deriving local parameters from donor-site studies and
//! applying explicit adjustment factors.

use thiserror::Error;

use crate::units::{Method, Parameter, Provenance, Quantity, UnitDim};

/// One donor-site observation: a numerator/denominator pair sharing a
/// dimension, so the ratio is dimensionless.
#[derive(Debug, Clone, PartialEq)]
pub struct DonorObservation {
    pub site: String,
    pub numerator: Quantity,
    pub denominator: Quantity,
}

/// Donor observations plus adjustment factors that together derive one
/// parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferRecord {
    pub derived_id: String,
    pub observations: Vec<DonorObservation>,
    pub adjustments: Vec<(String, f64)>,
}

#[derive(Debug, Error, PartialEq)]
pub enum TransferError {
    #[error("transfer `{0}`: no donor observations")]
    NoObservations(String),
    #[error("transfer `{id}`, site `{site}`: denominator must be positive, got {value}")]
    BadDenominator { id: String, site: String, value: f64 },
    #[error("transfer `{id}`, site `{site}`: numerator and denominator dimensions differ")]
    MixedDimensions { id: String, site: String },
    #[error("adjustment `{label}`: factor must be positive, got {factor}")]
    BadFactor { label: String, factor: f64 },
    #[error("arithmetic failure in transfer `{0}`")]
    Arithmetic(String),
}

fn adjustment_product(adjustments: &[(String, f64)]) -> Result<f64, TransferError> {
    let mut product = 1.0;
    for (label, factor) in adjustments {
        if !(*factor > 0.0) {
            return Err(TransferError::BadFactor {
                label: label.clone(),
                factor: *factor,
            });
        }
        product *= factor;
    }
    Ok(product)
}

/// Derives a dimensionless parameter as the arithmetic mean of per-site
/// numerator/denominator ratios, multiplied by all adjustment factors.
/// The uncertainty interval is the [min, max] of per-site ratios scaled by
/// the same adjustment product.
pub fn ratio_from_donors(rec: &TransferRecord) -> Result<Parameter, TransferError> {
    if rec.observations.is_empty() {
        return Err(TransferError::NoObservations(rec.derived_id.clone()));
    }
    let product = adjustment_product(&rec.adjustments)?;

    let mut ratios = Vec::with_capacity(rec.observations.len());
    for obs in &rec.observations {
        if !obs.numerator.unit().compatible(obs.denominator.unit()) {
            return Err(TransferError::MixedDimensions {
                id: rec.derived_id.clone(),
                site: obs.site.clone(),
            });
        }
        let den = obs.denominator.magnitude();
        if !(den > 0.0) {
            return Err(TransferError::BadDenominator {
                id: rec.derived_id.clone(),
                site: obs.site.clone(),
                value: den,
            });
        }
        ratios.push(obs.numerator.magnitude() / den);
    }

    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    let sites: Vec<&str> = rec.observations.iter().map(|o| o.site.as_str()).collect();
    Ok(Parameter {
        id: rec.derived_id.clone(),
        quantity: Quantity::new(mean * product, UnitDim::dimensionless())
            .map_err(|_| TransferError::Arithmetic(rec.derived_id.clone()))?,
        provenance: Provenance {
            source: format!("transfer from {}", sites.join(", ")),
            year: 0,
            method: Method::Transfer,
        },
        uncertainty: Some((lo * product, hi * product)),
    })
}

/// Scales a point value (and its interval) by the product of adjustment
/// factors, recording the labels in the provenance.
pub fn point_transfer(value: &Parameter, adjustments: &[(String, f64)]) -> Result<Parameter, TransferError> {
    let product = adjustment_product(adjustments)?;
    let labels: Vec<&str> = adjustments.iter().map(|(l, _)| l.as_str()).collect();
    Ok(Parameter {
        id: value.id.clone(),
        quantity: Quantity::new(value.quantity.magnitude() * product, *value.quantity.unit())
            .map_err(|_| TransferError::Arithmetic(value.id.clone()))?,
        provenance: Provenance {
            source: if labels.is_empty() {
                value.provenance.source.clone()
            } else {
                format!("{} (adjusted: {})", value.provenance.source, labels.join(", "))
            },
            year: value.provenance.year,
            method: Method::Transfer,
        },
        uncertainty: value.uncertainty.map(|(lo, hi)| (lo * product, hi * product)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(site: &str, num: f64, den: f64) -> DonorObservation {
        DonorObservation {
            site: site.to_string(),
            numerator: Quantity::dimensionless(num).unwrap(),
            denominator: Quantity::dimensionless(den).unwrap(),
        }
    }

    #[test]
    fn single_donor_reconstruction() {
        let rec = TransferRecord {
            derived_id: "P_T".into(),
            observations: vec![obs("siteA", 44.0, 100.0)],
            adjustments: vec![],
        };
        let p = ratio_from_donors(&rec).unwrap();
        assert_eq!(p.quantity.magnitude(), 0.44);
        assert_eq!(p.uncertainty, Some((0.44, 0.44)));
        assert_eq!(p.provenance.method, Method::Transfer);
    }

    #[test]
    fn two_donor_mean() {
        let rec = TransferRecord {
            derived_id: "P_T".into(),
            observations: vec![obs("A", 30.0, 100.0), obs("B", 58.0, 100.0)],
            adjustments: vec![],
        };
        let p = ratio_from_donors(&rec).unwrap();
        assert!((p.quantity.magnitude() - 0.44).abs() < 1e-15);
        assert_eq!(p.uncertainty, Some((0.30, 0.58)));
    }

    #[test]
    fn identity_ratio_with_factor() {
        let rec = TransferRecord {
            derived_id: "r".into(),
            observations: vec![obs("A", 1.0, 1.0)],
            adjustments: vec![("half".into(), 0.5)],
        };
        assert_eq!(ratio_from_donors(&rec).unwrap().quantity.magnitude(), 0.5);
    }

    #[test]
    fn donor_errors() {
        let empty = TransferRecord {
            derived_id: "r".into(),
            observations: vec![],
            adjustments: vec![],
        };
        assert!(matches!(ratio_from_donors(&empty), Err(TransferError::NoObservations(_))));

        let zero_den = TransferRecord {
            derived_id: "r".into(),
            observations: vec![obs("A", 1.0, 0.0)],
            adjustments: vec![],
        };
        assert!(matches!(ratio_from_donors(&zero_den), Err(TransferError::BadDenominator { .. })));

        let mixed = TransferRecord {
            derived_id: "r".into(),
            observations: vec![DonorObservation {
                site: "A".into(),
                numerator: Quantity::parse(1.0, "RMB").unwrap(),
                denominator: Quantity::parse(1.0, "m3").unwrap(),
            }],
            adjustments: vec![],
        };
        assert!(matches!(ratio_from_donors(&mixed), Err(TransferError::MixedDimensions { .. })));
    }

    fn param(v: f64) -> Parameter {
        Parameter {
            id: "p".into(),
            quantity: Quantity::parse(v, "RMB").unwrap(),
            provenance: Provenance {
                source: "donor study".into(),
                year: 2018,
                method: Method::LocalStudy,
            },
            uncertainty: Some((v * 0.9, v * 1.1)),
        }
    }

    #[test]
    fn point_transfer_examples() {
        let adj = vec![("income".to_string(), 1.2), ("ppp".to_string(), 0.9)];
        let p = point_transfer(&param(100.0), &adj).unwrap();
        assert!((p.quantity.magnitude() - 108.0).abs() < 1e-12);
        assert_eq!(p.provenance.method, Method::Transfer);
        let (lo, hi) = p.uncertainty.unwrap();
        assert!((lo - 97.2).abs() < 1e-12 && (hi - 118.8).abs() < 1e-12);

        let identity = point_transfer(&param(100.0), &[]).unwrap();
        assert_eq!(identity.quantity.magnitude(), 100.0);

        let zero = point_transfer(&param(0.0), &[("x".to_string(), 2.0)]).unwrap();
        assert_eq!(zero.quantity.magnitude(), 0.0);

        assert!(matches!(
            point_transfer(&param(1.0), &[("bad".to_string(), 0.0)]),
            Err(TransferError::BadFactor { .. })
        ));
    }
}

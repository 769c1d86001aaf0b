//! Soft-error characterization of library components.
//!
//! Critical charge → relative soft-error rate → failure rate → reliability.
//! The SER of a node falls off as `exp(-Q_critical / Q_s)`; flux and
//! cross-section are shared by all components of one process and cancel, so
//! only ratios against a reference component are ever formed. Every soft
//! error counts as a failure, so the SER ratio scales the reference failure
//! rate directly, and `R(t) = exp(-λ t)`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CharInput {
    pub name: String,
    /// Coulombs.
    pub q_critical: f64,
}

impl CharInput {
    pub fn new(name: impl Into<String>, q_critical: f64) -> Result<Self> {
        let name = name.into();
        positive("q_critical", q_critical)?;
        Ok(Self { name, q_critical })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CharModel {
    /// Charge-collection efficiency, coulombs.
    pub q_s: f64,
    pub reference: String,
    pub reference_reliability: f64,
    /// Mission time; reliabilities are per this horizon.
    pub time: f64,
}

impl CharModel {
    pub fn new(q_s: f64, reference: impl Into<String>, reference_reliability: f64, time: f64) -> Result<Self> {
        positive("q_s", q_s)?;
        positive("time", time)?;
        if !(reference_reliability > 0.0 && reference_reliability < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "reference reliability {reference_reliability} outside (0, 1)"
            )));
        }
        Ok(Self {
            q_s,
            reference: reference.into(),
            reference_reliability,
            time,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CharRecord {
    pub name: String,
    pub q_critical: f64,
    pub ser_ratio: f64,
    pub failure_rate: f64,
    pub reliability: f64,
}

fn positive(what: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{what} must be positive, got {value}")))
    }
}

/// `SER_a / SER_b` for two components of the same process.
pub fn ser_ratio(q_crit_a: f64, q_crit_b: f64, q_s: f64) -> Result<f64> {
    positive("q_critical", q_crit_a)?;
    positive("q_critical", q_crit_b)?;
    positive("q_s", q_s)?;
    Ok(((q_crit_b - q_crit_a) / q_s).exp())
}

pub fn reliability_from_failure_rate(lambda: f64, t: f64) -> Result<f64> {
    if !(lambda >= 0.0 && t >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "failure rate and time must be non-negative, got λ={lambda}, t={t}"
        )));
    }
    Ok((-lambda * t).exp())
}

pub fn failure_rate_from_reliability(reliability: f64, t: f64) -> Result<f64> {
    positive("time", t)?;
    if !(reliability > 0.0 && reliability <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "reliability {reliability} outside (0, 1]"
        )));
    }
    Ok(-reliability.ln() / t)
}

/// Fits `Q_s` so that two components with known critical charge and
/// reliability both satisfy the exponential SER model.
///
/// Each point is `(q_critical, reliability)`.
pub fn calibrate_qs(reference: (f64, f64), other: (f64, f64), t: f64) -> Result<f64> {
    let (q_ref, r_ref) = reference;
    let (q_other, r_other) = other;
    positive("q_critical", q_ref)?;
    positive("q_critical", q_other)?;
    for r in [r_ref, r_other] {
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::Calibration(format!("reliability {r} outside (0, 1)")));
        }
    }
    if r_ref == r_other {
        return Err(Error::Calibration("equal reliabilities".into()));
    }
    if q_ref == q_other {
        return Err(Error::Calibration("equal critical charges".into()));
    }
    let lambda_ref = failure_rate_from_reliability(r_ref, t)?;
    let lambda_other = failure_rate_from_reliability(r_other, t)?;
    let q_s = (q_ref - q_other) / (lambda_other / lambda_ref).ln();
    if q_s.is_nan() || q_s <= 0.0 {
        return Err(Error::Calibration(
            "the component with the larger critical charge must be the more reliable one".into(),
        ));
    }
    Ok(q_s)
}

/// Runs every input through the critical-charge → reliability pipeline,
/// anchored at the model's reference component.
pub fn characterize(inputs: &[CharInput], model: &CharModel) -> Result<Vec<CharRecord>> {
    let reference = inputs
        .iter()
        .find(|i| i.name == model.reference)
        .ok_or_else(|| Error::MissingReference(model.reference.clone()))?;
    let lambda_ref = failure_rate_from_reliability(model.reference_reliability, model.time)?;
    inputs
        .iter()
        .map(|input| {
            let ser = ser_ratio(input.q_critical, reference.q_critical, model.q_s)?;
            let failure_rate = lambda_ref * ser;
            let reliability = if input.name == model.reference {
                model.reference_reliability
            } else {
                reliability_from_failure_rate(failure_rate, model.time)?
            };
            Ok(CharRecord {
                name: input.name.clone(),
                q_critical: input.q_critical,
                ser_ratio: ser,
                failure_rate,
                reliability,
            })
        })
        .collect()
}

/// Parses `qcrit <name> <coulombs>` lines (`#` comments, blank lines ok).
pub fn parse_qcrit(text: &str) -> Result<Vec<CharInput>> {
    let mut out: Vec<CharInput> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        let fields: Vec<&str> = line.split_whitespace().collect();
        let syntax = |message: String| Error::Syntax { line: i + 1, message };
        match fields.as_slice() {
            [] => {}
            ["qcrit", name, q] => {
                let q: f64 = q.parse().map_err(|_| syntax(format!("bad charge `{q}`")))?;
                if out.iter().any(|c| c.name == *name) {
                    return Err(syntax(format!("duplicate component `{name}`")));
                }
                out.push(CharInput::new(*name, q).map_err(|e| syntax(e.to_string()))?);
            }
            _ => return Err(syntax("expected `qcrit <name> <coulombs>`".into())),
        }
    }
    Ok(out)
}

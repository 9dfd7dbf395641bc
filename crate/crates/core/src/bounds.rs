//! Closed-form lower bounds on average-case communication, and consistency
//! checks of measured protocol statistics against them.
//!
//! These are evaluators, not certificates: verifying optimality over all
//! protocols is out of reach, so the functions compute the displayed bound
//! expressions and, where measurements are supplied, flag any measured value
//! that falls below a bound beyond Monte-Carlo slack. Bounds can be negative
//! or vacuous for some parameters; they are reported raw with a `vacuous`
//! flag rather than clamped.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)] // f64 math comes from the trait under no_std
use num_traits::Float;

use crate::dist::{conditional_entropy, shannon_entropy, JointDistribution};
use crate::engine::RunStats;
use crate::{Error, Result};

/// One evaluated bound, optionally compared against a measurement.
#[derive(Clone, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoundReport {
    pub bound_name: String,
    /// Bound value in bits; may be negative.
    pub value: f64,
    /// A bound at or below zero constrains nothing.
    pub vacuous: bool,
    pub parameters: BTreeMap<String, f64>,
    pub satisfied_by_measurement: Option<MeasurementCheck>,
}

/// Comparison of a measured mean against a lower bound.
#[derive(Clone, Copy, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MeasurementCheck {
    pub measured: f64,
    /// Monte-Carlo slack granted below the bound (3 standard errors).
    pub slack: f64,
    /// `measured >= value - slack`.
    pub satisfied: bool,
}

impl BoundReport {
    fn new(name: &str, value: f64, parameters: BTreeMap<String, f64>) -> Self {
        BoundReport {
            bound_name: name.into(),
            value,
            vacuous: value <= 0.0,
            parameters,
            satisfied_by_measurement: None,
        }
    }

    fn with_measurement(mut self, measured: f64, slack: f64) -> Self {
        self.satisfied_by_measurement = Some(MeasurementCheck {
            measured,
            slack,
            satisfied: measured >= self.value - slack,
        });
        self
    }
}

/// Fano-style floor on expected Alice-to-Bob bits of any deterministic
/// protocol with error probability `eps`:
/// `H(X|Y) - eps * log2(|X|) - 1`.
pub fn fano_lower_bound(joint: &JointDistribution, eps: f64) -> f64 {
    conditional_entropy(joint) - eps * (joint.x_size() as f64).log2() - 1.0
}

/// Floor on the expected length of one-way deterministic protocols for the
/// diagonal-plus-noise pair: `(1 - eps/delta) * log2(n + 1) - 2`.
pub fn one_way_lower_bound(n: u32, delta: f64, eps: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::BadParam(format!(
            "one_way_lower_bound requires 0 < delta < 1/2, got {delta}"
        )));
    }
    if eps < 0.0 {
        return Err(Error::BadParam(format!(
            "one_way_lower_bound requires eps >= 0, got {eps}"
        )));
    }
    Ok((1.0 - eps / delta) * ((n + 1) as f64).log2() - 2.0)
}

/// Floor on the expected length of two-way deterministic protocols for the
/// diagonal-plus-noise pair:
/// `(1 - delta - delta/n) * log2(delta / (eps + delta/n))
///  + (delta - 2 eps) * log2(n + 1) - 2 delta`.
pub fn two_way_lower_bound(n: u32, delta: f64, eps: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::BadParam(format!(
            "two_way_lower_bound requires 0 < delta < 1/2, got {delta}"
        )));
    }
    if !eps.is_finite() || eps <= 0.0 {
        return Err(Error::BadParam(format!(
            "two_way_lower_bound requires eps > 0, got {eps}"
        )));
    }
    let nf = n as f64;
    let diag_coeff = 1.0 - delta - delta / nf;
    let diag_term = diag_coeff * (delta / (eps + delta / nf)).log2();
    let rect_term = (delta - 2.0 * eps) * (nf + 1.0).log2();
    Ok(diag_term + rect_term - 2.0 * delta)
}

/// Zero-error floor for pairs whose support is a full Cartesian product.
#[derive(Clone, Copy, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CartesianBound {
    /// True iff the support equals `x_support x y_support` exactly.
    pub applicable: bool,
    /// `H(X)` when applicable, 0 otherwise.
    pub bound: f64,
}

/// Every errorless deterministic protocol on a Cartesian-support pair must
/// spend `H(X)` expected bits. Inapplicable (and reported as such) when the
/// support has holes.
pub fn cartesian_zero_error_bound(joint: &JointDistribution) -> CartesianBound {
    let full = joint.x_size() as u64 * joint.y_size() as u64;
    let applicable = joint.support_len() as u64 == full;
    CartesianBound {
        applicable,
        bound: if applicable {
            shannon_entropy(&joint.marginal_x())
        } else {
            0.0
        },
    }
}

/// Both sides of the dominated-entropy inequality.
#[derive(Clone, Copy, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EntropyBoundCheck {
    /// `sum p_i log2(1/p_i)`
    pub lhs: f64,
    /// `sum q_i log2(1/q_i) - 2`
    pub rhs: f64,
    /// `lhs >= rhs`; true for every valid input, a counterexample is an
    /// implementation bug.
    pub holds: bool,
}

/// Checks `sum p_i log2(1/p_i) >= sum q_i log2(1/q_i) - 2` for a probability
/// vector `p` dominating a positive vector `q` componentwise.
pub fn entropy_bound_check(p: &[f64], q: &[f64]) -> Result<EntropyBoundCheck> {
    if p.len() != q.len() || p.is_empty() {
        return Err(Error::BadParam(format!(
            "vectors must be nonempty and of equal length, got {} and {}",
            p.len(),
            q.len()
        )));
    }
    let mass: f64 = p.iter().sum();
    if (mass - 1.0).abs() > 1e-9 {
        return Err(Error::BadParam(format!(
            "p must sum to 1, got {mass}"
        )));
    }
    for (i, (&pi, &qi)) in p.iter().zip(q).enumerate() {
        if !qi.is_finite() || qi <= 0.0 || qi > pi {
            return Err(Error::BadParam(format!(
                "need 0 < q_i <= p_i at every index; index {i} has p={pi}, q={qi}"
            )));
        }
    }
    let lhs: f64 = p.iter().map(|&v| v * (1.0 / v).log2()).sum();
    let rhs: f64 = q.iter().map(|&v| v * (1.0 / v).log2()).sum::<f64>() - 2.0;
    Ok(EntropyBoundCheck {
        lhs,
        rhs,
        holds: lhs >= rhs,
    })
}

/// Measured statistics pitted against every applicable bound.
#[derive(Clone, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConsistencyReport {
    pub protocol: String,
    pub eps: f64,
    /// False iff the measured error rate already exceeds the budget, in which
    /// case no bound comparison is made.
    pub precondition_ok: bool,
    pub reports: Vec<BoundReport>,
    /// True iff the precondition holds and no nonvacuous bound is violated.
    pub all_satisfied: bool,
}

/// Cross-checks measured statistics against the Fano bound and, when the law
/// is the diagonal-plus-noise pair with known parameters, against the one-way
/// and two-way bounds as well.
///
/// The measured error rate must be within the budget `eps`; otherwise the
/// report flags the precondition and carries no comparisons. A measured mean
/// below a nonvacuous bound beyond 3 standard errors is flagged as a failure.
pub fn bound_consistency_report(
    stats: &RunStats,
    joint: &JointDistribution,
    eps: f64,
    protocol: &str,
    delta_noise: Option<(u32, f64)>,
) -> ConsistencyReport {
    if stats.error_rate > eps {
        return ConsistencyReport {
            protocol: protocol.into(),
            eps,
            precondition_ok: false,
            reports: Vec::new(),
            all_satisfied: false,
        };
    }
    let slack = 3.0 * stats.se_bits_a_to_b;
    let mut reports = Vec::new();
    let mut params = BTreeMap::new();
    params.insert("eps".into(), eps);
    params.insert("x_size".into(), joint.x_size() as f64);
    reports.push(
        BoundReport::new("fano", fano_lower_bound(joint, eps), params)
            .with_measurement(stats.mean_bits_a_to_b, slack),
    );
    if let Some((n, delta)) = delta_noise {
        let mut params = BTreeMap::new();
        params.insert("n".into(), n as f64);
        params.insert("delta".into(), delta);
        params.insert("eps".into(), eps);
        if let Ok(value) = one_way_lower_bound(n, delta, eps) {
            reports.push(
                BoundReport::new("one_way", value, params.clone())
                    .with_measurement(stats.mean_total_bits, slack),
            );
        }
        if let Ok(value) = two_way_lower_bound(n, delta, eps) {
            reports.push(
                BoundReport::new("two_way", value, params)
                    .with_measurement(stats.mean_total_bits, slack),
            );
        }
    }
    let all_satisfied = reports.iter().all(|r| {
        r.vacuous
            || r.satisfied_by_measurement
                .as_ref()
                .map(|m| m.satisfied)
                .unwrap_or(true)
    });
    ConsistencyReport {
        protocol: protocol.into(),
        eps,
        precondition_ok: true,
        reports,
        all_satisfied,
    }
}

//! Transition-forbidding conditions for suppressing spontaneous-emission noise.
//!
//! A transition's strength factorises into an electronic dipole part and the
//! overlap of the nuclear-spin states involved. The s–u transition must be
//! nearly forbidden while g–e, g–u and s–e stay accessible.

use thiserror::Error;

pub const DEFAULT_EPS_FORBID: f64 = 0.05;
pub const DEFAULT_EPS_ALLOW: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SelectionError {
    #[error("overlap `{0}` must lie in [0, 1]")]
    OverlapRange(&'static str),
    #[error("thresholds must satisfy 0 < eps_forbid < eps_allow <= 1 (got {forbid}, {allow})")]
    ThresholdOrder { forbid: f64, allow: f64 },
}

/// Nuclear-spin overlap magnitudes `|⟨ψ_p|ψ_q⟩|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlapSet {
    su: f64,
    ge: f64,
    gu: f64,
    se: f64,
}

impl OverlapSet {
    pub fn new(su: f64, ge: f64, gu: f64, se: f64) -> Result<Self, SelectionError> {
        for (name, v) in [("su", su), ("ge", ge), ("gu", gu), ("se", se)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(SelectionError::OverlapRange(name));
            }
        }
        Ok(Self { su, ge, gu, se })
    }

    /// The overlap set quoted for Eu³⁺:Y₂SiO₅ at zero field.
    pub fn europium_reference() -> Self {
        Self {
            su: 0.01,
            ge: 0.44,
            gu: 0.21,
            se: 0.29,
        }
    }

    pub fn su(&self) -> f64 {
        self.su
    }
    pub fn ge(&self) -> f64 {
        self.ge
    }
    pub fn gu(&self) -> f64 {
        self.gu
    }
    pub fn se(&self) -> f64 {
        self.se
    }
}

/// A transition amplitude: electronic factor times spin overlap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionStrength {
    electronic: f64,
    overlap: f64,
}

impl TransitionStrength {
    pub fn new(electronic: f64, overlap: f64) -> Self {
        Self {
            electronic,
            overlap,
        }
    }
    pub fn overlap(&self) -> f64 {
        self.overlap
    }
    pub fn value(&self) -> f64 {
        self.electronic * self.overlap
    }
    /// Relative to a reference transition with the same electronic factor;
    /// this is what the thresholds compare against.
    pub fn relative_to(&self, other: &TransitionStrength) -> f64 {
        self.value() / other.value()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionMargin {
    pub transition: &'static str,
    pub overlap: f64,
    /// Positive when the condition holds.
    pub margin: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForbiddingReport {
    pub pass: bool,
    pub eps_forbid: f64,
    pub eps_allow: f64,
    /// s–u first, then g–e, g–u, s–e.
    pub conditions: Vec<ConditionMargin>,
}

pub fn check_forbidding(
    overlaps: &OverlapSet,
    eps_forbid: f64,
    eps_allow: f64,
) -> Result<ForbiddingReport, SelectionError> {
    if !(eps_forbid > 0.0 && eps_forbid < eps_allow && eps_allow <= 1.0) {
        return Err(SelectionError::ThresholdOrder {
            forbid: eps_forbid,
            allow: eps_allow,
        });
    }
    let forbid = ConditionMargin {
        transition: "su",
        overlap: overlaps.su,
        margin: eps_forbid - overlaps.su,
        holds: overlaps.su < eps_forbid,
    };
    let allow = |transition, overlap: f64| ConditionMargin {
        transition,
        overlap,
        margin: overlap - eps_allow,
        holds: overlap > eps_allow,
    };
    let conditions = vec![
        forbid,
        allow("ge", overlaps.ge),
        allow("gu", overlaps.gu),
        allow("se", overlaps.se),
    ];
    Ok(ForbiddingReport {
        pass: conditions.iter().all(|c| c.holds),
        eps_forbid,
        eps_allow,
        conditions,
    })
}

/// [`check_forbidding`] at the default thresholds.
pub fn check_forbidding_default(overlaps: &OverlapSet) -> ForbiddingReport {
    check_forbidding(overlaps, DEFAULT_EPS_FORBID, DEFAULT_EPS_ALLOW)
        .expect("default thresholds are ordered")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn europium_set_passes() {
        let r = check_forbidding_default(&OverlapSet::europium_reference());
        assert!(r.pass);
        assert!((r.conditions[0].margin - 0.04).abs() < 1e-15);
    }

    #[test]
    fn large_su_fails_forbid_condition() {
        let o = OverlapSet::new(0.3, 0.44, 0.21, 0.29).unwrap();
        let r = check_forbidding_default(&o);
        assert!(!r.pass);
        assert!(!r.conditions[0].holds);
        assert!(r.conditions[1..].iter().all(|c| c.holds));
    }

    #[test]
    fn zero_overlaps_fail_allow_conditions() {
        let r = check_forbidding_default(&OverlapSet::new(0.0, 0.0, 0.0, 0.0).unwrap());
        assert!(!r.pass);
        assert!(r.conditions[0].holds);
        assert!(r.conditions[1..].iter().all(|c| !c.holds));
    }

    #[test]
    fn threshold_order_enforced() {
        let o = OverlapSet::europium_reference();
        assert!(matches!(
            check_forbidding(&o, 0.2, 0.1),
            Err(SelectionError::ThresholdOrder { .. })
        ));
        assert!(check_forbidding(&o, 0.1, 0.1).is_err());
        assert!(OverlapSet::new(1.2, 0.0, 0.0, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn electronic_scale_cancels(e in 1e-3f64..1e3, a in 0.0f64..1.0, b in 0.01f64..1.0) {
            let x = TransitionStrength::new(e, a);
            let r = TransitionStrength::new(e, b);
            prop_assert!((x.relative_to(&r) - a / b).abs() <= 1e-12 * (a / b).max(1.0));
        }
    }
}

//! Closed-form photon accounting: pump suppression through the substrate,
//! coincidence-to-accidental calibration, and heralding-efficiency chains.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BudgetError {
    #[error("loss contributions must be finite and >= 0 dB, got {0}")]
    InvalidLoss(f64),
    #[error("efficiency must lie in (0, 1], got {0}")]
    InvalidEfficiency(f64),
    #[error("CAR calibration needs two distinct suppression anchors, got {0} dB twice")]
    DegenerateCalibration(f64),
    #[error("CAR must be > 0, got {0}")]
    InvalidCar(f64),
    #[error("{0} must be > 0")]
    NonPositive(&'static str),
}

/// One named entry of a loss chain. Stored in dB; constructible either way.
#[derive(Debug, Clone, PartialEq)]
pub struct LossEntry {
    pub name: String,
    pub loss_db: f64,
}

impl LossEntry {
    pub fn from_db(name: impl Into<String>, loss_db: f64) -> Result<Self, BudgetError> {
        if !loss_db.is_finite() || loss_db < 0.0 {
            return Err(BudgetError::InvalidLoss(loss_db));
        }
        Ok(Self { name: name.into(), loss_db })
    }

    pub fn from_efficiency(name: impl Into<String>, efficiency: f64) -> Result<Self, BudgetError> {
        if !(efficiency > 0.0 && efficiency <= 1.0) {
            return Err(BudgetError::InvalidEfficiency(efficiency));
        }
        Ok(Self {
            name: name.into(),
            loss_db: -10.0 * efficiency.log10(),
        })
    }

    pub fn efficiency(&self) -> f64 {
        db_to_efficiency(self.loss_db)
    }
}

pub fn db_to_efficiency(loss_db: f64) -> f64 {
    10f64.powf(-loss_db / 10.0)
}

pub fn efficiency_to_db(efficiency: f64) -> f64 {
    -10.0 * efficiency.log10()
}

/// Ordered list of independent loss contributions.
#[derive(Debug, Clone, Default)]
pub struct LossChain {
    pub entries: Vec<LossEntry>,
}

impl LossChain {
    pub fn push_db(&mut self, name: impl Into<String>, loss_db: f64) -> Result<(), BudgetError> {
        self.entries.push(LossEntry::from_db(name, loss_db)?);
        Ok(())
    }

    pub fn push_efficiency(
        &mut self,
        name: impl Into<String>,
        efficiency: f64,
    ) -> Result<(), BudgetError> {
        self.entries.push(LossEntry::from_efficiency(name, efficiency)?);
        Ok(())
    }

    pub fn total_db(&self) -> f64 {
        self.entries.iter().map(|e| e.loss_db).sum()
    }

    /// Product of the entry efficiencies; 1.0 for an empty chain.
    pub fn heralding_efficiency(&self) -> f64 {
        db_to_efficiency(self.total_db())
    }
}

/// Pump suppression of a uniform absorber: thickness times attenuation.
pub fn pump_suppression_db(thickness_um: f64, attenuation_db_per_um: f64) -> f64 {
    thickness_um * attenuation_db_per_um
}

/// Depth at which `fraction` of the power has been absorbed.
pub fn depth_for_absorbed_fraction(attenuation_db_per_um: f64, fraction: f64) -> Result<f64, BudgetError> {
    if !(attenuation_db_per_um > 0.0) {
        return Err(BudgetError::NonPositive("attenuation"));
    }
    if !(fraction >= 0.0 && fraction < 1.0) {
        return Err(BudgetError::NonPositive("1 - fraction"));
    }
    Ok(-10.0 * (1.0 - fraction).log10() / attenuation_db_per_um)
}

/// Two-point log-linear CAR calibration. This is an interpolator over quoted
/// operating points, not a physical model; queries far outside the anchor
/// interval set `extrapolated` on the estimate.
#[derive(Debug, Clone)]
pub struct CarCalibration {
    anchors: [(f64, f64); 2],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarEstimate {
    pub car: f64,
    pub extrapolated: bool,
}

impl CarCalibration {
    pub fn new(a: (f64, f64), b: (f64, f64)) -> Result<Self, BudgetError> {
        if a.0 == b.0 {
            return Err(BudgetError::DegenerateCalibration(a.0));
        }
        for &(_, car) in &[a, b] {
            if !(car > 0.0) {
                return Err(BudgetError::InvalidCar(car));
            }
        }
        let anchors = if a.0 < b.0 { [a, b] } else { [b, a] };
        Ok(Self { anchors })
    }

    /// The operating points quoted for this device class: 220 dB suppression
    /// giving CAR 3.16e13, 110 dB giving 3.16e3.
    pub fn device_default() -> Self {
        Self::new((220.0, 3.16e13), (110.0, 3.16e3)).expect("anchors are valid")
    }

    pub fn estimate(&self, suppression_db: f64) -> CarEstimate {
        let [(s0, c0), (s1, c1)] = self.anchors;
        let slope = (c1.log10() - c0.log10()) / (s1 - s0);
        let log_car = c0.log10() + slope * (suppression_db - s0);
        let span = s1 - s0;
        let extrapolated =
            suppression_db < s0 - 0.5 * span || suppression_db > s1 + 0.5 * span;
        CarEstimate {
            car: 10f64.powf(log_car),
            extrapolated,
        }
    }
}

/// Pair probability per pulse, linear in pump power around a quoted
/// calibration point (`power_mw` producing probability `prob`). Saturates at 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairRate {
    pub probability: f64,
    pub saturated: bool,
}

pub fn pair_rate_budget(
    pump_power_mw: f64,
    calibration_power_mw: f64,
    calibration_probability: f64,
) -> Result<PairRate, BudgetError> {
    if !(pump_power_mw >= 0.0) {
        return Err(BudgetError::NonPositive("pump power"));
    }
    if !(calibration_power_mw > 0.0) || !(calibration_probability > 0.0) {
        return Err(BudgetError::NonPositive("calibration point"));
    }
    let raw = calibration_probability * pump_power_mw / calibration_power_mw;
    Ok(PairRate {
        probability: raw.min(1.0),
        saturated: raw > 1.0,
    })
}

/// The quoted design point: 0.33 mW of pump for pair probability 0.1.
pub const PAIR_CALIBRATION_MW: f64 = 0.33;
pub const PAIR_CALIBRATION_PROBABILITY: f64 = 0.1;

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn end_to_end_heralding_brackets_the_design_target() {
        // Coupler-plus-substrate loss combined with the reference detector
        // stack absorbance lands near the 95% design point.
        let mut chain = LossChain::default();
        chain.push_db("coupler+substrate", 0.17).unwrap();
        chain
            .push_efficiency("detector-stack", crate::tmm::REFERENCE_NBN_ABSORBANCE)
            .unwrap();
        let eta = chain.heralding_efficiency();
        assert!((0.90..=0.97).contains(&eta), "heralding {eta}");
    }

    #[test]
    fn suppression_is_a_product() {
        assert_abs_diff_eq!(pump_suppression_db(400.0, 0.55), 220.0, epsilon = 1e-12);
        assert_abs_diff_eq!(pump_suppression_db(400.0, 0.275), 110.0, epsilon = 1e-12);
        assert_eq!(pump_suppression_db(0.0, 123.0), 0.0);
    }

    #[test]
    fn ninety_nine_percent_depth() {
        let d = depth_for_absorbed_fraction(0.55, 0.99).unwrap();
        assert_relative_eq!(d, 36.363636363636, max_relative = 1e-10);
        assert_eq!(depth_for_absorbed_fraction(0.55, 0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(depth_for_absorbed_fraction(1.0, 0.9).unwrap(), 10.0, epsilon = 1e-12);
    }

    #[test]
    fn car_anchors_exact() {
        let cal = CarCalibration::device_default();
        let hi = cal.estimate(220.0);
        assert_relative_eq!(hi.car, 3.16e13, max_relative = 1e-9);
        assert!(!hi.extrapolated);
        let lo = cal.estimate(110.0);
        assert_relative_eq!(lo.car, 3.16e3, max_relative = 1e-9);
        assert!(!lo.extrapolated);
    }

    #[test]
    fn car_midpoint_is_geometric() {
        let mid = CarCalibration::device_default().estimate(165.0);
        assert_relative_eq!(mid.car, 3.16e8, max_relative = 1e-9);
    }

    #[test]
    fn car_monotone_and_flagged_outside() {
        let cal = CarCalibration::device_default();
        let mut last = 0.0;
        for s in (60..=280).step_by(10) {
            let est = cal.estimate(s as f64);
            assert!(est.car > last);
            last = est.car;
        }
        assert!(cal.estimate(54.0).extrapolated);
        assert!(cal.estimate(276.0).extrapolated);
        assert!(!cal.estimate(56.0).extrapolated);
        assert!(!cal.estimate(274.0).extrapolated);
    }

    #[test]
    fn degenerate_calibration_rejected() {
        assert!(CarCalibration::new((100.0, 10.0), (100.0, 20.0)).is_err());
        assert!(CarCalibration::new((100.0, 0.0), (200.0, 20.0)).is_err());
    }

    #[test]
    fn empty_chain_is_unity() {
        assert_eq!(LossChain::default().heralding_efficiency(), 1.0);
    }

    #[test]
    fn three_db_is_half() {
        let mut chain = LossChain::default();
        chain.push_db("splitter", 3.0103).unwrap();
        assert_abs_diff_eq!(chain.heralding_efficiency(), 0.5, epsilon = 1e-6);
    }

    #[test]
    fn chain_is_order_invariant() {
        let mut a = LossChain::default();
        a.push_db("one", 0.17).unwrap();
        a.push_efficiency("two", 0.93).unwrap();
        a.push_db("three", 1.3).unwrap();
        let mut b = LossChain::default();
        b.push_db("three", 1.3).unwrap();
        b.push_db("one", 0.17).unwrap();
        b.push_efficiency("two", 0.93).unwrap();
        assert_relative_eq!(
            a.heralding_efficiency(),
            b.heralding_efficiency(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn db_efficiency_round_trip() {
        for &db in &[0.0, 0.17, 3.0, 22.0] {
            assert_relative_eq!(efficiency_to_db(db_to_efficiency(db)), db, max_relative = 1e-12, epsilon = 1e-12);
        }
        for &eta in &[1.0, 0.93, 0.5, 1e-3] {
            assert_relative_eq!(db_to_efficiency(efficiency_to_db(eta)), eta, max_relative = 1e-12);
        }
    }

    #[test]
    fn pair_rate_linear_and_saturating() {
        let p = pair_rate_budget(0.33, PAIR_CALIBRATION_MW, PAIR_CALIBRATION_PROBABILITY).unwrap();
        assert_abs_diff_eq!(p.probability, 0.1, epsilon = 1e-12);
        assert!(!p.saturated);
        let p = pair_rate_budget(0.033, PAIR_CALIBRATION_MW, PAIR_CALIBRATION_PROBABILITY).unwrap();
        assert_abs_diff_eq!(p.probability, 0.01, epsilon = 1e-12);
        let p = pair_rate_budget(0.0, PAIR_CALIBRATION_MW, PAIR_CALIBRATION_PROBABILITY).unwrap();
        assert_eq!(p.probability, 0.0);
        let p = pair_rate_budget(5.0, PAIR_CALIBRATION_MW, PAIR_CALIBRATION_PROBABILITY).unwrap();
        assert_eq!(p.probability, 1.0);
        assert!(p.saturated);
    }

    #[test]
    fn invalid_entries_rejected() {
        assert!(LossEntry::from_db("x", -0.1).is_err());
        assert!(LossEntry::from_efficiency("x", 0.0).is_err());
        assert!(LossEntry::from_efficiency("x", 1.2).is_err());
    }
}

//! Wind speed height extrapolation and turbine power conversion.
//!
//! Speeds measured at the anemometer height are carried to hub height with
//! the neutral-stability logarithmic profile
//!
//! ```text
//! v_hub = v_anemometer · ln(h_hub / z0) / ln(h_anemometer / z0)
//! ```
//!
//! and converted to power with `P = ½ ρ A v³ Cp`, clipped to the turbine's
//! operating bands: zero below cut-in, the plateau between rated speed and
//! cut-out, and zero again above cut-out. `Cp` is not a free parameter: it
//! is fixed by requiring the cubic curve to meet the rated plateau exactly
//! at rated speed.
//!
//! All powers are in watts.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Betz limit on the power coefficient.
pub const BETZ_LIMIT: f64 = 16.0 / 27.0;

#[derive(Debug, Error, PartialEq)]
pub enum PhysicsError {
    #[error("height {height} m must exceed roughness length {z0} m")]
    HeightBelowRoughness { height: f64, z0: f64 },
    #[error("roughness length must be positive, got {0}")]
    NonPositiveRoughness(f64),
    #[error("wind speed must be finite and non-negative, got {0}")]
    NegativeSpeed(f64),
    #[error("derived power coefficient {cp:.6} is not below the Betz limit 16/27")]
    BetzViolation { cp: f64 },
    #[error("invalid turbine spec: {0}")]
    InvalidSpec(String),
}

/// Extrapolates a wind speed from height `h1` to height `h2` over a surface
/// with roughness length `z0`.
pub fn extrapolate_speed(v1: f64, h1: f64, h2: f64, z0: f64) -> Result<f64, PhysicsError> {
    if !(v1 >= 0.0) || !v1.is_finite() {
        return Err(PhysicsError::NegativeSpeed(v1));
    }
    Ok(v1 * profile_ratio(h1, h2, z0)?)
}

/// `ln(h2/z0) / ln(h1/z0)`: the factor carrying a speed from `h1` to `h2`.
pub fn profile_ratio(h1: f64, h2: f64, z0: f64) -> Result<f64, PhysicsError> {
    if !(z0 > 0.0) {
        return Err(PhysicsError::NonPositiveRoughness(z0));
    }
    for h in [h1, h2] {
        if !(h > z0) {
            return Err(PhysicsError::HeightBelowRoughness { height: h, z0 });
        }
    }
    if h1 == h2 {
        return Ok(1.0);
    }
    Ok((h2 / z0).ln() / (h1 / z0).ln())
}

/// Turbine and site constants. Speeds are at hub height unless noted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TurbineSpec {
    /// m
    pub rotor_diameter: f64,
    /// m
    pub hub_height: f64,
    /// m
    pub anemometer_height: f64,
    /// m
    pub roughness_length: f64,
    /// kg/m³
    pub air_density: f64,
    pub cut_in: f64,
    pub rated_speed: f64,
    pub cut_out: f64,
    /// W
    pub rated_power: f64,
}

impl Default for TurbineSpec {
    fn default() -> Self {
        TurbineSpec {
            rotor_diameter: 150.0,
            hub_height: 100.0,
            anemometer_height: 3.8,
            roughness_length: 0.0002,
            air_density: 1.2,
            cut_in: 3.0,
            rated_speed: 12.4,
            cut_out: 25.0,
            rated_power: 8e6,
        }
    }
}

impl TurbineSpec {
    pub fn swept_area(&self) -> f64 {
        let r = self.rotor_diameter / 2.0;
        PI * r * r
    }

    fn validate(&self) -> Result<(), PhysicsError> {
        let positive = [
            ("rotor_diameter", self.rotor_diameter),
            ("air_density", self.air_density),
            ("rated_power", self.rated_power),
            ("roughness_length", self.roughness_length),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(PhysicsError::InvalidSpec(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !(0.0 < self.cut_in && self.cut_in < self.rated_speed && self.rated_speed < self.cut_out)
        {
            return Err(PhysicsError::InvalidSpec(format!(
                "need 0 < cut_in < rated_speed < cut_out, got {} / {} / {}",
                self.cut_in, self.rated_speed, self.cut_out
            )));
        }
        profile_ratio(self.anemometer_height, self.hub_height, self.roughness_length)?;
        Ok(())
    }
}

/// Power coefficient that makes `½ ρ A v_rated³ Cp` equal the rated power.
pub fn derive_cp(spec: &TurbineSpec) -> Result<f64, PhysicsError> {
    spec.validate()?;
    let available = 0.5 * spec.air_density * spec.swept_area() * spec.rated_speed.powi(3);
    let cp = spec.rated_power / available;
    if cp >= BETZ_LIMIT {
        return Err(PhysicsError::BetzViolation { cp });
    }
    Ok(cp)
}

/// A validated [`TurbineSpec`] together with its derived `Cp` and
/// anemometer-to-hub ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct Turbine {
    spec: TurbineSpec,
    cp: f64,
    hub_ratio: f64,
}

/// Operating thresholds expressed as speeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpeedBands {
    pub cut_in: f64,
    pub rated: f64,
    pub cut_out: f64,
}

/// Which operating band a hub speed falls in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Band {
    BelowCutIn,
    Partial,
    Rated,
    CutOut,
}

impl Turbine {
    pub fn new(spec: TurbineSpec) -> Result<Self, PhysicsError> {
        let cp = derive_cp(&spec)?;
        let hub_ratio =
            profile_ratio(spec.anemometer_height, spec.hub_height, spec.roughness_length)?;
        Ok(Turbine {
            spec,
            cp,
            hub_ratio,
        })
    }

    pub fn spec(&self) -> &TurbineSpec {
        &self.spec
    }

    pub fn cp(&self) -> f64 {
        self.cp
    }

    /// Anemometer-to-hub speed factor.
    pub fn hub_ratio(&self) -> f64 {
        self.hub_ratio
    }

    /// Anemometer-height speed carried to hub height.
    pub fn hub_speed(&self, v_anemometer: f64) -> f64 {
        v_anemometer * self.hub_ratio
    }

    /// Cubic power curve without band limits.
    pub fn unclipped_power(&self, v_hub: f64) -> f64 {
        0.5 * self.spec.air_density * self.spec.swept_area() * v_hub.powi(3) * self.cp
    }

    pub fn band(&self, v_hub: f64) -> Band {
        let s = &self.spec;
        if v_hub < s.cut_in {
            Band::BelowCutIn
        } else if v_hub < s.rated_speed {
            Band::Partial
        } else if v_hub < s.cut_out {
            Band::Rated
        } else {
            Band::CutOut
        }
    }

    /// Banded power curve at hub height. Negative inputs produce zero.
    pub fn power(&self, v_hub: f64) -> f64 {
        match self.band(v_hub) {
            Band::BelowCutIn | Band::CutOut => 0.0,
            Band::Partial => self.unclipped_power(v_hub),
            Band::Rated => self.spec.rated_power,
        }
    }

    /// Power for an anemometer-height speed.
    pub fn power_from_anemometer(&self, v_anemometer: f64) -> f64 {
        self.power(self.hub_speed(v_anemometer))
    }

    pub fn hub_bands(&self) -> SpeedBands {
        SpeedBands {
            cut_in: self.spec.cut_in,
            rated: self.spec.rated_speed,
            cut_out: self.spec.cut_out,
        }
    }

    /// Hub thresholds mapped back down to the anemometer height.
    pub fn anemometer_bands(&self) -> SpeedBands {
        let h = self.hub_bands();
        SpeedBands {
            cut_in: h.cut_in / self.hub_ratio,
            rated: h.rated / self.hub_ratio,
            cut_out: h.cut_out / self.hub_ratio,
        }
    }

    /// Share of the available (unclipped, `Cp`-weighted) energy the turbine
    /// actually produces over a series of anemometer-height speeds.
    pub fn conversion_fraction(&self, speeds: &[f64]) -> Result<ConversionStats, PhysicsError> {
        if let Some(&bad) = speeds.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(PhysicsError::NegativeSpeed(bad));
        }
        let hub: Vec<f64> = speeds.iter().map(|&v| self.hub_speed(v)).collect();
        self.conversion_fraction_hub(&hub)
    }

    /// [`Turbine::conversion_fraction`] for speeds already at hub height.
    pub fn conversion_fraction_hub(&self, hub_speeds: &[f64]) -> Result<ConversionStats, PhysicsError> {
        if hub_speeds.is_empty() {
            return Err(PhysicsError::InvalidSpec(
                "conversion fraction needs at least one speed".into(),
            ));
        }
        let mut produced = 0.0;
        let mut available = 0.0;
        let mut counts = [0usize; 4];
        for &hub in hub_speeds {
            if !(hub >= 0.0) || !hub.is_finite() {
                return Err(PhysicsError::NegativeSpeed(hub));
            }
            produced += self.power(hub);
            available += self.unclipped_power(hub);
            counts[self.band(hub) as usize] += 1;
        }
        let n = hub_speeds.len() as f64;
        let no_wind = available == 0.0;
        Ok(ConversionStats {
            fraction: if no_wind { 0.0 } else { produced / available },
            no_wind,
            produced_energy: produced,
            available_energy: available,
            below_cut_in: counts[0] as f64 / n,
            partial_load: counts[1] as f64 / n,
            rated_load: counts[2] as f64 / n,
            cut_out: counts[3] as f64 / n,
        })
    }
}

/// Result of [`Turbine::conversion_fraction`]. Energies are sums of
/// per-sample power (W · samples); band fields are time fractions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConversionStats {
    pub fraction: f64,
    /// Set when every speed was zero and the fraction is defined as 0.
    pub no_wind: bool,
    pub produced_energy: f64,
    pub available_energy: f64,
    pub below_cut_in: f64,
    pub partial_load: f64,
    pub rated_load: f64,
    pub cut_out: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn turbine() -> Turbine {
        Turbine::new(TurbineSpec::default()).unwrap()
    }

    #[test]
    fn default_ratio() {
        let expected = 500_000f64.ln() / 19_000f64.ln();
        let v = extrapolate_speed(1.0, 3.8, 100.0, 0.0002).unwrap();
        assert_eq!(v, expected);
        assert!((v - 1.331_93).abs() < 1e-5);
    }

    #[test]
    fn identity_height() {
        assert_eq!(extrapolate_speed(7.3, 10.0, 10.0, 0.0002).unwrap(), 7.3);
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(
            extrapolate_speed(1.0, 0.0001, 100.0, 0.0002),
            Err(PhysicsError::HeightBelowRoughness { .. })
        ));
        assert!(matches!(
            extrapolate_speed(1.0, 3.8, 0.0002, 0.0002),
            Err(PhysicsError::HeightBelowRoughness { .. })
        ));
        assert!(extrapolate_speed(-1.0, 3.8, 100.0, 0.0002).is_err());
        assert!(extrapolate_speed(1.0, 3.8, 100.0, 0.0).is_err());
    }

    #[test]
    fn cp_defaults() {
        let cp = derive_cp(&TurbineSpec::default()).unwrap();
        let by_hand = 8e6 / (0.6 * PI * 75.0 * 75.0 * 12.4f64.powi(3));
        assert!((cp - by_hand).abs() < 1e-15);
        assert!((cp - 0.3957).abs() < 1e-4);
    }

    #[test]
    fn cp_scales_with_rated_power() {
        let base = derive_cp(&TurbineSpec::default()).unwrap();
        let scaled = derive_cp(&TurbineSpec {
            rated_power: 10e6,
            ..TurbineSpec::default()
        })
        .unwrap();
        assert!((scaled - 1.25 * base).abs() < 1e-15);
    }

    #[test]
    fn betz_boundary_rejected() {
        let s = TurbineSpec::default();
        let at_betz = 0.5 * s.air_density * s.swept_area() * s.rated_speed.powi(3) * BETZ_LIMIT;
        let err = derive_cp(&TurbineSpec {
            rated_power: at_betz,
            ..s
        });
        assert!(matches!(err, Err(PhysicsError::BetzViolation { .. })));
    }

    #[test]
    fn invalid_band_order() {
        let s = TurbineSpec {
            cut_in: 13.0,
            ..TurbineSpec::default()
        };
        assert!(matches!(Turbine::new(s), Err(PhysicsError::InvalidSpec(_))));
    }

    #[test]
    fn power_curve_points() {
        let t = turbine();
        assert_eq!(t.power(2.9), 0.0);
        assert_eq!(t.power(13.0), 8e6);
        assert_eq!(t.power(26.0), 0.0);
        assert_eq!(t.power(25.0), 0.0);
        assert_eq!(t.power(12.4), 8e6);
        let p10 = t.power(10.0);
        assert!((p10 - 0.6 * PI * 75.0 * 75.0 * 1000.0 * t.cp()).abs() < 1e-6);
        assert!((p10 / 1e6 - 4.196).abs() < 1e-3);
        assert!((t.unclipped_power(12.4) - 8e6).abs() < 1.0);
    }

    #[test]
    fn anemometer_bands_match_reference_thresholds() {
        let b = turbine().anemometer_bands();
        assert!((b.cut_in - 2.3).abs() < 0.05);
        assert!((b.rated - 9.3).abs() < 0.05);
        assert!((b.cut_out - 18.8).abs() < 0.05);
        assert!((b.cut_in - 3.0 / 1.331_93).abs() < 1e-4);
    }

    #[test]
    fn conversion_fraction_edge_cases() {
        let t = turbine();
        let b = t.anemometer_bands();
        let inside: Vec<f64> = (0..50)
            .map(|i| b.cut_in + (b.rated - b.cut_in) * (i as f64 + 0.5) / 50.0)
            .collect();
        let s = t.conversion_fraction(&inside).unwrap();
        assert!((s.fraction - 1.0).abs() < 1e-12);
        assert_eq!(s.partial_load, 1.0);

        let stormy = vec![b.cut_out + 1.0; 10];
        let s = t.conversion_fraction(&stormy).unwrap();
        assert_eq!(s.fraction, 0.0);
        assert_eq!(s.cut_out, 1.0);

        let calm = vec![0.0; 5];
        let s = t.conversion_fraction(&calm).unwrap();
        assert!(s.no_wind);
        assert_eq!(s.fraction, 0.0);

        assert!(t.conversion_fraction(&[]).is_err());
    }

    #[test]
    fn spec_round_trips_through_json_with_defaults() {
        let s: TurbineSpec = serde_json::from_str(r#"{"rated_power": 1.0e7}"#).unwrap();
        assert_eq!(s.rated_power, 1e7);
        assert_eq!(s.rotor_diameter, 150.0);
    }
}

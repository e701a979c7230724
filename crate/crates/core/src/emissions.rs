//! Instantaneous CO2-equivalent emission rates (g/s) for both powertrains.
//!
//! EV rates convert battery power through a grid emission factor; ICEV
//! rates convert fuel use through blend-weighted gasoline/ethanol factors.
//! All functions are pure and freely parallel.

use thiserror::Error;

/// Physical constants used by the rate computations.
///
/// `phi_g_per_kwh` is the grid carbon intensity in gCO2/kWh; the default
/// represents marginal thermoelectric dispatch. The gasoline and ethanol
/// factors are stoichiometric combustion values in g/L. The ethanol share
/// is the volumetric blend percentage.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionFactors {
    pub phi_g_per_kwh: f64,
    pub gasoline_g_per_l: f64,
    pub ethanol_g_per_l: f64,
    pub ethanol_share_pct: f64,
    pub afr: f64,
    pub fuel_density_g_per_l: f64,
}

impl Default for EmissionFactors {
    fn default() -> Self {
        EmissionFactors {
            phi_g_per_kwh: 38.5,
            gasoline_g_per_l: 2310.0,
            ethanol_g_per_l: 1510.0,
            ethanol_share_pct: 0.0,
            afr: 14.7,
            fuel_density_g_per_l: 740.0,
        }
    }
}

impl EmissionFactors {
    pub fn validate(&self) -> Result<(), EmissionsError> {
        let positives = [
            ("phi", self.phi_g_per_kwh),
            ("gasoline factor", self.gasoline_g_per_l),
            ("ethanol factor", self.ethanol_g_per_l),
            ("afr", self.afr),
            ("fuel density", self.fuel_density_g_per_l),
        ];
        for (name, v) in positives {
            if !(v.is_finite() && v > 0.0) {
                return Err(EmissionsError::BadFactor {
                    name: name.to_string(),
                    value: v,
                });
            }
        }
        if !(0.0..=100.0).contains(&self.ethanol_share_pct) {
            return Err(EmissionsError::BadFactor {
                name: "ethanol share".to_string(),
                value: self.ethanol_share_pct,
            });
        }
        Ok(())
    }

    /// Blend-weighted fuel emission factor in g/L.
    pub fn blend_g_per_l(&self) -> f64 {
        let p = self.ethanol_share_pct / 100.0;
        (1.0 - p) * self.gasoline_g_per_l + p * self.ethanol_g_per_l
    }
}

/// One electrical measurement: battery terminal voltage and current.
/// Positive current is discharge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElectricalSample {
    pub battery_voltage_v: f64,
    pub battery_current_a: f64,
}

#[derive(Debug, Error)]
pub enum EmissionsError {
    #[error("non-finite electrical input (V={voltage}, I={current})")]
    NonFiniteInput { voltage: f64, current: f64 },
    #[error("emission factor `{name}` out of range: {value}")]
    BadFactor { name: String, value: f64 },
    #[error("undefined efficiency: K={k} km/L with v={velocity} km/h > 0")]
    UndefinedEfficiency { k: f64, velocity: f64 },
    #[error("fuel flow {flow} L/h is not positive; idle handling is the caller's branch")]
    IdleFuel { flow: f64 },
}

/// Electric-based instantaneous rate.
///
/// Battery power |I*V| in W maps to g/s through phi. Regeneration
/// (negative current) returns 0 g/s: braking energy is not credited,
/// which is conservative for the EV side.
pub fn ev_rate(sample: ElectricalSample, factors: &EmissionFactors) -> Result<f64, EmissionsError> {
    if !sample.battery_voltage_v.is_finite() || !sample.battery_current_a.is_finite() {
        return Err(EmissionsError::NonFiniteInput {
            voltage: sample.battery_voltage_v,
            current: sample.battery_current_a,
        });
    }
    if sample.battery_current_a < 0.0 {
        return Ok(0.0);
    }
    let power_w = (sample.battery_current_a * sample.battery_voltage_v).abs();
    Ok(power_w / 1000.0 * (factors.phi_g_per_kwh / 3600.0))
}

/// Fuel-based instantaneous rate from velocity and efficiency K (km/L).
///
/// A stationary vehicle reports 0 g/s regardless of K; a moving vehicle
/// with non-positive K is an error because the efficiency is undefined.
pub fn icev_rate(
    velocity_kmh: f64,
    efficiency_km_per_l: f64,
    factors: &EmissionFactors,
) -> Result<f64, EmissionsError> {
    if !velocity_kmh.is_finite() || !efficiency_km_per_l.is_finite() {
        return Err(EmissionsError::UndefinedEfficiency {
            k: efficiency_km_per_l,
            velocity: velocity_kmh,
        });
    }
    if velocity_kmh == 0.0 {
        return Ok(0.0);
    }
    if efficiency_km_per_l <= 0.0 {
        return Err(EmissionsError::UndefinedEfficiency {
            k: efficiency_km_per_l,
            velocity: velocity_kmh,
        });
    }
    Ok(velocity_kmh / (3600.0 * efficiency_km_per_l) * factors.blend_g_per_l())
}

/// Fuel volume flow (L/h) inferred from mass air flow (g/s of air) via the
/// stoichiometric air-fuel ratio and fuel density.
pub fn fuel_flow_from_maf(maf_g_per_s: f64, factors: &EmissionFactors) -> f64 {
    (maf_g_per_s / factors.afr) / factors.fuel_density_g_per_l * 3600.0
}

/// Instantaneous efficiency K = v / fuel volume flow, in km/L.
///
/// Zero speed yields K = 0; callers route that through `icev_rate`'s
/// stationary branch. Non-positive fuel flow has no defined efficiency.
pub fn efficiency_k(velocity_kmh: f64, fuel_flow_l_per_h: f64) -> Result<f64, EmissionsError> {
    if !fuel_flow_l_per_h.is_finite() || fuel_flow_l_per_h <= 0.0 {
        return Err(EmissionsError::IdleFuel {
            flow: fuel_flow_l_per_h,
        });
    }
    Ok(velocity_kmh / fuel_flow_l_per_h)
}

/// Dilute CO2 volume flow (m3/min) to mass rate (g/s) at a given gas
/// density (g/m3) and dilution fraction.
pub fn co2_volume_to_mass(flow_m3_per_min: f64, density_g_per_m3: f64, dilution: f64) -> f64 {
    (flow_m3_per_min / 60.0) * density_g_per_m3 * dilution
}

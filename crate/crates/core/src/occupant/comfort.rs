//! Fanger's Predicted Mean Vote.
//!
//! Mean radiant temperature is taken equal to air temperature and no
//! external work is performed. The clothing surface temperature is found by
//! the usual damped fixed-point iteration on the clothing heat balance.

use serde::{Deserialize, Serialize};

/// Metabolic rate of one met unit, W/m².
pub const MET_W_PER_M2: f64 = 58.15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComfortParams {
    /// Clothing insulation, clo.
    pub clo: f64,
    /// Relative air speed, m/s.
    pub air_speed: f64,
}

impl Default for ComfortParams {
    fn default() -> Self {
        Self {
            clo: 0.5,
            air_speed: 0.1,
        }
    }
}

/// Saturation-weighted water vapour partial pressure, Pa.
fn vapour_pressure(temp: f64, rel_humidity: f64) -> f64 {
    rel_humidity * 10.0 * (16.6536 - 4030.183 / (temp + 235.0)).exp()
}

/// PMV at air temperature `temp` (°C), relative humidity `humidity` (%),
/// and activity level `met_index` (met).
pub fn pmv(temp: f64, humidity: f64, met_index: f64, params: &ComfortParams) -> f64 {
    let pa = vapour_pressure(temp, humidity);
    let icl = 0.155 * params.clo;
    let m = met_index * MET_W_PER_M2;
    let mw = m;
    let fcl = if icl <= 0.078 {
        1.0 + 1.29 * icl
    } else {
        1.05 + 0.645 * icl
    };
    let hcf = 12.1 * params.air_speed.sqrt();
    let taa = temp + 273.0;
    let tra = taa;

    let p1 = icl * fcl;
    let p2 = p1 * 3.96;
    let p3 = p1 * 100.0;
    let p4 = p1 * taa;
    let p5 = 308.7 - 0.028 * mw + p2 * (tra / 100.0).powi(4);

    let tcla = taa + (35.5 - temp) / (3.5 * icl + 0.1);
    let mut xn = tcla / 100.0;
    let mut xf = tcla / 50.0;
    let mut hc = hcf;
    for _ in 0..150 {
        if (xn - xf).abs() <= 0.00015 {
            break;
        }
        xf = (xf + xn) / 2.0;
        let hcn = 2.38 * (100.0 * xf - taa).abs().powf(0.25);
        hc = hcf.max(hcn);
        xn = (p5 + p4 * hc - p2 * xf.powi(4)) / (100.0 + p3 * hc);
    }
    let tcl = 100.0 * xn - 273.0;

    let skin_diffusion = 3.05e-3 * (5733.0 - 6.99 * mw - pa);
    let sweating = if mw > MET_W_PER_M2 {
        0.42 * (mw - MET_W_PER_M2)
    } else {
        0.0
    };
    let latent_resp = 1.7e-5 * m * (5867.0 - pa);
    let dry_resp = 0.0014 * m * (34.0 - temp);
    let radiation = 3.96 * fcl * (xn.powi(4) - (tra / 100.0).powi(4));
    let convection = fcl * hc * (tcl - temp);

    let ts = 0.303 * (-0.036 * m).exp() + 0.028;
    ts * (mw - skin_diffusion - sweating - latent_resp - dry_resp - radiation - convection)
}

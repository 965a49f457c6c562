//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Each export returns a JSON string. The work happens in plain Rust
//! functions so that the same code can be tested natively.

use junction_core::analysis::{compare_layouts, Load, MuGrid};
use junction_core::approx::{gi_correction_factor, model_threshold, waiting_threshold, CorrectionParams};
use junction_core::config::{parse_config, Config};
use junction_core::ctmc::StateSpace;
use junction_core::{bundled, Junction};
use serde::Serialize;
use wasm_bindgen::prelude::*;

const CASE_STUDY: &str = "table2_junction";

#[derive(Debug, Serialize)]
pub struct LayoutCurve {
    pub name: String,
    pub mu: Vec<f64>,
    pub e_lw: Vec<f64>,
    pub threshold: Vec<f64>,
    pub mu_min: Option<f64>,
    pub b_max: Option<f64>,
    pub states: usize,
}

#[derive(Debug, Serialize)]
pub struct CaseStudy {
    pub route: String,
    pub p_pt: f64,
    pub layouts: Vec<LayoutCurve>,
    /// Change of `b_max` relative to the first layout.
    pub relative: Vec<Option<f64>>,
}

#[derive(Debug, Serialize)]
pub struct ThresholdCurve {
    pub l_star: f64,
    pub rho: Vec<f64>,
    pub gamma: Vec<f64>,
    pub threshold: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct SpaceSize {
    pub slots: Vec<u16>,
    pub layouts: Vec<(String, Vec<usize>)>,
}

fn case_config() -> Result<Config, String> {
    let text = bundled::get(CASE_STUDY).ok_or("bundled case study missing")?;
    parse_config(text).map_err(|e| e.to_string())
}

/// Sweeps the bundled case study on both layouts with `slots` queue places
/// per route and reports the assessed route's curve against its threshold.
pub fn case_study(slots: u16, mu_min: f64, mu_max: f64, mu_step: f64) -> Result<CaseStudy, String> {
    let config = case_config()?;
    let program = config.require_program().map_err(|e| e.to_string())?;
    let load = Load::from_program(program, config.junction(), config.params.analysis.p_pt)
        .map_err(|e| e.to_string())?;
    let grid = MuGrid::range(mu_min, mu_max, mu_step).map_err(|e| e.to_string())?;
    let mut params = config.params.analysis;
    params.slots = slots;
    let assessed = config.params.assess.resolve(config.junction(), &load.lambda);
    let route = assessed[0];
    let cmp = compare_layouts(&config.layouts, &load, &grid, &params, Some(&assessed))
        .map_err(|e| e.to_string())?;
    let mut layouts = Vec::new();
    for ((sweep, verdict), junction) in cmp.sweeps.iter().zip(&cmp.verdicts).zip(&config.layouts) {
        let states = StateSpace::build(junction, slots).map_err(|e| e.to_string())?.len();
        layouts.push(LayoutCurve {
            name: sweep.layout.clone(),
            mu: sweep.points.iter().map(|p| p.mu).collect(),
            e_lw: sweep.points.iter().map(|p| p.routes[route].e_lw).collect(),
            threshold: sweep.points.iter().map(|p| p.routes[route].threshold).collect(),
            mu_min: verdict.mu_min,
            b_max: verdict.b_max,
            states,
        });
    }
    Ok(CaseStudy {
        route: config.junction().routes[route].name.clone(),
        p_pt: load.p_pt,
        layouts,
        relative: cmp.relative,
    })
}

/// `γ` and the model threshold over occupancies in `[0, 1)`.
pub fn threshold_curve(p_pt: f64, v_a: f64, v_b: f64, points: usize) -> Result<ThresholdCurve, String> {
    let l_star = waiting_threshold(p_pt).map_err(|e| e.to_string())?;
    let points = points.max(2);
    let mut curve = ThresholdCurve {
        l_star,
        rho: Vec::with_capacity(points),
        gamma: Vec::with_capacity(points),
        threshold: Vec::with_capacity(points),
    };
    for k in 0..points {
        let rho = k as f64 / points as f64;
        let gamma = gi_correction_factor(&CorrectionParams::single_channel(rho, v_a, v_b))
            .map_err(|e| e.to_string())?;
        curve.rho.push(rho);
        curve.gamma.push(gamma);
        curve.threshold.push(model_threshold(l_star, gamma).map_err(|e| e.to_string())?);
    }
    Ok(curve)
}

/// Reachable states of both case-study layouts for `1..=max_slots`.
pub fn space_sizes(max_slots: u16) -> Result<SpaceSize, String> {
    let config = case_config()?;
    let slots: Vec<u16> = (1..=max_slots.max(1)).collect();
    let count = |j: &Junction| -> Result<Vec<usize>, String> {
        slots
            .iter()
            .map(|&m| StateSpace::build(j, m).map(|s| s.len()).map_err(|e| e.to_string()))
            .collect()
    };
    let layouts = config
        .layouts
        .iter()
        .map(|j| Ok((j.name.clone(), count(j)?)))
        .collect::<Result<_, String>>()?;
    Ok(SpaceSize { slots, layouts })
}

fn to_js<T: Serialize>(result: Result<T, String>) -> Result<String, JsValue> {
    result
        .and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
        .map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = caseStudy)]
pub fn case_study_js(slots: u16, mu_min: f64, mu_max: f64, mu_step: f64) -> Result<String, JsValue> {
    to_js(case_study(slots, mu_min, mu_max, mu_step))
}

#[wasm_bindgen(js_name = thresholdCurve)]
pub fn threshold_curve_js(p_pt: f64, v_a: f64, v_b: f64, points: usize) -> Result<String, JsValue> {
    to_js(threshold_curve(p_pt, v_a, v_b, points))
}

#[wasm_bindgen(js_name = spaceSizes)]
pub fn space_sizes_js(max_slots: u16) -> Result<String, JsValue> {
    to_js(space_sizes(max_slots))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overpass_absorbs_longer_service() {
        let c = case_study(3, 0.05, 1.0, 0.05).unwrap();
        assert_eq!(c.route, "r3");
        assert_eq!(c.layouts.len(), 2);
        let (flat, over) = (&c.layouts[0], &c.layouts[1]);
        assert!(over.b_max.unwrap() >= flat.b_max.unwrap());
        assert!(over.states > flat.states);
        assert_eq!(c.relative[0], Some(0.0));
        assert_eq!(flat.mu.len(), 20);
        assert!(flat.e_lw.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn threshold_curve_starts_at_zero_load() {
        let t = threshold_curve(0.5, 0.8, 0.3, 10).unwrap();
        assert_eq!(t.rho.len(), 10);
        assert_eq!(t.rho[0], 0.0);
        let va2: f64 = 0.64;
        let expected = 2.0 / (-va2 * 0.09 + va2);
        assert!((t.gamma[0] - expected).abs() < 1e-12);
        assert!((t.threshold[0] - expected * 0.479 * (-0.65f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn bad_inputs_are_reported() {
        assert!(threshold_curve(1.5, 0.8, 0.3, 10).is_err());
        assert!(case_study(3, 0.5, 0.1, 0.1).is_err());
        assert!(case_study(0, 0.1, 0.5, 0.1).is_err());
    }

    #[test]
    fn space_grows_with_slots() {
        let s = space_sizes(3).unwrap();
        assert_eq!(s.slots, vec![1, 2, 3]);
        for (_, counts) in &s.layouts {
            assert!(counts.windows(2).all(|w| w[1] > w[0]));
        }
    }
}

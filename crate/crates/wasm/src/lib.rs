//! WebAssembly bindings for the static demo page in `www/`.
//!
//! The plain functions carry the logic and are tested natively; the
//! `#[wasm_bindgen]` wrappers only convert errors for JavaScript.

use pqbench::eval::{evaluate, render_heatmap_svg};
use pqbench::features::extract_features;
use pqbench::models::{train, ModelKind, ModelSpec};
use pqbench::synth::{generate_dataset, generate_record, CircuitConfig, EventClass, CHANNELS};
use pqbench::wavelet::{db4_filters, wavedec5, SUBBAND_NAMES};
use wasm_bindgen::prelude::*;

fn class(code: usize) -> Result<EventClass, String> {
    EventClass::from_code(code).map_err(|e| e.to_string())
}

/// Six channels of 1000 samples (Va, Vb, Vc, Ia, Ib, Ic), concatenated.
pub fn simulate_event(class_code: usize, seed: u64, index: u64) -> Result<Vec<f64>, String> {
    let r = generate_record(&CircuitConfig::default(), class(class_code)?, seed, index).map_err(|e| e.to_string())?;
    Ok(r.samples)
}

/// Energy share of each subband (D1..D5, A5) per channel: 36 values,
/// channel-major. Each channel's six shares sum to 1 (or are all 0).
pub fn band_energies(class_code: usize, seed: u64, index: u64) -> Result<Vec<f64>, String> {
    let r = generate_record(&CircuitConfig::default(), class(class_code)?, seed, index).map_err(|e| e.to_string())?;
    let filters = db4_filters().map_err(|e| e.to_string())?;
    let mut out = Vec::with_capacity(CHANNELS * SUBBAND_NAMES.len());
    for ch in r.channels() {
        let bands = wavedec5(ch, &filters).map_err(|e| e.to_string())?;
        let total = bands.energy();
        out.extend(bands.bands().map(|b| {
            let e: f64 = b.iter().map(|c| c * c).sum();
            if total > 0.0 { e / total } else { 0.0 }
        }));
    }
    Ok(out)
}

pub struct BenchOutcome {
    pub accuracy: f64,
    pub summary: String,
    pub svg: String,
}

/// Trains one model on a small generated split and scores it on another.
pub fn run_benchmark(model: &str, per_class: usize, seed: u64) -> Result<BenchOutcome, String> {
    if !(1..=30).contains(&per_class) {
        return Err("per-class count must be between 1 and 30 in the browser".into());
    }
    let kind: ModelKind = model.parse().map_err(|e: pqbench::Error| e.to_string())?;
    let cfg = CircuitConfig::default();
    let filters = db4_filters().map_err(|e| e.to_string())?;
    let features = |s: u64| {
        generate_dataset(&cfg, s, per_class)
            .and_then(|rs| rs.iter().map(|r| extract_features(r, &filters)).collect::<pqbench::Result<Vec<_>>>())
            .map_err(|e| e.to_string())
    };
    let train_set = features(seed)?;
    let test_set = features(seed.wrapping_add(1))?;
    let m = train(&ModelSpec::new(kind).with_seed(seed), &train_set).map_err(|e| e.to_string())?;
    let r = evaluate(&m, &test_set).map_err(|e| e.to_string())?;
    let names: Vec<&str> = EventClass::ALL.iter().map(|c| c.name()).collect();
    let pair = match r.top_pair {
        Some(p) => format!("most confused: {} / {} ({})", p.a, p.b, p.count),
        None => "no confusions".into(),
    };
    Ok(BenchOutcome {
        accuracy: r.accuracy,
        summary: format!("{kind}: accuracy {:.3} on {} test records; {pair}", r.accuracy, test_set.len()),
        svg: render_heatmap_svg(&r.confusion, &names),
    })
}

#[wasm_bindgen]
pub fn class_names() -> Vec<String> {
    EventClass::ALL.iter().map(|c| c.name().to_string()).collect()
}

#[wasm_bindgen]
pub fn model_names() -> Vec<String> {
    ModelKind::ALL.iter().map(|k| k.name().to_string()).collect()
}

#[wasm_bindgen]
pub fn simulate(class_code: usize, seed: u64, index: u64) -> Result<Vec<f64>, JsError> {
    simulate_event(class_code, seed, index).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn subband_energies(class_code: usize, seed: u64, index: u64) -> Result<Vec<f64>, JsError> {
    band_energies(class_code, seed, index).map_err(|e| JsError::new(&e))
}

/// Returns `[summary, svg]`.
#[wasm_bindgen]
pub fn quick_benchmark(model: &str, per_class: usize, seed: u64) -> Result<Vec<String>, JsError> {
    let out = run_benchmark(model, per_class, seed).map_err(|e| JsError::new(&e))?;
    Ok(vec![out.summary, out.svg])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simulate_shapes_and_errors() {
        let s = simulate_event(0, 42, 0).unwrap();
        assert_eq!(s.len(), 6000);
        assert!(s.iter().all(|v| v.is_finite()));
        assert!(simulate_event(13, 42, 0).is_err());
    }

    #[test]
    fn energies_are_shares() {
        let e = band_energies(6, 1, 2).unwrap();
        assert_eq!(e.len(), 36);
        for ch in e.chunks(6) {
            let s: f64 = ch.iter().sum();
            assert!((s - 1.0).abs() < 1e-9, "{s}");
        }
    }

    #[test]
    fn benchmark_returns_heatmap() {
        let out = run_benchmark("knn", 2, 5).unwrap();
        assert!((0.0..=1.0).contains(&out.accuracy));
        assert_eq!(out.svg.matches("<rect").count(), 169);
        assert!(out.summary.starts_with("knn"));
        assert!(run_benchmark("perceptron", 2, 5).is_err());
        assert!(run_benchmark("knn", 0, 5).is_err());
    }

    #[test]
    fn name_lists() {
        assert_eq!(class_names().len(), 13);
        assert_eq!(model_names().len(), 9);
    }
}

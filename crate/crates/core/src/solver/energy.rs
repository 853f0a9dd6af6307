use crate::fields::WaveField;

/// `(max − min)/mean` of the per-step energy over rows with time in
/// `[t0, t1]`; 0 for an identically zero energy.
pub fn energy_drift(field: &WaveField, window: (f64, f64)) -> f64 {
    let e: Vec<f64> = field
        .diagnostics
        .iter()
        .filter(|r| r.time >= window.0 && r.time <= window.1)
        .map(|r| r.energy)
        .collect();
    if e.is_empty() {
        return 0.0;
    }
    let max = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = e.iter().cloned().fold(f64::INFINITY, f64::min);
    let mean = e.iter().sum::<f64>() / e.len() as f64;
    if mean == 0.0 {
        0.0
    } else {
        (max - min) / mean.abs()
    }
}

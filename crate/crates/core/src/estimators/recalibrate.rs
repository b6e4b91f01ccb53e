use super::EstimatorError;
use crate::label::LabelMap;

/// Rescales probabilities learned at `sample` class rates to a population
/// with `population` class rates: `p'_c ∝ (population_c / sample_c) · p_c`.
pub fn recalibrate(
    raw: &LabelMap<f64>,
    sample: &LabelMap<f64>,
    population: &LabelMap<f64>,
) -> Result<LabelMap<f64>, EstimatorError> {
    let mut ratios = Vec::with_capacity(raw.len());
    for label in raw.labels() {
        let s = sample.get(label).copied().unwrap_or(0.0);
        let p = population.get(label).copied().unwrap_or(0.0);
        if s <= 0.0 || p <= 0.0 {
            return Err(EstimatorError::ZeroRate(label.key()));
        }
        ratios.push(p / s);
    }
    let probs: Vec<f64> = raw.values().copied().collect();
    let adjusted = recalibrate_slice(&probs, &ratios);
    let mut out = LabelMap::new();
    for (label, p) in raw.labels().zip(adjusted) {
        out.insert(label.clone(), p);
    }
    Ok(out)
}

/// Index-aligned form; `ratios[c]` is `population_c / sample_c`.
pub(crate) fn recalibrate_slice(probs: &[f64], ratios: &[f64]) -> Vec<f64> {
    let scaled: Vec<f64> = probs.iter().zip(ratios).map(|(p, r)| p * r).collect();
    let total: f64 = scaled.iter().sum();
    if total == 1.0 {
        scaled
    } else {
        scaled.into_iter().map(|p| p / total).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label::ClassLabel;

    fn tf(t: f64, f: f64) -> LabelMap<f64> {
        [(ClassLabel::Bool(true), t), (ClassLabel::Bool(false), f)].into_iter().collect()
    }

    #[test]
    fn balanced_sample_to_skewed_population() {
        let out = recalibrate(&tf(0.5, 0.5), &tf(0.5, 0.5), &tf(0.1, 0.9)).unwrap();
        assert!((out.get(&true.into()).unwrap() - 0.1).abs() < 1e-12);
        assert!((out.get(&false.into()).unwrap() - 0.9).abs() < 1e-12);
    }

    #[test]
    fn identity_when_rates_match() {
        let raw = tf(0.3, 0.7);
        let out = recalibrate(&raw, &tf(0.2, 0.8), &tf(0.2, 0.8)).unwrap();
        for (a, b) in out.values().zip(raw.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn certain_predictions_stay_certain() {
        let out = recalibrate(&tf(1.0, 0.0), &tf(0.5, 0.5), &tf(0.034, 0.966)).unwrap();
        assert_eq!(out, tf(1.0, 0.0));
    }

    #[test]
    fn zero_rates_are_rejected() {
        assert!(matches!(
            recalibrate(&tf(0.5, 0.5), &tf(0.0, 1.0), &tf(0.5, 0.5)),
            Err(EstimatorError::ZeroRate(l)) if l == "true"
        ));
    }
}

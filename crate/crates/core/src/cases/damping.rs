//! Exponential decay fits for oscillation amplitudes.

use crate::error::{Result, SemError};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DampingFit {
    /// Slope of ln(a) against t.
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Least-squares line through (t, ln a). Needs at least 4 samples, all
/// amplitudes positive.
pub fn fit_damping(samples: &[(f64, f64)]) -> Result<DampingFit> {
    if samples.len() < 4 {
        return Err(SemError::Config(format!("damping fit needs at least 4 samples, got {}", samples.len())));
    }
    if let Some(&(t, a)) = samples.iter().find(|s| !(s.1 > 0.0)) {
        return Err(SemError::Config(format!("non-positive amplitude {a} at t = {t}")));
    }
    let n = samples.len() as f64;
    let (st, sy) = samples.iter().fold((0.0, 0.0), |(st, sy), &(t, a)| (st + t, sy + a.ln()));
    let (mt, my) = (st / n, sy / n);
    let (mut stt, mut sty, mut syy) = (0.0, 0.0, 0.0);
    for &(t, a) in samples {
        let (dt, dy) = (t - mt, a.ln() - my);
        stt += dt * dt;
        sty += dt * dy;
        syy += dy * dy;
    }
    let slope = sty / stt;
    let r2 = if syy > 0.0 { sty * sty / (stt * syy) } else { 1.0 };
    Ok(DampingFit { slope, intercept: my - slope * mt, r2 })
}

/// Local maxima of |a| with parabolic refinement, as (t, |a|). The first
/// sample counts as a peak when the signal starts by decreasing.
pub fn peak_envelope(series: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let abs: Vec<f64> = series.iter().map(|s| s.1.abs()).collect();
    let mut peaks = Vec::new();
    if abs.len() >= 2 && abs[0] > abs[1] {
        peaks.push((series[0].0, abs[0]));
    }
    for i in 1..abs.len().saturating_sub(1) {
        let (a, b, c) = (abs[i - 1], abs[i], abs[i + 1]);
        if b > a && b >= c {
            let h = series[i + 1].0 - series[i].0;
            let denom = a - 2.0 * b + c;
            let (off, val) = if denom < 0.0 {
                let s = 0.5 * (a - c) / denom;
                (s * h, b - 0.25 * (a - c) * s)
            } else {
                (0.0, b)
            };
            peaks.push((series[i].0 + off, val));
        }
    }
    peaks
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_exponential() {
        let s: Vec<(f64, f64)> = (0..10).map(|i| (i as f64 * 0.3, (-0.5 * i as f64 * 0.3).exp())).collect();
        let f = fit_damping(&s).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-12 && (f.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn envelope_of_damped_cosine() {
        let g = 1.397;
        let s: Vec<(f64, f64)> = (0..=2500).map(|i| i as f64 * 0.002).map(|t| (t, (-g * t).exp() * (2.0 * std::f64::consts::PI * t).cos())).collect();
        let p = peak_envelope(&s);
        assert!(p.len() >= 9);
        let f = fit_damping(&p).unwrap();
        assert!((-f.slope - g).abs() / g < 0.01, "{f:?}");
    }

    #[test]
    fn rejects_bad_input() {
        assert!(fit_damping(&[(0.0, 1.0), (1.0, 0.5)]).is_err());
        assert!(fit_damping(&[(0.0, 1.0), (1.0, 0.5), (2.0, 0.0), (3.0, 0.1)]).is_err());
    }
}

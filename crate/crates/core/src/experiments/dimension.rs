//! Box-counting local dimension of an empirical measure on `[0, 1)^d` with
//! periodic sup-norm distance.

use super::config::Thresholds;
use crate::error::{Error, Result};
use rayon::prelude::*;
use serde::Serialize;

pub const MIN_SAMPLES: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Alternative {
    FinitelySupported,
    Curve,
    Volume,
    /// Outside every band; carries the nearest one.
    Unclassified(NearestAlternative),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NearestAlternative {
    FinitelySupported,
    Curve,
    Volume,
}

#[derive(Debug, Clone, Serialize)]
pub struct DimensionEstimate {
    /// Slope of `log mean N(B(x, r))` against `log r`.
    pub d_hat: f64,
    /// Half-width of a two-sigma band from the spread of per-point slopes.
    pub band: f64,
    pub per_point: Vec<f64>,
    pub per_point_median: f64,
    pub scales: Vec<f64>,
    pub mean_counts: Vec<f64>,
    pub samples: usize,
    pub classification: Alternative,
    pub label: &'static str,
}

pub fn periodic_sup(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = (x - y).abs().rem_euclid(1.0);
            d.min(1.0 - d)
        })
        .fold(0.0, f64::max)
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

pub fn classify(d: f64, t: &Thresholds) -> Alternative {
    if d < t.atom {
        Alternative::FinitelySupported
    } else if (t.curve[0]..=t.curve[1]).contains(&d) {
        Alternative::Curve
    } else if (t.volume[0]..=t.volume[1]).contains(&d) {
        Alternative::Volume
    } else {
        let nearest = [(0.0, NearestAlternative::FinitelySupported), (1.0, NearestAlternative::Curve), (4.0, NearestAlternative::Volume)]
            .into_iter()
            .min_by(|a, b| (a.0 - d).abs().total_cmp(&(b.0 - d).abs()))
            .map(|p| p.1)
            .unwrap();
        Alternative::Unclassified(nearest)
    }
}

/// `scales` must contain at least four values, each at most half the
/// previous one after sorting in decreasing order.
pub fn local_dimension_estimate(samples: &[Vec<f64>], scales: &[f64], base_points: usize, thresholds: &Thresholds) -> Result<DimensionEstimate> {
    if samples.len() < MIN_SAMPLES {
        return Err(Error::Insufficient(format!("{} samples, need {MIN_SAMPLES}", samples.len())));
    }
    let mut scales = scales.to_vec();
    scales.sort_by(|a, b| b.total_cmp(a));
    let separated = scales.windows(2).all(|w| w[1] <= 0.5 * w[0] * (1.0 + 1e-12));
    if scales.len() < 4 || !separated || scales[0] >= 0.5 || scales[scales.len() - 1] <= 0.0 {
        return Err(Error::Insufficient("insufficient scale separation: need >= 4 dyadic scales in (0, 1/2)".into()));
    }
    let m = base_points.clamp(1, samples.len());
    let stride = samples.len() / m;
    let counts: Vec<Vec<u64>> = (0..m)
        .into_par_iter()
        .map(|b| {
            let x = &samples[b * stride];
            let mut c = vec![0u64; scales.len()];
            for (j, y) in samples.iter().enumerate() {
                if j == b * stride {
                    continue;
                }
                let d = periodic_sup(x, y);
                for (s, r) in c.iter_mut().zip(&scales) {
                    if d < *r {
                        *s += 1;
                    } else {
                        break;
                    }
                }
            }
            c
        })
        .collect();
    let log_r: Vec<f64> = scales.iter().map(|r| r.ln()).collect();
    let mean_counts: Vec<f64> = (0..scales.len()).map(|s| counts.iter().map(|c| c[s] as f64).sum::<f64>() / m as f64).collect();
    if mean_counts.iter().any(|&c| c <= 0.0) {
        return Err(Error::Insufficient("no neighbours at the smallest scale".into()));
    }
    let d_hat = slope(&log_r, &mean_counts.iter().map(|c| c.ln()).collect::<Vec<_>>());
    let per_point: Vec<f64> = counts
        .iter()
        .filter_map(|c| {
            let idx: Vec<usize> = (0..scales.len()).filter(|&s| c[s] > 0).collect();
            (idx.len() >= 2).then(|| {
                let xs: Vec<f64> = idx.iter().map(|&s| log_r[s]).collect();
                let ys: Vec<f64> = idx.iter().map(|&s| (c[s] as f64).ln()).collect();
                slope(&xs, &ys)
            })
        })
        .collect();
    let k = per_point.len().max(1) as f64;
    let mean = per_point.iter().sum::<f64>() / k;
    let sd = (per_point.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (k - 1.0).max(1.0)).sqrt();
    let mut sorted = per_point.clone();
    sorted.sort_by(f64::total_cmp);
    let per_point_median = sorted.get(sorted.len() / 2).copied().unwrap_or(f64::NAN);
    Ok(DimensionEstimate {
        d_hat,
        band: 2.0 * sd / k.sqrt(),
        per_point,
        per_point_median,
        scales,
        mean_counts,
        samples: samples.len(),
        classification: classify(d_hat, thresholds),
        label: "heuristic",
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_square_has_dimension_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s: Vec<Vec<f64>> = (0..MIN_SAMPLES).map(|_| vec![rng.gen(), rng.gen()]).collect();
        let d = local_dimension_estimate(&s, &[0.1, 0.05, 0.025, 0.0125], 200, &Thresholds::default()).unwrap();
        assert!((d.d_hat - 2.0).abs() < 0.05, "{}", d.d_hat);
        assert!(matches!(d.classification, Alternative::Unclassified(_)));
    }

    #[test]
    fn rejects_bad_inputs() {
        let s: Vec<Vec<f64>> = vec![vec![0.0]; 10];
        assert!(local_dimension_estimate(&s, &[0.1, 0.05, 0.025, 0.0125], 10, &Thresholds::default()).is_err());
        let s: Vec<Vec<f64>> = (0..MIN_SAMPLES).map(|i| vec![i as f64 / MIN_SAMPLES as f64]).collect();
        assert!(local_dimension_estimate(&s, &[0.1, 0.05, 0.025], 10, &Thresholds::default()).is_err());
        assert!(local_dimension_estimate(&s, &[0.1, 0.07, 0.05, 0.03], 10, &Thresholds::default()).is_err());
    }

    #[test]
    fn periodic_distance_wraps() {
        assert!((periodic_sup(&[0.05, 0.5], &[0.95, 0.5]) - 0.1).abs() < 1e-12);
    }
}

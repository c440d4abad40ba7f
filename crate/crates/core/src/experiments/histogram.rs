//! Empirical stationary measure on a coordinate pair, with a stationarity
//! check against its own one-step pushforward.

use super::{walk_samples, Sampleable};
use crate::error::{Error, Result};
use crate::walk::FiniteMeasure;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct MeasureHistogram {
    pub grid: usize,
    pub pair: [usize; 2],
    /// Row-major `grid x grid` counts.
    pub counts: Vec<u64>,
    pub total: u64,
    /// `sum_i w_i (f_i)_* h`, same layout, normalized to mass 1.
    pub pushed: Vec<f64>,
    /// Total variation between `h / total` and `pushed`.
    pub stationarity_tv: f64,
    pub tv_threshold: f64,
    pub stationary: bool,
    /// Largest `|z|` of a cell count against the uniform expectation.
    pub max_uniform_z: f64,
    pub frac_beyond_3sigma: f64,
    pub escapes: usize,
}

fn cell(grid: usize, c: &[f64], pair: [usize; 2]) -> usize {
    let b = |x: f64| ((x * grid as f64).floor().max(0.0) as usize).min(grid - 1);
    b(c[pair[0]]) * grid + b(c[pair[1]])
}

pub fn run_measure_histogram<M: Sampleable>(
    model: &M,
    measure: &FiniteMeasure,
    seed: u64,
    walkers: usize,
    burn_in: usize,
    per_walker: usize,
    grid: usize,
    pair: [usize; 2],
) -> Result<MeasureHistogram> {
    if grid == 0 || per_walker == 0 || walkers == 0 {
        return Err(Error::InvalidArgument("empty histogram".into()));
    }
    let (cells, escapes) = walk_samples(model, measure, seed, walkers, burn_in, per_walker, |x| {
        let own = cell(grid, &model.coordinates(x), pair);
        let pushed: Vec<Option<usize>> = measure
            .atoms()
            .iter()
            .map(|&id| model.apply(id, x).ok().map(|y| cell(grid, &model.coordinates(&y), pair)))
            .collect();
        (own, pushed)
    })?;
    let k = grid * grid;
    let mut counts = vec![0u64; k];
    let mut pushed = vec![0.0; k];
    let mut pushed_mass = 0.0;
    for (own, images) in &cells {
        counts[*own] += 1;
        for (img, &w) in images.iter().zip(measure.weights()) {
            if let Some(c) = img {
                pushed[*c] += w;
                pushed_mass += w;
            }
        }
    }
    let total = cells.len() as u64;
    let n = total as f64;
    for p in pushed.iter_mut() {
        *p /= pushed_mass;
    }
    let tv = 0.5 * counts.iter().zip(&pushed).map(|(&c, &p)| (c as f64 / n - p).abs()).sum::<f64>();
    // three times the summed per-cell standard deviation of a difference of
    // two empirical frequencies
    let tv_threshold = 3.0 * 0.5 * counts.iter().map(|&c| (2.0 * (c as f64 / n).max(1.0 / n) / n).sqrt()).sum::<f64>();
    let expected = n / k as f64;
    let sd = (expected * (1.0 - 1.0 / k as f64)).sqrt();
    let zs: Vec<f64> = counts.iter().map(|&c| (c as f64 - expected) / sd).collect();
    let max_uniform_z = zs.iter().fold(0.0f64, |m, z| m.max(z.abs()));
    let frac_beyond_3sigma = zs.iter().filter(|z| z.abs() > 3.0).count() as f64 / k as f64;
    Ok(MeasureHistogram {
        grid,
        pair,
        counts,
        total,
        pushed,
        stationarity_tv: tv,
        tv_threshold,
        stationary: tv <= tv_threshold,
        max_uniform_z,
        frac_beyond_3sigma,
        escapes,
    })
}

impl MeasureHistogram {
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["i", "j", "count", "pushed"]).map_err(|e| Error::Io(e.to_string()))?;
        for i in 0..self.grid {
            for j in 0..self.grid {
                let c = i * self.grid + j;
                wtr.write_record([i.to_string(), j.to_string(), self.counts[c].to_string(), format!("{:.12e}", self.pushed[c])])
                    .map_err(|e| Error::Io(e.to_string()))?;
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

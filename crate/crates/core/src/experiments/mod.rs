//! Reproducible experiments: configuration, empirical stationary measures,
//! local dimension estimates, validation suites and report bundles.

pub mod config;
pub mod dimension;
pub mod histogram;
pub mod report;
pub mod suites;

pub use config::{ExperimentConfig, LabModel, LoadedConfig, Stage};
pub use dimension::{local_dimension_estimate, Alternative, DimensionEstimate};
pub use histogram::{run_measure_histogram, MeasureHistogram};
pub use report::{run_full_report, CheckRecord, ReportBundle};

use crate::error::Result;
use crate::model::torus::TorusPoint;
use crate::model::{SurfaceModel, TorusModel, WehlerModel, WehlerPoint};
use crate::walk::{derive_seed, FiniteMeasure, WalkWord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Models with a natural way to draw starting points. Coordinates of every
/// point lie in `[0, 1)` and are periodic.
pub trait Sampleable: SurfaceModel {
    fn random_point(&self, rng: &mut ChaCha8Rng) -> Result<Self::Point>;
}

impl Sampleable for TorusModel {
    fn random_point(&self, rng: &mut ChaCha8Rng) -> Result<TorusPoint> {
        Ok([rng.gen(), rng.gen(), rng.gen(), rng.gen()])
    }
}

impl Sampleable for WehlerModel {
    fn random_point(&self, rng: &mut ChaCha8Rng) -> Result<WehlerPoint> {
        self.random_real_point(rng)
    }
}

const START_STREAM: u64 = 0x5157_4152_5453;

/// Word and starting point of walker `i`.
pub fn walker<M: Sampleable>(model: &M, measure: &FiniteMeasure, seed: u64, i: u64) -> Result<(WalkWord, M::Point)> {
    let w = WalkWord::new(derive_seed(seed, i), measure);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed ^ START_STREAM, i));
    Ok((w, model.random_point(&mut rng)?))
}

/// Runs `walkers` independent walkers for `burn_in + per_walker` steps and
/// applies `visit` to every post-burn-in point. Results are in walker order.
/// A failed step restarts the walker from a fresh point and is counted.
pub fn walk_samples<M, T, F>(
    model: &M,
    measure: &FiniteMeasure,
    seed: u64,
    walkers: usize,
    burn_in: usize,
    per_walker: usize,
    visit: F,
) -> Result<(Vec<T>, usize)>
where
    M: Sampleable,
    T: Send,
    F: Fn(&M::Point) -> T + Sync,
{
    let per: Vec<(Vec<T>, usize)> = (0..walkers as u64)
        .into_par_iter()
        .map(|i| {
            let (w, mut x) = walker(model, measure, seed, i)?;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed ^ START_STREAM ^ 1, i));
            let mut out = Vec::with_capacity(per_walker);
            let mut escapes = 0;
            let mut k = 0i64;
            while out.len() < per_walker {
                if k as usize >= burn_in {
                    out.push(visit(&x));
                }
                match model.apply(w.auto(k), &x) {
                    Ok(y) => x = y,
                    Err(_) => {
                        escapes += 1;
                        if escapes > per_walker + burn_in {
                            return Err(crate::Error::ChartEscape(format!("walker {i} keeps escaping")));
                        }
                        x = model.random_point(&mut rng)?;
                    }
                }
                k += 1;
            }
            Ok((out, escapes))
        })
        .collect::<Result<_>>()?;
    let escapes = per.iter().map(|p| p.1).sum();
    Ok((per.into_iter().flat_map(|p| p.0).collect(), escapes))
}

/// The cohomology action of all automorphisms of a model.
pub fn lattice_action<M: SurfaceModel>(model: &M) -> Result<crate::cohomology::LatticeAction> {
    let reps = (0..model.automorphism_count())
        .map(|id| model.cohomology(id).ok_or_else(|| crate::Error::InvalidArgument(format!("no cohomology action for {}", model.automorphism_name(id)))))
        .collect::<Result<Vec<_>>>()?;
    let kappa = model.kahler_class().ok_or_else(|| crate::Error::InvalidArgument("model has no reference class".into()))?;
    let gram = reps[0].gram.clone();
    crate::cohomology::LatticeAction::new(gram, reps.into_iter().map(|r| r.matrix).collect(), kappa)
}

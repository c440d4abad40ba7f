//! Stage pipeline behind `report`: every stage appends check records and
//! artifacts; a failing stage is recorded and the rest still run.

use super::config::{ExperimentConfig, LabModel, LoadedConfig, Stage};
use super::config::sha256_hex;
use super::dimension::local_dimension_estimate;
use super::histogram::run_measure_histogram;
use super::suites::homomorphism_errors;
use super::{walk_samples, walker, Sampleable};
use crate::cocycle::{default_eps0, default_transient, equivariance_residual, lyapunov_exponents_along, oseledets_splitting, sum_exponent_stderr, LyapunovEstimate};
use crate::cohomology::{classify_isometry, spectral_radius_is};
use crate::error::{Error, Result};
use crate::exact::IntMatrix;
use crate::flow::{birkhoff_diagnostic, birkhoff_violations, roof, tc_normalization, write_birkhoff_csv, CoordBox};
use crate::orbit::{ChartedOrbit, OrbitSpec};
use crate::walk::{derive_seed, FiniteMeasure, WalkWord};
use rayon::prelude::*;
use serde::Serialize;
use std::path::Path;

/// One numeric claim with its tolerance and seed.
#[derive(Debug, Clone, Serialize)]
pub struct CheckRecord {
    pub stage: String,
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub seed: u64,
    /// `None` for informational values.
    pub pass: Option<bool>,
    pub acceptance: bool,
    pub detail: String,
}

impl CheckRecord {
    pub fn check(stage: &str, name: &str, value: f64, tolerance: f64, seed: u64, pass: bool, acceptance: bool) -> Self {
        CheckRecord {
            stage: stage.into(),
            name: name.into(),
            value,
            tolerance,
            seed,
            pass: Some(pass),
            acceptance,
            detail: String::new(),
        }
    }

    pub fn info(stage: &str, name: &str, value: f64, seed: u64) -> Self {
        CheckRecord { pass: None, ..Self::check(stage, name, value, 0.0, seed, true, false) }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }

    pub fn failed(&self) -> bool {
        self.acceptance && self.pass == Some(false)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub name: String,
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub stages: Vec<Stage>,
    pub jet_chain_order: String,
    pub c_tau: Option<f64>,
    pub pilot_samples: Option<usize>,
    /// `(file, sha256)` of every other emitted file.
    pub files: Vec<(String, String)>,
}

#[derive(Debug, Clone)]
pub struct ReportBundle {
    pub manifest: Manifest,
    pub records: Vec<CheckRecord>,
    /// Emitted files other than the manifest, in emission order.
    pub files: Vec<(String, Vec<u8>)>,
}

impl ReportBundle {
    pub fn failed(&self) -> bool {
        self.records.iter().any(|r| r.failed())
    }

    pub fn summary(&self) -> String {
        let mut s = format!("run {} (seed {}, config {})\n", self.manifest.name, self.manifest.seed, &self.manifest.config_hash[..12]);
        for r in &self.records {
            let status = match r.pass {
                Some(true) => "PASS",
                Some(false) => "FAIL",
                None => "INFO",
            };
            s += &format!("{status} {:<11} {:<28} {:>14.6e} (tol {:.1e}, seed {}) {}\n", r.stage, r.name, r.value, r.tolerance, r.seed, r.detail);
        }
        s
    }

    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, bytes) in &self.files {
            std::fs::write(dir.join(name), bytes)?;
        }
        let manifest = serde_json::to_vec_pretty(&self.manifest).map_err(|e| Error::Io(e.to_string()))?;
        std::fs::write(dir.join("manifest.json"), manifest)?;
        Ok(())
    }
}

struct Ctx<'a, M: Sampleable> {
    model: &'a M,
    measure: FiniteMeasure,
    cfg: &'a ExperimentConfig,
    seed: u64,
    records: Vec<CheckRecord>,
    files: Vec<(String, Vec<u8>)>,
    estimate: Option<LyapunovEstimate>,
    c_tau: Option<f64>,
}

impl<M: Sampleable> Ctx<'_, M> {
    fn start(&self) -> Result<(WalkWord, M::Point)> {
        let (w, x) = walker(self.model, &self.measure, self.seed, 0)?;
        let burn = self.cfg.run.burn_in as i64;
        let x = crate::walk::compose(self.model, &w, burn, &x)?;
        Ok((w.shift(burn), x))
    }

    fn estimate(&mut self) -> Result<LyapunovEstimate> {
        if let Some(e) = &self.estimate {
            return Ok(e.clone());
        }
        let (w, x) = self.start()?;
        let n = self.cfg.run.n_steps;
        let e = lyapunov_exponents_along(self.model, &w, &x, n, default_transient(n))?;
        self.estimate = Some(e.clone());
        Ok(e)
    }

    fn orbit_spec(&mut self, radius: usize) -> Result<OrbitSpec> {
        let e = self.estimate()?;
        let eps0 = self.cfg.orbit.eps0.unwrap_or_else(|| default_eps0(e.lambda_plus, e.lambda_minus));
        Ok(OrbitSpec { radius, pad: self.cfg.orbit.pad, lambda_plus: e.lambda_plus, lambda_minus: e.lambda_minus, eps0 })
    }

    fn push(&mut self, r: CheckRecord) {
        self.records.push(r);
    }

    fn lyapunov(&mut self) -> Result<()> {
        let e = self.estimate()?;
        let (w, x) = self.start()?;
        let seed = self.seed;
        let (_, se) = sum_exponent_stderr(self.model, &w, &x, e.n, e.transient)?;
        let sum: f64 = e.exponents.iter().sum();
        // each complex exponent appears twice among the four real ones
        let tol = (6.0 * se).max(1e-9);
        self.push(CheckRecord::info("lyapunov", "lambda-plus", e.lambda_plus, seed).with_detail(format!("stderr {:.2e}, n {}", e.stderr[0], e.n)));
        self.push(CheckRecord::info("lyapunov", "lambda-minus", e.lambda_minus, seed));
        self.push(CheckRecord::check("lyapunov", "exponent-sum", sum, tol, seed, sum.abs() <= tol, true));
        self.push(CheckRecord::check("lyapunov", "converged", e.drift, 0.0, seed, e.converged, false));
        if let Some(l) = self.cfg.expect.lambda_plus {
            let tol = self.cfg.expect.lambda_plus_tol.unwrap_or(1e-3);
            self.push(CheckRecord::check("lyapunov", "lambda-plus-expected", e.lambda_plus - l, tol, seed, (e.lambda_plus - l).abs() <= tol, true));
        }
        Ok(())
    }

    fn oseledets(&mut self) -> Result<()> {
        let (w, x) = self.start()?;
        let o = &self.cfg.orbit;
        let frame = oseledets_splitting(self.model, &w, &x, o.n_fwd, o.n_bwd)?;
        let res = equivariance_residual(self.model, &frame, o.n_bwd)?;
        let seed = self.seed;
        self.push(CheckRecord::check("oseledets", "equivariance", res, 1e-6, seed, res < 1e-6, true));
        self.push(CheckRecord::info("oseledets", "angle", frame.angle, seed));
        Ok(())
    }

    fn roof(&mut self) -> Result<()> {
        let (w, x) = self.start()?;
        let spec = self.orbit_spec(self.cfg.orbit.radius)?;
        let orbit = ChartedOrbit::build(self.model, &w, &x, spec)?;
        let n = spec.radius as i64;
        let samples = self.cfg.orbit.samples.max(1) as i64;
        let mut cob = 0.0f64;
        let mut outside = 0usize;
        let mut worst = 0.0f64;
        for i in 0..samples {
            let k = if samples == 1 { 0 } else { -n + (2 * n - 1) * i / (samples - 1) };
            let r = roof(&orbit, k)?;
            cob = cob.max(r.coboundary_residual());
            let dev = (r.tau - spec.lambda_plus).abs();
            worst = worst.max(dev);
            if dev > spec.eps0 + 1e-12 {
                outside += 1;
            }
        }
        let seed = self.seed;
        self.push(CheckRecord::check("roof", "coboundary", cob, 1e-10, seed, cob < 1e-10, true));
        self.push(
            CheckRecord::check("roof", "tau-bounds", worst, spec.eps0, seed, outside == 0, true)
                .with_detail(format!("{outside} of {samples} outside [lambda - eps, lambda + eps]")),
        );
        self.push(CheckRecord::info("roof", "orbit-convergence", orbit.convergence, seed));
        Ok(())
    }

    fn pilot(&mut self) -> Result<()> {
        let total = self.cfg.flow.pilot_samples.max(1);
        let seg = 5000usize.min(total.div_ceil(2)).max(1);
        let segments = total.div_ceil(2 * seg);
        let spec = self.orbit_spec(seg)?;
        let (model, measure, seed, burn) = (self.model, &self.measure, self.seed, self.cfg.run.burn_in as i64);
        let taus: Vec<Vec<f64>> = (0..segments as u64)
            .into_par_iter()
            .map(|i| {
                let (w, x) = walker(model, measure, derive_seed(seed, 0x7175), i)?;
                let x = crate::walk::compose(model, &w, burn, &x)?;
                let o = ChartedOrbit::build(model, &w.shift(burn), &x, spec)?;
                (-(seg as i64)..seg as i64).map(|k| o.tau(k)).collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        let flat: Vec<f64> = taus.into_iter().flatten().take(total).collect();
        let c = tc_normalization(&flat)?;
        self.c_tau = Some(c);
        self.push(CheckRecord::info("pilot", "c-tau", c, seed).with_detail(format!("{} roof samples", flat.len())));
        Ok(())
    }

    fn birkhoff(&mut self) -> Result<()> {
        let f = &self.cfg.flow;
        let starts: Vec<(u64, M::Point, WalkWord)> = (0..self.cfg.run.walkers as u64)
            .map(|i| walker(self.model, &self.measure, self.seed, i).map(|(w, x)| (i, x, w)))
            .collect::<Result<_>>()?;
        let k_box = CoordBox { lo: f.box_lo.clone(), hi: f.box_hi.clone() };
        let rows = birkhoff_diagnostic(self.model, &starts, &k_box, &f.horizons)?;
        let frac = birkhoff_violations(&rows, f.eps, f.s);
        let mut buf = Vec::new();
        write_birkhoff_csv(&rows, &mut buf)?;
        self.files.push(("birkhoff.csv".into(), buf));
        let (eps, s, seed) = (f.eps, f.s, self.seed);
        self.push(CheckRecord::info("birkhoff", "violation-fraction", frac, seed).with_detail(format!("eps {eps}, S {s}")));
        Ok(())
    }

    fn histogram(&mut self) -> Result<()> {
        let (r, h) = (&self.cfg.run, &self.cfg.histogram);
        let hist = run_measure_histogram(self.model, &self.measure, self.seed, r.walkers, r.burn_in, h.samples_per_walker, h.grid, h.pair)?;
        let mut buf = Vec::new();
        hist.write_csv(&mut buf)?;
        self.files.push(("histogram.csv".into(), buf));
        let seed = self.seed;
        let expect_uniform = h.expect_uniform;
        self.push(CheckRecord::check("histogram", "stationarity-tv", hist.stationarity_tv, hist.tv_threshold, seed, hist.stationary, true));
        let detail = format!("max |z| {:.3}", hist.max_uniform_z);
        self.push(if expect_uniform {
            CheckRecord::check("histogram", "uniform-3sigma", hist.frac_beyond_3sigma, 0.01, seed, hist.frac_beyond_3sigma <= 0.01, true)
        } else {
            CheckRecord::info("histogram", "uniform-3sigma", hist.frac_beyond_3sigma, seed)
        }
        .with_detail(detail));
        self.push(CheckRecord::info("histogram", "escapes", hist.escapes as f64, seed));
        Ok(())
    }

    fn dimension(&mut self) -> Result<()> {
        let (r, d) = (&self.cfg.run, &self.cfg.dimension);
        let per = d.samples.div_ceil(r.walkers);
        let model = self.model;
        let (samples, escapes) = walk_samples(model, &self.measure, self.seed, r.walkers, r.burn_in, per, |x| model.coordinates(x))?;
        let est = local_dimension_estimate(&samples, &d.scales, d.base_points, &d.thresholds)?;
        let json = serde_json::to_vec_pretty(&est).map_err(|e| Error::Io(e.to_string()))?;
        self.files.push(("dimension.json".into(), json));
        let seed = self.seed;
        self.push(
            CheckRecord::info("dimension", "d-hat", est.d_hat, seed)
                .with_detail(format!("heuristic: {:?}, band +-{:.3}, escapes {escapes}", est.classification, est.band)),
        );
        Ok(())
    }

    fn cohomology(&mut self) -> Result<()> {
        let seed = self.seed;
        let mut product: Option<IntMatrix> = None;
        let mut gram = None;
        for id in self.measure.atoms().to_vec() {
            let rep = self
                .model
                .cohomology(id)
                .ok_or_else(|| Error::InvalidArgument(format!("no cohomology action for {}", self.model.automorphism_name(id))))?;
            let class = classify_isometry(&rep.matrix, &rep.gram)?;
            self.push(CheckRecord::check("cohomology", &format!("isometry-{}", self.model.automorphism_name(id)), 0.0, 0.0, seed, true, true).with_detail(format!("{class:?}")));
            product = Some(match product {
                None => rep.matrix.clone(),
                Some(p) => p.mul(&rep.matrix),
            });
            gram = Some(rep.gram);
        }
        let (p, g) = (product.expect("measure has atoms"), gram.expect("measure has atoms"));
        let class = classify_isometry(&p, &g)?;
        let rho = match &class {
            crate::cohomology::IsometryClass::Loxodromic { spectral_radius } => *spectral_radius,
            _ => 1.0,
        };
        self.push(CheckRecord::info("cohomology", "product-spectral-radius", rho, seed).with_detail(format!("{class:?}")));
        if let Some([a, b, d]) = self.cfg.expect.spectral_radius {
            let (exact, dominant) = spectral_radius_is(&p, a, b, d);
            let target = a as f64 + b as f64 * (d as f64).sqrt();
            self.push(
                CheckRecord::check("cohomology", "product-spectral-radius-expected", rho - target, 1e-9 * target, seed, exact && dominant && class.is_loxodromic(), true)
                    .with_detail(format!("{a} + {b} sqrt({d}): exact root {exact}, dominant {dominant}")),
            );
        }
        Ok(())
    }
}

fn run_stages<M: Sampleable>(model: &M, loaded: &LoadedConfig) -> Result<ReportBundle> {
    let cfg = &loaded.config;
    let measure = cfg.measure.build(model)?;
    let mut ctx = Ctx { model, measure, cfg, seed: cfg.seed, records: vec![], files: vec![], estimate: None, c_tau: None };
    for &stage in &cfg.stages {
        let out = match stage {
            Stage::Lyapunov => ctx.lyapunov(),
            Stage::Oseledets => ctx.oseledets(),
            Stage::Roof => ctx.roof(),
            Stage::Pilot => ctx.pilot(),
            Stage::Birkhoff => ctx.birkhoff(),
            Stage::Histogram => ctx.histogram(),
            Stage::Dimension => ctx.dimension(),
            Stage::Cohomology => ctx.cohomology(),
        };
        if let Err(e) = out {
            let name = serde_json::to_value(stage).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
            ctx.records.push(CheckRecord::check(&name, "stage-error", f64::NAN, 0.0, cfg.seed, false, true).with_detail(e.to_string()));
        }
    }
    let order = homomorphism_errors(cfg.seed, 1).map(|(_, _, o)| format!("{o:?}")).unwrap_or_else(|e| format!("unlocked: {e}"));
    let mut files = ctx.files;
    let mut jsonl = Vec::new();
    for r in &ctx.records {
        serde_json::to_writer(&mut jsonl, r).map_err(|e| Error::Io(e.to_string()))?;
        jsonl.push(b'\n');
    }
    files.push(("results.jsonl".into(), jsonl));
    let mut bundle = ReportBundle {
        manifest: Manifest {
            name: cfg.name.clone(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: loaded.hash.clone(),
            seed: cfg.seed,
            stages: cfg.stages.clone(),
            jet_chain_order: order,
            c_tau: ctx.c_tau,
            pilot_samples: ctx.c_tau.map(|_| cfg.flow.pilot_samples),
            files: vec![],
        },
        records: ctx.records,
        files,
    };
    let summary = bundle.summary();
    bundle.files.push(("summary.txt".into(), summary.into_bytes()));
    bundle.manifest.files = bundle.files.iter().map(|(n, b)| (n.clone(), sha256_hex(b))).collect();
    Ok(bundle)
}

/// Runs every configured stage and assembles the bundle (nothing is
/// written; see `ReportBundle::write_to`).
pub fn run_full_report(loaded: &LoadedConfig) -> Result<ReportBundle> {
    match loaded.config.model.build()? {
        LabModel::Torus(m) => run_stages(&m, loaded),
        LabModel::Wehler(m) => run_stages(&m, loaded),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EMPTY: &str = r#"
name = "empty"
seed = 0
[model]
kind = "torus"
generators = [{ name = "A", re = [[2, 1], [1, 1]] }]
[measure]
atoms = ["A"]
"#;

    #[test]
    fn empty_stage_list_gives_manifest_only() {
        let b = run_full_report(&ExperimentConfig::parse(EMPTY).unwrap()).unwrap();
        assert!(b.records.is_empty());
        assert!(!b.failed());
        assert_eq!(b.manifest.jet_chain_order, "Reversed");
    }

    #[test]
    fn torus_stages_pass_and_reproduce() {
        let text = EMPTY.replace(
            "seed = 0",
            "seed = 0\nstages = [\"lyapunov\", \"oseledets\", \"roof\", \"cohomology\", \"histogram\"]\n[run]\nn_steps = 10000\nwalkers = 4\nburn_in = 100\n[histogram]\ngrid = 4\nsamples_per_walker = 500\n[orbit]\nradius = 40\npad = 60\nsamples = 20\nn_fwd = 60\nn_bwd = 60\n[expect]\nlambda_plus = 0.9624236501192069\nlambda_plus_tol = 1e-6",
        );
        let loaded = ExperimentConfig::parse(&text).unwrap();
        let a = run_full_report(&loaded).unwrap();
        assert!(!a.failed(), "{}", a.summary());
        let b = run_full_report(&loaded).unwrap();
        assert_eq!(a.manifest.files, b.manifest.files);
    }
}

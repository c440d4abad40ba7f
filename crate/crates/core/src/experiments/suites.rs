//! Self-contained validation suites behind the `jets-test` and `flow-check`
//! subcommands.

use super::report::CheckRecord;
use crate::charts::chart_map;
use crate::error::Result;
use crate::flow::{elapsed, standard_flow, time_changed_flow, CellPosition, SuspensionPoint};
use crate::jets::{chain_errors, jet_from_map, lock_order, precomposition_block, second_derivative_bound, ChainOrder, JetPoly2};
use crate::linalg::Vec4;
use crate::model::SurfaceModel;
use crate::orbit::ChartedOrbit;
use crate::walk::WalkWord;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Coefficients of `v -> A v + Q(v, v) + b v_0^3 + c v_0 sin(v_1)`.
#[derive(Debug, Clone)]
pub struct NonlinearMap {
    a: Vec<Vec<f64>>,
    q: Vec<Vec<Vec<f64>>>,
    b: Vec<f64>,
    c: Vec<f64>,
}

impl NonlinearMap {
    pub fn random(rng: &mut ChaCha8Rng, n: usize) -> Self {
        let mut a: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect()).collect();
        for (i, row) in a.iter_mut().enumerate() {
            row[i] += 1.0;
        }
        let q = (0..n).map(|_| (0..n).map(|_| (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect()).collect()).collect();
        let b = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let c = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        NonlinearMap { a, q, b, c }
    }

    pub fn eval(&self, v: &[f64]) -> Vec<f64> {
        let n = v.len();
        (0..n)
            .map(|i| {
                let mut s = self.b[i] * v[0].powi(3) + self.c[i] * v[0] * v[1].sin();
                for j in 0..n {
                    s += self.a[i][j] * v[j];
                    for k in 0..n {
                        s += self.q[i][j][k] * v[j] * v[k];
                    }
                }
                s
            })
            .collect()
    }
}

/// The worked `{x, y, x^2, y^2, xy}` block of `(x, y) -> (2x, x^2 + y)`.
pub fn worked_block_error() -> Result<f64> {
    let f = JetPoly2::new(
        vec![vec![2.0, 0.0], vec![0.0, 1.0]],
        vec![vec![vec![0.0; 2]; 2], vec![vec![2.0, 0.0], vec![0.0, 0.0]]],
    )?;
    let expected = [
        [2.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0, 0.0],
        [0.0, 2.0, 4.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, 2.0],
    ];
    let b = precomposition_block(&f);
    let mut err = 0.0f64;
    for i in 0..5 {
        for j in 0..5 {
            err = err.max((b[i][j] - expected[i][j]).abs());
        }
    }
    Ok(err)
}

/// Largest entrywise homomorphism error over random chains of lengths 2..=6
/// in dimensions 2 and 4, and the ordering that was locked.
pub fn homomorphism_errors(seed: u64, chains_per_length: usize) -> Result<(f64, f64, ChainOrder)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut rev, mut fwd) = (0.0f64, 0.0f64);
    let mut order = None;
    for n in [2, 4] {
        for len in 2..=6 {
            for _ in 0..chains_per_length {
                let chain: Vec<JetPoly2<f64>> = (0..len)
                    .map(|_| {
                        let f = NonlinearMap::random(&mut rng, n);
                        jet_from_map(|v| f.eval(v), n)
                    })
                    .collect::<Result<_>>()?;
                let (r, f) = chain_errors(&chain)?;
                rev = rev.max(r);
                fwd = fwd.max(f);
                if order.is_none() {
                    order = lock_order(&chain, 1e-9).ok();
                }
            }
        }
    }
    Ok((rev, fwd, order.unwrap_or(ChainOrder::Reversed)))
}

pub fn jets_suite(seed: u64) -> Result<Vec<CheckRecord>> {
    let block = worked_block_error()?;
    let (rev, fwd, order) = homomorphism_errors(seed, 10)?;
    let maps: Vec<NonlinearMap> = {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        (0..5).map(|_| NonlinearMap::random(&mut rng, 2)).collect()
    };
    let closures: Vec<Box<dyn Fn(&[f64]) -> Vec<f64>>> = maps.iter().map(|m| Box::new(move |v: &[f64]| m.eval(v)) as Box<dyn Fn(&[f64]) -> Vec<f64>>).collect();
    let refs: Vec<&dyn Fn(&[f64]) -> Vec<f64>> = closures.iter().map(|b| b.as_ref()).collect();
    let bound = second_derivative_bound(&refs, 2, 5.0, 0.0)?;
    Ok(vec![
        CheckRecord::check("jets", "worked-block", block, 0.0, seed, block == 0.0, true),
        CheckRecord::check("jets", "homomorphism", rev, 1e-9, seed, rev < 1e-9 && order == ChainOrder::Reversed, true)
            .with_detail(format!("locked order {order:?}; other ordering error {fwd:.3e}")),
        CheckRecord::check("jets", "second-derivative-bound", bound.measured, bound.bound, seed, bound.measured <= bound.bound, true)
            .with_detail(format!("steps {}, C = {:.4}", bound.steps, bound.c)),
    ])
}

/// Jet of the chart-map chain `f~_{k+len-1} o ... o f~_k` along a charted
/// orbit, measured against `C^n`. Each map is recentred on its value at 0,
/// which is zero only up to rounding magnified by the chart norm.
pub fn chart_chain_bound<M: SurfaceModel>(model: &M, orbit: &ChartedOrbit<M::Point>, k: i64, len: usize) -> Result<(f64, f64)> {
    let origins = (0..len as i64).map(|i| chart_map(model, orbit, k + i, &Vec4::zeros())).collect::<Result<Vec<_>>>()?;
    let maps: Vec<Box<dyn Fn(&[f64]) -> Vec<f64> + '_>> = origins
        .iter()
        .enumerate()
        .map(|(i, o)| {
            Box::new(move |v: &[f64]| {
                let w = Vec4::from_column_slice(v);
                chart_map(model, orbit, k + i as i64, &w).map(|r| (r - o).as_slice().to_vec()).unwrap_or_else(|_| vec![f64::NAN; 4])
            }) as Box<dyn Fn(&[f64]) -> Vec<f64> + '_>
        })
        .collect();
    let refs: Vec<&dyn Fn(&[f64]) -> Vec<f64>> = maps.iter().map(|b| b.as_ref() as &dyn Fn(&[f64]) -> Vec<f64>).collect();
    let b = second_derivative_bound(&refs, 4, len as f64, 0.0)?;
    Ok((b.measured, b.bound))
}

#[derive(Debug, Clone, Default, serde::Serialize)]
pub struct FlowLawErrors {
    pub pairs: usize,
    pub std_symbol_mismatches: usize,
    pub std_continuous: f64,
    pub std_inverse: f64,
    pub tc_elapsed: f64,
    pub tc_group: f64,
    pub tc_inverse: f64,
}

/// Additivity and invertibility of the standard flow and of the flow under
/// the roof over `pairs` random `(z, t)` samples.
pub fn flow_laws<M: SurfaceModel>(model: &M, orbit: &ChartedOrbit<M::Point>, word: &WalkWord, seed: u64, pairs: usize) -> Result<FlowLawErrors> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut e = FlowLawErrors { pairs, ..Default::default() };
    let n = orbit.radius();
    let tau_min = (-n..n).map(|c| orbit.tau(c)).collect::<Result<Vec<_>>>()?.into_iter().fold(f64::INFINITY, f64::min);
    // keep every flowed position inside the window
    let reach = 0.2 * n as f64 * tau_min;
    for _ in 0..pairs {
        let k: f64 = rng.gen_range(0.0..1.0);
        let t1: f64 = rng.gen_range(-5.0..5.0);
        let t2: f64 = rng.gen_range(-5.0..5.0);
        let z = SuspensionPoint { x: orbit.point(0)?.clone(), word: word.clone(), k };
        let a = standard_flow(model, &standard_flow(model, &z, t1)?, t2)?;
        let b = standard_flow(model, &z, t1 + t2)?;
        if a.word.offset() == b.word.offset() {
            e.std_continuous = e.std_continuous.max((a.k - b.k).abs()).max(model.distance(&a.x, &b.x));
        } else if (a.word.offset() - b.word.offset()).abs() != 1 || (a.k - b.k).abs() < 1.0 - 1e-9 {
            e.std_symbol_mismatches += 1;
        }
        let back = standard_flow(model, &standard_flow(model, &z, t1)?, -t1)?;
        if back.word.same_as(&z.word) {
            e.std_inverse = e.std_inverse.max((back.k - z.k).abs()).max(model.distance(&back.x, &z.x));
        } else if (back.k - z.k).abs() < 1.0 - 1e-9 {
            e.std_symbol_mismatches += 1;
        }

        let pos = CellPosition { cell: rng.gen_range(-n / 4..n / 4), k };
        let l1 = rng.gen_range(-reach..reach);
        let l2 = rng.gen_range(-reach..reach);
        let both = time_changed_flow(orbit, pos, l1 + l2)?;
        let seq = time_changed_flow(orbit, time_changed_flow(orbit, pos, l1)?, l2)?;
        e.tc_elapsed = e.tc_elapsed.max((elapsed(orbit, pos, both)? - (l1 + l2)).abs());
        e.tc_group = e.tc_group.max(elapsed(orbit, seq, both)?.abs());
        let inv = time_changed_flow(orbit, time_changed_flow(orbit, pos, l1)?, -l1)?;
        e.tc_inverse = e.tc_inverse.max(elapsed(orbit, pos, inv)?.abs());
    }
    Ok(e)
}

impl FlowLawErrors {
    pub fn passes(&self, tol: f64) -> bool {
        self.std_symbol_mismatches == 0
            && self.std_continuous <= tol
            && self.std_inverse <= tol
            && self.tc_elapsed <= tol
            && self.tc_group <= tol
            && self.tc_inverse <= tol
    }

    pub fn records(&self, seed: u64, tol: f64) -> Vec<CheckRecord> {
        let rec = |name: &str, v: f64| CheckRecord::check("flow", name, v, tol, seed, v <= tol, true);
        vec![
            CheckRecord::check("flow", "standard-symbols", self.std_symbol_mismatches as f64, 0.0, seed, self.std_symbol_mismatches == 0, true),
            rec("standard-additivity", self.std_continuous),
            rec("standard-inverse", self.std_inverse),
            rec("tc-elapsed", self.tc_elapsed),
            rec("tc-group-law", self.tc_group),
            rec("tc-inverse", self.tc_inverse),
        ]
    }
}

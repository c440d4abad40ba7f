//! Suspension flows over the skew product: the unit-roof standard flow and
//! the flow under the roof `tau`.

use crate::charts::{normal_form, orbit_leaf_point, LeafPoint};
use crate::error::{Error, Result};
use crate::model::SurfaceModel;
use crate::orbit::ChartedOrbit;
use crate::walk::{compose, WalkWord};
use serde::Serialize;

/// A point `(x, w, k)` of `Y x [0, 1)`.
#[derive(Debug, Clone)]
pub struct SuspensionPoint<P> {
    pub x: P,
    pub word: WalkWord,
    pub k: f64,
}

/// Splits `k + t` into whole cells and a fraction in `[0, 1)`, with the
/// boundary attributed to the new cell.
pub fn split_time(k: f64, t: f64) -> (i64, f64) {
    let s = k + t;
    let mut n = s.floor();
    let mut frac = s - n;
    if frac >= 1.0 {
        n += 1.0;
        frac = 0.0;
    }
    if frac < 0.0 {
        frac = 0.0;
    }
    (n as i64, frac)
}

/// Standard flow: `F^t(x, w, k) = (F^n(x, w), k + t - n)` with `n = floor(k + t)`.
pub fn standard_flow<M: SurfaceModel>(model: &M, z: &SuspensionPoint<M::Point>, t: f64) -> Result<SuspensionPoint<M::Point>> {
    let (n, k) = split_time(z.k, t);
    Ok(SuspensionPoint { x: compose(model, &z.word, n, &z.x)?, word: z.word.shift(n), k })
}

/// Roof data at a cell of a charted orbit.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RoofData {
    pub tau: f64,
    pub theta: f64,
    pub phi: f64,
    /// `phi` at the next cell.
    pub phi_next: f64,
}

impl RoofData {
    /// `|tau - (theta - phi o F + phi)|`.
    pub fn coboundary_residual(&self) -> f64 {
        (self.tau - (self.theta - self.phi_next + self.phi)).abs()
    }
}

pub fn roof<P>(orbit: &ChartedOrbit<P>, k: i64) -> Result<RoofData> {
    let tau = orbit.tau(k)?;
    assert!(tau > 0.0, "roof must be positive, got {tau} at cell {k}");
    Ok(RoofData { tau, theta: orbit.theta(k)?, phi: orbit.phi(k)?, phi_next: orbit.phi(k + 1)? })
}

/// Position for the time-changed flow along a charted orbit: cell `cell`
/// and fraction `k` of its roof.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CellPosition {
    pub cell: i64,
    pub k: f64,
}

/// Flow under the roof `tau`: a cell at `x_j` lasts `tau(x_j)` units of
/// time. Crossing happens when the elapsed time in the cell reaches `tau`.
pub fn time_changed_flow<P>(orbit: &ChartedOrbit<P>, pos: CellPosition, ell: f64) -> Result<CellPosition> {
    let mut cell = pos.cell;
    let mut tau = orbit.tau(cell)?;
    let mut e = pos.k * tau + ell;
    while e >= tau {
        e -= tau;
        cell += 1;
        tau = orbit.tau(cell)?;
    }
    while e < 0.0 {
        cell -= 1;
        tau = orbit.tau(cell)?;
        e += tau;
    }
    let mut k = e / tau;
    if k >= 1.0 {
        cell += 1;
        k = 0.0;
        orbit.tau(cell)?;
    }
    Ok(CellPosition { cell, k })
}

/// Total roof time between two positions (positive when `b` is later).
pub fn elapsed<P>(orbit: &ChartedOrbit<P>, a: CellPosition, b: CellPosition) -> Result<f64> {
    let start = |p: CellPosition| -> Result<f64> { Ok(p.k * orbit.tau(p.cell)?) };
    let mut total = start(b)? - start(a)?;
    if b.cell >= a.cell {
        for c in a.cell..b.cell {
            total += orbit.tau(c)?;
        }
    } else {
        for c in b.cell..a.cell {
            total -= orbit.tau(c)?;
        }
    }
    Ok(total)
}

/// Modified leaf coordinate of `z` seen from a flow position:
/// `e^{k tau} |H_new(z)|`, with `z` moved to the position's cell.
pub fn flowed_leaf_size<M: SurfaceModel>(
    model: &M,
    orbit: &ChartedOrbit<M::Point>,
    pos: CellPosition,
    z: &LeafPoint<M::Point>,
) -> Result<f64> {
    let mut z = z.clone();
    while z.base() < pos.cell {
        z = z.advance(model, orbit)?;
    }
    while z.base() > pos.cell {
        z = z.retreat().ok_or(Error::WindowExhausted(pos.cell))?;
    }
    let nf = normal_form(model, orbit, &orbit_leaf_point::<M>(orbit, pos.cell)?)?;
    let h = nf.eval_modified(model, orbit, &z)?.norm();
    Ok((pos.k * orbit.tau(pos.cell)?).exp() * h)
}

/// `|size(F_tc^ell) / size - e^ell| / e^ell` for a leaf point.
pub fn leaf_expansion_residual<M: SurfaceModel>(
    model: &M,
    orbit: &ChartedOrbit<M::Point>,
    pos: CellPosition,
    z: &LeafPoint<M::Point>,
    ell: f64,
) -> Result<f64> {
    let before = flowed_leaf_size(model, orbit, pos, z)?;
    let after = flowed_leaf_size(model, orbit, time_changed_flow(orbit, pos, ell)?, z)?;
    Ok((after / before - ell.exp()).abs() / ell.exp())
}

/// The suspension point at a cell position.
pub fn materialize<P: Clone>(orbit: &ChartedOrbit<P>, pos: CellPosition) -> Result<SuspensionPoint<P>> {
    Ok(SuspensionPoint { x: orbit.point(pos.cell)?.clone(), word: orbit.word().shift(pos.cell), k: pos.k })
}

/// `C_tau = 1 / E[tau]` from pilot roof values.
pub fn tc_normalization(pilot: &[f64]) -> Result<f64> {
    if pilot.is_empty() {
        return Err(Error::Insufficient("empty pilot".into()));
    }
    Ok(pilot.len() as f64 / pilot.iter().sum::<f64>())
}

/// Density `C_tau tau` of the time-changed invariant measure at a cell.
pub fn tc_density<P>(orbit: &ChartedOrbit<P>, cell: i64, c_tau: f64) -> Result<f64> {
    Ok(c_tau * orbit.tau(cell)?)
}

/// A coordinate box `lo <= coords < hi`.
#[derive(Debug, Clone, Serialize, serde::Deserialize)]
pub struct CoordBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl CoordBox {
    pub fn full(dim: usize) -> Self {
        CoordBox { lo: vec![f64::NEG_INFINITY; dim], hi: vec![f64::INFINITY; dim] }
    }

    pub fn empty(dim: usize) -> Self {
        CoordBox { lo: vec![0.0; dim], hi: vec![0.0; dim] }
    }

    pub fn contains(&self, c: &[f64]) -> bool {
        c.iter().zip(self.lo.iter().zip(&self.hi)).all(|(x, (l, h))| l <= x && x < h)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BirkhoffRow {
    pub seed: u64,
    pub t: f64,
    pub time_avg: f64,
    pub ens_avg: f64,
    pub gap: f64,
}

/// Time average of `1_K` along the standard flow from `(x, w, 0)` up to time `t`.
pub fn flow_time_average<M: SurfaceModel>(model: &M, x: &M::Point, w: &WalkWord, k_box: &CoordBox, t: f64) -> Result<f64> {
    let whole = t.floor() as i64;
    let mut p = x.clone();
    let mut hits = 0.0;
    for i in 0..whole {
        if k_box.contains(&model.coordinates(&p)) {
            hits += 1.0;
        }
        p = model.apply(w.auto(i), &p)?;
    }
    let rest = t - whole as f64;
    if rest > 0.0 && k_box.contains(&model.coordinates(&p)) {
        hits += rest;
    }
    Ok(hits / t)
}

/// Birkhoff table: per seed and horizon, the time average of `1_K` and its
/// gap to the ensemble average over all seeds at the largest horizon.
pub fn birkhoff_diagnostic<M: SurfaceModel>(
    model: &M,
    starts: &[(u64, M::Point, WalkWord)],
    k_box: &CoordBox,
    horizons: &[f64],
) -> Result<Vec<BirkhoffRow>> {
    use rayon::prelude::*;
    let t_max = horizons.iter().cloned().fold(0.0, f64::max);
    let per_seed: Vec<Vec<f64>> = starts
        .par_iter()
        .map(|(_, x, w)| horizons.iter().map(|&t| flow_time_average(model, x, w, k_box, t)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let idx_max = horizons.iter().position(|&t| t == t_max).unwrap_or(0);
    let ens = per_seed.iter().map(|v| v[idx_max]).sum::<f64>() / per_seed.len().max(1) as f64;
    let mut rows = Vec::new();
    for ((seed, _, _), avgs) in starts.iter().zip(&per_seed) {
        for (&t, &a) in horizons.iter().zip(avgs) {
            rows.push(BirkhoffRow { seed: *seed, t, time_avg: a, ens_avg: ens, gap: (a - ens).abs() });
        }
    }
    Ok(rows)
}

/// Fraction of seeds whose gap exceeds `eps` at some horizon `>= s`.
pub fn birkhoff_violations(rows: &[BirkhoffRow], eps: f64, s: f64) -> f64 {
    let mut seeds: Vec<u64> = rows.iter().map(|r| r.seed).collect();
    seeds.sort_unstable();
    seeds.dedup();
    if seeds.is_empty() {
        return 0.0;
    }
    let bad = seeds
        .iter()
        .filter(|&&sd| rows.iter().any(|r| r.seed == sd && r.t >= s && r.gap > eps))
        .count();
    bad as f64 / seeds.len() as f64
}

pub fn write_birkhoff_csv<W: std::io::Write>(rows: &[BirkhoffRow], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    for r in rows {
        wtr.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TorusModel;
    use crate::orbit::OrbitSpec;
    use crate::walk::FiniteMeasure;
    use proptest::prelude::*;

    fn z0() -> (TorusModel, SuspensionPoint<[f64; 4]>) {
        let m = TorusModel::cat_map();
        let mu = FiniteMeasure::uniform(vec![0, 1]).unwrap();
        (m, SuspensionPoint { x: [0.1, 0.2, 0.3, 0.4], word: WalkWord::new(3, &mu), k: 0.2 })
    }

    #[test]
    fn floor_bookkeeping() {
        let (m, z) = z0();
        let a = standard_flow(&m, &z, 0.9).unwrap();
        assert_eq!(a.word.offset(), 1);
        assert!((a.k - 0.1).abs() < 1e-15);
        let b = standard_flow(&m, &z, -0.3).unwrap();
        assert_eq!(b.word.offset(), -1);
        assert!((b.k - 0.9).abs() < 1e-15);
        let c = standard_flow(&m, &z, 0.0).unwrap();
        assert_eq!(c.x, z.x);
        assert_eq!(c.k, z.k);
        // boundary goes to the new cell
        assert_eq!(split_time(0.5, 0.5), (1, 0.0));
    }

    proptest! {
        #[test]
        fn standard_flow_laws(t1 in -5.0f64..5.0, t2 in -5.0f64..5.0, k in 0.0f64..1.0) {
            let (m, mut z) = z0();
            z.k = k;
            let a = standard_flow(&m, &standard_flow(&m, &z, t1).unwrap(), t2).unwrap();
            let b = standard_flow(&m, &z, t1 + t2).unwrap();
            // symbols exact, fraction and point to rounding (up to a boundary flip)
            if a.word.offset() == b.word.offset() {
                prop_assert!((a.k - b.k).abs() < 1e-9);
                prop_assert!(m.distance(&a.x, &b.x) < 1e-9);
            } else {
                prop_assert!((a.word.offset() - b.word.offset()).abs() == 1);
                prop_assert!((a.k - b.k).abs() > 1.0 - 1e-9);
            }
            let back = standard_flow(&m, &standard_flow(&m, &z, t1).unwrap(), -t1).unwrap();
            prop_assert!(back.word.same_as(&z.word) || (back.k - z.k).abs() > 1.0 - 1e-9);
            prop_assert!(m.distance(&back.x, &z.x) < 1e-9 || (back.k - z.k).abs() > 1.0 - 1e-9);
        }
    }

    fn cat_orbit() -> ChartedOrbit<[f64; 4]> {
        let m = TorusModel::cat_map();
        let w = WalkWord::new(0, &FiniteMeasure::dirac(0));
        let l = ((3.0 + 5f64.sqrt()) / 2.0).ln();
        let spec = OrbitSpec { radius: 30, pad: 30, lambda_plus: l, lambda_minus: -l, eps0: 0.0 };
        ChartedOrbit::build(&m, &w, &[0.1, 0.2, 0.3, 0.4], spec).unwrap()
    }

    #[test]
    fn constant_roof_arithmetic() {
        let o = cat_orbit();
        let tau0 = o.tau(0).unwrap();
        assert!((tau0 - ((3.0 + 5f64.sqrt()) / 2.0).ln()).abs() < 1e-12);
        let p = CellPosition { cell: 0, k: 0.0 };
        let q = time_changed_flow(&o, p, 3.0 * tau0 + 1e-12).unwrap();
        assert_eq!(q.cell, 3);
        assert_eq!(time_changed_flow(&o, p, 0.0).unwrap(), p);
        let r = roof(&o, 0).unwrap();
        assert!(r.coboundary_residual() < 1e-12);
        assert!((tc_density(&o, 4, tc_normalization(&[tau0; 10]).unwrap()).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn time_changed_window_exhaustion() {
        let o = cat_orbit();
        let e = time_changed_flow(&o, CellPosition { cell: 0, k: 0.0 }, 1000.0);
        assert!(matches!(e, Err(Error::WindowExhausted(_))));
    }

    #[test]
    fn birkhoff_trivial_sets() {
        let m = TorusModel::cat_map();
        let mu = FiniteMeasure::dirac(0);
        let starts = vec![(1u64, [0.1, 0.2, 0.3, 0.4], WalkWord::new(1, &mu))];
        let full = birkhoff_diagnostic(&m, &starts, &CoordBox::full(4), &[10.0, 20.5]).unwrap();
        assert!(full.iter().all(|r| (r.time_avg - 1.0).abs() < 1e-15));
        let empty = birkhoff_diagnostic(&m, &starts, &CoordBox::empty(4), &[10.0]).unwrap();
        assert!(empty.iter().all(|r| r.time_avg == 0.0));
        let mut buf = Vec::new();
        write_birkhoff_csv(&full, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("seed,t,time_avg,ens_avg,gap"));
    }
}

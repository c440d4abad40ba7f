use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::OnceLock;
use surfwalk::charts::{
    affine_change, chart_jacobian, chart_map, conjugacy_residual, local_manifold, normal_form, orbit_leaf_point, stable_inclusion_residual,
    unstable_leaf_points,
};
use surfwalk::cocycle::{default_eps0, lyapunov_exponents_along, Tag};
use surfwalk::flow::{leaf_expansion_residual, time_changed_flow, CellPosition};
use surfwalk::linalg::{Mat4, Vec4};
use surfwalk::model::{SurfaceModel, WehlerModel, WehlerPoint};
use surfwalk::orbit::{ChartedOrbit, OrbitSpec};
use surfwalk::walk::{compose, FiniteMeasure, WalkWord};

struct Fixture {
    model: WehlerModel,
    orbit: ChartedOrbit<WehlerPoint>,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let model = WehlerModel::golden();
        let mu = FiniteMeasure::uniform(vec![0, 1, 2]).unwrap();
        let p = model.random_real_point(&mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let w0 = WalkWord::new(7, &mu);
        let x = compose(&model, &w0, 1000, &p).unwrap();
        let word = w0.shift(1000);
        let est = lyapunov_exponents_along(&model, &word, &x, 20_000, 1000).unwrap();
        let eps0 = default_eps0(est.lambda_plus, est.lambda_minus);
        let spec = OrbitSpec { radius: 200, pad: 300, lambda_plus: est.lambda_plus, lambda_minus: est.lambda_minus, eps0 };
        let orbit = ChartedOrbit::build(&model, &word, &x, spec).unwrap();
        Fixture { model, orbit }
    })
}

#[test]
fn analytic_chart_jacobian_matches_differences() {
    let f = fixture();
    let k = 0;
    let w = Vec4::new(0.1, -0.05, 0.08, 0.02);
    let exact = chart_jacobian(&f.model, &f.orbit, k, &w).unwrap();
    let h = 1e-3;
    let mut fd = Mat4::zeros();
    for j in 0..4 {
        let mut e = Vec4::zeros();
        e[j] = h;
        let a = chart_map(&f.model, &f.orbit, k, &(w + e)).unwrap();
        let b = chart_map(&f.model, &f.orbit, k, &(w - e)).unwrap();
        fd.set_column(j, &((a - b) / (2.0 * h)));
    }
    assert!((exact - fd).norm() < 1e-4 * exact.norm(), "{:e}", (exact - fd).norm());
}

#[test]
fn chart_derivative_at_origin_is_the_linear_chart_map() {
    let f = fixture();
    for k in [-50, 0, 50] {
        let d = chart_jacobian(&f.model, &f.orbit, k, &Vec4::zeros()).unwrap();
        let d0 = f.orbit.chart_derivative(k).unwrap();
        assert!((d - d0).norm() <= 1e-9 * d0.norm(), "cell {k}");
    }
}

#[test]
fn normal_forms_conjugate_and_differ_by_affine_maps() {
    let f = fixture();
    let base = orbit_leaf_point::<WehlerModel>(&f.orbit, 0).unwrap();
    let nf = normal_form(&f.model, &f.orbit, &base).unwrap();
    let pts = unstable_leaf_points(&f.model, &f.orbit, 0, 150, 1e-5, 8).unwrap();
    for p in &pts {
        assert!(conjugacy_residual(&f.model, &f.orbit, &nf, p).unwrap() < 1e-9);
    }
    let other = normal_form(&f.model, &f.orbit, &pts[0]).unwrap();
    let (alpha, _, resid) = affine_change(&f.model, &f.orbit, &nf, &other, &pts[1..]).unwrap();
    assert!(resid < 1e-6, "{resid:e}");
    assert!(alpha.norm() > 0.5 && alpha.norm() < 2.0);
}

#[test]
fn stable_graph_maps_into_the_next_graph() {
    let f = fixture();
    let g = local_manifold(&f.model, &f.orbit, 0, Tag::Stable, 0.5, 100).unwrap();
    assert!(g.max_dh <= 1.0 / 3.0);
    let r = stable_inclusion_residual(&f.model, &f.orbit, &g).unwrap();
    assert!(r < 1e-6 * g.q, "{r:e}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn leaf_scaling_is_exactly_exponential(cell in -100i64..60, k in 0.0f64..1.0, ell in 0.1f64..3.0) {
        let f = fixture();
        let z = unstable_leaf_points(&f.model, &f.orbit, cell, 100, 1e-5, 1).unwrap().remove(0);
        let r = leaf_expansion_residual(&f.model, &f.orbit, CellPosition { cell, k }, &z, ell).unwrap();
        prop_assert!(r < 1e-6, "residual {r:e}");
    }

    #[test]
    fn backward_flow_shrinks_leaves(cell in -60i64..60, k in 0.0f64..1.0, ell in 0.1f64..2.0) {
        let f = fixture();
        let pos = CellPosition { cell, k };
        let back = time_changed_flow(&f.orbit, pos, -ell).unwrap();
        prop_assert!(back.cell < cell || (back.cell == cell && back.k < k));
        let z = unstable_leaf_points(&f.model, &f.orbit, cell, 100, 1e-5, 1).unwrap().remove(0);
        let r = leaf_expansion_residual(&f.model, &f.orbit, pos, &z, -ell).unwrap();
        prop_assert!(r < 1e-6, "residual {r:e}");
    }
}

#[test]
fn leaf_points_sit_at_the_requested_distance() {
    let f = fixture();
    let pts = unstable_leaf_points(&f.model, &f.orbit, 10, 120, 1e-5, 6).unwrap();
    let x = f.orbit.point(10).unwrap();
    for p in &pts {
        let d = f.model.distance(x, p.current());
        assert!(d > 1e-6 && d < 3e-5, "{d:e}");
    }
}

//! Closed-form oracles for the generic pipeline.

use approx::assert_abs_diff_eq;
use fastslow::analysis::{regimes, run_analyze, RegimeLabel};
use fastslow::config::Config;
use fastslow::manifold::{self, Direction, Grid};
use fastslow::models::chialvo::{self, ChialvoParams, RegimeCase};
use fastslow::models::{self, standard, Params};
use fastslow::poincare::{self, PoincareOptions, SectionSpec};
use fastslow::reduced::{self, Stability};
use fastslow::spectral::{self, Classification, SingularityKind};
use fastslow::{Error, Vector};

fn v2(a: f64, b: f64) -> Vector {
    Vector::from_vec(vec![a, b])
}

#[test]
fn chialvo_critical_graph_matches_phi0() {
    let p = ChialvoParams::default();
    let map = chialvo::chialvo(p).unwrap();
    let grid = Grid::line(1.1, 4.5, 69).unwrap();
    let s = manifold::solve_critical_graph(&map, &grid, &Vector::from_vec(vec![1.0])).unwrap();
    for i in 0..s.len() {
        let v = s.node(i)[0];
        assert_abs_diff_eq!(s.values()[i][0], chialvo::phi0(&p, v), epsilon = 1e-12);
    }
}

#[test]
fn chialvo_first_order_manifold_matches_closed_form() {
    let p = ChialvoParams::default();
    let map = chialvo::chialvo(p).unwrap();
    let grid = Grid::line(1.1, 2.9, 37).unwrap();
    let s = manifold::solve_critical_graph(&map, &grid, &Vector::from_vec(vec![1.0])).unwrap();
    let eps = 1e-3;
    let first = manifold::slow_manifold_first_order(&map, &s, eps).unwrap();
    for i in 0..first.len() {
        let v = first.node(i)[0];
        assert_abs_diff_eq!(
            first.values()[i][0],
            chialvo::slow_manifold_first_order(&p, v, eps),
            epsilon = 1e-12
        );
    }
}

#[test]
fn chialvo_reduced_step_matches_closed_form() {
    let p = ChialvoParams::default();
    let map = chialvo::chialvo(p).unwrap();
    for v in [1.2, 1.7, 2.4, 3.6] {
        let z = chialvo::critical_point(&p, v);
        let r = reduced::reduced_step(&map, &z, 1e-3).unwrap();
        assert_abs_diff_eq!(r[1], chialvo::reduced_v_step(&p, v, 1e-3), epsilon = 1e-12);
    }
}

#[test]
fn zero_k_has_a_single_fold_at_one() {
    assert_eq!(chialvo::fold_points(0.0), vec![1.0]);
    assert_abs_diff_eq!(chialvo::flip_point(0.0), 3.0, epsilon = 1e-15);
}

#[test]
fn default_parameters_have_a_unique_equilibrium() {
    let check = chialvo::check_unique_equilibrium(&ChialvoParams::default());
    assert!(check.unique);
    assert_abs_diff_eq!(check.discriminant, -0.2159, epsilon = 1e-4);
    let p = ChialvoParams::regime(RegimeCase::IV);
    assert!(matches!(
        chialvo::chialvo_equilibrium_v(&p),
        Err(Error::AssumptionViolated { .. })
    ));
    assert_eq!(chialvo::chialvo_equilibria(&p, 200.0).len(), 1);
}

#[test]
fn layer_map_multiplier_has_unit_modulus_at_singular_points() {
    let p = ChialvoParams::default();
    let map = chialvo::chialvo(p).unwrap();
    for v in chialvo::fold_points(p.k) {
        let mu = spectral::nontrivial_multipliers(&map, &chialvo::critical_point(&p, v)).unwrap();
        assert_abs_diff_eq!(mu[0].re, 1.0, epsilon = 1e-12);
    }
    let z = chialvo::critical_point(&p, chialvo::flip_point(p.k));
    let c = spectral::classify_point(&map, &z, 1e-8).unwrap();
    assert_eq!(c, Classification::NonHyperbolic(SingularityKind::Flip));
}

#[test]
fn excitable_case_has_stable_fixed_point_on_upper_branch() {
    let p = ChialvoParams::regime(RegimeCase::I);
    let map = chialvo::chialvo(p).unwrap();
    let v0 = chialvo::chialvo_equilibrium_v(&p).unwrap();
    let fp = reduced::find_fixed_point(&map, &chialvo::critical_point(&p, v0), 1e-3).unwrap();
    assert_eq!(fp.stability, Stability::Stable);
    assert_abs_diff_eq!(fp.location[0], 0.95937, epsilon = 1e-5);
    assert_abs_diff_eq!(fp.location[1], 1.20813, epsilon = 1e-5);
}

#[test]
fn fixed_point_at_zero_eps_is_degenerate() {
    let p = ChialvoParams::default();
    let map = chialvo::chialvo(p).unwrap();
    let fp = reduced::find_fixed_point(&map, &v2(1.3, 1.8), 0.0).unwrap();
    assert!(fp.degenerate);
    assert!(map.on_manifold(&Vector::from_column_slice(&fp.location)).is_ok());
}

#[test]
fn zero_steps_gives_initial_point_only() {
    let map = chialvo::chialvo(ChialvoParams::default()).unwrap();
    let t = map.iterate(&v2(0.25, 2.0), 1e-3, 0).unwrap();
    assert_eq!(t.len(), 1);
    assert!(t.to_csv().starts_with("# schema: 1\n"));
}

#[test]
fn relaxation_cycle_spans_both_folds() {
    let (rep, traj) = regimes::run_regimes(RegimeCase::II, 1e-3).unwrap();
    assert_eq!(rep.label, RegimeLabel::Relaxation);
    assert_eq!(traj.len(), regimes::DEFAULT_STEPS + 1);
    let (lo, hi) = rep.diagnostics.w_range;
    for wf in rep.diagnostics.w_folds {
        assert!(lo < wf && wf < hi);
    }
}

#[test]
fn orbit_on_slow_manifold_stays_close() {
    let p = ChialvoParams::default();
    let map = chialvo::chialvo(p).unwrap();
    let eps = 1e-3;
    let grid = Grid::line(1.1, 2.9, 181).unwrap();
    let s = manifold::solve_critical_graph(&map, &grid, &Vector::from_vec(vec![1.0])).unwrap();
    let slow = manifold::slow_manifold_numeric(&map, &s, eps, Direction::Forward).unwrap();
    let mut traj = map.iterate(&slow.point(&Vector::from_vec(vec![2.8])), eps, 100).unwrap();
    traj.annotate(&slow);
    let worst = traj.dist_to_slow.iter().flatten().fold(0.0, |a: f64, &b| a.max(b));
    assert!(worst <= 10.0 * eps * eps, "drift {worst:e}");
}

#[test]
fn inverse_step_undoes_a_step() {
    let map = chialvo::chialvo(ChialvoParams::default()).unwrap();
    let z = v2(1.4, 2.6);
    let img = map.evaluate(&z, 1e-3).unwrap();
    let back = map.inverse_step(&img, 1e-3, &img).unwrap();
    assert_abs_diff_eq!((back - z).amax(), 0.0, epsilon = 1e-10);
}

#[test]
fn standard_form_slow_step_is_eps_g() {
    let p = ChialvoParams::default();
    let map = standard::chialvo_standard(p).unwrap();
    let z = v2(0.9, 2.1);
    let eps = 2e-3;
    let img = map.evaluate(&z, eps).unwrap();
    assert_abs_diff_eq!(img[0] - z[0], eps * (p.c - p.b * z[1] - p.a * z[0]), epsilon = 1e-14);
}

#[test]
fn spectral_bounds_reject_non_hyperbolic_samples() {
    let p = ChialvoParams::default();
    let map = chialvo::chialvo(p).unwrap();
    let pts = vec![
        chialvo::critical_point(&p, 1.5),
        chialvo::critical_point(&p, chialvo::flip_point(p.k)),
    ];
    assert!(matches!(
        spectral::spectral_bounds(&map, &pts, 1e-8),
        Err(Error::NonHyperbolicSample { index: 1, .. })
    ));
}

#[test]
fn hopf_return_map_cycle_is_exact_at_the_root() {
    let a_g = 0.5;
    let section = SectionSpec::hopf_default();
    let map = poincare::build_poincare_map(&poincare::hopf(a_g), &section, &PoincareOptions::default()).unwrap();
    let z = v2(a_g.sqrt(), a_g);
    let img = map.evaluate(&z, 1e-3).unwrap();
    assert_abs_diff_eq!((img - z).amax(), 0.0, epsilon = 1e-9);
}

#[test]
fn analyze_reports_two_folds_and_a_flip() {
    let rep = run_analyze(&Config::for_model("chialvo")).unwrap();
    let folds = rep.singularities.iter().filter(|h| h.kind == SingularityKind::Fold).count();
    let flips = rep.singularities.iter().filter(|h| h.kind == SingularityKind::Flip).count();
    assert_eq!((folds, flips), (2, 1));
    assert_eq!(rep.schema, 1);
    assert!(rep.numeric.is_some(), "{:?}", rep.notes);
}

#[test]
fn analyze_step_sweep_flips_at_the_boundary() {
    let mut cfg = Config::for_model("euler:linear");
    cfg.h_sweep = vec![0.5, 0.9, 1.0, 1.1, 1.5];
    let rep = run_analyze(&cfg).unwrap();
    let kinds: Vec<_> = rep.step_sweep.iter().map(|r| r.classification).collect();
    assert_eq!(kinds[0], Classification::Attracting);
    assert_eq!(kinds[1], Classification::Attracting);
    assert_eq!(kinds[2], Classification::NonHyperbolic(SingularityKind::Flip));
    assert_eq!(kinds[3], Classification::Repelling);
    assert_eq!(kinds[4], Classification::Repelling);
    assert_abs_diff_eq!(rep.step_sweep[0].h_crit[0], 1.0, epsilon = 1e-12);
}

#[test]
fn every_builtin_model_builds_and_rejects_unknown_params() {
    for name in models::BUILTIN {
        assert!(models::build(name, &Params::new()).is_ok(), "{name}");
        let mut bad = Params::new();
        bad.insert("nope".into(), 1.0);
        assert!(matches!(models::build(name, &bad), Err(Error::Config(_))));
    }
}

use std::f64::consts::PI;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pharec::basis::{PairBasisSpec, Trig};
use pharec::coupling::{
    fit_reduced_coupling, reduced_coupling_samples, sample_evaluation_grid, RadiusStats,
    ReducedFrame,
};
use pharec::limit_cycle::{analyze_model, CycleOptions};
use pharec::models::{Model, ModelKind};
use pharec::ridge::KappaPolicy;
use pharec::vf_reconstruction::{
    fit_network_vf, simulate_trials, uncoupled_deviation, NetworkVf, Trial, TrialOptions, TrialSet,
    VfFitOptions,
};

struct Fixture {
    model: Model,
    trials: TrialSet,
    vf: NetworkVf,
}

fn ric() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let model = Model::preset(ModelKind::RadialIsochronClock).unwrap();
        let cycles: Vec<_> = analyze_model(&model, &CycleOptions::default())
            .unwrap()
            .into_iter()
            .map(|a| a.cycle)
            .collect();
        let trials = simulate_trials(&model, &cycles, &TrialOptions::default()).unwrap();
        let vf = fit_network_vf(
            &trials,
            &VfFitOptions::for_kind(ModelKind::RadialIsochronClock),
        )
        .unwrap();
        Fixture { model, trials, vf }
    })
}

#[test]
fn hundred_trials_by_default() {
    assert_eq!(ric().trials.trials.len(), 100);
}

#[test]
fn ric_radial_coefficients() {
    let f = ric();
    let opts = VfFitOptions::for_kind(ModelKind::RadialIsochronClock);
    for (i, a) in [1.0, 0.7].into_iter().enumerate() {
        let q = &f.vf.oscillators[i].r.coefficients;
        let lin = q[opts.single.index(1, 0, Trig::Const)];
        let cub = q[opts.single.index(3, 0, Trig::Const)];
        assert!((lin - a).abs() < 0.02 * a, "osc {i}: linear {lin}");
        assert!((cub + a).abs() < 0.02 * a, "osc {i}: cubic {cub}");
    }
}

#[test]
fn uncoupled_part_matches_model() {
    let f = ric();
    for i in 0..2 {
        let d = uncoupled_deviation(&f.vf, &f.model, &f.trials, i);
        assert!(d[0] < 5e-2 && d[1] < 5e-2, "osc {i}: {d:?}");
    }
}

#[test]
fn coupling_value_and_direction() {
    let f = ric();
    let g = f.vf.eval_coupling(1, 0, [0.0, 1.0], [PI / 2.0, 1.0]);
    let want = f.model.coupling_polar(1, 0, [0.0, 1.0], [PI / 2.0, 1.0]);
    assert!((want[0] - 0.3).abs() < 1e-12);
    assert!((g[0] - want[0]).abs() < 0.02 * 0.3, "{g:?}");
    let driver = f.vf.pair(0, 1).unwrap();
    let driven = f.vf.pair(1, 0).unwrap();
    let sup = |p: &pharec::vf_reconstruction::PairCoupling| p.theta.sup_norm().max(p.r.sup_norm());
    assert!(
        sup(driver) <= 0.1 * sup(driven),
        "{} vs {}",
        sup(driver),
        sup(driven)
    );
}

#[test]
fn trial_order_does_not_matter() {
    let f = ric();
    let mut shuffled = f.trials.clone();
    shuffled.trials.reverse();
    shuffled.trials.rotate_left(37);
    let g = fit_network_vf(
        &shuffled,
        &VfFitOptions::for_kind(ModelKind::RadialIsochronClock),
    )
    .unwrap();
    for (a, b) in f.vf.oscillators.iter().zip(&g.oscillators) {
        for (x, y) in a
            .theta
            .coefficients
            .iter()
            .zip(&b.theta.coefficients)
            .chain(a.r.coefficients.iter().zip(&b.r.coefficients))
        {
            assert!((x - y).abs() < 1e-10, "{x} {y}");
        }
    }
}

#[test]
fn noise_channel_gets_no_coupling() {
    let f = ric();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let trials = f
        .trials
        .trials
        .iter()
        .map(|t| {
            let th: Vec<f64> = t
                .times
                .iter()
                .map(|_| rng.gen_range(0.0..2.0 * PI))
                .collect();
            let r: Vec<f64> = t.times.iter().map(|_| rng.gen_range(0.75..1.35)).collect();
            let mut theta = t.theta.clone();
            let mut rr = t.r.clone();
            theta.push(th);
            rr.push(r);
            Trial {
                times: t.times.clone(),
                theta,
                r: rr,
            }
        })
        .collect();
    let set = TrialSet {
        trials,
        n_oscillators: 3,
        metadata: "noise".into(),
    };
    let vf = fit_network_vf(
        &set,
        &VfFitOptions::for_kind(ModelKind::RadialIsochronClock),
    )
    .unwrap();
    for i in 0..2 {
        let p = vf.pair(i, 2).unwrap();
        let sup = p.theta.sup_norm().max(p.r.sup_norm());
        assert!(sup < 0.05, "{i}<-noise: {sup}");
    }
}

#[test]
fn removed_pair_reduces_to_zero() {
    let f = ric();
    let vf = f.vf.without_pair(1, 0);
    let g = [f.model.analytic(0).unwrap(), f.model.analytic(1).unwrap()];
    let fi = ReducedFrame {
        inverse: &g[1],
        sigma_range: None,
    };
    let fj = ReducedFrame {
        inverse: &g[0],
        sigma_range: None,
    };
    let stats = RadiusStats { lo: 0.9, hi: 1.1 };
    let grid = sample_evaluation_grid(stats, stats, 2000, 5).unwrap();
    let s = reduced_coupling_samples(&vf, &fi, &fj, 1, 0, &grid.points, 0.1);
    let p = fit_reduced_coupling(
        &s,
        &PairBasisSpec::reduced(2, 2, 2),
        &KappaPolicy::default(),
        false,
        1,
        0,
    )
    .unwrap();
    assert!(p.sup_norm() < 1e-10, "{}", p.sup_norm());
}

use pharec::limit_cycle::{analyze_model, CycleOptions};
use pharec::models::{wrap_pi, Model, ModelKind};
use pharec::signal::{extract_phase_amplitude, to_trial, RawSignal};
use pharec::vf_reconstruction::{simulate_trials, TrialOptions};

#[test]
fn recovers_simulated_canonical_trial() {
    let model = Model::preset(ModelKind::Canonical).unwrap();
    let cycles: Vec<_> = analyze_model(&model, &CycleOptions::default())
        .unwrap()
        .into_iter()
        .map(|a| a.cycle)
        .collect();
    let opts = TrialOptions {
        count: 3,
        periods: 12.0,
        steps_per_period: 200,
        ..TrialOptions::default()
    };
    let set = simulate_trials(&model, &cycles, &opts).unwrap();
    for t in &set.trials {
        // the driven channel's envelope moves at the driver's frequency, close
        // to its own carrier, which the analytic signal cannot separate
        for i in 0..1 {
            let x: Vec<f64> = t.theta[i]
                .iter()
                .zip(&t.r[i])
                .map(|(th, r)| r * th.cos())
                .collect();
            let pa =
                extract_phase_amplitude(&RawSignal::new("x", t.times.clone(), x).unwrap()).unwrap();
            // the transient from the initial condition is not band-limited; compare after it
            let settle = t.times[t.len() - 1] / 6.0;
            let (mut eth, mut er) = (0.0f64, 0.0f64);
            for k in pa.interior().filter(|&k| t.times[k] > settle) {
                eth = eth.max(wrap_pi(pa.theta[k] - t.theta[i][k]).abs());
                er = er.max((pa.r[k] / t.r[i][k] - 1.0).abs());
            }
            assert!(eth < 0.05, "θ error {eth}");
            assert!(er < 0.03, "r error {er}");
        }
    }
}

#[test]
fn channels_become_one_trial() {
    let n = 400;
    let t: Vec<f64> = (0..n).map(|k| k as f64 * 0.05).collect();
    let a = RawSignal::new("a", t.clone(), t.iter().map(|s| (2.0 * s).cos()).collect()).unwrap();
    let b = RawSignal::new(
        "b",
        t.clone(),
        t.iter().map(|s| 0.5 * (6.0 * s).sin()).collect(),
    )
    .unwrap();
    let ch = [
        extract_phase_amplitude(&a).unwrap(),
        extract_phase_amplitude(&b).unwrap(),
    ];
    let trial = to_trial(&ch).unwrap();
    assert_eq!(trial.n_oscillators(), 2);
    assert_eq!(trial.len(), n - 2 * 20);
    assert!(trial
        .theta
        .iter()
        .flatten()
        .all(|v| (0.0..2.0 * std::f64::consts::PI).contains(v)));
    let short = RawSignal::new(
        "c",
        t[..200].to_vec(),
        t[..200].iter().map(|s| (6.0 * s).cos()).collect(),
    )
    .unwrap();
    let mixed = [ch[0].clone(), extract_phase_amplitude(&short).unwrap()];
    assert!(to_trial(&mixed).is_err());
}

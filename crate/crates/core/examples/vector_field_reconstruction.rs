//! Fit the network vector field from simulated trials and separate the
//! uncoupled part from the pairwise coupling.

use pharec::limit_cycle::{analyze_model, CycleOptions};
use pharec::models::{Model, ModelKind};
use pharec::vf_reconstruction::{
    fit_network_vf, simulate_trials, uncoupled_deviation, TrialOptions, VfFitOptions,
};

fn main() -> pharec::Result<()> {
    let kind = std::env::args()
        .nth(1)
        .map(|s| ModelKind::parse(&s))
        .transpose()?
        .unwrap_or(ModelKind::RadialIsochronClock);
    let m = Model::preset(kind)?;
    let cycles: Vec<_> = analyze_model(&m, &CycleOptions::default())?
        .into_iter()
        .map(|a| a.cycle)
        .collect();
    let trials = simulate_trials(
        &m,
        &cycles,
        &TrialOptions {
            count: 40,
            ..TrialOptions::default()
        },
    )?;
    let vf = fit_network_vf(&trials, &VfFitOptions::for_kind(kind))?;
    for i in 0..vf.len() {
        let d = uncoupled_deviation(&vf, &m, &trials, i);
        let o = &vf.oscillators[i];
        println!(
            "oscillator {}: {} rows, κ = [{:.1e}, {:.1e}], uncoupled deviation θ {:.2e} r {:.2e}, coupling sup-norm {:.3e}",
            i + 1,
            o.diagnostics.rows,
            o.diagnostics.kappa[0],
            o.diagnostics.kappa[1],
            d[0],
            d[1],
            vf.coupling_sup_norm(i)
        );
    }
    let (si, sj) = ([0.0, 1.0], [std::f64::consts::FRAC_PI_2, 1.0]);
    println!(
        "coupling 2<-1 at (0,1),(π/2,1): fitted {:?}, model {:?}",
        vf.eval_coupling(1, 0, si, sj),
        m.coupling_polar(1, 0, si, sj)
    );
    Ok(())
}

//! Phase and amplitude of individual initial conditions by Fourier and
//! Laplace averages along their trajectories.

use pharec::averaging::{Averager, AveragingOptions};
use pharec::limit_cycle::{analyze_model, CycleOptions};
use pharec::models::{Model, ModelKind};

fn main() -> pharec::Result<()> {
    let kind = std::env::args()
        .nth(1)
        .map(|s| ModelKind::parse(&s))
        .transpose()?
        .unwrap_or(ModelKind::Canonical);
    let m = Model::preset(kind)?;
    let a = &analyze_model(&m, &CycleOptions::default())?[0];
    let f = m.uncoupled_field(0);
    let av = Averager::new(&f, &a.cycle, a.floquet.lambda, AveragingOptions::default())?;
    println!(
        "{}: ω = {:.5}, λ = {:.5}",
        kind.name(),
        a.cycle.omega,
        a.floquet.lambda
    );
    let truth = m.analytic(0).ok();
    for th in [0.0, 1.0, 2.5, 4.0] {
        for scale in [0.8, 1.0, 1.2] {
            let r = scale * a.cycle.gamma_at(th);
            let s = av.reduce(th, r)?;
            // averaged σ is normalized so that K^(r) has unit slope in σ
            let closed = truth.map(|g| {
                let phi = g.phi(th, r).rem_euclid(std::f64::consts::TAU);
                format!(
                    "  closed form φ={phi:.5} σ={:+.5}",
                    g.amplitude_scale() * g.sigma(th, r)
                )
            });
            println!(
                "θ={th:.2} r={r:.4}  φ={:.5} σ={:+.5}{}",
                s.phi0,
                s.sigma0,
                closed.unwrap_or_default()
            );
        }
    }
    Ok(())
}

//! Fit the inverse (θ, r) → (φ, σ) and forward (φ, σ) → (θ, r) transforms
//! from averaged samples and check the invariance equations.

use pharec::limit_cycle::{analyze_model, CycleOptions};
use pharec::models::{Model, ModelKind};
use pharec::transforms::{
    composition_error, fit_transforms, interior_grid, pde_residuals, sample_reduced,
    TransformOptions,
};

fn main() -> pharec::Result<()> {
    let kind = std::env::args()
        .nth(1)
        .map(|s| ModelKind::parse(&s))
        .transpose()?
        .unwrap_or(ModelKind::RadialIsochronClock);
    let m = Model::preset(kind)?;
    let opts = TransformOptions::for_kind(kind);
    let a = &analyze_model(&m, &CycleOptions::default())?[0];
    let f = m.uncoupled_field(0);
    let samples = sample_reduced(&f, &a.cycle, a.floquet.lambda, &opts.grid, &opts.averaging)?;
    let ts = fit_transforms(
        &samples,
        &a.cycle,
        &opts.inverse,
        &opts.forward,
        &opts.kappa,
    )?;
    let grid = interior_grid(&ts, &a.cycle, 15);
    let pde = pde_residuals(&ts, &f, &grid, a.cycle.omega, a.floquet.lambda);
    println!(
        "{}: {} samples, σ range [{:.3}, {:.3}]",
        kind.name(),
        samples.len(),
        ts.domain.sigma_lo,
        ts.domain.sigma_hi
    );
    println!(
        "invariance residuals: phase {:.2e}, amplitude {:.2e}",
        pde.phase, pde.amplitude
    );
    println!("composition error {:.2e}", composition_error(&ts, &grid));
    for r in [0.85, 1.0, 1.15] {
        let th = 0.7;
        let (phi, sigma) = (ts.phi(th, r), ts.sigma(th, r));
        let back = ts.forward(phi, sigma);
        println!(
            "(θ, r) = ({th}, {r}) → (φ, σ) = ({phi:.5}, {sigma:+.5}) → ({:.5}, {:.5})",
            back.0, back.1
        );
    }
    Ok(())
}

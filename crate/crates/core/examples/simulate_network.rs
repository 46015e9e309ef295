//! Integrate a coupled pair with fixed-step RK4 and print the observable
//! angles and radii.
//!
//!     cargo run --release --example simulate_network -- [ric|canonical|vdp|wc]

use pharec::models::{eval_model_vf, Model, ModelKind};
use pharec::ode::integrate_system;

fn main() -> pharec::Result<()> {
    let kind = std::env::args()
        .nth(1)
        .map(|s| ModelKind::parse(&s))
        .transpose()?
        .unwrap_or(ModelKind::Canonical);
    let model = Model::preset(kind)?;
    let start = [[0.0, 1.2], [2.0, 0.8]];
    let x0: Vec<f64> = start
        .iter()
        .enumerate()
        .flat_map(|(i, s)| model.from_observable(i, *s))
        .collect();
    let traj = integrate_system(|x, dx| model.native_rhs(x, dx), &x0, 20.0, 1e-3, 1000)?;
    println!(
        "{}: {} oscillators, coupling {:?}",
        kind.name(),
        model.len(),
        model.spec.coupling
    );
    println!(
        "{:>6} {:>9} {:>9} {:>9} {:>9}",
        "t", "theta_1", "r_1", "theta_2", "r_2"
    );
    for (k, t) in traj.times.iter().enumerate() {
        let row = traj.row(k);
        let obs: Vec<_> = (0..2)
            .map(|i| model.to_observable(i, [row[2 * i], row[2 * i + 1]]))
            .collect();
        println!(
            "{t:6.2} {:9.4} {:9.4} {:9.4} {:9.4}",
            obs[0][0].rem_euclid(std::f64::consts::TAU),
            obs[0][1],
            obs[1][0].rem_euclid(std::f64::consts::TAU),
            obs[1][1]
        );
    }
    let v = eval_model_vf(&model, &[[0.0, 1.0], [std::f64::consts::FRAC_PI_2, 1.0]])?;
    println!("polar velocity at (0,1),(π/2,1): {v:?}");
    Ok(())
}

//! Limit cycle, period and Floquet exponent for every model, two ways.

use pharec::averaging::lambda_log_slope;
use pharec::limit_cycle::{analyze_model, CycleOptions};
use pharec::models::{Model, ModelKind};

fn main() -> pharec::Result<()> {
    println!(
        "{:<22} {:>3} {:>9} {:>9} {:>10} {:>10} {:>9}",
        "model", "osc", "period", "radius", "λ monodr.", "λ slope", "multiplier"
    );
    for kind in ModelKind::all() {
        let m = Model::preset(kind)?;
        for (i, a) in analyze_model(&m, &CycleOptions::default())?
            .iter()
            .enumerate()
        {
            let slope = lambda_log_slope(&m.uncoupled_field(i), &a.cycle, 1.05)?;
            let (lo, hi) = a.cycle.gamma_range();
            println!(
                "{:<22} {:>3} {:9.5} {:4.2}-{:4.2} {:10.5} {:10.5} {:9.2e}",
                kind.name(),
                i + 1,
                a.cycle.period,
                lo,
                hi,
                a.floquet.lambda,
                slope,
                a.floquet.multipliers[1]
            );
        }
    }
    Ok(())
}

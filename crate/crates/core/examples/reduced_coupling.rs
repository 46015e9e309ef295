//! Coupling functions in phase-amplitude coordinates, from the closed-form
//! transforms of the radial isochron clock, laid out as heatmap panels.

use pharec::basis::PairBasisSpec;
use pharec::coupling::{
    fit_reduced_coupling, heatmap_layout, reduced_coupling_samples, sample_evaluation_grid,
    Equation, RadiusStats, ReducedCoupling, ReducedFrame,
};
use pharec::models::{Model, ModelKind};
use pharec::ridge::KappaPolicy;

fn main() -> pharec::Result<()> {
    let m = Model::preset(ModelKind::RadialIsochronClock)?;
    let g = [m.analytic(0)?, m.analytic(1)?];
    let stats = RadiusStats { lo: 0.92, hi: 1.08 };
    let grid = sample_evaluation_grid(stats, stats, 4000, 3)?;
    let fi = ReducedFrame {
        inverse: &g[1],
        sigma_range: None,
    };
    let fj = ReducedFrame {
        inverse: &g[0],
        sigma_range: None,
    };
    let samples = reduced_coupling_samples(&m, &fi, &fj, 1, 0, &grid.points, 0.1);
    let pair = fit_reduced_coupling(
        &samples,
        &PairBasisSpec::reduced(2, 2, 2),
        &KappaPolicy::default(),
        false,
        1,
        0,
    )?;
    let rc = ReducedCoupling {
        omega: vec![1.0, 1.0],
        lambda: vec![g[0].lambda(), g[1].lambda()],
        pairs: vec![pair],
    };
    for eq in [Equation::Phase, Equation::Amplitude] {
        let h = heatmap_layout(&rc, (1, 0), eq)?;
        let p = &h.panels[0];
        println!("{eq:?} equation, σ1^0 σ2^0 panel");
        print!("{:>12}", "");
        for c in &p.columns {
            print!("{c:>12}");
        }
        println!();
        for (label, row) in p.rows.iter().zip(&p.cells) {
            print!("{label:>12}");
            for v in row {
                print!("{v:12.4}");
            }
            println!();
        }
    }
    Ok(())
}

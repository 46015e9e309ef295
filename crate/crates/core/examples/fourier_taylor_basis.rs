//! Enumerate Fourier-Taylor bases and evaluate a series with its gradient.

use pharec::basis::{BasisSpec, FittedSeries, PairBasisSpec, SingleBasisSpec, Trig};

fn main() -> pharec::Result<()> {
    let single = SingleBasisSpec::new(3, 2);
    println!(
        "single basis (3 powers, 2 harmonics): {} terms",
        single.size()
    );
    for k in 0..single.size() {
        print!("{} ", single.label(k));
    }
    println!();

    // r(1 - r^2) + 0.2 r cos(2θ)
    let mut q = vec![0.0; single.size()];
    q[single.index(1, 0, Trig::Const)] = 1.0;
    q[single.index(3, 0, Trig::Const)] = -1.0;
    q[single.index(1, 2, Trig::Cos)] = 0.2;
    let (v, da, dr) = single.eval_grad(&q, 0.3, 1.1);
    println!("f(0.3, 1.1) = {v:.6}, df/dθ = {da:.6}, df/dr = {dr:.6}");

    for pair in [
        PairBasisSpec::observable(2, 2, 2),
        PairBasisSpec::reduced(2, 2, 2),
    ] {
        println!(
            "{:?} pair basis: {} terms, amplitude powers {:?}",
            pair.mode,
            pair.size(),
            pair.amplitude_terms()
        );
    }
    let s = FittedSeries::new(BasisSpec::Single(single), q)?;
    println!("sup-norm of the coefficient vector: {}", s.sup_norm());
    Ok(())
}

//! Ridge regression with the regularization picked by generalized
//! cross-validation, on a noisy overcomplete polynomial fit.

use nalgebra::DMatrix;
use pharec::ridge::{gcv_score, ridge_fit, KappaPolicy, SvdContext};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> pharec::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 80;
    let xs: Vec<f64> = (0..n)
        .map(|k| -1.0 + 2.0 * k as f64 / (n - 1) as f64)
        .collect();
    let y: Vec<f64> = xs
        .iter()
        .map(|x| (2.0 * x).sin() + 0.05 * rng.gen_range(-1.0..1.0))
        .collect();
    let design = DMatrix::from_fn(n, 15, |r, c| xs[r].powi(c as i32));

    let ctx = SvdContext::new(&design, &[&y])?;
    println!(
        "rank {} of {}, σ_max {:.3e}, σ_min {:.3e}",
        ctx.rank(),
        ctx.n_cols,
        ctx.singular_values[0],
        ctx.singular_values.last().unwrap()
    );
    for k in [1e-10, 1e-6, 1e-3, 1e-1, 10.0] {
        println!(
            "κ = {k:8.1e}  GCV = {:.4e}  dof = {:.2}",
            gcv_score(&ctx, 0, k)?,
            ctx.effective_dof(k)
        );
    }
    let fit = ridge_fit(&design, &y, &KappaPolicy::default())?;
    println!(
        "GCV choice κ = {:.3e}, residual norm {:.4}, dof {:.2}",
        fit.kappa, fit.residual_norm, fit.effective_dof
    );
    let ols = ridge_fit(&design, &y, &KappaPolicy::Fixed(0.0))?;
    let norm = |q: &[f64]| q.iter().map(|v| v * v).sum::<f64>().sqrt();
    println!(
        "coefficient norm: ridge {:.3}, least squares {:.3}",
        norm(&fit.coefficients),
        norm(&ols.coefficients)
    );
    Ok(())
}

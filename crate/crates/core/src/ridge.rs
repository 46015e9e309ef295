//! Ridge regression through the SVD of the design, with the regularization
//! chosen by a generalized cross-validation grid scan.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaPolicy {
    Fixed(f64),
    /// Explicit candidates; an empty list means the default grid.
    GcvGrid(Vec<f64>),
}

impl Default for KappaPolicy {
    fn default() -> Self {
        KappaPolicy::GcvGrid(Vec::new())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RidgeFit {
    pub coefficients: Vec<f64>,
    pub kappa: f64,
    pub gcv_value: f64,
    pub effective_dof: f64,
    pub singular_values: Vec<f64>,
    pub residual_norm: f64,
}

/// SVD of the design projected onto one or more targets.
#[derive(Clone, Debug)]
pub struct SvdContext {
    pub n_rows: usize,
    pub n_cols: usize,
    pub singular_values: Vec<f64>,
    v: DMatrix<f64>,
    /// `Uᵀy` per target.
    proj: Vec<Vec<f64>>,
    /// Squared norm of the part of `y` outside the column span of `U`.
    perp2: Vec<f64>,
    tol: f64,
}

impl SvdContext {
    pub fn new(design: &DMatrix<f64>, targets: &[&[f64]]) -> Result<Self> {
        let (n, m) = design.shape();
        if n == 0 || m == 0 {
            return Err(Error::ShapeMismatch(format!("design is {n}x{m}")));
        }
        for t in targets {
            if t.len() != n {
                return Err(Error::ShapeMismatch(format!(
                    "{} targets for {} rows",
                    t.len(),
                    n
                )));
            }
        }
        if design.iter().any(|v| !v.is_finite())
            || targets.iter().any(|t| t.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::DegenerateDesign);
        }
        let nt = targets.len();
        let ymat = DMatrix::from_fn(n, nt, |r, c| targets[c][r]);

        let (sing, u_t_y, v, perp2) = if n > 2 * m {
            let qr = design.clone().qr();
            let r = qr.r();
            let mut qty = ymat.clone();
            qr.q_tr_mul(&mut qty);
            let perp2: Vec<f64> = (0..nt)
                .map(|c| qty.view((m, c), (n - m, 1)).norm_squared())
                .collect();
            let head = qty.rows(0, m).into_owned();
            let svd = r.svd(true, true);
            let u = svd.u.expect("u requested");
            let vt = svd.v_t.expect("v requested");
            (
                svd.singular_values,
                u.transpose() * head,
                vt.transpose(),
                perp2,
            )
        } else {
            let svd = design.clone().svd(true, true);
            let u = svd.u.expect("u requested");
            let vt = svd.v_t.expect("v requested");
            let uty = u.transpose() * &ymat;
            let resid = &ymat - &u * &uty;
            let perp2 = (0..nt).map(|c| resid.column(c).norm_squared()).collect();
            (svd.singular_values, uty, vt.transpose(), perp2)
        };

        let p = sing.len();
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| sing[b].partial_cmp(&sing[a]).unwrap().then(a.cmp(&b)));
        let singular_values: Vec<f64> = order.iter().map(|&i| sing[i].max(0.0)).collect();
        let v = DMatrix::from_fn(m, p, |r, c| v[(r, order[c])]);
        let proj = (0..nt)
            .map(|c| order.iter().map(|&i| u_t_y[(i, c)]).collect())
            .collect();
        let tol = 1e-14 * n.max(m) as f64 * singular_values[0];
        Ok(SvdContext {
            n_rows: n,
            n_cols: m,
            singular_values,
            v,
            proj,
            perp2,
            tol,
        })
    }

    pub fn rank(&self) -> usize {
        self.singular_values
            .iter()
            .filter(|&&s| s > self.tol && s > 0.0)
            .count()
    }

    fn filter(&self, s: f64, kappa: f64) -> f64 {
        if s <= self.tol || s == 0.0 {
            0.0
        } else {
            s * s / (s * s + kappa)
        }
    }

    pub fn effective_dof(&self, kappa: f64) -> f64 {
        let sum: f64 = self
            .singular_values
            .iter()
            .map(|&s| self.filter(s, kappa))
            .sum();
        self.n_rows as f64 - sum
    }

    pub fn residual2(&self, target: usize, kappa: f64) -> f64 {
        let mut acc = self.perp2[target];
        for (l, &s) in self.singular_values.iter().enumerate() {
            let w = 1.0 - self.filter(s, kappa);
            acc += (w * self.proj[target][l]).powi(2);
        }
        acc
    }

    pub fn coefficients(&self, target: usize, kappa: f64) -> Vec<f64> {
        let p = self.singular_values.len();
        let mut w = DVector::zeros(p);
        for l in 0..p {
            let s = self.singular_values[l];
            if s > self.tol && s > 0.0 {
                w[l] = s / (s * s + kappa) * self.proj[target][l];
            }
        }
        (&self.v * w).iter().copied().collect()
    }

    pub fn default_grid(&self) -> Vec<f64> {
        let s1 = self.singular_values[0];
        let lo = (1e-10 * s1 * s1).ln();
        let hi = (1e2 * s1 * s1).ln();
        let mut grid: Vec<f64> = (0..40)
            .map(|i| (lo + (hi - lo) * i as f64 / 39.0).exp())
            .collect();
        if self.rank() == self.n_cols && self.n_rows > self.n_cols {
            grid.insert(0, 0.0);
        }
        grid
    }
}

/// `‖Ψq − y‖² / τ²` for target `target` of the context.
pub fn gcv_score(ctx: &SvdContext, target: usize, kappa: f64) -> Result<f64> {
    let tau = ctx.effective_dof(kappa);
    if tau <= 1e-12 {
        return Err(Error::ZeroDof);
    }
    Ok(ctx.residual2(target, kappa) / (tau * tau))
}

pub fn ridge_fit(design: &DMatrix<f64>, targets: &[f64], policy: &KappaPolicy) -> Result<RidgeFit> {
    Ok(ridge_fit_multi(design, &[targets], policy)?.remove(0))
}

/// Fits several targets sharing one design factorization; each target
/// gets its own GCV choice.
pub fn ridge_fit_multi(
    design: &DMatrix<f64>,
    targets: &[&[f64]],
    policy: &KappaPolicy,
) -> Result<Vec<RidgeFit>> {
    let ctx = SvdContext::new(design, targets)?;
    if ctx.singular_values[0] == 0.0 {
        return Err(Error::DegenerateDesign);
    }
    let mut out = Vec::with_capacity(targets.len());
    for (t, y) in targets.iter().enumerate() {
        let (kappa, gcv_value) = match policy {
            KappaPolicy::Fixed(k) => {
                if !(*k >= 0.0) {
                    return Err(Error::invalid_config("kappa", "must be non-negative"));
                }
                let g = gcv_score(&ctx, t, *k).unwrap_or(f64::NAN);
                (*k, g)
            }
            KappaPolicy::GcvGrid(cands) => {
                let grid = if cands.is_empty() {
                    ctx.default_grid()
                } else {
                    cands.clone()
                };
                if grid.iter().any(|k| !(*k >= 0.0)) {
                    return Err(Error::invalid_config(
                        "kappa",
                        "candidates must be non-negative",
                    ));
                }
                let mut best: Option<(f64, f64)> = None;
                for &k in &grid {
                    let g = match gcv_score(&ctx, t, k) {
                        Ok(g) => g,
                        Err(Error::ZeroDof) => continue,
                        Err(e) => return Err(e),
                    };
                    best = match best {
                        None => Some((k, g)),
                        Some((bk, bg)) => {
                            let tie = (g - bg).abs() <= 1e-12 * bg.abs().max(f64::MIN_POSITIVE);
                            if g < bg && !tie || tie && k > bk {
                                Some((k, g))
                            } else {
                                Some((bk, bg))
                            }
                        }
                    };
                }
                best.ok_or(Error::ZeroDof)?
            }
        };
        let coefficients = ctx.coefficients(t, kappa);
        let q = DVector::from_column_slice(&coefficients);
        let resid = design * q - DVector::from_column_slice(y);
        out.push(RidgeFit {
            coefficients,
            kappa,
            gcv_value,
            effective_dof: ctx.effective_dof(kappa),
            singular_values: ctx.singular_values.clone(),
            residual_norm: resid.norm(),
        });
    }
    Ok(out)
}

/// Ridge on the design with columns rescaled to unit RMS; coefficients are
/// mapped back to the original columns. The penalty acts on the rescaled
/// coefficients.
pub fn ridge_fit_multi_equilibrated(
    design: &DMatrix<f64>,
    targets: &[&[f64]],
    policy: &KappaPolicy,
) -> Result<Vec<RidgeFit>> {
    let n = design.nrows().max(1) as f64;
    let scale: Vec<f64> = design
        .column_iter()
        .map(|c| {
            let s = (c.norm_squared() / n).sqrt();
            if s > 0.0 && s.is_finite() {
                s
            } else {
                1.0
            }
        })
        .collect();
    let mut scaled = design.clone();
    for (j, s) in scale.iter().enumerate() {
        scaled.column_mut(j).scale_mut(1.0 / s);
    }
    let mut fits = ridge_fit_multi(&scaled, targets, policy)?;
    for f in &mut fits {
        for (c, s) in f.coefficients.iter_mut().zip(&scale) {
            *c /= s;
        }
    }
    Ok(fits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, m: usize, seed: u64) -> (DMatrix<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(n, m, |_, _| rng.gen_range(-1.0..1.0));
        let y = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        (a, y)
    }

    fn normal_equations(a: &DMatrix<f64>, y: &[f64], kappa: f64) -> Vec<f64> {
        let m = a.ncols();
        let lhs = a.transpose() * a + DMatrix::identity(m, m) * kappa;
        let rhs = a.transpose() * DVector::from_column_slice(y);
        lhs.lu().solve(&rhs).unwrap().iter().copied().collect()
    }

    #[test]
    fn identity_closed_form() {
        let y = vec![1.0, -2.0, 0.5, 3.0];
        let fit = ridge_fit(&DMatrix::identity(4, 4), &y, &KappaPolicy::Fixed(0.5)).unwrap();
        for (q, y) in fit.coefficients.iter().zip(&y) {
            assert!((q - y / 1.5).abs() < 1e-12);
        }
    }

    #[test]
    fn kappa_zero_is_ols() {
        for (n, seed) in [(30, 1), (200, 2)] {
            let (a, y) = random(n, 8, seed);
            let fit = ridge_fit(&a, &y, &KappaPolicy::Fixed(0.0)).unwrap();
            let ols = normal_equations(&a, &y, 0.0);
            for (q, o) in fit.coefficients.iter().zip(&ols) {
                assert!((q - o).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn identity_gcv_constant() {
        let y = [1.0, 2.0, -1.0, 0.3, 0.7];
        let ctx = SvdContext::new(&DMatrix::identity(5, 5), &[&y]).unwrap();
        let expect = y.iter().map(|v| v * v).sum::<f64>() / 25.0;
        for k in [1e-3, 0.1, 1.0, 10.0, 1e4] {
            assert!((gcv_score(&ctx, 0, k).unwrap() - expect).abs() < 1e-10);
        }
        assert_eq!(gcv_score(&ctx, 0, 0.0), Err(Error::ZeroDof));
    }

    #[test]
    fn identity_gcv_value() {
        let y = [1.0, 1.0, 1.0];
        let ctx = SvdContext::new(&DMatrix::identity(3, 3), &[&y]).unwrap();
        assert!((gcv_score(&ctx, 0, 1.0).unwrap() - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn exact_fit_gcv_vanishes() {
        let (a, _) = random(60, 5, 3);
        let y: Vec<f64> = (a.clone() * DVector::from_vec(vec![1.0, -2.0, 0.5, 0.0, 3.0]))
            .iter()
            .copied()
            .collect();
        let ctx = SvdContext::new(&a, &[&y]).unwrap();
        assert!(gcv_score(&ctx, 0, 0.0).unwrap() < 1e-20);
        assert!(gcv_score(&ctx, 0, 1e-10).unwrap() < 1e-16);
        let fit = ridge_fit(&a, &y, &KappaPolicy::default()).unwrap();
        assert!(fit.residual_norm < 1e-9);
    }

    #[test]
    fn huge_kappa_limit() {
        let (a, y) = random(40, 6, 4);
        let ctx = SvdContext::new(&a, &[&y]).unwrap();
        let expect = y.iter().map(|v| v * v).sum::<f64>() / 1600.0;
        let g = gcv_score(&ctx, 0, 1e12).unwrap();
        assert!((g - expect).abs() / expect < 1e-6);
    }

    #[test]
    fn svd_matches_normal_equations() {
        for seed in 0..5 {
            let (a, y) = random(50, 20, 10 + seed);
            for k in [0.0, 1e-3, 0.7] {
                let fit = ridge_fit(&a, &y, &KappaPolicy::Fixed(k)).unwrap();
                let ne = normal_equations(&a, &y, k);
                for (q, o) in fit.coefficients.iter().zip(&ne) {
                    assert!((q - o).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn degenerate_and_shape() {
        let z = DMatrix::zeros(4, 3);
        assert_eq!(
            ridge_fit(&z, &[1.0; 4], &KappaPolicy::Fixed(0.0)),
            Err(Error::DegenerateDesign)
        );
        assert!(matches!(
            ridge_fit(
                &DMatrix::identity(3, 3),
                &[1.0; 4],
                &KappaPolicy::Fixed(0.0)
            ),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn gcv_tie_prefers_larger_kappa() {
        let y = [1.0, 2.0, 3.0];
        let fit = ridge_fit(
            &DMatrix::identity(3, 3),
            &y,
            &KappaPolicy::GcvGrid(vec![0.1, 1.0, 5.0]),
        )
        .unwrap();
        assert_eq!(fit.kappa, 5.0);
    }

    #[test]
    fn multi_target_matches_single() {
        let (a, y1) = random(120, 10, 7);
        let (_, y2) = random(120, 10, 8);
        let multi = ridge_fit_multi(&a, &[&y1, &y2], &KappaPolicy::default()).unwrap();
        let s1 = ridge_fit(&a, &y1, &KappaPolicy::default()).unwrap();
        let s2 = ridge_fit(&a, &y2, &KappaPolicy::default()).unwrap();
        assert_eq!(multi[0], s1);
        assert_eq!(multi[1], s2);
    }
}

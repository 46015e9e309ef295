//! Real Fourier-Taylor bases.
//!
//! Single basis enumeration: for each power `n = 0..=N_n` a block of
//! `2·N_k + 1` angular factors ordered `1, cos θ, sin θ, cos 2θ, sin 2θ, …`.
//!
//! Pair basis enumeration: amplitude factor (outermost), then the own
//! factor `1, cos θ_i, sin θ_i, …, sin N_ki θ_i`, then the input factor
//! `cos θ_j, sin θ_j, …, sin N_kj θ_j` (innermost). Observable amplitude
//! factors are `r_i^l r_j^(m−l)` ordered by `m` then `l`; reduced ones are
//! `σ_i^n_i σ_j^n_j` ordered by `n_i` then `n_j`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_HARMONIC: usize = 32;
pub const MAX_POWER: usize = 16;
pub const ENUMERATION_VERSION: &str = "pharec-basis-v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Trig {
    Const,
    Cos,
    Sin,
}

/// `cos kθ`, `sin kθ` for `k = 0..=K` by angle addition.
#[derive(Clone, Copy)]
pub(crate) struct Harmonics {
    pub c: [f64; MAX_HARMONIC + 1],
    pub s: [f64; MAX_HARMONIC + 1],
}

impl Harmonics {
    #[inline]
    pub fn new(theta: f64, k: usize) -> Self {
        let mut c = [0.0; MAX_HARMONIC + 1];
        let mut s = [0.0; MAX_HARMONIC + 1];
        c[0] = 1.0;
        if k >= 1 {
            let (s1, c1) = theta.sin_cos();
            c[1] = c1;
            s[1] = s1;
            for n in 2..=k {
                c[n] = c[n - 1] * c1 - s[n - 1] * s1;
                s[n] = s[n - 1] * c1 + c[n - 1] * s1;
            }
        }
        Harmonics { c, s }
    }

    /// Factor `h` in `1, cos, sin, cos 2, …` order and its angle derivative.
    #[inline]
    pub fn factor(&self, h: usize) -> (f64, f64) {
        if h == 0 {
            return (1.0, 0.0);
        }
        let k = h.div_ceil(2);
        if h % 2 == 1 {
            (self.c[k], -(k as f64) * self.s[k])
        } else {
            (self.s[k], k as f64 * self.c[k])
        }
    }
}

#[inline]
fn powers(r: f64, n: usize) -> ([f64; MAX_POWER + 1], [f64; MAX_POWER + 1]) {
    let mut p = [0.0; MAX_POWER + 1];
    let mut d = [0.0; MAX_POWER + 1];
    p[0] = 1.0;
    for i in 1..=n {
        p[i] = p[i - 1] * r;
        d[i] = i as f64 * p[i - 1];
    }
    (p, d)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SingleBasisSpec {
    pub n_powers: usize,
    pub n_harmonics: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SingleTerm {
    pub power: usize,
    pub harmonic: usize,
    pub trig: Trig,
}

impl SingleBasisSpec {
    pub fn new(n_powers: usize, n_harmonics: usize) -> Self {
        SingleBasisSpec {
            n_powers,
            n_harmonics,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_powers > MAX_POWER || self.n_harmonics > MAX_HARMONIC {
            return Err(Error::invalid_config(
                "basis",
                format!("orders exceed caps ({MAX_POWER}, {MAX_HARMONIC})"),
            ));
        }
        Ok(())
    }

    fn block(&self) -> usize {
        2 * self.n_harmonics + 1
    }

    pub fn size(&self) -> usize {
        (self.n_powers + 1) * self.block()
    }

    pub fn index(&self, power: usize, harmonic: usize, trig: Trig) -> usize {
        let h = match (harmonic, trig) {
            (0, _) => 0,
            (k, Trig::Cos) => 2 * k - 1,
            (k, Trig::Sin) => 2 * k,
            (_, Trig::Const) => panic!("constant term has harmonic 0"),
        };
        power * self.block() + h
    }

    pub fn term(&self, index: usize) -> SingleTerm {
        let power = index / self.block();
        let h = index % self.block();
        if h == 0 {
            SingleTerm {
                power,
                harmonic: 0,
                trig: Trig::Const,
            }
        } else {
            let harmonic = h.div_ceil(2);
            let trig = if h % 2 == 1 { Trig::Cos } else { Trig::Sin };
            SingleTerm {
                power,
                harmonic,
                trig,
            }
        }
    }

    pub fn fill_row(&self, angle: f64, radius: f64, out: &mut [f64]) {
        let h = Harmonics::new(angle, self.n_harmonics);
        let (p, _) = powers(radius, self.n_powers);
        let b = self.block();
        for n in 0..=self.n_powers {
            for j in 0..b {
                out[n * b + j] = p[n] * h.factor(j).0;
            }
        }
    }

    pub fn row(&self, angle: f64, radius: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.size()];
        self.fill_row(angle, radius, &mut out);
        out
    }

    #[inline]
    pub fn eval(&self, coeffs: &[f64], angle: f64, radius: f64) -> f64 {
        self.eval_grad(coeffs, angle, radius).0
    }

    /// Value, `∂/∂angle`, `∂/∂radius`.
    #[inline]
    pub fn eval_grad(&self, coeffs: &[f64], angle: f64, radius: f64) -> (f64, f64, f64) {
        let h = Harmonics::new(angle, self.n_harmonics);
        let (p, dp) = powers(radius, self.n_powers);
        let b = self.block();
        let (mut v, mut da, mut dr) = (0.0, 0.0, 0.0);
        for n in 0..=self.n_powers {
            let (mut f, mut fa) = (0.0, 0.0);
            for j in 0..b {
                let q = coeffs[n * b + j];
                let (x, dx) = h.factor(j);
                f += q * x;
                fa += q * dx;
            }
            v += p[n] * f;
            da += p[n] * fa;
            dr += dp[n] * f;
        }
        (v, da, dr)
    }

    /// Two series sharing this spec, evaluated together.
    #[inline]
    pub fn eval2(&self, ca: &[f64], cb: &[f64], angle: f64, radius: f64) -> (f64, f64) {
        let h = Harmonics::new(angle, self.n_harmonics);
        let (p, _) = powers(radius, self.n_powers);
        let b = self.block();
        let (mut va, mut vb) = (0.0, 0.0);
        for n in 0..=self.n_powers {
            let (mut fa, mut fb) = (0.0, 0.0);
            for j in 0..b {
                let x = h.factor(j).0;
                fa += ca[n * b + j] * x;
                fb += cb[n * b + j] * x;
            }
            va += p[n] * fa;
            vb += p[n] * fb;
        }
        (va, vb)
    }

    pub fn label(&self, index: usize) -> String {
        let t = self.term(index);
        let amp = match t.power {
            0 => String::new(),
            1 => "r ".to_string(),
            n => format!("r^{n} "),
        };
        let ang = match (t.trig, t.harmonic) {
            (Trig::Const, _) => "1".to_string(),
            (Trig::Cos, 1) => "cos(t)".to_string(),
            (Trig::Sin, 1) => "sin(t)".to_string(),
            (Trig::Cos, k) => format!("cos({k}t)"),
            (Trig::Sin, k) => format!("sin({k}t)"),
        };
        format!("{amp}{ang}")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairMode {
    Observable,
    Reduced,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairBasisSpec {
    pub max_power: usize,
    pub own_harmonics: usize,
    pub input_harmonics: usize,
    pub mode: PairMode,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PairTerm {
    pub power_i: usize,
    pub power_j: usize,
    pub own: usize,
    pub input: usize,
}

impl PairBasisSpec {
    pub fn observable(max_power: usize, own_harmonics: usize, input_harmonics: usize) -> Self {
        PairBasisSpec {
            max_power,
            own_harmonics,
            input_harmonics,
            mode: PairMode::Observable,
        }
    }

    pub fn reduced(max_power: usize, own_harmonics: usize, input_harmonics: usize) -> Self {
        PairBasisSpec {
            max_power,
            own_harmonics,
            input_harmonics,
            mode: PairMode::Reduced,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_power > MAX_POWER
            || self.own_harmonics > MAX_HARMONIC
            || self.input_harmonics > MAX_HARMONIC
        {
            return Err(Error::invalid_config("basis", "pair orders exceed caps"));
        }
        if self.input_harmonics == 0 {
            return Err(Error::invalid_config(
                "basis",
                "pair basis needs at least one input harmonic",
            ));
        }
        Ok(())
    }

    /// Amplitude powers `(p_i, p_j)` in enumeration order.
    pub fn amplitude_terms(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        match self.mode {
            PairMode::Observable => {
                for m in 0..=self.max_power {
                    for l in 0..=m {
                        out.push((l, m - l));
                    }
                }
            }
            PairMode::Reduced => {
                for ni in 0..=self.max_power {
                    for nj in 0..=self.max_power {
                        out.push((ni, nj));
                    }
                }
            }
        }
        out
    }

    pub fn n_own(&self) -> usize {
        2 * self.own_harmonics + 1
    }

    pub fn n_input(&self) -> usize {
        2 * self.input_harmonics
    }

    pub fn size(&self) -> usize {
        self.amplitude_terms().len() * self.n_own() * self.n_input()
    }

    pub fn index(&self, amp: usize, own: usize, input: usize) -> usize {
        (amp * self.n_own() + own) * self.n_input() + input
    }

    pub fn term(&self, index: usize) -> PairTerm {
        let amps = self.amplitude_terms();
        let input = index % self.n_input();
        let own = (index / self.n_input()) % self.n_own();
        let amp = index / (self.n_input() * self.n_own());
        PairTerm {
            power_i: amps[amp].0,
            power_j: amps[amp].1,
            own,
            input,
        }
    }

    pub fn fill_row(&self, theta_i: f64, r_i: f64, theta_j: f64, r_j: f64, out: &mut [f64]) {
        let hi = Harmonics::new(theta_i, self.own_harmonics);
        let hj = Harmonics::new(theta_j, self.input_harmonics);
        let (pi, _) = powers(r_i, self.max_power);
        let (pj, _) = powers(r_j, self.max_power);
        let (no, ni) = (self.n_own(), self.n_input());
        let mut idx = 0;
        for (a, b) in self.amplitude_terms() {
            let amp = pi[a] * pj[b];
            for o in 0..no {
                let fo = amp * hi.factor(o).0;
                for k in 0..ni {
                    out[idx] = fo * hj.factor(k + 1).0;
                    idx += 1;
                }
            }
        }
    }

    pub fn row(&self, theta_i: f64, r_i: f64, theta_j: f64, r_j: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.size()];
        self.fill_row(theta_i, r_i, theta_j, r_j, &mut out);
        out
    }

    /// Value and gradient `[∂θ_i, ∂r_i, ∂θ_j, ∂r_j]`.
    pub fn eval_grad(&self, coeffs: &[f64], p: [f64; 4]) -> (f64, [f64; 4]) {
        let hi = Harmonics::new(p[0], self.own_harmonics);
        let hj = Harmonics::new(p[2], self.input_harmonics);
        let (pi, dpi) = powers(p[1], self.max_power);
        let (pj, dpj) = powers(p[3], self.max_power);
        let (no, ni) = (self.n_own(), self.n_input());
        let mut v = 0.0;
        let mut g = [0.0; 4];
        let mut idx = 0;
        for (a, b) in self.amplitude_terms() {
            let amp = pi[a] * pj[b];
            let amp_i = dpi[a] * pj[b];
            let amp_j = pi[a] * dpj[b];
            let (mut s, mut s_ti, mut s_tj) = (0.0, 0.0, 0.0);
            for o in 0..no {
                let (fo, dfo) = hi.factor(o);
                for k in 0..ni {
                    let (fi, dfi) = hj.factor(k + 1);
                    let q = coeffs[idx];
                    idx += 1;
                    s += q * fo * fi;
                    s_ti += q * dfo * fi;
                    s_tj += q * fo * dfi;
                }
            }
            v += amp * s;
            g[0] += amp * s_ti;
            g[1] += amp_i * s;
            g[2] += amp * s_tj;
            g[3] += amp_j * s;
        }
        (v, g)
    }

    pub fn eval(&self, coeffs: &[f64], p: [f64; 4]) -> f64 {
        self.eval_grad(coeffs, p).0
    }

    pub fn own_label(&self, own: usize, var: &str) -> String {
        harmonic_label(own, var)
    }

    pub fn input_label(&self, input: usize, var: &str) -> String {
        harmonic_label(input + 1, var)
    }
}

fn harmonic_label(h: usize, var: &str) -> String {
    if h == 0 {
        return "1".to_string();
    }
    let k = h.div_ceil(2);
    let f = if h % 2 == 1 { "cos" } else { "sin" };
    if k == 1 {
        format!("{f}({var})")
    } else {
        format!("{f}({k}{var})")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BasisSpec {
    Single(SingleBasisSpec),
    Pair(PairBasisSpec),
}

impl BasisSpec {
    pub fn size(&self) -> usize {
        match self {
            BasisSpec::Single(s) => s.size(),
            BasisSpec::Pair(p) => p.size(),
        }
    }

    pub fn arity(&self) -> usize {
        match self {
            BasisSpec::Single(_) => 2,
            BasisSpec::Pair(_) => 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedSeries {
    pub spec: BasisSpec,
    pub coefficients: Vec<f64>,
}

impl FittedSeries {
    pub fn new(spec: BasisSpec, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != spec.size() {
            return Err(Error::ShapeMismatch(format!(
                "{} coefficients for a basis of size {}",
                coefficients.len(),
                spec.size()
            )));
        }
        Ok(FittedSeries { spec, coefficients })
    }

    pub fn zeros(spec: BasisSpec) -> Self {
        FittedSeries {
            spec,
            coefficients: vec![0.0; spec.size()],
        }
    }

    pub fn single_spec(&self) -> Option<&SingleBasisSpec> {
        match &self.spec {
            BasisSpec::Single(s) => Some(s),
            _ => None,
        }
    }

    pub fn pair_spec(&self) -> Option<&PairBasisSpec> {
        match &self.spec {
            BasisSpec::Pair(p) => Some(p),
            _ => None,
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.coefficients.iter().fold(0.0, |m, c| m.max(c.abs()))
    }
}

/// Value and gradient; the gradient has one entry per point coordinate
/// (angle, radius) or (θ_i, r_i, θ_j, r_j).
pub fn series_eval_grad(series: &FittedSeries, point: &[f64]) -> Result<(f64, Vec<f64>)> {
    if point.len() != series.spec.arity() {
        return Err(Error::ArityMismatch {
            expected: series.spec.arity(),
            got: point.len(),
        });
    }
    match &series.spec {
        BasisSpec::Single(s) => {
            let (v, da, dr) = s.eval_grad(&series.coefficients, point[0], point[1]);
            Ok((v, vec![da, dr]))
        }
        BasisSpec::Pair(p) => {
            let (v, g) = p.eval_grad(
                &series.coefficients,
                [point[0], point[1], point[2], point[3]],
            );
            Ok((v, g.to_vec()))
        }
    }
}

pub fn single_row(spec: &SingleBasisSpec, angle: f64, radius: f64) -> Vec<f64> {
    spec.row(angle, radius)
}

pub fn pair_row(spec: &PairBasisSpec, theta_i: f64, r_i: f64, theta_j: f64, r_j: f64) -> Vec<f64> {
    spec.row(theta_i, r_i, theta_j, r_j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn single_row_order() {
        let row = single_row(&SingleBasisSpec::new(1, 1), 0.0, 2.0);
        assert_eq!(row, vec![1.0, 1.0, 0.0, 2.0, 2.0, 0.0]);
    }

    #[test]
    fn zero_radius_row() {
        let s = SingleBasisSpec::new(3, 2);
        let row = s.row(0.7, 0.0);
        for (i, v) in row.iter().enumerate() {
            if s.term(i).power > 0 {
                assert_eq!(*v, 0.0);
            }
        }
        assert!(row[..5].iter().any(|v| *v != 0.0));
    }

    #[test]
    fn periodic_row() {
        let s = SingleBasisSpec::new(4, 5);
        let a = s.row(1.3, 0.9);
        let b = s.row(1.3 + 2.0 * PI, 0.9);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-15 * 4.0);
        }
    }

    #[test]
    fn index_round_trip() {
        for n in 0..=6 {
            for k in 0..=8 {
                let s = SingleBasisSpec::new(n, k);
                for i in 0..s.size() {
                    let t = s.term(i);
                    assert_eq!(s.index(t.power, t.harmonic, t.trig), i);
                }
            }
        }
    }

    #[test]
    fn pair_structure() {
        let p = PairBasisSpec::observable(2, 2, 2);
        assert_eq!(p.size(), 6 * 5 * 4);
        let row = p.row(0.3, 1.1, 0.8, 0.0);
        for (i, v) in row.iter().enumerate() {
            let t = p.term(i);
            if t.power_j > 0 {
                assert_eq!(*v, 0.0);
            }
            assert!(t.power_i + t.power_j <= 2);
        }
        assert!(row.iter().any(|v| *v != 0.0));
        let r2 = p.row(0.3, 1.1, 2.1, 0.0);
        for i in 0..p.size() {
            if p.term(i).power_j == 0 && row[i] != 0.0 {
                assert_ne!(row[i], r2[i]);
            }
        }
        assert_eq!(PairBasisSpec::reduced(2, 2, 2).size(), 9 * 5 * 4);
    }

    #[test]
    fn pair_minimal_row() {
        let p = PairBasisSpec::observable(0, 0, 1);
        let row = p.row(0.4, 1.0, PI / 2.0, 1.3);
        assert_eq!(row.len(), 2);
        assert!(row[0].abs() < 1e-15);
        assert!((row[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn r_cos_theta() {
        let s = SingleBasisSpec::new(1, 1);
        let mut c = vec![0.0; s.size()];
        c[s.index(1, 1, Trig::Cos)] = 1.0;
        let f = FittedSeries::new(BasisSpec::Single(s), c).unwrap();
        let (v, g) = series_eval_grad(&f, &[PI / 2.0, 1.0]).unwrap();
        assert!(v.abs() < 1e-15);
        assert!((g[0] + 1.0).abs() < 1e-15);
        assert!(g[1].abs() < 1e-15);
        assert_eq!(
            series_eval_grad(&f, &[0.0, 1.0, 2.0, 3.0]),
            Err(Error::ArityMismatch {
                expected: 2,
                got: 4
            })
        );
    }

    #[test]
    fn constant_series_zero_grad() {
        let s = SingleBasisSpec::new(3, 4);
        let mut c = vec![0.0; s.size()];
        c[0] = 2.5;
        let f = FittedSeries::new(BasisSpec::Single(s), c).unwrap();
        let (v, g) = series_eval_grad(&f, &[1.1, 0.7]).unwrap();
        assert_eq!(v, 2.5);
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn eval_matches_row_dot() {
        let s = SingleBasisSpec::new(3, 4);
        let c: Vec<f64> = (0..s.size())
            .map(|i| ((i * 7919) % 13) as f64 / 13.0 - 0.5)
            .collect();
        let row = s.row(2.2, 0.8);
        let dot: f64 = row.iter().zip(&c).map(|(a, b)| a * b).sum();
        assert!((s.eval(&c, 2.2, 0.8) - dot).abs() < 1e-13);
        let p = PairBasisSpec::reduced(2, 2, 2);
        let c: Vec<f64> = (0..p.size())
            .map(|i| ((i * 31) % 17) as f64 / 17.0 - 0.5)
            .collect();
        let row = p.row(0.2, -0.1, 4.0, 0.05);
        let dot: f64 = row.iter().zip(&c).map(|(a, b)| a * b).sum();
        assert!((p.eval(&c, [0.2, -0.1, 4.0, 0.05]) - dot).abs() < 1e-13);
    }

    #[test]
    fn labels() {
        let p = PairBasisSpec::reduced(2, 2, 2);
        assert_eq!(p.own_label(1, "phi_i"), "cos(phi_i)");
        assert_eq!(p.input_label(3, "phi_j"), "sin(2phi_j)");
        assert_eq!(SingleBasisSpec::new(2, 2).label(6), "r cos(t)");
    }
}

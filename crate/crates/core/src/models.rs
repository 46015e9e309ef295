//! Benchmark oscillator networks and the closed-form transformations of
//! the two models that have them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limit_cycle::section_return;
use crate::ode::{rk4_step, Coords, Mat2, Planar, PlanarField};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    #[serde(alias = "ric")]
    RadialIsochronClock,
    #[serde(alias = "stuart_landau")]
    Canonical,
    #[serde(alias = "vdp")]
    VanDerPol,
    #[serde(alias = "wc")]
    WilsonCowan,
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::RadialIsochronClock => "radial_isochron_clock",
            ModelKind::Canonical => "canonical",
            ModelKind::VanDerPol => "van_der_pol",
            ModelKind::WilsonCowan => "wilson_cowan",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "radial_isochron_clock" | "ric" => Ok(ModelKind::RadialIsochronClock),
            "canonical" | "stuart_landau" => Ok(ModelKind::Canonical),
            "van_der_pol" | "vdp" => Ok(ModelKind::VanDerPol),
            "wilson_cowan" | "wc" => Ok(ModelKind::WilsonCowan),
            other => Err(Error::UnknownKind(other.to_string())),
        }
    }

    pub fn coords(&self) -> Coords {
        match self {
            ModelKind::RadialIsochronClock | ModelKind::Canonical => Coords::Polar,
            _ => Coords::Cartesian,
        }
    }

    pub fn all() -> [ModelKind; 4] {
        [
            ModelKind::RadialIsochronClock,
            ModelKind::Canonical,
            ModelKind::VanDerPol,
            ModelKind::WilsonCowan,
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OscillatorParams {
    RadialIsochronClock {
        a: f64,
    },
    Canonical {
        alpha: f64,
        a: f64,
    },
    VanDerPol {
        mu: f64,
    },
    WilsonCowan {
        a: f64,
        b: f64,
        c: f64,
        d: f64,
        rho_x: f64,
        rho_y: f64,
    },
}

impl OscillatorParams {
    pub fn kind(&self) -> ModelKind {
        match self {
            OscillatorParams::RadialIsochronClock { .. } => ModelKind::RadialIsochronClock,
            OscillatorParams::Canonical { .. } => ModelKind::Canonical,
            OscillatorParams::VanDerPol { .. } => ModelKind::VanDerPol,
            OscillatorParams::WilsonCowan { .. } => ModelKind::WilsonCowan,
        }
    }
}

/// `coupling[i][j]` is ε_ij, the input of oscillator `j` into oscillator `i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub oscillators: Vec<OscillatorParams>,
    pub coupling: Vec<Vec<f64>>,
}

impl ModelSpec {
    pub fn radial_isochron_clock() -> Self {
        ModelSpec {
            kind: ModelKind::RadialIsochronClock,
            oscillators: vec![
                OscillatorParams::RadialIsochronClock { a: 1.0 },
                OscillatorParams::RadialIsochronClock { a: 0.7 },
            ],
            coupling: vec![vec![0.0, 0.0], vec![0.3, 0.0]],
        }
    }

    pub fn canonical() -> Self {
        ModelSpec {
            kind: ModelKind::Canonical,
            oscillators: vec![
                OscillatorParams::Canonical { alpha: 1.5, a: 1.2 },
                OscillatorParams::Canonical { alpha: 2.0, a: 1.0 },
            ],
            coupling: vec![vec![0.0, 0.0], vec![0.3, 0.0]],
        }
    }

    pub fn van_der_pol() -> Self {
        ModelSpec {
            kind: ModelKind::VanDerPol,
            oscillators: vec![
                OscillatorParams::VanDerPol { mu: 0.3 },
                OscillatorParams::VanDerPol { mu: 0.5 },
            ],
            coupling: vec![vec![0.0, 0.0], vec![0.1, 0.0]],
        }
    }

    pub fn wilson_cowan() -> Self {
        let wc = |rho_y| OscillatorParams::WilsonCowan {
            a: 10.0,
            b: 10.0,
            c: 10.0,
            d: -2.0,
            rho_x: 0.0,
            rho_y,
        };
        ModelSpec {
            kind: ModelKind::WilsonCowan,
            oscillators: vec![wc(-6.75), wc(-7.0)],
            coupling: vec![vec![0.0, 0.0], vec![1.0, 0.0]],
        }
    }

    pub fn preset(kind: ModelKind) -> Self {
        match kind {
            ModelKind::RadialIsochronClock => Self::radial_isochron_clock(),
            ModelKind::Canonical => Self::canonical(),
            ModelKind::VanDerPol => Self::van_der_pol(),
            ModelKind::WilsonCowan => Self::wilson_cowan(),
        }
    }

    pub fn uncoupled(mut self) -> Self {
        for row in &mut self.coupling {
            row.iter_mut().for_each(|e| *e = 0.0);
        }
        self
    }

    pub fn len(&self) -> usize {
        self.oscillators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.oscillators.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.oscillators.len();
        if n == 0 {
            return Err(Error::invalid_config(
                "model.oscillators",
                "at least one oscillator required",
            ));
        }
        for (i, p) in self.oscillators.iter().enumerate() {
            if p.kind() != self.kind {
                return Err(Error::UnknownKind(format!(
                    "oscillator {i} has parameters for {} in a {} model",
                    p.kind().name(),
                    self.kind.name()
                )));
            }
            let ok = match *p {
                OscillatorParams::RadialIsochronClock { a } => a > 0.0,
                OscillatorParams::Canonical { alpha, a } => alpha > 0.0 && a.is_finite(),
                OscillatorParams::VanDerPol { mu } => mu > 0.0,
                OscillatorParams::WilsonCowan {
                    a,
                    b,
                    c,
                    d,
                    rho_x,
                    rho_y,
                } => [a, b, c, d, rho_x, rho_y].iter().all(|v| v.is_finite()),
            };
            if !ok {
                return Err(Error::invalid_config(
                    &format!("model.oscillators[{i}]"),
                    "invalid parameters",
                ));
            }
        }
        if self.coupling.len() != n || self.coupling.iter().any(|r| r.len() != n) {
            return Err(Error::invalid_config(
                "model.coupling",
                format!("must be {n}x{n}"),
            ));
        }
        for i in 0..n {
            if self.coupling[i][i] != 0.0 {
                return Err(Error::invalid_config(
                    &format!("model.coupling[{i}][{i}]"),
                    "self-coupling must be zero",
                ));
            }
            if self.coupling[i].iter().any(|e| !e.is_finite()) {
                return Err(Error::invalid_config(
                    &format!("model.coupling[{i}]"),
                    "non-finite entry",
                ));
            }
        }
        Ok(())
    }
}

#[inline]
pub fn logistic(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

fn wc_params(spec: &ModelSpec, i: usize) -> Result<(f64, f64, f64, f64, f64, f64)> {
    match spec.oscillators.get(i) {
        Some(&OscillatorParams::WilsonCowan {
            a,
            b,
            c,
            d,
            rho_x,
            rho_y,
        }) => Ok((a, b, c, d, rho_x, rho_y)),
        Some(p) => Err(Error::UnknownKind(format!(
            "{} is not wilson_cowan",
            p.kind().name()
        ))),
        None => Err(Error::invalid_config(
            "model.oscillators",
            format!("no oscillator {i}"),
        )),
    }
}

/// Fixed point of the uncoupled Wilson-Cowan oscillator by damped Newton
/// iteration from (0.5, 0.5).
pub fn wc_equilibrium(spec: &ModelSpec, i: usize) -> Result<[f64; 2]> {
    let (a, b, c, d, rx, ry) = wc_params(spec, i)?;
    let resid = |p: [f64; 2]| {
        [
            -p[0] + logistic(rx + a * p[0] - b * p[1]),
            -p[1] + logistic(ry + c * p[0] - d * p[1]),
        ]
    };
    let norm = |f: [f64; 2]| f[0].hypot(f[1]);
    let mut p = [0.5, 0.5];
    let mut f = resid(p);
    for _ in 0..200 {
        if norm(f) < 1e-13 {
            return Ok(p);
        }
        let s1 = logistic(rx + a * p[0] - b * p[1]);
        let s2 = logistic(ry + c * p[0] - d * p[1]);
        let d1 = s1 * (1.0 - s1);
        let d2 = s2 * (1.0 - s2);
        let j = [[-1.0 + a * d1, -b * d1], [c * d2, -1.0 - d * d2]];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let dx = -(j[1][1] * f[0] - j[0][1] * f[1]) / det;
        let dy = -(-j[1][0] * f[0] + j[0][0] * f[1]) / det;
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let q = [p[0] + t * dx, p[1] + t * dy];
            let fq = resid(q);
            if norm(fq) < norm(f) || norm(fq) < 1e-13 {
                p = q;
                f = fq;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if norm(f) < 1e-12 {
        Ok(p)
    } else {
        Err(Error::NoConvergence(format!(
            "wilson-cowan equilibrium of oscillator {i}"
        )))
    }
}

/// Polar frame for a Cartesian oscillator: θ = atan2(s·(y − c_y), x − c_x).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableFrame {
    pub center: [f64; 2],
    pub orientation: f64,
}

impl ObservableFrame {
    pub const IDENTITY: ObservableFrame = ObservableFrame {
        center: [0.0, 0.0],
        orientation: 1.0,
    };

    pub fn to_polar(&self, p: Planar) -> Planar {
        let u = p[0] - self.center[0];
        let v = self.orientation * (p[1] - self.center[1]);
        [v.atan2(u), u.hypot(v)]
    }

    pub fn to_cartesian(&self, s: Planar) -> Planar {
        let (sn, cs) = s[0].sin_cos();
        [
            self.center[0] + s[1] * cs,
            self.center[1] + self.orientation * s[1] * sn,
        ]
    }

    /// Converts a Cartesian velocity at polar point `s` to `(θ̇, ṙ)`.
    pub fn velocity_to_polar(&self, s: Planar, v: Planar) -> Planar {
        let (sn, cs) = s[0].sin_cos();
        let du = v[0];
        let dv = self.orientation * v[1];
        [(cs * dv - sn * du) / s[1], cs * du + sn * dv]
    }
}

#[derive(Clone, Debug)]
pub struct Model {
    pub spec: ModelSpec,
    equilibria: Vec<Option<[f64; 2]>>,
    frames: Vec<ObservableFrame>,
}

impl Model {
    pub fn new(spec: ModelSpec) -> Result<Self> {
        spec.validate()?;
        let n = spec.len();
        let mut equilibria = vec![None; n];
        if spec.kind == ModelKind::WilsonCowan {
            for (i, e) in equilibria.iter_mut().enumerate() {
                *e = Some(wc_equilibrium(&spec, i)?);
            }
        }
        let mut model = Model {
            spec,
            equilibria,
            frames: vec![ObservableFrame::IDENTITY; n],
        };
        if model.coords() == Coords::Cartesian {
            for i in 0..n {
                model.frames[i] = model.settle_frame(i)?;
            }
        }
        Ok(model)
    }

    pub fn preset(kind: ModelKind) -> Result<Self> {
        Model::new(ModelSpec::preset(kind))
    }

    pub fn len(&self) -> usize {
        self.spec.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spec.is_empty()
    }

    pub fn kind(&self) -> ModelKind {
        self.spec.kind
    }

    pub fn coords(&self) -> Coords {
        self.spec.kind.coords()
    }

    pub fn frame(&self, i: usize) -> ObservableFrame {
        self.frames[i]
    }

    pub fn equilibrium(&self, i: usize) -> Option<[f64; 2]> {
        self.equilibria[i]
    }

    /// Derivative of oscillator `i` in native coordinates, with input from
    /// the oscillators listed in `inputs`.
    fn native_one(
        &self,
        i: usize,
        s: Planar,
        inputs: impl Iterator<Item = (f64, Planar, usize)>,
    ) -> Planar {
        match self.spec.oscillators[i] {
            OscillatorParams::RadialIsochronClock { a } => {
                let (th, r) = (s[0], s[1]);
                let (si, ci) = th.sin_cos();
                let mut d = [1.0, a * r * (1.0 - r * r)];
                for (eps, sj, _) in inputs {
                    let sinj = sj[0].sin();
                    d[0] += eps * sj[1] / r * ci * sinj;
                    d[1] += eps * si * sj[1] * sinj;
                }
                d
            }
            OscillatorParams::Canonical { alpha, a } => {
                let (th, r) = (s[0], s[1]);
                let (si, ci) = th.sin_cos();
                let mut d = [1.0 + alpha * a * r * r, alpha * r * (1.0 - r * r)];
                for (eps, sj, _) in inputs {
                    let cosj = sj[0].cos();
                    d[0] -= eps * sj[1] / r * si * cosj;
                    d[1] += eps * sj[1] * ci * cosj;
                }
                d
            }
            OscillatorParams::VanDerPol { mu } => {
                let (x, y) = (s[0], s[1]);
                let mut dy = mu * (1.0 - x * x) * y - x;
                for (eps, sj, _) in inputs {
                    dy += eps * sj[0];
                }
                [y, dy]
            }
            OscillatorParams::WilsonCowan {
                a,
                b,
                c,
                d,
                rho_x,
                rho_y,
            } => {
                let (x, y) = (s[0], s[1]);
                let mut drive = 0.0;
                for (eps, sj, j) in inputs {
                    let x0 = self.equilibria[j].map(|e| e[0]).unwrap_or(0.0);
                    drive += eps * (sj[0] - x0);
                }
                [
                    -x + logistic(rho_x + a * x - b * y),
                    -y + logistic(rho_y + c * x - d * y + drive),
                ]
            }
        }
    }

    /// Full network derivative in native coordinates.
    pub fn eval_native(&self, states: &[Planar]) -> Result<Vec<Planar>> {
        if states.len() != self.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} states for {} oscillators",
                states.len(),
                self.len()
            )));
        }
        if self.coords() == Coords::Polar {
            if let Some(s) = states.iter().find(|s| !(s[1] > 0.0)) {
                return Err(Error::NonPositiveRadius(s[1]));
            }
        }
        Ok((0..self.len())
            .map(|i| {
                let inputs = (0..self.len())
                    .filter(move |&j| j != i && self.spec.coupling[i][j] != 0.0)
                    .map(|j| (self.spec.coupling[i][j], states[j], j));
                self.native_one(i, states[i], inputs)
            })
            .collect())
    }

    /// Flat right-hand side `[s_1, s_2, …]` for network integration.
    pub fn native_rhs(&self, x: &[f64], dx: &mut [f64]) {
        let n = self.len();
        for i in 0..n {
            let inputs = (0..n)
                .filter(|&j| j != i && self.spec.coupling[i][j] != 0.0)
                .map(|j| (self.spec.coupling[i][j], [x[2 * j], x[2 * j + 1]], j));
            let d = self.native_one(i, [x[2 * i], x[2 * i + 1]], inputs);
            dx[2 * i] = d[0];
            dx[2 * i + 1] = d[1];
        }
    }

    pub fn to_observable(&self, i: usize, native: Planar) -> Planar {
        match self.coords() {
            Coords::Polar => native,
            Coords::Cartesian => self.frames[i].to_polar(native),
        }
    }

    pub fn from_observable(&self, i: usize, obs: Planar) -> Planar {
        match self.coords() {
            Coords::Polar => obs,
            Coords::Cartesian => self.frames[i].to_cartesian(obs),
        }
    }

    fn native_velocity_to_polar(&self, i: usize, obs: Planar, v: Planar) -> Planar {
        match self.coords() {
            Coords::Polar => v,
            Coords::Cartesian => self.frames[i].velocity_to_polar(obs, v),
        }
    }

    /// Uncoupled `(θ̇, ṙ)` of oscillator `i` in its observable frame.
    pub fn uncoupled_polar(&self, i: usize, obs: Planar) -> Planar {
        let native = self.from_observable(i, obs);
        let v = self.native_one(i, native, std::iter::empty());
        self.native_velocity_to_polar(i, obs, v)
    }

    /// Observable-frame coupling `G_ij` of input `j` into oscillator `i`.
    pub fn coupling_polar(&self, i: usize, j: usize, obs_i: Planar, obs_j: Planar) -> Planar {
        let eps = self.spec.coupling[i][j];
        if eps == 0.0 || i == j {
            return [0.0, 0.0];
        }
        let ni = self.from_observable(i, obs_i);
        let nj = self.from_observable(j, obs_j);
        let full = self.native_one(i, ni, std::iter::once((eps, nj, j)));
        let own = self.native_one(i, ni, std::iter::empty());
        self.native_velocity_to_polar(i, obs_i, [full[0] - own[0], full[1] - own[1]])
    }

    pub fn uncoupled_field(&self, i: usize) -> UncoupledField<'_> {
        UncoupledField {
            model: self,
            index: i,
        }
    }

    pub fn analytic(&self, i: usize) -> Result<AnalyticGroundTruth> {
        analytic_ground_truth(&self.spec, i)
    }

    fn settle_frame(&self, i: usize) -> Result<ObservableFrame> {
        let f = |s: &Planar| self.native_one(i, *s, std::iter::empty());
        let seed = match self.equilibria[i] {
            Some(e) => [e[0] + 0.05, e[1] + 0.05],
            None => [2.0, 0.0],
        };
        let h = 1e-3;
        let mut x = seed;
        for _ in 0..150_000 {
            x = rk4_step(&f, &x, h);
        }
        let mut c = [0.0, 0.0];
        let mut y = x;
        let m = 30_000;
        let mut ang = 0.0;
        for _ in 0..m {
            y = rk4_step(&f, &y, h);
            c[0] += y[0] / m as f64;
            c[1] += y[1] / m as f64;
        }
        let provisional = ObservableFrame {
            center: c,
            orientation: 1.0,
        };
        let mut prev = provisional.to_polar(y);
        for _ in 0..m {
            y = rk4_step(&f, &y, h);
            let cur = provisional.to_polar(y);
            ang += wrap_pi(cur[0] - prev[0]);
            prev = cur;
        }
        let orientation = if ang >= 0.0 { 1.0 } else { -1.0 };
        let frame = ObservableFrame {
            center: c,
            orientation,
        };
        let field = |s: Planar| frame.velocity_to_polar(s, f(&frame.to_cartesian(s)));
        let start = frame.to_polar(y);
        let (_, s0) = section_return(&field, start, h, 1_000_000)?;
        let (t, _) = section_return(&field, s0, h, 1_000_000)?;
        let n = 4000;
        let dt = t / n as f64;
        let mut z = frame.to_cartesian(s0);
        let mut mean = [0.0, 0.0];
        for _ in 0..n {
            mean[0] += z[0] / n as f64;
            mean[1] += z[1] / n as f64;
            z = rk4_step(&f, &z, dt);
        }
        let centered = ObservableFrame {
            center: mean,
            orientation,
        };
        let mut zz = frame.to_cartesian(s0);
        let mut winding = 0.0;
        let mut prev = centered.to_polar(zz);
        for _ in 0..n {
            zz = rk4_step(&f, &zz, dt);
            let cur = centered.to_polar(zz);
            let dth = wrap_pi(cur[0] - prev[0]);
            if dth <= 0.0 {
                return Err(Error::NoConvergence(format!(
                    "cycle of oscillator {i} is not star-shaped about its centroid"
                )));
            }
            winding += dth;
            prev = cur;
        }
        if (winding - 2.0 * std::f64::consts::PI).abs() > 1e-3 {
            return Err(Error::NoConvergence(format!(
                "cycle of oscillator {i} does not wind once about its centroid"
            )));
        }
        Ok(centered)
    }
}

pub fn wrap_pi(x: f64) -> f64 {
    use std::f64::consts::PI;
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y == -PI {
        PI
    } else {
        y
    }
}

/// Uncoupled field of one oscillator in its observable polar frame.
pub struct UncoupledField<'a> {
    model: &'a Model,
    index: usize,
}

impl PlanarField for UncoupledField<'_> {
    fn eval(&self, s: Planar) -> Planar {
        self.model.uncoupled_polar(self.index, s)
    }

    fn jacobian(&self, s: Planar) -> Mat2 {
        match self.model.spec.oscillators[self.index] {
            OscillatorParams::RadialIsochronClock { a } => {
                [[0.0, 0.0], [0.0, a * (1.0 - 3.0 * s[1] * s[1])]]
            }
            OscillatorParams::Canonical { alpha, a } => [
                [0.0, 2.0 * alpha * a * s[1]],
                [0.0, alpha * (1.0 - 3.0 * s[1] * s[1])],
            ],
            _ => crate::ode::fd_jacobian(|p| self.eval(p), s, 1e-6),
        }
    }
}

/// Closed-form transformations. `σ` here is the unscaled amplitude of the
/// analytic expressions; `amplitude_scale()` converts to the averaged one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalyticGroundTruth {
    RadialIsochronClock { a: f64 },
    Canonical { alpha: f64, a: f64 },
}

pub fn analytic_ground_truth(spec: &ModelSpec, i: usize) -> Result<AnalyticGroundTruth> {
    match spec.oscillators.get(i) {
        Some(&OscillatorParams::RadialIsochronClock { a }) => {
            Ok(AnalyticGroundTruth::RadialIsochronClock { a })
        }
        Some(&OscillatorParams::Canonical { alpha, a }) => {
            Ok(AnalyticGroundTruth::Canonical { alpha, a })
        }
        Some(p) => Err(Error::NoAnalyticForm(p.kind().name().to_string())),
        None => Err(Error::invalid_config(
            "model.oscillators",
            format!("no oscillator {i}"),
        )),
    }
}

impl AnalyticGroundTruth {
    pub fn rate(&self) -> f64 {
        match *self {
            AnalyticGroundTruth::RadialIsochronClock { a } => a,
            AnalyticGroundTruth::Canonical { alpha, .. } => alpha,
        }
    }

    /// `q^(r)_{1,0}`, the linear coefficient of `K^(r)` in σ.
    pub fn amplitude_scale(&self) -> f64 {
        self.rate()
    }

    pub fn lambda(&self) -> f64 {
        -2.0 * self.rate()
    }

    pub fn omega(&self) -> f64 {
        match *self {
            AnalyticGroundTruth::RadialIsochronClock { .. } => 1.0,
            AnalyticGroundTruth::Canonical { alpha, a } => 1.0 + alpha * a,
        }
    }

    pub fn phi(&self, theta: f64, r: f64) -> f64 {
        match *self {
            AnalyticGroundTruth::RadialIsochronClock { .. } => theta,
            AnalyticGroundTruth::Canonical { a, .. } => theta + a * r.ln(),
        }
    }

    /// `(Φ, ∂Φ/∂θ, ∂Φ/∂r)`.
    pub fn phi_grad(&self, theta: f64, r: f64) -> (f64, f64, f64) {
        match *self {
            AnalyticGroundTruth::RadialIsochronClock { .. } => (theta, 1.0, 0.0),
            AnalyticGroundTruth::Canonical { a, .. } => (theta + a * r.ln(), 1.0, a / r),
        }
    }

    pub fn sigma(&self, theta: f64, r: f64) -> f64 {
        self.sigma_grad(theta, r).0
    }

    /// `(Σ, ∂Σ/∂θ, ∂Σ/∂r)`.
    pub fn sigma_grad(&self, _theta: f64, r: f64) -> (f64, f64, f64) {
        let k = self.rate();
        (
            (1.0 - 1.0 / (r * r)) / (2.0 * k),
            0.0,
            1.0 / (k * r * r * r),
        )
    }

    pub fn k_theta(&self, phi: f64, sigma: f64) -> f64 {
        match *self {
            AnalyticGroundTruth::RadialIsochronClock { .. } => phi,
            AnalyticGroundTruth::Canonical { alpha, a } => {
                phi + 0.5 * a * (1.0 - 2.0 * alpha * sigma).ln()
            }
        }
    }

    pub fn k_r(&self, _phi: f64, sigma: f64) -> f64 {
        (1.0 - 2.0 * self.rate() * sigma).powf(-0.5)
    }

    /// Inverse maps with σ in averaged units scaled by the amplitude factor.
    pub fn phi_grad_scaled(&self, theta: f64, r: f64) -> (f64, f64, f64) {
        self.phi_grad(theta, r)
    }

    pub fn sigma_grad_scaled(&self, theta: f64, r: f64) -> (f64, f64, f64) {
        let q = self.amplitude_scale();
        let (v, a, b) = self.sigma_grad(theta, r);
        (q * v, q * a, q * b)
    }

    pub fn k_theta_scaled(&self, phi: f64, sigma: f64) -> f64 {
        self.k_theta(phi, sigma / self.amplitude_scale())
    }

    pub fn k_r_scaled(&self, phi: f64, sigma: f64) -> f64 {
        self.k_r(phi, sigma / self.amplitude_scale())
    }
}

/// One term `c · σ_i^n_i σ_j^n_j · f(φ_i) · g(φ_j)` with first-harmonic
/// factors; `own`/`input` are `true` for sine, `false` for cosine.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesTerm {
    pub power_i: usize,
    pub power_j: usize,
    pub own_sin: bool,
    pub input_sin: bool,
    pub coefficient: f64,
}

/// Printed reduced-coupling expansions truncated at amplitude order 2.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReducedSeries {
    pub phase: Vec<SeriesTerm>,
    pub amplitude: Vec<SeriesTerm>,
}

impl ReducedSeries {
    pub fn eval(terms: &[SeriesTerm], phi_i: f64, sigma_i: f64, phi_j: f64, sigma_j: f64) -> f64 {
        terms
            .iter()
            .map(|t| {
                let fi = if t.own_sin { phi_i.sin() } else { phi_i.cos() };
                let fj = if t.input_sin {
                    phi_j.sin()
                } else {
                    phi_j.cos()
                };
                t.coefficient
                    * sigma_i.powi(t.power_i as i32)
                    * sigma_j.powi(t.power_j as i32)
                    * fi
                    * fj
            })
            .sum()
    }

    /// Coefficients re-expressed for amplitudes `σ̃ = q·σ`, the units
    /// produced by averaging.
    pub fn scaled(&self, q_i: f64, q_j: f64) -> ReducedSeries {
        let conv = |terms: &[SeriesTerm], extra: f64| {
            terms
                .iter()
                .map(|t| SeriesTerm {
                    coefficient: t.coefficient * extra
                        / (q_i.powi(t.power_i as i32) * q_j.powi(t.power_j as i32)),
                    ..*t
                })
                .collect()
        };
        ReducedSeries {
            phase: conv(&self.phase, 1.0),
            amplitude: conv(&self.amplitude, q_i),
        }
    }
}

fn term(
    power_i: usize,
    power_j: usize,
    own_sin: bool,
    input_sin: bool,
    coefficient: f64,
) -> SeriesTerm {
    SeriesTerm {
        power_i,
        power_j,
        own_sin,
        input_sin,
        coefficient,
    }
}

/// Reduced coupling of input `j` into `i` in unscaled σ, including ε_ij.
pub fn reduced_series(spec: &ModelSpec, i: usize, j: usize) -> Result<ReducedSeries> {
    let gi = analytic_ground_truth(spec, i)?;
    let gj = analytic_ground_truth(spec, j)?;
    let eps = spec.coupling[i][j];
    let (c, s) = (false, true);
    let mut out = match (gi, gj) {
        (
            AnalyticGroundTruth::RadialIsochronClock { a: ai },
            AnalyticGroundTruth::RadialIsochronClock { a: aj },
        ) => {
            let phase = vec![
                term(0, 0, c, s, 1.0),
                term(1, 0, c, s, -ai),
                term(0, 1, c, s, aj),
                term(2, 0, c, s, -0.5 * ai * ai),
                term(1, 1, c, s, -ai * aj),
                term(0, 2, c, s, 1.5 * aj * aj),
            ];
            let amplitude = vec![
                term(0, 0, s, s, 1.0 / ai),
                term(1, 0, s, s, -3.0),
                term(0, 1, s, s, aj / ai),
                term(2, 0, s, s, 1.5 * ai),
                term(1, 1, s, s, -3.0 * aj),
                term(0, 2, s, s, 1.5 * aj * aj / ai),
            ];
            ReducedSeries { phase, amplitude }
        }
        (
            AnalyticGroundTruth::Canonical { alpha: al_i, a: ai },
            AnalyticGroundTruth::Canonical { alpha: al_j, a: aj },
        ) => {
            let phase = vec![
                term(0, 0, s, c, -1.0),
                term(0, 0, c, c, ai),
                term(1, 0, s, c, (ai * ai + 1.0) * al_i),
                term(0, 1, c, s, ai * aj * al_j),
                term(0, 1, c, c, ai * al_j),
                term(0, 1, s, s, -aj * al_j),
                term(0, 1, s, c, -al_j),
                term(2, 0, c, c, (-ai.powi(3) - ai) * al_i * al_i / 2.0),
                term(2, 0, s, c, (ai * ai + 1.0) * al_i * al_i / 2.0),
                term(1, 1, s, s, (ai * ai * aj + aj) * al_i * al_j),
                term(1, 1, s, c, (ai * ai + 1.0) * al_i * al_j),
                term(0, 2, c, c, -(aj * aj - 3.0) * ai * al_j * al_j / 2.0),
                term(0, 2, s, c, -(3.0 - aj * aj) * al_j * al_j / 2.0),
                term(0, 2, c, s, 4.0 * ai * aj * al_j * al_j / 2.0),
                term(0, 2, s, s, -4.0 * aj * al_j * al_j / 2.0),
            ];
            let amplitude = vec![
                term(0, 0, c, c, 1.0 / al_i),
                term(1, 0, s, c, ai),
                term(1, 0, c, c, -3.0),
                term(0, 1, c, s, aj * al_j / al_i),
                term(0, 1, c, c, al_j / al_i),
                term(2, 0, c, c, -(ai * ai - 3.0) * al_i / 2.0),
                term(2, 0, s, c, -4.0 * ai * al_i / 2.0),
                term(1, 1, s, s, ai * aj * al_j),
                term(1, 1, s, c, ai * al_j),
                term(1, 1, c, s, -3.0 * aj * al_j),
                term(1, 1, c, c, -3.0 * al_j),
                term(0, 2, c, c, -(aj * aj - 3.0) * al_j * al_j / (2.0 * al_i)),
                term(0, 2, c, s, 4.0 * aj * al_j * al_j / (2.0 * al_i)),
            ];
            ReducedSeries { phase, amplitude }
        }
        _ => return Err(Error::NoAnalyticForm("mixed network".into())),
    };
    for t in out.phase.iter_mut().chain(out.amplitude.iter_mut()) {
        t.coefficient *= eps;
    }
    Ok(out)
}

pub fn eval_model_vf(model: &Model, states: &[Planar]) -> Result<Vec<Planar>> {
    model.eval_native(states)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{E, PI};

    #[test]
    fn ric_on_cycle() {
        let m = Model::new(ModelSpec::radial_isochron_clock().uncoupled()).unwrap();
        let d = m.eval_native(&[[0.0, 1.0], [1.0, 1.0]]).unwrap();
        assert_eq!(d[0], [1.0, 0.0]);
    }

    #[test]
    fn canonical_on_cycle() {
        let m = Model::new(ModelSpec::canonical().uncoupled()).unwrap();
        let d = m.eval_native(&[[0.0, 1.0], [0.0, 1.0]]).unwrap();
        assert!((d[0][0] - 2.8).abs() < 1e-15);
        assert_eq!(d[0][1], 0.0);
    }

    #[test]
    fn vdp_driven() {
        let m = Model::preset(ModelKind::VanDerPol).unwrap();
        let d = m.eval_native(&[[2.0, 0.0], [1.0, 0.0]]).unwrap();
        assert!((d[1][1] + 0.8).abs() < 1e-15);
    }

    #[test]
    fn polar_radius_checked() {
        let m = Model::preset(ModelKind::RadialIsochronClock).unwrap();
        assert_eq!(
            m.eval_native(&[[0.0, 0.0], [0.0, 1.0]]),
            Err(Error::NonPositiveRadius(0.0))
        );
    }

    #[test]
    fn mismatched_kind() {
        let mut s = ModelSpec::canonical();
        s.oscillators[1] = OscillatorParams::VanDerPol { mu: 1.0 };
        assert!(matches!(Model::new(s), Err(Error::UnknownKind(_))));
        assert_eq!(
            ModelKind::parse("lorenz"),
            Err(Error::UnknownKind("lorenz".into()))
        );
    }

    #[test]
    fn uncoupled_independence() {
        for kind in ModelKind::all() {
            let m = Model::new(ModelSpec::preset(kind).uncoupled()).unwrap();
            let base = match m.coords() {
                Coords::Polar => [[0.4, 1.1], [2.0, 0.9]],
                Coords::Cartesian => [[0.6, 0.5], [0.3, 0.2]],
            };
            let mut other = base;
            other[1][0] += 0.37;
            other[1][1] += 0.11;
            assert_eq!(
                m.eval_native(&base).unwrap()[0],
                m.eval_native(&other).unwrap()[0]
            );
        }
    }

    #[test]
    fn wc_equilibria() {
        let trivial = ModelSpec {
            kind: ModelKind::WilsonCowan,
            oscillators: vec![OscillatorParams::WilsonCowan {
                a: 0.0,
                b: 0.0,
                c: 0.0,
                d: 0.0,
                rho_x: 0.0,
                rho_y: 0.0,
            }],
            coupling: vec![vec![0.0]],
        };
        let e = wc_equilibrium(&trivial, 0).unwrap();
        assert!((e[0] - 0.5).abs() < 1e-14 && (e[1] - 0.5).abs() < 1e-14);

        let spec = ModelSpec::wilson_cowan();
        for i in 0..2 {
            let p = wc_equilibrium(&spec, i).unwrap();
            let (a, b, c, d, rx, ry) = wc_params(&spec, i).unwrap();
            let r1 = -p[0] + logistic(rx + a * p[0] - b * p[1]);
            let r2 = -p[1] + logistic(ry + c * p[0] - d * p[1]);
            assert!(r1.abs() < 1e-12 && r2.abs() < 1e-12);
        }

        let sat = ModelSpec {
            kind: ModelKind::WilsonCowan,
            oscillators: vec![OscillatorParams::WilsonCowan {
                a: 0.0,
                b: 0.0,
                c: 0.0,
                d: 0.0,
                rho_x: 50.0,
                rho_y: 0.0,
            }],
            coupling: vec![vec![0.0]],
        };
        assert!((wc_equilibrium(&sat, 0).unwrap()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ground_truth_values() {
        let g = AnalyticGroundTruth::RadialIsochronClock { a: 1.0 };
        assert!((g.sigma(0.3, 2f64.sqrt()) - 0.25).abs() < 1e-15);
        let c = AnalyticGroundTruth::Canonical { alpha: 1.5, a: 1.2 };
        assert!((c.phi(0.0, E) - 1.2).abs() < 1e-15);
        assert!((AnalyticGroundTruth::RadialIsochronClock { a: 0.7 }.lambda() + 1.4).abs() < 1e-15);
        assert!(matches!(
            analytic_ground_truth(&ModelSpec::van_der_pol(), 0),
            Err(Error::NoAnalyticForm(_))
        ));
    }

    #[test]
    fn ground_truth_invariance_and_composition() {
        for spec in [ModelSpec::radial_isochron_clock(), ModelSpec::canonical()] {
            let m = Model::new(spec.clone().uncoupled()).unwrap();
            for i in 0..2 {
                let g = analytic_ground_truth(&spec, i).unwrap();
                let omega = m.uncoupled_polar(i, [0.0, 1.0])[0];
                assert!(g.sigma(1.7, 1.0).abs() < 1e-15);
                assert!(g.phi(0.0, 1.0).abs() < 1e-15);
                for a in 0..20 {
                    for b in 0..20 {
                        let th = 2.0 * PI * a as f64 / 20.0;
                        let r = 0.8 + 0.45 * b as f64 / 19.0;
                        let f = m.uncoupled_polar(i, [th, r]);
                        let (_, pt, pr) = g.phi_grad(th, r);
                        let (sv, st, sr) = g.sigma_grad(th, r);
                        assert!((f[0] * pt + f[1] * pr - omega).abs() < 1e-10);
                        assert!((f[0] * st + f[1] * sr - g.lambda() * sv).abs() < 1e-10);
                        let (p, s) = (g.phi(th, r), g.sigma(th, r));
                        assert!((g.k_r(p, s) - r).abs() < 1e-10);
                        assert!((g.k_theta(p, s) - th).abs() < 1e-10);
                    }
                }
            }
        }
    }

    /// Exact reduced coupling `∇χ_i · G_ij` evaluated through the forward maps.
    fn exact_reduced(m: &Model, i: usize, j: usize, p: [f64; 4]) -> (f64, f64) {
        let gi = m.analytic(i).unwrap();
        let gj = m.analytic(j).unwrap();
        let si = [gi.k_theta(p[0], p[1]), gi.k_r(p[0], p[1])];
        let sj = [gj.k_theta(p[2], p[3]), gj.k_r(p[2], p[3])];
        let g = m.coupling_polar(i, j, si, sj);
        let (_, pt, pr) = gi.phi_grad(si[0], si[1]);
        let (_, st, sr) = gi.sigma_grad(si[0], si[1]);
        (pt * g[0] + pr * g[1], st * g[0] + sr * g[1])
    }

    #[test]
    fn printed_series_match_exact_expansion() {
        for spec in [ModelSpec::radial_isochron_clock(), ModelSpec::canonical()] {
            let m = Model::new(spec.clone()).unwrap();
            let series = reduced_series(&spec, 1, 0).unwrap();
            let worst = |h: f64| {
                let mut w: f64 = 0.0;
                for k in 0..40 {
                    let x = k as f64;
                    let p = [
                        0.7 * x,
                        h * (0.3 * x).sin(),
                        1.3 * x + 0.2,
                        h * (0.7 * x).cos(),
                    ];
                    let (ep, es) = exact_reduced(&m, 1, 0, p);
                    let sp = ReducedSeries::eval(&series.phase, p[0], p[1], p[2], p[3]);
                    let sa = ReducedSeries::eval(&series.amplitude, p[0], p[1], p[2], p[3]);
                    w = w.max((ep - sp).abs()).max((es - sa).abs());
                }
                w
            };
            let (e1, e2) = (worst(0.02), worst(0.01));
            assert!(e2 < 2e-5, "{:?} residual {e2}", spec.kind);
            assert!(
                e1 / e2 > 6.0,
                "{:?} not third order: {}",
                spec.kind,
                e1 / e2
            );
        }
    }

    #[test]
    fn cartesian_frames() {
        for kind in [ModelKind::VanDerPol, ModelKind::WilsonCowan] {
            let m = Model::preset(kind).unwrap();
            for i in 0..2 {
                let f = m.frame(i);
                let v = m.uncoupled_polar(i, [0.3, 0.2]);
                assert!(v[0] > 0.0, "{kind:?} {i} rotates backwards: {f:?}");
                let p = [0.37, 0.21];
                let back = f.to_polar(f.to_cartesian(p));
                assert!((back[0] - p[0]).abs() < 1e-14 && (back[1] - p[1]).abs() < 1e-14);
            }
        }
        let vdp = Model::preset(ModelKind::VanDerPol).unwrap();
        assert_eq!(vdp.frame(0).orientation, -1.0);
        assert!(vdp.frame(0).center[0].abs() < 1e-6);
    }

    #[test]
    fn spec_round_trip() {
        for kind in ModelKind::all() {
            let s = ModelSpec::preset(kind);
            let j = serde_json::to_string(&s).unwrap();
            assert_eq!(serde_json::from_str::<ModelSpec>(&j).unwrap(), s);
        }
    }
}

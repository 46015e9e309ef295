//! Fixed-step classical Runge-Kutta integration for planar fields, their
//! variational equations, and flat network states.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Planar = [f64; 2];
pub type Mat2 = [[f64; 2]; 2];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coords {
    Polar,
    Cartesian,
}

/// Planar vector field. Polar fields take and return `(θ, r)`.
pub trait PlanarField: Sync {
    fn eval(&self, s: Planar) -> Planar;

    fn jacobian(&self, s: Planar) -> Mat2 {
        fd_jacobian(|p| self.eval(p), s, 1e-6)
    }
}

impl<F: Fn(Planar) -> Planar + Sync> PlanarField for F {
    fn eval(&self, s: Planar) -> Planar {
        self(s)
    }
}

/// Field with an explicit Jacobian callable.
pub struct WithJacobian<F, J> {
    pub field: F,
    pub jac: J,
}

impl<F, J> PlanarField for WithJacobian<F, J>
where
    F: Fn(Planar) -> Planar + Sync,
    J: Fn(Planar) -> Mat2 + Sync,
{
    fn eval(&self, s: Planar) -> Planar {
        (self.field)(s)
    }
    fn jacobian(&self, s: Planar) -> Mat2 {
        (self.jac)(s)
    }
}

pub fn fd_jacobian(f: impl Fn(Planar) -> Planar, s: Planar, h: f64) -> Mat2 {
    let mut j = [[0.0; 2]; 2];
    for c in 0..2 {
        let mut p = s;
        let mut m = s;
        p[c] += h;
        m[c] -= h;
        let fp = f(p);
        let fm = f(m);
        for row in 0..2 {
            j[row][c] = (fp[row] - fm[row]) / (2.0 * h);
        }
    }
    j
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Planar>,
    pub step: f64,
    pub coords: Coords,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Planar {
        *self
            .states
            .last()
            .expect("trajectory has at least one sample")
    }
}

#[derive(Clone, Debug)]
pub struct TangentTrajectory {
    pub base: Trajectory,
    pub tangent: Vec<Mat2>,
}

#[inline]
pub fn rk4_step<const D: usize>(
    f: &impl Fn(&[f64; D]) -> [f64; D],
    x: &[f64; D],
    h: f64,
) -> [f64; D] {
    let k1 = f(x);
    let mut tmp = [0.0; D];
    for i in 0..D {
        tmp[i] = x[i] + 0.5 * h * k1[i];
    }
    let k2 = f(&tmp);
    for i in 0..D {
        tmp[i] = x[i] + 0.5 * h * k2[i];
    }
    let k3 = f(&tmp);
    for i in 0..D {
        tmp[i] = x[i] + h * k3[i];
    }
    let k4 = f(&tmp);
    let mut out = [0.0; D];
    for i in 0..D {
        out[i] = x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// One RK4 step of the planar field.
#[inline]
pub fn planar_step(vf: &(impl PlanarField + ?Sized), x: Planar, h: f64) -> Planar {
    rk4_step(&|s: &Planar| vf.eval(*s), &x, h)
}

pub(crate) fn step_count(duration: f64, step: f64) -> Result<usize> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::InvalidStep(step));
    }
    if !(duration >= step * (1.0 - 1e-12)) {
        return Err(Error::InvalidStep(step));
    }
    Ok(((duration / step).round() as usize).max(1))
}

fn finite<const D: usize>(x: &[f64; D]) -> bool {
    x.iter().all(|v| v.is_finite())
}

/// Samples at `t = k·step` for `k = 0..=round(duration/step)`.
pub fn integrate(
    vf: &(impl PlanarField + ?Sized),
    state0: Planar,
    duration: f64,
    step: f64,
    coords: Coords,
) -> Result<Trajectory> {
    let n = step_count(duration, step)?;
    if !finite(&state0) || !finite(&vf.eval(state0)) {
        return Err(Error::NonFiniteState { time: 0.0 });
    }
    let mut times = Vec::with_capacity(n + 1);
    let mut states = Vec::with_capacity(n + 1);
    let mut x = state0;
    times.push(0.0);
    states.push(x);
    for k in 1..=n {
        x = planar_step(vf, x, step);
        let t = k as f64 * step;
        if !finite(&x) {
            return Err(Error::NonFiniteState { time: t });
        }
        times.push(t);
        states.push(x);
    }
    Ok(Trajectory {
        times,
        states,
        step,
        coords,
    })
}

/// Flow plus the variational equation `dM/dt = DF(x(t))·M`, `M(0) = I`.
pub fn integrate_with_tangent(
    vf: &(impl PlanarField + ?Sized),
    state0: Planar,
    duration: f64,
    step: f64,
    coords: Coords,
) -> Result<TangentTrajectory> {
    let n = step_count(duration, step)?;
    let rhs = |z: &[f64; 6]| {
        let s = [z[0], z[1]];
        let f = vf.eval(s);
        let j = vf.jacobian(s);
        [
            f[0],
            f[1],
            j[0][0] * z[2] + j[0][1] * z[4],
            j[0][0] * z[3] + j[0][1] * z[5],
            j[1][0] * z[2] + j[1][1] * z[4],
            j[1][0] * z[3] + j[1][1] * z[5],
        ]
    };
    let mut z = [state0[0], state0[1], 1.0, 0.0, 0.0, 1.0];
    if !finite(&rhs(&z)) {
        return Err(Error::NonFiniteState { time: 0.0 });
    }
    let mut times = Vec::with_capacity(n + 1);
    let mut states = Vec::with_capacity(n + 1);
    let mut tangent = Vec::with_capacity(n + 1);
    times.push(0.0);
    states.push(state0);
    tangent.push([[1.0, 0.0], [0.0, 1.0]]);
    for k in 1..=n {
        z = rk4_step(&rhs, &z, step);
        let t = k as f64 * step;
        if !finite(&z) {
            return Err(Error::NonFiniteState { time: t });
        }
        times.push(t);
        states.push([z[0], z[1]]);
        tangent.push([[z[2], z[3]], [z[4], z[5]]]);
    }
    Ok(TangentTrajectory {
        base: Trajectory {
            times,
            states,
            step,
            coords,
        },
        tangent,
    })
}

/// RK4 for a flat state vector with reusable scratch space.
pub struct VecStepper {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl VecStepper {
    pub fn new(dim: usize) -> Self {
        VecStepper {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }

    pub fn step(&mut self, f: &impl Fn(&[f64], &mut [f64]), x: &mut [f64], h: f64) {
        let n = x.len();
        f(x, &mut self.k1);
        for i in 0..n {
            self.tmp[i] = x[i] + 0.5 * h * self.k1[i];
        }
        f(&self.tmp, &mut self.k2);
        for i in 0..n {
            self.tmp[i] = x[i] + 0.5 * h * self.k2[i];
        }
        f(&self.tmp, &mut self.k3);
        for i in 0..n {
            self.tmp[i] = x[i] + h * self.k3[i];
        }
        f(&self.tmp, &mut self.k4);
        for i in 0..n {
            x[i] += h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

/// Flat network trajectory; row `k` is `data[k*dim..(k+1)*dim]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemTrajectory {
    pub times: Vec<f64>,
    pub dim: usize,
    pub data: Vec<f64>,
    pub step: f64,
}

impl SystemTrajectory {
    pub fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.dim..(k + 1) * self.dim]
    }
}

/// Integrates and keeps every `stride`-th sample.
pub fn integrate_system(
    f: impl Fn(&[f64], &mut [f64]),
    x0: &[f64],
    duration: f64,
    step: f64,
    stride: usize,
) -> Result<SystemTrajectory> {
    let n = step_count(duration, step)?;
    let stride = stride.max(1);
    let dim = x0.len();
    let mut x = x0.to_vec();
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteState { time: 0.0 });
    }
    let mut stepper = VecStepper::new(dim);
    let mut times = vec![0.0];
    let mut data = x.clone();
    for k in 1..=n {
        stepper.step(&f, &mut x, step);
        if k % stride == 0 {
            let t = k as f64 * step;
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteState { time: t });
            }
            times.push(t);
            data.extend_from_slice(&x);
        }
    }
    Ok(SystemTrajectory {
        times,
        dim,
        data,
        step: step * stride as f64,
    })
}

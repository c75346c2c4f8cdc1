//! Geodesics of the weighted metric, integrated in `R^4` with RK4.

use nalgebra::Vector4;

use super::frame::{acceleration, AmbientPoint, Frame};
use crate::error::{Error, Result};
use crate::weighted::WeightedParams;

/// Largest accepted integration step.
pub const MAX_STEP: f64 = 1e-3;

/// A point of the sphere together with a tangent velocity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeodesicState {
    pub point: AmbientPoint,
    pub velocity: Vector4<f64>,
}

impl GeodesicState {
    pub const TANGENCY: f64 = 1e-10;

    pub fn new(point: AmbientPoint, velocity: [f64; 4]) -> Result<Self> {
        let velocity = Vector4::from(velocity);
        let normal = point.vector().dot(&velocity);
        if !velocity.iter().all(|v| v.is_finite()) || normal.abs() > Self::TANGENCY {
            return Err(Error::Argument(format!(
                "velocity must be tangent to the sphere, x.v = {normal:.3e}"
            )));
        }
        Ok(Self { point, velocity })
    }

    /// Same point, velocity rescaled to unit speed.
    pub fn unit(&self, params: &WeightedParams) -> Result<Self> {
        let speed = Frame::at(params, &self.point).norm(&self.velocity);
        if !(speed > 0.0) {
            return Err(Error::Argument("zero velocity".into()));
        }
        Ok(Self {
            point: self.point,
            velocity: self.velocity / speed,
        })
    }

    pub fn speed(&self, params: &WeightedParams) -> f64 {
        Frame::at(params, &self.point).norm(&self.velocity)
    }

    /// `eta_a` of the velocity.
    pub fn vertical(&self, params: &WeightedParams) -> f64 {
        Frame::at(params, &self.point).eta(&self.velocity)
    }
}

/// One RK4 step followed by projection back to the sphere and its tangent space.
pub fn advance(params: &WeightedParams, state: &GeodesicState, dt: f64) -> Result<GeodesicState> {
    let x = *state.point.vector();
    let v = state.velocity;
    let f = |x: &Vector4<f64>, v: &Vector4<f64>| acceleration(params, x, v);
    let a1 = f(&x, &v)?;
    let (x2, v2) = (x + v * (0.5 * dt), v + a1 * (0.5 * dt));
    let a2 = f(&x2, &v2)?;
    let (x3, v3) = (x + v2 * (0.5 * dt), v + a2 * (0.5 * dt));
    let a3 = f(&x3, &v3)?;
    let (x4, v4) = (x + v3 * dt, v + a3 * dt);
    let a4 = f(&x4, &v4)?;
    let xn = x + (v + v2 * 2.0 + v3 * 2.0 + v4) * (dt / 6.0);
    let vn = v + (a1 + a2 * 2.0 + a3 * 2.0 + a4) * (dt / 6.0);
    if !(xn.iter().chain(vn.iter()).all(|c| c.is_finite())) {
        return Err(Error::Integration(format!(
            "non-finite state after step {dt}"
        )));
    }
    let point = AmbientPoint::from_vector(xn);
    let p = point.vector();
    Ok(GeodesicState {
        point,
        velocity: vn - p * p.dot(&vn),
    })
}

/// Integrates over parameter length `length` in equal steps no larger than `h`.
pub fn integrate(
    params: &WeightedParams,
    start: &GeodesicState,
    length: f64,
    h: f64,
    mut observe: impl FnMut(f64, &GeodesicState),
) -> Result<GeodesicState> {
    if !(h > 0.0 && h <= MAX_STEP) {
        return Err(Error::Precondition(format!(
            "geodesic step must lie in (0, {MAX_STEP}], got {h}"
        )));
    }
    if !(length.is_finite() && length >= 0.0) {
        return Err(Error::Argument(format!(
            "length must be non-negative, got {length}"
        )));
    }
    let steps = (length / h).ceil().max(1.0) as usize;
    let dt = length / steps as f64;
    let mut state = *start;
    observe(0.0, &state);
    for i in 1..=steps {
        state = advance(params, &state, dt)?;
        observe(i as f64 * dt, &state);
    }
    Ok(state)
}

/// Sampled geodesic with its conservation diagnostics.
#[derive(Clone, Debug)]
pub struct GeodesicPath {
    pub parameters: Vec<f64>,
    pub points: Vec<[f64; 4]>,
    pub end: GeodesicState,
    /// `max |eta_a(velocity)|`; meaningful as a drift when the start is horizontal.
    pub horizontality_drift: f64,
    /// `max |eta_a(velocity) - eta_a(velocity_0)|`.
    pub vertical_drift: f64,
    /// `max | |velocity| - |velocity_0| |`.
    pub speed_drift: f64,
}

pub fn geodesic(
    params: &WeightedParams,
    start: &GeodesicState,
    length: f64,
    h: f64,
) -> Result<GeodesicPath> {
    let speed0 = start.speed(params);
    let vertical0 = start.vertical(params);
    let mut path = GeodesicPath {
        parameters: Vec::new(),
        points: Vec::new(),
        end: *start,
        horizontality_drift: 0.0,
        vertical_drift: 0.0,
        speed_drift: 0.0,
    };
    let end = integrate(params, start, length, h, |s, state| {
        let vertical = state.vertical(params);
        path.parameters.push(s);
        path.points.push(state.point.coords());
        path.horizontality_drift = path.horizontality_drift.max(vertical.abs());
        path.vertical_drift = path.vertical_drift.max((vertical - vertical0).abs());
        path.speed_drift = path.speed_drift.max((state.speed(params) - speed0).abs());
    })?;
    path.end = end;
    Ok(path)
}

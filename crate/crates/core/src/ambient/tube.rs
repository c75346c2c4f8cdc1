//! Areas of tubular hypersurfaces about the level tori and the singular circle.

use nalgebra::Vector4;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::curvature::curvature_sample;
use super::frame::{christoffel, extended_metric, inverse, AmbientPoint, Frame, CONNECTION_STEP};
use super::geodesic::{advance, GeodesicState, MAX_STEP};
use crate::error::{Error, Result};
use crate::weighted::WeightedParams;

/// Fraction of the transverse diameter covered by default distance grids.
pub const DEFAULT_RANGE_FRACTION: f64 = 0.3;

const SIMPSON_INTERVALS: usize = 4096;

/// Distance between the level tori `|z1|^2 = t0` and `|z1|^2 = t1`, measured
/// along horizontal curves normal to the tori: `∫ dphi / sqrt(sigma)` with
/// `|z1| = sin phi`.
pub fn transverse_distance(params: &WeightedParams, t0: f64, t1: f64) -> Result<f64> {
    for t in [t0, t1] {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Domain(format!("level {t} outside [0, 1]")));
        }
    }
    let (lo, hi) = (t0.min(t1).sqrt().asin(), t0.max(t1).sqrt().asin());
    let f = |phi: f64| {
        let s = phi.sin().powi(2);
        1.0 / params.sigma(s).sqrt()
    };
    let n = SIMPSON_INTERVALS;
    let h = (hi - lo) / n as f64;
    let mut acc = f(lo) + f(hi);
    for i in 1..n {
        acc += f(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    Ok(acc * h / 3.0)
}

/// Distance between the two singular circles.
pub fn transverse_diameter(params: &WeightedParams) -> f64 {
    transverse_distance(params, 0.0, 1.0).expect("levels lie in [0, 1]")
}

/// Submanifold the tube is built around.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum TubeBase {
    /// The torus `|z1| = c1`, pushed along its normal towards `|z1| = 1`.
    Torus { c1: f64 },
    /// The circle `z1 = 0`.
    Circle,
}

impl TubeBase {
    fn validate(&self) -> Result<()> {
        match self {
            TubeBase::Torus { c1 } if !(*c1 > 0.0 && *c1 < 1.0) => Err(Error::Argument(format!(
                "torus modulus must lie in (0, 1), got {c1}"
            ))),
            _ => Ok(()),
        }
    }

    pub fn label(&self) -> String {
        match self {
            TubeBase::Torus { c1 } => format!("torus c1={c1}"),
            TubeBase::Circle => "circle z1=0".to_string(),
        }
    }

    /// Default `(along, across)` lattice sizes.
    pub fn default_lattice(&self) -> [usize; 2] {
        match self {
            TubeBase::Torus { .. } => [128, 128],
            TubeBase::Circle => [256, 64],
        }
    }
}

/// Distance at which the normal geodesics from `base` first reach a
/// singular circle; tube distances must stay below it.
pub fn focal_limit(params: &WeightedParams, base: &TubeBase) -> Result<f64> {
    base.validate()?;
    match base {
        TubeBase::Torus { c1 } => transverse_distance(params, c1 * c1, 1.0),
        TubeBase::Circle => Ok(transverse_diameter(params)),
    }
}

/// `n` equally spaced distances up to `min(0.3 diameter, focal_limit / 2)`.
pub fn default_t_grid(params: &WeightedParams, base: &TubeBase, n: usize) -> Result<Vec<f64>> {
    if n < 3 {
        return Err(Error::Argument(format!(
            "need at least 3 distances, got {n}"
        )));
    }
    let top = (DEFAULT_RANGE_FRACTION * transverse_diameter(params))
        .min(0.5 * focal_limit(params, base)?);
    Ok((1..=n).map(|i| top * i as f64 / n as f64).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TubeOptions {
    /// Lattice sizes `[along, across]`: `(theta1, theta2)` for a torus,
    /// `(point on circle, normal angle)` for the circle.
    pub lattice: [usize; 2],
    /// Largest geodesic step.
    pub step: f64,
    /// Curvature bound for the tube estimate; sampled when absent.
    pub lambda: Option<f64>,
    pub curvature_samples: usize,
    pub seed: u64,
}

impl TubeOptions {
    pub fn for_base(base: &TubeBase) -> Self {
        Self {
            lattice: base.default_lattice(),
            step: MAX_STEP,
            lambda: None,
            curvature_samples: 500,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TubeReport {
    pub base: TubeBase,
    pub lattice: [usize; 2],
    pub t: Vec<f64>,
    pub area: Vec<f64>,
    /// Three-point second differences of the area; absent at the ends.
    pub second_difference: Vec<Option<f64>>,
    /// `pi L sin(2 t sqrt(lambda)) / sqrt(lambda)`; circle tubes only.
    pub weyl_bound: Vec<Option<f64>>,
    pub lambda: Option<f64>,
    /// Length of the base circle, measured on the lattice.
    pub base_length: Option<f64>,
}

impl TubeReport {
    pub fn max_area(&self) -> f64 {
        self.area.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `max_i A''(t_i) / max A`.
    pub fn worst_concavity(&self) -> f64 {
        let top = self.max_area();
        self.second_difference
            .iter()
            .flatten()
            .map(|d| d / top)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `min_i (A(t_i) - bound(t_i))`.
    pub fn weyl_margin(&self) -> Option<f64> {
        self.area
            .iter()
            .zip(&self.weyl_bound)
            .map(|(a, b)| b.map(|b| a - b))
            .collect::<Option<Vec<_>>>()
            .map(|m| m.into_iter().fold(f64::INFINITY, f64::min))
    }
}

/// Unit normal of the level tori pointing towards increasing `|z1|`
/// (the normalized gradient of `|z1|`).
pub fn torus_normal(params: &WeightedParams, x: &Vector4<f64>) -> Result<Vector4<f64>> {
    let r = x.norm();
    let m = (x[0] * x[0] + x[1] * x[1]).sqrt();
    if !(m > 0.0 && m < r) {
        return Err(Error::Argument("point lies on a singular circle".into()));
    }
    // Differential of the scale-invariant function |z1| / |x|.
    let df = Vector4::new(x[0] / m, x[1] / m, 0.0, 0.0) / r - x * (m / (r * r * r));
    let up = inverse(&extended_metric(params, x))? * df;
    Ok(up / df.dot(&up).sqrt())
}

const PERIODIC_STENCIL: [f64; 4] = [4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];

/// Eighth-order central difference of `at(k)` around `k = 0`.
fn periodic_derivative(at: impl Fn(isize) -> Vector4<f64>, spacing: f64) -> Vector4<f64> {
    let mut acc = Vector4::zeros();
    for (k, c) in PERIODIC_STENCIL.iter().enumerate() {
        let k = k as isize + 1;
        acc += (at(k) - at(-k)) * *c;
    }
    acc / spacing
}

struct Launch {
    point: AmbientPoint,
    velocity: Vector4<f64>,
}

fn launches(
    params: &WeightedParams,
    base: &TubeBase,
    row: usize,
    lattice: [usize; 2],
) -> Result<Vec<Launch>> {
    let tau = std::f64::consts::TAU;
    let u = tau * row as f64 / lattice[0] as f64;
    (0..lattice[1])
        .map(|col| {
            let v = tau * col as f64 / lattice[1] as f64;
            match base {
                TubeBase::Torus { c1 } => {
                    let point = AmbientPoint::on_torus(*c1, u, v)?;
                    let velocity = torus_normal(params, point.vector())?;
                    Ok(Launch { point, velocity })
                }
                TubeBase::Circle => {
                    let point = AmbientPoint::on_torus(0.0, 0.0, u)?;
                    let f = Frame::at(params, &point);
                    // Gram-Schmidt on the z1-plane, which is horizontal along the circle.
                    let e1 = Vector4::new(1.0, 0.0, 0.0, 0.0);
                    let e2 = Vector4::new(0.0, 1.0, 0.0, 0.0);
                    let n1 = e1 / f.norm(&e1);
                    let w = e2 - n1 * f.metric(&e2, &n1);
                    let n2 = w / f.norm(&w);
                    Ok(Launch {
                        point,
                        velocity: n1 * v.cos() + n2 * v.sin(),
                    })
                }
            }
        })
        .collect()
}

/// Positions of one lattice row's geodesics at every requested distance.
fn row_positions(
    params: &WeightedParams,
    base: &TubeBase,
    row: usize,
    lattice: [usize; 2],
    t_grid: &[f64],
    step: f64,
) -> Result<Vec<Vec<Vector4<f64>>>> {
    let mut out = vec![Vec::with_capacity(lattice[1]); t_grid.len()];
    for launch in launches(params, base, row, lattice)? {
        let mut state = GeodesicState {
            point: launch.point,
            velocity: launch.velocity,
        };
        let mut reached = 0.0;
        for (k, &t) in t_grid.iter().enumerate() {
            let gap = t - reached;
            if gap > 0.0 {
                let n = (gap / step).ceil() as usize;
                let dt = gap / n as f64;
                for _ in 0..n {
                    state = advance(params, &state, dt)?;
                }
            }
            reached = t;
            out[k].push(*state.point.vector());
        }
    }
    Ok(out)
}

fn surface_area(params: &WeightedParams, grid: &[Vec<Vector4<f64>>], spacing: [f64; 2]) -> f64 {
    let rows = grid.len() as isize;
    let row_sums: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let cols = grid[i].len() as isize;
            let mut acc = 0.0;
            for j in 0..cols {
                let du = periodic_derivative(
                    |k| grid[(i as isize + k).rem_euclid(rows) as usize][j as usize],
                    spacing[0],
                );
                let dv =
                    periodic_derivative(|k| grid[i][(j + k).rem_euclid(cols) as usize], spacing[1]);
                let point = AmbientPoint::from_vector(grid[i][j as usize]);
                let f = Frame::at(params, &point);
                let (du, dv) = (f.tangent(&du), f.tangent(&dv));
                let gram = f.metric(&du, &du) * f.metric(&dv, &dv) - f.metric(&du, &dv).powi(2);
                acc += gram.max(0.0).sqrt();
            }
            acc
        })
        .collect();
    row_sums.iter().sum::<f64>() * spacing[0] * spacing[1]
}

fn second_differences(t: &[f64], a: &[f64]) -> Vec<Option<f64>> {
    let n = t.len();
    (0..n)
        .map(|i| {
            if i == 0 || i + 1 == n {
                return None;
            }
            let right = (a[i + 1] - a[i]) / (t[i + 1] - t[i]);
            let left = (a[i] - a[i - 1]) / (t[i] - t[i - 1]);
            Some(2.0 * (right - left) / (t[i + 1] - t[i - 1]))
        })
        .collect()
}

/// Area of the tube hypersurface about `base` at each distance in `t_grid`.
pub fn tube_areas(
    params: &WeightedParams,
    base: &TubeBase,
    t_grid: &[f64],
    options: &TubeOptions,
) -> Result<TubeReport> {
    base.validate()?;
    if t_grid.is_empty() {
        return Err(Error::Argument("empty distance grid".into()));
    }
    if options.lattice.iter().any(|&n| n < 8) {
        return Err(Error::Argument(format!(
            "lattice must be at least 8 x 8, got {:?}",
            options.lattice
        )));
    }
    if !(options.step > 0.0 && options.step <= MAX_STEP) {
        return Err(Error::Precondition(format!(
            "geodesic step must lie in (0, {MAX_STEP}], got {}",
            options.step
        )));
    }
    let limit = focal_limit(params, base)?;
    let lowest = match base {
        TubeBase::Torus { .. } => 0.0,
        TubeBase::Circle => f64::MIN_POSITIVE,
    };
    let mut previous = f64::NEG_INFINITY;
    for &t in t_grid {
        if !(t >= lowest && t < limit && t > previous) {
            return Err(Error::Precondition(format!(
                "distances must increase within [{lowest}, {limit:.6}), got {t}"
            )));
        }
        previous = t;
    }

    let lattice = options.lattice;
    let rows: Vec<Vec<Vec<Vector4<f64>>>> = (0..lattice[0])
        .into_par_iter()
        .map(|row| row_positions(params, base, row, lattice, t_grid, options.step))
        .collect::<Result<_>>()?;
    let tau = std::f64::consts::TAU;
    let spacing = [tau / lattice[0] as f64, tau / lattice[1] as f64];
    let mut area = Vec::with_capacity(t_grid.len());
    for (k, &t) in t_grid.iter().enumerate() {
        let grid: Vec<Vec<Vector4<f64>>> = rows.iter().map(|r| r[k].clone()).collect();
        let a = surface_area(params, &grid, spacing);
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::FocalRange { t });
        }
        area.push(a);
    }

    let (lambda, base_length) = match base {
        TubeBase::Torus { .. } => (None, None),
        TubeBase::Circle => {
            let lambda = match options.lambda {
                Some(l) => l,
                None => {
                    curvature_sample(params, options.curvature_samples, options.seed)?.lambda_bar()
                }
            };
            if !(lambda > 0.0) {
                return Err(Error::Argument(format!(
                    "curvature bound must be positive, got {lambda}"
                )));
            }
            (Some(lambda), Some(circle_length(params, lattice[0])))
        }
    };
    let weyl_bound = t_grid
        .iter()
        .map(|t| {
            lambda.zip(base_length).map(|(l, len)| {
                let root = l.sqrt();
                std::f64::consts::PI * len * (2.0 * t * root).sin() / root
            })
        })
        .collect();
    Ok(TubeReport {
        base: *base,
        lattice,
        t: t_grid.to_vec(),
        second_difference: second_differences(t_grid, &area),
        area,
        weyl_bound,
        lambda,
        base_length,
    })
}

/// Length of the circle `z1 = 0` by periodic quadrature of its speed.
fn circle_length(params: &WeightedParams, n: usize) -> f64 {
    let h = std::f64::consts::TAU / n as f64;
    (0..n)
        .map(|i| {
            let u = i as f64 * h;
            let p = AmbientPoint::on_torus(0.0, 0.0, u).expect("on the sphere");
            let tangent = Vector4::new(0.0, 0.0, -u.sin(), u.cos());
            Frame::at(params, &p).norm(&tangent)
        })
        .sum::<f64>()
        * h
}

/// `max |(|H|^2 - |A|^2) + 2|` over an `n x n` sample of the torus `|z1| = c1`,
/// with the shape operator taken from differences of the unit normal field.
pub fn torus_shape_identity(params: &WeightedParams, c1: f64, n: usize) -> Result<f64> {
    TubeBase::Torus { c1 }.validate()?;
    let tau = std::f64::consts::TAU;
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let (u, v) = (
                tau * i as f64 / n as f64,
                tau * (j as f64 + 0.37) / n as f64,
            );
            let point = AmbientPoint::on_torus(c1, u, v)?;
            let x = *point.vector();
            let f = Frame::at(params, &point);
            let xi = f.reeb();
            let along = Vector4::new(-x[1], x[0], 0.0, 0.0);
            let w = along - xi * f.metric(&along, &xi);
            let basis = [xi, w / f.norm(&w)];
            let normal = torus_normal(params, &x)?;
            let gamma = christoffel(params, &x)?;
            let h = CONNECTION_STEP;
            let mut s = [[0.0; 2]; 2];
            for (a, e) in basis.iter().enumerate() {
                let at = |k: f64| torus_normal(params, &(x + e * (k * h)));
                let dn = (at(-2.0)? - at(-1.0)? * 8.0 + at(1.0)? * 8.0 - at(2.0)?) / (12.0 * h);
                let cov = Vector4::from_fn(|k, _| {
                    let mut acc = dn[k];
                    for p in 0..4 {
                        for q in 0..4 {
                            acc += gamma[k][p][q] * e[p] * normal[q];
                        }
                    }
                    acc
                });
                for (b, e2) in basis.iter().enumerate() {
                    s[a][b] = f.metric(&cov, e2);
                }
            }
            let trace = s[0][0] + s[1][1];
            let square = s[0][0].powi(2) + s[1][1].powi(2) + 2.0 * s[0][1] * s[1][0];
            worst = worst.max((trace * trace - square + 2.0).abs());
        }
    }
    Ok(worst)
}

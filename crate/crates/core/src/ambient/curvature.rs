//! Sectional curvature from second differences of the metric.

use nalgebra::{Matrix3, Matrix4, SymmetricEigen, Vector4};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use super::frame::{
    christoffel, complex_structure, contact_basis, extended_metric, AmbientPoint, Frame,
};
use crate::error::{Error, Result};
use crate::weighted::{round_profile_and_curvature, WeightedParams};

/// Coarse step of the double differences; the fine step is half of it.
pub const HESSIAN_STEP: f64 = 1e-3;

/// Smallest accepted sample count.
pub const MIN_SAMPLES: usize = 100;

type Tensor4 = [[[[f64; 4]; 4]; 4]; 4];

fn hessian_at_step(params: &WeightedParams, x: &Vector4<f64>, h: f64) -> [[Matrix4<f64>; 4]; 4] {
    let g = |d: Vector4<f64>| extended_metric(params, &(x + d));
    let centre = g(Vector4::zeros());
    let mut out = [[Matrix4::zeros(); 4]; 4];
    for a in 0..4 {
        let ea = Vector4::ith(a, h);
        out[a][a] = (g(ea) - centre * 2.0 + g(-ea)) / (h * h);
        for b in 0..a {
            let eb = Vector4::ith(b, h);
            let m = (g(ea + eb) - g(ea - eb) - g(eb - ea) + g(-ea - eb)) / (4.0 * h * h);
            out[a][b] = m;
            out[b][a] = m;
        }
    }
    out
}

/// Second partials `∂_a ∂_b G`, Richardson-extrapolated from steps `h` and `h/2`.
fn metric_hessian(params: &WeightedParams, x: &Vector4<f64>) -> [[Matrix4<f64>; 4]; 4] {
    let coarse = hessian_at_step(params, x, HESSIAN_STEP);
    let fine = hessian_at_step(params, x, 0.5 * HESSIAN_STEP);
    let mut out = fine;
    for a in 0..4 {
        for b in 0..4 {
            out[a][b] = fine[a][b] + (fine[a][b] - coarse[a][b]) / 3.0;
        }
    }
    out
}

/// Fully covariant curvature tensor at one point, normalized so that
/// `R(u, v, u, v)` is the sectional curvature numerator.
#[derive(Clone, Debug)]
pub struct Riemann {
    point: AmbientPoint,
    metric: Matrix4<f64>,
    tensor: Tensor4,
}

impl Riemann {
    pub fn at(params: &WeightedParams, point: &AmbientPoint) -> Result<Self> {
        let x = point.vector();
        let metric = extended_metric(params, x);
        let d2 = metric_hessian(params, x);
        let gamma = christoffel(params, x)?;
        let mut tensor = [[[[0.0; 4]; 4]; 4]; 4];
        for i in 0..4 {
            for k in 0..4 {
                for l in 0..4 {
                    for m in 0..4 {
                        let second = 0.5
                            * (d2[k][l][(i, m)] + d2[i][m][(k, l)]
                                - d2[k][m][(i, l)]
                                - d2[i][l][(k, m)]);
                        let mut quad = 0.0;
                        for n in 0..4 {
                            for p in 0..4 {
                                quad += metric[(n, p)]
                                    * (gamma[n][k][l] * gamma[p][i][m]
                                        - gamma[n][k][m] * gamma[p][i][l]);
                            }
                        }
                        tensor[i][k][l][m] = second + quad;
                    }
                }
            }
        }
        Ok(Self {
            point: *point,
            metric,
            tensor,
        })
    }

    pub fn point(&self) -> &AmbientPoint {
        &self.point
    }

    pub fn component(
        &self,
        u: &Vector4<f64>,
        v: &Vector4<f64>,
        w: &Vector4<f64>,
        z: &Vector4<f64>,
    ) -> f64 {
        let mut acc = 0.0;
        for i in 0..4 {
            for k in 0..4 {
                for l in 0..4 {
                    for m in 0..4 {
                        acc += self.tensor[i][k][l][m] * u[i] * v[k] * w[l] * z[m];
                    }
                }
            }
        }
        acc
    }

    /// Sectional curvature of the plane spanned by two tangent vectors.
    pub fn sectional(&self, u: &Vector4<f64>, v: &Vector4<f64>) -> f64 {
        let g = |a: &Vector4<f64>, b: &Vector4<f64>| a.dot(&(self.metric * b));
        let area2 = g(u, u) * g(v, v) - g(u, v).powi(2);
        self.component(u, v, u, v) / area2
    }

    /// Largest eigenvalue of the curvature operator on 2-vectors. In three
    /// dimensions every 2-vector is a plane, so this is the pointwise maximum
    /// of the sectional curvature.
    pub fn max_sectional(&self, params: &WeightedParams) -> f64 {
        let e = orthonormal_tangent_frame(params, &self.point);
        let pairs = [(1, 2), (2, 0), (0, 1)];
        let q = Matrix3::from_fn(|a, b| {
            let (i, j) = pairs[a];
            let (k, l) = pairs[b];
            self.component(&e[i], &e[j], &e[k], &e[l])
        });
        let sym = (q + q.transpose()) * 0.5;
        SymmetricEigen::new(sym).eigenvalues.max()
    }
}

/// Orthonormal basis `(xi, e2, e3)` of the tangent space with `e2, e3` horizontal.
pub fn orthonormal_tangent_frame(
    params: &WeightedParams,
    point: &AmbientPoint,
) -> [Vector4<f64>; 3] {
    let f = Frame::at(params, point);
    let (j, _) = contact_basis(point.vector());
    // On the contact plane the metric is a multiple of the Euclidean one and
    // i preserves it, so (j, i j) is orthogonal there.
    let e2 = j / f.norm(&j);
    let e3 = complex_structure(&e2);
    [f.reeb(), e2, e3 / f.norm(&e3)]
}

/// Which plane a sampled value belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlaneKind {
    /// The contact plane.
    Contact,
    /// Spanned by the Reeb field and a horizontal vector.
    Reeb,
    /// Spanned by two random tangent vectors.
    Random,
}

impl PlaneKind {
    pub fn id(self) -> u8 {
        match self {
            PlaneKind::Contact => 0,
            PlaneKind::Reeb => 1,
            PlaneKind::Random => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvatureRecord {
    pub point: [f64; 4],
    pub plane: PlaneKind,
    pub curvature: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvatureSample {
    /// Largest sampled sectional curvature over all recorded planes.
    pub k_max_estimate: f64,
    /// Largest pointwise maximum (curvature-operator eigenvalue) over the points.
    pub k_max_pointwise: f64,
    /// `max |2 K(contact plane) + 6 - R|` against the closed-form transverse curvature.
    pub r_transverse_check: f64,
    /// `max |K(xi, X) - 1|`.
    pub reeb_plane_error: f64,
    pub records: Vec<CurvatureRecord>,
}

impl CurvatureSample {
    /// Upper bound on the sectional curvature used in tube estimates.
    pub fn lambda_bar(&self) -> f64 {
        self.k_max_estimate.max(self.k_max_pointwise)
    }
}

/// Uniform point on the sphere.
pub fn random_point(rng: &mut ChaCha8Rng) -> AmbientPoint {
    loop {
        let v: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(rng));
        if let Ok(p) = AmbientPoint::normalized(v) {
            return p;
        }
    }
}

/// Samples `count` random points; at each records the contact plane, a
/// Reeb plane and a random plane.
pub fn curvature_sample(
    params: &WeightedParams,
    count: usize,
    seed: u64,
) -> Result<CurvatureSample> {
    if count < MIN_SAMPLES {
        return Err(Error::Precondition(format!(
            "at least {MIN_SAMPLES} samples required, got {count}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let angle = Uniform::new(0.0, std::f64::consts::TAU);
    let mut out = CurvatureSample {
        k_max_estimate: f64::NEG_INFINITY,
        k_max_pointwise: f64::NEG_INFINITY,
        r_transverse_check: 0.0,
        reeb_plane_error: 0.0,
        records: Vec::with_capacity(3 * count),
    };
    for _ in 0..count {
        let point = random_point(&mut rng);
        let beta = angle.sample(&mut rng);
        let mix: [f64; 6] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
        let riemann = Riemann::at(params, &point)?;
        let [xi, e2, e3] = orthonormal_tangent_frame(params, &point);

        let contact = riemann.sectional(&e2, &e3);
        let closed = round_profile_and_curvature(params, point.level()).curvature;
        out.r_transverse_check = out
            .r_transverse_check
            .max((2.0 * contact + 6.0 - closed).abs());

        let horizontal = e2 * beta.cos() + e3 * beta.sin();
        let reeb = riemann.sectional(&xi, &horizontal);
        out.reeb_plane_error = out.reeb_plane_error.max((reeb - 1.0).abs());

        let u = xi * mix[0] + e2 * mix[1] + e3 * mix[2];
        let v = xi * mix[3] + e2 * mix[4] + e3 * mix[5];
        let random = riemann.sectional(&u, &v);

        for (plane, k) in [
            (PlaneKind::Contact, contact),
            (PlaneKind::Reeb, reeb),
            (PlaneKind::Random, random),
        ] {
            out.k_max_estimate = out.k_max_estimate.max(k);
            out.records.push(CurvatureRecord {
                point: point.coords(),
                plane,
                curvature: k,
            });
        }
        out.k_max_pointwise = out.k_max_pointwise.max(riemann.max_sectional(params));
    }
    Ok(out)
}

//! Pointwise contact data and the metric `g = ½ dη(·, Φ·) + η ⊗ η`.

use nalgebra::{Matrix4, Vector4};

use crate::error::{Error, Result};
use crate::weighted::WeightedParams;

/// Multiplication by `i` on `C^2`, in the real coordinates `(x1, y1, x2, y2)`.
pub fn complex_structure(v: &Vector4<f64>) -> Vector4<f64> {
    Vector4::new(-v[1], v[0], -v[3], v[2])
}

/// Quaternionic `j` and `k` applied to `x`. Together with `i x` they frame
/// the tangent space of the sphere at `x`, and `j x`, `k x` span the contact
/// plane everywhere.
pub fn contact_basis(x: &Vector4<f64>) -> (Vector4<f64>, Vector4<f64>) {
    // j (z1, z2) = (-conj z2, conj z1), k = i j.
    let j = Vector4::new(-x[2], x[3], x[0], -x[1]);
    (j, complex_structure(&j))
}

/// A point of the unit sphere in `R^4`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AmbientPoint {
    x: Vector4<f64>,
}

impl AmbientPoint {
    pub const TOLERANCE: f64 = 1e-12;

    pub fn new(coords: [f64; 4]) -> Result<Self> {
        let x = Vector4::from(coords);
        let norm = x.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > Self::TOLERANCE {
            return Err(Error::Argument(format!(
                "point must lie on the unit sphere, |x| = {norm}"
            )));
        }
        Ok(Self { x })
    }

    /// Radial projection of a nonzero vector.
    pub fn normalized(coords: [f64; 4]) -> Result<Self> {
        let x = Vector4::from(coords);
        let norm = x.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::Argument("cannot project the origin".into()));
        }
        Ok(Self { x: x / norm })
    }

    /// `(|z1| e^{i theta1}, sqrt(1 - |z1|^2) e^{i theta2})`.
    pub fn on_torus(modulus: f64, theta1: f64, theta2: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&modulus) {
            return Err(Error::Argument(format!(
                "|z1| must lie in [0, 1], got {modulus}"
            )));
        }
        let other = (1.0 - modulus * modulus).sqrt();
        Self::normalized([
            modulus * theta1.cos(),
            modulus * theta1.sin(),
            other * theta2.cos(),
            other * theta2.sin(),
        ])
    }

    pub(crate) fn from_vector(x: Vector4<f64>) -> Self {
        Self { x: x / x.norm() }
    }

    pub fn vector(&self) -> &Vector4<f64> {
        &self.x
    }

    pub fn coords(&self) -> [f64; 4] {
        [self.x[0], self.x[1], self.x[2], self.x[3]]
    }

    /// `|z1|^2`, the torus label.
    pub fn level(&self) -> f64 {
        self.x[0] * self.x[0] + self.x[1] * self.x[1]
    }
}

/// Contact form, Reeb field, transverse structure and metric at one point.
#[derive(Clone, Copy, Debug)]
pub struct Frame {
    params: WeightedParams,
    x: Vector4<f64>,
    sigma: f64,
    reeb: Vector4<f64>,
    // eta(v) = contact . v
    contact: Vector4<f64>,
}

impl Frame {
    pub fn at(params: &WeightedParams, point: &AmbientPoint) -> Self {
        Self::unchecked(params, point.vector())
    }

    /// Frame at the radial projection of any nonzero `x`.
    fn unchecked(params: &WeightedParams, x: &Vector4<f64>) -> Self {
        let x = x / x.norm();
        let (a1, a2) = (params.a1, params.a2);
        let sigma = a1 * (x[0] * x[0] + x[1] * x[1]) + a2 * (x[2] * x[2] + x[3] * x[3]);
        let ix = complex_structure(&x);
        let reeb = Vector4::new(a1 * ix[0], a1 * ix[1], a2 * ix[2], a2 * ix[3]);
        Self {
            params: *params,
            x,
            sigma,
            reeb,
            contact: ix / sigma,
        }
    }

    pub fn params(&self) -> &WeightedParams {
        &self.params
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn reeb(&self) -> Vector4<f64> {
        self.reeb
    }

    /// `eta_a(v) = sigma^{-1} eta_0(v)`.
    pub fn eta(&self, v: &Vector4<f64>) -> f64 {
        self.contact.dot(v)
    }

    /// `eta_0(v)`.
    pub fn standard_eta(&self, v: &Vector4<f64>) -> f64 {
        complex_structure(&self.x).dot(v)
    }

    /// Component of `v` in the contact plane along the Reeb splitting.
    pub fn horizontal(&self, v: &Vector4<f64>) -> Vector4<f64> {
        v - self.reeb * self.eta(v)
    }

    /// Transverse complex structure: `i` on the contact plane, zero on the Reeb line.
    pub fn phi(&self, v: &Vector4<f64>) -> Vector4<f64> {
        complex_structure(&self.horizontal(v))
    }

    /// `d eta_a = d(sigma^{-1}) ∧ eta_0 + sigma^{-1} d eta_0`.
    pub fn d_eta(&self, v: &Vector4<f64>, w: &Vector4<f64>) -> f64 {
        let (a1, a2) = (self.params.a1, self.params.a2);
        let x = &self.x;
        let d_sigma = |u: &Vector4<f64>| {
            2.0 * (a1 * (x[0] * u[0] + x[1] * u[1]) + a2 * (x[2] * u[2] + x[3] * u[3]))
        };
        let d_inv = |u: &Vector4<f64>| -d_sigma(u) / (self.sigma * self.sigma);
        let d_eta0 = 2.0 * complex_structure(v).dot(w);
        d_inv(v) * self.standard_eta(w) - d_inv(w) * self.standard_eta(v) + d_eta0 / self.sigma
    }

    /// `g(v, w) = ½ d eta_a(v_D, Φ w_D) + eta_a(v) eta_a(w)`.
    pub fn metric(&self, v: &Vector4<f64>, w: &Vector4<f64>) -> f64 {
        0.5 * self.d_eta(&self.horizontal(v), &self.phi(w)) + self.eta(v) * self.eta(w)
    }

    pub fn norm(&self, v: &Vector4<f64>) -> f64 {
        self.metric(v, v).sqrt()
    }

    /// Gram matrix of the metric on `R^4`, restricted to the tangent space.
    pub fn tangent_matrix(&self) -> Matrix4<f64> {
        // v_D = B v with B = I - reeb contact^T, so g = B^T B / sigma + c c^T.
        let b = Matrix4::identity() - self.reeb * self.contact.transpose();
        b.transpose() * b / self.sigma + self.contact * self.contact.transpose()
    }

    /// Projection of `v` onto the tangent space of the sphere.
    pub fn tangent(&self, v: &Vector4<f64>) -> Vector4<f64> {
        v - self.x * self.x.dot(v)
    }
}

/// Metric on `R^4 \ {0}` that is the radial product `dr^2 + g_{S^3}`, so the
/// unit sphere is totally geodesic and its geodesics can be integrated in the
/// flat coordinates of `R^4`.
pub fn extended_metric(params: &WeightedParams, x: &Vector4<f64>) -> Matrix4<f64> {
    let r2 = x.norm_squared();
    let n = x / r2.sqrt();
    let frame = Frame::unchecked(params, x);
    let (xi, c) = (frame.reeb, frame.contact);
    // Both xi and c are orthogonal to n, so projecting B^T B / sigma + c c^T
    // onto the tangent space only replaces I by I - n n^T.
    let nn = n * n.transpose();
    let horizontal = (Matrix4::identity() - nn - c * xi.transpose() - xi * c.transpose()
        + c * c.transpose() * xi.norm_squared())
        / frame.sigma;
    (horizontal + c * c.transpose()) / r2 + nn
}

/// Step of the metric differences behind the connection.
pub const CONNECTION_STEP: f64 = 1e-4;

/// First partial derivatives `∂_a G` by fourth-order central differences.
pub fn metric_gradient(params: &WeightedParams, x: &Vector4<f64>) -> [Matrix4<f64>; 4] {
    let h = CONNECTION_STEP;
    std::array::from_fn(|a| {
        let e = Vector4::ith(a, h);
        let g = |k: f64| extended_metric(params, &(x + e * k));
        (g(-2.0) - g(-1.0) * 8.0 + g(1.0) * 8.0 - g(2.0)) / (12.0 * h)
    })
}

/// Christoffel symbols `Γ^k_{ab}` indexed `[k][a][b]`.
pub fn christoffel(params: &WeightedParams, x: &Vector4<f64>) -> Result<[[[f64; 4]; 4]; 4]> {
    let dg = metric_gradient(params, x);
    let inv = inverse(&extended_metric(params, x))?;
    let mut lowered = [[[0.0; 4]; 4]; 4];
    for (c, row) in lowered.iter_mut().enumerate() {
        for (a, entry) in row.iter_mut().enumerate() {
            for (b, value) in entry.iter_mut().enumerate() {
                *value = 0.5 * (dg[a][(c, b)] + dg[b][(c, a)] - dg[c][(a, b)]);
            }
        }
    }
    let mut out = [[[0.0; 4]; 4]; 4];
    for k in 0..4 {
        for a in 0..4 {
            for b in 0..4 {
                out[k][a][b] = (0..4).map(|c| inv[(k, c)] * lowered[c][a][b]).sum();
            }
        }
    }
    Ok(out)
}

/// Geodesic acceleration `-Γ(v, v)`.
pub fn acceleration(
    params: &WeightedParams,
    x: &Vector4<f64>,
    v: &Vector4<f64>,
) -> Result<Vector4<f64>> {
    let dg = metric_gradient(params, x);
    let mut directional = Matrix4::zeros();
    for (a, d) in dg.iter().enumerate() {
        directional += d * v[a];
    }
    // Γ_c(v, v) = (∂_v G v)_c - ½ v^T ∂_c G v.
    let first = directional * v;
    let lowered = Vector4::from_fn(|c, _| first[c] - 0.5 * v.dot(&(dg[c] * v)));
    let g = extended_metric(params, x);
    match g.cholesky() {
        Some(ch) => Ok(-ch.solve(&lowered)),
        None => Err(Error::Integration(format!(
            "metric is not positive definite at {x:?}"
        ))),
    }
}

pub(crate) fn inverse(m: &Matrix4<f64>) -> Result<Matrix4<f64>> {
    m.cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::Integration("metric is not positive definite".into()))
}

//! Coordinate charts with finite-difference Levi-Civita connections.
//!
//! Christoffel symbols are returned as a [`Tensor3`] with `Γ[[i, j, k]] = Γ^k_ij`.

use nalgebra::DMatrix;

use crate::connections::{q_from_torsion, PhiTensor};
use crate::error::{Error, Result};
use crate::structure_gen::{symmetry_defect, StructureTensor};
use crate::tensor::{metric_inverse, Dim, Metric, ProductStructure, Tensor3};
use crate::tolerance::Tolerance;
use crate::torsion_space::TorsionTensor;

/// Largest symmetry defect of an FD structure tensor still accepted.
pub const FD_SYMMETRY_TOL: f64 = 1e-4;

/// Coordinates beyond this magnitude are rejected by the conformal chart.
pub const CONFORMAL_COORD_LIMIT: f64 = 10.0;

/// Smooth metric and product-structure fields on a single chart.
pub trait Chart {
    fn name(&self) -> &str;

    fn dim(&self) -> Dim;

    /// Metric components `g_ij(u)`.
    fn metric_at(&self, u: &[f64]) -> DMatrix<f64>;

    /// Product structure components `P^k_j(u)`, stored as `[(k, j)]`.
    fn product_at(&self, u: &[f64]) -> DMatrix<f64>;

    fn validate_point(&self, u: &[f64]) -> Result<()> {
        let d = self.dim().total();
        if u.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: u.len(),
            });
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("chart point"));
        }
        Ok(())
    }
}

/// `g = I`, `P = diag(I_n, −I_n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatProduct {
    pub n: Dim,
}

impl Chart for FlatProduct {
    fn name(&self) -> &str {
        "flat_product"
    }

    fn dim(&self) -> Dim {
        self.n
    }

    fn metric_at(&self, _u: &[f64]) -> DMatrix<f64> {
        DMatrix::identity(self.n.total(), self.n.total())
    }

    fn product_at(&self, _u: &[f64]) -> DMatrix<f64> {
        ProductStructure::standard(self.n).components().clone()
    }
}

/// `g = e^{2σ(u)} I` with `σ(u) = Σ sigma_i u^i`, `P = diag(I_n, −I_n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConformalProduct {
    pub n: Dim,
    pub sigma: Vec<f64>,
}

impl ConformalProduct {
    pub fn new(n: Dim, sigma: Vec<f64>) -> Result<Self> {
        if sigma.len() != n.total() {
            return Err(Error::DimensionMismatch {
                expected: n.total(),
                found: sigma.len(),
            });
        }
        if sigma.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("conformal factor"));
        }
        Ok(Self { n, sigma })
    }

    /// `σ = 0.3 u¹`.
    pub fn standard(n: Dim) -> Self {
        let mut sigma = vec![0.0; n.total()];
        sigma[0] = 0.3;
        Self { n, sigma }
    }

    pub fn sigma_at(&self, u: &[f64]) -> f64 {
        self.sigma.iter().zip(u).map(|(s, x)| s * x).sum()
    }
}

impl Chart for ConformalProduct {
    fn name(&self) -> &str {
        "conformal_product"
    }

    fn dim(&self) -> Dim {
        self.n
    }

    fn metric_at(&self, u: &[f64]) -> DMatrix<f64> {
        let d = self.n.total();
        DMatrix::identity(d, d) * (2.0 * self.sigma_at(u)).exp()
    }

    fn product_at(&self, _u: &[f64]) -> DMatrix<f64> {
        ProductStructure::standard(self.n).components().clone()
    }

    fn validate_point(&self, u: &[f64]) -> Result<()> {
        let d = self.n.total();
        if u.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: u.len(),
            });
        }
        match u
            .iter()
            .find(|v| !v.is_finite() || v.abs() > CONFORMAL_COORD_LIMIT)
        {
            Some(v) => Err(Error::Chart(format!(
                "coordinate {v} outside [-{CONFORMAL_COORD_LIMIT}, {CONFORMAL_COORD_LIMIT}]"
            ))),
            None => Ok(()),
        }
    }
}

/// `g = I` and `P = R diag(I_n, −I_n) Rᵀ`, with `R` the rotation by
/// `rate · u²` in the `(e₁, e_{n+1})` plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotatedP {
    pub n: Dim,
    pub rate: f64,
}

impl RotatedP {
    pub fn new(n: Dim, rate: f64) -> Result<Self> {
        if !rate.is_finite() {
            return Err(Error::NonFinite("rotation rate"));
        }
        Ok(Self { n, rate })
    }

    fn rotation(&self, u: &[f64]) -> DMatrix<f64> {
        let d = self.n.total();
        let a = self.rate * u[1];
        let (s, c) = a.sin_cos();
        let m = self.n.half();
        let mut r = DMatrix::identity(d, d);
        r[(0, 0)] = c;
        r[(0, m)] = -s;
        r[(m, 0)] = s;
        r[(m, m)] = c;
        r
    }
}

impl Chart for RotatedP {
    fn name(&self) -> &str {
        "rotated_p"
    }

    fn dim(&self) -> Dim {
        self.n
    }

    fn metric_at(&self, _u: &[f64]) -> DMatrix<f64> {
        DMatrix::identity(self.n.total(), self.n.total())
    }

    fn product_at(&self, u: &[f64]) -> DMatrix<f64> {
        let r = self.rotation(u);
        &r * ProductStructure::standard(self.n).components() * r.transpose()
    }
}

pub const BUILTIN_CHARTS: [&str; 3] = ["flat_product", "conformal_product", "rotated_p"];

/// Built-in chart by name, with default parameters.
pub fn builtin_chart(name: &str, n: Dim) -> Result<Box<dyn Chart + Send + Sync>> {
    match name {
        "flat_product" => Ok(Box::new(FlatProduct { n })),
        "conformal_product" => Ok(Box::new(ConformalProduct::standard(n))),
        "rotated_p" => Ok(Box::new(RotatedP::new(n, 1.0)?)),
        other => Err(Error::Chart(format!(
            "unknown chart '{other}' (expected one of {})",
            BUILTIN_CHARTS.join(", ")
        ))),
    }
}

/// Central-difference step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdConfig {
    h: f64,
}

impl Default for FdConfig {
    fn default() -> Self {
        Self { h: 1e-5 }
    }
}

impl FdConfig {
    pub fn new(h: f64) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "FD step must be positive, got {h}"
            )));
        }
        Ok(Self { h })
    }

    pub fn h(&self) -> f64 {
        self.h
    }
}

/// Central-difference partials `∂_i M` of a matrix field.
fn partials(
    u: &[f64],
    h: f64,
    mut field: impl FnMut(&[f64]) -> Result<DMatrix<f64>>,
) -> Result<Vec<DMatrix<f64>>> {
    let mut shifted = u.to_vec();
    (0..u.len())
        .map(|i| {
            shifted[i] = u[i] + h;
            let plus = field(&shifted)?;
            shifted[i] = u[i] - h;
            let minus = field(&shifted)?;
            shifted[i] = u[i];
            Ok((plus - minus) / (2.0 * h))
        })
        .collect()
}

fn spd_metric(chart: &dyn Chart, u: &[f64]) -> Result<DMatrix<f64>> {
    let g = chart.metric_at(u);
    metric_inverse(&g)?;
    Ok(g)
}

/// `Γ^k_ij = ½ g^{kl}(∂_i g_jl + ∂_j g_il − ∂_l g_ij)`.
fn christoffel_from(g_inv: &DMatrix<f64>, dg: &[DMatrix<f64>]) -> Tensor3 {
    let d = g_inv.nrows();
    Tensor3::from_fn(d, |i, j, k| {
        let mut acc = 0.0;
        for l in 0..d {
            acc += g_inv[(k, l)] * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]);
        }
        0.5 * acc
    })
}

/// Levi-Civita Christoffel symbols of the chart metric at `point`.
pub fn christoffel(chart: &dyn Chart, point: &[f64], cfg: FdConfig) -> Result<Tensor3> {
    chart.validate_point(point)?;
    let g_inv = metric_inverse(&chart.metric_at(point))?;
    let dg = partials(point, cfg.h, |u| spd_metric(chart, u))?;
    Ok(christoffel_from(&g_inv, &dg))
}

/// `(∇_i P)^k_j = ∂_i P^k_j + Γ^k_im P^m_j − Γ^m_ij P^k_m`, as `[[i, j, k]]`.
fn covariant_p(gamma: &Tensor3, p: &DMatrix<f64>, dp: &[DMatrix<f64>]) -> Tensor3 {
    let d = p.nrows();
    Tensor3::from_fn(d, |i, j, k| {
        let mut acc = dp[i][(k, j)];
        for m in 0..d {
            acc += gamma.get(i, m, k) * p[(m, j)] - gamma.get(i, j, m) * p[(k, m)];
        }
        acc
    })
}

/// Metric, product structure and FD structure tensor `F_ijk = g_kl (∇_i P)^l_j`.
pub fn structure_tensor_at(
    chart: &dyn Chart,
    point: &[f64],
    cfg: FdConfig,
) -> Result<(Metric, ProductStructure, StructureTensor)> {
    let gamma = christoffel(chart, point, cfg)?;
    let g = Metric::new(chart.metric_at(point))?;
    let p = ProductStructure::new(chart.product_at(point), &g)?;
    let dp = partials(point, cfg.h, |u| Ok(chart.product_at(u)))?;
    let nabla_p = covariant_p(&gamma, p.components(), &dp);
    let gm = g.components();
    let d = g.dim();
    let f = Tensor3::from_fn(d, |i, j, k| {
        (0..d).map(|l| gm[(k, l)] * nabla_p.get(i, j, l)).sum()
    });
    let (what, residual) = symmetry_defect(&f, &p);
    if residual > FD_SYMMETRY_TOL {
        return Err(Error::InvalidStructureTensor { what, residual });
    }
    let f = StructureTensor::with_tolerance(f, &p, Tolerance::new(FD_SYMMETRY_TOL, 0.0))?;
    Ok((g, p, f))
}

/// `Φ_ijk = g_kl (Γ̃^l_ij − Γ^l_ij)`, with `Γ̃` the Levi-Civita connection of
/// the associated metric `g̃_ij = g_ik P^k_j`.
pub fn phi_fd(chart: &dyn Chart, point: &[f64], cfg: FdConfig) -> Result<PhiTensor> {
    let gamma = christoffel(chart, point, cfg)?;
    let associated = |u: &[f64]| chart.metric_at(u) * chart.product_at(u);
    let gt = associated(point);
    let scale = gt.amax().max(1.0);
    let gt_inv = gt
        .clone()
        .try_inverse()
        .filter(|inv| inv.iter().all(|v| v.is_finite()) && inv.amax() * scale < 1e12)
        .ok_or(Error::SingularAssociatedMetric)?;
    let dgt = partials(point, cfg.h, |u| Ok(associated(u)))?;
    let gamma_t = christoffel_from(&gt_inv, &dgt);
    let diff = &gamma_t - &gamma;
    let gm = chart.metric_at(point);
    let d = gm.nrows();
    Ok(PhiTensor::new(Tensor3::from_fn(d, |i, j, k| {
        (0..d).map(|l| gm[(k, l)] * diff.get(i, j, l)).sum()
    })))
}

/// Norms of `∇'g` and `∇'P` for `∇' = ∇ + Q`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct FdNaturality {
    pub metric_residual: f64,
    pub product_residual: f64,
}

/// Builds `Γ'^k_ij = Γ^k_ij + g^{kl} Q_ijl` from the transformation tensor of
/// `T` and evaluates `∇'g` and `∇'P` at `point`.
pub fn natural_connection_fd_check(
    chart: &dyn Chart,
    point: &[f64],
    t: &TorsionTensor,
    cfg: FdConfig,
) -> Result<FdNaturality> {
    let gamma = christoffel(chart, point, cfg)?;
    let g = Metric::new(chart.metric_at(point))?;
    let d = g.dim();
    if t.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: t.dim(),
        });
    }
    let q = q_from_torsion(t).into_tensor();
    let gi = g.inverse();
    let gamma_p = Tensor3::from_fn(d, |i, j, k| {
        gamma.get(i, j, k) + (0..d).map(|l| gi[(k, l)] * q.get(i, j, l)).sum::<f64>()
    });

    let gm = g.components();
    let dg = partials(point, cfg.h, |u| spd_metric(chart, u))?;
    // ∇'_i g_jk = ∂_i g_jk − Γ'^m_ij g_mk − Γ'^m_ik g_jm
    let nabla_g = Tensor3::from_fn(d, |i, j, k| {
        let mut acc = dg[i][(j, k)];
        for m in 0..d {
            acc -= gamma_p.get(i, j, m) * gm[(m, k)] + gamma_p.get(i, k, m) * gm[(j, m)];
        }
        acc
    });
    let p = chart.product_at(point);
    let dp = partials(point, cfg.h, |u| Ok(chart.product_at(u)))?;
    let nabla_p = covariant_p(&gamma_p, &p, &dp);
    Ok(FdNaturality {
        metric_residual: nabla_g.frobenius_norm(),
        product_residual: nabla_p.frobenius_norm(),
    })
}

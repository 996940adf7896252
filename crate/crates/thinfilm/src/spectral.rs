//! Neumann cosine basis on Omega = (0,1).
//!
//! Fields are expanded in the eigenbasis of the Neumann Laplacian,
//! `phi_0 = 1`, `phi_k = sqrt(2) cos(k pi x)` with eigenvalues
//! `lambda_k = (k pi)^2`. The nonlocal operator `I = -sqrt(-Delta_N)`
//! acts diagonally (`c_k -> -k pi c_k`) and is also exposed through its
//! singular-kernel and harmonic-extension representations for
//! cross-validation. Homogeneous `H^s_N` semi-norms are coefficient sums
//! `sum_{k>=1} c_k^2 (k pi)^{2s}`.

use crate::error::{Error, Result};
use std::f64::consts::{PI, SQRT_2};

/// Mode truncation plus midpoint quadrature resolution.
///
/// Quadrature nodes are the midpoints `x_j = (j + 1/2) / n_quad`. With
/// `n_quad >= 2 (n_modes + 1)` the midpoint rule integrates every product
/// `cos(a pi x) cos(b pi x)` with `a + b < 2 n_quad` exactly, so
/// analysis/synthesis round-trips are exact on band-limited data.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GridSpec {
    n_modes: usize,
    n_quad: usize,
}

impl GridSpec {
    /// Grid with the default quadrature resolution `8 (n_modes + 1)`.
    pub fn new(n_modes: usize) -> Result<Self> {
        Self::with_quad(n_modes, 8 * (n_modes + 1))
    }

    pub fn with_quad(n_modes: usize, n_quad: usize) -> Result<Self> {
        if n_modes < 1 {
            return Err(Error::InvalidGrid(format!(
                "n_modes must be >= 1, got {n_modes}"
            )));
        }
        if n_quad < 2 * (n_modes + 1) {
            return Err(Error::InvalidGrid(format!(
                "n_quad {n_quad} must be >= 2 (n_modes + 1) = {}",
                2 * (n_modes + 1)
            )));
        }
        Ok(Self { n_modes, n_quad })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn n_quad(&self) -> usize {
        self.n_quad
    }

    /// j-th midpoint quadrature node.
    pub fn node(&self, j: usize) -> f64 {
        (j as f64 + 0.5) / self.n_quad as f64
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_quad).map(|j| self.node(j))
    }

    /// Midpoint rule over (0,1): the mean of the samples.
    pub fn quadrature(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.n_quad);
        values.iter().sum::<f64>() / self.n_quad as f64
    }
}

/// k-th Neumann eigenvalue `(k pi)^2`.
pub fn eigenvalue(k: usize) -> f64 {
    let kp = k as f64 * PI;
    kp * kp
}

/// `phi_k(x)`: 1 for k = 0, `sqrt(2) cos(k pi x)` otherwise.
pub fn basis_fn(k: usize, x: f64) -> f64 {
    if k == 0 {
        1.0
    } else {
        SQRT_2 * (k as f64 * PI * x).cos()
    }
}

/// `psi_k(x) = sqrt(2) sin(k pi x)`, k >= 1.
pub fn sine_basis_fn(k: usize, x: f64) -> f64 {
    SQRT_2 * (k as f64 * PI * x).sin()
}

/// A function on (0,1) held as cosine coefficients `c_0 .. c_N`.
///
/// The mean (mass) is exactly `c_0`. An optional sample cache on the
/// quadrature grid avoids repeated synthesis in hot loops.
#[derive(Clone, Debug)]
pub struct CosineField {
    coeffs: Vec<f64>,
    grid: GridSpec,
    values: Option<Vec<f64>>,
}

impl CosineField {
    pub fn from_coeffs(coeffs: Vec<f64>, grid: GridSpec) -> Result<Self> {
        if coeffs.len() != grid.n_modes + 1 {
            return Err(Error::LengthMismatch {
                expected: grid.n_modes + 1,
                got: coeffs.len(),
            });
        }
        for (k, c) in coeffs.iter().enumerate() {
            if !c.is_finite() {
                return Err(Error::NonFiniteCoefficient(k));
            }
        }
        Ok(Self {
            coeffs,
            grid,
            values: None,
        })
    }

    pub fn zero(grid: GridSpec) -> Self {
        Self {
            coeffs: vec![0.0; grid.n_modes + 1],
            grid,
            values: None,
        }
    }

    pub fn constant(level: f64, grid: GridSpec) -> Self {
        let mut f = Self::zero(grid);
        f.coeffs[0] = level;
        f
    }

    /// `amplitude * phi_k`.
    pub fn mode(k: usize, amplitude: f64, grid: GridSpec) -> Result<Self> {
        if k > grid.n_modes {
            return Err(Error::InvalidGrid(format!(
                "mode {k} exceeds n_modes {}",
                grid.n_modes
            )));
        }
        let mut f = Self::zero(grid);
        f.coeffs[k] = amplitude;
        Ok(f)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    /// Mean of the field: exactly the coefficient of `phi_0`.
    pub fn mass(&self) -> f64 {
        self.coeffs[0]
    }

    /// Pointwise synthesis at an arbitrary x.
    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c * basis_fn(k, x))
            .sum()
    }

    /// Samples on the quadrature grid, from the cache when present.
    pub fn samples(&self) -> Vec<f64> {
        match &self.values {
            Some(v) => v.clone(),
            None => synthesize(self),
        }
    }

    /// Same field with the sample cache filled.
    pub fn with_cache(mut self) -> Self {
        if self.values.is_none() {
            self.values = Some(synthesize(&self));
        }
        self
    }

    /// `sum c_k^2` (the basis is orthonormal in L^2).
    pub fn l2_norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }

    /// Full H^1 norm squared `sum c_k^2 (1 + lambda_k)`.
    pub fn h1_norm_sq(&self) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c * c * (1.0 + eigenvalue(k)))
            .sum()
    }

    pub fn min_max(&self) -> (f64, f64) {
        let v = self.samples();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for x in v {
            lo = lo.min(x);
            hi = hi.max(x);
        }
        (lo, hi)
    }
}

/// Odd-derivative carrier: coefficients `s_1 .. s_N` in `sqrt(2) sin(k pi x)`.
///
/// The x-derivative of any `CosineField` is a `SineField`, so the Neumann
/// condition `u_x(0) = u_x(1) = 0` holds identically.
#[derive(Clone, Debug)]
pub struct SineField {
    coeffs: Vec<f64>,
    grid: GridSpec,
}

impl SineField {
    pub fn from_coeffs(coeffs: Vec<f64>, grid: GridSpec) -> Result<Self> {
        if coeffs.len() != grid.n_modes {
            return Err(Error::LengthMismatch {
                expected: grid.n_modes,
                got: coeffs.len(),
            });
        }
        for (k, c) in coeffs.iter().enumerate() {
            if !c.is_finite() {
                return Err(Error::NonFiniteCoefficient(k + 1));
            }
        }
        Ok(Self { coeffs, grid })
    }

    /// Coefficient of `sqrt(2) sin(k pi x)`; `coeffs()[k-1]` for mode k.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, s)| s * sine_basis_fn(i + 1, x))
            .sum()
    }

    pub fn samples(&self) -> Vec<f64> {
        self.grid
            .nodes()
            .map(|x| self.eval(x))
            .collect()
    }

    /// `sum s_k^2` (sine modes are orthonormal in L^2).
    pub fn l2_norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|s| s * s).sum()
    }
}

/// Either parity of a derivative.
#[derive(Clone, Debug)]
pub enum Derivative {
    Cosine(CosineField),
    Sine(SineField),
}

/// Samples `v_j = sum_k c_k phi_k(x_j)` on the quadrature grid.
pub fn synthesize(field: &CosineField) -> Vec<f64> {
    if let Some(v) = &field.values {
        return v.clone();
    }
    field
        .grid
        .nodes()
        .map(|x| field.eval(x))
        .collect()
}

/// Midpoint-rule projection onto the cosine basis.
///
/// Exact inverse of `synthesize` on band-limited data.
pub fn analyze(values: &[f64], grid: GridSpec) -> Result<CosineField> {
    if values.len() != grid.n_quad {
        return Err(Error::LengthMismatch {
            expected: grid.n_quad,
            got: values.len(),
        });
    }
    let q = grid.n_quad as f64;
    let mut coeffs = vec![0.0; grid.n_modes + 1];
    for (k, c) in coeffs.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (j, v) in values.iter().enumerate() {
            acc += v * basis_fn(k, grid.node(j));
        }
        *c = acc / q;
    }
    CosineField::from_coeffs(coeffs, grid)
}

/// First derivative: `d/dx [sqrt(2) cos(k pi x)] = -k pi sqrt(2) sin(k pi x)`.
pub fn dx(field: &CosineField) -> SineField {
    let n = field.grid.n_modes;
    let coeffs = (1..=n)
        .map(|k| -(k as f64 * PI) * field.coeffs[k])
        .collect();
    SineField {
        coeffs,
        grid: field.grid,
    }
}

/// Second derivative: `c_k -> -lambda_k c_k`.
pub fn dxx(field: &CosineField) -> CosineField {
    let coeffs = field
        .coeffs
        .iter()
        .enumerate()
        .map(|(k, c)| -eigenvalue(k) * c)
        .collect();
    CosineField {
        coeffs,
        grid: field.grid,
        values: None,
    }
}

/// Third derivative: sine coefficients `+(k pi)^3 c_k`.
pub fn dxxx(field: &CosineField) -> SineField {
    let n = field.grid.n_modes;
    let coeffs = (1..=n)
        .map(|k| {
            let kp = k as f64 * PI;
            kp * kp * kp * field.coeffs[k]
        })
        .collect();
    SineField {
        coeffs,
        grid: field.grid,
    }
}

/// Fourth derivative: `c_k -> lambda_k^2 c_k`.
pub fn dxxxx(field: &CosineField) -> CosineField {
    let coeffs = field
        .coeffs
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let l = eigenvalue(k);
            l * l * c
        })
        .collect();
    CosineField {
        coeffs,
        grid: field.grid,
        values: None,
    }
}

/// Derivative of any supported order; odd orders land in the sine basis.
pub fn derivative(field: &CosineField, order: u32) -> Result<Derivative> {
    match order {
        1 => Ok(Derivative::Sine(dx(field))),
        2 => Ok(Derivative::Cosine(dxx(field))),
        3 => Ok(Derivative::Sine(dxxx(field))),
        4 => Ok(Derivative::Cosine(dxxxx(field))),
        o => Err(Error::UnsupportedOrder(o)),
    }
}

/// Derivative of a sine field: `d/dx [sqrt(2) sin(k pi x)] = k pi sqrt(2) cos(k pi x)`.
pub fn dx_sine(field: &SineField) -> CosineField {
    let mut coeffs = vec![0.0; field.grid.n_modes + 1];
    for (i, s) in field.coeffs.iter().enumerate() {
        let k = i + 1;
        coeffs[k] = k as f64 * PI * s;
    }
    CosineField {
        coeffs,
        grid: field.grid,
        values: None,
    }
}

/// The nonlocal operator in spectral form: `I(u) = -sum c_k (k pi) phi_k`.
pub fn apply_i(field: &CosineField) -> CosineField {
    let coeffs = field
        .coeffs
        .iter()
        .enumerate()
        .map(|(k, c)| -(k as f64 * PI) * c)
        .collect();
    CosineField {
        coeffs,
        grid: field.grid,
        values: None,
    }
}

/// Singular kernel of the integral representation of I:
/// `nu(x,y) = (pi/2) [1/(1 - cos(pi (x-y))) + 1/(1 - cos(pi (x+y)))]`.
pub fn kernel_nu(x: f64, y: f64) -> Result<f64> {
    let d1 = 1.0 - (PI * (x - y)).cos();
    let d2 = 1.0 - (PI * (x + y)).cos();
    if d1 < 1e-14 || d2 < 1e-14 {
        return Err(Error::SingularKernel { x, y });
    }
    Ok(0.5 * PI * (1.0 / d1 + 1.0 / d2))
}

/// Principal-value quadrature of `I(u)(x) = int (u(y) - u(x)) nu(x,y) dy`.
///
/// Excludes the symmetric window `|y - x| < pv_cut`; accuracy O(pv_cut) on
/// smooth fields. Cross-validation only; `apply_i` is authoritative.
pub fn apply_i_kernel(field: &CosineField, x: f64, pv_cut: f64) -> Result<f64> {
    let grid = field.grid;
    let spacing = 1.0 / grid.n_quad as f64;
    if pv_cut <= spacing {
        return Err(Error::InvalidPvCut { pv_cut, spacing });
    }
    if x < pv_cut || x > 1.0 - pv_cut {
        return Err(Error::BoundaryEvaluation { x, pv_cut });
    }
    let ux = field.eval(x);
    // slope at x, for subtracting the odd singular part of the integrand:
    // (u(y) - u(x)) nu ~ u'(x)/2 cot(pi (y-x)/2) near y = x, and the
    // cotangent has the exact antiderivative (2/pi) ln|sin(pi r / 2)|.
    // Without the subtraction the discrete cut window, which is generally
    // not symmetric about x, leaves an O(h / pv_cut) error.
    let du: f64 = field
        .coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, c)| -(k as f64 * PI) * c * sine_basis_fn(k, x))
        .sum();
    let samples = field.samples();
    let mut acc = 0.0;
    for (j, uy) in samples.iter().enumerate() {
        let y = grid.node(j);
        let r = y - x;
        if r.abs() < pv_cut {
            continue;
        }
        let odd_part = 0.5 * du * (0.5 * PI * r).cos() / (0.5 * PI * r).sin();
        acc += (uy - ux) * kernel_nu(x, y)? - odd_part;
    }
    let odd_integral = du / PI
        * ((0.5 * PI * (1.0 - x)).sin().ln() - (0.5 * PI * x).sin().ln());
    // the excluded window still carries the even part of the integrand,
    // int_{|r|<cut} (u''/2) r^2 nu dr = u'' cut / pi + O(cut^3)
    let ddu: f64 = field
        .coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, c)| -eigenvalue(k) * c * basis_fn(k, x))
        .sum();
    let window = ddu * pv_cut / PI;
    Ok(acc * spacing + odd_integral + window)
}

/// Harmonic extension to the half-strip:
/// `v(x,y) = c_0 + sum_{k>=1} c_k phi_k(x) exp(-k pi y)`.
///
/// Its trace at y = 0 is u, and `d_y v(x, 0) = I(u)(x)`. Defined for any
/// real y (the truncated series is entire in y); it grows exponentially
/// for y < 0, which the finite-difference cross-check exploits.
pub fn harmonic_extension(field: &CosineField, x: f64, y: f64) -> f64 {
    let mut acc = field.coeffs[0];
    for (k, c) in field.coeffs.iter().enumerate().skip(1) {
        let kp = k as f64 * PI;
        acc += c * basis_fn(k, x) * (-kp * y).exp();
    }
    acc
}

/// Homogeneous semi-norm squared `sum_{k>=1} c_k^2 (k pi)^{2s}`.
pub fn seminorm_hs(field: &CosineField, s: f64) -> Result<f64> {
    if s < 0.0 {
        return Err(Error::InvalidSeminormOrder(s));
    }
    Ok(field
        .coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, c)| c * c * (k as f64 * PI).powf(2.0 * s))
        .sum())
}

/// Precomputed basis samples for hot loops (assembly, corpora).
///
/// Row-major tables of `phi_k(x_j)` and `sqrt(2) sin(k pi x_j)` on the
/// quadrature grid.
pub struct BasisTable {
    grid: GridSpec,
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl BasisTable {
    pub fn new(grid: GridSpec) -> Self {
        let q = grid.n_quad;
        let n = grid.n_modes;
        let mut cos = vec![0.0; (n + 1) * q];
        let mut sin = vec![0.0; n * q];
        for k in 0..=n {
            for j in 0..q {
                cos[k * q + j] = basis_fn(k, grid.node(j));
            }
        }
        for k in 1..=n {
            for j in 0..q {
                sin[(k - 1) * q + j] = sine_basis_fn(k, grid.node(j));
            }
        }
        Self { grid, cos, sin }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn cos_row(&self, k: usize) -> &[f64] {
        let q = self.grid.n_quad;
        &self.cos[k * q..(k + 1) * q]
    }

    /// Samples of `sqrt(2) sin(k pi x)`, k >= 1.
    pub fn sin_row(&self, k: usize) -> &[f64] {
        let q = self.grid.n_quad;
        &self.sin[(k - 1) * q..k * q]
    }

    pub fn synthesize(&self, coeffs: &[f64]) -> Vec<f64> {
        let q = self.grid.n_quad;
        let mut out = vec![coeffs[0]; q];
        for (k, c) in coeffs.iter().enumerate().skip(1) {
            if *c == 0.0 {
                continue;
            }
            let row = self.cos_row(k);
            for j in 0..q {
                out[j] += c * row[j];
            }
        }
        out
    }

    pub fn synthesize_sine(&self, coeffs: &[f64]) -> Vec<f64> {
        let q = self.grid.n_quad;
        let mut out = vec![0.0; q];
        for (i, s) in coeffs.iter().enumerate() {
            if *s == 0.0 {
                continue;
            }
            let row = self.sin_row(i + 1);
            for j in 0..q {
                out[j] += s * row[j];
            }
        }
        out
    }

    pub fn field_samples(&self, field: &CosineField) -> Vec<f64> {
        self.synthesize(field.coeffs())
    }

    pub fn sine_samples(&self, field: &SineField) -> Vec<f64> {
        self.synthesize_sine(field.coeffs())
    }
}

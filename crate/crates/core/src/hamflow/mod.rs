//! Time-periodic Hamiltonians on collars and their flows.
//!
//! A collar point is the flat state vector `x = (r, q, x_1, y_1, …, x_{n−1}, y_{n−1})`:
//! the Liouville coordinate `r` followed by the boundary chart of [`ContactChart`].
//! On the non-degenerate side `ω = d(rα) = dr∧α + r·dα` and `i_X ω = −dH`.

pub mod ode;

use std::io::Write;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{liouville_reparam, liouville_reparam_derivative, CollarProfile, ContactChart};
use crate::linalg::fd_step;
pub use ode::{integrate, DenseStep, IntegratorStats, OdeOptions, Solution, DEFAULT_TOL};

/// A 1-periodic (in `t`) Hamiltonian on a collar chart.
///
/// Only `chart` and `eval` are required; the derivatives default to central
/// finite differences and should be overridden where closed forms exist.
pub trait HamiltonianModel: Send + Sync {
    fn chart(&self) -> ContactChart;

    fn eval(&self, t: f64, x: &[f64]) -> f64;

    /// Full coordinate gradient `(∂_r H, ∂_q H, ∂_{x_1} H, …)`.
    fn grad(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let mut p = x.to_vec();
        (0..x.len())
            .map(|i| {
                let h = fd_step(x[i], 1e-6);
                p[i] = x[i] + h;
                let fp = self.eval(t, &p);
                p[i] = x[i] - h;
                let fm = self.eval(t, &p);
                p[i] = x[i];
                (fp - fm) / (2.0 * h)
            })
            .collect()
    }

    fn grad_r(&self, t: f64, x: &[f64]) -> f64 {
        self.grad(t, x)[0]
    }

    /// Derivatives along the boundary coordinates.
    fn grad_b(&self, t: f64, x: &[f64]) -> Vec<f64> {
        self.grad(t, x)[1..].to_vec()
    }

    /// `H_t|_B`, with `B = {r = 1}`.
    fn boundary_restriction(&self, t: f64, b: &[f64]) -> f64 {
        let mut x = Vec::with_capacity(b.len() + 1);
        x.push(1.0);
        x.extend_from_slice(b);
        self.eval(t, &x)
    }

    /// `dH(R_α) = ∂_q H`.
    fn reeb_derivative(&self, t: f64, x: &[f64]) -> f64 {
        self.grad_b(t, x)[0]
    }

    /// Contact-Hamiltonian ξ-component `X^ξ = −dH(e_y)·e_x + dH(e_x)·e_y`, as a
    /// coordinate vector on `B` (not yet divided by `r`).
    fn xi_part(&self, t: f64, x: &[f64]) -> Vec<f64> {
        xi_part_from_grad(&self.chart(), &x[1..], &self.grad(t, x)[1..])
    }

    /// Range of `r` on which the model is defined.
    fn r_range(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }

    fn is_autonomous(&self) -> bool {
        false
    }
}

impl<H: HamiltonianModel + ?Sized> HamiltonianModel for Arc<H> {
    fn chart(&self) -> ContactChart {
        (**self).chart()
    }
    fn eval(&self, t: f64, x: &[f64]) -> f64 {
        (**self).eval(t, x)
    }
    fn grad(&self, t: f64, x: &[f64]) -> Vec<f64> {
        (**self).grad(t, x)
    }
    fn grad_r(&self, t: f64, x: &[f64]) -> f64 {
        (**self).grad_r(t, x)
    }
    fn grad_b(&self, t: f64, x: &[f64]) -> Vec<f64> {
        (**self).grad_b(t, x)
    }
    fn boundary_restriction(&self, t: f64, b: &[f64]) -> f64 {
        (**self).boundary_restriction(t, b)
    }
    fn reeb_derivative(&self, t: f64, x: &[f64]) -> f64 {
        (**self).reeb_derivative(t, x)
    }
    fn xi_part(&self, t: f64, x: &[f64]) -> Vec<f64> {
        (**self).xi_part(t, x)
    }
    fn r_range(&self) -> (f64, f64) {
        (**self).r_range()
    }
    fn is_autonomous(&self) -> bool {
        (**self).is_autonomous()
    }
}

/// `X^ξ` from the boundary part of the gradient.
pub fn xi_part_from_grad(chart: &ContactChart, b: &[f64], grad_b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; chart.dim()];
    let hq = grad_b[0];
    for i in 0..chart.pairs() {
        let (xi, yi) = (b[1 + 2 * i], b[2 + 2 * i]);
        let dh_ex = grad_b[1 + 2 * i] + 0.5 * yi * hq;
        let dh_ey = grad_b[2 + 2 * i] - 0.5 * xi * hq;
        // −dH(e_y)·e_x
        out[0] += -dh_ey * 0.5 * yi;
        out[1 + 2 * i] += -dh_ey;
        // +dH(e_x)·e_y
        out[0] += dh_ex * (-0.5 * xi);
        out[2 + 2 * i] += dh_ex;
    }
    out
}

type ScalarFn = dyn Fn(f64, &[f64]) -> f64 + Send + Sync;

/// Hamiltonian given by a closure, optionally with an exact gradient.
#[derive(Clone)]
pub struct FnHamiltonian {
    chart: ContactChart,
    f: Arc<ScalarFn>,
    grad: Option<Arc<dyn Fn(f64, &[f64]) -> Vec<f64> + Send + Sync>>,
    autonomous: bool,
}

impl std::fmt::Debug for FnHamiltonian {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FnHamiltonian").field("chart", &self.chart).field("autonomous", &self.autonomous).finish()
    }
}

impl FnHamiltonian {
    pub fn new(chart: ContactChart, f: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self { chart, f: Arc::new(f), grad: None, autonomous: false }
    }

    pub fn with_grad(mut self, g: impl Fn(f64, &[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.grad = Some(Arc::new(g));
        self
    }

    pub fn autonomous(mut self) -> Self {
        self.autonomous = true;
        self
    }
}

impl HamiltonianModel for FnHamiltonian {
    fn chart(&self) -> ContactChart {
        self.chart
    }
    fn eval(&self, t: f64, x: &[f64]) -> f64 {
        (self.f)(t, x)
    }
    fn grad(&self, t: f64, x: &[f64]) -> Vec<f64> {
        match &self.grad {
            Some(g) => g(t, x),
            None => {
                let plain = FnHamiltonian { grad: None, ..self.clone() };
                fd_gradient(&plain, t, x)
            }
        }
    }
    fn is_autonomous(&self) -> bool {
        self.autonomous
    }
}

/// Central-difference gradient, independent of any override.
pub fn fd_gradient<H: HamiltonianModel + ?Sized>(h: &H, t: f64, x: &[f64]) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            let d = fd_step(x[i], 1e-6);
            p[i] = x[i] + d;
            let fp = h.eval(t, &p);
            p[i] = x[i] - d;
            let fm = h.eval(t, &p);
            p[i] = x[i];
            (fp - fm) / (2.0 * d)
        })
        .collect()
}

/// `X_H = reeb_coeff·R_α + xi_vec + liouville_coeff·V` with `V = r∂_r`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorFieldSplit {
    pub reeb_coeff: f64,
    /// ξ-component as a coordinate vector on `B`.
    pub xi_vec: Vec<f64>,
    pub liouville_coeff: f64,
}

impl VectorFieldSplit {
    /// Coordinate components `(ṙ, ḃ)` at Liouville coordinate `r`.
    pub fn reconstruct(&self, r: f64) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.xi_vec.len() + 1);
        v.push(self.liouville_coeff * r);
        v.extend_from_slice(&self.xi_vec);
        v[1] += self.reeb_coeff;
        v
    }
}

fn split_from_grad(chart: &ContactChart, x: &[f64], grad: &[f64]) -> VectorFieldSplit {
    let r = x[0];
    let xi = xi_part_from_grad(chart, &x[1..], &grad[1..]);
    VectorFieldSplit {
        reeb_coeff: grad[0],
        xi_vec: if chart.pairs() == 0 { xi } else { xi.iter().map(|v| v / r).collect() },
        liouville_coeff: -grad[1] / r,
    }
}

/// Splits `X_H` at `x` into its Reeb, ξ and Liouville parts.
pub fn split_vector_field<H: HamiltonianModel + ?Sized>(h: &H, t: f64, x: &[f64]) -> Result<VectorFieldSplit> {
    if x[0] == 0.0 {
        return Err(Error::DegenerateAtBoundary(x[0]));
    }
    Ok(split_from_grad(&h.chart(), x, &h.grad(t, x)))
}

/// The split of `X_{E∘Q}` on the non-degenerate collar, with `E` given on the degenerate one.
///
/// The Reeb coefficient is `(∂_r E∘Q)·F′(r)` and has a pole at the boundary.
pub fn pullback_vector_field<E: HamiltonianModel + ?Sized>(
    e: &E,
    profile: &CollarProfile,
    t: f64,
    x: &[f64],
) -> Result<VectorFieldSplit> {
    let r = x[0];
    if r >= 1.0 {
        return Err(Error::PoleAtBoundary(r));
    }
    if r == 0.0 {
        return Err(Error::DegenerateAtBoundary(r));
    }
    let rd = liouville_reparam(profile, r)?;
    let dq = liouville_reparam_derivative(profile, r)?;
    let mut xd = x.to_vec();
    xd[0] = rd;
    let mut g = e.grad(t, &xd);
    g[0] *= dq;
    Ok(split_from_grad(&e.chart(), x, &g))
}

/// `H = E∘Q`: a Hamiltonian on the degenerate collar moved to the non-degenerate one.
#[derive(Debug, Clone)]
pub struct Nondegenerated<E> {
    pub inner: E,
    pub profile: CollarProfile,
}

impl<E: HamiltonianModel> Nondegenerated<E> {
    pub fn new(inner: E, profile: CollarProfile) -> Self {
        Self { inner, profile }
    }

    fn degenerate_point(&self, x: &[f64]) -> Option<Vec<f64>> {
        let rd = liouville_reparam(&self.profile, x[0]).ok()?;
        let mut xd = x.to_vec();
        xd[0] = rd;
        Some(xd)
    }
}

impl<E: HamiltonianModel> HamiltonianModel for Nondegenerated<E> {
    fn chart(&self) -> ContactChart {
        self.inner.chart()
    }
    fn eval(&self, t: f64, x: &[f64]) -> f64 {
        self.degenerate_point(x).map_or(f64::NAN, |xd| self.inner.eval(t, &xd))
    }
    fn grad(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let Some(xd) = self.degenerate_point(x) else {
            return vec![f64::NAN; x.len()];
        };
        let mut g = self.inner.grad(t, &xd);
        g[0] *= liouville_reparam_derivative(&self.profile, x[0]).unwrap_or(f64::NAN);
        g
    }
    fn r_range(&self) -> (f64, f64) {
        (1.0 - self.profile.s_max(), 1.0)
    }
    fn is_autonomous(&self) -> bool {
        self.inner.is_autonomous()
    }
}

/// Coordinate components of `X_H` at `x`, written into `out`.
pub fn hamiltonian_vector_field<H: HamiltonianModel + ?Sized>(h: &H, t: f64, x: &[f64], out: &mut [f64]) -> Result<()> {
    let (lo, hi) = h.r_range();
    if !(x[0] >= lo && x[0] <= hi) {
        return Err(Error::EscapedDomain(x[0]));
    }
    let chart = h.chart();
    let g = h.grad(t, x);
    if chart.pairs() > 0 && x[0] <= 0.0 {
        return Err(Error::DegenerateAtBoundary(x[0]));
    }
    // ṙ = −∂_q H directly, so that n = 1 charts may cross r = 0
    let xi = xi_part_from_grad(&chart, &x[1..], &g[1..]);
    out[0] = -g[1];
    for (o, v) in out[1..].iter_mut().zip(&xi) {
        *o = if chart.pairs() == 0 { *v } else { v / x[0] };
    }
    out[1] += g[0];
    if out.iter().any(|c| !c.is_finite()) {
        return Err(Error::EscapedDomain(x[0]));
    }
    Ok(())
}

/// `ω_x(u, v)` for `ω = dr∧α + r·dα` in the collar chart.
pub fn omega(chart: &ContactChart, x: &[f64], u: &[f64], v: &[f64]) -> f64 {
    let a = chart.alpha(&x[1..]);
    let alpha = |w: &[f64]| a.iter().zip(&w[1..]).map(|(p, q)| p * q).sum::<f64>();
    let mut w = u[0] * alpha(v) - v[0] * alpha(u);
    for i in 0..chart.pairs() {
        let (ix, iy) = (2 + 2 * i, 3 + 2 * i);
        w += x[0] * (u[ix] * v[iy] - u[iy] * v[ix]);
    }
    w
}

/// A sampled flow line `x : [0, T] → collar`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Absolute start time; `times` are measured from it.
    pub t0: f64,
    pub times: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub t_total: f64,
    pub stats: IntegratorStats,
    pub dense: Vec<DenseStep>,
}

impl Trajectory {
    pub fn end(&self) -> &[f64] {
        self.points.last().expect("trajectory is never empty")
    }

    pub fn at(&self, t: f64) -> Vec<f64> {
        Solution { times: vec![0.0], states: vec![self.points[0].clone()], dense: self.dense.clone(), stats: self.stats }
            .at(t)
    }

    /// Writes `t, coordinates…, H, r` rows.
    pub fn write_csv<H: HamiltonianModel + ?Sized, W: Write>(&self, h: &H, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend((0..self.points[0].len()).map(|i| format!("x{i}")));
        header.push("H".into());
        header.push("r".into());
        wr.write_record(&header)?;
        for (t, p) in self.times.iter().zip(&self.points) {
            let mut row = vec![t.to_string()];
            row.extend(p.iter().map(|v| v.to_string()));
            row.push(h.eval(self.t0 + t, p).to_string());
            row.push(p[0].to_string());
            wr.write_record(&row)?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Integrates `ẋ = X_H(t, x)` over `[0, T]`.
pub fn integrate_flow<H: HamiltonianModel + ?Sized>(h: &H, p0: &[f64], t_end: f64, tol: f64) -> Result<Trajectory> {
    integrate_flow_from(h, p0, 0.0, t_end, &OdeOptions::with_tol(tol))
}

/// As [`integrate_flow`], starting at time `t0` (the flow is non-autonomous).
pub fn integrate_flow_from<H: HamiltonianModel + ?Sized>(
    h: &H,
    p0: &[f64],
    t0: f64,
    t_end: f64,
    opts: &OdeOptions,
) -> Result<Trajectory> {
    if p0.len() != 2 * h.chart().n {
        return Err(Error::Config(format!("state has {} components, chart needs {}", p0.len(), 2 * h.chart().n)));
    }
    let sol = integrate(|t, x, dx| hamiltonian_vector_field(h, t, x, dx), p0, t0, t0 + t_end, opts)?;
    Ok(Trajectory {
        t0,
        times: sol.times.iter().map(|t| t - t0).collect(),
        points: sol.states,
        t_total: t_end,
        stats: sol.stats,
        dense: sol
            .dense
            .into_iter()
            .map(|mut d| {
                d.t -= t0;
                d
            })
            .collect(),
    })
}

/// Time-`T` flow map `x ↦ φ^T(x)`.
pub fn flow_map<H: HamiltonianModel + ?Sized>(h: &H, x: &[f64], t_end: f64, tol: f64) -> Result<Vec<f64>> {
    let opts = OdeOptions { tol, max_step: None, dense: false };
    let sol = integrate(|t, y, dy| hamiltonian_vector_field(h, t, y, dy), x, 0.0, t_end, &opts)?;
    Ok(sol.last().to_vec())
}

/// Largest relative energy change along a trajectory of an autonomous Hamiltonian.
pub fn energy_drift<H: HamiltonianModel + ?Sized>(h: &H, traj: &Trajectory) -> f64 {
    let e0 = h.eval(traj.t0, &traj.points[0]);
    traj.points.iter().map(|p| (h.eval(traj.t0, p) - e0).abs()).fold(0.0, f64::max)
}

/// Boundary data needed by the twist conditions.
pub trait TwistSource {
    /// `H_t` at the boundary point `b`.
    fn boundary_value(&self, t: f64, b: &[f64]) -> f64;
    /// `h_t = α(X_{H_t})` at `b`.
    fn boundary_twist(&self, t: f64, b: &[f64]) -> f64;
}

/// Twist data of a collar Hamiltonian: `h_t = ∂_r H_t` at `r = 1`.
pub struct CollarTwist<'a, H: ?Sized>(pub &'a H);

impl<H: HamiltonianModel + ?Sized> TwistSource for CollarTwist<'_, H> {
    fn boundary_value(&self, t: f64, b: &[f64]) -> f64 {
        self.0.boundary_restriction(t, b)
    }
    fn boundary_twist(&self, t: f64, b: &[f64]) -> f64 {
        let mut x = vec![1.0];
        x.extend_from_slice(b);
        self.0.grad_r(t, &x)
    }
}

/// Sample of `B × [0, 1]_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryGrid {
    pub points: Vec<(f64, Vec<f64>)>,
}

impl BoundaryGrid {
    /// Uniform grid on `S¹_q × [0,1)_t` for `n = 1`, the `ξ`-coordinates set to zero otherwise.
    pub fn circle(chart: &ContactChart, nq: usize, nt: usize) -> Self {
        let mut points = Vec::with_capacity(nq * nt);
        for j in 0..nt {
            let t = j as f64 / nt as f64;
            for i in 0..nq {
                let mut b = vec![0.0; chart.dim()];
                b[0] = 2.0 * std::f64::consts::PI * i as f64 / nq as f64;
                points.push((t, b));
            }
        }
        Self { points }
    }

    pub fn from_points(points: Vec<(f64, Vec<f64>)>) -> Self {
        Self { points }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct WeakTwistReport {
    pub min_h: f64,
    pub max_h: f64,
    pub passes: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct QuantitativeTwistReport {
    pub min_h: f64,
    pub min_boundary_h: f64,
    pub max_boundary_h: f64,
    pub margin: f64,
    pub passes: bool,
}

/// `α(X_{H_t}) > 0` on every grid point.
pub fn check_weakened_twist<S: TwistSource + ?Sized>(src: &S, grid: &BoundaryGrid) -> WeakTwistReport {
    let (mut min_h, mut max_h) = (f64::INFINITY, f64::NEG_INFINITY);
    for (t, b) in &grid.points {
        let h = src.boundary_twist(*t, b);
        min_h = min_h.min(h);
        max_h = max_h.max(h);
    }
    WeakTwistReport { min_h, max_h, passes: min_h > 0.0 }
}

/// `H|_B > 0` and `min_B h_t > max_B H_t`.
pub fn check_quantitative_twist<S: TwistSource + ?Sized>(src: &S, grid: &BoundaryGrid) -> QuantitativeTwistReport {
    let (mut min_h, mut min_bh, mut max_bh) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (t, b) in &grid.points {
        min_h = min_h.min(src.boundary_twist(*t, b));
        let v = src.boundary_value(*t, b);
        min_bh = min_bh.min(v);
        max_bh = max_bh.max(v);
    }
    let margin = min_h - max_bh;
    QuantitativeTwistReport {
        min_h,
        min_boundary_h: min_bh,
        max_boundary_h: max_bh,
        margin,
        passes: min_bh > 0.0 && margin > 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn linear_r(n: usize) -> FnHamiltonian {
        FnHamiltonian::new(ContactChart::new(n), |_t, x| x[0]).autonomous()
    }

    /// A generic time-dependent Hamiltonian on the 6-dimensional collar.
    fn wiggly() -> FnHamiltonian {
        FnHamiltonian::new(ContactChart::new(3), |t, x| {
            let (r, q) = (x[0], x[1]);
            r * r * (1.0 + 0.3 * q.sin()) + 0.2 * x[2] * x[3] * r + 0.1 * (x[4] - x[5]).powi(2) * (2.0 * std::f64::consts::PI * t).cos()
                + 0.05 * x[2] * q.cos()
        })
    }

    #[test]
    fn linear_hamiltonian_is_pure_reeb() {
        let s = split_vector_field(&linear_r(2), 0.0, &[0.7, 0.1, 0.2, 0.3]).unwrap();
        assert!((s.reeb_coeff - 1.0).abs() < 1e-9);
        assert!(s.xi_vec.iter().all(|v| v.abs() < 1e-9));
        assert!(s.liouville_coeff.abs() < 1e-9);
    }

    #[test]
    fn linear_region_of_extension_is_reeb_with_slope() {
        let h = FnHamiltonian::new(ContactChart::new(1), |_t, x| 3.0 * (x[0] - 1.0) + 2.0);
        let s = split_vector_field(&h, 0.0, &[1.5, 0.4]).unwrap();
        assert!((s.reeb_coeff - 3.0).abs() < 1e-9 && s.liouville_coeff.abs() < 1e-9);
    }

    #[test]
    fn annulus_product_hamiltonian_reconstructs() {
        // H = r f(q) ⇒ X = f R_α − r f′ ∂_r
        let h = FnHamiltonian::new(ContactChart::new(1), |_t, x| x[0] * (2.0 + x[1].sin()));
        let x = [0.8, 0.6];
        let v = split_vector_field(&h, 0.0, &x).unwrap().reconstruct(x[0]);
        assert!((v[1] - (2.0 + 0.6f64.sin())).abs() < 1e-9);
        assert!((v[0] + 0.8 * 0.6f64.cos()).abs() < 1e-9);
    }

    #[test]
    fn boundary_request_is_degenerate() {
        assert_eq!(split_vector_field(&linear_r(1), 0.0, &[0.0, 0.0]), Err(Error::DegenerateAtBoundary(0.0)));
    }

    #[test]
    fn reeb_flow_of_linear_hamiltonian() {
        let traj = integrate_flow(&linear_r(1), &[0.5, 0.2], 3.0, 1e-10).unwrap();
        let e = traj.end();
        assert!((e[0] - 0.5).abs() < 1e-12 && (e[1] - 3.2).abs() < 1e-9);
        assert_eq!(traj.times[0], 0.0);
        assert_eq!(*traj.times.last().unwrap(), 3.0);
    }

    #[test]
    fn pullback_matches_fd_split_of_composition() {
        let e = FnHamiltonian::new(ContactChart::new(2), |_t, x| x[0] * x[0] * (1.5 + 0.2 * x[1].cos()) + 0.3 * x[2] * x[3]);
        for profile in [CollarProfile::default(), CollarProfile::polynomial(3).unwrap(), CollarProfile::Cosine] {
            let pulled = Nondegenerated::new(e.clone(), profile.clone());
            for r in [0.3, 0.55, 0.8, 0.95] {
                let x = [r, 0.4, 0.2, -0.1];
                let a = pullback_vector_field(&e, &profile, 0.0, &x).unwrap();
                let fd = split_from_grad(&e.chart(), &x, &fd_gradient(&pulled, 0.0, &x));
                assert!((a.reeb_coeff - fd.reeb_coeff).abs() < 1e-5 * a.reeb_coeff.abs().max(1.0));
                assert!((a.liouville_coeff - fd.liouville_coeff).abs() < 1e-5);
                for (u, v) in a.xi_vec.iter().zip(&fd.xi_vec) {
                    assert!((u - v).abs() < 1e-5);
                }
            }
        }
    }

    #[test]
    fn pullback_reeb_coefficient_blows_up_at_boundary() {
        let e = FnHamiltonian::new(ContactChart::new(1), |_t, x| x[0]);
        let p = CollarProfile::default();
        // E = r: reeb = F′(r) = 1/(2√s)
        let s = 0.25;
        let c = pullback_vector_field(&e, &p, 0.0, &[1.0 - s, 0.0]).unwrap().reeb_coeff;
        assert!((c - 1.0).abs() < 1e-8);
        let mut prev = 0.0;
        for k in 1..12 {
            let s = 10f64.powi(-k);
            let c = pullback_vector_field(&e, &p, 0.0, &[1.0 - s, 0.0]).unwrap().reeb_coeff;
            assert!(c > prev);
            prev = c;
        }
        assert!(prev > 1e5);
        assert_eq!(pullback_vector_field(&e, &p, 0.0, &[1.0, 0.0]), Err(Error::PoleAtBoundary(1.0)));
    }

    #[test]
    fn twist_checks() {
        let h = linear_r(1);
        let grid = BoundaryGrid::circle(&h.chart(), 16, 4);
        let w = check_weakened_twist(&CollarTwist(&h), &grid);
        assert!(w.passes && (w.min_h - 1.0).abs() < 1e-9);
        // H|_B ≡ 1, h ≡ 3
        let q = FnHamiltonian::new(ContactChart::new(1), |_t, x| 3.0 * x[0] - 2.0);
        let rep = check_quantitative_twist(&CollarTwist(&q), &grid);
        assert!(rep.passes && (rep.margin - 2.0).abs() < 1e-9);
        let neg = FnHamiltonian::new(ContactChart::new(1), |_t, x| x[0] * x[1].sin());
        assert!(!check_weakened_twist(&CollarTwist(&neg), &grid).passes);
    }

    #[test]
    fn flow_preserves_omega_and_energy() {
        let h = FnHamiltonian::new(ContactChart::new(2), |_t, x| {
            x[0] * x[0] + 0.3 * x[0] * x[1].sin() + 0.2 * (x[2] * x[2] + x[3] * x[3])
        })
        .autonomous();
        let tol = 1e-10;
        let x0 = [1.2, 0.3, 0.1, -0.2];
        let traj = integrate_flow(&h, &x0, 1.0, tol).unwrap();
        assert!(energy_drift(&h, &traj) <= 100.0 * tol * 1.0);
        let jac = fd_jacobian(&h, &x0, 1e-6);
        let x1 = traj.end().to_vec();
        let chart = h.chart();
        let (u, v) = ([0.3, -0.2, 0.5, 0.1], [-0.1, 0.4, 0.2, 0.7]);
        let du: Vec<f64> = (0..4).map(|i| (0..4).map(|j| jac[i][j] * u[j]).sum()).collect();
        let dv: Vec<f64> = (0..4).map(|i| (0..4).map(|j| jac[i][j] * v[j]).sum()).collect();
        let w0 = omega(&chart, &x0, &u, &v);
        let w1 = omega(&chart, &x1, &du, &dv);
        assert!((w0 - w1).abs() < 1e-5, "{w0} vs {w1}");
    }

    fn fd_jacobian(h: &FnHamiltonian, x: &[f64], step: f64) -> Vec<Vec<f64>> {
        let n = x.len();
        let mut cols = Vec::new();
        for j in 0..n {
            let mut p = x.to_vec();
            p[j] += step;
            let fp = flow_map(h, &p, 1.0, 1e-12).unwrap();
            p[j] -= 2.0 * step;
            let fm = flow_map(h, &p, 1.0, 1e-12).unwrap();
            cols.push((0..n).map(|i| (fp[i] - fm[i]) / (2.0 * step)).collect::<Vec<f64>>());
        }
        (0..n).map(|i| (0..n).map(|j| cols[j][i]).collect()).collect()
    }

    #[test]
    fn trajectory_csv_has_header_and_rows() {
        let h = linear_r(1);
        let traj = integrate_flow(&h, &[0.5, 0.0], 1.0, 1e-8).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&h, &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("t,x0,x1,H,r"));
        assert_eq!(s.lines().count(), traj.times.len() + 1);
    }

    proptest! {
        #[test]
        fn contraction_identity(r in 0.2f64..2.0, q in -3.0f64..3.0, a in -1.0f64..1.0, b in -1.0f64..1.0,
                                c in -1.0f64..1.0, d in -1.0f64..1.0, t in 0.0f64..1.0,
                                v in proptest::collection::vec(-1.0f64..1.0, 6)) {
            let h = wiggly();
            let x = [r, q, a, b, c, d];
            let s = split_vector_field(&h, t, &x).unwrap();
            let xh = s.reconstruct(r);
            let dh: f64 = h.grad(t, &x).iter().zip(&v).map(|(g, w)| g * w).sum();
            prop_assert!((omega(&h.chart(), &x, &xh, &v) + dh).abs() <= 1e-6);
        }
    }
}

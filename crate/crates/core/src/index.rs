//! Linearised flows, the `L0 + L1` block decomposition and Robbin–Salamon indices.
//!
//! Linearisation happens in the Darboux collar coordinates
//! `z = (X_1, Y_1, …, X_{n−1}, Y_{n−1}, r, q)` with `X = √r·x`, `Y = √r·y`, where
//! `ω = Σ dX∧dY + dr∧dq` is constant. There the flat connection gives
//! `∇X_H = J·Hess H`; `L0` collects the Hessian entries involving `r` and `L1`
//! the pure boundary entries.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::extension::ExtendedHamiltonian;
use crate::geometry::ContactChart;
use crate::hamflow::{integrate, HamiltonianModel, OdeOptions};
use crate::linalg::{fit_line, golden_min, symplectic_j};

const HESS_STEP: f64 = 1e-4;
const JAC_STEP: f64 = 1e-4;
const CROSSING_TOL: f64 = 1e-7;
const KERNEL_CUTOFF: f64 = 1e-6;
const SIGNATURE_TOL: f64 = 1e-9;

type MatrixFn = dyn Fn(f64) -> DMatrix<f64> + Send + Sync;

/// A path `Ψ : [t0, t1] → Sp(2n)` with `Ψ(t0) = I`, sampled and evaluable anywhere.
#[derive(Clone)]
pub struct SymplecticPath {
    pub times: Vec<f64>,
    pub matrices: Vec<DMatrix<f64>>,
    pub frame: String,
    eval: Arc<MatrixFn>,
}

impl std::fmt::Debug for SymplecticPath {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SymplecticPath")
            .field("frame", &self.frame)
            .field("samples", &self.times.len())
            .finish()
    }
}

impl SymplecticPath {
    /// Samples a closed-form path on `steps + 1` uniform times.
    pub fn from_fn(t0: f64, t1: f64, steps: usize, frame: impl Into<String>, f: impl Fn(f64) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        let steps = steps.max(1);
        let times: Vec<f64> = (0..=steps).map(|i| t0 + (t1 - t0) * i as f64 / steps as f64).collect();
        let matrices = times.iter().map(|t| f(*t)).collect();
        Self { times, matrices, frame: frame.into(), eval: Arc::new(f) }
    }

    pub fn dim(&self) -> usize {
        self.matrices[0].nrows()
    }

    pub fn at(&self, t: f64) -> DMatrix<f64> {
        (self.eval)(t)
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Largest `|ΨᵀJΨ − J|` over the samples.
    pub fn symplectic_residual(&self) -> f64 {
        self.matrices.iter().map(crate::linalg::symplectic_residual).fold(0.0, f64::max)
    }

    /// `Ψ` on `[t0, t1]` followed by `Ψ(t1)`-translated `Φ`: the catenation `Φ(t)·Ψ(t1)`.
    pub fn concat(&self, next: &SymplecticPath) -> SymplecticPath {
        let split = self.end();
        let offset = split - next.start();
        let last = self.at(split);
        let a = self.clone();
        let b = next.clone();
        let last_c = last.clone();
        let eval = move |t: f64| if t <= split { a.at(t) } else { b.at(t - offset) * &last_c };
        let mut times = self.times.clone();
        let mut matrices = self.matrices.clone();
        for (t, m) in next.times.iter().zip(&next.matrices).skip(1) {
            times.push(t + offset);
            matrices.push(m * &last);
        }
        SymplecticPath { times, matrices, frame: self.frame.clone(), eval: Arc::new(eval) }
    }
}

/// `exp(2π k t J)` on `ℝ²`: the `k`-fold rotation loop over `[0, 1]`.
pub fn rotation_path(k: f64, steps: usize) -> SymplecticPath {
    SymplecticPath::from_fn(0.0, 1.0, steps, "rotation", move |t| {
        let a = 2.0 * std::f64::consts::PI * k * t;
        DMatrix::from_row_slice(2, 2, &[a.cos(), -a.sin(), a.sin(), a.cos()])
    })
}

fn sigma_min(m: &DMatrix<f64>) -> f64 {
    let id = DMatrix::identity(m.nrows(), m.ncols());
    (m - id).singular_values().iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Signature of the crossing form at `t` (kernel of `Ψ(t) − I`).
fn crossing_signature(path: &SymplecticPath, t: f64) -> Result<i64> {
    let psi = path.at(t);
    let dim = psi.nrows();
    let id = DMatrix::<f64>::identity(dim, dim);
    let span = path.end() - path.start();
    let h = 1e-6 * span.max(1e-3);
    let (ta, tb) = ((t - h).max(path.start()), (t + h).min(path.end()));
    let dpsi = (path.at(tb) - path.at(ta)) / (tb - ta);
    let inv = psi.clone().try_inverse().ok_or(Error::FrameDegenerate)?;
    let j = symplectic_j(dim);
    let s = -(&j * dpsi * inv);
    let s = (&s + s.transpose()) * 0.5;
    let svd = (&psi - &id).svd(false, true);
    let v_t = svd.v_t.ok_or(Error::FrameDegenerate)?;
    let cols: Vec<_> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, sv)| **sv <= KERNEL_CUTOFF.max(1e-9))
        .map(|(i, _)| v_t.row(i).transpose())
        .collect();
    if cols.is_empty() {
        return Ok(0);
    }
    let k = DMatrix::from_columns(&cols);
    let gamma = k.transpose() * s * &k;
    let eig = nalgebra::SymmetricEigen::new(gamma);
    let mut sig = 0;
    for ev in eig.eigenvalues.iter() {
        if ev.abs() <= SIGNATURE_TOL {
            return Err(Error::NonIsolatedCrossing(t));
        }
        sig += if *ev > 0.0 { 1 } else { -1 };
    }
    Ok(sig)
}

/// A located crossing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Crossing {
    pub t: f64,
    pub signature: i64,
    pub endpoint: bool,
}

/// Crossing instants: local minima of `σ_min(Ψ − I)` on the sample grid,
/// refined by golden-section search.
pub fn find_crossings(path: &SymplecticPath) -> Result<Vec<Crossing>> {
    let (t0, t1) = (path.start(), path.end());
    let sig: Vec<f64> = path.matrices.iter().map(sigma_min).collect();
    let n = sig.len();
    let scale = |m: &DMatrix<f64>| m.amax().max(1.0);
    let mut out: Vec<Crossing> = Vec::new();
    let push = |c: Crossing, out: &mut Vec<Crossing>| {
        let close = out.iter().any(|o| (o.t - c.t).abs() <= 1e-9 * (t1 - t0).max(1.0));
        if !close {
            out.push(c);
        }
    };
    if sig[0] <= CROSSING_TOL * scale(&path.matrices[0]) {
        push(Crossing { t: t0, signature: crossing_signature(path, t0)?, endpoint: true }, &mut out);
    }
    let mut run = 0;
    for i in 1..n.saturating_sub(1) {
        if sig[i] <= CROSSING_TOL {
            run += 1;
            if run >= 3 {
                return Err(Error::NonIsolatedCrossing(path.times[i]));
            }
        } else {
            run = 0;
        }
        if !(sig[i] <= sig[i - 1] && sig[i] <= sig[i + 1]) {
            continue;
        }
        let (a, b) = (path.times[i - 1], path.times[i + 1]);
        let (t, s) = golden_min(|t| sigma_min(&path.at(t)), a, b, 200);
        if s > CROSSING_TOL * scale(&path.at(t)) {
            continue;
        }
        let tol_end = 1e-9 * (t1 - t0).max(1.0);
        if (t - t0).abs() <= tol_end || (t - t1).abs() <= tol_end {
            continue;
        }
        push(Crossing { t, signature: crossing_signature(path, t)?, endpoint: false }, &mut out);
    }
    let last = &path.matrices[n - 1];
    if n > 1 && sig[n - 1] <= CROSSING_TOL * scale(last) {
        push(Crossing { t: t1, signature: crossing_signature(path, t1)?, endpoint: true }, &mut out);
    }
    out.sort_by(|a, b| a.t.partial_cmp(&b.t).unwrap());
    Ok(out)
}

/// Robbin–Salamon index: half signatures at the endpoints, full ones inside.
pub fn rs_index(path: &SymplecticPath) -> Result<f64> {
    let dim = path.dim();
    let id = DMatrix::<f64>::identity(dim, dim);
    if path.matrices.iter().all(|m| (m - &id).amax() <= 1e-14) {
        return Ok(0.0);
    }
    Ok(find_crossings(path)?
        .iter()
        .map(|c| if c.endpoint { 0.5 * c.signature as f64 } else { c.signature as f64 })
        .sum())
}

/// Hamiltonian in Darboux collar coordinates.
struct Darboux<'a, H: ?Sized> {
    h: &'a H,
    chart: ContactChart,
}

impl<H: HamiltonianModel + ?Sized> Darboux<'_, H> {
    fn collar(&self, z: &[f64]) -> Result<Vec<f64>> {
        let r = z[2 * self.chart.n - 2];
        if self.chart.pairs() > 0 && r <= 0.0 {
            return Err(Error::FrameDegenerate);
        }
        let (r, b) = self.chart.from_darboux(z);
        let mut x = vec![r];
        x.extend(b);
        Ok(x)
    }

    /// `∇_z H` by the chain rule from the collar gradient.
    fn gradient(&self, t: f64, z: &[f64]) -> Result<Vec<f64>> {
        let x = self.collar(z)?;
        let g = self.h.grad(t, &x);
        let n = self.chart.n;
        let r = x[0];
        let mut out = vec![0.0; 2 * n];
        let mut radial = g[0];
        for i in 0..self.chart.pairs() {
            let (xi, yi) = (x[2 + 2 * i], x[3 + 2 * i]);
            let (hx, hy) = (g[2 + 2 * i], g[3 + 2 * i]);
            out[2 * i] = hx / r.sqrt();
            out[2 * i + 1] = hy / r.sqrt();
            radial -= (xi * hx + yi * hy) / (2.0 * r);
        }
        out[2 * n - 2] = radial;
        out[2 * n - 1] = g[1];
        Ok(out)
    }

    fn value(&self, t: f64, z: &[f64]) -> f64 {
        match self.collar(z) {
            Ok(x) => self.h.eval(t, &x),
            Err(_) => f64::NAN,
        }
    }

    /// Second-difference Hessian of `H` in Darboux coordinates.
    fn hessian(&self, t: f64, z: &[f64]) -> Result<DMatrix<f64>> {
        let idx: Vec<usize> = (0..z.len()).collect();
        let m = scalar_hessian(|zz| self.value(t, zz), z, &idx);
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::FrameDegenerate);
        }
        Ok(m)
    }
}

/// Symmetric finite-difference Hessian of a scalar function of `z`, restricted to `idx`.
fn scalar_hessian<F: Fn(&[f64]) -> f64>(f: F, z: &[f64], idx: &[usize]) -> DMatrix<f64> {
    let d = z.len();
    let mut m = DMatrix::zeros(d, d);
    let mut p = z.to_vec();
    let f0 = f(z);
    for (a, &i) in idx.iter().enumerate() {
        let hi = HESS_STEP * z[i].abs().max(1.0);
        for &j in &idx[a..] {
            let hj = HESS_STEP * z[j].abs().max(1.0);
            let v = if i == j {
                p[i] = z[i] + hi;
                let fp = f(&p);
                p[i] = z[i] - hi;
                let fm = f(&p);
                p[i] = z[i];
                (fp - 2.0 * f0 + fm) / (hi * hi)
            } else {
                let mut e = |si: f64, sj: f64| {
                    p[i] = z[i] + si * hi;
                    p[j] = z[j] + sj * hj;
                    let v = f(&p);
                    p[i] = z[i];
                    p[j] = z[j];
                    v
                };
                (e(1.0, 1.0) - e(1.0, -1.0) - e(-1.0, 1.0) + e(-1.0, -1.0)) / (4.0 * hi * hj)
            };
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// `Ψ̇ = (J·Hess H)Ψ` along the flow line through `x0` (collar coordinates).
pub fn linearize_flow<H: HamiltonianModel + ?Sized>(h: &H, x0: &[f64], t_end: f64, steps: usize, tol: f64) -> Result<SymplecticPath> {
    let chart = h.chart();
    let dh = Darboux { h, chart };
    let z0 = chart.to_darboux(x0[0], &x0[1..]);
    let d = z0.len();
    if chart.pairs() > 0 && x0[0] <= 0.0 {
        return Err(Error::FrameDegenerate);
    }
    let j = symplectic_j(d);
    let mut y0 = z0.clone();
    y0.extend(DMatrix::<f64>::identity(d, d).iter());
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
        let z = &y[..d];
        let g = dh.gradient(t, z)?;
        let zdot = &j * nalgebra::DVector::from_column_slice(&g);
        dy[..d].copy_from_slice(zdot.as_slice());
        let psi = DMatrix::from_column_slice(d, d, &y[d..]);
        let l = &j * dh.hessian(t, z)?;
        dy[d..].copy_from_slice((l * psi).as_slice());
        Ok(())
    };
    let sol = integrate(rhs, &y0, 0.0, t_end, &OdeOptions::with_tol(tol))?;
    let sol = Arc::new(sol);
    let eval = {
        let sol = sol.clone();
        move |t: f64| DMatrix::from_column_slice(d, d, &sol.at(t)[d..])
    };
    let steps = steps.max(1);
    let times: Vec<f64> = (0..=steps).map(|i| t_end * i as f64 / steps as f64).collect();
    let matrices = times.iter().map(|t| eval(*t)).collect();
    Ok(SymplecticPath { times, matrices, frame: "darboux collar coordinates".into(), eval: Arc::new(eval) })
}

/// The `L0 + L1` decomposition of `∇X_Ĥ` at one collar point.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDecomposition {
    pub l0: DMatrix<f64>,
    pub l1: DMatrix<f64>,
    pub l1_prime: DMatrix<f64>,
    pub l1_double_prime: DMatrix<f64>,
    /// Reeb coefficient `∂_rĤ`.
    pub f: f64,
    /// `dĤ(R_α)`.
    pub g: f64,
    /// Contact-Hamiltonian part `X^ξ_Ĥ`.
    pub x_xi: Vec<f64>,
}

impl BlockDecomposition {
    pub fn sp_residuals(&self) -> (f64, f64) {
        (crate::linalg::sp_algebra_residual(&self.l0), crate::linalg::sp_algebra_residual(&self.l1))
    }

    /// `|L1 − L1′/r − (r−1)L1″/r|`.
    pub fn split_residual(&self, r: f64) -> f64 {
        (&self.l1 - &self.l1_prime / r - &self.l1_double_prime * ((r - 1.0) / r)).amax()
    }
}

/// Assembles `L0`, `L1`, `L1′`, `L1″` at the collar point `x = (r, b)`.
pub fn block_decompose<H: HamiltonianModel>(ext: &ExtendedHamiltonian<H>, t: f64, x: &[f64]) -> Result<BlockDecomposition> {
    let chart = ext.chart();
    let r = x[0];
    if r <= 0.0 {
        return Err(Error::DegenerateAtBoundary(r));
    }
    let dh = Darboux { h: ext, chart };
    let z = chart.to_darboux(r, &x[1..]);
    let d = z.len();
    let ri = d - 2;
    let j = symplectic_j(d);
    let hess = dh.hessian(t, &z)?;
    let mut h0 = DMatrix::zeros(d, d);
    let mut hb = DMatrix::zeros(d, d);
    for a in 0..d {
        for b in 0..d {
            if a == ri || b == ri {
                h0[(a, b)] = hess[(a, b)];
            } else {
                hb[(a, b)] = hess[(a, b)];
            }
        }
    }
    let b_idx: Vec<usize> = (0..d).filter(|i| *i != ri).collect();
    let piece = |k: usize| {
        move |zz: &[f64]| {
            let (rr, bb) = chart.from_darboux(zz);
            let (p0, p1, pr) = ext.pieces(t, rr, &bb);
            match k {
                0 => p0,
                _ => p1 + 0.5 * (rr - 1.0) * pr,
            }
        }
    };
    let l1_prime = &j * scalar_hessian(piece(0), &z, &b_idx) * r;
    let l1_double_prime = &j * scalar_hessian(piece(1), &z, &b_idx) * r;
    let g = ext.grad(t, x);
    Ok(BlockDecomposition {
        l0: &j * h0,
        l1: &j * hb,
        l1_prime,
        l1_double_prime,
        f: g[0],
        g: g[1],
        x_xi: ext.xi_part(t, x),
    })
}

/// Finite-difference Jacobian of `X_H` in Darboux coordinates, built from the collar vector field.
pub fn fd_flow_jacobian<H: HamiltonianModel + ?Sized>(h: &H, t: f64, x: &[f64]) -> Result<DMatrix<f64>> {
    let chart = h.chart();
    let z = chart.to_darboux(x[0], &x[1..]);
    let d = z.len();
    let field = |zz: &[f64]| -> Result<Vec<f64>> {
        let (r, b) = chart.from_darboux(zz);
        let mut xc = vec![r];
        xc.extend(b);
        let mut v = vec![0.0; d];
        crate::hamflow::hamiltonian_vector_field(h, t, &xc, &mut v)?;
        // (ṙ, q̇, ẋ, ẏ) → (Ẋ, Ẏ, ṙ, q̇)
        let mut out = vec![0.0; d];
        let sr = r.sqrt();
        for i in 0..chart.pairs() {
            let (xi, yi) = (xc[2 + 2 * i], xc[3 + 2 * i]);
            out[2 * i] = sr * v[2 + 2 * i] + xi * v[0] / (2.0 * sr);
            out[2 * i + 1] = sr * v[3 + 2 * i] + yi * v[0] / (2.0 * sr);
        }
        out[d - 2] = v[0];
        out[d - 1] = v[1];
        Ok(out)
    };
    let mut m = DMatrix::zeros(d, d);
    let mut p = z.clone();
    for c in 0..d {
        let h = JAC_STEP * z[c].abs().max(1.0);
        p[c] = z[c] + h;
        let fp = field(&p)?;
        p[c] = z[c] - h;
        let fm = field(&p)?;
        p[c] = z[c];
        for rr in 0..d {
            m[(rr, c)] = (fp[rr] - fm[rr]) / (2.0 * h);
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexGrowthReport {
    pub arc_lengths: Vec<f64>,
    pub indices: Vec<f64>,
    /// Fitted `c` in `|μ| ≈ c·T + d`.
    pub slope: f64,
    /// Largest `d` with `|μ| ≥ c·T + d` on every arc.
    pub intercept: f64,
    pub passes: bool,
}

/// `μ_RS` of arcs of increasing length and a linear lower bound `|μ| ≥ c·T + d`.
pub fn verify_index_growth<F>(path_for: F, arc_lengths: &[f64]) -> Result<IndexGrowthReport>
where
    F: Fn(f64) -> Result<SymplecticPath>,
{
    let mut indices = Vec::with_capacity(arc_lengths.len());
    for t in arc_lengths {
        indices.push(rs_index(&path_for(*t)?)?);
    }
    let abs: Vec<f64> = indices.iter().map(|m| m.abs()).collect();
    let (slope, _) = fit_line(arc_lengths, &abs);
    let intercept = arc_lengths.iter().zip(&abs).map(|(t, m)| m - slope * t).fold(f64::INFINITY, f64::min);
    Ok(IndexGrowthReport { arc_lengths: arc_lengths.to_vec(), indices, slope, intercept, passes: slope > 0.0 })
}

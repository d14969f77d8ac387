//! The Katok examples on the Brieskorn sphere `Σ = {Σ z_j² = 0} ∩ S^{2n+1}`.
//!
//! Everything is written in the unitary `w`-coordinates, where
//! `f(w) = w0² + w1² − 2i Σ w_{2j} w_{2j+1}` and the perturbed Reeb flow is a
//! diagonal unitary flow. The page `P0 = {w0 > 0}` is charted by `(w2, …, wn)`
//! on two sheets distinguished by the sign of `Im w1`.

use std::f64::consts::{FRAC_1_SQRT_2, TAU};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::ReturnMap;
use crate::error::{Error, Result};
use crate::hamflow::{integrate, OdeOptions};
use crate::index::SymplecticPath;

const I: Complex64 = Complex64::new(0.0, 1.0);
const VARIETY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KatokSystem {
    /// Odd complex dimension parameter `n = 2m + 1`; `Σ` has real dimension `2n − 1`.
    pub n: usize,
    pub eps: Vec<f64>,
}

impl KatokSystem {
    pub fn new(n: usize, eps: Vec<f64>) -> Result<Self> {
        if n < 3 || n % 2 == 0 {
            return Err(Error::Config(format!("only odd n >= 3 is supported, got {n}")));
        }
        if eps.len() != (n - 1) / 2 {
            return Err(Error::Config(format!("n = {n} needs {} perturbation parameters", (n - 1) / 2)));
        }
        if eps.iter().any(|e| !(e.abs() < 1.0)) {
            return Err(Error::Config("perturbation parameters must lie in (-1, 1)".into()));
        }
        Ok(Self { n, eps })
    }

    /// `n = 3` with the single parameter `ε1`.
    pub fn three(eps1: f64) -> Result<Self> {
        Self::new(3, vec![eps1])
    }

    pub fn m(&self) -> usize {
        self.eps.len()
    }

    /// Frequencies of the Reeb flow: `(1, 1, 1+ε1, 1−ε1, …)`.
    pub fn weights(&self) -> Vec<f64> {
        let mut w = vec![1.0, 1.0];
        for e in &self.eps {
            w.push(1.0 + e);
            w.push(1.0 - e);
        }
        w
    }

    /// The unitary change of coordinates `w = U z`.
    pub fn coordinate_change(&self) -> DMatrix<Complex64> {
        let d = self.n + 1;
        let s = Complex64::new(FRAC_1_SQRT_2, 0.0);
        let mut u = DMatrix::zeros(d, d);
        u[(0, 0)] = Complex64::new(1.0, 0.0);
        u[(1, 1)] = Complex64::new(1.0, 0.0);
        for j in 1..=self.m() {
            let (a, b) = (2 * j, 2 * j + 1);
            u[(a, a)] = s;
            u[(a, b)] = s * I;
            u[(b, a)] = s * I;
            u[(b, b)] = s;
        }
        u
    }

    pub fn f(&self, w: &[Complex64]) -> Complex64 {
        let mut v = w[0] * w[0] + w[1] * w[1];
        for j in 1..=self.m() {
            v -= 2.0 * I * w[2 * j] * w[2 * j + 1];
        }
        v
    }

    pub fn norm_sqr(w: &[Complex64]) -> f64 {
        w.iter().map(|c| c.norm_sqr()).sum()
    }

    /// `Δ_ε(w) = Σ ε_j(|w_{2j}|² − |w_{2j+1}|²)`.
    pub fn delta(&self, w: &[Complex64]) -> f64 {
        self.eps.iter().enumerate().map(|(j, e)| e * (w[2 * j + 2].norm_sqr() - w[2 * j + 3].norm_sqr())).sum()
    }

    /// `H_ε = |w|² + Δ_ε`.
    pub fn h_eps(&self, w: &[Complex64]) -> f64 {
        Self::norm_sqr(w) + self.delta(w)
    }

    pub fn variety_defect(&self, w: &[Complex64]) -> f64 {
        (Self::norm_sqr(w) - 1.0).abs().max(self.f(w).norm())
    }

    pub fn check_on_variety(&self, w: &[Complex64]) -> Result<()> {
        let d = self.variety_defect(w);
        if d > VARIETY_TOL || w.len() != self.n + 1 {
            return Err(Error::OffVariety(d));
        }
        Ok(())
    }

    /// The Reeb flow of `α_ε` at time `t`.
    pub fn reeb_flow(&self, w: &[Complex64], t: f64) -> Result<Vec<Complex64>> {
        self.check_on_variety(w)?;
        Ok(w.iter().zip(self.weights()).map(|(c, l)| c * Complex64::from_polar(1.0, TAU * l * t)).collect())
    }

    /// The return map `Φ` of the page `P0`.
    pub fn return_map(&self, p: &[Complex64]) -> Result<Vec<Complex64>> {
        if p.len() != self.n + 1 || p[0].im.abs() > VARIETY_TOL || p[0].re <= 0.0 {
            return Err(Error::NotOnPage);
        }
        self.check_on_variety(p)?;
        let mut out = p.to_vec();
        for (j, e) in self.eps.iter().enumerate() {
            out[2 * j + 2] *= Complex64::from_polar(1.0, TAU * e);
            out[2 * j + 3] *= Complex64::from_polar(1.0, -TAU * e);
        }
        Ok(out)
    }

    /// `K_ε(w) = H_ε(w)⁻¹·Δ_ε(w)`, which equals `α_ε(X)` for the generator `X` of `Φ`.
    pub fn twist_function(&self, p: &[Complex64]) -> f64 {
        self.delta(p) / self.h_eps(p)
    }

    /// `p0 = (1/√2, i/√2, 0, …)` and `q0 = (1/√2, −i/√2, 0, …)`.
    pub fn fixed_points(&self) -> [Vec<Complex64>; 2] {
        let mut p = vec![Complex64::new(0.0, 0.0); self.n + 1];
        p[0] = Complex64::new(FRAC_1_SQRT_2, 0.0);
        p[1] = Complex64::new(0.0, FRAC_1_SQRT_2);
        let mut q = p.clone();
        q[1] = -q[1];
        [p, q]
    }

    /// Binding points with `|w_j| = 1` for a single `j ≥ 2`.
    pub fn binding_point(&self, j: usize, phase: f64) -> Vec<Complex64> {
        let mut p = vec![Complex64::new(0.0, 0.0); self.n + 1];
        p[j] = Complex64::from_polar(1.0, phase);
        p
    }

    /// Page point with chart coordinates `c = (w2, …, wn)` on `sheet` (sign of `Im w1`).
    ///
    /// Solves `r0² + w1² = 2iΣw_{2j}w_{2j+1}` and `r0² + |w1|² = 1 − Σ|w_k|²` for `r0 > 0`.
    pub fn page_point(&self, sheet: f64, c: &[Complex64]) -> Result<Vec<Complex64>> {
        let mut rhs = Complex64::new(0.0, 0.0);
        for j in 0..self.m() {
            rhs += 2.0 * I * c[2 * j] * c[2 * j + 1];
        }
        let s = 1.0 - c.iter().map(|v| v.norm_sqr()).sum::<f64>();
        let b2 = 0.5 * (s - rhs.re);
        if b2 <= 0.0 {
            return Err(Error::NotOnPage);
        }
        let b = sheet.signum() * b2.sqrt();
        let a = rhs.im / (2.0 * b);
        let r2 = s - a * a - b * b;
        if r2 <= 0.0 {
            return Err(Error::NotOnPage);
        }
        let mut w = vec![Complex64::new(r2.sqrt(), 0.0), Complex64::new(a, b)];
        w.extend_from_slice(c);
        Ok(w)
    }

    pub fn page_map(&self) -> KatokPageMap {
        KatokPageMap { sys: self.clone(), sheet: 1.0 }
    }

    /// Grid scan of `|Φ(p) − p|` on action-angle tori of the chart, refined by Newton.
    pub fn fixed_point_scan(&self, resolution: usize) -> FixedPointScan {
        let mut points: Vec<Vec<Complex64>> = Vec::new();
        let mut max_residual: f64 = 0.0;
        let mut candidates = 0;
        for sheet in [1.0, -1.0] {
            let map = KatokPageMap { sys: self.clone(), sheet };
            let seeds = map.torus_grid(resolution);
            let resid: Vec<f64> = seeds
                .iter()
                .map(|s| map.apply(s, 0.0).map(|y| super::distance(&map, &y, s)).unwrap_or(f64::INFINITY))
                .collect();
            max_residual = max_residual.max(resid.iter().cloned().filter(|r| r.is_finite()).fold(0.0, f64::max));
            let floor = resid.iter().cloned().fold(f64::INFINITY, f64::min);
            for (s, r) in seeds.iter().zip(&resid) {
                // grid local minima: the action torus of smallest residual
                if *r > floor + 1e-12 {
                    continue;
                }
                candidates += 1;
                if let Ok(x) = crate::orbits::newton_periodic(&map, s, 1, 1e-12) {
                    let w = map.lift(&x).expect("converged inside the chart");
                    let res = super::distance(&map, &map.apply(&x, 0.0).unwrap(), &x);
                    if res <= 1e-8 && !points.iter().any(|p| dist_c(p, &w) < 1e-6) {
                        points.push(w);
                    }
                }
            }
        }
        FixedPointScan { points, candidates, degenerate: max_residual <= 1e-12 }
    }

    /// Hamiltonian `π Σ λ_j |w_j|²` of the Reeb flow on `ℂ^{n+1}` in real pairs `(Re w_j, Im w_j)`.
    pub fn reeb_energy(&self, z: &[f64]) -> f64 {
        std::f64::consts::PI * self.weights().iter().enumerate().map(|(j, l)| l * (z[2 * j].powi(2) + z[2 * j + 1].powi(2))).sum::<f64>()
    }

    /// Integrates `ż = J∇H` for the Reeb Hamiltonian with the adaptive integrator.
    ///
    /// Returns the sampled states and the maximal energy drift.
    pub fn integrate_reeb(&self, w: &[Complex64], t_end: f64, tol: f64) -> Result<(Vec<Vec<f64>>, f64)> {
        self.check_on_variety(w)?;
        let lam = self.weights();
        let z0: Vec<f64> = w.iter().flat_map(|c| [c.re, c.im]).collect();
        let rhs = |_t: f64, z: &[f64], dz: &mut [f64]| -> Result<()> {
            for (j, l) in lam.iter().enumerate() {
                let k = TAU * l;
                dz[2 * j] = -k * z[2 * j + 1];
                dz[2 * j + 1] = k * z[2 * j];
            }
            Ok(())
        };
        let sol = integrate(rhs, &z0, 0.0, t_end, &OdeOptions::with_tol(tol))?;
        let e0 = self.reeb_energy(&z0);
        let drift = sol.states.iter().map(|z| (self.reeb_energy(z) - e0).abs()).fold(0.0, f64::max);
        Ok((sol.states, drift))
    }

    /// Linearised Reeb flow over `[0, T]`.
    ///
    /// For `ε = 0` the contact plane `ξ_w = {w, w̄}^⊥` is invariant and the path is
    /// the restriction to a unitary frame of it; otherwise the ambient unitary
    /// frame of `ℂ^{n+1}` is used.
    pub fn linearized_reeb(&self, w: &[Complex64], t_end: f64, steps: usize) -> Result<SymplecticPath> {
        self.check_on_variety(w)?;
        let lam = self.weights();
        if self.eps.iter().all(|e| *e == 0.0) {
            let frame = xi_frame(w);
            let k = frame.len();
            return Ok(SymplecticPath::from_fn(0.0, t_end, steps, "unitary frame of the contact plane", move |t| {
                realify_diag(&vec![TAU * t; k])
            }));
        }
        Ok(SymplecticPath::from_fn(0.0, t_end, steps, "ambient unitary frame", move |t| {
            realify_diag(&lam.iter().map(|l| TAU * l * t).collect::<Vec<_>>())
        }))
    }
}

fn dist_c(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

/// Block-diagonal rotations `exp(θ_k J)` on consecutive real pairs.
fn realify_diag(angles: &[f64]) -> DMatrix<f64> {
    let d = 2 * angles.len();
    let mut m = DMatrix::zeros(d, d);
    for (k, a) in angles.iter().enumerate() {
        let (s, c) = a.sin_cos();
        m[(2 * k, 2 * k)] = c;
        m[(2 * k, 2 * k + 1)] = -s;
        m[(2 * k + 1, 2 * k)] = s;
        m[(2 * k + 1, 2 * k + 1)] = c;
    }
    m
}

/// Orthonormal basis of `{w, w̄}^⊥` by Gram–Schmidt on the standard basis.
pub fn xi_frame(w: &[Complex64]) -> Vec<Vec<Complex64>> {
    let d = w.len();
    let dot = |a: &[Complex64], b: &[Complex64]| a.iter().zip(b).map(|(x, y)| x * y.conj()).sum::<Complex64>();
    let mut basis: Vec<Vec<Complex64>> = Vec::new();
    let wbar: Vec<Complex64> = w.iter().map(|c| c.conj()).collect();
    for v in [w.to_vec(), wbar] {
        let mut v = v;
        for b in &basis {
            let c = dot(&v, b);
            for (x, y) in v.iter_mut().zip(b) {
                *x -= c * y;
            }
        }
        let n = dot(&v, &v).re.sqrt();
        basis.push(v.iter().map(|x| x / n).collect());
    }
    let mut frame = Vec::new();
    for k in 0..d {
        let mut v = vec![Complex64::new(0.0, 0.0); d];
        v[k] = Complex64::new(1.0, 0.0);
        for b in &basis {
            let c = dot(&v, b);
            for (x, y) in v.iter_mut().zip(b) {
                *x -= c * y;
            }
        }
        let n = dot(&v, &v).re.sqrt();
        if n > 1e-8 {
            let v: Vec<Complex64> = v.iter().map(|x| x / n).collect();
            basis.push(v.clone());
            frame.push(v);
        }
    }
    frame
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointScan {
    pub points: Vec<Vec<Complex64>>,
    pub candidates: usize,
    /// Set when `Φ` is the identity on the scanned grid (`ε = 0`).
    pub degenerate: bool,
}

/// `Φ` in the chart `(Re w2, Im w2, …, Re wn, Im wn)` of one sheet of `P0`.
#[derive(Debug, Clone, PartialEq)]
pub struct KatokPageMap {
    pub sys: KatokSystem,
    pub sheet: f64,
}

impl KatokPageMap {
    pub fn on_sheet(sys: KatokSystem, sheet: f64) -> Self {
        Self { sys, sheet }
    }

    pub fn lift(&self, x: &[f64]) -> Result<Vec<Complex64>> {
        let c: Vec<Complex64> = x.chunks(2).map(|p| Complex64::new(p[0], p[1])).collect();
        self.sys.page_point(self.sheet, &c)
    }

    /// Points on the tori `|w_k|² = a_k` with `res` angles per coordinate.
    pub fn torus_grid(&self, res: usize) -> Vec<Vec<f64>> {
        let k = self.sys.n - 1;
        let radii = [0.0, 0.15, 0.3];
        let mut out = vec![Vec::new()];
        for _ in 0..k {
            let mut next = Vec::new();
            for p in &out {
                for r in radii {
                    let na = if r == 0.0 { 1 } else { res.max(1) };
                    for a in 0..na {
                        let th = TAU * a as f64 / na as f64;
                        let mut q = p.clone();
                        q.push(r * th.cos());
                        q.push(r * th.sin());
                        next.push(q);
                    }
                }
            }
            out = next;
        }
        out.retain(|x| self.lift(x).is_ok());
        out
    }
}

impl ReturnMap for KatokPageMap {
    fn dim(&self) -> usize {
        2 * (self.sys.n - 1)
    }

    fn apply(&self, x: &[f64], _tol: f64) -> Result<Vec<f64>> {
        let w = self.lift(x)?;
        let y = self.sys.return_map(&w)?;
        Ok(y[2..].iter().flat_map(|c| [c.re, c.im]).collect())
    }

    fn difference(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        a.iter().zip(b).map(|(x, y)| x - y).collect()
    }

    fn is_interior(&self, x: &[f64]) -> bool {
        self.lift(x).map(|w| w[0].re > 1e-3).unwrap_or(false)
    }

    fn seeds(&self, resolution: usize) -> Vec<Vec<f64>> {
        self.torus_grid(resolution)
    }
}

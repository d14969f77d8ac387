//! Linear-at-infinity extension `Ĥ` of a collar Hamiltonian to the completion.
//!
//! Near `r = 1` the Hamiltonian is split as `H = H0 + (r−1)H1 + (r−1)²/2·R`.
//! Outward of the boundary
//!
//! ```text
//! Ĥ = Ĥ0 + (r−1)Ĥ1 + (r−1)²/2·ρ·R̄,   Ĥj = ρ·Hj + (1−ρ)·Cj,
//! ```
//!
//! where `R̄` continues `R` across `r = 1` with a matching 2-jet and `ρ` is a
//! cutoff that is `1` on `[1, 1+δ0]` and `0` from `1+δ1` on.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ContactChart;
use crate::hamflow::{check_quantitative_twist, fd_gradient, BoundaryGrid, CollarTwist, HamiltonianModel};

/// Reflection nodes of the remainder continuation.
pub const REFLECTION_NODES: [f64; 3] = [0.125, 0.25, 0.5];
const REMAINDER_FILL: f64 = 1e-3;
const JET_STEP: f64 = 1e-3;
const MATCH_STEP: f64 = 1e-6;
const MATCH_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtensionParams {
    pub delta0: f64,
    pub delta1: f64,
    pub c0: f64,
    pub c1: f64,
    /// `Ĥ = a·r − ε` at infinity with `a = C1 = C0 + ε`.
    pub epsilon: f64,
    #[serde(default)]
    pub quantitative: bool,
}

impl ExtensionParams {
    /// Default collar widths `δ1 = 0.1`, `δ0 = δ1/3`.
    pub fn new(c0: f64, c1: f64) -> Self {
        Self { delta0: 0.1 / 3.0, delta1: 0.1, c0, c1, epsilon: c1 - c0, quantitative: false }
    }

    pub fn with_deltas(mut self, delta0: f64, delta1: f64) -> Self {
        self.delta0 = delta0;
        self.delta1 = delta1;
        self
    }

    /// The cutoff `ρ(r)`.
    pub fn rho(&self, r: f64) -> f64 {
        let y = (r - 1.0 - self.delta0) / (self.delta1 - self.delta0);
        if y <= 0.0 {
            1.0
        } else if y >= 1.0 {
            0.0
        } else {
            1.0 / (1.0 + (1.0 / (1.0 - y) - 1.0 / y).exp())
        }
    }

    /// `dρ/dr`.
    pub fn rho_derivative(&self, r: f64) -> f64 {
        let w = self.delta1 - self.delta0;
        let y = (r - 1.0 - self.delta0) / w;
        if y <= 0.0 || y >= 1.0 {
            return 0.0;
        }
        let rho = self.rho(r);
        let dg = 1.0 / ((1.0 - y) * (1.0 - y)) + 1.0 / (y * y);
        -rho * (1.0 - rho) * dg / w
    }
}

/// Extrema of the Taylor data `H0 = H|_B`, `H1 = ∂_r H|_B` over a boundary grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryStats {
    pub min_h0: f64,
    pub max_h0: f64,
    pub min_h1: f64,
    pub max_h1: f64,
    /// `min (H1 − H0)`.
    pub min_gap: f64,
}

impl BoundaryStats {
    pub fn collect<H: HamiltonianModel + ?Sized>(h: &H, grid: &BoundaryGrid) -> Self {
        let mut s = Self {
            min_h0: f64::INFINITY,
            max_h0: f64::NEG_INFINITY,
            min_h1: f64::INFINITY,
            max_h1: f64::NEG_INFINITY,
            min_gap: f64::INFINITY,
        };
        for (t, b) in &grid.points {
            let (h0, h1) = taylor_jet(h, *t, b);
            s.min_h0 = s.min_h0.min(h0);
            s.max_h0 = s.max_h0.max(h0);
            s.min_h1 = s.min_h1.min(h1);
            s.max_h1 = s.max_h1.max(h1);
            s.min_gap = s.min_gap.min(h1 - h0);
        }
        s
    }
}

fn at_r(r: f64, b: &[f64]) -> Vec<f64> {
    let mut x = Vec::with_capacity(b.len() + 1);
    x.push(r);
    x.extend_from_slice(b);
    x
}

/// `(H0, H1)` at `(t, b)`.
pub fn taylor_jet<H: HamiltonianModel + ?Sized>(h: &H, t: f64, b: &[f64]) -> (f64, f64) {
    let x = at_r(1.0, b);
    (h.eval(t, &x), h.grad_r(t, &x))
}

/// Remainder `R = 2(H − H0 − (r−1)H1)/(r−1)²` on the domain side `r ≤ 1`.
///
/// Within `10⁻³` of the boundary the removable singularity is filled with the
/// one-sided second derivative `∂²_r H(1)`.
pub fn remainder<H: HamiltonianModel + ?Sized>(h: &H, t: f64, r: f64, b: &[f64]) -> f64 {
    let (h0, h1) = taylor_jet(h, t, b);
    let d = r - 1.0;
    if d.abs() < REMAINDER_FILL {
        second_derivative_at_boundary(h, t, b)
    } else {
        2.0 * (h.eval(t, &at_r(r, b)) - h0 - d * h1) / (d * d)
    }
}

fn second_derivative_at_boundary<H: HamiltonianModel + ?Sized>(h: &H, t: f64, b: &[f64]) -> f64 {
    let s = JET_STEP;
    let f = |k: f64| h.eval(t, &at_r(1.0 - k * s, b));
    (2.0 * f(0.0) - 5.0 * f(1.0) + 4.0 * f(2.0) - f(3.0)) / (s * s)
}

/// The Taylor data of `H` at one boundary point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaylorSplit {
    pub h0: f64,
    pub h1: f64,
    /// `R(1) = ∂²_r H(1)`.
    pub r_at_boundary: f64,
}

/// Splits `H` at `(t, b)`; fails with `NotC2` if the remainder does not settle at `r = 1`.
pub fn taylor_split<H: HamiltonianModel + ?Sized>(h: &H, t: f64, b: &[f64]) -> Result<TaylorSplit> {
    let (h0, h1) = taylor_jet(h, t, b);
    let r1 = second_derivative_at_boundary(h, t, b);
    let near = 2.0 * REMAINDER_FILL;
    let ra = remainder(h, t, 1.0 - near, b);
    let rb = remainder(h, t, 1.0 - 2.0 * near, b);
    let scale = 1.0 + r1.abs().max(ra.abs());
    if !r1.is_finite() || (ra - rb).abs() > 1e-2 * scale || (r1 - ra).abs() > 2e-2 * scale {
        return Err(Error::NotC2(1.0 - near));
    }
    Ok(TaylorSplit { h0, h1, r_at_boundary: r1 })
}

/// Coefficients `a_k` with `Σ a_k (−λ_k)^j = 1` for `j = 0, 1, 2`.
pub fn reflection_coefficients() -> [f64; 3] {
    let l = REFLECTION_NODES;
    let m = Matrix3::from_fn(|j, k| (-l[k]).powi(j as i32));
    let a = m.lu().solve(&Vector3::new(1.0, 1.0, 1.0)).expect("Vandermonde matrix with distinct nodes");
    [a[0], a[1], a[2]]
}

/// `R̄(r) = Σ a_k R(1 − λ_k(r−1))` for `r ≥ 1`.
pub fn extend_remainder<F: Fn(f64) -> f64>(remainder: F, r: f64) -> f64 {
    let a = reflection_coefficients();
    let d = r - 1.0;
    REFLECTION_NODES.iter().zip(a).map(|(l, ak)| ak * remainder(1.0 - l * d)).sum()
}

/// How constants are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ConstantsMode {
    /// Only `C_j ≥ max H_j`.
    Plain,
    /// `C0 > max H0`, `C0 < C1 < C0 + min(H1 − H0)`.
    #[default]
    Quantitative,
}

/// Default constants for `H` on the boundary grid.
///
/// `reeb_periods` lists the model's Reeb periods; the slope `C1` is nudged by
/// `10⁻³·k` until it misses all of them.
pub fn choose_constants<H: HamiltonianModel + ?Sized>(
    h: &H,
    grid: &BoundaryGrid,
    mode: ConstantsMode,
    reeb_periods: Option<&[f64]>,
) -> Result<ExtensionParams> {
    let st = BoundaryStats::collect(h, grid);
    let mut p = match mode {
        ConstantsMode::Quantitative => {
            let rep = check_quantitative_twist(&CollarTwist(h), grid);
            if !rep.passes {
                return Err(Error::QuantitativeTwistFails(rep.margin));
            }
            let eps = 0.5 * (st.min_h1 - st.max_h0);
            let c0 = st.max_h0.max(st.max_h1 - eps) + 1.0;
            let mut p = ExtensionParams::new(c0, c0 + eps);
            p.quantitative = true;
            p
        }
        ConstantsMode::Plain => {
            let c0 = st.max_h0 + 1.0;
            let c1 = st.max_h1.max(0.0) + 1.0;
            ExtensionParams::new(c0, c1)
        }
    };
    match reeb_periods {
        Some(periods) => {
            let base = p.c1;
            let mut k = 0;
            while periods.iter().any(|t| (p.c1 - t).abs() < 1e-9) {
                k += 1;
                p.c1 = base + 1e-3 * k as f64;
            }
            p.epsilon = p.c1 - p.c0;
        }
        None => log::warn!("no Reeb period list for this model; skipping the spectrum collision test"),
    }
    Ok(p)
}

/// `Ĥ` together with its construction data.
#[derive(Debug, Clone)]
pub struct ExtendedHamiltonian<H> {
    pub base: H,
    pub params: ExtensionParams,
    pub stats: BoundaryStats,
    coeffs: [f64; 3],
}

/// Validates the constants against the boundary data.
pub fn validate_params(p: &ExtensionParams, st: &BoundaryStats) -> Result<()> {
    let bad = |m: String| Err(Error::BadConstants(m));
    if !(0.0 < p.delta0 && p.delta0 < p.delta1) {
        return bad(format!("need 0 < delta0 < delta1, got {} and {}", p.delta0, p.delta1));
    }
    if !(p.c1 > 0.0) {
        return bad(format!("need C1 > 0, got {}", p.c1));
    }
    if p.c0 < st.max_h0 {
        return bad(format!("need C0 >= max H0 = {}, got {}", st.max_h0, p.c0));
    }
    if p.c1 < st.max_h1 {
        return bad(format!("need C1 >= max H1 = {}, got {}", st.max_h1, p.c1));
    }
    if p.quantitative {
        if p.c0 <= st.max_h0 {
            return bad(format!("need C0 > max H0 = {}", st.max_h0));
        }
        if !(p.c0 < p.c1 && p.c1 < p.c0 + st.min_gap) {
            return bad(format!(
                "need C0 < C1 < C0 + min(H1 - H0): C0 = {}, C1 = {}, min gap = {}",
                p.c0, p.c1, st.min_gap
            ));
        }
    }
    Ok(())
}

/// Builds `Ĥ` and checks `C¹` matching at `r = 1` on the grid.
pub fn build_extension<H: HamiltonianModel>(
    base: H,
    params: ExtensionParams,
    grid: &BoundaryGrid,
) -> Result<ExtendedHamiltonian<H>> {
    let stats = BoundaryStats::collect(&base, grid);
    validate_params(&params, &stats)?;
    let ext = ExtendedHamiltonian { base, params, stats, coeffs: reflection_coefficients() };
    for (t, b) in &grid.points {
        let m = ext.c1_mismatch(*t, b);
        if m > MATCH_TOL {
            return Err(Error::BadConstants(format!("C1 matching at r = 1 fails by {m:e}")));
        }
    }
    Ok(ext)
}

impl<H: HamiltonianModel> ExtendedHamiltonian<H> {
    fn remainder_bar(&self, t: f64, r: f64, b: &[f64]) -> f64 {
        let d = r - 1.0;
        REFLECTION_NODES
            .iter()
            .zip(self.coeffs)
            .map(|(l, ak)| ak * remainder(&self.base, t, 1.0 - l * d, b))
            .sum()
    }

    /// Value and r-derivative mismatch at `r = 1` (second-order one-sided stencils).
    pub fn c1_mismatch(&self, t: f64, b: &[f64]) -> f64 {
        let h = MATCH_STEP;
        let f = |r: f64| self.eval(t, &at_r(r, b));
        let inner = (3.0 * f(1.0) - 4.0 * f(1.0 - h) + f(1.0 - 2.0 * h)) / (2.0 * h);
        let outer = (-3.0 * f(1.0) + 4.0 * f(1.0 + h) - f(1.0 + 2.0 * h)) / (2.0 * h);
        let value = (f(1.0) - self.base.boundary_restriction(t, b)).abs();
        value.max((inner - outer).abs())
    }

    /// `(Ĥ0, Ĥ1, R̂)` with `Ĥ = Ĥ0 + (r−1)Ĥ1 + (r−1)²/2·R̂` at `(t, r, b)`.
    ///
    /// On the domain side these are the Taylor data `(H0, H1, R)`.
    pub fn pieces(&self, t: f64, r: f64, b: &[f64]) -> (f64, f64, f64) {
        let p = &self.params;
        if r >= 1.0 + p.delta1 {
            return (p.c0, p.c1, 0.0);
        }
        if r <= 1.0 {
            let (h0, h1) = taylor_jet(&self.base, t, b);
            return (h0, h1, remainder(&self.base, t, r, b));
        }
        let rho = p.rho(r);
        let (hh0, hh1) = self.interpolated_jet(t, r, b);
        (hh0, hh1, rho * self.remainder_bar(t, r, b))
    }

    /// `Ĥ0`, `Ĥ1` at `(t, r, b)`.
    pub fn interpolated_jet(&self, t: f64, r: f64, b: &[f64]) -> (f64, f64) {
        let rho = self.params.rho(r);
        let (h0, h1) = taylor_jet(&self.base, t, b);
        (rho * h0 + (1.0 - rho) * self.params.c0, rho * h1 + (1.0 - rho) * self.params.c1)
    }
}

impl<H: HamiltonianModel> HamiltonianModel for ExtendedHamiltonian<H> {
    fn chart(&self) -> ContactChart {
        self.base.chart()
    }

    fn eval(&self, t: f64, x: &[f64]) -> f64 {
        let r = x[0];
        let p = &self.params;
        if r <= 1.0 {
            return self.base.eval(t, x);
        }
        if r >= 1.0 + p.delta1 {
            return p.c1 * (r - 1.0) + p.c0;
        }
        let b = &x[1..];
        let rho = p.rho(r);
        let (hh0, hh1) = self.interpolated_jet(t, r, b);
        let d = r - 1.0;
        let tail = if rho == 0.0 { 0.0 } else { 0.5 * d * d * rho * self.remainder_bar(t, r, b) };
        hh0 + d * hh1 + tail
    }

    fn grad(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let r = x[0];
        if r < 1.0 {
            return self.base.grad(t, x);
        }
        if r >= 1.0 + self.params.delta1 {
            let mut g = vec![0.0; x.len()];
            g[0] = self.params.c1;
            return g;
        }
        fd_gradient(self, t, x)
    }

    fn r_range(&self) -> (f64, f64) {
        (self.base.r_range().0, f64::INFINITY)
    }

    fn is_autonomous(&self) -> bool {
        self.base.is_autonomous()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamflow::{flow_map, FnHamiltonian};
    use std::f64::consts::PI;

    fn chart1() -> ContactChart {
        ContactChart::new(1)
    }

    fn grid() -> BoundaryGrid {
        BoundaryGrid::circle(&chart1(), 12, 3)
    }

    #[test]
    fn taylor_split_of_polynomials() {
        let h = FnHamiltonian::new(chart1(), |_t, x| x[0] * x[0]);
        let s = taylor_split(&h, 0.0, &[0.0]).unwrap();
        assert!((s.h0 - 1.0).abs() < 1e-12 && (s.h1 - 2.0).abs() < 1e-8 && (s.r_at_boundary - 2.0).abs() < 1e-6);
        for r in [0.5, 0.9, 0.9995] {
            assert!((remainder(&h, 0.0, r, &[0.0]) - 2.0).abs() < 1e-6);
        }
        let lin = FnHamiltonian::new(chart1(), |_t, x| 3.0 * (x[0] - 1.0) + 2.0);
        let s = taylor_split(&lin, 0.0, &[0.0]).unwrap();
        assert!((s.h0 - 2.0).abs() < 1e-12 && (s.h1 - 3.0).abs() < 1e-8 && s.r_at_boundary.abs() < 1e-6);
    }

    #[test]
    fn remainder_matches_taylor_oracle_for_transcendental_h() {
        // H = exp(r) cos q: R(r) = 2(e^r − e − (r−1)e)/(r−1)² · cos q
        let h = FnHamiltonian::new(chart1(), |_t, x| x[0].exp() * x[1].cos());
        let q: f64 = 0.7;
        for r in [0.6, 0.8, 0.95] {
            let d: f64 = r - 1.0;
            let oracle = 2.0 * (r.exp() - 1f64.exp() - d * 1f64.exp()) / (d * d) * q.cos();
            assert!((remainder(&h, 0.0, r, &[q]) - oracle).abs() < 1e-6);
        }
    }

    #[test]
    fn kinked_hamiltonian_is_not_c2() {
        let h = FnHamiltonian::new(chart1(), |_t, x| x[0] + (1.0 - x[0]).abs().powf(1.5));
        assert!(matches!(taylor_split(&h, 0.0, &[0.0]), Err(Error::NotC2(_))));
    }

    #[test]
    fn reflection_preserves_jets() {
        let a = reflection_coefficients();
        for j in 0..3 {
            let s: f64 = REFLECTION_NODES.iter().zip(a).map(|(l, ak)| ak * (-l).powi(j)).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
        assert!((extend_remainder(|_| 4.0, 1.07) - 4.0).abs() < 1e-12);
        // R = 1 − r: the continuation is exactly 1 − r (linear jets are reproduced)
        for r in [1.0, 1.02, 1.1] {
            assert!((extend_remainder(|s| 1.0 - s, r) - (1.0 - r)).abs() < 1e-12);
        }
        // one-sided FD jets of R = cos(3r) agree at r = 1
        let f = |s: f64| (3.0 * s).cos();
        let h = 1e-3;
        let outer = |k: f64| extend_remainder(f, 1.0 + k * h);
        let d1_in = (3.0 * f(1.0) - 4.0 * f(1.0 - h) + f(1.0 - 2.0 * h)) / (2.0 * h);
        let d1_out = (-3.0 * outer(0.0) + 4.0 * outer(1.0) - outer(2.0)) / (2.0 * h);
        assert!((d1_in - d1_out).abs() < 1e-4);
        let d2_in = (f(1.0) - 2.0 * f(1.0 - h) + f(1.0 - 2.0 * h)) / (h * h);
        let d2_out = (outer(0.0) - 2.0 * outer(1.0) + outer(2.0)) / (h * h);
        assert!((d2_in - d2_out).abs() < 0.1);
    }

    #[test]
    fn cubic_remainder_jet() {
        let h = FnHamiltonian::new(chart1(), |_t, x| x[0].powi(3));
        let rb = extend_remainder(|r| remainder(&h, 0.0, r, &[0.0]), 1.0);
        assert!((rb - 6.0).abs() < 1e-5);
    }

    #[test]
    fn cutoff_shape() {
        let p = ExtensionParams::new(2.0, 3.0).with_deltas(0.05, 0.1);
        assert_eq!(p.rho(1.0), 1.0);
        assert_eq!(p.rho(1.05), 1.0);
        assert_eq!(p.rho(1.1), 0.0);
        assert!((p.rho(1.075) - 0.5).abs() < 1e-12);
        let mut prev = 1.0;
        for i in 0..=100 {
            let r = 1.05 + 0.0005 * i as f64;
            let v = p.rho(r);
            assert!(v <= prev);
            prev = v;
            let h = 1e-7;
            let fd = (p.rho(r + h) - p.rho(r - h)) / (2.0 * h);
            assert!((fd - p.rho_derivative(r)).abs() < 1e-4 * (1.0 + fd.abs()));
        }
    }

    #[test]
    fn linear_beyond_delta1_and_matches_at_boundary() {
        let h = FnHamiltonian::new(chart1(), |_t, x| x[0]);
        let p = ExtensionParams::new(2.0, 3.0).with_deltas(0.05, 0.1);
        let e = build_extension(h, p, &grid()).unwrap();
        for r in [1.1, 1.2, 5.0, 100.0] {
            assert_eq!(e.eval(0.3, &[r, 0.4]), 3.0 * (r - 1.0) + 2.0);
        }
        assert_eq!(e.eval(0.3, &[1.0, 0.4]), 1.0);
        assert_eq!(e.eval(0.3, &[0.8, 0.4]), 0.8);
    }

    #[test]
    fn constants_follow_the_formula() {
        let h = FnHamiltonian::new(chart1(), |_t, x| 10.0 * (x[0] - 1.0) + 1.0);
        let p = choose_constants(&h, &grid(), ConstantsMode::Quantitative, None).unwrap();
        assert!((p.epsilon - 4.5).abs() < 1e-8);
        assert!((p.c0 - 6.5).abs() < 1e-8);
        assert!((p.c1 - 11.0).abs() < 1e-8);
        assert!(build_extension(h, p, &grid()).is_ok());
    }

    #[test]
    fn zero_margin_is_rejected() {
        let h = FnHamiltonian::new(chart1(), |_t, x| x[0]);
        assert!(matches!(
            choose_constants(&h, &grid(), ConstantsMode::Quantitative, None),
            Err(Error::QuantitativeTwistFails(_))
        ));
    }

    #[test]
    fn spectrum_collision_is_nudged() {
        // H0 = H1 = 1: the plain slope C1 = 2 sits on a listed period
        let h = FnHamiltonian::new(chart1(), |_t, x| x[0]);
        let p = choose_constants(&h, &grid(), ConstantsMode::Plain, Some(&[2.0, 2.0 * PI])).unwrap();
        assert!((p.c1 - 2.001).abs() < 1e-9);
        assert!((p.epsilon - (p.c1 - p.c0)).abs() < 1e-15);
    }

    #[test]
    fn bad_constants_are_reported() {
        let h = FnHamiltonian::new(chart1(), |_t, x| 10.0 * (x[0] - 1.0) + 1.0);
        let mut p = ExtensionParams::new(6.5, 16.0);
        p.quantitative = true;
        assert!(matches!(build_extension(h.clone(), p, &grid()), Err(Error::BadConstants(_))));
        let p = ExtensionParams::new(6.5, 11.0).with_deltas(0.2, 0.1);
        assert!(matches!(build_extension(h, p, &grid()), Err(Error::BadConstants(_))));
    }

    #[test]
    fn larger_slope_raises_extension() {
        let h = FnHamiltonian::new(chart1(), |_t, x| x[0] * x[0] + 0.1 * x[1].sin());
        let lo = build_extension(h.clone(), ExtensionParams::new(3.0, 4.0), &grid()).unwrap();
        let hi = build_extension(h, ExtensionParams::new(3.0, 5.0), &grid()).unwrap();
        for i in 1..40 {
            let r = 1.0 + 0.005 * i as f64;
            assert!(hi.eval(0.0, &[r, 0.3]) >= lo.eval(0.0, &[r, 0.3]));
        }
    }

    #[test]
    fn no_one_periodic_orbits_in_linear_region() {
        let h = FnHamiltonian::new(chart1(), |_t, x| x[0] * x[0]);
        let e = build_extension(h, ExtensionParams::new(3.0, 4.0), &grid()).unwrap();
        for i in 0..10 {
            let x = [1.2 + 0.1 * i as f64, 0.3 * i as f64];
            let y = flow_map(&e, &x, 1.0, 1e-10).unwrap();
            let dq = crate::linalg::angle_diff(y[1], x[1]).abs();
            assert!(dq > 0.5 && (y[0] - x[0]).abs() < 1e-12);
        }
    }
}

//! Convex billiards on the Birkhoff annulus.
//!
//! A state is `(θ, φ)`: `θ ∈ [0, π]` is the angle between the outgoing ray and
//! the positive tangent, `φ = 2π·s/L` is normalised arc length. The billiard
//! map preserves `sinθ dθ∧dφ = d(−cosθ)∧dφ`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use super::ReturnMap;
use crate::action::GL5;
use crate::error::{Error, Result};
use crate::linalg::{angle_diff, wrap_angle};

const PANELS: usize = 256;

/// Table description as stored in configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TableSpec {
    Circle { radius: f64 },
    Ellipse { a: f64, b: f64 },
    /// Support function `h(ψ) = a0 + Σ_k (a_k cos kψ + b_k sin kψ)`, `k ≥ 2`.
    Fourier { a0: f64, cos: Vec<f64>, sin: Vec<f64> },
}

/// A strictly convex table parametrised by `τ ∈ [0, 2π)`, counter-clockwise.
#[derive(Debug, Clone, PartialEq)]
pub struct BilliardTable {
    pub spec: TableSpec,
    /// Cumulative arc length at panel boundaries `τ_k = 2πk/PANELS`.
    cumulative: Vec<f64>,
}

fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

impl BilliardTable {
    pub fn new(spec: TableSpec) -> Result<Self> {
        let ok = match &spec {
            TableSpec::Circle { radius } => *radius > 0.0,
            TableSpec::Ellipse { a, b } => *a > 0.0 && *b > 0.0,
            TableSpec::Fourier { a0, .. } => *a0 > 0.0,
        };
        if !ok {
            return Err(Error::Config(format!("invalid table {spec:?}")));
        }
        let mut t = Self { spec, cumulative: Vec::new() };
        let (min_k, _) = t.curvature_range();
        if !(min_k > 0.0) {
            return Err(Error::Config("table is not strictly convex".into()));
        }
        let mut cum = vec![0.0];
        for k in 0..PANELS {
            let (a, b) = (TAU * k as f64 / PANELS as f64, TAU * (k + 1) as f64 / PANELS as f64);
            cum.push(cum[k] + t.arc(a, b));
        }
        t.cumulative = cum;
        Ok(t)
    }

    pub fn circle(radius: f64) -> Result<Self> {
        Self::new(TableSpec::Circle { radius })
    }

    pub fn ellipse(a: f64, b: f64) -> Result<Self> {
        Self::new(TableSpec::Ellipse { a, b })
    }

    /// `(γ, γ′, γ″)` at `τ`.
    fn jet(&self, tau: f64) -> [[f64; 2]; 3] {
        match &self.spec {
            TableSpec::Circle { radius: r } => {
                let (s, c) = tau.sin_cos();
                [[r * c, r * s], [-r * s, r * c], [-r * c, -r * s]]
            }
            TableSpec::Ellipse { a, b } => {
                let (s, c) = tau.sin_cos();
                [[a * c, b * s], [-a * s, b * c], [-a * c, -b * s]]
            }
            TableSpec::Fourier { a0, cos, sin } => {
                // h, h′, h″, h‴ of the support function
                let mut h = [*a0, 0.0, 0.0, 0.0];
                for i in 0..cos.len().max(sin.len()) {
                    let (ca, sb) = (cos.get(i).copied().unwrap_or(0.0), sin.get(i).copied().unwrap_or(0.0));
                    let k = (i + 2) as f64;
                    let (s, c) = (k * tau).sin_cos();
                    h[0] += ca * c + sb * s;
                    h[1] += k * (-ca * s + sb * c);
                    h[2] += -k * k * (ca * c + sb * s);
                    h[3] += k * k * k * (ca * s - sb * c);
                }
                let (s, c) = tau.sin_cos();
                let (n, t) = ([c, s], [-s, c]);
                let rho = h[0] + h[2];
                let drho = h[1] + h[3];
                // γ = h n + h′ t, γ′ = (h + h″) t, γ″ = (h′ + h‴) t − (h + h″) n
                let p = [h[0] * n[0] + h[1] * t[0], h[0] * n[1] + h[1] * t[1]];
                [p, [rho * t[0], rho * t[1]], [drho * t[0] - rho * n[0], drho * t[1] - rho * n[1]]]
            }
        }
    }

    pub fn point(&self, tau: f64) -> [f64; 2] {
        self.jet(tau)[0]
    }

    fn speed(&self, tau: f64) -> f64 {
        let d = self.jet(tau)[1];
        dot(d, d).sqrt()
    }

    pub fn curvature(&self, tau: f64) -> f64 {
        let [_, d1, d2] = self.jet(tau);
        if let TableSpec::Fourier { .. } = self.spec {
            // γ′ = (h + h″)·t with t = (−sin τ, cos τ); the radius of curvature is signed
            let rho = dot(d1, [-tau.sin(), tau.cos()]);
            return 1.0 / rho;
        }
        cross(d1, d2) / dot(d1, d1).powf(1.5)
    }

    pub fn curvature_range(&self) -> (f64, f64) {
        (0..720).map(|i| self.curvature(TAU * i as f64 / 720.0)).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), k| (lo.min(k), hi.max(k)))
    }

    fn arc(&self, a: f64, b: f64) -> f64 {
        let (m, r) = (0.5 * (a + b), 0.5 * (b - a));
        GL5.iter().map(|(x, w)| w * self.speed(m + r * x)).sum::<f64>() * r
    }

    pub fn perimeter(&self) -> f64 {
        self.cumulative[PANELS]
    }

    fn arc_length(&self, tau: f64) -> f64 {
        let tau = tau.rem_euclid(TAU);
        let k = ((tau / TAU * PANELS as f64) as usize).min(PANELS - 1);
        let a = TAU * k as f64 / PANELS as f64;
        self.cumulative[k] + self.arc(a, tau)
    }

    pub fn phi_of_tau(&self, tau: f64) -> f64 {
        wrap_angle(TAU * self.arc_length(tau) / self.perimeter())
    }

    /// Inverse of [`BilliardTable::phi_of_tau`] by safeguarded Newton.
    pub fn tau_of_phi(&self, phi: f64) -> f64 {
        if let TableSpec::Circle { .. } = self.spec {
            return wrap_angle(phi);
        }
        let s = wrap_angle(phi) / TAU * self.perimeter();
        let k = self.cumulative.partition_point(|c| *c <= s).clamp(1, PANELS) - 1;
        let (mut lo, mut hi) = (TAU * k as f64 / PANELS as f64, TAU * (k + 1) as f64 / PANELS as f64);
        let mut tau = lo + (hi - lo) * (s - self.cumulative[k]) / (self.cumulative[k + 1] - self.cumulative[k]);
        for _ in 0..60 {
            let g = self.cumulative[k] + self.arc(TAU * k as f64 / PANELS as f64, tau) - s;
            if g > 0.0 {
                hi = tau;
            } else {
                lo = tau;
            }
            let step = g / self.speed(tau);
            let mut next = tau - step;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - tau).abs() <= 1e-16 * TAU {
                tau = next;
                break;
            }
            tau = next;
        }
        tau
    }

    fn frame(&self, tau: f64) -> ([f64; 2], [f64; 2], [f64; 2]) {
        let [p, d1, _] = self.jet(tau);
        let n = dot(d1, d1).sqrt();
        let t = [d1[0] / n, d1[1] / n];
        (p, t, [-t[1], t[0]])
    }

    /// Curve parameter of the far end of the chord from `τ` in direction `d`.
    ///
    /// `g(δ) = d × (γ(τ+δ) − γ(τ))` is negative exactly on the arc before the
    /// hit, so the root is bracketed by halving from the first positive sample.
    /// Parameter of the second intersection of the ray `p + t·d` with the table.
    ///
    /// The search runs from `τ` in the direction the ray travels (`sign = ±1`), so
    /// near-tangent rays always give short chords at small `δ`.
    fn chord_end(&self, tau: f64, p: [f64; 2], d: [f64; 2], sign: f64) -> f64 {
        let g = |delta: f64| {
            if delta > 0.5 {
                let q = self.point(tau + sign * delta);
                return sign * cross(d, [q[0] - p[0], q[1] - p[1]]);
            }
            // short chords: integrate γ′ instead of subtracting nearby points
            let panels = (delta / 0.05).ceil().max(1.0) as usize;
            let hw = 0.5 * delta / panels as f64;
            let mut chord = [0.0, 0.0];
            for k in 0..panels {
                let m = tau + sign * (2 * k + 1) as f64 * hw;
                for (x, w) in GL5.iter() {
                    let v = self.jet(m + hw * x)[1];
                    chord[0] += w * hw * v[0];
                    chord[1] += w * hw * v[1];
                }
            }
            cross(d, chord)
        };
        let samples = 64;
        let mut hi = TAU;
        for i in 1..samples {
            let delta = TAU * i as f64 / samples as f64;
            if g(delta) > 0.0 {
                hi = delta;
                break;
            }
        }
        let mut lo = hi;
        for _ in 0..200 {
            lo *= 0.5;
            if g(lo) < 0.0 {
                break;
            }
        }
        let (mut glo, mut ghi) = (g(lo), g(hi));
        // regula falsi, with a bisection step every third iteration
        for i in 0..200 {
            let mut m = hi - ghi * (hi - lo) / (ghi - glo);
            if !(m > lo && m < hi) || i % 3 == 2 {
                m = 0.5 * (lo + hi);
            }
            let gm = g(m);
            if gm == 0.0 || (hi - lo) <= 1e-15 * hi.max(1.0) {
                return tau + sign * m;
            }
            if gm < 0.0 {
                lo = m;
                glo = gm;
            } else {
                hi = m;
                ghi = gm;
            }
        }
        tau + sign * 0.5 * (lo + hi)
    }

    /// One bounce `(θ, φ) ↦ (θ′, φ′)`.
    pub fn map(&self, theta: f64, phi: f64) -> Result<(f64, f64)> {
        if !(0.0..=PI).contains(&theta) {
            return Err(Error::TangentRay(theta));
        }
        if theta == 0.0 || theta == PI {
            return Ok((theta, wrap_angle(phi)));
        }
        let tau = self.tau_of_phi(phi);
        let (p, t, n) = self.frame(tau);
        let (s, c) = theta.sin_cos();
        let d = [c * t[0] + s * n[0], c * t[1] + s * n[1]];
        let tau2 = self.chord_end(tau, p, d, if theta <= FRAC_PI_2 { 1.0 } else { -1.0 });
        let (_, t2, n2) = self.frame(tau2);
        let theta2 = (-dot(d, n2)).atan2(dot(d, t2));
        Ok((theta2, self.phi_of_tau(tau2)))
    }

    /// Product of the angular momenta of the chord line about the two foci
    /// (ellipses only); it is invariant along billiard orbits.
    pub fn focal_invariant(&self, theta: f64, phi: f64) -> Option<f64> {
        let TableSpec::Ellipse { a, b } = self.spec else { return None };
        let f = (a * a - b * b).abs().sqrt();
        let foci = if a >= b { [[f, 0.0], [-f, 0.0]] } else { [[0.0, f], [0.0, -f]] };
        let tau = self.tau_of_phi(phi);
        let (p, t, n) = self.frame(tau);
        let (s, c) = theta.sin_cos();
        let d = [c * t[0] + s * n[0], c * t[1] + s * n[1]];
        let l = |q: [f64; 2]| cross([p[0] - q[0], p[1] - q[1]], d);
        Some(l(foci[0]) * l(foci[1]))
    }

    pub fn as_map(&self) -> BilliardMap {
        BilliardMap { table: self.clone() }
    }
}

/// Largest `|det − 1|` of the finite-difference Jacobian in `(−cosθ, φ)` coordinates.
pub fn billiard_form_check(table: &BilliardTable, grid: &[(f64, f64)]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &(theta, phi) in grid {
        if theta <= 0.0 || theta >= PI {
            continue;
        }
        // Differentiate in θ, which the map is smooth in up to the boundary, and
        // convert with dc = sin θ dθ; differencing in c directly is singular there.
        let ht = (1e-5f64).min(0.5 * theta).min(0.5 * (PI - theta));
        let hp = 1e-6;
        let (t0, _) = table.map(theta, phi)?;
        let (a1, b1) = table.map(theta + ht, phi)?;
        let (a0, b0) = table.map(theta - ht, phi)?;
        let (a3, b3) = table.map(theta, phi + hp)?;
        let (a2, b2) = table.map(theta, phi - hp)?;
        let (s0, s1) = (theta.sin(), t0.sin());
        let j11 = s1 * (a1 - a0) / (2.0 * ht) / s0;
        let j21 = angle_diff(b1, b0) / (2.0 * ht) / s0;
        let j12 = s1 * (a3 - a2) / (2.0 * hp);
        let j22 = angle_diff(b3, b2) / (2.0 * hp);
        worst = worst.max((j11 * j22 - j12 * j21 - 1.0).abs());
    }
    Ok(worst)
}

/// Uniform `n × n` grid of cell centres in `(θ, φ)`.
pub fn phase_grid(n: usize) -> Vec<(f64, f64)> {
    let mut g = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            g.push((PI * (i as f64 + 0.5) / n as f64, TAU * (j as f64 + 0.5) / n as f64));
        }
    }
    g
}

/// The billiard map as a [`ReturnMap`] on `(θ, φ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BilliardMap {
    pub table: BilliardTable,
}

impl ReturnMap for BilliardMap {
    fn dim(&self) -> usize {
        2
    }

    fn apply(&self, x: &[f64], _tol: f64) -> Result<Vec<f64>> {
        let (t, p) = self.table.map(x[0], x[1])?;
        Ok(vec![t, p])
    }

    fn difference(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        vec![a[0] - b[0], angle_diff(a[1], b[1])]
    }

    fn normalize(&self, x: &[f64]) -> Vec<f64> {
        vec![x[0], wrap_angle(x[1])]
    }

    fn is_interior(&self, x: &[f64]) -> bool {
        x[0] > 1e-3 && x[0] < PI - 1e-3
    }

    fn seeds(&self, resolution: usize) -> Vec<Vec<f64>> {
        phase_grid(resolution).into_iter().map(|(t, p)| vec![t, p]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn circle_map_advances_by_twice_the_angle() {
        let t = BilliardTable::circle(1.0).unwrap();
        for &(theta, phi) in &phase_grid(16) {
            let (t2, p2) = t.map(theta, phi).unwrap();
            assert!((t2 - theta).abs() < 1e-9);
            assert!(angle_diff(p2, phi + 2.0 * theta).abs() < 1e-9);
        }
        let (_, p) = t.map(PI / 2.0, 0.4).unwrap();
        assert!(angle_diff(p, 0.4 + PI).abs() < 1e-12);
    }

    #[test]
    fn tangent_rays_are_fixed_and_outward_rays_rejected() {
        let t = BilliardTable::ellipse(2.0, 1.0).unwrap();
        assert_eq!(t.map(0.0, 1.0).unwrap(), (0.0, 1.0));
        assert_eq!(t.map(PI, 1.0).unwrap(), (PI, 1.0));
        assert_eq!(t.map(-0.1, 1.0), Err(Error::TangentRay(-0.1)));
        assert_eq!(t.map(3.5, 1.0), Err(Error::TangentRay(3.5)));
    }

    #[test]
    fn ellipse_perimeter_and_arc_inverse() {
        let t = BilliardTable::ellipse(2.0, 1.0).unwrap();
        // Ramanujan II approximation, accurate to ~1e-10 relative here
        let (a, b) = (2.0f64, 1.0f64);
        let h = ((a - b) / (a + b)).powi(2);
        let ram = PI * (a + b) * (1.0 + 3.0 * h / (10.0 + (4.0 - 3.0 * h).sqrt()));
        assert!((t.perimeter() - ram).abs() < 1e-4 * ram);
        for phi in [0.0, 0.3, 2.0, 4.0, 6.2] {
            assert!(angle_diff(t.phi_of_tau(t.tau_of_phi(phi)), phi).abs() < 1e-12);
        }
    }

    #[test]
    fn near_tangent_rays_stay_accurate() {
        let t = BilliardTable::circle(1.0).unwrap();
        let (t2, p2) = t.map(1e-3, 0.5).unwrap();
        assert!((t2 - 1e-3).abs() < 1e-12 && angle_diff(p2, 0.5 + 2e-3).abs() < 1e-12);
        let e = BilliardTable::ellipse(1.5, 1.0).unwrap();
        let grid: Vec<(f64, f64)> = (0..16).map(|j| (if j % 2 == 0 { 1e-3 } else { PI - 1e-3 }, TAU * j as f64 / 16.0)).collect();
        let res = billiard_form_check(&e, &grid).unwrap();
        assert!(res < 1e-6, "{res}");
    }

    #[test]
    fn circle_is_an_exact_shear() {
        let t = BilliardTable::circle(1.0).unwrap();
        assert!(billiard_form_check(&t, &phase_grid(8)).unwrap() < 1e-8);
    }

    #[test]
    fn fourier_table_with_only_a0_is_a_circle() {
        let t = BilliardTable::new(TableSpec::Fourier { a0: 1.0, cos: vec![0.0], sin: vec![] }).unwrap();
        assert!((t.perimeter() - TAU).abs() < 1e-12);
        let (t2, _) = t.map(0.7, 1.0).unwrap();
        assert!((t2 - 0.7).abs() < 1e-9);
        assert!(BilliardTable::new(TableSpec::Fourier { a0: 1.0, cos: vec![0.5], sin: vec![] }).is_err());
    }

    #[test]
    fn fourier_table_preserves_area() {
        let t = BilliardTable::new(TableSpec::Fourier { a0: 1.0, cos: vec![0.05, 0.01], sin: vec![0.02] }).unwrap();
        assert!(billiard_form_check(&t, &phase_grid(6)).unwrap() < 1e-6);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn ellipse_focal_invariant_is_preserved(theta in 0.05f64..3.09, phi in 0.0f64..6.28) {
            let t = BilliardTable::ellipse(2.0, 1.2).unwrap();
            let i0 = t.focal_invariant(theta, phi).unwrap();
            let (mut th, mut ph) = (theta, phi);
            for _ in 0..10 {
                (th, ph) = t.map(th, ph).unwrap();
                let i = t.focal_invariant(th, ph).unwrap();
                prop_assert!((i - i0).abs() < 1e-9, "{} vs {}", i, i0);
            }
        }

        #[test]
        fn circle_orbits_keep_theta(theta in 0.01f64..3.13, phi in 0.0f64..6.28) {
            let t = BilliardTable::circle(2.0).unwrap();
            let (mut th, mut ph) = (theta, phi);
            for k in 1..=5 {
                (th, ph) = t.map(th, ph).unwrap();
                prop_assert!((th - theta).abs() < 1e-9);
                prop_assert!(angle_diff(ph, phi + 2.0 * k as f64 * theta).abs() < 1e-8);
            }
        }
    }
}

//! A synthetic twist annulus.
//!
//! The degenerate annulus is `[−1, 1]_u × S¹_q` with `λ = sin(πu/2)·dq`, so
//! `dλ` vanishes to first order at both boundary circles. The non-degenerate
//! coordinate is `x = sin(πu/2)` with `ω = dx∧dq`; near `u = 1` it is the
//! Liouville coordinate of the cosine collar profile.
//!
//! The Hamiltonian is `E = u² + κ·b(u)·V(q)·cos 2πt` with `b` a bump supported in
//! `0.2 ≤ |u| ≤ 0.8` and `V` the zero-mean Poisson kernel, whose harmonics all
//! appear so that every resonant circle breaks up at first order in `κ`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use super::ReturnMap;
use crate::action::compute_action;
use crate::error::{Error, Result};
use crate::geometry::{CollarProfile, ContactChart, DomainDescriptor};
use crate::hamflow::{flow_map, integrate_flow, FnHamiltonian, HamiltonianModel};
use crate::linalg::{angle_diff, wrap_angle};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnulusTwistModel {
    pub kappa: f64,
    pub bump_lo: f64,
    pub bump_hi: f64,
    /// Poisson kernel parameter in `(0, 1)`.
    pub poisson: f64,
    /// Seeds and reported orbits stay in `|u| ≤ interior`.
    pub interior: f64,
}

impl Default for AnnulusTwistModel {
    fn default() -> Self {
        Self { kappa: 0.0, bump_lo: 0.2, bump_hi: 0.8, poisson: 0.6, interior: 0.9 }
    }
}

impl AnnulusTwistModel {
    pub fn new(kappa: f64) -> Result<Self> {
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(Error::Config(format!("kappa must be non-negative, got {kappa}")));
        }
        Ok(Self { kappa, ..Self::default() })
    }

    pub fn profile(&self) -> CollarProfile {
        CollarProfile::Cosine
    }

    pub fn domain(&self) -> DomainDescriptor {
        DomainDescriptor::new(ContactChart::new(1), "S1 x [-1, 1]", Some(self.profile())).expect("cosine profile is valid")
    }

    /// `(b, b′)` of the bump at `u`.
    pub fn bump(&self, u: f64) -> (f64, f64) {
        let (lo, hi) = (self.bump_lo, self.bump_hi);
        let a = u.abs();
        if a <= lo || a >= hi {
            return (0.0, 0.0);
        }
        let w = (a - lo) * (hi - a);
        let peak = 0.25 * (hi - lo) * (hi - lo);
        let b = (1.0 / peak - 1.0 / w).exp();
        let db = b * (hi + lo - 2.0 * a) / (w * w);
        (b, db * u.signum())
    }

    /// `(V, V′)` of the zero-mean Poisson kernel `V(q) = (1−ρ²)/(1−2ρcos q+ρ²) − 1 = 2Σρᵐcos mq`.
    pub fn potential(&self, q: f64) -> (f64, f64) {
        let rho = self.poisson;
        let den = 1.0 - 2.0 * rho * q.cos() + rho * rho;
        let num = 1.0 - rho * rho;
        (num / den - 1.0, -num * 2.0 * rho * q.sin() / (den * den))
    }

    /// `E(t, u, q)`.
    pub fn energy(&self, t: f64, u: f64, q: f64) -> f64 {
        let (b, _) = self.bump(u);
        if b == 0.0 {
            return u * u;
        }
        u * u + self.kappa * b * self.potential(q).0 * (TAU * t).cos()
    }

    /// `(∂_u E, ∂_q E)`.
    pub fn energy_grad(&self, t: f64, u: f64, q: f64) -> (f64, f64) {
        let (b, db) = self.bump(u);
        if b == 0.0 {
            return (2.0 * u, 0.0);
        }
        let (v, dv) = self.potential(q);
        let c = self.kappa * (TAU * t).cos();
        (2.0 * u + c * db * v, c * b * dv)
    }

    pub fn u_of_x(x: f64) -> f64 {
        x.clamp(-1.0, 1.0).asin() / FRAC_PI_2
    }

    pub fn x_of_u(u: f64) -> f64 {
        (FRAC_PI_2 * u).sin()
    }

    /// Unperturbed angular velocity `q̇ = dE/dx = 4u/(π cos(πu/2))` on the circle `u`.
    pub fn angular_velocity(u: f64) -> f64 {
        4.0 * u / (PI * (FRAC_PI_2 * u).cos())
    }

    /// The circle `u > 0` on which the unperturbed time-1 map rotates by `2π·ν`.
    pub fn resonant_circle(nu: f64) -> Result<f64> {
        let target = TAU * nu;
        let (mut a, mut b) = (0.0, 1.0 - 1e-12);
        if !(target > 0.0 && target < Self::angular_velocity(b)) {
            return Err(Error::Config(format!("rotation {nu} not attained")));
        }
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if Self::angular_velocity(m) < target {
                a = m;
            } else {
                b = m;
            }
        }
        Ok(0.5 * (a + b))
    }

    /// Seeds for period-`k` orbits: `per_circle` points on each unperturbed
    /// circle of rotation number `j/k` that meets the perturbation.
    pub fn resonance_seeds(&self, k: usize, per_circle: usize) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        for j in 1..k {
            let Ok(u) = Self::resonant_circle(j as f64 / k as f64) else { continue };
            if u <= self.bump_lo || u >= self.bump_hi || u > self.interior {
                continue;
            }
            for i in 0..per_circle {
                out.push(vec![Self::x_of_u(u), TAU * i as f64 / per_circle as f64]);
            }
        }
        out
    }

    /// `E` on the degenerate collar chart `(r, q) = (u, q)`.
    pub fn degenerate_hamiltonian(&self) -> FnHamiltonian {
        let m = *self;
        let g = *self;
        let h = FnHamiltonian::new(ContactChart::new(1), move |t, x| m.energy(t, x[0], x[1])).with_grad(move |t, x| {
            let (eu, eq) = g.energy_grad(t, x[0], x[1]);
            vec![eu, eq]
        });
        if self.kappa == 0.0 {
            h.autonomous()
        } else {
            h
        }
    }

    /// `H = E∘Q` on the non-degenerate annulus `(x, q)`.
    pub fn hamiltonian(&self) -> AnnulusHamiltonian {
        AnnulusHamiltonian { model: *self }
    }

    pub fn time_one_map(&self, tol: f64) -> AnnulusMap {
        AnnulusMap { h: self.hamiltonian(), tol }
    }
}

/// `H(t, x, q) = E(t, u(x), q)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnulusHamiltonian {
    pub model: AnnulusTwistModel,
}

impl HamiltonianModel for AnnulusHamiltonian {
    fn chart(&self) -> ContactChart {
        ContactChart::new(1)
    }

    fn eval(&self, t: f64, x: &[f64]) -> f64 {
        self.model.energy(t, AnnulusTwistModel::u_of_x(x[0]), x[1])
    }

    fn grad(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let u = AnnulusTwistModel::u_of_x(x[0]);
        let (eu, eq) = self.model.energy_grad(t, u, x[1]);
        let dudx = 1.0 / (FRAC_PI_2 * (1.0 - x[0] * x[0]).sqrt());
        vec![eu * dudx, eq]
    }

    fn r_range(&self) -> (f64, f64) {
        (-1.0, 1.0)
    }

    fn is_autonomous(&self) -> bool {
        self.model.kappa == 0.0
    }
}

/// The time-1 map of the annulus flow in `(x, q)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnulusMap {
    pub h: AnnulusHamiltonian,
    pub tol: f64,
}

impl ReturnMap for AnnulusMap {
    fn dim(&self) -> usize {
        2
    }

    fn apply(&self, x: &[f64], tol: f64) -> Result<Vec<f64>> {
        let y = flow_map(&self.h, x, 1.0, tol.min(self.tol))?;
        Ok(vec![y[0], wrap_angle(y[1])])
    }

    fn difference(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        vec![a[0] - b[0], angle_diff(a[1], b[1])]
    }

    fn normalize(&self, x: &[f64]) -> Vec<f64> {
        vec![x[0], wrap_angle(x[1])]
    }

    fn is_interior(&self, x: &[f64]) -> bool {
        AnnulusTwistModel::u_of_x(x[0]).abs() <= self.h.model.interior
    }

    /// A grid in `(u, q)` over the interior with `u > 0`, which carries every
    /// orbit type up to the symmetry `u ↦ −u`.
    fn seeds(&self, resolution: usize) -> Vec<Vec<f64>> {
        let n = resolution.max(2);
        let lim = self.h.model.interior;
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            let u = lim * (i as f64 + 0.5) / n as f64;
            for j in 0..n {
                let q = TAU * j as f64 / n as f64;
                out.push(vec![AnnulusTwistModel::x_of_u(u), q]);
            }
        }
        out
    }

    fn orbit_action(&self, x: &[f64], k: usize, tol: f64) -> Option<f64> {
        let traj = integrate_flow(&self.h, x, k as f64, tol).ok()?;
        compute_action(&self.h, None, &traj).ok().map(|r| r.action)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamflow::{check_weakened_twist, energy_drift, pullback_vector_field, BoundaryGrid, CollarTwist};

    #[test]
    fn bump_is_supported_and_peaks_at_one() {
        let m = AnnulusTwistModel::new(0.1).unwrap();
        for u in [0.0, 0.1, 0.2, 0.8, 0.95, -0.15, -0.85] {
            assert_eq!(m.bump(u), (0.0, 0.0));
        }
        assert!((m.bump(0.5).0 - 1.0).abs() < 1e-15);
        assert!((m.bump(-0.5).0 - 1.0).abs() < 1e-15);
        for u in [0.3, 0.45, 0.7, -0.33] {
            let h = 1e-6;
            let fd = (m.bump(u + h).0 - m.bump(u - h).0) / (2.0 * h);
            assert!((fd - m.bump(u).1).abs() < 1e-6);
        }
    }

    #[test]
    fn poisson_potential_matches_its_fourier_series() {
        let m = AnnulusTwistModel::new(0.1).unwrap();
        for q in [0.0, 0.3, 2.0, 4.5] {
            let series: f64 = (1..200).map(|k| 2.0 * 0.6f64.powi(k) * (k as f64 * q).cos()).sum();
            assert!((m.potential(q).0 - series).abs() < 1e-12);
            let dseries: f64 = (1..200).map(|k| -2.0 * k as f64 * 0.6f64.powi(k) * (k as f64 * q).sin()).sum();
            assert!((m.potential(q).1 - dseries).abs() < 1e-10);
        }
    }

    #[test]
    fn analytic_gradient_matches_differences() {
        let h = AnnulusTwistModel::new(0.3).unwrap().hamiltonian();
        for x in [[0.4, 1.0], [-0.7, 2.5], [0.9, 5.0]] {
            let g = h.grad(0.2, &x);
            let fd = crate::hamflow::fd_gradient(&h, 0.2, &x);
            assert!((g[0] - fd[0]).abs() < 1e-6 && (g[1] - fd[1]).abs() < 1e-6);
        }
    }

    #[test]
    fn degenerate_twist_is_positive_at_both_ends() {
        let m = AnnulusTwistModel::new(0.1).unwrap();
        let e = m.degenerate_hamiltonian();
        let rep = check_weakened_twist(&CollarTwist(&e), &BoundaryGrid::circle(&ContactChart::new(1), 32, 8));
        assert!(rep.passes && (rep.min_h - 2.0).abs() < 1e-9);
        // u = −1 with the reversed orientation α = −dq: h = −∂_u E
        for q in [0.0, 1.0, 3.0] {
            assert!(-m.energy_grad(0.0, -1.0, q).0 > 0.0);
        }
    }

    #[test]
    fn reeb_coefficient_wraps_infinitely() {
        let m = AnnulusTwistModel::new(0.1).unwrap();
        let e = m.degenerate_hamiltonian();
        let mut last = 0.0;
        for r in [0.9, 0.99, 0.999, 0.9999, 0.99999] {
            let split = pullback_vector_field(&e, &m.profile(), 0.0, &[r, 0.3]).unwrap();
            let direct = m.hamiltonian().grad(0.0, &[r, 0.3])[0];
            assert!((split.reeb_coeff - direct).abs() < 1e-6 * direct);
            assert!(split.reeb_coeff > last);
            last = split.reeb_coeff;
        }
        assert!(last > 100.0);
    }

    #[test]
    fn unperturbed_map_is_a_rigid_rotation() {
        let m = AnnulusTwistModel::new(0.0).unwrap();
        let f = m.time_one_map(1e-11);
        for u in [0.1f64, 0.5, -0.6] {
            let x = AnnulusTwistModel::x_of_u(u);
            let y = f.apply(&[x, 1.0], 1e-11).unwrap();
            assert!((y[0] - x).abs() < 1e-10);
            let oracle = wrap_angle(1.0 + AnnulusTwistModel::angular_velocity(u));
            assert!(angle_diff(y[1], oracle).abs() < 1e-8);
        }
    }

    #[test]
    fn resonant_circle_inverts_angular_velocity() {
        for nu in [0.2, 1.0 / 7.0, 1.0 / 11.0] {
            let u = AnnulusTwistModel::resonant_circle(nu).unwrap();
            assert!((AnnulusTwistModel::angular_velocity(u) - TAU * nu).abs() < 1e-12);
            assert!(u > 0.2 && u < 0.8);
        }
    }

    #[test]
    fn autonomous_energy_is_conserved() {
        let h = AnnulusTwistModel::new(0.0).unwrap().hamiltonian();
        let tol = 1e-10;
        let traj = integrate_flow(&h, &[0.7, 0.0], 10.0, tol).unwrap();
        assert!(energy_drift(&h, &traj) <= 100.0 * tol * 10.0);
    }

    #[test]
    fn time_one_map_is_area_preserving() {
        let f = AnnulusTwistModel::new(0.1).unwrap().time_one_map(1e-12);
        for x0 in [[0.45, 0.2], [0.7, 3.0], [-0.5, 5.5]] {
            let h = 1e-5;
            let mut j = [[0.0; 2]; 2];
            for c in 0..2 {
                let (mut p, mut m) = (x0, x0);
                p[c] += h;
                m[c] -= h;
                let d = f.difference(&f.apply(&p, 1e-12).unwrap(), &f.apply(&m, 1e-12).unwrap());
                for r in 0..2 {
                    j[r][c] = d[r] / (2.0 * h);
                }
            }
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            assert!((det - 1.0).abs() < 1e-5, "{det}");
        }
    }
}

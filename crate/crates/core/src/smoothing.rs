//! The ε-family `H_ε = E∘Q_ε` that smooths an infinitely wrapping Hamiltonian.
//!
//! `Q = (φ, id)` has `φ′ = g0` with `g0(0) = ∞`. Truncating `g0` on `[0, ε]` to a
//! profile `g_ε` with `g_ε(0) = 1/ε` gives `Q_ε` and a Hamiltonian whose boundary
//! slope is `(1/ε)·∂_r E`. The truncation is a power law
//! `g_ε(x) = g0(ε) + (1/ε − g0(ε))·(1 − x/ε)^β` with `β` fixed by
//! `∫_0^ε g_ε = φ(ε)`, so `φ_ε = φ` from `ε` on.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{phi_derivative, solve_phi, CollarProfile, ContactChart};
use crate::hamflow::{check_weakened_twist, BoundaryGrid, CollarTwist, HamiltonianModel, Nondegenerated};

/// The truncated reparametrisation `φ_ε` and its derivative `g_ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedReparam {
    pub profile: CollarProfile,
    pub eps: f64,
    pub g0_eps: f64,
    pub phi_at_eps: f64,
    pub beta: f64,
}

impl SmoothedReparam {
    pub fn new(profile: CollarProfile, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::Config(format!("smoothing parameter must lie in (0, 1), got {eps}")));
        }
        if eps > profile.s_max() {
            return Err(Error::OutOfCollar(eps));
        }
        let g0_eps = phi_derivative(&profile, eps)?;
        let phi_at_eps = solve_phi(&profile, eps)?;
        let m = (phi_at_eps / eps - g0_eps) / (1.0 / eps - g0_eps);
        if !(m > 0.0 && m < 1.0) {
            return Err(Error::InvalidProfile(format!(
                "no monotone mass-preserving truncation at eps = {eps} (mass ratio {m})"
            )));
        }
        Ok(Self { profile, eps, g0_eps, phi_at_eps, beta: 1.0 / m - 1.0 })
    }

    /// `g_ε(x)`.
    pub fn g(&self, x: f64) -> Result<f64> {
        if x >= self.eps {
            return phi_derivative(&self.profile, x);
        }
        let w = 1.0 - x / self.eps;
        Ok(self.g0_eps + (1.0 / self.eps - self.g0_eps) * w.powf(self.beta))
    }

    /// `φ_ε(x) = ∫_0^x g_ε`.
    pub fn phi(&self, x: f64) -> Result<f64> {
        if x >= self.eps {
            return solve_phi(&self.profile, x);
        }
        if x <= 0.0 {
            return Ok(0.0);
        }
        let w = 1.0 - x / self.eps;
        let amp = (1.0 / self.eps - self.g0_eps) * self.eps / (self.beta + 1.0);
        Ok(x * self.g0_eps + amp * (1.0 - w.powf(self.beta + 1.0)))
    }

    /// `F_ε(r) = 1 − φ_ε(1 − r)`.
    pub fn f(&self, r: f64) -> Result<f64> {
        Ok(1.0 - self.phi(1.0 - r)?)
    }

    /// `F_ε′(r) = g_ε(1 − r)`.
    pub fn f_prime(&self, r: f64) -> Result<f64> {
        self.g(1.0 - r)
    }
}

/// `H_ε = E∘Q_ε` on the non-degenerate collar.
#[derive(Debug, Clone)]
pub struct SmoothingFamily<E> {
    pub reparam: SmoothedReparam,
    pub e: E,
}

impl<E: HamiltonianModel> SmoothingFamily<E> {
    pub fn eps(&self) -> f64 {
        self.reparam.eps
    }

    fn degenerate_point(&self, x: &[f64]) -> Option<Vec<f64>> {
        let mut xd = x.to_vec();
        xd[0] = self.reparam.f(x[0]).ok()?;
        Some(xd)
    }
}

impl<E: HamiltonianModel> HamiltonianModel for SmoothingFamily<E> {
    fn chart(&self) -> ContactChart {
        self.e.chart()
    }
    fn eval(&self, t: f64, x: &[f64]) -> f64 {
        self.degenerate_point(x).map_or(f64::NAN, |xd| self.e.eval(t, &xd))
    }
    fn grad(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let Some(xd) = self.degenerate_point(x) else {
            return vec![f64::NAN; x.len()];
        };
        let mut g = self.e.grad(t, &xd);
        g[0] *= self.reparam.f_prime(x[0]).unwrap_or(f64::NAN);
        g
    }
    fn r_range(&self) -> (f64, f64) {
        (1.0 - self.reparam.profile.s_max(), 1.0)
    }
    fn is_autonomous(&self) -> bool {
        self.e.is_autonomous()
    }
}

/// Builds `H_ε` after checking the degenerate twist condition `∂_r E > 0` on `B`.
pub fn build_family<E: HamiltonianModel>(
    e: E,
    profile: &CollarProfile,
    eps: f64,
    grid: &BoundaryGrid,
) -> Result<SmoothingFamily<E>> {
    let w = check_weakened_twist(&CollarTwist(&e), grid);
    if !w.passes {
        return Err(Error::TwistFails(w.min_h));
    }
    Ok(SmoothingFamily { reparam: SmoothedReparam::new(profile.clone(), eps)?, e })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub eps: Vec<f64>,
    pub sup_diff: Vec<f64>,
    /// Strictly decreasing as `ε` decreases.
    pub decreasing: bool,
    pub last: f64,
}

/// `max |H_ε − H|` over the grid for each family member, `H = E∘Q`.
///
/// Families are sorted by decreasing `ε` before comparison.
pub fn verify_convergence<E: HamiltonianModel + Clone>(
    families: &[SmoothingFamily<E>],
    grid: &[(f64, Vec<f64>)],
) -> ConvergenceReport {
    let mut fams: Vec<&SmoothingFamily<E>> = families.iter().collect();
    fams.sort_by(|a, b| b.eps().partial_cmp(&a.eps()).unwrap());
    let mut eps = Vec::new();
    let mut sup_diff = Vec::new();
    for f in fams {
        let h = Nondegenerated::new(f.e.clone(), f.reparam.profile.clone());
        let d = grid.iter().map(|(t, x)| (f.eval(*t, x) - h.eval(*t, x)).abs()).fold(0.0, f64::max);
        eps.push(f.eps());
        sup_diff.push(d);
    }
    let decreasing = sup_diff.windows(2).all(|w| w[1] < w[0]);
    ConvergenceReport { last: *sup_diff.last().unwrap_or(&f64::NAN), eps, sup_diff, decreasing }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeReport {
    pub eps: f64,
    /// `min_{B×t} h_ε` at the boundary.
    pub min_slope: f64,
    /// `C = min_{B×t} ∂_r E` at the boundary.
    pub c: f64,
    pub passes: bool,
}

/// The boundary slope of `H_ε` against `C/ε`.
pub fn slope_lower_bound<E: HamiltonianModel>(family: &SmoothingFamily<E>, grid: &BoundaryGrid) -> SlopeReport {
    let min_slope = check_weakened_twist(&CollarTwist(family), grid).min_h;
    let c = check_weakened_twist(&CollarTwist(&family.e), grid).min_h;
    let bound = c / family.eps();
    SlopeReport { eps: family.eps(), min_slope, c, passes: min_slope >= bound * (1.0 - 1e-12) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamflow::{check_quantitative_twist, FnHamiltonian};
    use proptest::prelude::*;

    fn e_model() -> FnHamiltonian {
        FnHamiltonian::new(ContactChart::new(1), |_t, x| x[0] * x[0] + 0.1 * x[1].sin() * (1.0 - x[0]).powi(3))
    }

    fn grid() -> BoundaryGrid {
        BoundaryGrid::circle(&ContactChart::new(1), 24, 2)
    }

    #[test]
    fn truncation_endpoints_for_model_profile() {
        let eps = 0.04;
        let s = SmoothedReparam::new(CollarProfile::default(), eps).unwrap();
        assert!((s.g(0.0).unwrap() - 1.0 / eps).abs() < 1e-9);
        assert!((s.g(eps).unwrap() - 1.0 / (2.0 * eps.sqrt())).abs() < 1e-9);
        assert!((s.phi(eps).unwrap() - eps.sqrt()).abs() < 1e-12);
        assert_eq!(s.phi(0.0).unwrap(), 0.0);
        assert!((s.f(1.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn phi_eps_integrates_g_eps() {
        let s = SmoothedReparam::new(CollarProfile::Cosine, 0.1).unwrap();
        // composite Simpson oracle
        let n = 2000;
        let x_end = 0.1;
        let h = x_end / n as f64;
        let mut acc = s.g(0.0).unwrap() + s.g(x_end).unwrap();
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * s.g(i as f64 * h).unwrap();
        }
        let simpson = acc * h / 3.0;
        assert!((simpson - s.phi(x_end).unwrap()).abs() < 1e-7);
    }

    #[test]
    fn far_from_boundary_family_equals_composition() {
        let f = build_family(e_model(), &CollarProfile::default(), 0.05, &grid()).unwrap();
        let h = Nondegenerated::new(e_model(), CollarProfile::default());
        for r in [0.1, 0.5, 0.9, 0.95] {
            assert!((f.eval(0.0, &[r, 0.3]) - h.eval(0.0, &[r, 0.3])).abs() < 1e-12);
        }
    }

    #[test]
    fn boundary_slope_is_e_slope_over_eps() {
        for eps in [0.2, 0.01] {
            let f = build_family(e_model(), &CollarProfile::default(), eps, &grid()).unwrap();
            let rep = slope_lower_bound(&f, &grid());
            assert!(rep.passes);
            assert!((rep.c - 2.0).abs() < 1e-6);
            assert!((rep.min_slope - 2.0 / eps).abs() < 1e-4 / eps);
        }
    }

    #[test]
    fn non_twisting_e_is_rejected() {
        let e = FnHamiltonian::new(ContactChart::new(1), |_t, x| -x[0]);
        assert!(matches!(build_family(e, &CollarProfile::default(), 0.1, &grid()), Err(Error::TwistFails(_))));
    }

    #[test]
    fn convergence_and_divergence() {
        let eps = [0.2, 0.1, 0.05, 0.01];
        let fams: Vec<_> = eps
            .iter()
            .map(|e| build_family(e_model(), &CollarProfile::default(), *e, &grid()).unwrap())
            .collect();
        let band: Vec<(f64, Vec<f64>)> = (0..=200).map(|i| (0.0, vec![0.5 + 0.5 * i as f64 / 200.0, 0.7])).collect();
        let rep = verify_convergence(&fams, &band);
        assert!(rep.decreasing, "{rep:?}");
        let far: Vec<(f64, Vec<f64>)> = (0..=50).map(|i| (0.0, vec![0.2 + 0.5 * i as f64 / 50.0, 0.7])).collect();
        assert!(verify_convergence(&fams, &far).sup_diff.iter().all(|d| *d == 0.0));
        let slopes: Vec<f64> = fams.iter().map(|f| slope_lower_bound(f, &grid()).min_slope).collect();
        assert!(slopes.windows(2).all(|w| w[1] > w[0]));
        for f in &fams {
            assert!(check_quantitative_twist(&CollarTwist(f), &grid()).passes);
        }
    }

    #[test]
    fn tangential_derivatives_stay_bounded() {
        let mut worst: f64 = 0.0;
        for eps in [0.2, 0.02, 0.002] {
            let f = build_family(e_model(), &CollarProfile::default(), eps, &grid()).unwrap();
            worst = worst.max(f.grad(0.0, &[1.0, 0.4])[1].abs());
        }
        assert!(worst < 1.0);
    }

    proptest! {
        #[test]
        fn phi_eps_is_monotone_and_close_to_phi(eps in 0.005f64..0.5, a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let s = SmoothedReparam::new(CollarProfile::default(), eps).unwrap();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assume!(hi - lo > 1e-9);
            prop_assert!(s.phi(lo).unwrap() < s.phi(hi).unwrap());
            prop_assert!(s.g(lo).unwrap() >= s.g(hi).unwrap() - 1e-12);
            // |φ_ε − φ| ≤ φ(ε) everywhere
            prop_assert!((s.phi(lo).unwrap() - solve_phi(&s.profile, lo).unwrap()).abs() <= eps.sqrt() + 1e-12);
        }
    }
}

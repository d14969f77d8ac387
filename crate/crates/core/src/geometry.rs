//! Degenerate and non-degenerate Liouville collars.
//!
//! Collar points use the distance-from-boundary coordinate `s ∈ [0, 1]` with the
//! boundary `B = {s = 0}`; on the degenerate side `λ = A(s)·α`. The square-root
//! map `Q(s, b) = (φ(s), b)` solves `A(φ(s)) = 1 − s` and turns the collar into
//! one where `λ_Q = (1 − s)·α`. The Liouville coordinate is `r = 1 − s`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::interp::MonotoneCubic;

const BISECTION_MAX_ITER: usize = 200;
const BISECTION_TOL: f64 = 1e-12;
const PROFILE_CHECK_SAMPLES: usize = 256;

/// The degeneracy profile `A` of `λ = A(s)·α` on the boundary collar.
#[derive(Debug, Clone, PartialEq)]
pub enum CollarProfile {
    /// `A(s) = 1 − s^k`, `k ≥ 2`.
    Polynomial { exponent: u32 },
    /// `A(s) = cos(πs/2)`; quadratic degeneracy, `A(1) = 0`.
    Cosine,
    /// Monotone cubic interpolation of `(s, A(s))` samples, clamped to `A'(0) = 0`.
    Table(MonotoneCubic),
}

/// Config-file representation of a profile.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProfileSpec {
    Polynomial { exponent: u32 },
    Cosine,
    Table { samples: Vec<(f64, f64)> },
}

impl Default for ProfileSpec {
    fn default() -> Self {
        ProfileSpec::Polynomial { exponent: 2 }
    }
}

impl TryFrom<&ProfileSpec> for CollarProfile {
    type Error = Error;

    fn try_from(spec: &ProfileSpec) -> Result<Self> {
        match spec {
            ProfileSpec::Polynomial { exponent } => CollarProfile::polynomial(*exponent),
            ProfileSpec::Cosine => Ok(CollarProfile::Cosine),
            ProfileSpec::Table { samples } => CollarProfile::table(samples),
        }
    }
}

impl Default for CollarProfile {
    fn default() -> Self {
        CollarProfile::Polynomial { exponent: 2 }
    }
}

impl CollarProfile {
    pub fn polynomial(exponent: u32) -> Result<Self> {
        if exponent < 2 {
            return Err(Error::InvalidProfile(format!(
                "polynomial exponent must be >= 2, got {exponent}"
            )));
        }
        Ok(CollarProfile::Polynomial { exponent })
    }

    pub fn table(samples: &[(f64, f64)]) -> Result<Self> {
        let xs: Vec<f64> = samples.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = samples.iter().map(|p| p.1).collect();
        if xs.first() != Some(&0.0) {
            return Err(Error::InvalidProfile("table must start at s = 0".into()));
        }
        let profile = CollarProfile::Table(MonotoneCubic::new(xs, ys, Some(0.0))?);
        profile.validate()?;
        Ok(profile)
    }

    /// Largest collar coordinate on which the profile is defined.
    pub fn s_max(&self) -> f64 {
        match self {
            CollarProfile::Table(m) => m.domain().1.min(1.0),
            _ => 1.0,
        }
    }

    pub fn value(&self, s: f64) -> f64 {
        match self {
            CollarProfile::Polynomial { exponent } => 1.0 - s.powi(*exponent as i32),
            CollarProfile::Cosine => (PI * s / 2.0).cos(),
            CollarProfile::Table(m) => m.eval(s),
        }
    }

    /// `1 − A(s)`, evaluated without cancellation where a closed form exists.
    pub fn deficit(&self, s: f64) -> f64 {
        match self {
            CollarProfile::Polynomial { exponent } => s.powi(*exponent as i32),
            CollarProfile::Cosine => {
                let h = (PI * s / 4.0).sin();
                2.0 * h * h
            }
            CollarProfile::Table(m) => 1.0 - m.eval(s),
        }
    }

    pub fn derivative(&self, s: f64) -> f64 {
        match self {
            CollarProfile::Polynomial { exponent } => {
                let k = *exponent as i32;
                -(k as f64) * s.powi(k - 1)
            }
            CollarProfile::Cosine => -(PI / 2.0) * (PI * s / 2.0).sin(),
            CollarProfile::Table(m) => m.derivative(s),
        }
    }

    /// Checks `A(0) = 1`, `A'(0) = 0` and `A' < 0` on a uniform sample of `(0, s_max]`.
    pub fn validate(&self) -> Result<()> {
        if (self.value(0.0) - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidProfile(format!("A(0) = {} != 1", self.value(0.0))));
        }
        if self.derivative(0.0).abs() > 1e-12 {
            return Err(Error::InvalidProfile(format!("A'(0) = {} != 0", self.derivative(0.0))));
        }
        let s_max = self.s_max();
        let mut prev = self.value(0.0);
        for i in 1..=PROFILE_CHECK_SAMPLES {
            let s = s_max * i as f64 / PROFILE_CHECK_SAMPLES as f64;
            let v = self.value(s);
            if self.derivative(s) >= 0.0 || v >= prev {
                return Err(Error::NonMonotoneProfile {
                    lo: s_max * (i - 1) as f64 / PROFILE_CHECK_SAMPLES as f64,
                    hi: s,
                });
            }
            prev = v;
        }
        Ok(())
    }
}

/// A point `(s, b)` of the collar `[0, s_max] × B`.
#[derive(Debug, Clone, PartialEq)]
pub struct CollarPoint {
    pub s: f64,
    pub b: Vec<f64>,
}

impl CollarPoint {
    pub fn new(s: f64, b: Vec<f64>) -> Self {
        Self { s, b }
    }

    /// Liouville coordinate `r = 1 − s`.
    pub fn r(&self) -> f64 {
        1.0 - self.s
    }
}

/// Uniform grid `s_i = i/(n−1)·s_max` carrying a fixed boundary point.
pub fn collar_grid(profile: &CollarProfile, resolution: usize, b: &[f64]) -> Vec<CollarPoint> {
    let n = resolution.max(2);
    let s_max = profile.s_max();
    (0..n)
        .map(|i| CollarPoint::new(s_max * i as f64 / (n - 1) as f64, b.to_vec()))
        .collect()
}

/// `φ(s) = A⁻¹(1 − s)` by monotone bisection on `1 − A(x) = s`.
pub fn solve_phi(profile: &CollarProfile, s: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&s) || s.is_nan() {
        return Err(Error::OutOfCollar(s));
    }
    if s == 0.0 {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    let mut hi = profile.s_max();
    let (d_lo, d_hi) = (profile.deficit(lo), profile.deficit(hi));
    if d_hi < d_lo {
        return Err(Error::NonMonotoneProfile { lo, hi });
    }
    if s >= d_hi {
        // A does not reach 1 − s inside the chart: domain-capped.
        return Ok(hi);
    }
    for _ in 0..BISECTION_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let d_mid = profile.deficit(mid);
        if d_mid < s {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if hi - lo > BISECTION_TOL {
        return Err(Error::NoConvergence { what: "solve_phi bisection", iterations: BISECTION_MAX_ITER });
    }
    // lo/hi bracket the root; a non-monotone profile shows up as an inverted bracket value
    if profile.deficit(lo) > profile.deficit(hi) {
        return Err(Error::NonMonotoneProfile { lo, hi });
    }
    Ok(0.5 * (lo + hi))
}

/// `φ′(s) = −1/A′(φ(s))`, infinite at `s = 0`.
pub fn phi_derivative(profile: &CollarProfile, s: f64) -> Result<f64> {
    let phi = solve_phi(profile, s)?;
    Ok(-1.0 / profile.derivative(phi))
}

/// Square-root map `Q(s, b) = (φ(s), b)` (degenerate ← non-degenerate).
pub fn nondegeneration_map(profile: &CollarProfile, p: &CollarPoint) -> Result<CollarPoint> {
    Ok(CollarPoint::new(solve_phi(profile, p.s)?, p.b.clone()))
}

/// Squaring map `S = Q⁻¹`, `S(s, b) = (1 − A(s), b)`.
pub fn degeneration_map(profile: &CollarProfile, p: &CollarPoint) -> Result<CollarPoint> {
    if !(0.0..=1.0).contains(&p.s) || p.s > profile.s_max() {
        return Err(Error::OutOfCollar(p.s));
    }
    Ok(CollarPoint::new(profile.deficit(p.s), p.b.clone()))
}

/// `F(r) = 1 − φ(1 − r)`: the square-root map in the Liouville coordinate.
pub fn liouville_reparam(profile: &CollarProfile, r: f64) -> Result<f64> {
    Ok(1.0 - solve_phi(profile, 1.0 - r)?)
}

/// `F′(r) = φ′(1 − r)`; has a pole at `r = 1`.
pub fn liouville_reparam_derivative(profile: &CollarProfile, r: f64) -> Result<f64> {
    phi_derivative(profile, 1.0 - r)
}

/// Residual report of `Q*λ = (1 − s)α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FormResidual {
    pub max_residual: f64,
    pub points: usize,
}

/// Verifies `A(φ(s)) = 1 − s` on the grid, i.e. `Q*λ = (1 − s)·α`.
pub fn pullback_form_check(profile: &CollarProfile, grid: &[CollarPoint]) -> Result<FormResidual> {
    let mut max_residual: f64 = 0.0;
    for p in grid {
        let phi = solve_phi(profile, p.s)?;
        max_residual = max_residual.max((profile.deficit(phi) - p.s).abs());
    }
    Ok(FormResidual { max_residual, points: grid.len() })
}

/// Standard contact chart on `B = S¹_q × ℝ^{2n−2}`, coordinates `b = (q, x_1, y_1, …)`,
/// with `α = dq + ½ Σ (x_i dy_i − y_i dx_i)` and Reeb field `∂_q`.
///
/// `n` is half the dimension of the symplectic collar; `n = 1` gives `B = S¹`, `α = dq`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContactChart {
    pub n: usize,
}

impl ContactChart {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        Self { n }
    }

    /// Dimension of `B`.
    pub fn dim(&self) -> usize {
        2 * self.n - 1
    }

    /// Number of `(x, y)` pairs spanning `ξ`.
    pub fn pairs(&self) -> usize {
        self.n - 1
    }

    /// Components of `α` at `b` in the coordinate coframe.
    pub fn alpha(&self, b: &[f64]) -> Vec<f64> {
        let mut a = vec![0.0; self.dim()];
        a[0] = 1.0;
        for i in 0..self.pairs() {
            let (x, y) = (b[1 + 2 * i], b[2 + 2 * i]);
            a[1 + 2 * i] = -0.5 * y;
            a[2 + 2 * i] = 0.5 * x;
        }
        a
    }

    /// Frame `(e_{x_i}, e_{y_i})` of `ξ` at `b`, with `dα(e_x, e_y) = 1`.
    pub fn xi_frame(&self, b: &[f64]) -> Vec<Vec<f64>> {
        let mut frame = Vec::with_capacity(2 * self.pairs());
        for i in 0..self.pairs() {
            let (x, y) = (b[1 + 2 * i], b[2 + 2 * i]);
            let mut ex = vec![0.0; self.dim()];
            ex[0] = 0.5 * y;
            ex[1 + 2 * i] = 1.0;
            let mut ey = vec![0.0; self.dim()];
            ey[0] = -0.5 * x;
            ey[2 + 2 * i] = 1.0;
            frame.push(ex);
            frame.push(ey);
        }
        frame
    }

    /// Darboux coordinates `(X_1, Y_1, …, r, q)` of the collar point `(r, b)` with
    /// `X = √r·x`, `Y = √r·y`, in which `d(rα) = Σ dX∧dY + dr∧dq`.
    pub fn to_darboux(&self, r: f64, b: &[f64]) -> Vec<f64> {
        let sr = r.sqrt();
        let mut z = Vec::with_capacity(2 * self.n);
        for i in 0..self.pairs() {
            z.push(sr * b[1 + 2 * i]);
            z.push(sr * b[2 + 2 * i]);
        }
        z.push(r);
        z.push(b[0]);
        z
    }

    /// Inverse of [`ContactChart::to_darboux`].
    pub fn from_darboux(&self, z: &[f64]) -> (f64, Vec<f64>) {
        let r = z[2 * self.n - 2];
        let sr = r.sqrt();
        let mut b = vec![z[2 * self.n - 1]];
        for i in 0..self.pairs() {
            b.push(z[2 * i] / sr);
            b.push(z[2 * i + 1] / sr);
        }
        (r, b)
    }
}

/// A (possibly degenerate) Liouville domain described by its boundary chart.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainDescriptor {
    /// Real dimension `2n`.
    pub dimension: usize,
    pub boundary_chart: String,
    /// Present iff the domain is degenerate.
    pub profile: Option<CollarProfile>,
    pub contact: ContactChart,
}

impl DomainDescriptor {
    pub fn new(contact: ContactChart, boundary_chart: impl Into<String>, profile: Option<CollarProfile>) -> Result<Self> {
        if let Some(p) = &profile {
            p.validate()?;
        }
        Ok(Self { dimension: 2 * contact.n, boundary_chart: boundary_chart.into(), profile, contact })
    }

    pub fn is_degenerate(&self) -> bool {
        self.profile.is_some()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cubic() -> CollarProfile {
        CollarProfile::polynomial(3).unwrap()
    }

    #[test]
    fn phi_of_model_profile_is_square_root() {
        let p = CollarProfile::default();
        assert!((solve_phi(&p, 0.25).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(solve_phi(&p, 0.0).unwrap(), 0.0);
        assert_eq!(solve_phi(&cubic(), 0.0).unwrap(), 0.0);
    }

    #[test]
    fn phi_of_cubic_profile_matches_inversion_oracle() {
        // Oracle: plain bisection on A(x) = 1 − s, independent of the deficit path.
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if 1.0 - mid.powi(3) > 1.0 - 0.125 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((lo - 0.5).abs() < 1e-12);
        assert!((solve_phi(&cubic(), 0.125).unwrap() - lo).abs() < 1e-12);
    }

    #[test]
    fn maps_on_points() {
        let p = CollarProfile::default();
        let b = vec![0.3];
        let q = nondegeneration_map(&p, &CollarPoint::new(0.09, b.clone())).unwrap();
        assert!((q.s - 0.3).abs() < 1e-12 && q.b == b);
        let z = nondegeneration_map(&p, &CollarPoint::new(0.0, b.clone())).unwrap();
        assert_eq!(z.s, 0.0);
        let s = degeneration_map(&p, &CollarPoint::new(0.3, b.clone())).unwrap();
        assert!((s.s - 0.09).abs() < 1e-15);
        assert_eq!(degeneration_map(&p, &CollarPoint::new(0.0, b.clone())).unwrap().s, 0.0);
        let c = degeneration_map(&cubic(), &CollarPoint::new(0.5, b.clone())).unwrap();
        assert!((c.s - 0.125).abs() < 1e-15);
        let n = nondegeneration_map(&cubic(), &CollarPoint::new(0.125, b)).unwrap();
        assert!((n.s - 0.5).abs() < 1e-12);
    }

    #[test]
    fn out_of_collar_is_rejected() {
        let p = CollarProfile::default();
        assert_eq!(
            degeneration_map(&p, &CollarPoint::new(1.5, vec![])),
            Err(Error::OutOfCollar(1.5))
        );
        assert!(solve_phi(&p, -0.1).is_err());
    }

    #[test]
    fn invalid_profiles_are_rejected() {
        assert!(CollarProfile::polynomial(1).is_err());
        // increasing somewhere
        assert!(matches!(
            CollarProfile::table(&[(0.0, 1.0), (0.5, 0.5), (0.7, 0.6), (1.0, 0.0)]),
            Err(Error::NonMonotoneProfile { .. })
        ));
        assert!(CollarProfile::table(&[(0.0, 1.0), (0.5, 0.7), (1.0, 0.0)]).is_ok());
        assert!(CollarProfile::Cosine.validate().is_ok());
    }

    #[test]
    fn form_check_on_grids() {
        for p in [CollarProfile::default(), cubic(), CollarProfile::Cosine] {
            let grid = collar_grid(&p, 100, &[0.0]);
            assert!(pullback_form_check(&p, &grid).unwrap().max_residual <= 1e-10);
        }
        let grid = vec![CollarPoint::new(0.0, vec![0.0])];
        assert_eq!(pullback_form_check(&cubic(), &grid).unwrap().max_residual, 0.0);
    }

    #[test]
    fn table_profile_round_trips() {
        let samples: Vec<(f64, f64)> = (0..=20)
            .map(|i| {
                let s = i as f64 / 20.0;
                (s, 1.0 - s * s)
            })
            .collect();
        let p = CollarProfile::table(&samples).unwrap();
        for i in 0..50 {
            let s = i as f64 / 50.0;
            let phi = solve_phi(&p, s).unwrap();
            assert!((p.deficit(phi) - s).abs() < 1e-12);
        }
    }

    #[test]
    fn phi_derivative_matches_finite_differences() {
        for p in [CollarProfile::default(), cubic(), CollarProfile::Cosine] {
            for i in 1..20 {
                let s = i as f64 / 20.0;
                let h = 1e-6;
                let fd = (solve_phi(&p, s + h).unwrap() - solve_phi(&p, s - h).unwrap()) / (2.0 * h);
                let phi = solve_phi(&p, s).unwrap();
                // φ′(s)·A′(φ(s)) = −1
                assert!((fd * p.derivative(phi) + 1.0).abs() < 1e-8, "s={s}");
            }
        }
    }

    #[test]
    fn profile_spec_parses() {
        let s: ProfileSpec = serde_json::from_str(r#"{"kind": "polynomial", "exponent": 3}"#).unwrap();
        assert_eq!(CollarProfile::try_from(&s).unwrap(), cubic());
        let t: ProfileSpec =
            serde_json::from_str(r#"{"kind": "table", "samples": [[0, 1], [0.5, 0.75], [1, 0]]}"#).unwrap();
        assert!(CollarProfile::try_from(&t).is_ok());
    }

    #[test]
    fn darboux_chart_round_trips() {
        let c = ContactChart::new(3);
        let b = vec![0.4, 0.1, -0.2, 0.3, 0.7];
        let z = c.to_darboux(1.3, &b);
        let (r, b2) = c.from_darboux(&z);
        assert!((r - 1.3).abs() < 1e-15);
        for (u, v) in b.iter().zip(&b2) {
            assert!((u - v).abs() < 1e-14);
        }
        let a = c.alpha(&b);
        for e in c.xi_frame(&b) {
            let v: f64 = a.iter().zip(&e).map(|(x, y)| x * y).sum();
            assert!(v.abs() < 1e-15);
        }
    }

    proptest! {
        #[test]
        fn round_trip_is_identity(s in 0.0f64..1.0, k in 2u32..6) {
            let p = CollarProfile::polynomial(k).unwrap();
            let x = CollarPoint::new(s, vec![0.1]);
            let back = degeneration_map(&p, &nondegeneration_map(&p, &x).unwrap()).unwrap();
            prop_assert!((back.s - s).abs() <= 1e-10);
        }

        #[test]
        fn phi_is_increasing(a in 0.0f64..1.0, b in 0.0f64..1.0) {
            prop_assume!((a - b).abs() > 1e-9);
            let p = CollarProfile::Cosine;
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(solve_phi(&p, lo).unwrap() < solve_phi(&p, hi).unwrap());
        }
    }
}

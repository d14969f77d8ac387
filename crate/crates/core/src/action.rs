//! Action of collar trajectories and the linear action-growth bound `A ≤ −c·T + d`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::extension::{ExtendedHamiltonian, ExtensionParams};
use crate::hamflow::{
    check_quantitative_twist, integrate_flow, BoundaryGrid, CollarTwist, DenseStep, HamiltonianModel, Trajectory,
};
use crate::linalg::{fit_line, halton};

pub(crate) const GL5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];
const GL3: [(f64, f64); 3] = [
    (0.0, 0.888_888_888_888_888_9),
    (-0.774_596_669_241_483_4, 0.555_555_555_555_555_6),
    (0.774_596_669_241_483_4, 0.555_555_555_555_555_6),
];
const QUAD_TOL: f64 = 1e-8;
const MAX_DEPTH: u32 = 10;

/// Default zone threshold on `ρ`.
pub const DEFAULT_ETA: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ActionReport {
    pub action: f64,
    /// `∫ x*λ̂ = ∫ r·α(ẋ) dt`.
    pub lambda_term: f64,
    /// `∫ Ĥ(t, x) dt`.
    pub hamiltonian_term: f64,
    /// Time spent in zones 1, 2, 3.
    pub zone_histogram: [f64; 3],
    pub quadrature_error: f64,
}

/// Zone of `r` by the value of the cutoff: 1 where `ρ ≥ 1−η`, 3 where `ρ ≤ η`.
pub fn zone_classify(params: &ExtensionParams, r: f64, eta: f64) -> u8 {
    let rho = params.rho(r);
    if rho >= 1.0 - eta {
        1
    } else if rho <= eta {
        3
    } else {
        2
    }
}

struct Integrand<'a, H: ?Sized> {
    h: &'a H,
    params: Option<&'a ExtensionParams>,
    t0: f64,
    eta: f64,
}

impl<H: HamiltonianModel + ?Sized> Integrand<'_, H> {
    /// `(r·α(X), Ĥ)` at relative time `t`.
    fn eval(&self, t: f64, x: &[f64]) -> (f64, f64) {
        let ta = self.t0 + t;
        (x[0] * self.h.grad_r(ta, x), self.h.eval(ta, x))
    }

    fn rule(&self, step: &DenseStep, a: f64, b: f64, nodes: &[(f64, f64)], hist: Option<&mut [f64; 3]>) -> (f64, f64) {
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        let (mut l, mut hh) = (0.0, 0.0);
        let mut hist = hist;
        for (z, w) in nodes {
            let t = mid + half * z;
            let x = step.eval(t);
            let (lv, hv) = self.eval(t, &x);
            l += w * half * lv;
            hh += w * half * hv;
            if let (Some(hs), Some(p)) = (hist.as_deref_mut(), self.params) {
                hs[(zone_classify(p, x[0], self.eta) - 1) as usize] += w * half;
            }
        }
        (l, hh)
    }

    fn adaptive(&self, step: &DenseStep, a: f64, b: f64, depth: u32, hist: &mut [f64; 3]) -> (f64, f64, f64) {
        let mut local = [0.0; 3];
        let (l5, h5) = self.rule(step, a, b, &GL5, Some(&mut local));
        let (l3, h3) = self.rule(step, a, b, &GL3, None);
        let err = (l5 - l3).abs() + (h5 - h3).abs();
        let budget = QUAD_TOL * 1e-3 * (b - a).max(1e-12);
        if err <= budget || depth >= MAX_DEPTH {
            for k in 0..3 {
                hist[k] += local[k];
            }
            return (l5, h5, err);
        }
        let m = 0.5 * (a + b);
        let (la, ha, ea) = self.adaptive(step, a, m, depth + 1, hist);
        let (lb, hb, eb) = self.adaptive(step, m, b, depth + 1, hist);
        (la + lb, ha + hb, ea + eb)
    }
}

/// Action `−∫x*λ̂ + ∫Ĥ dt` of a trajectory, with `λ̂(ẋ) = r·α(X_Ĥ) = r·∂_rĤ`.
///
/// Gauss–Legendre quadrature runs on the integrator's continuous extension and
/// is refined until the 5- and 3-point rules agree; the zone histogram is only
/// filled when `params` is given.
pub fn compute_action<H: HamiltonianModel + ?Sized>(
    h: &H,
    params: Option<&ExtensionParams>,
    traj: &Trajectory,
) -> Result<ActionReport> {
    let ig = Integrand { h, params, t0: traj.t0, eta: DEFAULT_ETA };
    let (mut lam, mut ham, mut err) = (0.0, 0.0, 0.0);
    let mut hist = [0.0; 3];
    for step in &traj.dense {
        let (l, hh, e) = ig.adaptive(step, step.t, step.t + step.h, 0, &mut hist);
        lam += l;
        ham += hh;
        err += e;
    }
    if err > QUAD_TOL || !lam.is_finite() || !ham.is_finite() {
        return Err(Error::QuadratureFailure(err));
    }
    Ok(ActionReport { action: -lam + ham, lambda_term: lam, hamiltonian_term: ham, zone_histogram: hist, quadrature_error: err })
}

/// The constants of the three-zone estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZoneConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c: f64,
    /// `ε̃ = min ρ` on zone 2.
    pub eps_tilde: f64,
    /// `δ̃ = min(−ρ′)` on zone 2.
    pub delta_tilde: f64,
    pub c2_prime: f64,
    pub c2_double_prime: f64,
}

/// `c1 = min(H1 − H0)`, `c3 = C1 − C0`, `c2 = c2′ + c2″ + c3`, `c = min(c1, c2, c3)`.
pub fn zone_constants<H: HamiltonianModel>(ext: &ExtendedHamiltonian<H>, grid: &BoundaryGrid, eta: f64) -> Result<ZoneConstants> {
    let rep = check_quantitative_twist(&CollarTwist(&ext.base), grid);
    if !rep.passes {
        return Err(Error::QuantitativeTwistFails(rep.margin));
    }
    let p = &ext.params;
    let st = &ext.stats;
    let (mut eps_tilde, mut delta_tilde) = (f64::INFINITY, f64::INFINITY);
    let n = 20_000;
    for i in 0..=n {
        let r = 1.0 + p.delta1 * i as f64 / n as f64;
        if zone_classify(p, r, eta) == 2 {
            eps_tilde = eps_tilde.min(p.rho(r));
            delta_tilde = delta_tilde.min(-p.rho_derivative(r));
        }
    }
    let c1 = st.min_gap;
    let c3 = p.c1 - p.c0;
    let c2_prime = eps_tilde * (st.min_gap - c3);
    let c2_double_prime = delta_tilde * (p.c0 - st.max_h0);
    let c2 = c2_prime + c2_double_prime + c3;
    Ok(ZoneConstants { c1, c2, c3, c: c1.min(c2).min(c3), eps_tilde, delta_tilde, c2_prime, c2_double_prime })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthSettings {
    pub samples: usize,
    pub t_min: f64,
    pub t_max: f64,
    /// Arcs with `T ≤ 1` used to estimate `d`.
    pub short_samples: usize,
    pub tol: f64,
    pub eta: f64,
}

impl Default for GrowthSettings {
    fn default() -> Self {
        Self { samples: 100, t_min: 1.0, t_max: 50.0, short_samples: 50, tol: 1e-10, eta: DEFAULT_ETA }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthSample {
    pub t_len: f64,
    pub r0: f64,
    pub action: f64,
    pub bound: f64,
    pub zone_histogram: [f64; 3],
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthReport {
    pub constants: ZoneConstants,
    pub d: f64,
    pub slope_fit: f64,
    pub intercept_fit: f64,
    pub samples: Vec<GrowthSample>,
    pub escaped: usize,
    pub passes: bool,
}

/// Quasi-random collar point `(r, b)` with `r ∈ [1, 1+δ1]`.
fn collar_seed(ext_n: usize, delta1: f64, i: usize) -> Vec<f64> {
    const PRIMES: [usize; 8] = [2, 3, 5, 7, 11, 13, 17, 19];
    let mut x = Vec::with_capacity(2 * ext_n);
    x.push(1.0 + delta1 * halton(i + 1, PRIMES[0]));
    x.push(std::f64::consts::TAU * halton(i + 1, PRIMES[1]));
    for k in 0..2 * (ext_n - 1) {
        x.push(halton(i + 1, PRIMES[(2 + k) % PRIMES.len()]) - 0.5);
    }
    x
}

fn run_sample<H: HamiltonianModel>(ext: &ExtendedHamiltonian<H>, x0: &[f64], t_len: f64, tol: f64) -> Result<(ActionReport, f64)> {
    let traj = integrate_flow(ext, x0, t_len, tol)?;
    let r_min = traj.points.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
    if r_min < 1.0 {
        return Err(Error::SampleEscaped(r_min));
    }
    Ok((compute_action(ext, Some(&ext.params), &traj)?, r_min))
}

/// Checks `A ≤ −c·T + d` on a batch of collar trajectories.
///
/// `d` is fixed first as the largest `A + c·T` over short arcs (`T ∈ [0, 1]`);
/// the long batch with `T ∈ [t_min, t_max]` is then held to the bound.
pub fn verify_action_growth<H: HamiltonianModel>(
    ext: &ExtendedHamiltonian<H>,
    grid: &BoundaryGrid,
    cfg: &GrowthSettings,
) -> Result<GrowthReport> {
    let zc = zone_constants(ext, grid, cfg.eta)?;
    if !(zc.c > 0.0) {
        return Err(Error::BadConstants(format!("degenerate zone constants, c = {}", zc.c)));
    }
    let n = ext.chart().n;
    let delta1 = ext.params.delta1;

    let short: Vec<Result<(f64, ActionReport)>> = (0..cfg.short_samples)
        .into_par_iter()
        .map(|i| {
            let t_len = (i + 1) as f64 / cfg.short_samples as f64;
            let x0 = collar_seed(n, delta1, 10_000 + i);
            run_sample(ext, &x0, t_len, cfg.tol).map(|(a, _)| (t_len, a))
        })
        .collect();
    // T = 0 gives A = 0, so d ≥ 0
    let mut d: f64 = 0.0;
    let mut escaped = 0;
    for s in short {
        match s {
            Ok((t_len, a)) => d = d.max(a.action + zc.c * t_len),
            Err(Error::SampleEscaped(r)) => {
                log::info!("short arc escaped the collar (r = {r})");
                escaped += 1;
            }
            Err(e) => return Err(e),
        }
    }

    let long: Vec<Result<GrowthSample>> = (0..cfg.samples)
        .into_par_iter()
        .map(|i| {
            let t_len = if cfg.samples > 1 {
                cfg.t_min + (cfg.t_max - cfg.t_min) * i as f64 / (cfg.samples - 1) as f64
            } else {
                cfg.t_max
            };
            let x0 = collar_seed(n, delta1, i);
            let (a, _) = run_sample(ext, &x0, t_len, cfg.tol)?;
            let bound = -zc.c * t_len + d;
            Ok(GrowthSample {
                t_len,
                r0: x0[0],
                action: a.action,
                bound,
                zone_histogram: a.zone_histogram,
                ok: a.action <= bound + 1e-6,
            })
        })
        .collect();
    let mut samples = Vec::with_capacity(cfg.samples);
    for s in long {
        match s {
            Ok(g) => samples.push(g),
            Err(Error::SampleEscaped(r)) => {
                log::info!("collar sample escaped to r = {r}; excluded");
                escaped += 1;
            }
            Err(e) => return Err(e),
        }
    }
    let ts: Vec<f64> = samples.iter().map(|s| s.t_len).collect();
    let actions: Vec<f64> = samples.iter().map(|s| s.action).collect();
    let (slope_fit, intercept_fit) = if samples.len() >= 2 { fit_line(&ts, &actions) } else { (f64::NAN, f64::NAN) };
    let passes = !samples.is_empty() && samples.iter().all(|s| s.ok) && slope_fit <= -zc.c + 1e-3;
    Ok(GrowthReport { constants: zc, d, slope_fit, intercept_fit, samples, escaped, passes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extension::build_extension;
    use crate::geometry::ContactChart;
    use crate::hamflow::FnHamiltonian;

    fn chart() -> ContactChart {
        ContactChart::new(1)
    }

    fn grid() -> BoundaryGrid {
        BoundaryGrid::circle(&chart(), 16, 2)
    }

    fn ext(h1: f64, c0: f64, c1: f64) -> ExtendedHamiltonian<FnHamiltonian> {
        let h = FnHamiltonian::new(chart(), move |_t, x| h1 * (x[0] - 1.0) + 1.0).autonomous();
        let mut p = ExtensionParams::new(c0, c1);
        p.quantitative = true;
        build_extension(h, p, &grid()).unwrap()
    }

    #[test]
    fn critical_point_action_is_energy_times_time() {
        let h = FnHamiltonian::new(chart(), |_t, x| 0.7 + (x[0] - 0.5).powi(2) + 0.1 * x[1].sin().powi(2)).autonomous();
        let traj = integrate_flow(&h, &[0.5, 0.0], 4.0, 1e-10).unwrap();
        let a = compute_action(&h, None, &traj).unwrap();
        assert!((a.action - 2.8).abs() < 1e-10);
        assert!(a.lambda_term.abs() < 1e-10);
        assert!((a.action - (-a.lambda_term + a.hamiltonian_term)).abs() < 1e-15);
    }

    #[test]
    fn zone_three_closed_orbit() {
        let e = ext(10.0, 6.5, 11.0);
        // a closed orbit of the linear region has period 2π/C1
        let t_len = 2.0 * std::f64::consts::PI / 11.0 * 3.0;
        let traj = integrate_flow(&e, &[1.5, 0.2], t_len, 1e-10).unwrap();
        let a = compute_action(&e, Some(&e.params), &traj).unwrap();
        assert!((a.action - (6.5 - 11.0) * t_len).abs() < 1e-8);
        assert!((a.zone_histogram[2] - t_len).abs() < 1e-12);
    }

    #[test]
    fn reeb_orbit_of_linear_hamiltonian() {
        // H = a·r: A = ∫(a r − r a) = 0
        let h = FnHamiltonian::new(chart(), |_t, x| 2.5 * x[0]).autonomous();
        let traj = integrate_flow(&h, &[0.8, 0.0], 3.0, 1e-10).unwrap();
        assert!(compute_action(&h, None, &traj).unwrap().action.abs() < 1e-8);
    }

    #[test]
    fn zones_by_cutoff_value() {
        let p = ExtensionParams::new(2.0, 3.0).with_deltas(0.05, 0.1);
        assert_eq!(zone_classify(&p, 1.0, DEFAULT_ETA), 1);
        assert_eq!(zone_classify(&p, 1.1, DEFAULT_ETA), 3);
        assert_eq!(zone_classify(&p, 1.075, DEFAULT_ETA), 2);
    }

    #[test]
    fn zone_constants_formula() {
        let zc = zone_constants(&ext(10.0, 6.5, 11.0), &grid(), DEFAULT_ETA).unwrap();
        assert!((zc.c1 - 9.0).abs() < 1e-8);
        assert!((zc.c3 - 4.5).abs() < 1e-12);
        assert!(zc.c2 >= zc.c3 && zc.c == zc.c3);
        assert!((zc.eps_tilde - DEFAULT_ETA).abs() < 1e-4);
        // c1 and c2 grow with H1
        let bigger = zone_constants(&ext(10.5, 6.5, 11.0), &grid(), DEFAULT_ETA).unwrap();
        assert!(bigger.c1 > zc.c1 && bigger.c2 > zc.c2);
    }

    #[test]
    fn equal_constants_are_refused() {
        let h = FnHamiltonian::new(chart(), |_t, x| 10.0 * (x[0] - 1.0) + 1.0).autonomous();
        let p = ExtensionParams::new(10.0, 10.0);
        let e = build_extension(h, p, &grid()).unwrap();
        let zc = zone_constants(&e, &grid(), DEFAULT_ETA).unwrap();
        assert_eq!(zc.c3, 0.0);
        let cfg = GrowthSettings { samples: 2, short_samples: 2, ..Default::default() };
        assert!(matches!(verify_action_growth(&e, &grid(), &cfg), Err(Error::BadConstants(_))));
    }

    #[test]
    fn zone_one_integrand_is_below_minus_c1() {
        let e = ext(10.0, 6.5, 11.0);
        let zc = zone_constants(&e, &grid(), DEFAULT_ETA).unwrap();
        for (t, b) in &grid().points {
            let mut x = vec![1.0];
            x.extend_from_slice(b);
            let h0 = e.eval(*t, &x);
            let h1 = e.grad_r(*t, &x);
            assert!(h0 - h1 <= -zc.c1 + 1e-8);
        }
    }

    #[test]
    fn action_is_additive_under_concatenation() {
        let h = FnHamiltonian::new(chart(), |t, x| {
            x[0] * x[0] + 0.2 * x[1].cos() * (std::f64::consts::TAU * t).sin()
        });
        let whole = integrate_flow(&h, &[0.9, 0.3], 2.0, 1e-11).unwrap();
        let first = integrate_flow(&h, &[0.9, 0.3], 0.8, 1e-11).unwrap();
        let opts = crate::hamflow::OdeOptions::with_tol(1e-11);
        let second = crate::hamflow::integrate_flow_from(&h, first.end(), 0.8, 1.2, &opts).unwrap();
        let a = |tr: &Trajectory| compute_action(&h, None, tr).unwrap().action;
        assert!((a(&whole) - a(&first) - a(&second)).abs() < 1e-7);
    }

    #[test]
    fn larger_slope_lowers_action() {
        let lo = ext(10.0, 6.5, 11.0);
        let hi = ext(10.0, 6.5, 12.0);
        for r in [1.02, 1.06, 1.09, 1.3] {
            let a = |e: &ExtendedHamiltonian<FnHamiltonian>| {
                let tr = integrate_flow(e, &[r, 0.0], 2.0, 1e-10).unwrap();
                compute_action(e, Some(&e.params), &tr).unwrap().action
            };
            // C1 only enters where ρ < 1
            if lo.params.rho(r) < 1.0 {
                assert!(a(&hi) < a(&lo));
            } else {
                assert!(a(&hi) <= a(&lo) + 1e-9);
            }
        }
    }

    #[test]
    fn growth_on_linear_twist() {
        let e = ext(10.0, 6.5, 11.0);
        let cfg = GrowthSettings { samples: 12, short_samples: 8, t_max: 10.0, ..Default::default() };
        let rep = verify_action_growth(&e, &grid(), &cfg).unwrap();
        assert!(rep.passes, "{rep:?}");
        assert!(rep.d >= 0.0);
    }
}

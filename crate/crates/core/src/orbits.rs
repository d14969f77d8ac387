//! Periodic points, the prime-iterate survey and Lagrangian chords.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::divisors;
use crate::models::{distance, ReturnMap};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrbitSettings {
    /// Integration tolerance for map evaluations.
    pub tol: f64,
    /// Newton stops once `|f^k(x) − x|` is below this.
    pub newton_tol: f64,
    pub max_iter: usize,
    pub fd_step: f64,
    /// Points closer than this are merged.
    pub dedupe: f64,
    /// `σ_min(Df^k − I)` below this flags a degenerate family.
    pub family_cutoff: f64,
}

impl Default for OrbitSettings {
    fn default() -> Self {
        Self { tol: 1e-12, newton_tol: 1e-10, max_iter: 40, fd_step: 1e-6, dedupe: 1e-6, family_cutoff: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrbitRecord {
    pub point: Vec<f64>,
    pub period: usize,
    pub residual: f64,
    pub minimal: bool,
    /// Member of a continuous family (e.g. an invariant circle of periodic points).
    pub family: bool,
    /// Residual recomputed at a 10× tighter integration tolerance.
    pub reverified_residual: f64,
    pub action: Option<f64>,
    /// The other points of the orbit, `f^j(point)` for `0 < j < period`.
    pub orbit: Vec<Vec<f64>>,
}

impl OrbitRecord {
    pub fn reverified(&self) -> bool {
        self.reverified_residual <= 1e-8
    }
}

fn defect<M: ReturnMap + ?Sized>(m: &M, x: &[f64], k: usize, tol: f64) -> Result<DVector<f64>> {
    let y = m.iterate(x, k, tol)?;
    Ok(DVector::from_vec(m.difference(&y, x)))
}

fn fd_jacobian<M: ReturnMap + ?Sized>(m: &M, x: &[f64], k: usize, s: &OrbitSettings) -> Result<DMatrix<f64>> {
    let d = x.len();
    let mut j = DMatrix::zeros(m.dim(), d);
    let mut p = x.to_vec();
    for c in 0..d {
        let h = s.fd_step * x[c].abs().max(1.0);
        p[c] = x[c] + h;
        let fp = defect(m, &p, k, s.tol)?;
        p[c] = x[c] - h;
        let fm = defect(m, &p, k, s.tol)?;
        p[c] = x[c];
        j.set_column(c, &((fp - fm) / (2.0 * h)));
    }
    Ok(j)
}

/// Damped Newton on `f^k(x) − x` from `seed`, with the default settings and integration tolerance `tol`.
pub fn newton_periodic<M: ReturnMap + ?Sized>(m: &M, seed: &[f64], k: usize, tol: f64) -> Result<Vec<f64>> {
    let s = OrbitSettings { tol, ..OrbitSettings::default() };
    newton_with(m, seed, k, &s).map(|(x, _)| x)
}

/// Returns the converged point and `σ_min` of the last Jacobian.
fn newton_with<M: ReturnMap + ?Sized>(m: &M, seed: &[f64], k: usize, s: &OrbitSettings) -> Result<(Vec<f64>, f64)> {
    gauss_newton(m, seed, s, |x| defect(m, x, k, s.tol), |x, _| fd_jacobian(m, x, k, s))
}

/// Gauss–Newton with backtracking and SVD pseudo-inverse steps.
fn gauss_newton<M, F, J>(m: &M, seed: &[f64], s: &OrbitSettings, residual: F, jacobian: J) -> Result<(Vec<f64>, f64)>
where
    M: ReturnMap + ?Sized,
    F: Fn(&[f64]) -> Result<DVector<f64>>,
    J: Fn(&[f64], &DVector<f64>) -> Result<DMatrix<f64>>,
{
    let mut x = seed.to_vec();
    let mut f = residual(&x)?;
    for _ in 0..s.max_iter {
        let jac = jacobian(&x, &f)?;
        let square = jac.nrows() == jac.ncols();
        let svd = jac.svd(true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        if f.norm() <= s.newton_tol {
            return Ok((m.normalize(&x), smin));
        }
        if !(smax > 0.0) || (smin <= 1e-12 * smax.max(1.0) && square) {
            return Err(Error::JacobianSingular);
        }
        let step = svd.solve(&(-&f), 1e-12 * smax).map_err(|_| Error::JacobianSingular)?;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..12 {
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + lambda * b).collect();
            if m.is_interior(&trial) {
                if let Ok(ft) = residual(&trial) {
                    if ft.norm() < f.norm() {
                        x = trial;
                        f = ft;
                        accepted = true;
                        break;
                    }
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(Error::NoConvergence { what: "newton line search", iterations: s.max_iter });
        }
    }
    if f.norm() <= s.newton_tol {
        let jac = jacobian(&x, &f)?;
        return Ok((m.normalize(&x), jac.singular_values().min()));
    }
    Err(Error::NoConvergence { what: "newton", iterations: s.max_iter })
}

fn closes_up<M: ReturnMap + ?Sized>(m: &M, x: &[f64], d: usize, tol: f64, thresh: f64) -> bool {
    m.iterate(x, d, tol).map(|y| distance(m, &y, x) <= thresh).unwrap_or(false)
}

/// `k`-periodic points reached by Newton from `seeds`, grouped into orbits.
///
/// Seeds whose Newton iteration fails are discarded.
pub fn find_periodic_points<M: ReturnMap + ?Sized>(m: &M, k: usize, seeds: &[Vec<f64>], s: &OrbitSettings) -> Vec<OrbitRecord> {
    let k = k.max(1);
    let converged: Vec<(Vec<f64>, f64)> = seeds.par_iter().filter_map(|seed| newton_with(m, seed, k, s).ok()).filter(|(x, _)| m.is_interior(x)).collect();
    let mut records: Vec<OrbitRecord> = Vec::new();
    for (x, smin) in converged {
        let known = records.iter().any(|r| distance(m, &r.point, &x) <= s.dedupe || r.orbit.iter().any(|p| distance(m, p, &x) <= s.dedupe));
        if known {
            continue;
        }
        let Ok(residual) = defect(m, &x, k, s.tol).map(|v| v.norm()) else { continue };
        let reverified_residual = defect(m, &x, k, s.tol / 10.0).map(|v| v.norm()).unwrap_or(f64::INFINITY);
        let minimal = divisors(k).into_iter().filter(|d| *d < k).all(|d| !closes_up(m, &x, d, s.tol, s.dedupe));
        let mut orbit = Vec::new();
        let mut y = x.clone();
        for _ in 1..k {
            match m.apply(&y, s.tol) {
                Ok(z) => y = m.normalize(&z),
                Err(_) => break,
            }
            orbit.push(y.clone());
        }
        records.push(OrbitRecord {
            action: m.orbit_action(&x, k, s.tol),
            point: x,
            period: k,
            residual,
            minimal,
            family: smin <= s.family_cutoff,
            reverified_residual,
            orbit,
        });
    }
    records
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurveyRow {
    pub prime: usize,
    pub seeds: usize,
    pub orbits: usize,
    /// Isolated orbits of minimal period `prime`.
    pub new_minimal: usize,
    pub families: usize,
    pub all_reverified: bool,
    /// Orbits whose action exceeds the collar bound `−c·T + d`, when one is given.
    pub above_collar_bound: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurveyReport {
    pub rows: Vec<SurveyRow>,
    pub orbits: Vec<OrbitRecord>,
}

/// Periodic points of each prime period in turn.
///
/// Each prime must exceed every minimal period found so far.
pub fn prime_iterate_survey<M: ReturnMap + ?Sized>(
    m: &M,
    primes: &[usize],
    seeds: &[Vec<f64>],
    s: &OrbitSettings,
    collar_bound: Option<(f64, f64)>,
) -> Result<SurveyReport> {
    let mut rows = Vec::new();
    let mut all: Vec<OrbitRecord> = Vec::new();
    for &p in primes {
        let known_max = all.iter().filter(|o| o.minimal).map(|o| o.period).max().unwrap_or(0);
        if p <= known_max || divisors(p).len() != 2 {
            return Err(Error::Config(format!("survey periods must be increasing primes, got {p} after {known_max}")));
        }
        let found = find_periodic_points(m, p, seeds, s);
        let isolated: Vec<&OrbitRecord> = found.iter().filter(|o| o.minimal && !o.family).collect();
        let above = collar_bound.map(|(c, d)| found.iter().filter(|o| o.action.is_some_and(|a| a > -c * p as f64 + d)).count());
        rows.push(SurveyRow {
            prime: p,
            seeds: seeds.len(),
            orbits: found.len(),
            new_minimal: isolated.len(),
            families: found.iter().filter(|o| o.family).count(),
            all_reverified: found.iter().all(|o| o.reverified()),
            above_collar_bound: above,
        });
        all.extend(found);
    }
    Ok(SurveyReport { rows, orbits: all })
}

/// A union of coordinate slices `{x[coord] ≡ v mod period}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lagrangian {
    pub coord: usize,
    pub values: Vec<f64>,
    pub period: Option<f64>,
}

impl Lagrangian {
    /// The fibres `{q ≡ 0 mod π}` of the annulus.
    pub fn annulus_fibres() -> Self {
        Self { coord: 1, values: vec![0.0], period: Some(std::f64::consts::PI) }
    }

    /// Signed offset of `x` from the nearest slice.
    pub fn offset(&self, x: &[f64]) -> f64 {
        let v = x[self.coord];
        self.values
            .iter()
            .map(|c| match self.period {
                Some(p) => {
                    let d = (v - c).rem_euclid(p);
                    if d > 0.5 * p {
                        d - p
                    } else {
                        d
                    }
                }
                None => v - c,
            })
            .min_by(|a, b| a.abs().partial_cmp(&b.abs()).unwrap())
            .unwrap_or(f64::INFINITY)
    }

    fn project(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        y[self.coord] -= self.offset(x);
        y
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChordRecord {
    pub start: Vec<f64>,
    pub order: usize,
    pub residual: f64,
    pub reverified_residual: f64,
    /// Minimal period when the start point is periodic.
    pub period: Option<usize>,
    /// Orders of the consecutive sub-chords of a periodic chord.
    pub sub_chords: Vec<usize>,
}

/// Chords of order `order` starting on `l`, by Newton along `l`.
///
/// Periodicity is tested up to `max_period` iterations.
pub fn find_chords<M: ReturnMap + ?Sized>(m: &M, l: &Lagrangian, order: usize, seeds: &[Vec<f64>], max_period: usize, s: &OrbitSettings) -> Vec<ChordRecord> {
    let free: Vec<usize> = (0..m.dim()).filter(|c| *c != l.coord).collect();
    let embed = |base: &[f64], y: &[f64]| {
        let mut x = base.to_vec();
        for (c, v) in free.iter().zip(y) {
            x[*c] = *v;
        }
        x
    };
    let solve = |seed: &Vec<f64>| -> Option<Vec<f64>> {
        let base = l.project(seed);
        let y0: Vec<f64> = free.iter().map(|c| base[*c]).collect();
        let wrap = FreeCoords { m, base: &base, free: &free };
        let res = |y: &[f64]| -> Result<DVector<f64>> {
            let x = embed(&base, y);
            let z = m.iterate(&x, order, s.tol)?;
            Ok(DVector::from_element(1, l.offset(&z)))
        };
        let jac = |y: &[f64], _f: &DVector<f64>| -> Result<DMatrix<f64>> {
            let mut j = DMatrix::zeros(1, y.len());
            let mut p = y.to_vec();
            for c in 0..y.len() {
                let h = s.fd_step * y[c].abs().max(1.0);
                p[c] = y[c] + h;
                let fp = res(&p)?[0];
                p[c] = y[c] - h;
                let fm = res(&p)?[0];
                p[c] = y[c];
                j[(0, c)] = (fp - fm) / (2.0 * h);
            }
            Ok(j)
        };
        let (y, _) = gauss_newton(&wrap, &y0, s, res, jac).ok()?;
        Some(m.normalize(&embed(&base, &y)))
    };
    let starts: Vec<Vec<f64>> = seeds.par_iter().filter_map(solve).filter(|x| m.is_interior(x)).collect();
    let mut out: Vec<ChordRecord> = Vec::new();
    for x in starts {
        if out.iter().any(|c| distance(m, &c.start, &x) <= s.dedupe) {
            continue;
        }
        // minimal order: no earlier iterate lies on L
        let mut hits = Vec::new();
        let mut y = x.clone();
        let mut ok = true;
        for j in 1..=order.max(max_period) {
            match m.apply(&y, s.tol) {
                Ok(z) => y = m.normalize(&z),
                Err(_) => {
                    ok = false;
                    break;
                }
            }
            if l.offset(&y).abs() <= 1e-8 {
                hits.push(j);
            }
        }
        if !ok || hits.first() != Some(&order) {
            continue;
        }
        let Ok(end) = m.iterate(&x, order, s.tol) else { continue };
        let residual = l.offset(&end).abs();
        let reverified_residual = m.iterate(&x, order, s.tol / 10.0).map(|e| l.offset(&e).abs()).unwrap_or(f64::INFINITY);
        let period = (1..=max_period).find(|k| closes_up(m, &x, *k, s.tol, s.dedupe));
        let sub_chords = match period {
            Some(k) => {
                let mut prev = 0;
                let mut v = Vec::new();
                for h in hits.iter().filter(|h| **h <= k) {
                    v.push(h - prev);
                    prev = *h;
                }
                v
            }
            None => Vec::new(),
        };
        out.push(ChordRecord { start: x, order, residual, reverified_residual, period, sub_chords });
    }
    out
}

/// Restricts `is_interior`/`normalize` of a map to the free coordinates of a slice.
struct FreeCoords<'a, M: ?Sized> {
    m: &'a M,
    base: &'a [f64],
    free: &'a [usize],
}

impl<M: ReturnMap + ?Sized> FreeCoords<'_, M> {
    fn full(&self, y: &[f64]) -> Vec<f64> {
        let mut x = self.base.to_vec();
        for (c, v) in self.free.iter().zip(y) {
            x[*c] = *v;
        }
        x
    }
}

impl<M: ReturnMap + ?Sized> ReturnMap for FreeCoords<'_, M> {
    fn dim(&self) -> usize {
        self.free.len()
    }
    fn apply(&self, _x: &[f64], _tol: f64) -> Result<Vec<f64>> {
        Err(Error::Config("slice chart has no dynamics".into()))
    }
    fn difference(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        a.iter().zip(b).map(|(x, y)| x - y).collect()
    }
    fn normalize(&self, y: &[f64]) -> Vec<f64> {
        let x = self.m.normalize(&self.full(y));
        self.free.iter().map(|c| x[*c]).collect()
    }
    fn is_interior(&self, y: &[f64]) -> bool {
        self.m.is_interior(&self.full(y))
    }
    fn seeds(&self, _resolution: usize) -> Vec<Vec<f64>> {
        Vec::new()
    }
}

//! The individual checks behind the subcommands.
//!
//! Each check is a plain function of the config returning a [`Report`]; the
//! runner in the parent module adds timing, catches errors and writes files.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::ExperimentConfig;
use crate::action::{compute_action, verify_action_growth, GrowthSettings, DEFAULT_ETA};
use crate::error::Result;
use crate::extension::{build_extension, choose_constants, ConstantsMode, ExtendedHamiltonian, ExtensionParams};
use crate::geometry::{degeneration_map, nondegeneration_map, solve_phi, CollarPoint, CollarProfile, ContactChart};
use crate::hamflow::{
    check_quantitative_twist, energy_drift, flow_map, integrate_flow, omega, BoundaryGrid, CollarTwist, FnHamiltonian,
    HamiltonianModel,
};
use crate::index::{block_decompose, rotation_path, rs_index, verify_index_growth};
use crate::linalg::angle_diff;
use crate::models::billiard::{billiard_form_check, phase_grid};
use crate::models::{AnnulusTwistModel, BilliardTable, KatokSystem, TableSpec};
use crate::orbits::{find_chords, prime_iterate_survey, Lagrangian};
use crate::smoothing::{build_family, slope_lower_bound, verify_convergence, SmoothingFamily};

/// A CSV table; cells are already formatted.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

/// Shortest round-trip formatting, so tables are bit-reproducible.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Report {
    pub passed: bool,
    pub summary: String,
    pub metrics: Vec<(String, f64)>,
    /// `(suffix, table)`; the first table is written to `<id>.csv`, the others to `<id>-<suffix>.csv`.
    pub tables: Vec<(String, Table)>,
}

/// A registered check.
#[derive(Clone, Copy)]
pub struct CheckSpec {
    pub id: &'static str,
    /// Acceptance criterion number, if the check is one.
    pub criterion: Option<u8>,
    pub limit_secs: f64,
    pub run: fn(&ExperimentConfig) -> Result<Report>,
}

pub const CHECKS: &[CheckSpec] = &[
    CheckSpec { id: "katok-twist", criterion: Some(1), limit_secs: 1.0, run: katok_twist },
    CheckSpec { id: "katok-scan", criterion: Some(2), limit_secs: 60.0, run: katok_scan },
    CheckSpec { id: "degenerate", criterion: Some(3), limit_secs: 1.0, run: degenerate },
    CheckSpec { id: "extend", criterion: Some(4), limit_secs: 1.0, run: extend },
    CheckSpec { id: "action-growth", criterion: Some(5), limit_secs: 120.0, run: action_growth },
    CheckSpec { id: "smooth", criterion: Some(6), limit_secs: 60.0, run: smooth },
    CheckSpec { id: "index", criterion: Some(7), limit_secs: 120.0, run: index },
    CheckSpec { id: "billiard", criterion: Some(8), limit_secs: 30.0, run: billiard },
    CheckSpec { id: "orbits", criterion: Some(9), limit_secs: 300.0, run: orbits },
    CheckSpec { id: "conservation", criterion: Some(10), limit_secs: 60.0, run: conservation },
    CheckSpec { id: "chords", criterion: None, limit_secs: 300.0, run: chords },
];

pub fn lookup(id: &str) -> Option<&'static CheckSpec> {
    CHECKS.iter().find(|c| c.id == id)
}

fn rng(cfg: &ExperimentConfig, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(cfg.seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

fn dist_c(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

fn verdict(ok: bool) -> String {
    if ok { "true" } else { "false" }.to_string()
}

// ---------------------------------------------------------------- Katok

fn katok_twist(cfg: &ExperimentConfig) -> Result<Report> {
    let e = cfg.katok.eps1;
    let s = KatokSystem::three(e)?;
    let cases = [("p1", s.binding_point(2, 0.0), e / (1.0 + e)), ("p2", s.binding_point(3, 0.0), -e / (1.0 - e))];
    let mut t = Table::new(&["point", "twist", "expected", "error"]);
    let mut worst: f64 = 0.0;
    for (name, p, expected) in cases {
        s.check_on_variety(&p)?;
        let k = s.twist_function(&p);
        worst = worst.max((k - expected).abs());
        t.push(vec![name.into(), num(k), num(expected), num((k - expected).abs())]);
    }
    let k1 = s.twist_function(&s.binding_point(2, 0.0));
    let k2 = s.twist_function(&s.binding_point(3, 0.0));
    Ok(Report {
        passed: worst <= 1e-10,
        summary: format!("K(p1) = {k1:.12}, K(p2) = {k2:.12} (eps1 = {e}), max error {worst:.1e}"),
        metrics: vec![("K_p1".into(), k1), ("K_p2".into(), k2), ("max_error".into(), worst)],
        tables: vec![(String::new(), t)],
    })
}

fn katok_scan(cfg: &ExperimentConfig) -> Result<Report> {
    let s = KatokSystem::three(cfg.katok.scan_eps1)?;
    let scan = s.fixed_point_scan(cfg.katok.scan_resolution);
    let targets = s.fixed_points();
    let mut t = Table::new(&["point", "re_w0", "im_w0", "re_w1", "im_w1", "re_w2", "im_w2", "re_w3", "im_w3", "distance"]);
    let mut worst: f64 = 0.0;
    for (name, target) in ["p0", "q0"].iter().zip(&targets) {
        let d = scan.points.iter().map(|p| dist_c(p, target)).fold(f64::INFINITY, f64::min);
        worst = worst.max(d);
        if let Some(p) = scan.points.iter().min_by(|a, b| dist_c(a, target).total_cmp(&dist_c(b, target))) {
            let mut row = vec![name.to_string()];
            row.extend(p.iter().flat_map(|c| [num(c.re), num(c.im)]));
            row.push(num(d));
            t.push(row);
        }
    }
    let passed = scan.points.len() == 2 && worst <= 1e-8;
    Ok(Report {
        passed,
        summary: format!(
            "{} fixed points from {} candidates at resolution {}, max distance to p0/q0 {worst:.1e}",
            scan.points.len(),
            scan.candidates,
            cfg.katok.scan_resolution
        ),
        metrics: vec![("fixed_points".into(), scan.points.len() as f64), ("max_distance".into(), worst)],
        tables: vec![(String::new(), t)],
    })
}

// ---------------------------------------------------------------- collar geometry

fn degenerate(cfg: &ExperimentConfig) -> Result<Report> {
    let mut t = Table::new(&["profile", "quantity", "max_error", "bound"]);
    let mut passed = true;
    let mut worst_roundtrip: f64 = 0.0;
    for spec in &cfg.degenerate.profiles {
        let profile = CollarProfile::try_from(spec)?;
        let n = cfg.degenerate.resolution;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let x = CollarPoint::new(profile.s_max() * i as f64 / (n - 1) as f64, vec![0.3]);
            let back = degeneration_map(&profile, &nondegeneration_map(&profile, &x)?)?;
            worst = worst.max((back.s - x.s).abs());
        }
        worst_roundtrip = worst_roundtrip.max(worst);
        passed &= worst <= 1e-10;
        t.push(vec![serde_json::to_string(spec)?, "S(Q(x)) - x".into(), num(worst), num(1e-10)]);
    }
    let model = CollarProfile::polynomial(2)?;
    let n = cfg.degenerate.resolution;
    let mut sqrt_err: f64 = 0.0;
    for i in 0..n {
        let s = i as f64 / (n - 1) as f64;
        sqrt_err = sqrt_err.max((solve_phi(&model, s)? - s.sqrt()).abs());
    }
    passed &= sqrt_err <= 1e-12;
    t.push(vec!["1 - s^2".into(), "Q(s) - sqrt(s)".into(), num(sqrt_err), num(1e-12)]);
    Ok(Report {
        passed,
        summary: format!("max roundtrip residual {worst_roundtrip:.1e}, |Q(s) - sqrt(s)| <= {sqrt_err:.1e}"),
        metrics: vec![("max_roundtrip".into(), worst_roundtrip), ("sqrt_error".into(), sqrt_err)],
        tables: vec![(String::new(), t)],
    })
}

/// The smoothed annulus Hamiltonian with its linear continuation.
pub fn annulus_extension(cfg: &ExperimentConfig) -> Result<(ExtendedHamiltonian<SmoothingFamily<FnHamiltonian>>, BoundaryGrid)> {
    let m = cfg.annulus;
    let e = &cfg.extension;
    let grid = BoundaryGrid::circle(&ContactChart::new(1), e.boundary_nq, e.boundary_nt);
    let fam = build_family(m.degenerate_hamiltonian(), &m.profile(), e.eps, &grid)?;
    // closed Reeb orbits of α = dq on the boundary circle
    let periods: Vec<f64> = (1..=64).map(|k| TAU * k as f64).collect();
    let params = match (e.c0, e.c1) {
        (Some(c0), Some(c1)) => {
            let mut p = ExtensionParams::new(c0, c1);
            p.quantitative = e.mode == ConstantsMode::Quantitative;
            p
        }
        _ => choose_constants(&fam, &grid, e.mode, Some(&periods))?,
    }
    .with_deltas(e.delta0, e.delta1);
    Ok((build_extension(fam, params, &grid)?, grid))
}

fn extend(cfg: &ExperimentConfig) -> Result<Report> {
    let (ext, grid) = annulus_extension(cfg)?;
    let p = ext.params;
    let c1_match = grid.points.iter().map(|(t, b)| ext.c1_mismatch(*t, b)).fold(0.0, f64::max);
    let mut linear_err: f64 = 0.0;
    for (t, b) in &grid.points {
        for i in 0..=64 {
            let r = 1.0 + p.delta1 + 4.0 * p.delta1 * i as f64 / 64.0;
            let mut x = vec![r];
            x.extend_from_slice(b);
            let v = ext.eval(*t, &x);
            linear_err = linear_err.max((v - (p.c1 * (r - 1.0) + p.c0)).abs() / (1.0 + v.abs()));
        }
    }
    let mut table = Table::new(&["r", "H", "dH_dr", "zone"]);
    let n = cfg.extension.table_points.max(2);
    let (lo, hi) = (1.0 - 2.0 * cfg.extension.eps, 1.0 + 3.0 * p.delta1);
    for i in 0..n {
        let r = lo + (hi - lo) * i as f64 / (n - 1) as f64;
        let x = [r, 0.0];
        let zone = if r < 1.0 { "domain" } else { ["", "1", "2", "3"][crate::action::zone_classify(&p, r, DEFAULT_ETA) as usize] };
        table.push(vec![num(r), num(ext.eval(0.0, &x)), num(ext.grad(0.0, &x)[0]), zone.into()]);
    }
    let passed = linear_err <= 1e-14 && c1_match <= 1e-6;
    Ok(Report {
        passed,
        summary: format!(
            "C0 = {}, C1 = {}, delta1 = {}: linear-region deviation {linear_err:.1e}, C1 mismatch at r = 1 {c1_match:.1e}",
            p.c0, p.c1, p.delta1
        ),
        metrics: vec![
            ("c0".into(), p.c0),
            ("c1".into(), p.c1),
            ("linear_error".into(), linear_err),
            ("c1_mismatch".into(), c1_match),
        ],
        tables: vec![(String::new(), table)],
    })
}

fn action_growth(cfg: &ExperimentConfig) -> Result<Report> {
    let (ext, grid) = annulus_extension(cfg)?;
    let g = &cfg.growth;
    let settings = GrowthSettings {
        samples: g.samples,
        t_min: g.t_min,
        t_max: g.t_max,
        short_samples: g.short_samples,
        tol: cfg.tol,
        eta: DEFAULT_ETA,
    };
    let rep = verify_action_growth(&ext, &grid, &settings)?;
    let c = rep.constants.c;
    let p = ext.params;
    let mut t = Table::new(&["kind", "t_len", "r0", "action", "reference", "ok"]);
    for s in &rep.samples {
        t.push(vec!["sample".into(), num(s.t_len), num(s.r0), num(s.action), num(s.bound), verdict(s.ok)]);
    }
    // closed orbits of the linear region: k turns of period 2π/C1
    let mut closed_err: f64 = 0.0;
    for k in 1..=g.closed_orbits {
        let r0 = 1.0 + p.delta1 + 0.1 * k as f64;
        let t_len = k as f64 * TAU / p.c1;
        let traj = integrate_flow(&ext, &[r0, 0.4], t_len, cfg.tol)?;
        let a = compute_action(&ext, Some(&p), &traj)?.action;
        let expected = (p.c0 - p.c1) * t_len;
        let err = (a - expected).abs();
        closed_err = closed_err.max(err);
        t.push(vec!["closed".into(), num(t_len), num(r0), num(a), num(expected), verdict(err <= 1e-8)]);
    }
    let passed = rep.passes && rep.samples.len() == g.samples && closed_err <= 1e-8;
    Ok(Report {
        passed,
        summary: format!(
            "c = {c:.6} (c1 {:.4}, c2 {:.4}, c3 {:.4}), d = {:.3e}, fitted slope {:.4}, {} of {} samples within bound, {} escaped; zone-3 error {closed_err:.1e}",
            rep.constants.c1,
            rep.constants.c2,
            rep.constants.c3,
            rep.d,
            rep.slope_fit,
            rep.samples.iter().filter(|s| s.ok).count(),
            g.samples,
            rep.escaped
        ),
        metrics: vec![
            ("c".into(), c),
            ("d".into(), rep.d),
            ("slope_fit".into(), rep.slope_fit),
            ("zone3_error".into(), closed_err),
        ],
        tables: vec![(String::new(), t)],
    })
}

// ---------------------------------------------------------------- smoothing

fn smooth(cfg: &ExperimentConfig) -> Result<Report> {
    let m = cfg.annulus;
    let e = &cfg.extension;
    let sc = &cfg.smoothing;
    let grid = BoundaryGrid::circle(&ContactChart::new(1), e.boundary_nq, e.boundary_nt);
    let fams = sc
        .eps
        .iter()
        .map(|eps| build_family(m.degenerate_hamiltonian(), &m.profile(), *eps, &grid))
        .collect::<Result<Vec<_>>>()?;
    let n = sc.resolution.max(2);
    let mut compact = Vec::with_capacity(4 * n);
    for j in 0..4 {
        let (t, q) = (0.25 * j as f64, 1.7 * j as f64);
        for i in 0..n {
            let s = sc.s_min + (sc.s_max - sc.s_min) * i as f64 / (n - 1) as f64;
            compact.push((t, vec![1.0 - s, q]));
        }
    }
    let conv = verify_convergence(&fams, &compact);
    let mut t = Table::new(&["eps", "sup_difference", "boundary_slope", "c_over_eps", "quantitative_margin", "quantitative_required"]);
    let mut passed = conv.decreasing;
    let mut ordered: Vec<&SmoothingFamily<FnHamiltonian>> = fams.iter().collect();
    ordered.sort_by(|a, b| b.eps().total_cmp(&a.eps()));
    for (f, sup) in ordered.iter().zip(&conv.sup_diff) {
        let slope = slope_lower_bound(f, &grid);
        let q = check_quantitative_twist(&CollarTwist(*f), &grid);
        let required = f.eps() <= sc.quantitative_below * (1.0 + 1e-12);
        passed &= slope.passes && (!required || q.passes);
        t.push(vec![num(f.eps()), num(*sup), num(slope.min_slope), num(slope.c / f.eps()), num(q.margin), verdict(required)]);
    }
    Ok(Report {
        passed,
        summary: format!(
            "sup-differences {:?} ({}), slopes >= C/eps and quantitative twist for eps <= {:.4}: {}",
            conv.sup_diff.iter().map(|d| format!("{d:.3e}")).collect::<Vec<_>>(),
            if conv.decreasing { "decreasing" } else { "NOT decreasing" },
            sc.quantitative_below,
            passed
        ),
        metrics: vec![("last_sup_difference".into(), conv.last)],
        tables: vec![(String::new(), t)],
    })
}

// ---------------------------------------------------------------- index

/// A collar Hamiltonian on the 5-dimensional chart with a rotating `ξ`-part.
pub fn probe_hamiltonian(time_dependent: bool) -> FnHamiltonian {
    let amp = if time_dependent { 0.5 } else { 0.0 };
    let h = FnHamiltonian::new(ContactChart::new(2), move |t, x| {
        let rho2 = x[2] * x[2] + x[3] * x[3];
        x[0] * x[0] + 0.2 * x[0] * rho2 + 0.05 * x[1].sin() * (1.0 + amp * (TAU * t).cos())
    })
    .with_grad(move |t, x| {
        let rho2 = x[2] * x[2] + x[3] * x[3];
        let w = 1.0 + amp * (TAU * t).cos();
        vec![2.0 * x[0] + 0.2 * rho2, 0.05 * x[1].cos() * w, 0.4 * x[0] * x[2], 0.4 * x[0] * x[3]]
    });
    if time_dependent {
        h
    } else {
        h.autonomous()
    }
}

fn index(cfg: &ExperimentConfig) -> Result<Report> {
    let ic = &cfg.index;
    let h = probe_hamiltonian(true);
    let grid = BoundaryGrid::circle(&h.chart(), 16, 4);
    let params = choose_constants(&h, &grid, ConstantsMode::Quantitative, None)?;
    let ext = build_extension(h, params, &grid)?;
    let mut rng = rng(cfg, 7);
    let points: Vec<(f64, Vec<f64>)> = (0..ic.points)
        .map(|_| {
            let r = rng.gen_range(0.5..1.0 + 2.0 * params.delta1);
            (rng.gen_range(0.0..1.0), vec![r, rng.gen_range(0.0..TAU), rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)])
        })
        .collect();
    let residuals = points
        .par_iter()
        .map(|(t, x)| block_decompose(&ext, *t, x).map(|b| b.sp_residuals()))
        .collect::<Result<Vec<_>>>()?;
    let (l0, l1) = residuals.iter().fold((0.0f64, 0.0f64), |(a, b), (x, y)| (a.max(*x), b.max(*y)));

    let mut t = Table::new(&["kind", "parameter", "value", "expected"]);
    t.push(vec!["sp_residual_L0".into(), num(ic.points as f64), num(l0), num(1e-8)]);
    t.push(vec!["sp_residual_L1".into(), num(ic.points as f64), num(l1), num(1e-8)]);
    let mut rotations_ok = true;
    for k in 1..=ic.max_rotation {
        let mu = rs_index(&rotation_path(k as f64, 64 * k))?;
        rotations_ok &= mu == 2.0 * k as f64;
        t.push(vec!["rotation_index".into(), num(k as f64), num(mu), num(2.0 * k as f64)]);
    }
    let round = KatokSystem::three(0.0)?;
    let [p0, _] = round.fixed_points();
    let steps = ic.steps_per_unit;
    let growth = verify_index_growth(
        |len| round.linearized_reeb(&p0, len, ((steps as f64 * len).ceil() as usize).max(16)),
        &ic.arcs,
    )?;
    for (len, mu) in growth.arc_lengths.iter().zip(&growth.indices) {
        t.push(vec!["reeb_arc_index".into(), num(*len), num(*mu), String::new()]);
    }
    let passed = l0 <= 1e-8 && l1 <= 1e-8 && rotations_ok && growth.passes;
    Ok(Report {
        passed,
        summary: format!(
            "sp residuals L0 {l0:.1e}, L1 {l1:.1e} at {} points; rotation indices {}; Reeb-arc index slope {:.4}",
            ic.points,
            if rotations_ok { "all 2k" } else { "WRONG" },
            growth.slope
        ),
        metrics: vec![("l0_residual".into(), l0), ("l1_residual".into(), l1), ("index_slope".into(), growth.slope)],
        tables: vec![(String::new(), t)],
    })
}

// ---------------------------------------------------------------- billiard

fn billiard(cfg: &ExperimentConfig) -> Result<Report> {
    let grid = phase_grid(cfg.billiard.grid);
    let mut t = Table::new(&["table", "quantity", "value", "bound"]);
    let mut passed = true;
    let mut worst_area: f64 = 0.0;
    for spec in &cfg.billiard.tables {
        let table = BilliardTable::new(spec.clone())?;
        let name = serde_json::to_string(spec)?;
        if let TableSpec::Circle { .. } = spec {
            let mut shift: f64 = 0.0;
            for &(theta, phi) in &grid {
                let (t2, p2) = table.map(theta, phi)?;
                shift = shift.max((t2 - theta).abs()).max(angle_diff(p2, phi + 2.0 * theta).abs());
            }
            passed &= shift <= 1e-9;
            t.push(vec![name.clone(), "arc advance - 2 theta".into(), num(shift), num(1e-9)]);
        }
        let area = billiard_form_check(&table, &grid)?;
        worst_area = worst_area.max(area);
        passed &= area <= 1e-6;
        t.push(vec![name.clone(), "det(D map) - 1 in (-cos theta, phi)".into(), num(area), num(1e-6)]);
        let mut tangent: f64 = 0.0;
        for j in 0..16 {
            let phi = TAU * j as f64 / 16.0;
            for theta in [0.0, std::f64::consts::PI] {
                let (t2, p2) = table.map(theta, phi)?;
                tangent = tangent.max((t2 - theta).abs()).max(angle_diff(p2, phi).abs());
            }
        }
        passed &= tangent == 0.0;
        t.push(vec![name, "tangent ray displacement".into(), num(tangent), num(0.0)]);
    }
    Ok(Report {
        passed,
        summary: format!("{} tables, worst area defect {worst_area:.1e} on a {n}x{n} grid", cfg.billiard.tables.len(), n = cfg.billiard.grid),
        metrics: vec![("worst_area_defect".into(), worst_area)],
        tables: vec![(String::new(), t)],
    })
}

// ---------------------------------------------------------------- orbits

fn orbits(cfg: &ExperimentConfig) -> Result<Report> {
    let oc = &cfg.orbits;
    let model = cfg.annulus;
    let map = model.time_one_map(oc.settings.tol);
    let mut seeds: Vec<Vec<f64>> = Vec::new();
    for p in &oc.primes {
        seeds.extend(model.resonance_seeds(*p, oc.seeds_per_circle));
    }
    let annulus = prime_iterate_survey(&map, &oc.primes, &seeds, &oc.settings, None)?;
    let katok = KatokSystem::three(cfg.katok.scan_eps1)?.page_map();
    let katok_seeds = katok.torus_grid(oc.katok_seed_resolution);
    let kat = prime_iterate_survey(&katok, &oc.primes, &katok_seeds, &oc.settings, None)?;

    let mut t = Table::new(&["model", "prime", "seeds", "orbits", "new_minimal", "families", "all_reverified"]);
    let mut passed = true;
    for (name, rep, want_new) in [("annulus", &annulus, true), ("katok", &kat, false)] {
        for r in &rep.rows {
            let ok = if want_new { r.new_minimal >= 1 && r.all_reverified } else { r.new_minimal == 0 };
            passed &= ok;
            t.push(vec![
                name.into(),
                r.prime.to_string(),
                r.seeds.to_string(),
                r.orbits.to_string(),
                r.new_minimal.to_string(),
                r.families.to_string(),
                verdict(r.all_reverified),
            ]);
        }
    }
    let mut detail = Table::new(&["prime", "x", "q", "u", "minimal", "family", "residual", "reverified_residual", "action"]);
    for o in &annulus.orbits {
        detail.push(vec![
            o.period.to_string(),
            num(o.point[0]),
            num(o.point[1]),
            num(AnnulusTwistModel::u_of_x(o.point[0])),
            verdict(o.minimal),
            verdict(o.family),
            num(o.residual),
            num(o.reverified_residual),
            o.action.map(num).unwrap_or_default(),
        ]);
    }
    let counts: Vec<String> = annulus.rows.iter().map(|r| format!("{}:{}", r.prime, r.new_minimal)).collect();
    Ok(Report {
        passed,
        summary: format!(
            "annulus (kappa = {}) isolated minimal orbits per prime [{}]; Katok new orbits {}",
            model.kappa,
            counts.join(", "),
            kat.rows.iter().map(|r| r.new_minimal).sum::<usize>()
        ),
        metrics: annulus.rows.iter().map(|r| (format!("annulus_new_minimal_{}", r.prime), r.new_minimal as f64)).collect(),
        tables: vec![(String::new(), t), ("annulus".into(), detail)],
    })
}

fn chords(cfg: &ExperimentConfig) -> Result<Report> {
    let cc = &cfg.chords;
    let model = cfg.annulus;
    let map = model.time_one_map(cfg.orbits.settings.tol);
    let l = Lagrangian::annulus_fibres();
    let seeds: Vec<Vec<f64>> = (0..cc.seeds)
        .map(|i| vec![AnnulusTwistModel::x_of_u(model.interior * (i as f64 + 0.5) / cc.seeds as f64), 0.0])
        .collect();
    let found = find_chords(&map, &l, cc.order, &seeds, cc.max_period, &cfg.orbits.settings);
    let mut t = Table::new(&["x", "q", "u", "order", "residual", "reverified_residual", "period", "sub_chords"]);
    let mut passed = !found.is_empty();
    for c in &found {
        let consistent = c.period.map_or(true, |k| c.sub_chords.iter().sum::<usize>() == k);
        passed &= c.residual <= 1e-8 && c.reverified_residual <= 1e-8 && consistent;
        t.push(vec![
            num(c.start[0]),
            num(c.start[1]),
            num(AnnulusTwistModel::u_of_x(c.start[0])),
            c.order.to_string(),
            num(c.residual),
            num(c.reverified_residual),
            c.period.map(|k| k.to_string()).unwrap_or_default(),
            c.sub_chords.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(" "),
        ]);
    }
    Ok(Report {
        passed,
        summary: format!(
            "{} chords of order {} from {{q = 0 mod pi}}, {} periodic",
            found.len(),
            cc.order,
            found.iter().filter(|c| c.period.is_some()).count()
        ),
        metrics: vec![("chords".into(), found.len() as f64)],
        tables: vec![(String::new(), t)],
    })
}

// ---------------------------------------------------------------- conservation

/// `max |ω_{φ(x)}(Dφ u, Dφ v) − ω_x(u, v)|` for the time-1 map over random frames.
fn omega_defect<H: HamiltonianModel>(h: &H, points: &[(Vec<f64>, Vec<f64>, Vec<f64>)], tol: f64) -> Result<f64> {
    let chart = h.chart();
    let defects = points
        .par_iter()
        .map(|(x, u, v)| -> Result<f64> {
            let step = 1e-5;
            let image = flow_map(h, x, 1.0, tol)?;
            let push = |w: &[f64]| -> Result<Vec<f64>> {
                let plus: Vec<f64> = x.iter().zip(w).map(|(a, b)| a + step * b).collect();
                let minus: Vec<f64> = x.iter().zip(w).map(|(a, b)| a - step * b).collect();
                let (fp, fm) = (flow_map(h, &plus, 1.0, tol)?, flow_map(h, &minus, 1.0, tol)?);
                Ok(fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * step)).collect())
            };
            let (du, dv) = (push(u)?, push(v)?);
            Ok((omega(&chart, &image, &du, &dv) - omega(&chart, x, u, v)).abs())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(defects.into_iter().fold(0.0, f64::max))
}

fn conservation(cfg: &ExperimentConfig) -> Result<Report> {
    let cc = &cfg.conservation;
    let tight = 1e-12;
    let mut rng = rng(cfg, 10);
    let unit = |d: usize, rng: &mut ChaCha8Rng| -> Vec<f64> {
        let w: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = w.iter().map(|a| a * a).sum::<f64>().sqrt();
        w.into_iter().map(|a| a / n).collect()
    };
    let probe_points: Vec<_> = (0..cc.frames)
        .map(|_| {
            let x = vec![rng.gen_range(0.6..0.9), rng.gen_range(0.0..TAU), rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3)];
            (x, unit(4, &mut rng), unit(4, &mut rng))
        })
        .collect();
    let annulus_points: Vec<_> = (0..cc.frames)
        .map(|_| {
            let u = rng.gen_range(-0.85..0.85);
            (vec![AnnulusTwistModel::x_of_u(u), rng.gen_range(0.0..TAU)], unit(2, &mut rng), unit(2, &mut rng))
        })
        .collect();
    let probe_defect = omega_defect(&probe_hamiltonian(true), &probe_points, tight)?;
    let annulus_defect = omega_defect(&cfg.annulus.hamiltonian(), &annulus_points, tight)?;

    let mut t = Table::new(&["system", "quantity", "value", "bound"]);
    t.push(vec!["collar probe (time-dependent)".into(), "omega defect of time-1 map".into(), num(probe_defect), num(1e-5)]);
    t.push(vec![format!("annulus kappa = {}", cfg.annulus.kappa), "omega defect of time-1 map".into(), num(annulus_defect), num(1e-5)]);

    let (tol, t_end) = (cfg.tol, cc.t_end);
    let bound = 100.0 * tol * t_end;
    let mut drifts: Vec<(String, f64)> = Vec::new();
    let probe = probe_hamiltonian(false);
    for x in probe_points.iter().take(4) {
        drifts.push(("collar probe".into(), energy_drift(&probe, &integrate_flow(&probe, &x.0, t_end, tol)?)));
    }
    let still = AnnulusTwistModel { kappa: 0.0, ..cfg.annulus }.hamiltonian();
    for u in [0.1, 0.5, 0.85, -0.6] {
        let traj = integrate_flow(&still, &[AnnulusTwistModel::x_of_u(u), 0.3], t_end, tol)?;
        drifts.push(("annulus kappa = 0".into(), energy_drift(&still, &traj)));
    }
    let katok = KatokSystem::three(cfg.katok.eps1)?;
    let [p0, q0] = katok.fixed_points();
    for w in [p0, q0, katok.binding_point(2, 0.4), katok.page_point(1.0, &[Complex64::new(0.2, 0.1), Complex64::new(0.0, -0.25)])?] {
        drifts.push(("katok reeb flow".into(), katok.integrate_reeb(&w, t_end, tol)?.1));
    }
    let worst_drift = drifts.iter().map(|(_, d)| *d).fold(0.0, f64::max);
    for (name, d) in &drifts {
        t.push(vec![name.clone(), "energy drift".into(), num(*d), num(bound)]);
    }
    let passed = probe_defect <= 1e-5 && annulus_defect <= 1e-5 && worst_drift <= bound;
    Ok(Report {
        passed,
        summary: format!(
            "omega defects {probe_defect:.1e} (probe), {annulus_defect:.1e} (annulus); worst energy drift {worst_drift:.1e} <= {bound:.1e}"
        ),
        metrics: vec![
            ("probe_omega_defect".into(), probe_defect),
            ("annulus_omega_defect".into(), annulus_defect),
            ("worst_energy_drift".into(), worst_drift),
        ],
        tables: vec![(String::new(), t)],
    })
}

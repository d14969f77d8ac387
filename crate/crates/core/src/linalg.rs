//! Small numerical helpers shared across modules.

use nalgebra::DMatrix;

/// Standard complex structure on ℝ^{2n} for coordinates ordered in consecutive
/// canonical pairs `(p_1, q_1, …, p_n, q_n)` with `ω = Σ dp_i ∧ dq_i`.
///
/// The Hamiltonian vector field is `ż = J ∇H`.
pub fn symplectic_j(dim: usize) -> DMatrix<f64> {
    assert!(dim % 2 == 0, "symplectic dimension must be even");
    let mut j = DMatrix::zeros(dim, dim);
    for k in (0..dim).step_by(2) {
        j[(k, k + 1)] = -1.0;
        j[(k + 1, k)] = 1.0;
    }
    j
}

/// `max |Mᵀ J M − J|`.
pub fn symplectic_residual(m: &DMatrix<f64>) -> f64 {
    let j = symplectic_j(m.nrows());
    (m.transpose() * &j * m - &j).amax()
}

/// `max |Lᵀ J + J L|`, zero iff `L ∈ 𝔰𝔭(2n)`.
pub fn sp_algebra_residual(l: &DMatrix<f64>) -> f64 {
    let j = symplectic_j(l.nrows());
    (l.transpose() * &j + &j * l).amax()
}

/// Central finite-difference step scaled by coordinate magnitude.
pub fn fd_step(x: f64, base: f64) -> f64 {
    base * x.abs().max(1.0)
}

/// Ordinary least-squares fit `y ≈ slope·x + intercept`.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return (0.0, my);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Golden-section minimisation of a unimodal function on `[a, b]`.
pub fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, iterations: usize) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iterations {
        if (b - a).abs() <= f64::EPSILON * (a.abs() + b.abs()).max(1e-300) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let mut best = (c, fc);
    for x in [a, b, d] {
        let v = f(x);
        if v < best.1 {
            best = (x, v);
        }
    }
    best
}

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_angle(x: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let y = x.rem_euclid(tau);
    if y >= tau {
        0.0
    } else {
        y
    }
}

/// Signed difference of two angles, in `(-π, π]`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let d = (a - b).rem_euclid(tau);
    if d > std::f64::consts::PI {
        d - tau
    } else {
        d
    }
}

/// All positive divisors of `n`, ascending.
pub fn divisors(n: usize) -> Vec<usize> {
    (1..=n).filter(|d| n % d == 0).collect()
}

/// Radical inverse of `i` in the given prime base (Halton sequence).
pub fn halton(mut i: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotation_is_symplectic() {
        let t: f64 = 0.7;
        let m = DMatrix::from_row_slice(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()]);
        assert!(symplectic_residual(&m) < 1e-15);
        assert!(sp_algebra_residual(&symplectic_j(2)) < 1e-15);
    }

    #[test]
    fn line_fit_exact() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| -2.0 * x + 0.5).collect();
        let (s, c) = fit_line(&xs, &ys);
        assert!((s + 2.0).abs() < 1e-14 && (c - 0.5).abs() < 1e-14);
    }

    #[test]
    fn golden_finds_v_shaped_minimum() {
        let (x, v) = golden_min(|x| (x - 0.3137).abs(), 0.0, 1.0, 200);
        assert!((x - 0.3137).abs() < 1e-14 && v < 1e-14);
    }

    #[test]
    fn angle_helpers() {
        assert!((angle_diff(0.1, std::f64::consts::TAU - 0.1) - 0.2).abs() < 1e-15);
        assert!(wrap_angle(-0.5) > 5.0);
        assert_eq!(divisors(12), vec![1, 2, 3, 4, 6, 12]);
    }

    #[test]
    fn halton_base_two() {
        assert_eq!(halton(1, 2), 0.5);
        assert_eq!(halton(2, 2), 0.25);
        assert_eq!(halton(3, 2), 0.75);
        assert_eq!(halton(1, 3), 1.0 / 3.0);
    }
}

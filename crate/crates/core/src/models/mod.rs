//! Concrete systems: the Katok/Brieskorn non-example, convex billiards and a
//! synthetic twist annulus.

pub mod annulus;
pub mod billiard;
pub mod katok;

pub use annulus::{AnnulusHamiltonian, AnnulusTwistModel};
pub use billiard::{BilliardTable, TableSpec};
pub use katok::KatokSystem;

use crate::error::Result;

/// A map `f` on a low-dimensional phase space, as seen by the orbit finders.
///
/// Some coordinates may be angles; `difference` and `normalize` know which.
pub trait ReturnMap: Send + Sync {
    fn dim(&self) -> usize;

    fn apply(&self, x: &[f64], tol: f64) -> Result<Vec<f64>>;

    /// `a − b` with angular components wrapped to `(−π, π]`.
    fn difference(&self, a: &[f64], b: &[f64]) -> Vec<f64>;

    /// Canonical representative of `x` (angles reduced mod 2π).
    fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }

    fn is_interior(&self, x: &[f64]) -> bool;

    /// Deterministic seed set of roughly `resolution` points per coordinate direction.
    fn seeds(&self, resolution: usize) -> Vec<Vec<f64>>;

    /// Action of the `k`-periodic orbit through `x`, when the model knows how to compute it.
    fn orbit_action(&self, _x: &[f64], _k: usize, _tol: f64) -> Option<f64> {
        None
    }

    /// `f^k(x)`.
    fn iterate(&self, x: &[f64], k: usize, tol: f64) -> Result<Vec<f64>> {
        let mut y = x.to_vec();
        for _ in 0..k {
            y = self.apply(&y, tol)?;
        }
        Ok(y)
    }
}

/// Euclidean norm of a difference vector.
pub fn distance<M: ReturnMap + ?Sized>(m: &M, a: &[f64], b: &[f64]) -> f64 {
    m.difference(a, b).iter().map(|v| v * v).sum::<f64>().sqrt()
}

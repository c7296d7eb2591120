//! Few-shot nearest-class-center error bounds in terms of class dispersion.
//!
//! With `A = 2 + 2^{3/2}/m` the family of bounds indexed by `a ≥ 5` is
//!
//! ```text
//! E(a) = (C′ − 1)·[τ(a)^{-2}·Ṽ + a·b_lin],   τ(a) = 1/2 − A/a,
//! b_lin = (2V^s/√m + 2V/√m + V/m)/4
//! ```
//!
//! `V` is the symmetric CDNV, `V^s` the mean square root of it, and `Ṽ` the
//! directional CDNV. Minimizing over `a` leads to a depressed cubic in
//! `y = a − 2A`, which [`solve_stationary_cubic`] solves in closed form.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::DispersionSummary;

/// Smallest `m` for which the fixed-coefficient bound is stated.
pub const MIN_SHOTS: usize = 10;
/// Lower end of the admissible `a` range.
pub const MIN_A: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundInputs {
    /// Number of classes `C′` in the downstream task.
    pub n_way: usize,
    /// Labeled samples per class `m`.
    pub shots: usize,
    pub dir_cdnv: f64,
    /// Symmetric CDNV.
    pub cdnv: f64,
    pub sqrt_cdnv: f64,
}

impl BoundInputs {
    /// Uses the symmetric CDNV, as the bounds require.
    pub fn from_dispersion(n_way: usize, shots: usize, d: &DispersionSummary) -> Result<Self> {
        let inputs = Self {
            n_way,
            shots,
            dir_cdnv: d.dir_cdnv_avg,
            cdnv: d.cdnv_sym_avg,
            sqrt_cdnv: d.sqrt_cdnv_avg,
        };
        inputs.validate()?;
        Ok(inputs)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_way < 2 {
            return Err(Error::Domain(format!(
                "n_way must be >= 2, got {}",
                self.n_way
            )));
        }
        if self.shots == 0 {
            return Err(Error::Domain("shots must be >= 1".into()));
        }
        for (name, v) in [
            ("dir_cdnv", self.dir_cdnv),
            ("cdnv", self.cdnv),
            ("sqrt_cdnv", self.sqrt_cdnv),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Domain(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }

    fn classes_factor(&self) -> f64 {
        (self.n_way - 1) as f64
    }

    /// `A = 2 + 2^{3/2}/m`.
    pub fn a_const(&self) -> f64 {
        2.0 + 8f64.sqrt() / self.shots as f64
    }

    /// `(2V^s/√m + 2V/√m + V/m)/4`, the coefficient of `a`.
    pub fn b_lin(&self) -> f64 {
        let m = self.shots as f64;
        (2.0 * self.sqrt_cdnv / m.sqrt() + 2.0 * self.cdnv / m.sqrt() + self.cdnv / m) / 4.0
    }

    fn require_min_shots(&self) -> Result<()> {
        if self.shots < MIN_SHOTS {
            return Err(Error::Domain(format!(
                "bound requires m >= {MIN_SHOTS}, got {}",
                self.shots
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundEvaluation {
    pub a: f64,
    pub tau: f64,
    pub value: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CorSolution {
    #[serde(rename = "A")]
    pub a_const: f64,
    pub b_lin: f64,
    #[serde(rename = "F")]
    pub f: f64,
    pub y_star: f64,
    pub a_star: f64,
    /// `+∞` when `b_lin = 0`.
    pub a_opt: f64,
    pub bound: f64,
}

/// `(C′ − 1)(1 + 1/m)·V`, with the hidden constant set to 1.
///
/// Reference only: the constant is not known, so this is not a certified
/// bound.
pub fn baseline_bound(inputs: &BoundInputs) -> Result<f64> {
    inputs.validate()?;
    Ok(inputs.classes_factor() * (1.0 + 1.0 / inputs.shots as f64) * inputs.cdnv)
}

/// `(C′ − 1)[8Ṽ + 8V^s/√m + 8V/√m + 4V/m]`, valid for `m ≥ 10`.
pub fn prop1_bound(inputs: &BoundInputs) -> Result<f64> {
    inputs.validate()?;
    inputs.require_min_shots()?;
    let m = inputs.shots as f64;
    let inner = 8.0 * inputs.dir_cdnv
        + 8.0 * inputs.sqrt_cdnv / m.sqrt()
        + 8.0 * inputs.cdnv / m.sqrt()
        + 4.0 * inputs.cdnv / m;
    Ok(inputs.classes_factor() * inner)
}

/// `E(a)` for a single `a ≥ 5` with `τ(a) > 0`.
pub fn general_bound(inputs: &BoundInputs, a: f64) -> Result<BoundEvaluation> {
    inputs.validate()?;
    if a.is_nan() || a < MIN_A {
        return Err(Error::Domain(format!("a must be >= {MIN_A}, got {a}")));
    }
    let tau = 0.5 - inputs.a_const() / a;
    if tau.is_nan() || tau <= 0.0 {
        return Err(Error::Domain(format!(
            "tau(a={a}, m={}) = {tau} is not positive",
            inputs.shots
        )));
    }
    let value = if a.is_infinite() {
        // only meaningful when the linear term vanishes
        if inputs.b_lin() == 0.0 {
            inputs.classes_factor() * 4.0 * inputs.dir_cdnv
        } else {
            f64::INFINITY
        }
    } else {
        inputs.classes_factor() * (inputs.dir_cdnv / (tau * tau) + a * inputs.b_lin())
    };
    Ok(BoundEvaluation { a, tau, value })
}

/// Positive root of `y³ − 8F·y − 16F·A = 0`.
///
/// Uses Cardano's formula when `A² ≥ 8F/27` (one real root) and the
/// trigonometric form otherwise (three real roots, the largest is returned).
pub fn solve_stationary_cubic(f: f64, a: f64) -> Result<f64> {
    if !(f >= 0.0 && f.is_finite()) {
        return Err(Error::Domain(format!("F must be finite and >= 0, got {f}")));
    }
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::Domain(format!("A must be finite and > 0, got {a}")));
    }
    if f == 0.0 {
        return Ok(0.0);
    }
    let x = 8.0 * f / 27.0;
    let disc = a * a - x;
    if disc >= 0.0 {
        let root = disc.sqrt();
        // A − √(A² − x) rewritten to avoid cancellation
        let small = x / (a + root);
        Ok((8.0 * f * (a + root)).cbrt() + (8.0 * f * small).cbrt())
    } else {
        let arg = (3.0 * a * (3.0 / (8.0 * f)).sqrt()).clamp(-1.0, 1.0);
        Ok(4.0 * (2.0 * f / 3.0).sqrt() * (arg.acos() / 3.0).cos())
    }
}

/// The bound minimized over `a ≥ 5`.
pub fn cor1_bound(inputs: &BoundInputs) -> Result<CorSolution> {
    inputs.validate()?;
    inputs.require_min_shots()?;
    let a_const = inputs.a_const();
    let b_lin = inputs.b_lin();
    let factor = inputs.classes_factor();
    if b_lin == 0.0 {
        return Ok(CorSolution {
            a_const,
            b_lin,
            f: f64::INFINITY,
            y_star: f64::INFINITY,
            a_star: f64::INFINITY,
            a_opt: f64::INFINITY,
            bound: factor * 4.0 * inputs.dir_cdnv,
        });
    }
    let f = 2.0 * inputs.dir_cdnv * a_const / b_lin;
    let y_star = solve_stationary_cubic(f, a_const)?;
    let a_star = 2.0 * a_const + y_star;
    let a_opt = a_star.max(MIN_A);
    let bound = general_bound(inputs, a_opt)?.value;
    Ok(CorSolution {
        a_const,
        b_lin,
        f,
        y_star,
        a_star,
        a_opt,
        bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example() -> BoundInputs {
        BoundInputs {
            n_way: 2,
            shots: 100,
            dir_cdnv: 0.01,
            cdnv: 0.1,
            sqrt_cdnv: 0.1f64.sqrt(),
        }
    }

    #[test]
    fn baseline_values() {
        let mut i = example();
        assert!((baseline_bound(&i).unwrap() - 0.101).abs() < 1e-15);
        i.cdnv = 0.0;
        i.dir_cdnv = 0.0;
        assert_eq!(baseline_bound(&i).unwrap(), 0.0);
    }

    #[test]
    fn prop1_needs_ten_shots() {
        let mut i = example();
        i.shots = 9;
        assert!(prop1_bound(&i).is_err());
        assert!(cor1_bound(&i).is_err());
    }

    #[test]
    fn general_rejects_small_a() {
        assert!(general_bound(&example(), 4.999).is_err());
        let mut i = example();
        i.shots = 1;
        // A = 2 + 2√2 makes τ(5) negative
        assert!(general_bound(&i, 5.0).is_err());
    }

    #[test]
    fn cubic_branches() {
        assert_eq!(solve_stationary_cubic(0.0, 2.0).unwrap(), 0.0);
        assert!((solve_stationary_cubic(1.0, 2.0).unwrap() - 4.0).abs() < 1e-12);
        let y = solve_stationary_cubic(100.0, 2.0).unwrap();
        assert!((y.powi(3) - 800.0 * y - 3200.0).abs() < 1e-8 * 3200.0);
        assert!(solve_stationary_cubic(-1.0, 2.0).is_err());
    }

    #[test]
    fn collapsed_linear_term() {
        let i = BoundInputs {
            n_way: 2,
            shots: 50,
            dir_cdnv: 0.01,
            cdnv: 0.0,
            sqrt_cdnv: 0.0,
        };
        let s = cor1_bound(&i).unwrap();
        assert!((s.bound - 0.04).abs() < 1e-15);
        assert!(s.a_opt.is_infinite());
    }

    #[test]
    fn inputs_validated() {
        let mut i = example();
        i.dir_cdnv = -0.2;
        assert!(baseline_bound(&i).is_err());
        i = example();
        i.n_way = 1;
        assert!(prop1_bound(&i).is_err());
    }
}

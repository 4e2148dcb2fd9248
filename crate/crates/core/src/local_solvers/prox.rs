//! Proximal operators of convex scalar functions.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Convex function of one real variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalarFn {
    Zero,
    /// `a u + b`
    Affine { a: f64, b: f64 },
    /// `1/2 a u^2 + b u + c`, `a >= 0`
    Quadratic { a: f64, b: f64, c: f64 },
    /// `k exp(u - shift)`, `k >= 0`
    ExpShifted { k: f64, shift: f64 },
}

impl ScalarFn {
    /// Builds a function from a tag and its parameter list:
    /// `zero`, `affine [a, b]`, `quadratic [a, b, c]`, `exp_shifted [shift]`
    /// or `exp_shifted [k, shift]`.
    pub fn from_tag(tag: &str, params: &[f64]) -> Result<Self> {
        let f = match (tag, params) {
            ("zero", []) => ScalarFn::Zero,
            ("affine", [a, b]) => ScalarFn::Affine { a: *a, b: *b },
            ("quadratic", [a, b, c]) => ScalarFn::Quadratic { a: *a, b: *b, c: *c },
            ("exp_shifted", [shift]) => ScalarFn::ExpShifted { k: 1.0, shift: *shift },
            ("exp_shifted", [k, shift]) => ScalarFn::ExpShifted { k: *k, shift: *shift },
            ("zero" | "affine" | "quadratic" | "exp_shifted", _) => {
                return Err(Error::Parameter(format!(
                    "wrong parameter count {} for `{tag}`",
                    params.len()
                )))
            }
            _ => return Err(Error::UnsupportedFunction(tag.to_string())),
        };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            ScalarFn::Zero => true,
            ScalarFn::Affine { a, b } => a.is_finite() && b.is_finite(),
            ScalarFn::Quadratic { a, b, c } => a >= 0.0 && b.is_finite() && c.is_finite(),
            ScalarFn::ExpShifted { k, shift } => k >= 0.0 && k.is_finite() && shift.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Parameter(format!("{self:?} is not a finite convex function")))
        }
    }

    /// The same function scaled by `w >= 0`.
    pub fn scaled(&self, w: f64) -> Self {
        match *self {
            ScalarFn::Zero => ScalarFn::Zero,
            ScalarFn::Affine { a, b } => ScalarFn::Affine { a: w * a, b: w * b },
            ScalarFn::Quadratic { a, b, c } => ScalarFn::Quadratic { a: w * a, b: w * b, c: w * c },
            ScalarFn::ExpShifted { k, shift } => ScalarFn::ExpShifted { k: w * k, shift },
        }
    }

    pub fn eval(&self, u: f64) -> f64 {
        match *self {
            ScalarFn::Zero => 0.0,
            ScalarFn::Affine { a, b } => a * u + b,
            ScalarFn::Quadratic { a, b, c } => 0.5 * a * u * u + b * u + c,
            ScalarFn::ExpShifted { k, shift } => k * (u - shift).exp(),
        }
    }

    pub fn derivative(&self, u: f64) -> f64 {
        match *self {
            ScalarFn::Zero => 0.0,
            ScalarFn::Affine { a, .. } => a,
            ScalarFn::Quadratic { a, b, .. } => a * u + b,
            ScalarFn::ExpShifted { k, shift } => k * (u - shift).exp(),
        }
    }

    pub fn second_derivative(&self, u: f64) -> f64 {
        match *self {
            ScalarFn::Zero | ScalarFn::Affine { .. } => 0.0,
            ScalarFn::Quadratic { a, .. } => a,
            ScalarFn::ExpShifted { k, shift } => k * (u - shift).exp(),
        }
    }
}

/// `argmin_u g(u) + (u - v)^2 / (2 lambda)`.
pub fn prox_scalar(g: &ScalarFn, lambda: f64, v: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Parameter(format!("prox parameter {lambda} must be positive")));
    }
    if !v.is_finite() {
        return Err(Error::Numeric(format!("prox evaluated at {v}")));
    }
    g.validate()?;
    match *g {
        ScalarFn::Zero => Ok(v),
        ScalarFn::Affine { a, .. } => Ok(v - lambda * a),
        ScalarFn::Quadratic { a, b, .. } => Ok((v - lambda * b) / (1.0 + lambda * a)),
        ScalarFn::ExpShifted { k, shift } => {
            if k == 0.0 {
                return Ok(v);
            }
            prox_exp(lambda * k, shift, v)
        }
    }
}

/// Root of `h(u) = c exp(u - shift) + u - v`, increasing in `u`.
///
/// Newton runs on the log form `ln c + u - shift - ln(v - u)`, which stays
/// well scaled when `exp` would overflow.
fn prox_exp(c: f64, shift: f64, v: f64) -> Result<f64> {
    let h = |u: f64| c * (u - shift).exp() + u - v;
    let f = |u: f64| c.ln() + u - shift - (v - u).ln();
    let mut lo = v - c * (v - shift).exp();
    let mut hi = v;
    if !lo.is_finite() {
        let mut step = 1.0;
        lo = v - step;
        while h(lo) > 0.0 {
            step *= 2.0;
            lo = v - step;
        }
        // c exp(u* - shift) = v - u* <= v - lo
        hi = v.min(shift + ((v - lo) / c).ln());
    }
    let mut u = 0.5 * (lo + hi);
    for _ in 0..200 {
        let r = h(u);
        if r.abs() <= 1e-10 || hi - lo <= 4.0 * f64::EPSILON * (1.0 + u.abs()) {
            return Ok(u);
        }
        if r > 0.0 {
            hi = u;
        } else {
            lo = u;
        }
        let newton = u - f(u) / (1.0 + 1.0 / (v - u));
        u = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    Err(Error::Numeric("prox of exp did not converge".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(prox_scalar(&ScalarFn::Zero, 1.0, 3.5).unwrap(), 3.5);
        let half_sq = ScalarFn::from_tag("quadratic", &[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(prox_scalar(&half_sq, 1.0, 2.0).unwrap(), 1.0);
        let e = ScalarFn::from_tag("exp_shifted", &[100.0]).unwrap();
        let u = prox_scalar(&e, 1.0, 0.0).unwrap();
        assert!((u + (-100.0f64).exp()).abs() < 1e-15);
        assert!(matches!(
            ScalarFn::from_tag("huber", &[1.0]),
            Err(Error::UnsupportedFunction(_))
        ));
    }

    #[test]
    fn affine_shift() {
        let g = ScalarFn::Affine { a: 2.0, b: 7.0 };
        assert_eq!(prox_scalar(&g, 0.5, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn exp_far_above_shift() {
        let g = ScalarFn::ExpShifted { k: 1.0, shift: 0.0 };
        let u = prox_scalar(&g, 1.0, 800.0).unwrap();
        assert!((u.exp() + u - 800.0).abs() <= 1e-10 * 800.0);
    }

    #[test]
    fn rejects_nonpositive_lambda() {
        assert!(prox_scalar(&ScalarFn::Zero, 0.0, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn exp_prox_satisfies_optimality(
            k in 0.01f64..10.0, shift in -5.0f64..5.0, lambda in 0.01f64..10.0, v in -20.0f64..20.0,
        ) {
            let g = ScalarFn::ExpShifted { k, shift };
            let u = prox_scalar(&g, lambda, v).unwrap();
            let r = lambda * g.derivative(u) + u - v;
            prop_assert!(r.abs() <= 1e-9 * (1.0 + v.abs()));
        }

        #[test]
        fn prox_is_nonexpansive(a in 0.0f64..5.0, b in -5.0f64..5.0, v1 in -10.0f64..10.0, v2 in -10.0f64..10.0) {
            for g in [ScalarFn::Quadratic { a, b, c: 0.0 }, ScalarFn::ExpShifted { k: a, shift: b }] {
                let p1 = prox_scalar(&g, 0.7, v1).unwrap();
                let p2 = prox_scalar(&g, 0.7, v2).unwrap();
                prop_assert!((p1 - p2).abs() <= (v1 - v2).abs() + 1e-9);
            }
        }
    }
}

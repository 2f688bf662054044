//! Named function catalog used to configure costs, prizes and demand.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::scalar::Scalar;

pub type UnaryClosure<S> = Arc<dyn Fn(S) -> S + Send + Sync>;
pub type BinaryClosure<S> = Arc<dyn Fn(S, S) -> S + Send + Sync>;

/// A function of one real argument.
#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields, bound = "S: Scalar")]
pub enum ScalarFn<S: Scalar> {
    /// a·x^p
    Power { a: S, p: S },
    /// a·exp(−rate·x)
    ExpDecay { a: S, rate: S },
    /// a + b·x
    Affine { a: S, b: S },
    /// Monotone cubic (PCHIP) interpolation through the table, flat outside it.
    TabulatedSpline { x: Vec<S>, y: Vec<S> },
    #[serde(skip)]
    Custom(UnaryClosure<S>),
}

impl<S: Scalar> fmt::Debug for ScalarFn<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarFn::Power { a, p } => write!(f, "Power({a}·x^{p})"),
            ScalarFn::ExpDecay { a, rate } => write!(f, "ExpDecay({a}·e^(-{rate}x))"),
            ScalarFn::Affine { a, b } => write!(f, "Affine({a} + {b}x)"),
            ScalarFn::TabulatedSpline { x, .. } => write!(f, "TabulatedSpline({} nodes)", x.len()),
            ScalarFn::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl<S: Scalar> ScalarFn<S> {
    pub fn linear(slope: f64) -> Self {
        ScalarFn::Affine { a: S::zero(), b: S::lit(slope) }
    }

    pub fn constant(c: f64) -> Self {
        ScalarFn::Affine { a: S::lit(c), b: S::zero() }
    }

    pub fn custom(f: impl Fn(S) -> S + Send + Sync + 'static) -> Self {
        ScalarFn::Custom(Arc::new(f))
    }

    pub fn eval(&self, x: S) -> S {
        match self {
            ScalarFn::Power { a, p } => {
                if *p == S::zero() {
                    *a
                } else if x <= S::zero() {
                    S::zero()
                } else {
                    *a * x.powf(*p)
                }
            }
            ScalarFn::ExpDecay { a, rate } => *a * (-*rate * x).exp(),
            ScalarFn::Affine { a, b } => *a + *b * x,
            ScalarFn::TabulatedSpline { x: xs, y: ys } => pchip(xs, ys, x),
            ScalarFn::Custom(f) => f(x),
        }
    }

    /// Structural checks on the parameters (table shape, finiteness).
    pub fn check(&self) -> Result<()> {
        match self {
            ScalarFn::TabulatedSpline { x, y } => {
                if x.len() < 2 || x.len() != y.len() {
                    return invalid("tabulated spline needs matching x and y tables of length ≥ 2");
                }
                if x.windows(2).any(|w| w[1] <= w[0]) {
                    return invalid("tabulated spline abscissae must be strictly increasing");
                }
                if x.iter().chain(y).any(|v| !v.is_finite()) {
                    return invalid("tabulated spline entries must be finite");
                }
                Ok(())
            }
            ScalarFn::Power { a, p } | ScalarFn::ExpDecay { a, rate: p } | ScalarFn::Affine { a, b: p } => {
                if a.is_finite() && p.is_finite() {
                    Ok(())
                } else {
                    invalid("function parameters must be finite")
                }
            }
            ScalarFn::Custom(_) => Ok(()),
        }
    }
}

fn pchip<S: Scalar>(xs: &[S], ys: &[S], x: S) -> S {
    let n = xs.len();
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let k = xs.partition_point(|p| *p <= x) - 1;
    let secant = |i: usize| (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]);
    let slope = |i: usize| -> S {
        if n == 2 {
            return secant(0);
        }
        if i == 0 {
            return end_slope(xs[1] - xs[0], xs[2] - xs[1], secant(0), secant(1));
        }
        if i == n - 1 {
            return end_slope(xs[n - 1] - xs[n - 2], xs[n - 2] - xs[n - 3], secant(n - 2), secant(n - 3));
        }
        let (d0, d1) = (secant(i - 1), secant(i));
        if d0 * d1 <= S::zero() {
            return S::zero();
        }
        let (h0, h1) = (xs[i] - xs[i - 1], xs[i + 1] - xs[i]);
        let w1 = S::lit(2.0) * h1 + h0;
        let w2 = h1 + S::lit(2.0) * h0;
        (w1 + w2) / (w1 / d0 + w2 / d1)
    };
    let h = xs[k + 1] - xs[k];
    let t = (x - xs[k]) / h;
    let (m0, m1) = (slope(k), slope(k + 1));
    let t2 = t * t;
    let t3 = t2 * t;
    let two = S::lit(2.0);
    let three = S::lit(3.0);
    let h00 = two * t3 - three * t2 + S::one();
    let h10 = t3 - two * t2 + t;
    let h01 = three * t2 - two * t3;
    let h11 = t3 - t2;
    h00 * ys[k] + h10 * h * m0 + h01 * ys[k + 1] + h11 * h * m1
}

fn end_slope<S: Scalar>(h0: S, h1: S, d0: S, d1: S) -> S {
    let two = S::lit(2.0);
    let m = ((two * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if m * d0 <= S::zero() {
        S::zero()
    } else if d0 * d1 <= S::zero() && m.abs() > (S::lit(3.0) * d0).abs() {
        S::lit(3.0) * d0
    } else {
        m
    }
}

/// A function of two real arguments, written (x, q).
#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields, bound = "S: Scalar")]
pub enum BivariateFn<S: Scalar> {
    /// f(x) + g(q)
    Sum { x: ScalarFn<S>, q: ScalarFn<S> },
    /// offset + f(x)·g(q)
    Product {
        x: ScalarFn<S>,
        q: ScalarFn<S>,
        #[serde(default)]
        offset: S,
    },
    #[serde(skip)]
    Custom(BinaryClosure<S>),
}

impl<S: Scalar> fmt::Debug for BivariateFn<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BivariateFn::Sum { x, q } => write!(f, "Sum({x:?}, {q:?})"),
            BivariateFn::Product { x, q, offset } => write!(f, "Product({offset} + {x:?}·{q:?})"),
            BivariateFn::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl<S: Scalar> BivariateFn<S> {
    pub fn custom(f: impl Fn(S, S) -> S + Send + Sync + 'static) -> Self {
        BivariateFn::Custom(Arc::new(f))
    }

    pub fn eval(&self, x: S, q: S) -> S {
        match self {
            BivariateFn::Sum { x: f, q: g } => f.eval(x) + g.eval(q),
            BivariateFn::Product { x: f, q: g, offset } => *offset + f.eval(x) * g.eval(q),
            BivariateFn::Custom(f) => f(x, q),
        }
    }

    pub fn check(&self) -> Result<()> {
        match self {
            BivariateFn::Sum { x, q } => x.check().and(q.check()),
            BivariateFn::Product { x, q, offset } => {
                if !offset.is_finite() {
                    return invalid("product offset must be finite");
                }
                x.check().and(q.check())
            }
            BivariateFn::Custom(_) => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_values() {
        let p = ScalarFn::Power { a: 2.0, p: 1.0 };
        assert_eq!(p.eval(0.25), 0.5);
        let e = ScalarFn::ExpDecay { a: 1.0, rate: 2.0 };
        assert!((e.eval(1.0) - (-2.0f64).exp()).abs() < 1e-15);
        let k = BivariateFn::Product { x: e, q: ScalarFn::Affine { a: 1.2, b: 0.3 }, offset: 0.05 };
        assert!((k.eval(0.0, 1.0) - 1.55).abs() < 1e-15);
    }

    #[test]
    fn spline_interpolates_and_stays_monotone() {
        let xs: Vec<f64> = vec![0.0, 0.3, 0.5, 1.0];
        let ys: Vec<f64> = vec![0.0, 0.1, 0.8, 1.0];
        let s = ScalarFn::TabulatedSpline { x: xs.clone(), y: ys.clone() };
        for (x, y) in xs.iter().zip(&ys) {
            assert!((s.eval(*x) - y).abs() < 1e-14);
        }
        let mut prev = s.eval(0.0);
        for k in 1..=1000 {
            let v = s.eval(k as f64 / 1000.0);
            assert!(v >= prev - 1e-14);
            prev = v;
        }
        assert!(ScalarFn::TabulatedSpline { x: vec![0.0, 0.0], y: vec![1.0, 2.0] }.check().is_err());
    }

    #[test]
    fn json_catalog() {
        let f: ScalarFn<f64> = serde_json::from_str(r#"{"form":"power","a":2.0,"p":1.0}"#).unwrap();
        assert_eq!(f.eval(0.5), 1.0);
        assert!(serde_json::from_str::<ScalarFn<f64>>(r#"{"form":"power","a":2.0,"p":1.0,"z":0}"#).is_err());
        let k: BivariateFn<f64> =
            serde_json::from_str(r#"{"form":"product","x":{"form":"power","a":1,"p":1},"q":{"form":"affine","a":1,"b":1}}"#)
                .unwrap();
        assert_eq!(k.eval(0.5, 1.0), 1.0);
    }
}

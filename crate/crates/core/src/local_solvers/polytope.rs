use serde::{Deserialize, Serialize};

use crate::{Error, Matrix, Result, Vector};

/// `{ x : A_ineq x <= b_ineq, A_eq x = b_eq, lower <= x <= upper }`.
///
/// Bounds may be infinite; they serialize as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polytope {
    pub a_ineq: Matrix,
    pub b_ineq: Vector,
    pub a_eq: Matrix,
    pub b_eq: Vector,
    #[serde(with = "bounds_serde::lower")]
    pub lower: Vec<f64>,
    #[serde(with = "bounds_serde::upper")]
    pub upper: Vec<f64>,
}

impl Polytope {
    /// All of `R^n`.
    pub fn free(n: usize) -> Self {
        Polytope {
            a_ineq: Matrix::zeros(0, n),
            b_ineq: Vector::zeros(0),
            a_eq: Matrix::zeros(0, n),
            b_eq: Vector::zeros(0),
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::Dimension("box bounds differ in length".into()));
        }
        let mut p = Polytope::free(lower.len());
        p.lower = lower;
        p.upper = upper;
        p.validate()?;
        Ok(p)
    }

    pub fn unit_box(n: usize) -> Self {
        Polytope::boxed(vec![0.0; n], vec![1.0; n]).expect("unit box is valid")
    }

    /// `{ x >= 0, 1'x = 1 }`.
    pub fn unit_simplex(n: usize) -> Self {
        let mut p = Polytope::free(n);
        p.lower = vec![0.0; n];
        p.a_eq = Matrix::from_element(1, n, 1.0);
        p.b_eq = Vector::from_element(1, 1.0);
        p
    }

    pub fn with_ineq(mut self, a: Matrix, b: Vector) -> Result<Self> {
        self.a_ineq = a;
        self.b_ineq = b;
        self.validate()?;
        Ok(self)
    }

    pub fn with_eq(mut self, a: Matrix, b: Vector) -> Result<Self> {
        self.a_eq = a;
        self.b_eq = b;
        self.validate()?;
        Ok(self)
    }

    /// Appends one inequality row `a'x <= b`.
    pub fn push_ineq(&mut self, a: &[f64], b: f64) -> Result<()> {
        if a.len() != self.dim() {
            return Err(Error::Dimension("inequality row length".into()));
        }
        let m = self.a_ineq.nrows();
        self.a_ineq = std::mem::replace(&mut self.a_ineq, Matrix::zeros(0, 0)).insert_row(m, 0.0);
        for (j, v) in a.iter().enumerate() {
            self.a_ineq[(m, j)] = *v;
        }
        self.b_ineq = std::mem::replace(&mut self.b_ineq, Vector::zeros(0)).push(b);
        Ok(())
    }

    /// Appends one equality row `a'x = b`.
    pub fn push_eq(&mut self, a: &[f64], b: f64) -> Result<()> {
        if a.len() != self.dim() {
            return Err(Error::Dimension("equality row length".into()));
        }
        let m = self.a_eq.nrows();
        self.a_eq = std::mem::replace(&mut self.a_eq, Matrix::zeros(0, 0)).insert_row(m, 0.0);
        for (j, v) in a.iter().enumerate() {
            self.a_eq[(m, j)] = *v;
        }
        self.b_eq = std::mem::replace(&mut self.b_eq, Vector::zeros(0)).push(b);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn n_ineq(&self) -> usize {
        self.a_ineq.nrows()
    }

    pub fn n_eq(&self) -> usize {
        self.a_eq.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        if self.upper.len() != n
            || self.a_ineq.ncols() != n
            || self.a_eq.ncols() != n
            || self.a_ineq.nrows() != self.b_ineq.len()
            || self.a_eq.nrows() != self.b_eq.len()
        {
            return Err(Error::Dimension(format!(
                "polytope in R^{n} has inconsistent matrix shapes"
            )));
        }
        if let Some(j) = (0..n).find(|&j| self.lower[j] > self.upper[j]) {
            return Err(Error::Parameter(format!(
                "lower bound exceeds upper bound at coordinate {j}"
            )));
        }
        if self.lower.iter().any(|v| v.is_nan()) || self.upper.iter().any(|v| v.is_nan()) {
            return Err(Error::Parameter("NaN bound".into()));
        }
        Ok(())
    }

    /// Only bound constraints, no general rows.
    pub fn is_box(&self) -> bool {
        self.n_ineq() == 0 && self.n_eq() == 0
    }

    /// Finite on every coordinate.
    pub fn is_bounded_box(&self) -> bool {
        self.lower.iter().all(|v| v.is_finite()) && self.upper.iter().all(|v| v.is_finite())
    }

    /// Largest constraint violation at `x` (zero when feasible).
    pub fn violation(&self, x: &Vector) -> f64 {
        let mut worst = 0.0f64;
        for j in 0..self.dim() {
            worst = worst.max(self.lower[j] - x[j]).max(x[j] - self.upper[j]);
        }
        if self.n_ineq() > 0 {
            let r = &self.a_ineq * x - &self.b_ineq;
            worst = worst.max(r.max());
        }
        if self.n_eq() > 0 {
            let r = &self.a_eq * x - &self.b_eq;
            worst = worst.max(r.amax());
        }
        worst
    }

    pub fn contains(&self, x: &Vector, tol: f64) -> bool {
        x.len() == self.dim() && self.violation(x) <= tol
    }

    /// Cartesian product of several polytopes (block-diagonal stacking).
    pub fn product<'a>(parts: impl IntoIterator<Item = &'a Polytope>) -> Polytope {
        let parts: Vec<&Polytope> = parts.into_iter().collect();
        let n: usize = parts.iter().map(|p| p.dim()).sum();
        let mi: usize = parts.iter().map(|p| p.n_ineq()).sum();
        let me: usize = parts.iter().map(|p| p.n_eq()).sum();
        let mut out = Polytope {
            a_ineq: Matrix::zeros(mi, n),
            b_ineq: Vector::zeros(mi),
            a_eq: Matrix::zeros(me, n),
            b_eq: Vector::zeros(me),
            lower: Vec::with_capacity(n),
            upper: Vec::with_capacity(n),
        };
        let (mut col, mut ri, mut re) = (0, 0, 0);
        for p in parts {
            let d = p.dim();
            out.a_ineq
                .view_mut((ri, col), (p.n_ineq(), d))
                .copy_from(&p.a_ineq);
            out.b_ineq.rows_mut(ri, p.n_ineq()).copy_from(&p.b_ineq);
            out.a_eq.view_mut((re, col), (p.n_eq(), d)).copy_from(&p.a_eq);
            out.b_eq.rows_mut(re, p.n_eq()).copy_from(&p.b_eq);
            out.lower.extend_from_slice(&p.lower);
            out.upper.extend_from_slice(&p.upper);
            col += d;
            ri += p.n_ineq();
            re += p.n_eq();
        }
        out
    }
}

/// Infinite bounds serialize as `null`; the side is implied by the field.
mod bounds_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(|x| x.is_finite().then_some(*x))
            .collect::<Vec<_>>()
            .serialize(s)
    }

    fn read<'de, D: Deserializer<'de>>(d: D, missing: f64) -> Result<Vec<f64>, D::Error> {
        let opt: Vec<Option<f64>> = Vec::deserialize(d)?;
        Ok(opt.into_iter().map(|x| x.unwrap_or(missing)).collect())
    }

    pub mod lower {
        pub use super::serialize;
        pub fn deserialize<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
            super::read(d, f64::NEG_INFINITY)
        }
    }

    pub mod upper {
        pub use super::serialize;
        pub fn deserialize<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
            super::read(d, f64::INFINITY)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_keeps_infinite_bounds() {
        let mut p = Polytope::free(2);
        p.lower[0] = 0.0;
        let s = serde_json::to_string(&p).unwrap();
        let back: Polytope = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn product_stacks_blocks() {
        let a = Polytope::unit_simplex(2);
        let b = Polytope::unit_box(1);
        let p = Polytope::product([&a, &b]);
        assert_eq!(p.dim(), 3);
        assert_eq!(p.n_eq(), 1);
        assert!(p.contains(&Vector::from_vec(vec![0.5, 0.5, 1.0]), 1e-12));
        assert!(!p.contains(&Vector::from_vec(vec![0.5, 0.6, 1.0]), 1e-12));
    }

    #[test]
    fn push_rows() {
        let mut p = Polytope::unit_box(2);
        p.push_ineq(&[1.0, 1.0], 1.0).unwrap();
        p.push_eq(&[1.0, -1.0], 0.0).unwrap();
        assert_eq!((p.n_ineq(), p.n_eq()), (1, 1));
        assert!(p.contains(&Vector::from_vec(vec![0.5, 0.5]), 1e-12));
        assert!(p.push_ineq(&[1.0], 0.0).is_err());
    }

    #[test]
    fn inverted_box_rejected() {
        assert!(Polytope::boxed(vec![1.0], vec![0.0]).is_err());
    }
}

//! Sparse multivariate polynomials with `f64` coefficients.
//!
//! Blow-down maps and lifted infinitesimal generators of a linear action are
//! polynomial in projective chart coordinates, and stay polynomial under
//! further blow-ups because the division by the new exceptional coordinate is
//! exact on saturated centers.

use std::collections::BTreeMap;

/// Coefficients below this magnitude are dropped after arithmetic.
const DROP: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    nvars: usize,
    terms: BTreeMap<Vec<u16>, f64>,
}

impl Poly {
    pub fn zero(nvars: usize) -> Self {
        Poly { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        let mut p = Poly::zero(nvars);
        if c != 0.0 {
            p.terms.insert(vec![0; nvars], c);
        }
        p
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        let mut p = Poly::zero(nvars);
        p.terms.insert(e, 1.0);
        p
    }

    /// Linear form `sum_j coeffs[j] * x_j`.
    pub fn linear(coeffs: &[f64]) -> Self {
        let n = coeffs.len();
        let mut p = Poly::zero(n);
        for (j, &c) in coeffs.iter().enumerate() {
            if c != 0.0 {
                let mut e = vec![0; n];
                e[j] = 1;
                p.terms.insert(e, c);
            }
        }
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(|e| e.iter().map(|&x| x as usize).sum()).max().unwrap_or(0)
    }

    pub fn max_coeff(&self) -> f64 {
        self.terms.values().fold(0.0_f64, |a, b| a.max(b.abs()))
    }

    fn add_term(&mut self, e: Vec<u16>, c: f64) {
        let entry = self.terms.entry(e.clone()).or_insert(0.0);
        *entry += c;
        if entry.abs() <= DROP {
            self.terms.remove(&e);
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (e, &c) in &other.terms {
            out.add_term(e.clone(), c);
        }
        out
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Poly {
        let mut out = Poly::zero(self.nvars);
        if s != 0.0 {
            for (e, &c) in &self.terms {
                out.terms.insert(e.clone(), c * s);
            }
        }
        out
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero(self.nvars);
        for (ea, &ca) in &self.terms {
            for (eb, &cb) in &other.terms {
                let e: Vec<u16> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(e, ca * cb);
            }
        }
        out
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.nvars);
        let mut s = 0.0;
        for (e, &c) in &self.terms {
            let mut t = c;
            for (xi, &k) in x.iter().zip(e) {
                if k > 0 {
                    t *= xi.powi(k as i32);
                }
            }
            s += t;
        }
        s
    }

    pub fn deriv(&self, i: usize) -> Poly {
        let mut out = Poly::zero(self.nvars);
        for (e, &c) in &self.terms {
            if e[i] > 0 {
                let mut e2 = e.clone();
                e2[i] -= 1;
                out.add_term(e2, c * e[i] as f64);
            }
        }
        out
    }

    /// Substitutes variable `j` by `subs[j]`; the result lives in the
    /// variables of `subs`.
    pub fn compose(&self, subs: &[Poly]) -> Poly {
        assert_eq!(subs.len(), self.nvars);
        let m = subs.first().map(|p| p.nvars).unwrap_or(0);
        let mut out = Poly::zero(m);
        // cache powers per variable
        let maxdeg: Vec<u16> =
            (0..self.nvars).map(|j| self.terms.keys().map(|e| e[j]).max().unwrap_or(0)).collect();
        let powers: Vec<Vec<Poly>> = subs
            .iter()
            .zip(&maxdeg)
            .map(|(s, &d)| {
                let mut v = vec![Poly::constant(m, 1.0)];
                for k in 1..=d as usize {
                    let next = v[k - 1].mul(s);
                    v.push(next);
                }
                v
            })
            .collect();
        for (e, &c) in &self.terms {
            let mut t = Poly::constant(m, c);
            for (j, &k) in e.iter().enumerate() {
                if k > 0 {
                    t = t.mul(&powers[j][k as usize]);
                }
            }
            out = out.add(&t);
        }
        out
    }

    /// Exact division by variable `i`. Returns the quotient and the largest
    /// absolute coefficient of the discarded remainder (terms free of `x_i`).
    pub fn div_var(&self, i: usize) -> (Poly, f64) {
        let mut q = Poly::zero(self.nvars);
        let mut rem = 0.0_f64;
        for (e, &c) in &self.terms {
            if e[i] == 0 {
                rem = rem.max(c.abs());
            } else {
                let mut e2 = e.clone();
                e2[i] -= 1;
                q.terms.insert(e2, c);
            }
        }
        (q, rem)
    }

    /// Drops coefficients with magnitude at most `tol`.
    pub fn prune(&self, tol: f64) -> Poly {
        Poly { nvars: self.nvars, terms: self.terms.iter().filter(|(_, c)| c.abs() > tol).map(|(e, c)| (e.clone(), *c)).collect() }
    }
}

pub fn eval_all(ps: &[Poly], x: &[f64]) -> Vec<f64> {
    ps.iter().map(|p| p.eval(x)).collect()
}

/// Jacobian of a polynomial map, rows = outputs.
pub fn jacobian(ps: &[Poly], x: &[f64]) -> nalgebra::DMatrix<f64> {
    let n = x.len();
    let mut j = nalgebra::DMatrix::zeros(ps.len(), n);
    for (r, p) in ps.iter().enumerate() {
        for c in 0..n {
            j[(r, c)] = p.deriv(c).eval(x);
        }
    }
    j
}

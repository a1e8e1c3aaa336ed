//! Sparse multivariate polynomials over `BigRational`.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::scalar::C64;

type Q = BigRational;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Poly {
    nvars: usize,
    terms: BTreeMap<Vec<u32>, Q>,
}

impl Poly {
    pub fn zero(nvars: usize) -> Self {
        Poly {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: Q) -> Self {
        let mut p = Poly::zero(nvars);
        p.add_term(vec![0; nvars], c);
        p
    }

    pub fn one(nvars: usize) -> Self {
        Poly::constant(nvars, Q::one())
    }

    pub fn monomial(exps: Vec<u32>, c: Q) -> Self {
        let mut p = Poly::zero(exps.len());
        p.add_term(exps, c);
        p
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        Poly::monomial(e, Q::one())
    }

    /// `z_i - z_j`.
    pub fn diff(nvars: usize, i: usize, j: usize) -> Self {
        Poly::var(nvars, i).sub(&Poly::var(nvars, j))
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &Q)> {
        self.terms.iter()
    }

    pub fn coeff(&self, exps: &[u32]) -> Q {
        self.terms.get(exps).cloned().unwrap_or_else(Q::zero)
    }

    pub fn add_term(&mut self, exps: Vec<u32>, c: Q) {
        debug_assert_eq!(exps.len(), self.nvars);
        if c.is_zero() {
            return;
        }
        match self.terms.entry(exps) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), -c.clone());
        }
        out
    }

    pub fn scale(&self, c: &Q) -> Poly {
        if c.is_zero() {
            return Poly::zero(self.nvars);
        }
        Poly {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(e, x)| (e.clone(), x * c)).collect(),
        }
    }

    pub fn neg(&self) -> Poly {
        self.scale(&-Q::one())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero(self.nvars);
        for (e1, c1) in &self.terms {
            for (e2, c2) in &other.terms {
                let e: Vec<u32> = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                out.add_term(e, c1 * c2);
            }
        }
        out
    }

    pub fn pow(&self, n: u32) -> Poly {
        let mut out = Poly::one(self.nvars);
        for _ in 0..n {
            out = out.mul(self);
        }
        out
    }

    /// Multiplies by `z_i^n`.
    pub fn shift(&self, i: usize, n: u32) -> Poly {
        Poly {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .map(|(e, c)| {
                    let mut e = e.clone();
                    e[i] += n;
                    (e, c.clone())
                })
                .collect(),
        }
    }

    /// Largest power of `z_i` dividing the polynomial.
    pub fn min_degree_in(&self, i: usize) -> u32 {
        self.terms.keys().map(|e| e[i]).min().unwrap_or(0)
    }

    /// Divides by `z_i^n`; the caller guarantees divisibility.
    pub fn unshift(&self, i: usize, n: u32) -> Poly {
        Poly {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .map(|(e, c)| {
                    let mut e = e.clone();
                    e[i] -= n;
                    (e, c.clone())
                })
                .collect(),
        }
    }

    pub fn total_degree(&self) -> Option<u32> {
        self.terms.keys().map(|e| e.iter().sum()).max()
    }

    pub fn is_homogeneous(&self) -> bool {
        let mut degs = self.terms.keys().map(|e| e.iter().sum::<u32>());
        match degs.next() {
            None => true,
            Some(d) => degs.all(|x| x == d),
        }
    }

    /// `d/dz_i`.
    pub fn derivative(&self, i: usize) -> Poly {
        let mut out = Poly::zero(self.nvars);
        for (e, c) in &self.terms {
            if e[i] > 0 {
                let mut e2 = e.clone();
                e2[i] -= 1;
                out.add_term(e2, c * Q::from_integer(BigInt::from(e[i])));
            }
        }
        out
    }

    /// Exact division by `z_i - z_j`, or `None` when it does not divide.
    pub fn div_diff(&self, i: usize, j: usize) -> Option<Poly> {
        // view as a polynomial in z_i; synthetic division by the root z_j
        let mut by_deg: BTreeMap<u32, Poly> = BTreeMap::new();
        for (e, c) in &self.terms {
            let mut rest = e.clone();
            let d = rest[i];
            rest[i] = 0;
            by_deg
                .entry(d)
                .or_insert_with(|| Poly::zero(self.nvars))
                .add_term(rest, c.clone());
        }
        let Some((&top, _)) = by_deg.iter().next_back() else {
            return Some(Poly::zero(self.nvars));
        };
        let zj = Poly::var(self.nvars, j);
        let mut quotient = Poly::zero(self.nvars);
        let mut carry = Poly::zero(self.nvars);
        for d in (0..=top).rev() {
            let c = by_deg.remove(&d).unwrap_or_else(|| Poly::zero(self.nvars));
            let value = c.add(&carry);
            if d == 0 {
                return if value.is_zero() { Some(quotient) } else { None };
            }
            quotient = quotient.add(&value.shift(i, d - 1));
            carry = value.mul(&zj);
        }
        unreachable!()
    }

    /// Renames variable `i` to `map[i]`.
    pub fn relabel(&self, map: &[usize]) -> Poly {
        Poly {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .map(|(e, c)| {
                    let mut e2 = vec![0; self.nvars];
                    for (i, &x) in e.iter().enumerate() {
                        e2[map[i]] = x;
                    }
                    (e2, c.clone())
                })
                .collect(),
        }
    }

    pub fn eval(&self, z: &[C64]) -> C64 {
        let maxdeg = self
            .terms
            .keys()
            .flat_map(|e| e.iter().copied())
            .max()
            .unwrap_or(0) as usize;
        let powers: Vec<Vec<C64>> = z
            .iter()
            .map(|&zi| {
                let mut p = Vec::with_capacity(maxdeg + 1);
                let mut acc = C64::new(1.0, 0.0);
                for _ in 0..=maxdeg {
                    p.push(acc);
                    acc *= zi;
                }
                p
            })
            .collect();
        let mut total = C64::new(0.0, 0.0);
        for (e, c) in &self.terms {
            let mut t = C64::new(num_traits::ToPrimitive::to_f64(c).unwrap_or(f64::NAN), 0.0);
            for (i, &x) in e.iter().enumerate() {
                t *= powers[i][x as usize];
            }
            total += t;
        }
        total
    }

    pub fn eval_exact(&self, z: &[Q]) -> Q {
        let mut total = Q::zero();
        for (e, c) in &self.terms {
            let mut t = c.clone();
            for (i, &x) in e.iter().enumerate() {
                t *= num_traits::pow(z[i].clone(), x as usize);
            }
            total += t;
        }
        total
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({c})")?;
            for (i, &x) in e.iter().enumerate() {
                match x {
                    0 => {}
                    1 => write!(f, "*z{}", i + 1)?,
                    _ => write!(f, "*z{}^{x}", i + 1)?,
                }
            }
        }
        Ok(())
    }
}

//! Floating evaluation of `Q(u1,...,uk, v; z1,...,zk)` by Wick contraction.
//!
//! Each insertion `a[-l1]...a[-lm]|0>` is the normal ordered product of the
//! fields `phi_{l-1}(z)`. Fields of different insertions contract to
//! `(-1)^a (a+b+1)!/(a! b!) (z_i - z_j)^{-(a+b+2)}`; whatever is left acts on
//! `v` in normal order, annihilators first.

use std::sync::{Arc, OnceLock};

use num_traits::Zero;
use parking_lot::RwLock;
use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::graded::{partitions_up_to, GradedVector, Partition, Sector};
use crate::scalar::C64;

/// `binom(n, k)` for integer `n` (possibly negative) as a float.
pub(crate) fn binom_f(n: i64, k: i64) -> f64 {
    if k < 0 {
        return 0.0;
    }
    let mut acc = 1.0;
    for i in 0..k {
        acc *= (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(|x| x as f64).product()
}

/// Contraction of `phi_a(z_i)` (left) with `phi_b(z_j)` (right).
pub fn contraction(a: u32, b: u32, zi: C64, zj: C64) -> C64 {
    let sign = if a % 2 == 0 { 1.0 } else { -1.0 };
    let c = sign * factorial(a + b + 1) / (factorial(a) * factorial(b));
    (zi - zj).powi(-((a + b + 2) as i32)) * c
}

/// Membership in the configuration space `M^k`, with an absolute tolerance.
pub fn check_configuration(z: &[C64], tol: f64) -> Result<()> {
    for (i, zi) in z.iter().enumerate() {
        if !(zi.norm() > tol) || !zi.re.is_finite() || !zi.im.is_finite() {
            return Err(Error::NotInConfigurationSpace(format!("{z:?}: z{} = 0", i + 1)));
        }
        for (j, zj) in z.iter().enumerate().skip(i + 1) {
            if !((zi - zj).norm() > tol) {
                return Err(Error::NotInConfigurationSpace(format!(
                    "{z:?}: z{} = z{}",
                    i + 1,
                    j + 1
                )));
            }
        }
    }
    Ok(())
}

/// Membership in `M^k_{<1}`.
pub fn check_unit_configuration(z: &[C64], tol: f64) -> Result<()> {
    check_configuration(z, tol)?;
    if let Some(zi) = z.iter().find(|zi| zi.norm() >= 1.0) {
        return Err(Error::NotInConfigurationSpace(format!(
            "{z:?}: |{zi}| >= 1"
        )));
    }
    Ok(())
}

pub const POINT_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug)]
struct Field {
    slot: usize,
    deriv: u32,
}

// fixed hasher: iteration order, hence summation order, is reproducible
type Sparse = FxHashMap<Partition, C64>;

fn add(acc: &mut Sparse, p: Partition, c: C64) {
    if c.is_zero() {
        return;
    }
    *acc.entry(p).or_insert_with(C64::zero) += c;
}

/// `phi^-_a(z) = sum_{n>=0} binom(-n-1, a) z^{-n-1-a} a(n)` on a vector.
fn annihilate(w: &Sparse, a: u32, z: C64, p: f64) -> Sparse {
    let mut out = Sparse::default();
    for (part, c) in w {
        if p != 0.0 {
            let coef = binom_f(-1, a as i64) * z.powi(-1 - a as i32) * p;
            add(&mut out, part.clone(), *c * coef);
        }
        let mut distinct: Vec<u32> = part.parts().to_vec();
        distinct.dedup();
        for n in distinct {
            let mult = part.multiplicity(n) as f64;
            let rest = part.without_part(n).expect("part present");
            let coef = binom_f(-(n as i64) - 1, a as i64) * z.powi(-(n as i32) - 1 - a as i32) * (mult * n as f64);
            add(&mut out, rest, *c * coef);
        }
    }
    out
}

/// `phi^+_a(z) = sum_{m>=a+1} binom(m-1, a) z^{m-1-a} a(-m)`, output levels
/// capped at `max_level`.
fn create(w: &Sparse, a: u32, z: C64, max_level: u32) -> Sparse {
    let mut out = Sparse::default();
    for (part, c) in w {
        let lv = part.level();
        let mut m = a + 1;
        let mut zpow = C64::new(1.0, 0.0);
        while lv + m <= max_level {
            let coef = binom_f(m as i64 - 1, a as i64);
            add(&mut out, part.with_part(m), *c * zpow * coef);
            zpow *= z;
            m += 1;
        }
    }
    out
}

/// `:phi...phi: v` for the uncontracted fields.
fn normal_ordered(fields: &[Field], z: &[C64], v: &Sparse, p: f64, max_level: u32) -> Sparse {
    let r = fields.len();
    let mut total = Sparse::default();
    for mask in 0u64..(1u64 << r) {
        // fields in the mask act through their annihilator parts
        let mut w = v.clone();
        for (t, f) in fields.iter().enumerate() {
            if mask >> t & 1 == 1 {
                w = annihilate(&w, f.deriv, z[f.slot], p);
                if w.is_empty() {
                    break;
                }
            }
        }
        if w.is_empty() {
            continue;
        }
        for (t, f) in fields.iter().enumerate() {
            if mask >> t & 1 == 0 {
                w = create(&w, f.deriv, z[f.slot], max_level);
            }
        }
        for (part, c) in w {
            add(&mut total, part, c);
        }
    }
    total
}

/// Levels up to this use dense vectors indexed by a cached partition table.
const DENSE_MAX_LEVEL: u32 = 30;

/// All partitions of level `<= max`, with the index moves made by adding or
/// removing one part.
struct Table {
    parts: Vec<Partition>,
    index: FxHashMap<Partition, usize>,
    /// `up[i][m - 1]`: index of partition `i` with a part `m` added.
    up: Vec<Vec<usize>>,
    /// `(n, multiplicity, index without one n)` for each distinct part.
    down: Vec<Vec<(u32, u32, usize)>>,
}

impl Table {
    fn new(max: u32) -> Self {
        let parts = partitions_up_to(max);
        let index: FxHashMap<Partition, usize> = parts.iter().cloned().enumerate().map(|(i, p)| (p, i)).collect();
        let up = parts
            .iter()
            .map(|p| (1..=max - p.level()).map(|m| index[&p.with_part(m)]).collect())
            .collect();
        let down = parts
            .iter()
            .map(|p| {
                let mut distinct = p.parts().to_vec();
                distinct.dedup();
                distinct
                    .into_iter()
                    .map(|n| (n, p.multiplicity(n), index[&p.without_part(n).expect("part present")]))
                    .collect()
            })
            .collect();
        Table { parts, index, up, down }
    }

    fn get(max: u32) -> Arc<Table> {
        static CACHE: OnceLock<RwLock<FxHashMap<u32, Arc<Table>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        if let Some(t) = cache.read().get(&max) {
            return t.clone();
        }
        cache.write().entry(max).or_insert_with(|| Arc::new(Table::new(max))).clone()
    }
}

/// Dense values over a table with the list of touched indices, so that
/// clearing costs only what was written.
struct Buf {
    vals: Vec<C64>,
    touched: Vec<usize>,
    seen: Vec<bool>,
}

impl Buf {
    fn new(n: usize) -> Self {
        Buf {
            vals: vec![C64::zero(); n],
            touched: Vec::new(),
            seen: vec![false; n],
        }
    }

    fn add(&mut self, i: usize, c: C64) {
        if !self.seen[i] {
            self.seen[i] = true;
            self.touched.push(i);
        }
        self.vals[i] += c;
    }

    fn clear(&mut self) {
        for i in self.touched.drain(..) {
            self.vals[i] = C64::zero();
            self.seen[i] = false;
        }
    }

    fn copy_from(&mut self, other: &Buf) {
        self.clear();
        for &i in &other.touched {
            self.add(i, other.vals[i]);
        }
    }

    fn is_zero(&self) -> bool {
        self.touched.iter().all(|&i| self.vals[i].is_zero())
    }
}

fn annihilate_dense(t: &Table, w: &Buf, out: &mut Buf, a: u32, z: C64, p: f64) {
    out.clear();
    for &i in &w.touched {
        let c = w.vals[i];
        if c.is_zero() {
            continue;
        }
        if p != 0.0 {
            out.add(i, c * (binom_f(-1, a as i64) * p) * z.powi(-1 - a as i32));
        }
        for &(n, mult, j) in &t.down[i] {
            let coef = binom_f(-(n as i64) - 1, a as i64) * (mult * n) as f64;
            out.add(j, c * coef * z.powi(-(n as i32) - 1 - a as i32));
        }
    }
}

fn create_dense(t: &Table, w: &Buf, out: &mut Buf, a: u32, z: C64, max_level: u32) {
    out.clear();
    for &i in &w.touched {
        let c = w.vals[i];
        if c.is_zero() {
            continue;
        }
        let lv = t.parts[i].level();
        let mut zpow = c;
        let mut m = a + 1;
        while lv + m <= max_level {
            out.add(t.up[i][m as usize - 1], zpow * binom_f(m as i64 - 1, a as i64));
            zpow *= z;
            m += 1;
        }
    }
}

struct Scratch {
    a: Buf,
    b: Buf,
}

#[allow(clippy::too_many_arguments)]
fn normal_ordered_dense(
    t: &Table,
    fields: &[Field],
    z: &[C64],
    v: &Buf,
    p: f64,
    max_level: u32,
    coef: C64,
    s: &mut Scratch,
    total: &mut Buf,
) {
    let r = fields.len();
    for mask in 0u64..(1u64 << r) {
        s.a.copy_from(v);
        for (k, f) in fields.iter().enumerate() {
            if mask >> k & 1 == 1 {
                annihilate_dense(t, &s.a, &mut s.b, f.deriv, z[f.slot], p);
                std::mem::swap(&mut s.a, &mut s.b);
            }
        }
        if s.a.is_zero() {
            continue;
        }
        for (k, f) in fields.iter().enumerate() {
            if mask >> k & 1 == 0 {
                create_dense(t, &s.a, &mut s.b, f.deriv, z[f.slot], max_level);
                std::mem::swap(&mut s.a, &mut s.b);
            }
        }
        for &i in &s.a.touched {
            total.add(i, s.a.vals[i] * coef);
        }
    }
}

/// Uncontracted field sets keyed as sorted `(slot, deriv)` lists; fields of
/// a free boson normal order the same way in any order.
type Leaves = FxHashMap<Vec<(usize, u32)>, C64>;

fn wick_sum(fields: &mut Vec<Field>, z: &[C64], coef: C64, remaining: &mut Vec<Field>, out: &mut Leaves) {
    let Some(first) = fields.first().copied() else {
        let mut key: Vec<(usize, u32)> = remaining.iter().map(|f| (f.slot, f.deriv)).collect();
        key.sort_unstable();
        *out.entry(key).or_insert_with(C64::zero) += coef;
        return;
    };
    fields.remove(0);
    // leave `first` uncontracted
    remaining.push(first);
    wick_sum(fields, z, coef, remaining, out);
    remaining.pop();
    // contract with a later field of a different insertion
    for idx in 0..fields.len() {
        let other = fields[idx];
        if other.slot == first.slot {
            continue;
        }
        let (l, r) = if first.slot < other.slot {
            (first, other)
        } else {
            (other, first)
        };
        let c = contraction(l.deriv, r.deriv, z[l.slot], z[r.slot]);
        fields.remove(idx);
        wick_sum(fields, z, coef * c, remaining, out);
        fields.insert(idx, other);
    }
    fields.insert(0, first);
}

/// Weight components up to level `max_level` of `Q(us, v; z)`, all fields
/// Wick-contracted in floating point.
pub fn q_free_field(
    us: &[GradedVector<C64>],
    v: &GradedVector<C64>,
    z: &[C64],
    max_level: u32,
) -> Result<GradedVector<C64>> {
    if us.len() != z.len() {
        return Err(Error::ArityMismatch {
            expected: us.len(),
            found: z.len(),
        });
    }
    for u in us {
        if !u.sector().is_vacuum() {
            return Err(Error::AlgebraSectorRequired(u.sector()));
        }
    }
    check_configuration(z, POINT_TOLERANCE)?;
    let sector: Sector = v.sector();
    let p = num_traits::ToPrimitive::to_f64(&sector.zero_mode()).unwrap_or(f64::NAN);
    let vsparse: Sparse = v.terms().map(|(p, c)| (p.clone(), *c)).collect();
    // expand multilinearly over the basis terms of the insertions
    let mut combos: Vec<(Vec<Field>, C64)> = vec![(Vec::new(), C64::new(1.0, 0.0))];
    for (slot, u) in us.iter().enumerate() {
        let mut next = Vec::new();
        for (fields, c) in &combos {
            for (part, x) in u.terms() {
                let mut f = fields.clone();
                f.extend(part.parts().iter().map(|&l| Field { slot, deriv: l - 1 }));
                next.push((f, *c * *x));
            }
        }
        combos = next;
    }
    let mut leaves = Leaves::default();
    for (mut fields, c) in combos {
        let mut remaining = Vec::new();
        wick_sum(&mut fields, z, c, &mut remaining, &mut leaves);
    }
    // sorted so that the summation order does not depend on hashing
    let mut leaves: Vec<_> = leaves.into_iter().collect();
    leaves.sort_unstable_by(|a, b| a.0.cmp(&b.0));
    let leaves = leaves.into_iter().filter(|(_, c)| !c.is_zero()).map(|(key, c)| {
        let fields: Vec<Field> = key.into_iter().map(|(slot, deriv)| Field { slot, deriv }).collect();
        (fields, c)
    });
    let top = vsparse.keys().map(Partition::level).max().unwrap_or(0).max(max_level);
    if top <= DENSE_MAX_LEVEL {
        let t = Table::get(top);
        let n = t.parts.len();
        let mut vd = Buf::new(n);
        for (part, c) in &vsparse {
            vd.add(t.index[part], *c);
        }
        let mut scratch = Scratch {
            a: Buf::new(n),
            b: Buf::new(n),
        };
        let mut total = Buf::new(n);
        for (fields, c) in leaves {
            normal_ordered_dense(&t, &fields, z, &vd, p, max_level, c, &mut scratch, &mut total);
        }
        return Ok(GradedVector::from_terms(
            sector,
            total
                .touched
                .iter()
                .map(|&i| (&t.parts[i], total.vals[i]))
                .filter(|(part, c)| part.level() <= max_level && !c.is_zero())
                .map(|(part, c)| (part.clone(), c)),
        ));
    }
    let mut out = Sparse::default();
    for (fields, c) in leaves {
        for (part, x) in normal_ordered(&fields, z, &vsparse, p, max_level) {
            add(&mut out, part, x * c);
        }
    }
    Ok(GradedVector::from_terms(
        sector,
        out.into_iter().filter(|(p, _)| p.level() <= max_level),
    ))
}

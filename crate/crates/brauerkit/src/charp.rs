//! Additive semilinear operators on truncated polynomial and Laurent
//! modules over F_p, finite residue fields, and the Čech complex of
//! punctured affine space.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::abelian::{homology, FgAbGroup, GroupHom, IntMatrix};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruncatedCharPModule {
    pub p: u64,
    pub lo: i64,
    pub hi: i64,
    pub laurent: bool,
}

impl TruncatedCharPModule {
    pub fn polynomial(p: u64, hi: i64) -> Result<Self> {
        Self::new(p, 0, hi, false)
    }

    pub fn laurent(p: u64, lo: i64, hi: i64) -> Result<Self> {
        Self::new(p, lo, hi, true)
    }

    pub fn new(p: u64, lo: i64, hi: i64, laurent: bool) -> Result<Self> {
        if p != 2 && p != 3 {
            return Err(Error::Invalid(format!("characteristic {p} not supported")));
        }
        if lo > 0 || hi < 0 {
            return Err(Error::Invalid(format!("window [{lo},{hi}] must contain 0")));
        }
        if !laurent && lo != 0 {
            return Err(Error::Invalid("polynomial windows start at degree 0".into()));
        }
        Ok(TruncatedCharPModule { p, lo, hi, laurent })
    }

    pub fn dim(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }

    /// Same kind of module with both ends pushed out by a factor of two.
    pub fn doubled(&self) -> Self {
        TruncatedCharPModule {
            lo: self.lo * 2,
            hi: self.hi * 2,
            ..*self
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Term {
    pub coef: u64,
    pub jpow: i64,
    pub frob: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemilinearOperator {
    pub p: u64,
    pub terms: Vec<Term>,
}

impl SemilinearOperator {
    /// Merges like terms and drops zero coefficients.
    pub fn new(p: u64, terms: Vec<Term>) -> Result<Self> {
        let mut merged: BTreeMap<(u32, i64), u64> = BTreeMap::new();
        for t in terms {
            *merged.entry((t.frob, t.jpow)).or_insert(0) += t.coef % p;
        }
        let terms: Vec<Term> = merged
            .into_iter()
            .filter(|(_, c)| c % p != 0)
            .map(|((frob, jpow), c)| Term {
                coef: c % p,
                jpow,
                frob,
            })
            .collect();
        if terms.is_empty() {
            return Err(Error::Invalid("operator has no nonzero terms".into()));
        }
        Ok(SemilinearOperator { p, terms })
    }

    pub fn identity(p: u64) -> Self {
        SemilinearOperator::new(
            p,
            vec![Term {
                coef: 1,
                jpow: 0,
                frob: 0,
            }],
        )
        .unwrap()
    }

    /// Parses strings like `x + j*x^2`, `x - x^3`, `2*j^-1*x^9`.
    pub fn parse(p: u64, s: &str) -> Result<Self> {
        let err = |m: &str| Error::Parse(format!("operator `{s}`: {m}"));
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if compact.is_empty() {
            return Err(err("empty"));
        }
        let mut pieces: Vec<(bool, String)> = Vec::new();
        let mut cur = String::new();
        let mut neg = false;
        let mut prev: Option<char> = None;
        for c in compact.chars() {
            let exponent_sign = prev == Some('^');
            if (c == '+' || c == '-') && !exponent_sign {
                if !cur.is_empty() {
                    pieces.push((neg, std::mem::take(&mut cur)));
                } else if prev.is_some() && prev != Some('+') && prev != Some('-') {
                    return Err(err("dangling sign"));
                }
                neg = c == '-';
            } else {
                cur.push(c);
            }
            prev = Some(c);
        }
        if cur.is_empty() {
            return Err(err("trailing sign"));
        }
        pieces.push((neg, cur));

        let mut terms = Vec::new();
        for (neg, body) in pieces {
            let mut coef: i64 = 1;
            let mut jpow = 0i64;
            let mut var_pow: Option<u64> = None;
            for factor in body.split('*') {
                if factor.is_empty() {
                    return Err(err("empty factor"));
                }
                let (base, exp) = match factor.split_once('^') {
                    Some((b, e)) => (b, Some(e)),
                    None => (factor, None),
                };
                match base {
                    "j" => {
                        let e: i64 = match exp {
                            Some(e) => e.parse().map_err(|_| err("bad j exponent"))?,
                            None => 1,
                        };
                        jpow += e;
                    }
                    "x" | "z" | "f" => {
                        if var_pow.is_some() {
                            return Err(err("variable repeated in a term"));
                        }
                        let m: u64 = match exp {
                            Some(e) => e.parse().map_err(|_| err("bad variable exponent"))?,
                            None => 1,
                        };
                        var_pow = Some(m);
                    }
                    num => {
                        if exp.is_some() {
                            return Err(err("exponent on a coefficient"));
                        }
                        coef *= num.parse::<i64>().map_err(|_| err("bad coefficient"))?;
                    }
                }
            }
            let m = var_pow.ok_or_else(|| err("term without the variable"))?;
            let mut frob = 0u32;
            let mut q = 1u64;
            while q < m {
                q *= p;
                frob += 1;
            }
            if q != m {
                return Err(err(&format!("exponent {m} is not a power of {p}")));
            }
            if neg {
                coef = -coef;
            }
            terms.push(Term {
                coef: coef.rem_euclid(p as i64) as u64,
                jpow,
                frob,
            });
        }
        SemilinearOperator::new(p, terms)
    }

    fn image_degree(&self, t: &Term, d: i64) -> i64 {
        t.jpow + d * (self.p.pow(t.frob) as i64)
    }

    /// The monomial j^d mapped through the operator.
    pub fn apply_monomial(&self, d: i64) -> Laurent {
        let mut out = Laurent::zero(self.p);
        for t in &self.terms {
            out.add_term(self.image_degree(t, d), t.coef);
        }
        out
    }

    /// Applies the operator to an arbitrary element by direct polynomial
    /// arithmetic (Frobenius as repeated p-th powering).
    pub fn apply(&self, f: &Laurent) -> Laurent {
        let mut out = Laurent::zero(self.p);
        for t in &self.terms {
            let mut g = f.clone();
            for _ in 0..t.frob {
                g = g.pow(self.p);
            }
            out = out.add(&g.shift(t.jpow).scale(t.coef));
        }
        out
    }

    fn top_dominant(&self) -> Term {
        *self.terms.iter().max_by_key(|t| (t.frob, t.jpow)).unwrap()
    }

    fn bottom_dominant(&self) -> Term {
        *self.terms.iter().max_by_key(|t| (t.frob, -t.jpow)).unwrap()
    }

    /// Largest degree d at which the top term fails to dominate, if any.
    fn top_failure(&self) -> Option<i64> {
        let dom = self.top_dominant();
        let pe = self.p.pow(dom.frob) as i64;
        self.terms
            .iter()
            .filter(|t| **t != dom && t.frob < dom.frob)
            .map(|t| (t.jpow - dom.jpow).div_euclid(pe - self.p.pow(t.frob) as i64))
            .max()
    }

    /// Smallest degree d at which the bottom term fails to dominate, if any.
    fn bottom_failure(&self) -> Option<i64> {
        let dom = self.bottom_dominant();
        let pe = self.p.pow(dom.frob) as i64;
        self.terms
            .iter()
            .filter(|t| **t != dom && t.frob < dom.frob)
            .map(|t| {
                let num = t.jpow - dom.jpow;
                let den = pe - self.p.pow(t.frob) as i64;
                -((-num).div_euclid(den))
            })
            .min()
    }

    /// Degrees whose image stays inside the window.
    fn domain(&self, m: &TruncatedCharPModule) -> Option<(i64, i64)> {
        let ok = |d: i64| {
            self.terms.iter().all(|t| {
                let e = self.image_degree(t, d);
                e >= m.lo && e <= m.hi
            })
        };
        let ds: Vec<i64> = (m.lo..=m.hi).filter(|&d| ok(d)).collect();
        Some((*ds.first()?, *ds.last()?))
    }
}

impl fmt::Display for SemilinearOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for t in &self.terms {
            let (sign, c) = if self.p == 3 && t.coef == 2 {
                ("-", 1)
            } else {
                ("+", t.coef)
            };
            if first {
                if sign == "-" {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            first = false;
            if c != 1 {
                write!(f, "{c}*")?;
            }
            match t.jpow {
                0 => {}
                1 => write!(f, "j*")?,
                k => write!(f, "j^{k}*")?,
            }
            match self.p.pow(t.frob) {
                1 => write!(f, "x")?,
                m => write!(f, "x^{m}")?,
            }
        }
        Ok(())
    }
}

/// A Laurent polynomial in j over F_p, stored sparsely.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Laurent {
    pub p: u64,
    pub coeffs: BTreeMap<i64, u64>,
}

impl Laurent {
    pub fn zero(p: u64) -> Self {
        Laurent {
            p,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn monomial(p: u64, d: i64) -> Self {
        let mut l = Self::zero(p);
        l.add_term(d, 1);
        l
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn add_term(&mut self, d: i64, c: u64) {
        let e = self.coeffs.entry(d).or_insert(0);
        *e = (*e + c) % self.p;
        if *e == 0 {
            self.coeffs.remove(&d);
        }
    }

    pub fn add(&self, other: &Laurent) -> Laurent {
        let mut out = self.clone();
        for (&d, &c) in &other.coeffs {
            out.add_term(d, c);
        }
        out
    }

    pub fn scale(&self, c: u64) -> Laurent {
        let mut out = Laurent::zero(self.p);
        for (&d, &a) in &self.coeffs {
            out.add_term(d, a * c);
        }
        out
    }

    pub fn shift(&self, k: i64) -> Laurent {
        Laurent {
            p: self.p,
            coeffs: self.coeffs.iter().map(|(&d, &c)| (d + k, c)).collect(),
        }
    }

    pub fn mul(&self, other: &Laurent) -> Laurent {
        let mut out = Laurent::zero(self.p);
        for (&a, &x) in &self.coeffs {
            for (&b, &y) in &other.coeffs {
                out.add_term(a + b, x * y);
            }
        }
        out
    }

    pub fn pow(&self, n: u64) -> Laurent {
        let mut out = Laurent::monomial(self.p, 0);
        for _ in 0..n {
            out = out.mul(self);
        }
        out
    }

    pub fn min_degree(&self) -> Option<i64> {
        self.coeffs.keys().next().copied()
    }

    pub fn max_degree(&self) -> Option<i64> {
        self.coeffs.keys().next_back().copied()
    }
}

impl fmt::Display for Laurent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .coeffs
            .iter()
            .map(|(&d, &c)| {
                let mono = monomial_name(d);
                if c == 1 {
                    mono
                } else if d == 0 {
                    format!("{c}")
                } else {
                    format!("{c}*{mono}")
                }
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

pub fn monomial_name(d: i64) -> String {
    match d {
        0 => "1".into(),
        1 => "j".into(),
        d => format!("j^{d}"),
    }
}

/// Row reduction over F_p. Rows are reduced in place into echelon form with
/// pivots chosen in the given column order; returns the pivot columns.
fn row_reduce(rows: &mut Vec<Vec<u64>>, p: u64, col_order: &[usize]) -> Vec<usize> {
    let inv = |a: u64| -> u64 { (1..p).find(|&b| a * b % p == 1).unwrap() };
    let mut pivots = Vec::new();
    let mut r = 0;
    for &c in col_order {
        let Some(k) = (r..rows.len()).find(|&k| rows[k][c] != 0) else {
            continue;
        };
        rows.swap(r, k);
        let s = inv(rows[r][c]);
        for v in rows[r].iter_mut() {
            *v = *v * s % p;
        }
        for k in 0..rows.len() {
            if k != r && rows[k][c] != 0 {
                let f = rows[k][c];
                for idx in 0..rows[k].len() {
                    let sub = f * rows[r][idx] % p;
                    rows[k][idx] = (rows[k][idx] + p - sub) % p;
                }
            }
        }
        pivots.push(c);
        r += 1;
        if r == rows.len() {
            break;
        }
    }
    rows.truncate(r);
    pivots
}

/// Null space of the linear map whose columns are `cols` (vectors of length
/// `n`), over F_p. Returned vectors are in reduced form with distinct
/// highest nonzero coordinates.
fn null_space(cols: &[Vec<u64>], n: usize, p: u64) -> Vec<Vec<u64>> {
    let k = cols.len();
    let mut rows: Vec<Vec<u64>> = (0..n).map(|i| (0..k).map(|j| cols[j][i]).collect()).collect();
    let order: Vec<usize> = (0..k).rev().collect();
    let pivots = row_reduce(&mut rows, p, &order);
    let free: Vec<usize> = (0..k).filter(|c| !pivots.contains(c)).collect();
    let mut basis = Vec::new();
    for &fcol in &free {
        let mut v = vec![0u64; k];
        v[fcol] = 1;
        for (row, &pc) in rows.iter().zip(&pivots) {
            v[pc] = (p - row[fcol]) % p;
        }
        basis.push(v);
    }
    // Echelon by top coordinate, reported in increasing top degree.
    let mut b = basis;
    let order: Vec<usize> = (0..k).rev().collect();
    row_reduce(&mut b, p, &order);
    b.sort_by_key(|v| v.iter().rposition(|&x| x != 0));
    b
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct KernelResult {
    #[serde(serialize_with = "ser_laurents")]
    pub basis: Vec<Laurent>,
    pub stabilized: bool,
    pub domain: (i64, i64),
    pub certified_range: Option<(i64, i64)>,
}

fn ser_laurents<S: serde::Serializer>(v: &[Laurent], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::Serialize;
    v.iter().map(|l| l.to_string()).collect::<Vec<_>>().serialize(s)
}

impl KernelResult {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis_strings(&self) -> Vec<String> {
        self.basis.iter().map(|l| l.to_string()).collect()
    }
}

fn check_p(op: &SemilinearOperator, m: &TruncatedCharPModule) -> Result<()> {
    if op.p != m.p {
        return Err(Error::Invalid(format!(
            "operator over F_{} applied to module over F_{}",
            op.p, m.p
        )));
    }
    Ok(())
}

/// Degree interval that must contain every kernel element, when finite.
fn kernel_support(op: &SemilinearOperator, m: &TruncatedCharPModule) -> (Option<i64>, Option<i64>) {
    let top = op.top_failure();
    let bottom = if m.laurent { op.bottom_failure() } else { Some(0) };
    (bottom, top)
}

pub fn operator_kernel(op: &SemilinearOperator, m: &TruncatedCharPModule) -> Result<KernelResult> {
    check_p(op, m)?;
    let (dlo, dhi) = op.domain(m).ok_or_else(|| {
        Error::WindowTooSmall(format!(
            "no degree in [{},{}] has its image inside the window",
            m.lo, m.hi
        ))
    })?;
    let n = m.dim();
    let cols: Vec<Vec<u64>> = (dlo..=dhi)
        .map(|d| {
            let mut v = vec![0u64; n];
            for (&e, &c) in &op.apply_monomial(d).coeffs {
                v[(e - m.lo) as usize] = c;
            }
            v
        })
        .collect();
    let basis: Vec<Laurent> = null_space(&cols, n, m.p)
        .into_iter()
        .map(|v| {
            let mut l = Laurent::zero(m.p);
            for (i, &c) in v.iter().enumerate() {
                if c != 0 {
                    l.add_term(dlo + i as i64, c);
                }
            }
            l
        })
        .collect();
    let (bottom, top) = kernel_support(op, m);
    let (certified_range, stabilized) = match (bottom, top) {
        (Some(b), Some(t)) => {
            let b = b.max(m.lo);
            if t < b {
                (Some((b, t)), true)
            } else {
                (Some((b, t)), b >= dlo && t <= dhi)
            }
        }
        (Some(b), None) => (Some((b, b - 1)), true),
        (None, _) => (None, false),
    };
    Ok(KernelResult {
        basis,
        stabilized,
        domain: (dlo, dhi),
        certified_range,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CokernelResult {
    /// Degrees of the monomial representatives, increasing.
    pub basis: Vec<i64>,
    pub stable_prefix_degree: i64,
    pub stable_floor_degree: i64,
}

impl CokernelResult {
    pub fn basis_strings(&self) -> Vec<String> {
        self.basis.iter().map(|&d| monomial_name(d)).collect()
    }
}

pub fn operator_cokernel_basis(op: &SemilinearOperator, m: &TruncatedCharPModule) -> Result<CokernelResult> {
    check_p(op, m)?;
    let (dlo, dhi) = op.domain(m).ok_or_else(|| {
        Error::WindowTooSmall(format!(
            "no degree in [{},{}] has its image inside the window",
            m.lo, m.hi
        ))
    })?;
    let p = m.p as i64;
    let top = op.top_dominant();
    if let Some(t) = op.top_failure() {
        if t > dhi {
            return Err(Error::WindowTooSmall(format!(
                "top dominance fails up to degree {t}, beyond the domain end {dhi}"
            )));
        }
    }
    let pe = p.pow(top.frob);
    let prefix = ((dhi + 1) * pe + top.jpow - 1).min(m.hi);
    let floor = if m.laurent {
        let bot = op.bottom_dominant();
        if let Some(b) = op.bottom_failure() {
            if b < dlo {
                return Err(Error::WindowTooSmall(format!(
                    "bottom dominance fails down to degree {b}, below the domain start {dlo}"
                )));
            }
        }
        let pb = p.pow(bot.frob);
        ((dlo - 1) * pb + bot.jpow + 1).max(m.lo)
    } else {
        m.lo
    };
    if prefix < floor {
        return Err(Error::WindowTooSmall("empty certified range".into()));
    }
    let n = m.dim();
    let mut rows: Vec<Vec<u64>> = (dlo..=dhi)
        .map(|d| {
            let mut v = vec![0u64; n];
            for (&e, &c) in &op.apply_monomial(d).coeffs {
                v[(e - m.lo) as usize] = c;
            }
            v
        })
        .collect();
    // Eliminate coordinates outside [floor, prefix] first, then nonnegative
    // degrees from the top down and negative ones from the bottom up.
    let idx = |d: i64| (d - m.lo) as usize;
    let mut order: Vec<usize> = (m.lo..=m.hi).filter(|&d| d < floor || d > prefix).map(idx).collect();
    order.extend((floor.max(0)..=prefix).rev().map(idx));
    order.extend((floor..=prefix.min(-1)).map(idx));
    let pivots = row_reduce(&mut rows, m.p, &order);
    let inside_pivots: Vec<i64> = pivots
        .iter()
        .map(|&c| c as i64 + m.lo)
        .filter(|&d| d >= floor && d <= prefix)
        .collect();
    let basis: Vec<i64> = (floor..=prefix).filter(|d| !inside_pivots.contains(d)).collect();
    Ok(CokernelResult {
        basis,
        stable_prefix_degree: prefix,
        stable_floor_degree: floor,
    })
}

/// Rank of the operator matrix on the window (columns: domain degrees).
pub fn operator_rank(op: &SemilinearOperator, m: &TruncatedCharPModule) -> Result<(usize, usize)> {
    check_p(op, m)?;
    let (dlo, dhi) = op
        .domain(m)
        .ok_or_else(|| Error::WindowTooSmall("empty domain".into()))?;
    let n = m.dim();
    let mut rows: Vec<Vec<u64>> = (dlo..=dhi)
        .map(|d| {
            let mut v = vec![0u64; n];
            for (&e, &c) in &op.apply_monomial(d).coeffs {
                v[(e - m.lo) as usize] = c;
            }
            v
        })
        .collect();
    let order: Vec<usize> = (0..n).collect();
    let rank = row_reduce(&mut rows, m.p, &order).len();
    Ok((rank, (dhi - dlo + 1) as usize))
}

/// The finite field F_{p^m} as F_p[a]/(f) for a fixed irreducible f.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiniteField {
    pub p: u64,
    pub m: u32,
    modulus: Vec<u64>,
}

impl FiniteField {
    pub fn new(p: u64, m: u32) -> Result<Self> {
        if m == 0 || m > 12 {
            return Err(Error::Invalid(format!("field degree {m} out of range")));
        }
        let modulus = (0..p.pow(m))
            .map(|i| {
                let mut c = digits(i, p, m as usize);
                c.push(1);
                c
            })
            .find(|f| is_irreducible(f, p))
            .expect("irreducible polynomials exist in every degree");
        Ok(FiniteField { p, m, modulus })
    }

    pub fn size(&self) -> u64 {
        self.p.pow(self.m)
    }

    fn mul(&self, a: &[u64], b: &[u64]) -> Vec<u64> {
        let p = self.p;
        let mut prod = vec![0u64; a.len() + b.len()];
        for (i, &x) in a.iter().enumerate() {
            for (j, &y) in b.iter().enumerate() {
                prod[i + j] = (prod[i + j] + x * y) % p;
            }
        }
        poly_rem(&prod, &self.modulus, p)
    }

    fn pow(&self, a: &[u64], n: u64) -> Vec<u64> {
        let mut out = vec![1u64];
        for _ in 0..n {
            out = self.mul(&out, a);
        }
        pad(out, self.m as usize)
    }

    /// (kernel dimension, image dimension) of a j-free operator as an
    /// F_p-linear map of the field.
    pub fn operator_dims(&self, op: &SemilinearOperator) -> Result<(usize, usize)> {
        if op.p != self.p {
            return Err(Error::Invalid("operator characteristic mismatch".into()));
        }
        if op.terms.iter().any(|t| t.jpow != 0) {
            return Err(Error::Invalid(
                "j has no value on a residue field; operator must be j-free".into(),
            ));
        }
        let m = self.m as usize;
        let cols: Vec<Vec<u64>> = (0..m)
            .map(|i| {
                let mut basis = vec![0u64; m];
                basis[i] = 1;
                let mut acc = vec![0u64; m];
                for t in &op.terms {
                    let v = self.pow(&basis, self.p.pow(t.frob));
                    for k in 0..m {
                        acc[k] = (acc[k] + t.coef * v[k]) % self.p;
                    }
                }
                acc
            })
            .collect();
        let ker = null_space(&cols, m, self.p).len();
        Ok((ker, m - ker))
    }

    /// Number of roots of the operator in the field, by enumeration.
    pub fn count_roots(&self, op: &SemilinearOperator) -> u64 {
        let m = self.m as usize;
        (0..self.size())
            .filter(|&i| {
                let a = digits(i, self.p, m);
                let mut acc = vec![0u64; m];
                for t in &op.terms {
                    let v = self.pow(&a, self.p.pow(t.frob));
                    for k in 0..m {
                        acc[k] = (acc[k] + t.coef * v[k]) % self.p;
                    }
                }
                acc.iter().all(|&x| x == 0)
            })
            .count() as u64
    }
}

fn digits(mut i: u64, p: u64, n: usize) -> Vec<u64> {
    (0..n)
        .map(|_| {
            let d = i % p;
            i /= p;
            d
        })
        .collect()
}

fn pad(mut v: Vec<u64>, n: usize) -> Vec<u64> {
    v.resize(n.max(v.len()), 0);
    v.truncate(n);
    v
}

fn poly_rem(a: &[u64], f: &[u64], p: u64) -> Vec<u64> {
    let mut r = a.to_vec();
    let df = f.len() - 1;
    let lead_inv = (1..p).find(|&b| f[df] * b % p == 1).unwrap();
    while r.len() > df {
        let top = r.pop().unwrap();
        if top == 0 {
            continue;
        }
        let c = top * lead_inv % p;
        let shift = r.len() - df;
        for k in 0..df {
            r[shift + k] = (r[shift + k] + p * p - c * f[k] % p) % p;
        }
    }
    pad(r, df)
}

fn is_irreducible(f: &[u64], p: u64) -> bool {
    let n = f.len() - 1;
    for d in 1..=n / 2 {
        for i in 0..p.pow(d as u32) {
            let mut g = digits(i, p, d);
            g.push(1);
            if poly_rem(f, &g, p).iter().all(|&x| x == 0) {
                return false;
            }
        }
    }
    true
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CechReport {
    pub n_vars: usize,
    pub window: i64,
    /// Degree q -> exponent vectors spanning H^q within the window.
    pub cohomology: BTreeMap<usize, Vec<Vec<i64>>>,
    pub h0_descriptor: String,
}

impl CechReport {
    pub fn higher(&self) -> impl Iterator<Item = (&usize, &Vec<Vec<i64>>)> {
        self.cohomology.iter().filter(|(q, _)| **q > 0)
    }
}

pub fn format_monomial(a: &[i64]) -> String {
    let parts: Vec<String> = a
        .iter()
        .enumerate()
        .filter(|(_, &e)| e != 0)
        .map(|(i, &e)| {
            if e == 1 {
                format!("x{}", i + 1)
            } else {
                format!("x{}^{}", i + 1, e)
            }
        })
        .collect();
    if parts.is_empty() {
        "1".into()
    } else {
        parts.join("*")
    }
}

/// Čech cohomology of the structure sheaf on A^n minus the origin, computed
/// multidegree by multidegree on the standard cover.
pub fn punctured_affine_cohomology(n_vars: usize, window: i64) -> Result<CechReport> {
    if n_vars == 0 {
        return Err(Error::Invalid("need at least one variable".into()));
    }
    if window < n_vars as i64 {
        return Err(Error::Invalid(format!(
            "window {window} smaller than the number of variables {n_vars}"
        )));
    }
    let faces: Vec<Vec<Vec<usize>>> = (0..n_vars).map(|q| subsets_of_size(n_vars, q + 1)).collect();
    let mut cohomology: BTreeMap<usize, Vec<Vec<i64>>> = BTreeMap::new();
    let mut a = vec![-window; n_vars];
    loop {
        if a.iter().sum::<i64>() >= -window {
            let neg: Vec<usize> = (0..n_vars).filter(|&i| a[i] < 0).collect();
            let groups = degree_cohomology(&faces, &neg)?;
            for (q, dim) in groups.into_iter().enumerate() {
                if dim > 0 {
                    cohomology.entry(q).or_default().push(a.clone());
                }
            }
        }
        let mut k = 0;
        loop {
            if k == n_vars {
                for v in cohomology.values_mut() {
                    v.sort_by(|x, y| {
                        let sx: i64 = x.iter().sum();
                        let sy: i64 = y.iter().sum();
                        sy.cmp(&sx).then_with(|| y.cmp(x))
                    });
                }
                let h0_descriptor = if n_vars == 1 {
                    "k[x1^{±1}]".to_string()
                } else {
                    format!("k[x1..x{n_vars}]")
                };
                return Ok(CechReport {
                    n_vars,
                    window,
                    cohomology,
                    h0_descriptor,
                });
            }
            a[k] += 1;
            if a[k] <= window {
                break;
            }
            a[k] = -window;
            k += 1;
        }
    }
}

fn subsets_of_size(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize == k {
            out.push((0..n).filter(|i| mask & (1 << i) != 0).collect());
        }
    }
    out
}

/// Dimensions of H^q of the Čech complex in one multidegree: cochains live
/// on faces containing every variable with a negative exponent.
fn degree_cohomology(faces: &[Vec<Vec<usize>>], neg: &[usize]) -> Result<Vec<usize>> {
    let n = faces.len();
    let live: Vec<Vec<&Vec<usize>>> = faces
        .iter()
        .map(|fs| fs.iter().filter(|f| neg.iter().all(|i| f.contains(i))).collect())
        .collect();
    let groups: Vec<FgAbGroup> = live.iter().map(|l| FgAbGroup::free(l.len())).collect();
    let coboundary = |q: usize| -> Result<GroupHom> {
        let src = &live[q];
        let tgt = &live[q + 1];
        let mut m = IntMatrix::zeros(tgt.len(), src.len());
        for (r, big) in tgt.iter().enumerate() {
            for k in 0..big.len() {
                let mut small = (*big).clone();
                small.remove(k);
                if let Some(c) = src.iter().position(|s| **s == small) {
                    let sign = if k % 2 == 0 { 1 } else { -1 };
                    m.set(r, c, sign.into());
                }
            }
        }
        GroupHom::new(groups[q].clone(), groups[q + 1].clone(), m)
    };
    let mut out = Vec::new();
    for q in 0..n {
        let inc = if q == 0 {
            GroupHom::zero(FgAbGroup::zero(), groups[0].clone())
        } else {
            coboundary(q - 1)?
        };
        let outgoing = if q + 1 < n {
            coboundary(q)?
        } else {
            GroupHom::zero(groups[q].clone(), FgAbGroup::zero())
        };
        let h = homology(&inc, &outgoing)?;
        if !h.is_finite() || h.is_zero() {
            out.push(h.free_rank());
        } else {
            return Err(Error::Invalid("torsion in a Čech complex over Z".into()));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn op(p: u64, s: &str) -> SemilinearOperator {
        SemilinearOperator::parse(p, s).unwrap()
    }

    #[test]
    fn parse_roundtrip() {
        assert_eq!(op(2, "x + j*x^2").to_string(), "x + j*x^2");
        assert_eq!(op(3, "z - z^3").to_string(), "x - x^3");
        assert!(SemilinearOperator::parse(2, "x + x").is_err());
        assert!(SemilinearOperator::parse(2, "x + x^3").is_err());
        assert!(SemilinearOperator::parse(2, "j").is_err());
        assert_eq!(op(2, "j^-1*x^4").terms[0].jpow, -1);
    }

    #[test]
    fn kernels() {
        let m = TruncatedCharPModule::polynomial(2, 16).unwrap();
        let k = operator_kernel(&op(2, "x + x^2"), &m).unwrap();
        assert_eq!(k.basis_strings(), ["1"]);
        assert!(k.stabilized);

        let k = operator_kernel(&op(2, "x + j*x^2"), &m).unwrap();
        assert!(k.basis.is_empty());
        assert!(k.stabilized);

        let l = TruncatedCharPModule::laurent(2, -8, 16).unwrap();
        let k = operator_kernel(&op(2, "x + j*x^2"), &l).unwrap();
        assert_eq!(k.basis_strings(), ["j^-1"]);
        assert!(k.stabilized);

        let f3 = TruncatedCharPModule::polynomial(3, 0).unwrap();
        let k = operator_kernel(&op(3, "z - z^3"), &f3).unwrap();
        assert_eq!(k.basis_strings(), ["1"]);
    }

    #[test]
    fn cokernels() {
        let m = TruncatedCharPModule::polynomial(2, 32).unwrap();
        let c = operator_cokernel_basis(&op(2, "x + j*x^2"), &m).unwrap();
        assert_eq!(c.stable_prefix_degree, 32);
        for k in 1..=16 {
            assert!(c.basis.contains(&(2 * k)));
        }
        let id = operator_cokernel_basis(&SemilinearOperator::identity(2), &m).unwrap();
        assert!(id.basis.is_empty());
    }

    #[test]
    fn window_too_small() {
        let m = TruncatedCharPModule::polynomial(2, 0).unwrap();
        assert!(matches!(
            operator_kernel(&op(2, "x + j*x^2"), &m),
            Err(Error::WindowTooSmall(_))
        ));
    }

    #[test]
    fn residue_fields() {
        let f = op(2, "x + x^2");
        for m in 1..=6 {
            let field = FiniteField::new(2, m).unwrap();
            assert_eq!(field.operator_dims(&f).unwrap().0, 1);
            assert_eq!(field.count_roots(&f), 2);
        }
        let f3 = FiniteField::new(3, 2).unwrap();
        assert_eq!(f3.count_roots(&op(3, "z - z^3")), 3);
    }

    #[test]
    fn cech_small() {
        let r = punctured_affine_cohomology(2, 4).unwrap();
        let h1 = &r.cohomology[&1];
        assert_eq!(h1[0], vec![-1, -1]);
        assert!(h1.iter().all(|a| a.iter().all(|&e| e <= -1)));
        assert_eq!(h1.len(), 6);
        let r1 = punctured_affine_cohomology(1, 3).unwrap();
        assert_eq!(r1.higher().count(), 0);
    }
}

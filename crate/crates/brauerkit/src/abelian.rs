//! Finitely generated abelian groups over exact integers.
//!
//! Generators of a group are ordered free summands first, then the cyclic
//! torsion summands in dividing-chain order.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<BigInt>,
}

impl IntMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        IntMatrix {
            rows,
            cols,
            data: vec![BigInt::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, BigInt::one());
        }
        m
    }

    pub fn from_rows(rows: &[Vec<i64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map(|x| x.len()).unwrap_or(0);
        let mut m = Self::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c, "ragged matrix");
            for (j, v) in row.iter().enumerate() {
                m.set(i, j, BigInt::from(*v));
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &BigInt {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: BigInt) {
        self.data[i * self.cols + j] = v;
    }

    pub fn column(&self, j: usize) -> Vec<BigInt> {
        (0..self.rows).map(|i| self.get(i, j).clone()).collect()
    }

    pub fn from_columns(rows: usize, cols: &[Vec<BigInt>]) -> Self {
        let mut m = Self::zeros(rows, cols.len());
        for (j, c) in cols.iter().enumerate() {
            for (i, v) in c.iter().enumerate() {
                m.set(i, j, v.clone());
            }
        }
        m
    }

    pub fn mul(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!(self.cols, other.rows, "dimension mismatch");
        let mut out = IntMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = other.get(k, j);
                    if !b.is_zero() {
                        let idx = i * out.cols + j;
                        out.data[idx] += a * b;
                    }
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[BigInt]) -> Vec<BigInt> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| {
                v.iter()
                    .enumerate()
                    .fold(BigInt::zero(), |acc, (j, x)| acc + self.get(i, j) * x)
            })
            .collect()
    }

    pub fn hconcat(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!(self.rows, other.rows);
        let mut out = IntMatrix::zeros(self.rows, self.cols + other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(i, j, self.get(i, j).clone());
            }
            for j in 0..other.cols {
                out.set(i, self.cols + j, other.get(i, j).clone());
            }
        }
        out
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.rows).all(|i| (0..self.cols).all(|j| i == j || self.get(i, j).is_zero()))
    }

    pub fn diagonal(&self) -> Vec<BigInt> {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i).clone()).collect()
    }

    /// Determinant by fraction-free elimination (Bareiss).
    pub fn determinant(&self) -> BigInt {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        if n == 0 {
            return BigInt::one();
        }
        let mut a = self.clone();
        let mut sign = BigInt::one();
        let mut prev = BigInt::one();
        for k in 0..n - 1 {
            if a.get(k, k).is_zero() {
                match (k + 1..n).find(|&i| !a.get(i, k).is_zero()) {
                    Some(i) => {
                        a.swap_rows(k, i);
                        sign = -sign;
                    }
                    None => return BigInt::zero(),
                }
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    let v = (a.get(i, j) * a.get(k, k) - a.get(i, k) * a.get(k, j)) / &prev;
                    a.set(i, j, v);
                }
            }
            prev = a.get(k, k).clone();
        }
        sign * a.get(n - 1, n - 1).clone()
    }

    fn swap_rows(&mut self, i: usize, j: usize) {
        if i == j {
            return;
        }
        for c in 0..self.cols {
            self.data.swap(i * self.cols + c, j * self.cols + c);
        }
    }

    fn swap_cols(&mut self, i: usize, j: usize) {
        if i == j {
            return;
        }
        for r in 0..self.rows {
            self.data.swap(r * self.cols + i, r * self.cols + j);
        }
    }

    // row_i += q * row_j
    fn add_row(&mut self, i: usize, j: usize, q: &BigInt) {
        for c in 0..self.cols {
            let v = self.get(j, c) * q;
            if !v.is_zero() {
                self.data[i * self.cols + c] += v;
            }
        }
    }

    // col_i += q * col_j
    fn add_col(&mut self, i: usize, j: usize, q: &BigInt) {
        for r in 0..self.rows {
            let v = self.get(r, j) * q;
            if !v.is_zero() {
                self.data[r * self.cols + i] += v;
            }
        }
    }

    fn negate_row(&mut self, i: usize) {
        for c in 0..self.cols {
            let idx = i * self.cols + c;
            self.data[idx] = -self.data[idx].clone();
        }
    }

    fn negate_col(&mut self, j: usize) {
        for r in 0..self.rows {
            let idx = r * self.cols + j;
            self.data[idx] = -self.data[idx].clone();
        }
    }
}

impl fmt::Display for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for i in 0..self.rows {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "[")?;
            for j in 0..self.cols {
                if j > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{}", self.get(i, j))?;
            }
            write!(f, "]")?;
        }
        write!(f, "]")
    }
}

/// Result of a Smith normal form computation: `u * m * v == d`.
#[derive(Clone, Debug)]
pub struct Snf {
    pub u: IntMatrix,
    pub u_inv: IntMatrix,
    pub d: IntMatrix,
    pub v: IntMatrix,
    pub v_inv: IntMatrix,
    pub rank: usize,
}

impl Snf {
    pub fn diagonal(&self) -> Vec<BigInt> {
        self.d.diagonal()
    }
}

pub fn smith_normal_form(m: &IntMatrix) -> Snf {
    let (rows, cols) = (m.rows, m.cols);
    let mut a = m.clone();
    let mut u = IntMatrix::identity(rows);
    let mut u_inv = IntMatrix::identity(rows);
    let mut v = IntMatrix::identity(cols);
    let mut v_inv = IntMatrix::identity(cols);

    // Row op row_i += q row_j is mirrored on u_inv as col_j -= q col_i.
    macro_rules! row_add {
        ($i:expr, $j:expr, $q:expr) => {{
            let q: BigInt = $q;
            a.add_row($i, $j, &q);
            u.add_row($i, $j, &q);
            u_inv.add_col($j, $i, &(-q));
        }};
    }
    macro_rules! col_add {
        ($i:expr, $j:expr, $q:expr) => {{
            let q: BigInt = $q;
            a.add_col($i, $j, &q);
            v.add_col($i, $j, &q);
            v_inv.add_row($j, $i, &(-q));
        }};
    }

    let mut rank = 0;
    for k in 0..rows.min(cols) {
        loop {
            let mut best: Option<(usize, usize)> = None;
            for i in k..rows {
                for j in k..cols {
                    let x = a.get(i, j);
                    if x.is_zero() {
                        continue;
                    }
                    match best {
                        Some((bi, bj)) if a.get(bi, bj).abs() <= x.abs() => {}
                        _ => best = Some((i, j)),
                    }
                }
            }
            let Some((pi, pj)) = best else {
                return finish(a, u, u_inv, v, v_inv, rank);
            };
            a.swap_rows(k, pi);
            u.swap_rows(k, pi);
            u_inv.swap_cols(k, pi);
            a.swap_cols(k, pj);
            v.swap_cols(k, pj);
            v_inv.swap_rows(k, pj);

            let mut clean = true;
            for i in k + 1..rows {
                if a.get(i, k).is_zero() {
                    continue;
                }
                let q = a.get(i, k) / a.get(k, k);
                row_add!(i, k, -q);
                if !a.get(i, k).is_zero() {
                    clean = false;
                }
            }
            for j in k + 1..cols {
                if a.get(k, j).is_zero() {
                    continue;
                }
                let q = a.get(k, j) / a.get(k, k);
                col_add!(j, k, -q);
                if !a.get(k, j).is_zero() {
                    clean = false;
                }
            }
            if !clean {
                continue;
            }
            let p = a.get(k, k).clone();
            let bad = (k + 1..rows).find(|&i| (k + 1..cols).any(|j| !a.get(i, j).is_multiple_of(&p)));
            match bad {
                Some(i) => row_add!(k, i, BigInt::one()),
                None => break,
            }
        }
        if a.get(k, k).is_negative() {
            a.negate_row(k);
            u.negate_row(k);
            u_inv.negate_col(k);
        }
        rank += 1;
    }
    finish(a, u, u_inv, v, v_inv, rank)
}

fn finish(d: IntMatrix, u: IntMatrix, u_inv: IntMatrix, v: IntMatrix, v_inv: IntMatrix, rank: usize) -> Snf {
    Snf {
        u,
        u_inv,
        d,
        v,
        v_inv,
        rank,
    }
}

/// Solves `a * x = b` over the integers, returning one solution if any exists.
pub fn solve_integer(a: &IntMatrix, b: &[BigInt]) -> Option<Vec<BigInt>> {
    let snf = smith_normal_form(a);
    let c = snf.u.mul_vec(b);
    let mut w = vec![BigInt::zero(); a.cols];
    for (i, ci) in c.iter().enumerate() {
        if i < snf.rank {
            let di = snf.d.get(i, i);
            if !ci.is_multiple_of(di) {
                return None;
            }
            w[i] = ci / di;
        } else if !ci.is_zero() {
            return None;
        }
    }
    Some(snf.v.mul_vec(&w))
}

#[derive(Clone, Debug, Default)]
pub struct FgAbGroup {
    free_rank: usize,
    factors: Vec<u64>,
    labels: Option<Vec<String>>,
}

impl PartialEq for FgAbGroup {
    fn eq(&self, other: &Self) -> bool {
        self.free_rank == other.free_rank && self.factors == other.factors
    }
}

impl Eq for FgAbGroup {}

impl std::hash::Hash for FgAbGroup {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.free_rank.hash(state);
        self.factors.hash(state);
    }
}

impl PartialOrd for FgAbGroup {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for FgAbGroup {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.free_rank, &self.factors).cmp(&(other.free_rank, &other.factors))
    }
}

#[derive(Serialize, Deserialize)]
struct GroupRepr {
    free_rank: usize,
    factors: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
}

impl Serialize for FgAbGroup {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        GroupRepr {
            free_rank: self.free_rank,
            factors: self.factors.clone(),
            labels: self.labels.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for FgAbGroup {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = GroupRepr::deserialize(d)?;
        let mut g = FgAbGroup::from_orders(r.free_rank, &r.factors);
        g.labels = r.labels;
        Ok(g)
    }
}

impl FgAbGroup {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn free(rank: usize) -> Self {
        FgAbGroup {
            free_rank: rank,
            ..Default::default()
        }
    }

    pub fn cyclic(n: u64) -> Self {
        Self::from_orders(0, &[n])
    }

    pub fn elementary(p: u64, rank: usize) -> Self {
        Self::from_orders(0, &vec![p; rank])
    }

    /// Normalizes an arbitrary list of cyclic orders (0 meaning Z) into
    /// invariant factors.
    pub fn from_orders(free_rank: usize, orders: &[u64]) -> Self {
        let mut free_rank = free_rank;
        let mut primary: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
        for &n in orders {
            if n == 0 {
                free_rank += 1;
                continue;
            }
            for (p, e) in factorize(n) {
                primary.entry(p).or_default().push(p.pow(e));
            }
        }
        let len = primary.values().map(|v| v.len()).max().unwrap_or(0);
        let mut factors = vec![1u64; len];
        for pows in primary.values_mut() {
            pows.sort_unstable();
            let off = len - pows.len();
            for (i, q) in pows.iter().enumerate() {
                factors[off + i] *= q;
            }
        }
        FgAbGroup {
            free_rank,
            factors,
            labels: None,
        }
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Self {
        self.labels = Some(labels);
        self
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn free_rank(&self) -> usize {
        self.free_rank
    }

    pub fn invariant_factors(&self) -> &[u64] {
        &self.factors
    }

    pub fn num_gens(&self) -> usize {
        self.free_rank + self.factors.len()
    }

    /// Order of generator `i`; 0 for a free generator.
    pub fn gen_order(&self, i: usize) -> u64 {
        if i < self.free_rank {
            0
        } else {
            self.factors[i - self.free_rank]
        }
    }

    pub fn is_zero(&self) -> bool {
        self.free_rank == 0 && self.factors.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.free_rank == 0
    }

    pub fn is_cyclic(&self) -> bool {
        self.num_gens() <= 1
    }

    pub fn order(&self) -> Option<u64> {
        if self.free_rank > 0 {
            return None;
        }
        self.factors.iter().try_fold(1u64, |acc, &d| acc.checked_mul(d))
    }

    pub fn exponent(&self) -> Option<u64> {
        if self.free_rank > 0 {
            return None;
        }
        Some(self.factors.last().copied().unwrap_or(1))
    }

    pub fn direct_sum(&self, other: &FgAbGroup) -> FgAbGroup {
        let mut orders = self.factors.clone();
        orders.extend_from_slice(&other.factors);
        FgAbGroup::from_orders(self.free_rank + other.free_rank, &orders)
    }

    pub fn sum_all<'a>(groups: impl IntoIterator<Item = &'a FgAbGroup>) -> FgAbGroup {
        groups.into_iter().fold(FgAbGroup::zero(), |acc, g| acc.direct_sum(g))
    }

    /// The p-primary part (free part dropped).
    pub fn primary_part(&self, p: u64) -> FgAbGroup {
        let orders: Vec<u64> = self
            .factors
            .iter()
            .map(|&d| {
                let mut q = 1;
                let mut d = d;
                while d % p == 0 {
                    d /= p;
                    q *= p;
                }
                q
            })
            .collect();
        FgAbGroup::from_orders(0, &orders)
    }

    /// Number of elements killed by n.
    pub fn n_torsion_order(&self, n: u64) -> u64 {
        let mut acc = 1;
        for &d in &self.factors {
            acc *= d.gcd(&n);
        }
        acc
    }

    /// Relation matrix: one column per torsion generator.
    pub fn relations(&self) -> IntMatrix {
        let n = self.num_gens();
        let mut r = IntMatrix::zeros(n, self.factors.len());
        for (k, &d) in self.factors.iter().enumerate() {
            r.set(self.free_rank + k, k, BigInt::from(d));
        }
        r
    }

    pub fn reduce(&self, x: &[BigInt]) -> Vec<BigInt> {
        x.iter()
            .enumerate()
            .map(|(i, v)| {
                let d = self.gen_order(i);
                if d == 0 {
                    v.clone()
                } else {
                    v.mod_floor(&BigInt::from(d))
                }
            })
            .collect()
    }

    /// Order of an element (0 for infinite order).
    pub fn element_order(&self, x: &[BigInt]) -> u64 {
        let mut acc = 1u64;
        for (i, v) in x.iter().enumerate() {
            let d = self.gen_order(i);
            if d == 0 {
                if !v.is_zero() {
                    return 0;
                }
                continue;
            }
            let g = v.mod_floor(&BigInt::from(d)).to_u64().unwrap().gcd(&d);
            acc = acc.lcm(&(d / g));
        }
        acc
    }

    /// All element orders with multiplicity, keyed by order. Finite groups only.
    pub fn order_statistics(&self) -> BTreeMap<u64, u64> {
        let fin = FiniteGroup::new(self).expect("finite group");
        let mut out = BTreeMap::new();
        for i in 0..fin.size {
            *out.entry(fin.order_of(i)).or_insert(0) += 1;
        }
        out
    }
}

impl fmt::Display for FgAbGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut parts = Vec::new();
        match self.free_rank {
            0 => {}
            1 => parts.push("Z".to_string()),
            n => parts.push(format!("Z^{n}")),
        }
        for d in &self.factors {
            parts.push(format!("Z/{d}"));
        }
        write!(f, "{}", parts.join(" ⊕ "))
    }
}

impl FromStr for FgAbGroup {
    type Err = Error;

    /// Parses sums such as `Z^2 ⊕ Z/8 ⊕ Z/2`, `(Z/2)^3 + Z/4` or `0`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "0" || s.is_empty() {
            return Ok(FgAbGroup::zero());
        }
        let mut free = 0usize;
        let mut orders = Vec::new();
        for term in s.split(['⊕', '+', '×']) {
            let term = term.trim();
            let (base, mult) = match term.rsplit_once('^') {
                Some((b, m)) if !b.ends_with("Z/") => {
                    let m: usize = m.trim().parse().map_err(|_| Error::Parse(term.into()))?;
                    (b.trim().trim_start_matches('(').trim_end_matches(')'), m)
                }
                _ => (term, 1),
            };
            if base == "Z" {
                free += mult;
            } else if base == "0" {
            } else if let Some(n) = base.strip_prefix("Z/") {
                let n: u64 = n.trim().parse().map_err(|_| Error::Parse(term.into()))?;
                if n == 0 {
                    return Err(Error::Parse(term.into()));
                }
                orders.extend(std::iter::repeat_n(n, mult));
            } else {
                return Err(Error::Parse(format!("unrecognized summand `{term}`")));
            }
        }
        Ok(FgAbGroup::from_orders(free, &orders))
    }
}

pub fn factorize(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= n {
        let mut e = 0;
        while n.is_multiple_of(p) {
            n /= p;
            e += 1;
        }
        if e > 0 {
            out.push((p, e));
        }
        p += 1;
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupHom {
    pub source: FgAbGroup,
    pub target: FgAbGroup,
    #[serde(with = "matrix_serde")]
    pub matrix: IntMatrix,
}

mod matrix_serde {
    use super::IntMatrix;
    use num_bigint::BigInt;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Repr {
        rows: usize,
        cols: usize,
        entries: Vec<Vec<BigInt>>,
    }

    pub fn serialize<S: Serializer>(m: &IntMatrix, s: S) -> Result<S::Ok, S::Error> {
        Repr {
            rows: m.rows(),
            cols: m.cols(),
            entries: (0..m.rows())
                .map(|i| (0..m.cols()).map(|j| m.get(i, j).clone()).collect())
                .collect(),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<IntMatrix, D::Error> {
        let r = Repr::deserialize(d)?;
        let mut m = IntMatrix::zeros(r.rows, r.cols);
        for (i, row) in r.entries.into_iter().enumerate() {
            for (j, v) in row.into_iter().enumerate() {
                m.set(i, j, v);
            }
        }
        Ok(m)
    }
}

impl GroupHom {
    pub fn new(source: FgAbGroup, target: FgAbGroup, matrix: IntMatrix) -> Result<Self> {
        if matrix.rows() != target.num_gens() || matrix.cols() != source.num_gens() {
            return Err(Error::Invalid(format!(
                "matrix is {}x{}, expected {}x{}",
                matrix.rows(),
                matrix.cols(),
                target.num_gens(),
                source.num_gens()
            )));
        }
        let mut m = matrix;
        for j in 0..m.cols() {
            let col = target.reduce(&m.column(j));
            for (i, v) in col.into_iter().enumerate() {
                m.set(i, j, v);
            }
        }
        for j in source.free_rank..source.num_gens() {
            let d = BigInt::from(source.gen_order(j));
            let scaled: Vec<BigInt> = m.column(j).iter().map(|v| v * &d).collect();
            if target.reduce(&scaled).iter().any(|v| !v.is_zero()) {
                return Err(Error::Invalid(format!(
                    "column {j} does not respect the source relation of order {d}"
                )));
            }
        }
        Ok(GroupHom {
            source,
            target,
            matrix: m,
        })
    }

    pub fn from_rows(source: FgAbGroup, target: FgAbGroup, rows: &[Vec<i64>]) -> Result<Self> {
        let m = if rows.is_empty() {
            IntMatrix::zeros(0, source.num_gens())
        } else {
            IntMatrix::from_rows(rows)
        };
        Self::new(source, target, m)
    }

    pub fn zero(source: FgAbGroup, target: FgAbGroup) -> Self {
        let m = IntMatrix::zeros(target.num_gens(), source.num_gens());
        GroupHom {
            source,
            target,
            matrix: m,
        }
    }

    pub fn identity(g: FgAbGroup) -> Self {
        let n = g.num_gens();
        GroupHom {
            source: g.clone(),
            target: g,
            matrix: IntMatrix::identity(n),
        }
    }

    pub fn scalar(g: FgAbGroup, k: i64) -> Self {
        let n = g.num_gens();
        let mut m = IntMatrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, BigInt::from(k));
        }
        Self::new(g.clone(), g, m).expect("scalar maps are well-formed")
    }

    pub fn apply(&self, x: &[BigInt]) -> Vec<BigInt> {
        self.target.reduce(&self.matrix.mul_vec(x))
    }

    /// `self ∘ first`.
    pub fn compose(&self, first: &GroupHom) -> Result<GroupHom> {
        if first.target != self.source {
            return Err(Error::Invalid("composition of incompatible maps".into()));
        }
        GroupHom::new(
            first.source.clone(),
            self.target.clone(),
            self.matrix.mul(&first.matrix),
        )
    }

    pub fn add(&self, other: &GroupHom) -> Result<GroupHom> {
        if self.source != other.source || self.target != other.target {
            return Err(Error::Invalid("sum of incompatible maps".into()));
        }
        let mut m = self.matrix.clone();
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                m.set(i, j, m.get(i, j) + other.matrix.get(i, j));
            }
        }
        GroupHom::new(self.source.clone(), self.target.clone(), m)
    }

    pub fn sub(&self, other: &GroupHom) -> Result<GroupHom> {
        let neg = GroupHom::new(other.source.clone(), other.target.clone(), {
            let mut m = other.matrix.clone();
            for i in 0..m.rows() {
                for j in 0..m.cols() {
                    m.set(i, j, -m.get(i, j).clone());
                }
            }
            m
        })?;
        self.add(&neg)
    }

    pub fn is_zero(&self) -> bool {
        (0..self.matrix.cols()).all(|j| self.apply(&self.matrix_unit(j)).iter().all(|v| v.is_zero()))
    }

    fn matrix_unit(&self, j: usize) -> Vec<BigInt> {
        let mut e = vec![BigInt::zero(); self.source.num_gens()];
        e[j] = BigInt::one();
        e
    }

    pub fn is_injective(&self) -> bool {
        hom_kernel(self).0.is_zero()
    }

    pub fn is_surjective(&self) -> bool {
        hom_cokernel(self).0.is_zero()
    }

    pub fn is_iso(&self) -> bool {
        self.is_injective() && self.is_surjective()
    }

    /// Finds `g` with `inj ∘ g == self`, given that `inj` is injective and
    /// contains the image of `self`.
    pub fn factor_through(&self, inj: &GroupHom) -> Result<GroupHom> {
        if inj.target != self.target {
            return Err(Error::Invalid("factorization target mismatch".into()));
        }
        let a = inj.matrix.hconcat(&self.target.relations());
        let mut cols = Vec::new();
        for j in 0..self.source.num_gens() {
            let y = self.matrix.column(j);
            let z = solve_integer(&a, &y)
                .ok_or_else(|| Error::Invalid("image does not lie in the given subgroup".into()))?;
            cols.push(z[..inj.source.num_gens()].to_vec());
        }
        let m = IntMatrix::from_columns(inj.source.num_gens(), &cols);
        GroupHom::new(self.source.clone(), inj.source.clone(), m)
    }
}

/// Kernel of `f` with its inclusion into `f.source`.
pub fn hom_kernel(f: &GroupHom) -> (FgAbGroup, GroupHom) {
    let n = f.source.num_gens();
    let m = f.target.num_gens();
    let rt = f.target.relations();
    let mut neg_rt = rt.clone();
    for i in 0..rt.rows() {
        for j in 0..rt.cols() {
            neg_rt.set(i, j, -rt.get(i, j).clone());
        }
    }
    let b = f.matrix.hconcat(&neg_rt);
    let snf = smith_normal_form(&b);
    let mut gens: Vec<Vec<BigInt>> = Vec::new();
    for j in snf.rank..b.cols() {
        let col = snf.v.column(j);
        gens.push(col[..n].to_vec());
    }
    let _ = m;
    // Lattice spanned by the projected kernel vectors.
    let g = IntMatrix::from_columns(n, &gens);
    let snf2 = smith_normal_form(&g);
    let r2 = snf2.rank;
    let mut basis_cols = Vec::new();
    for i in 0..r2 {
        let d = snf2.d.get(i, i).clone();
        basis_cols.push(snf2.u_inv.column(i).iter().map(|v| v * &d).collect::<Vec<_>>());
    }
    let basis = IntMatrix::from_columns(n, &basis_cols);
    // Source relations in lattice coordinates.
    let rs = f.source.relations();
    let mut rel_cols = Vec::new();
    for j in 0..rs.cols() {
        let c = snf2.u.mul_vec(&rs.column(j));
        let coords: Vec<BigInt> = (0..r2).map(|i| &c[i] / snf2.d.get(i, i)).collect();
        rel_cols.push(coords);
    }
    let c = IntMatrix::from_columns(r2, &rel_cols);
    let (group, gens_in_lattice) = quotient_of_free(r2, &c);
    let incl_cols: Vec<Vec<BigInt>> = gens_in_lattice.iter().map(|x| basis.mul_vec(x)).collect();
    let incl = GroupHom::new(group.clone(), f.source.clone(), IntMatrix::from_columns(n, &incl_cols))
        .expect("kernel inclusion is well-formed");
    (group, incl)
}

/// Presents Z^r / colspan(c) as a group with generator vectors in Z^r.
fn quotient_of_free(r: usize, c: &IntMatrix) -> (FgAbGroup, Vec<Vec<BigInt>>) {
    let snf = smith_normal_form(c);
    let mut free_gens = Vec::new();
    let mut tors = Vec::new();
    for i in 0..r {
        let col = snf.u_inv.column(i);
        if i < snf.rank {
            let d = snf.d.get(i, i).to_u64().expect("invariant factor fits u64");
            if d > 1 {
                tors.push((d, col));
            }
        } else {
            free_gens.push(col);
        }
    }
    let group = FgAbGroup {
        free_rank: free_gens.len(),
        factors: tors.iter().map(|t| t.0).collect(),
        labels: None,
    };
    let mut gens = free_gens;
    gens.extend(tors.into_iter().map(|t| t.1));
    (group, gens)
}

/// Cokernel of `f` with its projection from `f.target`.
pub fn hom_cokernel(f: &GroupHom) -> (FgAbGroup, GroupHom) {
    let m = f.target.num_gens();
    let b = f.matrix.hconcat(&f.target.relations());
    let snf = smith_normal_form(&b);
    let mut free_rows = Vec::new();
    let mut tors = Vec::new();
    for i in 0..m {
        let row: Vec<BigInt> = (0..m).map(|j| snf.u.get(i, j).clone()).collect();
        if i < snf.rank {
            let d = snf.d.get(i, i).to_u64().expect("invariant factor fits u64");
            if d > 1 {
                tors.push((d, row));
            }
        } else {
            free_rows.push(row);
        }
    }
    let group = FgAbGroup {
        free_rank: free_rows.len(),
        factors: tors.iter().map(|t| t.0).collect(),
        labels: None,
    };
    let mut rows = free_rows;
    rows.extend(tors.into_iter().map(|t| t.1));
    let mut pm = IntMatrix::zeros(group.num_gens(), m);
    for (i, row) in rows.into_iter().enumerate() {
        for (j, v) in row.into_iter().enumerate() {
            pm.set(i, j, v);
        }
    }
    let proj = GroupHom::new(f.target.clone(), group.clone(), pm).expect("cokernel projection is well-formed");
    (group, proj)
}

pub fn hom_image_order(f: &GroupHom) -> Option<u64> {
    let (k, _) = hom_kernel(f);
    let s = f.source.order()?;
    Some(s / k.order()?)
}

/// `ker(out) / im(inc)` inside the middle group; requires `out ∘ inc = 0`.
pub fn homology(inc: &GroupHom, out: &GroupHom) -> Result<FgAbGroup> {
    let (_, incl) = hom_kernel(out);
    let lifted = inc.factor_through(&incl)?;
    Ok(hom_cokernel(&lifted).0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ExtensionWitness {
    pub witness_order: u64,
    pub maps_to_generator_of_quotient: bool,
}

impl ExtensionWitness {
    pub fn generator(order: u64) -> Self {
        ExtensionWitness {
            witness_order: order,
            maps_to_generator_of_quotient: true,
        }
    }

    pub fn element(order: u64) -> Self {
        ExtensionWitness {
            witness_order: order,
            maps_to_generator_of_quotient: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CandidateTrace {
    pub candidate: String,
    pub satisfied: bool,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ExtensionResolution {
    pub group: FgAbGroup,
    pub trace: Vec<CandidateTrace>,
}

/// All abelian groups of order `n`, one per isomorphism class.
pub fn groups_of_order(n: u64) -> Vec<FgAbGroup> {
    let mut out = vec![Vec::<u64>::new()];
    for (p, e) in factorize(n) {
        let mut next = Vec::new();
        for part in partitions(e) {
            for base in &out {
                let mut orders = base.clone();
                orders.extend(part.iter().map(|&k| p.pow(k)));
                next.push(orders);
            }
        }
        out = next;
    }
    let mut groups: Vec<FgAbGroup> = out.iter().map(|o| FgAbGroup::from_orders(0, o)).collect();
    groups.sort();
    groups
}

fn partitions(n: u32) -> Vec<Vec<u32>> {
    fn go(n: u32, max: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if n == 0 {
            out.push(cur.clone());
            return;
        }
        for k in (1..=n.min(max)).rev() {
            cur.push(k);
            go(n - k, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(n, n, &mut Vec::new(), &mut out);
    out
}

const SEARCH_LIMIT: u64 = 1 << 22;

/// Explicit element table of a finite abelian group in mixed radix.
struct FiniteGroup {
    radix: Vec<u64>,
    size: usize,
}

impl FiniteGroup {
    fn new(g: &FgAbGroup) -> Option<Self> {
        let size = g.order()?;
        if size > 1 << 16 {
            return None;
        }
        Some(FiniteGroup {
            radix: g.factors.clone(),
            size: size as usize,
        })
    }

    fn coords(&self, mut i: usize) -> Vec<u64> {
        self.radix
            .iter()
            .map(|&d| {
                let c = (i as u64) % d;
                i /= d as usize;
                c
            })
            .collect()
    }

    fn index(&self, c: &[u64]) -> usize {
        let mut idx = 0usize;
        for (k, &d) in self.radix.iter().enumerate().rev() {
            idx = idx * d as usize + (c[k] % d) as usize;
        }
        idx
    }

    fn add(&self, a: usize, b: usize) -> usize {
        let (ca, cb) = (self.coords(a), self.coords(b));
        let s: Vec<u64> = ca.iter().zip(&cb).map(|(x, y)| x + y).collect();
        self.index(&s)
    }

    fn order_of(&self, a: usize) -> u64 {
        self.coords(a)
            .iter()
            .zip(&self.radix)
            .fold(1u64, |acc, (&c, &d)| acc.lcm(&(d / c.gcd(&d))))
    }

    fn span(&self, gens: &[usize]) -> Vec<bool> {
        let mut member = vec![false; self.size];
        member[0] = true;
        let mut elems = vec![0usize];
        for &g in gens {
            let mut frontier = elems.clone();
            while let Some(x) = frontier.pop() {
                let y = self.add(x, g);
                if !member[y] {
                    member[y] = true;
                    elems.push(y);
                    frontier.push(y);
                }
            }
        }
        member
    }
}

/// Checks whether `g` is an extension of `quot` by `sub` compatible with the
/// witness. Returns the reason string on success or failure.
pub fn check_extension_candidate(
    g: &FgAbGroup,
    sub: &FgAbGroup,
    quot: &FgAbGroup,
    witness: Option<ExtensionWitness>,
) -> Result<(bool, String)> {
    let fg = FiniteGroup::new(g).ok_or_else(|| Error::SearchTooLarge(format!("candidate {g} too large")))?;
    let sub_order = sub.order().ok_or_else(|| Error::Invalid("infinite sub".into()))?;
    let quot_stats = quot.order_statistics();
    let quot_exp = quot.exponent().unwrap_or(1);

    // Candidate images of each generator of sub.
    let choices: Vec<Vec<usize>> = sub
        .factors
        .iter()
        .map(|&a| (0..fg.size).filter(|&x| a % fg.order_of(x) == 0).collect())
        .collect();
    let total: u64 = choices.iter().map(|c| c.len() as u64).product();
    if total > SEARCH_LIMIT {
        return Err(Error::SearchTooLarge(format!(
            "{total} subgroup generator tuples in {g}"
        )));
    }
    let mut seen: HashSet<Vec<bool>> = HashSet::new();
    let mut found_sub = false;
    let mut idx = vec![0usize; choices.len()];
    loop {
        let gens: Vec<usize> = idx.iter().zip(&choices).map(|(&i, c)| c[i]).collect();
        let h = fg.span(&gens);
        let h_order = h.iter().filter(|&&b| b).count() as u64;
        if h_order == sub_order && seen.insert(h.clone()) {
            // coset orders
            let coset_order = |x: usize| -> u64 {
                let mut k = 1u64;
                let mut y = x;
                while !h[y] {
                    y = fg.add(y, x);
                    k += 1;
                }
                k
            };
            let mut stats: BTreeMap<u64, u64> = BTreeMap::new();
            let orders: Vec<u64> = (0..fg.size).map(coset_order).collect();
            for &o in &orders {
                *stats.entry(o).or_insert(0) += 1;
            }
            for v in stats.values_mut() {
                *v /= sub_order;
            }
            if stats == quot_stats {
                found_sub = true;
                let ok = match witness {
                    None => true,
                    Some(w) => (0..fg.size).any(|x| {
                        fg.order_of(x) == w.witness_order && (!w.maps_to_generator_of_quotient || orders[x] == quot_exp)
                    }),
                };
                if ok {
                    return Ok((true, "subgroup, quotient and witness found".into()));
                }
            }
        }
        // advance
        let mut k = 0;
        loop {
            if k == idx.len() {
                let reason = if found_sub {
                    "no witness element of the required order".to_string()
                } else {
                    format!("no subgroup {sub} with quotient {quot}")
                };
                return Ok((false, reason));
            }
            idx[k] += 1;
            if idx[k] < choices[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

pub fn resolve_extension(sub: &FgAbGroup, quot: &FgAbGroup, witness: ExtensionWitness) -> Result<ExtensionResolution> {
    resolve_extension_opt(sub, quot, Some(witness))
}

pub fn resolve_extension_opt(
    sub: &FgAbGroup,
    quot: &FgAbGroup,
    witness: Option<ExtensionWitness>,
) -> Result<ExtensionResolution> {
    let candidates = {
        let (a, b) = (sub.order(), quot.order());
        match (a, b) {
            (Some(a), Some(b)) => groups_of_order(a * b),
            _ => return Err(Error::Invalid("extension inputs must be finite".into())),
        }
    };
    resolve_among(sub, quot, witness, &candidates)
}

/// Runs the search over an explicit candidate list (any order).
pub fn resolve_among(
    sub: &FgAbGroup,
    quot: &FgAbGroup,
    witness: Option<ExtensionWitness>,
    candidates: &[FgAbGroup],
) -> Result<ExtensionResolution> {
    let mut trace = Vec::new();
    let mut hits = Vec::new();
    for g in candidates {
        let (ok, reason) = check_extension_candidate(g, sub, quot, witness)?;
        if ok {
            hits.push(g.clone());
        }
        trace.push(CandidateTrace {
            candidate: g.to_string(),
            satisfied: ok,
            reason,
        });
    }
    trace.sort_by(|a, b| a.candidate.cmp(&b.candidate));
    hits.sort();
    match hits.len() {
        1 => Ok(ExtensionResolution {
            group: hits.pop().unwrap(),
            trace,
        }),
        0 => Err(Error::NoExtension {
            sub: sub.to_string(),
            quot: quot.to_string(),
        }),
        _ => Err(Error::AmbiguousExtension {
            stage: None,
            candidates: hits.iter().map(|g| g.to_string()).collect(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(s: &str) -> FgAbGroup {
        s.parse().unwrap()
    }

    #[test]
    fn snf_small() {
        let m = IntMatrix::from_rows(&[vec![2, 4], vec![6, 8]]);
        let s = smith_normal_form(&m);
        assert_eq!(s.diagonal(), vec![BigInt::from(2), BigInt::from(4)]);
        assert_eq!(s.u.mul(&m).mul(&s.v), s.d);
        let z = smith_normal_form(&IntMatrix::zeros(1, 1));
        assert_eq!(z.diagonal(), vec![BigInt::zero()]);
        let i = smith_normal_form(&IntMatrix::identity(2));
        assert_eq!(i.d, IntMatrix::identity(2));
    }

    #[test]
    fn normal_form() {
        assert_eq!(FgAbGroup::from_orders(0, &[2, 3]), g("Z/6"));
        assert_eq!(FgAbGroup::from_orders(0, &[4, 6]).invariant_factors(), &[2, 12]);
        assert_eq!(g("Z/8 ⊕ Z/2").to_string(), "Z/2 ⊕ Z/8");
        assert_eq!(g("(Z/2)^3").order(), Some(8));
        assert_eq!(g("Z^2 + Z/1").to_string(), "Z^2");
        assert_eq!(FgAbGroup::zero().to_string(), "0");
    }

    #[test]
    fn kernel_cokernel_examples() {
        let z = g("Z");
        let two = GroupHom::from_rows(z.clone(), z.clone(), &[vec![2]]).unwrap();
        assert!(hom_kernel(&two).0.is_zero());
        assert_eq!(hom_cokernel(&two).0, g("Z/2"));

        let z4 = g("Z/4");
        let d = GroupHom::from_rows(z4.clone(), z4.clone(), &[vec![2]]).unwrap();
        assert_eq!(hom_kernel(&d).0, g("Z/2"));

        let to_zero = GroupHom::zero(g("Z/2"), FgAbGroup::zero());
        assert_eq!(hom_kernel(&to_zero).0, g("Z/2"));

        let from_zero = GroupHom::zero(FgAbGroup::zero(), g("Z/8"));
        assert_eq!(hom_cokernel(&from_zero).0, g("Z/8"));

        let z2 = g("Z^2");
        let m = GroupHom::from_rows(z2.clone(), z2, &[vec![2, 0], vec![0, 3]]).unwrap();
        assert_eq!(hom_cokernel(&m).0, g("Z/6"));
    }

    #[test]
    fn kernel_inclusion_lands_in_kernel() {
        let src = g("Z ⊕ Z/2 ⊕ Z/12");
        let tgt = g("Z/2 ⊕ Z/12");
        let f = GroupHom::from_rows(src, tgt, &[vec![1, 1, 1], vec![3, 6, 1]]).unwrap();
        let (k, incl) = hom_kernel(&f);
        assert!(f.compose(&incl).unwrap().is_zero());
        assert!(incl.is_injective());
        assert_eq!(k.free_rank(), 1);
    }

    #[test]
    fn ill_formed_hom_rejected() {
        assert!(GroupHom::from_rows(g("Z/2"), g("Z/4"), &[vec![1]]).is_err());
        assert!(GroupHom::from_rows(g("Z/2"), g("Z/4"), &[vec![2]]).is_ok());
    }

    #[test]
    fn extension_examples() {
        let r = resolve_extension(&g("Z/2"), &g("Z/4"), ExtensionWitness::generator(8)).unwrap();
        assert_eq!(r.group, g("Z/8"));
        let r = resolve_extension(&g("(Z/2)^2"), &g("Z/4"), ExtensionWitness::generator(8)).unwrap();
        assert_eq!(r.group, g("Z/8 ⊕ Z/2"));
        let r = resolve_extension(&g("0"), &g("Z/4"), ExtensionWitness::generator(4)).unwrap();
        assert_eq!(r.group, g("Z/4"));
        let e = resolve_extension(&g("Z/2"), &g("Z/2"), ExtensionWitness::element(2));
        assert!(matches!(e, Err(Error::AmbiguousExtension { .. })));
        let e = resolve_extension(&g("Z/2"), &g("Z/2"), ExtensionWitness::element(8));
        assert!(matches!(e, Err(Error::NoExtension { .. })));
    }

    #[test]
    fn groups_of_order_counts() {
        assert_eq!(groups_of_order(16).len(), 5);
        assert_eq!(groups_of_order(12).len(), 2);
        assert_eq!(groups_of_order(1), vec![FgAbGroup::zero()]);
    }

    #[test]
    fn json_roundtrip() {
        let x = g("Z ⊕ Z/2 ⊕ Z/4");
        let s = serde_json::to_string(&x).unwrap();
        assert_eq!(s, r#"{"free_rank":1,"factors":[2,4]}"#);
        let y: FgAbGroup = serde_json::from_str(r#"{"free_rank":0,"factors":[4,2]}"#).unwrap();
        assert_eq!(y, g("Z/2 ⊕ Z/4"));
    }
}

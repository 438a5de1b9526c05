//! Brauer groups of localized rings of integers from local invariants,
//! H^1(S; Q/Z) from unit groups of p-adic integers, and the Laurent and
//! affine-line formulas.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::abelian::{factorize, FgAbGroup};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PlaceSpec {
    Finite { label: String },
    Real,
    Complex,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LocalBrauer {
    Full,
    Half,
    Zero,
}

impl PlaceSpec {
    pub fn finite(label: impl Into<String>) -> Self {
        PlaceSpec::Finite { label: label.into() }
    }

    pub fn local_brauer(&self) -> LocalBrauer {
        match self {
            PlaceSpec::Finite { .. } => LocalBrauer::Full,
            PlaceSpec::Real => LocalBrauer::Half,
            PlaceSpec::Complex => LocalBrauer::Zero,
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PlacesInput {
    Wrapped { places: Vec<PlaceSpec> },
    Bare(Vec<PlaceSpec>),
}

/// Accepts `{"places": [...]}` or a bare list.
pub fn parse_places(s: &str) -> Result<Vec<PlaceSpec>> {
    let input: PlacesInput = serde_json::from_str(s)?;
    Ok(match input {
        PlacesInput::Wrapped { places } => places,
        PlacesInput::Bare(p) => p,
    })
}

/// Places of Z[1/n]: the primes dividing n and the real place.
pub fn rational_places(inverted_primes: &[u64]) -> Vec<PlaceSpec> {
    let mut v: Vec<PlaceSpec> = inverted_primes
        .iter()
        .map(|p| PlaceSpec::finite(p.to_string()))
        .collect();
    v.push(PlaceSpec::Real);
    v
}

/// A torsion group up to isomorphism: copies of Q/Z, of Q_p/Z_p, a finite
/// part, possibly an infinite-dimensional F_2 space, and named symbols
/// that are carried along unexpanded.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct DivisibleGroupDescriptor {
    pub qz_copies: usize,
    pub qpzp_primes: Vec<u64>,
    pub finite_part: FgAbGroup,
    pub infinite_f2: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f2_basis: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub symbolic: Vec<String>,
}

impl DivisibleGroupDescriptor {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn finite(g: FgAbGroup) -> Self {
        DivisibleGroupDescriptor {
            finite_part: g,
            ..Self::default()
        }
    }

    pub fn qz(copies: usize) -> Self {
        DivisibleGroupDescriptor {
            qz_copies: copies,
            ..Self::default()
        }
    }

    pub fn qpzp(p: u64) -> Self {
        DivisibleGroupDescriptor {
            qpzp_primes: vec![p],
            ..Self::default()
        }
    }

    pub fn infinite_f2(basis: Option<Vec<String>>) -> Self {
        DivisibleGroupDescriptor {
            infinite_f2: true,
            f2_basis: basis,
            ..Self::default()
        }
    }

    pub fn symbol(name: impl Into<String>) -> Self {
        DivisibleGroupDescriptor {
            symbolic: vec![name.into()],
            ..Self::default()
        }
    }

    pub fn is_zero(&self) -> bool {
        self.qz_copies == 0
            && self.qpzp_primes.is_empty()
            && self.finite_part.is_zero()
            && !self.infinite_f2
            && self.symbolic.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.qz_copies == 0
            && self.qpzp_primes.is_empty()
            && !self.infinite_f2
            && self.symbolic.is_empty()
            && self.finite_part.is_finite()
    }

    /// The finite group, when the descriptor is one.
    pub fn as_finite(&self) -> Option<&FgAbGroup> {
        self.is_finite().then_some(&self.finite_part)
    }

    pub fn direct_sum(&self, other: &Self) -> Self {
        let mut qp = self.qpzp_primes.clone();
        qp.extend(&other.qpzp_primes);
        qp.sort_unstable();
        let mut sym = self.symbolic.clone();
        sym.extend(other.symbolic.iter().cloned());
        DivisibleGroupDescriptor {
            qz_copies: self.qz_copies + other.qz_copies,
            qpzp_primes: qp,
            finite_part: self.finite_part.direct_sum(&other.finite_part),
            infinite_f2: self.infinite_f2 || other.infinite_f2,
            f2_basis: self.f2_basis.clone().or_else(|| other.f2_basis.clone()),
            symbolic: sym,
        }
    }

    /// Order of the n-torsion subgroup; `None` when infinite or symbolic.
    pub fn n_torsion_order(&self, n: u64) -> Option<u64> {
        if !self.symbolic.is_empty() || (self.infinite_f2 && n.is_multiple_of(2)) {
            return None;
        }
        let mut acc = n.checked_pow(self.qz_copies as u32)?;
        for &p in &self.qpzp_primes {
            let mut m = n;
            while m.is_multiple_of(p) {
                m /= p;
                acc = acc.checked_mul(p)?;
            }
        }
        if self.finite_part.free_rank() > 0 {
            return None;
        }
        acc.checked_mul(self.finite_part.n_torsion_order(n))
    }

    /// The p-primary part.
    pub fn primary_part(&self, p: u64) -> Self {
        DivisibleGroupDescriptor {
            qz_copies: 0,
            qpzp_primes: self
                .qpzp_primes
                .iter()
                .copied()
                .chain(std::iter::repeat_n(p, self.qz_copies))
                .filter(|&q| q == p)
                .collect(),
            finite_part: self.finite_part.primary_part(p),
            infinite_f2: self.infinite_f2 && p == 2,
            f2_basis: if p == 2 { self.f2_basis.clone() } else { None },
            symbolic: self.symbolic.clone(),
        }
    }
}

impl fmt::Display for DivisibleGroupDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        match self.qz_copies {
            0 => {}
            1 => parts.push("Q/Z".to_string()),
            m => parts.push(format!("(Q/Z)^{m}")),
        }
        if !self.finite_part.is_zero() {
            parts.push(self.finite_part.to_string());
        }
        let mut counts: BTreeMap<u64, usize> = BTreeMap::new();
        for &p in &self.qpzp_primes {
            *counts.entry(p).or_default() += 1;
        }
        for (p, c) in counts {
            if c == 1 {
                parts.push(format!("Q_{p}/Z_{p}"));
            } else {
                parts.push(format!("(Q_{p}/Z_{p})^{c}"));
            }
        }
        if self.infinite_f2 {
            parts.push("F_2^∞".to_string());
        }
        parts.extend(self.symbolic.iter().cloned());
        if parts.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{}", parts.join(" ⊕ "))
        }
    }
}

/// Kernel of the sum of local invariants over the given places.
pub fn brauer_localized_integers(places: &[PlaceSpec]) -> DivisibleGroupDescriptor {
    let m = places.iter().filter(|p| p.local_brauer() == LocalBrauer::Full).count();
    let r = places.iter().filter(|p| p.local_brauer() == LocalBrauer::Half).count();
    if m >= 1 {
        DivisibleGroupDescriptor {
            qz_copies: m - 1,
            finite_part: FgAbGroup::elementary(2, r),
            ..Default::default()
        }
    } else if r >= 1 {
        DivisibleGroupDescriptor::finite(FgAbGroup::elementary(2, r - 1))
    } else {
        DivisibleGroupDescriptor::zero()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StatedValue {
    pub value: DivisibleGroupDescriptor,
    pub citation: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct H1Report {
    pub primes: Vec<u64>,
    pub structural: DivisibleGroupDescriptor,
    pub stated: Option<StatedValue>,
    pub discrepancy: bool,
}

/// Hom_cont(prod_p Z_p^x, Q/Z) for the given primes.
pub fn h1_qz_structural(primes: &[u64]) -> Result<DivisibleGroupDescriptor> {
    let mut ps: Vec<u64> = primes.to_vec();
    ps.sort_unstable();
    ps.dedup();
    let mut out = DivisibleGroupDescriptor::zero();
    for p in ps {
        if factorize(p) != vec![(p, 1)] {
            return Err(Error::Invalid(format!("{p} is not prime")));
        }
        let torsion = if p == 2 { 2 } else { p - 1 };
        out = out
            .direct_sum(&DivisibleGroupDescriptor::finite(FgAbGroup::cyclic(torsion)))
            .direct_sum(&DivisibleGroupDescriptor::qpzp(p));
    }
    Ok(out)
}

/// Structural answer plus any separately recorded value for the same
/// prime set, flagged when the two disagree.
pub fn h1_qz(primes: &[u64], stated: Option<StatedValue>) -> Result<H1Report> {
    let structural = h1_qz_structural(primes)?;
    let discrepancy = stated.as_ref().map(|s| s.value != structural).unwrap_or(false);
    let mut ps = primes.to_vec();
    ps.sort_unstable();
    ps.dedup();
    Ok(H1Report {
        primes: ps,
        structural,
        stated,
        discrepancy,
    })
}

/// Br(S[j^{±1}]) = Br(S) ⊕ H^1(S; Q/Z).
pub fn brauer_laurent(places: &[PlaceSpec], inverted_primes: &[u64]) -> Result<DivisibleGroupDescriptor> {
    Ok(brauer_localized_integers(places).direct_sum(&h1_qz_structural(inverted_primes)?))
}

/// A regular noetherian base with its Brauer group and recorded density
/// facts: `dense[p]` says whether Spec S[1/p] is dense in Spec S.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaseDescriptor {
    pub name: String,
    pub brauer: DivisibleGroupDescriptor,
    #[serde(default)]
    pub dense: BTreeMap<u64, bool>,
    /// Density holds for every prime (e.g. S a domain of characteristic 0).
    #[serde(default)]
    pub dense_all: bool,
}

impl BaseDescriptor {
    pub fn integers(inverted_primes: &[u64]) -> Self {
        let name = if inverted_primes.is_empty() {
            "Z".to_string()
        } else {
            let n: u64 = inverted_primes.iter().product();
            format!("Z[1/{n}]")
        };
        BaseDescriptor {
            name,
            brauer: brauer_localized_integers(&rational_places(inverted_primes)),
            dense: BTreeMap::new(),
            dense_all: true,
        }
    }

    pub fn field(name: &str) -> Self {
        BaseDescriptor {
            name: name.into(),
            brauer: DivisibleGroupDescriptor::symbol(format!("Br({name})")),
            dense: BTreeMap::new(),
            dense_all: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AffineLineReport {
    pub group: DivisibleGroupDescriptor,
    /// Per-prime validity of Br(S)_(p) ≅ Br(S[x])_(p); key 0 stands for
    /// "every prime".
    pub validity: BTreeMap<u64, bool>,
}

fn relevant_primes(d: &DivisibleGroupDescriptor) -> (Vec<u64>, bool) {
    let mut ps: Vec<u64> = d.qpzp_primes.clone();
    for &f in d.finite_part.invariant_factors() {
        ps.extend(factorize(f).into_iter().map(|(p, _)| p));
    }
    if d.infinite_f2 {
        ps.push(2);
    }
    ps.sort_unstable();
    ps.dedup();
    (ps, d.qz_copies > 0 || !d.symbolic.is_empty())
}

/// Br(S[x]) from Br(S), prime by prime.
pub fn brauer_affine_line(base: &BaseDescriptor) -> Result<AffineLineReport> {
    let (primes, all) = relevant_primes(&base.brauer);
    let mut validity = BTreeMap::new();
    if all {
        if !base.dense_all {
            return Err(Error::DensityUnknown(0));
        }
        validity.insert(0, true);
    }
    for p in primes {
        let v = match base.dense.get(&p) {
            Some(&v) => v,
            None if base.dense_all => true,
            None => return Err(Error::DensityUnknown(p)),
        };
        validity.insert(p, v);
    }
    Ok(AffineLineReport {
        group: base.brauer.clone(),
        validity,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LocalizationResult {
    Split {
        group: DivisibleGroupDescriptor,
    },
    Extension {
        sub: DivisibleGroupDescriptor,
        quot: DivisibleGroupDescriptor,
    },
}

impl LocalizationResult {
    pub fn contains_sub(&self, sub: &DivisibleGroupDescriptor) -> bool {
        match self {
            LocalizationResult::Split { group } => {
                (1..=12).all(|n| match (group.n_torsion_order(n), sub.n_torsion_order(n)) {
                    (Some(a), Some(b)) => a % b == 0,
                    _ => true,
                })
            }
            LocalizationResult::Extension { sub: s, .. } => s == sub,
        }
    }
}

/// 0 → Br(R)_(p) → Br(R[1/f])_(p) → H^1(R/f; Q/Z)_(p) → 0.
pub fn localization_sequence(
    br_r: &DivisibleGroupDescriptor,
    h1_quotient: &DivisibleGroupDescriptor,
    split: bool,
) -> LocalizationResult {
    if split || br_r.is_zero() || h1_quotient.is_zero() {
        LocalizationResult::Split {
            group: br_r.direct_sum(h1_quotient),
        }
    } else {
        LocalizationResult::Extension {
            sub: br_r.clone(),
            quot: h1_quotient.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_examples() {
        assert!(brauer_localized_integers(&[PlaceSpec::Real]).is_zero());
        let z6 = brauer_localized_integers(&rational_places(&[2, 3]));
        assert_eq!(z6.to_string(), "Q/Z ⊕ Z/2");
        let z2 = brauer_localized_integers(&rational_places(&[2]));
        assert_eq!(z2.to_string(), "Z/2");
        let cyclo = brauer_localized_integers(&[PlaceSpec::finite("p"), PlaceSpec::Complex]);
        assert!(cyclo.is_zero());
    }

    #[test]
    fn place_json() {
        let p = parse_places(r#"{"places":[{"kind":"finite","label":"2"},{"kind":"real"}]}"#).unwrap();
        assert_eq!(p, vec![PlaceSpec::finite("2"), PlaceSpec::Real]);
        assert_eq!(parse_places(r#"[{"kind":"real"}]"#).unwrap(), vec![PlaceSpec::Real]);
        assert!(parse_places(r#"[{"kind":"imaginary"}]"#).is_err());
    }

    #[test]
    fn h1() {
        assert_eq!(h1_qz_structural(&[5]).unwrap().to_string(), "Z/4 ⊕ Q_5/Z_5");
        assert!(h1_qz_structural(&[]).unwrap().is_zero());
        let s = h1_qz_structural(&[2, 3]).unwrap();
        assert_eq!(s.finite_part, "(Z/2)^2".parse().unwrap());
        assert_eq!(s.qpzp_primes, vec![2, 3]);
    }

    #[test]
    fn laurent() {
        assert!(brauer_laurent(&[PlaceSpec::Real], &[]).unwrap().is_zero());
        let z2 = brauer_laurent(&rational_places(&[2]), &[2]).unwrap();
        assert_eq!(z2.to_string(), "Z/2 ⊕ Z/2 ⊕ Q_2/Z_2");
    }

    #[test]
    fn affine_line() {
        let z = brauer_affine_line(&BaseDescriptor::integers(&[])).unwrap();
        assert!(z.group.is_zero());
        let z6 = brauer_affine_line(&BaseDescriptor::integers(&[2, 3])).unwrap();
        assert!(z6.validity.values().all(|&v| v));
        let q = brauer_affine_line(&BaseDescriptor::field("Q")).unwrap();
        assert_eq!(q.group.to_string(), "Br(Q)");
        let mut partial = BaseDescriptor::integers(&[2]);
        partial.dense_all = false;
        assert_eq!(brauer_affine_line(&partial), Err(Error::DensityUnknown(2)));
    }

    #[test]
    fn localization() {
        let z2 = DivisibleGroupDescriptor::finite(FgAbGroup::cyclic(2));
        let r = localization_sequence(&DivisibleGroupDescriptor::zero(), &z2, true);
        assert_eq!(r, LocalizationResult::Split { group: z2.clone() });
        let qz = DivisibleGroupDescriptor::qz(1);
        match localization_sequence(&qz, &z2, true) {
            LocalizationResult::Split { group } => assert_eq!(group.to_string(), "Q/Z ⊕ Z/2"),
            other => panic!("{other:?}"),
        }
        assert!(localization_sequence(&qz, &z2, false).contains_sub(&qz));
    }
}

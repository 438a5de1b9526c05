//! Additive and Picard descent spectral sequences for KO over étale
//! extensions of Z, Pic(KO_R) and LBr(KO).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::abelian::FgAbGroup;
use crate::charp::{FiniteField, SemilinearOperator};
use crate::cyccoh::{group_cohomology, CyclicModule};
use crate::data::{self, cite};
use crate::error::{Error, Result};
use crate::numbrauer::{brauer_localized_integers, DivisibleGroupDescriptor, PlaceSpec};
use crate::sheaftab::{group_str, Catalog, SheafSymbol, Site};
use crate::ssengine::{
    assemble_groups, column_filtration, comparison_import, witnesses_from_total, DifferentialRule, Entry, MapSpec, Pos,
    SSPage, SheafContext, SpectralSequence, UnresolvedConfig, UnresolvedPolicy, Window,
};

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EtaleRingDescriptor {
    pub version: Option<String>,
    pub name: String,
    #[serde(with = "group_str")]
    pub units: FgAbGroup,
    #[serde(with = "group_str")]
    pub pic: FgAbGroup,
    /// Degrees m_i with R/2 ≅ ∏ F_{2^{m_i}}; empty when 2 is a unit.
    #[serde(default)]
    pub residue_field_degrees_at_2: Vec<u32>,
    #[serde(default)]
    pub residue_field_degrees_at_3: Option<Vec<u32>>,
    #[serde(default)]
    pub h1_z2: Option<String>,
    #[serde(default)]
    pub h2_gm: Option<DivisibleGroupDescriptor>,
    #[serde(default)]
    pub places: Vec<PlaceSpec>,
    #[serde(default)]
    pub inverted_primes: Vec<u64>,
    #[serde(default = "default_true")]
    pub connected: bool,
    #[serde(default)]
    pub components: Vec<EtaleRingDescriptor>,
}

impl EtaleRingDescriptor {
    pub fn from_json(s: &str) -> Result<Self> {
        let r: EtaleRingDescriptor = serde_json::from_str(s)?;
        r.validate()?;
        Ok(r)
    }

    /// A shipped descriptor by file stem, e.g. `Z` or `Z_half_zeta4`.
    pub fn shipped(stem: &str) -> Result<Self> {
        Self::from_json(&data::load(&format!("rings/{stem}.json"))?.text)
    }

    pub fn validate(&self) -> Result<()> {
        let two_inverted = self.inverted_primes.contains(&2);
        if two_inverted && !self.residue_field_degrees_at_2.is_empty() {
            return Err(Error::Invalid(format!(
                "{}: 2 is inverted but R/2 has factors",
                self.name
            )));
        }
        if !two_inverted && self.connected && self.residue_field_degrees_at_2.is_empty() {
            return Err(Error::NoFact(format!(
                "{}: residue fields at 2 not recorded",
                self.name
            )));
        }
        if !self.connected && self.components.is_empty() {
            return Err(Error::Invalid(format!(
                "{}: disconnected ring without components",
                self.name
            )));
        }
        for c in &self.components {
            c.validate()?;
        }
        Ok(())
    }

    pub fn h2_gm(&self) -> DivisibleGroupDescriptor {
        self.h2_gm
            .clone()
            .unwrap_or_else(|| brauer_localized_integers(&self.places))
    }

    /// Number of factors of R/2 on which x + x² has nonzero kernel,
    /// counted with kernel dimension.
    pub fn d(&self) -> Result<usize> {
        let op = SemilinearOperator::parse(2, "x + x^2")?;
        let mut d = 0;
        for &m in &self.residue_field_degrees_at_2 {
            d += FiniteField::new(2, m)?.operator_dims(&op)?.0;
        }
        Ok(d)
    }
}

/// E_2 of the C_2 homotopy fixed point spectral sequence for KU, over Z.
pub fn ku_additive_pages(s_max: i64, t_min: i64, t_max: i64) -> Result<SpectralSequence> {
    let mut page = SSPage::new(
        2,
        Window {
            max_s: s_max,
            max_t: t_max,
        },
    );
    for t in t_min..=t_max {
        if t.rem_euclid(2) == 1 {
            continue;
        }
        let m = if t.rem_euclid(4) == 0 {
            CyclicModule::trivial(FgAbGroup::free(1))
        } else {
            CyclicModule::sign(FgAbGroup::free(1))
        };
        for s in 0..=s_max {
            page.insert(Pos::new(s, t), Entry::group(group_cohomology(&m, s as u32)?));
        }
    }
    let mut rules = Vec::new();
    for (&p, e) in page.entries.iter() {
        if (p.t - 2 * p.s).rem_euclid(8) != 4 {
            continue;
        }
        let g = e.as_group().unwrap();
        let map = if g.free_rank() > 0 {
            MapSpec::Matrix { rows: vec![vec![1]] }
        } else {
            MapSpec::Iso
        };
        rules.push(DifferentialRule::new(3, p, 0, map, &cite("ko_additive"))?);
    }
    let mut seq = SpectralSequence::new(page);
    seq.register(rules, None)?;
    seq.stable_after = Some(3);
    Ok(seq)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Knob {
    #[default]
    Zero,
    Nonzero,
    Unknown,
}

impl Knob {
    fn policy(self) -> UnresolvedPolicy {
        match self {
            Knob::Zero => UnresolvedPolicy::AssumedZero,
            Knob::Nonzero => UnresolvedPolicy::Iso,
            Knob::Unknown => UnresolvedPolicy::Unknown,
        }
    }
}

/// The sheafy Picard spectral sequence for KO over Spec Z, in the window.
pub fn ko_picard_pages(catalog: &Catalog, max_s: i64, max_t: i64) -> Result<SpectralSequence> {
    let additive = ku_additive_pages(max_s + 1, 0, max_t)?;
    let window = Window { max_s, max_t };
    let mut page = SSPage::new(2, window);
    let z2 = || SheafSymbol::constant(FgAbGroup::cyclic(2));
    let o2 = || SheafSymbol::qc("O/2");
    for s in 0..=max_s {
        page.insert(Pos::new(s, 0), Entry::sheaf(z2()));
        let row1 = match s {
            0 => SheafSymbol::Gm,
            s if s % 2 == 1 => z2(),
            _ => o2(),
        };
        page.insert(Pos::new(s, 1), Entry::sheaf(row1));
        for t in 2..=max_t {
            let u = t - 1;
            let sym = if u % 2 == 1 {
                continue;
            } else if u % 4 == 0 {
                match s {
                    0 => SheafSymbol::qc("O"),
                    s if s % 2 == 0 => o2(),
                    _ => continue,
                }
            } else if s % 2 == 1 {
                o2()
            } else {
                continue;
            };
            page.insert(Pos::new(s, t), Entry::sheaf(sym));
        }
    }
    let mut rules = vec![
        DifferentialRule::new(2, Pos::new(1, 0), 0, MapSpec::Iso, &cite("ko_pic"))?,
        DifferentialRule::new(
            3,
            Pos::new(2, 1),
            0,
            MapSpec::Unresolved { name: "d3_21".into() },
            &cite("ko_d3_21"),
        )?,
        DifferentialRule::new(
            3,
            Pos::new(3, 3),
            0,
            MapSpec::Operator {
                name: "x + x^2".into(),
                p: 2,
            },
            &cite("ko_d3_33"),
        )?,
    ];
    let positions: Vec<Pos> = page.entries.keys().copied().collect();
    for p in positions {
        if p.t < 4 {
            continue;
        }
        let rule = comparison_import(&additive, 3, p.s, p.t, 0)?;
        if rule.map != MapSpec::Zero {
            rules.push(rule);
        }
    }
    let ctx = SheafContext {
        catalog,
        site: Site::SpecZ,
    };
    let mut seq = SpectralSequence::new(page);
    seq.register(rules, Some(&ctx))?;
    seq.stable_after = Some(3);
    Ok(seq)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GradedPiece {
    pub s: i64,
    pub sheaf: String,
    #[serde(with = "group_str")]
    pub sections: FgAbGroup,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PicKoReport {
    pub ring: String,
    pub d: usize,
    pub graded: Vec<GradedPiece>,
    #[serde(with = "group_str")]
    pub pi0pic_sections: FgAbGroup,
    pub witness_order: u64,
    #[serde(with = "group_str")]
    pub pic_r: FgAbGroup,
    /// Present when Pic(R) = 0 or the extension is forced.
    pub group: Option<String>,
    pub order: Option<u64>,
    pub d3_21: Knob,
    pub d3_21_sensitive: bool,
    pub citations: Vec<String>,
}

fn sections_over(entry: &Entry, ring: &EtaleRingDescriptor) -> Result<FgAbGroup> {
    let sheaf = entry
        .as_sheaf()
        .ok_or_else(|| Error::Invalid("KO Picard entries are sheaves".into()))?;
    match sheaf {
        SheafSymbol::Constant { group } => Ok(group.clone()),
        SheafSymbol::ClosedPush { group, point } if point.prime == Some(2) && point.j.is_none() => {
            let d = ring.d()?;
            let mut g = FgAbGroup::zero();
            for _ in 0..d {
                g = g.direct_sum(group);
            }
            Ok(g)
        }
        other => Err(Error::NoFact(format!("sections of {other} over {}", ring.name))),
    }
}

fn column0(catalog: &Catalog, knob: Knob) -> Result<Vec<(i64, Entry)>> {
    let mut seq = ko_picard_pages(catalog, 13, 14)?;
    let cfg = UnresolvedConfig::all(UnresolvedPolicy::AssumedZero).with("d3_21", knob.policy());
    let ctx = SheafContext {
        catalog,
        site: Site::SpecZ,
    };
    seq.run(&cfg, Some(&ctx))?;
    Ok(column_filtration(&seq, 0)?
        .into_iter()
        .map(|f| (f.s, f.entry))
        .collect())
}

pub fn pic_ko(catalog: &Catalog, ring: &EtaleRingDescriptor, knob: Knob) -> Result<PicKoReport> {
    if !ring.connected {
        let parts: Vec<PicKoReport> = ring
            .components
            .iter()
            .map(|c| pic_ko(catalog, c, knob))
            .collect::<Result<_>>()?;
        let group = parts
            .iter()
            .map(|p| p.group.as_ref().map(|g| g.parse::<FgAbGroup>()))
            .collect::<Option<std::result::Result<Vec<_>, _>>>()
            .transpose()?
            .map(|gs| FgAbGroup::sum_all(&gs).to_string());
        let order = parts.iter().try_fold(1u64, |acc, p| p.order.map(|o| acc * o));
        return Ok(PicKoReport {
            ring: ring.name.clone(),
            d: parts.iter().map(|p| p.d).sum(),
            graded: Vec::new(),
            pi0pic_sections: FgAbGroup::sum_all(parts.iter().map(|p| &p.pi0pic_sections)),
            witness_order: parts.iter().map(|p| p.witness_order).max().unwrap_or(1),
            pic_r: ring.pic.clone(),
            group,
            order,
            d3_21: knob,
            d3_21_sensitive: parts.iter().any(|p| p.d3_21_sensitive),
            citations: vec!["componentwise sum".into()],
        });
    }
    let col = column0(catalog, knob)?;
    let sensitive = [Knob::Zero, Knob::Nonzero, Knob::Unknown]
        .into_iter()
        .map(|k| column0(catalog, k))
        .collect::<Result<Vec<_>>>()?
        .windows(2)
        .any(|w| w[0] != w[1]);
    let mut graded = Vec::new();
    for (s, e) in &col {
        graded.push(GradedPiece {
            s: *s,
            sheaf: e.to_string(),
            sections: sections_over(e, ring)?,
        });
    }
    let d = ring.d()?;
    let w = if d >= 1 { 8 } else { 4 };
    let gr: Vec<FgAbGroup> = graded.iter().map(|g| g.sections.clone()).collect();
    let sections = assemble_groups(&gr, &witnesses_from_total(&gr, w))?;
    let (group, order) = if ring.pic.is_zero() {
        (Some(sections.to_string()), sections.order())
    } else {
        (None, ring.pic.order().zip(sections.order()).map(|(a, b)| a * b))
    };
    Ok(PicKoReport {
        ring: ring.name.clone(),
        d,
        graded,
        pi0pic_sections: sections,
        witness_order: w,
        pic_r: ring.pic.clone(),
        group,
        order,
        d3_21: knob,
        d3_21_sensitive: sensitive,
        citations: vec![cite("ko_pic"), cite("ko_pic_r"), cite("ko_d3_33"), cite("comparison")],
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum D2 {
    Zero,
    Nonzero,
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LbrValue {
    Exact {
        group: DivisibleGroupDescriptor,
    },
    Extension {
        sub: DivisibleGroupDescriptor,
        quot: DivisibleGroupDescriptor,
    },
    Interval {
        lower: DivisibleGroupDescriptor,
        upper: DivisibleGroupDescriptor,
        reason: String,
    },
}

impl LbrValue {
    pub fn exact(&self) -> Option<&DivisibleGroupDescriptor> {
        match self {
            LbrValue::Exact { group } => Some(group),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OmniReport {
    pub sequence: BTreeMap<String, String>,
    pub lbr: LbrValue,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OmniInputs {
    pub h1_gm: DivisibleGroupDescriptor,
    pub h0_pi1: DivisibleGroupDescriptor,
    pub h2_gm: DivisibleGroupDescriptor,
    pub h1_pi1: DivisibleGroupDescriptor,
    pub h3_gm: Option<DivisibleGroupDescriptor>,
    pub pic_r_surjects: bool,
    pub d2: D2,
}

/// H²(G_m) → LBr → H¹(π₁) → H³(G_m) from the six-term sequence.
pub fn omni_assemble(i: &OmniInputs) -> OmniReport {
    let show = |d: &DivisibleGroupDescriptor| d.to_string();
    let mut sequence = BTreeMap::new();
    sequence.insert("1:H1(Gm)".into(), show(&i.h1_gm));
    sequence.insert("2:H0(pi1)".into(), show(&i.h0_pi1));
    sequence.insert("3:H2(Gm)".into(), show(&i.h2_gm));
    sequence.insert("4:H1(pi1)".into(), show(&i.h1_pi1));
    sequence.insert(
        "5:H3(Gm)".into(),
        i.h3_gm.as_ref().map(show).unwrap_or_else(|| "unknown".into()),
    );
    let zero = DivisibleGroupDescriptor::zero();
    let coker = if i.pic_r_surjects || i.h0_pi1.is_zero() {
        Some(i.h2_gm.clone())
    } else if i.h2_gm.is_zero() {
        Some(zero.clone())
    } else {
        None
    };
    let d2_zero = i.d2 == D2::Zero || i.h1_pi1.is_zero() || i.h3_gm.as_ref().is_some_and(|h| h.is_zero());
    let lbr = match (coker, d2_zero) {
        (Some(c), true) => {
            if c.is_zero() {
                LbrValue::Exact {
                    group: i.h1_pi1.clone(),
                }
            } else if i.h1_pi1.is_zero() {
                LbrValue::Exact { group: c }
            } else {
                LbrValue::Extension {
                    sub: c,
                    quot: i.h1_pi1.clone(),
                }
            }
        }
        (Some(c), false) => LbrValue::Interval {
            lower: c.clone(),
            upper: c.direct_sum(&i.h1_pi1),
            reason: "d2 into H3(Gm) undecided".into(),
        },
        (None, _) => LbrValue::Interval {
            lower: zero,
            upper: i.h2_gm.direct_sum(&i.h1_pi1),
            reason: "image of H0(pi1) in H2(Gm) undecided".into(),
        },
    };
    OmniReport { sequence, lbr }
}

/// Connective case: LBr = H¹(Spec π₀R; Z) × H²(Spec π₀R; G_m).
pub fn omni_connective(h1_z: &DivisibleGroupDescriptor, h2_gm: &DivisibleGroupDescriptor) -> LbrValue {
    LbrValue::Exact {
        group: h1_z.direct_sum(h2_gm),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LbrKoReport {
    pub group: String,
    pub omni: OmniReport,
    pub d2: D2,
    pub d2_reason: String,
    pub citations: Vec<String>,
}

pub fn lbr_ko(catalog: &Catalog) -> Result<LbrKoReport> {
    let pi = catalog.facts.named("pi0pic_KO")?;
    let as_desc = |s: u32| -> Result<DivisibleGroupDescriptor> {
        let e = catalog.cohomology(&pi, s, &Site::SpecZ);
        e.answer
            .as_group()
            .cloned()
            .map(DivisibleGroupDescriptor::finite)
            .ok_or_else(|| Error::NoFact(e.answer.to_string()))
    };
    let ku = catalog.cohomology(&SheafSymbol::constant(FgAbGroup::cyclic(2)), 1, &Site::SpecZ);
    let (d2, reason) = if ku.answer.is_zero() {
        (
            D2::Zero,
            "factors through H1(Spec Z; pi0 pic KU) = H1(Spec Z; Z/2) = 0".to_string(),
        )
    } else {
        (D2::Unknown, "comparison with KU inconclusive".to_string())
    };
    let h2 = catalog.cohomology(&SheafSymbol::Gm, 2, &Site::SpecZ);
    let h2 = match h2.answer {
        crate::sheaftab::CohomologyAnswer::Group { value } => DivisibleGroupDescriptor::finite(value),
        crate::sheaftab::CohomologyAnswer::Divisible { value } => value,
        other => return Err(Error::NoFact(other.to_string())),
    };
    let inputs = OmniInputs {
        h1_gm: DivisibleGroupDescriptor::zero(),
        h0_pi1: as_desc(0)?,
        h2_gm: h2,
        h1_pi1: as_desc(1)?,
        h3_gm: None,
        pic_r_surjects: true,
        d2,
    };
    let omni = omni_assemble(&inputs);
    let group = match &omni.lbr {
        LbrValue::Exact { group } => group.to_string(),
        other => return Err(Error::NoFact(format!("LBr(KO) not decided: {other:?}"))),
    };
    Ok(LbrKoReport {
        group,
        omni,
        d2,
        d2_reason: reason,
        citations: vec![cite("lbr_ko"), cite("omni"), cite("ko_pic")],
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CoverCheck {
    pub ring: String,
    pub class_killed: bool,
    pub reason: String,
    pub brauer_vanishes: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SplittingReport {
    pub covers: Vec<CoverCheck>,
    pub faithful: bool,
    pub split: bool,
    /// "split", "partial" or "not_split".
    pub status: String,
}

/// Whether the generator of LBr(KO), living in H¹(F_2; Z/2), dies on
/// every member of the cover, and whether the cover is faithful.
pub fn lbr_ko_splitting_check(covers: &[EtaleRingDescriptor]) -> Result<SplittingReport> {
    let mut checks = Vec::new();
    for c in covers {
        c.validate()?;
        let (killed, reason) = if c.inverted_primes.contains(&2) {
            (true, "i_*Z/2 restricts to zero with 2 inverted".to_string())
        } else {
            // restriction H¹(F_2; Z/2) → H¹(F_{2^m}; Z/2) is multiplication by m
            let odd: Vec<u32> = c
                .residue_field_degrees_at_2
                .iter()
                .copied()
                .filter(|m| m % 2 == 1)
                .collect();
            if odd.is_empty() {
                (
                    true,
                    format!("residue degrees {:?} at 2 are all even", c.residue_field_degrees_at_2),
                )
            } else {
                (false, format!("residue field F_{} survives", 1u64 << odd[0]))
            }
        };
        checks.push(CoverCheck {
            ring: c.name.clone(),
            class_killed: killed,
            reason,
            brauer_vanishes: c.h2_gm().is_zero(),
        });
    }
    let mut common: Option<Vec<u64>> = None;
    for c in covers {
        common = Some(match common {
            None => c.inverted_primes.clone(),
            Some(v) => v.into_iter().filter(|p| c.inverted_primes.contains(p)).collect(),
        });
    }
    let faithful = !covers.is_empty() && common.is_some_and(|v| v.is_empty());
    let killed = !checks.is_empty() && checks.iter().all(|c| c.class_killed && c.brauer_vanishes);
    let split = killed && faithful;
    let status = if split {
        "split"
    } else if killed {
        "partial"
    } else {
        "not_split"
    };
    Ok(SplittingReport {
        covers: checks,
        faithful,
        split,
        status: status.into(),
    })
}

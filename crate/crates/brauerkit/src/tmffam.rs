//! The sheafy Picard spectral sequence for TMF over the j-line and the
//! Picard and local Brauer groups read off from it.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::abelian::{resolve_extension_opt, ExtensionWitness, FgAbGroup};
use crate::charp::{monomial_name, operator_cokernel_basis, FiniteField, SemilinearOperator, TruncatedCharPModule};
use crate::data::{self, cite};
use crate::error::{Error, Result};
use crate::kofam::EtaleRingDescriptor;
use crate::numbrauer::{brauer_affine_line, brauer_laurent, rational_places, BaseDescriptor};
use crate::sheaftab::{group_str, Catalog, CohomologyAnswer, Point, SheafSymbol, Site};
use crate::ssengine::{
    assemble_groups, column_filtration, witnesses_from_total, PageFile, SheafContext, SpectralSequence,
    UnresolvedConfig, UnresolvedPolicy,
};

#[derive(Clone, Debug, Deserialize)]
pub struct TmfPageData {
    pub version: String,
    pub unresolved: Vec<String>,
    pub page: PageFile,
}

impl TmfPageData {
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: serde_json::Value = serde_json::from_str(text)?;
        let page = &raw["page"];
        for e in page["entries"].as_array().into_iter().flatten() {
            if e.get("citation")
                .and_then(|c| c.as_str())
                .is_none_or(|c| c.trim().is_empty())
            {
                return Err(Error::Invalid(format!("entry without citation: {e}")));
            }
        }
        let data: TmfPageData = serde_json::from_value(raw)?;
        let named: BTreeSet<&str> = data.page.rules.iter().filter_map(|r| r.unresolved_name()).collect();
        let declared: BTreeSet<&str> = data.unresolved.iter().map(String::as_str).collect();
        if named != declared {
            return Err(Error::Invalid(format!(
                "unresolved rules {named:?} differ from the declared set {declared:?}"
            )));
        }
        Ok(data)
    }

    pub fn shipped() -> Result<Self> {
        Self::from_json(&data::load("tmf_pages.json")?.text)
    }

    pub fn sequence(&self, catalog: &Catalog) -> Result<SpectralSequence> {
        let ctx = SheafContext {
            catalog,
            site: Site::A1,
        };
        self.page.clone().into_sequence(Some(&ctx))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GradedSheaf {
    pub s: i64,
    pub sheaf: SheafSymbol,
    /// The piece before subsheaf bookkeeping for unresolved differentials.
    pub upper: SheafSymbol,
    pub markers: BTreeSet<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PicTmfRun {
    pub graded: Vec<GradedSheaf>,
    /// LBr-relevant column -1 on the last page, keyed by row.
    pub column_minus_one: BTreeMap<i64, Vec<SheafSymbol>>,
    pub markers: BTreeSet<String>,
    pub citations: Vec<String>,
}

impl PicTmfRun {
    pub fn gr(&self, s: i64) -> SheafSymbol {
        self.graded
            .iter()
            .find(|g| g.s == s)
            .map(|g| g.sheaf.clone())
            .unwrap_or(SheafSymbol::Zero)
    }

    fn upper(&self, s: i64) -> SheafSymbol {
        self.graded
            .iter()
            .find(|g| g.s == s)
            .map(|g| g.upper.clone())
            .unwrap_or(SheafSymbol::Zero)
    }

    /// The graded pieces with every subsheaf taken to be everything;
    /// exact when the unresolved differentials vanish.
    pub fn assumed_exact(&self) -> bool {
        self.markers.iter().all(|m| m.ends_with("=0"))
    }
}

pub fn run_pic_tmf(data: &TmfPageData, catalog: &Catalog, cfg: &UnresolvedConfig) -> Result<PicTmfRun> {
    let mut seq = data.sequence(catalog)?;
    let ctx = SheafContext {
        catalog,
        site: Site::A1,
    };
    seq.run(cfg, Some(&ctx))?;
    let mut rows: BTreeMap<i64, Vec<(SheafSymbol, BTreeSet<String>)>> = BTreeMap::new();
    for f in column_filtration(&seq, 0)? {
        let sheaf = f
            .entry
            .as_sheaf()
            .cloned()
            .ok_or_else(|| Error::Invalid("TMF page entries are sheaves".into()))?;
        rows.entry(f.s).or_default().push((sheaf, f.markers));
    }
    let mut graded = Vec::new();
    let mut all_markers = BTreeSet::new();
    for (s, parts) in rows {
        let mut markers = BTreeSet::new();
        let mut exact = Vec::new();
        let mut upper = Vec::new();
        for (sheaf, m) in parts {
            upper.push(sheaf.clone());
            if m.is_empty() {
                exact.push(sheaf);
            } else {
                exact.push(SheafSymbol::subsheaf(sheaf));
                markers.extend(m);
            }
        }
        exact.sort_by_key(|x| matches!(x, SheafSymbol::Subsheaf { .. }));
        all_markers.extend(markers.iter().cloned());
        graded.push(GradedSheaf {
            s,
            sheaf: SheafSymbol::sum(exact),
            upper: SheafSymbol::sum(upper),
            markers,
        });
    }
    if let Some(g) = graded.iter().find(|g| g.s > 7) {
        return Err(Error::Invalid(format!("column 0 survives in filtration {}", g.s)));
    }
    let mut column_minus_one: BTreeMap<i64, Vec<SheafSymbol>> = BTreeMap::new();
    for (p, e) in seq.last().column(-1) {
        if let Some(f) = e.as_sheaf() {
            column_minus_one.entry(p.s).or_default().push(f.clone());
        }
    }
    Ok(PicTmfRun {
        graded,
        column_minus_one,
        markers: all_markers,
        citations: vec![
            cite("pic_tmf"),
            cite("r1gm"),
            cite("d9_3"),
            cite("long_diff"),
            cite("vanish_high"),
        ],
    })
}

fn sections(catalog: &Catalog, f: &SheafSymbol, site: &Site) -> Result<FgAbGroup> {
    let e = catalog.cohomology(f, 0, site);
    e.answer
        .as_group()
        .cloned()
        .ok_or_else(|| Error::NoFact(format!("H^0({site}; {f}): {}", e.answer)))
}

fn tmf_periodicity(catalog: &Catalog) -> Result<u64> {
    catalog
        .facts
        .stated("tmf_periodicity")
        .and_then(|f| f.value.as_u64())
        .ok_or_else(|| Error::NoFact("order of TMF[1]".into()))
}

fn p_part(n: u64, p: u64) -> u64 {
    let mut n = n;
    let mut out = 1;
    while n > 0 && n.is_multiple_of(p) {
        n /= p;
        out *= p;
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LocalPic {
    pub prime: u64,
    #[serde(with = "group_str")]
    pub group: FgAbGroup,
    pub graded_sections: Vec<String>,
    pub witness_order: u64,
}

/// H^0(A^1; π_0 pic) localized at `p`, assembled from graded global sections.
pub fn pic_tmf_global(run: &PicTmfRun, catalog: &Catalog, p: u64) -> Result<LocalPic> {
    if !run.assumed_exact() {
        return Err(Error::NoFact(format!(
            "global sections depend on unresolved differentials {:?}",
            run.markers
        )));
    }
    let gr: Vec<FgAbGroup> = (0..=7)
        .map(|s| Ok(sections(catalog, &run.upper(s), &Site::A1)?.primary_part(p)))
        .collect::<Result<_>>()?;
    let w = p_part(tmf_periodicity(catalog)?, p);
    let group = assemble_groups(&gr, &witnesses_from_total(&gr, w))?;
    Ok(LocalPic {
        prime: p,
        group,
        graded_sections: gr.iter().map(|g| g.to_string()).collect(),
        witness_order: w,
    })
}

/// Product of the 2-parts of H^0 over the finest visible filtration.
fn finest_bound(catalog: &Catalog, f: &SheafSymbol, site: &Site) -> Result<u64> {
    Ok(match f {
        SheafSymbol::Extension { sub, quot, .. } => {
            finest_bound(catalog, sub, site)? * finest_bound(catalog, quot, site)?
        }
        SheafSymbol::Sum { parts } => {
            let mut n = 1;
            for x in parts {
                n *= finest_bound(catalog, x, site)?;
            }
            n
        }
        other => sections(catalog, other, site)?.primary_part(2).order().unwrap_or(1),
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct C4InvReport {
    #[serde(with = "group_str")]
    pub group: FgAbGroup,
    #[serde(with = "group_str")]
    pub kernel: FgAbGroup,
    #[serde(with = "group_str")]
    pub quotient: FgAbGroup,
    pub h1_gm: String,
    pub h2_gm: String,
    pub citations: Vec<String>,
}

/// Pic(TMF[c_4^{-1}]), with π_0 = Z[j^{±1}].
pub fn pic_tmf_c4inv(run: &PicTmfRun, catalog: &Catalog, drop_k: bool) -> Result<C4InvReport> {
    let gm = Site::Gm;
    let h1 = catalog.cohomology(&SheafSymbol::Gm, 1, &gm).answer;
    if !h1.is_zero() {
        return Err(Error::NoFact(format!("H^1(Gm; G_m) = {h1}")));
    }
    let br = brauer_laurent(&rational_places(&[]), &[])?;
    if !br.is_zero() {
        return Err(Error::NoFact(format!("Br(Z[j^±1]) = {br}")));
    }
    let q_a1: Vec<FgAbGroup> = (0..=1)
        .map(|s| Ok(sections(catalog, &run.upper(s), &Site::A1)?.primary_part(2)))
        .collect::<Result<_>>()?;
    let w = FgAbGroup::sum_all(&q_a1).order().unwrap_or(1);
    let q = assemble_groups(&q_a1, &witnesses_from_total(&q_a1, w))?;
    let mut bound = 1u64;
    for s in 0..=1 {
        bound *= finest_bound(catalog, &catalog.restrict(&run.upper(s), &gm)?, &gm)?;
    }
    // H^0(A1; Q) → H^0(Gm; u*Q) is injective
    if q.order() != Some(bound) {
        return Err(Error::NoFact(format!(
            "H^0(Gm; u*Q) has at most {bound} elements, H^0(A1; Q) is {q}"
        )));
    }
    let quotient = q;
    let mut kernel = FgAbGroup::zero();
    for s in 2..=7 {
        let piece = catalog.restrict(&run.upper(s), &gm)?;
        if drop_k && piece == SheafSymbol::KStarVShriek {
            continue;
        }
        kernel = kernel.direct_sum(&sections(catalog, &piece, &gm)?.primary_part(2));
    }
    let witness = quotient.exponent().unwrap_or(1);
    let group = if kernel.is_zero() {
        quotient.clone()
    } else {
        resolve_extension_opt(&kernel, &quotient, Some(ExtensionWitness::generator(witness)))?.group
    };
    Ok(C4InvReport {
        group,
        kernel,
        quotient,
        h1_gm: h1.to_string(),
        h2_gm: br.to_string(),
        citations: vec![cite("pic_tmf"), cite("br_laurent"), cite("c4inv")],
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IdealSections {
    Exact {
        #[serde(with = "group_str")]
        group: FgAbGroup,
    },
    OrderOnly {
        order: u64,
    },
    Symbolic {
        pieces: Vec<String>,
    },
}

impl IdealSections {
    pub fn order(&self) -> Option<u64> {
        match self {
            IdealSections::Exact { group } => group.order(),
            IdealSections::OrderOnly { order } => Some(*order),
            IdealSections::Symbolic { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PicTmfRReport {
    pub ring: String,
    #[serde(with = "group_str")]
    pub pic_r: FgAbGroup,
    pub h0_ideal: IdealSections,
    #[serde(with = "group_str")]
    pub quotient: FgAbGroup,
    pub order: Option<u64>,
    pub citations: Vec<String>,
}

fn local_data_known(ring: &EtaleRingDescriptor, p: u64) -> bool {
    if ring.inverted_primes.contains(&p) {
        return true;
    }
    let degs = match p {
        2 => Some(&ring.residue_field_degrees_at_2),
        3 => ring.residue_field_degrees_at_3.as_ref(),
        _ => None,
    };
    degs.is_some_and(|d| d == &[1])
}

/// Pic(TMF_R) through 0 → Pic(R) → Pic(TMF_R) → H^0(A^1_R; π_0 pic) → 0.
pub fn pic_tmf_r(run: &PicTmfRun, catalog: &Catalog, ring: &EtaleRingDescriptor) -> Result<PicTmfRReport> {
    let quotient = FgAbGroup::cyclic(24);
    if !ring.connected {
        let parts: Vec<PicTmfRReport> = ring
            .components
            .iter()
            .map(|c| pic_tmf_r(run, catalog, c))
            .collect::<Result<_>>()?;
        let order = parts.iter().try_fold(1u64, |a, p| p.order.map(|o| a * o));
        let h0 = match parts.iter().try_fold(1u64, |a, p| p.h0_ideal.order().map(|o| a * o)) {
            Some(o) => IdealSections::OrderOnly { order: o },
            None => IdealSections::Symbolic {
                pieces: parts.iter().map(|p| format!("{}: {:?}", p.ring, p.h0_ideal)).collect(),
            },
        };
        return Ok(PicTmfRReport {
            ring: ring.name.clone(),
            pic_r: ring.pic.clone(),
            h0_ideal: h0,
            quotient: FgAbGroup::sum_all(parts.iter().map(|p| &p.quotient)),
            order,
            citations: vec!["componentwise sum".into()],
        });
    }
    let site = if ring.inverted_primes.is_empty() {
        Site::A1
    } else {
        Site::A1Inv(ring.inverted_primes.clone())
    };
    let ideal: Vec<SheafSymbol> = (2..=7)
        .map(|s| catalog.restrict(&run.upper(s), &site))
        .collect::<Result<_>>()?;
    let known = local_data_known(ring, 2) && local_data_known(ring, 3);
    let h0 = if known && run.assumed_exact() {
        let gs: Vec<FgAbGroup> = ideal
            .iter()
            .map(|f| sections(catalog, f, &site))
            .collect::<Result<_>>()?;
        let total = FgAbGroup::sum_all(&gs);
        if gs.iter().filter(|g| !g.is_zero()).count() <= 1 {
            IdealSections::Exact { group: total }
        } else {
            IdealSections::OrderOnly {
                order: total.order().unwrap_or(0),
            }
        }
    } else {
        IdealSections::Symbolic {
            pieces: ideal
                .iter()
                .filter(|f| !f.is_zero())
                .map(|f| format!("H^0(A1_R; {f})"))
                .collect(),
        }
    };
    let order = match (&h0, ring.pic.order()) {
        (h, Some(pr)) => h.order().map(|o| pr * o * 24),
        _ => None,
    };
    Ok(PicTmfRReport {
        ring: ring.name.clone(),
        pic_r: ring.pic.clone(),
        h0_ideal: h0,
        quotient,
        order,
        citations: vec![cite("pic_tmf_r"), cite("pic_tmf")],
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TwoLocalLbr {
    /// Monomial representatives of the truncated cokernel of x + jx².
    pub basis: Vec<String>,
    /// Even powers j^2, j^4, ... certified independent in the window.
    pub certified_prefix: Vec<String>,
    pub certified_through: i64,
    pub split_surjection: String,
    pub kernel: String,
    pub kernel_order_bound: Option<u64>,
    pub markers: BTreeSet<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LbrTmfReport {
    pub window: i64,
    pub br_pi0: String,
    #[serde(with = "group_str")]
    pub three_torsion: FgAbGroup,
    pub torsion_above_3: String,
    pub two_local: TwoLocalLbr,
    pub citations: Vec<String>,
}

fn two_local_basis(window: i64) -> Result<(Vec<String>, Vec<String>, i64)> {
    if window < 8 {
        return Err(Error::WindowTooSmall(format!("window {window} < 8")));
    }
    let op = SemilinearOperator::parse(2, "x + j*x^2")?;
    let m = TruncatedCharPModule::polynomial(2, window)?;
    let coker = operator_cokernel_basis(&op, &m)?;
    let top = coker.stable_prefix_degree;
    let prefix: Vec<String> = coker
        .basis
        .iter()
        .filter(|&&d| d >= 2 && d % 2 == 0 && d <= top)
        .map(|&d| monomial_name(d))
        .collect();
    Ok((coker.basis_strings(), prefix, top))
}

/// Order of H^1 of a sheaf supported at (2, j), as a Galois module over F_2.
fn h1_at_a(catalog: &Catalog, f: &SheafSymbol) -> Option<u64> {
    let e = catalog.cohomology(f, 1, &Site::A1);
    match e.answer {
        CohomologyAnswer::Group { value } => value.order(),
        _ => None,
    }
}

pub fn lbr_tmf(run: &PicTmfRun, catalog: &Catalog, window: i64) -> Result<LbrTmfReport> {
    let br = brauer_affine_line(&BaseDescriptor::integers(&[]))?;
    if !br.group.is_zero() {
        return Err(Error::NoFact(format!("Br(Z[j]) = {}", br.group)));
    }
    let b3 = SheafSymbol::closed_push(Point::b(), FgAbGroup::cyclic(3));
    let gr5 = run.upper(5);
    if gr5.primary_part(3).normalized() != b3.normalized() {
        return Err(Error::NoFact(format!("3-part of gr5 is {}", gr5.primary_part(3))));
    }
    let three = catalog.cohomology(&b3, 1, &Site::A1);
    let three = three
        .answer
        .as_group()
        .cloned()
        .ok_or_else(|| Error::NoFact(three.answer.to_string()))?;
    let above: Vec<u64> = [5u64, 7, 11, 13]
        .into_iter()
        .filter(|&p| (0..=7).any(|s| !run.upper(s).primary_part(p).is_zero()))
        .collect();
    let torsion_above_3 = if above.is_empty() {
        "0".to_string()
    } else {
        format!("possible at {above:?}")
    };
    let (basis, prefix, top) = two_local_basis(window)?;
    let mut bound = Some(1u64);
    for s in 5..=7 {
        let piece = run.upper(s).primary_part(2);
        if piece.is_zero() {
            continue;
        }
        bound = bound.zip(h1_at_a(catalog, &piece)).map(|(a, b)| a * b);
    }
    Ok(LbrTmfReport {
        window,
        br_pi0: br.group.to_string(),
        three_torsion: three,
        torsion_above_3,
        two_local: TwoLocalLbr {
            basis,
            certified_prefix: prefix,
            certified_through: top,
            split_surjection: "LBr(TMF)_(2) → H^1(A1; k_*v_!Z/2) ≅ (Z/2)^∞, split".into(),
            kernel: "H^1(A1; F^5)_(2), finite".into(),
            kernel_order_bound: bound,
            markers: run.markers.clone(),
        },
        citations: vec![cite("lbr_tmf"), cite("br_properties"), cite("br_computations")],
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RowContribution {
    pub row: i64,
    #[serde(with = "group_str")]
    pub group: FgAbGroup,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LbrMoReport {
    pub window: i64,
    #[serde(with = "group_str")]
    pub three_torsion: FgAbGroup,
    pub torsion_above_3: String,
    pub basis: Vec<String>,
    pub certified_prefix: Vec<String>,
    pub kernel_rows: Vec<RowContribution>,
    pub kernel_order: u64,
    pub kernel_note: String,
    pub comparison_odd: String,
    pub cokernel_rows: Vec<i64>,
    pub cokernel_order_bound: u64,
    pub markers: BTreeSet<String>,
    pub citations: Vec<String>,
}

pub fn lbr_m_o(run: &PicTmfRun, catalog: &Catalog, window: i64) -> Result<LbrMoReport> {
    let tmf = lbr_tmf(run, catalog, window)?;
    let o2j = SheafSymbol::qc("O/(2,j)");
    let fq = sections(catalog, &o2j, &Site::A1)?;
    // Row 10 is the cokernel of d5 on global sections, x ↦ x + x² on F_2.
    let (_, im) = FiniteField::new(2, 1)?.operator_dims(&SemilinearOperator::parse(2, "x + x^2")?)?;
    let row10 = FgAbGroup::elementary(2, 1 - im);
    let mut rows = vec![RowContribution {
        row: 10,
        group: row10,
        reason: "cokernel of x + x^2 on H^0(A1; O/(2,j)) = F_2".into(),
    }];
    for row in [18, 30] {
        rows.push(RowContribution {
            row,
            group: fq.clone(),
            reason: "H^0(A1; O/(2,j)); supports no differential".into(),
        });
    }
    let kernel_order = rows.iter().map(|r| r.group.order().unwrap_or(0)).product();
    let odd_rows: Vec<i64> = run
        .column_minus_one
        .iter()
        .filter(|(s, v)| **s >= 3 && v.iter().any(|x| !x.primary_part(3).is_zero()))
        .map(|(s, _)| *s)
        .collect();
    let comparison_odd = if odd_rows.is_empty() {
        "isomorphism after inverting 2".to_string()
    } else {
        format!("odd contributions in rows {odd_rows:?}")
    };
    let cokernel_rows: Vec<i64> = run
        .column_minus_one
        .iter()
        .filter(|(s, v)| **s >= 3 && v.contains(&o2j))
        .map(|(s, _)| *s)
        .collect();
    let cokernel_order_bound = fq.order().unwrap_or(1).pow(cokernel_rows.len() as u32);
    let mut markers = run.markers.clone();
    markers.insert("d9_lbr_row6 undecided: row 6 contributes ker(d9)".into());
    Ok(LbrMoReport {
        window,
        three_torsion: tmf.three_torsion,
        torsion_above_3: tmf.torsion_above_3,
        basis: tmf.two_local.basis,
        certified_prefix: tmf.two_local.certified_prefix,
        kernel_rows: rows,
        kernel_order,
        kernel_note: format!(
            "order 8 ({}); weaker statement: at most 8 ({})",
            cite("lbr_mo1"),
            cite("lbr_summary")
        ),
        comparison_odd,
        cokernel_rows,
        cokernel_order_bound,
        markers,
        citations: vec![cite("lbr_mo1"), cite("lbr_mo"), cite("long_diff")],
    })
}

pub fn default_config() -> UnresolvedConfig {
    UnresolvedConfig::all(UnresolvedPolicy::AssumedZero)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (TmfPageData, Catalog) {
        (TmfPageData::shipped().unwrap(), Catalog::load().unwrap())
    }

    #[test]
    fn graded_pieces_through_row7() {
        let (d, c) = setup();
        let run = run_pic_tmf(&d, &c, &default_config()).unwrap();
        let shown: Vec<(i64, String)> = run.graded.iter().map(|g| (g.s, g.sheaf.to_string())).collect();
        assert_eq!(
            shown,
            vec![
                (0, "Z/2".to_string()),
                (1, "R^1j_*G_m".to_string()),
                (3, "k_*v_!Z/2".to_string()),
                (5, "b_*Z/3 ⊕ sub(A)".to_string()),
                (7, "sub(O/(2,j))".to_string()),
            ]
        );
    }

    #[test]
    fn global_values() {
        let (d, c) = setup();
        let run = run_pic_tmf(&d, &c, &default_config()).unwrap();
        assert_eq!(pic_tmf_global(&run, &c, 2).unwrap().group.to_string(), "Z/64");
        assert_eq!(pic_tmf_global(&run, &c, 3).unwrap().group.to_string(), "Z/9");
        assert!(pic_tmf_global(&run, &c, 5).unwrap().group.is_zero());
        assert_eq!(pic_tmf_c4inv(&run, &c, false).unwrap().group.to_string(), "Z/2 ⊕ Z/8");
        assert_eq!(pic_tmf_c4inv(&run, &c, true).unwrap().group.to_string(), "Z/8");
    }

    #[test]
    fn rings() {
        let (d, c) = setup();
        let run = run_pic_tmf(&d, &c, &default_config()).unwrap();
        let z = pic_tmf_r(&run, &c, &EtaleRingDescriptor::shipped("Z").unwrap()).unwrap();
        assert_eq!(z.h0_ideal.order(), Some(24));
        assert_eq!(z.order, Some(576));
        let z6 = pic_tmf_r(&run, &c, &EtaleRingDescriptor::shipped("Z_sixth").unwrap()).unwrap();
        assert_eq!(z6.h0_ideal.order(), Some(1));
    }

    #[test]
    fn lbr() {
        let (d, c) = setup();
        let run = run_pic_tmf(&d, &c, &default_config()).unwrap();
        let t = lbr_tmf(&run, &c, 32).unwrap();
        assert_eq!(t.three_torsion.to_string(), "Z/3");
        assert_eq!(t.torsion_above_3, "0");
        assert!(t.two_local.certified_prefix.len() >= 15);
        let m = lbr_m_o(&run, &c, 32).unwrap();
        assert_eq!(m.kernel_order, 8);
        assert_eq!(m.comparison_odd, "isomorphism after inverting 2");
        assert_eq!(m.cokernel_order_bound, 8);
    }
}

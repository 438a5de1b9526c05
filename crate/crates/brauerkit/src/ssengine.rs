//! Adams-indexed spectral sequence pages with rule-driven differentials.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::abelian::{hom_cokernel, homology, resolve_extension_opt, ExtensionWitness, FgAbGroup, GroupHom, IntMatrix};
use crate::charp::{operator_kernel, operator_rank, SemilinearOperator, TruncatedCharPModule};
use crate::error::{Error, Result};
use crate::sheaftab::{group_str, Catalog, SheafSymbol, Site};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Pos {
    pub s: i64,
    pub t: i64,
    #[serde(default)]
    pub k: usize,
}

impl Pos {
    pub fn new(s: i64, t: i64) -> Self {
        Pos { s, t, k: 0 }
    }

    pub fn at(s: i64, t: i64, k: usize) -> Self {
        Pos { s, t, k }
    }

    pub fn stem(&self) -> i64 {
        self.t - self.s
    }

    /// Target of d_r from here, same summand index.
    pub fn d(&self, r: u32) -> Pos {
        Pos::at(self.s + r as i64, self.t + r as i64 - 1, self.k)
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.k == 0 {
            write!(f, "({},{})", self.s, self.t)
        } else {
            write!(f, "({},{},{})", self.s, self.t, self.k)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Entry {
    Group {
        #[serde(with = "group_str")]
        group: FgAbGroup,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
    },
    Sheaf {
        sheaf: SheafSymbol,
    },
    CharP {
        module: TruncatedCharPModule,
    },
}

impl Entry {
    pub fn group(g: FgAbGroup) -> Self {
        Entry::Group { group: g, label: None }
    }

    pub fn sheaf(s: SheafSymbol) -> Self {
        Entry::Sheaf { sheaf: s.normalized() }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Entry::Group { group, .. } => group.is_zero(),
            Entry::Sheaf { sheaf } => sheaf.is_zero(),
            Entry::CharP { module } => module.dim() == 0,
        }
    }

    pub fn as_group(&self) -> Option<&FgAbGroup> {
        match self {
            Entry::Group { group, .. } => Some(group),
            _ => None,
        }
    }

    pub fn as_sheaf(&self) -> Option<&SheafSymbol> {
        match self {
            Entry::Sheaf { sheaf } => Some(sheaf),
            _ => None,
        }
    }
}

impl fmt::Display for Entry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Entry::Group { label: Some(l), .. } => write!(f, "{l}"),
            Entry::Group { group, .. } => write!(f, "{group}"),
            Entry::Sheaf { sheaf } => write!(f, "{sheaf}"),
            Entry::CharP { module } => write!(
                f,
                "F_{}[j]{}_[{},{}]",
                module.p,
                if module.laurent { "^±" } else { "" },
                module.lo,
                module.hi
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MapSpec {
    Zero,
    Iso,
    Matrix { rows: Vec<Vec<i64>> },
    Operator { name: String, p: u64 },
    Imported { inner: Box<MapSpec> },
    Unresolved { name: String },
}

impl MapSpec {
    fn effective(&self) -> &MapSpec {
        match self {
            MapSpec::Imported { inner } => inner.effective(),
            m => m,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DifferentialRule {
    pub r: u32,
    pub source: Pos,
    pub target: Pos,
    pub map: MapSpec,
    pub provenance: String,
}

impl DifferentialRule {
    pub fn new(r: u32, source: Pos, target_k: usize, map: MapSpec, provenance: &str) -> Result<Self> {
        let mut target = source.d(r);
        target.k = target_k;
        let rule = DifferentialRule {
            r,
            source,
            target,
            map,
            provenance: provenance.into(),
        };
        rule.validate()?;
        Ok(rule)
    }

    pub fn validate(&self) -> Result<()> {
        if self.r < 2 {
            return Err(Error::Invalid(format!("page {} < 2", self.r)));
        }
        let d = self.source.d(self.r);
        if (d.s, d.t) != (self.target.s, self.target.t) {
            return Err(Error::Invalid(format!(
                "d_{} from {} must land in ({},{}), not {}",
                self.r, self.source, d.s, d.t, self.target
            )));
        }
        if self.provenance.trim().is_empty() {
            return Err(Error::Invalid(format!("rule at {} has no provenance", self.source)));
        }
        Ok(())
    }

    pub fn unresolved_name(&self) -> Option<&str> {
        match self.map.effective() {
            MapSpec::Unresolved { name } => Some(name),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum UnresolvedPolicy {
    #[default]
    AssumedZero,
    Iso,
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct UnresolvedConfig {
    #[serde(default)]
    pub default: UnresolvedPolicy,
    #[serde(default)]
    pub overrides: BTreeMap<String, UnresolvedPolicy>,
}

impl UnresolvedConfig {
    pub fn all(policy: UnresolvedPolicy) -> Self {
        UnresolvedConfig {
            default: policy,
            overrides: BTreeMap::new(),
        }
    }

    pub fn with(mut self, name: &str, policy: UnresolvedPolicy) -> Self {
        self.overrides.insert(name.into(), policy);
        self
    }

    pub fn policy(&self, name: &str) -> UnresolvedPolicy {
        self.overrides.get(name).copied().unwrap_or(self.default)
    }
}

/// Entries with s above `max_s` or t above `max_t` are not tracked.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub max_s: i64,
    pub max_t: i64,
}

impl Window {
    pub fn contains(&self, p: Pos) -> bool {
        p.s >= 0 && p.s <= self.max_s && p.t <= self.max_t
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SSPage {
    pub r: u32,
    pub window: Window,
    #[serde(with = "entry_list")]
    pub entries: BTreeMap<Pos, Entry>,
    /// Positions that were nonzero on an earlier page.
    #[serde(default)]
    pub dead: BTreeSet<Pos>,
    /// Markers ("assumed:<name>", "unknown:<name>") per position.
    #[serde(default, with = "marker_list")]
    pub markers: BTreeMap<Pos, BTreeSet<String>>,
}

mod entry_list {
    use super::*;

    #[derive(Serialize, Deserialize)]
    struct Item {
        s: i64,
        t: i64,
        #[serde(default)]
        k: usize,
        entry: Entry,
    }

    pub fn serialize<S: serde::Serializer>(m: &BTreeMap<Pos, Entry>, s: S) -> std::result::Result<S::Ok, S::Error> {
        m.iter()
            .map(|(p, e)| Item {
                s: p.s,
                t: p.t,
                k: p.k,
                entry: e.clone(),
            })
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<BTreeMap<Pos, Entry>, D::Error> {
        let v = Vec::<Item>::deserialize(d)?;
        Ok(v.into_iter().map(|i| (Pos::at(i.s, i.t, i.k), i.entry)).collect())
    }
}

mod marker_list {
    use super::*;

    pub fn serialize<S: serde::Serializer>(
        m: &BTreeMap<Pos, BTreeSet<String>>,
        s: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        m.iter().collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: serde::Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<BTreeMap<Pos, BTreeSet<String>>, D::Error> {
        Ok(Vec::<(Pos, BTreeSet<String>)>::deserialize(d)?.into_iter().collect())
    }
}

impl SSPage {
    pub fn new(r: u32, window: Window) -> Self {
        SSPage {
            r,
            window,
            entries: BTreeMap::new(),
            dead: BTreeSet::new(),
            markers: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, p: Pos, e: Entry) {
        if !e.is_zero() && self.window.contains(p) {
            self.entries.insert(p, e);
        }
    }

    pub fn get(&self, p: Pos) -> Option<&Entry> {
        self.entries.get(&p)
    }

    pub fn column(&self, c: i64) -> Vec<(Pos, &Entry)> {
        self.entries
            .iter()
            .filter(|(p, _)| p.stem() == c)
            .map(|(p, e)| (*p, e))
            .collect()
    }

    fn mark(&mut self, p: Pos, m: String) {
        self.markers.entry(p).or_default().insert(m);
    }
}

/// Context for sheaf-valued entries.
pub struct SheafContext<'a> {
    pub catalog: &'a Catalog,
    pub site: Site,
}

enum Effect {
    Zero,
    Kill,
    Iso,
    Matrix(Vec<Vec<i64>>),
    Operator(String, u64),
}

fn effect_of(rule: &DifferentialRule, cfg: &UnresolvedConfig) -> (Effect, Option<String>) {
    match rule.map.effective() {
        MapSpec::Zero => (Effect::Zero, None),
        MapSpec::Iso => (Effect::Iso, None),
        MapSpec::Matrix { rows } => (Effect::Matrix(rows.clone()), None),
        MapSpec::Operator { name, p } => (Effect::Operator(name.clone(), *p), None),
        MapSpec::Unresolved { name } => match cfg.policy(name) {
            UnresolvedPolicy::AssumedZero => (Effect::Zero, Some(format!("assumed:{name}=0"))),
            UnresolvedPolicy::Iso => (Effect::Kill, Some(format!("assumed:{name}=iso"))),
            UnresolvedPolicy::Unknown => (Effect::Zero, Some(format!("unknown:{name}"))),
        },
        MapSpec::Imported { .. } => unreachable!(),
    }
}

fn stacked(source: &FgAbGroup, blocks: &[(FgAbGroup, IntMatrix)]) -> Result<GroupHom> {
    let target = FgAbGroup::sum_all(blocks.iter().map(|(g, _)| g));
    let mut m = IntMatrix::zeros(target.num_gens(), source.num_gens());
    let mut row = 0;
    for (_, b) in blocks {
        for i in 0..b.rows() {
            for j in 0..b.cols() {
                m.set(row + i, j, b.get(i, j).clone());
            }
        }
        row += b.rows();
    }
    GroupHom::new(source.clone(), target, m)
}

fn side_by_side(target: &FgAbGroup, blocks: &[(FgAbGroup, IntMatrix)]) -> Result<GroupHom> {
    let source = FgAbGroup::sum_all(blocks.iter().map(|(g, _)| g));
    let mut m = IntMatrix::zeros(target.num_gens(), source.num_gens());
    let mut col = 0;
    for (_, b) in blocks {
        for i in 0..b.rows() {
            for j in 0..b.cols() {
                m.set(i, col + j, b.get(i, j).clone());
            }
        }
        col += b.cols();
    }
    GroupHom::new(source, target.clone(), m)
}

fn block(effect: &Effect, src: &FgAbGroup, tgt: &FgAbGroup, at: &DifferentialRule) -> Result<IntMatrix> {
    Ok(match effect {
        Effect::Zero => IntMatrix::zeros(tgt.num_gens(), src.num_gens()),
        Effect::Iso => {
            if src != tgt {
                return Err(Error::Invalid(format!(
                    "iso rule {} → {} between {src} and {tgt}",
                    at.source, at.target
                )));
            }
            IntMatrix::identity(src.num_gens())
        }
        Effect::Matrix(rows) => GroupHom::from_rows(src.clone(), tgt.clone(), rows)?.matrix,
        _ => unreachable!(),
    })
}

/// Order of the image of a map into a finite target.
fn image_index(f: &GroupHom) -> Option<u64> {
    let t = f.target.order()?;
    let c = hom_cokernel(f).0.order()?;
    Some(t / c)
}

/// One page turn: every entry becomes ker(outgoing)/im(incoming).
pub fn turn_page(
    page: &SSPage,
    rules: &[DifferentialRule],
    cfg: &UnresolvedConfig,
    ctx: Option<&SheafContext>,
) -> Result<SSPage> {
    let mut next = page.clone();
    next.r = page.r + 1;
    let mut live: Vec<(&DifferentialRule, Effect)> = Vec::new();
    let mut sorted: Vec<&DifferentialRule> = rules.iter().collect();
    sorted.sort_by_key(|a| (a.source, a.target));
    for rule in sorted {
        if rule.r != page.r {
            return Err(Error::Invalid(format!("d_{} offered on page {}", rule.r, page.r)));
        }
        rule.validate()?;
        if page.get(rule.source).is_none() {
            if page.dead.contains(&rule.source) || !page.window.contains(rule.source) {
                continue;
            }
            return Err(Error::UnmatchedRule(format!(
                "d_{} from {} has no source entry",
                rule.r, rule.source
            )));
        }
        let (effect, marker) = effect_of(rule, cfg);
        if let Some(m) = marker {
            next.mark(rule.source, m.clone());
            if page.get(rule.target).is_some() {
                next.mark(rule.target, m);
            }
        }
        live.push((rule, effect));
    }

    let mut outs: BTreeMap<Pos, Vec<usize>> = BTreeMap::new();
    let mut ins: BTreeMap<Pos, Vec<usize>> = BTreeMap::new();
    for (i, (rule, _)) in live.iter().enumerate() {
        outs.entry(rule.source).or_default().push(i);
        if page.get(rule.target).is_some() {
            ins.entry(rule.target).or_default().push(i);
        }
    }
    let touched: BTreeSet<Pos> = outs.keys().chain(ins.keys()).copied().collect();
    for p in touched {
        let entry = page.get(p).unwrap();
        let o: Vec<&(&DifferentialRule, Effect)> = outs
            .get(&p)
            .map(|v| v.iter().map(|&i| &live[i]).collect())
            .unwrap_or_default();
        let n: Vec<&(&DifferentialRule, Effect)> = ins
            .get(&p)
            .map(|v| v.iter().map(|&i| &live[i]).collect())
            .unwrap_or_default();
        let new = match entry {
            Entry::Group { group, label } => turn_group(page, p, group, label.as_deref(), &o, &n)?,
            Entry::Sheaf { sheaf } => turn_sheaf(page, p, sheaf, &o, &n, ctx)?,
            Entry::CharP { module } => turn_charp(page, p, module, &o, &n)?,
        };
        if new.is_zero() {
            next.entries.remove(&p);
            next.dead.insert(p);
        } else {
            next.entries.insert(p, new);
        }
    }
    Ok(next)
}

type Live<'a> = &'a (&'a DifferentialRule, Effect);

fn turn_group(
    page: &SSPage,
    p: Pos,
    group: &FgAbGroup,
    label: Option<&str>,
    outs: &[Live],
    ins: &[Live],
) -> Result<Entry> {
    let mut out_blocks = Vec::new();
    for (rule, eff) in outs.iter().map(|x| (&x.0, &x.1)) {
        match page.get(rule.target) {
            None => {
                if matches!(eff, Effect::Iso | Effect::Kill) {
                    return Ok(Entry::group(FgAbGroup::zero()));
                }
                if matches!(eff, Effect::Matrix(_)) {
                    return Err(Error::UnmatchedRule(format!(
                        "d_{} from {p} has no target entry",
                        rule.r
                    )));
                }
            }
            Some(t) => {
                if matches!(eff, Effect::Kill) {
                    return Ok(Entry::group(FgAbGroup::zero()));
                }
                let tg = t
                    .as_group()
                    .ok_or_else(|| Error::Invalid(format!("mixed entry kinds at {}", rule.target)))?;
                out_blocks.push((tg.clone(), block(eff, group, tg, rule)?));
            }
        }
    }
    let mut in_blocks = Vec::new();
    for (rule, eff) in ins.iter().map(|x| (&x.0, &x.1)) {
        if matches!(eff, Effect::Kill) {
            return Ok(Entry::group(FgAbGroup::zero()));
        }
        let sg = page
            .get(rule.source)
            .and_then(|e| e.as_group())
            .ok_or_else(|| Error::Invalid(format!("mixed entry kinds at {}", rule.source)))?;
        in_blocks.push((sg.clone(), block(eff, sg, group, rule)?));
    }
    let out = stacked(group, &out_blocks)?;
    let inc = side_by_side(group, &in_blocks)?;
    let h = homology(&inc, &out)?;
    let mut new_label = label.map(String::from);
    if group.free_rank() > 0 && h.free_rank() == group.free_rank() {
        if let Some(idx) = image_index(&out).filter(|&i| i > 1) {
            new_label = Some(format!("{idx}□"));
        }
    }
    Ok(Entry::Group {
        group: h,
        label: new_label,
    })
}

fn turn_sheaf(
    page: &SSPage,
    p: Pos,
    sheaf: &SheafSymbol,
    outs: &[Live],
    ins: &[Live],
    ctx: Option<&SheafContext>,
) -> Result<Entry> {
    let mut current = sheaf.clone();
    let need_ctx = || ctx.ok_or_else(|| Error::NoFact("sheaf entries need a catalog".into()));
    for (rule, eff) in outs.iter().map(|x| (&x.0, &x.1)) {
        match eff {
            Effect::Zero => {}
            Effect::Kill => return Ok(Entry::sheaf(SheafSymbol::Zero)),
            Effect::Iso => {
                if let Some(t) = page.get(rule.target).and_then(|e| e.as_sheaf()) {
                    if t.normalized() != sheaf.normalized() {
                        return Err(Error::Invalid(format!(
                            "iso {} → {} between {sheaf} and {t}",
                            p, rule.target
                        )));
                    }
                }
                return Ok(Entry::sheaf(SheafSymbol::Zero));
            }
            Effect::Operator(name, q) => {
                let c = need_ctx()?;
                let fact = c
                    .catalog
                    .facts
                    .operator_fact(name, *q, sheaf, &c.site)
                    .ok_or_else(|| Error::NoFact(format!("kernel of {name} on {sheaf} over {}", c.site)))?;
                if current != *sheaf {
                    return Err(Error::NoFact(format!("two nonzero differentials leave {p}")));
                }
                current = fact.kernel.clone();
            }
            Effect::Matrix(_) => return Err(Error::Invalid(format!("matrix rule on sheaf entry {p}"))),
        }
    }
    for (rule, eff) in ins.iter().map(|x| (&x.0, &x.1)) {
        let src = page
            .get(rule.source)
            .and_then(|e| e.as_sheaf())
            .cloned()
            .unwrap_or(SheafSymbol::Zero);
        let coker = match eff {
            Effect::Zero => continue,
            Effect::Kill | Effect::Iso => SheafSymbol::Zero,
            Effect::Operator(name, q) => {
                let c = need_ctx()?;
                let fact = c
                    .catalog
                    .facts
                    .operator_fact(name, *q, &src, &c.site)
                    .ok_or_else(|| Error::NoFact(format!("image of {name} on {src} over {}", c.site)))?;
                fact.cokernel.clone()
            }
            Effect::Matrix(_) => return Err(Error::Invalid(format!("matrix rule into sheaf entry {p}"))),
        };
        if coker.is_zero() {
            return Ok(Entry::sheaf(SheafSymbol::Zero));
        }
        if current != *sheaf {
            return Err(Error::NoFact(format!("homology at {p} with both maps nonzero")));
        }
        current = coker;
    }
    Ok(Entry::sheaf(current))
}

fn turn_charp(page: &SSPage, p: Pos, module: &TruncatedCharPModule, outs: &[Live], ins: &[Live]) -> Result<Entry> {
    let fp = |d: usize| Entry::group(FgAbGroup::elementary(module.p, d));
    if outs.len() + ins.len() > 1 {
        return Err(Error::NoFact(format!("several differentials meet char-p entry {p}")));
    }
    if let Some((rule, eff)) = outs.first().map(|x| (&x.0, &x.1)) {
        return match eff {
            Effect::Zero => Ok(Entry::CharP { module: *module }),
            Effect::Kill | Effect::Iso => Ok(fp(0)),
            Effect::Operator(name, q) => {
                let op = SemilinearOperator::parse(*q, name)?;
                Ok(fp(operator_kernel(&op, module)?.dim()))
            }
            Effect::Matrix(_) => Err(Error::Invalid(format!("matrix rule on char-p entry {}", rule.source))),
        };
    }
    let (rule, eff) = ins.first().map(|x| (&x.0, &x.1)).unwrap();
    match eff {
        Effect::Zero => Ok(Entry::CharP { module: *module }),
        Effect::Kill | Effect::Iso => Ok(fp(0)),
        Effect::Operator(name, q) => {
            let src = match page.get(rule.source) {
                Some(Entry::CharP { module }) => *module,
                _ => return Err(Error::Invalid(format!("operator into {p} from a non char-p entry"))),
            };
            let op = SemilinearOperator::parse(*q, name)?;
            let (rank, _) = operator_rank(&op, &src)?;
            Ok(fp(module.dim().saturating_sub(rank)))
        }
        Effect::Matrix(_) => Err(Error::Invalid(format!("matrix rule into char-p entry {p}"))),
    }
}

/// Rejects composable pairs d_r ∘ d_r that are visibly nonzero.
pub fn check_d_squared(page: &SSPage, rules: &[DifferentialRule], ctx: Option<&SheafContext>) -> Result<()> {
    for a in rules {
        for b in rules.iter().filter(|b| b.r == a.r && b.source == a.target) {
            let (ea, eb) = (a.map.effective(), b.map.effective());
            if matches!(ea, MapSpec::Zero | MapSpec::Unresolved { .. })
                || matches!(eb, MapSpec::Zero | MapSpec::Unresolved { .. })
            {
                continue;
            }
            let err = || {
                Error::Invalid(format!(
                    "d∘d ≠ 0: {} → {} → {} ({} then {})",
                    a.source, a.target, b.target, a.provenance, b.provenance
                ))
            };
            let (Some(x), Some(y), Some(z)) = (page.get(a.source), page.get(a.target), page.get(b.target)) else {
                continue;
            };
            match (x, y, z) {
                (Entry::Group { group: gx, .. }, Entry::Group { group: gy, .. }, Entry::Group { group: gz, .. }) => {
                    let blk = |m: &MapSpec, s: &FgAbGroup, t: &FgAbGroup| -> Result<GroupHom> {
                        match m {
                            MapSpec::Iso if s == t => Ok(GroupHom::identity(s.clone())),
                            MapSpec::Iso => Err(Error::Invalid(format!("iso between {s} and {t}"))),
                            MapSpec::Matrix { rows } => GroupHom::from_rows(s.clone(), t.clone(), rows),
                            _ => Ok(GroupHom::zero(s.clone(), t.clone())),
                        }
                    };
                    let f = blk(ea, gx, gy)?;
                    let g = blk(eb, gy, gz)?;
                    if !g.compose(&f)?.is_zero() {
                        return Err(err());
                    }
                }
                (_, Entry::Sheaf { sheaf }, _) => {
                    let surjective = match ea {
                        MapSpec::Iso => true,
                        MapSpec::Operator { name, p } => ctx
                            .and_then(|c| {
                                let src = x.as_sheaf()?;
                                c.catalog.facts.operator_fact(name, *p, src, &c.site)
                            })
                            .is_some_and(|f| f.cokernel.is_zero()),
                        _ => false,
                    };
                    let injective = matches!(eb, MapSpec::Iso)
                        || matches!(eb, MapSpec::Operator { name, p } if ctx.and_then(|c| c.catalog.facts.operator_fact(name, *p, sheaf, &c.site)).is_some_and(|f| f.kernel.is_zero()));
                    if surjective && (injective || matches!(eb, MapSpec::Iso | MapSpec::Operator { .. })) {
                        return Err(err());
                    }
                }
                _ => {}
            }
        }
    }
    Ok(())
}

/// A spectral sequence with its registered rules and computed pages.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectralSequence {
    pub pages: Vec<SSPage>,
    pub rules: Vec<DifferentialRule>,
    /// No differential d_r with r above this bound exists in the window.
    #[serde(default)]
    pub stable_after: Option<u32>,
}

impl SpectralSequence {
    pub fn new(e2: SSPage) -> Self {
        SpectralSequence {
            pages: vec![e2],
            rules: Vec::new(),
            stable_after: None,
        }
    }

    pub fn register(&mut self, rules: Vec<DifferentialRule>, ctx: Option<&SheafContext>) -> Result<()> {
        for r in &rules {
            r.validate()?;
        }
        let mut all = self.rules.clone();
        all.extend(rules);
        check_d_squared(&self.pages[0], &all, ctx)?;
        self.rules = all;
        Ok(())
    }

    pub fn last(&self) -> &SSPage {
        self.pages.last().unwrap()
    }

    pub fn max_rule_page(&self) -> u32 {
        self.rules.iter().map(|r| r.r).max().unwrap_or(1)
    }

    /// Turns pages until every registered rule has been applied.
    pub fn run(&mut self, cfg: &UnresolvedConfig, ctx: Option<&SheafContext>) -> Result<&SSPage> {
        let top = self.max_rule_page();
        while self.last().r <= top {
            let r = self.last().r;
            let rules: Vec<DifferentialRule> = self.rules.iter().filter(|x| x.r == r).cloned().collect();
            let next = turn_page(self.last(), &rules, cfg, ctx)?;
            self.pages.push(next);
        }
        Ok(self.last())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FiltrationEntry {
    pub s: i64,
    pub t: i64,
    pub k: usize,
    pub entry: Entry,
    #[serde(skip_serializing_if = "BTreeSet::is_empty")]
    pub markers: BTreeSet<String>,
}

/// Nonzero E∞ entries of stem `c`, ascending s.
pub fn column_filtration(seq: &SpectralSequence, c: i64) -> Result<Vec<FiltrationEntry>> {
    let last = seq.last();
    let certified = seq.stable_after.is_some_and(|b| b < last.r);
    if !certified {
        let pending: Vec<&DifferentialRule> = seq
            .rules
            .iter()
            .filter(|r| r.r >= last.r)
            .filter(|r| r.source.stem() == c || r.target.stem() == c)
            .collect();
        if !pending.is_empty() || seq.stable_after.is_none() {
            return Err(Error::NotStabilized(format!(
                "column {c} at E_{} has no stabilization certificate",
                last.r
            )));
        }
    }
    Ok(last
        .column(c)
        .into_iter()
        .map(|(p, e)| FiltrationEntry {
            s: p.s,
            t: p.t,
            k: p.k,
            entry: e.clone(),
            markers: last.markers.get(&p).cloned().unwrap_or_default(),
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StageWitness {
    Witness(ExtensionWitness),
    Split,
    None,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Abutment {
    Group {
        #[serde(with = "group_str")]
        group: FgAbGroup,
    },
    Symbolic {
        stages: Vec<String>,
    },
}

/// Iterated extension from the highest filtration down; `witnesses[k]`
/// governs the extension with quotient `gr[k]`.
pub fn assemble_abutment(gr: &[Entry], witnesses: &[StageWitness]) -> Result<Abutment> {
    if gr.iter().any(|e| e.as_group().is_none()) {
        return Ok(Abutment::Symbolic {
            stages: gr.iter().map(|e| e.to_string()).collect(),
        });
    }
    let groups: Vec<FgAbGroup> = gr.iter().map(|e| e.as_group().unwrap().clone()).collect();
    Ok(Abutment::Group {
        group: assemble_groups(&groups, witnesses)?,
    })
}

pub fn assemble_groups(gr: &[FgAbGroup], witnesses: &[StageWitness]) -> Result<FgAbGroup> {
    let Some(mut acc) = gr.last().cloned() else {
        return Ok(FgAbGroup::zero());
    };
    for k in (0..gr.len().saturating_sub(1)).rev() {
        let quot = &gr[k];
        if quot.is_zero() {
            continue;
        }
        if acc.is_zero() {
            acc = quot.clone();
            continue;
        }
        let w = witnesses.get(k).copied().unwrap_or(StageWitness::None);
        acc = match w {
            StageWitness::Split => acc.direct_sum(quot),
            StageWitness::Witness(w) => resolve_stage(&acc, quot, Some(w), k)?,
            StageWitness::None => resolve_stage(&acc, quot, None, k)?,
        };
    }
    Ok(acc)
}

fn resolve_stage(sub: &FgAbGroup, quot: &FgAbGroup, w: Option<ExtensionWitness>, k: usize) -> Result<FgAbGroup> {
    match resolve_extension_opt(sub, quot, w) {
        Ok(r) => Ok(r.group),
        Err(Error::AmbiguousExtension { candidates, .. }) => Err(Error::AmbiguousExtension {
            stage: Some(k),
            candidates,
        }),
        Err(e) => Err(e),
    }
}

/// Stage witnesses implied by one element of order `w` in the abutment
/// that maps to a generator of `gr[0]`.
pub fn witnesses_from_total(gr: &[FgAbGroup], w: u64) -> Vec<StageWitness> {
    let mut below = 1u64;
    gr.iter()
        .enumerate()
        .map(|(k, g)| {
            let ord = w / num_integer::gcd(w, below);
            below = below.saturating_mul(g.order().unwrap_or(1));
            if k == 0 {
                StageWitness::Witness(ExtensionWitness::generator(w))
            } else {
                StageWitness::Witness(ExtensionWitness::element(ord))
            }
        })
        .collect()
}

/// Builds the in-range Picard rule from the additive d_r^{s,t-1}.
pub fn comparison_import(additive: &SpectralSequence, r: u32, s: i64, t: i64, k: usize) -> Result<DifferentialRule> {
    if r < 2 || r as i64 > t - 1 {
        return Err(Error::OutOfRange(format!(
            "comparison needs 2 ≤ r ≤ t-1, got r = {r}, t = {t}"
        )));
    }
    let src = Pos::at(s, t - 1, k);
    let found = additive.rules.iter().find(|x| x.r == r && x.source == src);
    let (map, tk) = match found {
        None => (MapSpec::Zero, k),
        Some(rule) => {
            let inner = match rule.map.effective() {
                MapSpec::Matrix { rows } => {
                    let free = additive.pages[0]
                        .get(src)
                        .and_then(|e| e.as_group())
                        .is_some_and(|g| g.free_rank() > 0);
                    if free && rows.iter().flatten().any(|&x| x != 0) {
                        MapSpec::Operator {
                            name: "reduce".into(),
                            p: 2,
                        }
                    } else if rows.iter().flatten().all(|&x| x == 0) {
                        MapSpec::Zero
                    } else {
                        MapSpec::Iso
                    }
                }
                m => m.clone(),
            };
            (MapSpec::Imported { inner: Box::new(inner) }, rule.target.k)
        }
    };
    DifferentialRule::new(r, Pos::at(s, t, k), tk, map, "comparison tool")
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PageFile {
    #[serde(default)]
    pub version: Option<String>,
    #[serde(default)]
    pub site: Option<Site>,
    pub r: u32,
    pub window: Window,
    #[serde(with = "entry_list")]
    pub entries: BTreeMap<Pos, Entry>,
    #[serde(default)]
    pub rules: Vec<DifferentialRule>,
    #[serde(default)]
    pub stable_after: Option<u32>,
}

impl PageFile {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn into_sequence(self, ctx: Option<&SheafContext>) -> Result<SpectralSequence> {
        let mut page = SSPage::new(self.r, self.window);
        for (p, e) in self.entries {
            page.insert(p, e);
        }
        let mut seq = SpectralSequence::new(page);
        seq.register(self.rules, ctx)?;
        seq.stable_after = self.stable_after;
        Ok(seq)
    }
}

fn glyph(e: &Entry) -> (&'static str, String) {
    match e {
        Entry::Group { group, label } => {
            let l = label.clone().unwrap_or_else(|| group.to_string());
            if group.free_rank() > 0 {
                ("square", l)
            } else {
                ("dot", l)
            }
        }
        Entry::Sheaf { sheaf } => {
            let kind = match sheaf {
                SheafSymbol::Constant { .. } => "dot",
                SheafSymbol::QuasiCoherent { name } if name == "O" || name == "2O" => "square",
                SheafSymbol::QuasiCoherent { name } if name.contains(",j)") => "smalldot",
                SheafSymbol::QuasiCoherent { .. } => "circledot",
                SheafSymbol::ClosedPush { .. } => "diamond",
                _ => "star",
            };
            (kind, sheaf.to_string())
        }
        Entry::CharP { .. } => ("circledot", e.to_string()),
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Static SVG in the (t-s, s) plane.
pub fn render_svg(page: &SSPage, rules: &[DifferentialRule]) -> String {
    const CELL: i64 = 36;
    const PAD: i64 = 40;
    let xs: Vec<i64> = page.entries.keys().map(|p| p.stem()).collect();
    let (xmin, xmax) = (
        xs.iter().copied().min().unwrap_or(0).min(0),
        xs.iter().copied().max().unwrap_or(0).max(1),
    );
    let ymax = page.entries.keys().map(|p| p.s).max().unwrap_or(1).max(1);
    let w = (xmax - xmin + 1) * CELL + 2 * PAD + 220;
    let h = (ymax + 1) * CELL + 2 * PAD;
    let px = |x: i64| PAD + (x - xmin) * CELL + CELL / 2;
    let py = |y: i64| h - PAD - y * CELL - CELL / 2;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="monospace" font-size="9">"#
    );
    let _ = writeln!(out, r##"<rect width="100%" height="100%" fill="#fff"/>"##);
    for x in xmin..=xmax {
        let _ = writeln!(
            out,
            r##"<text x="{}" y="{}" text-anchor="middle">{x}</text>"##,
            px(x),
            h - PAD / 3
        );
    }
    for y in 0..=ymax {
        let _ = writeln!(
            out,
            r##"<text x="{}" y="{}" text-anchor="end">{y}</text>"##,
            PAD - 8,
            py(y) + 3
        );
    }
    for rule in rules {
        if let (Some(_), Some(_)) = (page.get(rule.source), page.get(rule.target)) {
            let dash = if rule.unresolved_name().is_some() {
                r#" stroke-dasharray="3,2""#
            } else {
                ""
            };
            let _ = writeln!(
                out,
                r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#888"{dash}/>"##,
                px(rule.source.stem()),
                py(rule.source.s),
                px(rule.target.stem()),
                py(rule.target.s)
            );
        }
    }
    let mut legend: BTreeMap<&str, BTreeSet<String>> = BTreeMap::new();
    for (p, e) in &page.entries {
        let (kind, label) = glyph(e);
        let (x, y) = (px(p.stem()) + 7 * p.k as i64, py(p.s));
        let shape = match kind {
            "square" => format!(
                r##"<rect x="{}" y="{}" width="8" height="8" fill="none" stroke="#000"/>"##,
                x - 4,
                y - 4
            ),
            "smalldot" => format!(r##"<circle cx="{x}" cy="{y}" r="2" fill="#000"/>"##),
            "circledot" => format!(
                r##"<circle cx="{x}" cy="{y}" r="4" fill="none" stroke="#000"/><circle cx="{x}" cy="{y}" r="1.5" fill="#000"/>"##
            ),
            "diamond" => format!(
                r##"<polygon points="{x},{} {},{y} {x},{} {},{y}" fill="#000"/>"##,
                y - 5,
                x + 5,
                y + 5,
                x - 5
            ),
            "star" => format!(
                r##"<text x="{x}" y="{}" text-anchor="middle" font-size="12">*</text>"##,
                y + 4
            ),
            _ => format!(r##"<circle cx="{x}" cy="{y}" r="4" fill="#000"/>"##),
        };
        let _ = writeln!(out, "<g><title>{} {}</title>{shape}</g>", p, xml_escape(&label));
        legend.entry(kind).or_default().insert(label);
    }
    let lx = px(xmax) + CELL;
    for (i, (kind, labels)) in legend.iter().enumerate() {
        let names: Vec<&str> = labels.iter().map(|s| s.as_str()).collect();
        let _ = writeln!(
            out,
            r##"<text x="{lx}" y="{}">{kind}: {}</text>"##,
            PAD + 14 * i as i64,
            xml_escape(&names.join(", "))
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sheaftab::Point;

    fn g(s: &str) -> FgAbGroup {
        s.parse().unwrap()
    }

    fn win() -> Window {
        Window { max_s: 20, max_t: 40 }
    }

    #[test]
    fn iso_kills_both() {
        let mut page = SSPage::new(2, win());
        page.insert(Pos::new(0, 1), Entry::group(g("Z/2")));
        page.insert(Pos::new(2, 2), Entry::group(g("Z/2")));
        let rule = DifferentialRule::new(2, Pos::new(0, 1), 0, MapSpec::Iso, "test").unwrap();
        let next = turn_page(&page, &[rule], &UnresolvedConfig::default(), None).unwrap();
        assert!(next.entries.is_empty());
        assert_eq!(next.dead.len(), 2);
    }

    #[test]
    fn surjection_from_z_labels_index() {
        let mut page = SSPage::new(3, win());
        page.insert(Pos::new(0, 4), Entry::group(g("Z")));
        page.insert(Pos::new(3, 6), Entry::group(g("Z/2")));
        let rule =
            DifferentialRule::new(3, Pos::new(0, 4), 0, MapSpec::Matrix { rows: vec![vec![1]] }, "test").unwrap();
        let next = turn_page(&page, &[rule], &UnresolvedConfig::default(), None).unwrap();
        assert_eq!(next.get(Pos::new(0, 4)).unwrap().to_string(), "2□");
        assert!(next.get(Pos::new(3, 6)).is_none());
    }

    #[test]
    fn rule_shape_and_unmatched() {
        assert!(DifferentialRule {
            r: 3,
            source: Pos::new(0, 0),
            target: Pos::new(3, 3),
            map: MapSpec::Zero,
            provenance: "x".into()
        }
        .validate()
        .is_err());
        let page = SSPage::new(2, win());
        let rule = DifferentialRule::new(2, Pos::new(1, 1), 0, MapSpec::Iso, "t").unwrap();
        assert!(matches!(
            turn_page(&page, &[rule], &UnresolvedConfig::default(), None),
            Err(Error::UnmatchedRule(_))
        ));
    }

    #[test]
    fn sheaf_operator_kernel() {
        let cat = Catalog::load().unwrap();
        let ctx = SheafContext {
            catalog: &cat,
            site: Site::SpecZ,
        };
        let mut page = SSPage::new(3, win());
        page.insert(Pos::new(3, 3), Entry::sheaf(SheafSymbol::qc("ω₂")));
        page.insert(Pos::new(6, 5), Entry::sheaf(SheafSymbol::qc("O/2")));
        let rule = DifferentialRule::new(
            3,
            Pos::new(3, 3),
            0,
            MapSpec::Operator {
                name: "x + x^2".into(),
                p: 2,
            },
            "test",
        )
        .unwrap();
        let next = turn_page(&page, &[rule], &UnresolvedConfig::default(), Some(&ctx)).unwrap();
        assert_eq!(
            next.get(Pos::new(3, 3)).unwrap(),
            &Entry::sheaf(SheafSymbol::closed_push(Point::i(), g("Z/2")))
        );
        assert!(next.get(Pos::new(6, 5)).is_none());
    }

    #[test]
    fn unresolved_markers() {
        let mut page = SSPage::new(5, win());
        page.insert(Pos::new(1, 1), Entry::group(g("Z/2")));
        page.insert(Pos::new(6, 5), Entry::group(g("Z/2")));
        let rule = DifferentialRule::new(5, Pos::new(1, 1), 0, MapSpec::Unresolved { name: "dx".into() }, "t").unwrap();
        let zero = turn_page(&page, std::slice::from_ref(&rule), &UnresolvedConfig::default(), None).unwrap();
        assert_eq!(zero.entries.len(), 2);
        assert!(zero.markers[&Pos::new(1, 1)].contains("assumed:dx=0"));
        let iso = turn_page(&page, &[rule], &UnresolvedConfig::all(UnresolvedPolicy::Iso), None).unwrap();
        assert!(iso.entries.is_empty());
    }

    #[test]
    fn d_squared_rejected() {
        let mut page = SSPage::new(2, win());
        for p in [Pos::new(0, 1), Pos::new(2, 2), Pos::new(4, 3)] {
            page.insert(p, Entry::group(g("Z/2")));
        }
        let mut seq = SpectralSequence::new(page);
        let a = DifferentialRule::new(2, Pos::new(0, 1), 0, MapSpec::Iso, "a").unwrap();
        let b = DifferentialRule::new(2, Pos::new(2, 2), 0, MapSpec::Iso, "b").unwrap();
        assert!(seq.register(vec![a, b], None).is_err());
    }

    #[test]
    fn assembly() {
        let z2 = g("Z/2");
        let gr = vec![z2.clone(), z2.clone(), z2.clone()];
        let w = witnesses_from_total(&gr, 8);
        assert_eq!(assemble_groups(&gr, &w).unwrap(), g("Z/8"));
        let two = vec![z2.clone(), z2.clone()];
        let amb = assemble_groups(&two, &[StageWitness::Witness(ExtensionWitness::element(2))]);
        assert!(matches!(amb, Err(Error::AmbiguousExtension { stage: Some(0), .. })));
        assert_eq!(assemble_groups(&two, &[StageWitness::Split]).unwrap(), g("(Z/2)^2"));
        assert_eq!(assemble_groups(&[g("Z/4")], &[]).unwrap(), g("Z/4"));
        let sym = assemble_abutment(&[Entry::sheaf(SheafSymbol::KStarVShriek)], &[]).unwrap();
        assert!(matches!(sym, Abutment::Symbolic { .. }));
    }

    #[test]
    fn comparison_range() {
        let seq = SpectralSequence::new(SSPage::new(2, win()));
        assert!(comparison_import(&seq, 3, 1, 4, 0).is_ok());
        assert!(matches!(comparison_import(&seq, 3, 3, 3, 0), Err(Error::OutOfRange(_))));
        assert!(matches!(comparison_import(&seq, 9, 5, 5, 0), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn page_file_round_trip() {
        let mut page = SSPage::new(2, win());
        page.insert(Pos::new(0, 0), Entry::group(g("Z/2")));
        page.insert(Pos::at(3, 3, 1), Entry::sheaf(SheafSymbol::qc("O/(2,j)")));
        let json = serde_json::to_string(&page).unwrap();
        let back: SSPage = serde_json::from_str(&json).unwrap();
        assert_eq!(back, page);
        let svg = render_svg(&page, &[]);
        assert!(svg.starts_with("<svg") && svg.contains("O/(2,j)"));
    }
}

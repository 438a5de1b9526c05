//! Command-line front end.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::abelian::{hom_cokernel, smith_normal_form, FgAbGroup, GroupHom, IntMatrix};
use crate::charp::{
    format_monomial, operator_cokernel_basis, operator_kernel, punctured_affine_cohomology, SemilinearOperator,
    TruncatedCharPModule,
};
use crate::cyccoh::{group_cohomology, CyclicModule};
use crate::data::{self, cite};
use crate::error::{Error, Result};
use crate::kofam::{self, EtaleRingDescriptor, Knob};
use crate::numbrauer::{self, brauer_laurent, brauer_localized_integers, parse_places, StatedValue};
use crate::sheaftab::{Catalog, CohomologyAnswer, SheafSymbol, Site};
use crate::ssengine::{
    column_filtration, render_svg, PageFile, SheafContext, SpectralSequence, UnresolvedConfig, UnresolvedPolicy,
};
use crate::tmffam::{self, TmfPageData};

pub const SCHEMA: &str = include_str!("../schema/report.schema.json");

#[derive(Parser, Debug)]
#[command(name = "brauerkit", version, about = "Brauer and Picard group computations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Write the artifact here instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "json")]
    pub format: Format,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
    Svg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Policy {
    Zero,
    Iso,
    Unknown,
}

impl From<Policy> for UnresolvedPolicy {
    fn from(p: Policy) -> Self {
        match p {
            Policy::Zero => UnresolvedPolicy::AssumedZero,
            Policy::Iso => UnresolvedPolicy::Iso,
            Policy::Unknown => UnresolvedPolicy::Unknown,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModuleKind {
    Trivial,
    Sign,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Smith normal form and cokernel of an integer matrix.
    Snf {
        /// JSON rows, e.g. '[[2,0],[0,4]]'.
        #[arg(long)]
        matrix: String,
    },
    /// Étale cohomology of a sheaf symbol, or C_n cohomology with --module.
    Cohomology {
        /// Sheaf JSON, a named sheaf from the fact table, or gm / r1jgm / kv.
        #[arg(long)]
        sheaf: Option<String>,
        #[arg(long, default_value = "A1")]
        site: String,
        #[arg(long)]
        degree: u32,
        #[arg(long, value_enum)]
        module: Option<ModuleKind>,
        #[arg(long, default_value = "Z")]
        group: String,
        #[arg(long, default_value_t = 2)]
        n: u64,
        #[arg(long, default_value_t = 32)]
        window: i64,
    },
    /// Kernel and cokernel of a semilinear operator on F_p[j] or F_p[j^±1].
    ArtinSchreier {
        #[arg(long)]
        p: u64,
        #[arg(long)]
        op: String,
        #[arg(long)]
        laurent: bool,
        #[arg(long, default_value_t = 32)]
        window: i64,
    },
    /// Čech cohomology of O on A^n minus the origin.
    Cech {
        #[arg(long, default_value_t = 4)]
        vars: usize,
        #[arg(long, default_value_t = 6)]
        window: i64,
    },
    /// Brauer group of a ring of S-integers from its places.
    BrNumberRing {
        /// JSON list of places, or {"places": [...]}.
        #[arg(long)]
        places: String,
    },
    /// H^1(Z[1/P]; Q/Z) for a set of primes P.
    H1Qz {
        #[arg(long, value_delimiter = ',', required = true)]
        primes: Vec<u64>,
    },
    /// Brauer group of R[j^±1] for R given by its places.
    BrLaurent {
        #[arg(long, default_value = r#"[{"kind":"real"}]"#)]
        places: String,
        #[arg(long, value_delimiter = ',')]
        inverted: Vec<u64>,
    },
    /// Picard group of KO over an étale Z-algebra.
    PicKo {
        /// Descriptor file, or the stem of a shipped ring.
        #[arg(long, default_value = "Z")]
        ring: String,
        #[arg(long = "d3-21", value_enum, default_value = "zero")]
        d3_21: Policy,
    },
    /// Local Brauer group of KO, with an optional cover splitting check.
    LbrKo {
        /// Cover members for the splitting check.
        #[arg(long)]
        cover: Vec<String>,
    },
    /// Picard filtration of TMF and its global sections.
    PicTmf {
        #[arg(long)]
        ring: Option<String>,
        #[arg(long, value_enum, default_value = "zero")]
        unresolved: Policy,
        /// Per-differential override, name=zero|iso|unknown.
        #[arg(long = "set")]
        set: Vec<String>,
        #[arg(long)]
        prime: Option<u64>,
    },
    /// Picard group of TMF with c_4 inverted.
    PicTmfC4inv {
        #[arg(long)]
        drop_k: bool,
    },
    /// Local Brauer group of TMF.
    LbrTmf {
        #[arg(long, default_value_t = 32)]
        window: i64,
    },
    /// Brauer group of the derived moduli stack of elliptic curves.
    LbrMo {
        #[arg(long, default_value_t = 32)]
        window: i64,
    },
    /// Run a page file and report the E∞ page or one column.
    SsRun {
        #[arg(long)]
        page: PathBuf,
        #[arg(long)]
        column: Option<i64>,
        #[arg(long, value_enum, default_value = "zero")]
        unresolved: Policy,
    },
    /// Draw a page of a page file as SVG.
    SsChart {
        #[arg(long)]
        page: PathBuf,
        /// Page number to draw; default is the last.
        #[arg(long)]
        at: Option<u32>,
        #[arg(long, value_enum, default_value = "zero")]
        unresolved: Policy,
    },
}

impl Command {
    pub fn verb(&self) -> &'static str {
        match self {
            Command::Snf { .. } => "snf",
            Command::Cohomology { .. } => "cohomology",
            Command::ArtinSchreier { .. } => "artin-schreier",
            Command::Cech { .. } => "cech",
            Command::BrNumberRing { .. } => "br-number-ring",
            Command::H1Qz { .. } => "h1-qz",
            Command::BrLaurent { .. } => "br-laurent",
            Command::PicKo { .. } => "pic-ko",
            Command::LbrKo { .. } => "lbr-ko",
            Command::PicTmf { .. } => "pic-tmf",
            Command::PicTmfC4inv { .. } => "pic-tmf-c4inv",
            Command::LbrTmf { .. } => "lbr-tmf",
            Command::LbrMo { .. } => "lbr-mo",
            Command::SsRun { .. } => "ss-run",
            Command::SsChart { .. } => "ss-chart",
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse(_) => 2,
        Error::NoFact(_) | Error::DensityUnknown(_) => 3,
        Error::AmbiguousExtension { .. } => 4,
        _ => 1,
    }
}

/// A finished run: JSON report or a raw artifact, plus the exit status.
#[derive(Debug)]
pub struct Outcome {
    pub report: Value,
    pub artifact: Option<String>,
    pub status: i32,
}

struct Ctx {
    versions: BTreeMap<String, String>,
    citations: BTreeSet<String>,
    status: i32,
}

impl Ctx {
    fn use_data(&mut self, name: &str) -> Result<data::DataFile> {
        let f = data::load(name)?;
        self.versions
            .insert(f.name.clone(), format!("{}@{}", f.version, f.origin));
        Ok(f)
    }

    fn catalog(&mut self) -> Result<Catalog> {
        self.use_data("facts.json")?;
        Catalog::load()
    }

    fn ring(&mut self, arg: &str) -> Result<EtaleRingDescriptor> {
        let path = Path::new(arg);
        if path.is_file() {
            let text = std::fs::read_to_string(path)?;
            let r = EtaleRingDescriptor::from_json(&text)?;
            let v = r.version.clone().unwrap_or_else(|| "unversioned".into());
            self.versions
                .insert(format!("ring:{}", r.name), format!("{v}@{}", path.display()));
            return Ok(r);
        }
        self.use_data(&format!("rings/{arg}.json"))?;
        EtaleRingDescriptor::shipped(arg)
    }

    fn cite<I: IntoIterator<Item = S>, S: Into<String>>(&mut self, it: I) {
        self.citations.extend(it.into_iter().map(Into::into));
    }
}

fn as_parse(e: Error) -> Error {
    match e {
        Error::Parse(_) => e,
        other => Error::Parse(other.to_string()),
    }
}

fn to_value<T: Serialize>(t: &T) -> Result<Value> {
    Ok(serde_json::to_value(t)?)
}

fn parse_json<T: serde::de::DeserializeOwned>(what: &str, s: &str) -> Result<T> {
    serde_json::from_str(s).map_err(|e| Error::Parse(format!("{what}: {e}")))
}

fn matrix_strings(m: &IntMatrix) -> Vec<Vec<String>> {
    (0..m.rows())
        .map(|i| (0..m.cols()).map(|j| m.get(i, j).to_string()).collect())
        .collect()
}

fn sheaf_arg(catalog: &Catalog, s: &str) -> Result<SheafSymbol> {
    let t = s.trim();
    if t.starts_with('{') {
        return parse_json("sheaf", t);
    }
    Ok(match t.to_ascii_lowercase().as_str() {
        "gm" | "g_m" => SheafSymbol::Gm,
        "r1jgm" => SheafSymbol::R1jGm,
        "kv" | "k_*v_!z/2" => SheafSymbol::KStarVShriek,
        _ => {
            if let Ok(f) = catalog.facts.named(t) {
                f
            } else if t.starts_with("O") {
                SheafSymbol::qc(t)
            } else {
                let g: FgAbGroup = t.parse().map_err(as_parse)?;
                SheafSymbol::constant(g)
            }
        }
    })
}

fn tmf_config(default: Policy, set: &[String]) -> Result<UnresolvedConfig> {
    let mut cfg = UnresolvedConfig::all(default.into());
    for kv in set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("expected name=policy, got {kv}")))?;
        let p = Policy::from_str(v.trim(), true).map_err(Error::Parse)?;
        cfg = cfg.with(k.trim(), p.into());
    }
    Ok(cfg)
}

fn knob(p: Policy) -> Knob {
    match p {
        Policy::Zero => Knob::Zero,
        Policy::Iso => Knob::Nonzero,
        Policy::Unknown => Knob::Unknown,
    }
}

fn run_command(cmd: &Command, cx: &mut Ctx) -> Result<(Value, Option<String>)> {
    let v = match cmd {
        Command::Snf { matrix } => {
            let rows: Vec<Vec<i64>> = parse_json("matrix", matrix)?;
            if rows.iter().any(|r| r.len() != rows[0].len()) {
                return Err(Error::Parse("matrix rows have different lengths".into()));
            }
            let m = IntMatrix::from_rows(&rows);
            let snf = smith_normal_form(&m);
            let f = GroupHom::new(FgAbGroup::free(m.cols()), FgAbGroup::free(m.rows()), m.clone())?;
            let coker = hom_cokernel(&f).0;
            json!({
                "diagonal": snf.diagonal().iter().map(|d| d.to_string()).collect::<Vec<_>>(),
                "rank": snf.rank,
                "cokernel": coker.to_string(),
                "u": matrix_strings(&snf.u),
                "v": matrix_strings(&snf.v),
                "d": matrix_strings(&snf.d),
            })
        }
        Command::Cohomology {
            sheaf,
            site,
            degree,
            module,
            group,
            n,
            window,
        } => {
            if let Some(kind) = module {
                let g: FgAbGroup = group.parse().map_err(as_parse)?;
                let m = match kind {
                    ModuleKind::Trivial => CyclicModule::trivial_n(g, *n),
                    ModuleKind::Sign => {
                        if *n != 2 {
                            return Err(Error::Invalid("the sign action needs n = 2".into()));
                        }
                        CyclicModule::sign(g)
                    }
                };
                json!({"group": group_cohomology(&m, *degree)?.to_string(), "degree": degree})
            } else {
                let catalog = cx.catalog()?.with_window(*window);
                let sheaf = sheaf
                    .as_deref()
                    .ok_or_else(|| Error::Parse("--sheaf or --module is required".into()))?;
                let f = sheaf_arg(&catalog, sheaf)?;
                let site: Site = site.parse().map_err(as_parse)?;
                let e = catalog.cohomology(&f, *degree, &site);
                cx.cite(e.citations.iter().cloned());
                if e.answer.is_unknown() {
                    cx.status = 3;
                }
                let shown = match &e.answer {
                    CohomologyAnswer::Group { value } => value.to_string(),
                    CohomologyAnswer::Divisible { value } => value.to_string(),
                    other => other.to_string(),
                };
                json!({
                    "sheaf": f.to_string(),
                    "site": site.to_string(),
                    "degree": degree,
                    "group": shown,
                    "answer": to_value(&e.answer)?,
                })
            }
        }
        Command::ArtinSchreier { p, op, laurent, window } => {
            let op = SemilinearOperator::parse(*p, op)?;
            let m = if *laurent {
                TruncatedCharPModule::laurent(*p, -window, *window)?
            } else {
                TruncatedCharPModule::polynomial(*p, *window)?
            };
            let k = operator_kernel(&op, &m)?;
            let c = operator_cokernel_basis(&op, &m);
            let mut out = json!({
                "operator": op.to_string(),
                "p": p,
                "window": [m.lo, m.hi],
                "laurent": laurent,
                "kernel_basis": k.basis_strings(),
                "kernel_dim": k.dim(),
                "kernel_stabilized": k.stabilized,
            });
            match c {
                Ok(c) => {
                    out["cokernel_basis"] = json!(c.basis_strings());
                    out["cokernel_certified"] = json!([c.stable_floor_degree, c.stable_prefix_degree]);
                }
                Err(e) => out["cokernel_error"] = json!(e.to_string()),
            }
            cx.cite([cite("ko_d3_33"), cite("row3")]);
            out
        }
        Command::Cech { vars, window } => {
            let r = punctured_affine_cohomology(*vars, *window)?;
            let bases: BTreeMap<String, Vec<String>> = r
                .cohomology
                .iter()
                .map(|(q, v)| (q.to_string(), v.iter().map(|a| format_monomial(a)).collect()))
                .collect();
            cx.cite([cite("quasi_affine")]);
            json!({
                "vars": vars,
                "window": window,
                "h0": r.h0_descriptor,
                "basis": bases,
                "dims": r.cohomology.iter().map(|(q, v)| (q.to_string(), v.len())).collect::<BTreeMap<_, _>>(),
            })
        }
        Command::BrNumberRing { places } => {
            let ps = parse_places(places)?;
            cx.cite([cite("br_computations"), cite("br_properties")]);
            json!({"group": brauer_localized_integers(&ps).to_string(), "places": to_value(&ps)?})
        }
        Command::H1Qz { primes } => {
            let catalog = cx.catalog()?;
            let mut key_primes = primes.clone();
            key_primes.sort_unstable();
            key_primes.dedup();
            let key = format!(
                "h1_qz:{}",
                key_primes.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(",")
            );
            let stated = match catalog.facts.stated(&key) {
                Some(f) => Some(StatedValue {
                    value: serde_json::from_value(f.value.clone())?,
                    citation: f.citation.clone(),
                }),
                None => None,
            };
            if let Some(s) = &stated {
                cx.cite([s.citation.clone()]);
            }
            let r = numbrauer::h1_qz(primes, stated)?;
            let mut v = to_value(&r)?;
            v["group"] = json!(r.structural.to_string());
            v
        }
        Command::BrLaurent { places, inverted } => {
            let ps = parse_places(places)?;
            cx.cite([cite("br_laurent")]);
            json!({"group": brauer_laurent(&ps, inverted)?.to_string()})
        }
        Command::PicKo { ring, d3_21 } => {
            let catalog = cx.catalog()?;
            let r = cx.ring(ring)?;
            let rep = kofam::pic_ko(&catalog, &r, knob(*d3_21))?;
            cx.cite(rep.citations.iter().cloned());
            to_value(&rep)?
        }
        Command::LbrKo { cover } => {
            let catalog = cx.catalog()?;
            let rep = kofam::lbr_ko(&catalog)?;
            cx.cite(rep.citations.iter().cloned());
            let mut v = to_value(&rep)?;
            let names: Vec<String> = if cover.is_empty() {
                vec!["Z_half_zeta4".into(), "Z_third_zeta3".into()]
            } else {
                cover.clone()
            };
            let rings: Vec<EtaleRingDescriptor> = names.iter().map(|n| cx.ring(n)).collect::<Result<_>>()?;
            v["splitting"] = to_value(&kofam::lbr_ko_splitting_check(&rings)?)?;
            v
        }
        Command::PicTmf {
            ring,
            unresolved,
            set,
            prime,
        } => {
            let catalog = cx.catalog()?;
            cx.use_data("tmf_pages.json")?;
            let data = TmfPageData::shipped()?;
            let cfg = tmf_config(*unresolved, set)?;
            let run = tmffam::run_pic_tmf(&data, &catalog, &cfg)?;
            cx.cite(run.citations.iter().cloned());
            let graded: BTreeMap<String, String> = run
                .graded
                .iter()
                .map(|g| (format!("gr{}", g.s), g.sheaf.to_string()))
                .collect();
            let mut v = json!({
                "graded": graded,
                "graded_symbols": to_value(&run.graded)?,
                "markers": to_value(&run.markers)?,
            });
            if let Some(r) = ring {
                let r = cx.ring(r)?;
                v["ring"] = to_value(&tmffam::pic_tmf_r(&run, &catalog, &r)?)?;
            } else if run.assumed_exact() {
                let primes: Vec<u64> = prime.map(|p| vec![p]).unwrap_or_else(|| vec![2, 3]);
                let mut g = Map::new();
                for p in primes {
                    g.insert(p.to_string(), to_value(&tmffam::pic_tmf_global(&run, &catalog, p)?)?);
                }
                v["global"] = Value::Object(g);
            }
            v
        }
        Command::PicTmfC4inv { drop_k } => {
            let catalog = cx.catalog()?;
            cx.use_data("tmf_pages.json")?;
            let run = tmffam::run_pic_tmf(&TmfPageData::shipped()?, &catalog, &tmffam::default_config())?;
            let rep = tmffam::pic_tmf_c4inv(&run, &catalog, *drop_k)?;
            cx.cite(rep.citations.iter().cloned());
            to_value(&rep)?
        }
        Command::LbrTmf { window } | Command::LbrMo { window } => {
            let catalog = cx.catalog()?.with_window(*window);
            cx.use_data("tmf_pages.json")?;
            let run = tmffam::run_pic_tmf(&TmfPageData::shipped()?, &catalog, &tmffam::default_config())?;
            if matches!(cmd, Command::LbrTmf { .. }) {
                let rep = tmffam::lbr_tmf(&run, &catalog, *window)?;
                cx.cite(rep.citations.iter().cloned());
                to_value(&rep)?
            } else {
                let rep = tmffam::lbr_m_o(&run, &catalog, *window)?;
                cx.cite(rep.citations.iter().cloned());
                to_value(&rep)?
            }
        }
        Command::SsRun {
            page,
            column,
            unresolved,
        } => {
            let seq = load_page(cx, page, *unresolved)?;
            let last = seq.last();
            let mut v = json!({"r": last.r, "page": to_value(last)?});
            if let Some(c) = column {
                v["column"] = to_value(&column_filtration(&seq, *c)?)?;
            }
            v
        }
        Command::SsChart { page, at, unresolved } => {
            let seq = load_page(cx, page, *unresolved)?;
            let pg = match at {
                None => seq.last(),
                Some(r) => seq
                    .pages
                    .iter()
                    .find(|p| p.r == *r)
                    .ok_or_else(|| Error::OutOfRange(format!("no page E_{r}")))?,
            };
            let rules: Vec<_> = seq.rules.iter().filter(|x| x.r == pg.r).cloned().collect();
            let svg = render_svg(pg, &rules);
            return Ok((json!({"r": pg.r, "entries": pg.entries.len()}), Some(svg)));
        }
    };
    Ok((v, None))
}

fn load_page(cx: &mut Ctx, path: &Path, policy: Policy) -> Result<SpectralSequence> {
    let text = std::fs::read_to_string(path)?;
    let raw: Value = parse_json("page file", &text)?;
    let pf: PageFile = if raw.get("page").is_some() && raw.get("entries").is_none() {
        serde_json::from_value(raw["page"].clone())?
    } else {
        serde_json::from_value(raw)?
    };
    cx.versions.insert(
        "page".into(),
        format!(
            "{}@{}",
            pf.version.clone().unwrap_or_else(|| "unversioned".into()),
            path.display()
        ),
    );
    let catalog = cx.catalog()?;
    let site = pf.site.clone().unwrap_or(Site::SpecZ);
    let ctx = SheafContext {
        catalog: &catalog,
        site,
    };
    let mut seq = pf.into_sequence(Some(&ctx))?;
    seq.run(&UnresolvedConfig::all(policy.into()), Some(&ctx))?;
    Ok(seq)
}

fn collect_citations(v: &Value, out: &mut BTreeSet<String>) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                if k == "citations" {
                    if let Some(a) = x.as_array() {
                        out.extend(a.iter().filter_map(|c| c.as_str().map(String::from)));
                    }
                } else if k == "citation" {
                    if let Some(c) = x.as_str() {
                        out.insert(c.to_string());
                    }
                } else {
                    collect_citations(x, out);
                }
            }
        }
        Value::Array(a) => a.iter().for_each(|x| collect_citations(x, out)),
        _ => {}
    }
}

/// Runs one command and wraps its result in the report envelope.
pub fn dispatch(cmd: &Command) -> Outcome {
    let mut cx = Ctx {
        versions: BTreeMap::new(),
        citations: BTreeSet::new(),
        status: 0,
    };
    let result = run_command(cmd, &mut cx);
    let (body, artifact, status) = match result {
        Ok((v, a)) => (v, a, cx.status),
        Err(e) => (
            json!({"error": {"kind": error_kind(&e), "message": e.to_string()}}),
            None,
            exit_code(&e),
        ),
    };
    let mut report = Map::new();
    if let Value::Object(m) = body {
        collect_citations(&Value::Object(m.clone()), &mut cx.citations);
        for (k, v) in m {
            if k != "citations" {
                report.insert(k, v);
            }
        }
    }
    report.insert("command".into(), json!(cmd.verb()));
    report.insert("citations".into(), json!(cx.citations));
    report.insert("data_versions".into(), json!(cx.versions));
    report.insert("status".into(), json!(status));
    Outcome {
        report: Value::Object(report),
        artifact,
        status,
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::AmbiguousExtension { .. } => "ambiguous_extension",
        Error::NoExtension { .. } => "no_extension",
        Error::SearchTooLarge(_) => "search_too_large",
        Error::NotAnAction { .. } => "not_an_action",
        Error::WindowTooSmall(_) => "window_too_small",
        Error::DensityUnknown(_) => "density_unknown",
        Error::InconsistentPoint(_) => "inconsistent_point",
        Error::UnmatchedRule(_) => "unmatched_rule",
        Error::NoFact(_) => "no_fact",
        Error::OutOfRange(_) => "out_of_range",
        Error::NotStabilized(_) => "not_stabilized",
        Error::Invalid(_) => "invalid",
        Error::Parse(_) => "parse",
        Error::Io(_) => "io",
    }
}

pub fn render(outcome: &Outcome, format: Format) -> String {
    match (format, &outcome.artifact) {
        (Format::Svg, Some(svg)) => svg.clone(),
        (Format::Text, _) => {
            let mut s = String::new();
            if let Value::Object(m) = &outcome.report {
                for (k, v) in m {
                    let shown = match v {
                        Value::String(x) => x.clone(),
                        other => other.to_string(),
                    };
                    s.push_str(&format!("{k}: {shown}\n"));
                }
            }
            s
        }
        _ => {
            let mut s = serde_json::to_string_pretty(&outcome.report).unwrap_or_default();
            s.push('\n');
            s
        }
    }
}

/// Checks the required keys and property types named in the shipped schema.
pub fn validate_report(report: &Value) -> std::result::Result<(), String> {
    let schema: Value = serde_json::from_str(SCHEMA).map_err(|e| e.to_string())?;
    let obj = report.as_object().ok_or("report is not an object")?;
    for key in schema["required"]
        .as_array()
        .into_iter()
        .flatten()
        .filter_map(|k| k.as_str())
    {
        if !obj.contains_key(key) {
            return Err(format!("missing key {key}"));
        }
    }
    if let Some(props) = schema["properties"].as_object() {
        for (k, spec) in props {
            let Some(v) = obj.get(k) else { continue };
            let ok = match spec["type"].as_str() {
                Some("string") => v.is_string(),
                Some("integer") => v.is_i64() || v.is_u64(),
                Some("array") => v.as_array().is_some_and(|a| match spec["items"]["type"].as_str() {
                    Some("string") => a.iter().all(|x| x.is_string()),
                    _ => true,
                }),
                Some("object") => v
                    .as_object()
                    .is_some_and(|m| match spec["additionalProperties"]["type"].as_str() {
                        Some("string") => m.values().all(|x| x.is_string()),
                        _ => true,
                    }),
                _ => true,
            };
            if !ok {
                return Err(format!("key {k} has the wrong type"));
            }
            if let Some(choices) = spec["enum"].as_array() {
                if !choices.contains(v) {
                    return Err(format!("key {k} = {v} not in {choices:?}"));
                }
            }
        }
    }
    Ok(())
}

pub fn main_with(args: impl IntoIterator<Item = std::ffi::OsString>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = dispatch(&cli.command);
    let text = render(&outcome, cli.format);
    match &cli.output {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &text) {
                eprintln!("{e}");
                return 1;
            }
        }
        None => print!("{text}"),
    }
    if outcome.status != 0 {
        if let Some(msg) = outcome.report["error"]["message"].as_str() {
            eprintln!("error: {msg}");
        }
    }
    outcome.status
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> Outcome {
        let cli = Cli::try_parse_from(std::iter::once("brauerkit").chain(args.iter().copied())).unwrap();
        dispatch(&cli.command)
    }

    #[test]
    fn reports_validate() {
        for args in [
            &["snf", "--matrix", "[[2,4],[6,8]]"][..],
            &["pic-ko", "--ring", "Z"],
            &["lbr-ko"],
            &["br-laurent"],
            &["cech", "--vars", "2", "--window", "3"],
            &["pic-tmf"],
        ] {
            let o = run(args);
            assert_eq!(o.status, 0, "{args:?}");
            validate_report(&o.report).unwrap();
        }
    }

    #[test]
    fn output_is_byte_identical() {
        let a = render(&run(&["pic-tmf-c4inv"]), Format::Json);
        let b = render(&run(&["pic-tmf-c4inv"]), Format::Json);
        assert_eq!(a, b);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(run(&["snf", "--matrix", "[[1,2],[3]]"]).status, 2);
        let o = run(&["cohomology", "--sheaf", "gm", "--site", "SpecZ", "--degree", "3"]);
        assert_eq!(o.status, 3, "{:?}", o.report);
        validate_report(&o.report).unwrap();
        assert_eq!(main_with(["brauerkit", "no-such-verb"].map(Into::into)), 2);
    }

    #[test]
    fn schema_rejects_missing_keys() {
        assert!(validate_report(&json!({"command": "snf"})).is_err());
        assert!(
            validate_report(&json!({"command": "bogus", "citations": [], "data_versions": {}, "status": 0})).is_err()
        );
    }
}

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};

use brauerkit::abelian::FgAbGroup;
use brauerkit::cli::{dispatch, Cli};
use brauerkit::kofam::{lbr_ko_splitting_check, EtaleRingDescriptor};
use brauerkit::numbrauer::{
    brauer_laurent, brauer_localized_integers, rational_places, DivisibleGroupDescriptor, PlaceSpec,
};
use brauerkit::sheaftab::{Catalog, Point, SheafSymbol};
use brauerkit::ssengine::{UnresolvedConfig, UnresolvedPolicy};
use brauerkit::tmffam::{self, TmfPageData};
use clap::Parser;
use common::*;
use serde_json::Value;

fn cli(args: &[&str]) -> Result<Value, String> {
    let parsed =
        Cli::try_parse_from(std::iter::once("brauerkit").chain(args.iter().copied())).map_err(|e| e.to_string())?;
    let out = dispatch(&parsed.command);
    if out.status != 0 {
        return Err(format!("{args:?} exited with {}: {}", out.status, out.report));
    }
    Ok(out.report)
}

fn group_field(v: &Value, key: &str) -> Result<FgAbGroup, String> {
    v[key]
        .as_str()
        .ok_or_else(|| format!("no {key} in {v}"))?
        .parse()
        .map_err(|e| format!("{e}"))
}

fn expect_eq<T: PartialEq + std::fmt::Display>(what: &str, got: T, want: T) -> Check {
    if got == want {
        Ok(())
    } else {
        Err(format!("{what}: got {got}, expected {want}"))
    }
}

fn c1_pic_ko() -> Check {
    for (ring, want) in [
        ("Z", FgAbGroup::cyclic(8)),
        ("Z_omega_17", FgAbGroup::cyclic(8).direct_sum(&FgAbGroup::cyclic(2))),
        ("Z_half_zeta4", FgAbGroup::cyclic(4)),
    ] {
        let r = cli(&["pic-ko", "--ring", ring])?;
        expect_eq(ring, group_field(&r, "group")?, want)?;
    }
    Ok(())
}

fn c2_lbr_ko() -> Check {
    let r = cli(&["lbr-ko"])?;
    expect_eq("LBr(KO)", group_field(&r, "group")?, FgAbGroup::cyclic(2))?;
    let covers = [
        EtaleRingDescriptor::shipped("Z_half_zeta4").map_err(|e| e.to_string())?,
        EtaleRingDescriptor::shipped("Z_third_zeta3").map_err(|e| e.to_string())?,
    ];
    let s = lbr_ko_splitting_check(&covers).map_err(|e| e.to_string())?;
    expect_eq("splitting", s.split, true)
}

fn c3_br_number_ring() -> Check {
    let z = brauer_localized_integers(&rational_places(&[]));
    expect_eq("Br(Z)", z, DivisibleGroupDescriptor::zero())?;
    let sixth = brauer_localized_integers(&rational_places(&[2, 3]));
    let want = DivisibleGroupDescriptor::qz(1).direct_sum(&DivisibleGroupDescriptor::finite(FgAbGroup::cyclic(2)));
    expect_eq("Br(Z[1/6])", sixth, want)?;
    let cyclo = brauer_localized_integers(&[PlaceSpec::finite("1+i"), PlaceSpec::Complex]);
    expect_eq("Br(Z[1/2, i])", cyclo, DivisibleGroupDescriptor::zero())?;
    let r = cli(&[
        "br-number-ring",
        "--places",
        r#"[{"kind":"finite","label":"2"},{"kind":"finite","label":"3"},{"kind":"real"}]"#,
    ])?;
    expect_eq("cli Br(Z[1/6])", r["group"].as_str().unwrap_or(""), "Q/Z ⊕ Z/2")?;
    n_torsion_matches()
}

fn c4_br_laurent() -> Check {
    let g = brauer_laurent(&rational_places(&[]), &[]).map_err(|e| e.to_string())?;
    expect_eq("Br(Z[j, 1/j])", g, DivisibleGroupDescriptor::zero())?;
    let r = cli(&["br-laurent"])?;
    expect_eq("cli", r["group"].as_str().unwrap_or(""), "0")
}

fn c7_pic_tmf() -> Check {
    let catalog = Catalog::load().map_err(|e| e.to_string())?;
    let data = TmfPageData::shipped().map_err(|e| e.to_string())?;
    let run = tmffam::run_pic_tmf(&data, &catalog, &tmffam::default_config()).map_err(|e| e.to_string())?;
    let a = catalog.facts.named("A").map_err(|e| e.to_string())?;
    let z2 = FgAbGroup::cyclic(2);
    let want = [
        (0, SheafSymbol::constant(z2)),
        (1, SheafSymbol::R1jGm),
        (3, SheafSymbol::KStarVShriek),
        (
            5,
            SheafSymbol::sum(vec![
                SheafSymbol::closed_push(Point::b(), FgAbGroup::cyclic(3)),
                SheafSymbol::subsheaf(a),
            ]),
        ),
        (7, SheafSymbol::subsheaf(SheafSymbol::qc("O/(2,j)"))),
    ];
    for s in 0..=40 {
        let expected = want
            .iter()
            .find(|(k, _)| *k == s)
            .map(|(_, f)| f.normalized())
            .unwrap_or(SheafSymbol::Zero);
        expect_eq(&format!("gr^{s}"), run.gr(s).normalized(), expected)?;
    }
    let three = run.gr(5).primary_part(3).normalized();
    expect_eq(
        "3-part of gr^5",
        three,
        SheafSymbol::closed_push(Point::b(), FgAbGroup::cyclic(3)),
    )?;
    let iso = tmffam::run_pic_tmf(&data, &catalog, &UnresolvedConfig::all(UnresolvedPolicy::Iso))
        .map_err(|e| e.to_string())?;
    if iso.gr(5) == run.gr(5) && iso.gr(7) == run.gr(7) && iso.markers == run.markers {
        return Err("setting unresolved differentials to iso changed nothing".into());
    }
    Ok(())
}

fn c8_global() -> Check {
    let catalog = Catalog::load().map_err(|e| e.to_string())?;
    let data = TmfPageData::shipped().map_err(|e| e.to_string())?;
    let run = tmffam::run_pic_tmf(&data, &catalog, &tmffam::default_config()).map_err(|e| e.to_string())?;
    let g2 = tmffam::pic_tmf_global(&run, &catalog, 2).map_err(|e| e.to_string())?;
    expect_eq("2-local", g2.group, FgAbGroup::cyclic(64))?;
    let g3 = tmffam::pic_tmf_global(&run, &catalog, 3).map_err(|e| e.to_string())?;
    expect_eq("3-local", g3.group, FgAbGroup::cyclic(9))?;
    let r = cli(&["pic-tmf-c4inv"])?;
    expect_eq(
        "c4 inverted",
        group_field(&r, "group")?,
        FgAbGroup::cyclic(2).direct_sum(&FgAbGroup::cyclic(8)),
    )
}

fn c9_lbr_tmf() -> Check {
    let catalog = Catalog::load().map_err(|e| e.to_string())?;
    let data = TmfPageData::shipped().map_err(|e| e.to_string())?;
    let run = tmffam::run_pic_tmf(&data, &catalog, &tmffam::default_config()).map_err(|e| e.to_string())?;
    let t = tmffam::lbr_tmf(&run, &catalog, 32).map_err(|e| e.to_string())?;
    expect_eq("3-torsion", t.three_torsion.clone(), FgAbGroup::cyclic(3))?;
    expect_eq("torsion above 3", t.torsion_above_3.as_str(), "0")?;
    let evens: Vec<String> = (1..=16).map(|k| format!("j^{}", 2 * k)).collect();
    expect_eq(
        "certified prefix",
        t.two_local.certified_prefix.join(","),
        evens.join(","),
    )?;
    if t.two_local.basis.len() <= evens.len() {
        return Err("truncated basis is no larger than its even prefix".into());
    }
    let m = tmffam::lbr_m_o(&run, &catalog, 32).map_err(|e| e.to_string())?;
    expect_eq("kernel order", m.kernel_order, 8)?;
    expect_eq("3-local comparison", m.three_torsion, t.three_torsion)?;
    expect_eq(
        "odd comparison",
        m.comparison_odd.as_str(),
        "isomorphism after inverting 2",
    )?;
    expect_eq("2-local basis", m.basis.join(","), t.two_local.basis.join(","))
}

fn c10_properties() -> Check {
    snf_property(1000)?;
    cyclic_property(100)?;
    d_squared_shipped()?;
    filtration_orders_shipped()?;
    filtration_property(40)?;
    charp_doubling_property(40)
}

type Criterion = (&'static str, fn() -> Check);

fn main() {
    let criteria: [Criterion; 10] = [
        ("pic-ko on Z, Z[ω][1/17], Z[1/2,ζ4]", c1_pic_ko),
        ("lbr-ko and cover splitting", c2_lbr_ko),
        ("br-number-ring and n-torsion enumeration", c3_br_number_ring),
        ("br-laurent on Z", c4_br_laurent),
        ("Artin-Schreier kernels and cokernel", artin_schreier_suite),
        ("Čech cohomology of punctured affine space", cech_suite),
        ("Picard filtration of TMF, rows 0 to 7", c7_pic_tmf),
        ("Pic(TMF) 2- and 3-locally, c4 inverted", c8_global),
        ("lbr-tmf and lbr-mo", c9_lbr_tmf),
        ("property suites", c10_properties),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(()) => println!("PASS {:>2} {name}", i + 1),
            Err(e) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {e}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

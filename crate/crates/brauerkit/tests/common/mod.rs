#![allow(dead_code)]

use std::collections::BTreeSet;

use brauerkit::abelian::{smith_normal_form, FgAbGroup, IntMatrix};
use brauerkit::charp::{
    operator_cokernel_basis, operator_kernel, punctured_affine_cohomology, FiniteField, SemilinearOperator,
    TruncatedCharPModule,
};
use brauerkit::cyccoh::{group_cohomology, CyclicModule};
use brauerkit::kofam::{self, EtaleRingDescriptor, Knob};
use brauerkit::numbrauer::{brauer_localized_integers, PlaceSpec};
use brauerkit::sheaftab::{Catalog, Site};
use brauerkit::ssengine::{assemble_groups, check_d_squared, witnesses_from_total, SheafContext, StageWitness};
use brauerkit::tmffam::{self, TmfPageData};
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

pub type Check = Result<(), String>;

pub fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

pub fn group(s: &str) -> FgAbGroup {
    s.parse().unwrap()
}

// Smith normal form

fn matrix_strategy() -> impl Strategy<Value = Vec<Vec<i64>>> {
    (1usize..=6, 1usize..=6).prop_flat_map(|(r, c)| prop::collection::vec(prop::collection::vec(-30i64..=30, c), r))
}

fn is_unimodular(m: &IntMatrix) -> bool {
    m.rows() == m.cols() && m.determinant().abs().is_one()
}

pub fn snf_identities_on(rows: &[Vec<i64>]) -> Check {
    let m = IntMatrix::from_rows(rows);
    let snf = smith_normal_form(&m);
    ensure(snf.u.mul(&m).mul(&snf.v) == snf.d, || {
        format!("U·M·V != D for {rows:?}")
    })?;
    ensure(is_unimodular(&snf.u) && is_unimodular(&snf.v), || {
        format!("non-unimodular transform for {rows:?}")
    })?;
    ensure(snf.u.mul(&snf.u_inv) == IntMatrix::identity(m.rows()), || {
        "U·U⁻¹ != I".into()
    })?;
    ensure(snf.v.mul(&snf.v_inv) == IntMatrix::identity(m.cols()), || {
        "V·V⁻¹ != I".into()
    })?;
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            if i != j && !snf.d.get(i, j).is_zero() {
                return Err(format!("D not diagonal for {rows:?}"));
            }
        }
    }
    let diag = snf.diagonal();
    let mut prev: Option<&BigInt> = None;
    for d in &diag {
        ensure(!d.is_negative(), || format!("negative invariant {d}"))?;
        if let Some(p) = prev {
            let divides = if p.is_zero() { d.is_zero() } else { d.is_multiple_of(p) };
            ensure(divides, || format!("divisibility chain broken: {diag:?}"))?;
        }
        prev = Some(d);
    }
    ensure(diag.iter().filter(|d| !d.is_zero()).count() == snf.rank, || {
        "rank mismatch".into()
    })
}

pub fn snf_property(cases: u32) -> Check {
    runner(cases)
        .run(&matrix_strategy(), |rows| {
            snf_identities_on(&rows).map_err(TestCaseError::fail)
        })
        .map_err(|e| e.to_string())
}

// Cyclic group cohomology

/// Direct sum of Z/gcd(k, d) over the invariant factors d, plus Z/k per free summand.
fn mod_k_quotient(free: usize, orders: &[u64], k: u64) -> FgAbGroup {
    let mut v: Vec<u64> = orders.iter().map(|&d| d.gcd(&k)).collect();
    v.extend(std::iter::repeat_n(k, free));
    FgAbGroup::from_orders(0, &v)
}

fn k_torsion(orders: &[u64], k: u64) -> FgAbGroup {
    let v: Vec<u64> = orders.iter().map(|&d| d.gcd(&k)).collect();
    FgAbGroup::from_orders(0, &v)
}

pub fn cyclic_cohomology_on(free: usize, orders: &[u64], n: u64, sign: bool) -> Check {
    let a = FgAbGroup::from_orders(free, orders);
    let m = if sign {
        CyclicModule::sign(a)
    } else {
        CyclicModule::trivial_n(a, n)
    };
    let h = |s: u32| group_cohomology(&m, s).map_err(|e| e.to_string());
    for s in 1..=5 {
        let (x, y) = (h(s)?, h(s + 2)?);
        ensure(x == y, || {
            format!(
                "H^{s} = {x} but H^{} = {y} for {orders:?}, n = {n}, sign = {sign}",
                s + 2
            )
        })?;
    }
    // Tate values from the periodic resolution, computed independently.
    let (even, odd) = if sign {
        (k_torsion(orders, 2), mod_k_quotient(free, orders, 2))
    } else {
        (mod_k_quotient(free, orders, n), k_torsion(orders, n))
    };
    ensure(h(2)? == even, || format!("H^2 = {} expected {even}", h(2).unwrap()))?;
    ensure(h(1)? == odd, || format!("H^1 = {} expected {odd}", h(1).unwrap()))
}

pub fn cyclic_property(cases: u32) -> Check {
    let strat = (
        0usize..=2,
        prop::collection::vec(2u64..=24, 0..=3),
        2u64..=6,
        any::<bool>(),
    );
    runner(cases)
        .run(&strat, |(free, orders, n, sign)| {
            cyclic_cohomology_on(free, &orders, n, sign).map_err(TestCaseError::fail)
        })
        .map_err(|e| e.to_string())
}

// d∘d = 0 on shipped rule tables

pub fn d_squared_shipped() -> Check {
    let catalog = Catalog::load().map_err(|e| e.to_string())?;
    for (s_max, t_min, t_max) in [(8, 0, 16), (12, -8, 24), (20, -16, 40)] {
        let seq = kofam::ku_additive_pages(s_max, t_min, t_max).map_err(|e| e.to_string())?;
        check_d_squared(&seq.pages[0], &seq.rules, None).map_err(|e| format!("KO additive: {e}"))?;
    }
    let seq = kofam::ko_picard_pages(&catalog, 13, 14).map_err(|e| e.to_string())?;
    let ctx = SheafContext {
        catalog: &catalog,
        site: Site::SpecZ,
    };
    check_d_squared(&seq.pages[0], &seq.rules, Some(&ctx)).map_err(|e| format!("KO Picard: {e}"))?;
    let data = TmfPageData::shipped().map_err(|e| e.to_string())?;
    let seq = data.sequence(&catalog).map_err(|e| e.to_string())?;
    let ctx = SheafContext {
        catalog: &catalog,
        site: Site::A1,
    };
    check_d_squared(&seq.pages[0], &seq.rules, Some(&ctx)).map_err(|e| format!("TMF Picard: {e}"))
}

// Filtration orders against assembled orders

fn product(gs: &[FgAbGroup]) -> Option<u64> {
    gs.iter().try_fold(1u64, |acc, g| g.order().map(|o| acc * o))
}

pub fn filtration_orders_shipped() -> Check {
    let catalog = Catalog::load().map_err(|e| e.to_string())?;
    for stem in ["Z", "Z_omega_17", "Z_half_zeta4", "Z_third_zeta3", "Z_sixth"] {
        let ring = EtaleRingDescriptor::shipped(stem).map_err(|e| e.to_string())?;
        let r = kofam::pic_ko(&catalog, &ring, Knob::Zero).map_err(|e| format!("{stem}: {e}"))?;
        let gr: Vec<FgAbGroup> = r.graded.iter().map(|g| g.sections.clone()).collect();
        ensure(product(&gr) == r.pi0pic_sections.order(), || {
            format!("{stem}: graded {gr:?} vs assembled {}", r.pi0pic_sections)
        })?;
        if let Some(order) = r.order {
            ensure(
                Some(order) == r.pi0pic_sections.order().zip(r.pic_r.order()).map(|(a, b)| a * b),
                || format!("{stem}: order {order} vs pieces"),
            )?;
        }
    }
    let data = TmfPageData::shipped().map_err(|e| e.to_string())?;
    let run = tmffam::run_pic_tmf(&data, &catalog, &tmffam::default_config()).map_err(|e| e.to_string())?;
    for p in [2, 3, 5, 7] {
        let g = tmffam::pic_tmf_global(&run, &catalog, p).map_err(|e| e.to_string())?;
        let gr: Vec<FgAbGroup> = g.graded_sections.iter().map(|s| group(s)).collect();
        ensure(product(&gr) == g.group.order(), || {
            format!("p = {p}: graded {gr:?} vs {}", g.group)
        })?;
    }
    for drop_k in [false, true] {
        let c = tmffam::pic_tmf_c4inv(&run, &catalog, drop_k).map_err(|e| e.to_string())?;
        ensure(
            product(&[c.kernel.clone(), c.quotient.clone()]) == c.group.order(),
            || format!("c4inv: {} and {} vs {}", c.kernel, c.quotient, c.group),
        )?;
    }
    Ok(())
}

fn graded_strategy() -> impl Strategy<Value = Vec<FgAbGroup>> {
    prop::collection::vec(
        prop_oneof![Just(1u64), Just(2), Just(3), Just(4), Just(8), Just(9)].prop_map(FgAbGroup::cyclic),
        1..=5,
    )
}

pub fn filtration_property(cases: u32) -> Check {
    runner(cases)
        .run(&graded_strategy(), |gr| {
            let total = product(&gr).unwrap();
            prop_assume!(total <= 1024);
            let split = assemble_groups(&gr, &vec![StageWitness::Split; gr.len()]).unwrap();
            prop_assert_eq!(split.order(), Some(total));
            if let Ok(g) = assemble_groups(&gr, &witnesses_from_total(&gr, total)) {
                prop_assert_eq!(g.order(), Some(total));
                prop_assert!(g.is_cyclic());
            }
            if total > 256 {
                return Ok(());
            }
            if let Ok(g) = assemble_groups(&gr, &vec![StageWitness::None; gr.len()]) {
                prop_assert_eq!(g.order(), Some(total));
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

// Window doubling for char p computations

fn module(p: u64, laurent: bool, w: i64) -> TruncatedCharPModule {
    if laurent {
        TruncatedCharPModule::laurent(p, -w, w).unwrap()
    } else {
        TruncatedCharPModule::polynomial(p, w).unwrap()
    }
}

pub const CHARP_OPERATORS: &[(u64, &str, bool)] = &[
    (2, "x + x^2", false),
    (2, "x + x^2", true),
    (2, "x + j*x^2", false),
    (2, "x + j*x^2", true),
    (3, "z - z^3", false),
    (3, "z - z^3", true),
];

pub fn charp_doubling_on(p: u64, op: &str, laurent: bool, w: i64) -> Check {
    let op = SemilinearOperator::parse(p, op).map_err(|e| e.to_string())?;
    let small = module(p, laurent, w);
    let big = small.doubled();
    if let (Ok(a), Ok(b)) = (operator_kernel(&op, &small), operator_kernel(&op, &big)) {
        if a.stabilized {
            ensure(a.basis == b.basis, || {
                format!("{op} kernel at {w}: {:?} vs {:?}", a.basis, b.basis)
            })?;
        }
    }
    if let (Ok(a), Ok(b)) = (operator_cokernel_basis(&op, &small), operator_cokernel_basis(&op, &big)) {
        let restricted: Vec<i64> = b
            .basis
            .iter()
            .copied()
            .filter(|&d| d >= a.stable_floor_degree && d <= a.stable_prefix_degree)
            .collect();
        ensure(a.basis == restricted, || {
            format!("{op} cokernel at {w}: {:?} vs {restricted:?}", a.basis)
        })?;
    }
    Ok(())
}

pub fn cech_doubling_on(n: usize, w: i64) -> Check {
    let a = punctured_affine_cohomology(n, w).map_err(|e| e.to_string())?;
    let b = punctured_affine_cohomology(n, 2 * w).map_err(|e| e.to_string())?;
    for (q, basis) in &b.cohomology {
        let inside: Vec<Vec<i64>> = basis
            .iter()
            .filter(|v| v.iter().all(|x| x.abs() <= w) && v.iter().sum::<i64>() >= -w)
            .cloned()
            .collect();
        let small = a.cohomology.get(q).cloned().unwrap_or_default();
        ensure(small == inside, || {
            format!("Čech H^{q} of A^{n} minus 0 changes between windows {w} and {}", 2 * w)
        })?;
    }
    Ok(())
}

pub fn charp_doubling_property(cases: u32) -> Check {
    let strat = (0..CHARP_OPERATORS.len(), 8i64..=40);
    runner(cases)
        .run(&strat, |(i, w)| {
            let (p, op, laurent) = CHARP_OPERATORS[i];
            charp_doubling_on(p, op, laurent, w).map_err(TestCaseError::fail)
        })
        .map_err(|e| e.to_string())?;
    for n in 1..=3 {
        for w in n as i64..=4 {
            cech_doubling_on(n, w)?;
        }
    }
    Ok(())
}

// Brauer groups of localized integers: n-torsion by enumeration

/// Counts tuples in (1/n Z/Z)^m ⊕ (n-torsion of 1/2 Z/Z)^r whose invariants sum to 0.
pub fn brute_n_torsion(n: u64, m: usize, r: usize) -> u64 {
    let half: u64 = if n.is_multiple_of(2) { 2 } else { 1 };
    let total = n.pow(m as u32) * half.pow(r as u32);
    let mut count = 0;
    for code in 0..total {
        let mut c = code;
        let mut num = 0u64; // sum of invariants, in units of 1/(2n)
        for _ in 0..m {
            num += 2 * (c % n);
            c /= n;
        }
        for _ in 0..r {
            num += (c % half) * n;
            c /= half;
        }
        if num.is_multiple_of(2 * n) {
            count += 1;
        }
    }
    count
}

pub fn places(m: usize, r: usize) -> Vec<PlaceSpec> {
    let mut v: Vec<PlaceSpec> = (0..m).map(|i| PlaceSpec::finite(format!("p{i}"))).collect();
    v.extend(std::iter::repeat_n(PlaceSpec::Real, r));
    v
}

pub fn n_torsion_matches() -> Check {
    for n in 1..=12 {
        for m in 0..=3 {
            for r in 0..=2 {
                let formula = brauer_localized_integers(&places(m, r)).n_torsion_order(n);
                let brute = brute_n_torsion(n, m, r);
                ensure(formula == Some(brute), || {
                    format!("n = {n}, m = {m}, r = {r}: formula {formula:?}, enumeration {brute}")
                })?;
            }
        }
    }
    Ok(())
}

// Artin–Schreier oracles over F_2, by exhaustive search and row reduction

/// f + j^twist f^2 over F_2, with f a set of exponents.
pub fn f2_apply(f: &BTreeSet<i64>, twist: i64) -> BTreeSet<i64> {
    let sq: BTreeSet<i64> = f.iter().map(|d| 2 * d + twist).collect();
    f.symmetric_difference(&sq).copied().collect()
}

/// All f supported in [lo, hi] with f + j^twist f^2 = 0.
pub fn f2_kernel_exhaustive(lo: i64, hi: i64, twist: i64) -> BTreeSet<BTreeSet<i64>> {
    let k = (hi - lo + 1) as u32;
    (0u64..1 << k)
        .map(|mask| {
            (0..k as i64)
                .filter(|i| mask >> i & 1 == 1)
                .map(|i| lo + i)
                .collect::<BTreeSet<i64>>()
        })
        .filter(|f| f2_apply(f, twist).is_empty())
        .collect()
}

/// Span of a library kernel basis, as exponent sets.
pub fn f2_span(basis: &[BTreeSet<i64>]) -> BTreeSet<BTreeSet<i64>> {
    let mut out = BTreeSet::new();
    for mask in 0u64..1 << basis.len() {
        let mut acc = BTreeSet::new();
        for (i, b) in basis.iter().enumerate() {
            if mask >> i & 1 == 1 {
                acc = acc.symmetric_difference(b).copied().collect();
            }
        }
        out.insert(acc);
    }
    out
}

/// Rank over F_2 of bit vectors.
pub fn f2_rank(vectors: &[u64]) -> usize {
    let mut basis: Vec<u64> = Vec::new();
    for &v in vectors {
        let mut x = v;
        for &b in &basis {
            x = x.min(x ^ b);
        }
        if x != 0 {
            basis.push(x);
            basis.sort_unstable_by(|a, b| b.cmp(a));
        }
    }
    basis.len()
}

fn laurent_support(l: &brauerkit::charp::Laurent) -> BTreeSet<i64> {
    l.coeffs.iter().filter(|(_, &c)| c % 2 == 1).map(|(&d, _)| d).collect()
}

pub fn artin_schreier_suite() -> Check {
    let x_x2 = SemilinearOperator::parse(2, "x + x^2").unwrap();
    let x_jx2 = SemilinearOperator::parse(2, "x + j*x^2").unwrap();

    // x + x^2 on F_2[j]: kernel {0, 1}.
    let lib = operator_kernel(&x_x2, &TruncatedCharPModule::polynomial(2, 16).unwrap()).map_err(|e| e.to_string())?;
    let lib_span = f2_span(&lib.basis.iter().map(laurent_support).collect::<Vec<_>>());
    let brute = f2_kernel_exhaustive(0, 10, 0);
    ensure(lib_span == brute && brute.len() == 2, || {
        format!("ker(x + x^2): {lib_span:?} vs {brute:?}")
    })?;

    // x + jx^2 on F_2[j^{±1}]: kernel {0, j^-1}.
    let lib =
        operator_kernel(&x_jx2, &TruncatedCharPModule::laurent(2, -16, 16).unwrap()).map_err(|e| e.to_string())?;
    let lib_span = f2_span(&lib.basis.iter().map(laurent_support).collect::<Vec<_>>());
    let brute = f2_kernel_exhaustive(-6, 6, 1);
    let expected: BTreeSet<BTreeSet<i64>> = [BTreeSet::new(), BTreeSet::from([-1])].into();
    ensure(lib_span == brute && brute == expected, || {
        format!("ker(x + jx^2) on Laurent: {lib_span:?} vs {brute:?}")
    })?;
    ensure(lib.basis_strings() == vec!["j^-1".to_string()], || {
        format!("{:?}", lib.basis_strings())
    })?;

    // z - z^3 on F_3: every element is a root.
    let f3 = FiniteField::new(3, 1).unwrap();
    let z = SemilinearOperator::parse(3, "z - z^3").unwrap();
    let (ker, _) = f3.operator_dims(&z).map_err(|e| e.to_string())?;
    let brute = (0i64..3).filter(|&a| (a - a.pow(3)).rem_euclid(3) == 0).count();
    ensure(3usize.pow(ker as u32) == brute && brute == 3, || {
        format!("ker(z - z^3) dim {ker}, roots {brute}")
    })?;

    // x + jx^2 on F_2[j] in degrees ≤ 32: image of F_2[j]_{≤15} plus the library basis
    // spans everything and is independent, and j^2, j^4, ..., j^32 sit in the basis.
    let top = 32;
    let lib = operator_cokernel_basis(&x_jx2, &TruncatedCharPModule::polynomial(2, top).unwrap())
        .map_err(|e| e.to_string())?;
    let inside: Vec<i64> = lib.basis.iter().copied().filter(|&d| d <= top).collect();
    let image: Vec<u64> = (0..=(top - 1) / 2)
        .map(|d| {
            f2_apply(&BTreeSet::from([d]), 1)
                .iter()
                .fold(0u64, |acc, e| acc | 1 << e)
        })
        .collect();
    let reps: Vec<u64> = inside.iter().map(|d| 1u64 << d).collect();
    let all: Vec<u64> = image.iter().chain(&reps).copied().collect();
    let dim = (top + 1) as usize;
    ensure(f2_rank(&image) + reps.len() == dim && f2_rank(&all) == dim, || {
        format!("cokernel representatives {inside:?} are not a complement of the image")
    })?;
    let evens: Vec<i64> = (1..=top / 2).map(|k| 2 * k).collect();
    let even_bits: Vec<u64> = evens.iter().map(|d| 1u64 << d).collect();
    let with_evens: Vec<u64> = image.iter().chain(&even_bits).copied().collect();
    ensure(f2_rank(&with_evens) == f2_rank(&image) + evens.len(), || {
        "even powers are dependent modulo the image".into()
    })?;
    ensure(evens.iter().all(|d| inside.contains(d)), || {
        format!("basis {inside:?} misses an even power")
    })
}

// Čech cohomology of punctured affine space

pub fn cech_suite() -> Check {
    let w = 5;
    let r = punctured_affine_cohomology(4, w).map_err(|e| e.to_string())?;
    let mut expected: Vec<Vec<i64>> = Vec::new();
    for a in -w..0 {
        for b in -w..0 {
            for c in -w..0 {
                for d in -w..0 {
                    if a + b + c + d >= -w {
                        expected.push(vec![a, b, c, d]);
                    }
                }
            }
        }
    }
    let got: BTreeSet<Vec<i64>> = r.cohomology.get(&3).cloned().unwrap_or_default().into_iter().collect();
    let want: BTreeSet<Vec<i64>> = expected.into_iter().collect();
    ensure(!want.is_empty() && got == want, || {
        format!("H^3 basis {got:?} vs {want:?}")
    })?;
    ensure(r.higher().all(|(q, _)| *q == 3), || {
        "H^q nonzero outside q = 0, 3".into()
    })?;
    let line = punctured_affine_cohomology(1, 12).map_err(|e| e.to_string())?;
    ensure(line.higher().count() == 0, || "H^{>0}(A^1 minus 0) is nonzero".into())
}

mod common;

use common::*;

#[test]
fn artin_schreier_against_row_reduction() {
    artin_schreier_suite().unwrap();
}

#[test]
fn cech_against_enumeration() {
    cech_suite().unwrap();
}

#[test]
fn f2_rank_basics() {
    assert_eq!(f2_rank(&[0b11, 0b01, 0b10]), 2);
    assert_eq!(f2_rank(&[0]), 0);
}

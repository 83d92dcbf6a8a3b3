use std::ffi::{CStr, CString};
use std::ptr;

use nadisc_ffi::*;

fn last_error() -> Option<String> {
    let p = nadisc_last_error();
    (!p.is_null()).then(|| unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned())
}

fn random(family: &str, n: usize, m: usize, seed: u64) -> *mut NadiscInstance {
    let fam = CString::new(family).unwrap();
    let mut inst = ptr::null_mut();
    let st = unsafe { nadisc_instance_random(fam.as_ptr(), n, m, seed, &mut inst) };
    assert_eq!(st, NadiscStatus::Ok, "{:?}", last_error());
    inst
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(nadisc_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn instance_shape_and_eval() {
    let inst = random("additive-uniform", 3, 5, 7);
    let (mut n, mut m) = (0, 0);
    assert_eq!(unsafe { nadisc_instance_shape(inst, &mut n, &mut m) }, NadiscStatus::Ok);
    assert_eq!((n, m), (3, 5));

    let mut total = 0.0;
    let mut singles = 0.0;
    unsafe {
        assert_eq!(nadisc_eval(inst, 1, 0b11111, &mut total), NadiscStatus::Ok);
        for j in 0..5 {
            let mut x = 0.0;
            assert_eq!(nadisc_eval(inst, 1, 1 << j, &mut x), NadiscStatus::Ok);
            singles += x;
        }
    }
    assert!((total - singles).abs() < 1e-12);
    unsafe { nadisc_instance_free(inst) };
}

#[test]
fn errors_map_to_status_codes() {
    let bad = CString::new("no-such-family").unwrap();
    let mut inst = ptr::null_mut();
    let st = unsafe { nadisc_instance_random(bad.as_ptr(), 2, 4, 0, &mut inst) };
    assert_eq!(st, NadiscStatus::InvalidInput);
    assert!(inst.is_null());
    assert!(last_error().unwrap().contains("no-such-family"));

    let inst = random("coverage", 2, 4, 0);
    let mut x = 0.0;
    assert_eq!(unsafe { nadisc_eval(inst, 0, 1 << 4, &mut x) }, NadiscStatus::InvalidInput);
    assert_eq!(unsafe { nadisc_eval(inst, 2, 0, &mut x) }, NadiscStatus::InvalidInput);
    assert_eq!(unsafe { nadisc_eval(inst, 0, 0, ptr::null_mut()) }, NadiscStatus::NullPointer);
    assert!(last_error().unwrap().contains("out_value"));
    assert_eq!(unsafe { nadisc_eval(ptr::null(), 0, 0, &mut x) }, NadiscStatus::NullPointer);

    assert_eq!(unsafe { nadisc_eval(inst, 0, 0, &mut x) }, NadiscStatus::Ok);
    assert!(last_error().is_none());

    let garbage = CString::new("{not json").unwrap();
    let mut other = ptr::null_mut();
    assert_eq!(unsafe { nadisc_instance_from_json(garbage.as_ptr(), &mut other) }, NadiscStatus::Parse);
    unsafe { nadisc_instance_free(inst) };
}

#[test]
fn json_round_trip_preserves_values() {
    let inst = random("table-random-lipschitz", 2, 4, 11);
    let mut json = ptr::null_mut();
    assert_eq!(unsafe { nadisc_instance_to_json(inst, &mut json) }, NadiscStatus::Ok);
    let mut copy = ptr::null_mut();
    assert_eq!(unsafe { nadisc_instance_from_json(json, &mut copy) }, NadiscStatus::Ok);
    for agent in 0..2 {
        for s in 0..16u64 {
            let (mut a, mut b) = (0.0, 0.0);
            unsafe {
                nadisc_eval(inst, agent, s, &mut a);
                nadisc_eval(copy, agent, s, &mut b);
            }
            assert_eq!(a, b);
        }
    }
    unsafe {
        nadisc_string_free(json);
        nadisc_instance_free(copy);
        nadisc_instance_free(inst);
    }
}

#[test]
fn split_round_and_measure() {
    let inst = random("coverage", 2, 8, 3);
    let mut split = ptr::null_mut();
    assert_eq!(unsafe { nadisc_split(inst, 2, 5, 4, &mut split) }, NadiscStatus::Ok);
    let (mut imb, mut conv, mut frac) = (0.0, false, 0);
    assert_eq!(unsafe { nadisc_split_summary(split, &mut imb, &mut conv, &mut frac) }, NadiscStatus::Ok);
    assert!(imb >= 0.0);
    assert!(frac <= 2 * 2);

    let mut colors = [usize::MAX; 8];
    let mut disc = -1.0;
    let st = unsafe { nadisc_round(inst, split, 16, 9, colors.as_mut_ptr(), 8, &mut disc) };
    assert_eq!(st, NadiscStatus::Ok, "{:?}", last_error());
    assert!(colors.iter().all(|&c| c < 2));
    let mut again = -1.0;
    assert_eq!(unsafe { nadisc_disc_of_coloring(inst, colors.as_ptr(), 8, 2, &mut again) }, NadiscStatus::Ok);
    assert_eq!(disc, again);

    let mut short = [0usize; 7];
    let st = unsafe { nadisc_round(inst, split, 16, 9, short.as_mut_ptr(), 7, &mut disc) };
    assert_eq!(st, NadiscStatus::InvalidInput);

    let mut json = ptr::null_mut();
    assert_eq!(unsafe { nadisc_split_to_json(split, &mut json) }, NadiscStatus::Ok);
    let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap().to_owned();
    assert!(text.contains("\"imbalance\""));
    unsafe {
        nadisc_string_free(json);
        nadisc_split_free(split);
        nadisc_instance_free(inst);
    }
}

#[test]
fn subsidy_respects_the_discrepancy_bound() {
    let inst = random("coverage", 3, 6, 2);
    let colors = [0usize, 1, 2, 0, 1, 2];
    let mut d = 0.0;
    assert_eq!(unsafe { nadisc_disc_of_coloring(inst, colors.as_ptr(), 6, 3, &mut d) }, NadiscStatus::Ok);
    let mut owner = [usize::MAX; 6];
    let mut p = [f64::NAN; 3];
    let mut total = 0.0;
    let st = unsafe { nadisc_subsidy(inst, colors.as_ptr(), 6, owner.as_mut_ptr(), p.as_mut_ptr(), 3, &mut total) };
    assert_eq!(st, NadiscStatus::Ok, "{:?}", last_error());
    assert!(owner.iter().all(|&o| o < 3));
    assert!(p.iter().all(|&x| (0.0..=d + 1e-9).contains(&x)));
    assert!(p.contains(&0.0));
    assert!((p.iter().sum::<f64>() - total).abs() < 1e-12);
    assert!(total <= 2.0 * d + 1e-9);

    let st = unsafe { nadisc_subsidy(inst, colors.as_ptr(), 6, owner.as_mut_ptr(), p.as_mut_ptr(), 2, &mut total) };
    assert_eq!(st, NadiscStatus::InvalidInput);
    unsafe { nadisc_instance_free(inst) };
}

#[test]
fn free_functions_accept_null() {
    unsafe {
        nadisc_instance_free(ptr::null_mut());
        nadisc_split_free(ptr::null_mut());
        nadisc_string_free(ptr::null_mut());
    }
}

//! Brute-force reference implementations shared by the integration suites.
//! These deliberately avoid prefix tables and the dynamic programs: means are
//! accumulated by direct summation and the corner optimizations are exhaustive.
#![allow(dead_code)] // each integration test binary uses a subset

use isoblock::lattice::{Field, LatticeShape};
use isoblock::rng::Rng;

pub fn direct_mean(f: &Field, u: &[usize], v: &[usize]) -> f64 {
    let s = f.shape();
    let mut sum = 0.0;
    let mut count = 0usize;
    let mut m = u.to_vec();
    loop {
        sum += f.values()[s.flat(&m)];
        count += 1;
        if !s.step_in_box(&mut m, u, v) {
            break;
        }
    }
    sum / count as f64
}

pub fn visit_box(s: &LatticeShape, lo: &[usize], hi: &[usize], mut f: impl FnMut(&[usize])) {
    let mut m = lo.to_vec();
    loop {
        f(&m);
        if !s.step_in_box(&mut m, lo, hi) {
            break;
        }
    }
}

pub fn brute_max_min(y: &Field) -> Field {
    let s = y.shape().clone();
    let top: Vec<usize> = s.dims().iter().map(|&d| d - 1).collect();
    let bottom = vec![0usize; s.ndim()];
    let mut out = vec![0.0f64; s.len()];
    for x_flat in 0..s.len() {
        let x = s.multi(x_flat);
        let mut best = f64::NEG_INFINITY;
        visit_box(&s, &bottom, &x, |u| {
            let mut inner = f64::INFINITY;
            visit_box(&s, &x, &top, |v| {
                inner = inner.min(direct_mean(y, u, v));
            });
            best = best.max(inner);
        });
        out[x_flat] = best;
    }
    Field::new(s, out).unwrap()
}

pub fn brute_min_max(y: &Field) -> Field {
    let s = y.shape().clone();
    let top: Vec<usize> = s.dims().iter().map(|&d| d - 1).collect();
    let bottom = vec![0usize; s.ndim()];
    let mut out = vec![0.0f64; s.len()];
    for x_flat in 0..s.len() {
        let x = s.multi(x_flat);
        let mut best = f64::INFINITY;
        visit_box(&s, &x, &top, |v| {
            let mut inner = f64::NEG_INFINITY;
            visit_box(&s, &bottom, &x, |u| {
                inner = inner.max(direct_mean(y, u, v));
            });
            best = best.min(inner);
        });
        out[x_flat] = best;
    }
    Field::new(s, out).unwrap()
}

pub fn random_field(shape: &LatticeShape, rng: &mut Rng) -> Field {
    let mut vals = vec![0.0f64; shape.len()];
    rng.fill_normal(&mut vals);
    Field::new(shape.clone(), vals).unwrap()
}

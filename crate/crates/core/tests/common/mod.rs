#![allow(dead_code)]

use contembed::{PLMap, Rational};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn breakpoints(rng: &mut ChaCha8Rng, branches: usize) -> Vec<Rational> {
    let den = 64 * branches as i64;
    let mut inner: Vec<i64> = (1..den).collect();
    inner.shuffle(rng);
    let mut cuts: Vec<i64> = inner[..branches - 1].to_vec();
    cuts.sort();
    let mut xs = vec![Rational::zero()];
    xs.extend(cuts.into_iter().map(|c| Rational::new(c, den)));
    xs.push(Rational::one());
    xs
}

/// Alternating grid values shifted to start at 0, with their span.
fn alternating(rng: &mut ChaCha8Rng, count: usize, levels: i64, distinct: bool) -> (Vec<i64>, i64) {
    'retry: loop {
        let mut used = Vec::new();
        let mut up = rng.gen_bool(0.5);
        let mut v = rng.gen_range(0..=levels);
        used.push(v);
        for _ in 1..count {
            let choices: Vec<i64> = if up {
                (v + 1..=levels).collect()
            } else {
                (0..v).collect()
            };
            let choices: Vec<i64> = choices.into_iter().filter(|c| !distinct || !used.contains(c)).collect();
            match choices.choose(rng) {
                Some(&c) => v = c,
                None => continue 'retry,
            }
            used.push(v);
            up = !up;
        }
        let lo = *used.iter().min().unwrap();
        let hi = *used.iter().max().unwrap();
        if hi == lo {
            continue;
        }
        return (used.into_iter().map(|u| u - lo).collect(), hi - lo);
    }
}

fn build(rng: &mut ChaCha8Rng, branches: usize, levels: i64, distinct: bool) -> PLMap {
    let xs = breakpoints(rng, branches);
    let (raw, span) = alternating(rng, branches + 1, levels, distinct);
    let pts = xs
        .into_iter()
        .zip(raw)
        .map(|(x, v)| (x, Rational::new(v, span)))
        .collect();
    PLMap::from_points(pts).expect("generated map is valid")
}

/// A map with `branches` monotone pieces and pairwise distinct vertex values.
pub fn generic_map(rng: &mut ChaCha8Rng, branches: usize) -> PLMap {
    build(rng, branches, 1000, true)
}

/// A map whose vertex values come from a coarse grid, so values repeat.
pub fn tie_map(rng: &mut ChaCha8Rng, branches: usize) -> PLMap {
    build(rng, branches, 4, false)
}

/// A generic map with extra vertices inside its branches where the slope
/// changes but the direction does not.
pub fn bent_map(rng: &mut ChaCha8Rng, branches: usize) -> PLMap {
    let f = generic_map(rng, branches);
    let mut pts: Vec<(Rational, Rational)> = Vec::new();
    for b in f.branches() {
        pts.push((b.lo.clone(), b.value_lo.clone()));
        if rng.gen_bool(0.7) {
            let s = Rational::new(rng.gen_range(1..8), 8);
            let t = Rational::new(rng.gen_range(1..8), 8);
            if s != t {
                let x = &b.lo + (&b.hi - &b.lo) * s;
                let y = &b.value_lo + (&b.value_hi - &b.value_lo) * t;
                pts.push((x, y));
            }
        }
    }
    pts.push((Rational::one(), f.values()[f.values().len() - 1].clone()));
    PLMap::from_points(pts).expect("bent map is valid")
}

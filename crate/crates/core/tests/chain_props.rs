mod common;

use contembed::chains::{
    graph_pattern, natural_refinement, pattern, pushforward_refines, refines, uniform_chain, Chain1D,
};
use contembed::{q, PLMap, Rational};
use proptest::prelude::*;

fn identity() -> PLMap {
    PLMap::identity()
}

#[test]
fn uniform_mesh_is_three_halves_over_n() {
    for n in 1..=64 {
        let c = uniform_chain(n);
        assert_eq!(c.len(), n);
        assert_eq!(c.mesh(), q(3, 2 * n as i64), "n = {n}");
        assert!(c.covers_unit());
    }
}

#[test]
fn uniform_refinements() {
    let c4 = uniform_chain(4);
    assert!(refines(&c4, &c4, false));
    assert!(refines(&uniform_chain(16), &c4, true));
    assert!(!refines(&uniform_chain(2), &c4, false));
    assert_eq!(
        pattern(&uniform_chain(8), &c4).unwrap().entries(),
        &[1, 1, 2, 2, 3, 3, 4, 4]
    );
}

/// Nested chains on the domain made by refining along the identity.
fn tower(levels: usize) -> Vec<Chain1D> {
    let mut out = vec![uniform_chain(4)];
    for _ in 1..levels {
        let prev = out.last().unwrap();
        let bound = prev.mesh() * Rational::half();
        out.push(natural_refinement(&identity(), prev, &bound).unwrap().chain);
    }
    out
}

#[test]
fn identity_refinements_nest_properly() {
    let t = tower(4);
    for w in t.windows(2) {
        assert!(refines(&w[1], &w[0], true));
        assert!(w[1].mesh() <= w[0].mesh() * Rational::half());
    }
}

#[test]
fn patterns_compose_up_to_one_link() {
    let t = tower(3);
    let (c, c1, c2) = (&t[0], &t[1], &t[2]);
    let direct = pattern(c2, c).unwrap();
    let upper = pattern(c1, c).unwrap();
    let lower = pattern(c2, c1).unwrap();
    for (j, (&d, &via)) in direct.entries().iter().zip(lower.entries()).enumerate() {
        let through = upper.entries()[via - 1];
        assert!(d.abs_diff(through) <= 1, "fine link {j}: {d} vs {through}");
        let (l, outer) = (&c2.links()[j], &c.links()[d - 1]);
        assert!(outer.contains_open(&l.lo, &l.hi));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn natural_refinements_follow_the_graph(seed in 0u64..10_000, n in 2usize..5) {
        let mut rng = common::rng(seed);
        let branches = (seed % 4) as usize + 1;
        let f = if seed % 2 == 0 { common::generic_map(&mut rng, branches) } else { common::bent_map(&mut rng, branches) };
        let mut size = 1 << n;
        let coarse = loop {
            let c = uniform_chain(size);
            if c.mesh() < f.min_branch_diameter() {
                break c;
            }
            size *= 2;
        };
        let bound = coarse.mesh() * Rational::half();
        let nr = natural_refinement(&f, &coarse, &bound).unwrap();
        prop_assert!(nr.pattern.is_valid());
        prop_assert!(nr.chain.covers_unit());
        prop_assert!(nr.chain.mesh() <= bound);
        prop_assert!(pushforward_refines(&f, &nr.chain, &coarse));
        prop_assert_eq!(graph_pattern(&f, &nr.chain, &coarse).unwrap(), nr.pattern.clone());
        let links = nr.chain.links();
        for i in 0..links.len() {
            for k in i + 2..links.len() {
                prop_assert!(!links[i].meets(&links[k]));
            }
        }
    }

    #[test]
    fn uniform_patterns_are_valid(a in 1usize..20, k in 1usize..6) {
        let p = pattern(&uniform_chain(a * k * 2), &uniform_chain(a)).unwrap();
        prop_assert!(p.is_valid());
        prop_assert_eq!(p.entries()[0], 1);
        prop_assert_eq!(*p.entries().last().unwrap(), a);
    }
}

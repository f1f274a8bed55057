mod common;

use contembed::access::{certificate, family_witness, Choice, EmbeddingPlan};
use contembed::intervals::Interval;
use contembed::permute::is_inside_zigzag;
use contembed::render::{accessibility_probe, plan_scene, planar_pattern, render_svg, verify_nesting, SvgOptions};
use contembed::{builtin, q, PLMap};
use rand::Rng;

fn tent_plan(depth: usize) -> EmbeddingPlan {
    let tent = builtin("tent").unwrap();
    certificate(&vec![tent; depth], &vec![0; depth]).unwrap().plan()
}

/// Certified plan over small random maps, or `None` when the designated
/// branches leave no common point.
fn random_plan(seed: u64) -> Option<EmbeddingPlan> {
    let mut rng = common::rng(seed);
    let depth = rng.gen_range(1..=3);
    let maps: Vec<PLMap> = (0..depth)
        .map(|_| {
            let branches = rng.gen_range(1..=3);
            if seed % 4 == 3 {
                common::tie_map(&mut rng, branches)
            } else {
                common::generic_map(&mut rng, branches)
            }
        })
        .collect();
    let branches: Vec<usize> = maps
        .iter()
        .map(|f| {
            let free: Vec<usize> = (0..f.branch_count())
                .filter(|&k| is_inside_zigzag(f, k).unwrap().is_none())
                .collect();
            free[rng.gen_range(0..free.len())]
        })
        .collect();
    let plan = certificate(&maps, &branches).ok()?.plan();
    (!plan.marks.is_empty()).then_some(plan)
}

#[test]
fn knaster_levels_nest() {
    for depth in 0..=4 {
        let scene = plan_scene(&tent_plan(depth), &[]).unwrap();
        assert_eq!(scene.levels.len(), depth + 1);
        assert!(verify_nesting(&scene), "depth {depth}");
        let widths: Vec<_> = scene.levels.iter().map(|l| l.half_width()).collect();
        assert!(widths.windows(2).all(|w| w[1] < w[0]));
        for i in 1..scene.levels.len() {
            assert_eq!(
                planar_pattern(&scene, i).as_ref(),
                scene.levels[i].pattern.as_ref(),
                "level {i}"
            );
        }
        assert!(planar_pattern(&scene, 0).is_none());
    }
}

#[test]
fn knaster_mark_is_accessible() {
    let scene = plan_scene(&tent_plan(3), &[]).unwrap();
    assert_eq!(scene.marks.len(), 1);
    assert!(accessibility_probe(&scene, &scene.marks[0].point).unwrap());
}

#[test]
fn ex67_square_certificate_scene() {
    let sq = builtin("ex67").unwrap().iterate(2).unwrap();
    let k = sq.branch_containing(&q(1, 2)).unwrap();
    assert!(is_inside_zigzag(&sq, k).unwrap().is_none());
    let plan = certificate(&[sq.clone(), sq.clone()], &[k, k]).unwrap().plan();
    let scene = plan_scene(&plan, &[]).unwrap();
    assert!(verify_nesting(&scene));
    let mark = &scene.marks[0];
    assert_eq!(sq.branch_containing(&mark.param), Some(k));
    assert!(accessibility_probe(&scene, &mark.point).unwrap());
}

#[test]
fn minc_family_scene_has_two_accessible_marks() {
    let minc = builtin("minc").unwrap();
    let w = family_witness(
        &[minc.clone(), minc],
        &[Choice::Left, Choice::Right],
        &Interval::closed(q(1, 3), q(2, 3)),
    )
    .unwrap();
    let scene = plan_scene(&w.plan, &[]).unwrap();
    assert!(verify_nesting(&scene));
    assert_eq!(scene.marks.len(), 2);
    for m in &scene.marks {
        assert!(accessibility_probe(&scene, &m.point).unwrap(), "{}", m.label);
    }
}

#[test]
fn random_plans_nest_and_keep_marks_accessible() {
    let mut checked = 0;
    for seed in 0.. {
        if checked == 12 {
            break;
        }
        let Some(plan) = random_plan(seed) else { continue };
        let scene = plan_scene(&plan, &[]).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        assert!(verify_nesting(&scene), "seed {seed}");
        let mark = &scene.marks[0];
        assert!(accessibility_probe(&scene, &mark.point).unwrap(), "seed {seed}");
        checked += 1;
    }
}

#[test]
fn knaster_svg_is_stable() {
    let scene = plan_scene(&tent_plan(3), &[]).unwrap();
    let a = render_svg(&scene, &SvgOptions::default());
    let b = render_svg(&plan_scene(&tent_plan(3), &[]).unwrap(), &SvgOptions::default());
    assert_eq!(a, b);
    assert_eq!(a.matches("class=\"band\"").count(), 4);
    assert_eq!(a.matches("class=\"mark\"").count(), 1);
    assert!(a.starts_with("<?xml"));
}

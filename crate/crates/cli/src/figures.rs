//! Reference fixtures recomputed from scratch and compared exactly.

use std::fs;
use std::path::Path;

use contembed::access::{
    certificate, family_witness, pullback_interval, right_accessible, surjective_intervals, Choice,
};
use contembed::chains::uniform_chain;
use contembed::compose::{layout, star};
use contembed::intervals::Interval;
use contembed::permute::{flatten, is_admissible, is_inside_zigzag, Mode, Permutation, Side};
use contembed::render::{accessibility_probe, plan_scene, render_svg, verify_nesting, SceneGraph, SvgOptions};
use contembed::{builtin, q, Direction, PLMap, Rational};

use crate::{Failure, Outcome};

struct Report {
    lines: Vec<String>,
    failures: usize,
    artifacts: Vec<(String, String)>,
}

impl Report {
    fn check(&mut self, name: &str, pass: bool, detail: impl std::fmt::Display) {
        if !pass {
            self.failures += 1;
        }
        let verdict = if pass { "PASS" } else { "FAIL" };
        self.lines.push(format!("{verdict} {name}: {detail}"));
    }

    fn artifact(&mut self, file: &str, text: String) {
        self.artifacts.push((file.to_string(), text));
    }
}

fn named(name: &str) -> PLMap {
    builtin(name).unwrap_or_else(|| panic!("registry lacks {name}"))
}

fn fracs(pairs: &[(i64, i64)]) -> Vec<Rational> {
    pairs.iter().map(|&(n, d)| q(n, d)).collect()
}

fn joined(v: &[Rational]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ")
}

/// The square of `name` equals the map through the listed vertices.
fn square_fixture(r: &mut Report, name: &str, breaks: &[(i64, i64)], values: &[(i64, i64)]) {
    let sq = named(name).compose(&named(name));
    let want = PLMap::from_points(fracs(breaks).into_iter().zip(fracs(values)).collect());
    let ok = want.is_ok_and(|w| w.equals(&sq) && w == sq);
    r.check(&format!("{name} squared"), ok, &sq);
}

fn iterates(r: &mut Report) {
    square_fixture(
        r,
        "ex67",
        &[(0, 1), (1, 12), (1, 4), (3, 4), (11, 12), (1, 1)],
        &[(0, 1), (3, 4), (1, 4), (3, 4), (1, 4), (1, 1)],
    );
    square_fixture(
        r,
        "nadler",
        &[
            (0, 1),
            (1, 5),
            (4, 15),
            (1, 3),
            (2, 5),
            (7, 15),
            (8, 15),
            (3, 5),
            (2, 3),
            (11, 15),
            (4, 5),
            (1, 1),
        ],
        &[
            (0, 1),
            (1, 5),
            (4, 5),
            (1, 5),
            (4, 5),
            (1, 5),
            (4, 5),
            (1, 5),
            (4, 5),
            (1, 5),
            (4, 5),
            (1, 1),
        ],
    );
    square_fixture(
        r,
        "ex68",
        &[
            (0, 1),
            (3, 16),
            (5, 16),
            (3, 8),
            (7, 16),
            (9, 16),
            (5, 8),
            (11, 16),
            (3, 4),
            (13, 16),
            (1, 1),
        ],
        &[
            (0, 1),
            (3, 4),
            (1, 4),
            (1, 2),
            (1, 4),
            (3, 4),
            (1, 2),
            (3, 4),
            (1, 2),
            (1, 4),
            (1, 1),
        ],
    );
}

fn minc(r: &mut Report) {
    let f = named("minc");
    let at_half = f.eval(&q(1, 2));
    r.check(
        "minc value at 1/2",
        at_half.as_ref().is_ok_and(|v| *v == q(1, 2)),
        format!("{at_half:?}"),
    );
    let pre = f.preimages(&Rational::zero()).unwrap_or_default();
    r.check("minc zeros", pre == fracs(&[(0, 1), (2, 3)]), joined(&pre));

    let full = Interval::closed(Rational::zero(), Rational::one());
    match surjective_intervals(&f, &full) {
        Ok(dec) => {
            let got: Vec<String> = dec.intervals.iter().map(|s| s.interval.to_string()).collect();
            r.check(
                "minc surjective intervals",
                got == ["[0,1/3]", "[1/3,2/3]", "[2/3,1]"],
                got.join(" "),
            );
        }
        Err(e) => r.check("minc surjective intervals", false, e),
    }
    let rset = right_accessible(&f, &Interval::closed(q(1, 3), q(2, 3))).to_string();
    r.check("minc right accessible set", rset == "[1/3,3/8) U [7/12,2/3]", rset);

    let tent = named("tent");
    let target = Interval::closed(q(1, 4), q(1, 2));
    let halves = [Interval::closed(q(0, 1), q(1, 2)), Interval::closed(q(1, 2), q(1, 1))];
    let got: Vec<String> = halves
        .iter()
        .map(|a| pullback_interval(&tent, a, &target).map_or_else(|e| e.to_string(), |j| j.to_string()))
        .collect();
    r.check(
        "tent pullbacks of [1/4,1/2]",
        got == ["[1/8,1/4]", "[3/4,7/8]"],
        got.join(" "),
    );
}

fn layouts(r: &mut Report) {
    let f = named("fig1");
    let flat = flatten(&f);
    let got: Vec<(Rational, Side)> = flat.connectors.iter().map(|c| (c.value.clone(), c.side)).collect();
    let want = vec![(q(1, 1), Side::Right), (q(3, 10), Side::Left), (q(1, 1), Side::Right)];
    let shown: Vec<String> = got.iter().map(|(v, s)| format!("{v}:{s:?}")).collect();
    r.check("fig1 connectors", got == want, shown.join(" "));

    let p = Permutation::new(vec![3, 0, 1, 2]).expect("bijection");
    let c = uniform_chain(4);
    let ok = is_admissible(&f, &p, Mode::Chain(&c)).unwrap_or(false);
    r.check("fig1 admissible under 4 links", ok, &p);
    match layout(&f, &p, &c) {
        Ok(g) => {
            r.check("fig1 layout audit", g.audit(), &p);
            r.artifact("fig1_layout.json", pretty(&g.to_json()));
        }
        Err(e) => r.check("fig1 layout audit", false, e),
    }
}

fn zigzags(r: &mut Report) {
    let ex67 = named("ex67");
    let w = is_inside_zigzag(&ex67, 1).ok().flatten();
    let ok = w
        .as_ref()
        .is_some_and(|w| w.a == Rational::zero() && w.e == Rational::one());
    let shown = w.map_or("NON-ZIGZAG".into(), |w| format!("ZIGZAG witness a={} e={}", w.a, w.e));
    r.check("ex67 middle branch", ok, shown);

    let fig5 = named("fig5f");
    let k = fig5.branches().position(|b| b.lo == q(3, 5) && b.hi == q(4, 5));
    let zig = k.is_some_and(|k| matches!(is_inside_zigzag(&fig5, k), Ok(Some(_))));
    r.check("fig5f branch [3/5,4/5]", zig, if zig { "ZIGZAG" } else { "NON-ZIGZAG" });

    let nadler = named("nadler");
    for n in 1..=3 {
        let f = nadler.iterate(n).expect("iterate");
        let rising: Vec<usize> = f
            .branches()
            .filter(|b| b.direction() == Direction::Up)
            .map(|b| b.index)
            .collect();
        let clean = rising.iter().all(|&k| matches!(is_inside_zigzag(&f, k), Ok(None)));
        r.check(
            &format!("nadler^{n} increasing branches"),
            clean,
            format!("{} branches NON-ZIGZAG", rising.len()),
        );
    }
}

fn composition(r: &mut Report) {
    let (f, g) = (named("fig3f"), named("fig3g"));
    let p1 = Permutation::new(vec![2, 1, 0, 3]).expect("bijection");
    let p2 = Permutation::new(vec![1, 0]).expect("bijection");
    match star(&p1, &p2, &f, &g, &uniform_chain(8), &uniform_chain(16)) {
        Ok(s) => {
            r.check(
                "composed top branch",
                s.top() == (0, 3),
                format!("{:?} {}", s.top(), s.permutation),
            );
            let pts: Vec<[String; 2]> = s
                .nerve
                .points()
                .iter()
                .map(|p| [p.x.to_string(), p.y.to_string()])
                .collect();
            let doc = serde_json::json!({
                "permutation": s.permutation.images(),
                "top": [s.top().0, s.top().1],
                "nerve": pts,
            });
            r.artifact("fig4_star.json", pretty(&doc));
        }
        Err(e) => r.check("composed top branch", false, e),
    }
}

fn scene_checks(r: &mut Report, name: &str, scene: &SceneGraph, marks: usize) {
    r.check(
        &format!("{name} nesting"),
        verify_nesting(scene),
        format!("{} levels", scene.levels.len()),
    );
    let probes: Vec<bool> = scene
        .marks
        .iter()
        .map(|m| accessibility_probe(scene, &m.point).unwrap_or(false))
        .collect();
    let ok = probes.len() == marks && probes.iter().all(|&p| p);
    r.check(&format!("{name} probe"), ok, format!("{probes:?}"));
    r.artifact(&format!("{name}.svg"), render_svg(scene, &SvgOptions::default()));
}

fn scenes(r: &mut Report) {
    let tent = named("tent");
    let knaster = certificate(&[tent.clone(), tent.clone(), tent], &[0, 0, 0])
        .map_err(|e| e.to_string())
        .and_then(|c| plan_scene(&c.plan(), &[]).map_err(|e| e.to_string()));
    match knaster {
        Ok(s) => scene_checks(r, "knaster", &s, 1),
        Err(e) => r.check("knaster nesting", false, e),
    }

    let ex67 = named("ex67");
    match certificate(&[ex67.clone(), ex67], &[2, 2]) {
        Ok(c) => {
            r.artifact("ex67_certificate.json", pretty(&c.to_json()));
            match plan_scene(&c.plan(), &[]) {
                Ok(s) => scene_checks(r, "ex67", &s, 1),
                Err(e) => r.check("ex67 nesting", false, e),
            }
        }
        Err(e) => r.check("ex67 certificate", false, e),
    }

    let minc = named("minc");
    let family = family_witness(
        &[minc.clone(), minc],
        &[Choice::Left, Choice::Right],
        &Interval::closed(q(1, 3), q(2, 3)),
    )
    .map_err(|e| e.to_string())
    .and_then(|w| plan_scene(&w.plan, &[]).map_err(|e| e.to_string()));
    match family {
        Ok(s) => scene_checks(r, "minc_family", &s, 2),
        Err(e) => r.check("minc_family nesting", false, e),
    }
}

fn pretty(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("json") + "\n"
}

pub fn run(out: Option<&Path>) -> Outcome {
    let mut r = Report {
        lines: Vec::new(),
        failures: 0,
        artifacts: Vec::new(),
    };
    iterates(&mut r);
    minc(&mut r);
    layouts(&mut r);
    zigzags(&mut r);
    composition(&mut r);
    scenes(&mut r);

    let summary = format!("{} checks, {} failed", r.lines.len(), r.failures);
    for line in &r.lines {
        println!("{line}");
    }
    println!("{summary}");

    if let Some(dir) = out {
        let write = |file: &str, text: &str| {
            fs::write(dir.join(file), text).map_err(|e| Failure::Domain(format!("cannot write {file}: {e}")))
        };
        fs::create_dir_all(dir).map_err(|e| Failure::Domain(format!("cannot create {}: {e}", dir.display())))?;
        write("report.txt", &(r.lines.join("\n") + "\n" + &summary + "\n"))?;
        for (file, text) in &r.artifacts {
            write(file, text)?;
        }
        println!("wrote {} files to {}", r.artifacts.len() + 1, dir.display());
    }
    if r.failures > 0 {
        return Err(Failure::Domain(summary));
    }
    Ok(())
}

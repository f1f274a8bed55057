//! Acceptance suite: one line per criterion, nonzero exit when any fails.

use std::collections::BTreeSet;
use std::fs;
use std::ops::RangeInclusive;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode, Output};
use std::time::{Duration, Instant};

use contembed::access::{
    certificate, family_witness, pullback_interval, right_accessible, surjective_intervals, AccessError, Choice,
    EmbeddingPlan,
};
use contembed::chains::{uniform_chain, Chain1D};
use contembed::compose::{layout, star, top_branch, ComposeError, PermutedGraph};
use contembed::intervals::Interval;
use contembed::permute::{
    enumerate_admissible, is_admissible, is_inside_zigzag, topmost_permutation, Mode, Permutation,
};
use contembed::render::{accessibility_probe, plan_scene, planar_pattern, verify_nesting, SceneGraph};
use contembed::{builtin, q, PLMap, Rational};
use rand::seq::{IteratorRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Verdict = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn named(name: &str) -> PLMap {
    builtin(name).expect("registry map")
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Surjective map with a branch count drawn from `branches`. Breakpoints
/// lie on a grid of `grid * branches` steps, values on `levels + 1` levels.
fn random_map(rng: &mut ChaCha8Rng, branches: RangeInclusive<usize>, grid: i64, levels: i64, distinct: bool) -> PLMap {
    let branches = rng.gen_range(branches);
    let den = grid * branches as i64;
    loop {
        let mut cuts: Vec<i64> = (1..den)
            .collect::<Vec<_>>()
            .choose_multiple(rng, branches - 1)
            .copied()
            .collect();
        cuts.sort();
        let mut vals = vec![rng.gen_range(0..=levels)];
        let mut up = rng.gen_bool(0.5);
        for _ in 0..branches {
            let v = *vals.last().unwrap();
            let options: Vec<i64> = if up {
                (v + 1..=levels).collect()
            } else {
                (0..v).collect()
            };
            let options: Vec<i64> = options.into_iter().filter(|o| !distinct || !vals.contains(o)).collect();
            let Some(&next) = options.choose(rng) else { break };
            vals.push(next);
            up = !up;
        }
        if vals.len() != branches + 1 {
            continue;
        }
        let (lo, hi) = (*vals.iter().min().unwrap(), *vals.iter().max().unwrap());
        let xs = std::iter::once(0).chain(cuts).chain(std::iter::once(den));
        let pts = xs.zip(&vals).map(|(x, v)| (q(x, den), q(v - lo, hi - lo))).collect();
        return PLMap::from_points(pts).expect("valid random map");
    }
}

/// Uniform chain whose mesh lies below the smallest critical value gap.
fn separating_uniform(f: &PLMap) -> Chain1D {
    let gap = f.min_value_gap().unwrap_or_else(Rational::one);
    let mut n = 2;
    while q(3, 2 * n as i64) >= gap {
        n *= 2;
    }
    uniform_chain(n)
}

fn oracle_map(seed: u64) -> PLMap {
    let mut r = rng(seed);
    let branches = 3 + (seed % 5) as usize;
    random_map(&mut r, branches..=branches, 16, 1000, !seed.is_multiple_of(4))
}

fn tops(f: &PLMap, mode: Mode<'_>) -> BTreeSet<usize> {
    enumerate_admissible(f, mode, None)
        .expect("at most 7 branches")
        .map(|p| p.top())
        .collect()
}

fn audit_layout(g: &PermutedGraph, what: &str) -> Result<(), String> {
    ensure(g.audit(), || format!("{what}: segments cross"))?;
    ensure(g.offsets_in_links(), || {
        format!("{what}: junction offset leaves its link")
    })
}

const ORACLE_MAPS: u64 = 500;

fn criterion_1() -> Verdict {
    let pts = |v: &[(i64, i64, i64, i64)]| {
        PLMap::from_points(v.iter().map(|&(a, b, c, d)| (q(a, b), q(c, d))).collect()).unwrap()
    };
    let ex67_sq = pts(&[
        (0, 1, 0, 1),
        (1, 12, 3, 4),
        (1, 4, 1, 4),
        (3, 4, 3, 4),
        (11, 12, 1, 4),
        (1, 1, 1, 1),
    ]);
    let nadler_sq = pts(&[
        (0, 1, 0, 1),
        (1, 5, 1, 5),
        (4, 15, 4, 5),
        (1, 3, 1, 5),
        (2, 5, 4, 5),
        (7, 15, 1, 5),
        (8, 15, 4, 5),
        (3, 5, 1, 5),
        (2, 3, 4, 5),
        (11, 15, 1, 5),
        (4, 5, 4, 5),
        (1, 1, 1, 1),
    ]);
    let ex68_sq = pts(&[
        (0, 1, 0, 1),
        (3, 16, 3, 4),
        (5, 16, 1, 4),
        (3, 8, 1, 2),
        (7, 16, 1, 4),
        (9, 16, 3, 4),
        (5, 8, 1, 2),
        (11, 16, 3, 4),
        (3, 4, 1, 2),
        (13, 16, 1, 4),
        (1, 1, 1, 1),
    ]);
    for (name, want) in [("ex67", &ex67_sq), ("nadler", &nadler_sq), ("ex68", &ex68_sq)] {
        let got = named(name).iterate(2).unwrap();
        ensure(got.equals(want) && &got == want, || format!("{name}^2 = {got}"))?;
    }
    Ok("ex67^2, nadler^2 and ex68^2 equal the reference maps".into())
}

fn criterion_2(bin: &Path) -> Verdict {
    let ex67 = named("ex67");
    ensure(is_inside_zigzag(&ex67, 1).unwrap().is_some(), || {
        "ex67 middle branch not zigzag".into()
    })?;
    let sq = ex67.iterate(2).unwrap();
    let k = sq
        .branch_containing(&q(1, 2))
        .ok_or("1/2 is a critical point of ex67^2")?;
    ensure(is_inside_zigzag(&sq, k).unwrap().is_none(), || {
        "ex67^2 branch at 1/2 is zigzag".into()
    })?;
    let fig5 = named("fig5f");
    let k5 = fig5
        .branches()
        .position(|b| b.lo == q(3, 5) && b.hi == q(4, 5))
        .ok_or("no branch [3/5,4/5]")?;
    ensure(is_inside_zigzag(&fig5, k5).unwrap().is_some(), || {
        "fig5f branch not zigzag".into()
    })?;
    let mut rising = 0;
    for n in 1..=3 {
        let f = named("nadler").iterate(n).unwrap();
        for b in f.branches().filter(|b| b.value_hi > b.value_lo) {
            rising += 1;
            ensure(is_inside_zigzag(&f, b.index).unwrap().is_none(), || {
                format!("nadler^{n} branch {}", b.index)
            })?;
        }
    }
    let out = run(bin, &["zigzag", "ex67", "--branch", "1"]);
    let text = String::from_utf8_lossy(&out.stdout);
    ensure(out.status.success() && text.trim() == "ZIGZAG witness a=0 e=1", || {
        format!("cli said {text:?}")
    })?;
    Ok(format!(
        "4 fixture verdicts, {rising} increasing nadler branches clean, cli agrees"
    ))
}

fn criterion_3() -> Verdict {
    let mut cases = 0;
    let mut found = 0;
    for seed in 0..ORACLE_MAPS {
        let f = oracle_map(seed);
        let c = separating_uniform(&f);
        let strict = tops(&f, Mode::Strict);
        let chained = tops(&f, Mode::Chain(&c));
        for k in 0..f.branch_count() {
            cases += 1;
            let p = topmost_permutation(&f, k).map_err(|e| format!("{f} k={k}: {e}"))?;
            let ok = p.is_some();
            ensure(ok == strict.contains(&k), || {
                format!("{f} k={k}: search {ok}, strict oracle {}", !ok)
            })?;
            ensure(ok == chained.contains(&k), || {
                format!("{f} k={k}: search {ok}, chain oracle {}", !ok)
            })?;
            if let Some(p) = p {
                found += 1;
                ensure(p.top() == k && is_admissible(&f, &p, Mode::Strict).unwrap(), || {
                    format!("{f} {p}")
                })?;
            }
        }
    }
    Ok(format!(
        "{ORACLE_MAPS} maps, {cases} branch cases, {found} topmost orders, both oracles agree"
    ))
}

fn pair_maps(seed: u64) -> (PLMap, PLMap, Permutation, Permutation) {
    let mut r = rng(1_000_000 + seed);
    let f = random_map(&mut r, 1..=4, 16, 1000, true);
    let g = random_map(&mut r, 1..=4, 16, 1000, true);
    let p1 = enumerate_admissible(&f, Mode::Strict, None)
        .unwrap()
        .choose(&mut r)
        .unwrap();
    let p2 = enumerate_admissible(&g, Mode::Strict, None)
        .unwrap()
        .choose(&mut r)
        .unwrap();
    (f, g, p1, p2)
}

const STAR_PAIRS: usize = 200;

/// Seeds of pairs whose top piece exists, with the star result.
fn star_pairs(mut visit: impl FnMut(u64, &PLMap, &PLMap, &contembed::compose::Star) -> Result<(), String>) -> Verdict {
    let mut used = 0;
    let mut skipped = 0;
    for seed in 0.. {
        if used == STAR_PAIRS {
            break;
        }
        ensure(seed < 20 * STAR_PAIRS as u64, || {
            "too few pairs with a top piece".into()
        })?;
        let (f, g, p1, p2) = pair_maps(seed);
        match top_branch(&f, &g, &p1, &p2) {
            Ok(_) => {}
            Err(ComposeError::EmptyTopBranch { .. }) => {
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e.to_string()),
        }
        let s = star(&p1, &p2, &f, &g, &separating_uniform(&f), &separating_uniform(&g))
            .map_err(|e| format!("seed {seed}: {e}"))?;
        visit(seed, &f, &g, &s)?;
        used += 1;
    }
    Ok(format!("{used} pairs ({skipped} without a top piece skipped)"))
}

fn criterion_4() -> Verdict {
    let (f, g) = (named("fig3f"), named("fig3g"));
    let p1 = Permutation::new(vec![2, 1, 0, 3]).unwrap();
    let p2 = Permutation::new(vec![1, 0]).unwrap();
    let s = star(&p1, &p2, &f, &g, &uniform_chain(8), &uniform_chain(16)).map_err(|e| e.to_string())?;
    ensure(s.top() == (0, 3), || format!("star top {:?}", s.top()))?;
    ensure(top_branch(&f, &g, &p1, &p2).ok() == Some((0, 3)), || {
        "star top-branch law".into()
    })?;
    let summary = star_pairs(|seed, f, g, s| {
        let (p1, p2) = (s.outer.permutation(), s.inner.permutation());
        let law = top_branch(f, g, p1, p2).map_err(|e| e.to_string())?;
        ensure(s.top() == law, || {
            format!("seed {seed}: top {:?}, law {law:?}", s.top())
        })?;
        ensure(s.nerve.is_simple(), || {
            format!("seed {seed}: composed drawing crosses itself")
        })
    })?;
    Ok(format!("star top H_03; {summary} match (T2,T1)"))
}

fn criterion_5() -> Verdict {
    let mut audited = 0;
    for seed in 0..ORACLE_MAPS {
        let f = oracle_map(seed);
        let c = separating_uniform(&f);
        for k in 0..f.branch_count() {
            if let Some(p) = topmost_permutation(&f, k).unwrap() {
                let g = layout(&f, &p, &c).map_err(|e| format!("{f} {p}: {e}"))?;
                audit_layout(&g, &format!("{f} {p}"))?;
                audited += 1;
            }
        }
    }
    star_pairs(|seed, _, _, s| {
        audit_layout(&s.outer, &format!("seed {seed} outer"))?;
        audit_layout(&s.inner, &format!("seed {seed} inner"))?;
        audited += 2;
        Ok(())
    })?;
    Ok(format!("{audited} layouts audited exactly"))
}

fn criterion_6() -> Verdict {
    let minc = named("minc");
    let unit = Interval::closed(q(0, 1), q(1, 1));
    let dec = surjective_intervals(&minc, &unit).map_err(|e| e.to_string())?;
    let got: Vec<String> = dec.intervals.iter().map(|s| s.interval.to_string()).collect();
    ensure(got == ["[0,1/3]", "[1/3,2/3]", "[2/3,1]"], || {
        format!("surjective intervals {got:?}")
    })?;

    // grid oracle straight from the definition, then the exact set
    let a = Interval::closed(q(1, 3), q(2, 3));
    let expected = |x: &Rational| (&q(1, 3) <= x && x < &q(3, 8)) || (&q(7, 12) <= x && x <= &q(2, 3));
    let rset = right_accessible(&minc, &a);
    for i in 0..=480 {
        let x = q(1, 3) + q(i, 1440);
        let y = minc.eval(&x).unwrap();
        let member = !minc.preimages(&y).unwrap().iter().any(|p| p > &x && p <= &a.hi);
        ensure(member == expected(&x), || {
            format!("oracle disagrees with the reference at {x}")
        })?;
        ensure(member == rset.contains(&x), || {
            format!("right accessible set wrong at {x}")
        })?;
    }
    ensure(rset.to_string() == "[1/3,3/8) U [7/12,2/3]", || format!("R = {rset}"))?;

    let tent = named("tent");
    let j = Interval::closed(q(1, 4), q(1, 2));
    let pulled: Vec<String> = [Interval::closed(q(0, 1), q(1, 2)), Interval::closed(q(1, 2), q(1, 1))]
        .iter()
        .map(|h| {
            pullback_interval(&tent, h, &j)
                .map(|i| i.to_string())
                .map_err(|e| e.to_string())
        })
        .collect::<Result<_, _>>()?;
    ensure(pulled == ["[1/8,1/4]", "[3/4,7/8]"], || format!("pullbacks {pulled:?}"))?;

    let mut pairs = 0;
    let mut r = rng(2_000_000);
    while pairs < 100 {
        let f = random_map(&mut r, 2..=4, 16, 12, false);
        let g = random_map(&mut r, 2..=4, 16, 12, false);
        let count = |h: &PLMap| surjective_intervals(h, &unit).map(|d| d.intervals.len()).unwrap_or(0);
        if count(&f) < 2 || count(&g) < 2 {
            continue;
        }
        let n = count(&f.compose(&g));
        ensure(n >= 3, || format!("{f} after {g} has {n} surjective intervals"))?;
        pairs += 1;
    }
    Ok(format!(
        "minc, tent fixtures exact; 481 grid points; {pairs} composed pairs have >= 3 surjective intervals"
    ))
}

/// Certified plan over small maps with non-zigzag designated branches.
fn random_plan(seed: u64) -> Option<EmbeddingPlan> {
    let mut r = rng(3_000_000 + seed);
    let depth = r.gen_range(1..=4);
    let maps: Vec<PLMap> = (0..depth)
        .map(|_| random_map(&mut r, 1..=3, 8, 8, !seed.is_multiple_of(3)))
        .collect();
    let branches: Vec<usize> = maps
        .iter()
        .map(|f| {
            (0..f.branch_count())
                .filter(|&k| is_inside_zigzag(f, k).unwrap().is_none())
                .choose(&mut r)
                .expect("some branch is free of zigzags")
        })
        .collect();
    let plan = certificate(&maps, &branches).ok()?.plan();
    (!plan.marks.is_empty()).then_some(plan)
}

fn random_plans(count: usize) -> impl Iterator<Item = (u64, EmbeddingPlan)> {
    (0..).filter_map(|s| random_plan(s).map(|p| (s, p))).take(count)
}

fn criterion_7(bin: &Path) -> Verdict {
    let mut depths = [0usize; 5];
    for (seed, plan) in random_plans(50) {
        let scene = plan_scene(&plan, &[]).map_err(|e| format!("plan {seed}: {e}"))?;
        for m in &scene.marks {
            let ok = accessibility_probe(&scene, &m.point).map_err(|e| format!("plan {seed}: {e}"))?;
            ensure(ok, || format!("plan {seed}: mark {} is covered", m.param))?;
        }
        depths[plan.depth()] += 1;
    }

    let ex67 = named("ex67");
    ensure(
        matches!(
            certificate(std::slice::from_ref(&ex67), &[1]),
            Err(AccessError::ZigzagObstruction { .. })
        ),
        || "ex67 middle branch certified".into(),
    )?;
    let mut obstructions = 1;
    for seed in 0..200 {
        let mut r = rng(4_000_000 + seed);
        let f = random_map(&mut r, 3..=6, 16, 1000, true);
        if let Some(k) = (0..f.branch_count()).find(|&k| is_inside_zigzag(&f, k).unwrap().is_some()) {
            let stages = [named("tent"), f.clone()];
            ensure(
                matches!(
                    certificate(&stages, &[0, k]),
                    Err(AccessError::ZigzagObstruction { .. })
                ),
                || format!("{f} branch {k} certified"),
            )?;
            obstructions += 1;
        }
    }

    let out = run(
        bin,
        &[
            "embed",
            "plan",
            "--stages",
            "tent,tent",
            "--topmost",
            "0,0",
            "--depth",
            "2",
        ],
    );
    let text = String::from_utf8_lossy(&out.stdout);
    ensure(out.status.success() && text.contains("probe PASS"), || {
        format!("cli said {text:?}")
    })?;
    Ok(format!(
        "50 plans (depth 1-4: {:?}) probe true; {obstructions} zigzag plans rejected; cli probe PASS",
        &depths[1..]
    ))
}

fn pattern_fidelity(scene: &SceneGraph, what: &str) -> Result<(), String> {
    ensure(verify_nesting(scene), || format!("{what}: nesting fails"))?;
    for i in 1..scene.levels.len() {
        let planar = planar_pattern(scene, i);
        ensure(
            planar.is_some() && planar.as_ref() == scene.levels[i].pattern.as_ref(),
            || format!("{what}: level {i} planar pattern differs"),
        )?;
    }
    Ok(())
}

fn criterion_8() -> Verdict {
    let tent = named("tent");
    let mut scenes = 0;
    for depth in 1..=5 {
        let plan = certificate(&vec![tent.clone(); depth], &vec![0; depth]).unwrap().plan();
        let scene = plan_scene(&plan, &[]).map_err(|e| e.to_string())?;
        pattern_fidelity(&scene, &format!("tent depth {depth}"))?;
        scenes += 1;
    }
    let sq = named("ex67").iterate(2).unwrap();
    let k = sq.branch_containing(&q(1, 2)).unwrap();
    let plan = certificate(&[sq.clone(), sq], &[k, k]).unwrap().plan();
    pattern_fidelity(&plan_scene(&plan, &[]).map_err(|e| e.to_string())?, "ex67^2")?;
    let minc = named("minc");
    let w = family_witness(
        &[minc.clone(), minc],
        &[Choice::Left, Choice::Right],
        &Interval::closed(q(1, 3), q(2, 3)),
    )
    .map_err(|e| e.to_string())?;
    pattern_fidelity(&plan_scene(&w.plan, &[]).map_err(|e| e.to_string())?, "minc family")?;
    scenes += 2;
    for (seed, plan) in random_plans(10) {
        pattern_fidelity(
            &plan_scene(&plan, &[]).map_err(|e| e.to_string())?,
            &format!("plan {seed}"),
        )?;
        scenes += 1;
    }
    Ok(format!(
        "{scenes} scenes up to depth 5 nest; planar patterns equal interval patterns"
    ))
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .expect("output directory")
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn criterion_9(bin: &Path) -> Verdict {
    let base = std::env::temp_dir().join(format!("contembed-acceptance-{}", std::process::id()));
    let dirs = [base.join("a"), base.join("b")];
    let mut outputs = Vec::new();
    for d in &dirs {
        let out = run(bin, &["figures", "--out", d.to_str().unwrap()]);
        ensure(out.status.success(), || {
            String::from_utf8_lossy(&out.stdout).into_owned()
        })?;
        let report = String::from_utf8_lossy(&out.stdout).replace(d.to_str().unwrap(), "OUT");
        outputs.push((report, snapshot(d)));
    }
    let _ = fs::remove_dir_all(&base);
    ensure(outputs[0] == outputs[1], || {
        "figures output differs between runs".into()
    })?;
    Ok(format!("{} files byte-identical across two runs", outputs[0].1.len()))
}

fn run(bin: &Path, args: &[&str]) -> Output {
    Command::new(bin).args(args).output().expect("run contembed")
}

type Criterion = (&'static str, Option<f64>, Box<dyn Fn() -> Verdict>);

fn main() -> ExitCode {
    let bin = PathBuf::from(env!("CARGO_BIN_EXE_contembed"));
    // time targets in seconds; `None` where only the verdict counts
    let criteria: Vec<Criterion> = vec![
        ("exact composition fixtures", Some(1.0), Box::new(criterion_1)),
        (
            "zigzag verdicts",
            Some(1.0),
            Box::new({
                let b = bin.clone();
                move || criterion_2(&b)
            }),
        ),
        ("topmost search matches brute force", Some(60.0), Box::new(criterion_3)),
        ("top-branch law", Some(30.0), Box::new(criterion_4)),
        ("layout soundness", None, Box::new(criterion_5)),
        ("surjective intervals and pullbacks", Some(10.0), Box::new(criterion_6)),
        (
            "certificate and probe agree",
            Some(60.0),
            Box::new({
                let b = bin.clone();
                move || criterion_7(&b)
            }),
        ),
        ("nesting and pattern fidelity", None, Box::new(criterion_8)),
        (
            "figures are deterministic",
            None,
            Box::new({
                let b = bin.clone();
                move || criterion_9(&b)
            }),
        ),
    ];
    let mut failed = 0;
    for (i, (name, budget, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let verdict = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = Duration::as_secs_f64(&start.elapsed());
        let verdict = match (verdict, budget) {
            (Ok(d), Some(b)) if secs > *b => Err(format!("{d}; over the {b}s target")),
            (v, _) => v,
        };
        let (tag, detail) = match verdict {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {} {tag} [{secs:.1}s] {name}: {detail}", i + 1);
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

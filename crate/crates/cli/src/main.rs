mod figures;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use contembed::access::{
    certificate, family_witness, is_p_eps, nadler_certificate, nadler_stages, pullback_interval, right_accessible,
    surjective_intervals, AccessCertificate, Choice, EmbeddingPlan,
};
use contembed::chains::{natural_refinement, separating_chain, uniform_chain, Chain1D};
use contembed::compose::{star, top_branch};
use contembed::intervals::Interval;
use contembed::permute::{
    enumerate_admissible, find_topmost, first_violation, is_inside_zigzag, topmost_permutation, Mode, Permutation,
};
use contembed::render::{accessibility_probe, plan_scene, render_svg, SceneGraph, SvgOptions};
use contembed::{resolve_map, PLMap, Rational};
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "contembed",
    version,
    about = "Exact planar embeddings of inverse limits of interval maps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse, compose, iterate and evaluate maps
    #[command(subcommand)]
    Map(MapCmd),
    /// Uniform and natural chains and their patterns
    #[command(subcommand)]
    Chain(ChainCmd),
    /// Zigzag verdict for one branch, or for every branch
    Zigzag {
        map: String,
        #[arg(long)]
        branch: Option<usize>,
        #[arg(long)]
        json: bool,
    },
    /// Admissible and topmost permutations
    #[command(subcommand)]
    Permute(PermuteCmd),
    /// Planar order of the pieces of f∘g drawn from p1 and p2
    Star {
        f: String,
        g: String,
        #[arg(long)]
        p1: String,
        #[arg(long)]
        p2: String,
        /// Uniform chain size for both value chains
        #[arg(long)]
        chain: Option<usize>,
        #[arg(long)]
        json: bool,
    },
    /// Surjective intervals, pullbacks and accessibility certificates
    #[command(subcommand)]
    Access(AccessCmd),
    /// Build, render and probe nested tube scenes
    #[command(subcommand)]
    Embed(EmbedCmd),
    /// Recompute the reference fixtures and compare them exactly
    Figures {
        /// Directory for the report and generated artifacts
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum MapCmd {
    Parse {
        map: String,
        /// Print the map in map syntax
        #[arg(long)]
        emit: bool,
        #[arg(long)]
        json: bool,
    },
    /// f∘g
    Compose {
        f: String,
        g: String,
        #[arg(long)]
        emit: bool,
        #[arg(long)]
        json: bool,
    },
    Iterate {
        map: String,
        n: usize,
        /// Print the result in map syntax
        #[arg(long)]
        emit: bool,
        #[arg(long)]
        json: bool,
    },
    Eval {
        map: String,
        x: String,
    },
    Preimages {
        map: String,
        y: String,
    },
}

#[derive(Subcommand)]
enum ChainCmd {
    Uniform {
        n: usize,
    },
    /// Natural refinement of a uniform chain along a map
    Natural {
        map: String,
        #[arg(long, default_value_t = 4)]
        chain: usize,
        /// Mesh bound; defaults to half the coarse mesh
        #[arg(long)]
        mesh: Option<String>,
    },
    /// Pattern of the natural refinement only
    Pattern {
        map: String,
        #[arg(long, default_value_t = 4)]
        chain: usize,
        #[arg(long)]
        mesh: Option<String>,
    },
}

#[derive(Subcommand)]
enum PermuteCmd {
    Topmost {
        map: String,
        #[arg(long)]
        branch: usize,
        /// Only strictly admissible orders
        #[arg(long)]
        strict: bool,
    },
    Enumerate {
        map: String,
        #[arg(long)]
        strict: bool,
        #[arg(long)]
        chain: Option<usize>,
        #[arg(long)]
        limit: Option<usize>,
    },
    Admissible {
        map: String,
        perm: String,
        #[arg(long)]
        strict: bool,
        #[arg(long)]
        chain: Option<usize>,
    },
}

#[derive(Subcommand)]
enum AccessCmd {
    /// Surjective intervals onto the image of the map, or onto --target
    Surjective {
        map: String,
        #[arg(long)]
        target: Option<String>,
    },
    /// Right accessible set of an interval
    Rset { map: String, interval: String },
    /// Points of `onto` mapped into `target`
    Pullback { map: String, onto: String, target: String },
    Certificate {
        #[arg(long)]
        stages: String,
        #[arg(long)]
        branches: String,
        #[arg(long)]
        json: bool,
    },
    Family {
        #[arg(long)]
        stages: String,
        #[arg(long)]
        choices: String,
        #[arg(long)]
        interval: String,
        #[arg(long)]
        json: bool,
    },
    Peps {
        map: String,
        #[arg(long)]
        eps: String,
    },
    Nadler {
        blocks: String,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Subcommand)]
enum EmbedCmd {
    /// Certify stages with designated topmost branches and render the scene
    Plan {
        #[arg(long)]
        stages: String,
        #[arg(long)]
        topmost: String,
        /// Number of stages; the lists repeat cyclically
        #[arg(long)]
        depth: Option<usize>,
        /// Base half-width of the schedule eps * 4^-i
        #[arg(long)]
        eps: Option<String>,
        #[arg(long)]
        chain: Option<usize>,
        /// Output file: `.json` writes the scene, anything else SVG
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the plan as JSON
        #[arg(long)]
        json: bool,
    },
    /// Render a plan file
    Render {
        plan: PathBuf,
        #[arg(long)]
        chain: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Probe the marks of a plan file
    Probe {
        plan: PathBuf,
        #[arg(long)]
        chain: Option<usize>,
    },
}

/// Usage errors exit with 1, domain errors with 2.
enum Failure {
    Usage(String),
    Domain(String),
}

impl<E: std::error::Error> From<E> for Failure {
    fn from(e: E) -> Failure {
        Failure::Domain(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn map_arg(s: &str) -> Result<PLMap, Failure> {
    resolve_map(s).map_err(|e| usage(format!("cannot read map {s:?}: {e}")))
}

fn rational_arg(s: &str) -> Result<Rational, Failure> {
    s.trim().parse().map_err(|_| usage(format!("not a rational: {s:?}")))
}

fn interval_arg(s: &str) -> Result<Interval, Failure> {
    let body = s.trim().trim_start_matches('[').trim_end_matches(']');
    let (a, b) = body
        .split_once(',')
        .ok_or_else(|| usage(format!("interval must be lo,hi: {s:?}")))?;
    let (a, b) = (rational_arg(a)?, rational_arg(b)?);
    if a > b {
        return Err(usage(format!("empty interval {s:?}")));
    }
    Ok(Interval::closed(a, b))
}

fn list_arg(s: &str) -> Vec<String> {
    s.split(',')
        .map(|t| t.trim().to_string())
        .filter(|t| !t.is_empty())
        .collect()
}

fn index_list(s: &str) -> Result<Vec<usize>, Failure> {
    list_arg(s)
        .iter()
        .map(|t| t.parse().map_err(|_| usage(format!("not an index: {t:?}"))))
        .collect()
}

fn maps_arg(s: &str) -> Result<Vec<PLMap>, Failure> {
    list_arg(s).iter().map(|t| map_arg(t)).collect()
}

fn perm_arg(s: &str) -> Result<Permutation, Failure> {
    let body = s.trim().trim_start_matches('[').trim_end_matches(']');
    body.parse().map_err(|e| usage(format!("bad permutation {s:?}: {e}")))
}

fn branch_arg(f: &PLMap, k: usize) -> Result<usize, Failure> {
    if k > f.top_index() {
        return Err(usage(format!("branch {k} out of range 0..={}", f.top_index())));
    }
    Ok(k)
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ")
}

fn print_map(f: &PLMap, emit: bool, json: bool) {
    if json {
        println!(
            "{}",
            json!({
                "map": f.to_string(),
                "vertices": f.points().collect::<Vec<_>>(),
                "breakpoints": f.breakpoints(),
                "values": f.values(),
            })
        );
    } else if emit {
        println!("{f}");
    } else {
        let vertices: Vec<String> = f.points().map(|(x, y)| format!("{x}:{y}")).collect();
        println!("vertices: {}", vertices.join(" "));
        println!("breakpoints: {}", join(f.breakpoints()));
        println!("values: {}", join(f.values()));
    }
}

fn mode<'a>(strict: bool, chain: Option<&'a Chain1D>) -> Mode<'a> {
    match (strict, chain) {
        (true, _) => Mode::Strict,
        (false, Some(c)) => Mode::Chain(c),
        (false, None) => Mode::Ties,
    }
}

fn run_map(cmd: MapCmd) -> Outcome {
    match cmd {
        MapCmd::Parse { map, emit, json } => print_map(&map_arg(&map)?, emit, json),
        MapCmd::Compose { f, g, emit, json } => print_map(&map_arg(&f)?.compose(&map_arg(&g)?), emit, json),
        MapCmd::Iterate { map, n, emit, json } => print_map(&map_arg(&map)?.iterate(n)?, emit, json),
        MapCmd::Eval { map, x } => println!("{}", map_arg(&map)?.eval(&rational_arg(&x)?)?),
        MapCmd::Preimages { map, y } => println!("{}", join(&map_arg(&map)?.preimages(&rational_arg(&y)?)?)),
    }
    Ok(())
}

fn refine(
    map: &str,
    chain: usize,
    mesh: Option<String>,
) -> Result<(Chain1D, contembed::chains::NaturalRefinement), Failure> {
    if chain == 0 {
        return Err(usage("--chain must be positive"));
    }
    let f = map_arg(map)?;
    let coarse = uniform_chain(chain);
    let bound = match mesh {
        Some(m) => rational_arg(&m)?,
        None => coarse.mesh() * Rational::half(),
    };
    let nr = natural_refinement(&f, &coarse, &bound)?;
    Ok((coarse, nr))
}

fn run_chain(cmd: ChainCmd) -> Outcome {
    match cmd {
        ChainCmd::Uniform { n } => {
            if n == 0 {
                return Err(usage("chain size must be positive"));
            }
            let c = uniform_chain(n);
            println!("{c}");
            println!("mesh: {}", c.mesh());
        }
        ChainCmd::Natural { map, chain, mesh } => {
            let (_, nr) = refine(&map, chain, mesh)?;
            println!("{}", nr.chain);
            println!("mesh: {}", nr.chain.mesh());
            println!("pattern: {}", nr.pattern);
        }
        ChainCmd::Pattern { map, chain, mesh } => {
            let (_, nr) = refine(&map, chain, mesh)?;
            println!("{}", nr.pattern);
        }
    }
    Ok(())
}

fn zigzag_line(f: &PLMap, k: usize) -> Result<(String, serde_json::Value), Failure> {
    Ok(match is_inside_zigzag(f, k)? {
        Some(w) => (
            format!("ZIGZAG witness a={} e={}", w.a, w.e),
            json!({"branch": k, "zigzag": true, "a": w.a, "e": w.e}),
        ),
        None => ("NON-ZIGZAG".to_string(), json!({"branch": k, "zigzag": false})),
    })
}

fn run_zigzag(map: &str, branch: Option<usize>, as_json: bool) -> Outcome {
    let f = map_arg(map)?;
    let ks: Vec<usize> = match branch {
        Some(k) => vec![branch_arg(&f, k)?],
        None => (0..f.branch_count()).collect(),
    };
    let mut rows = Vec::new();
    for &k in &ks {
        let (line, value) = zigzag_line(&f, k)?;
        if as_json {
            rows.push(value);
        } else if branch.is_some() {
            println!("{line}");
        } else {
            println!("branch {k}: {line}");
        }
    }
    if as_json {
        println!("{}", serde_json::Value::Array(rows));
    }
    Ok(())
}

fn run_permute(cmd: PermuteCmd) -> Outcome {
    match cmd {
        PermuteCmd::Topmost { map, branch, strict } => {
            let f = map_arg(&map)?;
            let k = branch_arg(&f, branch)?;
            let found = if strict {
                find_topmost(&f, k, true)?
            } else {
                topmost_permutation(&f, k)?
            };
            match found {
                Some(p) => println!("{p}"),
                None => {
                    let why = match is_inside_zigzag(&f, k)? {
                        Some(w) => format!("zigzag witness a={} e={}", w.a, w.e),
                        None => "no strictly admissible order".to_string(),
                    };
                    return Err(Failure::Domain(format!("branch {k} cannot be topmost: {why}")));
                }
            }
        }
        PermuteCmd::Enumerate {
            map,
            strict,
            chain,
            limit,
        } => {
            let f = map_arg(&map)?;
            let c = chain.map(uniform_chain);
            let all: Vec<Permutation> = enumerate_admissible(&f, mode(strict, c.as_ref()), limit)?.collect();
            for p in &all {
                println!("{p}");
            }
            println!("count: {}", all.len());
        }
        PermuteCmd::Admissible {
            map,
            perm,
            strict,
            chain,
        } => {
            let f = map_arg(&map)?;
            let p = perm_arg(&perm)?;
            if p.len() != f.branch_count() {
                return Err(usage(format!("{} branches but {} heights", f.branch_count(), p.len())));
            }
            let c = chain.map(uniform_chain);
            match first_violation(&f, &p, mode(strict, c.as_ref())) {
                None => println!("ADMISSIBLE"),
                Some((j, k)) => println!("NOT ADMISSIBLE: connector {j} meets branch {k}"),
            }
        }
    }
    Ok(())
}

fn run_star(f: &str, g: &str, p1: &str, p2: &str, chain: Option<usize>, as_json: bool) -> Outcome {
    let (f, g) = (map_arg(f)?, map_arg(g)?);
    let (p1, p2) = (perm_arg(p1)?, perm_arg(p2)?);
    let (c1, c2) = match chain {
        Some(n) => (uniform_chain(n), uniform_chain(n)),
        None => (separating_chain(&f), separating_chain(&g)),
    };
    let s = star(&p1, &p2, &f, &g, &c1, &c2)?;
    let law = top_branch(&f, &g, &p1, &p2);
    if as_json {
        println!(
            "{}",
            json!({
                "pieces": s.pieces,
                "permutation": s.permutation.images(),
                "top": [s.top().0, s.top().1],
                "top_branch_law": law.as_ref().ok().map(|t| [t.0, t.1]),
            })
        );
        return Ok(());
    }
    for (i, p) in s.pieces.iter().enumerate() {
        println!(
            "piece {i}: H_{}{} on [{},{}] height {}",
            p.g_branch,
            p.f_branch,
            p.lo,
            p.hi,
            s.permutation.height(i)
        );
    }
    println!("{}", s.permutation);
    let (t2, t1) = s.top();
    println!("top: H_{t2}{t1}");
    match law {
        Ok((a, b)) => println!(
            "(T2,T1) = ({a},{b}) {}",
            if (a, b) == (t2, t1) { "MATCH" } else { "MISMATCH" }
        ),
        Err(e) => println!("(T2,T1): {e}"),
    }
    Ok(())
}

fn print_certificate(c: &AccessCertificate, as_json: bool) {
    if as_json {
        println!("{}", c.to_json());
        return;
    }
    for (i, (s, w)) in c.stages.iter().zip(&c.windows).enumerate() {
        let w = w.as_ref().map_or("empty".to_string(), ToString::to_string);
        println!(
            "stage {}: {} branch {} {} window {w}",
            i + 1,
            s.map,
            s.branch,
            s.permutation
        );
    }
}

fn run_access(cmd: AccessCmd) -> Outcome {
    match cmd {
        AccessCmd::Surjective { map, target } => {
            let f = map_arg(&map)?;
            let target = match target {
                Some(t) => interval_arg(&t)?,
                None => {
                    let (lo, hi) = f.range_on(&Rational::zero(), &Rational::one());
                    Interval::closed(lo, hi)
                }
            };
            let dec = surjective_intervals(&f, &target)?;
            for (i, s) in dec.intervals.iter().enumerate() {
                println!(
                    "A_{} = {} {:?} R = {}",
                    i + 1,
                    s.interval,
                    s.direction,
                    s.right_accessible
                );
            }
        }
        AccessCmd::Rset { map, interval } => {
            println!("{}", right_accessible(&map_arg(&map)?, &interval_arg(&interval)?));
        }
        AccessCmd::Pullback { map, onto, target } => {
            let j = pullback_interval(&map_arg(&map)?, &interval_arg(&onto)?, &interval_arg(&target)?)?;
            println!("{j}");
        }
        AccessCmd::Certificate { stages, branches, json } => {
            let maps = maps_arg(&stages)?;
            let ks = index_list(&branches)?;
            print_certificate(&certificate(&maps, &ks)?, json);
        }
        AccessCmd::Family {
            stages,
            choices,
            interval,
            json,
        } => {
            let maps = maps_arg(&stages)?;
            let picks: Vec<Choice> = list_arg(&choices)
                .iter()
                .map(|c| {
                    c.parse()
                        .map_err(|_| usage(format!("choice must be LEFT or RIGHT: {c:?}")))
                })
                .collect::<Result<_, _>>()?;
            let w = family_witness(&maps, &picks, &interval_arg(&interval)?)?;
            if json {
                println!(
                    "{}",
                    json!({
                        "plan": w.plan.to_json(),
                        "intervals": w.intervals.iter().map(|i| json!([i.lo, i.hi])).collect::<Vec<_>>(),
                        "picks": w.picks,
                    })
                );
            } else {
                for (i, j) in w.intervals.iter().enumerate() {
                    println!("J^{i} = {j}");
                }
                println!("picks: {}", join(&w.picks));
                let (a, b) = w.marks();
                println!("marks: {a} {b}");
            }
        }
        AccessCmd::Peps { map, eps } => {
            let verdict = is_p_eps(&map_arg(&map)?, &rational_arg(&eps)?);
            println!("{}", if verdict { "P_EPS" } else { "NOT P_EPS" });
        }
        AccessCmd::Nadler { blocks, json } => {
            let blocks: Vec<u64> = list_arg(&blocks)
                .iter()
                .map(|t| t.parse().map_err(|_| usage(format!("not a block length: {t:?}"))))
                .collect::<Result<_, _>>()?;
            println!("exponents: {}", join(&nadler_stages(&blocks)?));
            print_certificate(&nadler_certificate(&blocks)?, json);
        }
    }
    Ok(())
}

fn chain_sizes(chain: Option<usize>) -> Vec<usize> {
    chain.into_iter().collect()
}

fn write_scene(scene: &SceneGraph, out: &Path) -> Outcome {
    let text = if out.extension().is_some_and(|e| e == "json") {
        serde_json::to_string_pretty(&scene.to_json()).expect("scene json") + "\n"
    } else {
        render_svg(scene, &SvgOptions::default())
    };
    fs::write(out, text).map_err(|e| Failure::Domain(format!("cannot write {}: {e}", out.display())))?;
    println!("wrote {}", out.display());
    Ok(())
}

fn report_scene(scene: &SceneGraph) -> Outcome {
    let widths: Vec<String> = scene.levels.iter().map(|l| l.half_width().to_string()).collect();
    println!("levels: {} half-widths: {}", scene.levels.len(), widths.join(" "));
    for m in &scene.marks {
        let ok = accessibility_probe(scene, &m.point)?;
        println!(
            "mark {} x={} at ({}, {}): probe {}",
            m.label,
            m.param,
            m.point.x,
            m.point.y,
            if ok { "PASS" } else { "FAIL" }
        );
    }
    Ok(())
}

fn read_plan(path: &Path) -> Result<EmbeddingPlan, Failure> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| usage(format!("{} is not JSON: {e}", path.display())))?;
    let value = value.get("plan").cloned().unwrap_or(value);
    Ok(EmbeddingPlan::from_json(&value)?)
}

fn run_embed(cmd: EmbedCmd) -> Outcome {
    match cmd {
        EmbedCmd::Plan {
            stages,
            topmost,
            depth,
            eps,
            chain,
            out,
            json,
        } => {
            let maps = maps_arg(&stages)?;
            let ks = index_list(&topmost)?;
            if maps.is_empty() || ks.is_empty() {
                return Err(usage("--stages and --topmost need at least one entry"));
            }
            let depth = depth.unwrap_or(maps.len().max(ks.len()));
            let maps: Vec<PLMap> = (0..depth).map(|i| maps[i % maps.len()].clone()).collect();
            let ks: Vec<usize> = (0..depth).map(|i| ks[i % ks.len()]).collect();
            for (f, &k) in maps.iter().zip(&ks) {
                branch_arg(f, k)?;
            }
            let mut plan = certificate(&maps, &ks)?.plan();
            if let Some(e) = eps {
                let e0 = rational_arg(&e)?;
                if !e0.is_positive() {
                    return Err(usage("--eps must be positive"));
                }
                let schedule: Vec<Rational> = std::iter::successors(Some(e0), |x| Some(x * Rational::new(1, 4)))
                    .take(depth + 1)
                    .collect();
                plan = plan.with_epsilons(schedule)?;
            }
            if json {
                println!("{}", plan.to_json());
            }
            let scene = plan_scene(&plan, &chain_sizes(chain))?;
            if let Some(out) = out {
                write_scene(&scene, &out)?;
            }
            report_scene(&scene)?;
        }
        EmbedCmd::Render { plan, chain, out } => {
            let scene = plan_scene(&read_plan(&plan)?, &chain_sizes(chain))?;
            match out {
                Some(out) => write_scene(&scene, &out)?,
                None => print!("{}", render_svg(&scene, &SvgOptions::default())),
            }
        }
        EmbedCmd::Probe { plan, chain } => {
            let scene = plan_scene(&read_plan(&plan)?, &chain_sizes(chain))?;
            report_scene(&scene)?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Map(c) => run_map(c),
        Command::Chain(c) => run_chain(c),
        Command::Zigzag { map, branch, json } => run_zigzag(&map, branch, json),
        Command::Permute(c) => run_permute(c),
        Command::Star {
            f,
            g,
            p1,
            p2,
            chain,
            json,
        } => run_star(&f, &g, &p1, &p2, chain, json),
        Command::Access(c) => run_access(c),
        Command::Embed(c) => run_embed(c),
        Command::Figures { out } => figures::run(out.as_deref()),
    }
}

/// A reader that closed the pipe early (`| head`) ends the run quietly.
fn quiet_on_closed_stdout() {
    let default = std::panic::take_hook();
    std::panic::set_hook(Box::new(move |info| {
        let msg = info
            .payload()
            .downcast_ref::<String>()
            .map(String::as_str)
            .or_else(|| info.payload().downcast_ref::<&str>().copied())
            .unwrap_or("");
        if msg.contains("Broken pipe") {
            std::process::exit(0);
        }
        default(info);
    }));
}

fn main() -> ExitCode {
    quiet_on_closed_stdout();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Domain(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

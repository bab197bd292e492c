//! Command-line front end: file-based validation, projection, composition,
//! and the scripted activation demonstration.
//!
//! Exit codes: 0 on success/valid, 1 on a validity failure (with a JSON
//! verdict on stdout), 2 on input or usage errors.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use procmat::json::{
    operator_from_json, operator_to_json, scenario_from_json, scenario_to_json, OperatorFile,
    ScenarioFile,
};
use procmat::{
    activation_demo, affine_comb_projector, born_probability, causal_bound_bruteforce,
    conditional_pm, embed_trivial_ends, extend_with_side_channels, linear_extensions,
    link_product, mpm_projector, ocb_game_value, process_comb_seq, validate_comb_projective,
    validate_comb_trace, validate_mpm, ActivationOptions, DualPairing, Error, GameSpec,
    LabeledOperator, Node, NodeSeq, RingElement, Scenario, Subsystem, Verdict,
};

const FIXTURES: &[(&str, &str)] = &[
    (
        "activatable",
        include_str!(concat!(env!("OUT_DIR"), "/fixtures/activatable.json")),
    ),
    (
        "activated",
        include_str!(concat!(env!("OUT_DIR"), "/fixtures/activated.json")),
    ),
    (
        "ocb",
        include_str!(concat!(env!("OUT_DIR"), "/fixtures/ocb.json")),
    ),
    (
        "activatable-scenario",
        include_str!(concat!(
            env!("OUT_DIR"),
            "/fixtures/activatable_scenario.json"
        )),
    ),
    (
        "activated-scenario",
        include_str!(concat!(env!("OUT_DIR"), "/fixtures/activated_scenario.json")),
    ),
    (
        "ocb-scenario",
        include_str!(concat!(env!("OUT_DIR"), "/fixtures/ocb_scenario.json")),
    ),
    (
        "lazy-guess",
        include_str!(concat!(env!("OUT_DIR"), "/fixtures/lazy_guess_game.json")),
    ),
];

#[derive(Parser)]
#[command(
    name = "procmat",
    version,
    about = "Validity checks and composition for quantum combs and multi-round process matrices"
)]
struct Cli {
    /// Numeric tolerance for validity checks
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol: f64,

    /// Output style
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,

    /// Seed for commands that draw randomness
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Write the bundled example files into a directory and exit
    #[arg(long, value_name = "DIR")]
    emit_fixtures: Option<PathBuf>,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Pretty,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CombMode {
    Trace,
    Projective,
    Both,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProjectorKind {
    Mpm,
    Affine,
}

#[derive(Subcommand)]
enum Command {
    /// Validate an operator as a deterministic comb
    ValidateComb {
        /// Operator file (or builtin:NAME)
        #[arg(long)]
        m: String,
        /// Scenario file; combined with --order for a fixed node ordering
        #[arg(long)]
        scenario: Option<String>,
        /// Comma-separated node names, e.g. A2,B,A1
        #[arg(long)]
        order: Option<String>,
        /// Direct teeth as in:out label pairs, e.g. X0:X1,X2:X3
        /// (composite sides join labels with +)
        #[arg(long)]
        teeth: Option<String>,
        #[arg(long, value_enum, default_value_t = CombMode::Both)]
        mode: CombMode,
    },
    /// Validate an operator as a multi-round process matrix
    ValidateMpm {
        #[arg(long)]
        w: String,
        #[arg(long)]
        scenario: String,
    },
    /// Apply a superoperator projector to an operator
    Project {
        #[arg(long)]
        m: String,
        /// Ring element in text form, e.g. "1 - A3 + A2*A3"
        #[arg(long)]
        projector: Option<String>,
        /// Derive the projector from a scenario instead
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long, value_enum, default_value_t = ProjectorKind::Mpm)]
        kind: ProjectorKind,
        /// Write the projected operator to a file
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Born-rule probability of branch operators against a process
    Born {
        #[arg(long)]
        w: String,
        /// Comma-separated operator files, one per party
        #[arg(long, value_delimiter = ',')]
        ops: Vec<String>,
    },
    /// Link product of two operators over dual pairs
    Link {
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        /// Pairs joined as left:right, comma-separated
        #[arg(long)]
        pairs: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Extend a process with identity side channels between consecutive
    /// nodes of each party
    Extend {
        #[arg(long)]
        w: String,
        #[arg(long)]
        scenario: String,
        /// One dimension (uniform), or per-party lists like "2,2;4"
        #[arg(long)]
        dl: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        out_scenario: Option<PathBuf>,
    },
    /// Condition a process on an operation at some party's first node
    Condition {
        #[arg(long)]
        w: String,
        /// CJ operator of the applied operation
        #[arg(long)]
        op: String,
        /// Comma-separated labels to trace out
        #[arg(long)]
        consumed: String,
        /// Scenario of the remaining nodes
        #[arg(long)]
        remaining: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the side-channel activation pipeline end to end
    Activation {
        /// Side-channel dimension
        #[arg(long, default_value_t = 2)]
        dl: usize,
    },
    /// Evaluate the guess game on a bipartite process and the causal bound
    Game {
        #[arg(long, default_value = "builtin:ocb")]
        w: String,
        #[arg(long, default_value = "builtin:ocb-scenario")]
        scenario: String,
        #[arg(long, default_value = "builtin:lazy-guess")]
        game: String,
    },
    /// List the linear extensions of a scenario's node order
    Extensions {
        #[arg(long)]
        scenario: String,
    },
}

fn read_input(path: &str) -> Result<String, Error> {
    if let Some(name) = path.strip_prefix("builtin:") {
        return FIXTURES
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, content)| content.to_string())
            .ok_or_else(|| {
                let names: Vec<&str> = FIXTURES.iter().map(|(n, _)| *n).collect();
                Error::Parse(format!(
                    "unknown builtin `{name}` (available: {})",
                    names.join(", ")
                ))
            });
    }
    fs::read_to_string(path).map_err(|e| Error::Parse(format!("{path}: {e}")))
}

fn read_operator(path: &str) -> Result<LabeledOperator, Error> {
    operator_from_json(&read_input(path)?)
}

fn read_scenario(path: &str) -> Result<Scenario, Error> {
    scenario_from_json(&read_input(path)?)
}

/// Round to 12 significant digits for report output.
fn sig12(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

fn rounded_verdict(mut v: Verdict) -> Verdict {
    for c in &mut v.checks {
        c.residual = sig12(c.residual);
    }
    v
}

fn print_verdict(v: &Verdict, format: Format) {
    match format {
        Format::Json => println!("{}", serde_json::to_string(v).expect("verdict serializes")),
        Format::Pretty => {
            for c in &v.checks {
                println!(
                    "{:<28} residual {:>18.11e}   {}",
                    c.name,
                    c.residual,
                    if c.pass { "pass" } else { "FAIL" }
                );
            }
            println!("verdict: {}", if v.valid { "valid" } else { "invalid" });
        }
    }
}

fn verdict_exit(v: &Verdict) -> u8 {
    if v.valid {
        0
    } else {
        1
    }
}

fn parse_labels(s: &str) -> Vec<String> {
    s.split(',')
        .map(|t| t.trim().to_string())
        .filter(|t| !t.is_empty())
        .collect()
}

/// Teeth given directly as `in:out` pairs with `+`-joined composite sides;
/// dimensions are taken from the operator's layout.
fn parse_teeth(spec: &str, m: &LabeledOperator) -> Result<NodeSeq, Error> {
    let mut nodes = Vec::new();
    for tooth in spec.split(',') {
        let (ins, outs) = tooth
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("tooth `{tooth}` is not in in:out form")))?;
        let side = |labels: &str| -> Result<Vec<Subsystem>, Error> {
            labels
                .split('+')
                .map(|l| {
                    let l = l.trim();
                    let sub = m
                        .layout()
                        .get(l)
                        .ok_or_else(|| Error::UnknownSubsystem(l.to_string()))?;
                    Ok(sub.clone())
                })
                .collect()
        };
        nodes.push(Node::new(side(ins)?, side(outs)?));
    }
    NodeSeq::new("comb", nodes)
}

fn merge_verdicts(parts: Vec<(&str, Verdict)>) -> Verdict {
    let mut merged = Verdict::new();
    for (prefix, v) in parts {
        for c in v.checks {
            merged.valid &= c.pass;
            merged.checks.push(procmat::Check {
                name: format!("{prefix}_{}", c.name),
                residual: c.residual,
                pass: c.pass,
            });
        }
    }
    merged
}

fn parse_gap_dims(spec: &str, scenario: &Scenario) -> Result<Vec<Vec<usize>>, Error> {
    let bad = |s: &str| Error::Parse(format!("bad side-channel dimension `{s}`"));
    if !spec.contains(';') && !spec.contains(',') {
        let d: usize = spec.trim().parse().map_err(|_| bad(spec))?;
        return Ok(scenario
            .parties
            .iter()
            .map(|p| vec![d; p.len().saturating_sub(1)])
            .collect());
    }
    spec.split(';')
        .map(|party| {
            party
                .split(',')
                .filter(|t| !t.trim().is_empty())
                .map(|t| t.trim().parse::<usize>().map_err(|_| bad(t)))
                .collect()
        })
        .collect()
}

fn write_or_print(content: &str, out: &Option<PathBuf>) -> Result<bool, Error> {
    match out {
        Some(path) => {
            fs::write(path, content).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
            Ok(true)
        }
        None => {
            println!("{content}");
            Ok(false)
        }
    }
}

fn run(cli: Cli) -> Result<u8, Error> {
    if let Some(dir) = &cli.emit_fixtures {
        fs::create_dir_all(dir).map_err(|e| Error::Parse(format!("{}: {e}", dir.display())))?;
        for (name, content) in FIXTURES {
            let file = match *name {
                "activatable-scenario" => "activatable_scenario.json".to_string(),
                "activated-scenario" => "activated_scenario.json".to_string(),
                "ocb-scenario" => "ocb_scenario.json".to_string(),
                "lazy-guess" => "lazy_guess_game.json".to_string(),
                other => format!("{other}.json"),
            };
            fs::write(dir.join(&file), content)
                .map_err(|e| Error::Parse(format!("{file}: {e}")))?;
        }
        if cli.command.is_none() {
            return Ok(0);
        }
    }
    let Some(command) = cli.command else {
        return Err(Error::Parse(
            "no subcommand given (try --help)".to_string(),
        ));
    };
    let tol = cli.tol;
    if tol <= 0.0 {
        return Err(Error::Parse("tolerance must be positive".to_string()));
    }
    match command {
        Command::ValidateComb {
            m,
            scenario,
            order,
            teeth,
            mode,
        } => {
            let operator = read_operator(&m)?;
            let (seq, operator) = match (&scenario, &order, &teeth) {
                (Some(sc), Some(ord), None) => {
                    let sc = read_scenario(sc)?;
                    let mut nodes = Vec::new();
                    for name in parse_labels(ord) {
                        let (p, n) = sc.find_node(&name).ok_or_else(|| {
                            Error::Parse(format!("no node named `{name}` in the scenario"))
                        })?;
                        nodes.push(sc.node(p, n).clone());
                    }
                    if nodes.len() != sc.total_nodes() {
                        return Err(Error::Parse(format!(
                            "order lists {} of {} nodes",
                            nodes.len(),
                            sc.total_nodes()
                        )));
                    }
                    let seq = process_comb_seq(&nodes, "~in", "~out")?;
                    let embedded = embed_trivial_ends(&operator, "~in", "~out")?;
                    (seq, embedded)
                }
                (None, None, Some(t)) => {
                    let seq = parse_teeth(t, &operator)?;
                    (seq, operator)
                }
                _ => {
                    return Err(Error::Parse(
                        "give either --scenario with --order, or --teeth".to_string(),
                    ))
                }
            };
            let verdict = match mode {
                CombMode::Trace => validate_comb_trace(&operator, &seq, tol)?,
                CombMode::Projective => validate_comb_projective(&operator, &seq, tol)?,
                CombMode::Both => merge_verdicts(vec![
                    ("trace", validate_comb_trace(&operator, &seq, tol)?),
                    ("projective", validate_comb_projective(&operator, &seq, tol)?),
                ]),
            };
            let verdict = rounded_verdict(verdict);
            print_verdict(&verdict, cli.format);
            Ok(verdict_exit(&verdict))
        }
        Command::ValidateMpm { w, scenario } => {
            let w = read_operator(&w)?;
            let sc = read_scenario(&scenario)?;
            let verdict = rounded_verdict(validate_mpm(&w, &sc, tol)?);
            print_verdict(&verdict, cli.format);
            Ok(verdict_exit(&verdict))
        }
        Command::Project {
            m,
            projector,
            scenario,
            kind,
            out,
        } => {
            let operator = read_operator(&m)?;
            let element: RingElement = match (projector, scenario) {
                (Some(text), None) => text.parse()?,
                (None, Some(sc)) => {
                    let sc = read_scenario(&sc)?;
                    match kind {
                        ProjectorKind::Mpm => mpm_projector(&sc),
                        ProjectorKind::Affine => affine_comb_projector(&sc),
                    }
                }
                _ => {
                    return Err(Error::Parse(
                        "give either --projector or --scenario".to_string(),
                    ))
                }
            };
            let projected = element.apply(&operator)?;
            let residual = sig12(operator.distance(&projected)?);
            if let Some(path) = &out {
                fs::write(path, operator_to_json(&projected))
                    .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
            }
            let summary = serde_json::json!({
                "projector": element.to_string(),
                "residual": residual,
                "fixed": residual <= tol,
            });
            match cli.format {
                Format::Json => println!("{summary}"),
                Format::Pretty => {
                    println!("projector: {element}");
                    println!("residual: {residual:.11e}");
                    println!("fixed: {}", residual <= tol);
                }
            }
            Ok(0)
        }
        Command::Born { w, ops } => {
            let w = read_operator(&w)?;
            let branches: Vec<LabeledOperator> = ops
                .iter()
                .map(|p| read_operator(p))
                .collect::<Result<_, _>>()?;
            let refs: Vec<&LabeledOperator> = branches.iter().collect();
            let p = sig12(born_probability(&w, &refs)?);
            match cli.format {
                Format::Json => println!("{}", serde_json::json!({ "probability": p })),
                Format::Pretty => println!("probability: {p:.11e}"),
            }
            Ok(0)
        }
        Command::Link { a, b, pairs, out } => {
            let a = read_operator(&a)?;
            let b = read_operator(&b)?;
            let mut pair_list = Vec::new();
            for pair in parse_labels(&pairs) {
                let (x, y) = pair
                    .split_once(':')
                    .ok_or_else(|| Error::Parse(format!("pair `{pair}` is not left:right")))?;
                pair_list.push((x.trim().to_string(), y.trim().to_string()));
            }
            let linked = link_product(&a, &b, &DualPairing::new(pair_list))?;
            write_or_print(&operator_to_json(&linked), &out)?;
            Ok(0)
        }
        Command::Extend {
            w,
            scenario,
            dl,
            out,
            out_scenario,
        } => {
            let w = read_operator(&w)?;
            let sc = read_scenario(&scenario)?;
            let dims = parse_gap_dims(&dl, &sc)?;
            let (extended, extended_scenario) = extend_with_side_channels(&w, &sc, &dims)?;
            match (&out, &out_scenario) {
                (None, None) => {
                    let combined = serde_json::json!({
                        "operator": OperatorFile::from_operator(&extended),
                        "scenario": ScenarioFile::from_scenario(&extended_scenario),
                    });
                    println!("{combined}");
                }
                _ => {
                    if let Some(path) = &out {
                        fs::write(path, operator_to_json(&extended))
                            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
                    }
                    if let Some(path) = &out_scenario {
                        fs::write(path, scenario_to_json(&extended_scenario))
                            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
                    }
                    println!("{}", serde_json::json!({ "ok": true }));
                }
            }
            Ok(0)
        }
        Command::Condition {
            w,
            op,
            consumed,
            remaining,
            out,
        } => {
            let w = read_operator(&w)?;
            let op = read_operator(&op)?;
            let consumed_labels = parse_labels(&consumed);
            let refs: Vec<&str> = consumed_labels.iter().map(String::as_str).collect();
            let remaining = read_scenario(&remaining)?;
            let result = conditional_pm(&w, &op, &refs, &remaining, tol)?;
            write_or_print(&operator_to_json(&result), &out)?;
            Ok(0)
        }
        Command::Activation { dl } => {
            let mut report = activation_demo(&ActivationOptions {
                side_channel_dim: dl,
                tol,
            });
            for stage in &mut report.stages {
                stage.residual = sig12(stage.residual);
            }
            report.game_value = report.game_value.map(sig12);
            report.causal_bound = report.causal_bound.map(sig12);
            match cli.format {
                Format::Json => println!(
                    "{}",
                    serde_json::to_string(&report).expect("report serializes")
                ),
                Format::Pretty => {
                    for s in &report.stages {
                        let note = s
                            .note
                            .as_ref()
                            .map(|n| format!("  ({n})"))
                            .unwrap_or_default();
                        println!(
                            "{:<28} residual {:>18.11e}   {}{note}",
                            s.name,
                            s.residual,
                            if s.pass { "pass" } else { "FAIL" }
                        );
                    }
                    if let (Some(v), Some(b)) = (report.game_value, report.causal_bound) {
                        println!("game value {v:.11e}  causal bound {b:.11e}");
                    }
                    println!("pipeline: {}", if report.ok { "ok" } else { "failed" });
                }
            }
            Ok(if report.ok { 0 } else { 1 })
        }
        Command::Game { w, scenario, game } => {
            let w = read_operator(&w)?;
            let sc = read_scenario(&scenario)?;
            if sc.parties.len() != 2 || sc.parties.iter().any(|p| p.len() != 1) {
                return Err(Error::Parse(
                    "the guess game needs two single-node parties".to_string(),
                ));
            }
            let spec: GameSpec = serde_json::from_str(&read_input(&game)?)
                .map_err(|e| Error::Parse(format!("game file: {e}")))?;
            let bound = causal_bound_bruteforce(&spec)?;
            let value = ocb_game_value(&w, &sc.parties[0].nodes[0], &sc.parties[1].nodes[0])?;
            let summary = serde_json::json!({
                "game_value": sig12(value),
                "causal_bound": sig12(bound),
                "violation": sig12(value - bound),
                "violates": value > bound,
            });
            match cli.format {
                Format::Json => println!("{summary}"),
                Format::Pretty => {
                    println!("game value:   {value:.11e}");
                    println!("causal bound: {bound:.11e}");
                    println!("violation:    {:.11e}", value - bound);
                }
            }
            Ok(0)
        }
        Command::Extensions { scenario } => {
            let sc = read_scenario(&scenario)?;
            let exts = linear_extensions(&sc)?;
            let names: Vec<String> = exts.iter().map(|e| e.describe(&sc)).collect();
            match cli.format {
                Format::Json => println!(
                    "{}",
                    serde_json::json!({ "count": names.len(), "extensions": names })
                ),
                Format::Pretty => {
                    for n in &names {
                        println!("{n}");
                    }
                    println!("count: {}", names.len());
                }
            }
            Ok(0)
        }
    }
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::PostSelectionDetected(_) | Error::InvalidProcess(_) | Error::ZeroProbability => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let format = cli.format;
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            let code = exit_code_for(&e);
            if code == 1 {
                match format {
                    Format::Json => {
                        println!("{}", serde_json::json!({ "error": e.to_string() }))
                    }
                    Format::Pretty => println!("{e}"),
                }
            } else {
                eprintln!("error: {e}");
            }
            ExitCode::from(code)
        }
    }
}

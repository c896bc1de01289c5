//! `tautring` command-line front end.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use tautring::cone_complex::{explosion_chern_identity, ConeComplex, FaceRef};
use tautring::integration::{load_correlator_cache, save_correlator_cache};
use tautring::membership::{div_membership, pairing_vector, theta_solve};
use tautring::pixton::{dr_degree, lambda_reference, lambda_top};
use tautring::rational::format_q;
use tautring::stable_graphs::enumerate_stable_graphs;
use tautring::{Error, TautClass};

const FORMAT_VERSION: u32 = 1;

#[derive(Parser)]
#[command(name = "tautring", version, about = "Exact computations in tautological rings of moduli of curves")]
struct Cli {
    /// Worker threads (default: available cores). Never changes results.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Emit machine-readable JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Enumerate the stable graphs of M̄_{g,n}.
    Graphs { g: u32, n: u32 },
    /// Double ramification cycle 2^{-d} P_g^d(A); d defaults to g.
    Dr {
        g: u32,
        /// Comma-separated weights summing to zero.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        weights: Vec<i64>,
        #[arg(long)]
        degree: Option<u32>,
    },
    /// λ_g on M̄_{g,n} via Pixton's formula.
    Lambda {
        g: u32,
        n: u32,
        /// Report whether any graph in the expansion has a separating edge.
        #[arg(long)]
        check_separating: bool,
        /// Pairing vector, compared with the published expansion when one exists.
        #[arg(long)]
        pair: bool,
    },
    /// Whether a class lies in the subalgebra generated in degrees ≤ k.
    DivMembership {
        g: u32,
        n: u32,
        d: u32,
        /// `lambda` (needs d = g), `kappa` (κ_d) or `psi:<i>` (ψ_i^d).
        #[arg(long, default_value = "lambda")]
        class: String,
        #[arg(long, default_value_t = 1)]
        max_gen_degree: u32,
        /// Allow genus ≥ 4; ranks are then only lower bounds.
        #[arg(long)]
        unverified_extended: bool,
    },
    /// Solve x·Δ₀² + y·[B] + z·[C] = 2λ₂ on M̄₂ and test x ≥ 0, z ≤ 0.
    ThetaGenus2,
    /// Cone-complex operations on a fixture name or a JSON file.
    Cone {
        complex: String,
        #[command(subcommand)]
        action: ConeAction,
    },
}

#[derive(Subcommand, Clone)]
enum ConeAction {
    /// Summary of the complex itself.
    Show,
    Barycentric,
    /// Star subdivision at the barycenter of a cone.
    Star { cone: usize },
    /// Dimension of the degree-d piecewise polynomials.
    Pp { d: u32 },
    /// Whether degree-d piecewise polynomials are products of degree-one ones.
    Gen1 { d: u32 },
    /// The explosion identity σ_k(l) = σ_k(x) on the barycentric subdivision of ℝˢ≥0.
    Explosion { s: usize, k: usize },
}

fn class_value(c: &TautClass) -> Value {
    serde_json::to_value(c.to_json()).expect("class serializes")
}

fn load_complex(source: &str) -> Result<ConeComplex, Error> {
    if ConeComplex::fixture_names().contains(&source) {
        return ConeComplex::fixture(source);
    }
    let text = std::fs::read_to_string(source).map_err(|e| Error::Parse(format!("{source}: {e}")))?;
    ConeComplex::from_json(&text)
}

fn complex_summary(c: &ConeComplex) -> Value {
    json!({
        "cones": c.num_cones(),
        "maximal_cones": c.num_maximal_cones(),
        "complex": c.to_json(),
    })
}

fn named_class(g: u32, n: u32, d: u32, name: &str) -> Result<TautClass, Error> {
    match name {
        "lambda" if d == g => lambda_top(g, n),
        "lambda" => Err(Error::DegreeMismatch(d, g)),
        "kappa" => TautClass::kappa(g, n, d),
        _ => match name.strip_prefix("psi:").and_then(|i| i.parse().ok()) {
            Some(i) => TautClass::psi(g, n, i, d),
            None => Err(Error::Parse(format!("unknown class {name:?}"))),
        },
    }
}

/// Runs a command and returns (JSON result, text rendering).
fn run(command: &Command) -> Result<(Value, String), Error> {
    Ok(match command {
        Command::Graphs { g, n } => {
            let graphs = enumerate_stable_graphs(*g, *n)?;
            let list: Vec<Value> = graphs
                .iter()
                .map(|gr| serde_json::to_value(gr.to_json()).expect("graph serializes"))
                .collect();
            let text = format!("{} stable graphs for (g, n) = ({g}, {n})", graphs.len());
            (json!({"g": g, "n": n, "count": graphs.len(), "graphs": list}), text)
        }
        Command::Dr { g, weights, degree } => {
            let d = degree.unwrap_or(*g);
            let c = dr_degree(*g, weights, d)?;
            (class_value(&c), c.to_string())
        }
        Command::Lambda {
            g,
            n,
            check_separating,
            pair,
        } => {
            let c = lambda_top(*g, *n)?;
            let mut out = json!({"class": class_value(&c)});
            let mut text = c.to_string();
            if *check_separating {
                let bad = c.terms().keys().filter(|t| t.graph().has_separating_edge()).count();
                out["separating_terms"] = json!(bad);
                out["all_edges_nonseparating"] = json!(bad == 0);
                text += &format!("\nterms with a separating edge: {bad}");
            }
            if *pair {
                let v = pairing_vector(&c)?;
                out["pairing_vector"] = json!(v.iter().map(format_q).collect::<Vec<_>>());
                let reference = lambda_reference(*g).filter(|r| r.markings() == *n);
                if let Some(r) = reference {
                    let matches = pairing_vector(&c.sub(&r)?)?.iter().all(num_traits::Zero::is_zero);
                    out["matches_reference"] = json!(matches);
                    text += &format!("\nmatches the published expansion: {matches}");
                }
                let shown: Vec<String> = v.iter().map(format_q).collect();
                text += &format!("\npairing vector: [{}]", shown.join(", "));
            }
            (out, text)
        }
        Command::DivMembership {
            g,
            n,
            d,
            class,
            max_gen_degree,
            unverified_extended,
        } => {
            let c = named_class(*g, *n, *d, class)?;
            let rep = div_membership(&c, *max_gen_degree, *unverified_extended)?;
            let text = format!(
                "rank {} of {}: member {}{}",
                rep.rank,
                rep.ambient_rank,
                rep.member,
                if rep.lower_bound { " (ranks are lower bounds)" } else { "" }
            );
            (serde_json::to_value(&rep).expect("report serializes"), text)
        }
        Command::ThetaGenus2 => {
            let rep = theta_solve()?;
            let solution = rep.solution.as_ref().map(|s| s.describe());
            let mut text = String::new();
            match &solution {
                Some(vars) => {
                    for v in vars {
                        let mut rhs = vec![v.constant.clone()];
                        rhs.extend(v.terms.iter().map(|(x, c)| format!("{c}*{x}")));
                        text += &format!("{} = {}\n", v.var, rhs.join(" + "));
                    }
                }
                None => text += "no solution\n",
            }
            text += &format!("feasible with x >= 0 and z <= 0: {}", rep.feasible_with_signs);
            (
                json!({"solution_set": solution, "feasible_with_signs": rep.feasible_with_signs}),
                text,
            )
        }
        Command::Cone { complex, action } => {
            if let ConeAction::Explosion { s, k } = action {
                let rep = explosion_chern_identity(*s, *k)?;
                let text = format!("explosion identity for s={s}, k={k}: {}", rep.holds());
                let mut v = serde_json::to_value(&rep).expect("report serializes");
                v["holds"] = json!(rep.holds());
                return Ok((v, text));
            }
            let c = load_complex(complex)?;
            match action {
                ConeAction::Show => {
                    let text = format!("{} cones, {} maximal", c.num_cones(), c.num_maximal_cones());
                    (complex_summary(&c), text)
                }
                ConeAction::Barycentric => {
                    let (b, _) = c.barycentric()?;
                    let text = format!("barycentric subdivision: {} maximal cones", b.num_maximal_cones());
                    (complex_summary(&b), text)
                }
                ConeAction::Star { cone } => {
                    let dim = c.cones().get(*cone).map(|x| x.dim()).unwrap_or(0);
                    let (s, _) = c.star_subdivision_at(&FaceRef {
                        cone: *cone,
                        rays: (0..dim).collect(),
                    })?;
                    let text = format!("star subdivision: {} maximal cones", s.num_maximal_cones());
                    (complex_summary(&s), text)
                }
                ConeAction::Pp { d } => {
                    let dim = c.pp_space(*d).dimension();
                    (json!({"degree": d, "dimension": dim}), format!("dim PP^{d} = {dim}"))
                }
                ConeAction::Gen1 { d } => {
                    let r = c.generated_by_degree_one(*d);
                    (
                        json!({"degree": d, "generated_by_degree_one": r}),
                        format!("degree {d} generated by degree one: {r}"),
                    )
                }
                ConeAction::Explosion { .. } => unreachable!("handled above"),
            }
        }
    })
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Graphs { .. } => "graphs",
        Command::Dr { .. } => "dr",
        Command::Lambda { .. } => "lambda",
        Command::DivMembership { .. } => "div-membership",
        Command::ThetaGenus2 => "theta-genus2",
        Command::Cone { .. } => "cone",
    }
}

/// Prints to stdout; a closed pipe is not an error worth a panic.
fn emit(text: &str) -> ExitCode {
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{text}").and_then(|_| out.flush()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn cache_path() -> Option<PathBuf> {
    std::env::var_os("TAUTRING_CACHE_DIR").map(|d| PathBuf::from(d).join("correlators.tsv"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let cache = cache_path();
    if let Some(p) = &cache {
        if let Err(e) = load_correlator_cache(p) {
            eprintln!("warning: ignoring correlator cache: {e}");
        }
    }
    let result = run(&cli.command);
    if let Some(p) = &cache {
        if let Some(dir) = p.parent() {
            let _ = std::fs::create_dir_all(dir);
        }
        if let Err(e) = save_correlator_cache(p) {
            eprintln!("warning: could not write correlator cache: {e}");
        }
    }
    match result {
        Ok((value, text)) => {
            if cli.json {
                let doc = json!({
                    "tautring": {"version": env!("CARGO_PKG_VERSION"), "format": FORMAT_VERSION},
                    "command": command_name(&cli.command),
                    "result": value,
                });
                emit(&serde_json::to_string_pretty(&doc).expect("json"))
            } else {
                emit(&text)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_consistency_failure() { 3 } else { 2 })
        }
    }
}

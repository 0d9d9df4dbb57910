//! Batch command-line front-end: every library operation as a
//! subcommand, with JSON output by default and `--pretty` for humans.
//!
//! Exit codes: 0 = success/true, 1 = semantic false (e.g. "not valid"),
//! 2 = usage or input error, 3 = search budget exceeded.

use std::fs;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use stablecanon::algebra::{Element, ModalAlgebra, Valuation};
use stablecanon::axiomatize::{refutation_patterns, verify_equivalence, BaseLogic, Target};
use stablecanon::error::Error;
use stablecanon::filtration::{
    gabbay_filtration, greatest_filtration, least_filtration, lemmon_filtration, Filtration,
};
use stablecanon::formula::{Formula, FormulaSet};
use stablecanon::frame::Frame;
use stablecanon::morphism::find_stable_embedding;
use stablecanon::rules::{
    refutes_formula, refutes_rule, render_formula, scr_from_algebra, scr_from_frame, CanonicalKind,
    CanonicalSpec, Rule,
};
use stablecanon::SearchBudget;

#[derive(Parser)]
#[command(name = "stablecanon")]
#[command(about = "Finite modal algebras, filtrations, and stable canonical rules/formulas")]
#[command(version)]
struct Cli {
    /// Cap on search-space size (valuations and surjections examined).
    #[arg(long, global = true)]
    budget: Option<u64>,

    /// Worker threads for the pattern enumeration (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Human-readable output instead of JSON.
    #[arg(long, global = true)]
    pretty: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct StructureInput {
    /// Path to a frame JSON file.
    #[arg(long)]
    frame: Option<String>,

    /// Path to an algebra JSON file.
    #[arg(long)]
    algebra: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a formula and print its canonical form.
    Parse { formula: String },

    /// Decide validity of a formula on a finite frame or algebra.
    Check {
        #[command(flatten)]
        input: StructureInput,
        /// Also require the structure to validate dia^{m+1} p -> dia p.
        #[arg(long)]
        m: Option<u32>,
        formula: String,
    },

    /// Compute the dual algebra of a frame, or the dual frame of an algebra.
    Dualize {
        #[command(flatten)]
        input: StructureInput,
    },

    /// Filtrate a frame model through a formula set.
    Filtrate {
        /// Path to the frame JSON file.
        #[arg(long)]
        frame: String,
        /// Valuation as inline JSON, e.g. '{"p": ["d"]}'.
        #[arg(long)]
        valuation: String,
        /// Semicolon-separated formulas generating theta.
        #[arg(long)]
        theta: String,
        /// least | greatest | lemmon | gabbay
        #[arg(long)]
        kind: String,
        /// Pre-transitivity level (required for kind gabbay).
        #[arg(long)]
        m: Option<u32>,
        /// Semicolon-separated formulas generating theta_prime
        /// (defaults to theta; rejected for kind gabbay).
        #[arg(long)]
        theta_prime: Option<String>,
    },

    /// Print the stable canonical rule of a frame or algebra with domains.
    GenRule {
        #[command(flatten)]
        input: StructureInput,
        /// Designated set (comma-separated labels); repeatable.
        #[arg(long)]
        domain: Vec<String>,
        /// Emit {"premises": [...], "conclusions": [...]} instead of text.
        #[arg(long)]
        json: bool,
    },

    /// Print the stable canonical formula of a frame or algebra.
    GenFormula {
        #[command(flatten)]
        input: StructureInput,
        /// Designated set (comma-separated labels); repeatable.
        #[arg(long)]
        domain: Vec<String>,
        /// The box<=m guard level.
        #[arg(long)]
        m: u32,
        /// Use the m-step domain clauses (the m-stable variant).
        #[arg(long)]
        plus: bool,
        /// Emit {"formula": "..."} instead of text.
        #[arg(long)]
        json: bool,
    },

    /// Search for a stable embedding of the dual of one frame into the
    /// dual of another (equivalently, a stable surjection the other way).
    Embed {
        /// Frame whose dual algebra is embedded.
        #[arg(long)]
        from: String,
        /// Frame whose dual algebra hosts the embedding.
        #[arg(long)]
        to: String,
        /// Designated point set of the source frame; repeatable.
        #[arg(long)]
        domain: Vec<String>,
        /// Closed-domain level (0 = stability only).
        #[arg(long, default_value_t = 1)]
        level: u32,
    },

    /// Decide whether a frame's dual refutes a stable canonical
    /// rule/formula given by a pattern frame and domains.
    Refute {
        /// The frame whose dual algebra is tested.
        #[arg(long)]
        frame: String,
        /// The pattern frame defining the rule/formula.
        #[arg(long)]
        pattern: String,
        /// Designated point set of the pattern frame; repeatable.
        #[arg(long)]
        domain: Vec<String>,
        /// Test the stable canonical formula at this guard level.
        #[arg(long)]
        gamma: Option<u32>,
        /// Test the m-stable canonical formula at this guard level.
        #[arg(long)]
        gamma_plus: Option<u32>,
    },

    /// Enumerate the bounded refutation pattern of a formula or rule.
    Axiomatize {
        /// Base logic: k or k4m1:M.
        #[arg(long)]
        base: String,
        /// Atom bound for the enumerated pattern algebras.
        #[arg(long)]
        bound: usize,
        /// Target rule "g1 ; g2 / d1" (alternative to the formula).
        #[arg(long)]
        rule: Option<String>,
        /// Target formula.
        formula: Option<String>,
    },

    /// Enumerate a pattern and verify its bounded equivalence.
    Verify {
        /// Base logic: k or k4m1:M.
        #[arg(long)]
        base: String,
        /// Atom bound for the enumerated pattern algebras.
        #[arg(long)]
        bound: usize,
        /// Atom bound for the verification sweep.
        #[arg(long)]
        test_bound: usize,
        /// Target rule (alternative to the formula).
        #[arg(long)]
        rule: Option<String>,
        /// Target formula.
        formula: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let budget = cli.budget.map(SearchBudget::uniform).unwrap_or_default();
    match run(&cli, &budget) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::BudgetExceeded { .. } => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn load_json(path: &str) -> Result<Value, Error> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::invalid(format!("cannot read '{path}': {e}")))?;
    serde_json::from_str(&text).map_err(|e| Error::invalid(format!("'{path}': {e}")))
}

fn load_frame(path: &str) -> Result<Frame, Error> {
    Frame::from_json(&load_json(path)?)
}

/// The algebra named by `--frame`/`--algebra`, plus the frame when the
/// input was one.
fn load_structure(input: &StructureInput) -> Result<(ModalAlgebra, Option<Frame>), Error> {
    match (&input.frame, &input.algebra) {
        (Some(path), None) => {
            let frame = load_frame(path)?;
            Ok((frame.dual_algebra(), Some(frame)))
        }
        (None, Some(path)) => Ok((ModalAlgebra::from_json(&load_json(path)?)?, None)),
        _ => Err(Error::invalid(
            "exactly one of --frame or --algebra is required",
        )),
    }
}

fn split_labels(spec: &str) -> Vec<&str> {
    spec.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect()
}

fn parse_domains(a: &ModalAlgebra, domains: &[String]) -> Result<Vec<Element>, Error> {
    domains
        .iter()
        .map(|spec| a.element_from_labels(&split_labels(spec)))
        .collect()
}

fn parse_point_domains(
    frame: &Frame,
    a: &ModalAlgebra,
    domains: &[String],
) -> Result<Vec<Element>, Error> {
    domains
        .iter()
        .map(|spec| {
            frame
                .point_set(&split_labels(spec))
                .map(|bits| a.element(bits))
        })
        .collect()
}

fn parse_target(formula: &Option<String>, rule: &Option<String>) -> Result<Target, Error> {
    match (formula, rule) {
        (Some(f), None) => Ok(Target::Formula(Formula::parse(f)?)),
        (None, Some(r)) => Ok(Target::Rule(Rule::parse(r)?)),
        _ => Err(Error::invalid(
            "exactly one of a formula argument or --rule is required",
        )),
    }
}

fn parse_theta(text: &str) -> Result<FormulaSet, Error> {
    let set: FormulaSet = text
        .split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| Formula::parse(s).map(|f| f.eliminate_box()))
        .collect::<Result<_, _>>()?;
    Ok(set.subformula_closure())
}

fn parse_valuation(a: &ModalAlgebra, text: &str) -> Result<Valuation, Error> {
    let parsed: std::collections::BTreeMap<String, Vec<String>> =
        serde_json::from_str(text).map_err(|e| Error::invalid(format!("valuation JSON: {e}")))?;
    let mut v = Valuation::new();
    for (var, labels) in parsed {
        v.set(var, a.element_from_labels(&labels)?);
    }
    Ok(v)
}

/// Write a line to stdout, exiting quietly with the conventional
/// SIGPIPE status when the downstream reader has gone away.
fn print_line(line: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    if out
        .write_all(line.as_bytes())
        .and_then(|_| out.write_all(b"\n"))
        .is_err()
    {
        std::process::exit(141);
    }
}

fn emit(pretty_text: String, value: Value, pretty: bool) {
    if pretty {
        print_line(&pretty_text);
    } else {
        print_line(&value.to_string());
    }
}

const FALSE_EXIT: u8 = 1;

fn run(cli: &Cli, budget: &SearchBudget) -> Result<ExitCode, Error> {
    match &cli.command {
        Command::Parse { formula } => {
            let parsed = Formula::parse(formula)?;
            emit(
                parsed.to_string(),
                json!({ "formula": parsed.to_string() }),
                cli.pretty,
            );
            Ok(ExitCode::SUCCESS)
        }

        Command::Check { input, m, formula } => {
            let (a, _) = load_structure(input)?;
            let parsed = Formula::parse(formula)?;
            let pretransitive = m.map(|m| a.is_pretransitive(m));
            if pretransitive == Some(false) {
                emit(
                    format!("not a k4m1:{} structure", m.unwrap()),
                    json!({
                        "valid": false,
                        "pretransitive": false,
                        "exhaustive_search_completed": true
                    }),
                    cli.pretty,
                );
                return Ok(ExitCode::from(FALSE_EXIT));
            }
            match a.find_countervaluation(&parsed, budget)? {
                None => {
                    let mut out = json!({ "valid": true, "exhaustive_search_completed": true });
                    if let Some(p) = pretransitive {
                        out["pretransitive"] = json!(p);
                    }
                    emit("valid".into(), out, cli.pretty);
                    Ok(ExitCode::SUCCESS)
                }
                Some(witness) => {
                    let counter: serde_json::Map<String, Value> = witness
                        .iter()
                        .map(|(var, &e)| (var.clone(), json!(a.element_to_labels(e))))
                        .collect();
                    let mut out = json!({ "valid": false, "countervaluation": counter });
                    if let Some(p) = pretransitive {
                        out["pretransitive"] = json!(p);
                    }
                    emit(
                        format!("not valid; countervaluation {}", out["countervaluation"]),
                        out,
                        cli.pretty,
                    );
                    Ok(ExitCode::from(FALSE_EXIT))
                }
            }
        }

        Command::Dualize { input } => {
            let out = match (&input.frame, &input.algebra) {
                (Some(path), None) => load_frame(path)?.dual_algebra().to_json(),
                (None, Some(path)) => {
                    Frame::from_algebra(&ModalAlgebra::from_json(&load_json(path)?)?).to_json()
                }
                _ => {
                    return Err(Error::invalid(
                        "exactly one of --frame or --algebra is required",
                    ))
                }
            };
            emit(serde_json::to_string_pretty(&out).unwrap(), out, cli.pretty);
            Ok(ExitCode::SUCCESS)
        }

        Command::Filtrate {
            frame,
            valuation,
            theta,
            kind,
            m,
            theta_prime,
        } => {
            let frame = load_frame(frame)?;
            let a = frame.dual_algebra();
            let v = parse_valuation(&a, valuation)?;
            let theta = parse_theta(theta)?;
            let result = match kind.as_str() {
                "gabbay" => {
                    if theta_prime.is_some() {
                        return Err(Error::invalid("kind gabbay derives theta_prime from --m"));
                    }
                    let m = m.ok_or_else(|| Error::invalid("kind gabbay requires --m"))?;
                    gabbay_filtration(&a, &v, &theta, m)?
                }
                other => {
                    let tp = match theta_prime {
                        Some(text) => parse_theta(text)?.union(&theta).subformula_closure(),
                        None => theta.clone(),
                    };
                    let build = match other {
                        "least" => least_filtration,
                        "greatest" => greatest_filtration,
                        "lemmon" => lemmon_filtration,
                        _ => {
                            return Err(Error::invalid(format!(
                                "unknown kind '{other}' (least | greatest | lemmon | gabbay)"
                            )))
                        }
                    };
                    build(&a, &v, &theta, &tp)?
                }
            };
            let out = filtration_json(&a, &result);
            emit(serde_json::to_string_pretty(&out).unwrap(), out, cli.pretty);
            Ok(ExitCode::SUCCESS)
        }

        Command::GenRule {
            input,
            domain,
            json: as_json,
        } => {
            let rule = match (&input.frame, &input.algebra) {
                (Some(path), None) => {
                    let frame = load_frame(path)?;
                    let sets = domain
                        .iter()
                        .map(|spec| frame.point_set(&split_labels(spec)))
                        .collect::<Result<Vec<_>, _>>()?;
                    scr_from_frame(&frame, &sets)
                }
                (None, Some(path)) => {
                    let a = ModalAlgebra::from_json(&load_json(path)?)?;
                    let domains = parse_domains(&a, domain)?;
                    scr_from_algebra(&a, &domains)
                }
                _ => {
                    return Err(Error::invalid(
                        "exactly one of --frame or --algebra is required",
                    ))
                }
            };
            if *as_json {
                print_line(&rule_json(&rule).to_string());
            } else {
                print_line(&rule.to_string());
            }
            Ok(ExitCode::SUCCESS)
        }

        Command::GenFormula {
            input,
            domain,
            m,
            plus,
            json: as_json,
        } => {
            let (a, frame) = load_structure(input)?;
            let domains = match &frame {
                Some(frame) => parse_point_domains(frame, &a, domain)?,
                None => parse_domains(&a, domain)?,
            };
            let kind = if *plus {
                CanonicalKind::GammaPlus(*m)
            } else {
                CanonicalKind::Gamma(*m)
            };
            let spec = CanonicalSpec::new(a, domains, kind)?;
            let formula = render_formula(&spec)?;
            if *as_json {
                print_line(&json!({ "formula": formula.to_string() }).to_string());
            } else {
                print_line(&formula.to_string());
            }
            Ok(ExitCode::SUCCESS)
        }

        Command::Embed {
            from,
            to,
            domain,
            level,
        } => {
            let from = load_frame(from)?;
            let to = load_frame(to)?;
            let a = from.dual_algebra();
            let b = to.dual_algebra();
            let domains = parse_point_domains(&from, &a, domain)?;
            match find_stable_embedding(&a, &b, &domains, *level, budget)? {
                Some(witness) => {
                    let map: serde_json::Map<String, Value> = witness
                        .atom_map
                        .iter()
                        .enumerate()
                        .map(|(x, &u)| (b.labels()[x].clone(), json!(a.labels()[u].clone())))
                        .collect();
                    let out = json!({
                        "found": true,
                        "witness": {
                            "map": map,
                            "level": level,
                            "domain": domains
                                .iter()
                                .map(|&d| a.element_to_labels(d))
                                .collect::<Vec<_>>(),
                        }
                    });
                    emit(
                        format!("stable embedding found: {}", out["witness"]["map"]),
                        out,
                        cli.pretty,
                    );
                    Ok(ExitCode::SUCCESS)
                }
                None => {
                    let out = json!({
                        "found": false,
                        "exhaustive_search_completed": true,
                    });
                    emit(
                        "no stable surjection with the closed domain condition".into(),
                        out,
                        cli.pretty,
                    );
                    Ok(ExitCode::from(FALSE_EXIT))
                }
            }
        }

        Command::Refute {
            frame,
            pattern,
            domain,
            gamma,
            gamma_plus,
        } => {
            let b = load_frame(frame)?.dual_algebra();
            let pattern_frame = load_frame(pattern)?;
            let a = pattern_frame.dual_algebra();
            let domains = parse_point_domains(&pattern_frame, &a, domain)?;
            let (kind, is_formula) = match (gamma, gamma_plus) {
                (None, None) => (CanonicalKind::Rule, false),
                (Some(m), None) => (CanonicalKind::Gamma(*m), true),
                (None, Some(m)) => (CanonicalKind::GammaPlus(*m), true),
                _ => {
                    return Err(Error::invalid(
                        "--gamma and --gamma-plus are mutually exclusive",
                    ))
                }
            };
            let spec = CanonicalSpec::new(a, domains, kind)?;
            let refutes = if is_formula {
                refutes_formula(&b, &spec, budget)?
            } else {
                refutes_rule(&b, &spec, budget)?
            };
            let out = json!({
                "refutes": refutes,
                "exhaustive_search_completed": true,
            });
            emit(
                if refutes { "refutes" } else { "validates" }.into(),
                out,
                cli.pretty,
            );
            Ok(if refutes {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(FALSE_EXIT)
            })
        }

        Command::Axiomatize {
            base,
            bound,
            rule,
            formula,
        } => {
            let base = BaseLogic::parse(base)?;
            let target = parse_target(formula, rule)?;
            let pattern = refutation_patterns(&target, base, *bound, budget, cli.threads)?;
            let entries: Vec<Value> = (0..pattern.entries.len())
                .map(|i| {
                    let entry = &pattern.entries[i];
                    let frame = Frame::from_algebra(&entry.algebra);
                    let mut value = json!({
                        "frame": frame.to_json(),
                        "domain": entry.domain
                            .iter()
                            .map(|&d| entry.algebra.element_to_labels(d))
                            .collect::<Vec<_>>(),
                    });
                    if pattern.formula_variant {
                        let spec = pattern.entry_spec(i).expect("entry is well-formed");
                        value["formula"] =
                            json!(render_formula(&spec).expect("formula kind").to_string());
                    } else {
                        value["rule"] =
                            json!(scr_from_algebra(&entry.algebra, &entry.domain).to_string());
                    }
                    value
                })
                .collect();
            let out = json!({
                "base": base.to_string(),
                "bound": bound,
                "formula_variant": pattern.formula_variant,
                "entries": entries,
            });
            emit(
                format!("{} pattern entries", pattern.entries.len()),
                out,
                cli.pretty,
            );
            Ok(ExitCode::SUCCESS)
        }

        Command::Verify {
            base,
            bound,
            test_bound,
            rule,
            formula,
        } => {
            let base = BaseLogic::parse(base)?;
            let target = parse_target(formula, rule)?;
            let pattern = refutation_patterns(&target, base, *bound, budget, cli.threads)?;
            match verify_equivalence(&target, &pattern, base, *test_bound, budget)? {
                None => {
                    let out = json!({
                        "equivalent": true,
                        "entries": pattern.entries.len(),
                        "exhaustive_search_completed": true,
                    });
                    emit("equivalent over the bounded class".into(), out, cli.pretty);
                    Ok(ExitCode::SUCCESS)
                }
                Some(d) => {
                    let out = json!({
                        "equivalent": false,
                        "witness": {
                            "frame": Frame::from_algebra(&d.algebra).to_json(),
                            "validates_target": d.validates_target,
                            "validates_pattern": d.validates_pattern,
                        }
                    });
                    emit(
                        format!("not equivalent; witness {}", out["witness"]["frame"]),
                        out,
                        cli.pretty,
                    );
                    Ok(ExitCode::from(FALSE_EXIT))
                }
            }
        }
    }
}

fn rule_json(rule: &Rule) -> Value {
    json!({
        "premises": rule.premises.iter().map(|f| f.to_string()).collect::<Vec<_>>(),
        "conclusions": rule.conclusions.iter().map(|f| f.to_string()).collect::<Vec<_>>(),
    })
}

fn filtration_json(original: &ModalAlgebra, filt: &Filtration) -> Value {
    let dual = Frame::from_algebra(&filt.algebra);
    let cells: Vec<Vec<String>> = filt
        .cells
        .cells
        .iter()
        .map(|&cell| original.element_to_labels(cell))
        .collect();
    let domain: Vec<Vec<String>> = filt
        .domain
        .iter()
        .map(|&d| filt.algebra.element_to_labels(d))
        .collect();
    let valuation: serde_json::Map<String, Value> = filt
        .valuation
        .iter()
        .map(|(var, &e)| (var.clone(), json!(filt.algebra.element_to_labels(e))))
        .collect();
    json!({
        "frame": dual.to_json(),
        "cells": cells,
        "domain": domain,
        "valuation": valuation,
    })
}

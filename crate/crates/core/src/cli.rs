//! Command-line front end shared by the `cyclesynth` binary and tests.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::acpc::{Horizon, ENUMERATION_LIMIT};
use crate::automata::{load_dra, parse_ltl, translate_fragment, Dra};
use crate::error::{Error, Result};
use crate::graph;
use crate::learning::{self, LearningConfig};
use crate::mdp::{compose, parse_model, parse_structure, CostRule, LabeledMdp};
use crate::policy::{read_policy, write_policy};
use crate::product::build_product;
use crate::report::{digest, round, Report};
use crate::scenario::{build_scenario, ScenarioConfig, CASE_STUDY_DRA, SPEC};
use crate::simulation::{FiniteMemory, RunHorizon, Simulator};
use crate::synthesis::{synthesize, SynthesisOptions};

pub const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Parser)]
#[command(name = "cyclesynth", version, about = "Cost-per-cycle controller synthesis and learning for labeled MDPs")]
pub struct Cli {
    /// Print the report as JSON.
    #[arg(long, global = true)]
    pub json: bool,
    /// Include wall-clock time in the report.
    #[arg(long, global = true)]
    pub timing: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parallel composition of component models.
    Compose(ComposeArgs),
    /// Optimal cost-per-cycle controller for a known model.
    Synthesize(SynthesizeArgs),
    /// Learn the model by simulation and synthesize on the estimate.
    Learn(LearnArgs),
    /// Run a policy on a model.
    Simulate(SimulateArgs),
    /// Model statistics, end components, cycle bound and entrance.
    Inspect(InspectArgs),
    /// Write the human-robot assembly scenario files.
    Scenario(ScenarioArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CostRuleArg {
    Sum,
    Mean,
}

#[derive(Debug, Args)]
pub struct ComposeArgs {
    /// Component model files, composed left to right.
    #[arg(long = "model", required = true, num_args = 1..)]
    pub models: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "sum")]
    pub cost_rule: CostRuleArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SpecArgs {
    /// LTL formula in the supported fragment.
    #[arg(long, conflicts_with = "dra", required_unless_present = "dra")]
    pub spec: Option<String>,
    /// DRA file.
    #[arg(long)]
    pub dra: Option<PathBuf>,
    /// Label marking cycle completion.
    #[arg(long, default_value = "pi")]
    pub pi_label: String,
}

#[derive(Debug, Args)]
pub struct SynthesizeArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub spec: SpecArgs,
    /// `inf` or a number of cycles.
    #[arg(long, default_value = "inf")]
    pub horizon: String,
    /// Report the ε-mixing cycle of the optimal policy.
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, default_value_t = ENUMERATION_LIMIT)]
    pub enumeration_limit: f64,
    #[arg(long)]
    pub policy_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LearnArgs {
    /// Structure file: states, labels and the transition support.
    #[arg(long)]
    pub structure: PathBuf,
    /// Model driving the built-in simulator.
    #[arg(long)]
    pub truth_model: PathBuf,
    #[command(flatten)]
    pub spec: SpecArgs,
    #[arg(long, default_value_t = 0.35)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    /// `auto` or a number of cycles.
    #[arg(long, default_value = "auto")]
    pub mixing_cycles: String,
    #[arg(long, default_value_t = 100_000_000)]
    pub budget: u64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long)]
    pub critical_value: Option<f64>,
    /// Multiplies the knownness threshold.
    #[arg(long, default_value_t = 1.0)]
    pub theta_scale: f64,
    /// Overrides the cost bound used in the threshold.
    #[arg(long)]
    pub rmax: Option<f64>,
    /// Overrides the state count used in the threshold.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 500)]
    pub recompute_period: u64,
    #[arg(long)]
    pub policy_out: Option<PathBuf>,
    #[arg(long)]
    pub model_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub policy: PathBuf,
    #[arg(long, conflicts_with = "cycles", required_unless_present = "cycles")]
    pub steps: Option<u64>,
    #[arg(long)]
    pub cycles: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, default_value = "pi")]
    pub pi_label: String,
    /// Tab-separated trace output.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub spec: Option<String>,
    #[arg(long, conflicts_with = "spec")]
    pub dra: Option<PathBuf>,
    #[arg(long, default_value = "pi")]
    pub pi_label: String,
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    /// TOML parameter file; defaults are used when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))
}

fn with_file<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Parse { line, msg } => Error::Parse { line, msg: format!("{}: {msg}", path.display()) },
        other => other,
    })
}

/// Loads the automaton from `--dra` or translates `--spec` over the model's propositions.
fn automaton(spec: &Option<String>, dra: &Option<PathBuf>, m: &LabeledMdp, inputs: &mut Vec<Vec<u8>>) -> Result<Option<Dra>> {
    match (spec, dra) {
        (_, Some(path)) => {
            let text = read(path)?;
            inputs.push(text.clone().into_bytes());
            Ok(Some(with_file(path, load_dra(&text))?))
        }
        (Some(f), None) => {
            inputs.push(f.clone().into_bytes());
            Ok(Some(translate_fragment(&parse_ltl(f, &m.atomic_propositions())?)?))
        }
        _ => Ok(None),
    }
}

fn parse_horizon(text: &str) -> Result<Horizon> {
    match text {
        "inf" => Ok(Horizon::Infinite),
        t => match t.parse::<usize>() {
            Ok(t) if t > 0 => Ok(Horizon::Cycles(t)),
            _ => Err(Error::Invalid(format!("horizon must be 'inf' or a positive integer, found '{t}'"))),
        },
    }
}

fn load_model(path: &Path, inputs: &mut Vec<Vec<u8>>) -> Result<LabeledMdp> {
    let text = read(path)?;
    inputs.push(text.clone().into_bytes());
    let m = with_file(path, parse_model(&text))?;
    if let Some(d) = m.validate().first() {
        return Err(Error::InvalidModel(format!("{}: {d}", path.display())));
    }
    Ok(m)
}

/// Runs one parsed command, writing the report to `out`.
pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    let started = Instant::now();
    let mut inputs: Vec<Vec<u8>> = Vec::new();
    let mut report = match &cli.command {
        Command::Compose(a) => {
            let models = a.models.iter().map(|p| load_model(p, &mut inputs)).collect::<Result<Vec<_>>>()?;
            let rule = match a.cost_rule {
                CostRuleArg::Sum => CostRule::Sum,
                CostRuleArg::Mean => CostRule::Mean,
            };
            let refs: Vec<&LabeledMdp> = models.iter().collect();
            let m = compose(&refs, rule)?;
            write(&a.out, &m.to_text())?;
            let mut r = Report::new("compose");
            r.push("components", models.len())
                .push("cost_rule", format!("{:?}", a.cost_rule).to_lowercase())
                .push("states", m.num_states())
                .push("actions", m.actions.len())
                .push("rmax", m.rmax)
                .push("output", a.out.display().to_string());
            r
        }
        Command::Synthesize(a) => {
            let m = load_model(&a.model, &mut inputs)?;
            let dra = automaton(&a.spec.spec, &a.spec.dra, &m, &mut inputs)?
                .ok_or_else(|| Error::Invalid("a specification is required".into()))?;
            let opts = SynthesisOptions {
                horizon: parse_horizon(&a.horizon)?,
                epsilon: a.epsilon,
                enumeration_limit: a.enumeration_limit,
            };
            let s = synthesize(&m, &dra, &a.spec.pi_label, &opts)?;
            if let Some(path) = &a.policy_out {
                write(path, &write_policy(&s.policy, &m))?;
            }
            let chosen = &s.reports[s.chosen];
            let mut r = Report::new("synthesize");
            r.push("horizon", a.horizon.clone())
                .push("states", m.num_states())
                .push("dra_states", dra.num_states())
                .push("product_states", s.product.num_states())
                .push("amecs", s.reports.iter().map(|c| c.size).collect::<Vec<_>>())
                .push("chosen_amec", s.chosen)
                .push("reach_probability", round(chosen.reach_probability, 9))
                .push("entrance", match &chosen.entrance {
                    Ok(x) => json!(s.product.mdp.states[*x]),
                    Err(e) => json!(format!("none ({e})")),
                })
                .push("cycle_bound", match &chosen.cycle_bound {
                    Ok(d) => json!(d),
                    Err(e) => json!(format!("none ({e})")),
                })
                .push("j", round(s.j(), 9));
            if let Some(mix) = &chosen.mixing_cycle {
                r.push("mixing_cycle", match mix {
                    Ok(t) => json!(t),
                    Err(e) => json!(format!("none ({e})")),
                });
            }
            if let Some(c) = chosen.certified {
                r.push("certified_optimal", c);
            }
            if let Some(path) = &a.policy_out {
                r.push("policy", path.display().to_string());
            }
            r
        }
        Command::Learn(a) => {
            let st = read(&a.structure)?;
            inputs.push(st.clone().into_bytes());
            let ts = with_file(&a.structure, parse_structure(&st))?;
            let truth = load_model(&a.truth_model, &mut inputs)?;
            let dra = automaton(&a.spec.spec, &a.spec.dra, &ts.uniform_mdp(), &mut inputs)?
                .ok_or_else(|| Error::Invalid("a specification is required".into()))?;
            let mixing_cycles = match a.mixing_cycles.as_str() {
                "auto" => None,
                t => Some(t.parse::<usize>().ok().filter(|&t| t > 0).ok_or_else(|| {
                    Error::Invalid(format!("--mixing-cycles must be 'auto' or a positive integer, found '{t}'"))
                })?),
            };
            let cfg = LearningConfig {
                epsilon: a.epsilon,
                delta: a.delta,
                mixing_cycles,
                critical_value: a.critical_value,
                theta_scale: a.theta_scale,
                n_override: a.n,
                rmax: a.rmax,
                budget: a.budget,
                recompute_period: a.recompute_period,
                enumeration_limit: ENUMERATION_LIMIT,
            };
            let mut sim = Simulator::new(truth.clone(), &a.spec.pi_label, a.seed);
            let rep = learning::model_learning_and_policy_finding(&mut sim, &ts, &dra, &a.spec.pi_label, &cfg)?;
            if let Some(path) = &a.policy_out {
                write(path, &write_policy(&rep.policy, &rep.model))?;
            }
            if let Some(path) = &a.model_out {
                write(path, &rep.model.to_text())?;
            }
            let c = rep.chosen();
            let (j_inf, j_t) = learning::evaluate_on_truth(&truth, &dra, &a.spec.pi_label, &rep)?;
            let mut r = Report::new("learn");
            r.push("seed", a.seed)
                .push("epsilon", a.epsilon)
                .push("delta", a.delta)
                .push("mixing_cycles", rep.t)
                .push("theta", c.theta)
                .push("cycle_bound", c.d)
                .push("amecs", rep.components.iter().map(|c| c.len()).collect::<Vec<_>>())
                .push("chosen_amec", c.index)
                .push("entrance", c.entrance.clone())
                .push("steps", rep.steps)
                .push("cycles", rep.cycles)
                .push("knownness", known_changes(&c.exploration.progress))
                .push("j_learned", round(c.j, 9))
                .push("j_true_t_cycle", round(j_t, 9));
            match j_inf {
                Ok(j) => r.push("j_true", round(j, 9)),
                Err(e) => r.push("j_true", format!("none ({e})")),
            };
            for (i, why) in &rep.skipped {
                r.push(&format!("skipped_amec_{i}"), why.clone());
            }
            r
        }
        Command::Simulate(a) => {
            let m = load_model(&a.model, &mut inputs)?;
            let pt = read(&a.policy)?;
            inputs.push(pt.clone().into_bytes());
            let policy = with_file(&a.policy, read_policy(&pt, &m))?;
            let mut sim = Simulator::new(m.clone(), &a.pi_label, a.seed);
            let horizon = match (a.steps, a.cycles) {
                (Some(n), _) => RunHorizon::Steps(n),
                (None, Some(n)) => RunHorizon::Cycles(n),
                _ => return Err(Error::Invalid("one of --steps or --cycles is required".into())),
            };
            let mut ctrl = FiniteMemory::new(&policy);
            let run = sim.run_policy(&mut ctrl, horizon, a.trace.is_some())?;
            if let Some(path) = &a.trace {
                write(path, &sim.trace_tsv(&run.trajectory))?;
            }
            let mut r = Report::new("simulate");
            r.push("seed", a.seed).push("steps", run.steps).push("cycles", run.cycles).push("total_cost", round(run.total_cost, 9));
            match run.acpc() {
                Some(j) => r.push("empirical_acpc", round(j, 9)),
                None => r.push("empirical_acpc", "none (no cycle completed)"),
            };
            r
        }
        Command::Inspect(a) => {
            let m = load_model(&a.model, &mut inputs)?;
            let mut r = Report::new("inspect");
            r.push("states", m.num_states())
                .push("actions", m.actions.len())
                .push("transitions", m.choices.iter().flatten().map(|c| c.successors.len()).sum::<usize>())
                .push("propositions", m.atomic_propositions().into_iter().collect::<Vec<_>>())
                .push("rmax", m.rmax);
            if let Some(dra) = automaton(&a.spec, &a.dra, &m, &mut inputs)? {
                let p = build_product(&m, &dra, &a.pi_label)?;
                let cs = graph::accepting_mecs(&p);
                let sizes: Vec<String> = cs.iter().map(|c| c.len().to_string()).collect();
                r.push("dra_states", dra.num_states())
                    .push("product_states", p.num_states())
                    .push("product_full", p.full_size())
                    .push("AMECs", format!("{} ({} states)", cs.len(), sizes.join(", ")));
                for (i, c) in cs.iter().enumerate() {
                    let names: Vec<&str> = c.states.iter().map(|&x| p.mdp.states[x].as_str()).collect();
                    r.push(&format!("amec_{i}_states"), names);
                    r.push(&format!("amec_{i}_contains_initial"), c.contains(p.mdp.initial));
                    r.push(&format!("amec_{i}_cycle_bound"), match graph::compute_cycle_bound(&p.mdp, c, &p.markers) {
                        Ok(d) => json!(d),
                        Err(e) => json!(format!("none ({e})")),
                    });
                    r.push(&format!("amec_{i}_entrance"), match graph::entrance(&p, c) {
                        Ok(x) => json!(p.mdp.states[x]),
                        Err(e) => json!(format!("none ({e})")),
                    });
                }
            }
            r
        }
        Command::Scenario(a) => {
            let cfg = match &a.config {
                Some(path) => {
                    let text = read(path)?;
                    inputs.push(text.clone().into_bytes());
                    ScenarioConfig::from_toml(&text)?
                }
                None => ScenarioConfig::default(),
            };
            if a.config.is_none() {
                inputs.push(cfg.to_toml().into_bytes());
            }
            let sc = build_scenario(&cfg)?;
            fs::create_dir_all(&a.out_dir).map_err(|e| Error::Invalid(format!("{}: {e}", a.out_dir.display())))?;
            let mut files = Vec::new();
            for (name, m) in sc.components() {
                files.push((format!("{name}.mdp"), m.to_text()));
            }
            let composed = sc.composed()?;
            files.push(("composed.mdp".into(), composed.to_text()));
            files.push(("composed.ts".into(), composed.structure().to_text()));
            files.push(("spec.ltl".into(), format!("{SPEC}\n")));
            files.push(("case_study.dra".into(), CASE_STUDY_DRA.to_string()));
            files.push(("scenario.toml".into(), cfg.to_toml()));
            for (name, text) in &files {
                write(&a.out_dir.join(name), text)?;
            }
            let mut r = Report::new("scenario");
            r.push("composed_states", composed.num_states())
                .push("spec", SPEC)
                .push("files", files.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>())
                .push("out_dir", a.out_dir.display().to_string());
            r
        }
    };
    let refs: Vec<&[u8]> = inputs.iter().map(|v| v.as_slice()).collect();
    report.push("inputs_digest", digest(refs));
    if cli.timing {
        report.push("wall_time_s", started.elapsed().as_secs_f64());
    }
    let text = if cli.json { report.to_json() } else { report.to_text() };
    out.write_all(text.as_bytes()).map_err(|e| Error::Invalid(format!("writing report: {e}")))?;
    Ok(())
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the exit status: 0 on success, 1 on domain errors, 2 on usage errors.
/// `[steps, known]` pairs at which the number of known states changed.
fn known_changes(progress: &[(u64, usize)]) -> Vec<Value> {
    let mut out = Vec::new();
    let mut last = None;
    for &(steps, known) in progress {
        if last != Some(known) {
            out.push(json!([steps, known]));
            last = Some(known);
        }
    }
    out
}

pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = out.write_all(rendered.as_bytes());
            } else {
                let _ = err.write_all(rendered.as_bytes());
            }
            return code;
        }
    };
    match execute(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

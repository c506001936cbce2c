use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};

use vset_core::dictionary::DictionaryError;
use vset_core::harness::{self, ExperimentReport, ExperimentSpec, HarnessError, ReportFormat};
use vset_core::reasoning::{self, FactBase, FactSpec, Recipe, ReasoningError, RelationVector};
use vset_core::recovery::RecoveryError;
use vset_core::sets::{self, CombineMode, SetError};
use vset_core::simplex::{self, ClassDefinition, SimplexError};
use vset_core::{decompose, Atoms, ClassSimplex, Dictionary, ErrorClass, Interpretation, LassoConfig, SummedVector, WeightMap};

#[derive(Parser)]
#[command(name = "vset", version, about = "Encode weighted sets as summed word vectors and decode them exactly")]
struct Cli {
    /// LASSO path settings as JSON; unspecified fields keep their defaults.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Write the result here instead of standard output.
    #[arg(long, short, global = true, value_name = "FILE")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate, load, inspect and cache dictionaries.
    #[command(subcommand)]
    Dict(DictCmd),
    /// Encode a weight map as a summed vector.
    Encode {
        #[command(flatten)]
        dict: DictArg,
        /// Weight map JSON.
        map: PathBuf,
        /// Scale the result to unit norm (the scale is recorded).
        #[arg(long)]
        normalize: bool,
        /// Refuse maps with more entries than this.
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Decompose a summed vector into dictionary entries.
    Decode {
        #[command(flatten)]
        dict: DictArg,
        /// Summed vector JSON.
        vector: PathBuf,
        /// Coerce the weights to this interpretation.
        #[arg(long, short)]
        interpretation: Option<Interpretation>,
    },
    /// Combine weight maps, negate a set, or list the top set.
    Setop {
        /// union, intersect, minus, fuzzy_union, fuzzy_intersect, prob_or,
        /// prob_and, negate or top.
        op: String,
        /// Weight map JSON files.
        maps: Vec<PathBuf>,
        /// Dictionary (needed by negate and top).
        #[arg(long)]
        dict: Option<PathBuf>,
    },
    /// Tag up to three sets with distinct weights and recover the regions.
    #[command(subcommand)]
    Venn(VennCmd),
    /// Encode a token sequence by position and recover it.
    #[command(subcommand)]
    Order(OrderCmd),
    /// Class simplices: projection, membership and leave-one-out.
    #[command(subcommand)]
    Simplex(SimplexCmd),
    /// Chain decomposition, analogies and defined terms.
    #[command(subcommand)]
    Reason(ReasonCmd),
    /// Recovery experiments.
    #[command(subcommand)]
    Experiment(ExperimentCmd),
    /// Re-render a saved experiment report.
    #[command(subcommand)]
    Report(ReportCmd),
}

#[derive(Args)]
struct DictArg {
    /// Dictionary file: word2vec text or binary cache.
    #[arg(long)]
    dict: PathBuf,
}

impl DictArg {
    fn load(&self) -> Result<Dictionary> {
        Ok(Dictionary::load_any(&self.dict)?)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum DictFormat {
    Cache,
    Text,
}

#[derive(Subcommand)]
enum DictCmd {
    /// Generate a synthetic Gaussian dictionary.
    Gen {
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "cache")]
        format: DictFormat,
    },
    /// Load and validate a dictionary; with --out, also cache it.
    Load { path: PathBuf },
    /// Summary of a dictionary.
    Info { path: PathBuf },
    /// Convert a dictionary to the binary cache format.
    Cache { input: PathBuf, output: PathBuf },
}

#[derive(Subcommand)]
enum VennCmd {
    Encode {
        #[command(flatten)]
        dict: DictArg,
        /// Comma-separated positive tags, one per set.
        #[arg(long, value_delimiter = ',', default_value = "1,2,4")]
        tags: Vec<f64>,
        /// Crisp set JSON files.
        sets: Vec<PathBuf>,
    },
    Decode {
        #[command(flatten)]
        dict: DictArg,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4")]
        tags: Vec<f64>,
        vector: PathBuf,
    },
}

#[derive(Subcommand)]
enum OrderCmd {
    Encode {
        #[command(flatten)]
        dict: DictArg,
        /// Distinct tokens in order.
        tokens: Vec<String>,
    },
    Decode {
        #[command(flatten)]
        dict: DictArg,
        vector: PathBuf,
    },
}

#[derive(Args)]
struct PointArgs {
    #[command(flatten)]
    dict: DictArg,
    /// Class definition JSON ({"label", "members"}).
    #[arg(long)]
    class: PathBuf,
    /// A dictionary token as the point.
    #[arg(long, conflicts_with = "vector", required_unless_present = "vector")]
    token: Option<String>,
    /// A summed vector JSON file as the point.
    #[arg(long)]
    vector: Option<PathBuf>,
}

#[derive(Subcommand)]
enum SimplexCmd {
    /// Nearest point of the class simplex.
    Project(PointArgs),
    /// Distances to the simplex and to the centroid.
    Score(PointArgs),
    /// Leave-one-out distances for every member of every class (CSV).
    Loo {
        #[command(flatten)]
        dict: DictArg,
        /// Class definition JSON (one object or an array).
        #[arg(long)]
        class: PathBuf,
    },
}

#[derive(Subcommand)]
enum ReasonCmd {
    /// Decompose premise -> conclusion over a fact base.
    Chain {
        #[command(flatten)]
        dict: DictArg,
        /// Fact base JSON: [{"id", "premise", "conclusion"}].
        #[arg(long)]
        facts: PathBuf,
        /// Comma-separated premise tokens.
        #[arg(long, value_delimiter = ',', required = true)]
        premise: Vec<String>,
        /// Comma-separated conclusion tokens.
        #[arg(long, value_delimiter = ',', required = true)]
        conclusion: Vec<String>,
    },
    /// Rank tokens for base - minus + plus.
    Analogy {
        #[command(flatten)]
        dict: DictArg,
        #[arg(long)]
        base: String,
        #[arg(long)]
        minus: String,
        #[arg(long)]
        plus: String,
        #[arg(short, default_value_t = 5)]
        k: usize,
        /// Residual fraction above which ranking falls back to cosine.
        #[arg(long, default_value_t = reasoning::ANALOGY_FALLBACK_RATIO)]
        fallback_ratio: f64,
    },
    /// Append a term built from a recipe and write the new dictionary.
    Define {
        #[command(flatten)]
        dict: DictArg,
        #[arg(long)]
        name: String,
        /// Recipe JSON.
        #[arg(long)]
        recipe: PathBuf,
        /// Relations JSON: [{"name", "pairs": [[from, to], ...]}].
        #[arg(long)]
        relations: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ExperimentCmd {
    /// Run an experiment spec and write its reports into a directory.
    Run {
        spec: PathBuf,
        /// Output directory.
        #[arg(long, default_value = "report")]
        dir: PathBuf,
        /// Comma-separated report formats.
        #[arg(long, value_delimiter = ',', default_value = "csv,svg,json")]
        formats: Vec<String>,
        /// Suppress per-cell progress on standard error.
        #[arg(long, short)]
        quiet: bool,
    },
}

#[derive(Subcommand)]
enum ReportCmd {
    /// Render a report.json as csv, svg or json into a directory.
    Render {
        report: PathBuf,
        #[arg(long, default_value = "report")]
        dir: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "csv,svg")]
        formats: Vec<String>,
    },
}

/// Misuse of the command line that clap cannot catch.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

#[derive(Deserialize)]
struct RelationSpec {
    name: String,
    pairs: Vec<(String, String)>,
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn read_map(path: &Path) -> Result<WeightMap> {
    let m: WeightMap = read_json(path)?;
    m.validate()?;
    Ok(m)
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    let text = text.trim_end_matches('\n');
    match out {
        Some(p) => fs::write(p, format!("{text}\n")).with_context(|| format!("writing {}", p.display())),
        None => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            match writeln!(stdout, "{text}") {
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
                r => Ok(r?),
            }
        }
    }
}

fn emit_json(out: &Option<PathBuf>, v: &Value) -> Result<()> {
    emit(out, &serde_json::to_string_pretty(v)?)
}

fn formats(list: &[String]) -> Result<Vec<ReportFormat>> {
    list.iter()
        .map(|f| f.parse::<ReportFormat>().map_err(usage))
        .collect()
}

fn dict_info(d: &Dictionary) -> Value {
    json!({
        "dim": d.dim(),
        "size": d.len(),
        "meta": d.meta(),
        "first_tokens": d.tokens().iter().take(5).collect::<Vec<_>>(),
    })
}

fn point(args: &PointArgs, d: &Dictionary) -> Result<Vec<f64>> {
    match (&args.token, &args.vector) {
        (Some(t), _) => Ok(d.vector(t)?.to_vec()),
        (None, Some(p)) => Ok(read_json::<SummedVector>(p)?.denormalized()),
        (None, None) => Err(usage("give --token or --vector")),
    }
}

fn class_simplex(args: &PointArgs, d: &Dictionary) -> Result<ClassSimplex> {
    let defs = ClassDefinition::load(&args.class)?;
    if defs.len() != 1 {
        return Err(usage(format!("expected one class definition, found {}", defs.len())));
    }
    Ok(ClassSimplex::from_definition(d, &defs[0])?)
}

fn run(cli: Cli) -> Result<()> {
    let cfg: LassoConfig = match &cli.config {
        Some(p) => {
            let c: LassoConfig = read_json(p)?;
            c.validate()?;
            c
        }
        None => LassoConfig::default(),
    };
    let out = &cli.out;
    match cli.command {
        Command::Dict(cmd) => match cmd {
            DictCmd::Gen { dim, size, seed, format } => {
                let Some(path) = out else {
                    return Err(usage("dict gen needs --out"));
                };
                let d = Dictionary::generate_synthetic(dim, size, seed)?;
                match format {
                    DictFormat::Cache => d.save_cache(path)?,
                    DictFormat::Text => write_word2vec(&d, path)?,
                }
                eprintln!("wrote {} entries of dimension {} to {}", size, dim, path.display());
            }
            DictCmd::Load { path } => {
                let d = Dictionary::load_any(&path)?;
                if let Some(o) = out {
                    d.save_cache(o)?;
                }
                emit_json(&None, &dict_info(&d))?;
            }
            DictCmd::Info { path } => emit_json(out, &dict_info(&Dictionary::load_any(&path)?))?,
            DictCmd::Cache { input, output } => {
                let d = Dictionary::load_any(&input)?;
                d.save_cache(&output)?;
                eprintln!("cached {} entries to {}", d.len(), output.display());
            }
        },
        Command::Encode { dict, map, normalize, limit } => {
            let d = dict.load()?;
            let m = read_map(&map)?;
            let y = match limit {
                Some(l) => sets::encode_checked(&d, &m, normalize, l)?,
                None => sets::encode(&d, &m, normalize)?,
            };
            emit_json(out, &serde_json::to_value(&y)?)?;
        }
        Command::Decode { dict, vector, interpretation } => {
            let d = dict.load()?;
            let y: SummedVector = read_json(&vector)?;
            match interpretation {
                Some(i) => emit_json(out, &serde_json::to_value(sets::decode(&d, &y, i, &cfg)?)?)?,
                None => emit_json(out, &decompose(&d, &y, &cfg)?.to_json())?,
            }
        }
        Command::Setop { op, maps, dict } => {
            let load_dict = || -> Result<Dictionary> {
                let Some(p) = &dict else {
                    return Err(usage(format!("{op} needs --dict")));
                };
                Ok(Dictionary::load_any(p)?)
            };
            let result = match op.as_str() {
                "negate" => {
                    let [m] = maps.as_slice() else {
                        return Err(usage("negate takes exactly one map"));
                    };
                    sets::negate(&load_dict()?, &read_map(m)?)?
                }
                "top" => sets::top_set(&load_dict()?),
                mode => {
                    let mode: CombineMode = mode.parse().map_err(usage)?;
                    let ms = maps.iter().map(|p| read_map(p)).collect::<Result<Vec<_>>>()?;
                    sets::combine(mode, &ms)?
                }
            };
            emit_json(out, &result.to_json())?;
        }
        Command::Venn(cmd) => match cmd {
            VennCmd::Encode { dict, tags, sets: files } => {
                let d = dict.load()?;
                let ms = files.iter().map(|p| read_map(p)).collect::<Result<Vec<_>>>()?;
                emit_json(out, &serde_json::to_value(sets::venn_encode(&d, &ms, &tags)?)?)?;
            }
            VennCmd::Decode { dict, tags, vector } => {
                let d = dict.load()?;
                let y: SummedVector = read_json(&vector)?;
                emit_json(out, &serde_json::to_value(sets::venn_decode(&d, &y, &tags, &cfg)?)?)?;
            }
        },
        Command::Order(cmd) => match cmd {
            OrderCmd::Encode { dict, tokens } => {
                let d = dict.load()?;
                emit_json(out, &serde_json::to_value(sets::order_encode(&d, &tokens)?)?)?;
            }
            OrderCmd::Decode { dict, vector } => {
                let d = dict.load()?;
                let y: SummedVector = read_json(&vector)?;
                emit_json(out, &json!(sets::order_decode(&d, &y, &cfg)?))?;
            }
        },
        Command::Simplex(cmd) => match cmd {
            SimplexCmd::Project(args) => {
                let d = args.dict.load()?;
                let s = class_simplex(&args, &d)?;
                let p = s.project(&point(&args, &d)?)?;
                let mut v = serde_json::to_value(&p)?;
                v["vertices"] = json!(s.vertex_tokens);
                emit_json(out, &v)?;
            }
            SimplexCmd::Score(args) => {
                let d = args.dict.load()?;
                let s = class_simplex(&args, &d)?;
                emit_json(out, &serde_json::to_value(s.membership_score(&point(&args, &d)?)?)?)?;
            }
            SimplexCmd::Loo { dict, class } => {
                let d = dict.load()?;
                let mut rows = Vec::new();
                for def in ClassDefinition::load(&class)? {
                    rows.extend(ClassSimplex::from_definition(&d, &def)?.leave_one_out()?);
                }
                let mut buf = Vec::new();
                simplex::write_loo_csv(&rows, &mut buf)?;
                emit(out, &String::from_utf8(buf)?)?;
            }
        },
        Command::Reason(cmd) => match cmd {
            ReasonCmd::Chain { dict, facts, premise, conclusion } => {
                let d = dict.load()?;
                let kb = FactBase::build(&d, FactSpec::load(&facts)?)?;
                let a = sets::encode(&d, &WeightMap::set(&premise), false)?;
                let b = sets::encode(&d, &WeightMap::set(&conclusion), false)?;
                let q = reasoning::implication_vector(&a, &b)?;
                emit_json(out, &reasoning::chain_decompose(&kb, &q, &cfg)?.to_json())?;
            }
            ReasonCmd::Analogy { dict, base, minus, plus, k, fallback_ratio } => {
                let d = dict.load()?;
                let v = |t: &str| -> Result<SummedVector> { Ok(SummedVector::new(d.vector(t)?.to_vec())) };
                let r = reasoning::analogy(&d, &v(&base)?, &v(&minus)?, &v(&plus)?, k, fallback_ratio, &cfg)?;
                emit_json(
                    out,
                    &json!({
                        "ranked": r.ranked,
                        "method": r.method,
                        "relative_residual": r.relative_residual,
                        "decomposition": r.decomposition.to_json(),
                    }),
                )?;
            }
            ReasonCmd::Define { dict, name, recipe, relations } => {
                let Some(path) = out else {
                    return Err(usage("define needs --out for the new dictionary"));
                };
                let d = dict.load()?;
                let recipe: Recipe = read_json(&recipe)?;
                let mut rels: HashMap<String, RelationVector> = HashMap::new();
                if let Some(p) = relations {
                    for r in read_json::<Vec<RelationSpec>>(&p)? {
                        rels.insert(r.name.clone(), reasoning::relation_vector(&d, &r.name, &r.pairs)?);
                    }
                }
                let extended = reasoning::define_term(&d, &name, &recipe, &rels)?;
                extended.save_cache(path)?;
                let nearest: Vec<(String, f64)> = extended
                    .nearest_neighbors(extended.vector(&name)?, 6.min(extended.len()))?
                    .into_iter()
                    .filter(|(t, _)| *t != name)
                    .take(5)
                    .collect();
                eprintln!("{}", json!({"defined": name, "size": extended.len(), "nearest": nearest}));
            }
        },
        Command::Experiment(ExperimentCmd::Run { spec, dir, formats: fmts, quiet }) => {
            let fmts = formats(&fmts)?;
            let spec = ExperimentSpec::load(&spec)?;
            let report = harness::run_experiment_with(&spec, |c| {
                if !quiet {
                    eprintln!(
                        "{} {} n={} N={} k={} sigma={}: {}/{}",
                        c.method.name(),
                        c.series.name(),
                        c.n,
                        c.size,
                        c.k,
                        c.sigma,
                        c.successes,
                        c.trials
                    );
                }
            })?;
            for f in fmts {
                for p in harness::emit_report(&report, f, &dir)? {
                    eprintln!("wrote {}", p.display());
                }
            }
            emit(out, &harness::summary_csv(&report)?)?;
        }
        Command::Report(ReportCmd::Render { report, dir, formats: fmts }) => {
            let fmts = formats(&fmts)?;
            let text = fs::read_to_string(&report).with_context(|| format!("reading {}", report.display()))?;
            let r = ExperimentReport::from_json(&text)?;
            for f in fmts {
                for p in harness::emit_report(&r, f, &dir)? {
                    eprintln!("wrote {}", p.display());
                }
            }
        }
    }
    Ok(())
}

fn write_word2vec(d: &Dictionary, path: &Path) -> Result<()> {
    use std::io::Write;
    let mut w = std::io::BufWriter::new(fs::File::create(path).with_context(|| format!("creating {}", path.display()))?);
    writeln!(w, "{} {}", d.len(), d.dim())?;
    for (j, t) in d.tokens().iter().enumerate() {
        write!(w, "{t}")?;
        for v in d.column(j) {
            write!(w, " {v}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

fn error_class(e: &anyhow::Error) -> Option<ErrorClass> {
    for cause in e.chain() {
        let class = if let Some(x) = cause.downcast_ref::<vset_core::Error>() {
            x.class()
        } else if let Some(x) = cause.downcast_ref::<DictionaryError>() {
            x.class()
        } else if let Some(x) = cause.downcast_ref::<RecoveryError>() {
            x.class()
        } else if let Some(x) = cause.downcast_ref::<SetError>() {
            x.class()
        } else if let Some(x) = cause.downcast_ref::<SimplexError>() {
            x.class()
        } else if let Some(x) = cause.downcast_ref::<ReasoningError>() {
            x.class()
        } else if let Some(x) = cause.downcast_ref::<HarnessError>() {
            x.class()
        } else if cause.is::<serde_json::Error>() || cause.is::<Usage>() {
            ErrorClass::Validation
        } else if cause.is::<std::io::Error>() {
            ErrorClass::Io
        } else {
            continue;
        };
        return Some(class);
    }
    None
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            match error_class(&e) {
                Some(ErrorClass::Validation) => ExitCode::from(2),
                Some(ErrorClass::Numerical) => ExitCode::from(3),
                Some(ErrorClass::Io) | None => ExitCode::from(1),
            }
        }
    }
}

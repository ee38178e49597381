use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use serde::Serialize;

use scalarprobe::dataset::pool::frame_adjectives;
use scalarprobe::dataset::{
    build_mlm_items, generate_entailment, to_nli, AdjectivePool, Eligibility, EntailmentItem, MaskedInstance,
    NliPair, TemplateSet,
};
use scalarprobe::extraction::{
    extract_items, read_corpus, ExtractionOptions, HeuristicParser, ParseProvider, PreparsedProvider, ProbeItem,
};
use scalarprobe::gateway::{load_model, ModelConfig, ModelHandle};
use scalarprobe::io::{read_jsonl, read_to_string, write_bytes, write_jsonl};
use scalarprobe::probes::{
    run_entailment_probe, run_mlm_probe, run_nli_probe, run_random_baseline, run_remote_probe, stratified_sample,
    NegVariant, DEFAULT_PROMPT,
};
use scalarprobe::ranking::{Method, Ranker};
use scalarprobe::report::{render_tables, run, write_tables, ProbeKind, ProbeReport, RunConfig};
use scalarprobe::{Exec, Lexicon};

#[derive(Parser)]
#[command(name = "scalarprobe", version, about = "Probe how language models order scalar adverbs")]
struct Cli {
    /// Run every loop on the current thread.
    #[arg(long, global = true)]
    sequential: bool,
    /// Lexicon TSV; the shipped lexicon otherwise.
    #[arg(long, global = true)]
    lexicon: Option<PathBuf>,
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct ModelArg {
    /// `mock` or a model TOML file.
    #[arg(long, default_value = "mock")]
    model: String,
}

#[derive(Subcommand)]
enum Cmd {
    /// Pull sentence-final adverb-adjective items out of a JSONL comment corpus.
    Extract {
        #[arg(long)]
        corpus: PathBuf,
        /// Pre-computed parses (JSONL); the heuristic parser otherwise.
        #[arg(long)]
        parses: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build FULL_CONTEXT and NEUTRAL masked instances from extracted items.
    BuildMlm {
        #[arg(long)]
        items: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate the templated entailment dataset.
    BuildEntailment {
        #[arg(long)]
        templates: Option<PathBuf>,
        #[arg(long)]
        pool: Option<PathBuf>,
        /// Use template 16 in its copula-less wording.
        #[arg(long, conflicts_with = "templates")]
        verbatim_templates: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Convert entailment items into balanced premise/hypothesis pairs.
    BuildNli {
        #[arg(long)]
        items: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recover scale orderings from contextual embeddings.
    Rank {
        #[command(flatten)]
        model: ModelArg,
        /// SIM, DIFF or ADJDIFF; all three when omitted.
        #[arg(long)]
        method: Option<Method>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score the masked instances with a masked LM.
    ProbeMlm {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        instances: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fill the entailment items with a masked LM.
    ProbeEntailment {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        items: PathBuf,
        /// with-neg or no-neg; both when omitted.
        #[arg(long)]
        variant: Option<NegVariant>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Answer every entailment item uniformly at random.
    RandomBaseline {
        #[arg(long)]
        items: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        variant: Option<NegVariant>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Classify NLI pairs.
    ProbeNli {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        pairs: PathBuf,
        /// Seeds tie breaking between equally probable labels.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Query a completion API on a stratified sample of entailment items.
    ProbeRemote {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        items: PathBuf,
        #[arg(long, default_value_t = 5120)]
        sample: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        completions: usize,
        #[arg(long)]
        prompt: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-render the tables of a finished run from its report.json.
    Report {
        /// Run directory, or a report.json file.
        #[arg(long)]
        run: PathBuf,
        /// Where to write the tables; `<run>/tables` otherwise.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Execute a configured end-to-end run.
    Run {
        #[arg(long, conflicts_with_all = ["probe", "model", "seed", "out"])]
        config: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        probe: Vec<ProbeKind>,
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

// println! panics on a closed pipe (`| head`); write and propagate instead
macro_rules! say {
    ($($arg:tt)*) => {
        writeln!(std::io::stdout().lock(), $($arg)*)?
    };
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    say!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn model(spec: &ModelArg, lexicon: &Lexicon) -> Result<ModelHandle> {
    let cfg = ModelConfig::resolve(&spec.model)?;
    let handle = load_model(&cfg, lexicon).with_context(|| format!("loading model {}", spec.model))?;
    for note in &handle.notes {
        info!("{}: {note}", handle.id);
    }
    Ok(handle)
}

fn variants(v: Option<NegVariant>) -> Vec<NegVariant> {
    v.map_or_else(|| NegVariant::ALL.to_vec(), |v| vec![v])
}

fn run_cli(cli: Cli) -> Result<()> {
    let exec = if cli.sequential { Exec::Sequential } else { Exec::default() };
    let lexicon = match &cli.lexicon {
        Some(p) => Lexicon::load(p)?,
        None => Lexicon::builtin(),
    };
    match cli.cmd {
        Cmd::Extract { corpus, parses, out } => {
            let f = std::fs::File::open(&corpus).with_context(|| corpus.display().to_string())?;
            let (comments, malformed) = read_corpus(BufReader::new(f))?;
            if malformed > 0 {
                warn!("{malformed} unreadable corpus lines skipped");
            }
            let provider: Box<dyn ParseProvider> = match parses {
                Some(p) => Box::new(PreparsedProvider::load(p)?),
                None => Box::new(HeuristicParser::new(&lexicon)),
            };
            let res = extract_items(&comments, &lexicon, provider.as_ref(), &ExtractionOptions::default(), exec)?;
            write_jsonl(&out, &res.items)?;
            print_json(&res.stats)?;
        }
        Cmd::BuildMlm { items, out } => {
            let items: Vec<ProbeItem> = read_jsonl(items)?;
            let built = build_mlm_items(&items, &lexicon);
            write_jsonl(&out, &built.instances)?;
            if !built.rejected.is_empty() {
                warn!("{} items could not be masked", built.rejected.len());
            }
            say!("{} instances", built.instances.len());
        }
        Cmd::BuildEntailment {
            templates,
            pool,
            verbatim_templates,
            out,
        } => {
            let templates = match templates {
                Some(p) => {
                    let t = TemplateSet::load(p)?;
                    t.validate_complete()?;
                    t
                }
                None if verbatim_templates => TemplateSet::builtin_verbatim(),
                None => TemplateSet::builtin(),
            };
            let pool = match pool {
                Some(p) => AdjectivePool::load(p)?,
                None => AdjectivePool::builtin(),
            };
            let items = generate_entailment(&lexicon, &templates, &pool, &Eligibility::standard(&lexicon), exec)?;
            write_jsonl(&out, &items)?;
            say!("{} items", items.len());
        }
        Cmd::BuildNli { items, seed, out } => {
            let items: Vec<EntailmentItem> = read_jsonl(items)?;
            let nli = to_nli(&items, &lexicon, seed);
            write_jsonl(&out, &nli.pairs)?;
            say!("{} pairs", nli.pairs.len());
        }
        Cmd::Rank { model: m, method, out } => {
            let handle = model(&m, &lexicon)?;
            let frames = frame_adjectives();
            let mut ranker = Ranker::new(handle.embedder()?, &lexicon, &frames);
            ranker.exec = exec;
            let methods = method.map_or_else(|| Method::ALL.to_vec(), |m| vec![m]);
            let mut results = Vec::new();
            for m in methods {
                results.extend(ranker.rank_all(m)?);
            }
            match out {
                Some(p) => {
                    let mut s = serde_json::to_string_pretty(&results)?;
                    s.push('\n');
                    write_bytes(p, s.as_bytes())?;
                }
                None => print_json(&results)?,
            }
        }
        Cmd::ProbeMlm { model: m, instances, out } => {
            let handle = model(&m, &lexicon)?;
            let instances: Vec<MaskedInstance> = read_jsonl(instances)?;
            let res = run_mlm_probe(&instances, handle.mlm()?, &lexicon, exec);
            write_jsonl(&out, &res.records)?;
            if res.aggregates.failed == res.records.len() && !res.records.is_empty() {
                bail!("every instance failed");
            }
            print_json(&res.aggregates.rows)?;
        }
        Cmd::ProbeEntailment {
            model: m,
            items,
            variant,
            out,
        } => {
            let handle = model(&m, &lexicon)?;
            let items: Vec<EntailmentItem> = read_jsonl(items)?;
            let outs = run_entailment_probe(&items, handle.mlm()?, &lexicon, &variants(variant), exec);
            let records: Vec<_> = outs.iter().flat_map(|o| o.records.iter()).collect();
            write_jsonl(&out, &records)?;
            if let Some(o) = outs.first() {
                if o.aggregates.overall.failed as usize == items.len() && !items.is_empty() {
                    bail!("every item failed");
                }
            }
            print_json(&outs.iter().map(|o| &o.aggregates).collect::<Vec<_>>())?;
        }
        Cmd::RandomBaseline {
            items,
            seed,
            variant,
            out,
        } => {
            let items: Vec<EntailmentItem> = read_jsonl(items)?;
            let outs: Vec<_> = variants(variant)
                .into_iter()
                .map(|v| run_random_baseline(&items, &lexicon, v, seed, exec))
                .collect();
            let records: Vec<_> = outs.iter().flat_map(|o| o.records.iter()).collect();
            write_jsonl(&out, &records)?;
            for o in &outs {
                say!(
                    "{}: accuracy {} trivial rate {}",
                    o.aggregates.variant,
                    scalarprobe::report::tables::fmt_metric(o.aggregates.accuracy),
                    scalarprobe::report::tables::fmt_metric(o.aggregates.trivial_rate),
                );
            }
        }
        Cmd::ProbeNli {
            model: m,
            pairs,
            seed,
            out,
        } => {
            let handle = model(&m, &lexicon)?;
            let pairs: Vec<NliPair> = read_jsonl(pairs)?;
            let res = run_nli_probe(&pairs, handle.nli()?, seed, exec);
            write_jsonl(&out, &res.records)?;
            if res.result.failed as usize == pairs.len() && !pairs.is_empty() {
                bail!("every pair failed");
            }
            print_json(&res.result)?;
        }
        Cmd::ProbeRemote {
            model: m,
            items,
            sample,
            seed,
            completions,
            prompt,
            out,
        } => {
            let handle = model(&m, &lexicon)?;
            let items: Vec<EntailmentItem> = read_jsonl(items)?;
            let prompt = match prompt {
                Some(p) => read_to_string(p)?,
                None => DEFAULT_PROMPT.to_string(),
            };
            let idx = stratified_sample(&items, sample, seed)?;
            let chosen: Vec<EntailmentItem> = idx.iter().map(|&i| items[i].clone()).collect();
            let outs = run_remote_probe(
                &chosen,
                handle.remote()?,
                &prompt,
                completions,
                &lexicon,
                &NegVariant::ALL,
                exec,
            )?;
            let records: Vec<_> = outs.iter().flat_map(|o| o.records.iter()).collect();
            write_jsonl(&out, &records)?;
            print_json(&outs.iter().map(|o| &o.aggregates).collect::<Vec<_>>())?;
        }
        Cmd::Report { run, out } => {
            let path = if run.is_dir() { run.join("report.json") } else { run.clone() };
            let report: ProbeReport = serde_json::from_str(&read_to_string(&path)?)
                .with_context(|| format!("parsing {}", path.display()))?;
            let tables = render_tables(&report);
            let dir = out.unwrap_or_else(|| path.parent().unwrap_or(Path::new(".")).join("tables"));
            write_tables(&dir, &tables)?;
            for t in &tables {
                say!("{}\n{}", t.name, t.to_text());
            }
        }
        Cmd::Run {
            config,
            probe,
            model,
            seed,
            out,
        } => {
            let mut cfg = match config {
                Some(p) => RunConfig::load(p)?,
                None => {
                    let (Some(seed), Some(out)) = (seed, out) else {
                        bail!("either --config or both --seed and --out are required");
                    };
                    let probes = if probe.is_empty() { ProbeKind::ALL.to_vec() } else { probe };
                    RunConfig::new(out, model.unwrap_or_else(|| "mock".into()), probes, seed)
                }
            };
            if cli.sequential {
                cfg.sequential = true;
            }
            if let Some(p) = cli.lexicon {
                cfg.lexicon = Some(p);
            }
            let outcome = run(&cfg)?;
            say!("{}", outcome.output_dir.join("manifest.json").display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run_cli(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

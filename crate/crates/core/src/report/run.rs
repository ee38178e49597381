use std::collections::BTreeMap;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::config::{ProbeKind, RunConfig};
use super::heatmap::save_heatmap;
use super::tables::{render_tables, write_tables};
use super::{EntailmentSection, ProbeReport, ReportError};
use crate::dataset::pool::frame_adjectives;
use crate::dataset::{
    build_mlm_items, generate_entailment, to_nli, AdjectivePool, Eligibility,
    EntailmentItem, TemplateSet,
};
use crate::extraction::{
    coverage_report, extract_items, read_corpus, ExtractionOptions, HeuristicParser, ParseProvider,
    PreparsedProvider, DEFAULT_COVERAGE_THRESHOLD,
};
use crate::gateway::{load_model, ModelConfig, ModelHandle};
use crate::io::{file_sha256, sha256_hex, to_jsonl_bytes};
use crate::probes::{
    run_entailment_probe, run_mlm_probe, run_nli_probe, run_random_baseline, run_remote_probe,
    stratified_sample, EntailmentProbeOutput, EntailmentRecord, MlmRecord, NegVariant, NliRecord,
    DEFAULT_PROMPT,
};
use crate::ranking::{overall_pairwise_accuracy, Method, Ranker};
use crate::{Exec, Lexicon};

/// Small comment sample shipped for smoke runs when no corpus is configured.
pub const DEMO_CORPUS: &str = include_str!("../../data/demo_comments.jsonl");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub config_hash: String,
    pub model: String,
    pub model_notes: Vec<String>,
    pub exec: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub inputs: Vec<FileDigest>,
    /// Output files relative to the run directory.
    pub artifacts: Vec<FileDigest>,
    /// Pixel hashes of the heatmaps, keyed by file name.
    pub heatmaps: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureManifest {
    pub config_hash: String,
    pub stage: String,
    pub error: String,
    pub started_unix: u64,
    pub failed_unix: u64,
    /// Artifacts completed before the failure; they are left in place.
    pub artifacts: Vec<FileDigest>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub output_dir: PathBuf,
    pub manifest: Manifest,
    pub report: ProbeReport,
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    dir: PathBuf,
    exec: Exec,
    stage: &'static str,
    inputs: Vec<FileDigest>,
    artifacts: Vec<FileDigest>,
    heatmaps: BTreeMap<String, String>,
}

impl Ctx<'_> {
    fn write(&mut self, name: &str, bytes: &[u8]) -> crate::Result<()> {
        crate::io::write_bytes(self.dir.join(name), bytes)?;
        self.artifacts.push(FileDigest {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> crate::Result<()> {
        let mut s = serde_json::to_string_pretty(value).expect("report values serialize");
        s.push('\n');
        self.write(name, s.as_bytes())
    }

    fn input_file(&mut self, path: &Path) -> crate::Result<()> {
        self.inputs.push(FileDigest {
            path: path.display().to_string(),
            sha256: file_sha256(path)?,
        });
        Ok(())
    }

    fn input_builtin(&mut self, name: &str, content: &str) {
        self.inputs.push(FileDigest {
            path: format!("builtin:{name}"),
            sha256: sha256_hex(content.as_bytes()),
        });
    }
}

/// Fails a stage when it produced records but every one of them failed; partial failures
/// are reported in the aggregates instead.
fn all_failed(stage: &str, total: usize, failed: usize, sample: Option<&str>) -> crate::Result<()> {
    if total > 0 && failed == total {
        return Err(ReportError::Stage {
            stage: stage.to_string(),
            message: format!("all {total} items failed; first error: {}", sample.unwrap_or("?")),
        }
        .into());
    }
    if failed > 0 {
        warn!("{stage}: {failed} of {total} items failed");
    }
    Ok(())
}

fn entailment_failures(out: &EntailmentProbeOutput) -> (usize, Option<&str>) {
    let mut first = None;
    let n = out
        .records
        .iter()
        .filter(|r| match r {
            EntailmentRecord::Failed { error, .. } => {
                first.get_or_insert(error.as_str());
                true
            }
            _ => false,
        })
        .count();
    (n, first)
}

fn section(source: String, items: usize, mut outs: Vec<EntailmentProbeOutput>) -> EntailmentSection {
    let no = outs.pop().expect("two variants");
    let with = outs.pop().expect("two variants");
    EntailmentSection {
        source,
        items,
        with_neg: with.aggregates,
        no_neg: no.aggregates,
    }
}

fn verdict_bytes(outs: &[EntailmentProbeOutput]) -> Vec<u8> {
    outs.iter().flat_map(|o| to_jsonl_bytes(&o.records)).collect()
}

fn load_lexicon(ctx: &mut Ctx) -> crate::Result<Lexicon> {
    Ok(match &ctx.cfg.lexicon {
        Some(p) => {
            ctx.input_file(p)?;
            Lexicon::load(p)?
        }
        None => {
            let lex = Lexicon::builtin();
            ctx.input_builtin("lexicon.tsv", &lex.to_tsv());
            lex
        }
    })
}

fn load_templates(ctx: &mut Ctx) -> crate::Result<TemplateSet> {
    let set = match &ctx.cfg.templates {
        Some(p) => {
            ctx.input_file(p)?;
            let s = TemplateSet::load(p)?;
            s.validate_complete()?;
            s
        }
        None if ctx.cfg.verbatim_templates => TemplateSet::builtin_verbatim(),
        None => TemplateSet::builtin(),
    };
    if ctx.cfg.templates.is_none() {
        ctx.input_builtin("templates.tsv", &set.to_tsv());
    }
    Ok(set)
}

fn load_pool(ctx: &mut Ctx) -> crate::Result<AdjectivePool> {
    Ok(match &ctx.cfg.pool {
        Some(p) => {
            ctx.input_file(p)?;
            AdjectivePool::load(p)?
        }
        None => {
            let pool = AdjectivePool::builtin();
            ctx.input_builtin("adjective_pool.tsv", &pool.to_tsv());
            pool
        }
    })
}

fn mlm_stage(ctx: &mut Ctx, lexicon: &Lexicon, model: &ModelHandle, report: &mut ProbeReport) -> crate::Result<()> {
    let mlm = model.mlm()?;
    let (comments, malformed) = match &ctx.cfg.corpus {
        Some(p) => {
            ctx.input_file(p)?;
            let f = std::fs::File::open(p).map_err(|source| crate::Error::Io {
                path: p.display().to_string(),
                source,
            })?;
            read_corpus(BufReader::new(f))?
        }
        None => {
            ctx.input_builtin("demo_comments.jsonl", DEMO_CORPUS);
            read_corpus(DEMO_CORPUS.as_bytes())?
        }
    };
    if malformed > 0 {
        warn!("{malformed} malformed corpus lines skipped");
    }
    let provider: Box<dyn ParseProvider> = match &ctx.cfg.parses {
        Some(p) => {
            ctx.input_file(p)?;
            Box::new(PreparsedProvider::load(p)?)
        }
        None => Box::new(HeuristicParser::new(lexicon)),
    };
    let extracted = extract_items(&comments, lexicon, provider.as_ref(), &ExtractionOptions::default(), ctx.exec)?;
    info!("extracted {} items from {} comments", extracted.items.len(), comments.len());
    ctx.write("extraction/items.jsonl", &to_jsonl_bytes(&extracted.items))?;
    ctx.write_json("extraction/stats.json", &extracted.stats)?;
    let coverage = coverage_report(&extracted.items, lexicon, DEFAULT_COVERAGE_THRESHOLD);
    report.coverage = Some(coverage);

    let built = build_mlm_items(&extracted.items, lexicon);
    ctx.write("mlm/instances.jsonl", &to_jsonl_bytes(&built.instances))?;
    if !built.rejected.is_empty() {
        ctx.write("mlm/rejected.jsonl", &to_jsonl_bytes(&built.rejected))?;
    }
    let out = run_mlm_probe(&built.instances, mlm, lexicon, ctx.exec);
    let first = out.records.iter().find_map(|r| match r {
        MlmRecord::Failed { error, .. } => Some(error.as_str()),
        _ => None,
    });
    all_failed("mlm", out.records.len(), out.aggregates.failed, first)?;
    ctx.write("mlm/verdicts.jsonl", &to_jsonl_bytes(&out.records))?;
    for (name, m) in [
        ("confusion_full_context.png", &out.aggregates.confusion_full),
        ("confusion_neutral.png", &out.aggregates.confusion_neutral),
    ] {
        if m.is_empty() {
            continue;
        }
        let path = ctx.dir.join("mlm").join(name);
        let hash = save_heatmap(m, &path)?;
        let rel = format!("mlm/{name}");
        ctx.input_file_artifact(&rel, &path)?;
        ctx.heatmaps.insert(rel, hash);
    }
    report.mlm = Some(out.aggregates);
    Ok(())
}

impl Ctx<'_> {
    fn input_file_artifact(&mut self, rel: &str, path: &Path) -> crate::Result<()> {
        self.artifacts.push(FileDigest {
            path: rel.to_string(),
            sha256: file_sha256(path)?,
        });
        Ok(())
    }
}

fn ranking_stage(ctx: &mut Ctx, lexicon: &Lexicon, model: &ModelHandle, report: &mut ProbeReport) -> crate::Result<()> {
    let embedder = model.embedder()?;
    let frames = frame_adjectives();
    let mut ranker = Ranker::new(embedder, lexicon, &frames);
    ranker.exec = ctx.exec;
    for method in Method::ALL {
        let results = ranker.rank_all(method)?;
        report.ranking_overall.push((method, overall_pairwise_accuracy(&results, lexicon)));
        report.ranking.extend(results);
    }
    ctx.write_json("ranking/results.json", &report.ranking)?;
    Ok(())
}

fn execute(ctx: &mut Ctx, report: &mut ProbeReport) -> crate::Result<()> {
    let cfg = ctx.cfg;
    ctx.stage = "inputs";
    let lexicon = load_lexicon(ctx)?;

    ctx.stage = "model";
    let model_cfg = ModelConfig::resolve(&cfg.model)?;
    if cfg.model != "mock" {
        ctx.input_file(Path::new(&cfg.model))?;
    }
    let model = load_model(&model_cfg, &lexicon)?;
    report.model = model.id.clone();
    report.model_notes = model.notes.clone();

    if cfg.wants(ProbeKind::Mlm) {
        ctx.stage = "mlm";
        mlm_stage(ctx, &lexicon, &model, report)?;
    }
    if cfg.wants(ProbeKind::Ranking) {
        ctx.stage = "ranking";
        ranking_stage(ctx, &lexicon, &model, report)?;
    }

    let needs_items = [ProbeKind::Entailment, ProbeKind::RandomBaseline, ProbeKind::Nli, ProbeKind::Remote]
        .iter()
        .any(|p| cfg.wants(*p));
    if !needs_items {
        return Ok(());
    }
    ctx.stage = "entailment-dataset";
    let templates = load_templates(ctx)?;
    let pool = load_pool(ctx)?;
    let items: Vec<EntailmentItem> =
        generate_entailment(&lexicon, &templates, &pool, &Eligibility::standard(&lexicon), ctx.exec)?;
    ctx.write("entailment/items.jsonl", &to_jsonl_bytes(&items))?;

    if cfg.wants(ProbeKind::Entailment) {
        ctx.stage = "entailment";
        let outs = run_entailment_probe(&items, model.mlm()?, &lexicon, &NegVariant::ALL, ctx.exec);
        let (failed, first) = entailment_failures(&outs[0]);
        all_failed("entailment", items.len(), failed, first)?;
        ctx.write("entailment/verdicts.jsonl", &verdict_bytes(&outs))?;
        report.entailment.push(section(model.id.clone(), items.len(), outs));
    }
    if cfg.wants(ProbeKind::RandomBaseline) {
        ctx.stage = "random-baseline";
        let outs: Vec<EntailmentProbeOutput> = NegVariant::ALL
            .iter()
            .map(|&v| run_random_baseline(&items, &lexicon, v, cfg.seed, ctx.exec))
            .collect();
        ctx.write("random_baseline/verdicts.jsonl", &verdict_bytes(&outs))?;
        report.entailment.push(section("random".into(), items.len(), outs));
    }
    if cfg.wants(ProbeKind::Nli) {
        ctx.stage = "nli";
        let classifier = model.nli()?;
        let nli = to_nli(&items, &lexicon, cfg.seed);
        ctx.write("nli/pairs.jsonl", &to_jsonl_bytes(&nli.pairs))?;
        let out = run_nli_probe(&nli.pairs, classifier, cfg.seed, ctx.exec);
        let first = out.records.iter().find_map(|r| match r {
            NliRecord::Failed { error, .. } => Some(error.as_str()),
            _ => None,
        });
        all_failed("nli", out.records.len(), out.result.failed as usize, first)?;
        ctx.write("nli/verdicts.jsonl", &to_jsonl_bytes(&out.records))?;
        report.nli = Some(out.result);
    }
    if cfg.wants(ProbeKind::Remote) {
        ctx.stage = "remote";
        let completer = model.remote()?;
        let prompt = match &cfg.prompt {
            Some(p) => {
                ctx.input_file(p)?;
                crate::io::read_to_string(p)?
            }
            None => {
                ctx.input_builtin("remote_prompt.txt", DEFAULT_PROMPT);
                DEFAULT_PROMPT.to_string()
            }
        };
        let idx = stratified_sample(&items, cfg.remote_sample.min(items.len()), cfg.seed)?;
        let sample: Vec<EntailmentItem> = idx.iter().map(|&i| items[i].clone()).collect();
        ctx.write("remote/sample.jsonl", &to_jsonl_bytes(&sample))?;
        let outs = run_remote_probe(
            &sample,
            completer,
            &prompt,
            cfg.remote_completions,
            &lexicon,
            &NegVariant::ALL,
            ctx.exec,
        )?;
        let (failed, first) = entailment_failures(&outs[0]);
        all_failed("remote", sample.len(), failed, first)?;
        ctx.write("remote/verdicts.jsonl", &verdict_bytes(&outs))?;
        report.entailment.push(section(format!("remote:{}", completer.model()), sample.len(), outs));
    }
    Ok(())
}

/// Runs the configured probes and writes every artifact under `output_dir`.
///
/// The configuration is validated before anything is loaded. On failure the artifacts
/// written so far stay in place next to a `failure.json` describing the failed stage.
pub fn run(cfg: &RunConfig) -> crate::Result<RunOutcome> {
    cfg.validate()?;
    let started = now();
    let config_hash = cfg.hash();
    let mut ctx = Ctx {
        cfg,
        dir: cfg.output_dir.clone(),
        exec: if cfg.sequential { Exec::Sequential } else { Exec::default() },
        stage: "setup",
        inputs: Vec::new(),
        artifacts: Vec::new(),
        heatmaps: BTreeMap::new(),
    };
    let mut report = ProbeReport::empty(cfg.model.clone());
    report.config_hash = config_hash.clone();

    let result = ctx
        .write("config.toml", cfg.to_toml().as_bytes())
        .and_then(|_| execute(&mut ctx, &mut report))
        .and_then(|_| {
            ctx.stage = "report";
            ctx.write_json("report.json", &report)?;
            let tables = render_tables(&report);
            let dir = ctx.dir.join("tables");
            for p in write_tables(&dir, &tables)? {
                let rel = p.strip_prefix(&ctx.dir).unwrap_or(&p).display().to_string();
                ctx.input_file_artifact(&rel, &p)?;
            }
            Ok(())
        });

    if let Err(e) = result {
        let failure = FailureManifest {
            config_hash,
            stage: ctx.stage.to_string(),
            error: e.to_string(),
            started_unix: started,
            failed_unix: now(),
            artifacts: ctx.artifacts.clone(),
        };
        let mut s = serde_json::to_string_pretty(&failure).expect("failure manifest serializes");
        s.push('\n');
        if let Err(w) = crate::io::write_bytes(ctx.dir.join("failure.json"), s.as_bytes()) {
            warn!("could not write failure manifest: {w}");
        }
        return Err(ReportError::Stage {
            stage: failure.stage,
            message: failure.error,
        }
        .into());
    }

    let manifest = Manifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash,
        model: report.model.clone(),
        model_notes: report.model_notes.clone(),
        exec: format!("{:?}", ctx.exec),
        started_unix: started,
        finished_unix: now(),
        inputs: ctx.inputs.clone(),
        artifacts: ctx.artifacts.clone(),
        heatmaps: ctx.heatmaps.clone(),
    };
    let mut s = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    s.push('\n');
    crate::io::write_bytes(ctx.dir.join("manifest.json"), s.as_bytes())?;
    Ok(RunOutcome {
        output_dir: ctx.dir,
        manifest,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mock_mlm_run_writes_a_complete_report() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig::new(dir.path().join("out"), "mock", vec![ProbeKind::Mlm], 1);
        let out = run(&cfg).unwrap();
        let mlm = out.report.mlm.as_ref().unwrap();
        assert!(mlm.rows.iter().any(|r| r.n > 0));
        for f in ["manifest.json", "report.json", "tables/mlm.csv", "tables/schema.json", "mlm/verdicts.jsonl"] {
            assert!(out.output_dir.join(f).is_file(), "{f}");
        }
        assert!(out.manifest.heatmaps.contains_key("mlm/confusion_full_context.png"));
        // confusion rows reconcile with scored instances
        let total: u64 = mlm.confusion_full.total();
        let n = mlm.row(crate::dataset::Variant::FullContext, "OVERALL").unwrap().n as u64;
        assert_eq!(total, n);
    }

    #[test]
    fn rerun_is_identical_apart_from_timestamps() {
        let dir = tempfile::tempdir().unwrap();
        let a = RunConfig::new(dir.path().join("a"), "mock", vec![ProbeKind::Mlm, ProbeKind::RandomBaseline], 5);
        let b = RunConfig { output_dir: dir.path().join("a"), ..a.clone() };
        let ra = run(&a).unwrap();
        let rb = run(&b).unwrap();
        assert_eq!(ra.manifest.config_hash, rb.manifest.config_hash);
        assert_eq!(ra.manifest.artifacts, rb.manifest.artifacts);
        assert_eq!(ra.report, rb.report);
    }

    #[test]
    fn missing_dataset_fails_before_model_load() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig::new(dir.path().join("o"), "mock", vec![ProbeKind::Mlm], 1);
        cfg.corpus = Some(dir.path().join("missing.jsonl"));
        let e = run(&cfg).unwrap_err();
        assert!(matches!(e, crate::Error::Report(ReportError::Config(_))), "{e}");
        assert!(!dir.path().join("o").exists());
    }

    #[test]
    fn stage_failure_leaves_partial_artifacts_and_failure_manifest() {
        let dir = tempfile::tempdir().unwrap();
        // a model file with no masked-LM capability
        let model = dir.path().join("replay.toml");
        let replay = dir.path().join("replay.jsonl");
        std::fs::write(&replay, "").unwrap();
        std::fs::write(
            &model,
            format!("name = \"r\"\nkind = \"replay\"\nreplay_path = \"{}\"\n", replay.display()),
        )
        .unwrap();
        let cfg = RunConfig::new(dir.path().join("o"), model.display().to_string(), vec![ProbeKind::Mlm], 1);
        let e = run(&cfg).unwrap_err();
        assert!(e.to_string().contains("mlm"), "{e}");
        let failure: FailureManifest =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("o/failure.json")).unwrap()).unwrap();
        assert_eq!(failure.stage, "mlm");
        assert!(failure.artifacts.iter().any(|a| a.path == "config.toml"));
    }
}

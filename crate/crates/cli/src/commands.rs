use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use debbie_core::bench::{default_probes, emit_report, run_bench, BenchConfig, BenchError, Probe, ReportFormat};
use debbie_core::clustering::{IndexOptions, IndexSet, Linkage};
use debbie_core::config::Config;
use debbie_core::corpus::{load_corpus_file, Corpus, CorpusError, Stance};
use debbie_core::dialogue::{Engine, Reply, TranscriptStore};
use debbie_core::exec::Exec;
use debbie_core::retrieval::Strategy;
use debbie_core::similarity::Scorer;
use debbie_core::synth::{generate_corpus, SyntheticSpec};
use debbie_service::{ServiceConfig, StartupError};

use crate::{runtime, CliError};

fn corpus_error(e: CorpusError) -> CliError {
    match e {
        CorpusError::InvalidThreshold(_) => CliError::Usage(e.to_string()),
        other => runtime(other),
    }
}

fn build_scorer(config: &Config) -> Result<Arc<dyn Scorer>, CliError> {
    config.scorer.build().map_err(|e| CliError::Usage(e.to_string()))
}

pub fn ingest(input: &Path, aq_threshold: f64, output: &Path) -> Result<(), CliError> {
    if !(0.0..=1.0).contains(&aq_threshold) {
        return Err(CliError::Usage(format!("--aq-threshold must be within [0, 1], got {aq_threshold}")));
    }
    let raw = load_corpus_file(input).map_err(|e| runtime(format!("{}: {e}", input.display())))?;
    let kept = raw.filter_by_quality(aq_threshold).map_err(corpus_error)?;
    let file = std::fs::File::create(output).map_err(|e| runtime(format!("{}: {e}", output.display())))?;
    let mut out = BufWriter::new(file);
    kept.write_to(&mut out).map_err(runtime)?;
    out.flush().map_err(runtime)?;

    let kept_counts = kept.counts();
    println!("{:<20} {:<8} {:>8} {:>8}", "topic", "stance", "input", "kept");
    for ((topic, stance), total) in raw.counts() {
        let n = kept_counts.get(&(topic.clone(), stance)).copied().unwrap_or(0);
        println!("{topic:<20} {:<8} {total:>8} {n:>8}", stance.as_str());
    }
    println!("kept {} of {} records with aq > {aq_threshold}; wrote {}", kept.len(), raw.len(), output.display());
    Ok(())
}

pub fn cluster(config: &Config, corpus: &Path, output: &Path, linkage: Linkage) -> Result<(), CliError> {
    let corpus = load_corpus_file(corpus).map_err(|e| runtime(format!("{}: {e}", corpus.display())))?;
    let scorer = build_scorer(config)?;
    let started = Instant::now();
    let options = IndexOptions { k: config.k, linkage, exec: Exec::default() };
    let set = IndexSet::build(&corpus, scorer.as_ref(), &options).map_err(runtime)?;
    std::fs::create_dir_all(output).map_err(|e| runtime(format!("{}: {e}", output.display())))?;
    set.save_dir(output).map_err(runtime)?;
    for index in set.iter() {
        let summary = index.summary();
        let sizes: Vec<String> = summary.clusters.iter().map(|c| c.size.to_string()).collect();
        println!(
            "{} {}: {} records, k={}, cluster sizes [{}]",
            summary.topic,
            summary.stance,
            summary.pool_size,
            summary.k,
            sizes.join(", ")
        );
    }
    println!(
        "wrote {} indexes and summary.json to {} in {:.2}s",
        set.len(),
        output.display(),
        started.elapsed().as_secs_f64()
    );
    Ok(())
}

fn load_indexes(dir: &Path) -> Result<IndexSet, CliError> {
    IndexSet::load_dir(dir).map_err(|e| {
        runtime(format!("{e}; build indexes with `debbie cluster --corpus <corpus.jsonl> --output {}`", dir.display()))
    })
}

pub fn chat(
    config: &Config,
    index_dir: &Path,
    topic: &str,
    stance: Stance,
    strategy: Strategy,
) -> Result<(), CliError> {
    let indexes = load_indexes(index_dir)?;
    let store = TranscriptStore::new(config.transcript_dir()).map_err(runtime)?;
    let engine = Engine::new(indexes, build_scorer(config)?)
        .with_thresholds(config.thresholds)
        .map_err(|e| CliError::Usage(e.to_string()))?
        .with_store(store);
    let mut session = engine.start_session(topic, stance, strategy, config.seed).map_err(runtime)?;
    println!(
        "Debating {topic}: you argue {}, Debbie argues {}. Type /quit to end.",
        session.user_stance.label(),
        session.bot_stance.label()
    );

    let stdin = std::io::stdin();
    let mut lines = stdin.lock().lines();
    loop {
        print!("you> ");
        std::io::stdout().flush().map_err(runtime)?;
        let Some(line) = lines.next() else { break };
        let line = line.map_err(runtime)?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        if text == "/quit" || text == "/end" {
            break;
        }
        match engine.respond(&mut session, text).map_err(runtime)? {
            Reply::Argument { text, retrieval, .. } => {
                let r = &retrieval.result;
                println!("debbie> {text}");
                let cluster = r.cluster_id.map(|c| format!("cluster {c} | ")).unwrap_or_default();
                println!(
                    "        [{} | score {:.3} | {cluster}{} comparisons | {:.2} ms]",
                    strategy.as_str(),
                    r.score.value(),
                    r.comparisons,
                    r.elapsed.as_secs_f64() * 1e3
                );
            }
            Reply::Exhausted { message } => {
                println!("debbie> {message}");
                break;
            }
        }
    }
    engine.end_session(&mut session).map_err(runtime)?;
    println!();
    println!(
        "{} turns; transcript at {}",
        session.turn_count(),
        engine.store().expect("store configured").path_for(&session.session_id).display()
    );
    Ok(())
}

pub fn serve(config: &Config, index_dir: PathBuf, log_requests: bool) -> Result<(), CliError> {
    let service = ServiceConfig {
        index_dir,
        transcript_dir: Some(config.transcript_dir()),
        bind: config.bind.clone(),
        scorer: config.scorer.clone(),
        thresholds: config.thresholds,
        log_requests,
    };
    let rt = tokio::runtime::Runtime::new().map_err(runtime)?;
    rt.block_on(debbie_service::serve(service)).map_err(|e| match e {
        StartupError::Scorer(_) | StartupError::Thresholds(_) => CliError::Usage(e.to_string()),
        other => runtime(other),
    })
}

pub struct BenchArgs {
    pub corpus: String,
    pub methods: Vec<Strategy>,
    pub reps: usize,
    pub format: ReportFormat,
    pub probes: Option<PathBuf>,
    pub probe_count: usize,
    pub output: Option<PathBuf>,
}

fn read_probes(path: &Path) -> Result<Vec<Probe>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| runtime(format!("{}:{}: {e}", path.display(), i + 1))))
        .collect()
}

pub fn bench(config: &Config, args: BenchArgs) -> Result<(), CliError> {
    let (corpus, generated): (Corpus, Option<Vec<Probe>>) = if args.corpus.starts_with("synthetic") {
        let mut spec: SyntheticSpec = args.corpus.parse().map_err(|e| CliError::Usage(format!("--corpus: {e}")))?;
        if !args.corpus.contains("seed=") {
            spec.seed = config.seed;
        }
        let synth = generate_corpus(&spec).map_err(|e| CliError::Usage(e.to_string()))?;
        (synth.corpus, Some(synth.probes))
    } else {
        let path = Path::new(&args.corpus);
        (load_corpus_file(path).map_err(|e| runtime(format!("{}: {e}", path.display())))?, None)
    };
    let scorer = build_scorer(config)?;
    let started = Instant::now();
    let indexes = IndexSet::build(&corpus, scorer.as_ref(), &IndexOptions { k: config.k, ..IndexOptions::default() })
        .map_err(runtime)?;
    eprintln!("built {} indexes in {:.2}s", indexes.len(), started.elapsed().as_secs_f64());

    let probes = match (&args.probes, generated) {
        (Some(path), _) => read_probes(path)?,
        (None, Some(probes)) => probes,
        (None, None) => indexes.iter().flat_map(|i| default_probes(i, args.probe_count)).collect(),
    };
    let bench = BenchConfig {
        methods: args.methods,
        repetitions: args.reps,
        seed: config.seed,
        thresholds: config.thresholds,
        exec: Exec::Sequential,
    };
    let report = run_bench(&indexes, &probes, scorer.as_ref(), &bench).map_err(|e| match e {
        BenchError::NoMethods | BenchError::NoRepetitions => CliError::Usage(e.to_string()),
        other => runtime(other),
    })?;
    let text = emit_report(&report, args.format);
    print!("{text}");
    if let Some(path) = &args.output {
        std::fs::write(path, &text).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

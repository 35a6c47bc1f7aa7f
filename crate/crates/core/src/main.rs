//! Command-line front end: index construction, filter runs, run-vs-run
//! comparison, qrels scoring, and trade-off sweeps.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 when an input file is
//! missing or malformed.

use std::collections::BTreeSet;
use std::error::Error;
use std::io::BufRead;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use stagemed::corpus::{
    load_corpus, load_spam_scores, load_static_scores, load_stopwords, tokenize, IngestConfig,
};
use stagemed::filters::{run_filter, FilterMethod, FilterSpec, Query};
use stagemed::harness::{
    emit_csv, emit_per_query_csv, fmt_sig, parse_qrels, parse_queries, parse_trec_run, sweep,
    write_trec_run, GoldRun, HarnessError, SweepConfig,
};
use stagemed::index::{build_index, load_index, save_index, Bm25Params};
use stagemed::metrics::{evaluate, MetricSpec, Ranking};
use stagemed::similarity::{
    med, overlap, rbo, Direction, MedConstraints, OverlapVariant, WeightProfile,
};

#[derive(Parser)]
#[command(
    name = "stagemed",
    version,
    about = "Staged retrieval filters with judgment-free evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build an inverted index from a JSONL corpus.
    Build {
        /// Corpus file, one {"id", "text"} object per line.
        #[arg(long)]
        corpus: PathBuf,
        /// Output index file.
        #[arg(long)]
        out: PathBuf,
        /// Stopword list, one term per line.
        #[arg(long)]
        stopwords: Option<PathBuf>,
        /// Static document scores, one tab-separated "ext_id<TAB>score" per
        /// line. Assigns internal ids by descending score.
        #[arg(long)]
        static_scores: Option<PathBuf>,
        /// Spam scores, one tab-separated "ext_id<TAB>score" per line.
        #[arg(long, requires = "spam_threshold")]
        spam_scores: Option<PathBuf>,
        /// Keep only documents with spam score strictly above this.
        #[arg(long, requires = "spam_scores")]
        spam_threshold: Option<i64>,
    },
    /// Run a candidate-generation filter over a query log and write a run
    /// file.
    Filter {
        #[arg(long)]
        index: PathBuf,
        /// Query log, "<qid>\t<text>" per line.
        #[arg(long)]
        queries: PathBuf,
        /// boolean_and | boolean_static_heap | wand | scored_boolean_wand
        #[arg(long)]
        method: FilterMethod,
        /// Result depth per query.
        #[arg(long)]
        k: usize,
        /// Score-bound multiplier for wand; 1.0 is rank-safe.
        #[arg(long, default_value_t = 1.0)]
        theta: f64,
        /// Output run file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Maximized effectiveness difference between two runs, per query.
    Med {
        #[arg(long)]
        run_a: PathBuf,
        #[arg(long)]
        run_b: PathBuf,
        /// Weight profile: rbp:P, dcg:K, or p:K.
        #[arg(long)]
        metric: String,
        /// Documents to hold relevant, one per line.
        #[arg(long)]
        force_relevant: Option<PathBuf>,
        /// Documents to hold nonrelevant, one per line.
        #[arg(long)]
        force_nonrelevant: Option<PathBuf>,
        /// Output CSV (qid,med,direction).
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank-biased overlap between two runs, per query, to stdout.
    Rbo {
        #[arg(long)]
        run_a: PathBuf,
        #[arg(long)]
        run_b: PathBuf,
        /// Persistence in (0, 1).
        #[arg(long)]
        p: f64,
    },
    /// Set overlap of two runs truncated at depth k, per shared query, to
    /// stdout.
    Overlap {
        #[arg(long)]
        run_a: PathBuf,
        #[arg(long)]
        run_b: PathBuf,
        /// jaccard | min_denominator | coverage_a_in_b
        #[arg(long)]
        variant: String,
        #[arg(long)]
        k: usize,
    },
    /// Score a run against qrels, per query plus mean, to stdout.
    Evaluate {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        qrels: PathBuf,
        /// rbp:P | dcg:K | ndcg:K | p:K | ap | rr | err:K
        #[arg(long)]
        metric: String,
    },
    /// Time a grid of filters against a gold run and write trade-off CSVs.
    Sweep {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        /// Gold run file; its per-query rankings act as the final stage.
        #[arg(long)]
        gold: PathBuf,
        /// Comma-separated filter methods.
        #[arg(long)]
        methods: String,
        /// Comma-separated result depths, ascending.
        #[arg(long)]
        depths: String,
        /// Comma-separated wand thetas; other methods ignore this.
        #[arg(long, default_value = "1.0")]
        thetas: String,
        /// Weight profile for the MED column.
        #[arg(long, default_value = "rbp:0.95")]
        metric: String,
        /// Modeled final-stage cost per candidate document, in ms.
        #[arg(long, default_value_t = 0.02)]
        final_ms_per_doc: f64,
        /// Timed passes per grid cell; per-query time is the minimum.
        #[arg(long, default_value_t = 3)]
        timing_repeats: usize,
        #[arg(long)]
        out_summary: PathBuf,
        #[arg(long)]
        out_per_query: PathBuf,
    },
}

enum CliError {
    Usage(String),
    Data(String),
}

/// Flattens an error and its source chain into one line.
fn describe(err: &dyn Error) -> String {
    let mut msg = err.to_string();
    let mut cur = err.source();
    while let Some(source) = cur {
        msg.push_str(": ");
        msg.push_str(&source.to_string());
        cur = source.source();
    }
    msg
}

fn data<E: Error>(err: E) -> CliError {
    CliError::Data(describe(&err))
}

fn usage<E: Error>(err: E) -> CliError {
    CliError::Usage(describe(&err))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return match err.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Build {
            corpus,
            out,
            stopwords,
            static_scores,
            spam_scores,
            spam_threshold,
        } => cmd_build(
            &corpus,
            &out,
            stopwords.as_deref(),
            static_scores.as_deref(),
            spam_scores.as_deref(),
            spam_threshold,
        ),
        Command::Filter {
            index,
            queries,
            method,
            k,
            theta,
            out,
        } => cmd_filter(&index, &queries, method, k, theta, &out),
        Command::Med {
            run_a,
            run_b,
            metric,
            force_relevant,
            force_nonrelevant,
            out,
        } => cmd_med(
            &run_a,
            &run_b,
            &metric,
            force_relevant.as_deref(),
            force_nonrelevant.as_deref(),
            &out,
        ),
        Command::Rbo { run_a, run_b, p } => cmd_rbo(&run_a, &run_b, p),
        Command::Overlap {
            run_a,
            run_b,
            variant,
            k,
        } => cmd_overlap(&run_a, &run_b, &variant, k),
        Command::Evaluate { run, qrels, metric } => cmd_evaluate(&run, &qrels, &metric),
        Command::Sweep {
            index,
            queries,
            gold,
            methods,
            depths,
            thetas,
            metric,
            final_ms_per_doc,
            timing_repeats,
            out_summary,
            out_per_query,
        } => cmd_sweep(SweepArgs {
            index,
            queries,
            gold,
            methods,
            depths,
            thetas,
            metric,
            final_ms_per_doc,
            timing_repeats,
            out_summary,
            out_per_query,
        }),
    }
}

fn cmd_build(
    corpus: &Path,
    out: &Path,
    stopwords: Option<&Path>,
    static_scores: Option<&Path>,
    spam_scores: Option<&Path>,
    spam_threshold: Option<i64>,
) -> Result<(), CliError> {
    let config = IngestConfig {
        stopwords: stopwords.map(load_stopwords).transpose().map_err(data)?,
        spam_scores: spam_scores.map(load_spam_scores).transpose().map_err(data)?,
        spam_threshold,
        static_scores: static_scores
            .map(load_static_scores)
            .transpose()
            .map_err(data)?,
        ..IngestConfig::default()
    };
    let (collection, stats) = load_corpus(corpus, &config).map_err(data)?;
    let index = build_index(&collection, Bm25Params::default()).map_err(data)?;
    save_index(&index, out).map_err(data)?;
    println!(
        "indexed {} of {} documents ({} spam-pruned), {} terms",
        index.num_docs(),
        stats.docs_read,
        stats.spam_pruned,
        index.num_terms()
    );
    Ok(())
}

fn cmd_filter(
    index_path: &Path,
    queries: &Path,
    method: FilterMethod,
    k: usize,
    theta: f64,
    out: &Path,
) -> Result<(), CliError> {
    if theta < 1.0 {
        return Err(CliError::Usage(format!(
            "theta must be at least 1.0, got {theta}"
        )));
    }
    let index = load_index(index_path).map_err(data)?;
    let log = parse_queries(queries).map_err(data)?;
    let spec = FilterSpec {
        method,
        k,
        theta,
    };
    let mut entries: Vec<(String, String, f64)> = Vec::new();
    for (qid, text) in &log {
        let query = Query::new(qid.as_str(), tokenize(text, &index.tokenizer));
        let output = run_filter(&index, &spec, &query);
        for (doc, score) in output.docs.iter().zip(&output.scores) {
            entries.push((
                qid.clone(),
                index.doc_table[*doc as usize].ext_id.clone(),
                *score,
            ));
        }
    }
    let run = GoldRun::from_entries(entries).map_err(data)?;
    write_trec_run(&run, out, method.as_str()).map_err(data)?;
    println!(
        "ran {} over {} queries at k={}, wrote {}",
        method,
        log.len(),
        k,
        out.display()
    );
    Ok(())
}

/// Reads a constraint file: one document id per line, blanks skipped.
fn load_doc_set(path: &Path) -> Result<BTreeSet<String>, HarnessError> {
    let io = |source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = std::fs::File::open(path).map_err(io)?;
    let mut docs = BTreeSet::new();
    for line in std::io::BufReader::new(file).lines() {
        let line = line.map_err(io)?;
        let doc = line.trim();
        if !doc.is_empty() {
            docs.insert(doc.to_string());
        }
    }
    Ok(docs)
}

/// Union of the qids of two runs, in lexicographic order.
fn union_qids(a: &GoldRun, b: &GoldRun) -> Vec<String> {
    let mut qids: BTreeSet<String> = a.qids().map(str::to_string).collect();
    qids.extend(b.qids().map(str::to_string));
    qids.into_iter().collect()
}

fn ranking_or_empty(run: &GoldRun, qid: &str) -> Ranking {
    run.as_ranking(qid)
        .unwrap_or_else(|| Ranking::new(qid, Vec::new()).expect("empty ranking"))
}

fn cmd_med(
    run_a: &Path,
    run_b: &Path,
    metric: &str,
    force_relevant: Option<&Path>,
    force_nonrelevant: Option<&Path>,
    out: &Path,
) -> Result<(), CliError> {
    let profile = WeightProfile::parse(metric).map_err(usage)?;
    let a = parse_trec_run(run_a).map_err(data)?;
    let b = parse_trec_run(run_b).map_err(data)?;
    let constraints = MedConstraints {
        forced_relevant: force_relevant
            .map(load_doc_set)
            .transpose()
            .map_err(data)?
            .unwrap_or_default(),
        forced_nonrelevant: force_nonrelevant
            .map(load_doc_set)
            .transpose()
            .map_err(data)?
            .unwrap_or_default(),
    };

    let mut rows = Vec::new();
    let mut total = 0.0;
    for qid in union_qids(&a, &b) {
        let result = med(
            &ranking_or_empty(&a, &qid),
            &ranking_or_empty(&b, &qid),
            profile,
            &constraints,
        )
        .map_err(data)?;
        total += result.value;
        let direction = match result.direction {
            Direction::AOverB => "a_over_b",
            Direction::BOverA => "b_over_a",
        };
        rows.push((qid, result.value, direction));
    }
    if rows.is_empty() {
        return Err(CliError::Data("no queries in either run".to_string()));
    }

    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["qid", "med", "direction"])
        .map_err(data)?;
    for (qid, value, direction) in &rows {
        writer
            .write_record([qid.as_str(), &fmt_sig(*value), direction])
            .map_err(data)?;
    }
    let buf = writer.into_inner().expect("csv buffer");
    std::fs::write(out, buf).map_err(|source| {
        data(HarnessError::Io {
            path: out.display().to_string(),
            source,
        })
    })?;
    println!(
        "mean med {} over {} queries, wrote {}",
        fmt_sig(total / rows.len() as f64),
        rows.len(),
        out.display()
    );
    Ok(())
}

fn cmd_rbo(run_a: &Path, run_b: &Path, p: f64) -> Result<(), CliError> {
    let a = parse_trec_run(run_a).map_err(data)?;
    let b = parse_trec_run(run_b).map_err(data)?;
    println!("qid,base,residual,ext");
    for qid in union_qids(&a, &b) {
        let result = rbo(&ranking_or_empty(&a, &qid), &ranking_or_empty(&b, &qid), p)
            .map_err(usage)?;
        println!(
            "{qid},{},{},{}",
            fmt_sig(result.base),
            fmt_sig(result.residual),
            fmt_sig(result.ext)
        );
    }
    Ok(())
}

fn cmd_overlap(run_a: &Path, run_b: &Path, variant: &str, k: usize) -> Result<(), CliError> {
    let variant = OverlapVariant::parse(variant).ok_or_else(|| {
        CliError::Usage(format!(
            "unknown overlap variant {variant:?} (expected jaccard, min_denominator, \
             or coverage_a_in_b)"
        ))
    })?;
    let a = parse_trec_run(run_a).map_err(data)?;
    let b = parse_trec_run(run_b).map_err(data)?;
    let top_k = |run: &GoldRun, qid: &str| -> BTreeSet<String> {
        run.ranking(qid)
            .unwrap_or(&[])
            .iter()
            .take(k)
            .map(|(doc, _)| doc.clone())
            .collect()
    };
    println!("qid,overlap");
    for qid in a.qids() {
        if b.ranking(&qid).is_none() {
            continue;
        }
        let value = overlap(&top_k(&a, &qid), &top_k(&b, &qid), variant).map_err(data)?;
        println!("{qid},{}", fmt_sig(value));
    }
    Ok(())
}

fn cmd_evaluate(run_path: &Path, qrels_path: &Path, metric: &str) -> Result<(), CliError> {
    let spec = MetricSpec::parse(metric).map_err(usage)?;
    let run = parse_trec_run(run_path).map_err(data)?;
    let (qrels, overridden) = parse_qrels(qrels_path).map_err(data)?;
    if overridden > 0 {
        eprintln!("note: {overridden} qrels entries overridden by later duplicates");
    }
    let mut total = 0.0;
    let mut count = 0usize;
    let mut no_relevant = 0usize;
    println!("qid,value,residual");
    for qid in run.qids() {
        let ranking = run.as_ranking(qid).expect("qid from run");
        let score = evaluate(&spec, &ranking, &qrels);
        total += score.value;
        count += 1;
        no_relevant += score.no_relevant as usize;
        println!("{qid},{},{}", fmt_sig(score.value), fmt_sig(score.residual));
    }
    if count == 0 {
        return Err(CliError::Data("run file has no queries".to_string()));
    }
    println!("mean,{},", fmt_sig(total / count as f64));
    if no_relevant > 0 {
        eprintln!("note: {no_relevant} queries had no relevant judged documents");
    }
    Ok(())
}

struct SweepArgs {
    index: PathBuf,
    queries: PathBuf,
    gold: PathBuf,
    methods: String,
    depths: String,
    thetas: String,
    metric: String,
    final_ms_per_doc: f64,
    timing_repeats: usize,
    out_summary: PathBuf,
    out_per_query: PathBuf,
}

fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    let methods: Vec<FilterMethod> = args
        .methods
        .split(',')
        .map(|s| s.trim().parse().map_err(CliError::Usage))
        .collect::<Result<_, _>>()?;
    let depths: Vec<usize> = args
        .depths
        .split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("bad depth {s:?}")))
        })
        .collect::<Result<_, _>>()?;
    if depths.is_empty() || depths.iter().any(|&d| d == 0) {
        return Err(CliError::Usage("depths must be positive".to_string()));
    }
    if depths.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::Usage(
            "depths must be strictly ascending".to_string(),
        ));
    }
    let thetas: Vec<f64> = args
        .thetas
        .split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("bad theta {s:?}")))
        })
        .collect::<Result<_, _>>()?;
    if thetas.iter().any(|&t| t < 1.0) {
        return Err(CliError::Usage("thetas must be at least 1.0".to_string()));
    }
    let profile = WeightProfile::parse(&args.metric).map_err(usage)?;
    if args.timing_repeats == 0 {
        return Err(CliError::Usage(
            "timing-repeats must be positive".to_string(),
        ));
    }

    let mut filter_specs = Vec::new();
    for &method in &methods {
        if method == FilterMethod::Wand {
            for &theta in &thetas {
                filter_specs.push(FilterSpec {
                    method,
                    k: 0,
                    theta,
                });
            }
        } else {
            filter_specs.push(FilterSpec::new(method, 0));
        }
    }

    let index = load_index(&args.index).map_err(data)?;
    let queries = parse_queries(&args.queries).map_err(data)?;
    let gold = parse_trec_run(&args.gold).map_err(data)?;
    let config = SweepConfig {
        queries: &queries,
        gold: &gold,
        filter_specs,
        depths,
        profile,
        timing_repeats: args.timing_repeats,
        final_ms_per_doc: args.final_ms_per_doc,
    };
    let records = sweep(&index, &config);
    emit_csv(&records, &args.out_summary).map_err(data)?;
    emit_per_query_csv(&records, &args.out_per_query).map_err(data)?;
    println!(
        "swept {} grid cells over {} queries, wrote {} and {}",
        records.len(),
        queries.len(),
        args.out_summary.display(),
        args.out_per_query.display()
    );
    Ok(())
}

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ontogram::induction::{
    history_csv, run_scripted, DecisionScript, InductionSession, IterationStats, LayerPriority,
    Mode, SessionConfig,
};
use ontogram::ontology::{
    extract_instances, extract_taxonomy, infer_relations, instance_priority, read_triples,
    write_triples, TaxonomyConfig,
};
use ontogram::parser::{corpus_stats, write_tree_dump, ParserConfig};
use ontogram::relext::{
    cross_validate, predict, prepare, read_relations, render_report, train_relation, DateStyle,
    EvalConfig, MatchConfig, ModelKind, RelextError, Scope, TrainConfig,
};
use ontogram::{Parser as GrammarParser, Property};

use crate::service::{self, ServeOptions};
use crate::{
    read_corpus, read_grammar, read_trees, trees_from_outcomes, ModelFile, PredicateModel,
};

#[derive(Debug, Parser)]
#[command(
    name = "ontogram",
    version,
    about = "Grammar and ontology induction over layered text"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a corpus and write the tree dump and statistics.
    Parse(ParseArgs),
    /// Run a rule induction session: interactive, scripted or served over HTTP.
    Induce(InduceArgs),
    /// Read class and instance rules of a grammar as ontology triples.
    Ontology(OntologyArgs),
    /// Mine frequent instances from the null nodes of a tree dump.
    Instances(InstancesArgs),
    /// Train relation models on every parsed sentence.
    RelexTrain(RelexTrainArgs),
    /// Cross-validate relation models and print the comparison report.
    RelexEval(RelexEvalArgs),
    /// Apply trained relation models to parsed sentences.
    RelexPredict(RelexPredictArgs),
    /// Export the per-iteration statistics of a session checkpoint as CSV.
    Stats(StatsArgs),
}

#[derive(Debug, Args)]
pub struct TreeSource {
    /// Grammar to parse the corpus with.
    #[arg(long, conflicts_with = "trees", required_unless_present = "trees")]
    pub grammar: Option<PathBuf>,
    /// Tree dump written by `parse`.
    #[arg(long)]
    pub trees: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
}

#[derive(Debug, Args)]
pub struct ParseArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub grammar: PathBuf,
    /// Tree dump (JSON Lines); standard output when omitted and no stats are asked for.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print the statistics table.
    #[arg(long)]
    pub stats: bool,
    /// Print statistics as JSON instead of a table.
    #[arg(long, requires = "stats")]
    pub json: bool,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
}

#[derive(Debug, Args)]
pub struct InduceArgs {
    #[arg(long, required_unless_present = "resume")]
    pub corpus: Option<PathBuf>,
    /// Seed grammar.
    #[arg(long, required_unless_present = "resume")]
    pub grammar: Option<PathBuf>,
    /// Decision script with `iteration<TAB>property` lines.
    #[arg(long, conflicts_with = "serve")]
    pub decisions: Option<PathBuf>,
    /// Serve the session over HTTP at this address.
    #[arg(long, env = "ONTOGRAM_BIND", num_args = 0..=1, default_missing_value = "127.0.0.1:8080")]
    pub serve: Option<String>,
    /// Session id reported by the service and used in decision tokens.
    #[arg(long, default_value = "session")]
    pub session_id: String,
    #[arg(long)]
    pub max_iter: Option<u32>,
    /// Wall-clock budget in seconds, checked between iterations.
    #[arg(long)]
    pub time_budget: Option<f64>,
    /// Rules accepted as positive without review after a stop criterion is met.
    #[arg(long, default_value_t = 0)]
    pub auto: u32,
    /// Directory for the session state, written after every decision.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Resume from a checkpoint directory.
    #[arg(long, requires = "corpus")]
    pub resume: Option<PathBuf>,
    /// Final grammar.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-iteration statistics as CSV.
    #[arg(long)]
    pub history: Option<PathBuf>,
    /// Decision log.
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Layer priority for generalization, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub layers: Option<Vec<String>>,
}

#[derive(Debug, Args)]
pub struct OntologyArgs {
    #[arg(long)]
    pub grammar: PathBuf,
    /// Seed ontology triples; enables relation inference.
    #[arg(long)]
    pub seed_ontology: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InstancesArgs {
    #[arg(long)]
    pub trees: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub min_frequency: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ScopeArg {
    Leaves,
    Nodes,
}

impl From<ScopeArg> for Scope {
    fn from(s: ScopeArg) -> Self {
        match s {
            ScopeArg::Leaves => Scope::Leaves,
            ScopeArg::Nodes => Scope::Nodes,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum DateStyleArg {
    DayMonthYear,
    MonthDayYear,
}

impl From<DateStyleArg> for DateStyle {
    fn from(s: DateStyleArg) -> Self {
        match s {
            DateStyleArg::DayMonthYear => DateStyle::DayMonthYear,
            DateStyleArg::MonthDayYear => DateStyle::MonthDayYear,
        }
    }
}

#[derive(Debug, Args)]
pub struct RelationArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Known relations, `predicate<TAB>subject<TAB>value<TAB>kind` per line.
    #[arg(long)]
    pub relations: PathBuf,
    #[command(flatten)]
    pub trees: TreeSource,
    #[arg(long, value_enum, default_value = "nodes")]
    pub scope: ScopeArg,
    #[arg(long, value_enum, default_value = "day-month-year")]
    pub date_style: DateStyleArg,
    #[arg(long, default_value = "instance")]
    pub resource_layer: String,
    /// Negative candidates sampled per positive for the linear models.
    #[arg(long, default_value_t = 10)]
    pub negative_ratio: usize,
    #[arg(long, default_value_t = 1.0)]
    pub l2: f64,
    /// Gradient descent passes for the linear models.
    #[arg(long, default_value_t = 500)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl RelationArgs {
    fn matching(&self) -> MatchConfig {
        MatchConfig {
            resource_layer: self.resource_layer.clone(),
            date_style: self.date_style.into(),
        }
    }

    fn train(&self) -> TrainConfig {
        TrainConfig {
            l2: self.l2,
            epochs: self.epochs,
            negative_ratio: self.negative_ratio,
            seed: self.seed,
            scope: self.scope.into(),
            ..TrainConfig::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct RelexTrainArgs {
    #[command(flatten)]
    pub data: RelationArgs,
    #[arg(long, default_value = "lrcl")]
    pub model_kind: ModelKind,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RelexEvalArgs {
    #[command(flatten)]
    pub data: RelationArgs,
    /// Models to compare, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "basic,net,lr,lrc,lrcl")]
    pub models: Vec<ModelKind>,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RelexPredictArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Model file written by `relex-train`.
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub trees: TreeSource,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Session checkpoint directory.
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Parse(a) => parse(a),
        Command::Induce(a) => induce(a),
        Command::Ontology(a) => ontology(a),
        Command::Instances(a) => instances(a),
        Command::RelexTrain(a) => relex_train(a),
        Command::RelexEval(a) => relex_eval(a),
        Command::RelexPredict(a) => relex_predict(a),
        Command::Stats(a) => stats(a),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn parse(a: ParseArgs) -> Result<()> {
    let corpus = read_corpus(&a.corpus)?;
    let grammar = read_grammar(&a.grammar)?;
    let parser = GrammarParser::new(&grammar, ParserConfig::default());
    let outcomes = parser.parse_corpus(&corpus, a.workers);
    if a.out.is_some() || !a.stats {
        emit(a.out.as_deref(), &write_tree_dump(&outcomes))?;
    }
    if a.stats {
        let stats = corpus_stats(&outcomes)?;
        if a.json {
            println!("{}", serde_json::to_string_pretty(&stats)?);
        } else {
            print!("{stats}");
        }
    }
    Ok(())
}

fn session_config(a: &InduceArgs) -> SessionConfig {
    let mut cfg = SessionConfig {
        seed: a.seed,
        workers: a.workers,
        max_iterations: a.max_iter,
        auto_iterations: a.auto,
        ..SessionConfig::default()
    };
    if let Some(b) = a.time_budget {
        cfg.time_budget = Some(Duration::from_secs_f64(b));
    }
    if let Some(layers) = &a.layers {
        cfg.priority = LayerPriority::new(layers.iter().cloned());
    }
    cfg
}

fn open_session(a: &InduceArgs) -> Result<InductionSession> {
    let corpus_path = a.corpus.as_ref().expect("clap requires a corpus");
    let corpus = Arc::new(read_corpus(corpus_path)?);
    if let Some(dir) = &a.resume {
        let mut s = InductionSession::resume(dir, corpus)
            .with_context(|| format!("resuming from {}", dir.display()))?;
        if a.max_iter.is_some() {
            s.set_max_iterations(a.max_iter);
        }
        return Ok(s);
    }
    let grammar = read_grammar(a.grammar.as_ref().expect("clap requires a grammar"))?;
    Ok(InductionSession::new(grammar, corpus, session_config(a)))
}

fn write_outputs(session: &InductionSession, a: &InduceArgs) -> Result<()> {
    if let Some(dir) = &a.checkpoint {
        session.save_checkpoint(dir)?;
    }
    if let Some(p) = &a.out {
        fs::write(p, session.grammar().to_text())
            .with_context(|| format!("writing {}", p.display()))?;
    }
    if let Some(p) = &a.history {
        fs::write(
            p,
            history_with_baseline(session.baseline(), session.history()),
        )?;
    }
    if let Some(p) = &a.log {
        fs::write(p, ontogram::induction::decision_log(session.decisions()))?;
    }
    Ok(())
}

/// History CSV with the statistics before the first decision as its first row.
pub fn history_with_baseline(
    baseline: Option<&IterationStats>,
    series: &[IterationStats],
) -> String {
    history_csv(baseline.into_iter().chain(series))
}

fn induce(a: InduceArgs) -> Result<()> {
    let mut session = open_session(&a)?;
    if let Some(addr) = a.serve.clone() {
        return serve(session, &a, &addr);
    }
    let checkpoint = a.checkpoint.clone();
    let save = |s: &InductionSession| match &checkpoint {
        Some(dir) => s.save_checkpoint(dir),
        None => Ok(()),
    };
    if let Some(path) = &a.decisions {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let script: DecisionScript = text.parse()?;
        run_scripted(&mut session, &script, save)?;
    } else {
        interactive(&mut session, &a)?;
    }
    write_outputs(&session, &a)?;
    let reason = session
        .stop_reason()
        .map_or_else(|| "paused".to_string(), |r| r.to_string());
    eprintln!(
        "{} decisions, {} rules, {reason}",
        session.iteration(),
        session.grammar().len()
    );
    if a.out.is_none() {
        print!("{}", session.grammar().to_text());
    }
    Ok(())
}

fn interactive(session: &mut InductionSession, a: &InduceArgs) -> Result<()> {
    let stdin = io::stdin();
    let mut lines = stdin.lock().lines();
    loop {
        match session.mode() {
            Mode::Stopped => break,
            Mode::Auto => {
                session.run_auto()?;
                continue;
            }
            Mode::Manual => {}
        }
        if session.pending().is_none() && session.run_iteration()?.is_none() {
            break;
        }
        let c = session.pending().expect("candidate pending").clone();
        let corpus = Arc::clone(session.corpus());
        eprintln!(
            "\n[{}] {}  (frequency {})",
            session.iteration() + 1,
            c.text(),
            c.frequency
        );
        for n in &c.samples {
            if let Some(s) = corpus.get(&n.sentence) {
                let w = s.words();
                eprintln!(
                    "  {} [{}] {} [/{}] {}",
                    w[..n.span.start].join(" "),
                    n.class,
                    s.text(n.span),
                    n.class,
                    w[n.span.end..].join(" ")
                );
            }
        }
        let property = loop {
            eprint!("(p)ositive (n)eutral negative(x) non-(i)nducible (q)uit > ");
            io::stderr().flush()?;
            let Some(line) = lines.next() else {
                return Ok(());
            };
            match line?.trim() {
                "p" => break Property::Positive,
                "n" => break Property::Neutral,
                "x" => break Property::Negative,
                "i" => break Property::NonInducible,
                "q" => return Ok(()),
                other => match other.parse::<Property>() {
                    Ok(p) => break p,
                    Err(_) => eprintln!("unrecognized answer `{other}`"),
                },
            }
        };
        session.apply_decision(property)?;
        if let Some(dir) = &a.checkpoint {
            session.save_checkpoint(dir)?;
        }
    }
    Ok(())
}

fn serve(session: InductionSession, a: &InduceArgs, addr: &str) -> Result<()> {
    let opts = ServeOptions {
        session_id: a.session_id.clone(),
        corpus_path: a
            .corpus
            .as_ref()
            .map(|p| p.display().to_string())
            .unwrap_or_default(),
        grammar_path: a
            .grammar
            .as_ref()
            .or(a.resume.as_ref())
            .map(|p| p.display().to_string())
            .unwrap_or_default(),
        checkpoint: a.checkpoint.clone(),
    };
    let (router, handle) = service::spawn(session, opts);
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .with_context(|| format!("binding {addr}"))?;
        eprintln!("serving on http://{}", listener.local_addr()?);
        service::serve(listener, router).await?;
        anyhow::Ok(())
    })?;
    if let Some(session) = handle.shutdown() {
        write_outputs(&session, a)?;
    }
    Ok(())
}

fn ontology(a: OntologyArgs) -> Result<()> {
    let grammar = read_grammar(&a.grammar)?;
    let mut assertions = extract_taxonomy(&grammar, &TaxonomyConfig::default());
    if let Some(p) = &a.seed_ontology {
        let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        let seed = read_triples(&text)?;
        let inference = infer_relations(&assertions, &seed);
        for cycle in &inference.cycles {
            eprintln!("warning: subClassOf cycle through {}", cycle.join(", "));
        }
        assertions.extend(inference.assertions);
    }
    emit(a.out.as_deref(), &write_triples(&assertions))
}

fn instances(a: InstancesArgs) -> Result<()> {
    let corpus = read_corpus(&a.corpus)?;
    let text =
        fs::read_to_string(&a.trees).with_context(|| format!("reading {}", a.trees.display()))?;
    let records = ontogram::parser::read_tree_dump(&text).map_err(anyhow::Error::msg)?;
    let nodes: Vec<_> = records.into_iter().flat_map(|r| r.induction).collect();
    let found = extract_instances(
        &nodes,
        &corpus,
        a.min_frequency,
        &instance_priority(),
        &TaxonomyConfig::default(),
    );
    emit(a.out.as_deref(), &write_triples(&found))
}

struct RelationInputs {
    corpus: ontogram::Corpus,
    trees: std::collections::HashMap<String, ontogram::parser::SemanticNode>,
    prepared: ontogram::relext::Prepared,
}

fn load_trees(
    corpus: &ontogram::Corpus,
    source: &TreeSource,
) -> Result<std::collections::HashMap<String, ontogram::parser::SemanticNode>> {
    match (&source.grammar, &source.trees) {
        (_, Some(t)) => read_trees(t),
        (Some(g), None) => {
            let grammar = read_grammar(g)?;
            let parser = GrammarParser::new(&grammar, ParserConfig::default());
            Ok(trees_from_outcomes(
                &parser.parse_corpus(corpus, source.workers),
            ))
        }
        (None, None) => bail!("either --grammar or --trees is needed"),
    }
}

fn relation_inputs(a: &RelationArgs) -> Result<RelationInputs> {
    let corpus = read_corpus(&a.corpus)?;
    let text = fs::read_to_string(&a.relations)
        .with_context(|| format!("reading {}", a.relations.display()))?;
    let examples = read_relations(&text)?;
    let trees = load_trees(&corpus, &a.trees)?;
    let prepared = prepare(&examples, &corpus, &trees, &a.matching());
    Ok(RelationInputs {
        corpus,
        trees,
        prepared,
    })
}

fn relex_train(a: RelexTrainArgs) -> Result<()> {
    let inputs = relation_inputs(&a.data)?;
    let cfg = a.data.train();
    let mut predicates = BTreeMap::new();
    for predicate in inputs.prepared.predicates() {
        let arity = inputs
            .prepared
            .examples
            .iter()
            .find(|e| e.example.predicate == predicate)
            .map_or(1, |e| e.example.arguments.len());
        match train_relation(
            a.model_kind,
            predicate,
            &inputs.prepared,
            &inputs.corpus,
            &inputs.trees,
            &cfg,
        ) {
            Ok(model) => {
                predicates.insert(predicate.to_string(), PredicateModel { arity, model });
            }
            Err(e @ (RelextError::NoPositives | RelextError::NoNegatives(_))) => {
                eprintln!("skipping {predicate}: {e}");
            }
            Err(e) => return Err(e.into()),
        }
    }
    let file = ModelFile {
        kind: a.model_kind.name().to_string(),
        scope: cfg.scope,
        predicates,
    };
    fs::write(&a.out, serde_json::to_string_pretty(&file)?)
        .with_context(|| format!("writing {}", a.out.display()))
}

fn relex_eval(a: RelexEvalArgs) -> Result<()> {
    let inputs = relation_inputs(&a.data)?;
    let cfg = EvalConfig {
        matching: a.data.matching(),
        train: a.data.train(),
        folds: a.folds,
        seed: a.data.seed,
    };
    let reports = a
        .models
        .iter()
        .map(|&kind| cross_validate(kind, &inputs.prepared, &inputs.corpus, &inputs.trees, &cfg))
        .collect::<Result<Vec<_>, _>>()?;
    let report = render_report(&reports, &inputs.prepared.conversion());
    emit(a.out.as_deref(), &report)
}

fn relex_predict(a: RelexPredictArgs) -> Result<()> {
    let corpus = read_corpus(&a.corpus)?;
    let text =
        fs::read_to_string(&a.model).with_context(|| format!("reading {}", a.model.display()))?;
    let file: ModelFile = serde_json::from_str(&text).context("reading model file")?;
    let trees = load_trees(&corpus, &a.trees)?;
    let mut out = String::from("# predicate\tsentence\targuments\n");
    for s in corpus.sentences() {
        let Some(root) = trees.get(s.id()) else {
            continue;
        };
        for (predicate, m) in &file.predicates {
            for spans in predict(&m.model, root, s, m.arity, file.scope) {
                let args: Vec<String> = spans.iter().map(|sp| s.text(*sp)).collect();
                out.push_str(&format!("{predicate}\t{}\t{}\n", s.id(), args.join("\t")));
            }
        }
    }
    emit(a.out.as_deref(), &out)
}

#[derive(serde::Deserialize)]
struct CheckpointSeries {
    #[serde(default)]
    baseline: Option<IterationStats>,
    #[serde(default)]
    history: Vec<IterationStats>,
}

fn stats(a: StatsArgs) -> Result<()> {
    let path = a.checkpoint.join("session.json");
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let series: CheckpointSeries = serde_json::from_str(&text).context("reading session state")?;
    emit(
        a.out.as_deref(),
        &history_with_baseline(series.baseline.as_ref(), &series.history),
    )
}

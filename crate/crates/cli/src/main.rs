//! `vecdcs` command-line pipeline: convert, build-vocab, train, compose,
//! nearest, the three evaluations, and a synthetic-corpus generator.

mod config;

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use vecdcs::dcs::{parse_tree_literal, DcsTree, Pos};
use vecdcs::eval::{
    eval_completion, eval_phrase_pairs, export_features, read_completion_items, read_phrase_pairs,
    read_relation_instances, relation_features, write_relation_instance, CompletionOptions,
};
use vecdcs::model::{load_model, save_model, Model};
use vecdcs::synth::{generate, SynthConfig};
use vecdcs::train::{train_with, Mode, TrainError};
use vecdcs::ud::{parse_conllu, ud_to_dcs, write_conllu_sentence};
use vecdcs::vocab::{build_vocab, Vocabulary};

use config::CliConfig;

#[derive(Parser)]
#[command(name = "vecdcs", version, about = "Train and query vector-based DCS models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// `key = value` file; flags take precedence over it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Training threads.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct ModelInput {
    /// Model file written by `train`.
    #[arg(long, short)]
    model: PathBuf,
    /// Use the stored parameters without normalizing them.
    #[arg(long)]
    raw: bool,
    /// Fail on out-of-vocabulary words instead of using `*UNKNOWN*`.
    #[arg(long)]
    strict_oov: bool,
}

#[derive(Args)]
struct TreeInput {
    /// Tree literal, e.g. `ban/V -COMP:ARG-> drug/N`.
    literal: Option<String>,
    /// File of tree lines, one query per line.
    #[arg(long, conflicts_with = "literal")]
    trees: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Convert CoNLL-U sentences to DCS tree lines.
    Convert {
        /// CoNLL-U file.
        input: PathBuf,
        /// Tree lines are written here.
        #[arg(long, short)]
        output: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Count words and fields and write a vocabulary file.
    BuildVocab {
        /// File of tree lines.
        trees: PathBuf,
        /// Vocabulary file to write.
        #[arg(long, short)]
        output: PathBuf,
        /// Words with a smaller expected endpoint count become `*UNKNOWN*/POS` [default: 1000].
        #[arg(long)]
        word_min: Option<f64>,
        /// Prepositions with a smaller count become the `*UNKNOWN*` field [default: 10000].
        #[arg(long)]
        prep_min: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Train vectors and matrices on sampled paths.
    Train {
        /// File of tree lines.
        trees: PathBuf,
        /// Vocabulary file from `build-vocab`.
        #[arg(long)]
        vocab: PathBuf,
        /// Model file to write.
        #[arg(long, short)]
        output: PathBuf,
        #[command(flatten)]
        flags: TrainFlags,
        #[command(flatten)]
        common: Common,
    },
    /// Print the composed query vector of a tree.
    Compose {
        #[command(flatten)]
        model: ModelInput,
        #[command(flatten)]
        tree: TreeInput,
        #[command(flatten)]
        common: Common,
    },
    /// Rank answer words for a composed query.
    Nearest {
        #[command(flatten)]
        model: ModelInput,
        #[command(flatten)]
        tree: TreeInput,
        /// Number of answers [default: 10].
        #[arg(long, short)]
        k: Option<usize>,
        /// Only rank words with this part of speech (N, V, J, P, R, X).
        #[arg(long)]
        pos: Option<Pos>,
        /// Keep the query's own words and the `*UNKNOWN*` placeholders.
        #[arg(long)]
        all: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Spearman correlation on phrase-similarity pairs.
    EvalPhrase {
        #[command(flatten)]
        model: ModelInput,
        /// `construction<TAB>phrase<TAB>phrase<TAB>score` rows.
        pairs: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Accuracy on five-choice sentence completion.
    EvalCompletion {
        #[command(flatten)]
        model: ModelInput,
        /// JSON-lines completion items.
        items: PathBuf,
        /// Sum log-probabilities over paths instead of the weighted mean.
        #[arg(long)]
        unweighted_sum: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Write relation features in sparse `label index:value` format.
    ExportFeatures {
        #[command(flatten)]
        model: ModelInput,
        /// `label<TAB>e1<TAB>e2<TAB>tree line` rows.
        instances: PathBuf,
        /// Feature file to write.
        #[arg(long, short)]
        output: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Write a synthetic toy world: corpus, queries, completion items, relations.
    GenSynthetic {
        /// Directory for corpus.conllu, queries.tsv, completion.jsonl and relations.tsv.
        #[arg(long, short)]
        out_dir: PathBuf,
        /// Number of corpus sentences [default: 20000].
        #[arg(long)]
        sentences: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct TrainFlags {
    /// Vector dimension [default: 250].
    #[arg(long, short)]
    dim: Option<usize>,
    /// Passes over the corpus [default: 5].
    #[arg(long)]
    epochs: Option<usize>,
    /// Initial vector learning rate [default: 0.1].
    #[arg(long)]
    lr_vec: Option<f64>,
    /// Initial matrix learning rate [default: 0.0005].
    #[arg(long)]
    lr_mat: Option<f64>,
    /// Weight of the inverse regularizer [default: 0.001].
    #[arg(long)]
    gamma: Option<f64>,
    /// Weight of the orthogonality regularizer [default: 0.0001].
    #[arg(long)]
    kappa: Option<f64>,
    /// Noise samples per positive path [default: 1].
    #[arg(long)]
    noise: Option<usize>,
    /// Vector gradients longer than this are rescaled [default: 1.0].
    #[arg(long)]
    clip_norm_vec: Option<f64>,
    /// Matrix gradients longer than this are rescaled [default: 0.1].
    #[arg(long)]
    clip_norm_mat: Option<f64>,
    /// full, no_matrix or no_inverse.
    #[arg(long)]
    mode: Option<Mode>,
    /// Keep learning rates constant.
    #[arg(long)]
    no_lr_decay: bool,
}

/// An error and its exit code.
struct Failure {
    code: u8,
    kind: &'static str,
    err: anyhow::Error,
}

fn input(err: impl Into<anyhow::Error>) -> Failure {
    Failure { code: 2, kind: "input", err: err.into() }
}

fn runtime(err: impl Into<anyhow::Error>) -> Failure {
    Failure { code: 1, kind: "runtime", err: err.into() }
}

type Res<T> = Result<T, Failure>;

fn open(path: &Path) -> Res<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .with_context(|| format!("cannot open {}", path.display()))
        .map_err(input)
}

fn create(path: &Path) -> Res<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .with_context(|| format!("cannot create {}", path.display()))
        .map_err(runtime)
}

fn settings(common: &Common) -> Res<CliConfig> {
    let mut cfg = CliConfig::load(common.config.as_deref()).map_err(input)?;
    if let Some(s) = common.seed {
        cfg.train.seed = s;
    }
    if let Some(w) = common.workers {
        cfg.train.workers = w;
    }
    Ok(cfg)
}

fn read_trees(path: &Path) -> Res<Vec<DcsTree>> {
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(input)?;
        if line.trim().is_empty() {
            continue;
        }
        let t = DcsTree::from_line(&line)
            .with_context(|| format!("{}:{}", path.display(), i + 1))
            .map_err(input)?;
        out.push(t);
    }
    Ok(out)
}

fn load(m: &ModelInput) -> Res<Model> {
    let mut model = load_model(open(&m.model)?)
        .with_context(|| format!("loading {}", m.model.display()))
        .map_err(input)?;
    if !m.raw {
        model.normalize().map_err(runtime)?;
    }
    Ok(model)
}

fn query_trees(t: &TreeInput) -> Res<Vec<DcsTree>> {
    match (&t.literal, &t.trees) {
        (Some(lit), None) => Ok(vec![parse_tree_literal(lit).map_err(input)?]),
        (None, Some(path)) => read_trees(path),
        _ => Err(input(anyhow!("give a tree literal or --trees FILE"))),
    }
}

fn cmd_convert(input_path: &Path, output: &Path) -> Res<()> {
    let sentences = parse_conllu(open(input_path)?)
        .with_context(|| input_path.display().to_string())
        .map_err(input)?;
    if sentences.is_empty() {
        log::warn!("{} contains no sentences", input_path.display());
    }
    let mut out = create(output)?;
    let mut converted = 0;
    for s in &sentences {
        if let Some(c) = ud_to_dcs(s) {
            writeln!(out, "{}", c.tree.to_line()).map_err(runtime)?;
            converted += 1;
        }
    }
    out.flush().map_err(runtime)?;
    println!("sentences\t{}", sentences.len());
    println!("converted\t{converted}");
    println!("skipped\t{}", sentences.len() - converted);
    Ok(())
}

fn cmd_build_vocab(trees: &Path, output: &Path, cfg: &CliConfig) -> Res<()> {
    let corpus = read_trees(trees)?;
    let vocab = build_vocab(&corpus, cfg.word_min, cfg.prep_min).map_err(input)?;
    let mut out = create(output)?;
    vocab.write(&mut out).and_then(|_| out.flush()).map_err(runtime)?;
    println!("words\t{}", vocab.num_words());
    println!("fields\t{}", vocab.num_fields());
    Ok(())
}

fn cmd_train(trees: &Path, vocab: &Path, output: &Path, cfg: &CliConfig) -> Res<()> {
    let corpus = read_trees(trees)?;
    let vocab = Vocabulary::read(open(vocab)?)
        .with_context(|| vocab.display().to_string())
        .map_err(input)?;
    let (params, stats) = train_with(&corpus, &vocab, &cfg.train, |e| println!("{}", e.log_line())).map_err(|e| match e {
        TrainError::InvalidConfig(_) | TrainError::EmptyCorpus => input(e),
        _ => runtime(e),
    })?;
    let model = Model::new(vocab, params);
    let mut out = create(output)?;
    save_model(&model, &mut out).and_then(|_| out.flush()).map_err(runtime)?;
    log::info!("trained on {} trees, skipped {}, {} steps", stats.trees - stats.skipped_trees, stats.skipped_trees, stats.steps);
    Ok(())
}

fn cmd_compose(m: &ModelInput, t: &TreeInput, cfg: &CliConfig) -> Res<()> {
    let model = load(m)?;
    let strict = m.strict_oov || cfg.strict_oov;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    for tree in query_trees(t)? {
        let q = model.compose_query(&tree, strict).map_err(input)?;
        let cells: Vec<String> = q.iter().map(f64::to_string).collect();
        writeln!(out, "{}", cells.join(" ")).map_err(runtime)?;
    }
    Ok(())
}

fn cmd_nearest(m: &ModelInput, t: &TreeInput, pos: Option<Pos>, all: bool, cfg: &CliConfig) -> Res<()> {
    let model = load(m)?;
    let strict = m.strict_oov || cfg.strict_oov;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let trees = query_trees(t)?;
    for (n, tree) in trees.iter().enumerate() {
        if n > 0 {
            writeln!(out).map_err(runtime)?;
        }
        let q = model.compose_query(tree, strict).map_err(input)?;
        let ranked = if all {
            model.nearest_answers(&q, cfg.k, pos)
        } else {
            model.nearest_known_answers(&q, cfg.k, pos, tree.nodes())
        };
        for (w, s) in ranked {
            writeln!(out, "{w}\t{s:.6}").map_err(runtime)?;
        }
    }
    Ok(())
}

fn cmd_eval_phrase(m: &ModelInput, pairs: &Path, cfg: &CliConfig) -> Res<()> {
    let model = load(m)?;
    let rows = read_phrase_pairs(open(pairs)?)
        .with_context(|| pairs.display().to_string())
        .map_err(input)?;
    if rows.is_empty() {
        return Err(input(anyhow!("{} has no phrase pairs", pairs.display())));
    }
    let results = eval_phrase_pairs(&model, &rows, m.strict_oov || cfg.strict_oov).map_err(input)?;
    for r in results {
        println!("{}\t{}\t{:.4}", r.construction, r.pairs, r.rho);
    }
    Ok(())
}

fn cmd_eval_completion(m: &ModelInput, items: &Path, unweighted_sum: bool, cfg: &CliConfig) -> Res<()> {
    let model = load(m)?;
    let rows = read_completion_items(open(items)?)
        .with_context(|| items.display().to_string())
        .map_err(input)?;
    let opts = CompletionOptions { unweighted_sum, strict: m.strict_oov || cfg.strict_oov };
    let report = eval_completion(&model, &rows, opts).map_err(input)?;
    println!("accuracy\t{:.4}", report.accuracy());
    println!("correct\t{}", report.correct);
    println!("evaluated\t{}", report.evaluated);
    println!("skipped\t{}", report.skipped);
    Ok(())
}

fn cmd_export_features(m: &ModelInput, instances: &Path, output: &Path, cfg: &CliConfig) -> Res<()> {
    let model = load(m)?;
    let rows = read_relation_instances(open(instances)?)
        .with_context(|| instances.display().to_string())
        .map_err(input)?;
    let strict = m.strict_oov || cfg.strict_oov;
    let feats = rows
        .iter()
        .map(|r| Ok((r.label.clone(), relation_features(&model, r, strict).map_err(input)?)))
        .collect::<Res<Vec<_>>>()?;
    let out = create(output)?;
    export_features(&feats, out).map_err(runtime)?;
    println!("instances\t{}", feats.len());
    Ok(())
}

fn cmd_gen_synthetic(out_dir: &Path, sentences: Option<usize>, seed: Option<u64>) -> Res<()> {
    let mut sc = SynthConfig::default();
    if let Some(n) = sentences {
        sc.sentences = n;
    }
    if let Some(s) = seed {
        sc.seed = s;
    }
    let data = generate(&sc);
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create {}", out_dir.display()))
        .map_err(runtime)?;
    let write = |name: &str, body: String| -> Res<()> {
        let p = out_dir.join(name);
        std::fs::write(&p, body)
            .with_context(|| format!("cannot write {}", p.display()))
            .map_err(runtime)
    };
    let mut conllu = String::new();
    for s in &data.sentences {
        write_conllu_sentence(s, &mut conllu);
    }
    write("corpus.conllu", conllu)?;
    let mut queries = String::new();
    for q in &data.queries {
        let gold: Vec<String> = q.gold.iter().map(ToString::to_string).collect();
        queries.push_str(&format!("{}\t{}\n", gold.join(","), q.tree.to_line()));
    }
    write("queries.tsv", queries)?;
    let completion: String = data.completion.iter().map(|c| c.to_json() + "\n").collect();
    write("completion.jsonl", completion)?;
    let relations: String = data.relations.iter().map(|r| write_relation_instance(r) + "\n").collect();
    write("relations.tsv", relations)?;
    println!("sentences\t{}", data.sentences.len());
    println!("queries\t{}", data.queries.len());
    println!("completion\t{}", data.completion.len());
    println!("relations\t{}", data.relations.len());
    Ok(())
}

fn apply_train_flags(cfg: &mut CliConfig, f: &TrainFlags) {
    let t = &mut cfg.train;
    if let Some(v) = f.dim {
        t.dim = v;
    }
    if let Some(v) = f.epochs {
        t.epochs = v;
    }
    if let Some(v) = f.lr_vec {
        t.lr_vec = v;
    }
    if let Some(v) = f.lr_mat {
        t.lr_mat = v;
    }
    if let Some(v) = f.gamma {
        t.gamma = v;
    }
    if let Some(v) = f.kappa {
        t.kappa = v;
    }
    if let Some(v) = f.noise {
        t.noise_per_example = v;
    }
    if let Some(v) = f.clip_norm_vec {
        t.clip_norm_vec = v;
    }
    if let Some(v) = f.clip_norm_mat {
        t.clip_norm_mat = v;
    }
    if let Some(v) = f.mode {
        t.mode = v;
    }
    if f.no_lr_decay {
        t.lr_decay = false;
    }
}

fn run(cli: Cli) -> Res<()> {
    match cli.command {
        Command::Convert { input: i, output, common } => {
            settings(&common)?;
            cmd_convert(&i, &output)
        }
        Command::BuildVocab { trees, output, word_min, prep_min, common } => {
            let mut cfg = settings(&common)?;
            if let Some(v) = word_min {
                cfg.word_min = v;
            }
            if let Some(v) = prep_min {
                cfg.prep_min = v;
            }
            cfg.validate().map_err(input)?;
            cmd_build_vocab(&trees, &output, &cfg)
        }
        Command::Train { trees, vocab, output, flags, common } => {
            let mut cfg = settings(&common)?;
            apply_train_flags(&mut cfg, &flags);
            cfg.validate().map_err(input)?;
            cmd_train(&trees, &vocab, &output, &cfg)
        }
        Command::Compose { model, tree, common } => cmd_compose(&model, &tree, &settings(&common)?),
        Command::Nearest { model, tree, k, pos, all, common } => {
            let mut cfg = settings(&common)?;
            if let Some(k) = k {
                cfg.k = k;
            }
            cfg.validate().map_err(input)?;
            cmd_nearest(&model, &tree, pos, all, &cfg)
        }
        Command::EvalPhrase { model, pairs, common } => cmd_eval_phrase(&model, &pairs, &settings(&common)?),
        Command::EvalCompletion { model, items, unweighted_sum, common } => {
            cmd_eval_completion(&model, &items, unweighted_sum, &settings(&common)?)
        }
        Command::ExportFeatures { model, instances, output, common } => {
            cmd_export_features(&model, &instances, &output, &settings(&common)?)
        }
        Command::GenSynthetic { out_dir, sentences, common } => {
            let cfg = settings(&common)?;
            let seed = common.seed.or(common.config.as_ref().map(|_| cfg.train.seed));
            cmd_gen_synthetic(&out_dir, sentences, seed)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            if !e.use_stderr() {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let rendered = e.render().to_string();
            let first = rendered.lines().next().unwrap_or_default();
            eprintln!("error\tusage\t{}", first.trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let msg = format!("{:#}", f.err).replace('\n', " ");
            eprintln!("error\t{}\t{msg}", f.kind);
            ExitCode::from(f.code)
        }
    }
}

//! `nact` command line: validate, compute, report, synth, diff.
//!
//! Exit codes: 0 success, 1 data failure, 2 usage or environment failure.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::capture::{
    gen_synthetic, write_record, AttentionKind, HiddenKind, ManifestEntry, ModelSpec, RunManifest,
    ValidationConfig, CAPTURE_EXTENSION,
};
use crate::corpus::load_corpus;
use crate::metrics::{scan_file, MetricConfig, MetricRow, SparsityLayerSet, DEFAULT_EPSILON};
use crate::report::{
    diff_tables, read_metrics_csv, write_metrics_csv, write_report, DiffMode, TableId,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DATA: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "nact",
    version,
    about = "Activation capture validation, metrics and reports"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check capture files (or directories of them) against every record invariant.
    Validate {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Compute one metrics row per capture listed in a run manifest.
    Compute(ComputeArgs),
    /// Render report tables from a metrics CSV.
    Report {
        #[arg(long)]
        metrics: PathBuf,
        #[arg(long = "out-dir")]
        out_dir: PathBuf,
        /// Comma-separated table ids; all tables when omitted.
        #[arg(long)]
        tables: Option<String>,
        #[arg(long)]
        charts: bool,
    },
    /// Generate a synthetic capture run for every model x prompt.
    Synth {
        #[arg(long)]
        models: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare the numeric cells of two table CSVs.
    Diff {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        tolerance: f64,
        #[arg(long, default_value = "abs")]
        mode: String,
    },
}

#[derive(Debug, Clone, Args)]
pub struct ComputeArgs {
    #[arg(long)]
    pub captures: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,
    #[arg(long = "layer-set", default_value = "all")]
    pub layer_set: String,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long = "skip-invalid")]
    pub skip_invalid: bool,
}

/// Resolved settings of a metrics run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub capture_dir: PathBuf,
    pub output: PathBuf,
    pub metric: MetricConfig,
    pub jobs: usize,
    pub skip_invalid: bool,
}

impl RunConfig {
    pub fn from_args(args: &ComputeArgs) -> Result<Self, String> {
        let layer_set: SparsityLayerSet = args.layer_set.parse()?;
        let metric = MetricConfig::new(args.epsilon, layer_set).map_err(|e| e.to_string())?;
        let jobs = match args.jobs {
            Some(0) => return Err("--jobs must be >= 1".into()),
            Some(n) => n,
            None => std::thread::available_parallelism().map_or(1, |n| n.get()),
        };
        Ok(Self {
            capture_dir: args.captures.clone(),
            output: args.out.clone(),
            metric,
            jobs,
            skip_invalid: args.skip_invalid,
        })
    }
}

/// Parses `argv` and runs the command, writing to the given streams.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = if code == 0 {
                write!(out, "{}", e.render())
            } else {
                write!(err, "{}", e.render())
            };
            return code;
        }
    };
    match cli.command {
        Command::Validate { paths } => cmd_validate(&paths, out, err),
        Command::Compute(args) => match RunConfig::from_args(&args) {
            Ok(config) => cmd_compute(&config, out, err),
            Err(e) => {
                let _ = writeln!(err, "error: {e}");
                EXIT_USAGE
            }
        },
        Command::Report {
            metrics,
            out_dir,
            tables,
            charts,
        } => cmd_report(&metrics, &out_dir, tables.as_deref(), charts, out, err),
        Command::Synth {
            models,
            corpus,
            seed,
            out: dir,
        } => cmd_synth(&models, &corpus, seed, &dir, out, err),
        Command::Diff {
            a,
            b,
            tolerance,
            mode,
        } => cmd_diff(&a, &b, tolerance, &mode, out, err),
    }
}

fn collect_captures(dir: &Path, found: &mut Vec<PathBuf>) -> std::io::Result<()> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    entries.sort();
    for path in entries {
        if path.is_dir() {
            collect_captures(&path, found)?;
        } else if path.extension().is_some_and(|e| e == CAPTURE_EXTENSION) {
            found.push(path);
        }
    }
    Ok(())
}

pub fn cmd_validate(paths: &[PathBuf], out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let mut files = Vec::new();
    for path in paths {
        if path.is_dir() {
            if let Err(e) = collect_captures(path, &mut files) {
                let _ = writeln!(err, "error: {}: {e}", path.display());
                return EXIT_USAGE;
            }
        } else if path.is_file() {
            files.push(path.clone());
        } else {
            let _ = writeln!(err, "error: {}: no such file or directory", path.display());
            return EXIT_USAGE;
        }
    }
    if files.is_empty() {
        let _ = writeln!(err, "warning: no .{CAPTURE_EXTENSION} files found");
        return EXIT_OK;
    }
    let validation = ValidationConfig::default();
    let metric = MetricConfig::default();
    let mut invalid = 0usize;
    for file in &files {
        match scan_file(file, &metric, &validation) {
            Ok(outcome) if outcome.report.is_empty() => {}
            Ok(outcome) => {
                invalid += 1;
                for v in outcome.report.violations() {
                    let _ = writeln!(out, "{}: {v}", file.display());
                }
            }
            Err(e) => {
                invalid += 1;
                let _ = writeln!(out, "{}: {e}", file.display());
            }
        }
    }
    let _ = writeln!(err, "checked {} files, {invalid} invalid", files.len());
    if invalid == 0 {
        EXIT_OK
    } else {
        EXIT_DATA
    }
}

pub fn cmd_compute(config: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let manifest = match RunManifest::load(&config.capture_dir) {
        Ok(m) => m,
        Err(e) => {
            let _ = writeln!(err, "error: {}: {e}", config.capture_dir.display());
            return EXIT_USAGE;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error: thread pool: {e}");
            return EXIT_USAGE;
        }
    };
    let validation = ValidationConfig::default();
    let results: Vec<Result<MetricRow, String>> = pool.install(|| {
        manifest
            .records
            .par_iter()
            .map(|entry| {
                let path = config.capture_dir.join(&entry.path);
                match scan_file(&path, &config.metric, &validation) {
                    Ok(o) => o.metrics.ok_or_else(|| o.report.to_string()),
                    Err(e) => Err(e.to_string()),
                }
            })
            .collect()
    });
    let mut rows = Vec::with_capacity(results.len());
    let mut invalid = 0usize;
    for (entry, result) in manifest.records.iter().zip(results) {
        match result {
            Ok(row) => rows.push(row),
            Err(msg) => {
                invalid += 1;
                let _ = writeln!(err, "invalid: {}: {msg}", entry.path);
            }
        }
    }
    rows.sort_by(|a, b| {
        (&a.model_name, &a.category, &a.prompt_id).cmp(&(&b.model_name, &b.category, &b.prompt_id))
    });
    let written = File::create(&config.output)
        .map_err(|e| e.to_string())
        .and_then(|f| write_metrics_csv(&rows, BufWriter::new(f)).map_err(|e| e.to_string()));
    if let Err(e) = written {
        let _ = writeln!(err, "error: {}: {e}", config.output.display());
        return EXIT_USAGE;
    }
    let _ = writeln!(
        out,
        "wrote {} rows to {} ({invalid} invalid records skipped)",
        rows.len(),
        config.output.display()
    );
    if invalid > 0 && !config.skip_invalid {
        EXIT_DATA
    } else {
        EXIT_OK
    }
}

pub fn cmd_report(
    metrics: &Path,
    out_dir: &Path,
    tables: Option<&str>,
    charts: bool,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    let tables = match tables {
        None => TableId::ALL.to_vec(),
        Some(list) => match TableId::parse_list(list) {
            Ok(t) if !t.is_empty() => t,
            Ok(_) => {
                let _ = writeln!(err, "error: --tables is empty");
                return EXIT_USAGE;
            }
            Err(e) => {
                let _ = writeln!(err, "error: {e}");
                return EXIT_USAGE;
            }
        },
    };
    let file = match File::open(metrics) {
        Ok(f) => f,
        Err(e) => {
            let _ = writeln!(err, "error: {}: {e}", metrics.display());
            return EXIT_USAGE;
        }
    };
    let rows = match read_metrics_csv(file) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(err, "error: {}: {e}", metrics.display());
            return EXIT_DATA;
        }
    };
    match write_report(out_dir, &rows, &tables, charts) {
        Ok(files) => {
            for f in files {
                let _ = writeln!(out, "{}", out_dir.join(f).display());
            }
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_DATA
        }
    }
}

/// Token count used for synthetic captures: words plus two special tokens.
pub fn synthetic_seq_len(text: &str) -> usize {
    text.split_whitespace().count() + 2
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Per-record seed derived from the run seed and the record identity.
pub fn record_seed(run_seed: u64, model: &str, prompt_id: &str) -> u64 {
    // FNV-1a over "model\0prompt_id"
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for b in model.bytes().chain([0]).chain(prompt_id.bytes()) {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(run_seed ^ splitmix64(h))
}

fn file_stem(model: &str, prompt_id: &str) -> String {
    let slug: String = model
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("{slug}__{prompt_id}")
}

/// `created_utc` for synthetic runs: `SOURCE_DATE_EPOCH` when set, else the Unix epoch.
fn synth_timestamp() -> String {
    let secs = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok())
        .unwrap_or(0);
    chrono::DateTime::from_timestamp(secs, 0)
        .unwrap_or_default()
        .format("%Y-%m-%dT%H:%M:%SZ")
        .to_string()
}

pub fn cmd_synth(
    models: &Path,
    corpus: &Path,
    seed: u64,
    dir: &Path,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    for path in [models, corpus] {
        if !path.is_file() {
            let _ = writeln!(err, "error: {}: no such file", path.display());
            return EXIT_USAGE;
        }
    }
    let specs: Vec<ModelSpec> = match fs::read_to_string(models)
        .map_err(|e| e.to_string())
        .and_then(|t| serde_json::from_str(&t).map_err(|e| e.to_string()))
    {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(err, "error: {}: {e}", models.display());
            return EXIT_DATA;
        }
    };
    for spec in &specs {
        if let Some(p) = spec.problems().first() {
            let _ = writeln!(err, "error: {}: {}: {p}", models.display(), spec.name);
            return EXIT_DATA;
        }
    }
    let prompts = match load_corpus(corpus) {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error: {}: {e}", corpus.display());
            return EXIT_DATA;
        }
    };
    if let Err(e) = fs::create_dir_all(dir) {
        let _ = writeln!(err, "error: {}: {e}", dir.display());
        return EXIT_USAGE;
    }
    let mut records = Vec::with_capacity(specs.len() * prompts.len());
    for spec in &specs {
        for prompt in &prompts {
            let mut record = gen_synthetic(
                spec,
                synthetic_seq_len(&prompt.text),
                record_seed(seed, &spec.name, &prompt.prompt_id),
                AttentionKind::DirichletRandom,
                HiddenKind::Gaussian { std: 1.0 },
            );
            record.category = prompt.category.clone();
            record.prompt_id = prompt.prompt_id.clone();
            record.prompt_text = prompt.text.clone();
            let name = format!(
                "{}.{CAPTURE_EXTENSION}",
                file_stem(&spec.name, &prompt.prompt_id)
            );
            let written = File::create(dir.join(&name))
                .map_err(|e| e.to_string())
                .and_then(|f| {
                    let mut w = BufWriter::new(f);
                    write_record(&record, &mut w).map_err(|e| e.to_string())
                });
            if let Err(e) = written {
                let _ = writeln!(err, "error: {name}: {e}");
                return EXIT_USAGE;
            }
            records.push(ManifestEntry {
                path: name,
                model: spec.name.clone(),
                category: prompt.category.clone(),
                prompt_id: prompt.prompt_id.clone(),
            });
        }
    }
    let mut extra = std::collections::BTreeMap::new();
    extra.insert("generator".to_string(), serde_json::json!("synthetic"));
    extra.insert("seed".to_string(), serde_json::json!(seed));
    let manifest = RunManifest {
        run_id: format!("synth-{seed}"),
        created_utc: synth_timestamp(),
        epsilon: DEFAULT_EPSILON,
        records,
        extra,
    };
    if let Err(e) = manifest.save(dir) {
        let _ = writeln!(err, "error: {e}");
        return EXIT_USAGE;
    }
    let _ = writeln!(
        out,
        "wrote {} records to {}",
        manifest.records.len(),
        dir.display()
    );
    EXIT_OK
}

pub fn cmd_diff(
    a: &Path,
    b: &Path,
    tolerance: f64,
    mode: &str,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    let mode: DiffMode = match mode.parse() {
        Ok(m) => m,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_USAGE;
        }
    };
    if tolerance.is_nan() || tolerance < 0.0 {
        let _ = writeln!(err, "error: --tolerance must be >= 0");
        return EXIT_USAGE;
    }
    let mut texts = Vec::new();
    for path in [a, b] {
        match fs::read_to_string(path) {
            Ok(t) => texts.push(t),
            Err(e) => {
                let _ = writeln!(err, "error: {}: {e}", path.display());
                return EXIT_USAGE;
            }
        }
    }
    let outcome = match diff_tables(&texts[0], &texts[1], tolerance, mode) {
        Ok(o) => o,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_DATA;
        }
    };
    for v in &outcome.violations {
        let _ = writeln!(out, "FAIL {v}");
    }
    for key in &outcome.only_in_a {
        let _ = writeln!(err, "note: row [{key}] only in {}", a.display());
    }
    for key in &outcome.only_in_b {
        let _ = writeln!(err, "note: row [{key}] only in {}", b.display());
    }
    for col in &outcome.ignored_columns {
        let _ = writeln!(err, "note: column [{col}] not in both files");
    }
    let _ = writeln!(
        out,
        "{} cells compared, {} beyond tolerance {tolerance} ({})",
        outcome.compared_cells,
        outcome.violations.len(),
        if mode == DiffMode::Abs { "abs" } else { "rel" }
    );
    if outcome.passed() {
        EXIT_OK
    } else {
        if outcome.compared_cells == 0 {
            let _ = writeln!(err, "error: no corresponding rows");
        }
        EXIT_DATA
    }
}

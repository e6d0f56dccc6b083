//! Command implementations behind the `mmfuse` binary.
//!
//! Exit codes: 0 success, 1 input had rejected lines, 2 unreadable input or
//! bad configuration, 3 pipeline failure (the message names the stage).

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::document::{export_structured, render_text, Ablation, AblationFlags, ComposedDocument};
use crate::event::{Modality, ModalityEvent, Payload};
use crate::ingest::{IngestOutcome, Ingestor, InputChannel, Rejection};
use crate::pipeline::{Pipeline, PipelineError, PipelineOutput, Stage};
use crate::protocol::event_to_line;
use crate::vocab::TagVocabulary;

pub const EXIT_OK: i32 = 0;
pub const EXIT_REJECTIONS: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_PIPELINE: i32 = 3;

pub const DOCUMENT_FILE: &str = "document.txt";
pub const EXPORT_FILE: &str = "export.jsonl";
pub const REPORT_FILE: &str = "enhance_report.jsonl";
pub const ABLATION_FILE: &str = "ablation.txt";
pub const DEFAULT_SIDECAR: &str = "mmfuse-sidecar";

#[derive(Debug, Parser)]
#[command(name = "mmfuse", version, about = "Fuse multimodal video annotations into a sequential document")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Check a wire stream and list every rejected line.
    Validate(ValidateArgs),
    /// Run the full pipeline and write document, export and report.
    Compose(ConfigArgs),
    /// Compose once in full and once per removed modality; summarize.
    Ablate(ConfigArgs),
    /// Per-modality counts, span histogram and vocabulary coverage.
    Stats(StatsArgs),
    /// Run the extractor sidecar and ingest what it prints.
    Extract(ExtractArgs),
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Stream path, `-`, `unix:<path>` or `tcp:<host:port>`.
    pub stream: String,
    /// Also check spans and boxes against this run config's video.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    pub config: PathBuf,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    pub stream: String,
    /// Tag vocabulary (`label<TAB>category` lines) for coverage.
    #[arg(long)]
    pub vocabulary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    pub config: PathBuf,
    /// Sidecar executable.
    #[arg(long, default_value = DEFAULT_SIDECAR)]
    pub sidecar: PathBuf,
    /// Run the sidecar's real models on this video instead of mock mode.
    #[arg(long)]
    pub video: Option<String>,
    /// Where to write the sealed stream; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (program name first) and dispatches.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(rendered.as_bytes()) } else { out.write_all(rendered.as_bytes()) };
            return code;
        }
    };
    match cli.command {
        Cmd::Validate(a) => cmd_validate(&a.stream, a.config.as_deref(), out, err),
        Cmd::Compose(a) => cmd_compose(&a.config, out, err),
        Cmd::Ablate(a) => cmd_ablate(&a.config, out, err),
        Cmd::Stats(a) => cmd_stats(&a.stream, a.vocabulary.as_deref(), out, err),
        Cmd::Extract(a) => cmd_extract(&a, out, err),
    }
}

fn load_config(path: &Path, err: &mut dyn Write) -> Option<RunConfig> {
    match RunConfig::load(path) {
        Ok(c) => Some(c),
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            None
        }
    }
}

/// Exit 0 iff no line was rejected. Each rejection is printed on its own
/// line to `out`.
pub fn cmd_validate(stream: &str, config: Option<&Path>, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let meta = match config {
        Some(p) => match load_config(p, err) {
            Some(c) => Some(c.meta),
            None => return EXIT_INPUT,
        },
        None => None,
    };
    let channel = InputChannel::parse(stream);
    let mut ing = Ingestor::new(meta);
    if let Err(e) = channel.open().and_then(|r| ing.feed_reader(&channel.label(), r)) {
        let _ = writeln!(err, "error: cannot read {}: {e}", channel.label());
        return EXIT_INPUT;
    }
    for r in ing.rejections() {
        let _ = writeln!(out, "{r}");
    }
    let _ = writeln!(err, "{} accepted, {} rejected", ing.accepted(), ing.rejections().len());
    if ing.rejections().is_empty() {
        EXIT_OK
    } else {
        EXIT_REJECTIONS
    }
}

/// Reads every configured input channel into one sealed stream.
pub fn ingest_inputs(cfg: &RunConfig) -> Result<IngestOutcome, PipelineError> {
    let mut ing = Ingestor::new(Some(cfg.meta.clone()));
    for ch in &cfg.inputs {
        let label = ch.label();
        ch.open()
            .and_then(|r| ing.feed_reader(&label, r))
            .map_err(|e| PipelineError::new(Stage::Ingest, format!("{label}: {e}")))?;
    }
    Ok(ing.finish(cfg.meta.clone()))
}

pub fn load_vocabulary(path: Option<&Path>) -> Result<TagVocabulary, PipelineError> {
    let Some(path) = path else { return Ok(TagVocabulary::new()) };
    let text = fs::read_to_string(path)
        .map_err(|e| PipelineError::new(Stage::Vocabulary, format!("{}: {e}", path.display())))?;
    TagVocabulary::from_lines(text.lines()).map_err(|e| PipelineError::new(Stage::Vocabulary, e))
}

/// Everything a compose run produces, as the bytes that get written.
#[derive(Debug, Clone)]
pub struct ComposeArtifacts {
    pub output: PipelineOutput,
    pub rejections: Vec<Rejection>,
    pub document: String,
    pub export: String,
    pub report: String,
}

/// Ingest, run the pipeline under `flags`, render. Writes nothing.
pub fn compose_artifacts(cfg: &RunConfig, flags: &AblationFlags) -> Result<ComposeArtifacts, PipelineError> {
    let vocab = load_vocabulary(cfg.vocabulary.as_deref())?;
    let ingested = ingest_inputs(cfg)?;
    let output = Pipeline::from_config(cfg, vocab).run(&ingested.stream, flags)?;
    Ok(ComposeArtifacts {
        document: render_text(&output.document),
        export: export_structured(&output.document),
        report: output.report.to_lines(),
        rejections: ingested.rejections,
        output,
    })
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), PipelineError> {
    fs::create_dir_all(dir)
        .and_then(|()| fs::write(dir.join(name), contents))
        .map_err(|e| PipelineError::new(Stage::Write, format!("{}: {e}", dir.join(name).display())))
}

fn report_rejections(rejections: &[Rejection], err: &mut dyn Write) {
    for r in rejections {
        let _ = writeln!(err, "warning: rejected {r}");
    }
}

/// Writes `document.txt`, `export.jsonl` and `enhance_report.jsonl` into
/// the configured output directory. Rejected input lines are warnings.
pub fn cmd_compose(config: &Path, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let Some(cfg) = load_config(config, err) else { return EXIT_INPUT };
    let result = compose_artifacts(&cfg, &cfg.flags).and_then(|a| {
        write_file(&cfg.output_dir, DOCUMENT_FILE, &a.document)?;
        write_file(&cfg.output_dir, EXPORT_FILE, &a.export)?;
        write_file(&cfg.output_dir, REPORT_FILE, &a.report)?;
        Ok(a)
    });
    match result {
        Ok(a) => {
            report_rejections(&a.rejections, err);
            let _ = writeln!(
                out,
                "wrote {} ({} blocks, {} lines, {} enhancement changes)",
                cfg.output_dir.display(),
                a.output.document.blocks.len(),
                a.output.document.line_count(),
                a.output.report.change_count()
            );
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_PIPELINE
        }
    }
}

/// Lines of `doc` citing any modality removed by `ablation`.
pub fn lines_citing(doc: &ComposedDocument, ablation: Ablation) -> usize {
    doc.lines().filter(|l| ablation.modalities().iter().any(|&m| l.cites(m))).count()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AblationRow {
    pub ablation: Ablation,
    /// Lines of the full document citing the removed modality.
    pub removed: usize,
    pub full_lines: usize,
    pub ablated_lines: usize,
}

/// Renders the summary written to `ablation.txt`.
pub fn render_ablation(full_lines: usize, rows: &[AblationRow]) -> String {
    let mut s = format!("full: {full_lines} lines\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{}: -{} lines ({} -> {})",
            r.ablation.name(),
            r.removed,
            r.full_lines,
            r.ablated_lines
        );
    }
    s
}

/// Composes under the configured flags and under each single removal.
pub fn ablation_rows(cfg: &RunConfig) -> Result<(ComposedDocument, Vec<(AblationRow, ComposedDocument)>), PipelineError> {
    let vocab = load_vocabulary(cfg.vocabulary.as_deref())?;
    let ingested = ingest_inputs(cfg)?;
    let pipeline = Pipeline::from_config(cfg, vocab);
    let full = pipeline.run(&ingested.stream, &cfg.flags)?.document;
    let mut rows = Vec::new();
    for ablation in Ablation::ALL {
        let doc = pipeline.run(&ingested.stream, &cfg.flags.without(ablation))?.document;
        let row = AblationRow {
            ablation,
            removed: lines_citing(&full, ablation),
            full_lines: full.line_count(),
            ablated_lines: doc.line_count(),
        };
        rows.push((row, doc));
    }
    Ok((full, rows))
}

/// Writes `ablation.txt` plus one `document-without-<name>.txt` per removal.
pub fn cmd_ablate(config: &Path, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let Some(cfg) = load_config(config, err) else { return EXIT_INPUT };
    let result = ablation_rows(&cfg).and_then(|(full, rows)| {
        let summary = render_ablation(full.line_count(), &rows.iter().map(|(r, _)| r.clone()).collect::<Vec<_>>());
        for (row, doc) in &rows {
            write_file(&cfg.output_dir, &format!("document-without-{}.txt", row.ablation.name()), &render_text(doc))?;
        }
        write_file(&cfg.output_dir, ABLATION_FILE, &summary)?;
        Ok(summary)
    });
    match result {
        Ok(summary) => {
            let _ = out.write_all(summary.as_bytes());
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_PIPELINE
        }
    }
}

/// Upper bounds (seconds, exclusive) of the span-length histogram bins
/// after the instant bin; the last bin is open.
pub const SPAN_BINS: [f64; 4] = [0.5, 1.0, 2.0, 5.0];

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StreamStats {
    pub accepted: usize,
    pub rejected: usize,
    /// Indexed like [`Modality::ALL`].
    pub per_modality: [usize; 6],
    /// Instants, then one bin per [`SPAN_BINS`] bound, then the rest.
    pub span_histogram: [usize; 6],
    pub distinct_tags: usize,
    pub tags_in_vocabulary: usize,
}

impl StreamStats {
    pub fn count(&self, m: Modality) -> usize {
        self.per_modality[Modality::ALL.iter().position(|&x| x == m).expect("listed")]
    }
}

pub fn stream_stats(events: &[ModalityEvent], rejected: usize, vocab: &TagVocabulary) -> StreamStats {
    let mut s = StreamStats { accepted: events.len(), rejected, ..Default::default() };
    let mut tags = std::collections::BTreeSet::new();
    for e in events {
        s.per_modality[Modality::ALL.iter().position(|&x| x == e.modality).expect("listed")] += 1;
        let len = e.span.len();
        let bin = if e.span.is_instant() {
            0
        } else {
            1 + SPAN_BINS.iter().take_while(|&&b| len >= b).count()
        };
        s.span_histogram[bin] += 1;
        if let Payload::Tag { label, .. } = &e.payload {
            tags.insert(label.as_str());
        }
    }
    s.distinct_tags = tags.len();
    s.tags_in_vocabulary = tags.iter().filter(|l| vocab.contains(l)).count();
    s
}

pub fn render_stats(s: &StreamStats, vocab_size: usize) -> String {
    let mut out = format!("events: {}\nrejected: {}\n", s.accepted, s.rejected);
    for (m, n) in Modality::ALL.iter().zip(s.per_modality) {
        let _ = writeln!(out, "{}: {n}", m.as_str().to_lowercase());
    }
    out.push_str("span length:\n");
    let _ = writeln!(out, "  instant: {}", s.span_histogram[0]);
    let mut lo = 0.0;
    for (i, hi) in SPAN_BINS.iter().enumerate() {
        let _ = writeln!(out, "  [{lo}, {hi}): {}", s.span_histogram[i + 1]);
        lo = *hi;
    }
    let _ = writeln!(out, "  [{lo}, inf): {}", s.span_histogram[5]);
    let _ = writeln!(out, "vocabulary: {} entries", vocab_size);
    let _ = writeln!(out, "tag labels in vocabulary: {}/{}", s.tags_in_vocabulary, s.distinct_tags);
    out
}

pub fn cmd_stats(stream: &str, vocabulary: Option<&Path>, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let vocab = match load_vocabulary(vocabulary) {
        Ok(v) => v,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_INPUT;
        }
    };
    let channel = InputChannel::parse(stream);
    let mut ing = Ingestor::new(None);
    if let Err(e) = channel.open().and_then(|r| ing.feed_reader(&channel.label(), r)) {
        let _ = writeln!(err, "error: cannot read {}: {e}", channel.label());
        return EXIT_INPUT;
    }
    let rejected = ing.rejections().len();
    // Any meta will do: only the intrinsic checks ran.
    let outcome = ing.finish(crate::event::VideoMeta::new(0.0, 1.0, 1, 1, ""));
    let stats = stream_stats(outcome.stream.events(), rejected, &vocab);
    let _ = out.write_all(render_stats(&stats, vocab.len()).as_bytes());
    EXIT_OK
}

/// Arguments passed to the sidecar for a config.
pub fn sidecar_args(cfg: &RunConfig, video: Option<&str>) -> Vec<String> {
    match video {
        Some(v) => vec!["real".into(), "--video".into(), v.into()],
        None => vec![
            "mock".into(),
            "--seed".into(),
            cfg.seed.to_string(),
            "--duration".into(),
            cfg.meta.duration.to_string(),
            "--width".into(),
            cfg.meta.width.to_string(),
            "--height".into(),
            cfg.meta.height.to_string(),
        ],
    }
}

/// Spawns the sidecar, ingests its stdout against the config's video and
/// writes the sealed stream. Exit 1 when some lines were rejected (the
/// accepted ones are still written).
pub fn cmd_extract(args: &ExtractArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let Some(cfg) = load_config(&args.config, err) else { return EXIT_INPUT };
    let fail = |err: &mut dyn Write, e: PipelineError| {
        let _ = writeln!(err, "error: {e}");
        EXIT_PIPELINE
    };
    let sidecar = args.sidecar.display().to_string();
    let child = Command::new(&args.sidecar)
        .args(sidecar_args(&cfg, args.video.as_deref()))
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::inherit())
        .spawn();
    let mut child = match child {
        Ok(c) => c,
        Err(e) => return fail(err, PipelineError::new(Stage::Extract, format!("cannot start {sidecar}: {e}"))),
    };
    let mut ing = Ingestor::new(Some(cfg.meta.clone()));
    let stdout = child.stdout.take().expect("stdout is piped");
    if let Err(e) = ing.feed_reader(&sidecar, stdout) {
        let _ = child.kill();
        return fail(err, PipelineError::new(Stage::Extract, e));
    }
    match child.wait() {
        Ok(status) if status.success() => {}
        Ok(status) => return fail(err, PipelineError::new(Stage::Extract, format!("{sidecar} exited with {status}"))),
        Err(e) => return fail(err, PipelineError::new(Stage::Extract, e)),
    }
    let outcome = ing.finish(cfg.meta.clone());
    report_rejections(&outcome.rejections, err);
    let text: String = outcome.stream.events().iter().map(|e| event_to_line(e) + "\n").collect();
    let written = match &args.out {
        Some(p) => fs::write(p, &text).map_err(|e| PipelineError::new(Stage::Write, format!("{}: {e}", p.display()))),
        None => out.write_all(text.as_bytes()).map_err(|e: io::Error| PipelineError::new(Stage::Write, e)),
    };
    if let Err(e) = written {
        return fail(err, e);
    }
    let _ = writeln!(err, "{} events, {} rejected", outcome.stream.len(), outcome.rejections.len());
    if outcome.rejections.is_empty() {
        EXIT_OK
    } else {
        EXIT_REJECTIONS
    }
}

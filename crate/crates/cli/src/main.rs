use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use deid_core::datetime::DayShiftPolicy;
use deid_core::eval::{
    evaluate, format_annotations, parse_annotations, validate_gold, Annotation, MatchMode, MatchSpec,
};
use deid_core::faker::{LengthMode, UserDictionary};
use deid_core::langpack::{bundled_packs_dir, list_supported, load_pack, parse_labels, LanguagePack};
use deid_core::merge::MergePolicy;
use deid_core::pipeline::{count_labels, detect, DeidConfig, Pipeline, Stages};
use deid_core::rewrite::{RewriteMode, RewritePolicy};
use deid_core::synth::{generate, SynthConfig};
use deid_core::vault::{reidentify, Vault, VaultHeader, VaultWriter};

mod corpus;

use corpus::{read_corpus, write_atomic, PatientIds};

#[derive(Parser)]
#[command(name = "deid", version, about = "De-identify clinical free-text notes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Detect and mask or obfuscate PHI in every file of a directory.
    Deidentify(DeidentifyArgs),
    /// Restore original notes from de-identified output and a vault.
    Reidentify(ReidentifyArgs),
    /// Write detected PHI spans as a predictions file.
    Detect(DetectArgs),
    /// Score predictions against gold annotations.
    Evaluate(EvaluateArgs),
    /// Load a language pack and report every problem in it.
    ValidatePack {
        /// Pack directory.
        path: PathBuf,
    },
    /// List the language packs found in a directory.
    ListPacks {
        #[arg(long)]
        packs: Option<PathBuf>,
    },
    /// Generate a synthetic annotated corpus.
    Synth(SynthArgs),
}

#[derive(Args)]
struct PackArgs {
    /// Language code of the pack to use.
    #[arg(long, default_value = "en")]
    lang: String,
    /// Directory holding language packs.
    #[arg(long)]
    packs: Option<PathBuf>,
    /// Merge policy file replacing the pack's policy.
    #[arg(long)]
    policy: Option<PathBuf>,
}

impl PackArgs {
    fn load(&self) -> Result<LanguagePack> {
        let dir = self.packs.clone().unwrap_or_else(bundled_packs_dir);
        let mut pack = load_pack(&dir.join(&self.lang))?;
        if let Some(p) = &self.policy {
            let src = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            pack.merge_policy = MergePolicy::parse(&src).with_context(|| format!("in {}", p.display()))?;
        }
        Ok(pack)
    }
}

#[derive(Args)]
struct InputArgs {
    /// Directory of UTF-8 notes, one document per file.
    #[arg(long)]
    input: PathBuf,
    /// Regex on the relative path; its first group (or whole match) is the
    /// patient id. Otherwise a `<file>.patient` sidecar is used if present.
    #[arg(long)]
    patient_id_from: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum LengthArg {
    Free,
    SameLength,
}

#[derive(Args)]
struct DeidentifyArgs {
    #[command(flatten)]
    pack: PackArgs,
    #[command(flatten)]
    input: InputArgs,
    /// Output directory; mirrors the input layout.
    #[arg(long)]
    output: PathBuf,
    /// mask-entity, mask-fixed, mask-length or obfuscate.
    #[arg(long, default_value = "mask-entity")]
    mode: String,
    /// Asterisks per chunk in mask-fixed mode.
    #[arg(long, default_value_t = 3)]
    mask_width: usize,
    /// Surrogate length policy in obfuscate mode.
    #[arg(long, value_enum, default_value = "free")]
    length_mode: LengthArg,
    /// Comma-separated labels to leave untouched.
    #[arg(long)]
    whitelist: Option<String>,
    /// Global seed; required for obfuscate.
    #[arg(long)]
    seed: Option<u64>,
    /// Day shift: `fixed:<file>` or `range:<lo>,<hi>`.
    #[arg(long)]
    shift: Option<String>,
    /// Custom replacements: `original<TAB>replacement` rows.
    #[arg(long)]
    dictionary: Option<PathBuf>,
    /// Vault file recording every replacement.
    #[arg(long)]
    vault: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Allow the vault inside the output directory and overwriting a vault.
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct ReidentifyArgs {
    /// Directory of de-identified notes.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    vault: PathBuf,
}

#[derive(Args)]
struct DetectArgs {
    #[command(flatten)]
    pack: PackArgs,
    #[command(flatten)]
    input: InputArgs,
    /// Predictions file (`doc_id<TAB>start<TAB>end<TAB>label`).
    #[arg(long)]
    output: PathBuf,
    /// Run the recognizers only, without contextual rules.
    #[arg(long)]
    no_rules: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Table,
    Lines,
    Both,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    pred: PathBuf,
    /// `coverage:<t>` (default 0.6) or `token`.
    #[arg(long = "match", default_value = "coverage:0.6")]
    match_mode: String,
    /// Comma-separated labels excluded from scoring.
    #[arg(long)]
    exclude: Option<String>,
    /// Compare labels in the coarse schema.
    #[arg(long)]
    coarse: bool,
    /// Also require |pred ∩ gold| / |pred| to reach this ratio.
    #[arg(long)]
    pred_ratio: Option<f64>,
    /// Label mapping file: `external<TAB>Label` rows.
    #[arg(long)]
    label_map: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "table")]
    format: ReportFormat,
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    pack: PackArgs,
    #[arg(long)]
    output: PathBuf,
    /// Gold annotations file.
    #[arg(long)]
    gold: PathBuf,
    #[arg(long, default_value_t = 200)]
    docs: usize,
    #[arg(long, default_value_t = 50)]
    patients: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Approximate note length in characters.
    #[arg(long, default_value_t = 1200)]
    chars: usize,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Deidentify(a) => deidentify(a),
        Command::Reidentify(a) => reidentify_cmd(a),
        Command::Detect(a) => detect_cmd(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::ValidatePack { path } => {
            let pack = load_pack(&path)?;
            println!(
                "ok: {} {} ({} recognizers, {} rules, fingerprint {})",
                pack.language,
                pack.version,
                pack.recognizers.len(),
                pack.rules.len(),
                &pack.fingerprint[..12]
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::ListPacks { packs } => {
            for lang in list_supported(&packs.unwrap_or_else(bundled_packs_dir)) {
                println!("{lang}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Synth(a) => synth(a),
    }
}

fn parse_shift(spec: Option<&str>, seed: u64) -> Result<DayShiftPolicy> {
    let Some(spec) = spec else {
        return Ok(DayShiftPolicy {
            seed,
            ..DayShiftPolicy::default()
        });
    };
    if let Some(file) = spec.strip_prefix("fixed:") {
        let src = fs::read_to_string(file).with_context(|| format!("reading shift table {file}"))?;
        let table = DayShiftPolicy::parse_fixed_table(&src).with_context(|| format!("in {file}"))?;
        let d = DayShiftPolicy::default();
        return Ok(DayShiftPolicy::fixed(table, d.range, seed)?);
    }
    if let Some(range) = spec.strip_prefix("range:") {
        let (lo, hi) = range.split_once(',').context("range shift must be `range:<lo>,<hi>`")?;
        let lo: i64 = lo.trim().parse().context("range lower bound")?;
        let hi: i64 = hi.trim().parse().context("range upper bound")?;
        return Ok(DayShiftPolicy::range(lo, hi, seed)?);
    }
    bail!("--shift must be `fixed:<file>` or `range:<lo>,<hi>`, got `{spec}`")
}

/// Is `path` inside `dir` (both may not exist yet)?
fn is_inside(path: &Path, dir: &Path) -> bool {
    let abs = |p: &Path| {
        let p = if p.is_absolute() {
            p.to_path_buf()
        } else {
            std::env::current_dir().unwrap_or_default().join(p)
        };
        // canonicalize the longest existing ancestor
        let mut existing = p.as_path();
        let mut rest = Vec::new();
        while !existing.exists() {
            match (existing.parent(), existing.file_name()) {
                (Some(parent), Some(name)) => {
                    rest.push(name.to_owned());
                    existing = parent;
                }
                _ => break,
            }
        }
        let mut base = existing.canonicalize().unwrap_or_else(|_| existing.to_path_buf());
        for part in rest.into_iter().rev() {
            base.push(part);
        }
        base
    };
    abs(path).starts_with(abs(dir))
}

fn deidentify(a: DeidentifyArgs) -> Result<ExitCode> {
    let started = Instant::now();
    let mode: RewriteMode = a.mode.parse()?;
    if mode == RewriteMode::Obfuscate && a.seed.is_none() {
        bail!("--seed is required with --mode obfuscate");
    }
    if let Some(v) = &a.vault {
        if is_inside(v, &a.output) && !a.force {
            bail!("refusing to write the vault inside the output directory (use --force to override)");
        }
        if v.exists() && !a.force {
            bail!("vault {} already exists (use --force to overwrite)", v.display());
        }
    }
    let seed = a.seed.unwrap_or(0);
    let mut policy = RewritePolicy::new(mode)
        .with_fixed_width(a.mask_width)
        .with_length_mode(match a.length_mode {
            LengthArg::Free => LengthMode::Free,
            LengthArg::SameLength => LengthMode::SameLength,
        });
    if let Some(w) = &a.whitelist {
        policy = policy.with_whitelist(parse_labels(w)?);
    }
    policy.validate()?;
    let mut config = DeidConfig::new(policy, seed);
    config.day_shift = parse_shift(a.shift.as_deref(), seed)?;
    if let Some(d) = &a.dictionary {
        let src = fs::read_to_string(d).with_context(|| format!("reading {}", d.display()))?;
        config.dictionary = UserDictionary::parse(&src).with_context(|| format!("in {}", d.display()))?;
    }

    let pack = a.pack.load()?;
    let patients = PatientIds::new(a.input.patient_id_from.as_deref())?;
    let (docs, mut failures) = read_corpus(&a.input.input, &pack.language, &patients)?;
    let pipeline = Pipeline::new(&pack, config);
    let outcomes = pipeline.process_corpus(&docs, a.jobs)?;

    let mut vault = match &a.vault {
        Some(path) => {
            let tmp = tempfile::NamedTempFile::new_in(
                path.parent()
                    .filter(|p| !p.as_os_str().is_empty())
                    .unwrap_or(Path::new(".")),
            )
            .context("creating vault file")?;
            Some((
                path,
                VaultWriter::new(std::io::BufWriter::new(tmp), &VaultHeader::new(a.seed))?,
            ))
        }
        None => None,
    };
    let mut ok = Vec::new();
    for (doc, outcome) in docs.iter().zip(outcomes) {
        let outcome = match outcome {
            Ok(o) => o,
            Err(e) => {
                failures.push((doc.id.clone(), e.to_string()));
                continue;
            }
        };
        if let Some((_, w)) = vault.as_mut() {
            if let Err(e) = w.append(&outcome.result, doc) {
                failures.push((doc.id.clone(), format!("vault: {e}")));
                continue;
            }
        }
        if let Err(e) = write_atomic(&a.output.join(&doc.id), outcome.result.text.as_bytes()) {
            failures.push((doc.id.clone(), format!("{e:#}")));
            continue;
        }
        ok.push(outcome);
    }
    if let Some((path, w)) = vault {
        let records = w.records_written();
        let tmp = w.into_inner().into_inner().map_err(|e| e.into_error())?;
        tmp.as_file().sync_all()?;
        tmp.persist(path)
            .with_context(|| format!("writing vault {}", path.display()))?;
        eprintln!("vault: {records} records -> {}", path.display());
    }

    for (id, msg) in &failures {
        eprintln!("failed: {id}: {msg}");
    }
    println!("documents: {} processed, {} failed", ok.len(), failures.len());
    for (label, n) in count_labels(&ok) {
        println!("  {label:<14} {n}");
    }
    println!("wall time: {:.3}s", started.elapsed().as_secs_f64());
    Ok(if failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn reidentify_cmd(a: ReidentifyArgs) -> Result<ExitCode> {
    let file = fs::File::open(&a.vault).with_context(|| format!("opening vault {}", a.vault.display()))?;
    let vault = Vault::read(BufReader::new(file))?;
    let mut restored = 0;
    let mut failures = Vec::new();
    for doc_id in vault.doc_ids() {
        let path = a.input.join(doc_id);
        let res = fs::read_to_string(&path)
            .with_context(|| format!("reading {}", path.display()))
            .and_then(|text| Ok(reidentify(&text, doc_id, &vault)?))
            .and_then(|orig| write_atomic(&a.output.join(doc_id), orig.as_bytes()));
        match res {
            Ok(()) => restored += 1,
            Err(e) => failures.push(format!("{doc_id}: {e:#}")),
        }
    }
    for f in &failures {
        eprintln!("failed: {f}");
    }
    println!("documents: {restored} restored, {} failed", failures.len());
    Ok(if failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn detect_cmd(a: DetectArgs) -> Result<ExitCode> {
    let pack = a.pack.load()?;
    let patients = PatientIds::new(a.input.patient_id_from.as_deref())?;
    let (docs, failures) = read_corpus(&a.input.input, &pack.language, &patients)?;
    let stages = if a.no_rules {
        Stages::RECOGNIZERS_ONLY
    } else {
        Stages::ALL
    };
    let pred: Vec<Annotation> = docs
        .iter()
        .flat_map(|d| {
            detect(d, &pack, stages).merged.chunks.into_iter().map(|c| Annotation {
                doc_id: d.id.clone(),
                span: c.span,
                label: c.label,
            })
        })
        .collect();
    write_atomic(&a.output, format_annotations(&pred).as_bytes())?;
    for (id, msg) in &failures {
        eprintln!("failed: {id}: {msg}");
    }
    println!("documents: {}, chunks: {}", docs.len(), pred.len());
    Ok(if failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn evaluate_cmd(a: EvaluateArgs) -> Result<ExitCode> {
    let mut spec = MatchSpec {
        mode: MatchMode::parse(&a.match_mode)?,
        pred_ratio: a.pred_ratio,
        coarse: a.coarse,
        ..MatchSpec::default()
    };
    if let Some(r) = a.pred_ratio {
        if !(r > 0.0 && r <= 1.0) {
            bail!("--pred-ratio must lie in (0, 1]");
        }
    }
    if let Some(ex) = &a.exclude {
        spec.excluded_labels = parse_labels(ex)?.into_iter().collect();
    }
    if let Some(m) = &a.label_map {
        let src = fs::read_to_string(m).with_context(|| format!("reading {}", m.display()))?;
        let mut map = BTreeMap::new();
        for (i, row) in src
            .lines()
            .enumerate()
            .filter(|(_, r)| !r.trim().is_empty() && !r.starts_with('#'))
        {
            let (ext, label) = row
                .split_once('\t')
                .with_context(|| format!("{}:{}: expected `external<TAB>Label`", m.display(), i + 1))?;
            map.insert(ext.trim().to_string(), label.trim().parse()?);
        }
        spec.label_mapping = map;
    }
    let read = |p: &Path| -> Result<Vec<Annotation>> {
        let src = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        parse_annotations(&src, &spec.label_mapping).with_context(|| format!("in {}", p.display()))
    };
    let gold = read(&a.gold)?;
    validate_gold(&gold)?;
    let pred = read(&a.pred)?;
    let report = evaluate(&pred, &gold, &spec);
    let mut out = std::io::stdout().lock();
    if matches!(a.format, ReportFormat::Table | ReportFormat::Both) {
        write!(out, "{}", report.to_table())?;
    }
    if matches!(a.format, ReportFormat::Lines | ReportFormat::Both) {
        write!(out, "{}", report.to_lines())?;
    }
    Ok(ExitCode::SUCCESS)
}

fn synth(a: SynthArgs) -> Result<ExitCode> {
    let pack = a.pack.load()?;
    let cfg = SynthConfig {
        docs: a.docs,
        patients: a.patients,
        seed: a.seed,
        target_chars: a.chars,
    };
    let corpus = generate(&cfg, &pack.faker)?;
    for d in &corpus.docs {
        write_atomic(&a.output.join(&d.id), d.text.as_bytes())?;
        if let Some(p) = &d.patient_id {
            write_atomic(&a.output.join(format!("{}.patient", d.id)), format!("{p}\n").as_bytes())?;
        }
    }
    write_atomic(&a.gold, format_annotations(&corpus.gold).as_bytes())?;
    println!("documents: {}, gold chunks: {}", corpus.docs.len(), corpus.gold.len());
    Ok(ExitCode::SUCCESS)
}

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use contrafraud::classify::{finetune, score_dataset, train_head_frozen, LogisticHead, ScoreSet};
use contrafraud::contrastive::pretrain_with;
use contrafraud::dataio::{
    fit_schema, generate_synthetic, read_dataset, write_dataset, EncodingSchema, LabeledDataset, RawDataset, Split,
    Standardizer,
};
use contrafraud::encoder::{init_encoder, load_model, save_model, ProjectionHead, TransformerEncoder};
use contrafraud::pipeline::{
    baseline_head, calibrate_scores, detection_table, pca_project, rankme, read_records, records_of, run_seed,
    score_profiles, table_tsv, write_records, Histogram, PipelineConfig,
};
use contrafraud::{Error, Result};

#[derive(Parser)]
#[command(
    name = "contrafraud",
    version,
    about = "Contrastive pre-training and FDR-calibrated fraud scoring"
)]
struct Cli {
    /// TOML configuration; omitted keys keep their defaults.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `paths.data_dir`.
    #[arg(long, global = true)]
    data_dir: Option<PathBuf>,
    /// Overrides `paths.artifacts`.
    #[arg(long, global = true)]
    artifacts: Option<PathBuf>,
    /// Repeat for more detail.
    #[arg(long, short, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Model {
    /// Logistic head on frozen contrastive representations.
    Cr,
    /// Logistic head on standardized account profiles.
    Tabular,
    /// Jointly fine-tuned encoder and head.
    Ft,
}

impl Model {
    fn name(self) -> &'static str {
        match self {
            Model::Cr => "cr",
            Model::Tabular => "tabular",
            Model::Ft => "ft",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SplitArg {
    Train,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Split {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(Args)]
struct ModelSplit {
    #[arg(long, value_enum, default_value = "cr")]
    model: Model,
    #[arg(long, value_enum, default_value = "test")]
    split: SplitArg,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic train/test pair into the data directory.
    Generate,
    /// Fit the event encoding on the training split.
    FitSchema,
    /// Per-account profiles for both splits and their standardization.
    Aggregate,
    /// Contrastive pre-training of the encoder.
    Pretrain,
    /// Frozen representations of every account in a split.
    Embed {
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
    },
    /// Fit a logistic head on the training split.
    TrainHead {
        #[arg(long, value_enum, default_value = "cr")]
        model: Model,
    },
    /// Joint cross-entropy training of encoder and head.
    Finetune,
    /// Fraud scores for a split.
    Score(ModelSplit),
    /// Two-threshold decisions on a scored split.
    Calibrate(ModelSplit),
    /// Full pipeline over the report seeds, in memory.
    Evaluate {
        /// Comma-separated seeds replacing the configured list.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
    },
    /// Detection table and score histograms.
    Report,
    /// Two-dimensional projection and effective rank of embeddings.
    Project {
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
    },
    /// Print the effective configuration.
    ShowConfig,
}

/// Successful runs that met degenerate statistics exit with this code.
const EXIT_DEGENERATE: u8 = 3;

enum Outcome {
    Done,
    Degenerate(String),
}

struct Ctx {
    cfg: PipelineConfig,
}

impl Ctx {
    fn art(&self, name: &str) -> PathBuf {
        self.cfg.paths.artifacts.join(name)
    }

    fn manifest(&self, split: Split) -> PathBuf {
        self.cfg.paths.data_dir.join(format!("{}.toml", split.as_str()))
    }

    fn raw(&self, split: Split) -> Result<RawDataset> {
        let p = self.manifest(split);
        if !p.exists() {
            return Err(missing(&p, "generate"));
        }
        read_dataset(&p)
    }

    fn schema(&self) -> Result<EncodingSchema> {
        let p = self.art("schema.toml");
        if p.exists() {
            return EncodingSchema::load(&p);
        }
        let schema = fit_schema(&self.raw(Split::Train)?)?;
        self.ensure_dir()?;
        schema.save(&p)?;
        log::info!("wrote {}", p.display());
        Ok(schema)
    }

    fn dataset(&self, schema: &EncodingSchema, split: Split) -> Result<LabeledDataset> {
        LabeledDataset::from_raw(&self.raw(split)?, schema, self.cfg.windows)
    }

    fn ensure_dir(&self) -> Result<()> {
        std::fs::create_dir_all(&self.cfg.paths.artifacts)?;
        Ok(())
    }

    fn standardizer(&self, train: &LabeledDataset) -> Result<Standardizer> {
        let p = self.art("standardizer.toml");
        if p.exists() {
            return Ok(toml::from_str(&std::fs::read_to_string(&p)?)?);
        }
        let s = Standardizer::fit(&profiles(train))?;
        self.ensure_dir()?;
        std::fs::write(&p, toml::to_string(&s)?)?;
        Ok(s)
    }

    fn load_encoder(&self, schema: &EncodingSchema, name: &str) -> Result<(TransformerEncoder, ProjectionHead)> {
        let p = self.art(name);
        if !p.exists() {
            return Err(missing(
                &p,
                if name == "encoder.ckpt" { "pretrain" } else { "finetune" },
            ));
        }
        load_model(&p, &self.cfg.encoder_for(schema.d_input())?, &self.cfg.head)
    }

    fn load_head(&self, model: Model) -> Result<Option<LogisticHead>> {
        let p = self.art(&format!("head_{}.toml", model.name()));
        if !p.exists() {
            return Ok(None);
        }
        Ok(Some(toml::from_str(&std::fs::read_to_string(&p)?)?))
    }

    fn save_head(&self, model: Model, head: &LogisticHead) -> Result<()> {
        self.ensure_dir()?;
        let p = self.art(&format!("head_{}.toml", model.name()));
        std::fs::write(&p, toml::to_string(head)?)?;
        log::info!("wrote {}", p.display());
        Ok(())
    }
}

fn missing(p: &Path, producer: &str) -> Error {
    Error::Data(format!(
        "missing artifact {}; run `contrafraud {producer}` first",
        p.display()
    ))
}

fn profiles(d: &LabeledDataset) -> Vec<Vec<f64>> {
    d.profiles.iter().map(|p| p.values.clone()).collect()
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text)?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn write_rows(path: &Path, header: &str, rows: impl Iterator<Item = String>) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{header}")?;
    for r in rows {
        writeln!(out, "{r}")?;
    }
    out.flush()?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("\t")
}

fn write_embeddings(path: &Path, data: &LabeledDataset, u: &[Vec<f64>]) -> Result<()> {
    let d = u.first().map_or(0, Vec::len);
    let header = std::iter::once("account_id\tlabel".to_string())
        .chain((0..d).map(|j| format!("u{j}")))
        .collect::<Vec<_>>()
        .join("\t");
    write_rows(
        path,
        &header,
        data.series
            .iter()
            .zip(&data.labels)
            .zip(u)
            .map(|((s, y), row)| format!("{}\t{y}\t{}", s.account_id, join(row))),
    )
}

type Embeddings = (Vec<String>, Vec<u8>, Vec<Vec<f64>>);

fn read_embeddings(path: &Path) -> Result<Embeddings> {
    let text = std::fs::read_to_string(path)?;
    let (mut ids, mut labels, mut rows) = (Vec::new(), Vec::new(), Vec::new());
    for (i, line) in text.lines().enumerate().skip(1) {
        let bad = |field: &str| Error::Record {
            line: i + 1,
            field: field.into(),
            message: "unparsable value".into(),
        };
        let mut f = line.split('\t');
        ids.push(f.next().ok_or_else(|| bad("account_id"))?.to_string());
        labels.push(f.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad("label"))?);
        rows.push(
            f.map(|s| s.parse::<f64>().map_err(|_| bad("u")))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    Ok((ids, labels, rows))
}

fn train_head(ctx: &Ctx, model: Model) -> Result<LogisticHead> {
    let cfg = &ctx.cfg;
    let schema = ctx.schema()?;
    let train = ctx.dataset(&schema, Split::Train)?;
    let head = match model {
        Model::Cr => {
            let (enc, _) = ctx.load_encoder(&schema, "encoder.ckpt")?;
            let u = enc.encode(&train.series, false, 0)?;
            train_head_frozen(&u, &train.labels, &cfg.logistic, cfg.seed)?
        }
        Model::Tabular => baseline_head(cfg, &train, cfg.seed)?,
        Model::Ft => {
            return Err(Error::InvalidArgument(
                "the ft head comes from `contrafraud finetune`".into(),
            ))
        }
    };
    ctx.save_head(model, &head)?;
    Ok(head)
}

fn head_or_train(ctx: &Ctx, model: Model) -> Result<LogisticHead> {
    match ctx.load_head(model)? {
        Some(h) => Ok(h),
        None if model == Model::Ft => Err(missing(&ctx.art("head_ft.toml"), "finetune")),
        None => train_head(ctx, model),
    }
}

fn score(ctx: &Ctx, model: Model, split: Split) -> Result<ScoreSet> {
    let schema = ctx.schema()?;
    let data = ctx.dataset(&schema, split)?;
    let head = head_or_train(ctx, model)?;
    let scores = match model {
        Model::Cr => score_dataset(&ctx.load_encoder(&schema, "encoder.ckpt")?.0, &head, &data)?,
        Model::Ft => score_dataset(&ctx.load_encoder(&schema, "encoder_ft.ckpt")?.0, &head, &data)?,
        Model::Tabular => score_profiles(&head, &data)?,
    };
    ctx.ensure_dir()?;
    let p = ctx.art(&format!("scores_{}_{}.tsv", model.name(), split.as_str()));
    scores.write_tsv(&p)?;
    log::info!("wrote {}", p.display());
    Ok(scores)
}

fn run(cli: Cli) -> Result<Outcome> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(d) = cli.data_dir {
        cfg.paths.data_dir = d;
    }
    if let Some(a) = cli.artifacts {
        cfg.paths.artifacts = a;
    }
    cfg.validate()?;
    let ctx = Ctx { cfg };
    let cfg = &ctx.cfg;

    match cli.command {
        Command::ShowConfig => print!("{}", cfg.to_toml()?),
        Command::Generate => {
            let (train, test) = generate_synthetic(&cfg.synth, cfg.seed)?;
            for raw in [&train, &test] {
                let p = write_dataset(raw, &cfg.paths.data_dir, raw.split.as_str())?;
                log::info!("wrote {}", p.display());
            }
        }
        Command::FitSchema => {
            let schema = fit_schema(&ctx.raw(Split::Train)?)?;
            ctx.ensure_dir()?;
            schema.save(&ctx.art("schema.toml"))?;
            println!("input width {}", schema.d_input());
        }
        Command::Aggregate => {
            let schema = ctx.schema()?;
            let train = ctx.dataset(&schema, Split::Train)?;
            let s = Standardizer::fit(&profiles(&train))?;
            ctx.ensure_dir()?;
            write_text(&ctx.art("standardizer.toml"), &toml::to_string(&s)?)?;
            for split in [Split::Train, Split::Test] {
                let d = if split == Split::Train {
                    train.clone()
                } else {
                    ctx.dataset(&schema, split)?
                };
                let width = d.profiles.first().map_or(0, |p| p.values.len());
                let header = std::iter::once("account_id\tlabel".to_string())
                    .chain((0..width).map(|j| format!("x{j}")))
                    .collect::<Vec<_>>()
                    .join("\t");
                write_rows(
                    &ctx.art(&format!("profiles_{}.tsv", split.as_str())),
                    &header,
                    d.profiles
                        .iter()
                        .zip(&d.labels)
                        .map(|(p, y)| format!("{}\t{y}\t{}", p.account_id, join(&p.values))),
                )?;
            }
        }
        Command::Pretrain => {
            let schema = ctx.schema()?;
            let train = ctx.dataset(&schema, Split::Train)?;
            let std = ctx.standardizer(&train)?;
            let prof = std.apply_all(&profiles(&train))?;
            let (enc, head) = init_encoder(&cfg.encoder_for(schema.d_input())?, &cfg.head, cfg.seed)?;
            ctx.ensure_dir()?;
            let every = cfg.checkpoint_every;
            let ckdir = ctx.art("checkpoints");
            let out = pretrain_with(&train, &prof, enc, head, &cfg.contrastive, cfg.seed, |s, e, h| {
                if every > 0 && s.epoch % every == 0 {
                    std::fs::create_dir_all(&ckdir)?;
                    save_model(e, h, &ckdir.join(format!("epoch_{:04}.ckpt", s.epoch)))?;
                }
                Ok(())
            })?;
            save_model(&out.encoder, &out.head, &ctx.art("encoder.ckpt"))?;
            write_text(&ctx.art("clusters.toml"), &toml::to_string(&out.cluster)?)?;
            write_rows(
                &ctx.art("pretrain_log.tsv"),
                "epoch\tmean_loss\tbank_occupancy\tshortfalls\tskipped",
                out.trace.iter().map(|s| {
                    format!(
                        "{}\t{}\t{}\t{}\t{}",
                        s.epoch, s.mean_loss, s.bank_occupancy, s.shortfalls, s.skipped
                    )
                }),
            )?;
        }
        Command::Embed { split } => {
            let split = Split::from(split);
            let schema = ctx.schema()?;
            let data = ctx.dataset(&schema, split)?;
            let (enc, _) = ctx.load_encoder(&schema, "encoder.ckpt")?;
            let u = enc.encode(&data.series, false, 0)?;
            write_embeddings(&ctx.art(&format!("embeddings_{}.tsv", split.as_str())), &data, &u)?;
        }
        Command::TrainHead { model } => {
            train_head(&ctx, model)?;
        }
        Command::Finetune => {
            let schema = ctx.schema()?;
            let train = ctx.dataset(&schema, Split::Train)?;
            let (enc, proj) = ctx.load_encoder(&schema, "encoder.ckpt")?;
            let head = head_or_train(&ctx, Model::Cr)?;
            let out = finetune(&train.series, &train.labels, enc, &head, &cfg.finetune, cfg.seed)?;
            save_model(&out.encoder, &proj, &ctx.art("encoder_ft.ckpt"))?;
            ctx.save_head(Model::Ft, &out.head)?;
            write_rows(
                &ctx.art("finetune_log.tsv"),
                "step\tloss",
                out.step_losses
                    .iter()
                    .enumerate()
                    .map(|(i, l)| format!("{}\t{l}", i + 1)),
            )?;
        }
        Command::Score(ms) => {
            let s = score(&ctx, ms.model, ms.split.into())?;
            println!("scored {} accounts ({} fraud)", s.len(), s.fraud_count());
        }
        Command::Calibrate(ms) => {
            let split = Split::from(ms.split);
            let p = ctx.art(&format!("scores_{}_{}.tsv", ms.model.name(), split.as_str()));
            let scores = if p.exists() {
                ScoreSet::read_tsv(&p)?
            } else {
                score(&ctx, ms.model, split)?
            };
            let (decisions, evaluated) = calibrate_scores(&cfg.calibration, &scores, cfg.seed)?;
            let out = ctx.art(&format!("decisions_{}_{}.tsv", ms.model.name(), split.as_str()));
            contrafraud::calibrate::write_decisions(&out, &decisions, Some(&evaluated.labels))?;
            log::info!("wrote {}", out.display());
            let mut notes = Vec::new();
            for d in &decisions {
                println!("{}", contrafraud::calibrate::decision_row(d, Some(&evaluated.labels)));
                if d.bh_index.is_none() {
                    notes.push(format!(
                        "no crossing on the {} side at level {}",
                        d.side.as_str(),
                        d.level
                    ));
                }
                if d.adjusted_level == Some(1.0) {
                    notes.push(format!("corrected low-side level for {} capped at 1", d.level));
                }
            }
            if !notes.is_empty() {
                return Ok(Outcome::Degenerate(notes.join("; ")));
            }
        }
        Command::Evaluate { seeds } => {
            let seeds = seeds.unwrap_or_else(|| cfg.report.seeds.clone());
            if seeds.is_empty() {
                return Err(Error::InvalidArgument("no seeds to evaluate".into()));
            }
            let runs = seeds
                .par_iter()
                .map(|&s| run_seed(cfg, s))
                .collect::<Result<Vec<_>>>()?;
            ctx.ensure_dir()?;
            let records: Vec<_> = runs.iter().flat_map(records_of).collect();
            write_records(&ctx.art("evaluation.tsv"), &records)?;
            write_rows(
                &ctx.art("evaluation_pretrain.tsv"),
                "seed\tepoch\tmean_loss",
                runs.iter().flat_map(|r| {
                    r.trace
                        .iter()
                        .map(move |s| format!("{}\t{}\t{}", r.seed, s.epoch, s.mean_loss))
                }),
            )?;
            print!("{}", table_tsv(&detection_table(&records)));
            let na = records.iter().filter(|r| r.bh_index.is_none()).count();
            if na > 0 {
                return Ok(Outcome::Degenerate(format!("{na} decisions without a crossing")));
            }
        }
        Command::Report => {
            let p = ctx.art("evaluation.tsv");
            let mut wrote = false;
            let dir = ctx.art("report");
            let mut na_cells = 0;
            if p.exists() {
                let table = detection_table(&read_records(&p)?);
                na_cells = table.iter().filter(|r| r.na_seeds == r.seeds).count();
                write_text(&dir.join("detection_table.tsv"), &table_tsv(&table))?;
                wrote = true;
            }
            for model in [Model::Cr, Model::Tabular, Model::Ft] {
                let sp = ctx.art(&format!("scores_{}_test.tsv", model.name()));
                if !sp.exists() {
                    continue;
                }
                let h = Histogram::from_scores(&ScoreSet::read_tsv(&sp)?, cfg.report.bins)?;
                write_text(&dir.join(format!("histogram_{}.tsv", model.name())), &h.to_tsv())?;
                let title = format!("{} scores on the test split", model.name());
                write_text(&dir.join(format!("histogram_{}.svg", model.name())), &h.to_svg(&title))?;
                wrote = true;
            }
            if !wrote {
                return Err(missing(&p, "evaluate"));
            }
            if na_cells > 0 {
                return Ok(Outcome::Degenerate(format!("{na_cells} table rows are NA")));
            }
        }
        Command::Project { split } => {
            let split = Split::from(split);
            let p = ctx.art(&format!("embeddings_{}.tsv", split.as_str()));
            if !p.exists() {
                return Err(missing(&p, "embed"));
            }
            let (ids, labels, rows) = read_embeddings(&p)?;
            let proj = pca_project(&rows)?;
            write_rows(
                &ctx.art(&format!("projection_{}.tsv", split.as_str())),
                "account_id\tlabel\tx\ty",
                ids.iter()
                    .zip(&labels)
                    .zip(&proj.coords)
                    .map(|((id, y), c)| format!("{id}\t{y}\t{}\t{}", c[0], c[1])),
            )?;
            let r = rankme(&rows)?;
            write_text(
                &ctx.art(&format!("rankme_{}.tsv", split.as_str())),
                &format!("split\trankme\n{}\t{r}\n", split.as_str()),
            )?;
            println!("rankme {r:.4}");
            if proj.degenerate {
                return Ok(Outcome::Degenerate("embeddings span fewer than two directions".into()));
            }
        }
    }
    Ok(Outcome::Done)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidArgument(_) | Error::TomlDe(_) | Error::TomlSer(_) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Degenerate(msg)) => {
            eprintln!("warning: degenerate statistics: {msg}");
            ExitCode::from(EXIT_DEGENERATE)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

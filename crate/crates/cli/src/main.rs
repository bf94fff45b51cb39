use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context};
use chromalayer::capture::cdp::CdpPage;
use chromalayer::capture::server::FixtureServer;
use chromalayer::capture::{capture_page, CaptureConfig, PageOutcome};
use chromalayer::config::Config;
use chromalayer::dataset::{self, SampleInfo};
use chromalayer::model::SceneSource;
use chromalayer::synth::{AlphaMode, Layout, SynthParams};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

#[derive(Parser, Debug)]
#[command(name = "chromalayer", version, about = "Pixel-level annotation of web GUI elements")]
struct Cli {
    /// TOML or JSON file with `[derivation]` and `[capture]` sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for per-sample work (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Log failed samples and continue with the rest.
    #[arg(long, global = true)]
    keep_going: bool,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct CaptureArgs {
    /// File with one URL per line; blank lines and `#` comments are ignored.
    #[arg(long)]
    url_list: Option<PathBuf>,
    /// Serve this directory locally and capture every `.html` file in it.
    #[arg(long)]
    fixture_dir: Option<PathBuf>,
    /// Viewport as WIDTHxHEIGHT.
    #[arg(long, value_parser = parse_size)]
    viewport: Option<(u32, u32)>,
    /// Navigation timeout in seconds.
    #[arg(long)]
    timeout: Option<f64>,
    #[arg(long)]
    max_elements: Option<usize>,
    /// DevTools endpoint (`http://host:port` or a `ws://` page URL).
    #[arg(long)]
    devtools: Option<String>,
    #[arg(long)]
    out: PathBuf,
    /// Extra URLs.
    urls: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Capture screenshot groups and metadata from live pages or fixtures.
    Capture(CaptureArgs),
    /// Recover element bitmaps from captured groups.
    Derive { dir: PathBuf },
    /// Build the stack graph and write the minimum layering.
    Layerize { dir: PathBuf },
    /// Write masks, contours, bounding boxes and the manifest.
    Export { dir: PathBuf },
    /// Generate seeded synthetic samples with ground truth.
    Synth {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of samples; sample `i` uses seed `seed + i`.
        #[arg(long, default_value_t = 1)]
        count: u64,
        #[arg(long)]
        out: PathBuf,
        /// Canvas as WIDTHxHEIGHT.
        #[arg(long, value_parser = parse_size)]
        canvas: Option<(u32, u32)>,
        /// Element count range MIN-MAX.
        #[arg(long, value_parser = parse_range)]
        elements: Option<(usize, usize)>,
        /// random, disjoint or stacked.
        #[arg(long, value_parser = parse_enum::<Layout>)]
        layout: Option<Layout>,
        /// opaque, uniform-translucent, gradient or mixed.
        #[arg(long, value_parser = parse_enum::<AlphaMode>)]
        alpha: Option<AlphaMode>,
    },
    /// Check every invariant of one sample or a directory of samples.
    Verify { dir: PathBuf },
    /// Capture, derive, layerize and export in one go.
    Run(CaptureArgs),
}

fn parse_size(s: &str) -> Result<(u32, u32), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or("expected WIDTHxHEIGHT")?;
    let w = w.trim().parse().map_err(|e| format!("width: {e}"))?;
    let h = h.trim().parse().map_err(|e| format!("height: {e}"))?;
    Ok((w, h))
}

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    match s.split_once('-') {
        Some((a, b)) => Ok((a.parse().map_err(|e| format!("{e}"))?, b.parse().map_err(|e| format!("{e}"))?)),
        None => s.parse().map(|n| (n, n)).map_err(|e| format!("{e}")),
    }
}

fn parse_enum<T: serde::de::DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

struct Ctx {
    config: Config,
    keep_going: bool,
}

impl Ctx {
    /// Runs `work` on every item in parallel. Returns the number of failures;
    /// without `--keep-going` the first failure stops the remaining work.
    fn each<T: Sync>(&self, items: &[T], label: impl Fn(&T) -> String + Sync, work: impl Fn(&T) -> anyhow::Result<()> + Sync) -> usize {
        let run = |item: &T| match work(item) {
            Ok(()) => Ok(()),
            Err(e) => {
                log::error!("{}: {e:#}", label(item));
                Err(())
            }
        };
        if self.keep_going {
            items.par_iter().map(run).filter(Result::is_err).count()
        } else {
            usize::from(items.par_iter().try_for_each(run).is_err())
        }
    }
}

fn read_url_list(path: &Path) -> anyhow::Result<Vec<String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading url list {}", path.display()))?;
    Ok(text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).map(String::from).collect())
}

fn capture_config(base: &CaptureConfig, args: &CaptureArgs) -> anyhow::Result<CaptureConfig> {
    let mut cfg = base.clone();
    if let Some(v) = args.viewport {
        cfg.viewport = v;
    }
    if let Some(t) = args.timeout {
        cfg.timeout_secs = t;
    }
    if let Some(n) = args.max_elements {
        cfg.max_elements = n;
    }
    if let Some(d) = &args.devtools {
        cfg.devtools = d.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Captures every requested page; returns the sample directories written and the failure count.
fn capture(ctx: &Ctx, args: &CaptureArgs) -> anyhow::Result<(Vec<PathBuf>, usize)> {
    let cfg = capture_config(&ctx.config.capture, args)?;
    let mut urls = Vec::new();
    if let Some(list) = &args.url_list {
        urls.extend(read_url_list(list)?);
    }
    let server = match &args.fixture_dir {
        Some(dir) => Some(FixtureServer::start(dir)?),
        None => None,
    };
    if let Some(srv) = &server {
        let mut pages: Vec<String> = std::fs::read_dir(srv.root())?
            .filter_map(|e| e.ok())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .filter(|n| n.ends_with(".html"))
            .collect();
        pages.sort();
        urls.extend(pages.iter().map(|p| srv.url(p)));
    }
    urls.extend(args.urls.iter().cloned());
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;

    let jobs: Vec<(usize, String)> = urls.into_iter().enumerate().collect();
    let written = std::sync::Mutex::new(Vec::new());
    let failures = ctx.each(
        &jobs,
        |(_, url)| url.clone(),
        |(i, url)| {
            let dir = args.out.join(dataset::sample_dir_name(*i, url));
            let mut page = CdpPage::open(&cfg)?;
            match capture_page(&mut page, url, &cfg)? {
                PageOutcome::Dead => log::info!("{url}: skipped as a dead page"),
                PageOutcome::Captured(c) => {
                    dataset::write_capture(&dir, &c, SceneSource::Captured)?;
                    log::info!("{url}: {} elements, {} discarded", c.elements.len(), c.discarded.len());
                    written.lock().unwrap().push(dir);
                }
            }
            std::thread::sleep(Duration::from_millis(cfg.page_delay_ms));
            Ok(())
        },
    );
    let mut dirs = written.into_inner().unwrap();
    dirs.sort();
    Ok((dirs, failures))
}

fn post_capture(ctx: &Ctx, dir: &Path) -> anyhow::Result<()> {
    dataset::derive_stage(dir, &ctx.config.derivation)?;
    dataset::layerize_stage(dir)?;
    let info: SampleInfo = dataset::sample_info(dir, &ctx.config.hash());
    dataset::export_stage(dir, &info)?;
    Ok(())
}

fn label(p: &PathBuf) -> String {
    p.display().to_string()
}

fn execute(ctx: &Ctx, command: Command) -> anyhow::Result<usize> {
    let failures = match command {
        Command::Capture(args) => capture(ctx, &args)?.1,
        Command::Derive { dir } => {
            let samples = dataset::find_samples(&dir)?;
            ctx.each(&samples, label, |d| dataset::derive_stage(d, &ctx.config.derivation).map(drop).map_err(Into::into))
        }
        Command::Layerize { dir } => {
            let samples = dataset::find_samples(&dir)?;
            ctx.each(&samples, label, |d| dataset::layerize_stage(d).map(drop).map_err(Into::into))
        }
        Command::Export { dir } => {
            let samples = dataset::find_samples(&dir)?;
            let hash = ctx.config.hash();
            ctx.each(&samples, label, |d| dataset::export_stage(d, &dataset::sample_info(d, &hash)).map(drop).map_err(Into::into))
        }
        Command::Synth { seed, count, out, canvas, elements, layout, alpha } => {
            let mut base = SynthParams::default();
            if let Some(c) = canvas {
                base.canvas = c;
            }
            if let Some(e) = elements {
                base.element_count = e;
            }
            if let Some(l) = layout {
                base.layout = l;
            }
            if let Some(a) = alpha {
                base.alpha_mode = a;
            }
            base.validate()?;
            let seeds: Vec<u64> = (0..count).map(|i| seed + i).collect();
            ctx.each(&seeds, |s| format!("seed {s}"), |&s| {
                let dir = out.join(dataset::sample_dir_name((s - seed) as usize, &format!("synth:{s}")));
                dataset::synth_sample(&dir, &SynthParams { seed: s, ..base.clone() }, &ctx.config)?;
                Ok(())
            })
        }
        Command::Verify { dir } => {
            let samples = dataset::find_samples(&dir)?;
            if samples.is_empty() {
                bail!("no samples under {}", dir.display());
            }
            ctx.each(&samples, label, |d| {
                let report = dataset::verify_sample(d, None)?;
                if report.is_ok() {
                    println!("{}: ok", d.display());
                    Ok(())
                } else {
                    for f in &report.findings {
                        println!("{}: {f}", d.display());
                    }
                    bail!("{} violation(s)", report.findings.len())
                }
            })
        }
        Command::Run(args) => {
            let (dirs, failed) = capture(ctx, &args)?;
            if failed > 0 && !ctx.keep_going {
                return Ok(failed);
            }
            failed + ctx.each(&dirs, label, |d| post_capture(ctx, d))
        }
    };
    Ok(failures)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let config = match Config::load(cli.config.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if cli.jobs > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let ctx = Ctx { config, keep_going: cli.keep_going };
    match execute(&ctx, cli.command) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(n) => {
            eprintln!("{n} sample(s) failed");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

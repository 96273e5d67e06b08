use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use dsa_territory::atlasreg::{load_library, register_best_atlas, save_library};
use dsa_territory::io::{load_binary_mask, load_mask, load_minip, load_sequence, save_mask, save_minip, save_sequence, write_json};
use dsa_territory::maskops::{derive_territories, MorphologyParams};
use dsa_territory::metrics::evaluate;
use dsa_territory::minip::{compute_minip, estimate_phases, full_minip, PhaseBoundaries, Standardize};
use dsa_territory::report::{
    build_cohort, run_phase_analysis, run_table1, run_timing, write_outputs, CohortManifest, CohortSpec, ExperimentConfig,
};
use dsa_territory::stats::{chi2_proportions, mcnemar, paired_t, wilcoxon_signed_rank};
use dsa_territory::synth::{atlas_library, generate, PhantomSpec};
use dsa_territory::{Occlusion, Phase, PhaseScope, Stage, View};

#[derive(Parser)]
#[command(name = "dsa-territory", version, about = "Vascular territory segmentation toolkit for DSA MinIPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Minimum intensity projection of a frame sequence.
    Minip(MinipArgs),
    /// ACA = cleanup(ICA − MCA), written as a label map.
    DeriveAca(DeriveArgs),
    /// Overlap and surface metrics of a prediction against a reference.
    Eval(EvalArgs),
    /// Paired or two-sample hypothesis tests on CSV columns.
    Stats(StatsArgs),
    /// Best-atlas registration onto a patient MinIP.
    AtlasRegister(AtlasArgs),
    /// Synthetic phantoms, cohorts and atlas libraries.
    Synth(SynthArgs),
    /// Experiment tables over a cohort manifest.
    Report(ReportArgs),
    /// Rating service.
    Serve(ServeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum PhaseArg {
    Full,
    NonContrast,
    Arterial,
    Capillary,
    Venous,
}

#[derive(Clone, Copy, ValueEnum)]
enum PhaseSource {
    Sidecar,
    Heuristic,
}

#[derive(Args)]
struct MinipArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "full")]
    phase: PhaseArg,
    #[arg(long, value_enum, default_value = "sidecar")]
    phases_from: PhaseSource,
    /// Keep the native size instead of standardizing to 1024×1024.
    #[arg(long)]
    native: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DeriveArgs {
    #[arg(long)]
    ica: PathBuf,
    #[arg(long)]
    mca: PathBuf,
    #[arg(long, default_value_t = dsa_territory::maskops::DEFAULT_RADIUS)]
    radius: u32,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum TestArg {
    Wilcoxon,
    PairedT,
    Mcnemar,
    Chi2,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(value_enum)]
    test: TestArg,
    /// One value per line or comma; 0/1 outcomes for mcnemar and chi2.
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
}

#[derive(Args)]
struct AtlasArgs {
    #[arg(long)]
    library: PathBuf,
    #[arg(long)]
    patient: PathBuf,
    #[arg(long)]
    view: View,
    #[arg(long)]
    out_transform: PathBuf,
    #[arg(long)]
    out_mask: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum StageArg {
    Pre,
    Post,
}

#[derive(Args)]
#[command(args_conflicts_with_subcommands = true)]
struct SynthArgs {
    #[command(subcommand)]
    command: Option<SynthCommand>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "M1")]
    occlusion: Occlusion,
    #[arg(long, value_enum, default_value = "post")]
    stage: StageArg,
    #[arg(long, default_value = "AP")]
    view: View,
    #[arg(long, default_value_t = 512)]
    canvas: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum SynthCommand {
    /// Cohort of patients with references, predictions and a manifest.
    Cohort {
        #[arg(long, default_value_t = 50)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Atlas library used to add ATLAS predictions.
        #[arg(long)]
        library: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Synthetic atlas library.
    Library {
        #[arg(long, default_value_t = 21)]
        n: usize,
        #[arg(long, default_value_t = 1_000_000)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportKind {
    Table1,
    Phases,
    Timing,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(value_enum)]
    kind: ReportKind,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ServeArgs {
    /// Directory holding the session event logs.
    #[arg(long, default_value = "rating-data")]
    data: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Minip(a) => minip(a),
        Command::DeriveAca(a) => {
            let ica = load_binary_mask(&a.ica)?;
            let mca = load_binary_mask(&a.mca)?;
            let (labels, warning) = derive_territories(&ica, &mca, &MorphologyParams::with_radius(a.radius))?;
            if let Some(w) = warning {
                eprintln!("warning: {w:?}");
            }
            save_mask(&labels, &a.out)?;
            Ok(())
        }
        Command::Eval(a) => {
            let report = evaluate(&load_mask(&a.pred)?, &load_mask(&a.reference)?)?;
            if a.json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                for (name, m) in [("ICA", report.ica), ("MCA", report.mca)] {
                    let d = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.2}"));
                    println!("{name}  DSC {:.4}  JI {:.4}  ASD {}  HD {}", m.dsc, m.ji, d(m.asd), d(m.hd));
                }
            }
            Ok(())
        }
        Command::Stats(a) => stats(a),
        Command::AtlasRegister(a) => {
            let library = load_library(&a.library)?;
            let patient = load_minip(&a.patient)?;
            let best = register_best_atlas(&library, &patient, a.view)?;
            write_json(&best.result.transform, &a.out_transform)?;
            save_mask(&best.warped_masks, &a.out_mask)?;
            println!(
                "{}",
                serde_json::json!({
                    "atlas_id": best.result.atlas_id,
                    "similarity": best.result.similarity,
                    "failed": best.result.failed,
                    "elapsed_s": best.result.elapsed_s,
                })
            );
            Ok(())
        }
        Command::Synth(a) => synth(a),
        Command::Report(a) => report(a),
        Command::Serve(a) => {
            let store = Arc::new(dsa_territory_rating::Store::open(&a.data)?);
            eprintln!("listening on http://{}", a.addr);
            tokio::runtime::Runtime::new()?.block_on(dsa_territory_rating::serve(store, a.addr))?;
            Ok(())
        }
    }
}

fn minip(a: MinipArgs) -> Result<()> {
    let seq = load_sequence(&a.input)?;
    let img = match a.phase {
        PhaseArg::Full => full_minip(&seq),
        p => {
            let phase = match p {
                PhaseArg::NonContrast => Phase::NonContrast,
                PhaseArg::Arterial => Phase::Arterial,
                PhaseArg::Capillary => Phase::Capillary,
                PhaseArg::Venous => Phase::Venous,
                PhaseArg::Full => unreachable!(),
            };
            let boundaries = match a.phases_from {
                PhaseSource::Sidecar => match seq.phase_labels() {
                    Some(l) => PhaseBoundaries::new(l.to_vec()),
                    None => bail!("{} has no phase_labels; use --phases-from heuristic", a.input.display()),
                },
                PhaseSource::Heuristic => {
                    let est = estimate_phases(&seq)?;
                    if est.no_contrast {
                        eprintln!("warning: no contrast detected, all frames labeled {}", Phase::NonContrast);
                    }
                    est.boundaries
                }
            };
            let frames = boundaries.frames_of(phase);
            if frames.is_empty() {
                bail!("no {phase} frames in {}", a.input.display());
            }
            let img = compute_minip(&seq, &frames)?;
            debug_assert_eq!(img.phase_scope(), PhaseScope::from(phase));
            img
        }
    };
    let img = if a.native { img } else { img.standardize()? };
    save_minip(&img, &a.out)?;
    Ok(())
}

fn read_column(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (i, tok) in text.split([',', '\n', '\r', ';', '\t']).map(str::trim).filter(|t| !t.is_empty()).enumerate() {
        match tok.parse::<f64>() {
            Ok(v) => out.push(v),
            Err(_) if i == 0 => {} // header
            Err(_) => bail!("{}: not a number: {tok}", path.display()),
        }
    }
    Ok(out)
}

fn outcomes(xs: &[f64], path: &Path) -> Result<Vec<bool>> {
    xs.iter()
        .map(|&v| match v {
            0.0 => Ok(false),
            1.0 => Ok(true),
            _ => bail!("{}: outcomes must be 0 or 1, got {v}", path.display()),
        })
        .collect()
}

fn stats(a: StatsArgs) -> Result<()> {
    let xs = read_column(&a.a)?;
    let ys = read_column(&a.b)?;
    let result = match a.test {
        TestArg::Wilcoxon => wilcoxon_signed_rank(&xs, &ys)?,
        TestArg::PairedT => paired_t(&xs, &ys)?,
        TestArg::Mcnemar => {
            let (oa, ob) = (outcomes(&xs, &a.a)?, outcomes(&ys, &a.b)?);
            if oa.len() != ob.len() {
                bail!("paired outcomes differ in length: {} vs {}", oa.len(), ob.len());
            }
            let b = oa.iter().zip(&ob).filter(|(x, y)| **x && !**y).count() as u64;
            let c = oa.iter().zip(&ob).filter(|(x, y)| !**x && **y).count() as u64;
            mcnemar(b, c)?
        }
        TestArg::Chi2 => {
            let (oa, ob) = (outcomes(&xs, &a.a)?, outcomes(&ys, &a.b)?);
            let s = |o: &[bool]| o.iter().filter(|v| **v).count() as u64;
            chi2_proportions(s(&oa), oa.len() as u64, s(&ob), ob.len() as u64)?
        }
    };
    println!("{}", serde_json::to_string_pretty(&result)?);
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    match a.command {
        Some(SynthCommand::Cohort { n, seed, library, out }) => {
            let lib = library.map(|p| load_library(&p)).transpose()?;
            let manifest = build_cohort(&CohortSpec::new(n, seed), &out, lib.as_deref())?;
            let acquisitions: usize = manifest.cases.iter().map(|c| c.acquisitions.len()).sum();
            println!("{} patients, {acquisitions} acquisitions, manifest {}", manifest.cases.len(), out.join("manifest.json").display());
            Ok(())
        }
        Some(SynthCommand::Library { n, seed, out }) => {
            let entries = atlas_library(n, seed)?;
            save_library(&entries, &out)?;
            println!("{} atlases written to {}", entries.len(), out.display());
            Ok(())
        }
        None => {
            let Some(out) = a.out else {
                bail!("--out is required");
            };
            let stage = match a.stage {
                StageArg::Pre => Stage::PreEvt,
                StageArg::Post => Stage::PostEvt,
            };
            let spec = PhantomSpec {
                canvas: a.canvas,
                ..PhantomSpec::new(a.seed, a.view, stage, a.occlusion)
            };
            let phantom = generate(&spec)?;
            save_sequence(&phantom.sequence, &out)?;
            save_mask(&phantom.territories, out.join("territories.png"))?;
            write_json(&spec, out.join("phantom.json"))?;
            println!("{} frames written to {}", phantom.sequence.len(), out.display());
            Ok(())
        }
    }
}

fn report(a: ReportArgs) -> Result<()> {
    let manifest = CohortManifest::load(&a.manifest)?;
    let base = a.manifest.parent().map(PathBuf::from).unwrap_or_default();
    let (config, config_dir) = match &a.config {
        Some(p) => (ExperimentConfig::load(p)?, p.parent().map(PathBuf::from).unwrap_or_default()),
        None => (ExperimentConfig::default(), PathBuf::new()),
    };
    match a.kind {
        ReportKind::Table1 => {
            let (table, cases) = run_table1(&manifest, &base, &config)?;
            let text = table.to_text();
            write_outputs(&a.out, "table1", &table, &text, Some(&cases))?;
            print!("{text}");
        }
        ReportKind::Phases => {
            let (table, cases) = run_phase_analysis(&manifest, &base, &config)?;
            let text = table.to_text();
            write_outputs(&a.out, "phases", &table, &text, Some(&cases))?;
            print!("{text}");
        }
        ReportKind::Timing => {
            let Some(lib) = &config.atlas_library else {
                bail!("timing needs atlas_library in the config");
            };
            let library = load_library(config_dir.join(lib))?;
            let table = run_timing(&manifest, &base, &config, &library)?;
            let text = table.to_text();
            write_outputs(&a.out, "timing", &table, &text, None)?;
            print!("{text}");
            if !table.ordering_holds {
                bail!("atlas path was not slower than the pipeline path");
            }
        }
    }
    Ok(())
}

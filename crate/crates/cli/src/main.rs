use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use log::info;
use qnc_core::experiment::{metadata, pool, write_envelope, write_pooled, write_records};
use qnc_core::qnc::{self, Resolution};
use qnc_core::{
    best_l_envelope, default_epsilon, draw_coefficients, generate_network, io, kappa_theorem, l1_decode,
    make_quantizer, mixture_mmse_decode, progressive_estimate, random_orthonormal, run_sweep, sample_ensemble,
    simulate_forwarding, snr_db, DecoderKind, DecoderProblem, Deployment, ExperimentConfig, MmseOptions,
    QuantizerPlan, SourceModel,
};

mod audit;

#[derive(Parser)]
#[command(name = "qnc-lab", version, about = "One-step quantized network coding simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// SNR-versus-delay sweep over deployments and block lengths.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte Carlo checks of the measurement-matrix and message statistics.
    Audit {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate one deployment and write its edge list.
    Deploy {
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 400)]
        edges: usize,
        #[arg(long, default_value_t = 1)]
        capacity: u32,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run both schemes once on a deployment and dump every intermediate.
    Run {
        /// Edge list written by `deploy`.
        #[arg(long)]
        deployment: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        sparsity: f64,
        #[arg(long = "L", default_value_t = 8)]
        block_length: u32,
        #[arg(long, default_value_t = 1.0)]
        m_fraction: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        sigma_s2: f64,
        #[arg(long, default_value_t = 0.01)]
        sigma_z2: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn sweep(config: &Path, out: &Path) -> Result<()> {
    let text = fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
    let cfg = ExperimentConfig::parse(&text)?;
    fs::create_dir_all(out)?;
    info!("sweep: {} edge counts x {} sparsities x {} deployments", cfg.edges.len(), cfg.sparsity.len(), cfg.deployments);
    let records = run_sweep(&cfg)?;
    let unconverged = records.iter().filter(|r| !r.converged).count();
    if unconverged > 0 {
        log::warn!("{unconverged} records come from decodes that hit the iteration limit");
    }
    write_records(&records, create(&out.join("records.csv"))?)?;
    write_envelope(&best_l_envelope(&records, &cfg.snr_targets), create(&out.join("envelope.csv"))?)?;
    write_pooled(&pool(&records), create(&out.join("pooled.csv"))?)?;
    fs::write(out.join("metadata.txt"), metadata(&cfg))?;
    println!("wrote {} records to {}", records.len(), out.display());
    Ok(())
}

fn deploy(n: usize, edges: usize, capacity: u32, seed: u64, out: &Path) -> Result<()> {
    let dep = generate_network(n, edges, capacity, seed)?;
    io::write_edge_list(&dep.graph, create(out)?)?;
    let max_hops = dep.graph.nodes().map(|v| dep.routes.hops(v)).max().unwrap_or(0);
    println!("n = {n}, |E| = {edges}, gateway = {}, max hops = {max_hops}", dep.graph.gateway());
    Ok(())
}

fn run_once(dep: &Deployment, model: SourceModel, l: u32, m_fraction: f64, seed: u64, out: &Path) -> Result<()> {
    let g = &dep.graph;
    let n = g.n();
    fs::create_dir_all(out)?;
    let phi = random_orthonormal(n, seed);
    let ens = sample_ensemble(&model, &phi, seed);
    let coeffs = draw_coefficients(g, kappa_theorem(n, g.num_edges()), seed)?;
    let plan = QuantizerPlan::new(4.0, model.sigma_s(), Resolution::BlockLength(l));
    let m_target = (m_fraction * n as f64).round() as usize;
    let sys = qnc::simulate(dep, &ens.x, &coeffs, &plan, m_target, seed)?;
    let quantizer = make_quantizer(4.0, model.sigma_s(), l, g.edges()[0].capacity)?;
    let sched = simulate_forwarding(dep, &ens.x, &quantizer);

    io::write_ensemble(&ens, create(&out.join("ensemble.csv"))?)?;
    io::write_matrix(&phi, create(&out.join("phi.txt"))?)?;
    io::write_measurements(&sys, create(&out.join("measurements.csv"))?)?;
    io::write_matrix(&sys.psi, create(&out.join("psi.txt"))?)?;
    io::write_schedule(&sched, create(&out.join("schedule.csv"))?)?;

    let prob = DecoderProblem::from_measurements(&sys, sys.m(), model, &phi)?;
    let mmse = mixture_mmse_decode(&prob, &MmseOptions::default());
    let l1 = l1_decode(&prob, default_epsilon(&prob, 1.2)?)?;
    let fwd = progressive_estimate(&sched, sched.last_slot(), 0.0);
    println!("rows received: {} (last at slot {}), identity residual {:.2e}", sys.m(), sys.last_slot(), sys.identity_residual(&ens.x));
    println!("forwarding: all delivered by slot {}, SNR {:.2} dB", sched.last_slot(), snr_db(&ens.x, &fwd));
    for (kind, res) in [(DecoderKind::Mmse, &mmse), (DecoderKind::L1, &l1)] {
        println!(
            "qnc-{}: SNR {:.2} dB ({} iterations, converged = {})",
            kind.name(),
            snr_db(&ens.x, &res.x_hat),
            res.iterations,
            res.converged
        );
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Sweep { config, out } => sweep(&config, &out),
        Command::Audit { config, out } => {
            let text = fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let report = audit::run(&audit::AuditConfig::parse(&text)?, out.as_deref())?;
            print!("{report}");
            Ok(())
        }
        Command::Deploy { n, edges, capacity, seed, out } => deploy(n, edges, capacity, seed, &out),
        Command::Run { deployment, sparsity, block_length, m_fraction, seed, sigma_s2, sigma_z2, out } => {
            let file = File::open(&deployment).with_context(|| format!("opening {}", deployment.display()))?;
            let dep = io::read_deployment(BufReader::new(file))?;
            let model = SourceModel::new(dep.graph.n(), sparsity, sigma_s2, sigma_z2)?;
            run_once(&dep, model, block_length, m_fraction, seed, &out)
        }
    }
}

//! SNR-versus-delay sweeps over deployments and block lengths.
//!
//! For every deployment and block length `L`, one-step QNC and the routing
//! baseline run on the same messages. At each slot `t` the gateway decodes
//! from whatever has arrived, producing one record per `(scheme, decoder, t)`
//! with delay `t·L` channel uses. Envelopes pick, per SNR target, the
//! smallest delay over `(L, t)` whose SNR pooled across deployments reaches
//! the target.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use log::debug;
use nalgebra::DVector;
use rayon::prelude::*;

use crate::decoders::{default_epsilon, l1_decode, mixture_mmse_decode, DecoderProblem, MmseOptions, SnrAccumulator};
use crate::error::{QncError, Result};
use crate::forwarding::{progressive_estimate, simulate_forwarding};
use crate::messages::{random_orthonormal, sample_ensemble, SourceModel, StateLaw};
use crate::netgraph::generate_network;
use crate::qnc::{self, draw_coefficients, kappa_theorem, QuantizerPlan, Resolution};
use crate::quantize::make_quantizer;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scheme {
    Qnc,
    Forwarding,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Qnc => "qnc",
            Scheme::Forwarding => "forwarding",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DecoderKind {
    Mmse,
    L1,
}

impl DecoderKind {
    pub fn name(self) -> &'static str {
        match self {
            DecoderKind::Mmse => "mmse",
            DecoderKind::L1 => "l1",
        }
    }
}

impl FromStr for DecoderKind {
    type Err = QncError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "mmse" => Ok(DecoderKind::Mmse),
            "l1" => Ok(DecoderKind::L1),
            other => Err(QncError::InvalidParameter(format!("unknown decoder '{other}' (expected mmse or l1)"))),
        }
    }
}

/// Decoder column value for the routing baseline.
pub const DIRECT_DECODER: &str = "direct";

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n: usize,
    pub edges: Vec<usize>,
    pub sparsity: Vec<f64>,
    pub sigma_s2: f64,
    pub sigma_z2: f64,
    pub capacity: u32,
    pub block_lengths: Vec<u32>,
    pub deployments: usize,
    /// Fraction of nodes forwarding their combination (`m_target = round(f·n)`).
    pub m_fraction: f64,
    pub decoders: Vec<DecoderKind>,
    pub seed: u64,
    pub range_sigma: f64,
    pub epsilon_safety: f64,
    pub mmse_max_iters: usize,
    pub exact_k: bool,
    pub snr_targets: Vec<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 100,
            edges: vec![400, 800],
            sparsity: vec![0.05, 0.15],
            sigma_s2: 1.0,
            sigma_z2: 0.01,
            capacity: 1,
            block_lengths: vec![2, 4, 6, 8, 10, 12],
            deployments: 20,
            m_fraction: 1.0,
            decoders: vec![DecoderKind::Mmse, DecoderKind::L1],
            seed: 2013,
            range_sigma: 4.0,
            epsilon_safety: 1.2,
            mmse_max_iters: 50,
            exact_k: false,
            snr_targets: (0..=30).map(f64::from).collect(),
        }
    }
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| QncError::InvalidParameter(format!("bad value '{s}' for {key}"))))
        .collect()
}

fn parse_one<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| QncError::InvalidParameter(format!("bad value '{value}' for {key}")))
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// Parse a flat `key = value` file. Lists are comma separated, `#`
    /// starts a comment, and omitted keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| QncError::Parse {
                line: idx + 1,
                msg: format!("expected key = value, got '{line}'"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            let wrap = |e: QncError| QncError::Parse { line: idx + 1, msg: e.to_string() };
            match key {
                "n" => cfg.n = parse_one(key, value).map_err(wrap)?,
                "edges" => cfg.edges = parse_list(key, value).map_err(wrap)?,
                "sparsity" => cfg.sparsity = parse_list(key, value).map_err(wrap)?,
                "sigma_s2" => cfg.sigma_s2 = parse_one(key, value).map_err(wrap)?,
                "sigma_z2" => cfg.sigma_z2 = parse_one(key, value).map_err(wrap)?,
                "capacity" => cfg.capacity = parse_one(key, value).map_err(wrap)?,
                "L" | "block_lengths" => cfg.block_lengths = parse_list(key, value).map_err(wrap)?,
                "deployments" => cfg.deployments = parse_one(key, value).map_err(wrap)?,
                "m_fraction" => cfg.m_fraction = parse_one(key, value).map_err(wrap)?,
                "decoders" => cfg.decoders = parse_list(key, value).map_err(wrap)?,
                "seed" => cfg.seed = parse_one(key, value).map_err(wrap)?,
                "range_sigma" => cfg.range_sigma = parse_one(key, value).map_err(wrap)?,
                "epsilon_safety" => cfg.epsilon_safety = parse_one(key, value).map_err(wrap)?,
                "mmse_max_iters" => cfg.mmse_max_iters = parse_one(key, value).map_err(wrap)?,
                "exact_k" => cfg.exact_k = parse_one(key, value).map_err(wrap)?,
                "snr_targets" => cfg.snr_targets = parse_list(key, value).map_err(wrap)?,
                other => {
                    return Err(QncError::Parse { line: idx + 1, msg: format!("unknown key '{other}'") });
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        format!(
            "n = {}\nedges = {}\nsparsity = {}\nsigma_s2 = {}\nsigma_z2 = {}\ncapacity = {}\nL = {}\ndeployments = {}\n\
             m_fraction = {}\ndecoders = {}\nseed = {}\nrange_sigma = {}\nepsilon_safety = {}\nmmse_max_iters = {}\n\
             exact_k = {}\nsnr_targets = {}\n",
            self.n,
            join(&self.edges),
            join(&self.sparsity),
            self.sigma_s2,
            self.sigma_z2,
            self.capacity,
            join(&self.block_lengths),
            self.deployments,
            self.m_fraction,
            self.decoders.iter().map(|d| d.name()).collect::<Vec<_>>().join(","),
            self.seed,
            self.range_sigma,
            self.epsilon_safety,
            self.mmse_max_iters,
            self.exact_k,
            join(&self.snr_targets),
        )
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(QncError::InvalidParameter(msg.to_string()));
        if self.block_lengths.is_empty() || self.block_lengths.contains(&0) {
            return bad("L grid must be nonempty and positive");
        }
        if self.deployments < 1 {
            return bad("need at least one deployment");
        }
        if self.edges.is_empty() || self.sparsity.is_empty() {
            return bad("edges and sparsity lists must be nonempty");
        }
        if !(0.0..=1.0).contains(&self.m_fraction) {
            return bad("m_fraction must lie in [0, 1]");
        }
        for &p in &self.sparsity {
            self.source(p)?;
        }
        Ok(())
    }

    pub fn m_target(&self) -> usize {
        (self.m_fraction * self.n as f64).round() as usize
    }

    pub fn source(&self, sparsity: f64) -> Result<SourceModel> {
        let law = if self.exact_k { StateLaw::ExactK } else { StateLaw::Bernoulli };
        Ok(SourceModel::new(self.n, sparsity, self.sigma_s2, self.sigma_z2)?.with_law(law))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub scheme: Scheme,
    /// `None` for the routing baseline.
    pub decoder: Option<DecoderKind>,
    /// Seed of the deployment (graph, transform, messages, coefficients).
    pub seed: u64,
    pub edges: usize,
    pub sparsity: f64,
    pub block_length: u32,
    pub t: usize,
    pub snr: SnrAccumulator,
    pub converged: bool,
}

impl ExperimentRecord {
    pub fn delay_uses(&self) -> usize {
        self.t * self.block_length as usize
    }

    pub fn decoder_name(&self) -> &'static str {
        self.decoder.map_or(DIRECT_DECODER, DecoderKind::name)
    }

    /// Series label used in envelope output.
    pub fn series(&self) -> String {
        match self.decoder {
            Some(d) => format!("{}-{}", self.scheme, d.name()),
            None => self.scheme.to_string(),
        }
    }

    fn sort_key(&self) -> (Scheme, Option<DecoderKind>, usize, u64, u64, u32, usize) {
        (self.scheme, self.decoder, self.edges, self.sparsity.to_bits(), self.seed, self.block_length, self.t)
    }
}

/// Seed of deployment `index` at the given edge count and sparsity.
pub fn deployment_seed(cfg: &ExperimentConfig, edges: usize, sparsity: f64, index: usize) -> u64 {
    seed::derive(cfg.seed, &[edges as u64, sparsity.to_bits(), index as u64])
}

fn run_deployment(cfg: &ExperimentConfig, edges: usize, sparsity: f64, index: usize) -> Result<Vec<ExperimentRecord>> {
    let dseed = deployment_seed(cfg, edges, sparsity, index);
    let model = cfg.source(sparsity)?;
    let dep = generate_network(cfg.n, edges, cfg.capacity, dseed)?;
    let phi = random_orthonormal(cfg.n, dseed);
    let ens = sample_ensemble(&model, &phi, dseed);
    let coeffs = draw_coefficients(&dep.graph, kappa_theorem(cfg.n, edges), dseed)?;
    let sigma_s = model.sigma_s();
    let mut out = Vec::new();
    let record = |scheme, decoder, l, t, snr, converged| ExperimentRecord {
        scheme,
        decoder,
        seed: dseed,
        edges,
        sparsity,
        block_length: l,
        t,
        snr,
        converged,
    };

    for &l in &cfg.block_lengths {
        let quantizer = make_quantizer(cfg.range_sigma, sigma_s, l, cfg.capacity)?;
        let sched = simulate_forwarding(&dep, &ens.x, &quantizer);
        for t in 1..=sched.last_slot().max(1) {
            let mut acc = SnrAccumulator::default();
            acc.add(&ens.x, &progressive_estimate(&sched, t, 0.0));
            out.push(record(Scheme::Forwarding, None, l, t, acc, true));
        }

        let plan = QuantizerPlan::new(cfg.range_sigma, sigma_s, Resolution::BlockLength(l));
        let sys = qnc::simulate(&dep, &ens.x, &coeffs, &plan, cfg.m_target(), dseed)?;
        let full = DecoderProblem::from_measurements(&sys, sys.m(), model, &phi)?;
        for &decoder in &cfg.decoders {
            let mut last: Option<(usize, DVector<f64>, bool)> = None;
            for t in 1..=sys.last_slot().max(1) {
                let rows = sys.rows_by(t);
                if last.as_ref().is_none_or(|(m, _, _)| *m != rows) {
                    let prob = full.truncated(rows);
                    let res = match decoder {
                        DecoderKind::Mmse => {
                            mixture_mmse_decode(&prob, &MmseOptions { max_iters: cfg.mmse_max_iters, ..Default::default() })
                        }
                        DecoderKind::L1 => l1_decode(&prob, default_epsilon(&prob, cfg.epsilon_safety)?)?,
                    };
                    if !res.converged {
                        debug!(
                            "{} decoder did not converge (seed {dseed}, edges {edges}, sparsity {sparsity}, L {l}, t {t}, m {rows})",
                            decoder.name()
                        );
                    }
                    last = Some((rows, res.x_hat, res.converged));
                }
                let (_, x_hat, converged) = last.as_ref().expect("decoded above");
                let mut acc = SnrAccumulator::default();
                acc.add(&ens.x, x_hat);
                out.push(record(Scheme::Qnc, Some(decoder), l, t, acc, *converged));
            }
        }
    }
    Ok(out)
}

/// Run every `(edges, sparsity, deployment)` job and return records in
/// canonical order.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRecord>> {
    cfg.validate()?;
    let jobs: Vec<(usize, f64, usize)> = cfg
        .edges
        .iter()
        .flat_map(|&e| cfg.sparsity.iter().flat_map(move |&p| (0..cfg.deployments).map(move |d| (e, p, d))))
        .collect();
    let mut records: Vec<ExperimentRecord> = jobs
        .par_iter()
        .map(|&(e, p, d)| run_deployment(cfg, e, p, d))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    records.sort_by_key(ExperimentRecord::sort_key);
    Ok(records)
}

/// Key of a pooled curve: series label, edges, sparsity.
pub type CurveKey = (String, usize, u64);

/// SNR pooled across deployments at matched `(series, edges, sparsity, L, t)`.
///
/// Deployments whose delivery finished before `t` contribute their final
/// estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledPoint {
    pub series: String,
    pub scheme: Scheme,
    pub decoder: &'static str,
    pub edges: usize,
    pub sparsity: f64,
    pub block_length: u32,
    pub t: usize,
    pub pooled: SnrAccumulator,
    /// Mean of the per-deployment SNRs in dB (capped).
    pub mean_db: f64,
}

impl PooledPoint {
    pub fn delay_uses(&self) -> usize {
        self.t * self.block_length as usize
    }
}

pub fn pool(records: &[ExperimentRecord]) -> Vec<PooledPoint> {
    type Group<'a> = BTreeMap<u64, Vec<&'a ExperimentRecord>>;
    let mut groups: BTreeMap<(String, usize, u64, u32), Group<'_>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.series(), r.edges, r.sparsity.to_bits(), r.block_length))
            .or_default()
            .entry(r.seed)
            .or_default()
            .push(r);
    }
    let mut out = Vec::new();
    for ((series, edges, sparsity, l), by_seed) in groups {
        let mut series_by_seed: Vec<Vec<&ExperimentRecord>> = by_seed.into_values().collect();
        for s in &mut series_by_seed {
            s.sort_by_key(|r| r.t);
        }
        let first = series_by_seed[0][0];
        let slots: std::collections::BTreeSet<usize> = series_by_seed.iter().flatten().map(|r| r.t).collect();
        // Pool only where every deployment has a record at or before `t`.
        let start = series_by_seed.iter().map(|s| s[0].t).max().unwrap_or(0);
        for t in slots.into_iter().filter(|&t| t >= start) {
            let mut pooled = SnrAccumulator::default();
            let mut mean_db = 0.0;
            for s in &series_by_seed {
                let r = s[s.partition_point(|r| r.t <= t) - 1];
                pooled.merge(&r.snr);
                mean_db += r.snr.capped_db();
            }
            out.push(PooledPoint {
                series: series.clone(),
                scheme: first.scheme,
                decoder: first.decoder_name(),
                edges,
                sparsity: f64::from_bits(sparsity),
                block_length: l,
                t,
                pooled,
                mean_db: mean_db / series_by_seed.len() as f64,
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopePoint {
    pub series: String,
    pub edges: usize,
    pub sparsity: f64,
    pub snr_target_db: f64,
    /// Minimum delay in channel uses and the block length achieving it;
    /// `None` when no `(L, t)` reaches the target.
    pub best: Option<(usize, u32)>,
}

/// Best-block-length envelope per series, edge count and sparsity.
pub fn best_l_envelope(records: &[ExperimentRecord], snr_targets: &[f64]) -> Vec<EnvelopePoint> {
    let pooled = pool(records);
    let mut curves: BTreeMap<CurveKey, Vec<&PooledPoint>> = BTreeMap::new();
    for p in &pooled {
        curves.entry((p.series.clone(), p.edges, p.sparsity.to_bits())).or_default().push(p);
    }
    let mut out = Vec::new();
    for ((series, edges, sparsity), points) in curves {
        for &target in snr_targets {
            let best = points
                .iter()
                .filter(|p| p.pooled.snr_db() >= target)
                .map(|p| (p.delay_uses(), p.block_length))
                .min();
            out.push(EnvelopePoint { series: series.clone(), edges, sparsity: f64::from_bits(sparsity), snr_target_db: target, best });
        }
    }
    out
}

pub const RECORDS_HEADER: [&str; 9] = ["scheme", "seed", "edges", "sparsity", "L", "t", "delay_uses", "snr_db", "decoder"];
pub const ENVELOPE_HEADER: [&str; 6] = ["scheme", "edges", "sparsity", "snr_target_db", "delay_uses", "L"];
pub const POOLED_HEADER: [&str; 9] =
    ["scheme", "decoder", "edges", "sparsity", "L", "t", "delay_uses", "pooled_snr_db", "mean_snr_db"];

pub fn write_records<W: Write>(records: &[ExperimentRecord], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(RECORDS_HEADER)?;
    for r in records {
        out.write_record([
            r.scheme.name().to_string(),
            r.seed.to_string(),
            r.edges.to_string(),
            r.sparsity.to_string(),
            r.block_length.to_string(),
            r.t.to_string(),
            r.delay_uses().to_string(),
            format!("{:.6}", r.snr.capped_db()),
            r.decoder_name().to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Unachievable targets are written with empty delay and `L` fields.
pub fn write_envelope<W: Write>(points: &[EnvelopePoint], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(ENVELOPE_HEADER)?;
    for p in points {
        let (delay, l) = p.best.map_or((String::new(), String::new()), |(d, l)| (d.to_string(), l.to_string()));
        out.write_record([p.series.clone(), p.edges.to_string(), p.sparsity.to_string(), p.snr_target_db.to_string(), delay, l])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_pooled<W: Write>(points: &[PooledPoint], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(POOLED_HEADER)?;
    for p in points {
        out.write_record([
            p.scheme.name().to_string(),
            p.decoder.to_string(),
            p.edges.to_string(),
            p.sparsity.to_string(),
            p.block_length.to_string(),
            p.t.to_string(),
            p.delay_uses().to_string(),
            format!("{:.6}", p.pooled.capped_db()),
            format!("{:.6}", p.mean_db),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Conventions that the CSV columns do not carry.
pub fn metadata(cfg: &ExperimentConfig) -> String {
    format!(
        "# qnc-lab sweep metadata\n\
         delay_unit = channel uses (slot index t times block length L)\n\
         slot_model = one packet per edge per slot, FIFO edge queues, ties by source node id\n\
         qnc_timeline = slot 1 carries the quantized broadcast; combinations are relayed from slot 2\n\
         undelivered_estimate = prior mean 0\n\
         snr = per-record 10 log10(|x|^2 / |x - x_hat|^2) capped at +/-120 dB; envelopes pool energies across deployments\n\
         quantizer = midrise, 2^(L*capacity) levels, range +/-{rs} sigma_s for messages and +/-{rs} sigma_s sqrt(1 + |In(v)|) for combinations\n\
         coefficients = +/-1 in packets, scaled by kappa = sqrt(2 n^2 / (n + |E|)) at the decoder\n\
         m_target = {m}\n\
         {cfg}",
        rs = cfg.range_sigma,
        m = cfg.m_target(),
        cfg = cfg.to_text()
    )
}

//! `audit` subcommand: entry law, moments, norm events and recovery curves.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use qnc_core::theory::{
    audit_entry_law, audit_moments, audit_norms, audit_recovery, format_entry_law, format_moments, format_norms,
    format_recovery, RecoveryReport,
};
use qnc_core::{DecoderKind, TheoryConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct AuditConfig {
    pub n: usize,
    pub edges: Vec<usize>,
    pub k: usize,
    pub gamma: f64,
    pub mu: f64,
    pub seed: u64,
    pub entries: usize,
    pub moment_entries: usize,
    pub norm_trials: usize,
    pub recovery_trials: usize,
    /// Empty skips the recovery sweep.
    pub m_grid: Vec<usize>,
    pub decoder: DecoderKind,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            n: 100,
            edges: vec![400, 800],
            k: 5,
            gamma: 1.0,
            mu: 0.3,
            seed: 1,
            entries: 100_000,
            moment_entries: 1_000_000,
            norm_trials: 10_000,
            recovery_trials: 500,
            m_grid: (1..=10).map(|i| i * 10).collect(),
            decoder: DecoderKind::Mmse,
        }
    }
}

fn one<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().ok().with_context(|| format!("bad value '{v}' for {key}"))
}

fn list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| one(key, s)).collect()
}

impl AuditConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, v)) = line.split_once('=') else {
                bail!("line {}: expected key = value", i + 1);
            };
            let (key, v) = (key.trim(), v.trim());
            match key {
                "n" => c.n = one(key, v)?,
                "edges" => c.edges = list(key, v)?,
                "k" => c.k = one(key, v)?,
                "gamma" => c.gamma = one(key, v)?,
                "mu" => c.mu = one(key, v)?,
                "seed" => c.seed = one(key, v)?,
                "entries" => c.entries = one(key, v)?,
                "moment_entries" => c.moment_entries = one(key, v)?,
                "norm_trials" => c.norm_trials = one(key, v)?,
                "recovery_trials" => c.recovery_trials = one(key, v)?,
                "m_grid" => c.m_grid = list(key, v)?,
                "decoder" => c.decoder = v.parse()?,
                other => bail!("line {}: unknown key '{other}'", i + 1),
            }
        }
        if c.edges.is_empty() {
            bail!("edges must list at least one value");
        }
        Ok(c)
    }

    pub fn theory(&self, edges: usize) -> TheoryConfig {
        TheoryConfig { gamma: self.gamma, mu: self.mu, seed: self.seed, ..TheoryConfig::new(self.n, edges, self.k) }
    }
}

fn recovery_csv(reports: &[RecoveryReport]) -> String {
    let mut out = String::from("edges,m,successes,trials,freq,target\n");
    for r in reports {
        for p in &r.points {
            let _ = writeln!(out, "{},{},{},{},{:.6},{:.6}", r.num_edges, p.m, p.successes, p.trials, p.freq(), r.target);
        }
    }
    out
}

pub fn run(cfg: &AuditConfig, out: Option<&Path>) -> Result<String> {
    let mut text = String::new();
    let mut summary = String::from("audit,edges,quantity,empirical,reference\n");
    let mut recovery = Vec::new();
    for &edges in &cfg.edges {
        let th = cfg.theory(edges);
        let _ = writeln!(text, "== n = {}, |E| = {edges} ==", cfg.n);

        let law = audit_entry_law(&th, cfg.entries)?;
        text.push_str(&format_entry_law(&law));
        let _ = writeln!(summary, "entry_law,{edges},p_zero,{:.6},{:.6}", law.freq_zero(), law.expected_zero);
        let _ = writeln!(summary, "entry_law,{edges},p_plus,{:.6},{:.6}", law.freq_plus(), law.expected_sign);
        let _ = writeln!(summary, "entry_law,{edges},p_minus,{:.6},{:.6}", law.freq_minus(), law.expected_sign);
        let _ = writeln!(summary, "entry_law,{edges},chi_square,{:.6},{:.6}", law.chi_square, law.chi_square_critical);

        let mom = audit_moments(&th, cfg.moment_entries)?;
        text.push_str(&format_moments(&mom));
        for (i, name) in ["mean", "second", "fourth"].iter().enumerate() {
            let _ = writeln!(summary, "moments,{edges},{name},{:.6},{:.6}", mom.empirical[i], mom.consistent[i]);
            let _ = writeln!(summary, "moments_stated,{edges},{name},{:.6},{:.6}", mom.empirical[i], mom.stated[i]);
        }

        if !cfg.m_grid.is_empty() {
            let rec = audit_recovery(&TheoryConfig { trials: cfg.recovery_trials, ..th }, cfg.decoder, &cfg.m_grid)?;
            text.push_str(&format_recovery(&rec));
            recovery.push(rec);
        }
    }
    let norm_cfg = TheoryConfig { trials: cfg.norm_trials, ..cfg.theory(cfg.edges[0]) };
    let norms = audit_norms(&norm_cfg)?;
    text.push_str(&format_norms(&norms, cfg.n));
    let bound = (cfg.n as f64).powf(-cfg.gamma);
    let _ = writeln!(summary, "norms,,l2_below,{:.6},{bound:.6}", norms.below_lower);
    let _ = writeln!(summary, "norms,,l2_above,{:.6},{bound:.6}", norms.above_upper);
    let _ = writeln!(summary, "norms,,linf,{:.6},{bound:.6}", norms.linf_exceeds);

    if let Some(dir) = out {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        std::fs::write(dir.join("audit.txt"), &text)?;
        std::fs::write(dir.join("audit.csv"), &summary)?;
        if !recovery.is_empty() {
            std::fs::write(dir.join("recovery.csv"), recovery_csv(&recovery))?;
        }
    }
    Ok(text)
}

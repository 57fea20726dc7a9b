//! One-step quantized network coding.
//!
//! Slot 1 is the quantized broadcast: every edge carries `Y_e = Q_e(X_tail(e))`.
//! Each node then forms `P_v = Σ_{e∈In(v)} β_{v,e}·Y_e + α_v·X_v`, and a
//! random subset of the `P_v` is quantized once on its first route edge and
//! relayed to the gateway.
//!
//! Coefficients travel as signs (`±1`) in the packet domain; the decoder
//! multiplies received packets by `κ`, which yields the same measurement
//! matrix as drawing the coefficients from `{−κ, +κ}` directly.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{QncError, Result};
use crate::forwarding::deliver;
use crate::netgraph::{Deployment, EdgeId, NetworkGraph, NodeId};
use crate::quantize::{make_quantizer, Quantized, UniformQuantizer};
use crate::seed;

/// `κ = √(2n² / (n + |E|))`
pub fn kappa_theorem(n: usize, num_edges: usize) -> f64 {
    let n = n as f64;
    (2.0 * n * n / (n + num_edges as f64)).sqrt()
}

/// Local coding coefficients. Signs are stored; magnitudes are all `κ`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSet {
    pub kappa: f64,
    /// `sign(α_v)` per node.
    pub alpha_sign: Vec<f64>,
    /// `sign(β_{head(e),e})` per edge.
    pub beta_sign: Vec<f64>,
}

impl CoefficientSet {
    pub fn alpha(&self, v: NodeId) -> f64 {
        self.kappa * self.alpha_sign[v.0]
    }

    pub fn beta(&self, e: EdgeId) -> f64 {
        self.kappa * self.beta_sign[e]
    }
}

fn sign<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    if rng.random_bool(0.5) {
        1.0
    } else {
        -1.0
    }
}

pub fn draw_coefficients(g: &NetworkGraph, kappa: f64, seed: u64) -> Result<CoefficientSet> {
    if !(kappa > 0.0) {
        return Err(QncError::InvalidParameter(format!("kappa must be positive, got {kappa}")));
    }
    let mut rng = seed::rng(seed::derive(seed, &[seed::COEFFICIENTS]));
    let alpha_sign = (0..g.n()).map(|_| sign(&mut rng)).collect();
    let beta_sign = (0..g.num_edges()).map(|_| sign(&mut rng)).collect();
    Ok(CoefficientSet { kappa, alpha_sign, beta_sign })
}

/// Quantizer resolution: bits per slot from the block length, or a fixed
/// step (near-noiseless surrogate).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Resolution {
    BlockLength(u32),
    Step(f64),
}

/// How per-edge quantizers are built.
///
/// Phase-1 quantizers cover `±range_sigma·σs`. The packet quantizer for
/// `P_v` covers `±range_sigma·σs·√(1 + |In(v)|)`, since `P_v` sums
/// `1 + |In(v)|` unit-sign terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizerPlan {
    pub range_sigma: f64,
    pub sigma_s: f64,
    pub resolution: Resolution,
}

impl QuantizerPlan {
    pub fn new(range_sigma: f64, sigma_s: f64, resolution: Resolution) -> Self {
        Self { range_sigma, sigma_s, resolution }
    }

    fn build(&self, scale: f64, capacity: u32) -> Result<UniformQuantizer> {
        match self.resolution {
            Resolution::BlockLength(l) => make_quantizer(self.range_sigma, self.sigma_s * scale, l, capacity),
            Resolution::Step(step) => {
                let half = self.range_sigma * self.sigma_s * scale;
                UniformQuantizer::with_step(-half, half, step)
            }
        }
    }

    pub fn phase1(&self, g: &NetworkGraph) -> Result<Vec<UniformQuantizer>> {
        g.edges().iter().map(|e| self.build(1.0, e.capacity)).collect()
    }

    pub fn packet(&self, g: &NetworkGraph, v: NodeId, edge: EdgeId) -> Result<UniformQuantizer> {
        let scale = ((1 + g.in_edges(v).len()) as f64).sqrt();
        self.build(scale, g.edge(edge).capacity)
    }
}

/// `Y_e(2)` and `N_e(2)` for every edge.
pub fn phase1_broadcast(g: &NetworkGraph, x: &DVector<f64>, quantizers: &[UniformQuantizer]) -> Vec<Quantized> {
    g.edges()
        .iter()
        .zip(quantizers)
        .map(|(e, q)| q.quantize(x[e.tail.0]))
        .collect()
}

/// Packet-domain combinations `Σ sign(β)·Y_e + sign(α)·X_v` (multiply by `κ`
/// for the coefficient-domain value).
pub fn combine(g: &NetworkGraph, coeffs: &CoefficientSet, x: &DVector<f64>, y2: &[Quantized]) -> Vec<f64> {
    g.nodes()
        .map(|v| {
            let inflow: f64 = g.in_edges(v).iter().map(|&e| coeffs.beta_sign[e] * y2[e].value).sum();
            inflow + coeffs.alpha_sign[v.0] * x[v.0]
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeliveredPacket {
    pub node: NodeId,
    /// Received packet-domain value `P_v + N_e(3)`.
    pub value: f64,
    /// `N_e(3)`; zero for the gateway's own packet.
    pub noise: f64,
    /// Step of the quantizer applied to `P_v`, if any.
    pub step: Option<f64>,
    pub arrival_slot: usize,
}

/// Packets received by the gateway, ordered by arrival slot then node id;
/// row `i` of the measurement system is `rows[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Delivery {
    pub rows: Vec<DeliveredPacket>,
}

/// Each node forwards its packet with probability `m_target / n`. Arrival
/// slots count the broadcast slot, so the gateway's own packet is ready at
/// slot 1.
pub fn select_and_deliver(
    dep: &Deployment,
    packets: &[f64],
    m_target: usize,
    plan: &QuantizerPlan,
    seed: u64,
) -> Result<Delivery> {
    let g = &dep.graph;
    let n = g.n();
    if m_target > n {
        return Err(QncError::InvalidParameter(format!("m_target = {m_target} exceeds n = {n}")));
    }
    let prob = m_target as f64 / n as f64;
    let mut rng = seed::rng(seed::derive(seed, &[seed::SELECTION]));
    let selected: Vec<NodeId> = g.nodes().filter(|_| rng.random_bool(prob)).collect();
    deliver_selected(dep, packets, &selected, plan)
}

/// Deliver the packets of an explicit node subset.
pub fn deliver_selected(dep: &Deployment, packets: &[f64], selected: &[NodeId], plan: &QuantizerPlan) -> Result<Delivery> {
    let g = &dep.graph;
    let arrivals = deliver(dep, selected);
    let mut rows = Vec::with_capacity(selected.len());
    for (&v, &slot) in selected.iter().zip(&arrivals) {
        let p = packets[v.0];
        let row = match dep.routes.next_hop(v) {
            Some(first) => {
                let quantizer = plan.packet(g, v, first)?;
                let q = quantizer.quantize(p);
                DeliveredPacket { node: v, value: q.value, noise: q.error, step: Some(quantizer.step()), arrival_slot: slot + 1 }
            }
            None => DeliveredPacket { node: v, value: p, noise: 0.0, step: None, arrival_slot: slot + 1 },
        };
        rows.push(row);
    }
    rows.sort_by_key(|r| (r.arrival_slot, r.node));
    Ok(Delivery { rows })
}

/// `Z = Ψ·X + N_eff` at the gateway, with received packets already scaled by `κ`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSystem {
    pub psi: DMatrix<f64>,
    pub z: DVector<f64>,
    /// Realized effective noise.
    pub n_eff: DVector<f64>,
    /// Node whose combination fills each row.
    pub row_node: Vec<NodeId>,
    /// Effective-noise variance per row under the `Δ²/12` model.
    pub row_noise_var: Vec<f64>,
    /// Arrival slot per row (non-decreasing).
    pub delays: Vec<usize>,
}

impl MeasurementSystem {
    pub fn m(&self) -> usize {
        self.z.len()
    }

    /// Number of rows received by slot `t`.
    pub fn rows_by(&self, t: usize) -> usize {
        self.delays.partition_point(|&d| d <= t)
    }

    pub fn last_slot(&self) -> usize {
        self.delays.last().copied().unwrap_or(0)
    }

    /// `max_i |Z_i − (ΨX)_i − N_eff,i|`
    pub fn identity_residual(&self, x: &DVector<f64>) -> f64 {
        (&self.z - &self.psi * x - &self.n_eff).amax()
    }
}

/// Rows of the measurement matrix for the given forwarding nodes. Parallel
/// edges contribute the sum of their coefficients.
pub fn build_psi(g: &NetworkGraph, coeffs: &CoefficientSet, rows: &[NodeId]) -> DMatrix<f64> {
    let mut psi = DMatrix::zeros(rows.len(), g.n());
    for (i, &v) in rows.iter().enumerate() {
        psi[(i, v.0)] += coeffs.alpha(v);
        for &e in g.in_edges(v) {
            psi[(i, g.edge(e).tail.0)] += coeffs.beta(e);
        }
    }
    psi
}

pub fn assemble(
    g: &NetworkGraph,
    coeffs: &CoefficientSet,
    phase1: &[Quantized],
    phase1_quantizers: &[UniformQuantizer],
    delivery: &Delivery,
) -> Result<MeasurementSystem> {
    let mut seen = vec![false; g.n()];
    for r in &delivery.rows {
        if r.node.0 >= g.n() {
            return Err(QncError::InconsistentRowMap(format!("node {} outside the network", r.node)));
        }
        if std::mem::replace(&mut seen[r.node.0], true) {
            return Err(QncError::InconsistentRowMap(format!("node {} maps to more than one row", r.node)));
        }
    }
    if delivery.rows.windows(2).any(|w| w[0].arrival_slot > w[1].arrival_slot) {
        return Err(QncError::InconsistentRowMap("rows not ordered by arrival".into()));
    }
    let kappa = coeffs.kappa;
    let row_node: Vec<NodeId> = delivery.rows.iter().map(|r| r.node).collect();
    let psi = build_psi(g, coeffs, &row_node);
    let m = row_node.len();
    let mut z = DVector::zeros(m);
    let mut n_eff = DVector::zeros(m);
    let mut row_noise_var = Vec::with_capacity(m);
    for (i, r) in delivery.rows.iter().enumerate() {
        let ins = g.in_edges(r.node);
        let relayed: f64 = ins.iter().map(|&e| coeffs.beta_sign[e] * phase1[e].error).sum();
        z[i] = kappa * r.value;
        n_eff[i] = kappa * (r.noise + relayed);
        let out_var = r.step.map_or(0.0, |s| s * s / 12.0);
        let in_var: f64 = ins.iter().map(|&e| phase1_quantizers[e].noise_var()).sum();
        row_noise_var.push(kappa * kappa * (out_var + in_var));
    }
    let delays = delivery.rows.iter().map(|r| r.arrival_slot).collect();
    Ok(MeasurementSystem { psi, z, n_eff, row_node, row_noise_var, delays })
}

/// Phase 1, combination, selection, delivery and assembly in one call.
pub fn simulate(
    dep: &Deployment,
    x: &DVector<f64>,
    coeffs: &CoefficientSet,
    plan: &QuantizerPlan,
    m_target: usize,
    seed: u64,
) -> Result<MeasurementSystem> {
    let g = &dep.graph;
    let quantizers = plan.phase1(g)?;
    let y2 = phase1_broadcast(g, x, &quantizers);
    let p = combine(g, coeffs, x, &y2);
    let delivery = select_and_deliver(dep, &p, m_target, plan, seed)?;
    assemble(g, coeffs, &y2, &quantizers, &delivery)
}

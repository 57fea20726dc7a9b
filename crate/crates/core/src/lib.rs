//! One-step quantized network coding (QNC) of correlated near-sparse
//! Gaussian messages over random directed networks.
//!
//! The crate is organised bottom-up:
//!
//! * [`netgraph`]: random deployments, adjacency and shortest routes to the gateway.
//! * [`messages`]: two-state Gaussian mixture sources and Haar orthonormal transforms.
//! * [`quantize`]: midrise uniform quantizers with a `Δ²/12` noise model.
//! * [`forwarding`]: the slotted FIFO delivery model and the routing baseline.
//! * [`qnc`]: phase-1 broadcast, local combination, delivery and measurement assembly.
//! * [`decoders`]: basis-pursuit denoising, mixture MMSE and an exact enumeration oracle.
//! * [`theory`]: Monte Carlo audits of the recovery guarantee and its proof steps.
//! * [`experiment`]: SNR-vs-delay sweeps and best-block-length envelopes.
//! * [`io`]: plain-text and CSV formats for deployments, ensembles and measurement systems.

pub mod decoders;
pub mod error;
pub mod experiment;
pub mod forwarding;
pub mod io;
pub mod messages;
pub mod netgraph;
pub mod qnc;
pub mod quantize;
pub mod seed;
pub mod theory;

pub use decoders::{
    default_epsilon, exact_mmse_oracle, l1_decode, mixture_mmse_decode, snr_db, DecodeResult,
    DecoderProblem, MmseOptions, SnrAccumulator,
};
pub use error::{QncError, Result};
pub use experiment::{
    best_l_envelope, run_sweep, DecoderKind, EnvelopePoint, ExperimentConfig, ExperimentRecord,
    Scheme,
};
pub use forwarding::{progressive_estimate, simulate_forwarding, DeliverySchedule};
pub use messages::{random_orthonormal, sample_ensemble, MessageEnsemble, SourceModel, StateLaw};
pub use netgraph::{generate_network, Deployment, Edge, EdgeId, NetworkGraph, NodeId, RouteTable};
pub use qnc::{
    assemble, combine, draw_coefficients, kappa_theorem, phase1_broadcast, select_and_deliver,
    CoefficientSet, Delivery, MeasurementSystem, QuantizerPlan,
};
pub use quantize::{make_quantizer, Quantized, UniformQuantizer};
pub use theory::TheoryConfig;

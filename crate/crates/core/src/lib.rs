//! Bit-accurate functional simulator, network mapper, and analytical cost
//! model for a ReRAM-based digital compute-in-memory macro.
//!
//! The macro under study stores 4-bit weights in 64-row x 4-column ReRAM
//! banks, multiplies them against bit-serial activations with AND bitcells,
//! and reduces partial products through an interleaved 10T/28T adder tree.
//! This crate models that pipeline bit-exactly:
//!
//! - [`cell`] -- the 3T1R bitcell: state, variability, digital read, AND multiply
//! - [`fabric`] -- full-adder truth tables, interleaved tree, error/cost characterization
//! - [`cim`] -- banks and the bit-serial MAC engine with zero-skip accounting
//! - [`mapper`] -- layer allocation, magnitude pruning, cycle scheduling
//! - [`runtime`] -- quantized CNN and spiking inference through the simulated macro
//! - [`perf`] -- analytical latency/throughput/energy estimation
//! - [`variability`] -- Monte Carlo read/MAC robustness analysis
//! - [`config`] -- JSON-loadable parameter bundles and fixtures
//! - [`io`] -- weight/image ingestion and report schemas

pub mod cell;
pub mod cim;
pub mod config;
pub mod error;
pub mod fabric;
pub mod io;
pub mod mapper;
pub mod perf;
pub mod runtime;
pub mod variability;

pub use cell::{
    cim_multiply, read_cell, write_cell, CellState, DeviceParams, ReramCell, SenseConfig,
};
pub use cim::{
    bank_mac_cycle, bit_serial_dot, combine_banks, slice_weight, sparsity_stats, Bank, BankMode,
    CimMacro, CyclePartialSum, DotOutcome, MacroConfig, ShiftAccumulator, SparsityStats,
};
pub use error::{Error, Result};
pub use fabric::{
    build_tree, AdderCellKind, CellCost, CellCosts, ErrorReport, FabricCost, KindSet, SampleMode,
    TreeAnchors, TreeInstance, TreeSpec,
};
pub use mapper::{
    allocate, map_network, prune, schedule, KernelShape, LayerKind, LayerSpec, MappingPlan,
    Network, NetworkWeights, PlanEntry, PruneMask, ReferenceMapping,
};
pub use perf::{
    estimate, estimate_workload, peripheral_breakdown, CostConstants, CostReport, CreditRule,
    Workload,
};
pub use runtime::{
    conv_forward, run_inference, InferenceMode, InferenceOutput, InferenceSetup, LifParams,
    QuantConfig, Rational, ResetMode, RunOptions, Tensor,
};
pub use variability::{
    monte_carlo_mac, monte_carlo_read, Corner, CornerConfig, MacFixture, McReport,
};

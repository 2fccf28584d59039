//! Simulation toolkit for a gate-model neutral-atom processor: a native-gate
//! statevector simulator, a compiler to that gate set, Rydberg C_Z pulse
//! tuning, noise channels and analytic error models, benchmark harnesses and
//! trap/rearrangement calculators.

pub mod cli;
pub mod compiler;
pub mod constants;
pub mod experiments;
pub mod hardware;
pub mod noise;
pub mod optim;
pub mod pulse;
pub mod qsim;

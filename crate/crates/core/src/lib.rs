//! Atom detection for optical-tweezer arrays from fluorescence images.
//!
//! The pipeline has an offline and a runtime half:
//!
//! 1. [`sim`] renders frames from the photoelectron model
//!    `λ(x) = b + Σ_i PSF_i(x)·γ_i` and samples shot-noisy camera images.
//! 2. [`calibrate`] fits the site lattice, background, per-site PSFs,
//!    Moore-Penrose projection kernels and a detection threshold from a set
//!    of exemplary frames, producing a [`CalibrationArtifact`].
//! 3. [`reconstruct`] turns one frame into an [`EmissionMatrix`] (global
//!    least squares, parallel per-site projection, or an emulation of the
//!    accelerator dataflow) and thresholds it into an [`OccupancyMatrix`].
//! 4. [`perf`] models accelerator latency and benchmarks the CPU paths.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod artifact;
pub mod calibrate;
pub mod emission;
pub mod error;
pub mod grid;
pub mod image;
pub mod kernel;
pub mod perf;
pub mod reconstruct;
pub mod sim;

pub use artifact::CalibrationArtifact;
pub use emission::{EmissionChannel, EmissionMatrix, OccupancyMatrix};
pub use error::{Error, Result};
pub use grid::{extract_roi, AtomGrid, Roi};
pub use image::Image;
pub use kernel::{Projector, PsfKernel};

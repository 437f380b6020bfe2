//! Photonic design toolkit for back-illuminated heralded single-photon sources.
//!
//! The crate models one device cross-section end to end: an apodized grating
//! coupler in thin-film lithium niobate radiates through a thick absorbing
//! silicon substrate onto a cavity-coupled superconducting nanowire detector,
//! while the same substrate filters the pump and carries the dissipated heat
//! to a cold plate. Each concern gets its own solver:
//!
//! - [`materials`]: dispersion / thermal-conductivity tables with unit helpers
//! - [`geometry`]: parametric device cross-sections rasterized to grids
//! - [`modes`]: 1D slab waveguide modes for source injection
//! - [`fdtd`]: 2D time-domain electromagnetics with CPML and flux monitors
//! - [`tmm`]: 1D transfer matrices with layer-resolved absorption
//! - [`thermal`]: nonlinear steady-state heat conduction
//! - [`budget`]: closed-form pump-filter / coincidence / efficiency accounting

pub mod budget;
pub mod fdtd;
pub mod geometry;
pub mod materials;
pub mod modes;
pub mod thermal;
pub mod tmm;

pub use materials::{MaterialDb, MaterialError, OpticalMaterial, ThermalMaterial};

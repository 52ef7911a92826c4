//! Quench dynamics of the transverse-field Ising model on the heavy-hexagonal
//! lattice, simulated directly in the thermodynamic limit with a
//! belief-propagation-optimised infinite tensor-network state, together with
//! the zero-momentum quasiparticle model that explains the observed
//! magnetisation oscillation frequencies.
//!
//! The crate is organised around a 5-site periodic unit cell (three
//! coordination-2 sites on sublattice A, two coordination-3 sites on
//! sublattice B). Real-time evolution is second-order Trotterised; two-site
//! gates are applied with a message-dressed simple update and truncated SVDs.
//! Everything is cross-validated against an exact statevector oracle on small
//! periodic clusters.

pub mod bp;
pub mod cli;
#[cfg(test)]
pub(crate) mod testutil;
pub mod confinement;
pub mod evolve;
pub mod lattice;
pub mod observables;
pub mod oracle_ed;
pub mod spectroscopy;
pub mod tensors;
pub mod verify;

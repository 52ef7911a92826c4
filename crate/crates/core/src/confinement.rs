//! The zero-momentum quasiparticle model of the quench dynamics.
//!
//! Above the fully polarised state the cheapest excitations are a flipped A
//! spin (two domain walls, energy 4J) and a flipped B spin together with any
//! subset of its three neighbours (three domain walls, energy 6J). Projecting
//! the Hamiltonian onto the five zero-momentum combinations of these
//! configurations gives a 5x5 matrix that is independent of lattice size; its
//! eigenvalues are the quasiparticle masses whose values (and pairwise
//! differences) show up as magnetisation oscillation frequencies.

use ndarray::prelude::*;
use ndarray_linalg::{Eigh, UPLO};
use thiserror::Error;

use crate::lattice::{FiniteCluster, Sublattice, DEFAULT_SITE_CAP};

#[derive(Debug, Error)]
pub enum ConfinementError {
    #[error("coupling J must be positive, got {0}")]
    NonPositiveJ(f64),
    #[error("cluster of {sites} sites exceeds the size cap of {cap}")]
    SizeCapExceeded { sites: usize, cap: usize },
    #[error("eigensolver failed")]
    EigenFailure,
}

/// The 5x5 real symmetric projected Hamiltonian in the canonical basis order
/// (A, B(0), B(1), B(2), B(3)).
///
/// Diagonal: (4J, 6J, 6J, 6J, 6J). Off-diagonal chain: sqrt(2) h between A
/// and B(1), sqrt(3) h between B(0) and B(1), 2h between B(1) and B(2),
/// sqrt(3) h between B(2) and B(3). Note the commonly printed form of this
/// matrix orders the last two basis states the other way round; the two are
/// related by a permutation and share their spectrum.
#[derive(Debug, Clone)]
pub struct ProjectedHamiltonian {
    pub matrix: Array2<f64>,
    pub j: f64,
    pub h: f64,
}

/// Builds the projected Hamiltonian; independent of any lattice size by
/// construction.
pub fn build_projected_hamiltonian(j: f64, h: f64) -> Result<ProjectedHamiltonian, ConfinementError> {
    if !(j > 0.0) {
        return Err(ConfinementError::NonPositiveJ(j));
    }
    let mut m = Array2::<f64>::zeros((5, 5));
    m[[0, 0]] = 4.0 * j;
    for i in 1..5 {
        m[[i, i]] = 6.0 * j;
    }
    let s2 = 2.0f64.sqrt();
    let s3 = 3.0f64.sqrt();
    m[[0, 2]] = s2 * h;
    m[[2, 0]] = s2 * h;
    m[[1, 2]] = s3 * h;
    m[[2, 1]] = s3 * h;
    m[[2, 3]] = 2.0 * h;
    m[[3, 2]] = 2.0 * h;
    m[[3, 4]] = s3 * h;
    m[[4, 3]] = s3 * h;
    Ok(ProjectedHamiltonian { matrix: m, j, h })
}

/// The five quasiparticle masses (ascending, units of J with hbar = 1) and
/// their pairwise differences.
#[derive(Debug, Clone)]
pub struct MassSpectrum {
    pub masses: [f64; 5],
}

impl MassSpectrum {
    /// All |m_i - m_j| for i < j, as (i, j, value) with 1-based indices;
    /// exactly 10 entries.
    pub fn differences(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(10);
        for i in 0..5 {
            for j in (i + 1)..5 {
                out.push((i + 1, j + 1, (self.masses[i] - self.masses[j]).abs()));
            }
        }
        out
    }
}

/// Ascending eigenvalues of the projected Hamiltonian.
pub fn quasiparticle_masses(j: f64, h: f64) -> Result<MassSpectrum, ConfinementError> {
    let ph = build_projected_hamiltonian(j, h)?;
    let (w, _) = ph
        .matrix
        .eigh(UPLO::Lower)
        .map_err(|_| ConfinementError::EigenFailure)?;
    let mut masses = [0.0f64; 5];
    for (i, &v) in w.iter().enumerate() {
        masses[i] = v;
    }
    // eigh returns ascending order already; keep the guarantee explicit
    masses.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(MassSpectrum { masses })
}

/// The five normalized zero-momentum basis vectors over a periodic cluster's
/// 2^n state space, in canonical order (A, B(0), B(1), B(2), B(3)).
///
/// Basis states are labelled by which spins are flipped with respect to the
/// fully polarised reference: bit k set means site k is flipped.
pub fn projected_hamiltonian_reference_basis(
    cluster: &FiniteCluster,
) -> Result<Vec<Array1<f64>>, ConfinementError> {
    let n = cluster.n_sites;
    if n > DEFAULT_SITE_CAP {
        return Err(ConfinementError::SizeCapExceeded { sites: n, cap: DEFAULT_SITE_CAP });
    }
    let dim = 1usize << n;
    let a_sites = cluster.sites_of(Sublattice::A);
    let b_sites = cluster.sites_of(Sublattice::B);
    let n_a = a_sites.len();
    let n_b = b_sites.len();

    let mut basis = Vec::with_capacity(5);

    // |A>: one flipped A spin, uniform
    let mut v = Array1::<f64>::zeros(dim);
    let amp = 1.0 / (n_a as f64).sqrt();
    for &a in &a_sites {
        v[1usize << a] = amp;
    }
    basis.push(v);

    // |B(0)>: one flipped B spin
    let mut v = Array1::<f64>::zeros(dim);
    let amp = 1.0 / (n_b as f64).sqrt();
    for &b in &b_sites {
        v[1usize << b] = amp;
    }
    basis.push(v);

    // |B(1)>: B spin plus one of its three neighbours (3 n_B terms)
    let mut v = Array1::<f64>::zeros(dim);
    let amp = 1.0 / (3.0 * n_b as f64).sqrt();
    for &b in &b_sites {
        for nb in cluster.neighbors(b) {
            v[(1usize << b) | (1usize << nb)] = amp;
        }
    }
    basis.push(v);

    // |B(2)>: B spin plus an unordered pair of neighbours (3 n_B terms)
    let mut v = Array1::<f64>::zeros(dim);
    let amp = 1.0 / (3.0 * n_b as f64).sqrt();
    for &b in &b_sites {
        let nbrs = cluster.neighbors(b);
        for i in 0..nbrs.len() {
            for k in (i + 1)..nbrs.len() {
                v[(1usize << b) | (1usize << nbrs[i]) | (1usize << nbrs[k])] = amp;
            }
        }
    }
    basis.push(v);

    // |B(3)>: B spin plus all three neighbours (n_B terms)
    let mut v = Array1::<f64>::zeros(dim);
    let amp = 1.0 / (n_b as f64).sqrt();
    for &b in &b_sites {
        let mut idx = 1usize << b;
        for nb in cluster.neighbors(b) {
            idx |= 1usize << nb;
        }
        v[idx] = amp;
    }
    basis.push(v);

    Ok(basis)
}

//! Shared fixtures for unit tests.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::evolve::{edge_name, phys_name, TensorNetworkState};
use crate::lattice::{HeavyHexUnitCell, Sublattice, CELL_SITES};
use crate::tensors::DenseTensor;

/// Random state with one tensor per sublattice, symmetrised over the virtual
/// slots. Slot symmetry makes the state invariant under every lattice
/// automorphism (site permutations within a sublattice permute the virtual
/// slots of the neighbours), which is what "identical tensors on all A sites
/// and all B sites" means for the infinite lattice.
pub(crate) fn symmetric_state(chi: usize, seed: u64) -> TensorNetworkState {
    let cell = HeavyHexUnitCell::new();
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut rand = move || C64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0));

    let mut a_base = vec![C64::new(0.0, 0.0); 2 * chi * chi];
    for v in a_base.iter_mut() {
        *v = rand();
    }
    let a_sym = |p: usize, x: usize, y: usize| -> C64 {
        a_base[(p * chi + x) * chi + y] + a_base[(p * chi + y) * chi + x]
    };

    let mut b_base = vec![C64::new(0.0, 0.0); 2 * chi * chi * chi];
    for v in b_base.iter_mut() {
        *v = rand();
    }
    let b_at = |p: usize, x: usize, y: usize, z: usize| -> C64 {
        b_base[((p * chi + x) * chi + y) * chi + z]
    };
    let b_sym = |p: usize, x: usize, y: usize, z: usize| -> C64 {
        b_at(p, x, y, z)
            + b_at(p, x, z, y)
            + b_at(p, y, x, z)
            + b_at(p, y, z, x)
            + b_at(p, z, x, y)
            + b_at(p, z, y, x)
    };

    let tensors: Vec<DenseTensor> = (0..CELL_SITES)
        .map(|site| {
            let mut names = vec![phys_name(site)];
            let mut shape = vec![2usize];
            for &e in cell.incident_edges(site) {
                names.push(edge_name(e));
                shape.push(chi);
            }
            match cell.sublattice(site) {
                Sublattice::A => {
                    DenseTensor::from_shape_names(names, &shape, |ix| a_sym(ix[0], ix[1], ix[2]))
                        .unwrap()
                }
                Sublattice::B => DenseTensor::from_shape_names(names, &shape, |ix| {
                    b_sym(ix[0], ix[1], ix[2], ix[3])
                })
                .unwrap(),
            }
        })
        .collect();
    TensorNetworkState::new(cell, tensors).unwrap()
}

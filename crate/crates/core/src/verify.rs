//! Self-check routines behind the `verify` subcommand: quick kernel and
//! projection checks, plus the heavier cross-method dynamical comparisons at
//! the full level.

use ndarray::prelude::*;
use num_complex::Complex64 as C64;

use crate::bp;
use crate::confinement::build_projected_hamiltonian;
use crate::evolve::{run_quench, InitialState, QuenchConfig};
use crate::lattice::build_finite_cluster;
use crate::observables::{BondSpectrum, Pauli};
use crate::oracle_ed::{
    build_hamiltonian, exact_expectation, exact_projected_hamiltonian, zplus_state, ExactEvolver,
};
use crate::spectroscopy::raw_fft;
use crate::tensors::{contract, hermitian_root, svd_split, DenseTensor, RootMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerifyLevel {
    Quick,
    Full,
}

impl std::str::FromStr for VerifyLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "quick" => Ok(VerifyLevel::Quick),
            "full" => Ok(VerifyLevel::Full),
            other => Err(format!("unknown verify level `{}`", other)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome { name: name.to_string(), passed, detail }
}

fn projected_equivalence(cells_x: usize, cells_y: usize, h: f64) -> CheckOutcome {
    let name = format!("projected hamiltonian {}x{} cells, h={}", cells_x, cells_y, h);
    let cluster = match build_finite_cluster(cells_x, cells_y) {
        Ok(c) => c,
        Err(e) => return check(&name, false, format!("cluster build failed: {}", e)),
    };
    let exact = match exact_projected_hamiltonian(&cluster, 1.0, h) {
        Ok(m) => m,
        Err(e) => return check(&name, false, format!("projection failed: {}", e)),
    };
    let model = build_projected_hamiltonian(1.0, h).unwrap().matrix;
    let mut worst = 0.0f64;
    for i in 0..5 {
        for j in 0..5 {
            worst = worst.max((exact[[i, j]] - model[[i, j]]).abs());
        }
    }
    check(&name, worst < 1e-12, format!("max entry deviation {:.2e}", worst))
}

fn kernel_checks() -> Vec<CheckOutcome> {
    let mut out = Vec::new();

    // deterministic pseudo-random fill without an RNG dependency
    let mut seed = 0x12345678u64;
    let mut next = move || {
        seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((seed >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    };

    // SVD reconstruction identity on a random 8x8
    {
        let t = DenseTensor::from_shape_names(vec!["i", "j"], &[8, 8], |_| {
            C64::new(next(), next())
        })
        .unwrap();
        let (u, s, v, rep) = svd_split(&t, &["i"], 0.0, None, "s").unwrap();
        let k = s.len();
        let smat = DenseTensor::from_shape_names(vec!["s", "s2"], &[k, k], |ix| {
            C64::new(if ix[0] == ix[1] { s[ix[0]] } else { 0.0 }, 0.0)
        })
        .unwrap();
        let us = contract(&u, &smat, &[("s", "s")]).unwrap();
        let back = contract(&us, &v, &[("s2", "s")]).unwrap();
        let err: f64 = t
            .data()
            .iter()
            .zip(back.data().iter())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            / t.norm_sqr();
        let ok = (err - rep.discarded_weight).abs() < 1e-12;
        out.push(check(
            "svd reconstruction identity",
            ok,
            format!("relative error {:.2e} vs discarded {:.2e}", err, rep.discarded_weight),
        ));
    }

    // Hermitian root round trip on a random PSD 6x6
    {
        let a = Array2::from_shape_fn((6, 6), |_| C64::new(next(), next()));
        let m = a.dot(&a.t().mapv(|z| z.conj()));
        let r = hermitian_root(&m, RootMode::Sqrt, 1e-12).unwrap();
        let back = r.dot(&r);
        let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let worst = back
            .iter()
            .zip(m.iter())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        out.push(check(
            "hermitian root round trip",
            worst / scale < 1e-11,
            format!("max deviation {:.2e}", worst / scale),
        ));
    }

    // contraction against a hand-rolled triple loop
    {
        let a = DenseTensor::from_shape_names(vec!["x", "k"], &[3, 4], |_| {
            C64::new(next(), next())
        })
        .unwrap();
        let b = DenseTensor::from_shape_names(vec!["k", "y"], &[4, 5], |_| {
            C64::new(next(), next())
        })
        .unwrap();
        let fast = contract(&a, &b, &[("k", "k")]).unwrap();
        let mut worst = 0.0f64;
        for x in 0..3 {
            for y in 0..5 {
                let mut acc = C64::new(0.0, 0.0);
                for k in 0..4 {
                    acc += a.data()[ndarray::IxDyn(&[x, k])] * b.data()[ndarray::IxDyn(&[k, y])];
                }
                worst = worst.max((acc - fast.data()[ndarray::IxDyn(&[x, y])]).norm());
            }
        }
        out.push(check(
            "contraction vs loop sum",
            worst < 1e-12,
            format!("max deviation {:.2e}", worst),
        ));
    }

    // message invariants on a short BP run
    {
        let state = crate::evolve::initial_state(InitialState::Yplus);
        let msgs = bp::init_messages(&state);
        let (msgs, report) = bp::bp_fixed_point(&state, &msgs, 1e-12, 100).unwrap();
        out.push(check(
            "message fixed point invariants",
            report.converged && msgs.check_invariants(),
            format!("converged in {} sweeps", report.iterations),
        ));
    }

    // FFT Parseval
    {
        let samples: Vec<f64> = (0..1024).map(|_| next()).collect();
        let energy_time: f64 = samples.iter().map(|x| x * x).sum();
        let spec = raw_fft(&samples);
        let energy_freq: f64 = spec.iter().map(|z| z.norm_sqr()).sum::<f64>() / 1024.0;
        let rel = (energy_time - energy_freq).abs() / energy_time;
        out.push(check("fft parseval identity", rel < 1e-10, format!("relative error {:.2e}", rel)));
    }

    // entropy spot value
    {
        let flat = BondSpectrum {
            edge: 0,
            lambdas: vec![std::f64::consts::FRAC_1_SQRT_2; 2],
        };
        let s = crate::observables::entanglement_density(&flat);
        out.push(check(
            "entropy of a flat two-value spectrum",
            (s - 1.0).abs() < 1e-12,
            format!("s = {}", s),
        ));
    }

    out
}

fn bp_vs_ed_short_time() -> CheckOutcome {
    let name = "short-time dynamics vs exact oracle (10 sites, h=0.2)";
    let cluster = build_finite_cluster(2, 1).unwrap();
    let ham = match build_hamiltonian(&cluster, 1.0, 0.2) {
        Ok(h) => h,
        Err(e) => return check(name, false, format!("{}", e)),
    };
    let evolver = match ExactEvolver::new(&ham) {
        Ok(e) => e,
        Err(e) => return check(name, false, format!("{}", e)),
    };
    let config = QuenchConfig {
        h: 0.2,
        t_max: 2.0,
        ..QuenchConfig::default()
    };
    let series = match run_quench(&config) {
        Ok(s) => s,
        Err(e) => return check(name, false, format!("{}", e)),
    };
    let b_sites = cluster.sites_of(crate::lattice::Sublattice::B);
    let psi0 = zplus_state(cluster.n_sites);
    let mut worst = 0.0f64;
    for row in &series.rows {
        let psi = evolver.evolve(&psi0, row.t);
        let exact_b = b_sites
            .iter()
            .map(|&s| exact_expectation(&psi, s, Pauli::Z))
            .sum::<f64>()
            / b_sites.len() as f64;
        worst = worst.max((row.mz_b - exact_b).abs());
    }
    check(name, worst <= 5e-3, format!("max |dZ_B| = {:.2e} for tJ <= 2", worst))
}

fn trotter_order_check() -> CheckOutcome {
    let name = "second-order step scaling (h=0.3, tJ=1)";
    let run = |dt: f64| -> Result<f64, crate::evolve::EvolveError> {
        let config = QuenchConfig {
            h: 0.3,
            dt,
            t_max: 1.0,
            sample_every: (1.0 / dt).round() as usize,
            ..QuenchConfig::default()
        };
        Ok(run_quench(&config)?.rows.last().unwrap().mz_b)
    };
    let coarse = match run(0.1) {
        Ok(v) => v,
        Err(e) => return check(name, false, format!("{}", e)),
    };
    let mid = match run(0.05) {
        Ok(v) => v,
        Err(e) => return check(name, false, format!("{}", e)),
    };
    let reference = match run(0.0125) {
        Ok(v) => v,
        Err(e) => return check(name, false, format!("{}", e)),
    };
    let ratio = (coarse - reference).abs() / (mid - reference).abs();
    check(
        name,
        (3.2..=4.8).contains(&ratio),
        format!("error ratio {:.3} (expected in [3.2, 4.8])", ratio),
    )
}

/// Runs the selected battery and returns per-check outcomes.
pub fn run_verify(level: VerifyLevel) -> Vec<CheckOutcome> {
    let mut out = Vec::new();
    for h in [0.1, 0.3] {
        out.push(projected_equivalence(1, 1, h));
        out.push(projected_equivalence(2, 1, h));
    }
    out.extend(kernel_checks());
    if level == VerifyLevel::Full {
        out.push(bp_vs_ed_short_time());
        out.push(trotter_order_check());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_verify_passes() {
        let outcomes = run_verify(VerifyLevel::Quick);
        assert!(!outcomes.is_empty());
        for o in &outcomes {
            assert!(o.passed, "{}: {}", o.name, o.detail);
        }
    }

    #[test]
    fn corrupted_coupling_is_detected() {
        // the sensitivity counterpart of the projection check: a model matrix
        // with h instead of sqrt(2) h in the A coupling must NOT match
        let cluster = build_finite_cluster(1, 1).unwrap();
        let exact = exact_projected_hamiltonian(&cluster, 1.0, 0.3).unwrap();
        let mut wrong = build_projected_hamiltonian(1.0, 0.3).unwrap().matrix;
        wrong[[0, 2]] = 0.3;
        wrong[[2, 0]] = 0.3;
        let mut worst = 0.0f64;
        for i in 0..5 {
            for j in 0..5 {
                worst = worst.max((exact[[i, j]] - wrong[[i, j]]).abs());
            }
        }
        assert!(worst > 1e-2, "corruption went unnoticed: {}", worst);
    }
}

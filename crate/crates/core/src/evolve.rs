//! Second-order Trotterised real-time evolution of the unit-cell tensor
//! network state under the transverse-field Ising Hamiltonian
//! H = -J sum_<ij> sz_i sz_j + h sum_i sx_i.
//!
//! Single-site gates rotate the physical index directly. Two-site gates go
//! through the message-dressed simple update: absorb square roots of the
//! incoming environment messages on the non-gate bonds, contract the gate,
//! split with a truncated SVD and undress. Message passing is re-converged
//! before each commuting half-layer of two-site gates and after every full
//! step.

use std::path::PathBuf;

use ndarray::prelude::*;
use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::bp::{self, BpError, MessageSet};
use crate::lattice::{HeavyHexUnitCell, Sublattice, CELL_EDGES, CELL_SITES};
use crate::observables::{self, ObservableError, Pauli};
use crate::tensors::{
    contract, hermitian_root, svd_split, DenseTensor, RootMode, TensorError, TruncationReport,
    DEFAULT_REG_TOL,
};

#[derive(Debug, Error)]
pub enum EvolveError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Bp(#[from] BpError),
    #[error(transparent)]
    Observable(#[from] ObservableError),
    #[error("gate is not unitary (deviation {0:.3e})")]
    NonUnitaryGate(f64),
    #[error("stale messages passed to simple update: {0}")]
    StaleMessages(String),
    #[error("message passing failed to converge twice in a row at step {step} (residual {residual:.3e})")]
    BpDidNotConverge { step: usize, residual: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// Physical index name of a site tensor.
pub fn phys_name(site: usize) -> String {
    format!("p{}", site)
}

/// Virtual index name shared by the two tensors on an edge.
pub fn edge_name(edge: usize) -> String {
    format!("e{}", edge)
}

pub(crate) fn primed(name: &str) -> String {
    format!("{}'", name)
}

/// The unit-cell tensor network state: one tensor per site, with one
/// physical index of dimension 2 and one virtual index per incident edge.
#[derive(Debug, Clone)]
pub struct TensorNetworkState {
    cell: HeavyHexUnitCell,
    tensors: Vec<DenseTensor>,
    bond_dims: Vec<usize>,
}

impl TensorNetworkState {
    /// Builds a state from per-site tensors and validates the index
    /// structure against the cell graph.
    pub fn new(cell: HeavyHexUnitCell, tensors: Vec<DenseTensor>) -> Result<Self, EvolveError> {
        assert_eq!(tensors.len(), CELL_SITES);
        let mut bond_dims = vec![0usize; CELL_EDGES];
        for (site, t) in tensors.iter().enumerate() {
            let expected = 1 + cell.degree(site);
            if t.rank() != expected {
                return Err(EvolveError::InvalidConfig(format!(
                    "site {} tensor has rank {}, expected {}",
                    site,
                    t.rank(),
                    expected
                )));
            }
            let pd = t.dim_of(&phys_name(site))?;
            if pd != 2 {
                return Err(EvolveError::InvalidConfig(format!(
                    "site {} physical index has dimension {}",
                    site, pd
                )));
            }
            for &e in cell.incident_edges(site) {
                let d = t.dim_of(&edge_name(e))?;
                if bond_dims[e] == 0 {
                    bond_dims[e] = d;
                } else if bond_dims[e] != d {
                    return Err(EvolveError::InvalidConfig(format!(
                        "edge {} bond dimension mismatch: {} vs {}",
                        e, bond_dims[e], d
                    )));
                }
            }
        }
        Ok(Self { cell, tensors, bond_dims })
    }

    pub fn cell(&self) -> &HeavyHexUnitCell {
        &self.cell
    }

    pub fn tensor(&self, site: usize) -> &DenseTensor {
        &self.tensors[site]
    }

    pub fn bond_dim(&self, edge: usize) -> usize {
        self.bond_dims[edge]
    }

    pub fn max_bond_dim(&self) -> usize {
        self.bond_dims.iter().copied().max().unwrap_or(1)
    }

    /// Replaces one site tensor; the index structure is revalidated and
    /// bond-dimension records refreshed.
    pub fn set_tensor(&mut self, site: usize, t: DenseTensor) -> Result<(), EvolveError> {
        let mut tensors = self.tensors.clone();
        tensors[site] = t;
        *self = Self::new(self.cell.clone(), tensors)?;
        Ok(())
    }

    fn replace_pair(
        &mut self,
        site_a: usize,
        ta: DenseTensor,
        site_b: usize,
        tb: DenseTensor,
        edge: usize,
        new_dim: usize,
    ) {
        self.tensors[site_a] = ta;
        self.tensors[site_b] = tb;
        self.bond_dims[edge] = new_dim;
    }
}

/// Product initial states used by the quench protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialState {
    /// All spins up along z.
    Zplus,
    /// All spins polarised along +y: (|up> + i |down>)/sqrt(2) everywhere.
    Yplus,
}

impl std::str::FromStr for InitialState {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "zplus" | "z+" | "z" => Ok(InitialState::Zplus),
            "yplus" | "y+" | "y" => Ok(InitialState::Yplus),
            other => Err(format!("unknown initial state `{}`", other)),
        }
    }
}

impl std::fmt::Display for InitialState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InitialState::Zplus => write!(f, "zplus"),
            InitialState::Yplus => write!(f, "yplus"),
        }
    }
}

/// Bond-dimension-1 product state of the requested kind.
pub fn initial_state(kind: InitialState) -> TensorNetworkState {
    let cell = HeavyHexUnitCell::new();
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let amps = match kind {
        InitialState::Zplus => [C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
        InitialState::Yplus => [C64::new(inv_sqrt2, 0.0), C64::new(0.0, inv_sqrt2)],
    };
    let tensors: Vec<DenseTensor> = (0..CELL_SITES)
        .map(|site| {
            let mut names = vec![phys_name(site)];
            let mut shape = vec![2usize];
            for &e in cell.incident_edges(site) {
                names.push(edge_name(e));
                shape.push(1);
            }
            DenseTensor::from_shape_names(names, &shape, |ix| amps[ix[0]])
                .expect("product tensor")
        })
        .collect();
    TensorNetworkState::new(cell, tensors).expect("product state is well-formed")
}

/// Full specification of a quench run.
#[derive(Debug, Clone)]
pub struct QuenchConfig {
    pub j: f64,
    pub h: f64,
    pub initial_state: InitialState,
    pub dt: f64,
    pub t_max: f64,
    pub cutoff: f64,
    pub chi_max: Option<usize>,
    pub bp_tol: f64,
    pub bp_max_iters: usize,
    pub sample_every: usize,
    pub correlator_dmax: usize,
    pub out_dir: Option<PathBuf>,
}

impl Default for QuenchConfig {
    fn default() -> Self {
        Self {
            j: 1.0,
            h: 0.0,
            initial_state: InitialState::Zplus,
            dt: 0.05,
            t_max: 10.0,
            cutoff: 1e-12,
            chi_max: None,
            bp_tol: 1e-12,
            bp_max_iters: 1000,
            sample_every: 1,
            correlator_dmax: 0,
            out_dir: None,
        }
    }
}

impl QuenchConfig {
    pub fn validate(&self) -> Result<(), EvolveError> {
        let bad = |msg: String| Err(EvolveError::InvalidConfig(msg));
        if !(self.dt > 0.0) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if self.t_max < 0.0 {
            return bad(format!("t_max must be nonnegative, got {}", self.t_max));
        }
        if !(0.0..1.0).contains(&self.cutoff) {
            return bad(format!("cutoff must lie in [0,1), got {}", self.cutoff));
        }
        if self.chi_max == Some(0) {
            return bad("chi_max must be at least 1 when set".to_string());
        }
        if !(self.bp_tol > 0.0) {
            return bad(format!("bp_tol must be positive, got {}", self.bp_tol));
        }
        if self.bp_max_iters == 0 {
            return bad("bp_max_iters must be at least 1".to_string());
        }
        if self.sample_every == 0 {
            return bad("sample_every must be at least 1".to_string());
        }
        Ok(())
    }
}

/// One gate of a Trotter step, in application order.
#[derive(Debug, Clone)]
pub enum Gate {
    /// 4x4 unitary on the edge's (A, B) physical pair, row/column order
    /// (a_out, b_out) x (a_in, b_in).
    TwoSite { edge: usize, matrix: Array2<C64> },
    /// 2x2 unitary on one site.
    SingleSite { site: usize, matrix: Array2<C64> },
}

/// exp(+i j (dt/2) sz (x) sz): the half-step bond gate of the symmetric
/// splitting of exp(-i H dt).
pub fn zz_half_gate(j: f64, dt: f64) -> Array2<C64> {
    let theta = j * dt / 2.0;
    let plus = C64::from_polar(1.0, theta);
    let minus = C64::from_polar(1.0, -theta);
    let mut g = Array2::<C64>::zeros((4, 4));
    g[[0, 0]] = plus; // |uu>
    g[[1, 1]] = minus; // |ud>
    g[[2, 2]] = minus; // |du>
    g[[3, 3]] = plus; // |dd>
    g
}

/// exp(-i h dt sx): the on-site transverse-field rotation for one full step.
pub fn x_gate(h: f64, dt: f64) -> Array2<C64> {
    let theta = h * dt;
    let c = C64::new(theta.cos(), 0.0);
    let s = C64::new(0.0, -theta.sin());
    let mut g = Array2::<C64>::zeros((2, 2));
    g[[0, 0]] = c;
    g[[1, 1]] = c;
    g[[0, 1]] = s;
    g[[1, 0]] = s;
    g
}

/// The symmetric second-order gate sequence of one Trotter step: a half
/// layer of bond gates in canonical edge order, the full single-site layer,
/// then the mirrored half layer in reverse order.
pub fn trotter_step_gates(j: f64, h: f64, dt: f64) -> Vec<Gate> {
    assert!(dt > 0.0, "dt must be positive");
    let zz = zz_half_gate(j, dt);
    let x = x_gate(h, dt);
    let mut gates = Vec::with_capacity(2 * CELL_EDGES + CELL_SITES);
    for edge in 0..CELL_EDGES {
        gates.push(Gate::TwoSite { edge, matrix: zz.clone() });
    }
    for site in 0..CELL_SITES {
        gates.push(Gate::SingleSite { site, matrix: x.clone() });
    }
    for edge in (0..CELL_EDGES).rev() {
        gates.push(Gate::TwoSite { edge, matrix: zz.clone() });
    }
    gates
}

fn unitarity_deviation(g: &Array2<C64>) -> f64 {
    let gh = g.t().mapv(|z| z.conj());
    let prod = gh.dot(g);
    let n = g.nrows();
    let mut dev = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let expect = if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
            dev = dev.max((prod[[i, j]] - expect).norm());
        }
    }
    dev
}

/// Applies a 2x2 unitary to one site's physical index. Bond dimensions are
/// untouched, and converged messages stay converged (the update contracts
/// U against its own conjugate over the physical leg).
pub fn apply_single_site(
    mut state: TensorNetworkState,
    site: usize,
    gate: &Array2<C64>,
) -> Result<TensorNetworkState, EvolveError> {
    let dev = unitarity_deviation(gate);
    if dev > 1e-12 {
        return Err(EvolveError::NonUnitaryGate(dev));
    }
    let p = phys_name(site);
    let g = DenseTensor::from_matrix("_out", &p, gate.clone());
    let mut t = contract(&g, state.tensor(site), &[(&p, &p)])?;
    t.rename("_out", &p)?;
    state.tensors[site] = t;
    Ok(state)
}

/// Applies a 4x4 gate across one edge with the message-dressed simple
/// update, truncating the new bond with (cutoff, chi_max).
///
/// The messages entering the two endpoint tensors on their non-gate edges
/// must come from a converged fixed point; both messages on the updated edge
/// are replaced by the (trace-normalised) diagonal of kept singular values,
/// which is their new fixed-point value up to truncation corrections.
pub fn apply_two_site_simple_update(
    mut state: TensorNetworkState,
    msgs: &mut MessageSet,
    edge: usize,
    gate: &Array2<C64>,
    cutoff: f64,
    chi_max: Option<usize>,
) -> Result<(TensorNetworkState, TruncationReport), EvolveError> {
    let cell = state.cell().clone();
    let e = cell.edge(edge);
    let (sa, sb) = (e.a_site, e.b_site);
    let ename = edge_name(edge);
    let (pa, pb) = (phys_name(sa), phys_name(sb));

    // Dress each endpoint with the square roots of the incoming messages on
    // its non-gate edges; keep the inverse roots for the undressing step.
    let mut dressed = Vec::with_capacity(2);
    for &site in &[sa, sb] {
        let mut t = state.tensor(site).clone();
        let mut inv_roots: Vec<(String, Array2<C64>)> = Vec::new();
        for &f in cell.incident_edges(site) {
            if f == edge {
                continue;
            }
            let m = msgs.get(&cell, f, site);
            let tr: C64 = (0..m.nrows()).map(|i| m[[i, i]]).sum();
            if (tr.re - 1.0).abs() > 1e-6 || tr.im.abs() > 1e-6 {
                return Err(EvolveError::StaleMessages(format!(
                    "message into site {} on edge {} has trace {:.6e}+{:.1e}i",
                    site, f, tr.re, tr.im
                )));
            }
            if m.nrows() != state.bond_dim(f) {
                return Err(EvolveError::StaleMessages(format!(
                    "message on edge {} has dimension {} but the bond is {}",
                    f,
                    m.nrows(),
                    state.bond_dim(f)
                )));
            }
            let root = hermitian_root(m, RootMode::Sqrt, DEFAULT_REG_TOL)?;
            let inv = hermitian_root(m, RootMode::InvSqrt, DEFAULT_REG_TOL)?;
            let fname = edge_name(f);
            let rt = DenseTensor::from_matrix("_d", &fname, root);
            t = contract(&t, &rt, &[(&fname, &fname)])?;
            t.rename("_d", &fname)?;
            inv_roots.push((fname, inv));
        }
        dressed.push((t, inv_roots));
    }
    let (tb_dressed, inv_b) = dressed.pop().expect("b endpoint");
    let (ta_dressed, inv_a) = dressed.pop().expect("a endpoint");

    // Two-site block with the gate applied across the physical pair.
    let theta0 = contract(&ta_dressed, &tb_dressed, &[(&ename, &ename)])?;
    let g4 = gate
        .clone()
        .into_shape_with_order((2, 2, 2, 2))
        .expect("4x4 gate reshape")
        .into_dyn();
    let gt = DenseTensor::new(
        vec!["_oa".to_string(), "_ob".to_string(), pa.clone(), pb.clone()],
        g4,
    )?;
    let mut theta = contract(&theta0, &gt, &[(&pa, &pa), (&pb, &pb)])?;
    theta.rename("_oa", &pa)?;
    theta.rename("_ob", &pb)?;

    // Split across the edge, absorbing sqrt(S) into each side.
    let mut left: Vec<String> = vec![pa.clone()];
    for &f in cell.incident_edges(sa) {
        if f != edge {
            left.push(edge_name(f));
        }
    }
    let left_refs: Vec<&str> = left.iter().map(|s| s.as_str()).collect();
    let (u, s, v, report) = svd_split(&theta, &left_refs, cutoff, chi_max, "_bond")?;
    let chi_new = s.len();
    let sqrt_s = DenseTensor::from_shape_names(vec!["_bond", "_bond2"], &[chi_new, chi_new], |ix| {
        if ix[0] == ix[1] {
            C64::new(s[ix[0]].sqrt(), 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })?;
    let mut ta_new = contract(&u, &sqrt_s, &[("_bond", "_bond")])?;
    ta_new.rename("_bond2", &ename)?;
    let mut tb_new = contract(&sqrt_s, &v, &[("_bond2", "_bond")])?;
    tb_new.rename("_bond", &ename)?;

    // Undress the spectator bonds.
    for (t, inv_roots) in [(&mut ta_new, &inv_a), (&mut tb_new, &inv_b)] {
        for (fname, inv) in inv_roots.iter() {
            let it = DenseTensor::from_matrix("_u", fname, inv.clone());
            *t = contract(t, &it, &[(fname.as_str(), fname.as_str())])?;
            t.rename("_u", fname)?;
        }
    }

    // The kept singular values are the new fixed-point messages on this edge.
    let s_sum: f64 = s.iter().sum();
    let m_new = Array2::from_shape_fn((chi_new, chi_new), |(i, j)| {
        if i == j {
            C64::new(s[i] / s_sum, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    state.replace_pair(sa, ta_new, sb, tb_new, edge, chi_new);
    msgs.set(&cell, edge, sa, m_new.clone());
    msgs.set(&cell, edge, sb, m_new);
    Ok((state, report))
}

/// One sampled row of observables.
#[derive(Debug, Clone, Copy)]
pub struct TimeSeriesRow {
    pub t: f64,
    pub mz_a: f64,
    pub mz_b: f64,
    pub mx_a: f64,
    pub mx_b: f64,
    pub my_a: f64,
    pub my_b: f64,
    pub s: f64,
    pub max_bond: usize,
    pub cum_discarded: f64,
    pub bp_iters: usize,
}

/// One sampled connected correlator value.
#[derive(Debug, Clone, Copy)]
pub struct CorrelatorRow {
    pub t: f64,
    pub start: Sublattice,
    pub d: usize,
    pub value: f64,
}

/// Sampled observables of a quench run.
#[derive(Debug, Clone, Default)]
pub struct TimeSeries {
    pub rows: Vec<TimeSeriesRow>,
    pub correlators: Vec<CorrelatorRow>,
    pub warnings: Vec<String>,
}

impl TimeSeries {
    pub fn column(&self, f: impl Fn(&TimeSeriesRow) -> f64) -> Vec<f64> {
        self.rows.iter().map(f).collect()
    }
}

fn sublattice_mean(
    state: &TensorNetworkState,
    msgs: &MessageSet,
    which: Sublattice,
    pauli: Pauli,
) -> Result<f64, EvolveError> {
    let sites = state.cell().sites_of(which);
    let mut acc = 0.0;
    for &site in &sites {
        acc += observables::local_expectation(state, msgs, site, pauli)?;
    }
    Ok(acc / sites.len() as f64)
}

/// Runs a full quench and samples the observable time series.
pub fn run_quench(config: &QuenchConfig) -> Result<TimeSeries, EvolveError> {
    config.validate()?;
    let mut series = TimeSeries::default();

    let n_steps = (config.t_max / config.dt + 1e-9).floor() as usize;
    let rounding = (config.t_max - n_steps as f64 * config.dt).abs();
    if rounding > 1e-9 * config.dt.max(1.0) {
        series.warnings.push(format!(
            "t_max {} is not a multiple of dt {}; running {} full steps to t = {}",
            config.t_max,
            config.dt,
            n_steps,
            n_steps as f64 * config.dt
        ));
    }

    let mut state = initial_state(config.initial_state);
    let mut msgs = bp::init_messages(&state);
    let mut consecutive_failures = 0usize;
    let mut cum_discarded = 0.0f64;
    let gates = trotter_step_gates(config.j, config.h, config.dt);
    let (first_half, rest) = gates.split_at(CELL_EDGES);
    let (singles, second_half) = rest.split_at(CELL_SITES);

    let converge =
        |state: &TensorNetworkState, msgs: &mut MessageSet, step: usize, consecutive: &mut usize|
         -> Result<usize, EvolveError> {
            let (new_msgs, report) =
                bp::bp_fixed_point(state, msgs, config.bp_tol, config.bp_max_iters)?;
            *msgs = new_msgs;
            if report.converged {
                *consecutive = 0;
            } else {
                *consecutive += 1;
                if *consecutive >= 2 {
                    return Err(EvolveError::BpDidNotConverge {
                        step,
                        residual: report.final_residual,
                    });
                }
            }
            Ok(report.iterations)
        };

    let mut bp_iters_this_step = converge(&state, &mut msgs, 0, &mut consecutive_failures)?;
    let sample = |series: &mut TimeSeries,
                      state: &TensorNetworkState,
                      msgs: &MessageSet,
                      t: f64,
                      cum_discarded: f64,
                      bp_iters: usize|
     -> Result<(), EvolveError> {
        let spectra = observables::vidal_bond_spectra(state, msgs)?;
        let s_mean = spectra
            .iter()
            .map(observables::entanglement_density)
            .sum::<f64>()
            / spectra.len() as f64;
        series.rows.push(TimeSeriesRow {
            t,
            mz_a: sublattice_mean(state, msgs, Sublattice::A, Pauli::Z)?,
            mz_b: sublattice_mean(state, msgs, Sublattice::B, Pauli::Z)?,
            mx_a: sublattice_mean(state, msgs, Sublattice::A, Pauli::X)?,
            mx_b: sublattice_mean(state, msgs, Sublattice::B, Pauli::X)?,
            my_a: sublattice_mean(state, msgs, Sublattice::A, Pauli::Y)?,
            my_b: sublattice_mean(state, msgs, Sublattice::B, Pauli::Y)?,
            s: s_mean,
            max_bond: state.max_bond_dim(),
            cum_discarded,
            bp_iters,
        });
        if config.correlator_dmax > 0 {
            for start in [Sublattice::A, Sublattice::B] {
                for sample in
                    observables::correlator_profile(state, msgs, start, config.correlator_dmax)?
                {
                    series.correlators.push(CorrelatorRow {
                        t,
                        start,
                        d: sample.d,
                        value: sample.value,
                    });
                }
            }
        }
        Ok(())
    };

    sample(&mut series, &state, &msgs, 0.0, cum_discarded, bp_iters_this_step)?;

    for step in 1..=n_steps {
        bp_iters_this_step = 0;
        // first bond half-layer (messages were re-converged after the
        // previous step, which is the "before half-layer" point for this one)
        bp_iters_this_step += converge(&state, &mut msgs, step, &mut consecutive_failures)?;
        for gate in first_half {
            if let Gate::TwoSite { edge, matrix } = gate {
                let (new_state, report) = apply_two_site_simple_update(
                    state,
                    &mut msgs,
                    *edge,
                    matrix,
                    config.cutoff,
                    config.chi_max,
                )?;
                state = new_state;
                cum_discarded += report.discarded_weight;
            }
        }
        // single-site layer: leaves any converged message set converged
        for gate in singles {
            if let Gate::SingleSite { site, matrix } = gate {
                state = apply_single_site(state, *site, matrix)?;
            }
        }
        // mirrored bond half-layer
        bp_iters_this_step += converge(&state, &mut msgs, step, &mut consecutive_failures)?;
        for gate in second_half {
            if let Gate::TwoSite { edge, matrix } = gate {
                let (new_state, report) = apply_two_site_simple_update(
                    state,
                    &mut msgs,
                    *edge,
                    matrix,
                    config.cutoff,
                    config.chi_max,
                )?;
                state = new_state;
                cum_discarded += report.discarded_weight;
            }
        }
        // after the step (also the sampling environment)
        bp_iters_this_step += converge(&state, &mut msgs, step, &mut consecutive_failures)?;

        if step % config.sample_every == 0 {
            sample(
                &mut series,
                &state,
                &msgs,
                step as f64 * config.dt,
                cum_discarded,
                bp_iters_this_step,
            )?;
        }
    }

    Ok(series)
}

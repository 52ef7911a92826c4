//! Dense complex tensor kernels: named-index contraction, truncated
//! singular-value splitting and Hermitian matrix roots.
//!
//! Contractions are routed through a single zgemm after axis permutation, so
//! the reduction order inside a kernel is fixed and results are reproducible
//! within one build.

use ndarray::prelude::*;
use ndarray_linalg::{Eigh, JobSvd, SVDDCInto, UPLO};
use num_complex::Complex64 as C64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("index dimension mismatch: {a}({da}) vs {b}({db})")]
    DimensionMismatch { a: String, da: usize, b: String, db: usize },
    #[error("duplicate index name `{0}`")]
    DuplicateIndexName(String),
    #[error("unknown index name `{0}`")]
    UnknownIndex(String),
    #[error("left index set of an SVD split must be a nonempty proper subset")]
    EmptyPartition,
    #[error("matrix factorization did not converge")]
    NumericalFailure,
    #[error("matrix is not Hermitian (asymmetry {0:.3e} exceeds tolerance)")]
    NotHermitian(f64),
    #[error("matrix has a negative eigenvalue {0:.3e} below tolerance")]
    NegativeSpectrum(f64),
    #[error("tensor contains a non-finite entry")]
    NonFiniteEntry,
}

/// Outcome of a truncated SVD: the relative squared weight that was dropped
/// and the rank that was kept.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationReport {
    pub discarded_weight: f64,
    pub kept_rank: usize,
}

/// Dense complex tensor with one name per axis. Physical indices have
/// dimension 2; virtual indices carry the bond dimension of their edge.
#[derive(Debug, Clone)]
pub struct DenseTensor {
    data: ArrayD<C64>,
    names: Vec<String>,
}

impl DenseTensor {
    pub fn new(names: Vec<String>, data: ArrayD<C64>) -> Result<Self, TensorError> {
        assert_eq!(names.len(), data.ndim(), "one name per axis");
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(TensorError::DuplicateIndexName(n.clone()));
            }
        }
        Ok(Self { data, names })
    }

    pub fn from_shape_names<I: Into<String>>(
        names: Vec<I>,
        shape: &[usize],
        fill: impl FnMut(&[usize]) -> C64,
    ) -> Result<Self, TensorError> {
        let mut fill = fill;
        let data = ArrayD::from_shape_fn(IxDyn(shape), |ix| fill(ix.slice()));
        Self::new(names.into_iter().map(Into::into).collect(), data)
    }

    /// 0-rank tensor holding one scalar.
    pub fn scalar(value: C64) -> Self {
        Self { data: ArrayD::from_elem(IxDyn(&[]), value), names: Vec::new() }
    }

    /// Wraps a matrix as a 2-index tensor.
    pub fn from_matrix(row_name: &str, col_name: &str, m: Array2<C64>) -> Self {
        Self {
            data: m.into_dyn(),
            names: vec![row_name.to_string(), col_name.to_string()],
        }
    }

    pub fn rank(&self) -> usize {
        self.data.ndim()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn data(&self) -> &ArrayD<C64> {
        &self.data
    }

    pub fn axis_of(&self, name: &str) -> Result<usize, TensorError> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| TensorError::UnknownIndex(name.to_string()))
    }

    pub fn dim_of(&self, name: &str) -> Result<usize, TensorError> {
        Ok(self.data.shape()[self.axis_of(name)?])
    }

    pub fn has_index(&self, name: &str) -> bool {
        self.names.iter().any(|n| n == name)
    }

    pub fn rename(&mut self, old: &str, new: &str) -> Result<(), TensorError> {
        if old != new && self.has_index(new) {
            return Err(TensorError::DuplicateIndexName(new.to_string()));
        }
        let ax = self.axis_of(old)?;
        self.names[ax] = new.to_string();
        Ok(())
    }

    /// Entrywise complex conjugate; names unchanged.
    pub fn conj(&self) -> Self {
        Self { data: self.data.mapv(|z| z.conj()), names: self.names.clone() }
    }

    /// Conjugate with every index name passed through `f` (used to prime the
    /// bra side of a sandwich).
    pub fn conj_with_names(&self, f: impl Fn(&str) -> String) -> Self {
        Self {
            data: self.data.mapv(|z| z.conj()),
            names: self.names.iter().map(|n| f(n)).collect(),
        }
    }

    pub fn scaled(&self, factor: C64) -> Self {
        Self { data: self.data.mapv(|z| z * factor), names: self.names.clone() }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// The value of a 0-rank tensor.
    pub fn as_scalar(&self) -> C64 {
        assert_eq!(self.rank(), 0, "as_scalar on rank-{} tensor", self.rank());
        self.data[IxDyn(&[])]
    }

    /// Copies into a matrix with the given row/column index names.
    pub fn to_matrix(&self, row: &str, col: &str) -> Result<Array2<C64>, TensorError> {
        let r = self.axis_of(row)?;
        let c = self.axis_of(col)?;
        let view = self.data.view().permuted_axes(IxDyn(&[r, c]));
        let shape = (view.shape()[0], view.shape()[1]);
        let std = view.as_standard_layout().into_owned();
        Ok(std.into_shape_with_order(shape).expect("2d reshape"))
    }

    pub fn assert_finite(&self) -> Result<(), TensorError> {
        if self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            Ok(())
        } else {
            Err(TensorError::NonFiniteEntry)
        }
    }

    fn permuted_standard(&self, order: &[usize]) -> ArrayD<C64> {
        self.data
            .view()
            .permuted_axes(IxDyn(order))
            .as_standard_layout()
            .into_owned()
    }
}

/// Contracts `a` and `b` over the listed index-name pairs. Remaining indices
/// keep their names, a's free indices first.
pub fn contract(
    a: &DenseTensor,
    b: &DenseTensor,
    pairs: &[(&str, &str)],
) -> Result<DenseTensor, TensorError> {
    let mut ax_a = Vec::with_capacity(pairs.len());
    let mut ax_b = Vec::with_capacity(pairs.len());
    for &(na, nb) in pairs {
        let ia = a.axis_of(na)?;
        let ib = b.axis_of(nb)?;
        if ax_a.contains(&ia) {
            return Err(TensorError::DuplicateIndexName(na.to_string()));
        }
        if ax_b.contains(&ib) {
            return Err(TensorError::DuplicateIndexName(nb.to_string()));
        }
        let (da, db) = (a.data.shape()[ia], b.data.shape()[ib]);
        if da != db {
            return Err(TensorError::DimensionMismatch {
                a: na.to_string(),
                da,
                b: nb.to_string(),
                db,
            });
        }
        ax_a.push(ia);
        ax_b.push(ib);
    }

    let free_a: Vec<usize> = (0..a.rank()).filter(|i| !ax_a.contains(i)).collect();
    let free_b: Vec<usize> = (0..b.rank()).filter(|i| !ax_b.contains(i)).collect();

    let mut names = Vec::with_capacity(free_a.len() + free_b.len());
    for &i in &free_a {
        names.push(a.names[i].clone());
    }
    for &i in &free_b {
        if names.contains(&b.names[i]) {
            return Err(TensorError::DuplicateIndexName(b.names[i].clone()));
        }
        names.push(b.names[i].clone());
    }

    let m: usize = free_a.iter().map(|&i| a.data.shape()[i]).product();
    let k: usize = ax_a.iter().map(|&i| a.data.shape()[i]).product();
    let n: usize = free_b.iter().map(|&i| b.data.shape()[i]).product();

    let order_a: Vec<usize> = free_a.iter().chain(ax_a.iter()).copied().collect();
    let order_b: Vec<usize> = ax_b.iter().chain(free_b.iter()).copied().collect();
    let a2 = a
        .permuted_standard(&order_a)
        .into_shape_with_order((m, k))
        .expect("contract lhs reshape");
    let b2 = b
        .permuted_standard(&order_b)
        .into_shape_with_order((k, n))
        .expect("contract rhs reshape");

    let c2 = a2.dot(&b2);

    let mut shape = Vec::with_capacity(names.len());
    for &i in &free_a {
        shape.push(a.data.shape()[i]);
    }
    for &i in &free_b {
        shape.push(b.data.shape()[i]);
    }
    let data = c2.into_shape_with_order(IxDyn(&shape)).expect("contract result reshape");
    let out = DenseTensor { data, names };
    out.assert_finite()?;
    Ok(out)
}

/// Splits `t` by truncated SVD with the given left index set.
///
/// The trailing singular values whose squared sum stays below
/// `cutoff * (total squared sum)` are dropped, then the rank is additionally
/// capped at `chi_max`. The new bond axis is named `bond` in both factors
/// (last axis of `U`, first axis of `V`); `S` is returned unabsorbed.
pub fn svd_split(
    t: &DenseTensor,
    left: &[&str],
    cutoff: f64,
    chi_max: Option<usize>,
    bond: &str,
) -> Result<(DenseTensor, Vec<f64>, DenseTensor, TruncationReport), TensorError> {
    if left.is_empty() || left.len() >= t.rank() {
        return Err(TensorError::EmptyPartition);
    }
    let mut left_axes = Vec::with_capacity(left.len());
    for name in left {
        let ax = t.axis_of(name)?;
        if left_axes.contains(&ax) {
            return Err(TensorError::DuplicateIndexName(name.to_string()));
        }
        left_axes.push(ax);
    }
    let right_axes: Vec<usize> = (0..t.rank()).filter(|i| !left_axes.contains(i)).collect();

    let m: usize = left_axes.iter().map(|&i| t.data.shape()[i]).product();
    let n: usize = right_axes.iter().map(|&i| t.data.shape()[i]).product();
    let order: Vec<usize> = left_axes.iter().chain(right_axes.iter()).copied().collect();
    let mat = t
        .permuted_standard(&order)
        .into_shape_with_order((m, n))
        .expect("svd reshape");

    let (u_opt, s, vt_opt) = mat
        .svddc_into(JobSvd::Some)
        .map_err(|_| TensorError::NumericalFailure)?;
    let mut u = u_opt.expect("left singular vectors requested");
    let mut vt = vt_opt.expect("right singular vectors requested");

    // Truncation rule: drop the largest trailing set with relative squared
    // sum <= cutoff, then cap at chi_max; always keep at least rank 1.
    let total: f64 = s.iter().map(|x| x * x).sum();
    let full = s.len();
    let mut keep = full;
    if total > 0.0 {
        let mut tail = 0.0;
        while keep > 1 {
            let next_tail = tail + s[keep - 1] * s[keep - 1];
            if next_tail <= cutoff * total {
                tail = next_tail;
                keep -= 1;
            } else {
                break;
            }
        }
    }
    if let Some(cap) = chi_max {
        keep = keep.min(cap.max(1));
    }
    let kept: Vec<f64> = s.iter().take(keep).copied().collect();
    let discarded: f64 = s.iter().skip(keep).map(|x| x * x).sum();
    let report = TruncationReport {
        discarded_weight: if total > 0.0 { discarded / total } else { 0.0 },
        kept_rank: keep,
    };

    // Phase gauge: make the largest-magnitude entry of each kept left
    // singular vector real-positive, so results are deterministic.
    for j in 0..keep {
        let col = u.column(j);
        let mut best = 0usize;
        let mut best_mag = -1.0;
        for (i, z) in col.iter().enumerate() {
            let mag = z.norm_sqr();
            if mag > best_mag + 1e-30 {
                best_mag = mag;
                best = i;
            }
        }
        let z = u[[best, j]];
        if z.norm() > 0.0 {
            let phase = z / z.norm();
            let pc = phase.conj();
            u.column_mut(j).mapv_inplace(|x| x * pc);
            vt.row_mut(j).mapv_inplace(|x| x * phase);
        }
    }

    let u_kept = u.slice(s![.., ..keep]).to_owned();
    let vt_kept = vt.slice(s![..keep, ..]).to_owned();

    let mut u_shape: Vec<usize> = left_axes.iter().map(|&i| t.data.shape()[i]).collect();
    u_shape.push(keep);
    let mut u_names: Vec<String> = left_axes.iter().map(|&i| t.names[i].clone()).collect();
    u_names.push(bond.to_string());
    let u_t = DenseTensor {
        data: u_kept.into_shape_with_order(IxDyn(&u_shape)).expect("U reshape"),
        names: u_names,
    };

    let mut v_shape: Vec<usize> = vec![keep];
    v_shape.extend(right_axes.iter().map(|&i| t.data.shape()[i]));
    let mut v_names: Vec<String> = vec![bond.to_string()];
    v_names.extend(right_axes.iter().map(|&i| t.names[i].clone()));
    let v_t = DenseTensor {
        data: vt_kept.into_shape_with_order(IxDyn(&v_shape)).expect("V reshape"),
        names: v_names,
    };

    u_t.assert_finite()?;
    v_t.assert_finite()?;
    debug_assert!(kept.windows(2).all(|w| w[0] >= w[1]));
    Ok((u_t, kept, v_t, report))
}

/// Which root of a Hermitian PSD matrix to take.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RootMode {
    Sqrt,
    InvSqrt,
}

/// Hermitian matrix square root or regularized inverse square root.
///
/// The input is symmetrized, negative eigenvalues above `-1e-10` are clamped
/// to zero, and in `InvSqrt` mode eigenvalues below `reg_tol` times the
/// largest eigenvalue are treated as exactly zero (pseudo-inverse).
pub fn hermitian_root(
    m: &Array2<C64>,
    mode: RootMode,
    reg_tol: f64,
) -> Result<Array2<C64>, TensorError> {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "hermitian_root needs a square matrix");
    let mut asym = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            asym = asym.max((m[[i, j]] - m[[j, i]].conj()).norm());
        }
    }
    if asym > 1e-10 {
        return Err(TensorError::NotHermitian(asym));
    }
    let sym = (m + &m.t().mapv(|z| z.conj())).mapv(|z| z * 0.5);
    let (w, v) = sym.eigh(UPLO::Lower).map_err(|_| TensorError::NumericalFailure)?;
    if let Some(&min) = w.iter().min_by(|a, b| a.partial_cmp(b).unwrap()) {
        if min < -1e-10 {
            return Err(TensorError::NegativeSpectrum(min));
        }
    }
    let w_max = w.iter().fold(0.0f64, |acc, &x| acc.max(x));
    let f: Array1<f64> = w.mapv(|x| {
        let x = x.max(0.0);
        match mode {
            RootMode::Sqrt => x.sqrt(),
            RootMode::InvSqrt => {
                if x <= reg_tol * w_max || x == 0.0 {
                    0.0
                } else {
                    1.0 / x.sqrt()
                }
            }
        }
    });
    // the eigensolver hands back V with conjugated columns as eigenvectors
    // (A conj(col) = w conj(col)), so m = conj(V) diag(w) V^T
    let mut vf = v.mapv(|z| z.conj());
    for (j, &fj) in f.iter().enumerate() {
        vf.column_mut(j).mapv_inplace(|z| z * fj);
    }
    Ok(vf.dot(&v.t()))
}

/// Default relative regularization for pseudo-inverse square roots.
pub const DEFAULT_REG_TOL: f64 = 1e-12;

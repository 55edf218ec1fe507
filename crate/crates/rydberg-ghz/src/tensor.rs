//! Operators on tensor products of three-level atoms.
//!
//! Basis states are ordered big-endian: atom 0 is the most significant
//! base-3 digit, and each digit follows `g0 < g1 < ryd`.

use std::collections::HashMap;
use std::fmt;

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Level {
    G0,
    G1,
    Ryd,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::G0, Level::G1, Level::Ryd];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Level> {
        Level::ALL.get(i).copied()
    }

    pub fn symbol(self) -> char {
        match self {
            Level::G0 => '0',
            Level::G1 => '1',
            Level::Ryd => 'r',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BasisLabel {
    atoms: Vec<Level>,
}

impl BasisLabel {
    pub fn new(atoms: Vec<Level>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidParameter("basis label needs at least one atom".into()));
        }
        Ok(Self { atoms })
    }

    pub fn uniform(level: Level, n_atoms: usize) -> Self {
        Self { atoms: vec![level; n_atoms.max(1)] }
    }

    /// Parses labels such as `"0r1"`.
    pub fn parse(s: &str) -> Result<Self> {
        let atoms = s
            .chars()
            .map(|c| match c {
                '0' => Ok(Level::G0),
                '1' => Ok(Level::G1),
                'r' => Ok(Level::Ryd),
                _ => Err(Error::InvalidParameter(format!("bad level symbol {c:?} in {s:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(atoms)
    }

    pub fn atoms(&self) -> &[Level] {
        &self.atoms
    }

    pub fn n_atoms(&self) -> usize {
        self.atoms.len()
    }

    pub fn index(&self) -> usize {
        self.atoms.iter().fold(0, |acc, l| acc * 3 + l.index())
    }

    pub fn from_index(mut index: usize, n_atoms: usize) -> Result<Self> {
        if n_atoms == 0 || index >= dim_for(n_atoms) {
            return Err(Error::InvalidParameter(format!(
                "index {index} out of range for {n_atoms} atoms"
            )));
        }
        let mut atoms = vec![Level::G0; n_atoms];
        for slot in atoms.iter_mut().rev() {
            *slot = Level::ALL[index % 3];
            index /= 3;
        }
        Ok(Self { atoms })
    }

    pub fn with(&self, site: usize, level: Level) -> Self {
        let mut atoms = self.atoms.clone();
        atoms[site] = level;
        Self { atoms }
    }
}

impl fmt::Display for BasisLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.atoms {
            write!(f, "{}", l.symbol())?;
        }
        Ok(())
    }
}

pub fn dim_for(n_atoms: usize) -> usize {
    3usize.pow(n_atoms as u32)
}

pub fn atoms_for_dim(dim: usize) -> Result<usize> {
    let mut n = 0;
    let mut d = 1;
    while d < dim {
        d *= 3;
        n += 1;
    }
    if d != dim || dim == 0 {
        return Err(Error::NotPowerOfThree(dim));
    }
    Ok(n)
}

/// Level of `site` within the basis state `index`.
pub fn level_at(index: usize, site: usize, n_atoms: usize) -> Level {
    let shift = 3usize.pow((n_atoms - 1 - site) as u32);
    Level::ALL[(index / shift) % 3]
}

/// Number of nearest-neighbour pairs both in `ryd`.
pub fn adjacent_rydberg_pairs(index: usize, n_atoms: usize) -> usize {
    (0..n_atoms.saturating_sub(1))
        .filter(|&k| {
            level_at(index, k, n_atoms) == Level::Ryd && level_at(index, k + 1, n_atoms) == Level::Ryd
        })
        .count()
}

/// Dense square operator on `3^n_atoms` states.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    n_atoms: usize,
    data: Array2<C64>,
}

impl Operator {
    pub fn zeros(n_atoms: usize) -> Self {
        let d = dim_for(n_atoms);
        Self { n_atoms, data: Array2::zeros((d, d)) }
    }

    pub fn identity(n_atoms: usize) -> Self {
        let d = dim_for(n_atoms);
        Self { n_atoms, data: Array2::eye(d) }
    }

    pub fn from_array(data: Array2<C64>) -> Result<Self> {
        let (r, c) = data.dim();
        if r != c {
            return Err(Error::DimMismatch(r, c));
        }
        let n_atoms = atoms_for_dim(r)?;
        Ok(Self { n_atoms, data })
    }

    pub fn projector(label: &BasisLabel) -> Self {
        let mut op = Self::zeros(label.n_atoms());
        let i = label.index();
        op.data[[i, i]] = ONE;
        op
    }

    pub fn outer(ket: &Array1<C64>, bra: &Array1<C64>) -> Result<Self> {
        if ket.len() != bra.len() {
            return Err(Error::DimMismatch(ket.len(), bra.len()));
        }
        let d = ket.len();
        let data = Array2::from_shape_fn((d, d), |(i, j)| ket[i] * bra[j].conj());
        Self::from_array(data)
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn array(&self) -> &Array2<C64> {
        &self.data
    }

    pub fn into_array(self) -> Array2<C64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.data[[row, col]]
    }

    fn check_dim(&self, other: &Operator) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimMismatch(self.dim(), other.dim()));
        }
        Ok(())
    }

    pub fn add(&self, other: &Operator) -> Result<Operator> {
        self.check_dim(other)?;
        Ok(Self { n_atoms: self.n_atoms, data: &self.data + &other.data })
    }

    pub fn sub(&self, other: &Operator) -> Result<Operator> {
        self.check_dim(other)?;
        Ok(Self { n_atoms: self.n_atoms, data: &self.data - &other.data })
    }

    pub fn scale(&self, c: C64) -> Operator {
        Self { n_atoms: self.n_atoms, data: self.data.mapv(|x| x * c) }
    }

    pub fn matmul(&self, other: &Operator) -> Result<Operator> {
        self.check_dim(other)?;
        Ok(Self { n_atoms: self.n_atoms, data: self.data.dot(&other.data) })
    }

    pub fn apply(&self, v: &Array1<C64>) -> Result<Array1<C64>> {
        if v.len() != self.dim() {
            return Err(Error::DimMismatch(self.dim(), v.len()));
        }
        Ok(self.data.dot(v))
    }

    pub fn adjoint(&self) -> Operator {
        Self { n_atoms: self.n_atoms, data: self.data.t().mapv(|x| x.conj()) }
    }

    pub fn trace(&self) -> C64 {
        self.data.diag().sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.norm()))
    }

    pub fn max_abs_diff(&self, other: &Operator) -> Result<f64> {
        self.check_dim(other)?;
        Ok(self
            .data
            .iter()
            .zip(other.data.iter())
            .fold(0.0, |m, (a, b)| m.max((a - b).norm())))
    }

    /// Largest elementwise `|A - A†|`.
    pub fn hermiticity_defect(&self) -> f64 {
        hermiticity_defect(&self.data)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    pub fn to_sparse(&self) -> SparseOperator {
        let d = self.dim();
        let mut triplets = Vec::new();
        for i in 0..d {
            for j in 0..d {
                let v = self.data[[i, j]];
                if v != ZERO {
                    triplets.push((i, j, v));
                }
            }
        }
        SparseOperator::from_triplets(self.n_atoms, triplets)
    }

    /// Largest singular value.
    pub fn spectral_norm(&self) -> f64 {
        spectral_norm(&self.data)
    }
}

pub fn hermiticity_defect(a: &Array2<C64>) -> f64 {
    let d = a.nrows();
    let mut m: f64 = 0.0;
    for i in 0..d {
        for j in i..d {
            m = m.max((a[[i, j]] - a[[j, i]].conj()).norm());
        }
    }
    m
}

pub fn spectral_norm(a: &Array2<C64>) -> f64 {
    let d = a.nrows();
    let m = nalgebra::DMatrix::from_fn(d, a.ncols(), |i, j| a[[i, j]]);
    m.singular_values().iter().fold(0.0_f64, |acc, &s| acc.max(s))
}

/// Eigenvalues of a Hermitian matrix in ascending order.
pub fn hermitian_eigenvalues(a: &Array2<C64>) -> Vec<f64> {
    let d = a.nrows();
    let m = nalgebra::DMatrix::from_fn(d, d, |i, j| 0.5 * (a[[i, j]] + a[[j, i]].conj()));
    let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Matrix exponential by scaling and squaring of a Taylor series.
pub fn expm(a: &Array2<C64>) -> Array2<C64> {
    let d = a.nrows();
    let norm = a.iter().map(|x| x.norm()).sum::<f64>();
    let mut squarings = 0;
    let mut scale = 1.0;
    while norm * scale > 0.25 {
        scale *= 0.5;
        squarings += 1;
    }
    let a = a.mapv(|x| x * scale);
    let mut result = Array2::<C64>::eye(d);
    let mut term = Array2::<C64>::eye(d);
    for k in 1..=24 {
        term = term.dot(&a).mapv(|x| x / k as f64);
        result = result + &term;
    }
    for _ in 0..squarings {
        result = result.dot(&result);
    }
    result
}

/// Compressed sparse row operator on `3^n_atoms` states.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    n_atoms: usize,
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl SparseOperator {
    /// Duplicate entries are summed; exact zeros are dropped.
    pub fn from_triplets(n_atoms: usize, mut triplets: Vec<(usize, usize, C64)>) -> Self {
        let dim = dim_for(n_atoms);
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut merged: Vec<(usize, usize, C64)> = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        merged.retain(|t| t.2 != ZERO);
        let mut row_ptr = vec![0; dim + 1];
        for &(r, _, _) in &merged {
            row_ptr[r + 1] += 1;
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        let cols = merged.iter().map(|t| t.1).collect();
        let vals = merged.iter().map(|t| t.2).collect();
        Self { n_atoms, dim, row_ptr, cols, vals }
    }

    pub fn zeros(n_atoms: usize) -> Self {
        Self::from_triplets(n_atoms, Vec::new())
    }

    pub fn identity(n_atoms: usize) -> Self {
        let d = dim_for(n_atoms);
        Self::from_triplets(n_atoms, (0..d).map(|i| (i, i, ONE)).collect())
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn is_zero(&self) -> bool {
        self.vals.is_empty()
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.cols[k], self.vals[k]))
        })
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        let range = self.row_ptr[row]..self.row_ptr[row + 1];
        match self.cols[range.clone()].binary_search(&col) {
            Ok(k) => self.vals[range.start + k],
            Err(_) => ZERO,
        }
    }

    pub fn to_dense(&self) -> Operator {
        let mut op = Operator::zeros(self.n_atoms);
        for (r, c, v) in self.triplets() {
            op.data[[r, c]] = v;
        }
        op
    }

    pub fn adjoint(&self) -> SparseOperator {
        Self::from_triplets(self.n_atoms, self.triplets().map(|(r, c, v)| (c, r, v.conj())).collect())
    }

    pub fn scale(&self, c: C64) -> SparseOperator {
        Self::from_triplets(self.n_atoms, self.triplets().map(|(r, col, v)| (r, col, v * c)).collect())
    }

    pub fn add(&self, other: &SparseOperator) -> Result<SparseOperator> {
        if self.dim != other.dim {
            return Err(Error::DimMismatch(self.dim, other.dim));
        }
        Ok(Self::from_triplets(self.n_atoms, self.triplets().chain(other.triplets()).collect()))
    }

    pub fn matmul(&self, other: &SparseOperator) -> Result<SparseOperator> {
        if self.dim != other.dim {
            return Err(Error::DimMismatch(self.dim, other.dim));
        }
        let mut triplets = Vec::new();
        for (r, k, a) in self.triplets() {
            for idx in other.row_ptr[k]..other.row_ptr[k + 1] {
                triplets.push((r, other.cols[idx], a * other.vals[idx]));
            }
        }
        Ok(Self::from_triplets(self.n_atoms, triplets))
    }

    pub fn apply(&self, v: &Array1<C64>) -> Result<Array1<C64>> {
        if v.len() != self.dim {
            return Err(Error::DimMismatch(self.dim, v.len()));
        }
        let mut out = Array1::zeros(self.dim);
        for (r, c, a) in self.triplets() {
            out[r] += a * v[c];
        }
        Ok(out)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.triplets().all(|(r, c, v)| (v - self.get(c, r).conj()).norm() <= tol)
            && self.adjoint().triplets().all(|(r, c, v)| (v - self.get(r, c)).norm() <= tol)
    }
}

fn check_site(site: usize, n_atoms: usize) -> Result<()> {
    if site >= n_atoms {
        return Err(Error::SiteOutOfRange { site, n_atoms });
    }
    Ok(())
}

/// `I ⊗ … ⊗ |bra⟩⟨ket| ⊗ … ⊗ I` with the local factor at `site`.
pub fn embed_single(site: usize, bra: Level, ket: Level, n_atoms: usize) -> Result<SparseOperator> {
    check_site(site, n_atoms)?;
    let dim = dim_for(n_atoms);
    let triplets = (0..dim)
        .filter(|&i| level_at(i, site, n_atoms) == ket)
        .map(|i| {
            let shift = 3usize.pow((n_atoms - 1 - site) as u32);
            let row = i - ket.index() * shift + bra.index() * shift;
            (row, i, ONE)
        })
        .collect();
    Ok(SparseOperator::from_triplets(n_atoms, triplets))
}

/// Embeds a 9×9 two-site operator at `(site_a, site_b)`, identity elsewhere.
///
/// The local operator is indexed as `3·level_a + level_b`.
pub fn embed_pair(site_a: usize, site_b: usize, local: &Array2<C64>, n_atoms: usize) -> Result<SparseOperator> {
    check_site(site_a, n_atoms)?;
    check_site(site_b, n_atoms)?;
    if site_a == site_b {
        return Err(Error::OverlappingSites(site_a));
    }
    if local.dim() != (9, 9) {
        return Err(Error::DimMismatch(local.nrows(), 9));
    }
    let dim = dim_for(n_atoms);
    let sa = 3usize.pow((n_atoms - 1 - site_a) as u32);
    let sb = 3usize.pow((n_atoms - 1 - site_b) as u32);
    let mut triplets = Vec::new();
    for i in 0..dim {
        let la = level_at(i, site_a, n_atoms).index();
        let lb = level_at(i, site_b, n_atoms).index();
        let base = i - la * sa - lb * sb;
        let col_local = 3 * la + lb;
        for row_local in 0..9 {
            let v = local[[row_local, col_local]];
            if v != ZERO {
                let row = base + (row_local / 3) * sa + (row_local % 3) * sb;
                triplets.push((row, i, v));
            }
        }
    }
    Ok(SparseOperator::from_triplets(n_atoms, triplets))
}

/// Local 9×9 projector `|rr⟩⟨rr|`.
pub fn local_rr_projector() -> Array2<C64> {
    let mut m = Array2::zeros((9, 9));
    m[[8, 8]] = ONE;
    m
}

/// `Σ_k |rr⟩_{k,k+1}⟨rr|` over a nearest-neighbour chain.
pub fn chain_rr_projector_sum(n_atoms: usize) -> SparseOperator {
    let dim = dim_for(n_atoms);
    let triplets = (0..dim)
        .filter_map(|i| {
            let n = adjacent_rydberg_pairs(i, n_atoms);
            (n > 0).then(|| (i, i, C64::new(n as f64, 0.0)))
        })
        .collect();
    SparseOperator::from_triplets(n_atoms, triplets)
}

pub fn commutator(a: &Operator, b: &Operator) -> Result<Operator> {
    a.matmul(b)?.sub(&b.matmul(a)?)
}

pub fn expectation(state: &DensityMatrix, obs: &Operator) -> Result<C64> {
    let rho = state.operator();
    if rho.dim() != obs.dim() {
        return Err(Error::DimMismatch(rho.dim(), obs.dim()));
    }
    let d = rho.dim();
    let mut acc = ZERO;
    for i in 0..d {
        for j in 0..d {
            acc += rho.data[[i, j]] * obs.data[[j, i]];
        }
    }
    Ok(acc)
}

pub fn expectation_sparse(state: &DensityMatrix, obs: &SparseOperator) -> Result<C64> {
    let rho = state.operator();
    if rho.dim() != obs.dim() {
        return Err(Error::DimMismatch(rho.dim(), obs.dim()));
    }
    Ok(obs.triplets().map(|(r, c, v)| rho.data[[c, r]] * v).sum())
}

pub const HERMITICITY_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-8;
pub const POSITIVITY_TOL: f64 = 1e-7;

/// Hermitian, unit-trace operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    op: Operator,
}

impl DensityMatrix {
    /// Validates Hermiticity and trace; positivity is checked separately
    /// by [`DensityMatrix::min_eigenvalue`].
    pub fn new(op: Operator) -> Result<Self> {
        let herm = op.hermiticity_defect();
        if herm > HERMITICITY_TOL {
            return Err(Error::InvalidState(format!("hermiticity defect {herm:e}")));
        }
        let tr = op.trace();
        if (tr - ONE).norm() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr}")));
        }
        Ok(Self { op })
    }

    pub fn pure(psi: &Array1<C64>) -> Result<Self> {
        Self::new(Operator::outer(psi, psi)?)
    }

    pub fn basis(label: &BasisLabel) -> Self {
        Self { op: Operator::projector(label) }
    }

    pub fn maximally_mixed(n_atoms: usize) -> Self {
        let d = dim_for(n_atoms) as f64;
        Self { op: Operator::identity(n_atoms).scale(C64::new(1.0 / d, 0.0)) }
    }

    pub fn operator(&self) -> &Operator {
        &self.op
    }

    pub fn n_atoms(&self) -> usize {
        self.op.n_atoms
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn element(&self, row: usize, col: usize) -> C64 {
        self.op.get(row, col)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eigenvalues(self.op.array())[0]
    }

    pub fn check_positive(&self) -> Result<()> {
        let m = self.min_eigenvalue();
        if m < -POSITIVITY_TOL {
            return Err(Error::InvalidState(format!("eigenvalue {m:e} below tolerance")));
        }
        Ok(())
    }
}

/// Ordered set of basis states carrying all of a problem's dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    n_atoms: usize,
    states: Vec<usize>,
    lookup: HashMap<usize, usize>,
}

impl Subspace {
    pub fn new(n_atoms: usize, mut states: Vec<usize>) -> Self {
        states.sort_unstable();
        states.dedup();
        let lookup = states.iter().enumerate().map(|(k, &s)| (s, k)).collect();
        Self { n_atoms, states, lookup }
    }

    pub fn full(n_atoms: usize) -> Self {
        Self::new(n_atoms, (0..dim_for(n_atoms)).collect())
    }

    /// Smallest set containing `seed` closed under the nonzero patterns of `ops`.
    pub fn closure<'a>(n_atoms: usize, seed: &[usize], ops: impl IntoIterator<Item = &'a SparseOperator>) -> Self {
        let dim = dim_for(n_atoms);
        let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); dim];
        for op in ops {
            for (r, c, _) in op.triplets() {
                adjacency[c].push(r);
            }
        }
        let mut seen = vec![false; dim];
        let mut stack: Vec<usize> = seed.to_vec();
        for &s in seed {
            seen[s] = true;
        }
        while let Some(s) = stack.pop() {
            for &t in &adjacency[s] {
                if !seen[t] {
                    seen[t] = true;
                    stack.push(t);
                }
            }
        }
        Self::new(n_atoms, (0..dim).filter(|&i| seen[i]).collect())
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[usize] {
        &self.states
    }

    pub fn position(&self, full_index: usize) -> Option<usize> {
        self.lookup.get(&full_index).copied()
    }

    /// Restricts `op` to the subspace as `(row, col, value)` in local indices.
    ///
    /// Entries leaving the subspace are dropped; for a closed subspace there are none.
    pub fn restrict(&self, op: &SparseOperator) -> Vec<(usize, usize, C64)> {
        op.triplets()
            .filter_map(|(r, c, v)| Some((self.position(r)?, self.position(c)?, v)))
            .collect()
    }
}

/// Density matrix stored on a [`Subspace`]; entries outside are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedDensity {
    pub subspace: Subspace,
    pub rho: Array2<C64>,
}

impl ReducedDensity {
    pub fn from_pure(subspace: Subspace, psi_full: &Array1<C64>) -> Result<Self> {
        let d = subspace.len();
        let local: Vec<C64> = subspace.states().iter().map(|&s| psi_full[s]).collect();
        let norm: f64 = psi_full.iter().map(|x| x.norm_sqr()).sum();
        let kept: f64 = local.iter().map(|x| x.norm_sqr()).sum();
        if (kept - norm).abs() > 1e-12 {
            return Err(Error::InvalidState("initial state leaves the subspace".into()));
        }
        let rho = Array2::from_shape_fn((d, d), |(i, j)| local[i] * local[j].conj());
        Ok(Self { subspace, rho })
    }

    pub fn element(&self, row: usize, col: usize) -> C64 {
        match (self.subspace.position(row), self.subspace.position(col)) {
            (Some(i), Some(j)) => self.rho[[i, j]],
            _ => ZERO,
        }
    }

    pub fn population(&self, index: usize) -> f64 {
        self.element(index, index).re.abs()
    }

    pub fn trace(&self) -> C64 {
        self.rho.diag().sum()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        hermiticity_defect(&self.rho)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eigenvalues(&self.rho)[0]
    }

    pub fn to_dense(&self) -> Operator {
        let mut op = Operator::zeros(self.subspace.n_atoms());
        for (i, &a) in self.subspace.states().iter().enumerate() {
            for (j, &b) in self.subspace.states().iter().enumerate() {
                op.data[[a, b]] = self.rho[[i, j]];
            }
        }
        op
    }

    pub fn to_density_matrix(&self) -> Result<DensityMatrix> {
        DensityMatrix::new(self.to_dense())
    }
}

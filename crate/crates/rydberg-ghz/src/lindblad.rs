//! Lindblad master-equation integrator for time-dependent Hamiltonians.
//!
//! States live on the closure of the initial support under every Hamiltonian
//! term and jump operator, stored as a dense matrix in local indices.

use std::sync::Arc;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::TermHamiltonian;
use crate::noise::Channel;
use crate::tensor::{dim_for, DensityMatrix, Operator, ReducedDensity, SparseOperator, Subspace, C64, I, ZERO};

pub type Metric = Arc<dyn Fn(&ReducedDensity) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum Observable {
    /// Real part of `Tr(ρ·A)`.
    Expectation(SparseOperator),
    Metric(Metric),
}

#[derive(Clone)]
pub struct NamedObservable {
    pub name: String,
    pub observable: Observable,
}

impl NamedObservable {
    pub fn expectation(name: impl Into<String>, op: SparseOperator) -> Self {
        Self { name: name.into(), observable: Observable::Expectation(op) }
    }

    pub fn metric(name: impl Into<String>, f: impl Fn(&ReducedDensity) -> f64 + Send + Sync + 'static) -> Self {
        Self { name: name.into(), observable: Observable::Metric(Arc::new(f)) }
    }
}

#[derive(Debug, Clone)]
pub enum InitialState {
    Pure(Array1<C64>),
    Mixed(DensityMatrix),
    Reduced(ReducedDensity),
}

#[derive(Clone)]
pub struct EvolutionProblem {
    pub hamiltonian: TermHamiltonian,
    pub channels: Vec<Channel>,
    pub initial: InitialState,
    pub t_span: (f64, f64),
    /// Times where the generator may jump; the integrator lands on them exactly.
    pub breakpoints: Vec<f64>,
    pub observables: Vec<NamedObservable>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Method {
    Rk4 { step: f64 },
    /// Dormand–Prince 5(4) with mixed absolute/relative tolerance.
    Adaptive { tol: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub method: Method,
    /// Uniform output grid over the span, breakpoints are added to it.
    pub output_points: usize,
}

impl IntegratorConfig {
    pub fn rk4(step: f64, output_points: usize) -> Self {
        Self { method: Method::Rk4 { step }, output_points }
    }

    pub fn adaptive(tol: f64, output_points: usize) -> Self {
        Self { method: Method::Adaptive { tol }, output_points }
    }

    pub fn validate(&self) -> Result<()> {
        match self.method {
            Method::Rk4 { step } if !(step > 0.0 && step.is_finite()) => {
                return Err(Error::InvalidParameter(format!("step must be positive, got {step}")))
            }
            Method::Adaptive { tol } if !(tol > 0.0 && tol <= 1e-3) => {
                return Err(Error::InvalidParameter(format!("tolerance must lie in (0, 1e-3], got {tol}")))
            }
            _ => {}
        }
        if self.output_points < 2 {
            return Err(Error::InvalidParameter("need at least two output points".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub max_trace_drift: f64,
    pub max_hermiticity_defect: f64,
    pub min_eigenvalue: f64,
    pub steps: usize,
    pub rejected_steps: usize,
    pub rhs_evaluations: usize,
    pub subspace_dim: usize,
    pub full_dim: usize,
}

#[derive(Debug, Clone)]
pub struct Evolution {
    pub times: Vec<f64>,
    pub series: Vec<(String, Vec<f64>)>,
    pub final_state: ReducedDensity,
    pub diagnostics: Diagnostics,
}

impl Evolution {
    pub fn series(&self, name: &str) -> Option<&[f64]> {
        self.series.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    /// Value of `name` at the output time closest to `t`.
    pub fn value_at(&self, name: &str, t: f64) -> Option<f64> {
        let s = self.series(name)?;
        let k = self
            .times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))?
            .0;
        Some(s[k])
    }
}

#[derive(Debug, Clone)]
pub struct ClosedTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<Array1<C64>>,
    pub max_norm_drift: f64,
    pub steps: usize,
}

/// `−i[H, ρ] + Σ rate·(2oρo† − o†oρ − ρo†o)` on full dense matrices.
pub fn lindblad_rhs(h: &Operator, channels: &[Channel], rho: &Operator) -> Result<Operator> {
    if h.dim() != rho.dim() {
        return Err(Error::DimMismatch(h.dim(), rho.dim()));
    }
    let hr = h.matmul(rho)?;
    let rh = rho.matmul(h)?;
    let mut out = hr.sub(&rh)?.scale(-I);
    for ch in channels {
        if ch.op.dim() != rho.dim() {
            return Err(Error::DimMismatch(ch.op.dim(), rho.dim()));
        }
        let o = ch.op.to_dense();
        let od = o.adjoint();
        let odo = od.matmul(&o)?;
        let jump = o.matmul(rho)?.matmul(&od)?.scale(C64::new(2.0, 0.0));
        let anti = odo.matmul(rho)?.add(&rho.matmul(&odo)?)?;
        out = out.add(&jump.sub(&anti)?.scale(C64::new(ch.rate, 0.0)))?;
    }
    Ok(out)
}

type Triplets = Vec<(usize, usize, C64)>;

/// Generator restricted to a closed subspace, acting on row-major flat storage.
struct ReducedGenerator {
    d: usize,
    hamiltonian: TermHamiltonian,
    terms: Vec<Triplets>,
    /// `−i·Σ rate·o†o`, the anti-Hermitian part of the effective Hamiltonian.
    damping: Triplets,
    jumps: Vec<(f64, Triplets)>,
    /// Right end of the current segment; coefficients are taken as left limits there.
    segment_end: std::cell::Cell<f64>,
}

fn left_limit(t: f64, end: f64) -> f64 {
    if t >= end {
        end.next_down()
    } else {
        t
    }
}

impl ReducedGenerator {
    fn new(subspace: &Subspace, hamiltonian: &TermHamiltonian, channels: &[Channel]) -> Result<Self> {
        let terms = hamiltonian.terms().iter().map(|t| subspace.restrict(&t.op)).collect();
        let mut damping = SparseOperator::zeros(subspace.n_atoms());
        let mut jumps = Vec::new();
        for ch in channels {
            let odo = ch.op.adjoint().matmul(&ch.op)?;
            damping = damping.add(&odo.scale(C64::new(0.0, -ch.rate)))?;
            jumps.push((2.0 * ch.rate, subspace.restrict(&ch.op)));
        }
        Ok(Self {
            d: subspace.len(),
            hamiltonian: hamiltonian.clone(),
            terms,
            damping: subspace.restrict(&damping),
            jumps,
            segment_end: std::cell::Cell::new(f64::INFINITY),
        })
    }

    fn coefficients(&self, t: f64) -> Vec<C64> {
        let t = left_limit(t, self.segment_end.get());
        self.hamiltonian.terms().iter().map(|term| (term.coeff)(t)).collect()
    }

    /// Adds `−i(Gρ − ρG†)` for one sparse piece `G` given as `(row, col, value)`.
    #[inline]
    fn commutator_piece(d: usize, r: usize, c: usize, v: C64, rho: &[C64], out: &mut [C64]) {
        let w = -I * v;
        let row_out = r * d;
        let row_in = c * d;
        for b in 0..d {
            out[row_out + b] += w * rho[row_in + b];
        }
        let wc = I * v.conj();
        for a in 0..d {
            out[a * d + r] += wc * rho[a * d + c];
        }
    }

    fn rhs(&self, t: f64, rho: &[C64], out: &mut [C64]) {
        let d = self.d;
        out.fill(ZERO);
        let coeffs = self.coefficients(t);
        for (k, trip) in self.terms.iter().enumerate() {
            let c = coeffs[k];
            if c == ZERO {
                continue;
            }
            for &(r, col, v) in trip {
                Self::commutator_piece(d, r, col, c * v, rho, out);
            }
        }
        for &(r, col, v) in &self.damping {
            Self::commutator_piece(d, r, col, v, rho, out);
        }
        for (rate, o) in &self.jumps {
            for &(a, c1, v1) in o {
                for &(b, c2, v2) in o {
                    out[a * d + b] += *rate * v1 * v2.conj() * rho[c1 * d + c2];
                }
            }
        }
    }
}

/// `−iHψ` on a subspace.
struct ClosedGenerator {
    hamiltonian: TermHamiltonian,
    terms: Vec<Triplets>,
    segment_end: std::cell::Cell<f64>,
}

impl ClosedGenerator {
    fn rhs(&self, t: f64, psi: &[C64], out: &mut [C64]) {
        out.fill(ZERO);
        let t = left_limit(t, self.segment_end.get());
        for (term, trip) in self.hamiltonian.terms().iter().zip(&self.terms) {
            let c = (term.coeff)(t);
            if c == ZERO {
                continue;
            }
            for &(r, col, v) in trip {
                out[r] += -I * c * v * psi[col];
            }
        }
    }
}

trait System {
    fn eval(&self, t: f64, y: &[C64], out: &mut [C64]);
    fn set_segment_end(&self, t: f64);
}

impl System for ReducedGenerator {
    fn eval(&self, t: f64, y: &[C64], out: &mut [C64]) {
        self.rhs(t, y, out)
    }
    fn set_segment_end(&self, t: f64) {
        self.segment_end.set(t)
    }
}

impl System for ClosedGenerator {
    fn eval(&self, t: f64, y: &[C64], out: &mut [C64]) {
        self.rhs(t, y, out)
    }
    fn set_segment_end(&self, t: f64) {
        self.segment_end.set(t)
    }
}

#[derive(Default)]
struct Counters {
    steps: usize,
    rejected: usize,
    evals: usize,
}

fn axpy(out: &mut [C64], base: &[C64], terms: &[(f64, &[C64])], h: f64) {
    for i in 0..out.len() {
        let mut acc = ZERO;
        for (w, k) in terms {
            acc += k[i] * *w;
        }
        out[i] = base[i] + acc * h;
    }
}

fn rk4_step(sys: &dyn System, t: f64, h: f64, y: &mut [C64], work: &mut [Vec<C64>; 5], n: &mut Counters) {
    let [k1, k2, k3, k4, tmp] = work;
    sys.eval(t, y, k1);
    axpy(tmp, y, &[(0.5, k1.as_slice())], h);
    sys.eval(t + 0.5 * h, tmp, k2);
    axpy(tmp, y, &[(0.5, k2.as_slice())], h);
    sys.eval(t + 0.5 * h, tmp, k3);
    axpy(tmp, y, &[(1.0, k3.as_slice())], h);
    sys.eval(t + h, tmp, k4);
    for i in 0..y.len() {
        y[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0);
    }
    n.steps += 1;
    n.evals += 4;
}

// Dormand–Prince 5(4) tableau.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
/// Fifth-order weights minus the embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

struct Dopri {
    tol: f64,
    h: f64,
    k: [Vec<C64>; 7],
    tmp: Vec<C64>,
    fresh: bool,
}

impl Dopri {
    fn new(dim: usize, tol: f64, h0: f64) -> Self {
        Self { tol, h: h0, k: std::array::from_fn(|_| vec![ZERO; dim]), tmp: vec![ZERO; dim], fresh: true }
    }

    /// Advances `y` from `t` to exactly `t_end`.
    fn advance(&mut self, sys: &dyn System, mut t: f64, t_end: f64, y: &mut [C64], n: &mut Counters) -> Result<()> {
        let span = t_end - t;
        if span <= 0.0 {
            return Ok(());
        }
        // Segment ends can be discontinuities, so the FSAL stage is recomputed.
        self.fresh = true;
        let min_h = 1e-14 * t_end.abs().max(span);
        while t < t_end {
            let last = t + self.h >= t_end;
            let h = if last { t_end - t } else { self.h };
            if self.fresh {
                let (k0, _) = self.k.split_at_mut(1);
                sys.eval(t, y, &mut k0[0]);
                n.evals += 1;
                self.fresh = false;
            }
            for s in 0..6 {
                for i in 0..y.len() {
                    let mut acc = ZERO;
                    for j in 0..=s {
                        if A[s][j] != 0.0 {
                            acc += self.k[j][i] * A[s][j];
                        }
                    }
                    self.tmp[i] = y[i] + acc * h;
                }
                let (_, rest) = self.k.split_at_mut(s + 1);
                sys.eval(t + C[s] * h, &self.tmp, &mut rest[0]);
                n.evals += 1;
            }
            let mut err: f64 = 0.0;
            for i in 0..y.len() {
                let mut e = ZERO;
                for (j, w) in E.iter().enumerate() {
                    if *w != 0.0 {
                        e += self.k[j][i] * *w;
                    }
                }
                let scale = self.tol * (1.0 + y[i].norm().max(self.tmp[i].norm()));
                err = err.max((e * h).norm() / scale);
            }
            if !err.is_finite() {
                return Err(Error::NonFinite(format!("adaptive step at t = {t:e}")));
            }
            if err <= 1.0 {
                t = if last { t_end } else { t + h };
                y.copy_from_slice(&self.tmp);
                self.k.swap(0, 6);
                n.steps += 1;
                let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if !last {
                    self.h = h * grow;
                }
            } else {
                n.rejected += 1;
                self.h = h * (0.9 * err.powf(-0.2)).max(0.2);
                if self.h < min_h {
                    return Err(Error::StepUnderflow { t });
                }
            }
        }
        Ok(())
    }
}

/// Sorted union of the uniform output grid and the interior breakpoints.
fn knots(t_span: (f64, f64), breakpoints: &[f64], points: usize) -> Vec<(f64, bool)> {
    let (t0, t1) = t_span;
    let mut ks: Vec<(f64, bool)> = (0..points)
        .map(|k| {
            if k + 1 == points {
                (t1, true)
            } else {
                (t0 + (t1 - t0) * k as f64 / (points - 1) as f64, true)
            }
        })
        .collect();
    for &b in breakpoints {
        if b > t0 && b < t1 {
            ks.push((b, true));
        }
    }
    ks.sort_by(|a, b| a.0.total_cmp(&b.0));
    // A breakpoint within rounding of a grid time replaces it so segments end on the exact breakpoint.
    let tiny = 1e-12 * (t1 - t0);
    let mut out: Vec<(f64, bool)> = Vec::with_capacity(ks.len());
    for k in ks {
        match out.last_mut() {
            Some(last) if (k.0 - last.0).abs() <= tiny => {
                if breakpoints.contains(&k.0) {
                    last.0 = k.0;
                }
            }
            _ => out.push(k),
        }
    }
    out
}

fn integrate(
    sys: &dyn System,
    y: &mut Vec<C64>,
    t_span: (f64, f64),
    breakpoints: &[f64],
    config: &IntegratorConfig,
    mut record: impl FnMut(f64, &[C64]) -> Result<()>,
) -> Result<Counters> {
    config.validate()?;
    let (t0, t1) = t_span;
    if !(t1 > t0) {
        return Err(Error::InvalidParameter(format!("empty time span [{t0}, {t1}]")));
    }
    let ks = knots(t_span, breakpoints, config.output_points);
    let mut n = Counters::default();
    let dim = y.len();
    let mut rk_work: [Vec<C64>; 5] = std::array::from_fn(|_| vec![ZERO; dim]);
    let mut dopri = match config.method {
        Method::Adaptive { tol } => Some(Dopri::new(dim, tol, (t1 - t0) * 1e-4)),
        Method::Rk4 { .. } => None,
    };
    record(ks[0].0, y)?;
    for w in ks.windows(2) {
        let (a, b) = (w[0].0, w[1].0);
        sys.set_segment_end(b);
        match config.method {
            Method::Rk4 { step } => {
                let m = ((b - a) / step - 1e-9).ceil().max(1.0) as usize;
                let h = (b - a) / m as f64;
                for j in 0..m {
                    rk4_step(sys, a + j as f64 * h, h, y, &mut rk_work, &mut n);
                }
            }
            Method::Adaptive { .. } => {
                dopri.as_mut().expect("adaptive state").advance(sys, a, b, y, &mut n)?;
            }
        }
        if y.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
            return Err(Error::NonFinite(format!("state at t = {b:e}")));
        }
        if w[1].1 {
            record(b, y)?;
        }
    }
    Ok(n)
}

fn closure_ops(h: &TermHamiltonian, channels: &[Channel]) -> Result<Vec<SparseOperator>> {
    let mut ops = Vec::new();
    for t in h.terms() {
        ops.push(t.op.clone());
        ops.push(t.op.adjoint());
    }
    for ch in channels {
        ops.push(ch.op.clone());
        ops.push(ch.op.adjoint().matmul(&ch.op)?);
    }
    Ok(ops)
}

fn reduce_initial(problem: &EvolutionProblem, ops: &[SparseOperator]) -> Result<ReducedDensity> {
    let n = problem.hamiltonian.n_atoms();
    let check = |d: usize| {
        if d != dim_for(n) {
            Err(Error::DimMismatch(d, dim_for(n)))
        } else {
            Ok(())
        }
    };
    match &problem.initial {
        InitialState::Pure(psi) => {
            check(psi.len())?;
            let norm: f64 = psi.iter().map(|x| x.norm_sqr()).sum();
            if (norm - 1.0).abs() > 1e-10 {
                return Err(Error::InvalidState(format!("initial state norm {norm}")));
            }
            let seed: Vec<usize> = (0..psi.len()).filter(|&i| psi[i] != ZERO).collect();
            ReducedDensity::from_pure(Subspace::closure(n, &seed, ops), psi)
        }
        InitialState::Mixed(dm) => {
            check(dm.dim())?;
            let a = dm.operator().array();
            let seed: Vec<usize> = (0..dm.dim()).filter(|&i| a.row(i).iter().any(|x| *x != ZERO)).collect();
            let sub = Subspace::closure(n, &seed, ops);
            let s = sub.states().to_vec();
            let rho = Array2::from_shape_fn((s.len(), s.len()), |(i, j)| a[[s[i], s[j]]]);
            Ok(ReducedDensity { subspace: sub, rho })
        }
        InitialState::Reduced(r) => {
            if r.subspace.n_atoms() != n {
                return Err(Error::DimMismatch(dim_for(r.subspace.n_atoms()), dim_for(n)));
            }
            let seed: Vec<usize> = r.subspace.states().to_vec();
            let sub = Subspace::closure(n, &seed, ops);
            let s = sub.states().to_vec();
            let rho = Array2::from_shape_fn((s.len(), s.len()), |(i, j)| r.element(s[i], s[j]));
            Ok(ReducedDensity { subspace: sub, rho })
        }
    }
}

fn expectation_reduced(state: &ReducedDensity, op: &SparseOperator) -> f64 {
    op.triplets().map(|(r, c, v)| v * state.element(c, r)).sum::<C64>().re
}

pub fn evolve(problem: &EvolutionProblem, config: &IntegratorConfig) -> Result<Evolution> {
    let n = problem.hamiltonian.n_atoms();
    for ch in &problem.channels {
        if ch.op.n_atoms() != n {
            return Err(Error::DimMismatch(ch.op.dim(), dim_for(n)));
        }
    }
    for obs in &problem.observables {
        if let Observable::Expectation(op) = &obs.observable {
            if op.n_atoms() != n {
                return Err(Error::DimMismatch(op.dim(), dim_for(n)));
            }
        }
    }
    let ops = closure_ops(&problem.hamiltonian, &problem.channels)?;
    let initial = reduce_initial(problem, &ops)?;
    let subspace = initial.subspace.clone();
    let d = subspace.len();
    let gen = ReducedGenerator::new(&subspace, &problem.hamiltonian, &problem.channels)?;
    let mut y: Vec<C64> = initial.rho.iter().copied().collect();
    let trace0 = initial.trace().re;

    let mut times = Vec::new();
    let mut series: Vec<(String, Vec<f64>)> = problem.observables.iter().map(|o| (o.name.clone(), Vec::new())).collect();
    let mut diag = Diagnostics { min_eigenvalue: f64::INFINITY, subspace_dim: d, full_dim: dim_for(n), ..Default::default() };
    let counters = integrate(&gen, &mut y, problem.t_span, &problem.breakpoints, config, |t, flat| {
        let rho = Array2::from_shape_vec((d, d), flat.to_vec()).expect("square state");
        let state = ReducedDensity { subspace: subspace.clone(), rho };
        diag.max_trace_drift = diag.max_trace_drift.max((state.trace().re - trace0).abs());
        diag.max_hermiticity_defect = diag.max_hermiticity_defect.max(state.hermiticity_defect());
        diag.min_eigenvalue = diag.min_eigenvalue.min(state.min_eigenvalue());
        times.push(t);
        for (obs, (_, values)) in problem.observables.iter().zip(series.iter_mut()) {
            values.push(match &obs.observable {
                Observable::Expectation(op) => expectation_reduced(&state, op),
                Observable::Metric(f) => f(&state),
            });
        }
        Ok(())
    })?;
    diag.steps = counters.steps;
    diag.rejected_steps = counters.rejected;
    diag.rhs_evaluations = counters.evals;
    let rho = Array2::from_shape_vec((d, d), y).expect("square state");
    Ok(Evolution { times, series, final_state: ReducedDensity { subspace, rho }, diagnostics: diag })
}

/// Schrödinger evolution of a pure state; states are returned in the full basis.
pub fn evolve_closed(
    h: &TermHamiltonian,
    psi0: &Array1<C64>,
    t_span: (f64, f64),
    breakpoints: &[f64],
    config: &IntegratorConfig,
) -> Result<ClosedTrajectory> {
    let n = h.n_atoms();
    if psi0.len() != dim_for(n) {
        return Err(Error::DimMismatch(psi0.len(), dim_for(n)));
    }
    let norm0: f64 = psi0.iter().map(|x| x.norm_sqr()).sum::<f64>();
    if (norm0 - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidState(format!("initial state norm {norm0}")));
    }
    let ops = closure_ops(h, &[])?;
    let seed: Vec<usize> = (0..psi0.len()).filter(|&i| psi0[i] != ZERO).collect();
    let sub = Subspace::closure(n, &seed, &ops);
    let gen = ClosedGenerator {
        hamiltonian: h.clone(),
        terms: h.terms().iter().map(|t| sub.restrict(&t.op)).collect(),
        segment_end: std::cell::Cell::new(f64::INFINITY),
    };
    let mut y: Vec<C64> = sub.states().iter().map(|&s| psi0[s]).collect();
    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut drift: f64 = 0.0;
    let counters = integrate(&gen, &mut y, t_span, breakpoints, config, |t, v| {
        let norm: f64 = v.iter().map(|x| x.norm_sqr()).sum();
        drift = drift.max((norm.sqrt() - 1.0).abs());
        let mut full = Array1::zeros(psi0.len());
        for (k, &s) in sub.states().iter().enumerate() {
            full[s] = v[k];
        }
        times.push(t);
        states.push(full);
        Ok(())
    })?;
    Ok(ClosedTrajectory { times, states, max_norm_drift: drift, steps: counters.steps })
}

/// `|⟨a|b⟩|²`.
pub fn state_fidelity(a: &Array1<C64>, b: &Array1<C64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum::<C64>().norm_sqr()
}

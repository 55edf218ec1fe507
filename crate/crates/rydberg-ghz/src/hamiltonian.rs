//! Time-dependent operators written as `H(t) = Σ_i c_i(t)·A_i`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::tensor::{Operator, SparseOperator, C64, ONE};

pub type Coefficient = Arc<dyn Fn(f64) -> C64 + Send + Sync>;

pub fn constant(c: C64) -> Coefficient {
    Arc::new(move |_| c)
}

#[derive(Clone)]
pub struct Term {
    pub op: SparseOperator,
    pub coeff: Coefficient,
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Term").field("nnz", &self.op.nnz()).finish()
    }
}

/// Sum of sparse operators with scalar time dependence.
///
/// Hermiticity is the caller's contract: non-Hermitian pieces go in through
/// [`TermHamiltonian::push_with_adjoint`].
#[derive(Clone, Debug)]
pub struct TermHamiltonian {
    n_atoms: usize,
    terms: Vec<Term>,
}

impl TermHamiltonian {
    pub fn new(n_atoms: usize) -> Self {
        Self { n_atoms, terms: Vec::new() }
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    fn check(&self, op: &SparseOperator) -> Result<()> {
        if op.n_atoms() != self.n_atoms {
            return Err(Error::DimMismatch(op.dim(), crate::tensor::dim_for(self.n_atoms)));
        }
        Ok(())
    }

    pub fn push(&mut self, op: SparseOperator, coeff: Coefficient) -> Result<()> {
        self.check(&op)?;
        if !op.is_zero() {
            self.terms.push(Term { op, coeff });
        }
        Ok(())
    }

    pub fn push_static(&mut self, op: SparseOperator) -> Result<()> {
        self.push(op, constant(ONE))
    }

    /// Adds `c(t)·A + c(t)*·A†`.
    pub fn push_with_adjoint(&mut self, op: SparseOperator, coeff: Coefficient) -> Result<()> {
        let adj = op.adjoint();
        let conj = coeff.clone();
        self.push(op, coeff)?;
        self.push(adj, Arc::new(move |t| conj(t).conj()))
    }

    pub fn extend(&mut self, other: TermHamiltonian) -> Result<()> {
        if other.n_atoms != self.n_atoms {
            return Err(Error::DimMismatch(
                crate::tensor::dim_for(other.n_atoms),
                crate::tensor::dim_for(self.n_atoms),
            ));
        }
        self.terms.extend(other.terms);
        Ok(())
    }

    /// Multiplies every coefficient by `s`.
    pub fn scaled(&self, s: f64) -> TermHamiltonian {
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let c = t.coeff.clone();
                Term { op: t.op.clone(), coeff: Arc::new(move |x| c(x) * s) }
            })
            .collect();
        Self { n_atoms: self.n_atoms, terms }
    }

    pub fn at(&self, t: f64) -> Operator {
        let mut data = Operator::zeros(self.n_atoms).into_array();
        for term in &self.terms {
            let c = (term.coeff)(t);
            if c == C64::new(0.0, 0.0) {
                continue;
            }
            for (r, col, v) in term.op.triplets() {
                data[[r, col]] += c * v;
            }
        }
        Operator::from_array(data).expect("square power-of-three matrix")
    }
}

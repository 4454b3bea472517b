use crate::error::{Error, Result};
use crate::operator::{ComplexMatrix, HermitianOperator};

/// Handle to a variable block of an [`SdpProblem`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlockId(pub usize);

/// Whether a block ranges over complex Hermitian or real symmetric matrices.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockKind {
    Hermitian,
    Symmetric,
}

#[derive(Clone, Debug)]
pub struct Block {
    pub name: String,
    pub dim: usize,
    pub kind: BlockKind,
}

impl Block {
    /// Number of real parameters of the block.
    pub fn params(&self) -> usize {
        match self.kind {
            BlockKind::Hermitian => self.dim * self.dim,
            BlockKind::Symmetric => self.dim * (self.dim + 1) / 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

/// Real linear functional `Σ_b Re tr(C_b X_b)`.
#[derive(Clone, Debug, Default)]
pub struct Functional {
    pub terms: Vec<(BlockId, HermitianOperator)>,
}

impl Functional {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn term(block: BlockId, coeff: HermitianOperator) -> Self {
        Self {
            terms: vec![(block, coeff)],
        }
    }

    pub fn with(mut self, block: BlockId, coeff: HermitianOperator) -> Self {
        self.terms.push((block, coeff));
        self
    }

    pub fn evaluate(&self, values: &[HermitianOperator]) -> f64 {
        self.terms.iter().map(|(b, c)| c.inner(&values[b.0])).sum()
    }
}

#[derive(Clone, Debug)]
pub struct Equality {
    pub functional: Functional,
    pub rhs: f64,
}

/// One linear contribution of a block to an LMI.
#[derive(Clone, Debug)]
pub enum LmiTerm {
    /// `w · L X L†` with `L` of shape `m × d`.
    Congruence {
        block: BlockId,
        map: ComplexMatrix,
        weight: f64,
    },
    /// `L X R† + R X L†` with `L`, `R` of shape `m × d`.
    Coupling {
        block: BlockId,
        left: ComplexMatrix,
        right: ComplexMatrix,
    },
    /// `Re tr(C X) · E` with `E` of shape `m × m`.
    Scalar {
        block: BlockId,
        coeff: HermitianOperator,
        placement: HermitianOperator,
    },
}

impl LmiTerm {
    /// `X` placed with weight one in an LMI of the same size.
    pub fn identity(block: BlockId, dim: usize) -> Self {
        LmiTerm::Congruence {
            block,
            map: ComplexMatrix::identity(dim),
            weight: 1.0,
        }
    }

    pub fn block(&self) -> BlockId {
        match self {
            LmiTerm::Congruence { block, .. }
            | LmiTerm::Coupling { block, .. }
            | LmiTerm::Scalar { block, .. } => *block,
        }
    }

    pub fn apply(&self, x: &HermitianOperator) -> Result<HermitianOperator> {
        match self {
            LmiTerm::Congruence { map, weight, .. } => Ok(x.congruence(map)?.scale(*weight)),
            LmiTerm::Coupling { left, right, .. } => {
                let lxr = left.matmul(x.as_matrix())?.matmul(&right.adjoint())?;
                Ok(HermitianOperator::symmetrized(lxr.add(&lxr.adjoint())?))
            }
            LmiTerm::Scalar {
                coeff, placement, ..
            } => Ok(placement.scale(coeff.inner(x))),
        }
    }
}

/// Constraint `F0 + Σ terms ⪰ 0`.
#[derive(Clone, Debug)]
pub struct Lmi {
    pub name: String,
    pub constant: HermitianOperator,
    pub terms: Vec<LmiTerm>,
}

impl Lmi {
    pub fn new(name: impl Into<String>, constant: HermitianOperator) -> Self {
        Self {
            name: name.into(),
            constant,
            terms: Vec::new(),
        }
    }

    pub fn with(mut self, term: LmiTerm) -> Self {
        self.terms.push(term);
        self
    }

    pub fn dim(&self) -> usize {
        self.constant.dim()
    }

    /// The slack matrix `F0 + Σ terms` at the given block values.
    pub fn evaluate(&self, values: &[HermitianOperator]) -> Result<HermitianOperator> {
        let mut acc = self.constant.clone();
        for t in &self.terms {
            acc = acc.add(&t.apply(&values[t.block().0])?)?;
        }
        Ok(acc)
    }
}

/// Semidefinite program over Hermitian (or real symmetric) matrix blocks.
///
/// Blocks are free variables; positivity enters only through LMIs.
#[derive(Clone, Debug)]
pub struct SdpProblem {
    pub blocks: Vec<Block>,
    pub objective: Functional,
    pub sense: Sense,
    pub equalities: Vec<Equality>,
    pub lmis: Vec<Lmi>,
}

impl SdpProblem {
    pub fn new(sense: Sense) -> Self {
        Self {
            blocks: Vec::new(),
            objective: Functional::new(),
            sense,
            equalities: Vec::new(),
            lmis: Vec::new(),
        }
    }

    pub fn add_block(&mut self, name: impl Into<String>, dim: usize, kind: BlockKind) -> BlockId {
        self.blocks.push(Block {
            name: name.into(),
            dim,
            kind,
        });
        BlockId(self.blocks.len() - 1)
    }

    pub fn set_objective(&mut self, objective: Functional) {
        self.objective = objective;
    }

    pub fn add_equality(&mut self, functional: Functional, rhs: f64) {
        self.equalities.push(Equality { functional, rhs });
    }

    pub fn add_lmi(&mut self, lmi: Lmi) {
        self.lmis.push(lmi);
    }

    /// Adds `X ⪰ 0` for the block.
    pub fn add_psd(&mut self, block: BlockId) {
        let d = self.blocks[block.0].dim;
        let name = format!("{} >= 0", self.blocks[block.0].name);
        self.add_lmi(Lmi::new(name, HermitianOperator::zeros(d)).with(LmiTerm::identity(block, d)));
    }

    pub fn block_dim(&self, b: BlockId) -> usize {
        self.blocks[b.0].dim
    }

    /// Checks dimensional consistency of every coefficient.
    pub fn validate(&self) -> Result<()> {
        if self.blocks.is_empty() {
            return Err(Error::InvalidProblem(
                "problem has no variable blocks".into(),
            ));
        }
        if let Some(b) = self.blocks.iter().find(|b| b.dim == 0) {
            return Err(Error::InvalidProblem(format!(
                "block {} has dimension zero",
                b.name
            )));
        }
        let check_functional = |f: &Functional, what: &str| -> Result<()> {
            for (b, c) in &f.terms {
                let block = self.blocks.get(b.0).ok_or_else(|| {
                    Error::InvalidProblem(format!("{what} refers to unknown block {}", b.0))
                })?;
                if c.dim() != block.dim {
                    return Err(Error::DimensionMismatch(format!(
                        "{what}: coefficient of dimension {} on block {} of dimension {}",
                        c.dim(),
                        block.name,
                        block.dim
                    )));
                }
            }
            Ok(())
        };
        check_functional(&self.objective, "objective")?;
        for (i, e) in self.equalities.iter().enumerate() {
            check_functional(&e.functional, &format!("equality {i}"))?;
            if !e.rhs.is_finite() {
                return Err(Error::InvalidProblem(format!(
                    "equality {i} has non-finite rhs"
                )));
            }
        }
        for lmi in &self.lmis {
            let m = lmi.dim();
            for t in &lmi.terms {
                let block = self.blocks.get(t.block().0).ok_or_else(|| {
                    Error::InvalidProblem(format!("LMI {} refers to unknown block", lmi.name))
                })?;
                let d = block.dim;
                let ok = match t {
                    LmiTerm::Congruence { map, .. } => map.rows() == m && map.cols() == d,
                    LmiTerm::Coupling { left, right, .. } => {
                        left.rows() == m
                            && left.cols() == d
                            && right.rows() == m
                            && right.cols() == d
                    }
                    LmiTerm::Scalar {
                        coeff, placement, ..
                    } => coeff.dim() == d && placement.dim() == m,
                };
                if !ok {
                    return Err(Error::DimensionMismatch(format!(
                        "LMI {} of size {m}: term on block {} (dimension {d}) has wrong shape",
                        lmi.name, block.name
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn objective_value(&self, values: &[HermitianOperator]) -> f64 {
        self.objective.evaluate(values)
    }
}

/// Constraint residuals of a candidate point.
#[derive(Clone, Debug)]
pub struct FeasibilityReport {
    /// `rhs − value` per equality.
    pub equality_residuals: Vec<f64>,
    /// Smallest eigenvalue of each LMI slack.
    pub lmi_min_eigenvalues: Vec<f64>,
    pub worst_equality: f64,
    pub worst_lmi: f64,
    pub feasible: bool,
}

/// Evaluates every constraint at `candidate` without optimizing.
pub fn check_feasible(
    p: &SdpProblem,
    candidate: &[HermitianOperator],
    tol: f64,
) -> Result<FeasibilityReport> {
    p.validate()?;
    if candidate.len() != p.blocks.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} candidate blocks for a problem with {}",
            candidate.len(),
            p.blocks.len()
        )));
    }
    for (b, x) in p.blocks.iter().zip(candidate) {
        if b.dim != x.dim() {
            return Err(Error::DimensionMismatch(format!(
                "block {} has dimension {}, candidate has {}",
                b.name,
                b.dim,
                x.dim()
            )));
        }
    }
    let equality_residuals: Vec<f64> = p
        .equalities
        .iter()
        .map(|e| e.rhs - e.functional.evaluate(candidate))
        .collect();
    let lmi_min_eigenvalues = p
        .lmis
        .iter()
        .map(|l| Ok(l.evaluate(candidate)?.eig_bounds().0))
        .collect::<Result<Vec<f64>>>()?;
    let worst_equality = equality_residuals
        .iter()
        .fold(0.0, |a: f64, r| a.max(r.abs()));
    let worst_lmi = lmi_min_eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let feasible = worst_equality <= tol && (lmi_min_eigenvalues.is_empty() || worst_lmi >= -tol);
    Ok(FeasibilityReport {
        equality_residuals,
        lmi_min_eigenvalues,
        worst_equality,
        worst_lmi,
        feasible,
    })
}

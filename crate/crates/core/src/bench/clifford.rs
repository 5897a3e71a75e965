use std::collections::VecDeque;
use std::f64::consts::FRAC_PI_4;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::qcore::{c, trace, CMatrix};

/// π/2 rotations the Clifford table is built from. `Xm90`, `Ym90` are the
/// same pulse with the phase shifted by π.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Generator {
    X90,
    Y90,
    Xm90,
    Ym90,
}

impl Generator {
    pub const ALL: [Generator; 4] = [Generator::X90, Generator::Y90, Generator::Xm90, Generator::Ym90];

    pub fn index(self) -> usize {
        match self {
            Generator::X90 => 0,
            Generator::Y90 => 1,
            Generator::Xm90 => 2,
            Generator::Ym90 => 3,
        }
    }

    /// `exp(∓i π/4 σ)`.
    pub fn matrix(self) -> CMatrix {
        let (cs, sn) = (FRAC_PI_4.cos(), FRAC_PI_4.sin());
        let (axis_x, sign) = match self {
            Generator::X90 => (true, 1.0),
            Generator::Y90 => (false, 1.0),
            Generator::Xm90 => (true, -1.0),
            Generator::Ym90 => (false, -1.0),
        };
        let s = sign * sn;
        if axis_x {
            CMatrix::from_row_slice(2, 2, &[c(cs, 0.0), c(0.0, -s), c(0.0, -s), c(cs, 0.0)])
        } else {
            CMatrix::from_row_slice(2, 2, &[c(cs, 0.0), c(-s, 0.0), c(s, 0.0), c(cs, 0.0)])
        }
    }
}

/// One single-qubit Clifford with a shortest decomposition; generators are
/// applied in list order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CliffordElement {
    pub index: usize,
    pub decomposition: Vec<Generator>,
    #[serde(skip)]
    pub matrix: CMatrix,
}

/// Equal up to global phase.
pub(crate) fn same_up_to_phase(a: &CMatrix, b: &CMatrix) -> bool {
    let n = a.nrows() as f64;
    (trace(&(a.adjoint() * b)).norm() / n - 1.0).abs() < 1e-9
}

/// Breadth-first search over words in `Generator::ALL` order from the
/// identity; each element keeps the first word that reaches it. The identity
/// has the empty decomposition.
fn build_table() -> Vec<CliffordElement> {
    let gens: Vec<CMatrix> = Generator::ALL.iter().map(|g| g.matrix()).collect();
    let mut table = vec![CliffordElement {
        index: 0,
        decomposition: Vec::new(),
        matrix: CMatrix::identity(2, 2),
    }];
    let mut queue = VecDeque::from([0usize]);
    while let Some(k) = queue.pop_front() {
        for (g, gm) in Generator::ALL.iter().zip(&gens) {
            let m = gm * &table[k].matrix;
            if table.iter().any(|e| same_up_to_phase(&e.matrix, &m)) {
                continue;
            }
            let mut word = table[k].decomposition.clone();
            word.push(*g);
            let index = table.len();
            table.push(CliffordElement {
                index,
                decomposition: word,
                matrix: m,
            });
            queue.push_back(index);
        }
    }
    table
}

/// The 24 single-qubit Cliffords, ordered by decomposition length.
pub fn clifford_table() -> &'static [CliffordElement] {
    static TABLE: OnceLock<Vec<CliffordElement>> = OnceLock::new();
    TABLE.get_or_init(build_table)
}

/// Table index of `m` up to phase, lowest index on ties.
pub fn clifford_index(m: &CMatrix) -> Option<usize> {
    clifford_table().iter().position(|e| same_up_to_phase(&e.matrix, m))
}

/// Mean generator count over the table.
pub fn mean_generator_count() -> f64 {
    let t = clifford_table();
    t.iter().map(|e| e.decomposition.len()).sum::<usize>() as f64 / t.len() as f64
}

//! Single-qubit randomized benchmarking: Clifford synthesis from π/2 pulses,
//! sequence compilation, noisy simulation, and decay fitting.

mod clifford;
mod srb;

use std::io::Write;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::sample_rng;
use crate::qcore::{c, max_abs, CMatrix};

pub use clifford::{clifford_index, clifford_table, mean_generator_count, CliffordElement, Generator};
pub use srb::{
    bath_channel_fidelity, bloch_purity, is_nuclear_block_diagonal, srb_combine, subspace_fidelities,
    tomography_readout, MAX_EXACT_BATH_SPINS,
};

/// Sequence lengths used when none are given.
pub const DEFAULT_LENGTHS: [usize; 7] = [1, 5, 10, 20, 40, 80, 100];
/// Random sequences per length used when none are given.
pub const DEFAULT_RANDOMIZATIONS: usize = 30;

const TP_TOL: f64 = 1e-10;

/// A compiled RB sequence: `m` random Cliffords, each optionally followed by
/// the interleaved Clifford, then the recovery Clifford.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RbSequence {
    pub cliffords: Vec<usize>,
    pub interleaved: Option<usize>,
    pub recovery: usize,
}

/// One element of an expanded sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SequenceGate {
    Clifford(usize),
    Interleaved(usize),
}

impl RbSequence {
    pub fn length(&self) -> usize {
        self.cliffords.len()
    }

    /// Gates in application order.
    pub fn gates(&self) -> Vec<SequenceGate> {
        let mut out = Vec::with_capacity(2 * self.cliffords.len() + 1);
        for &k in &self.cliffords {
            out.push(SequenceGate::Clifford(k));
            if let Some(g) = self.interleaved {
                out.push(SequenceGate::Interleaved(g));
            }
        }
        out.push(SequenceGate::Clifford(self.recovery));
        out
    }

    /// Ideal composite unitary, identity up to phase by construction.
    pub fn ideal_unitary(&self) -> CMatrix {
        let table = clifford_table();
        self.gates().iter().fold(CMatrix::identity(2, 2), |acc, g| {
            let k = match g {
                SequenceGate::Clifford(k) | SequenceGate::Interleaved(k) => *k,
            };
            &table[k].matrix * acc
        })
    }
}

/// Draws `m` uniform Cliffords from `(seed, stream)` and appends the recovery
/// Clifford that inverts the ideal composite up to phase.
pub fn compile_rb_sequence_stream(m: usize, interleaved: Option<usize>, seed: u64, stream: u64) -> Result<RbSequence> {
    if m == 0 {
        return Err(Error::InvalidArgument("sequence length must be at least 1".into()));
    }
    let table = clifford_table();
    if let Some(g) = interleaved {
        if g >= table.len() {
            return Err(Error::InvalidArgument(format!("interleaved Clifford index {g} out of range")));
        }
    }
    let mut rng = sample_rng(seed, stream);
    let cliffords: Vec<usize> = (0..m).map(|_| rng.random_range(0..table.len())).collect();
    let mut composite = CMatrix::identity(2, 2);
    for &k in &cliffords {
        composite = &table[k].matrix * composite;
        if let Some(g) = interleaved {
            composite = &table[g].matrix * composite;
        }
    }
    let recovery = clifford_index(&composite.adjoint())
        .ok_or_else(|| Error::Degenerate("composite left the Clifford group".into()))?;
    Ok(RbSequence {
        cliffords,
        interleaved,
        recovery,
    })
}

pub fn compile_rb_sequence(m: usize, interleaved: Option<usize>, seed: u64) -> Result<RbSequence> {
    compile_rb_sequence_stream(m, interleaved, seed, 0)
}

/// `randomizations` sequences at each length; sequence `k` overall uses RNG
/// stream `k`.
pub fn compile_rb_experiment(
    lengths: &[usize],
    randomizations: usize,
    interleaved: Option<usize>,
    seed: u64,
) -> Result<Vec<RbSequence>> {
    let mut out = Vec::with_capacity(lengths.len() * randomizations);
    for &m in lengths {
        for _ in 0..randomizations {
            out.push(compile_rb_sequence_stream(m, interleaved, seed, out.len() as u64)?);
        }
    }
    Ok(out)
}

/// A trace-preserving map on one qubit given by Kraus operators.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausChannel {
    kraus: Vec<CMatrix>,
}

impl KrausChannel {
    pub fn new(kraus: Vec<CMatrix>) -> Result<Self> {
        if kraus.is_empty() {
            return Err(Error::InvalidArgument("channel needs at least one Kraus operator".into()));
        }
        let mut sum = CMatrix::zeros(2, 2);
        for k in &kraus {
            if k.shape() != (2, 2) {
                return Err(Error::DimensionMismatch {
                    expected: 2,
                    found: k.nrows(),
                });
            }
            sum += k.adjoint() * k;
        }
        let dev = max_abs(&(sum - CMatrix::identity(2, 2)));
        if dev > TP_TOL {
            return Err(Error::NotTracePreserving(dev));
        }
        Ok(Self { kraus })
    }

    pub fn unitary(u: CMatrix) -> Result<Self> {
        Self::new(vec![u])
    }

    /// `ρ ↦ p·UρU† + (1 − p)·I/2`, valid for `p ∈ [−1/3, 1]`.
    pub fn depolarized(u: &CMatrix, p: f64) -> Result<Self> {
        if !(-1.0 / 3.0..=1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!("depolarizing parameter {p} outside [-1/3, 1]")));
        }
        let paulis = [
            CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]),
            CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)]),
            CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]),
        ];
        let mut kraus = vec![u.scale(((1.0 + 3.0 * p) / 4.0).sqrt())];
        let w = ((1.0 - p) / 4.0).sqrt();
        kraus.extend(paulis.iter().map(|s| (s * u).scale(w)));
        Self::new(kraus)
    }

    pub fn kraus(&self) -> &[CMatrix] {
        &self.kraus
    }

    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        self.kraus
            .iter()
            .fold(CMatrix::zeros(2, 2), |acc, k| acc + k * rho * k.adjoint())
    }
}

/// Noisy implementations of the four generators, an optional noise map
/// applied after every Clifford (recovery included), and an optional
/// dedicated channel for the interleaved gate (otherwise it is built from
/// generators).
#[derive(Debug, Clone)]
pub struct GateChannels {
    pub generators: [KrausChannel; 4],
    pub per_clifford: Option<KrausChannel>,
    pub interleaved: Option<KrausChannel>,
}

impl GateChannels {
    pub fn ideal() -> Self {
        Self::depolarizing(1.0).expect("p = 1 is valid")
    }

    /// Every generator followed by depolarizing with parameter `p_gen`.
    pub fn depolarizing(p_gen: f64) -> Result<Self> {
        let g = |k: Generator| KrausChannel::depolarized(&k.matrix(), p_gen);
        Ok(Self {
            generators: [g(Generator::X90)?, g(Generator::Y90)?, g(Generator::Xm90)?, g(Generator::Ym90)?],
            per_clifford: None,
            interleaved: None,
        })
    }

    /// Ideal generators, each Clifford followed by depolarizing with
    /// parameter `p`: the gate-independent model whose decay is exactly `p`.
    pub fn clifford_depolarizing(p: f64) -> Result<Self> {
        let mut out = Self::ideal();
        out.per_clifford = Some(KrausChannel::depolarized(&CMatrix::identity(2, 2), p)?);
        Ok(out)
    }

    pub fn with_interleaved(mut self, channel: KrausChannel) -> Self {
        self.interleaved = Some(channel);
        self
    }
}

/// Per-Clifford decay `mean_c p_gen^{n_c}` for per-generator depolarizing.
pub fn clifford_decay_from_generator(p_gen: f64) -> f64 {
    let t = clifford_table();
    t.iter().map(|e| p_gen.powi(e.decomposition.len() as i32)).sum::<f64>() / t.len() as f64
}

/// Inverts `clifford_decay_from_generator` on `[0, 1]` by bisection.
pub fn generator_decay_for_clifford(p_clifford: f64) -> Result<f64> {
    if !(clifford_decay_from_generator(0.0)..=1.0).contains(&p_clifford) {
        return Err(Error::InvalidArgument(format!("per-Clifford decay {p_clifford} unreachable")));
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if clifford_decay_from_generator(mid) < p_clifford {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Population of `|0⟩` after the noisy sequence acting on `|0⟩⟨0|`.
pub fn sequence_survival(seq: &RbSequence, channels: &GateChannels) -> f64 {
    let table = clifford_table();
    let mut rho = CMatrix::zeros(2, 2);
    rho[(0, 0)] = c(1.0, 0.0);
    let by_generators = |rho: CMatrix, k: usize| {
        table[k]
            .decomposition
            .iter()
            .fold(rho, |r, g| channels.generators[g.index()].apply(&r))
    };
    for gate in seq.gates() {
        rho = match (gate, &channels.interleaved) {
            (SequenceGate::Interleaved(_), Some(ch)) => ch.apply(&rho),
            (SequenceGate::Interleaved(k), None) => by_generators(rho, k),
            (SequenceGate::Clifford(k), _) => {
                let r = by_generators(rho, k);
                match &channels.per_clifford {
                    Some(ch) => ch.apply(&r),
                    None => r,
                }
            }
        };
    }
    rho[(0, 0)].re.clamp(0.0, 1.0)
}

/// Mean survival of the sequences sharing one length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurvivalPoint {
    pub m: usize,
    pub mean_survival: f64,
    pub sem: f64,
}

/// Survival of every sequence, with optional binomial shot noise drawn from
/// stream `k` for sequence `k`. Results do not depend on the thread count.
pub fn sequence_survivals(
    seqs: &[RbSequence],
    channels: &GateChannels,
    shots: Option<u64>,
    seed: u64,
) -> Result<Vec<f64>> {
    if shots == Some(0) {
        return Err(Error::InvalidArgument("shots must be positive".into()));
    }
    Ok(seqs
        .par_iter()
        .enumerate()
        .map(|(k, s)| {
            let p = sequence_survival(s, channels);
            match shots {
                None => p,
                Some(n) => {
                    let mut rng = sample_rng(seed, k as u64);
                    let hits = Binomial::new(n, p).expect("p clamped to [0, 1]").sample(&mut rng);
                    hits as f64 / n as f64
                }
            }
        })
        .collect())
}

/// Groups per-sequence survivals by length, ascending.
pub fn summarize_survivals(seqs: &[RbSequence], survivals: &[f64]) -> Vec<SurvivalPoint> {
    let mut lengths: Vec<usize> = seqs.iter().map(RbSequence::length).collect();
    lengths.sort_unstable();
    lengths.dedup();
    lengths
        .into_iter()
        .map(|m| {
            let ys: Vec<f64> = seqs
                .iter()
                .zip(survivals)
                .filter(|(s, _)| s.length() == m)
                .map(|(_, &y)| y)
                .collect();
            let n = ys.len() as f64;
            let mean = ys.iter().sum::<f64>() / n;
            let sem = if ys.len() > 1 {
                (ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
            } else {
                0.0
            };
            SurvivalPoint {
                m,
                mean_survival: mean,
                sem,
            }
        })
        .collect()
}

pub fn simulate_sequence_survival(
    seqs: &[RbSequence],
    channels: &GateChannels,
    shots: Option<u64>,
    seed: u64,
) -> Result<Vec<SurvivalPoint>> {
    let ys = sequence_survivals(seqs, channels, shots, seed)?;
    Ok(summarize_survivals(seqs, &ys))
}

/// `m,mean_survival,sem` rows.
pub fn write_rb_csv<W: Write>(points: &[SurvivalPoint], writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    w.write_record(["m", "mean_survival", "sem"]).map_err(|e| Error::Io(e.to_string()))?;
    for p in points {
        w.write_record([p.m.to_string(), format!("{:?}", p.mean_survival), format!("{:?}", p.sem)])
            .map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Io(e.to_string()))
}

/// Least-squares fit of `A·p^m + B`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RbDecayFit {
    pub a: f64,
    pub b: f64,
    pub p: f64,
    pub stderr_p: f64,
}

impl RbDecayFit {
    /// Average gate fidelity per Clifford, `1 − (1 − p)/2`.
    pub fn fidelity(&self) -> f64 {
        1.0 - (1.0 - self.p) / 2.0
    }

    pub fn fidelity_stderr(&self) -> f64 {
        self.stderr_p / 2.0
    }
}

/// Best `(A, B, SSR)` for fixed `p`; the model is linear in `A` and `B`.
fn linear_part(points: &[(f64, f64)], p: f64) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(m, y) in points {
        let x = p.powf(m);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let det = n * sxx - sx * sx;
    let (a, b) = if det.abs() > 1e-14 * n * sxx.max(1.0) {
        ((n * sxy - sx * sy) / det, (sxx * sy - sx * sxy) / det)
    } else {
        (0.0, sy / n)
    };
    let ssr = points.iter().map(|&(m, y)| (a * p.powf(m) + b - y).powi(2)).sum();
    (a, b, ssr)
}

/// Least-squares fit of `A·p^m + B` to `(m, survival)` points by profiling
/// over `p ∈ [0, 1]` (log-spaced scan in `1 − p`, then golden-section
/// refinement). Repeated `m` values are allowed; at least four distinct
/// lengths are required. `stderr_p` is from `s²(JᵀJ)⁻¹`.
pub fn fit_rb_decay(points: &[(f64, f64)]) -> Result<RbDecayFit> {
    let mut ms: Vec<f64> = points.iter().map(|p| p.0).collect();
    if ms.iter().any(|m| !m.is_finite() || *m < 0.0) || points.iter().any(|p| !p.1.is_finite()) {
        return Err(Error::InvalidArgument("RB points must be finite with m ≥ 0".into()));
    }
    ms.sort_by(f64::total_cmp);
    ms.dedup();
    if ms.len() < 4 {
        return Err(Error::InvalidArgument(format!(
            "need at least 4 distinct sequence lengths, got {}",
            ms.len()
        )));
    }
    let (ymin, ymax) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.1), hi.max(p.1)));
    if ymax - ymin < 1e-12 {
        // No decay: p = 1 and the split between A and B is arbitrary.
        return Ok(RbDecayFit {
            a: ymax - 0.5,
            b: 0.5,
            p: 1.0,
            stderr_p: 0.0,
        });
    }
    // Scan u = −log10(1 − p) over [0, 12].
    let p_of = |u: f64| 1.0 - 10f64.powf(-u);
    let cost = |u: f64| linear_part(points, p_of(u)).2;
    let grid: Vec<f64> = (0..=1200).map(|k| k as f64 * 0.01).collect();
    let costs: Vec<f64> = grid.iter().map(|&u| cost(u)).collect();
    let k = (0..costs.len()).min_by(|&i, &j| costs[i].total_cmp(&costs[j])).unwrap_or(0);
    let (mut lo, mut hi) = (grid[k.saturating_sub(1)], grid[(k + 1).min(grid.len() - 1)]);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut x1, mut x2) = (hi - g * (hi - lo), lo + g * (hi - lo));
    let (mut f1, mut f2) = (cost(x1), cost(x2));
    for _ in 0..200 {
        if hi - lo < 1e-13 {
            break;
        }
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = cost(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = cost(x2);
        }
    }
    let u = if f1 < f2 { x1 } else { x2 };
    let p = p_of(u);
    let (a, b, ssr) = linear_part(points, p);
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::NonConvergence(format!("fitted decay p = {p} outside [0, 1]")));
    }
    // Covariance over (A, p, B).
    let n = points.len();
    let mut j = DMatrix::zeros(n, 3);
    for (r, &(m, _)) in points.iter().enumerate() {
        j[(r, 0)] = p.powf(m);
        j[(r, 1)] = if m == 0.0 { 0.0 } else { a * m * p.powf(m - 1.0) };
        j[(r, 2)] = 1.0;
    }
    let jtj = j.transpose() * &j;
    let dof = n.saturating_sub(3).max(1) as f64;
    let stderr_p = match jtj.try_inverse() {
        Some(inv) => (inv[(1, 1)] * ssr / dof).max(0.0).sqrt(),
        None => return Err(Error::Degenerate("decay parameters not identifiable".into())),
    };
    Ok(RbDecayFit { a, b, p, stderr_p })
}

/// Fits the per-length means.
pub fn fit_survival_points(points: &[SurvivalPoint]) -> Result<RbDecayFit> {
    let pts: Vec<(f64, f64)> = points.iter().map(|p| (p.m as f64, p.mean_survival)).collect();
    fit_rb_decay(&pts)
}

/// Interleaved-RB estimate for the interleaved gate alone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IrbEstimate {
    pub p_gate: f64,
    pub fidelity: f64,
    pub stderr: f64,
}

/// `p_gate = p_int/p_ref`, fidelity `1 − (1 − p_gate)/2`, errors propagated
/// in quadrature.
pub fn irb_gate_fidelity(reference: &RbDecayFit, interleaved: &RbDecayFit) -> Result<IrbEstimate> {
    if reference.p <= 0.0 {
        return Err(Error::Degenerate("reference decay is zero".into()));
    }
    let p_gate = interleaved.p / reference.p;
    let rel = (reference.stderr_p / reference.p).hypot(if interleaved.p > 0.0 {
        interleaved.stderr_p / interleaved.p
    } else {
        0.0
    });
    Ok(IrbEstimate {
        p_gate,
        fidelity: 1.0 - (1.0 - p_gate) / 2.0,
        stderr: p_gate * rel / 2.0,
    })
}

//! Lumped-element model of a reconfigurable surface: tunable branch
//! impedances, the π-network admittance, impedance/scattering conversions,
//! capacitance codebooks and the capacitance → Θ(C, f) pipeline.
//!
//! Everything here is SI (Hz, F, H, Ω).

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{block_diagonal, c, c64, inverse_guarded, CMatrix, CONDITION_LIMIT};

/// Series R-L-C branch shunted by an inductor `l0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchParams {
    pub r: f64,
    pub l0: f64,
    pub l: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircuitParams {
    pub self_branch: BranchParams,
    pub inter_branch: BranchParams,
    pub z0: f64,
}

impl Default for CircuitParams {
    fn default() -> Self {
        Self {
            self_branch: BranchParams { r: 1.0, l0: 2.5e-9, l: 0.7e-9 },
            inter_branch: BranchParams { r: 1.0, l0: 12.5e-9, l: 0.2e-9 },
            z0: 50.0,
        }
    }
}

impl CircuitParams {
    pub fn validate(&self) -> Result<()> {
        for (name, b) in [("self", &self.self_branch), ("inter", &self.inter_branch)] {
            if !(b.r >= 0.0 && b.l >= 0.0 && b.l0 > 0.0)
                || !(b.r.is_finite() && b.l.is_finite() && b.l0.is_finite())
            {
                return Err(Error::InvalidArgument(format!(
                    "{name} branch needs R >= 0, L >= 0, L0 > 0 (got {b:?})"
                )));
            }
        }
        if !(self.z0 > 0.0 && self.z0.is_finite()) {
            return Err(Error::InvalidArgument(format!("Z0 must be positive, got {}", self.z0)));
        }
        Ok(())
    }

    /// Same network with both branch resistances removed.
    pub fn lossless(mut self) -> Self {
        self.self_branch.r = 0.0;
        self.inter_branch.r = 0.0;
        self
    }
}

fn branch_impedance(cap: f64, freq: f64, b: &BranchParams) -> Result<c64> {
    if !(cap > 0.0 && cap.is_finite()) {
        return Err(Error::InvalidArgument(format!("capacitance must be positive, got {cap}")));
    }
    if !(freq > 0.0 && freq.is_finite()) {
        return Err(Error::InvalidArgument(format!("frequency must be positive, got {freq}")));
    }
    let w = 2.0 * PI * freq;
    let shunt = c(0.0, w * b.l0);
    let series = c(b.r, w * b.l - 1.0 / (w * cap));
    let den = shunt + series;
    if den.norm() == 0.0 {
        return Err(Error::SingularBranch(format!(
            "lossless branch resonates at {freq} Hz with C = {cap} F"
        )));
    }
    Ok(shunt * series / den)
}

pub fn self_impedance(cap: f64, freq: f64, params: &CircuitParams) -> Result<c64> {
    branch_impedance(cap, freq, &params.self_branch)
}

pub fn inter_impedance(cap: f64, freq: f64, params: &CircuitParams) -> Result<c64> {
    branch_impedance(cap, freq, &params.inter_branch)
}

/// A branch of the π network. `Open` stands for an infinite impedance
/// (no connection), kept out of the matrices as an explicit marker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Branch {
    Finite(c64),
    Open,
}

impl Branch {
    pub fn admittance(&self) -> Result<c64> {
        match *self {
            Branch::Open => Ok(c64::default()),
            Branch::Finite(z) if z.norm() == 0.0 => {
                Err(Error::SingularBranch("zero branch impedance".into()))
            }
            Branch::Finite(z) if !(z.re.is_finite() && z.im.is_finite()) => {
                Err(Error::InvalidArgument("non-finite branch impedance".into()))
            }
            Branch::Finite(z) => Ok(z.inv()),
        }
    }

    pub fn finite(&self) -> Option<c64> {
        match *self {
            Branch::Finite(z) => Some(z),
            Branch::Open => None,
        }
    }
}

/// Symmetric table of inter-element branches; the diagonal is unused.
#[derive(Debug, Clone, PartialEq)]
pub struct InterBranches {
    order: usize,
    data: Vec<Branch>,
}

impl InterBranches {
    pub fn open(order: usize) -> Self {
        Self { order, data: vec![Branch::Open; order * order] }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn get(&self, p: usize, q: usize) -> Branch {
        self.data[p * self.order + q]
    }

    pub fn set(&mut self, p: usize, q: usize, b: Branch) {
        self.data[p * self.order + q] = b;
        self.data[q * self.order + p] = b;
    }
}

/// π-network admittance: `Y_pq = -1/Z̃_pq`, `Y_pp = 1/Z_p + Σ_{i≠p} 1/Z̃_pi`.
pub fn admittance_matrix(self_z: &[Branch], inter: &InterBranches) -> Result<CMatrix> {
    let d = self_z.len();
    if inter.order() != d {
        return Err(Error::InvalidArgument(format!(
            "{d} self branches but inter table of order {}",
            inter.order()
        )));
    }
    let mut y = CMatrix::zeros(d, d);
    for p in 0..d {
        let mut diag = self_z[p].admittance()?;
        for q in 0..d {
            if q == p {
                continue;
            }
            let a = inter.get(p, q).admittance()?;
            y[(p, q)] = -a;
            diag += a;
        }
        y[(p, p)] = diag;
    }
    Ok(y)
}

fn check_square_symmetric(m: &CMatrix, what: &str) -> Result<()> {
    if !m.is_square() {
        return Err(Error::InvalidArgument(format!("{what} must be square")));
    }
    let asym = (m - m.transpose()).norm();
    if asym > 1e-9 * m.norm().max(1.0) {
        return Err(Error::InvalidArgument(format!("{what} is not symmetric (‖A−Aᵀ‖ = {asym:.3e})")));
    }
    Ok(())
}

/// `Θ = (Z + Z0 I)⁻¹ (Z − Z0 I)`.
pub fn scattering_from_impedance(z: &CMatrix, z0: f64) -> Result<CMatrix> {
    check_square_symmetric(z, "impedance matrix")?;
    let d = z.nrows();
    let eye = CMatrix::identity(d, d) * c(z0, 0.0);
    let inv = inverse_guarded(&(z + &eye)).map_err(|e| match e {
        Error::SingularMatrix { cond } => {
            Error::SingularNetwork(format!("Z + Z0 I is singular (condition {cond:.3e})"))
        }
        other => other,
    })?;
    Ok(inv * (z - eye))
}

/// `Z = Z0 (I + Θ)(I − Θ)⁻¹`.
pub fn impedance_from_scattering(theta: &CMatrix, z0: f64) -> Result<CMatrix> {
    if !theta.is_square() {
        return Err(Error::InvalidArgument("scattering matrix must be square".into()));
    }
    let d = theta.nrows();
    let eye = CMatrix::identity(d, d);
    let inv = inverse_guarded(&(&eye - theta)).map_err(|e| match e {
        Error::SingularMatrix { .. } => Error::OpenCircuit,
        other => other,
    })?;
    Ok((eye + theta) * inv * c(z0, 0.0))
}

/// Inverts the π-network relations: `Z̃_pq = −1/[Z⁻¹]_pq`,
/// `Z_p = 1/Σ_i [Z⁻¹]_pi`. Entries whose admittance is below
/// `1e-15 · ‖Z⁻¹‖_F` come back as [`Branch::Open`].
pub fn retrieve_branch_impedances(z: &CMatrix) -> Result<(Vec<Branch>, InterBranches)> {
    if !z.is_square() {
        return Err(Error::InvalidArgument("impedance matrix must be square".into()));
    }
    let y = inverse_guarded(z).map_err(|e| match e {
        Error::SingularMatrix { cond } => {
            Error::SingularNetwork(format!("impedance matrix is singular (condition {cond:.3e})"))
        }
        other => other,
    })?;
    let d = z.nrows();
    let floor = 1e-15 * y.norm();
    let branch = |a: c64| if a.norm() <= floor { Branch::Open } else { Branch::Finite(a.inv()) };
    let mut inter = InterBranches::open(d);
    for p in 0..d {
        for q in p + 1..d {
            // average the two triangles to shave off asymmetric rounding
            let a = (y[(p, q)] + y[(q, p)]) * 0.5;
            inter.set(p, q, branch(-a));
        }
    }
    let selfs = (0..d).map(|p| branch(y.row(p).sum())).collect();
    Ok((selfs, inter))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacitanceRange {
    pub min: f64,
    pub max: f64,
}

impl CapacitanceRange {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        let r = Self { min, max };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min > 0.0 && self.max > self.min && self.max.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "capacitance range must satisfy 0 < min < max, got [{}, {}]",
                self.min, self.max
            )));
        }
        Ok(())
    }

    pub fn contains(&self, cap: f64) -> bool {
        let slack = 1e-12 * self.max;
        cap >= self.min - slack && cap <= self.max + slack
    }

    /// `n` uniformly spaced values including both endpoints.
    pub fn grid(&self, n: usize) -> Vec<f64> {
        if n == 1 {
            return vec![self.min];
        }
        let step = (self.max - self.min) / (n - 1) as f64;
        (0..n)
            .map(|i| if i + 1 == n { self.max } else { self.min + step * i as f64 })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodeEntry {
    pub capacitance: f64,
    pub impedance: c64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub frequency: f64,
    pub bits: u32,
    pub self_entries: Vec<CodeEntry>,
    pub inter_entries: Vec<CodeEntry>,
}

pub const MAX_CODEBOOK_BITS: u32 = 20;

pub fn build_codebook(
    freq: f64,
    bits: u32,
    self_range: CapacitanceRange,
    inter_range: CapacitanceRange,
    params: &CircuitParams,
) -> Result<Codebook> {
    if bits == 0 || bits > MAX_CODEBOOK_BITS {
        return Err(Error::InvalidArgument(format!(
            "codebook bits must be in 1..={MAX_CODEBOOK_BITS}, got {bits}"
        )));
    }
    self_range.validate()?;
    inter_range.validate()?;
    params.validate()?;
    let n = 1usize << bits;
    let list = |range: CapacitanceRange, b: &BranchParams| -> Result<Vec<CodeEntry>> {
        range
            .grid(n)
            .into_iter()
            .map(|cap| Ok(CodeEntry { capacitance: cap, impedance: branch_impedance(cap, freq, b)? }))
            .collect()
    };
    Ok(Codebook {
        frequency: freq,
        bits,
        self_entries: list(self_range, &params.self_branch)?,
        inter_entries: list(inter_range, &params.inter_branch)?,
    })
}

/// Nearest codeword by `|Z − ζ|²`; ties go to the lower capacitance. An open
/// target maps to the codeword of largest magnitude.
pub fn nearest_codeword(entries: &[CodeEntry], target: Branch) -> &CodeEntry {
    let mut best = &entries[0];
    match target {
        Branch::Finite(z) => {
            let mut best_d = (best.impedance - z).norm_sqr();
            for e in &entries[1..] {
                let d = (e.impedance - z).norm_sqr();
                if d < best_d {
                    best = e;
                    best_d = d;
                }
            }
        }
        Branch::Open => {
            for e in &entries[1..] {
                if e.impedance.norm() > best.impedance.norm() {
                    best = e;
                }
            }
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Architecture {
    SingleConnected,
    GroupConnected,
    FullyConnected,
}

impl Architecture {
    pub fn label(&self) -> &'static str {
        match self {
            Architecture::SingleConnected => "single",
            Architecture::GroupConnected => "group",
            Architecture::FullyConnected => "fully",
        }
    }
}

impl std::fmt::Display for Architecture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Architecture {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" | "single-connected" => Ok(Architecture::SingleConnected),
            "group" | "group-connected" => Ok(Architecture::GroupConnected),
            "fully" | "fully-connected" => Ok(Architecture::FullyConnected),
            _ => Err(Error::InvalidArgument(format!("unknown architecture {s:?}"))),
        }
    }
}

/// `D` elements split into `G` consecutive groups of `D/G` elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RisTopology {
    elements: usize,
    groups: usize,
}

impl RisTopology {
    pub fn new(elements: usize, groups: usize) -> Result<Self> {
        if elements == 0 || groups == 0 {
            return Err(Error::InvalidArgument("D and G must be positive".into()));
        }
        if !elements.is_multiple_of(groups) {
            return Err(Error::InvalidArgument(format!(
                "G must divide D (D = {elements}, G = {groups})"
            )));
        }
        Ok(Self { elements, groups })
    }

    pub fn fully(elements: usize) -> Result<Self> {
        Self::new(elements, 1)
    }

    pub fn single(elements: usize) -> Result<Self> {
        Self::new(elements, elements)
    }

    pub fn elements(&self) -> usize {
        self.elements
    }

    pub fn groups(&self) -> usize {
        self.groups
    }

    pub fn group_size(&self) -> usize {
        self.elements / self.groups
    }

    pub fn group_offset(&self, g: usize) -> usize {
        g * self.group_size()
    }

    pub fn architecture(&self) -> Architecture {
        if self.groups == 1 {
            Architecture::FullyConnected
        } else if self.groups == self.elements {
            Architecture::SingleConnected
        } else {
            Architecture::GroupConnected
        }
    }
}

/// Symmetric capacitance blocks, one per group. The diagonal of each block
/// holds self capacitances and the off-diagonal the inter-element ones.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacitancePlan {
    topology: RisTopology,
    blocks: Vec<DMatrix<f64>>,
}

impl CapacitancePlan {
    pub fn from_blocks(topology: RisTopology, blocks: Vec<DMatrix<f64>>) -> Result<Self> {
        if blocks.len() != topology.groups() {
            return Err(Error::InvalidArgument(format!(
                "{} blocks for {} groups",
                blocks.len(),
                topology.groups()
            )));
        }
        let n = topology.group_size();
        for (g, b) in blocks.iter().enumerate() {
            if b.shape() != (n, n) {
                return Err(Error::InvalidArgument(format!("block {g} is not {n}x{n}")));
            }
            if b != &b.transpose() {
                return Err(Error::InvalidArgument(format!("block {g} is not symmetric")));
            }
            if b.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                return Err(Error::InvalidArgument(format!(
                    "block {g} has non-positive capacitances"
                )));
            }
        }
        Ok(Self { topology, blocks })
    }

    /// Draws every capacitance uniformly from its range.
    pub fn random(
        topology: RisTopology,
        self_range: CapacitanceRange,
        inter_range: CapacitanceRange,
        rng: &mut impl Rng,
    ) -> Self {
        let n = topology.group_size();
        let blocks = (0..topology.groups())
            .map(|_| {
                let mut b = DMatrix::zeros(n, n);
                for j in 0..n {
                    for i in j..n {
                        let r = if i == j { self_range } else { inter_range };
                        let v = rng.random_range(r.min..=r.max);
                        b[(i, j)] = v;
                        b[(j, i)] = v;
                    }
                }
                b
            })
            .collect();
        Self { topology, blocks }
    }

    pub fn topology(&self) -> RisTopology {
        self.topology
    }

    pub fn blocks(&self) -> &[DMatrix<f64>] {
        &self.blocks
    }

    /// Full `D×D` matrix with zeros outside the group blocks.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        let d = self.topology.elements();
        let n = self.topology.group_size();
        let mut m = DMatrix::zeros(d, d);
        for (g, b) in self.blocks.iter().enumerate() {
            m.view_mut((g * n, g * n), (n, n)).copy_from(b);
        }
        m
    }

    pub fn check_ranges(&self, self_range: &CapacitanceRange, inter_range: &CapacitanceRange) -> Result<()> {
        for (g, b) in self.blocks.iter().enumerate() {
            for j in 0..b.ncols() {
                for i in j..b.nrows() {
                    let r = if i == j { self_range } else { inter_range };
                    if !r.contains(b[(i, j)]) {
                        return Err(Error::InvalidArgument(format!(
                            "group {g} entry ({i},{j}) = {} F outside [{}, {}]",
                            b[(i, j)],
                            r.min,
                            r.max
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringMatrix {
    pub theta: CMatrix,
    pub topology: RisTopology,
    pub frequency: f64,
}

impl ScatteringMatrix {
    pub fn architecture(&self) -> Architecture {
        self.topology.architecture()
    }

    /// Largest eigenvalue of `ΘΘᴴ`, i.e. σ_max(Θ)².
    pub fn max_gain(&self) -> f64 {
        let s = self.theta.singular_values();
        s.iter().fold(0.0f64, |a, &x| a.max(x)).powi(2)
    }

    pub fn block(&self, g: usize) -> CMatrix {
        let n = self.topology.group_size();
        let o = self.topology.group_offset(g);
        self.theta.view((o, o), (n, n)).into_owned()
    }
}

fn block_scattering(block: &DMatrix<f64>, freq: f64, params: &CircuitParams) -> Result<CMatrix> {
    let n = block.nrows();
    let selfs = (0..n)
        .map(|p| self_impedance(block[(p, p)], freq, params).map(Branch::Finite))
        .collect::<Result<Vec<_>>>()?;
    let mut inter = InterBranches::open(n);
    for p in 0..n {
        for q in p + 1..n {
            inter.set(p, q, Branch::Finite(inter_impedance(block[(p, q)], freq, params)?));
        }
    }
    let y = admittance_matrix(&selfs, &inter)?;
    // With Z = Y⁻¹, (Z + Z0 I)⁻¹(Z − Z0 I) = (I + Z0 Y)⁻¹(I − Z0 Y), which
    // needs one solve instead of two.
    let eye = CMatrix::identity(n, n);
    let zy = &y * c(params.z0, 0.0);
    let lhs = &eye + &zy;
    let inv = inverse_guarded(&lhs).map_err(|e| match e {
        Error::SingularMatrix { cond } => Error::SingularNetwork(format!(
            "I + Z0 Y is singular (condition {cond:.3e}, limit {CONDITION_LIMIT:.0e})"
        )),
        other => other,
    })?;
    let theta = inv * (eye - zy);
    // Θ is symmetric in exact arithmetic; remove the rounding asymmetry.
    Ok((&theta + theta.transpose()) * c(0.5, 0.0))
}

/// Θ(C, f): each group's branches → admittance → scattering block, then
/// assembled block-diagonally.
pub fn scattering_from_capacitances(
    plan: &CapacitancePlan,
    freq: f64,
    params: &CircuitParams,
) -> Result<ScatteringMatrix> {
    let blocks = plan
        .blocks()
        .iter()
        .enumerate()
        .map(|(g, b)| block_scattering(b, freq, params).map_err(|e| e.in_group(g)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ScatteringMatrix {
        theta: block_diagonal(&blocks),
        topology: plan.topology(),
        frequency: freq,
    })
}

//! Relaxed solvers for Θ and the codebook projection that turns a relaxed
//! solution into capacitances.
//!
//! The stacked systems are never materialised in the solvers. A row of the
//! stacked matrix belongs to one (BS, user, antenna) triple and reads
//! `w · (G[:,m]ᵀ ⊗ f_kᴴ) D`, so products with it reduce to `f_kᴴ Θ G[:,m]`
//! and its Gram matrix has a closed form in inner products of `f` and `g`
//! (see [`StackedSystem::gram`]). [`stack_fc`] and [`stack_gc`] build the
//! same matrices literally from Kronecker products and are kept for checking
//! and small problems.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::circuit::{
    build_codebook, impedance_from_scattering, nearest_codeword, retrieve_branch_impedances, Branch,
    CapacitancePlan, CapacitanceRange, CircuitParams, Codebook, InterBranches, RisTopology,
};
use crate::error::{Error, Result};
use crate::linalg::{c, c64, kron, normalize_phase, vech_len, CMatrix, CVector, DuplicationMatrix};
use crate::scenario::ChannelSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveWeights {
    /// Weight of each BS.
    pub mu: Vec<f64>,
    /// Weight of each user, per BS.
    pub nu: Vec<Vec<f64>>,
}

impl ObjectiveWeights {
    /// `μ` as given and `ν_bk = 1/K_b`.
    pub fn with_even_users(mu: Vec<f64>, channels: &ChannelSet) -> Self {
        let nu = channels
            .bs
            .iter()
            .map(|b| vec![1.0 / b.users.len() as f64; b.users.len()])
            .collect();
        Self { mu, nu }
    }

    pub fn validate(&self, channels: &ChannelSet) -> Result<()> {
        if self.mu.len() != channels.bs.len() || self.nu.len() != channels.bs.len() {
            return Err(Error::InvalidArgument(format!(
                "weights given for {} BSs, channels have {}",
                self.mu.len(),
                channels.bs.len()
            )));
        }
        for (b, (nu, bs)) in self.nu.iter().zip(&channels.bs).enumerate() {
            if nu.len() != bs.users.len() {
                return Err(Error::InvalidArgument(format!("BS {b}: {} user weights for {} users", nu.len(), bs.users.len())));
            }
        }
        let all = self.mu.iter().chain(self.nu.iter().flatten());
        if all.clone().any(|x| !(*x >= 0.0 && x.is_finite())) {
            return Err(Error::InvalidArgument("weights must be finite and nonnegative".into()));
        }
        if self.mu.iter().all(|x| *x == 0.0) {
            return Err(Error::InvalidArgument("all BS weights are zero".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FwConfig {
    pub iterations: usize,
}

impl Default for FwConfig {
    fn default() -> Self {
        Self { iterations: 500 }
    }
}

impl FwConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidArgument("Frank-Wolfe needs at least one iteration".into()));
        }
        Ok(())
    }
}

/// Groups assigned to one priority BS, tuned at `frequency`.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorityBs {
    pub bs: usize,
    pub groups: Vec<usize>,
    pub frequency: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupAssignment {
    groups: usize,
    priorities: Vec<PriorityBs>,
}

impl GroupAssignment {
    pub fn new(groups: usize, priorities: Vec<PriorityBs>) -> Result<Self> {
        let a = Self { groups, priorities };
        a.check()?;
        Ok(a)
    }

    /// Splits groups `0..groups` into consecutive runs, one per entry of
    /// `targets` (BS index, frequency); earlier BSs get the remainder.
    pub fn contiguous(groups: usize, targets: &[(usize, f64)]) -> Result<Self> {
        if targets.is_empty() || targets.len() > groups {
            return Err(Error::InvalidAssignment(format!(
                "{} priority BSs for {groups} groups",
                targets.len()
            )));
        }
        let s = targets.len();
        let mut next = 0;
        let priorities = targets
            .iter()
            .enumerate()
            .map(|(i, &(bs, frequency))| {
                let n = groups / s + usize::from(i < groups % s);
                let gs = (next..next + n).collect();
                next += n;
                PriorityBs { bs, groups: gs, frequency }
            })
            .collect();
        Self::new(groups, priorities)
    }

    fn check(&self) -> Result<()> {
        if self.priorities.is_empty() {
            return Err(Error::InvalidAssignment("no priority BS".into()));
        }
        if self.priorities.len() > self.groups {
            return Err(Error::InvalidAssignment("more priority BSs than groups".into()));
        }
        let mut owner = vec![None; self.groups];
        for (s, p) in self.priorities.iter().enumerate() {
            if p.groups.is_empty() {
                return Err(Error::InvalidAssignment(format!("priority BS {} has no groups", p.bs)));
            }
            if self.priorities[..s].iter().any(|q| q.bs == p.bs) {
                return Err(Error::InvalidAssignment(format!("BS {} listed twice", p.bs)));
            }
            if !(p.frequency > 0.0 && p.frequency.is_finite()) {
                return Err(Error::InvalidAssignment(format!("bad target frequency for BS {}", p.bs)));
            }
            for &g in &p.groups {
                match owner.get_mut(g) {
                    None => return Err(Error::InvalidAssignment(format!("group {g} out of range"))),
                    Some(Some(_)) => {
                        return Err(Error::InvalidAssignment(format!("group {g} assigned twice")))
                    }
                    Some(slot) => *slot = Some(s),
                }
            }
        }
        if let Some(g) = owner.iter().position(Option::is_none) {
            return Err(Error::InvalidAssignment(format!("group {g} is not assigned")));
        }
        Ok(())
    }

    pub fn validate(&self, num_bs: usize) -> Result<()> {
        self.check()?;
        if let Some(p) = self.priorities.iter().find(|p| p.bs >= num_bs) {
            return Err(Error::InvalidAssignment(format!("BS {} does not exist", p.bs)));
        }
        Ok(())
    }

    pub fn groups(&self) -> usize {
        self.groups
    }

    pub fn priorities(&self) -> &[PriorityBs] {
        &self.priorities
    }
}

fn conj_row(v: &CVector) -> CMatrix {
    CMatrix::from_iterator(1, v.len(), v.iter().map(|z| z.conj()))
}

/// Literal `(R̂, ĥ)`: rows `√μ_b √ν_bk (G_bᵀ ⊗ f_bkᴴ) D_D` and entries
/// `√μ_b √ν_bk conj(h_bk)`, BS-major then user then antenna.
pub fn stack_fc(channels: &ChannelSet, weights: &ObjectiveWeights) -> Result<(CMatrix, CVector)> {
    weights.validate(channels)?;
    let d = channels.elements();
    let m = channels.antennas();
    let dd = DuplicationMatrix::new(d)?;
    let mut blocks = Vec::new();
    let mut h = Vec::new();
    for (b, bs) in channels.bs.iter().enumerate() {
        for (k, u) in bs.users.iter().enumerate() {
            let w = c((weights.mu[b] * weights.nu[b][k]).sqrt(), 0.0);
            let r = kron(&bs.g.transpose(), &conj_row(&u.f)) * w;
            blocks.push(dd.right_apply(&r)?);
            h.extend(u.h.iter().map(|x| x.conj() * w));
        }
    }
    let mut out = CMatrix::zeros(blocks.len() * m, vech_len(d));
    for (i, blk) in blocks.iter().enumerate() {
        out.view_mut((i * m, 0), (m, blk.ncols())).copy_from(blk);
    }
    Ok((out, CVector::from_vec(h)))
}

/// Literal `(R̃_s, h̃_s)` for BS `s` over the listed groups of `topology`.
pub fn stack_gc(
    channels: &ChannelSet,
    weights: &ObjectiveWeights,
    s: usize,
    groups: &[usize],
    topology: RisTopology,
) -> Result<(CMatrix, CVector)> {
    weights.validate(channels)?;
    let bs = channels
        .bs
        .get(s)
        .ok_or_else(|| Error::InvalidArgument(format!("BS {s} does not exist")))?;
    let n = topology.group_size();
    let m = channels.antennas();
    let dd = DuplicationMatrix::new(n)?;
    let cols = groups.len() * vech_len(n);
    let mut r = CMatrix::zeros(bs.users.len() * m, cols);
    let mut h = Vec::new();
    for (k, u) in bs.users.iter().enumerate() {
        let w = c((weights.mu[s] * weights.nu[s][k]).sqrt(), 0.0);
        for (j, &g) in groups.iter().enumerate() {
            let o = topology.group_offset(g);
            let gg = bs.g.rows(o, n).into_owned();
            let ff = u.f.rows(o, n).into_owned();
            let blk = dd.right_apply(&(kron(&gg.transpose(), &conj_row(&ff)) * w))?;
            r.view_mut((k * m, j * vech_len(n)), (m, vech_len(n))).copy_from(&blk);
        }
        h.extend(u.h.iter().map(|x| x.conj() * w));
    }
    Ok((r, CVector::from_vec(h)))
}

/// Structured form of a stacked system over one or more element segments.
/// The unknown is the concatenation of `vech(Θ_seg)` over segments.
#[derive(Debug, Clone)]
pub struct StackedSystem {
    segments: Vec<(usize, usize)>,
    /// Column `r` holds the RIS→user channel of row `r`.
    f: CMatrix,
    /// Column `r` holds `G_b[:, m]` of row `r`.
    g: CMatrix,
    w: Vec<f64>,
    h: CVector,
}

impl StackedSystem {
    fn build(channels: &ChannelSet, weights: &ObjectiveWeights, bss: &[usize], segments: Vec<(usize, usize)>) -> Result<Self> {
        weights.validate(channels)?;
        let d = channels.elements();
        let m = channels.antennas();
        let rows: usize = bss.iter().map(|&b| channels.bs[b].users.len() * m).sum();
        let mut f = CMatrix::zeros(d, rows);
        let mut g = CMatrix::zeros(d, rows);
        let mut w = Vec::with_capacity(rows);
        let mut h = CVector::zeros(rows);
        let mut r = 0;
        for &b in bss {
            let bs = &channels.bs[b];
            for (k, u) in bs.users.iter().enumerate() {
                let wk = (weights.mu[b] * weights.nu[b][k]).sqrt();
                for col in 0..m {
                    f.set_column(r, &u.f);
                    g.set_column(r, &bs.g.column(col));
                    w.push(wk);
                    h[r] = u.h[col].conj() * wk;
                    r += 1;
                }
            }
        }
        Ok(Self { segments, f, g, w, h })
    }

    /// Fully-connected system over all BSs with nonzero weight.
    pub fn fully(channels: &ChannelSet, weights: &ObjectiveWeights) -> Result<Self> {
        let bss: Vec<usize> = (0..channels.bs.len()).filter(|&b| weights.mu.get(b).is_some_and(|m| *m > 0.0)).collect();
        Self::build(channels, weights, &bss, vec![(0, channels.elements())])
    }

    /// Sub-problem of priority BS `s` restricted to `groups`.
    pub fn grouped(
        channels: &ChannelSet,
        weights: &ObjectiveWeights,
        s: usize,
        groups: &[usize],
        topology: RisTopology,
    ) -> Result<Self> {
        if topology.elements() != channels.elements() {
            return Err(Error::InvalidArgument("topology does not match channel dimension".into()));
        }
        if s >= channels.bs.len() {
            return Err(Error::InvalidArgument(format!("BS {s} does not exist")));
        }
        let n = topology.group_size();
        let segs = groups.iter().map(|&g| (topology.group_offset(g), n)).collect();
        Self::build(channels, weights, &[s], segs)
    }

    pub fn rows(&self) -> usize {
        self.w.len()
    }

    pub fn dim(&self) -> usize {
        self.segments.iter().map(|&(_, n)| vech_len(n)).sum()
    }

    pub fn h(&self) -> &CVector {
        &self.h
    }

    pub fn segments(&self) -> &[(usize, usize)] {
        &self.segments
    }

    fn seg_f(&self, (o, n): (usize, usize)) -> CMatrix {
        self.f.rows(o, n).into_owned()
    }

    fn seg_g(&self, (o, n): (usize, usize)) -> CMatrix {
        self.g.rows(o, n).into_owned()
    }

    /// Per-segment symmetric blocks `unvec(D θ_seg)`.
    pub fn blocks(&self, theta: &CVector) -> Result<Vec<CMatrix>> {
        if theta.len() != self.dim() {
            return Err(Error::InvalidArgument(format!("θ has length {}, expected {}", theta.len(), self.dim())));
        }
        let mut off = 0;
        self.segments
            .iter()
            .map(|&(_, n)| {
                let len = vech_len(n);
                let part = theta.rows(off, len).into_owned();
                off += len;
                DuplicationMatrix::new(n)?.symmetric_from(&part)
            })
            .collect()
    }

    /// `R θ`.
    pub fn apply(&self, theta: &CVector) -> Result<CVector> {
        let blocks = self.blocks(theta)?;
        let mut out = CVector::zeros(self.rows());
        for (&seg, blk) in self.segments.iter().zip(&blocks) {
            let f = self.seg_f(seg);
            let tg = blk * self.seg_g(seg);
            for r in 0..self.rows() {
                let s: c64 = f.column(r).iter().zip(tg.column(r).iter()).map(|(a, b)| a.conj() * b).sum();
                out[r] += s * self.w[r];
            }
        }
        Ok(out)
    }

    /// `Rᴴ u`.
    pub fn adjoint(&self, u: &CVector) -> Result<CVector> {
        if u.len() != self.rows() {
            return Err(Error::InvalidArgument("adjoint input has wrong length".into()));
        }
        let mut out = Vec::with_capacity(self.dim());
        for &seg in &self.segments {
            let mut f = self.seg_f(seg);
            for (r, mut col) in f.column_iter_mut().enumerate() {
                col *= u[r] * self.w[r];
            }
            let m = f * self.seg_g(seg).adjoint();
            let n = seg.1;
            for j in 0..n {
                out.push(m[(j, j)]);
                for i in j + 1..n {
                    out.push(m[(i, j)] + m[(j, i)]);
                }
            }
        }
        Ok(CVector::from_vec(out))
    }

    /// `R Rᴴ`. For rows with data `(f, g)` and `(f', g')` on one segment the
    /// entry is `(fᴴf')(g'ᴴg) + (Σ f̄_i ḡ'_i)(Σ g_j f'_j) − Σ f̄_i g_i f'_i ḡ'_i`,
    /// summed over segments and scaled by the row weights.
    pub fn gram(&self) -> CMatrix {
        let n = self.rows();
        let mut k = CMatrix::zeros(n, n);
        for &seg in &self.segments {
            let f = self.seg_f(seg);
            let g = self.seg_g(seg);
            let ff = f.adjoint() * &f;
            let gg = g.adjoint() * &g;
            let fg = f.adjoint() * g.map(|z| z.conj());
            let gf = g.transpose() * &f;
            let u = f.zip_map(&g, |a, b| a * b.conj());
            let uu = u.adjoint() * &u;
            for j in 0..n {
                for i in 0..n {
                    k[(i, j)] += ff[(i, j)] * gg[(j, i)] + fg[(i, j)] * gf[(i, j)] - uu[(i, j)];
                }
            }
        }
        for j in 0..n {
            for i in 0..n {
                k[(i, j)] *= self.w[i] * self.w[j];
            }
        }
        k
    }

    pub fn objective(&self, theta: &CVector) -> Result<f64> {
        Ok((self.apply(theta)? + &self.h).norm_squared())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedSolution {
    /// Concatenated non-redundant coefficients.
    pub theta: CVector,
    /// `unvec(D θ)` per segment (one block for fully-connected).
    pub blocks: Vec<CMatrix>,
    pub objective: f64,
    pub radius: f64,
    /// Objective after each Frank-Wolfe iterate; empty for closed form.
    pub trace: Vec<f64>,
}

/// Leading right singular vector of `R`, scaled to `radius`, from the
/// eigen-decomposition of the Gram matrix.
fn closed_form(sys: &StackedSystem, radius: f64) -> Result<RelaxedSolution> {
    if sys.h().iter().any(|z| *z != c64::default()) {
        return Err(Error::InvalidArgument(
            "closed-form solver needs blocked direct links; use the Frank-Wolfe solver".into(),
        ));
    }
    let k = sys.gram();
    let eig = SymmetricEigen::try_new(k, f64::EPSILON, 0)
        .ok_or_else(|| Error::Degenerate("eigen-decomposition did not converge".into()))?;
    let (idx, lambda) = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |a, (i, x)| if x > a.1 { (i, x) } else { a });
    if !(lambda > 0.0) {
        return Err(Error::Degenerate("stacked channel matrix is zero".into()));
    }
    let u = eig.eigenvectors.column(idx).into_owned();
    let mut v = sys.adjoint(&u)?;
    let n = v.norm();
    if n == 0.0 {
        return Err(Error::Degenerate("stacked channel matrix is zero".into()));
    }
    v *= c(radius / n, 0.0);
    normalize_phase(&mut v);
    let objective = sys.objective(&v)?;
    Ok(RelaxedSolution { blocks: sys.blocks(&v)?, theta: v, objective, radius, trace: Vec::new() })
}

/// Conditional gradient over `‖θ‖ ≤ radius` from `θ⁽¹⁾ = 0`, carried out on
/// coefficients `w` with `θ = Rᴴw`. Every direction is a multiple of
/// `Rᴴ(Rθ + ĥ)`, so the iterates never leave the range of `Rᴴ` and `Rθ = Kw`
/// with `K = RRᴴ`. When the gradient vanishes (only possible at θ = 0 with
/// ĥ = 0) the direction `Rᴴ𝟙` is used instead.
fn frank_wolfe(sys: &StackedSystem, radius: f64, fw: &FwConfig) -> Result<RelaxedSolution> {
    fw.validate()?;
    let k = sys.gram();
    let h = sys.h();
    let n = sys.rows();
    let mut w = CVector::zeros(n);
    let mut rt = CVector::zeros(n); // R θ = K w
    let mut trace = Vec::with_capacity(fw.iterations);
    trace.push((&rt + h).norm_squared());
    for i in 1..fw.iterations {
        let mut dir = (&rt + h) * c(2.0, 0.0);
        let mut kd = &k * &dir;
        let mut norm2 = dir.dotc(&kd).re;
        if !(norm2 > 0.0) {
            dir = CVector::from_element(n, c(1.0, 0.0));
            kd = &k * &dir;
            norm2 = dir.dotc(&kd).re;
        }
        let xi = 2.0 / (i as f64 + 2.0);
        w *= c(1.0 - xi, 0.0);
        rt *= c(1.0 - xi, 0.0);
        if norm2 > 0.0 {
            let s = c(xi * radius / norm2.sqrt(), 0.0);
            w += &dir * s;
            rt += &kd * s;
        }
        trace.push((&rt + h).norm_squared());
    }
    let theta = sys.adjoint(&w)?;
    let objective = sys.objective(&theta)?;
    Ok(RelaxedSolution { blocks: sys.blocks(&theta)?, theta, objective, radius, trace })
}

/// Closed-form fully-connected solution for blocked direct links.
pub fn solve_fc_blocked(channels: &ChannelSet, weights: &ObjectiveWeights) -> Result<RelaxedSolution> {
    closed_form(&StackedSystem::fully(channels, weights)?, 1.0)
}

/// Frank-Wolfe fully-connected solution (direct links allowed).
pub fn solve_fc_direct(channels: &ChannelSet, weights: &ObjectiveWeights, fw: &FwConfig) -> Result<RelaxedSolution> {
    frank_wolfe(&StackedSystem::fully(channels, weights)?, 1.0, fw)
}

/// Relaxed group-connected solution, one sub-problem per priority BS.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedSolution {
    pub topology: RisTopology,
    /// Aligned with the assignment's priority list.
    pub parts: Vec<RelaxedSolution>,
    assignment: GroupAssignment,
}

impl GroupedSolution {
    pub fn assignment(&self) -> &GroupAssignment {
        &self.assignment
    }

    /// Relaxed `Θ*_g` of group `g`.
    pub fn block(&self, g: usize) -> &CMatrix {
        for (p, part) in self.assignment.priorities().iter().zip(&self.parts) {
            if let Some(j) = p.groups.iter().position(|&x| x == g) {
                return &part.blocks[j];
            }
        }
        unreachable!("assignment covers every group")
    }

    /// Block-diagonal relaxed Θ.
    pub fn theta(&self) -> CMatrix {
        let blocks: Vec<CMatrix> = (0..self.topology.groups()).map(|g| self.block(g).clone()).collect();
        crate::linalg::block_diagonal(&blocks)
    }
}

fn solve_grouped(
    channels: &ChannelSet,
    weights: &ObjectiveWeights,
    assignment: &GroupAssignment,
    topology: RisTopology,
    fw: Option<&FwConfig>,
) -> Result<GroupedSolution> {
    assignment.validate(channels.bs.len())?;
    if assignment.groups() != topology.groups() {
        return Err(Error::InvalidAssignment(format!(
            "assignment covers {} groups, topology has {}",
            assignment.groups(),
            topology.groups()
        )));
    }
    let parts = assignment
        .priorities()
        .iter()
        .map(|p| {
            let sys = StackedSystem::grouped(channels, weights, p.bs, &p.groups, topology)?;
            let radius = (p.groups.len() as f64).sqrt();
            match fw {
                None => closed_form(&sys, radius),
                Some(fw) => frank_wolfe(&sys, radius, fw),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GroupedSolution { topology, parts, assignment: assignment.clone() })
}

/// Closed-form group-connected solution for blocked direct links. Each
/// priority BS solves over its own groups on a ball of radius `√G_s`.
pub fn solve_gc_blocked(
    channels: &ChannelSet,
    weights: &ObjectiveWeights,
    assignment: &GroupAssignment,
    topology: RisTopology,
) -> Result<GroupedSolution> {
    solve_grouped(channels, weights, assignment, topology, None)
}

pub fn solve_gc_direct(
    channels: &ChannelSet,
    weights: &ObjectiveWeights,
    assignment: &GroupAssignment,
    topology: RisTopology,
    fw: &FwConfig,
) -> Result<GroupedSolution> {
    solve_grouped(channels, weights, assignment, topology, Some(fw))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodebookSpec {
    pub bits: u32,
    pub self_range: CapacitanceRange,
    pub inter_range: CapacitanceRange,
}

impl Default for CodebookSpec {
    fn default() -> Self {
        Self {
            bits: 6,
            self_range: CapacitanceRange { min: 0.1e-12, max: 2e-12 },
            inter_range: CapacitanceRange { min: 0.001e-12, max: 0.6e-12 },
        }
    }
}

impl CodebookSpec {
    pub fn build(&self, freq: f64, params: &CircuitParams) -> Result<Codebook> {
        build_codebook(freq, self.bits, self.self_range, self.inter_range, params)
    }
}

/// Branch impedances behind a relaxed block: `Z = Z0(I+Θ)(I−Θ)⁻¹`, then
/// read off the π-network. Independent of frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedBranches {
    pub self_branches: Vec<Branch>,
    pub inter_branches: InterBranches,
}

impl RelaxedBranches {
    pub fn from_block(block: &CMatrix, z0: f64) -> Result<Self> {
        let z = impedance_from_scattering(block, z0)?;
        let (self_branches, inter_branches) = retrieve_branch_impedances(&z)?;
        Ok(Self { self_branches, inter_branches })
    }

    /// Nearest codeword per branch, as a symmetric capacitance block.
    pub fn quantize(&self, codebook: &Codebook) -> DMatrix<f64> {
        let n = self.self_branches.len();
        let mut caps = DMatrix::zeros(n, n);
        for p in 0..n {
            caps[(p, p)] = nearest_codeword(&codebook.self_entries, self.self_branches[p]).capacitance;
            for q in p + 1..n {
                let cap = nearest_codeword(&codebook.inter_entries, self.inter_branches.get(p, q)).capacitance;
                caps[(p, q)] = cap;
                caps[(q, p)] = cap;
            }
        }
        caps
    }
}

/// Relaxed block → branches → nearest codewords.
pub fn project_to_codebook(block: &CMatrix, codebook: &Codebook, z0: f64) -> Result<DMatrix<f64>> {
    Ok(RelaxedBranches::from_block(block, z0)?.quantize(codebook))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FcConfiguration {
    pub plan: CapacitancePlan,
    pub relaxed: RelaxedSolution,
    pub target_frequency: f64,
}

/// Fully-connected configuration: relaxed solve (closed form when `fw` is
/// `None`, Frank-Wolfe otherwise), then projection at `target_frequency`.
pub fn configure_fc(
    channels: &ChannelSet,
    weights: &ObjectiveWeights,
    target_frequency: f64,
    codebook: &CodebookSpec,
    params: &CircuitParams,
    fw: Option<&FwConfig>,
) -> Result<FcConfiguration> {
    let relaxed = match fw {
        None => solve_fc_blocked(channels, weights)?,
        Some(fw) => solve_fc_direct(channels, weights, fw)?,
    };
    let cb = codebook.build(target_frequency, params)?;
    let block = project_to_codebook(&relaxed.blocks[0], &cb, params.z0)?;
    let plan = CapacitancePlan::from_blocks(RisTopology::fully(channels.elements())?, vec![block])?;
    Ok(FcConfiguration { plan, relaxed, target_frequency })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GcConfiguration {
    pub plan: CapacitancePlan,
    pub relaxed: GroupedSolution,
}

/// Group-connected configuration: each group is projected with the codebook
/// of its priority BS's frequency. `G = D` gives the single-connected case.
pub fn configure_gc(
    channels: &ChannelSet,
    weights: &ObjectiveWeights,
    assignment: &GroupAssignment,
    topology: RisTopology,
    codebook: &CodebookSpec,
    params: &CircuitParams,
    fw: Option<&FwConfig>,
) -> Result<GcConfiguration> {
    let relaxed = solve_grouped(channels, weights, assignment, topology, fw)?;
    let mut blocks = vec![DMatrix::zeros(0, 0); topology.groups()];
    for p in assignment.priorities() {
        let cb = codebook.build(p.frequency, params)?;
        for &g in &p.groups {
            blocks[g] = project_to_codebook(relaxed.block(g), &cb, params.z0).map_err(|e| e.in_group(g))?;
        }
    }
    let plan = CapacitancePlan::from_blocks(topology, blocks)?;
    Ok(GcConfiguration { plan, relaxed })
}

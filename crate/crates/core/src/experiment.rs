//! Experiment configuration and the named studies.
//!
//! Units in the configuration are the ones people write down (GHz, pF, nH,
//! dBm, metres) and are converted to SI by the accessor methods.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::circuit::{
    scattering_from_capacitances, Architecture, BranchParams, CapacitancePlan, CapacitanceRange,
    CircuitParams, RisTopology, MAX_CODEBOOK_BITS,
};
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::metrics::{
    interference_free_spectral_efficiency, network_sum_power, sum_power_per_bs,
    sum_spectral_efficiency_outdated, synchronized_powers, ChannelKnowledge, TrialResult,
};
use crate::optimizer::{
    solve_fc_blocked, solve_fc_direct, solve_gc_blocked, solve_gc_direct, CodebookSpec, FwConfig,
    GroupAssignment, ObjectiveWeights, RelaxedBranches,
};
use crate::scenario::{
    dbm_to_watts, sample_channels, stream, ChannelSet, DirectLinks, NetworkScenario, Point,
    PowerConfig, Purpose,
};
use crate::sim::{run_monte_carlo, AggregateResult, Slot, TrialContext};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Experiment {
    FreqResponse,
    TargetShift,
    PerBsPower,
    NetworkPower,
    Interference,
}

impl Experiment {
    pub const ALL: [Experiment; 5] = [
        Experiment::FreqResponse,
        Experiment::TargetShift,
        Experiment::PerBsPower,
        Experiment::NetworkPower,
        Experiment::Interference,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::FreqResponse => "freq-response",
            Experiment::TargetShift => "target-shift",
            Experiment::PerBsPower => "per-bs-power",
            Experiment::NetworkPower => "network-power",
            Experiment::Interference => "interference",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|e| e.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Self::ALL.iter().map(|e| e.name()).collect();
            Error::Config(format!("unknown experiment '{s}' (expected one of {})", names.join(", ")))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub bs_positions: Vec<[f64; 2]>,
    pub user_positions: Vec<Vec<[f64; 2]>>,
    pub ris_position: [f64; 2],
    pub antennas: usize,
    pub frequencies_ghz: Vec<f64>,
    pub direct_exponent: f64,
    pub reflected_exponent: f64,
    pub direct_links: DirectLinks,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let s = NetworkScenario::two_bs_default();
        Self {
            bs_positions: s.bs_positions.iter().map(|p| [p.x, p.y]).collect(),
            user_positions: s.user_positions.iter().map(|u| u.iter().map(|p| [p.x, p.y]).collect()).collect(),
            ris_position: [s.ris_position.x, s.ris_position.y],
            antennas: s.antennas,
            frequencies_ghz: s.frequencies.iter().map(|f| f / 1e9).collect(),
            direct_exponent: s.direct_exponent,
            reflected_exponent: s.reflected_exponent,
            direct_links: s.direct_links,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerSection {
    pub transmit_power_dbm: f64,
    pub noise_dbm: f64,
    /// Per-BS user power fractions; equal split when absent.
    pub user_fractions: Option<Vec<Vec<f64>>>,
}

impl Default for PowerSection {
    fn default() -> Self {
        Self { transmit_power_dbm: 20.0, noise_dbm: -40.0, user_fractions: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchConfig {
    pub resistance_ohm: f64,
    pub shunt_inductance_nh: f64,
    pub series_inductance_nh: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CircuitConfig {
    pub z0_ohm: f64,
    pub self_branch: BranchConfig,
    pub inter_branch: BranchConfig,
    pub self_range_pf: [f64; 2],
    pub inter_range_pf: [f64; 2],
    pub bits: u32,
}

impl Default for CircuitConfig {
    fn default() -> Self {
        let p = CircuitParams::default();
        let b = |x: BranchParams| BranchConfig {
            resistance_ohm: x.r,
            shunt_inductance_nh: x.l0 * 1e9,
            series_inductance_nh: x.l * 1e9,
        };
        let cb = CodebookSpec::default();
        Self {
            z0_ohm: p.z0,
            self_branch: b(p.self_branch),
            inter_branch: b(p.inter_branch),
            self_range_pf: [cb.self_range.min * 1e12, cb.self_range.max * 1e12],
            inter_range_pf: [cb.inter_range.min * 1e12, cb.inter_range.max * 1e12],
            bits: cb.bits,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizationConfig {
    /// Per-BS user weights; `1/K_b` when absent.
    pub user_weights: Option<Vec<Vec<f64>>>,
    /// Tuning frequency of the fully-connected surface. When absent, the
    /// carrier of the BS with the largest weight.
    pub target_frequency_ghz: Option<f64>,
    pub fw_iterations: usize,
    /// Number of groups of the group-connected surface.
    pub groups: usize,
}

impl Default for OptimizationConfig {
    fn default() -> Self {
        Self { user_weights: None, target_frequency_ghz: None, fw_iterations: FwConfig::default().iterations, groups: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub trials: usize,
    pub seed: u64,
    pub architectures: Vec<Architecture>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            trials: 200,
            seed: 1,
            architectures: vec![
                Architecture::FullyConnected,
                Architecture::GroupConnected,
                Architecture::SingleConnected,
            ],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencyGrid {
    pub start_ghz: f64,
    pub stop_ghz: f64,
    pub step_ghz: f64,
}

impl FrequencyGrid {
    /// Grid values in GHz, rounded to the kHz so that sums like 1 + 13·0.5
    /// print cleanly.
    pub fn values_ghz(&self) -> Vec<f64> {
        let n = ((self.stop_ghz - self.start_ghz) / self.step_ghz + 1e-9).floor() as usize + 1;
        (0..n).map(|i| ((self.start_ghz + i as f64 * self.step_ghz) * 1e6).round() / 1e6).collect()
    }

    fn check(&self, key: &str, issues: &mut Vec<ConfigIssue>) {
        if !(self.start_ghz > 0.0 && self.stop_ghz >= self.start_ghz && self.step_ghz > 0.0)
            || !(self.stop_ghz.is_finite() && self.step_ghz.is_finite())
        {
            issues.push(ConfigIssue::new(key, "frequency grid needs 0 < start <= stop and step > 0"));
        } else if (self.stop_ghz - self.start_ghz) / self.step_ghz > 1e5 {
            issues.push(ConfigIssue::new(key, "frequency grid has more than 1e5 points"));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FreqResponseConfig {
    pub elements: Vec<usize>,
    pub grid: FrequencyGrid,
    /// The single user served by the first BS.
    pub user: [f64; 2],
}

impl Default for FreqResponseConfig {
    fn default() -> Self {
        Self {
            elements: vec![60, 100],
            grid: FrequencyGrid { start_ghz: 1.0, stop_ghz: 16.0, step_ghz: 0.5 },
            user: [25.0, 10.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TargetShiftConfig {
    pub elements: usize,
    pub targets_ghz: Vec<f64>,
    pub grid: FrequencyGrid,
    pub user: [f64; 2],
}

impl Default for TargetShiftConfig {
    fn default() -> Self {
        Self {
            elements: 100,
            targets_ghz: vec![7.4, 8.0],
            grid: FrequencyGrid { start_ghz: 4.0, stop_ghz: 12.0, step_ghz: 0.2 },
            user: [25.0, 10.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerSweepConfig {
    pub elements: Vec<usize>,
    /// BS weight vectors, one curve set each.
    pub weight_sets: Vec<Vec<f64>>,
}

impl Default for PowerSweepConfig {
    fn default() -> Self {
        Self {
            elements: vec![20, 40, 60, 80, 100],
            weight_sets: vec![vec![0.3, 0.7], vec![1.0, 0.0], vec![0.0, 1.0]],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InterferenceConfig {
    pub ris_positions: Vec<[f64; 2]>,
    pub elements: Vec<usize>,
    /// Carrier of the second BS, which is unaware of the surface.
    pub victim_frequency_ghz: f64,
    pub weights: Vec<f64>,
    pub victim_bs: usize,
}

impl Default for InterferenceConfig {
    fn default() -> Self {
        Self {
            ris_positions: vec![[20.0, 20.0], [40.0, 20.0], [60.0, 20.0]],
            elements: vec![20, 40, 60, 80],
            victim_frequency_ghz: 8.4,
            weights: vec![1.0, 0.0],
            victim_bs: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: String,
    pub plotdata: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: "results".into(), plotdata: false }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    pub power: PowerSection,
    pub circuit: CircuitConfig,
    pub optimization: OptimizationConfig,
    pub simulation: SimulationConfig,
    pub freq_response: FreqResponseConfig,
    pub target_shift: TargetShiftConfig,
    pub power_sweep: PowerSweepConfig,
    pub interference: InterferenceConfig,
    pub output: OutputConfig,
}

/// A violated rule, keyed by the dotted config path it concerns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    pub key: String,
    pub message: String,
}

impl ConfigIssue {
    fn new(key: &str, message: impl Into<String>) -> Self {
        Self { key: key.to_string(), message: message.into() }
    }
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.key, self.message)
    }
}

fn point(p: [f64; 2]) -> Point {
    Point::new(p[0], p[1])
}

fn finite_positive(x: f64) -> bool {
    x > 0.0 && x.is_finite()
}

impl ExperimentConfig {
    pub fn network_scenario(&self) -> NetworkScenario {
        let s = &self.scenario;
        NetworkScenario {
            bs_positions: s.bs_positions.iter().copied().map(point).collect(),
            user_positions: s.user_positions.iter().map(|u| u.iter().copied().map(point).collect()).collect(),
            ris_position: point(s.ris_position),
            antennas: s.antennas,
            frequencies: s.frequencies_ghz.iter().map(|f| f * 1e9).collect(),
            direct_exponent: s.direct_exponent,
            reflected_exponent: s.reflected_exponent,
            direct_links: s.direct_links,
        }
    }

    pub fn circuit_params(&self) -> CircuitParams {
        let b = |x: &BranchConfig| BranchParams {
            r: x.resistance_ohm,
            l0: x.shunt_inductance_nh * 1e-9,
            l: x.series_inductance_nh * 1e-9,
        };
        CircuitParams {
            self_branch: b(&self.circuit.self_branch),
            inter_branch: b(&self.circuit.inter_branch),
            z0: self.circuit.z0_ohm,
        }
    }

    pub fn codebook_spec(&self) -> CodebookSpec {
        let r = |x: [f64; 2]| CapacitanceRange { min: x[0] * 1e-12, max: x[1] * 1e-12 };
        CodebookSpec {
            bits: self.circuit.bits,
            self_range: r(self.circuit.self_range_pf),
            inter_range: r(self.circuit.inter_range_pf),
        }
    }

    pub fn fw(&self) -> FwConfig {
        FwConfig { iterations: self.optimization.fw_iterations }
    }

    /// Power settings for `scenario` (which may differ in users from the
    /// configured one, e.g. the single-user frequency study).
    pub fn power_config(&self, scenario: &NetworkScenario) -> PowerConfig {
        let mut p = PowerConfig::uniform(
            scenario,
            dbm_to_watts(self.power.transmit_power_dbm),
            dbm_to_watts(self.power.noise_dbm),
        );
        if let Some(a) = &self.power.user_fractions {
            if a.len() == scenario.num_bs() && a.iter().zip(&p.alpha).all(|(x, y)| x.len() == y.len()) {
                p.alpha = a.clone();
            }
        }
        p
    }

    fn weights(&self, mu: &[f64], scenario: &NetworkScenario) -> ObjectiveWeights {
        let nu = match &self.optimization.user_weights {
            Some(nu) if nu.len() == scenario.num_bs() && (0..nu.len()).all(|b| nu[b].len() == scenario.users(b)) => {
                nu.clone()
            }
            _ => (0..scenario.num_bs()).map(|b| vec![1.0 / scenario.users(b) as f64; scenario.users(b)]).collect(),
        };
        ObjectiveWeights { mu: mu.to_vec(), nu }
    }

    /// Every violated rule; empty when the configuration is usable.
    pub fn validate(&self) -> Vec<ConfigIssue> {
        let mut out = Vec::new();
        let s = &self.scenario;
        let nb = s.bs_positions.len();
        if nb == 0 {
            out.push(ConfigIssue::new("scenario.bs_positions", "at least one BS is required"));
        }
        if s.user_positions.len() != nb {
            out.push(ConfigIssue::new("scenario.user_positions", format!("{} user lists for {nb} BSs", s.user_positions.len())));
        }
        if s.frequencies_ghz.len() != nb {
            out.push(ConfigIssue::new("scenario.frequencies_ghz", format!("{} frequencies for {nb} BSs", s.frequencies_ghz.len())));
        }
        if s.frequencies_ghz.iter().any(|f| !finite_positive(*f)) {
            out.push(ConfigIssue::new("scenario.frequencies_ghz", "frequencies must be positive"));
        }
        if s.antennas == 0 {
            out.push(ConfigIssue::new("scenario.antennas", "need at least one antenna"));
        }
        let max_users = s.user_positions.iter().map(Vec::len).max().unwrap_or(0);
        if s.user_positions.iter().any(Vec::is_empty) {
            out.push(ConfigIssue::new("scenario.user_positions", "every BS needs at least one user"));
        }
        if max_users > s.antennas {
            out.push(ConfigIssue::new("scenario.antennas", format!("zero-forcing needs M >= K (M = {}, K = {max_users})", s.antennas)));
        }
        if !finite_positive(s.direct_exponent) {
            out.push(ConfigIssue::new("scenario.direct_exponent", "path-loss exponent must be positive"));
        }
        if !finite_positive(s.reflected_exponent) {
            out.push(ConfigIssue::new("scenario.reflected_exponent", "path-loss exponent must be positive"));
        }
        let ris = point(s.ris_position);
        let all_points = s.bs_positions.iter().chain(s.user_positions.iter().flatten());
        if all_points.clone().chain(std::iter::once(&s.ris_position)).any(|p| !(p[0].is_finite() && p[1].is_finite())) {
            out.push(ConfigIssue::new("scenario", "positions must be finite"));
        } else {
            if all_points.clone().any(|p| point(*p).distance(&ris) == 0.0) {
                out.push(ConfigIssue::new("scenario.ris_position", "the surface coincides with a BS or user"));
            }
            for (b, users) in s.user_positions.iter().enumerate() {
                if let Some(bs) = s.bs_positions.get(b) {
                    if users.iter().any(|u| point(*u).distance(&point(*bs)) == 0.0) {
                        out.push(ConfigIssue::new("scenario.user_positions", format!("a user of BS {b} sits on the BS")));
                    }
                }
            }
        }

        let p = &self.power;
        if !p.transmit_power_dbm.is_finite() {
            out.push(ConfigIssue::new("power.transmit_power_dbm", "must be finite"));
        }
        if !p.noise_dbm.is_finite() {
            out.push(ConfigIssue::new("power.noise_dbm", "must be finite"));
        }
        if let Some(a) = &p.user_fractions {
            let shape_ok = a.len() == nb && a.iter().zip(&s.user_positions).all(|(x, u)| x.len() == u.len());
            if !shape_ok {
                out.push(ConfigIssue::new("power.user_fractions", "needs one fraction per configured user"));
            }
            if a.iter().any(|x| x.iter().any(|v| !(*v >= 0.0)) || x.iter().sum::<f64>() > 1.0 + 1e-12) {
                out.push(ConfigIssue::new("power.user_fractions", "fractions must be >= 0 and sum to at most 1 per BS"));
            }
        }

        let c = &self.circuit;
        if !finite_positive(c.z0_ohm) {
            out.push(ConfigIssue::new("circuit.z0_ohm", "reference impedance must be positive"));
        }
        for (key, b) in [("circuit.self_branch", &c.self_branch), ("circuit.inter_branch", &c.inter_branch)] {
            if !(b.resistance_ohm >= 0.0 && b.resistance_ohm.is_finite()) {
                out.push(ConfigIssue::new(key, "resistance must be >= 0"));
            }
            if !finite_positive(b.shunt_inductance_nh) {
                out.push(ConfigIssue::new(key, "shunt inductance must be positive"));
            }
            if !(b.series_inductance_nh >= 0.0 && b.series_inductance_nh.is_finite()) {
                out.push(ConfigIssue::new(key, "series inductance must be >= 0"));
            }
        }
        for (key, r) in [("circuit.self_range_pf", c.self_range_pf), ("circuit.inter_range_pf", c.inter_range_pf)] {
            if !(r[0] > 0.0 && r[1] > r[0] && r[1].is_finite()) {
                out.push(ConfigIssue::new(key, format!("capacitance range must satisfy 0 < min < max, got [{}, {}]", r[0], r[1])));
            }
        }
        if c.bits == 0 || c.bits > MAX_CODEBOOK_BITS {
            out.push(ConfigIssue::new("circuit.bits", format!("codebook bits must be in 1..={MAX_CODEBOOK_BITS}")));
        }

        let o = &self.optimization;
        if let Some(nu) = &o.user_weights {
            let shape_ok = nu.len() == nb && nu.iter().zip(&s.user_positions).all(|(x, u)| x.len() == u.len());
            if !shape_ok {
                out.push(ConfigIssue::new("optimization.user_weights", "needs one weight per configured user"));
            }
            if nu.iter().flatten().any(|v| !(*v >= 0.0 && v.is_finite())) {
                out.push(ConfigIssue::new("optimization.user_weights", "weights must be finite and >= 0"));
            }
        }
        if let Some(f) = o.target_frequency_ghz {
            if !finite_positive(f) {
                out.push(ConfigIssue::new("optimization.target_frequency_ghz", "must be positive"));
            }
        }
        if o.fw_iterations == 0 {
            out.push(ConfigIssue::new("optimization.fw_iterations", "need at least one iteration"));
        }
        if o.groups == 0 {
            out.push(ConfigIssue::new("optimization.groups", "need at least one group"));
        }

        if self.simulation.trials == 0 {
            out.push(ConfigIssue::new("simulation.trials", "need at least one trial"));
        }
        if self.simulation.architectures.is_empty() {
            out.push(ConfigIssue::new("simulation.architectures", "list at least one architecture"));
        }

        let fr = &self.freq_response;
        self.check_elements("freq_response.elements", &fr.elements, 1, &mut out);
        fr.grid.check("freq_response.grid", &mut out);
        if nb > 0 && point(fr.user).distance(&ris) == 0.0 {
            out.push(ConfigIssue::new("freq_response.user", "user coincides with the surface"));
        }

        let ts = &self.target_shift;
        self.check_elements("target_shift.elements", &[ts.elements], 1, &mut out);
        ts.grid.check("target_shift.grid", &mut out);
        if ts.targets_ghz.is_empty() || ts.targets_ghz.iter().any(|f| !finite_positive(*f)) {
            out.push(ConfigIssue::new("target_shift.targets_ghz", "need positive target frequencies"));
        }
        if nb > 0 && point(ts.user).distance(&ris) == 0.0 {
            out.push(ConfigIssue::new("target_shift.user", "user coincides with the surface"));
        }

        let ps = &self.power_sweep;
        if ps.weight_sets.is_empty() {
            out.push(ConfigIssue::new("power_sweep.weight_sets", "need at least one weight set"));
        }
        let mut priorities = 1;
        for w in &ps.weight_sets {
            if let Some(msg) = weight_problem(w, nb) {
                out.push(ConfigIssue::new("power_sweep.weight_sets", msg));
            }
            priorities = priorities.max(w.iter().filter(|x| **x > 0.0).count());
        }
        self.check_elements("power_sweep.elements", &ps.elements, priorities, &mut out);

        let it = &self.interference;
        if nb < 2 {
            out.push(ConfigIssue::new("interference", "the interference study needs two BSs"));
        }
        if it.victim_bs >= nb {
            out.push(ConfigIssue::new("interference.victim_bs", "no such BS"));
        }
        if !finite_positive(it.victim_frequency_ghz) {
            out.push(ConfigIssue::new("interference.victim_frequency_ghz", "must be positive"));
        }
        if let Some(msg) = weight_problem(&it.weights, nb) {
            out.push(ConfigIssue::new("interference.weights", msg));
        }
        if it.ris_positions.is_empty() {
            out.push(ConfigIssue::new("interference.ris_positions", "need at least one position"));
        }
        let pts: Vec<&[f64; 2]> = s.bs_positions.iter().chain(s.user_positions.iter().flatten()).collect();
        if it.ris_positions.iter().any(|r| pts.iter().any(|p| point(**p).distance(&point(*r)) == 0.0)) {
            out.push(ConfigIssue::new("interference.ris_positions", "a surface position coincides with a BS or user"));
        }
        let prio = it.weights.iter().filter(|x| **x > 0.0).count().max(1);
        self.check_elements("interference.elements", &it.elements, prio, &mut out);

        if self.output.dir.is_empty() {
            out.push(ConfigIssue::new("output.dir", "output directory must not be empty"));
        }
        out
    }

    fn check_elements(&self, key: &str, elements: &[usize], priorities: usize, out: &mut Vec<ConfigIssue>) {
        if elements.is_empty() {
            out.push(ConfigIssue::new(key, "need at least one element count"));
        }
        let g = self.optimization.groups;
        let gc = self.simulation.architectures.contains(&Architecture::GroupConnected);
        for &d in elements {
            if d == 0 {
                out.push(ConfigIssue::new(key, "element counts must be positive"));
                continue;
            }
            if gc && g > 0 {
                if d % g != 0 {
                    out.push(ConfigIssue::new("optimization.groups", format!("G must divide D (G = {g}, D = {d} in {key})")));
                } else if g < priorities {
                    out.push(ConfigIssue::new("optimization.groups", format!("G = {g} groups cannot serve {priorities} BSs (D = {d} in {key})")));
                }
            }
            if d < priorities {
                out.push(ConfigIssue::new(key, format!("D = {d} elements cannot serve {priorities} BSs")));
            }
        }
    }

    pub fn check(&self) -> Result<()> {
        let issues = self.validate();
        if issues.is_empty() {
            Ok(())
        } else {
            let lines: Vec<String> = issues.iter().map(|i| i.to_string()).collect();
            Err(Error::Config(lines.join("; ")))
        }
    }
}

fn weight_problem(w: &[f64], nb: usize) -> Option<String> {
    if w.len() != nb {
        Some(format!("{} weights for {nb} BSs", w.len()))
    } else if w.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
        Some("weights must be finite and >= 0".into())
    } else if w.iter().all(|x| *x == 0.0) {
        Some("at least one weight must be positive".into())
    } else {
        None
    }
}

/// A relaxed design reduced to branch impedances, one entry per group, with
/// the frequency each group is tuned for.
#[derive(Debug, Clone)]
pub struct Design {
    pub topology: RisTopology,
    pub groups: Vec<(RelaxedBranches, f64)>,
}

impl Design {
    /// Quantises every group at its own tuning frequency, or at `retune`
    /// for all of them.
    pub fn plan(&self, spec: &CodebookSpec, params: &CircuitParams, retune: Option<f64>) -> Result<CapacitancePlan> {
        let mut cache: Vec<(f64, crate::circuit::Codebook)> = Vec::new();
        let mut blocks = Vec::with_capacity(self.groups.len());
        for (branches, f) in &self.groups {
            let f = retune.unwrap_or(*f);
            let idx = match cache.iter().position(|(x, _)| *x == f) {
                Some(i) => i,
                None => {
                    cache.push((f, spec.build(f, params)?));
                    cache.len() - 1
                }
            };
            blocks.push(branches.quantize(&cache[idx].1));
        }
        CapacitancePlan::from_blocks(self.topology, blocks)
    }
}

/// Relaxed solve for one architecture followed by branch retrieval.
///
/// Fully-connected: one solve over every BS with positive weight, tuned at
/// `target`. Group- and single-connected: the groups are split contiguously
/// among the BSs with positive weight and each BS's share is tuned at its
/// own carrier.
#[allow(clippy::too_many_arguments)]
pub fn design(
    arch: Architecture,
    channels: &ChannelSet,
    weights: &ObjectiveWeights,
    scenario: &NetworkScenario,
    target: f64,
    groups: usize,
    fw: &FwConfig,
    params: &CircuitParams,
) -> Result<Design> {
    let d = channels.elements();
    let direct = scenario.direct_links == DirectLinks::Available;
    match arch {
        Architecture::FullyConnected => {
            let sol = if direct { solve_fc_direct(channels, weights, fw)? } else { solve_fc_blocked(channels, weights)? };
            let b = RelaxedBranches::from_block(&sol.blocks[0], params.z0)?;
            Ok(Design { topology: RisTopology::fully(d)?, groups: vec![(b, target)] })
        }
        Architecture::GroupConnected | Architecture::SingleConnected => {
            let g = if arch == Architecture::SingleConnected { d } else { groups };
            let topology = RisTopology::new(d, g)?;
            let targets: Vec<(usize, f64)> = weights
                .mu
                .iter()
                .enumerate()
                .filter(|(_, m)| **m > 0.0)
                .map(|(b, _)| (b, scenario.frequencies[b]))
                .collect();
            let assignment = GroupAssignment::contiguous(g, &targets)?;
            let sol = if direct {
                solve_gc_direct(channels, weights, &assignment, topology, fw)?
            } else {
                solve_gc_blocked(channels, weights, &assignment, topology)?
            };
            let mut out = vec![None; g];
            for p in assignment.priorities() {
                for &grp in &p.groups {
                    let b = RelaxedBranches::from_block(sol.block(grp), params.z0).map_err(|e| e.in_group(grp))?;
                    out[grp] = Some((b, p.frequency));
                }
            }
            Ok(Design { topology, groups: out.into_iter().map(|x| x.expect("assignment covers all groups")).collect() })
        }
    }
}

/// Θ(Ĉ, f) for each BS carrier.
pub fn responses(plan: &CapacitancePlan, scenario: &NetworkScenario, params: &CircuitParams) -> Result<Vec<CMatrix>> {
    scenario
        .frequencies
        .iter()
        .map(|&f| Ok(scattering_from_capacitances(plan, f, params)?.theta))
        .collect()
}

/// Synchronised powers of every user for one plan.
pub fn evaluate_plan(
    trial: &TrialContext,
    channels: &ChannelSet,
    plan: &CapacitancePlan,
    scenario: &NetworkScenario,
    params: &CircuitParams,
    power: &PowerConfig,
) -> Result<TrialResult> {
    let thetas = responses(plan, scenario, params)?;
    let user_power = synchronized_powers(channels, &thetas, power)?;
    let bs_power = sum_power_per_bs(&user_power);
    let network_power = network_sum_power(&bs_power);
    Ok(TrialResult {
        trial: trial.trial,
        seed: trial.seed,
        user_power,
        bs_spectral_efficiency: vec![None; bs_power.len()],
        bs_power,
        network_power,
    })
}

/// One output table.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    /// File stem, e.g. `freq-response-d100`.
    pub name: String,
    /// Label of the x column.
    pub x_label: String,
    pub result: AggregateResult,
}

const MW: f64 = 1e3;

fn draw(ctx: &TrialContext, scenario: &NetworkScenario, elements: usize) -> Result<ChannelSet> {
    sample_channels(scenario, elements, &mut stream(ctx.seed, ctx.trial, Purpose::Channels, ctx.attempt))
}

fn mu_label(mu: &[f64]) -> String {
    let parts: Vec<String> = mu.iter().map(|m| format!("{m}")).collect();
    format!("mu={}", parts.join("/"))
}

fn pos_label(p: [f64; 2]) -> String {
    format!("ris=({},{})", p[0], p[1])
}

impl ExperimentConfig {
    fn single_user_scenario(&self, user: [f64; 2]) -> NetworkScenario {
        let mut s = self.network_scenario();
        s.bs_positions.truncate(1);
        s.frequencies.truncate(1);
        s.user_positions = vec![vec![point(user)]];
        s
    }

    /// Tuning frequency of the fully-connected surface for weights `mu`.
    pub fn fc_target(&self, mu: &[f64], scenario: &NetworkScenario) -> f64 {
        if let Some(f) = self.optimization.target_frequency_ghz {
            return f * 1e9;
        }
        let best = mu
            .iter()
            .enumerate()
            .fold(0, |a, (i, m)| if *m > mu[a] { i } else { a });
        scenario.frequencies[best]
    }

    pub fn run(&self, experiment: Experiment) -> Result<Vec<ResultTable>> {
        self.check()?;
        match experiment {
            Experiment::FreqResponse => self.freq_response(),
            Experiment::TargetShift => self.target_shift(),
            Experiment::PerBsPower => self.power_sweep(false),
            Experiment::NetworkPower => self.power_sweep(true),
            Experiment::Interference => self.interference(),
        }
    }

    /// Received power of a single user versus carrier, with the surface
    /// re-tuned at every grid frequency.
    fn freq_response(&self) -> Result<Vec<ResultTable>> {
        let scn = self.single_user_scenario(self.freq_response.user);
        let power = self.power_config(&scn);
        let params = self.circuit_params();
        let spec = self.codebook_spec();
        let fw = self.fw();
        let weights = self.weights(&[1.0], &scn);
        let archs = &self.simulation.architectures;
        let grid = self.freq_response.grid.values_ghz();
        let mut tables = Vec::new();
        for &d in &self.freq_response.elements {
            let series = format!("D={d}");
            let slots: Vec<Slot> = archs
                .iter()
                .flat_map(|&a| {
                    grid.iter().map(move |&x| (a, x))
                })
                .map(|(a, x)| Slot { x, series: series.clone(), architecture: a, metric: "received_power_mw".into() })
                .collect();
            let result = run_monte_carlo(&slots, self.simulation.seed, self.simulation.trials, |ctx| {
                let ch = draw(&ctx, &scn, d)?;
                let mut out = Vec::with_capacity(slots.len());
                for &a in archs {
                    let des = design(a, &ch, &weights, &scn, scn.frequencies[0], self.optimization.groups, &fw, &params)?;
                    for &f in &grid {
                        let plan = des.plan(&spec, &params, Some(f * 1e9))?;
                        let theta = scattering_from_capacitances(&plan, f * 1e9, &params)?.theta;
                        let p = synchronized_powers(&ch, &[theta], &power)?;
                        out.push(p[0][0] * MW);
                    }
                }
                Ok(out)
            })?;
            tables.push(ResultTable { name: format!("freq-response-d{d}"), x_label: "frequency_ghz".into(), result });
        }
        Ok(tables)
    }

    /// Surface tuned once at each target, then evaluated across the grid.
    fn target_shift(&self) -> Result<Vec<ResultTable>> {
        let cfg = &self.target_shift;
        let scn = self.single_user_scenario(cfg.user);
        let power = self.power_config(&scn);
        let params = self.circuit_params();
        let spec = self.codebook_spec();
        let fw = self.fw();
        let weights = self.weights(&[1.0], &scn);
        let archs = &self.simulation.architectures;
        let grid = cfg.grid.values_ghz();
        let mut slots = Vec::new();
        for t in &cfg.targets_ghz {
            for &a in archs {
                for &x in &grid {
                    slots.push(Slot { x, series: format!("target={t}GHz"), architecture: a, metric: "received_power_mw".into() });
                }
            }
        }
        let d = cfg.elements;
        let result = run_monte_carlo(&slots, self.simulation.seed, self.simulation.trials, |ctx| {
            let ch = draw(&ctx, &scn, d)?;
            let designs = archs
                .iter()
                .map(|&a| design(a, &ch, &weights, &scn, scn.frequencies[0], self.optimization.groups, &fw, &params))
                .collect::<Result<Vec<_>>>()?;
            let mut out = Vec::with_capacity(slots.len());
            for t in &cfg.targets_ghz {
                for des in &designs {
                    let plan = des.plan(&spec, &params, Some(t * 1e9))?;
                    for &f in &grid {
                        let theta = scattering_from_capacitances(&plan, f * 1e9, &params)?.theta;
                        let p = synchronized_powers(&ch, &[theta], &power)?;
                        out.push(p[0][0] * MW);
                    }
                }
            }
            Ok(out)
        })?;
        Ok(vec![ResultTable { name: "target-shift".into(), x_label: "frequency_ghz".into(), result }])
    }

    /// Sum power per BS (or network total) versus element count, one table
    /// per weight set.
    fn power_sweep(&self, network: bool) -> Result<Vec<ResultTable>> {
        let scn = self.network_scenario();
        let power = self.power_config(&scn);
        let params = self.circuit_params();
        let spec = self.codebook_spec();
        let fw = self.fw();
        let archs = &self.simulation.architectures;
        let metrics: Vec<String> = if network {
            vec!["network_sum_power_mw".into()]
        } else {
            (1..=scn.num_bs()).map(|b| format!("bs{b}_sum_power_mw")).collect()
        };
        let mut tables = Vec::new();
        for mu in &self.power_sweep.weight_sets {
            let weights = self.weights(mu, &scn);
            let target = self.fc_target(mu, &scn);
            let series = mu_label(mu);
            let mut slots = Vec::new();
            for &d in &self.power_sweep.elements {
                for &a in archs {
                    for m in &metrics {
                        slots.push(Slot { x: d as f64, series: series.clone(), architecture: a, metric: m.clone() });
                    }
                }
            }
            let result = run_monte_carlo(&slots, self.simulation.seed, self.simulation.trials, |ctx| {
                let mut out = Vec::with_capacity(slots.len());
                for &d in &self.power_sweep.elements {
                    let ch = draw(&ctx, &scn, d)?;
                    for &a in archs {
                        let des = design(a, &ch, &weights, &scn, target, self.optimization.groups, &fw, &params)?;
                        let plan = des.plan(&spec, &params, None)?;
                        let r = evaluate_plan(&ctx, &ch, &plan, &scn, &params, &power)?;
                        if network {
                            out.push(r.network_power * MW);
                        } else {
                            out.extend(r.bs_power.iter().map(|p| p * MW));
                        }
                    }
                }
                Ok(out)
            })?;
            let stem = if network { "network-power" } else { "per-bs-power" };
            let tag: Vec<String> = mu.iter().map(|m| format!("{m}")).collect();
            tables.push(ResultTable { name: format!("{stem}-mu-{}", tag.join("-")), x_label: "elements".into(), result });
        }
        Ok(tables)
    }

    /// Spectral efficiency of a BS that does not know about the surface,
    /// against the same BS without the surface, per surface position.
    fn interference(&self) -> Result<Vec<ResultTable>> {
        let it = &self.interference;
        let mut base = self.network_scenario();
        base.direct_links = DirectLinks::Available;
        base.frequencies[it.victim_bs] = it.victim_frequency_ghz * 1e9;
        let power = self.power_config(&base);
        let params = self.circuit_params();
        let spec = self.codebook_spec();
        let fw = self.fw();
        let archs = &self.simulation.architectures;
        let weights = self.weights(&it.weights, &base);
        let target = self.fc_target(&it.weights, &base);
        let victim = it.victim_bs;
        let metrics = ["se_outdated", "se_reference", "se_degradation"];
        let mut tables = Vec::new();
        for &pos in &it.ris_positions {
            let mut scn = base.clone();
            scn.ris_position = point(pos);
            let series = pos_label(pos);
            let mut slots = Vec::new();
            for &d in &it.elements {
                for &a in archs {
                    for m in metrics {
                        slots.push(Slot { x: d as f64, series: series.clone(), architecture: a, metric: m.into() });
                    }
                }
            }
            let result = run_monte_carlo(&slots, self.simulation.seed, self.simulation.trials, |ctx| {
                let mut out = Vec::with_capacity(slots.len());
                for &d in &it.elements {
                    let ch = draw(&ctx, &scn, d)?;
                    let reference = interference_free_spectral_efficiency(&ch, victim, &power)?;
                    for &a in archs {
                        let des = design(a, &ch, &weights, &scn, target, self.optimization.groups, &fw, &params)?;
                        let plan = des.plan(&spec, &params, None)?;
                        let theta = scattering_from_capacitances(&plan, scn.frequencies[victim], &params)?.theta;
                        let se = sum_spectral_efficiency_outdated(&ch, victim, &theta, &ChannelKnowledge::RisFree, &power)?;
                        out.extend([se, reference, reference - se]);
                    }
                }
                Ok(out)
            })?;
            tables.push(ResultTable {
                name: format!("interference-ris-{}-{}", pos[0], pos[1]),
                x_label: "elements".into(),
                result,
            });
        }
        Ok(tables)
    }
}

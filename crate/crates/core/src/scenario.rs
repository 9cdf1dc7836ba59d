//! Network geometry, path loss, Rayleigh channel draws and zero-forcing
//! precoding.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, c64, CMatrix, CVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DirectLinks {
    Blocked,
    Available,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkScenario {
    pub bs_positions: Vec<Point>,
    /// Users served by each BS.
    pub user_positions: Vec<Vec<Point>>,
    pub ris_position: Point,
    /// Antennas per BS.
    pub antennas: usize,
    /// Carrier of each BS in Hz.
    pub frequencies: Vec<f64>,
    pub direct_exponent: f64,
    pub reflected_exponent: f64,
    pub direct_links: DirectLinks,
}

impl NetworkScenario {
    /// Two BSs 80 m apart, two users each, RIS at (40, 20).
    pub fn two_bs_default() -> Self {
        Self {
            bs_positions: vec![Point::new(0.0, 0.0), Point::new(80.0, 0.0)],
            user_positions: vec![
                vec![Point::new(25.0, 10.0), Point::new(35.0, 0.0)],
                vec![Point::new(70.0, 10.0), Point::new(55.0, 0.0)],
            ],
            ris_position: Point::new(40.0, 20.0),
            antennas: 40,
            frequencies: vec![7.4e9, 8.0e9],
            direct_exponent: 3.5,
            reflected_exponent: 2.5,
            direct_links: DirectLinks::Blocked,
        }
    }

    pub fn num_bs(&self) -> usize {
        self.bs_positions.len()
    }

    pub fn users(&self, b: usize) -> usize {
        self.user_positions[b].len()
    }

    pub fn validate(&self) -> Result<()> {
        let b = self.num_bs();
        if b == 0 {
            return Err(Error::InvalidArgument("scenario needs at least one BS".into()));
        }
        if self.user_positions.len() != b || self.frequencies.len() != b {
            return Err(Error::InvalidArgument(format!(
                "{b} BSs but {} user lists and {} frequencies",
                self.user_positions.len(),
                self.frequencies.len()
            )));
        }
        if self.antennas == 0 {
            return Err(Error::InvalidArgument("M must be positive".into()));
        }
        for (i, users) in self.user_positions.iter().enumerate() {
            if users.is_empty() {
                return Err(Error::InvalidArgument(format!("BS {i} has no users")));
            }
            if users.len() > self.antennas {
                return Err(Error::InvalidArgument(format!(
                    "BS {i} serves {} users with only {} antennas",
                    users.len(),
                    self.antennas
                )));
            }
        }
        let points = self
            .bs_positions
            .iter()
            .chain(self.user_positions.iter().flatten())
            .chain(std::iter::once(&self.ris_position));
        for p in points {
            if !(p.x.is_finite() && p.y.is_finite()) {
                return Err(Error::InvalidArgument(format!("non-finite position {p:?}")));
            }
        }
        if !(self.direct_exponent > 0.0 && self.reflected_exponent > 0.0) {
            return Err(Error::InvalidArgument("path-loss exponents must be positive".into()));
        }
        if self.frequencies.iter().any(|f| !(*f > 0.0 && f.is_finite())) {
            return Err(Error::InvalidArgument("frequencies must be positive".into()));
        }
        Ok(())
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerConfig {
    /// Transmit budget per BS in W.
    pub total_power: f64,
    /// Power fraction of each user, per BS.
    pub alpha: Vec<Vec<f64>>,
    /// Noise variance in W.
    pub noise: f64,
}

impl PowerConfig {
    /// Equal split `α_bk = 1/K_b`.
    pub fn uniform(scenario: &NetworkScenario, total_power: f64, noise: f64) -> Self {
        let alpha = (0..scenario.num_bs())
            .map(|b| {
                let k = scenario.users(b);
                vec![1.0 / k as f64; k]
            })
            .collect();
        Self { total_power, alpha, noise }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.total_power >= 0.0 && self.total_power.is_finite()) {
            return Err(Error::InvalidArgument("P must be nonnegative".into()));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::InvalidArgument("noise variance must be nonnegative".into()));
        }
        for (b, a) in self.alpha.iter().enumerate() {
            if a.iter().any(|x| !(*x >= 0.0)) || a.iter().sum::<f64>() > 1.0 + 1e-12 {
                return Err(Error::InvalidArgument(format!(
                    "power fractions of BS {b} must be >= 0 and sum to at most 1"
                )));
            }
        }
        Ok(())
    }
}

pub fn path_gain(distance: f64, exponent: f64) -> Result<f64> {
    if !(distance > 0.0 && distance.is_finite()) {
        return Err(Error::InvalidArgument(format!("distance must be positive, got {distance}")));
    }
    Ok(distance.powf(-exponent))
}

/// What a random stream is used for; part of the stream key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    Channels,
    Baseline,
    Custom(u32),
}

impl Purpose {
    fn tag(self) -> u32 {
        match self {
            Purpose::Channels => 1,
            Purpose::Baseline => 2,
            Purpose::Custom(t) => 0x1000 + t,
        }
    }
}

/// Independent ChaCha stream keyed by `(seed, trial, purpose, attempt)`.
pub fn stream(seed: u64, trial: u64, purpose: Purpose, attempt: u32) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&trial.to_le_bytes());
    key[16..20].copy_from_slice(&purpose.tag().to_le_bytes());
    key[20..24].copy_from_slice(&attempt.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

fn cn01(rng: &mut impl Rng) -> c64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserChannels {
    /// RIS → user, length D.
    pub f: CVector,
    /// BS → user, length M (zero when blocked).
    pub h: CVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BsChannels {
    /// BS → RIS, D×M.
    pub g: CMatrix,
    pub users: Vec<UserChannels>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub bs: Vec<BsChannels>,
}

impl ChannelSet {
    pub fn elements(&self) -> usize {
        self.bs[0].g.nrows()
    }

    pub fn antennas(&self) -> usize {
        self.bs[0].g.ncols()
    }

    /// Multiplies every link by `s` (useful for homogeneity checks).
    pub fn scaled(&self, s: f64) -> Self {
        let s = c(s, 0.0);
        Self {
            bs: self
                .bs
                .iter()
                .map(|b| BsChannels {
                    g: &b.g * s,
                    users: b.users.iter().map(|u| UserChannels { f: &u.f * s, h: &u.h * s }).collect(),
                })
                .collect(),
        }
    }
}

/// Rayleigh draw for a RIS with `elements` ports. Every entry is CN(0, 1)
/// times the square root of its link's path gain. Direct links are always
/// drawn so the stream layout does not depend on the link mode; they are
/// zeroed when blocked.
pub fn sample_channels(
    scenario: &NetworkScenario,
    elements: usize,
    rng: &mut impl Rng,
) -> Result<ChannelSet> {
    scenario.validate()?;
    if elements == 0 {
        return Err(Error::InvalidArgument("RIS needs at least one element".into()));
    }
    let m = scenario.antennas;
    let ris = scenario.ris_position;
    let mut out = Vec::with_capacity(scenario.num_bs());
    for (b, bs_pos) in scenario.bs_positions.iter().enumerate() {
        let sg = path_gain(bs_pos.distance(&ris), scenario.reflected_exponent)?.sqrt();
        let g = CMatrix::from_fn(elements, m, |_, _| cn01(rng) * sg);
        let mut users = Vec::with_capacity(scenario.users(b));
        for u in &scenario.user_positions[b] {
            let sf = path_gain(u.distance(&ris), scenario.reflected_exponent)?.sqrt();
            let sh = path_gain(u.distance(bs_pos), scenario.direct_exponent)?.sqrt();
            let f = CVector::from_fn(elements, |_, _| cn01(rng) * sf);
            let mut h = CVector::from_fn(m, |_, _| cn01(rng) * sh);
            if scenario.direct_links == DirectLinks::Blocked {
                h.fill(c64::default());
            }
            users.push(UserChannels { f, h });
        }
        out.push(BsChannels { g, users });
    }
    Ok(ChannelSet { bs: out })
}

/// Row `e_bkᴴ = f_bkᴴ Θ G_b + h_bkᴴ` for every user of BS `b`, stacked K_b×M.
pub fn effective_channels(bs: &BsChannels, theta: &CMatrix) -> Result<CMatrix> {
    let d = bs.g.nrows();
    if theta.shape() != (d, d) {
        return Err(Error::InvalidArgument(format!(
            "Θ is {}x{} but the RIS has {d} elements",
            theta.nrows(),
            theta.ncols()
        )));
    }
    let tg = theta * &bs.g;
    let mut e = CMatrix::zeros(bs.users.len(), bs.g.ncols());
    for (k, u) in bs.users.iter().enumerate() {
        let row = u.f.adjoint() * &tg + u.h.adjoint();
        e.row_mut(k).copy_from(&row);
    }
    Ok(e)
}

/// Stacked direct rows `h_bkᴴ` (what a BS sees without the RIS).
pub fn direct_channels(bs: &BsChannels) -> CMatrix {
    let mut e = CMatrix::zeros(bs.users.len(), bs.g.ncols());
    for (k, u) in bs.users.iter().enumerate() {
        e.row_mut(k).copy_from(&u.h.adjoint());
    }
    e
}

/// Zero-forcing precoders for the K×M channel `e` (rows `e_kᴴ`): columns of
/// the pseudo-inverse, each scaled to unit norm. Refuses channels whose
/// singular-value ratio falls below 1e-10.
pub fn zf_precoder(e: &CMatrix, bs: usize) -> Result<CMatrix> {
    let (k, m) = e.shape();
    if k == 0 || k > m {
        return Err(Error::InvalidArgument(format!("ZF needs 1 <= K <= M, got K = {k}, M = {m}")));
    }
    let svd = e.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smax > 0.0) || smin / smax < 1e-10 {
        return Err(Error::DegenerateChannel { bs });
    }
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let mut sinv_ut = u.adjoint();
    for (i, s) in svd.singular_values.iter().enumerate() {
        sinv_ut.row_mut(i).scale_mut(1.0 / s);
    }
    let mut p = v_t.adjoint() * sinv_ut;
    for mut col in p.column_iter_mut() {
        let n = col.norm();
        col.scale_mut(1.0 / n);
    }
    Ok(p)
}

//! Received power and spectral efficiency.

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector};
use crate::scenario::{direct_channels, effective_channels, zf_precoder, ChannelSet, PowerConfig};

/// Metrics of one Monte Carlo trial. Powers are in W.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial: u64,
    pub seed: u64,
    pub user_power: Vec<Vec<f64>>,
    pub bs_power: Vec<f64>,
    pub network_power: f64,
    /// Sum spectral efficiency per BS in bits/s/Hz; `None` where not evaluated.
    pub bs_spectral_efficiency: Vec<Option<f64>>,
}

/// `|e_kᴴ p_k|² P α_k` for every user, where `e` stacks the rows `e_kᴴ` and
/// `p` holds the precoders as columns.
pub fn received_powers(e: &CMatrix, p: &CMatrix, total_power: f64, alpha: &[f64]) -> Result<Vec<f64>> {
    let k = e.nrows();
    if p.shape() != (e.ncols(), k) || alpha.len() != k {
        return Err(Error::InvalidArgument("channel, precoder and power shapes disagree".into()));
    }
    Ok((0..k)
        .map(|i| {
            let g = (e.row(i) * p.column(i))[0];
            g.norm_sqr() * total_power * alpha[i]
        })
        .collect())
}

/// Received power of user `k` of BS `b` with Θ at that BS's frequency and
/// the given precoders.
pub fn received_power(
    channels: &ChannelSet,
    b: usize,
    k: usize,
    theta: &CMatrix,
    precoders: &CMatrix,
    power: &PowerConfig,
) -> Result<f64> {
    let bs = channels.bs.get(b).ok_or_else(|| Error::InvalidArgument(format!("BS {b} does not exist")))?;
    if k >= bs.users.len() || k >= precoders.ncols() {
        return Err(Error::InvalidArgument(format!("user {k} does not exist at BS {b}")));
    }
    let e = effective_channels(bs, theta)?;
    let g = (e.row(k) * precoders.column(k))[0];
    Ok(g.norm_sqr() * power.total_power * power.alpha[b][k])
}

/// Synchronised case: each BS zero-forces its effective channel at its own
/// Θ. `thetas[b]` is Θ at `f_b`. Returns per-user powers.
pub fn synchronized_powers(channels: &ChannelSet, thetas: &[CMatrix], power: &PowerConfig) -> Result<Vec<Vec<f64>>> {
    if thetas.len() != channels.bs.len() {
        return Err(Error::InvalidArgument("one Θ per BS is required".into()));
    }
    channels
        .bs
        .iter()
        .zip(thetas)
        .enumerate()
        .map(|(b, (bs, theta))| {
            let e = effective_channels(bs, theta)?;
            let p = zf_precoder(&e, b)?;
            received_powers(&e, &p, power.total_power, &power.alpha[b])
        })
        .collect()
}

pub fn sum_power_per_bs(user_power: &[Vec<f64>]) -> Vec<f64> {
    user_power.iter().map(|u| u.iter().sum()).collect()
}

pub fn network_sum_power(bs_power: &[f64]) -> f64 {
    bs_power.iter().sum()
}

/// `Σ_k log₂(1 + SINR_k)` for actual channel rows `e` and precoders `p`.
pub fn sum_rate(e: &CMatrix, p: &CMatrix, total_power: f64, alpha: &[f64], noise: f64) -> Result<f64> {
    let k = e.nrows();
    if p.shape() != (e.ncols(), k) || alpha.len() != k {
        return Err(Error::InvalidArgument("channel, precoder and power shapes disagree".into()));
    }
    let gains = e * p;
    let mut total = 0.0;
    for i in 0..k {
        let signal = gains[(i, i)].norm_sqr() * total_power * alpha[i];
        let interference: f64 = (0..k)
            .filter(|&u| u != i)
            .map(|u| gains[(i, u)].norm_sqr() * total_power * alpha[u])
            .sum();
        let denom = interference + noise;
        if denom <= 0.0 {
            return Err(Error::InvalidArgument("SINR undefined with zero noise and zero interference".into()));
        }
        total += (1.0 + signal / denom).log2();
    }
    Ok(total)
}

/// What BS `b` knows when it computes its precoders.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelKnowledge {
    /// Only the direct links (the BS is unaware of the RIS).
    RisFree,
    /// The cascaded channel through an earlier Θ.
    Stale(CMatrix),
}

/// Sum SE of BS `b` when its ZF precoders come from outdated channel
/// knowledge but the symbols travel over `f_bkᴴ Θ G_b + h_bkᴴ`.
pub fn sum_spectral_efficiency_outdated(
    channels: &ChannelSet,
    b: usize,
    theta: &CMatrix,
    knowledge: &ChannelKnowledge,
    power: &PowerConfig,
) -> Result<f64> {
    let bs = channels.bs.get(b).ok_or_else(|| Error::InvalidArgument(format!("BS {b} does not exist")))?;
    let known = match knowledge {
        ChannelKnowledge::RisFree => direct_channels(bs),
        ChannelKnowledge::Stale(old) => effective_channels(bs, old)?,
    };
    let p = zf_precoder(&known, b)?;
    let actual = effective_channels(bs, theta)?;
    sum_rate(&actual, &p, power.total_power, &power.alpha[b], power.noise)
}

/// Sum SE of BS `b` over its direct links alone with matching ZF.
pub fn interference_free_spectral_efficiency(channels: &ChannelSet, b: usize, power: &PowerConfig) -> Result<f64> {
    let bs = channels.bs.get(b).ok_or_else(|| Error::InvalidArgument(format!("BS {b} does not exist")))?;
    let e = direct_channels(bs);
    let p = zf_precoder(&e, b)?;
    sum_rate(&e, &p, power.total_power, &power.alpha[b], power.noise)
}

/// Inter-user leakage `max_{u≠k} |e_kᴴ p_u|² / min_k |e_kᴴ p_k|²`.
pub fn relative_leakage(e: &CMatrix, p: &CMatrix) -> f64 {
    let g = e * p;
    let k = g.nrows();
    let signal = (0..k).map(|i| g[(i, i)].norm_sqr()).fold(f64::INFINITY, f64::min);
    let mut leak: f64 = 0.0;
    for i in 0..k {
        for u in 0..k {
            if i != u {
                leak = leak.max(g[(i, u)].norm_sqr());
            }
        }
    }
    leak / signal
}

pub fn column_norms(p: &CMatrix) -> CVector {
    CVector::from_iterator(p.ncols(), p.column_iter().map(|c| crate::linalg::c(c.norm(), 0.0)))
}

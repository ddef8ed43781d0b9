//! Radio access network: OFDMA downlink with Rayleigh fading over distance
//! path loss, imperfect channel estimates, and per-slice minimum-rate checks.
//!
//! The channel estimate the allocator sees is `h_est`; the true channel lies
//! somewhere in a disc of radius `csi_bound * |h_est|` around it. Rates that
//! feed constraints and revenue are therefore evaluated at the worst point of
//! that disc: the desired signal shrinks to `(1 - bound) * |h_est|` while
//! every co-channel interferer grows to `(1 + bound)` times its estimate.
//! Both extremes are attained at phase-aligned errors, so the closed form
//! below is the exact minimum, not a bound.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::topology::SIGNAL_SPEED_M_PER_S;

/// Index of a user terminal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UserId(pub usize);

impl UserId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Converts a noise power spectral density in dBm/Hz to Watts over `bw_hz`.
pub fn noise_power_w(noise_dbm_per_hz: f64, bw_hz: f64) -> f64 {
    10f64.powf((noise_dbm_per_hz - 30.0) / 10.0) * bw_hz
}

/// Distance-dependent power gain: `gain_ref * (d / 1 m)^-exponent`, with the
/// distance clamped to 1 m so a user standing on a mast stays finite.
pub fn path_gain(distance_m: f64, ref_gain_db: f64, exponent: f64) -> f64 {
    let d = distance_m.max(1.0);
    10f64.powf(ref_gain_db / 10.0) * d.powf(-exponent)
}

/// Static radio layout: geometry, slice membership, and link-budget terms.
/// Fast fading lives in [`ChannelState`], drawn fresh each slot.
#[derive(Debug, Clone)]
pub struct RadioScenario {
    pub n_bs: usize,
    pub n_users: usize,
    pub n_subchannels: usize,
    pub n_slices: usize,
    pub subchannel_bw_hz: f64,
    /// Noise power over one subchannel, Watts.
    pub noise_w: f64,
    pub p_max_w: f64,
    /// Relative CSI error bound (0.02 means estimates are within 2%).
    pub csi_bound: f64,
    pub bs_pos: Vec<(f64, f64)>,
    pub user_pos: Vec<(f64, f64)>,
    /// Slice each user requested. Fixed for the life of the scenario.
    pub user_slice: Vec<usize>,
    /// Serving base station, nearest by Euclidean distance.
    pub user_bs: Vec<usize>,
    /// Distance to the serving base station, meters.
    pub user_bs_dist: Vec<f64>,
    /// Mean power gain from every BS to every user: `gain[bs][user]`.
    pub gain: Vec<Vec<f64>>,
}

impl RadioScenario {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        bs_pos: Vec<(f64, f64)>,
        user_pos: Vec<(f64, f64)>,
        user_slice: Vec<usize>,
        n_slices: usize,
        n_subchannels: usize,
        subchannel_bw_hz: f64,
        noise_dbm_per_hz: f64,
        p_max_w: f64,
        csi_bound: f64,
        ref_gain_db: f64,
        pathloss_exponent: f64,
    ) -> Self {
        assert_eq!(user_pos.len(), user_slice.len());
        assert!(user_slice.iter().all(|&s| s < n_slices));
        let n_bs = bs_pos.len();
        let n_users = user_pos.len();
        let dist = |a: (f64, f64), b: (f64, f64)| ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt();

        let mut user_bs = Vec::with_capacity(n_users);
        let mut user_bs_dist = Vec::with_capacity(n_users);
        for &up in &user_pos {
            let (best, d) = bs_pos
                .iter()
                .enumerate()
                .map(|(i, &bp)| (i, dist(up, bp)))
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)))
                .expect("at least one base station");
            user_bs.push(best);
            user_bs_dist.push(d);
        }
        let gain = bs_pos
            .iter()
            .map(|&bp| {
                user_pos
                    .iter()
                    .map(|&up| path_gain(dist(bp, up), ref_gain_db, pathloss_exponent))
                    .collect()
            })
            .collect();
        RadioScenario {
            n_bs,
            n_users,
            n_subchannels,
            n_slices,
            subchannel_bw_hz,
            noise_w: noise_power_w(noise_dbm_per_hz, subchannel_bw_hz),
            p_max_w,
            csi_bound,
            bs_pos,
            user_pos,
            user_slice,
            user_bs,
            user_bs_dist,
            gain,
        }
    }

    pub fn users_of_bs(&self, bs: usize) -> impl Iterator<Item = UserId> + '_ {
        self.user_bs
            .iter()
            .enumerate()
            .filter(move |(_, &b)| b == bs)
            .map(|(u, _)| UserId(u))
    }

    pub fn users_of_slice(&self, slice: usize) -> impl Iterator<Item = UserId> + '_ {
        self.user_slice
            .iter()
            .enumerate()
            .filter(move |(_, &s)| s == slice)
            .map(|(u, _)| UserId(u))
    }

    /// Largest user population on any one base station.
    pub fn max_users_per_bs(&self) -> usize {
        (0..self.n_bs)
            .map(|i| self.user_bs.iter().filter(|&&b| b == i).count())
            .max()
            .unwrap_or(0)
    }
}

/// One slot's channel estimates: complex gain per (bs, user, subchannel).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelState {
    n_bs: usize,
    n_users: usize,
    n_subchannels: usize,
    h: Vec<(f64, f64)>,
}

impl ChannelState {
    fn idx(&self, bs: usize, user: usize, k: usize) -> usize {
        debug_assert!(bs < self.n_bs && user < self.n_users && k < self.n_subchannels);
        (bs * self.n_users + user) * self.n_subchannels + k
    }

    pub fn gain(&self, bs: usize, user: UserId, k: usize) -> (f64, f64) {
        self.h[self.idx(bs, user.0, k)]
    }

    pub fn magnitude(&self, bs: usize, user: UserId, k: usize) -> f64 {
        let (re, im) = self.gain(bs, user, k);
        re.hypot(im)
    }

    /// |h|^2, the power gain of the estimate.
    pub fn power_gain(&self, bs: usize, user: UserId, k: usize) -> f64 {
        let (re, im) = self.gain(bs, user, k);
        re * re + im * im
    }

    pub fn magnitudes(&self) -> impl Iterator<Item = f64> + '_ {
        self.h.iter().map(|(re, im)| re.hypot(*im))
    }
}

impl From<usize> for UserId {
    fn from(v: usize) -> Self {
        UserId(v)
    }
}

/// Draws one slot of fast fading: `h = sqrt(mean_gain) * g` with `g` unit
/// circularly-symmetric complex Gaussian, so `E[|h|^2]` equals the mean path
/// gain.
pub fn realize_channels<R: Rng>(scn: &RadioScenario, rng: &mut R) -> ChannelState {
    let mut h = Vec::with_capacity(scn.n_bs * scn.n_users * scn.n_subchannels);
    for bs in 0..scn.n_bs {
        for user in 0..scn.n_users {
            let amp = scn.gain[bs][user].sqrt();
            for _ in 0..scn.n_subchannels {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                h.push((amp * re / 2f64.sqrt(), amp * im / 2f64.sqrt()));
            }
        }
    }
    ChannelState {
        n_bs: scn.n_bs,
        n_users: scn.n_users,
        n_subchannels: scn.n_subchannels,
        h,
    }
}

/// Downlink assignment: at most one user per (bs, subchannel), with the
/// transmit power spent on that pair. Power is zero wherever no user is
/// assigned.
#[derive(Debug, Clone, PartialEq)]
pub struct RadioAllocation {
    pub assign: Vec<Vec<Option<UserId>>>,
    pub power_w: Vec<Vec<f64>>,
}

impl RadioAllocation {
    pub fn empty(n_bs: usize, n_subchannels: usize) -> Self {
        RadioAllocation {
            assign: vec![vec![None; n_subchannels]; n_bs],
            power_w: vec![vec![0.0; n_subchannels]; n_bs],
        }
    }

    pub fn n_bs(&self) -> usize {
        self.assign.len()
    }

    pub fn n_subchannels(&self) -> usize {
        self.assign.first().map_or(0, |r| r.len())
    }

    /// Subchannels granted to `user` at its serving BS.
    pub fn channels_of(&self, bs: usize, user: UserId) -> impl Iterator<Item = usize> + '_ {
        self.assign[bs]
            .iter()
            .enumerate()
            .filter(move |(_, &a)| a == Some(user))
            .map(|(k, _)| k)
    }

    pub fn is_served(&self, bs: usize, user: UserId) -> bool {
        self.assign[bs].contains(&Some(user))
    }

    pub fn served_user_count(&self) -> usize {
        let mut users: Vec<UserId> = self
            .assign
            .iter()
            .flatten()
            .filter_map(|&a| a)
            .collect();
        users.sort();
        users.dedup();
        users.len()
    }
}

/// Interference power at `user` on subchannel `k`, from every other BS that
/// is transmitting on `k`, using the given per-gain inflation factor.
fn interference_w(
    scn: &RadioScenario,
    ch: &ChannelState,
    alloc: &RadioAllocation,
    user: UserId,
    own_bs: usize,
    k: usize,
    gain_scale: f64,
) -> f64 {
    let mut acc = 0.0;
    for other in 0..scn.n_bs {
        if other == own_bs || alloc.assign[other][k].is_none() {
            continue;
        }
        let g = ch.magnitude(other, user, k) * gain_scale;
        acc += alloc.power_w[other][k] * g * g;
    }
    acc
}

/// SINR and instantaneous rate (bps) of the user assigned on `(bs, k)`,
/// taking the channel estimates at face value. `None` when nothing is
/// assigned there.
pub fn sinr_and_rate(
    scn: &RadioScenario,
    ch: &ChannelState,
    alloc: &RadioAllocation,
    bs: usize,
    k: usize,
) -> Option<(f64, f64)> {
    let user = alloc.assign[bs][k]?;
    let p = alloc.power_w[bs][k];
    let signal = p * ch.power_gain(bs, user, k);
    let denom = interference_w(scn, ch, alloc, user, bs, k, 1.0) + scn.noise_w;
    let sinr = signal / denom;
    Some((sinr, scn.subchannel_bw_hz * (1.0 + sinr).log2()))
}

/// Rate (bps) on `(bs, k)` at the worst channel realization consistent with
/// the estimation-error bound. `None` when nothing is assigned.
pub fn worst_case_subchannel_rate(
    scn: &RadioScenario,
    ch: &ChannelState,
    alloc: &RadioAllocation,
    bs: usize,
    k: usize,
) -> Option<f64> {
    let user = alloc.assign[bs][k]?;
    let p = alloc.power_w[bs][k];
    let g = ch.magnitude(bs, user, k) * (1.0 - scn.csi_bound);
    let signal = p * g * g;
    let denom =
        interference_w(scn, ch, alloc, user, bs, k, 1.0 + scn.csi_bound) + scn.noise_w;
    let sinr = signal / denom;
    Some(scn.subchannel_bw_hz * (1.0 + sinr).log2())
}

/// Worst-case rate (bps) a user is guaranteed across all its subchannels.
/// Zero when the user holds none.
pub fn worst_case_user_rate(
    scn: &RadioScenario,
    ch: &ChannelState,
    alloc: &RadioAllocation,
    user: UserId,
) -> f64 {
    let bs = scn.user_bs[user.0];
    alloc
        .channels_of(bs, user)
        .map(|k| worst_case_subchannel_rate(scn, ch, alloc, bs, k).unwrap_or(0.0))
        .sum()
}

/// Face-value (perfect estimate) rate of a user across its subchannels.
pub fn user_rate(
    scn: &RadioScenario,
    ch: &ChannelState,
    alloc: &RadioAllocation,
    user: UserId,
) -> f64 {
    let bs = scn.user_bs[user.0];
    alloc
        .channels_of(bs, user)
        .map(|k| sinr_and_rate(scn, ch, alloc, bs, k).map_or(0.0, |(_, r)| r))
        .sum()
}

/// Guaranteed aggregate rate per slice (bps).
pub fn worst_case_slice_rates(
    scn: &RadioScenario,
    ch: &ChannelState,
    alloc: &RadioAllocation,
) -> Vec<f64> {
    let mut rates = vec![0.0; scn.n_slices];
    for u in 0..scn.n_users {
        rates[scn.user_slice[u]] += worst_case_user_rate(scn, ch, alloc, UserId(u));
    }
    rates
}

/// Air-interface delay pair for one user, seconds: (propagation,
/// transmission). Propagation counts only when the user holds a subchannel;
/// transmission is zero, not infinite, at zero rate.
pub fn ran_delays(
    scn: &RadioScenario,
    ch: &ChannelState,
    alloc: &RadioAllocation,
    packet_bits: f64,
    user: UserId,
) -> (f64, f64) {
    let bs = scn.user_bs[user.0];
    let served = alloc.is_served(bs, user);
    let prop = if served {
        scn.user_bs_dist[user.0] / SIGNAL_SPEED_M_PER_S
    } else {
        0.0
    };
    let rate = worst_case_user_rate(scn, ch, alloc, user);
    let trans = if rate > 0.0 { packet_bits / rate } else { 0.0 };
    (prop, trans)
}

// ---------------------------------------------------------------------------
// Constraint checkers. Structural ones (ownership, exclusivity, power budget)
// return hard pass/fail; the rate floor returns signed slack per slice so the
// environment can grade near-misses.
// ---------------------------------------------------------------------------

/// Every assignment must point at a user the scenario knows, served by its
/// own (nearest) base station.
pub fn check_assignment_ownership(scn: &RadioScenario, alloc: &RadioAllocation) -> bool {
    alloc.assign.iter().enumerate().all(|(bs, row)| {
        row.iter().flatten().all(|u| {
            u.0 < scn.n_users && scn.user_bs[u.0] == bs
        })
    })
}

/// At most one user per (bs, subchannel) pair, a user appears at one BS only,
/// and power is strictly confined to assigned pairs.
pub fn check_subchannel_exclusivity(alloc: &RadioAllocation) -> bool {
    let mut owner: Vec<Option<usize>> = Vec::new();
    for (bs, row) in alloc.assign.iter().enumerate() {
        for (k, a) in row.iter().enumerate() {
            match a {
                Some(u) => {
                    if owner.len() <= u.0 {
                        owner.resize(u.0 + 1, None);
                    }
                    match owner[u.0] {
                        None => owner[u.0] = Some(bs),
                        Some(prev) if prev == bs => {}
                        Some(_) => return false,
                    }
                    if alloc.power_w[bs][k] < 0.0 {
                        return false;
                    }
                }
                None => {
                    if alloc.power_w[bs][k] != 0.0 {
                        return false;
                    }
                }
            }
        }
    }
    true
}

/// Per-BS transmit power stays within budget. `slack[bs] = p_max - sum`.
pub fn power_budget_slack(scn: &RadioScenario, alloc: &RadioAllocation) -> Vec<f64> {
    alloc
        .power_w
        .iter()
        .map(|row| scn.p_max_w - row.iter().sum::<f64>())
        .collect()
}

pub fn check_power_budget(scn: &RadioScenario, alloc: &RadioAllocation) -> bool {
    // tolerate accumulated rounding right at the budget boundary
    power_budget_slack(scn, alloc)
        .iter()
        .all(|&s| s >= -1e-9 * scn.p_max_w)
}

/// Per-slice guaranteed-rate slack in bps:
/// `slack[s] = worst_case_rate[s] - rmin_bps_hz[s] * subchannel_bw`.
/// A slice with no granted subchannels has rate 0 and fails outright.
pub fn rate_floor_slack(
    scn: &RadioScenario,
    ch: &ChannelState,
    alloc: &RadioAllocation,
    rmin_bps_hz: &[f64],
) -> Vec<f64> {
    assert_eq!(rmin_bps_hz.len(), scn.n_slices);
    worst_case_slice_rates(scn, ch, alloc)
        .iter()
        .zip(rmin_bps_hz)
        .map(|(&r, &rmin)| r - rmin * scn.subchannel_bw_hz)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn two_cell() -> RadioScenario {
        RadioScenario::new(
            vec![(250.0, 500.0), (750.0, 500.0)],
            vec![
                (200.0, 480.0),
                (300.0, 520.0),
                (700.0, 450.0),
                (820.0, 560.0),
            ],
            vec![0, 1, 2, 0],
            3,
            4,
            20_000.0,
            -174.0,
            4.0,
            0.05,
            -38.0,
            3.5,
        )
    }

    fn no_fading_state(scn: &RadioScenario, mag: f64) -> ChannelState {
        ChannelState {
            n_bs: scn.n_bs,
            n_users: scn.n_users,
            n_subchannels: scn.n_subchannels,
            h: vec![(mag, 0.0); scn.n_bs * scn.n_users * scn.n_subchannels],
        }
    }

    #[test]
    fn noise_power_conversion() {
        let w = noise_power_w(-174.0, 20_000.0);
        let expect = 10f64.powf(-20.4) * 2.0e4;
        assert!((w - expect).abs() / expect < 1e-12);
        assert!(w < 1e-16 && w > 1e-17);
    }

    #[test]
    fn path_gain_reference_point() {
        // at the 1 m reference distance the gain is exactly the reference
        assert!((path_gain(1.0, -38.0, 3.5) - 10f64.powf(-3.8)).abs() < 1e-18);
        // clamp keeps sub-meter distances at the reference value
        assert_eq!(path_gain(0.01, -38.0, 3.5), path_gain(1.0, -38.0, 3.5));
        let g100 = path_gain(100.0, -38.0, 3.5);
        let g200 = path_gain(200.0, -38.0, 3.5);
        assert!((g100 / g200 - 2f64.powf(3.5)).abs() < 1e-9);
    }

    #[test]
    fn nearest_bs_association() {
        let scn = two_cell();
        assert_eq!(scn.user_bs, vec![0, 0, 1, 1]);
        assert_eq!(scn.max_users_per_bs(), 2);
        let d = ((250.0f64 - 200.0).powi(2) + (500.0f64 - 480.0).powi(2)).sqrt();
        assert!((scn.user_bs_dist[0] - d).abs() < 1e-12);
    }

    #[test]
    fn rayleigh_second_moment_matches_path_gain() {
        let scn = two_cell();
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let mut acc = 0.0;
        let n = 100_000;
        for _ in 0..n {
            let ch = realize_channels(&scn, &mut rng);
            acc += ch.power_gain(0, UserId(0), 0);
        }
        let mean = acc / n as f64;
        let expect = scn.gain[0][0];
        assert!(
            (mean - expect).abs() / expect < 0.01,
            "second moment off: {mean} vs {expect}"
        );
    }

    #[test]
    fn unit_snr_rate_is_bandwidth() {
        // engineered so p * |h|^2 == noise power: SNR = 1, rate = B * log2(2)
        let mut scn = two_cell();
        scn.csi_bound = 0.0;
        let ch = no_fading_state(&scn, 1.0);
        let mut alloc = RadioAllocation::empty(scn.n_bs, scn.n_subchannels);
        alloc.assign[0][0] = Some(UserId(0));
        alloc.power_w[0][0] = scn.noise_w;
        let (sinr, rate) = sinr_and_rate(&scn, &ch, &alloc, 0, 0).unwrap();
        assert!((sinr - 1.0).abs() < 1e-12);
        assert!((rate - 20_000.0).abs() < 1e-9);
        assert!(sinr_and_rate(&scn, &ch, &alloc, 0, 1).is_none());
    }

    #[test]
    fn worst_case_rate_closed_form() {
        // 5% estimation error, unit nominal SNR, no interference:
        // guaranteed SINR is (0.95)^2 and the rate follows exactly.
        let scn = two_cell();
        let ch = no_fading_state(&scn, 1.0);
        let mut alloc = RadioAllocation::empty(scn.n_bs, scn.n_subchannels);
        alloc.assign[0][0] = Some(UserId(0));
        alloc.power_w[0][0] = scn.noise_w;
        let r = worst_case_subchannel_rate(&scn, &ch, &alloc, 0, 0).unwrap();
        let expect = 20_000.0 * (1.0 + 0.95f64.powi(2)).log2();
        assert!((r - expect).abs() < 1e-9);
    }

    #[test]
    fn worst_case_is_minimum_over_sampled_errors() {
        // Sample true channels inside the error discs (plus the aligned
        // extremes); no sampled rate may undercut the closed form, and the
        // extreme point must reach it.
        let scn = two_cell();
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let ch = realize_channels(&scn, &mut rng);
        let mut alloc = RadioAllocation::empty(scn.n_bs, scn.n_subchannels);
        alloc.assign[0][0] = Some(UserId(0));
        alloc.power_w[0][0] = 1.0;
        alloc.assign[1][0] = Some(UserId(2));
        alloc.power_w[1][0] = 1.0;

        let closed = worst_case_subchannel_rate(&scn, &ch, &alloc, 0, 0).unwrap();
        let perfect = sinr_and_rate(&scn, &ch, &alloc, 0, 0).unwrap().1;
        assert!(closed <= perfect);

        let g = scn.csi_bound;
        let own = ch.magnitude(0, UserId(0), 0);
        let inter = ch.magnitude(1, UserId(0), 0);
        let rate_at = |own_mag: f64, int_mag: f64| {
            let sig = 1.0 * own_mag * own_mag;
            let den = 1.0 * int_mag * int_mag + scn.noise_w;
            scn.subchannel_bw_hz * (1.0 + sig / den).log2()
        };
        let mut sampled_min = f64::INFINITY;
        for _ in 0..1000 {
            // random radius and sign structure inside each disc
            let ro: f64 = rng.gen_range(-1.0..1.0);
            let ri: f64 = rng.gen_range(-1.0..1.0);
            let s = rate_at(own * (1.0 + g * ro), inter * (1.0 + g * ri));
            sampled_min = sampled_min.min(s);
            assert!(s >= closed * (1.0 - 1e-12), "sample beat the closed form");
        }
        let extreme = rate_at(own * (1.0 - g), inter * (1.0 + g));
        assert!((extreme - closed).abs() < 1e-9);
        assert!(sampled_min >= closed);
    }

    #[test]
    fn user_rate_sums_subchannels() {
        let mut scn = two_cell();
        scn.csi_bound = 0.0;
        let ch = no_fading_state(&scn, 1.0);
        let mut alloc = RadioAllocation::empty(scn.n_bs, scn.n_subchannels);
        alloc.assign[0][0] = Some(UserId(0));
        alloc.power_w[0][0] = scn.noise_w;
        alloc.assign[0][2] = Some(UserId(0));
        alloc.power_w[0][2] = scn.noise_w;
        let r = worst_case_user_rate(&scn, &ch, &alloc, UserId(0));
        assert!((r - 40_000.0).abs() < 1e-9);
        assert_eq!(alloc.channels_of(0, UserId(0)).count(), 2);
        // unserved user has zero rate
        assert_eq!(worst_case_user_rate(&scn, &ch, &alloc, UserId(1)), 0.0);
    }

    #[test]
    fn ran_delay_piecewise() {
        let scn = two_cell();
        let ch = no_fading_state(&scn, 1.0);
        let mut alloc = RadioAllocation::empty(scn.n_bs, scn.n_subchannels);
        // unserved: both delays collapse to zero
        assert_eq!(ran_delays(&scn, &ch, &alloc, 4000.0, UserId(0)), (0.0, 0.0));

        alloc.assign[0][0] = Some(UserId(0));
        alloc.power_w[0][0] = scn.noise_w;
        let (prop, trans) = ran_delays(&scn, &ch, &alloc, 4000.0, UserId(0));
        assert!((prop - scn.user_bs_dist[0] / 3.0e8).abs() < 1e-18);
        let rate = worst_case_user_rate(&scn, &ch, &alloc, UserId(0));
        assert!((trans - 4000.0 / rate).abs() < 1e-15);
    }

    #[test]
    fn propagation_of_300m_is_one_microsecond() {
        assert_eq!(300.0 / SIGNAL_SPEED_M_PER_S, 1.0e-6);
    }

    #[test]
    fn power_budget_boundary_is_feasible() {
        let scn = two_cell();
        let mut alloc = RadioAllocation::empty(scn.n_bs, scn.n_subchannels);
        for k in 0..scn.n_subchannels {
            alloc.assign[0][k] = Some(UserId(if k % 2 == 0 { 0 } else { 1 }));
            alloc.power_w[0][k] = scn.p_max_w / scn.n_subchannels as f64;
        }
        assert!(check_power_budget(&scn, &alloc));
        let slack = power_budget_slack(&scn, &alloc);
        assert!(slack[0].abs() < 1e-12);
        assert_eq!(slack[1], scn.p_max_w);

        alloc.power_w[0][0] += 1e-3;
        assert!(!check_power_budget(&scn, &alloc));
    }

    #[test]
    fn exclusivity_checker_catches_cross_bs_user() {
        let scn = two_cell();
        let mut alloc = RadioAllocation::empty(scn.n_bs, scn.n_subchannels);
        alloc.assign[0][0] = Some(UserId(0));
        alloc.power_w[0][0] = 0.1;
        assert!(check_subchannel_exclusivity(&alloc));
        assert!(check_assignment_ownership(&scn, &alloc));

        // same user popping up at the other BS
        alloc.assign[1][1] = Some(UserId(0));
        alloc.power_w[1][1] = 0.1;
        assert!(!check_subchannel_exclusivity(&alloc));
        assert!(!check_assignment_ownership(&scn, &alloc));
    }

    #[test]
    fn power_on_idle_subchannel_is_rejected() {
        let scn = two_cell();
        let mut alloc = RadioAllocation::empty(scn.n_bs, scn.n_subchannels);
        alloc.power_w[0][3] = 0.5;
        assert!(!check_subchannel_exclusivity(&alloc));
    }

    #[test]
    fn rate_floor_slack_shapes() {
        let mut scn = two_cell();
        scn.csi_bound = 0.0;
        let ch = no_fading_state(&scn, 1.0);
        let mut alloc = RadioAllocation::empty(scn.n_bs, scn.n_subchannels);
        alloc.assign[0][0] = Some(UserId(0));
        alloc.power_w[0][0] = scn.noise_w;
        let rmin = vec![0.5, 1.0, 2.0];
        let slack = rate_floor_slack(&scn, &ch, &alloc, &rmin);
        // slice 0 holds user 0 at 20 kbps against a 10 kbps floor
        assert!((slack[0] - 10_000.0).abs() < 1e-9);
        // slices with no granted subchannel owe their full floor
        assert!((slack[1] + 20_000.0).abs() < 1e-12);
        assert!((slack[2] + 40_000.0).abs() < 1e-12);
    }

    #[test]
    fn worst_case_rate_non_increasing_in_error_bound() {
        let mut scn = two_cell();
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let ch = realize_channels(&scn, &mut rng);
        let mut alloc = RadioAllocation::empty(scn.n_bs, scn.n_subchannels);
        alloc.assign[0][1] = Some(UserId(1));
        alloc.power_w[0][1] = 0.5;
        alloc.assign[1][1] = Some(UserId(3));
        alloc.power_w[1][1] = 0.5;
        let mut last = f64::INFINITY;
        for pct in [0.0, 0.02, 0.04, 0.06, 0.08, 0.10] {
            scn.csi_bound = pct;
            let r = worst_case_user_rate(&scn, &ch, &alloc, UserId(1));
            assert!(r <= last + 1e-12);
            last = r;
        }
        // zero bound coincides with the face-value rate
        scn.csi_bound = 0.0;
        let wc = worst_case_user_rate(&scn, &ch, &alloc, UserId(1));
        let plain = user_rate(&scn, &ch, &alloc, UserId(1));
        assert!((wc - plain).abs() <= 1e-12 * plain.abs());
    }
}

//! Gated association of path estimates across burst sets and the
//! exponential smoothing filter `q̂(i) = α q̂(i-1) + (1-α) q(i)`.

use std::path::Path;

use serde::Serialize;

use crate::config::watts_to_dbm;
use crate::error::Result;
use crate::extract::PathEstimate;

/// Smoothed parameter vector q = (τ, f_D, sin θ, |b|²).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParamVector {
    pub delay_s: f64,
    pub doppler_hz: f64,
    pub sin_theta: f64,
    /// `None` until a reliable power estimate arrives.
    pub power: Option<f64>,
}

impl From<&PathEstimate> for ParamVector {
    fn from(e: &PathEstimate) -> Self {
        Self {
            delay_s: e.delay_s,
            doppler_hz: e.doppler_hz,
            sin_theta: e.sin_theta,
            power: e.power,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Track {
    pub id: u64,
    pub q: ParamVector,
    /// Grid bin of the latest associated estimate.
    pub grid_bin: usize,
    pub last_update: usize,
    pub hits: usize,
}

fn ema(prev: f64, new: f64, alpha: f64) -> f64 {
    alpha * prev + (1.0 - alpha) * new
}

/// Signed difference `a − b` of two sines taken on the circle of the array
/// phase π sin θ, so that values just inside ±1 are neighbours. In (−1, 1].
pub fn sin_difference(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0);
    if d > 1.0 {
        d - 2.0
    } else {
        d
    }
}

/// EMA of sin θ on the same circle, folded back into [−1, 1].
fn ema_sin(prev: f64, new: f64, alpha: f64) -> f64 {
    let s = ema(prev, prev + sin_difference(new, prev), alpha);
    if s > 1.0 {
        s - 2.0
    } else if s < -1.0 {
        s + 2.0
    } else {
        s
    }
}

/// One step of the recursive filter. sin θ is averaged on the circle of the
/// array phase; a missing power on either side keeps whichever one exists.
pub fn smooth(track: &Track, estimate: &ParamVector, alpha: f64) -> ParamVector {
    let q = &track.q;
    ParamVector {
        delay_s: ema(q.delay_s, estimate.delay_s, alpha),
        doppler_hz: ema(q.doppler_hz, estimate.doppler_hz, alpha),
        sin_theta: ema_sin(q.sin_theta, estimate.sin_theta, alpha),
        power: match (q.power, estimate.power) {
            (Some(a), Some(b)) => Some(ema(a, b, alpha)),
            (a, b) => a.or(b),
        },
    }
}

/// What the association rule compares.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssocKey {
    pub grid_bin: usize,
    pub sin_theta: f64,
}

impl From<&PathEstimate> for AssocKey {
    fn from(e: &PathEstimate) -> Self {
        Self {
            grid_bin: e.grid_bin,
            sin_theta: e.sin_theta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Gates {
    /// Largest accepted |Δ bin|.
    pub bins: usize,
    /// Largest accepted |Δ sin θ|, measured on the array-phase circle.
    pub sin_theta: f64,
}

impl Default for Gates {
    fn default() -> Self {
        Self {
            bins: 1,
            sin_theta: 0.1,
        }
    }
}

/// Greedy one-to-one matching of `left` to `right`: candidate pairs inside
/// the gates are taken in order of |Δ bin|, then |Δ sin θ|. Returns
/// `(left index, right index)` pairs sorted by left index.
pub fn associate(left: &[AssocKey], right: &[AssocKey], gates: &Gates) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for (i, a) in left.iter().enumerate() {
        for (j, b) in right.iter().enumerate() {
            let db = a.grid_bin.abs_diff(b.grid_bin);
            let ds = sin_difference(a.sin_theta, b.sin_theta).abs();
            if db <= gates.bins && ds <= gates.sin_theta {
                pairs.push((db, ds, i, j));
            }
        }
    }
    pairs.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.total_cmp(&y.1)).then((x.2, x.3).cmp(&(y.2, y.3))));
    let mut used_l = vec![false; left.len()];
    let mut used_r = vec![false; right.len()];
    let mut out = Vec::new();
    for (_, _, i, j) in pairs {
        if !used_l[i] && !used_r[j] {
            used_l[i] = true;
            used_r[j] = true;
            out.push((i, j));
        }
    }
    out.sort_unstable();
    out
}

/// Live tracks, updated once per burst set in burst order.
#[derive(Debug, Clone)]
pub struct TrackStore {
    pub tracks: Vec<Track>,
    pub alpha: f64,
    pub gates: Gates,
    /// A track is dropped once this many burst sets pass without an update.
    pub max_missed: usize,
    next_id: u64,
}

impl TrackStore {
    pub fn new(alpha: f64, gates: Gates) -> Self {
        Self {
            tracks: Vec::new(),
            alpha,
            gates,
            max_missed: 3,
            next_id: 0,
        }
    }

    /// Associates the estimates of burst set `burst` with the live tracks,
    /// smooths the matched ones, opens tracks for the rest and retires stale
    /// tracks. Returns the track id assigned to each estimate.
    pub fn update(&mut self, burst: usize, estimates: &[PathEstimate]) -> Vec<u64> {
        let est_keys: Vec<AssocKey> = estimates.iter().map(AssocKey::from).collect();
        let track_keys: Vec<AssocKey> = self
            .tracks
            .iter()
            .map(|t| AssocKey {
                grid_bin: t.grid_bin,
                sin_theta: t.q.sin_theta,
            })
            .collect();
        let matches = associate(&est_keys, &track_keys, &self.gates);

        let mut ids = vec![u64::MAX; estimates.len()];
        for &(e, t) in &matches {
            let track = &mut self.tracks[t];
            track.q = smooth(track, &ParamVector::from(&estimates[e]), self.alpha);
            track.grid_bin = estimates[e].grid_bin;
            track.last_update = burst;
            track.hits += 1;
            ids[e] = track.id;
        }
        for (e, id) in ids.iter_mut().enumerate() {
            if *id == u64::MAX {
                *id = self.next_id;
                self.tracks.push(Track {
                    id: self.next_id,
                    q: ParamVector::from(&estimates[e]),
                    grid_bin: estimates[e].grid_bin,
                    last_update: burst,
                    hits: 1,
                });
                self.next_id += 1;
            }
        }
        let max_missed = self.max_missed;
        self.tracks.retain(|t| burst - t.last_update < max_missed);
        ids
    }

    pub fn get(&self, id: u64) -> Option<&Track> {
        self.tracks.iter().find(|t| t.id == id)
    }
}

/// One CSV row of an estimate or track export.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimateRecord {
    pub burst: usize,
    pub bin: usize,
    pub delay_s: f64,
    pub doppler_hz: f64,
    pub sin_theta: f64,
    pub power_db: Option<f64>,
    pub track_id: Option<u64>,
}

impl EstimateRecord {
    pub fn from_estimate(burst: usize, e: &PathEstimate, track_id: Option<u64>) -> Self {
        Self {
            burst,
            bin: e.grid_bin,
            delay_s: e.delay_s,
            doppler_hz: e.doppler_hz,
            sin_theta: e.sin_theta,
            power_db: e.power.map(|p| 10.0 * p.log10()),
            track_id,
        }
    }

    pub fn from_track(t: &Track) -> Self {
        Self {
            burst: t.last_update,
            bin: t.grid_bin,
            delay_s: t.q.delay_s,
            doppler_hz: t.q.doppler_hz,
            sin_theta: t.q.sin_theta,
            power_db: t.q.power.map(|p| 10.0 * p.log10()),
            track_id: Some(t.id),
        }
    }

    /// Power in dBm instead of dB re 1 W.
    pub fn power_dbm(&self) -> Option<f64> {
        self.power_db.map(|db| watts_to_dbm(10f64.powf(db / 10.0)))
    }
}

/// Header: `burst,bin,delay_s,doppler_hz,sin_theta,power_db,track_id`.
pub fn write_records_csv(records: &[EstimateRecord], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(["burst", "bin", "delay_s", "doppler_hz", "sin_theta", "power_db", "track_id"])?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

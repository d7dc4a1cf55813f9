use serde::{Deserialize, Serialize};

/// One simulated first passage above `u`.
///
/// `last_claim` is the claim that carried the path over the barrier; on a
/// ruined record `overshoot + undershoot_path == last_claim` exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirstPassageRecord {
    pub ruined: bool,
    pub tau: f64,
    pub last_max_time: f64,
    pub passage_delay: f64,
    pub undershoot_max: f64,
    pub undershoot_path: f64,
    pub overshoot: f64,
    pub weight: f64,
    pub last_claim: f64,
}

impl FirstPassageRecord {
    /// Record for a path that never passes the barrier. Path functionals are NaN.
    pub fn survived() -> Self {
        FirstPassageRecord {
            ruined: false,
            tau: f64::INFINITY,
            last_max_time: f64::NAN,
            passage_delay: f64::NAN,
            undershoot_max: f64::NAN,
            undershoot_path: f64::NAN,
            overshoot: f64::NAN,
            weight: 0.0,
            last_claim: f64::NAN,
        }
    }

    /// Level of the path just after passage, `u + overshoot`.
    pub fn passage_level(&self, u: f64) -> f64 {
        u + self.overshoot
    }
}

/// Path from zero up to its first passage above zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ExcursionRecord {
    pub completed: bool,
    pub duration: f64,
    /// `X_{τ(0)}`; NaN when not completed.
    pub terminal: f64,
    /// `−X_{τ(0)−}`; NaN when not completed.
    pub pre_terminal: f64,
    /// `(time, level)` just after each claim. Empty unless requested.
    pub path_events: Vec<(f64, f64)>,
    pub discounted_mark: f64,
}

impl ExcursionRecord {
    pub fn censored(horizon: f64, path_events: Vec<(f64, f64)>) -> Self {
        ExcursionRecord {
            completed: false,
            duration: horizon,
            terminal: f64::NAN,
            pre_terminal: f64::NAN,
            path_events,
            discounted_mark: 0.0,
        }
    }
}

/// A stretch of strictly new minima. The path descends linearly, so the
/// first time depth `v` is reached is linear in `v` on the segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderSegment {
    pub start_time: f64,
    pub start_depth: f64,
    pub end_time: f64,
    pub end_depth: f64,
}

impl LadderSegment {
    /// First time depth `v` is reached, for `v` in the segment.
    pub fn hitting_time(&self, v: f64) -> f64 {
        self.start_time + (v - self.start_depth) * (self.end_time - self.start_time) / (self.end_depth - self.start_depth)
    }
}

/// Descending-ladder record of one path up to a horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderSample {
    pub segments: Vec<LadderSegment>,
    pub horizon: f64,
    /// Depth of the running minimum at the horizon; `V̂` is only observed
    /// on `[0, truncation_depth]`.
    pub truncation_depth: f64,
}

impl LadderSample {
    /// Ladder points `(t_k, v_k)`: the time and depth at which each run of
    /// new minima ends. Both coordinates are strictly increasing.
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.segments.iter().map(|s| (s.end_time, s.end_depth)).collect()
    }

    /// First time depth `v` is reached, or None if beyond the truncation depth.
    pub fn hitting_time(&self, v: f64) -> Option<f64> {
        if v < 0.0 || v > self.truncation_depth {
            return None;
        }
        let i = self.segments.partition_point(|s| s.end_depth < v);
        self.segments.get(i).map(|s| s.hitting_time(v.max(s.start_depth)))
    }

    /// Depth of the running minimum at time `t`, `m(t) = −inf_{s≤t} X_s`.
    pub fn depth_at(&self, t: f64) -> f64 {
        let i = self.segments.partition_point(|seg| seg.start_time <= t);
        if i == 0 {
            return 0.0;
        }
        let seg = &self.segments[i - 1];
        if t >= seg.end_time {
            seg.end_depth
        } else {
            seg.start_depth + (t - seg.start_time) * (seg.end_depth - seg.start_depth) / (seg.end_time - seg.start_time)
        }
    }

    /// `∫ e^{−a·T̂_v − z·v} dv` over the observed depth range.
    pub fn laplace_functional(&self, a: f64, z: f64) -> f64 {
        self.segments
            .iter()
            .map(|s| {
                let dv = s.end_depth - s.start_depth;
                let slope = (s.end_time - s.start_time) / dv;
                // exponent is linear in v: −(a·slope + z)(v − v0) − a·t0 − z·v0
                let r = a * slope + z;
                let base = (-a * s.start_time - z * s.start_depth).exp();
                if r * dv < 1e-12 {
                    base * dv
                } else {
                    base * -(-r * dv).exp_m1() / r
                }
            })
            .sum()
    }
}

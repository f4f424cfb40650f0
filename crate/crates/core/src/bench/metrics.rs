use serde::{Deserialize, Serialize};

use crate::sips::PosteriorSnapshot;

/// 1-based snapshot indices `ceil(q T / 4)` for `q = 1, 2, 3`.
pub fn quartile_indices(t_total: usize) -> [usize; 3] {
    [1, 2, 3].map(|q| (q * t_total).div_ceil(4).max(1))
}

/// Accuracy of one trajectory's posteriors at its quartiles.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QuartileMetrics {
    /// `P(g_true | o)` at Q1..Q3.
    pub probs: [f64; 3],
    /// 1 if `g_true` is the unique argmax, else 0.
    pub top1_strict: [f64; 3],
    /// `1 / |argmax|` if `g_true` is among the maximizers, else 0.
    pub top1_chance: [f64; 3],
}

/// Read the snapshots at `t = ceil(q T / 4)`. `snapshots[t - 1]` must be
/// the posterior at `t`.
pub fn quartile_metrics(snapshots: &[PosteriorSnapshot], true_goal: &str, t_total: usize) -> QuartileMetrics {
    let mut m = QuartileMetrics::default();
    for (i, t) in quartile_indices(t_total).into_iter().enumerate() {
        let snap = &snapshots[t - 1];
        debug_assert_eq!(snap.t, t);
        m.probs[i] = snap.prob(true_goal);
        let best = snap.argmax();
        if best.contains(&true_goal) {
            m.top1_chance[i] = 1.0 / best.len() as f64;
            m.top1_strict[i] = if best.len() == 1 { 1.0 } else { 0.0 };
        }
    }
    m
}

/// Timing and work for one method on one trajectory.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunCost {
    /// Setup seconds.
    pub c0: f64,
    /// Mean seconds per timestep.
    pub mc: f64,
    /// `(c0 + total step seconds) / T`.
    pub ac: f64,
    /// States visited by search or value iteration.
    pub nodes: u64,
}

impl RunCost {
    pub fn new(c0: f64, step_seconds: f64, timesteps: usize, nodes: u64) -> Self {
        let t = timesteps.max(1) as f64;
        RunCost { c0, mc: step_seconds / t, ac: (c0 + step_seconds) / t, nodes }
    }
}

/// Mean and population standard deviation.
fn mean_std(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.clone().sum::<f64>() / n as f64;
    let var = xs.map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    (mean, var.sqrt())
}

/// Aggregated accuracy and cost of one method on one domain. Column order
/// follows the usual results table: posterior of the true goal, Top-1,
/// then costs, then standard deviations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub domain: String,
    pub method: String,
    pub p_q1: f64,
    pub p_q2: f64,
    pub p_q3: f64,
    pub top1_q1: f64,
    pub top1_q2: f64,
    pub top1_q3: f64,
    pub c0: f64,
    pub mc: f64,
    pub ac: f64,
    pub n: f64,
    pub p_q1_sd: f64,
    pub p_q2_sd: f64,
    pub p_q3_sd: f64,
    pub top1_q1_sd: f64,
    pub top1_q2_sd: f64,
    pub top1_q3_sd: f64,
    pub c0_sd: f64,
    pub mc_sd: f64,
    pub ac_sd: f64,
    pub n_sd: f64,
    pub top1_strict_q1: f64,
    pub top1_strict_q2: f64,
    pub top1_strict_q3: f64,
    pub trajectories: usize,
    pub failures: usize,
}

impl MetricsRow {
    /// Column names whose values depend on wall-clock time.
    pub const TIMING_COLUMNS: [&'static str; 6] = ["c0", "mc", "ac", "c0_sd", "mc_sd", "ac_sd"];

    pub fn aggregate(domain: &str, method: &str, runs: &[(QuartileMetrics, RunCost)], failures: usize) -> Self {
        let q = |f: fn(&QuartileMetrics) -> f64| mean_std(runs.iter().map(move |(m, _)| f(m)));
        let c = |f: fn(&RunCost) -> f64| mean_std(runs.iter().map(move |(_, c)| f(c)));
        let (p1, p1s) = q(|m| m.probs[0]);
        let (p2, p2s) = q(|m| m.probs[1]);
        let (p3, p3s) = q(|m| m.probs[2]);
        let (t1, t1s) = q(|m| m.top1_chance[0]);
        let (t2, t2s) = q(|m| m.top1_chance[1]);
        let (t3, t3s) = q(|m| m.top1_chance[2]);
        let (c0, c0s) = c(|c| c.c0);
        let (mc, mcs) = c(|c| c.mc);
        let (ac, acs) = c(|c| c.ac);
        let (n, ns) = c(|c| c.nodes as f64);
        MetricsRow {
            domain: domain.to_string(),
            method: method.to_string(),
            p_q1: p1,
            p_q2: p2,
            p_q3: p3,
            top1_q1: t1,
            top1_q2: t2,
            top1_q3: t3,
            c0,
            mc,
            ac,
            n,
            p_q1_sd: p1s,
            p_q2_sd: p2s,
            p_q3_sd: p3s,
            top1_q1_sd: t1s,
            top1_q2_sd: t2s,
            top1_q3_sd: t3s,
            c0_sd: c0s,
            mc_sd: mcs,
            ac_sd: acs,
            n_sd: ns,
            top1_strict_q1: q(|m| m.top1_strict[0]).0,
            top1_strict_q2: q(|m| m.top1_strict[1]).0,
            top1_strict_q3: q(|m| m.top1_strict[2]).0,
            trajectories: runs.len(),
            failures,
        }
    }
}

pub fn write_metrics_csv<W: std::io::Write>(rows: &[MetricsRow], w: W) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_metrics_csv<R: std::io::Read>(r: R) -> Result<Vec<MetricsRow>, csv::Error> {
    csv::Reader::from_reader(r).deserialize().collect()
}

use std::f64::consts::TAU;

use serde::Serialize;

use rayon::prelude::*;

use crate::error::{coords, Error, Result};
use crate::fieldcalc::sweep::par_map;
use crate::fieldcalc::{time_nodes, Grid, Point};

use super::loops::ContactLoop;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Positive,
    NonNegative,
    Indefinite,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PositivityThresholds {
    /// Minimum must exceed this for a positive verdict.
    pub margin: f64,
    /// Minima in `[-zero_band, margin]` count as non-negative.
    pub zero_band: f64,
}

impl Default for PositivityThresholds {
    fn default() -> Self {
        Self {
            margin: 0.0,
            zero_band: 1e-12,
        }
    }
}

/// Minimum of the Hamiltonian over the grid at one time node.
#[derive(Clone, Debug, Serialize)]
pub struct SliceMinimum {
    pub t: f64,
    pub min: f64,
    pub argmin: Vec<f64>,
}

/// Sampled certificate: grid minimum of the Hamiltonian over space and time.
#[derive(Clone, Debug, Serialize)]
pub struct PositivityCertificate {
    pub grid: String,
    pub nodes: usize,
    pub time_nodes: usize,
    pub min: f64,
    pub argmin: Vec<f64>,
    pub argmin_time: f64,
    pub margin: f64,
    pub verdict: Verdict,
    pub slices: Vec<SliceMinimum>,
}

impl PositivityCertificate {
    pub fn is_positive(&self) -> bool {
        self.verdict == Verdict::Positive
    }
}

pub fn certify_positivity(l: &ContactLoop, grid: &Grid, time_count: usize) -> Result<PositivityCertificate> {
    certify_positivity_with(l, grid, &time_nodes(time_count), &PositivityThresholds::default())
}

pub fn certify_positivity_with(
    l: &ContactLoop,
    grid: &Grid,
    times: &[f64],
    thr: &PositivityThresholds,
) -> Result<PositivityCertificate> {
    certify_scalar(grid, times, thr, |p, t| l.hamiltonian().eval(p, t))
}

/// Positivity certificate of an arbitrary time-dependent function on a grid.
pub fn certify_scalar<F>(grid: &Grid, times: &[f64], thr: &PositivityThresholds, h: F) -> Result<PositivityCertificate>
where
    F: Fn(&Point, f64) -> Result<f64> + Sync + Send,
{
    if grid.is_empty() || times.is_empty() {
        return Err(Error::Usage("positivity certificate needs a non-empty grid and time set".into()));
    }
    let pts = grid.points();
    let nt = times.len();
    let fresh = || vec![(f64::INFINITY, usize::MAX); nt];
    let best = (0..pts.len())
        .into_par_iter()
        .try_fold(fresh, |mut acc, i| -> Result<Vec<(f64, usize)>> {
            for (k, &t) in times.iter().enumerate() {
                let v = h(&pts[i], t)?;
                if v < acc[k].0 || (v == acc[k].0 && i < acc[k].1) {
                    acc[k] = (v, i);
                }
            }
            Ok(acc)
        })
        .try_reduce(fresh, |a, b| {
            Ok(a.into_iter()
                .zip(b)
                .map(|(x, y)| if y.0 < x.0 || (y.0 == x.0 && y.1 < x.1) { y } else { x })
                .collect())
        })?;
    let slices: Vec<SliceMinimum> = best
        .iter()
        .zip(times)
        .map(|(&(m, i), &t)| SliceMinimum {
            t,
            min: m,
            argmin: pts.get(i).map(coords).unwrap_or_default(),
        })
        .collect();
    let (k, &(min, i)) = best
        .iter()
        .enumerate()
        .fold((0, &best[0]), |a, b| if b.1 .0 < a.1 .0 { b } else { a });
    let verdict = if min > thr.margin {
        Verdict::Positive
    } else if min >= -thr.zero_band {
        Verdict::NonNegative
    } else {
        Verdict::Indefinite
    };
    Ok(PositivityCertificate {
        grid: grid.label().to_string(),
        nodes: grid.len(),
        time_nodes: nt,
        min,
        argmin: pts.get(i).map(coords).unwrap_or_default(),
        argmin_time: times[k],
        margin: min - thr.margin,
        verdict,
        slices,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AutonomyConfig {
    pub ball_samples: usize,
    pub time_samples: usize,
    pub orbit_samples: usize,
    pub tolerance: f64,
    pub embedding_threshold: f64,
    pub seed: u64,
}

impl Default for AutonomyConfig {
    fn default() -> Self {
        Self {
            ball_samples: 16,
            time_samples: 12,
            orbit_samples: 256,
            tolerance: 1e-6,
            embedding_threshold: 1e-3,
            seed: 11,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AutonomyReport {
    pub point: Vec<f64>,
    pub radius: f64,
    pub max_variation: f64,
    pub worst: Vec<f64>,
    pub orbit_self_distance: f64,
    pub tolerance: f64,
    pub embedding_threshold: f64,
    pub locally_autonomous: bool,
}

/// Samples `F(phi_t(q), t0) - F(phi_t(q), t1)` for `q` near `p` and checks that the
/// orbit of `p` is an embedded circle.
pub fn check_local_autonomy(l: &ContactLoop, p: &Point, radius: f64, cfg: &AutonomyConfig) -> Result<AutonomyReport> {
    let dom = l.domain().clone();
    let center = dom.check(p)?;
    let ball = dom.sample_ball(&center, radius, cfg.ball_samples, cfg.seed);
    // offset keeps the time grid away from concatenation breakpoints
    let times: Vec<f64> = time_nodes(cfg.time_samples).iter().map(|t| t + 0.0137).collect();
    let ham = l.hamiltonian();
    let rows = par_map(&ball, |q| {
        let mut worst = (0.0, *q);
        for &t in &times {
            let x = l.flow(q, t)?;
            let vals = times.iter().map(|&s| ham.eval(&x, s)).collect::<Result<Vec<f64>>>()?;
            let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if hi - lo > worst.0 {
                worst = (hi - lo, x);
            }
        }
        Ok(worst)
    })?;
    let (var, wpt) = rows.into_iter().fold((0.0, center), |a, b| if b.0 > a.0 { b } else { a });
    let n = cfg.orbit_samples;
    let orbit = (0..n)
        .map(|j| l.flow(&center, TAU * j as f64 / n as f64))
        .collect::<Result<Vec<Point>>>()?;
    let mut self_dist = f64::INFINITY;
    for i in 0..n {
        for j in (i + 1)..n {
            self_dist = self_dist.min(dom.distance(&orbit[i], &orbit[j]));
        }
    }
    Ok(AutonomyReport {
        point: coords(&center),
        radius,
        max_variation: var,
        worst: coords(&wpt),
        orbit_self_distance: self_dist,
        tolerance: cfg.tolerance,
        embedding_threshold: cfg.embedding_threshold,
        locally_autonomous: var < cfg.tolerance && self_dist > cfg.embedding_threshold,
    })
}

//! FAR / FRR / accuracy curves and the equal error rate.
//!
//! A trial is accepted when its score is `≥ θ`.

use serde::Serialize;

use crate::error::{EvalError, Result};

const GRID_POINTS: usize = 2001;

/// Median wall-clock seconds per protocol phase.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct PhaseTimings {
    pub keygen: f64,
    pub enrol: f64,
    pub verify: f64,
    pub decrypt: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub label: String,
    pub genuine_trials: usize,
    pub imposter_trials: usize,
    pub thresholds: Vec<f64>,
    pub far: Vec<f64>,
    pub frr: Vec<f64>,
    pub accuracy: Vec<f64>,
    pub eer: f64,
    pub eer_threshold: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<PhaseTimings>,
}

/// Fraction of `sorted` that is `≥ t`.
fn frac_at_least(sorted: &[f64], t: f64) -> f64 {
    let below = sorted.partition_point(|&x| x < t);
    (sorted.len() - below) as f64 / sorted.len() as f64
}

fn sorted(v: &[f64], what: &str) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(EvalError::Empty(format!("no {what} scores")));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(EvalError::Spec(format!("non-finite {what} score")));
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(s)
}

/// Builds the curves on a uniform grid spanning all scores and locates the
/// FAR = FRR crossing by linear interpolation between grid points.
pub fn compute_eer(genuine: &[f64], imposter: &[f64]) -> Result<EvalReport> {
    let g = sorted(genuine, "genuine")?;
    let i = sorted(imposter, "imposter")?;
    let lo = g[0].min(i[0]);
    let hi = g[g.len() - 1].max(i[i.len() - 1]);
    let margin = ((hi - lo) * 1e-3).max(1e-9);
    let (lo, hi) = (lo - margin, hi + margin);
    let step = (hi - lo) / (GRID_POINTS - 1) as f64;
    let thresholds: Vec<f64> = (0..GRID_POINTS).map(|k| lo + step * k as f64).collect();
    let far: Vec<f64> = thresholds.iter().map(|&t| frac_at_least(&i, t)).collect();
    let frr: Vec<f64> = thresholds.iter().map(|&t| 1.0 - frac_at_least(&g, t)).collect();
    let (ng, ni) = (g.len() as f64, i.len() as f64);
    let accuracy = far
        .iter()
        .zip(&frr)
        .map(|(fa, fr)| ((1.0 - fr) * ng + (1.0 - fa) * ni) / (ng + ni))
        .collect();

    // FAR starts at 1 and FRR at 0, so a crossing exists on the grid
    let k = (0..GRID_POINTS).find(|&k| far[k] <= frr[k]).unwrap_or(GRID_POINTS - 1);
    let (eer, eer_threshold) = if k == 0 {
        ((far[0] + frr[0]) / 2.0, thresholds[0])
    } else {
        let d0 = far[k - 1] - frr[k - 1];
        let d1 = far[k] - frr[k];
        let t = if d0 == d1 { 0.0 } else { d0 / (d0 - d1) };
        let fa = far[k - 1] + t * (far[k] - far[k - 1]);
        let fr = frr[k - 1] + t * (frr[k] - frr[k - 1]);
        ((fa + fr) / 2.0, thresholds[k - 1] + t * step)
    };
    Ok(EvalReport {
        label: String::new(),
        genuine_trials: g.len(),
        imposter_trials: i.len(),
        thresholds,
        far,
        frr,
        accuracy,
        eer,
        eer_threshold,
        timings: None,
    })
}

/// Fraction of `scores` accepted at `theta`.
pub fn acceptance_rate(scores: &[f64], theta: f64) -> f64 {
    if scores.is_empty() {
        return 0.0;
    }
    scores.iter().filter(|&&s| s >= theta).count() as f64 / scores.len() as f64
}

impl EvalReport {
    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// FAR and FRR at an arbitrary threshold, read from the nearest grid point.
    pub fn rates_at(&self, theta: f64) -> (f64, f64) {
        let k = self.thresholds.partition_point(|&t| t < theta).min(self.thresholds.len() - 1);
        (self.far[k], self.frr[k])
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Summary line plus a coarse curve table.
    pub fn to_table(&self, rows: usize) -> String {
        let mut s = format!(
            "{}: EER {:.3}% at θ={:.4} ({} genuine, {} imposter trials)\n",
            if self.label.is_empty() { "report" } else { &self.label },
            self.eer * 100.0,
            self.eer_threshold,
            self.genuine_trials,
            self.imposter_trials
        );
        s.push_str(&format!("{:>10} {:>8} {:>8} {:>9}\n", "threshold", "FAR%", "FRR%", "accuracy%"));
        let rows = rows.max(2);
        for r in 0..rows {
            let k = r * (self.thresholds.len() - 1) / (rows - 1);
            s.push_str(&format!(
                "{:>10.4} {:>8.3} {:>8.3} {:>9.3}\n",
                self.thresholds[k],
                self.far[k] * 100.0,
                self.frr[k] * 100.0,
                self.accuracy[k] * 100.0
            ));
        }
        if let Some(t) = &self.timings {
            s.push_str(&format!(
                "timings (s): keygen {:.4}  enrol {:.4}  verify {:.4}  decrypt {:.4}\n",
                t.keygen, t.enrol, t.verify, t.decrypt
            ));
        }
        s
    }
}

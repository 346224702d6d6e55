//! Cosine scoring: plaintext references, Newton-Raphson inverse square root,
//! and the encrypted approximate-score circuit.
//!
//! With `a = (w1ᵀQw1)(w2ᵀQw2)` the cosine score is `w1ᵀQw2 / sqrt(a)`. One
//! Newton step from `x0` approximates `1/sqrt(a)` by `1.5·x0 − 0.5·a·x0³`,
//! so the server only needs the enrollment ciphertexts `[1.5·x0·w1]` and
//! `[0.5·x0³·w1]` to evaluate
//!
//! ```text
//! score ≈ [1.5x0·w1]ᵀQ[w2] − ([0.5x0³·w1]ᵀQ[w1] · [w2]ᵀQ[w2]) · [w1]ᵀQ[w2]
//! ```
//!
//! in four multiplicative levels.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use crate::ckks::{Ciphertext, CkksContext, Evaluator, ParameterSet};
use crate::error::{Error, Result};
use crate::linalg::{dot_rotate_sum, matvec_diag, EncodedMatrix, Layout, MatvecMode, PackedVector, ProjectionMatrix};

/// Newton-Raphson settings for the inverse square root.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonConfig {
    pub x0: f64,
    pub iterations: usize,
    /// Empirical `(lo, hi)` bounds of `1/sqrt(a)` the start value came from.
    pub bounds: Option<(f64, f64)>,
}

impl NewtonConfig {
    /// Start value used when no calibration data is available.
    pub const DEFAULT_X0: f64 = 650.0;

    pub fn new(x0: f64, iterations: usize) -> Result<Self> {
        if !(x0.is_finite() && x0 > 0.0) {
            return Err(Error::Config(format!("x0 must be positive and finite, got {x0}")));
        }
        if !(1..=2).contains(&iterations) {
            return Err(Error::Config(format!("{iterations} Newton iterations requested; 1 or 2 are supported")));
        }
        Ok(Self { x0, iterations, bounds: None })
    }

    pub fn with_iterations(self, iterations: usize) -> Result<Self> {
        Ok(Self { bounds: self.bounds, ..Self::new(self.x0, iterations)? })
    }
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self { x0: Self::DEFAULT_X0, iterations: 1, bounds: None }
    }
}

/// Linear-interpolation percentile of sorted data, `p` in `[0, 100]`.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let pos = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// `x0 = 0.45·(lo + hi)` from the 1st and 99th percentiles of observed
/// `1/sqrt(a)` values.
pub fn derive_x0(inv_sqrt_samples: &[f64]) -> Result<NewtonConfig> {
    if inv_sqrt_samples.is_empty() {
        return Err(Error::Config("cannot derive x0 from an empty sample".into()));
    }
    if inv_sqrt_samples.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
        return Err(Error::Config("x0 samples must be positive and finite".into()));
    }
    let mut sorted = inv_sqrt_samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let lo = percentile(&sorted, 1.0);
    let hi = percentile(&sorted, 99.0);
    let mut cfg = NewtonConfig::new(0.45 * (lo + hi), 1)?;
    cfg.bounds = Some((lo, hi));
    Ok(cfg)
}

/// Applies `x ← 1.5x − 0.5·a·x³` `cfg.iterations` times from `cfg.x0`.
/// Diverges when `x0` is far from `1/sqrt(a)`; that is the caller's concern.
pub fn newton_inv_sqrt_plain(a: f64, cfg: &NewtonConfig) -> f64 {
    let mut x = cfg.x0;
    for _ in 0..cfg.iterations {
        x = 1.5 * x - 0.5 * a * x * x * x;
    }
    x
}

/// `(w1ᵀQw2, w1ᵀQw1, w2ᵀQw2)`.
fn bilinear_terms(w1: &[f64], w2: &[f64], q: &ProjectionMatrix) -> Result<(f64, f64, f64)> {
    if w1.len() != q.dim() || w2.len() != q.dim() {
        return Err(Error::Structure(format!(
            "vectors of length {} and {} for a {}-dimensional matrix",
            w1.len(),
            w2.len(),
            q.dim()
        )));
    }
    let q1 = q.left_mul(w1);
    let s12 = q1.iter().zip(w2).map(|(x, y)| x * y).sum();
    let s11 = q1.iter().zip(w1).map(|(x, y)| x * y).sum();
    Ok((s12, s11, q.bilinear(w2, w2)))
}

/// Exact cosine score `w1ᵀQw2 / sqrt(w1ᵀQw1 · w2ᵀQw2)`.
pub fn cosine_score_plain(w1: &[f64], w2: &[f64], q: &ProjectionMatrix) -> Result<f64> {
    let (s12, s11, s22) = bilinear_terms(w1, w2, q)?;
    let a = s11 * s22;
    if !(a > 0.0) {
        return Err(Error::Degenerate(format!("score denominator {a} is not positive")));
    }
    Ok(s12 / a.sqrt())
}

/// The score with `1/sqrt(a)` replaced by its Newton approximation: the
/// real-arithmetic value the encrypted circuit approximates.
pub fn score_approx_plain(w1: &[f64], w2: &[f64], q: &ProjectionMatrix, cfg: &NewtonConfig) -> Result<f64> {
    let (s12, s11, s22) = bilinear_terms(w1, w2, q)?;
    Ok(newton_inv_sqrt_plain(s11 * s22, cfg) * s12)
}

/// `w1ᵀQw1 · w2ᵀQw2`, the quantity whose inverse square root is approximated.
pub fn denominator_plain(w1: &[f64], w2: &[f64], q: &ProjectionMatrix) -> Result<f64> {
    let (_, s11, s22) = bilinear_terms(w1, w2, q)?;
    Ok(s11 * s22)
}

/// One step of the circuit with its level annotation (1-based stage index).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stage {
    pub level: usize,
    pub op: &'static str,
    pub description: String,
}

/// Level decomposition of the score circuit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScoreCircuitPlan {
    pub iterations: usize,
    pub required_levels: usize,
    pub stages: Vec<Stage>,
}

impl ScoreCircuitPlan {
    pub fn new(iterations: usize) -> Result<Self> {
        let st = |level, op, d: &str| Stage { level, op, description: d.to_string() };
        let mut stages = vec![
            st(1, "matvec", "A = [1.5x0·w1]ᵀQ"),
            st(1, "matvec", "B = [0.5x0³·w1]ᵀQ · 1/(1.5x0²)  (constant folded into diagonals)"),
            st(1, "matvec", "C = [w2]ᵀQ"),
            st(1, "matvec", "D = A · 1/(1.5x0) = [w1]ᵀQ  (scale metadata only)"),
            st(2, "dot", "t1 = A·[w2] = 1.5x0·w1ᵀQw2"),
            st(2, "dot", "t2 = B·[1.5x0·w1] = 0.5x0²·w1ᵀQw1"),
            st(2, "dot", "t3 = C·[w2] = w2ᵀQw2"),
            st(2, "dot", "t4 = D·[w2] = w1ᵀQw2  (same ciphertext as t1)"),
            st(3, "mul", "u = t2·t3 = 0.5x0²·a"),
        ];
        match iterations {
            1 => {
                stages.push(st(4, "mul", "v = u·x0·t4 = 0.5x0³·a·w1ᵀQw2"));
                stages.push(st(4, "align", "t1 brought to level 4 by two all-ones constant products"));
                stages.push(st(4, "sub", "score = t1 − v"));
            }
            2 => {
                stages.push(st(3, "affine", "z = 1.5 − u   (x1 = x0·z)"));
                stages.push(st(4, "mul", "z² = z·z"));
                stages.push(st(4, "mul", "y = x0·t4·z = x1·w1ᵀQw2"));
                stages.push(st(5, "mul", "r = u·z² = 0.5·a·x1²"));
                stages.push(st(5, "affine", "h = 1.5 − r"));
                stages.push(st(6, "mul", "score = y·h = x2·w1ᵀQw2"));
            }
            other => {
                return Err(Error::Config(format!("{other} Newton iterations requested; 1 or 2 are supported")))
            }
        }
        let required_levels = stages.iter().map(|s| s.level).max().unwrap_or(0);
        Ok(Self { iterations, required_levels, stages })
    }

    /// Fails with a plan error when `available` levels cannot hold the circuit.
    pub fn check_levels(&self, available: usize) -> Result<()> {
        if available < self.required_levels {
            return Err(Error::Plan { required: self.required_levels, available });
        }
        Ok(())
    }

    pub fn check_params(&self, params: &ParameterSet) -> Result<()> {
        self.check_levels(params.levels())
    }

    /// Human-readable table: stage, op, level before → after, for ciphertexts
    /// entering at `input_level`.
    pub fn report(&self, input_level: usize) -> String {
        let mut s = format!(
            "score circuit: {} Newton iteration(s), {} levels\n{:<6} {:<7} {:>6} {:>6}  description\n",
            self.iterations, self.required_levels, "stage", "op", "before", "after"
        );
        for st in &self.stages {
            let before = input_level as i64 - st.level as i64 + 1;
            let after = input_level as i64 - st.level as i64;
            s.push_str(&format!(
                "L{:<5} {:<7} {:>6} {:>6}  {}\n",
                st.level, st.op, before, after, st.description
            ));
        }
        s
    }
}

impl fmt::Display for ScoreCircuitPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.report(self.required_levels))
    }
}

/// Wall-clock time and output level of one evaluated stage.
#[derive(Clone, Debug, PartialEq)]
pub struct StageTiming {
    pub level: usize,
    pub name: &'static str,
    pub level_after: usize,
    pub elapsed: Duration,
}

#[derive(Clone, Debug)]
pub struct ScoreOutput {
    pub ct: Ciphertext,
    pub timings: Vec<StageTiming>,
}

/// Server-side evaluator of the encrypted score for one matrix and layout.
///
/// Holds no key material; keys arrive with the per-user [`Evaluator`].
/// Encoded diagonals are cached per `(level, constant)` and shared between
/// users.
#[derive(Debug)]
pub struct ScoreCircuit {
    ctx: Arc<CkksContext>,
    q: ProjectionMatrix,
    layout: Layout,
    mode: MatvecMode,
    plan: ScoreCircuitPlan,
    cache: Mutex<HashMap<(usize, u64), Arc<EncodedMatrix>>>,
}

impl ScoreCircuit {
    pub fn new(ctx: Arc<CkksContext>, q: ProjectionMatrix, iterations: usize, mode: MatvecMode) -> Result<Self> {
        let plan = ScoreCircuitPlan::new(iterations)?;
        plan.check_params(ctx.params())?;
        let layout = Layout::new(q.dim(), ctx.slots())?;
        Ok(Self { ctx, q, layout, mode, plan, cache: Mutex::new(HashMap::new()) })
    }

    pub fn plan(&self) -> &ScoreCircuitPlan {
        &self.plan
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn matrix(&self) -> &ProjectionMatrix {
        &self.q
    }

    pub fn context(&self) -> &Arc<CkksContext> {
        &self.ctx
    }

    /// Rotation steps the client must provide keys for.
    pub fn rotation_steps(&self) -> Vec<usize> {
        crate::linalg::required_rotation_steps(&self.layout, self.mode, self.ctx.slots())
    }

    /// Encodes the diagonal sets used for enrollments with this `x0` at
    /// `level` ahead of the first evaluation.
    pub fn prepare(&self, level: usize, x0: f64) -> Result<()> {
        self.encoded(level, 1.0)?;
        self.encoded(level, 1.0 / (1.5 * x0 * x0))?;
        Ok(())
    }

    fn encoded(&self, level: usize, factor: f64) -> Result<Arc<EncodedMatrix>> {
        let key = (level, factor.to_bits());
        if let Some(m) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(m.clone());
        }
        let q = if factor == 1.0 {
            self.q.clone()
        } else {
            ProjectionMatrix::new(self.q.dim(), self.q.entries().iter().map(|x| x * factor).collect())?
        };
        let m = Arc::new(EncodedMatrix::new(&self.ctx, &q, self.layout, level, self.mode)?);
        self.cache.lock().expect("cache lock").insert(key, m.clone());
        Ok(m)
    }

    /// Evaluates the circuit. `ct_a = [1.5·x0·w1]`, `ct_b = [0.5·x0³·w1]`,
    /// `w2` the probe; all three at the same level. Slot
    /// `layout.block_offset(k)` of the result holds the score for block `k`.
    pub fn evaluate(
        &self,
        ev: &Evaluator,
        ct_a: &PackedVector,
        ct_b: &PackedVector,
        w2: &PackedVector,
        x0: f64,
    ) -> Result<ScoreOutput> {
        if !(x0.is_finite() && x0 > 0.0) {
            return Err(Error::Config(format!("x0 must be positive and finite, got {x0}")));
        }
        for pv in [ct_a, ct_b, w2] {
            if pv.layout != self.layout {
                return Err(Error::Structure(format!(
                    "packed vector of dimension {} for a circuit of dimension {}",
                    pv.layout.dim, self.layout.dim
                )));
            }
        }
        let level = w2.level();
        self.plan.check_levels(level)?;
        if ct_a.level() != level || ct_b.level() != level {
            return Err(Error::Alignment(format!(
                "enrollment ciphertexts at levels {}/{} but probe at {level}",
                ct_a.level(),
                ct_b.level()
            )));
        }
        let mut timings = Vec::new();
        let mut clock = Instant::now();
        let mut mark = |stage: usize, name: &'static str, after: usize, timings: &mut Vec<StageTiming>| {
            timings.push(StageTiming { level: stage, name, level_after: after, elapsed: clock.elapsed() });
            clock = Instant::now();
        };

        // Level 1. D = A/α is a scale reinterpretation of A; B carries the
        // folded constant 1/(α·x0) so every later product stays near unit
        // magnitude in the ciphertext.
        let plain = self.encoded(level, 1.0)?;
        let folded = self.encoded(level, 1.0 / (1.5 * x0 * x0))?;
        let (ab, c) = rayon::join(
            || -> Result<_> { Ok((matvec_diag(ev, &plain, ct_a)?, matvec_diag(ev, &folded, ct_b)?)) },
            || matvec_diag(ev, &plain, w2),
        );
        let (a, b) = ab?;
        let c = c?;
        mark(1, "L1 matvec", a.level(), &mut timings);

        // Level 2
        let drop = |pv: &PackedVector| -> Result<PackedVector> {
            Ok(PackedVector { ct: ev.mod_drop_to(&pv.ct, level - 1)?, ..pv.clone() })
        };
        let w2_1 = drop(w2)?;
        let a_1 = drop(ct_a)?;
        let (t1, t23) = rayon::join(
            || dot_rotate_sum(ev, &a, &w2_1),
            || -> Result<_> { Ok((dot_rotate_sum(ev, &b, &a_1)?, dot_rotate_sum(ev, &c, &w2_1)?)) },
        );
        // t1 = α·s12, t2 = 0.5·x0²·s11, t3 = s22
        let t1 = t1?;
        let (t2, t3) = t23?;
        // D·[w2] = s12 is t1 with the scale multiplied by α; x0·s12 is t1 / 1.5
        let x0_t4 = t1.clone().with_scale(t1.scale() * 1.5);
        mark(2, "L2 dot", t1.level(), &mut timings);

        // Level 3: u = 0.5·x0²·a
        let u = ev.mul_rescale(&t2, &t3)?;
        mark(3, "L3 mul", u.level(), &mut timings);

        let ct = match self.plan.iterations {
            1 => {
                // v = u·x0·s12 = 0.5·x0³·a·s12
                let v = ev.mul_rescale(&u, &ev.mod_drop_to(&x0_t4, u.level())?)?;
                let left = self.align(ev, &t1, &v)?;
                let out = ev.sub(&left, &v)?;
                mark(4, "L4 mul+sub", out.level(), &mut timings);
                out
            }
            _ => {
                // x1 = x0·z with z = 1.5 − u
                let z = ev.add_const(&ev.negate(&u), 1.5)?;
                let z2 = ev.mul_rescale(&z, &z)?;
                let y = ev.mul_rescale(&ev.mod_drop_to(&x0_t4, z.level())?, &z)?;
                mark(4, "L4 mul", z2.level(), &mut timings);
                // u·z² = 0.5·a·x1²
                let r = ev.mul_rescale(&ev.mod_drop_to(&u, z2.level())?, &z2)?;
                let h = ev.add_const(&ev.negate(&r), 1.5)?;
                mark(5, "L5 mul", h.level(), &mut timings);
                let out = ev.mul_rescale(&ev.mod_drop_to(&y, h.level())?, &h)?;
                mark(6, "L6 mul", out.level(), &mut timings);
                out
            }
        };
        debug_assert_eq!(ct.level(), level - self.plan.required_levels);
        Ok(ScoreOutput { ct, timings })
    }

    /// Brings `x` to the level and scale of `target` with all-ones constant
    /// products, one per level dropped.
    fn align(&self, ev: &Evaluator, x: &Ciphertext, target: &Ciphertext) -> Result<Ciphertext> {
        let moduli = self.ctx.chain_moduli();
        let mut cur = x.clone();
        while cur.level() > target.level() {
            let q_last = moduli[cur.level()].value() as f64;
            let c = if cur.level() == target.level() + 1 {
                (target.scale() * q_last / cur.scale()).round()
            } else {
                q_last
            };
            if c < 2.0 {
                return Err(Error::Alignment(format!("cannot align scale {:e} to {:e}", cur.scale(), target.scale())));
            }
            cur = ev.rescale(&ev.mul_const(&cur, 1.0, c)?)?;
        }
        if cur.level() != target.level() {
            return Err(Error::Alignment("operand is below the target level".into()));
        }
        // c was rounded to an integer; the residual relative error is < 2^-30
        Ok(cur.with_scale(target.scale()))
    }
}

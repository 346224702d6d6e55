//! Synthetic speaker corpus.
//!
//! Each speaker has a mean direction built from a shared component plus an
//! individual one. An utterance tilts that direction by a random angle
//! towards a fresh random direction, and its norm is log-normal. With the
//! default norm distribution `1/sqrt(a)` for a pair of utterances and an
//! identity matrix concentrates around 650.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use hevf_core::ring::rng_from_seed;
use hevf_core::serial::{self, Reader, Writer};

use crate::error::{EvalError, Result};

/// HEVF container kind for corpus files (not bound to a parameter set).
pub const CORPUS_KIND: u8 = 8;

#[derive(Clone, Debug, PartialEq)]
pub struct CorpusSpec {
    pub speakers: usize,
    /// Test utterances per speaker.
    pub tests: usize,
    pub dim: usize,
    /// Weight of the direction shared by all speakers, in `[0, 1)`.
    pub shared: f64,
    /// Mean angle (radians) between an utterance and its speaker's direction.
    pub spread: f64,
    /// Standard deviation of that angle.
    pub jitter: f64,
    pub norm_median: f64,
    /// Standard deviation of the log-norm.
    pub norm_sigma: f64,
}

impl CorpusSpec {
    /// 151 speakers with two test utterances each. The angles suit
    /// `dim` in the low hundreds; small dimensions want a smaller `spread`
    /// (about 0.5 at 16) for a comparable error rate.
    pub fn new(dim: usize) -> Self {
        Self {
            speakers: 151,
            tests: 2,
            dim,
            shared: 0.3,
            spread: 0.8,
            jitter: 0.3,
            norm_median: 0.0392,
            norm_sigma: 0.17,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.speakers < 2 || self.tests < 1 || self.dim < 2 {
            return Err(EvalError::Spec(format!(
                "need at least 2 speakers, 1 test and dimension 2; got {} / {} / {}",
                self.speakers, self.tests, self.dim
            )));
        }
        let finite = [self.shared, self.spread, self.jitter, self.norm_median, self.norm_sigma];
        if finite.iter().any(|x| !x.is_finite())
            || !(0.0..1.0).contains(&self.shared)
            || self.spread < 0.0
            || self.jitter < 0.0
            || self.norm_median <= 0.0
            || self.norm_sigma < 0.0
        {
            return Err(EvalError::Spec(format!("degenerate corpus generator parameters {self:?}")));
        }
        Ok(())
    }
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self::new(200)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticCorpus {
    pub dim: usize,
    /// One enrollment vector per speaker.
    pub enroll: Vec<Vec<f64>>,
    /// `tests[s][j]` is test utterance `j` of speaker `s`.
    pub tests: Vec<Vec<Vec<f64>>>,
}

fn gaussian_vec(rng: &mut impl Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| StandardNormal.sample(rng)).collect()
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= n);
}

fn unit(rng: &mut impl Rng, d: usize) -> Vec<f64> {
    let mut v = gaussian_vec(rng, d);
    normalize(&mut v);
    v
}

fn utterance(rng: &mut impl Rng, mean: &[f64], spec: &CorpusSpec) -> Vec<f64> {
    // random direction orthogonal to the speaker mean
    let mut e = gaussian_vec(rng, spec.dim);
    let proj: f64 = e.iter().zip(mean).map(|(a, b)| a * b).sum();
    e.iter_mut().zip(mean).for_each(|(x, m)| *x -= proj * m);
    normalize(&mut e);
    let z: f64 = StandardNormal.sample(rng);
    let angle = (spec.spread + spec.jitter * z).clamp(0.0, std::f64::consts::FRAC_PI_2);
    let zn: f64 = StandardNormal.sample(rng);
    let norm = spec.norm_median * (spec.norm_sigma * zn).exp();
    mean.iter().zip(&e).map(|(m, x)| norm * (angle.cos() * m + angle.sin() * x)).collect()
}

impl SyntheticCorpus {
    pub fn generate(spec: &CorpusSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = rng_from_seed(seed);
        let shared = unit(&mut rng, spec.dim);
        let mut enroll = Vec::with_capacity(spec.speakers);
        let mut tests = Vec::with_capacity(spec.speakers);
        let w = (1.0 - spec.shared * spec.shared).sqrt();
        for _ in 0..spec.speakers {
            let own = unit(&mut rng, spec.dim);
            let mut mean: Vec<f64> = shared.iter().zip(&own).map(|(g, r)| spec.shared * g + w * r).collect();
            normalize(&mut mean);
            enroll.push(utterance(&mut rng, &mean, spec));
            tests.push((0..spec.tests).map(|_| utterance(&mut rng, &mean, spec)).collect());
        }
        Ok(Self { dim: spec.dim, enroll, tests })
    }

    pub fn speakers(&self) -> usize {
        self.enroll.len()
    }

    pub fn tests_per_speaker(&self) -> usize {
        self.tests.first().map_or(0, Vec::len)
    }

    /// `(speaker, test index)` pairs scored against their own enrollment.
    pub fn genuine_trials(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for s in 0..self.speakers() {
            for j in 0..self.tests[s].len() {
                out.push((s, s, j));
            }
        }
        out
    }

    /// `(enrolled speaker, claimant speaker, test index)` for every claimant
    /// other than the enrolled one.
    pub fn imposter_trials(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for s in 0..self.speakers() {
            for u in 0..self.speakers() {
                if u == s {
                    continue;
                }
                for j in 0..self.tests[u].len() {
                    out.push((s, u, j));
                }
            }
        }
        out
    }

    fn check(&self) -> Result<()> {
        let t = self.tests_per_speaker();
        if self.speakers() < 2 || t == 0 || self.dim < 2 {
            return Err(EvalError::Spec("corpus needs at least 2 speakers, 1 test and dimension 2".into()));
        }
        let ok = self.enroll.iter().all(|v| v.len() == self.dim)
            && self.tests.len() == self.speakers()
            && self.tests.iter().all(|ts| ts.len() == t && ts.iter().all(|v| v.len() == self.dim))
            && self.enroll.iter().chain(self.tests.iter().flatten()).flatten().all(|x| x.is_finite());
        if !ok {
            return Err(EvalError::Format("ragged or non-finite corpus".into()));
        }
        Ok(())
    }

    /// Text format: a `# hevf-corpus speakers=S tests=T dim=d` header, then
    /// one vector per line as `speaker,slot,x1,…,xd` where slot 0 is the
    /// enrollment and slots 1..=T are tests.
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "# hevf-corpus speakers={} tests={} dim={}\n",
            self.speakers(),
            self.tests_per_speaker(),
            self.dim
        );
        for (sp, e) in self.enroll.iter().enumerate() {
            for (slot, v) in std::iter::once(e).chain(&self.tests[sp]).enumerate() {
                s.push_str(&format!("{sp},{slot}"));
                for x in v {
                    s.push_str(&format!(",{x:e}"));
                }
                s.push('\n');
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| EvalError::Format("empty corpus file".into()))?;
        let fields = header
            .strip_prefix("# hevf-corpus")
            .ok_or_else(|| EvalError::Format("missing '# hevf-corpus' header".into()))?;
        let (mut speakers, mut tests, mut dim) = (None, None, None);
        for kv in fields.split_whitespace() {
            let (k, v) = kv.split_once('=').ok_or_else(|| EvalError::Format(format!("bad header field {kv:?}")))?;
            let v: usize = v.parse().map_err(|_| EvalError::Format(format!("bad header value {kv:?}")))?;
            match k {
                "speakers" => speakers = Some(v),
                "tests" => tests = Some(v),
                "dim" => dim = Some(v),
                _ => return Err(EvalError::Format(format!("unknown header field {k:?}"))),
            }
        }
        let (speakers, tests, dim) = match (speakers, tests, dim) {
            (Some(s), Some(t), Some(d)) => (s, t, d),
            _ => return Err(EvalError::Format("header needs speakers, tests and dim".into())),
        };
        let total = tests
            .checked_add(1)
            .and_then(|t| speakers.checked_mul(t))
            .filter(|n| dim > 0 && n.checked_mul(dim).is_some_and(|c| c <= text.len()))
            .ok_or_else(|| EvalError::Format("header sizes do not fit the file".into()))?;
        let mut slots: Vec<Option<Vec<f64>>> = vec![None; total];
        for line in lines {
            let mut parts = line.split(',').map(str::trim);
            let mut index = |what: &str| -> Result<usize> {
                parts
                    .next()
                    .and_then(|p| p.parse().ok())
                    .ok_or_else(|| EvalError::Format(format!("bad {what} in line {line:?}")))
            };
            let sp = index("speaker")?;
            let slot = index("slot")?;
            if sp >= speakers || slot > tests {
                return Err(EvalError::Format(format!("vector ({sp},{slot}) outside the declared corpus")));
            }
            let v = parts
                .map(|p| p.parse::<f64>().map_err(|_| EvalError::Format(format!("bad value {p:?}"))))
                .collect::<Result<Vec<_>>>()?;
            if v.len() != dim {
                return Err(EvalError::Format(format!("vector ({sp},{slot}) has {} values, expected {dim}", v.len())));
            }
            let cell = &mut slots[sp * (tests + 1) + slot];
            if cell.replace(v).is_some() {
                return Err(EvalError::Format(format!("duplicate vector ({sp},{slot})")));
            }
        }
        let mut vecs = slots.into_iter();
        let mut enroll = Vec::with_capacity(speakers);
        let mut test_vecs = Vec::with_capacity(speakers);
        for sp in 0..speakers {
            let mut take = || vecs.next().flatten().ok_or_else(|| EvalError::Format(format!("speaker {sp} is incomplete")));
            enroll.push(take()?);
            test_vecs.push((0..tests).map(|_| take()).collect::<Result<Vec<_>>>()?);
        }
        let c = Self { dim, enroll, tests: test_vecs };
        c.check()?;
        Ok(c)
    }

    /// Binary format: HEVF container of kind [`CORPUS_KIND`] with a zero
    /// parameter hash, then `S, T, d` as u32 and all vectors as f64 in the
    /// text format's order.
    pub fn to_binary(&self) -> Vec<u8> {
        let mut w = Writer::with_header(CORPUS_KIND, &[0; 32]);
        w.u32(self.speakers() as u32);
        w.u32(self.tests_per_speaker() as u32);
        w.u32(self.dim as u32);
        for (sp, e) in self.enroll.iter().enumerate() {
            for v in std::iter::once(e).chain(&self.tests[sp]) {
                v.iter().for_each(|x| w.f64(*x));
            }
        }
        w.finish()
    }

    pub fn from_binary(bytes: &[u8]) -> Result<Self> {
        let fmt = |e: hevf_core::Error| EvalError::Format(e.to_string());
        let mut r: Reader<'_> = serial::open(bytes, CORPUS_KIND, &[0; 32]).map_err(fmt)?;
        let speakers = r.u32().map_err(fmt)? as usize;
        let tests = r.u32().map_err(fmt)? as usize;
        let dim = r.u32().map_err(fmt)? as usize;
        if speakers == 0 || tests == 0 || dim == 0 {
            return Err(EvalError::Format("corpus with an empty dimension".into()));
        }
        let values = speakers
            .checked_mul(tests + 1)
            .and_then(|n| n.checked_mul(dim))
            .filter(|&n| n.checked_mul(8) == Some(r.remaining()))
            .ok_or_else(|| EvalError::Format("declared sizes do not match the payload".into()))?;
        let mut flat = Vec::with_capacity(values);
        for _ in 0..values {
            flat.push(r.f64().map_err(fmt)?);
        }
        let mut chunks = flat.chunks_exact(dim.max(1)).map(<[f64]>::to_vec);
        let mut enroll = Vec::with_capacity(speakers);
        let mut test_vecs = Vec::with_capacity(speakers);
        for _ in 0..speakers {
            enroll.push(chunks.next().unwrap_or_default());
            test_vecs.push((0..tests).map(|_| chunks.next().unwrap_or_default()).collect());
        }
        let c = Self { dim, enroll, tests: test_vecs };
        c.check()?;
        Ok(c)
    }

    /// Accepts either format.
    pub fn from_file_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.starts_with(&serial::MAGIC) {
            Self::from_binary(bytes)
        } else {
            let text = std::str::from_utf8(bytes).map_err(|_| EvalError::Format("corpus text is not UTF-8".into()))?;
            Self::from_text(text)
        }
    }
}

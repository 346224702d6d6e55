//! Plaintext-matrix × encrypted-vector products and encrypted dot products.
//!
//! Slot layout: a ciphertext holds `blocks` independent vectors. Block `k`
//! starts at slot `k·stride` with `stride = 2n`, `n` the next power of two
//! at or above the logical dimension `d`. A freshly packed block is
//! `[v_0 … v_{d-1}, 0 … 0]`; the zero tail gives cyclic rotations room to
//! work without leaking across blocks.

use rand::Rng;

use crate::ckks::{decrypt_values, encode, encrypt, Ciphertext, CkksContext, Evaluator, Plaintext, PublicKey, SecretKey};
use crate::error::{Error, Result};
use crate::serial::Writer;

/// Slot layout shared by every packed vector in one computation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Layout {
    pub dim: usize,
    pub padded: usize,
    pub stride: usize,
    pub blocks: usize,
}

impl Layout {
    pub fn new(dim: usize, slots: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Structure("vector dimension must be positive".into()));
        }
        let padded = dim.next_power_of_two();
        let stride = 2 * padded;
        if stride > slots {
            return Err(Error::Structure(format!(
                "dimension {dim} needs {stride} slots per block but only {slots} are available"
            )));
        }
        Ok(Self { dim, padded, stride, blocks: slots / stride })
    }

    /// Slot vector holding `vectors[k]` in block `k`.
    pub fn slot_vector(&self, vectors: &[&[f64]]) -> Result<Vec<f64>> {
        if vectors.len() > self.blocks {
            return Err(Error::Structure(format!(
                "{} vectors exceed the {} blocks of this layout",
                vectors.len(),
                self.blocks
            )));
        }
        let mut slots = vec![0.0; self.blocks * self.stride];
        for (k, v) in vectors.iter().enumerate() {
            if v.len() != self.dim {
                return Err(Error::Structure(format!("vector of length {} for dimension {}", v.len(), self.dim)));
            }
            slots[k * self.stride..k * self.stride + self.dim].copy_from_slice(v);
        }
        Ok(slots)
    }

    /// First `dim` slots of each block.
    pub fn extract(&self, slots: &[f64]) -> Vec<Vec<f64>> {
        (0..self.blocks)
            .map(|k| slots[k * self.stride..k * self.stride + self.dim].to_vec())
            .collect()
    }

    /// Slot holding the scalar result for block `k` after a dot product.
    pub fn block_offset(&self, k: usize) -> usize {
        k * self.stride
    }
}

/// An encrypted batch of `count` vectors in the given layout.
#[derive(Clone, Debug)]
pub struct PackedVector {
    pub ct: Ciphertext,
    pub layout: Layout,
    pub count: usize,
}

impl PackedVector {
    pub fn level(&self) -> usize {
        self.ct.level()
    }

    /// Multiplies the represented values by the public constant `c` at no
    /// cost: the ciphertext is unchanged and only its scale is reinterpreted.
    pub fn scaled_by(&self, c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::Encoding(format!("metadata scaling needs a positive constant, got {c}")));
        }
        Ok(Self { ct: self.ct.clone().with_scale(self.ct.scale() / c), ..self.clone() })
    }
}

/// Zero-pads and encrypts up to `layout.blocks` vectors at the top level.
pub fn pack(
    ctx: &CkksContext,
    pk: &PublicKey,
    layout: Layout,
    vectors: &[&[f64]],
    rng: &mut impl Rng,
) -> Result<PackedVector> {
    let slots = layout.slot_vector(vectors)?;
    let pt = encode(ctx, &slots, ctx.default_scale(), ctx.max_level())?;
    Ok(PackedVector { ct: encrypt(ctx, &pt, pk, rng)?, layout, count: vectors.len() })
}

/// Packs one vector with the layout derived from its length.
pub fn pack_one(ctx: &CkksContext, pk: &PublicKey, v: &[f64], rng: &mut impl Rng) -> Result<PackedVector> {
    let layout = Layout::new(v.len(), ctx.slots())?;
    pack(ctx, pk, layout, &[v], rng)
}

/// Decrypts and returns the packed vectors, each of length `dim`.
pub fn unpack(ctx: &CkksContext, sk: &SecretKey, pv: &PackedVector) -> Result<Vec<Vec<f64>>> {
    let slots = decrypt_values(ctx, &pv.ct, sk)?;
    let mut out = pv.layout.extract(&slots);
    out.truncate(pv.count);
    Ok(out)
}

/// Square plaintext matrix `Q`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl ProjectionMatrix {
    pub fn new(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if dim == 0 || entries.len() != dim * dim {
            return Err(Error::Structure(format!(
                "{} entries do not form a non-empty {dim}×{dim} matrix",
                entries.len()
            )));
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::Structure("matrix has non-finite entries".into()));
        }
        Ok(Self { dim, entries })
    }

    pub fn identity(dim: usize) -> Self {
        let mut entries = vec![0.0; dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = 1.0;
        }
        Self { dim, entries }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Structure("matrix rows are not square".into()));
        }
        Self::new(dim, rows.concat())
    }

    /// `Q = P·Pᵀ` for a `d×k` projection `P`; the result is checked to be
    /// symmetric positive semidefinite.
    pub fn from_projection(p: &[Vec<f64>]) -> Result<Self> {
        let dim = p.len();
        let k = p.first().map(Vec::len).unwrap_or(0);
        if dim == 0 || k == 0 || p.iter().any(|r| r.len() != k) {
            return Err(Error::Structure("projection must be a non-empty rectangular matrix".into()));
        }
        let mut entries = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                entries[i * dim + j] = p[i].iter().zip(&p[j]).map(|(a, b)| a * b).sum();
            }
        }
        let q = Self::new(dim, entries)?;
        if !q.is_symmetric(1e-9) || !q.is_positive_semidefinite() {
            return Err(Error::Degenerate("P·Pᵀ is not symmetric positive semidefinite".into()));
        }
        Ok(q)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.dim + col]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.dim).all(|i| (0..i).all(|j| (self.entry(i, j) - self.entry(j, i)).abs() <= tol))
    }

    /// Cholesky with a small relative diagonal shift; fails on any
    /// negative pivot beyond rounding.
    pub fn is_positive_semidefinite(&self) -> bool {
        let d = self.dim;
        let trace: f64 = (0..d).map(|i| self.entry(i, i)).sum();
        let shift = 1e-10 * trace.abs().max(1e-300) / d as f64;
        let mut l = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..=i {
                let mut s = 0.5 * (self.entry(i, j) + self.entry(j, i));
                if i == j {
                    s += shift;
                }
                for k in 0..j {
                    s -= l[i * d + k] * l[j * d + k];
                }
                if i == j {
                    if s < 0.0 {
                        return false;
                    }
                    l[i * d + i] = s.sqrt();
                } else {
                    l[i * d + j] = if l[j * d + j] > 0.0 { s / l[j * d + j] } else { 0.0 };
                }
            }
        }
        true
    }

    /// Generalised cyclic diagonal `i`: element `j` is `Q[j][(j+i) mod d]`.
    pub fn diagonal(&self, i: usize) -> Vec<f64> {
        let d = self.dim;
        (0..d).map(|j| self.entry(j, (j + i) % d)).collect()
    }

    /// Diagonal `i` of `Qᵀ`; summing `rot(w, i) ⊙` these yields `wᵀQ`.
    fn transposed_diagonal(&self, i: usize) -> Vec<f64> {
        let d = self.dim;
        (0..d).map(|j| self.entry((j + i) % d, j)).collect()
    }

    /// Plaintext `wᵀQ`.
    pub fn left_mul(&self, w: &[f64]) -> Vec<f64> {
        let d = self.dim;
        (0..d).map(|j| (0..d).map(|k| w[k] * self.entry(k, j)).sum()).collect()
    }

    /// Plaintext bilinear form `aᵀQb`.
    pub fn bilinear(&self, a: &[f64], b: &[f64]) -> f64 {
        self.left_mul(a).iter().zip(b).map(|(x, y)| x * y).sum()
    }

    /// Whitespace- or comma-separated rows, one per line; `#` starts a comment.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let row = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|t| !t.is_empty())
                .map(|t| t.parse::<f64>().map_err(|_| Error::Format(format!("line {}: bad number '{t}'", n + 1))))
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Self::from_rows(&rows).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for i in 0..self.dim {
            let row: Vec<String> = (0..self.dim).map(|j| format!("{:?}", self.entry(i, j))).collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
        s
    }

    /// HEVF container of kind [`MATRIX_KIND`], not bound to a parameter set.
    pub fn to_binary(&self) -> Vec<u8> {
        let mut w = Writer::with_header(MATRIX_KIND, &[0; 32]);
        w.u32(self.dim as u32);
        for &x in &self.entries {
            w.f64(x);
        }
        w.finish()
    }

    pub fn from_binary(bytes: &[u8]) -> Result<Self> {
        let mut r = crate::serial::open(bytes, MATRIX_KIND, &[0; 32])?;
        let dim = r.u32()? as usize;
        if dim == 0 || dim > 1 << 12 || r.remaining() != dim * dim * 8 {
            return Err(Error::Format(format!("matrix of dimension {dim} does not match payload length")));
        }
        let entries = (0..dim * dim).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        Self::new(dim, entries).map_err(|e| Error::Format(e.to_string()))
    }

    /// Reads either format, sniffing the HEVF magic.
    pub fn from_file_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.starts_with(&crate::serial::MAGIC) {
            Self::from_binary(bytes)
        } else {
            let text = std::str::from_utf8(bytes).map_err(|_| Error::Format("matrix file is not UTF-8".into()))?;
            Self::from_text(text)
        }
    }
}

/// Container kind for serialized matrices.
pub const MATRIX_KIND: u8 = 7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum MatvecMode {
    /// One rotation per diagonal.
    Naive,
    /// Baby-step/giant-step: about `2·sqrt(d)` rotations.
    #[default]
    BabyGiant,
}

impl MatvecMode {
    /// `(baby, giant)` split for dimension `d`; naive is `(d, 1)`.
    pub fn split(self, dim: usize) -> (usize, usize) {
        match self {
            MatvecMode::Naive => (dim, 1),
            MatvecMode::BabyGiant => {
                let n1 = ((dim as f64).sqrt().ceil() as usize).next_power_of_two().min(dim);
                (n1, dim.div_ceil(n1))
            }
        }
    }
}

/// Rotation steps (left, modulo the slot count) needed by [`matvec_diag`]
/// and [`dot_rotate_sum`] for this layout.
pub fn required_rotation_steps(layout: &Layout, mode: MatvecMode, slots: usize) -> Vec<usize> {
    let d = layout.dim;
    let (n1, n2) = mode.split(d);
    let mut steps: Vec<usize> = (1..n1).collect();
    steps.extend((1..n2).map(|g| g * n1));
    steps.push(slots - d);
    let mut s = 1;
    while s < layout.padded {
        steps.push(s);
        s <<= 1;
    }
    steps.retain(|&s| s % slots != 0);
    steps.sort_unstable();
    steps.dedup();
    steps
}

/// Diagonals of `Qᵀ` encoded for one layout and level.
///
/// Each plaintext is encoded at scale `q_level`, the prime the following
/// rescale divides out, so a matvec leaves the ciphertext scale unchanged.
#[derive(Clone, Debug)]
pub struct EncodedMatrix {
    layout: Layout,
    level: usize,
    mode: MatvecMode,
    diagonals: Vec<Plaintext>,
}

impl EncodedMatrix {
    pub fn new(ctx: &CkksContext, q: &ProjectionMatrix, layout: Layout, level: usize, mode: MatvecMode) -> Result<Self> {
        if q.dim() != layout.dim {
            return Err(Error::Structure(format!("matrix dimension {} vs vector dimension {}", q.dim(), layout.dim)));
        }
        if level == 0 {
            return Err(Error::LevelExhausted("matrix-vector product needs one level".into()));
        }
        let scale = ctx.chain_moduli()[level].value() as f64;
        let (n1, _) = mode.split(layout.dim);
        let d = layout.dim;
        let mut diagonals = Vec::with_capacity(d);
        let mut slots = vec![0.0; layout.blocks * layout.stride];
        for i in 0..d {
            let diag = q.transposed_diagonal(i);
            // giant-step rotation by g·n1 is applied after the product, so
            // the diagonal is pre-shifted right by the same amount
            let shift = match mode {
                MatvecMode::Naive => 0,
                MatvecMode::BabyGiant => (i / n1) * n1,
            };
            slots.iter_mut().for_each(|x| *x = 0.0);
            for k in 0..layout.blocks {
                let base = k * layout.stride + shift;
                slots[base..base + d].copy_from_slice(&diag);
            }
            diagonals.push(encode(ctx, &slots, scale, level)?);
        }
        Ok(Self { layout, level, mode, diagonals })
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn mode(&self) -> MatvecMode {
        self.mode
    }
}

/// `wᵀQ` for every packed vector; consumes exactly one level.
///
/// The input is first duplicated within each block (`[v, v]`) so that
/// in-block rotations by `0..d` act cyclically on `v`.
pub fn matvec_diag(ev: &Evaluator, m: &EncodedMatrix, w: &PackedVector) -> Result<PackedVector> {
    if w.layout != m.layout {
        return Err(Error::Structure("packed vector and encoded matrix use different layouts".into()));
    }
    if w.level() != m.level {
        return Err(Error::Alignment(format!(
            "vector at level {} but matrix encoded for level {}",
            w.level(),
            m.level
        )));
    }
    let d = m.layout.dim;
    let dup = ev.add(&w.ct, &ev.rotate(&w.ct, -(d as i64))?)?;
    let (n1, n2) = m.mode.split(d);
    let baby: Vec<Ciphertext> = (0..n1.min(d)).map(|b| ev.rotate(&dup, b as i64)).collect::<Result<_>>()?;
    let mut acc: Option<Ciphertext> = None;
    for g in 0..n2 {
        let mut inner: Option<Ciphertext> = None;
        for (b, rotated) in baby.iter().enumerate() {
            let i = g * n1 + b;
            if i >= d {
                break;
            }
            let term = ev.mul_plain(rotated, &m.diagonals[i])?;
            inner = Some(match inner {
                None => term,
                Some(s) => ev.add(&s, &term)?,
            });
        }
        let Some(inner) = inner else { continue };
        let shifted = ev.rotate(&inner, (g * n1) as i64)?;
        acc = Some(match acc {
            None => shifted,
            Some(s) => ev.add(&s, &shifted)?,
        });
    }
    let acc = acc.expect("dimension is positive");
    Ok(PackedVector { ct: ev.rescale(&acc)?, layout: w.layout, count: w.count })
}

/// Slotwise product then `log2(n)` rotate-and-add halvings; slot
/// `layout.block_offset(k)` holds `⟨a_k, b_k⟩`. Consumes exactly one level.
pub fn dot_rotate_sum(ev: &Evaluator, a: &PackedVector, b: &PackedVector) -> Result<Ciphertext> {
    if a.layout != b.layout {
        return Err(Error::Structure("dot product of vectors with different layouts".into()));
    }
    let n = a.layout.padded;
    if !n.is_power_of_two() {
        return Err(Error::Structure(format!("padded dimension {n} is not a power of two")));
    }
    let mut acc = ev.mul_rescale(&a.ct, &b.ct)?;
    let mut step = n / 2;
    while step >= 1 {
        acc = ev.add(&acc, &ev.rotate(&acc, step as i64)?)?;
        step /= 2;
    }
    Ok(acc)
}

/// Replicates slot `block_offset(k)` over the first `n` slots of each block.
/// Masks with a 0/1 plaintext first, consuming one level.
pub fn broadcast_scalar(ev: &Evaluator, ct: &Ciphertext, layout: &Layout) -> Result<Ciphertext> {
    let ctx = ev.context();
    if ct.level() == 0 {
        return Err(Error::LevelExhausted("broadcast needs one level for masking".into()));
    }
    let mut mask = vec![0.0; layout.blocks * layout.stride];
    for k in 0..layout.blocks {
        mask[layout.block_offset(k)] = 1.0;
    }
    let q_last = ctx.chain_moduli()[ct.level()].value() as f64;
    let pt = encode(ctx, &mask, q_last, ct.level())?;
    let mut acc = ev.rescale(&ev.mul_plain(ct, &pt)?)?;
    let mut step = 1;
    while step < layout.padded {
        acc = ev.add(&acc, &ev.rotate(&acc, -(step as i64))?)?;
        step *= 2;
    }
    Ok(acc)
}

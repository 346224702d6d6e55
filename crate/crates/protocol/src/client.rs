//! Client side: key ownership, request construction and the accept/reject
//! decision.

use std::io::{BufReader, BufWriter};
use std::net::{TcpStream, ToSocketAddrs};
use std::sync::Arc;

use rand::Rng;

use hevf_core::ckks::{decrypt_values, keygen_with_steps, CkksContext, KeyBundle, SecretKey};
use hevf_core::linalg::{pack, required_rotation_steps, Layout, MatvecMode};

use crate::error::{ProtocolError, Result};
use crate::frame::{read_frame, write_frame};
use crate::message::{EnrollmentRequest, Message, VerificationRequest, VerificationResponse};
use crate::server::MAX_FRAME_LEN;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Decision {
    pub score: f64,
    pub accept: bool,
}

/// Rotation keys a client must publish for vectors of dimension `dim`.
pub fn rotation_steps(ctx: &CkksContext, dim: usize, mode: MatvecMode) -> Result<Vec<usize>> {
    let layout = Layout::new(dim, ctx.slots())?;
    Ok(required_rotation_steps(&layout, mode, ctx.slots()))
}

/// Decrypts the response and accepts each score `≥ theta`.
pub fn client_decide(ctx: &CkksContext, resp: &VerificationResponse, secret: &SecretKey, theta: f64) -> Result<Vec<Decision>> {
    let layout = resp.layout(ctx)?;
    let slots = decrypt_values(ctx, &resp.ct_score, secret)?;
    Ok((0..resp.count)
        .map(|k| {
            let score = slots[layout.block_offset(k)];
            Decision { score, accept: score >= theta }
        })
        .collect())
}

#[derive(Clone, Debug)]
pub struct Client {
    ctx: Arc<CkksContext>,
    keys: KeyBundle,
    layout: Layout,
}

impl Client {
    /// Generates a fresh key bundle with the rotation keys the server needs.
    pub fn generate(ctx: Arc<CkksContext>, dim: usize, mode: MatvecMode, rng: &mut impl Rng) -> Result<Self> {
        let steps = rotation_steps(&ctx, dim, mode)?;
        let keys = keygen_with_steps(&ctx, &steps, rng)?;
        Self::from_keys(ctx, keys, dim)
    }

    pub fn from_keys(ctx: Arc<CkksContext>, keys: KeyBundle, dim: usize) -> Result<Self> {
        let layout = Layout::new(dim, ctx.slots())?;
        Ok(Self { ctx, keys, layout })
    }

    pub fn context(&self) -> &Arc<CkksContext> {
        &self.ctx
    }

    pub fn keys(&self) -> &KeyBundle {
        &self.keys
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    /// Builds `{ID, pk, relin, galois, [1.5·x0·w1], [0.5·x0³·w1], x0}`; up
    /// to `layout.blocks` enrollment vectors share one request.
    pub fn enrollment(&self, user_id: &str, w1s: &[&[f64]], x0: f64, rng: &mut impl Rng) -> Result<EnrollmentRequest> {
        if user_id.is_empty() {
            return Err(ProtocolError::Malformed("empty user id".into()));
        }
        if !(x0.is_finite() && x0 > 0.0) {
            return Err(hevf_core::Error::Config(format!("x0 must be positive and finite, got {x0}")).into());
        }
        let scaled = |c: f64| -> Vec<Vec<f64>> { w1s.iter().map(|w| w.iter().map(|x| c * x).collect()).collect() };
        let a = scaled(1.5 * x0);
        let b = scaled(0.5 * x0 * x0 * x0);
        let a_refs: Vec<&[f64]> = a.iter().map(Vec::as_slice).collect();
        let b_refs: Vec<&[f64]> = b.iter().map(Vec::as_slice).collect();
        Ok(EnrollmentRequest {
            user_id: user_id.to_string(),
            params: self.ctx.params().clone(),
            public: self.keys.public.clone(),
            relin: self.keys.relin.clone(),
            galois: self.keys.galois.clone(),
            ct_a: pack(&self.ctx, &self.keys.public, self.layout, &a_refs, rng)?,
            ct_b: pack(&self.ctx, &self.keys.public, self.layout, &b_refs, rng)?,
            x0,
        })
    }

    pub fn verification(&self, user_id: &str, w2s: &[&[f64]], rng: &mut impl Rng) -> Result<VerificationRequest> {
        if user_id.is_empty() {
            return Err(ProtocolError::Malformed("empty user id".into()));
        }
        Ok(VerificationRequest {
            user_id: user_id.to_string(),
            ct_w2: pack(&self.ctx, &self.keys.public, self.layout, w2s, rng)?,
        })
    }

    pub fn decide(&self, resp: &VerificationResponse, theta: f64) -> Result<Vec<Decision>> {
        client_decide(&self.ctx, resp, &self.keys.secret, theta)
    }
}

/// A framed connection to a running server.
#[derive(Debug)]
pub struct Connection {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
}

impl Connection {
    pub fn connect(addr: impl ToSocketAddrs) -> Result<Self> {
        let stream = TcpStream::connect(addr)?;
        Ok(Self { reader: BufReader::new(stream.try_clone()?), writer: BufWriter::new(stream) })
    }

    /// Sends one message and waits for the reply; server-side failures
    /// surface as [`ProtocolError::Remote`].
    pub fn request(&mut self, ctx: &CkksContext, msg: &Message) -> Result<Message> {
        write_frame(&mut self.writer, msg.kind() as u8, &msg.to_bytes(ctx))?;
        let frame = read_frame(&mut self.reader, MAX_FRAME_LEN)?
            .ok_or_else(|| ProtocolError::Malformed("server closed the connection".into()))?;
        match Message::from_bytes(ctx, &frame.payload)? {
            Message::Error(e) => Err(ProtocolError::Remote(e.message)),
            m if m.kind() as u8 != frame.kind => Err(ProtocolError::Malformed("frame kind disagrees with payload".into())),
            m => Ok(m),
        }
    }
}

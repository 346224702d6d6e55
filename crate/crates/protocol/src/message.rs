//! Protocol messages. Each is an HEVF container (kind ≥ 16) bound to the
//! parameter-set hash; nested keys and ciphertexts are embedded as complete
//! containers.

use hevf_core::ckks::{validate_params, Ciphertext, CkksContext, GaloisKeys, ParameterSet, PublicKey, RelinKey};
use hevf_core::linalg::{Layout, PackedVector};
use hevf_core::serial::{self, params_from_bytes, params_to_bytes, Encodable, Reader, Writer};

use crate::error::{ProtocolError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum MessageKind {
    EnrollmentRequest = 16,
    VerificationRequest = 17,
    VerificationResponse = 18,
    EnrollAck = 19,
    Error = 20,
}

impl MessageKind {
    pub fn from_u8(v: u8) -> Option<Self> {
        Some(match v {
            16 => MessageKind::EnrollmentRequest,
            17 => MessageKind::VerificationRequest,
            18 => MessageKind::VerificationResponse,
            19 => MessageKind::EnrollAck,
            20 => MessageKind::Error,
            _ => return None,
        })
    }
}

fn malformed(e: hevf_core::Error) -> ProtocolError {
    ProtocolError::Malformed(e.to_string())
}

fn open<'a>(bytes: &'a [u8], kind: MessageKind, ctx: &CkksContext) -> Result<Reader<'a>> {
    let h = serial::peek_header(bytes).map_err(malformed)?;
    if h.kind != kind as u8 {
        return Err(ProtocolError::Malformed(format!("expected message kind {}, found {}", kind as u8, h.kind)));
    }
    if h.params_hash != ctx.params_hash() {
        return Err(ProtocolError::ParamMismatch("message was built for a different parameter set".into()));
    }
    serial::open(bytes, kind as u8, &ctx.params_hash()).map_err(malformed)
}

fn write_packed(w: &mut Writer, ctx: &CkksContext, pv: &PackedVector) {
    w.u32(pv.layout.dim as u32);
    w.u32(pv.count as u32);
    w.blob(&pv.ct.to_bytes(ctx));
}

fn read_packed(ctx: &CkksContext, r: &mut Reader<'_>) -> Result<PackedVector> {
    let dim = r.u32().map_err(malformed)? as usize;
    let count = r.u32().map_err(malformed)? as usize;
    let layout = Layout::new(dim, ctx.slots()).map_err(malformed)?;
    if count == 0 || count > layout.blocks {
        return Err(ProtocolError::Malformed(format!("{count} vectors in a layout with {} blocks", layout.blocks)));
    }
    let ct = Ciphertext::from_bytes(ctx, r.blob().map_err(malformed)?).map_err(malformed)?;
    Ok(PackedVector { ct, layout, count })
}

fn read_nested<T: Encodable>(ctx: &CkksContext, r: &mut Reader<'_>) -> Result<T> {
    T::from_bytes(ctx, r.blob().map_err(malformed)?).map_err(malformed)
}

fn read_user(r: &mut Reader<'_>) -> Result<String> {
    let id = r.string().map_err(malformed)?;
    if id.is_empty() {
        return Err(ProtocolError::Malformed("empty user id".into()));
    }
    Ok(id)
}

/// `{ID, pk, relin, galois, [1.5·x0·w1], [0.5·x0³·w1], x0}`.
#[derive(Clone, Debug)]
pub struct EnrollmentRequest {
    pub user_id: String,
    pub params: ParameterSet,
    pub public: PublicKey,
    pub relin: RelinKey,
    pub galois: GaloisKeys,
    pub ct_a: PackedVector,
    pub ct_b: PackedVector,
    pub x0: f64,
}

impl EnrollmentRequest {
    pub fn to_bytes(&self, ctx: &CkksContext) -> Vec<u8> {
        let mut w = Writer::with_header(MessageKind::EnrollmentRequest as u8, &ctx.params_hash());
        w.string(&self.user_id);
        w.blob(&params_to_bytes(&self.params));
        w.f64(self.x0);
        w.blob(&self.public.to_bytes(ctx));
        w.blob(&self.relin.to_bytes(ctx));
        w.blob(&self.galois.to_bytes(ctx));
        write_packed(&mut w, ctx, &self.ct_a);
        write_packed(&mut w, ctx, &self.ct_b);
        w.finish()
    }

    /// Reads the embedded parameter set without a context and validates it
    /// against the security table.
    pub fn peek_params(bytes: &[u8]) -> Result<ParameterSet> {
        let mut r = Reader::new(bytes);
        let h = serial::read_header(&mut r).map_err(malformed)?;
        if h.kind != MessageKind::EnrollmentRequest as u8 {
            return Err(ProtocolError::Malformed(format!("expected an enrollment request, found kind {}", h.kind)));
        }
        read_user(&mut r)?;
        let params = params_from_bytes(r.blob().map_err(malformed)?).map_err(malformed)?;
        if params.hash() != h.params_hash {
            return Err(ProtocolError::Malformed("embedded parameter set does not match the header".into()));
        }
        Ok(validate_params(params)?)
    }

    pub fn from_bytes(ctx: &CkksContext, bytes: &[u8]) -> Result<Self> {
        let mut r = open(bytes, MessageKind::EnrollmentRequest, ctx)?;
        let user_id = read_user(&mut r)?;
        let params = params_from_bytes(r.blob().map_err(malformed)?).map_err(malformed)?;
        if params.hash() != ctx.params_hash() {
            return Err(ProtocolError::ParamMismatch("embedded parameter set differs from the server's".into()));
        }
        let x0 = r.f64().map_err(malformed)?;
        let public = read_nested(ctx, &mut r)?;
        let relin = read_nested(ctx, &mut r)?;
        let galois = read_nested(ctx, &mut r)?;
        let ct_a = read_packed(ctx, &mut r)?;
        let ct_b = read_packed(ctx, &mut r)?;
        r.expect_end().map_err(malformed)?;
        Ok(Self { user_id, params, public, relin, galois, ct_a, ct_b, x0 })
    }

    /// Structural checks beyond decoding: full-level ciphertexts with one
    /// layout and a usable x0.
    pub fn validate(&self, ctx: &CkksContext) -> Result<()> {
        if !(self.x0.is_finite() && self.x0 > 0.0) {
            return Err(ProtocolError::Malformed(format!("x0 must be positive, got {}", self.x0)));
        }
        for pv in [&self.ct_a, &self.ct_b] {
            if pv.level() != ctx.max_level() {
                return Err(ProtocolError::Malformed(format!(
                    "enrollment ciphertext at level {}, expected {}",
                    pv.level(),
                    ctx.max_level()
                )));
            }
        }
        if self.ct_a.layout != self.ct_b.layout || self.ct_a.count != self.ct_b.count {
            return Err(ProtocolError::Malformed("enrollment ciphertexts use different layouts".into()));
        }
        Ok(())
    }
}

/// `{ID, [w2]}`.
#[derive(Clone, Debug)]
pub struct VerificationRequest {
    pub user_id: String,
    pub ct_w2: PackedVector,
}

impl VerificationRequest {
    pub fn to_bytes(&self, ctx: &CkksContext) -> Vec<u8> {
        let mut w = Writer::with_header(MessageKind::VerificationRequest as u8, &ctx.params_hash());
        w.string(&self.user_id);
        write_packed(&mut w, ctx, &self.ct_w2);
        w.finish()
    }

    pub fn from_bytes(ctx: &CkksContext, bytes: &[u8]) -> Result<Self> {
        let mut r = open(bytes, MessageKind::VerificationRequest, ctx)?;
        let user_id = read_user(&mut r)?;
        let ct_w2 = read_packed(ctx, &mut r)?;
        r.expect_end().map_err(malformed)?;
        Ok(Self { user_id, ct_w2 })
    }
}

/// Encrypted score; slot `layout.block_offset(k)` holds the score of vector `k`.
#[derive(Clone, Debug)]
pub struct VerificationResponse {
    pub user_id: String,
    pub ct_score: Ciphertext,
    pub dim: usize,
    pub count: usize,
    pub plan_report: String,
}

impl VerificationResponse {
    pub fn layout(&self, ctx: &CkksContext) -> Result<Layout> {
        Ok(Layout::new(self.dim, ctx.slots())?)
    }

    pub fn to_bytes(&self, ctx: &CkksContext) -> Vec<u8> {
        let mut w = Writer::with_header(MessageKind::VerificationResponse as u8, &ctx.params_hash());
        w.string(&self.user_id);
        w.u32(self.dim as u32);
        w.u32(self.count as u32);
        w.string(&self.plan_report);
        w.blob(&self.ct_score.to_bytes(ctx));
        w.finish()
    }

    pub fn from_bytes(ctx: &CkksContext, bytes: &[u8]) -> Result<Self> {
        let mut r = open(bytes, MessageKind::VerificationResponse, ctx)?;
        let user_id = read_user(&mut r)?;
        let dim = r.u32().map_err(malformed)? as usize;
        let count = r.u32().map_err(malformed)? as usize;
        let layout = Layout::new(dim, ctx.slots()).map_err(malformed)?;
        if count == 0 || count > layout.blocks {
            return Err(ProtocolError::Malformed(format!("{count} scores in a layout with {} blocks", layout.blocks)));
        }
        let plan_report = r.string().map_err(malformed)?;
        let ct_score = read_nested(ctx, &mut r)?;
        r.expect_end().map_err(malformed)?;
        Ok(Self { user_id, ct_score, dim, count, plan_report })
    }
}

/// Server confirmation of a stored enrollment with the SHA-256 of the record.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnrollAck {
    pub user_id: String,
    pub record_digest: [u8; 32],
}

impl EnrollAck {
    pub fn to_bytes(&self, ctx: &CkksContext) -> Vec<u8> {
        let mut w = Writer::with_header(MessageKind::EnrollAck as u8, &ctx.params_hash());
        w.string(&self.user_id);
        w.bytes(&self.record_digest);
        w.finish()
    }

    pub fn from_bytes(ctx: &CkksContext, bytes: &[u8]) -> Result<Self> {
        let mut r = open(bytes, MessageKind::EnrollAck, ctx)?;
        let user_id = read_user(&mut r)?;
        let record_digest = r.array32().map_err(malformed)?;
        r.expect_end().map_err(malformed)?;
        Ok(Self { user_id, record_digest })
    }
}

/// Error report sent over a connection instead of a response.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ErrorMessage {
    pub message: String,
}

impl ErrorMessage {
    pub fn to_bytes(&self, ctx: &CkksContext) -> Vec<u8> {
        let mut w = Writer::with_header(MessageKind::Error as u8, &ctx.params_hash());
        w.string(&self.message);
        w.finish()
    }

    pub fn from_bytes(ctx: &CkksContext, bytes: &[u8]) -> Result<Self> {
        let mut r = open(bytes, MessageKind::Error, ctx)?;
        let message = r.string().map_err(malformed)?;
        r.expect_end().map_err(malformed)?;
        Ok(Self { message })
    }
}

#[derive(Clone, Debug)]
pub enum Message {
    Enroll(Box<EnrollmentRequest>),
    Verify(VerificationRequest),
    Response(VerificationResponse),
    Ack(EnrollAck),
    Error(ErrorMessage),
}

impl Message {
    pub fn kind(&self) -> MessageKind {
        match self {
            Message::Enroll(_) => MessageKind::EnrollmentRequest,
            Message::Verify(_) => MessageKind::VerificationRequest,
            Message::Response(_) => MessageKind::VerificationResponse,
            Message::Ack(_) => MessageKind::EnrollAck,
            Message::Error(_) => MessageKind::Error,
        }
    }

    pub fn to_bytes(&self, ctx: &CkksContext) -> Vec<u8> {
        match self {
            Message::Enroll(m) => m.to_bytes(ctx),
            Message::Verify(m) => m.to_bytes(ctx),
            Message::Response(m) => m.to_bytes(ctx),
            Message::Ack(m) => m.to_bytes(ctx),
            Message::Error(m) => m.to_bytes(ctx),
        }
    }

    /// Dispatches on the container's kind byte.
    pub fn from_bytes(ctx: &CkksContext, bytes: &[u8]) -> Result<Self> {
        let h = serial::peek_header(bytes).map_err(malformed)?;
        match MessageKind::from_u8(h.kind) {
            Some(MessageKind::EnrollmentRequest) => Ok(Message::Enroll(Box::new(EnrollmentRequest::from_bytes(ctx, bytes)?))),
            Some(MessageKind::VerificationRequest) => Ok(Message::Verify(VerificationRequest::from_bytes(ctx, bytes)?)),
            Some(MessageKind::VerificationResponse) => Ok(Message::Response(VerificationResponse::from_bytes(ctx, bytes)?)),
            Some(MessageKind::EnrollAck) => Ok(Message::Ack(EnrollAck::from_bytes(ctx, bytes)?)),
            Some(MessageKind::Error) => Ok(Message::Error(ErrorMessage::from_bytes(ctx, bytes)?)),
            None => Err(ProtocolError::Malformed(format!("unknown message kind {}", h.kind))),
        }
    }
}

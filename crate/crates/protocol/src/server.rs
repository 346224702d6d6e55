//! Server side: enrollment storage and encrypted score evaluation.
//!
//! Only public material passes through here. There is no secret-key type in
//! this module's interface, so the server cannot decrypt what it computes.

use std::io::{BufReader, BufWriter};
use std::net::{TcpListener, TcpStream};
use std::sync::Arc;

use hevf_core::ckks::{CkksContext, Evaluator};
use hevf_core::linalg::{MatvecMode, ProjectionMatrix};
use hevf_core::score::ScoreCircuit;

use crate::error::{ProtocolError, Result};
use crate::frame::{read_frame, write_frame};
use crate::message::{EnrollAck, EnrollmentRequest, ErrorMessage, Message, VerificationRequest, VerificationResponse};
use crate::store::EnrollmentStore;

/// Upper bound on a single incoming frame (Galois keys dominate).
pub const MAX_FRAME_LEN: usize = u32::MAX as usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ServerConfig {
    pub iterations: usize,
    pub mode: MatvecMode,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self { iterations: 1, mode: MatvecMode::BabyGiant }
    }
}

#[derive(Debug)]
pub struct Server {
    ctx: Arc<CkksContext>,
    circuit: ScoreCircuit,
    store: EnrollmentStore,
}

impl Server {
    /// Fails with a plan error when the parameter set cannot hold the circuit.
    pub fn new(ctx: Arc<CkksContext>, q: ProjectionMatrix, store: EnrollmentStore, config: ServerConfig) -> Result<Self> {
        let circuit = ScoreCircuit::new(ctx.clone(), q, config.iterations, config.mode)?;
        Ok(Self { ctx, circuit, store })
    }

    pub fn context(&self) -> &Arc<CkksContext> {
        &self.ctx
    }

    pub fn store(&self) -> &EnrollmentStore {
        &self.store
    }

    pub fn circuit(&self) -> &ScoreCircuit {
        &self.circuit
    }

    /// Decodes, checks and stores a serialized enrollment request.
    pub fn enroll_bytes(&self, bytes: &[u8]) -> Result<EnrollAck> {
        let params = EnrollmentRequest::peek_params(bytes)?;
        if params.hash() != self.ctx.params_hash() {
            return Err(ProtocolError::ParamMismatch(format!(
                "request uses parameter set {:?} ({}), server is configured for {:?} ({})",
                params.name,
                params.chain_spec(),
                self.ctx.params().name,
                self.ctx.params().chain_spec()
            )));
        }
        let req = EnrollmentRequest::from_bytes(&self.ctx, bytes)?;
        self.check(&req)?;
        let record_digest = self.store.put(&req.user_id, bytes)?;
        Ok(EnrollAck { user_id: req.user_id, record_digest })
    }

    pub fn enroll(&self, req: &EnrollmentRequest) -> Result<EnrollAck> {
        self.enroll_bytes(&req.to_bytes(&self.ctx))
    }

    fn check(&self, req: &EnrollmentRequest) -> Result<()> {
        req.validate(&self.ctx)?;
        let dim = self.circuit.layout().dim;
        if req.ct_a.layout.dim != dim {
            return Err(ProtocolError::ParamMismatch(format!(
                "enrollment vectors have dimension {}, server matrix is {dim}x{dim}",
                req.ct_a.layout.dim
            )));
        }
        let have = req.galois.steps();
        if let Some(missing) = self.circuit.rotation_steps().into_iter().find(|s| !have.contains(s)) {
            return Err(ProtocolError::Core(hevf_core::Error::MissingGaloisKey(missing as i64)));
        }
        Ok(())
    }

    /// Loads the enrollment and evaluates the encrypted score.
    pub fn verify(&self, req: &VerificationRequest) -> Result<VerificationResponse> {
        let record = self.store.get(&req.user_id)?.ok_or_else(|| ProtocolError::UnknownUser(req.user_id.clone()))?;
        let enrolled = EnrollmentRequest::from_bytes(&self.ctx, &record)?;
        if req.ct_w2.layout != enrolled.ct_a.layout {
            return Err(ProtocolError::ParamMismatch(format!(
                "probe dimension {} does not match enrolled dimension {}",
                req.ct_w2.layout.dim, enrolled.ct_a.layout.dim
            )));
        }
        if req.ct_w2.count > enrolled.ct_a.count {
            return Err(ProtocolError::Malformed(format!(
                "{} probe vectors for {} enrolled vectors",
                req.ct_w2.count, enrolled.ct_a.count
            )));
        }
        let ev = Evaluator::with_keys(self.ctx.clone(), Arc::new(enrolled.relin), Arc::new(enrolled.galois));
        let input_level = req.ct_w2.level();
        let out = self.circuit.evaluate(&ev, &enrolled.ct_a, &enrolled.ct_b, &req.ct_w2, enrolled.x0)?;
        let mut plan_report = self.circuit.plan().report(input_level);
        for t in &out.timings {
            plan_report.push_str(&format!(
                "timing {:<11} level after {:>2}  {:>10.3} ms\n",
                t.name,
                t.level_after,
                t.elapsed.as_secs_f64() * 1e3
            ));
        }
        Ok(VerificationResponse {
            user_id: req.user_id.clone(),
            ct_score: out.ct,
            dim: req.ct_w2.layout.dim,
            count: req.ct_w2.count,
            plan_report,
        })
    }

    /// Handles one serialized message and returns the serialized reply.
    /// Failures become error messages so a connection survives bad input.
    pub fn handle(&self, kind: u8, payload: &[u8]) -> (u8, Vec<u8>) {
        let reply = self.dispatch(kind, payload).unwrap_or_else(|e| Message::Error(ErrorMessage { message: e.to_string() }));
        (reply.kind() as u8, reply.to_bytes(&self.ctx))
    }

    fn dispatch(&self, kind: u8, payload: &[u8]) -> Result<Message> {
        let h = hevf_core::serial::peek_header(payload).map_err(|e| ProtocolError::Malformed(e.to_string()))?;
        if h.kind != kind {
            return Err(ProtocolError::Malformed(format!("frame kind {kind} wraps a container of kind {}", h.kind)));
        }
        if kind == crate::message::MessageKind::EnrollmentRequest as u8 {
            return Ok(Message::Ack(self.enroll_bytes(payload)?));
        }
        match Message::from_bytes(&self.ctx, payload)? {
            Message::Verify(req) => Ok(Message::Response(self.verify(&req)?)),
            other => Err(ProtocolError::Malformed(format!("unexpected {:?} sent to server", other.kind()))),
        }
    }

    /// Serves framed requests on one connection until the peer closes it.
    pub fn serve_connection(&self, stream: TcpStream) -> Result<()> {
        let mut reader = BufReader::new(stream.try_clone()?);
        let mut writer = BufWriter::new(stream);
        while let Some(frame) = read_frame(&mut reader, MAX_FRAME_LEN)? {
            let (kind, reply) = self.handle(frame.kind, &frame.payload);
            write_frame(&mut writer, kind, &reply)?;
        }
        Ok(())
    }

    /// Accepts connections and serves each on its own thread. Stops after
    /// `max_connections` connections when given.
    pub fn serve(&self, listener: &TcpListener, max_connections: Option<usize>) -> Result<()> {
        std::thread::scope(|scope| {
            let mut served = 0usize;
            for stream in listener.incoming() {
                let stream = stream?;
                scope.spawn(move || {
                    if let Err(e) = self.serve_connection(stream) {
                        eprintln!("connection error: {e}");
                    }
                });
                served += 1;
                if max_connections.is_some_and(|m| served >= m) {
                    break;
                }
            }
            Ok(())
        })
    }
}

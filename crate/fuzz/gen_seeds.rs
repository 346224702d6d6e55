//! Writes the checked-in seed corpora under `corpus/<target>/`.

use std::collections::BTreeMap;
use std::path::Path;

use hevf_core::ckks::{encrypt_values, GaloisKeys};
use hevf_core::linalg::{MatvecMode, ProjectionMatrix};
use hevf_core::ring::rng_from_seed;
use hevf_core::serial::{params_to_bytes, Encodable};
use hevf_eval::{CorpusSpec, SyntheticCorpus};
use hevf_protocol::frame::encode_frame;
use hevf_protocol::{Client, EnrollAck, ErrorMessage, Message, VerificationResponse};

fn put(target: &str, name: &str, bytes: &[u8]) {
    let dir = Path::new("corpus").join(target);
    std::fs::create_dir_all(&dir).unwrap();
    std::fs::write(dir.join(name), bytes).unwrap();
}

fn main() {
    let ctx = hevf_fuzz::ctx();
    let mut rng = rng_from_seed(1);
    let client = Client::generate(ctx.clone(), 2, MatvecMode::BabyGiant, &mut rng).unwrap();
    let keys = client.keys();

    let ct = encrypt_values(ctx, &[0.5, -0.25, 1.0], &keys.public, &mut rng).unwrap();
    put("ciphertext", "fresh", &ct.to_bytes(ctx));

    put("keys", "secret", &keys.secret.to_bytes(ctx));
    put("keys", "public", &keys.public.to_bytes(ctx));
    put("keys", "relin", &keys.relin.to_bytes(ctx));
    put("keys", "galois_empty", &GaloisKeys::from_keys(BTreeMap::new()).to_bytes(ctx));

    for preset in hevf_core::ckks::Preset::ALL {
        put("params", preset.label(), &params_to_bytes(&preset.params()));
    }
    put("params", "fuzz", &params_to_bytes(ctx.params()));

    let q = ProjectionMatrix::from_rows(&[vec![1.0, 0.5], vec![0.5, 2.0]]).unwrap();
    put("matrix", "binary", &q.to_binary());
    put("matrix", "text", q.to_text().as_bytes());

    let mut enroll = client.enrollment("alice", &[&[0.03, -0.02]], 650.0, &mut rng).unwrap();
    enroll.galois = GaloisKeys::from_keys(BTreeMap::new());
    let verify = client.verification("alice", &[&[0.01, 0.04]], &mut rng).unwrap();
    let resp = VerificationResponse {
        user_id: "alice".into(),
        ct_score: ct.clone(),
        dim: 2,
        count: 1,
        plan_report: "L1 matvec\n".into(),
    };
    let ack = EnrollAck { user_id: "alice".into(), record_digest: [7; 32] };
    let err = ErrorMessage { message: "unknown user".into() };
    let msgs = [
        ("enroll", Message::Enroll(Box::new(enroll))),
        ("verify", Message::Verify(verify)),
        ("response", Message::Response(resp)),
        ("ack", Message::Ack(ack)),
        ("error", Message::Error(err)),
    ];
    for (name, m) in &msgs {
        put("message", name, &m.to_bytes(ctx));
    }
    for (name, m) in &msgs[3..] {
        put("frame", name, &encode_frame(m.kind() as u8, &m.to_bytes(ctx)).unwrap());
    }
    put("frame", "empty", &encode_frame(20, &[]).unwrap());

    let corpus = SyntheticCorpus::generate(&CorpusSpec { speakers: 3, tests: 2, ..CorpusSpec::new(4) }, 1).unwrap();
    put("corpus", "binary", &corpus.to_binary());
    put("corpus", "text", corpus.to_text().as_bytes());

    put("config", "preset", b"preset = \"set2\"\ndim = 200\ntheta = 0.34\nseed = 1\n");
    put("config", "chain", b"chain = \"8192:41,34,34,34,34,41\"\niterations = 1\nx0 = 650.0\n");
    put("config", "vectors", b"0.1 0.2, 0.3\n# comment\n-1e-3 4 5\n");
}

//! On-disk artifacts: key directories, vector lists and matrices.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use hevf_core::ckks::{CkksContext, GaloisKeys, KeyBundle, PublicKey, RelinKey, SecretKey};
use hevf_core::linalg::ProjectionMatrix;
use hevf_core::serial::{params_from_bytes, params_to_bytes, Encodable};
use hevf_protocol::Client;

use crate::CliError;

pub fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::Io(format!("{}: {e}", parent.display())))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

#[derive(Serialize, Deserialize)]
struct KeyMeta {
    dim: usize,
}

const PARAMS: &str = "params.hevf";
const SECRET: &str = "secret.hevf";
const PUBLIC: &str = "public.hevf";
const RELIN: &str = "relin.hevf";
const GALOIS: &str = "galois.hevf";
const META: &str = "client.toml";

/// Writes a client key directory. The secret key stays in this directory;
/// only the public parts travel in enrollment requests.
pub fn save_keys(dir: &Path, client: &Client) -> Result<(), CliError> {
    let ctx = client.context();
    let keys = client.keys();
    write(&dir.join(PARAMS), &params_to_bytes(ctx.params()))?;
    write(&dir.join(SECRET), &keys.secret.to_bytes(ctx))?;
    write(&dir.join(PUBLIC), &keys.public.to_bytes(ctx))?;
    write(&dir.join(RELIN), &keys.relin.to_bytes(ctx))?;
    write(&dir.join(GALOIS), &keys.galois.to_bytes(ctx))?;
    let meta = toml::to_string(&KeyMeta { dim: client.layout().dim }).expect("meta serializes");
    write(&dir.join(META), meta.as_bytes())
}

pub fn load_keys(dir: &Path) -> Result<Client, CliError> {
    let params = params_from_bytes(&read(&dir.join(PARAMS))?)?;
    let ctx = CkksContext::new(params)?;
    let meta: KeyMeta = toml::from_str(
        std::str::from_utf8(&read(&dir.join(META))?).map_err(|_| CliError::Param("key metadata is not UTF-8".into()))?,
    )
    .map_err(|e| CliError::Param(format!("{}: {e}", dir.join(META).display())))?;
    let keys = KeyBundle {
        secret: SecretKey::from_bytes(&ctx, &read(&dir.join(SECRET))?)?,
        public: PublicKey::from_bytes(&ctx, &read(&dir.join(PUBLIC))?)?,
        relin: RelinKey::from_bytes(&ctx, &read(&dir.join(RELIN))?)?,
        galois: GaloisKeys::from_bytes(&ctx, &read(&dir.join(GALOIS))?)?,
    };
    Ok(Client::from_keys(ctx, keys, meta.dim)?)
}

/// One vector per non-empty line, values separated by commas or whitespace.
pub fn parse_vectors(text: &str) -> Result<Vec<Vec<f64>>, CliError> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let v = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<f64>().map_err(|_| CliError::Param(format!("line {}: bad number '{t}'", n + 1))))
            .collect::<Result<Vec<_>, _>>()?;
        out.push(v);
    }
    if out.is_empty() {
        return Err(CliError::Param("no vectors in input".into()));
    }
    Ok(out)
}

pub fn format_vectors(vs: &[Vec<f64>]) -> String {
    vs.iter().map(|v| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ") + "\n").collect()
}

/// Matrix from a file, or the identity with a warning.
pub fn load_matrix(path: Option<&Path>, dim: usize) -> Result<ProjectionMatrix, CliError> {
    let Some(path) = path else {
        log::warn!("no --q-matrix given; scoring with the identity matrix");
        return Ok(ProjectionMatrix::identity(dim));
    };
    let q = ProjectionMatrix::from_file_bytes(&read(path)?)?;
    if q.dim() != dim {
        return Err(CliError::Param(format!("matrix is {0}×{0} but vectors have dimension {dim}", q.dim())));
    }
    Ok(q)
}

pub fn context(params: hevf_core::ckks::ParameterSet) -> Result<Arc<CkksContext>, CliError> {
    Ok(CkksContext::new(params)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vectors_roundtrip() {
        let vs = vec![vec![0.1, -2.5, 3.0], vec![1e-7, 0.0, 4.25]];
        assert_eq!(parse_vectors(&format_vectors(&vs)).unwrap(), vs);
        assert_eq!(parse_vectors("1,2 3 # c\n\n4, 5,6\n").unwrap(), vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]);
        assert!(parse_vectors("1 x").is_err());
        assert!(parse_vectors("# only\n").is_err());
    }
}

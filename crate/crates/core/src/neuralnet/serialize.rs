use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::{Network, Scaling};
use super::spec::NetworkSpec;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"HTSNNDW1";

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    spec: NetworkSpec,
    scaling: Scaling,
    blocks: Vec<(String, usize)>,
}

/// Binary weight file: magic bytes, a little-endian `u64` header length, a
/// JSON header with the architecture, scaling and block layout, then every
/// parameter block as little-endian `f64`s.
pub fn write_weights<W: Write>(net: &Network, mut out: W) -> Result<()> {
    let header = Header { spec: net.spec().clone(), scaling: net.scaling().clone(), blocks: net.blocks() };
    let json = serde_json::to_vec(&header)?;
    let mut buf = Vec::with_capacity(16 + json.len() + 8 * net.params().len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(json.len() as u64).to_le_bytes());
    buf.extend_from_slice(&json);
    for p in net.params() {
        buf.extend_from_slice(&p.to_le_bytes());
    }
    out.write_all(&buf).map_err(|e| Error::io("writing weights", e))
}

pub fn read_weights<R: Read>(mut input: R) -> Result<Network> {
    let mut buf = Vec::new();
    input.read_to_end(&mut buf).map_err(|e| Error::io("reading weights", e))?;
    let bad = |why: &str| Error::Data(format!("invalid weight file: {why}"));
    if buf.len() < 16 || &buf[..8] != MAGIC {
        return Err(bad("missing magic bytes"));
    }
    let hlen = u64::from_le_bytes(buf[8..16].try_into().unwrap()) as usize;
    let body = buf.get(16..16 + hlen).ok_or_else(|| bad("truncated header"))?;
    let header: Header = serde_json::from_slice(body)?;
    let rest = &buf[16 + hlen..];
    let n = header.spec.n_params();
    if header.blocks.iter().map(|b| b.1).sum::<usize>() != n || rest.len() != 8 * n {
        return Err(bad("parameter count does not match architecture"));
    }
    let params = rest.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    let net = Network::from_parts(header.spec, header.scaling, params)?;
    if net.blocks() != header.blocks {
        return Err(bad("block layout does not match architecture"));
    }
    Ok(net)
}

pub fn save_weights(net: &Network, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    write_weights(net, std::io::BufWriter::new(f))
}

pub fn load_weights(path: &Path) -> Result<Network> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    read_weights(std::io::BufReader::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuralnet::network::Example;
    use crate::rng::rng_from_seed;

    #[test]
    fn round_trip_is_bit_identical() {
        let spec = NetworkSpec::layered(6, 2, 3, 2, 3, 4, 2, 5);
        let mut scaling = Scaling::identity(&spec);
        scaling.output_scale = 2.5;
        scaling.exog_std = vec![3.0, 0.5];
        let net = Network::new(spec, scaling, Some(&[1.0, 2.0, 3.0]), &mut rng_from_seed(4)).unwrap();
        let mut bytes = Vec::new();
        write_weights(&net, &mut bytes).unwrap();
        let back = read_weights(bytes.as_slice()).unwrap();
        let ex = Example { window: vec![1.0, 5.0, 2.0, 8.0, 3.0, 4.0], exog: vec![0.2, -1.0], target: vec![] };
        let a = net.predict(&ex).unwrap();
        let b = back.predict(&ex).unwrap();
        assert_eq!(a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        assert_eq!(net.params(), back.params());
    }

    #[test]
    fn rejects_corrupt_files() {
        assert!(read_weights(&b"nope"[..]).is_err());
        let spec = NetworkSpec::layered(0, 2, 1, 0, 1, 1, 1, 3);
        let net = Network::new(spec.clone(), Scaling::identity(&spec), None, &mut rng_from_seed(0)).unwrap();
        let mut bytes = Vec::new();
        write_weights(&net, &mut bytes).unwrap();
        bytes.truncate(bytes.len() - 8);
        assert!(read_weights(bytes.as_slice()).is_err());
    }
}

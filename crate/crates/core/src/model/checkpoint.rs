//! Named-tensor archive.
//!
//! ```text
//! ATP-CHECKPOINT 1
//! config d_e = 100
//! ...
//! vocab 5234 lowercase=true
//! "<pad>"
//! ...
//! tensor word 5234 100 0
//! tensor pos 32 50 4187200
//! ...
//! end
//! <little-endian f64 payload>
//! ```
//!
//! Vocabulary entries are JSON strings. Tensor offsets are in bytes from the
//! start of the payload.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{AtpParams, ModelError, Vocab};
use crate::nn::ParamSet;
use crate::train::TrainConfig;
use crate::Result;

const MAGIC: &str = "ATP-CHECKPOINT 1";

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub params: AtpParams,
}

fn bad(msg: impl Into<String>) -> crate::Error {
    ModelError::Checkpoint(msg.into()).into()
}

pub fn write_checkpoint<W: Write>(mut w: W, config: &TrainConfig, params: &AtpParams) -> Result<()> {
    let mut header = String::new();
    header.push_str(MAGIC);
    header.push('\n');
    for (k, v) in config.entries() {
        header.push_str(&format!("config {k} = {v}\n"));
    }
    let vocab = params.vocab();
    header.push_str(&format!("vocab {} lowercase={}\n", vocab.len(), vocab.lowercase()));
    for word in vocab.words() {
        header.push_str(&serde_json::to_string(word).expect("strings serialise"));
        header.push('\n');
    }
    let mut offset = 0usize;
    let blocks = params.params();
    for (name, p) in &blocks {
        let (r, c) = p.shape();
        header.push_str(&format!("tensor {name} {r} {c} {offset}\n"));
        offset += r * c * 8;
    }
    header.push_str("end\n");
    w.write_all(header.as_bytes())?;
    for (_, p) in &blocks {
        for v in p.value.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn next_line<R: BufRead>(r: &mut R) -> Result<String> {
    let mut line = String::new();
    if r.read_line(&mut line)? == 0 {
        return Err(bad("unexpected end of header"));
    }
    Ok(line.trim_end_matches(['\n', '\r']).to_string())
}

pub fn read_checkpoint<R: BufRead>(mut r: R) -> Result<Checkpoint> {
    if next_line(&mut r)? != MAGIC {
        return Err(bad("not a checkpoint (bad magic line)"));
    }
    let mut config = TrainConfig::default();
    let mut line = next_line(&mut r)?;
    let mut line_no = 2;
    while let Some(kv) = line.strip_prefix("config ") {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| bad(format!("line {line_no}: malformed config entry")))?;
        config.set(k.trim(), v.trim(), line_no)?;
        line = next_line(&mut r)?;
        line_no += 1;
    }
    config.validate()?;

    let rest = line
        .strip_prefix("vocab ")
        .ok_or_else(|| bad(format!("line {line_no}: expected vocab")))?;
    let (count, lower) = rest
        .split_once(' ')
        .ok_or_else(|| bad(format!("line {line_no}: malformed vocab line")))?;
    let count: usize = count.parse().map_err(|_| bad("bad vocab size"))?;
    let lowercase = match lower {
        "lowercase=true" => true,
        "lowercase=false" => false,
        other => return Err(bad(format!("bad vocab flag {other:?}"))),
    };
    let mut words = Vec::with_capacity(count);
    for _ in 0..count {
        let l = next_line(&mut r)?;
        let w: String = serde_json::from_str(&l).map_err(|e| bad(format!("vocab entry {l:?}: {e}")))?;
        words.push(w);
    }
    if words.len() < 2 || words[0] != super::PAD_TOKEN || words[1] != super::UNK_TOKEN {
        return Err(bad("vocabulary must start with the PAD and UNK tokens"));
    }
    let vocab = Vocab::from_words(words.into_iter().skip(2), lowercase);
    if vocab.len() != count {
        return Err(bad("vocabulary contains duplicates"));
    }

    let mut params = AtpParams::zeros(vocab, config.dims())?;
    let mut specs = Vec::new();
    loop {
        let l = next_line(&mut r)?;
        if l == "end" {
            break;
        }
        let f: Vec<&str> = l.split(' ').collect();
        if f.len() != 5 || f[0] != "tensor" {
            return Err(bad(format!("malformed tensor line {l:?}")));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|_| bad(format!("bad number in {l:?}")));
        specs.push((f[1].to_string(), num(f[2])?, num(f[3])?, num(f[4])?));
    }

    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;
    let blocks = params.params_mut();
    if specs.len() != blocks.len() {
        return Err(bad(format!("expected {} tensors, found {}", blocks.len(), specs.len())));
    }
    for ((name, rows, cols, offset), (expect, p)) in specs.into_iter().zip(blocks) {
        if name != expect || (rows, cols) != p.shape() {
            return Err(bad(format!(
                "tensor {name} {rows}x{cols} does not match {expect} {:?}",
                p.shape()
            )));
        }
        let bytes = payload
            .get(offset..offset + rows * cols * 8)
            .ok_or_else(|| bad(format!("payload too short for {name}")))?;
        for (v, chunk) in p.value.data_mut().iter_mut().zip(bytes.chunks_exact(8)) {
            *v = f64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
        }
        if !p.value.is_finite() {
            return Err(bad(format!("tensor {name} holds non-finite values")));
        }
    }
    Ok(Checkpoint { config, params })
}

pub fn save_checkpoint(path: impl AsRef<Path>, config: &TrainConfig, params: &AtpParams) -> Result<()> {
    write_checkpoint(BufWriter::new(File::create(path)?), config, params)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    read_checkpoint(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample() -> (TrainConfig, AtpParams) {
        let config = TrainConfig {
            d_e: 4,
            d_h: 3,
            d_p: 2,
            d_w: 5,
            d_max: 6,
            lr: 0.0031,
            ..TrainConfig::default()
        };
        let vocab = Vocab::from_words(
            ["food", "Tab\there", "quote\"d", "ünïcode"].map(String::from),
            false,
        );
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let params = AtpParams::new(vocab, config.dims(), 0.3, &mut rng).unwrap();
        (config, params)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let (config, params) = sample();
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &config, &params).unwrap();
        let ck = read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(ck.config, config);
        assert_eq!(ck.params.vocab(), params.vocab());
        for ((n, a), (_, b)) in params.params().into_iter().zip(ck.params.params()) {
            let a: Vec<u64> = a.value.data().iter().map(|v| v.to_bits()).collect();
            let b: Vec<u64> = b.value.data().iter().map(|v| v.to_bits()).collect();
            assert_eq!(a, b, "{n}");
        }
        let mut again = Vec::new();
        write_checkpoint(&mut again, &ck.config, &ck.params).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn header_is_readable() {
        let (config, params) = sample();
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &config, &params).unwrap();
        let text = String::from_utf8_lossy(&buf);
        assert!(text.starts_with("ATP-CHECKPOINT 1\nconfig d_e = 4\n"));
        assert!(text.contains("\"Tab\\there\"\n"));
        assert!(text.contains("tensor word 6 4 0\ntensor pos 8 2 192\n"));
    }

    #[test]
    fn corrupt_inputs_rejected() {
        let (config, params) = sample();
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &config, &params).unwrap();

        assert!(read_checkpoint(&b"hello\n"[..]).is_err());
        let truncated = &buf[..buf.len() - 8];
        assert!(read_checkpoint(truncated).is_err());

        let text = String::from_utf8_lossy(&buf).replace("config d_w = 5", "config d_w = 6");
        let mut tampered = text.into_bytes();
        tampered.truncate(buf.len());
        assert!(read_checkpoint(tampered.as_slice()).is_err());
    }
}

//! Trainer checkpoints: a plain-text header followed by little-endian `f64` blocks.
//!
//! ```text
//! stackpomdp-checkpoint 1
//! config {...json...}
//! counters <steps> <episodes> <evaluations>
//! rng <seed hex> <stream> <word_pos>
//! blocks policy:<n> policy_m:<n> policy_v:<n> critic:<n> critic_m:<n> critic_v:<n>
//! adam <policy t> <critic t>
//! end
//! <binary payload>
//! ```

use std::io::{BufRead, Write};

use rand_chacha::ChaCha8Rng;

use super::{TrainConfig, Trainer};
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "stackpomdp-checkpoint";
const BLOCKS: [&str; 6] = ["policy", "policy_m", "policy_v", "critic", "critic_m", "critic_v"];

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

pub fn write<R: Real, W: Write>(trainer: &Trainer<'_, R>, mut out: W) -> Result<()> {
    let blocks: [&[R]; 6] = [
        &trainer.policy.params,
        &trainer.policy_optimizer.m,
        &trainer.policy_optimizer.v,
        &trainer.critic.params,
        &trainer.critic.optimizer.m,
        &trainer.critic.optimizer.v,
    ];
    let rng = &trainer.critic_rng;
    writeln!(out, "{MAGIC} {FORMAT_VERSION}")?;
    writeln!(out, "config {}", serde_json::to_string(&trainer.config)?)?;
    writeln!(out, "counters {} {} {}", trainer.steps, trainer.episodes, trainer.evaluations)?;
    let seed: String = rng.get_seed().iter().map(|b| format!("{b:02x}")).collect();
    writeln!(out, "rng {seed} {} {}", rng.get_stream(), rng.get_word_pos())?;
    let sizes: Vec<String> = BLOCKS.iter().zip(&blocks).map(|(n, b)| format!("{n}:{}", b.len())).collect();
    writeln!(out, "blocks {}", sizes.join(" "))?;
    writeln!(out, "adam {} {}", trainer.policy_optimizer.t, trainer.critic.optimizer.t)?;
    writeln!(out, "end")?;
    for block in blocks {
        for x in block {
            out.write_all(&x.f64().to_le_bytes())?;
        }
    }
    Ok(())
}

fn header_line<B: BufRead>(input: &mut B, key: &str) -> Result<String> {
    let mut line = String::new();
    input.read_line(&mut line)?;
    let line = line.trim_end_matches('\n');
    match line.split_once(' ') {
        Some((k, rest)) if k == key => Ok(rest.to_string()),
        _ => Err(bad(format!("expected `{key}` header line, found {line:?}"))),
    }
}

fn numbers<T: std::str::FromStr>(s: &str, count: usize, what: &str) -> Result<Vec<T>> {
    let v: Vec<T> = s
        .split_whitespace()
        .map(|w| w.parse().map_err(|_| bad(format!("malformed {what}: {s:?}"))))
        .collect::<Result<_>>()?;
    if v.len() != count {
        return Err(bad(format!("{what} expects {count} fields")));
    }
    Ok(v)
}

/// Restores a checkpoint into `trainer`, which must have been built for the same game and
/// with the configuration stored in the checkpoint.
pub fn restore<R: Real, B: BufRead>(trainer: &mut Trainer<'_, R>, mut input: B) -> Result<()> {
    let mut first = String::new();
    input.read_line(&mut first)?;
    let version = first
        .trim_end()
        .strip_prefix(MAGIC)
        .and_then(|v| v.trim().parse::<u32>().ok())
        .ok_or_else(|| bad("not a checkpoint"))?;
    if version != FORMAT_VERSION {
        return Err(bad(format!("unsupported checkpoint version {version}")));
    }
    let config: TrainConfig = serde_json::from_str(&header_line(&mut input, "config")?)?;
    if config != trainer.config {
        return Err(bad("checkpoint configuration differs from the trainer's"));
    }
    let counters: Vec<u64> = numbers(&header_line(&mut input, "counters")?, 3, "counters")?;
    let rng_line = header_line(&mut input, "rng")?;
    let parts: Vec<&str> = rng_line.split_whitespace().collect();
    if parts.len() != 3 || parts[0].len() != 64 {
        return Err(bad("malformed rng line"));
    }
    let mut seed = [0u8; 32];
    for (k, b) in seed.iter_mut().enumerate() {
        *b = u8::from_str_radix(&parts[0][2 * k..2 * k + 2], 16).map_err(|_| bad("malformed rng seed"))?;
    }
    let stream: u64 = parts[1].parse().map_err(|_| bad("malformed rng stream"))?;
    let word_pos: u128 = parts[2].parse().map_err(|_| bad("malformed rng position"))?;
    let blocks_line = header_line(&mut input, "blocks")?;
    let adam: Vec<u64> = numbers(&header_line(&mut input, "adam")?, 2, "adam")?;
    let mut end = String::new();
    input.read_line(&mut end)?;
    if end.trim_end() != "end" {
        return Err(bad("missing header terminator"));
    }
    let expected = [
        trainer.policy.params.len(),
        trainer.policy_optimizer.m.len(),
        trainer.policy_optimizer.v.len(),
        trainer.critic.params.len(),
        trainer.critic.optimizer.m.len(),
        trainer.critic.optimizer.v.len(),
    ];
    let declared: Vec<&str> = blocks_line.split_whitespace().collect();
    if declared.len() != BLOCKS.len() {
        return Err(bad("wrong number of blocks"));
    }
    let mut data = Vec::with_capacity(BLOCKS.len());
    for ((name, want), decl) in BLOCKS.iter().zip(expected).zip(declared) {
        if decl != format!("{name}:{want}") {
            return Err(bad(format!("block {decl} does not match {name}:{want}")));
        }
        let mut block = Vec::with_capacity(want);
        let mut buf = [0u8; 8];
        for _ in 0..want {
            input.read_exact(&mut buf).map_err(|_| bad("truncated payload"))?;
            block.push(R::lit(f64::from_le_bytes(buf)));
        }
        data.push(block);
    }
    if input.read(&mut [0u8; 1])? != 0 {
        return Err(bad("trailing bytes after payload"));
    }
    let mut it = data.into_iter();
    trainer.policy.params = it.next().unwrap();
    trainer.policy_optimizer.m = it.next().unwrap();
    trainer.policy_optimizer.v = it.next().unwrap();
    trainer.critic.params = it.next().unwrap();
    trainer.critic.optimizer.m = it.next().unwrap();
    trainer.critic.optimizer.v = it.next().unwrap();
    trainer.policy_optimizer.t = adam[0];
    trainer.critic.optimizer.t = adam[1];
    let mut rng: ChaCha8Rng = rand::SeedableRng::from_seed(seed);
    rng.set_stream(stream);
    rng.set_word_pos(word_pos);
    trainer.critic_rng = rng;
    trainer.steps = counters[0];
    trainer.episodes = counters[1];
    trainer.evaluations = counters[2];
    Ok(())
}

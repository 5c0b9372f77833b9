//! Parameter layout. Every tensor has a stable dotted name:
//!
//! ```text
//! block{k}.payoff_in.{weight,bias}
//! block{k}.a2ja.*          action-to-joint-action self-attention
//! block{k}.a2p.*           action-to-play cross-attention (adds norm_kv.*)
//! block{k}.a2a{i}.*        action-to-action self-attention
//! decoder.{ne,devgain,recon}.*
//! ```
//!
//! An attention layer holds `norm.{scale,offset}`, `query.{weight,bias}`,
//! `key.weight`, `value.{weight,bias}`, `output.{weight,bias}` and a
//! feed-forward network `ffn.{norm,hidden,out}.*`. Weights are `[in, out]`,
//! biases and norm vectors `[1, out]`.

use super::config::{ModelConfig, Task};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Init {
    Normal,
    Zeros,
    Ones,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: [usize; 2],
    pub init: Init,
}

#[derive(Clone, Copy, Debug)]
pub struct Linear {
    pub weight: usize,
    pub bias: Option<usize>,
}

#[derive(Clone, Copy, Debug)]
pub struct Norm {
    pub scale: usize,
    pub offset: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct FeedForward {
    pub norm: Norm,
    pub hidden: Linear,
    pub out: Linear,
}

#[derive(Clone, Copy, Debug)]
pub struct AttentionLayer {
    pub norm: Norm,
    pub norm_kv: Option<Norm>,
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub output: Linear,
    pub ffn: FeedForward,
}

#[derive(Clone, Debug)]
pub struct Block {
    pub payoff_in: Linear,
    pub a2ja: AttentionLayer,
    pub a2p: AttentionLayer,
    pub a2a: Vec<AttentionLayer>,
}

/// Scalar head `out(gelu(hidden(norm(x))))`.
#[derive(Clone, Copy, Debug)]
pub struct Head {
    pub norm: Norm,
    pub hidden: Linear,
    pub out: Linear,
}

#[derive(Clone, Copy, Debug)]
pub enum Decoder {
    Ne(Head),
    Devgain(Head),
    Recon {
        attention: AttentionLayer,
        head: Head,
    },
}

#[derive(Clone, Debug)]
pub struct Architecture {
    pub blocks: Vec<Block>,
    pub decoder: Decoder,
    pub specs: Vec<ParamSpec>,
}

struct Builder {
    specs: Vec<ParamSpec>,
}

impl Builder {
    fn add(&mut self, name: String, shape: [usize; 2], init: Init) -> usize {
        self.specs.push(ParamSpec { name, shape, init });
        self.specs.len() - 1
    }

    fn linear(&mut self, prefix: &str, input: usize, output: usize, bias: bool) -> Linear {
        let weight = self.add(format!("{prefix}.weight"), [input, output], Init::Normal);
        let bias = bias.then(|| self.add(format!("{prefix}.bias"), [1, output], Init::Zeros));
        Linear { weight, bias }
    }

    fn norm(&mut self, prefix: &str, dim: usize) -> Norm {
        Norm {
            scale: self.add(format!("{prefix}.scale"), [1, dim], Init::Ones),
            offset: self.add(format!("{prefix}.offset"), [1, dim], Init::Zeros),
        }
    }

    fn ffn(&mut self, prefix: &str, dim: usize) -> FeedForward {
        FeedForward {
            norm: self.norm(&format!("{prefix}.norm"), dim),
            hidden: self.linear(&format!("{prefix}.hidden"), dim, 4 * dim, true),
            out: self.linear(&format!("{prefix}.out"), 4 * dim, dim, true),
        }
    }

    // Key projections carry no bias: a bias shared by all keys shifts every
    // logit of a query equally and cancels in the softmax.
    fn attention(&mut self, prefix: &str, dim: usize, cross: bool) -> AttentionLayer {
        AttentionLayer {
            norm: self.norm(&format!("{prefix}.norm"), dim),
            norm_kv: cross.then(|| self.norm(&format!("{prefix}.norm_kv"), dim)),
            query: self.linear(&format!("{prefix}.query"), dim, dim, true),
            key: self.linear(&format!("{prefix}.key"), dim, dim, false),
            value: self.linear(&format!("{prefix}.value"), dim, dim, true),
            output: self.linear(&format!("{prefix}.output"), dim, dim, true),
            ffn: self.ffn(&format!("{prefix}.ffn"), dim),
        }
    }

    fn head(&mut self, prefix: &str, dim: usize, out_bias: bool) -> Head {
        Head {
            norm: self.norm(&format!("{prefix}.norm"), dim),
            hidden: self.linear(&format!("{prefix}.hidden"), dim, dim, true),
            out: self.linear(&format!("{prefix}.out"), dim, 1, out_bias),
        }
    }
}

impl Architecture {
    pub fn new(config: &ModelConfig, task: Task) -> Self {
        let d = config.dim;
        let mut b = Builder { specs: Vec::new() };
        let blocks = (0..config.blocks)
            .map(|k| Block {
                payoff_in: b.linear(&format!("block{k}.payoff_in"), d + 1, d, true),
                a2ja: b.attention(&format!("block{k}.a2ja"), d, false),
                a2p: b.attention(&format!("block{k}.a2p"), d, true),
                a2a: (0..config.action_layers)
                    .map(|i| b.attention(&format!("block{k}.a2a{i}"), d, false))
                    .collect(),
            })
            .collect();
        let decoder = match task {
            // Logits feed a softmax, so a shared output bias would be inert.
            Task::Ne => Decoder::Ne(b.head("decoder.ne", d, false)),
            Task::Devgain => Decoder::Devgain(b.head("decoder.devgain", d, true)),
            Task::Recon => Decoder::Recon {
                attention: b.attention("decoder.recon.attention", d, false),
                head: b.head("decoder.recon", d, true),
            },
        };
        Architecture {
            blocks,
            decoder,
            specs: b.specs,
        }
    }

    pub fn num_parameters(&self) -> usize {
        self.specs.iter().map(|s| s.shape[0] * s.shape[1]).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_are_unique() {
        let arch = Architecture::new(&ModelConfig::new(8, 2, 2, 2).unwrap(), Task::Recon);
        let mut names: Vec<&str> = arch.specs.iter().map(|s| s.name.as_str()).collect();
        let n = names.len();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), n);
        assert!(names.contains(&"block1.a2a1.ffn.out.bias"));
        assert!(names.contains(&"block0.a2p.norm_kv.scale"));
    }

    #[test]
    fn count_grows_with_depth() {
        let c = |k| {
            Architecture::new(&ModelConfig::new(16, k, 1, 4).unwrap(), Task::Ne).num_parameters()
        };
        assert!(c(4) > c(2));
        assert_eq!(c(4) - c(3), c(3) - c(2));
    }
}

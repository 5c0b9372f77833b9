use std::rc::Rc;

use super::layout::Batch;
use super::params::{
    Architecture, AttentionLayer, Block, Decoder, FeedForward, Head, Linear, Norm,
};
use crate::engine::{Graph, KeySets, Real, Tensor, Var};
use crate::error::Result;

/// Parameter variables bound to one graph, indexed like [`Architecture::specs`].
pub(crate) struct Net<'a> {
    pub arch: &'a Architecture,
    pub heads: usize,
    pub vars: &'a [Var],
}

impl Net<'_> {
    fn linear<F: Real>(&self, g: &mut Graph<F>, l: Linear, x: Var) -> Var {
        let h = g.matmul(x, self.vars[l.weight]);
        match l.bias {
            Some(b) => g.add_bias(h, self.vars[b]),
            None => h,
        }
    }

    fn norm<F: Real>(&self, g: &mut Graph<F>, n: Norm, x: Var) -> Var {
        g.layer_norm(x, self.vars[n.scale], self.vars[n.offset])
    }

    fn ffn<F: Real>(&self, g: &mut Graph<F>, f: FeedForward, x: Var) -> Var {
        let h = self.norm(g, f.norm, x);
        let h = self.linear(g, f.hidden, h);
        let h = g.gelu(h);
        let h = self.linear(g, f.out, h);
        g.add(x, h)
    }

    /// Pre-norm attention layer: `h = x + MHA(norm(x), norm_kv(kv))`, then `h + FFN(norm(h))`.
    fn attention<F: Real>(
        &self,
        g: &mut Graph<F>,
        layer: &AttentionLayer,
        x: Var,
        kv: Option<Var>,
        keys: &Rc<KeySets>,
    ) -> Result<Var> {
        let xq = self.norm(g, layer.norm, x);
        let xkv = match (kv, layer.norm_kv) {
            (Some(kv), Some(n)) => self.norm(g, n, kv),
            (Some(kv), None) => self.norm(g, layer.norm, kv),
            (None, _) => xq,
        };
        let q = self.linear(g, layer.query, xq);
        let k = self.linear(g, layer.key, xkv);
        let v = self.linear(g, layer.value, xkv);
        let a = g.attention(q, k, v, keys.clone(), self.heads)?;
        let o = self.linear(g, layer.output, a);
        let h = g.add(x, o);
        Ok(self.ffn(g, layer.ffn, h))
    }

    pub fn block<F: Real>(
        &self,
        g: &mut Graph<F>,
        block: &Block,
        batch: &Batch,
        emb: Var,
    ) -> Result<Var> {
        let own = g.gather(emb, &batch.play_actions);
        let payoffs = g.constant(Tensor::from_f64(batch.num_plays(), 1, &batch.play_payoffs));
        let tokens = g.concat_cols(own, payoffs);
        let tokens = self.linear(g, block.payoff_in, tokens);
        let plays = self.attention(g, &block.a2ja, tokens, None, &batch.play_keys)?;
        let mut emb = self.attention(g, &block.a2p, emb, Some(plays), &batch.action_play_keys)?;
        for layer in &block.a2a {
            emb = self.attention(g, layer, emb, None, &batch.action_keys)?;
        }
        Ok(emb)
    }

    pub fn encode<F: Real>(
        &self,
        g: &mut Graph<F>,
        batch: &Batch,
        emb: Var,
        blocks: &[Block],
    ) -> Result<Var> {
        blocks
            .iter()
            .try_fold(emb, |e, b| self.block(g, b, batch, e))
    }

    fn head<F: Real>(&self, g: &mut Graph<F>, h: Head, x: Var) -> Var {
        let x = self.norm(g, h.norm, x);
        let x = self.linear(g, h.hidden, x);
        let x = g.gelu(x);
        self.linear(g, h.out, x)
    }

    /// Task output column: marginals `[actions]`, joint scalars `[joints]`, or
    /// payoff estimates `[joints * players]` in (game, joint, player) order.
    pub fn decode<F: Real>(&self, g: &mut Graph<F>, batch: &Batch, emb: Var) -> Result<Var> {
        Ok(match self.arch.decoder {
            Decoder::Ne(h) => {
                let logits = self.head(g, h, emb);
                g.segment_softmax(logits, batch.player_groups.clone())
            }
            Decoder::Devgain(h) => {
                let joint = g.gather_sum(emb, batch.joint_groups.clone());
                self.head(g, h, joint)
            }
            Decoder::Recon { attention, head } => {
                let tokens = g.gather(emb, &batch.joint_tokens);
                let tokens =
                    self.attention(g, &attention, tokens, None, &batch.joint_token_keys)?;
                self.head(g, head, tokens)
            }
        })
    }
}

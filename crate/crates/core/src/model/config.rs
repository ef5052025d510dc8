use serde::{Deserialize, Serialize};

use super::{Init, ParamLayout};
use crate::dag::{GraphConfig, BASE_TYPES, PHI_CAP};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Feature width of every graph node.
    pub d_f: usize,
    /// Patches the initial condition is split into.
    pub n_patch: usize,
    /// Modulation nodes, equal to the number of decoder hidden layers.
    pub n_mod: usize,
    pub enc_layers: usize,
    pub d_e: usize,
    pub heads: usize,
    pub feat_hidden: usize,
    /// Degrees above this share the last embedding row.
    pub max_degree: usize,
    /// Normalize the last encoder layer's output before reading the latents.
    pub final_ln: bool,
    pub d_h: usize,
    pub hyper_hidden: usize,
}

impl ModelConfig {
    /// 4 layers, `d_e = 64`, 4 heads, `L = 8`, `d_h = 32`.
    pub fn desk() -> Self {
        Self {
            d_f: 16,
            n_patch: 16,
            n_mod: 8,
            enc_layers: 4,
            d_e: 64,
            heads: 4,
            feat_hidden: 256,
            max_degree: 32,
            final_ln: true,
            d_h: 32,
            hyper_hidden: 256,
        }
    }

    /// 9 layers, `d_e = 512`, 32 heads, `L = 8`, `d_h = 256`.
    pub fn paper() -> Self {
        Self { enc_layers: 9, d_e: 512, heads: 32, d_h: 256, ..Self::desk() }
    }

    pub fn graph(&self) -> GraphConfig {
        GraphConfig { d_f: self.d_f, n_patch: self.n_patch, n_mod: self.n_mod }
    }

    pub fn n_x(&self) -> usize {
        self.d_f * self.n_patch
    }

    pub fn vocab(&self) -> usize {
        BASE_TYPES + self.n_patch + self.n_mod
    }

    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("d_f", self.d_f),
            ("n_patch", self.n_patch),
            ("n_mod", self.n_mod),
            ("d_e", self.d_e),
            ("heads", self.heads),
            ("feat_hidden", self.feat_hidden),
            ("d_h", self.d_h),
            ("hyper_hidden", self.hyper_hidden),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(format!("{name} must be positive"));
        }
        if self.d_e % self.heads != 0 {
            return Err(format!("d_e = {} is not divisible by heads = {}", self.d_e, self.heads));
        }
        Ok(())
    }

    pub fn layout(&self) -> ParamLayout {
        let mut p = ParamLayout::new();
        let emb = Init::Uniform(0.1);
        p.push("enc.type_emb", vec![self.vocab(), self.d_e], emb);
        p.push("enc.indeg_emb", vec![self.max_degree + 1, self.d_e], emb);
        p.push("enc.outdeg_emb", vec![self.max_degree + 1, self.d_e], emb);
        p.linear("enc.feat.0", self.d_f, self.feat_hidden);
        p.linear("enc.feat.1", self.feat_hidden, self.feat_hidden);
        p.linear("enc.feat.2", self.feat_hidden, self.d_e);
        let phi_len = PHI_CAP as usize + 1;
        p.push("enc.bias_out", vec![self.heads, phi_len], Init::Zeros);
        p.push("enc.bias_in", vec![self.heads, phi_len], Init::Zeros);
        for l in 0..self.enc_layers {
            let pre = format!("enc.layer.{l}");
            p.push(format!("{pre}.ln1.g"), vec![1, self.d_e], Init::Ones);
            p.push(format!("{pre}.ln1.b"), vec![1, self.d_e], Init::Zeros);
            for m in ["q", "v", "o"] {
                p.linear(&format!("{pre}.attn.{m}"), self.d_e, self.d_e);
            }
            // No key bias: it adds a per-row constant to the logits, which
            // softmax ignores.
            let b = 1.0 / (self.d_e as f32).sqrt();
            p.push(format!("{pre}.attn.k.w"), vec![self.d_e, self.d_e], Init::Uniform(b));
            p.push(format!("{pre}.ln2.g"), vec![1, self.d_e], Init::Ones);
            p.push(format!("{pre}.ln2.b"), vec![1, self.d_e], Init::Zeros);
            p.linear(&format!("{pre}.ffn.0"), self.d_e, self.d_e);
            p.linear(&format!("{pre}.ffn.1"), self.d_e, self.d_e);
        }
        if self.final_ln {
            p.push("enc.ln_f.g", vec![1, self.d_e], Init::Ones);
            p.push("enc.ln_f.b", vec![1, self.d_e], Init::Zeros);
        }
        let slope = crate::decoder::LEAKY_SLOPE as f32;
        let he_bound = (6.0 / ((1.0 + slope * slope) * self.d_h as f32)).sqrt();
        for l in 0..self.n_mod {
            let pre = format!("dec.layer.{l}");
            p.linear(&format!("{pre}.in"), 2, self.d_h);
            p.linear(&format!("{pre}.h"), self.d_h, self.d_h);
            for kind in ["scale", "shift"] {
                let hp = format!("{pre}.{kind}");
                p.linear(&format!("{hp}.0"), self.d_e, self.hyper_hidden);
                p.linear(&format!("{hp}.1"), self.hyper_hidden, self.hyper_hidden);
                p.linear(&format!("{hp}.2"), self.hyper_hidden, self.d_h);
            }
            // Keep the signal scale through the product chain: g starts near
            // 1 and W_h has gain for the leaky ReLU. Every layer starts with
            // unit modulation scale.
            p.set_init(&format!("{pre}.in.b"), Init::Ones);
            p.set_init(&format!("{pre}.h.w"), Init::Uniform(he_bound));
            p.set_init(&format!("{pre}.scale.2.b"), Init::Ones);
        }
        p.linear("dec.last", self.d_h, 1);
        p
    }
}

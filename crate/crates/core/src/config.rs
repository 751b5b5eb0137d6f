//! Run configuration: `key = value` lines with `#` comments. Strings are
//! quoted. Missing keys take their defaults and unknown keys are rejected.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::link::{LinkConfig, MarginTrainOptions, DEFAULT_SIMILARITY_THRESHOLD};
use crate::writer::{default_stopwords, parse_word_list, BeamOptions, WriterDims, WriterTrainOptions};

/// Environment variable naming a config file when `--config` is absent.
pub const CONFIG_ENV: &str = "KGWRITER_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub heads: usize,
    pub head_hidden: usize,
    pub entity_emb: usize,
    pub leaky_relu_alpha: f64,
    pub margin: f64,
    pub text_emb: usize,
    pub text_hidden: usize,
    pub decoder_hidden: usize,
    pub attention: usize,
    pub coverage_lambda: f64,
    pub learning_rate: f64,
    pub optimizer: String,
    pub init_hops: usize,
    pub memory_hops: usize,
    pub beam: usize,
    pub max_len: usize,
    pub oov_floor: usize,
    pub similarity_threshold: f64,
    pub seed: u64,
    pub stopwords: Option<PathBuf>,
    pub link_epochs: usize,
    pub link_batch_size: usize,
    pub writer_epochs: usize,
    /// Stop writer training early once corpus perplexity is below this.
    pub target_perplexity: Option<f64>,
    pub repetition_masking: bool,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            heads: 8,
            head_hidden: 8,
            entity_emb: 64,
            leaky_relu_alpha: 0.2,
            margin: 1.0,
            text_emb: 128,
            text_hidden: 64,
            decoder_hidden: 256,
            attention: 256,
            coverage_lambda: 1.0,
            learning_rate: 0.001,
            optimizer: "adam".into(),
            init_hops: 3,
            memory_hops: 3,
            beam: 4,
            max_len: 120,
            oov_floor: 5,
            similarity_threshold: DEFAULT_SIMILARITY_THRESHOLD,
            seed: 7,
            stopwords: None,
            link_epochs: 200,
            link_batch_size: 8,
            writer_epochs: 500,
            target_perplexity: None,
            repetition_masking: true,
        }
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config {
            key: e
                .span()
                .map(|s| text[..s.start].lines().count().max(1).to_string())
                .map(|l| format!("line {l}"))
                .unwrap_or_else(|| "?".into()),
            msg: e.message().to_string(),
        })?;
        for (key, value) in &table {
            let single: toml::Table = [(key.clone(), value.clone())].into_iter().collect();
            if let Err(e) = single.try_into::<Config>() {
                return Err(Error::Config {
                    key: key.clone(),
                    msg: e.message().trim().to_string(),
                });
            }
        }
        let cfg: Config = table.try_into().map_err(|e: toml::de::Error| Error::Config {
            key: "?".into(),
            msg: e.message().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: &str| {
            Err(Error::Config {
                key: key.into(),
                msg: msg.into(),
            })
        };
        if self.optimizer != "adam" {
            return bad("optimizer", "only `adam` is supported");
        }
        if !(self.similarity_threshold > 0.0 && self.similarity_threshold <= 1.0) {
            return bad("similarity_threshold", "must be in (0, 1]");
        }
        if self.decoder_hidden == 0 || self.decoder_hidden % 2 != 0 {
            return bad("decoder_hidden", "must be even and positive");
        }
        if self.beam == 0 {
            return bad("beam", "must be at least 1");
        }
        if self.max_len == 0 {
            return bad("max_len", "must be at least 1");
        }
        if self.learning_rate <= 0.0 {
            return bad("learning_rate", "must be positive");
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex(&Sha256::digest(json.as_bytes()))
    }

    pub fn link_config(&self) -> LinkConfig {
        LinkConfig {
            entity_dim: self.entity_emb,
            heads: self.heads,
            head_hidden: self.head_hidden,
            text_emb: self.text_emb,
            text_hidden: self.text_hidden,
            leaky_relu_alpha: self.leaky_relu_alpha,
            margin: self.margin,
        }
    }

    pub fn margin_options(&self) -> MarginTrainOptions {
        MarginTrainOptions {
            epochs: self.link_epochs,
            seed: self.seed,
            learning_rate: self.learning_rate,
            batch_size: self.link_batch_size,
        }
    }

    pub fn stopword_set(&self) -> Result<BTreeSet<String>> {
        match &self.stopwords {
            None => Ok(default_stopwords()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                Ok(parse_word_list(&text))
            }
        }
    }

    pub fn writer_options(&self) -> Result<WriterTrainOptions> {
        Ok(WriterTrainOptions {
            dims: WriterDims {
                embedding: self.text_emb,
                hidden: self.decoder_hidden,
                attention: self.attention,
                init_hops: self.init_hops,
                memory_hops: self.memory_hops,
            },
            epochs: self.writer_epochs,
            seed: self.seed,
            learning_rate: self.learning_rate,
            coverage_lambda: self.coverage_lambda,
            max_len: self.max_len,
            min_freq: self.oov_floor,
            stopwords: self.stopword_set()?,
            target_perplexity: self.target_perplexity,
        })
    }

    pub fn beam_options(&self) -> BeamOptions {
        BeamOptions {
            beam: self.beam,
            max_len: self.max_len,
            masking: self.repetition_masking,
            ..BeamOptions::default()
        }
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

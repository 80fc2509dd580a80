use std::fmt;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::generator::GenMode;
use crate::sampler::NegStrategy;

/// The full model and its ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Sehp,
    /// Generic generator: noise → MLP → latent, no diffusion chain.
    Gns,
    /// Final latents used directly as negative embeddings.
    Epre,
    /// Neither condition nor node-embedding querying.
    None,
    /// Condition only.
    Stru,
    /// Node-embedding querying only.
    Node,
}

impl Variant {
    pub const ALL: [Variant; 6] = [Variant::Sehp, Variant::Gns, Variant::Epre, Variant::None, Variant::Stru, Variant::Node];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Sehp => "SEHP",
            Variant::Gns => "SEHP-gns",
            Variant::Epre => "SEHP-epre",
            Variant::None => "SEHP-None",
            Variant::Stru => "SEHP-Stru",
            Variant::Node => "SEHP-Node",
        }
    }

    pub fn uses_condition(self) -> bool {
        matches!(self, Variant::Sehp | Variant::Epre | Variant::Stru)
    }

    pub fn queries_nodes(self) -> bool {
        matches!(self, Variant::Sehp | Variant::Epre | Variant::Node | Variant::Gns)
    }

    pub fn mode(self) -> GenMode {
        if self == Variant::Epre {
            GenMode::Latent
        } else {
            GenMode::NodeId
        }
    }

    pub fn uses_noise_generator(self) -> bool {
        self == Variant::Gns
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown variant {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Positives per sub-hypergraph.
    pub batch_size: usize,
    /// Optimisation steps per epoch; `0` means `ceil(|train| / batch_size)`.
    pub steps_per_epoch: usize,
    /// Denoising steps `T`.
    pub steps: usize,
    pub hidden: usize,
    pub layers: usize,
    pub lr_dis: f64,
    pub lr_gen: f64,
    pub variant: Variant,
    pub seed: u64,
    /// Evaluate on validation every this many epochs (the last epoch always).
    pub eval_every: usize,
    pub time_embedding: bool,
    pub extra_sns_negatives: bool,
    /// Encode batch positives from their surrounding training hyperedges with
    /// the positives themselves removed.
    pub holdout_targets: bool,
    pub dis_steps: usize,
    pub gen_steps: usize,
    pub val_strategies: Vec<NegStrategy>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 32,
            steps_per_epoch: 0,
            steps: 5,
            hidden: 64,
            layers: 2,
            lr_dis: 1e-3,
            lr_gen: 1e-3,
            variant: Variant::Sehp,
            seed: 0,
            eval_every: 1,
            time_embedding: false,
            extra_sns_negatives: false,
            holdout_targets: true,
            dis_steps: 1,
            gen_steps: 1,
            val_strategies: NegStrategy::ALL.to_vec(),
        }
    }
}

fn parse_value<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::InvalidArgument(format!("bad value {v:?} for {key}")))
}

impl TrainConfig {
    pub const KEYS: [&'static str; 17] = [
        "epochs",
        "batch_size",
        "steps_per_epoch",
        "steps",
        "hidden",
        "layers",
        "lr_dis",
        "lr_gen",
        "variant",
        "seed",
        "eval_every",
        "time_embedding",
        "extra_sns_negatives",
        "holdout_targets",
        "dis_steps",
        "gen_steps",
        "val_strategies",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "epochs" => self.epochs = parse_value(key, v)?,
            "batch_size" => self.batch_size = parse_value(key, v)?,
            "steps_per_epoch" => self.steps_per_epoch = parse_value(key, v)?,
            "steps" => self.steps = parse_value(key, v)?,
            "hidden" => self.hidden = parse_value(key, v)?,
            "layers" => self.layers = parse_value(key, v)?,
            "lr_dis" => self.lr_dis = parse_value(key, v)?,
            "lr_gen" => self.lr_gen = parse_value(key, v)?,
            "variant" => self.variant = v.parse()?,
            "seed" => self.seed = parse_value(key, v)?,
            "eval_every" => self.eval_every = parse_value(key, v)?,
            "time_embedding" => self.time_embedding = parse_value(key, v)?,
            "extra_sns_negatives" => self.extra_sns_negatives = parse_value(key, v)?,
            "holdout_targets" => self.holdout_targets = parse_value(key, v)?,
            "dis_steps" => self.dis_steps = parse_value(key, v)?,
            "gen_steps" => self.gen_steps = parse_value(key, v)?,
            "val_strategies" => self.val_strategies = NegStrategy::parse_list(v)?,
            _ => return Err(Error::InvalidArgument(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Apply `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str, file: &str) -> Result<()> {
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                file: file.into(),
                line: ln + 1,
                msg: "expected `key = value`".into(),
            })?;
            self.set(k.trim(), v).map_err(|e| Error::Parse { file: file.into(), line: ln + 1, msg: e.to_string() })?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = TrainConfig::default();
        cfg.apply_text(&text, &path.display().to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let strategies: Vec<&str> = self.val_strategies.iter().map(|s| s.name()).collect();
        let values: [String; 17] = [
            self.epochs.to_string(),
            self.batch_size.to_string(),
            self.steps_per_epoch.to_string(),
            self.steps.to_string(),
            self.hidden.to_string(),
            self.layers.to_string(),
            format!("{:e}", self.lr_dis),
            format!("{:e}", self.lr_gen),
            self.variant.to_string(),
            self.seed.to_string(),
            self.eval_every.to_string(),
            self.time_embedding.to_string(),
            self.extra_sns_negatives.to_string(),
            self.holdout_targets.to_string(),
            self.dis_steps.to_string(),
            self.gen_steps.to_string(),
            strategies.join(","),
        ];
        for (k, v) in Self::KEYS.iter().zip(values) {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
            ("steps", self.steps),
            ("hidden", self.hidden),
            ("layers", self.layers),
            ("eval_every", self.eval_every),
            ("dis_steps", self.dis_steps),
            ("gen_steps", self.gen_steps),
        ];
        if let Some((k, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidArgument(format!("{k} must be positive")));
        }
        if !(self.lr_dis > 0.0 && self.lr_gen > 0.0 && self.lr_dis.is_finite() && self.lr_gen.is_finite()) {
            return Err(Error::InvalidArgument("learning rates must be positive".into()));
        }
        if self.val_strategies.is_empty() {
            return Err(Error::InvalidArgument("val_strategies must list at least one strategy".into()));
        }
        Ok(())
    }
}

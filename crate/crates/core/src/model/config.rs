use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub user_dim: usize,
    pub location_dim: usize,
    pub category_dim: usize,
    pub time_dim: usize,
    pub hidden: usize,
    /// Weight ε of the auxiliary embedding-matching term.
    #[serde(alias = "epsilon")]
    pub aux_weight: f64,
    /// Most recent history POIs fed to the encoder.
    pub history_cap: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            user_dim: 40,
            location_dim: 500,
            category_dim: 50,
            time_dim: 10,
            hidden: 500,
            aux_weight: 0.1,
            history_cap: 100,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        for (name, v) in [
            ("user_dim", self.user_dim),
            ("location_dim", self.location_dim),
            ("category_dim", self.category_dim),
            ("time_dim", self.time_dim),
            ("hidden", self.hidden),
            ("history_cap", self.history_cap),
        ] {
            if v == 0 {
                errs.push(format!("{name} must be positive"));
            }
        }
        if !(self.aux_weight >= 0.0 && self.aux_weight.is_finite()) {
            errs.push(format!("aux_weight (epsilon) must be >= 0 (got {})", self.aux_weight));
        }
        errs
    }

    /// Per-POI input width: location ⊕ time (⊕ category).
    pub fn input_dim(&self, has_categories: bool) -> usize {
        self.location_dim + self.time_dim + if has_categories { self.category_dim } else { 0 }
    }
}

/// Index-space sizes taken from the vocabulary. UNKNOWN rows are extra.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabSizes {
    pub users: usize,
    pub locations: usize,
    pub categories: Option<usize>,
}

impl VocabSizes {
    pub fn has_categories(&self) -> bool {
        self.categories.is_some()
    }

    pub fn of(ds: &crate::data::Dataset) -> Self {
        Self {
            users: ds.num_users(),
            locations: ds.num_locations(),
            categories: ds.has_categories().then(|| ds.num_categories()),
        }
    }
}

/// Model variants used by the ablation studies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "full")]
    Full,
    /// Group preferences only.
    #[serde(rename = "gnet", alias = "GNet")]
    GNet,
    /// Personalized preference only.
    #[serde(rename = "pnet", alias = "PNet")]
    PNet,
    /// Personalized plus long-term group preference.
    #[serde(rename = "l", alias = "L")]
    Long,
    /// Personalized plus short-term group preference.
    #[serde(rename = "s", alias = "S")]
    Short,
    /// Random frozen location/category tables instead of node2vec.
    #[serde(rename = "no-node2vec")]
    NoNode2vec,
    /// Auxiliary loss weight forced to zero.
    #[serde(rename = "no-aux")]
    NoAux,
}

impl Variant {
    pub const ALL: [Variant; 7] = [
        Variant::Full,
        Variant::GNet,
        Variant::PNet,
        Variant::Long,
        Variant::Short,
        Variant::NoNode2vec,
        Variant::NoAux,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::GNet => "gnet",
            Variant::PNet => "pnet",
            Variant::Long => "l",
            Variant::Short => "s",
            Variant::NoNode2vec => "no-node2vec",
            Variant::NoAux => "no-aux",
        }
    }

    pub fn uses_personal(self) -> bool {
        self != Variant::GNet
    }

    pub fn uses_long(self) -> bool {
        !matches!(self, Variant::PNet | Variant::Short)
    }

    pub fn uses_short(self) -> bool {
        !matches!(self, Variant::PNet | Variant::Long)
    }

    pub fn uses_node2vec(self) -> bool {
        self != Variant::NoNode2vec
    }

    pub fn aux_weight(self, configured: f64) -> f64 {
        if self == Variant::NoAux {
            0.0
        } else {
            configured
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace(['_', ' '], "-");
        let v = match norm.as_str() {
            "full" | "pg2net" => Variant::Full,
            "gnet" => Variant::GNet,
            "pnet" => Variant::PNet,
            "l" | "l-pg2net" | "long" => Variant::Long,
            "s" | "s-pg2net" | "short" => Variant::Short,
            "no-node2vec" => Variant::NoNode2vec,
            "no-aux" => Variant::NoAux,
            _ => return Err(Error::UnknownVariant(s.to_string())),
        };
        Ok(v)
    }
}

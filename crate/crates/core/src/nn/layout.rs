use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::env::EnvParams;
use crate::error::{Error, Result};

/// Which network control a head decides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HeadRole {
    /// Serving cell of a user; index 0 disconnects, `j + 1` selects BS `j`.
    Handover { user: usize },
    /// Requested RB count of a user, indexing `rb_options`.
    Rb { user: usize },
    /// Transmit power of a BS, indexing `power_levels_dbm`.
    Power { bs: usize },
}

impl HeadRole {
    pub fn name(&self) -> String {
        match self {
            HeadRole::Handover { user } => format!("handover_{user}"),
            HeadRole::Rb { user } => format!("rb_{user}"),
            HeadRole::Power { bs } => format!("power_{bs}"),
        }
    }

    pub fn width(&self, params: &EnvParams) -> usize {
        match self {
            HeadRole::Handover { .. } => params.handover_width(),
            HeadRole::Rb { .. } => params.rb_options.len(),
            HeadRole::Power { .. } => params.power_levels_dbm.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadSpec {
    pub name: String,
    pub width: usize,
    pub role: HeadRole,
}

/// Ordered output heads of a multi-headed network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<HeadSpec>", into = "Vec<HeadSpec>")]
pub struct HeadLayout {
    heads: Vec<HeadSpec>,
}

/// Families of controls an xApp may own.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ControlSet {
    pub handover: bool,
    pub rb: bool,
    pub power: bool,
}

impl HeadLayout {
    pub fn new(heads: Vec<HeadSpec>) -> Result<Self> {
        let mut names = BTreeSet::new();
        for h in &heads {
            if h.width == 0 {
                return Err(Error::Layout(format!("head {} has zero width", h.name)));
            }
            if !names.insert(h.name.as_str()) {
                return Err(Error::Layout(format!("duplicate head name {}", h.name)));
            }
        }
        Ok(Self { heads })
    }

    /// Heads for the requested control families, ordered handover, RB, power.
    pub fn for_controls(params: &EnvParams, controls: ControlSet) -> Self {
        let mut roles = Vec::new();
        if controls.handover {
            roles.extend((0..params.num_users).map(|user| HeadRole::Handover { user }));
        }
        if controls.rb {
            roles.extend((0..params.num_users).map(|user| HeadRole::Rb { user }));
        }
        if controls.power {
            roles.extend((0..params.num_bs).map(|bs| HeadRole::Power { bs }));
        }
        let heads = roles
            .into_iter()
            .map(|role| HeadSpec {
                name: role.name(),
                width: role.width(params),
                role,
            })
            .collect();
        Self { heads }
    }

    pub fn heads(&self) -> &[HeadSpec] {
        &self.heads
    }

    pub fn len(&self) -> usize {
        self.heads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heads.is_empty()
    }

    pub fn total_width(&self) -> usize {
        self.heads.iter().map(|h| h.width).sum()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.heads.iter().position(|h| h.name == name)
    }

    /// Map each of `other`'s heads to the matching head here (by name and
    /// width). Fails if any head is missing.
    pub fn routing_from(&self, other: &HeadLayout) -> Result<Vec<usize>> {
        other
            .heads
            .iter()
            .map(|h| match self.position(&h.name) {
                Some(i) if self.heads[i].width == h.width => Ok(i),
                Some(i) => Err(Error::Layout(format!(
                    "head {} has width {} here but {} in source",
                    h.name, self.heads[i].width, h.width
                ))),
                None => Err(Error::Layout(format!("head {} missing", h.name))),
            })
            .collect()
    }

    pub fn is_superset_of(&self, other: &HeadLayout) -> bool {
        self.routing_from(other).is_ok()
    }

    /// Check a per-head action vector against this layout.
    pub fn check_actions(&self, actions: &[usize]) -> Result<()> {
        if actions.len() != self.heads.len() {
            return Err(Error::Layout(format!(
                "action vector has {} entries for {} heads",
                actions.len(),
                self.heads.len()
            )));
        }
        for (a, h) in actions.iter().zip(&self.heads) {
            if *a >= h.width {
                return Err(Error::Layout(format!(
                    "action {a} out of range for head {} (width {})",
                    h.name, h.width
                )));
            }
        }
        Ok(())
    }
}

impl TryFrom<Vec<HeadSpec>> for HeadLayout {
    type Error = Error;

    fn try_from(heads: Vec<HeadSpec>) -> Result<Self> {
        HeadLayout::new(heads)
    }
}

impl From<HeadLayout> for Vec<HeadSpec> {
    fn from(layout: HeadLayout) -> Self {
        layout.heads
    }
}

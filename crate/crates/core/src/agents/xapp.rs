use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::env::{EnvParams, JointAction};
use crate::error::{Error, Result};
use crate::mitigation::ActionProposal;
use crate::nn::{ControlSet, HeadLayout, HeadRole};

pub const XAPP1: &str = "xapp1";
pub const XAPP2: &str = "xapp2";
pub const DISTILLED: &str = "distilled";

/// Name and controlled heads of one xApp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XAppSpec {
    pub name: String,
    pub controls: ControlSet,
    pub layout: HeadLayout,
}

impl XAppSpec {
    pub fn new(name: impl Into<String>, controls: ControlSet, params: &EnvParams) -> Self {
        Self {
            name: name.into(),
            controls,
            layout: HeadLayout::for_controls(params, controls),
        }
    }

    /// Handover and RB allocation.
    pub fn xapp1(params: &EnvParams) -> Self {
        Self::new(
            XAPP1,
            ControlSet {
                handover: true,
                rb: true,
                power: false,
            },
            params,
        )
    }

    /// Handover and cell power control.
    pub fn xapp2(params: &EnvParams) -> Self {
        Self::new(
            XAPP2,
            ControlSet {
                handover: true,
                rb: false,
                power: true,
            },
            params,
        )
    }

    /// Handover, RB allocation and cell power control.
    pub fn distilled(params: &EnvParams) -> Self {
        Self::new(
            DISTILLED,
            ControlSet {
                handover: true,
                rb: true,
                power: true,
            },
            params,
        )
    }

    /// Overwrite the slots this xApp owns in `base` with the chosen indices.
    pub fn decode(&self, actions: &[usize], params: &EnvParams, base: &JointAction) -> Result<JointAction> {
        self.layout.check_actions(actions)?;
        let mut out = base.clone();
        for (head, &a) in self.layout.heads().iter().zip(actions) {
            write_slot(&mut out, head.role, a, params)?;
        }
        Ok(out)
    }

    /// Decode against the stand-alone defaults: uncontrolled cells at the
    /// default power, uncontrolled RBs split equally, serving cells kept.
    pub fn decode_standalone(
        &self,
        actions: &[usize],
        params: &EnvParams,
        serving: &[Option<usize>],
    ) -> Result<JointAction> {
        self.decode(actions, params, &JointAction::baseline(params, serving))
    }

    pub fn proposal(&self, actions: &[usize], step: usize) -> Result<ActionProposal> {
        self.layout.check_actions(actions)?;
        let choices: BTreeMap<HeadRole, usize> = self
            .layout
            .heads()
            .iter()
            .map(|h| h.role)
            .zip(actions.iter().copied())
            .collect();
        Ok(ActionProposal {
            xapp: self.name.clone(),
            choices,
            step,
        })
    }
}

/// Set one control slot from a head index.
pub fn write_slot(action: &mut JointAction, role: HeadRole, index: usize, params: &EnvParams) -> Result<()> {
    let out_of_range = || Error::Layout(format!("index {index} out of range for {}", role.name()));
    match role {
        HeadRole::Handover { user } => {
            if index > params.num_bs {
                return Err(out_of_range());
            }
            action.serving[user] = index.checked_sub(1);
        }
        HeadRole::Rb { user } => {
            action.rb_request[user] = *params.rb_options.get(index).ok_or_else(out_of_range)?;
        }
        HeadRole::Power { bs } => {
            action.power_dbm[bs] = *params.power_levels_dbm.get(index).ok_or_else(out_of_range)?;
        }
    }
    Ok(())
}

//! Campaign documents: a domain, its strategy, the experiments told so far
//! and every batch proposed.

use std::collections::BTreeMap;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::domain::{Domain, ExperimentTable, Proposal, ValidationError};
use crate::gp::TrainedGp;
use crate::strategy::{StrategyConfig, StrategyError, StrategyState};
use crate::wire::{Entity, Kind};

/// Strategy fields that are not already stored on the campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct CampaignStrategy {
    pub config: StrategyConfig,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub surrogates: BTreeMap<String, TrainedGp>,
    #[serde(default)]
    pub ask_count: u64,
    #[serde(default)]
    pub tell_count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ProposalRecord {
    /// RFC 3339.
    pub timestamp: String,
    pub proposals: Vec<Proposal>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct Campaign {
    pub id: String,
    pub name: String,
    /// Starts at 1 and increments on every mutation.
    pub revision: u64,
    pub domain: Domain,
    pub strategy: CampaignStrategy,
    #[serde(default)]
    pub experiments: ExperimentTable,
    #[serde(default)]
    pub proposal_history: Vec<ProposalRecord>,
}

impl Campaign {
    pub fn new(
        id: impl Into<String>,
        name: impl Into<String>,
        domain: Domain,
        config: StrategyConfig,
    ) -> Result<Self, Vec<ValidationError>> {
        let campaign = Self {
            id: id.into(),
            name: name.into(),
            revision: 1,
            domain,
            strategy: CampaignStrategy {
                config,
                surrogates: BTreeMap::new(),
                ask_count: 0,
                tell_count: 0,
            },
            experiments: ExperimentTable::default(),
            proposal_history: Vec::new(),
        };
        campaign.validate_entity()?;
        Ok(campaign)
    }

    /// The strategy state this campaign stands for.
    pub fn state(&self) -> StrategyState {
        StrategyState {
            config: self.strategy.config.clone(),
            domain: self.domain.clone(),
            experiments: self.experiments.clone(),
            surrogates: self.strategy.surrogates.clone(),
            ask_count: self.strategy.ask_count,
            tell_count: self.strategy.tell_count,
        }
    }

    fn absorb(&mut self, state: StrategyState) {
        self.experiments = state.experiments;
        self.strategy.surrogates = state.surrogates;
        self.strategy.ask_count = state.ask_count;
        self.strategy.tell_count = state.tell_count;
        self.revision += 1;
    }

    /// Runs an ask and records the batch under `timestamp`.
    pub fn ask(
        &mut self,
        n: usize,
        timestamp: impl Into<String>,
    ) -> Result<Vec<Proposal>, StrategyError> {
        let mut state = self.state();
        let proposals = state.ask(n)?;
        self.absorb(state);
        self.proposal_history.push(ProposalRecord {
            timestamp: timestamp.into(),
            proposals: proposals.clone(),
        });
        Ok(proposals)
    }

    /// Appends experiments; returns warnings.
    pub fn tell(
        &mut self,
        table: &ExperimentTable,
    ) -> Result<Vec<ValidationError>, Vec<ValidationError>> {
        let mut state = self.state();
        let warnings = state.tell(table)?;
        self.absorb(state);
        Ok(warnings)
    }
}

impl Entity for Campaign {
    const KIND: Kind = Kind::Campaign;

    fn validate_entity(&self) -> Result<(), Vec<ValidationError>> {
        let mut errors = Vec::new();
        if self.id.trim().is_empty() {
            errors.push(ValidationError::new("id", "id must not be empty"));
        }
        if self.revision == 0 {
            errors.push(ValidationError::new("revision", "revision starts at 1"));
        }
        if let Err(e) = self.state().validate() {
            errors.extend(e.into_iter().map(|mut e| {
                if e.path.starts_with("config") || e.path.starts_with("surrogates") {
                    e.path = format!("strategy.{}", e.path);
                }
                e
            }));
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }
}

impl Entity for StrategyState {
    const KIND: Kind = Kind::Strategy;

    fn validate_entity(&self) -> Result<(), Vec<ValidationError>> {
        self.validate()
    }
}

impl Entity for TrainedGp {
    const KIND: Kind = Kind::Surrogate;

    fn validate_entity(&self) -> Result<(), Vec<ValidationError>> {
        self.validate()
    }
}
